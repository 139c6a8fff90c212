//! Exact counts of integer matrices `[[a, b], [c, d]]` with `ad - bc = r`
//! inside the box `max(|a|, |b|, |c|, |d|) <= X`, together with the
//! restricted divisor function, its shifted convolution, the `r = 0` count
//! and the explicit main terms.
//!
//! Several counters compute the same quantity along unrelated paths so they
//! can check one another:
//!
//! * [`count_positive_brute`] enumerates the pairs `(a, d)` against a
//!   histogram of products `bc`;
//! * [`count_congruence`] reads `ad - bc = r` as `bc ≡ -r (mod a)` and steps
//!   through residue classes of `c`;
//! * [`shifted_convolution`] sums `τ*_X(n) τ*_X(n + r)` over a sieved table.
//!
//! The all-signs count [`count_allsigns`] is assembled exactly from
//! positive-orthant pieces; [`count_allsigns_enumerate`] is its oracle.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{self, gcd, mod_inverse};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CountError {
    #[error("{what} = {value} exceeds the configured limit {limit}")]
    LimitExceeded {
        what: &'static str,
        value: u64,
        limit: u64,
    },
    #[error("table of {entries} entries exceeds the memory budget of {budget} entries")]
    MemoryBudgetExceeded { entries: u64, budget: u64 },
    #[error("main-term variant {variant:?} is not defined for r = {r}")]
    InvalidVariant { variant: MainTermVariant, r: i64 },
    #[error("determinant must be nonzero")]
    ZeroDeterminant,
    #[error("weight sequence has length {got}, expected {expected}")]
    WeightLength { got: usize, expected: usize },
    #[error("count does not fit in 64 bits")]
    Overflow,
}

/// Caps that keep every counter inside a desk-scale time and memory budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Limits {
    /// Largest `X` accepted by the histogram counter and the weighted count.
    pub brute_max_x: u64,
    /// Largest `X` accepted by the direct enumeration oracles.
    pub enumerate_max_x: u64,
    /// Largest `X` accepted by the congruence counter.
    pub congruence_max_x: u64,
    /// Largest number of 32-bit table entries any sieve may allocate.
    pub max_table_entries: u64,
    /// Largest `X` accepted by the zero-determinant counter.
    pub zero_det_max_x: u64,
}

impl Default for Limits {
    fn default() -> Self {
        Self {
            brute_max_x: 2000,
            enumerate_max_x: 60,
            congruence_max_x: 20_000,
            max_table_entries: 1 << 27,
            zero_det_max_x: 10_000_000,
        }
    }
}

impl Limits {
    fn check(what: &'static str, value: u64, limit: u64) -> Result<(), CountError> {
        if value > limit {
            Err(CountError::LimitExceeded { what, value, limit })
        } else {
            Ok(())
        }
    }

    fn check_table(&self, entries: u64) -> Result<(), CountError> {
        if entries > self.max_table_entries {
            Err(CountError::MemoryBudgetExceeded {
                entries,
                budget: self.max_table_entries,
            })
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Orthant {
    AllSigns,
    Positive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Brute,
    DivisorSieve,
    Congruence,
    CoprimeFractions,
}

/// An exact count together with how it was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct BoxCount {
    pub r: i64,
    pub x: u64,
    pub value: u64,
    pub orthant: Orthant,
    pub algorithm: Algorithm,
}

/// Sieved values of `τ*_M(n) = #{(a, b) : 1 <= a, b <= M, ab = n}`.
#[derive(Debug, Clone)]
pub struct RestrictedDivisorTable {
    m: u64,
    limit: u64,
    // index 0 unused
    values: Vec<u32>,
}

impl RestrictedDivisorTable {
    pub fn m(&self) -> u64 {
        self.m
    }

    pub fn limit(&self) -> u64 {
        self.limit
    }

    /// `τ*_M(n)`; zero outside `[1, limit]`.
    pub fn get(&self, n: u64) -> u32 {
        if n == 0 || n > self.limit {
            0
        } else {
            self.values[n as usize]
        }
    }

    pub fn values(&self) -> &[u32] {
        &self.values[1..]
    }
}

/// Builds `τ*_M(n)` for `n <= limit` by looping over `a <= M` and
/// `b <= min(M, limit / a)`.
pub fn restricted_divisor_sieve(
    m: u64,
    limit: u64,
    limits: &Limits,
) -> Result<RestrictedDivisorTable, CountError> {
    let limit = limit.min(m.saturating_mul(m));
    limits.check_table(limit + 1)?;
    let mut values = vec![0u32; limit as usize + 1];
    for a in 1..=m.min(limit) {
        let b_max = m.min(limit / a);
        // count (a, b) and (b, a) together
        if b_max < a {
            break;
        }
        values[(a * a) as usize] += 1;
        let mut n = a * (a + 1);
        for _ in (a + 1)..=b_max {
            values[n as usize] += 2;
            n += a;
        }
    }
    Ok(RestrictedDivisorTable { m, limit, values })
}

/// `τ*_M(n)` for a single `n`, by divisor enumeration.
pub fn restricted_divisor_count(m: u64, n: u64) -> u64 {
    if n == 0 || n > m.saturating_mul(m) {
        return 0;
    }
    arith::factorize(n)
        .map(|f| {
            f.divisors()
                .into_iter()
                .filter(|&d| d <= m && n / d <= m)
                .count() as u64
        })
        .unwrap_or(0)
}

fn to_u64(v: u128) -> Result<u64, CountError> {
    u64::try_from(v).map_err(|_| CountError::Overflow)
}

/// `S_r(X) = #{1 <= a, b, c, d <= X : ad - bc = r}` from a histogram of the
/// products `bc`, scanned by the pairs `(a, d)`. Serves as the oracle for the
/// other positive-orthant counters.
pub fn count_positive_brute(r: i64, x: u64, limits: &Limits) -> Result<BoxCount, CountError> {
    if r == 0 {
        return Err(CountError::ZeroDeterminant);
    }
    Limits::check("X", x, limits.brute_max_x)?;
    let max = x * x;
    limits.check_table(max + 1)?;
    let mut products = vec![0u32; max as usize + 1];
    for b in 1..=x {
        for c in 1..=x {
            products[(b * c) as usize] += 1;
        }
    }
    let mut total: u128 = 0;
    for a in 1..=x {
        for d in 1..=x {
            let bc = (a * d) as i64 - r;
            if bc >= 1 && bc as u64 <= max {
                total += products[bc as usize] as u128;
            }
        }
    }
    Ok(BoxCount {
        r,
        x,
        value: to_u64(total)?,
        orthant: Orthant::Positive,
        algorithm: Algorithm::Brute,
    })
}

/// `S_r(X)` from the congruence `bc ≡ -r (mod a)` with `a - r <= bc <= aX - r`.
///
/// For each `(a, b)` the admissible `c` form one residue class modulo
/// `a / gcd(a, b)`, or none when `gcd(a, b) ∤ r`; they are counted in O(1).
pub fn count_congruence(r: i64, x: u64, limits: &Limits) -> Result<BoxCount, CountError> {
    if r == 0 {
        return Err(CountError::ZeroDeterminant);
    }
    Limits::check("X", x, limits.congruence_max_x)?;
    let xi = x as i64;
    let mut total: u128 = 0;
    for a in 1..=xi {
        let lo_bc = a - r;
        let hi_bc = a * xi - r;
        if hi_bc < 1 {
            continue;
        }
        for b in 1..=xi {
            let g = gcd(a as u64, b as u64) as i64;
            if r % g != 0 {
                continue;
            }
            let modulus = a / g;
            // c ≡ (-r/g) · (b/g)^{-1} (mod a/g)
            let residue = if modulus == 1 {
                0
            } else {
                let inv = mod_inverse(b / g, modulus as u64).expect("coprime by construction") as i128;
                ((-(r / g)) as i128 * inv).rem_euclid(modulus as i128) as i64
            };
            let c_lo = div_ceil(lo_bc, b).max(1);
            let c_hi = hi_bc.div_euclid(b).min(xi);
            if c_lo > c_hi {
                continue;
            }
            total += count_in_class(c_lo, c_hi, residue, modulus) as u128;
        }
    }
    Ok(BoxCount {
        r,
        x,
        value: to_u64(total)?,
        orthant: Orthant::Positive,
        algorithm: Algorithm::Congruence,
    })
}

fn div_ceil(a: i64, b: i64) -> i64 {
    -((-a).div_euclid(b))
}

/// Number of `t` in `[lo, hi]` with `t ≡ residue (mod modulus)`.
fn count_in_class(lo: i64, hi: i64, residue: i64, modulus: i64) -> i64 {
    let first = lo + (residue - lo).rem_euclid(modulus);
    if first > hi {
        0
    } else {
        (hi - first) / modulus + 1
    }
}

/// `Σ_{n >= 1} τ*_M(n) τ*_M(n + r)`, which equals `S_r(M)`.
pub fn shifted_convolution(m: u64, r: i64, limits: &Limits) -> Result<u64, CountError> {
    if r == 0 {
        return Err(CountError::ZeroDeterminant);
    }
    let table = restricted_divisor_sieve(m, m * m, limits)?;
    Ok(to_u64(shifted_sum(&table, r.unsigned_abs()))?)
}

fn shifted_sum(table: &RestrictedDivisorTable, shift: u64) -> u128 {
    let v = table.values();
    let shift = shift as usize;
    if shift >= v.len() {
        return 0;
    }
    v.iter()
        .zip(&v[shift..])
        .map(|(&p, &q)| p as u64 * q as u64)
        .sum::<u64>() as u128
}

/// Positive-orthant engine used inside [`count_allsigns_with`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Sieve,
    Congruence,
}

/// `𝒮_r(X) = #{(a, b, c, d) ∈ [-X, X]^4 : ad - bc = r}` via the sieve engine.
pub fn count_allsigns(r: i64, x: u64, limits: &Limits) -> Result<BoxCount, CountError> {
    count_allsigns_with(r, x, Engine::Sieve, limits)
}

/// Exact all-signs count assembled from sign classes of `(ad, bc)`:
///
/// `𝒮_r(X) = 8 S_|r|(X) + 4 Σ_{0<m<|r|} τ*_X(m) τ*_X(|r| - m) + 4 (4X + 1) τ*_X(|r|)`.
///
/// The first term covers `ad` and `bc` of equal sign, the second the class
/// `|ad| + |bc| = |r|` with opposite signs, the third all tuples with a zero
/// coordinate.
pub fn count_allsigns_with(
    r: i64,
    x: u64,
    engine: Engine,
    limits: &Limits,
) -> Result<BoxCount, CountError> {
    if r == 0 {
        return Err(CountError::ZeroDeterminant);
    }
    let s = r.unsigned_abs();
    let max = x * x;
    let (positive, mixed, boundary_tau) = if 2 * max < s {
        (0u128, 0u128, 0u64)
    } else {
        match engine {
            Engine::Sieve => {
                let table = restricted_divisor_sieve(x, max, limits)?;
                let positive = shifted_sum(&table, s);
                let mixed: u128 = (1..s)
                    .filter(|&k| k <= max && s - k <= max)
                    .map(|k| table.get(k) as u128 * table.get(s - k) as u128)
                    .sum();
                (positive, mixed, table.get(s) as u64)
            }
            Engine::Congruence => {
                let positive = count_congruence(s as i64, x, limits)?.value as u128;
                let mixed: u128 = (1..s)
                    .filter(|&k| k <= max && s - k <= max)
                    .map(|k| {
                        restricted_divisor_count(x, k) as u128
                            * restricted_divisor_count(x, s - k) as u128
                    })
                    .sum();
                (positive, mixed, restricted_divisor_count(x, s))
            }
        }
    };
    let total = 8 * positive + 4 * mixed + 4 * (4 * x as u128 + 1) * boundary_tau as u128;
    Ok(BoxCount {
        r,
        x,
        value: to_u64(total)?,
        orthant: Orthant::AllSigns,
        algorithm: match engine {
            Engine::Sieve => Algorithm::DivisorSieve,
            Engine::Congruence => Algorithm::Congruence,
        },
    })
}

/// Direct enumeration of `[-X, X]^4` (with `d` solved from the other three
/// coordinates). Oracle for [`count_allsigns`].
pub fn count_allsigns_enumerate(r: i64, x: u64, limits: &Limits) -> Result<BoxCount, CountError> {
    Limits::check("X", x, limits.enumerate_max_x)?;
    let (total, _) = enumerate_signs(r, x as i64);
    Ok(BoxCount {
        r,
        x,
        value: total,
        orthant: Orthant::AllSigns,
        algorithm: Algorithm::Brute,
    })
}

/// Tuples in the all-signs box that are not images of the positive orthant
/// under the eight sign symmetries: those with a zero coordinate or with
/// `ad` and `bc` of opposite signs. Counted by direct enumeration.
pub fn allsigns_surplus_enumerate(r: i64, x: u64, limits: &Limits) -> Result<u64, CountError> {
    Limits::check("X", x, limits.enumerate_max_x)?;
    Ok(enumerate_signs(r, x as i64).1)
}

fn enumerate_signs(r: i64, x: i64) -> (u64, u64) {
    let (mut total, mut surplus) = (0u64, 0u64);
    for a in -x..=x {
        for b in -x..=x {
            for c in -x..=x {
                if a == 0 {
                    if -b * c == r {
                        total += (2 * x + 1) as u64;
                        surplus += (2 * x + 1) as u64;
                    }
                    continue;
                }
                let num = r + b * c;
                if num % a != 0 {
                    continue;
                }
                let d = num / a;
                if d.abs() > x {
                    continue;
                }
                total += 1;
                let ad = a * d;
                let bc = b * c;
                if ad == 0 || bc == 0 || (ad > 0) != (bc > 0) {
                    surplus += 1;
                }
            }
        }
    }
    (total, surplus)
}

/// `#{1 <= x1, x2, x3, x4 <= X : x1 x2 = x3 x4}` through the coprime-fraction
/// identity `Σ_{(a, b) = 1, a, b <= X} ⌊X / max(a, b)⌋²`, grouped by
/// `k = max(a, b)` (one pair for `k = 1`, `2φ(k)` pairs otherwise).
pub fn count_zero_det(x: u64, limits: &Limits) -> Result<BoxCount, CountError> {
    Limits::check("X", x, limits.zero_det_max_x)?;
    let phi = arith::totient_table(x as usize);
    let mut total: u128 = 0;
    for k in 1..=x {
        let pairs = if k == 1 { 1 } else { 2 * phi[k as usize] as u128 };
        let q = (x / k) as u128;
        total += pairs * q * q;
    }
    Ok(BoxCount {
        r: 0,
        x,
        value: to_u64(total)?,
        orthant: Orthant::Positive,
        algorithm: Algorithm::CoprimeFractions,
    })
}

/// Oracle for [`count_zero_det`]: `Σ_n τ*_X(n)²`, the number of pairs of
/// factorizations with equal product.
pub fn count_zero_det_brute(x: u64, limits: &Limits) -> Result<BoxCount, CountError> {
    Limits::check("X", x, limits.enumerate_max_x.max(200))?;
    let table = restricted_divisor_sieve(x, x * x, limits)?;
    let total: u128 = table.values().iter().map(|&t| (t as u128) * (t as u128)).sum();
    Ok(BoxCount {
        r: 0,
        x,
        value: to_u64(total)?,
        orthant: Orthant::Positive,
        algorithm: Algorithm::Brute,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MainTermVariant {
    /// `(16/ζ(2)) (σ(|r|)/|r|) X²`, the all-signs count.
    AllSigns16,
    /// `(2/ζ(2)) (σ(r)/r) X²`, the positive-orthant count, `r > 0`.
    Positive2,
    /// `(12/π²) X² log X`, the `r = 0` count in the positive orthant.
    ZeroDet,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MainTermValue {
    pub r: i64,
    pub x: f64,
    pub value: f64,
    pub variant: MainTermVariant,
}

const ZETA2: f64 = PI * PI / 6.0;

pub fn main_term(r: i64, x: f64, variant: MainTermVariant) -> Result<MainTermValue, CountError> {
    let invalid = CountError::InvalidVariant { variant, r };
    let value = match variant {
        MainTermVariant::AllSigns16 | MainTermVariant::Positive2 => {
            if r == 0 || (variant == MainTermVariant::Positive2 && r < 0) {
                return Err(invalid);
            }
            let s = r.unsigned_abs();
            let ratio = arith::sigma(s).expect("nonzero") as f64 / s as f64;
            let lead = if variant == MainTermVariant::AllSigns16 { 16.0 } else { 2.0 };
            lead / ZETA2 * ratio * x * x
        }
        MainTermVariant::ZeroDet => {
            if r != 0 {
                return Err(invalid);
            }
            12.0 / (PI * PI) * x * x * x.ln()
        }
    };
    Ok(MainTermValue {
        r,
        x,
        value,
        variant,
    })
}

/// `Σ α(|a|)` over all-signs tuples with `ad - bc = r`. `alpha[k]` is the
/// weight of `|a| = k` for `k = 0..=X`.
///
/// Uses the positive-orthant table weighted along `a`:
/// `Σ_m N_α(m) N(m - r)` where `N_α(m) = Σ_{ad = m} α(|a|)` over the box.
pub fn count_weighted(
    r: i64,
    x: u64,
    alpha: &[Complex64],
    limits: &Limits,
) -> Result<Complex64, CountError> {
    if r == 0 {
        return Err(CountError::ZeroDeterminant);
    }
    Limits::check("X", x, limits.brute_max_x)?;
    if alpha.len() != x as usize + 1 {
        return Err(CountError::WeightLength {
            got: alpha.len(),
            expected: x as usize + 1,
        });
    }
    let max = x * x;
    limits.check_table(2 * (max + 1))?;
    let plain = restricted_divisor_sieve(x, max, limits)?;
    let mut weighted = vec![Complex64::new(0.0, 0.0); max as usize + 1];
    for a in 1..=x {
        for d in 1..=x {
            weighted[(a * d) as usize] += alpha[a as usize];
        }
    }
    let xi = x as i64;
    let maxi = max as i64;
    let a_sum: Complex64 = alpha[1..].iter().sum();
    let n_alpha = |m: i64| -> Complex64 {
        if m == 0 {
            alpha[0] * (2 * xi + 1) as f64 + a_sum * 2.0
        } else {
            weighted[m.unsigned_abs() as usize] * 2.0
        }
    };
    let n_plain = |k: i64| -> f64 {
        if k == 0 {
            (4 * xi + 1) as f64
        } else {
            2.0 * plain.get(k.unsigned_abs()) as f64
        }
    };
    let lo = (-maxi).max(r - maxi);
    let hi = maxi.min(r + maxi);
    let mut total = Complex64::new(0.0, 0.0);
    for m in lo..=hi {
        let np = n_plain(m - r);
        if np != 0.0 {
            total += n_alpha(m) * np;
        }
    }
    Ok(total)
}

/// Enumeration oracle for [`count_weighted`].
pub fn count_weighted_enumerate(
    r: i64,
    x: u64,
    alpha: &[Complex64],
    limits: &Limits,
) -> Result<Complex64, CountError> {
    Limits::check("X", x, limits.enumerate_max_x)?;
    if alpha.len() != x as usize + 1 {
        return Err(CountError::WeightLength {
            got: alpha.len(),
            expected: x as usize + 1,
        });
    }
    let x = x as i64;
    let mut total = Complex64::new(0.0, 0.0);
    for a in -x..=x {
        let wa = alpha[a.unsigned_abs() as usize];
        for b in -x..=x {
            for c in -x..=x {
                if a == 0 {
                    if -b * c == r {
                        total += wa * (2 * x + 1) as f64;
                    }
                } else {
                    let num = r + b * c;
                    if num % a == 0 && (num / a).abs() <= x {
                        total += wa;
                    }
                }
            }
        }
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn lim() -> Limits {
        Limits::default()
    }

    fn four_loop(r: i64, x: i64) -> u64 {
        let mut n = 0;
        for a in -x..=x {
            for b in -x..=x {
                for c in -x..=x {
                    for d in -x..=x {
                        if a * d - b * c == r {
                            n += 1;
                        }
                    }
                }
            }
        }
        n
    }

    fn positive_four_loop(r: i64, x: i64) -> u64 {
        let mut n = 0;
        for a in 1..=x {
            for b in 1..=x {
                for c in 1..=x {
                    for d in 1..=x {
                        if a * d - b * c == r {
                            n += 1;
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn positive_examples() {
        assert_eq!(count_positive_brute(1, 1, &lim()).unwrap().value, 0);
        assert_eq!(count_positive_brute(1, 2, &lim()).unwrap().value, 2);
        assert_eq!(count_positive_brute(-1, 2, &lim()).unwrap().value, 2);
        assert_eq!(positive_four_loop(1, 2), 2);
        assert_eq!(count_congruence(1, 2, &lim()).unwrap().value, 2);
        assert_eq!(count_congruence(1, 1, &lim()).unwrap().value, 0);
        assert_eq!(
            count_congruence(6, 50, &lim()).unwrap().value,
            count_positive_brute(6, 50, &lim()).unwrap().value
        );
        assert_eq!(shifted_convolution(2, 1, &lim()).unwrap(), 2);
        assert_eq!(shifted_convolution(1, 1, &lim()).unwrap(), 0);
        assert_eq!(
            shifted_convolution(50, 6, &lim()).unwrap(),
            count_positive_brute(6, 50, &lim()).unwrap().value
        );
    }

    #[test]
    fn small_boxes_match_four_loops() {
        for x in 1..=6i64 {
            for r in [-7i64, -3, -2, -1, 1, 2, 3, 5, 12] {
                let want = positive_four_loop(r, x);
                assert_eq!(count_positive_brute(r, x as u64, &lim()).unwrap().value, want);
                assert_eq!(count_congruence(r, x as u64, &lim()).unwrap().value, want);
                assert_eq!(shifted_convolution(x as u64, r, &lim()).unwrap(), want);
            }
        }
        for x in 1..=5i64 {
            for r in [-9i64, -4, -1, 1, 2, 6, 25, 50, 51] {
                let want = four_loop(r, x);
                assert_eq!(count_allsigns_enumerate(r, x as u64, &lim()).unwrap().value, want);
                assert_eq!(count_allsigns(r, x as u64, &lim()).unwrap().value, want, "r={r} X={x}");
                assert_eq!(
                    count_allsigns_with(r, x as u64, Engine::Congruence, &lim()).unwrap().value,
                    want
                );
            }
        }
    }

    #[test]
    fn allsigns_examples() {
        assert_eq!(count_allsigns(1, 1, &lim()).unwrap().value, 20);
        let v = count_allsigns(1, 2, &lim()).unwrap().value;
        assert_eq!(v, four_loop(1, 2));
        assert!(v >= 16);
        for r in [1i64, 3, 10] {
            assert_eq!(
                count_allsigns(r, 17, &lim()).unwrap().value,
                count_allsigns(-r, 17, &lim()).unwrap().value
            );
        }
        // beyond the largest reachable determinant 2X^2
        assert_eq!(count_allsigns(51, 5, &lim()).unwrap().value, 0);
        assert_eq!(count_allsigns(0, 5, &lim()), Err(CountError::ZeroDeterminant));
    }

    #[test]
    fn surplus_matches_enumerated_boundary() {
        for x in [3u64, 10, 25, 40] {
            for r in [1i64, 2, 6, -6] {
                let all = count_allsigns(r, x, &lim()).unwrap().value;
                let pos = count_positive_brute(r.abs(), x, &lim()).unwrap().value;
                assert!(all >= 8 * pos);
                assert_eq!(all - 8 * pos, allsigns_surplus_enumerate(r, x, &lim()).unwrap());
            }
        }
    }

    #[test]
    fn sieve_examples_and_invariants() {
        let t2 = restricted_divisor_sieve(2, 4, &lim()).unwrap();
        assert_eq!(t2.get(4), 1);
        let t3 = restricted_divisor_sieve(3, 9, &lim()).unwrap();
        assert_eq!(t3.get(6), 2);
        assert_eq!(t3.get(4), 1);
        assert_eq!(t3.get(10), 0);
        let m = 300;
        let t = restricted_divisor_sieve(m, m * m, &lim()).unwrap();
        for n in 1..=m * m {
            let v = t.get(n) as u64;
            if n <= m {
                assert_eq!(v, arith::tau(n).unwrap());
            } else if n % 997 == 0 || n < 2000 {
                assert_eq!(v, restricted_divisor_count(m, n));
                assert!(v <= arith::tau(n).unwrap());
            }
        }
        assert_eq!(t.get(m * m + 1), 0);
        let tiny = Limits {
            max_table_entries: 100,
            ..lim()
        };
        assert!(matches!(
            restricted_divisor_sieve(20, 400, &tiny),
            Err(CountError::MemoryBudgetExceeded { .. })
        ));
    }

    #[test]
    fn limits_are_enforced() {
        let l = lim();
        assert!(matches!(
            count_positive_brute(1, 2001, &l),
            Err(CountError::LimitExceeded { .. })
        ));
        assert!(matches!(
            count_allsigns_enumerate(1, 61, &l),
            Err(CountError::LimitExceeded { .. })
        ));
    }

    #[test]
    fn zero_det_examples() {
        assert_eq!(count_zero_det(1, &lim()).unwrap().value, 1);
        assert_eq!(count_zero_det(2, &lim()).unwrap().value, 6);
        for x in 1..=12u64 {
            let want = {
                let x = x as i64;
                let mut n = 0;
                for a in 1..=x {
                    for b in 1..=x {
                        for c in 1..=x {
                            for d in 1..=x {
                                if a * b == c * d {
                                    n += 1;
                                }
                            }
                        }
                    }
                }
                n
            };
            assert_eq!(count_zero_det(x, &lim()).unwrap().value, want);
            // the unreduced pair sum from the identity
            let pairs: u64 = (1..=x)
                .flat_map(|a| (1..=x).map(move |b| (a, b)))
                .filter(|&(a, b)| gcd(a, b) == 1)
                .map(|(a, b)| (x / a.max(b)).pow(2))
                .sum();
            assert_eq!(pairs, want);
        }
        let v = count_zero_det(100, &lim()).unwrap().value as f64;
        let mt = main_term(0, 100.0, MainTermVariant::ZeroDet).unwrap().value;
        assert!((v / mt - 1.0).abs() < 0.25);
    }

    #[test]
    fn main_term_examples() {
        let v = main_term(1, 100.0, MainTermVariant::AllSigns16).unwrap().value;
        assert!((v - 96.0 / (PI * PI) * 1e4).abs() < 1e-9);
        assert!((v - 97268.0).abs() < 1.0);
        for x in [1.0, 7.5, 300.0] {
            let a = main_term(1, x, MainTermVariant::AllSigns16).unwrap().value;
            let p = main_term(1, x, MainTermVariant::Positive2).unwrap().value;
            assert_eq!(a / p, 8.0);
        }
        let v = main_term(6, 1.0, MainTermVariant::AllSigns16).unwrap().value;
        assert!((v - 192.0 / (PI * PI)).abs() < 1e-12);
        assert!(matches!(
            main_term(-2, 10.0, MainTermVariant::Positive2),
            Err(CountError::InvalidVariant { .. })
        ));
        assert!(main_term(0, 10.0, MainTermVariant::AllSigns16).is_err());
        assert!(main_term(3, 10.0, MainTermVariant::ZeroDet).is_err());
    }

    #[test]
    fn weighted_examples() {
        let l = lim();
        let ones = vec![Complex64::new(1.0, 0.0); 8];
        for r in [1i64, -2, 5] {
            let w = count_weighted(r, 7, &ones, &l).unwrap();
            assert_eq!(w.re, count_allsigns(r, 7, &l).unwrap().value as f64);
            assert_eq!(w.im, 0.0);
        }
        // |a| = 1 only, X = 1
        let alpha = vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)];
        let w = count_weighted(1, 1, &alpha, &l).unwrap();
        let oracle = count_weighted_enumerate(1, 1, &alpha, &l).unwrap();
        assert_eq!(w, oracle);
        assert!(w.re <= 20.0);
        // by hand, a = 1: (d, bc) = (1, 0) in 5 ways or (0, -1) in 2 ways; a = -1 mirrors it
        assert_eq!(w.re, 14.0);
        let alpha: Vec<_> = (0..=2).map(|a| Complex64::new(a as f64, 0.0)).collect();
        assert_eq!(
            count_weighted(1, 2, &alpha, &l).unwrap(),
            count_weighted_enumerate(1, 2, &alpha, &l).unwrap()
        );
        assert!(matches!(
            count_weighted(1, 2, &ones, &l),
            Err(CountError::WeightLength { .. })
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn weighted_matches_enumeration(
            r in (-12i64..=12).prop_filter("nonzero", |r| *r != 0),
            x in 1u64..=9,
            seed in any::<u64>(),
        ) {
            let alpha: Vec<Complex64> = (0..=x)
                .map(|k| {
                    let h = seed.wrapping_mul(6364136223846793005).wrapping_add(k * 1442695040888963407);
                    Complex64::new(((h >> 40) % 17) as f64 - 8.0, ((h >> 20) % 5) as f64)
                })
                .collect();
            let l = lim();
            let fast = count_weighted(r, x, &alpha, &l).unwrap();
            let slow = count_weighted_enumerate(r, x, &alpha, &l).unwrap();
            prop_assert!((fast - slow).norm() < 1e-9);
        }

        #[test]
        fn counts_monotone_in_box(r in (-20i64..=20).prop_filter("nonzero", |r| *r != 0), x in 1u64..40) {
            let l = lim();
            let a = count_allsigns(r, x, &l).unwrap().value;
            let b = count_allsigns(r, x + 1, &l).unwrap().value;
            prop_assert!(a <= b);
            let p = count_positive_brute(r, x, &l).unwrap().value;
            let q = count_positive_brute(r, x + 1, &l).unwrap().value;
            prop_assert!(p <= q);
        }
    }
}
