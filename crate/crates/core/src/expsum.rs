//! Kloosterman and Ramanujan sums, their Weil-bound audit and the
//! aggregate audit of Kloosterman sums weighted by negative powers of the
//! frequencies and the modulus.

use std::f64::consts::TAU;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::arith::{self, gcd, gcd_i64, mod_inverse};
use crate::smooth::WeightProfile;

/// Largest modulus accepted by the direct loop.
pub const DIRECT_BUDGET: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExpSumError {
    #[error("modulus {c} exceeds the direct-loop budget {budget}")]
    BudgetExceeded { c: u64, budget: u64 },
    #[error("modulus must be positive")]
    ZeroModulus,
    #[error("S({m}, {n}; {c}) has imaginary part {imag:e}, expected a real value")]
    NotReal { m: i64, n: i64, c: u64, imag: f64 },
    #[error("{} queries violate the Weil bound, first {:?}", .violations.len(), .violations.first())]
    AuditFailure { violations: Vec<ExpSumQuery> },
    #[error(transparent)]
    Arith(#[from] arith::ArithError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ExpSumQuery {
    pub m: i64,
    pub n: i64,
    pub c: u64,
}

impl ExpSumQuery {
    pub fn new(m: i64, n: i64, c: u64) -> Self {
        Self { m, n, c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExpSumResult {
    pub value: f64,
    pub weil_cap: f64,
}

/// `τ(c) · gcd(m, n, c)^{1/2} · c^{1/2}`.
pub fn weil_cap(q: ExpSumQuery) -> f64 {
    let g = gcd(gcd_i64(q.m, q.n), q.c);
    let tau = arith::tau(q.c).expect("c >= 1") as f64;
    tau * (g as f64).sqrt() * (q.c as f64).sqrt()
}

/// Compensated accumulator for a complex sum.
#[derive(Default)]
struct Kahan {
    re: f64,
    im: f64,
    cre: f64,
    cim: f64,
}

impl Kahan {
    fn add(&mut self, re: f64, im: f64) {
        let y = re - self.cre;
        let t = self.re + y;
        self.cre = (t - self.re) - y;
        self.re = t;
        let y = im - self.cim;
        let t = self.im + y;
        self.cim = (t - self.im) - y;
        self.im = t;
    }
}

/// `S(m, n; c) = Σ_{x mod c, (x, c) = 1} e((m x + n x̄) / c)` by direct loop.
pub fn kloosterman_direct(q: ExpSumQuery) -> Result<ExpSumResult, ExpSumError> {
    kloosterman_direct_with(q, |x, c| mod_inverse(x as i64, c).expect("unit"))
}

/// Direct loop with a caller-supplied modular inverse. Exposed so that the
/// verification suite can check its own sensitivity to a broken inverse.
#[doc(hidden)]
pub fn kloosterman_direct_with<F>(q: ExpSumQuery, inverse: F) -> Result<ExpSumResult, ExpSumError>
where
    F: Fn(u64, u64) -> u64,
{
    let (value, imag) = kloosterman_parts(q, &inverse)?;
    let phi = arith::totient(q.c)? as f64;
    if imag.abs() > 1e-9 * phi.max(1.0) {
        return Err(ExpSumError::NotReal {
            m: q.m,
            n: q.n,
            c: q.c,
            imag,
        });
    }
    Ok(ExpSumResult {
        value,
        weil_cap: weil_cap(q),
    })
}

fn kloosterman_parts<F>(q: ExpSumQuery, inverse: &F) -> Result<(f64, f64), ExpSumError>
where
    F: Fn(u64, u64) -> u64,
{
    let c = q.c;
    if c == 0 {
        return Err(ExpSumError::ZeroModulus);
    }
    if c > DIRECT_BUDGET {
        return Err(ExpSumError::BudgetExceeded {
            c,
            budget: DIRECT_BUDGET,
        });
    }
    if c == 1 {
        return Ok((1.0, 0.0));
    }
    let m = q.m.rem_euclid(c as i64) as u128;
    let n = q.n.rem_euclid(c as i64) as u128;
    let cc = c as u128;
    let mut acc = Kahan::default();
    for x in 1..c {
        if gcd(x, c) != 1 {
            continue;
        }
        let xb = inverse(x, c) as u128;
        let t = (m * x as u128 + n * xb) % cc;
        let (s, co) = (TAU * t as f64 / c as f64).sin_cos();
        acc.add(co, s);
    }
    Ok((acc.re, acc.im))
}

/// `S(m, n; c)` through twisted multiplicativity
/// `S(m, n; uv) = S(m v̄, n v̄; u) · S(m ū, n ū; v)` for coprime `u, v`,
/// splitting off one prime power at a time.
pub fn kloosterman_crt(q: ExpSumQuery) -> Result<ExpSumResult, ExpSumError> {
    if q.c == 0 {
        return Err(ExpSumError::ZeroModulus);
    }
    let f = arith::factorize(q.c)?;
    let mut value = 1.0;
    let (mut m, mut n) = (q.m as i128, q.n as i128);
    let mut rest = q.c;
    for &(p, e) in f.prime_powers() {
        let u = p.pow(e);
        let v = rest / u;
        // v̄ modulo u, ū modulo v
        let v_bar = mod_inverse((v % u) as i64, u)? as i128;
        let u_bar = if v == 1 {
            0
        } else {
            mod_inverse((u % v) as i64, v)? as i128
        };
        let local = ExpSumQuery {
            m: (m * v_bar).rem_euclid(u as i128) as i64,
            n: (n * v_bar).rem_euclid(u as i128) as i64,
            c: u,
        };
        value *= kloosterman_direct(local)?.value;
        if v == 1 {
            break;
        }
        m = (m * u_bar).rem_euclid(v as i128);
        n = (n * u_bar).rem_euclid(v as i128);
        rest = v;
    }
    Ok(ExpSumResult {
        value,
        weil_cap: weil_cap(q),
    })
}

/// `r_q(n) = Σ_{d | (q, n)} d μ(q / d)`.
pub fn ramanujan(q: u64, n: i64) -> Result<i64, ExpSumError> {
    if q == 0 {
        return Err(ExpSumError::ZeroModulus);
    }
    let g = gcd(n.unsigned_abs(), q);
    let mut total = 0i64;
    for d in arith::factorize(g)?.divisors() {
        total += d as i64 * arith::mobius(q / d)? as i64;
    }
    Ok(total)
}

/// `Σ_{x mod q, (x, q) = 1} e(n x / q)` by direct summation, rounded.
pub fn ramanujan_direct(q: u64, n: i64) -> Result<i64, ExpSumError> {
    let (re, _) = kloosterman_parts(ExpSumQuery::new(n, 0, q), &|x, c| {
        mod_inverse(x as i64, c).expect("unit")
    })?;
    Ok(re.round() as i64)
}

#[derive(Debug, Clone, Serialize)]
pub struct WeilReport {
    pub checked: usize,
    pub max_ratio: f64,
    pub worst: Option<ExpSumQuery>,
}

/// Checks `|S(m, n; c)| <= weil_cap + 1e-6` for every query.
pub fn weil_audit(samples: &[ExpSumQuery]) -> Result<WeilReport, ExpSumError> {
    let results: Vec<(ExpSumQuery, ExpSumResult)> = samples
        .par_iter()
        .map(|&q| kloosterman_direct(q).map(|r| (q, r)))
        .collect::<Result<_, _>>()?;
    let violations: Vec<ExpSumQuery> = results
        .iter()
        .filter(|(_, r)| r.value.abs() > r.weil_cap + 1e-6)
        .map(|(q, _)| *q)
        .collect();
    if !violations.is_empty() {
        return Err(ExpSumError::AuditFailure { violations });
    }
    let mut report = WeilReport {
        checked: results.len(),
        max_ratio: 0.0,
        worst: None,
    };
    for (q, r) in &results {
        let ratio = r.value.abs() / r.weil_cap;
        if ratio > report.max_ratio {
            report.max_ratio = ratio;
            report.worst = Some(*q);
        }
    }
    Ok(report)
}

/// Checks `S(m, n; c) = S(n, m; c) = S(-m, -n; c)` and realness for every
/// query through [`kloosterman_direct_with`]; returns the number checked.
pub fn symmetry_audit_with<F>(samples: &[ExpSumQuery], inverse: F) -> Result<usize, ExpSumError>
where
    F: Fn(u64, u64) -> u64 + Sync,
{
    let violations: Vec<ExpSumQuery> = samples
        .par_iter()
        .filter(|q| {
            let eval = |m, n| kloosterman_direct_with(ExpSumQuery::new(m, n, q.c), &inverse);
            match (eval(q.m, q.n), eval(q.n, q.m), eval(-q.m, -q.n)) {
                (Ok(a), Ok(b), Ok(c)) => {
                    let tol = 1e-9 * (a.weil_cap + 1.0);
                    (a.value - b.value).abs() > tol || (a.value - c.value).abs() > tol
                }
                _ => true,
            }
        })
        .copied()
        .collect();
    if violations.is_empty() {
        Ok(samples.len())
    } else {
        Err(ExpSumError::AuditFailure { violations })
    }
}

pub fn symmetry_audit(samples: &[ExpSumQuery]) -> Result<usize, ExpSumError> {
    symmetry_audit_with(samples, |x, c| mod_inverse(x as i64, c).expect("unit"))
}

/// Parameters of the aggregate sum
/// `Δ = Σ_{0<|n|<=X/(lH)} |n|^{-γ} Σ_{0<|m|<=X/H} |m|^{-β} Σ_{1<=l a1<=U} w(l a1) |S(n r1, -m; a1)| a1^{-α}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub l: u64,
    pub u: f64,
    pub r: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateReport {
    pub delta: f64,
    /// `U^{3/2 - α} (X/H)^{2 - β - γ}`
    pub scale: f64,
    pub ratio: f64,
}

pub fn aggregate_delta(
    params: AggregateParams,
    profile: &WeightProfile,
) -> Result<AggregateReport, ExpSumError> {
    let AggregateParams {
        alpha,
        beta,
        gamma,
        l,
        u,
        r,
    } = params;
    let x = profile.x();
    let h = profile.h();
    let r1 = r / l as i64;
    let n_max = (x / (l as f64 * h)).floor() as i64;
    let m_max = (x / h).floor() as i64;
    let a_max = (u / l as f64).floor() as u64;
    let rows: Vec<f64> = (1..=a_max)
        .into_par_iter()
        .map(|a1| {
            let wa = profile.w((l * a1) as f64);
            if wa == 0.0 {
                return Ok(0.0);
            }
            let mut s = 0.0;
            for n in (-n_max..=n_max).filter(|&n| n != 0) {
                let wn = (n.unsigned_abs() as f64).powf(-gamma);
                for m in (-m_max..=m_max).filter(|&m| m != 0) {
                    let k = kloosterman_direct(ExpSumQuery::new(n * r1, -m, a1))?.value;
                    s += wn * (m.unsigned_abs() as f64).powf(-beta) * k.abs();
                }
            }
            Ok(wa * s / (a1 as f64).powf(alpha))
        })
        .collect::<Result<_, ExpSumError>>()?;
    let delta: f64 = rows.iter().sum();
    let scale = u.powf(1.5 - alpha) * (x / h).powf(2.0 - beta - gamma);
    Ok(AggregateReport {
        delta,
        scale,
        ratio: delta / scale,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn direct(m: i64, n: i64, c: u64) -> f64 {
        kloosterman_direct(ExpSumQuery::new(m, n, c)).unwrap().value
    }

    #[test]
    fn kloosterman_examples() {
        assert!((direct(1, 1, 1) - 1.0).abs() < 1e-12);
        assert!((direct(1, 1, 2) - 1.0).abs() < 1e-12);
        assert!((direct(1, 1, 3) + 1.0).abs() < 1e-12);
        let crt = kloosterman_crt(ExpSumQuery::new(1, 1, 6)).unwrap().value;
        assert!((crt - direct(1, 1, 6)).abs() < 1e-12);
        // 3̄ = 1 mod 2, 2̄ = 2 mod 3
        assert!((crt - direct(1, 1, 2) * direct(2, 2, 3)).abs() < 1e-12);
        for c in [7u64, 97, 7919] {
            let a = kloosterman_crt(ExpSumQuery::new(5, 11, c)).unwrap().value;
            assert_eq!(a, direct(5, 11, c));
        }
        for c in 1..60u64 {
            for n in -10..10i64 {
                let r = ramanujan(c, n).unwrap() as f64;
                assert!((kloosterman_crt(ExpSumQuery::new(0, n, c)).unwrap().value - r).abs() < 1e-9);
            }
        }
        assert!(matches!(
            kloosterman_direct(ExpSumQuery::new(1, 1, DIRECT_BUDGET + 1)),
            Err(ExpSumError::BudgetExceeded { .. })
        ));
    }

    #[test]
    fn ramanujan_examples() {
        assert_eq!(ramanujan(12, 24).unwrap(), 4);
        assert_eq!(ramanujan(13, 5).unwrap(), -1);
        assert_eq!(ramanujan(4, 2).unwrap(), -2);
        assert_eq!(ramanujan_direct(4, 2).unwrap(), -2);
        assert_eq!(ramanujan(9, 0).unwrap(), 6);
        for q in 1..=200u64 {
            for n in -50..=50i64 {
                assert_eq!(ramanujan(q, n).unwrap(), ramanujan_direct(q, n).unwrap(), "q={q} n={n}");
            }
        }
    }

    #[test]
    fn crt_matches_direct() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for c in (1..=3000u64).step_by(7) {
            let m = rng.gen_range(-10_000..10_000);
            let n = rng.gen_range(-10_000..10_000);
            let a = direct(m, n, c);
            let b = kloosterman_crt(ExpSumQuery::new(m, n, c)).unwrap().value;
            assert!((a - b).abs() <= 1e-6 * a.abs().max(1.0), "c={c}: {a} vs {b}");
        }
    }

    #[test]
    fn weil_bound_holds_for_primes() {
        let qs: Vec<_> = [3u64, 5, 101, 1009, 7919]
            .iter()
            .map(|&p| ExpSumQuery::new(1, 1, p))
            .collect();
        let rep = weil_audit(&qs).unwrap();
        assert_eq!(rep.checked, 5);
        assert!(rep.max_ratio < 1.0);
    }

    #[test]
    fn broken_inverse_is_detected() {
        let bad = |x: u64, c: u64| (mod_inverse(x as i64, c).unwrap() + 1) % c;
        let mut caught = 0;
        for c in [11u64, 30, 97, 210] {
            let q = ExpSumQuery::new(3, 7, c);
            match kloosterman_direct_with(q, bad) {
                Err(ExpSumError::NotReal { .. }) => caught += 1,
                Ok(r) => {
                    let swapped = kloosterman_direct_with(ExpSumQuery::new(7, 3, c), bad);
                    if swapped.map(|s| (s.value - r.value).abs() > 1e-9).unwrap_or(true) {
                        caught += 1;
                    }
                }
                Err(e) => panic!("{e}"),
            }
        }
        assert_eq!(caught, 4);
        let qs: Vec<_> = [11u64, 30, 97, 210].iter().map(|&c| ExpSumQuery::new(3, 7, c)).collect();
        assert_eq!(symmetry_audit(&qs).unwrap(), 4);
        match symmetry_audit_with(&qs, bad) {
            Err(ExpSumError::AuditFailure { violations }) => assert_eq!(violations.len(), 4),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn symmetries(m in -100_000i64..100_000, n in -100_000i64..100_000, c in 1u64..3000) {
            let a = direct(m, n, c);
            prop_assert!((a - direct(n, m, c)).abs() < 1e-9 * (c as f64).max(1.0));
            prop_assert!((a - direct(-m, -n, c)).abs() < 1e-9 * (c as f64).max(1.0));
            prop_assert!(a.abs() <= weil_cap(ExpSumQuery::new(m, n, c)) + 1e-6);
        }

        #[test]
        fn ramanujan_bounded_by_gcd(q in 1u64..100_000, n in -1_000_000i64..1_000_000) {
            let r = ramanujan(q, n).unwrap();
            prop_assert!(r.unsigned_abs() <= gcd(q, n.unsigned_abs()));
        }
    }
}
