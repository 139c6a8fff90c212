//! The smoothed count `S_w(X, r)` and its split `S_w = A_w + B_w` into the
//! zero frequency of Poisson summation in `b` and the rest.
//!
//! `B_w` is computed twice: as `S_w - A_w`, and from the double Poisson
//! form
//!
//! `B_w = Σ_{l|r} Σ_{a1>=1} w(l a1)/a1² Σ_{n≠0} Σ_m S(n r1, -m; a1) Ĝ(n/a1, m/a1)
//!        - Σ_{l|r} w(l) w(0)² Σ_{n≠0} ŵ(n)`,
//!
//! where the last term removes `c1 = 0`, which Poisson summation in `c1`
//! reintroduces at `a1 = 1`. The transforms `Ĝ(n/a1, m/a1)` for all `(n, m)`
//! at once come from a trapezoid rule on a grid of step `1/q`, folded modulo
//! `q a1` and passed through a two-dimensional FFT; the grid is fine enough
//! that the aliased copies sit far out in the decay of `Ĝ`.

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use thiserror::Error;

use crate::arith::{self, gcd, mod_inverse};
use crate::count::{main_term, MainTermVariant};
use crate::quad::e;
use crate::smooth::{fhat, SmoothError, TransformQuery, WeightProfile};

/// Largest `X` accepted by [`sw_decompose`].
pub const SW_MAX_X: u64 = 500;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DecomposeError {
    #[error("X = {x} exceeds the direct-sum limit {limit}")]
    LimitExceeded { x: u64, limit: u64 },
    #[error("determinant must be nonzero")]
    ZeroDeterminant,
    #[error("trapezoid grid of {samples} samples exceeds the budget {budget}")]
    BudgetExceeded { samples: u64, budget: u64 },
    #[error(transparent)]
    Smooth(#[from] SmoothError),
}

/// Truncation and sampling of the double Poisson evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DualOptions {
    /// Frequencies kept: `|n| <= K (X+H)/(lH)`, `|m| <= K (X+H)/H`.
    pub k: f64,
    /// Grid oversampling: the grid step is `1/q` with `q a1 >= rho · N`.
    pub rho: f64,
    /// Cap on the total number of grid samples.
    pub sample_budget: u64,
}

impl Default for DualOptions {
    fn default() -> Self {
        Self {
            k: 4.0,
            rho: 2.5,
            sample_budget: 20_000_000_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Decomposition {
    pub r: i64,
    pub x: u64,
    pub h: f64,
    pub s_w: f64,
    pub a_w: f64,
    /// `S_w - A_w`.
    pub b_w: f64,
    /// `B_w` from the truncated double Poisson form.
    pub b_w_dual: f64,
    /// `#{1 <= a, b, c <= X : bc ≡ -r (mod a), a <= bc <= aX}`.
    pub s_r0: u64,
    /// `(2/ζ(2)) (σ(|r|)/|r|) X²`.
    pub main: f64,
    pub dual_samples: u64,
}

impl Decomposition {
    /// `|B_w - B_w(dual)| / |B_w|`.
    pub fn dual_relative_gap(&self) -> f64 {
        (self.b_w - self.b_w_dual).abs() / self.b_w.abs()
    }

    /// `(S_w - S_r^(0)) / (H X^{1.01})`.
    pub fn smoothing_ratio(&self) -> f64 {
        (self.s_w - self.s_r0 as f64).abs() / (self.h * (self.x as f64).powf(1.01))
    }

    /// `|A_w - main| / ((σ(|r|)/|r|) H X^{1.01})`.
    pub fn main_term_ratio(&self) -> f64 {
        let s = self.r.unsigned_abs();
        let ratio = arith::sigma(s).expect("nonzero") as f64 / s as f64;
        (self.a_w - self.main).abs() / (ratio * self.h * (self.x as f64).powf(1.01))
    }
}

fn positive_divisors(r: i64) -> Vec<u64> {
    arith::factorize(r.unsigned_abs())
        .expect("r != 0")
        .divisors()
}

/// Integers strictly inside the support of `w`.
fn support_ints(p: &WeightProfile) -> (i64, i64) {
    let (lo, hi) = p.support();
    let a = lo.floor() as i64 + 1;
    let b = hi.ceil() as i64 - 1;
    (a, b)
}

/// `S_w(X, r) = Σ_{a>0, c≠0, bc ≡ -r (a)} w(a) w(b) w(c) w(bc/a)`.
pub fn s_w_direct(r: i64, p: &WeightProfile) -> f64 {
    let (lo, hi) = support_ints(p);
    let rows: Vec<f64> = (1..=hi)
        .into_par_iter()
        .map(|a| {
            let wa = p.w(a as f64);
            let mut total = 0.0;
            for c in lo..=hi {
                if c == 0 {
                    continue;
                }
                let g = gcd(a as u64, c.unsigned_abs()) as i64;
                if r % g != 0 {
                    continue;
                }
                let step = a / g;
                let residue = if step == 1 {
                    0
                } else {
                    let inv = mod_inverse(c / g, step as u64).expect("coprime") as i128;
                    ((-(r / g)) as i128 * inv).rem_euclid(step as i128) as i64
                };
                let wc = p.w(c as f64);
                let mut b = lo + (residue - lo).rem_euclid(step);
                let mut s = 0.0;
                while b <= hi {
                    s += p.w(b as f64) * p.w((b * c) as f64 / a as f64);
                    b += step;
                }
                total += wc * s;
            }
            wa * total
        })
        .collect();
    rows.iter().sum()
}

/// `A_w = Σ_{l|r} Σ_{a1>=1} Σ_{c1≠0, (a1,c1)=1} w(l a1) w(l c1) F̂_{a1,c1}(0) / a1`.
pub fn a_w(r: i64, p: &WeightProfile, tol: f64) -> Result<f64, SmoothError> {
    let (lo, hi) = support_ints(p);
    let mut total = 0.0;
    for l in positive_divisors(r) {
        let l = l as i64;
        let rows: Vec<f64> = (1..=hi / l)
            .into_par_iter()
            .map(|a1| {
                let wa = p.w((l * a1) as f64);
                if wa == 0.0 {
                    return Ok(0.0);
                }
                let mut s = 0.0;
                for c1 in (lo / l - 1)..=(hi / l + 1) {
                    if c1 == 0 || gcd(a1 as u64, c1.unsigned_abs()) != 1 {
                        continue;
                    }
                    let wc = p.w((l * c1) as f64);
                    if wc == 0.0 {
                        continue;
                    }
                    let q = TransformQuery {
                        a: a1 as u64,
                        c: c1,
                        profile: *p,
                        y: 0.0,
                        tol,
                    };
                    s += wc * fhat(&q)?.re;
                }
                Ok(wa * s / a1 as f64)
            })
            .collect::<Result<_, SmoothError>>()?;
        total += rows.iter().sum::<f64>();
    }
    Ok(total)
}

/// `#{1 <= a, b, c <= X : bc ≡ -r (mod a), a <= bc <= aX}`.
pub fn s_r0(r: i64, x: u64) -> u64 {
    let xi = x as i64;
    let mut total = 0u64;
    for a in 1..=xi {
        for b in 1..=xi {
            let g = gcd(a as u64, b as u64) as i64;
            if r % g != 0 {
                continue;
            }
            let step = a / g;
            let residue = if step == 1 {
                0
            } else {
                let inv = mod_inverse(b / g, step as u64).expect("coprime") as i128;
                ((-(r / g)) as i128 * inv).rem_euclid(step as i128) as i64
            };
            let c_lo = ((a + b - 1) / b).max(1);
            let c_hi = (a * xi / b).min(xi);
            if c_lo > c_hi {
                continue;
            }
            let first = c_lo + (residue - c_lo).rem_euclid(step);
            if first <= c_hi {
                total += ((c_hi - first) / step + 1) as u64;
            }
        }
    }
    total
}

/// Grid sizes used for one `(l, a1)` cell.
#[derive(Debug, Clone, Copy)]
struct Cell {
    l: u64,
    a1: u64,
    qx: u64,
    qy: u64,
    n1: i64,
    n2: i64,
}

impl Cell {
    fn px(&self) -> usize {
        (self.qx * self.a1) as usize
    }

    fn py(&self) -> usize {
        (self.qy * self.a1) as usize
    }
}

/// Range of `j` with `j / qy` strictly inside `(a, b)`.
fn grid_range(a: f64, b: f64, q: u64) -> (i64, i64) {
    let qf = q as f64;
    let lo = (a * qf).floor() as i64 + 1;
    let hi = (b * qf).ceil() as i64 - 1;
    (lo, hi)
}

fn y_window(p: &WeightProfile, cell: &Cell, x: f64) -> (f64, f64) {
    let (lo, hi) = p.support();
    let lf = cell.l as f64;
    let (mut a, mut b) = (lo / lf, hi / lf);
    if x != 0.0 {
        let ratio = cell.a1 as f64 / x;
        let (s0, s1) = if ratio > 0.0 {
            (lo * ratio, hi * ratio)
        } else {
            (hi * ratio, lo * ratio)
        };
        a = a.max(s0);
        b = b.min(s1);
    }
    (a, b)
}

fn cell_samples(p: &WeightProfile, cell: &Cell) -> u64 {
    let (lo, hi) = p.support();
    let (i0, i1) = grid_range(lo, hi, cell.qx);
    let mut n = 0u64;
    for i in i0..=i1 {
        let x = i as f64 / cell.qx as f64;
        let (a, b) = y_window(p, cell, x);
        let (j0, j1) = grid_range(a, b, cell.qy);
        if j1 >= j0 {
            n += (j1 - j0 + 1) as u64;
        }
    }
    n
}

/// Trapezoid values of `Ĝ(n/a1, m/a1)` indexed by `(n mod Px, m mod Py)`.
fn cell_transform(p: &WeightProfile, cell: &Cell, planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
    let (px, py) = (cell.px(), cell.py());
    let mut grid = vec![Complex64::new(0.0, 0.0); px * py];
    let (lo, hi) = p.support();
    let (i0, i1) = grid_range(lo, hi, cell.qx);
    let lf = cell.l as f64;
    let af = cell.a1 as f64;
    for i in i0..=i1 {
        let x = i as f64 / cell.qx as f64;
        let wx = p.w(x);
        if wx == 0.0 {
            continue;
        }
        let (a, b) = y_window(p, cell, x);
        let (j0, j1) = grid_range(a, b, cell.qy);
        if j1 < j0 {
            continue;
        }
        let row = i.rem_euclid(px as i64) as usize * py;
        let xa = x / af;
        let mut col = j0.rem_euclid(py as i64) as usize;
        for j in j0..=j1 {
            let y = j as f64 / cell.qy as f64;
            grid[row + col].re += wx * p.w(lf * y) * p.w(xa * y);
            col += 1;
            if col == py {
                col = 0;
            }
        }
    }
    let row_fft = planner.plan_fft_forward(py);
    for row in grid.chunks_mut(py) {
        row_fft.process(row);
    }
    let col_fft = planner.plan_fft_forward(px);
    let mut column = vec![Complex64::new(0.0, 0.0); px];
    for j in 0..py {
        for i in 0..px {
            column[i] = grid[i * py + j];
        }
        col_fft.process(&mut column);
        for i in 0..px {
            grid[i * py + j] = column[i];
        }
    }
    let scale = 1.0 / (cell.qx * cell.qy) as f64;
    for v in grid.iter_mut() {
        *v *= scale;
    }
    grid
}

/// `Σ_{0<|n|<=N1} Σ_{|m|<=N2} S(n r1, -m; a1) T(n, m)` with
/// `S(n r1, -m; a1) = Σ_x e((n r1 x - m x̄)/a1)`, summed over `m` first by
/// folding modulo `a1` and a length-`a1` DFT.
fn kloosterman_contract(
    t: &[Complex64],
    cell: &Cell,
    r1: i64,
    planner: &mut FftPlanner<f64>,
) -> f64 {
    let a1 = cell.a1 as usize;
    let (px, py) = (cell.px() as i64, cell.py() as i64);
    let units: Vec<(u64, u64)> = (0..cell.a1)
        .filter(|&x| gcd(x, cell.a1) == 1)
        .map(|x| (x, mod_inverse(x as i64, cell.a1).expect("unit")))
        .collect();
    let fft = planner.plan_fft_forward(a1);
    let mut folded = vec![Complex64::new(0.0, 0.0); a1];
    let mut total = Complex64::new(0.0, 0.0);
    for n in (-cell.n1..=cell.n1).filter(|&n| n != 0) {
        folded.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
        let row = n.rem_euclid(px) as usize * py as usize;
        for m in -cell.n2..=cell.n2 {
            folded[m.rem_euclid(a1 as i64) as usize] += t[row + m.rem_euclid(py) as usize];
        }
        // folded[k] <- Σ_m e(-m k / a1) T(n, m)
        fft.process(&mut folded);
        let nr = (n as i128 * r1 as i128).rem_euclid(a1 as i128) as u64;
        for &(x, xb) in &units {
            let phase = ((nr as u128 * x as u128) % a1 as u128) as f64 / a1 as f64;
            total += e(phase) * folded[xb as usize];
        }
    }
    total.re
}

/// `B_w` from the truncated double Poisson form.
pub fn b_w_dual(r: i64, p: &WeightProfile, opts: &DualOptions) -> Result<(f64, u64), DecomposeError> {
    let (x, h) = (p.x(), p.h());
    let (_, hi_int) = support_ints(p);
    let mut cells = Vec::new();
    for l in positive_divisors(r) {
        let n1 = (opts.k * (x + h) / (l as f64 * h)).ceil() as i64;
        let n2 = (opts.k * (x + h) / h).ceil() as i64;
        for a1 in 1..=(hi_int as u64 / l) {
            let q = |n: i64| ((opts.rho * n as f64 / a1 as f64).ceil() as u64).max(1);
            cells.push(Cell {
                l,
                a1,
                qx: q(n1),
                qy: q(n2),
                n1,
                n2,
            });
        }
    }
    let samples: u64 = cells.par_iter().map(|c| cell_samples(p, c)).sum();
    if samples > opts.sample_budget {
        return Err(DecomposeError::BudgetExceeded {
            samples,
            budget: opts.sample_budget,
        });
    }
    let parts: Vec<f64> = cells
        .par_iter()
        .map_init(FftPlanner::new, |planner, cell| {
            let wa = p.w((cell.l * cell.a1) as f64);
            if wa == 0.0 {
                return 0.0;
            }
            let t = cell_transform(p, cell, planner);
            let r1 = r / cell.l as i64;
            wa / (cell.a1 * cell.a1) as f64 * kloosterman_contract(&t, cell, r1, planner)
        })
        .collect();
    let mut total: f64 = parts.iter().sum();
    let w0 = p.w(0.0);
    let tail = p.integer_sum() - p.integral();
    for l in positive_divisors(r) {
        total -= p.w(l as f64) * w0 * w0 * tail;
    }
    Ok((total, samples))
}

/// Computes `S_w`, `A_w`, both evaluations of `B_w` and `S_r^(0)`.
pub fn sw_decompose(r: i64, x: u64, h: f64, opts: &DualOptions) -> Result<Decomposition, DecomposeError> {
    if r == 0 {
        return Err(DecomposeError::ZeroDeterminant);
    }
    if x > SW_MAX_X {
        return Err(DecomposeError::LimitExceeded { x, limit: SW_MAX_X });
    }
    let p = WeightProfile::new(x as f64, h)?;
    let s_w = s_w_direct(r, &p);
    let a = a_w(r, &p, 1e-10)?;
    let (dual, samples) = b_w_dual(r, &p, opts)?;
    let main = main_term(r.abs(), x as f64, MainTermVariant::Positive2)
        .expect("r != 0")
        .value;
    Ok(Decomposition {
        r,
        x,
        h,
        s_w,
        a_w: a,
        b_w: s_w - a,
        b_w_dual: dual,
        s_r0: s_r0(r, x),
        main,
        dual_samples: samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::count::{count_positive_brute, Limits};

    #[test]
    fn s_r0_close_to_positive_count() {
        for (r, x) in [(1i64, 30u64), (2, 40), (6, 25)] {
            let s = count_positive_brute(r, x, &Limits::default()).unwrap().value as i64;
            let s0 = s_r0(r, x) as i64;
            // the two boundary families have O(X + r) members
            assert!((s - s0).abs() <= 4 * (x as i64 + r) * 4, "r={r} X={x}: {s} vs {s0}");
        }
        // r = 1, X = 2: (a,b,c) = (1,1,1), (1,1,2), (1,2,1) have bc in [a, 2a]... enumerate
        let mut want = 0;
        for a in 1..=2i64 {
            for b in 1..=2i64 {
                for c in 1..=2i64 {
                    if (b * c + 1) % a == 0 && a <= b * c && b * c <= 2 * a {
                        want += 1;
                    }
                }
            }
        }
        assert_eq!(s_r0(1, 2), want);
    }

    #[test]
    fn s_w_matches_literal_sum() {
        let p = WeightProfile::new(16.0, 4.0).unwrap();
        for r in [1i64, -2, 6] {
            let (lo, hi) = support_ints(&p);
            let mut want = 0.0;
            for a in 1..=hi {
                for b in lo..=hi {
                    for c in lo..=hi {
                        if c != 0 && (b * c + r).rem_euclid(a) == 0 {
                            want += p.w(a as f64) * p.w(b as f64) * p.w(c as f64) * p.w((b * c) as f64 / a as f64);
                        }
                    }
                }
            }
            let got = s_w_direct(r, &p);
            assert!((got - want).abs() < 1e-9 * want.abs().max(1.0), "r={r}: {got} vs {want}");
        }
    }

    #[test]
    fn a_w_matches_poisson_of_progressions() {
        // A_w + B_w = S_w at a tiny box where the full Fourier series is cheap
        let p = WeightProfile::new(16.0, 4.0).unwrap();
        let s = s_w_direct(1, &p);
        let a = a_w(1, &p, 1e-11).unwrap();
        let (b, _) = b_w_dual(1, &p, &DualOptions { k: 12.0, ..Default::default() }).unwrap();
        assert!(((a + b) - s).abs() < 1e-4 * s, "{a} + {b} vs {s}");
    }

    #[test]
    fn rejects_bad_input() {
        let o = DualOptions::default();
        assert!(matches!(sw_decompose(0, 100, 10.0, &o), Err(DecomposeError::ZeroDeterminant)));
        assert!(matches!(sw_decompose(1, 501, 30.0, &o), Err(DecomposeError::LimitExceeded { .. })));
        assert!(matches!(sw_decompose(1, 100, 5.0, &o), Err(DecomposeError::Smooth(_))));
    }
}
