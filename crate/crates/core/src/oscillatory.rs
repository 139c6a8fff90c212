//! Oscillatory integrals `∫ e(h(x)) dx` with `h(x) = -n x/a1 - m K/x`
//! (`K = X`, or `K = 1` for the short-range family): a quadrature oracle,
//! the leading stationary-phase term with its explicit error terms, the
//! weighted variant, first and second derivative bounds and the truncated
//! Perron integral.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use thiserror::Error;

use crate::quad::{e, Adaptive, QuadError};

/// Largest total phase variation, in cycles, accepted by the oracle.
pub const CYCLE_BUDGET: f64 = 1e8;

/// Constant in `|∫ e(h)| <= c_k λ_k^{-1/k}`, `k = 1, 2`.
pub const DERIVATIVE_BOUND_CONSTANT: f64 = 3.0;

/// Constant in `|quadrature - main| <= C (R1 + R2)`.
pub const STATIONARY_CONSTANT: f64 = 5.0;

/// Constant in the Perron truncation error.
pub const PERRON_CONSTANT: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OscError {
    #[error("invalid phase integral: {0}")]
    InvalidSpec(&'static str),
    #[error("phase varies by {cycles:e} cycles, budget is {budget:e}")]
    BudgetExceeded { cycles: f64, budget: f64 },
    #[error("stationary point {x0} is not inside [{lo}, {hi}] away from the endpoints")]
    StationaryPointOutside { x0: f64, lo: f64, hi: f64 },
    #[error("|integral| = {value} exceeds the bound {bound}")]
    AuditFailure { value: f64, bound: f64 },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PhaseKind {
    /// `h(x) = -n x/a1 - m X/x`
    I4,
    /// `h(x) = -n x/a1 - m/x`
    I1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseIntegralSpec {
    pub m: i64,
    pub n: i64,
    pub a1: u64,
    pub l: u64,
    pub x: f64,
    pub lo: f64,
    pub hi: f64,
    pub kind: PhaseKind,
}

impl PhaseIntegralSpec {
    /// I4 phase on its natural range `[l a1, X]`.
    pub fn i4(m: i64, n: i64, a1: u64, l: u64, x: f64) -> Self {
        Self {
            m,
            n,
            a1,
            l,
            x,
            lo: (l * a1) as f64,
            hi: x,
            kind: PhaseKind::I4,
        }
    }

    pub fn with_interval(self, lo: f64, hi: f64) -> Self {
        Self { lo, hi, ..self }
    }

    fn k(&self) -> f64 {
        match self.kind {
            PhaseKind::I4 => self.x,
            PhaseKind::I1 => 1.0,
        }
    }

    fn validate(&self) -> Result<(), OscError> {
        if self.a1 == 0 {
            return Err(OscError::InvalidSpec("a1 must be positive"));
        }
        if !(self.lo < self.hi) {
            return Err(OscError::InvalidSpec("need lo < hi"));
        }
        if self.m != 0 && self.lo <= 0.0 {
            return Err(OscError::InvalidSpec("the 1/x term needs lo > 0"));
        }
        Ok(())
    }

    /// `[h, h', h'', h''', h'''']` at `x`.
    pub fn phase(&self, x: f64) -> [f64; 5] {
        let mk = self.m as f64 * self.k();
        let na = self.n as f64 / self.a1 as f64;
        if mk == 0.0 {
            return [-na * x, -na, 0.0, 0.0, 0.0];
        }
        let inv = 1.0 / x;
        [
            -na * x - mk * inv,
            -na + mk * inv * inv,
            -2.0 * mk * inv.powi(3),
            6.0 * mk * inv.powi(4),
            -24.0 * mk * inv.powi(5),
        ]
    }

    /// `√(m a1 K / n)` when `m n > 0`.
    pub fn stationary_point(&self) -> Option<f64> {
        if self.m == 0 || self.n == 0 || (self.m > 0) != (self.n > 0) {
            return None;
        }
        Some((self.m as f64 * self.a1 as f64 * self.k() / self.n as f64).sqrt())
    }

    /// Upper bound on `∫|h'|` over the interval, in cycles.
    pub fn total_cycles(&self) -> f64 {
        let na = (self.n as f64 / self.a1 as f64).abs();
        let mk = (self.m as f64 * self.k()).abs();
        let mut c = na * (self.hi - self.lo);
        if mk > 0.0 {
            c += mk * (1.0 / self.lo - 1.0 / self.hi);
        }
        c
    }

    /// Panel edges spaced so that the phase moves by at most one cycle per
    /// panel, using `|h'(x + s)| <= |h'(x)| + s |h''(x)|` (valid because
    /// `|h''|` decreases on `x > 0`).
    fn panel_breaks(&self) -> Vec<f64> {
        let mut cuts = vec![self.lo];
        if let Some(x0) = self.stationary_point() {
            if x0 > self.lo && x0 < self.hi {
                cuts.push(x0);
            }
        }
        cuts.push(self.hi);
        let mut out = Vec::new();
        for w in cuts.windows(2) {
            let mut t = w[0];
            out.push(t);
            while t < w[1] {
                let d = self.phase(t);
                let (g1, g2) = (d[1].abs(), d[2].abs());
                let step = if g2 > 0.0 {
                    (-g1 + (g1 * g1 + 2.0 * g2).sqrt()) / g2
                } else if g1 > 0.0 {
                    1.0 / g1
                } else {
                    f64::INFINITY
                };
                t = (t + step.max(1e-12 * t.abs().max(1.0))).min(w[1]);
                out.push(t);
            }
        }
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QuadratureValue {
    pub value: Complex64,
    pub error: f64,
    pub panels: u64,
}

/// `∫_lo^hi g(x) e(h(x)) dx` on one-cycle panels with bisection until the
/// 16-point value and its halves agree to the panel's share of `tol`.
pub fn weighted_quadrature<G>(spec: &PhaseIntegralSpec, tol: f64, g: G) -> Result<QuadratureValue, OscError>
where
    G: Fn(f64) -> f64,
{
    spec.validate()?;
    let cycles = spec.total_cycles();
    if cycles > CYCLE_BUDGET {
        return Err(OscError::BudgetExceeded {
            cycles,
            budget: CYCLE_BUDGET,
        });
    }
    let breaks = spec.panel_breaks();
    // rounding in h(x) itself sets the attainable accuracy
    let scale = spec.phase(spec.lo)[0].abs().max(spec.phase(spec.hi)[0].abs());
    let gmax = g(spec.lo).abs().max(g(spec.hi).abs()).max(g(0.5 * (spec.lo + spec.hi)).abs());
    let noise = 64.0 * f64::EPSILON * (1.0 + scale) * gmax;
    let est = Adaptive::new(tol).noise(noise).integrate(spec.lo, spec.hi, &breaks, |x| e(spec.phase(x)[0]) * g(x))?;
    Ok(QuadratureValue {
        value: est.value,
        error: est.error,
        panels: est.panels,
    })
}

pub fn integral_quadrature(spec: &PhaseIntegralSpec, tol: f64) -> Result<QuadratureValue, OscError> {
    weighted_quadrature(spec, tol, |_| 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StationaryReport {
    pub x0: f64,
    pub main_term: Complex64,
    pub quadrature_value: Complex64,
    pub r1: f64,
    pub r2: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub lambda4: f64,
}

impl StationaryReport {
    /// `|quadrature - main| / (R1 + R2)`.
    pub fn ratio(&self) -> f64 {
        (self.quadrature_value - self.main_term).norm() / (self.r1 + self.r2)
    }
}

fn interior_x0(spec: &PhaseIntegralSpec) -> Result<f64, OscError> {
    spec.validate()?;
    let outside = |x0: f64| OscError::StationaryPointOutside {
        x0,
        lo: spec.lo,
        hi: spec.hi,
    };
    if spec.m <= 0 || spec.n <= 0 {
        return Err(outside(f64::NAN));
    }
    let x0 = spec.stationary_point().expect("m, n > 0");
    let margin = 0.01 * (spec.hi - spec.lo);
    if x0 <= spec.lo + margin || x0 >= spec.hi - margin {
        return Err(outside(x0));
    }
    Ok(x0)
}

/// `(m K)^{1/4} a1^{3/4} / (√2 n^{3/4}) · e(-2√(m n K / a1) - 1/8)`.
pub fn stationary_main_closed_form(spec: &PhaseIntegralSpec) -> Complex64 {
    let (m, n, a1, k) = (spec.m as f64, spec.n as f64, spec.a1 as f64, spec.k());
    let amp = (m * k).powf(0.25) * a1.powf(0.75) / (2f64.sqrt() * n.powf(0.75));
    e(-2.0 * (m * n * k / a1).sqrt() - 0.125) * amp
}

/// Leading stationary-phase term `e(h(x0) - 1/8) / √|h''(x0)|` (the phase
/// is concave) with `R1`, `R2` built from
/// `λ2 = 2mK/hi³`, `λ3 = 6mK/lo⁴`, `λ4 = 24mK/lo⁵`, and the quadrature
/// oracle value for comparison.
pub fn stationary_phase_main(spec: &PhaseIntegralSpec) -> Result<StationaryReport, OscError> {
    let x0 = interior_x0(spec)?;
    let mk = spec.m as f64 * spec.k();
    let (a, b) = (spec.lo, spec.hi);
    let lambda2 = 2.0 * mk / b.powi(3);
    let lambda3 = 6.0 * mk / a.powi(4);
    let lambda4 = 24.0 * mk / a.powi(5);
    let d = spec.phase(x0);
    let main_term = e(d[0] - 0.125) / d[2].abs().sqrt();
    let inv = 1.0 / lambda2.sqrt();
    let r1 = (1.0 / (lambda2 * (x0 - a))).min(inv) + (1.0 / (lambda2 * (b - x0))).min(inv);
    let r2 = (b - a) * lambda4 / (lambda2 * lambda2) + (b - a) * lambda3 * lambda3 / lambda2.powi(3);
    let tol = 1e-9 * main_term.norm().max(1.0);
    let q = integral_quadrature(spec, tol)?;
    Ok(StationaryReport {
        x0,
        main_term,
        quadrature_value: q.value,
        r1,
        r2,
        lambda2,
        lambda3,
        lambda4,
    })
}

/// Smooth amplitude with its first three derivatives.
pub trait Amplitude: Sync {
    /// `[g, g', g'', g''']` at `x`.
    fn jet(&self, x: f64) -> [f64; 4];
}

impl<F: Fn(f64) -> [f64; 4] + Sync> Amplitude for F {
    fn jet(&self, x: f64) -> [f64; 4] {
        self(x)
    }
}

/// `g(x) = x^{-1}`.
pub struct Reciprocal;

impl Amplitude for Reciprocal {
    fn jet(&self, x: f64) -> [f64; 4] {
        let i = 1.0 / x;
        [i, -i * i, 2.0 * i.powi(3), -6.0 * i.powi(4)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightedReport {
    pub x0: f64,
    pub main_term: Complex64,
    /// The two explicit endpoint terms, already included in `main_term`.
    pub boundary: Complex64,
    pub quadrature_value: Complex64,
    pub budget: f64,
    pub p: f64,
    pub q: f64,
    pub t: f64,
    pub v: f64,
    /// `C_2, C_3, C_4` for the phase.
    pub c_phase: [f64; 3],
    /// `C_0 .. C_3` for the amplitude.
    pub c_amplitude: [f64; 4],
}

impl WeightedReport {
    pub fn ratio(&self) -> f64 {
        (self.quadrature_value - self.main_term).norm() / self.budget
    }
}

/// Weighted stationary phase applied to `f = -h` (convex, `f'` crossing
/// zero upwards) and conjugated back. Parameters are chosen as tight as the
/// hypotheses allow: `Q = β - α`, `P = Q² max f''`, `T = max|g|`,
/// `V = max(Q/√P, min_s (T / max|g^(s)|)^{1/s})`.
pub fn weighted_stationary_main(
    spec: &PhaseIntegralSpec,
    g: &dyn Amplitude,
) -> Result<WeightedReport, OscError> {
    let x0 = interior_x0(spec)?;
    let (a, b) = (spec.lo, spec.hi);
    let mk = spec.m as f64 * spec.k();
    let f = |x: f64| {
        let d = spec.phase(x);
        [-d[0], -d[1], -d[2], -d[3], -d[4]]
    };
    let q = b - a;
    let f2_max = 2.0 * mk / a.powi(3);
    let f2_min = 2.0 * mk / b.powi(3);
    let p = q * q * f2_max;
    let c_phase = [
        f2_max / f2_min,
        6.0 * mk / a.powi(4) * q.powi(3) / p,
        24.0 * mk / a.powi(5) * q.powi(4) / p,
    ];
    let samples = 4096;
    let mut gmax = [0.0f64; 4];
    for i in 0..=samples {
        let t = a + q * i as f64 / samples as f64;
        let j = g.jet(t);
        for s in 0..4 {
            gmax[s] = gmax[s].max(j[s].abs());
        }
    }
    let t = gmax[0];
    let mut v_amp = f64::INFINITY;
    for s in 1..4 {
        if gmax[s] > 0.0 {
            v_amp = v_amp.min((t / gmax[s]).powf(1.0 / s as f64));
        }
    }
    let v = (q / p.sqrt()).max(v_amp);
    let mut c_amplitude = [1.0; 4];
    for s in 1..4 {
        c_amplitude[s] = if v.is_finite() {
            gmax[s] * v.powi(s as i32) / t
        } else {
            0.0
        };
    }
    let fx0 = f(x0);
    let gx0 = g.jet(x0)[0];
    let lead = e(fx0[0] + 0.125) * (gx0 / fx0[2].sqrt());
    let i2pi = Complex64::new(0.0, 2.0 * PI);
    let (fa, fb) = (f(a), f(b));
    let boundary = e(fb[0]) * g.jet(b)[0] / (i2pi * fb[1]) - e(fa[0]) * g.jet(a)[0] / (i2pi * fa[1]);
    let main_term = (lead + boundary).conj();
    let shape = (1.0 + q / v).powi(2);
    let budget = q.powi(4) * t / (p * p) * shape * ((x0 - a).powi(-3) + (b - x0).powi(-3))
        + q * t / p.powf(1.5) * shape;
    let tol = 1e-9 * main_term.norm().max(1e-3);
    let quad = weighted_quadrature(spec, tol, |x| g.jet(x)[0])?;
    Ok(WeightedReport {
        x0,
        main_term,
        boundary: boundary.conj(),
        quadrature_value: quad.value,
        budget,
        p,
        q,
        t,
        v,
        c_phase,
        c_amplitude,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DerivativeAudit {
    pub k: u8,
    pub lambda: f64,
    pub value: f64,
    pub bound: f64,
    pub ratio: f64,
}

/// Checks `|∫ e(h)| <= 3 λ_k^{-1/k}`; for `k = 1` the interval must not
/// contain the stationary point (so `h'` is monotone and bounded away
/// from zero).
pub fn derivative_bound_audit(spec: &PhaseIntegralSpec, k: u8) -> Result<DerivativeAudit, OscError> {
    spec.validate()?;
    let lambda = match k {
        1 => {
            if let Some(x0) = spec.stationary_point() {
                if x0 >= spec.lo && x0 <= spec.hi {
                    return Err(OscError::InvalidSpec("h' vanishes inside the interval"));
                }
            }
            spec.phase(spec.lo)[1].abs().min(spec.phase(spec.hi)[1].abs())
        }
        2 => {
            if spec.m == 0 {
                return Err(OscError::InvalidSpec("h'' vanishes identically"));
            }
            spec.phase(spec.hi)[2].abs().min(spec.phase(spec.lo)[2].abs())
        }
        _ => return Err(OscError::InvalidSpec("k must be 1 or 2")),
    };
    let bound = DERIVATIVE_BOUND_CONSTANT * lambda.powf(-1.0 / k as f64);
    let value = integral_quadrature(spec, 1e-9 * bound.min(1.0))?.value.norm();
    if value > bound {
        return Err(OscError::AuditFailure { value, bound });
    }
    Ok(DerivativeAudit {
        k,
        lambda,
        value,
        bound,
        ratio: value / bound,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerronReport {
    pub approx: f64,
    /// `1`, `1/2` or `0`.
    pub target: f64,
    pub bound: f64,
    pub defect: f64,
}

impl PerronReport {
    pub fn ratio(&self) -> f64 {
        self.defect / self.bound
    }
}

/// `(1/2πi) ∫_{c-iT}^{c+iT} x^s/s ds`, evaluated as
/// `(1/π) ∫_0^T x^c (c cos(t log x) + t sin(t log x)) / (c² + t²) dt`, and
/// the size of its truncation error: `x^c min(1, 1/(T|log x|))` for
/// `x ≠ 1`, `c/T` at `x = 1`.
pub fn perron_indicator(x: f64, c: f64, t: f64) -> Result<PerronReport, OscError> {
    if !(x > 0.0 && c > 0.0 && t > 0.0) {
        return Err(OscError::InvalidSpec("x, c and T must be positive"));
    }
    let log_x = x.ln();
    let xc = x.powf(c);
    let mut rule = Adaptive::new(1e-11);
    if log_x != 0.0 {
        rule = rule.max_panel(PI / log_x.abs());
    }
    let integral = rule.integrate_real(0.0, t, &[], |s| {
        let (sn, cs) = (s * log_x).sin_cos();
        (c * cs + s * sn) / (c * c + s * s)
    })?;
    let approx = xc * integral / PI;
    let (target, bound) = if x == 1.0 {
        (0.5, c / t)
    } else {
        (
            if x > 1.0 { 1.0 } else { 0.0 },
            xc * (1.0 / (t * log_x.abs())).min(1.0),
        )
    };
    Ok(PerronReport {
        approx,
        target,
        bound,
        defect: (approx - target).abs(),
    })
}

/// Seeded I4 specs on windows `[(1 - d1) x0, (1 + d2) x0]`, `d1, d2` in
/// `[0.2, 0.6]`, clipped to `[l a1, X]`, with
/// the stationary point in the middle 80% and `λ2 (hi - lo)² >= 100`.
pub fn interior_specs(seed: u64, count: usize) -> Vec<PhaseIntegralSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let m = rng.gen_range(1..=50i64);
        let n = rng.gen_range(1..=20i64);
        let a1 = rng.gen_range(1..=40u64);
        let x = 10f64.powf(rng.gen_range(2.3..3.7));
        let full = PhaseIntegralSpec::i4(m, n, a1, 1, x);
        let Some(x0) = full.stationary_point() else {
            continue;
        };
        let (d1, d2) = (rng.gen_range(0.2..0.6), rng.gen_range(0.2..0.6));
        let spec = full.with_interval(full.lo.max((1.0 - d1) * x0), full.hi.min((1.0 + d2) * x0));
        let len = spec.hi - spec.lo;
        if len <= 0.0 || x0 < spec.lo + 0.1 * len || x0 > spec.hi - 0.1 * len {
            continue;
        }
        let lambda2 = spec.phase(spec.hi)[2].abs();
        if lambda2 * len * len < 100.0 {
            continue;
        }
        out.push(spec);
    }
    out
}

/// Seeded I5 configurations: phase `-n x/a1 - m u/x` with `u` in
/// `[X, X + X^{2/3}]` on `[l a1, X]` (stored with `x = u`), stationary point
/// in the middle 80%.
pub fn i5_specs(seed: u64, count: usize) -> Vec<PhaseIntegralSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let x: f64 = 10f64.powf(rng.gen_range(2.5..3.7));
        let h = x.powf(2.0 / 3.0);
        let u = x + rng.gen_range(0.0..h);
        let a1 = rng.gen_range(1..=30u64);
        let l = rng.gen_range(1..=3u64);
        let (m, n) = (rng.gen_range(1..=30i64), rng.gen_range(1..=30i64));
        let spec = PhaseIntegralSpec::i4(m, n, a1, l, u).with_interval((l * a1) as f64, x);
        let len = spec.hi - spec.lo;
        let Some(x0) = spec.stationary_point() else {
            continue;
        };
        if len > 0.0 && x0 > spec.lo + 0.1 * len && x0 < spec.hi - 0.1 * len {
            out.push(spec);
        }
    }
    out
}

/// Seeded specs with `m n < 0`, so that `|h'| >= |n|/a1` throughout.
pub fn opposite_sign_specs(seed: u64, count: usize) -> Vec<PhaseIntegralSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let m = rng.gen_range(1..=20i64);
            let n = -rng.gen_range(1..=20i64);
            let a1 = rng.gen_range(1..=40u64);
            let x = 10f64.powf(rng.gen_range(2.0..3.5));
            let (m, n) = if rng.gen_bool(0.5) { (m, n) } else { (-m, -n) };
            let lo = a1 as f64;
            let hi = lo + rng.gen_range(0.5..1.0) * x;
            PhaseIntegralSpec::i4(m, n, a1, 1, x).with_interval(lo, hi)
        })
        .collect()
}
