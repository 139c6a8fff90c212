//! The smooth cutoff `w`, equal to 1 on `[1, X]` and 0 outside
//! `(1 - H, X + H)`, and the Fourier transforms built from it:
//! `F̂_{a,c}(y) = ∫ w(x) w(cx/a) e(-xy) dx` and
//! `Ĝ(u, v) = ∫∫ w(x) w(ly) w(xy/a1) e(-ux - vy) dx dy`.

use std::f64::consts::PI;
use std::sync::OnceLock;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::quad::{e, Adaptive, QuadError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SmoothError {
    #[error("ramp width H = {h} outside [sqrt(X), X] for X = {x}")]
    BadHRange { x: f64, h: f64 },
    #[error("invalid transform query: {0}")]
    InvalidQuery(&'static str),
    #[error("{what} = {value} exceeds the limit {limit}")]
    LimitExceeded {
        what: &'static str,
        value: f64,
        limit: f64,
    },
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// Truncated Taylor expansion `Σ c_k t^k`, k < 5.
#[derive(Debug, Clone, Copy)]
struct Jet([f64; 5]);

impl Jet {
    fn var(t: f64) -> Self {
        Jet([t, 1.0, 0.0, 0.0, 0.0])
    }

    fn constant(t: f64) -> Self {
        Jet([t, 0.0, 0.0, 0.0, 0.0])
    }

    fn add(self, o: Jet) -> Jet {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a += b;
        }
        Jet(c)
    }

    fn sub(self, o: Jet) -> Jet {
        let mut c = self.0;
        for (a, b) in c.iter_mut().zip(o.0) {
            *a -= b;
        }
        Jet(c)
    }

    fn mul(self, o: Jet) -> Jet {
        let mut c = [0.0; 5];
        for (i, a) in self.0.iter().enumerate() {
            for (j, b) in o.0.iter().enumerate().take(5 - i) {
                c[i + j] += a * b;
            }
        }
        Jet(c)
    }

    fn recip(self) -> Jet {
        let a = self.0;
        let mut b = [0.0; 5];
        b[0] = 1.0 / a[0];
        for k in 1..5 {
            let s: f64 = (1..=k).map(|j| a[j] * b[k - j]).sum();
            b[k] = -s * b[0];
        }
        Jet(b)
    }

    fn exp(self) -> Jet {
        let a = self.0;
        let mut b = [0.0; 5];
        b[0] = a[0].exp();
        for k in 1..5 {
            let s: f64 = (1..=k).map(|j| j as f64 * a[j] * b[k - j]).sum();
            b[k] = s / k as f64;
        }
        Jet(b)
    }

    /// `[f, f', f'', f''', f'''']`
    fn derivatives(self) -> [f64; 5] {
        let mut d = self.0;
        let mut fact = 1.0;
        for (k, v) in d.iter_mut().enumerate().skip(1) {
            fact *= k as f64;
            *v *= fact;
        }
        d
    }
}

/// Edge mollifier used on both ramps.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Ramp {
    /// `ψ(s) = f(s) / (f(s) + f(1 - s))` with `f(s) = exp(-1/s)`.
    ExpSmoothstep,
}

/// `ψ` and its first four derivatives at `s`.
pub fn smoothstep(s: f64) -> [f64; 5] {
    if s <= 0.0 {
        return [0.0; 5];
    }
    if s >= 1.0 {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    // ψ = 1 / (1 + exp(1/s - 1/(1-s)))
    let h = Jet::var(s)
        .recip()
        .sub(Jet::constant(1.0).sub(Jet::var(s)).recip());
    if h.0[0] > 700.0 {
        return [0.0; 5];
    }
    if h.0[0] < -700.0 {
        return [1.0, 0.0, 0.0, 0.0, 0.0];
    }
    if h.0[0] > 0.0 {
        // ψ = E / (1 + E) with E = exp(-h) keeps every coefficient finite
        let em = Jet([-h.0[0], -h.0[1], -h.0[2], -h.0[3], -h.0[4]]).exp();
        em.mul(Jet::constant(1.0).add(em).recip()).derivatives()
    } else {
        Jet::constant(1.0).add(h.exp()).recip().derivatives()
    }
}

fn smoothstep_value(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else if s >= 1.0 {
        1.0
    } else {
        let h = 1.0 / s - 1.0 / (1.0 - s);
        if h > 700.0 {
            0.0
        } else {
            1.0 / (1.0 + h.exp())
        }
    }
}

/// Constants of the mollifier: `K_j = sup |ψ^(j)|` for `j <= 4` and
/// `V_2 = ∫_0^1 |ψ''|`, measured once on a fine grid.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RampConstants {
    pub k: [f64; 5],
    pub v2: f64,
}

pub fn ramp_constants() -> &'static RampConstants {
    static CONSTS: OnceLock<RampConstants> = OnceLock::new();
    CONSTS.get_or_init(|| {
        let n = 200_000;
        let mut k = [0.0f64; 5];
        let mut v2 = 0.0;
        for i in 0..=n {
            let d = smoothstep(i as f64 / n as f64);
            for j in 0..5 {
                k[j] = k[j].max(d[j].abs());
            }
            let wgt = if i == 0 || i == n { 0.5 } else { 1.0 };
            v2 += wgt * d[2].abs() / n as f64;
        }
        // grid maxima can sit slightly below the true suprema
        for v in k.iter_mut().skip(1) {
            *v *= 1.0 + 1e-6;
        }
        RampConstants { k, v2 }
    })
}

/// The smooth cutoff for a box of half-width `X` with ramp width `H`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeightProfile {
    x: f64,
    h: f64,
    ramp: Ramp,
}

impl WeightProfile {
    /// Requires `sqrt(X) <= H <= X`.
    pub fn new(x: f64, h: f64) -> Result<Self, SmoothError> {
        // allow rounding in H = sqrt(X)
        let ok = x.is_finite() && x >= 1.0 && h <= x && h >= x.sqrt() * (1.0 - 1e-12);
        if !ok {
            return Err(SmoothError::BadHRange { x, h });
        }
        Ok(Self {
            x,
            h,
            ramp: Ramp::ExpSmoothstep,
        })
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn ramp(&self) -> Ramp {
        self.ramp
    }

    /// Open support `(1 - H, X + H)`.
    pub fn support(&self) -> (f64, f64) {
        (1.0 - self.h, self.x + self.h)
    }

    /// Edges of the two ramps, in increasing order.
    pub fn breakpoints(&self) -> [f64; 4] {
        [1.0 - self.h, 1.0, self.x, self.x + self.h]
    }

    pub fn w(&self, t: f64) -> f64 {
        if (1.0..=self.x).contains(&t) {
            1.0
        } else if t < 1.0 {
            smoothstep_value((t - (1.0 - self.h)) / self.h)
        } else {
            smoothstep_value((self.x + self.h - t) / self.h)
        }
    }

    /// `[w, w', w'', w''', w'''']` at `t`.
    pub fn jet(&self, t: f64) -> [f64; 5] {
        if (1.0..=self.x).contains(&t) {
            return [1.0, 0.0, 0.0, 0.0, 0.0];
        }
        let (s, sign) = if t < 1.0 {
            ((t - (1.0 - self.h)) / self.h, 1.0)
        } else {
            ((self.x + self.h - t) / self.h, -1.0)
        };
        let mut d = smoothstep(s);
        let mut scale = 1.0;
        for v in d.iter_mut().skip(1) {
            scale *= sign / self.h;
            *v *= scale;
        }
        d
    }

    pub fn derivative(&self, t: f64, j: usize) -> f64 {
        assert!(j <= 4, "derivatives are available up to order 4");
        self.jet(t)[j]
    }

    /// `∫ w = X - 1 + H`, by the symmetry `ψ(s) + ψ(1 - s) = 1`.
    pub fn integral(&self) -> f64 {
        self.x - 1.0 + self.h
    }

    /// `Σ_{b ∈ Z} w(b)`.
    pub fn integer_sum(&self) -> f64 {
        let (lo, hi) = self.support();
        let mut s = 0.0;
        let mut b = lo.floor() as i64;
        while (b as f64) < hi {
            s += self.w(b as f64);
            b += 1;
        }
        s
    }
}

/// One evaluation of `F̂_{a,c}(y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransformQuery {
    pub a: u64,
    pub c: i64,
    pub profile: WeightProfile,
    pub y: f64,
    pub tol: f64,
}

impl TransformQuery {
    fn validate(&self) -> Result<(), SmoothError> {
        if self.a == 0 {
            return Err(SmoothError::InvalidQuery("a must be positive"));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-4) {
            return Err(SmoothError::InvalidQuery("tolerance must lie in (0, 1e-4]"));
        }
        if self.y.abs() > 1e6 {
            return Err(SmoothError::LimitExceeded {
                what: "|y|",
                value: self.y.abs(),
                limit: 1e6,
            });
        }
        Ok(())
    }

    /// `F_{a,c}(x) = w(x) w(cx/a)`.
    pub fn f(&self, x: f64) -> f64 {
        let p = &self.profile;
        let wx = p.w(x);
        if wx == 0.0 {
            return 0.0;
        }
        wx * p.w(self.c as f64 * x / self.a as f64)
    }

    /// Support of `F_{a,c}` and its breakpoints.
    fn pieces(&self) -> Option<(f64, f64, Vec<f64>)> {
        let p = &self.profile;
        let (lo, hi) = p.support();
        let mut breaks: Vec<f64> = p.breakpoints().to_vec();
        let (mut a, mut b) = (lo, hi);
        if self.c != 0 {
            let ratio = self.a as f64 / self.c as f64;
            let (s0, s1) = if ratio > 0.0 {
                (lo * ratio, hi * ratio)
            } else {
                (hi * ratio, lo * ratio)
            };
            a = a.max(s0);
            b = b.min(s1);
            breaks.extend(p.breakpoints().iter().map(|t| t * ratio));
        } else if p.w(0.0) == 0.0 {
            return None;
        }
        (a < b).then_some((a, b, breaks))
    }
}

/// `F̂_{a,c}(y)` by adaptive Gauss–Legendre panels cut at the ramp edges of
/// both factors and shorter than half a wavelength `1/|y|`.
pub fn fhat(q: &TransformQuery) -> Result<Complex64, SmoothError> {
    q.validate()?;
    let Some((lo, hi, breaks)) = q.pieces() else {
        return Ok(Complex64::new(0.0, 0.0));
    };
    let mut rule = Adaptive::new(q.tol);
    if q.y != 0.0 {
        rule = rule.max_panel(0.5 / q.y.abs());
    }
    let y = q.y;
    Ok(rule.integrate(lo, hi, &breaks, |x| e(-x * y) * q.f(x))?.value)
}

/// `|F̂_{a,c}(y)| <= TV(F) / (2π|y|)` with total variation at most 4.
pub fn fhat_bound_k1(y: f64) -> f64 {
    2.0 / (PI * y.abs())
}

/// `|F̂_{a,c}(y)| <= ∫|F''| / (4π²y²) <= K₂ (1 + |c/a|) / (H y²)` with
/// `K₂ = (2 V₂ + 4 K₁) / (4π²)`.
pub fn fhat_bound_k2(q: &TransformQuery) -> f64 {
    let rc = ramp_constants();
    let k2 = (2.0 * rc.v2 + 4.0 * rc.k[1]) / (4.0 * PI * PI);
    k2 * (1.0 + (q.c as f64 / q.a as f64).abs()) / (q.profile.h * q.y * q.y)
}

/// `Ĝ(u, v)` by nested adaptive quadrature, outer in `x`, inner in `y`.
pub fn ghat(
    a1: u64,
    l: u64,
    profile: &WeightProfile,
    u: f64,
    v: f64,
    tol: f64,
) -> Result<Complex64, SmoothError> {
    if a1 == 0 || l == 0 {
        return Err(SmoothError::InvalidQuery("a1 and l must be positive"));
    }
    let p = *profile;
    let (lo, hi) = p.support();
    let lf = l as f64;
    let af = a1 as f64;
    let (ylo, yhi) = (lo / lf, hi / lf);
    let span = (hi - lo) * (yhi - ylo);
    let inner_tol = 0.5 * tol / (hi - lo);
    let mut outer = Adaptive::new(0.5 * tol);
    if u != 0.0 {
        outer = outer.max_panel(0.5 / u.abs());
    }
    let mut failure = None;
    let value = outer.integrate(lo, hi, &p.breakpoints(), |x| {
        let wx = p.w(x);
        if wx == 0.0 || failure.is_some() {
            return Complex64::new(0.0, 0.0);
        }
        // y-range where w(xy/a1) > 0
        let (mut a, mut b) = (ylo, yhi);
        let mut breaks: Vec<f64> = p.breakpoints().iter().map(|t| t / lf).collect();
        if x != 0.0 {
            let ratio = af / x;
            let (s0, s1) = if ratio > 0.0 {
                (lo * ratio, hi * ratio)
            } else {
                (hi * ratio, lo * ratio)
            };
            a = a.max(s0);
            b = b.min(s1);
            breaks.extend(p.breakpoints().iter().map(|t| t * ratio));
        }
        if a >= b {
            return Complex64::new(0.0, 0.0);
        }
        let mut inner = Adaptive::new(inner_tol.max(1e-15 * span));
        if v != 0.0 {
            inner = inner.max_panel(0.5 / v.abs());
        }
        match inner.integrate(a, b, &breaks, |y| e(-v * y) * (p.w(lf * y) * p.w(x * y / af))) {
            Ok(est) => est.value * e(-u * x) * wx,
            Err(err) => {
                failure = Some(err);
                Complex64::new(0.0, 0.0)
            }
        }
    })?;
    if let Some(err) = failure {
        return Err(err.into());
    }
    Ok(value.value)
}

/// `|Ĝ(u, v)| <= (2/π)(X + 2H - 1) min(1/|v|, 1/(l|u|))`.
pub fn ghat_bound(l: u64, profile: &WeightProfile, u: f64, v: f64) -> f64 {
    let len = profile.x + 2.0 * profile.h - 1.0;
    let mut best = f64::INFINITY;
    if v != 0.0 {
        best = best.min(1.0 / v.abs());
    }
    if u != 0.0 {
        best = best.min(1.0 / (l as f64 * u.abs()));
    }
    2.0 / PI * len * best
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoissonCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub defect: f64,
    pub n_max: u64,
}

/// Reference truncation `⌈40 q max(1, |c|/a) / H⌉`: forty decay lengths of
/// `F̂_{a,c}` measured in steps of `1/q`.
pub fn reference_nmax(q: u64, query: &TransformQuery) -> u64 {
    let spread = (query.c as f64 / query.a as f64).abs().max(1.0);
    (40.0 * q as f64 * spread / query.profile.h).ceil() as u64
}

/// `⌈q (1 + |c|/a) / H⌉`, the truncation beyond which the two-fold
/// integration-by-parts tail bound of `F̂_{a,c}` is below its trivial size
/// and the Poisson defect starts to fall.
pub fn decay_onset_nmax(q: u64, query: &TransformQuery) -> u64 {
    let spread = 1.0 + (query.c as f64 / query.a as f64).abs();
    (q as f64 * spread / query.profile.h).ceil() as u64
}

/// Compares `Σ_{b ≡ α (q)} F_{a,c}(b)` with its truncated Poisson dual
/// `(1/q) Σ_{|n| <= n_max} e(αn/q) F̂_{a,c}(n/q)`.
pub fn poisson_progression_check(
    alpha: u64,
    q: u64,
    query: &TransformQuery,
    n_max: u64,
) -> Result<PoissonCheck, SmoothError> {
    if q == 0 || alpha >= q {
        return Err(SmoothError::InvalidQuery("need 0 <= alpha < q"));
    }
    query.validate()?;
    let (lo, hi) = match query.pieces() {
        Some((lo, hi, _)) => (lo, hi),
        None => (0.0, 0.0),
    };
    let mut lhs = 0.0;
    if hi > lo {
        let qi = q as i64;
        let first = lo.floor() as i64;
        let mut b = first + (alpha as i64 - first).rem_euclid(qi);
        while (b as f64) < hi {
            lhs += query.f(b as f64);
            b += qi;
        }
    }
    let at = |n: u64| -> Result<Complex64, SmoothError> {
        fhat(&TransformQuery {
            y: n as f64 / q as f64,
            ..*query
        })
    };
    let mut rhs = at(0)?.re;
    for n in 1..=n_max {
        rhs += 2.0 * (e(alpha as f64 * n as f64 / q as f64) * at(n)?).re;
    }
    rhs /= q as f64;
    Ok(PoissonCheck {
        lhs,
        rhs,
        defect: (lhs - rhs).abs(),
        n_max,
    })
}
