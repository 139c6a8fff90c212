//! Error-exponent scans, CSV output and the verification suite.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arith::{gcd, mod_inverse};
use crate::count::{self, CountError, Engine, Limits, MainTermVariant};
use crate::decompose::{self, DualOptions};
use crate::expsum::{self, ExpSumQuery};
use crate::oscillatory::{self, PERRON_CONSTANT, STATIONARY_CONSTANT};
use crate::smooth::{self, TransformQuery, WeightProfile};

pub const CSV_HEADER: &str = "r,X,exact,main,error,abs_error,log10_X,log10_abs_error";

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("only {rows} rows with nonzero error for r = {r}; need 3 for a fit")]
    DegenerateFit { r: i64, rows: usize },
    #[error(transparent)]
    Count(#[from] CountError),
    #[error(transparent)]
    Io(#[from] io::Error),
}

fn default_algorithm() -> Engine {
    Engine::Sieve
}

fn default_output() -> String {
    "scan.csv".to_string()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub r_values: Vec<i64>,
    pub x_min: u64,
    pub x_max: u64,
    pub ratio: f64,
    #[serde(default = "default_algorithm")]
    pub algorithm: Engine,
    #[serde(default = "default_output")]
    pub output: String,
    #[serde(default)]
    pub seed: u64,
}

impl ScanConfig {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        let bad = |m: String| Err(ExperimentError::InvalidConfig(m));
        if self.x_min < 16 {
            return bad(format!("x_min = {} is below 16", self.x_min));
        }
        if self.x_max < self.x_min {
            return bad("x_max < x_min".to_string());
        }
        if !(self.ratio > 1.0 && self.ratio.is_finite()) {
            return bad(format!("ratio = {} must exceed 1", self.ratio));
        }
        for &r in &self.r_values {
            if r == 0 {
                return bad("r = 0 has its own main term; use the zero-determinant counter".to_string());
            }
            let s = r.unsigned_abs() as u128;
            if s * s * s > self.x_min as u128 {
                return bad(format!("|r| = {s} exceeds x_min^(1/3)"));
            }
        }
        Ok(())
    }

    /// `round(x_min · ratio^k) <= x_max`, deduplicated.
    pub fn grid(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let x = (self.x_min as f64 * self.ratio.powi(k)).round();
            if x > self.x_max as f64 * (1.0 + 1e-12) {
                break;
            }
            out.push(x as u64);
            k += 1;
        }
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScanRow {
    pub r: i64,
    pub x: u64,
    pub exact: u64,
    pub main: f64,
    pub error: f64,
    pub abs_error: f64,
    pub log10_x: f64,
    pub log10_abs_error: f64,
}

impl ScanRow {
    pub fn new(r: i64, x: u64, exact: u64, main: f64) -> Self {
        let error = exact as f64 - main;
        Self {
            r,
            x,
            exact,
            main,
            error,
            abs_error: error.abs(),
            log10_x: (x as f64).log10(),
            log10_abs_error: error.abs().log10(),
        }
    }

    pub fn ratio(&self) -> f64 {
        self.exact as f64 / self.main
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlopeFit {
    pub r: i64,
    pub slope: f64,
    pub intercept: f64,
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub rows: Vec<ScanRow>,
    pub fits: Vec<SlopeFit>,
}

impl ScanResult {
    pub fn fit(&self, r: i64) -> Option<&SlopeFit> {
        self.fits.iter().find(|f| f.r == r)
    }

    /// `|exact/main - 1|` is smaller at the largest `X` than at the smallest.
    pub fn ratio_improves(&self, r: i64) -> bool {
        let rows: Vec<&ScanRow> = self.rows.iter().filter(|w| w.r == r).collect();
        match (rows.first(), rows.last()) {
            (Some(a), Some(b)) if rows.len() > 1 => (b.ratio() - 1.0).abs() < (a.ratio() - 1.0).abs(),
            _ => false,
        }
    }
}

/// Least squares for `log10|error|` against `log10 X`, skipping rows with
/// zero error.
pub fn fit_slope(r: i64, rows: &[ScanRow]) -> Result<SlopeFit, ExperimentError> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|w| w.r == r && w.abs_error > 0.0)
        .map(|w| (w.log10_x, w.log10_abs_error))
        .collect();
    if pts.len() < 3 {
        return Err(ExperimentError::DegenerateFit { r, rows: pts.len() });
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(SlopeFit {
        r,
        slope,
        intercept: my - slope * mx,
        rows: pts.len(),
    })
}

/// Exact `𝒮_r(X)` against `(16/ζ(2)) (σ(|r|)/|r|) X²` on the grid, one
/// slope per `r`.
pub fn scan_error_exponent(config: &ScanConfig, limits: &Limits) -> Result<ScanResult, ExperimentError> {
    config.validate()?;
    let grid = config.grid();
    let cells: Vec<(i64, u64)> = config
        .r_values
        .iter()
        .flat_map(|&r| grid.iter().map(move |&x| (r, x)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(r, x)| -> Result<ScanRow, ExperimentError> {
            let exact = count::count_allsigns_with(r, x, config.algorithm, limits)?.value;
            let main = count::main_term(r, x as f64, MainTermVariant::AllSigns16)?.value;
            Ok(ScanRow::new(r, x, exact, main))
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut fits = Vec::new();
    let mut seen = Vec::new();
    for &r in &config.r_values {
        if !seen.contains(&r) {
            seen.push(r);
            fits.push(fit_slope(r, &rows)?);
        }
    }
    Ok(ScanResult { rows, fits })
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_csv<W: Write>(rows: &[ScanRow], mut out: W) -> io::Result<()> {
    out.write_all(CSV_HEADER.as_bytes())?;
    out.write_all(b"\n")?;
    for w in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            w.r,
            w.x,
            w.exact,
            real(w.main),
            real(w.error),
            real(w.abs_error),
            real(w.log10_x),
            real(w.log10_abs_error)
        )?;
    }
    out.flush()
}

pub fn emit_csv(rows: &[ScanRow], path: &Path) -> Result<(), ExperimentError> {
    let f = File::create(path)?;
    write_csv(rows, BufWriter::new(f))?;
    Ok(())
}

/// Seeded Poisson queries on small profiles.
pub fn poisson_queries(seed: u64, count: usize) -> Vec<(u64, u64, TransformQuery)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let x: f64 = rng.gen_range(20.0..120.0);
            let h = rng.gen_range(x.sqrt()..0.5 * x);
            let profile = WeightProfile::new(x, h).expect("sqrt(X) <= H <= X");
            let q = rng.gen_range(1..=8u64);
            let alpha = rng.gen_range(0..q);
            let query = TransformQuery {
                a: rng.gen_range(1..=5),
                c: rng.gen_range(-5..=6),
                profile,
                y: 0.0,
                tol: 1e-10,
            };
            (alpha, q, query)
        })
        .collect()
}

fn kloosterman_queries(seed: u64, count: usize, c_max: u64) -> Vec<ExpSumQuery> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let c = rng.gen_range(1..=c_max);
            ExpSumQuery::new(rng.gen_range(-1000..=1000), rng.gen_range(-1000..=1000), c)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuiteLevel {
    Fast,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SuiteReport {
    pub level: SuiteLevel,
    pub checks: Vec<CheckOutcome>,
    /// Scan rows from the full level.
    pub scan: Option<ScanResult>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> Vec<&CheckOutcome> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

type CheckResult = Result<String, String>;

fn run(name: &'static str, out: &mut Vec<CheckOutcome>, f: impl FnOnce() -> CheckResult) {
    let t = Instant::now();
    let (passed, detail) = match f() {
        Ok(d) => (true, d),
        Err(d) => (false, d),
    };
    out.push(CheckOutcome {
        name,
        passed,
        detail,
        seconds: t.elapsed().as_secs_f64(),
    });
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const SUITE_R: [i64; 8] = [1, -1, 2, -2, 6, -6, 10, -10];

fn check_oracles(xs: &[u64]) -> CheckResult {
    let limits = Limits::default();
    for &r in &SUITE_R {
        for &x in xs {
            let a = count::count_positive_brute(r, x, &limits).map_err(err)?.value;
            let b = count::count_congruence(r, x, &limits).map_err(err)?.value;
            let c = count::shifted_convolution(x, r, &limits).map_err(err)?;
            if a != b || a != c {
                return Err(format!("r={r} X={x}: brute {a}, congruence {b}, convolution {c}"));
            }
        }
    }
    Ok(format!("{} cells", SUITE_R.len() * xs.len()))
}

fn check_allsigns(xs: &[u64]) -> CheckResult {
    let limits = Limits::default();
    for &r in &SUITE_R {
        for &x in xs {
            let a = count::count_allsigns(r, x, &limits).map_err(err)?.value;
            let b = count::count_allsigns_enumerate(r, x, &limits).map_err(err)?.value;
            let c = count::count_allsigns(-r, x, &limits).map_err(err)?.value;
            if a != b || a != c {
                return Err(format!("r={r} X={x}: sieve {a}, enumeration {b}, -r {c}"));
            }
        }
    }
    Ok(format!("{} cells", SUITE_R.len() * xs.len()))
}

fn check_zero_det(x_max: u64) -> CheckResult {
    let limits = Limits::default();
    for x in 1..=x_max {
        let a = count::count_zero_det(x, &limits).map_err(err)?.value;
        let b = count::count_zero_det_brute(x, &limits).map_err(err)?.value;
        if a != b {
            return Err(format!("X={x}: {a} vs {b}"));
        }
    }
    Ok(format!("X <= {x_max}"))
}

fn check_expsums(seed: u64) -> CheckResult {
    let sym = kloosterman_queries(seed, 200, 2000);
    expsum::symmetry_audit(&sym).map_err(err)?;
    let bad = |x: u64, c: u64| (mod_inverse(x as i64, c).expect("unit") + 1) % c;
    let caught = match expsum::symmetry_audit_with(&sym, bad) {
        Err(expsum::ExpSumError::AuditFailure { violations }) => violations.len(),
        other => return Err(format!("broken inverse went unnoticed: {other:?}")),
    };
    let mut worst = 0.0f64;
    for q in kloosterman_queries(seed ^ 1, 100, 10_000) {
        let a = expsum::kloosterman_crt(q).map_err(err)?.value;
        let b = expsum::kloosterman_direct(q).map_err(err)?.value;
        let rel = (a - b).abs() / b.abs().max(1.0);
        worst = worst.max(rel);
        if rel > 1e-6 {
            return Err(format!("{q:?}: crt {a}, direct {b}"));
        }
    }
    let weil = expsum::weil_audit(&kloosterman_queries(seed ^ 2, 500, 5000)).map_err(err)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 3);
    for _ in 0..1000 {
        let q = rng.gen_range(1..=5000u64);
        let n = rng.gen_range(-100_000..=100_000i64);
        let v = expsum::ramanujan(q, n).map_err(err)?;
        let g = if n == 0 { q } else { gcd(q, n.unsigned_abs()) };
        if v.unsigned_abs() > g {
            return Err(format!("|r_{q}({n})| = {} > {g}", v.abs()));
        }
    }
    Ok(format!(
        "broken inverse flagged on {caught}/200, crt gap {worst:.1e}, Weil max ratio {:.3}",
        weil.max_ratio
    ))
}

fn check_weights(seed: u64) -> CheckResult {
    let k = smooth::ramp_constants();
    if !k.k.iter().all(|v| v.is_finite()) || !k.v2.is_finite() {
        return Err("ramp constants are not finite".to_string());
    }
    let mut worst = 0.0f64;
    for (alpha, q, query) in poisson_queries(seed, 20) {
        let n = smooth::reference_nmax(q, &query);
        let chk = smooth::poisson_progression_check(alpha, q, &query, n).map_err(err)?;
        let rel = chk.defect / (1.0 + chk.lhs.abs());
        worst = worst.max(rel);
        if rel > 1e-4 {
            return Err(format!("defect {} at {query:?}", chk.defect));
        }
    }
    Ok(format!("max relative Poisson defect {worst:.1e}"))
}

fn check_decompositions() -> CheckResult {
    let opts = DualOptions::default();
    let mut gaps = Vec::new();
    for (r, x) in [(1i64, 200u64), (2, 300), (6, 400)] {
        let d = decompose::sw_decompose(r, x, (x as f64).sqrt(), &opts).map_err(err)?;
        let gap = d.dual_relative_gap();
        if gap > 0.01 {
            return Err(format!("r={r} X={x}: relative gap {gap}"));
        }
        gaps.push(format!("{gap:.1e}"));
    }
    Ok(format!("relative gaps {}", gaps.join(", ")))
}

fn check_stationary(seed: u64) -> CheckResult {
    let mut worst = 0.0f64;
    for spec in oscillatory::interior_specs(seed, 50) {
        let rep = oscillatory::stationary_phase_main(&spec).map_err(err)?;
        worst = worst.max(rep.ratio());
        if rep.ratio() > STATIONARY_CONSTANT {
            return Err(format!("{spec:?}: ratio {}", rep.ratio()));
        }
    }
    let mut worstw = 0.0f64;
    for spec in oscillatory::i5_specs(seed ^ 2, 20) {
        let rep = oscillatory::weighted_stationary_main(&spec, &oscillatory::Reciprocal).map_err(err)?;
        worstw = worstw.max(rep.ratio());
        if rep.ratio() > STATIONARY_CONSTANT {
            return Err(format!("{spec:?}: weighted ratio {}", rep.ratio()));
        }
    }
    let mut worst1 = 0.0f64;
    for spec in oscillatory::opposite_sign_specs(seed ^ 1, 50) {
        worst1 = worst1.max(oscillatory::derivative_bound_audit(&spec, 1).map_err(err)?.ratio);
    }
    let mut worstp = 0.0f64;
    for &x in &[0.25, 0.5, 0.9, 1.0, 1.1, 2.0, 4.0] {
        for &c in &[0.5, 1.0, 2.0] {
            for &t in &[50.0, 200.0, 1000.0] {
                let p = oscillatory::perron_indicator(x, c, t).map_err(err)?;
                worstp = worstp.max(p.ratio());
                if p.ratio() > PERRON_CONSTANT {
                    return Err(format!("Perron x={x} c={c} T={t}: ratio {}", p.ratio()));
                }
            }
        }
    }
    Ok(format!(
        "max ratios: stationary {worst:.2e}, weighted {worstw:.2e}, first derivative {worst1:.2e}, Perron {worstp:.3}"
    ))
}

/// Reference scan of the full suite: `r = 1, 2`, `X = 256 .. 4096`.
pub fn reference_scan_config() -> ScanConfig {
    ScanConfig {
        r_values: vec![1, 2],
        x_min: 256,
        x_max: 4096,
        ratio: 2.0,
        algorithm: Engine::Sieve,
        output: default_output(),
        seed: 0,
    }
}

pub fn run_verification_suite(level: SuiteLevel) -> SuiteReport {
    let seed = 20_240_601;
    let mut checks = Vec::new();
    run("oracle_equivalence", &mut checks, || check_oracles(&[10, 50, 100]));
    run("allsigns_enumeration", &mut checks, || check_allsigns(&[5, 12, 25]));
    run("zero_determinant", &mut checks, || check_zero_det(40));
    run("exponential_sums", &mut checks, || check_expsums(seed));
    run("weights_and_poisson", &mut checks, || check_weights(seed));
    let mut scan = None;
    if level == SuiteLevel::Full {
        run("oracle_equivalence_300", &mut checks, || check_oracles(&[300]));
        run("sw_decompose", &mut checks, check_decompositions);
        run("stationary_phase", &mut checks, || check_stationary(seed));
        run("exponent_scan", &mut checks, || {
            let res = scan_error_exponent(&reference_scan_config(), &Limits::default()).map_err(err)?;
            let mut notes = Vec::new();
            for f in &res.fits {
                if !(f.slope < 2.0) {
                    return Err(format!("r={}: slope {}", f.r, f.slope));
                }
                if !res.ratio_improves(f.r) {
                    return Err(format!("r={}: main-term ratio does not improve", f.r));
                }
                notes.push(format!("r={} slope {:.3}", f.r, f.slope));
            }
            scan = Some(res);
            Ok(notes.join(", "))
        });
    }
    SuiteReport { level, checks, scan }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(r: Vec<i64>) -> ScanConfig {
        ScanConfig {
            r_values: r,
            x_min: 16,
            x_max: 256,
            ratio: 2.0,
            algorithm: Engine::Sieve,
            output: String::new(),
            seed: 1,
        }
    }

    #[test]
    fn validation() {
        assert!(config(vec![1, -2]).validate().is_ok());
        assert!(config(vec![3]).validate().is_err());
        assert!(config(vec![0]).validate().is_err());
        assert!(ScanConfig { x_min: 8, ..config(vec![1]) }.validate().is_err());
        assert!(ScanConfig { ratio: 1.0, ..config(vec![1]) }.validate().is_err());
        assert!(ScanConfig { ratio: f64::NAN, ..config(vec![1]) }.validate().is_err());
    }

    #[test]
    fn grid_is_geometric_and_deduplicated() {
        assert_eq!(config(vec![]).grid(), vec![16, 32, 64, 128, 256]);
        let fine = ScanConfig { ratio: 1.01, x_max: 20, ..config(vec![]) };
        let g = fine.grid();
        assert_eq!(g, vec![16, 17, 18, 19, 20]);
        let one = ScanConfig { x_max: 16, ..config(vec![]) };
        assert_eq!(one.grid(), vec![16]);
    }

    #[test]
    fn empty_scan() {
        let res = scan_error_exponent(&config(vec![]), &Limits::default()).unwrap();
        assert!(res.rows.is_empty() && res.fits.is_empty());
        let mut buf = Vec::new();
        write_csv(&res.rows, &mut buf).unwrap();
        assert_eq!(buf, format!("{CSV_HEADER}\n").into_bytes());
    }

    #[test]
    fn rows_are_consistent() {
        let res = scan_error_exponent(&config(vec![1, 2]), &Limits::default()).unwrap();
        assert_eq!(res.rows.len(), 10);
        for w in &res.rows {
            assert!(w.main > 0.0);
            assert_eq!(w.error, w.exact as f64 - w.main);
            assert_eq!(w.abs_error, w.error.abs());
        }
        assert_eq!(res.fits.len(), 2);
    }

    #[test]
    fn degenerate_fit() {
        let cfg = ScanConfig { x_max: 32, ..config(vec![1]) };
        assert!(matches!(
            scan_error_exponent(&cfg, &Limits::default()),
            Err(ExperimentError::DegenerateFit { r: 1, rows: 2 })
        ));
        let rows = [ScanRow::new(1, 16, 10, 10.0), ScanRow::new(1, 32, 5, 4.0), ScanRow::new(1, 64, 9, 7.0)];
        assert!(matches!(fit_slope(1, &rows), Err(ExperimentError::DegenerateFit { rows: 2, .. })));
    }

    #[test]
    fn slope_of_exact_power() {
        let rows: Vec<ScanRow> = [16u64, 32, 64, 128]
            .iter()
            .map(|&x| ScanRow::new(1, x, (x * x) as u64 + 1000, 1000.0))
            .collect();
        let f = fit_slope(1, &rows).unwrap();
        assert!((f.slope - 2.0).abs() < 1e-12);
    }

    #[test]
    fn csv_format() {
        let row = ScanRow::new(-2, 17, 12345, 0.1 + 0.2);
        let mut buf = Vec::new();
        write_csv(&[row], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.split('\n').collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], CSV_HEADER);
        assert!(lines[2].is_empty());
        let fields: Vec<&str> = lines[1].split(',').collect();
        assert_eq!(fields[3], "3.0000000000000004e-1");
        assert_eq!(fields[3].parse::<f64>().unwrap(), row.main);
        assert!(!text.contains('\r'));
    }
}
