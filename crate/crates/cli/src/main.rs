use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use detbox::count::{self, Algorithm, BoxCount, Engine, Limits, MainTermVariant, Orthant};
use detbox::experiments::{self, ScanConfig, SuiteLevel};
use detbox::expsum::{self, ExpSumQuery};
use detbox::oscillatory::{self, PhaseIntegralSpec, PhaseKind, STATIONARY_CONSTANT};
use detbox::smooth::{self, TransformQuery, WeightProfile};
use detbox::{
    ArithError, CountError, DecomposeError, Error, ExpSumError, ExperimentError, OscError, QuadError,
    SmoothError,
};

#[derive(Parser)]
#[command(name = "detbox", version, about = "Counting 2x2 integer matrices of fixed determinant in a box")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Exact count of (a, b, c, d) in the box with ad - bc = r.
    Count(Opts),
    /// Asymptotic main term.
    Mainterm(Opts),
    /// Error-exponent scan; writes CSV.
    Scan(Opts),
    /// Kloosterman sum S(m, n; c).
    Kloosterman(Opts),
    /// Ramanujan sum c_q(n).
    Ramanujan(Opts),
    /// Shifted convolution of restricted divisor counts.
    Shiftconv(Opts),
    /// Poisson summation check on a progression.
    PoissonCheck(Opts),
    /// Stationary phase against quadrature.
    StationaryCheck(Opts),
    /// Cross-module verification suite.
    Verify(Opts),
}

#[derive(Args)]
struct Opts {
    /// JSON configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override one configuration key; the value is parsed as JSON when
    /// possible and taken as a string otherwise.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

enum Failure {
    Audit(String),
    Config(String),
    Budget(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Audit(_) | Failure::Runtime(_) => 1,
            Failure::Config(_) => 2,
            Failure::Budget(_) => 3,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Failure::Audit(_) => "audit_failure",
            Failure::Config(_) => "bad_config",
            Failure::Budget(_) => "budget_exceeded",
            Failure::Runtime(_) => "runtime",
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Audit(m) | Failure::Config(m) | Failure::Budget(m) | Failure::Runtime(m) => m,
        }
    }
}

enum Class {
    Audit,
    Config,
    Budget,
    Runtime,
}

fn classify(e: &Error) -> Class {
    match e {
        Error::Arith(a) => arith_class(a),
        Error::Count(c) => count_class(c),
        Error::Quad(q) => quad_class(q),
        Error::ExpSum(x) => expsum_class(x),
        Error::Smooth(s) => smooth_class(s),
        Error::Decompose(d) => match d {
            DecomposeError::LimitExceeded { .. } | DecomposeError::BudgetExceeded { .. } => Class::Budget,
            DecomposeError::ZeroDeterminant => Class::Config,
            DecomposeError::Smooth(s) => smooth_class(s),
        },
        Error::Osc(o) => match o {
            OscError::InvalidSpec(_) | OscError::StationaryPointOutside { .. } => Class::Config,
            OscError::BudgetExceeded { .. } => Class::Budget,
            OscError::AuditFailure { .. } => Class::Audit,
            OscError::Quadrature(q) => quad_class(q),
        },
        Error::Experiment(x) => match x {
            ExperimentError::InvalidConfig(_) | ExperimentError::Io(_) => Class::Config,
            ExperimentError::DegenerateFit { .. } => Class::Audit,
            ExperimentError::Count(c) => count_class(c),
        },
    }
}

fn arith_class(e: &ArithError) -> Class {
    match e {
        ArithError::OutOfRange(_) => Class::Budget,
        ArithError::NotInvertible { .. } => Class::Config,
    }
}

fn count_class(e: &CountError) -> Class {
    match e {
        CountError::LimitExceeded { .. } | CountError::MemoryBudgetExceeded { .. } => Class::Budget,
        CountError::InvalidVariant { .. } | CountError::ZeroDeterminant | CountError::WeightLength { .. } => {
            Class::Config
        }
        CountError::Overflow => Class::Runtime,
    }
}

fn quad_class(e: &QuadError) -> Class {
    match e {
        QuadError::BudgetExceeded { .. } => Class::Budget,
        QuadError::NotConverged { .. } => Class::Runtime,
    }
}

fn expsum_class(e: &ExpSumError) -> Class {
    match e {
        ExpSumError::BudgetExceeded { .. } => Class::Budget,
        ExpSumError::ZeroModulus => Class::Config,
        ExpSumError::NotReal { .. } | ExpSumError::AuditFailure { .. } => Class::Audit,
        ExpSumError::Arith(a) => arith_class(a),
    }
}

fn smooth_class(e: &SmoothError) -> Class {
    match e {
        SmoothError::BadHRange { .. } | SmoothError::InvalidQuery(_) => Class::Config,
        SmoothError::LimitExceeded { .. } => Class::Budget,
        SmoothError::Quadrature(q) => quad_class(q),
    }
}

impl<E: Into<Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        let e = e.into();
        let msg = e.to_string();
        match classify(&e) {
            Class::Audit => Failure::Audit(msg),
            Class::Config => Failure::Config(msg),
            Class::Budget => Failure::Budget(msg),
            Class::Runtime => Failure::Runtime(msg),
        }
    }
}

fn load<T: DeserializeOwned>(opts: &Opts) -> Result<T, Failure> {
    let mut obj = match &opts.config {
        Some(path) => {
            let text = fs::read_to_string(path)
                .map_err(|e| Failure::Config(format!("{}: {e}", path.display())))?;
            match serde_json::from_str(&text) {
                Ok(Value::Object(m)) => m,
                Ok(_) => return Err(Failure::Config("configuration must be a JSON object".into())),
                Err(e) => return Err(Failure::Config(format!("{}: {e}", path.display()))),
            }
        }
        None => Map::new(),
    };
    for kv in &opts.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Failure::Config(format!("--set expects KEY=VALUE, got {kv:?}")))?;
        let v = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
        obj.insert(k.to_string(), v);
    }
    serde_json::from_value(Value::Object(obj)).map_err(|e| Failure::Config(e.to_string()))
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CountAlgorithm {
    #[default]
    Sieve,
    Congruence,
    Brute,
    Enumerate,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "snake_case")]
enum CountOrthant {
    #[default]
    AllSigns,
    Positive,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CountArgs {
    r: i64,
    x: u64,
    #[serde(default)]
    algorithm: CountAlgorithm,
    #[serde(default)]
    orthant: CountOrthant,
}

fn cmd_count(a: CountArgs) -> Result<Value, Failure> {
    let l = Limits::default();
    use CountAlgorithm as A;
    let res = if a.r == 0 {
        match a.algorithm {
            A::Sieve | A::Congruence => count::count_zero_det(a.x, &l)?,
            A::Brute | A::Enumerate => count::count_zero_det_brute(a.x, &l)?,
        }
    } else {
        match (a.orthant, a.algorithm) {
            (CountOrthant::AllSigns, A::Sieve) => count::count_allsigns_with(a.r, a.x, Engine::Sieve, &l)?,
            (CountOrthant::AllSigns, A::Congruence) => {
                count::count_allsigns_with(a.r, a.x, Engine::Congruence, &l)?
            }
            (CountOrthant::AllSigns, A::Enumerate) => count::count_allsigns_enumerate(a.r, a.x, &l)?,
            (CountOrthant::Positive, A::Sieve) => BoxCount {
                r: a.r,
                x: a.x,
                value: count::shifted_convolution(a.x, a.r, &l)?,
                orthant: Orthant::Positive,
                algorithm: Algorithm::DivisorSieve,
            },
            (CountOrthant::Positive, A::Congruence) => count::count_congruence(a.r, a.x, &l)?,
            (CountOrthant::Positive, A::Brute) => count::count_positive_brute(a.r, a.x, &l)?,
            (o, alg) => {
                return Err(Failure::Config(format!("algorithm {alg:?} does not support orthant {o:?}")))
            }
        }
    };
    Ok(json!(res))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct MainArgs {
    r: i64,
    x: f64,
    #[serde(default)]
    variant: Option<String>,
}

fn cmd_mainterm(a: MainArgs) -> Result<Value, Failure> {
    let variant = match a.variant.as_deref() {
        None if a.r == 0 => MainTermVariant::ZeroDet,
        None | Some("all_signs16") => MainTermVariant::AllSigns16,
        Some("positive2") => MainTermVariant::Positive2,
        Some("zero_det") => MainTermVariant::ZeroDet,
        Some(v) => return Err(Failure::Config(format!("unknown variant {v:?}"))),
    };
    Ok(json!(count::main_term(a.r, a.x, variant)?))
}

fn cmd_scan(cfg: ScanConfig) -> Result<Value, Failure> {
    let res = experiments::scan_error_exponent(&cfg, &Limits::default())?;
    experiments::emit_csv(&res.rows, Path::new(&cfg.output))?;
    Ok(json!({ "output": cfg.output, "rows": res.rows.len(), "fits": res.fits }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct KloostermanArgs {
    m: i64,
    n: i64,
    c: u64,
    #[serde(default)]
    method: Option<String>,
}

fn cmd_kloosterman(a: KloostermanArgs) -> Result<Value, Failure> {
    let q = ExpSumQuery::new(a.m, a.n, a.c);
    let res = match a.method.as_deref() {
        None | Some("crt") => expsum::kloosterman_crt(q)?,
        Some("direct") => expsum::kloosterman_direct(q)?,
        Some(m) => return Err(Failure::Config(format!("unknown method {m:?}"))),
    };
    Ok(json!({ "m": a.m, "n": a.n, "c": a.c, "value": res.value, "weil_cap": res.weil_cap }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RamanujanArgs {
    q: u64,
    n: i64,
}

fn cmd_ramanujan(a: RamanujanArgs) -> Result<Value, Failure> {
    Ok(json!({ "q": a.q, "n": a.n, "value": expsum::ramanujan(a.q, a.n)? }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ShiftArgs {
    m: u64,
    r: i64,
}

fn cmd_shiftconv(a: ShiftArgs) -> Result<Value, Failure> {
    let v = count::shifted_convolution(a.m, a.r, &Limits::default())?;
    Ok(json!({ "m": a.m, "r": a.r, "value": v }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PoissonArgs {
    alpha: u64,
    q: u64,
    a: u64,
    c: i64,
    x: f64,
    h: f64,
    #[serde(default)]
    n_max: Option<u64>,
    #[serde(default = "default_defect")]
    max_defect: f64,
}

fn default_defect() -> f64 {
    1e-4
}

fn cmd_poisson(a: PoissonArgs) -> Result<Value, Failure> {
    let query = TransformQuery {
        a: a.a,
        c: a.c,
        profile: WeightProfile::new(a.x, a.h)?,
        y: 0.0,
        tol: 1e-10,
    };
    let n_max = a.n_max.unwrap_or_else(|| smooth::reference_nmax(a.q, &query));
    let chk = smooth::poisson_progression_check(a.alpha, a.q, &query, n_max)?;
    let out = json!(chk);
    if chk.defect > a.max_defect * (1.0 + chk.lhs.abs()) {
        return Err(Failure::Audit(format!("Poisson defect too large: {out}")));
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StationaryArgs {
    m: i64,
    n: i64,
    a1: u64,
    #[serde(default = "one")]
    l: u64,
    x: f64,
    #[serde(default)]
    lo: Option<f64>,
    #[serde(default)]
    hi: Option<f64>,
    #[serde(default)]
    kind: Option<String>,
}

fn one() -> u64 {
    1
}

#[derive(Serialize)]
struct StationaryOut {
    spec: PhaseIntegralSpec,
    report: oscillatory::StationaryReport,
    ratio: f64,
}

fn cmd_stationary(a: StationaryArgs) -> Result<Value, Failure> {
    let kind = match a.kind.as_deref() {
        None | Some("i4") => PhaseKind::I4,
        Some("i1") => PhaseKind::I1,
        Some(k) => return Err(Failure::Config(format!("unknown phase kind {k:?}"))),
    };
    let base = PhaseIntegralSpec { kind, ..PhaseIntegralSpec::i4(a.m, a.n, a.a1, a.l, a.x) };
    let spec = base.with_interval(a.lo.unwrap_or(base.lo), a.hi.unwrap_or(base.hi));
    let report = oscillatory::stationary_phase_main(&spec)?;
    let ratio = report.ratio();
    let out = json!(StationaryOut { spec, report, ratio });
    if !(ratio <= STATIONARY_CONSTANT) {
        return Err(Failure::Audit(format!("stationary phase error too large: {out}")));
    }
    Ok(out)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct VerifyArgs {
    #[serde(default = "fast")]
    level: SuiteLevel,
    #[serde(default)]
    output: Option<String>,
}

fn fast() -> SuiteLevel {
    SuiteLevel::Fast
}

fn cmd_verify(a: VerifyArgs) -> Result<Value, Failure> {
    let report = experiments::run_verification_suite(a.level);
    if let (Some(path), Some(scan)) = (&a.output, &report.scan) {
        experiments::emit_csv(&scan.rows, Path::new(path))?;
    }
    let out = json!({
        "level": report.level,
        "passed": report.passed(),
        "checks": report.checks,
        "fits": report.scan.as_ref().map(|s| &s.fits),
    });
    if !report.passed() {
        return Err(Failure::Audit(out.to_string()));
    }
    Ok(out)
}

fn dispatch(cmd: &Cmd) -> Result<Value, Failure> {
    match cmd {
        Cmd::Count(o) => cmd_count(load(o)?),
        Cmd::Mainterm(o) => cmd_mainterm(load(o)?),
        Cmd::Scan(o) => cmd_scan(load(o)?),
        Cmd::Kloosterman(o) => cmd_kloosterman(load(o)?),
        Cmd::Ramanujan(o) => cmd_ramanujan(load(o)?),
        Cmd::Shiftconv(o) => cmd_shiftconv(load(o)?),
        Cmd::PoissonCheck(o) => cmd_poisson(load(o)?),
        Cmd::StationaryCheck(o) => cmd_stationary(load(o)?),
        Cmd::Verify(o) => cmd_verify(load(o)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(&cli.cmd) {
        Ok(v) => {
            println!("{v}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("{}", json!({ "error": f.kind(), "message": f.message() }));
            ExitCode::from(f.code())
        }
    }
}
