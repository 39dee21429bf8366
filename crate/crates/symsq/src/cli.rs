//! Command-line runner: configuration resolution, the experiment matrix of
//! each subcommand, and report output.
//!
//! Options come from flags and an optional `key = value` file given with
//! `--config`; flags win. The resolved [`RunConfig`] has every default filled
//! in and is written next to the reports. Wall times go to a separate
//! timing file so that report output is byte-identical across runs.

use crate::arith::enumerate_characters;
use crate::coeffs::Sym2CoeffTable;
use crate::data::{self, HttpTransport};
use crate::error::{Error, Result};
use crate::kernels::{bessel_j, ContourKernel, KernelKind, SmoothBump};
use crate::petersson::{self, MomentConfig, SpectralBasis};
use crate::qexp::{eta_newform, eta_newform_unchecked, ETA_LEVELS};
use crate::report::VerificationReport;
use crate::voronoi::{self, SignConvention};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use serde_json::{json, Value};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

#[derive(Parser, Debug)]
#[command(name = "symsq", version, about = "Numerical checks of symmetric-square summation formulas at prime level")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Additive-twist Voronoi formula over all units h mod q and N in {q^j}.
    VerifyVoronoi(Options),
    /// Petersson identity over coprime pairs, plus the L(1, sym^2 f) crosscheck.
    VerifyPetersson(Options),
    /// Twisted functional equation for every primitive character, plus the
    /// character decomposition of the additive twist.
    VerifyFe(Options),
    /// Kloosterman side of the first moment, and the direct side when
    /// eigenvalue data at weight 2k is supplied.
    ScanMeanValue(Options),
    /// Hecke, Deligne and level checks on eigenvalue record files.
    ValidateData(Options),
    /// Sampled values of V and J_{k-1}.
    KernelsTable(Options),
    /// Download eigenvalue records through the response cache.
    FetchData(Options),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::VerifyVoronoi(_) => "verify-voronoi",
            Command::VerifyPetersson(_) => "verify-petersson",
            Command::VerifyFe(_) => "verify-fe",
            Command::ScanMeanValue(_) => "scan-mean-value",
            Command::ValidateData(_) => "validate-data",
            Command::KernelsTable(_) => "kernels-table",
            Command::FetchData(_) => "fetch-data",
        }
    }

    fn options(&self) -> &Options {
        match self {
            Command::VerifyVoronoi(o)
            | Command::VerifyPetersson(o)
            | Command::VerifyFe(o)
            | Command::ScanMeanValue(o)
            | Command::ValidateData(o)
            | Command::KernelsTable(o)
            | Command::FetchData(o) => o,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Json,
    Csv,
}

/// Flags shared by every subcommand; unset flags fall back to the config
/// file, then to the subcommand default.
#[derive(Args, Debug, Default, Clone)]
pub struct Options {
    /// `key = value` file; keys are the long flag names.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Levels, comma separated (built-in: 2, 3, 5, 11).
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<u64>>,
    #[arg(long)]
    pub tolerance: Option<f64>,
    /// Tolerance used instead of `tolerance` at weight 2.
    #[arg(long)]
    pub weight2_tolerance: Option<f64>,
    /// Tolerance of the per-character rebuild.
    #[arg(long)]
    pub decomposition_tolerance: Option<f64>,
    /// Allowed relative gap between the two sides of the mean value.
    #[arg(long)]
    pub mean_value_tolerance: Option<f64>,
    /// Kloosterman sums run over c <= c_max.
    #[arg(long)]
    pub c_max: Option<u64>,
    /// Petersson pairs use m, n <= pair_max.
    #[arg(long)]
    pub pair_max: Option<u64>,
    /// Voronoi and FE bumps start at N = q^j for these j.
    #[arg(long, value_delimiter = ',')]
    pub n_powers: Option<Vec<u32>>,
    /// Eigenvalue record files.
    #[arg(long, value_delimiter = ',')]
    pub data: Option<Vec<PathBuf>>,
    /// Constant multiplying the trace-formula side of the mean value.
    #[arg(long)]
    pub normalization: Option<f64>,
    /// Recompute the moment with every range doubled.
    #[arg(long)]
    pub doubling_check: Option<bool>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
    /// Output file (stdout if absent).
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Timing file (default `<output>.timing.json` when writing to a file).
    #[arg(long)]
    pub timing: Option<PathBuf>,
    /// With `false`, wall times are also written into the reports.
    #[arg(long)]
    pub deterministic: Option<bool>,
    /// Fetch endpoint with `{level}` and `{weight}` placeholders.
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Weight for `fetch-data`.
    #[arg(long)]
    pub weight: Option<u32>,
}

/// Every setting of one run, defaults filled in.
#[derive(Clone, Debug, Serialize, PartialEq)]
pub struct RunConfig {
    pub command: String,
    pub levels: Vec<u64>,
    pub tolerance: f64,
    pub weight2_tolerance: f64,
    pub decomposition_tolerance: f64,
    pub mean_value_tolerance: f64,
    pub c_max: u64,
    pub pair_max: u64,
    pub n_powers: Vec<u32>,
    pub data: Vec<PathBuf>,
    pub normalization: f64,
    pub doubling_check: bool,
    pub format: OutputFormat,
    pub output: Option<PathBuf>,
    pub timing: Option<PathBuf>,
    pub deterministic: bool,
    pub endpoint: Option<String>,
    pub cache_dir: PathBuf,
    pub weight: Option<u32>,
}

const KEYS: [&str; 19] = [
    "q",
    "tolerance",
    "weight2_tolerance",
    "decomposition_tolerance",
    "mean_value_tolerance",
    "c_max",
    "pair_max",
    "n_powers",
    "data",
    "normalization",
    "doubling_check",
    "format",
    "output",
    "timing",
    "deterministic",
    "endpoint",
    "cache_dir",
    "weight",
    "config",
];

/// `key = value` lines; `#` starts a comment; keys may use `-` or `_`.
pub fn parse_config_file(text: &str) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value", i + 1)))?;
        let key = k.trim().replace('-', "_");
        if !KEYS.contains(&key.as_str()) || key == "config" {
            return Err(Error::Config(format!("line {}: unknown key {key:?}", i + 1)));
        }
        if out.insert(key.clone(), v.trim().to_string()).is_some() {
            return Err(Error::Config(format!("line {}: {key:?} given twice", i + 1)));
        }
    }
    Ok(out)
}

fn parse_value<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| Error::Config(format!("{key}: cannot parse {v:?}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, v: &str) -> Result<Vec<T>> {
    v.split(',').map(|s| s.trim()).filter(|s| !s.is_empty()).map(|s| parse_value(key, s)).collect()
}

impl RunConfig {
    /// Flags over file over defaults.
    pub fn resolve(command: &Command) -> Result<Self> {
        let o = command.options();
        let file = match &o.config {
            Some(p) => parse_config_file(&std::fs::read_to_string(p).map_err(|e| Error::Config(format!("{}: {e}", p.display())))?)?,
            None => BTreeMap::new(),
        };
        let name = command.name();
        let get = |k: &str| file.get(k).map(String::as_str);
        macro_rules! scalar {
            ($flag:expr, $key:literal, $default:expr) => {
                match ($flag, get($key)) {
                    (Some(v), _) => v,
                    (None, Some(s)) => parse_value($key, s)?,
                    (None, None) => $default,
                }
            };
        }
        macro_rules! list {
            ($flag:expr, $key:literal, $default:expr) => {
                match ($flag, get($key)) {
                    (Some(v), _) => v,
                    (None, Some(s)) => parse_list($key, s)?,
                    (None, None) => $default,
                }
            };
        }
        let default_levels = match name {
            "verify-fe" => vec![3, 5, 11],
            "scan-mean-value" => vec![5, 11],
            _ => ETA_LEVELS.to_vec(),
        };
        let default_powers = if name == "verify-fe" { vec![2] } else { vec![1, 2] };
        let format = match (o.format, get("format")) {
            (Some(f), _) => f,
            (None, Some(s)) => OutputFormat::from_str(s, true).map_err(|e| Error::Config(format!("format: {e}")))?,
            (None, None) => {
                if name == "kernels-table" {
                    OutputFormat::Csv
                } else {
                    OutputFormat::Json
                }
            }
        };
        let output: Option<PathBuf> = match (&o.output, get("output")) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(s)) => Some(PathBuf::from(s)),
            (None, None) => None,
        };
        let timing = match (&o.timing, get("timing")) {
            (Some(p), _) => Some(p.clone()),
            (None, Some(s)) => Some(PathBuf::from(s)),
            (None, None) => output.as_ref().map(|p| {
                let mut s = p.clone().into_os_string();
                s.push(".timing.json");
                PathBuf::from(s)
            }),
        };
        let cfg = RunConfig {
            command: name.to_string(),
            levels: list!(o.q.clone(), "q", default_levels),
            tolerance: scalar!(o.tolerance, "tolerance", 1e-6),
            weight2_tolerance: scalar!(o.weight2_tolerance, "weight2_tolerance", 1e-2),
            decomposition_tolerance: scalar!(o.decomposition_tolerance, "decomposition_tolerance", 1e-8),
            mean_value_tolerance: scalar!(o.mean_value_tolerance, "mean_value_tolerance", 0.3),
            c_max: scalar!(o.c_max, "c_max", 10_000),
            pair_max: scalar!(o.pair_max, "pair_max", 50),
            n_powers: list!(o.n_powers.clone(), "n_powers", default_powers),
            data: list!(o.data.clone(), "data", Vec::new()),
            normalization: scalar!(o.normalization, "normalization", 1.0),
            doubling_check: scalar!(o.doubling_check, "doubling_check", true),
            format,
            output,
            timing,
            deterministic: scalar!(o.deterministic, "deterministic", true),
            endpoint: match (&o.endpoint, get("endpoint")) {
                (Some(e), _) => Some(e.clone()),
                (None, Some(s)) => Some(s.to_string()),
                (None, None) => None,
            },
            cache_dir: match (&o.cache_dir, get("cache_dir")) {
                (Some(p), _) => p.clone(),
                (None, Some(s)) => PathBuf::from(s),
                (None, None) => data::default_cache_dir(),
            },
            weight: match (o.weight, get("weight")) {
                (Some(w), _) => Some(w),
                (None, Some(s)) => Some(parse_value("weight", s)?),
                (None, None) => None,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<()> {
        let needs_builtin = !matches!(self.command.as_str(), "validate-data" | "fetch-data");
        if needs_builtin {
            if let Some(q) = self.levels.iter().find(|q| !ETA_LEVELS.contains(q)) {
                return Err(Error::Config(format!("level {q} has no built-in form; use one of {ETA_LEVELS:?}")));
            }
        }
        if self.levels.is_empty() {
            return Err(Error::Config("no levels selected".into()));
        }
        for (name, v) in [
            ("tolerance", self.tolerance),
            ("weight2_tolerance", self.weight2_tolerance),
            ("decomposition_tolerance", self.decomposition_tolerance),
            ("mean_value_tolerance", self.mean_value_tolerance),
            ("normalization", self.normalization),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
        }
        if self.c_max < 2 || self.pair_max < 1 {
            return Err(Error::Config("c_max must be at least 2 and pair_max at least 1".into()));
        }
        if self.n_powers.iter().any(|j| *j == 0 || *j > 3) {
            return Err(Error::Config("n_powers must lie in 1..=3".into()));
        }
        if self.command == "validate-data" && self.data.is_empty() {
            return Err(Error::Config("validate-data needs --data".into()));
        }
        if self.command == "fetch-data" && (self.endpoint.is_none() || self.weight.is_none()) {
            return Err(Error::Config("fetch-data needs --endpoint and --weight".into()));
        }
        Ok(())
    }

    /// Tolerance for a check at weight `k`.
    fn tolerance_at(&self, k: u32) -> f64 {
        if k == 2 { self.weight2_tolerance } else { self.tolerance }
    }
}

/// Everything a run produces besides timing.
#[derive(Debug, Serialize)]
pub struct RunOutput {
    pub config: RunConfig,
    pub passed: bool,
    pub reports: Vec<VerificationReport>,
    /// Extra structured results (moment estimates, central values, kernel rows).
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub extras: Vec<Value>,
}

/// Parses `args` (including the program name), runs, writes output.
/// Returns the process exit code: 0 all passed, 1 a check failed,
/// 2 usage or configuration error.
pub fn main_with_args<I: IntoIterator<Item = String>>(args: I) -> i32 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let config = match RunConfig::resolve(&cli.command) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 2;
        }
    };
    match run(&config) {
        Ok(out) => match write_output(&out) {
            Ok(()) => i32::from(!out.passed),
            Err(e) => {
                eprintln!("error: {e}");
                1
            }
        },
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

/// Runs the configured command. Failures of individual checks are in the
/// reports; an `Err` means the run itself could not proceed.
pub fn run(config: &RunConfig) -> Result<RunOutput> {
    let mut reports = Vec::new();
    let mut extras = Vec::new();
    match config.command.as_str() {
        "verify-voronoi" => run_voronoi(config, &mut reports),
        "verify-petersson" => run_petersson(config, &mut reports)?,
        "verify-fe" => run_fe(config, &mut reports),
        "scan-mean-value" => run_mean_value(config, &mut reports, &mut extras)?,
        "validate-data" => run_validate(config, &mut reports)?,
        "kernels-table" => extras = kernels_table(config)?,
        "fetch-data" => run_fetch(config, &mut reports)?,
        other => return Err(Error::Config(format!("unknown command {other}"))),
    }
    if !config.deterministic {
        for r in &mut reports {
            r.inputs.insert("wall_time".into(), json!(r.wall_time));
        }
    }
    let passed = reports.iter().all(|r| r.passed);
    Ok(RunOutput { config: config.clone(), passed, reports, extras })
}

fn weight_of(q: u64) -> Result<u32> {
    Ok(eta_newform_unchecked(q, 1)?.weight())
}

fn failed(identity: &str, anchor: &str, tolerance: f64, inputs: &[(&str, Value)], e: &Error) -> VerificationReport {
    let mut r = VerificationReport::new(identity, anchor, tolerance);
    for (k, v) in inputs {
        r.inputs.insert(k.to_string(), v.clone());
    }
    r.fail(&e.to_string());
    r
}

/// Spreads the elapsed time of a group evenly over its reports.
fn stamp(reports: &mut [VerificationReport], start: Instant) {
    let t = start.elapsed().as_secs_f64() / reports.len().max(1) as f64;
    for r in reports {
        r.wall_time = t;
    }
}

fn run_voronoi(config: &RunConfig, reports: &mut Vec<VerificationReport>) {
    for &q in &config.levels {
        for &j in &config.n_powers {
            let start = Instant::now();
            let n = q.pow(j) as f64;
            let tol = config.tolerance;
            let group = voronoi::builtin_setup(q, SmoothBump::narrow(n), tol)
                .and_then(|(table, kernels)| voronoi::verify_voronoi_all_units(table, kernels, tol, SignConvention::VERIFIED));
            let mut group = match group {
                Ok(g) => g,
                Err(e) => vec![failed(
                    "voronoi",
                    "voronoi.additive-twist.prime-level",
                    tol,
                    &[("q", json!(q)), ("bump_start", json!(n))],
                    &e,
                )],
            };
            stamp(&mut group, start);
            reports.extend(group);
        }
    }
}

fn run_fe(config: &RunConfig, reports: &mut Vec<VerificationReport>) {
    for &q in &config.levels {
        for &j in &config.n_powers {
            let start = Instant::now();
            let n = q.pow(j) as f64;
            let mut group = Vec::new();
            match voronoi::builtin_setup(q, SmoothBump::narrow(n), config.tolerance) {
                Ok((table, kernels)) => {
                    match enumerate_characters(q) {
                        Ok(chars) => {
                            for chi in chars.iter().filter(|c| c.is_primitive()) {
                                group.push(voronoi::verify_twisted_fe(&table, &kernels, chi, config.tolerance));
                            }
                        }
                        Err(e) => group.push(failed(
                            "twisted_fe",
                            "voronoi.twisted-functional-equation.primitive",
                            config.tolerance,
                            &[("q", json!(q))],
                            &e,
                        )),
                    }
                    for h in 1..q {
                        group.push(voronoi::verify_character_decomposition(
                            &table,
                            &kernels,
                            h,
                            config.decomposition_tolerance,
                        ));
                    }
                }
                Err(e) => group.push(failed(
                    "twisted_fe",
                    "voronoi.twisted-functional-equation.primitive",
                    config.tolerance,
                    &[("q", json!(q)), ("bump_start", json!(n))],
                    &e,
                )),
            }
            stamp(&mut group, start);
            reports.extend(group);
        }
    }
}

/// Smoothing length of the `L(1, sym^2 f)` series side.
const L1_SMOOTHING: f64 = 400.0;

fn run_petersson(config: &RunConfig, reports: &mut Vec<VerificationReport>) -> Result<()> {
    for &q in &config.levels {
        let start = Instant::now();
        let k = weight_of(q)?;
        let tol = config.tolerance_at(k);
        let pairs = petersson::coprime_pairs(q, config.pair_max);
        let n_max = (config.pair_max * config.pair_max) as usize;
        let mut group = Vec::new();
        match SpectralBasis::builtin(q, n_max.max(q as usize)).and_then(|b| petersson::calibrate(b, config.c_max)) {
            Ok(basis) => {
                let mut r = petersson::verify_petersson(&basis, &pairs, config.c_max, tol);
                r.inputs.insert("tolerance_rule".into(), json!(if k == 2 { "weight2_tolerance" } else { "tolerance" }));
                group.push(r);
                let n_table = (40.0 * L1_SMOOTHING) as usize;
                match eta_newform(q, n_table) {
                    Ok(f) => group.push(petersson::l1_sym2_crosscheck(&basis, &Sym2CoeffTable::new(&f), L1_SMOOTHING, 0.25)),
                    Err(e) => group.push(failed("l1_sym2_crosscheck", "petersson.harmonic-weight.l1-sym2", 0.25, &[("q", json!(q))], &e)),
                }
            }
            Err(e) => group.push(failed("petersson", "petersson.trace-formula.newforms", tol, &[("q", json!(q))], &e)),
        }
        stamp(&mut group, start);
        reports.extend(group);
    }
    Ok(())
}

/// Coefficients of `f` used by the moment side.
const MOMENT_TABLE_LEN: usize = 20_000;

fn run_mean_value(config: &RunConfig, reports: &mut Vec<VerificationReport>, extras: &mut Vec<Value>) -> Result<()> {
    let mut records = Vec::new();
    for p in &config.data {
        records.extend(data::load_records(p)?);
    }
    for &q in &config.levels {
        let start = Instant::now();
        let k = weight_of(q)?;
        let table = Sym2CoeffTable::new(&eta_newform(q, MOMENT_TABLE_LEN)?);
        let mut group = Vec::new();
        let est = match petersson::moment_estimator(&table, MomentConfig::new(config.tolerance)) {
            Ok(e) => e,
            Err(e) => {
                group.push(failed("moment", "petersson.moment.kloosterman-side", config.tolerance, &[("q", json!(q))], &e));
                stamp(&mut group, start);
                reports.extend(group);
                continue;
            }
        };
        let doubled = if config.doubling_check {
            Some(petersson::moment_estimator(&table, MomentConfig::doubled(&est))?)
        } else {
            None
        };
        let mut mr = petersson::moment_report(&est, doubled.as_ref());
        extras.push(json!({"moment": moment_summary(&est)}));
        let at_2k: Vec<_> = records.iter().filter(|r| r.level == q && r.weight == 2 * k).cloned().collect();
        if at_2k.is_empty() {
            mr.note("direct side", 0.0, &format!("unavailable: no eigenvalue data at (q, 2k) = ({q}, {})", 2 * k));
            group.push(mr);
        } else {
            group.push(mr);
            let basis = data::spectral_basis(&at_2k, q, 2 * k).and_then(|b| petersson::calibrate(b, config.c_max));
            match basis {
                Ok(basis) => {
                    let pairs = petersson::coprime_pairs(q, 30);
                    group.push(petersson::verify_petersson(&basis, &pairs, config.c_max, config.tolerance));
                    match petersson::mean_value_direct(&table, &basis, config.tolerance) {
                        Ok(direct) => {
                            group.push(petersson::compare_mean_value(
                                &direct,
                                &est,
                                config.normalization,
                                config.mean_value_tolerance,
                            ));
                            extras.push(json!({"mean_value": direct}));
                        }
                        Err(e) => group.push(failed(
                            "mean_value",
                            "petersson.mean-value.sym2-twists",
                            config.mean_value_tolerance,
                            &[("q", json!(q))],
                            &e,
                        )),
                    }
                }
                Err(e) => group.push(failed(
                    "mean_value",
                    "petersson.mean-value.sym2-twists",
                    config.mean_value_tolerance,
                    &[("q", json!(q))],
                    &e,
                )),
            }
        }
        stamp(&mut group, start);
        reports.extend(group);
    }
    Ok(())
}

/// The estimate without the per-c vectors, plus its first entries.
fn moment_summary(est: &petersson::MomentEstimate) -> Value {
    let mut v = serde_json::to_value(est).unwrap_or(Value::Null);
    if let Value::Object(m) = &mut v {
        let head = |x: &[f64]| x.iter().take(16).copied().collect::<Vec<_>>();
        m.insert("per_c".into(), json!(head(&est.per_c)));
        m.insert("per_c_abs".into(), json!(head(&est.per_c_abs)));
    }
    v
}

fn run_validate(config: &RunConfig, reports: &mut Vec<VerificationReport>) -> Result<()> {
    for p in &config.data {
        for r in data::load_records(p)? {
            let start = Instant::now();
            let mut rep = data::validate_record(&r);
            rep.inputs.insert("file".into(), json!(p.display().to_string()));
            rep.wall_time = start.elapsed().as_secs_f64();
            reports.push(rep);
        }
    }
    Ok(())
}

fn run_fetch(config: &RunConfig, reports: &mut Vec<VerificationReport>) -> Result<()> {
    let endpoint = config.endpoint.as_deref().unwrap_or_default();
    let weight = config.weight.unwrap_or_default();
    let transport = HttpTransport::default();
    for &q in &config.levels {
        let records = data::fetch_remote(q, weight, endpoint, &config.cache_dir, &transport)?;
        for r in &records {
            reports.push(data::validate_record(r));
        }
        if let Some(out) = &config.output {
            let path = out.with_extension(format!("{q}.{weight}.jsonl"));
            data::write_records(&path, &records)?;
        }
    }
    Ok(())
}

/// Sample points of the kernels table.
pub const KERNEL_TABLE_X: [f64; 12] = [1e-3, 1e-2, 0.1, 0.25, 0.5, 1.0, 2.0, 5.0, 10.0, 30.0, 100.0, 300.0];

/// Rows `(kernel, k, x, value)` for `V` at the weight of each level and
/// `J_{k-1}`.
pub fn kernels_table(config: &RunConfig) -> Result<Vec<Value>> {
    let mut rows = Vec::new();
    for &q in &config.levels {
        let k = weight_of(q)?;
        let v = ContourKernel::standard(KernelKind::V { k })?;
        for x in KERNEL_TABLE_X {
            rows.push(json!({"kernel": "V", "k": k, "x": x, "value": v.eval(x).re}));
        }
        for x in KERNEL_TABLE_X {
            rows.push(json!({"kernel": format!("J_{}", k - 1), "k": k, "x": x, "value": bessel_j(k - 1, x)}));
        }
    }
    Ok(rows)
}

/// The run rendered in the configured format.
pub fn render(out: &RunOutput) -> Result<String> {
    match out.config.format {
        OutputFormat::Json => {
            let mut s = serde_json::to_string_pretty(out)?;
            s.push('\n');
            Ok(s)
        }
        OutputFormat::Csv => render_csv(out),
    }
}

fn render_csv(out: &RunOutput) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("csv: {e}"));
    let config = serde_json::to_string(&out.config)?;
    if out.config.command == "kernels-table" {
        w.write_record(["kernel", "k", "x", "value", "config"]).map_err(csv_err)?;
        for r in &out.extras {
            w.write_record([
                r["kernel"].as_str().unwrap_or_default().to_string(),
                r["k"].to_string(),
                format!("{:e}", r["x"].as_f64().unwrap_or(f64::NAN)),
                format!("{:.15e}", r["value"].as_f64().unwrap_or(f64::NAN)),
                config.clone(),
            ])
            .map_err(csv_err)?;
        }
    } else {
        w.write_record([
            "identity",
            "anchor",
            "q",
            "k",
            "passed",
            "abs_residual",
            "rel_residual",
            "tolerance",
            "first_failure",
            "inputs",
            "truncation",
            "config",
        ])
        .map_err(csv_err)?;
        for r in &out.reports {
            let get = |k: &str| r.inputs.get(k).map(|v| v.to_string()).unwrap_or_default();
            w.write_record([
                r.identity.clone(),
                r.anchor.clone(),
                if r.inputs.contains_key("q") { get("q") } else { get("level") },
                if r.inputs.contains_key("k") { get("k") } else { get("weight") },
                r.passed.to_string(),
                format!("{:e}", r.abs_residual),
                format!("{:e}", r.rel_residual),
                format!("{:e}", r.tolerance),
                r.first_failure.clone().unwrap_or_default(),
                serde_json::to_string(&r.inputs)?,
                serde_json::to_string(&r.truncation)?,
                config.clone(),
            ])
            .map_err(csv_err)?;
        }
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}

/// Writes the rendered run and, if configured, the timing file.
pub fn write_output(out: &RunOutput) -> Result<()> {
    let text = render(out)?;
    match &out.config.output {
        Some(p) => write_file(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    if let Some(t) = &out.config.timing {
        let timing = json!({
            "command": out.config.command,
            "reports": out.reports.iter().map(|r| json!({
                "identity": r.identity,
                "inputs": r.inputs,
                "wall_time": r.wall_time,
            })).collect::<Vec<_>>(),
            "total_wall_time": out.reports.iter().map(|r| r.wall_time).sum::<f64>(),
        });
        write_file(t, serde_json::to_string_pretty(&timing)?.as_bytes())?;
    }
    Ok(())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, bytes)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resolve(args: &[&str]) -> Result<RunConfig> {
        let cli = Cli::try_parse_from(std::iter::once("symsq").chain(args.iter().copied())).unwrap();
        RunConfig::resolve(&cli.command)
    }

    #[test]
    fn defaults_are_materialized() {
        let c = resolve(&["verify-petersson"]).unwrap();
        assert_eq!(c.levels, vec![2, 3, 5, 11]);
        assert_eq!((c.tolerance, c.weight2_tolerance, c.c_max, c.pair_max), (1e-6, 1e-2, 10_000, 50));
        assert_eq!(c.format, OutputFormat::Json);
        assert!(c.deterministic);
        assert_eq!(resolve(&["verify-fe"]).unwrap().levels, vec![3, 5, 11]);
        assert_eq!(resolve(&["kernels-table"]).unwrap().format, OutputFormat::Csv);
    }

    #[test]
    fn flags_win_over_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("run.cfg");
        std::fs::write(&p, "# scan\nq = 5, 11\ntolerance = 1e-4\nc-max = 500\nformat = csv\n").unwrap();
        let c = resolve(&["verify-petersson", "--config", p.to_str().unwrap(), "--tolerance", "1e-3"]).unwrap();
        assert_eq!(c.levels, vec![5, 11]);
        assert_eq!(c.tolerance, 1e-3);
        assert_eq!(c.c_max, 500);
        assert_eq!(c.format, OutputFormat::Csv);
    }

    #[test]
    fn bad_config_lines_rejected() {
        assert!(matches!(parse_config_file("tolerance 1e-3"), Err(Error::Config(_))));
        assert!(matches!(parse_config_file("colour = red"), Err(Error::Config(_))));
        assert!(matches!(parse_config_file("q = 5\nq = 11"), Err(Error::Config(_))));
    }

    #[test]
    fn unsupported_level_is_usage_error() {
        assert!(matches!(resolve(&["verify-voronoi", "--q", "7"]), Err(Error::Config(_))));
        let code = main_with_args(["symsq", "verify-voronoi", "--q", "7"].map(String::from));
        assert_eq!(code, 2);
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        assert_eq!(main_with_args(["symsq", "verify-fe", "--bogus"].map(String::from)), 2);
    }

    #[test]
    fn mean_value_without_data_notes_missing_side() {
        let mut c = resolve(&["scan-mean-value", "--q", "5", "--doubling-check", "false"]).unwrap();
        c.output = None;
        let out = run(&c).unwrap();
        assert_eq!(out.reports.len(), 1);
        let r = &out.reports[0];
        assert_eq!(r.identity, "moment");
        assert!(r.passed, "{:?}", r.first_failure);
        assert!(r.checks.iter().any(|c| c.name == "direct side" && c.note.as_deref().unwrap().starts_with("unavailable")));
    }

    #[test]
    fn csv_has_one_row_per_report() {
        let c = resolve(&["validate-data", "--data", concat!(env!("CARGO_MANIFEST_DIR"), "/data/basis_11_4.jsonl"), "--format", "csv"]).unwrap();
        let out = run(&c).unwrap();
        assert!(out.passed);
        let text = render(&out).unwrap();
        let mut rd = csv::Reader::from_reader(text.as_bytes());
        assert_eq!(rd.records().count(), 2);
    }
}
