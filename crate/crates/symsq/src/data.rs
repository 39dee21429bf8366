//! Newform eigenvalue records: a JSON Lines file format, structural loading,
//! Hecke-relation validation and an optional caching HTTP fetch.
//!
//! One record per line:
//!
//! ```text
//! {"level":11,"weight":2,"label":"11.2.a.a","an":[1,-2,-1,2,1,2,-2,0,-2,-2],"precision":15}
//! ```
//!
//! `an` lists `a_1, a_2, ...` as integers (exact) or decimal strings (a real
//! embedding of an irrational coefficient field). Blank lines are skipped.

use crate::arith::{divisors, gcd, is_prime};
use crate::error::{Error, Result};
use crate::petersson::{BasisForm, SpectralBasis};
use crate::qexp::{validate_newform, NewformData};
use crate::report::VerificationReport;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use std::collections::HashSet;
use std::io::Write;
use std::path::{Path, PathBuf};

/// Environment variable overriding the fetch cache directory.
pub const CACHE_DIR_ENV: &str = "SYMSQ_CACHE_DIR";

/// One Fourier coefficient as stored.
#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Exact(i128),
    Decimal(String),
}

impl Coefficient {
    pub fn to_f64(&self) -> f64 {
        match self {
            Coefficient::Exact(a) => *a as f64,
            // Parsed on load, so this cannot fail.
            Coefficient::Decimal(s) => s.parse().unwrap_or(f64::NAN),
        }
    }

    fn to_value(&self) -> Value {
        match self {
            Coefficient::Exact(a) => match i64::try_from(*a) {
                Ok(v) => Value::from(v),
                Err(_) => Value::String(a.to_string()),
            },
            Coefficient::Decimal(s) => Value::String(s.clone()),
        }
    }

    fn from_value(v: &Value) -> std::result::Result<Self, String> {
        match v {
            Value::Number(n) => {
                if let Some(i) = n.as_i64() {
                    Ok(Coefficient::Exact(i as i128))
                } else if let Some(u) = n.as_u64() {
                    Ok(Coefficient::Exact(u as i128))
                } else {
                    Err(format!("coefficient {n} is not an integer; write embeddings as strings"))
                }
            }
            Value::String(s) => {
                let x: f64 = s.parse().map_err(|_| format!("coefficient {s:?} is not a decimal number"))?;
                if !x.is_finite() {
                    return Err(format!("coefficient {s:?} is not finite"));
                }
                Ok(Coefficient::Decimal(s.clone()))
            }
            other => Err(format!("coefficient {other} must be an integer or a decimal string")),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EigenvalueRecord {
    pub level: u64,
    pub weight: u32,
    pub label: String,
    /// `an[0]` is `a_1`.
    pub an: Vec<Coefficient>,
    /// Decimal digits claimed for the coefficients.
    pub precision: u32,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRecord {
    level: u64,
    weight: u32,
    label: String,
    an: Vec<Value>,
    precision: u32,
}

impl EigenvalueRecord {
    /// The exact record of an integral newform.
    pub fn from_newform(label: &str, f: &NewformData) -> Self {
        Self {
            level: f.level(),
            weight: f.weight(),
            label: label.to_string(),
            an: f.coefficients().iter().map(|&a| Coefficient::Exact(a)).collect(),
            precision: 15,
        }
    }

    pub fn is_exact(&self) -> bool {
        self.an.iter().all(|a| matches!(a, Coefficient::Exact(_)))
    }

    /// Largest `n` with a coefficient.
    pub fn len(&self) -> usize {
        self.an.len()
    }

    pub fn is_empty(&self) -> bool {
        self.an.is_empty()
    }

    /// `lambda(n) = a_n / n^{(k-1)/2}` for `n = 0..=len` (index 0 is 0).
    pub fn lambdas(&self) -> Vec<f64> {
        let e = (self.weight as f64 - 1.0) / 2.0;
        std::iter::once(0.0)
            .chain(self.an.iter().enumerate().map(|(i, a)| a.to_f64() / ((i + 1) as f64).powf(e)))
            .collect()
    }

    /// One line of the file format, without the newline.
    pub fn to_line(&self) -> String {
        let raw = RawRecord {
            level: self.level,
            weight: self.weight,
            label: self.label.clone(),
            an: self.an.iter().map(Coefficient::to_value).collect(),
            precision: self.precision,
        };
        serde_json::to_string(&raw).expect("records serialize")
    }

    fn parse(line: &str) -> std::result::Result<Self, String> {
        let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
        if raw.level == 0 {
            return Err("level must be positive".into());
        }
        if raw.weight == 0 || raw.weight % 2 == 1 {
            return Err(format!("weight {} must be even and positive", raw.weight));
        }
        if raw.label.is_empty() {
            return Err("empty label".into());
        }
        let an = raw
            .an
            .iter()
            .enumerate()
            .map(|(i, v)| Coefficient::from_value(v).map_err(|e| format!("a_{}: {e}", i + 1)))
            .collect::<std::result::Result<Vec<_>, _>>()?;
        Ok(Self { level: raw.level, weight: raw.weight, label: raw.label, an, precision: raw.precision })
    }
}

/// Records from a string in the file format. Errors name the 1-based line.
pub fn parse_records(text: &str) -> Result<Vec<EigenvalueRecord>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let r = EigenvalueRecord::parse(line).map_err(|message| Error::Data { line: i + 1, message })?;
        if !seen.insert(r.label.clone()) {
            return Err(Error::Data { line: i + 1, message: format!("duplicate label {:?}", r.label) });
        }
        out.push(r);
    }
    Ok(out)
}

pub fn load_records(path: &Path) -> Result<Vec<EigenvalueRecord>> {
    parse_records(&std::fs::read_to_string(path)?)
}

/// Writes records atomically (temporary file in the target directory, then rename).
pub fn write_records(path: &Path, records: &[EigenvalueRecord]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    for r in records {
        writeln!(tmp, "{}", r.to_line())?;
    }
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// Hecke relations, Deligne's bound and `q lambda(q)^2 = 1`.
///
/// Exact records are checked in integer arithmetic. Decimal records are
/// checked on normalized eigenvalues, with
/// `lambda(m) lambda(n) = sum_{d | (m,n), (d,q)=1} lambda(mn/d^2)` required to
/// `10^{2 - precision}`.
pub fn validate_record(r: &EigenvalueRecord) -> VerificationReport {
    if r.is_exact() && is_prime(r.level) {
        let coeffs: Vec<i128> = r
            .an
            .iter()
            .map(|a| match a {
                Coefficient::Exact(v) => *v,
                Coefficient::Decimal(_) => unreachable!(),
            })
            .collect();
        if let Ok(f) = NewformData::from_coefficients(r.level, r.weight, &coeffs) {
            let mut report = validate_newform(&f);
            report.identity = "record".into();
            report.inputs.insert("label".into(), Value::String(r.label.clone()));
            report.inputs.insert("precision".into(), Value::from(r.precision));
            return report;
        }
    }
    let tol = 10f64.powi(2 - r.precision as i32);
    let mut report = VerificationReport::new("record", "newform.hecke-deligne-fricke", tol)
        .input("label", &r.label)
        .input("level", r.level)
        .input("weight", r.weight)
        .input("n_max", r.len())
        .input("precision", r.precision);
    if !is_prime(r.level) {
        report.fail(&format!("level {} is not prime", r.level));
        return report;
    }
    let lambda = r.lambdas();
    let n_max = r.len() as u64;
    if n_max == 0 || (lambda[1] - 1.0).abs() > tol {
        report.fail("a_1 != 1");
        return report;
    }
    let q = r.level;
    let mut worst = 0.0f64;
    let mut first: Option<(u64, u64)> = None;
    for m in 2..=n_max {
        if m * m > n_max {
            break;
        }
        for n in m..=n_max / m {
            let mut rhs = 0.0;
            for d in divisors(gcd(m, n)) {
                if d % q != 0 {
                    rhs += lambda[(m * n / (d * d)) as usize];
                }
            }
            let v = (lambda[m as usize] * lambda[n as usize] - rhs).abs();
            worst = worst.max(v);
            if !(v <= tol) && first.is_none() {
                first = Some((m, n));
            }
        }
    }
    report.check("hecke relations", worst, tol);
    report.note("max hecke residual", worst, "precision actually attained");
    if let Some((m, n)) = first {
        report.first_failure = Some(format!("hecke relation at (n, m) = ({m}, {n})"));
    }
    let mut deligne: f64 = 0.0;
    let mut violation = None;
    for p in (2..=n_max).filter(|p| *p != q && is_prime(*p)) {
        let l = lambda[p as usize].abs();
        deligne = deligne.max(l);
        if l > 2.0 + tol && violation.is_none() {
            violation = Some(p);
        }
    }
    report.check("deligne |lambda(p)| <= 2", (deligne - 2.0).max(0.0), tol);
    if let Some(p) = violation {
        report.first_failure.get_or_insert(format!("deligne bound at p = {p}"));
    }
    if q <= n_max {
        let v = q as f64 * lambda[q as usize].powi(2) - 1.0;
        report.check("q lambda(q)^2 = 1", v.abs(), tol);
    }
    report
}

/// The basis form of a record, after validation.
pub fn basis_form(r: &EigenvalueRecord) -> Result<BasisForm> {
    let report = validate_record(r);
    if !report.passed {
        return Err(Error::NotANewform(format!(
            "{}: {}",
            r.label,
            report.first_failure.unwrap_or_default()
        )));
    }
    BasisForm::new(&r.label, r.lambdas())
}

/// Every validated record at `(level, weight)` as one basis. The caller
/// asserts completeness; this only checks that something was supplied.
pub fn spectral_basis(records: &[EigenvalueRecord], level: u64, weight: u32) -> Result<SpectralBasis> {
    let forms = records
        .iter()
        .filter(|r| r.level == level && r.weight == weight)
        .map(basis_form)
        .collect::<Result<Vec<_>>>()?;
    if forms.is_empty() {
        return Err(Error::DataUnavailable(format!("no records for level {level}, weight {weight}")));
    }
    SpectralBasis::new(level, weight, forms)
}

/// A way to GET a URL. Lets tests replace the network.
pub trait Transport {
    fn get(&self, url: &str) -> Result<Vec<u8>>;
}

/// HTTP(S) through `ureq`.
pub struct HttpTransport {
    agent: ureq::Agent,
}

impl HttpTransport {
    pub fn new(timeout: std::time::Duration) -> Self {
        let agent = ureq::Agent::config_builder().timeout_global(Some(timeout)).build().into();
        Self { agent }
    }
}

impl Default for HttpTransport {
    fn default() -> Self {
        Self::new(std::time::Duration::from_secs(30))
    }
}

impl Transport for HttpTransport {
    fn get(&self, url: &str) -> Result<Vec<u8>> {
        let mut resp = self.agent.get(url).call().map_err(|e| Error::Transport(e.to_string()))?;
        resp.body_mut().read_to_vec().map_err(|e| Error::Transport(e.to_string()))
    }
}

/// `$SYMSQ_CACHE_DIR`, else `.symsq-cache` in the working directory.
pub fn default_cache_dir() -> PathBuf {
    std::env::var_os(CACHE_DIR_ENV).map(PathBuf::from).unwrap_or_else(|| PathBuf::from(".symsq-cache"))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Raw responses live under `objects/<sha256 of body>`; `refs/<sha256 of url>`
/// holds the body hash. Both are written by atomic rename.
pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    pub fn new(dir: &Path) -> Self {
        Self { dir: dir.to_path_buf() }
    }

    fn ref_path(&self, url: &str) -> PathBuf {
        self.dir.join("refs").join(sha_hex(url.as_bytes()))
    }

    /// The cached body for `url`, if present and intact.
    pub fn get(&self, url: &str) -> Option<Vec<u8>> {
        let hash = std::fs::read_to_string(self.ref_path(url)).ok()?;
        let hash = hash.trim();
        let body = std::fs::read(self.dir.join("objects").join(hash)).ok()?;
        (sha_hex(&body) == hash).then_some(body)
    }

    pub fn put(&self, url: &str, body: &[u8]) -> Result<()> {
        let hash = sha_hex(body);
        atomic_write(&self.dir.join("objects"), &hash, body)?;
        atomic_write(&self.dir.join("refs"), &sha_hex(url.as_bytes()), hash.as_bytes())
    }
}

fn atomic_write(dir: &Path, name: &str, bytes: &[u8]) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.persist(dir.join(name)).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// `endpoint` with `{level}` and `{weight}` substituted.
pub fn endpoint_url(endpoint: &str, level: u64, weight: u32) -> String {
    endpoint.replace("{level}", &level.to_string()).replace("{weight}", &weight.to_string())
}

/// Records at `(level, weight)` from `endpoint`, through the cache.
///
/// The response is either the record file format, or a JSON object whose
/// `data` array holds objects with `label`, `level`, `weight` and either
/// `an` or `traces` (`traces` is accepted for one-dimensional forms only,
/// with a leading `a_0 = 0` dropped). A cache hit makes no request. A
/// transport failure without a cache entry, or a response that does not
/// convert, is [`Error::DataUnavailable`] and leaves the cache untouched.
pub fn fetch_remote(
    level: u64,
    weight: u32,
    endpoint: &str,
    cache_dir: &Path,
    transport: &dyn Transport,
) -> Result<Vec<EigenvalueRecord>> {
    let url = endpoint_url(endpoint, level, weight);
    let cache = ResponseCache::new(cache_dir);
    if let Some(body) = cache.get(&url) {
        return convert_response(&body, level, weight);
    }
    let body = transport.get(&url).map_err(|e| Error::DataUnavailable(format!("{url}: {e}")))?;
    let records = convert_response(&body, level, weight)?;
    cache.put(&url, &body)?;
    Ok(records)
}

fn convert_response(body: &[u8], level: u64, weight: u32) -> Result<Vec<EigenvalueRecord>> {
    let unavailable = |m: String| Error::DataUnavailable(m);
    let text = std::str::from_utf8(body).map_err(|_| unavailable("response is not UTF-8".into()))?;
    let records = match serde_json::from_str::<Value>(text) {
        Ok(Value::Object(obj)) if obj.contains_key("data") => {
            let data = obj["data"].as_array().ok_or_else(|| unavailable("`data` is not an array".into()))?;
            data.iter().filter_map(|d| convert_entry(d).transpose()).collect::<Result<Vec<_>>>()?
        }
        _ => parse_records(text).map_err(|e| unavailable(format!("response does not parse: {e}")))?,
    };
    let records: Vec<_> = records.into_iter().filter(|r| r.level == level && r.weight == weight).collect();
    if records.is_empty() {
        return Err(unavailable(format!("no usable records for level {level}, weight {weight}")));
    }
    Ok(records)
}

fn convert_entry(d: &Value) -> Result<Option<EigenvalueRecord>> {
    let bad = |m: &str| Error::DataUnavailable(format!("malformed entry: {m}"));
    let label = d.get("label").and_then(Value::as_str).ok_or_else(|| bad("missing label"))?;
    let level = d.get("level").and_then(Value::as_u64).ok_or_else(|| bad("missing level"))?;
    let weight = d.get("weight").and_then(Value::as_u64).ok_or_else(|| bad("missing weight"))? as u32;
    let an = if let Some(an) = d.get("an").and_then(Value::as_array) {
        an.clone()
    } else if let Some(tr) = d.get("traces").and_then(Value::as_array) {
        if d.get("dim").and_then(Value::as_u64) != Some(1) {
            return Ok(None);
        }
        let skip = usize::from(tr.first().and_then(Value::as_i64) == Some(0));
        tr[skip..].to_vec()
    } else {
        return Err(bad("neither `an` nor `traces`"));
    };
    let an = an.iter().map(Coefficient::from_value).collect::<std::result::Result<Vec<_>, _>>().map_err(|e| bad(&e))?;
    Ok(Some(EigenvalueRecord { level, weight, label: label.to_string(), an, precision: 15 }))
}
