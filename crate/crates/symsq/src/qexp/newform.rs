//! Prime-level newforms from eta products, with exact coefficient checks.

use super::series::eta_expansion;
use crate::arith::{divisors, factorize, gcd, is_prime};
use crate::error::{Error, Result};
use crate::report::VerificationReport;
use num_bigint::BigInt;
use num_traits::ToPrimitive;

/// Levels `q` with `(q + 1) | 24` and even `24/(q+1)`: for these,
/// `eta(z)^a eta(q z)^a` with `a = 24/(q+1)` spans the weight-`a` cusp
/// forms of level `q`.
pub const ETA_LEVELS: [u64; 4] = [2, 3, 5, 11];

/// A holomorphic newform of prime level: exact coefficients `a_n` and the
/// normalized eigenvalues `lambda(n) = a_n / n^{(k-1)/2}`, both indexed by
/// `n` (index 0 unused).
#[derive(Clone, Debug, PartialEq)]
pub struct NewformData {
    level: u64,
    weight: u32,
    coeffs: Vec<i128>,
    lambda: Vec<f64>,
}

/// `a / n^{(k-1)/2}` with `n^{(k-2)/2}` exact, so only two roundings
/// besides converting `a`.
fn normalize(a: i128, n: u64, k: u32) -> f64 {
    let int_part = (n as f64).powi((k as i32 - 2) / 2);
    a as f64 / int_part / (n as f64).sqrt()
}

impl NewformData {
    /// Wraps exact coefficients `a_1, a_2, ...` (`coeffs[0]` is `a_1`).
    /// No invariants are checked here; see [`validate_newform`].
    pub fn from_coefficients(level: u64, weight: u32, coeffs: &[i128]) -> Result<Self> {
        if weight == 0 || weight % 2 == 1 {
            return Err(Error::InvalidArgument(format!("weight must be even and positive, got {weight}")));
        }
        if !is_prime(level) {
            return Err(Error::InvalidArgument(format!("level must be prime, got {level}")));
        }
        let mut c = Vec::with_capacity(coeffs.len() + 1);
        c.push(0);
        c.extend_from_slice(coeffs);
        let lambda = c.iter().enumerate().map(|(n, &a)| if n == 0 { 0.0 } else { normalize(a, n as u64, weight) }).collect();
        Ok(Self { level, weight, coeffs: c, lambda })
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// Largest `n` with a known coefficient.
    pub fn len(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn a(&self, n: u64) -> Result<i128> {
        self.coeffs.get(n as usize).copied().filter(|_| n >= 1).ok_or(Error::OutOfRange { n, len: self.len() })
    }

    pub fn lambda(&self, n: u64) -> Result<f64> {
        self.lambda.get(n as usize).copied().filter(|_| n >= 1).ok_or(Error::OutOfRange { n, len: self.len() })
    }

    /// `a_1, ..., a_N`.
    pub fn coefficients(&self) -> &[i128] {
        &self.coeffs[1..]
    }

    /// `lambda(0) = 0, lambda(1), ..., lambda(N)`, for hot loops.
    pub fn lambdas(&self) -> &[f64] {
        &self.lambda
    }

    /// `lambda(n)` rebuilt from prime powers: `lambda(p^j)` by the Hecke
    /// recursion at `p != q` and `lambda(q^j) = lambda(q)^j`, multiplied
    /// over the factorization of `n`.
    pub fn lambda_multiplicative(&self, n: u64) -> Result<f64> {
        if n == 0 || n as usize > self.len() {
            return Err(Error::OutOfRange { n, len: self.len() });
        }
        let mut out = 1.0;
        for (p, e) in factorize(n) {
            let lp = self.lambda[p as usize];
            let v = if p == self.level {
                lp.powi(e as i32)
            } else {
                let (mut prev, mut cur) = (1.0, lp);
                for _ in 1..e {
                    let next = lp * cur - prev;
                    prev = cur;
                    cur = next;
                }
                cur
            };
            out *= v;
        }
        Ok(out)
    }

    /// Replaces `a_n` (fault injection and data ingestion).
    pub fn with_coefficient(mut self, n: u64, a: i128) -> Result<Self> {
        if n == 0 || n as usize > self.len() {
            return Err(Error::OutOfRange { n, len: self.len() });
        }
        self.coeffs[n as usize] = a;
        self.lambda[n as usize] = normalize(a, n, self.weight);
        Ok(self)
    }
}

/// The newform `eta(z)^a eta(q z)^a`, `a = 24/(q+1)`, of weight `a` and
/// level `q`, with coefficients through `n_max`. Every invariant of
/// [`validate_newform`] is checked before returning.
pub fn eta_newform(q: u64, n_max: usize) -> Result<NewformData> {
    let f = eta_newform_unchecked(q, n_max)?;
    let report = validate_newform(&f);
    if !report.passed {
        return Err(Error::NotANewform(report.first_failure.unwrap_or_default()));
    }
    Ok(f)
}

/// [`eta_newform`] without the validation pass.
pub fn eta_newform_unchecked(q: u64, n_max: usize) -> Result<NewformData> {
    if !ETA_LEVELS.contains(&q) {
        return Err(Error::UnknownForm { level: q, weight: 0 });
    }
    if n_max < 1 {
        return Err(Error::InvalidArgument("need at least one coefficient".into()));
    }
    let a = 24 / (q + 1);
    // Both factors carry the product through q^{n_max - 1}, which after the
    // leading q^1 gives a_1 .. a_{n_max}.
    let left = eta_expansion(1, a, n_max - 1)?;
    let right = eta_expansion(q as usize, a, n_max - 1)?;
    let f = left.mul(&right);
    debug_assert_eq!(f.integral_offset()?, 1);
    let coeffs: Vec<i128> = f
        .coeffs()
        .iter()
        .map(|c| c.to_i128().ok_or_else(|| Error::InvalidArgument("coefficient exceeds i128".into())))
        .collect::<Result<_>>()?;
    NewformData::from_coefficients(q, a as u32, &coeffs)
}

/// `a_n a_m - sum_{d | (n,m), (d,q)=1} d^{k-1} a_{nm/d^2}`, exactly.
fn hecke_defect(f: &NewformData, n: u64, m: u64) -> BigInt {
    let k1 = f.weight - 1;
    let g = gcd(n, m);
    if g == 1 {
        if let Some(v) = f.coeffs[n as usize]
            .checked_mul(f.coeffs[m as usize])
            .and_then(|p| p.checked_sub(f.coeffs[(n * m) as usize]))
        {
            return BigInt::from(v);
        }
    }
    let ds = divisors(g);
    let fast = || -> Option<i128> {
        let mut acc = f.coeffs[n as usize].checked_mul(f.coeffs[m as usize])?;
        for &d in &ds {
            if d % f.level != 0 {
                let term = (d as i128).checked_pow(k1)?.checked_mul(f.coeffs[(n * m / (d * d)) as usize])?;
                acc = acc.checked_sub(term)?;
            }
        }
        Some(acc)
    };
    if let Some(v) = fast() {
        return BigInt::from(v);
    }
    let mut acc = BigInt::from(f.coeffs[n as usize]) * f.coeffs[m as usize];
    for &d in &ds {
        if d % f.level != 0 {
            acc -= num_traits::pow(BigInt::from(d), k1 as usize) * f.coeffs[(n * m / (d * d)) as usize];
        }
    }
    acc
}

/// Exact checks of the newform invariants through `N = f.len()`:
///
/// * Hecke multiplicativity `a_n a_m = sum_{d | (n,m), (d,q)=1} d^{k-1} a_{nm/d^2}`
///   for all `nm <= N`,
/// * Deligne's bound `a_p^2 <= 4 p^{k-1}` at primes `p != q`,
/// * `a_q^2 = q^{k-2}`, i.e. `q lambda(q)^2 = 1`.
///
/// Residuals are integer defects; a violated relation fails the report and
/// is named in `first_failure`.
pub fn validate_newform(f: &NewformData) -> VerificationReport {
    let n_max = f.len() as u64;
    let (q, k) = (f.level, f.weight);
    let mut report = VerificationReport::new("newform", "newform.hecke-deligne-fricke", 0.0)
        .input("level", q)
        .input("weight", k)
        .input("n_max", n_max);
    if f.coeffs.get(1) != Some(&1) {
        report.fail("a_1 != 1");
    }
    let mut worst = 0.0f64;
    let mut first: Option<(u64, u64)> = None;
    'outer: for n in 2..=n_max {
        if n * n > n_max {
            break;
        }
        for m in n..=n_max / n {
            let d = hecke_defect(f, n, m);
            let v = d.to_f64().unwrap_or(f64::MAX).abs();
            if v > worst {
                worst = v;
            }
            if v != 0.0 && first.is_none() {
                first = Some((n, m));
                break 'outer;
            }
        }
    }
    report.check("hecke multiplicativity (exact)", worst, 0.0);
    if let Some((n, m)) = first {
        report.first_failure = Some(format!("hecke relation at (n, m) = ({n}, {m})"));
    }
    let mut deligne_violation: Option<u64> = None;
    let mut deligne_ratio = 0.0f64;
    for p in 2..=n_max {
        if p == q || !is_prime(p) {
            continue;
        }
        let ap = BigInt::from(f.coeffs[p as usize]);
        let bound = num_traits::pow(BigInt::from(p), (k - 1) as usize) * 4;
        let sq = &ap * &ap;
        deligne_ratio = deligne_ratio.max(f.lambda[p as usize].abs());
        if sq > bound && deligne_violation.is_none() {
            deligne_violation = Some(p);
        }
    }
    report.check("deligne |lambda(p)| <= 2 (exact)", if deligne_violation.is_some() { 1.0 } else { 0.0 }, 0.0);
    report.note("max |lambda(p)|", deligne_ratio, "over primes p != q");
    if let Some(p) = deligne_violation {
        report.first_failure.get_or_insert(format!("deligne bound at p = {p}"));
    }
    if q <= n_max {
        let aq = BigInt::from(f.coeffs[q as usize]);
        let defect = &aq * &aq - num_traits::pow(BigInt::from(q), (k - 2) as usize);
        let v = defect.to_f64().unwrap_or(f64::MAX).abs();
        if !report.check("a_q^2 = q^(k-2) (exact)", v, 0.0) {
            report.first_failure = Some(format!("a_q^2 - q^(k-2) = {defect}"));
        }
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn level_eleven_first_coefficients() {
        let f = eta_newform(11, 200).unwrap();
        assert_eq!(f.weight(), 2);
        assert_eq!(&f.coefficients()[..10], &[1, -2, -1, 2, 1, 2, -2, 0, -2, -2]);
    }

    #[test]
    fn fricke_sign_at_levels_five_and_two() {
        let f5 = eta_newform(5, 100).unwrap();
        assert_eq!(f5.weight(), 4);
        assert_eq!(f5.a(5).unwrap().pow(2), 25);
        let f2 = eta_newform(2, 100).unwrap();
        assert_eq!(f2.weight(), 8);
        assert_eq!(f2.a(2).unwrap().pow(2), 64);
    }

    #[test]
    fn level_three_passes_validation() {
        let f = eta_newform_unchecked(3, 500).unwrap();
        let r = validate_newform(&f);
        assert!(r.passed, "{r:?}");
        for p in 2..=500u64 {
            if p != 3 && is_prime(p) {
                assert!(f.lambda(p).unwrap().abs() <= 2.0);
            }
        }
    }

    #[test]
    fn corrupted_coefficient_is_localized() {
        let f = eta_newform(11, 200).unwrap();
        let a4 = f.a(4).unwrap();
        let bad = f.with_coefficient(4, a4 + 1).unwrap();
        let r = validate_newform(&bad);
        assert!(!r.passed);
        assert_eq!(r.first_failure.as_deref(), Some("hecke relation at (n, m) = (2, 2)"));
    }

    #[test]
    fn lambda_two_ways() {
        for q in ETA_LEVELS {
            let f = eta_newform(q, 2000).unwrap();
            for n in 1..=2000 {
                let a = f.lambda(n).unwrap();
                let b = f.lambda_multiplicative(n).unwrap();
                assert!((a - b).abs() < 1e-12, "q={q} n={n}: {a} vs {b}");
            }
        }
    }

    #[test]
    fn unsupported_level_is_rejected() {
        assert!(matches!(eta_newform(7, 100), Err(Error::UnknownForm { level: 7, .. })));
    }
}
