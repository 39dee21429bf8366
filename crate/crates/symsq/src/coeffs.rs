//! Symmetric-square coefficients `A(n,1)`, the two-index coefficients
//! `A(n,m)`, truncated Dirichlet series and local Euler factors.
//!
//! `A(n,1) = sum_{d1^2 d2 = n} lambda(d2^2)`. It is multiplicative, with
//! `A(p,1) = lambda(p^2) = lambda(p)^2 - 1` at `p != q`, and its local
//! generating series at `p != q` is the inverse of
//! `1 - A(p,1) X + A(p,1) X^2 - X^3`.

use crate::arith::{gcd, is_prime, mobius};
use crate::error::{Error, Result};
use crate::numeric::{CompensatedSum, ComplexSum};
use crate::qexp::NewformData;
use num_complex::Complex64;

/// `lambda(p^m)` from `lambda(p)`: the Hecke recursion at good primes and
/// `lambda(q)^m` at the level.
pub fn lambda_prime_power(lambda_p: f64, at_level: bool, m: u32) -> f64 {
    if at_level {
        return lambda_p.powi(m as i32);
    }
    let (mut prev, mut cur) = (1.0, lambda_p);
    if m == 0 {
        return 1.0;
    }
    for _ in 1..m {
        let next = lambda_p * cur - prev;
        prev = cur;
        cur = next;
    }
    cur
}

/// `A(p^j,1) = sum_{0 <= i <= j/2} lambda(p^{2(j - 2i)})`.
pub fn sym2_prime_power(lambda_p: f64, at_level: bool, j: u32) -> f64 {
    (0..=j / 2).map(|i| lambda_prime_power(lambda_p, at_level, 2 * (j - 2 * i))).sum()
}

/// `A(n,1)` for `n` coprime to the level, from the eigenvalues of `f` at
/// the primes dividing `n`.
pub fn sym2_coeff(f: &NewformData, n: u64) -> Result<f64> {
    if n == 0 || n as usize > f.len() {
        return Err(Error::OutOfRange { n, len: f.len() });
    }
    if n % f.level() == 0 {
        return Err(Error::NotCoprimeToLevel { n, level: f.level() });
    }
    let mut out = 1.0;
    for (p, e) in crate::arith::factorize(n) {
        out *= sym2_prime_power(f.lambda(p)?, false, e);
    }
    Ok(out)
}

/// `A(n,1)` for all `n <= N`, built by a smallest-prime-factor sieve.
/// Entries at multiples of the level follow the same definition but are
/// flagged: [`Sym2CoeffTable::a1`] rejects them.
#[derive(Clone, Debug, PartialEq)]
pub struct Sym2CoeffTable {
    level: u64,
    weight: u32,
    a1: Vec<f64>,
}

impl Sym2CoeffTable {
    /// Table through `f.len()`.
    pub fn new(f: &NewformData) -> Self {
        Self::from_lambdas(f.level(), f.weight(), f.lambdas())
    }

    /// Table through `n_max <= f.len()`.
    pub fn with_limit(f: &NewformData, n_max: usize) -> Result<Self> {
        if n_max > f.len() {
            return Err(Error::OutOfRange { n: n_max as u64, len: f.len() });
        }
        Ok(Self::from_lambdas(f.level(), f.weight(), &f.lambdas()[..=n_max]))
    }

    /// Table from `lambda(0..=N)` (index 0 ignored). Only the values at
    /// primes are read.
    pub fn from_lambdas(level: u64, weight: u32, lambda: &[f64]) -> Self {
        let n_max = lambda.len().saturating_sub(1);
        let mut spf = vec![0u32; n_max + 1];
        for p in 2..=n_max {
            if spf[p] == 0 {
                for m in (p..=n_max).step_by(p) {
                    if spf[m] == 0 {
                        spf[m] = p as u32;
                    }
                }
            }
        }
        let mut a1 = vec![0.0; n_max + 1];
        if n_max >= 1 {
            a1[1] = 1.0;
        }
        for n in 2..=n_max {
            let p = spf[n] as usize;
            let (mut rest, mut e) = (n, 0u32);
            while rest % p == 0 {
                rest /= p;
                e += 1;
            }
            a1[n] = if rest == 1 {
                sym2_prime_power(lambda[p], p as u64 == level, e)
            } else {
                a1[n / rest] * a1[rest]
            };
        }
        Self { level, weight, a1 }
    }

    /// Table with explicitly given entries `A(0..=N)` (index 0 ignored),
    /// for fault injection and degenerate inputs.
    pub fn from_values(level: u64, weight: u32, mut a1: Vec<f64>) -> Self {
        if !a1.is_empty() {
            a1[0] = 0.0;
        }
        Self { level, weight, a1 }
    }

    pub fn level(&self) -> u64 {
        self.level
    }

    pub fn weight(&self) -> u32 {
        self.weight
    }

    /// Largest tabulated `n`.
    pub fn len(&self) -> usize {
        self.a1.len().saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_flagged(&self, n: u64) -> bool {
        n % self.level == 0
    }

    /// `A(n,1)` for `n` coprime to the level.
    pub fn a1(&self, n: u64) -> Result<f64> {
        let v = self.a1_flagged(n)?;
        if self.is_flagged(n) {
            return Err(Error::NotCoprimeToLevel { n, level: self.level });
        }
        Ok(v)
    }

    /// `A(n,1)` including the flagged entries at multiples of the level.
    pub fn a1_flagged(&self, n: u64) -> Result<f64> {
        if n == 0 || n as usize > self.len() {
            return Err(Error::OutOfRange { n, len: self.len() });
        }
        Ok(self.a1[n as usize])
    }

    /// `A(0..=N, 1)` with index 0 and the flagged entries set to zero, so
    /// sums over the slice are automatically restricted to `(n, q) = 1`.
    pub fn coprime_values(&self) -> Vec<f64> {
        let q = self.level as usize;
        self.a1.iter().enumerate().map(|(n, &v)| if n % q == 0 { 0.0 } else { v }).collect()
    }

    /// Replaces one entry (fault injection).
    pub fn with_entry(mut self, n: u64, value: f64) -> Result<Self> {
        self.a1_flagged(n)?;
        self.a1[n as usize] = value;
        Ok(self)
    }

    /// `A(n,m) = sum_{d | (n,m)} mu(d) A(n/d,1) A(m/d,1)`.
    pub fn rankin(&self, n: u64, m: u64) -> Result<f64> {
        if n == 0 || m == 0 {
            return Err(Error::InvalidArgument("rankin coefficient needs n, m >= 1".into()));
        }
        for x in [n, m] {
            if self.is_flagged(x) {
                return Err(Error::NotCoprimeToLevel { n: x, level: self.level });
            }
            if x as usize > self.len() {
                return Err(Error::OutOfRange { n: x, len: self.len() });
            }
        }
        let g = gcd(n, m);
        let mut out = 0.0;
        for d in crate::arith::divisors(g) {
            let mu = mobius(d);
            if mu != 0 {
                out += mu as f64 * self.a1[(n / d) as usize] * self.a1[(m / d) as usize];
            }
        }
        Ok(out)
    }

    /// The local factor `1 - A(p) chi(p) X + A(p) chi(p^2) X^2 - chi(p^3) X^3`
    /// as coefficients of `1, X, X^2, X^3`.
    pub fn local_quartic(&self, p: u64, chi: [Complex64; 3]) -> Result<[Complex64; 4]> {
        let ap = self.a1(p)?;
        Ok(local_quartic(ap, chi))
    }
}

fn local_quartic(ap: f64, chi: [Complex64; 3]) -> [Complex64; 4] {
    [Complex64::new(1.0, 0.0), -ap * chi[0], ap * chi[1], -chi[2]]
}

/// A truncated Dirichlet series with its tail accounting.
#[derive(Clone, Debug, PartialEq)]
pub struct DirichletPartial {
    pub value: Complex64,
    /// `|(1 - q^{-s-1})^{-1}| sum_{n > X} d_3(n) n^{-Re s}`, or infinity
    /// when `Re s <= 1`.
    pub tail_estimate: f64,
    pub warning: Option<String>,
}

/// `(1 - q^{-s-1})^{-1} sum_{n <= X, (n,q) = 1} A(n,1) n^{-s}`.
pub fn sym2_dirichlet_partial(table: &Sym2CoeffTable, s: Complex64, x: usize) -> Result<DirichletPartial> {
    if x > table.len() {
        return Err(Error::OutOfRange { n: x as u64, len: table.len() });
    }
    let q = table.level();
    let mut acc = ComplexSum::new();
    for n in 1..=x as u64 {
        if n % q == 0 {
            continue;
        }
        let a = table.a1[n as usize];
        if a != 0.0 {
            acc.add(a * (-s * (n as f64).ln()).exp());
        }
    }
    let level_factor = 1.0 / (1.0 - (-(s + 1.0) * (q as f64).ln()).exp());
    let (tail_estimate, warning) = if s.re > 1.0 {
        (level_factor.norm() * divisor3_tail(s.re, x), None)
    } else {
        (f64::INFINITY, Some(format!("Re(s) = {} <= 1: the truncation error is not controlled", s.re)))
    };
    Ok(DirichletPartial { value: level_factor * acc.value(), tail_estimate, warning })
}

/// `sum_n b(n)/n e^{-n/X}` with `b` the coefficients of the series in
/// [`sym2_dirichlet_partial`] (level factor included). Shifting the Mellin
/// contour to `Re s = -1/2` shows it equals the value at `s = 1` up to
/// `O(X^{-1/2})`. Uses `n <= 40 X`, where `e^{-n/X} < 5e-18`.
pub fn sym2_smoothed_at_one(table: &Sym2CoeffTable, x: f64) -> Result<f64> {
    if !(x >= 1.0) {
        return Err(Error::InvalidArgument(format!("smoothing length {x} must be at least 1")));
    }
    let n_max = (40.0 * x).ceil() as usize;
    if n_max > table.len() {
        return Err(Error::OutOfRange { n: n_max as u64, len: table.len() });
    }
    let q = table.level();
    let a = table.coprime_values();
    let mut acc = CompensatedSum::new();
    // b(q^e m) = q^{-e} A(m) for (m, q) = 1.
    let mut qe = 1u64;
    let mut weight = 1.0;
    while qe as usize <= n_max && weight > 1e-18 {
        for m in 1..=(n_max as u64 / qe) {
            let v = a[m as usize];
            if v != 0.0 {
                let n = (qe * m) as f64;
                acc.add(weight * v / n * (-n / x).exp());
            }
        }
        qe *= q;
        weight /= q as f64;
    }
    Ok(acc.value())
}

/// `(1 - q^{-s-1})^{-1} prod_{p <= P, p != q} (1 - A(p) p^{-s} + A(p) p^{-2s} - p^{-3s})^{-1}`.
pub fn sym2_euler_product(table: &Sym2CoeffTable, s: Complex64, p_max: usize) -> Result<Complex64> {
    if p_max > table.len() {
        return Err(Error::OutOfRange { n: p_max as u64, len: table.len() });
    }
    let q = table.level();
    let mut ln_prod = Complex64::new(0.0, 0.0);
    for p in 2..=p_max as u64 {
        if p == q || !is_prime(p) {
            continue;
        }
        let x = (-s * (p as f64).ln()).exp();
        let ap = table.a1[p as usize];
        let factor = 1.0 - ap * x + ap * x * x - x * x * x;
        ln_prod -= factor.ln();
    }
    let level_factor = 1.0 / (1.0 - (-(s + 1.0) * (q as f64).ln()).exp());
    Ok(level_factor * ln_prod.exp())
}

/// `zeta(sigma)^3 - sum_{n <= X} d_3(n) n^{-sigma}` for real `sigma > 1`.
fn divisor3_tail(sigma: f64, x: usize) -> f64 {
    let mut d3 = vec![0u32; x + 1];
    let mut d2 = vec![0u32; x + 1];
    for a in 1..=x {
        for m in (a..=x).step_by(a) {
            d2[m] += 1;
        }
    }
    for a in 1..=x {
        for m in (a..=x).step_by(a) {
            d3[m] += d2[a];
        }
    }
    let head: f64 = crate::numeric::rsum((1..=x).map(|n| d3[n] as f64 * (n as f64).powf(-sigma)));
    (zeta_real(sigma).powi(3) - head).max(0.0)
}

/// `zeta(sigma)` for real `sigma > 1` by Euler-Maclaurin after 20 terms.
fn zeta_real(sigma: f64) -> f64 {
    const N: f64 = 20.0;
    let head: f64 = (1..20).map(|n| (n as f64).powf(-sigma)).sum();
    // B_2/2!, B_4/4!, B_6/6!, B_8/8! applied to the derivatives of t^{-sigma}.
    let b = [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1_209_600.0];
    let mut corr = 0.0;
    let mut rising = sigma;
    let mut pow = N.powf(-sigma - 1.0);
    for (i, bi) in b.iter().enumerate() {
        corr += bi * rising * pow;
        let j = 2 * i as i32;
        rising *= (sigma + j as f64 + 1.0) * (sigma + j as f64 + 2.0);
        pow /= N * N;
    }
    head + N.powf(1.0 - sigma) / (sigma - 1.0) + 0.5 * N.powf(-sigma) + corr
}

/// Power series `sum_{j <= D} A(p^j,1) chi(p)^j X^j` from the
/// eigenvalue at `p`.
fn local_series(lambda_p: f64, chi_p: Complex64, d: usize) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(d + 1);
    let mut chi_pow = Complex64::new(1.0, 0.0);
    for j in 0..=d {
        out.push(sym2_prime_power(lambda_p, false, j as u32) * chi_pow);
        chi_pow *= chi_p;
    }
    out
}

fn mul_truncated(a: &[Complex64], b: &[Complex64], d: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); d + 1];
    for (i, x) in a.iter().enumerate().take(d + 1) {
        for (j, y) in b.iter().enumerate().take(d + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

fn good_prime(f: &NewformData, p: u64) -> Result<f64> {
    if !is_prime(p) || p == f.level() {
        return Err(Error::InvalidArgument(format!("{p} is not a prime different from the level {}", f.level())));
    }
    f.lambda(p)
}

/// Multiplies the local series `sum_j A(p^j,1) chi(p^j) X^j` by the local
/// factor `1 - A(p,1) chi(p) X + A(p,1) chi(p^2) X^2 - chi(p^3) X^3` to
/// degree `D` and returns `max_{j <= D-3} |c_j - [j = 0]|`. The series
/// uses `chi(p^j) = chi(p)^j`; the factor uses the three given values.
pub fn local_factor_identity(f: &NewformData, p: u64, chi: [Complex64; 3], d: usize) -> Result<f64> {
    if d < 3 {
        return Err(Error::InvalidArgument(format!("degree {d} < 3 leaves nothing to check")));
    }
    let lp = good_prime(f, p)?;
    let series = local_series(lp, chi[0], d);
    let quartic = local_quartic(sym2_prime_power(lp, false, 1), chi);
    let prod = mul_truncated(&series, &quartic, d);
    Ok(prod[..=d - 3]
        .iter()
        .enumerate()
        .map(|(j, c)| (c - if j == 0 { 1.0 } else { 0.0 }).norm())
        .fold(0.0, f64::max))
}

/// For `p^r` exactly dividing `d2`: compares
/// `1 - R_{p,0}^{-1} sum_{j<r} A(p^j,1) chi(p^j) X^j` with
/// `R_{p,0}^{-1} R_{p,r}` as power series to degree `D`, where
/// `R_{p,r} = sum_{j >= r} A(p^j,1) chi(p^j) X^j` and `R_{p,0}^{-1}` is the
/// cubic local factor. Returns the largest coefficient difference.
pub fn telescoping_identity(f: &NewformData, p: u64, chi: [Complex64; 3], r: usize, d: usize) -> Result<f64> {
    let lp = good_prime(f, p)?;
    let series = local_series(lp, chi[0], d);
    let quartic = local_quartic(sym2_prime_power(lp, false, 1), chi);
    let head: Vec<Complex64> = series.iter().take(r).copied().collect();
    let mut lhs = mul_truncated(&quartic, &head, d).into_iter().map(|c| -c).collect::<Vec<_>>();
    lhs[0] += 1.0;
    let tail: Vec<Complex64> =
        series.iter().enumerate().map(|(j, &c)| if j >= r { c } else { Complex64::new(0.0, 0.0) }).collect();
    let rhs = mul_truncated(&quartic, &tail, d);
    Ok(lhs.iter().zip(&rhs).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arith::{divisors, enumerate_characters};
    use crate::qexp::eta_newform;
    use proptest::prelude::*;
    use std::sync::OnceLock;

    fn form(q: u64) -> &'static NewformData {
        static FORMS: OnceLock<Vec<NewformData>> = OnceLock::new();
        let forms = FORMS.get_or_init(|| [2, 3, 5, 11].iter().map(|&q| eta_newform(q, 100_000).unwrap()).collect());
        forms.iter().find(|f| f.level() == q).unwrap()
    }

    fn table(q: u64) -> &'static Sym2CoeffTable {
        static TABLES: OnceLock<Vec<Sym2CoeffTable>> = OnceLock::new();
        let tables = TABLES.get_or_init(|| [2, 3, 5, 11].iter().map(|&q| Sym2CoeffTable::new(form(q))).collect());
        tables.iter().find(|t| t.level() == q).unwrap()
    }

    /// `sum_{d1^2 d2 = n} lambda(d2^2)` with `lambda` read directly off the
    /// q-expansion.
    fn brute_a1(f: &NewformData, n: u64) -> f64 {
        divisors(n)
            .into_iter()
            .filter(|&d1| n % (d1 * d1) == 0)
            .map(|d1| {
                let d2 = n / (d1 * d1);
                f.lambda(d2 * d2).unwrap()
            })
            .sum()
    }

    #[test]
    fn first_coefficient_is_one() {
        for q in [2, 3, 5, 11] {
            assert_eq!(table(q).a1(1).unwrap(), 1.0);
        }
    }

    #[test]
    fn table_matches_direct_enumeration() {
        for q in [2, 3, 5, 11] {
            let f = form(q);
            let t = table(q);
            for n in 1..=316u64 {
                let want = brute_a1(f, n);
                let got = t.a1_flagged(n).unwrap();
                assert!((got - want).abs() < 1e-11, "q={q} n={n}: {got} vs {want}");
                if n % q != 0 {
                    assert!((sym2_coeff(f, n).unwrap() - want).abs() < 1e-11);
                }
            }
        }
    }

    #[test]
    fn prime_and_four_examples() {
        let f = form(11);
        let t = table(11);
        for p in [2u64, 3, 7, 13, 97] {
            let l = f.lambda(p).unwrap();
            assert!((t.a1(p).unwrap() - (l * l - 1.0)).abs() < 1e-13);
            assert!((t.a1(p).unwrap() - f.lambda(p * p).unwrap()).abs() < 1e-13);
        }
        // (d1, d2) in {(1, 4), (2, 1)}.
        let want = 1.0 + f.lambda(16).unwrap();
        assert!((t.a1(4).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn multiples_of_the_level_are_flagged() {
        let t = table(5);
        assert!(matches!(t.a1(10), Err(Error::NotCoprimeToLevel { n: 10, level: 5 })));
        assert!(t.a1_flagged(10).is_ok());
        assert!(matches!(t.rankin(3, 5), Err(Error::NotCoprimeToLevel { .. })));
        assert!(matches!(t.a1(200_001), Err(Error::OutOfRange { .. })));
        // A(q^e) = sum_i q^{-(e - 2i)}.
        let q2 = t.a1_flagged(25).unwrap();
        assert!((q2 - (1.0 / 25.0 + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn rankin_examples() {
        let t = table(11);
        for n in [1u64, 2, 6, 30] {
            assert_eq!(t.rankin(n, 1).unwrap(), t.a1(n).unwrap());
        }
        for p in [2u64, 3, 5, 7] {
            let a = t.a1(p).unwrap();
            assert!((t.rankin(p, p).unwrap() - (a * a - 1.0)).abs() < 1e-13);
        }
        // d | gcd(6, 4) = 2: d = 1 and d = 2.
        let want = t.a1(6).unwrap() * t.a1(4).unwrap() - t.a1(3).unwrap() * t.a1(2).unwrap();
        assert!((t.rankin(6, 4).unwrap() - want).abs() < 1e-13);
    }

    #[test]
    fn rankin_reduces_to_a1_up_to_ten_thousand() {
        for q in [2, 11] {
            let t = table(q);
            for n in (1..=10_000u64).filter(|n| n % q != 0) {
                assert_eq!(t.rankin(n, 1).unwrap(), t.a1(n).unwrap());
            }
        }
    }

    #[test]
    fn multiplicative_on_coprime_arguments() {
        for q in [2, 3, 5, 11] {
            let t = table(q);
            for n in (1..=200u64).filter(|n| n % q != 0) {
                for m in (1..=200u64).filter(|&m| m % q != 0 && gcd(n, m) == 1) {
                    let lhs = t.a1(n * m).unwrap();
                    let rhs = t.a1(n).unwrap() * t.a1(m).unwrap();
                    assert!((lhs - rhs).abs() <= 1e-12 * (1.0 + rhs.abs()), "q={q} n={n} m={m}");
                }
            }
        }
    }

    #[test]
    fn dirichlet_partial_converges_and_matches_euler_product() {
        let t = table(11);
        let s = Complex64::new(2.0, 0.0);
        let a = sym2_dirichlet_partial(t, s, 10_000).unwrap();
        let b = sym2_dirichlet_partial(t, s, 100_000).unwrap();
        assert!((a.value - b.value).norm() < 1e-5);
        assert!(b.tail_estimate < a.tail_estimate);
        assert!((a.value - b.value).norm() <= a.tail_estimate);
        let euler = sym2_euler_product(t, s, 100_000).unwrap();
        assert!((euler - b.value).norm() < 1e-6, "{euler} vs {}", b.value);
        assert!(b.warning.is_none());
    }

    #[test]
    fn dirichlet_partial_warns_left_of_one_and_vanishes_for_zero_table() {
        let t = table(5);
        let p = sym2_dirichlet_partial(t, Complex64::new(0.5, 1.0), 1000).unwrap();
        assert!(p.warning.is_some() && p.tail_estimate.is_infinite());
        let zero = Sym2CoeffTable::from_values(5, 4, vec![0.0; 1001]);
        let z = sym2_dirichlet_partial(&zero, Complex64::new(2.0, 0.0), 1000).unwrap();
        assert_eq!(z.value, Complex64::new(0.0, 0.0));
    }

    #[test]
    fn zeta_matches_known_values() {
        assert!((zeta_real(2.0) - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-14);
        assert!((zeta_real(4.0) - std::f64::consts::PI.powi(4) / 90.0).abs() < 1e-14);
    }

    fn chi_triple(chi: &crate::arith::DirichletCharacter, p: u64) -> [Complex64; 3] {
        [chi.eval(p as i64), chi.eval((p * p) as i64), chi.eval((p * p * p) as i64)]
    }

    #[test]
    fn local_factor_examples() {
        let one = Complex64::new(1.0, 0.0);
        assert!(local_factor_identity(form(11), 2, [one; 3], 10).unwrap() < 1e-10);
        for chi in enumerate_characters(5).unwrap() {
            assert!(local_factor_identity(form(11), 3, chi_triple(&chi, 3), 10).unwrap() < 1e-10);
        }
        // Degree 3: only the constant term is compared.
        assert_eq!(local_factor_identity(form(11), 2, [one; 3], 3).unwrap(), 0.0);
        assert!(local_factor_identity(form(11), 11, [one; 3], 10).is_err());
    }

    #[test]
    fn local_factor_with_wrong_middle_sign_fails() {
        // Replacing +A(p) X^2 by -A(p) X^2 must break the identity.
        let f = form(5);
        let lp = f.lambda(2).unwrap();
        let series = local_series(lp, Complex64::new(1.0, 0.0), 10);
        let ap = sym2_prime_power(lp, false, 1);
        let bad = [Complex64::new(1.0, 0.0), Complex64::new(-ap, 0.0), Complex64::new(-ap, 0.0), Complex64::new(-1.0, 0.0)];
        let prod = mul_truncated(&series, &bad, 10);
        assert!(prod[1..=7].iter().any(|c| c.norm() > 1e-3));
    }

    #[test]
    fn telescoping_holds() {
        for q in [2, 3, 5, 11] {
            let f = form(q);
            for p in [2u64, 3, 7].into_iter().filter(|&p| p != q) {
                for chi in enumerate_characters(7).unwrap().iter().take(3) {
                    for r in 0..5 {
                        let res = telescoping_identity(f, p, chi_triple(chi, p), r, 10).unwrap();
                        assert!(res < 1e-10, "q={q} p={p} r={r}: {res}");
                    }
                }
            }
        }
    }

    proptest! {
        #[test]
        fn prime_power_matches_definition(lp in -2.0f64..2.0, j in 0u32..12) {
            // A(p^j) from the local factor recursion.
            let ap = lp * lp - 1.0;
            let mut a = vec![1.0f64];
            for i in 1..=j as usize {
                let at = |k: isize| if k < 0 { 0.0 } else { a[k as usize] };
                let i = i as isize;
                a.push(ap * at(i - 1) - ap * at(i - 2) + at(i - 3));
            }
            let direct = sym2_prime_power(lp, false, j);
            prop_assert!((direct - a[j as usize]).abs() < 1e-9 * (1.0 + direct.abs()));
        }

        #[test]
        fn rankin_is_symmetric(n in 1u64..2000, m in 1u64..2000) {
            let t = table(3);
            prop_assume!(n % 3 != 0 && m % 3 != 0);
            prop_assert_eq!(t.rankin(n, m).unwrap(), t.rankin(m, n).unwrap());
        }
    }
}
