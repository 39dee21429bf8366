//! Truncated integer power series in `q` with a rational leading exponent,
//! and eta-quotient expansions built from them.

use super::ntt::{convolve_truncated_bits, EXACT_BITS};
use crate::error::{Error, Result};
use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

/// `q^{offset24/24} * sum_{i < len} c_i q^i`, exact, truncated after `len`
/// terms. The leading exponent is tracked in 24ths so that products of
/// eta factors with integral total exponent come out as ordinary series.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntegerSeries {
    offset24: i64,
    coeffs: Vec<BigInt>,
}

impl IntegerSeries {
    pub fn new(offset24: i64, coeffs: Vec<BigInt>) -> Self {
        Self { offset24, coeffs }
    }

    pub fn from_i128(offset24: i64, coeffs: &[i128]) -> Self {
        Self { offset24, coeffs: coeffs.iter().map(|&c| BigInt::from(c)).collect() }
    }

    pub fn offset24(&self) -> i64 {
        self.offset24
    }

    /// Number of stored terms.
    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn coeffs(&self) -> &[BigInt] {
        &self.coeffs
    }

    /// Coefficient of `q^n` for integral `n`. Exponents below the leading
    /// one have coefficient zero; exponents past the truncation are errors.
    pub fn coeff(&self, n: i64) -> Result<BigInt> {
        let lead = self.integral_offset()?;
        if n < lead {
            return Ok(BigInt::zero());
        }
        let i = (n - lead) as usize;
        self.coeffs
            .get(i)
            .cloned()
            .ok_or(Error::OutOfRange { n: n as u64, len: (lead + self.coeffs.len() as i64 - 1).max(0) as usize })
    }

    /// Leading exponent when it is an integer.
    pub fn integral_offset(&self) -> Result<i64> {
        if self.offset24 % 24 != 0 {
            Err(Error::FractionalExponent(self.offset24))
        } else {
            Ok(self.offset24 / 24)
        }
    }

    /// Coefficients as `i128` if they all fit.
    pub fn to_i128(&self) -> Option<Vec<i128>> {
        self.coeffs.iter().map(|c| c.to_i128()).collect()
    }

    /// Truncated product. Length is the shorter of the two lengths, which
    /// is exactly the range both factors determine.
    pub fn mul(&self, other: &Self) -> Self {
        let len = self.len().min(other.len());
        let offset24 = self.offset24 + other.offset24;
        if let (Some(a), Some(b)) = (self.to_i128(), other.to_i128()) {
            if let Some(bits) = product_bits(&a[..len], &b[..len]) {
                return Self::from_i128(offset24, &convolve_truncated_bits(&a, &b, len, bits));
            }
        }
        let mut out = vec![BigInt::zero(); len];
        for (i, x) in self.coeffs[..len].iter().enumerate() {
            if x.is_zero() {
                continue;
            }
            for (j, y) in other.coeffs[..len - i].iter().enumerate() {
                out[i + j] += x * y;
            }
        }
        Self { offset24, coeffs: out }
    }

    /// `f(z) -> f(m z)`: exponents scale by `m`, keeping `len` terms.
    pub fn rescale(&self, m: usize, len: usize) -> Self {
        let mut out = vec![BigInt::zero(); len];
        for (i, c) in self.coeffs.iter().enumerate() {
            if i * m >= len {
                break;
            }
            out[i * m] = c.clone();
        }
        Self { offset24: self.offset24 * m as i64, coeffs: out }
    }
}

/// A bit count that bounds every coefficient of the product, from
/// `len * max|a| * max|b|`, if it is within the exact NTT range.
fn product_bits(a: &[i128], b: &[i128]) -> Option<u32> {
    let bits = |v: &[i128]| v.iter().map(|x| 128 - x.unsigned_abs().leading_zeros()).max().unwrap_or(0);
    let len_bits = 64 - (a.len().max(1) as u64).leading_zeros();
    let total = bits(a) + bits(b) + len_bits;
    (total <= EXACT_BITS).then_some(total)
}

/// Exponents `k(3k-1)/2`, `k` in `Z`, up to `n`, with their signs `(-1)^k`:
/// the nonzero terms of `prod_{m >= 1} (1 - x^m)`.
pub fn pentagonal_terms(n: usize) -> Vec<(usize, i64)> {
    let mut out = vec![(0, 1)];
    let mut k: i64 = 1;
    loop {
        let sign = if k % 2 == 0 { 1 } else { -1 };
        let a = (k * (3 * k - 1) / 2) as usize;
        let b = (k * (3 * k + 1) / 2) as usize;
        if a > n {
            break;
        }
        out.push((a, sign));
        if b <= n {
            out.push((b, sign));
        }
        k += 1;
    }
    out.sort_unstable();
    out
}

/// Exponents `k(k+1)/2` up to `n` with coefficients `(-1)^k (2k+1)`: the
/// nonzero terms of `prod_{m >= 1} (1 - x^m)^3`.
pub fn jacobi_cube_terms(n: usize) -> Vec<(usize, i64)> {
    let mut out = Vec::new();
    let mut k: i64 = 0;
    loop {
        let e = (k * (k + 1) / 2) as usize;
        if e > n {
            break;
        }
        out.push((e, if k % 2 == 0 { 2 * k + 1 } else { -(2 * k + 1) }));
        k += 1;
    }
    out
}

/// Dense product of two sparse series, to `len` terms.
fn sparse_product(a: &[(usize, i64)], b: &[(usize, i64)], len: usize) -> Vec<i128> {
    let mut out = vec![0i128; len];
    for &(i, x) in a {
        for &(j, y) in b {
            if i + j >= len {
                break;
            }
            out[i + j] += (x * y) as i128;
        }
    }
    out
}

/// `P(x)^e` to `len` terms for a sparse `P` with `P(0) = 1`, by the
/// recurrence `n b_n = sum_{k=1}^n ((e+1) k - n) a_k b_{n-k}` obtained
/// from `P (P^e)' = e P' P^e`. The divisions are exact.
fn sparse_power_i128(terms: &[(usize, i64)], e: u64, len: usize) -> Option<Vec<i128>> {
    let mut b = vec![0i128; len];
    if len == 0 {
        return Some(b);
    }
    b[0] = 1;
    let e1 = e as i128 + 1;
    for n in 1..len {
        let mut acc: i128 = 0;
        for &(k, a) in terms.iter().skip(1) {
            if k > n {
                break;
            }
            let factor = (e1 * k as i128 - n as i128).checked_mul(a as i128)?;
            acc = acc.checked_add(factor.checked_mul(b[n - k])?)?;
        }
        b[n] = acc / n as i128;
    }
    Some(b)
}

fn sparse_power_big(terms: &[(usize, i64)], e: u64, len: usize) -> Vec<BigInt> {
    let mut b = vec![BigInt::zero(); len];
    if len == 0 {
        return b;
    }
    b[0] = BigInt::from(1);
    let e1 = e as i64 + 1;
    for n in 1..len {
        let mut acc = BigInt::zero();
        for &(k, a) in terms.iter().skip(1) {
            if k > n {
                break;
            }
            acc += &b[n - k] * ((e1 * k as i64 - n as i64) * a);
        }
        b[n] = acc / n as i64;
    }
    b
}

/// `eta(scale z)^exponent = q^{scale * exponent / 24} prod_m (1 - q^{scale m})^exponent`,
/// with terms of the product through `q^{n}` (so `n + 1` stored terms
/// after rescaling).
pub fn eta_expansion(scale: usize, exponent: u64, n: usize) -> Result<IntegerSeries> {
    if scale == 0 || exponent == 0 {
        return Err(Error::InvalidArgument("eta expansion needs scale >= 1 and exponent >= 1".into()));
    }
    let len = n / scale + 1;
    let terms = pentagonal_terms(len);
    // Exponents 1, 2, 3, 4, 6 are products of at most two sparse factors,
    // the pentagonal series and Jacobi's cube, and 8 is the square of 4.
    // Others use the power recurrence.
    let sparse = match exponent {
        1 => Some(sparse_product(&terms, &[(0, 1)], len)),
        2 => Some(sparse_product(&terms, &terms, len)),
        3 => Some(sparse_product(&jacobi_cube_terms(len), &[(0, 1)], len)),
        4 => Some(sparse_product(&jacobi_cube_terms(len), &terms, len)),
        6 => {
            let j = jacobi_cube_terms(len);
            Some(sparse_product(&j, &j, len))
        }
        8 => {
            let four = sparse_product(&jacobi_cube_terms(len), &terms, len);
            product_bits(&four, &four).map(|bits| convolve_truncated_bits(&four, &four, len, bits))
        }
        _ => None,
    };
    let base = match sparse.or_else(|| sparse_power_i128(&terms, exponent, len)) {
        Some(v) => IntegerSeries::from_i128(0, &v),
        None => IntegerSeries::new(0, sparse_power_big(&terms, exponent, len)),
    };
    let mut out = base.rescale(scale, n + 1);
    out.offset24 = (scale as u64 * exponent) as i64;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// `prod (1 - x^m)` to `len` terms by repeated multiplication.
    fn naive_euler(len: usize) -> Vec<i64> {
        let mut p = vec![0i64; len];
        p[0] = 1;
        for m in 1..len {
            for i in (m..len).rev() {
                p[i] -= p[i - m];
            }
        }
        p
    }

    #[test]
    fn pentagonal_matches_naive_product() {
        let len = 201;
        let mut dense = vec![0i64; len];
        for (k, s) in pentagonal_terms(len - 1) {
            dense[k] = s;
        }
        assert_eq!(dense, naive_euler(len));
    }

    #[test]
    fn delta_coefficients() {
        let d = eta_expansion(1, 24, 10).unwrap();
        assert_eq!(d.integral_offset().unwrap(), 1);
        let want = [1i64, -24, 252, -1472, 4830, -6048, -16744, 84480, -113643];
        for (n, w) in want.iter().enumerate() {
            assert_eq!(d.coeff(n as i64 + 1).unwrap(), BigInt::from(*w));
        }
    }

    #[test]
    fn power_recurrence_matches_repeated_multiplication() {
        let len = 120;
        let p = naive_euler(len);
        let mut cube = vec![0i64; len];
        cube[0] = 1;
        for _ in 0..3 {
            let mut next = vec![0i64; len];
            for i in 0..len {
                for j in 0..len - i {
                    next[i + j] += cube[i] * p[j];
                }
            }
            cube = next;
        }
        let eta3 = eta_expansion(1, 3, len - 1).unwrap();
        assert_eq!(eta3.offset24(), 3);
        for i in 0..len {
            assert_eq!(eta3.coeffs()[i], BigInt::from(cube[i]));
        }
    }

    #[test]
    fn sparse_products_agree_with_power_recurrence() {
        let len = 400;
        let terms = pentagonal_terms(len);
        for e in [1u64, 2, 3, 4, 6, 8] {
            let fast = eta_expansion(1, e, len - 1).unwrap();
            let slow = sparse_power_i128(&terms, e, len).unwrap();
            assert_eq!(fast.to_i128().unwrap(), slow, "exponent {e}");
        }
    }

    #[test]
    fn big_integer_path_agrees_with_i128_path() {
        let terms = pentagonal_terms(80);
        let small = sparse_power_i128(&terms, 12, 80).unwrap();
        let big = sparse_power_big(&terms, 12, 80);
        for (a, b) in small.iter().zip(&big) {
            assert_eq!(BigInt::from(*a), *b);
        }
    }

    #[test]
    fn huge_exponent_falls_back_to_big_integers() {
        let s = eta_expansion(1, 5000, 60).unwrap();
        assert!(s.to_i128().is_none());
        // The coefficient of x^1 in P^e is -e.
        assert_eq!(s.coeffs()[1], BigInt::from(-5000));
    }

    #[test]
    fn fractional_offset_is_reported() {
        let s = eta_expansion(1, 1, 10).unwrap();
        assert!(matches!(s.coeff(1), Err(Error::FractionalExponent(1))));
        let prod = s.mul(&eta_expansion(23, 1, 10).unwrap());
        assert_eq!(prod.integral_offset().unwrap(), 1);
    }
}
