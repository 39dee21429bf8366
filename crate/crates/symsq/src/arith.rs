//! Modular arithmetic, Dirichlet characters and the exponential sums
//! (Kloosterman, Gauss, twisted character averages) used by the Voronoi
//! and trace-formula checks.

use crate::error::{Error, Result};
use crate::numeric::{csum, e_frac, rsum};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::sync::Arc;

pub fn gcd(a: u64, b: u64) -> u64 {
    num_integer::gcd(a, b)
}

/// `a^e mod m` with a 128-bit intermediate product.
pub fn pow_mod(a: u64, mut e: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
    let mut base = (a % m) as u128;
    let mut acc: u128 = 1;
    let m = m as u128;
    while e > 0 {
        if e & 1 == 1 {
            acc = acc * base % m;
        }
        base = base * base % m;
        e >>= 1;
    }
    acc as u64
}

/// Inverse of `a` modulo `m`, if it exists.
pub fn inv_mod(a: i64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let ext = num_integer::Integer::extended_gcd(&(a.rem_euclid(m as i64)), &(m as i64));
    if ext.gcd != 1 {
        return None;
    }
    Some(ext.x.rem_euclid(m as i64) as u64)
}

/// Deterministic Miller-Rabin for all 64-bit inputs.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for p in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        if n % p == 0 {
            return n == p;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d % 2 == 0 {
        d /= 2;
        s += 1;
    }
    'witness: for a in [2u64, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = ((x as u128 * x as u128) % n as u128) as u64;
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// Prime factorization by trial division, as `(p, e)` pairs in increasing order.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

pub fn divisors(n: u64) -> Vec<u64> {
    let mut ds = vec![1u64];
    for (p, e) in factorize(n) {
        let len = ds.len();
        let mut pk = 1;
        for _ in 0..e {
            pk *= p;
            for i in 0..len {
                ds.push(ds[i] * pk);
            }
        }
    }
    ds.sort_unstable();
    ds
}

pub fn mobius(n: u64) -> i64 {
    let f = factorize(n);
    if f.iter().any(|&(_, e)| e > 1) {
        0
    } else if f.len() % 2 == 0 {
        1
    } else {
        -1
    }
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

pub fn num_divisors(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| e as u64 + 1).product()
}

/// Smallest positive primitive root modulo a prime `p`.
pub fn primitive_root(p: u64) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::InvalidArgument(format!("{p} is not prime")));
    }
    if p == 2 {
        return Ok(1);
    }
    let fs = factorize(p - 1);
    (2..p)
        .find(|&g| fs.iter().all(|&(r, _)| pow_mod(g, (p - 1) / r, p) != 1))
        .ok_or_else(|| Error::InvalidArgument(format!("no primitive root mod {p}")))
}

/// A residue class `value mod modulus` with `value` reduced into `[0, modulus)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Residue {
    value: u64,
    modulus: u64,
}

impl Residue {
    pub fn new(value: i64, modulus: u64) -> Result<Self> {
        if modulus == 0 {
            return Err(Error::InvalidArgument("modulus must be positive".into()));
        }
        Ok(Self {
            value: value.rem_euclid(modulus as i64) as u64,
            modulus,
        })
    }

    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn is_unit(&self) -> bool {
        gcd(self.value, self.modulus) == 1
    }

    pub fn inverse(&self) -> Result<Self> {
        inv_mod(self.value as i64, self.modulus)
            .map(|v| Self { value: v, modulus: self.modulus })
            .ok_or(Error::NotInvertible { value: self.value as i64, modulus: self.modulus })
    }

    pub fn mul(&self, other: u64) -> Self {
        Self {
            value: ((self.value as u128 * (other % self.modulus) as u128) % self.modulus as u128)
                as u64,
            modulus: self.modulus,
        }
    }

    pub fn neg(&self) -> Self {
        Self { value: (self.modulus - self.value) % self.modulus, modulus: self.modulus }
    }
}

/// One cyclic factor of `(Z/mZ)^*`: the subgroup coming from a prime power,
/// or one of the two factors of `(Z/2^e Z)^*` for `e >= 3`.
#[derive(Debug)]
struct CyclicFactor {
    prime_power: u64,
    order: u64,
    /// `dlog[x mod prime_power]`; `u64::MAX` marks non-units.
    dlog: Vec<u64>,
}

/// The group of Dirichlet characters modulo `m`, realized through
/// discrete-log tables of a CRT decomposition of `(Z/mZ)^*`.
#[derive(Debug)]
pub struct CharacterGroup {
    modulus: u64,
    factors: Vec<CyclicFactor>,
    /// Prime owning each factor, for conductor computations.
    factor_primes: Vec<u64>,
    /// Exponent of the prime power owning each factor.
    factor_exps: Vec<u32>,
    lcm_order: u64,
}

impl CharacterGroup {
    /// Builds the group from a supplied factorization of `m`.
    pub fn with_factorization(m: u64, factorization: &[(u64, u32)]) -> Result<Arc<Self>> {
        let check: u64 = factorization.iter().map(|&(p, e)| p.pow(e)).product();
        if check != m || factorization.iter().any(|&(p, _)| !is_prime(p)) {
            return Err(Error::InvalidArgument(format!("bad factorization of {m}")));
        }
        let mut factors = Vec::new();
        let mut factor_primes = Vec::new();
        let mut factor_exps = Vec::new();
        for &(p, e) in factorization {
            let pe = p.pow(e);
            if p == 2 {
                if e == 1 {
                    continue;
                }
                // -1 generates the first factor; 5 generates the second for e >= 3.
                let mut dlog_sign = vec![u64::MAX; pe as usize];
                let mut dlog_five = vec![u64::MAX; pe as usize];
                let five_order = if e >= 3 { pe / 4 } else { 1 };
                let mut x = 1u64;
                for j in 0..five_order {
                    dlog_sign[x as usize] = 0;
                    dlog_five[x as usize] = j;
                    let y = (pe - x) % pe;
                    dlog_sign[y as usize] = 1;
                    dlog_five[y as usize] = j;
                    x = x * 5 % pe;
                }
                factors.push(CyclicFactor { prime_power: pe, order: 2, dlog: dlog_sign });
                factor_primes.push(2);
                factor_exps.push(e);
                if e >= 3 {
                    factors.push(CyclicFactor { prime_power: pe, order: five_order, dlog: dlog_five });
                    factor_primes.push(2);
                    factor_exps.push(e);
                }
            } else {
                let mut g = primitive_root(p)?;
                if e > 1 && pow_mod(g, p - 1, p * p) == 1 {
                    g += p;
                }
                let order = pe / p * (p - 1);
                let mut dlog = vec![u64::MAX; pe as usize];
                let mut x = 1u64;
                for j in 0..order {
                    dlog[x as usize] = j;
                    x = x * g % pe;
                }
                factors.push(CyclicFactor { prime_power: pe, order, dlog });
                factor_primes.push(p);
                factor_exps.push(e);
            }
        }
        let lcm_order = factors
            .iter()
            .fold(1u64, |acc, f| num_integer::lcm(acc, f.order));
        Ok(Arc::new(Self { modulus: m, factors, factor_primes, factor_exps, lcm_order }))
    }

    /// Builds the group, factoring `m` itself when `m` is prime or below 10^4.
    pub fn new(m: u64) -> Result<Arc<Self>> {
        if m == 0 {
            return Err(Error::InvalidArgument("modulus must be positive".into()));
        }
        if m >= 10_000 && !is_prime(m) {
            return Err(Error::FactorizationUnavailable(m));
        }
        let f = if is_prime(m) { vec![(m, 1)] } else { factorize(m) };
        Self::with_factorization(m, &f)
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn order(&self) -> u64 {
        self.factors.iter().map(|f| f.order).product()
    }

    /// All characters, principal first, in lexicographic order of their
    /// exponent vectors.
    pub fn characters(self: &Arc<Self>) -> Vec<DirichletCharacter> {
        let mut out = Vec::with_capacity(self.order() as usize);
        let mut exps = vec![0u64; self.factors.len()];
        loop {
            out.push(DirichletCharacter::from_exponents(self.clone(), exps.clone()));
            let mut i = self.factors.len();
            loop {
                if i == 0 {
                    return out;
                }
                i -= 1;
                exps[i] += 1;
                if exps[i] < self.factors[i].order {
                    break;
                }
                exps[i] = 0;
            }
        }
    }
}

/// A Dirichlet character, identified by its exponent vector against the
/// generators of its [`CharacterGroup`].
#[derive(Clone, Debug)]
pub struct DirichletCharacter {
    group: Arc<CharacterGroup>,
    exponents: Vec<u64>,
    conductor: u64,
}

impl DirichletCharacter {
    fn from_exponents(group: Arc<CharacterGroup>, exponents: Vec<u64>) -> Self {
        let mut conductor = 1u64;
        let mut i = 0;
        while i < group.factors.len() {
            let p = group.factor_primes[i];
            let e = group.factor_exps[i];
            if p == 2 {
                let sign = exponents[i];
                let (five, five_order) = if e >= 3 {
                    (exponents[i + 1], group.factors[i + 1].order)
                } else {
                    (0, 1)
                };
                if five != 0 {
                    let ord = five_order / gcd(five, five_order);
                    conductor *= 4 * ord;
                } else if sign != 0 {
                    conductor *= 4;
                }
                i += if e >= 3 { 2 } else { 1 };
            } else {
                let order = group.factors[i].order;
                let j = exponents[i];
                if j != 0 {
                    let ord = order / gcd(j, order);
                    let mut f = 1;
                    let mut o = ord;
                    while o % p == 0 {
                        o /= p;
                        f += 1;
                    }
                    conductor *= p.pow(f);
                }
                i += 1;
            }
        }
        Self { group, exponents, conductor }
    }

    /// The principal character modulo `m`.
    pub fn principal(group: Arc<CharacterGroup>) -> Self {
        let n = group.factors.len();
        Self::from_exponents(group, vec![0; n])
    }

    pub fn modulus(&self) -> u64 {
        self.group.modulus
    }

    pub fn conductor(&self) -> u64 {
        self.conductor
    }

    pub fn is_primitive(&self) -> bool {
        self.conductor == self.group.modulus
    }

    pub fn is_principal(&self) -> bool {
        self.exponents.iter().all(|&j| j == 0)
    }

    pub fn exponents(&self) -> &[u64] {
        &self.exponents
    }

    /// Phase numerator of `chi(n)` over the common denominator, or `None`
    /// when `n` is not a unit.
    fn phase(&self, n: i64) -> Option<u64> {
        let g = &self.group;
        let l = g.lcm_order;
        let mut acc = 0u64;
        for (f, &j) in g.factors.iter().zip(&self.exponents) {
            let r = n.rem_euclid(f.prime_power as i64) as usize;
            let d = f.dlog[r];
            if d == u64::MAX {
                return None;
            }
            acc = (acc + (j * d % f.order) * (l / f.order)) % l;
        }
        if g.modulus > 1 && gcd(n.rem_euclid(g.modulus as i64) as u64, g.modulus) != 1 {
            return None;
        }
        Some(acc)
    }

    pub fn eval(&self, n: i64) -> Complex64 {
        match self.phase(n) {
            Some(a) => e_frac(a as i128, self.group.lcm_order),
            None => Complex64::new(0.0, 0.0),
        }
    }

    /// `chi(-1)` as `+1` or `-1`.
    pub fn parity(&self) -> i32 {
        match self.phase(-1) {
            Some(0) => 1,
            _ => -1,
        }
    }

    pub fn conj(&self) -> Self {
        let exponents = self
            .exponents
            .iter()
            .zip(&self.group.factors)
            .map(|(&j, f)| (f.order - j) % f.order)
            .collect();
        Self { group: self.group.clone(), exponents, conductor: self.conductor }
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        if !Arc::ptr_eq(&self.group, &other.group) {
            return Err(Error::InvalidArgument("characters from different groups".into()));
        }
        let exponents = self
            .exponents
            .iter()
            .zip(&other.exponents)
            .zip(&self.group.factors)
            .map(|((&a, &b), f)| (a + b) % f.order)
            .collect();
        Ok(Self::from_exponents(self.group.clone(), exponents))
    }

    /// Value table `chi(0), ..., chi(m-1)`.
    pub fn values(&self) -> Vec<Complex64> {
        (0..self.modulus()).map(|n| self.eval(n as i64)).collect()
    }
}

/// All Dirichlet characters modulo `m`, principal first.
pub fn enumerate_characters(m: u64) -> Result<Vec<DirichletCharacter>> {
    Ok(CharacterGroup::new(m)?.characters())
}

/// Gauss sum `tau(chi) = sum_{a mod m} chi(a) e(a/m)`.
pub fn gauss_sum(chi: &DirichletCharacter) -> Complex64 {
    let m = chi.modulus();
    csum((0..m).map(|a| chi.eval(a as i64) * e_frac(a as i128, m)))
}

/// Kloosterman sum `S(a,b;c)`, summed directly over the units mod `c`.
/// The sum is real; only the real part is accumulated.
pub fn kloosterman(a: i64, b: i64, c: u64) -> f64 {
    if c == 1 {
        return 1.0;
    }
    let ci = c as i128;
    let a = (a as i128).rem_euclid(ci);
    let b = (b as i128).rem_euclid(ci);
    rsum((1..c).filter_map(|x| {
        let xb = inv_mod(x as i64, c)?;
        let num = (a * x as i128 + b * xb as i128) % ci;
        Some(e_frac(num, c).re)
    }))
}

/// Kloosterman sums `S(a, b; c)` for every residue `a mod c` and fixed `b`,
/// from one FFT of `x -> e(b xbar / c)` supported on units.
pub fn kloosterman_row(b: i64, c: u64) -> Vec<f64> {
    if c == 1 {
        return vec![1.0];
    }
    let n = c as usize;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for x in 1..c {
        if let Some(xb) = inv_mod(x as i64, c) {
            buf[x as usize] = e_frac(b as i128 * xb as i128, c);
        }
    }
    let mut planner = FftPlanner::<f64>::new();
    // The inverse transform carries the +2 pi i a x / c kernel.
    planner.plan_fft_inverse(n).process(&mut buf);
    buf.into_iter().map(|z| z.re).collect()
}

/// Kloosterman sums `S(a,1;c)` for every modulus `c` built from a fixed set
/// of prime powers, read off precomputed rows through the twisted
/// multiplicativity `S(a,1;c1 c2) = S(a c2bar^2,1;c1) S(a c1bar^2,1;c2)`.
pub struct KloostermanTable {
    /// Smallest prime factor for every integer up to `max_modulus`.
    spf: Vec<u32>,
    rows: std::collections::HashMap<u64, Vec<f64>>,
}

/// One modulus of a [`KloostermanTable`]: its prime-power rows and the
/// multipliers `(c/p^e)^{-2} mod p^e`.
pub struct KloostermanModulus<'a> {
    c: u64,
    parts: Vec<(u64, u64, &'a [f64])>,
}

impl KloostermanTable {
    /// Rows for every prime power dividing `c q` with `1 <= c <= c_max`.
    pub fn for_level(q: u64, c_max: u64) -> Result<Self> {
        if q == 0 || c_max == 0 {
            return Err(Error::InvalidArgument("level and range must be positive".into()));
        }
        let max_modulus = c_max.checked_mul(q).ok_or_else(|| Error::InvalidArgument("modulus overflow".into()))?;
        let n = max_modulus as usize;
        let mut spf = vec![0u32; n + 1];
        for i in 2..=n {
            if spf[i] == 0 {
                for j in (i..=n).step_by(i) {
                    if spf[j] == 0 {
                        spf[j] = i as u32;
                    }
                }
            }
        }
        let mut powers = Vec::new();
        for p in 2..=n as u64 {
            if spf[p as usize] as u64 != p {
                continue;
            }
            let bound = if p == q { max_modulus } else { c_max };
            let mut pe = p;
            while pe <= bound {
                powers.push(pe);
                pe = match pe.checked_mul(p) {
                    Some(v) => v,
                    None => break,
                };
            }
        }
        let rows = crate::numeric::block_map(powers.len(), |i| kloosterman_row(1, powers[i]));
        Ok(Self { spf, rows: powers.into_iter().zip(rows).collect() })
    }

    pub fn max_modulus(&self) -> u64 {
        (self.spf.len() - 1) as u64
    }

    /// The factorized modulus `c`; fails if `c` needs a row that was not
    /// precomputed.
    pub fn modulus(&self, c: u64) -> Result<KloostermanModulus<'_>> {
        if c == 0 || c > self.max_modulus() {
            return Err(Error::OutOfRange { n: c, len: self.spf.len() - 1 });
        }
        let mut parts = Vec::new();
        let mut rest = c;
        while rest > 1 {
            let p = self.spf[rest as usize] as u64;
            let mut pe = 1;
            while rest % p == 0 {
                rest /= p;
                pe *= p;
            }
            let row = self.rows.get(&pe).ok_or_else(|| Error::OutOfRange { n: c, len: self.spf.len() - 1 })?;
            let cofactor = c / pe;
            let inv = inv_mod(cofactor as i64, pe).expect("coprime cofactor");
            let mult = (inv as u128 * inv as u128 % pe as u128) as u64;
            parts.push((pe, mult, row.as_slice()));
        }
        Ok(KloostermanModulus { c, parts })
    }
}

impl KloostermanModulus<'_> {
    pub fn modulus(&self) -> u64 {
        self.c
    }

    /// `S(a,1;c)`.
    pub fn eval(&self, a: i64) -> f64 {
        let mut v = 1.0;
        for &(pe, mult, row) in &self.parts {
            let r = a.rem_euclid(pe as i64) as u128 * mult as u128 % pe as u128;
            v *= row[r as usize];
        }
        v
    }
}

/// Closed form of `sum_{chi1 != chi0, chi1(-1) = a} chi1(x) tau(chi1) tau(conj chi1)^3`
/// for prime `q` and sign `a = alpha * chi2(-1)`:
///
/// `(q(q-1)/2) (S(-x,1;q) + a S(x,1;q)) - q(1+a)/2` when `q` does not
/// divide `x`, and `0` otherwise.
pub fn twisted_kloosterman_closed(q: u64, x: i64, a: i32) -> Complex64 {
    let qi = q as i64;
    if x.rem_euclid(qi) == 0 {
        return Complex64::new(0.0, 0.0);
    }
    let qf = q as f64;
    let af = a as f64;
    let v = qf * (qf - 1.0) / 2.0 * (kloosterman(-x, 1, q) + af * kloosterman(x, 1, q))
        - qf * (1.0 + af) / 2.0;
    Complex64::new(v, 0.0)
}

/// The same character average by direct enumeration.
pub fn twisted_kloosterman_brute(q: u64, x: i64, a: i32) -> Result<Complex64> {
    let chars = enumerate_characters(q)?;
    Ok(csum(chars.iter().filter(|c| !c.is_principal() && c.parity() == a).map(|c| {
        let t = gauss_sum(c);
        let tb = gauss_sum(&c.conj());
        c.eval(x) * t * tb * tb * tb
    })))
}

/// `sum_{chi1 mod q, chi1 != chi0, chi1 chi2(-1) = alpha} chi1(u n) tau(chi1) tau(conj chi1)^3`
/// for prime `q`, evaluated by the closed form.
pub fn twisted_kloosterman_average(q: u64, u: Residue, alpha: i32, chi2_parity: i32, n: i64) -> Complex64 {
    let x = (u.value() as i128 * n as i128).rem_euclid(q as i128) as i64;
    twisted_kloosterman_closed(q, x, alpha * chi2_parity)
}

/// Parameters of the residual `h`-sum left after the character average.
#[derive(Clone, Copy, Debug)]
pub struct HSumParams {
    pub c: i64,
    pub d1: i64,
    pub a1: i64,
    pub b1: i64,
    pub c2: i64,
    pub n: i64,
    pub sign: i32,
}

/// `|sum*_{h mod q} e(conj(h c)/q) S(+-conj(h d1 a1) b1 c2 n, 1; q)| / q`.
/// Returns 0 when `q | n`, where the character average vanishes.
pub fn h_sum_bound_check(q: u64, p: HSumParams) -> Result<f64> {
    let qi = q as i64;
    if p.n.rem_euclid(qi) == 0 {
        return Ok(0.0);
    }
    let row = kloosterman_row(1, q);
    let mut total = crate::numeric::ComplexSum::new();
    for h in 1..q {
        let hc = inv_mod((h as i64) * p.c, q)
            .ok_or(Error::NotInvertible { value: p.c, modulus: q })?;
        let hda = inv_mod((h as i64) * p.d1 % qi * p.a1 % qi, q)
            .ok_or(Error::NotInvertible { value: p.d1 * p.a1, modulus: q })?;
        let arg = (p.sign as i128 * hda as i128 * p.b1 as i128 * p.c2 as i128 * p.n as i128)
            .rem_euclid(q as i128) as usize;
        total.add(e_frac(hc as i128, q) * row[arg]);
    }
    Ok(total.value().norm() / q as f64)
}
