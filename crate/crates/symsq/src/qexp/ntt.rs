//! Exact integer convolution by number-theoretic transforms modulo up to
//! four NTT-friendly primes, recombined with Garner's algorithm.

/// `(p, primitive root)` with `p - 1` divisible by `2^24` at least.
const PRIMES: [(u64, u64); 4] = [(2_013_265_921, 31), (469_762_049, 3), (167_772_161, 3), (754_974_721, 11)];

/// Half the product of the four primes exceeds `2^115`, so any convolution
/// whose exact coefficients are below `2^115` in absolute value is recovered.
pub const EXACT_BITS: u32 = 115;

/// Bits recoverable with the first `r` primes (symmetric range).
const PREFIX_BITS: [u32; 4] = [29, 58, 86, 115];

fn pow_mod(mut b: u64, mut e: u64, p: u64) -> u64 {
    let mut r = 1;
    b %= p;
    while e > 0 {
        if e & 1 == 1 {
            r = r * b % p;
        }
        b = b * b % p;
        e >>= 1;
    }
    r
}

/// In-place transform; the prime is a constant so reductions compile to
/// multiply-shift sequences.
fn ntt<const P: u64, const G: u64>(a: &mut [u64], invert: bool) {
    let n = a.len();
    let mut j = 0;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            a.swap(i, j);
        }
    }
    let mut roots = Vec::with_capacity(n / 2);
    let mut len = 2;
    while len <= n {
        let mut w = pow_mod(G, (P - 1) / len as u64, P);
        if invert {
            w = pow_mod(w, P - 2, P);
        }
        let half = len / 2;
        roots.clear();
        let mut x = 1;
        for _ in 0..half {
            roots.push(x);
            x = x * w % P;
        }
        for chunk in a.chunks_exact_mut(len) {
            let (lo, hi) = chunk.split_at_mut(half);
            for ((u, v), &r) in lo.iter_mut().zip(hi.iter_mut()).zip(&roots) {
                let t = *v * r % P;
                let s = *u;
                *u = if s + t >= P { s + t - P } else { s + t };
                *v = if s >= t { s - t } else { s + P - t };
            }
        }
        len <<= 1;
    }
    if invert {
        let inv = pow_mod(n as u64, P - 2, P);
        for x in a.iter_mut() {
            *x = *x * inv % P;
        }
    }
}

fn cyclic_product<const P: u64, const G: u64>(a: &[i128], b: &[i128], size: usize) -> Vec<u64> {
    let reduce = |x: i128| x.rem_euclid(P as i128) as u64;
    let mut fa = vec![0u64; size];
    let mut fb = vec![0u64; size];
    for (d, &x) in fa.iter_mut().zip(a) {
        *d = reduce(x);
    }
    for (d, &x) in fb.iter_mut().zip(b) {
        *d = reduce(x);
    }
    ntt::<P, G>(&mut fa, false);
    ntt::<P, G>(&mut fb, false);
    for (x, y) in fa.iter_mut().zip(&fb) {
        *x = *x * y % P;
    }
    ntt::<P, G>(&mut fa, true);
    fa
}

/// The first `len` coefficients of `a * b`, exact provided every true
/// coefficient has absolute value below `2^bits` (`bits <= EXACT_BITS`).
/// Uses only as many primes as `bits` requires.
pub fn convolve_truncated_bits(a: &[i128], b: &[i128], len: usize, bits: u32) -> Vec<i128> {
    assert!(bits <= EXACT_BITS, "convolution needs {bits} bits");
    let la = a.len().min(len);
    let lb = b.len().min(len);
    if la == 0 || lb == 0 {
        return vec![0; len];
    }
    let size = (la + lb - 1).next_power_of_two();
    let (a, b) = (&a[..la], &b[..lb]);
    let r = PREFIX_BITS.iter().position(|&pb| bits <= pb).unwrap() + 1;
    let mut residues: Vec<Vec<u64>> = vec![cyclic_product::<{ PRIMES[0].0 }, { PRIMES[0].1 }>(a, b, size)];
    if r > 1 {
        residues.push(cyclic_product::<{ PRIMES[1].0 }, { PRIMES[1].1 }>(a, b, size));
    }
    if r > 2 {
        residues.push(cyclic_product::<{ PRIMES[2].0 }, { PRIMES[2].1 }>(a, b, size));
    }
    if r > 3 {
        residues.push(cyclic_product::<{ PRIMES[3].0 }, { PRIMES[3].1 }>(a, b, size));
    }
    let g = Garner::new(r);
    (0..len)
        .map(|i| {
            if i < size {
                let mut res = [0u64; 4];
                for (j, v) in residues.iter().enumerate() {
                    res[j] = v[i];
                }
                g.recombine(&res[..r])
            } else {
                0
            }
        })
        .collect()
}

/// [`convolve_truncated_bits`] with the full `EXACT_BITS` range.
pub fn convolve_truncated(a: &[i128], b: &[i128], len: usize) -> Vec<i128> {
    convolve_truncated_bits(a, b, len, EXACT_BITS)
}

/// Mixed-radix recombination `x = c0 + c1 p0 + c2 p0 p1 + c3 p0 p1 p2`.
struct Garner {
    p: Vec<u64>,
    /// `inv[i][j] = p_j^{-1} mod p_i` for `j < i`.
    inv: Vec<Vec<u64>>,
}

impl Garner {
    fn new(r: usize) -> Self {
        let p: Vec<u64> = PRIMES[..r].iter().map(|x| x.0).collect();
        let inv = (0..r).map(|i| (0..i).map(|j| pow_mod(p[j] % p[i], p[i] - 2, p[i])).collect()).collect();
        Self { p, inv }
    }

    /// Symmetric-range integer with the given residues.
    fn recombine(&self, r: &[u64]) -> i128 {
        let p = &self.p;
        let mut c = [0u64; 4];
        for i in 0..p.len() {
            let mut v = r[i] % p[i];
            for j in 0..i {
                v = (v + p[i] - c[j] % p[i]) % p[i] * self.inv[i][j] % p[i];
            }
            c[i] = v;
        }
        let mut x: u128 = 0;
        let mut m: u128 = 1;
        for i in 0..p.len() {
            x += c[i] as u128 * m;
            m *= p[i] as u128;
        }
        if x > m / 2 {
            -((m - x) as i128)
        } else {
            x as i128
        }
    }
}
