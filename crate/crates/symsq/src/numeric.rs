//! Small floating-point helpers shared across modules: compensated
//! summation and exact-phase roots of unity.

use num_complex::Complex64;
use std::f64::consts::TAU;

/// Neumaier's variant of Kahan summation.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut s = Self::new();
        for x in iter {
            s.add(x);
        }
        s
    }
}

/// Compensated sum of complex numbers, componentwise.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: CompensatedSum,
    im: CompensatedSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, z: Complex64) {
        self.re.add(z.re);
        self.im.add(z.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

impl FromIterator<Complex64> for ComplexSum {
    fn from_iter<I: IntoIterator<Item = Complex64>>(iter: I) -> Self {
        let mut s = Self::new();
        for z in iter {
            s.add(z);
        }
        s
    }
}

pub fn csum<I: IntoIterator<Item = Complex64>>(iter: I) -> Complex64 {
    iter.into_iter().collect::<ComplexSum>().value()
}

pub fn rsum<I: IntoIterator<Item = f64>>(iter: I) -> f64 {
    iter.into_iter().collect::<CompensatedSum>().value()
}

/// `e(num/den) = exp(2 pi i num/den)`, with the phase reduced exactly in
/// integers first so large numerators cost no accuracy.
pub fn e_frac(num: i128, den: u64) -> Complex64 {
    assert!(den > 0);
    let d = den as i128;
    let mut r = num.rem_euclid(d);
    if 2 * r > d {
        r -= d;
    }
    let (s, c) = (TAU * (r as f64 / den as f64)).sin_cos();
    Complex64::new(c, s)
}

/// `e(x) = exp(2 pi i x)` for a real phase.
pub fn e(x: f64) -> Complex64 {
    let r = x - x.round();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

/// Table of `e(j/m)` for `j = 0..m`.
pub fn roots_of_unity(m: u64) -> Vec<Complex64> {
    (0..m).map(|j| e_frac(j as i128, m)).collect()
}

/// `i^k` for an integer `k`.
pub fn i_pow(k: i64) -> Complex64 {
    match k.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Relative residual `|a - b| / max(|a|, |b|, floor)`.
pub fn rel_residual(a: Complex64, b: Complex64, floor: f64) -> f64 {
    (a - b).norm() / a.norm().max(b.norm()).max(floor)
}

/// `f(0), ..., f(n - 1)` evaluated on all available cores, returned in
/// index order. Callers reduce the results sequentially, so the outcome
/// does not depend on the thread count.
pub fn block_map<T: Send, F: Fn(usize) -> T + Sync>(n: usize, f: F) -> Vec<T> {
    let threads = std::thread::available_parallelism().map(|t| t.get()).unwrap_or(1).min(n.max(1));
    if threads <= 1 {
        return (0..n).map(&f).collect();
    }
    let next = std::sync::atomic::AtomicUsize::new(0);
    let mut slots: Vec<Option<T>> = (0..n).map(|_| None).collect();
    let results = std::sync::Mutex::new(&mut slots);
    std::thread::scope(|scope| {
        for _ in 0..threads {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                results.lock().expect("no panics while holding the lock")[i] = Some(v);
            });
        }
    });
    slots.into_iter().map(|v| v.expect("every block ran")).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compensated_sum_recovers_cancelled_terms() {
        let xs = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(rsum(xs), 2.0);
        let naive: f64 = xs.iter().sum();
        assert_ne!(naive, 2.0);
    }

    #[test]
    fn e_frac_is_exact_on_quarters() {
        let z = e_frac(1, 4);
        assert!((z - Complex64::new(0.0, 1.0)).norm() < 1e-16);
        let w = e_frac(-3 + 4 * 1_000_000_000_007, 4);
        assert!((w - Complex64::new(0.0, 1.0)).norm() < 1e-16);
    }

    #[test]
    fn i_pow_cycles() {
        assert_eq!(i_pow(2), Complex64::new(-1.0, 0.0));
        assert_eq!(i_pow(-1), Complex64::new(0.0, -1.0));
        assert_eq!(i_pow(5), Complex64::new(0.0, 1.0));
    }
}
