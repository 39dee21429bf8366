//! Adaptive Gauss-Kronrod (7/15) quadrature for complex-valued integrands.

use crate::error::{Error, Result};
use crate::numeric::ComplexSum;
use num_complex::Complex64;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Result of an adaptive integration.
#[derive(Clone, Copy, Debug)]
pub struct Integral {
    pub value: Complex64,
    pub error: f64,
}

/// One Gauss-Kronrod panel: value, error estimate, and `int |f|` (the
/// scale of unavoidable rounding error).
fn gk15<F: Fn(f64) -> Complex64>(f: &F, a: f64, b: f64) -> (Complex64, f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut abs = fc.norm() * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let (l, r) = (f(c - dx), f(c + dx));
        let s = l + r;
        kron += s * WGK[j];
        abs += (l.norm() + r.norm()) * WGK[j];
        if j % 2 == 1 {
            gauss += s * WG[j / 2];
        }
    }
    (kron * h, ((kron - gauss) * h).norm(), abs * h.abs())
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol` by bisecting the
/// interval with the largest Kronrod error estimate. A tolerance below the
/// rounding floor (`100 eps int |f|`) is treated as met at that floor.
pub fn integrate<F: Fn(f64) -> Complex64>(f: F, a: f64, b: f64, tol: f64) -> Result<Integral> {
    const MAX_INTERVALS: usize = 4000;
    let (v, e, abs) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e, abs)];
    loop {
        let total_err: f64 = pieces.iter().map(|p| p.3).sum();
        let floor: f64 = 100.0 * f64::EPSILON * pieces.iter().map(|p| p.4).sum::<f64>();
        if total_err <= tol.max(floor) {
            break;
        }
        if pieces.len() >= MAX_INTERVALS {
            return Err(Error::NoConvergence(format!(
                "adaptive quadrature on [{a}, {b}] stalled at error {total_err:e}"
            )));
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1, a1) = gk15(&f, lo, mid);
        let (v2, e2, a2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1, a1));
        pieces.push((mid, hi, v2, e2, a2));
    }
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut sum = ComplexSum::new();
    for p in &pieces {
        sum.add(p.2);
    }
    Ok(Integral { value: sum.value(), error: pieces.iter().map(|p| p.3).sum() })
}

/// Gauss-Legendre nodes and weights on `[0, 1]`, by Newton iteration on
/// `P_n` from the Chebyshev-like initial guesses.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
            let dx = p1 / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        out.push((0.5 * (1.0 - x), 0.5 * w));
    }
    out
}
