//! Bessel functions `J_n(x)` of integer order on `x >= 0`.

use std::f64::consts::PI;

/// Order of magnitude beyond which the Miller recurrence rescales.
const RESCALE: f64 = 1e250;

/// `J_n(x)` for integer `n >= 0` and `x >= 0`, absolute error below `1e-12`
/// for `n <= 50`, `x <= 10^6`.
///
/// Uses the power series for `x <= 5`, Hankel's asymptotic expansion for
/// `x > 25 + n^2/2`, and Miller's normalized downward recurrence between.
/// The series is kept to small arguments: at `x = n + 10` its alternating
/// terms already cost four to five digits.
pub fn bessel_j(n: u32, x: f64) -> f64 {
    assert!(x >= 0.0 && x.is_finite(), "bessel_j needs finite x >= 0");
    if x == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let nf = n as f64;
    if x <= 5.0 {
        series(n, x)
    } else if x > 25.0 + 0.5 * nf * nf {
        hankel(n, x)
    } else {
        miller(n, x)
    }
}

fn series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let nf = n as f64;
    let ln_first = nf * half.ln() - ln_factorial(n);
    let mut term = ln_first.exp();
    let mut sum = term;
    let q = -half * half;
    let mut m = 1.0;
    loop {
        term *= q / (m * (m + nf));
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() && m > half {
            break;
        }
        if term == 0.0 {
            break;
        }
        m += 1.0;
    }
    sum
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

fn hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * (n as f64) * (n as f64);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut prev = f64::INFINITY;
    let mut k: f64 = 1.0;
    loop {
        a *= (mu - (2.0 * k - 1.0).powi(2)) / (k * 8.0 * x);
        let mag = a.abs();
        if mag > prev || mag < 1e-17 {
            break;
        }
        prev = mag;
        // Terms alternate between Q (odd k) and P (even k) with signs
        // +, -, -, +, +, -, ... for k = 1, 2, 3, ...
        let sign = if (k as u64 / 2) % 2 == 0 { 1.0 } else { -1.0 };
        if (k as u64) % 2 == 1 {
            q += sign * a;
        } else {
            p += sign * a;
        }
        k += 1.0;
    }
    let phase = (0.5 * n as f64 + 0.25) * PI;
    let (sx, cx) = x.sin_cos();
    let (sp, cp) = phase.sin_cos();
    let cos_chi = cx * cp + sx * sp;
    let sin_chi = sx * cp - cx * sp;
    (2.0 / (PI * x)).sqrt() * (p * cos_chi - q * sin_chi)
}

fn miller(n: u32, x: f64) -> f64 {
    let start = {
        let s = (x + 30.0 + 10.0 * x.cbrt()).max(n as f64 + 30.0) as u64;
        s + (s % 2)
    };
    let mut jp1 = 0.0;
    let mut j = 1e-300;
    let mut norm = 0.0;
    let mut result = 0.0;
    let mut k = start;
    while k > 0 {
        let jm1 = 2.0 * k as f64 / x * j - jp1;
        jp1 = j;
        j = jm1;
        if j.abs() > RESCALE {
            j /= RESCALE;
            jp1 /= RESCALE;
            norm /= RESCALE;
            result /= RESCALE;
        }
        k -= 1;
        if k % 2 == 0 && k > 0 {
            norm += 2.0 * j;
        }
        if k == n as u64 {
            result = j;
        }
    }
    norm += j;
    if n == 0 {
        result = j;
    }
    result / norm
}
