//! Complex gamma and log-gamma: Lanczos approximation (g = 7, nine terms)
//! on `Re z >= 1/2`, reflection below.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];
const HALF_LN_TAU: f64 = 0.918_938_533_204_672_8;

fn is_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re.fract() == 0.0
}

/// `ln sin(pi z)`, stable for large `|Im z|`. The imaginary part is only
/// determined modulo `2 pi`.
fn ln_sin_pi(z: Complex64) -> Complex64 {
    if z.im.abs() < 15.0 {
        return (PI * z).sin().ln();
    }
    if z.im < 0.0 {
        return ln_sin_pi(z.conj()).conj();
    }
    // sin(pi z) = (i/2) e^{-i pi z} (1 - e^{2 pi i z}), with e^{2 pi i z} tiny.
    let i = Complex64::i();
    let small = (2.0 * PI * i * z).exp();
    -i * PI * z + (Complex64::new(1.0, 0.0) - small).ln() + Complex64::new(0.5f64.ln(), PI / 2.0)
}

fn ln_gamma_right(z: Complex64) -> Complex64 {
    let z1 = z - 1.0;
    let mut x = Complex64::new(LANCZOS[0], 0.0);
    for (i, &c) in LANCZOS.iter().enumerate().skip(1) {
        x += c / (z1 + i as f64);
    }
    let t = z1 + LANCZOS_G + 0.5;
    HALF_LN_TAU + (z1 + 0.5) * t.ln() - t + x.ln()
}

/// `ln Gamma(z)`. The real part is exact to rounding; the imaginary part is
/// only meaningful modulo `2 pi`, which is all that exponentiation needs.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if is_pole(z) {
        return Err(Error::Pole { function: "Gamma", at: format!("{z}") });
    }
    if z.re >= 0.5 {
        Ok(ln_gamma_right(z))
    } else {
        let one = Complex64::new(1.0, 0.0);
        Ok(PI.ln() - ln_sin_pi(z) - ln_gamma_right(one - z))
    }
}

pub fn complex_gamma(z: Complex64) -> Result<Complex64> {
    ln_gamma(z).map(|l| l.exp())
}

/// `1/Gamma(z)`, entire; zero at the poles of Gamma.
pub fn recip_gamma(z: Complex64) -> Complex64 {
    match ln_gamma(z) {
        Ok(l) => (-l).exp(),
        Err(_) => Complex64::new(0.0, 0.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn half_integer_value() {
        let g = complex_gamma(Complex64::new(0.5, 0.0)).unwrap();
        assert!((g.re - PI.sqrt()).abs() < 1e-14 && g.im.abs() < 1e-15);
    }

    #[test]
    fn recurrence_at_a_complex_point() {
        let s = Complex64::new(2.3, 4.1);
        let lhs = complex_gamma(s + 1.0).unwrap();
        let rhs = s * complex_gamma(s).unwrap();
        assert!(rel(lhs, rhs) < 1e-12);
    }

    #[test]
    fn modulus_on_the_critical_line() {
        let t = 3.0;
        let g = complex_gamma(Complex64::new(0.5, t)).unwrap();
        assert!((g.norm() - (PI / (PI * t).cosh()).sqrt()).abs() < 1e-10);
    }

    /// Reference values from a 30-digit arbitrary-precision evaluation.
    #[test]
    fn frozen_reference_values() {
        let cases = [
            ((0.3, 150.0), (-1.415_560_823_584_425_9e-103, -4.083_194_263_695_191_2e-103)),
            ((-2.7, 3.1), (3.236_892_992_877_855_5e-4, 7.605_480_423_332_126e-5)),
            ((14.5, -80.0), (-2.117_049_647_540_104_5e-28, -2.329_566_819_988_461_4e-28)),
            ((0.25, 0.0), (3.625_609_908_221_908_3, 0.0)),
        ];
        for ((x, y), (re, im)) in cases {
            let g = complex_gamma(Complex64::new(x, y)).unwrap();
            assert!(rel(g, Complex64::new(re, im)) < 1e-12, "{x}+{y}i: {g}");
        }
    }

    #[test]
    fn poles_are_reported() {
        assert!(complex_gamma(Complex64::new(0.0, 0.0)).is_err());
        assert!(complex_gamma(Complex64::new(-3.0, 0.0)).is_err());
        assert_eq!(recip_gamma(Complex64::new(-2.0, 0.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn recurrence_and_reflection_on_a_grid() {
        for i in 0..10 {
            for j in 0..10 {
                let s = Complex64::new(-4.95 + 1.1 * i as f64, -190.0 + 42.0 * j as f64);
                let a = ln_gamma(s + 1.0).unwrap();
                let b = ln_gamma(s).unwrap() + s.ln();
                let d = a - b;
                let wrapped = (d.im / (2.0 * PI)).round() * 2.0 * PI;
                assert!(d.re.abs() < 1e-11 && (d.im - wrapped).abs() < 1e-11, "recurrence at {s}");
                // Gamma(s) Gamma(1-s) = pi / sin(pi s)
                let r = ln_gamma(s).unwrap() + ln_gamma(1.0 - s).unwrap() + ln_sin_pi(s) - PI.ln();
                let wrapped = (r.im / (2.0 * PI)).round() * 2.0 * PI;
                assert!(r.re.abs() < 1e-11 && (r.im - wrapped).abs() < 1e-11, "reflection at {s}");
            }
        }
    }
}
