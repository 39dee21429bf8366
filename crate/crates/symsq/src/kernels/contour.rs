//! Vertical-line integral transforms: the approximate-functional-equation
//! weight `V` and the dual Voronoi kernels `Phi_alpha`, `W_alpha`.
//!
//! Every kernel has the shape
//!
//! ```text
//! K(x) = (1/2 pi i) int_{(sigma)} x^{-s} F(s) ds = (1/2 pi) int x^{-sigma - i t} F(sigma + i t) dt
//! ```
//!
//! and is evaluated with the uniform trapezoid rule in `t`, which converges
//! geometrically for these analytic, rapidly decaying integrands.

use super::bump::{is_analytic, mellin_progression_deformed, CompactWeight, MellinSampler, DEFORM_ABOVE};
use super::gamma::ln_gamma;
use crate::error::{Error, Result};
use crate::numeric::ComplexSum;
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::f64::consts::{LN_2, TAU};
use std::sync::Arc;

const LN_PI: f64 = 1.144_729_885_849_400_2;

/// Trapezoid rule on the line `Re s = sigma`: node spacing `h`, nodes in `|t| <= t_max`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct QuadratureRule {
    pub sigma: f64,
    pub h: f64,
    pub t_max: f64,
}

impl Default for QuadratureRule {
    fn default() -> Self {
        Self { sigma: 0.75, h: 0.05, t_max: 60.0 }
    }
}

impl QuadratureRule {
    pub fn refined(&self) -> Self {
        Self { sigma: self.sigma, h: self.h / 2.0, t_max: self.t_max * 2.0 }
    }
}

/// `ln[G(1/2+s)/G(1/2)]` for `G(s) = pi^{-3s} Gamma(s+2k-3/2) Gamma(s+k-1/2) Gamma(s+1/2)`.
pub fn ln_afe_gamma_ratio(s: Complex64, k: u32) -> Result<Complex64> {
    let kf = k as f64;
    let one = Complex64::new(1.0, 0.0);
    Ok(-3.0 * LN_PI * s
        + ln_gamma(s + (2.0 * kf - 1.0))?
        + ln_gamma(s + kf)?
        + ln_gamma(s + 1.0)?
        - ln_gamma(one * (2.0 * kf - 1.0))?
        - ln_gamma(one * kf)?)
}

fn check_alpha(alpha: i32) -> Result<()> {
    if alpha == 1 || alpha == -1 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("alpha must be +1 or -1, got {alpha}")))
    }
}

/// `ln H_alpha(s)` up to the `2^{-s-1} pi^{-3s/2-1/2} b2^s` factor, i.e. the
/// two gamma factors `Gamma((s + 1 - (1+alpha)/2)/2) Gamma(s + k - 1)`.
fn ln_h_gammas(s: Complex64, k: u32, alpha: i32) -> Result<Complex64> {
    let shift = 1.0 - (1.0 + alpha as f64) / 2.0;
    Ok(ln_gamma((s + shift) / 2.0)? + ln_gamma(s + (k as f64 - 1.0))?)
}

/// `H_alpha(1-s)/H_alpha(s)` with
/// `H_alpha(s) = Gamma((s+1-(1+alpha)/2)/2) Gamma(s+k-1) 2^{-s-1} pi^{-3s/2-1/2} b2^s`,
/// computed in log space. A pole of the numerator is an error; a pole of
/// the denominator gives 0.
pub fn kernel_h_ratio(s: Complex64, k: u32, alpha: i32, b2: u64) -> Result<Complex64> {
    check_alpha(alpha)?;
    if b2 == 0 {
        return Err(Error::InvalidArgument("b2 must be positive".into()));
    }
    let one = Complex64::new(1.0, 0.0);
    let num = match ln_h_gammas(one - s, k, alpha) {
        Ok(v) => v,
        Err(_) => {
            return Err(Error::Pole { function: "H_alpha(1-s)", at: format!("{s}") });
        }
    };
    let den = match ln_h_gammas(s, k, alpha) {
        Ok(v) => v,
        Err(_) => return Ok(Complex64::new(0.0, 0.0)),
    };
    let scale = (2.0 * s - 1.0) * LN_2 + (3.0 * s - 1.5) * LN_PI + (1.0 - 2.0 * s) * (b2 as f64).ln();
    Ok((num - den + scale).exp())
}

/// Which transform a [`ContourKernel`] realizes.
#[derive(Clone)]
pub enum KernelKind {
    /// `V(x) = (1/2 pi i) int x^{-s} G(1/2+s)/G(1/2) ds/s` for a weight-`k` form.
    V { k: u32 },
    /// Dual Voronoi kernel
    /// `(1/2 pi i) int x^{-s} [H_alpha(1+s)/H_alpha(-s)] w~(-s) ds`
    /// of a compact weight `w`, with the `b2^s` factor of `H_alpha`.
    /// With `b2 = 1` and `w` the test function this is `Phi_alpha`.
    Dual { k: u32, alpha: i32, b2: u64, weight: Arc<dyn CompactWeight> },
}

impl std::fmt::Debug for KernelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            KernelKind::V { k } => write!(f, "V(k={k})"),
            KernelKind::Dual { k, alpha, b2, weight } => {
                write!(f, "Dual(k={k}, alpha={alpha}, b2={b2}, support={:?})", weight.support())
            }
        }
    }
}

impl KernelKind {
    /// Integrand `F(s)` without the `x^{-s}` factor, at a single point.
    fn integrand(&self, s: Complex64, mellin: impl FnOnce() -> Complex64) -> Result<Complex64> {
        match self {
            KernelKind::V { k } => Ok(ln_afe_gamma_ratio(s, *k)?.exp() / s),
            KernelKind::Dual { k, alpha, b2, .. } => Ok(kernel_h_ratio(-s, *k, *alpha, *b2)? * mellin()),
        }
    }

    /// `ln |F(sigma + i t)|` with the Mellin factor bounded by its trivial
    /// majorant, for choosing truncation heights.
    fn ln_gamma_part_abs(&self, s: Complex64) -> f64 {
        match self {
            KernelKind::V { k } => ln_afe_gamma_ratio(s, *k).map(|l| l.re).unwrap_or(f64::NEG_INFINITY) - s.norm().ln(),
            KernelKind::Dual { k, alpha, b2, .. } => kernel_h_ratio(-s, *k, *alpha, *b2)
                .map(|z| z.norm().ln())
                .unwrap_or(f64::NEG_INFINITY),
        }
    }
}

/// A vertical-line transform with its trapezoid nodes and weights fixed at
/// construction. Evaluation only reads the cached weights.
#[derive(Clone, Debug)]
pub struct ContourKernel {
    kind: KernelKind,
    rule: QuadratureRule,
    /// `t_0`, the lowest node height; nodes are `t_0 + j h`.
    t0: f64,
    /// `(h / 2 pi) F(sigma + i t_j)`.
    weights: Vec<Complex64>,
}

/// Agreement of a kernel value under refinement or a change of abscissa.
#[derive(Clone, Copy, Debug, serde::Serialize)]
pub struct KernelCheck {
    pub value: f64,
    pub other: f64,
    pub difference: f64,
}

impl ContourKernel {
    /// Builds the kernel with the given rule. `t_max` is used as given.
    pub fn with_rule(kind: KernelKind, rule: QuadratureRule) -> Result<Self> {
        if !(rule.h > 0.0 && rule.t_max > 0.0) {
            return Err(Error::InvalidArgument("quadrature step and height must be positive".into()));
        }
        let j = (rule.t_max / rule.h).ceil() as usize;
        let n = 2 * j + 1;
        let t0 = -(j as f64) * rule.h;
        let mellin: Option<Vec<Complex64>> = match &kind {
            KernelKind::V { .. } => None,
            KernelKind::Dual { weight, .. } => Some(mellin_on_nodes(weight.as_ref(), rule.sigma, t0, rule.h, n)?),
        };
        let c = rule.h / TAU;
        let mut weights = Vec::with_capacity(n);
        for i in 0..n {
            let s = Complex64::new(rule.sigma, t0 + i as f64 * rule.h);
            let m = mellin.as_ref().map(|v| v[i]).unwrap_or_default();
            weights.push(kind.integrand(s, || m)? * c);
        }
        Ok(Self { kind, rule, t0, weights })
    }

    /// Builds the kernel at abscissa `sigma` and step `h`, choosing the
    /// truncation height so that the integrand has decayed below `1e-17`
    /// of its peak.
    pub fn new(kind: KernelKind, sigma: f64, h: f64) -> Result<Self> {
        let t_max = Self::auto_height(&kind, sigma)?;
        Self::with_rule(kind, QuadratureRule { sigma, h, t_max })
    }

    /// Default construction: `sigma = 0.75`, `h = 0.05`.
    pub fn standard(kind: KernelKind) -> Result<Self> {
        let r = QuadratureRule::default();
        Self::new(kind, r.sigma, r.h)
    }

    fn auto_height(kind: &KernelKind, sigma: f64) -> Result<f64> {
        let weight = match kind {
            KernelKind::Dual { weight, .. } => Some(weight.clone()),
            KernelKind::V { .. } => None,
        };
        // Without a cancellation-free estimate of the Mellin factor, scan
        // trapezoid values and stop once they reach the rounding floor.
        let sampler = match &weight {
            Some(w) if w.ln_mellin_abs(sigma, 0.0).is_none() => Some(MellinSampler::new(w.as_ref(), sigma, 2.0e4)),
            _ => None,
        };
        let floor = sampler.as_ref().map(|s| s.eval(0.0).norm() * 1e-16).unwrap_or(0.0);
        let ln_mellin = |t: f64| -> Option<f64> {
            match (&weight, &sampler) {
                (None, _) => Some(0.0),
                (Some(_), Some(s)) => {
                    let m = s.eval(t).norm();
                    if m < floor { None } else { Some(m.ln()) }
                }
                (Some(w), None) => w.ln_mellin_abs(sigma, t),
            }
        };
        let mut peak = f64::NEG_INFINITY;
        let mut t = 0.0;
        let mut last_big = 0.0;
        let limit = 2.0e4;
        let threshold = (1e-17f64).ln();
        while t < limit {
            let v = ln_mellin(t).map(|m| m + kind.ln_gamma_part_abs(Complex64::new(sigma, t)));
            match v {
                Some(v) if v > peak + threshold => {
                    peak = peak.max(v);
                    last_big = t;
                }
                None => break,
                _ => {
                    if t > 1.5 * last_big + 40.0 {
                        break;
                    }
                }
            }
            t += 1.0 + t / 50.0;
        }
        if t >= limit {
            return Err(Error::NoConvergence(format!("{kind:?}: integrand not decaying by |t| = {limit}")));
        }
        Ok(last_big + 10.0)
    }

    pub fn kind(&self) -> &KernelKind {
        &self.kind
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    pub fn node_count(&self) -> usize {
        self.weights.len()
    }

    /// `K(x)` for `x > 0`.
    pub fn eval(&self, x: f64) -> Complex64 {
        assert!(x > 0.0, "kernel argument must be positive");
        let lx = x.ln();
        let step = Complex64::from_polar(1.0, -self.rule.h * lx);
        let mut sum = ComplexSum::new();
        let mut z = Complex64::from_polar(1.0, -self.t0 * lx);
        for (j, w) in self.weights.iter().enumerate() {
            if j % 64 == 0 {
                z = Complex64::from_polar(1.0, -(self.t0 + j as f64 * self.rule.h) * lx);
            }
            sum.add(w * z);
            z *= step;
        }
        sum.value() * (-self.rule.sigma * lx).exp()
    }

    /// Real part of [`Self::eval`]; all kernels built from real weights are real.
    pub fn eval_real(&self, x: f64) -> f64 {
        self.eval(x).re
    }

    /// Same kernel on a different abscissa, for contour-independence checks.
    pub fn at_sigma(&self, sigma: f64) -> Result<Self> {
        let t_max = Self::auto_height(&self.kind, sigma)?.max(self.rule.t_max);
        Self::with_rule(self.kind.clone(), QuadratureRule { sigma, h: self.rule.h, t_max })
    }

    /// Same kernel with `h -> h/2`, `T -> 2T`.
    pub fn refined(&self) -> Result<Self> {
        Self::with_rule(self.kind.clone(), self.rule.refined())
    }

    /// `C_sigma = (1/2 pi) int |F(sigma + i t)| dt`, so that `|K(x)| <= C_sigma x^{-sigma}`.
    pub fn decay_constant(&self, sigma: f64) -> Result<f64> {
        let k = self.at_sigma(sigma)?;
        Ok(crate::numeric::rsum(k.weights.iter().map(|w| w.norm())))
    }

    /// Compares `K(x)` against the refined rule.
    pub fn refinement_check(&self, x: f64) -> Result<KernelCheck> {
        let fine = self.refined()?;
        let a = self.eval_real(x);
        let b = fine.eval_real(x);
        Ok(KernelCheck { value: a, other: b, difference: (a - b).abs() })
    }

    /// Compares `K(x)` against the same kernel on the line `Re s = sigma`.
    pub fn contour_check(&self, x: f64, sigma: f64) -> Result<KernelCheck> {
        let other = self.at_sigma(sigma)?;
        let a = self.eval_real(x);
        let b = other.eval_real(x);
        Ok(KernelCheck { value: a, other: b, difference: (a - b).abs() })
    }

    /// Evaluates `K(x)`, refining until two successive rules agree to `tol`.
    pub fn eval_refined(&self, x: f64, tol: f64) -> Result<(f64, f64)> {
        let mut cur = self.clone();
        let mut v = cur.eval_real(x);
        for _ in 0..4 {
            let next = cur.refined()?;
            let w = next.eval_real(x);
            if (w - v).abs() <= tol {
                return Ok((w, (w - v).abs()));
            }
            cur = next;
            v = w;
        }
        Err(Error::NoConvergence(format!("kernel at x={x} did not settle to {tol:e}")))
    }
}

/// Mellin transform `w~(-sigma - i t_j)` on the nodes `t_j = t0 + j h`:
/// trapezoid sums near the real axis, deformed paths higher up when the
/// weight allows it.
fn mellin_on_nodes(w: &dyn CompactWeight, sigma: f64, t0: f64, h: f64, n: usize) -> Result<Vec<Complex64>> {
    let t_last = t0 + (n as f64 - 1.0) * h;
    let t_abs_max = t0.abs().max(t_last.abs());
    let analytic = is_analytic(w);
    let cut = if analytic { DEFORM_ABOVE.min(t_abs_max) } else { t_abs_max };
    let sampler = MellinSampler::new(w, sigma, cut);
    if !analytic {
        // Trapezoid sums resolve the transform only down to rounding in the
        // weight's mass; below that the values are noise, which the gamma
        // factor would amplify. Such nodes are set to zero.
        let floor = 4.0 * f64::EPSILON * sampler.eval(0.0).norm();
        let mut out = sampler.eval_progression(t0, h, n);
        for (j, m) in out.iter_mut().enumerate() {
            let t = t0 + j as f64 * h;
            let resolved = match w.ln_mellin_abs(sigma, t) {
                Some(l) => l > floor.ln(),
                None => m.norm() > 10.0 * floor,
            };
            if !resolved {
                *m = Complex64::new(0.0, 0.0);
            }
        }
        return Ok(out);
    }
    if cut >= t_abs_max {
        return Ok(sampler.eval_progression(t0, h, n));
    }
    // Nodes are symmetric about t = 0. Sample |t| <= cut directly and fill
    // the rest from blocks of positive heights, each block sharing one
    // deformed path.
    let first = (((cut - t0) / h).floor() as usize + 1).min(n);
    let low = n - first;
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    out[low..first].copy_from_slice(&sampler.eval_progression(t0 + low as f64 * h, h, first - low));
    let mut j = first;
    while j < n {
        let t_start = t0 + j as f64 * h;
        let len = (((0.25 * t_start) / h).ceil() as usize).clamp(1, n - j);
        let block = mellin_progression_deformed(w, sigma, t_start, h, len)?;
        for (i, m) in block.into_iter().enumerate() {
            out[j + i] = m;
            out[n - 1 - (j + i)] = m.conj();
        }
        j += len;
    }
    Ok(out)
}

/// `V(x)` for weight `k` at abscissa `sigma` with the default step.
pub fn kernel_v(x: f64, k: u32, sigma: f64) -> Result<f64> {
    Ok(ContourKernel::new(KernelKind::V { k }, sigma, QuadratureRule::default().h)?.eval_real(x))
}

/// `Phi_alpha(x)` for the test function `phi`.
pub fn kernel_phi<W: CompactWeight + Clone + 'static>(x: f64, phi: &W, k: u32, alpha: i32, sigma: f64) -> Result<f64> {
    kernel_w_dual(x, phi, k, alpha, 1, sigma)
}

/// `W_alpha(x)` for a compact weight `w` and parameter `b2`.
pub fn kernel_w_dual<W: CompactWeight + Clone + 'static>(
    x: f64,
    w: &W,
    k: u32,
    alpha: i32,
    b2: u64,
    sigma: f64,
) -> Result<f64> {
    check_alpha(alpha)?;
    let kind = KernelKind::Dual { k, alpha, b2, weight: Arc::new(w.clone()) };
    Ok(ContourKernel::new(kind, sigma, QuadratureRule::default().h)?.eval_real(x))
}

/// A kernel tabulated on a uniform grid in `v = ln x` by one FFT of the
/// trapezoid weights, then read back by 8-point Lagrange interpolation.
/// Intended for dual sums with millions of terms.
///
/// At `x < 1` the sum at a positive abscissa cancels down by `x^sigma`, so
/// [`Self::split`] tabulates that side from the abscissa `-1/2` instead.
pub struct LogGridKernel {
    sigma: f64,
    v0: f64,
    dv: f64,
    /// `g(v) = e^{sigma v} K(e^v)` on the grid.
    g: Vec<Complex64>,
    below_one: Option<Box<LogGridKernel>>,
}

const LOW_SIGMA: f64 = -0.5;

const INTERP_POINTS: usize = 8;

impl LogGridKernel {
    /// Tabulates `kernel` on `v in [v_min, v_min + 2 pi / h)` with the grid
    /// `oversample` times finer than the band limit requires.
    pub fn new(kernel: &ContourKernel, v_min: f64, oversample: usize) -> Self {
        let n = kernel.weights.len();
        let len = (oversample.max(2) * n).next_power_of_two();
        let h = kernel.rule.h;
        let dv = TAU / (len as f64 * h);
        let mut buf = vec![Complex64::new(0.0, 0.0); len];
        for (j, w) in kernel.weights.iter().enumerate() {
            let t = kernel.t0 + j as f64 * h;
            buf[j] = w * Complex64::from_polar(1.0, -t * v_min);
        }
        FftPlanner::<f64>::new().plan_fft_forward(len).process(&mut buf);
        for (m, z) in buf.iter_mut().enumerate() {
            let phase = -kernel.t0 * (m as f64 * dv);
            *z *= Complex64::from_polar(1.0, phase.rem_euclid(TAU));
        }
        Self { sigma: kernel.rule.sigma, v0: v_min, dv, g: buf, below_one: None }
    }

    /// Like [`Self::new`], but for dual kernels with `sigma > -1/2` the
    /// values at `x < 1` come from a second table built at `sigma = -1/2`,
    /// where the weights are pole-free and the sum is well conditioned.
    pub fn split(kernel: &ContourKernel, v_min: f64, oversample: usize) -> Result<Self> {
        let mut high = Self::new(kernel, v_min, oversample);
        if matches!(kernel.kind, KernelKind::Dual { .. }) && kernel.rule.sigma > LOW_SIGMA && v_min < 0.0 {
            let low = kernel.at_sigma(LOW_SIGMA)?;
            high.below_one = Some(Box::new(Self::new(&low, v_min, oversample)));
        }
        Ok(high)
    }

    pub fn v_range(&self) -> (f64, f64) {
        (self.v0, self.v0 + self.dv * (self.g.len() - INTERP_POINTS) as f64)
    }

    /// Interpolated `K(x)`.
    pub fn eval(&self, x: f64) -> Complex64 {
        if let (Some(low), true) = (&self.below_one, x < 1.0) {
            return low.eval(x);
        }
        let v = x.ln();
        let pos = (v - self.v0) / self.dv;
        let base = pos.floor() as isize - (INTERP_POINTS as isize / 2 - 1);
        assert!(
            base >= 0 && (base as usize + INTERP_POINTS) <= self.g.len(),
            "x = {x} outside the tabulated range"
        );
        let frac = pos - base as f64;
        // Lagrange weights for nodes 0..8 at `frac`.
        let mut out = Complex64::new(0.0, 0.0);
        for i in 0..INTERP_POINTS {
            let mut w = 1.0;
            for j in 0..INTERP_POINTS {
                if i != j {
                    w *= (frac - j as f64) / (i as f64 - j as f64);
                }
            }
            out += self.g[base as usize + i] * w;
        }
        out * (-self.sigma * v).exp()
    }

    /// `max |K(x)|` over grid points with `x >= x0`.
    pub fn envelope_beyond(&self, x0: f64) -> f64 {
        let start = (((x0.ln() - self.v0) / self.dv).floor().max(0.0)) as usize;
        let (_, vmax) = self.v_range();
        let end = ((vmax - self.v0) / self.dv) as usize;
        self.g[start.min(end)..end]
            .iter()
            .enumerate()
            .map(|(i, z)| z.norm() * (-self.sigma * (self.v0 + (start + i) as f64 * self.dv)).exp())
            .fold(0.0, f64::max)
    }
}
