//! Compactly supported smooth weights and their Mellin transforms.

use super::quad::integrate;
use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::{LN_2, PI, TAU};

/// A real weight function with compact support `[lo, hi]` inside `(0, inf)`.
pub trait CompactWeight: Send + Sync {
    fn support(&self) -> (f64, f64);
    fn eval(&self, x: f64) -> f64;

    /// Largest frequency (in `u = ln x`) at which the Fourier transform of
    /// `u -> w(e^u)` is still above double-precision noise. Used to size
    /// trapezoid grids.
    fn log_bandwidth(&self) -> f64 {
        2000.0
    }

    /// `w(x_end e^v)` continued to complex `v`, where `x_end` is the chosen
    /// end of the support, if the weight is analytic on the open support.
    /// Measuring from an end keeps full relative accuracy near it. Enables
    /// Mellin evaluation along deformed paths.
    fn eval_near_end(&self, _end: SupportEnd, _v: Complex64) -> Option<Complex64> {
        None
    }

    /// A reliable upper estimate of `ln |w~(-sigma - i t)|`, if one is known
    /// in closed form or can be computed without cancellation.
    fn ln_mellin_abs(&self, _sigma: f64, _t: f64) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SupportEnd {
    Lo,
    Hi,
}

/// `e^z - 1` without cancellation for small `z`.
fn expm1(z: Complex64) -> Complex64 {
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * z.im.cos() - 2.0 * half * half, z.re.exp() * z.im.sin())
}

/// Shape of a bump on `[1, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "profile", rename_all = "snake_case")]
pub enum BumpProfile {
    /// `exp(4 - 1/((x-1)(2-x)))`, maximal (= 1) at `x = 3/2`.
    Standard,
    /// A Gaussian in `ln x` of the given width centred at `x = sqrt 2`,
    /// multiplied by a smooth step of length `ramp * ln 2` at each end. The
    /// Gaussian is already below `1e-16` where the steps act, so the Mellin
    /// transform decays like `exp(-width^2 t^2 / 2)` down to rounding level.
    GaussianTaper { width: f64, ramp: f64 },
}

impl BumpProfile {
    /// The tapered Gaussian used by the Voronoi and functional-equation checks.
    pub const fn narrow() -> Self {
        BumpProfile::GaussianTaper { width: 0.036, ramp: 0.05 }
    }
}

/// `exp(-1/t)` glue: a `C^inf` step from 0 (`t <= 0`) to 1 (`t >= 1`).
fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        let a = (-1.0 / t).exp();
        let b = (-1.0 / (1.0 - t)).exp();
        a / (a + b)
    }
}

/// A smooth bump supported on `[a, 2a]` with maximum 1.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmoothBump {
    pub a: f64,
    pub profile: BumpProfile,
}

impl SmoothBump {
    pub fn new(a: f64, profile: BumpProfile) -> Result<Self> {
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::InvalidArgument(format!("bump start must be positive, got {a}")));
        }
        if let BumpProfile::GaussianTaper { width, ramp } = profile {
            if !(width > 0.0 && ramp > 0.0 && ramp < 0.5) {
                return Err(Error::InvalidArgument("bad taper parameters".into()));
            }
        }
        Ok(Self { a, profile })
    }

    pub fn standard(a: f64) -> Self {
        Self { a, profile: BumpProfile::Standard }
    }

    pub fn narrow(a: f64) -> Self {
        Self { a, profile: BumpProfile::narrow() }
    }

    /// Value of the profile at `y = x/a` in `[1, 2]`.
    fn unit(&self, y: f64) -> f64 {
        if y <= 1.0 || y >= 2.0 {
            return 0.0;
        }
        match self.profile {
            BumpProfile::Standard => (4.0 - 1.0 / ((y - 1.0) * (2.0 - y))).exp(),
            BumpProfile::GaussianTaper { width, ramp } => {
                let u = y.ln();
                let d = u - 0.5 * LN_2;
                let r = ramp * LN_2;
                (-d * d / (2.0 * width * width)).exp() * smooth_step(u / r) * smooth_step((LN_2 - u) / r)
            }
        }
    }

    /// First derivative `phi'(x)`.
    pub fn derivative(&self, x: f64) -> f64 {
        let y = x / self.a;
        if y <= 1.0 || y >= 2.0 {
            return 0.0;
        }
        match self.profile {
            BumpProfile::Standard => {
                let g = (y - 1.0) * (2.0 - y);
                self.unit(y) * (3.0 - 2.0 * y) / (g * g) / self.a
            }
            BumpProfile::GaussianTaper { .. } => {
                let h = 1e-6 * y;
                (self.unit(y + h) - self.unit(y - h)) / (2.0 * h) / self.a
            }
        }
    }

    /// The same profile moved to `[a*c, 2*a*c]`.
    pub fn scaled(&self, c: f64) -> Self {
        Self { a: self.a * c, profile: self.profile }
    }
}

impl CompactWeight for SmoothBump {
    fn support(&self) -> (f64, f64) {
        (self.a, 2.0 * self.a)
    }

    fn eval(&self, x: f64) -> f64 {
        self.unit(x / self.a)
    }

    fn log_bandwidth(&self) -> f64 {
        match self.profile {
            BumpProfile::Standard => 2500.0,
            BumpProfile::GaussianTaper { width, .. } => (12.0 / width).max(400.0),
        }
    }

    fn eval_near_end(&self, end: SupportEnd, v: Complex64) -> Option<Complex64> {
        match self.profile {
            BumpProfile::Standard => {
                let m = expm1(v);
                // y = x / a; the factors y - 1 and 2 - y.
                let (left, right) = match end {
                    SupportEnd::Lo => (m, 1.0 - m),
                    SupportEnd::Hi => (1.0 + 2.0 * m, -2.0 * m),
                };
                let z = (4.0 - 1.0 / (left * right)).exp();
                Some(if z.is_finite() { z } else { Complex64::new(0.0, 0.0) })
            }
            BumpProfile::GaussianTaper { .. } => None,
        }
    }

    fn ln_mellin_abs(&self, sigma: f64, t: f64) -> Option<f64> {
        match self.profile {
            BumpProfile::Standard => {
                let m = mellin_transform(self, sigma, t).ok()?;
                Some(m.norm().ln())
            }
            BumpProfile::GaussianTaper { width, .. } => {
                // Mellin transform of the untapered Gaussian in ln x.
                let mu = (self.a * 2f64.sqrt()).ln();
                Some((TAU.sqrt() * width).ln() - sigma * mu + 0.5 * width * width * (sigma * sigma - t * t))
            }
        }
    }
}

/// A caller-supplied function restricted to `[lo, hi]`.
pub struct FnWeight<F: Fn(f64) -> f64 + Send + Sync> {
    pub lo: f64,
    pub hi: f64,
    pub f: F,
}

impl<F: Fn(f64) -> f64 + Send + Sync> CompactWeight for FnWeight<F> {
    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn eval(&self, x: f64) -> f64 {
        if x <= self.lo || x >= self.hi {
            0.0
        } else {
            (self.f)(x)
        }
    }
}

/// Mellin transform `int_0^inf w(x) x^{s-1} dx` by adaptive Gauss-Kronrod
/// in `u = ln x`, to absolute tolerance `tol` relative to `int w(x) x^{Re s - 1}`.
pub fn mellin<W: CompactWeight + ?Sized>(w: &W, s: Complex64, tol: f64) -> Result<Complex64> {
    let (lo, hi) = w.support();
    let (ulo, uhi) = (lo.ln(), hi.ln());
    let f = |u: f64| w.eval(u.exp()) * (s * u).exp();
    // Split into panels so oscillation at large |Im s| is resolved from the start.
    let panels = (((uhi - ulo) * s.im.abs() / PI).ceil() as usize).clamp(1, 10_000);
    let scale = (s.re * ulo).exp().max((s.re * uhi).exp()) * (uhi - ulo);
    let tol = tol.max(1e-16);
    let mut total = crate::numeric::ComplexSum::new();
    let width = (uhi - ulo) / panels as f64;
    for p in 0..panels {
        let a = ulo + p as f64 * width;
        let r = integrate(f, a, a + width, tol * scale / panels as f64)?;
        total.add(r.value);
    }
    Ok(total.value())
}

/// Whether `w` supplies a complex continuation for deformed Mellin paths.
pub fn is_analytic<W: CompactWeight + ?Sized>(w: &W) -> bool {
    w.eval_near_end(SupportEnd::Lo, Complex64::new(0.1, 0.0)).is_some()
}

/// One straight piece of a deformed Mellin path, `u = anchor + v` for `v`
/// from `a` to `b`. The weight is evaluated relative to the support end
/// `end`, whose log is `anchor`, and the phase `t u` is split the same way,
/// so the integrand keeps its relative accuracy although `t u` is large.
struct Segment {
    end: SupportEnd,
    anchor: f64,
    a: Complex64,
    b: Complex64,
}

/// Saddle-point offsets `(c_lo, c_hi)` from the two ends and the depth of
/// the horizontal run between them.
fn path_scales(t: f64) -> (f64, f64, f64) {
    let depth = ((t.sqrt() + 45.0) / t).min(0.5);
    (1.0 / (2.0 * t).sqrt(), 1.0 / (2.0 * t.sqrt()), depth)
}

fn path_fits(ulo: f64, uhi: f64, t: f64) -> bool {
    let (c0, c1, depth) = path_scales(t);
    2.0 * (c0 + c1) < uhi - ulo && depth > c0.max(c1)
}

/// The path from `ln lo` to `ln hi` in `Im u <= 0`, where `e^{-i t u}`
/// decays: through the saddle point near each end, straight down to depth
/// `D`, and across. Returns the four end segments and the horizontal run.
/// The run carries the factor `e^{-t D}` with `D` chosen so that it sits
/// about `e^{-45}` below the saddle contributions.
fn deformed_path(ulo: f64, uhi: f64, t: f64) -> ([Segment; 4], Segment) {
    let (c0, c1, depth) = path_scales(t);
    let len = uhi - ulo;
    let i = Complex64::i();
    let zero = Complex64::new(0.0, 0.0);
    let p1 = c0 - i * c0;
    let p2 = c0 - i * depth;
    let q2 = -c1 - i * depth;
    let q1 = -c1 - i * c1;
    let (lo, hi) = (SupportEnd::Lo, SupportEnd::Hi);
    (
        [
            Segment { end: lo, anchor: ulo, a: zero, b: p1 },
            Segment { end: lo, anchor: ulo, a: p1, b: p2 },
            Segment { end: hi, anchor: uhi, a: q2, b: q1 },
            Segment { end: hi, anchor: uhi, a: q1, b: zero },
        ],
        Segment { end: hi, anchor: uhi, a: p2 - len, b: q2 },
    )
}

/// Upper bound for the horizontal run's contribution, from samples of the
/// weight along it (the weight is smooth and slowly varying there).
fn run_bound<W: CompactWeight + ?Sized>(w: &W, seg: &Segment, sigma: f64, t: f64) -> f64 {
    let d = seg.b - seg.a;
    let peak = (0..=64)
        .map(|j| {
            let v = seg.a + d * (j as f64 / 64.0);
            let s = Complex64::new(-sigma, -t);
            (w.eval_near_end(seg.end, v).unwrap_or_default() * (s * (v + seg.anchor)).exp()).norm()
        })
        .fold(0.0, f64::max);
    2.0 * peak * d.norm()
}

const PANEL_ORDER: usize = 16;

/// `w~(-sigma - i t_j)` for `t_j = t0 + j dt`, `j = 0..n`, all on the path
/// chosen for `t0 >= DEFORM_ABOVE` with fixed composite Gauss-Legendre
/// panels, so the whole progression costs one pass over the nodes per
/// `t_j`. Panels are sized for the largest `t_j`. Requires an analytic
/// weight. The horizontal run is included only when its bound is not
/// negligible.
pub fn mellin_progression_deformed<W: CompactWeight + ?Sized>(
    w: &W,
    sigma: f64,
    t0: f64,
    dt: f64,
    n: usize,
) -> Result<Vec<Complex64>> {
    let (lo, hi) = w.support();
    let (ulo, uhi) = (lo.ln(), hi.ln());
    if !is_analytic(w) || t0 < DEFORM_ABOVE || !path_fits(ulo, uhi, t0) || dt < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "deformed Mellin progression needs an analytic weight and t0 >= {DEFORM_ABOVE}"
        )));
    }
    let t_top = t0 + dt * n.saturating_sub(1) as f64;
    let rule = super::quad::gauss_legendre_unit(PANEL_ORDER);
    let (ends, run) = deformed_path(ulo, uhi, t0);
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    let add_segment = |out: &mut [Complex64], seg: &Segment, panels: usize| {
        let d = seg.b - seg.a;
        let s0 = Complex64::new(-sigma, -t0);
        let mut nodes = Vec::with_capacity(panels * PANEL_ORDER);
        for p in 0..panels {
            for &(x, wt) in &rule {
                let v = seg.a + d * ((p as f64 + x) / panels as f64);
                let f = w.eval_near_end(seg.end, v).unwrap_or_default();
                if f != Complex64::new(0.0, 0.0) {
                    nodes.push((f * (s0 * v).exp() * d * (wt / panels as f64), v));
                }
            }
        }
        const RESYNC: usize = 64;
        let mut acc = vec![Complex64::new(0.0, 0.0); n];
        for (c, v) in &nodes {
            let ratio = (Complex64::new(0.0, -dt) * v).exp();
            let mut z = *c;
            for (j, a) in acc.iter_mut().enumerate() {
                if j % RESYNC == 0 && j > 0 {
                    z = c * (Complex64::new(0.0, -dt * j as f64) * v).exp();
                }
                *a += z;
                z *= ratio;
            }
        }
        for (j, (o, a)) in out.iter_mut().zip(acc).enumerate() {
            let s = Complex64::new(-sigma, -(t0 + j as f64 * dt));
            *o += a * (s * seg.anchor).exp();
        }
    };
    // At most six radians of phase (or e-folds of decay) per panel, and
    // enough panels to follow the exp(-1/x) shape at the support end.
    let panels_for = |seg: &Segment| ((t_top * (seg.b - seg.a).norm() / 6.0).ceil() as usize).max(8);
    for seg in &ends {
        add_segment(&mut out, seg, panels_for(seg));
    }
    let scale = out.iter().map(|z| z.norm()).fold(f64::INFINITY, f64::min);
    if run_bound(w, &run, sigma, t0) > 1e-18 * scale {
        add_segment(&mut out, &run, panels_for(&run));
    }
    Ok(out)
}

/// Height above which [`mellin_transform`] leaves the real axis.
pub const DEFORM_ABOVE: f64 = 150.0;

/// `w~(-sigma - i t)`, accurate relative to its own size.
///
/// On the real axis the oscillatory integral loses everything below
/// `1e-17` of the weight's mass to cancellation. For weights with an
/// analytic continuation and `|t|` large, the path in `u = ln x` is bent
/// into the half plane where `e^{-i t u}` decays, passing near the saddle
/// points that sit at distance `~ t^{-1/2}` from each end of the support.
pub fn mellin_transform<W: CompactWeight + ?Sized>(w: &W, sigma: f64, t: f64) -> Result<Complex64> {
    if t < 0.0 {
        return Ok(mellin_transform(w, sigma, -t)?.conj());
    }
    let (lo, hi) = w.support();
    let (ulo, uhi) = (lo.ln(), hi.ln());
    if !is_analytic(w) || t < DEFORM_ABOVE || !path_fits(ulo, uhi, t) {
        return mellin(w, Complex64::new(-sigma, -t), 1e-16);
    }
    let (ends, run) = deformed_path(ulo, uhi, t);
    let s = Complex64::new(-sigma, -t);
    let segment = |seg: &Segment, tol: f64| -> Result<Complex64> {
        let d = seg.b - seg.a;
        let f = |x: f64| {
            let v = seg.a + d * x;
            w.eval_near_end(seg.end, v).unwrap_or_default() * (s * v).exp() * d
        };
        Ok(integrate(f, 0.0, 1.0, tol)?.value * (s * seg.anchor).exp())
    };
    let run_small = |scale: f64| run_bound(w, &run, sigma, t) <= 1e-18 * scale;
    let pass = |tol: f64, scale: f64| -> Result<Complex64> {
        let mut total = crate::numeric::ComplexSum::new();
        for seg in &ends {
            total.add(segment(seg, tol)?);
        }
        if !run_small(scale) {
            total.add(segment(&run, tol)?);
        }
        Ok(total.value())
    };
    // Two passes: a coarse one to learn the size of the result, then one at
    // relative tolerance. Rounding in `t u` limits the integrand itself to
    // about `1e-16 t` relative accuracy.
    let coarse = pass(1e-3 * (-(2.0 * t).sqrt()).exp(), 0.0)?;
    pass((1e-15f64).max(1e-16 * t) * coarse.norm(), coarse.norm())
}

/// Samples of `w(e^u) e^{-sigma u}` on a uniform `u`-grid, from which the
/// Mellin transform at `-sigma - i t` follows by trapezoid sums. The
/// integrand vanishes to all orders at both ends, so the rule is spectrally
/// accurate once the grid resolves the frequency `t`.
pub struct MellinSampler {
    u0: f64,
    du: f64,
    samples: Vec<f64>,
}

impl MellinSampler {
    /// Grid fine enough for frequencies up to `t_max`.
    pub fn new<W: CompactWeight + ?Sized>(w: &W, sigma: f64, t_max: f64) -> Self {
        let (lo, hi) = w.support();
        let (ulo, uhi) = (lo.ln(), hi.ln());
        let p = (((uhi - ulo) * (t_max + w.log_bandwidth()) / PI).ceil() as usize + 64).max(256);
        let du = (uhi - ulo) / p as f64;
        let samples = (1..p)
            .map(|j| {
                let u = ulo + j as f64 * du;
                w.eval(u.exp()) * (-sigma * u).exp() * du
            })
            .collect();
        Self { u0: ulo + du, du, samples }
    }

    /// Mellin transform at `s = -sigma - i t` for each `t` in an arithmetic
    /// progression `t_j = t0 + j dt`, `j = 0..n`.
    pub fn eval_progression(&self, t0: f64, dt: f64, n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        // For each sample u_p, the phase e^{-i t_j u_p} advances by e^{-i dt u_p}.
        let mut acc: Vec<(f64, f64)> = vec![(0.0, 0.0); n];
        for (p, &wp) in self.samples.iter().enumerate() {
            if wp == 0.0 {
                continue;
            }
            let u = self.u0 + p as f64 * self.du;
            let step = Complex64::from_polar(1.0, -dt * u);
            let mut z = Complex64::from_polar(wp, -t0 * u);
            for (j, a) in acc.iter_mut().enumerate() {
                if j % 128 == 0 && j > 0 {
                    z = Complex64::from_polar(wp, -(t0 + j as f64 * dt) * u);
                }
                a.0 += z.re;
                a.1 += z.im;
                z *= step;
            }
        }
        for (o, a) in out.iter_mut().zip(acc) {
            *o = Complex64::new(a.0, a.1);
        }
        out
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.eval_progression(t, 0.0, 1)[0]
    }
}
