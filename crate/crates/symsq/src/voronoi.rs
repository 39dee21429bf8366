//! Two-sided checks of the additively twisted Voronoi formula for
//! `A(n,1)` at prime level, and of the functional equation of the
//! character twists it is assembled from.
//!
//! With `Phi_alpha` the dual kernels of the test function (see
//! [`crate::kernels::KernelKind::Dual`]), the identity checked is
//!
//! ```text
//! sum_{(n,q)=1} A(n) e(nh/q) phi(n)
//!   = (q/2) sum_{alpha = +-1} i^{(1+alpha)/2} sum_{(n,q)=1} A(n)/n (S(-n hbar,1;q) - alpha S(n hbar,1;q)) Phi_alpha(n/q^3)
//!     - sum_{(n,q)=1} A(n)/(q-1) (phi(n) + (q/n) Phi_{-1}(n/q^3))
//! ```
//!
//! Other sign patterns are available through [`SignConvention`] so that a
//! failing variant can be localized term by term.

use crate::arith::{gauss_sum, gcd, inv_mod, kloosterman, DirichletCharacter, Residue};
use crate::coeffs::Sym2CoeffTable;
use crate::error::{Error, Result};
use crate::kernels::{CompactWeight, ContourKernel, KernelKind, LogGridKernel, QuadratureRule, SmoothBump};
use crate::qexp::{eta_newform, eta_newform_unchecked};
use crate::numeric::{block_map, e_frac, i_pow, CompensatedSum};
use crate::report::VerificationReport;
use num_complex::Complex64;
use serde::Serialize;
use std::sync::Arc;

/// Sign of the `alpha` term inside the Kloosterman factor.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaTerm {
    /// `S(-n hbar,1;q) - alpha S(n hbar,1;q)`.
    Minus,
    /// `S(-n hbar,1;q) + alpha S(n hbar,1;q)`.
    Plus,
}

/// Form of the dual part of the trivial-character correction.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CorrectionTerm {
    /// `(q/n) Phi_{-1}(n/q^3)`.
    RealEven,
    /// `(i q/n) Phi_1(n/q^3)`.
    ImaginaryOdd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct SignConvention {
    pub alpha_term: AlphaTerm,
    pub correction: CorrectionTerm,
}

impl SignConvention {
    /// The convention that the numerics confirm.
    pub const VERIFIED: Self = Self { alpha_term: AlphaTerm::Minus, correction: CorrectionTerm::RealEven };
    /// `+ alpha S(n hbar,1;q)` with the `(iq/n) Phi_1` correction.
    pub const LITERAL: Self = Self { alpha_term: AlphaTerm::Plus, correction: CorrectionTerm::ImaginaryOdd };

    pub fn all() -> [Self; 4] {
        [
            Self::VERIFIED,
            Self { alpha_term: AlphaTerm::Minus, correction: CorrectionTerm::ImaginaryOdd },
            Self { alpha_term: AlphaTerm::Plus, correction: CorrectionTerm::RealEven },
            Self::LITERAL,
        ]
    }

    fn name(&self) -> String {
        let a = match self.alpha_term {
            AlphaTerm::Minus => "minus-alpha",
            AlphaTerm::Plus => "plus-alpha",
        };
        let c = match self.correction {
            CorrectionTerm::RealEven => "q/n*Phi_-1",
            CorrectionTerm::ImaginaryOdd => "iq/n*Phi_1",
        };
        format!("{a}, {c}")
    }
}

/// Abscissas at which kernel decay constants are measured for the dual
/// tail bound. Each gives a valid bound; the smallest is used.
const TAIL_SIGMAS: [f64; 7] = [4.0, 6.0, 8.0, 10.0, 12.0, 14.0, 16.0];

const GRID_OVERSAMPLE: usize = 4;

const BLOCK: usize = 1 << 16;

/// The two dual kernels `Phi_{+1}`, `Phi_{-1}` of a test function at
/// weight `k`, tabulated for `x >= 1/q^3`, with their decay constants.
pub struct VoronoiKernels {
    q: u64,
    k: u32,
    phi: SmoothBump,
    rule: QuadratureRule,
    plus: LogGridKernel,
    minus: LogGridKernel,
    /// `(sigma, C_sigma(Phi_{+1}), C_sigma(Phi_{-1}))`.
    decay: Vec<(f64, f64, f64)>,
}

impl VoronoiKernels {
    pub fn new(q: u64, k: u32, phi: SmoothBump) -> Result<Self> {
        if q < 2 {
            return Err(Error::InvalidArgument(format!("level {q} is not a prime")));
        }
        let v_min = -3.0 * (q as f64).ln() - 1.0;
        let build = |alpha: i32| -> Result<(ContourKernel, LogGridKernel)> {
            let kind = KernelKind::Dual { k, alpha, b2: 1, weight: Arc::new(phi) };
            let kernel = ContourKernel::standard(kind)?;
            let grid = LogGridKernel::split(&kernel, v_min, GRID_OVERSAMPLE)?;
            Ok((kernel, grid))
        };
        let (kp, plus) = build(1)?;
        let (km, minus) = build(-1)?;
        let mut decay = Vec::with_capacity(TAIL_SIGMAS.len());
        for sigma in TAIL_SIGMAS {
            decay.push((sigma, kp.decay_constant(sigma)?, km.decay_constant(sigma)?));
        }
        Ok(Self { q, k, phi, rule: kp.rule(), plus, minus, decay })
    }

    pub fn level(&self) -> u64 {
        self.q
    }

    pub fn weight(&self) -> u32 {
        self.k
    }

    pub fn test_function(&self) -> &SmoothBump {
        &self.phi
    }

    pub fn rule(&self) -> QuadratureRule {
        self.rule
    }

    /// `Phi_alpha(x)`.
    pub fn phi(&self, alpha: i32, x: f64) -> f64 {
        if alpha == 1 { self.plus.eval(x).re } else { self.minus.eval(x).re }
    }

    /// Bound for all dual terms with `n > m`: for each kernel,
    /// `min_sigma amp * C_sigma q^{3 sigma} int_m^inf d3'(t) t^{-1-sigma} dt`,
    /// where `|Phi(x)| <= C_sigma x^{-sigma}`, `|A(n)| <= d_3(n)` and `d3'`
    /// is the density of the mean of `d_3`. The amplitudes cover the
    /// Kloosterman factors (Weil bound) and the correction weight.
    pub fn tail_bound(&self, m: usize) -> f64 {
        let q = self.q as f64;
        let amp_plus = 2.0 * q.powf(1.5);
        let amp_minus = 2.0 * q.powf(1.5) + q / (q - 1.0);
        let best = |pick: &dyn Fn(&(f64, f64, f64)) -> f64, amp: f64| {
            self.decay
                .iter()
                .map(|d| {
                    let sigma = d.0;
                    (amp * pick(d)).ln() + 3.0 * sigma * q.ln() + ln_d3_tail(m as f64, sigma)
                })
                .fold(f64::INFINITY, f64::min)
                .exp()
        };
        best(&|d| d.1, amp_plus) + best(&|d| d.2, amp_minus)
    }

    /// Smallest length (on a 5% geometric grid from `q^3`) whose tail
    /// bound is below `target`.
    pub fn required_length(&self, target: f64) -> Result<usize> {
        let mut m = (self.q * self.q * self.q) as f64;
        while m < 1e10 {
            if self.tail_bound(m as usize) <= target {
                return Ok(m.ceil() as usize);
            }
            m *= 1.05;
        }
        Err(Error::NoConvergence(format!("dual tail bound stays above {target:e}")))
    }
}

/// Longest coefficient table [`builtin_setup`] will build.
pub const MAX_BUILTIN_LENGTH: usize = 20_000_000;

/// Kernels for `phi` and a validated coefficient table for the built-in
/// eta-product newform of level `q`, long enough that every check at
/// `tolerance` (relative to at least 1) stays within it.
pub fn builtin_setup(q: u64, phi: SmoothBump, tolerance: f64) -> Result<(Arc<Sym2CoeffTable>, Arc<VoronoiKernels>)> {
    let k = eta_newform_unchecked(q, 1)?.weight();
    let kernels = VoronoiKernels::new(q, k, phi)?;
    let m = kernels.required_length(0.1 * tolerance)?.max(phi.support().1.ceil() as usize);
    if m > MAX_BUILTIN_LENGTH {
        return Err(Error::TruncationTooShort { required: m, available: MAX_BUILTIN_LENGTH });
    }
    let f = eta_newform(q, m)?;
    Ok((Arc::new(Sym2CoeffTable::new(&f)), Arc::new(kernels)))
}

/// `ln int_m^inf (L^2/2 + 1.74 L + 0.8) t^{-1-sigma} dt`, `L = ln t`; the
/// integrand is the derivative of `t P(ln t)` with `P` the main term of
/// `sum_{n <= t} d_3(n)`.
fn ln_d3_tail(m: f64, sigma: f64) -> f64 {
    let l = m.ln();
    let i0 = 1.0 / sigma;
    let i1 = l / sigma + 1.0 / (sigma * sigma);
    let i2 = l * l / sigma + 2.0 * l / (sigma * sigma) + 2.0 / (sigma * sigma * sigma);
    -sigma * l + (0.5 * i2 + 1.74 * i1 + 0.8 * i0).ln()
}

/// Dual and direct sums split by the residue class of `n` mod `q`.
#[derive(Clone, Debug)]
pub struct ClassSums {
    pub q: u64,
    /// Dual sums run over `n <= t_dual`.
    pub t_dual: usize,
    pub tail_bound: f64,
    /// `sum_{n <= T, n = r} A(n)/n Phi_{+1}(n/q^3)`, indexed by `r` (`r = 0` unused).
    pub plus: Vec<f64>,
    /// Same with `Phi_{-1}`.
    pub minus: Vec<f64>,
    /// `sum_{n = r} A(n) phi(n)` over the support of `phi`.
    pub direct: Vec<f64>,
}

impl ClassSums {
    /// Builds the sums with the dual length chosen so the tail bound is
    /// below `target`. Fails if the table is too short, naming the length
    /// required.
    pub fn compute(table: &Sym2CoeffTable, kernels: &VoronoiKernels, target: f64) -> Result<Self> {
        let m = kernels.required_length(target)?;
        if m > table.len() {
            return Err(Error::TruncationTooShort { required: m, available: table.len() });
        }
        Self::with_length(table, kernels, m)
    }

    /// Builds the sums with the dual length `t_dual` as given.
    pub fn with_length(table: &Sym2CoeffTable, kernels: &VoronoiKernels, t_dual: usize) -> Result<Self> {
        let q = kernels.q;
        if table.level() != q || table.weight() != kernels.k {
            return Err(Error::InvalidArgument(format!(
                "table is for (q, k) = ({}, {}), kernels for ({q}, {})",
                table.level(),
                table.weight(),
                kernels.k
            )));
        }
        let (lo, hi) = kernels.phi.support();
        let n_hi = hi.floor() as usize;
        if n_hi > table.len() || t_dual > table.len() {
            return Err(Error::OutOfRange { n: n_hi.max(t_dual) as u64, len: table.len() });
        }
        let a = table.coprime_values();
        let q3 = (q * q * q) as f64;
        let qs = q as usize;
        let blocks = t_dual.div_ceil(BLOCK);
        let partial = block_map(blocks, |b| {
            let mut plus = vec![CompensatedSum::new(); qs];
            let mut minus = vec![CompensatedSum::new(); qs];
            for n in (b * BLOCK + 1)..=((b + 1) * BLOCK).min(t_dual) {
                if a[n] == 0.0 {
                    continue;
                }
                let x = n as f64 / q3;
                let w = a[n] / n as f64;
                plus[n % qs].add(w * kernels.plus.eval(x).re);
                minus[n % qs].add(w * kernels.minus.eval(x).re);
            }
            (plus, minus)
        });
        let mut plus = vec![CompensatedSum::new(); qs];
        let mut minus = vec![CompensatedSum::new(); qs];
        for (bp, bm) in partial {
            for r in 0..qs {
                plus[r].add(bp[r].value());
                minus[r].add(bm[r].value());
            }
        }
        let mut direct = vec![CompensatedSum::new(); qs];
        for n in (lo.ceil() as usize).max(1)..=n_hi {
            direct[n % qs].add(a[n] * kernels.phi.eval(n as f64));
        }
        Ok(Self {
            q,
            t_dual,
            tail_bound: kernels.tail_bound(t_dual),
            plus: plus.iter().map(|s| s.value()).collect(),
            minus: minus.iter().map(|s| s.value()).collect(),
            direct: direct.iter().map(|s| s.value()).collect(),
        })
    }

    fn dual(&self, alpha: i32) -> &[f64] {
        if alpha == 1 { &self.plus } else { &self.minus }
    }

    /// `sum_{(n,q)=1} A(n) e(nh/q) phi(n)`.
    pub fn lhs(&self, h: u64) -> Complex64 {
        let q = self.q;
        crate::numeric::csum((1..q).map(|r| e_frac((r * h) as i128, q) * self.direct[r as usize]))
    }

    /// The right-hand side for the unit `h`, split as
    /// `(alpha = +1 main term, alpha = -1 main term, correction)`.
    pub fn rhs_parts(&self, h: u64, convention: SignConvention) -> Result<[Complex64; 3]> {
        let q = self.q;
        let hbar = inv_mod(h as i64, q).ok_or(Error::NotInvertible { value: h as i64, modulus: q })?;
        let mut main = [Complex64::new(0.0, 0.0); 2];
        for (slot, alpha) in [1i32, -1].into_iter().enumerate() {
            let d = self.dual(alpha);
            let mut acc = CompensatedSum::new();
            for r in 1..q {
                let x = (r * hbar % q) as i64;
                let s_minus = kloosterman(-x, 1, q);
                let s_plus = kloosterman(x, 1, q);
                let sign = match convention.alpha_term {
                    AlphaTerm::Minus => -(alpha as f64),
                    AlphaTerm::Plus => alpha as f64,
                };
                acc.add((s_minus + sign * s_plus) * d[r as usize]);
            }
            main[slot] = i_pow(((1 + alpha) / 2) as i64) * (q as f64 / 2.0) * acc.value();
        }
        let direct: f64 = crate::numeric::rsum(self.direct.iter().copied());
        let qf = q as f64;
        let dual_corr = match convention.correction {
            CorrectionTerm::RealEven => Complex64::new(qf * crate::numeric::rsum(self.minus.iter().copied()), 0.0),
            CorrectionTerm::ImaginaryOdd => Complex64::new(0.0, qf * crate::numeric::rsum(self.plus.iter().copied())),
        };
        let corr = -(Complex64::new(direct, 0.0) + dual_corr) / (qf - 1.0);
        Ok([main[0], main[1], corr])
    }

    pub fn rhs(&self, h: u64, convention: SignConvention) -> Result<Complex64> {
        let p = self.rhs_parts(h, convention)?;
        Ok(p[0] + p[1] + p[2])
    }

    /// `sum A(n) chibar(n) phi(n)`.
    pub fn fe_lhs(&self, chi: &DirichletCharacter) -> Complex64 {
        crate::numeric::csum((1..self.q).map(|r| chi.eval(r as i64).conj() * self.direct[r as usize]))
    }

    /// `i^{(1+alpha)/2} tau(chibar)^3 sum A(n) chi(n)/n Phi_alpha(n/q^3)` with
    /// `alpha = -chi(-1)`, or its negative when `flip_alpha` is set.
    pub fn fe_rhs(&self, chi: &DirichletCharacter, flip_alpha: bool) -> Complex64 {
        let mut alpha = -chi.parity();
        if flip_alpha {
            alpha = -alpha;
        }
        let d = self.dual(alpha);
        let dual = crate::numeric::csum((1..self.q).map(|r| chi.eval(r as i64) * d[r as usize]));
        let tau = gauss_sum(&chi.conj());
        i_pow(((1 + alpha) / 2) as i64) * tau * tau * tau * dual
    }

    /// The right-hand side for `h` rebuilt from the trivial-character
    /// term and the per-character dual sums:
    /// `(1/(q-1)) [tau(chi_0) sum A phi + sum_{chi != chi_0} chi(h) tau(chibar) FE_rhs(chibar)]`.
    pub fn rhs_from_characters(&self, h: u64, chars: &[DirichletCharacter]) -> Complex64 {
        let q = self.q as f64;
        let mut acc = crate::numeric::ComplexSum::new();
        for chi in chars {
            if chi.is_principal() {
                acc.add(gauss_sum(chi) * crate::numeric::rsum(self.direct.iter().copied()));
            } else {
                acc.add(chi.eval(h as i64) * gauss_sum(&chi.conj()) * self.fe_rhs(&chi.conj(), false));
            }
        }
        acc.value() / (q - 1.0)
    }
}

/// One Voronoi check: a coefficient table, the kernels of a test function,
/// a unit `h` mod `q`, and a tolerance.
#[derive(Clone)]
pub struct VoronoiInstance {
    pub table: Arc<Sym2CoeffTable>,
    pub kernels: Arc<VoronoiKernels>,
    pub h: Residue,
    pub tolerance: f64,
    pub convention: SignConvention,
}

impl VoronoiInstance {
    pub fn new(table: Arc<Sym2CoeffTable>, kernels: Arc<VoronoiKernels>, h: u64, tolerance: f64) -> Result<Self> {
        let q = kernels.level();
        if table.level() != q {
            return Err(Error::InvalidArgument("table and kernels are for different levels".into()));
        }
        let h = Residue::new(h as i64, q)?;
        if gcd(h.value(), q) != 1 {
            return Err(Error::NotInvertible { value: h.value() as i64, modulus: q });
        }
        Ok(Self { table, kernels, h, tolerance, convention: SignConvention::VERIFIED })
    }

    pub fn with_convention(mut self, convention: SignConvention) -> Self {
        self.convention = convention;
        self
    }

    /// Direct sums with the dual length for this tolerance; the target
    /// for the tail is a tenth of the tolerance, relative to `max(|LHS|, 1)`.
    pub fn class_sums(&self) -> Result<ClassSums> {
        let lhs = voronoi_lhs(self)?;
        ClassSums::compute(&self.table, &self.kernels, 0.1 * self.tolerance * lhs.norm().max(1.0))
    }
}

/// `sum_{(n,q)=1} A(n,1) e(nh/q) phi(n)`, a finite sum over the support.
pub fn voronoi_lhs(inst: &VoronoiInstance) -> Result<Complex64> {
    let phi = inst.kernels.test_function();
    let (lo, hi) = phi.support();
    let q = inst.kernels.level();
    let h = inst.h.value();
    let mut acc = crate::numeric::ComplexSum::new();
    for n in (lo.ceil() as u64).max(1)..=hi.floor() as u64 {
        if n % q == 0 {
            continue;
        }
        let w = phi.eval(n as f64);
        if w != 0.0 {
            acc.add(e_frac((n * h % q) as i128, q) * (inst.table.a1(n)? * w));
        }
    }
    Ok(acc.value())
}

/// The right-hand side with its dual length and tail bound.
#[derive(Clone, Copy, Debug)]
pub struct RhsValue {
    pub total: Complex64,
    pub main_plus: Complex64,
    pub main_minus: Complex64,
    pub correction: Complex64,
    pub t_dual: usize,
    pub tail_bound: f64,
}

pub fn voronoi_rhs(inst: &VoronoiInstance) -> Result<RhsValue> {
    let sums = inst.class_sums()?;
    rhs_value(&sums, inst.h.value(), inst.convention)
}

fn rhs_value(sums: &ClassSums, h: u64, convention: SignConvention) -> Result<RhsValue> {
    let [p, m, c] = sums.rhs_parts(h, convention)?;
    Ok(RhsValue { total: p + m + c, main_plus: p, main_minus: m, correction: c, t_dual: sums.t_dual, tail_bound: sums.tail_bound })
}

fn base_report(identity: &str, anchor: &str, kernels: &VoronoiKernels, tolerance: f64) -> VerificationReport {
    let phi = kernels.test_function();
    VerificationReport::new(identity, anchor, tolerance)
        .input("q", kernels.level())
        .input("k", kernels.weight())
        .input("bump_start", phi.a)
        .input("bump", phi.profile)
}

fn record_truncation(report: &mut VerificationReport, sums: &ClassSums, kernels: &VoronoiKernels) {
    let rule = kernels.rule();
    report.set_truncation("t_dual", sums.t_dual);
    report.set_truncation("dual_tail_bound", sums.tail_bound);
    report.set_truncation("kernel_sigma", rule.sigma);
    report.set_truncation("kernel_step", rule.h);
    report.set_truncation("kernel_height", rule.t_max);
    report.set_truncation("log_grid_oversample", GRID_OVERSAMPLE);
}

/// Both sides of the Voronoi formula for one instance. Failures are
/// reported, never raised; the report also lists the residual of every
/// alternative sign convention so that a failure can be localized.
pub fn verify_voronoi(inst: &VoronoiInstance) -> VerificationReport {
    let mut report = base_report("voronoi", "voronoi.additive-twist.prime-level", &inst.kernels, inst.tolerance)
        .input("h", inst.h.value())
        .input("convention", inst.convention);
    let sums = match inst.class_sums() {
        Ok(s) => s,
        Err(e) => {
            report.fail(&e.to_string());
            return report;
        }
    };
    fill_voronoi_report(&mut report, &sums, &inst.kernels, inst.h.value(), inst.convention);
    report
}

/// [`verify_voronoi`] for every unit `h` mod `q`, sharing one set of class
/// sums.
pub fn verify_voronoi_all_units(
    table: Arc<Sym2CoeffTable>,
    kernels: Arc<VoronoiKernels>,
    tolerance: f64,
    convention: SignConvention,
) -> Result<Vec<VerificationReport>> {
    let q = kernels.level();
    let probe = VoronoiInstance::new(table.clone(), kernels.clone(), 1, tolerance)?;
    let mut scale = f64::INFINITY;
    for h in 1..q {
        let inst = VoronoiInstance { h: Residue::new(h as i64, q)?, ..probe.clone() };
        scale = scale.min(voronoi_lhs(&inst)?.norm().max(1.0));
    }
    let sums = ClassSums::compute(&table, &kernels, 0.1 * tolerance * scale)?;
    Ok((1..q)
        .map(|h| {
            let mut report = base_report("voronoi", "voronoi.additive-twist.prime-level", &kernels, tolerance)
                .input("h", h)
                .input("convention", convention);
            fill_voronoi_report(&mut report, &sums, &kernels, h, convention);
            report
        })
        .collect())
}

fn fill_voronoi_report(
    report: &mut VerificationReport,
    sums: &ClassSums,
    kernels: &VoronoiKernels,
    h: u64,
    convention: SignConvention,
) {
    record_truncation(report, sums, kernels);
    let lhs = sums.lhs(h);
    let rhs = match rhs_value(sums, h, convention) {
        Ok(v) => v,
        Err(e) => {
            report.fail(&e.to_string());
            return;
        }
    };
    report.compare(lhs, rhs.total);
    let scale = lhs.norm().max(1.0);
    let tol = report.tolerance;
    report.check("real part", (lhs.re - rhs.total.re).abs() / scale, tol);
    report.check("imaginary part", (lhs.im - rhs.total.im).abs() / scale, tol);
    report.check("dual tail bound below tolerance/10", sums.tail_bound / scale, 0.1 * tol);
    for other in SignConvention::all() {
        if other != convention {
            if let Ok(v) = sums.rhs(h, other) {
                report.note(&format!("residual with {}", other.name()), (lhs - v).norm() / scale, "localization");
            }
        }
    }
}

/// Twisted functional equation for a primitive character `chi` mod `q`:
/// `sum A(n) chibar(n) phi(n) = i^{(1+alpha)/2} tau(chibar)^3 sum A(n) chi(n)/n Phi_alpha(n/q^3)`
/// with `alpha = -chi(-1)`.
pub fn verify_twisted_fe(
    table: &Sym2CoeffTable,
    kernels: &VoronoiKernels,
    chi: &DirichletCharacter,
    tolerance: f64,
) -> VerificationReport {
    verify_twisted_fe_with(table, kernels, chi, tolerance, false)
}

/// [`verify_twisted_fe`], optionally with `alpha` replaced by `-alpha`.
pub fn verify_twisted_fe_with(
    table: &Sym2CoeffTable,
    kernels: &VoronoiKernels,
    chi: &DirichletCharacter,
    tolerance: f64,
    flip_alpha: bool,
) -> VerificationReport {
    let mut report = base_report("twisted_fe", "voronoi.twisted-functional-equation.primitive", kernels, tolerance)
        .input("character", chi.exponents())
        .input("parity", chi.parity())
        .input("flip_alpha", flip_alpha);
    if chi.modulus() != kernels.level() || !chi.is_primitive() {
        report.fail("character must be primitive modulo the level");
        return report;
    }
    let direct = match ClassSums::with_length(table, kernels, 0) {
        Ok(s) => s,
        Err(e) => {
            report.fail(&e.to_string());
            return report;
        }
    };
    let scale = direct.fe_lhs(chi).norm().max(1.0);
    // The Voronoi tail bound carries the Weil amplitude `2 q^{3/2}` per
    // kernel, which dominates `|tau(chibar)|^3 = q^{3/2}`.
    let sums = match ClassSums::compute(table, kernels, 0.1 * tolerance * scale) {
        Ok(s) => s,
        Err(e) => {
            report.fail(&e.to_string());
            return report;
        }
    };
    record_truncation(&mut report, &sums, kernels);
    report.compare(sums.fe_lhs(chi), sums.fe_rhs(chi, flip_alpha));
    report.check("dual tail bound below tolerance/10", sums.tail_bound / scale, 0.1 * tolerance);
    report
}

/// Rebuilds the Voronoi right-hand side at `h` from per-character dual
/// sums and compares with the Kloosterman form.
pub fn verify_character_decomposition(
    table: &Sym2CoeffTable,
    kernels: &VoronoiKernels,
    h: u64,
    tolerance: f64,
) -> VerificationReport {
    let q = kernels.level();
    let mut report = base_report("character_decomposition", "voronoi.character-decomposition", kernels, tolerance)
        .input("h", h);
    let run = || -> Result<(ClassSums, Complex64, Complex64)> {
        let chars = crate::arith::enumerate_characters(q)?;
        let sums = ClassSums::compute(table, kernels, 1e-3)?;
        let rebuilt = sums.rhs_from_characters(h, &chars);
        let direct = sums.rhs(h, SignConvention::VERIFIED)?;
        Ok((sums, direct, rebuilt))
    };
    match run() {
        Ok((sums, direct, rebuilt)) => {
            record_truncation(&mut report, &sums, kernels);
            report.compare(direct, rebuilt);
        }
        Err(e) => report.fail(&e.to_string()),
    }
    report
}

/// `sum |A(n)/n Phi_alpha(n/q^3)|` over consecutive ranges `(edges[i], edges[i+1]]`,
/// both kernels combined, to show where the dual sum lives.
pub fn dual_term_profile(table: &Sym2CoeffTable, kernels: &VoronoiKernels, edges: &[usize]) -> Result<Vec<f64>> {
    let q = kernels.level();
    let q3 = (q * q * q) as f64;
    let mut out = Vec::new();
    for w in edges.windows(2) {
        let mut acc = CompensatedSum::new();
        for n in (w[0] + 1)..=w[1] {
            if n as u64 % q == 0 {
                continue;
            }
            let a = table.a1(n as u64)?;
            let x = n as f64 / q3;
            acc.add((a / n as f64).abs() * (kernels.phi(1, x).abs() + kernels.phi(-1, x).abs()));
        }
        out.push(acc.value());
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qexp::NewformData;
    use proptest::prelude::*;
    use std::f64::consts::TAU;
    use std::sync::OnceLock;

    type Setup = (Arc<Sym2CoeffTable>, Arc<VoronoiKernels>);

    fn setup_5() -> &'static Setup {
        static S: OnceLock<Setup> = OnceLock::new();
        S.get_or_init(|| builtin_setup(5, SmoothBump::narrow(25.0), 1e-6).unwrap())
    }

    fn setup_11() -> &'static (Setup, NewformData) {
        static S: OnceLock<(Setup, NewformData)> = OnceLock::new();
        S.get_or_init(|| {
            let s = builtin_setup(11, SmoothBump::narrow(121.0), 1e-6).unwrap();
            let f = eta_newform(11, 60_000).unwrap();
            (s, f)
        })
    }

    fn instance(s: &Setup, h: u64) -> VoronoiInstance {
        VoronoiInstance::new(s.0.clone(), s.1.clone(), h, 1e-6).unwrap()
    }

    #[test]
    fn empty_support_gives_zero() {
        let (table, _) = setup_5();
        let kernels = Arc::new(VoronoiKernels::new(5, 4, SmoothBump::narrow(0.3)).unwrap());
        let inst = VoronoiInstance::new(table.clone(), kernels, 1, 1e-6).unwrap();
        assert_eq!(voronoi_lhs(&inst).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn lhs_matches_direct_enumeration_at_level_11() {
        let ((table, kernels), f) = setup_11();
        let phi = kernels.test_function();
        let mut re = 0.0;
        let mut im = 0.0;
        for n in 121u64..=242 {
            if n % 11 == 0 {
                continue;
            }
            let mut a = 0.0;
            for d1 in 1..=n {
                if n % (d1 * d1) == 0 {
                    let d2 = n / (d1 * d1);
                    a += f.lambda(d2 * d2).unwrap();
                }
            }
            let theta = TAU * n as f64 / 11.0;
            re += a * phi.eval(n as f64) * theta.cos();
            im += a * phi.eval(n as f64) * theta.sin();
        }
        let lhs = voronoi_lhs(&instance(&(table.clone(), kernels.clone()), 1)).unwrap();
        assert!((lhs - Complex64::new(re, im)).norm() < 1e-12, "{lhs} vs {re} {im}");
        // Regression value.
        assert!((lhs - Complex64::new(LHS_11_121_RE, LHS_11_121_IM)).norm() < 1e-12, "{lhs}");
    }

    const LHS_11_121_RE: f64 = 0.8854452901533701;
    const LHS_11_121_IM: f64 = 1.8011832516163344;

    #[test]
    fn multiples_of_the_level_are_skipped() {
        let ((table, kernels), _) = setup_11();
        let poisoned = Arc::new((**table).clone().with_entry(132, 1e6).unwrap().with_entry(11, 1e6).unwrap());
        let a = voronoi_lhs(&instance(&(table.clone(), kernels.clone()), 3)).unwrap();
        let b = voronoi_lhs(&instance(&(poisoned.clone(), kernels.clone()), 3)).unwrap();
        assert_eq!(a, b);
        let sums = ClassSums::with_length(&poisoned, kernels, 2000).unwrap();
        assert_eq!((sums.plus[0], sums.minus[0], sums.direct[0]), (0.0, 0.0, 0.0));
    }

    #[test]
    fn identity_holds_for_every_unit_mod_5() {
        let (table, kernels) = setup_5();
        let reports = verify_voronoi_all_units(table.clone(), kernels.clone(), 1e-6, SignConvention::VERIFIED).unwrap();
        for r in &reports {
            assert!(r.passed, "{}", r.canonical_json());
            assert!(r.rel_residual < 1e-6);
        }
        let single = verify_voronoi(&instance(setup_5(), 2));
        assert!(single.passed, "{}", single.canonical_json());
    }

    #[test]
    fn identity_holds_at_level_11() {
        let ((table, kernels), _) = setup_11();
        let r = verify_voronoi(&instance(&(table.clone(), kernels.clone()), 1));
        assert!(r.passed && r.rel_residual < 1e-6, "{}", r.canonical_json());
    }

    #[test]
    fn residuals_conjugate_under_h_to_minus_h() {
        let (table, kernels) = setup_5();
        let sums = ClassSums::compute(table, kernels, 1e-7).unwrap();
        for h in 1..5 {
            let d = sums.lhs(h) - sums.rhs(h, SignConvention::VERIFIED).unwrap();
            let e = sums.lhs(5 - h) - sums.rhs(5 - h, SignConvention::VERIFIED).unwrap();
            assert!((d - e.conj()).norm() < 1e-10);
            assert!((sums.lhs(h) - sums.lhs(5 - h).conj()).norm() < 1e-12);
        }
    }

    #[test]
    fn wrong_signs_break_the_identity() {
        let (table, kernels) = setup_5();
        let sums = ClassSums::compute(table, kernels, 1e-7).unwrap();
        for h in 1..5 {
            let scale = sums.lhs(h).norm().max(1.0);
            for c in SignConvention::all().into_iter().filter(|c| *c != SignConvention::VERIFIED) {
                let r = (sums.lhs(h) - sums.rhs(h, c).unwrap()).norm() / scale;
                assert!(r > 1e-2, "{c:?} h={h} residual {r}");
            }
        }
        let r = verify_voronoi(&instance(setup_5(), 1).with_convention(SignConvention::LITERAL));
        assert!(!r.passed);
    }

    #[test]
    fn twisted_fe_for_primitive_characters_mod_5() {
        let (table, kernels) = setup_5();
        let chars = crate::arith::enumerate_characters(5).unwrap();
        let mut seen = 0;
        for chi in chars.iter().filter(|c| c.is_primitive()) {
            let r = verify_twisted_fe(table, kernels, chi, 1e-6);
            assert!(r.passed && r.rel_residual < 1e-6, "{}", r.canonical_json());
            let flipped = verify_twisted_fe_with(table, kernels, chi, 1e-6, true);
            assert!(flipped.rel_residual > 1e-2);
            seen += 1;
        }
        assert_eq!(seen, 3);
    }

    #[test]
    fn characters_rebuild_the_additive_twist() {
        let (table, kernels) = setup_5();
        for h in 1..5 {
            let r = verify_character_decomposition(table, kernels, h, 1e-8);
            assert!(r.passed, "{}", r.canonical_json());
        }
    }

    #[test]
    fn dual_sum_is_concentrated_at_small_n() {
        // N = q^2, so q^3/N = q; the bump has log-width 0.036, which
        // stretches the transition region by about (1/0.036)^3.
        let ((table, kernels), _) = setup_11();
        let p = dual_term_profile(table, kernels, &[0, 5500, 55_000, 110_000, 300_000]).unwrap();
        let total: f64 = p.iter().sum();
        assert!(p[0] > 0.5 * total, "{p:?}");
        assert!(p[2] + p[3] < 1e-3 * total, "{p:?}");
        assert!(p[3] < 1e-5 * total, "{p:?}");
    }

    #[test]
    fn short_table_reports_required_length() {
        let (_, kernels) = setup_5();
        let f = eta_newform(5, 1000).unwrap();
        let table = Sym2CoeffTable::new(&f);
        match ClassSums::compute(&table, kernels, 1e-7) {
            Err(Error::TruncationTooShort { required, available }) => {
                assert_eq!(available, 1000);
                assert!(required > 100_000);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn non_unit_shift_rejected() {
        let (table, kernels) = setup_5();
        assert!(VoronoiInstance::new(table.clone(), kernels.clone(), 10, 1e-6).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn tail_bound_decreases(m in 200usize..10_000_000, f in 1.01f64..3.0) {
            let (_, kernels) = setup_5();
            let a = kernels.tail_bound(m);
            let b = kernels.tail_bound((m as f64 * f) as usize);
            prop_assert!(b <= a);
        }

        #[test]
        fn d3_tail_matches_quadrature(m in 10.0f64..1e6, sigma in 1.0f64..8.0) {
            let g = |t: f64| { let l = t.ln(); (0.5 * l * l + 1.74 * l + 0.8) * t.powf(-1.0 - sigma) };
            // Substitute t = m e^u.
            let n = 4000;
            let du = 40.0 / sigma / n as f64;
            let mut s = 0.0;
            for i in 0..=n {
                let u = i as f64 * du;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                s += w * g(m * u.exp()) * m * u.exp() * du;
            }
            let want = s.ln();
            prop_assert!((ln_d3_tail(m, sigma) - want).abs() < 1e-5);
        }
    }
}
