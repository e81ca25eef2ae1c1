//! Commutators of mollification with the free-streaming and Lorentz terms,
//! their exact decompositions and their norms.
//!
//! Static inputs only: `u` lives on `(x, ς)` without a time axis, `E` and `B`
//! on the position axes. Velocities inside momentum convolutions are
//! evaluated at unwrapped momenta `ς − w`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{AxisKind, GridField};
use crate::kernels::{
    difference_product, kernel_for, mollify, mollify_coefficient, mollify_weighted, sample_coefficient, Coefficient,
    MollifierKernel, SmoothingScales,
};
use crate::norms::{
    gagliardo_seminorm, lp_norm, mixed_norm, omega_modulus, phase_space_seminorm, Exponent, RegularityClass,
    DEFAULT_PAIR_BUDGET,
};
use crate::relativistic::{velocity_component, velocity_curl, velocity_derivative_complex_step};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Term {
    FreeStreaming,
    #[serde(rename = "T_E")]
    TE,
    #[serde(rename = "T_B")]
    TB,
    #[serde(rename = "T_B1")]
    TB1,
    #[serde(rename = "T_B2")]
    TB2,
    #[serde(rename = "T_B3")]
    TB3,
    Combined,
}

impl Term {
    pub fn name(self) -> &'static str {
        match self {
            Term::FreeStreaming => "free_streaming",
            Term::TE => "T_E",
            Term::TB => "T_B",
            Term::TB1 => "T_B1",
            Term::TB2 => "T_B2",
            Term::TB3 => "T_B3",
            Term::Combined => "combined",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommutatorReport {
    pub term: Term,
    pub scales: SmoothingScales,
    /// Norm of the divergence of the commutator (`L^p` for free streaming,
    /// `L^p_x(L^r_ς)` for the Lorentz terms).
    pub norm: f64,
    /// Relative defect of the algebraic decomposition.
    pub identity_residual: f64,
}

/// One row of the flat report format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRecord {
    pub term: String,
    pub theta: f64,
    pub kappa: Option<f64>,
    pub p: Exponent,
    pub q: Option<Exponent>,
    pub epsilon: f64,
    pub sigma: f64,
    pub norm: f64,
    pub residual: f64,
}

impl CommutatorReport {
    pub fn record(&self, reg: &RegularityClass) -> ReportRecord {
        ReportRecord {
            term: self.term.name().into(),
            theta: reg.theta(),
            kappa: reg.kappa(),
            p: reg.p(),
            q: reg.q(),
            epsilon: self.scales.epsilon,
            sigma: self.scales.sigma,
            norm: self.norm,
            residual: self.identity_residual,
        }
    }
}

/// A commutator vector field, its divergence and the report.
#[derive(Clone, Debug)]
pub struct Commutator {
    pub components: Vec<GridField>,
    pub divergence: GridField,
    pub report: CommutatorReport,
}

fn relative(defect: f64, scale: f64) -> f64 {
    if defect == 0.0 {
        0.0
    } else if scale == 0.0 {
        f64::INFINITY
    } else {
        defect / scale
    }
}

fn max_abs_diff(a: &GridField, b: &GridField) -> f64 {
    a.data().iter().zip(b.data()).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

fn momentum_dim(u: &GridField) -> Result<usize> {
    let m = u.momentum_axes().len();
    let x = u.position_axes().len();
    if m == 0 || x == 0 || u.has_axis(AxisKind::T) {
        return Err(Error::AxisMismatch(
            "commutators need a static field over position and momentum axes".into(),
        ));
    }
    Ok(m)
}

struct Kernels {
    x: MollifierKernel,
    s: MollifierKernel,
    xk: Vec<AxisKind>,
    sk: Vec<AxisKind>,
}

fn kernels(u: &GridField, scales: &SmoothingScales) -> Result<Kernels> {
    let x = kernel_for(u, scales.epsilon, AxisKind::is_position)?;
    let s = kernel_for(u, scales.sigma, AxisKind::is_momentum)?;
    Ok(Kernels {
        xk: x.kinds(),
        sk: s.kinds(),
        x,
        s,
    })
}

fn velocity_fn(i: usize) -> impl Fn(&[f64]) -> f64 + Sync {
    move |c: &[f64]| velocity_component(c, i)
}

/// `K_σ(v, g) = ∫ φ_σ(w) (v(ς−w) − v(ς)) (g(ς−w) − g(ς)) dw` for a scalar map `v`.
pub fn k_sigma(v: &(dyn Fn(&[f64]) -> f64 + Sync), g: &GridField, kernel: &MollifierKernel) -> Result<GridField> {
    if kernel.kinds().iter().any(|k| !k.is_momentum()) {
        return Err(Error::AxisMismatch("K_σ needs a kernel on momentum axes".into()));
    }
    difference_product(g, kernel, &Coefficient::Unwrapped(v))
}

/// Free-streaming commutator `(vu)^{ε,σ} − v^σ u^{ε,σ}` and its check
/// against `K_σ(v, u^ε) + (u^{ε,σ} − u^ε)(v − v^σ)`. The report norm is
/// `‖∇_x · (·)‖_{L^p}`.
pub fn free_streaming_commutator(u: &GridField, scales: &SmoothingScales, p: Exponent) -> Result<Commutator> {
    let d = momentum_dim(u)?;
    let k = kernels(u, scales)?;
    if k.xk.len() > d {
        return Err(Error::DimensionMismatch("more position axes than velocity components".into()));
    }
    let ue = mollify(u, &k.x)?;
    let ues = mollify(&ue, &k.s)?;
    let mut components = Vec::with_capacity(d);
    let (mut defect, mut scale) = (0.0f64, 0.0f64);
    for i in 0..d {
        let vi = velocity_fn(i);
        let coef = Coefficient::Unwrapped(&vi);
        let v_sig = mollify_coefficient(&k.s, &coef)?;
        let v_pt = sample_coefficient(&k.s, &coef)?;
        let vu = mollify_weighted(&ue, &k.s, &coef)?;
        let vs_ues = ues.scale_by_block(&k.sk, &v_sig)?;
        let lhs = vu.sub(&vs_ues)?;
        let kern = k_sigma(&vi, &ue, &k.s)?;
        let dv: Vec<f64> = v_pt.iter().zip(&v_sig).map(|(a, b)| a - b).collect();
        let rhs = kern.add(&ues.sub(&ue)?.scale_by_block(&k.sk, &dv)?)?;
        defect = defect.max(max_abs_diff(&lhs, &rhs));
        scale = scale.max(vu.max_abs()).max(vs_ues.max_abs());
        components.push(lhs);
    }
    let mut divergence = GridField::zeros(u.axes().to_vec())?;
    for (j, kind) in k.xk.iter().enumerate() {
        divergence = divergence.add(&components[j].derivative(*kind)?)?;
    }
    let report = CommutatorReport {
        term: Term::FreeStreaming,
        scales: *scales,
        norm: lp_norm(&divergence, p),
        identity_residual: relative(defect, scale),
    };
    Ok(Commutator {
        components,
        divergence,
        report,
    })
}

fn momentum_divergence(components: &[GridField], sk: &[AxisKind]) -> Result<GridField> {
    let mut div = GridField::zeros(components[0].axes().to_vec())?;
    for (c, kind) in components.iter().zip(sk) {
        div = div.add(&c.derivative(*kind)?)?;
    }
    Ok(div)
}

fn check_position_field(f: &GridField, u: &GridField, what: &str) -> Result<()> {
    let pos: Vec<_> = u.axes().iter().filter(|a| a.kind.is_position()).copied().collect();
    if f.axes() != pos.as_slice() {
        return Err(Error::AxisMismatch(format!("{what} must live on the position axes of u")));
    }
    Ok(())
}

fn mixed_r(reg: &RegularityClass) -> Result<(Exponent, Exponent)> {
    let r = reg
        .r()
        .ok_or_else(|| Error::invalid("kappa", "the Lorentz commutators need (kappa, q) in the regularity class"))?;
    Ok((reg.p(), r))
}

/// `T_E = K_ε(E, u^σ) − (E − E^ε)(u^σ − (u^σ)^ε)`, checked against
/// `(E u^σ)^ε − E^ε (u^σ)^ε`. One `E` component per momentum axis.
pub fn lorentz_commutator_e(u: &GridField, e: &[GridField], scales: &SmoothingScales, reg: &RegularityClass) -> Result<Commutator> {
    let d = momentum_dim(u)?;
    if e.len() != d {
        return Err(Error::DimensionMismatch(format!("{} E components for {d} momentum axes", e.len())));
    }
    let (p, r) = mixed_r(reg)?;
    let k = kernels(u, scales)?;
    let us = mollify(u, &k.s)?;
    let use_ = mollify(&us, &k.x)?;
    let mut components = Vec::with_capacity(d);
    let (mut defect, mut scale) = (0.0f64, 0.0f64);
    for ei in e {
        check_position_field(ei, u, "E")?;
        let coef = Coefficient::Periodic(ei.data());
        let ee = mollify_coefficient(&k.x, &coef)?;
        let kern = difference_product(&us, &k.x, &coef)?;
        let de: Vec<f64> = ei.data().iter().zip(&ee).map(|(a, b)| a - b).collect();
        let t = kern.sub(&us.sub(&use_)?.scale_by_block(&k.xk, &de)?)?;
        let eus = mollify_weighted(&us, &k.x, &coef)?;
        let ee_use = use_.scale_by_block(&k.xk, &ee)?;
        let direct = eus.sub(&ee_use)?;
        defect = defect.max(max_abs_diff(&t, &direct));
        scale = scale.max(eus.max_abs()).max(ee_use.max_abs());
        components.push(t);
    }
    let divergence = momentum_divergence(&components, &k.sk)?;
    let report = CommutatorReport {
        term: Term::TE,
        scales: *scales,
        norm: mixed_norm(&divergence, p, r)?,
        identity_residual: relative(defect, scale),
    };
    Ok(Commutator {
        components,
        divergence,
        report,
    })
}

/// The magnetic commutator, its three-term split and the `I₁` integrand.
#[derive(Clone, Debug)]
pub struct MagneticCommutator {
    pub total: Commutator,
    pub parts: [Commutator; 3],
    /// `max |I₁| / max (|B| u)^ε (|∂₁v₂| + |∂₂v₁|)^σ`.
    pub i1_relative: f64,
    pub tb3_bound: Tb3Bound,
}

/// `‖∇_ς·T_B3‖ ≤ 4σ ‖B^ε‖_q ‖∇_ς u^{σ,ε}‖_p`, both sides by quadrature.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tb3Bound {
    pub lhs: f64,
    pub rhs: f64,
    pub pass: bool,
}

/// `(a × B e₃)` in the momentum plane for a vector `a = (a₁, a₂)`: `(a₂ B, −a₁ B)`.
fn cross_b(a1: &GridField, a2: &GridField) -> [GridField; 2] {
    [a2.clone(), a1.scale(-1.0)]
}

/// `T_B = (v×B u)^{ε,σ} − v^σ×B^ε u^{ε,σ}` for a scalar out-of-plane `B`
/// (two momentum axes), split as `T_B1 + T_B2 + T_B3`.
pub fn lorentz_commutator_b(u: &GridField, b: &GridField, scales: &SmoothingScales, reg: &RegularityClass) -> Result<MagneticCommutator> {
    let d = momentum_dim(u)?;
    if d != 2 {
        return Err(Error::DimensionMismatch(format!(
            "the magnetic commutator needs two momentum axes, got {d}"
        )));
    }
    check_position_field(b, u, "B")?;
    let (p, r) = mixed_r(reg)?;
    let q = reg.q().unwrap();
    let k = kernels(u, scales)?;
    let bcoef = Coefficient::Periodic(b.data());
    let be = mollify_coefficient(&k.x, &bcoef)?;
    let us = mollify(u, &k.s)?;
    let use_ = mollify(&us, &k.x)?;
    let bu_e = mollify_weighted(u, &k.x, &bcoef)?;
    let be_use = use_.scale_by_block(&k.xk, &be)?;
    // (B u^σ)^ε − B^ε (u^σ)^ε, shared by both components of T_B2.
    let bdiff = mollify_weighted(&us, &k.x, &bcoef)?.sub(&be_use)?;

    let v: Vec<_> = (0..2).map(velocity_fn).collect();
    let mut v_pt = Vec::new();
    let mut v_sig = Vec::new();
    let mut direct = Vec::new();
    let mut tb1 = Vec::new();
    for vi in &v {
        let coef = Coefficient::Unwrapped(vi);
        let sig = mollify_coefficient(&k.s, &coef)?;
        let pt = sample_coefficient(&k.s, &coef)?;
        // (v_i B u)^{ε,σ}: momentum weight first, then position weight.
        let vbu = mollify_weighted(&mollify_weighted(u, &k.s, &coef)?, &k.x, &bcoef)?;
        direct.push(vbu.sub(&be_use.scale_by_block(&k.sk, &sig)?)?);
        // ∫ φ_σ(w) (v_i(ς−w) − v_i(ς)) (Bu)^ε(ς−w) dw, position weight first.
        tb1.push(mollify_weighted(&bu_e, &k.s, &coef)?.sub(&mollify(&bu_e, &k.s)?.scale_by_block(&k.sk, &pt)?)?);
        v_sig.push(sig);
        v_pt.push(pt);
    }
    let total = cross_b(&direct[0], &direct[1]);
    let tb1 = cross_b(&tb1[0], &tb1[1]);
    let tb2 = cross_b(&bdiff.scale_by_block(&k.sk, &v_pt[0])?, &bdiff.scale_by_block(&k.sk, &v_pt[1])?);
    let dv = |i: usize| -> Vec<f64> { v_pt[i].iter().zip(&v_sig[i]).map(|(a, b)| a - b).collect() };
    let tb3 = cross_b(&be_use.scale_by_block(&k.sk, &dv(0))?, &be_use.scale_by_block(&k.sk, &dv(1))?);

    let mut defect = 0.0f64;
    let mut scale = 0.0f64;
    for c in 0..2 {
        let sum = tb1[c].add(&tb2[c])?.add(&tb3[c])?;
        defect = defect.max(max_abs_diff(&total[c], &sum));
        scale = scale.max(total[c].max_abs()).max(tb1[c].max_abs()).max(tb2[c].max_abs()).max(tb3[c].max_abs());
    }
    let residual = relative(defect, scale);

    let make = |term: Term, comps: [GridField; 2]| -> Result<Commutator> {
        let divergence = momentum_divergence(&comps, &k.sk)?;
        Ok(Commutator {
            report: CommutatorReport {
                term,
                scales: *scales,
                norm: mixed_norm(&divergence, p, r)?,
                identity_residual: residual,
            },
            components: comps.to_vec(),
            divergence,
        })
    };
    let total = make(Term::TB, total)?;
    let parts = [make(Term::TB1, tb1)?, make(Term::TB2, tb2)?, make(Term::TB3, tb3)?];

    // I₁ integrand: φ_σ(w) ∇_w·[(v(ς−w) − v(ς)) × B] = −B φ_σ(w) curl v(ς−w).
    let curl = |c: &[f64]| velocity_curl(c);
    let curl_abs = |c: &[f64]| {
        velocity_derivative_complex_step(c, 1, 0).abs() + velocity_derivative_complex_step(c, 0, 1).abs()
    };
    let curl_sig = mollify_coefficient(&k.s, &Coefficient::Unwrapped(&curl))?;
    let curl_scale = mollify_coefficient(&k.s, &Coefficient::Unwrapped(&curl_abs))?;
    let i1 = bu_e.scale_by_block(&k.sk, &curl_sig)?;
    let abs_b = b.map(f64::abs);
    let abs_bu = mollify_weighted(&u.map(f64::abs), &k.x, &Coefficient::Periodic(abs_b.data()))?;
    let i1_scale = abs_bu.scale_by_block(&k.sk, &curl_scale)?.max_abs();
    let i1_relative = relative(i1.max_abs(), i1_scale);

    let grad_sq = k
        .sk
        .iter()
        .map(|kind| use_.derivative(*kind).map(|g| g.map(|v| v * v)))
        .collect::<Result<Vec<_>>>()?;
    let grad = grad_sq[0].add(&grad_sq[1])?.map(f64::sqrt);
    let be_field = GridField::new(b.axes().to_vec(), be)?;
    let rhs = 4.0 * scales.sigma * lp_norm(&be_field, q) * lp_norm(&grad, p);
    let lhs = parts[2].report.norm;
    Ok(MagneticCommutator {
        total,
        parts,
        i1_relative,
        tb3_bound: Tb3Bound {
            lhs,
            rhs,
            pass: lhs <= rhs * (1.0 + 1e-12),
        },
    })
}

/// Free-streaming, electric and (when present) magnetic commutators together.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CombinedReport {
    pub scales: SmoothingScales,
    pub free_streaming: CommutatorReport,
    pub electric: CommutatorReport,
    pub magnetic: Option<[CommutatorReport; 4]>,
    pub i1_relative: Option<f64>,
    /// Sum of the free-streaming, electric and magnetic norms.
    pub norm: f64,
    /// Largest identity residual over every decomposition.
    pub identity_residual: f64,
    /// `ω_u(ε,σ)` with pairs along the position axes.
    pub omega: f64,
    /// `(ε^{θ−1}σ^{θ+1} + ε^{θ+κ}σ^{θ−1}) ω + σ^θ`, the bound up to its constant.
    pub envelope: f64,
}

impl CombinedReport {
    pub fn as_report(&self) -> CommutatorReport {
        CommutatorReport {
            term: Term::Combined,
            scales: self.scales,
            norm: self.norm,
            identity_residual: self.identity_residual,
        }
    }
}

pub fn combined_commutator(
    u: &GridField,
    e: &[GridField],
    b: Option<&GridField>,
    scales: &SmoothingScales,
    reg: &RegularityClass,
) -> Result<CombinedReport> {
    let kappa = reg
        .kappa()
        .ok_or_else(|| Error::invalid("kappa", "the combined commutator needs (kappa, q)"))?;
    let fs = free_streaming_commutator(u, scales, reg.p())?;
    let te = lorentz_commutator_e(u, e, scales, reg)?;
    let mag = b.map(|b| lorentz_commutator_b(u, b, scales, reg)).transpose()?;
    let mut norm = fs.report.norm + te.report.norm;
    let mut residual = fs.report.identity_residual.max(te.report.identity_residual);
    let mut magnetic = None;
    let mut i1 = None;
    if let Some(m) = &mag {
        norm += m.total.report.norm;
        residual = residual.max(m.total.report.identity_residual);
        magnetic = Some([m.total.report, m.parts[0].report, m.parts[1].report, m.parts[2].report]);
        i1 = Some(m.i1_relative);
    }
    let theta = reg.theta();
    let omega = omega_modulus(
        std::slice::from_ref(u),
        &[1.0],
        scales.epsilon,
        scales.sigma,
        theta,
        reg.p(),
        &u.position_axes(),
    )?;
    let (eps, sig) = (scales.epsilon, scales.sigma);
    let envelope = (eps.powf(theta - 1.0) * sig.powf(theta + 1.0) + eps.powf(theta + kappa) * sig.powf(theta - 1.0)) * omega
        + sig.powf(theta);
    Ok(CombinedReport {
        scales: *scales,
        free_streaming: fs.report,
        electric: te.report,
        magnetic,
        i1_relative: i1,
        norm,
        identity_residual: residual,
        omega,
        envelope,
    })
}

// ---------------------------------------------------------------------------
// Frozen constants for the commutator bounds
// ---------------------------------------------------------------------------

/// Constants of the five commutator bounds.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub cfs: f64,
    pub est_te: f64,
    pub est_tb1: f64,
    pub est_tb2: f64,
    pub est_tb3: f64,
}

impl BoundConstants {
    pub fn as_array(&self) -> [(&'static str, f64); 5] {
        [
            ("cfs", self.cfs),
            ("est_te", self.est_te),
            ("est_tb1", self.est_tb1),
            ("est_tb2", self.est_tb2),
            ("est_tb3", self.est_tb3),
        ]
    }

    fn max(self, o: BoundConstants) -> BoundConstants {
        BoundConstants {
            cfs: self.cfs.max(o.cfs),
            est_te: self.est_te.max(o.est_te),
            est_tb1: self.est_tb1.max(o.est_tb1),
            est_tb2: self.est_tb2.max(o.est_tb2),
            est_tb3: self.est_tb3.max(o.est_tb3),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationFile {
    pub description: String,
    pub cases: usize,
    pub constants: BoundConstants,
}

const CALIBRATION: &str = include_str!("../data/calibration.json");

/// The constants fitted once on the calibration suite and stored with the crate.
pub fn frozen_constants() -> BoundConstants {
    serde_json::from_str::<CalibrationFile>(CALIBRATION)
        .expect("bundled calibration data is valid")
        .constants
}

/// Left sides over right sides (without constants) of the five bounds.
pub fn bound_ratios(u: &GridField, e: &[GridField], b: &GridField, scales: &SmoothingScales, reg: &RegularityClass) -> Result<BoundConstants> {
    let kappa = reg.kappa().ok_or_else(|| Error::invalid("kappa", "bounds need (kappa, q)"))?;
    let q = reg.q().unwrap();
    let (theta, p) = (reg.theta(), reg.p());
    let (eps, sig) = (scales.epsilon, scales.sigma);
    let fs = free_streaming_commutator(u, scales, p)?;
    let te = lorentz_commutator_e(u, e, scales, reg)?;
    let mag = lorentz_commutator_b(u, b, scales, reg)?;
    let omega = omega_modulus(std::slice::from_ref(u), &[1.0], eps, sig, theta, p, &u.position_axes())?;
    let w_norm = |f: &GridField| -> Result<f64> { Ok(lp_norm(f, q) + gagliardo_seminorm(f, kappa, q)?) };
    let e_norm: f64 = e.iter().map(w_norm).sum::<Result<f64>>()?;
    let b_norm = w_norm(b)?;
    let u_norm = lp_norm(u, p) + phase_space_seminorm(u, theta, p, DEFAULT_PAIR_BUDGET)?;
    let te_scale = eps.powf(theta + kappa) * sig.powf(theta - 1.0) * omega;
    Ok(BoundConstants {
        cfs: fs.report.norm / (eps.powf(theta - 1.0) * sig.powf(theta + 1.0) * omega),
        est_te: te.report.norm / (te_scale * e_norm),
        est_tb1: mag.parts[0].report.norm / (sig.powf(theta) * b_norm * u_norm),
        est_tb2: mag.parts[1].report.norm / (te_scale * b_norm),
        est_tb3: mag.parts[2].report.norm / (sig.powf(theta) * b_norm * u_norm),
    })
}

/// Largest ratio per bound over a set of cases.
pub fn fit_constants(ratios: &[BoundConstants]) -> Option<BoundConstants> {
    ratios.iter().copied().reduce(BoundConstants::max)
}

/// One case of the calibration suite: inputs and scales derived from `seed`.
pub struct CalibrationCase {
    pub u: GridField,
    pub e: Vec<GridField>,
    pub b: GridField,
    pub scales: SmoothingScales,
    pub reg: RegularityClass,
}

/// Scale pairs cycled through by the calibration suite.
pub const CALIBRATION_SCALES: [(f64, f64); 4] = [(1.0 / 16.0, 1.0 / 8.0), (1.0 / 8.0, 1.0 / 4.0), (1.0 / 12.0, 3.0 / 16.0), (1.0 / 6.0, 1.0 / 4.0)];

/// Number of cases in the calibration suite.
pub const CALIBRATION_CASES: usize = 32;

pub fn calibration_case(seed: u64) -> Result<CalibrationCase> {
    use crate::fields::{synth_field, Axis, Spectrum, SynthSpec};
    let reg = RegularityClass::new(0.5, Exponent::Finite(2.0))?.with_field(0.5, Exponent::Finite(2.0))?;
    let x = Axis::periodic(AxisKind::X1, 1.0, 48)?;
    let axes = vec![x, Axis::centered(AxisKind::S1, 1.5, 24)?, Axis::centered(AxisKind::S2, 1.5, 24)?];
    let field = |target: RegularityClass, axes: Vec<Axis>, s: u64| {
        synth_field(&SynthSpec::new(target, axes, s).with_spectrum(Spectrum::Tensor).with_cutoff(false))
    };
    let kappa = RegularityClass::new(0.5, Exponent::Finite(2.0))?;
    let u = field(reg.clone(), axes, seed.wrapping_mul(4))?;
    let e = vec![
        field(kappa.clone(), vec![x], seed.wrapping_mul(4) + 1)?,
        field(kappa.clone(), vec![x], seed.wrapping_mul(4) + 2)?,
    ];
    let b = field(kappa, vec![x], seed.wrapping_mul(4) + 3)?;
    let (eps, sig) = CALIBRATION_SCALES[(seed % 4) as usize];
    Ok(CalibrationCase {
        u,
        e,
        b,
        scales: SmoothingScales::phase_space(eps, sig)?,
        reg,
    })
}

/// Runs the fixed calibration suite (seeds `0..32`) and returns the fitted constants.
pub fn calibrate() -> Result<BoundConstants> {
    let mut ratios = Vec::with_capacity(CALIBRATION_CASES);
    for seed in 0..CALIBRATION_CASES as u64 {
        let c = calibration_case(seed)?;
        ratios.push(bound_ratios(&c.u, &c.e, &c.b, &c.scales, &c.reg)?);
    }
    Ok(fit_constants(&ratios).expect("suite is not empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::{Axis, Spectrum, SynthSpec, synth_field};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn axes(nx: usize, ns: usize, two: bool) -> Vec<Axis> {
        let mut a = vec![Axis::periodic(AxisKind::X1, 1.0, nx).unwrap(), Axis::centered(AxisKind::S1, 1.0, ns).unwrap()];
        if two {
            a.push(Axis::centered(AxisKind::S2, 1.0, ns).unwrap());
        }
        a
    }

    fn random(axes: Vec<Axis>, seed: u64) -> GridField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n: usize = axes.iter().map(|a| a.len).product();
        GridField::new(axes, (0..n).map(|_| rng.gen_range(0.0..1.0)).collect()).unwrap()
    }

    fn reg() -> RegularityClass {
        RegularityClass::new(0.5, Exponent::Finite(2.0))
            .unwrap()
            .with_field(0.5, Exponent::Finite(2.0))
            .unwrap()
    }

    fn scales() -> SmoothingScales {
        SmoothingScales::phase_space(1.0 / 8.0, 1.0 / 8.0).unwrap()
    }

    #[test]
    fn k_sigma_trivial_cases() {
        let ax = axes(16, 16, true);
        let k = kernel_for(&GridField::zeros(ax.clone()).unwrap(), 0.125, AxisKind::is_momentum).unwrap();
        let g = GridField::from_fn(ax.clone(), |c| (6.0 * c[0]).sin()).unwrap();
        let v = velocity_fn(0);
        assert!(k_sigma(&v, &g, &k).unwrap().max_abs() < 1e-15);
        let constant = |_: &[f64]| 0.3;
        let r = random(ax, 1);
        assert_eq!(k_sigma(&constant, &r, &k).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn k_sigma_increment_bound() {
        // ‖K_σ‖ ≤ 2 ∫ φ_σ(w)|w| ‖g(·,·−w) − g‖ dw, right side by direct quadrature.
        let ax = axes(16, 32, false);
        let g = random(ax.clone(), 2);
        let k = kernel_for(&g, 0.1, AxisKind::is_momentum).unwrap();
        let v = velocity_fn(0);
        let lhs = lp_norm(&k_sigma(&v, &g, &k).unwrap(), Exponent::Finite(2.0));
        let mut rhs = 0.0;
        for e in 0..k.len() {
            let w = k.displacement(e)[0];
            let m = k.offset(e)[0];
            let shift = crate::norms::shift_difference_norm(&g, &[(AxisKind::S1, m)], Exponent::Finite(2.0)).unwrap();
            rhs += 2.0 * k.weights()[e] * w.abs() * shift;
        }
        assert!(lhs <= rhs, "{lhs} {rhs}");
    }

    #[test]
    fn free_streaming_identity_and_zero() {
        let ax = axes(32, 16, true);
        let u = random(ax.clone(), 3);
        let c = free_streaming_commutator(&u, &scales(), Exponent::Finite(2.0)).unwrap();
        assert!(c.report.identity_residual < 1e-13, "{}", c.report.identity_residual);
        assert!(c.report.norm > 0.0);
        let z = free_streaming_commutator(&GridField::zeros(ax).unwrap(), &scales(), Exponent::Finite(2.0)).unwrap();
        assert_eq!(z.report.norm, 0.0);
        assert_eq!(z.report.identity_residual, 0.0);
    }

    #[test]
    fn electric_identity_and_trivial_cases() {
        let ax = axes(32, 16, true);
        let u = random(ax.clone(), 4);
        let e: Vec<GridField> = (0..2).map(|i| random(vec![ax[0]], 10 + i)).collect();
        let c = lorentz_commutator_e(&u, &e, &scales(), &reg()).unwrap();
        assert!(c.report.identity_residual < 1e-13);
        assert!(c.report.norm > 0.0);
        let flat: Vec<GridField> = (0..2).map(|_| GridField::constant(vec![ax[0]], 0.7).unwrap()).collect();
        assert!(lorentz_commutator_e(&u, &flat, &scales(), &reg()).unwrap().divergence.max_abs() < 1e-13);
        let z = GridField::zeros(ax).unwrap();
        assert_eq!(lorentz_commutator_e(&z, &e, &scales(), &reg()).unwrap().report.norm, 0.0);
    }

    #[test]
    fn magnetic_split_i1_and_tb3() {
        let ax = axes(32, 16, true);
        let u = random(ax.clone(), 5);
        let b = random(vec![ax[0]], 6).map(|v| v - 0.5);
        let m = lorentz_commutator_b(&u, &b, &scales(), &reg()).unwrap();
        assert!(m.total.report.identity_residual < 1e-13);
        assert!(m.i1_relative < 1e-8);
        assert!(m.tb3_bound.pass, "{:?}", m.tb3_bound);
        let zb = GridField::zeros(vec![ax[0]]).unwrap();
        let m0 = lorentz_commutator_b(&u, &zb, &scales(), &reg()).unwrap();
        assert_eq!(m0.total.report.norm, 0.0);
        for part in &m0.parts {
            assert_eq!(part.report.norm, 0.0);
        }
        let one = random(axes(32, 16, false), 7);
        assert!(matches!(
            lorentz_commutator_b(&one, &b, &scales(), &reg()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn combined_zero_fields() {
        let ax = axes(32, 16, true);
        let z = GridField::zeros(ax.clone()).unwrap();
        let e: Vec<GridField> = (0..2).map(|_| GridField::zeros(vec![ax[0]]).unwrap()).collect();
        let b = GridField::zeros(vec![ax[0]]).unwrap();
        let r = combined_commutator(&z, &e, Some(&b), &scales(), &reg()).unwrap();
        assert_eq!(r.norm, 0.0);
        assert_eq!(r.identity_residual, 0.0);
    }

    #[test]
    fn frozen_constants_are_positive() {
        for (_, c) in frozen_constants().as_array() {
            assert!(c.is_finite() && c > 0.0);
        }
    }

    #[test]
    fn synthetic_inputs_respect_frozen_bounds() {
        let c = frozen_constants();
        let suite = calibration_suite_case(1000);
        let r = bound_ratios(&suite.u, &suite.e, &suite.b, &suite.scales, &suite.reg).unwrap();
        for ((name, ratio), (_, limit)) in r.as_array().iter().zip(c.as_array()) {
            assert!(*ratio <= limit, "{name}: {ratio} > {limit}");
        }
    }

    pub(crate) struct Case {
        pub u: GridField,
        pub e: Vec<GridField>,
        pub b: GridField,
        pub scales: SmoothingScales,
        pub reg: RegularityClass,
    }

    fn calibration_suite_case(seed: u64) -> Case {
        let c = super::calibration_case(seed).unwrap();
        Case {
            u: c.u,
            e: c.e,
            b: c.b,
            scales: c.scales,
            reg: c.reg,
        }
    }

    #[test]
    fn synthesized_case_is_well_formed() {
        let c = calibration_suite_case(3);
        assert_eq!(c.u.ndim(), 3);
        let spec = SynthSpec::new(c.reg.clone(), vec![c.u.axes()[0]], 3).with_spectrum(Spectrum::Tensor);
        assert!(synth_field(&spec).is_ok());
    }
}
