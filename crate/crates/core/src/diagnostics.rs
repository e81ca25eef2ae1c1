//! Entropy functionals, conservation audits, the mollified weak-form
//! residual and log-log rate fitting.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::commutators::{free_streaming_commutator, lorentz_commutator_b, lorentz_commutator_e};
use crate::error::{Error, Result};
use crate::fields::{AxisKind, GridField};
use crate::kernels::{kernel_for, mollify, mollify_coefficient, Coefficient, SmoothingScales};
use crate::norms::{Exponent, RegularityClass};
use crate::relativistic::velocity_component;
use crate::solver::SimulationState;

/// Entropy functions `G: ℝ⁺ → ℝ⁺`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EntropyFunction {
    Zero,
    /// `G(t) = t`.
    Mass,
    /// `G(t) = t²`.
    Square,
    /// `G(t) = t log(1 + t)`.
    TLog,
    /// `G(t) = M (1 − e^{−t/M})`, a smooth bounded stand-in for `min(t, M)`.
    SoftMin { cap: f64 },
}

impl EntropyFunction {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            EntropyFunction::Zero => 0.0,
            EntropyFunction::Mass => t,
            EntropyFunction::Square => t * t,
            EntropyFunction::TLog => t * t.ln_1p(),
            EntropyFunction::SoftMin { cap } => -cap * (-t / cap).exp_m1(),
        }
    }

    pub fn derivative(&self, t: f64) -> f64 {
        match *self {
            EntropyFunction::Zero => 0.0,
            EntropyFunction::Mass => 1.0,
            EntropyFunction::Square => 2.0 * t,
            EntropyFunction::TLog => t.ln_1p() + t / (1.0 + t),
            EntropyFunction::SoftMin { cap } => (-t / cap).exp(),
        }
    }

    /// Membership in the superlinear family: `G(t)/t → ∞`.
    pub fn superlinear(&self) -> bool {
        matches!(self, EntropyFunction::Square | EntropyFunction::TLog)
    }

    pub fn name(&self) -> &'static str {
        match self {
            EntropyFunction::Zero => "zero",
            EntropyFunction::Mass => "mass",
            EntropyFunction::Square => "square",
            EntropyFunction::TLog => "tlog",
            EntropyFunction::SoftMin { .. } => "softmin",
        }
    }
}

impl fmt::Display for EntropyFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EntropyFunction::SoftMin { cap } => write!(f, "softmin:{cap}"),
            other => f.write_str(other.name()),
        }
    }
}

impl FromStr for EntropyFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "zero" => Ok(EntropyFunction::Zero),
            "mass" | "t" => Ok(EntropyFunction::Mass),
            "square" | "t2" => Ok(EntropyFunction::Square),
            "tlog" => Ok(EntropyFunction::TLog),
            "softmin" => Ok(EntropyFunction::SoftMin { cap: 1.0 }),
            _ => match s.strip_prefix("softmin:").map(str::parse::<f64>) {
                Some(Ok(cap)) if cap > 0.0 => Ok(EntropyFunction::SoftMin { cap }),
                _ => Err(Error::invalid(
                    "entropy",
                    format!("`{s}` is not one of zero, mass, square, tlog, softmin[:M]"),
                )),
            },
        }
    }
}

fn check_density(u: &GridField) -> Result<()> {
    match u.data().iter().position(|v| *v < -1e-12) {
        Some(index) => Err(Error::NegativeDensity {
            index,
            value: u.data()[index],
        }),
        None => Ok(()),
    }
}

/// `∫∫ G(u) dς dx` by the midpoint rule.
pub fn global_entropy(u: &GridField, g: &EntropyFunction) -> Result<f64> {
    check_density(u)?;
    Ok(u.data().iter().map(|v| g.eval(v.max(0.0))).sum::<f64>() * u.cell_volume())
}

/// Relative drift between two output times.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DriftEntry {
    pub t1: f64,
    pub t2: f64,
    pub drift: f64,
}

/// `|∫G(u(t₂)) − ∫G(u(t₁))| / ∫G(u(t₁))` over all pairs `t₁ < t₂`.
pub fn entropy_drift(states: &[SimulationState], g: &EntropyFunction) -> Result<Vec<DriftEntry>> {
    let values = states
        .iter()
        .map(|s| global_entropy(&s.u, g))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::new();
    for i in 0..values.len() {
        for j in i + 1..values.len() {
            let d = (values[j] - values[i]).abs();
            out.push(DriftEntry {
                t1: states[i].time,
                t2: states[j].time,
                drift: if values[i] == 0.0 { d } else { d / values[i].abs() },
            });
        }
    }
    Ok(out)
}

pub fn max_drift(report: &[DriftEntry]) -> f64 {
    report.iter().map(|d| d.drift).fold(0.0, f64::max)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalVariant {
    Space,
    Momentum,
}

/// Time derivative weights at sample `k`: centred in the interior,
/// one-sided second order at the ends (nonuniform spacing allowed).
fn time_weights(t: &[f64], k: usize) -> [(usize, f64); 3] {
    let n = t.len();
    if n == 2 {
        let w = 1.0 / (t[1] - t[0]);
        return [(0, -w), (1, w), (1, 0.0)];
    }
    let (a, b, c) = if k == 0 {
        (0, 1, 2)
    } else if k == n - 1 {
        (n - 3, n - 2, n - 1)
    } else {
        (k - 1, k, k + 1)
    };
    // Derivative of the quadratic through (t_a, t_b, t_c) at t_k.
    let x = t[k];
    let l = |i: f64, j: f64, m: f64| (2.0 * x - j - m) / ((i - j) * (i - m));
    [(a, l(t[a], t[b], t[c])), (b, l(t[b], t[a], t[c])), (c, l(t[c], t[a], t[b]))]
}

/// Residual of the local entropy law at each output time, `L¹` over the
/// slice: `∂ₜ∫G(u)dς + ∂ₓ∫v₁G(u)dς` (space) or
/// `∂ₜ∫G(u)dx + ∇_ς·∫𝓕G(u)dx` (momentum).
pub fn local_entropy_residual(states: &[SimulationState], g: &EntropyFunction, variant: LocalVariant) -> Result<Vec<(f64, f64)>> {
    if states.len() < 2 {
        return Ok(Vec::new());
    }
    let times: Vec<f64> = states.iter().map(|s| s.time).collect();
    let mut density = Vec::with_capacity(states.len());
    let mut flux_div = Vec::with_capacity(states.len());
    for s in states {
        check_density(&s.u)?;
        let gu = s.u.map(|v| g.eval(v.max(0.0)));
        let (dens, div) = match variant {
            LocalVariant::Space => space_terms(&gu)?,
            LocalVariant::Momentum => momentum_terms(&gu, s)?,
        };
        density.push(dens);
        flux_div.push(div);
    }
    let mut out = Vec::with_capacity(states.len());
    for k in 0..states.len() {
        let w = time_weights(&times, k);
        let mut r = flux_div[k].clone();
        for (i, wi) in w {
            for (a, b) in r.data_mut().iter_mut().zip(density[i].data()) {
                *a += wi * b;
            }
        }
        out.push((times[k], r.data().iter().map(|v| v.abs()).sum::<f64>() * r.cell_volume()));
    }
    Ok(out)
}

fn integrate_momentum(f: &GridField) -> Result<GridField> {
    let x = f.axes()[0];
    let block = f.len() / x.len;
    let dv: f64 = f.axes()[1..].iter().map(|a| a.spacing()).product();
    GridField::new(vec![x], f.data().chunks(block).map(|r| r.iter().sum::<f64>() * dv).collect())
}

fn space_terms(gu: &GridField) -> Result<(GridField, GridField)> {
    let vg = GridField::from_fn(gu.axes().to_vec(), |c| velocity_component(&c[1..], 0))?.mul(gu)?;
    Ok((integrate_momentum(gu)?, integrate_momentum(&vg)?.derivative(AxisKind::X1)?))
}

fn momentum_terms(gu: &GridField, s: &SimulationState) -> Result<(GridField, GridField)> {
    let x = gu.axes()[0];
    let maxes: Vec<_> = gu.axes()[1..].to_vec();
    let block = gu.len() / x.len;
    let h = x.spacing();
    let d = maxes.len();
    let pts: Vec<Vec<f64>> = GridField::zeros(maxes.clone())?
        .axes()
        .iter()
        .map(|a| (0..a.len).map(|i| a.coord(i)).collect())
        .collect();
    let coords = |m: usize| -> Vec<f64> {
        if d == 1 {
            vec![pts[0][m]]
        } else {
            vec![pts[0][m / maxes[1].len], pts[1][m % maxes[1].len]]
        }
    };
    let mut density = vec![0.0; block];
    let mut flux = vec![vec![0.0; block]; d];
    for (ix, row) in gu.data().chunks(block).enumerate() {
        let b = s.b.as_ref().map_or(0.0, |b| b.data()[ix]);
        for (m, val) in row.iter().enumerate() {
            density[m] += val * h;
            let c = coords(m);
            let mut f = [s.e[0].data()[ix], s.e.get(1).map_or(0.0, |e| e.data()[ix])];
            if d == 2 {
                f[0] += velocity_component(&c, 1) * b;
                f[1] -= velocity_component(&c, 0) * b;
            }
            for (k, fl) in flux.iter_mut().enumerate() {
                fl[m] += f[k] * val * h;
            }
        }
    }
    let mut div = GridField::zeros(maxes.clone())?;
    for (k, fl) in flux.into_iter().enumerate() {
        div = div.add(&GridField::new(maxes.clone(), fl)?.derivative(maxes[k].kind)?)?;
    }
    Ok((GridField::new(maxes, density)?, div))
}

// ---------------------------------------------------------------------------
// Test functions and the mollified weak form
// ---------------------------------------------------------------------------

/// `b(r) = exp(−1/(1 − r²))` on `|r| < 1`.
fn bump(r: f64) -> (f64, f64) {
    if r.abs() >= 1.0 {
        return (0.0, 0.0);
    }
    let q = 1.0 - r * r;
    let v = (-1.0 / q).exp();
    (v, -2.0 * r / (q * q) * v)
}

/// Product of one-dimensional bumps in `t`, each position axis (periodic
/// distance) and each momentum axis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub t_center: f64,
    pub t_width: f64,
    /// Per position axis: (centre, width, period).
    pub x: Vec<(f64, f64, f64)>,
    /// Per momentum axis: (centre, width).
    pub s: Vec<(f64, f64)>,
}

/// Value and partial derivatives of a test function at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct TestValue {
    pub value: f64,
    pub dt: f64,
    pub dx: Vec<f64>,
    pub ds: Vec<f64>,
}

impl TestFunction {
    pub fn new(t: (f64, f64), x: Vec<(f64, f64, f64)>, s: Vec<(f64, f64)>) -> Result<Self> {
        if !(t.1 > 0.0) || x.iter().any(|a| !(a.1 > 0.0 && a.1 < 0.5 * a.2)) || s.iter().any(|a| !(a.1 > 0.0)) {
            return Err(Error::invalid(
                "test_function",
                "widths must be positive and below half the period",
            ));
        }
        Ok(TestFunction {
            t_center: t.0,
            t_width: t.1,
            x,
            s,
        })
    }

    pub fn eval(&self, t: f64, x: &[f64], s: &[f64]) -> TestValue {
        let mut factors = Vec::with_capacity(1 + x.len() + s.len());
        factors.push(bump((t - self.t_center) / self.t_width));
        let inv_t = 1.0 / self.t_width;
        for (xi, &(c, w, period)) in x.iter().zip(&self.x) {
            let d = (xi - c + 0.5 * period).rem_euclid(period) - 0.5 * period;
            factors.push(bump(d / w));
        }
        for (si, &(c, w)) in s.iter().zip(&self.s) {
            factors.push(bump((si - c) / w));
        }
        let value: f64 = factors.iter().map(|f| f.0).product();
        let partial = |k: usize, scale: f64| -> f64 {
            factors
                .iter()
                .enumerate()
                .map(|(i, f)| if i == k { f.1 * scale } else { f.0 })
                .product()
        };
        TestValue {
            value,
            dt: partial(0, inv_t),
            dx: self.x.iter().enumerate().map(|(i, a)| partial(1 + i, 1.0 / a.1)).collect(),
            ds: self.s.iter().enumerate().map(|(i, a)| partial(1 + x.len() + i, 1.0 / a.1)).collect(),
        }
    }
}

/// One time slice of `(u, E, B)` with its quadrature weight.
#[derive(Clone, Debug)]
pub struct Slice {
    pub time: f64,
    pub weight: f64,
    pub u: GridField,
    pub e: Vec<GridField>,
    pub b: Option<GridField>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RenormalizationReport {
    /// `∫G(u^{ε,σ})(∂ₜψ + v^σ·∇ₓψ + 𝓕^{ε,σ}·∇_ςψ)`.
    pub transport: f64,
    /// `∫ψ G′(u^{ε,σ}) (∇ₓ·C_fs + ∇_ς·C_L)` with the commutators `C`.
    pub pairing: f64,
    /// `transport − pairing`, zero in the continuum.
    pub defect: f64,
    /// `|transport|`.
    pub residual: f64,
}

/// The mollified weak form tested against `G′(u^{ε,σ})ψ` and integrated by
/// parts. For a weak solution the transport integral equals the commutator
/// pairing; its size is the renormalization defect at scales `(ε, σ)`.
pub fn renormalization_residual(
    slices: &[Slice],
    g: &EntropyFunction,
    psi: &TestFunction,
    scales: &SmoothingScales,
) -> Result<RenormalizationReport> {
    Ok(renormalization_family(slices, g, std::slice::from_ref(psi), scales)?[0])
}

/// [`renormalization_residual`] for several test functions at once.
pub fn renormalization_family(
    slices: &[Slice],
    g: &EntropyFunction,
    psis: &[TestFunction],
    scales: &SmoothingScales,
) -> Result<Vec<RenormalizationReport>> {
    let mut reports = vec![RenormalizationReport::default(); psis.len()];
    if matches!(g, EntropyFunction::Zero) {
        return Ok(reports);
    }
    let reg = RegularityClass::new(0.5, Exponent::Finite(1.0))?.with_field(0.5, Exponent::Infinity)?;
    for sl in slices {
        let u = &sl.u;
        let d = u.momentum_axes().len();
        let kx = kernel_for(u, scales.epsilon, AxisKind::is_position)?;
        let ks = kernel_for(u, scales.sigma, AxisKind::is_momentum)?;
        let ues = mollify(&mollify(u, &kx)?, &ks)?;
        let v_sig: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                let vi = move |c: &[f64]| velocity_component(c, i);
                mollify_coefficient(&ks, &Coefficient::Unwrapped(&vi))
            })
            .collect::<Result<_>>()?;
        let e_eps: Vec<Vec<f64>> = sl
            .e
            .iter()
            .map(|e| mollify_coefficient(&kx, &Coefficient::Periodic(e.data())))
            .collect::<Result<_>>()?;
        let b_eps = sl
            .b
            .as_ref()
            .map(|b| mollify_coefficient(&kx, &Coefficient::Periodic(b.data())))
            .transpose()?;

        let mut div = free_streaming_commutator(u, scales, Exponent::Finite(1.0))?.divergence;
        let fields_active = sl.e.iter().chain(sl.b.iter()).any(|f| f.max_abs() > 0.0);
        if fields_active {
            div = div.add(&lorentz_commutator_e(u, &sl.e, scales, &reg)?.divergence)?;
            if let Some(b) = &sl.b {
                div = div.add(&lorentz_commutator_b(u, b, scales, &reg)?.total.divergence)?;
            }
        }

        let axes = u.axes();
        let npos = u.position_axes().len();
        let block: usize = axes[npos..].iter().map(|a| a.len).product();
        let gw: Vec<f64> = ues.data().iter().map(|w| g.eval(w.max(0.0))).collect();
        let gp: Vec<f64> = ues.data().iter().zip(div.data()).map(|(w, r)| g.derivative(w.max(0.0)) * r).collect();
        let vol = u.cell_volume() * sl.weight;
        let mut idx = vec![0usize; axes.len()];
        let mut x = vec![0.0; npos];
        let mut s = vec![0.0; axes.len() - npos];
        let mut force = vec![0.0; d];
        for (psi, report) in psis.iter().zip(reports.iter_mut()) {
            let (mut transport, mut pairing) = (0.0, 0.0);
            for flat in 0..ues.len() {
                let mut rem = flat;
                for k in (0..axes.len()).rev() {
                    idx[k] = rem % axes[k].len;
                    rem /= axes[k].len;
                }
                for k in 0..npos {
                    x[k] = axes[k].coord(idx[k]);
                }
                for k in npos..axes.len() {
                    s[k - npos] = axes[k].coord(idx[k]);
                }
                let tv = psi.eval(sl.time, &x, &s);
                if tv.value == 0.0 && tv.dt == 0.0 {
                    continue;
                }
                let m = flat % block;
                let ix = flat / block;
                for (c, f) in force.iter_mut().enumerate() {
                    *f = e_eps.get(c).map_or(0.0, |e| e[ix]);
                }
                if let (Some(b), 2) = (&b_eps, d) {
                    force[0] += v_sig[1][m] * b[ix];
                    force[1] -= v_sig[0][m] * b[ix];
                }
                let mut dir = tv.dt;
                for (j, dxj) in tv.dx.iter().enumerate() {
                    dir += v_sig[j][m] * dxj;
                }
                for (c, dsc) in tv.ds.iter().enumerate() {
                    dir += force[c] * dsc;
                }
                transport += gw[flat] * dir;
                pairing += tv.value * gp[flat];
            }
            report.transport += transport * vol;
            report.pairing += pairing * vol;
        }
    }
    for r in &mut reports {
        r.defect = r.transport - r.pairing;
        r.residual = r.transport.abs();
    }
    Ok(reports)
}

/// Largest `|transport|` over a family: a discrete dual norm of the
/// renormalization defect.
pub fn family_residual(reports: &[RenormalizationReport]) -> f64 {
    reports.iter().map(|r| r.residual).fold(0.0, f64::max)
}

/// Translates of one bump: `nx` centres along the first position axis and
/// the given momentum centres, all at time `t`.
pub fn test_family(t: (f64, f64), period: f64, nx: usize, x_width: f64, s_centres: &[f64], s_width: f64) -> Result<Vec<TestFunction>> {
    let mut out = Vec::new();
    for i in 0..nx {
        for &c in s_centres {
            out.push(TestFunction::new(
                t,
                vec![(period * i as f64 / nx as f64, x_width, period)],
                vec![(c, s_width)],
            )?);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Rate fitting
// ---------------------------------------------------------------------------

/// Values at or below this are left out of a fit.
pub const FIT_FLOOR: f64 = 1e-300;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub epsilon: Vec<f64>,
    pub sigma: Vec<f64>,
    pub values: Vec<f64>,
    /// Levels left out because their value was at or below [`FIT_FLOOR`].
    pub excluded: Vec<bool>,
    pub slope: f64,
    pub intercept: f64,
    /// RMS of the log residuals.
    pub residual: f64,
    pub predicted: Option<f64>,
}

/// Least-squares slope of `log value` against `log scale`.
pub fn fit_rate(points: &[(f64, f64)]) -> Result<RateReport> {
    let excluded: Vec<bool> = points.iter().map(|&(s, v)| !(v > FIT_FLOOR && s > 0.0)).collect();
    let used: Vec<(f64, f64)> = points
        .iter()
        .zip(&excluded)
        .filter(|(_, e)| !**e)
        .map(|(&(s, v), _)| (s.ln(), v.ln()))
        .collect();
    if used.len() < 3 {
        return Err(Error::InsufficientPoints { usable: used.len() });
    }
    let n = used.len() as f64;
    let mx = used.iter().map(|p| p.0).sum::<f64>() / n;
    let my = used.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = used.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = used.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("scales", "all scales are equal"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (used.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum::<f64>() / n).sqrt();
    Ok(RateReport {
        epsilon: points.iter().map(|p| p.0).collect(),
        sigma: vec![f64::NAN; points.len()],
        values: points.iter().map(|p| p.1).collect(),
        excluded,
        slope,
        intercept,
        residual,
        predicted: None,
    })
}

impl RateReport {
    pub fn with_sigma(mut self, sigma: Vec<f64>) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_predicted(mut self, predicted: Option<f64>) -> Self {
        self.predicted = predicted;
        self
    }
}

/// Scales `σ = ε^{(κ+1)/2}` with the predicted exponent `(θκ+κ+3θ−1)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BalancedLadder {
    pub scales: Vec<SmoothingScales>,
    pub predicted: f64,
}

pub fn balanced_ladder(reg: &RegularityClass, epsilon: &[f64]) -> Result<BalancedLadder> {
    let kappa = reg
        .kappa()
        .ok_or_else(|| Error::invalid("kappa", "the balanced ladder needs kappa"))?;
    let scales = epsilon
        .iter()
        .map(|&e| SmoothingScales::phase_space(e, e.powf(0.5 * (kappa + 1.0))))
        .collect::<Result<Vec<_>>>()?;
    Ok(BalancedLadder {
        scales,
        predicted: reg.predicted_exponent().expect("kappa is present"),
    })
}

/// `ε₀ r^{−k}` for `k = 0..levels`.
pub fn geometric_levels(eps0: f64, ratio: f64, levels: usize) -> Vec<f64> {
    (0..levels).map(|k| eps0 / ratio.powi(k as i32)).collect()
}
