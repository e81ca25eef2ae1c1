//! The `rates`, `endpoint` and `simulate` experiments.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{EndpointConfig, ExperimentConfig, RatesConfig, SimulateConfig};
use super::report::{ladder_rows, Assertion, ReportWriter, Row, Tag};
use crate::commutators::{combined_commutator, free_streaming_commutator, lorentz_commutator_e};
use crate::diagnostics::{
    balanced_ladder, entropy_drift, family_residual, fit_rate, geometric_levels, local_entropy_residual, max_drift,
    renormalization_family, test_family, LocalVariant, RateReport, Slice,
};
use crate::fields::synth::synth_modes;
use crate::fields::{container, synth_field, Axis, AxisKind, GridField, Spectrum, SynthSpec};
use crate::kernels::{make_mollifier, mollify, MollifierProfile, SmoothingScales};
use crate::norms::{lp_norm, Exponent, Rational, RegularityClass};
use crate::relativistic::velocity_component;
use crate::solver::{perturbed_equilibrium, run, symmetric_axis, EquilibriumSpec, SchemeConfig, SimulationState};
use crate::{Error, Result};

/// What an experiment established, before the summary is written.
#[derive(Clone, Debug, Default, Serialize)]
pub struct Outcome {
    pub assertions: Vec<Assertion>,
    pub warnings: Vec<String>,
    pub details: serde_json::Map<String, serde_json::Value>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|a| a.pass)
    }

    fn detail(&mut self, key: &str, value: serde_json::Value) {
        self.details.insert(key.into(), value);
    }
}

fn rough_field(class: &RegularityClass, axes: Vec<Axis>, seed: u64) -> Result<GridField> {
    synth_field(&SynthSpec::new(class.clone(), axes, seed).with_spectrum(Spectrum::Tensor).with_cutoff(false))
}

fn field_class(reg: &RegularityClass) -> Result<RegularityClass> {
    let kappa = reg.kappa_exact().ok_or_else(|| Error::invalid("kappa", "missing"))?;
    let q = reg.q().ok_or_else(|| Error::invalid("q", "missing"))?;
    RegularityClass::exact(kappa, q)
}

fn phase_axes(nx: usize, x_extent: f64, ns: usize, s_extent: f64, d: usize) -> Result<Vec<Axis>> {
    let mut axes = vec![Axis::periodic(AxisKind::X1, x_extent, nx)?];
    for kind in [AxisKind::S1, AxisKind::S2].into_iter().take(d) {
        axes.push(Axis::centered(kind, s_extent, ns)?);
    }
    Ok(axes)
}

/// `u`, one `E` component per momentum axis and, in 1D2V, `B`; seeds
/// `4s, 4s+1, 4s+2, 4s+3`.
struct Inputs {
    u: GridField,
    e: Vec<GridField>,
    b: Option<GridField>,
}

fn synthesize_inputs(reg: &RegularityClass, axes: Vec<Axis>, seed: u64) -> Result<Inputs> {
    let x = axes[0];
    let d = axes.len() - 1;
    let fc = field_class(reg)?;
    let base = seed.wrapping_mul(4);
    let u = rough_field(&RegularityClass::exact(reg.theta_exact(), reg.p())?, axes, base)?;
    let e = (0..d)
        .map(|i| rough_field(&fc, vec![x], base + 1 + i as u64))
        .collect::<Result<Vec<_>>>()?;
    let b = if d == 2 { Some(rough_field(&fc, vec![x], base + 3)?) } else { None };
    Ok(Inputs { u, e, b })
}

fn fitted(points: &[(f64, f64)], sigma: Vec<f64>, predicted: Option<f64>) -> Result<RateReport> {
    Ok(fit_rate(points)?.with_sigma(sigma).with_predicted(predicted))
}

// ---------------------------------------------------------------------------
// rates
// ---------------------------------------------------------------------------

/// `‖f^ε − f‖_p` and `‖∂ₓf^ε‖_p` on a dyadic ladder for one synthetic field.
pub fn mollification_ladder(class: &RegularityClass, n: usize, eps0: f64, levels: usize, seed: u64) -> Result<(RateReport, RateReport)> {
    let x = Axis::periodic(AxisKind::X1, 1.0, n)?;
    let f = synth_field(&SynthSpec::new(class.clone(), vec![x], seed))?;
    let p = class.p();
    let eps = geometric_levels(eps0, 2.0, levels);
    let values = eps
        .par_iter()
        .map(|&e| {
            let k = make_mollifier(MollifierProfile::Friedrichs, e, &[x])?;
            let fe = mollify(&f, &k)?;
            Ok((lp_norm(&fe.sub(&f)?, p), lp_norm(&fe.derivative(AxisKind::X1)?, p)))
        })
        .collect::<Result<Vec<_>>>()?;
    let theta = class.theta();
    let diff: Vec<(f64, f64)> = eps.iter().zip(&values).map(|(&e, v)| (e, v.0)).collect();
    let grad: Vec<(f64, f64)> = eps.iter().zip(&values).map(|(&e, v)| (e, v.1)).collect();
    let none = vec![f64::NAN; eps.len()];
    Ok((fitted(&diff, none.clone(), Some(theta))?, fitted(&grad, none, Some(theta - 1.0))?))
}

/// Free-streaming and `T_E` norms along the balanced ladder, with the
/// identity residual of each level.
pub struct CommutatorLadder {
    pub free_streaming: RateReport,
    pub electric: RateReport,
    pub fs_residuals: Vec<f64>,
    pub te_residuals: Vec<f64>,
}

pub fn commutator_ladder(reg: &RegularityClass, axes: Vec<Axis>, eps: &[f64], seed: u64) -> Result<CommutatorLadder> {
    let inputs = synthesize_inputs(reg, axes, seed)?;
    let ladder = balanced_ladder(reg, eps)?;
    let levels = ladder
        .scales
        .par_iter()
        .map(|sc| {
            let fs = free_streaming_commutator(&inputs.u, sc, reg.p())?.report;
            let te = lorentz_commutator_e(&inputs.u, &inputs.e, sc, reg)?.report;
            Ok((fs, te))
        })
        .collect::<Result<Vec<_>>>()?;
    let sigma: Vec<f64> = ladder.scales.iter().map(|s| s.sigma).collect();
    let pts = |f: &dyn Fn(usize) -> f64| -> Vec<(f64, f64)> { (0..eps.len()).map(|i| (eps[i], f(i))).collect() };
    Ok(CommutatorLadder {
        free_streaming: fitted(&pts(&|i| levels[i].0.norm), sigma.clone(), Some(ladder.predicted))?,
        electric: fitted(&pts(&|i| levels[i].1.norm), sigma, Some(ladder.predicted))?,
        fs_residuals: levels.iter().map(|l| l.0.identity_residual).collect(),
        te_residuals: levels.iter().map(|l| l.1.identity_residual).collect(),
    })
}

fn rates_tag(cfg: &RatesConfig, theta: Rational, p: Exponent, seed: u64) -> String {
    Tag {
        theta,
        kappa: Some(cfg.kappa),
        p,
        q: Some(cfg.q),
        seed,
    }
    .render()
}

pub fn run_rates(config: &ExperimentConfig, out: &mut ReportWriter) -> Result<Outcome> {
    let cfg = &config.rates;
    let seed = config.seed;
    let mut outcome = Outcome::default();

    let classes = cfg
        .mollify_classes
        .iter()
        .map(|c| RegularityClass::exact(c.theta, c.p))
        .collect::<Result<Vec<_>>>()?;
    let ladders = classes
        .par_iter()
        .map(|c| mollification_ladder(c, cfg.mollify_points, cfg.mollify_epsilon0, cfg.mollify_levels, seed))
        .collect::<Result<Vec<_>>>()?;
    let mut series = Vec::new();
    for (c, (diff, grad)) in cfg.mollify_classes.iter().zip(&ladders) {
        let tag = rates_tag(cfg, c.theta, c.p, seed);
        out.write_csv(&format!("rates_mollify-difference_{tag}.csv"), &Row::HEADER, &ladder_rows(diff, None))?;
        out.write_csv(&format!("rates_mollify-gradient_{tag}.csv"), &Row::HEADER, &ladder_rows(grad, None))?;
        let th = c.theta.to_f64();
        let label = format!("theta={} p={}", c.theta, c.p);
        outcome.assertions.push(Assertion::within(format!("mollification difference slope ({label})"), diff.slope, th, cfg.mollify_tolerance));
        outcome.assertions.push(Assertion::within(format!("mollified gradient slope ({label})"), grad.slope, th - 1.0, cfg.mollify_tolerance));
        series.push(json!({ "theta": c.theta, "p": c.p, "difference_slope": diff.slope, "gradient_slope": grad.slope }));
    }
    outcome.detail("mollification", series.into());

    let reg = cfg.regularity().map_err(|e| Error::invalid("rates", e.to_string()))?;
    let axes = phase_axes(cfg.nx, cfg.x_extent, cfg.ns, cfg.s_extent, cfg.momentum_dim)?;
    let eps = geometric_levels(cfg.epsilon0, cfg.ratio, cfg.levels);
    let lad = commutator_ladder(&reg, axes, &eps, seed)?;
    let tag = rates_tag(cfg, cfg.theta, cfg.p, seed);
    out.write_csv(&format!("rates_free-streaming_{tag}.csv"), &Row::HEADER, &ladder_rows(&lad.free_streaming, Some(&lad.fs_residuals)))?;
    out.write_csv(&format!("rates_electric_{tag}.csv"), &Row::HEADER, &ladder_rows(&lad.electric, Some(&lad.te_residuals)))?;
    let predicted = reg.predicted_exponent().expect("kappa is set");
    outcome.assertions.push(Assertion::within("free-streaming commutator slope", lad.free_streaming.slope, predicted, cfg.tolerance));
    outcome.assertions.push(Assertion::within("electric commutator slope", lad.electric.slope, predicted, cfg.tolerance));
    outcome.detail(
        "commutators",
        json!({
            "predicted": predicted,
            "free_streaming_slope": lad.free_streaming.slope,
            "electric_slope": lad.electric.slope,
            "max_identity_residual": lad.fs_residuals.iter().chain(&lad.te_residuals).fold(0.0f64, |m, v| m.max(*v)),
        }),
    );
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// endpoint
// ---------------------------------------------------------------------------

/// Combined commutator norms along the balanced ladder.
pub fn combined_ladder(reg: &RegularityClass, axes: Vec<Axis>, eps: &[f64], seed: u64) -> Result<(RateReport, Vec<f64>)> {
    let inputs = synthesize_inputs(reg, axes, seed)?;
    let ladder = balanced_ladder(reg, eps)?;
    let reports = ladder
        .scales
        .par_iter()
        .map(|sc| combined_commutator(&inputs.u, &inputs.e, inputs.b.as_ref(), sc, reg))
        .collect::<Result<Vec<_>>>()?;
    let pts: Vec<(f64, f64)> = eps.iter().zip(&reports).map(|(&e, r)| (e, r.norm)).collect();
    let sigma = ladder.scales.iter().map(|s| s.sigma).collect();
    Ok((
        fitted(&pts, sigma, Some(ladder.predicted))?,
        reports.iter().map(|r| r.identity_residual).collect(),
    ))
}

/// Settings of the renormalization residual sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct ResidualSweep {
    pub nx: usize,
    pub x_extent: f64,
    pub ns: usize,
    pub s_extent: f64,
    pub slices: usize,
    pub translates: usize,
}

/// Residual of the renormalized weak form for the exact free-streaming
/// solution `u = (1.2 max|g| + g(x − v t)) exp(−ς²)`, `E = 0`, where `g` is a
/// synthetic field of regularity `(θ, p)`. Returns `(ε, σ, residual, defect)`
/// per level, with the residual the largest `|A|` over the test family.
pub fn residual_sweep(
    reg: &RegularityClass,
    sweep: &ResidualSweep,
    g_fn: &crate::diagnostics::EntropyFunction,
    eps: &[f64],
    seed: u64,
) -> Result<Vec<(f64, f64, f64, f64)>> {
    let x = Axis::periodic(AxisKind::X1, sweep.x_extent, sweep.nx)?;
    let s = symmetric_axis(AxisKind::S1, sweep.s_extent, sweep.ns)?;
    let class = RegularityClass::exact(reg.theta_exact(), reg.p())?;
    let modes = synth_modes(&SynthSpec::new(class, vec![x], seed))?;
    let g = |y: f64| modes.iter().map(|m| m.eval(&[y])).sum::<f64>();
    let probe = 8 * sweep.nx;
    let gmax = (0..probe)
        .map(|i| g(sweep.x_extent * i as f64 / probe as f64).abs())
        .fold(0.0, f64::max);
    let nt = sweep.slices;
    let zero = GridField::zeros(vec![x])?;
    let slices = (0..nt)
        .into_par_iter()
        .map(|k| {
            let t = (k as f64 + 0.5) / nt as f64;
            let u = GridField::from_fn(vec![x, s], |c| {
                let y = c[0] - velocity_component(&c[1..], 0) * t;
                (1.2 * gmax + g(y)) * (-c[1] * c[1]).exp()
            })?;
            Ok(Slice {
                time: t,
                weight: 1.0 / nt as f64,
                u,
                e: vec![zero.clone()],
                b: None,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let family = test_family((0.5, 0.4), sweep.x_extent, sweep.translates, 0.3 * sweep.x_extent, &[-0.5, 0.5], 1.0)?;
    let ladder = balanced_ladder(reg, eps)?;
    ladder
        .scales
        .par_iter()
        .map(|sc: &SmoothingScales| {
            let reports = renormalization_family(&slices, g_fn, &family, sc)?;
            let defect = reports.iter().map(|r| r.defect.abs()).fold(0.0, f64::max);
            Ok((sc.epsilon, sc.sigma, family_residual(&reports), defect))
        })
        .collect()
}

fn endpoint_tag(cfg: &EndpointConfig, seed: u64) -> String {
    Tag {
        theta: cfg.theta,
        kappa: Some(cfg.kappa),
        p: cfg.p,
        q: Some(cfg.q),
        seed,
    }
    .render()
}

pub fn run_endpoint(config: &ExperimentConfig, out: &mut ReportWriter) -> Result<Outcome> {
    let cfg = &config.endpoint;
    let seed = config.seed;
    let mut outcome = Outcome::default();
    let reg = cfg.regularity().map_err(|e| Error::invalid("endpoint", e.to_string()))?;
    let g = cfg.entropy().map_err(|e| Error::invalid("entropy", e.to_string()))?;
    let crit = reg.criticality().expect("kappa is set");
    let predicted = crit.to_f64() / 2.0;
    let regime = match crit.signum() {
        1 => "supercritical",
        0 => "critical",
        _ => "subcritical",
    };
    outcome.detail("criticality", json!(crit.to_string()));
    outcome.detail("criticality_value", json!(crit.to_f64()));
    outcome.detail("regime", json!(regime));
    outcome.detail("predicted_slope", json!(predicted));
    if crit.signum() < 0 {
        outcome.warnings.push(format!(
            "subcritical regularity: theta*kappa + kappa + 3*theta - 1 = {crit} < 0; slopes are recorded without assertions"
        ));
    }

    let tag = endpoint_tag(cfg, seed);
    let eps = geometric_levels(cfg.epsilon0, cfg.ratio, cfg.levels);
    let axes = phase_axes(cfg.nx, cfg.x_extent, cfg.ns, cfg.s_extent, cfg.momentum_dim)?;
    let (combined, residuals) = combined_ladder(&reg, axes, &eps, seed)?;
    out.write_csv(&format!("endpoint_combined_{tag}.csv"), &Row::HEADER, &ladder_rows(&combined, Some(&residuals)))?;
    outcome.detail("combined_slope", json!(combined.slope));
    match crit.signum() {
        0 => outcome.assertions.push(Assertion::at_least("combined commutator slope", combined.slope, -cfg.critical_tolerance)),
        1 => outcome
            .assertions
            .push(Assertion::at_least("combined commutator slope", combined.slope, predicted - cfg.supercritical_tolerance)),
        _ => {}
    }

    let sweep = ResidualSweep {
        nx: cfg.nx,
        x_extent: cfg.x_extent,
        ns: cfg.residual_ns,
        s_extent: cfg.residual_s_extent,
        slices: cfg.residual_slices,
        translates: cfg.residual_translates,
    };
    let levels = residual_sweep(&reg, &sweep, &g, &eps, seed)?;
    let pts: Vec<(f64, f64)> = levels.iter().map(|l| (l.0, l.2)).collect();
    let rep = fitted(&pts, levels.iter().map(|l| l.1).collect(), None)?;
    let defects: Vec<f64> = levels.iter().map(|l| l.3).collect();
    out.write_csv(&format!("endpoint_residual_{tag}.csv"), &Row::HEADER, &ladder_rows(&rep, Some(&defects)))?;
    let worst_ratio = levels.windows(2).map(|w| w[1].2 / w[0].2).fold(0.0, f64::max);
    outcome.detail("residual_slope", json!(rep.slope));
    outcome.detail("residual_worst_ratio", json!(worst_ratio));
    if crit.signum() >= 0 {
        outcome.assertions.push(Assertion::at_most(
            "renormalization residual ratio between consecutive levels",
            worst_ratio,
            1.0 + cfg.residual_tolerance,
        ));
    }
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointEntry {
    pub file: String,
    pub step: u64,
    pub time: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub checkpoints: Vec<CheckpointEntry>,
}

pub const MANIFEST: &str = "manifest.json";

/// Loads a checkpoint; its time and step come from the manifest next to it.
pub fn load_checkpoint(path: &Path) -> Result<SimulationState> {
    let records = container::load(path)?;
    let manifest_path = path.parent().unwrap_or(Path::new(".")).join(MANIFEST);
    let text = std::fs::read_to_string(&manifest_path)
        .map_err(|e| Error::Container(format!("cannot read {}: {e}", manifest_path.display())))?;
    let manifest: Manifest =
        serde_json::from_str(&text).map_err(|e| Error::Container(format!("{}: {e}", manifest_path.display())))?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default();
    let entry = manifest
        .checkpoints
        .iter()
        .find(|c| c.file == name)
        .ok_or_else(|| Error::Container(format!("{name} is not listed in {}", manifest_path.display())))?;
    SimulationState::from_records(records, entry.time, entry.step)
}

#[derive(Serialize)]
struct AuditRow {
    step: usize,
    time: f64,
    mass: f64,
    clipped_mass: f64,
    gauss_residual: f64,
    energy: f64,
}

#[derive(Serialize)]
struct DriftRow {
    t1: f64,
    t2: f64,
    drift: f64,
}

#[derive(Serialize)]
struct LocalRow {
    time: f64,
    space: f64,
    momentum: f64,
}

fn equilibrium(cfg: &SimulateConfig) -> EquilibriumSpec {
    EquilibriumSpec {
        nx: cfg.nx,
        ns: cfg.ns,
        momentum_dim: cfg.momentum_dim,
        wavenumber: cfg.wavenumber,
        alpha: cfg.alpha,
        temperature: cfg.temperature,
        momentum_extent: cfg.momentum_extent,
        b0: cfg.b0,
        wave: cfg.wave,
    }
}

pub fn run_simulate(config: &ExperimentConfig, out: &mut ReportWriter) -> Result<Outcome> {
    let cfg = &config.simulate;
    let mut outcome = Outcome::default();
    let g = cfg.entropy().map_err(|e| Error::invalid("entropy", e.to_string()))?;
    let initial = if cfg.resume.as_os_str().is_empty() {
        perturbed_equilibrium(&equilibrium(cfg))?
    } else {
        load_checkpoint(&cfg.resume)?
    };
    let scheme = SchemeConfig {
        dt: cfg.dt,
        order: cfg.order,
        cfl: cfg.cfl,
    };
    let start = (initial.time, initial.step);
    let traj = run(initial, &scheme, cfg.horizon, cfg.output_every)?;

    let dir = out.path("checkpoints");
    std::fs::create_dir_all(&dir)?;
    let mut manifest = Manifest::default();
    for s in &traj.states {
        let step = s.step;
        let file = format!("checkpoint_{step:08}.vrnf");
        let path: PathBuf = dir.join(&file);
        container::save(&path, &s.records())?;
        out.record(path);
        manifest.checkpoints.push(CheckpointEntry { file, step, time: s.time });
    }
    let manifest_path = dir.join(MANIFEST);
    std::fs::write(&manifest_path, serde_json::to_string_pretty(&manifest).expect("manifest serializes") + "\n")?;
    out.record(manifest_path);

    let seed = config.seed;
    let audits: Vec<AuditRow> = traj
        .audits
        .iter()
        .enumerate()
        .map(|(i, a)| AuditRow {
            step: start.1 as usize + i,
            time: a.time,
            mass: a.mass,
            clipped_mass: a.clipped_mass,
            gauss_residual: a.gauss_residual,
            energy: a.energy,
        })
        .collect();
    out.write_csv(&format!("simulate_audit_seed{seed}.csv"), &["step", "time", "mass", "clipped_mass", "gauss_residual", "energy"], &audits)?;

    let drift = entropy_drift(&traj.states, &g)?;
    let rows: Vec<DriftRow> = drift.iter().map(|d| DriftRow { t1: d.t1, t2: d.t2, drift: d.drift }).collect();
    out.write_csv(&format!("simulate_drift_{}_seed{seed}.csv", g.name()), &["t1", "t2", "drift"], &rows)?;

    let space = local_entropy_residual(&traj.states, &g, LocalVariant::Space)?;
    let momentum = local_entropy_residual(&traj.states, &g, LocalVariant::Momentum)?;
    let local: Vec<LocalRow> = space
        .iter()
        .zip(&momentum)
        .map(|(a, b)| LocalRow { time: a.0, space: a.1, momentum: b.1 })
        .collect();
    out.write_csv(&format!("simulate_local_{}_seed{seed}.csv", g.name()), &["time", "space", "momentum"], &local)?;

    let entropy = max_drift(&drift);
    outcome.assertions.push(Assertion::at_most("mass drift", traj.mass_drift(), cfg.mass_budget));
    outcome.assertions.push(Assertion::at_most(format!("entropy drift ({g})"), entropy, cfg.drift_budget));
    outcome.assertions.push(Assertion::at_most("Gauss residual", traj.max_gauss_residual(), cfg.gauss_budget));
    outcome.detail(
        "run",
        json!({
            "start_time": start.0,
            "end_time": traj.states.last().map_or(start.0, |s| s.time),
            "steps": traj.audits.len() - 1,
            "checkpoints": manifest.checkpoints.len(),
            "drift_entries": drift.len(),
            "energy_drift": traj.energy_drift(),
            "max_local_space": space.iter().map(|r| r.1).fold(0.0, f64::max),
            "max_local_momentum": momentum.iter().map(|r| r.1).fold(0.0, f64::max),
        }),
    );
    Ok(outcome)
}

/// The resolved plan printed by `--dry-run`.
pub fn plan(config: &ExperimentConfig, kind: super::config::ExperimentKind) -> String {
    use super::config::ExperimentKind as K;
    let section = toml::Value::try_from(config).expect("configuration serializes");
    let body = section
        .get(kind.name())
        .and_then(|v| toml::to_string_pretty(v).ok())
        .unwrap_or_default();
    let mut s = format!(
        "experiment: {kind}\nseed: {}\noutput_dir: {}\nthreads: {}\n\n[{kind}]\n{body}",
        config.seed,
        config.output_dir.display(),
        config.threads
    );
    let ladder = |reg: Option<RegularityClass>, eps0: f64, ratio: f64, levels: usize| -> String {
        let eps = geometric_levels(eps0, ratio, levels);
        match reg.and_then(|r| balanced_ladder(&r, &eps).ok()) {
            Some(l) => l
                .scales
                .iter()
                .map(|sc| format!("  epsilon = {:.6}, sigma = {:.6}\n", sc.epsilon, sc.sigma))
                .collect(),
            None => String::new(),
        }
    };
    match kind {
        K::Rates => {
            let c = &config.rates;
            s += &format!("\nbalanced ladder:\n{}", ladder(c.regularity().ok(), c.epsilon0, c.ratio, c.levels));
        }
        K::Endpoint => {
            let c = &config.endpoint;
            if let Ok(r) = c.regularity() {
                s += &format!("\ncriticality: {}\n", r.criticality().expect("kappa is set"));
            }
            s += &format!("balanced ladder:\n{}", ladder(c.regularity().ok(), c.epsilon0, c.ratio, c.levels));
        }
        K::Simulate => {
            let c = &config.simulate;
            let steps = (c.horizon / c.dt - 1e-9).ceil().max(0.0) as usize;
            s += &format!("\nsteps: {steps}\n");
        }
        K::Verify => {
            let c = &config.verify;
            s += &format!("\nseeds: {}..{}\n", config.seed, config.seed + c.seeds as u64);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mollification_ladder_of_smooth_field_is_steep() {
        let class = RegularityClass::new(0.5, Exponent::Finite(2.0)).unwrap();
        let (diff, grad) = mollification_ladder(&class, 1 << 10, 1.0 / 16.0, 4, 3).unwrap();
        assert_eq!(diff.values.len(), 4);
        assert_eq!(diff.predicted, Some(0.5));
        assert_eq!(grad.predicted, Some(-0.5));
        assert!(diff.values.windows(2).all(|w| w[1] < w[0]));
        assert!(grad.values.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn manifest_lookup() {
        let dir = tempfile::tempdir().unwrap();
        let s = perturbed_equilibrium(&EquilibriumSpec { nx: 16, ns: 16, ..Default::default() }).unwrap();
        let path = dir.path().join("c.vrnf");
        container::save(&path, &s.records()).unwrap();
        assert!(matches!(load_checkpoint(&path), Err(Error::Container(_))));
        let m = Manifest {
            checkpoints: vec![CheckpointEntry { file: "c.vrnf".into(), step: 7, time: 0.25 }],
        };
        std::fs::write(dir.path().join(MANIFEST), serde_json::to_string(&m).unwrap()).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!((back.step, back.time), (7, 0.25));
        assert_eq!(back.u, s.u);
    }
}
