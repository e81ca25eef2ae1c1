//! The `verify` subcommand: exact identities, pointwise lemma inequalities
//! and frozen-constant bounds on random seeded inputs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{ExperimentConfig, VerifyConfig};
use super::experiments::Outcome;
use super::report::{Assertion, ReportWriter};
use crate::commutators::{
    bound_ratios, calibration_case, free_streaming_commutator, frozen_constants, lorentz_commutator_b, lorentz_commutator_e,
    CALIBRATION_CASES,
};
use crate::fields::{synth_field, Axis, AxisKind, GridField, Spectrum, SynthSpec};
use crate::kernels::{make_mollifier, mollify, MollifierProfile, SmoothingScales};
use crate::norms::{gagliardo_seminorm, lp_norm, sobolev_norm, theta_annular, theta_annular_bruteforce, Exponent, RegularityClass};
use crate::relativistic::{check_velocity_increment, check_velocity_mollification, velocity_jacobian};
use crate::Result;

/// One cell of the pass matrix.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckRow {
    pub group: &'static str,
    pub check: &'static str,
    pub seed: u64,
    pub checks: usize,
    pub violations: usize,
    /// Largest `lhs − rhs` for inequalities, largest residual or ratio otherwise.
    pub worst: f64,
    pub limit: f64,
    pub pass: bool,
}

impl CheckRow {
    pub const HEADER: [&'static str; 8] = ["group", "check", "seed", "checks", "violations", "worst", "limit", "pass"];
}

/// Running tally of `lhs ≤ rhs + slack` checks.
struct Tally {
    checks: usize,
    violations: usize,
    worst: f64,
}

impl Tally {
    fn new() -> Self {
        Tally {
            checks: 0,
            violations: 0,
            worst: f64::NEG_INFINITY,
        }
    }

    fn push(&mut self, lhs: f64, rhs: f64, slack: f64) {
        let gap = lhs - rhs;
        self.checks += 1;
        if !(gap <= slack) {
            self.violations += 1;
        }
        self.worst = if gap.is_nan() { f64::NAN } else { self.worst.max(gap) };
    }

    fn merge(mut self, o: Tally) -> Tally {
        self.checks += o.checks;
        self.violations += o.violations;
        self.worst = if self.worst.is_nan() || o.worst.is_nan() { f64::NAN } else { self.worst.max(o.worst) };
        self
    }
}

/// The pointwise inequality families.
pub const LEMMA_CHECKS: [&str; 6] = ["velocity_increment", "velocity_mollification", "velocity_jacobian", "contraction_lp", "contraction_wtp", "domination"];

const BLOCK: usize = 4096;

fn rng_for(seed: u64, family: usize, block: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((family as u64) << 32) | block as u64);
    rng
}

fn log_uniform(rng: &mut impl Rng, lo: f64, hi: f64) -> f64 {
    10f64.powf(rng.gen_range(lo..hi))
}

/// Random direction in `d` dimensions with log-uniform magnitude `10^[lo, hi)`.
fn random_vector(rng: &mut impl Rng, d: usize, lo: f64, hi: f64) -> Vec<f64> {
    let magnitude = log_uniform(rng, lo, hi);
    loop {
        let v: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let n = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if n > 1e-3 && n <= 1.0 {
            return v.into_iter().map(|a| a * magnitude / n).collect();
        }
    }
}

fn random_exponent(rng: &mut impl Rng) -> Exponent {
    match rng.gen_range(0..3) {
        0 => Exponent::Finite(1.0),
        1 => Exponent::Finite(2.0),
        _ => Exponent::Infinity,
    }
}

/// Small random 1-D field and a random admissible mollifier for it.
struct Sample {
    f: GridField,
    fe: GridField,
    eps: f64,
    theta: f64,
    p: Exponent,
}

const SAMPLE_POINTS: usize = 16;

fn sample(rng: &mut impl Rng, axis: Axis) -> Result<Sample> {
    let f = GridField::new(vec![axis], (0..axis.len).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let eps = rng.gen_range(2.0 * axis.spacing()..=0.25 * axis.extent);
    let fe = mollify(&f, &make_mollifier(MollifierProfile::Friedrichs, eps, &[axis])?)?;
    Ok(Sample {
        f,
        fe,
        eps,
        theta: rng.gen_range(0.05..0.95),
        p: random_exponent(rng),
    })
}

/// Runs `count` checks of one family; deterministic for a given seed.
fn lemma_family(family: usize, seed: u64, count: usize, slack: f64) -> Result<Tally> {
    let axis = Axis::periodic(AxisKind::X1, 1.0, SAMPLE_POINTS)?;
    let momentum = [
        Axis::centered(AxisKind::S1, 1.0, 64)?,
        Axis::centered(AxisKind::S2, 1.0, 64)?,
    ];
    let velocity_kernel = make_mollifier(MollifierProfile::Friedrichs, 0.05, &momentum)?;
    let blocks = count.div_ceil(BLOCK);
    let tallies = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = rng_for(seed, family, b);
            let mut t = Tally::new();
            for _ in 0..BLOCK.min(count - b * BLOCK) {
                match LEMMA_CHECKS[family] {
                    "velocity_increment" => {
                        let s = random_vector(&mut rng, 3, -3.0, 3.0);
                        let w = random_vector(&mut rng, 3, -6.0, 3.0);
                        let r = check_velocity_increment(&s, &w)?;
                        t.push(r.difference, r.bound, slack);
                    }
                    "velocity_mollification" => {
                        let s: Vec<f64> = (0..2).map(|_| rng.gen_range(-5.0..5.0)).collect();
                        let r = check_velocity_mollification(&s, &velocity_kernel)?;
                        t.push(r.difference, r.bound, slack);
                    }
                    "velocity_jacobian" => {
                        let s = random_vector(&mut rng, 3, -3.0, 3.0);
                        t.push(velocity_jacobian(&s)?.operator_norm(), 2.0, slack);
                    }
                    "contraction_lp" => {
                        let x = sample(&mut rng, axis)?;
                        t.push(lp_norm(&x.fe, x.p), lp_norm(&x.f, x.p), slack);
                    }
                    "contraction_wtp" => {
                        let x = sample(&mut rng, axis)?;
                        t.push(gagliardo_seminorm(&x.fe, x.theta, x.p)?, gagliardo_seminorm(&x.f, x.theta, x.p)?, slack);
                    }
                    _ => {
                        let x = sample(&mut rng, axis)?;
                        let lhs = theta_annular(&x.f, x.eps, x.theta, x.p, &[AxisKind::X1])?;
                        t.push(lhs, sobolev_norm(&x.f, x.theta, x.p)?.total, slack);
                    }
                }
            }
            Ok(t)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(tallies.into_iter().fold(Tally::new(), Tally::merge))
}

fn tally_row(group: &'static str, check: &'static str, seed: u64, t: Tally, limit: f64) -> CheckRow {
    CheckRow {
        group,
        check,
        seed,
        checks: t.checks,
        violations: t.violations,
        worst: t.worst,
        limit,
        pass: t.violations == 0,
    }
}

fn value_row(group: &'static str, check: &'static str, seed: u64, value: f64, limit: f64) -> CheckRow {
    let pass = value <= limit;
    CheckRow {
        group,
        check,
        seed,
        checks: 1,
        violations: usize::from(!pass),
        worst: value,
        limit,
        pass,
    }
}

/// Scale pairs of the identity suite, indexed by `seed % 4`.
pub const IDENTITY_SCALES: [(f64, f64); 4] = [(1.0 / 16.0, 1.0 / 16.0), (1.0 / 16.0, 1.0 / 32.0), (1.0 / 32.0, 1.0 / 16.0), (1.0 / 32.0, 1.0 / 32.0)];

/// Relative residuals of the free-streaming, electric and three-part
/// magnetic decompositions and of the vanishing curl integral, in the order
/// of [`IDENTITY_CHECKS`].
pub const IDENTITY_CHECKS: [&str; 4] = ["free_streaming", "electric", "magnetic", "i1"];

pub fn identity_residuals(nx: usize, ns: usize, seed: u64) -> Result<[f64; 4]> {
    let reg = RegularityClass::new(0.5, Exponent::Finite(2.0))?.with_field(0.5, Exponent::Finite(2.0))?;
    let x = Axis::periodic(AxisKind::X1, 1.0, nx)?;
    let axes = vec![x, Axis::centered(AxisKind::S1, 1.0, ns)?, Axis::centered(AxisKind::S2, 1.0, ns)?];
    let field = |axes: Vec<Axis>, s: u64| {
        synth_field(&SynthSpec::new(reg.clone(), axes, s).with_spectrum(Spectrum::Tensor).with_cutoff(false))
    };
    let base = seed.wrapping_mul(4);
    let u = field(axes, base)?;
    let e = vec![field(vec![x], base + 1)?, field(vec![x], base + 2)?];
    let b = field(vec![x], base + 3)?;
    let (eps, sig) = IDENTITY_SCALES[(seed % 4) as usize];
    let sc = SmoothingScales::phase_space(eps, sig)?;
    let fs = free_streaming_commutator(&u, &sc, reg.p())?;
    let te = lorentz_commutator_e(&u, &e, &sc, &reg)?;
    let tb = lorentz_commutator_b(&u, &b, &sc, &reg)?;
    Ok([
        fs.report.identity_residual,
        te.report.identity_residual,
        tb.total.report.identity_residual,
        tb.i1_relative,
    ])
}

/// Largest relative gap between banded and brute-force annular moduli.
pub fn oracle_gap(seed: u64) -> Result<f64> {
    let axis = Axis::periodic(AxisKind::X1, 1.0, 1 << 10)?;
    let mut rng = rng_for(seed, LEMMA_CHECKS.len(), 0);
    let f = GridField::new(vec![axis], (0..axis.len).map(|_| rng.gen_range(-1.0..1.0)).collect())?;
    let mut worst = 0.0f64;
    for (eps, p) in [(1.0 / 64.0, Exponent::Finite(2.0)), (1.0 / 16.0, Exponent::Finite(1.0)), (1.0 / 128.0, Exponent::Infinity)] {
        let theta = rng.gen_range(0.05..0.95);
        let a = theta_annular(&f, eps, theta, p, &[AxisKind::X1])?;
        let b = theta_annular_bruteforce(&f, eps, theta, p, &[AxisKind::X1])?;
        worst = worst.max((a - b).abs() / b.abs().max(f64::MIN_POSITIVE));
    }
    Ok(worst)
}

const ORACLE_TOLERANCE: f64 = 1e-12;

/// `points` checks of every inequality family for each seed.
pub fn lemma_rows(seeds: &[u64], points: usize, slack: f64) -> Result<Vec<CheckRow>> {
    let jobs: Vec<(usize, u64)> = seeds.iter().flat_map(|&s| (0..LEMMA_CHECKS.len()).map(move |f| (f, s))).collect();
    let tallies = jobs
        .par_iter()
        .map(|&(f, s)| lemma_family(f, s, points, slack))
        .collect::<Result<Vec<_>>>()?;
    Ok(jobs
        .iter()
        .zip(tallies)
        .map(|(&(f, s), t)| tally_row("lemma", LEMMA_CHECKS[f], s, t, slack))
        .collect())
}

/// Every row of the pass matrix for `seeds` consecutive seeds.
pub fn pass_matrix(cfg: &VerifyConfig, first_seed: u64) -> Result<Vec<CheckRow>> {
    let seeds: Vec<u64> = (0..cfg.seeds as u64).map(|i| first_seed + i).collect();
    let mut rows = Vec::new();
    for &seed in &seeds {
        let res = identity_residuals(cfg.nx, cfg.ns, seed)?;
        for (name, r) in IDENTITY_CHECKS.iter().zip(res) {
            rows.push(value_row("identity", name, seed, r, cfg.identity_tolerance));
        }
        rows.push(value_row("oracle", "theta_annular", seed, oracle_gap(seed)?, ORACLE_TOLERANCE));
    }
    rows.extend(lemma_rows(&seeds, cfg.points, cfg.slack)?);
    if cfg.bounds {
        let c = frozen_constants();
        for &seed in &seeds {
            let case = calibration_case(CALIBRATION_CASES as u64 + seed)?;
            let r = bound_ratios(&case.u, &case.e, &case.b, &case.scales, &case.reg)?;
            for ((name, ratio), (_, constant)) in r.as_array().into_iter().zip(c.as_array()) {
                rows.push(value_row("bounds", name, seed, ratio / constant, 1.0));
            }
        }
    }
    Ok(rows)
}

/// Check-by-seed table of `ok` / `FAIL` cells.
pub fn render_matrix(rows: &[CheckRow]) -> String {
    let mut seeds: Vec<u64> = rows.iter().map(|r| r.seed).collect();
    seeds.sort_unstable();
    seeds.dedup();
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.group, r.check)) {
            keys.push((r.group, r.check));
        }
    }
    let width = keys.iter().map(|(g, c)| g.len() + c.len() + 1).max().unwrap_or(0);
    let mut s = format!("{:width$}", "check");
    for seed in &seeds {
        s += &format!(" {:>6}", format!("s{seed}"));
    }
    s.push('\n');
    for (g, c) in keys {
        s += &format!("{:width$}", format!("{g}/{c}"));
        for seed in &seeds {
            let cell = rows
                .iter()
                .find(|r| r.group == g && r.check == c && r.seed == *seed)
                .map_or("-", |r| if r.pass { "ok" } else { "FAIL" });
            s += &format!(" {cell:>6}");
        }
        s.push('\n');
    }
    s
}

pub fn run_verify(config: &ExperimentConfig, out: &mut ReportWriter) -> Result<(Outcome, String)> {
    let cfg = &config.verify;
    let rows = pass_matrix(cfg, config.seed)?;
    out.write_csv(&format!("verify_matrix_seed{}.csv", config.seed), &CheckRow::HEADER, &rows)?;
    let mut outcome = Outcome::default();
    let mut keys: Vec<(&str, &str)> = Vec::new();
    for r in &rows {
        if !keys.contains(&(r.group, r.check)) {
            keys.push((r.group, r.check));
        }
    }
    for (g, c) in keys {
        let mine: Vec<&CheckRow> = rows.iter().filter(|r| r.group == g && r.check == c).collect();
        let worst = mine.iter().map(|r| r.worst).fold(f64::NEG_INFINITY, f64::max);
        let limit = mine[0].limit;
        let mut a = Assertion::at_most(format!("{g}/{c}"), worst, limit);
        a.pass = mine.iter().all(|r| r.pass);
        outcome.assertions.push(a);
    }
    let total: usize = rows.iter().filter(|r| r.group == "lemma").map(|r| r.checks).sum();
    outcome
        .details
        .insert("lemma_checks".into(), serde_json::json!(total));
    Ok((outcome, render_matrix(&rows)))
}
