//! Reduced-dimension relativistic Vlasov-Maxwell solver.
//!
//! Layouts: 1D1V `u(x₁, ς₁)` with `E = (E₁)` and no `B`, and 1D2V
//! `u(x₁, ς₁, ς₂)` with `E = (E₁, E₂)` and a scalar out-of-plane `B = B₃`.
//! Position is periodic; momentum is treated as periodic by the
//! interpolation and the data is expected to vanish near its edges.

pub mod maxwell;
pub mod spline;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Axis, AxisKind, GridField, Provenance};
use crate::relativistic::{lorentz_factor, velocity_component};

#[derive(Clone, Debug, PartialEq)]
pub struct SimulationState {
    pub u: GridField,
    /// One component per momentum axis, each over the position axis.
    pub e: Vec<GridField>,
    pub b: Option<GridField>,
    pub time: f64,
    pub step: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SchemeConfig {
    pub dt: f64,
    /// 1 for Lie splitting, 2 for Strang splitting.
    pub order: u8,
    /// `dt` may not exceed `cfl` times the smallest grid spacing.
    pub cfl: f64,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            dt: 0.02,
            order: 2,
            cfl: 1.0,
        }
    }
}

impl SchemeConfig {
    pub fn validate(&self, state: &SimulationState) -> Result<()> {
        if !(self.cfl > 0.0 && self.cfl <= 1.0) {
            return Err(Error::invalid("cfl", format!("{} is outside (0, 1]", self.cfl)));
        }
        if !(self.order == 1 || self.order == 2) {
            return Err(Error::invalid("order", format!("{} is not 1 or 2", self.order)));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::invalid("dt", "must be positive"));
        }
        let h = state.u.axes().iter().map(Axis::spacing).fold(f64::INFINITY, f64::min);
        let limit = self.cfl * h;
        if self.dt > limit {
            return Err(Error::CflViolation { dt: self.dt, limit });
        }
        Ok(())
    }
}

/// Charge and current densities with the neutralizing background.
#[derive(Clone, Debug, PartialEq)]
pub struct Moments {
    pub rho: GridField,
    pub j: Vec<GridField>,
    pub background: f64,
}

fn check_layout(u: &GridField) -> Result<usize> {
    let kinds = u.kinds();
    match kinds.as_slice() {
        [AxisKind::X1, AxisKind::S1] => Ok(1),
        [AxisKind::X1, AxisKind::S1, AxisKind::S2] => Ok(2),
        _ => Err(Error::AxisMismatch(format!(
            "solver layouts are (x1, s1) and (x1, s1, s2), got {kinds:?}"
        ))),
    }
}

/// Momentum coordinates of every point in a block, row-major.
fn momentum_points(u: &GridField) -> Vec<[f64; 2]> {
    let axes = &u.axes()[1..];
    match axes {
        [a] => (0..a.len).map(|i| [a.coord(i), 0.0]).collect(),
        [a, b] => (0..a.len)
            .flat_map(|i| (0..b.len).map(move |j| [a.coord(i), b.coord(j)]))
            .collect(),
        _ => unreachable!(),
    }
}

/// `ρ = ∫u dς` and `j = ∫v u dς` by midpoint quadrature.
pub fn moments(u: &GridField) -> Result<Moments> {
    let d = check_layout(u)?;
    let x = u.axes()[0];
    let block = u.len() / x.len;
    let dv: f64 = u.axes()[1..].iter().map(Axis::spacing).product();
    let pts = momentum_points(u);
    let vel: Vec<Vec<f64>> = (0..d)
        .map(|i| pts.iter().map(|p| velocity_component(&p[..d], i)).collect())
        .collect();
    let mut rho = vec![0.0; x.len];
    let mut j = vec![vec![0.0; x.len]; d];
    for (ix, row) in u.data().chunks(block).enumerate() {
        rho[ix] = row.iter().sum::<f64>() * dv;
        for c in 0..d {
            j[c][ix] = row.iter().zip(&vel[c]).map(|(f, v)| f * v).sum::<f64>() * dv;
        }
    }
    let background = rho.iter().sum::<f64>() / x.len as f64;
    Ok(Moments {
        rho: GridField::new(vec![x], rho)?,
        j: j.into_iter().map(|c| GridField::new(vec![x], c)).collect::<Result<_>>()?,
        background,
    })
}

/// Per-step bookkeeping.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepAudit {
    pub time: f64,
    pub mass: f64,
    /// Mass removed by clipping negative samples before renormalization.
    pub clipped_mass: f64,
    pub gauss_residual: f64,
    pub energy: f64,
}

impl SimulationState {
    pub fn new(u: GridField, e: Vec<GridField>, b: Option<GridField>) -> Result<Self> {
        let d = check_layout(&u)?;
        let x = u.axes()[0];
        if e.len() != d {
            return Err(Error::DimensionMismatch(format!("{} E components for {d} momentum axes", e.len())));
        }
        for f in e.iter().chain(b.iter()) {
            if f.axes() != [x] {
                return Err(Error::AxisMismatch("fields must live on the position axis of u".into()));
            }
        }
        if d == 1 && b.is_some() {
            return Err(Error::DimensionMismatch("1D1V runs carry no magnetic field".into()));
        }
        let b = if d == 2 && b.is_none() {
            Some(GridField::zeros(vec![x])?)
        } else {
            b
        };
        if let Some((index, &value)) = u.data().iter().enumerate().find(|(_, v)| **v < -1e-12) {
            return Err(Error::NegativeDensity { index, value });
        }
        Ok(SimulationState {
            u,
            e,
            b,
            time: 0.0,
            step: 0,
        })
    }

    pub fn momentum_dim(&self) -> usize {
        self.e.len()
    }

    pub fn position_axis(&self) -> Axis {
        self.u.axes()[0]
    }

    pub fn mass(&self) -> f64 {
        self.u.integral()
    }

    /// `‖∂ₓE₁ − (ρ − ρ̄)‖_∞` with the spectral derivative.
    pub fn gauss_residual(&self) -> Result<f64> {
        let m = moments(&self.u)?;
        let x = self.position_axis();
        let d = maxwell::derivative(self.e[0].data(), x.extent);
        Ok(d.iter()
            .zip(m.rho.data())
            .map(|(a, r)| (a - (r - m.background)).abs())
            .fold(0.0, f64::max))
    }

    /// Replaces `E₁` by the Gauss-law solution, keeping its mean.
    pub fn project_gauss(&mut self) -> Result<()> {
        let m = moments(&self.u)?;
        let x = self.position_axis();
        let mean = self.e[0].data().iter().sum::<f64>() / x.len as f64;
        let e1 = maxwell::gauss_projection(m.rho.data(), x.extent, mean);
        self.e[0].data_mut().copy_from_slice(&e1);
        Ok(())
    }

    /// `∫γ u dx dς + ½∫(|E|² + B²) dx`.
    pub fn energy(&self) -> f64 {
        let d = self.momentum_dim();
        let pts = momentum_points(&self.u);
        let block = pts.len();
        let gamma: Vec<f64> = pts.iter().map(|p| lorentz_factor(&p[..d])).collect();
        let kinetic: f64 = self
            .u
            .data()
            .chunks(block)
            .map(|row| row.iter().zip(&gamma).map(|(f, g)| f * g).sum::<f64>())
            .sum::<f64>()
            * self.u.cell_volume();
        let h = self.position_axis().spacing();
        let field: f64 = self
            .e
            .iter()
            .chain(self.b.iter())
            .map(|f| f.data().iter().map(|v| v * v).sum::<f64>())
            .sum::<f64>()
            * 0.5
            * h;
        kinetic + field
    }

    pub fn audit(&self, clipped_mass: f64) -> Result<StepAudit> {
        Ok(StepAudit {
            time: self.time,
            mass: self.mass(),
            clipped_mass,
            gauss_residual: self.gauss_residual()?,
            energy: self.energy(),
        })
    }

    /// Named fields for the binary container.
    pub fn records(&self) -> Vec<(&'static str, &GridField)> {
        let mut r = vec![("u", &self.u), ("E1", &self.e[0])];
        if let Some(e2) = self.e.get(1) {
            r.push(("E2", e2));
        }
        if let Some(b) = &self.b {
            r.push(("B", b));
        }
        r
    }

    pub fn from_records(mut records: Vec<(String, GridField)>, time: f64, step: u64) -> Result<Self> {
        let mut take = |name: &str| {
            records
                .iter()
                .position(|(n, _)| n == name)
                .map(|i| records.swap_remove(i).1)
        };
        let u = take("u").ok_or_else(|| Error::Container("checkpoint has no `u`".into()))?;
        let e1 = take("E1").ok_or_else(|| Error::Container("checkpoint has no `E1`".into()))?;
        let mut e = vec![e1];
        e.extend(take("E2"));
        let b = take("B");
        let mut s = SimulationState::new(u, e, b)?;
        s.time = time;
        s.step = step;
        Ok(s)
    }
}

/// Semi-Lagrangian advection along `x₁` with velocity `v₁(ς)` over `dt`.
fn advect_position(u: &mut GridField, dt: f64) {
    let x = u.axes()[0];
    let d = u.ndim() - 1;
    let pts = momentum_points(u);
    let block = pts.len();
    let h = x.spacing();
    let shifts: Vec<f64> = pts.iter().map(|p| velocity_component(&p[..d], 0) * dt / h).collect();
    let data = u.data_mut();
    let lines: Vec<Vec<f64>> = (0..block)
        .into_par_iter()
        .map_init(Vec::new, |scratch, m| {
            let mut line: Vec<f64> = (0..x.len).map(|i| data[i * block + m]).collect();
            spline::shift_line(&mut line, shifts[m], scratch);
            line
        })
        .collect();
    for (m, line) in lines.iter().enumerate() {
        for (i, v) in line.iter().enumerate() {
            data[i * block + m] = *v;
        }
    }
}

/// Constant shift of a momentum block along axis `axis` by `shift` cells.
fn shift_block(row: &mut [f64], dims: &[usize], axis: usize, shift: f64, scratch: &mut Vec<f64>) {
    if shift == 0.0 {
        return;
    }
    match (dims.len(), axis) {
        (1, 0) => spline::shift_line(row, shift, scratch),
        (2, 1) => {
            for line in row.chunks_mut(dims[1]) {
                spline::shift_line(line, shift, scratch);
            }
        }
        (2, 0) => {
            let (n0, n1) = (dims[0], dims[1]);
            let mut col = vec![0.0; n0];
            for j in 0..n1 {
                for i in 0..n0 {
                    col[i] = row[i * n1 + j];
                }
                spline::shift_line(&mut col, shift, scratch);
                for i in 0..n0 {
                    row[i * n1 + j] = col[i];
                }
            }
        }
        _ => unreachable!(),
    }
}

/// `u(ς) ← u(R(α(ς)) ς)` with `α = b dt / γ(ς)`: the exact backward flow of
/// `dς/dt = v × B e₃`, which preserves `|ς|`.
fn rotate_block(row: &mut [f64], axes: &[Axis], b: f64, dt: f64, coef: &mut Vec<f64>) {
    if b == 0.0 {
        return;
    }
    let (a0, a1) = (axes[0], axes[1]);
    coef.clear();
    coef.extend_from_slice(row);
    spline::prefilter_2d(coef, a0.len, a1.len);
    for i in 0..a0.len {
        let s0 = a0.coord(i);
        for j in 0..a1.len {
            let s1 = a1.coord(j);
            let alpha = b * dt / lorentz_factor(&[s0, s1]);
            let (sn, cs) = alpha.sin_cos();
            let f0 = cs * s0 - sn * s1;
            let f1 = sn * s0 + cs * s1;
            row[i * a1.len + j] = spline::eval_2d(
                coef,
                a0.len,
                a1.len,
                (f0 - a0.origin) / a0.spacing(),
                (f1 - a1.origin) / a1.spacing(),
            );
        }
    }
}

/// Momentum advection with frozen `E` and `B` over `dt`. The magnetic
/// rotation is wrapped between two electric half shifts.
fn advect_momentum(u: &mut GridField, e: &[Vec<f64>], b: Option<&[f64]>, dt: f64) {
    let axes: Vec<Axis> = u.axes()[1..].to_vec();
    let dims: Vec<usize> = axes.iter().map(|a| a.len).collect();
    let block: usize = dims.iter().product();
    u.data_mut()
        .par_chunks_mut(block)
        .enumerate()
        .for_each_init(
            || (Vec::new(), Vec::new()),
            |(scratch, coef), (ix, row)| {
                let half = |row: &mut [f64], scratch: &mut Vec<f64>| {
                    for (c, a) in axes.iter().enumerate() {
                        shift_block(row, &dims, c, 0.5 * e[c][ix] * dt / a.spacing(), scratch);
                    }
                };
                match b {
                    Some(b) if b[ix] != 0.0 => {
                        half(row, scratch);
                        rotate_block(row, &axes, b[ix], dt, coef);
                        half(row, scratch);
                    }
                    _ => {
                        for (c, a) in axes.iter().enumerate() {
                            shift_block(row, &dims, c, e[c][ix] * dt / a.spacing(), scratch);
                        }
                    }
                }
            },
        );
}

/// Clips negatives and rescales to `mass`; returns the clipped mass.
fn clip_and_renormalize(u: &mut GridField, mass: f64) -> f64 {
    let vol = u.cell_volume();
    let mut clipped = 0.0;
    for v in u.data_mut() {
        if *v < 0.0 {
            clipped -= *v;
            *v = 0.0;
        }
    }
    let now = u.integral();
    if now > 0.0 && mass > 0.0 {
        let s = mass / now;
        u.data_mut().iter_mut().for_each(|v| *v *= s);
    }
    clipped * vol
}

/// Vlasov step with `E` and `B` frozen: Strang (`order = 2`: half position,
/// full momentum, half position) or Lie (`order = 1`) splitting. Returns
/// the clipped mass.
pub fn vlasov_step(state: &mut SimulationState, config: &SchemeConfig) -> Result<f64> {
    config.validate(state)?;
    let e: Vec<Vec<f64>> = state.e.iter().map(|f| f.data().to_vec()).collect();
    let b = state.b.as_ref().map(|b| b.data().to_vec());
    let mass = state.mass();
    let dt = config.dt;
    if config.order == 2 {
        advect_position(&mut state.u, 0.5 * dt);
        advect_momentum(&mut state.u, &e, b.as_deref(), dt);
        advect_position(&mut state.u, 0.5 * dt);
    } else {
        advect_position(&mut state.u, dt);
        advect_momentum(&mut state.u, &e, b.as_deref(), dt);
    }
    let clipped = clip_and_renormalize(&mut state.u, mass);
    state.time += dt;
    state.step += 1;
    state.u.set_provenance(Provenance::Solver { step: state.step });
    Ok(clipped)
}

/// Field step with the current of the present `u`: Ampère for `E₁`, the
/// transverse pair `(E₂, B₃)` by implicit midpoint.
pub fn maxwell_step(state: &mut SimulationState, config: &SchemeConfig) -> Result<()> {
    let m = moments(&state.u)?;
    maxwell_update(state, &m, config.dt);
    Ok(())
}

fn maxwell_update(state: &mut SimulationState, m: &Moments, dt: f64) {
    let x = state.position_axis();
    for (e1, j1) in state.e[0].data_mut().iter_mut().zip(m.j[0].data()) {
        *e1 -= dt * j1;
    }
    if state.e.len() == 2 {
        let b = state.b.as_mut().expect("1D2V state carries B");
        maxwell::transverse_step(state.e[1].data_mut(), b.data_mut(), m.j[1].data(), x.extent, dt);
    }
}

/// One coupled step. Strang: half position advection, field update with the
/// mid-step current, momentum advection in the time-averaged fields, half
/// position advection, Gauss projection of `E₁`.
pub fn step(state: &mut SimulationState, config: &SchemeConfig) -> Result<StepAudit> {
    config.validate(state)?;
    let mass = state.mass();
    let dt = config.dt;
    let position_dt = if config.order == 2 { 0.5 * dt } else { dt };
    advect_position(&mut state.u, position_dt);
    let m = moments(&state.u)?;
    let e_old: Vec<Vec<f64>> = state.e.iter().map(|f| f.data().to_vec()).collect();
    let b_old = state.b.as_ref().map(|b| b.data().to_vec());
    maxwell_update(state, &m, dt);
    let avg = |old: &[f64], new: &GridField| -> Vec<f64> {
        old.iter().zip(new.data()).map(|(a, b)| 0.5 * (a + b)).collect()
    };
    let e_mid: Vec<Vec<f64>> = e_old.iter().zip(&state.e).map(|(o, n)| avg(o, n)).collect();
    let b_mid = b_old.as_ref().map(|o| avg(o, state.b.as_ref().unwrap()));
    advect_momentum(&mut state.u, &e_mid, b_mid.as_deref(), dt);
    if config.order == 2 {
        advect_position(&mut state.u, position_dt);
    }
    let clipped = clip_and_renormalize(&mut state.u, mass);
    state.time += dt;
    state.step += 1;
    state.project_gauss()?;
    state.u.set_provenance(Provenance::Solver { step: state.step });
    state.audit(clipped)
}

/// Snapshots at the output times plus one audit per step (index 0 is the
/// initial state).
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub states: Vec<SimulationState>,
    pub audits: Vec<StepAudit>,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.states.iter().map(|s| s.time).collect()
    }

    /// Largest `|m(t) − m(0)| / m(0)` over the audits.
    pub fn mass_drift(&self) -> f64 {
        relative_drift(self.audits.iter().map(|a| a.mass))
    }

    pub fn energy_drift(&self) -> f64 {
        relative_drift(self.audits.iter().map(|a| a.energy))
    }

    pub fn max_gauss_residual(&self) -> f64 {
        self.audits.iter().map(|a| a.gauss_residual).fold(0.0, f64::max)
    }
}

fn relative_drift(mut values: impl Iterator<Item = f64>) -> f64 {
    let Some(first) = values.next() else { return 0.0 };
    values.map(|v| (v - first).abs()).fold(0.0, f64::max) / first.abs().max(f64::MIN_POSITIVE)
}

/// Runs to `horizon` with `ceil(horizon / dt)` equal steps (each at most
/// `dt`), keeping a snapshot every `output_every` steps and at the end.
pub fn run(mut state: SimulationState, config: &SchemeConfig, horizon: f64, output_every: usize) -> Result<Trajectory> {
    if !(horizon.is_finite() && horizon >= 0.0) {
        return Err(Error::invalid("horizon", "must be nonnegative"));
    }
    config.validate(&state)?;
    state.project_gauss()?;
    let steps = (horizon / config.dt - 1e-9).ceil().max(0.0) as usize;
    let mut cfg = *config;
    if steps > 0 {
        cfg.dt = horizon / steps as f64;
    }
    let every = output_every.max(1);
    let mut audits = vec![state.audit(0.0)?];
    let mut states = vec![state.clone()];
    for k in 1..=steps {
        audits.push(step(&mut state, &cfg)?);
        if k % every == 0 || k == steps {
            states.push(state.clone());
        }
    }
    Ok(Trajectory { states, audits })
}

/// Perturbed relativistic equilibrium: `u = n (1 + α cos(k x)) exp(−(γ−1)/T)`
/// normalized to unit mean density, with optional uniform `B₀` and a
/// transverse wave `E₂ = B = β cos(k x)` in 1D2V.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumSpec {
    pub nx: usize,
    pub ns: usize,
    pub momentum_dim: usize,
    pub wavenumber: f64,
    pub alpha: f64,
    pub temperature: f64,
    pub momentum_extent: f64,
    pub b0: f64,
    pub wave: f64,
}

impl Default for EquilibriumSpec {
    fn default() -> Self {
        EquilibriumSpec {
            nx: 128,
            ns: 128,
            momentum_dim: 1,
            wavenumber: 0.5,
            alpha: 0.05,
            temperature: 0.1,
            momentum_extent: 6.0,
            b0: 0.0,
            wave: 0.0,
        }
    }
}

/// Momentum axis whose nodes are symmetric about zero (cell-centred), so
/// even distributions carry no discrete current.
pub fn symmetric_axis(kind: AxisKind, extent: f64, len: usize) -> Result<Axis> {
    Axis::new(kind, -0.5 * extent + 0.5 * extent / len as f64, extent, len)
}

pub fn perturbed_equilibrium(spec: &EquilibriumSpec) -> Result<SimulationState> {
    let d = spec.momentum_dim;
    if !(d == 1 || d == 2) {
        return Err(Error::invalid("momentum_dim", "must be 1 or 2"));
    }
    if !(spec.temperature > 0.0 && spec.wavenumber > 0.0) {
        return Err(Error::invalid("temperature", "temperature and wavenumber must be positive"));
    }
    let length = 2.0 * std::f64::consts::PI / spec.wavenumber;
    let x = Axis::periodic(AxisKind::X1, length, spec.nx)?;
    let mut axes = vec![x, symmetric_axis(AxisKind::S1, spec.momentum_extent, spec.ns)?];
    if d == 2 {
        axes.push(symmetric_axis(AxisKind::S2, spec.momentum_extent, spec.ns)?);
    }
    let (k, a, t) = (spec.wavenumber, spec.alpha, spec.temperature);
    let u = GridField::from_fn(axes, |c| (1.0 + a * (k * c[0]).cos()) * (-(lorentz_factor(&c[1..]) - 1.0) / t).exp())?;
    let norm = u.integral() / length;
    let u = u.scale(1.0 / norm);
    let zero = GridField::zeros(vec![x])?;
    let mut e = vec![zero.clone()];
    let mut b = None;
    if d == 2 {
        let wave = GridField::from_fn(vec![x], |c| spec.wave * (k * c[0]).cos())?;
        e.push(wave.clone());
        b = Some(wave.map(|v| v + spec.b0));
    }
    let mut s = SimulationState::new(u, e, b)?;
    s.project_gauss()?;
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(d: usize) -> SimulationState {
        perturbed_equilibrium(&EquilibriumSpec {
            nx: 32,
            ns: 32,
            momentum_dim: d,
            b0: if d == 2 { 0.5 } else { 0.0 },
            wave: if d == 2 { 0.01 } else { 0.0 },
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn even_distribution_carries_no_current() {
        let s = small(2);
        let m = moments(&s.u).unwrap();
        for c in &m.j {
            assert!(c.max_abs() < 1e-14);
        }
    }

    #[test]
    fn separable_density() {
        let x = Axis::periodic(AxisKind::X1, 1.0, 16).unwrap();
        let s = Axis::centered(AxisKind::S1, 4.0, 32).unwrap();
        let h = |p: f64| (-p * p).exp();
        let g = |x: f64| 2.0 + (6.0 * x).sin();
        let u = GridField::from_fn(vec![x, s], |c| g(c[0]) * h(c[1])).unwrap();
        let m = moments(&u).unwrap();
        let hint: f64 = (0..32).map(|i| h(s.coord(i))).sum::<f64>() * s.spacing();
        for i in 0..16 {
            assert!((m.rho.data()[i] - g(x.coord(i)) * hint).abs() < 1e-13);
        }
    }

    #[test]
    fn gaussian_density_matches_refined_quadrature() {
        let rho = |n: usize| {
            let x = Axis::periodic(AxisKind::X1, 1.0, 8).unwrap();
            let s = Axis::centered(AxisKind::S1, 12.0, n).unwrap();
            let u = GridField::from_fn(vec![x, s], |c| (-(c[1] - 0.3).powi(2)).exp()).unwrap();
            moments(&u).unwrap().rho.data()[0]
        };
        assert!((rho(128) - rho(2048)).abs() < 1e-8);
        assert!((rho(2048) - std::f64::consts::PI.sqrt()).abs() < 1e-8);
    }

    #[test]
    fn uniform_in_x_is_steady() {
        let x = Axis::periodic(AxisKind::X1, 1.0, 16).unwrap();
        let s = Axis::centered(AxisKind::S1, 6.0, 32).unwrap();
        let u = GridField::from_fn(vec![x, s], |c| (-c[1] * c[1]).exp()).unwrap();
        let mut st = SimulationState::new(u.clone(), vec![GridField::zeros(vec![x]).unwrap()], None).unwrap();
        vlasov_step(&mut st, &SchemeConfig { dt: 0.05, ..Default::default() }).unwrap();
        assert!(max_diff(&st.u, &u) < 1e-14);
    }

    fn max_diff(a: &GridField, b: &GridField) -> f64 {
        a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn free_transport_matches_shift() {
        let err = |n: usize| {
            let x = Axis::periodic(AxisKind::X1, 1.0, n).unwrap();
            let s = Axis::centered(AxisKind::S1, 4.0, 16).unwrap();
            let f0 = |x: f64, p: f64| (1.2 + (2.0 * std::f64::consts::PI * x).sin()) * (-p * p).exp();
            let u = GridField::from_fn(vec![x, s], |c| f0(c[0], c[1])).unwrap();
            let mut st = SimulationState::new(u, vec![GridField::zeros(vec![x]).unwrap()], None).unwrap();
            let cfg = SchemeConfig { dt: 0.5 / n as f64, ..Default::default() };
            for _ in 0..n {
                vlasov_step(&mut st, &cfg).unwrap();
            }
            let exact = GridField::from_fn(vec![x, s], |c| f0(c[0] - velocity_component(&[c[1]], 0) * 0.5, c[1])).unwrap();
            max_diff(&st.u, &exact)
        };
        let (a, b) = (err(32), err(64));
        assert!(b < 1e-3, "{b}");
        assert!(a / b > 6.0, "{a} {b}");
    }

    #[test]
    fn mass_is_conserved_over_many_steps() {
        let mut s = small(2);
        let m0 = s.mass();
        let cfg = SchemeConfig { dt: 0.1, ..Default::default() };
        for _ in 0..100 {
            step(&mut s, &cfg).unwrap();
        }
        assert!((s.mass() - m0).abs() <= 1e-8 * m0);
        assert!(s.gauss_residual().unwrap() < 1e-8);
    }

    #[test]
    fn cfl_guard() {
        let mut s = small(1);
        let h = s.u.axes().iter().map(Axis::spacing).fold(f64::INFINITY, f64::min);
        let cfg = SchemeConfig { dt: 1.01 * h, cfl: 1.0, order: 2 };
        assert!(matches!(vlasov_step(&mut s, &cfg), Err(Error::CflViolation { .. })));
    }

    #[test]
    fn plane_wave_travels_at_unit_speed() {
        let x = Axis::periodic(AxisKind::X1, 2.0 * std::f64::consts::PI, 64).unwrap();
        let s = Axis::centered(AxisKind::S1, 4.0, 8).unwrap();
        let s2 = Axis::centered(AxisKind::S2, 4.0, 8).unwrap();
        let u = GridField::zeros(vec![x, s, s2]).unwrap();
        let wave = GridField::from_fn(vec![x], |c| c[0].cos()).unwrap();
        let mut st = SimulationState::new(u, vec![GridField::zeros(vec![x]).unwrap(), wave.clone()], Some(wave.clone())).unwrap();
        let l2 = |f: &GridField| f.data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let a0 = l2(&st.e[1]);
        let steps = 2000;
        let cfg = SchemeConfig { dt: 2.0 * std::f64::consts::PI / steps as f64, cfl: 1.0, order: 2 };
        for _ in 0..steps {
            maxwell_step(&mut st, &cfg).unwrap();
        }
        assert!((l2(&st.e[1]) - a0).abs() < 1e-6 * a0);
        assert!(max_diff(&st.e[1], &wave) < 1e-4);
        assert!(max_diff(st.b.as_ref().unwrap(), &wave) < 1e-4);
        assert_eq!(st.e[0].max_abs(), 0.0);
    }

    #[test]
    fn zero_horizon_returns_initial() {
        let t = run(small(1), &SchemeConfig::default(), 0.0, 1).unwrap();
        assert_eq!(t.states.len(), 1);
        assert_eq!(t.audits.len(), 1);
    }

    #[test]
    fn records_roundtrip() {
        let s = small(2);
        let recs: Vec<(String, GridField)> = s.records().into_iter().map(|(n, f)| (n.to_string(), f.clone())).collect();
        let back = SimulationState::from_records(recs, 0.0, 0).unwrap();
        assert_eq!(back.u, s.u);
        assert_eq!(back.b, s.b);
    }
}
