//! The relativistic velocity `v(ς) = ς/√(1+|ς|²)`, its Jacobian and the
//! elementary bounds on increments and mollifications of `v`.

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::MollifierKernel;

/// Largest supported momentum dimension.
pub const MAX_MOMENTUM_DIM: usize = 3;

/// `γ = √(1+|ς|²)`.
#[inline]
pub fn lorentz_factor(s: &[f64]) -> f64 {
    (1.0 + s.iter().map(|x| x * x).sum::<f64>()).sqrt()
}

pub fn velocity(s: &[f64]) -> Vec<f64> {
    let g = lorentz_factor(s);
    s.iter().map(|x| x / g).collect()
}

/// Component `i` of `v(ς)`.
#[inline]
pub fn velocity_component(s: &[f64], i: usize) -> f64 {
    s[i] / lorentz_factor(s)
}

fn check_dim(s: &[f64]) -> Result<()> {
    if s.is_empty() || s.len() > MAX_MOMENTUM_DIM {
        return Err(Error::DimensionMismatch(format!(
            "momentum dimension {} is not in 1..={MAX_MOMENTUM_DIM}",
            s.len()
        )));
    }
    Ok(())
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// A dense square matrix of size at most 3, row-major.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Jacobian {
    dim: usize,
    entries: [[f64; MAX_MOMENTUM_DIM]; MAX_MOMENTUM_DIM],
}

impl Jacobian {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i][j]
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.dim).all(|i| (0..i).all(|j| self.entries[i][j] == self.entries[j][i]))
    }

    /// Spectral norm by power iteration on `JᵀJ`.
    pub fn operator_norm(&self) -> f64 {
        let d = self.dim;
        let mut m = [[0.0; MAX_MOMENTUM_DIM]; MAX_MOMENTUM_DIM];
        for i in 0..d {
            for j in 0..d {
                m[i][j] = (0..d).map(|k| self.entries[k][i] * self.entries[k][j]).sum();
            }
        }
        let mut x = [1.0, 0.7, 0.3];
        let mut lambda = 0.0;
        for _ in 0..200 {
            let mut y = [0.0; MAX_MOMENTUM_DIM];
            for i in 0..d {
                y[i] = (0..d).map(|j| m[i][j] * x[j]).sum();
            }
            let n = norm(&y[..d]);
            if n == 0.0 {
                return 0.0;
            }
            for i in 0..d {
                x[i] = y[i] / n;
            }
            if (n - lambda).abs() <= 1e-15 * n {
                lambda = n;
                break;
            }
            lambda = n;
        }
        lambda.sqrt()
    }
}

/// `∇v = I/γ − ς⊗ς/γ³`.
pub fn velocity_jacobian(s: &[f64]) -> Result<Jacobian> {
    check_dim(s)?;
    let g = lorentz_factor(s);
    let g3 = g * g * g;
    let mut entries = [[0.0; MAX_MOMENTUM_DIM]; MAX_MOMENTUM_DIM];
    for i in 0..s.len() {
        for j in 0..s.len() {
            entries[i][j] = if i == j { 1.0 / g } else { 0.0 } - s[i] * s[j] / g3;
        }
    }
    Ok(Jacobian { dim: s.len(), entries })
}

/// `∂v_i/∂ς_j` by the complex-step method, exact to rounding.
pub fn velocity_derivative_complex_step(s: &[f64], i: usize, j: usize) -> f64 {
    const H: f64 = 1e-30;
    let z: Vec<Complex64> = s
        .iter()
        .enumerate()
        .map(|(k, &x)| Complex64::new(x, if k == j { H } else { 0.0 }))
        .collect();
    let g = (Complex64::new(1.0, 0.0) + z.iter().map(|c| c * c).sum::<Complex64>()).sqrt();
    (z[i] / g).im / H
}

/// Scalar curl `∂₁v₂ − ∂₂v₁` of the in-plane velocity, by complex step.
pub fn velocity_curl(s: &[f64]) -> f64 {
    velocity_derivative_complex_step(s, 1, 0) - velocity_derivative_complex_step(s, 0, 1)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncrementReport {
    pub difference: f64,
    pub bound: f64,
    /// `difference / |w|`, the observed Lipschitz ratio (0 when `w = 0`).
    pub ratio: f64,
    pub pass: bool,
}

/// `|v(ς − w) − v(ς)| ≤ 2|w|`.
pub fn check_velocity_increment(s: &[f64], w: &[f64]) -> Result<IncrementReport> {
    check_dim(s)?;
    if w.len() != s.len() {
        return Err(Error::DimensionMismatch(format!("ς has {} components, w has {}", s.len(), w.len())));
    }
    let shifted: Vec<f64> = s.iter().zip(w).map(|(a, b)| a - b).collect();
    let (g0, g1) = (lorentz_factor(s), lorentz_factor(&shifted));
    let difference = s
        .iter()
        .zip(&shifted)
        .map(|(a, b)| (b / g1 - a / g0).powi(2))
        .sum::<f64>()
        .sqrt();
    let wn = norm(w);
    let bound = 2.0 * wn;
    Ok(IncrementReport {
        difference,
        bound,
        ratio: if wn > 0.0 { difference / wn } else { 0.0 },
        pass: difference <= bound,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MollificationReport {
    pub difference: f64,
    pub bound: f64,
    pub pass: bool,
}

/// Slack for the quadrature of `v^σ`.
pub const MOLLIFICATION_SLACK: f64 = 1e-10;

/// `v^σ(ς)` by direct quadrature of the kernel at unwrapped momenta.
pub fn mollified_velocity(s: &[f64], kernel: &MollifierKernel) -> Result<Vec<f64>> {
    check_dim(s)?;
    if kernel.dimension() != s.len() || kernel.kinds().iter().any(|k| !k.is_momentum()) {
        return Err(Error::AxisMismatch(format!(
            "a {}-component momentum needs a kernel on exactly {} momentum axes",
            s.len(),
            s.len()
        )));
    }
    let d = s.len();
    let out = kernel.apply_at::<MAX_MOMENTUM_DIM>(s, |y| {
        let g = lorentz_factor(y);
        let mut v = [0.0; MAX_MOMENTUM_DIM];
        for i in 0..d {
            v[i] = y[i] / g;
        }
        v
    });
    Ok(out[..d].to_vec())
}

/// `|v(ς) − v^σ(ς)| ≤ 4σ`.
pub fn check_velocity_mollification(s: &[f64], kernel: &MollifierKernel) -> Result<MollificationReport> {
    let vs = mollified_velocity(s, kernel)?;
    let v = velocity(s);
    let difference = norm(&v.iter().zip(&vs).map(|(a, b)| a - b).collect::<Vec<_>>());
    let bound = 4.0 * kernel.scale();
    Ok(MollificationReport {
        difference,
        bound,
        pass: difference <= bound + MOLLIFICATION_SLACK,
    })
}
