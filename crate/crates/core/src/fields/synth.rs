//! Random fields with prescribed fractional regularity.
//!
//! Every Fourier mode draws its phase from a ChaCha stream keyed by the seed
//! and the mode's integer wave vector, so a field synthesized on a finer grid
//! contains exactly the modes of the coarser one plus new high frequencies.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::grid::{validate_axes, Axis, AxisKind, GridField, Provenance};
use crate::error::{Error, Result};
use crate::norms::{Exponent, RegularityClass};
use crate::spectral::{fft_nd, is_nyquist, signed_index};

/// Shape of the p = 2 spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Spectrum {
    /// Amplitude `|k|^-(θ + n/2)` with `k` measured in fundamentals of the longest axis.
    #[default]
    Isotropic,
    /// Amplitude `Π_d max(|k_d|, 1)^-(θ + 1/2)`: a product of one-dimensional
    /// `W^{θ,2}` spectra, which keeps the regularity along every single axis.
    Tensor,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthSpec {
    pub target: RegularityClass,
    pub axes: Vec<Axis>,
    pub seed: u64,
    pub amplitude: f64,
    pub spectrum: Spectrum,
    /// Reject exponents other than 1, 2 and ∞ instead of mapping them.
    pub strict: bool,
    /// Multiply by a smooth cutoff in momentum (see [`momentum_cutoff`]).
    pub momentum_cutoff: bool,
}

impl SynthSpec {
    pub fn new(target: RegularityClass, axes: Vec<Axis>, seed: u64) -> Self {
        SynthSpec {
            target,
            axes,
            seed,
            amplitude: 1.0,
            spectrum: Spectrum::Isotropic,
            strict: false,
            momentum_cutoff: false,
        }
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    pub fn with_spectrum(mut self, spectrum: Spectrum) -> Self {
        self.spectrum = spectrum;
        self
    }

    pub fn with_cutoff(mut self, on: bool) -> Self {
        self.momentum_cutoff = on;
        self
    }

    pub fn strict(mut self, on: bool) -> Self {
        self.strict = on;
        self
    }
}

/// Which construction a given exponent maps to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Construction {
    Spectral,
    Lacunary,
}

pub fn construction_for(p: Exponent, strict: bool) -> Result<Construction> {
    match p {
        Exponent::Infinity => Ok(Construction::Lacunary),
        Exponent::Finite(v) if v == 1.0 || v == 2.0 => Ok(Construction::Spectral),
        Exponent::Finite(v) if strict => Err(Error::UnsupportedExponent(v)),
        Exponent::Finite(_) => Ok(Construction::Spectral),
    }
}

/// One real Fourier mode `a·cos(2π ξ·x + φ)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mode {
    /// Integer wave vector, one entry per axis.
    pub k: [i64; 5],
    /// Physical frequency per axis (cycles per unit length).
    pub xi: [f64; 5],
    pub amplitude: f64,
    pub phase: f64,
}

impl Mode {
    pub fn eval(&self, coords: &[f64]) -> f64 {
        let arg: f64 = coords.iter().zip(&self.xi).map(|(x, xi)| x * xi).sum();
        self.amplitude * (2.0 * PI * arg + self.phase).cos()
    }
}

fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn mode_stream(kinds: &[AxisKind], k: &[i64]) -> u64 {
    let mut h = 0x9e37_79b9_7f4a_7c15u64;
    for (kind, &kd) in kinds.iter().zip(k) {
        h = mix64(h ^ ((kind.code() as u64) << 56) ^ (kd as u64));
    }
    h
}

/// Uniform phase in [0, 2π) for the mode `k`, independent of grid size.
pub fn mode_phase(seed: u64, kinds: &[AxisKind], k: &[i64]) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(mode_stream(kinds, k));
    rng.gen::<f64>() * 2.0 * PI
}

/// True when `k` is the representative of the pair {k, −k}: the first
/// nonzero component is positive.
fn is_canonical(k: &[i64]) -> bool {
    k.iter().find(|&&c| c != 0).is_some_and(|&c| c > 0)
}

fn spectral_amplitude(spec: &SynthSpec, k: &[i64]) -> f64 {
    let theta = spec.target.theta();
    let n = spec.axes.len() as f64;
    match spec.spectrum {
        Spectrum::Isotropic => {
            let lmax = spec.axes.iter().fold(0.0f64, |m, a| m.max(a.extent));
            let rho2: f64 = spec
                .axes
                .iter()
                .zip(k)
                .map(|(a, &kd)| (kd as f64 * lmax / a.extent).powi(2))
                .sum();
            rho2.powf(-(theta + 0.5 * n) / 2.0)
        }
        Spectrum::Tensor => k
            .iter()
            .map(|&kd| (kd.unsigned_abs().max(1) as f64).powf(-(theta + 0.5)))
            .product(),
    }
}

/// Enumerates the modes of the p = 2 construction resolved by the grid
/// (Nyquist excluded, zero mode excluded), one per conjugate pair.
pub fn spectral_modes(spec: &SynthSpec) -> Vec<Mode> {
    let kinds: Vec<AxisKind> = spec.axes.iter().map(|a| a.kind).collect();
    let shape: Vec<usize> = spec.axes.iter().map(|a| a.len).collect();
    let total: usize = shape.iter().product();
    let mut idx = vec![0usize; shape.len()];
    let mut out = Vec::new();
    for _ in 0..total {
        let skip = idx.iter().zip(&shape).any(|(&i, &n)| is_nyquist(i, n));
        let k: Vec<i64> = idx.iter().zip(&shape).map(|(&i, &n)| signed_index(i, n)).collect();
        if !skip && is_canonical(&k) {
            let mut kk = [0i64; 5];
            let mut xi = [0.0f64; 5];
            for (d, a) in spec.axes.iter().enumerate() {
                kk[d] = k[d];
                xi[d] = k[d] as f64 / a.extent;
            }
            out.push(Mode {
                k: kk,
                xi,
                amplitude: spec.amplitude * spectral_amplitude(spec, &k),
                phase: mode_phase(spec.seed, &kinds, &k),
            });
        }
        for d in (0..shape.len()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    out
}

/// Modes of the lacunary construction: per axis, `2^{-jθ} cos(2π 2^j x / L + φ)`
/// for every octave `2^j` strictly below the Nyquist index.
pub fn lacunary_modes(spec: &SynthSpec) -> Vec<Mode> {
    let kinds: Vec<AxisKind> = spec.axes.iter().map(|a| a.kind).collect();
    let theta = spec.target.theta();
    let mut out = Vec::new();
    for (d, a) in spec.axes.iter().enumerate() {
        let mut j = 0u32;
        while (1usize << j) < a.len / 2 {
            let mut k = [0i64; 5];
            k[d] = 1i64 << j;
            let mut xi = [0.0f64; 5];
            xi[d] = k[d] as f64 / a.extent;
            out.push(Mode {
                k,
                xi,
                amplitude: spec.amplitude * 2f64.powf(-(j as f64) * theta),
                phase: mode_phase(spec.seed, &kinds, &k[..kinds.len()]),
            });
            j += 1;
        }
    }
    out
}

/// Smooth step: 1 on [0, a], 0 on [b, ∞), C^∞ in between.
fn smooth_step(t: f64, a: f64, b: f64) -> f64 {
    if t <= a {
        return 1.0;
    }
    if t >= b {
        return 0.0;
    }
    let s = (t - a) / (b - a);
    let f = |z: f64| if z > 0.0 { (-1.0 / z).exp() } else { 0.0 };
    f(1.0 - s) / (f(1.0 - s) + f(s))
}

/// Momentum cutoff: 1 where every momentum coordinate lies within an eighth of
/// the axis width of the axis centre, 0 beyond a quarter.
pub fn momentum_cutoff(axes: &[Axis], coords: &[f64]) -> f64 {
    axes.iter()
        .zip(coords)
        .filter(|(a, _)| a.kind.is_momentum())
        .map(|(a, &c)| {
            let centre = a.origin + 0.5 * a.extent;
            smooth_step((c - centre).abs(), a.extent / 8.0, a.extent / 4.0)
        })
        .product()
}

/// Builds the field of the given modes by an inverse FFT.
fn render(axes: &[Axis], modes: &[Mode]) -> Vec<f64> {
    let shape: Vec<usize> = axes.iter().map(|a| a.len).collect();
    let total: usize = shape.iter().product();
    let strides: Vec<usize> = {
        let mut s = vec![1usize; shape.len()];
        for d in (0..shape.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * shape[d + 1];
        }
        s
    };
    let mut spec = vec![Complex64::new(0.0, 0.0); total];
    for m in modes {
        // Shift the phase so the sum is referenced to the axis origins.
        let shift: f64 = axes.iter().enumerate().map(|(d, a)| m.xi[d] * a.origin).sum();
        let c = Complex64::from_polar(0.5 * m.amplitude, m.phase + 2.0 * PI * shift);
        let mut pos = 0usize;
        let mut neg = 0usize;
        for (d, &n) in shape.iter().enumerate() {
            let kd = m.k[d].rem_euclid(n as i64) as usize;
            let md = (-m.k[d]).rem_euclid(n as i64) as usize;
            pos += kd * strides[d];
            neg += md * strides[d];
        }
        spec[pos] += c;
        spec[neg] += c.conj();
    }
    fft_nd(&mut spec, &shape, true);
    spec.iter().map(|c| c.re).collect()
}

/// The modes a spec synthesizes, in the order they are rendered.
pub fn synth_modes(spec: &SynthSpec) -> Result<Vec<Mode>> {
    validate_axes(&spec.axes)?;
    if !(spec.amplitude.is_finite() && spec.amplitude >= 0.0) {
        return Err(Error::invalid("amplitude", format!("{} must be finite and nonnegative", spec.amplitude)));
    }
    Ok(match construction_for(spec.target.p(), spec.strict)? {
        Construction::Spectral => spectral_modes(spec),
        Construction::Lacunary => lacunary_modes(spec),
    })
}

pub fn synth_field(spec: &SynthSpec) -> Result<GridField> {
    let modes = synth_modes(spec)?;
    let mut data = render(&spec.axes, &modes);
    if spec.momentum_cutoff && spec.axes.iter().any(|a| a.kind.is_momentum()) {
        let chi = GridField::from_fn(spec.axes.clone(), |c| momentum_cutoff(&spec.axes, c))?;
        for (v, c) in data.iter_mut().zip(chi.data()) {
            *v *= c;
        }
    }
    Ok(GridField::new(spec.axes.clone(), data)?.with_provenance(Provenance::Synthetic { seed: spec.seed }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::norms::RegularityClass;

    fn spec1d(theta: f64, p: Exponent, n: usize, seed: u64) -> SynthSpec {
        let reg = RegularityClass::new(theta, p).unwrap();
        SynthSpec::new(reg, vec![Axis::periodic(AxisKind::X1, 1.0, n).unwrap()], seed)
    }

    #[test]
    fn deterministic_in_seed() {
        let s = spec1d(0.5, Exponent::Finite(2.0), 256, 7);
        let a = synth_field(&s).unwrap();
        let b = synth_field(&s).unwrap();
        assert_eq!(a.data(), b.data());
        let c = synth_field(&spec1d(0.5, Exponent::Finite(2.0), 256, 8)).unwrap();
        assert_ne!(a.data(), c.data());
    }

    #[test]
    fn zero_amplitude_is_zero() {
        let s = spec1d(0.5, Exponent::Infinity, 64, 1).with_amplitude(0.0);
        assert!(synth_field(&s).unwrap().data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn fft_render_matches_direct_sum() {
        let reg = RegularityClass::new(0.4, Exponent::Finite(2.0)).unwrap();
        let axes = vec![
            Axis::periodic(AxisKind::X1, 1.0, 16).unwrap(),
            Axis::centered(AxisKind::S1, 0.5, 12).unwrap(),
        ];
        for spectrum in [Spectrum::Isotropic, Spectrum::Tensor] {
            let s = SynthSpec::new(reg.clone(), axes.clone(), 3).with_spectrum(spectrum);
            let f = synth_field(&s).unwrap();
            let modes = synth_modes(&s).unwrap();
            let direct = GridField::from_fn(axes.clone(), |c| modes.iter().map(|m| m.eval(c)).sum()).unwrap();
            for (a, b) in f.data().iter().zip(direct.data()) {
                assert!((a - b).abs() < 1e-12, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn coarse_modes_survive_refinement() {
        let coarse = synth_modes(&spec1d(0.5, Exponent::Finite(2.0), 64, 11)).unwrap();
        let fine = synth_modes(&spec1d(0.5, Exponent::Finite(2.0), 128, 11)).unwrap();
        for m in &coarse {
            assert!(fine.iter().any(|f| f.k == m.k && f.phase == m.phase && f.amplitude == m.amplitude));
        }
    }

    #[test]
    fn strict_mode_rejects_other_exponents() {
        let s = spec1d(0.5, Exponent::Finite(3.0), 64, 1).strict(true);
        assert!(matches!(synth_field(&s), Err(Error::UnsupportedExponent(_))));
        let s = spec1d(0.5, Exponent::Finite(3.0), 64, 1);
        assert!(synth_field(&s).is_ok());
    }

    #[test]
    fn cutoff_profile() {
        let axes = vec![Axis::centered(AxisKind::S1, 1.0, 64).unwrap()];
        assert_eq!(momentum_cutoff(&axes, &[0.1]), 1.0);
        assert_eq!(momentum_cutoff(&axes, &[0.3]), 0.0);
        let mid = momentum_cutoff(&axes, &[0.1875]);
        assert!((mid - 0.5).abs() < 1e-12);
    }
}
