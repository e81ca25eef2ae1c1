//! Spectral field updates on the periodic position axis.

use rustfft::num_complex::Complex64;

use crate::spectral::{irfft_1d, is_nyquist, rfft_1d, signed_index};

fn wavenumber(i: usize, n: usize, length: f64) -> f64 {
    if is_nyquist(i, n) {
        0.0
    } else {
        2.0 * std::f64::consts::PI * signed_index(i, n) as f64 / length
    }
}

/// Spectral derivative of a periodic signal; the Nyquist mode is dropped.
pub fn derivative(values: &[f64], length: f64) -> Vec<f64> {
    let n = values.len();
    let mut s = rfft_1d(values);
    for (i, c) in s.iter_mut().enumerate() {
        *c *= Complex64::new(0.0, wavenumber(i, n, length));
    }
    irfft_1d(s)
}

/// Zero-mean `E` with `∂ₓE = ρ − mean(ρ)`, plus the given mean.
pub fn gauss_projection(rho: &[f64], length: f64, mean: f64) -> Vec<f64> {
    let n = rho.len();
    let mut s = rfft_1d(rho);
    for (i, c) in s.iter_mut().enumerate() {
        let k = wavenumber(i, n, length);
        *c = if k == 0.0 {
            Complex64::new(0.0, 0.0)
        } else {
            *c / Complex64::new(0.0, k)
        };
    }
    s[0] = Complex64::new(mean * n as f64, 0.0);
    irfft_1d(s)
}

/// One implicit-midpoint step of `∂ₜE₂ = −∂ₓB − j₂`, `∂ₜB = −∂ₓE₂`.
/// The source-free part is a Cayley transform per mode, so the discrete
/// `L²` field energy is conserved exactly when `j₂ = 0`.
pub fn transverse_step(e2: &mut [f64], b: &mut [f64], j2: &[f64], length: f64, dt: f64) {
    let n = e2.len();
    let es = rfft_1d(e2);
    let bs = rfft_1d(b);
    let js = rfft_1d(j2);
    let mut e_new = vec![Complex64::new(0.0, 0.0); n];
    let mut b_new = vec![Complex64::new(0.0, 0.0); n];
    for i in 0..n {
        let a = Complex64::new(0.0, -0.5 * dt * wavenumber(i, n, length));
        let det = Complex64::new(1.0, 0.0) - a * a;
        let r0 = es[i] + a * bs[i] - dt * js[i];
        let r1 = bs[i] + a * es[i];
        e_new[i] = (r0 + a * r1) / det;
        b_new[i] = (a * r0 + r1) / det;
    }
    e2.copy_from_slice(&irfft_1d(e_new));
    b.copy_from_slice(&irfft_1d(b_new));
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn derivative_of_sine() {
        let n = 32;
        let l = 3.0;
        let x: Vec<f64> = (0..n).map(|i| i as f64 * l / n as f64).collect();
        let f: Vec<f64> = x.iter().map(|x| (2.0 * PI * 3.0 * x / l).sin()).collect();
        let d = derivative(&f, l);
        for (xi, di) in x.iter().zip(&d) {
            assert!((di - 2.0 * PI * 3.0 / l * (2.0 * PI * 3.0 * xi / l).cos()).abs() < 1e-11);
        }
    }

    #[test]
    fn projection_inverts_derivative() {
        let n = 24;
        let rho: Vec<f64> = (0..n).map(|i| 1.0 + 0.3 * (2.0 * PI * i as f64 / n as f64).cos()).collect();
        let e = gauss_projection(&rho, 2.0, 0.1);
        let d = derivative(&e, 2.0);
        let mean = rho.iter().sum::<f64>() / n as f64;
        for (di, ri) in d.iter().zip(&rho) {
            assert!((di - (ri - mean)).abs() < 1e-13);
        }
        assert!((e.iter().sum::<f64>() / n as f64 - 0.1).abs() < 1e-14);
    }

    #[test]
    fn vacuum_energy_is_conserved() {
        let n = 16;
        let mut e: Vec<f64> = (0..n).map(|i| (i as f64).sin()).collect();
        let mut b: Vec<f64> = (0..n).map(|i| (0.3 * i as f64).cos()).collect();
        let energy = |e: &[f64], b: &[f64]| e.iter().chain(b).map(|v| v * v).sum::<f64>();
        let e0 = energy(&e, &b);
        for _ in 0..50 {
            transverse_step(&mut e, &mut b, &vec![0.0; n], 1.0, 0.07);
        }
        assert!((energy(&e, &b) - e0).abs() < 1e-12 * e0);
    }
}
