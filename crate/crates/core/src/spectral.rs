//! FFT plumbing over row-major n-D arrays.

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

/// Signed wavenumber of DFT index `i` on `n` points.
pub(crate) fn signed_index(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// True when `i` is the unpaired Nyquist index of an even-length axis.
pub(crate) fn is_nyquist(i: usize, n: usize) -> bool {
    n % 2 == 0 && i == n / 2
}

/// Unnormalized transform along one axis. `inverse` uses the `+i` sign.
pub(crate) fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, inverse: bool) {
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut planner = FftPlanner::<f64>::new();
    let fft = if inverse {
        planner.plan_fft_inverse(n)
    } else {
        planner.plan_fft_forward(n)
    };
    if inner == 1 {
        fft.process(data);
        return;
    }
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for o in 0..outer {
        let base = o * n * inner;
        for j in 0..inner {
            for (k, c) in line.iter_mut().enumerate() {
                *c = data[base + k * inner + j];
            }
            fft.process(&mut line);
            for (k, c) in line.iter().enumerate() {
                data[base + k * inner + j] = *c;
            }
        }
    }
}

pub(crate) fn fft_nd(data: &mut [Complex64], shape: &[usize], inverse: bool) {
    for axis in 0..shape.len() {
        fft_axis(data, shape, axis, inverse);
    }
}

/// Forward transform of a real 1-D periodic signal.
pub(crate) fn rfft_1d(values: &[f64]) -> Vec<Complex64> {
    let mut buf: Vec<Complex64> = values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    FftPlanner::<f64>::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse of [`rfft_1d`], including the 1/n factor, keeping the real part.
pub(crate) fn irfft_1d(mut spectrum: Vec<Complex64>) -> Vec<f64> {
    let n = spectrum.len();
    FftPlanner::<f64>::new().plan_fft_inverse(n).process(&mut spectrum);
    spectrum.iter().map(|c| c.re / n as f64).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nd_roundtrip() {
        let shape = [8usize, 6, 10];
        let n: usize = shape.iter().product();
        let orig: Vec<Complex64> = (0..n).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut d = orig.clone();
        fft_nd(&mut d, &shape, false);
        fft_nd(&mut d, &shape, true);
        for (a, b) in d.iter().zip(&orig) {
            assert!((a / n as f64 - b).norm() < 1e-12);
        }
    }

    #[test]
    fn axis_transform_of_plane_wave() {
        // exp(2πi·2·j/8) along the middle axis concentrates on index 2.
        let shape = [3usize, 8, 2];
        let mut d = vec![Complex64::new(0.0, 0.0); 48];
        for a in 0..3 {
            for j in 0..8 {
                for b in 0..2 {
                    let ph = 2.0 * std::f64::consts::PI * 2.0 * j as f64 / 8.0;
                    d[(a * 8 + j) * 2 + b] = Complex64::from_polar(1.0, ph);
                }
            }
        }
        fft_axis(&mut d, &shape, 1, false);
        for a in 0..3 {
            for j in 0..8 {
                for b in 0..2 {
                    let want = if j == 2 { 8.0 } else { 0.0 };
                    assert!((d[(a * 8 + j) * 2 + b].re - want).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn signed_indices() {
        assert_eq!(signed_index(3, 8), 3);
        assert_eq!(signed_index(4, 8), 4);
        assert_eq!(signed_index(5, 8), -3);
        assert!(is_nyquist(4, 8));
        assert!(!is_nyquist(3, 7));
    }
}
