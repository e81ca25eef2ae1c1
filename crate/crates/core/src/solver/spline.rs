//! Periodic cubic B-spline interpolation.

/// Solves the cyclic system `(c[i-1] + 4 c[i] + c[i+1]) / 6 = f[i]` in place.
pub fn prefilter(values: &mut [f64]) {
    let n = values.len();
    if n < 3 {
        return;
    }
    // Sherman-Morrison on the tridiagonal (1, 4, 1) / 6 with corner entries.
    let (a, b, c) = (1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0);
    let gamma = -b;
    let mut diag = vec![b; n];
    diag[0] = b - gamma;
    diag[n - 1] = b - a * c / gamma;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = c;
    let x = thomas(a, &diag, c, values);
    let z = thomas(a, &diag, c, &u);
    let fact = (x[0] + a * x[n - 1] / gamma) / (1.0 + z[0] + a * z[n - 1] / gamma);
    for i in 0..n {
        values[i] = x[i] - fact * z[i];
    }
}

fn thomas(a: f64, diag: &[f64], c: f64, rhs: &[f64]) -> Vec<f64> {
    let n = diag.len();
    let mut cp = vec![0.0; n];
    let mut dp = vec![0.0; n];
    cp[0] = c / diag[0];
    dp[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - a * cp[i - 1];
        cp[i] = c / m;
        dp[i] = (rhs[i] - a * dp[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = dp[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = dp[i] - cp[i] * x[i + 1];
    }
    x
}

/// Cubic B-spline weights for nodes `i-1, i, i+1, i+2` at fractional offset `t`.
#[inline]
pub fn weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}

/// Splits a position in index units into the base node and its fractional part.
#[inline]
pub fn locate(pos: f64, n: usize) -> (usize, f64) {
    let f = pos.floor();
    let i = (f as i64).rem_euclid(n as i64) as usize;
    (i, pos - f)
}

/// Evaluates spline coefficients `coef` at `pos` (index units, periodic).
#[inline]
pub fn eval(coef: &[f64], pos: f64) -> f64 {
    let n = coef.len();
    let (i, t) = locate(pos, n);
    let w = weights(t);
    let mut s = 0.0;
    for (k, wk) in w.iter().enumerate() {
        s += wk * coef[(i + n + k - 1) % n];
    }
    s
}

/// Replaces `line` by its values at `i - shift` (index units).
pub fn shift_line(line: &mut [f64], shift: f64, scratch: &mut Vec<f64>) {
    if shift == 0.0 {
        return;
    }
    scratch.clear();
    scratch.extend_from_slice(line);
    prefilter(scratch);
    let n = line.len();
    let (i0, t) = locate(-shift, n);
    let w = weights(t);
    for (i, out) in line.iter_mut().enumerate() {
        let base = i + i0 + n - 1;
        *out = w[0] * scratch[base % n] + w[1] * scratch[(base + 1) % n] + w[2] * scratch[(base + 2) % n]
            + w[3] * scratch[(base + 3) % n];
    }
}

/// Tensor-product coefficients of an `n0 × n1` row-major array.
pub fn prefilter_2d(data: &mut [f64], n0: usize, n1: usize) {
    for row in data.chunks_mut(n1) {
        prefilter(row);
    }
    let mut col = vec![0.0; n0];
    for j in 0..n1 {
        for i in 0..n0 {
            col[i] = data[i * n1 + j];
        }
        prefilter(&mut col);
        for i in 0..n0 {
            data[i * n1 + j] = col[i];
        }
    }
}

/// Evaluates 2-D tensor coefficients at `(p0, p1)` in index units.
#[inline]
pub fn eval_2d(coef: &[f64], n0: usize, n1: usize, p0: f64, p1: f64) -> f64 {
    let (i, t) = locate(p0, n0);
    let (j, s) = locate(p1, n1);
    let wi = weights(t);
    let wj = weights(s);
    let mut acc = 0.0;
    for (a, wa) in wi.iter().enumerate() {
        let row = (i + n0 + a - 1) % n0 * n1;
        let mut r = 0.0;
        for (b, wb) in wj.iter().enumerate() {
            r += wb * coef[row + (j + n1 + b - 1) % n1];
        }
        acc += wa * r;
    }
    acc
}
