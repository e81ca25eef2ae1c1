//! Annular Friedrichs mollifiers and their discrete convolutions.
//!
//! A kernel of scale `s` is supported on the annulus `s ≤ |x| ≤ 2s` and is
//! renormalized so that its discrete weights sum to one. Convolutions are
//! direct stencil sums over a periodically padded copy of the field, with the
//! stencil visited in a fixed order so results never depend on thread count.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fields::{Axis, AxisKind, BlockLayout, GridField};

/// The radial profile `φ`, supported on `[1, 2]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum MollifierProfile {
    /// `exp(-1/((r-1)(2-r)))` on `(1, 2)`.
    #[default]
    Friedrichs,
}

impl MollifierProfile {
    pub fn eval(self, r: f64) -> f64 {
        match self {
            MollifierProfile::Friedrichs => {
                if r <= 1.0 || r >= 2.0 {
                    0.0
                } else {
                    (-1.0 / ((r - 1.0) * (2.0 - r))).exp()
                }
            }
        }
    }

    pub fn derivative(self, r: f64) -> f64 {
        match self {
            MollifierProfile::Friedrichs => {
                if r <= 1.0 || r >= 2.0 {
                    0.0
                } else {
                    let g = (r - 1.0) * (2.0 - r);
                    self.eval(r) * (3.0 - 2.0 * r) / (g * g)
                }
            }
        }
    }
}

/// Time, position and momentum smoothing scales. A zero scale is inactive.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmoothingScales {
    pub gamma: f64,
    pub epsilon: f64,
    pub sigma: f64,
}

impl SmoothingScales {
    pub fn new(gamma: f64, epsilon: f64, sigma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("gamma", format!("{gamma} must be nonnegative")));
        }
        for (name, v) in [("epsilon", epsilon), ("sigma", sigma)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(name, format!("{v} must be positive")));
            }
        }
        Ok(SmoothingScales { gamma, epsilon, sigma })
    }

    /// Position and momentum scales only, no time smoothing.
    pub fn phase_space(epsilon: f64, sigma: f64) -> Result<Self> {
        Self::new(0.0, epsilon, sigma)
    }

    /// Scales where any entry may be zero (inactive).
    pub fn partial(gamma: f64, epsilon: f64, sigma: f64) -> Result<Self> {
        for (name, v) in [("gamma", gamma), ("epsilon", epsilon), ("sigma", sigma)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(name, format!("{v} must be nonnegative")));
            }
        }
        Ok(SmoothingScales { gamma, epsilon, sigma })
    }
}

/// A sampled, unit-mass annular kernel on one or more contiguous axes.
#[derive(Clone, Debug, PartialEq)]
pub struct MollifierKernel {
    profile: MollifierProfile,
    scale: f64,
    axes: Vec<Axis>,
    /// Flat integer offsets, `axes.len()` per stencil entry.
    offsets: Vec<isize>,
    /// Renormalized `φ_s` samples: `Σ samples · cell volume = 1`.
    samples: Vec<f64>,
    /// `samples · cell volume`, the convolution weights.
    weights: Vec<f64>,
    radius: Vec<usize>,
}

const SCALE_SLACK: f64 = 1e-12;

/// Builds the kernel of scale `scale` over `axes` (dimension `axes.len()`).
pub fn make_mollifier(profile: MollifierProfile, scale: f64, axes: &[Axis]) -> Result<MollifierKernel> {
    if axes.is_empty() {
        return Err(Error::AxisMismatch("a kernel needs at least one axis".into()));
    }
    crate::fields::validate_axes(axes)?;
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::invalid("scale", format!("{scale} must be positive")));
    }
    for a in axes {
        let min = 2.0 * a.spacing();
        if scale < min * (1.0 - SCALE_SLACK) {
            return Err(Error::ScaleTooSmall { axis: a.kind, scale, min });
        }
        let max = a.extent / 4.0;
        if scale > max * (1.0 + SCALE_SLACK) {
            return Err(Error::ScaleTooLarge { axis: a.kind, scale, max });
        }
    }
    let n = axes.len();
    let radius: Vec<usize> = axes.iter().map(|a| (2.0 * scale / a.spacing()).ceil() as usize).collect();
    let h: Vec<f64> = axes.iter().map(Axis::spacing).collect();
    let cell: f64 = h.iter().product();

    let mut offsets = Vec::new();
    let mut raw = Vec::new();
    let widths: Vec<usize> = radius.iter().map(|&r| 2 * r + 1).collect();
    let total: usize = widths.iter().product();
    let mut m = vec![0isize; n];
    for flat in 0..total {
        let mut rem = flat;
        for d in (0..n).rev() {
            m[d] = (rem % widths[d]) as isize - radius[d] as isize;
            rem /= widths[d];
        }
        let r2: f64 = m.iter().zip(&h).map(|(&mi, &hi)| (mi as f64 * hi).powi(2)).sum();
        let phi = profile.eval(r2.sqrt() / scale);
        if phi > 0.0 {
            offsets.extend_from_slice(&m);
            raw.push(phi);
        }
    }
    let mass: f64 = raw.iter().sum::<f64>() * cell;
    if mass <= 0.0 {
        return Err(Error::ScaleTooSmall {
            axis: axes[0].kind,
            scale,
            min: 2.0 * h[0],
        });
    }
    let samples: Vec<f64> = raw.iter().map(|v| v / mass).collect();
    let weights: Vec<f64> = samples.iter().map(|v| v * cell).collect();
    let radius = (0..n)
        .map(|d| offsets.chunks(n).map(|o| o[d].unsigned_abs()).max().unwrap_or(0))
        .collect();
    Ok(MollifierKernel {
        profile,
        scale,
        axes: axes.to_vec(),
        offsets,
        samples,
        weights,
        radius,
    })
}

/// Kernel of `scale` over whichever axes of `field` satisfy `pick`.
pub fn kernel_for(field: &GridField, scale: f64, pick: impl Fn(AxisKind) -> bool) -> Result<MollifierKernel> {
    let axes: Vec<Axis> = field.axes().iter().filter(|a| pick(a.kind)).copied().collect();
    make_mollifier(MollifierProfile::Friedrichs, scale, &axes)
}

impl MollifierKernel {
    pub fn profile(&self) -> MollifierProfile {
        self.profile
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn kinds(&self) -> Vec<AxisKind> {
        self.axes.iter().map(|a| a.kind).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn radius(&self) -> &[usize] {
        &self.radius
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn offset(&self, entry: usize) -> &[isize] {
        let n = self.dimension();
        &self.offsets[entry * n..(entry + 1) * n]
    }

    /// Physical displacement of a stencil entry.
    pub fn displacement(&self, entry: usize) -> Vec<f64> {
        self.offset(entry)
            .iter()
            .zip(&self.axes)
            .map(|(&m, a)| m as f64 * a.spacing())
            .collect()
    }

    pub fn mass(&self) -> f64 {
        self.samples.iter().sum::<f64>() * self.cell_volume()
    }

    /// `Σ_w weight(w) g(point − w)` for a function of the kernel coordinates,
    /// evaluated without wrapping.
    pub fn apply_at<const D: usize>(&self, point: &[f64], g: impl Fn(&[f64]) -> [f64; D]) -> [f64; D] {
        let n = self.dimension();
        let mut acc = [0.0; D];
        let mut y = vec![0.0; n];
        for (e, &w) in self.weights.iter().enumerate() {
            for d in 0..n {
                y[d] = point[d] - self.offsets[e * n + d] as f64 * self.axes[d].spacing();
            }
            let val = g(&y);
            for (a, v) in acc.iter_mut().zip(val) {
                *a += w * v;
            }
        }
        acc
    }

    fn check_field(&self, field: &GridField) -> Result<BlockLayout> {
        for a in &self.axes {
            match field.axis(a.kind) {
                Some(b) if b == a => {}
                Some(_) => {
                    return Err(Error::AxisMismatch(format!(
                        "kernel axis {} does not match the field's grid",
                        a.kind
                    )))
                }
                None => return Err(Error::AxisMismatch(format!("field has no axis {}", a.kind))),
            }
        }
        BlockLayout::new(field.axes(), &self.kinds())
    }
}

/// Index arithmetic for convolving a contiguous block of axes.
struct Plan {
    dims: Vec<usize>,
    radius: Vec<usize>,
    pdims: Vec<usize>,
    inner: usize,
    /// Element stride of each padded block axis (inner included).
    pstrides: Vec<usize>,
    /// Per stencil entry: start of the source segment for the row with prefix zero.
    entry_off: Vec<usize>,
    /// Offset of the zero displacement, i.e. the unshifted centre.
    centre_off: usize,
    row_len: usize,
    block_len: usize,
}

impl Plan {
    fn new(kernel: &MollifierKernel, dims: &[usize], inner: usize) -> Plan {
        let n = dims.len();
        let radius = kernel.radius.clone();
        let pdims: Vec<usize> = dims.iter().zip(&radius).map(|(&d, &r)| d + 2 * r).collect();
        let mut pstrides = vec![inner; n];
        for d in (0..n - 1).rev() {
            pstrides[d] = pstrides[d + 1] * pdims[d + 1];
        }
        let entry_off = (0..kernel.len())
            .map(|e| {
                kernel
                    .offset(e)
                    .iter()
                    .enumerate()
                    .map(|(d, &m)| (radius[d] as isize - m) as usize * pstrides[d])
                    .sum()
            })
            .collect();
        let centre_off = (0..n).map(|d| radius[d] * pstrides[d]).sum();
        Plan {
            row_len: dims[n - 1] * inner,
            block_len: dims.iter().product(),
            dims: dims.to_vec(),
            radius,
            pdims,
            inner,
            pstrides,
            entry_off,
            centre_off,
        }
    }

    fn padded_len(&self) -> usize {
        self.pdims.iter().product::<usize>() * self.inner
    }

    /// Periodic padding of one `[block..., inner]` slice.
    fn pad(&self, src: &[f64]) -> Vec<f64> {
        let n = self.dims.len();
        let mut out = Vec::with_capacity(self.padded_len());
        let mut p = vec![0usize; n];
        let total: usize = self.pdims.iter().product();
        for _ in 0..total {
            let mut s = 0usize;
            for d in 0..n {
                let i = (p[d] as isize - self.radius[d] as isize).rem_euclid(self.dims[d] as isize) as usize;
                s = s * self.dims[d] + i;
            }
            out.extend_from_slice(&src[s * self.inner..(s + 1) * self.inner]);
            for d in (0..n).rev() {
                p[d] += 1;
                if p[d] < self.pdims[d] {
                    break;
                }
                p[d] = 0;
            }
        }
        out
    }

    /// Padded block values of a coefficient evaluated at unwrapped coordinates.
    fn pad_fn(&self, axes: &[Axis], f: &dyn Fn(&[f64]) -> f64) -> Vec<f64> {
        let n = self.dims.len();
        let total: usize = self.pdims.iter().product();
        let mut out = Vec::with_capacity(total);
        let mut p = vec![0usize; n];
        let mut c = vec![0.0; n];
        for _ in 0..total {
            for d in 0..n {
                c[d] = axes[d].coord_unwrapped(p[d] as isize - self.radius[d] as isize);
            }
            out.push(f(&c));
            for d in (0..n).rev() {
                p[d] += 1;
                if p[d] < self.pdims[d] {
                    break;
                }
                p[d] = 0;
            }
        }
        out
    }

    /// Start of row `r` (a multi-index over all block axes but the last) in padded storage.
    fn row_base(&self, r: usize) -> usize {
        let n = self.dims.len();
        let mut rem = r;
        let mut base = 0;
        for d in (0..n - 1).rev() {
            let i = rem % self.dims[d];
            rem /= self.dims[d];
            base += i * self.pstrides[d];
        }
        base
    }

    fn convolve(&self, padded: &[f64], weights: &[f64], out: &mut [f64]) {
        out.par_chunks_mut(self.row_len).enumerate().for_each(|(r, row)| {
            let base = self.row_base(r);
            row.iter_mut().for_each(|v| *v = 0.0);
            for (&off, &w) in self.entry_off.iter().zip(weights) {
                let seg = &padded[base + off..base + off + self.row_len];
                for (o, s) in row.iter_mut().zip(seg) {
                    *o += w * s;
                }
            }
        });
    }

    /// `Σ w (a(y) − a(x)) (f(y) − f(x))`, with `a` given on the padded block only.
    fn convolve_diffprod(&self, padded: &[f64], coef: &[f64], coef_plan: &Plan, weights: &[f64], out: &mut [f64]) {
        let n_last = self.dims[self.dims.len() - 1];
        let inner = self.inner;
        out.par_chunks_mut(self.row_len).enumerate().for_each(|(r, row)| {
            let base = self.row_base(r);
            let abase = coef_plan.row_base(r);
            let fc = &padded[base + self.centre_off..base + self.centre_off + self.row_len];
            let ac = &coef[abase + coef_plan.centre_off..abase + coef_plan.centre_off + n_last];
            row.iter_mut().for_each(|v| *v = 0.0);
            for ((&off, &aoff), &w) in self.entry_off.iter().zip(&coef_plan.entry_off).zip(weights) {
                let seg = &padded[base + off..base + off + self.row_len];
                let aseg = &coef[abase + aoff..abase + aoff + n_last];
                for i in 0..n_last {
                    let da = w * (aseg[i] - ac[i]);
                    let lo = i * inner;
                    for j in lo..lo + inner {
                        row[j] += da * (seg[j] - fc[j]);
                    }
                }
            }
        });
    }
}

/// A coefficient that depends only on the kernel's axes, used for products
/// such as `(v u)^σ` where `v = v(ς)`.
pub enum Coefficient<'a> {
    /// Periodic samples on the kernel block (row-major over the kernel axes).
    Periodic(&'a [f64]),
    /// A function evaluated at unwrapped coordinates `x − w`, never wrapped
    /// back into the fundamental cell.
    Unwrapped(&'a (dyn Fn(&[f64]) -> f64 + Sync)),
}

fn padded_coefficient(kernel: &MollifierKernel, coef: &Coefficient<'_>) -> Result<(Plan, Vec<f64>)> {
    let dims: Vec<usize> = kernel.axes.iter().map(|a| a.len).collect();
    let plan = Plan::new(kernel, &dims, 1);
    let values = match coef {
        Coefficient::Periodic(v) => {
            if v.len() != plan.block_len {
                return Err(Error::DimensionMismatch(format!(
                    "coefficient has {} samples, kernel block has {}",
                    v.len(),
                    plan.block_len
                )));
            }
            plan.pad(v)
        }
        Coefficient::Unwrapped(f) => plan.pad_fn(&kernel.axes, *f),
    };
    Ok((plan, values))
}

enum Op<'a> {
    Plain,
    Weighted(&'a Coefficient<'a>),
    DiffProd(&'a Coefficient<'a>),
}

fn run(field: &GridField, kernel: &MollifierKernel, op: Op<'_>) -> Result<GridField> {
    let layout = kernel.check_field(field)?;
    let plan = Plan::new(kernel, &layout.dims, layout.inner);
    let coef = match &op {
        Op::Plain => None,
        Op::Weighted(c) | Op::DiffProd(c) => Some(padded_coefficient(kernel, c)?),
    };
    let slice_len = plan.block_len * plan.inner;
    let mut out = vec![0.0; field.len()];
    for (src, dst) in field.data().chunks(slice_len).zip(out.chunks_mut(slice_len)) {
        let mut padded = plan.pad(src);
        match (&op, &coef) {
            (Op::Plain, _) => plan.convolve(&padded, &kernel.weights, dst),
            (Op::Weighted(_), Some((cplan, cvals))) => {
                let total: usize = plan.pdims.iter().product();
                debug_assert_eq!(cplan.padded_len(), total);
                for (chunk, &a) in padded.chunks_mut(plan.inner).zip(cvals) {
                    chunk.iter_mut().for_each(|v| *v *= a);
                }
                plan.convolve(&padded, &kernel.weights, dst);
            }
            (Op::DiffProd(_), Some((cplan, cvals))) => {
                plan.convolve_diffprod(&padded, cvals, cplan, &kernel.weights, dst)
            }
            _ => unreachable!(),
        }
    }
    GridField::new(field.axes().to_vec(), out)
}

/// `f^s = φ_s * f`, periodic in every kernel axis.
pub fn mollify(field: &GridField, kernel: &MollifierKernel) -> Result<GridField> {
    run(field, kernel, Op::Plain)
}

/// `(a f)^s` for a coefficient `a` living on the kernel axes.
pub fn mollify_weighted(field: &GridField, kernel: &MollifierKernel, coef: &Coefficient<'_>) -> Result<GridField> {
    run(field, kernel, Op::Weighted(coef))
}

/// `∫ φ_s(w) (a(x−w) − a(x)) (f(x−w) − f(x)) dw`, summed directly.
pub fn difference_product(field: &GridField, kernel: &MollifierKernel, coef: &Coefficient<'_>) -> Result<GridField> {
    run(field, kernel, Op::DiffProd(coef))
}

/// `a^s` on the kernel block itself (row-major over the kernel axes).
pub fn mollify_coefficient(kernel: &MollifierKernel, coef: &Coefficient<'_>) -> Result<Vec<f64>> {
    let (plan, vals) = padded_coefficient(kernel, coef)?;
    let mut out = vec![0.0; plan.block_len];
    plan.convolve(&vals, &kernel.weights, &mut out);
    Ok(out)
}

/// `a` itself sampled on the kernel block, matching [`mollify_coefficient`].
pub fn sample_coefficient(kernel: &MollifierKernel, coef: &Coefficient<'_>) -> Result<Vec<f64>> {
    let (plan, vals) = padded_coefficient(kernel, coef)?;
    let mut out = vec![0.0; plan.block_len];
    let row = plan.dims[plan.dims.len() - 1];
    for (r, chunk) in out.chunks_mut(row).enumerate() {
        let b = plan.row_base(r) + plan.centre_off;
        chunk.copy_from_slice(&vals[b..b + row]);
    }
    Ok(out)
}

/// Applies the active scales in the fixed order time, position, momentum.
/// Position (momentum) scales act radially on all position (momentum) axes.
pub fn mollify_multiscale(field: &GridField, scales: &SmoothingScales) -> Result<GridField> {
    let mut out = field.clone();
    let groups: [(f64, fn(AxisKind) -> bool, &str); 3] = [
        (scales.gamma, AxisKind::is_time, "time"),
        (scales.epsilon, AxisKind::is_position, "position"),
        (scales.sigma, AxisKind::is_momentum, "momentum"),
    ];
    for (scale, pick, what) in groups {
        if scale == 0.0 {
            continue;
        }
        if !field.kinds().into_iter().any(pick) {
            return Err(Error::AxisMismatch(format!("a {what} scale is active but the field has no {what} axis")));
        }
        let k = kernel_for(field, scale, pick)?;
        out = mollify(&out, &k)?;
    }
    Ok(out.with_provenance(field.provenance()))
}
