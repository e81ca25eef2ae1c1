use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase-space axis labels. The declaration order is the storage order: a
/// field always lists its axes as time, then position, then momentum.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AxisKind {
    T,
    X1,
    X2,
    S1,
    S2,
}

impl AxisKind {
    pub const ALL: [AxisKind; 5] = [AxisKind::T, AxisKind::X1, AxisKind::X2, AxisKind::S1, AxisKind::S2];

    pub fn name(self) -> &'static str {
        match self {
            AxisKind::T => "t",
            AxisKind::X1 => "x1",
            AxisKind::X2 => "x2",
            AxisKind::S1 => "s1",
            AxisKind::S2 => "s2",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == name)
    }

    pub(crate) fn code(self) -> u8 {
        self as u8
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Self::ALL.get(code as usize).copied()
    }

    pub fn is_time(self) -> bool {
        self == AxisKind::T
    }

    pub fn is_position(self) -> bool {
        matches!(self, AxisKind::X1 | AxisKind::X2)
    }

    pub fn is_momentum(self) -> bool {
        matches!(self, AxisKind::S1 | AxisKind::S2)
    }

    /// Component index (0 or 1) of a position or momentum axis.
    pub fn component(self) -> Option<usize> {
        match self {
            AxisKind::X1 | AxisKind::S1 => Some(0),
            AxisKind::X2 | AxisKind::S2 => Some(1),
            AxisKind::T => None,
        }
    }
}

impl fmt::Display for AxisKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A uniform periodic axis: `len` points at `origin + i * extent / len`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub kind: AxisKind,
    pub origin: f64,
    pub extent: f64,
    pub len: usize,
}

pub const MIN_AXIS_POINTS: usize = 8;

impl Axis {
    pub fn new(kind: AxisKind, origin: f64, extent: f64, len: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("axis {kind}: extent {extent} must be positive")));
        }
        if !origin.is_finite() {
            return Err(Error::InvalidGrid(format!("axis {kind}: origin must be finite")));
        }
        if len < MIN_AXIS_POINTS {
            return Err(Error::InvalidGrid(format!(
                "axis {kind}: {len} points, at least {MIN_AXIS_POINTS} required"
            )));
        }
        Ok(Axis {
            kind,
            origin,
            extent,
            len,
        })
    }

    /// Axis starting at zero, the usual choice for position.
    pub fn periodic(kind: AxisKind, extent: f64, len: usize) -> Result<Self> {
        Self::new(kind, 0.0, extent, len)
    }

    /// Axis symmetric about zero, the usual choice for momentum.
    pub fn centered(kind: AxisKind, extent: f64, len: usize) -> Result<Self> {
        Self::new(kind, -0.5 * extent, extent, len)
    }

    pub fn spacing(&self) -> f64 {
        self.extent / self.len as f64
    }

    pub fn coord(&self, i: usize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    /// Coordinate of an unwrapped index (may lie outside the fundamental cell).
    pub fn coord_unwrapped(&self, i: isize) -> f64 {
        self.origin + i as f64 * self.spacing()
    }

    /// Geodesic lag on the circle, in index units.
    pub fn wrapped_lag(&self, lag: isize) -> usize {
        let n = self.len as isize;
        let m = lag.rem_euclid(n);
        m.min(n - m) as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Provenance {
    Synthetic { seed: u64 },
    Solver { step: u64 },
    Derived,
}

impl Provenance {
    pub fn seed(&self) -> u64 {
        match *self {
            Provenance::Synthetic { seed } => seed,
            _ => 0,
        }
    }
}

/// A real field sampled on a uniform periodic grid over up to five axes,
/// stored row-major (last axis fastest).
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    axes: Vec<Axis>,
    data: Vec<f64>,
    provenance: Provenance,
}

pub(crate) fn validate_axes(axes: &[Axis]) -> Result<()> {
    if axes.is_empty() {
        return Err(Error::InvalidGrid("a field needs at least one axis".into()));
    }
    for pair in axes.windows(2) {
        if pair[0].kind >= pair[1].kind {
            return Err(Error::InvalidGrid(format!(
                "axes must be distinct and ordered t, x1, x2, s1, s2 (got {} before {})",
                pair[0].kind, pair[1].kind
            )));
        }
    }
    Ok(())
}

impl GridField {
    pub fn new(axes: Vec<Axis>, data: Vec<f64>) -> Result<Self> {
        validate_axes(&axes)?;
        let n: usize = axes.iter().map(|a| a.len).product();
        if data.len() != n {
            return Err(Error::InvalidGrid(format!("{} samples for a grid of {n} points", data.len())));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("non-finite sample at flat index {i}")));
        }
        Ok(GridField {
            axes,
            data,
            provenance: Provenance::Derived,
        })
    }

    pub fn zeros(axes: Vec<Axis>) -> Result<Self> {
        Self::constant(axes, 0.0)
    }

    pub fn constant(axes: Vec<Axis>, value: f64) -> Result<Self> {
        let n: usize = axes.iter().map(|a| a.len).product();
        Self::new(axes, vec![value; n])
    }

    /// Samples `f` at the coordinates of every grid point.
    pub fn from_fn(axes: Vec<Axis>, mut f: impl FnMut(&[f64]) -> f64) -> Result<Self> {
        validate_axes(&axes)?;
        let n: usize = axes.iter().map(|a| a.len).product();
        let mut idx = vec![0usize; axes.len()];
        let mut coords: Vec<f64> = axes.iter().map(|a| a.coord(0)).collect();
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(f(&coords));
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < axes[d].len {
                    coords[d] = axes[d].coord(idx[d]);
                    break;
                }
                idx[d] = 0;
                coords[d] = axes[d].coord(0);
            }
        }
        Self::new(axes, data)
    }

    pub fn with_provenance(mut self, provenance: Provenance) -> Self {
        self.provenance = provenance;
        self
    }

    pub fn set_provenance(&mut self, provenance: Provenance) {
        self.provenance = provenance;
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    /// Mutable samples. Callers must keep them finite.
    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn ndim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.len).collect()
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![1usize; self.axes.len()];
        for d in (0..self.axes.len().saturating_sub(1)).rev() {
            s[d] = s[d + 1] * self.axes[d + 1].len;
        }
        s
    }

    pub fn axis_position(&self, kind: AxisKind) -> Option<usize> {
        self.axes.iter().position(|a| a.kind == kind)
    }

    pub fn axis(&self, kind: AxisKind) -> Option<&Axis> {
        self.axes.iter().find(|a| a.kind == kind)
    }

    pub fn has_axis(&self, kind: AxisKind) -> bool {
        self.axis_position(kind).is_some()
    }

    pub fn kinds(&self) -> Vec<AxisKind> {
        self.axes.iter().map(|a| a.kind).collect()
    }

    pub fn position_axes(&self) -> Vec<AxisKind> {
        self.kinds().into_iter().filter(|k| k.is_position()).collect()
    }

    pub fn momentum_axes(&self) -> Vec<AxisKind> {
        self.kinds().into_iter().filter(|k| k.is_momentum()).collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.axes.iter().map(Axis::spacing).product()
    }

    pub fn same_grid(&self, other: &GridField) -> bool {
        self.axes == other.axes
    }

    pub(crate) fn require_same_grid(&self, other: &GridField, what: &str) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::AxisMismatch(format!("{what}: fields live on different grids")))
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    /// Midpoint-rule integral over the whole grid.
    pub fn integral(&self) -> f64 {
        self.sum() * self.cell_volume()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> GridField {
        GridField {
            axes: self.axes.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
            provenance: Provenance::Derived,
        }
    }

    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<GridField> {
        self.require_same_grid(other, "zip_map")?;
        Ok(GridField {
            axes: self.axes.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
            provenance: Provenance::Derived,
        })
    }

    pub fn scale(&self, c: f64) -> GridField {
        self.map(|v| c * v)
    }

    pub fn add(&self, other: &GridField) -> Result<GridField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &GridField) -> Result<GridField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &GridField) -> Result<GridField> {
        self.zip_map(other, |a, b| a * b)
    }

    /// Replicates this field over a larger grid whose axes contain ours.
    pub fn broadcast_to(&self, axes: &[Axis]) -> Result<GridField> {
        validate_axes(axes)?;
        let mut map = Vec::with_capacity(self.axes.len());
        for a in &self.axes {
            let pos = axes.iter().position(|b| b == a).ok_or_else(|| {
                Error::AxisMismatch(format!("cannot broadcast: axis {} missing or different in target", a.kind))
            })?;
            map.push(pos);
        }
        let own_strides = self.strides();
        let target_shape: Vec<usize> = axes.iter().map(|a| a.len).collect();
        let n: usize = target_shape.iter().product();
        let mut idx = vec![0usize; axes.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let src: usize = map.iter().zip(&own_strides).map(|(&p, &s)| idx[p] * s).sum();
            data.push(self.data[src]);
            for d in (0..axes.len()).rev() {
                idx[d] += 1;
                if idx[d] < target_shape[d] {
                    break;
                }
                idx[d] = 0;
            }
        }
        Ok(GridField {
            axes: axes.to_vec(),
            data,
            provenance: Provenance::Derived,
        })
    }

    /// Fixes the given axes at the given indices and returns the remaining
    /// lower-dimensional field, sharing sample values.
    pub fn restrict(&self, fixed: &[(AxisKind, usize)]) -> Result<GridField> {
        let mut fixed_at = vec![None; self.axes.len()];
        for &(kind, index) in fixed {
            let pos = self
                .axis_position(kind)
                .ok_or_else(|| Error::AxisMismatch(format!("cannot restrict: field has no axis {kind}")))?;
            let len = self.axes[pos].len;
            if index >= len {
                return Err(Error::IndexOutOfRange { axis: kind, index, len });
            }
            fixed_at[pos] = Some(index);
        }
        let kept: Vec<Axis> = self
            .axes
            .iter()
            .zip(&fixed_at)
            .filter(|(_, f)| f.is_none())
            .map(|(a, _)| *a)
            .collect();
        if kept.is_empty() {
            return Err(Error::AxisMismatch("restriction would remove every axis".into()));
        }
        let strides = self.strides();
        let base: usize = fixed_at
            .iter()
            .zip(&strides)
            .map(|(f, s)| f.map_or(0, |i| i * s))
            .sum();
        let free: Vec<usize> = (0..self.axes.len()).filter(|&d| fixed_at[d].is_none()).collect();
        let n: usize = kept.iter().map(|a| a.len).product();
        let mut idx = vec![0usize; free.len()];
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            let off: usize = free.iter().zip(&idx).map(|(&d, &i)| i * strides[d]).sum();
            data.push(self.data[base + off]);
            for k in (0..free.len()).rev() {
                idx[k] += 1;
                if idx[k] < self.axes[free[k]].len {
                    break;
                }
                idx[k] = 0;
            }
        }
        Ok(GridField {
            axes: kept,
            data,
            provenance: self.provenance,
        })
    }
}

impl GridField {
    /// Fourth-order central difference along `kind`, periodic.
    pub fn derivative(&self, kind: AxisKind) -> Result<GridField> {
        let layout = BlockLayout::new(&self.axes, &[kind])?;
        let n = layout.dims[0];
        let inner = layout.inner;
        let h = self.axis(kind).unwrap().spacing();
        let c = 1.0 / (12.0 * h);
        let mut out = vec![0.0; self.data.len()];
        for o in 0..layout.outer {
            let base = o * n * inner;
            for i in 0..n {
                let at = |k: isize| base + (i as isize + k).rem_euclid(n as isize) as usize * inner;
                let (m2, m1, p1, p2) = (at(-2), at(-1), at(1), at(2));
                let dst = base + i * inner;
                for j in 0..inner {
                    out[dst + j] = c
                        * (8.0 * (self.data[p1 + j] - self.data[m1 + j]) - (self.data[p2 + j] - self.data[m2 + j]));
                }
            }
        }
        Ok(GridField {
            axes: self.axes.clone(),
            data: out,
            provenance: Provenance::Derived,
        })
    }

    /// Multiplies every sample by `values[b]`, where `b` is the sample's
    /// row-major index over the contiguous axes `kinds`.
    pub fn scale_by_block(&self, kinds: &[AxisKind], values: &[f64]) -> Result<GridField> {
        let layout = BlockLayout::new(&self.axes, kinds)?;
        let block = layout.block_len();
        if values.len() != block {
            return Err(Error::DimensionMismatch(format!(
                "{} block values for a block of {block} points",
                values.len()
            )));
        }
        let mut data = self.data.clone();
        for chunk in data.chunks_mut(block * layout.inner) {
            for (b, seg) in chunk.chunks_mut(layout.inner).enumerate() {
                seg.iter_mut().for_each(|v| *v *= values[b]);
            }
        }
        Ok(GridField {
            axes: self.axes.clone(),
            data,
            provenance: Provenance::Derived,
        })
    }
}

/// View of a field as `[outer, block..., inner]` around a contiguous run of axes.
#[derive(Clone, Debug)]
pub(crate) struct BlockLayout {
    pub outer: usize,
    pub dims: Vec<usize>,
    pub inner: usize,
}

impl BlockLayout {
    pub fn new(field_axes: &[Axis], kinds: &[AxisKind]) -> Result<Self> {
        let positions: Vec<usize> = kinds
            .iter()
            .map(|k| {
                field_axes
                    .iter()
                    .position(|a| a.kind == *k)
                    .ok_or_else(|| Error::AxisMismatch(format!("axis {k} is absent from the field")))
            })
            .collect::<Result<_>>()?;
        if positions.is_empty() {
            return Err(Error::AxisMismatch("empty axis block".into()));
        }
        for w in positions.windows(2) {
            if w[1] != w[0] + 1 {
                return Err(Error::AxisMismatch("axis block must be contiguous and ordered".into()));
            }
        }
        let first = positions[0];
        let last = *positions.last().unwrap();
        Ok(BlockLayout {
            outer: field_axes[..first].iter().map(|a| a.len).product(),
            dims: positions.iter().map(|&p| field_axes[p].len).collect(),
            inner: field_axes[last + 1..].iter().map(|a| a.len).product(),
        })
    }

    pub fn block_len(&self) -> usize {
        self.dims.iter().product()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes2() -> Vec<Axis> {
        vec![
            Axis::periodic(AxisKind::X1, 1.0, 8).unwrap(),
            Axis::centered(AxisKind::S1, 2.0, 10).unwrap(),
        ]
    }

    #[test]
    fn rejects_short_axes_and_bad_order() {
        assert!(Axis::periodic(AxisKind::X1, 1.0, 4).is_err());
        assert!(Axis::periodic(AxisKind::X1, -1.0, 16).is_err());
        let a = axes2();
        let swapped = vec![a[1], a[0]];
        assert!(GridField::zeros(swapped).is_err());
    }

    #[test]
    fn rejects_non_finite_samples() {
        let mut data = vec![0.0; 80];
        data[3] = f64::NAN;
        assert!(GridField::new(axes2(), data).is_err());
    }

    #[test]
    fn from_fn_is_row_major() {
        let f = GridField::from_fn(axes2(), |c| c[0] * 100.0 + c[1]).unwrap();
        let ax = axes2();
        assert_eq!(f.data()[1], ax[0].coord(0) * 100.0 + ax[1].coord(1));
        assert_eq!(f.data()[10], ax[0].coord(1) * 100.0 + ax[1].coord(0));
    }

    #[test]
    fn restrict_composes() {
        let ax = vec![
            Axis::periodic(AxisKind::X1, 1.0, 8).unwrap(),
            Axis::centered(AxisKind::S1, 1.0, 9).unwrap(),
            Axis::centered(AxisKind::S2, 1.0, 10).unwrap(),
        ];
        let f = GridField::from_fn(ax, |c| c[0] + 3.0 * c[1] - 7.0 * c[2] * c[0]).unwrap();
        let once = f.restrict(&[(AxisKind::X1, 3), (AxisKind::S2, 7)]).unwrap();
        let twice = f
            .restrict(&[(AxisKind::S2, 7)])
            .unwrap()
            .restrict(&[(AxisKind::X1, 3)])
            .unwrap();
        assert_eq!(once, twice);
        assert_eq!(once.kinds(), vec![AxisKind::S1]);
    }

    #[test]
    fn restrict_errors() {
        let f = GridField::zeros(axes2()).unwrap();
        assert!(matches!(
            f.restrict(&[(AxisKind::X1, 8)]),
            Err(Error::IndexOutOfRange { len: 8, .. })
        ));
        assert!(f.restrict(&[(AxisKind::S2, 0)]).is_err());
        assert!(f.restrict(&[(AxisKind::X1, 0), (AxisKind::S1, 0)]).is_err());
    }

    #[test]
    fn restrict_constant_is_constant() {
        let f = GridField::constant(axes2(), 2.5).unwrap();
        let s = f.restrict(&[(AxisKind::S1, 4)]).unwrap();
        assert!(s.data().iter().all(|&v| v == 2.5));
    }

    #[test]
    fn broadcast_replicates() {
        let ax = axes2();
        let e = GridField::from_fn(vec![ax[0]], |c| c[0]).unwrap();
        let b = e.broadcast_to(&ax).unwrap();
        for i in 0..8 {
            for j in 0..10 {
                assert_eq!(b.data()[i * 10 + j], e.data()[i]);
            }
        }
    }

    #[test]
    fn block_layout() {
        let ax = vec![
            Axis::periodic(AxisKind::X1, 1.0, 8).unwrap(),
            Axis::centered(AxisKind::S1, 1.0, 9).unwrap(),
            Axis::centered(AxisKind::S2, 1.0, 10).unwrap(),
        ];
        let b = BlockLayout::new(&ax, &[AxisKind::S1, AxisKind::S2]).unwrap();
        assert_eq!((b.outer, b.inner, b.block_len()), (8, 1, 90));
        let b = BlockLayout::new(&ax, &[AxisKind::X1]).unwrap();
        assert_eq!((b.outer, b.inner, b.block_len()), (1, 90, 8));
        assert!(BlockLayout::new(&ax, &[AxisKind::X1, AxisKind::S2]).is_err());
    }

    #[test]
    fn fourth_order_derivative() {
        use std::f64::consts::PI;
        let err = |n: usize| {
            let ax = vec![Axis::periodic(AxisKind::X1, 1.0, n).unwrap(), Axis::centered(AxisKind::S1, 1.0, 8).unwrap()];
            let f = GridField::from_fn(ax.clone(), |c| (2.0 * PI * c[0]).sin() * (1.0 + c[1])).unwrap();
            let d = f.derivative(AxisKind::X1).unwrap();
            let exact = GridField::from_fn(ax, |c| 2.0 * PI * (2.0 * PI * c[0]).cos() * (1.0 + c[1])).unwrap();
            d.sub(&exact).unwrap().max_abs()
        };
        let (a, b) = (err(32), err(64));
        assert!((a / b).log2() > 3.8, "observed order {}", (a / b).log2());
    }

    #[test]
    fn block_scaling() {
        let ax = axes2();
        let f = GridField::constant(ax, 2.0).unwrap();
        let w: Vec<f64> = (0..10).map(|j| j as f64).collect();
        let g = f.scale_by_block(&[AxisKind::S1], &w).unwrap();
        assert_eq!(g.data()[3 * 10 + 7], 14.0);
        assert!(f.scale_by_block(&[AxisKind::S1], &w[..9]).is_err());
    }
}
