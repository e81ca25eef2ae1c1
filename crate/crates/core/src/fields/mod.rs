//! Grid data model, field synthesis and the binary field container.

pub mod container;
mod grid;
pub mod synth;

pub(crate) use grid::{validate_axes, BlockLayout};
pub use grid::{Axis, AxisKind, GridField, Provenance, MIN_AXIS_POINTS};
pub use synth::{synth_field, Spectrum, SynthSpec};

use crate::error::Result;

/// Fixes the given axes at the given indices; see [`GridField::restrict`].
pub fn restrict_field(field: &GridField, fixed: &[(AxisKind, usize)]) -> Result<GridField> {
    field.restrict(fixed)
}
