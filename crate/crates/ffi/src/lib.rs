//! C ABI for `vlasov-renorm`.
//!
//! Every function returns a [`VrStatus`]; results go through out-pointers.
//! Objects are opaque handles created by `vr_*_new` / `vr_*_load` style
//! functions and released with the matching `vr_*_free`. After a failure,
//! `vr_last_error()` returns a message for the calling thread.
//!
//! Exponents are passed as doubles; `INFINITY` selects the sup norm.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;

use vlasov_renorm::diagnostics::fit_rate;
use vlasov_renorm::fields::{container, synth_field, Axis, AxisKind, GridField, SynthSpec};
use vlasov_renorm::kernels::{make_mollifier, mollify, MollifierProfile};
use vlasov_renorm::norms::{lp_norm, sobolev_norm, theta_annular, Exponent, Rational, RegularityClass};
use vlasov_renorm::solver::{perturbed_equilibrium, step, EquilibriumSpec, SchemeConfig, SimulationState};
use vlasov_renorm::Error;

/// Result of every call.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VrStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// Kernel scale below two grid spacings or above a quarter period.
    Scale = 3,
    /// Axis, dimension or index mismatch, or a pair sum over budget.
    Shape = 4,
    /// Time step above the CFL guard.
    Cfl = 5,
    Checksum = 6,
    Io = 7,
    BufferTooSmall = 8,
    Panic = 9,
}

/// Axis description. `kind`: 0 = t, 1 = x1, 2 = x2, 3 = s1, 4 = s2.
#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct VrAxis {
    pub kind: u32,
    pub origin: f64,
    pub extent: f64,
    pub len: usize,
}

/// A sampled field on a tensor grid.
pub struct VrField(GridField);

/// A Vlasov-Maxwell state advanced by [`vr_sim_step`].
pub struct VrSimulation {
    state: SimulationState,
    scheme: SchemeConfig,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(e: &Error) -> VrStatus {
    match e {
        Error::ScaleTooSmall { .. } | Error::ScaleTooLarge { .. } => VrStatus::Scale,
        Error::AxisMismatch(_) | Error::DimensionMismatch(_) | Error::IndexOutOfRange { .. } | Error::DimensionTooLarge { .. } => {
            VrStatus::Shape
        }
        Error::CflViolation { .. } => VrStatus::Cfl,
        Error::Checksum { .. } => VrStatus::Checksum,
        Error::Io(_) | Error::Container(_) => VrStatus::Io,
        _ => VrStatus::InvalidArgument,
    }
}

/// Runs `f`, recording the message of any error or panic.
fn guard(f: impl FnOnce() -> Result<(), (VrStatus, String)>) -> VrStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => VrStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            VrStatus::Panic
        }
    }
}

fn lib(e: Error) -> (VrStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(name: &str) -> (VrStatus, String) {
    (VrStatus::NullPointer, format!("`{name}` is NULL"))
}

fn invalid(msg: impl Into<String>) -> (VrStatus, String) {
    (VrStatus::InvalidArgument, msg.into())
}

unsafe fn out<'a, T>(p: *mut T, name: &str) -> Result<&'a mut T, (VrStatus, String)> {
    p.as_mut().ok_or_else(|| null(name))
}

unsafe fn field<'a>(p: *const VrField, name: &str) -> Result<&'a GridField, (VrStatus, String)> {
    p.as_ref().map(|f| &f.0).ok_or_else(|| null(name))
}

unsafe fn slice<'a, T>(p: *const T, len: usize, name: &str) -> Result<&'a [T], (VrStatus, String)> {
    if len == 0 {
        Ok(&[])
    } else if p.is_null() {
        Err(null(name))
    } else {
        Ok(std::slice::from_raw_parts(p, len))
    }
}

fn exponent(p: f64) -> Result<Exponent, (VrStatus, String)> {
    if p == f64::INFINITY {
        Ok(Exponent::Infinity)
    } else {
        Exponent::new(p).map_err(lib)
    }
}

fn kind(code: u32) -> Result<AxisKind, (VrStatus, String)> {
    AxisKind::ALL
        .get(code as usize)
        .copied()
        .ok_or_else(|| invalid(format!("axis kind {code} is not one of 0..=4")))
}

unsafe fn axes(p: *const VrAxis, n: usize) -> Result<Vec<Axis>, (VrStatus, String)> {
    slice(p, n, "axes")?
        .iter()
        .map(|a| Axis::new(kind(a.kind)?, a.origin, a.extent, a.len).map_err(lib))
        .collect()
}

unsafe fn path(p: *const c_char) -> Result<PathBuf, (VrStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    let s = CStr::from_ptr(p).to_str().map_err(|_| invalid("path is not UTF-8"))?;
    Ok(PathBuf::from(s))
}

fn boxed<T>(v: T) -> *mut T {
    Box::into_raw(Box::new(v))
}

/// Message of the last failed call on this thread; empty if none. The
/// pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn vr_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn vr_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------------------
// fields
// ---------------------------------------------------------------------------

/// Field from `len` samples in row-major axis order.
#[no_mangle]
pub unsafe extern "C" fn vr_field_new(
    axes_ptr: *const VrAxis,
    n_axes: usize,
    data: *const f64,
    len: usize,
    result: *mut *mut VrField,
) -> VrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let axes = axes(axes_ptr, n_axes)?;
        let values = slice(data, len, "data")?.to_vec();
        *result = boxed(VrField(GridField::new(axes, values).map_err(lib)?));
        Ok(())
    })
}

/// Random field of regularity `(theta, p)`, deterministic in `seed`.
#[no_mangle]
pub unsafe extern "C" fn vr_field_synth(
    axes_ptr: *const VrAxis,
    n_axes: usize,
    theta: f64,
    p: f64,
    seed: u64,
    result: *mut *mut VrField,
) -> VrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let axes = axes(axes_ptr, n_axes)?;
        let reg = RegularityClass::new(theta, exponent(p)?).map_err(lib)?;
        *result = boxed(VrField(synth_field(&SynthSpec::new(reg, axes, seed)).map_err(lib)?));
        Ok(())
    })
}

/// Releases a field; NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn vr_field_free(f: *mut VrField) {
    if !f.is_null() {
        drop(Box::from_raw(f));
    }
}

#[no_mangle]
pub unsafe extern "C" fn vr_field_len(f: *const VrField, len: *mut usize) -> VrStatus {
    guard(|| {
        *out(len, "len")? = field(f, "field")?.len();
        Ok(())
    })
}

/// Copies the samples into `buffer`, which must hold `vr_field_len` values.
#[no_mangle]
pub unsafe extern "C" fn vr_field_copy(f: *const VrField, buffer: *mut f64, capacity: usize) -> VrStatus {
    guard(|| {
        let g = field(f, "field")?;
        if capacity < g.len() {
            return Err((VrStatus::BufferTooSmall, format!("buffer holds {capacity} values, the field has {}", g.len())));
        }
        if buffer.is_null() {
            return Err(null("buffer"));
        }
        std::slice::from_raw_parts_mut(buffer, g.len()).copy_from_slice(g.data());
        Ok(())
    })
}

/// Mollifies along the axis of kind `axis_kind` at `scale`.
#[no_mangle]
pub unsafe extern "C" fn vr_mollify(f: *const VrField, axis_kind: u32, scale: f64, result: *mut *mut VrField) -> VrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let g = field(f, "field")?;
        let k = kind(axis_kind)?;
        let axis = *g.axis(k).ok_or_else(|| lib(Error::AxisMismatch(format!("the field has no axis {k}"))))?;
        let kernel = make_mollifier(MollifierProfile::Friedrichs, scale, &[axis]).map_err(lib)?;
        *result = boxed(VrField(mollify(g, &kernel).map_err(lib)?));
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// norms and rates
// ---------------------------------------------------------------------------

#[no_mangle]
pub unsafe extern "C" fn vr_lp_norm(f: *const VrField, p: f64, value: *mut f64) -> VrStatus {
    guard(|| {
        let v = out(value, "value")?;
        *v = lp_norm(field(f, "field")?, exponent(p)?);
        Ok(())
    })
}

/// `‖f‖_p` and the Gagliardo seminorm; their sum is the `W^{θ,p}` norm.
#[no_mangle]
pub unsafe extern "C" fn vr_sobolev_norm(f: *const VrField, theta: f64, p: f64, lebesgue: *mut f64, seminorm: *mut f64) -> VrStatus {
    guard(|| {
        let (l, s) = (out(lebesgue, "lebesgue")?, out(seminorm, "seminorm")?);
        let r = sobolev_norm(field(f, "field")?, theta, exponent(p)?).map_err(lib)?;
        *l = r.lebesgue;
        *s = r.gagliardo_seminorm;
        Ok(())
    })
}

/// Annular modulus over pairs at distance in `[eps, 2 eps]` along the axes
/// listed in `kinds`.
#[no_mangle]
pub unsafe extern "C" fn vr_theta_annular(
    f: *const VrField,
    eps: f64,
    theta: f64,
    p: f64,
    kinds: *const u32,
    n_kinds: usize,
    value: *mut f64,
) -> VrStatus {
    guard(|| {
        let v = out(value, "value")?;
        let pair = slice(kinds, n_kinds, "kinds")?.iter().map(|&k| kind(k)).collect::<Result<Vec<_>, _>>()?;
        *v = theta_annular(field(f, "field")?, eps, theta, exponent(p)?, &pair).map_err(lib)?;
        Ok(())
    })
}

/// `θκ + κ + 3θ − 1` in lowest terms for rational `θ` and `κ`.
#[no_mangle]
pub unsafe extern "C" fn vr_criticality(
    theta_num: i64,
    theta_den: i64,
    kappa_num: i64,
    kappa_den: i64,
    num: *mut i64,
    den: *mut i64,
) -> VrStatus {
    guard(|| {
        let (n, d) = (out(num, "num")?, out(den, "den")?);
        let theta = Rational::new(theta_num, theta_den).map_err(lib)?;
        let kappa = Rational::new(kappa_num, kappa_den).map_err(lib)?;
        let two = Exponent::Finite(2.0);
        let c = RegularityClass::exact(theta, two)
            .and_then(|r| r.with_field_exact(kappa, two))
            .map_err(lib)?
            .criticality()
            .expect("kappa is set");
        *n = c.numer();
        *d = c.denom();
        Ok(())
    })
}

/// Least-squares slope and intercept of `log value` against `log scale`.
#[no_mangle]
pub unsafe extern "C" fn vr_fit_rate(scales: *const f64, values: *const f64, n: usize, slope: *mut f64, intercept: *mut f64) -> VrStatus {
    guard(|| {
        let (s, i) = (out(slope, "slope")?, out(intercept, "intercept")?);
        let pts: Vec<(f64, f64)> = slice(scales, n, "scales")?
            .iter()
            .copied()
            .zip(slice(values, n, "values")?.iter().copied())
            .collect();
        let r = fit_rate(&pts).map_err(lib)?;
        *s = r.slope;
        *i = r.intercept;
        Ok(())
    })
}

// ---------------------------------------------------------------------------
// simulation
// ---------------------------------------------------------------------------

/// Perturbed relativistic equilibrium on an `nx × ns^momentum_dim` grid,
/// advanced with Strang splitting at step `dt`. Other parameters keep their
/// defaults (amplitude 0.05, wavenumber 0.5, temperature 0.1, momentum
/// extent 6); `b0` sets a uniform magnetic field in 1D2V.
#[no_mangle]
pub unsafe extern "C" fn vr_sim_new(nx: usize, ns: usize, momentum_dim: usize, b0: f64, dt: f64, result: *mut *mut VrSimulation) -> VrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let spec = EquilibriumSpec {
            nx,
            ns,
            momentum_dim,
            b0,
            ..Default::default()
        };
        let state = perturbed_equilibrium(&spec).map_err(lib)?;
        let scheme = SchemeConfig { dt, ..Default::default() };
        scheme.validate(&state).map_err(lib)?;
        *result = boxed(VrSimulation { state, scheme });
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn vr_sim_free(sim: *mut VrSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances `steps` steps.
#[no_mangle]
pub unsafe extern "C" fn vr_sim_step(sim: *mut VrSimulation, steps: usize) -> VrStatus {
    guard(|| {
        let sim = out(sim, "sim")?;
        for _ in 0..steps {
            step(&mut sim.state, &sim.scheme).map_err(lib)?;
        }
        Ok(())
    })
}

/// Time, completed steps, total mass and Gauss-law residual.
#[no_mangle]
pub unsafe extern "C" fn vr_sim_status(
    sim: *const VrSimulation,
    time: *mut f64,
    steps: *mut u64,
    mass: *mut f64,
    gauss_residual: *mut f64,
) -> VrStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("sim"))?.state;
        *out(time, "time")? = s.time;
        *out(steps, "steps")? = s.step;
        *out(mass, "mass")? = s.mass();
        *out(gauss_residual, "gauss_residual")? = s.gauss_residual().map_err(lib)?;
        Ok(())
    })
}

/// Copy of the distribution function.
#[no_mangle]
pub unsafe extern "C" fn vr_sim_distribution(sim: *const VrSimulation, result: *mut *mut VrField) -> VrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let s = &sim.as_ref().ok_or_else(|| null("sim"))?.state;
        *result = boxed(VrField(s.u.clone()));
        Ok(())
    })
}

/// Writes the state to a checksummed container file.
#[no_mangle]
pub unsafe extern "C" fn vr_sim_save(sim: *const VrSimulation, file: *const c_char) -> VrStatus {
    guard(|| {
        let s = &sim.as_ref().ok_or_else(|| null("sim"))?.state;
        container::save(&path(file)?, &s.records()).map_err(lib)
    })
}

/// Reads a state written by [`vr_sim_save`]; the container does not store
/// the clock, so `time` and `steps` are supplied by the caller.
#[no_mangle]
pub unsafe extern "C" fn vr_sim_load(file: *const c_char, time: f64, steps: u64, dt: f64, result: *mut *mut VrSimulation) -> VrStatus {
    guard(|| {
        let result = out(result, "result")?;
        let records = container::load(&path(file)?).map_err(lib)?;
        let state = SimulationState::from_records(records, time, steps).map_err(lib)?;
        let scheme = SchemeConfig { dt, ..Default::default() };
        scheme.validate(&state).map_err(lib)?;
        *result = boxed(VrSimulation { state, scheme });
        Ok(())
    })
}
