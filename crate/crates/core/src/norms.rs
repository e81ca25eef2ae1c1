//! Lebesgue, Gagliardo and annular norms on periodic grids.
//!
//! Pair sums use the torus geodesic distance per axis (Euclidean across axes).
//! Because the distance depends only on the lag between two points, every
//! double sum is organised as a sum over lags; per-lag partial sums are
//! collected in lag order and added sequentially, so results are independent
//! of the thread count.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::fields::{Axis, AxisKind, BlockLayout, GridField};

// ---------------------------------------------------------------------------
// Exponents and regularity classes
// ---------------------------------------------------------------------------

/// An exact fraction, used so that criticality on the critical line is exactly zero.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Rational {
    num: i64,
    den: i64,
}

fn gcd(mut a: i128, mut b: i128) -> i128 {
    a = a.abs();
    b = b.abs();
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

const MAX_DENOMINATOR: i64 = 1_000_000;

impl Rational {
    pub const ZERO: Rational = Rational { num: 0, den: 1 };
    pub const ONE: Rational = Rational { num: 1, den: 1 };

    pub fn new(num: i64, den: i64) -> Result<Self> {
        Self::from_i128(num as i128, den as i128)
    }

    fn from_i128(num: i128, den: i128) -> Result<Self> {
        if den == 0 {
            return Err(Error::invalid("rational", "zero denominator"));
        }
        let g = gcd(num, den).max(1);
        let (mut n, mut d) = (num / g, den / g);
        if d < 0 {
            n = -n;
            d = -d;
        }
        let n = i64::try_from(n).map_err(|_| Error::invalid("rational", "numerator overflow"))?;
        let d = i64::try_from(d).map_err(|_| Error::invalid("rational", "denominator overflow"))?;
        Ok(Rational { num: n, den: d })
    }

    pub fn integer(n: i64) -> Self {
        Rational { num: n, den: 1 }
    }

    pub fn numer(self) -> i64 {
        self.num
    }

    pub fn denom(self) -> i64 {
        self.den
    }

    /// Best continued-fraction approximation with denominator ≤ 10⁶; exact
    /// for short decimals and for the f64 images of simple fractions.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() {
            return Err(Error::invalid("rational", format!("{x} is not finite")));
        }
        let (mut h0, mut h1) = (0i128, 1i128);
        let (mut k0, mut k1) = (1i128, 0i128);
        let mut y = x;
        for _ in 0..64 {
            let a = y.floor();
            if a.abs() > 1e15 {
                break;
            }
            let ai = a as i128;
            let h2 = ai * h1 + h0;
            let k2 = ai * k1 + k0;
            if k2 > MAX_DENOMINATOR as i128 {
                break;
            }
            (h0, h1, k0, k1) = (h1, h2, k1, k2);
            let approx = h1 as f64 / k1 as f64;
            if (approx - x).abs() <= 1e-12 * x.abs().max(1.0) {
                break;
            }
            let frac = y - a;
            if frac == 0.0 {
                break;
            }
            y = 1.0 / frac;
        }
        Self::from_i128(h1, k1)
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }

    pub fn is_zero(self) -> bool {
        self.num == 0
    }

    pub fn signum(self) -> i64 {
        self.num.signum()
    }

    pub fn checked_add(self, o: Rational) -> Result<Rational> {
        Self::from_i128(
            self.num as i128 * o.den as i128 + o.num as i128 * self.den as i128,
            self.den as i128 * o.den as i128,
        )
    }

    pub fn checked_sub(self, o: Rational) -> Result<Rational> {
        self.checked_add(Rational { num: -o.num, den: o.den })
    }

    pub fn checked_mul(self, o: Rational) -> Result<Rational> {
        Self::from_i128(self.num as i128 * o.num as i128, self.den as i128 * o.den as i128)
    }
}

impl fmt::Display for Rational {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl FromStr for Rational {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some((a, b)) = s.split_once('/') {
            let n: i64 = a.trim().parse().map_err(|_| Error::invalid("rational", format!("bad numerator in `{s}`")))?;
            let d: i64 = b.trim().parse().map_err(|_| Error::invalid("rational", format!("bad denominator in `{s}`")))?;
            return Rational::new(n, d);
        }
        let v: f64 = s.parse().map_err(|_| Error::invalid("rational", format!("cannot parse `{s}`")))?;
        Rational::from_f64(v)
    }
}

impl Serialize for Rational {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum NumOrStr {
    Num(f64),
    Str(String),
}

impl<'de> Deserialize<'de> for Rational {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Rational::from_f64(v),
            NumOrStr::Str(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// An integrability exponent in `[1, ∞]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Exponent {
    Finite(f64),
    Infinity,
}

impl Exponent {
    pub fn new(p: f64) -> Result<Self> {
        if p == f64::INFINITY {
            Ok(Exponent::Infinity)
        } else if p.is_finite() && p >= 1.0 {
            Ok(Exponent::Finite(p))
        } else {
            Err(Error::invalid("p", format!("{p} is not in [1, ∞]")))
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Exponent::Infinity)
    }

    pub fn value(self) -> f64 {
        match self {
            Exponent::Finite(p) => p,
            Exponent::Infinity => f64::INFINITY,
        }
    }

    pub fn reciprocal(self) -> f64 {
        match self {
            Exponent::Finite(p) => 1.0 / p,
            Exponent::Infinity => 0.0,
        }
    }

    /// Short label for file names: `2`, `1.5`, `inf`.
    pub fn label(self) -> String {
        match self {
            Exponent::Finite(p) => format!("{p}"),
            Exponent::Infinity => "inf".into(),
        }
    }
}

impl fmt::Display for Exponent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for Exponent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "inf" | "infinity" | "∞" => Ok(Exponent::Infinity),
            t => Exponent::new(t.parse().map_err(|_| Error::invalid("p", format!("cannot parse `{s}`")))?),
        }
    }
}

impl Serialize for Exponent {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Exponent::Finite(p) => s.serialize_f64(*p),
            Exponent::Infinity => s.serialize_str("inf"),
        }
    }
}

impl<'de> Deserialize<'de> for Exponent {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match NumOrStr::deserialize(d)? {
            NumOrStr::Num(v) => Exponent::new(v),
            NumOrStr::Str(s) => s.parse(),
        }
        .map_err(serde::de::Error::custom)
    }
}

/// Default `r` when `p = q = ∞`, where any finite `r ≥ 1` is admissible.
pub const DEFAULT_R_FOR_INFINITE_PQ: f64 = 2.0;

/// Regularity exponents of `u` (θ, p) and optionally of the fields (κ, q).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegularityClass {
    theta: Rational,
    p: Exponent,
    kappa: Option<Rational>,
    q: Option<Exponent>,
    r_free: Option<f64>,
}

fn open_unit(name: &'static str, v: Rational) -> Result<Rational> {
    let x = v.to_f64();
    if x > 0.0 && x < 1.0 {
        Ok(v)
    } else {
        Err(Error::invalid(name, format!("{v} must lie strictly between 0 and 1")))
    }
}

impl RegularityClass {
    pub fn new(theta: f64, p: Exponent) -> Result<Self> {
        Self::exact(Rational::from_f64(theta)?, p)
    }

    pub fn exact(theta: Rational, p: Exponent) -> Result<Self> {
        Ok(RegularityClass {
            theta: open_unit("theta", theta)?,
            p,
            kappa: None,
            q: None,
            r_free: None,
        })
    }

    pub fn with_field(self, kappa: f64, q: Exponent) -> Result<Self> {
        self.with_field_exact(Rational::from_f64(kappa)?, q)
    }

    pub fn with_field_exact(mut self, kappa: Rational, q: Exponent) -> Result<Self> {
        self.kappa = Some(open_unit("kappa", kappa)?);
        self.q = Some(q);
        if self.p.reciprocal() + q.reciprocal() > 1.0 + 1e-15 {
            return Err(Error::invalid("q", format!("1/p + 1/q = {} exceeds 1", self.p.reciprocal() + q.reciprocal())));
        }
        Ok(self)
    }

    /// Chooses `r` for the case `p = q = ∞`; ignored otherwise.
    pub fn with_free_r(mut self, r: f64) -> Result<Self> {
        if !(r.is_finite() && r >= 1.0) {
            return Err(Error::invalid("r", format!("{r} must be finite and at least 1")));
        }
        self.r_free = Some(r);
        Ok(self)
    }

    pub fn theta(&self) -> f64 {
        self.theta.to_f64()
    }

    pub fn theta_exact(&self) -> Rational {
        self.theta
    }

    pub fn p(&self) -> Exponent {
        self.p
    }

    pub fn kappa(&self) -> Option<f64> {
        self.kappa.map(Rational::to_f64)
    }

    pub fn kappa_exact(&self) -> Option<Rational> {
        self.kappa
    }

    pub fn q(&self) -> Option<Exponent> {
        self.q
    }

    /// `1/r = 1/p + 1/q`; arbitrary (default 2) when both are infinite.
    pub fn r(&self) -> Option<Exponent> {
        let q = self.q?;
        let s = self.p.reciprocal() + q.reciprocal();
        if s == 0.0 {
            Some(Exponent::Finite(self.r_free.unwrap_or(DEFAULT_R_FOR_INFINITE_PQ)))
        } else {
            Some(Exponent::Finite(1.0 / s))
        }
    }

    /// `θκ + κ + 3θ − 1`, exact.
    pub fn criticality(&self) -> Option<Rational> {
        let k = self.kappa?;
        let t = self.theta;
        let v = t
            .checked_mul(k)
            .and_then(|tk| tk.checked_add(k))
            .and_then(|s| s.checked_add(t.checked_mul(Rational::integer(3))?))
            .and_then(|s| s.checked_sub(Rational::ONE))
            .ok()?;
        Some(v)
    }

    /// The balanced-ladder exponent `(θκ + κ + 3θ − 1)/2`.
    pub fn predicted_exponent(&self) -> Option<f64> {
        self.criticality().map(|c| c.to_f64() / 2.0)
    }
}

// ---------------------------------------------------------------------------
// Lebesgue and weighted norms
// ---------------------------------------------------------------------------

#[inline]
fn pow_abs(x: f64, p: f64) -> f64 {
    if p == 2.0 {
        x * x
    } else if p == 1.0 {
        x.abs()
    } else {
        x.abs().powf(p)
    }
}

/// Midpoint-rule `L^p` norm over the whole grid; `p = ∞` is the grid maximum.
pub fn lp_norm(field: &GridField, p: Exponent) -> f64 {
    lp_of(field.data(), field.cell_volume(), p)
}

pub(crate) fn lp_of(data: &[f64], cell: f64, p: Exponent) -> f64 {
    match p {
        Exponent::Infinity => data.iter().fold(0.0f64, |m, v| m.max(v.abs())),
        Exponent::Finite(p) => {
            let m = data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if m == 0.0 {
                return 0.0;
            }
            // Scale by the maximum to stay clear of overflow for large p.
            let s: f64 = data.iter().map(|v| pow_abs(v / m, p)).sum();
            m * (s * cell).powf(1.0 / p)
        }
    }
}

/// `∫ f √(1+|ς|²) dx dς` for a nonnegative density.
pub fn weighted_l1(field: &GridField) -> Result<f64> {
    if let Some((index, &value)) = field.data().iter().enumerate().find(|(_, &v)| v < -1e-12) {
        return Err(Error::NegativeDensity { index, value });
    }
    let momentum: Vec<usize> = field
        .axes()
        .iter()
        .enumerate()
        .filter(|(_, a)| a.kind.is_momentum())
        .map(|(d, _)| d)
        .collect();
    let weight = GridField::from_fn(field.axes().to_vec(), |c| {
        (1.0 + momentum.iter().map(|&d| c[d] * c[d]).sum::<f64>()).sqrt()
    })?;
    let s: f64 = field.data().iter().zip(weight.data()).map(|(f, w)| f * w).sum();
    Ok(s * field.cell_volume())
}

/// `‖ ‖f(x,·)‖_{L^r_ς} ‖_{L^p_x}` for a field over position and momentum axes.
pub fn mixed_norm(field: &GridField, p: Exponent, r: Exponent) -> Result<f64> {
    let kinds = field.kinds();
    let split = kinds.iter().position(|k| k.is_momentum()).ok_or_else(|| {
        Error::AxisMismatch("mixed norm needs momentum axes".into())
    })?;
    if kinds[..split].iter().any(|k| !k.is_position()) || kinds[split..].iter().any(|k| !k.is_momentum()) {
        return Err(Error::AxisMismatch("mixed norm expects position axes followed by momentum axes".into()));
    }
    let inner: usize = field.axes()[split..].iter().map(|a| a.len).product();
    let dv: f64 = field.axes()[split..].iter().map(Axis::spacing).product();
    let dx: f64 = field.axes()[..split].iter().map(Axis::spacing).product();
    let per_x: Vec<f64> = field.data().chunks(inner).map(|row| lp_of(row, dv, r)).collect();
    Ok(lp_of(&per_x, dx, p))
}

/// `‖f(· − w) − f‖_p` for a grid-aligned shift `w` given in index units per axis.
pub fn shift_difference_norm(field: &GridField, shift: &[(AxisKind, isize)], p: Exponent) -> Result<f64> {
    let strides = field.strides();
    let shape = field.shape();
    let mut lag = vec![0isize; field.ndim()];
    for &(k, s) in shift {
        let d = field
            .axis_position(k)
            .ok_or_else(|| Error::AxisMismatch(format!("field has no axis {k}")))?;
        lag[d] = s;
    }
    let mut diff = Vec::with_capacity(field.len());
    let mut idx = vec![0usize; field.ndim()];
    for flat in 0..field.len() {
        let src: usize = (0..field.ndim())
            .map(|d| (idx[d] as isize - lag[d]).rem_euclid(shape[d] as isize) as usize * strides[d])
            .sum();
        diff.push(field.data()[src] - field.data()[flat]);
        for d in (0..field.ndim()).rev() {
            idx[d] += 1;
            if idx[d] < shape[d] {
                break;
            }
            idx[d] = 0;
        }
    }
    Ok(lp_of(&diff, field.cell_volume(), p))
}

// ---------------------------------------------------------------------------
// Pair sums
// ---------------------------------------------------------------------------

/// Default cap on the number of ordered pairs in a full double sum.
pub const DEFAULT_PAIR_BUDGET: u128 = 1 << 32;

/// Above this exponent the pair sum is scaled by its supremum before powering.
const LARGE_P: f64 = 64.0;

/// Geometry of the lag sums over a contiguous block of "pair" axes.
struct Pairs<'a> {
    data: &'a [f64],
    outer: usize,
    dims: Vec<usize>,
    inner: usize,
    spacing: Vec<f64>,
}

impl<'a> Pairs<'a> {
    fn new(field: &'a GridField, pair: &[AxisKind]) -> Result<Self> {
        if pair.is_empty() {
            return Err(Error::DimensionMismatch("pair sums need at least one pair axis".into()));
        }
        let layout = BlockLayout::new(field.axes(), pair)?;
        let spacing = pair.iter().map(|k| field.axis(*k).unwrap().spacing()).collect();
        Ok(Pairs {
            data: field.data(),
            outer: layout.outer,
            dims: layout.dims,
            inner: layout.inner,
            spacing,
        })
    }

    fn block_len(&self) -> usize {
        self.dims.iter().product()
    }

    fn lag_of(&self, flat: usize) -> Vec<usize> {
        let mut lag = vec![0; self.dims.len()];
        let mut rem = flat;
        for d in (0..self.dims.len()).rev() {
            lag[d] = rem % self.dims[d];
            rem /= self.dims[d];
        }
        lag
    }

    fn distance(&self, lag: &[usize]) -> f64 {
        lag.iter()
            .zip(&self.dims)
            .zip(&self.spacing)
            .map(|((&l, &n), &h)| {
                let m = l.min(n - l) as f64 * h;
                m * m
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Folds `g(f(p) − f(p + lag))` over every point, the pair axes wrapped.
    /// Rows (all pair axes but the last) are visited in order; each row is
    /// split at the wrap point of the last pair axis.
    fn lag_reduce(&self, lag: &[usize], g: impl Fn(f64) -> f64, init: f64, fold: impl Fn(f64, f64) -> f64) -> f64 {
        let k = self.dims.len();
        let inner = self.inner;
        let n_last = self.dims[k - 1];
        let l_last = lag[k - 1];
        let row_len = n_last * inner;
        let rows: usize = self.dims[..k - 1].iter().product();
        let cut = (n_last - l_last) * inner;
        let mut acc = init;
        let mut idx = vec![0usize; k - 1];
        for o in 0..self.outer {
            let base = o * rows * row_len;
            idx.iter_mut().for_each(|i| *i = 0);
            for r in 0..rows {
                let mut partner = 0usize;
                for d in 0..k - 1 {
                    partner = partner * self.dims[d] + (idx[d] + lag[d]) % self.dims[d];
                }
                let row = &self.data[base + r * row_len..base + (r + 1) * row_len];
                let srow = &self.data[base + partner * row_len..base + (partner + 1) * row_len];
                for (a, b) in row[..cut].iter().zip(&srow[l_last * inner..]) {
                    acc = fold(acc, g(a - b));
                }
                for (a, b) in row[cut..].iter().zip(&srow[..l_last * inner]) {
                    acc = fold(acc, g(a - b));
                }
                for d in (0..k - 1).rev() {
                    idx[d] += 1;
                    if idx[d] < self.dims[d] {
                        break;
                    }
                    idx[d] = 0;
                }
            }
        }
        acc
    }

    fn lag_sum_pow(&self, lag: &[usize], p: f64) -> f64 {
        if p == 2.0 {
            self.lag_reduce(lag, |d| d * d, 0.0, |a, b| a + b)
        } else if p == 1.0 {
            self.lag_reduce(lag, f64::abs, 0.0, |a, b| a + b)
        } else {
            self.lag_reduce(lag, |d| d.abs().powf(p), 0.0, |a, b| a + b)
        }
    }

    fn lag_max(&self, lag: &[usize]) -> f64 {
        self.lag_reduce(lag, f64::abs, 0.0, f64::max)
    }

    /// Generic weighted pair sum over the lags accepted by `keep`.
    fn pair_sum(&self, theta: f64, p: Exponent, cell_pair: f64, cell_rest: f64, keep: impl Fn(f64) -> bool + Sync) -> f64 {
        let n = self.dims.len() as f64;
        let lags: Vec<usize> = (1..self.block_len())
            .filter(|&l| keep(self.distance(&self.lag_of(l))))
            .collect();
        match p {
            Exponent::Infinity => {
                let q: Vec<f64> = lags
                    .par_iter()
                    .map(|&l| {
                        let lag = self.lag_of(l);
                        self.lag_max(&lag) / self.distance(&lag).powf(theta)
                    })
                    .collect();
                q.into_iter().fold(0.0, f64::max)
            }
            Exponent::Finite(p) if p > LARGE_P => {
                let qmax: Vec<f64> = lags
                    .par_iter()
                    .map(|&l| {
                        let lag = self.lag_of(l);
                        self.lag_max(&lag) / self.distance(&lag).powf(theta)
                    })
                    .collect();
                let qm = qmax.iter().copied().fold(0.0, f64::max);
                if qm == 0.0 {
                    return 0.0;
                }
                let parts: Vec<f64> = lags
                    .par_iter()
                    .map(|&l| {
                        let lag = self.lag_of(l);
                        let d = self.distance(&lag);
                        let scale = qm * d.powf(theta);
                        self.lag_reduce(&lag, |x| (x.abs() / scale).powf(p), 0.0, |a, b| a + b) * d.powf(-n)
                    })
                    .collect();
                let s: f64 = parts.iter().sum();
                qm * (s * cell_pair * cell_pair * cell_rest).powf(1.0 / p)
            }
            Exponent::Finite(p) => {
                let parts: Vec<f64> = lags
                    .par_iter()
                    .map(|&l| {
                        let lag = self.lag_of(l);
                        self.lag_sum_pow(&lag, p) * self.distance(&lag).powf(-(n + theta * p))
                    })
                    .collect();
                let s: f64 = parts.iter().sum();
                (s * cell_pair * cell_pair * cell_rest).powf(1.0 / p)
            }
        }
    }
}

fn check_pair_dim(pair: &[AxisKind]) -> Result<()> {
    if pair.is_empty() || pair.len() > 2 {
        return Err(Error::DimensionMismatch(format!(
            "annular sums support one or two pair axes, got {}",
            pair.len()
        )));
    }
    Ok(())
}

fn check_theta(theta: f64) -> Result<()> {
    if theta > 0.0 && theta < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid("theta", format!("{theta} must lie strictly between 0 and 1")))
    }
}

/// Full Gagliardo seminorm over every axis of a one- or two-dimensional field.
pub fn gagliardo_seminorm(field: &GridField, theta: f64, p: Exponent) -> Result<f64> {
    gagliardo_seminorm_budget(field, theta, p, DEFAULT_PAIR_BUDGET)
}

pub fn gagliardo_seminorm_budget(field: &GridField, theta: f64, p: Exponent, budget: u128) -> Result<f64> {
    check_theta(theta)?;
    let pairs = (field.len() as u128) * (field.len() as u128);
    if field.ndim() > 2 || pairs > budget {
        return Err(Error::DimensionTooLarge { points: field.len(), budget });
    }
    let kinds = field.kinds();
    let pr = Pairs::new(field, &kinds)?;
    Ok(pr.pair_sum(theta, p, field.cell_volume(), 1.0, |_| true))
}

/// Full seminorm over every axis of a field of any dimension, bounded only by
/// the pair budget. Used for the right-hand sides of the commutator bounds,
/// which need `‖u‖_{W^{θ,p}}` over the whole phase space.
pub fn phase_space_seminorm(field: &GridField, theta: f64, p: Exponent, budget: u128) -> Result<f64> {
    check_theta(theta)?;
    if (field.len() as u128) * (field.len() as u128) > budget {
        return Err(Error::DimensionTooLarge { points: field.len(), budget });
    }
    let pr = Pairs::new(field, &field.kinds())?;
    Ok(pr.pair_sum(theta, p, field.cell_volume(), 1.0, |_| true))
}

/// Lebesgue part, seminorm and the combined `W^{θ,p}` norm.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormReport {
    pub lebesgue: f64,
    pub gagliardo_seminorm: f64,
    pub total: f64,
}

pub fn sobolev_norm(field: &GridField, theta: f64, p: Exponent) -> Result<NormReport> {
    let lebesgue = lp_norm(field, p);
    let gagliardo_seminorm = gagliardo_seminorm(field, theta, p)?;
    let total = if p.is_infinite() {
        lebesgue.max(gagliardo_seminorm)
    } else {
        lebesgue + gagliardo_seminorm
    };
    Ok(NormReport {
        lebesgue,
        gagliardo_seminorm,
        total,
    })
}

const ANNULUS_SLACK: f64 = 1e-12;

fn in_annulus(d: f64, eps: f64) -> bool {
    d >= eps * (1.0 - ANNULUS_SLACK) && d <= 2.0 * eps * (1.0 + ANNULUS_SLACK)
}

fn check_annulus_scale(field: &GridField, pair: &[AxisKind], eps: f64) -> Result<()> {
    for k in pair {
        let a = field
            .axis(*k)
            .ok_or_else(|| Error::AxisMismatch(format!("field has no axis {k}")))?;
        let min = 2.0 * a.spacing();
        if eps < min * (1.0 - 1e-12) {
            return Err(Error::ScaleTooSmall { axis: *k, scale: eps, min });
        }
    }
    Ok(())
}

/// `Θ_f(ε)`: the Gagliardo sum over pairs along `pair` axes with
/// `ε ≤ |x − y| ≤ 2ε`, integrated over the remaining axes, then the p-th root.
pub fn theta_annular(field: &GridField, eps: f64, theta: f64, p: Exponent, pair: &[AxisKind]) -> Result<f64> {
    check_theta(theta)?;
    check_pair_dim(pair)?;
    check_annulus_scale(field, pair, eps)?;
    let pr = Pairs::new(field, pair)?;
    let cell_pair: f64 = pair.iter().map(|k| field.axis(*k).unwrap().spacing()).product();
    let cell_rest = field.cell_volume() / cell_pair;
    Ok(pr.pair_sum(theta, p, cell_pair, cell_rest, |d| in_annulus(d, eps)))
}

/// Point-pair reference for [`theta_annular`]: visits every ordered pair of
/// grid points along the pair axes and tests the annulus directly.
pub fn theta_annular_bruteforce(field: &GridField, eps: f64, theta: f64, p: Exponent, pair: &[AxisKind]) -> Result<f64> {
    check_theta(theta)?;
    check_pair_dim(pair)?;
    check_annulus_scale(field, pair, eps)?;
    let layout = BlockLayout::new(field.axes(), pair)?;
    let axes: Vec<Axis> = pair.iter().map(|k| *field.axis(*k).unwrap()).collect();
    let n = axes.len() as f64;
    let cell_pair: f64 = axes.iter().map(Axis::spacing).product();
    let cell_rest = field.cell_volume() / cell_pair;
    let block = layout.block_len();
    let coords = |b: usize| -> Vec<usize> {
        if layout.dims.len() == 1 {
            vec![b]
        } else {
            vec![b / layout.dims[1], b % layout.dims[1]]
        }
    };
    let dist = |a: &[usize], b: &[usize]| -> f64 {
        axes.iter()
            .enumerate()
            .map(|(d, ax)| {
                let l = (b[d] as isize - a[d] as isize).rem_euclid(ax.len as isize) as usize;
                let m = l.min(ax.len - l) as f64 * ax.spacing();
                m * m
            })
            .sum::<f64>()
            .sqrt()
    };
    let data = field.data();
    let mut acc = 0.0f64;
    for o in 0..layout.outer {
        for bx in 0..block {
            let cx = coords(bx);
            for by in 0..block {
                if bx == by {
                    continue;
                }
                let cy = coords(by);
                let d = dist(&cx, &cy);
                if !in_annulus(d, eps) {
                    continue;
                }
                for j in 0..layout.inner {
                    let fx = data[(o * block + bx) * layout.inner + j];
                    let fy = data[(o * block + by) * layout.inner + j];
                    match p {
                        Exponent::Infinity => acc = acc.max((fx - fy).abs() / d.powf(theta)),
                        Exponent::Finite(p) => acc += pow_abs(fx - fy, p) / d.powf(n + theta * p),
                    }
                }
            }
        }
    }
    Ok(match p {
        Exponent::Infinity => acc,
        Exponent::Finite(p) => (acc * cell_pair * cell_pair * cell_rest).powf(1.0 / p),
    })
}

/// `ω_f(ε,σ) = Σ_t w_t (Θ_{f(t)}(ε) + Θ_{f(t)}(σ))` over trajectory slices with
/// quadrature weights `w_t`.
pub fn omega_modulus(
    slices: &[GridField],
    weights: &[f64],
    eps: f64,
    sigma: f64,
    theta: f64,
    p: Exponent,
    pair: &[AxisKind],
) -> Result<f64> {
    if slices.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} slices but {} quadrature weights",
            slices.len(),
            weights.len()
        )));
    }
    let mut total = 0.0;
    for (f, &w) in slices.iter().zip(weights) {
        total += w * (theta_annular(f, eps, theta, p, pair)? + theta_annular(f, sigma, theta, p, pair)?);
    }
    Ok(total)
}

/// [`omega_modulus`] for a field carrying a time axis, midpoint rule in time.
pub fn omega_modulus_timed(field: &GridField, eps: f64, sigma: f64, theta: f64, p: Exponent, pair: &[AxisKind]) -> Result<f64> {
    let t = field
        .axis(AxisKind::T)
        .ok_or_else(|| Error::AxisMismatch("field has no time axis".into()))?;
    let slices: Vec<GridField> = (0..t.len)
        .map(|i| field.restrict(&[(AxisKind::T, i)]))
        .collect::<Result<_>>()?;
    let weights = vec![t.spacing(); t.len];
    omega_modulus(&slices, &weights, eps, sigma, theta, p, pair)
}
