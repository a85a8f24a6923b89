//! Path-level simulation of stable, tempered stable and mixed stable
//! subordinators, their first-passage (inverse) processes, and the
//! composition `D_{β,θ}(Y_α(t))`.
//!
//! Driver paths live on a uniform grid in operational time. The inverse
//! process is read off with the left-endpoint convention: `Y(t)` is the last
//! grid point before the driver first exceeds `t`, so the sampled value never
//! overshoots the true infimum and undershoots it by at most one grid step.

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};
use crate::sampling::{OneSidedStable, RngStream, TemperedStable};

pub const DEFAULT_GRID_STEP: f64 = 1e-3;

/// Hard cap on driver steps before a first-passage search gives up.
const MAX_DRIVER_STEPS: usize = 200_000_000;

/// A sampled nondecreasing function: strictly increasing `times` from 0 and
/// nondecreasing `values` from 0.
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonePath {
    times: Vec<f64>,
    values: Vec<f64>,
}

impl MonotonePath {
    pub fn new(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if times.is_empty() || times.len() != values.len() {
            return Err(Error::Degenerate(format!(
                "monotone path needs equal, nonzero lengths (got {} times, {} values)",
                times.len(),
                values.len()
            )));
        }
        if times[0] != 0.0 || values[0] != 0.0 {
            return Err(Error::Degenerate("monotone path must start at (0, 0)".into()));
        }
        if times.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Degenerate("path times must be strictly increasing".into()));
        }
        if values.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::Degenerate("path values must be nondecreasing".into()));
        }
        Ok(Self { times, values })
    }

    pub(crate) fn from_parts(times: Vec<f64>, values: Vec<f64>) -> Self {
        debug_assert_eq!(times.len(), values.len());
        Self { times, values }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last_value(&self) -> f64 {
        *self.values.last().unwrap_or(&0.0)
    }

    /// Right-continuous step interpolation: the value at the last grid time
    /// not after `t`.
    pub fn value_at(&self, t: f64) -> f64 {
        let i = self.times.partition_point(|x| *x <= t);
        if i == 0 {
            0.0
        } else {
            self.values[i - 1]
        }
    }

    /// The same step function recorded only at `times` (plus the origin).
    pub fn restricted(&self, times: &[f64]) -> MonotonePath {
        let mut ts = vec![0.0];
        ts.extend(times.iter().copied().filter(|t| *t > 0.0));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        let vs = ts.iter().map(|t| self.value_at(*t)).collect();
        MonotonePath::from_parts(ts, vs)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SubordinatorKind {
    Stable {
        alpha: f64,
    },
    Tempered {
        beta: f64,
        theta: f64,
    },
    Mixed {
        alpha1: f64,
        alpha2: f64,
        c1: f64,
        c2: f64,
    },
    /// `α = 1` is accepted and means `Y(t) = t`.
    InverseStable {
        alpha: f64,
    },
    InverseMixed {
        alpha1: f64,
        alpha2: f64,
        c1: f64,
        c2: f64,
    },
    /// `D_{β,θ}(Y_α(t))`; `α = 1` reduces to the tempered subordinator.
    TemperedOfInverseStable {
        beta: f64,
        theta: f64,
        alpha: f64,
    },
    Identity,
}

/// A random clock, as written in scenario configs:
/// `{"kind":"inverse_stable","alpha":0.7,"grid_step":0.001}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubordinatorSpec {
    #[serde(flatten)]
    pub kind: SubordinatorKind,
    #[serde(default = "default_grid_step")]
    pub grid_step: f64,
}

fn default_grid_step() -> f64 {
    DEFAULT_GRID_STEP
}

impl SubordinatorSpec {
    pub fn new(kind: SubordinatorKind, grid_step: f64) -> Result<Self> {
        let spec = Self { kind, grid_step };
        spec.validate()?;
        Ok(spec)
    }

    pub fn identity() -> Self {
        Self {
            kind: SubordinatorKind::Identity,
            grid_step: DEFAULT_GRID_STEP,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.grid_step.is_finite() && self.grid_step > 0.0) {
            return Err(Error::invalid(
                "grid_step",
                format!("must be positive, got {}", self.grid_step),
            ));
        }
        match self.kind {
            SubordinatorKind::Stable { alpha } => open_index("alpha", alpha),
            SubordinatorKind::Tempered { beta, theta } => {
                open_index("beta", beta)?;
                positive("theta", theta)
            }
            SubordinatorKind::Mixed {
                alpha1,
                alpha2,
                c1,
                c2,
            }
            | SubordinatorKind::InverseMixed {
                alpha1,
                alpha2,
                c1,
                c2,
            } => validate_mixed(alpha1, alpha2, c1, c2),
            SubordinatorKind::InverseStable { alpha } => half_open_index("alpha", alpha),
            SubordinatorKind::TemperedOfInverseStable { beta, theta, alpha } => {
                open_index("beta", beta)?;
                positive("theta", theta)?;
                half_open_index("alpha", alpha)
            }
            SubordinatorKind::Identity => Ok(()),
        }
    }

    /// True when the clock is `t ↦ t` exactly.
    pub fn is_identity(&self) -> bool {
        matches!(
            self.kind,
            SubordinatorKind::Identity | SubordinatorKind::InverseStable { alpha: 1.0 }
        )
    }

    /// True for clocks without finite moments (untempered stable drivers used
    /// directly as time changes).
    pub fn is_heavy_tailed(&self) -> bool {
        matches!(
            self.kind,
            SubordinatorKind::Stable { .. } | SubordinatorKind::Mixed { .. }
        )
    }
}

fn open_index(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in (0, 1), got {v}")))
    }
}

fn half_open_index(field: &str, v: f64) -> Result<()> {
    if v > 0.0 && v <= 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must lie in (0, 1], got {v}")))
    }
}

fn positive(field: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(field, format!("must be positive, got {v}")))
    }
}

fn validate_mixed(alpha1: f64, alpha2: f64, c1: f64, c2: f64) -> Result<()> {
    open_index("alpha1", alpha1)?;
    open_index("alpha2", alpha2)?;
    if alpha1 >= alpha2 {
        return Err(Error::invalid(
            "alpha1",
            format!("must be below alpha2 ({alpha1} >= {alpha2})"),
        ));
    }
    if !(c1.is_finite() && c1 >= 0.0) {
        return Err(Error::invalid("c1", format!("must be nonnegative, got {c1}")));
    }
    if !(c2.is_finite() && c2 >= 0.0) {
        return Err(Error::invalid("c2", format!("must be nonnegative, got {c2}")));
    }
    if (c1 + c2 - 1.0).abs() > 1e-12 {
        return Err(Error::invalid(
            "c2",
            format!("weights must sum to 1, got {c1} + {c2}"),
        ));
    }
    Ok(())
}

fn check_step(horizon: f64, step: f64) -> Result<()> {
    check_domain(step.is_finite() && step > 0.0, "grid step", step)?;
    check_domain(horizon.is_finite() && horizon >= step, "horizon", horizon)
}

/// `{0, step, 2·step, …, n·step}` with `n·step ≥ horizon`.
pub fn uniform_grid(horizon: f64, step: f64) -> Vec<f64> {
    let n = (horizon / step - 1e-9).ceil().max(1.0) as usize;
    (0..=n).map(|i| i as f64 * step).collect()
}

/// Increment generator for stable-type drivers on a fixed step.
///
/// The first component draws from the caller's stream and the second from a
/// child stream, so a mixed driver with zero second weight consumes exactly
/// the same variates as the plain stable driver.
struct Driver {
    primary: Option<(OneSidedStable, f64)>,
    secondary: Option<(OneSidedStable, f64, RngStream)>,
}

impl Driver {
    fn stable(alpha: f64, step: f64) -> Result<Self> {
        Self::mixed_parts(alpha, 1.0, None, step, None)
    }

    fn mixed(alpha1: f64, alpha2: f64, c1: f64, c2: f64, step: f64, rng: &RngStream) -> Result<Self> {
        validate_mixed(alpha1, alpha2, c1, c2)?;
        Self::mixed_parts(alpha1, c1, Some((alpha2, c2)), step, Some(rng))
    }

    fn mixed_parts(
        alpha1: f64,
        c1: f64,
        second: Option<(f64, f64)>,
        step: f64,
        rng: Option<&RngStream>,
    ) -> Result<Self> {
        let gen1 = OneSidedStable::new(alpha1)?;
        let primary = (c1 > 0.0).then(|| (gen1, (c1 * step).powf(1.0 / alpha1)));
        let secondary = match (second, rng) {
            (Some((alpha2, c2)), Some(rng)) if c2 > 0.0 => Some((
                OneSidedStable::new(alpha2)?,
                (c2 * step).powf(1.0 / alpha2),
                rng.child(1),
            )),
            _ => None,
        };
        Ok(Self { primary, secondary })
    }

    fn from_inverse_spec(spec: &SubordinatorSpec, step: f64, rng: &RngStream) -> Result<Self> {
        match spec.kind {
            SubordinatorKind::InverseStable { alpha } => Self::stable(alpha, step),
            SubordinatorKind::InverseMixed {
                alpha1,
                alpha2,
                c1,
                c2,
            } => Self::mixed(alpha1, alpha2, c1, c2, step, rng),
            _ => Err(Error::Unsupported(format!(
                "no first-passage driver for {:?}",
                spec.kind
            ))),
        }
    }

    fn increment(&mut self, rng: &mut RngStream) -> f64 {
        let mut dx = 0.0;
        if let Some((gen, scale)) = &self.primary {
            dx += scale * gen.sample(rng);
        }
        if let Some((gen, scale, own)) = &mut self.secondary {
            dx += *scale * gen.sample(own);
        }
        dx
    }

    fn path(&mut self, horizon: f64, step: f64, rng: &mut RngStream) -> MonotonePath {
        let times = uniform_grid(horizon, step);
        let mut values = Vec::with_capacity(times.len());
        values.push(0.0);
        let mut acc = 0.0;
        for _ in 1..times.len() {
            acc += self.increment(rng);
            values.push(acc);
        }
        MonotonePath::from_parts(times, values)
    }

    /// Extends `values` until its last entry exceeds `level` and, when
    /// `even` is set, the path has an even number of steps.
    fn extend_past(&mut self, values: &mut Vec<f64>, level: f64, even: bool, rng: &mut RngStream) -> Result<()> {
        while *values.last().unwrap() <= level || (even && values.len() % 2 == 0) {
            if values.len() > MAX_DRIVER_STEPS {
                return Err(Error::InsufficientPath {
                    level,
                    context: format!("driver still below the level after {MAX_DRIVER_STEPS} steps"),
                });
            }
            // Grow geometrically; the heavy tail rules out an a priori horizon.
            values.reserve(values.len());
            let next = values.last().unwrap() + self.increment(rng);
            values.push(next);
        }
        Ok(())
    }
}

/// Stable subordinator `D_α` on the grid `{0, step, …}` covering `horizon`:
/// i.i.d. increments `step^{1/α}·S`.
pub fn stable_path(alpha: f64, horizon: f64, step: f64, rng: &mut RngStream) -> Result<MonotonePath> {
    check_step(horizon, step)?;
    Ok(Driver::stable(alpha, step)?.path(horizon, step, rng))
}

/// Mixed stable subordinator `L(t) = D_{α₁}(c₁t) + D_{α₂}(c₂t)` with
/// independent components; its Laplace exponent is `c₁s^{α₁} + c₂s^{α₂}`.
pub fn mixed_path(
    alpha1: f64,
    alpha2: f64,
    c1: f64,
    c2: f64,
    horizon: f64,
    step: f64,
    rng: &mut RngStream,
) -> Result<MonotonePath> {
    check_step(horizon, step)?;
    let parent = rng.clone();
    Ok(Driver::mixed(alpha1, alpha2, c1, c2, step, &parent)?.path(horizon, step, rng))
}

/// Tempered stable subordinator `D_{β,θ}` on the uniform grid; steps with
/// low rejection acceptance are split automatically.
pub fn tempered_path(beta: f64, theta: f64, horizon: f64, step: f64, rng: &mut RngStream) -> Result<MonotonePath> {
    check_step(horizon, step)?;
    let times = uniform_grid(horizon, step);
    let values = subordinate_at(beta, theta, &times, rng)?;
    Ok(MonotonePath::from_parts(times, values))
}

/// `D_{β,θ}` evaluated at the given nondecreasing points by independent
/// increments over consecutive gaps (starting from `D(0) = 0`).
pub fn subordinate_at(beta: f64, theta: f64, inner: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    let gen = TemperedStable::new(beta, theta)?;
    let mut out = Vec::with_capacity(inner.len());
    let mut prev = 0.0;
    let mut acc = 0.0;
    for &x in inner {
        check_domain(x.is_finite() && x >= 0.0, "inner time", x)?;
        if x < prev {
            return Err(Error::Ordering { start: prev, end: x });
        }
        acc += gen.increment_split(x - prev, rng)?;
        out.push(acc);
        prev = x;
    }
    Ok(out)
}

/// Left-endpoint first passage: `times[i-1]` for the first `i` with
/// `values[i] > t`.
pub fn first_passage(path: &MonotonePath, t: f64) -> Result<f64> {
    check_domain(t.is_finite() && t >= 0.0, "passage level", t)?;
    let i = path.values.partition_point(|v| *v <= t);
    if i == path.values.len() {
        return Err(Error::InsufficientPath {
            level: t,
            context: format!("path ends at {} below the level", path.last_value()),
        });
    }
    Ok(path.times[i.saturating_sub(1)])
}

/// Builds the driver path of an inverse spec on its grid until it exceeds
/// `level`.
pub fn driver_path(spec: &SubordinatorSpec, level: f64, rng: &mut RngStream) -> Result<MonotonePath> {
    spec.validate()?;
    let step = spec.grid_step;
    let parent = rng.clone();
    let mut driver = Driver::from_inverse_spec(spec, step, &parent)?;
    let mut values = vec![0.0];
    driver.extend_past(&mut values, level, false, rng)?;
    let times = (0..values.len()).map(|i| i as f64 * step).collect();
    Ok(MonotonePath::from_parts(times, values))
}

/// One trajectory of an inverse subordinator read at nondecreasing query
/// times.
pub fn inverse_values(spec: &SubordinatorSpec, query_times: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    check_queries(query_times)?;
    spec.validate()?;
    if spec.is_identity() {
        return Ok(query_times.to_vec());
    }
    let level = query_times.last().copied().unwrap_or(0.0);
    let path = driver_path(spec, level, rng)?;
    Ok(passages(path.values(), spec.grid_step, 1, query_times))
}

/// The inverse trajectory read at two resolutions from one driver path: the
/// fine path uses `grid_step / 2`, the coarse one sums consecutive pairs of
/// fine increments (so it is exactly a `grid_step` path). Their difference
/// estimates the left-endpoint bias with little Monte Carlo noise.
#[derive(Debug, Clone, PartialEq)]
pub struct RefinedInverse {
    pub coarse: Vec<f64>,
    pub fine: Vec<f64>,
}

pub fn inverse_values_refined(
    spec: &SubordinatorSpec,
    query_times: &[f64],
    rng: &mut RngStream,
) -> Result<RefinedInverse> {
    check_queries(query_times)?;
    spec.validate()?;
    if spec.is_identity() {
        return Ok(RefinedInverse {
            coarse: query_times.to_vec(),
            fine: query_times.to_vec(),
        });
    }
    let fine_step = spec.grid_step / 2.0;
    let parent = rng.clone();
    let mut driver = Driver::from_inverse_spec(spec, fine_step, &parent)?;
    let level = query_times.last().copied().unwrap_or(0.0);
    let mut values = vec![0.0];
    driver.extend_past(&mut values, level, true, rng)?;
    let coarse = passages(&values, spec.grid_step, 2, query_times);
    let fine = passages(&values, fine_step, 1, query_times);
    Ok(RefinedInverse { coarse, fine })
}

/// First passages of `values[0], values[stride], values[2·stride], …` (a
/// grid of spacing `step`) over each query level.
fn passages(values: &[f64], step: f64, stride: usize, query_times: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(query_times.len());
    let mut k = 0usize;
    for &q in query_times {
        while values[k * stride] <= q {
            k += 1;
        }
        out.push((k - 1) as f64 * step);
    }
    out
}

fn check_queries(query_times: &[f64]) -> Result<()> {
    let mut prev = 0.0;
    for &q in query_times {
        check_domain(q.is_finite() && q >= 0.0, "query time", q)?;
        if q < prev {
            return Err(Error::Ordering { start: prev, end: q });
        }
        prev = q;
    }
    Ok(())
}

/// Samples a clock process at the uniform grid over `[0, horizon]` given by
/// its own `grid_step`. Returns `(grid, clock values)` as a path.
pub fn sample_clock(spec: &SubordinatorSpec, horizon: f64, rng: &mut RngStream) -> Result<MonotonePath> {
    spec.validate()?;
    let step = spec.grid_step;
    check_step(horizon.max(step), step)?;
    let horizon = horizon.max(step);
    match spec.kind {
        SubordinatorKind::Identity => {
            let grid = uniform_grid(horizon, step);
            Ok(MonotonePath::from_parts(grid.clone(), grid))
        }
        SubordinatorKind::Stable { alpha } => stable_path(alpha, horizon, step, rng),
        SubordinatorKind::Mixed {
            alpha1,
            alpha2,
            c1,
            c2,
        } => mixed_path(alpha1, alpha2, c1, c2, horizon, step, rng),
        SubordinatorKind::Tempered { beta, theta } => tempered_path(beta, theta, horizon, step, rng),
        SubordinatorKind::InverseStable { .. } | SubordinatorKind::InverseMixed { .. } => {
            let grid = uniform_grid(horizon, step);
            let values = inverse_values(spec, &grid, rng)?;
            Ok(MonotonePath::from_parts(grid, values))
        }
        SubordinatorKind::TemperedOfInverseStable { beta, theta, alpha } => {
            let grid = uniform_grid(horizon, step);
            let inverse = SubordinatorSpec {
                kind: SubordinatorKind::InverseStable { alpha },
                grid_step: step,
            };
            let inner = inverse_values(&inverse, &grid, &mut rng.child(1))?;
            let values = subordinate_at(beta, theta, &inner, rng)?;
            Ok(MonotonePath::from_parts(grid, values))
        }
    }
}
