//! Counting-process simulators: non-homogeneous Poisson (NPP), generalized
//! counting (NGCP, as a weighted sum of independent NPPs and, as a
//! cross-check, by marked thinning), time-changed variants and Skellam
//! differences.
//!
//! A trajectory is simulated from one parent [`RngStream`]. Its children are
//! assigned as follows: `child(0)` base process, `child(1)` clock,
//! `child(2)` Skellam minus base, `child(3)` unshared Skellam minus clock.
//! NGCP component `j` draws from `child(j)` of the base stream.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};
use crate::rates::RateFunction;
use crate::sampling::{exponential, poisson, RngStream, MAX_POISSON_MEAN};
use crate::subordinators::{sample_clock, MonotonePath, SubordinatorSpec};

/// Operational-time margin added past the clock's final value.
const OPERATIONAL_MARGIN: f64 = 1.1;

/// Expected base jump count above which time-changed paths are built from
/// per-cell Poisson counts instead of individual jump times.
const DIRECT_JUMP_LIMIT: f64 = 1e6;

/// A right-continuous, piecewise-constant integer path started at zero.
///
/// Jump times are nondecreasing: a random clock maps several base jumps to
/// the same grid time, and those are kept as separate entries.
#[derive(Debug, Clone, PartialEq)]
pub struct CountingPath {
    jump_times: Vec<f64>,
    jump_sizes: Vec<i64>,
    horizon: f64,
}

impl CountingPath {
    pub fn new(jump_times: Vec<f64>, jump_sizes: Vec<i64>, horizon: f64) -> Result<Self> {
        check_domain(horizon.is_finite() && horizon > 0.0, "horizon", horizon)?;
        if jump_times.len() != jump_sizes.len() {
            return Err(Error::Degenerate(format!(
                "{} jump times but {} jump sizes",
                jump_times.len(),
                jump_sizes.len()
            )));
        }
        if let Some(t) = jump_times.iter().find(|t| !(**t > 0.0 && **t <= horizon)) {
            return Err(Error::Domain {
                what: "jump time",
                value: *t,
            });
        }
        if jump_times.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::Degenerate("jump times must be nondecreasing".into()));
        }
        if jump_sizes.contains(&0) {
            return Err(Error::Degenerate("jump sizes must be nonzero".into()));
        }
        Ok(Self {
            jump_times,
            jump_sizes,
            horizon,
        })
    }

    pub fn empty(horizon: f64) -> Self {
        Self {
            jump_times: Vec::new(),
            jump_sizes: Vec::new(),
            horizon,
        }
    }

    pub fn jump_times(&self) -> &[f64] {
        &self.jump_times
    }

    pub fn jump_sizes(&self) -> &[i64] {
        &self.jump_sizes
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn len(&self) -> usize {
        self.jump_times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.jump_times.is_empty()
    }

    /// Sum of the sizes of jumps at times `≤ t`.
    pub fn evaluate(&self, t: f64) -> Result<i64> {
        check_domain(t >= 0.0 && t <= self.horizon, "evaluation time", t)?;
        Ok(self.value_at(t))
    }

    pub(crate) fn value_at(&self, t: f64) -> i64 {
        let n = self.jump_times.partition_point(|x| *x <= t);
        self.jump_sizes[..n].iter().fold(0i64, |a, b| a.saturating_add(*b))
    }
}

/// The time process `t ↦ clock(t)` a trajectory was run along.
#[derive(Debug, Clone, PartialEq)]
pub enum Clock {
    Identity,
    Sampled(MonotonePath),
}

impl Clock {
    pub fn at(&self, t: f64) -> f64 {
        match self {
            Clock::Identity => t,
            Clock::Sampled(path) => path.value_at(t),
        }
    }

    fn restricted(&self, times: &[f64]) -> Clock {
        match self {
            Clock::Identity => Clock::Identity,
            Clock::Sampled(path) => Clock::Sampled(path.restricted(times)),
        }
    }
}

/// A simulated path together with the clock trajectory (or trajectories)
/// that produced it; compensators need the very same clock values.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub path: CountingPath,
    pub clock: Clock,
    /// Separate clock of the minus component for Skellam processes with
    /// unshared clocks.
    pub minus_clock: Option<Clock>,
}

impl Trajectory {
    fn untimed(path: CountingPath) -> Self {
        Self {
            path,
            clock: Clock::Identity,
            minus_clock: None,
        }
    }

    pub fn minus_clock(&self) -> &Clock {
        self.minus_clock.as_ref().unwrap_or(&self.clock)
    }

    /// Drops clock samples except at `times`, to keep many trajectories in
    /// memory. Clock values at those times are unchanged.
    pub fn restricted(self, times: &[f64]) -> Trajectory {
        Trajectory {
            clock: self.clock.restricted(times),
            minus_clock: self.minus_clock.map(|c| c.restricted(times)),
            path: self.path,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProcessKind {
    Npp {
        rate: RateFunction,
    },
    /// Jump size `j` arrives at intensity `rates[j-1]`.
    Ngcp {
        rates: Vec<RateFunction>,
    },
    Skellam {
        plus: Box<ProcessSpec>,
        minus: Box<ProcessSpec>,
        /// Run both components along one clock (the default) or along
        /// independent copies of it.
        #[serde(default = "shared_default")]
        shared_clock: bool,
    },
}

fn shared_default() -> bool {
    true
}

/// A process description as written in scenario configs, e.g.
/// `{"kind":"ngcp","rates":[...],"time_change":{"kind":"inverse_stable","alpha":0.7}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProcessSpec {
    #[serde(flatten)]
    pub kind: ProcessKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_change: Option<SubordinatorSpec>,
}

impl ProcessSpec {
    pub fn npp(rate: RateFunction) -> Self {
        Self {
            kind: ProcessKind::Npp { rate },
            time_change: None,
        }
    }

    pub fn ngcp(rates: Vec<RateFunction>) -> Self {
        Self {
            kind: ProcessKind::Ngcp { rates },
            time_change: None,
        }
    }

    pub fn skellam(plus: ProcessSpec, minus: ProcessSpec, shared_clock: bool) -> Self {
        Self {
            kind: ProcessKind::Skellam {
                plus: Box::new(plus),
                minus: Box::new(minus),
                shared_clock,
            },
            time_change: None,
        }
    }

    pub fn with_time_change(mut self, clock: SubordinatorSpec) -> Self {
        self.time_change = Some(clock);
        self
    }

    pub fn validate(&self) -> Result<()> {
        match &self.kind {
            ProcessKind::Npp { rate } => rate.validate().map_err(|e| e.within("rate"))?,
            ProcessKind::Ngcp { rates } => {
                if rates.is_empty() {
                    return Err(Error::invalid("rates", "need at least one rate function"));
                }
                for (i, r) in rates.iter().enumerate() {
                    r.validate().map_err(|e| e.within(&format!("rates[{i}]")))?;
                }
            }
            ProcessKind::Skellam { plus, minus, .. } => {
                for (name, part) in [("plus", plus), ("minus", minus)] {
                    if matches!(part.kind, ProcessKind::Skellam { .. }) {
                        return Err(Error::invalid(name, "Skellam components cannot be Skellam"));
                    }
                    if part.time_change.is_some() {
                        return Err(Error::invalid(
                            format!("{name}.time_change"),
                            "set the clock on the Skellam process, not on a component",
                        ));
                    }
                    part.validate().map_err(|e| e.within(name))?;
                }
            }
        }
        if let Some(tc) = &self.time_change {
            tc.validate().map_err(|e| e.within("time_change"))?;
        }
        Ok(())
    }

    /// Rate functions indexed by jump size (`[0]` is size 1) of a
    /// non-Skellam spec.
    pub fn rates(&self) -> Vec<&RateFunction> {
        match &self.kind {
            ProcessKind::Npp { rate } => vec![rate],
            ProcessKind::Ngcp { rates } => rates.iter().collect(),
            ProcessKind::Skellam { plus, .. } => plus.rates(),
        }
    }

    /// `(plus rates, minus rates)`; the minus side is empty unless Skellam.
    pub fn signed_rates(&self) -> (Vec<&RateFunction>, Vec<&RateFunction>) {
        match &self.kind {
            ProcessKind::Skellam { plus, minus, .. } => (plus.rates(), minus.rates()),
            _ => (self.rates(), Vec::new()),
        }
    }

    pub fn is_skellam(&self) -> bool {
        matches!(self.kind, ProcessKind::Skellam { .. })
    }

    /// Time change other than the identity, if any.
    pub fn effective_clock(&self) -> Option<&SubordinatorSpec> {
        self.time_change.as_ref().filter(|tc| !tc.is_identity())
    }
}

/// NPP jump times on `(0, horizon]`: unit-rate arrivals pushed through
/// `Λ⁻¹` for constant and power-law rates, thinning for piecewise rates.
pub fn simulate_npp(rate: &RateFunction, horizon: f64, rng: &mut RngStream) -> Result<CountingPath> {
    check_domain(horizon.is_finite() && horizon > 0.0, "horizon", horizon)?;
    rate.validate()?;
    let times = npp_times(rate, horizon, rng)?;
    let sizes = vec![1; times.len()];
    Ok(CountingPath {
        jump_times: times,
        jump_sizes: sizes,
        horizon,
    })
}

fn npp_times(rate: &RateFunction, horizon: f64, rng: &mut RngStream) -> Result<Vec<f64>> {
    let mut times = Vec::new();
    match rate {
        RateFunction::PiecewiseConstant { .. } => {
            let bound = rate.upper_bound(0.0, horizon)?;
            if bound == 0.0 {
                return Ok(times);
            }
            let mut t = 0.0;
            loop {
                t += exponential(bound, rng)?;
                if t > horizon {
                    break;
                }
                if rng.uniform() * bound < rate.intensity_at(t)? {
                    times.push(t);
                }
            }
        }
        _ => {
            let total = rate.cumulative(horizon)?;
            let mut gamma = 0.0;
            loop {
                gamma += exponential(1.0, rng)?;
                if gamma > total {
                    break;
                }
                times.push(rate.inverse_cumulative(gamma)?.min(horizon));
            }
        }
    }
    Ok(times)
}

/// NGCP as `Σ_j j·N_j` with independent NPPs `N_j` of rate `rates[j-1]`,
/// component `j` on `rng.child(j)`. Simultaneous jumps are ordered by `j`.
pub fn simulate_ngcp(rates: &[RateFunction], horizon: f64, rng: &RngStream) -> Result<CountingPath> {
    check_domain(horizon.is_finite() && horizon > 0.0, "horizon", horizon)?;
    if rates.is_empty() {
        return Err(Error::invalid("rates", "need at least one rate function"));
    }
    let mut jumps = Vec::new();
    for (i, rate) in rates.iter().enumerate() {
        let j = i as u64 + 1;
        let path = simulate_npp(rate, horizon, &mut rng.child(j))?;
        jumps.extend(path.jump_times.into_iter().map(|t| (t, j as i64)));
    }
    Ok(from_jumps(jumps, horizon))
}

fn from_jumps(mut jumps: Vec<(f64, i64)>, horizon: f64) -> CountingPath {
    jumps.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.abs().cmp(&b.1.abs())).then(b.1.cmp(&a.1)));
    let (jump_times, jump_sizes) = jumps.into_iter().unzip();
    CountingPath {
        jump_times,
        jump_sizes,
        horizon,
    }
}

/// NGCP by thinning one NPP of rate `Σ_j λ_j(t)` and marking each accepted
/// point with size `j` with probability `λ_j(τ)/Σ_i λ_i(τ)`.
pub fn simulate_ngcp_marked(rates: &[RateFunction], horizon: f64, rng: &mut RngStream) -> Result<CountingPath> {
    check_domain(horizon.is_finite() && horizon > 0.0, "horizon", horizon)?;
    if rates.is_empty() {
        return Err(Error::invalid("rates", "need at least one rate function"));
    }
    let mut bound = 0.0;
    for rate in rates {
        rate.validate()?;
        bound += rate.upper_bound(0.0, horizon)?;
    }
    let mut jumps = Vec::new();
    if bound == 0.0 {
        return Ok(CountingPath::empty(horizon));
    }
    let mut intensities = vec![0.0; rates.len()];
    let mut t = 0.0;
    loop {
        t += exponential(bound, rng)?;
        if t > horizon {
            break;
        }
        let mut total = 0.0;
        for (slot, rate) in intensities.iter_mut().zip(rates) {
            *slot = rate.intensity_at(t)?;
            total += *slot;
        }
        let u = rng.uniform() * bound;
        if u >= total {
            continue;
        }
        // u is uniform on [0, total) given acceptance; reuse it as the mark
        let mut acc = 0.0;
        let mut mark = rates.len();
        for (i, l) in intensities.iter().enumerate() {
            acc += l;
            if u < acc {
                mark = i + 1;
                break;
            }
        }
        jumps.push((t, mark as i64));
    }
    Ok(from_jumps(jumps, horizon))
}

/// Simulates one trajectory of any supported process from the parent
/// stream (see the module docs for the stream layout).
pub fn simulate(spec: &ProcessSpec, horizon: f64, parent: &RngStream) -> Result<Trajectory> {
    check_domain(horizon.is_finite() && horizon > 0.0, "horizon", horizon)?;
    spec.validate()?;
    match &spec.kind {
        ProcessKind::Skellam {
            plus,
            minus,
            shared_clock,
        } => simulate_skellam(plus, minus, *shared_clock, spec.effective_clock(), horizon, parent),
        _ => match spec.effective_clock() {
            None => Ok(Trajectory::untimed(simulate_base(spec, horizon, &mut parent.child(0))?)),
            Some(tc) => {
                let clock = sample_clock(tc, horizon, &mut parent.child(1))?;
                let path = time_changed(spec, &clock, horizon, &mut parent.child(0))?;
                Ok(Trajectory {
                    path,
                    clock: Clock::Sampled(clock),
                    minus_clock: None,
                })
            }
        },
    }
}

fn simulate_base(spec: &ProcessSpec, horizon: f64, rng: &mut RngStream) -> Result<CountingPath> {
    match &spec.kind {
        ProcessKind::Npp { rate } => simulate_npp(rate, horizon, rng),
        ProcessKind::Ngcp { rates } => simulate_ngcp(rates, horizon, rng),
        ProcessKind::Skellam { .. } => Err(Error::Unsupported("nested Skellam process".into())),
    }
}

/// Runs the base process of `spec` in operational time and maps each jump
/// at `τ` to the first clock grid time `t` with `clock(t) ≥ τ`.
pub fn time_changed(spec: &ProcessSpec, clock: &MonotonePath, horizon: f64, rng: &mut RngStream) -> Result<CountingPath> {
    let grid: Vec<f64> = clock
        .times()
        .iter()
        .map(|t| if *t > horizon && *t <= horizon * (1.0 + 1e-9) { horizon } else { *t })
        .take_while(|t| *t <= horizon)
        .collect();
    let values = &clock.values()[..grid.len()];
    let top = *values.last().unwrap_or(&0.0);
    if top <= 0.0 {
        return Ok(CountingPath::empty(horizon));
    }
    let rates = spec.rates();
    let expected: f64 = rates.iter().map(|r| r.cumulative_unchecked(top)).sum();
    if !(expected <= DIRECT_JUMP_LIMIT) {
        return cell_counts(&rates, &grid, values, horizon, rng);
    }
    let base = simulate_base(spec, OPERATIONAL_MARGIN * top, rng)?;
    let mut jump_times = Vec::with_capacity(base.len());
    let mut jump_sizes = Vec::with_capacity(base.len());
    let mut i = 0;
    for (tau, size) in base.jump_times.iter().zip(&base.jump_sizes) {
        if *tau > top {
            break;
        }
        while values[i] < *tau {
            i += 1;
        }
        jump_times.push(grid[i]);
        jump_sizes.push(*size);
    }
    Ok(CountingPath {
        jump_times,
        jump_sizes,
        horizon,
    })
}

/// Time-changed path for clocks whose range holds too many base jumps to
/// list: component `j` contributes `Poisson(Λ_j(c_i) − Λ_j(c_{i-1}))` jumps
/// to grid cell `i`, recorded as a single jump of size `j·count`.
fn cell_counts(
    rates: &[&RateFunction],
    grid: &[f64],
    values: &[f64],
    horizon: f64,
    rng: &mut RngStream,
) -> Result<CountingPath> {
    let mut jump_times = Vec::new();
    let mut jump_sizes = Vec::new();
    let mut prev: Vec<f64> = vec![0.0; rates.len()];
    for i in 1..grid.len() {
        for (j, rate) in rates.iter().enumerate() {
            let now = rate.cumulative_unchecked(values[i]);
            let mean = now - prev[j];
            prev[j] = now;
            let count = huge_poisson(mean, rng)?;
            if count > 0 {
                jump_times.push(grid[i]);
                jump_sizes.push(count.saturating_mul(j as i64 + 1));
            }
        }
    }
    Ok(CountingPath {
        jump_times,
        jump_sizes,
        horizon,
    })
}

/// Poisson draw that falls back to a rounded normal beyond the exact
/// sampler's range and saturates at `i64::MAX`.
fn huge_poisson(mean: f64, rng: &mut RngStream) -> Result<i64> {
    if mean <= MAX_POISSON_MEAN {
        return Ok(poisson(mean, rng)? as i64);
    }
    check_domain(!mean.is_nan(), "Poisson mean", mean)?;
    let z = (-2.0 * rng.open_uniform().ln()).sqrt() * (std::f64::consts::TAU * rng.uniform()).cos();
    Ok((mean + mean.sqrt() * z).round() as i64)
}

fn simulate_skellam(
    plus: &ProcessSpec,
    minus: &ProcessSpec,
    shared_clock: bool,
    clock: Option<&SubordinatorSpec>,
    horizon: f64,
    parent: &RngStream,
) -> Result<Trajectory> {
    let mut plus_rng = parent.child(0);
    let mut minus_rng = parent.child(2);
    let (p, m, clock, minus_clock) = match clock {
        None => (
            simulate_base(plus, horizon, &mut plus_rng)?,
            simulate_base(minus, horizon, &mut minus_rng)?,
            Clock::Identity,
            None,
        ),
        Some(tc) => {
            let c_plus = sample_clock(tc, horizon, &mut parent.child(1))?;
            let c_minus = if shared_clock {
                None
            } else {
                Some(sample_clock(tc, horizon, &mut parent.child(3))?)
            };
            let p = time_changed(plus, &c_plus, horizon, &mut plus_rng)?;
            let m = time_changed(minus, c_minus.as_ref().unwrap_or(&c_plus), horizon, &mut minus_rng)?;
            (p, m, Clock::Sampled(c_plus), c_minus.map(Clock::Sampled))
        }
    };
    let jumps = p
        .jump_times
        .iter()
        .copied()
        .zip(p.jump_sizes.iter().copied())
        .chain(m.jump_times.iter().copied().zip(m.jump_sizes.iter().map(|s| -s)))
        .collect();
    Ok(Trajectory {
        path: from_jumps(jumps, horizon),
        clock,
        minus_clock,
    })
}

/// Simulates paths `0..n` with parent streams `RngStream::new(seed, i)`,
/// in parallel on the current rayon pool, returned in index order. When
/// `keep_clock_at` is given, clocks are recorded only at those times.
pub fn simulate_paths(
    spec: &ProcessSpec,
    horizon: f64,
    seed: u64,
    n: usize,
    keep_clock_at: Option<&[f64]>,
) -> Result<Vec<Trajectory>> {
    spec.validate()?;
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let traj = simulate(spec, horizon, &RngStream::new(seed, i))?;
            Ok(match keep_clock_at {
                Some(times) => traj.restricted(times),
                None => traj,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::subordinators::SubordinatorKind;
    use statrs::function::gamma::gamma;

    fn constant(l: f64) -> RateFunction {
        RateFunction::constant(l).unwrap()
    }

    fn mean_se(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let m = xs.iter().sum::<f64>() / n;
        let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, (v / n).sqrt())
    }

    fn values_at(spec: &ProcessSpec, t: f64, seed: u64, n: usize) -> Vec<f64> {
        simulate_paths(spec, t, seed, n, Some(&[t]))
            .unwrap()
            .iter()
            .map(|tr| tr.path.evaluate(t).unwrap() as f64)
            .collect()
    }

    fn inverse(alpha: f64) -> SubordinatorSpec {
        SubordinatorSpec::new(SubordinatorKind::InverseStable { alpha }, 1e-3).unwrap()
    }

    #[test]
    fn evaluate_examples() {
        let p = CountingPath::new(vec![0.5, 0.7], vec![1, 2], 1.0).unwrap();
        assert_eq!(p.evaluate(0.0).unwrap(), 0);
        assert_eq!(p.evaluate(0.7).unwrap(), 3);
        assert_eq!(p.evaluate(0.5 - 1e-12).unwrap(), 0);
        assert_eq!(p.evaluate(1.0).unwrap(), 3);
        assert!(matches!(p.evaluate(1.5), Err(Error::Domain { .. })));
        assert!(p.evaluate(-0.1).is_err());
        assert!(CountingPath::new(vec![0.7, 0.5], vec![1, 1], 1.0).is_err());
        assert!(CountingPath::new(vec![0.5], vec![0], 1.0).is_err());
        assert!(CountingPath::new(vec![1.5], vec![1], 1.0).is_err());
    }

    #[test]
    fn zero_rate_gives_empty_path() {
        let p = simulate_npp(&constant(0.0), 5.0, &mut RngStream::new(0, 0)).unwrap();
        assert!(p.is_empty());
        let q = simulate_ngcp_marked(&[constant(0.0), constant(0.0)], 5.0, &mut RngStream::new(0, 0)).unwrap();
        assert!(q.is_empty());
        let r = RateFunction::piecewise(vec![1.0], vec![0.0, 0.0]).unwrap();
        assert!(simulate_npp(&r, 5.0, &mut RngStream::new(0, 0)).unwrap().is_empty());
    }

    #[test]
    fn npp_power_law_mean_and_zero_probability() {
        let spec = ProcessSpec::npp(RateFunction::power_law(1.0, 2.0).unwrap());
        let n = 100_000;
        let xs = values_at(&spec, 1.0, 1, n);
        let (m, _) = mean_se(&xs);
        assert!((m - 1.0).abs() <= 4.0 * (1.0 / n as f64).sqrt(), "{m}");
        let p0 = xs.iter().filter(|x| **x == 0.0).count() as f64 / n as f64;
        let e = (-1.0f64).exp();
        assert!((p0 - e).abs() <= 4.0 * (e * (1.0 - e) / n as f64).sqrt(), "{p0}");
    }

    #[test]
    fn npp_piecewise_thinning_mean() {
        let rate = RateFunction::piecewise(vec![0.3, 0.6], vec![2.0, 0.0, 5.0]).unwrap();
        let spec = ProcessSpec::npp(rate.clone());
        let n = 50_000;
        let runs = simulate_paths(&spec, 1.0, 2, n, None).unwrap();
        let mid: Vec<f64> = runs
            .iter()
            .map(|t| (t.path.evaluate(0.6).unwrap() - t.path.evaluate(0.3).unwrap()) as f64)
            .collect();
        assert!(mid.iter().all(|x| *x == 0.0));
        let xs: Vec<f64> = runs.iter().map(|t| t.path.evaluate(1.0).unwrap() as f64).collect();
        let (m, se) = mean_se(&xs);
        assert!((m - rate.cumulative(1.0).unwrap()).abs() <= 4.0 * se, "{m}");
    }

    #[test]
    fn ngcp_single_component_is_npp() {
        let rng = RngStream::new(3, 9);
        let r = RateFunction::power_law(2.0, 1.5).unwrap();
        let a = simulate_ngcp(std::slice::from_ref(&r), 2.0, &rng).unwrap();
        let b = simulate_npp(&r, 2.0, &mut rng.child(1)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn marked_single_component_is_npp_in_law() {
        let r = constant(1.3);
        let n = 40_000;
        let xs: Vec<f64> = (0..n)
            .map(|i| {
                let p = simulate_ngcp_marked(std::slice::from_ref(&r), 1.0, &mut RngStream::new(4, i)).unwrap();
                assert!(p.jump_sizes().iter().all(|s| *s == 1));
                p.evaluate(1.0).unwrap() as f64
            })
            .collect();
        let (m, se) = mean_se(&xs);
        assert!((m - 1.3).abs() <= 4.0 * se);
    }

    #[test]
    fn ngcp_mgf_and_mean() {
        let rates = vec![constant(0.5), constant(0.3), constant(0.2)];
        let n = 100_000;
        let xs = values_at(&ProcessSpec::ngcp(rates), 1.0, 5, n);
        let (m, se) = mean_se(&xs);
        assert!((m - 1.7).abs() <= 4.0 * se, "{m}");
        let u = 0.3f64;
        let target = (0.5 * ((u).exp() - 1.0) + 0.3 * ((2.0 * u).exp() - 1.0) + 0.2 * ((3.0 * u).exp() - 1.0)).exp();
        let ys: Vec<f64> = xs.iter().map(|x| (u * x).exp()).collect();
        let (my, sey) = mean_se(&ys);
        assert!((my - target).abs() <= 4.0 * sey, "{my} vs {target}");
    }

    #[test]
    fn marked_sizes_in_support() {
        let rates = vec![constant(0.5), RateFunction::power_law(0.3, 2.0).unwrap(), constant(0.2)];
        for i in 0..500 {
            let p = simulate_ngcp_marked(&rates, 3.0, &mut RngStream::new(6, i)).unwrap();
            assert!(p.jump_sizes().iter().all(|s| (1..=3).contains(s)));
            assert!(p.jump_times().windows(2).all(|w| w[0] <= w[1]));
        }
    }

    #[test]
    fn identity_time_change_is_bit_identical() {
        let base = ProcessSpec::ngcp(vec![constant(0.5), RateFunction::power_law(1.0, 2.0).unwrap()]);
        let with_id = base.clone().with_time_change(SubordinatorSpec::identity());
        let with_unit = base.clone().with_time_change(inverse(1.0));
        for i in 0..50 {
            let rng = RngStream::new(7, i);
            let a = simulate(&base, 2.0, &rng).unwrap();
            assert_eq!(a, simulate(&with_id, 2.0, &rng).unwrap());
            assert_eq!(a, simulate(&with_unit, 2.0, &rng).unwrap());
        }
    }

    #[test]
    fn ntfpp_mean_follows_tower_rule() {
        let spec = ProcessSpec::npp(constant(1.0)).with_time_change(inverse(0.5));
        let n = 40_000;
        let xs = values_at(&spec, 1.0, 8, n);
        let (m, se) = mean_se(&xs);
        let target = 1.0 / gamma(1.5);
        assert!((target - 1.128_379).abs() < 1e-6);
        assert!((m - target).abs() <= 4.0 * se + 1e-3, "{m} vs {target}");
    }

    #[test]
    fn time_changed_jumps_land_on_grid() {
        let spec = ProcessSpec::ngcp(vec![constant(3.0), constant(1.0)])
            .with_time_change(SubordinatorSpec::new(SubordinatorKind::InverseStable { alpha: 0.7 }, 0.01).unwrap());
        for i in 0..100 {
            let tr = simulate(&spec, 1.0, &RngStream::new(9, i)).unwrap();
            for t in tr.path.jump_times() {
                let k = (t / 0.01).round();
                assert!((t - k * 0.01).abs() < 1e-12 && *t > 0.0 && *t <= 1.0);
            }
            assert!(tr.path.jump_sizes().iter().all(|s| (1..=2).contains(s)));
            assert!(tr.path.jump_times().windows(2).all(|w| w[0] <= w[1]));
            assert!(matches!(tr.clock, Clock::Sampled(_)));
        }
    }

    #[test]
    fn stable_clock_with_huge_range_uses_cell_counts() {
        let spec = ProcessSpec::npp(constant(1.0))
            .with_time_change(SubordinatorSpec::new(SubordinatorKind::Stable { alpha: 0.2 }, 0.01).unwrap());
        for i in 0..200 {
            let tr = simulate(&spec, 1.0, &RngStream::new(10, i)).unwrap();
            let Clock::Sampled(c) = &tr.clock else { panic!() };
            let total = tr.path.evaluate(1.0).unwrap();
            assert!(total >= 0);
            if c.value_at(1.0) > 1e8 {
                // relative fluctuation of a Poisson count this large is tiny
                assert!((total as f64 / c.value_at(1.0) - 1.0).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn skellam_symmetric_mean_zero() {
        let spec = ProcessSpec::skellam(ProcessSpec::npp(constant(1.0)), ProcessSpec::npp(constant(1.0)), true);
        let n = 100_000;
        let xs = values_at(&spec, 1.0, 11, n);
        let (m, _) = mean_se(&xs);
        assert!(m.abs() <= 4.0 * (2.0 / n as f64).sqrt(), "{m}");
    }

    #[test]
    fn skellam_mean_and_exponential_identity() {
        let plus = ProcessSpec::ngcp(vec![constant(0.6), constant(0.3)]);
        let minus = ProcessSpec::ngcp(vec![constant(0.4), constant(0.2)]);
        let spec = ProcessSpec::skellam(plus, minus, true);
        let n = 100_000;
        let xs = values_at(&spec, 1.0, 12, n);
        let (m, se) = mean_se(&xs);
        let target = (0.6 - 0.4) + 2.0 * (0.3 - 0.2);
        assert!((m - target).abs() <= 4.0 * se, "{m}");
        let u = 0.4f64;
        let comp = ((u).exp() - 1.0) * 0.6 + ((2.0 * u).exp() - 1.0) * 0.3 + ((-u).exp() - 1.0) * 0.4 + ((-2.0 * u).exp() - 1.0) * 0.2;
        let ys: Vec<f64> = xs.iter().map(|x| (u * x - comp).exp()).collect();
        let (my, sey) = mean_se(&ys);
        assert!((my - 1.0).abs() <= 4.0 * sey, "{my}");
    }

    #[test]
    fn skellam_clock_sharing() {
        let tc = inverse(0.6);
        let base = || ProcessSpec::npp(constant(1.0));
        let shared = ProcessSpec::skellam(base(), base(), true).with_time_change(tc.clone());
        let split = ProcessSpec::skellam(base(), base(), false).with_time_change(tc);
        let rng = RngStream::new(13, 0);
        let a = simulate(&shared, 1.0, &rng).unwrap();
        let b = simulate(&split, 1.0, &rng).unwrap();
        assert!(a.minus_clock.is_none());
        assert!(b.minus_clock.is_some());
        assert_eq!(a.clock, b.clock);
        assert!(a.path.jump_sizes().iter().all(|s| *s == 1 || *s == -1));
    }

    #[test]
    fn spec_validation_names_fields() {
        let bad = ProcessSpec::ngcp(vec![constant(1.0), RateFunction::Constant { lambda: -1.0 }]);
        assert_eq!(bad.validate().unwrap_err().to_string().split(':').next().unwrap(), "rates[1].lambda");
        let nested = ProcessSpec::skellam(
            ProcessSpec::npp(constant(1.0)),
            ProcessSpec::npp(constant(1.0)).with_time_change(inverse(0.5)),
            true,
        );
        assert!(nested.validate().unwrap_err().to_string().starts_with("minus.time_change"));
        let tc = ProcessSpec::npp(constant(1.0))
            .with_time_change(SubordinatorSpec { kind: SubordinatorKind::InverseStable { alpha: 1.5 }, grid_step: 1e-3 });
        assert!(tc.validate().unwrap_err().to_string().starts_with("time_change.alpha"));
        assert!(ProcessSpec::ngcp(vec![]).validate().is_err());
    }

    #[test]
    fn spec_json_round_trip() {
        let json = r#"{"kind":"ngcp","rates":[{"type":"constant","lambda":0.5},{"type":"power","c":1.0,"p":2.0}],
            "time_change":{"kind":"inverse_stable","alpha":0.7,"grid_step":0.001}}"#;
        let spec: ProcessSpec = serde_json::from_str(json).unwrap();
        assert_eq!(spec.rates().len(), 2);
        assert_eq!(spec.time_change.as_ref().unwrap().kind, SubordinatorKind::InverseStable { alpha: 0.7 });
        let sk: ProcessSpec = serde_json::from_str(
            r#"{"kind":"skellam","plus":{"kind":"npp","rate":{"type":"constant","lambda":1.0}},
                "minus":{"kind":"npp","rate":{"type":"constant","lambda":2.0}}}"#,
        )
        .unwrap();
        assert!(matches!(sk.kind, ProcessKind::Skellam { shared_clock: true, .. }));
        let back: ProcessSpec = serde_json::from_str(&serde_json::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn parallel_simulation_is_ordered_and_deterministic() {
        let spec = ProcessSpec::npp(constant(2.0)).with_time_change(inverse(0.7));
        let a = simulate_paths(&spec, 1.0, 14, 64, None).unwrap();
        let b = simulate_paths(&spec, 1.0, 14, 64, None).unwrap();
        assert_eq!(a, b);
        for (i, tr) in a.iter().enumerate() {
            assert_eq!(*tr, simulate(&spec, 1.0, &RngStream::new(14, i as u64)).unwrap());
        }
    }

    #[test]
    fn restriction_keeps_clock_values() {
        let spec = ProcessSpec::npp(constant(2.0)).with_time_change(inverse(0.7));
        let full = simulate(&spec, 1.0, &RngStream::new(15, 0)).unwrap();
        let times = [0.25, 0.5, 1.0];
        let small = full.clone().restricted(&times);
        for t in times {
            assert_eq!(full.clock.at(t), small.clock.at(t));
        }
        assert_eq!(full.path, small.path);
    }
}
