//! Scenario configs: one process, a set of checks, and the report writer.
//!
//! A scenario is a JSON file such as
//!
//! ```json
//! {"name":"ntfpp_moments","seed":7,"n_paths":10000,"horizon":1.0,
//!  "process":{"kind":"npp","rate":{"type":"constant","lambda":1.0},
//!             "time_change":{"kind":"inverse_stable","alpha":0.5}},
//!  "checks":[{"check":"clock_moments","t":1.0},{"check":"count_mean","t":1.0}]}
//! ```
//!
//! All reports of a scenario form one Holm family at `significance`.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::processes::{simulate_ngcp_marked, simulate_paths, ProcessKind, ProcessSpec, Trajectory};
use crate::rates::RateFunction;
use crate::sampling::RngStream;
use crate::subordinators::{inverse_values_refined, SubordinatorKind, SubordinatorSpec};
use crate::verify::{
    check_compensated_martingale, check_distribution_equality, check_exponential_martingale, check_moments,
    check_pgf_space_fractional, check_poisson_fit, check_uncorrelated, decide, oracle_clock_moments,
    oracle_tss_moments, stats, CheckReport, Decision, MartingaleProbe, ProcessCompensator,
};

pub const MIN_PATHS: usize = 100;

/// Offset separating the seed of comparison samples from the main sample.
const COMPARISON_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

/// Bundled scenarios: `(name, config JSON)`.
pub const BUNDLED: &[(&str, &str)] = &[
    ("npp_watanabe", include_str!("../scenarios/npp_watanabe.json")),
    ("ngcp_equivalence", include_str!("../scenarios/ngcp_equivalence.json")),
    ("ngcp_weighted_vs_marked", include_str!("../scenarios/ngcp_weighted_vs_marked.json")),
    ("ntfpp_moments", include_str!("../scenarios/ntfpp_moments.json")),
    ("ngfcp_compensated", include_str!("../scenarios/ngfcp_compensated.json")),
    ("ntgstfcp_compensated", include_str!("../scenarios/ntgstfcp_compensated.json")),
    ("nmfcp_compensated", include_str!("../scenarios/nmfcp_compensated.json")),
    ("ntsfpp", include_str!("../scenarios/ntsfpp.json")),
    ("skellam_mgf", include_str!("../scenarios/skellam_mgf.json")),
    ("nfsp_symmetric", include_str!("../scenarios/nfsp_symmetric.json")),
    ("nsfpp_pgf", include_str!("../scenarios/nsfpp_pgf.json")),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "check", rename_all = "snake_case")]
pub enum CheckSpec {
    /// Unit mean of the exponential martingale at every probe `u` and time.
    ExponentialMartingale,
    /// Orthogonality of compensated increments to the probe test functions.
    CompensatedMartingale,
    /// Two-sample chi-square of the value at each time against paths of
    /// `against`, or against the marked-thinning construction when absent.
    DistributionEquality {
        times: Vec<f64>,
        #[serde(default)]
        against: Option<ProcessSpec>,
    },
    /// Mean and variance of the clock at `t`.
    ClockMoments { t: f64 },
    /// Mean of the path value at `t`.
    CountMean { t: f64 },
    /// Poisson law of `N(t) − N(s)` and its correlation with `N(s)`.
    IncrementLaw { s: f64, t: f64 },
    /// Probability generating function under a stable clock.
    Pgf { v_values: Vec<f64>, t: f64 },
}

impl CheckSpec {
    fn label(&self) -> &'static str {
        match self {
            CheckSpec::ExponentialMartingale => "exponential_martingale",
            CheckSpec::CompensatedMartingale => "compensated_martingale",
            CheckSpec::DistributionEquality { .. } => "distribution_equality",
            CheckSpec::ClockMoments { .. } => "clock_moments",
            CheckSpec::CountMean { .. } => "count_mean",
            CheckSpec::IncrementLaw { .. } => "increment_law",
            CheckSpec::Pgf { .. } => "pgf",
        }
    }

    fn times(&self) -> Vec<f64> {
        match self {
            CheckSpec::DistributionEquality { times, .. } => times.clone(),
            CheckSpec::ClockMoments { t } | CheckSpec::CountMean { t } | CheckSpec::Pgf { t, .. } => vec![*t],
            CheckSpec::IncrementLaw { s, t } => vec![*s, *t],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub seed: u64,
    pub n_paths: usize,
    pub horizon: f64,
    pub process: ProcessSpec,
    #[serde(default = "empty_probe")]
    pub probes: MartingaleProbe,
    #[serde(default)]
    pub checks: Vec<CheckSpec>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub dump_paths: bool,
    #[serde(default = "default_significance")]
    pub significance: f64,
}

fn empty_probe() -> MartingaleProbe {
    MartingaleProbe {
        u_values: Vec::new(),
        time_pairs: Vec::new(),
        test_functions: Vec::new(),
    }
}

fn default_significance() -> f64 {
    0.01
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        let scenario: Scenario = serde_json::from_str(text)?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&fs::read_to_string(path)?)
    }

    pub fn bundled(name: &str) -> Result<Self> {
        let (_, text) = BUNDLED
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| Error::invalid("name", format!("no bundled scenario named {name}")))?;
        Self::from_json(text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return Err(Error::invalid("name", "must be a nonempty file-name-safe string"));
        }
        if self.n_paths < MIN_PATHS {
            return Err(Error::invalid(
                "n_paths",
                format!("need at least {MIN_PATHS}, got {}", self.n_paths),
            ));
        }
        if !(self.horizon.is_finite() && self.horizon > 0.0) {
            return Err(Error::invalid("horizon", format!("must be positive, got {}", self.horizon)));
        }
        if !(self.significance > 0.0 && self.significance < 1.0) {
            return Err(Error::invalid(
                "significance",
                format!("must lie in (0, 1), got {}", self.significance),
            ));
        }
        self.process.validate().map_err(|e| e.within("process"))?;
        self.probes.validate(self.horizon).map_err(|e| e.within("probes"))?;
        for (i, check) in self.checks.iter().enumerate() {
            self.validate_check(check).map_err(|e| e.within(&format!("checks[{i}]")))?;
        }
        Ok(())
    }

    fn validate_check(&self, check: &CheckSpec) -> Result<()> {
        for t in check.times() {
            if !(t >= 0.0 && t <= self.horizon) {
                return Err(Error::invalid("t", format!("time {t} outside [0, {}]", self.horizon)));
            }
        }
        let clock = self.process.effective_clock();
        let heavy = clock.is_some_and(|c| c.is_heavy_tailed());
        match check {
            CheckSpec::ExponentialMartingale => {
                if self.probes.u_values.is_empty() || self.probes.time_pairs.is_empty() {
                    return Err(Error::invalid("probes", "needs u_values and time_pairs"));
                }
            }
            CheckSpec::CompensatedMartingale => {
                if heavy {
                    return Err(Error::invalid("check", "compensators of stable clocks are not integrable"));
                }
                if self.probes.test_functions.is_empty() || self.probes.time_pairs.is_empty() {
                    return Err(Error::invalid("probes", "needs test_functions and time_pairs"));
                }
            }
            CheckSpec::DistributionEquality { times, against } => {
                if times.is_empty() {
                    return Err(Error::invalid("times", "need at least one time"));
                }
                match against {
                    Some(spec) => spec.validate().map_err(|e| e.within("against"))?,
                    None => {
                        if clock.is_some() || self.process.is_skellam() {
                            return Err(Error::invalid(
                                "against",
                                "the marked construction needs a plain NPP or NGCP process",
                            ));
                        }
                    }
                }
            }
            CheckSpec::ClockMoments { .. } => {
                let spec = clock.ok_or_else(|| Error::invalid("check", "process has no random clock"))?;
                oracle_clock_moments(spec, 1.0)?;
            }
            CheckSpec::CountMean { .. } => {
                if heavy {
                    return Err(Error::invalid("check", "counts along stable clocks have no finite mean"));
                }
                if let Some(spec) = clock {
                    oracle_clock_moments(spec, 1.0)?;
                    let (plus, minus) = self.process.signed_rates();
                    if plus.iter().chain(&minus).any(|r| r.as_constant().is_none()) {
                        return Err(Error::invalid("check", "time-changed count means need constant rates"));
                    }
                }
            }
            CheckSpec::IncrementLaw { s, t } => {
                if !(s < t) {
                    return Err(Error::invalid("s", format!("need s < t, got ({s}, {t})")));
                }
                if clock.is_some() || !matches!(self.process.kind, ProcessKind::Npp { .. }) {
                    return Err(Error::invalid("check", "increment law needs a plain NPP process"));
                }
            }
            CheckSpec::Pgf { v_values, .. } => {
                let ok_clock = matches!(clock.map(|c| &c.kind), Some(SubordinatorKind::Stable { .. }));
                let ok_rate = matches!(&self.process.kind, ProcessKind::Npp { rate } if rate.as_constant().is_some());
                if !(ok_clock && ok_rate) {
                    return Err(Error::invalid(
                        "check",
                        "pgf target needs a constant-rate NPP along a stable clock",
                    ));
                }
                if let Some(v) = v_values.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                    return Err(Error::invalid("v_values", format!("must lie in [0, 1], got {v}")));
                }
            }
        }
        Ok(())
    }

    /// Times at which checks read clocks.
    fn evaluation_times(&self) -> Vec<f64> {
        let mut ts = self.probes.times();
        ts.extend(self.checks.iter().flat_map(|c| c.times()));
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

/// Simulated paths and decided reports of one scenario run.
#[derive(Debug)]
pub struct RunOutcome {
    pub reports: Vec<CheckReport>,
    pub paths: Vec<Trajectory>,
}

impl RunOutcome {
    pub fn all_pass(&self) -> bool {
        self.reports.iter().all(|r| r.pass)
    }
}

/// Simulates the scenario on the current rayon pool and evaluates its
/// checks. Results do not depend on the number of worker threads.
pub fn run(scenario: &Scenario) -> Result<RunOutcome> {
    scenario.validate()?;
    let times = scenario.evaluation_times();
    let paths = simulate_paths(
        &scenario.process,
        scenario.horizon,
        scenario.seed,
        scenario.n_paths,
        Some(&times),
    )?;
    let mut reports = Vec::new();
    for check in &scenario.checks {
        let mut rs = evaluate(scenario, check, &paths)?;
        for r in &mut rs {
            r.name = qualified(check.label(), &r.name);
        }
        reports.extend(rs);
    }
    decide(&mut reports, Decision::Holm { alpha: scenario.significance });
    Ok(RunOutcome { reports, paths })
}

fn qualified(label: &str, name: &str) -> String {
    if name.starts_with(label) {
        name.to_string()
    } else {
        format!("{label}:{name}")
    }
}

fn values_at(paths: &[Trajectory], t: f64) -> Vec<i64> {
    paths.iter().map(|p| p.path.value_at(t)).collect()
}

fn evaluate(sc: &Scenario, check: &CheckSpec, paths: &[Trajectory]) -> Result<Vec<CheckReport>> {
    let compensator = ProcessCompensator::new(&sc.process);
    match check {
        CheckSpec::ExponentialMartingale => check_exponential_martingale(paths, &compensator, &sc.probes),
        CheckSpec::CompensatedMartingale => check_compensated_martingale(paths, &compensator, &sc.probes),
        CheckSpec::DistributionEquality { times, against } => {
            let seed = sc.seed.wrapping_add(COMPARISON_SEED_OFFSET);
            let other: Vec<crate::processes::CountingPath> = match against {
                Some(spec) => simulate_paths(spec, sc.horizon, seed, sc.n_paths, Some(times))?
                    .into_iter()
                    .map(|t| t.path)
                    .collect(),
                None => {
                    let rates: Vec<RateFunction> = sc.process.rates().into_iter().cloned().collect();
                    (0..sc.n_paths as u64)
                        .into_par_iter()
                        .map(|i| simulate_ngcp_marked(&rates, sc.horizon, &mut RngStream::new(seed, i)))
                        .collect::<Result<_>>()?
                }
            };
            let mut out = Vec::new();
            for &t in times {
                let b: Vec<i64> = other.iter().map(|p| p.value_at(t)).collect();
                let note = if against.is_some() { "vs comparison process" } else { "vs marked construction" };
                out.push(check_distribution_equality(&values_at(paths, t), &b)?.at(None, None, Some(t)).with_note(note));
            }
            Ok(out)
        }
        CheckSpec::ClockMoments { t } => clock_moments(sc, *t, paths),
        CheckSpec::CountMean { t } => count_mean(sc, *t, paths),
        CheckSpec::IncrementLaw { s, t } => {
            let ProcessKind::Npp { rate } = &sc.process.kind else {
                return Err(Error::Unsupported("increment law of a non-NPP process".into()));
            };
            let increments: Vec<i64> = paths.iter().map(|p| p.path.value_at(*t) - p.path.value_at(*s)).collect();
            let mean = rate.cumulative_between(*s, *t)?;
            let fit = check_poisson_fit(&increments, mean)?.at(None, Some(*s), Some(*t));
            let first: Vec<f64> = values_at(paths, *s).into_iter().map(|x| x as f64).collect();
            let second: Vec<f64> = increments.iter().map(|x| *x as f64).collect();
            let corr = check_uncorrelated(&first, &second)?.at(None, Some(*s), Some(*t));
            Ok(vec![fit, corr])
        }
        CheckSpec::Pgf { v_values, t } => {
            let (ProcessKind::Npp { rate }, Some(SubordinatorKind::Stable { alpha })) =
                (&sc.process.kind, sc.process.effective_clock().map(|c| &c.kind))
            else {
                return Err(Error::Unsupported("pgf check configuration".into()));
            };
            check_pgf_space_fractional(paths, rate, *alpha, v_values, *t)
        }
    }
}

/// Clock moments at `t` with a grid-bias allowance.
///
/// Inverse clocks are re-simulated as coupled pairs on the configured step
/// and on half of it; the coarse sample is tested and twice the coarse/fine
/// gap serves as allowance. Composed clocks use the deterministic bound
/// `0 ≤ Y − Y_h ≤ h` pushed through the tower rule. Tempered clocks are
/// exact on the grid.
fn clock_moments(sc: &Scenario, t: f64, paths: &[Trajectory]) -> Result<Vec<CheckReport>> {
    let spec = sc
        .process
        .effective_clock()
        .ok_or_else(|| Error::Unsupported("clock moments without a clock".into()))?;
    let (mean, var) = oracle_clock_moments(spec, t)?;
    let h = spec.grid_step;
    let (samples, allowance, note) = match spec.kind {
        SubordinatorKind::InverseStable { .. } => {
            let (coarse, fine) = refined_samples(spec, t, sc.seed, sc.n_paths)?;
            let (mc, vc) = stats::mean_var(&coarse);
            let (mf, vf) = stats::mean_var(&fine);
            let allowance = (2.0 * (mc - mf).abs(), 2.0 * (vc - vf).abs());
            (coarse, allowance, format!("grid {h} with coupled half-step refinement"))
        }
        SubordinatorKind::TemperedOfInverseStable { beta, theta, .. } => {
            let (m, v) = oracle_tss_moments(beta, theta, 1.0)?;
            let sd_y = (((var - v * mean / m) / (m * m)).max(0.0)).sqrt();
            let allowance = (m * h, v * h + m * m * (2.0 * sd_y * h + h * h));
            let samples = paths.iter().map(|p| p.clock.at(t)).collect();
            (samples, allowance, format!("grid {h}; inner clock bias bounded by one step"))
        }
        _ => (paths.iter().map(|p| p.clock.at(t)).collect(), (0.0, 0.0), String::new()),
    };
    let reports = check_moments(&samples, mean, var, allowance)?;
    Ok(reports
        .into_iter()
        .map(|r| {
            let r = r.at(None, None, Some(t));
            if note.is_empty() {
                r
            } else {
                r.with_note(&note)
            }
        })
        .collect())
}

/// Coarse and fine first-passage samples at `t` for `n` clock streams.
pub fn refined_samples(spec: &SubordinatorSpec, t: f64, seed: u64, n: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let r = inverse_values_refined(spec, &[t], &mut RngStream::new(seed, i).child(1))?;
            Ok((r.coarse[0], r.fine[0]))
        })
        .collect::<Result<_>>()?;
    Ok(pairs.into_iter().unzip())
}

/// Mean path value at `t` against `Σ_j j(Λ_j − T_j)` composed with the
/// clock mean; the allowance bounds the inverse-clock grid bias.
fn count_mean(sc: &Scenario, t: f64, paths: &[Trajectory]) -> Result<Vec<CheckReport>> {
    let (plus, minus) = sc.process.signed_rates();
    let net = |at: &dyn Fn(&RateFunction) -> Result<f64>| -> Result<f64> {
        let mut acc = 0.0;
        for (i, r) in plus.iter().enumerate() {
            acc += (i + 1) as f64 * at(r)?;
        }
        for (i, r) in minus.iter().enumerate() {
            acc -= (i + 1) as f64 * at(r)?;
        }
        Ok(acc)
    };
    let (target, allowance) = match sc.process.effective_clock() {
        None => (net(&|r| r.cumulative(t))?, 0.0),
        Some(spec) => {
            let rate = net(&|r| Ok(r.as_constant().unwrap_or(f64::NAN)))?;
            let (clock_mean, _) = oracle_clock_moments(spec, t)?;
            let per_step = match spec.kind {
                SubordinatorKind::InverseStable { .. } | SubordinatorKind::InverseMixed { .. } => 1.0,
                SubordinatorKind::TemperedOfInverseStable { beta, theta, .. } => oracle_tss_moments(beta, theta, 1.0)?.0,
                _ => 0.0,
            };
            (rate * clock_mean, rate.abs() * per_step * spec.grid_step)
        }
    };
    let xs: Vec<f64> = values_at(paths, t).into_iter().map(|x| x as f64).collect();
    let (m, _) = stats::mean_var(&xs);
    let se = stats::batch_means_se(&xs)?;
    Ok(vec![CheckReport::z("count_mean", m, se, target, allowance, xs.len()).at(None, None, Some(t))])
}

pub const REPORT_HEADER: [&str; 13] = [
    "scenario",
    "check_name",
    "u_or_v",
    "s",
    "t",
    "statistic",
    "std_error",
    "target",
    "z",
    "adjusted_threshold",
    "pass",
    "n_paths",
    "notes",
];

fn opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_default()
}

fn notes_of(r: &CheckReport) -> String {
    let mut parts = vec![format!("p={}", r.p_value)];
    if r.allowance > 0.0 {
        parts.push(format!("allowance={}", r.allowance));
        parts.push(format!("effective_z={}", r.effective_z()));
    }
    if let crate::verify::CheckKind::ChiSquare { df } = r.kind {
        parts.push(format!("chi-square df={df}"));
    }
    if !r.notes.is_empty() {
        parts.push(r.notes.clone());
    }
    parts.join("; ")
}

/// Writes `report.csv` (and `paths.csv` when requested) under
/// `<root>/<scenario name>/`; returns that directory.
pub fn write_outputs(sc: &Scenario, outcome: &RunOutcome, root: &Path) -> Result<PathBuf> {
    let dir = root.join(&sc.name);
    fs::create_dir_all(&dir)?;
    let mut w = csv::Writer::from_path(dir.join("report.csv"))?;
    w.write_record(REPORT_HEADER)?;
    for r in &outcome.reports {
        w.write_record([
            sc.name.clone(),
            r.name.clone(),
            opt(r.u_or_v),
            opt(r.s),
            opt(r.t),
            r.statistic.to_string(),
            r.std_error.to_string(),
            r.target.to_string(),
            r.z_score.to_string(),
            r.threshold.to_string(),
            r.pass.to_string(),
            r.n_samples.to_string(),
            notes_of(r),
        ])?;
    }
    w.flush()?;
    if sc.dump_paths {
        let mut w = csv::Writer::from_path(dir.join("paths.csv"))?;
        w.write_record(["path_id", "jump_time", "jump_size"])?;
        for (i, p) in outcome.paths.iter().enumerate() {
            for (t, j) in p.path.jump_times().iter().zip(p.path.jump_sizes()) {
                w.write_record([i.to_string(), t.to_string(), j.to_string()])?;
            }
        }
        w.flush()?;
    }
    Ok(dir)
}
