//! Monte Carlo verification: closed-form oracles, martingale and moment
//! checks, and pass/fail decisions with multiple-testing control.
//!
//! Every check produces [`CheckReport`]s with a p-value but no verdict;
//! [`decide`] then applies either a fixed band (`|z| ≤ 4`, chi-square at a
//! fixed level) or Holm's step-down procedure over a family of reports.

mod checks;
mod oracles;
pub mod stats;

pub use checks::{
    check_compensated_martingale, check_distribution_equality, check_exponential_martingale,
    check_moments, check_pgf_space_fractional, check_poisson_fit, check_uncorrelated, Compensator,
    ProcessCompensator,
};
pub use oracles::{
    oracle_clock_moments, oracle_inverse_stable_moments, oracle_ngcp_mgf, oracle_subordinator_laplace,
    oracle_tss_moments,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use stats::{chi_square_z, normal_quantile, two_sided_p};

/// Conditions under which the martingale checks are interpreted; they
/// cannot be established by simulation and are carried in report notes.
pub const INTEGRABILITY_NOTE: &str = "assumes uniform integrability of the stopped process (untested)";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestFunction {
    One,
    ValueAtS,
    IndicatorAboveMedianAtS,
}

impl TestFunction {
    pub fn name(self) -> &'static str {
        match self {
            TestFunction::One => "one",
            TestFunction::ValueAtS => "value_at_s",
            TestFunction::IndicatorAboveMedianAtS => "indicator_above_median_at_s",
        }
    }
}

/// Probe points for the martingale checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleProbe {
    #[serde(default)]
    pub u_values: Vec<f64>,
    #[serde(default)]
    pub time_pairs: Vec<(f64, f64)>,
    #[serde(default = "default_test_functions")]
    pub test_functions: Vec<TestFunction>,
}

fn default_test_functions() -> Vec<TestFunction> {
    vec![TestFunction::One]
}

impl MartingaleProbe {
    pub fn validate(&self, horizon: f64) -> Result<()> {
        if let Some(u) = self.u_values.iter().find(|u| !u.is_finite()) {
            return Err(Error::invalid("u_values", format!("must be finite, got {u}")));
        }
        for (s, t) in &self.time_pairs {
            if !(*s >= 0.0 && s < t && *t <= horizon) {
                return Err(Error::invalid(
                    "time_pairs",
                    format!("need 0 <= s < t <= horizon ({horizon}), got ({s}, {t})"),
                ));
            }
        }
        Ok(())
    }

    /// Distinct positive times appearing in the pairs, ascending.
    pub fn times(&self) -> Vec<f64> {
        let mut ts: Vec<f64> = self
            .time_pairs
            .iter()
            .flat_map(|(s, t)| [*s, *t])
            .filter(|t| *t > 0.0)
            .collect();
        ts.sort_by(f64::total_cmp);
        ts.dedup();
        ts
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CheckKind {
    /// Statistic compared with its target in standard-error units.
    ZScore,
    /// Goodness-of-fit statistic with `df` degrees of freedom.
    ChiSquare { df: usize },
}

/// One tested identity.
///
/// For [`CheckKind::ZScore`], `z_score = (statistic − target)/std_error`;
/// the decision uses the effective score
/// `max(0, |statistic − target| − allowance)/std_error`, where the
/// allowance covers known discretization bias. For chi-square reports the
/// statistic is the chi-square value, the target its null mean `df`, and
/// `z_score` the one-sided normal score of the p-value.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckReport {
    pub name: String,
    pub u_or_v: Option<f64>,
    pub s: Option<f64>,
    pub t: Option<f64>,
    pub statistic: f64,
    pub std_error: f64,
    pub target: f64,
    pub z_score: f64,
    pub allowance: f64,
    pub kind: CheckKind,
    pub p_value: f64,
    pub threshold: f64,
    pub pass: bool,
    pub n_samples: usize,
    pub notes: String,
}

impl CheckReport {
    /// A z-type report; p-value from the effective score.
    pub fn z(name: impl Into<String>, statistic: f64, std_error: f64, target: f64, allowance: f64, n_samples: usize) -> Self {
        let diff = statistic - target;
        let z_score = if std_error > 0.0 {
            diff / std_error
        } else if diff == 0.0 {
            0.0
        } else {
            diff.signum() * f64::INFINITY
        };
        let mut report = Self {
            name: name.into(),
            u_or_v: None,
            s: None,
            t: None,
            statistic,
            std_error,
            target,
            z_score,
            allowance,
            kind: CheckKind::ZScore,
            p_value: f64::NAN,
            threshold: f64::NAN,
            pass: false,
            n_samples,
            notes: String::new(),
        };
        report.p_value = two_sided_p(report.effective_z());
        report
    }

    pub fn chi_square(name: impl Into<String>, statistic: f64, df: usize, p_value: f64, n_samples: usize) -> Self {
        Self {
            name: name.into(),
            u_or_v: None,
            s: None,
            t: None,
            statistic,
            std_error: (2.0 * df as f64).sqrt(),
            target: df as f64,
            z_score: chi_square_z(p_value),
            allowance: 0.0,
            kind: CheckKind::ChiSquare { df },
            p_value,
            threshold: f64::NAN,
            pass: false,
            n_samples,
            notes: String::new(),
        }
    }

    pub fn at(mut self, u_or_v: Option<f64>, s: Option<f64>, t: Option<f64>) -> Self {
        self.u_or_v = u_or_v;
        self.s = s;
        self.t = t;
        self
    }

    pub fn with_note(mut self, note: impl AsRef<str>) -> Self {
        if !self.notes.is_empty() {
            self.notes.push_str("; ");
        }
        self.notes.push_str(note.as_ref());
        self
    }

    /// The score the decision is based on.
    pub fn effective_z(&self) -> f64 {
        match self.kind {
            CheckKind::ChiSquare { .. } => self.z_score,
            CheckKind::ZScore => {
                let excess = ((self.statistic - self.target).abs() - self.allowance).max(0.0);
                if excess == 0.0 {
                    0.0
                } else if self.std_error > 0.0 {
                    excess / self.std_error
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn threshold_at(&self, level: f64) -> f64 {
        match self.kind {
            CheckKind::ZScore => normal_quantile(1.0 - level / 2.0),
            CheckKind::ChiSquare { .. } => normal_quantile(1.0 - level),
        }
    }

    fn settle(&mut self, level: f64) {
        self.threshold = self.threshold_at(level);
        self.pass = self.p_value >= level;
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Decision {
    /// `|z_eff| ≤ z` for z-type reports, `p ≥ alpha` for chi-square reports.
    Fixed { z: f64, alpha: f64 },
    /// Holm step-down at family-wise level `alpha`.
    Holm { alpha: f64 },
}

/// Sets `threshold` and `pass` on every report.
///
/// Under Holm, reports rejected before the procedure stops get the
/// threshold of their own rank; every later report gets the threshold of
/// the stopping rank, so `pass` agrees with `|z_eff| ≤ threshold`.
pub fn decide(reports: &mut [CheckReport], decision: Decision) {
    match decision {
        Decision::Fixed { z, alpha } => {
            for r in reports.iter_mut() {
                match r.kind {
                    CheckKind::ZScore => {
                        r.threshold = z;
                        r.pass = r.effective_z() <= z;
                    }
                    CheckKind::ChiSquare { .. } => r.settle(alpha),
                }
            }
        }
        Decision::Holm { alpha } => {
            let m = reports.len();
            let mut order: Vec<usize> = (0..m).collect();
            order.sort_by(|a, b| reports[*a].p_value.total_cmp(&reports[*b].p_value).then(a.cmp(b)));
            let mut stopped: Option<f64> = None;
            for (rank, &i) in order.iter().enumerate() {
                let level = stopped.unwrap_or(alpha / (m - rank) as f64);
                let r = &mut reports[i];
                r.settle(level);
                if r.pass && stopped.is_none() {
                    stopped = Some(level);
                }
                // once stopped every remaining report is retained
                if stopped.is_some() {
                    r.pass = true;
                }
            }
        }
    }
}
