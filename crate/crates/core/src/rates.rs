//! Deterministic intensity functions `λ(t)` and their cumulatives
//! `Λ(t) = ∫₀ᵗ λ(u) du`.
//!
//! Every variant has a closed-form cumulative and inverse, so the simulators
//! built on top of it are exact (no quadrature). Intensities are required to
//! be bounded on compact intervals; this is what the thinning simulator needs
//! and it rules out power laws with exponent below one.

use serde::{Deserialize, Serialize};

use crate::error::{check_domain, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum RateFunction {
    /// `λ(t) = lambda`.
    Constant { lambda: f64 },
    /// `Λ(t) = c·tᵖ`, hence `λ(t) = c·p·tᵖ⁻¹`. Requires `p ≥ 1`.
    #[serde(rename = "power")]
    PowerLaw { c: f64, p: f64 },
    /// Right-continuous step function: `levels[0]` on `[0, breakpoints[0])`,
    /// `levels[i]` on `[breakpoints[i-1], breakpoints[i])`, and the last level
    /// beyond the final breakpoint.
    #[serde(rename = "piecewise")]
    PiecewiseConstant {
        breakpoints: Vec<f64>,
        levels: Vec<f64>,
    },
}

impl RateFunction {
    pub fn constant(lambda: f64) -> Result<Self> {
        let rate = RateFunction::Constant { lambda };
        rate.validate()?;
        Ok(rate)
    }

    pub fn power_law(c: f64, p: f64) -> Result<Self> {
        let rate = RateFunction::PowerLaw { c, p };
        rate.validate()?;
        Ok(rate)
    }

    pub fn piecewise(breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let rate = RateFunction::PiecewiseConstant {
            breakpoints,
            levels,
        };
        rate.validate()?;
        Ok(rate)
    }

    /// Checks the variant parameters. Errors name the offending field.
    pub fn validate(&self) -> Result<()> {
        match self {
            RateFunction::Constant { lambda } => {
                if !(lambda.is_finite() && *lambda >= 0.0) {
                    return Err(Error::invalid(
                        "lambda",
                        format!("must be finite and nonnegative, got {lambda}"),
                    ));
                }
            }
            RateFunction::PowerLaw { c, p } => {
                if !(c.is_finite() && *c >= 0.0) {
                    return Err(Error::invalid(
                        "c",
                        format!("must be finite and nonnegative, got {c}"),
                    ));
                }
                if !(p.is_finite() && *p >= 1.0) {
                    return Err(Error::invalid(
                        "p",
                        format!("must be finite and at least 1 (bounded intensity), got {p}"),
                    ));
                }
            }
            RateFunction::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                if levels.len() != breakpoints.len() + 1 {
                    return Err(Error::invalid(
                        "levels",
                        format!(
                            "expected {} levels for {} breakpoints, got {}",
                            breakpoints.len() + 1,
                            breakpoints.len(),
                            levels.len()
                        ),
                    ));
                }
                if let Some(b) = breakpoints.iter().find(|b| !(b.is_finite() && **b > 0.0)) {
                    return Err(Error::invalid(
                        "breakpoints",
                        format!("must be finite and positive, got {b}"),
                    ));
                }
                if breakpoints.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::invalid("breakpoints", "must be strictly increasing"));
                }
                if let Some(l) = levels.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
                    return Err(Error::invalid(
                        "levels",
                        format!("must be finite and nonnegative, got {l}"),
                    ));
                }
            }
        }
        Ok(())
    }

    /// `λ(t)`; right limit at piecewise breakpoints.
    pub fn intensity_at(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(match self {
            RateFunction::Constant { lambda } => *lambda,
            RateFunction::PowerLaw { c, p } => {
                if *c == 0.0 {
                    0.0
                } else {
                    c * p * t.powf(p - 1.0)
                }
            }
            RateFunction::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[segment_of(breakpoints, t)],
        })
    }

    /// `Λ(t)` in closed form.
    pub fn cumulative(&self, t: f64) -> Result<f64> {
        check_time(t)?;
        Ok(self.cumulative_unchecked(t))
    }

    pub(crate) fn cumulative_unchecked(&self, t: f64) -> f64 {
        match self {
            RateFunction::Constant { lambda } => lambda * t,
            RateFunction::PowerLaw { c, p } => c * t.powf(*p),
            RateFunction::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (i, level) in levels.iter().enumerate() {
                    let end = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    if t <= end {
                        return acc + level * (t - start);
                    }
                    acc += level * (end - start);
                    start = end;
                }
                acc
            }
        }
    }

    /// `Λ(t) − Λ(s)`, the Poisson mean of the increment over `(s, t]`.
    pub fn cumulative_between(&self, s: f64, t: f64) -> Result<f64> {
        check_time(s)?;
        check_time(t)?;
        if s > t {
            return Err(Error::Ordering { start: s, end: t });
        }
        Ok(self.cumulative_unchecked(t) - self.cumulative_unchecked(s))
    }

    /// `sup_t Λ(t)`; infinite unless the intensity vanishes eventually.
    pub fn total_mass(&self) -> f64 {
        match self {
            RateFunction::Constant { lambda } if *lambda == 0.0 => 0.0,
            RateFunction::PowerLaw { c, .. } if *c == 0.0 => 0.0,
            RateFunction::PiecewiseConstant {
                breakpoints,
                levels,
            } if *levels.last().unwrap_or(&0.0) == 0.0 => {
                self.cumulative_unchecked(breakpoints.last().copied().unwrap_or(0.0))
            }
            _ => f64::INFINITY,
        }
    }

    /// `inf{u : Λ(u) ≥ y}`.
    pub fn inverse_cumulative(&self, y: f64) -> Result<f64> {
        check_domain(y.is_finite() && y >= 0.0, "cumulative level", y)?;
        if y == 0.0 {
            return Ok(0.0);
        }
        let unreachable = || Error::Unreachable {
            level: y,
            sup: self.total_mass(),
        };
        match self {
            RateFunction::Constant { lambda } => {
                if *lambda == 0.0 {
                    Err(unreachable())
                } else {
                    Ok(y / lambda)
                }
            }
            RateFunction::PowerLaw { c, p } => {
                if *c == 0.0 {
                    Err(unreachable())
                } else {
                    Ok((y / c).powf(1.0 / p))
                }
            }
            RateFunction::PiecewiseConstant {
                breakpoints,
                levels,
            } => {
                let mut acc = 0.0;
                let mut start = 0.0;
                for (i, level) in levels.iter().enumerate() {
                    let end = breakpoints.get(i).copied().unwrap_or(f64::INFINITY);
                    let mass = level * (end - start);
                    if *level > 0.0 && acc + mass >= y {
                        return Ok((start + (y - acc) / level).min(end));
                    }
                    acc += mass;
                    start = end;
                }
                Err(unreachable())
            }
        }
    }

    /// Exact supremum of `λ` over `[s, t]`.
    pub fn upper_bound(&self, s: f64, t: f64) -> Result<f64> {
        check_time(s)?;
        check_time(t)?;
        if s > t {
            return Err(Error::Ordering { start: s, end: t });
        }
        Ok(match self {
            RateFunction::Constant { lambda } => *lambda,
            // p ≥ 1: nondecreasing intensity, supremum at the right end.
            RateFunction::PowerLaw { .. } => self.intensity_at(t)?,
            RateFunction::PiecewiseConstant {
                breakpoints,
                levels,
            } => levels[segment_of(breakpoints, s)..=segment_of(breakpoints, t)]
                .iter()
                .copied()
                .fold(0.0, f64::max),
        })
    }

    /// Constant level, if this is a homogeneous rate.
    pub fn as_constant(&self) -> Option<f64> {
        match self {
            RateFunction::Constant { lambda } => Some(*lambda),
            _ => None,
        }
    }
}

fn check_time(t: f64) -> Result<()> {
    check_domain(t.is_finite() && t >= 0.0, "time", t)
}

fn segment_of(breakpoints: &[f64], t: f64) -> usize {
    breakpoints.partition_point(|b| *b <= t)
}
