//! Monte Carlo checks. Each returns undecided reports; see [`super::decide`].

use std::collections::BTreeMap;

use crate::error::{check_domain, Error, Result};
use crate::processes::{ProcessSpec, Trajectory};
use crate::rates::RateFunction;
use crate::sampling::ln_poisson_pmf;

use super::stats::{batch_means_se, central_m4, chi_square_sf, mean_var, median, BATCHES};
use super::{CheckReport, MartingaleProbe, TestFunction, INTEGRABILITY_NOTE};

/// Minimum expected count per chi-square cell.
const MIN_EXPECTED: f64 = 5.0;

/// The compensator of a path functional, evaluated along the trajectory's
/// own clock.
pub trait Compensator: Sync {
    /// `A(t)` such that `X(t) − A(t)` is a martingale.
    fn mean(&self, traj: &Trajectory, t: f64) -> f64;
    /// `φ(u, t)` such that `exp(u·X(t) − φ(u, t))` is a martingale.
    fn exponent(&self, traj: &Trajectory, u: f64, t: f64) -> f64;
}

/// Compensator of an NPP/NGCP/Skellam process with optional random clock:
/// `A(t) = Σ_j j·Λ_j(C(t)) − Σ_j j·T_j(C⁻(t))` and
/// `φ(u, t) = Σ_j (e^{uj}−1)Λ_j(C(t)) + (e^{−uj}−1)T_j(C⁻(t))`,
/// where `C` is the clock (identity when absent) and `C⁻` the minus clock.
#[derive(Debug, Clone)]
pub struct ProcessCompensator {
    plus: Vec<RateFunction>,
    minus: Vec<RateFunction>,
}

impl ProcessCompensator {
    pub fn new(spec: &ProcessSpec) -> Self {
        let (plus, minus) = spec.signed_rates();
        Self {
            plus: plus.into_iter().cloned().collect(),
            minus: minus.into_iter().cloned().collect(),
        }
    }
}

impl Compensator for ProcessCompensator {
    fn mean(&self, traj: &Trajectory, t: f64) -> f64 {
        let cp = traj.clock.at(t);
        let cm = traj.minus_clock().at(t);
        let up: f64 = self
            .plus
            .iter()
            .enumerate()
            .map(|(i, r)| (i + 1) as f64 * r.cumulative_unchecked(cp))
            .sum();
        let down: f64 = self
            .minus
            .iter()
            .enumerate()
            .map(|(i, r)| (i + 1) as f64 * r.cumulative_unchecked(cm))
            .sum();
        up - down
    }

    fn exponent(&self, traj: &Trajectory, u: f64, t: f64) -> f64 {
        let cp = traj.clock.at(t);
        let cm = traj.minus_clock().at(t);
        let up: f64 = self
            .plus
            .iter()
            .enumerate()
            .map(|(i, r)| (u * (i + 1) as f64).exp_m1() * r.cumulative_unchecked(cp))
            .sum();
        let down: f64 = self
            .minus
            .iter()
            .enumerate()
            .map(|(i, r)| (-u * (i + 1) as f64).exp_m1() * r.cumulative_unchecked(cm))
            .sum();
        up + down
    }
}

fn mean_report(name: &str, xs: &[f64], target: f64) -> Result<CheckReport> {
    let (m, _) = mean_var(xs);
    let se = batch_means_se(xs)?;
    Ok(CheckReport::z(name, m, se, target, 0.0, xs.len()))
}

/// `E[exp(u·X(t) − φ(u,t))] = 1` for each `u` in the probe and each
/// distinct positive time of its pairs.
pub fn check_exponential_martingale(
    paths: &[Trajectory],
    compensator: &dyn Compensator,
    probe: &MartingaleProbe,
) -> Result<Vec<CheckReport>> {
    let times = probe.times();
    let mut reports = Vec::new();
    for &u in &probe.u_values {
        for &t in &times {
            let mut finite = true;
            let xs: Vec<f64> = paths
                .iter()
                .map(|p| {
                    let phi = compensator.exponent(p, u, t);
                    let x = (u * p.path.value_at(t) as f64 - phi).exp();
                    finite &= phi.is_finite() && x.is_finite();
                    x
                })
                .collect();
            if !finite {
                return Err(Error::Probe(format!(
                    "exp(u·X(t) − φ) overflows at u = {u}, t = {t}; use a smaller |u|"
                )));
            }
            reports.push(
                mean_report("exponential_martingale", &xs, 1.0)?
                    .at(Some(u), None, Some(t))
                    .with_note(INTEGRABILITY_NOTE),
            );
        }
    }
    Ok(reports)
}

fn test_values(paths: &[Trajectory], g: TestFunction, s: f64) -> Result<Vec<f64>> {
    let at_s: Vec<f64> = paths.iter().map(|p| p.path.value_at(s) as f64).collect();
    let values = match g {
        TestFunction::One => vec![1.0; paths.len()],
        TestFunction::ValueAtS => at_s,
        TestFunction::IndicatorAboveMedianAtS => {
            let m = median(&at_s);
            at_s.iter().map(|x| if *x > m { 1.0 } else { 0.0 }).collect()
        }
    };
    if g != TestFunction::One {
        let (_, var) = mean_var(&values);
        if var == 0.0 {
            return Err(Error::Probe(format!(
                "test function {} is constant across paths at s = {s}",
                g.name()
            )));
        }
    }
    Ok(values)
}

/// `E[(X(t) − X(s))·g] = 0` with `X = path − compensator`, for every time
/// pair and test function of the probe.
pub fn check_compensated_martingale(
    paths: &[Trajectory],
    compensator: &dyn Compensator,
    probe: &MartingaleProbe,
) -> Result<Vec<CheckReport>> {
    let mut reports = Vec::new();
    for &(s, t) in &probe.time_pairs {
        if s > t {
            return Err(Error::Ordering { start: s, end: t });
        }
        let increments: Vec<f64> = paths
            .iter()
            .map(|p| {
                if s == t {
                    return 0.0;
                }
                let x_t = p.path.value_at(t) as f64 - compensator.mean(p, t);
                let x_s = p.path.value_at(s) as f64 - compensator.mean(p, s);
                x_t - x_s
            })
            .collect();
        for &g in &probe.test_functions {
            let gs = test_values(paths, g, s)?;
            let xs: Vec<f64> = increments.iter().zip(&gs).map(|(d, g)| d * g).collect();
            reports.push(
                mean_report(&format!("compensated_martingale:{}", g.name()), &xs, 0.0)?
                    .at(None, Some(s), Some(t))
                    .with_note(INTEGRABILITY_NOTE),
            );
        }
    }
    Ok(reports)
}

/// Mean and variance against their targets with CLT standard errors
/// (`σ/√n` and `√((m₄ − σ⁴)/n)`); `allowances` widen the respective bands.
pub fn check_moments(
    samples: &[f64],
    oracle_mean: f64,
    oracle_var: f64,
    allowances: (f64, f64),
) -> Result<Vec<CheckReport>> {
    if samples.len() < BATCHES {
        return Err(Error::Sizing {
            needed: BATCHES,
            got: samples.len(),
        });
    }
    if !(oracle_mean.is_finite() && oracle_var.is_finite()) {
        return Err(Error::Degenerate("oracle moments must be finite".into()));
    }
    let n = samples.len() as f64;
    let (m, v) = mean_var(samples);
    let m4 = central_m4(samples, m);
    let se_mean = (v / n).sqrt();
    let se_var = ((m4 - v * v).max(0.0) / n).sqrt();
    Ok(vec![
        CheckReport::z("mean", m, se_mean, oracle_mean, allowances.0, samples.len()),
        CheckReport::z("variance", v, se_var, oracle_var, allowances.1, samples.len()),
    ])
}

/// Chi-square statistic on pooled cells; `cells` holds one observed count
/// per sample and its expected count per sample.
fn chi_square(cells: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    cells
        .iter()
        .flat_map(|(obs, exp)| obs.iter().zip(exp).map(|(o, e)| (o - e).powi(2) / e))
        .sum()
}

/// Two-sample chi-square test of equal distributions for integer samples.
/// Adjacent values are pooled until every cell expects at least five
/// observations from each sample.
pub fn check_distribution_equality(a: &[i64], b: &[i64]) -> Result<CheckReport> {
    let smaller = a.len().min(b.len());
    if smaller < BATCHES {
        return Err(Error::Sizing {
            needed: BATCHES,
            got: smaller,
        });
    }
    let mut counts: BTreeMap<i64, (f64, f64)> = BTreeMap::new();
    for x in a {
        counts.entry(*x).or_default().0 += 1.0;
    }
    for x in b {
        counts.entry(*x).or_default().1 += 1.0;
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (fa, fb) = (na / (na + nb), nb / (na + nb));
    let mut pooled: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for (ca, cb) in counts.values() {
        acc.0 += ca;
        acc.1 += cb;
        let total = acc.0 + acc.1;
        if total * fa.min(fb) >= MIN_EXPECTED {
            pooled.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 + acc.1 > 0.0 {
        match pooled.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => pooled.push(acc),
        }
    }
    if pooled.len() < 2 {
        return Err(Error::Degenerate(
            "all observations fall in a single pooled cell".into(),
        ));
    }
    let cells: Vec<(Vec<f64>, Vec<f64>)> = pooled
        .iter()
        .map(|(ca, cb)| {
            let total = ca + cb;
            (vec![*ca, *cb], vec![total * fa, total * fb])
        })
        .collect();
    let stat = chi_square(&cells);
    let df = pooled.len() - 1;
    let p = chi_square_sf(stat, df)?;
    Ok(CheckReport::chi_square("distribution_equality", stat, df, p, a.len() + b.len())
        .with_note(format!("{} pooled cells", pooled.len())))
}

/// Chi-square goodness of fit of nonnegative integer samples to
/// `Poisson(mean)`, pooling cells left to right and folding the upper tail
/// into the last cell.
pub fn check_poisson_fit(samples: &[i64], mean: f64) -> Result<CheckReport> {
    check_domain(mean.is_finite() && mean > 0.0, "Poisson mean", mean)?;
    if samples.len() < BATCHES {
        return Err(Error::Sizing {
            needed: BATCHES,
            got: samples.len(),
        });
    }
    if let Some(x) = samples.iter().find(|x| **x < 0) {
        return Err(Error::Domain {
            what: "Poisson sample",
            value: *x as f64,
        });
    }
    let n = samples.len() as f64;
    let max = *samples.iter().max().unwrap_or(&0);
    let mut observed = vec![0.0; max as usize + 1];
    for x in samples {
        observed[*x as usize] += 1.0;
    }
    // expected mass per value up to the largest observation or well past the mean
    let top = (max as f64).max(mean + 10.0 * mean.sqrt() + 10.0) as usize;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    let mut cdf = 0.0;
    for k in 0..=top {
        let p = ln_poisson_pmf(k as f64, mean).exp();
        cdf += p;
        acc.0 += observed.get(k).copied().unwrap_or(0.0);
        acc.1 += n * p;
        if acc.1 >= MIN_EXPECTED && n * (1.0 - cdf) >= MIN_EXPECTED {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    // remaining values and the whole tail beyond `top`
    acc.1 += n * (1.0 - cdf).max(0.0);
    match cells.last_mut() {
        Some(last) if acc.1 < MIN_EXPECTED => {
            last.0 += acc.0;
            last.1 += acc.1;
        }
        _ => cells.push(acc),
    }
    if cells.len() < 2 {
        return Err(Error::Degenerate("Poisson fit needs at least two pooled cells".into()));
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let df = cells.len() - 1;
    let p = chi_square_sf(stat, df)?;
    Ok(CheckReport::chi_square("poisson_fit", stat, df, p, samples.len())
        .with_note(format!("{} pooled cells; mean {mean}", cells.len())))
}

/// Sample correlation of paired data against zero. The standard error is
/// the batch-means error of the standardized cross products, which is
/// `≈ 1/√n` under independence.
pub fn check_uncorrelated(x: &[f64], y: &[f64]) -> Result<CheckReport> {
    if x.len() != y.len() {
        return Err(Error::Degenerate(format!("{} vs {} paired samples", x.len(), y.len())));
    }
    let (mx, vx) = mean_var(x);
    let (my, vy) = mean_var(y);
    if vx == 0.0 || vy == 0.0 {
        return Err(Error::Degenerate("correlation of a constant sample".into()));
    }
    let (sx, sy) = (vx.sqrt(), vy.sqrt());
    let products: Vec<f64> = x.iter().zip(y).map(|(a, b)| (a - mx) / sx * (b - my) / sy).collect();
    let n = x.len() as f64;
    let r = products.iter().sum::<f64>() / (n - 1.0);
    let se = batch_means_se(&products)?;
    Ok(CheckReport::z("uncorrelated_increments", r, se, 0.0, 0.0, x.len()))
}

/// `E[v^{N(t)}] = exp(−t·(λ(1−v))^β)` for a constant-rate NPP run along a
/// stable clock of index `β`.
pub fn check_pgf_space_fractional(
    paths: &[Trajectory],
    rate: &RateFunction,
    beta: f64,
    v_values: &[f64],
    t: f64,
) -> Result<Vec<CheckReport>> {
    let lambda = rate
        .as_constant()
        .ok_or_else(|| Error::Unsupported("pgf target needs a constant rate".into()))?;
    check_domain(beta > 0.0 && beta < 1.0, "beta", beta)?;
    let mut reports = Vec::new();
    for &v in v_values {
        check_domain((0.0..=1.0).contains(&v), "pgf argument", v)?;
        let xs: Vec<f64> = paths
            .iter()
            .map(|p| {
                let n = p.path.value_at(t);
                if n == 0 {
                    1.0
                } else {
                    v.powf(n as f64)
                }
            })
            .collect();
        let target = (-t * (lambda * (1.0 - v)).powf(beta)).exp();
        reports.push(mean_report("pgf", &xs, target)?.at(Some(v), None, Some(t)));
    }
    Ok(reports)
}
