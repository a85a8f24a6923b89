//! Splittable deterministic random streams and the elementary variate
//! generators used by every simulator.
//!
//! A stream is identified by `(seed, stream_index)` and backed by ChaCha8,
//! whose output is fixed across platforms. Child streams are derived from the
//! identity of the parent, never from its state, so the order in which
//! children are created does not matter.

use rand::distr::Open01;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::gamma::ln_gamma;
use std::f64::consts::PI;

use crate::error::{check_domain, Error, Result};

/// Acceptance floor of the tempered rejection sampler.
pub const MIN_TEMPERED_ACCEPTANCE: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_index);
        Self {
            seed,
            stream_index,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Fresh stream for sub-component `k`, independent of this one.
    pub fn child(&self, k: u64) -> RngStream {
        let index = splitmix64(self.stream_index ^ splitmix64(k.wrapping_add(0x632B_E59B_D9B4_E019)));
        RngStream::new(self.seed, index)
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    /// Uniform on `(0, 1)`.
    pub fn open_uniform(&mut self) -> f64 {
        self.rng.sample(Open01)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Inverse CDF of `Exp(rate)`; decreasing in `u`.
pub fn exponential_from_uniform(rate: f64, u: f64) -> f64 {
    -u.ln() / rate
}

pub fn exponential(rate: f64, rng: &mut RngStream) -> Result<f64> {
    check_domain(rate.is_finite() && rate > 0.0, "exponential rate", rate)?;
    Ok(exponential_from_uniform(rate, rng.open_uniform()))
}

/// Largest Poisson mean the sampler accepts; beyond it counts no longer fit
/// the integer types used for paths.
pub const MAX_POISSON_MEAN: f64 = 4.0e15;

/// Draw from `Poisson(mean)`: sequential inversion below 10, Hörmann's
/// transformed rejection (PTRS) above.
pub fn poisson(mean: f64, rng: &mut RngStream) -> Result<u64> {
    check_domain(
        mean.is_finite() && (0.0..=MAX_POISSON_MEAN).contains(&mean),
        "poisson mean",
        mean,
    )?;
    if mean == 0.0 {
        return Ok(0);
    }
    if mean < 10.0 {
        Ok(poisson_inversion(mean, rng))
    } else {
        Ok(poisson_ptrs(mean, rng))
    }
}

fn poisson_inversion(mean: f64, rng: &mut RngStream) -> u64 {
    let u = rng.uniform();
    let mut k = 0u64;
    let mut p = (-mean).exp();
    let mut cdf = p;
    while u > cdf {
        k += 1;
        p *= mean / k as f64;
        cdf += p;
        if p < 1e-300 && k as f64 > mean {
            break;
        }
    }
    k
}

fn poisson_ptrs(mean: f64, rng: &mut RngStream) -> u64 {
    let smu = mean.sqrt();
    let b = 0.931 + 2.53 * smu;
    let a = -0.059 + 0.02483 * b;
    let inv_alpha = 1.1239 + 1.1328 / (b - 3.4);
    let v_r = 0.9277 - 3.6224 / (b - 2.0);
    loop {
        let u = rng.uniform() - 0.5;
        let v = rng.open_uniform();
        let us = 0.5 - u.abs();
        let k = ((2.0 * a / us + b) * u + mean + 0.43).floor();
        if us >= 0.07 && v <= v_r {
            return k as u64;
        }
        if k < 0.0 || (us < 0.013 && v > us) {
            continue;
        }
        let lhs = v.ln() + inv_alpha.ln() - (a / (us * us) + b).ln();
        if lhs <= ln_poisson_pmf(k, mean) {
            return k as u64;
        }
    }
}

/// `ln P(X = k)` for `X ~ Poisson(mean)`, via the saddle-point form so that
/// large means do not cancel catastrophically.
pub(crate) fn ln_poisson_pmf(k: f64, mean: f64) -> f64 {
    if k == 0.0 {
        return -mean;
    }
    if k < 16.0 {
        return k * mean.ln() - mean - ln_gamma(k + 1.0);
    }
    -stirling_error(k) - deviance_term(k, mean) - 0.5 * (2.0 * PI * k).ln()
}

/// `ln k! − [(k + ½) ln k − k + ½ ln 2π]` for `k ≥ 16`.
fn stirling_error(k: f64) -> f64 {
    let k2 = k * k;
    (1.0 / 12.0 - (1.0 / 360.0 - 1.0 / (1260.0 * k2)) / k2) / k
}

/// `k ln(k/mean) + mean − k`, evaluated without cancellation.
fn deviance_term(k: f64, mean: f64) -> f64 {
    if (k - mean).abs() < 0.1 * (k + mean) {
        let v = (k - mean) / (k + mean);
        let mut s = (k - mean) * v;
        let mut ej = 2.0 * k * v;
        let v2 = v * v;
        let mut j = 1.0;
        loop {
            ej *= v2;
            j += 2.0;
            let s1 = s + ej / j;
            if s1 == s {
                return s;
            }
            s = s1;
        }
    }
    k * (k / mean).ln() + mean - k
}

/// One-sided α-stable variates `S` with `E[exp(−sS)] = exp(−s^α)`, by
/// Kanter's two-uniform representation.
#[derive(Debug, Clone, Copy)]
pub struct OneSidedStable {
    alpha: f64,
    inv_alpha: f64,
    tail_power: f64,
}

impl OneSidedStable {
    pub fn new(alpha: f64) -> Result<Self> {
        check_domain(alpha > 0.0 && alpha < 1.0, "stability index", alpha)?;
        Ok(Self {
            alpha,
            inv_alpha: 1.0 / alpha,
            tail_power: (1.0 - alpha) / alpha,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn sample(&self, rng: &mut RngStream) -> f64 {
        let u = PI * rng.open_uniform();
        let e = -rng.open_uniform().ln();
        let head = (self.alpha * u).sin() / u.sin().powf(self.inv_alpha);
        let tail = ((1.0 - self.alpha) * u).sin() / e;
        head * tail.powf(self.tail_power)
    }
}

pub fn one_sided_stable(alpha: f64, rng: &mut RngStream) -> Result<f64> {
    Ok(OneSidedStable::new(alpha)?.sample(rng))
}

/// Increments of the tempered stable subordinator `D_{β,θ}`, drawn by
/// rejection from the untempered β-stable law: a proposal `x = dt^{1/β}·S`
/// is accepted with probability `exp(−θx)`, for an overall acceptance rate
/// of `exp(−dt·θ^β)`.
#[derive(Debug, Clone, Copy)]
pub struct TemperedStable {
    stable: OneSidedStable,
    theta: f64,
    theta_pow_beta: f64,
}

impl TemperedStable {
    pub fn new(beta: f64, theta: f64) -> Result<Self> {
        check_domain(theta.is_finite() && theta > 0.0, "tempering parameter", theta)?;
        Ok(Self {
            stable: OneSidedStable::new(beta)?,
            theta,
            theta_pow_beta: theta.powf(beta),
        })
    }

    pub fn beta(&self) -> f64 {
        self.stable.alpha
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Expected acceptance probability for a step of length `dt`.
    pub fn acceptance(&self, dt: f64) -> f64 {
        (-dt * self.theta_pow_beta).exp()
    }

    /// Largest step whose acceptance stays above `floor`.
    pub fn max_step(&self, floor: f64) -> f64 {
        -floor.ln() / self.theta_pow_beta
    }

    pub fn increment(&self, dt: f64, rng: &mut RngStream) -> Result<f64> {
        self.increment_counted(dt, rng).map(|(x, _)| x)
    }

    /// Increment together with the number of proposals it took.
    pub fn increment_counted(&self, dt: f64, rng: &mut RngStream) -> Result<(f64, u64)> {
        check_domain(dt.is_finite() && dt > 0.0, "time step", dt)?;
        let acceptance = self.acceptance(dt);
        if acceptance < MIN_TEMPERED_ACCEPTANCE {
            return Err(Error::Acceptance { dt, acceptance });
        }
        let scale = dt.powf(self.stable.inv_alpha);
        let mut proposals = 0;
        loop {
            proposals += 1;
            let x = scale * self.stable.sample(rng);
            if rng.uniform() < (-self.theta * x).exp() {
                return Ok((x, proposals));
            }
        }
    }

    /// Increment over an arbitrary nonnegative gap, split into equal sub-steps
    /// with acceptance at least `exp(−1)` each. A zero gap yields zero.
    pub fn increment_split(&self, gap: f64, rng: &mut RngStream) -> Result<f64> {
        check_domain(gap.is_finite() && gap >= 0.0, "time gap", gap)?;
        if gap == 0.0 {
            return Ok(0.0);
        }
        let pieces = (gap * self.theta_pow_beta).ceil().max(1.0);
        let dt = gap / pieces;
        let mut total = 0.0;
        for _ in 0..pieces as u64 {
            total += self.increment(dt, rng)?;
        }
        Ok(total)
    }
}

pub fn tempered_stable_increment(beta: f64, theta: f64, dt: f64, rng: &mut RngStream) -> Result<f64> {
    TemperedStable::new(beta, theta)?.increment(dt, rng)
}
