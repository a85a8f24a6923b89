//! Closed-form targets.

use statrs::function::gamma::gamma;

use crate::error::{check_domain, Error, Result};
use crate::rates::RateFunction;
use crate::subordinators::{SubordinatorKind, SubordinatorSpec};

/// Mean and variance of `Y_α(t)`: `t^α/Γ(1+α)` and
/// `(2/Γ(1+2α) − 1/Γ(1+α)²)·t^{2α}`.
pub fn oracle_inverse_stable_moments(alpha: f64, t: f64) -> Result<(f64, f64)> {
    check_domain(alpha > 0.0 && alpha <= 1.0, "alpha", alpha)?;
    check_domain(t.is_finite() && t >= 0.0, "time", t)?;
    if alpha == 1.0 {
        return Ok((t, 0.0));
    }
    let g1 = gamma(1.0 + alpha);
    let mean = t.powf(alpha) / g1;
    let var = (2.0 / gamma(1.0 + 2.0 * alpha) - 1.0 / (g1 * g1)) * t.powf(2.0 * alpha);
    Ok((mean, var))
}

/// Mean and variance of `D_{β,θ}(t)`: `βθ^{β−1}t` and `β(1−β)θ^{β−2}t`.
pub fn oracle_tss_moments(beta: f64, theta: f64, t: f64) -> Result<(f64, f64)> {
    check_domain(beta > 0.0 && beta < 1.0, "beta", beta)?;
    check_domain(theta.is_finite() && theta > 0.0, "theta", theta)?;
    check_domain(t.is_finite() && t >= 0.0, "time", t)?;
    Ok((
        beta * theta.powf(beta - 1.0) * t,
        beta * (1.0 - beta) * theta.powf(beta - 2.0) * t,
    ))
}

/// `E[e^{u·M(t)}] = exp(Σ_j Λ_j(t)(e^{uj} − 1))`.
pub fn oracle_ngcp_mgf(u: f64, rates: &[RateFunction], t: f64) -> Result<f64> {
    check_domain(u.is_finite(), "u", u)?;
    let mut exponent = 0.0;
    for (i, rate) in rates.iter().enumerate() {
        exponent += rate.cumulative(t)? * ((u * (i + 1) as f64).exp_m1());
    }
    Ok(exponent.exp())
}

/// `E[e^{−s·X(t)}]` for the subordinators with an elementary Laplace
/// exponent: stable `s^α`, mixed `c₁s^{α₁} + c₂s^{α₂}`, tempered
/// `(s+θ)^β − θ^β`, and the identity.
pub fn oracle_subordinator_laplace(spec: &SubordinatorSpec, s: f64, t: f64) -> Result<f64> {
    spec.validate()?;
    check_domain(s.is_finite() && s >= 0.0, "Laplace argument", s)?;
    check_domain(t.is_finite() && t >= 0.0, "time", t)?;
    let exponent = match spec.kind {
        _ if spec.is_identity() => s,
        SubordinatorKind::Stable { alpha } => s.powf(alpha),
        SubordinatorKind::Mixed { alpha1, alpha2, c1, c2 } => c1 * s.powf(alpha1) + c2 * s.powf(alpha2),
        SubordinatorKind::Tempered { beta, theta } => (s + theta).powf(beta) - theta.powf(beta),
        _ => {
            return Err(Error::Unsupported(format!(
                "no elementary Laplace transform for {:?}",
                spec.kind
            )))
        }
    };
    Ok((-t * exponent).exp())
}

/// Mean and variance of a clock process at `t`.
///
/// For `D_{β,θ}(Y_α(t))` the tower rule gives mean `m·E[Y]` and variance
/// `v·E[Y] + m²·Var(Y)` with `(m, v)` the unit-time tempered moments.
pub fn oracle_clock_moments(spec: &SubordinatorSpec, t: f64) -> Result<(f64, f64)> {
    spec.validate()?;
    check_domain(t.is_finite() && t >= 0.0, "time", t)?;
    match spec.kind {
        _ if spec.is_identity() => Ok((t, 0.0)),
        SubordinatorKind::InverseStable { alpha } => oracle_inverse_stable_moments(alpha, t),
        SubordinatorKind::Tempered { beta, theta } => oracle_tss_moments(beta, theta, t),
        SubordinatorKind::TemperedOfInverseStable { beta, theta, alpha } => {
            let (m, v) = oracle_tss_moments(beta, theta, 1.0)?;
            let (ey, vy) = oracle_inverse_stable_moments(alpha, t)?;
            Ok((m * ey, v * ey + m * m * vy))
        }
        SubordinatorKind::Stable { .. } | SubordinatorKind::Mixed { .. } => Err(Error::Unsupported(
            "stable clocks have no finite moments".into(),
        )),
        _ => Err(Error::Unsupported(format!("no closed-form moments for {:?}", spec.kind))),
    }
}
