//! Closed-form premium under geometric Brownian motion.
//!
//! Once the fund touches the barrier `K` the reinsurer is short a put struck
//! at `K` with tenor `theta`, issued at-the-money because `X_tau = K`. Its
//! value `V1(theta)` does not depend on when the breach happens, so the fair
//! premium factors as
//!
//! ```text
//! m_R = V1(theta) * V2(T),    V2(T) = E[exp(-r tau); tau <= T]
//! ```
//!
//! where `tau` is the first-passage time of `ln(X_t / x0)` to `ln(K / x0)`,
//! an inverse-Gaussian variable. Under the empirical measure the drift `r` in
//! the dynamics is replaced by `b`; discounting stays at `r`.

use std::f64::consts::{PI, SQRT_2};

use libm::erfc;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{ContractTerms, GbmParams, Measure, PremiumResult, TRADING_DAYS_PER_YEAR};

/// Standard normal CDF via `erfc`, accurate in both tails.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / SQRT_2)
}

/// `ln N(x)`, finite far into the lower tail where `N(x)` underflows.
pub fn ln_norm_cdf(x: f64) -> f64 {
    if x > -30.0 {
        return norm_cdf(x).ln();
    }
    // Asymptotic series of the Mills ratio.
    let z2 = x * x;
    let series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
    -0.5 * z2 - (-x).ln() - 0.5 * (2.0 * PI).ln() + series.ln()
}

/// First-passage law of `Y_t = mu t + sigma W_t` to the level `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HittingLaw {
    /// Log-barrier `ln(K / x0)`; negative for a barrier below the spot.
    pub a: f64,
    /// Drift of the log process: `r - sigma^2/2` or `b - sigma^2/2`.
    pub mu: f64,
    pub sigma: f64,
}

impl HittingLaw {
    /// Law for barrier `barrier` below spot `x0` when the fund has
    /// arithmetic drift `drift`.
    pub fn new(barrier: f64, x0: f64, drift: f64, sigma: f64) -> Self {
        Self {
            a: (barrier / x0).ln(),
            mu: drift - 0.5 * sigma * sigma,
            sigma,
        }
    }

    /// Total probability mass of the first-passage time: 1 when the drift
    /// points towards the barrier, `exp(2 mu a / sigma^2)` otherwise.
    pub fn total_mass(&self) -> f64 {
        if self.a == 0.0 {
            return 1.0;
        }
        (2.0 * self.mu * self.a / (self.sigma * self.sigma))
            .exp()
            .min(1.0)
    }
}

/// Inverse-Gaussian first-passage density at `t` years.
pub fn hitting_density(t: f64, law: &HittingLaw) -> Result<f64> {
    if !(t > 0.0) {
        return Err(Error::domain(format!(
            "hitting density needs t > 0, got {t}"
        )));
    }
    let HittingLaw { a, mu, sigma } = *law;
    let s2t = sigma * sigma * t;
    let dev = a - mu * t;
    Ok(a.abs() / (sigma * (2.0 * PI * t * t * t).sqrt()) * (-dev * dev / (2.0 * s2t)).exp())
}

fn check_sigma(sigma: f64) -> Result<()> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::domain(format!(
            "sigma must be positive, got {sigma}"
        )));
    }
    Ok(())
}

fn drift_for(measure: Measure, r: f64, b: Option<f64>) -> Result<f64> {
    match measure {
        Measure::RiskNeutral => Ok(r),
        Measure::Empirical => {
            b.ok_or_else(|| Error::config("the empirical measure needs an empirical drift b"))
        }
    }
}

/// Value at issuance of the at-the-money put struck at the barrier with
/// tenor `theta_years`, discounted at `r`.
///
/// With spot equal to strike, the risk-neutral value is
/// `K (e^{-r theta} N(-d2) - N(-d1))`, `d1 = (r + sigma^2/2) sqrt(theta) / sigma`.
/// Under the empirical measure the forward grows at `b` instead, giving
/// `K (e^{-r theta} N(-d2) - e^{(b-r) theta} N(-d1))` with `b` in `d1`.
pub fn put_component_v1(
    theta_years: f64,
    barrier: f64,
    r: f64,
    sigma: f64,
    measure: Measure,
    b: Option<f64>,
) -> Result<f64> {
    check_sigma(sigma)?;
    if !(theta_years >= 0.0) {
        return Err(Error::domain(format!(
            "liquidity window must be non-negative, got {theta_years}"
        )));
    }
    let drift = drift_for(measure, r, b)?;
    if theta_years == 0.0 {
        return Ok(0.0);
    }
    let sqrt_t = theta_years.sqrt();
    let d1 = (drift + 0.5 * sigma * sigma) * sqrt_t / sigma;
    let d2 = d1 - sigma * sqrt_t;
    let value = barrier
        * ((-r * theta_years).exp() * norm_cdf(-d2)
            - ((drift - r) * theta_years).exp() * norm_cdf(-d1));
    Ok(value.max(0.0))
}

/// `exp(alpha * a) * N(x)` computed in log space.
fn scaled_cdf(alpha: f64, a: f64, x: f64) -> f64 {
    let log_term = alpha * a + ln_norm_cdf(x);
    if log_term == f64::NEG_INFINITY {
        0.0
    } else {
        log_term.exp()
    }
}

/// Discounted probability that the barrier is hit before `horizon_years`:
/// `E[exp(-r tau); tau <= T]`.
///
/// For `K = x0` the barrier is hit immediately and the factor is 1.
pub fn discounted_hitting_factor_v2(
    horizon_years: f64,
    barrier: f64,
    x0: f64,
    r: f64,
    sigma: f64,
    measure: Measure,
    b: Option<f64>,
) -> Result<f64> {
    check_sigma(sigma)?;
    if !(barrier > 0.0 && x0 > 0.0) {
        return Err(Error::domain("barrier and spot must be positive"));
    }
    if barrier > x0 {
        return Err(Error::domain(format!(
            "barrier {barrier} lies above the initial value {x0}"
        )));
    }
    if !(horizon_years > 0.0) {
        return Err(Error::domain(format!(
            "horizon must be positive, got {horizon_years}"
        )));
    }
    let drift = drift_for(measure, r, b)?;
    if barrier == x0 {
        return Ok(1.0);
    }
    let law = HittingLaw::new(barrier, x0, drift, sigma);
    let s2 = sigma * sigma;
    let disc = law.mu * law.mu + 2.0 * r * s2;
    if disc < 0.0 {
        return Err(Error::domain(format!(
            "negative rate {r} too large for the hitting-time transform"
        )));
    }
    let beta = disc.sqrt();
    let alpha_plus = (law.mu + beta) / s2;
    let alpha_minus = (law.mu - beta) / s2;
    // sign(ln(x0 / K)); +1 for every barrier strictly below the spot.
    let delta = if law.a < 0.0 { 1.0 } else { -1.0 };
    let scale = sigma * horizon_years.sqrt();
    let up = delta * (law.a + beta * horizon_years) / scale;
    let down = delta * (law.a - beta * horizon_years) / scale;
    let value = scaled_cdf(alpha_plus, law.a, up) + scaled_cdf(alpha_minus, law.a, down);
    Ok(value.clamp(0.0, 1.0))
}

/// Closed-form premium with its two factors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GbmPremium {
    pub v1: f64,
    pub v2: f64,
    pub result: PremiumResult,
}

/// Fair premium `m_R = V1(theta) * V2(T)` as a fraction of `x0`.
pub fn premium_gbm(
    terms: &ContractTerms,
    params: &GbmParams,
    measure: Measure,
) -> Result<PremiumResult> {
    premium_gbm_components(terms, params, measure).map(|p| p.result)
}

pub fn premium_gbm_components(
    terms: &ContractTerms,
    params: &GbmParams,
    measure: Measure,
) -> Result<GbmPremium> {
    terms.validate()?;
    params.validate()?;
    let barrier = terms.barrier();
    // V1 is quoted per unit of strike in currency; normalise by x0.
    let v1 = put_component_v1(
        terms.theta_years(),
        barrier / terms.x0,
        params.r,
        params.sigma,
        measure,
        params.b,
    )?;
    let v2 = discounted_hitting_factor_v2(
        terms.horizon_years,
        barrier,
        terms.x0,
        params.r,
        params.sigma,
        measure,
        params.b,
    )?;
    Ok(GbmPremium {
        v1,
        v2,
        result: PremiumResult::exact(v1 * v2),
    })
}

/// Annualised moments of a daily log-return series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EmpiricalMoments {
    /// `252 * mean` of daily log-returns.
    pub mu_emp: f64,
    /// `sqrt(252 * sample variance)` of daily log-returns.
    pub sigma_emp: f64,
    /// Arithmetic drift `mu_emp + sigma_emp^2 / 2`.
    pub b_hat: f64,
}

pub fn empirical_moments(log_returns: &[f64]) -> Result<EmpiricalMoments> {
    let n = log_returns.len();
    if n < 2 {
        return Err(Error::InsufficientData { needed: 2, got: n });
    }
    let mean = log_returns.iter().sum::<f64>() / n as f64;
    let var = log_returns
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .sum::<f64>()
        / (n - 1) as f64;
    let mu_emp = TRADING_DAYS_PER_YEAR * mean;
    let sigma_emp = (TRADING_DAYS_PER_YEAR * var).sqrt();
    Ok(EmpiricalMoments {
        mu_emp,
        sigma_emp,
        b_hat: mu_emp + 0.5 * sigma_emp * sigma_emp,
    })
}
