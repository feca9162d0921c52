//! Contract terms, market parameters and the payoff algebra shared by every
//! pricing route.
//!
//! Amounts are in currency units of the initial investment `x0` (1.0 by
//! default), so premiums read directly as fractions of the investment.
//! Time is measured in years with 252 trading days per year.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Trading days per year. Liquidity windows are stored in days and converted
/// to years with this constant exactly once.
pub const TRADING_DAYS_PER_YEAR: f64 = 252.0;

/// One basis point as a fraction.
pub const BPS: f64 = 1e-4;

#[inline]
pub(crate) fn pos(x: f64) -> f64 {
    x.max(0.0)
}

/// Terms of the first-loss contract with second-loss reinsurance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContractTerms {
    /// Initial investment.
    pub x0: f64,
    /// Managerial deposit as a fraction of `x0`; the barrier sits at `(1 - c_m) * x0`.
    pub c_m: f64,
    /// Performance fee fraction.
    pub alpha_m: f64,
    /// Flat management fee fraction.
    pub m_m: f64,
    /// Investment horizon `T` in years.
    pub horizon_years: f64,
    /// Liquidity window in trading days, possibly fractional.
    pub theta_days: f64,
}

impl Default for ContractTerms {
    fn default() -> Self {
        Self {
            x0: 1.0,
            c_m: 0.1,
            alpha_m: 0.5,
            m_m: 0.0,
            horizon_years: 1.0,
            theta_days: 1.0,
        }
    }
}

impl ContractTerms {
    pub fn with_theta_days(mut self, theta_days: f64) -> Self {
        self.theta_days = theta_days;
        self
    }

    pub fn with_deposit(mut self, c_m: f64) -> Self {
        self.c_m = c_m;
        self
    }

    pub fn with_horizon(mut self, horizon_years: f64) -> Self {
        self.horizon_years = horizon_years;
        self
    }

    pub fn with_fees(mut self, alpha_m: f64, m_m: f64) -> Self {
        self.alpha_m = alpha_m;
        self.m_m = m_m;
        self
    }

    /// Liquidation barrier `K = (1 - c_m) * x0`.
    pub fn barrier(&self) -> f64 {
        (1.0 - self.c_m) * self.x0
    }

    pub fn theta_years(&self) -> f64 {
        self.theta_days / TRADING_DAYS_PER_YEAR
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.x0.is_finite() && self.x0 > 0.0) {
            return Err(Error::domain(format!(
                "x0 must be positive, got {}",
                self.x0
            )));
        }
        if !(self.c_m > 0.0 && self.c_m < 1.0) {
            return Err(Error::domain(format!(
                "c_m must lie in (0,1), got {}",
                self.c_m
            )));
        }
        if !(0.0..1.0).contains(&self.alpha_m) {
            return Err(Error::domain(format!(
                "alpha_m must lie in [0,1), got {}",
                self.alpha_m
            )));
        }
        if !(0.0..1.0).contains(&self.m_m) {
            return Err(Error::domain(format!(
                "m_m must lie in [0,1), got {}",
                self.m_m
            )));
        }
        if !(self.horizon_years.is_finite() && self.horizon_years > 0.0) {
            return Err(Error::domain(format!(
                "horizon must be positive, got {}",
                self.horizon_years
            )));
        }
        if !(self.theta_days.is_finite() && self.theta_days >= 0.0) {
            return Err(Error::domain(format!(
                "theta_days must be non-negative, got {}",
                self.theta_days
            )));
        }
        Ok(())
    }
}

/// Valuation measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Measure {
    /// Risk-neutral: the fund drifts at the risk-free rate.
    #[default]
    RiskNeutral,
    /// Discounted expected payoff under an empirical drift.
    Empirical,
}

impl Measure {
    pub fn as_str(&self) -> &'static str {
        match self {
            Measure::RiskNeutral => "risk_neutral",
            Measure::Empirical => "empirical",
        }
    }
}

/// Single-regime market parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GbmParams {
    /// Risk-free rate, annual, continuously compounded.
    pub r: f64,
    /// Annual volatility.
    pub sigma: f64,
    /// Empirical arithmetic drift, required only for [`Measure::Empirical`].
    pub b: Option<f64>,
}

impl GbmParams {
    pub fn risk_neutral(r: f64, sigma: f64) -> Self {
        Self { r, sigma, b: None }
    }

    pub fn empirical(r: f64, sigma: f64, b: f64) -> Self {
        Self {
            r,
            sigma,
            b: Some(b),
        }
    }

    /// Arithmetic drift used by the given measure.
    pub fn drift(&self, measure: Measure) -> Result<f64> {
        match measure {
            Measure::RiskNeutral => Ok(self.r),
            Measure::Empirical => self
                .b
                .ok_or_else(|| Error::config("the empirical measure needs an empirical drift b")),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.sigma.is_finite() && self.sigma > 0.0) {
            return Err(Error::domain(format!(
                "sigma must be positive, got {}",
                self.sigma
            )));
        }
        if !self.r.is_finite() {
            return Err(Error::domain("r must be finite"));
        }
        if let Some(b) = self.b {
            if !b.is_finite() {
                return Err(Error::domain("b must be finite"));
            }
        }
        Ok(())
    }
}

/// Market regime of the two-state chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// State 1, the low-volatility "good" market.
    Normal,
    /// State 2, the high-volatility market.
    Stressed,
}

impl Regime {
    pub fn index(self) -> usize {
        match self {
            Regime::Normal => 0,
            Regime::Stressed => 1,
        }
    }

    pub fn from_index(i: usize) -> Self {
        if i == 0 {
            Regime::Normal
        } else {
            Regime::Stressed
        }
    }

    /// 1 for normal, 2 for stressed.
    pub fn label(self) -> u8 {
        self.index() as u8 + 1
    }
}

/// Two-state Markov-switching parameters.
///
/// `p` is the daily probability of moving from the normal to the stressed
/// state and `q` the probability of moving back, so the chain spends a
/// long-run fraction `q / (p + q)` of its time in the normal state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimeParams {
    pub mu1: f64,
    pub mu2: f64,
    pub sigma1: f64,
    pub sigma2: f64,
    pub p: f64,
    pub q: f64,
}

impl RegimeParams {
    /// Mean of the HFRX calibration: the reference empirical parameter set.
    pub fn hfrx_mean() -> Self {
        Self {
            mu1: 0.0624,
            mu2: -0.1865,
            sigma1: 0.0329,
            sigma2: 0.0895,
            p: 0.0175,
            q: 0.0865,
        }
    }

    /// Equal volatilities in both states; collapses to a single-regime GBM
    /// under the risk-neutral measure.
    pub fn single_regime(sigma: f64, p: f64, q: f64) -> Self {
        Self {
            mu1: 0.0,
            mu2: 0.0,
            sigma1: sigma,
            sigma2: sigma,
            p,
            q,
        }
    }

    pub fn drift(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Normal => self.mu1,
            Regime::Stressed => self.mu2,
        }
    }

    pub fn sigma(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Normal => self.sigma1,
            Regime::Stressed => self.sigma2,
        }
    }

    /// Probability of leaving `regime` in one step.
    pub fn switch_probability(&self, regime: Regime) -> f64 {
        match regime {
            Regime::Normal => self.p,
            Regime::Stressed => self.q,
        }
    }

    /// One-step transition matrix, rows indexed by the current state.
    pub fn transition_matrix(&self) -> [[f64; 2]; 2] {
        [[1.0 - self.p, self.p], [self.q, 1.0 - self.q]]
    }

    /// Long-run occupancy `(pi_normal, pi_stressed)`.
    pub fn stationary_distribution(&self) -> Result<(f64, f64)> {
        let total = self.p + self.q;
        if total <= 0.0 {
            return Err(Error::domain(
                "stationary distribution is undefined when p = q = 0",
            ));
        }
        Ok((self.q / total, self.p / total))
    }

    pub fn validate(&self) -> Result<()> {
        for (name, s) in [("sigma1", self.sigma1), ("sigma2", self.sigma2)] {
            if !(s.is_finite() && s >= 0.0) {
                return Err(Error::domain(format!(
                    "{name} must be non-negative, got {s}"
                )));
            }
        }
        for (name, v) in [("p", self.p), ("q", self.q)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::domain(format!("{name} must lie in [0,1], got {v}")));
            }
        }
        if !(self.mu1.is_finite() && self.mu2.is_finite()) {
            return Err(Error::domain("drifts must be finite"));
        }
        Ok(())
    }
}

/// A premium estimate as a fraction of `x0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PremiumResult {
    pub m_r: f64,
    /// Monte Carlo standard error; absent for closed-form prices.
    pub std_error: Option<f64>,
    pub n_paths: Option<usize>,
    /// Fraction of simulated paths that touched the barrier.
    pub breach_fraction: Option<f64>,
}

impl PremiumResult {
    pub fn exact(m_r: f64) -> Self {
        Self {
            m_r,
            std_error: None,
            n_paths: None,
            breach_fraction: None,
        }
    }

    pub fn bps(&self) -> f64 {
        self.m_r / BPS
    }

    pub fn std_error_bps(&self) -> Option<f64> {
        self.std_error.map(|s| s / BPS)
    }
}

/// Reinsurer position at liquidation time `tau + theta`:
/// the compounded premium less the shortfall below the barrier.
pub fn reinsurer_payoff(
    terms: &ContractTerms,
    x_at_eval: f64,
    tau_plus_theta: f64,
    m_r: f64,
    r: f64,
) -> Result<f64> {
    if !(x_at_eval >= 0.0) {
        return Err(Error::domain(format!(
            "fund value must be non-negative, got {x_at_eval}"
        )));
    }
    if !(tau_plus_theta >= 0.0) {
        return Err(Error::domain(format!(
            "evaluation time must be non-negative, got {tau_plus_theta}"
        )));
    }
    Ok(m_r * (r * tau_plus_theta).exp() * terms.x0 - pos(terms.barrier() - x_at_eval))
}

/// Terminal values of the three parties. They always sum to the fund value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartyValues {
    pub investor: f64,
    pub manager: f64,
    pub reinsurer: f64,
}

impl PartyValues {
    pub fn total(&self) -> f64 {
        self.investor + self.manager + self.reinsurer
    }
}

/// Terminal payoffs without a liquidation barrier.
///
/// The performance fee is charged on gains above `(1 + m_m) * x0`. The
/// manager covers losses down to the barrier and the reinsurer everything
/// below it, so the investor keeps `(1 - m_m - m_r e^{rt}) x0` whenever the
/// fund ends at or below `x0`.
pub fn party_payoffs(
    terms: &ContractTerms,
    x_terminal: f64,
    m_r: f64,
    r: f64,
    t: f64,
) -> Result<PartyValues> {
    if !(x_terminal >= 0.0) {
        return Err(Error::domain(format!(
            "fund value must be non-negative, got {x_terminal}"
        )));
    }
    let x0 = terms.x0;
    let premium_due = m_r * (r * t).exp() * x0;
    let flat_fee = terms.m_m * x0;
    let perf_fee = terms.alpha_m * pos(x_terminal - (1.0 + terms.m_m) * x0);
    let first_loss = pos(x0 - x_terminal);
    let second_loss = pos(terms.barrier() - x_terminal);

    let reinsurer = premium_due - second_loss;
    let manager = flat_fee + perf_fee - first_loss + second_loss;
    // Residual keeps the sum exact in floating point.
    let investor = x_terminal - manager - reinsurer;
    Ok(PartyValues {
        investor,
        manager,
        reinsurer,
    })
}
