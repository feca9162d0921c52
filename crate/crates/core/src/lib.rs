//! Upfront reinsurance premiums for the second-loss tranche of first-loss
//! hedge fund fee structures, priced as a function of portfolio liquidity.
//!
//! The crate provides three pricing routes that share one set of contract
//! and market types:
//!
//! - [`closed_form`]: geometric Brownian motion, where the premium factors
//!   into a put issued at the barrier (`V1`) times the discounted
//!   first-passage factor (`V2`).
//! - [`regime_mc`]: a two-state Markov-switching log-price process priced by
//!   Monte Carlo with antithetic variates.
//! - [`backtest`]: annual contract cycles rolled over historical daily
//!   returns with per-party ledgers.
//!
//! Regime parameters are calibrated from daily returns with [`hmm`], and
//! return/rate series are loaded with [`returns_io`].
//!
//! ```
//! use liqprem::{closed_form, ContractTerms, GbmParams, Measure};
//!
//! let terms = ContractTerms::default().with_theta_days(1.0);
//! let params = GbmParams::risk_neutral(0.01, 0.25);
//! let premium = closed_form::premium_gbm(&terms, &params, Measure::RiskNeutral).unwrap();
//! assert!(premium.bps() < 40.0);
//! ```

pub mod backtest;
pub mod cli;
pub mod closed_form;
mod error;
pub mod hmm;
pub mod regime_mc;
pub mod returns_io;
pub mod synthetic;
pub mod types;

pub use error::{Error, Result};
pub use types::{
    party_payoffs, reinsurer_payoff, ContractTerms, GbmParams, Measure, PartyValues, PremiumResult,
    Regime, RegimeParams, BPS, TRADING_DAYS_PER_YEAR,
};
