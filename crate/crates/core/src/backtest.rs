//! Rolling-window historical backtest of annual reinsured contracts.
//!
//! Every period starts on the configured anniversary (April 1 by default).
//! Parameters are estimated on the trailing window, the premium is charged
//! upfront, and the fund then follows the historical returns day by day. A
//! close at or below `(1 - c_m) X_I` triggers liquidation `theta` trading
//! days later, after which the run ends. Without a breach the period settles
//! on its last trading day and the investor rolls the whole settled value
//! into the next period. Premiums and fees leave the fund and compound at the
//! risk-free rate observed at period start.

use std::io::Write;

use chrono::{Datelike, Days, Months, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::closed_form::{empirical_moments, premium_gbm};
use crate::error::{Error, Result};
use crate::hmm::{self, FitOptions, HeuristicConfig};
use crate::regime_mc::{estimate_premium_ms, InitialState, SimConfig};
use crate::returns_io::{RateSeries, ReturnSeries};
use crate::types::{
    pos, ContractTerms, GbmParams, Measure, Regime, RegimeParams, TRADING_DAYS_PER_YEAR,
};

/// A period counts as complete when the data reaches within this many
/// calendar days of the next anniversary (weekends and holidays).
const PERIOD_END_SLACK_DAYS: u64 = 4;
/// Tolerated gap between the first observation and the start of the first
/// estimation window.
const WINDOW_START_SLACK_DAYS: u64 = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Pricer {
    /// Closed-form GBM premium with the trailing sample volatility.
    #[value(name = "gbm")]
    GbmClosedForm,
    /// Markov-switching Monte Carlo premium with a Baum-Welch fit.
    #[value(name = "ms")]
    MarkovSwitchingMc,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestConfig {
    pub pricer: Pricer,
    pub theta_days: f64,
    pub c_m: f64,
    pub alpha_m: f64,
    pub m_m: f64,
    pub x0: f64,
    pub window_years: u32,
    /// Anniversary `(month, day)` on which every period starts.
    pub period_start: (u32, u32),
    /// First period start; defaults to the earliest anniversary with a full
    /// estimation window behind it.
    pub first_start: Option<NaiveDate>,
    pub max_periods: usize,
    /// Monte Carlo settings for the Markov-switching pricer. The seed is
    /// offset by the period index.
    pub sim: SimConfig,
    pub heuristic: HeuristicConfig,
    pub fit: FitOptions,
}

impl Default for BacktestConfig {
    fn default() -> Self {
        Self {
            pricer: Pricer::GbmClosedForm,
            theta_days: 1.0,
            c_m: 0.1,
            alpha_m: 0.5,
            m_m: 0.0,
            x0: 1.0,
            window_years: 2,
            period_start: (4, 1),
            first_start: None,
            max_periods: 13,
            sim: SimConfig::default(),
            heuristic: HeuristicConfig::default(),
            fit: FitOptions::default(),
        }
    }
}

impl BacktestConfig {
    fn validate(&self) -> Result<()> {
        if self.window_years == 0 {
            return Err(Error::config("window_years must be positive"));
        }
        if self.max_periods == 0 {
            return Err(Error::config("max_periods must be positive"));
        }
        ContractTerms {
            x0: self.x0,
            c_m: self.c_m,
            alpha_m: self.alpha_m,
            m_m: self.m_m,
            horizon_years: 1.0,
            theta_days: self.theta_days,
        }
        .validate()?;
        if self.pricer == Pricer::MarkovSwitchingMc {
            self.sim.validate()?;
        }
        Ok(())
    }

    fn terms(&self) -> ContractTerms {
        ContractTerms {
            x0: 1.0,
            c_m: self.c_m,
            alpha_m: self.alpha_m,
            m_m: self.m_m,
            horizon_years: 1.0,
            theta_days: self.theta_days,
        }
    }
}

/// Start-of-period state of one contract.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PeriodState {
    /// Investor's capital `X_I(i)` at the start of the period.
    pub investor_initial: f64,
    /// Manager's riskless account `V_M(i)`.
    pub manager_account: f64,
    /// Reinsurer's riskless account including this period's premium, `V_R(i)`.
    pub reinsurer_account: f64,
    /// Premium rate `m_R(i)` as a fraction of `X_I(i)`.
    pub premium: f64,
    pub c_m: f64,
    pub alpha_m: f64,
    pub m_m: f64,
}

impl PeriodState {
    /// Opens a period: the premium moves from the investor's capital into
    /// the reinsurer's account.
    pub fn open(
        investor_capital: f64,
        manager_carry: f64,
        reinsurer_carry: f64,
        premium: f64,
        terms: &ContractTerms,
    ) -> Self {
        Self {
            investor_initial: investor_capital,
            manager_account: manager_carry,
            reinsurer_account: reinsurer_carry + premium * investor_capital,
            premium,
            c_m: terms.c_m,
            alpha_m: terms.alpha_m,
            m_m: terms.m_m,
        }
    }

    pub fn barrier(&self) -> f64 {
        (1.0 - self.c_m) * self.investor_initial
    }

    /// Investor's guaranteed value at time `t`.
    pub fn investor_floor(&self, rate: f64, t_years: f64) -> f64 {
        (1.0 - self.m_m - self.premium * (rate * t_years).exp()) * self.investor_initial
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Settlement {
    pub investor: f64,
    pub manager: f64,
    pub reinsurer: f64,
    pub performance_fee: f64,
    /// Loss covered by the manager's deposit, `[X_I - X]^+ - [K - X]^+`.
    pub manager_cover: f64,
    /// Loss below the barrier paid by the reinsurer, `[K - X]^+`.
    pub reinsurer_shortfall: f64,
}

impl Settlement {
    pub fn total(&self) -> f64 {
        self.investor + self.manager + self.reinsurer
    }
}

/// Settles a period at fund value `x_eval` after `t_years`: a full year
/// without a breach, or `tau + theta` on liquidation.
///
/// The three values always add up to `x_eval` plus the side accounts
/// compounded at `rate`.
pub fn settle_period(state: &PeriodState, x_eval: f64, rate: f64, t_years: f64) -> Settlement {
    let x_i = state.investor_initial;
    let growth = (rate * t_years).exp();
    let flat_fee = state.m_m * x_i;
    let performance_fee = state.alpha_m * pos(x_eval - (1.0 + state.m_m) * x_i);
    let first_loss = pos(x_i - x_eval);
    let reinsurer_shortfall = pos(state.barrier() - x_eval);
    let premium_due = state.premium * growth * x_i;

    let manager = growth * state.manager_account + flat_fee + performance_fee - first_loss
        + reinsurer_shortfall;
    let reinsurer = growth * state.reinsurer_account - reinsurer_shortfall;
    let investor = x_eval - flat_fee - premium_due - performance_fee + first_loss;
    Settlement {
        investor,
        manager,
        reinsurer,
        performance_fee,
        manager_cover: first_loss - reinsurer_shortfall,
        reinsurer_shortfall,
    }
}

/// One row of the daily ledger.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerDay {
    pub date: NaiveDate,
    pub period: usize,
    pub fund: f64,
    pub investor: f64,
    pub manager: f64,
    pub reinsurer: f64,
    /// Regime of the last estimation day (Markov-switching pricer only).
    pub regime: Option<Regime>,
    pub premium: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodRecord {
    pub index: usize,
    pub start_date: NaiveDate,
    /// Last trading day of the period, or the liquidation date.
    pub end_date: NaiveDate,
    pub rate: f64,
    /// Trailing-window volatility estimate (annual).
    pub sigma_estimate: f64,
    pub regime_params: Option<RegimeParams>,
    pub regime: Option<Regime>,
    pub premium: f64,
    pub premium_std_error: Option<f64>,
    pub investor_initial: f64,
    pub manager_initial: f64,
    pub reinsurer_initial: f64,
    pub fund_end: f64,
    pub performance_fee: f64,
    pub manager_cover: f64,
    pub reinsurer_shortfall: f64,
    pub breached: bool,
    pub breach_date: Option<NaiveDate>,
    pub liquidation_date: Option<NaiveDate>,
    /// Breach time measured from period start, in years.
    pub tau_years: Option<f64>,
    pub investor_end: f64,
    pub manager_end: f64,
    pub reinsurer_end: f64,
    /// Lowest daily investor mark during the period.
    pub min_investor_mark: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestSummary {
    pub source_id: String,
    pub pricer: Pricer,
    pub theta_days: f64,
    pub n_periods: usize,
    pub breached: bool,
    pub breach_date: Option<NaiveDate>,
    pub liquidation_date: Option<NaiveDate>,
    pub final_investor: f64,
    pub final_manager: f64,
    pub final_reinsurer: f64,
    pub total_premiums: f64,
    pub total_performance_fees: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BacktestLedger {
    pub summary: BacktestSummary,
    pub periods: Vec<PeriodRecord>,
    pub days: Vec<LedgerDay>,
}

impl BacktestLedger {
    /// Daily ledger as CSV:
    /// `date,period,fund,investor,manager,reinsurer,regime,premium`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record([
            "date",
            "period",
            "fund",
            "investor",
            "manager",
            "reinsurer",
            "regime",
            "premium",
        ])?;
        for d in &self.days {
            w.write_record([
                d.date.format("%Y-%m-%d").to_string(),
                d.period.to_string(),
                format!("{:.12}", d.fund),
                format!("{:.12}", d.investor),
                format!("{:.12}", d.manager),
                format!("{:.12}", d.reinsurer),
                d.regime.map(|r| r.label().to_string()).unwrap_or_default(),
                format!("{:.12}", d.premium),
            ])?;
        }
        w.flush().map_err(|source| Error::Io {
            path: "<ledger>".into(),
            source,
        })?;
        Ok(())
    }

    /// Summary and period records as pretty JSON.
    pub fn summary_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            summary: &'a BacktestSummary,
            periods: &'a [PeriodRecord],
        }
        Ok(serde_json::to_string_pretty(&Doc {
            summary: &self.summary,
            periods: &self.periods,
        })?)
    }
}

fn anniversary(year: i32, (month, day): (u32, u32)) -> Result<NaiveDate> {
    NaiveDate::from_ymd_opt(year, month, day)
        .ok_or_else(|| Error::config(format!("invalid period start {month}-{day}")))
}

fn window_start(start: NaiveDate, years: u32) -> NaiveDate {
    start - Months::new(12 * years)
}

fn has_full_window(series: &ReturnSeries, start: NaiveDate, years: u32) -> bool {
    series.dates[0] <= window_start(start, years) + Days::new(WINDOW_START_SLACK_DAYS)
}

fn first_period_start(config: &BacktestConfig, series: &ReturnSeries) -> Result<NaiveDate> {
    if let Some(start) = config.first_start {
        if !has_full_window(series, start, config.window_years) {
            return Err(Error::config(format!(
                "insufficient history: the {}-year window before {start} starts before the first observation {}",
                config.window_years, series.dates[0]
            )));
        }
        return Ok(start);
    }
    let first_year = series.dates[0].year();
    let last = *series.dates.last().expect("series is non-empty");
    for year in first_year..=last.year() {
        let start = anniversary(year, config.period_start)?;
        if has_full_window(series, start, config.window_years) {
            return Ok(start);
        }
    }
    Err(Error::config(format!(
        "insufficient history: no {}-year estimation window fits in the series",
        config.window_years
    )))
}

struct Quote {
    premium: f64,
    std_error: Option<f64>,
    sigma: f64,
    regime_params: Option<RegimeParams>,
    regime: Option<Regime>,
}

fn quote_premium(
    config: &BacktestConfig,
    window: &[f64],
    rate: f64,
    period: usize,
) -> Result<Quote> {
    let terms = config.terms();
    match config.pricer {
        Pricer::GbmClosedForm => {
            let moments = empirical_moments(window)?;
            let premium = if moments.sigma_emp > 0.0 {
                premium_gbm(
                    &terms,
                    &GbmParams::risk_neutral(rate, moments.sigma_emp),
                    Measure::RiskNeutral,
                )?
                .m_r
            } else {
                0.0
            };
            Ok(Quote {
                premium,
                std_error: None,
                sigma: moments.sigma_emp,
                regime_params: None,
                regime: None,
            })
        }
        Pricer::MarkovSwitchingMc => {
            let fit = hmm::fit(window, &config.heuristic, &config.fit)?;
            let current = *fit.decoded_states.last().expect("window is non-empty");
            let sim = SimConfig {
                seed: config.sim.seed.wrapping_add(period as u64),
                initial_state: match current {
                    Regime::Normal => InitialState::Normal,
                    Regime::Stressed => InitialState::Stressed,
                },
                measure: Measure::RiskNeutral,
                ..config.sim
            };
            let result = estimate_premium_ms(&sim, &fit.regime, &terms, rate)?;
            let sigma = empirical_moments(window)?.sigma_emp;
            Ok(Quote {
                premium: result.m_r,
                std_error: result.std_error,
                sigma,
                regime_params: Some(fit.regime),
                regime: Some(current),
            })
        }
    }
}

/// Runs the backtest over `returns`, discounting with `rates`.
pub fn run_backtest(
    config: &BacktestConfig,
    returns: &ReturnSeries,
    rates: &RateSeries,
) -> Result<BacktestLedger> {
    config.validate()?;
    if returns.is_empty() {
        return Err(Error::config("insufficient history: empty return series"));
    }
    let terms = config.terms();
    let first_start = first_period_start(config, returns)?;
    let last_date = *returns.dates.last().expect("non-empty");
    let theta_full = config.theta_days.floor() as usize;
    let theta_frac = config.theta_days - theta_full as f64;

    let mut investor_capital = config.x0;
    let mut manager_carry = 0.0;
    let mut reinsurer_carry = 0.0;
    let mut periods = Vec::new();
    let mut days = Vec::new();
    let mut breach_info = None;

    for index in 0..config.max_periods {
        let start = first_start + Months::new(12 * index as u32);
        let next = first_start + Months::new(12 * (index as u32 + 1));
        if last_date + Days::new(PERIOD_END_SLACK_DAYS) < next {
            break;
        }
        let lo = returns.position_on_or_after(start);
        let hi = returns.position_on_or_after(next);
        if lo == hi {
            return Err(Error::config(format!(
                "no trading days between {start} and {next}"
            )));
        }
        let w_lo = returns.position_on_or_after(window_start(start, config.window_years));
        let window = &returns.log_returns[w_lo..lo];
        let rate = rates.rate_at(start)?;
        let quote = quote_premium(config, window, rate, index)?;

        let state = PeriodState::open(
            investor_capital,
            manager_carry,
            reinsurer_carry,
            quote.premium,
            &terms,
        );
        let barrier = state.barrier();
        let mut log_growth = 0.0;
        let mut min_mark = f64::INFINITY;
        let mut breach_at = None;

        let mark = |x: f64, t: f64| {
            let s = settle_period(&state, x, rate, t);
            let investor = s.investor.max(state.investor_floor(rate, t));
            (s, investor)
        };

        for g in lo..hi {
            log_growth += returns.log_returns[g];
            let k = g - lo + 1;
            let x = investor_capital * log_growth.exp();
            let t = k as f64 / TRADING_DAYS_PER_YEAR;
            let (s, investor) = mark(x, t);
            min_mark = min_mark.min(investor);
            days.push(LedgerDay {
                date: returns.dates[g],
                period: index,
                fund: x,
                investor,
                manager: s.manager,
                reinsurer: s.reinsurer,
                regime: quote.regime,
                premium: quote.premium,
            });
            if x <= barrier {
                breach_at = Some((g, k));
                break;
            }
        }

        let (settlement, x_end, end_date, tau_years, breach_date, liquidation_date) =
            match breach_at {
                Some((g, k)) => {
                    let steps = theta_full + usize::from(theta_frac > 0.0);
                    let last_needed = g + steps;
                    if last_needed >= returns.len() {
                        return Err(Error::Truncation(format!(
                            "breach on {} needs {} more trading days for liquidation but the series ends on {} ({} available)",
                            returns.dates[g],
                            steps,
                            last_date,
                            returns.len() - 1 - g
                        )));
                    }
                    let mut lg = log_growth;
                    for j in 1..=theta_full {
                        lg += returns.log_returns[g + j];
                        if j < steps {
                            let t = (k + j) as f64 / TRADING_DAYS_PER_YEAR;
                            let x = investor_capital * lg.exp();
                            let (s, investor) = mark(x, t);
                            min_mark = min_mark.min(investor);
                            days.push(LedgerDay {
                                date: returns.dates[g + j],
                                period: index,
                                fund: x,
                                investor,
                                manager: s.manager,
                                reinsurer: s.reinsurer,
                                regime: quote.regime,
                                premium: quote.premium,
                            });
                        }
                    }
                    if theta_frac > 0.0 {
                        lg += theta_frac * returns.log_returns[g + steps];
                    }
                    let x_eval = investor_capital * lg.exp();
                    let tau = k as f64 / TRADING_DAYS_PER_YEAR;
                    let t_eval = tau + config.theta_days / TRADING_DAYS_PER_YEAR;
                    let s = settle_period(&state, x_eval, rate, t_eval);
                    let liq_date = returns.dates[last_needed];
                    if steps > 0 {
                        min_mark = min_mark.min(s.investor);
                        days.push(LedgerDay {
                            date: liq_date,
                            period: index,
                            fund: x_eval,
                            investor: s.investor,
                            manager: s.manager,
                            reinsurer: s.reinsurer,
                            regime: quote.regime,
                            premium: quote.premium,
                        });
                    } else if let Some(last) = days.last_mut() {
                        last.investor = s.investor;
                        last.manager = s.manager;
                        last.reinsurer = s.reinsurer;
                    }
                    (
                        s,
                        x_eval,
                        liq_date,
                        Some(tau),
                        Some(returns.dates[g]),
                        Some(liq_date),
                    )
                }
                None => {
                    let x_end = investor_capital * log_growth.exp();
                    let s = settle_period(&state, x_end, rate, 1.0);
                    if let Some(last) = days.last_mut() {
                        last.investor = s.investor;
                        last.manager = s.manager;
                        last.reinsurer = s.reinsurer;
                    }
                    (s, x_end, returns.dates[hi - 1], None, None, None)
                }
            };

        periods.push(PeriodRecord {
            index,
            start_date: returns.dates[lo],
            end_date,
            rate,
            sigma_estimate: quote.sigma,
            regime_params: quote.regime_params,
            regime: quote.regime,
            premium: quote.premium,
            premium_std_error: quote.std_error,
            investor_initial: investor_capital,
            manager_initial: manager_carry,
            reinsurer_initial: reinsurer_carry,
            fund_end: x_end,
            performance_fee: settlement.performance_fee,
            manager_cover: settlement.manager_cover,
            reinsurer_shortfall: settlement.reinsurer_shortfall,
            breached: breach_date.is_some(),
            breach_date,
            liquidation_date,
            tau_years,
            investor_end: settlement.investor,
            manager_end: settlement.manager,
            reinsurer_end: settlement.reinsurer,
            min_investor_mark: min_mark,
        });

        investor_capital = settlement.investor;
        manager_carry = settlement.manager;
        reinsurer_carry = settlement.reinsurer;
        if breach_date.is_some() {
            breach_info = Some((breach_date, liquidation_date));
            break;
        }
    }

    if periods.is_empty() {
        return Err(Error::config(format!(
            "insufficient history: the series ends on {last_date}, before the first full period starting {first_start}"
        )));
    }

    let (breach_date, liquidation_date) = breach_info.unwrap_or((None, None));
    let summary = BacktestSummary {
        source_id: returns.source_id.clone(),
        pricer: config.pricer,
        theta_days: config.theta_days,
        n_periods: periods.len(),
        breached: breach_date.is_some(),
        breach_date,
        liquidation_date,
        final_investor: investor_capital,
        final_manager: manager_carry,
        final_reinsurer: reinsurer_carry,
        total_premiums: periods.iter().map(|p| p.premium * p.investor_initial).sum(),
        total_performance_fees: periods.iter().map(|p| p.performance_fee).sum(),
    };
    Ok(BacktestLedger {
        summary,
        periods,
        days,
    })
}
