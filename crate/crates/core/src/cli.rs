//! Command-line front end. The `liqprem` binary is a thin wrapper around
//! [`run`], which tests can also call in-process.
//!
//! Exit codes: 0 on success, 2 for usage or configuration errors, 3 when a
//! computation fails. `LIQPREM_THREADS` caps the worker pool (0 or unset
//! means one thread per core).

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::backtest::{run_backtest, BacktestConfig, BacktestLedger, Pricer};
use crate::closed_form::premium_gbm_components;
use crate::error::{Error, Result};
use crate::hmm::{self, FitOptions, HeuristicConfig};
use crate::regime_mc::{estimate_premium_ms, weighted_premium, InitialState, SimConfig};
use crate::returns_io::{
    equal_weight_buy_and_hold, load_rates, load_returns, RateSeries, ReturnSeries, ValueFormat,
};
use crate::types::{ContractTerms, GbmParams, Measure, PremiumResult, RegimeParams, BPS};

pub const THREADS_ENV: &str = "LIQPREM_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_COMPUTATION: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "liqprem",
    version,
    about = "Reinsurance premiums for first-loss hedge fund structures"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Closed-form premium under geometric Brownian motion.
    PriceGbm(PriceGbmArgs),
    /// Monte Carlo premium under the two-regime model.
    PriceMs(PriceMsArgs),
    /// Calibrate the two-state HMM on a return series.
    FitHmm(FitHmmArgs),
    /// Premium along one parameter axis, as CSV.
    Sweep(SweepArgs),
    /// Rolling annual backtest on historical returns.
    Backtest(BacktestArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MeasureArg {
    #[value(name = "risk-neutral", alias = "q")]
    RiskNeutral,
    #[value(alias = "p")]
    Empirical,
}

impl From<MeasureArg> for Measure {
    fn from(m: MeasureArg) -> Self {
        match m {
            MeasureArg::RiskNeutral => Measure::RiskNeutral,
            MeasureArg::Empirical => Measure::Empirical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InitialStateArg {
    #[value(alias = "normal")]
    Good,
    Stressed,
    Stationary,
}

impl From<InitialStateArg> for InitialState {
    fn from(s: InitialStateArg) -> Self {
        match s {
            InitialStateArg::Good => InitialState::Normal,
            InitialStateArg::Stressed => InitialState::Stressed,
            InitialStateArg::Stationary => InitialState::Stationary,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ContractArgs {
    /// Initial investment.
    #[arg(long, default_value_t = 1.0)]
    pub x0: f64,
    /// Managerial deposit as a fraction of the investment.
    #[arg(long, default_value_t = 0.1)]
    pub c_m: f64,
    /// Contract horizon in years.
    #[arg(long = "horizon", default_value_t = 1.0)]
    pub horizon_years: f64,
    /// Liquidation window in trading days.
    #[arg(long, default_value_t = 1.0)]
    pub theta_days: f64,
    /// Annual risk-free rate.
    #[arg(long, default_value_t = 0.01)]
    pub r: f64,
}

impl ContractArgs {
    fn terms(&self) -> ContractTerms {
        ContractTerms {
            x0: self.x0,
            c_m: self.c_m,
            horizon_years: self.horizon_years,
            theta_days: self.theta_days,
            ..ContractTerms::default()
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PriceGbmArgs {
    #[command(flatten)]
    pub contract: ContractArgs,
    /// Annual volatility.
    #[arg(long)]
    pub sigma: f64,
    #[arg(long, value_enum, default_value = "risk-neutral")]
    pub measure: MeasureArg,
    /// Arithmetic drift b under the empirical measure.
    #[arg(long, conflicts_with = "mu_emp")]
    pub drift: Option<f64>,
    /// Annualised mean log return; the drift becomes mu_emp + sigma^2/2.
    #[arg(long)]
    pub mu_emp: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct RegimeArgs {
    #[arg(long, default_value_t = RegimeParams::hfrx_mean().mu1)]
    pub mu1: f64,
    #[arg(long, default_value_t = RegimeParams::hfrx_mean().mu2)]
    pub mu2: f64,
    #[arg(long, default_value_t = RegimeParams::hfrx_mean().sigma1)]
    pub sigma1: f64,
    #[arg(long, default_value_t = RegimeParams::hfrx_mean().sigma2)]
    pub sigma2: f64,
    /// Daily probability of moving from the normal to the stressed regime.
    #[arg(long, default_value_t = RegimeParams::hfrx_mean().p)]
    pub p: f64,
    /// Daily probability of moving from the stressed to the normal regime.
    #[arg(long, default_value_t = RegimeParams::hfrx_mean().q)]
    pub q: f64,
}

impl RegimeArgs {
    fn params(&self) -> RegimeParams {
        RegimeParams {
            mu1: self.mu1,
            mu2: self.mu2,
            sigma1: self.sigma1,
            sigma2: self.sigma2,
            p: self.p,
            q: self.q,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimArgs {
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub no_antithetic: bool,
    #[arg(long, default_value_t = 252)]
    pub steps_per_year: u32,
}

impl SimArgs {
    fn config(&self, measure: Measure, initial_state: InitialState) -> SimConfig {
        SimConfig {
            n_paths: self.n_paths,
            steps_per_year: self.steps_per_year,
            seed: self.seed,
            antithetic: !self.no_antithetic,
            initial_state,
            measure,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct PriceMsArgs {
    #[command(flatten)]
    pub contract: ContractArgs,
    #[command(flatten)]
    pub regime: RegimeArgs,
    #[command(flatten)]
    pub sim: SimArgs,
    #[arg(long, value_enum, default_value = "risk-neutral")]
    pub measure: MeasureArg,
    #[arg(long, value_enum, default_value = "good")]
    pub initial_state: InitialStateArg,
    /// Weight of the normal-start premium; prices both starts and mixes them.
    #[arg(long, conflicts_with = "initial_state")]
    pub weight_good: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct FitHmmArgs {
    /// Input CSV with header `date,value`.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "levels")]
    pub format: ValueFormat,
    /// Write the decoded regime of every day here as `date,state` CSV.
    #[arg(long)]
    pub states_out: Option<PathBuf>,
    #[arg(long, default_value_t = HeuristicConfig::default().window_days)]
    pub window_days: usize,
    #[arg(long, default_value_t = HeuristicConfig::default().vol_multiplier)]
    pub vol_multiplier: f64,
    #[arg(long, default_value_t = FitOptions::default().max_iter)]
    pub max_iter: usize,
    #[arg(long, default_value_t = FitOptions::default().tol)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    Sigma,
    Theta,
    Sigma1,
}

impl SweepAxis {
    fn name(self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::Theta => "theta_days",
            SweepAxis::Sigma1 => "sigma1",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Explicit grid, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    pub values: Vec<f64>,
    /// Grid as `min,max,step`.
    #[arg(long, value_delimiter = ',', conflicts_with = "values")]
    pub range: Vec<f64>,
    #[arg(long, value_enum, default_value = "gbm")]
    pub pricer: Pricer,
    #[arg(long, value_enum, default_value = "risk-neutral")]
    pub measure: MeasureArg,
    #[command(flatten)]
    pub contract: ContractArgs,
    /// Volatility for the closed-form pricer when it is not the swept axis.
    #[arg(long, default_value_t = 0.05)]
    pub sigma: f64,
    #[arg(long, conflicts_with = "mu_emp")]
    pub drift: Option<f64>,
    #[arg(long)]
    pub mu_emp: Option<f64>,
    #[command(flatten)]
    pub regime: RegimeArgs,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub no_antithetic: bool,
    #[arg(long, value_enum, default_value = "good")]
    pub initial_state: InitialStateArg,
    /// Output CSV; standard output when absent.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

/// Validated sweep description.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub grid: Vec<f64>,
}

impl SweepSpec {
    pub fn new(axis: SweepAxis, grid: Vec<f64>) -> Result<Self> {
        if grid.is_empty() {
            return Err(Error::config("sweep grid is empty"));
        }
        if grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep grid contains a non-finite value"));
        }
        if grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::config("sweep grid must be strictly increasing"));
        }
        Ok(Self { axis, grid })
    }

    /// Grid `min, min + step, ...` up to `max` inclusive (within rounding).
    pub fn from_range(axis: SweepAxis, min: f64, max: f64, step: f64) -> Result<Self> {
        if !(step > 0.0) || !(max >= min) {
            return Err(Error::config(format!(
                "invalid range {min},{max},{step}: need max >= min and step > 0"
            )));
        }
        let n = ((max - min) / step + 1e-9).floor() as usize;
        Self::new(axis, (0..=n).map(|i| min + i as f64 * step).collect())
    }
}

#[derive(Debug, Clone, Args)]
pub struct BacktestArgs {
    /// Return series CSV; repeat with `--equal-weight` for a portfolio.
    #[arg(long = "returns", required = true)]
    pub returns: Vec<PathBuf>,
    #[arg(long)]
    pub equal_weight: bool,
    #[arg(long, value_enum, default_value = "levels")]
    pub format: ValueFormat,
    /// Annual risk-free rate CSV with header `date,value`.
    #[arg(long, conflicts_with = "rate")]
    pub rates: Option<PathBuf>,
    /// Constant annual risk-free rate, used when no rate file is given.
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_enum, default_value = "gbm")]
    pub pricer: Pricer,
    #[arg(long, default_value_t = 1.0)]
    pub theta_days: f64,
    #[arg(long, default_value_t = 0.1)]
    pub c_m: f64,
    #[arg(long, default_value_t = 0.5)]
    pub alpha_m: f64,
    #[arg(long, default_value_t = 0.0)]
    pub m_m: f64,
    #[arg(long, default_value_t = 2)]
    pub window_years: u32,
    /// First period start (YYYY-MM-DD); also fixes the anniversary.
    #[arg(long)]
    pub first_start: Option<NaiveDate>,
    #[arg(long, default_value_t = 13)]
    pub max_periods: usize,
    #[arg(long, default_value_t = 100_000)]
    pub n_paths: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Daily ledger CSV output.
    #[arg(long)]
    pub ledger: Option<PathBuf>,
    /// Summary JSON output.
    #[arg(long)]
    pub summary: Option<PathBuf>,
}

#[derive(Serialize)]
struct PremiumJson {
    m_r: f64,
    m_r_bps: f64,
    std_error: Option<f64>,
    std_error_bps: Option<f64>,
    n_paths: Option<usize>,
    breach_fraction: Option<f64>,
}

impl From<&PremiumResult> for PremiumJson {
    fn from(p: &PremiumResult) -> Self {
        Self {
            m_r: p.m_r,
            m_r_bps: p.bps(),
            std_error: p.std_error,
            std_error_bps: p.std_error_bps(),
            n_paths: p.n_paths,
            breach_fraction: p.breach_fraction,
        }
    }
}

#[derive(Serialize)]
struct PriceGbmOutput {
    command: &'static str,
    measure: Measure,
    sigma: f64,
    drift: f64,
    r: f64,
    x0: f64,
    c_m: f64,
    horizon_years: f64,
    theta_days: f64,
    v1: f64,
    v2: f64,
    premium: PremiumJson,
}

#[derive(Serialize)]
struct PriceMsOutput {
    command: &'static str,
    measure: Measure,
    regime: RegimeParams,
    r: f64,
    x0: f64,
    c_m: f64,
    horizon_years: f64,
    theta_days: f64,
    seed: u64,
    antithetic: bool,
    initial_state: Option<InitialState>,
    weight_good: Option<f64>,
    premium: PremiumJson,
    good_start: Option<PremiumJson>,
    stressed_start: Option<PremiumJson>,
}

#[derive(Serialize)]
struct CrisisSpan {
    start: NaiveDate,
    end: NaiveDate,
    days: usize,
}

#[derive(Serialize)]
struct FitHmmOutput {
    command: &'static str,
    source_id: String,
    n_observations: usize,
    regime: RegimeParams,
    daily_means: [f64; 2],
    daily_sds: [f64; 2],
    stationary: [f64; 2],
    /// Volatilities within 15% of each other: the data shows one regime.
    near_single_regime: bool,
    log_likelihood: f64,
    n_iterations: usize,
    converged: bool,
    stressed_days: usize,
    crisis_spans: Vec<CrisisSpan>,
}

fn drift_for(
    measure: Measure,
    sigma: f64,
    drift: Option<f64>,
    mu_emp: Option<f64>,
) -> Result<Option<f64>> {
    match measure {
        Measure::RiskNeutral => Ok(None),
        Measure::Empirical => match (drift, mu_emp) {
            (Some(b), _) => Ok(Some(b)),
            (None, Some(m)) => Ok(Some(m + 0.5 * sigma * sigma)),
            (None, None) => Err(Error::config(
                "the empirical measure needs --drift or --mu-emp",
            )),
        },
    }
}

fn gbm_params(r: f64, sigma: f64, b: Option<f64>) -> GbmParams {
    match b {
        Some(b) => GbmParams::empirical(r, sigma, b),
        None => GbmParams::risk_neutral(r, sigma),
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).map_err(io_err(path))?))
}

fn price_gbm(args: &PriceGbmArgs) -> Result<String> {
    let measure = Measure::from(args.measure);
    let b = drift_for(measure, args.sigma, args.drift, args.mu_emp)?;
    let params = gbm_params(args.contract.r, args.sigma, b);
    let terms = args.contract.terms();
    let out = premium_gbm_components(&terms, &params, measure)?;
    to_json(&PriceGbmOutput {
        command: "price-gbm",
        measure,
        sigma: args.sigma,
        drift: params.drift(measure)?,
        r: args.contract.r,
        x0: terms.x0,
        c_m: terms.c_m,
        horizon_years: terms.horizon_years,
        theta_days: terms.theta_days,
        v1: out.v1,
        v2: out.v2,
        premium: PremiumJson::from(&out.result),
    })
}

fn price_ms(args: &PriceMsArgs) -> Result<String> {
    let measure = Measure::from(args.measure);
    let regime = args.regime.params();
    let terms = args.contract.terms();
    let r = args.contract.r;
    let (premium, good, stressed, initial) = match args.weight_good {
        Some(w) => {
            if !(0.0..=1.0).contains(&w) {
                return Err(Error::config(format!(
                    "--weight-good must lie in [0,1], got {w}"
                )));
            }
            let good = estimate_premium_ms(
                &args.sim.config(measure, InitialState::Normal),
                &regime,
                &terms,
                r,
            )?;
            let stressed = estimate_premium_ms(
                &args.sim.config(measure, InitialState::Stressed),
                &regime,
                &terms,
                r,
            )?;
            let mixed = weighted_premium(&good, &stressed, w)?;
            (
                mixed,
                Some(PremiumJson::from(&good)),
                Some(PremiumJson::from(&stressed)),
                None,
            )
        }
        None => {
            let initial = InitialState::from(args.initial_state);
            let res = estimate_premium_ms(&args.sim.config(measure, initial), &regime, &terms, r)?;
            (res, None, None, Some(initial))
        }
    };
    to_json(&PriceMsOutput {
        command: "price-ms",
        measure,
        regime,
        r,
        x0: terms.x0,
        c_m: terms.c_m,
        horizon_years: terms.horizon_years,
        theta_days: terms.theta_days,
        seed: args.sim.seed,
        antithetic: !args.sim.no_antithetic,
        initial_state: initial,
        weight_good: args.weight_good,
        premium: PremiumJson::from(&premium),
        good_start: good,
        stressed_start: stressed,
    })
}

fn fit_hmm(args: &FitHmmArgs) -> Result<String> {
    let series = load_returns(&args.input, args.format)?;
    let heuristic = HeuristicConfig {
        window_days: args.window_days,
        vol_multiplier: args.vol_multiplier,
    };
    let opts = FitOptions {
        max_iter: args.max_iter,
        tol: args.tol,
        ..FitOptions::default()
    };
    let fit = hmm::fit(&series.log_returns, &heuristic, &opts)?;
    let (pi1, pi2) = hmm::stationary_distribution(&fit.regime).unwrap_or((f64::NAN, f64::NAN));
    let spans = hmm::crisis_spans(&fit.decoded_states);
    if let Some(path) = &args.states_out {
        let mut w = csv::Writer::from_writer(create(path)?);
        w.write_record(["date", "state"])?;
        for (d, s) in series.dates.iter().zip(&fit.decoded_states) {
            w.write_record([d.format("%Y-%m-%d").to_string(), s.label().to_string()])?;
        }
        w.flush().map_err(io_err(path))?;
    }
    let s1 = fit.regime.sigma1;
    let s2 = fit.regime.sigma2;
    to_json(&FitHmmOutput {
        command: "fit-hmm",
        source_id: series.source_id.clone(),
        n_observations: series.len(),
        regime: fit.regime,
        daily_means: fit.daily_means,
        daily_sds: fit.daily_sds,
        stationary: [pi1, pi2],
        near_single_regime: s2.max(s1) <= 1.15 * s1.min(s2),
        log_likelihood: fit.log_likelihood,
        n_iterations: fit.n_iterations,
        converged: fit.converged,
        stressed_days: fit.decoded_states.iter().filter(|s| s.index() == 1).count(),
        crisis_spans: spans
            .into_iter()
            .map(|(a, b)| CrisisSpan {
                start: series.dates[a],
                end: series.dates[b],
                days: b - a + 1,
            })
            .collect(),
    })
}

fn sweep(args: &SweepArgs) -> Result<String> {
    let spec = match args.range.as_slice() {
        [] => SweepSpec::new(args.axis, args.values.clone())?,
        &[min, max, step] => SweepSpec::from_range(args.axis, min, max, step)?,
        other => {
            return Err(Error::config(format!(
                "--range takes min,max,step; got {} values",
                other.len()
            )))
        }
    };
    if spec.axis == SweepAxis::Sigma1 && args.pricer != Pricer::MarkovSwitchingMc {
        return Err(Error::config("the sigma1 axis needs --pricer ms"));
    }
    let measure = Measure::from(args.measure);
    let sim = SimConfig {
        n_paths: args.n_paths,
        seed: args.seed,
        antithetic: !args.no_antithetic,
        initial_state: args.initial_state.into(),
        measure,
        ..SimConfig::default()
    };

    let mut out = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            spec.axis.name(),
            "m_r",
            "m_r_bps",
            "std_error",
            "std_error_bps",
        ])?;
        for &v in &spec.grid {
            let mut contract = args.contract.clone();
            let mut sigma = args.sigma;
            let mut regime = args.regime.params();
            match spec.axis {
                SweepAxis::Sigma => match args.pricer {
                    Pricer::GbmClosedForm => sigma = v,
                    Pricer::MarkovSwitchingMc => {
                        regime.sigma1 = v;
                        regime.sigma2 = v;
                    }
                },
                SweepAxis::Theta => contract.theta_days = v,
                SweepAxis::Sigma1 => regime.sigma1 = v,
            }
            let terms = contract.terms();
            let res = match args.pricer {
                Pricer::GbmClosedForm => {
                    let b = drift_for(measure, sigma, args.drift, args.mu_emp)?;
                    premium_gbm_components(&terms, &gbm_params(contract.r, sigma, b), measure)?
                        .result
                }
                Pricer::MarkovSwitchingMc => {
                    estimate_premium_ms(&sim, &regime, &terms, contract.r)?
                }
            };
            let fmt = |x: Option<f64>| x.map(|x| format!("{x:.12e}")).unwrap_or_default();
            w.write_record([
                format!("{v}"),
                format!("{:.12e}", res.m_r),
                format!("{:.12e}", res.m_r / BPS),
                fmt(res.std_error),
                fmt(res.std_error.map(|s| s / BPS)),
            ])?;
        }
        w.flush().map_err(io_err(Path::new("<sweep>")))?;
    }
    let csv = String::from_utf8(out).expect("csv output is UTF-8");
    match &args.output {
        Some(path) => {
            let mut f = create(path)?;
            f.write_all(csv.as_bytes()).map_err(io_err(path))?;
            f.flush().map_err(io_err(path))?;
            Ok(format!(
                "wrote {} rows to {}\n",
                spec.grid.len(),
                path.display()
            ))
        }
        None => Ok(csv),
    }
}

fn load_backtest_series(args: &BacktestArgs) -> Result<ReturnSeries> {
    match (args.returns.len(), args.equal_weight) {
        (1, false) => load_returns(&args.returns[0], args.format),
        (_, true) => {
            let all = args
                .returns
                .iter()
                .map(|p| load_returns(p, args.format))
                .collect::<Result<Vec<_>>>()?;
            equal_weight_buy_and_hold(&all)
        }
        (_, false) => Err(Error::config("several --returns files need --equal-weight")),
    }
}

fn period_table(ledger: &BacktestLedger) -> String {
    let mut s = format!(
        "{:>3}  {:<10}  {:<10}  {:>8}  {:>10}  {:>10}  {:>10}  {:>10}  {:<10}\n",
        "#", "start", "end", "rate", "m_r_bps", "investor", "manager", "reinsurer", "breach"
    );
    for p in &ledger.periods {
        s.push_str(&format!(
            "{:>3}  {:<10}  {:<10}  {:>8.5}  {:>10.4}  {:>10.6}  {:>10.6}  {:>10.6}  {:<10}\n",
            p.index,
            p.start_date,
            p.end_date,
            p.rate,
            p.premium / BPS,
            p.investor_end,
            p.manager_end,
            p.reinsurer_end,
            p.breach_date
                .map(|d| d.to_string())
                .unwrap_or_else(|| "-".into()),
        ));
    }
    s
}

fn backtest(args: &BacktestArgs) -> Result<String> {
    let series = load_backtest_series(args)?;
    let rates = match (&args.rates, args.rate) {
        (Some(path), _) => load_rates(path)?,
        (None, Some(r)) => RateSeries::constant(series.dates[0], r),
        (None, None) => return Err(Error::config("give --rates FILE or --rate VALUE")),
    };
    let mut config = BacktestConfig {
        pricer: args.pricer,
        theta_days: args.theta_days,
        c_m: args.c_m,
        alpha_m: args.alpha_m,
        m_m: args.m_m,
        window_years: args.window_years,
        first_start: args.first_start,
        max_periods: args.max_periods,
        sim: SimConfig {
            n_paths: args.n_paths,
            seed: args.seed,
            ..SimConfig::default()
        },
        ..BacktestConfig::default()
    };
    if let Some(d) = args.first_start {
        use chrono::Datelike;
        config.period_start = (d.month(), d.day());
    }
    let ledger = run_backtest(&config, &series, &rates)?;
    if let Some(path) = &args.ledger {
        ledger.write_csv(create(path)?)?;
    }
    if let Some(path) = &args.summary {
        let mut f = create(path)?;
        f.write_all(ledger.summary_json()?.as_bytes())
            .map_err(io_err(path))?;
        f.write_all(b"\n").map_err(io_err(path))?;
        f.flush().map_err(io_err(path))?;
    }
    let s = &ledger.summary;
    let mut text = period_table(&ledger);
    text.push_str(&format!(
        "periods={} breached={} final investor={:.6} manager={:.6} reinsurer={:.6}\n",
        s.n_periods, s.breached, s.final_investor, s.final_manager, s.final_reinsurer
    ));
    Ok(text)
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::Domain(_) => EXIT_USAGE,
        _ => EXIT_COMPUTATION,
    }
}

/// Runs one parsed command and returns its standard output.
pub fn execute(cli: &Cli) -> Result<String> {
    match &cli.command {
        Command::PriceGbm(a) => price_gbm(a),
        Command::PriceMs(a) => price_ms(a),
        Command::FitHmm(a) => fit_hmm(a),
        Command::Sweep(a) => sweep(a),
        Command::Backtest(a) => backtest(a),
    }
}

fn thread_count() -> std::result::Result<usize, String> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map_err(|_| format!("{THREADS_ENV} must be a non-negative integer, got {v:?}")),
        Err(_) => Ok(0),
    }
}

/// Parses `args` (including the program name), runs the command and writes
/// its output. Returns the process exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = err.write_all(rendered.as_bytes());
            } else {
                let _ = out.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let threads = match thread_count() {
        Ok(n) => n,
        Err(msg) => {
            let _ = writeln!(err, "error: {msg}");
            return EXIT_USAGE;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(p) => p,
        Err(e) => {
            let _ = writeln!(err, "error: cannot start worker pool: {e}");
            return EXIT_COMPUTATION;
        }
    };
    match pool.install(|| execute(&cli)) {
        Ok(text) => {
            if out.write_all(text.as_bytes()).is_err() {
                return EXIT_COMPUTATION;
            }
            EXIT_OK
        }
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}
