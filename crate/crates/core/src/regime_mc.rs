//! Monte Carlo premium under a two-state Markov-switching log-price process.
//!
//! Each path runs a discrete-time regime chain on a daily grid and a
//! log-price recursion driven by the regime's drift and volatility:
//!
//! ```text
//! R_{i+1} = R_i + (drift_s - sigma_s^2 / 2) dt + sigma_s sqrt(dt) eta_i
//! ```
//!
//! The barrier is monitored on the grid up to the horizon. After the first
//! grid point at or below `K` the path runs `theta` more (possibly
//! fractional) steps and the discounted shortfall `e^{-r(tau+theta)} [K - X]^+`
//! is recorded. The premium is the mean shortfall over paths.
//!
//! Paths are generated in units: one path, or an antithetic pair sharing the
//! regime chain with negated Gaussian shocks. Every unit draws from its own
//! ChaCha streams keyed by `(seed, unit index)`, so results do not depend on
//! the number of worker threads.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{
    ContractTerms, Measure, PremiumResult, Regime, RegimeParams, TRADING_DAYS_PER_YEAR,
};

/// Regime at time zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitialState {
    #[default]
    Normal,
    Stressed,
    /// Drawn from the stationary distribution of the chain.
    Stationary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: usize,
    pub steps_per_year: u32,
    pub seed: u64,
    pub antithetic: bool,
    pub initial_state: InitialState,
    pub measure: Measure,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            steps_per_year: 252,
            seed: 0,
            antithetic: true,
            initial_state: InitialState::Normal,
            measure: Measure::RiskNeutral,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_paths == 0 {
            return Err(Error::config("n_paths must be at least 1"));
        }
        if self.antithetic && self.n_paths % 2 != 0 {
            return Err(Error::config(format!(
                "antithetic sampling needs an even path count, got {}",
                self.n_paths
            )));
        }
        if self.steps_per_year == 0 {
            return Err(Error::config("steps_per_year must be positive"));
        }
        Ok(())
    }

    fn dt(&self) -> f64 {
        1.0 / self.steps_per_year as f64
    }

    fn units(&self) -> usize {
        if self.antithetic {
            self.n_paths / 2
        } else {
            self.n_paths
        }
    }
}

/// Step layout derived from the contract: monitoring steps up to the horizon
/// plus the liquidation window, whose last step may be partial.
#[derive(Debug, Clone, Copy)]
struct Grid {
    dt: f64,
    monitor_steps: usize,
    theta_full: usize,
    theta_frac: f64,
    theta_years: f64,
}

impl Grid {
    fn new(config: &SimConfig, terms: &ContractTerms) -> Self {
        let spy = config.steps_per_year as f64;
        let monitor_steps = (terms.horizon_years * spy).round().max(1.0) as usize;
        let theta_steps = terms.theta_days / TRADING_DAYS_PER_YEAR * spy;
        let mut theta_full = theta_steps.floor() as usize;
        let mut theta_frac = theta_steps - theta_full as f64;
        if theta_frac < 1e-12 {
            theta_frac = 0.0;
        } else if 1.0 - theta_frac < 1e-12 {
            theta_full += 1;
            theta_frac = 0.0;
        }
        Self {
            dt: config.dt(),
            monitor_steps,
            theta_full,
            theta_frac,
            theta_years: terms.theta_years(),
        }
    }

    fn total_steps(&self) -> usize {
        self.monitor_steps + self.theta_full + usize::from(self.theta_frac > 0.0)
    }
}

/// Outcome of one simulated path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PathOutcome {
    pub breached: bool,
    /// First grid time at or below the barrier.
    pub tau_years: Option<f64>,
    /// Fund value at `tau + theta`.
    pub x_at_eval: Option<f64>,
    /// `e^{-r(tau+theta)} [K - X_{tau+theta}]^+`, zero without a breach.
    pub discounted_shortfall: f64,
}

impl PathOutcome {
    fn survived() -> Self {
        Self {
            breached: false,
            tau_years: None,
            x_at_eval: None,
            discounted_shortfall: 0.0,
        }
    }
}

fn draw_initial<R: Rng>(rng: &mut R, regime: &RegimeParams, initial: InitialState) -> Regime {
    match initial {
        InitialState::Normal => Regime::Normal,
        InitialState::Stressed => Regime::Stressed,
        InitialState::Stationary => {
            // p + q = 0 never leaves the start; treat it as normal.
            let pi_normal = regime
                .stationary_distribution()
                .map(|(a, _)| a)
                .unwrap_or(1.0);
            if rng.random::<f64>() < pi_normal {
                Regime::Normal
            } else {
                Regime::Stressed
            }
        }
    }
}

fn fill_chain<R: Rng>(
    rng: &mut R,
    regime: &RegimeParams,
    initial: InitialState,
    states: &mut Vec<Regime>,
    n_steps: usize,
) {
    states.clear();
    if n_steps == 0 {
        return;
    }
    let mut state = draw_initial(rng, regime, initial);
    states.push(state);
    for _ in 1..n_steps {
        if rng.random::<f64>() < regime.switch_probability(state) {
            state = match state {
                Regime::Normal => Regime::Stressed,
                Regime::Stressed => Regime::Normal,
            };
        }
        states.push(state);
    }
}

/// Simulates `n_steps` states of the discretised regime chain.
///
/// `states[i]` governs the price increment over step `i + 1`; `states[0]`
/// is the initial regime and each later entry follows one transition of
/// `[[1-p, p], [q, 1-q]]`.
pub fn simulate_chain<R: Rng>(
    rng: &mut R,
    regime: &RegimeParams,
    initial: InitialState,
    n_steps: usize,
) -> Vec<Regime> {
    let mut states = Vec::with_capacity(n_steps);
    fill_chain(rng, regime, initial, &mut states, n_steps);
    states
}

/// Inputs shared by every path of one pricing run.
#[derive(Debug, Clone, Copy)]
pub struct PathModel {
    pub regime: RegimeParams,
    pub terms: ContractTerms,
    pub measure: Measure,
    /// Risk-free rate for the risk-neutral drift and for discounting.
    pub r: f64,
    grid: Grid,
    log_barrier: f64,
}

impl PathModel {
    pub fn new(
        config: &SimConfig,
        regime: &RegimeParams,
        terms: &ContractTerms,
        r: f64,
    ) -> Result<Self> {
        config.validate()?;
        regime.validate()?;
        terms.validate()?;
        Ok(Self {
            regime: *regime,
            terms: *terms,
            measure: config.measure,
            r,
            grid: Grid::new(config, terms),
            log_barrier: (terms.barrier() / terms.x0).ln(),
        })
    }

    /// Number of chain states and shocks a path consumes.
    pub fn steps_required(&self) -> usize {
        self.grid.total_steps()
    }

    fn drift(&self, state: Regime) -> f64 {
        match self.measure {
            Measure::RiskNeutral => self.r,
            Measure::Empirical => self.regime.drift(state),
        }
    }

    #[inline]
    fn increment(&self, state: Regime, dt: f64, shock: f64) -> f64 {
        let sigma = self.regime.sigma(state);
        (self.drift(state) - 0.5 * sigma * sigma) * dt + sigma * dt.sqrt() * shock
    }

    /// `ln(X / x0)` after every full step, ignoring the barrier.
    pub fn log_price_path(&self, states: &[Regime], shocks: &[f64], sign: f64) -> Vec<f64> {
        let mut log_x = 0.0;
        states
            .iter()
            .zip(shocks)
            .map(|(s, z)| {
                log_x += self.increment(*s, self.grid.dt, sign * z);
                log_x
            })
            .collect()
    }

    /// Runs one path over the given regimes and standard normal shocks,
    /// each scaled by `sign` (`-1.0` for the antithetic partner).
    pub fn simulate_path(&self, states: &[Regime], shocks: &[f64], sign: f64) -> PathOutcome {
        let g = &self.grid;
        assert!(
            states.len() >= g.total_steps() && shocks.len() >= g.total_steps(),
            "path needs {} steps, got {} states and {} shocks",
            g.total_steps(),
            states.len(),
            shocks.len()
        );
        let mut log_x = 0.0;
        for i in 0..g.monitor_steps {
            log_x += self.increment(states[i], g.dt, sign * shocks[i]);
            if log_x <= self.log_barrier {
                let tau = (i + 1) as f64 * g.dt;
                let mut j = i + 1;
                for _ in 0..g.theta_full {
                    log_x += self.increment(states[j], g.dt, sign * shocks[j]);
                    j += 1;
                }
                if g.theta_frac > 0.0 {
                    log_x += self.increment(states[j], g.dt * g.theta_frac, sign * shocks[j]);
                }
                let x = self.terms.x0 * log_x.exp();
                let t_eval = tau + g.theta_years;
                let shortfall = (self.terms.barrier() - x).max(0.0) / self.terms.x0;
                return PathOutcome {
                    breached: true,
                    tau_years: Some(tau),
                    x_at_eval: Some(x),
                    discounted_shortfall: (-self.r * t_eval).exp() * shortfall,
                };
            }
        }
        PathOutcome::survived()
    }
}

/// Convenience wrapper around [`PathModel::simulate_path`] for a single
/// un-negated path.
pub fn simulate_path(
    config: &SimConfig,
    regime: &RegimeParams,
    terms: &ContractTerms,
    r: f64,
    states: &[Regime],
    shocks: &[f64],
) -> Result<PathOutcome> {
    let model = PathModel::new(config, regime, terms, r)?;
    Ok(model.simulate_path(states, shocks, 1.0))
}

/// Per-unit contribution to the estimator.
#[derive(Debug, Clone, Copy)]
struct UnitValue {
    value: f64,
    breaches: u32,
}

#[derive(Default)]
struct Scratch {
    states: Vec<Regime>,
    shocks: Vec<f64>,
}

/// RNG streams of one unit: the chain and the Gaussian shocks are independent
/// so that antithetic negation touches only the shocks.
fn unit_rngs(seed: u64, unit: u64) -> (ChaCha8Rng, ChaCha8Rng) {
    let mut chain = ChaCha8Rng::seed_from_u64(seed);
    chain.set_stream(2 * unit);
    let mut shocks = ChaCha8Rng::seed_from_u64(seed);
    shocks.set_stream(2 * unit + 1);
    (chain, shocks)
}

fn simulate_unit(
    config: &SimConfig,
    model: &PathModel,
    unit: usize,
    scratch: &mut Scratch,
) -> UnitValue {
    let n = model.steps_required();
    let (mut chain_rng, mut shock_rng) = unit_rngs(config.seed, unit as u64);
    fill_chain(
        &mut chain_rng,
        &model.regime,
        config.initial_state,
        &mut scratch.states,
        n,
    );
    scratch.shocks.clear();
    scratch
        .shocks
        .extend((0..n).map(|_| shock_rng.sample::<f64, _>(StandardNormal)));

    let first = model.simulate_path(&scratch.states, &scratch.shocks, 1.0);
    if config.antithetic {
        let second = model.simulate_path(&scratch.states, &scratch.shocks, -1.0);
        UnitValue {
            value: 0.5 * (first.discounted_shortfall + second.discounted_shortfall),
            breaches: u32::from(first.breached) + u32::from(second.breached),
        }
    } else {
        UnitValue {
            value: first.discounted_shortfall,
            breaches: u32::from(first.breached),
        }
    }
}

/// Neumaier-compensated running sum.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Monte Carlo premium: mean discounted shortfall over all paths, antithetic
/// pairs averaged first. The standard error is the sample standard deviation
/// of the unit contributions over the square root of the unit count.
pub fn estimate_premium_ms(
    config: &SimConfig,
    regime: &RegimeParams,
    terms: &ContractTerms,
    r: f64,
) -> Result<PremiumResult> {
    let model = PathModel::new(config, regime, terms, r)?;
    let units = config.units();
    let values: Vec<UnitValue> = (0..units)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, unit| {
            simulate_unit(config, &model, unit, scratch)
        })
        .collect();

    let mut sum = CompensatedSum::default();
    let mut breaches = 0u64;
    for v in &values {
        sum.add(v.value);
        breaches += u64::from(v.breaches);
    }
    let n = units as f64;
    let mean = sum.value() / n;
    let std_error = if units > 1 {
        let mut ss = CompensatedSum::default();
        for v in &values {
            ss.add((v.value - mean) * (v.value - mean));
        }
        (ss.value() / (n - 1.0)).sqrt() / n.sqrt()
    } else {
        0.0
    };
    Ok(PremiumResult {
        m_r: mean,
        std_error: Some(std_error),
        n_paths: Some(config.n_paths),
        breach_fraction: Some(breaches as f64 / config.n_paths as f64),
    })
}

/// Convex combination of the premiums from a normal and a stressed start.
pub fn weighted_premium(
    good: &PremiumResult,
    stressed: &PremiumResult,
    w_good: f64,
) -> Result<PremiumResult> {
    if !(0.0..=1.0).contains(&w_good) {
        return Err(Error::domain(format!(
            "weight must lie in [0,1], got {w_good}"
        )));
    }
    let w_bad = 1.0 - w_good;
    let std_error = match (good.std_error, stressed.std_error) {
        (Some(a), Some(b)) => Some(((w_good * a).powi(2) + (w_bad * b).powi(2)).sqrt()),
        (Some(a), None) => Some(w_good * a),
        (None, Some(b)) => Some(w_bad * b),
        (None, None) => None,
    };
    let breach_fraction = match (good.breach_fraction, stressed.breach_fraction) {
        (Some(a), Some(b)) => Some(w_good * a + w_bad * b),
        _ => None,
    };
    let n_paths = match (good.n_paths, stressed.n_paths) {
        (Some(a), Some(b)) => Some(a + b),
        _ => None,
    };
    Ok(PremiumResult {
        m_r: w_good * good.m_r + w_bad * stressed.m_r,
        std_error,
        n_paths,
        breach_fraction,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    #[test]
    fn absorbing_chain_stays_normal() {
        let regime = RegimeParams {
            p: 0.0,
            q: 0.3,
            ..RegimeParams::hfrx_mean()
        };
        let states = simulate_chain(&mut rng(1), &regime, InitialState::Normal, 1000);
        assert!(states.iter().all(|s| *s == Regime::Normal));
    }

    #[test]
    fn symmetric_chain_occupancy() {
        let regime = RegimeParams::single_regime(0.1, 0.5, 0.5);
        let n = 1_000_000;
        let states = simulate_chain(&mut rng(2), &regime, InitialState::Normal, n);
        let freq = states.iter().filter(|s| **s == Regime::Normal).count() as f64 / n as f64;
        // With p = q = 1/2 the states are i.i.d. fair coin flips.
        let sd = (0.25 / n as f64).sqrt();
        assert!((freq - 0.5).abs() < 3.0 * sd, "{freq}");
    }

    #[test]
    fn hfrx_chain_occupancy() {
        let regime = RegimeParams::hfrx_mean();
        let n = 1_000_000;
        let states = simulate_chain(&mut rng(3), &regime, InitialState::Stationary, n);
        let freq = states.iter().filter(|s| **s == Regime::Normal).count() as f64 / n as f64;
        let (pi1, _) = regime.stationary_distribution().unwrap();
        // Markov-correlated occupancy: variance inflates by (1 + rho) / (1 - rho)
        // with rho = 1 - p - q the lag-one autocorrelation.
        let rho = 1.0 - regime.p - regime.q;
        let sd = (pi1 * (1.0 - pi1) / n as f64 * (1.0 + rho) / (1.0 - rho)).sqrt();
        assert!((freq - pi1).abs() < 3.0 * sd, "{freq} vs {pi1} (sd {sd})");
    }

    #[test]
    fn zero_volatility_path_never_breaches() {
        let regime = RegimeParams::single_regime(0.0, 0.1, 0.1);
        let terms = ContractTerms::default().with_theta_days(5.0);
        let config = SimConfig::default();
        let model = PathModel::new(&config, &regime, &terms, 0.01).unwrap();
        let n = model.steps_required();
        let states = vec![Regime::Normal; n];
        let shocks = vec![-5.0; n];
        let out = model.simulate_path(&states, &shocks, 1.0);
        assert!(!out.breached);
        assert_eq!(out.discounted_shortfall, 0.0);
    }

    #[test]
    fn unreachable_barrier_gives_zero_premium() {
        let regime = RegimeParams::single_regime(0.25, 0.0175, 0.0865);
        let terms = ContractTerms::default()
            .with_deposit(0.999)
            .with_theta_days(20.0);
        let config = SimConfig {
            n_paths: 2_000,
            ..SimConfig::default()
        };
        let p = estimate_premium_ms(&config, &regime, &terms, 0.01).unwrap();
        assert_eq!(p.m_r, 0.0);
        assert_eq!(p.breach_fraction, Some(0.0));
    }

    #[test]
    fn deterministic_breach_and_partial_step() {
        // Constant shocks make the path hand-computable.
        let regime = RegimeParams::single_regime(0.2, 0.0, 0.0);
        let terms = ContractTerms::default().with_theta_days(1.5);
        let config = SimConfig {
            n_paths: 2,
            ..SimConfig::default()
        };
        let r = 0.01;
        let model = PathModel::new(&config, &regime, &terms, r).unwrap();
        let n = model.steps_required();
        assert_eq!(n, 252 + 2);
        let shocks = vec![-3.0; n];
        let states = vec![Regime::Normal; n];
        let out = model.simulate_path(&states, &shocks, 1.0);

        let dt = 1.0 / 252.0;
        let step = (r - 0.02) * dt + 0.2 * dt.sqrt() * -3.0;
        let k = (0.9_f64.ln() / step).ceil() as usize;
        assert_eq!(out.tau_years, Some(k as f64 * dt));
        let half = (r - 0.02) * dt * 0.5 + 0.2 * (0.5 * dt).sqrt() * -3.0;
        let log_x = k as f64 * step + step + half;
        let x = log_x.exp();
        assert!((out.x_at_eval.unwrap() - x).abs() < 1e-12);
        let expected = (-r * (k as f64 * dt + 1.5 / 252.0)).exp() * (0.9 - x);
        assert!((out.discounted_shortfall - expected).abs() < 1e-12);
    }

    #[test]
    fn odd_antithetic_count_rejected() {
        let config = SimConfig {
            n_paths: 3,
            ..SimConfig::default()
        };
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn weighted_premium_cases() {
        let bps = |x: f64| PremiumResult {
            m_r: x * 1e-4,
            std_error: Some(0.0),
            n_paths: Some(10),
            breach_fraction: Some(0.0),
        };
        let w = weighted_premium(&bps(0.3), &bps(0.5), 0.8427).unwrap();
        assert!((w.bps() - 0.33146).abs() < 1e-9);
        let one = weighted_premium(&bps(0.3), &bps(0.5), 1.0).unwrap();
        assert_eq!(one.m_r, bps(0.3).m_r);
        let same = weighted_premium(&bps(0.4), &bps(0.4), 0.5).unwrap();
        assert!((same.m_r - bps(0.4).m_r).abs() < 1e-18);
        assert!(weighted_premium(&bps(0.3), &bps(0.5), 1.5).is_err());
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
