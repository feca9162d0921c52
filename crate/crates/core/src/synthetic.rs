//! Seeded synthetic data for fixtures, examples and calibration checks.

use chrono::{Datelike, Days, NaiveDate, Weekday};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::hmm::GaussianHmm;
use crate::returns_io::ReturnSeries;
use crate::types::Regime;

/// Daily returns drawn from a 2-state Gaussian HMM, with the hidden states.
pub fn hmm_returns(model: &GaussianHmm, n: usize, seed: u64) -> (Vec<f64>, Vec<Regime>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = if rng.random::<f64>() < model.initial[0] {
        0
    } else {
        1
    };
    let mut returns = Vec::with_capacity(n);
    let mut states = Vec::with_capacity(n);
    for t in 0..n {
        if t > 0 && rng.random::<f64>() < model.transition[state][1 - state] {
            state = 1 - state;
        }
        let z: f64 = rng.sample(StandardNormal);
        returns.push(model.means[state] + model.sds[state] * z);
        states.push(Regime::from_index(state));
    }
    (returns, states)
}

/// I.i.d. Gaussian daily log-returns.
pub fn gaussian_returns(mean: f64, sd: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| mean + sd * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// `n` consecutive weekdays starting on or after `start`.
pub fn weekdays(start: NaiveDate, n: usize) -> Vec<NaiveDate> {
    let mut out = Vec::with_capacity(n);
    let mut d = start;
    while out.len() < n {
        if !matches!(d.weekday(), Weekday::Sat | Weekday::Sun) {
            out.push(d);
        }
        d = d + Days::new(1);
    }
    out
}

/// Weekday-dated return series starting at `start`.
pub fn dated_series(source_id: &str, start: NaiveDate, log_returns: Vec<f64>) -> ReturnSeries {
    let dates = weekdays(start, log_returns.len());
    ReturnSeries::new(source_id, dates, log_returns).expect("weekday grid is strictly increasing")
}
