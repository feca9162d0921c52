//! Two-state Gaussian hidden Markov model for daily log-returns.
//!
//! Calibration runs in three stages: a rolling-volatility labelling gives
//! starting parameters, Baum-Welch EM (scaled forward-backward) refines them,
//! and Viterbi decodes the most likely regime path. After fitting, states are
//! relabelled so that state 1 is the low-volatility regime.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::types::{Regime, RegimeParams, TRADING_DAYS_PER_YEAR};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Minimum number of observations for a fit.
pub const MIN_OBSERVATIONS: usize = 50;

/// Parameters of a 2-state Gaussian HMM on daily data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianHmm {
    pub initial: [f64; 2],
    /// Row-stochastic transition matrix indexed `[from][to]`.
    pub transition: [[f64; 2]; 2],
    pub means: [f64; 2],
    pub sds: [f64; 2],
}

impl GaussianHmm {
    /// Daily model from regime parameters, with emissions given directly as
    /// daily means and standard deviations.
    pub fn from_daily(p: f64, q: f64, means: [f64; 2], sds: [f64; 2]) -> Self {
        let total = p + q;
        let initial = if total > 0.0 {
            [q / total, p / total]
        } else {
            [0.5, 0.5]
        };
        Self {
            initial,
            transition: [[1.0 - p, p], [q, 1.0 - q]],
            means,
            sds,
        }
    }

    pub fn log_emission(&self, state: usize, x: f64) -> f64 {
        let z = (x - self.means[state]) / self.sds[state];
        -0.5 * z * z - self.sds[state].ln() - LN_SQRT_2PI
    }

    pub fn emission(&self, state: usize, x: f64) -> f64 {
        self.log_emission(state, x).exp()
    }

    fn swapped(&self) -> Self {
        Self {
            initial: [self.initial[1], self.initial[0]],
            transition: [
                [self.transition[1][1], self.transition[1][0]],
                [self.transition[0][1], self.transition[0][0]],
            ],
            means: [self.means[1], self.means[0]],
            sds: [self.sds[1], self.sds[0]],
        }
    }

    /// Relabels states so that state 0 has the lower volatility.
    pub fn ordered(&self) -> Self {
        if self.sds[0] > self.sds[1] {
            self.swapped()
        } else {
            *self
        }
    }

    /// Finite parameters, positive volatilities and non-negative probabilities.
    pub fn is_valid(&self) -> bool {
        self.sds.iter().all(|s| s.is_finite() && *s > 0.0)
            && self.means.iter().all(|m| m.is_finite())
            && self
                .transition
                .iter()
                .flatten()
                .chain(self.initial.iter())
                .all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// Options of the rolling-volatility initialisation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HeuristicConfig {
    pub window_days: usize,
    pub vol_multiplier: f64,
}

impl Default for HeuristicConfig {
    fn default() -> Self {
        Self {
            window_days: 21,
            vol_multiplier: 1.5,
        }
    }
}

/// Starting point for EM together with the labelling it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HeuristicInit {
    pub model: GaussianHmm,
    pub labels: Vec<Regime>,
    /// Rolling labelling was degenerate and the absolute-return quantile
    /// split was used instead.
    pub used_fallback: bool,
}

fn mean_sd(xs: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = xs.clone().count() as f64;
    let mean = xs.clone().sum::<f64>() / n;
    let var = xs.map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0).max(1.0);
    (mean, var.sqrt())
}

/// Parameters implied by a hard labelling: per-state moments and transition
/// frequencies.
fn params_from_labels(returns: &[f64], labels: &[Regime], variance_floor: f64) -> GaussianHmm {
    let mut means = [0.0; 2];
    let mut sds = [0.0; 2];
    for s in 0..2 {
        let xs = returns
            .iter()
            .zip(labels)
            .filter(move |(_, l)| l.index() == s)
            .map(|(x, _)| *x);
        let (m, sd) = mean_sd(xs);
        means[s] = m;
        sds[s] = sd.max(variance_floor.sqrt());
    }
    let mut counts = [[0.0f64; 2]; 2];
    for w in labels.windows(2) {
        counts[w[0].index()][w[1].index()] += 1.0;
    }
    let rate = |from: usize| {
        let total = counts[from][0] + counts[from][1];
        if total > 0.0 {
            // Keep both transitions possible so EM can move them.
            (counts[from][1 - from] / total).clamp(1e-4, 1.0 - 1e-4)
        } else {
            0.5
        }
    };
    GaussianHmm::from_daily(rate(0), rate(1), means, sds)
}

/// Labels each day stressed when its trailing-window volatility exceeds
/// `vol_multiplier` times the full-sample volatility, then derives starting
/// parameters from that labelling.
///
/// The first `window_days - 1` days use the expanding window available so
/// far. If either state ends up with fewer than two days, the top quintile
/// of absolute returns is labelled stressed instead.
pub fn init_heuristic(returns: &[f64], config: &HeuristicConfig) -> Result<HeuristicInit> {
    let n = returns.len();
    if config.window_days < 2 {
        return Err(Error::config("heuristic window must span at least 2 days"));
    }
    if n <= config.window_days {
        return Err(Error::InsufficientData {
            needed: config.window_days + 1,
            got: n,
        });
    }
    let (_, full_sd) = mean_sd(returns.iter().copied());
    let threshold = config.vol_multiplier * full_sd;

    let labels: Vec<Regime> = (0..n)
        .map(|t| {
            let lo = (t + 1).saturating_sub(config.window_days);
            let window = &returns[lo..=t];
            let vol = if window.len() >= 2 {
                mean_sd(window.iter().copied()).1
            } else {
                window[0].abs()
            };
            if vol > threshold {
                Regime::Stressed
            } else {
                Regime::Normal
            }
        })
        .collect();

    let stressed = labels.iter().filter(|l| **l == Regime::Stressed).count();
    let floor = FitOptions::default().variance_floor;
    if stressed >= 2 && n - stressed >= 2 {
        return Ok(HeuristicInit {
            model: params_from_labels(returns, &labels, floor),
            labels,
            used_fallback: false,
        });
    }

    let mut abs: Vec<f64> = returns.iter().map(|x| x.abs()).collect();
    abs.sort_by(f64::total_cmp);
    let cut = abs[((n as f64) * 0.8).floor() as usize];
    let labels: Vec<Regime> = returns
        .iter()
        .map(|x| {
            if x.abs() >= cut {
                Regime::Stressed
            } else {
                Regime::Normal
            }
        })
        .collect();
    Ok(HeuristicInit {
        model: params_from_labels(returns, &labels, floor),
        labels,
        used_fallback: true,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitOptions {
    pub max_iter: usize,
    /// Stop once the log-likelihood gain falls below this.
    pub tol: f64,
    /// Lower bound on each state's daily variance.
    pub variance_floor: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            max_iter: 500,
            tol: 1e-8,
            variance_floor: 1e-8,
        }
    }
}

/// Scaled forward-backward pass.
#[derive(Debug, Clone)]
pub struct Posterior {
    /// Scaled forward probabilities; each row sums to 1.
    pub alpha: Vec<[f64; 2]>,
    /// Smoothed state probabilities.
    pub gamma: Vec<[f64; 2]>,
    /// Expected transition counts summed over time.
    pub xi_sum: [[f64; 2]; 2],
    pub log_likelihood: f64,
}

pub fn forward_backward(model: &GaussianHmm, obs: &[f64]) -> Posterior {
    let n = obs.len();
    let mut alpha = vec![[0.0; 2]; n];
    let mut scale = vec![0.0; n];
    let mut emis = vec![[0.0; 2]; n];
    let a = &model.transition;

    // Emissions are rescaled per step by their maximum so that tiny
    // variances do not underflow; the shift is added back to the likelihood.
    let mut log_shift = 0.0;
    for t in 0..n {
        let le = [model.log_emission(0, obs[t]), model.log_emission(1, obs[t])];
        let m = le[0].max(le[1]);
        emis[t] = [(le[0] - m).exp(), (le[1] - m).exp()];
        log_shift += m;
    }

    for t in 0..n {
        let prior = if t == 0 {
            model.initial
        } else {
            let p = alpha[t - 1];
            [
                p[0] * a[0][0] + p[1] * a[1][0],
                p[0] * a[0][1] + p[1] * a[1][1],
            ]
        };
        let u = [prior[0] * emis[t][0], prior[1] * emis[t][1]];
        let c = u[0] + u[1];
        scale[t] = c;
        alpha[t] = [u[0] / c, u[1] / c];
    }

    let mut beta = vec![[1.0; 2]; n];
    for t in (0..n.saturating_sub(1)).rev() {
        let e = emis[t + 1];
        let b = beta[t + 1];
        let c = scale[t + 1];
        for i in 0..2 {
            beta[t][i] = (a[i][0] * e[0] * b[0] + a[i][1] * e[1] * b[1]) / c;
        }
    }

    let mut gamma = vec![[0.0; 2]; n];
    for t in 0..n {
        let g = [alpha[t][0] * beta[t][0], alpha[t][1] * beta[t][1]];
        let s = g[0] + g[1];
        gamma[t] = [g[0] / s, g[1] / s];
    }

    let mut xi_sum = [[0.0; 2]; 2];
    for t in 0..n.saturating_sub(1) {
        let e = emis[t + 1];
        let c = scale[t + 1];
        for i in 0..2 {
            for j in 0..2 {
                xi_sum[i][j] += alpha[t][i] * a[i][j] * e[j] * beta[t + 1][j] / c;
            }
        }
    }

    let log_likelihood = scale.iter().map(|c| c.ln()).sum::<f64>() + log_shift;
    Posterior {
        alpha,
        gamma,
        xi_sum,
        log_likelihood,
    }
}

pub fn log_likelihood(model: &GaussianHmm, obs: &[f64]) -> f64 {
    forward_backward(model, obs).log_likelihood
}

fn m_step(obs: &[f64], post: &Posterior, variance_floor: f64) -> GaussianHmm {
    let mut weight = [0.0; 2];
    let mut mean_acc = [0.0; 2];
    for (x, g) in obs.iter().zip(&post.gamma) {
        for s in 0..2 {
            weight[s] += g[s];
            mean_acc[s] += g[s] * x;
        }
    }
    let means = [mean_acc[0] / weight[0], mean_acc[1] / weight[1]];
    let mut var_acc = [0.0; 2];
    for (x, g) in obs.iter().zip(&post.gamma) {
        for s in 0..2 {
            var_acc[s] += g[s] * (x - means[s]) * (x - means[s]);
        }
    }
    let sds = [
        (var_acc[0] / weight[0]).max(variance_floor).sqrt(),
        (var_acc[1] / weight[1]).max(variance_floor).sqrt(),
    ];
    let mut transition = [[0.0; 2]; 2];
    for i in 0..2 {
        let row = post.xi_sum[i][0] + post.xi_sum[i][1];
        for j in 0..2 {
            transition[i][j] = if row > 0.0 {
                post.xi_sum[i][j] / row
            } else if i == j {
                1.0
            } else {
                0.0
            };
        }
    }
    GaussianHmm {
        initial: post.gamma[0],
        transition,
        means,
        sds,
    }
}

/// Result of a Baum-Welch calibration, relabelled so that state 1 is the
/// low-volatility regime.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HmmFitResult {
    /// Annualised regime parameters.
    pub regime: RegimeParams,
    pub model: GaussianHmm,
    pub daily_means: [f64; 2],
    pub daily_sds: [f64; 2],
    pub log_likelihood: f64,
    /// Log-likelihood of the starting model followed by one entry per EM step.
    pub log_likelihood_trace: Vec<f64>,
    pub n_iterations: usize,
    pub converged: bool,
    pub decoded_states: Vec<Regime>,
}

fn run_em(
    obs: &[f64],
    init: &GaussianHmm,
    opts: &FitOptions,
) -> Option<(GaussianHmm, Vec<f64>, usize, bool)> {
    let mut model = *init;
    let mut post = forward_backward(&model, obs);
    if !post.log_likelihood.is_finite() {
        return None;
    }
    let mut trace = vec![post.log_likelihood];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        let next = m_step(obs, &post, opts.variance_floor);
        if !next.is_valid() {
            return None;
        }
        let next_post = forward_backward(&next, obs);
        if !next_post.log_likelihood.is_finite() {
            return None;
        }
        iterations += 1;
        let gain = next_post.log_likelihood - post.log_likelihood;
        model = next;
        post = next_post;
        trace.push(post.log_likelihood);
        if gain.abs() < opts.tol {
            converged = true;
            break;
        }
    }
    Some((model, trace, iterations, converged))
}

/// Baum-Welch EM for the 2-state Gaussian HMM.
///
/// A non-finite likelihood triggers one retry from the starting model with
/// its variances raised to at least a hundredth of the sample variance;
/// a second failure is an estimation error.
pub fn baum_welch(returns: &[f64], init: &GaussianHmm, opts: &FitOptions) -> Result<HmmFitResult> {
    if returns.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_OBSERVATIONS,
            got: returns.len(),
        });
    }
    if returns.iter().any(|x| !x.is_finite()) {
        return Err(Error::Estimation(
            "returns contain non-finite values".into(),
        ));
    }
    let floor_sd = opts.variance_floor.sqrt();
    let mut start = *init;
    for s in start.sds.iter_mut() {
        *s = s.max(floor_sd);
    }

    let (model, trace, n_iterations, converged) = match run_em(returns, &start, opts) {
        Some(found) => found,
        None => {
            let (_, sample_sd) = mean_sd(returns.iter().copied());
            let retry_floor = (0.01 * sample_sd * sample_sd)
                .max(opts.variance_floor)
                .sqrt();
            let mut retry = start;
            for s in retry.sds.iter_mut() {
                *s = s.max(retry_floor);
            }
            run_em(returns, &retry, opts)
                .ok_or_else(|| Error::Estimation("likelihood became non-finite during EM".into()))?
        }
    };

    let model = model.ordered();
    let decoded_states = viterbi(returns, &model);
    let regime = annualize_daily(&model);
    Ok(HmmFitResult {
        regime,
        model,
        daily_means: model.means,
        daily_sds: model.sds,
        log_likelihood: *trace.last().expect("trace starts non-empty"),
        log_likelihood_trace: trace,
        n_iterations,
        converged,
        decoded_states,
    })
}

/// Heuristic initialisation followed by Baum-Welch.
pub fn fit(
    returns: &[f64],
    heuristic: &HeuristicConfig,
    opts: &FitOptions,
) -> Result<HmmFitResult> {
    if returns.len() < MIN_OBSERVATIONS {
        return Err(Error::InsufficientData {
            needed: MIN_OBSERVATIONS,
            got: returns.len(),
        });
    }
    let init = init_heuristic(returns, heuristic)?;
    baum_welch(returns, &init.model, opts)
}

/// Most likely state path, computed in log space.
pub fn viterbi(returns: &[f64], model: &GaussianHmm) -> Vec<Regime> {
    let n = returns.len();
    if n == 0 {
        return Vec::new();
    }
    let ln = |p: f64| if p > 0.0 { p.ln() } else { f64::NEG_INFINITY };
    let log_a = [
        [ln(model.transition[0][0]), ln(model.transition[0][1])],
        [ln(model.transition[1][0]), ln(model.transition[1][1])],
    ];
    let mut delta = [
        ln(model.initial[0]) + model.log_emission(0, returns[0]),
        ln(model.initial[1]) + model.log_emission(1, returns[0]),
    ];
    let mut back = vec![[0u8; 2]; n];
    for t in 1..n {
        let mut next = [0.0; 2];
        for j in 0..2 {
            let from0 = delta[0] + log_a[0][j];
            let from1 = delta[1] + log_a[1][j];
            let (best, arg) = if from1 > from0 {
                (from1, 1)
            } else {
                (from0, 0)
            };
            next[j] = best + model.log_emission(j, returns[t]);
            back[t][j] = arg;
        }
        delta = next;
    }
    let mut state = if delta[1] > delta[0] { 1 } else { 0 };
    let mut path = vec![Regime::Normal; n];
    for t in (0..n).rev() {
        path[t] = Regime::from_index(state);
        if t > 0 {
            state = back[t][state] as usize;
        }
    }
    path
}

/// Joint log-probability of observations and a given state path.
pub fn path_log_probability(model: &GaussianHmm, obs: &[f64], path: &[Regime]) -> f64 {
    let mut lp = model.initial[path[0].index()].ln() + model.log_emission(path[0].index(), obs[0]);
    for t in 1..obs.len() {
        let (i, j) = (path[t - 1].index(), path[t].index());
        lp += model.transition[i][j].ln() + model.log_emission(j, obs[t]);
    }
    lp
}

fn annualize_daily(model: &GaussianHmm) -> RegimeParams {
    let sqrt_year = TRADING_DAYS_PER_YEAR.sqrt();
    let sigma = |s: usize| sqrt_year * model.sds[s];
    let mu = |s: usize| TRADING_DAYS_PER_YEAR * model.means[s] + 0.5 * sigma(s) * sigma(s);
    RegimeParams {
        mu1: mu(0),
        mu2: mu(1),
        sigma1: sigma(0),
        sigma2: sigma(1),
        p: model.transition[0][1],
        q: model.transition[1][0],
    }
}

/// Annualised regime parameters of a fit: `sigma = sqrt(252) sd` and the
/// arithmetic drift `mu = 252 mean + sigma^2 / 2`. Transition probabilities
/// stay daily.
pub fn annualize(fit: &HmmFitResult) -> RegimeParams {
    annualize_daily(&fit.model)
}

pub fn stationary_distribution(regime: &RegimeParams) -> Result<(f64, f64)> {
    regime.stationary_distribution()
}

/// Maximal runs of the stressed state as inclusive index ranges.
pub fn crisis_spans(states: &[Regime]) -> Vec<(usize, usize)> {
    let mut spans = Vec::new();
    let mut start = None;
    for (i, s) in states.iter().enumerate() {
        match (s, start) {
            (Regime::Stressed, None) => start = Some(i),
            (Regime::Normal, Some(b)) => {
                spans.push((b, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(b) = start {
        spans.push((b, states.len() - 1));
    }
    spans
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn annualize_arithmetic() {
        let model = GaussianHmm::from_daily(0.02, 0.08, [0.0, 0.0], [0.02, 0.0]);
        let r = annualize_daily(&model);
        assert!((r.sigma1 - 0.02 * 252f64.sqrt()).abs() < 1e-12);
        assert!((r.sigma1 - 0.3175).abs() < 1e-4);
        assert_eq!((r.mu2, r.sigma2), (0.0, 0.0));
        assert_eq!((r.p, r.q), (0.02, 0.08));
    }

    #[test]
    fn stationary_examples() {
        let r = RegimeParams::single_regime(0.1, 0.3, 0.3);
        assert_eq!(stationary_distribution(&r).unwrap(), (0.5, 0.5));
        let r = RegimeParams::single_regime(0.1, 0.02, 0.08);
        let (a, b) = stationary_distribution(&r).unwrap();
        assert!((a - 0.8).abs() < 1e-15 && (b - 0.2).abs() < 1e-15);
    }

    #[test]
    fn spans() {
        use Regime::*;
        let s = [Normal, Stressed, Stressed, Normal, Stressed];
        assert_eq!(crisis_spans(&s), vec![(1, 2), (4, 4)]);
        assert!(crisis_spans(&[Normal, Normal]).is_empty());
    }

    #[test]
    fn viterbi_separated_emissions() {
        let model = GaussianHmm::from_daily(0.1, 0.1, [-1.0, 1.0], [0.01, 0.01]);
        let truth: Vec<Regime> = (0..40).map(|i| Regime::from_index((i / 7) % 2)).collect();
        let obs: Vec<f64> = truth
            .iter()
            .map(|s| if s.index() == 0 { -1.0 } else { 1.0 })
            .collect();
        assert_eq!(viterbi(&obs, &model), truth);
    }

    #[test]
    fn ordered_relabels() {
        let m = GaussianHmm::from_daily(0.1, 0.3, [0.0, 0.1], [0.02, 0.01]);
        let o = m.ordered();
        assert_eq!(o.sds, [0.01, 0.02]);
        assert_eq!(o.transition, [[0.7, 0.3], [0.1, 0.9]]);
    }

    #[test]
    fn too_short_series() {
        let init = GaussianHmm::from_daily(0.1, 0.1, [0.0, 0.0], [0.01, 0.02]);
        let err = baum_welch(&[0.0; 10], &init, &FitOptions::default()).unwrap_err();
        assert!(matches!(
            err,
            Error::InsufficientData {
                needed: 50,
                got: 10
            }
        ));
    }
}
