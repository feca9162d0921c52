//! Calibrate a two-state Gaussian HMM on simulated daily returns and compare
//! the estimates with the generating parameters.
//!
//! Run with `cargo run --release --example hmm_calibration`.

use liqprem::hmm::{annualize, crisis_spans, fit, FitOptions, GaussianHmm, HeuristicConfig};
use liqprem::synthetic::hmm_returns;

fn main() -> liqprem::Result<()> {
    let truth = GaussianHmm::from_daily(0.02, 0.08, [0.001, -0.001], [0.003, 0.012]);
    let (returns, states) = hmm_returns(&truth, 4000, 2);

    let res = fit(
        &returns,
        &HeuristicConfig::default(),
        &FitOptions::default(),
    )?;
    println!(
        "converged={} after {} iterations, log-likelihood {:.2}",
        res.converged, res.n_iterations, res.log_likelihood
    );
    println!(
        "daily sds  ({:.5}, {:.5})  truth (0.00300, 0.01200)",
        res.daily_sds[0], res.daily_sds[1]
    );
    println!(
        "switching  p={:.4} q={:.4}    truth p=0.0200 q=0.0800",
        res.regime.p, res.regime.q
    );

    let annual = annualize(&res);
    println!(
        "annualized mu=({:.4}, {:.4}) sigma=({:.4}, {:.4})",
        annual.mu1, annual.mu2, annual.sigma1, annual.sigma2
    );

    let hits = res
        .decoded_states
        .iter()
        .zip(&states)
        .filter(|(a, b)| a == b)
        .count();
    println!(
        "viterbi accuracy {:.1}%",
        100.0 * hits as f64 / states.len() as f64
    );
    let spans = crisis_spans(&res.decoded_states);
    println!("{} stressed spans; longest:", spans.len());
    let mut by_len = spans.clone();
    by_len.sort_by_key(|(a, b)| std::cmp::Reverse(b - a));
    for (a, b) in by_len.iter().take(3) {
        println!("  days {a}..={b}");
    }
    Ok(())
}
