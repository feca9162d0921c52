//! Markov-switching Monte Carlo premiums from each starting regime, and the
//! weighted average across them.
//!
//! Run with `cargo run --release --example regime_switching_mc`.

use liqprem::regime_mc::{estimate_premium_ms, weighted_premium, InitialState, SimConfig};
use liqprem::{ContractTerms, Measure, RegimeParams};

fn main() -> liqprem::Result<()> {
    let regime = RegimeParams::hfrx_mean();
    let (pi_good, _) = regime.stationary_distribution()?;
    println!("stationary probability of the normal state: {pi_good:.4}");

    for measure in [Measure::RiskNeutral, Measure::Empirical] {
        println!("\n{} measure", measure.as_str());
        for days in [1.0, 5.0, 20.0] {
            let terms = ContractTerms::default().with_theta_days(days);
            let run = |initial_state| {
                let cfg = SimConfig {
                    n_paths: 100_000,
                    seed: 42,
                    measure,
                    initial_state,
                    ..SimConfig::default()
                };
                estimate_premium_ms(&cfg, &regime, &terms, 0.01)
            };
            let good = run(InitialState::Normal)?;
            let bad = run(InitialState::Stressed)?;
            let avg = weighted_premium(&good, &bad, 0.8427)?;
            println!(
                "  theta={days:>4}d  good {:>8.3}  stressed {:>8.3}  weighted {:>8.3} bps (se {:.3})",
                good.bps(),
                bad.bps(),
                avg.bps(),
                avg.std_error_bps().unwrap_or(0.0)
            );
        }
    }
    Ok(())
}
