//! Roll annual contracts over a synthetic index with one engineered crash and
//! print the per-period settlement.
//!
//! Run with `cargo run --release --example backtest_synthetic`.

use chrono::NaiveDate;
use liqprem::backtest::{run_backtest, BacktestConfig, Pricer};
use liqprem::returns_io::RateSeries;
use liqprem::synthetic::{dated_series, gaussian_returns};

fn main() -> liqprem::Result<()> {
    let start = NaiveDate::from_ymd_opt(2000, 1, 3).unwrap();
    let mut returns = gaussian_returns(0.0003, 0.004, 2600, 7);
    // A 20% drop around mid-2007 followed by a week of losses.
    returns[1950] = 0.8f64.ln();
    for r in &mut returns[1951..1956] {
        *r = -0.01;
    }
    let series = dated_series("synthetic", start, returns);
    let rates = RateSeries::constant(start, 0.01);

    for pricer in [Pricer::GbmClosedForm, Pricer::MarkovSwitchingMc] {
        let mut cfg = BacktestConfig {
            pricer,
            theta_days: 5.0,
            ..BacktestConfig::default()
        };
        cfg.sim.n_paths = 20_000;
        cfg.sim.seed = 1;
        let ledger = run_backtest(&cfg, &series, &rates)?;
        println!("\npricer {pricer:?}");
        println!(
            "{:>3} {:>10} {:>9} {:>9} {:>9} {:>9} {:>9}",
            "i", "start", "prem bps", "fund", "investor", "manager", "reins"
        );
        for p in &ledger.periods {
            println!(
                "{:>3} {:>10} {:>9.3} {:>9.4} {:>9.4} {:>9.4} {:>9.4}{}",
                p.index,
                p.start_date,
                p.premium * 1e4,
                p.fund_end,
                p.investor_end,
                p.manager_end,
                p.reinsurer_end,
                p.breach_date
                    .map(|d| format!("  breach {d}"))
                    .unwrap_or_default()
            );
        }
        let s = &ledger.summary;
        println!(
            "final investor {:.4} manager {:.4} reinsurer {:.4}",
            s.final_investor, s.final_manager, s.final_reinsurer
        );
    }
    Ok(())
}
