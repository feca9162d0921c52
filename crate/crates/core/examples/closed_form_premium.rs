//! Single-regime premium in closed form under both valuation measures.
//!
//! Run with `cargo run --example closed_form_premium`.

use liqprem::closed_form::{empirical_moments, premium_gbm_components};
use liqprem::synthetic::gaussian_returns;
use liqprem::{ContractTerms, GbmParams, Measure};

fn main() -> liqprem::Result<()> {
    let r = 0.01;

    println!("risk-neutral premium (bps)");
    println!(
        "{:>8} {:>10} {:>10} {:>10} {:>10}",
        "sigma", "1d", "5d", "10d", "20d"
    );
    for sigma in [0.05, 0.10, 0.15, 0.25] {
        let params = GbmParams::risk_neutral(r, sigma);
        let mut row = format!("{sigma:>8.2}");
        for days in [1.0, 5.0, 10.0, 20.0] {
            let terms = ContractTerms::default().with_theta_days(days);
            let p = premium_gbm_components(&terms, &params, Measure::RiskNeutral)?;
            row.push_str(&format!(" {:>10.3}", p.result.bps()));
        }
        println!("{row}");
    }

    // Empirical valuation: estimate drift and volatility from daily returns.
    let returns = gaussian_returns(0.0126 / 252.0, 0.0486 / 252f64.sqrt(), 252 * 15, 1);
    let m = empirical_moments(&returns)?;
    println!(
        "\nestimated mu_emp={:.4} sigma_emp={:.4} b={:.4}",
        m.mu_emp, m.sigma_emp, m.b_hat
    );
    let terms = ContractTerms::default().with_theta_days(20.0);
    let p = premium_gbm_components(
        &terms,
        &GbmParams::empirical(r, m.sigma_emp, m.b_hat),
        Measure::Empirical,
    )?;
    println!(
        "empirical premium at 20 days: V1={:.3e} V2={:.4} m_R={:.3}bps",
        p.v1,
        p.v2,
        p.result.bps()
    );
    Ok(())
}
