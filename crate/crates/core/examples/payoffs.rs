//! Terminal payoffs of investor, manager and reinsurer across fund outcomes.
//!
//! Run with `cargo run --example payoffs`.

use liqprem::{party_payoffs, ContractTerms};

fn main() -> liqprem::Result<()> {
    let terms = ContractTerms::default().with_fees(0.5, 0.01);
    let (m_r, r, t) = (0.0004, 0.01, 1.0);
    println!(
        "c_m={} alpha_m={} m_m={} m_R={m_r} barrier={}",
        terms.c_m,
        terms.alpha_m,
        terms.m_m,
        terms.barrier()
    );
    println!(
        "{:>6} {:>10} {:>10} {:>10} {:>10}",
        "X_T", "investor", "manager", "reinsurer", "total"
    );
    for x in [0.6, 0.8, 0.9, 0.95, 1.0, 1.01, 1.1, 1.3] {
        let v = party_payoffs(&terms, x, m_r, r, t)?;
        println!(
            "{x:>6.2} {:>10.4} {:>10.4} {:>10.4} {:>10.4}",
            v.investor,
            v.manager,
            v.reinsurer,
            v.total()
        );
    }
    Ok(())
}
