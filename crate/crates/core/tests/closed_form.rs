mod common;

use common::{integrate, v1_oracle, v2_oracle};
use liqprem::closed_form::{
    discounted_hitting_factor_v2, empirical_moments, hitting_density, premium_gbm,
    premium_gbm_components, put_component_v1, HittingLaw,
};
use liqprem::synthetic::gaussian_returns;
use liqprem::{ContractTerms, GbmParams, Measure};
use proptest::prelude::*;

const SIGMAS: [f64; 4] = [0.05, 0.10, 0.15, 0.25];
const RATES: [f64; 3] = [0.0, 0.01, 0.05];
const BARRIERS: [f64; 3] = [0.8, 0.9, 0.99];
const HORIZONS: [f64; 3] = [0.5, 1.0, 2.0];

#[test]
fn v2_matches_quadrature_risk_neutral() {
    for &sigma in &SIGMAS {
        for &r in &RATES {
            for &k in &BARRIERS {
                for &t in &HORIZONS {
                    let closed = discounted_hitting_factor_v2(
                        t,
                        k,
                        1.0,
                        r,
                        sigma,
                        Measure::RiskNeutral,
                        None,
                    )
                    .unwrap();
                    let quad = v2_oracle(t, k, 1.0, r, sigma, r);
                    assert!(
                        (closed - quad).abs() <= 1e-8,
                        "sigma={sigma} r={r} K={k} T={t}: {closed} vs {quad}"
                    );
                }
            }
        }
    }
}

#[test]
fn v2_matches_quadrature_empirical() {
    for &b in &[-0.05, 0.0126, 0.08] {
        for &sigma in &SIGMAS {
            for &k in &BARRIERS {
                let closed = discounted_hitting_factor_v2(
                    1.0,
                    k,
                    1.0,
                    0.01,
                    sigma,
                    Measure::Empirical,
                    Some(b),
                )
                .unwrap();
                let quad = v2_oracle(1.0, k, 1.0, 0.01, sigma, b);
                assert!((closed - quad).abs() <= 1e-8, "b={b} sigma={sigma} K={k}");
            }
        }
    }
}

#[test]
fn v2_accepts_mildly_negative_rates() {
    let closed =
        discounted_hitting_factor_v2(1.0, 0.9, 1.0, -0.005, 0.15, Measure::RiskNeutral, None)
            .unwrap();
    let quad = v2_oracle(1.0, 0.9, 1.0, -0.005, 0.15, -0.005);
    assert!((closed - quad).abs() <= 1e-8);
}

#[test]
fn v1_matches_lognormal_quadrature() {
    for &days in &[1.0, 5.0, 10.0, 20.0] {
        for &sigma in &SIGMAS {
            for &r in &[0.0, 0.01] {
                let theta = days / 252.0;
                let closed =
                    put_component_v1(theta, 0.9, r, sigma, Measure::RiskNeutral, None).unwrap();
                let quad = v1_oracle(theta, 0.9, r, sigma, r);
                assert!((closed - quad).abs() <= 1e-9, "{days}d sigma={sigma} r={r}");
                let closed_p =
                    put_component_v1(theta, 0.9, r, sigma, Measure::Empirical, Some(0.03)).unwrap();
                let quad_p = v1_oracle(theta, 0.9, r, sigma, 0.03);
                assert!((closed_p - quad_p).abs() <= 1e-9);
            }
        }
    }
}

#[test]
fn density_integrates_to_first_passage_mass() {
    for &(a, mu, sigma) in &[
        (0.9f64.ln(), 0.0, 0.05),
        (0.9f64.ln(), -0.02, 0.10),
        (0.8f64.ln(), 0.03, 0.10),
        (0.99f64.ln(), 0.05, 0.25),
    ] {
        let law = HittingLaw { a, mu, sigma };
        // Integrate in log time so the t^{-3/2} tail is captured.
        let mass = integrate(
            |x| {
                let t = x.exp();
                hitting_density(t, &law).unwrap() * t
            },
            (1e-12f64).ln(),
            (1e18f64).ln(),
            1e-9,
        );
        let expected = (2.0 * mu * a / (sigma * sigma)).exp().min(1.0);
        assert!(
            (mass - expected).abs() <= 1e-6,
            "a={a} mu={mu}: {mass} vs {expected}"
        );
        assert!((law.total_mass() - expected).abs() < 1e-15);
    }
}

#[test]
fn density_matches_cdf_finite_difference() {
    let (a, mu, sigma) = (0.9f64.ln(), 0.0, 0.05);
    // First-passage CDF of drifted Brownian motion to a lower level.
    let cdf = |t: f64| {
        let s = sigma * t.sqrt();
        common_normal_cdf((a - mu * t) / s)
            + (2.0 * mu * a / (sigma * sigma)).exp() * common_normal_cdf((a + mu * t) / s)
    };
    let h = 1e-5;
    let fd = (cdf(0.5 + h) - cdf(0.5 - h)) / (2.0 * h);
    let f = hitting_density(0.5, &HittingLaw { a, mu, sigma }).unwrap();
    assert!((f - fd).abs() < 1e-6, "{f} vs {fd}");
}

fn common_normal_cdf(x: f64) -> f64 {
    0.5 + 0.5 * integrate(common::std_normal_pdf, 0.0, x.abs(), 1e-15) * 2.0 * x.signum()
}

#[test]
fn density_rejects_non_positive_time() {
    let law = HittingLaw::new(0.9, 1.0, 0.01, 0.2);
    assert!(hitting_density(0.0, &law).is_err());
    assert!(hitting_density(-1.0, &law).is_err());
}

#[test]
fn premium_bound_at_high_volatility() {
    let terms = ContractTerms::default();
    let m = premium_gbm(
        &terms,
        &GbmParams::risk_neutral(0.01, 0.25),
        Measure::RiskNeutral,
    )
    .unwrap();
    assert!(m.m_r < 0.004, "{}", m.bps());
}

#[test]
fn empirical_premium_near_seven_tenths_bp() {
    let sigma: f64 = 0.0486;
    let b = 0.0126 + 0.5 * sigma * sigma;
    let terms = ContractTerms::default().with_theta_days(20.0);
    let m = premium_gbm(
        &terms,
        &GbmParams::empirical(0.01, sigma, b),
        Measure::Empirical,
    )
    .unwrap();
    assert!((m.bps() - 0.7).abs() <= 0.2, "{}", m.bps());
}

#[test]
fn empirical_moments_recover_sampling_truth() {
    let (m, s) = (0.0004, 0.01);
    let n = 1_000_000;
    let xs = gaussian_returns(m, s, n, 99);
    let est = empirical_moments(&xs).unwrap();
    let se_mu = 252.0 * s / (n as f64).sqrt();
    assert!((est.mu_emp - 252.0 * m).abs() < 3.0 * se_mu);
    let sigma = 252f64.sqrt() * s;
    let se_sigma = sigma / (2.0 * n as f64).sqrt();
    assert!((est.sigma_emp - sigma).abs() < 3.0 * se_sigma);
    assert!((est.b_hat - est.mu_emp - 0.5 * est.sigma_emp.powi(2)).abs() < 1e-15);
}

#[test]
fn empirical_moments_need_two_points() {
    assert!(empirical_moments(&[0.01]).is_err());
}

proptest! {
    #[test]
    fn premium_factorizes(sigma in 0.01f64..0.6, days in 0.0f64..40.0, r in 0.0f64..0.08, c in 0.01f64..0.5) {
        let terms = ContractTerms::default().with_theta_days(days).with_deposit(c);
        let p = premium_gbm_components(&terms, &GbmParams::risk_neutral(r, sigma), Measure::RiskNeutral).unwrap();
        prop_assert_eq!(p.result.m_r, p.v1 * p.v2);
        let k = terms.barrier();
        prop_assert!(p.v1 >= 0.0 && p.v1 <= k * (-r * days / 252.0).exp() + 1e-15);
        prop_assert!((0.0..=1.0).contains(&p.v2));
        prop_assert!(p.result.m_r <= k);
    }

    // The at-the-money put loses value with tenor once r sqrt(theta) / sigma
    // is of order one, so the window is kept to desk-relevant rates and tenors.
    #[test]
    fn premium_monotone_in_theta(sigma in 0.02f64..0.6, d1 in 0.0f64..40.0, dd in 0.0f64..20.0, r in 0.0f64..0.02) {
        let price = |d: f64| premium_gbm(
            &ContractTerms::default().with_theta_days(d),
            &GbmParams::risk_neutral(r, sigma),
            Measure::RiskNeutral,
        ).unwrap().m_r;
        prop_assert!(price(d1 + dd) >= price(d1) - 1e-15);
    }

    #[test]
    fn premium_monotone_in_sigma(s1 in 0.01f64..0.5, ds in 0.0f64..0.2, days in 0.5f64..40.0, r in 0.0f64..0.05) {
        let price = |s: f64| premium_gbm(
            &ContractTerms::default().with_theta_days(days),
            &GbmParams::risk_neutral(r, s),
            Measure::RiskNeutral,
        ).unwrap().m_r;
        prop_assert!(price(s1 + ds) >= price(s1) - 1e-15);
    }
}
