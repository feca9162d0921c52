#![allow(dead_code)]

use std::f64::consts::PI;
use std::path::Path;

use chrono::NaiveDate;
use liqprem::backtest::BacktestLedger;
use liqprem::hmm::GaussianHmm;
use liqprem::returns_io::ReturnSeries;
use liqprem::synthetic::{dated_series, hmm_returns, weekdays};
use liqprem::ContractTerms;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

// 7-point Gauss / 15-point Kronrod pair on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for (j, &x) in XGK[..7].iter().enumerate() {
        let s = f(c - h * x) + f(c + h * x);
        kron += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kron * h, ((kron - gauss) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (k, err) = gk15(f, a, b);
    if err <= tol || depth >= 60 {
        return k;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth + 1) + adapt(f, m, b, 0.5 * tol, depth + 1)
}

/// Adaptive Gauss-Kronrod quadrature with absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    adapt(&f, a, b, tol, 0)
}

pub fn std_normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * PI).sqrt()
}

/// First-passage density of `mu t + sigma W_t` to level `a < 0`.
pub fn ig_density(t: f64, a: f64, mu: f64, sigma: f64) -> f64 {
    let d = a - mu * t;
    a.abs() / (sigma * (2.0 * PI * t * t * t).sqrt()) * (-(d * d) / (2.0 * sigma * sigma * t)).exp()
}

/// Integral of the discounted first-passage density over `[1e-12, T]`.
pub fn v2_oracle(horizon: f64, barrier: f64, x0: f64, r: f64, sigma: f64, drift: f64) -> f64 {
    let a = (barrier / x0).ln();
    let mu = drift - 0.5 * sigma * sigma;
    integrate(
        |t| (-r * t).exp() * ig_density(t, a, mu, sigma),
        1e-12,
        horizon,
        1e-10,
    )
}

/// At-the-money put on a lognormal asset started at the barrier, priced by
/// integrating the payoff against the normal density.
pub fn v1_oracle(theta: f64, barrier: f64, r: f64, sigma: f64, drift: f64) -> f64 {
    if theta == 0.0 {
        return 0.0;
    }
    let m = (drift - 0.5 * sigma * sigma) * theta;
    let s = sigma * theta.sqrt();
    // Payoff is positive for z below the at-the-money point.
    let z_star = -m / s;
    let payoff = |z: f64| barrier * (1.0 - (m + s * z).exp()).max(0.0) * std_normal_pdf(z);
    (-r * theta).exp() * integrate(payoff, -40.0, z_star, 1e-14)
}

/// Plain daily-monitored Monte Carlo of the discounted shortfall under
/// geometric Brownian motion with drift `r`. Returns (mean, standard error).
pub fn gbm_mc_oracle(terms: &ContractTerms, sigma: f64, r: f64, n: usize, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let dt = 1.0 / 252.0;
    let steps = (terms.horizon_years * 252.0).round() as usize;
    let theta = terms.theta_days.round() as usize;
    assert!(
        (terms.theta_days - theta as f64).abs() < 1e-12,
        "integer windows only"
    );
    let k = terms.barrier() / terms.x0;
    let drift = (r - 0.5 * sigma * sigma) * dt;
    let vol = sigma * dt.sqrt();
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..n {
        let mut x = 1.0f64;
        let mut value = 0.0;
        for i in 1..=steps {
            let z: f64 = rng.sample(StandardNormal);
            x *= (drift + vol * z).exp();
            if x <= k {
                for _ in 0..theta {
                    let z: f64 = rng.sample(StandardNormal);
                    x *= (drift + vol * z).exp();
                }
                let t = (i + theta) as f64 * dt;
                value = (-r * t).exp() * (k - x).max(0.0);
                break;
            }
        }
        sum += value;
        sum_sq += value * value;
    }
    let nf = n as f64;
    let mean = sum / nf;
    let var = (sum_sq / nf - mean * mean) * nf / (nf - 1.0);
    (mean, (var / nf).sqrt())
}

/// Two-state HMM behind the calibration fixture.
pub fn synthetic_truth() -> GaussianHmm {
    GaussianHmm::from_daily(0.02, 0.08, [0.001, -0.001], [0.003, 0.012])
}

pub const HMM_FIXTURE_SEED: u64 = 2;

pub fn hmm_fixture() -> (Vec<f64>, Vec<liqprem::Regime>) {
    hmm_returns(&synthetic_truth(), 4000, HMM_FIXTURE_SEED)
}

pub fn date(s: &str) -> NaiveDate {
    NaiveDate::parse_from_str(s, "%Y-%m-%d").unwrap()
}

/// Constant prices on weekdays from 2000-01-03 to 2006-03-31.
pub fn flat_series() -> ReturnSeries {
    let dates = weekdays(date("2000-01-03"), 2000)
        .into_iter()
        .filter(|d| *d <= date("2006-03-31"))
        .collect::<Vec<_>>();
    let n = dates.len();
    ReturnSeries::new("flat", dates, vec![0.0; n]).unwrap()
}

pub const CRASH_DATE: &str = "2002-08-15";
pub const CRASH_RETURN: f64 = -0.162_518_929_497_774_8; // ln 0.85
pub const POST_CRASH_RETURN: f64 = -0.01;
pub const POST_CRASH_DAYS: usize = 40;

/// Alternating +-0.4% daily moves, a one-day 15% drop on the crash date,
/// then forty days of -1% before the alternation resumes.
pub fn crash_series() -> ReturnSeries {
    let dates = weekdays(date("2000-01-03"), 1200);
    let crash = date(CRASH_DATE);
    let crash_idx = dates
        .iter()
        .position(|d| *d == crash)
        .expect("crash date is a weekday");
    let returns = (0..dates.len())
        .map(|i| {
            if i == crash_idx {
                CRASH_RETURN
            } else if i > crash_idx && i <= crash_idx + POST_CRASH_DAYS {
                POST_CRASH_RETURN
            } else if i % 2 == 0 {
                0.004
            } else {
                -0.004
            }
        })
        .collect();
    ReturnSeries::new("crash", dates, returns).unwrap()
}

/// Gaussian returns around a small positive drift, for invariant checks.
pub fn noisy_series(seed: u64, sd: f64, n: usize) -> ReturnSeries {
    let returns = liqprem::synthetic::gaussian_returns(0.0003, sd, n, seed);
    dated_series("noisy", date("2000-01-03"), returns)
}

pub fn write_levels(path: &Path, series: &ReturnSeries) {
    let mut w = std::fs::File::create(path).unwrap();
    let first = series.dates[0].pred_opt().unwrap();
    let mut levels = vec![100.0];
    levels.extend(series.levels(100.0));
    let mut dates = vec![first];
    dates.extend_from_slice(&series.dates);
    liqprem::returns_io::write_series(&mut w, &dates, &levels).unwrap();
}

/// Checks the per-period ledger invariants and returns a description of
/// the first violation.
pub fn check_ledger_invariants(ledger: &BacktestLedger, c_m: f64, m_m: f64) -> Result<(), String> {
    let n = ledger.periods.len();
    for (i, p) in ledger.periods.iter().enumerate() {
        if p.breached && i + 1 != n {
            return Err(format!("period {i} breached but the run continued"));
        }
        let t = match p.tau_years {
            Some(tau) => tau + ledger.summary.theta_days / 252.0,
            None => 1.0,
        };
        let growth = (p.rate * t).exp();
        let floor = (1.0 - m_m - p.premium * growth) * p.investor_initial;
        if p.investor_end < floor - 1e-12 {
            return Err(format!(
                "period {i}: investor {} below floor {floor}",
                p.investor_end
            ));
        }
        for d in ledger.days.iter().filter(|d| d.period == i) {
            let k = ledger
                .days
                .iter()
                .filter(|e| e.period == i && e.date <= d.date)
                .count() as f64;
            let day_floor =
                (1.0 - m_m - p.premium * (p.rate * k / 252.0).exp()) * p.investor_initial;
            if d.investor < day_floor.min(floor) - 1e-12 {
                return Err(format!(
                    "period {i}: mark {} on {} below floor",
                    d.investor, d.date
                ));
            }
        }
        if p.manager_cover > c_m * p.investor_initial + 1e-12 {
            return Err(format!(
                "period {i}: manager cover {} exceeds cap",
                p.manager_cover
            ));
        }
        let manager_floor =
            growth * p.manager_initial + m_m * p.investor_initial + p.performance_fee
                - c_m * p.investor_initial;
        if p.manager_end < manager_floor - 1e-12 {
            return Err(format!("period {i}: manager lost more than the deposit"));
        }
        let total = p.investor_end + p.manager_end + p.reinsurer_end;
        let expected = p.fund_end + growth * (p.manager_initial + p.reinsurer_initial);
        if (total - expected).abs() > 1e-12 {
            return Err(format!(
                "period {i}: conservation off by {:e}",
                total - expected
            ));
        }
    }
    Ok(())
}

/// One line per acceptance criterion.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "criterion {criterion}: {} {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
}
