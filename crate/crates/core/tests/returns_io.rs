mod common;

use common::date;
use liqprem::returns_io::{
    equal_weight_buy_and_hold, load_returns, parse_rates, parse_returns, rate_at, write_series,
    RateSeries, ReturnSeries, ValueFormat,
};
use liqprem::synthetic::weekdays;
use liqprem::Error;
use proptest::prelude::*;

#[test]
fn blank_value_names_its_row() {
    let csv = "date,value\n2020-01-01,100\n2020-01-02,\n2020-01-03,101\n";
    let err = parse_returns(csv.as_bytes(), ValueFormat::Levels, "x").unwrap_err();
    match err {
        Error::Parse { row, .. } => assert_eq!(row, 2),
        other => panic!("unexpected {other:?}"),
    }
    assert!(err_string(csv).contains("row 2"));
}

fn err_string(csv: &str) -> String {
    parse_returns(csv.as_bytes(), ValueFormat::Levels, "x")
        .unwrap_err()
        .to_string()
}

#[test]
fn malformed_rows_are_rejected() {
    for bad in [
        "date,value\n2020-13-01,1\n",
        "date,value\n2020-01-02,1\n2020-01-01,1\n",
        "date,value\n2020-01-01,abc\n",
        "when,value\n2020-01-01,1\n",
    ] {
        assert!(matches!(
            parse_returns(bad.as_bytes(), ValueFormat::LogReturns, "x"),
            Err(Error::Parse { .. })
        ));
    }
}

#[test]
fn log_returns_pass_through() {
    let csv = "date,value\n2020-01-01,0.01\n2020-01-02,-0.02\n";
    let s = parse_returns(csv.as_bytes(), ValueFormat::LogReturns, "x").unwrap();
    assert_eq!(s.log_returns, vec![0.01, -0.02]);
}

#[test]
fn identical_series_give_the_same_portfolio() {
    let dates = weekdays(date("2020-01-01"), 5);
    let r = vec![0.01, -0.02, 0.005, 0.0, 0.03];
    let s = ReturnSeries::new("a", dates, r.clone()).unwrap();
    let p = equal_weight_buy_and_hold(&[s.clone(), s.clone(), s]).unwrap();
    for (a, b) in p.log_returns.iter().zip(&r) {
        assert!((a - b).abs() < 1e-15);
    }
}

#[test]
fn flat_and_doubling_average_to_one_and_a_half() {
    let dates = weekdays(date("2020-01-01"), 4);
    let flat = ReturnSeries::new("flat", dates.clone(), vec![0.0; 4]).unwrap();
    let up = ReturnSeries::new("up", dates, vec![2f64.ln() / 4.0; 4]).unwrap();
    let p = equal_weight_buy_and_hold(&[flat, up]).unwrap();
    let terminal = p.levels(1.0).last().copied().unwrap();
    assert!((terminal - 1.5).abs() < 1e-14);
}

#[test]
fn portfolio_dates_are_the_intersection() {
    let a = ReturnSeries::new("a", weekdays(date("2020-01-01"), 10), vec![0.001; 10]).unwrap();
    let b_dates: Vec<_> = weekdays(date("2020-01-01"), 10)
        .into_iter()
        .step_by(2)
        .collect();
    let b = ReturnSeries::new("b", b_dates.clone(), vec![0.002; 5]).unwrap();
    let p = equal_weight_buy_and_hold(&[a, b]).unwrap();
    assert_eq!(p.dates, b_dates);
}

#[test]
fn disjoint_series_fail_to_align() {
    let a = ReturnSeries::new("a", vec![date("2020-01-01")], vec![0.0]).unwrap();
    let b = ReturnSeries::new("b", vec![date("2020-01-02")], vec![0.0]).unwrap();
    assert!(matches!(
        equal_weight_buy_and_hold(&[a, b]),
        Err(Error::Alignment(_))
    ));
}

#[test]
fn rates_carry_forward() {
    let csv = "date,value\n2020-01-01,0.01\n2020-02-01,0.02\n";
    let rates: RateSeries = parse_rates(csv.as_bytes()).unwrap();
    assert_eq!(rate_at(&rates, date("2020-01-01")).unwrap(), 0.01);
    assert_eq!(rate_at(&rates, date("2020-01-15")).unwrap(), 0.01);
    assert_eq!(rate_at(&rates, date("2020-02-01")).unwrap(), 0.02);
    assert_eq!(rate_at(&rates, date("2030-01-01")).unwrap(), 0.02);
    assert!(matches!(
        rate_at(&rates, date("2019-12-31")),
        Err(Error::Lookup(_))
    ));
}

#[test]
fn file_round_trip_through_levels() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("idx.csv");
    let series = common::noisy_series(4, 0.01, 300);
    common::write_levels(&path, &series);
    let back = load_returns(&path, ValueFormat::Levels).unwrap();
    assert_eq!(back.source_id, "idx");
    assert_eq!(back.dates, series.dates);
    for (a, b) in back.log_returns.iter().zip(&series.log_returns) {
        assert!((a - b).abs() < 1e-12);
    }
}

proptest! {
    #[test]
    fn levels_round_trip(levels in prop::collection::vec(0.01f64..1e4, 2..200)) {
        let dates = weekdays(date("2001-01-01"), levels.len());
        let mut buf = Vec::new();
        write_series(&mut buf, &dates, &levels).unwrap();
        let s = parse_returns(buf.as_slice(), ValueFormat::Levels, "p").unwrap();
        let rebuilt = s.levels(levels[0]);
        for (a, b) in rebuilt.iter().zip(&levels[1..]) {
            prop_assert!(((a - b) / b).abs() < 1e-12);
        }
    }
}
