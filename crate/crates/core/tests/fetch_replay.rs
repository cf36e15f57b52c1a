mod common;

use std::sync::atomic::Ordering;
use std::time::Duration;

use candleforge::market_data::{
    repair_gaps, save_candles_csv, load_candles_csv, validate_series, FetchRange, Interval, KlineClient,
    MarketDataError, PAGE_SIZE,
};
use common::{fixture_series, spawn_replay};

#[test]
fn paged_fetch_reproduces_fixture() {
    let fixture = fixture_series();
    let server = spawn_replay(fixture.candles.clone(), 0);
    let first = fixture.candles[0].open_time;
    let last = fixture.candles.last().unwrap().open_time;
    let range = FetchRange::new(first, last + 3_600_000, Interval::Hour1).unwrap();

    let client = KlineClient::new(&server.base_url);
    let fetched = client.fetch_klines("BTCUSDT", &range).unwrap();
    assert_eq!(fetched.candles, fixture.candles);
    // 9595 candles in pages of 1000
    assert_eq!(server.requests.load(Ordering::SeqCst), fixture.len().div_ceil(PAGE_SIZE));
}

#[test]
fn fetch_then_repair_fills_dropped_hours() {
    let fixture = fixture_series();
    let server = spawn_replay(fixture.candles.clone(), 0);
    let first = fixture.candles[0].open_time;
    let range = FetchRange::new(first, first + 9600 * 3_600_000, Interval::Hour1).unwrap();
    let fetched = KlineClient::new(&server.base_url).fetch_klines("BTCUSDT", &range).unwrap();
    assert!(!validate_series(&fetched).is_ok());

    let repaired = repair_gaps(&fetched).unwrap();
    assert_eq!(repaired.inserted, 5);
    assert_eq!(repaired.series.len(), 9600);
    assert!(validate_series(&repaired.series).is_ok());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("candles.csv");
    save_candles_csv(&repaired.series, &path).unwrap();
    let back = load_candles_csv(&path, "BTCUSDT", Interval::Hour1).unwrap();
    assert_eq!(back, repaired.series);
}

#[test]
fn partial_window_keeps_half_open_range() {
    let fixture = fixture_series();
    let server = spawn_replay(fixture.candles.clone(), 0);
    let t0 = fixture.candles[100].open_time;
    let range = FetchRange::new(t0, t0 + 10 * 3_600_000, Interval::Hour1).unwrap();
    let fetched = KlineClient::new(&server.base_url).fetch_klines("BTCUSDT", &range).unwrap();
    assert_eq!(fetched.candles, fixture.candles[100..110]);
}

#[test]
fn transient_failures_are_retried() {
    let fixture = fixture_series();
    let server = spawn_replay(fixture.candles[..50].to_vec(), 2);
    let t0 = fixture.candles[0].open_time;
    let range = FetchRange::new(t0, t0 + 50 * 3_600_000, Interval::Hour1).unwrap();
    let client = KlineClient::new(&server.base_url).with_retry(3, Duration::from_millis(1));
    let fetched = client.fetch_klines("BTCUSDT", &range).unwrap();
    assert_eq!(fetched.len(), 50);
    assert_eq!(server.requests.load(Ordering::SeqCst), 3);
}

#[test]
fn retries_are_bounded() {
    let server = spawn_replay(Vec::new(), usize::MAX);
    let range = FetchRange::new(0, 3_600_000, Interval::Hour1).unwrap();
    let client = KlineClient::new(&server.base_url).with_retry(2, Duration::from_millis(1));
    match client.fetch_klines("BTCUSDT", &range) {
        Err(MarketDataError::Transport { attempts, .. }) => assert_eq!(attempts, 3),
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn rejected_symbol_is_not_retried() {
    let server = spawn_replay(Vec::new(), 0);
    let range = FetchRange::new(0, 3_600_000, Interval::Hour1).unwrap();
    let client = KlineClient::new(&server.base_url).with_retry(5, Duration::from_millis(1));
    match client.fetch_klines("NOPE", &range) {
        Err(MarketDataError::Config { status, .. }) => assert_eq!(status, 400),
        other => panic!("unexpected {other:?}"),
    }
    assert_eq!(server.requests.load(Ordering::SeqCst), 1);
}

#[test]
fn empty_full_interval_is_unavailable() {
    let server = spawn_replay(Vec::new(), 0);
    let range = FetchRange::new(0, 2 * 3_600_000, Interval::Hour1).unwrap();
    let err = KlineClient::new(&server.base_url).fetch_klines("BTCUSDT", &range).unwrap_err();
    assert!(matches!(err, MarketDataError::DataUnavailable { .. }), "{err:?}");
}
