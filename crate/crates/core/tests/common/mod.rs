#![allow(dead_code)]

use std::io::{BufRead, BufReader, Write};
use std::net::TcpListener;
use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use candleforge::features::{FeatureConfig, PreparedFeatures};
use candleforge::market_data::{load_candles_csv, repair_gaps, Candle, CandleSeries, Interval};

pub fn fixture_path() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/btcusdt_1h_synthetic_400d.csv")
}

pub fn fixture_series() -> CandleSeries {
    load_candles_csv(&fixture_path(), "BTCUSDT", Interval::Hour1).expect("fixture loads")
}

pub fn fixture_features() -> PreparedFeatures {
    let repaired = repair_gaps(&fixture_series()).expect("repair").series;
    PreparedFeatures::from_series(&repaired, &FeatureConfig::default()).expect("features")
}

/// Local stand-in for the exchange klines endpoint. Serves `candles` in the
/// exchange's 12-column layout, honouring `startTime`, inclusive `endTime`
/// and `limit`. The first `fail_first` requests get HTTP 503.
pub struct ReplayServer {
    pub base_url: String,
    pub requests: Arc<AtomicUsize>,
}

pub fn spawn_replay(candles: Vec<Candle>, fail_first: usize) -> ReplayServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let base_url = format!("http://{}", listener.local_addr().unwrap());
    let requests = Arc::new(AtomicUsize::new(0));
    let counter = requests.clone();
    std::thread::spawn(move || {
        for stream in listener.incoming() {
            let Ok(mut stream) = stream else { continue };
            let mut reader = BufReader::new(stream.try_clone().unwrap());
            let mut request_line = String::new();
            if reader.read_line(&mut request_line).is_err() {
                continue;
            }
            loop {
                let mut header = String::new();
                match reader.read_line(&mut header) {
                    Ok(0) => break,
                    Ok(_) if header == "\r\n" || header == "\n" => break,
                    Ok(_) => {}
                    Err(_) => break,
                }
            }
            let n = counter.fetch_add(1, Ordering::SeqCst);
            let (status, body) = if n < fail_first {
                ("503 Service Unavailable", "{\"msg\":\"busy\"}".to_string())
            } else {
                respond(&candles, &request_line)
            };
            let _ = write!(
                stream,
                "HTTP/1.1 {status}\r\nContent-Type: application/json\r\nContent-Length: {}\r\nConnection: close\r\n\r\n{body}",
                body.len()
            );
        }
    });
    ReplayServer { base_url, requests }
}

fn respond(candles: &[Candle], request_line: &str) -> (&'static str, String) {
    let target = request_line.split_whitespace().nth(1).unwrap_or("");
    let Some((path, query)) = target.split_once('?') else {
        return ("400 Bad Request", "{\"msg\":\"no query\"}".into());
    };
    if path != "/api/v3/klines" {
        return ("404 Not Found", "{}".into());
    }
    let param = |key: &str| {
        query
            .split('&')
            .filter_map(|kv| kv.split_once('='))
            .find(|(k, _)| *k == key)
            .map(|(_, v)| v.to_string())
    };
    if param("symbol").as_deref() != Some("BTCUSDT") {
        return ("400 Bad Request", "{\"code\":-1121,\"msg\":\"Invalid symbol.\"}".into());
    }
    let start: i64 = param("startTime").and_then(|v| v.parse().ok()).unwrap_or(i64::MIN);
    let end: i64 = param("endTime").and_then(|v| v.parse().ok()).unwrap_or(i64::MAX);
    let limit: usize = param("limit").and_then(|v| v.parse().ok()).unwrap_or(500);
    let rows: Vec<String> = candles
        .iter()
        .filter(|c| c.open_time >= start && c.open_time <= end)
        .take(limit)
        .map(|c| {
            format!(
                "[{},\"{}\",\"{}\",\"{}\",\"{}\",\"{}\",{},\"0\",1,\"0\",\"0\",\"0\"]",
                c.open_time,
                c.open,
                c.high,
                c.low,
                c.close,
                c.volume,
                c.open_time + 3_599_999
            )
        })
        .collect();
    ("200 OK", format!("[{}]", rows.join(",")))
}
