use std::thread;
use std::time::Duration;

use serde_json::Value;

use super::{Candle, CandleSeries, FetchRange, MarketDataError, Result};

pub const DEFAULT_BASE_URL: &str = "https://api.binance.com";
/// Fixed page size; pages are requested one after another.
pub const PAGE_SIZE: usize = 1000;
const KLINES_PATH: &str = "/api/v3/klines";

/// Optional API credentials, taken from the environment and never written anywhere.
#[derive(Clone, Default)]
pub struct ApiCredentials {
    pub key: Option<String>,
    pub secret: Option<String>,
}

impl ApiCredentials {
    pub fn from_env() -> Self {
        ApiCredentials {
            key: std::env::var("CANDLEFORGE_API_KEY").ok().filter(|s| !s.is_empty()),
            secret: std::env::var("CANDLEFORGE_API_SECRET")
                .ok()
                .filter(|s| !s.is_empty()),
        }
    }
}

impl std::fmt::Debug for ApiCredentials {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ApiCredentials")
            .field("key", &self.key.as_ref().map(|_| "<redacted>"))
            .field("secret", &self.secret.as_ref().map(|_| "<redacted>"))
            .finish()
    }
}

/// Blocking klines client. One client fetches sequentially; use separate
/// instances for concurrent fetches.
#[derive(Debug)]
pub struct KlineClient {
    agent: ureq::Agent,
    base_url: String,
    credentials: ApiCredentials,
    max_retries: u32,
    backoff: Duration,
}

enum Attempt {
    Retry(String),
    Fatal(MarketDataError),
}

impl KlineClient {
    pub fn new(base_url: impl Into<String>) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs(30)))
            .http_status_as_error(false)
            .build()
            .into();
        KlineClient {
            agent,
            base_url: base_url.into().trim_end_matches('/').to_string(),
            credentials: ApiCredentials::default(),
            max_retries: 4,
            backoff: Duration::from_millis(500),
        }
    }

    /// Client configured from `CANDLEFORGE_BASE_URL` and the credential variables.
    pub fn from_env() -> Self {
        let base = std::env::var("CANDLEFORGE_BASE_URL")
            .ok()
            .filter(|s| !s.is_empty())
            .unwrap_or_else(|| DEFAULT_BASE_URL.to_string());
        KlineClient::new(base).with_credentials(ApiCredentials::from_env())
    }

    pub fn with_credentials(mut self, credentials: ApiCredentials) -> Self {
        self.credentials = credentials;
        self
    }

    /// Retry policy for transport failures: `max_retries` extra attempts,
    /// sleeping `backoff`, `2·backoff`, `4·backoff`, ... in between.
    pub fn with_retry(mut self, max_retries: u32, backoff: Duration) -> Self {
        self.max_retries = max_retries;
        self.backoff = backoff;
        self
    }

    pub fn base_url(&self) -> &str {
        &self.base_url
    }

    /// Fetch every candle whose open time lies in `[range.start, range.end)`.
    ///
    /// The result is ascending and duplicate-free but may contain gaps.
    pub fn fetch_klines(&self, symbol: &str, range: &FetchRange) -> Result<CandleSeries> {
        let mut candles: Vec<Candle> = Vec::new();
        let mut cursor = range.start;
        while cursor < range.end {
            let page = self.fetch_page(symbol, range, cursor)?;
            let page_len = page.len();
            let last_seen = candles.last().map(|c| c.open_time);
            candles.extend(page.into_iter().filter(|c| {
                c.open_time >= cursor
                    && c.open_time < range.end
                    && last_seen.is_none_or(|t| c.open_time > t)
            }));
            match candles.last() {
                Some(last) if page_len == PAGE_SIZE && last.open_time >= cursor => {
                    cursor = last.open_time + 1
                }
                _ => break,
            }
        }

        if candles.is_empty() {
            if range.end - range.start >= range.interval.millis() {
                return Err(MarketDataError::DataUnavailable {
                    symbol: symbol.to_string(),
                    start: range.start,
                    end: range.end,
                });
            }
        } else if candles[0].open_time - range.start >= range.interval.millis() {
            log::info!(
                "{symbol}: first candle at {} is after requested start {}; range narrowed",
                candles[0].open_time,
                range.start
            );
        }
        Ok(CandleSeries::new(symbol, range.interval, candles))
    }

    fn fetch_page(&self, symbol: &str, range: &FetchRange, start: i64) -> Result<Vec<Candle>> {
        let mut attempt = 0u32;
        loop {
            attempt += 1;
            match self.request_page(symbol, range, start) {
                Ok(body) => return parse_klines(&body),
                Err(Attempt::Fatal(e)) => return Err(e),
                Err(Attempt::Retry(message)) => {
                    if attempt > self.max_retries {
                        return Err(MarketDataError::Transport {
                            attempts: attempt,
                            message,
                        });
                    }
                    let delay = self.backoff * 2u32.saturating_pow(attempt - 1);
                    log::warn!("klines request failed ({message}); retrying in {delay:?}");
                    thread::sleep(delay);
                }
            }
        }
    }

    fn request_page(&self, symbol: &str, range: &FetchRange, start: i64) -> std::result::Result<String, Attempt> {
        let url = format!("{}{}", self.base_url, KLINES_PATH);
        let mut request = self
            .agent
            .get(&url)
            .query("symbol", symbol)
            .query("interval", range.interval.as_str())
            .query("startTime", start.to_string())
            // the exchange treats endTime as inclusive
            .query("endTime", (range.end - 1).to_string())
            .query("limit", PAGE_SIZE.to_string());
        if let Some(key) = &self.credentials.key {
            request = request.header("X-MBX-APIKEY", key);
        }
        let mut response = request.call().map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = response.status().as_u16();
        let body = response
            .body_mut()
            .read_to_string()
            .map_err(|e| Attempt::Retry(e.to_string()))?;
        match status {
            200..=299 => Ok(body),
            429 | 418 | 500..=599 => Err(Attempt::Retry(format!("HTTP {status}"))),
            _ => Err(Attempt::Fatal(MarketDataError::Config {
                status,
                message: body.chars().take(200).collect(),
            })),
        }
    }
}

/// Parse an exchange klines payload (array of arrays). Only the first six
/// columns are used: open time, open, high, low, close, volume.
pub(crate) fn parse_klines(body: &str) -> Result<Vec<Candle>> {
    let rows: Vec<Vec<Value>> =
        serde_json::from_str(body).map_err(|e| MarketDataError::Response(e.to_string()))?;
    rows.iter()
        .enumerate()
        .map(|(i, row)| {
            if row.len() < 6 {
                return Err(MarketDataError::Response(format!(
                    "row {i} has {} columns, expected at least 6",
                    row.len()
                )));
            }
            let open_time = row[0]
                .as_i64()
                .ok_or_else(|| MarketDataError::Response(format!("row {i}: bad open time")))?;
            let num = |col: usize| -> Result<f64> {
                let v = match &row[col] {
                    Value::String(s) => s.parse::<f64>().ok(),
                    Value::Number(n) => n.as_f64(),
                    _ => None,
                };
                v.ok_or_else(|| MarketDataError::Response(format!("row {i}: bad value in column {col}")))
            };
            Ok(Candle {
                open_time,
                open: num(1)?,
                high: num(2)?,
                low: num(3)?,
                close: num(4)?,
                volume: num(5)?,
            })
        })
        .collect()
}
