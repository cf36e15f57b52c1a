use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::{Candle, CandleSeries, Interval, MarketDataError, Result};

const HEADER: [&str; 6] = ["open_time", "open", "high", "low", "close", "volume"];

/// Write `series` as `open_time,open,high,low,close,volume` with LF endings.
///
/// Floats use Rust's shortest round-trip formatting, so loading the file
/// back reproduces every value bit for bit.
pub fn write_candles_csv<W: Write>(series: &CandleSeries, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(writer);
    let map_err = |e: csv::Error| MarketDataError::Io(std::io::Error::other(e));
    w.write_record(HEADER).map_err(map_err)?;
    for c in &series.candles {
        w.write_record([
            c.open_time.to_string(),
            c.open.to_string(),
            c.high.to_string(),
            c.low.to_string(),
            c.close.to_string(),
            c.volume.to_string(),
        ])
        .map_err(map_err)?;
    }
    w.flush()?;
    Ok(())
}

pub fn save_candles_csv(series: &CandleSeries, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_candles_csv(series, BufWriter::new(File::create(path)?))
}

/// Load a candle CSV. The file carries no symbol or interval, so the caller supplies them.
pub fn load_candles_csv(path: &Path, symbol: &str, interval: Interval) -> Result<CandleSeries> {
    let display = path.display().to_string();
    let parse_err = |line: u64, message: String| MarketDataError::Parse {
        path: display.clone(),
        line,
        message,
    };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => MarketDataError::Io(io),
            other => parse_err(1, format!("{other:?}")),
        })?;

    let header = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != HEADER {
        return Err(parse_err(
            1,
            format!("expected header `{}`, found `{}`", HEADER.join(","), header.iter().collect::<Vec<_>>().join(",")),
        ));
    }

    let mut candles = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != HEADER.len() {
            return Err(parse_err(
                line,
                format!("expected {} columns, found {}", HEADER.len(), record.len()),
            ));
        }
        let open_time: i64 = record[0]
            .parse()
            .map_err(|_| parse_err(line, format!("bad open_time `{}`", &record[0])))?;
        let mut values = [0.0f64; 5];
        for (k, v) in values.iter_mut().enumerate() {
            *v = record[k + 1].parse().map_err(|_| {
                parse_err(line, format!("bad {} `{}`", HEADER[k + 1], &record[k + 1]))
            })?;
        }
        let [open, high, low, close, volume] = values;
        candles.push(Candle {
            open_time,
            open,
            high,
            low,
            close,
            volume,
        });
    }
    if candles.is_empty() {
        return Err(MarketDataError::EmptySeries);
    }
    Ok(CandleSeries::new(symbol, interval, candles))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn write(dir: &tempfile::TempDir, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.path().join(name);
        std::fs::write(&p, body).unwrap();
        p
    }

    #[test]
    fn header_only_is_empty_series() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "open_time,open,high,low,close,volume\n");
        assert!(matches!(
            load_candles_csv(&p, "X", Interval::Hour1),
            Err(MarketDataError::EmptySeries)
        ));
    }

    #[test]
    fn short_row_names_its_line() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "open_time,open,high,low,close,volume\n0,1,2,0.5,1.5,3\n3600000,1,2,0.5,1.5\n",
        );
        match load_candles_csv(&p, "X", Interval::Hour1) {
            Err(MarketDataError::Parse { line, message, .. }) => {
                assert_eq!(line, 3);
                assert!(message.contains("5"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn wrong_header_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(&dir, "a.csv", "time,o,h,l,c,v\n0,1,2,0.5,1.5,3\n");
        assert!(matches!(
            load_candles_csv(&p, "X", Interval::Hour1),
            Err(MarketDataError::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn bad_number_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(
            &dir,
            "a.csv",
            "open_time,open,high,low,close,volume\n0,1,2,abc,1.5,3\n",
        );
        assert!(matches!(
            load_candles_csv(&p, "X", Interval::Hour1),
            Err(MarketDataError::Parse { line: 2, .. })
        ));
    }

    proptest! {
        #[test]
        fn save_then_load_is_bit_exact(
            rows in prop::collection::vec((1e-9f64..1e9, 0.0f64..1e12), 1..40)
        ) {
            let candles: Vec<Candle> = rows
                .iter()
                .enumerate()
                .map(|(i, &(p, v))| Candle {
                    open_time: i as i64 * 3_600_000,
                    open: p,
                    high: p * 1.5,
                    low: p / 3.0,
                    close: p * 1.1,
                    volume: v,
                })
                .collect();
            let s = CandleSeries::new("BTCUSDT", Interval::Hour1, candles);
            let dir = tempfile::tempdir().unwrap();
            let p = dir.path().join("s.csv");
            save_candles_csv(&s, &p).unwrap();
            let back = load_candles_csv(&p, "BTCUSDT", Interval::Hour1).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
