use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::grid::{GridOutput, GridReport};
use super::{EvalError, Result};
use crate::features::Split;
use crate::nn::ModelKind;

const BASELINE: &str = "baseline";
const PALETTE: [&str; 5] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#7f7f7f"];
/// Lookback used for the per-model loss and overlay charts when present.
const FIGURE_LOOKBACK: usize = 24;

/// One row of a rendered table: a model (or the baseline) on one split.
#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub model: String,
    pub split: Split,
    /// One entry per lookback column; `None` for empty cells.
    pub values: Vec<Option<f64>>,
}

fn io_csv(e: csv::Error) -> EvalError {
    EvalError::Io(std::io::Error::other(e))
}

fn write_table(path: &Path, lookbacks: &[usize], rows: &[TableRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)
        .map_err(io_csv)?;
    let mut header = vec!["model".to_string(), "split".to_string()];
    header.extend(lookbacks.iter().map(|l| format!("L{l}")));
    w.write_record(&header).map_err(io_csv)?;
    for row in rows {
        let mut rec = vec![row.model.clone(), row.split.to_string()];
        rec.extend(row.values.iter().map(|v| v.map_or_else(String::new, |x| x.to_string())));
        w.write_record(&rec).map_err(io_csv)?;
    }
    w.flush()?;
    Ok(())
}

/// Parse a table written by [`emit_report`] back into lookbacks and rows.
pub fn read_table(path: &Path) -> Result<(Vec<usize>, Vec<TableRow>)> {
    let bad = |m: String| EvalError::Format(format!("{}: {m}", path.display()));
    let mut r = csv::Reader::from_path(path).map_err(io_csv)?;
    let header = r.headers().map_err(io_csv)?.clone();
    if header.len() < 2 || &header[0] != "model" || &header[1] != "split" {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    let lookbacks = header
        .iter()
        .skip(2)
        .map(|h| h.strip_prefix('L').and_then(|n| n.parse().ok()).ok_or_else(|| bad(format!("bad column {h}"))))
        .collect::<Result<Vec<usize>>>()?;
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(io_csv)?;
        let split = Split::ALL
            .into_iter()
            .find(|s| s.as_str() == &rec[1])
            .ok_or_else(|| bad(format!("unknown split {}", &rec[1])))?;
        let values = rec
            .iter()
            .skip(2)
            .map(|v| {
                if v.is_empty() {
                    Ok(None)
                } else {
                    v.parse().map(Some).map_err(|_| bad(format!("bad number {v}")))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(TableRow {
            model: rec[0].to_string(),
            split,
            values,
        });
    }
    Ok((lookbacks, rows))
}

fn mae_rows(report: &GridReport) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for &kind in &report.kinds {
        for split in Split::ALL {
            let values = report
                .lookbacks
                .iter()
                .map(|&l| report.cell(kind, l).and_then(|c| c.eval.as_ref()).map(|e| e.get(split).mae))
                .collect();
            rows.push(TableRow {
                model: kind.to_string(),
                split,
                values,
            });
        }
    }
    // The baseline depends only on the lookback window, not on the model.
    for split in Split::ALL {
        let values = report
            .lookbacks
            .iter()
            .map(|&l| {
                report
                    .cells
                    .iter()
                    .filter(|c| c.lookback == l)
                    .find_map(|c| c.eval.as_ref())
                    .map(|e| e.get(split).baseline_mae)
            })
            .collect();
        rows.push(TableRow {
            model: BASELINE.into(),
            split,
            values,
        });
    }
    rows
}

fn accuracy_rows(report: &GridReport) -> Vec<TableRow> {
    let mut rows = Vec::new();
    for &kind in &report.kinds {
        for split in Split::ALL {
            let values = report
                .lookbacks
                .iter()
                .map(|&l| {
                    report
                        .cell(kind, l)
                        .and_then(|c| c.eval.as_ref())
                        .and_then(|e| e.get(split).threshold_accuracy)
                })
                .collect();
            rows.push(TableRow {
                model: kind.to_string(),
                split,
                values,
            });
        }
    }
    rows
}

/// Write the MAE and threshold-accuracy tables, `report.json` and the SVG
/// figures into `out_dir`. Returns the paths written.
pub fn emit_report(report: &GridReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let mut put = |name: String, content: Option<String>| -> Result<PathBuf> {
        let path = out_dir.join(name);
        if let Some(text) = content {
            std::fs::write(&path, text)?;
        }
        written.push(path.clone());
        Ok(path)
    };

    let p = put("table1_mae.csv".into(), None)?;
    write_table(&p, &report.lookbacks, &mae_rows(report))?;
    let p = put("table2_threshold_accuracy.csv".into(), None)?;
    write_table(&p, &report.lookbacks, &accuracy_rows(report))?;
    put("report.json".into(), Some(report.to_json()))?;

    let figure_lookback = if report.lookbacks.contains(&FIGURE_LOOKBACK) {
        FIGURE_LOOKBACK
    } else {
        report.lookbacks.first().copied().unwrap_or(FIGURE_LOOKBACK)
    };
    for &kind in &report.kinds {
        let cell = report.cell(kind, figure_lookback);
        let history = cell.map(|c| c.history.as_slice()).unwrap_or_default();
        let train: Vec<f64> = history.iter().map(|r| r.train_loss).collect();
        let val: Vec<f64> = history.iter().map(|r| r.val_loss).collect();
        put(
            format!("loss_{kind}.svg"),
            Some(line_chart(
                &format!("{kind} loss, L={figure_lookback}"),
                "epoch",
                "loss",
                &[("train", &train), ("validation", &val)],
                1.0,
            )),
        )?;
        let (pred, actual) = cell
            .map(|c| (c.test_predictions.clone(), c.test_labels.clone()))
            .unwrap_or_default();
        let pct = |v: &[f64]| v.iter().map(|x| 100.0 * x).collect::<Vec<_>>();
        put(
            format!("prediction_overlay_{kind}.svg"),
            Some(line_chart(
                &format!("{kind} test predictions vs. actual {}h returns, L={figure_lookback}", report.horizon),
                "test sequence",
                "return (%)",
                &[("actual", &pct(&actual)), ("predicted", &pct(&pred))],
                0.0,
            )),
        )?;
    }
    put("mae_bars.svg".into(), Some(mae_bars(report)))?;
    Ok(written)
}

/// Write `checkpoints/<kind>_L<lookback>.json` for every trained cell.
pub fn write_checkpoints(output: &GridOutput, out_dir: &Path) -> Result<Vec<PathBuf>> {
    let dir = out_dir.join("checkpoints");
    std::fs::create_dir_all(&dir)?;
    let mut paths = Vec::new();
    for (kind, lookback, ck) in &output.checkpoints {
        let path = dir.join(format!("{kind}_L{lookback}.json"));
        std::fs::write(&path, ck.to_json())?;
        paths.push(path);
    }
    Ok(paths)
}

// ---------------------------------------------------------------- svg

const W: f64 = 720.0;
const H: f64 = 360.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 130.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn svg_open(title: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title));
    s
}

fn axes(s: &mut String, x_label: &str, y_label: &str, y_min: f64, y_max: f64) {
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(s, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for k in 0..=4 {
        let v = y_min + (y_max - y_min) * k as f64 / 4.0;
        let y = y0 - (y0 - y1) * k as f64 / 4.0;
        let _ = writeln!(s, r##"<line x1="{x0}" y1="{y:.2}" x2="{x1}" y2="{y:.2}" stroke="#dddddd"/>"##);
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, x0 - 6.0, y + 4.0, tick(v));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, (x0 + x1) / 2.0, H - 12.0, escape(x_label));
    let _ = writeln!(
        s,
        r#"<text x="16" y="{:.2}" text-anchor="middle" transform="rotate(-90 16 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(y_label)
    );
}

fn tick(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 1e4 {
        format!("{v:.3}")
    } else {
        format!("{v:.2e}")
    }
}

fn legend(s: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let x = W - RIGHT + 12.0;
        let _ = writeln!(s, r#"<rect x="{x}" y="{:.2}" width="12" height="12" fill="{}"/>"#, y - 9.0, PALETTE[i % PALETTE.len()]);
        let _ = writeln!(s, r#"<text x="{}" y="{:.2}">{}</text>"#, x + 18.0, y + 1.0, escape(name));
    }
}

fn value_range(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    Some(if lo == hi { (lo - 0.5, hi + 0.5) } else { (lo, hi) })
}

/// Polylines over a shared x index; `x_offset` is added to tick labels.
fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[(&str, &[f64])], x_offset: f64) -> String {
    let mut s = svg_open(title);
    let Some((y_min, y_max)) = value_range(series.iter().flat_map(|(_, v)| v.iter().copied())) else {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        s.push_str("</svg>\n");
        return s;
    };
    axes(&mut s, x_label, y_label, y_min, y_max);
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let span = (n.max(2) - 1) as f64;
    let px = |i: usize| LEFT + (W - RIGHT - LEFT) * i as f64 / span;
    let py = |v: f64| (H - BOTTOM) - (H - BOTTOM - TOP) * (v - y_min) / (y_max - y_min);
    for k in [0, n.saturating_sub(1)] {
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            px(k),
            H - BOTTOM + 16.0,
            k as f64 + x_offset
        );
    }
    for (i, (_, values)) in series.iter().enumerate() {
        let points: Vec<String> = values.iter().enumerate().map(|(k, &v)| format!("{:.2},{:.2}", px(k), py(v))).collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.2" points="{}"/>"#,
            PALETTE[i % PALETTE.len()],
            points.join(" ")
        );
    }
    legend(&mut s, &series.iter().map(|(n, _)| *n).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Test MAE (percent) grouped by lookback, one bar per model plus the baseline.
fn mae_bars(report: &GridReport) -> String {
    let mut names: Vec<String> = report.kinds.iter().map(ModelKind::to_string).collect();
    names.push(BASELINE.into());
    let value = |name: &str, l: usize| -> Option<f64> {
        if name == BASELINE {
            report
                .cells
                .iter()
                .filter(|c| c.lookback == l)
                .find_map(|c| c.eval.as_ref())
                .map(|e| 100.0 * e.test.baseline_mae)
        } else {
            let kind: ModelKind = name.parse().ok()?;
            report.cell(kind, l)?.eval.as_ref().map(|e| 100.0 * e.test.mae)
        }
    };
    let mut s = svg_open(&format!("test MAE by lookback, {}h horizon", report.horizon));
    let all: Vec<f64> = report
        .lookbacks
        .iter()
        .flat_map(|&l| names.iter().filter_map(move |n| value(n, l)))
        .collect();
    let y_max = all.iter().copied().fold(0.0, f64::max);
    if y_max <= 0.0 {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">no data</text>"#, W / 2.0, H / 2.0);
        s.push_str("</svg>\n");
        return s;
    }
    let y_max = y_max * 1.1;
    axes(&mut s, "lookback (hours)", "MAE (%)", 0.0, y_max);
    let groups = report.lookbacks.len().max(1) as f64;
    let group_w = (W - RIGHT - LEFT) / groups;
    let bar_w = group_w * 0.8 / names.len() as f64;
    for (g, &l) in report.lookbacks.iter().enumerate() {
        let gx = LEFT + group_w * g as f64 + group_w * 0.1;
        for (i, name) in names.iter().enumerate() {
            if let Some(v) = value(name, l) {
                let h = (H - BOTTOM - TOP) * v / y_max;
                let _ = writeln!(
                    s,
                    r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="{}"/>"#,
                    gx + bar_w * i as f64,
                    H - BOTTOM - h,
                    bar_w,
                    h,
                    PALETTE[i % PALETTE.len()]
                );
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{l}</text>"#,
            gx + group_w * 0.4,
            H - BOTTOM + 16.0
        );
    }
    legend(&mut s, &names.iter().map(String::as_str).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}
