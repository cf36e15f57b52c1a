use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::scaling::{apply_maxabs, ScalerState};
use super::{FeatureError, FeatureMatrix, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Val, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Contiguous row ranges: oldest 70% train, next 20% validation, newest 10% test.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitRanges {
    pub train: Range<usize>,
    pub val: Range<usize>,
    pub test: Range<usize>,
}

impl SplitRanges {
    pub fn get(&self, split: Split) -> Range<usize> {
        match split {
            Split::Train => self.train.clone(),
            Split::Val => self.val.clone(),
            Split::Test => self.test.clone(),
        }
    }

    pub fn split_of(&self, row: usize) -> Option<Split> {
        Split::ALL.into_iter().find(|&s| self.get(s).contains(&row))
    }
}

/// Boundaries at `floor(0.7·N)` and `floor(0.9·N)`.
pub fn split_timeline(rows: usize) -> Result<SplitRanges> {
    let a = rows * 7 / 10;
    let b = rows * 9 / 10;
    if a == 0 || b == a || b == rows {
        return Err(FeatureError::TooFewRows(rows));
    }
    Ok(SplitRanges {
        train: 0..a,
        val: a..b,
        test: b..rows,
    })
}

/// Fixed-length input windows with unscaled forward-return labels.
///
/// Inputs are not copied per sequence: the scaled matrix is stored row-major,
/// so the window ending at anchor row `t` is the contiguous slice of rows
/// `t−L+1 ..= t`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub lookback: usize,
    pub horizon: usize,
    pub feature_names: Vec<String>,
    pub splits: SplitRanges,
    pub times: Vec<i64>,
    pub closes: Vec<f64>,
    /// Unscaled one-step returns per row.
    pub returns: Vec<f64>,
    rows: Vec<f64>,
    anchors: [Range<usize>; 3],
    labels: [Vec<f64>; 3],
}

/// Build sequences inside each split independently.
///
/// For anchor row `t` the input covers rows `t−L+1 ..= t` and the label is
/// `(close[t+n] − close[t]) / close[t]`; neither crosses a split boundary, so
/// a split of `M` rows yields `M − L − n + 1` sequences.
pub fn build_sequences(
    matrix: &FeatureMatrix,
    scaler: &ScalerState,
    lookback: usize,
    horizon: usize,
    splits: &SplitRanges,
) -> Result<Dataset> {
    if lookback == 0 || horizon == 0 {
        return Err(FeatureError::InvalidParameter(
            "lookback and horizon must be at least 1".into(),
        ));
    }
    if splits.test.end != matrix.rows() || splits.train.start != 0 {
        return Err(FeatureError::InvalidParameter(format!(
            "split ranges do not cover the {} matrix rows",
            matrix.rows()
        )));
    }
    let scaled = apply_maxabs(matrix, scaler)?;
    let width = scaled.width();
    let mut rows = vec![0.0; matrix.rows() * width];
    for (c, col) in scaled.columns.iter().enumerate() {
        for (r, &v) in col.iter().enumerate() {
            rows[r * width + c] = v;
        }
    }

    let mut anchors: [Range<usize>; 3] = Default::default();
    let mut labels: [Vec<f64>; 3] = Default::default();
    for split in Split::ALL {
        let range = splits.get(split);
        let needed = lookback + horizon;
        if range.len() < needed {
            return Err(FeatureError::SplitTooShort {
                split,
                rows: range.len(),
                needed,
            });
        }
        let first = range.start + lookback - 1;
        let last = range.end - 1 - horizon;
        let anchor_range = first..last + 1;
        labels[split.index()] = anchor_range
            .clone()
            .map(|t| (matrix.closes[t + horizon] - matrix.closes[t]) / matrix.closes[t])
            .collect();
        anchors[split.index()] = anchor_range;
    }

    Ok(Dataset {
        lookback,
        horizon,
        feature_names: scaled.meta.iter().map(|m| m.name.clone()).collect(),
        splits: splits.clone(),
        times: matrix.times.clone(),
        closes: matrix.closes.clone(),
        returns: matrix.returns.clone(),
        rows,
        anchors,
        labels,
    })
}

impl Dataset {
    pub fn feature_count(&self) -> usize {
        self.feature_names.len()
    }

    pub fn count(&self, split: Split) -> usize {
        self.anchors[split.index()].len()
    }

    /// Matrix row of the last input step of sequence `i`.
    pub fn anchor(&self, split: Split, i: usize) -> usize {
        let r = &self.anchors[split.index()];
        assert!(i < r.len(), "sequence {i} out of range for {split}");
        r.start + i
    }

    /// Scaled input window of sequence `i`, time-major (`L × F`).
    pub fn input(&self, split: Split, i: usize) -> &[f64] {
        let t = self.anchor(split, i);
        let f = self.feature_count();
        &self.rows[(t + 1 - self.lookback) * f..(t + 1) * f]
    }

    /// Scaled feature row `r` of the underlying matrix.
    pub fn row(&self, r: usize) -> &[f64] {
        let f = self.feature_count();
        &self.rows[r * f..(r + 1) * f]
    }

    pub fn labels(&self, split: Split) -> &[f64] {
        &self.labels[split.index()]
    }

    /// Unscaled one-step returns inside the input window of sequence `i`.
    pub fn window_returns(&self, split: Split, i: usize) -> &[f64] {
        let t = self.anchor(split, i);
        &self.returns[t + 1 - self.lookback..=t]
    }

    /// Row whose close defines the label of sequence `i`.
    pub fn label_row(&self, split: Split, i: usize) -> usize {
        self.anchor(split, i) + self.horizon
    }

    /// Concatenate the inputs of `indices` into `out` (cleared first).
    pub fn gather(&self, split: Split, indices: &[usize], out: &mut Vec<f64>) {
        out.clear();
        for &i in indices {
            out.extend_from_slice(self.input(split, i));
        }
    }

    /// Keep at most the first `n` sequences of every split.
    pub fn truncated(&self, n: usize) -> Dataset {
        let mut out = self.clone();
        for (range, labels) in out.anchors.iter_mut().zip(&mut out.labels) {
            range.end = range.end.min(range.start + n);
            labels.truncate(range.len());
        }
        out
    }

    /// Content hash over shapes, scaled inputs, labels and split layout.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        for v in [self.lookback, self.horizon, self.feature_count()] {
            h.update((v as u64).to_le_bytes());
        }
        for name in &self.feature_names {
            h.update(name.as_bytes());
            h.update([0]);
        }
        for r in &self.anchors {
            h.update((r.start as u64).to_le_bytes());
            h.update((r.end as u64).to_le_bytes());
        }
        for v in self.rows.iter().chain(self.labels.iter().flatten()).chain(&self.returns) {
            h.update(v.to_bits().to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}
