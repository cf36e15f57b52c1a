use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{NnError, Result};

pub const CONV_KERNEL: usize = 3;
pub const POOL_SIZE: usize = 3;
/// Width of the recurrent state in the RNN and LSTM models.
pub const RECURRENT_HIDDEN: usize = 32;
/// Width of the two hidden dense layers of the MLP.
pub const DENSE_HIDDEN: usize = 64;
const CNN_DENSE: [usize; 2] = [128, 32];
const RECURRENT_HEAD: usize = 64;
const DEFAULT_CONV_CHANNELS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Mlp,
    Cnn,
    Rnn,
    Lstm,
}

impl ModelKind {
    pub const ALL: [ModelKind; 4] = [ModelKind::Mlp, ModelKind::Cnn, ModelKind::Rnn, ModelKind::Lstm];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Mlp => "mlp",
            ModelKind::Cnn => "cnn",
            ModelKind::Rnn => "rnn",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = NnError;

    fn from_str(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s))
            .ok_or_else(|| NnError::Spec(format!("unknown model kind {s:?} (expected mlp, cnn, rnn or lstm)")))
    }
}

fn default_conv_channels() -> usize {
    DEFAULT_CONV_CHANNELS
}

/// Architecture and input geometry. Layer widths follow from `kind`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub lookback: usize,
    pub feature_count: usize,
    /// Output channels of the CNN convolution; ignored by other kinds.
    #[serde(default = "default_conv_channels")]
    pub conv_channels: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind, lookback: usize, feature_count: usize) -> Result<Self> {
        let spec = ModelSpec {
            kind,
            lookback,
            feature_count,
            conv_channels: DEFAULT_CONV_CHANNELS,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.lookback == 0 || self.feature_count == 0 {
            return Err(NnError::Spec(format!(
                "lookback ({}) and feature count ({}) must be at least 1",
                self.lookback, self.feature_count
            )));
        }
        if self.kind == ModelKind::Cnn {
            if self.lookback < CONV_KERNEL {
                return Err(NnError::Spec(format!(
                    "CNN needs lookback >= {CONV_KERNEL} for its kernel, got {}",
                    self.lookback
                )));
            }
            if self.conv_channels == 0 {
                return Err(NnError::Spec("CNN needs at least one conv channel".into()));
            }
            if self.pooled_len() == 0 {
                return Err(NnError::Spec(format!(
                    "CNN lookback {} leaves no complete pooling window",
                    self.lookback
                )));
            }
        }
        Ok(())
    }

    /// Values in one input sequence (`L·F`).
    pub fn input_len(&self) -> usize {
        self.lookback * self.feature_count
    }

    /// Convolution output length (valid padding, stride 1).
    pub fn conv_len(&self) -> usize {
        self.lookback.saturating_sub(CONV_KERNEL - 1)
    }

    pub fn pooled_len(&self) -> usize {
        self.conv_len() / POOL_SIZE
    }

    /// Parameter names and shapes in storage order.
    pub fn param_shapes(&self) -> Vec<(String, Vec<usize>)> {
        let f = self.feature_count;
        let mut out: Vec<(String, Vec<usize>)> = Vec::new();
        fn dense(name: &str, inp: usize, outp: usize, out: &mut Vec<(String, Vec<usize>)>) {
            out.push((format!("{name}.weight"), vec![outp, inp]));
            out.push((format!("{name}.bias"), vec![outp]));
        }
        match self.kind {
            ModelKind::Mlp => {
                dense("dense1", self.input_len(), DENSE_HIDDEN, &mut out);
                dense("dense2", DENSE_HIDDEN, DENSE_HIDDEN, &mut out);
                dense("out", DENSE_HIDDEN, 1, &mut out);
            }
            ModelKind::Cnn => {
                let c = self.conv_channels;
                out.push(("conv.weight".into(), vec![c, f, CONV_KERNEL]));
                out.push(("conv.bias".into(), vec![c]));
                dense("dense1", self.pooled_len() * c, CNN_DENSE[0], &mut out);
                dense("dense2", CNN_DENSE[0], CNN_DENSE[1], &mut out);
                dense("out", CNN_DENSE[1], 1, &mut out);
            }
            ModelKind::Rnn | ModelKind::Lstm => {
                let (prefix, gates) = if self.kind == ModelKind::Rnn { ("rnn", 1) } else { ("lstm", 4) };
                let h = RECURRENT_HIDDEN;
                out.push((format!("{prefix}.weight_ih"), vec![gates * h, f]));
                out.push((format!("{prefix}.weight_hh"), vec![gates * h, h]));
                out.push((format!("{prefix}.bias"), vec![gates * h]));
                dense("dense1", h, RECURRENT_HEAD, &mut out);
                dense("out", RECURRENT_HEAD, 1, &mut out);
            }
        }
        out
    }

    pub fn param_count(&self) -> usize {
        self.param_shapes()
            .iter()
            .map(|(_, s)| s.iter().product::<usize>())
            .sum()
    }
}
