//! Run configuration: TOML file with one section per stage, then flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use candleforge::evaluation::REFERENCE_LOOKBACKS;
use candleforge::features::FeatureConfig;
use candleforge::market_data::Interval;
use candleforge::nn::ModelKind;
use candleforge::training::TrainConfig;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub data: DataSection,
    pub features: FeatureSection,
    pub models: ModelSection,
    pub train: TrainSection,
    pub paths: PathsSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataSection {
    pub symbol: String,
    pub interval: Interval,
    pub days_back: u32,
    /// Read candles from this CSV instead of the exchange.
    pub from_csv: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureSection {
    pub horizon: usize,
    pub include_ohlcv: bool,
    pub max_differencing_rounds: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelSection {
    pub kinds: Vec<ModelKind>,
    pub lookbacks: Vec<usize>,
}

/// Optimizer settings; the seed lives at the top level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub eps_loss: f64,
    pub clip_norm: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsSection {
    pub data_dir: PathBuf,
    pub out_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            data: DataSection::default(),
            features: FeatureSection::default(),
            models: ModelSection::default(),
            train: TrainSection::default(),
            paths: PathsSection::default(),
        }
    }
}

impl Default for DataSection {
    fn default() -> Self {
        DataSection {
            symbol: "BTCUSDT".into(),
            interval: Interval::Hour1,
            days_back: 400,
            from_csv: None,
        }
    }
}

impl Default for FeatureSection {
    fn default() -> Self {
        let f = FeatureConfig::default();
        FeatureSection {
            horizon: 2,
            include_ohlcv: f.include_ohlcv,
            max_differencing_rounds: f.max_differencing_rounds,
        }
    }
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            kinds: ModelKind::ALL.to_vec(),
            lookbacks: REFERENCE_LOOKBACKS.to_vec(),
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            eps_loss: t.eps_loss,
            clip_norm: t.clip_norm,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
        }
    }
}

impl Default for PathsSection {
    fn default() -> Self {
        PathsSection {
            data_dir: "data".into(),
            out_dir: "runs".into(),
        }
    }
}

/// Command-line values that override the file. `None` leaves the file value.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub symbol: Option<String>,
    pub interval: Option<Interval>,
    pub days: Option<u32>,
    pub lookback: Option<usize>,
    pub horizon: Option<usize>,
    pub model: Option<ModelKind>,
    pub seed: Option<u64>,
    pub epochs: Option<usize>,
    pub lr: Option<f64>,
    pub out: Option<PathBuf>,
    pub from_csv: Option<PathBuf>,
}

impl RunConfig {
    /// Parse a config file. Relative paths inside it resolve against the
    /// file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        let mut config: RunConfig =
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new(""));
        let rebase = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        if let Some(p) = config.data.from_csv.as_mut() {
            rebase(p);
        }
        rebase(&mut config.paths.data_dir);
        rebase(&mut config.paths.out_dir);
        Ok(config)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.symbol {
            self.data.symbol = v.clone();
        }
        if let Some(v) = o.interval {
            self.data.interval = v;
        }
        if let Some(v) = o.days {
            self.data.days_back = v;
        }
        if let Some(v) = o.lookback {
            self.models.lookbacks = vec![v];
        }
        if let Some(v) = o.horizon {
            self.features.horizon = v;
        }
        if let Some(v) = o.model {
            self.models.kinds = vec![v];
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = o.epochs {
            self.train.epochs = v;
        }
        if let Some(v) = o.lr {
            self.train.learning_rate = v;
        }
        if let Some(v) = &o.out {
            self.paths.out_dir = v.clone();
        }
        if let Some(v) = &o.from_csv {
            self.data.from_csv = Some(v.clone());
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data.symbol.is_empty() {
            bail!("data.symbol must not be empty");
        }
        if self.data.days_back == 0 {
            bail!("data.days_back must be at least 1");
        }
        if self.features.horizon == 0 {
            bail!("features.horizon must be at least 1");
        }
        if self.models.kinds.is_empty() || self.models.lookbacks.is_empty() {
            bail!("models.kinds and models.lookbacks must not be empty");
        }
        if self.models.lookbacks.contains(&0) {
            bail!("lookbacks must be at least 1");
        }
        self.train_config().validate()?;
        Ok(())
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            learning_rate: t.learning_rate,
            epochs: t.epochs,
            batch_size: t.batch_size,
            seed: self.seed,
            eps_loss: t.eps_loss,
            clip_norm: t.clip_norm,
            beta1: t.beta1,
            beta2: t.beta2,
            adam_eps: t.adam_eps,
        }
    }

    pub fn feature_config(&self) -> FeatureConfig {
        FeatureConfig {
            include_ohlcv: self.features.include_ohlcv,
            max_differencing_rounds: self.features.max_differencing_rounds,
        }
    }

    /// Where `fetch` stores candles and later stages look for them.
    pub fn candles_path(&self) -> PathBuf {
        self.paths
            .data_dir
            .join(format!("{}_{}.csv", self.data.symbol.to_lowercase(), self.data.interval.as_str()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Exactly one model kind, for single-model commands.
    pub fn single_kind(&self) -> Result<ModelKind> {
        match self.models.kinds.as_slice() {
            [k] => Ok(*k),
            ks => bail!("this command trains one model; pass --model (config lists {} kinds)", ks.len()),
        }
    }

    pub fn single_lookback(&self) -> Result<usize> {
        match self.models.lookbacks.as_slice() {
            [l] => Ok(*l),
            ls => bail!("this command uses one lookback; pass --lookback (config lists {} lookbacks)", ls.len()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_reference_setup() {
        let c = RunConfig::default();
        assert_eq!(c.data.days_back, 400);
        assert_eq!(c.features.horizon, 2);
        assert_eq!(c.models.lookbacks, vec![168, 72, 24, 12]);
        assert_eq!(c.models.kinds.len(), 4);
        assert_eq!(c.train.learning_rate, 1e-5);
        assert_eq!(c.train.epochs, 30);
        c.validate().unwrap();
    }

    #[test]
    fn toml_round_trip() {
        let c = RunConfig::default();
        let back: RunConfig = toml::from_str(&c.to_toml()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn sections_parse_and_flags_win() {
        let text = "seed = 9\n[train]\nepochs = 3\nlearning_rate = 0.001\n[models]\nkinds = [\"lstm\"]\n";
        let mut c: RunConfig = toml::from_str(text).unwrap();
        assert_eq!((c.seed, c.train.epochs, c.models.kinds.clone()), (9, 3, vec![ModelKind::Lstm]));
        assert_eq!(c.models.lookbacks, vec![168, 72, 24, 12]);
        c.apply(&Overrides {
            epochs: Some(5),
            lookback: Some(24),
            ..Overrides::default()
        });
        assert_eq!((c.train.epochs, c.train.learning_rate), (5, 0.001));
        assert_eq!(c.single_lookback().unwrap(), 24);
        assert_eq!(c.train_config().seed, 9);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(toml::from_str::<RunConfig>("[train]\nepoch = 3\n").is_err());
        assert!(toml::from_str::<RunConfig>("[models]\nkinds = [\"gru\"]\n").is_err());
    }

    #[test]
    fn invalid_values_fail_validation() {
        let mut c = RunConfig::default();
        c.train.learning_rate = -1.0;
        assert!(c.validate().is_err());
        let mut c = RunConfig::default();
        c.features.horizon = 0;
        assert!(c.validate().is_err());
    }
}
