use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ModelSpec, NnError, ParamStore, Result};

pub const CHECKPOINT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// Serializable model: spec, init seed and every parameter in layout order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub spec: ModelSpec,
    pub seed: u64,
    pub params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn from_params(params: &ParamStore, seed: u64) -> Self {
        Checkpoint {
            format_version: CHECKPOINT_FORMAT_VERSION,
            spec: params.spec().clone(),
            seed,
            params: params
                .iter()
                .map(|(e, v)| NamedArray {
                    name: e.name.clone(),
                    shape: e.shape.clone(),
                    values: v.to_vec(),
                })
                .collect(),
        }
    }

    /// Rebuild the parameter store, checking names, order and shapes against the spec.
    pub fn to_params(&self) -> Result<ParamStore> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(NnError::Checkpoint(format!(
                "unsupported format version {} (expected {CHECKPOINT_FORMAT_VERSION})",
                self.format_version
            )));
        }
        self.spec.validate()?;
        let expected = self.spec.param_shapes();
        if expected.len() != self.params.len() {
            return Err(NnError::Checkpoint(format!(
                "{} parameter arrays, spec needs {}",
                self.params.len(),
                expected.len()
            )));
        }
        let mut values = Vec::with_capacity(self.spec.param_count());
        for ((name, shape), arr) in expected.iter().zip(&self.params) {
            if &arr.name != name || &arr.shape != shape {
                return Err(NnError::Checkpoint(format!(
                    "found {} {:?} where the spec expects {name} {shape:?}",
                    arr.name, arr.shape
                )));
            }
            if arr.values.len() != shape.iter().product::<usize>() {
                return Err(NnError::Checkpoint(format!(
                    "{name} has {} values for shape {shape:?}",
                    arr.values.len()
                )));
            }
            if arr.values.iter().any(|v| !v.is_finite()) {
                return Err(NnError::Checkpoint(format!("{name} contains non-finite values")));
            }
            values.extend_from_slice(&arr.values);
        }
        ParamStore::from_values(&self.spec, values)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("checkpoint serializes") + "\n"
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{init_model, ModelKind};

    #[test]
    fn round_trip_is_exact() {
        for kind in ModelKind::ALL {
            let spec = ModelSpec::new(kind, 6, 3).unwrap();
            let p = init_model(&spec, 11).unwrap();
            let ck = Checkpoint::from_params(&p, 11);
            let back = Checkpoint::from_json(&ck.to_json()).unwrap();
            assert_eq!(back, ck);
            assert_eq!(back.to_params().unwrap(), p);
        }
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let spec = ModelSpec::new(ModelKind::Mlp, 4, 2).unwrap();
        let mut ck = Checkpoint::from_params(&init_model(&spec, 1).unwrap(), 1);
        ck.params[0].shape = vec![8, 64];
        assert!(matches!(ck.to_params(), Err(NnError::Checkpoint(_))));
        let mut ck = Checkpoint::from_params(&init_model(&spec, 1).unwrap(), 1);
        ck.spec.lookback = 5;
        assert!(ck.to_params().is_err());
        let mut ck = Checkpoint::from_params(&init_model(&spec, 1).unwrap(), 1);
        ck.params[1].values.pop();
        assert!(ck.to_params().is_err());
    }
}
