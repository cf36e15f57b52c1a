use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};

use super::{ModelKind, ModelSpec, NnError, Result, Tensor};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub offset: usize,
    pub len: usize,
}

/// Names, shapes and offsets of every parameter inside the flat buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParamLayout {
    entries: Vec<ParamEntry>,
    total: usize,
}

impl ParamLayout {
    pub fn for_spec(spec: &ModelSpec) -> Self {
        let mut offset = 0;
        let entries = spec
            .param_shapes()
            .into_iter()
            .map(|(name, shape)| {
                let len = shape.iter().product();
                let e = ParamEntry { name, shape, offset, len };
                offset += len;
                e
            })
            .collect();
        ParamLayout { entries, total: offset }
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn entry(&self, name: &str) -> Option<&ParamEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Entry that owns flat index `i`.
    pub fn locate(&self, i: usize) -> Option<(&ParamEntry, usize)> {
        self.entries
            .iter()
            .find(|e| (e.offset..e.offset + e.len).contains(&i))
            .map(|e| (e, i - e.offset))
    }
}

static NEXT_STORE_ID: AtomicU64 = AtomicU64::new(1);

fn fresh_id() -> u64 {
    NEXT_STORE_ID.fetch_add(1, Ordering::Relaxed)
}

/// All parameters of one model, stored contiguously in layout order.
///
/// Every mutable access bumps a generation counter; forward caches record it
/// so a backward pass against modified or different parameters is rejected.
#[derive(Debug)]
pub struct ParamStore {
    spec: ModelSpec,
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
    id: u64,
    generation: u64,
}

impl Clone for ParamStore {
    fn clone(&self) -> Self {
        ParamStore {
            spec: self.spec.clone(),
            layout: Arc::clone(&self.layout),
            values: self.values.clone(),
            id: fresh_id(),
            generation: 0,
        }
    }
}

impl PartialEq for ParamStore {
    fn eq(&self, other: &Self) -> bool {
        self.spec == other.spec && self.values == other.values
    }
}

impl ParamStore {
    pub fn zeros(spec: &ModelSpec) -> Result<Self> {
        spec.validate()?;
        let layout = ParamLayout::for_spec(spec);
        let values = vec![0.0; layout.total()];
        Ok(ParamStore {
            spec: spec.clone(),
            layout: Arc::new(layout),
            values,
            id: fresh_id(),
            generation: 0,
        })
    }

    pub fn from_values(spec: &ModelSpec, values: Vec<f64>) -> Result<Self> {
        let mut store = ParamStore::zeros(spec)?;
        if values.len() != store.values.len() {
            return Err(NnError::Shape(format!(
                "{} parameters expected for {:?}, got {}",
                store.values.len(),
                spec.kind,
                values.len()
            )));
        }
        store.values = values;
        Ok(store)
    }

    pub fn spec(&self) -> &ModelSpec {
        &self.spec
    }

    pub fn layout(&self) -> &Arc<ParamLayout> {
        &self.layout
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        self.generation += 1;
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        let e = self.layout.entry(name)?;
        Some(&self.values[e.offset..e.offset + e.len])
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut [f64]> {
        let e = self.layout.entry(name)?.clone();
        self.generation += 1;
        Some(&mut self.values[e.offset..e.offset + e.len])
    }

    pub fn tensor(&self, name: &str) -> Option<Tensor> {
        let e = self.layout.entry(name)?;
        Tensor::new(e.shape.clone(), self.values[e.offset..e.offset + e.len].to_vec()).ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&ParamEntry, &[f64])> {
        self.layout
            .entries()
            .iter()
            .map(|e| (e, &self.values[e.offset..e.offset + e.len]))
    }

    pub(crate) fn stamp(&self) -> (u64, u64) {
        (self.id, self.generation)
    }

    pub(crate) fn slice(&self, name: &str) -> &[f64] {
        self.get(name)
            .unwrap_or_else(|| panic!("parameter {name} missing from layout"))
    }
}

/// Gradients with the same layout as the parameters they belong to.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layout: Arc<ParamLayout>,
    values: Vec<f64>,
}

impl Gradients {
    pub fn zeros_like(params: &ParamStore) -> Self {
        Gradients {
            layout: Arc::clone(params.layout()),
            values: vec![0.0; params.len()],
        }
    }

    pub fn layout(&self) -> &ParamLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        let e = self.layout.entry(name)?;
        Some(&self.values[e.offset..e.offset + e.len])
    }

    pub fn global_norm(&self) -> f64 {
        self.values.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Disjoint mutable slices for `names`, which must be in layout order.
    pub(crate) fn many_mut<const N: usize>(&mut self, names: [&str; N]) -> [&mut [f64]; N] {
        let mut rest: &mut [f64] = &mut self.values;
        let mut consumed = 0;
        let mut out: [&mut [f64]; N] = std::array::from_fn(|_| <&mut [f64]>::default());
        for (slot, name) in out.iter_mut().zip(names) {
            let e = self
                .layout
                .entry(name)
                .unwrap_or_else(|| panic!("parameter {name} missing from layout"));
            assert!(e.offset >= consumed, "many_mut names out of layout order");
            let tail = std::mem::take(&mut rest);
            let (_, tail) = tail.split_at_mut(e.offset - consumed);
            let (mine, tail) = tail.split_at_mut(e.len);
            *slot = mine;
            rest = tail;
            consumed = e.offset + e.len;
        }
        out
    }
}

/// Fan-in used for the init bound of one parameter matrix.
fn fan_in(shape: &[usize]) -> usize {
    shape[1..].iter().product()
}

/// Seeded initialization: weights uniform in `±1/√fan_in`, biases zero,
/// LSTM forget-gate bias one.
pub fn init_model(spec: &ModelSpec, seed: u64) -> Result<ParamStore> {
    let mut store = ParamStore::zeros(spec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layout = Arc::clone(&store.layout);
    for e in layout.entries() {
        let values = &mut store.values[e.offset..e.offset + e.len];
        if e.name.ends_with(".bias") {
            if spec.kind == ModelKind::Lstm && e.name == "lstm.bias" {
                let h = e.len / 4;
                values[h..2 * h].fill(1.0);
            }
            continue;
        }
        let bound = 1.0 / (fan_in(&e.shape) as f64).sqrt();
        let dist = Uniform::new(-bound, bound).map_err(|e| NnError::Spec(e.to_string()))?;
        values.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic_and_bounded() {
        let spec = ModelSpec::new(ModelKind::Lstm, 5, 3).unwrap();
        let a = init_model(&spec, 7).unwrap();
        let b = init_model(&spec, 7).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, init_model(&spec, 8).unwrap());
        let bias = a.get("lstm.bias").unwrap();
        assert!(bias[..32].iter().all(|&v| v == 0.0));
        assert!(bias[32..64].iter().all(|&v| v == 1.0));
        assert!(bias[64..].iter().all(|&v| v == 0.0));
        let bound = 1.0 / 3f64.sqrt();
        assert!(a.get("lstm.weight_ih").unwrap().iter().all(|v| v.abs() <= bound));
        let bound = 1.0 / 32f64.sqrt();
        assert!(a.get("lstm.weight_hh").unwrap().iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn layout_is_contiguous() {
        let spec = ModelSpec::new(ModelKind::Cnn, 24, 8).unwrap();
        let p = init_model(&spec, 1).unwrap();
        assert_eq!(p.len(), spec.param_count());
        let mut next = 0;
        for (e, v) in p.iter() {
            assert_eq!(e.offset, next);
            assert_eq!(v.len(), e.len);
            next += e.len;
        }
        assert_eq!(p.layout().locate(next - 1).unwrap().0.name, "out.bias");
        assert_eq!(p.tensor("conv.weight").unwrap().shape(), &[32, 8, 3]);
    }

    #[test]
    fn mutation_bumps_generation_and_clone_gets_new_identity() {
        let spec = ModelSpec::new(ModelKind::Mlp, 2, 2).unwrap();
        let mut p = init_model(&spec, 1).unwrap();
        let before = p.stamp();
        p.values_mut()[0] += 1.0;
        assert_ne!(p.stamp(), before);
        let q = p.clone();
        assert_eq!(p, q);
        assert_ne!(p.stamp().0, q.stamp().0);
    }
}
