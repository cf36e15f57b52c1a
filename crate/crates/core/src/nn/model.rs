use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use super::layers::{self, LstmCache, RnnCache};
use super::{Gradients, ModelKind, ModelSpec, NnError, ParamStore, Result, Tensor, RECURRENT_HIDDEN};

#[derive(Debug, Clone)]
enum Acts {
    Mlp {
        h1: Vec<f64>,
        h2: Vec<f64>,
    },
    Cnn {
        kp: Vec<f64>,
        conv: Vec<f64>,
        argmax: Vec<usize>,
        pooled: Vec<f64>,
        h1: Vec<f64>,
        h2: Vec<f64>,
    },
    Rnn {
        cache: RnnCache,
        h1: Vec<f64>,
    },
    Lstm {
        cache: LstmCache,
        h1: Vec<f64>,
    },
}

/// Activations of one forward pass, tied to the exact parameters used.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    spec: ModelSpec,
    stamp: (u64, u64),
    batch: usize,
    input: Vec<f64>,
    acts: Acts,
}

impl ForwardCache {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Hash of every ReLU on/off decision and pooling choice in the pass.
    /// Two passes with equal signatures follow the same linear pieces.
    pub fn kink_signature(&self) -> u64 {
        fn mask(h: &mut DefaultHasher, v: &[f64]) {
            for chunk in v.chunks(64) {
                let bits = chunk.iter().enumerate().fold(0u64, |acc, (i, &x)| acc | (((x > 0.0) as u64) << i));
                bits.hash(h);
            }
        }
        let mut h = DefaultHasher::new();
        match &self.acts {
            Acts::Mlp { h1, h2 } => {
                mask(&mut h, h1);
                mask(&mut h, h2);
            }
            Acts::Cnn { conv, argmax, h1, h2, .. } => {
                mask(&mut h, conv);
                argmax.hash(&mut h);
                mask(&mut h, h1);
                mask(&mut h, h2);
            }
            Acts::Rnn { cache, h1 } => {
                mask(&mut h, cache.all_states());
                mask(&mut h, h1);
            }
            Acts::Lstm { h1, .. } => mask(&mut h, h1),
        }
        h.finish()
    }
}

fn check_input(spec: &ModelSpec, params: &ParamStore, input: &[f64], batch: usize) -> Result<()> {
    if params.spec() != spec {
        return Err(NnError::Shape(format!(
            "parameters were built for {:?}, not {:?}",
            params.spec(),
            spec
        )));
    }
    if batch == 0 || input.len() != batch * spec.input_len() {
        return Err(NnError::Shape(format!(
            "batch of {batch} sequences needs {} values ({} × {} per sequence), got {}",
            batch * spec.input_len(),
            spec.lookback,
            spec.feature_count,
            input.len()
        )));
    }
    Ok(())
}

/// Forward pass over `batch` sequences stored back to back (`B × L × F`,
/// time-major within a sequence). Returns one prediction per sequence.
pub fn model_forward_raw(
    spec: &ModelSpec,
    params: &ParamStore,
    input: &[f64],
    batch: usize,
) -> Result<(Vec<f64>, ForwardCache)> {
    check_input(spec, params, input, batch)?;
    let (l, f) = (spec.lookback, spec.feature_count);
    let p = |name: &str| params.slice(name);
    let dense = |x: &[f64], name: &str, inp: usize, outp: usize, relu: bool| {
        let mut y = layers::dense_fwd(x, batch, inp, p(&format!("{name}.weight")), p(&format!("{name}.bias")), outp);
        if relu {
            layers::relu_inplace(&mut y);
        }
        y
    };
    let width = |name: &str| params.layout().entry(&format!("{name}.weight")).map(|e| e.shape[0]).unwrap();

    let (pred, acts) = match spec.kind {
        ModelKind::Mlp => {
            let (w1, w2) = (width("dense1"), width("dense2"));
            let h1 = dense(input, "dense1", l * f, w1, true);
            let h2 = dense(&h1, "dense2", w1, w2, true);
            (dense(&h2, "out", w2, 1, false), Acts::Mlp { h1, h2 })
        }
        ModelKind::Cnn => {
            let c = spec.conv_channels;
            let t = spec.conv_len();
            let kp = layers::kernel_to_rows(p("conv.weight"), c, f);
            let mut conv = layers::conv_fwd(input, batch, l, f, &kp, p("conv.bias"), c);
            layers::relu_inplace(&mut conv);
            let (pooled, argmax) = layers::pool_fwd(&conv, batch, t, c);
            let (w1, w2) = (width("dense1"), width("dense2"));
            let h1 = dense(&pooled, "dense1", spec.pooled_len() * c, w1, true);
            let h2 = dense(&h1, "dense2", w1, w2, true);
            let pred = dense(&h2, "out", w2, 1, false);
            (pred, Acts::Cnn { kp, conv, argmax, pooled, h1, h2 })
        }
        ModelKind::Rnn => {
            let h = RECURRENT_HIDDEN;
            let cache = layers::rnn_fwd(input, batch, l, f, p("rnn.weight_ih"), p("rnn.weight_hh"), p("rnn.bias"), h);
            let w1 = width("dense1");
            let h1 = dense(cache.last(), "dense1", h, w1, true);
            (dense(&h1, "out", w1, 1, false), Acts::Rnn { cache, h1 })
        }
        ModelKind::Lstm => {
            let h = RECURRENT_HIDDEN;
            let cache = layers::lstm_fwd(
                input,
                batch,
                l,
                f,
                p("lstm.weight_ih"),
                p("lstm.weight_hh"),
                p("lstm.bias"),
                h,
                None,
            );
            let w1 = width("dense1");
            let h1 = dense(cache.last(), "dense1", h, w1, true);
            (dense(&h1, "out", w1, 1, false), Acts::Lstm { cache, h1 })
        }
    };
    let cache = ForwardCache {
        spec: spec.clone(),
        stamp: params.stamp(),
        batch,
        input: input.to_vec(),
        acts,
    };
    Ok((pred, cache))
}

/// Forward pass on a `B × L × F` tensor; predictions are `B × 1`.
pub fn model_forward(spec: &ModelSpec, params: &ParamStore, input: &Tensor) -> Result<(Tensor, ForwardCache)> {
    input.expect_rank(3, "model input")?;
    if input.dim(1) != spec.lookback || input.dim(2) != spec.feature_count {
        return Err(NnError::Shape(format!(
            "input shape {:?} does not match lookback {} × features {}",
            input.shape(),
            spec.lookback,
            spec.feature_count
        )));
    }
    let batch = input.dim(0);
    let (pred, cache) = model_forward_raw(spec, params, input.data(), batch)?;
    Ok((Tensor::new(vec![batch, 1], pred)?, cache))
}

/// Predictions only; equivalent to [`model_forward_raw`] without keeping the cache.
pub fn predict(spec: &ModelSpec, params: &ParamStore, input: &[f64], batch: usize) -> Result<Vec<f64>> {
    model_forward_raw(spec, params, input, batch).map(|(p, _)| p)
}

/// Gradients of `Σ dpred_i · pred_i` with respect to every parameter.
pub fn model_backward_raw(spec: &ModelSpec, params: &ParamStore, cache: &ForwardCache, dpred: &[f64]) -> Result<Gradients> {
    if cache.spec != *spec || params.spec() != spec {
        return Err(NnError::Contract("forward cache was produced for a different model spec".into()));
    }
    if cache.stamp != params.stamp() {
        return Err(NnError::Contract(
            "forward cache is stale: parameters changed or differ since the forward pass".into(),
        ));
    }
    let batch = cache.batch;
    if dpred.len() != batch {
        return Err(NnError::Shape(format!("{} prediction gradients for a batch of {batch}", dpred.len())));
    }
    let (l, f) = (spec.lookback, spec.feature_count);
    let mut grads = Gradients::zeros_like(params);
    let p = |name: &str| params.slice(name);
    // Backward through one dense layer; returns dx for the layer below.
    let dense = |grads: &mut Gradients, x: &[f64], name: &str, inp: usize, outp: usize, dy: &[f64], want_dx: bool| {
        let wname = format!("{name}.weight");
        let [dw, db] = grads.many_mut([wname.as_str(), &format!("{name}.bias")]);
        layers::dense_bwd(x, batch, inp, p(&wname), outp, dy, dw, db, want_dx)
    };
    let width = |name: &str| params.layout().entry(&format!("{name}.weight")).map(|e| e.shape[0]).unwrap();

    match &cache.acts {
        Acts::Mlp { h1, h2 } => {
            let (w1, w2) = (width("dense1"), width("dense2"));
            let mut d = dense(&mut grads, h2, "out", w2, 1, dpred, true).unwrap();
            layers::relu_mask(h2, &mut d);
            let mut d = dense(&mut grads, h1, "dense2", w1, w2, &d, true).unwrap();
            layers::relu_mask(h1, &mut d);
            dense(&mut grads, &cache.input, "dense1", l * f, w1, &d, false);
        }
        Acts::Cnn { kp, conv, argmax, pooled, h1, h2 } => {
            let c = spec.conv_channels;
            let (w1, w2) = (width("dense1"), width("dense2"));
            let mut d = dense(&mut grads, h2, "out", w2, 1, dpred, true).unwrap();
            layers::relu_mask(h2, &mut d);
            let mut d = dense(&mut grads, h1, "dense2", w1, w2, &d, true).unwrap();
            layers::relu_mask(h1, &mut d);
            let d = dense(&mut grads, pooled, "dense1", spec.pooled_len() * c, w1, &d, true).unwrap();
            let mut d = layers::pool_bwd(&d, argmax, conv.len());
            layers::relu_mask(conv, &mut d);
            let mut dkp = vec![0.0; kp.len()];
            let [dk, db] = grads.many_mut(["conv.weight", "conv.bias"]);
            layers::conv_bwd(&cache.input, batch, l, f, kp, c, &d, &mut dkp, db, false);
            layers::rows_to_kernel_add(&dkp, c, f, dk);
        }
        Acts::Rnn { cache: rc, h1 } => {
            let h = RECURRENT_HIDDEN;
            let w1 = width("dense1");
            let mut d = dense(&mut grads, h1, "out", w1, 1, dpred, true).unwrap();
            layers::relu_mask(h1, &mut d);
            let dh = dense(&mut grads, rc.last(), "dense1", h, w1, &d, true).unwrap();
            let [dw_ih, dw_hh, db] = grads.many_mut(["rnn.weight_ih", "rnn.weight_hh", "rnn.bias"]);
            layers::rnn_bwd(
                &cache.input,
                batch,
                l,
                f,
                p("rnn.weight_ih"),
                p("rnn.weight_hh"),
                h,
                rc,
                &dh,
                dw_ih,
                dw_hh,
                db,
                false,
            );
        }
        Acts::Lstm { cache: lc, h1 } => {
            let h = RECURRENT_HIDDEN;
            let w1 = width("dense1");
            let mut d = dense(&mut grads, h1, "out", w1, 1, dpred, true).unwrap();
            layers::relu_mask(h1, &mut d);
            let dh = dense(&mut grads, lc.last(), "dense1", h, w1, &d, true).unwrap();
            let [dw_ih, dw_hh, db] = grads.many_mut(["lstm.weight_ih", "lstm.weight_hh", "lstm.bias"]);
            layers::lstm_bwd(
                &cache.input,
                batch,
                l,
                f,
                p("lstm.weight_ih"),
                p("lstm.weight_hh"),
                h,
                lc,
                &dh,
                dw_ih,
                dw_hh,
                db,
                false,
            );
        }
    }
    Ok(grads)
}

/// Tensor form of [`model_backward_raw`]; `dpred` is `B × 1`.
pub fn model_backward(spec: &ModelSpec, params: &ParamStore, cache: &ForwardCache, dpred: &Tensor) -> Result<Gradients> {
    if dpred.shape() != [cache.batch, 1] {
        return Err(NnError::Shape(format!("dpred shape {:?}, expected [{}, 1]", dpred.shape(), cache.batch)));
    }
    model_backward_raw(spec, params, cache, dpred.data())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{gradient_check, init_model};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Uniform};

    fn inputs(spec: &ModelSpec, batch: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Uniform::new(-1.0, 1.0).unwrap();
        (0..batch * spec.input_len()).map(|_| u.sample(&mut rng)).collect()
    }

    fn specs() -> Vec<ModelSpec> {
        ModelKind::ALL.iter().map(|&k| ModelSpec::new(k, 8, 3).unwrap()).collect()
    }

    #[test]
    fn zero_output_layer_predicts_its_bias() {
        for spec in specs() {
            let mut p = init_model(&spec, 3).unwrap();
            p.get_mut("out.weight").unwrap().fill(0.0);
            p.get_mut("out.bias").unwrap()[0] = 0.125;
            let pred = predict(&spec, &p, &inputs(&spec, 5, 1), 5).unwrap();
            assert!(pred.iter().all(|&v| v == 0.125), "{:?}", spec.kind);
        }
    }

    #[test]
    fn batch_rows_are_independent() {
        for spec in specs() {
            let p = init_model(&spec, 4).unwrap();
            let x = inputs(&spec, 6, 2);
            let all = predict(&spec, &p, &x, 6).unwrap();
            let n = spec.input_len();
            for i in 0..6 {
                let one = predict(&spec, &p, &x[i * n..(i + 1) * n], 1).unwrap();
                assert!((one[0] - all[i]).abs() <= 1e-15 * all[i].abs().max(1.0), "{:?}", spec.kind);
            }
            // permuting rows permutes outputs
            let mut rev = Vec::new();
            for i in (0..6).rev() {
                rev.extend_from_slice(&x[i * n..(i + 1) * n]);
            }
            let out = predict(&spec, &p, &rev, 6).unwrap();
            for i in 0..6 {
                assert!((out[5 - i] - all[i]).abs() <= 1e-15 * all[i].abs().max(1.0));
            }
        }
    }

    #[test]
    fn backward_is_linear_in_upstream_gradient() {
        for spec in specs() {
            let p = init_model(&spec, 5).unwrap();
            let x = inputs(&spec, 3, 3);
            let (_, cache) = model_forward_raw(&spec, &p, &x, 3).unwrap();
            let zero = model_backward_raw(&spec, &p, &cache, &[0.0; 3]).unwrap();
            assert!(zero.values().iter().all(|&g| g == 0.0));
            let g1 = model_backward_raw(&spec, &p, &cache, &[0.3, -0.2, 0.7]).unwrap();
            let g2 = model_backward_raw(&spec, &p, &cache, &[0.6, -0.4, 1.4]).unwrap();
            for (a, b) in g1.values().iter().zip(g2.values()) {
                assert_eq!(2.0 * a, *b);
            }
        }
    }

    #[test]
    fn stale_or_foreign_cache_is_rejected() {
        let spec = ModelSpec::new(ModelKind::Mlp, 4, 2).unwrap();
        let mut p = init_model(&spec, 1).unwrap();
        let x = inputs(&spec, 2, 1);
        let (_, cache) = model_forward_raw(&spec, &p, &x, 2).unwrap();
        let other = p.clone();
        assert!(matches!(model_backward_raw(&spec, &other, &cache, &[1.0, 1.0]), Err(NnError::Contract(_))));
        p.values_mut()[0] += 0.1;
        assert!(matches!(model_backward_raw(&spec, &p, &cache, &[1.0, 1.0]), Err(NnError::Contract(_))));
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let spec = ModelSpec::new(ModelKind::Rnn, 4, 2).unwrap();
        let p = init_model(&spec, 1).unwrap();
        assert!(matches!(predict(&spec, &p, &[0.0; 7], 1), Err(NnError::Shape(_))));
        let bad = Tensor::zeros(vec![2, 5, 2]);
        assert!(model_forward(&spec, &p, &bad).is_err());
        let other = ModelSpec::new(ModelKind::Rnn, 5, 2).unwrap();
        assert!(predict(&other, &p, &[0.0; 10], 1).is_err());
    }

    #[test]
    fn forward_is_deterministic_and_finite() {
        for spec in specs() {
            let p = init_model(&spec, 9).unwrap();
            let x = Tensor::new(vec![4, 8, 3], inputs(&spec, 4, 9).iter().map(|v| v * 50.0).collect()).unwrap();
            let (a, _) = model_forward(&spec, &p, &x).unwrap();
            let (b, _) = model_forward(&spec, &p, &x).unwrap();
            assert_eq!(a, b);
            assert!(a.is_finite());
            assert_eq!(a.shape(), &[4, 1]);
        }
    }

    #[test]
    fn full_model_gradient_checks() {
        for spec in specs() {
            let r = gradient_check(&spec, 21, 1e-4).unwrap();
            assert!(r.passed, "{:?}: {r:?}", spec.kind);
            assert!(r.checked > r.skipped, "{:?}: {r:?}", spec.kind);
        }
        let r = gradient_check(&specs()[0], 21, 0.0).unwrap();
        assert!(!r.passed);
    }
}
