use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HeadConfig, HeadError, HeadVariant, TrainRecord, SIDE_HIDDEN_WIDTH};
use crate::lexicon::{ConceptLogits, N_CONCEPTS};
use crate::real::{sigmoid, Real};

/// Fully connected layer; `weights` is row-major `[n_out][n_in]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct DenseLayer<T: Real = f64> {
    pub name: String,
    pub n_in: usize,
    pub n_out: usize,
    pub weights: Vec<T>,
    pub biases: Vec<T>,
}

impl<T: Real> DenseLayer<T> {
    fn zeros(name: &str, n_in: usize, n_out: usize) -> Self {
        DenseLayer { name: name.into(), n_in, n_out, weights: vec![T::zero(); n_in * n_out], biases: vec![T::zero(); n_out] }
    }

    fn glorot<R: Rng>(name: &str, n_in: usize, n_out: usize, rng: &mut R) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let weights = (0..n_in * n_out).map(|_| T::lit(rng.random_range(-limit..=limit))).collect();
        DenseLayer { name: name.into(), n_in, n_out, weights, biases: vec![T::zero(); n_out] }
    }

    fn apply(&self, x: &[T]) -> Vec<T> {
        debug_assert_eq!(x.len(), self.n_in);
        (0..self.n_out)
            .map(|o| {
                let row = &self.weights[o * self.n_in..(o + 1) * self.n_in];
                row.iter().zip(x).fold(self.biases[o], |acc, (w, v)| acc + *w * *v)
            })
            .collect()
    }

    /// Accumulates `dW += dy x^T`, `db += dy`; returns `W^T dy` if asked.
    fn backward(&self, grad: &mut DenseLayer<T>, x: &[T], dy: &[T], want_dx: bool) -> Vec<T> {
        let mut dx = if want_dx { vec![T::zero(); self.n_in] } else { Vec::new() };
        for (o, &g) in dy.iter().enumerate() {
            if g == T::zero() {
                continue;
            }
            grad.biases[o] += g;
            let base = o * self.n_in;
            for i in 0..self.n_in {
                grad.weights[base + i] += g * x[i];
                if want_dx {
                    dx[i] += g * self.weights[base + i];
                }
            }
        }
        dx
    }
}

/// Head parameters, layer by layer in evaluation order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Deserialize<'de>", serialize = "T: Serialize"))]
pub struct HeadParams<T: Real = f64> {
    pub variant: HeadVariant,
    pub layers: Vec<DenseLayer<T>>,
}

/// `(name, n_in, n_out)` of every layer the config implies.
fn layout(config: &HeadConfig) -> Vec<(&'static str, usize, usize)> {
    let h = config.hidden_width;
    match config.variant {
        HeadVariant::Linear => vec![("output", N_CONCEPTS, 1)],
        HeadVariant::Nonlinear => vec![("hidden", N_CONCEPTS, h), ("output", h, 1)],
        HeadVariant::NonlinearSide => vec![
            ("side_hidden", config.side_feature_dim, SIDE_HIDDEN_WIDTH),
            ("side_output", SIDE_HIDDEN_WIDTH, 1),
            ("hidden", N_CONCEPTS + 1, h),
            ("output", h, 1),
        ],
    }
}

impl<T: Real> HeadParams<T> {
    pub fn zeros(config: &HeadConfig) -> Self {
        let layers = layout(config).into_iter().map(|(n, i, o)| DenseLayer::zeros(n, i, o)).collect();
        HeadParams { variant: config.variant, layers }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(config: &HeadConfig, rng: &mut R) -> Self {
        let layers = layout(config).into_iter().map(|(n, i, o)| DenseLayer::glorot(n, i, o, rng)).collect();
        HeadParams { variant: config.variant, layers }
    }

    /// Verifies layer names, shapes and finiteness against `config`.
    pub fn check(&self, config: &HeadConfig) -> Result<(), HeadError> {
        if self.variant != config.variant {
            return Err(HeadError::File(format!("parameters are for {} but config says {}", self.variant, config.variant)));
        }
        let expected = layout(config);
        if expected.len() != self.layers.len() {
            return Err(HeadError::Shape { what: "layer count".into(), expected: expected.len(), got: self.layers.len() });
        }
        for ((name, n_in, n_out), layer) in expected.into_iter().zip(&self.layers) {
            if layer.name != name {
                return Err(HeadError::File(format!("expected layer `{name}`, found `{}`", layer.name)));
            }
            let shape_err = |what: &str, expected: usize, got: usize| {
                Err(HeadError::Shape { what: format!("layer `{name}` {what}"), expected, got })
            };
            if layer.n_in != n_in {
                return shape_err("n_in", n_in, layer.n_in);
            }
            if layer.n_out != n_out {
                return shape_err("n_out", n_out, layer.n_out);
            }
            if layer.weights.len() != n_in * n_out {
                return shape_err("weights", n_in * n_out, layer.weights.len());
            }
            if layer.biases.len() != n_out {
                return shape_err("biases", n_out, layer.biases.len());
            }
            if layer.weights.iter().chain(&layer.biases).any(|v| !v.is_finite()) {
                return Err(HeadError::File(format!("layer `{name}` holds a non-finite parameter")));
            }
        }
        Ok(())
    }

    pub fn layer(&self, name: &str) -> Option<&DenseLayer<T>> {
        self.layers.iter().find(|l| l.name == name)
    }

    pub fn layer_mut(&mut self, name: &str) -> Option<&mut DenseLayer<T>> {
        self.layers.iter_mut().find(|l| l.name == name)
    }

    pub fn n_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// All parameters, layer by layer, weights before biases.
    pub fn flat(&self) -> Vec<T> {
        self.layers.iter().flat_map(|l| l.weights.iter().chain(&l.biases).copied()).collect()
    }

    pub fn flat_mut(&mut self) -> impl Iterator<Item = &mut T> {
        self.layers.iter_mut().flat_map(|l| l.weights.iter_mut().chain(l.biases.iter_mut()))
    }

    pub fn is_finite(&self) -> bool {
        self.layers.iter().all(|l| l.weights.iter().chain(&l.biases).all(|v| v.is_finite()))
    }

    fn get(&self, name: &str) -> &DenseLayer<T> {
        self.layer(name).expect("layer present for variant")
    }
}

struct Trace<T: Real> {
    side_hidden_pre: Vec<T>,
    side_hidden: Vec<T>,
    bottleneck: Vec<T>,
    hidden_pre: Vec<T>,
    hidden: Vec<T>,
    z: T,
}

fn relu<T: Real>(v: &[T]) -> Vec<T> {
    v.iter().map(|x| x.max(T::zero())).collect()
}

fn trace<T: Real>(
    params: &HeadParams<T>,
    config: &HeadConfig,
    logits: &ConceptLogits<T>,
    side: &[T],
) -> Result<Trace<T>, HeadError> {
    if params.variant != config.variant {
        return Err(HeadError::Config(format!("parameters are for {} but config says {}", params.variant, config.variant)));
    }
    let mut bottleneck: Vec<T> = if config.intermediate_sigmoid {
        logits.probabilities().to_vec()
    } else {
        logits.values().to_vec()
    };
    let mut t = Trace {
        side_hidden_pre: Vec::new(),
        side_hidden: Vec::new(),
        bottleneck: Vec::new(),
        hidden_pre: Vec::new(),
        hidden: Vec::new(),
        z: T::zero(),
    };
    if config.variant == HeadVariant::NonlinearSide {
        if side.len() != config.side_feature_dim {
            return Err(HeadError::Shape { what: "side_features".into(), expected: config.side_feature_dim, got: side.len() });
        }
        if side.iter().any(|v| !v.is_finite()) {
            return Err(HeadError::InvalidRecord("side_features must be finite".into()));
        }
        t.side_hidden_pre = params.get("side_hidden").apply(side);
        t.side_hidden = relu(&t.side_hidden_pre);
        bottleneck.push(params.get("side_output").apply(&t.side_hidden)[0]);
    }
    t.bottleneck = bottleneck;
    t.z = match config.variant {
        HeadVariant::Linear => params.get("output").apply(&t.bottleneck)[0],
        _ => {
            t.hidden_pre = params.get("hidden").apply(&t.bottleneck);
            t.hidden = relu(&t.hidden_pre);
            params.get("output").apply(&t.hidden)[0]
        }
    };
    Ok(t)
}

fn clamp_prob<T: Real>(p: T) -> T {
    let eps = T::prob_eps();
    p.max(eps).min(T::one() - eps)
}

/// Pre-sigmoid head output.
pub fn head_logit<T: Real>(params: &HeadParams<T>, config: &HeadConfig, record: &TrainRecord<T>) -> Result<T, HeadError> {
    Ok(trace(params, config, &record.concept_logits, &record.side_features)?.z)
}

pub(super) fn forward_parts<T: Real>(
    params: &HeadParams<T>,
    config: &HeadConfig,
    logits: &ConceptLogits<T>,
    side: &[T],
) -> Result<T, HeadError> {
    Ok(clamp_prob(sigmoid(trace(params, config, logits, side)?.z)))
}

/// Cancer probability, clamped into `[eps, 1 - eps]`.
pub fn forward<T: Real>(params: &HeadParams<T>, config: &HeadConfig, record: &TrainRecord<T>) -> Result<T, HeadError> {
    forward_parts(params, config, &record.concept_logits, &record.side_features)
}

/// [`forward`] over many records.
pub fn predict<T: Real>(params: &HeadParams<T>, config: &HeadConfig, records: &[TrainRecord<T>]) -> Result<Vec<T>, HeadError> {
    records.iter().map(|r| forward(params, config, r)).collect()
}

fn total_weight<T: Real>(batch: &[TrainRecord<T>]) -> Result<T, HeadError> {
    if batch.is_empty() {
        return Err(HeadError::EmptyData);
    }
    let mut total = T::zero();
    for r in batch {
        if !(r.weight >= T::zero() && r.weight.is_finite()) {
            return Err(HeadError::InvalidRecord(format!("record weight {} must be finite and non-negative", r.weight)));
        }
        total += r.weight;
    }
    if total <= T::zero() {
        return Err(HeadError::InvalidRecord("record weights sum to zero".into()));
    }
    Ok(total)
}

/// Weighted mean binary cross-entropy with clamped probabilities.
pub fn loss<T: Real>(params: &HeadParams<T>, config: &HeadConfig, batch: &[TrainRecord<T>]) -> Result<T, HeadError> {
    let total = total_weight(batch)?;
    let mut sum = T::zero();
    for r in batch {
        let p = forward(params, config, r)?;
        let l = if r.cancer_label { -p.ln() } else { -(T::one() - p).ln() };
        sum += r.weight * l;
    }
    Ok(sum / total)
}

/// Exact gradient of [`loss`] with respect to every parameter.
///
/// Where the probability clamp is active the loss is flat, so those records
/// contribute nothing.
pub fn gradient<T: Real>(params: &HeadParams<T>, config: &HeadConfig, batch: &[TrainRecord<T>]) -> Result<HeadParams<T>, HeadError> {
    let total = total_weight(batch)?;
    let mut grad = HeadParams::zeros(config);
    let eps = T::prob_eps();
    let idx = |name: &str| grad.layers.iter().position(|l| l.name == name).expect("layer present");
    let (i_out, i_hidden) = (idx("output"), grad.layers.iter().position(|l| l.name == "hidden"));
    let side_idx = (grad.layers.iter().position(|l| l.name == "side_hidden"), grad.layers.iter().position(|l| l.name == "side_output"));
    for r in batch {
        let t = trace(params, config, &r.concept_logits, &r.side_features)?;
        let p = sigmoid(t.z);
        if p < eps || p > T::one() - eps {
            continue;
        }
        let y = if r.cancer_label { T::one() } else { T::zero() };
        let dz = (p - y) * r.weight / total;
        let d_bottleneck = match i_hidden {
            None => params.layers[i_out].backward(&mut grad.layers[i_out], &t.bottleneck, &[dz], true),
            Some(ih) => {
                let dh = params.layers[i_out].backward(&mut grad.layers[i_out], &t.hidden, &[dz], true);
                let dpre: Vec<T> =
                    dh.iter().zip(&t.hidden_pre).map(|(g, pre)| if *pre > T::zero() { *g } else { T::zero() }).collect();
                let want = config.variant == HeadVariant::NonlinearSide;
                params.layers[ih].backward(&mut grad.layers[ih], &t.bottleneck, &dpre, want)
            }
        };
        if let (Some(ish), Some(iso)) = side_idx {
            let ds = d_bottleneck[N_CONCEPTS];
            let dsh = params.layers[iso].backward(&mut grad.layers[iso], &t.side_hidden, &[ds], true);
            let dspre: Vec<T> =
                dsh.iter().zip(&t.side_hidden_pre).map(|(g, pre)| if *pre > T::zero() { *g } else { T::zero() }).collect();
            params.layers[ish].backward(&mut grad.layers[ish], &r.side_features, &dspre, false);
        }
    }
    Ok(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rec(c: [f64; 5], side: Vec<f64>, y: bool) -> TrainRecord {
        TrainRecord::new(ConceptLogits::new(c).unwrap(), side, y)
    }

    fn config(variant: HeadVariant) -> HeadConfig {
        HeadConfig { variant, hidden_width: 64, side_feature_dim: 3, ..HeadConfig::default() }
    }

    #[test]
    fn zero_linear_head_is_half() {
        let c = config(HeadVariant::Linear);
        let p = HeadParams::<f64>::zeros(&c);
        assert_eq!(forward(&p, &c, &rec([3.0, -1.0, 0.2, 9.0, -4.0], vec![], true)).unwrap(), 0.5);
    }

    #[test]
    fn linear_worked_example() {
        let c = config(HeadVariant::Linear);
        let mut p = HeadParams::<f64>::zeros(&c);
        p.layers[0].weights = vec![0.5; 5];
        let r = rec([1.0; 5], vec![], true);
        let prob = forward(&p, &c, &r).unwrap();
        assert!((prob - 0.9241418199787566).abs() < 1e-15);
        let l = loss(&p, &c, std::slice::from_ref(&r)).unwrap();
        assert!((l - 0.07888973429254952).abs() < 1e-12);
        // dL/db = p - y on a single record
        let g = gradient(&p, &c, &[r]).unwrap();
        assert!((g.layers[0].biases[0] - (prob - 1.0)).abs() < 1e-15);
    }

    #[test]
    fn loss_reference_values() {
        let c = config(HeadVariant::Linear);
        let p = HeadParams::<f64>::zeros(&c);
        let batch = [rec([1.0; 5], vec![], true), rec([-1.0; 5], vec![], false)];
        assert!((loss(&p, &c, &batch).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
        let mut sure = p.clone();
        sure.layers[0].weights = vec![100.0; 5];
        assert!(loss(&sure, &c, &batch).unwrap() <= 1e-11);
        assert!(matches!(loss(&p, &c, &[]), Err(HeadError::EmptyData)));
    }

    #[test]
    fn symmetric_batch_has_zero_weight_gradient() {
        let c = config(HeadVariant::Linear);
        let p = HeadParams::<f64>::zeros(&c);
        let batch = [rec([0.7, -0.3, 1.1, 0.0, 2.0], vec![], true), rec([0.7, -0.3, 1.1, 0.0, 2.0], vec![], false)];
        let g = gradient(&p, &c, &batch).unwrap();
        assert!(g.flat().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn side_variant_with_zero_side_output_matches_nonlinear_on_zero_node() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let cs = config(HeadVariant::NonlinearSide);
        let mut ps = HeadParams::<f64>::init(&cs, &mut rng);
        let so = ps.layer_mut("side_output").unwrap();
        so.weights.iter_mut().for_each(|w| *w = 0.0);
        so.biases[0] = 0.0;
        let cn = config(HeadVariant::Nonlinear);
        let hidden = ps.layer("hidden").unwrap();
        let mut pn = HeadParams::<f64>::zeros(&cn);
        let h = pn.layer_mut("hidden").unwrap();
        for o in 0..64 {
            h.weights[o * 5..o * 5 + 5].copy_from_slice(&hidden.weights[o * 6..o * 6 + 5]);
        }
        h.biases = hidden.biases.clone();
        *pn.layer_mut("output").unwrap() = ps.layer("output").unwrap().clone();
        let r = rec([0.3, -1.2, 2.0, 0.1, -0.4], vec![1.0, -2.0, 0.5], true);
        assert_eq!(forward(&ps, &cs, &r).unwrap(), forward(&pn, &cn, &r).unwrap());
    }

    #[test]
    fn shape_errors() {
        let c = config(HeadVariant::NonlinearSide);
        let p = HeadParams::<f64>::zeros(&c);
        assert!(matches!(forward(&p, &c, &rec([0.0; 5], vec![1.0], true)), Err(HeadError::Shape { .. })));
        let mut bad = p.clone();
        bad.layers[2].weights.pop();
        assert!(bad.check(&c).is_err());
        assert!(p.check(&c).is_ok());
    }

    #[test]
    fn scaling_linear_head_preserves_order() {
        let c = config(HeadVariant::Linear);
        let mut p = HeadParams::<f64>::zeros(&c);
        p.layers[0].weights = vec![0.4, -0.2, 0.9, 0.1, 0.3];
        p.layers[0].biases = vec![-0.5];
        let recs: Vec<_> = (0..20).map(|i| rec([i as f64 * 0.1, -0.3 * i as f64, (i % 3) as f64, 1.0, -(i as f64)], vec![], true)).collect();
        let order = |p: &HeadParams| {
            let s = predict(p, &c, &recs).unwrap();
            crate::geometry::score_order(&s)
        };
        let mut scaled = p.clone();
        scaled.flat_mut().for_each(|v| *v *= 2.5);
        assert_eq!(order(&p), order(&scaled));
    }

    #[test]
    fn f32_forward() {
        let c = config(HeadVariant::Nonlinear);
        let p = HeadParams::<f32>::init(&c, &mut ChaCha8Rng::seed_from_u64(1));
        let r = TrainRecord::new(ConceptLogits::new([0.5f32; 5]).unwrap(), vec![], true);
        let v = forward(&p, &c, &r).unwrap();
        assert!(v > 0.0 && v < 1.0);
    }
}
