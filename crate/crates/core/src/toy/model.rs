use std::ops::Range;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class sigmoid classifier: linear, or one tanh hidden layer.
///
/// All parameters live in one flat vector so the optimizer and finite
/// difference checks can treat them uniformly. Layout: `W1 (in x h)`, `b1`,
/// then `W2 (h x C)`, `b2` (the hidden pair is absent for the linear model).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToyClassifier {
    inputs: usize,
    hidden: Option<usize>,
    classes: usize,
    params: Vec<f64>,
}

/// Activations kept from the forward pass for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    hidden: Option<Array2<f64>>,
    pub scores: Array2<f64>,
}

#[derive(Debug, Clone)]
struct Layer {
    weights: Range<usize>,
    bias: Range<usize>,
    inputs: usize,
    outputs: usize,
}

const MAX_SCORE: f64 = 1.0 - f64::EPSILON / 2.0;

fn sigmoid(z: f64) -> f64 {
    let p = if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    };
    p.clamp(f64::MIN_POSITIVE, MAX_SCORE)
}

impl ToyClassifier {
    /// Linear model with zero-initialized weights.
    pub fn linear(inputs: usize, classes: usize) -> Self {
        Self {
            inputs,
            hidden: None,
            classes,
            params: vec![0.0; inputs * classes + classes],
        }
    }

    /// One hidden tanh layer, Xavier-style Gaussian init, zero biases.
    pub fn mlp<R: Rng>(inputs: usize, hidden: usize, classes: usize, rng: &mut R) -> Self {
        let mut model = Self {
            inputs,
            hidden: Some(hidden),
            classes,
            params: vec![0.0; inputs * hidden + hidden + hidden * classes + classes],
        };
        for layer in model.layers() {
            let scale = (2.0 / (layer.inputs + layer.outputs) as f64).sqrt();
            for w in &mut model.params[layer.weights.clone()] {
                *w = scale * rng.sample::<f64, _>(StandardNormal);
            }
        }
        model
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    fn layers(&self) -> Vec<Layer> {
        let mut dims = vec![self.inputs];
        dims.extend(self.hidden);
        dims.push(self.classes);
        let mut offset = 0;
        dims.windows(2)
            .map(|w| {
                let (i, o) = (w[0], w[1]);
                let layer = Layer {
                    weights: offset..offset + i * o,
                    bias: offset + i * o..offset + i * o + o,
                    inputs: i,
                    outputs: o,
                };
                offset = layer.bias.end;
                layer
            })
            .collect()
    }

    fn weights(&self, layer: &Layer) -> ArrayView2<'_, f64> {
        ArrayView2::from_shape(
            (layer.inputs, layer.outputs),
            &self.params[layer.weights.clone()],
        )
        .expect("layout matches")
    }

    fn bias(&self, layer: &Layer) -> ArrayView1<'_, f64> {
        ArrayView1::from(&self.params[layer.bias.clone()])
    }

    fn check_input(&self, x: &ArrayView2<'_, f64>) -> Result<()> {
        if x.ncols() != self.inputs {
            return Err(Error::shape(
                format!("{} feature columns", self.inputs),
                format!("{}", x.ncols()),
            ));
        }
        Ok(())
    }

    pub fn logits(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        self.check_input(&x)?;
        let layers = self.layers();
        let mut act = x.to_owned();
        for (k, layer) in layers.iter().enumerate() {
            act = act.dot(&self.weights(layer)) + self.bias(layer);
            if k + 1 < layers.len() {
                act.mapv_inplace(f64::tanh);
            }
        }
        Ok(act)
    }

    /// Per-class sigmoid scores, each strictly inside (0, 1).
    pub fn forward(&self, x: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        Ok(self.forward_cached(x)?.scores)
    }

    pub fn forward_cached(&self, x: ArrayView2<'_, f64>) -> Result<ForwardCache> {
        self.check_input(&x)?;
        let layers = self.layers();
        let out = layers.last().expect("at least one layer");
        let hidden = match layers.first() {
            Some(first) if layers.len() == 2 => {
                let z = x.dot(&self.weights(first)) + self.bias(first);
                Some(z.mapv(f64::tanh))
            }
            _ => None,
        };
        let last_in = hidden.as_ref().map_or(x, |h| h.view());
        let scores = (last_in.dot(&self.weights(out)) + self.bias(out)).mapv(sigmoid);
        Ok(ForwardCache { hidden, scores })
    }

    /// Gradient of a scalar loss with respect to every parameter, given
    /// `grad_scores = dL/dscores` for the batch in `cache`.
    pub fn backward(
        &self,
        x: ArrayView2<'_, f64>,
        cache: &ForwardCache,
        grad_scores: ArrayView2<'_, f64>,
    ) -> Result<Vec<f64>> {
        self.check_input(&x)?;
        if grad_scores.dim() != cache.scores.dim() {
            return Err(Error::shape(
                format!("{:?}", cache.scores.dim()),
                format!("{:?}", grad_scores.dim()),
            ));
        }
        let mut grads = vec![0.0; self.params.len()];
        self.accumulate_backward(x, cache, grad_scores, &mut grads);
        Ok(grads)
    }

    pub(crate) fn accumulate_backward(
        &self,
        x: ArrayView2<'_, f64>,
        cache: &ForwardCache,
        grad_scores: ArrayView2<'_, f64>,
        grads: &mut [f64],
    ) {
        let layers = self.layers();
        let out = layers.last().expect("at least one layer");
        let dz: Array2<f64> = &grad_scores * &cache.scores.mapv(|p| p * (1.0 - p));
        let last_in = cache.hidden.as_ref().map_or(x, |h| h.view());
        add_into(&mut grads[out.weights.clone()], &last_in.t().dot(&dz));
        add_into(&mut grads[out.bias.clone()], &dz.sum_axis(Axis(0)));
        if let (Some(h), Some(first)) = (
            cache.hidden.as_ref(),
            layers.first().filter(|_| layers.len() == 2),
        ) {
            let dh = dz.dot(&self.weights(out).t());
            let dzh: Array2<f64> = &dh * &h.mapv(|a| 1.0 - a * a);
            add_into(&mut grads[first.weights.clone()], &x.t().dot(&dzh));
            add_into(&mut grads[first.bias.clone()], &dzh.sum_axis(Axis(0)));
        }
    }
}

fn add_into<D: ndarray::Dimension>(dst: &mut [f64], src: &ndarray::Array<f64, D>) {
    // src is freshly computed and in standard layout
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d += s;
    }
}

/// Helper for tests and callers: scores for one sample.
pub fn score_row(model: &ToyClassifier, x: ArrayView1<'_, f64>) -> Result<Array1<f64>> {
    let x2 = x.insert_axis(Axis(0));
    Ok(model.forward(x2)?.row(0).to_owned())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_weights_score_half() {
        let m = ToyClassifier::linear(4, 3);
        let s = m.forward(Array2::from_elem((2, 4), 1.3).view()).unwrap();
        assert!(s.iter().all(|&p| p == 0.5));
    }

    #[test]
    fn saturation_stays_inside_unit_interval() {
        let mut m = ToyClassifier::linear(1, 2);
        m.params_mut()[0] = 1e6;
        m.params_mut()[1] = -1e6;
        let s = score_row(&m, ndarray::arr1(&[1.0]).view()).unwrap();
        assert!(s[0] < 1.0 && s[0] > 1.0 - 1e-15);
        assert!(s[1] > 0.0 && s[1] < 1e-300);
    }

    #[test]
    fn dimension_mismatch() {
        let m = ToyClassifier::linear(4, 3);
        assert!(matches!(
            m.forward(Array2::zeros((2, 5)).view()),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    /// Central finite differences of sum(scores * weights) against backward.
    fn check_gradients(model: &mut ToyClassifier, x: &Array2<f64>, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probe =
            Array2::from_shape_fn((x.nrows(), model.classes()), |_| rng.random::<f64>() - 0.5);
        let objective = |m: &ToyClassifier| (m.forward(x.view()).unwrap() * &probe).sum();
        let cache = model.forward_cached(x.view()).unwrap();
        let analytic = model.backward(x.view(), &cache, probe.view()).unwrap();
        let h = 1e-6;
        for k in 0..model.params().len() {
            let orig = model.params()[k];
            model.params_mut()[k] = orig + h;
            let up = objective(model);
            model.params_mut()[k] = orig - h;
            let down = objective(model);
            model.params_mut()[k] = orig;
            let fd = (up - down) / (2.0 * h);
            let rel = (analytic[k] - fd).abs() / analytic[k].abs().max(fd.abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: analytic {} fd {fd}", analytic[k]);
        }
    }

    #[test]
    fn linear_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut m = ToyClassifier::linear(5, 3);
        m.params_mut()
            .iter_mut()
            .for_each(|p| *p = rng.random::<f64>() - 0.5);
        let x = Array2::from_shape_fn((7, 5), |_| rng.random::<f64>() * 2.0 - 1.0);
        check_gradients(&mut m, &x, 2);
    }

    #[test]
    fn mlp_gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut m = ToyClassifier::mlp(4, 6, 3, &mut rng);
        let x = Array2::from_shape_fn((5, 4), |_| rng.random::<f64>() * 2.0 - 1.0);
        check_gradients(&mut m, &x, 4);
    }
}
