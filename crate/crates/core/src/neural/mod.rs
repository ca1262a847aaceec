//! Dense ReLU networks with analytic backpropagation.
//!
//! Weights are stored `(out, in)` per layer; batches are row-major
//! `(batch, features)`. Two heads exist: a linear Q-value head trained with a
//! squared TD error, and a log-softmax classification head trained with
//! negative log-likelihood.

mod checkpoint;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CheckpointMetadata, CHECKPOINT_SCHEMA_VERSION};

use ndarray::{Array1, Array2, ArrayView2, Axis, Zip};
use rand::distributions::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Head {
    #[serde(rename = "q")]
    QValues,
    #[serde(rename = "logsoftmax")]
    LogSoftmax,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    weights: Vec<Array2<f64>>,
    biases: Vec<Array1<f64>>,
    head: Head,
}

/// Parameter-shaped gradients (or any parameter-shaped buffer).
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Array2<f64>>,
    pub biases: Vec<Array1<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            weights: net.weights.iter().map(|w| Array2::zeros(w.raw_dim())).collect(),
            biases: net.biases.iter().map(|b| Array1::zeros(b.raw_dim())).collect(),
        }
    }

    fn first_non_finite_layer(&self) -> Option<usize> {
        self.weights
            .iter()
            .zip(&self.biases)
            .position(|(w, b)| w.iter().chain(b.iter()).any(|x| !x.is_finite()))
    }
}

struct ForwardCache {
    /// Inputs to each layer; `activations[0]` is the batch itself.
    activations: Vec<Array2<f64>>,
    /// Raw output of the last layer, before any head transform.
    logits: Array2<f64>,
}

fn log_softmax_rows(z: &mut Array2<f64>) {
    for mut row in z.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &x| m.max(x));
        let log_sum = row.iter().map(|&x| (x - max).exp()).sum::<f64>().ln() + max;
        row.mapv_inplace(|x| x - log_sum);
    }
}

impl Mlp {
    /// He-uniform weights (bound `sqrt(6 / fan_in)`), zero biases.
    pub fn init(layer_sizes: &[usize], head: Head, seed: u64) -> Result<Self> {
        if layer_sizes.len() < 3 {
            return Err(Error::Shape(format!(
                "need input, at least one hidden and an output layer, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::Shape(format!("zero-width layer in {layer_sizes:?}")));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_sizes.len() - 1);
        let mut biases = Vec::with_capacity(layer_sizes.len() - 1);
        for pair in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            weights.push(Array2::from_shape_simple_fn((fan_out, fan_in), || {
                dist.sample(&mut rng)
            }));
            biases.push(Array1::zeros(fan_out));
        }
        Ok(Self {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            head,
        })
    }

    /// Builds a network from explicit parameters, checking shapes.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Array2<f64>>,
        biases: Vec<Array1<f64>>,
        head: Head,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::Shape("layer count mismatch".into()));
        }
        for (i, pair) in layer_sizes.windows(2).enumerate() {
            if weights[i].dim() != (pair[1], pair[0]) || biases[i].len() != pair[1] {
                return Err(Error::Shape(format!("layer {i} does not match sizes {pair:?}")));
            }
        }
        if weights
            .iter()
            .flatten()
            .chain(biases.iter().flatten())
            .any(|x| !x.is_finite())
        {
            return Err(Error::Shape("non-finite parameter".into()));
        }
        Ok(Self {
            layer_sizes,
            weights,
            biases,
            head,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_width(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_width(&self) -> usize {
        *self.layer_sizes.last().expect("non-empty")
    }

    pub fn head(&self) -> Head {
        self.head
    }

    pub fn weights(&self) -> &[Array2<f64>] {
        &self.weights
    }

    pub fn biases(&self) -> &[Array1<f64>] {
        &self.biases
    }

    pub fn weights_mut(&mut self) -> &mut [Array2<f64>] {
        &mut self.weights
    }

    pub fn biases_mut(&mut self) -> &mut [Array1<f64>] {
        &mut self.biases
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.iter().map(|w| w.len()).sum::<usize>() + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    fn check_batch(&self, inputs: &ArrayView2<f64>) -> Result<()> {
        if inputs.ncols() != self.input_width() {
            return Err(Error::Shape(format!(
                "input width {} does not match network input {}",
                inputs.ncols(),
                self.input_width()
            )));
        }
        Ok(())
    }

    fn forward_cached(&self, inputs: ArrayView2<f64>) -> ForwardCache {
        let last = self.weights.len() - 1;
        let mut activations = Vec::with_capacity(self.weights.len());
        let mut current = inputs.to_owned();
        for (i, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = current.dot(&w.t());
            z += b;
            activations.push(current);
            if i == last {
                return ForwardCache { activations, logits: z };
            }
            z.mapv_inplace(|x| x.max(0.0));
            current = z;
        }
        unreachable!("network has at least one layer")
    }

    /// Head outputs for a batch of inputs.
    pub fn forward_batch(&self, inputs: ArrayView2<f64>) -> Result<Array2<f64>> {
        self.check_batch(&inputs)?;
        let mut out = self.forward_cached(inputs).logits;
        if self.head == Head::LogSoftmax {
            log_softmax_rows(&mut out);
        }
        Ok(out)
    }

    pub fn forward(&self, features: &[f64]) -> Result<Vec<f64>> {
        let view = ArrayView2::from_shape((1, features.len()), features).expect("contiguous slice");
        Ok(self.forward_batch(view)?.into_raw_vec_and_offset().0)
    }

    /// Index of the largest output; ties go to the lowest index.
    pub fn argmax(&self, features: &[f64]) -> Result<usize> {
        Ok(argmax(&self.forward(features)?))
    }

    fn backward(&self, cache: &ForwardCache, mut delta: Array2<f64>) -> Gradients {
        let n = self.weights.len();
        let mut grads = Gradients::zeros_like(self);
        for layer in (0..n).rev() {
            let input = &cache.activations[layer];
            grads.weights[layer] = delta.t().dot(input);
            grads.biases[layer] = delta.sum_axis(Axis(0));
            if layer > 0 {
                let mut upstream = delta.dot(&self.weights[layer]);
                // `input` is the ReLU output of the previous layer, so its
                // positive entries mark the active units.
                Zip::from(&mut upstream).and(input).for_each(|d, &a| {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                });
                delta = upstream;
            }
        }
        grads
    }

    /// Mean squared TD error on the chosen actions, and its gradient.
    ///
    /// `targets` are held fixed; only `Q(s, a)` is differentiated.
    pub fn dqn_loss_and_gradient(
        &self,
        inputs: ArrayView2<f64>,
        actions: &[usize],
        targets: &[f64],
    ) -> Result<(f64, Gradients)> {
        self.check_batch(&inputs)?;
        if self.head != Head::QValues {
            return Err(Error::Shape("TD loss requires a Q-value head".into()));
        }
        let batch = inputs.nrows();
        if actions.len() != batch || targets.len() != batch || batch == 0 {
            return Err(Error::Shape(format!(
                "batch of {batch} inputs with {} actions and {} targets",
                actions.len(),
                targets.len()
            )));
        }
        if let Some(&a) = actions.iter().find(|&&a| a >= self.output_width()) {
            return Err(Error::InvalidAction(a));
        }
        let cache = self.forward_cached(inputs);
        let scale = 1.0 / batch as f64;
        let mut delta = Array2::zeros(cache.logits.raw_dim());
        let mut loss = 0.0;
        for (i, (&a, &y)) in actions.iter().zip(targets).enumerate() {
            let diff = y - cache.logits[(i, a)];
            loss += diff * diff;
            delta[(i, a)] = -2.0 * diff * scale;
        }
        Ok((loss * scale, self.backward(&cache, delta)))
    }

    /// Mean negative log-likelihood of `labels` under the log-softmax head.
    pub fn nll_loss_and_gradient(&self, inputs: ArrayView2<f64>, labels: &[usize]) -> Result<(f64, Gradients)> {
        self.check_batch(&inputs)?;
        if self.head != Head::LogSoftmax {
            return Err(Error::Shape("NLL loss requires a log-softmax head".into()));
        }
        let batch = inputs.nrows();
        if labels.len() != batch || batch == 0 {
            return Err(Error::Shape(format!(
                "batch of {batch} inputs with {} labels",
                labels.len()
            )));
        }
        if let Some(&a) = labels.iter().find(|&&a| a >= self.output_width()) {
            return Err(Error::InvalidAction(a));
        }
        let cache = self.forward_cached(inputs);
        let mut log_probs = cache.logits.clone();
        log_softmax_rows(&mut log_probs);
        let scale = 1.0 / batch as f64;
        let mut loss = 0.0;
        let mut delta = log_probs.mapv(|lp| lp.exp() * scale);
        for (i, &y) in labels.iter().enumerate() {
            loss -= log_probs[(i, y)];
            delta[(i, y)] -= scale;
        }
        Ok((loss * scale, self.backward(&cache, delta)))
    }

    fn check_same_shape(&self, other: &Mlp) -> Result<()> {
        if self.layer_sizes != other.layer_sizes {
            return Err(Error::Shape(format!(
                "layer sizes {:?} and {:?} differ",
                self.layer_sizes, other.layer_sizes
            )));
        }
        Ok(())
    }

    /// `params -= learning_rate * gradients`.
    pub fn sgd_step(&mut self, grads: &Gradients, learning_rate: f64) -> Result<()> {
        if grads.weights.len() != self.weights.len()
            || grads.weights.iter().zip(&self.weights).any(|(g, w)| g.dim() != w.dim())
            || grads.biases.iter().zip(&self.biases).any(|(g, b)| g.dim() != b.dim())
        {
            return Err(Error::Shape("gradient shapes do not match parameters".into()));
        }
        if let Some(layer) = grads.first_non_finite_layer() {
            return Err(Error::NonFiniteGradient { layer });
        }
        for (w, g) in self.weights.iter_mut().zip(&grads.weights) {
            w.scaled_add(-learning_rate, g);
        }
        for (b, g) in self.biases.iter_mut().zip(&grads.biases) {
            b.scaled_add(-learning_rate, g);
        }
        Ok(())
    }

    /// Overwrites `self` with the parameters of `source`.
    pub fn copy_from(&mut self, source: &Mlp) -> Result<()> {
        self.check_same_shape(source)?;
        if self.head != source.head {
            return Err(Error::Shape("head kinds differ".into()));
        }
        for (dst, src) in self.weights.iter_mut().zip(&source.weights) {
            dst.assign(src);
        }
        for (dst, src) in self.biases.iter_mut().zip(&source.biases) {
            dst.assign(src);
        }
        Ok(())
    }
}

/// Lowest index of the maximum; NaN entries never win.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain mini-batch gradient descent.
    #[default]
    Sgd,
    Adam {
        beta1: f64,
        beta2: f64,
        epsilon: f64,
    },
}

impl OptimizerKind {
    pub fn adam() -> Self {
        OptimizerKind::Adam {
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Applies gradients with the configured update rule, holding any moment state.
#[derive(Clone, Debug)]
pub struct Optimizer {
    kind: OptimizerKind,
    learning_rate: f64,
    moments: Option<(Gradients, Gradients)>,
    steps: i32,
}

impl Optimizer {
    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Self {
        Self {
            kind,
            learning_rate,
            moments: None,
            steps: 0,
        }
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &Gradients) -> Result<()> {
        match self.kind {
            OptimizerKind::Sgd => net.sgd_step(grads, self.learning_rate),
            OptimizerKind::Adam { beta1, beta2, epsilon } => {
                if let Some(layer) = grads.first_non_finite_layer() {
                    return Err(Error::NonFiniteGradient { layer });
                }
                let (m, v) = self
                    .moments
                    .get_or_insert_with(|| (Gradients::zeros_like(net), Gradients::zeros_like(net)));
                self.steps += 1;
                let c1 = 1.0 - beta1.powi(self.steps);
                let c2 = 1.0 - beta2.powi(self.steps);
                let lr = self.learning_rate;
                let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    *p -= lr * (*m / c1) / ((*v / c2).sqrt() + epsilon);
                };
                for layer in 0..net.weights.len() {
                    Zip::from(&mut net.weights[layer])
                        .and(&grads.weights[layer])
                        .and(&mut m.weights[layer])
                        .and(&mut v.weights[layer])
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                    Zip::from(&mut net.biases[layer])
                        .and(&grads.biases[layer])
                        .and(&mut m.biases[layer])
                        .and(&mut v.biases[layer])
                        .for_each(|p, &g, m, v| update(p, g, m, v));
                }
                Ok(())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use rand::Rng;

    #[test]
    fn init_is_deterministic_with_zero_biases() {
        let a = Mlp::init(&[8, 32, 64, 32, 27], Head::QValues, 7).unwrap();
        let b = Mlp::init(&[8, 32, 64, 32, 27], Head::QValues, 7).unwrap();
        assert_eq!(a, b);
        assert!(a.biases().iter().flatten().all(|&x| x == 0.0));
        let bound = (6.0f64 / 8.0).sqrt();
        assert!(a.weights()[0].iter().all(|w| w.abs() <= bound));
        let c = Mlp::init(&[8, 32, 64, 32, 27], Head::QValues, 8).unwrap();
        assert_ne!(a, c);

        let deep = Mlp::init(&[11, 44, 88, 176, 88, 44, 27], Head::LogSoftmax, 7).unwrap();
        assert_eq!(deep.weights().len(), 6);
        assert_eq!(deep.weights()[2].dim(), (176, 88));
    }

    #[test]
    fn init_rejects_bad_layouts() {
        assert!(Mlp::init(&[8, 27], Head::QValues, 0).is_err());
        assert!(Mlp::init(&[8, 0, 27], Head::QValues, 0).is_err());
    }

    #[test]
    fn zero_weights_give_zero_output() {
        let mut net = Mlp::init(&[3, 4, 5], Head::QValues, 1).unwrap();
        net.weights_mut().iter_mut().for_each(|w| w.fill(0.0));
        assert_eq!(net.forward(&[1.0, -2.0, 3.0]).unwrap(), vec![0.0; 5]);
        assert!(net.forward(&[1.0, 2.0]).is_err());
    }

    #[test]
    fn log_softmax_outputs_normalize() {
        let net = Mlp::init(&[8, 16, 27], Head::LogSoftmax, 3).unwrap();
        let out = net.forward(&[0.3, -1.0, 2.0, 0.0, 5.0, 0.1, 0.2, -0.7]).unwrap();
        let total: f64 = out.iter().map(|x| x.exp()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn relu_clamps_negative_preactivation() {
        // One hidden unit: h = relu(x), out = 2h + 1.
        let net = Mlp::from_parts(
            vec![1, 1, 1],
            vec![array![[1.0]], array![[2.0]]],
            vec![array![0.0], array![1.0]],
            Head::QValues,
        )
        .unwrap();
        assert_eq!(net.forward(&[3.0]).unwrap(), vec![7.0]);
        assert_eq!(net.forward(&[-3.0]).unwrap(), vec![1.0]);
    }

    #[test]
    fn argmax_prefers_lowest_index_on_ties() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[0.0; 27]), 0);
    }

    fn random_net(sizes: &[usize], head: Head, rng: &mut ChaCha8Rng) -> Mlp {
        let mut net = Mlp::init(sizes, head, rng.gen()).unwrap();
        for b in net.biases_mut() {
            b.mapv_inplace(|_| rng.gen_range(-0.5..0.5));
        }
        net
    }

    fn random_inputs(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
        Array2::from_shape_simple_fn((rows, cols), || rng.gen_range(-1.0..1.0))
    }

    // Loss oracles written directly from the definitions, using forward passes only.
    fn td_loss(net: &Mlp, x: &Array2<f64>, actions: &[usize], targets: &[f64]) -> f64 {
        let q = net.forward_batch(x.view()).unwrap();
        actions
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (&a, &y))| (y - q[(i, a)]).powi(2))
            .sum::<f64>()
            / actions.len() as f64
    }

    fn nll(net: &Mlp, x: &Array2<f64>, labels: &[usize]) -> f64 {
        let lp = net.forward_batch(x.view()).unwrap();
        -labels.iter().enumerate().map(|(i, &y)| lp[(i, y)]).sum::<f64>() / labels.len() as f64
    }

    fn check_gradient(net: &Mlp, analytic: &Gradients, loss: impl Fn(&Mlp) -> f64) -> f64 {
        let h = 1e-5;
        let mut worst: f64 = 0.0;
        let mut probe = net.clone();
        for layer in 0..net.weights().len() {
            for idx in 0..net.weights()[layer].len() {
                let orig = net.weights()[layer].as_slice().unwrap()[idx];
                probe.weights_mut()[layer].as_slice_mut().unwrap()[idx] = orig + h;
                let up = loss(&probe);
                probe.weights_mut()[layer].as_slice_mut().unwrap()[idx] = orig - h;
                let down = loss(&probe);
                probe.weights_mut()[layer].as_slice_mut().unwrap()[idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let exact = analytic.weights[layer].as_slice().unwrap()[idx];
                worst = worst.max((numeric - exact).abs() / numeric.abs().max(exact.abs()).max(1e-6));
            }
            for idx in 0..net.biases()[layer].len() {
                let orig = net.biases()[layer][idx];
                probe.biases_mut()[layer][idx] = orig + h;
                let up = loss(&probe);
                probe.biases_mut()[layer][idx] = orig - h;
                let down = loss(&probe);
                probe.biases_mut()[layer][idx] = orig;
                let numeric = (up - down) / (2.0 * h);
                let exact = analytic.biases[layer][idx];
                worst = worst.max((numeric - exact).abs() / numeric.abs().max(exact.abs()).max(1e-6));
            }
        }
        worst
    }

    #[test]
    fn td_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let net = random_net(&[11, 8, 8, 27], Head::QValues, &mut rng);
        let x = random_inputs(5, 11, &mut rng);
        let actions: Vec<usize> = (0..5).map(|_| rng.gen_range(0..27)).collect();
        let targets: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let (loss, grads) = net.dqn_loss_and_gradient(x.view(), &actions, &targets).unwrap();
        assert!((loss - td_loss(&net, &x, &actions, &targets)).abs() < 1e-12);
        let err = check_gradient(&net, &grads, |n| td_loss(n, &x, &actions, &targets));
        assert!(err < 1e-4, "relative error {err:.3e}");
    }

    #[test]
    fn nll_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let net = random_net(&[8, 8, 8, 27], Head::LogSoftmax, &mut rng);
        let x = random_inputs(6, 8, &mut rng);
        let labels: Vec<usize> = (0..6).map(|_| rng.gen_range(0..27)).collect();
        let (loss, grads) = net.nll_loss_and_gradient(x.view(), &labels).unwrap();
        assert!((loss - nll(&net, &x, &labels)).abs() < 1e-12);
        let err = check_gradient(&net, &grads, |n| nll(n, &x, &labels));
        assert!(err < 1e-4, "relative error {err:.3e}");
    }

    #[test]
    fn td_loss_edge_cases() {
        let net = Mlp::init(&[4, 6, 27], Head::QValues, 5).unwrap();
        let x = array![[0.1, 0.2, 0.3, 0.4]];
        let q = net.forward(x.row(0).as_slice().unwrap()).unwrap();
        let (loss, grads) = net.dqn_loss_and_gradient(x.view(), &[4], &[q[4]]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads
            .weights
            .iter()
            .flatten()
            .chain(grads.biases.iter().flatten())
            .all(|&g| g == 0.0));

        let (loss, _) = net.dqn_loss_and_gradient(x.view(), &[4], &[q[4] + 1.5]).unwrap();
        assert!((loss - 2.25).abs() < 1e-12);
    }

    #[test]
    fn nll_edge_cases() {
        // Zero weights give a uniform prediction over 27 classes.
        let mut net = Mlp::init(&[4, 6, 27], Head::LogSoftmax, 5).unwrap();
        net.weights_mut().iter_mut().for_each(|w| w.fill(0.0));
        let x = array![[0.1, 0.2, 0.3, 0.4], [1.0, 0.0, -1.0, 0.5]];
        let (loss, _) = net.nll_loss_and_gradient(x.view(), &[0, 13]).unwrap();
        assert!((loss - 27f64.ln()).abs() < 1e-12);
        assert!((27f64.ln() - 3.2958).abs() < 1e-4);

        // A dominant bias on the true class drives the loss to zero.
        net.biases_mut()[1][13] = 50.0;
        let (loss, _) = net.nll_loss_and_gradient(x.view(), &[13, 13]).unwrap();
        assert!(loss < 1e-18);
    }

    #[test]
    fn sgd_step_behaviour() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut net = random_net(&[3, 4, 2], Head::QValues, &mut rng);
        let before = net.clone();
        net.sgd_step(&Gradients::zeros_like(&net), 0.1).unwrap();
        assert_eq!(net, before);
        let (_, grads) = net
            .dqn_loss_and_gradient(array![[0.5, -0.5, 1.0]].view(), &[1], &[3.0])
            .unwrap();
        net.sgd_step(&grads, 0.0).unwrap();
        assert_eq!(net, before);

        let mut bad = grads.clone();
        bad.biases[0][0] = f64::NAN;
        assert!(matches!(
            net.sgd_step(&bad, 0.1),
            Err(Error::NonFiniteGradient { layer: 0 })
        ));
        assert_eq!(net, before);
    }

    #[test]
    fn one_descent_step_reduces_quadratic_loss() {
        // Identity-like network q = w * relu(x) with a single trainable weight path.
        let mut net = Mlp::from_parts(
            vec![1, 1, 1],
            vec![array![[1.0]], array![[0.5]]],
            vec![array![0.0], array![0.0]],
            Head::QValues,
        )
        .unwrap();
        let x = array![[1.0]];
        let (before, grads) = net.dqn_loss_and_gradient(x.view(), &[0], &[2.0]).unwrap();
        assert!((before - 2.25).abs() < 1e-15);
        net.sgd_step(&grads, 0.05).unwrap();
        let (after, _) = net.dqn_loss_and_gradient(x.view(), &[0], &[2.0]).unwrap();
        assert!(after < before);
    }

    #[test]
    fn copy_is_isolated() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut source = random_net(&[3, 5, 4], Head::QValues, &mut rng);
        let mut dest = Mlp::init(&[3, 5, 4], Head::QValues, 100).unwrap();
        dest.copy_from(&source).unwrap();
        assert_eq!(dest, source);
        let snapshot = dest.clone();
        let (_, grads) = source
            .dqn_loss_and_gradient(array![[1.0, 2.0, 3.0]].view(), &[2], &[5.0])
            .unwrap();
        source.sgd_step(&grads, 0.1).unwrap();
        assert_eq!(dest, snapshot);
        assert_ne!(dest, source);

        let mut wrong = Mlp::init(&[3, 6, 4], Head::QValues, 1).unwrap();
        assert!(wrong.copy_from(&source).is_err());
    }

    #[test]
    fn adam_reduces_loss() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut net = random_net(&[4, 8, 3], Head::LogSoftmax, &mut rng);
        let x = random_inputs(8, 4, &mut rng);
        let labels: Vec<usize> = (0..8).map(|i| i % 3).collect();
        let mut opt = Optimizer::new(OptimizerKind::adam(), 0.01);
        let (start, _) = net.nll_loss_and_gradient(x.view(), &labels).unwrap();
        for _ in 0..200 {
            let (_, g) = net.nll_loss_and_gradient(x.view(), &labels).unwrap();
            opt.step(&mut net, &g).unwrap();
        }
        let (end, _) = net.nll_loss_and_gradient(x.view(), &labels).unwrap();
        assert!(end < 0.5 * start, "{start} -> {end}");
    }
}
