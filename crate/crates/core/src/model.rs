//! Depth-2 networks `h(x) = Σᵢ uᵢ σ(⟨wᵢ, x⟩)` with `2q` hidden neurons,
//! zero-output initialization and mini-batch SGD over all weights.
//!
//! Neurons come in pairs `(i, q + i)`. At initialization both rows of a
//! pair hold the same Gaussian vector and their output weights are `+B` and
//! `-B`, so the network computes the zero function. The forward pass sums
//! each pair before accumulating, which keeps the initial output exactly 0.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::activation::Activation;
use crate::data::SampleSource;
use crate::linalg::{axpy, check_unit, dot};
use crate::losses::Loss;
use crate::rng::{gaussian_matrix, pick_step, stream_rng, Stream};
use crate::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkWeights {
    d: usize,
    q: usize,
    init_scale: f64,
    /// `2q × d`, row-major.
    hidden: Vec<f64>,
    /// `2q`.
    output: Vec<f64>,
}

/// Samples weights from the zero-output initialization with `q` pairs.
///
/// The Gaussian block is drawn from the [`Stream::Gaussian`] stream of
/// `seed`, the same block that [`crate::rfs::FeatureDirections::sample`]
/// draws for that seed.
pub fn init_weights(d: usize, q: usize, init_scale: f64, seed: u64) -> Result<NetworkWeights> {
    if d == 0 || q == 0 {
        return Err(Error::InvalidDimension(format!("d = {d}, q = {q}; both must be positive")));
    }
    if !(init_scale > 0.0) || !init_scale.is_finite() {
        return Err(Error::InvalidConfig(format!("initialization scale B = {init_scale} must be positive")));
    }
    let half = gaussian_matrix(q, d, seed);
    let mut hidden = Vec::with_capacity(2 * q * d);
    hidden.extend_from_slice(&half);
    hidden.extend_from_slice(&half);
    let mut output = vec![init_scale; q];
    output.extend(std::iter::repeat_n(-init_scale, q));
    Ok(NetworkWeights { d, q, init_scale, hidden, output })
}

impl NetworkWeights {
    /// Weights from explicit parts; `hidden` is `2q × d` row-major.
    pub fn from_parts(d: usize, hidden: Vec<f64>, output: Vec<f64>, init_scale: f64) -> Result<Self> {
        if d == 0 || output.is_empty() || output.len() % 2 != 0 {
            return Err(Error::InvalidDimension(format!(
                "need d > 0 and an even, nonzero number of neurons (got d = {d}, {} neurons)",
                output.len()
            )));
        }
        if hidden.len() != output.len() * d {
            return Err(Error::DimensionMismatch { expected: output.len() * d, found: hidden.len() });
        }
        Ok(Self { d, q: output.len() / 2, init_scale, hidden, output })
    }

    pub fn input_dim(&self) -> usize {
        self.d
    }

    /// Number of neuron pairs `q`.
    pub fn width(&self) -> usize {
        self.q
    }

    pub fn init_scale(&self) -> f64 {
        self.init_scale
    }

    pub fn hidden(&self) -> &[f64] {
        &self.hidden
    }

    pub fn output(&self) -> &[f64] {
        &self.output
    }

    pub fn hidden_row(&self, i: usize) -> &[f64] {
        &self.hidden[i * self.d..(i + 1) * self.d]
    }

    pub fn param_count(&self) -> usize {
        self.hidden.len() + self.output.len()
    }

    /// `⟨u, σ(Wx)⟩` for a unit vector `x`.
    pub fn forward(&self, activation: Activation, x: &[f64]) -> Result<f64> {
        check_unit(x, self.d)?;
        Ok(self.predict(activation, x))
    }

    pub(crate) fn predict(&self, activation: Activation, x: &[f64]) -> f64 {
        let q = self.q;
        (0..q)
            .map(|i| {
                let a = self.output[i] * activation.value(dot(self.hidden_row(i), x));
                let b = self.output[q + i] * activation.value(dot(self.hidden_row(q + i), x));
                a + b
            })
            .sum()
    }
}

pub fn forward(weights: &NetworkWeights, activation: Activation, x: &[f64]) -> Result<f64> {
    weights.forward(activation, x)
}

/// A mini-batch of unit inputs (row-major) and labels.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Batch {
    d: usize,
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Batch {
    pub fn new(d: usize) -> Self {
        Self { d, xs: Vec::new(), ys: Vec::new() }
    }

    pub fn push(&mut self, x: &[f64], y: f64) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch { expected: self.d, found: x.len() });
        }
        self.xs.extend_from_slice(x);
        self.ys.push(y);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn x(&self, s: usize) -> &[f64] {
        &self.xs[s * self.d..(s + 1) * self.d]
    }

    pub fn y(&self, s: usize) -> f64 {
        self.ys[s]
    }

    /// Replaces the contents with `size` i.i.d. draws from `source`.
    pub fn refill(&mut self, source: &dyn SampleSource, rng: &mut ChaCha8Rng, size: usize) {
        self.xs.resize(size * self.d, 0.0);
        self.ys.resize(size, 0.0);
        for s in 0..size {
            let x = &mut self.xs[s * self.d..(s + 1) * self.d];
            self.ys[s] = source.draw(rng, x);
        }
    }

    pub(crate) fn check(&self, d: usize) -> Result<()> {
        if self.is_empty() {
            return Err(Error::EmptyBatch);
        }
        if self.d != d {
            return Err(Error::DimensionMismatch { expected: d, found: self.d });
        }
        for s in 0..self.len() {
            check_unit(self.x(s), d)?;
        }
        Ok(())
    }
}

/// Gradient of the mean batch loss, shaped like the weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradient {
    pub hidden: Vec<f64>,
    pub output: Vec<f64>,
}

/// Mean batch loss `(1/b) Σ ℓ(h(xₛ), yₛ)`.
pub fn batch_loss(weights: &NetworkWeights, activation: Activation, batch: &Batch, loss: Loss) -> Result<f64> {
    batch.check(weights.d)?;
    let total: f64 = (0..batch.len())
        .map(|s| loss.value(weights.predict(activation, batch.x(s)), batch.y(s)))
        .sum();
    Ok(total / batch.len() as f64)
}

/// Gradient of the mean batch loss with respect to hidden and output weights.
pub fn gradient(weights: &NetworkWeights, activation: Activation, batch: &Batch, loss: Loss) -> Result<Gradient> {
    batch.check(weights.d)?;
    let mut g = Gradient { hidden: vec![0.0; weights.hidden.len()], output: vec![0.0; weights.output.len()] };
    let mut z = vec![0.0; weights.output.len()];
    accumulate_gradient(weights, activation, batch, loss, &mut z, &mut g);
    Ok(g)
}

/// Adds the mean-loss gradient into `g` (which must be zeroed) and returns
/// the mean loss.
fn accumulate_gradient(
    weights: &NetworkWeights,
    activation: Activation,
    batch: &Batch,
    loss: Loss,
    z: &mut [f64],
    g: &mut Gradient,
) -> f64 {
    let d = weights.d;
    let inv_b = 1.0 / batch.len() as f64;
    let mut total = 0.0;
    for s in 0..batch.len() {
        let x = batch.x(s);
        for (i, zi) in z.iter_mut().enumerate() {
            *zi = dot(weights.hidden_row(i), x);
        }
        let q = weights.q;
        let pred: f64 = (0..q)
            .map(|i| weights.output[i] * activation.value(z[i]) + weights.output[q + i] * activation.value(z[q + i]))
            .sum();
        let y = batch.y(s);
        total += loss.value(pred, y);
        let dl = loss.derivative(pred, y) * inv_b;
        if dl == 0.0 {
            continue;
        }
        for (i, &zi) in z.iter().enumerate() {
            let c = dl * weights.output[i] * activation.derivative(zi);
            if c != 0.0 {
                axpy(c, x, &mut g.hidden[i * d..(i + 1) * d]);
            }
            g.output[i] += dl * activation.value(zi);
        }
    }
    total * inv_b
}

#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    /// Number of neuron pairs `q`.
    pub width: usize,
    /// Output scale `B` of the initialization.
    pub init_scale: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
    /// `false` freezes the output weights at `±B`.
    pub train_output: bool,
}

impl SgdConfig {
    pub(crate) fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.batch_size == 0 {
            return Err(Error::InvalidConfig("steps and batch size must be at least 1".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidConfig(format!("learning rate {} must be finite and nonnegative", self.learning_rate)));
        }
        Ok(())
    }
}

/// Per-step record shared by both trainers.
#[derive(Clone, Debug, PartialEq)]
pub struct TrainTrace {
    /// Mean mini-batch loss at the iterate entering step `t` (index `t - 1`).
    pub losses: Vec<f64>,
    /// Step `t ∈ [T]` whose iterate is returned.
    pub returned_step: usize,
}

#[derive(Clone, Debug)]
pub struct NetworkRun {
    /// Iterate `W_t` for the uniformly drawn step `t`.
    pub returned: NetworkWeights,
    /// `W_{T+1}`.
    pub last: NetworkWeights,
    /// Iterate with the smallest mini-batch loss.
    pub best: NetworkWeights,
    pub best_step: usize,
    pub trace: TrainTrace,
}

/// Mini-batch SGD from the zero-output initialization, returning the iterate
/// at a uniformly random step.
pub fn sgd_train(
    config: &SgdConfig,
    source: &dyn SampleSource,
    loss: Loss,
    activation: Activation,
) -> Result<NetworkRun> {
    config.validate()?;
    let d = source.dim();
    let mut w = init_weights(d, config.width, config.init_scale, config.seed)?;
    let returned_step = pick_step(config.seed, config.steps);
    let mut batch_rng = stream_rng(config.seed, Stream::Batches);
    let mut batch = Batch::new(d);
    let mut z = vec![0.0; 2 * config.width];
    let mut g = Gradient { hidden: vec![0.0; w.hidden.len()], output: vec![0.0; w.output.len()] };

    let mut losses = Vec::with_capacity(config.steps);
    let mut returned = None;
    let mut best = (f64::INFINITY, 1usize, w.clone());
    for t in 1..=config.steps {
        if t == returned_step {
            returned = Some(w.clone());
        }
        batch.refill(source, &mut batch_rng, config.batch_size);
        g.hidden.iter_mut().for_each(|v| *v = 0.0);
        g.output.iter_mut().for_each(|v| *v = 0.0);
        let l = accumulate_gradient(&w, activation, &batch, loss, &mut z, &mut g);
        if !l.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        losses.push(l);
        if l < best.0 {
            best = (l, t, w.clone());
        }
        axpy(-config.learning_rate, &g.hidden, &mut w.hidden);
        if config.train_output {
            axpy(-config.learning_rate, &g.output, &mut w.output);
        }
    }
    Ok(NetworkRun {
        returned: returned.expect("returned step lies in 1..=T"),
        last: w,
        best: best.2,
        best_step: best.1,
        trace: TrainTrace { losses, returned_step },
    })
}

/// Fraction of points with strictly positive margin `yᵢ h(xᵢ) > 0`.
pub fn memorized_fraction<F: Fn(&[f64]) -> f64>(predict: F, points: &[f64], labels: &[f64]) -> f64 {
    let d = points.len() / labels.len();
    let hits = labels
        .iter()
        .enumerate()
        .filter(|(i, &y)| y * predict(&points[i * d..(i + 1) * d]) > 0.0)
        .count();
    hits as f64 / labels.len() as f64
}

/// Picks a random batch index; exposed for sources that sample finite sets.
pub(crate) fn uniform_index(rng: &mut ChaCha8Rng, n: usize) -> usize {
    rng.random_range(0..n)
}
