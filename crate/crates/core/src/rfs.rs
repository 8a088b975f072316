//! Vector random feature schemes and linear SGD on top of them.
//!
//! A scheme `ψ: Ω × S^{d-1} → ℝ^d` with `ω ~ N(0, I_d)` defines the kernel
//! `k(x, x′) = E⟨ψ(ω, x), ψ(ω, x′)⟩`. Drawing `ω₁..ω_q` gives the embedding
//! `Ψ(x) = (ψ(ω₁, x), …, ψ(ω_q, x)) / √q` and the empirical kernel
//! `k_ω(x, x′) = ⟨Ψ(x), Ψ(x′)⟩`. The NTK scheme is `ψ(ω, x) = σ′(⟨ω, x⟩) x`,
//! whose kernel is `k̃ʰ(x, y) = ⟨x, y⟩ σ̂′(⟨x, y⟩)`.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::activation::Activation;
use crate::data::SampleSource;
use crate::hermite::{dual_activation_closed, hermite_unchecked, HermiteSeries, DEFAULT_ORDER};
use crate::linalg::{axpy, check_unit, dot};
use crate::losses::Loss;
use crate::model::{Batch, TrainTrace};
use crate::rng::{gaussian_matrix, pick_step, stream_rng, Stream};
use crate::{Error, Result};

/// `q` i.i.d. standard Gaussian directions in `ℝ^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureDirections {
    d: usize,
    omegas: Vec<f64>,
    seed: u64,
}

impl FeatureDirections {
    /// Draws from the [`Stream::Gaussian`] stream of `seed`, so the rows
    /// equal the first `q` hidden rows of [`crate::model::init_weights`]
    /// with the same seed.
    pub fn sample(q: usize, d: usize, seed: u64) -> Result<Self> {
        if q == 0 || d == 0 {
            return Err(Error::InvalidDimension(format!("q = {q}, d = {d}; both must be positive")));
        }
        Ok(Self { d, omegas: gaussian_matrix(q, d, seed), seed })
    }

    pub fn from_rows(d: usize, omegas: Vec<f64>, seed: u64) -> Result<Self> {
        if d == 0 || omegas.is_empty() || omegas.len() % d != 0 {
            return Err(Error::InvalidDimension(format!("{} entries do not form rows of length {d}", omegas.len())));
        }
        Ok(Self { d, omegas, seed })
    }

    pub fn len(&self) -> usize {
        self.omegas.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.omegas.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.omegas[j * self.d..(j + 1) * self.d]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.omegas.chunks_exact(self.d)
    }

    /// The `2q` rows `(ω₁..ω_q, ω₁..ω_q)`.
    pub fn duplicated(&self) -> Self {
        let mut omegas = self.omegas.clone();
        omegas.extend_from_slice(&self.omegas);
        Self { d: self.d, omegas, seed: self.seed }
    }
}

pub type ScalarFeature = dyn Fn(&[f64], &[f64]) -> f64 + Send + Sync;
pub type VectorFeature = dyn Fn(&[f64], &[f64], &mut [f64]) + Send + Sync;

#[derive(Clone)]
pub enum FeatureMap {
    /// `σ′(⟨ω, x⟩) x`.
    Ntk(Activation),
    /// `s(ω, x) x` for a user scalar `s`.
    Factorized(Arc<ScalarFeature>),
    /// Arbitrary `ψ(ω, x)` written into the output slice.
    General(Arc<VectorFeature>),
}

#[derive(Clone)]
pub struct RfsSpec {
    map: FeatureMap,
    bound: f64,
}

impl fmt::Debug for RfsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let map = match &self.map {
            FeatureMap::Ntk(a) => format!("Ntk({a})"),
            FeatureMap::Factorized(_) => "Factorized(..)".into(),
            FeatureMap::General(_) => "General(..)".into(),
        };
        f.debug_struct("RfsSpec").field("map", &map).field("bound", &self.bound).finish()
    }
}

impl RfsSpec {
    /// NTK scheme of `activation`, bounded by `‖σ′‖_∞`.
    pub fn ntk(activation: Activation) -> Self {
        Self { map: FeatureMap::Ntk(activation), bound: activation.derivative_bound() }
    }

    pub fn factorized(scalar: Arc<ScalarFeature>, bound: f64) -> Self {
        Self { map: FeatureMap::Factorized(scalar), bound }
    }

    pub fn general(map: Arc<VectorFeature>, bound: f64) -> Self {
        Self { map: FeatureMap::General(map), bound }
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    /// Documented bound `C ≥ sup ‖ψ(ω, x)‖`.
    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn is_factorized(&self) -> bool {
        !matches!(self.map, FeatureMap::General(_))
    }

    pub fn activation(&self) -> Option<Activation> {
        match self.map {
            FeatureMap::Ntk(a) => Some(a),
            _ => None,
        }
    }

    /// Scalar part `ψ′(ω, x)` of a factorized scheme.
    #[inline]
    pub fn scalar(&self, omega: &[f64], x: &[f64]) -> Option<f64> {
        match &self.map {
            FeatureMap::Ntk(a) => Some(a.derivative(dot(omega, x))),
            FeatureMap::Factorized(s) => Some(s(omega, x)),
            FeatureMap::General(_) => None,
        }
    }

    /// Writes `ψ(ω, x)` into `out`.
    pub fn feature(&self, omega: &[f64], x: &[f64], out: &mut [f64]) {
        match &self.map {
            FeatureMap::General(f) => f(omega, x, out),
            _ => {
                let s = self.scalar(omega, x).expect("factorized");
                out.iter_mut().zip(x).for_each(|(o, xi)| *o = s * xi);
            }
        }
    }
}

/// `Ψ_ω(x)`: row `j` is `ψ(ω_j, x) / √q` (`q × d`, row-major).
pub fn embed(spec: &RfsSpec, directions: &FeatureDirections, x: &[f64]) -> Result<Vec<f64>> {
    check_unit(x, directions.d)?;
    let d = directions.d;
    let scale = 1.0 / (directions.len() as f64).sqrt();
    let mut out = vec![0.0; directions.omegas.len()];
    out.par_chunks_mut(d).zip(directions.omegas.par_chunks(d)).for_each(|(row, omega)| {
        spec.feature(omega, x, row);
        row.iter_mut().for_each(|v| *v *= scale);
    });
    Ok(out)
}

/// `k_ω(x, x′) = ⟨Ψ_ω(x), Ψ_ω(x′)⟩`.
pub fn empirical_kernel(spec: &RfsSpec, directions: &FeatureDirections, x: &[f64], x2: &[f64]) -> Result<f64> {
    check_unit(x, directions.d)?;
    check_unit(x2, directions.d)?;
    let q = directions.len() as f64;
    if spec.is_factorized() {
        let s: f64 = directions
            .rows()
            .map(|omega| spec.scalar(omega, x).unwrap() * spec.scalar(omega, x2).unwrap())
            .sum();
        return Ok(dot(x, x2) * s / q);
    }
    let d = directions.d;
    let (mut a, mut b) = (vec![0.0; d], vec![0.0; d]);
    let s: f64 = directions
        .rows()
        .map(|omega| {
            spec.feature(omega, x, &mut a);
            spec.feature(omega, x2, &mut b);
            dot(&a, &b)
        })
        .sum();
    Ok(s / q)
}

/// `k̃_{σ,B}(x, y) = ⟨x, y⟩ σ̂′(⟨x, y⟩) + σ̂(⟨x, y⟩) / B²`.
///
/// `B = ∞` gives the hidden-weight part `k̃ʰ` alone. The dual activations use
/// the tail-closed Hermite series, which are exact at `ρ = ±1`.
pub fn ntk_kernel_exact(activation: Activation, init_scale: f64, dot: f64) -> Result<f64> {
    if !(dot.abs() <= 1.0) {
        return Err(Error::RhoOutOfRange(dot));
    }
    if !(init_scale > 0.0) {
        return Err(Error::InvalidConfig(format!("B = {init_scale} must be positive")));
    }
    let duals = activation.duals(DEFAULT_ORDER)?;
    let hidden = dot * dual_activation_closed(&duals.derivative, dot)?;
    if init_scale.is_infinite() {
        return Ok(hidden);
    }
    Ok(hidden + dual_activation_closed(&duals.value, dot)? / (init_scale * init_scale))
}

#[derive(Clone, Debug, PartialEq)]
pub struct RfsConfig {
    /// Number of random features `q`.
    pub width: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub steps: usize,
    pub seed: u64,
}

/// Directions plus coefficient blocks `v₁..v_q`; the predictor
/// `f(x) = ⟨V, Ψ_ω(x)⟩`.
#[derive(Clone, Debug)]
pub struct FeatureState {
    spec: RfsSpec,
    directions: Arc<FeatureDirections>,
    coeffs: Vec<f64>,
}

impl FeatureState {
    /// `V = 0`.
    pub fn zeros(spec: RfsSpec, directions: Arc<FeatureDirections>) -> Self {
        let coeffs = vec![0.0; directions.omegas.len()];
        Self { spec, directions, coeffs }
    }

    pub fn with_coeffs(spec: RfsSpec, directions: Arc<FeatureDirections>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != directions.omegas.len() {
            return Err(Error::DimensionMismatch { expected: directions.omegas.len(), found: coeffs.len() });
        }
        Ok(Self { spec, directions, coeffs })
    }

    pub fn spec(&self) -> &RfsSpec {
        &self.spec
    }

    pub fn directions(&self) -> &FeatureDirections {
        &self.directions
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// `‖V‖²_F`.
    pub fn coeff_norm_sq(&self) -> f64 {
        dot(&self.coeffs, &self.coeffs)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        check_unit(x, self.directions.d)?;
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        let d = self.directions.d;
        let scale = 1.0 / (self.directions.len() as f64).sqrt();
        let mut total = 0.0;
        if self.spec.is_factorized() {
            for (omega, v) in self.directions.rows().zip(self.coeffs.chunks_exact(d)) {
                let s = self.spec.scalar(omega, x).unwrap();
                if s != 0.0 {
                    total += s * dot(v, x);
                }
            }
        } else {
            let mut psi = vec![0.0; d];
            for (omega, v) in self.directions.rows().zip(self.coeffs.chunks_exact(d)) {
                self.spec.feature(omega, x, &mut psi);
                total += dot(v, &psi);
            }
        }
        total * scale
    }
}

#[derive(Clone, Debug)]
pub struct RfsRun {
    /// `V_t` for the uniformly drawn step `t`.
    pub returned: FeatureState,
    /// `V_{T+1}`.
    pub last: FeatureState,
    pub trace: TrainTrace,
    /// `‖V_t‖²_F` for `t = 1..=T`.
    pub coeff_norms: Vec<f64>,
}

/// Linear SGD from `V = 0` over the embedding drawn from `config.seed`.
pub fn rfs_train(spec: &RfsSpec, config: &RfsConfig, source: &dyn SampleSource, loss: Loss) -> Result<RfsRun> {
    rfs_train_observed(spec, config, source, loss, &mut |_, _| {})
}

/// [`rfs_train`] calling `observer(t, V_t)` before each update.
pub fn rfs_train_observed(
    spec: &RfsSpec,
    config: &RfsConfig,
    source: &dyn SampleSource,
    loss: Loss,
    observer: &mut dyn FnMut(usize, &FeatureState),
) -> Result<RfsRun> {
    if config.steps == 0 || config.batch_size == 0 {
        return Err(Error::InvalidConfig("steps and batch size must be at least 1".into()));
    }
    if !(config.learning_rate >= 0.0) || !config.learning_rate.is_finite() {
        return Err(Error::InvalidConfig(format!("learning rate {} must be finite and nonnegative", config.learning_rate)));
    }
    let d = source.dim();
    let directions = Arc::new(FeatureDirections::sample(config.width, d, config.seed)?);
    let mut state = FeatureState::zeros(spec.clone(), directions.clone());
    let returned_step = pick_step(config.seed, config.steps);
    let mut batch_rng = stream_rng(config.seed, Stream::Batches);
    let mut batch = Batch::new(d);
    let scale = 1.0 / (config.width as f64).sqrt();
    let inv_b = 1.0 / config.batch_size as f64;
    let mut psi = vec![0.0; d];
    let mut steps: Vec<f64> = Vec::with_capacity(config.batch_size);

    let mut losses = Vec::with_capacity(config.steps);
    let mut coeff_norms = Vec::with_capacity(config.steps);
    let mut returned = None;
    for t in 1..=config.steps {
        if t == returned_step {
            returned = Some(state.clone());
        }
        observer(t, &state);
        coeff_norms.push(state.coeff_norm_sq());
        batch.refill(source, &mut batch_rng, config.batch_size);
        let mut total = 0.0;
        steps.clear();
        for s in 0..batch.len() {
            let pred = state.predict_unchecked(batch.x(s));
            total += loss.value(pred, batch.y(s));
            steps.push(-config.learning_rate * loss.derivative(pred, batch.y(s)) * inv_b * scale);
        }
        let l = total * inv_b;
        if !l.is_finite() {
            return Err(Error::Diverged { step: t });
        }
        losses.push(l);
        for (s, &c) in steps.iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let x = batch.x(s);
            for (omega, v) in directions.rows().zip(state.coeffs.chunks_exact_mut(d)) {
                match spec.scalar(omega, x) {
                    Some(0.0) => {}
                    Some(sc) => axpy(c * sc, x, v),
                    None => {
                        spec.feature(omega, x, &mut psi);
                        axpy(c, &psi, v);
                    }
                }
            }
        }
    }
    Ok(RfsRun {
        returned: returned.expect("returned step lies in 1..=T"),
        last: state,
        trace: TrainTrace { losses, returned_step },
        coeff_norms,
    })
}

/// Neural tangent kernel training: linear SGD with learning rate `η` on the
/// unnormalized `2q`-row gradient embedding `Ψ_W` of a network drawn from the
/// zero-output initialization with `B = 1`.
///
/// The `2q` rows come in pairs `±σ′(⟨w, x⟩) x`, so `⟨Ψ_W(x), Ψ_W(x′)⟩ =
/// 2q · k_ω(x, x′)` for the normalized `q`-row NTK embedding. Since SGD from
/// zero only sees these inner products, this runs [`rfs_train`] with
/// learning rate `2qη` and returns identical predictions.
pub fn ntk_train(activation: Activation, config: &RfsConfig, source: &dyn SampleSource, loss: Loss) -> Result<RfsRun> {
    let scaled = RfsConfig { learning_rate: config.learning_rate * 2.0 * config.width as f64, ..config.clone() };
    rfs_train(&RfsSpec::ntk(activation), &scaled, source, loss)
}

/// `f(x) = Σ_t w_t ⟨a_t, x⟩^{n_t}` together with its dual witness under the
/// NTK scheme whose `σ′` expansion is `series`:
///
/// `f̌(ω) = Σ_t (w_t / a_{n_t - 1}) h_{n_t - 1}(⟨a_t, ω⟩) a_t`,
///
/// so that `f(x) = E_ω⟨f̌(ω), σ′(⟨ω, x⟩) x⟩` and `E‖f̌(ω)‖² = ‖f‖²_k`.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialTarget {
    d: usize,
    anchors: Vec<f64>,
    weights: Vec<f64>,
    degrees: Vec<usize>,
    /// `a_{n_t - 1}` of the `σ′` series for each term.
    dual_coeffs: Vec<f64>,
}

impl MonomialTarget {
    pub fn new(d: usize) -> Self {
        Self { d, anchors: Vec::new(), weights: Vec::new(), degrees: Vec::new(), dual_coeffs: Vec::new() }
    }

    /// Adds `weight · ⟨anchor, x⟩^degree`.
    pub fn push(&mut self, weight: f64, anchor: &[f64], degree: usize, series: &HermiteSeries) -> Result<()> {
        check_unit(anchor, self.d)?;
        if degree == 0 {
            return Err(Error::ZeroCoefficient { degree: 0 });
        }
        let a = series.nonzero_coeff(degree - 1)?;
        self.anchors.extend_from_slice(anchor);
        self.weights.push(weight);
        self.degrees.push(degree);
        self.dual_coeffs.push(a);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn anchor(&self, t: usize) -> &[f64] {
        &self.anchors[t * self.d..(t + 1) * self.d]
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        (0..self.len())
            .map(|t| self.weights[t] * dot(self.anchor(t), x).powi(self.degrees[t] as i32))
            .sum()
    }

    /// Writes `f̌(ω)` into `out`.
    pub fn dual(&self, omega: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for t in 0..self.len() {
            let a = self.anchor(t);
            let c = self.weights[t] / self.dual_coeffs[t] * hermite_unchecked(self.degrees[t] - 1, dot(a, omega));
            axpy(c, a, out);
        }
    }

    /// `‖f‖²_k = Σ_{n_s = n_t} w_s w_t ⟨a_s, a_t⟩ⁿ / a²_{n-1}`.
    pub fn rkhs_norm_sq(&self) -> f64 {
        let n = self.len();
        (0..n)
            .into_par_iter()
            .map(|s| {
                let mut acc = 0.0;
                for t in 0..n {
                    if self.degrees[s] == self.degrees[t] {
                        let g = dot(self.anchor(s), self.anchor(t)).powi(self.degrees[s] as i32);
                        acc += self.weights[s] * self.weights[t] * g;
                    }
                }
                acc / (self.dual_coeffs[s] * self.dual_coeffs[s])
            })
            .collect::<Vec<_>>()
            .iter()
            .sum()
    }
}

/// Witness for `⟨x₀, x⟩ⁿ`: `ω ↦ (1/a_{n-1}) h_{n-1}(⟨x₀, ω⟩) x₀` with `a` the
/// `σ′` coefficients.
pub fn check_f_monomial(x0: &[f64], n: usize, sigma_prime_series: &HermiteSeries) -> Result<MonomialTarget> {
    let mut target = MonomialTarget::new(x0.len());
    target.push(1.0, x0, n, sigma_prime_series)?;
    Ok(target)
}

/// `v* = (f̌(ω₁), …, f̌(ω_q)) / √q` (`q × d`, row-major).
pub fn witness_vector(target: &MonomialTarget, directions: &FeatureDirections) -> Vec<f64> {
    let d = directions.d;
    let scale = 1.0 / (directions.len() as f64).sqrt();
    let mut out = vec![0.0; directions.omegas.len()];
    out.par_chunks_mut(d).zip(directions.omegas.par_chunks(d)).for_each(|(row, omega)| {
        target.dual(omega, row);
        row.iter_mut().for_each(|v| *v *= scale);
    });
    out
}
