use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::activation::Activation;
use crate::hermite::{HermiteSeries, DEFAULT_ORDER, ZERO_COEFF_TOL};
use crate::linalg::dot;
use crate::rfs::{witness_vector, FeatureDirections, MonomialTarget};
use crate::{Error, Result};

/// Smallest integer `c′ > 4c + 2`, with `c = ln m / ln d`, whose `σ′`
/// coefficient at degree `c′ - 1` is nonzero.
pub fn default_c_prime(d: usize, m: usize, sigma_prime_series: &HermiteSeries) -> Result<usize> {
    if d < 2 || m == 0 {
        return Err(Error::InvalidDimension(format!("d = {d}, m = {m}")));
    }
    let c = (m as f64).ln() / (d as f64).ln();
    let lower = (4.0 * c + 2.0).floor() as usize + 1;
    (lower..=sigma_prime_series.truncation_order() + 1)
        .find(|&cp| sigma_prime_series.coeff(cp - 1).is_some_and(|a| a.abs() > ZERO_COEFF_TOL))
        .ok_or(Error::ZeroCoefficient { degree: lower - 1 })
}

/// `f(x) = Σᵢ yᵢ ⟨xᵢ, x⟩^{c′}` with its dual witness under the NTK scheme
/// whose `σ′` expansion is `sigma_prime_series`.
pub fn memorization_target(data: &LabeledDataset, c_prime: usize, sigma_prime_series: &HermiteSeries) -> Result<MonomialTarget> {
    let mut target = MonomialTarget::new(data.dim());
    for i in 0..data.len() {
        target.push(data.labels()[i], data.point(i), c_prime, sigma_prime_series)?;
    }
    Ok(target)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WitnessReport {
    /// `v = (f̌(ω₁), …, f̌(ω_q)) / √q`, `q × d` row-major.
    pub v: Vec<f64>,
    pub norm_sq: f64,
    /// `yᵢ ⟨v, Ψ_ω(xᵢ)⟩`.
    pub margins: Vec<f64>,
}

impl WitnessReport {
    /// Fraction of strictly positive margins.
    pub fn sign_agreement(&self) -> f64 {
        self.margins.iter().filter(|&&m| m > 0.0).count() as f64 / self.margins.len() as f64
    }
}

/// The explicit vector `v` for the memorization target, evaluated on the
/// training points through the NTK embedding of `activation`.
pub fn memorization_witness(
    data: &LabeledDataset,
    directions: &FeatureDirections,
    c_prime: usize,
    activation: Activation,
) -> Result<WitnessReport> {
    if directions.dim() != data.dim() {
        return Err(Error::DimensionMismatch { expected: data.dim(), found: directions.dim() });
    }
    let duals = activation.duals(DEFAULT_ORDER)?;
    let target = memorization_target(data, c_prime, &duals.derivative)?;
    let v = witness_vector(&target, directions);
    let d = data.dim();
    let scale = 1.0 / (directions.len() as f64).sqrt();
    let margins = (0..data.len())
        .into_par_iter()
        .map(|i| {
            let x = data.point(i);
            let f: f64 = directions
                .rows()
                .zip(v.chunks_exact(d))
                .map(|(w, vj)| activation.derivative(dot(w, x)) * dot(vj, x))
                .sum();
            data.labels()[i] * f * scale
        })
        .collect();
    let norm_sq = dot(&v, &v);
    Ok(WitnessReport { v, norm_sq, margins })
}
