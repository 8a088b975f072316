//! Labeled point sets on the unit sphere, sample sources for the trainers,
//! boundedness estimates and the explicit memorization construction.

mod bounded;
pub mod io;
mod memorize;

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::UNIT_TOL;
use crate::model::uniform_index;
use crate::rng::{gaussian, sphere_point, stream_rng, Stream};
use crate::{Error, Result};

pub use bounded::{boundedness, BoundednessReport, SpectralMethod, EXACT_LIMIT, POWER_MAX_ITERS, POWER_TOL};
pub use memorize::{default_c_prime, memorization_target, memorization_witness, WitnessReport};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    /// Normalized Gaussian vectors, all labels `+1`.
    UniformSphere,
    /// Coordinates i.i.d. uniform on `±1/√d`, all labels `+1`.
    DiscreteCube,
    /// Uniform sphere points with independent uniform `±1` labels.
    RandomLabeledSphere,
    /// Rows of a random orthogonal matrix, cycled when `m > d`; labels `+1`.
    OrthonormalBasis,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 4] = [
        DatasetKind::UniformSphere,
        DatasetKind::DiscreteCube,
        DatasetKind::RandomLabeledSphere,
        DatasetKind::OrthonormalBasis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DatasetKind::UniformSphere => "uniform-sphere",
            DatasetKind::DiscreteCube => "discrete-cube",
            DatasetKind::RandomLabeledSphere => "random-labeled-sphere",
            DatasetKind::OrthonormalBasis => "orthonormal-basis",
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::UnknownKind(s.to_string()))
    }
}

/// `m` unit vectors in `ℝ^d` (row-major) with one label each.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledDataset {
    d: usize,
    points: Vec<f64>,
    labels: Vec<f64>,
    kind: DatasetKind,
    seed: u64,
}

impl LabeledDataset {
    /// Validates that every point is unit-norm and the shapes agree.
    pub fn new(d: usize, points: Vec<f64>, labels: Vec<f64>, kind: DatasetKind, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(Error::InvalidDimension("d must be positive".into()));
        }
        if points.len() != labels.len() * d {
            return Err(Error::DimensionMismatch { expected: labels.len() * d, found: points.len() });
        }
        if labels.iter().any(|y| !y.is_finite()) {
            return Err(Error::NonFinite("labels"));
        }
        for x in points.chunks_exact(d) {
            let n = crate::linalg::norm(x);
            if (n - 1.0).abs() > UNIT_TOL {
                return Err(Error::NotUnitNorm { norm: n });
            }
        }
        Ok(Self { d, points, labels, kind, seed })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// `kind-d{d}-m{m}-s{seed}`.
    pub fn id(&self) -> String {
        format!("{}-d{}-m{}-s{}", self.kind, self.d, self.len(), self.seed)
    }

    /// Same points with labels `f(xᵢ)`.
    pub fn relabel<F: Fn(&[f64]) -> f64>(&self, f: F) -> Self {
        let labels = self.points.chunks_exact(self.d).map(f).collect();
        Self { labels, ..self.clone() }
    }

    pub fn is_sign_labeled(&self) -> bool {
        self.labels.iter().all(|&y| y == 1.0 || y == -1.0)
    }
}

/// Draws a dataset of the given kind; deterministic in `seed`.
pub fn generate(kind: DatasetKind, d: usize, m: usize, seed: u64) -> Result<LabeledDataset> {
    if d < 2 {
        return Err(Error::InvalidDimension(format!("d = {d}; need d >= 2")));
    }
    if m == 0 {
        return Err(Error::InvalidDimension("m must be at least 1".into()));
    }
    let mut rng = stream_rng(seed, Stream::Points);
    let mut points = vec![0.0; d * m];
    match kind {
        DatasetKind::UniformSphere | DatasetKind::RandomLabeledSphere => {
            points.chunks_exact_mut(d).for_each(|x| sphere_point(&mut rng, x));
        }
        DatasetKind::DiscreteCube => {
            let s = 1.0 / (d as f64).sqrt();
            points.iter_mut().for_each(|v| *v = if rng.random::<bool>() { s } else { -s });
        }
        DatasetKind::OrthonormalBasis => {
            let g = DMatrix::from_fn(d, d, |_, _| gaussian(&mut rng));
            let q = g.qr().q();
            for (i, x) in points.chunks_exact_mut(d).enumerate() {
                let col = q.column(i % d);
                x.iter_mut().zip(col.iter()).for_each(|(v, c)| *v = *c);
                let n = crate::linalg::norm(x);
                x.iter_mut().for_each(|v| *v /= n);
            }
        }
    }
    let labels = match kind {
        DatasetKind::RandomLabeledSphere => {
            let mut lr = stream_rng(seed, Stream::Labels);
            (0..m).map(|_| if lr.random::<bool>() { 1.0 } else { -1.0 }).collect()
        }
        _ => vec![1.0; m],
    };
    Ok(LabeledDataset { d, points, labels, kind, seed })
}

/// Distribution the trainers draw mini-batch samples from.
pub trait SampleSource: Sync {
    fn dim(&self) -> usize;

    /// Writes a unit input into `x` and returns its label.
    fn draw(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) -> f64;
}

/// Uniform distribution over the examples of a dataset.
#[derive(Clone, Copy, Debug)]
pub struct EmpiricalSource<'a> {
    data: &'a LabeledDataset,
}

impl<'a> EmpiricalSource<'a> {
    pub fn new(data: &'a LabeledDataset) -> Self {
        Self { data }
    }
}

impl SampleSource for EmpiricalSource<'_> {
    fn dim(&self) -> usize {
        self.data.d
    }

    fn draw(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) -> f64 {
        let i = uniform_index(rng, self.data.len());
        x.copy_from_slice(self.data.point(i));
        self.data.labels[i]
    }
}

/// Fresh uniform-sphere inputs labeled by a target function.
pub struct TargetSource<F> {
    d: usize,
    target: F,
}

impl<F: Fn(&[f64]) -> f64 + Sync> TargetSource<F> {
    pub fn new(d: usize, target: F) -> Self {
        Self { d, target }
    }
}

impl<F: Fn(&[f64]) -> f64 + Sync> SampleSource for TargetSource<F> {
    fn dim(&self) -> usize {
        self.d
    }

    fn draw(&self, rng: &mut ChaCha8Rng, x: &mut [f64]) -> f64 {
        sphere_point(rng, x);
        (self.target)(x)
    }
}
