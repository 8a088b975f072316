use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::LabeledDataset;
use crate::linalg::{dot, norm};
use crate::rng::{gaussian, stream_rng, Stream};

/// Largest `d·m` for which the second-moment matrix is diagonalized exactly.
pub const EXACT_LIMIT: usize = 1_000_000;
/// Relative change in the Rayleigh quotient at which power iteration stops.
pub const POWER_TOL: f64 = 1e-8;
pub const POWER_MAX_ITERS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpectralMethod {
    ExactSpectral,
    PowerIteration,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundednessReport {
    pub r_estimate: f64,
    pub method: SpectralMethod,
    pub dataset_id: String,
}

/// Smallest `R` with `E⟨u, x⟩² ≤ R²/d` for every unit `u` under the empirical
/// distribution: `R = √(d · λ_max(G))` where `G = (1/m) Σ xᵢxᵢᵀ`.
///
/// `G` is diagonalized exactly when `d·m ≤ EXACT_LIMIT`; otherwise the top
/// eigenvalue comes from power iteration on `v ↦ (1/m) Xᵀ(Xv)` started from a
/// seeded Gaussian vector.
pub fn boundedness(data: &LabeledDataset) -> BoundednessReport {
    let (d, m) = (data.dim(), data.len());
    let (lambda, method) = if d * m <= EXACT_LIMIT {
        (exact_top_eigenvalue(data), SpectralMethod::ExactSpectral)
    } else {
        (power_top_eigenvalue(data), SpectralMethod::PowerIteration)
    };
    let r = (d as f64 * lambda.max(0.0)).sqrt().min((d as f64).sqrt());
    BoundednessReport { r_estimate: r, method, dataset_id: data.id() }
}

fn exact_top_eigenvalue(data: &LabeledDataset) -> f64 {
    let (d, m) = (data.dim(), data.len());
    let x = DMatrix::from_row_slice(m, d, data.points());
    let g = (x.transpose() * &x) / m as f64;
    SymmetricEigen::new(g).eigenvalues.max()
}

fn power_top_eigenvalue(data: &LabeledDataset) -> f64 {
    let (d, m) = (data.dim(), data.len());
    let mut rng = stream_rng(data.seed(), Stream::Start);
    let mut v: Vec<f64> = (0..d).map(|_| gaussian(&mut rng)).collect();
    let n = norm(&v);
    v.iter_mut().for_each(|c| *c /= n);
    let mut next = vec![0.0; d];
    let mut lambda = 0.0;
    for _ in 0..POWER_MAX_ITERS {
        next.iter_mut().for_each(|c| *c = 0.0);
        for i in 0..m {
            let x = data.point(i);
            let p = dot(x, &v) / m as f64;
            next.iter_mut().zip(x).for_each(|(c, xi)| *c += p * xi);
        }
        let new_lambda = dot(&next, &v);
        let n = norm(&next);
        if n == 0.0 {
            return 0.0;
        }
        v.iter_mut().zip(&next).for_each(|(a, b)| *a = b / n);
        let converged = (new_lambda - lambda).abs() <= POWER_TOL * new_lambda.abs();
        lambda = new_lambda;
        if converged {
            break;
        }
    }
    lambda
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate, DatasetKind};

    #[test]
    fn orthonormal_basis_is_one_bounded() {
        for d in [3, 10, 40] {
            let ds = generate(DatasetKind::OrthonormalBasis, d, d, 1).unwrap();
            let r = boundedness(&ds);
            assert_eq!(r.method, SpectralMethod::ExactSpectral);
            assert!((r.r_estimate - 1.0).abs() < 1e-8, "R = {}", r.r_estimate);
        }
    }

    #[test]
    fn repeated_point_attains_root_d() {
        let d = 16;
        let x: Vec<f64> = (0..d).map(|i| if i == 3 { 1.0 } else { 0.0 }).collect();
        let points: Vec<f64> = x.iter().cycle().take(d * 25).copied().collect();
        let ds = LabeledDataset::new(d, points, vec![1.0; 25], DatasetKind::UniformSphere, 0).unwrap();
        assert!((boundedness(&ds).r_estimate - 4.0).abs() < 1e-6);
    }

    #[test]
    fn power_iteration_agrees_with_exact() {
        let ds = generate(DatasetKind::UniformSphere, 20, 400, 5).unwrap();
        let exact = (20.0 * exact_top_eigenvalue(&ds)).sqrt();
        let power = (20.0 * power_top_eigenvalue(&ds)).sqrt();
        assert!((exact - power).abs() < 1e-6, "{exact} vs {power}");
    }

    #[test]
    fn large_inputs_use_power_iteration() {
        let ds = generate(DatasetKind::UniformSphere, 100, 10_001, 5).unwrap();
        let r = boundedness(&ds);
        assert_eq!(r.method, SpectralMethod::PowerIteration);
        assert!(r.r_estimate > 0.9 && r.r_estimate < 1.3, "R = {}", r.r_estimate);
    }

    #[test]
    fn uniform_sphere_is_nearly_one_bounded() {
        for seed in 0..5 {
            let ds = generate(DatasetKind::UniformSphere, 10, 100, seed).unwrap();
            let r = boundedness(&ds).r_estimate;
            assert!((0.9..=1.6).contains(&r), "R = {r}");
        }
    }

    #[test]
    fn never_exceeds_root_d() {
        for kind in DatasetKind::ALL {
            for m in [1, 2, 7] {
                let ds = generate(kind, 5, m, 3).unwrap();
                assert!(boundedness(&ds).r_estimate <= 5f64.sqrt() + 1e-6);
            }
        }
    }
}
