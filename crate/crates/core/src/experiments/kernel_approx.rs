use std::sync::Arc;

use rayon::prelude::*;

use super::{ExperimentConfig, KernelApproxConfig, RunRecord, SweepTable};
use crate::hermite::DEFAULT_ORDER;
use crate::linalg::{dot, log_log_slope, mean, std_dev};
use crate::rfs::{check_f_monomial, empirical_kernel, ntk_kernel_exact, witness_vector, FeatureDirections, FeatureState, RfsSpec};
use crate::rng::{derive_seed, sphere_point, stream_rng, Stream};
use crate::{Error, Result};

/// Two sweeps over the NTK random feature scheme.
///
/// `kernel` rows: spread of `k_ω(x, x′)` for one fixed pair across
/// independent draws of `ω`, per width `q`; `reference` is `k(x, x′)`.
///
/// `approx` rows: `L²` error of `f_ω(x) = ⟨v*, Ψ_ω(x)⟩` for the target
/// `⟨e₁, x⟩ⁿ`, per input dimension `d`; `mean` is the root mean square over
/// draws and `reference` is `C‖f‖ₖ/√(qd)` (uniform inputs are 1-bounded).
///
/// Columns: `table, q, d, mean, std, reference, bias_z`.
pub fn run_kernel_approx(config: &KernelApproxConfig) -> Result<RunRecord> {
    if config.replicates < 2 || config.approx_replicates < 2 {
        return Err(Error::InvalidConfig("at least two replicates are needed for a spread".into()));
    }
    let act = config.activation;
    let spec = RfsSpec::ntk(act);
    let mut record = RunRecord::new(ExperimentConfig::KernelApprox(config.clone()));
    let mut table = SweepTable::new(&["table", "q", "d", "mean", "std", "reference", "bias_z"]);

    let d = config.dim;
    let mut probe = stream_rng(config.seed, Stream::Probe);
    let (mut x, mut x2) = (vec![0.0; d], vec![0.0; d]);
    sphere_point(&mut probe, &mut x);
    sphere_point(&mut probe, &mut x2);
    let exact = ntk_kernel_exact(act, f64::INFINITY, dot(&x, &x2).clamp(-1.0, 1.0))?;
    let mut stds = Vec::new();
    let mut worst_z = 0.0f64;
    for &q in &config.widths {
        let base = derive_seed(config.seed, q as u64);
        let values = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let dirs = FeatureDirections::sample(q, d, derive_seed(base, r))?;
                empirical_kernel(&spec, &dirs, &x, &x2)
            })
            .collect::<Result<Vec<f64>>>()?;
        let (m, s) = (mean(&values), std_dev(&values));
        let z = (m - exact) / (s / (values.len() as f64).sqrt());
        worst_z = worst_z.max(z.abs());
        stds.push(s);
        table.push(vec!["kernel".into(), q.into(), d.into(), m.into(), s.into(), exact.into(), z.into()]);
    }
    let widths: Vec<f64> = config.widths.iter().map(|&q| q as f64).collect();
    if widths.len() >= 2 {
        record.set("kernel_std_slope", log_log_slope(&widths, &stds));
    }
    record.set("kernel_max_bias_z", worst_z);

    let series = act.duals(DEFAULT_ORDER)?.derivative.clone();
    let q = config.approx_width;
    let mut errors = Vec::new();
    for &d in &config.approx_dims {
        let mut x0 = vec![0.0; d];
        x0[0] = 1.0;
        let target = check_f_monomial(&x0, config.approx_degree, &series)?;
        let norm = target.rkhs_norm_sq().sqrt();
        let base = derive_seed(config.seed, 1_000_000 + d as u64);
        let mut rng = stream_rng(base, Stream::Probe);
        let mut points = vec![0.0; d * config.approx_points];
        points.chunks_exact_mut(d).for_each(|p| sphere_point(&mut rng, p));
        let truth: Vec<f64> = points.chunks_exact(d).map(|p| target.eval(p)).collect();
        let errs = (0..config.approx_replicates as u64)
            .into_par_iter()
            .map(|r| {
                let dirs = Arc::new(FeatureDirections::sample(q, d, derive_seed(base, r))?);
                let v = witness_vector(&target, &dirs);
                let f = FeatureState::with_coeffs(spec.clone(), dirs, v)?;
                let sq: f64 = points.chunks_exact(d).zip(&truth).map(|(p, t)| (f.predict_unchecked(p) - t).powi(2)).sum();
                Ok((sq / truth.len() as f64).sqrt())
            })
            .collect::<Result<Vec<f64>>>()?;
        let rms = (errs.iter().map(|e| e * e).sum::<f64>() / errs.len() as f64).sqrt();
        let reference = act.derivative_bound() * norm / ((q * d) as f64).sqrt();
        errors.push(rms);
        table.push(vec!["approx".into(), q.into(), d.into(), rms.into(), std_dev(&errs).into(), reference.into(), 0.0.into()]);
    }
    let dims: Vec<f64> = config.approx_dims.iter().map(|&d| d as f64).collect();
    if dims.len() >= 2 {
        record.set("approx_error_slope", log_log_slope(&dims, &errors));
    }
    record.sweep = table;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_sweep_has_the_expected_shape() {
        let c = KernelApproxConfig {
            widths: vec![10, 40],
            replicates: 50,
            approx_dims: vec![4, 64],
            approx_width: 20,
            approx_replicates: 10,
            approx_points: 200,
            ..Default::default()
        };
        let r = run_kernel_approx(&c).unwrap();
        assert_eq!(r.sweep.values("kernel", "std").len(), 2);
        assert_eq!(r.sweep.values("approx", "mean").len(), 2);
        assert!(r.metric("kernel_std_slope").unwrap() < 0.0);
        assert!(r.metric("approx_error_slope").unwrap() < 0.0);
        let again = run_kernel_approx(&c).unwrap();
        assert!(r.same_results(&again));
    }
}
