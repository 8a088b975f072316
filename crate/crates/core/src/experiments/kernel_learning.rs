use rayon::prelude::*;

use super::{ExperimentConfig, KernelLearningConfig, RunRecord, SweepTable};
use crate::data::{generate, DatasetKind, TargetSource};
use crate::hermite::DEFAULT_ORDER;
use crate::linalg::{log_log_slope, mean};
use crate::rfs::{rfs_train_observed, FeatureState, MonomialTarget, RfsConfig, RfsSpec};
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Population boundedness constant of the uniform sphere.
const SPHERE_R: f64 = 1.0;

/// RFS SGD on fresh uniform-sphere samples labeled by `f*(x) = w⟨e₁, x⟩ⁿ`
/// (or `sign f*`), with `η = M/(√T·L·C)` and `M = |w|·‖⟨e₁, ·⟩ⁿ‖ₖ`.
///
/// `E_t L_D(V_t)` is estimated by averaging the held-out loss of the iterate
/// at the midpoint of each of `checkpoints` equal blocks of steps, which is
/// a stratified sample of the uniform choice of returned step.
///
/// Rows of table `steps` vary `T` at width `wide`; rows of table `width`
/// vary `q` at `long` steps. Columns: `table, q, steps, eta, excess,
/// excess_returned, zero_one, bound, ratio`, where `excess` is the
/// stratified estimate minus `L_D(f*)`, `excess_returned` uses the returned
/// iterate alone, `zero_one` is the sign disagreement with `f*`, `bound` is
/// `L·R·C·M/√(qd) + L·C·M/√T` and `ratio = excess / bound`. Values are means
/// over replicates.
pub fn run_kernel_learning(config: &KernelLearningConfig) -> Result<RunRecord> {
    let loss = config.loss;
    let lipschitz = loss
        .lipschitz()
        .ok_or_else(|| Error::InvalidConfig(format!("the {loss} loss is not Lipschitz")))?;
    if loss.needs_sign_labels() && !config.sign_labels {
        return Err(Error::InvalidConfig(format!("the {loss} loss needs sign_labels = true")));
    }
    if config.replicates == 0 || config.checkpoints == 0 || config.test_points == 0 {
        return Err(Error::InvalidConfig("replicates, checkpoints and test_points must be positive".into()));
    }
    let act = config.activation;
    let d = config.dim;
    let series = act.duals(DEFAULT_ORDER)?.derivative.clone();
    let mut x0 = vec![0.0; d];
    x0[0] = 1.0;
    let mut target = MonomialTarget::new(d);
    target.push(config.target_weight, &x0, config.target_degree, &series)?;
    let m_norm = target.rkhs_norm_sq().sqrt();
    let c = act.derivative_bound();

    let label = |v: f64| if config.sign_labels { if v >= 0.0 { 1.0 } else { -1.0 } } else { v };
    let test = generate(DatasetKind::UniformSphere, d, config.test_points, derive_seed(config.seed, u64::MAX))?;
    let truth: Vec<f64> = (0..test.len()).map(|i| target.eval(test.point(i))).collect();
    let labels: Vec<f64> = truth.iter().map(|&v| label(v)).collect();
    let optimum = mean(&truth.iter().zip(&labels).map(|(&p, &y)| loss.value(p, y)).collect::<Vec<_>>());

    let mut cells: Vec<(&str, usize, usize)> = config.step_grid.iter().map(|&t| ("steps", config.wide, t)).collect();
    cells.extend(config.width_grid.iter().map(|&q| ("width", q, config.long)));
    let jobs: Vec<(usize, u64)> = (0..cells.len()).flat_map(|c| (0..config.replicates as u64).map(move |r| (c, r))).collect();

    let test_loss = |f: &FeatureState| {
        let total: f64 = (0..test.len()).map(|i| loss.value(f.predict_unchecked(test.point(i)), labels[i])).sum();
        total / test.len() as f64
    };
    let outcomes = jobs
        .par_iter()
        .map(|&(cell, r)| {
            let (_, q, steps) = cells[cell];
            let eta = m_norm / ((steps as f64).sqrt() * lipschitz * c);
            let rfs = RfsConfig { width: q, learning_rate: eta, batch_size: config.batch_size, steps, seed: derive_seed(config.seed, r) };
            let source = TargetSource::new(d, |x: &[f64]| label(target.eval(x)));
            let k = config.checkpoints.min(steps);
            let mut acc = Vec::with_capacity(k);
            let run = rfs_train_observed(&RfsSpec::ntk(act), &rfs, &source, loss, &mut |t, state| {
                let block = (t - 1) * k / steps;
                if t == block * steps / k + steps / (2 * k) + 1 {
                    acc.push(test_loss(state));
                }
            })?;
            let zero_one = (0..test.len())
                .filter(|&i| run.returned.predict_unchecked(test.point(i)) * truth[i] <= 0.0 && truth[i] != 0.0)
                .count() as f64
                / test.len() as f64;
            Ok((mean(&acc) - optimum, test_loss(&run.returned) - optimum, zero_one, run.trace.losses))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut record = RunRecord::new(ExperimentConfig::KernelLearning(config.clone()));
    let mut table = SweepTable::new(&["table", "q", "steps", "eta", "excess", "excess_returned", "zero_one", "bound", "ratio"]);
    let mut max_ratio = 0.0f64;
    for (i, &(name, q, steps)) in cells.iter().enumerate() {
        let reps = &outcomes[i * config.replicates..(i + 1) * config.replicates];
        let excess = mean(&reps.iter().map(|o| o.0).collect::<Vec<_>>());
        let returned = mean(&reps.iter().map(|o| o.1).collect::<Vec<_>>());
        let zero_one = mean(&reps.iter().map(|o| o.2).collect::<Vec<_>>());
        let bound = lipschitz * SPHERE_R * c * m_norm / ((q * d) as f64).sqrt() + lipschitz * c * m_norm / (steps as f64).sqrt();
        let eta = m_norm / ((steps as f64).sqrt() * lipschitz * c);
        let ratio = if bound > 0.0 { excess / bound } else { 0.0 };
        max_ratio = max_ratio.max(ratio);
        table.push(vec![
            name.into(),
            q.into(),
            steps.into(),
            eta.into(),
            excess.into(),
            returned.into(),
            zero_one.into(),
            bound.into(),
            ratio.into(),
        ]);
    }
    record.trace = outcomes.first().map(|o| o.3.clone()).unwrap_or_default();
    record.set("rkhs_norm", m_norm);
    record.set("optimal_test_loss", optimum);
    record.set("max_ratio", max_ratio);
    for (tab, axis, metric) in [("steps", "steps", "slope_steps"), ("width", "q", "slope_width")] {
        let (xs, ys) = (table.values(tab, axis), table.values(tab, "excess"));
        if xs.len() >= 2 && ys.iter().all(|&v| v > 0.0) {
            record.set(metric, log_log_slope(&xs, &ys));
        }
    }
    record.check("excess_within_bound", max_ratio <= 1.1, format!("max excess / bound = {max_ratio:.3}"));
    record.sweep = table;
    Ok(record)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Loss;

    fn small() -> KernelLearningConfig {
        KernelLearningConfig {
            dim: 5,
            wide: 50,
            step_grid: vec![50, 200],
            long: 400,
            width_grid: vec![4, 16],
            replicates: 2,
            test_points: 300,
            checkpoints: 5,
            ..Default::default()
        }
    }

    #[test]
    fn zero_target_has_zero_excess() {
        let r = run_kernel_learning(&KernelLearningConfig { target_weight: 0.0, ..small() }).unwrap();
        assert_eq!(r.metric("rkhs_norm"), Some(0.0));
        for tab in ["steps", "width"] {
            assert!(r.sweep.values(tab, "excess").iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn excess_stays_below_the_bound() {
        let r = run_kernel_learning(&small()).unwrap();
        assert!(r.all_checks_pass(), "{:?}", r.checks);
        assert_eq!(r.sweep.rows.len(), 4);
        assert_eq!(r.trace.len(), 50);
    }

    #[test]
    fn sign_labels_with_hinge() {
        let c = KernelLearningConfig { loss: Loss::Hinge, sign_labels: true, ..small() };
        let r = run_kernel_learning(&c).unwrap();
        assert!(r.sweep.values("width", "zero_one").iter().all(|&v| (0.0..=1.0).contains(&v)));
        assert!(run_kernel_learning(&KernelLearningConfig { loss: Loss::Hinge, ..small() }).is_err());
        assert!(run_kernel_learning(&KernelLearningConfig { loss: Loss::Square, ..small() }).is_err());
    }
}
