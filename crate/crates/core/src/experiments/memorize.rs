use std::collections::BTreeMap;

use rayon::prelude::*;

use super::{ExperimentConfig, MemorizeConfig, RunRecord, SweepTable};
use crate::data::{default_c_prime, generate, memorization_witness, DatasetKind, EmpiricalSource};
use crate::hermite::DEFAULT_ORDER;
use crate::linalg::{mean, median};
use crate::model::{memorized_fraction, sgd_train, SgdConfig};
use crate::rfs::FeatureDirections;
use crate::rng::derive_seed;
use crate::{Error, Result};

const TRAIN_STREAM: u64 = 1 << 32;
const WITNESS_STREAM: u64 = 2 << 32;

/// `q = κ·m·ln³m / (2d)`, at least 1.
pub fn memorization_width(kappa: f64, m: usize, d: usize) -> usize {
    let m_f = m as f64;
    ((kappa * m_f * m_f.ln().powi(3) / (2.0 * d as f64)).round() as usize).max(1)
}

/// `T = τ·m / ε²`, at least 1.
pub fn memorization_steps(tau: f64, m: usize, epsilon: f64) -> usize {
    ((tau * m as f64 / (epsilon * epsilon)).round() as usize).max(1)
}

/// `q = κ_w·(m/d)·ln³m`, at least 1.
pub fn witness_width(kappa: f64, m: usize, d: usize) -> usize {
    let m_f = m as f64;
    ((kappa * m_f / d as f64 * m_f.ln().powi(3)).round() as usize).max(1)
}

/// Network SGD on random ±1 labels over `m` sphere points, reporting the
/// fraction of training points with positive margin at the returned iterate.
///
/// Replicate `r` uses the same dataset and training seed in every cell, so
/// cells differ only in `q` and `T`. Table `q-sweep` varies `κ` by
/// `kappa_factors` at `epsilon`; table `t-sweep` varies `ε` over `epsilons`
/// at `kappa`. Tables `witness-agreement` and `witness-norm-ratio`
/// summarize the explicit vector `v` over replicates: the fraction of
/// points with `yᵢ⟨v, Ψ_ω(xᵢ)⟩ > 0` and `‖v‖²/m`.
///
/// Columns: `table, q, steps, epsilon, median, min, mean, max`.
pub fn run_memorization(config: &MemorizeConfig) -> Result<RunRecord> {
    let (d, m) = (config.dim, config.samples);
    if config.replicates == 0 {
        return Err(Error::InvalidConfig("replicates must be positive".into()));
    }
    if config.epsilons.iter().chain([&config.epsilon]).any(|&e| !(e > 0.0 && e < 1.0)) {
        return Err(Error::InvalidConfig("every epsilon must lie in (0, 1)".into()));
    }
    let act = config.activation;
    let q_main = memorization_width(config.kappa, m, d);
    let t_main = memorization_steps(config.tau, m, config.epsilon);
    let q_cells: Vec<(usize, usize, f64)> = config
        .kappa_factors
        .iter()
        .map(|&f| (memorization_width(config.kappa * f, m, d), t_main, config.epsilon))
        .collect();
    let t_cells: Vec<(usize, usize, f64)> =
        config.epsilons.iter().map(|&e| (q_main, memorization_steps(config.tau, m, e), e)).collect();

    let mut cells: Vec<(usize, usize)> = vec![(q_main, t_main)];
    cells.extend(q_cells.iter().chain(&t_cells).map(|&(q, t, _)| (q, t)));
    cells.sort_unstable();
    cells.dedup();
    let jobs: Vec<((usize, usize), u64)> =
        cells.iter().flat_map(|&c| (0..config.replicates as u64).map(move |r| (c, r))).collect();
    let results = jobs
        .par_iter()
        .map(|&((q, steps), r)| {
            let data = generate(DatasetKind::RandomLabeledSphere, d, m, derive_seed(config.seed, r))?;
            let sgd = SgdConfig {
                width: q,
                init_scale: config.init_scale,
                learning_rate: config.learning_rate,
                batch_size: config.batch_size,
                steps,
                seed: derive_seed(config.seed, TRAIN_STREAM | r),
                train_output: true,
            };
            let run = sgd_train(&sgd, &EmpiricalSource::new(&data), config.loss, act)?;
            let w = &run.returned;
            let frac = memorized_fraction(|x| w.predict(act, x), data.points(), data.labels());
            Ok((frac, run.trace.losses))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut by_cell: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for (&(cell, _), (frac, _)) in jobs.iter().zip(&results) {
        by_cell.entry(cell).or_default().push(*frac);
    }

    let mut record = RunRecord::new(ExperimentConfig::Memorize(config.clone()));
    let mut table = SweepTable::new(&["table", "q", "steps", "epsilon", "median", "min", "mean", "max"]);
    let summary = |name: &str, q: usize, steps: usize, eps: f64, xs: &[f64]| {
        let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vec![name.into(), q.into(), steps.into(), eps.into(), median(xs).into(), lo.into(), mean(xs).into(), hi.into()]
    };
    for (name, group) in [("q-sweep", &q_cells), ("t-sweep", &t_cells)] {
        for &(q, steps, eps) in group.iter() {
            table.push(summary(name, q, steps, eps, &by_cell[&(q, steps)]));
        }
    }
    let main = &by_cell[&(q_main, t_main)];
    record.trace = jobs
        .iter()
        .zip(&results)
        .find(|((cell, r), _)| *cell == (q_main, t_main) && *r == 0)
        .map(|(_, (_, losses))| losses.clone())
        .unwrap_or_default();
    record.set("width", q_main as f64);
    record.set("steps", t_main as f64);
    record.set("median_memorized_fraction", median(main));
    record.set("min_memorized_fraction", main.iter().copied().fold(f64::INFINITY, f64::min));
    record.set("median_training_error", 1.0 - median(main));

    let nondecreasing = |group: &[(usize, usize, f64)], key: fn(&(usize, usize, f64)) -> usize| {
        let mut sorted: Vec<_> = group.to_vec();
        sorted.sort_by_key(key);
        let medians: Vec<f64> = sorted.iter().map(|&(q, t, _)| median(&by_cell[&(q, t)])).collect();
        (medians.windows(2).all(|w| w[1] >= w[0]), medians)
    };
    let (q_mono, q_medians) = nondecreasing(&q_cells, |c| c.0);
    let (t_mono, t_medians) = nondecreasing(&t_cells, |c| c.1);
    record.check("fraction_nondecreasing_in_q", q_mono, format!("{q_medians:?}"));
    record.check("fraction_nondecreasing_in_t", t_mono, format!("{t_medians:?}"));
    for &(q, t, eps) in &t_cells {
        let med = median(&by_cell[&(q, t)]);
        record.check(&format!("fraction_at_least_1_minus_eps_{eps}"), med >= 1.0 - eps, format!("median {med:.4}"));
    }

    if config.witness {
        let duals = act.duals(DEFAULT_ORDER)?;
        let c_prime = match config.c_prime {
            Some(c) => c,
            None => default_c_prime(d, m, &duals.derivative)?,
        };
        let q_w = witness_width(config.witness_kappa, m, d);
        let reports = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let data = generate(DatasetKind::RandomLabeledSphere, d, m, derive_seed(config.seed, r))?;
                let dirs = FeatureDirections::sample(q_w, d, derive_seed(config.seed, WITNESS_STREAM | r))?;
                let report = memorization_witness(&data, &dirs, c_prime, act)?;
                Ok((report.sign_agreement(), report.norm_sq / m as f64))
            })
            .collect::<Result<Vec<_>>>()?;
        let agreement: Vec<f64> = reports.iter().map(|r| r.0).collect();
        let ratio: Vec<f64> = reports.iter().map(|r| r.1).collect();
        table.push(summary("witness-agreement", q_w, 0, 0.0, &agreement));
        table.push(summary("witness-norm-ratio", q_w, 0, 0.0, &ratio));
        record.set("c_prime", c_prime as f64);
        record.set("witness_width", q_w as f64);
        record.set("witness_min_agreement_fraction", agreement.iter().copied().fold(f64::INFINITY, f64::min));
        record.set("witness_median_agreement_fraction", median(&agreement));
        record.set("witness_max_norm_ratio", ratio.iter().copied().fold(0.0, f64::max));
        record.set("witness_median_norm_ratio", median(&ratio));
    }
    record.sweep = table;
    Ok(record)
}
