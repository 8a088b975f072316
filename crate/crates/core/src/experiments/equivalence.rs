use rayon::prelude::*;

use super::{EquivalenceConfig, ExperimentConfig, RunRecord, SweepTable};
use crate::data::{generate, DatasetKind, EmpiricalSource, LabeledDataset};
use crate::model::{sgd_train, NetworkWeights, SgdConfig};
use crate::rfs::{ntk_train, FeatureState, RfsConfig};
use crate::{Error, Result};

/// Network SGD at learning rate `η/B²` against NTK training at `η`, with the
/// same seed (hence the same Gaussian block, batches and returned step).
///
/// One row per `B`. Columns: `table, b, gap, gap_last, gap_frozen,
/// gap_frozen_last`, where `gap` is the sup over the probe set of
/// `|h₁(x) - h₂(x)|` between the returned iterates, `_last` compares the
/// final iterates and `_frozen` keeps the network's output weights at `±B`.
pub fn run_equivalence(config: &EquivalenceConfig) -> Result<RunRecord> {
    if config.init_scales.is_empty() {
        return Err(Error::InvalidConfig("init_scales must not be empty".into()));
    }
    let act = config.activation;
    let train = generate(DatasetKind::RandomLabeledSphere, config.dim, config.samples, config.seed)?;
    let probe = generate(DatasetKind::UniformSphere, config.dim, config.probe_points, config.seed ^ 0x5eed)?;
    let source = EmpiricalSource::new(&train);
    let rfs = RfsConfig {
        width: config.width,
        learning_rate: config.learning_rate,
        batch_size: config.batch_size,
        steps: config.steps,
        seed: config.seed,
    };
    let ntk = ntk_train(act, &rfs, &source, config.loss)?;

    let runs = config
        .init_scales
        .par_iter()
        .map(|&b| {
            let cells = [true, false].map(|train_output| -> Result<(f64, f64, Vec<f64>)> {
                let sgd = SgdConfig {
                    width: config.width,
                    init_scale: b,
                    learning_rate: config.learning_rate / (b * b),
                    batch_size: config.batch_size,
                    steps: config.steps,
                    seed: config.seed,
                    train_output,
                };
                // Non-finite losses here come from `±B` products that no longer cancel.
                let run = sgd_train(&sgd, &source, config.loss, act).map_err(|e| match e {
                    Error::Diverged { .. } => Error::Overflow { b },
                    other => other,
                })?;
                let returned = sup_gap(&run.returned, &ntk.returned, &probe, config, b)?;
                let last = sup_gap(&run.last, &ntk.last, &probe, config, b)?;
                Ok((returned, last, run.trace.losses))
            });
            let [trained, frozen] = cells;
            Ok((trained?, frozen?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut record = RunRecord::new(ExperimentConfig::Equivalence(config.clone()));
    let mut table = SweepTable::new(&["table", "b", "gap", "gap_last", "gap_frozen", "gap_frozen_last"]);
    for (&b, (trained, frozen)) in config.init_scales.iter().zip(&runs) {
        table.push(vec!["equivalence".into(), b.into(), trained.0.into(), trained.1.into(), frozen.0.into(), frozen.1.into()]);
    }
    let gaps: Vec<f64> = runs.iter().map(|r| r.0 .0).collect();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let last = runs.last().expect("nonempty sweep");
    record.trace = last.0 .2.clone();
    record.set("gap_at_max_b", last.0 .0);
    record.set("frozen_gap_at_max_b", last.1 .0);
    record.set("gap_decreasing", decreasing as u8 as f64);
    record.set("ntk_returned_step", ntk.trace.returned_step as f64);
    record.check("gap_decreasing_in_b", decreasing, format!("{gaps:?}"));
    record.sweep = table;
    Ok(record)
}

fn sup_gap(w: &NetworkWeights, f: &FeatureState, probe: &LabeledDataset, config: &EquivalenceConfig, b: f64) -> Result<f64> {
    let mut worst = 0.0f64;
    for i in 0..probe.len() {
        let x = probe.point(i);
        let gap = (w.forward(config.activation, x)? - f.predict(x)?).abs();
        if !gap.is_finite() {
            return Err(Error::Overflow { b });
        }
        worst = worst.max(gap);
    }
    Ok(worst)
}
