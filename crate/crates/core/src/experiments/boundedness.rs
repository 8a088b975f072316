use rayon::prelude::*;

use super::{BoundednessConfig, ExperimentConfig, RunRecord, SweepTable};
use crate::data::{boundedness, generate, DatasetKind, LabeledDataset, SpectralMethod};
use crate::linalg::mean;
use crate::rng::derive_seed;
use crate::{Error, Result};

/// Empirical `R` for each dataset kind plus a single point repeated `m`
/// times (`R = √d`).
///
/// The orthonormal basis uses `m = d`; the other kinds use
/// `m = sample_factor · d`. One row per kind, summarizing the replicates.
/// Columns: `table, kind, d, m, mean, min, max, method`.
pub fn run_boundedness(config: &BoundednessConfig) -> Result<RunRecord> {
    let d = config.dim;
    if config.replicates == 0 || config.sample_factor == 0 {
        return Err(Error::InvalidConfig("replicates and sample_factor must be positive".into()));
    }
    let m_random = config.sample_factor * d;
    let mut kinds: Vec<(&str, usize)> = DatasetKind::ALL
        .iter()
        .map(|k| (k.name(), if *k == DatasetKind::OrthonormalBasis { d } else { m_random }))
        .collect();
    kinds.push(("repeated-point", m_random));

    let mut record = RunRecord::new(ExperimentConfig::Boundedness(config.clone()));
    let mut table = SweepTable::new(&["table", "kind", "d", "m", "mean", "min", "max", "method"]);
    for &(name, m) in &kinds {
        let reports = (0..config.replicates as u64)
            .into_par_iter()
            .map(|r| {
                let seed = derive_seed(config.seed, r);
                let data = match name.parse::<DatasetKind>() {
                    Ok(kind) => generate(kind, d, m, seed)?,
                    Err(_) => repeated_point(d, m, seed)?,
                };
                Ok(boundedness(&data))
            })
            .collect::<Result<Vec<_>>>()?;
        let rs: Vec<f64> = reports.iter().map(|r| r.r_estimate).collect();
        let lo = rs.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = rs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let method = match reports[0].method {
            SpectralMethod::ExactSpectral => "exact-spectral",
            SpectralMethod::PowerIteration => "power-iteration",
        };
        table.push(vec!["boundedness".into(), name.into(), d.into(), m.into(), mean(&rs).into(), lo.into(), hi.into(), method.into()]);
        let key = name.replace('-', "_");
        record.set(&format!("r_{key}_min"), lo);
        record.set(&format!("r_{key}_max"), hi);
    }
    record.sweep = table;
    Ok(record)
}

/// One uniform point repeated `m` times.
fn repeated_point(d: usize, m: usize, seed: u64) -> Result<LabeledDataset> {
    let one = generate(DatasetKind::UniformSphere, d, 1, seed)?;
    let points = one.point(0).repeat(m);
    LabeledDataset::new(d, points, vec![1.0; m], DatasetKind::UniformSphere, seed)
}
