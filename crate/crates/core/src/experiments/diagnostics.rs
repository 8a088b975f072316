use rand::Rng;

use super::{
    run_boundedness, run_duals, run_kernel_approx, BoundednessConfig, Cell, DiagnosticsConfig, DualsConfig,
    ExperimentConfig, KernelApproxConfig, RunRecord, SweepTable,
};
use crate::data::{generate, io, DatasetKind};
use crate::hermite::quadrature::GaussRule;
use crate::hermite::{hermite_eval, node_count};
use crate::linalg::{dot, mean, norm, std_dev};
use crate::model::{batch_loss, gradient, init_weights, Batch, NetworkWeights};
use crate::rfs::{embed, empirical_kernel, ntk_kernel_exact, FeatureDirections, RfsSpec};
use crate::rng::{derive_seed, gaussian, sphere_point, stream_rng, Stream};
use crate::{Activation, Loss, Result};

/// Runs the numerical self-checks and collects one row per measured item.
///
/// A failing item is recorded as a failed check and the run continues;
/// only I/O or configuration errors abort. Columns: `table, item, value,
/// passed` (`passed` is 1 or 0, empty for informational rows).
pub fn run_diagnostics(config: &DiagnosticsConfig) -> Result<RunRecord> {
    let mut record = RunRecord::new(ExperimentConfig::Diagnostics(config.clone()));
    let mut table = SweepTable::new(&["table", "item", "value", "passed"]);
    let mut item = |record: &mut RunRecord, tab: &str, name: &str, value: f64, ok: Option<bool>| {
        let passed = match ok {
            Some(p) => {
                record.check(&format!("{tab}/{name}"), p, format!("{value:.6e}"));
                Cell::Num(p as u8 as f64)
            }
            None => Cell::Text(String::new()),
        };
        table.push(vec![tab.into(), name.into(), value.into(), passed]);
    };
    let seed = config.seed;

    let err = orthonormality_error(30);
    item(&mut record, "hermite", "orthonormality_error_n30", err, Some(err < 1e-10));

    match run_duals(&DualsConfig { order: config.order, rhos: vec![-0.9, -0.5, 0.0, 0.5, 0.9, 1.0], ..Default::default() }) {
        Ok(duals) => {
            for row in &duals.sweep.rows {
                if let (Cell::Num(rho), Cell::Num(c), Cell::Num(q)) = (&row[1], &row[6], &row[7]) {
                    let e = (c - q).abs();
                    item(&mut record, "duals", &format!("relu_deriv_dual_error_rho_{rho}"), e, Some(e < 1e-3));
                }
                if let (Cell::Num(rho), Cell::Num(c), Cell::Num(q)) = (&row[1], &row[3], &row[4]) {
                    let e = (c - q).abs();
                    item(&mut record, "duals", &format!("relu_dual_error_rho_{rho}"), e, Some(e < 1e-3));
                }
            }
            let v0 = duals.metric("deriv_dual_at_0").unwrap_or(f64::NAN);
            let v1 = duals.metric("deriv_dual_at_1").unwrap_or(f64::NAN);
            item(&mut record, "duals", "relu_deriv_dual_at_0", v0, Some((v0 - 0.25).abs() < 1e-3));
            item(&mut record, "duals", "relu_deriv_dual_at_1", v1, Some((v1 - 0.5).abs() < 1e-3));
            let tail = duals.metric("norm_sq").unwrap_or(0.0) - duals.metric("partial_norm_sq").unwrap_or(0.0);
            item(&mut record, "duals", "relu_tail_mass", tail, Some((0.0..1e-3).contains(&tail)));
        }
        Err(e) => record.check("duals", false, e.to_string()),
    }

    match run_kernel_approx(&KernelApproxConfig { seed, approx_dims: vec![4, 16, 64], ..Default::default() }) {
        Ok(k) => {
            for (q, s) in k.sweep.values("kernel", "q").iter().zip(k.sweep.values("kernel", "std")) {
                item(&mut record, "kernel", &format!("std_q_{q}"), s, None);
            }
            let slope = k.metric("kernel_std_slope").unwrap_or(f64::NAN);
            item(&mut record, "kernel", "std_slope", slope, Some((slope + 0.5).abs() <= 0.1));
            let slope = k.metric("approx_error_slope").unwrap_or(f64::NAN);
            item(&mut record, "kernel", "approx_error_slope_in_d", slope, Some((slope + 0.5).abs() <= 0.15));
        }
        Err(e) => record.check("kernel", false, e.to_string()),
    }

    match unbiasedness_worst_z(seed, 10, 500) {
        Ok(z) => item(&mut record, "kernel", "unbiasedness_worst_abs_z", z, Some(z < 3.0)),
        Err(e) => record.check("kernel/unbiasedness", false, e.to_string()),
    }
    match embedding_norm_excess(seed) {
        Ok(x) => item(&mut record, "kernel", "embedding_norm_minus_bound", x, Some(x <= 1e-12)),
        Err(e) => record.check("kernel/embedding_norm", false, e.to_string()),
    }

    match zero_output(seed) {
        Ok(v) => item(&mut record, "model", "max_initial_output", v, Some(v <= 1e-9)),
        Err(e) => record.check("model/zero_output", false, e.to_string()),
    }
    match gradient_check(seed, 20) {
        Ok(v) => item(&mut record, "model", "gradient_relative_error", v, Some(v < 1e-5)),
        Err(e) => record.check("model/gradient", false, e.to_string()),
    }

    match run_boundedness(&BoundednessConfig { seed, ..Default::default() }) {
        Ok(b) => {
            let d = BoundednessConfig::default().dim as f64;
            let orth = b.metric("r_orthonormal_basis_max").unwrap_or(f64::NAN);
            item(&mut record, "boundedness", "orthonormal_basis", orth, Some((orth - 1.0).abs() <= 1e-8));
            let (lo, hi) = (b.metric("r_uniform_sphere_min").unwrap_or(f64::NAN), b.metric("r_uniform_sphere_max").unwrap_or(f64::NAN));
            item(&mut record, "boundedness", "uniform_sphere_min", lo, Some(lo >= 0.9));
            item(&mut record, "boundedness", "uniform_sphere_max", hi, Some(hi <= 1.6));
            let cube = b.metric("r_discrete_cube_max").unwrap_or(f64::NAN);
            item(&mut record, "boundedness", "discrete_cube_max", cube, None);
            let rep = b.metric("r_repeated_point_min").unwrap_or(f64::NAN);
            item(&mut record, "boundedness", "repeated_point", rep, Some((rep - d.sqrt()).abs() <= 1e-6));
        }
        Err(e) => record.check("boundedness", false, e.to_string()),
    }

    match io_round_trip(seed) {
        Ok(ok) => item(&mut record, "data", "text_round_trip_exact", ok as u8 as f64, Some(ok)),
        Err(e) => record.check("data/io", false, e.to_string()),
    }

    let failures = record.checks.iter().filter(|c| !c.passed).count();
    record.set("failed_checks", failures as f64);
    record.set("total_checks", record.checks.len() as f64);
    record.sweep = table;
    Ok(record)
}

/// `max |E[hᵢ hⱼ] - δᵢⱼ|` over `i, j ≤ n` under Gauss–Hermite quadrature.
fn orthonormality_error(n: usize) -> f64 {
    let rule = GaussRule::hermite(node_count(n));
    let mut worst = 0.0f64;
    for i in 0..=n {
        for j in 0..=i {
            let v = rule.expect(|x| hermite_eval(i, x).unwrap() * hermite_eval(j, x).unwrap());
            let want = if i == j { 1.0 } else { 0.0 };
            worst = worst.max((v - want).abs());
        }
    }
    worst
}

/// Worst `|mean k_ω - k| / se` over random pairs at a small width.
fn unbiasedness_worst_z(seed: u64, pairs: usize, draws: u64) -> Result<f64> {
    let d = 6;
    let spec = RfsSpec::ntk(Activation::Relu);
    let mut rng = stream_rng(derive_seed(seed, 7), Stream::Probe);
    let mut worst = 0.0f64;
    for p in 0..pairs as u64 {
        let (mut x, mut y) = (vec![0.0; d], vec![0.0; d]);
        sphere_point(&mut rng, &mut x);
        sphere_point(&mut rng, &mut y);
        let exact = ntk_kernel_exact(Activation::Relu, f64::INFINITY, dot(&x, &y).clamp(-1.0, 1.0))?;
        let vals = (0..draws)
            .map(|r| empirical_kernel(&spec, &FeatureDirections::sample(10, d, derive_seed(seed + p, r))?, &x, &y))
            .collect::<Result<Vec<f64>>>()?;
        let se = std_dev(&vals) / (vals.len() as f64).sqrt();
        worst = worst.max((mean(&vals) - exact).abs() / se.max(1e-300));
    }
    Ok(worst)
}

/// `max ‖Ψ_ω(x)‖ - C` over random inputs.
fn embedding_norm_excess(seed: u64) -> Result<f64> {
    let mut worst = f64::NEG_INFINITY;
    let mut rng = stream_rng(seed, Stream::Probe);
    for act in Activation::ALL {
        let spec = RfsSpec::ntk(act);
        let dirs = FeatureDirections::sample(50, 8, seed)?;
        for _ in 0..20 {
            let mut x = vec![0.0; 8];
            sphere_point(&mut rng, &mut x);
            worst = worst.max(norm(&embed(&spec, &dirs, &x)?) - spec.bound());
        }
    }
    Ok(worst)
}

fn zero_output(seed: u64) -> Result<f64> {
    let mut worst = 0.0f64;
    let mut rng = stream_rng(seed, Stream::Probe);
    for (d, q, b) in [(8, 4, 1.0), (64, 256, 1e3)] {
        let w = init_weights(d, q, b, seed)?;
        let mut x = vec![0.0; d];
        for _ in 0..50 {
            sphere_point(&mut rng, &mut x);
            worst = worst.max(w.forward(Activation::Relu, &x)?.abs());
        }
    }
    Ok(worst)
}

/// Worst relative error of the analytic gradient against central
/// differences, softplus network with logistic loss.
fn gradient_check(seed: u64, cases: u64) -> Result<f64> {
    let (d, q, h) = (4, 3, 1e-6);
    let mut worst = 0.0f64;
    for c in 0..cases {
        let mut rng = stream_rng(derive_seed(seed, c), Stream::Probe);
        let hidden: Vec<f64> = (0..2 * q * d).map(|_| gaussian(&mut rng)).collect();
        let output: Vec<f64> = (0..2 * q).map(|_| gaussian(&mut rng)).collect();
        let w = NetworkWeights::from_parts(d, hidden.clone(), output.clone(), 1.0)?;
        let mut batch = Batch::new(d);
        for _ in 0..3 {
            let mut x = vec![0.0; d];
            sphere_point(&mut rng, &mut x);
            batch.push(&x, if rng.random::<bool>() { 1.0 } else { -1.0 })?;
        }
        let g = gradient(&w, Activation::Softplus, &batch, Loss::Logistic)?;
        let analytic: Vec<f64> = g.hidden.iter().chain(&g.output).copied().collect();
        let mut params: Vec<f64> = hidden.iter().chain(&output).copied().collect();
        let mut numeric = Vec::with_capacity(params.len());
        for k in 0..params.len() {
            let orig = params[k];
            let eval = |v: f64, params: &mut Vec<f64>| -> Result<f64> {
                params[k] = v;
                let (hp, op) = params.split_at(2 * q * d);
                batch_loss(&NetworkWeights::from_parts(d, hp.to_vec(), op.to_vec(), 1.0)?, Activation::Softplus, &batch, Loss::Logistic)
            };
            let up = eval(orig + h, &mut params)?;
            let down = eval(orig - h, &mut params)?;
            params[k] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        worst = worst.max(norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12));
    }
    Ok(worst)
}

fn io_round_trip(seed: u64) -> Result<bool> {
    let data = generate(DatasetKind::RandomLabeledSphere, 5, 20, seed)?;
    let mut buf = Vec::new();
    io::write_dataset(&data, &mut buf)?;
    Ok(io::read_dataset(buf.as_slice())? == data)
}
