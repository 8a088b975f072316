use super::{DualsConfig, ExperimentConfig, RunRecord, SweepTable};
use crate::hermite::quadrature::correlated_expectation;
use crate::hermite::{dual_activation, dual_activation_closed};
use crate::Result;

/// Tabulates `σ̂` and `σ̂′` from the Hermite series against a direct
/// two-dimensional quadrature of `E[f(X) f(Y)]`.
///
/// Columns: `table, rho, dual, dual_closed, dual_quadrature, deriv_dual,
/// deriv_dual_closed, deriv_quadrature`.
pub fn run_duals(config: &DualsConfig) -> Result<RunRecord> {
    let act = config.activation;
    let duals = act.duals(config.order)?;
    let mut record = RunRecord::new(ExperimentConfig::Duals(config.clone()));
    let mut table = SweepTable::new(&[
        "table",
        "rho",
        "dual",
        "dual_closed",
        "dual_quadrature",
        "deriv_dual",
        "deriv_dual_closed",
        "deriv_quadrature",
    ]);
    let (mut err, mut err_deriv) = (0.0f64, 0.0f64);
    let (f, g) = (|x: f64| act.value(x), |x: f64| act.derivative(x));
    for &rho in &config.rhos {
        let quad = correlated_expectation(f, act.kinks(), f, act.kinks(), rho, config.oracle_nodes);
        let quad_deriv = correlated_expectation(g, act.kinks(), g, act.kinks(), rho, config.oracle_nodes);
        let closed = dual_activation_closed(&duals.value, rho)?;
        let closed_deriv = dual_activation_closed(&duals.derivative, rho)?;
        err = err.max((closed - quad).abs());
        err_deriv = err_deriv.max((closed_deriv - quad_deriv).abs());
        table.push(vec![
            "duals".into(),
            rho.into(),
            dual_activation(&duals.value, rho)?.into(),
            closed.into(),
            quad.into(),
            dual_activation(&duals.derivative, rho)?.into(),
            closed_deriv.into(),
            quad_deriv.into(),
        ]);
    }
    record.sweep = table;
    record.set("max_dual_error", err);
    record.set("max_deriv_dual_error", err_deriv);
    record.set("norm_sq", duals.value.norm_sq());
    record.set("partial_norm_sq", duals.value.partial_norm_sq());
    record.set("deriv_norm_sq", duals.derivative.norm_sq());
    record.set("deriv_partial_norm_sq", duals.derivative.partial_norm_sq());
    record.set("deriv_dual_at_0", dual_activation_closed(&duals.derivative, 0.0)?);
    record.set("deriv_dual_at_1", dual_activation_closed(&duals.derivative, 1.0)?);
    record.check("duals_match_quadrature", err.max(err_deriv) < 1e-3, format!("max error {:.2e}", err.max(err_deriv)));
    Ok(record)
}
