//! End-to-end acceptance criteria. Each test writes one `PASS`/`FAIL` line
//! to stderr (uncaptured) before asserting.

use std::f64::consts::PI;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use tangent::data::{default_c_prime, generate, memorization_witness, DatasetKind};
use tangent::experiments::{
    run_boundedness, run_equivalence, run_kernel_approx, run_kernel_learning, run_memorization, witness_width,
    BoundednessConfig, EquivalenceConfig, KernelApproxConfig, KernelLearningConfig, MemorizeConfig,
};
use tangent::hermite::{dual_activation, dual_activation_closed, DEFAULT_ORDER};
use tangent::model::{batch_loss, gradient, init_weights, Batch, NetworkWeights};
use tangent::rfs::{embed, FeatureDirections, RfsSpec};
use tangent::rng::derive_seed;
use tangent::{Activation, Loss};

fn report(id: u32, name: &str, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "criterion {id:>2} [{status}] {name}: {detail}");
}

fn unit(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    let x: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let n = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    x.iter().map(|v| v / n).collect()
}

#[test]
fn c01_zero_output_initialization() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for d in [8, 64] {
        for q in [4, 256] {
            for b in [1.0, 1e3] {
                let w = init_weights(d, q, b, derive_seed(d as u64, q as u64)).unwrap();
                for _ in 0..1000 {
                    let x = unit(&mut rng, d);
                    worst = worst.max(w.forward(Activation::Relu, &x).unwrap().abs());
                }
            }
        }
    }
    let pass = worst <= 1e-9;
    report(1, "zero-output initialization", pass, &format!("max |h(x)| = {worst:e} over 8 configs x 1000 inputs"));
    assert!(pass);
}

#[test]
fn c02_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let h = 1e-6;
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let d = rng.random_range(2..7);
        let q = rng.random_range(1..5);
        let n = rng.random_range(1..5);
        let hidden: Vec<f64> = (0..2 * q * d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let output: Vec<f64> = (0..2 * q).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let mut batch = Batch::new(d);
        for _ in 0..n {
            let x = unit(&mut rng, d);
            batch.push(&x, if rng.random::<bool>() { 1.0 } else { -1.0 }).unwrap();
        }
        let w = NetworkWeights::from_parts(d, hidden.clone(), output.clone(), 1.0).unwrap();
        let g = gradient(&w, Activation::Softplus, &batch, Loss::Logistic).unwrap();
        let analytic: Vec<f64> = g.hidden.iter().chain(&g.output).copied().collect();
        let params: Vec<f64> = hidden.iter().chain(&output).copied().collect();
        let loss_at = |p: &[f64]| {
            let (hp, op) = p.split_at(2 * q * d);
            let w = NetworkWeights::from_parts(d, hp.to_vec(), op.to_vec(), 1.0).unwrap();
            batch_loss(&w, Activation::Softplus, &batch, Loss::Logistic).unwrap()
        };
        let mut num_sq = 0.0;
        let mut diff_sq = 0.0;
        for k in 0..params.len() {
            let (mut up, mut down) = (params.clone(), params.clone());
            up[k] += h;
            down[k] -= h;
            let numeric = (loss_at(&up) - loss_at(&down)) / (2.0 * h);
            num_sq += numeric * numeric;
            diff_sq += (numeric - analytic[k]).powi(2);
        }
        let ana_sq: f64 = analytic.iter().map(|v| v * v).sum();
        worst = worst.max(diff_sq.sqrt() / ana_sq.max(num_sq).sqrt().max(1e-12));
    }
    let pass = worst < 1e-5;
    report(2, "gradient correctness", pass, &format!("max relative error {worst:.2e} over 100 cases"));
    assert!(pass);
}

/// `E[f(X) f(Y)]` for correlated standard Gaussians when `f` is positively
/// homogeneous of degree `k`: in polar coordinates the radial integral is
/// `∫ r^{2k+1} e^{-r²/2} dr` and the angular one is done by the midpoint rule.
fn polar_oracle(f: impl Fn(f64) -> f64, k: i32, rho: f64) -> f64 {
    let phi = rho.clamp(-1.0, 1.0).acos();
    let radial = match k {
        0 => 1.0,
        1 => 2.0,
        _ => unreachable!(),
    };
    let n = 200_000;
    let h = 2.0 * PI / n as f64;
    let angular: f64 = (0..n)
        .map(|i| {
            let t = (i as f64 + 0.5) * h;
            f(t.cos()) * f((t - phi).cos())
        })
        .sum::<f64>()
        * h;
    radial * angular / (2.0 * PI)
}

#[test]
fn c03_dual_activation_fidelity() {
    let duals = Activation::Relu.duals(200).unwrap();
    let relu = |x: f64| x.max(0.0);
    let step = |x: f64| if x > 0.0 { 1.0 } else { 0.0 };
    let mut worst = 0.0f64;
    for rho in [-0.9, -0.5, 0.0, 0.5, 0.9] {
        let a = (dual_activation(&duals.value, rho).unwrap() - polar_oracle(relu, 1, rho)).abs();
        let b = (dual_activation(&duals.derivative, rho).unwrap() - polar_oracle(step, 0, rho)).abs();
        let c = (dual_activation_closed(&duals.derivative, rho).unwrap() - polar_oracle(step, 0, rho)).abs();
        worst = worst.max(a).max(b).max(c);
    }
    let at0 = dual_activation_closed(&duals.derivative, 0.0).unwrap();
    let at1 = dual_activation_closed(&duals.derivative, 1.0).unwrap();
    let pass = worst < 1e-3 && (at0 - 0.25).abs() < 1e-3 && (at1 - 0.5).abs() < 1e-3;
    report(
        3,
        "dual-activation fidelity",
        pass,
        &format!("max error {worst:.2e}; derivative dual at 0 = {at0:.6}, at 1 = {at1:.6}"),
    );
    assert!(pass);
}

#[test]
fn c04_kernel_concentration() {
    let r = run_kernel_approx(&KernelApproxConfig { approx_dims: vec![4, 16], approx_replicates: 2, ..Default::default() }).unwrap();
    let slope = r.metric("kernel_std_slope").unwrap();
    let stds = r.sweep.values("kernel", "std");
    let pass = (slope + 0.5).abs() <= 0.1;
    report(4, "kernel concentration", pass, &format!("std slope in q = {slope:.3} (stds {stds:?})"));
    assert!(pass);
}

#[test]
fn c05_factorized_rate() {
    let r = run_kernel_approx(&KernelApproxConfig { widths: vec![25, 100], replicates: 2, ..Default::default() }).unwrap();
    let slope = r.metric("approx_error_slope").unwrap();
    let errs = r.sweep.values("approx", "mean");
    let pass = (slope + 0.5).abs() <= 0.15;
    report(5, "factorized rate", pass, &format!("L2 error slope in d = {slope:.3} (errors {errs:?})"));
    assert!(pass);
}

#[test]
fn c06_network_kernel_equivalence() {
    let c = EquivalenceConfig::default();
    assert_eq!((c.dim, c.width, c.steps), (20, 50, 200));
    assert_eq!(c.init_scales, vec![1e2, 1e3, 1e4]);
    let r = run_equivalence(&c).unwrap();
    let gaps = r.sweep.values("equivalence", "gap");
    let frozen = r.metric("frozen_gap_at_max_b").unwrap();
    let decreasing = gaps.windows(2).all(|w| w[1] < w[0]);
    let pass = decreasing && frozen < 1e-3;
    report(6, "network/NTK equivalence", pass, &format!("gaps {gaps:?}; frozen-output gap at B=1e4 {frozen:.2e}"));
    assert!(pass);
}

#[test]
fn c07_sgd_regret_bound() {
    let r = run_kernel_learning(&KernelLearningConfig::default()).unwrap();
    let ratios: Vec<f64> = ["steps", "width"].iter().flat_map(|t| r.sweep.values(t, "ratio")).collect();
    let within = ratios.len() >= 3 && ratios.iter().all(|&x| x <= 1.1);
    let st = r.metric("slope_steps").unwrap_or(f64::NAN);
    let sq = r.metric("slope_width").unwrap_or(f64::NAN);
    let pass = within && (st + 0.5).abs() <= 0.1 && (sq + 0.5).abs() <= 0.1;
    report(
        7,
        "SGD regret bound",
        pass,
        &format!("excess/bound {ratios:.3?}; slope in T {st:.3}, slope in q {sq:.3}"),
    );
    assert!(pass);
}

#[test]
fn c08_memorization() {
    let c = MemorizeConfig { witness: false, ..Default::default() };
    assert_eq!((c.dim, c.samples, c.loss, c.replicates, c.epsilon), (30, 900, Loss::Hinge, 10, 0.1));
    let r = run_memorization(&c).unwrap();
    let median = r.metric("median_memorized_fraction").unwrap();
    let nondecreasing = |tab: &str, axis: &str| {
        let mut pts: Vec<(f64, f64)> = r.sweep.values(tab, axis).into_iter().zip(r.sweep.values(tab, "median")).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        pts.windows(2).all(|w| w[1].1 >= w[0].1)
    };
    let (in_q, in_t) = (nondecreasing("q-sweep", "q"), nondecreasing("t-sweep", "steps"));
    let pass = median >= 0.9 && in_q && in_t;
    report(
        8,
        "memorization",
        pass,
        &format!(
            "median fraction {median:.4} at q={}, T={}; q-sweep {:.4?}; T-sweep {:.4?}",
            r.metric("width").unwrap(),
            r.metric("steps").unwrap(),
            r.sweep.values("q-sweep", "median"),
            r.sweep.values("t-sweep", "median"),
        ),
    );
    assert!(pass);
}

#[test]
fn c09_explicit_witness() {
    let c = MemorizeConfig::default();
    let (d, m) = (c.dim, c.samples);
    let act = c.activation;
    let c_prime = default_c_prime(d, m, &act.duals(DEFAULT_ORDER).unwrap().derivative).unwrap();
    let q = witness_width(c.witness_kappa, m, d);
    let spec = RfsSpec::ntk(act);
    let (mut min_agree, mut max_ratio) = (1.0f64, 0.0f64);
    for r in 0..c.replicates as u64 {
        let data = generate(DatasetKind::RandomLabeledSphere, d, m, derive_seed(c.seed, r)).unwrap();
        let dirs = FeatureDirections::sample(q, d, derive_seed(c.seed, (2 << 32) | r)).unwrap();
        let rep = memorization_witness(&data, &dirs, c_prime, act).unwrap();
        // Margins recomputed through the explicit embedding.
        for i in 0..10 {
            let psi = embed(&spec, &dirs, data.point(i)).unwrap();
            let direct: f64 = data.labels()[i] * psi.iter().zip(&rep.v).map(|(a, b)| a * b).sum::<f64>();
            assert!((direct - rep.margins[i]).abs() <= 1e-9 * (1.0 + direct.abs()));
        }
        min_agree = min_agree.min(rep.sign_agreement());
        max_ratio = max_ratio.max(rep.norm_sq / m as f64);
    }
    let pass = min_agree >= 0.95 && max_ratio <= 10.0;
    report(
        9,
        "explicit witness",
        pass,
        &format!("q={q}, c'={c_prime}: min sign agreement {min_agree:.4}; max |v|^2/m {max_ratio:.1} (limit 10)"),
    );
    assert!(pass);
}

#[test]
fn c10_boundedness_table() {
    let c = BoundednessConfig::default();
    assert_eq!(c.sample_factor, 20);
    let r = run_boundedness(&c).unwrap();
    let d = c.dim as f64;
    let orth = [r.metric("r_orthonormal_basis_min").unwrap(), r.metric("r_orthonormal_basis_max").unwrap()];
    let sphere = [r.metric("r_uniform_sphere_min").unwrap(), r.metric("r_uniform_sphere_max").unwrap()];
    let rep = [r.metric("r_repeated_point_min").unwrap(), r.metric("r_repeated_point_max").unwrap()];
    let pass = orth.iter().all(|v| (v - 1.0).abs() <= 1e-8)
        && sphere.iter().all(|v| (0.9..=1.6).contains(v))
        && rep.iter().all(|v| (v - d.sqrt()).abs() <= 1e-6);
    report(
        10,
        "boundedness table",
        pass,
        &format!("orthonormal {orth:.10?}; uniform sphere {sphere:.4?}; repeated point {rep:.8?} (sqrt d = {:.8})", d.sqrt()),
    );
    assert!(pass);
}
