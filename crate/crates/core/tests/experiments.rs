use std::process::Command;

use tangent::data::{generate, DatasetKind, EmpiricalSource};
use tangent::experiments::{self, BoundednessConfig, DualsConfig, ExperimentConfig, KernelApproxConfig, RunRecord};
use tangent::model::{memorized_fraction, sgd_train, SgdConfig};
use tangent::{Activation, Loss};

fn small_kernel_approx() -> ExperimentConfig {
    ExperimentConfig::KernelApprox(KernelApproxConfig {
        widths: vec![10, 40],
        replicates: 20,
        approx_dims: vec![4, 16],
        approx_width: 20,
        approx_replicates: 4,
        approx_points: 100,
        seed: 11,
        ..Default::default()
    })
}

#[test]
fn replaying_a_written_record_reproduces_it() {
    let dir = tempfile::tempdir().unwrap();
    for config in [
        small_kernel_approx(),
        ExperimentConfig::Boundedness(BoundednessConfig { dim: 6, sample_factor: 3, replicates: 3, seed: 5 }),
        ExperimentConfig::Duals(DualsConfig { order: 60, rhos: vec![-0.5, 0.0, 0.7], ..Default::default() }),
    ] {
        let first = experiments::run(&config).unwrap();
        let out = dir.path().join(config.name());
        first.write(&out).unwrap();
        let read = RunRecord::read(&out.join("run.json")).unwrap();
        assert_eq!(read.config, config);
        assert!(read.same_results(&first), "{}", config.name());
        let again = experiments::run(&read.config).unwrap();
        assert!(again.same_results(&first), "{}", config.name());
    }
}

#[test]
fn seed_changes_random_results() {
    let mut other = small_kernel_approx();
    other.set_seed(12);
    let a = experiments::run(&small_kernel_approx()).unwrap();
    let b = experiments::run(&other).unwrap();
    assert!(!a.same_results(&b));
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tangent"))
}

#[test]
fn cli_runs_from_toml_and_replays_run_json() {
    let dir = tempfile::tempdir().unwrap();
    let toml_path = dir.path().join("b.toml");
    std::fs::write(&toml_path, "dim = 5\nsample_factor = 2\nreplicates = 2\n").unwrap();
    let out = dir.path().join("first");
    let run = bin()
        .args(["boundedness", "--config"])
        .arg(&toml_path)
        .args(["--seed", "9", "--threads", "1", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(run.status.success());
    for f in ["run.json", "trace.csv", "sweep.csv"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let trace = std::fs::read_to_string(out.join("trace.csv")).unwrap();
    assert!(trace.starts_with("step,loss"));
    let sweep = std::fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert!(sweep.starts_with("table,kind,d,m,mean,min,max,method"));

    let first = RunRecord::read(&out.join("run.json")).unwrap();
    assert_eq!(first.config.seed(), 9);
    let replay = dir.path().join("replay");
    let run = bin().args(["boundedness", "--config"]).arg(out.join("run.json")).arg("--out").arg(&replay).output().unwrap();
    assert!(run.status.success());
    let second = RunRecord::read(&replay.join("run.json")).unwrap();
    assert!(second.same_results(&first));

    let wrong = bin().args(["duals", "--config"]).arg(out.join("run.json")).arg("--out").arg(dir.path().join("x")).output().unwrap();
    assert!(!wrong.status.success());
    let bad_key = dir.path().join("bad.toml");
    std::fs::write(&bad_key, "no_such_field = 1\n").unwrap();
    let bad = bin().args(["boundedness", "--config"]).arg(&bad_key).arg("--out").arg(dir.path().join("y")).output().unwrap();
    assert!(!bad.status.success());
}

/// Perceptron on `(x, y)`; returns whether it separates the data within `epochs`.
fn perceptron_separates(points: &[f64], labels: &[f64], d: usize, epochs: usize) -> bool {
    let mut w = vec![0.0; d];
    for _ in 0..epochs {
        let mut mistakes = 0;
        for (x, &y) in points.chunks_exact(d).zip(labels) {
            let s: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum();
            if y * s <= 0.0 {
                w.iter_mut().zip(x).for_each(|(a, b)| *a += y * b);
                mistakes += 1;
            }
        }
        if mistakes == 0 {
            return true;
        }
    }
    false
}

#[test]
fn few_points_in_high_dimension_are_memorized_by_a_narrow_network() {
    let (d, m) = (20, 10);
    for seed in 0..3 {
        let data = generate(DatasetKind::RandomLabeledSphere, d, m, seed).unwrap();
        assert!(perceptron_separates(data.points(), data.labels(), d, 10_000));
        let sgd = SgdConfig {
            width: 16,
            init_scale: 1.0,
            learning_rate: 0.1,
            batch_size: 1,
            steps: 20_000,
            seed: 100 + seed,
            train_output: true,
        };
        let run = sgd_train(&sgd, &EmpiricalSource::new(&data), Loss::Hinge, Activation::Relu).unwrap();
        // The final iterate; the uniformly drawn one may come from the first steps.
        let w = &run.last;
        let frac = memorized_fraction(|x| w.forward(Activation::Relu, x).unwrap(), data.points(), data.labels());
        assert_eq!(frac, 1.0, "seed {seed}");
    }
}
