use serde::{Deserialize, Serialize};

use crate::{Activation, Error, Loss, Result};

/// Which experiment to run, with its parameters.
///
/// Serialized as `{"experiment": "<name>", "params": {...}}`. Config files
/// passed on the command line hold the `params` table alone.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "experiment", content = "params", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Duals(DualsConfig),
    KernelApprox(KernelApproxConfig),
    Equivalence(EquivalenceConfig),
    KernelLearning(KernelLearningConfig),
    Memorize(MemorizeConfig),
    Boundedness(BoundednessConfig),
    Diagnostics(DiagnosticsConfig),
}

impl ExperimentConfig {
    pub const NAMES: [&'static str; 7] =
        ["duals", "kernel-approx", "equivalence", "kernel-learning", "memorize", "boundedness", "diagnostics"];

    pub fn name(&self) -> &'static str {
        match self {
            ExperimentConfig::Duals(_) => "duals",
            ExperimentConfig::KernelApprox(_) => "kernel-approx",
            ExperimentConfig::Equivalence(_) => "equivalence",
            ExperimentConfig::KernelLearning(_) => "kernel-learning",
            ExperimentConfig::Memorize(_) => "memorize",
            ExperimentConfig::Boundedness(_) => "boundedness",
            ExperimentConfig::Diagnostics(_) => "diagnostics",
        }
    }

    /// Defaults for the experiment called `name`.
    pub fn default_for(name: &str) -> Result<Self> {
        Self::from_toml(name, "")
    }

    /// Parses a TOML parameter table for the experiment called `name`;
    /// missing keys take their defaults.
    pub fn from_toml(name: &str, text: &str) -> Result<Self> {
        Ok(match name {
            "duals" => ExperimentConfig::Duals(toml::from_str(text)?),
            "kernel-approx" => ExperimentConfig::KernelApprox(toml::from_str(text)?),
            "equivalence" => ExperimentConfig::Equivalence(toml::from_str(text)?),
            "kernel-learning" => ExperimentConfig::KernelLearning(toml::from_str(text)?),
            "memorize" => ExperimentConfig::Memorize(toml::from_str(text)?),
            "boundedness" => ExperimentConfig::Boundedness(toml::from_str(text)?),
            "diagnostics" => ExperimentConfig::Diagnostics(toml::from_str(text)?),
            other => return Err(Error::InvalidConfig(format!("unknown experiment `{other}`"))),
        })
    }

    pub fn seed(&self) -> u64 {
        match self {
            ExperimentConfig::Duals(c) => c.seed,
            ExperimentConfig::KernelApprox(c) => c.seed,
            ExperimentConfig::Equivalence(c) => c.seed,
            ExperimentConfig::KernelLearning(c) => c.seed,
            ExperimentConfig::Memorize(c) => c.seed,
            ExperimentConfig::Boundedness(c) => c.seed,
            ExperimentConfig::Diagnostics(c) => c.seed,
        }
    }

    pub fn set_seed(&mut self, seed: u64) {
        match self {
            ExperimentConfig::Duals(c) => c.seed = seed,
            ExperimentConfig::KernelApprox(c) => c.seed = seed,
            ExperimentConfig::Equivalence(c) => c.seed = seed,
            ExperimentConfig::KernelLearning(c) => c.seed = seed,
            ExperimentConfig::Memorize(c) => c.seed = seed,
            ExperimentConfig::Boundedness(c) => c.seed = seed,
            ExperimentConfig::Diagnostics(c) => c.seed = seed,
        }
    }
}

/// Hermite coefficients and dual activations on a grid of correlations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DualsConfig {
    pub activation: Activation,
    pub order: usize,
    pub rhos: Vec<f64>,
    /// Gauss–Legendre nodes per piece for the correlated-Gaussian oracle.
    pub oracle_nodes: usize,
    /// Unused; kept so every experiment accepts `--seed`.
    pub seed: u64,
}

impl Default for DualsConfig {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            order: 200,
            rhos: vec![-1.0, -0.9, -0.5, 0.0, 0.5, 0.9, 1.0],
            oracle_nodes: 64,
            seed: 0,
        }
    }
}

/// Concentration of the empirical NTK and the function-approximation rate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelApproxConfig {
    pub activation: Activation,
    /// Input dimension for the kernel concentration sweep.
    pub dim: usize,
    pub widths: Vec<usize>,
    /// Feature draws per width.
    pub replicates: usize,
    /// Input dimensions for the approximation-rate sweep.
    pub approx_dims: Vec<usize>,
    pub approx_width: usize,
    /// Degree `n` of the target `⟨x₀, x⟩ⁿ`.
    pub approx_degree: usize,
    pub approx_replicates: usize,
    /// Monte Carlo points for each `L²` error.
    pub approx_points: usize,
    pub seed: u64,
}

impl Default for KernelApproxConfig {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            dim: 10,
            widths: vec![25, 100, 400, 1600],
            replicates: 200,
            approx_dims: vec![4, 16, 64],
            approx_width: 100,
            approx_degree: 2,
            approx_replicates: 20,
            approx_points: 2000,
            seed: 0,
        }
    }
}

/// Network SGD against linear SGD on the NTK embedding as `B` grows.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EquivalenceConfig {
    pub activation: Activation,
    pub loss: Loss,
    pub dim: usize,
    pub width: usize,
    /// Size of the random-labeled training set.
    pub samples: usize,
    pub steps: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub init_scales: Vec<f64>,
    /// Held-out uniform points over which the sup gap is taken.
    pub probe_points: usize,
    pub seed: u64,
}

impl Default for EquivalenceConfig {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            loss: Loss::Logistic,
            dim: 20,
            width: 50,
            samples: 200,
            steps: 200,
            batch_size: 4,
            learning_rate: 0.01,
            init_scales: vec![1e2, 1e3, 1e4],
            probe_points: 200,
            seed: 0,
        }
    }
}

/// Excess risk of RFS SGD on the target `w⟨x₀, x⟩ⁿ` against
/// `R·M/√(qd) + M/√T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KernelLearningConfig {
    pub activation: Activation,
    pub loss: Loss,
    pub dim: usize,
    pub target_degree: usize,
    pub target_weight: f64,
    /// Train on `sign(f*)` instead of `f*`.
    pub sign_labels: bool,
    pub batch_size: usize,
    /// Width used for the `T` sweep.
    pub wide: usize,
    pub step_grid: Vec<usize>,
    /// Steps used for the `q` sweep.
    pub long: usize,
    pub width_grid: Vec<usize>,
    pub replicates: usize,
    pub test_points: usize,
    /// Iterates evaluated per run to estimate `E_t L_D(V_t)`.
    pub checkpoints: usize,
    pub seed: u64,
}

impl Default for KernelLearningConfig {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            loss: Loss::Absolute,
            dim: 10,
            target_degree: 1,
            target_weight: 1.0,
            sign_labels: false,
            batch_size: 1,
            wide: 1600,
            step_grid: vec![250, 1000, 4000],
            long: 64000,
            width_grid: vec![4, 16, 64],
            replicates: 3,
            test_points: 10000,
            checkpoints: 20,
            seed: 0,
        }
    }
}

/// Memorization of random labels by network SGD, plus the explicit witness.
///
/// Widths are `q = κ·m·ln³m / (2d)`, steps `T = τ·m/ε²`, and the witness
/// uses `q = κ_w·(m/d)·ln³m` random features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MemorizeConfig {
    pub activation: Activation,
    pub loss: Loss,
    pub dim: usize,
    pub samples: usize,
    pub kappa: f64,
    /// Multiples of `kappa` swept at `epsilon`.
    pub kappa_factors: Vec<f64>,
    pub tau: f64,
    pub epsilon: f64,
    /// Values of `ε` swept at `kappa`.
    pub epsilons: Vec<f64>,
    pub init_scale: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub replicates: usize,
    pub witness: bool,
    pub witness_kappa: f64,
    /// Monomial degree `c′`; smallest admissible value when absent.
    pub c_prime: Option<usize>,
    pub seed: u64,
}

impl Default for MemorizeConfig {
    fn default() -> Self {
        Self {
            activation: Activation::Relu,
            loss: Loss::Hinge,
            dim: 30,
            samples: 900,
            kappa: 0.02,
            kappa_factors: vec![0.25, 0.5, 1.0],
            tau: 1.0,
            epsilon: 0.1,
            epsilons: vec![0.2, 0.1, 0.05],
            init_scale: 1.0,
            learning_rate: 0.02,
            batch_size: 1,
            replicates: 10,
            witness: true,
            witness_kappa: 2.0,
            c_prime: None,
            seed: 0,
        }
    }
}

/// Empirical `R` for each dataset kind.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundednessConfig {
    pub dim: usize,
    /// Sample count as a multiple of `dim` for the random kinds.
    pub sample_factor: usize,
    pub replicates: usize,
    pub seed: u64,
}

impl Default for BoundednessConfig {
    fn default() -> Self {
        Self { dim: 20, sample_factor: 20, replicates: 20, seed: 0 }
    }
}

/// Self-checks of the numerical building blocks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsConfig {
    pub order: usize,
    pub seed: u64,
}

impl Default for DiagnosticsConfig {
    fn default() -> Self {
        Self { order: 200, seed: 0 }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_name_has_defaults() {
        for name in ExperimentConfig::NAMES {
            assert_eq!(ExperimentConfig::default_for(name).unwrap().name(), name);
        }
        assert!(ExperimentConfig::default_for("nope").is_err());
    }

    #[test]
    fn toml_overrides_and_rejects_typos() {
        let c = ExperimentConfig::from_toml("memorize", "samples = 50\nloss = \"logistic\"\n").unwrap();
        let ExperimentConfig::Memorize(m) = c else { panic!() };
        assert_eq!((m.samples, m.loss, m.dim), (50, Loss::Logistic, 30));
        assert!(ExperimentConfig::from_toml("memorize", "sampels = 50").is_err());
    }

    #[test]
    fn json_tagging() {
        let mut c = ExperimentConfig::default_for("boundedness").unwrap();
        c.set_seed(9);
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.starts_with("{\"experiment\":\"boundedness\",\"params\":{"));
        let back: ExperimentConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.seed(), 9);
    }
}
