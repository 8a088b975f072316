//! Quadrature rules for expectations under the standard Gaussian.
//!
//! Two families are provided:
//!
//! * [`GaussRule::hermite`]: the n-point Gauss–Hermite rule for the weight
//!   `φ(x) = exp(-x²/2)/√(2π)`. Nodes are the eigenvalues of the Jacobi
//!   matrix, polished by Newton iteration on the orthonormal Hermite
//!   recurrence; weights come from the Christoffel formula
//!   `w = 1 / (n hₙ₋₁(x)²)`. Exact for polynomials of degree `≤ 2n - 1`.
//! * [`GaussRule::piecewise`]: composite Gauss–Legendre on the pieces of
//!   `[-L, L]` cut at fixed breakpoints and at the kinks of the integrand,
//!   with the Gaussian density
//!   folded into the weights. Used for integrands that are smooth except at
//!   a few known points (ReLU, its step derivative), where a global
//!   Gauss–Hermite rule only converges algebraically.
//!
//! Each rule stores, besides the full weights, the "half" weights
//! `w·exp(x²/4)`. Pairing those with the scaled Hermite functions
//! `hₙ(x)·exp(-x²/4)` lets high-order projections run far into the tails
//! without overflow.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Half-width of the truncated real line used by the piecewise rule.
/// `φ(40) ≈ 1e-348`, below the smallest normal double.
pub const TRUNCATION: f64 = 40.0;

/// Cuts always applied by the piecewise rules, so the bulk of the Gaussian
/// mass is resolved by short pieces.
const BREAKPOINTS: [f64; 5] = [-10.0, -5.0, 0.0, 5.0, 10.0];

/// `[-L, L]` cut at `BREAKPOINTS` and at the given interior points.
fn cut_points(extra: impl Iterator<Item = f64>) -> Vec<f64> {
    let mut cuts: Vec<f64> = BREAKPOINTS
        .into_iter()
        .chain(extra)
        .filter(|k| k.abs() < TRUNCATION)
        .collect();
    cuts.push(-TRUNCATION);
    cuts.push(TRUNCATION);
    cuts.sort_by(|a, b| a.total_cmp(b));
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    cuts
}

#[derive(Clone, Debug)]
pub struct GaussRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    half_weights: Vec<f64>,
}

impl GaussRule {
    /// n-point Gauss–Hermite rule for the standard Gaussian probability measure.
    pub fn hermite(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Hermite rule needs at least one node");
        // Nodes are the eigenvalues of the Jacobi matrix of the recurrence
        // (off-diagonal √k), polished by Newton steps on hₙ.
        let jacobi = DMatrix::from_fn(n, n, |i, j| if i.abs_diff(j) == 1 { (i.max(j) as f64).sqrt() } else { 0.0 });
        let mut nodes: Vec<f64> = jacobi.symmetric_eigenvalues().iter().copied().collect();
        nodes.sort_by(|a, b| a.total_cmp(b));
        for x in nodes.iter_mut() {
            for _ in 0..3 {
                let (ratio, _) = ratio_and_log(n, *x);
                let step = ratio / (n as f64).sqrt();
                if !step.is_finite() {
                    break;
                }
                *x -= step;
                if step.abs() <= 1e-15 * x.abs().max(1.0) {
                    break;
                }
            }
        }
        // Enforce exact symmetry.
        for i in 0..n / 2 {
            let m = 0.5 * (nodes[n - 1 - i] - nodes[i]);
            nodes[i] = -m;
            nodes[n - 1 - i] = m;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }

        let mut weights = Vec::with_capacity(n);
        let mut half_weights = Vec::with_capacity(n);
        for &x in &nodes {
            // Christoffel weight 1/(n hₙ₋₁(x)²), formed in log space.
            let (_, log_prev) = ratio_and_log(n, x);
            let log_w = -(n as f64).ln() - 2.0 * log_prev;
            weights.push(log_w.exp());
            half_weights.push((log_w + x * x / 4.0).exp());
        }
        Self { nodes, weights, half_weights }
    }

    /// Composite Gauss–Legendre rule over `[-TRUNCATION, TRUNCATION]`, split
    /// at `kinks`, with `per_piece` nodes on every piece.
    pub fn piecewise(kinks: &[f64], per_piece: usize) -> Self {
        let reference = LegendreRule::new(per_piece);
        let cuts = cut_points(kinks.iter().copied());

        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        let mut half_weights = Vec::new();
        let norm = 1.0 / (2.0 * PI).sqrt();
        for piece in cuts.windows(2) {
            let (lo, hi) = (piece[0], piece[1]);
            for (x, w) in reference.mapped(lo, hi) {
                let hw = w * norm * (-x * x / 4.0).exp();
                nodes.push(x);
                half_weights.push(hw);
                weights.push(hw * (-x * x / 4.0).exp());
            }
        }
        Self { nodes, weights, half_weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// `E[f(X)]` for `X ~ N(0, 1)`.
    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| if w == 0.0 { 0.0 } else { w * f(x) })
            .sum()
    }

    /// Projections `E[f(X) hₙ(X)]` for `n = 0..=order`, accumulated with the
    /// scaled Hermite functions so that no factor overflows.
    pub fn hermite_projections<F: Fn(f64) -> f64>(&self, f: F, order: usize) -> Vec<f64> {
        let mut out = vec![0.0; order + 1];
        let mut scaled = vec![0.0; order + 1];
        for (&x, &hw) in self.nodes.iter().zip(&self.half_weights) {
            if hw == 0.0 {
                continue;
            }
            let fx = f(x);
            if fx == 0.0 {
                continue;
            }
            scaled_hermite_functions(x, &mut scaled);
            let c = hw * fx;
            out.iter_mut().zip(&scaled).for_each(|(o, s)| *o += c * s);
        }
        out
    }
}

/// Fills `out[n] = hₙ(x)·exp(-x²/4)` for `n = 0..out.len()`.
pub fn scaled_hermite_functions(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let s = (-x * x / 4.0).exp();
    out[0] = s;
    if out.len() > 1 {
        out[1] = x * s;
    }
    for n in 1..out.len().saturating_sub(1) {
        out[n + 1] = (x * out[n] - (n as f64).sqrt() * out[n - 1]) / ((n + 1) as f64).sqrt();
    }
}

/// `(hₙ(x)/hₙ₋₁(x), ln|hₙ₋₁(x)|)` from the recurrence in ratio form, which
/// neither overflows nor underflows at large `n`.
fn ratio_and_log(n: usize, x: f64) -> (f64, f64) {
    if x.abs() < 1.0 {
        // Values stay O(1) here, and the ratio form would divide by zero.
        let (mut prev, mut cur) = (1.0, x);
        for k in 1..n {
            let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
            prev = cur;
            cur = next;
        }
        return if n == 0 { (x, 0.0) } else { (cur / prev, prev.abs().ln()) };
    }
    let mut ratio = x;
    let mut log_prev = 0.0;
    for k in 1..n {
        log_prev += ratio.abs().ln();
        ratio = (x - (k as f64).sqrt() / ratio) / ((k + 1) as f64).sqrt();
    }
    (ratio, log_prev)
}

/// Gauss–Legendre rule on `[-1, 1]`.
#[derive(Clone, Debug)]
pub struct LegendreRule {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl LegendreRule {
    pub fn new(n: usize) -> Self {
        assert!(n >= 1, "Gauss-Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let half = n.div_ceil(2);
        for i in 0..half {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 1.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let step = p / d;
                x -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d.is_finite() {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[half - 1] = 0.0;
        }
        Self { nodes, weights }
    }

    /// Nodes and weights mapped affinely onto `[lo, hi]`.
    pub fn mapped(&self, lo: f64, hi: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let mid = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&t, &w)| (mid + half * t, half * w))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `E[f(X) g(Y)]` for standard Gaussians with correlation `rho`.
///
/// Writes `Y = ρX + √(1-ρ²) Z` and integrates over `X` with a rule split at
/// the kinks of `f`, and over `Z` with a rule split where `ρx + sz` crosses a
/// kink of `g`. `per_piece` Gauss–Legendre nodes are used on every piece.
pub fn correlated_expectation<F, G>(
    f: F,
    f_kinks: &[f64],
    g: G,
    g_kinks: &[f64],
    rho: f64,
    per_piece: usize,
) -> f64
where
    F: Fn(f64) -> f64,
    G: Fn(f64) -> f64,
{
    let outer = GaussRule::piecewise(f_kinks, per_piece);
    let s = (1.0 - rho * rho).max(0.0).sqrt();
    if s < 1e-12 {
        return outer.expect(|x| f(x) * g(rho.signum() * x));
    }
    let reference = LegendreRule::new(per_piece);
    let norm = 1.0 / (2.0 * PI).sqrt();
    outer.expect(|x| {
        let fx = f(x);
        if fx == 0.0 {
            return 0.0;
        }
        let cuts = cut_points(g_kinks.iter().map(|k| (k - rho * x) / s));
        let mut acc = 0.0;
        for piece in cuts.windows(2) {
            for (z, w) in reference.mapped(piece[0], piece[1]) {
                let wz = w * norm * (-z * z / 2.0).exp();
                if wz != 0.0 {
                    acc += wz * g(rho * x + s * z);
                }
            }
        }
        fx * acc
    })
}
