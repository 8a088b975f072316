//! Orthonormal Hermite polynomials, Hermite expansions of activations, dual
//! activations and inner-product kernels.
//!
//! The polynomials are the probabilists' ones normalized so that
//! `E[hₙ(X) hₘ(X)] = δₙₘ` for `X ~ N(0, 1)`:
//!
//! ```text
//! h₀ = 1,  h₁ = x,  hₙ₊₁ = (x hₙ - √n hₙ₋₁) / √(n+1)
//! ```
//!
//! If `σ = Σ aₙ hₙ`, the dual activation `σ̂(ρ) = E[σ(X)σ(Y)]` over
//! ρ-correlated standard Gaussians equals `Σ aₙ² ρⁿ`.

pub mod quadrature;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};
use quadrature::GaussRule;

/// Largest supported polynomial order.
pub const MAX_ORDER: usize = 1024;

/// Default truncation order of Hermite series.
pub const DEFAULT_ORDER: usize = 200;

/// Coefficients whose magnitude is below this are treated as zero when a
/// degree must carry a nonzero coefficient.
pub const ZERO_COEFF_TOL: f64 = 1e-12;

/// `hₙ(x)` by the three-term recurrence.
pub fn hermite_eval(n: usize, x: f64) -> Result<f64> {
    if n > MAX_ORDER {
        return Err(Error::OrderTooLarge { order: n, max: MAX_ORDER });
    }
    Ok(hermite_unchecked(n, x))
}

#[inline]
pub(crate) fn hermite_unchecked(n: usize, x: f64) -> f64 {
    let mut prev = 1.0;
    if n == 0 {
        return prev;
    }
    let mut cur = x;
    for k in 1..n {
        let next = (x * cur - (k as f64).sqrt() * prev) / ((k + 1) as f64).sqrt();
        prev = cur;
        cur = next;
    }
    cur
}

/// Number of quadrature nodes used to expand to order `n`: `max(4n, 64)`
/// Gauss–Hermite nodes for smooth functions, and `4n + 64` Gauss–Legendre
/// nodes per piece for functions with kinks.
pub fn node_count(order: usize) -> usize {
    (4 * order).max(64)
}

/// Truncated Hermite expansion `a₀..a_N` of a function in `L²(N(0,1))`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HermiteSeries {
    coeffs: Vec<f64>,
    /// `E[f(X)²]` from the same quadrature, independent of truncation.
    norm_sq: f64,
}

impl HermiteSeries {
    /// Series from explicit coefficients; the function norm is taken to be
    /// the coefficient norm (no truncation tail).
    pub fn from_coeffs(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("Hermite series needs at least one coefficient".into()));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("Hermite coefficients"));
        }
        let norm_sq = coeffs.iter().map(|c| c * c).sum();
        Ok(Self { coeffs, norm_sq })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> Option<f64> {
        self.coeffs.get(n).copied()
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `E[f(X)²]` of the expanded function.
    pub fn norm_sq(&self) -> f64 {
        self.norm_sq
    }

    /// `Σ_{n ≤ N} aₙ²`.
    pub fn partial_norm_sq(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum()
    }

    /// `L²` mass of the expansion beyond the truncation order.
    pub fn tail_mass(&self) -> f64 {
        (self.norm_sq - self.partial_norm_sq()).max(0.0)
    }

    /// Coefficient of degree `n`, or an error if it is (numerically) zero or
    /// beyond the truncation.
    pub fn nonzero_coeff(&self, n: usize) -> Result<f64> {
        match self.coeff(n) {
            Some(c) if c.abs() > ZERO_COEFF_TOL => Ok(c),
            _ => Err(Error::ZeroCoefficient { degree: n }),
        }
    }

    /// Degree that receives the lumped tail mass: the first degree above the
    /// truncation with the parity shared by all high-order nonzero
    /// coefficients (or simply `N + 1` if both parities occur).
    pub fn tail_degree(&self) -> usize {
        let n = self.truncation_order();
        let start = 2.min(n);
        let mut parities = self.coeffs[start..]
            .iter()
            .enumerate()
            .filter(|(_, c)| c.abs() > ZERO_COEFF_TOL)
            .map(|(i, _)| (i + start) % 2);
        match parities.next() {
            Some(p) if parities.all(|q| q == p) => {
                if (n + 1) % 2 == p {
                    n + 1
                } else {
                    n + 2
                }
            }
            _ => n + 1,
        }
    }

    /// Kernel coefficients `bₙ = aₙ²` with the tail mass lumped on
    /// [`tail_degree`](Self::tail_degree), so that the kernel evaluated at 1
    /// equals `E[f(X)²]`.
    pub fn dual_kernel(&self) -> InnerProductKernel {
        let mut b: Vec<f64> = self.coeffs.iter().map(|c| c * c).collect();
        let tail = self.tail_mass();
        if tail > 0.0 {
            let deg = self.tail_degree();
            b.resize(deg + 1, 0.0);
            b[deg] += tail;
        }
        InnerProductKernel { coeffs: b }
    }
}

/// Hermite coefficients `aₙ = E[f(X) hₙ(X)]`, `n = 0..=order`.
///
/// `kinks` lists the points where `f` is not smooth. With no kinks a
/// Gauss–Hermite rule with [`node_count`] nodes is used; otherwise a
/// composite Gauss–Legendre rule split at the kinks.
pub fn hermite_coefficients<F: Fn(f64) -> f64>(f: F, kinks: &[f64], order: usize) -> Result<HermiteSeries> {
    if order > MAX_ORDER {
        return Err(Error::OrderTooLarge { order, max: MAX_ORDER });
    }
    let rule = if kinks.is_empty() {
        GaussRule::hermite(node_count(order))
    } else {
        GaussRule::piecewise(kinks, node_count(order) + 64)
    };
    let coeffs = rule.hermite_projections(&f, order);
    let norm_sq = rule.expect(|x| {
        let v = f(x);
        v * v
    });
    if !norm_sq.is_finite() || coeffs.iter().any(|c| !c.is_finite()) {
        return Err(Error::NonFinite("Hermite coefficient quadrature"));
    }
    Ok(HermiteSeries { coeffs, norm_sq })
}

fn check_rho(rho: f64) -> Result<()> {
    if !(-1.0..=1.0).contains(&rho) || rho.is_nan() {
        return Err(Error::RhoOutOfRange(rho));
    }
    Ok(())
}

/// Truncated dual activation `Σ_{n ≤ N} aₙ² ρⁿ`.
pub fn dual_activation(series: &HermiteSeries, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(power_series(series.coeffs.iter().map(|c| c * c), rho))
}

/// Dual activation with the truncation tail lumped onto a single degree
/// (see [`HermiteSeries::dual_kernel`]). Identical to [`dual_activation`]
/// up to `|ρ|^(N+1)` times the tail mass, and exact at `ρ = ±1`.
pub fn dual_activation_closed(series: &HermiteSeries, rho: f64) -> Result<f64> {
    check_rho(rho)?;
    Ok(series.dual_kernel().eval_unchecked(rho))
}

fn power_series(coeffs: impl DoubleEndedIterator<Item = f64>, x: f64) -> f64 {
    coeffs.rev().fold(0.0, |acc, c| acc * x + c)
}

/// Inner-product kernel `k(x, y) = Σ bₙ ⟨x, y⟩ⁿ` with `bₙ ≥ 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InnerProductKernel {
    coeffs: Vec<f64>,
}

impl InnerProductKernel {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::InvalidConfig("kernel needs at least one coefficient".into()));
        }
        if let Some(b) = coeffs.iter().find(|b| !b.is_finite() || **b < 0.0) {
            return Err(Error::InvalidConfig(format!("kernel coefficient {b} is not a finite nonnegative number")));
        }
        Ok(Self { coeffs })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn truncation_order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// `Σ bₙ`, the value on the diagonal.
    pub fn diagonal(&self) -> f64 {
        self.coeffs.iter().sum()
    }

    /// Kernel of `⟨x, y⟩ · k(x, y)`: coefficients shifted up one degree.
    pub fn times_dot(&self) -> Self {
        let mut b = Vec::with_capacity(self.coeffs.len() + 1);
        b.push(0.0);
        b.extend_from_slice(&self.coeffs);
        Self { coeffs: b }
    }

    pub fn eval(&self, dot: f64) -> Result<f64> {
        check_rho(dot)?;
        Ok(self.eval_unchecked(dot))
    }

    pub(crate) fn eval_unchecked(&self, dot: f64) -> f64 {
        power_series(self.coeffs.iter().copied(), dot)
    }
}

/// Free-function form of [`InnerProductKernel::eval`].
pub fn kernel_eval(kernel: &InnerProductKernel, dot: f64) -> Result<f64> {
    kernel.eval(dot)
}

/// Polynomial `p(x) = Σ_α a_α x^α` keyed by exponent multi-index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Polynomial {
    terms: BTreeMap<Vec<u32>, f64>,
}

impl Polynomial {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds `coeff · x^alpha` (accumulating onto an existing monomial).
    pub fn add_term(&mut self, alpha: Vec<u32>, coeff: f64) -> &mut Self {
        *self.terms.entry(alpha).or_insert(0.0) += coeff;
        self
    }

    /// Expansion of `⟨u, x⟩²`.
    pub fn squared_linear(u: &[f64]) -> Self {
        let d = u.len();
        let mut p = Self::new();
        for i in 0..d {
            for j in i..d {
                let mut alpha = vec![0u32; d];
                alpha[i] += 1;
                alpha[j] += 1;
                let c = if i == j { u[i] * u[i] } else { 2.0 * u[i] * u[j] };
                if c != 0.0 {
                    p.add_term(alpha, c);
                }
            }
        }
        p
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[u32], f64)> {
        self.terms.iter().map(|(a, c)| (a.as_slice(), *c))
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms
            .iter()
            .map(|(alpha, c)| {
                c * alpha
                    .iter()
                    .zip(x)
                    .map(|(&e, &xi)| xi.powi(e as i32))
                    .product::<f64>()
            })
            .sum()
    }
}

impl std::ops::Add for Polynomial {
    type Output = Polynomial;

    fn add(mut self, rhs: Polynomial) -> Polynomial {
        for (alpha, c) in rhs.terms {
            self.add_term(alpha, c);
        }
        self
    }
}

/// Upper bound `Σₙ (1/bₙ) Σ_{|α|=n} a_α²` on the squared kernel norm of an
/// even polynomial.
pub fn poly_norm_bound(poly: &Polynomial, kernel: &InnerProductKernel) -> Result<f64> {
    let mut by_degree: BTreeMap<usize, f64> = BTreeMap::new();
    for (alpha, c) in poly.terms() {
        let deg: usize = alpha.iter().map(|&e| e as usize).sum();
        if deg % 2 != 0 {
            return Err(Error::InvalidPolynomial(format!("monomial of odd degree {deg}")));
        }
        *by_degree.entry(deg).or_insert(0.0) += c * c;
    }
    let mut bound = 0.0;
    for (deg, sum_sq) in by_degree {
        if sum_sq == 0.0 {
            continue;
        }
        match kernel.coeffs.get(deg) {
            Some(&b) if b > 0.0 => bound += sum_sq / b,
            _ => return Err(Error::ZeroCoefficient { degree: deg }),
        }
    }
    Ok(bound)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    fn relu(x: f64) -> f64 {
        x.max(0.0)
    }

    fn step(x: f64) -> f64 {
        if x > 0.0 {
            1.0
        } else {
            0.0
        }
    }

    #[test]
    fn low_order_values() {
        assert_eq!(hermite_eval(0, 3.7).unwrap(), 1.0);
        assert_eq!(hermite_eval(1, 2.0).unwrap(), 2.0);
        assert_abs_diff_eq!(hermite_eval(2, 1.0).unwrap(), 0.0, epsilon = 1e-15);
        // h₂ = (x² - 1)/√2, h₃ = (x³ - 3x)/√6
        assert_abs_diff_eq!(hermite_eval(2, 3.0).unwrap(), 8.0 / 2f64.sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(hermite_eval(3, 2.0).unwrap(), 2.0 / 6f64.sqrt(), epsilon = 1e-13);
    }

    #[test]
    fn order_above_max_is_rejected() {
        assert!(matches!(
            hermite_eval(MAX_ORDER + 1, 0.0),
            Err(Error::OrderTooLarge { .. })
        ));
        assert!(hermite_coefficients(relu, &[0.0], MAX_ORDER + 1).is_err());
    }

    #[test]
    fn orthonormal_under_gauss_hermite() {
        let rule = GaussRule::hermite(40);
        for n in 0..=8 {
            for m in 0..=8 {
                let v = rule.expect(|x| hermite_unchecked(n, x) * hermite_unchecked(m, x));
                let expect = if n == m { 1.0 } else { 0.0 };
                assert_abs_diff_eq!(v, expect, epsilon = 1e-10);
            }
        }
    }

    #[test]
    fn identity_series() {
        let s = hermite_coefficients(|x| x, &[], 3).unwrap();
        for (got, want) in s.coeffs().iter().zip([0.0, 1.0, 0.0, 0.0]) {
            assert_abs_diff_eq!(*got, want, epsilon = 1e-13);
        }
        assert_abs_diff_eq!(dual_activation(&s, 0.3).unwrap(), 0.3, epsilon = 1e-13);
    }

    #[test]
    fn relu_low_coefficients() {
        let s = hermite_coefficients(relu, &[0.0], 1).unwrap();
        assert_abs_diff_eq!(s.coeffs()[0], 1.0 / (2.0 * PI).sqrt(), epsilon = 1e-13);
        assert_abs_diff_eq!(s.coeffs()[1], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(s.norm_sq(), 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(dual_activation(&s, 0.0).unwrap(), 1.0 / (2.0 * PI), epsilon = 1e-13);
    }

    /// Closed forms from `x·Heₙ = Heₙ₊₁ + n·Heₙ₋₁` and `∫₀^∞ Heₙ φ = Heₙ₋₁(0) φ(0)`.
    fn he_at_zero(n: usize) -> f64 {
        if n % 2 == 1 {
            return 0.0;
        }
        let mut v = 1.0;
        let mut k = 1;
        while k < n {
            v *= -(k as f64);
            k += 2;
        }
        v
    }

    fn ln_factorial(n: usize) -> f64 {
        (1..=n).map(|k| (k as f64).ln()).sum()
    }

    #[test]
    fn relu_and_step_match_closed_forms() {
        let phi0 = 1.0 / (2.0 * PI).sqrt();
        let n_max = 200;
        let relu_s = hermite_coefficients(relu, &[0.0], n_max).unwrap();
        let step_s = hermite_coefficients(step, &[0.0], n_max).unwrap();
        for n in 2..=n_max {
            let scale = (-0.5 * ln_factorial(n)).exp();
            let relu_exact = (he_at_zero(n) + n as f64 * he_at_zero(n - 2)) * phi0 * scale;
            let step_exact = he_at_zero(n - 1) * phi0 * scale;
            assert_abs_diff_eq!(relu_s.coeffs()[n], relu_exact, epsilon = 1e-12);
            assert_abs_diff_eq!(step_s.coeffs()[n], step_exact, epsilon = 1e-12);
        }
        assert_abs_diff_eq!(step_s.coeffs()[0], 0.5, epsilon = 1e-13);
        assert_abs_diff_eq!(step_s.coeffs()[1], phi0, epsilon = 1e-13);
    }

    #[test]
    fn parseval_partial_sums_increase_to_half() {
        let s = hermite_coefficients(relu, &[0.0], 100).unwrap();
        let mut acc = 0.0;
        let mut last = -1.0;
        for c in s.coeffs() {
            acc += c * c;
            assert!(acc >= last);
            last = acc;
        }
        assert!(0.5 - acc < 1e-3 && 0.5 - acc > 0.0, "gap {}", 0.5 - acc);
    }

    #[test]
    fn closed_dual_is_exact_on_the_diagonal() {
        let s = hermite_coefficients(step, &[0.0], DEFAULT_ORDER).unwrap();
        let truncated = dual_activation(&s, 1.0).unwrap();
        assert!((0.5 - truncated) > 5e-3, "truncation leaves visible mass");
        assert_abs_diff_eq!(dual_activation_closed(&s, 1.0).unwrap(), 0.5, epsilon = 1e-12);
        // only odd degrees carry tail mass
        assert_eq!(s.tail_degree() % 2, 1);
        assert_abs_diff_eq!(
            dual_activation_closed(&s, -1.0).unwrap(),
            0.25 - 0.25,
            epsilon = 1e-12
        );
        let inner = dual_activation(&s, 0.5).unwrap();
        assert_abs_diff_eq!(dual_activation_closed(&s, 0.5).unwrap(), inner, epsilon = 1e-12);
    }

    #[test]
    fn relu_dual_at_half() {
        let s = hermite_coefficients(relu, &[0.0], DEFAULT_ORDER).unwrap();
        let rho: f64 = 0.5;
        let exact = ((1.0 - rho * rho).sqrt() + rho * (PI - rho.acos())) / (2.0 * PI);
        assert_abs_diff_eq!(dual_activation(&s, rho).unwrap(), exact, epsilon = 1e-10);
        assert_abs_diff_eq!(exact, 0.3045, epsilon = 1e-4);
    }

    #[test]
    fn relu_duals_match_correlated_quadrature() {
        use super::quadrature::correlated_expectation;
        let a = hermite_coefficients(relu, &[0.0], DEFAULT_ORDER).unwrap();
        let b = hermite_coefficients(step, &[0.0], DEFAULT_ORDER).unwrap();
        for rho in [-0.9, -0.5, 0.0, 0.5, 0.9] {
            let oracle = correlated_expectation(relu, &[0.0], relu, &[0.0], rho, 200);
            assert_abs_diff_eq!(dual_activation(&a, rho).unwrap(), oracle, epsilon = 1e-3);
            let oracle = correlated_expectation(step, &[0.0], step, &[0.0], rho, 200);
            assert_abs_diff_eq!(dual_activation(&b, rho).unwrap(), oracle, epsilon = 1e-3);
            assert_abs_diff_eq!(dual_activation_closed(&b, rho).unwrap(), oracle, epsilon = 1e-3);
        }
    }

    #[test]
    fn smooth_duals_match_correlated_quadrature() {
        let tanh = |x: f64| x.tanh();
        let a = hermite_coefficients(tanh, &[], DEFAULT_ORDER).unwrap();
        for rho in [-0.8, 0.2, 0.7] {
            let oracle = quadrature::correlated_expectation(tanh, &[], tanh, &[], rho, 200);
            assert_abs_diff_eq!(dual_activation(&a, rho).unwrap(), oracle, epsilon = 1e-10);
        }
    }

    #[test]
    fn dual_rejects_out_of_range() {
        let s = HermiteSeries::from_coeffs(vec![0.0, 1.0]).unwrap();
        assert!(matches!(dual_activation(&s, 1.5), Err(Error::RhoOutOfRange(_))));
        assert!(dual_activation_closed(&s, -1.0001).is_err());
    }

    #[test]
    fn kernel_examples() {
        let constant = InnerProductKernel::new(vec![1.0, 0.0, 0.0]).unwrap();
        for dot in [-1.0, -0.3, 0.0, 0.8] {
            assert_eq!(kernel_eval(&constant, dot).unwrap(), 1.0);
        }
        let linear = InnerProductKernel::new(vec![0.0, 1.0]).unwrap();
        assert_eq!(kernel_eval(&linear, -0.25).unwrap(), -0.25);
        assert!(kernel_eval(&linear, 1.01).is_err());
        assert!(InnerProductKernel::new(vec![1.0, -0.1]).is_err());

        let step_s = hermite_coefficients(step, &[0.0], DEFAULT_ORDER).unwrap();
        let k = step_s.dual_kernel();
        assert_abs_diff_eq!(kernel_eval(&k, 0.0).unwrap(), 0.25, epsilon = 1e-13);
        assert_abs_diff_eq!(kernel_eval(&k, 1.0).unwrap(), k.diagonal(), epsilon = 1e-13);
    }

    #[test]
    fn poly_norm_examples() {
        let k = InnerProductKernel::new(vec![1.0, 0.5, 0.25]).unwrap();
        let mut constant = Polynomial::new();
        constant.add_term(vec![0, 0, 0], 3.0);
        assert_abs_diff_eq!(poly_norm_bound(&constant, &k).unwrap(), 9.0, epsilon = 1e-15);

        let e1 = Polynomial::squared_linear(&[1.0, 0.0, 0.0]);
        assert_abs_diff_eq!(poly_norm_bound(&e1, &k).unwrap(), 4.0, epsilon = 1e-15);

        let e2 = Polynomial::squared_linear(&[0.0, 1.0, 0.0]);
        let both = e1.clone() + e2.clone();
        assert_abs_diff_eq!(
            poly_norm_bound(&both, &k).unwrap(),
            poly_norm_bound(&e1, &k).unwrap() + poly_norm_bound(&e2, &k).unwrap(),
            epsilon = 1e-15
        );

        // a generic unit u: the coefficient bound dominates the exact norm 1/b₂
        let u = [0.6, 0.0, 0.8];
        let p = Polynomial::squared_linear(&u);
        assert!(poly_norm_bound(&p, &k).unwrap() >= 4.0 - 1e-12);
        assert_abs_diff_eq!(p.eval(&[0.6, 0.0, 0.8]), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn poly_norm_errors() {
        let k = InnerProductKernel::new(vec![1.0, 0.5, 0.0]).unwrap();
        let p = Polynomial::squared_linear(&[1.0, 0.0]);
        assert!(matches!(poly_norm_bound(&p, &k), Err(Error::ZeroCoefficient { degree: 2 })));
        let mut odd = Polynomial::new();
        odd.add_term(vec![1, 0], 1.0);
        assert!(matches!(poly_norm_bound(&odd, &k), Err(Error::InvalidPolynomial(_))));
    }
}
