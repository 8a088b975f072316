//! Decent activations: continuous, twice differentiable away from finitely
//! many kinks, with bounded first and second derivatives.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, Mutex, OnceLock};

use serde::{Deserialize, Serialize};

use crate::hermite::{hermite_coefficients, HermiteSeries};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    /// `max(0, x)`; derivative taken as 0 at the kink.
    Relu,
    /// `ln(1 + eˣ)`.
    Softplus,
    Tanh,
    Identity,
}

/// Hermite expansions of `σ` and of `σ′`, computed once per truncation order.
#[derive(Debug)]
pub struct ActivationDuals {
    pub value: HermiteSeries,
    pub derivative: HermiteSeries,
}

impl Activation {
    pub const ALL: [Activation; 4] = [Activation::Relu, Activation::Softplus, Activation::Tanh, Activation::Identity];

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Softplus => "softplus",
            Activation::Tanh => "tanh",
            Activation::Identity => "identity",
        }
    }

    #[inline]
    pub fn value(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Softplus => {
                if x > 0.0 {
                    x + (-x).exp().ln_1p()
                } else {
                    x.exp().ln_1p()
                }
            }
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    #[inline]
    pub fn derivative(self, x: f64) -> f64 {
        match self {
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Softplus => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            Activation::Tanh => {
                let t = x.tanh();
                1.0 - t * t
            }
            Activation::Identity => 1.0,
        }
    }

    /// `‖σ′‖_∞`, the constant `C` of the induced feature scheme.
    pub fn derivative_bound(self) -> f64 {
        1.0
    }

    /// Points where `σ` (and hence `σ′`) fails to be smooth.
    pub fn kinks(self) -> &'static [f64] {
        match self {
            Activation::Relu => &[0.0],
            _ => &[],
        }
    }

    pub fn is_linear(self) -> bool {
        matches!(self, Activation::Identity)
    }

    /// Hermite expansions of `σ` and `σ′` to `order`, cached process-wide.
    ///
    /// The `σ′` series is projected from `σ′` samples directly rather than by
    /// differentiating the `σ` series.
    pub fn duals(self, order: usize) -> Result<Arc<ActivationDuals>> {
        static CACHE: OnceLock<Mutex<HashMap<(Activation, usize), Arc<ActivationDuals>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(Default::default);
        if let Some(d) = cache.lock().expect("dual cache poisoned").get(&(self, order)) {
            return Ok(d.clone());
        }
        let duals = Arc::new(ActivationDuals {
            value: hermite_coefficients(|x| self.value(x), self.kinks(), order)?,
            derivative: hermite_coefficients(|x| self.derivative(x), self.kinks(), order)?,
        });
        cache
            .lock()
            .expect("dual cache poisoned")
            .insert((self, order), duals.clone());
        Ok(duals)
    }
}

impl fmt::Display for Activation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Activation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Activation::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown activation `{s}`")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn relu_derivative_at_kink_is_zero() {
        assert_eq!(Activation::Relu.derivative(0.0), 0.0);
        assert_eq!(Activation::Relu.derivative(1e-300), 1.0);
    }

    #[test]
    fn softplus_is_stable_in_the_tails() {
        assert!((Activation::Softplus.value(800.0) - 800.0).abs() < 1e-12);
        assert!(Activation::Softplus.value(-800.0) >= 0.0);
        assert!(Activation::Softplus.derivative(-800.0).is_finite());
    }

    #[test]
    fn parse_round_trip() {
        for a in Activation::ALL {
            assert_eq!(a.name().parse::<Activation>().unwrap(), a);
        }
        assert!("gelu".parse::<Activation>().is_err());
    }

    proptest! {
        #[test]
        fn derivative_bounded(x in -50.0f64..50.0) {
            for a in Activation::ALL {
                prop_assert!(a.derivative(x).abs() <= a.derivative_bound());
            }
        }

        #[test]
        fn derivative_matches_finite_differences(x in -6.0f64..6.0) {
            prop_assume!(x.abs() > 1e-3);
            let h = 1e-6;
            for a in Activation::ALL {
                let fd = (a.value(x + h) - a.value(x - h)) / (2.0 * h);
                let an = a.derivative(x);
                let err = (fd - an).abs() / an.abs().max(1e-3);
                prop_assert!(err < 1e-5, "{a} at {x}: fd={fd} analytic={an}");
            }
        }
    }
}
