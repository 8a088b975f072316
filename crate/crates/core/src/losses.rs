//! Decent losses: convex and Lipschitz in the prediction.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Loss {
    /// `[1 - ŷy]₊`, labels ±1. Subderivative 0 at the kink.
    Hinge,
    /// `ln(1 + exp(-ŷy))`, labels ±1.
    Logistic,
    /// `(ŷ - y)²`; not Lipschitz.
    Square,
    /// `|ŷ - y|`, real labels. Subderivative 0 at the kink.
    Absolute,
}

impl Loss {
    pub const ALL: [Loss; 4] = [Loss::Hinge, Loss::Logistic, Loss::Square, Loss::Absolute];

    pub fn name(self) -> &'static str {
        match self {
            Loss::Hinge => "hinge",
            Loss::Logistic => "logistic",
            Loss::Square => "square",
            Loss::Absolute => "absolute",
        }
    }

    #[inline]
    pub fn value(self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Hinge => (1.0 - pred * y).max(0.0),
            Loss::Logistic => softplus(-pred * y),
            Loss::Square => (pred - y) * (pred - y),
            Loss::Absolute => (pred - y).abs(),
        }
    }

    /// Derivative in the prediction.
    #[inline]
    pub fn derivative(self, pred: f64, y: f64) -> f64 {
        match self {
            Loss::Hinge => {
                if pred * y < 1.0 {
                    -y
                } else {
                    0.0
                }
            }
            Loss::Logistic => -y * sigmoid(-pred * y),
            Loss::Square => 2.0 * (pred - y),
            Loss::Absolute => {
                if pred > y {
                    1.0
                } else if pred < y {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }

    /// Lipschitz constant in the prediction for labels in `{-1, +1}`
    /// (`None` for the square loss).
    pub fn lipschitz(self) -> Option<f64> {
        match self {
            Loss::Square => None,
            _ => Some(1.0),
        }
    }

    pub fn needs_sign_labels(self) -> bool {
        matches!(self, Loss::Hinge | Loss::Logistic)
    }

    pub fn check_label(self, y: f64) -> Result<()> {
        if self.needs_sign_labels() && y != 1.0 && y != -1.0 {
            return Err(Error::InvalidLabel(y));
        }
        Ok(())
    }
}

impl fmt::Display for Loss {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Loss {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Loss::ALL
            .into_iter()
            .find(|l| l.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown loss `{s}`")))
    }
}

/// `ln(1 + eᶻ)` without overflow.
#[inline]
fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

#[inline]
fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn hinge(pred: f64, y: f64) -> Result<f64> {
    Loss::Hinge.check_label(y)?;
    Ok(Loss::Hinge.value(pred, y))
}

pub fn logistic(pred: f64, y: f64) -> Result<f64> {
    Loss::Logistic.check_label(y)?;
    Ok(Loss::Logistic.value(pred, y))
}

pub fn square(pred: f64, y: f64) -> f64 {
    Loss::Square.value(pred, y)
}
