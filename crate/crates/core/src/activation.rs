//! Scalar activation functions attached to individual nodes.
//!
//! Every supported activation is Lipschitz continuous, which is what the
//! approximate-reduction error bounds rely on. [`ActivationKind::lipschitz`]
//! returns an upper bound on the Lipschitz constant, not necessarily the
//! tightest one (for `Sigmoid` the true constant is 1/4; we report 1).

use serde::{Deserialize, Serialize};

/// A node's activation function. Two nodes may be merged only when their
/// kinds (including parameters) are identical.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ActivationKind {
    Relu,
    /// `x` for `x >= 0`, `slope * x` otherwise. The slope must be finite and
    /// non-negative; that keeps `max(1, slope)` a valid Lipschitz bound.
    LeakyRelu { slope: f64 },
    Tanh,
    Sigmoid,
    Softplus,
    Arctan,
    Softsign,
    Identity,
}

impl ActivationKind {
    /// Applies the function to a scalar.
    pub fn apply(&self, x: f64) -> f64 {
        match *self {
            ActivationKind::Relu => x.max(0.0),
            ActivationKind::LeakyRelu { slope } => {
                if x >= 0.0 {
                    x
                } else {
                    slope * x
                }
            }
            ActivationKind::Tanh => x.tanh(),
            // Stable on both tails: never exponentiates a positive argument.
            ActivationKind::Sigmoid => {
                if x >= 0.0 {
                    1.0 / (1.0 + (-x).exp())
                } else {
                    let e = x.exp();
                    e / (1.0 + e)
                }
            }
            // max(x, 0) + ln(1 + exp(-|x|)) avoids overflow for large x.
            ActivationKind::Softplus => x.max(0.0) + (-x.abs()).exp().ln_1p(),
            ActivationKind::Arctan => x.atan(),
            ActivationKind::Softsign => x / (1.0 + x.abs()),
            ActivationKind::Identity => x,
        }
    }

    /// Upper bound on the Lipschitz constant.
    pub fn lipschitz(&self) -> f64 {
        match *self {
            ActivationKind::LeakyRelu { slope } => slope.max(1.0),
            _ => 1.0,
        }
    }

    /// True when the function fixes the origin (`f(0) = 0`). Sigmoid and
    /// softplus map 0 to 1/2 and ln 2.
    pub fn fixes_zero(&self) -> bool {
        !matches!(self, ActivationKind::Sigmoid | ActivationKind::Softplus)
    }

    /// Total order used when grouping nodes by activation: kind rank first,
    /// then the parameter. Equal keys mean interchangeable activations.
    pub(crate) fn sort_key(&self) -> (u8, f64) {
        match *self {
            ActivationKind::Relu => (0, 0.0),
            ActivationKind::LeakyRelu { slope } => (1, slope),
            ActivationKind::Tanh => (2, 0.0),
            ActivationKind::Sigmoid => (3, 0.0),
            ActivationKind::Softplus => (4, 0.0),
            ActivationKind::Arctan => (5, 0.0),
            ActivationKind::Softsign => (6, 0.0),
            ActivationKind::Identity => (7, 0.0),
        }
    }

    /// Parameter validity: leaky-relu slopes must be finite and >= 0.
    pub(crate) fn validate(&self) -> bool {
        match *self {
            ActivationKind::LeakyRelu { slope } => slope.is_finite() && slope >= 0.0,
            _ => true,
        }
    }
}

impl std::fmt::Display for ActivationKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match *self {
            ActivationKind::Relu => write!(f, "relu"),
            ActivationKind::LeakyRelu { slope } => write!(f, "leaky_relu({slope})"),
            ActivationKind::Tanh => write!(f, "tanh"),
            ActivationKind::Sigmoid => write!(f, "sigmoid"),
            ActivationKind::Softplus => write!(f, "softplus"),
            ActivationKind::Arctan => write!(f, "arctan"),
            ActivationKind::Softsign => write!(f, "softsign"),
            ActivationKind::Identity => write!(f, "identity"),
        }
    }
}

/// All parameter-free kinds plus a representative leaky-relu, for tests and
/// generators that sweep activations.
pub const ALL_KINDS: [ActivationKind; 8] = [
    ActivationKind::Relu,
    ActivationKind::LeakyRelu { slope: 0.1 },
    ActivationKind::Tanh,
    ActivationKind::Sigmoid,
    ActivationKind::Softplus,
    ActivationKind::Arctan,
    ActivationKind::Softsign,
    ActivationKind::Identity,
];
