use serde::{Deserialize, Serialize};

use super::scalar::Scalar;

/// Arguments to `exp` inside the sigmoid are clamped to this magnitude.
pub const SIGMOID_CLAMP: f64 = 40.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Activation {
    Relu,
    Tanh,
    Sigmoid,
    Identity,
}

impl Activation {
    pub const ALL: [Activation; 4] = [Activation::Relu, Activation::Tanh, Activation::Sigmoid, Activation::Identity];

    #[inline]
    pub fn apply<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => z.max(T::zero()),
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative with respect to the pre-activation `z`.
    #[inline]
    pub fn derivative<T: Scalar>(self, z: T) -> T {
        match self {
            Activation::Relu => {
                if z > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Activation::Tanh => {
                let t = z.tanh();
                T::one() - t * t
            }
            Activation::Sigmoid => {
                let s = sigmoid(z);
                s * (T::one() - s)
            }
            Activation::Identity => T::one(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Activation::Relu => "relu",
            Activation::Tanh => "tanh",
            Activation::Sigmoid => "sigmoid",
            Activation::Identity => "identity",
        }
    }
}

impl std::str::FromStr for Activation {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "relu" => Ok(Activation::Relu),
            "tanh" => Ok(Activation::Tanh),
            "sigmoid" => Ok(Activation::Sigmoid),
            "identity" | "linear" => Ok(Activation::Identity),
            other => Err(crate::Error::Parameter(format!("unknown activation {other:?}"))),
        }
    }
}

impl std::fmt::Display for Activation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(z: T) -> T {
    let c = T::of(SIGMOID_CLAMP);
    let z = z.max(-c).min(c);
    T::one() / (T::one() + (-z).exp())
}

/// Elementwise activation of a batch of vectors.
pub fn activate<T: Scalar>(kind: Activation, z: &[Vec<T>]) -> Vec<Vec<T>> {
    z.iter().map(|row| row.iter().map(|&v| kind.apply(v)).collect()).collect()
}

/// Elementwise derivative of the activation at `z`.
pub fn activate_grad<T: Scalar>(kind: Activation, z: &[Vec<T>]) -> Vec<Vec<T>> {
    z.iter().map(|row| row.iter().map(|&v| kind.derivative(v)).collect()).collect()
}
