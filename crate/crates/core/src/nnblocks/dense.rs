use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::Real;
use super::params::{Mat, ParamTree};

pub const LEAKY_RELU_SLOPE: f64 = 0.2;
pub const ELU_ALPHA: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Activation {
    Identity,
    Relu,
    LeakyRelu,
    Sigmoid,
    Tanh,
    Elu,
}

impl Activation {
    pub fn apply<T: Real>(self, x: T) -> T {
        match self {
            Activation::Identity => x,
            Activation::Relu => x.relu(),
            Activation::LeakyRelu => x.leaky_relu(LEAKY_RELU_SLOPE),
            Activation::Sigmoid => x.sigmoid(),
            Activation::Tanh => x.tanh(),
            Activation::Elu => x.elu(ELU_ALPHA),
        }
    }

    pub fn apply_all<T: Real>(self, xs: &[T]) -> Vec<T> {
        xs.iter().map(|&x| self.apply(x)).collect()
    }
}

/// `y = act(W x + b)`
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseParams<T = f64> {
    pub weight: Mat<T>,
    pub bias: Mat<T>,
    pub activation: Activation,
}

impl<T: Copy> ParamTree<T> for DenseParams<T> {
    type Of<U: Copy> = DenseParams<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> DenseParams<U> {
        DenseParams {
            weight: self.weight.map(f),
            bias: self.bias.map(f),
            activation: self.activation,
        }
    }
}

impl DenseParams<f64> {
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            weight: Mat::glorot(output, input, rng),
            bias: Mat::zeros(output, 1),
            activation,
        }
    }

    pub fn zeros(input: usize, output: usize, activation: Activation) -> Self {
        Self {
            weight: Mat::zeros(output, input),
            bias: Mat::zeros(output, 1),
            activation,
        }
    }
}

impl<T: Real> DenseParams<T> {
    pub fn input_dim(&self) -> usize {
        self.weight.cols
    }

    pub fn output_dim(&self) -> usize {
        self.weight.rows
    }

    pub fn forward(&self, x: &[T]) -> Vec<T> {
        self.weight
            .mul_vec(x)
            .into_iter()
            .zip(self.bias.as_slice())
            .map(|(z, &b)| self.activation.apply(z + b))
            .collect()
    }
}

/// Gated linear unit: `linear * sigmoid(gate)`.
pub fn glu<T: Real>(linear: &[T], gate: &[T]) -> Vec<T> {
    assert_eq!(linear.len(), gate.len(), "glu branch widths");
    linear.iter().zip(gate).map(|(&a, &g)| a * g.sigmoid()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn glu_with_zero_gate_halves() {
        let out = glu(&[2.0, -4.0], &[0.0, 0.0]);
        assert_eq!(out, vec![1.0, -2.0]);
    }

    #[test]
    fn dense_forward_identity() {
        let p = DenseParams {
            weight: Mat::from_vec(1, 2, vec![1.0, -1.0]),
            bias: Mat::column(vec![0.5]),
            activation: Activation::Identity,
        };
        assert_eq!(p.forward(&[3.0, 1.0]), vec![2.5]);
    }

    #[test]
    fn activations() {
        assert_eq!(Activation::LeakyRelu.apply(-1.0), -0.2);
        assert_eq!(Activation::Relu.apply(-1.0), 0.0);
        assert!((Activation::Elu.apply(-1.0f64) - (f64::exp(-1.0) - 1.0)).abs() < 1e-15);
    }
}
