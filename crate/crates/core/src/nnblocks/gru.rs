use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::Real;
use super::params::{Mat, ParamTree};

/// Gate matrices of a bias-free GRU cell. `w_*` act on the input, `u_*`
/// on the previous hidden state; the two contributions are summed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GruParams<T = f64> {
    pub w_z: Mat<T>,
    pub u_z: Mat<T>,
    pub w_r: Mat<T>,
    pub u_r: Mat<T>,
    pub w: Mat<T>,
    pub u: Mat<T>,
}

impl<T: Copy> ParamTree<T> for GruParams<T> {
    type Of<U: Copy> = GruParams<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> GruParams<U> {
        GruParams {
            w_z: self.w_z.map(f),
            u_z: self.u_z.map(f),
            w_r: self.w_r.map(f),
            u_r: self.u_r.map(f),
            w: self.w.map(f),
            u: self.u.map(f),
        }
    }
}

impl GruParams<f64> {
    pub fn zeros(input: usize, hidden: usize) -> Self {
        Self {
            w_z: Mat::zeros(hidden, input),
            u_z: Mat::zeros(hidden, hidden),
            w_r: Mat::zeros(hidden, input),
            u_r: Mat::zeros(hidden, hidden),
            w: Mat::zeros(hidden, input),
            u: Mat::zeros(hidden, hidden),
        }
    }

    pub fn init<R: Rng + ?Sized>(input: usize, hidden: usize, rng: &mut R) -> Self {
        Self {
            w_z: Mat::glorot(hidden, input, rng),
            u_z: Mat::glorot(hidden, hidden, rng),
            w_r: Mat::glorot(hidden, input, rng),
            u_r: Mat::glorot(hidden, hidden, rng),
            w: Mat::glorot(hidden, input, rng),
            u: Mat::glorot(hidden, hidden, rng),
        }
    }
}

impl<T: Real> GruParams<T> {
    pub fn hidden_dim(&self) -> usize {
        self.u.rows
    }

    /// One update: `h = (1 - z) * h_prev + z * h_cand`.
    pub fn step(&self, input: &[T], h_prev: &[T]) -> Vec<T> {
        let z: Vec<T> = add(&self.w_z.mul_vec(input), &self.u_z.mul_vec(h_prev))
            .into_iter()
            .map(Real::sigmoid)
            .collect();
        let r: Vec<T> = add(&self.w_r.mul_vec(input), &self.u_r.mul_vec(h_prev))
            .into_iter()
            .map(Real::sigmoid)
            .collect();
        let gated: Vec<T> = r.iter().zip(h_prev).map(|(&a, &b)| a * b).collect();
        let cand: Vec<T> = add(&self.w.mul_vec(input), &self.u.mul_vec(&gated))
            .into_iter()
            .map(Real::tanh)
            .collect();
        (0..h_prev.len())
            .map(|i| (-z[i] + 1.0) * h_prev[i] + z[i] * cand[i])
            .collect()
    }

    /// Runs the cell over a sequence, returning every hidden state.
    pub fn run(&self, inputs: &[Vec<T>], h0: &[T]) -> Vec<Vec<T>> {
        let mut h = h0.to_vec();
        let mut out = Vec::with_capacity(inputs.len());
        for x in inputs {
            h = self.step(x, &h);
            out.push(h.clone());
        }
        out
    }
}

fn add<T: Real>(a: &[T], b: &[T]) -> Vec<T> {
    a.iter().zip(b).map(|(&x, &y)| x + y).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_halve_state() {
        let p = GruParams::zeros(3, 2);
        let h = p.step(&[1.0, 2.0, 3.0], &[0.8, -0.4]);
        assert_eq!(h, vec![0.4, -0.2]);
        assert_eq!(p.step(&[1.0, 2.0, 3.0], &[0.0, 0.0]), vec![0.0, 0.0]);
    }
}
