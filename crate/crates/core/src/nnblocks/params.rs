use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::{Gradient, Real, Tape, Var};

/// A structure of trainable scalars that can be rebuilt over another scalar
/// type. Traversal order of [`ParamTree::map`] defines the flat layout.
pub trait ParamTree<T: Copy> {
    type Of<U: Copy>: ParamTree<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> Self::Of<U>;
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat<T = f64> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<T>,
}

impl<T: Copy> ParamTree<T> for Mat<T> {
    type Of<U: Copy> = Mat<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> Mat<U> {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }
}

impl<T: Copy, P: ParamTree<T>> ParamTree<T> for Vec<P> {
    type Of<U: Copy> = Vec<P::Of<U>>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> Self::Of<U> {
        self.iter().map(|p| p.map(f)).collect()
    }
}

impl<T: Copy> Mat<T> {
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Self { rows, cols, data }
    }

    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }
}

impl<T: Real> Mat<T> {
    /// `self * x` for a column vector `x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.cols, "mul_vec dimension");
        (0..self.rows).map(|r| super::autodiff::dot(self.row(r), x)).collect()
    }

    /// `self^T * x`.
    pub fn tmul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.rows, "tmul_vec dimension");
        (0..self.cols)
            .map(|c| {
                let mut acc = self.get(0, c) * x[0];
                for r in 1..self.rows {
                    acc = acc + self.get(r, c) * x[r];
                }
                acc
            })
            .collect()
    }
}

impl Mat<f64> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Uniform Glorot initialization.
    pub fn glorot<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let a = (6.0 / (rows + cols) as f64).sqrt();
        Self {
            rows,
            cols,
            data: (0..rows * cols).map(|_| rng.random_range(-a..a)).collect(),
        }
    }

    pub fn column(data: Vec<f64>) -> Self {
        let n = data.len();
        Self::from_vec(n, 1, data)
    }
}

pub fn flatten<P: ParamTree<f64>>(p: &P) -> Vec<f64> {
    let mut out = Vec::new();
    p.map(&mut |x| {
        out.push(x);
        x
    });
    out
}

pub fn param_count<P: ParamTree<f64>>(p: &P) -> usize {
    flatten(p).len()
}

/// Rebuilds `template`'s structure from a flat slice of any scalar type.
pub fn unflatten<T: Copy, P: ParamTree<f64>>(template: &P, flat: &[T]) -> P::Of<T> {
    let mut i = 0;
    let out = template.map(&mut |_| {
        let v = flat[i];
        i += 1;
        v
    });
    assert_eq!(i, flat.len(), "flat parameter length");
    out
}

/// Records every parameter as an independent tape variable.
pub fn lift<'t, P: ParamTree<f64>>(p: &P, tape: &'t Tape) -> P::Of<Var<'t>> {
    p.map(&mut |x| tape.var(x))
}

/// Flat gradient for lifted parameters, in the template's layout.
pub fn gradient_of<'t, Q: ParamTree<Var<'t>>>(lifted: &Q, g: &Gradient) -> Vec<f64> {
    let mut out = Vec::new();
    lifted.map(&mut |v| {
        out.push(g.wrt(v));
        0.0f64
    });
    out
}

/// Plain gradient descent: `p - lr * grad`.
pub fn sgd_step<P: ParamTree<f64, Of<f64> = P>>(p: &P, grad: &[f64], lr: f64) -> P {
    let mut i = 0;
    p.map(&mut |x| {
        let y = x - lr * grad[i];
        i += 1;
        y
    })
}
