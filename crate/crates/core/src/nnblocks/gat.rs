use rand::Rng;
use serde::{Deserialize, Serialize};

use super::autodiff::Real;
use super::dense::{Activation, LEAKY_RELU_SLOPE};
use super::gating::softmax;
use super::params::{Mat, ParamTree};
use super::NnError;

/// One graph-attention head: shared transform `T`, attention vector `a`
/// over `[T h_i || T h_j]`, LeakyReLU scores normalized by softmax over the
/// neighborhood.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionHead<T = f64> {
    pub transform: Mat<T>,
    pub attention: Mat<T>,
    pub activation: Activation,
}

impl<T: Copy> ParamTree<T> for AttentionHead<T> {
    type Of<U: Copy> = AttentionHead<U>;
    fn map<U: Copy>(&self, f: &mut dyn FnMut(T) -> U) -> AttentionHead<U> {
        AttentionHead {
            transform: self.transform.map(f),
            attention: self.attention.map(f),
            activation: self.activation,
        }
    }
}

impl AttentionHead<f64> {
    pub fn init<R: Rng + ?Sized>(input: usize, output: usize, activation: Activation, rng: &mut R) -> Self {
        Self {
            transform: Mat::glorot(output, input, rng),
            attention: Mat::glorot(2 * output, 1, rng),
            activation,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attended<T> {
    /// Normalized weights, aligned with the neighborhood order.
    pub weights: Vec<T>,
    pub output: Vec<T>,
}

impl<T: Real> AttentionHead<T> {
    pub fn output_dim(&self) -> usize {
        self.transform.rows
    }

    /// Attention of node `target` over `neighborhood` (which must include
    /// the target itself if self-attention is wanted).
    pub fn attend(&self, features: &[Vec<T>], target: usize, neighborhood: &[usize]) -> Result<Attended<T>, NnError> {
        if neighborhood.is_empty() {
            return Err(NnError::EmptyNeighborhood(target));
        }
        let d = self.output_dim();
        let a = self.attention.as_slice();
        let ti = self.transform.mul_vec(&features[target]);
        let left = super::autodiff::dot(&a[..d], &ti);
        let projected: Vec<Vec<T>> = neighborhood
            .iter()
            .map(|&j| self.transform.mul_vec(&features[j]))
            .collect();
        let scores: Vec<T> = projected
            .iter()
            .map(|tj| (left + super::autodiff::dot(&a[d..], tj)).leaky_relu(LEAKY_RELU_SLOPE))
            .collect();
        let weights = softmax(&scores);
        let mut agg: Vec<T> = projected[0].iter().map(|&v| v * weights[0]).collect();
        for (w, tj) in weights.iter().zip(&projected).skip(1) {
            for (acc, &v) in agg.iter_mut().zip(tj) {
                *acc = *acc + v * *w;
            }
        }
        Ok(Attended {
            weights,
            output: self.activation.apply_all(&agg),
        })
    }
}

/// How multi-head outputs are combined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum HeadCombine {
    Concat,
    Mean,
}

pub fn multi_head_attend<T: Real>(
    heads: &[AttentionHead<T>],
    features: &[Vec<T>],
    target: usize,
    neighborhood: &[usize],
    combine: HeadCombine,
) -> Result<(Vec<Vec<T>>, Vec<T>), NnError> {
    let mut weights = Vec::with_capacity(heads.len());
    let mut outputs = Vec::with_capacity(heads.len());
    for h in heads {
        let a = h.attend(features, target, neighborhood)?;
        weights.push(a.weights);
        outputs.push(a.output);
    }
    let out = match combine {
        HeadCombine::Concat => outputs.concat(),
        HeadCombine::Mean => {
            let k = outputs.len() as f64;
            let mut acc = outputs[0].clone();
            for o in &outputs[1..] {
                for (a, &v) in acc.iter_mut().zip(o) {
                    *a = *a + v;
                }
            }
            acc.into_iter().map(|v| v / k).collect()
        }
    };
    Ok((weights, out))
}
