use std::collections::HashMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::store::{Triple, TripleStore};
use super::VarEmError;

/// Triple plausibility in the open interval (0, 1).
pub trait Scorer {
    fn score(&self, t: &Triple) -> f64;
}

pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn score(&self, _: &Triple) -> f64 {
        self.0
    }
}

/// Per-triple scores with a fallback.
pub struct TableScorer {
    pub table: HashMap<Triple, f64>,
    pub default: f64,
}

impl Scorer for TableScorer {
    fn score(&self, t: &Triple) -> f64 {
        self.table.get(t).copied().unwrap_or(self.default)
    }
}

/// Multiplicative embedding scorer `σ(Σ_d x_h[d] x_r[d] x_t[d])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingModel {
    pub entities: Vec<Vec<f64>>,
    pub relations: Vec<Vec<f64>>,
}

impl EmbeddingModel {
    pub fn init<R: Rng + ?Sized>(n_entities: usize, n_relations: usize, dim: usize, scale: f64, rng: &mut R) -> Self {
        let normal = Normal::new(0.0, scale).unwrap();
        let mut draw = |n: usize| (0..n).map(|_| (0..dim).map(|_| normal.sample(rng)).collect()).collect();
        Self {
            entities: draw(n_entities),
            relations: draw(n_relations),
        }
    }

    fn raw(&self, t: &Triple) -> f64 {
        let (h, r, tl) = (
            &self.entities[t.head],
            &self.relations[t.relation],
            &self.entities[t.tail],
        );
        h.iter().zip(r).zip(tl).map(|((a, b), c)| a * b * c).sum()
    }

    /// Gradient descent on the cross-entropy between scores and `targets`
    /// (one per store variable: labels for observed triples, posteriors for
    /// hidden ones). Returns the mean loss before each epoch.
    pub fn fit(
        &mut self,
        store: &TripleStore,
        targets: &[f64],
        lr: f64,
        epochs: usize,
    ) -> Result<Vec<f64>, VarEmError> {
        if targets.len() != store.variable_count() {
            return Err(VarEmError::InvalidArgument(format!(
                "{} targets for {} variables",
                targets.len(),
                store.variable_count()
            )));
        }
        let n = targets.len().max(1) as f64;
        let mut losses = Vec::with_capacity(epochs);
        for _ in 0..epochs {
            let mut loss = 0.0;
            let mut ge = vec![vec![0.0; self.dim()]; self.entities.len()];
            let mut gr = vec![vec![0.0; self.dim()]; self.relations.len()];
            for (var, &y) in targets.iter().enumerate() {
                let t = store.triple(var);
                let s = sigmoid(self.raw(&t)).clamp(1e-12, 1.0 - 1e-12);
                loss -= y * s.ln() + (1.0 - y) * (1.0 - s).ln();
                let d = (s - y) / n;
                for k in 0..self.dim() {
                    let (h, r, tl) = (
                        self.entities[t.head][k],
                        self.relations[t.relation][k],
                        self.entities[t.tail][k],
                    );
                    ge[t.head][k] += d * r * tl;
                    gr[t.relation][k] += d * h * tl;
                    ge[t.tail][k] += d * h * r;
                }
            }
            losses.push(loss / n);
            for (x, g) in self
                .entities
                .iter_mut()
                .zip(&ge)
                .chain(self.relations.iter_mut().zip(&gr))
            {
                for (a, b) in x.iter_mut().zip(g) {
                    *a -= lr * b;
                }
            }
        }
        Ok(losses)
    }

    pub fn dim(&self) -> usize {
        self.relations.first().map_or(0, Vec::len)
    }
}

impl Scorer for EmbeddingModel {
    fn score(&self, t: &Triple) -> f64 {
        sigmoid(self.raw(t))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn fit_reduces_loss() {
        let store = TripleStore::parse("a\tr\tb\t1\nb\tr\tc\t1\nc\tr\ta\t0\na\tr\tc\t0\n").unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let mut m = EmbeddingModel::init(3, 1, 4, 0.5, &mut rng);
        let y: Vec<f64> = store.labels().iter().map(|&b| f64::from(u8::from(b))).collect();
        let losses = m.fit(&store, &y, 0.5, 300).unwrap();
        assert!(losses[299] < 0.5 * losses[0], "{} {}", losses[0], losses[299]);
        assert!(store.triples().all(|t| {
            let s = m.score(&t);
            s > 0.0 && s < 1.0
        }));
    }
}
