use super::autodiff::Real;
use super::params::Mat;
use super::NnError;

/// Numerically stable softmax.
pub fn softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().map(|x| x.value()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<T> = logits.iter().map(|&x| (x - m).exp()).collect();
    let mut total = exps[0];
    for &e in &exps[1..] {
        total = total + e;
    }
    exps.into_iter().map(|e| e / total).collect()
}

/// Log-softmax, used for cross-entropies.
pub fn log_softmax<T: Real>(logits: &[T]) -> Vec<T> {
    let m = logits.iter().map(|x| x.value()).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<T> = logits.iter().map(|&x| (x - m).exp()).collect();
    let mut total = exps[0];
    for &e in &exps[1..] {
        total = total + e;
    }
    let lse = total.ln() + m;
    logits.iter().map(|&x| x - lse).collect()
}

/// Expert weights `softmax(W_g x)` for `n` experts (`W_g` is `n x d`).
pub fn gated_aggregator<T: Real>(x: &[T], w_gate: &Mat<T>) -> Result<Vec<T>, NnError> {
    if x.len() != w_gate.cols {
        return Err(NnError::DimensionMismatch {
            expected: w_gate.cols,
            got: x.len(),
        });
    }
    Ok(softmax(&w_gate.mul_vec(x)))
}

pub type Expert<'a, T> = &'a dyn Fn(&[T]) -> Vec<T>;

/// Sparse mixture of experts: evaluates only the `k_top` highest-gated
/// experts and sums their outputs with gates renormalized over the chosen
/// set. Ties on gate value go to the lower expert index.
pub fn mixture_dispatch<T: Real>(
    x: &[T],
    gates: &[T],
    experts: &[Expert<'_, T>],
    k_top: usize,
) -> Result<Vec<T>, NnError> {
    let n = experts.len();
    if gates.len() != n {
        return Err(NnError::DimensionMismatch {
            expected: n,
            got: gates.len(),
        });
    }
    if k_top == 0 || k_top > n {
        return Err(NnError::InvalidArgument(format!("k_top {k_top} outside [1, {n}]")));
    }
    let chosen = top_k(gates, k_top);
    let mut norm = gates[chosen[0]];
    for &i in &chosen[1..] {
        norm = norm + gates[i];
    }
    let mut out: Option<Vec<T>> = None;
    for &i in &chosen {
        let y = experts[i](x);
        let w = gates[i] / norm;
        out = Some(match out {
            None => y.into_iter().map(|v| v * w).collect(),
            Some(acc) => {
                if acc.len() != y.len() {
                    return Err(NnError::DimensionMismatch {
                        expected: acc.len(),
                        got: y.len(),
                    });
                }
                acc.into_iter().zip(y).map(|(a, v)| a + v * w).collect()
            }
        });
    }
    Ok(out.expect("k_top >= 1"))
}

/// Indices of the `k` largest values, descending, ties by index.
pub fn top_k<T: Real>(values: &[T], k: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| values[b].value().total_cmp(&values[a].value()).then(a.cmp(&b)));
    idx.truncate(k);
    idx
}
