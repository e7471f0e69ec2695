//! Inference in the joint model
//! `p_w(v) ∝ Π_i Ber(v_i | f_i) · exp(Σ_g w_rule(g) φ_g(v))`
//! where `f_i` is the scorer output for triple `i` and `φ_g` the truth value
//! of grounding `g`. Hidden triples get factorized Bernoulli posteriors.

use serde::{Deserialize, Serialize};

use super::model::{logit, sigmoid, Scorer};
use super::rules::RuleSet;
use super::store::TripleStore;
use super::VarEmError;

/// Largest variable count handled by exact enumeration.
pub const MAX_ENUMERATION_VARS: usize = 24;
const Q_FLOOR: f64 = 1e-12;

pub fn scores(store: &TripleStore, scorer: &dyn Scorer) -> Result<Vec<f64>, VarEmError> {
    (0..store.variable_count())
        .map(|var| {
            let s = scorer.score(&store.triple(var));
            if s > 0.0 && s < 1.0 {
                Ok(s)
            } else {
                Err(VarEmError::ScoreOutOfRange { var, score: s })
            }
        })
        .collect()
}

/// `Σ log Ber(v | f)` over observed triples (at their labels) and hidden
/// triples (at `hidden`).
pub fn joint_log_prob(store: &TripleStore, scorer: &dyn Scorer, hidden: &[bool]) -> Result<f64, VarEmError> {
    if hidden.len() != store.hidden_count() {
        return Err(VarEmError::InvalidArgument(format!(
            "{} hidden values for {} hidden triples",
            hidden.len(),
            store.hidden_count()
        )));
    }
    let f = scores(store, scorer)?;
    Ok(store
        .labels()
        .iter()
        .chain(hidden)
        .zip(&f)
        .map(|(&v, &s)| if v { s.ln() } else { (1.0 - s).ln() })
        .sum())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Posteriors {
    /// `q(v = 1)` per hidden triple, in (0, 1).
    pub q: Vec<f64>,
    pub sweeps: usize,
    pub max_change: f64,
    /// False when the sweep budget ran out before `max_change < tol`.
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EStepOptions {
    pub sweeps: usize,
    pub damping: f64,
    pub tol: f64,
}

impl Default for EStepOptions {
    fn default() -> Self {
        Self {
            sweeps: 5,
            damping: 0.5,
            tol: 1e-10,
        }
    }
}

fn filled(store: &TripleStore, q: &[f64]) -> Vec<f64> {
    store
        .labels()
        .iter()
        .map(|&b| if b { 1.0 } else { 0.0 })
        .chain(q.iter().copied())
        .collect()
}

fn conditional_logit(var: usize, f: &[f64], rules: &RuleSet, w: &[f64], v: &[f64]) -> f64 {
    logit(f[var])
        + rules
            .touching(var)
            .iter()
            .map(|&g| {
                let g = &rules.groundings[g];
                w[g.rule] * g.flip_delta(var, v)
            })
            .sum::<f64>()
}

/// Damped sequential mean-field sweeps. Each update moves `q_i` part way to
/// its coordinate optimum, so the ELBO never decreases.
pub fn e_step(
    store: &TripleStore,
    scorer: &dyn Scorer,
    rules: &RuleSet,
    prev: Option<&Posteriors>,
    opts: EStepOptions,
) -> Result<Posteriors, VarEmError> {
    if !(opts.damping > 0.0 && opts.damping <= 1.0) {
        return Err(VarEmError::InvalidArgument(format!(
            "damping {} not in (0, 1]",
            opts.damping
        )));
    }
    let f = scores(store, scorer)?;
    let no = store.observed_count();
    let q0 = match prev {
        Some(p) if p.q.len() == store.hidden_count() => p.q.clone(),
        Some(p) => {
            return Err(VarEmError::InvalidArgument(format!(
                "{} posteriors for {} hidden triples",
                p.q.len(),
                store.hidden_count()
            )))
        }
        None => f[no..].to_vec(),
    };
    let mut v = filled(store, &q0);
    let w = rules.weights();
    let mut max_change = 0.0;
    let mut sweeps = 0;
    while sweeps < opts.sweeps {
        sweeps += 1;
        max_change = 0.0f64;
        for var in no..v.len() {
            let target = sigmoid(conditional_logit(var, &f, rules, &w, &v));
            let next = ((1.0 - opts.damping) * v[var] + opts.damping * target).clamp(Q_FLOOR, 1.0 - Q_FLOOR);
            max_change = max_change.max((next - v[var]).abs());
            v[var] = next;
        }
        if max_change < opts.tol {
            break;
        }
    }
    Ok(Posteriors {
        q: v[no..].to_vec(),
        sweeps,
        max_change,
        converged: max_change < opts.tol,
    })
}

/// How hidden neighbours enter the blanket in the M-step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Blanket {
    /// Posterior means.
    #[default]
    Expected,
    /// Posteriors rounded at 0.5.
    Thresholded,
}

fn blanket_values(store: &TripleStore, q: &[f64], mode: Blanket) -> Vec<f64> {
    match mode {
        Blanket::Expected => filled(store, q),
        Blanket::Thresholded => filled(
            store,
            &q.iter().map(|&x| if x >= 0.5 { 1.0 } else { 0.0 }).collect::<Vec<_>>(),
        ),
    }
}

/// `Σ_i t_i log p_w(v_i=1 | MB) + (1 - t_i) log p_w(v_i=0 | MB)` with targets
/// `t` = labels for observed triples and `q` for hidden ones.
pub fn pseudo_log_likelihood(
    store: &TripleStore,
    f: &[f64],
    rules: &RuleSet,
    weights: &[f64],
    q: &[f64],
    mode: Blanket,
) -> f64 {
    let t = filled(store, q);
    let mb = blanket_values(store, q, mode);
    (0..t.len())
        .map(|i| {
            let a = conditional_logit(i, f, rules, weights, &mb);
            t[i] * log_sigmoid(a) + (1.0 - t[i]) * log_sigmoid(-a)
        })
        .sum()
}

/// Gradient of [`pseudo_log_likelihood`] in the rule weights:
/// `Σ_i (t_i - p_w(v_i=1 | MB)) Σ_{g ∋ i, rule(g)=l} (φ_g(v_i=1) - φ_g(v_i=0))`.
pub fn pl_gradient(
    store: &TripleStore,
    f: &[f64],
    rules: &RuleSet,
    weights: &[f64],
    q: &[f64],
    mode: Blanket,
) -> Vec<f64> {
    let t = filled(store, q);
    let mb = blanket_values(store, q, mode);
    let mut grad = vec![0.0; rules.rules.len()];
    for i in 0..t.len() {
        let err = t[i] - sigmoid(conditional_logit(i, f, rules, weights, &mb));
        for &g in rules.touching(i) {
            let g = &rules.groundings[g];
            grad[g.rule] += err * g.flip_delta(i, &mb);
        }
    }
    grad
}

fn log_sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        -(-x).exp().ln_1p()
    } else {
        x - x.exp().ln_1p()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MStepOptions {
    pub lr: f64,
    pub blanket: Blanket,
    /// On enumerable instances, halve the step until the ELBO does not drop.
    pub guard: bool,
    pub max_halvings: usize,
}

impl Default for MStepOptions {
    fn default() -> Self {
        Self {
            lr: 0.05,
            blanket: Blanket::Expected,
            guard: true,
            max_halvings: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MStepResult {
    pub weights: Vec<f64>,
    pub gradient: Vec<f64>,
    /// Step size actually taken (0 if every trial step lowered the ELBO).
    pub step: f64,
    pub guarded: bool,
}

/// One pseudo-likelihood gradient-ascent step on the rule weights.
pub fn m_step(
    store: &TripleStore,
    scorer: &dyn Scorer,
    rules: &RuleSet,
    post: &Posteriors,
    opts: MStepOptions,
) -> Result<MStepResult, VarEmError> {
    let f = scores(store, scorer)?;
    let w = rules.weights();
    let gradient = pl_gradient(store, &f, rules, &w, &post.q, opts.blanket);
    let trial = |step: f64| -> Vec<f64> { w.iter().zip(&gradient).map(|(a, g)| a + step * g).collect() };
    let guarded = opts.guard && store.variable_count() <= MAX_ENUMERATION_VARS;
    if !guarded || gradient.iter().all(|&g| g == 0.0) {
        let step = if gradient.iter().all(|&g| g == 0.0) {
            0.0
        } else {
            opts.lr
        };
        return Ok(MStepResult {
            weights: trial(step),
            gradient,
            step,
            guarded,
        });
    }
    let before = elbo_with(store, &f, rules, &w, &post.q)?;
    let mut step = opts.lr;
    for _ in 0..=opts.max_halvings {
        let cand = trial(step);
        if elbo_with(store, &f, rules, &cand, &post.q)? >= before {
            return Ok(MStepResult {
                weights: cand,
                gradient,
                step,
                guarded,
            });
        }
        step *= 0.5;
    }
    Ok(MStepResult {
        weights: w,
        gradient,
        step: 0.0,
        guarded,
    })
}

fn check_enumerable(store: &TripleStore) -> Result<(), VarEmError> {
    let n = store.variable_count();
    if n > MAX_ENUMERATION_VARS {
        return Err(VarEmError::TooLarge {
            variables: n,
            max: MAX_ENUMERATION_VARS,
        });
    }
    Ok(())
}

struct Enumerator {
    base: f64,
    logits: Vec<f64>,
    /// `(body mask, head mask, weight)`.
    clauses: Vec<(u32, u32, f64)>,
    total_w: f64,
}

impl Enumerator {
    fn new(f: &[f64], rules: &RuleSet, w: &[f64]) -> Self {
        let clauses: Vec<(u32, u32, f64)> = rules
            .groundings
            .iter()
            .map(|g| (g.body.iter().fold(0u32, |m, &b| m | 1 << b), 1u32 << g.head, w[g.rule]))
            .collect();
        Self {
            base: f.iter().map(|s| (1.0 - s).ln()).sum(),
            logits: f.iter().map(|&s| logit(s)).collect(),
            total_w: clauses.iter().map(|c| c.2).sum(),
            clauses,
        }
    }

    fn log_weight(&self, mask: u32) -> f64 {
        let mut acc = self.base + self.total_w;
        let mut m = mask;
        while m != 0 {
            acc += self.logits[m.trailing_zeros() as usize];
            m &= m - 1;
        }
        for &(body, head, w) in &self.clauses {
            if mask & body == body && mask & head == 0 {
                acc -= w;
            }
        }
        acc
    }
}

fn logsumexp(xs: impl Iterator<Item = f64>) -> f64 {
    let (mut m, mut s) = (f64::NEG_INFINITY, 0.0);
    for x in xs {
        if x > m {
            s = s * (m - x).exp() + 1.0;
            m = x;
        } else {
            s += (x - m).exp();
        }
    }
    m + s.ln()
}

/// `log Z(w)` by summing over all `2^n` assignments.
pub fn log_partition(store: &TripleStore, f: &[f64], rules: &RuleSet, weights: &[f64]) -> Result<f64, VarEmError> {
    check_enumerable(store)?;
    let e = Enumerator::new(f, rules, weights);
    Ok(logsumexp((0..1u32 << store.variable_count()).map(|m| e.log_weight(m))))
}

fn observed_mask(store: &TripleStore) -> u32 {
    store
        .labels()
        .iter()
        .enumerate()
        .fold(0u32, |m, (i, &b)| if b { m | 1 << i } else { m })
}

/// `log p_w(v_O = labels)`.
pub fn log_evidence(store: &TripleStore, scorer: &dyn Scorer, rules: &RuleSet) -> Result<f64, VarEmError> {
    check_enumerable(store)?;
    let f = scores(store, scorer)?;
    let w = rules.weights();
    let e = Enumerator::new(&f, rules, &w);
    let (obs, no) = (observed_mask(store), store.observed_count());
    let num = logsumexp((0..1u32 << store.hidden_count()).map(|h| e.log_weight(obs | h << no)));
    Ok(num - log_partition(store, &f, rules, &w)?)
}

/// Exact posterior `p_w(v_i = 1 | v_O)` for every hidden triple.
pub fn exact_marginals(store: &TripleStore, scorer: &dyn Scorer, rules: &RuleSet) -> Result<Vec<f64>, VarEmError> {
    check_enumerable(store)?;
    let f = scores(store, scorer)?;
    let e = Enumerator::new(&f, rules, &rules.weights());
    let (obs, no, nh) = (observed_mask(store), store.observed_count(), store.hidden_count());
    let lw: Vec<f64> = (0..1u32 << nh).map(|h| e.log_weight(obs | h << no)).collect();
    let z = logsumexp(lw.iter().copied());
    let mut marg = vec![0.0; nh];
    for (h, l) in lw.iter().enumerate() {
        let p = (l - z).exp();
        for (i, m) in marg.iter_mut().enumerate() {
            if h >> i & 1 == 1 {
                *m += p;
            }
        }
    }
    Ok(marg)
}

fn elbo_with(store: &TripleStore, f: &[f64], rules: &RuleSet, w: &[f64], q: &[f64]) -> Result<f64, VarEmError> {
    let v = filled(store, q);
    let prior: f64 = v
        .iter()
        .zip(f)
        .map(|(&x, &s)| x * s.ln() + (1.0 - x) * (1.0 - s).ln())
        .sum();
    let clauses: f64 = rules.groundings.iter().map(|g| w[g.rule] * g.value(&v)).sum();
    let entropy: f64 = q.iter().map(|&p| -(p * p.ln() + (1.0 - p) * (1.0 - p).ln())).sum();
    Ok(prior + clauses + entropy - log_partition(store, f, rules, w)?)
}

/// `E_q[log p_w(v_O, v_H) - log q(v_H)]`, computed in closed form except for
/// the partition function.
pub fn elbo(store: &TripleStore, scorer: &dyn Scorer, rules: &RuleSet, q: &[f64]) -> Result<f64, VarEmError> {
    if q.len() != store.hidden_count() || q.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
        return Err(VarEmError::InvalidArgument(
            "posteriors must be one value in (0, 1) per hidden triple".into(),
        ));
    }
    let f = scores(store, scorer)?;
    elbo_with(store, &f, rules, &rules.weights(), q)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmTrace {
    /// ELBO after each round, when enumerable.
    pub elbo: Vec<f64>,
    pub weights: Vec<Vec<f64>>,
    pub posteriors: Posteriors,
}

/// Alternating E and M steps; `rules` ends with the learned weights.
pub fn run_em(
    store: &TripleStore,
    scorer: &dyn Scorer,
    rules: &mut RuleSet,
    rounds: usize,
    e: EStepOptions,
    m: MStepOptions,
) -> Result<EmTrace, VarEmError> {
    let enumerable = store.variable_count() <= MAX_ENUMERATION_VARS;
    let mut post = e_step(store, scorer, rules, None, e)?;
    let mut trace = EmTrace {
        elbo: Vec::new(),
        weights: Vec::new(),
        posteriors: post.clone(),
    };
    for _ in 0..rounds {
        post = e_step(store, scorer, rules, Some(&post), e)?;
        let res = m_step(store, scorer, rules, &post, m)?;
        rules.set_weights(&res.weights);
        if enumerable {
            trace.elbo.push(elbo(store, scorer, rules, &post.q)?);
        }
        trace.weights.push(res.weights);
    }
    trace.posteriors = post;
    Ok(trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::varem::{ConstantScorer, TableScorer};

    fn hard_rule() -> (TripleStore, RuleSet) {
        let store = TripleStore::parse("a\tp\tb\t1\na\tq\tb\t?\n").unwrap();
        let rules = RuleSet::parse("5.0 q(x,y) <- p(x,y)", &store).unwrap();
        (store, rules)
    }

    #[test]
    fn joint_log_prob_half() {
        let store = TripleStore::parse("a\tr\tb\t1\nb\tr\tc\t0\na\tr\tc\t?\nc\tr\ta\t?\n").unwrap();
        let lp = joint_log_prob(&store, &ConstantScorer(0.5), &[true, false]).unwrap();
        assert!((lp - 4.0 * 0.5f64.ln()).abs() < 1e-12);
        assert!(matches!(
            joint_log_prob(&store, &ConstantScorer(1.0), &[true, false]),
            Err(VarEmError::ScoreOutOfRange { .. })
        ));
        let one = TripleStore::parse("a\tr\tb\t1\n").unwrap();
        assert!(joint_log_prob(&one, &ConstantScorer(1.0 - 1e-12), &[]).unwrap().abs() < 1e-11);
    }

    #[test]
    fn no_rules_posterior_is_score() {
        let store = TripleStore::parse("a\tr\tb\t1\na\tr\tc\t?\n").unwrap();
        let rules = RuleSet::empty(&store);
        let post = e_step(&store, &ConstantScorer(0.3), &rules, None, EStepOptions::default()).unwrap();
        assert!((post.q[0] - 0.3).abs() < 1e-15);
        assert!(post.converged);
    }

    #[test]
    fn hard_rule_raises_posterior() {
        let (store, rules) = hard_rule();
        let opts = EStepOptions {
            sweeps: 1,
            ..Default::default()
        };
        let post = e_step(&store, &ConstantScorer(0.5), &rules, None, opts).unwrap();
        assert!(post.q[0] > 0.5);
        assert!(!post.converged);
    }

    #[test]
    fn gradient_signs() {
        let (store, rules) = hard_rule();
        let f = vec![0.5, 1e-9];
        // Label/target 1 on the head, conditional probability near 0.
        let g = pl_gradient(&store, &f, &rules, &[-30.0], &[1.0 - 1e-12], Blanket::Expected);
        assert!((g[0] - 1.0).abs() < 1e-6, "{g:?}");
        // Targets equal to conditionals: zero gradient.
        let w = [0.7];
        let mut q = [0.5];
        for _ in 0..200 {
            q[0] = sigmoid(conditional_logit(1, &[0.5, 0.5], &rules, &w, &filled(&store, &q)));
        }
        let t = filled(&store, &q);
        let p0 = sigmoid(conditional_logit(0, &[0.5, 0.5], &rules, &w, &t));
        let g = pl_gradient(&store, &[0.5, 0.5], &rules, &w, &q, Blanket::Expected);
        // Only the observed body triple contributes, with (1 - p0) times its delta.
        let d0 = rules.groundings[0].flip_delta(0, &t);
        assert!((g[0] - (1.0 - p0) * d0).abs() < 1e-12);
    }

    #[test]
    fn elbo_without_hidden_is_evidence() {
        let store = TripleStore::parse("a\tp\tb\t1\na\tq\tb\t0\n").unwrap();
        let rules = RuleSet::parse("1.0 q(x,y) <- p(x,y)", &store).unwrap();
        let sc = TableScorer {
            table: Default::default(),
            default: 0.4,
        };
        let e = elbo(&store, &sc, &rules, &[]).unwrap();
        let ev = log_evidence(&store, &sc, &rules).unwrap();
        assert!((e - ev).abs() < 1e-12);
        let no_rules = RuleSet::empty(&store);
        let jl = joint_log_prob(&store, &sc, &[]).unwrap();
        assert!((elbo(&store, &sc, &no_rules, &[]).unwrap() - jl).abs() < 1e-12);
    }
}
