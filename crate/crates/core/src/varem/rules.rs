//! Weighted Horn clauses and their groundings.
//!
//! Rule files hold one clause per line, weight first:
//!
//! ```text
//! # weight head <- body...
//! 1.5 supplies(x,z) <- supplies(x,y) supplies(y,z)
//! 0.8 buys(y,x) <- sells(x,y)
//! ```
//!
//! Bodies have one or two atoms; every head variable must occur in the body.

use std::collections::HashMap;

use super::store::{Triple, TripleStore};
use super::VarEmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub relation: usize,
    /// Indices into [`Rule::vars`].
    pub args: [usize; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct Rule {
    pub weight: f64,
    pub head: Atom,
    pub body: Vec<Atom>,
    pub vars: Vec<String>,
}

/// One rule instantiation. `body` is sorted and deduplicated, and never
/// contains `head`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Grounding {
    pub rule: usize,
    pub head: usize,
    pub body: Vec<usize>,
}

impl Grounding {
    /// Clause truth value `1 - Π body · (1 - head)` on (possibly fractional)
    /// assignments.
    pub fn value(&self, v: &[f64]) -> f64 {
        1.0 - self.body.iter().map(|&b| v[b]).product::<f64>() * (1.0 - v[self.head])
    }

    /// `φ(v_i = 1) - φ(v_i = 0)` with the rest of `v` held fixed.
    pub fn flip_delta(&self, var: usize, v: &[f64]) -> f64 {
        if var == self.head {
            self.body.iter().map(|&b| v[b]).product()
        } else {
            -self.body.iter().filter(|&&b| b != var).map(|&b| v[b]).product::<f64>() * (1.0 - v[self.head])
        }
    }

    pub fn touches(&self, var: usize) -> bool {
        self.head == var || self.body.contains(&var)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub groundings: Vec<Grounding>,
    /// Grounding ids touching each variable.
    touching: Vec<Vec<usize>>,
}

impl RuleSet {
    pub fn empty(store: &TripleStore) -> Self {
        Self {
            rules: Vec::new(),
            groundings: Vec::new(),
            touching: vec![Vec::new(); store.variable_count()],
        }
    }

    /// Grounds every rule against the triples of `store`. A grounding is
    /// kept only when all its atoms are triples of the store.
    pub fn ground(rules: Vec<Rule>, store: &TripleStore) -> Self {
        let mut by_rel: HashMap<usize, Vec<Triple>> = HashMap::new();
        for t in store.triples() {
            by_rel.entry(t.relation).or_default().push(t);
        }
        let mut groundings = Vec::new();
        for (ri, rule) in rules.iter().enumerate() {
            let mut bind = vec![None; rule.vars.len()];
            let mut found = Vec::new();
            match_body(rule, 0, &by_rel, &mut bind, &mut Vec::new(), &mut found);
            for (bind, body) in found {
                let head = Triple::new(
                    bind[rule.head.args[0]].unwrap(),
                    rule.head.relation,
                    bind[rule.head.args[1]].unwrap(),
                );
                let Some(head) = store.variable(&head) else { continue };
                let mut body: Vec<usize> = body.iter().map(|t| store.variable(t).unwrap()).collect();
                body.sort_unstable();
                body.dedup();
                if body.contains(&head) {
                    continue;
                }
                groundings.push(Grounding { rule: ri, head, body });
            }
        }
        groundings.sort_by(|a, b| (a.rule, a.head, &a.body).cmp(&(b.rule, b.head, &b.body)));
        groundings.dedup();
        let mut touching = vec![Vec::new(); store.variable_count()];
        for (gi, g) in groundings.iter().enumerate() {
            touching[g.head].push(gi);
            for &b in &g.body {
                touching[b].push(gi);
            }
        }
        Self {
            rules,
            groundings,
            touching,
        }
    }

    pub fn parse(text: &str, store: &TripleStore) -> Result<Self, VarEmError> {
        let mut rules = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            rules.push(parse_rule(line, store).map_err(|msg| VarEmError::Parse { line: n + 1, msg })?);
        }
        Ok(Self::ground(rules, store))
    }

    pub fn weights(&self) -> Vec<f64> {
        self.rules.iter().map(|r| r.weight).collect()
    }

    pub fn set_weights(&mut self, w: &[f64]) {
        for (r, &w) in self.rules.iter_mut().zip(w) {
            r.weight = w;
        }
    }

    pub fn touching(&self, var: usize) -> &[usize] {
        &self.touching[var]
    }

    /// Variables sharing a grounding with `var`.
    pub fn markov_blanket(&self, var: usize) -> Vec<usize> {
        let mut mb: Vec<usize> = self.touching[var]
            .iter()
            .flat_map(|&g| std::iter::once(self.groundings[g].head).chain(self.groundings[g].body.iter().copied()))
            .filter(|&u| u != var)
            .collect();
        mb.sort_unstable();
        mb.dedup();
        mb
    }
}

fn match_body(
    rule: &Rule,
    at: usize,
    by_rel: &HashMap<usize, Vec<Triple>>,
    bind: &mut Vec<Option<usize>>,
    chosen: &mut Vec<Triple>,
    out: &mut Vec<(Vec<Option<usize>>, Vec<Triple>)>,
) {
    if at == rule.body.len() {
        out.push((bind.clone(), chosen.clone()));
        return;
    }
    let atom = rule.body[at];
    let Some(cands) = by_rel.get(&atom.relation) else {
        return;
    };
    for t in cands {
        let saved = bind.clone();
        if unify(bind, atom.args[0], t.head) && unify(bind, atom.args[1], t.tail) {
            chosen.push(*t);
            match_body(rule, at + 1, by_rel, bind, chosen, out);
            chosen.pop();
        }
        *bind = saved;
    }
}

fn unify(bind: &mut [Option<usize>], var: usize, ent: usize) -> bool {
    match bind[var] {
        Some(e) => e == ent,
        None => {
            bind[var] = Some(ent);
            true
        }
    }
}

fn parse_rule(line: &str, store: &TripleStore) -> Result<Rule, String> {
    let (lhs, rhs) = line.split_once("<-").ok_or("missing '<-'")?;
    let mut lhs = lhs.split_whitespace();
    let weight: f64 = lhs
        .next()
        .ok_or("missing weight")?
        .parse()
        .map_err(|e| format!("bad weight: {e}"))?;
    if !weight.is_finite() {
        return Err("weight must be finite".into());
    }
    let head_src = lhs.next().ok_or("missing head atom")?;
    if lhs.next().is_some() {
        return Err("head must be a single atom".into());
    }
    let mut vars = Vec::new();
    let head = parse_atom(head_src, store, &mut vars)?;
    let body: Vec<Atom> = rhs
        .split_whitespace()
        .map(|a| parse_atom(a, store, &mut vars))
        .collect::<Result<_, _>>()?;
    if body.is_empty() || body.len() > 2 {
        return Err(format!("body must have 1 or 2 atoms, got {}", body.len()));
    }
    for v in head.args {
        if !body.iter().any(|a| a.args.contains(&v)) {
            return Err(format!("head variable {} does not occur in the body", vars[v]));
        }
    }
    Ok(Rule {
        weight,
        head,
        body,
        vars,
    })
}

fn parse_atom(src: &str, store: &TripleStore, vars: &mut Vec<String>) -> Result<Atom, String> {
    let (rel, rest) = src.split_once('(').ok_or_else(|| format!("bad atom {src:?}"))?;
    let args = rest.strip_suffix(')').ok_or_else(|| format!("bad atom {src:?}"))?;
    let (a, b) = args
        .split_once(',')
        .ok_or_else(|| format!("atom {src:?} needs two arguments"))?;
    let relation = store
        .relation_id(rel)
        .ok_or_else(|| format!("unknown relation {rel:?}"))?;
    let mut var = |name: &str| {
        let name = name.trim();
        match vars.iter().position(|v| v == name) {
            Some(i) => i,
            None => {
                vars.push(name.to_string());
                vars.len() - 1
            }
        }
    };
    Ok(Atom {
        relation,
        args: [var(a), var(b)],
    })
}
