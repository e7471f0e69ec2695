use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::VarEmError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self { head, relation, tail }
    }
}

/// Observed triples with 0/1 labels plus hidden candidate triples.
///
/// Every triple is one binary variable. Observed triples take variable ids
/// `0..observed_count()`, hidden ones follow.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TripleStore {
    entities: Vec<String>,
    relations: Vec<String>,
    entity_ids: HashMap<String, usize>,
    relation_ids: HashMap<String, usize>,
    observed: Vec<Triple>,
    labels: Vec<bool>,
    hidden: Vec<Triple>,
    index: HashMap<Triple, usize>,
}

impl TripleStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn entity(&mut self, name: &str) -> usize {
        intern(&mut self.entities, &mut self.entity_ids, name)
    }

    pub fn relation(&mut self, name: &str) -> usize {
        intern(&mut self.relations, &mut self.relation_ids, name)
    }

    pub fn entity_id(&self, name: &str) -> Option<usize> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<usize> {
        self.relation_ids.get(name).copied()
    }

    pub fn entities(&self) -> &[String] {
        &self.entities
    }

    pub fn relations(&self) -> &[String] {
        &self.relations
    }

    fn check(&self, t: Triple) -> Result<(), VarEmError> {
        if t.head >= self.entities.len() || t.tail >= self.entities.len() || t.relation >= self.relations.len() {
            return Err(VarEmError::UnknownId(format!("{t:?}")));
        }
        if self.index.contains_key(&t) {
            return Err(VarEmError::Duplicate(format!("{t:?}")));
        }
        Ok(())
    }

    /// Observed triples must all be added before any hidden one.
    pub fn add_observed(&mut self, t: Triple, label: bool) -> Result<usize, VarEmError> {
        self.check(t)?;
        if !self.hidden.is_empty() {
            return Err(VarEmError::InvalidArgument(
                "observed triples must precede hidden ones".into(),
            ));
        }
        let id = self.observed.len();
        self.observed.push(t);
        self.labels.push(label);
        self.index.insert(t, id);
        Ok(id)
    }

    pub fn add_hidden(&mut self, t: Triple) -> Result<usize, VarEmError> {
        self.check(t)?;
        let id = self.observed.len() + self.hidden.len();
        self.hidden.push(t);
        self.index.insert(t, id);
        Ok(id)
    }

    pub fn observed_count(&self) -> usize {
        self.observed.len()
    }

    pub fn hidden_count(&self) -> usize {
        self.hidden.len()
    }

    pub fn variable_count(&self) -> usize {
        self.observed.len() + self.hidden.len()
    }

    pub fn variable(&self, t: &Triple) -> Option<usize> {
        self.index.get(t).copied()
    }

    pub fn triple(&self, var: usize) -> Triple {
        if var < self.observed.len() {
            self.observed[var]
        } else {
            self.hidden[var - self.observed.len()]
        }
    }

    pub fn labels(&self) -> &[bool] {
        &self.labels
    }

    pub fn triples(&self) -> impl Iterator<Item = Triple> + '_ {
        self.observed.iter().chain(&self.hidden).copied()
    }

    /// Parses `head<TAB>relation<TAB>tail<TAB>label` lines. A label of `1`
    /// or `0` marks an observed triple, `?` a hidden candidate. Blank lines
    /// and `#` comments are skipped.
    pub fn parse(text: &str) -> Result<Self, VarEmError> {
        let mut store = Self::new();
        let mut hidden = Vec::new();
        for (n, line) in text.lines().enumerate() {
            let line = line.trim_end_matches('\r');
            if line.trim().is_empty() || line.trim_start().starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split('\t').map(str::trim).collect();
            if cols.len() != 4 {
                return Err(VarEmError::Parse {
                    line: n + 1,
                    msg: format!("expected 4 tab-separated fields, got {}", cols.len()),
                });
            }
            let t = Triple::new(store.entity(cols[0]), store.relation(cols[1]), store.entity(cols[2]));
            match cols[3] {
                "1" => store.add_observed(t, true).map(drop),
                "0" => store.add_observed(t, false).map(drop),
                "?" => {
                    hidden.push((n + 1, t));
                    Ok(())
                }
                other => Err(VarEmError::Parse {
                    line: n + 1,
                    msg: format!("label must be 0, 1 or ?, got {other:?}"),
                }),
            }
            .map_err(|e| match e {
                VarEmError::Parse { .. } => e,
                other => VarEmError::Parse {
                    line: n + 1,
                    msg: other.to_string(),
                },
            })?;
        }
        for (line, t) in hidden {
            store.add_hidden(t).map_err(|e| VarEmError::Parse {
                line,
                msg: e.to_string(),
            })?;
        }
        Ok(store)
    }
}

fn intern(names: &mut Vec<String>, ids: &mut HashMap<String, usize>, name: &str) -> usize {
    if let Some(&id) = ids.get(name) {
        return id;
    }
    names.push(name.to_string());
    ids.insert(name.to_string(), names.len() - 1);
    names.len() - 1
}
