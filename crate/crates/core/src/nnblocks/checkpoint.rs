//! Flat binary tensor container with a text manifest.
//!
//! `<stem>.bin` holds every tensor as consecutive little-endian `f64`;
//! `<stem>.manifest` holds one `name<TAB>shape<TAB>offset` line per tensor,
//! where shape is `x`-separated dimensions and offset counts `f64` elements.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::params::{flatten, unflatten, ParamTree};
use super::NnError;

const MANIFEST_HEADER: &str = "# tensors v1";

#[derive(Debug, Clone, PartialEq)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    pub entries: Vec<TensorEntry>,
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("bin"), stem.with_extension("manifest"))
}

impl Checkpoint {
    pub fn insert(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) {
        assert_eq!(shape.iter().product::<usize>(), data.len(), "tensor shape");
        self.entries.push(TensorEntry {
            name: name.into(),
            shape,
            data,
        });
    }

    pub fn insert_tree<P: ParamTree<f64>>(&mut self, name: impl Into<String>, params: &P) {
        let flat = flatten(params);
        self.insert(name, vec![flat.len()], flat);
    }

    pub fn get(&self, name: &str) -> Option<&TensorEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    /// Rebuilds a parameter tree with `template`'s layout from entry `name`.
    pub fn load_tree<P: ParamTree<f64>>(&self, name: &str, template: &P) -> Result<P::Of<f64>, NnError> {
        let e = self
            .get(name)
            .ok_or_else(|| NnError::Checkpoint(format!("missing tensor {name}")))?;
        if e.data.len() != flatten(template).len() {
            return Err(NnError::Checkpoint(format!("tensor {name} has wrong length")));
        }
        Ok(unflatten(template, &e.data))
    }

    pub fn write(&self, stem: &Path) -> Result<(), NnError> {
        let (bin, manifest) = paths(stem);
        let mut bytes = Vec::new();
        let mut text = String::from(MANIFEST_HEADER);
        text.push('\n');
        let mut offset = 0usize;
        for e in &self.entries {
            if e.name.contains(['\t', '\n']) {
                return Err(NnError::Checkpoint(format!("invalid tensor name {:?}", e.name)));
            }
            let shape: Vec<String> = e.shape.iter().map(usize::to_string).collect();
            writeln!(text, "{}\t{}\t{}", e.name, shape.join("x"), offset).unwrap();
            for v in &e.data {
                bytes.extend_from_slice(&v.to_le_bytes());
            }
            offset += e.data.len();
        }
        std::fs::write(&bin, bytes).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        std::fs::write(&manifest, text).map_err(|e| NnError::Checkpoint(e.to_string()))
    }

    pub fn read(stem: &Path) -> Result<Self, NnError> {
        let (bin, manifest) = paths(stem);
        let bytes = std::fs::read(&bin).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        let text = std::fs::read_to_string(&manifest).map_err(|e| NnError::Checkpoint(e.to_string()))?;
        if bytes.len() % 8 != 0 {
            return Err(NnError::Checkpoint("binary length is not a multiple of 8".into()));
        }
        let values: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let mut lines = text.lines();
        if lines.next() != Some(MANIFEST_HEADER) {
            return Err(NnError::Checkpoint("bad manifest header".into()));
        }
        let mut entries = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let parts: Vec<&str> = line.split('\t').collect();
            let bad = || NnError::Checkpoint(format!("bad manifest line {line:?}"));
            if parts.len() != 3 {
                return Err(bad());
            }
            let shape: Vec<usize> = if parts[1].is_empty() {
                Vec::new()
            } else {
                parts[1]
                    .split('x')
                    .map(|d| d.parse().map_err(|_| bad()))
                    .collect::<Result<_, _>>()?
            };
            let offset: usize = parts[2].parse().map_err(|_| bad())?;
            let len: usize = shape.iter().product();
            let data = values.get(offset..offset + len).ok_or_else(bad)?.to_vec();
            entries.push(TensorEntry {
                name: parts[0].to_string(),
                shape,
                data,
            });
        }
        Ok(Self { entries })
    }
}
