//! RandomRBF-style streams with scheduled concept drift and class imbalance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::StreamError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub center: Vec<f64>,
    pub class: usize,
    pub std_dev: f64,
    pub weight: f64,
}

/// One generating distribution: a weighted mixture of labelled Gaussian
/// clusters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Concept {
    pub centroids: Vec<Centroid>,
}

impl Concept {
    /// `n` centroids uniform in the unit cube; centroid `i` has class
    /// `i % classes`.
    pub fn random_rbf<R: Rng + ?Sized>(n: usize, dims: usize, classes: usize, rng: &mut R) -> Self {
        Self {
            centroids: (0..n)
                .map(|i| Centroid {
                    center: (0..dims).map(|_| rng.random_range(0.0..1.0)).collect(),
                    class: i % classes.max(1),
                    std_dev: rng.random_range(0.02..0.08),
                    weight: rng.random_range(0.5..1.0),
                })
                .collect(),
        }
    }

    /// Same clusters with every center moved by `offset`.
    pub fn shifted(&self, offset: &[f64]) -> Self {
        let mut c = self.clone();
        for cen in &mut c.centroids {
            for (x, o) in cen.center.iter_mut().zip(offset) {
                *x += o;
            }
        }
        c
    }

    /// Same clusters with labels mapped through `perm`.
    pub fn relabeled(&self, perm: &[usize]) -> Self {
        let mut c = self.clone();
        for cen in &mut c.centroids {
            cen.class = perm[cen.class];
        }
        c
    }

    pub fn dims(&self) -> usize {
        self.centroids.first().map_or(0, |c| c.center.len())
    }

    pub fn classes(&self) -> usize {
        self.centroids.iter().map(|c| c.class + 1).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DriftKind {
    /// Hard switch at `position`.
    Abrupt,
    /// Alternates between the new and previous concept every `width`
    /// samples from `position` on; must be the last drift.
    Repeating,
    /// Centers interpolate from the old to the new concept.
    Incremental,
    /// Each sample comes from the new concept with the blend probability.
    Gradual,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub kind: DriftKind,
    pub position: u64,
    pub width: u64,
    /// Index of the concept drifted to.
    pub to: usize,
}

impl Drift {
    /// Blend `p(t) = 1 / (1 + exp(-4 (t - t0) / w))`, clamped to 0 before
    /// `t0 - w/2` and to 1 from `t0 + w/2`.
    pub fn blend(&self, t: u64) -> f64 {
        let (t, t0, w) = (t as f64, self.position as f64, self.width as f64);
        if t < t0 - w / 2.0 {
            0.0
        } else if t >= t0 + w / 2.0 {
            1.0
        } else {
            1.0 / (1.0 + (-4.0 * (t - t0) / w).exp())
        }
    }

    fn window(&self) -> (f64, f64) {
        let half = self.width as f64 / 2.0;
        (self.position as f64 - half, self.position as f64 + half)
    }
}

/// From index `from` on, class 0 is drawn with probability `ratio`; the
/// remaining classes share the rest equally.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImbalanceStep {
    pub from: u64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamSpec {
    pub seed: u64,
    /// Concept 0 is active before the first drift.
    pub concepts: Vec<Concept>,
    #[serde(default)]
    pub drifts: Vec<Drift>,
    #[serde(default)]
    pub imbalance: Vec<ImbalanceStep>,
}

/// Sample counts at full size; [`StreamSpec::desk_preset`] divides them.
pub const FULL_STREAM_LENGTH: u64 = 450_000_000;
pub const FULL_IMBALANCE_SWITCH: u64 = 200_000;
pub const DEFAULT_SCALE: u64 = 1000;

impl StreamSpec {
    pub fn validate(&self) -> Result<(), StreamError> {
        let bad = |m: String| Err(StreamError::InvalidSpec(m));
        let Some(first) = self.concepts.first() else {
            return bad("at least one concept is required".into());
        };
        let dims = first.dims();
        for (i, c) in self.concepts.iter().enumerate() {
            if c.centroids.is_empty() || c.dims() != dims || dims == 0 {
                return bad(format!("concept {i} is empty or has mismatched dimensions"));
            }
            if c.centroids
                .iter()
                .any(|z| z.center.len() != dims || !(z.std_dev >= 0.0) || !(z.weight > 0.0))
            {
                return bad(format!("concept {i} has an invalid centroid"));
            }
        }
        let mut from = 0usize;
        for (i, d) in self.drifts.iter().enumerate() {
            if d.width < 1 {
                return bad(format!("drift {i} width must be at least 1"));
            }
            if d.to >= self.concepts.len() {
                return bad(format!("drift {i} targets missing concept {}", d.to));
            }
            if d.kind == DriftKind::Incremental
                && self.concepts[d.to].centroids.len() != self.concepts[from].centroids.len()
            {
                return bad(format!("incremental drift {i} needs matching centroid counts"));
            }
            if d.kind == DriftKind::Repeating && i + 1 != self.drifts.len() {
                return bad("a repeating drift must be the last one".into());
            }
            if let Some(prev) = i.checked_sub(1).map(|j| &self.drifts[j]) {
                if d.position <= prev.position {
                    return bad("drift positions must increase".into());
                }
                if d.window().0 < prev.window().1 {
                    return Err(StreamError::OverlappingDrifts {
                        first: i - 1,
                        second: i,
                    });
                }
            }
            from = d.to;
        }
        for (i, s) in self.imbalance.iter().enumerate() {
            if !(s.ratio > 0.0 && s.ratio < 1.0) {
                return bad(format!("imbalance ratio {} not in (0, 1)", s.ratio));
            }
            if i > 0 && s.from <= self.imbalance[i - 1].from {
                return bad("imbalance steps must increase".into());
            }
        }
        if !self.imbalance.is_empty() && self.concepts.iter().any(|c| c.classes() < 2) {
            return bad("an imbalance schedule needs at least two classes".into());
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("spec serializes");
        hex::encode(Sha256::digest(json))
    }

    /// Two-class stream of `FULL_STREAM_LENGTH / scale` samples with one
    /// drift of `kind` at the midpoint and an imbalance switch at
    /// `FULL_IMBALANCE_SWITCH / scale` (0.5 -> 0.2 for class 0).
    pub fn desk_preset(kind: DriftKind, scale: u64, seed: u64) -> Result<(Self, u64), StreamError> {
        if scale == 0 {
            return Err(StreamError::InvalidSpec("scale must be positive".into()));
        }
        let n = (FULL_STREAM_LENGTH / scale).max(2);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
        let a = Concept::random_rbf(10, 5, 2, &mut rng);
        let b = match kind {
            DriftKind::Incremental => a.shifted(&[0.3; 5]),
            _ => a.relabeled(&[1, 0]),
        };
        let width = match kind {
            DriftKind::Abrupt => 1,
            DriftKind::Repeating => (n / 10).max(1),
            _ => (n / 20).max(1),
        };
        let spec = Self {
            seed,
            concepts: vec![a, b],
            drifts: vec![Drift {
                kind,
                position: n / 2,
                width,
                to: 1,
            }],
            imbalance: vec![
                ImbalanceStep { from: 0, ratio: 0.5 },
                ImbalanceStep {
                    from: (FULL_IMBALANCE_SWITCH / scale).max(1),
                    ratio: 0.2,
                },
            ],
        };
        spec.validate()?;
        Ok((spec, n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamRecord {
    pub index: u64,
    pub x: Vec<f64>,
    pub label: usize,
    /// Concept the sample was drawn from (for incremental drift, the
    /// nearer endpoint).
    pub concept: usize,
}

enum Source<'a> {
    Plain(&'a Concept),
    Mixed(&'a Concept, &'a Concept, f64),
}

fn source_at<'a>(spec: &'a StreamSpec, t: u64, rng: &mut ChaCha8Rng) -> (Source<'a>, usize) {
    let c = |i: usize| &spec.concepts[i];
    let mut current = 0usize;
    for d in &spec.drifts {
        let (lo, _) = d.window();
        if (t as f64) < lo && d.kind != DriftKind::Repeating {
            break;
        }
        match d.kind {
            DriftKind::Abrupt => {
                if t >= d.position {
                    current = d.to;
                } else {
                    break;
                }
            }
            DriftKind::Gradual => {
                let p = d.blend(t);
                if p >= 1.0 {
                    current = d.to;
                } else {
                    let u: f64 = rng.random();
                    return if u < p {
                        (Source::Plain(c(d.to)), d.to)
                    } else {
                        (Source::Plain(c(current)), current)
                    };
                }
            }
            DriftKind::Incremental => {
                let p = d.blend(t);
                if p >= 1.0 {
                    current = d.to;
                } else {
                    let nearer = if p >= 0.5 { d.to } else { current };
                    return (Source::Mixed(c(current), c(d.to), p), nearer);
                }
            }
            DriftKind::Repeating => {
                if t >= d.position {
                    let phase = (t - d.position) / d.width;
                    if phase % 2 == 0 {
                        current = d.to;
                    }
                }
                break;
            }
        }
    }
    (Source::Plain(c(current)), current)
}

fn class_probability(spec: &StreamSpec, t: u64) -> Option<f64> {
    spec.imbalance
        .iter()
        .take_while(|s| s.from <= t)
        .last()
        .map(|s| s.ratio)
}

fn pick<'a, R: Rng + ?Sized>(cands: &[&'a Centroid], rng: &mut R) -> &'a Centroid {
    let total: f64 = cands.iter().map(|c| c.weight).sum();
    let mut u = rng.random_range(0.0..total);
    for c in cands {
        if u < c.weight {
            return c;
        }
        u -= c.weight;
    }
    cands[cands.len() - 1]
}

fn choose_centroid(concept: &Concept, class: Option<usize>, rng: &mut ChaCha8Rng) -> usize {
    let idx: Vec<usize> = (0..concept.centroids.len())
        .filter(|&i| class.is_none_or(|k| concept.centroids[i].class == k))
        .collect();
    let idx = if idx.is_empty() {
        (0..concept.centroids.len()).collect()
    } else {
        idx
    };
    let cands: Vec<&Centroid> = idx.iter().map(|&i| &concept.centroids[i]).collect();
    let chosen = pick(&cands, rng);
    idx[cands.iter().position(|c| std::ptr::eq(*c, chosen)).unwrap()]
}

/// Generates `n` records; identical specs give identical streams.
pub fn generate_stream(spec: &StreamSpec, n: u64) -> Result<Vec<StreamRecord>, StreamError> {
    spec.validate()?;
    if n == 0 {
        return Err(StreamError::InvalidSpec("stream length must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let std = Normal::new(0.0, 1.0).unwrap();
    let classes = spec.concepts.iter().map(Concept::classes).max().unwrap_or(1);
    let mut out = Vec::with_capacity(n as usize);
    for t in 0..n {
        let (source, concept) = source_at(spec, t, &mut rng);
        let class = class_probability(spec, t).map(|r| {
            if rng.random::<f64>() < r {
                0
            } else {
                1 + rng.random_range(0..classes - 1)
            }
        });
        let (center, sd, label) = match source {
            Source::Plain(c) => {
                let z = &c.centroids[choose_centroid(c, class, &mut rng)];
                (z.center.clone(), z.std_dev, z.class)
            }
            Source::Mixed(a, b, p) => {
                let i = choose_centroid(a, class, &mut rng);
                let (za, zb) = (&a.centroids[i], &b.centroids[i]);
                let center = za
                    .center
                    .iter()
                    .zip(&zb.center)
                    .map(|(x, y)| (1.0 - p) * x + p * y)
                    .collect();
                (
                    center,
                    (1.0 - p) * za.std_dev + p * zb.std_dev,
                    if p >= 0.5 { zb.class } else { za.class },
                )
            }
        };
        let x = center.iter().map(|c| c + sd * std.sample(&mut rng)).collect();
        out.push(StreamRecord {
            index: t,
            x,
            label,
            concept,
        });
    }
    Ok(out)
}

/// Manifest header (`# key=value` lines) followed by a comma-separated
/// table `index,x0..x{d-1},label,concept`.
pub fn write_stream(spec: &StreamSpec, records: &[StreamRecord]) -> String {
    use std::fmt::Write;
    let dims = spec.concepts.first().map_or(0, Concept::dims);
    let mut s = String::new();
    let _ = writeln!(s, "# seed={}", spec.seed);
    let _ = writeln!(s, "# spec_hash={}", spec.hash());
    let drifts: Vec<String> = spec
        .drifts
        .iter()
        .map(|d| {
            format!(
                "{}@{}/{}",
                serde_json::to_value(d.kind).unwrap().as_str().unwrap(),
                d.position,
                d.width
            )
        })
        .collect();
    let _ = writeln!(s, "# drifts={}", drifts.join(","));
    let _ = writeln!(s, "# records={}", records.len());
    let cols: Vec<String> = (0..dims).map(|i| format!("x{i}")).collect();
    let _ = writeln!(s, "index,{},label,concept", cols.join(","));
    for r in records {
        let xs: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
        let _ = writeln!(s, "{},{},{},{}", r.index, xs.join(","), r.label, r.concept);
    }
    s
}

/// Parses the table written by [`write_stream`]; manifest lines are skipped.
pub fn read_stream(text: &str) -> Result<Vec<StreamRecord>, StreamError> {
    let mut out = Vec::new();
    let mut header_seen = false;
    for (n, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let err = |m: String| StreamError::Parse { line: n + 1, msg: m };
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() < 4 {
            return Err(err("too few columns".into()));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|e| err(e.to_string()));
        let int = |s: &str| s.trim().parse::<u64>().map_err(|e| err(e.to_string()));
        out.push(StreamRecord {
            index: int(cols[0])?,
            x: cols[1..cols.len() - 2]
                .iter()
                .map(|s| num(s))
                .collect::<Result<_, _>>()?,
            label: int(cols[cols.len() - 2])? as usize,
            concept: int(cols[cols.len() - 1])? as usize,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn base(seed: u64) -> StreamSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        StreamSpec {
            seed,
            concepts: vec![Concept::random_rbf(6, 3, 2, &mut rng)],
            drifts: vec![],
            imbalance: vec![],
        }
    }

    #[test]
    fn blend_shape() {
        let d = Drift {
            kind: DriftKind::Gradual,
            position: 100,
            width: 20,
            to: 1,
        };
        assert_eq!(d.blend(89), 0.0);
        assert_eq!(d.blend(100), 0.5);
        assert_eq!(d.blend(110), 1.0);
        assert!(d.blend(95) < 0.5 && d.blend(105) > 0.5);
    }

    #[test]
    fn validation() {
        let mut s = base(1);
        s.concepts.push(s.concepts[0].relabeled(&[1, 0]));
        s.drifts = vec![
            Drift {
                kind: DriftKind::Gradual,
                position: 100,
                width: 40,
                to: 1,
            },
            Drift {
                kind: DriftKind::Gradual,
                position: 110,
                width: 40,
                to: 0,
            },
        ];
        assert!(matches!(
            s.validate(),
            Err(StreamError::OverlappingDrifts { first: 0, second: 1 })
        ));
        s.drifts[1].position = 200;
        assert!(s.validate().is_ok());
        s.drifts[0].width = 0;
        assert!(s.validate().is_err());
        s.drifts[0].width = 1;
        s.imbalance = vec![ImbalanceStep { from: 0, ratio: 1.0 }];
        assert!(s.validate().is_err());
    }

    #[test]
    fn round_trip_file() {
        let s = base(3);
        let recs = generate_stream(&s, 20).unwrap();
        let text = write_stream(&s, &recs);
        assert!(text.starts_with("# seed=3\n# spec_hash="));
        assert_eq!(read_stream(&text).unwrap(), recs);
    }

    #[test]
    fn repeating_alternates() {
        let mut s = base(4);
        s.concepts.push(s.concepts[0].shifted(&[5.0; 3]));
        s.drifts = vec![Drift {
            kind: DriftKind::Repeating,
            position: 10,
            width: 5,
            to: 1,
        }];
        let recs = generate_stream(&s, 30).unwrap();
        let concepts: Vec<usize> = recs.iter().map(|r| r.concept).collect();
        assert_eq!(&concepts[..10], &[0; 10]);
        assert_eq!(&concepts[10..15], &[1; 5]);
        assert_eq!(&concepts[15..20], &[0; 5]);
        assert_eq!(&concepts[20..25], &[1; 5]);
    }

    #[test]
    fn preset_scales() {
        let (spec, n) = StreamSpec::desk_preset(DriftKind::Abrupt, DEFAULT_SCALE, 7).unwrap();
        assert_eq!(n, 450_000);
        assert_eq!(spec.imbalance[1].from, 200);
        assert_eq!(spec.drifts[0].position, 225_000);
    }
}
