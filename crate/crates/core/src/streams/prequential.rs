//! Test-then-train evaluation over labelled streams.

use serde::{Deserialize, Serialize};

use super::{StreamError, StreamRecord};

pub trait StreamModel {
    fn predict(&self, x: &[f64]) -> usize;
    fn learn(&mut self, x: &[f64], label: usize);
}

/// Predicts one class regardless of input and never learns.
#[derive(Debug, Clone, Copy)]
pub struct ConstantModel(pub usize);

impl StreamModel for ConstantModel {
    fn predict(&self, _: &[f64]) -> usize {
        self.0
    }

    fn learn(&mut self, _: &[f64], _: usize) {}
}

/// Incremental nearest class mean. With `frozen`, learning stops after
/// `warmup` samples.
#[derive(Debug, Clone, Default)]
pub struct NearestCentroid {
    sums: Vec<Vec<f64>>,
    counts: Vec<u64>,
    seen: u64,
    pub warmup: Option<u64>,
}

impl NearestCentroid {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn frozen_after(warmup: u64) -> Self {
        Self {
            warmup: Some(warmup),
            ..Self::default()
        }
    }
}

impl StreamModel for NearestCentroid {
    fn predict(&self, x: &[f64]) -> usize {
        let mut best = (f64::INFINITY, 0);
        for (k, (s, &n)) in self.sums.iter().zip(&self.counts).enumerate() {
            if n == 0 {
                continue;
            }
            let d: f64 = s.iter().zip(x).map(|(a, b)| (a / n as f64 - b).powi(2)).sum();
            if d < best.0 {
                best = (d, k);
            }
        }
        best.1
    }

    fn learn(&mut self, x: &[f64], label: usize) {
        if self.warmup.is_some_and(|w| self.seen >= w) {
            return;
        }
        self.seen += 1;
        if self.sums.len() <= label {
            self.sums.resize(label + 1, vec![0.0; x.len()]);
            self.counts.resize(label + 1, 0);
        }
        for (s, v) in self.sums[label].iter_mut().zip(x) {
            *s += v;
        }
        self.counts[label] += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub window: usize,
    pub start: u64,
    pub end: u64,
    pub accuracy: f64,
    pub macro_recall: f64,
    /// Exact-match rate; equals accuracy for single-label predictions.
    pub tpsr: f64,
}

/// Prequential curve with one row per `window` samples (the last may be
/// shorter), so `ceil(n / window)` rows.
pub fn drift_eval_curve<M: StreamModel + ?Sized>(
    model: &mut M,
    stream: &[StreamRecord],
    window: usize,
) -> Result<Vec<CurveRow>, StreamError> {
    if window == 0 {
        return Err(StreamError::InvalidSpec("window must be positive".into()));
    }
    if stream.is_empty() {
        return Err(StreamError::Empty);
    }
    let mut rows = Vec::with_capacity(stream.len().div_ceil(window));
    for (w, chunk) in stream.chunks(window).enumerate() {
        let mut pairs = Vec::with_capacity(chunk.len());
        for r in chunk {
            pairs.push((r.label, model.predict(&r.x)));
            model.learn(&r.x, r.label);
        }
        let m = super::classification_metrics(&pairs)?;
        rows.push(CurveRow {
            window: w,
            start: chunk[0].index,
            end: chunk[chunk.len() - 1].index + 1,
            accuracy: m.accuracy,
            macro_recall: m.macro_recall,
            tpsr: m.accuracy,
        });
    }
    Ok(rows)
}

pub fn format_curve(rows: &[CurveRow]) -> String {
    let mut s = String::from("window,start,end,accuracy,macro_recall,tpsr\n");
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{:.6},{:.6},{:.6}\n",
            r.window, r.start, r.end, r.accuracy, r.macro_recall, r.tpsr
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Oracle;

    impl StreamModel for Oracle {
        fn predict(&self, x: &[f64]) -> usize {
            x[0] as usize
        }
        fn learn(&mut self, _: &[f64], _: usize) {}
    }

    fn labelled(n: u64) -> Vec<StreamRecord> {
        (0..n)
            .map(|i| StreamRecord {
                index: i,
                x: vec![(i % 3) as f64],
                label: (i % 3) as usize,
                concept: 0,
            })
            .collect()
    }

    #[test]
    fn oracle_is_flat_at_one() {
        let rows = drift_eval_curve(&mut Oracle, &labelled(95), 10).unwrap();
        assert_eq!(rows.len(), 10);
        assert!(rows.iter().all(|r| r.accuracy == 1.0 && r.tpsr == 1.0));
        assert_eq!(rows[9].end - rows[9].start, 5);
    }

    #[test]
    fn table_has_one_line_per_window() {
        let rows = drift_eval_curve(&mut ConstantModel(0), &labelled(30), 7).unwrap();
        assert_eq!(format_curve(&rows).lines().count(), 1 + 5);
    }
}
