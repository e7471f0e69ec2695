//! Task-planning rates and classification metrics.

use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::StreamError;

/// One evaluated task: `output` is `None` when the model produced nothing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub input: String,
    pub output: Option<String>,
    pub gold: String,
}

impl TaskRecord {
    pub fn new(input: impl Into<String>, output: Option<&str>, gold: impl Into<String>) -> Self {
        Self {
            input: input.into(),
            output: output.map(str::to_owned),
            gold: gold.into(),
        }
    }

    fn completed(&self) -> bool {
        self.output.as_deref().is_some_and(|o| !o.is_empty())
    }

    fn succeeded(&self) -> bool {
        self.completed() && self.output.as_deref() == Some(self.gold.as_str())
    }
}

/// Task planning completion rate: fraction of non-empty outputs.
pub fn tpcr(records: &[TaskRecord]) -> Result<f64, StreamError> {
    if records.is_empty() {
        return Err(StreamError::Empty);
    }
    Ok(records.iter().filter(|r| r.completed()).count() as f64 / records.len() as f64)
}

/// Task planning success rate: fraction of outputs equal to the gold answer.
pub fn tpsr(records: &[TaskRecord]) -> Result<f64, StreamError> {
    if records.is_empty() {
        return Err(StreamError::Empty);
    }
    Ok(records.iter().filter(|r| r.succeeded()).count() as f64 / records.len() as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationMetrics {
    pub accuracy: f64,
    /// Mean of per-class recall over classes present in the gold labels.
    pub macro_recall: f64,
    /// `confusion[gold][predicted]`.
    pub confusion: Vec<Vec<u64>>,
}

pub fn classification_metrics(pairs: &[(usize, usize)]) -> Result<ClassificationMetrics, StreamError> {
    if pairs.is_empty() {
        return Err(StreamError::Empty);
    }
    let k = pairs.iter().map(|&(g, p)| g.max(p) + 1).max().unwrap_or(1);
    let mut confusion = vec![vec![0u64; k]; k];
    for &(g, p) in pairs {
        confusion[g][p] += 1;
    }
    let correct: u64 = (0..k).map(|i| confusion[i][i]).sum();
    let recalls: Vec<f64> = (0..k)
        .filter_map(|i| {
            let row: u64 = confusion[i].iter().sum();
            (row > 0).then(|| confusion[i][i] as f64 / row as f64)
        })
        .collect();
    Ok(ClassificationMetrics {
        accuracy: correct as f64 / pairs.len() as f64,
        macro_recall: recalls.iter().sum::<f64>() / recalls.len() as f64,
        confusion,
    })
}

/// Accumulates task records together with per-task latency.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricSuite {
    pub records: Vec<TaskRecord>,
    pub completed: u64,
    pub succeeded: u64,
    pub elapsed: Duration,
}

impl MetricSuite {
    pub fn push(&mut self, record: TaskRecord, elapsed: Duration) {
        self.completed += record.completed() as u64;
        self.succeeded += record.succeeded() as u64;
        self.elapsed += elapsed;
        self.records.push(record);
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn tpcr(&self) -> Result<f64, StreamError> {
        tpcr(&self.records)
    }

    pub fn tpsr(&self) -> Result<f64, StreamError> {
        tpsr(&self.records)
    }

    /// Exact-match accuracy with outputs and golds taken as labels.
    pub fn accuracy(&self) -> Result<f64, StreamError> {
        self.tpsr()
    }

    pub fn mean_latency(&self) -> Option<Duration> {
        (!self.is_empty()).then(|| self.elapsed / self.records.len() as u32)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rates_edges() {
        let empty: Vec<TaskRecord> = (0..4).map(|i| TaskRecord::new(i.to_string(), None, "a")).collect();
        assert_eq!(tpcr(&empty).unwrap(), 0.0);
        assert_eq!(tpsr(&empty).unwrap(), 0.0);
        let exact: Vec<TaskRecord> = (0..4).map(|i| TaskRecord::new(i.to_string(), Some("a"), "a")).collect();
        assert_eq!(tpcr(&exact).unwrap(), 1.0);
        assert_eq!(tpsr(&exact).unwrap(), 1.0);
        let disjoint: Vec<TaskRecord> = (0..4).map(|i| TaskRecord::new(i.to_string(), Some("b"), "a")).collect();
        assert_eq!(tpsr(&disjoint).unwrap(), 0.0);
        assert!(tpcr(&[]).is_err());
    }

    #[test]
    fn constant_predictor_on_balanced_binary() {
        let pairs: Vec<(usize, usize)> = (0..100).map(|i| (i % 2, 0)).collect();
        let m = classification_metrics(&pairs).unwrap();
        assert_eq!(m.accuracy, 0.5);
        assert_eq!(m.macro_recall, 0.5);
    }

    #[test]
    fn suite_counters_track_records() {
        let mut s = MetricSuite::default();
        s.push(TaskRecord::new("x", Some("a"), "a"), Duration::from_millis(2));
        s.push(TaskRecord::new("y", Some(""), "a"), Duration::from_millis(4));
        s.push(TaskRecord::new("z", Some("b"), "a"), Duration::from_millis(6));
        assert_eq!((s.completed, s.succeeded, s.len()), (2, 1, 3));
        assert_eq!(s.mean_latency(), Some(Duration::from_millis(4)));
    }
}
