//! Benchmark task definitions and their walk-start expansions.

use std::collections::HashMap;

use serde::Serialize;

use grasorw_core::transition::{Node2vecParams, Termination};

use crate::engine::WalkModel;
use crate::error::{Error, Result};
use crate::sink::TrajectorySink;

#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    /// Walk generation with the second-order model: a fixed number of
    /// fixed-length walks from every non-isolated vertex.
    Rwnv {
        walks_per_vertex: u64,
        length: u32,
        p: f64,
        q: f64,
    },
    /// PageRank queries with the second-order model: restart-style walks
    /// from each query node.
    Prnv {
        query_nodes: Vec<u64>,
        decay: f64,
        max_length: u32,
        samples_per_query: u64,
        p: f64,
        q: f64,
    },
    /// First-order walk generation.
    DeepWalkGen { walks_per_vertex: u64, length: u32 },
}

impl TaskSpec {
    pub fn rwnv_default(p: f64, q: f64) -> TaskSpec {
        TaskSpec::Rwnv {
            walks_per_vertex: 10,
            length: 80,
            p,
            q,
        }
    }

    pub fn model(&self) -> Result<WalkModel> {
        Ok(match self {
            TaskSpec::Rwnv { p, q, .. } | TaskSpec::Prnv { p, q, .. } => {
                WalkModel::Node2vec(Node2vecParams::new(*p, *q)?)
            }
            TaskSpec::DeepWalkGen { .. } => WalkModel::DeepWalk,
        })
    }

    pub fn termination(&self) -> Termination {
        match self {
            TaskSpec::Rwnv { length, .. } | TaskSpec::DeepWalkGen { length, .. } => {
                Termination::FixedLength { length: *length }
            }
            TaskSpec::Prnv {
                decay, max_length, ..
            } => Termination::GeometricCapped {
                continue_prob: *decay,
                max_length: *max_length,
            },
        }
    }

    /// Expands the task into engine starts. Walk-generation tasks start
    /// from every vertex with at least one neighbor.
    pub fn starts(&self, degrees: &[u64]) -> Result<Vec<(u64, u64)>> {
        match self {
            TaskSpec::Rwnv {
                walks_per_vertex, ..
            }
            | TaskSpec::DeepWalkGen {
                walks_per_vertex, ..
            } => Ok(degrees
                .iter()
                .enumerate()
                .filter(|&(_, &d)| d > 0)
                .map(|(v, _)| (v as u64, *walks_per_vertex))
                .collect()),
            TaskSpec::Prnv {
                query_nodes,
                samples_per_query,
                ..
            } => {
                if query_nodes.is_empty() {
                    return Err(Error::Config("no query nodes given".into()));
                }
                Ok(query_nodes
                    .iter()
                    .map(|&v| (v, *samples_per_query))
                    .collect())
            }
        }
    }

    pub fn is_ppr(&self) -> bool {
        matches!(self, TaskSpec::Prnv { .. })
    }
}

/// Walk-endpoint counts estimating a PageRank vector.
#[derive(Debug, Clone, Serialize)]
pub struct PprEstimate {
    pub query: u64,
    pub visit_counts: HashMap<u64, u64>,
    pub total_samples: u64,
}

impl PprEstimate {
    /// Vertices by descending count (ascending ID on ties).
    pub fn ranked(&self) -> Vec<(u64, u64)> {
        let mut v: Vec<(u64, u64)> = self.visit_counts.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }
}

/// Accumulates walk endpoints per query source.
#[derive(Debug, Default)]
pub struct PprSink {
    per_query: HashMap<u64, HashMap<u64, u64>>,
    totals: HashMap<u64, u64>,
}

impl PprSink {
    pub fn new() -> PprSink {
        PprSink::default()
    }

    pub fn estimates(&self) -> Vec<PprEstimate> {
        let mut queries: Vec<u64> = self.per_query.keys().copied().collect();
        queries.sort_unstable();
        queries
            .into_iter()
            .map(|q| PprEstimate {
                query: q,
                visit_counts: self.per_query[&q].clone(),
                total_samples: self.totals[&q],
            })
            .collect()
    }
}

impl TrajectorySink for PprSink {
    fn wants_trajectories(&self) -> bool {
        false
    }

    fn walk_finished(&mut self, source: u64, last_vertex: u64, _hop: u32, _: Option<&[u64]>) {
        *self
            .per_query
            .entry(source)
            .or_default()
            .entry(last_vertex)
            .or_insert(0) += 1;
        *self.totals.entry(source).or_insert(0) += 1;
    }
}

/// Top-`k` rows of a PPR estimate as JSON-ready records.
#[derive(Debug, Serialize)]
pub struct PprReport {
    pub query: u64,
    pub total_samples: u64,
    pub top: Vec<(u64, u64)>,
}

pub fn ppr_reports(estimates: &[PprEstimate], top_k: usize) -> Vec<PprReport> {
    estimates
        .iter()
        .map(|e| PprReport {
            query: e.query,
            total_samples: e.total_samples,
            top: e.ranked().into_iter().take(top_k).collect(),
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rwnv_starts_skip_isolated_vertices() {
        let task = TaskSpec::rwnv_default(1.0, 1.0);
        let starts = task.starts(&[2, 0, 3, 1]).unwrap();
        assert_eq!(starts, vec![(0, 10), (2, 10), (3, 10)]);
    }

    #[test]
    fn ppr_sink_conserves_samples() {
        let mut sink = PprSink::new();
        for _ in 0..5 {
            sink.walk_finished(3, 7, 2, None);
        }
        sink.walk_finished(3, 3, 0, None);
        let est = sink.estimates();
        assert_eq!(est.len(), 1);
        assert_eq!(est[0].total_samples, 6);
        assert_eq!(est[0].visit_counts.values().sum::<u64>(), 6);
        assert_eq!(est[0].ranked()[0], (7, 5));
    }
}
