//! Propagation matrices built from a graph's triples.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::KnowledgeGraph;
use crate::linalg::{degree_normalize, Normalization, SparseMatrix};

pub const DEFAULT_CLAMP_FLOOR: f64 = 0.3;

/// Per-relation functionality (distinct heads / occurrences) and inverse
/// functionality (distinct tails / occurrences).
#[derive(Debug, Clone, PartialEq)]
pub struct RelationWeights {
    pub fun: Vec<f64>,
    pub ifun: Vec<f64>,
    /// Floor applied to both scores, if any.
    pub clamp_floor: Option<f64>,
}

impl RelationWeights {
    pub fn clamped(mut self, floor: f64) -> Self {
        for v in self.fun.iter_mut().chain(self.ifun.iter_mut()) {
            *v = v.max(floor);
        }
        self.clamp_floor = Some(floor);
        self
    }

    pub fn uniform(relation_count: usize, value: f64) -> Self {
        Self {
            fun: vec![value; relation_count],
            ifun: vec![value; relation_count],
            clamp_floor: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjacencyVariant {
    Functionality,
    Count,
}

impl fmt::Display for AdjacencyVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            AdjacencyVariant::Functionality => "functionality",
            AdjacencyVariant::Count => "count",
        })
    }
}

impl FromStr for AdjacencyVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "functionality" => Ok(Self::Functionality),
            "count" => Ok(Self::Count),
            other => Err(Error::Config(format!("unknown adjacency variant '{other}'"))),
        }
    }
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Normalization::Symmetric => "symmetric",
            Normalization::Row => "row",
        })
    }
}

impl FromStr for Normalization {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "symmetric" => Ok(Self::Symmetric),
            "row" => Ok(Self::Row),
            other => Err(Error::Config(format!("unknown normalization '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdjacencyConfig {
    pub variant: AdjacencyVariant,
    pub clamp: bool,
    pub clamp_floor: f64,
    pub normalization: Normalization,
    pub add_self_loops: bool,
}

impl Default for AdjacencyConfig {
    /// Count-based, row-normalized, with self-loops.
    fn default() -> Self {
        Self {
            variant: AdjacencyVariant::Count,
            clamp: true,
            clamp_floor: DEFAULT_CLAMP_FLOOR,
            normalization: Normalization::Row,
            add_self_loops: true,
        }
    }
}

impl AdjacencyConfig {
    /// Functionality-weighted adjacency with the 0.3 floor and symmetric normalization.
    pub fn functionality() -> Self {
        Self {
            variant: AdjacencyVariant::Functionality,
            normalization: Normalization::Symmetric,
            ..Self::default()
        }
    }
}

pub fn compute_functionality(g: &KnowledgeGraph) -> Result<RelationWeights> {
    let r = g.relation_count;
    let mut occurrences = vec![0usize; r];
    let mut heads: Vec<HashSet<usize>> = vec![HashSet::new(); r];
    let mut tails: Vec<HashSet<usize>> = vec![HashSet::new(); r];
    for t in &g.triples {
        if t.relation >= r {
            return Err(Error::Invalid(format!(
                "relation {} out of range ({r} relations)",
                t.relation
            )));
        }
        occurrences[t.relation] += 1;
        heads[t.relation].insert(t.head);
        tails[t.relation].insert(t.tail);
    }
    if let Some(rel) = occurrences.iter().position(|&c| c == 0) {
        return Err(Error::Invalid(format!(
            "relation {rel} occurs in no triple; functionality undefined"
        )));
    }
    let fun = heads
        .iter()
        .zip(&occurrences)
        .map(|(h, &c)| h.len() as f64 / c as f64)
        .collect();
    let ifun = tails
        .iter()
        .zip(&occurrences)
        .map(|(t, &c)| t.len() as f64 / c as f64)
        .collect();
    Ok(RelationWeights {
        fun,
        ifun,
        clamp_floor: None,
    })
}

/// `Â` before degree normalization.
pub fn unnormalized_adjacency(
    g: &KnowledgeGraph,
    cfg: &AdjacencyConfig,
    weights: Option<&RelationWeights>,
) -> Result<SparseMatrix> {
    let n = g.entity_count;
    let mut trip = Vec::with_capacity(2 * g.triples.len() + n);
    match cfg.variant {
        AdjacencyVariant::Count => {
            // A + Aᵀ of the directed triple counts
            for t in &g.triples {
                trip.push((t.head, t.tail, 1.0));
                trip.push((t.tail, t.head, 1.0));
            }
        }
        AdjacencyVariant::Functionality => {
            let computed;
            let w = match weights {
                Some(w) => w,
                None => {
                    let raw = compute_functionality(g)?;
                    computed = if cfg.clamp {
                        raw.clamped(cfg.clamp_floor)
                    } else {
                        raw
                    };
                    &computed
                }
            };
            if w.fun.len() < g.relation_count || w.ifun.len() < g.relation_count {
                return Err(Error::shape(
                    "unnormalized_adjacency",
                    format!("{} relation weights", g.relation_count),
                    w.fun.len().min(w.ifun.len()),
                ));
            }
            // forward edge weighted by ifun, reverse edge by fun
            for t in &g.triples {
                trip.push((t.head, t.tail, w.ifun[t.relation]));
                trip.push((t.tail, t.head, w.fun[t.relation]));
            }
        }
    }
    if cfg.add_self_loops {
        trip.extend((0..n).map(|i| (i, i, 1.0)));
    }
    SparseMatrix::from_triplets(n, n, trip)
}

/// Normalized propagation matrix for one graph.
pub fn build_adjacency(g: &KnowledgeGraph, cfg: &AdjacencyConfig) -> Result<SparseMatrix> {
    let a = unnormalized_adjacency(g, cfg, None)?;
    degree_normalize(&a, cfg.normalization)
}
