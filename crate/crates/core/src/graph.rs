//! Immutable data model for a pair of knowledge graphs and their alignment.

use std::collections::{BTreeMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::linalg::DenseMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: usize,
    pub relation: usize,
    pub tail: usize,
}

impl Triple {
    pub fn new(head: usize, relation: usize, tail: usize) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }
}

/// One side of the alignment problem. Entities and relations are dense indices;
/// original identifiers survive only as labels.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KnowledgeGraph {
    pub entity_count: usize,
    pub relation_count: usize,
    /// Multigraph: duplicates are kept in load order.
    pub triples: Vec<Triple>,
    pub entity_labels: Option<BTreeMap<usize, String>>,
    pub relation_labels: Option<BTreeMap<usize, String>>,
}

impl KnowledgeGraph {
    pub fn new(entity_count: usize, relation_count: usize, triples: Vec<Triple>) -> Self {
        Self {
            entity_count,
            relation_count,
            triples,
            entity_labels: None,
            relation_labels: None,
        }
    }

    pub fn entity_label(&self, index: usize) -> Option<&str> {
        self.entity_labels
            .as_ref()
            .and_then(|m| m.get(&index))
            .map(String::as_str)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    Train,
    Validation,
    Test,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Train => "train",
            Role::Validation => "validation",
            Role::Test => "test",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AlignedPair {
    pub left: usize,
    pub right: usize,
    pub role: Role,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AlignmentSet {
    pub pairs: Vec<AlignedPair>,
}

impl AlignmentSet {
    pub fn new(pairs: Vec<AlignedPair>) -> Self {
        Self { pairs }
    }

    /// All pairs with the same role.
    pub fn from_pairs(pairs: impl IntoIterator<Item = (usize, usize)>, role: Role) -> Self {
        Self {
            pairs: pairs
                .into_iter()
                .map(|(left, right)| AlignedPair { left, right, role })
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn with_role(&self, role: Role) -> Vec<(usize, usize)> {
        self.pairs
            .iter()
            .filter(|p| p.role == role)
            .map(|p| (p.left, p.right))
            .collect()
    }

    pub fn count(&self, role: Role) -> usize {
        self.pairs.iter().filter(|p| p.role == role).count()
    }
}

/// Per-entity attribute features, one row per entity.
#[derive(Debug, Clone, PartialEq)]
pub struct AttributeTable {
    pub features: DenseMatrix,
    /// Column names (attribute predicates), if known.
    pub columns: Vec<String>,
}

impl AttributeTable {
    pub fn entity_count(&self) -> usize {
        self.features.n_rows()
    }

    pub fn dim(&self) -> usize {
        self.features.n_cols()
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GraphPair {
    pub left: KnowledgeGraph,
    pub right: KnowledgeGraph,
    pub alignment: AlignmentSet,
    pub attributes_left: Option<AttributeTable>,
    pub attributes_right: Option<AttributeTable>,
}

impl GraphPair {
    pub fn new(left: KnowledgeGraph, right: KnowledgeGraph, alignment: AlignmentSet) -> Self {
        Self {
            left,
            right,
            alignment,
            attributes_left: None,
            attributes_right: None,
        }
    }

    pub fn has_attributes(&self) -> bool {
        self.attributes_left.is_some() && self.attributes_right.is_some()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    TripleOutOfRange {
        side: Side,
        index: usize,
        triple: Triple,
    },
    AlignmentOutOfRange {
        index: usize,
        pair: AlignedPair,
    },
    DuplicateLeft {
        index: usize,
        entity: usize,
    },
    DuplicateRight {
        index: usize,
        entity: usize,
    },
    AttributeRows {
        side: Side,
        rows: usize,
        entities: usize,
    },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::TripleOutOfRange {
                side,
                index,
                triple,
            } => write!(
                f,
                "{side} triple #{index} ({}, {}, {}) references an out-of-range index",
                triple.head, triple.relation, triple.tail
            ),
            Violation::AlignmentOutOfRange { index, pair } => write!(
                f,
                "alignment #{index} ({}, {}) references an out-of-range entity",
                pair.left, pair.right
            ),
            Violation::DuplicateLeft { index, entity } => {
                write!(f, "alignment #{index}: left entity {entity} already aligned")
            }
            Violation::DuplicateRight { index, entity } => {
                write!(f, "alignment #{index}: right entity {entity} already aligned")
            }
            Violation::AttributeRows {
                side,
                rows,
                entities,
            } => write!(
                f,
                "{side} attribute table has {rows} rows for {entities} entities"
            ),
        }
    }
}

fn check_graph(graph: &KnowledgeGraph, side: Side, out: &mut Vec<Violation>) {
    for (index, t) in graph.triples.iter().enumerate() {
        if t.head >= graph.entity_count
            || t.tail >= graph.entity_count
            || t.relation >= graph.relation_count
        {
            out.push(Violation::TripleOutOfRange {
                side,
                index,
                triple: *t,
            });
        }
    }
}

/// Every invariant of the data model that does not hold, in discovery order.
pub fn validate_pair(pair: &GraphPair) -> Vec<Violation> {
    let mut out = Vec::new();
    check_graph(&pair.left, Side::Left, &mut out);
    check_graph(&pair.right, Side::Right, &mut out);

    let mut seen_left = HashSet::new();
    let mut seen_right = HashSet::new();
    for (index, p) in pair.alignment.pairs.iter().enumerate() {
        if p.left >= pair.left.entity_count || p.right >= pair.right.entity_count {
            out.push(Violation::AlignmentOutOfRange { index, pair: *p });
        }
        if !seen_left.insert(p.left) {
            out.push(Violation::DuplicateLeft {
                index,
                entity: p.left,
            });
        }
        if !seen_right.insert(p.right) {
            out.push(Violation::DuplicateRight {
                index,
                entity: p.right,
            });
        }
    }

    for (side, table, graph) in [
        (Side::Left, &pair.attributes_left, &pair.left),
        (Side::Right, &pair.attributes_right, &pair.right),
    ] {
        if let Some(t) = table {
            if t.entity_count() != graph.entity_count {
                out.push(Violation::AttributeRows {
                    side,
                    rows: t.entity_count(),
                    entities: graph.entity_count,
                });
            }
        }
    }
    out
}
