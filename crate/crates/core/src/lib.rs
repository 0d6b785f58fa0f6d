//! Entity alignment between two knowledge graphs with a weightless graph
//! convolutional encoder, plus the experiment harness used to ablate it.

pub mod adjacency;
pub mod datasets;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod graph;
pub mod linalg;
pub mod runner;
pub mod training;

pub use adjacency::{build_adjacency, AdjacencyConfig, AdjacencyVariant};
pub use datasets::{DatasetDescriptor, DatasetFamily, DatasetStatistics};
pub use encoder::{EmbeddingState, EncoderConfig, InitScale};
pub use error::{Error, Result};
pub use evaluation::{CandidatePolicy, MetricsReport, ScoreConfig};
pub use graph::{AlignedPair, AlignmentSet, GraphPair, KnowledgeGraph, Role, Triple};
pub use linalg::{DenseMatrix, Normalization, SparseMatrix};
pub use training::{OptimizerKind, TrainConfig};
