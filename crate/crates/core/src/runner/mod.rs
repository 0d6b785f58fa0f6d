//! Single runs, the hyperparameter grid and the weights × initialization
//! ablation, with their on-disk artifacts.

pub mod ablation;
pub mod config;
pub mod grid;
pub mod presets;
pub mod run;

pub use ablation::{run_ablation, AblationCell, AblationSpec, AblationTable};
pub use config::{DatasetSource, RunConfig};
pub use grid::{enumerate_grid, run_grid, GridOutcome, GridSpec};
pub use presets::{CellKey, InitPreset};
pub use run::{execute, run_single, RunReport, RunResult};
