//! Ablation cells and the built-in tuned hyperparameters.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::datasets::DatasetFamily;
use crate::encoder::InitScale;
use crate::error::{Error, Result};
use crate::training::OptimizerKind;

/// Embedding initialization variants compared by the ablation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitPreset {
    Unit,
    Scaled,
}

impl InitPreset {
    pub fn scale(self) -> InitScale {
        match self {
            InitPreset::Unit => InitScale::Unit,
            InitPreset::Scaled => InitScale::Scaled,
        }
    }
}

impl fmt::Display for InitPreset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            InitPreset::Unit => "unit",
            InitPreset::Scaled => "scaled",
        })
    }
}

impl FromStr for InitPreset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "unit" => Ok(InitPreset::Unit),
            "scaled" => Ok(InitPreset::Scaled),
            other => Err(Error::Config(format!("unknown init preset '{other}'"))),
        }
    }
}

/// One of the four (weights × initialization) ablation settings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CellKey {
    pub use_weights: bool,
    pub init: InitPreset,
}

impl CellKey {
    pub const ALL: [CellKey; 4] = [
        CellKey::new(false, InitPreset::Unit),
        CellKey::new(false, InitPreset::Scaled),
        CellKey::new(true, InitPreset::Unit),
        CellKey::new(true, InitPreset::Scaled),
    ];

    pub const fn new(use_weights: bool, init: InitPreset) -> Self {
        Self { use_weights, init }
    }
}

impl fmt::Display for CellKey {
    /// `no/unit`, `yes/scaled`, ...
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let w = if self.use_weights { "yes" } else { "no" };
        write!(f, "{w}/{}", self.init)
    }
}

impl FromStr for CellKey {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (w, i) = s
            .split_once('/')
            .ok_or_else(|| Error::Config(format!("cell '{s}' must be weights/init, e.g. no/unit")))?;
        let use_weights = match w {
            "yes" | "true" => true,
            "no" | "false" => false,
            other => return Err(Error::Config(format!("cell weights must be yes or no, got '{other}'"))),
        };
        Ok(CellKey::new(use_weights, i.parse()?))
    }
}

/// Hyperparameters a preset pins for one dataset and cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TunedParams {
    pub optimizer: OptimizerKind,
    pub learning_rate: f64,
    pub n_layers: usize,
    pub n_negatives: usize,
    pub n_epochs: usize,
}

/// Best settings of the large grid search on DBP15k (JAPE) zh-en.
pub fn grid_optimum(cell: CellKey) -> TunedParams {
    use InitPreset::*;
    let (n_epochs, n_negatives, n_layers, optimizer) = match (cell.use_weights, cell.init) {
        (false, Unit) => (2000, 50, 2, OptimizerKind::Adam),
        (false, Scaled) => (3000, 100, 2, OptimizerKind::Sgd),
        (true, Unit) => (2000, 50, 3, OptimizerKind::Adam),
        (true, Scaled) => (2000, 50, 2, OptimizerKind::Adam),
    };
    TunedParams {
        optimizer,
        learning_rate: 1.0,
        n_layers,
        n_negatives,
        n_epochs,
    }
}

/// Per-dataset fine-tuned epochs, layers and learning rate on top of
/// [`grid_optimum`]; optimizer and negatives stay at the grid optimum.
pub fn fine_tuned(family: DatasetFamily, subset: &str, cell: CellKey) -> Option<TunedParams> {
    use DatasetFamily::*;
    use InitPreset::*;
    let (epochs, layers, lr) = match (cell.use_weights, cell.init, family, subset) {
        (false, Unit, Dbp15kFull, "fr-en") => (2000, 2, 1.0),
        (false, Unit, Dbp15kFull, "ja-en") => (2000, 3, 1.0),
        (false, Unit, Dbp15kFull, "zh-en") => (2000, 4, 1.0),
        (false, Unit, Wk3l15k, "en-fr") => (2000, 2, 10.0),

        (true, Unit, Dbp15kFull, "fr-en" | "ja-en") => (2000, 4, 1.0),
        (true, Unit, Dbp15kFull, "zh-en") => (2000, 3, 1.0),
        (true, Unit, Dbp15kJape, "fr-en") => (2000, 2, 10.0),
        (true, Unit, Dbp15kJape, "ja-en" | "zh-en") => (2000, 3, 1.0),

        (false, Scaled, Dbp15kFull, "fr-en" | "ja-en") => (3000, 2, 1.0),
        (false, Scaled, Dbp15kFull, "zh-en") => (2000, 4, 1.0),
        (false, Scaled, Dbp15kJape, "fr-en" | "zh-en") => (3000, 2, 1.0),
        (false, Scaled, Dbp15kJape, "ja-en") => (2000, 2, 1.0),
        (false, Scaled, Dwy100k, _) => (3000, 2, 1.0),
        (false, Scaled, Wk3l120k | Wk3l15k, "en-de") => (3000, 2, 0.5),
        (false, Scaled, Wk3l120k | Wk3l15k, "en-fr") => (3000, 2, 1.0),

        (true, Scaled, Dbp15kFull, _) => (2000, 4, 1.0),
        (true, Scaled, Dwy100k, "dbp-yg") => (3000, 2, 0.5),

        (_, _, f, s) if f.subsets().contains(&s) => (2000, 2, 1.0),
        _ => return None,
    };
    Some(TunedParams {
        n_epochs: epochs,
        n_layers: layers,
        learning_rate: lr,
        ..grid_optimum(cell)
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_text_roundtrip() {
        for c in CellKey::ALL {
            assert_eq!(c.to_string().parse::<CellKey>().unwrap(), c);
        }
        assert!("maybe/unit".parse::<CellKey>().is_err());
    }

    #[test]
    fn jape_zh_en_agrees_with_grid_optimum() {
        for c in CellKey::ALL {
            assert_eq!(fine_tuned(DatasetFamily::Dbp15kJape, "zh-en", c), Some(grid_optimum(c)));
        }
    }

    #[test]
    fn every_dataset_has_a_preset() {
        for f in DatasetFamily::ALL {
            for s in f.subsets() {
                for c in CellKey::ALL {
                    let p = fine_tuned(f, s, c).unwrap();
                    assert!([2000, 3000].contains(&p.n_epochs));
                    assert!((2..=4).contains(&p.n_layers));
                }
            }
        }
        assert!(fine_tuned(DatasetFamily::Dwy100k, "fr-en", CellKey::ALL[0]).is_none());
    }

    #[test]
    fn spot_checks() {
        let yes_scaled = CellKey::new(true, InitPreset::Scaled);
        let p = fine_tuned(DatasetFamily::Dwy100k, "dbp-yg", yes_scaled).unwrap();
        assert_eq!((p.n_epochs, p.n_layers, p.learning_rate), (3000, 2, 0.5));
        let no_unit = CellKey::new(false, InitPreset::Unit);
        let p = fine_tuned(DatasetFamily::Wk3l15k, "en-fr", no_unit).unwrap();
        assert_eq!((p.n_epochs, p.n_layers, p.learning_rate), (2000, 2, 10.0));
        let no_scaled = CellKey::new(false, InitPreset::Scaled);
        let p = fine_tuned(DatasetFamily::Wk3l120k, "en-de", no_scaled).unwrap();
        assert_eq!(p.optimizer, OptimizerKind::Sgd);
        assert_eq!((p.n_epochs, p.learning_rate, p.n_negatives), (3000, 0.5, 100));
    }
}
