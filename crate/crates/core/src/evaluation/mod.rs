//! R² scoring and the experiment runner behind the report tables: the
//! modality × model grid, the MLR coefficient table, the all-versus-selected
//! feature comparison, the lyric combination search, the audio significance
//! filter and RFE.

pub mod audit;
pub mod metrics;
pub mod report;
pub mod runner;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::regressors::{Family, HyperparameterGrid};
use crate::selection::combos::RankRule;

pub use audit::{ScoringVault, SplitAudit};
pub use metrics::{r2, r2_lenient};
pub use report::{
    CellOutcome, CoefficientRow, EvaluationReport, GridCell, ReportMetadata, RfeReport, SubsetRow, REPORT_FORMAT_VERSION,
};
pub use runner::{coefficient_report, evaluate, resolve_subsets, train_cell, SubsetDefinitions, TrainedCell};

/// Feature view of one row of the modality grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModalityView {
    Audio,
    Lyrics,
    Multi,
}

impl ModalityView {
    pub const ALL: [ModalityView; 3] = [ModalityView::Audio, ModalityView::Lyrics, ModalityView::Multi];

    pub fn as_str(self) -> &'static str {
        match self {
            ModalityView::Audio => "audio",
            ModalityView::Lyrics => "lyrics",
            ModalityView::Multi => "multi",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ModalityView::Audio => "Audio",
            ModalityView::Lyrics => "Lyrics",
            ModalityView::Multi => "Multi-modal",
        }
    }
}

impl fmt::Display for ModalityView {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModalityView {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ModalityView::ALL
            .into_iter()
            .find(|m| m.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::InvalidArgument(format!("unknown modality `{s}` (expected audio, lyrics or multi)")))
    }
}

/// How the selected audio subset is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AudioSelection {
    /// danceability, energy, instrumentalness, valence, mode.
    Published,
    /// Result of the significance filter on the training split.
    Significance,
}

/// How the selected lyric subset is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyricsSelection {
    /// Sentiment scores plus TF-IDF components.
    Published,
    /// Winner of the combination search on the validation split.
    Search,
}

macro_rules! simple_from_str {
    ($t:ty, $what:literal, $($s:literal => $v:expr),+) => {
        impl FromStr for $t {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s.trim().to_ascii_lowercase().as_str() {
                    $($s => Ok($v),)+
                    _ => Err(Error::InvalidArgument(format!(concat!("unknown ", $what, " `{}`"), s))),
                }
            }
        }
    };
}

simple_from_str!(AudioSelection, "audio selection", "published" => AudioSelection::Published, "significance" => AudioSelection::Significance);
simple_from_str!(LyricsSelection, "lyrics selection", "published" => LyricsSelection::Published, "search" => LyricsSelection::Search);

/// Which report sections to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sections {
    pub grid: bool,
    pub coefficients: bool,
    pub subsets: bool,
    pub combinations: bool,
    pub significance: bool,
    pub rfe: bool,
}

impl Sections {
    pub const ALL: Sections = Sections {
        grid: true,
        coefficients: true,
        subsets: true,
        combinations: true,
        significance: true,
        rfe: true,
    };

    pub const NONE: Sections = Sections {
        grid: false,
        coefficients: false,
        subsets: false,
        combinations: false,
        significance: false,
        rfe: false,
    };
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub seed: u64,
    /// Families in the grid and the combination search.
    pub families: Vec<Family>,
    pub modalities: Vec<ModalityView>,
    pub grids: BTreeMap<Family, HyperparameterGrid>,
    pub folds: usize,
    pub alpha: f64,
    pub rfe_n_keep: usize,
    pub audio_selection: AudioSelection,
    pub lyrics_selection: LyricsSelection,
    pub rank_rule: RankRule,
    pub sections: Sections,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig {
            seed: 42,
            families: Family::ALL.to_vec(),
            modalities: ModalityView::ALL.to_vec(),
            grids: Family::ALL.into_iter().map(|f| (f, HyperparameterGrid::default_for(f))).collect(),
            folds: 5,
            alpha: 0.05,
            rfe_n_keep: 10,
            audio_selection: AudioSelection::Published,
            lyrics_selection: LyricsSelection::Published,
            rank_rule: RankRule::MeanRank,
            sections: Sections::ALL,
        }
    }
}

impl EvaluationConfig {
    pub fn grid(&self, family: Family) -> HyperparameterGrid {
        self.grids.get(&family).cloned().unwrap_or_else(|| HyperparameterGrid::default_for(family))
    }

    pub fn validate(&self) -> Result<()> {
        if self.families.is_empty() || self.modalities.is_empty() {
            return Err(Error::InvalidArgument("at least one family and one modality are required".into()));
        }
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("folds must be at least 2, got {}", self.folds)));
        }
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {}", self.alpha)));
        }
        if self.rfe_n_keep == 0 {
            return Err(Error::InvalidArgument("rfe n_keep must be at least 1".into()));
        }
        Ok(())
    }
}
