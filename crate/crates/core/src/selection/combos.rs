//! Lyric feature combination search.
//!
//! Every nonempty combination of the three lyric blocks is scored on the
//! validation split for each regressor family and target, using default
//! hyperparameters. The recommendation aggregates the cells by a
//! configurable rule; the default is the mean rank across cells.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fuse, FeatureMatrix};
use crate::dataset::Target;
use crate::error::{Error, Result};
use crate::evaluation::r2;
use crate::regressors::{fit, Family, RegressorSpec};
use crate::rng::derive_labeled;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LyricBlock {
    Tfidf,
    Xanew,
    Vader,
}

impl LyricBlock {
    pub fn as_str(self) -> &'static str {
        match self {
            LyricBlock::Tfidf => "tfidf",
            LyricBlock::Xanew => "xanew",
            LyricBlock::Vader => "vader",
        }
    }
}

/// The seven nonempty combinations in report order.
pub const COMBINATIONS: [&[LyricBlock]; 7] = [
    &[LyricBlock::Tfidf],
    &[LyricBlock::Xanew],
    &[LyricBlock::Vader],
    &[LyricBlock::Tfidf, LyricBlock::Xanew],
    &[LyricBlock::Tfidf, LyricBlock::Vader],
    &[LyricBlock::Xanew, LyricBlock::Vader],
    &[LyricBlock::Tfidf, LyricBlock::Xanew, LyricBlock::Vader],
];

pub fn combination_name(blocks: &[LyricBlock]) -> String {
    blocks.iter().map(|b| b.as_str()).collect::<Vec<_>>().join("+")
}

/// The three lyric feature blocks over the same rows.
#[derive(Debug, Clone, Copy)]
pub struct LyricBlocks<'a> {
    pub tfidf: &'a FeatureMatrix,
    pub xanew: &'a FeatureMatrix,
    pub vader: &'a FeatureMatrix,
}

impl LyricBlocks<'_> {
    fn block(&self, b: LyricBlock) -> &FeatureMatrix {
        match b {
            LyricBlock::Tfidf => self.tfidf,
            LyricBlock::Xanew => self.xanew,
            LyricBlock::Vader => self.vader,
        }
    }

    pub fn combine(&self, blocks: &[LyricBlock]) -> Result<FeatureMatrix> {
        let parts: Vec<&FeatureMatrix> = blocks.iter().map(|&b| self.block(b)).collect();
        fuse(&parts)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RankRule {
    /// Mean of per-cell ranks; ties within a cell share the average rank.
    MeanRank,
    /// Mean validation R²; any failed cell disqualifies the row.
    MeanScore,
}

impl fmt::Display for RankRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RankRule::MeanRank => "mean_rank",
            RankRule::MeanScore => "mean_score",
        })
    }
}

impl FromStr for RankRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mean_rank" => Ok(RankRule::MeanRank),
            "mean_score" => Ok(RankRule::MeanScore),
            _ => Err(Error::Parse(format!("unknown rank rule `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationColumn {
    pub family: Family,
    pub target: Target,
}

/// Validation R² of one cell, or the reason it has none.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellScore {
    R2(f64),
    Failed(String),
}

impl CellScore {
    pub fn value(&self) -> Option<f64> {
        match self {
            CellScore::R2(v) => Some(*v),
            CellScore::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationRow {
    pub combination: String,
    pub blocks: Vec<LyricBlock>,
    pub n_features: usize,
    /// Aligned with [`CombinationTable::columns`].
    pub scores: Vec<CellScore>,
    pub mean_rank: f64,
    /// `None` if any cell failed.
    pub mean_score: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinationTable {
    pub columns: Vec<CombinationColumn>,
    pub rows: Vec<CombinationRow>,
    pub rule: RankRule,
    /// Index into `rows` of the recommended combination.
    pub best: usize,
}

impl CombinationTable {
    pub fn best_row(&self) -> &CombinationRow {
        &self.rows[self.best]
    }
}

/// Ranks (1 = best) of `scores`, higher is better. Equal scores share the
/// average of their positions; missing scores share the trailing positions.
pub fn average_ranks(scores: &[Option<f64>]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_some()).collect();
    order.sort_by(|&a, &b| scores[b].unwrap().total_cmp(&scores[a].unwrap()));
    let mut ranks = vec![0.0; scores.len()];
    let mut pos = 0;
    while pos < order.len() {
        let mut end = pos + 1;
        while end < order.len() && scores[order[end]] == scores[order[pos]] {
            end += 1;
        }
        let r = (pos + 1 + end) as f64 / 2.0;
        for &i in &order[pos..end] {
            ranks[i] = r;
        }
        pos = end;
    }
    let missing: Vec<usize> = (0..scores.len()).filter(|&i| scores[i].is_none()).collect();
    let r = (order.len() + 1 + scores.len()) as f64 / 2.0;
    for i in missing {
        ranks[i] = r;
    }
    ranks
}

/// Score all combinations. `train` and `validation` index rows of the
/// blocks and targets; no other row is read.
#[allow(clippy::too_many_arguments)]
pub fn search_lyric_combination(
    blocks: &LyricBlocks<'_>,
    valence: &[f64],
    arousal: &[f64],
    train: &[usize],
    validation: &[usize],
    families: &[Family],
    rule: RankRule,
    seed: u64,
) -> Result<CombinationTable> {
    if train.is_empty() || validation.is_empty() {
        return Err(Error::Empty("combination search needs train and validation rows".into()));
    }
    if families.is_empty() {
        return Err(Error::InvalidArgument("combination search needs at least one family".into()));
    }
    let n = blocks.tfidf.nrows();
    if valence.len() != n || arousal.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: valence.len().min(arousal.len()) });
    }
    let combos: Vec<FeatureMatrix> = COMBINATIONS.iter().map(|c| blocks.combine(c)).collect::<Result<_>>()?;
    let columns: Vec<CombinationColumn> = families
        .iter()
        .flat_map(|&family| Target::ALL.map(|target| CombinationColumn { family, target }))
        .collect();
    let jobs: Vec<(usize, usize)> = (0..combos.len()).flat_map(|r| (0..columns.len()).map(move |c| (r, c))).collect();
    let cells: Vec<CellScore> = jobs
        .par_iter()
        .map(|&(r, c)| {
            let col = &columns[c];
            let y = match col.target {
                Target::Valence => valence,
                Target::Arousal => arousal,
            };
            let label = format!("combo/{}/{}/{}", combination_name(COMBINATIONS[r]), col.family, col.target);
            let spec = RegressorSpec::new(col.family, derive_labeled(seed, &label));
            let x = combos[r].values();
            let score = (|| {
                let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
                let yva: Vec<f64> = validation.iter().map(|&i| y[i]).collect();
                let model = fit(&spec, &x.select_rows(train), &ytr)?;
                r2(&yva, &model.predict(&x.select_rows(validation))?)
            })();
            match score {
                Ok(v) => CellScore::R2(v),
                Err(e) => {
                    log::warn!("{label}: {e}");
                    CellScore::Failed(e.to_string())
                }
            }
        })
        .collect();

    let ncol = columns.len();
    let mut rank_sum = vec![0.0; combos.len()];
    for c in 0..ncol {
        let col: Vec<Option<f64>> = (0..combos.len()).map(|r| cells[r * ncol + c].value()).collect();
        for (r, rank) in average_ranks(&col).into_iter().enumerate() {
            rank_sum[r] += rank;
        }
    }
    let rows: Vec<CombinationRow> = COMBINATIONS
        .iter()
        .enumerate()
        .map(|(r, blocks)| {
            let scores = cells[r * ncol..(r + 1) * ncol].to_vec();
            let mean_score = scores
                .iter()
                .map(CellScore::value)
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            CombinationRow {
                combination: combination_name(blocks),
                blocks: blocks.to_vec(),
                n_features: combos[r].ncols(),
                scores,
                mean_rank: rank_sum[r] / ncol as f64,
                mean_score,
            }
        })
        .collect();

    // Lower key wins; ties go to fewer features, then report order.
    let key = |row: &CombinationRow| match rule {
        RankRule::MeanRank => row.mean_rank,
        RankRule::MeanScore => row.mean_score.map_or(f64::INFINITY, |s| -s),
    };
    let best = (0..rows.len())
        .min_by(|&a, &b| {
            key(&rows[a])
                .total_cmp(&key(&rows[b]))
                .then(rows[a].n_features.cmp(&rows[b].n_features))
                .then(a.cmp(&b))
        })
        .expect("seven rows");
    Ok(CombinationTable { columns, rows, rule, best })
}
