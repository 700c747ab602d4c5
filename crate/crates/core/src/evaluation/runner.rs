//! The experiment runner.
//!
//! Order of work: selection steps on train/validation rows, then every
//! model fit on the training split, then the vault opens and the fitted
//! models are scored on the test split. Each fit draws its seed from its
//! own label, so results do not depend on scheduling or on which other
//! sections run.

use std::collections::BTreeMap;

use rayon::prelude::*;

use super::audit::ScoringVault;
use super::report::{CellOutcome, CoefficientRow, EvaluationReport, GridCell, ReportMetadata, RfeReport, SubsetRow};
use super::{r2, AudioSelection, EvaluationConfig, LyricsSelection, ModalityView, REPORT_FORMAT_VERSION};
use crate::dataset::{Split, Target, AUDIO_COLUMNS, KEY_COLUMN_OFFSET};
use crate::error::{Error, Result};
use crate::numerics::ols_fit;
use crate::pipeline::{FeatureSet, SENTIMENT_COLUMNS};
use crate::regressors::{grid_search, Family, TrainedRegressor};
use crate::rng::derive_labeled;
use crate::selection::combos::{CombinationTable, LyricBlock, LyricBlocks};
use crate::selection::{fuse, rfe, search_lyric_combination, select_significant_audio, FeatureMatrix, FeatureSubset, SignificanceResult};

/// The audio subset reported as significant for the full corpus.
pub const PUBLISHED_AUDIO_SUBSET: [&str; 5] = ["danceability", "energy", "instrumentalness", "valence", "mode"];

/// Column lists for the all/selected variant of every modality.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDefinitions {
    pub audio_all: FeatureSubset,
    pub audio_selected: FeatureSubset,
    pub lyrics_all: FeatureSubset,
    pub lyrics_selected: FeatureSubset,
}

impl SubsetDefinitions {
    pub fn columns(&self, view: ModalityView, selected: bool) -> Vec<String> {
        let (a, l) = if selected {
            (&self.audio_selected, &self.lyrics_selected)
        } else {
            (&self.audio_all, &self.lyrics_all)
        };
        match view {
            ModalityView::Audio => a.columns.clone(),
            ModalityView::Lyrics => l.columns.clone(),
            ModalityView::Multi => a.columns.iter().chain(&l.columns).cloned().collect(),
        }
    }

    pub fn named(&self) -> BTreeMap<String, FeatureSubset> {
        let fused = |a: &FeatureSubset, l: &FeatureSubset| FeatureSubset {
            columns: a.columns.iter().chain(&l.columns).cloned().collect(),
            procedure: "fusion".into(),
            criterion: format!("audio: {}; lyrics: {}", a.criterion, l.criterion),
        };
        BTreeMap::from([
            ("audio_all".to_string(), self.audio_all.clone()),
            ("audio_selected".to_string(), self.audio_selected.clone()),
            ("lyrics_all".to_string(), self.lyrics_all.clone()),
            ("lyrics_selected".to_string(), self.lyrics_selected.clone()),
            ("multi_all".to_string(), fused(&self.audio_all, &self.lyrics_all)),
            ("multi_selected".to_string(), fused(&self.audio_selected, &self.lyrics_selected)),
        ])
    }
}

fn names(m: &FeatureMatrix) -> Vec<String> {
    m.column_names().to_vec()
}

fn lyric_columns(features: &FeatureSet, blocks: &[LyricBlock]) -> Vec<String> {
    // Canonical order: sentiment, TF-IDF, affect.
    let mut cols = Vec::new();
    if blocks.contains(&LyricBlock::Vader) {
        cols.extend(names(&features.sentiment));
    }
    if blocks.contains(&LyricBlock::Tfidf) {
        cols.extend(names(&features.tfidf));
    }
    if blocks.contains(&LyricBlock::Xanew) {
        cols.extend(names(&features.xanew));
    }
    cols
}

pub fn resolve_subsets(
    features: &FeatureSet,
    cfg: &EvaluationConfig,
    significance: Option<&SignificanceResult>,
    combinations: Option<&CombinationTable>,
) -> Result<SubsetDefinitions> {
    let fixed = |columns: Vec<String>, what: &str| FeatureSubset {
        columns,
        procedure: "fixed".into(),
        criterion: what.into(),
    };
    let audio_all = fixed(names(&features.audio), "all audio columns");
    let lyrics_all = fixed(
        lyric_columns(features, &[LyricBlock::Vader, LyricBlock::Tfidf, LyricBlock::Xanew]),
        "sentiment + tfidf + xanew",
    );
    let audio_selected = match cfg.audio_selection {
        AudioSelection::Published => {
            for c in PUBLISHED_AUDIO_SUBSET {
                if features.audio.column_index(c).is_none() {
                    return Err(Error::InvalidArgument(format!("audio matrix lacks `{c}`")));
                }
            }
            // Keep the matrix column order.
            let cols = features
                .audio
                .column_names()
                .iter()
                .filter(|c| PUBLISHED_AUDIO_SUBSET.contains(&c.as_str()))
                .cloned()
                .collect();
            FeatureSubset {
                columns: cols,
                procedure: "published".into(),
                criterion: "published significant audio predictors".into(),
            }
        }
        AudioSelection::Significance => {
            let s = significance.ok_or_else(|| Error::InvalidArgument("significance selection needs the significance section".into()))?;
            if s.subset.columns.is_empty() {
                return Err(Error::Empty("significance filter retained no audio feature".into()));
            }
            s.subset.clone()
        }
    };
    let lyrics_selected = match cfg.lyrics_selection {
        LyricsSelection::Published => FeatureSubset {
            columns: lyric_columns(features, &[LyricBlock::Vader, LyricBlock::Tfidf]),
            procedure: "published".into(),
            criterion: "tfidf+vader".into(),
        },
        LyricsSelection::Search => {
            let t = combinations.ok_or_else(|| Error::InvalidArgument("search selection needs the combination section".into()))?;
            let best = t.best_row();
            FeatureSubset {
                columns: lyric_columns(features, &best.blocks),
                procedure: "combination_search".into(),
                criterion: format!("{} by {} = {}", best.combination, t.rule, best.mean_rank),
            }
        }
    };
    Ok(SubsetDefinitions {
        audio_all,
        audio_selected,
        lyrics_all,
        lyrics_selected,
    })
}

/// A grid-searched model fitted on the training split.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedCell {
    pub label: String,
    pub columns: Vec<String>,
    pub model: TrainedRegressor,
    pub cv_r2: Option<f64>,
}

fn all_columns(features: &FeatureSet) -> Result<FeatureMatrix> {
    features.check_aligned()?;
    fuse(&[&features.audio, &features.sentiment, &features.tfidf, &features.xanew])
}

/// Grid-search `family` on the training rows of `columns` and refit the
/// winner on all training rows.
pub fn train_cell(
    full: &FeatureMatrix,
    vault: &ScoringVault<'_>,
    columns: &[String],
    family: Family,
    target: Target,
    cfg: &EvaluationConfig,
    label: &str,
) -> Result<TrainedCell> {
    let train = vault.targets().indices(Split::Train);
    if train.len() < cfg.folds {
        return Err(Error::Empty(format!("{label}: {} training rows for {} folds", train.len(), cfg.folds)));
    }
    let y = vault.fit_values(target, &train)?;
    let x = full.select_columns(columns)?.values().select_rows(&train);
    let seed = derive_labeled(cfg.seed, label);
    let res = grid_search(family, &cfg.grid(family), &x, &y, cfg.folds, seed)?;
    let mut model = res.model;
    model.feature_names = columns.to_vec();
    let cv = res.scores[res.best_index].mean_r2;
    Ok(TrainedCell {
        label: label.to_string(),
        columns: columns.to_vec(),
        model,
        cv_r2: cv.is_finite().then_some(cv),
    })
}

fn score(full: &FeatureMatrix, vault: &ScoringVault<'_>, target: Target, cell: &Result<TrainedCell>) -> CellOutcome {
    let run = || -> Result<CellOutcome> {
        let cell = cell.as_ref().map_err(|e| Error::InvalidArgument(e.to_string()))?;
        let test = vault.targets().indices(Split::Test);
        let x = full.select_columns(&cell.columns)?.values().select_rows(&test);
        let pred = cell.model.predict(&x)?;
        let y = vault.test_values(target)?;
        Ok(CellOutcome::Ok {
            test_r2: r2(&y, &pred)?,
            cv_r2: cell.cv_r2,
            train_r2: cell.model.metadata.train_r2,
            hyperparameters: cell.model.metadata.hyperparameters.clone(),
        })
    };
    run().unwrap_or_else(|e| CellOutcome::Failed { error: e.to_string() })
}

/// MLR on the ten non-key base audio features plus the compound score,
/// one fit per target on the training split.
pub fn coefficient_report(features: &FeatureSet, vault: &ScoringVault<'_>, alpha: f64) -> Result<Vec<CoefficientRow>> {
    let mut cols: Vec<String> = AUDIO_COLUMNS[..KEY_COLUMN_OFFSET].iter().map(|s| s.to_string()).collect();
    cols.sort();
    let compound = SENTIMENT_COLUMNS[3].to_string();
    let x = fuse(&[&features.audio, &features.sentiment])?
        .select_columns(&cols.iter().chain([&compound]).collect::<Vec<_>>())?;
    let train = vault.targets().indices(Split::Train);
    let xt = x.values().select_rows(&train);
    let mut rows = Vec::new();
    for target in Target::ALL {
        let y = vault.fit_values(target, &train)?;
        let fit = ols_fit(&xt, &y)?;
        let inf = fit
            .inference
            .as_ref()
            .ok_or_else(|| Error::InferenceUnavailable(format!("coefficient table needs N > {}", xt.ncols() + 1)))?;
        let terms = std::iter::once("constant".to_string()).chain(x.column_names().iter().cloned());
        for (j, term) in terms.enumerate() {
            rows.push(CoefficientRow {
                target,
                term,
                coefficient: fit.coefficients[j],
                std_error: inf.std_errors[j],
                p_value: inf.p_values[j],
                significant: inf.p_values[j] < alpha,
            });
        }
    }
    Ok(rows)
}

struct Job {
    label: String,
    columns: Vec<String>,
    family: Family,
    target: Target,
}

/// Run every section enabled in `cfg` and assemble the report.
pub fn evaluate(features: &FeatureSet, cfg: &EvaluationConfig) -> Result<EvaluationReport> {
    cfg.validate()?;
    let full = all_columns(features)?;
    let vault = ScoringVault::new(&features.targets);
    let t = vault.targets();
    let (train, validation) = (t.indices(Split::Train), t.indices(Split::Validation));
    if train.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    let sec = cfg.sections;

    let significance = if sec.significance || cfg.audio_selection == AudioSelection::Significance {
        let audio = features.audio.select_rows(&train);
        let v = vault.fit_values(Target::Valence, &train)?;
        let a = vault.fit_values(Target::Arousal, &train)?;
        Some(select_significant_audio(&audio, &v, &a, cfg.alpha)?)
    } else {
        None
    };

    let combinations = if sec.combinations || cfg.lyrics_selection == LyricsSelection::Search {
        if validation.is_empty() {
            return Err(Error::Empty("combination search needs a validation split".into()));
        }
        let mut rows = train.clone();
        rows.extend(&validation);
        let sub = |m: &FeatureMatrix| m.select_rows(&rows);
        let (tf, xa, va) = (sub(&features.tfidf), sub(&features.xanew), sub(&features.sentiment));
        let blocks = LyricBlocks { tfidf: &tf, xanew: &xa, vader: &va };
        let yv = vault.fit_values(Target::Valence, &rows)?;
        let ya = vault.fit_values(Target::Arousal, &rows)?;
        let tr: Vec<usize> = (0..train.len()).collect();
        let va_idx: Vec<usize> = (train.len()..rows.len()).collect();
        Some(search_lyric_combination(&blocks, &yv, &ya, &tr, &va_idx, &cfg.families, cfg.rank_rule, cfg.seed)?)
    } else {
        None
    };

    let subsets = resolve_subsets(features, cfg, significance.as_ref(), combinations.as_ref())?;

    let coefficient_table = if sec.coefficients { coefficient_report(features, &vault, cfg.alpha)? } else { Vec::new() };

    let rfe_reports = if sec.rfe {
        // The fused matrix: all audio, sentiment and TF-IDF columns.
        let m = fuse(&[&features.audio, &features.sentiment, &features.tfidf])?.select_rows(&train);
        Target::ALL
            .iter()
            .map(|&target| {
                let y = vault.fit_values(target, &train)?;
                let n_keep = cfg.rfe_n_keep.min(m.ncols());
                Ok(RfeReport {
                    target,
                    input_features: m.ncols(),
                    result: rfe(&m, &y, n_keep)?,
                })
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        Vec::new()
    };

    // Model fits. Labels identify (view, subset, family, target); a label
    // shared by the grid and the subset table is fitted once.
    let mut jobs: BTreeMap<String, Job> = BTreeMap::new();
    let mut add = |view: ModalityView, selected: bool, family: Family, target: Target| -> String {
        let label = format!("fit/{view}/{}/{}/{target}", if selected { "selected" } else { "all" }, family.name());
        jobs.entry(label.clone()).or_insert_with(|| Job {
            label: label.clone(),
            columns: subsets.columns(view, selected),
            family,
            target,
        });
        label
    };
    let mut grid_labels = Vec::new();
    if sec.grid {
        for &view in &cfg.modalities {
            for &family in &cfg.families {
                for target in Target::ALL {
                    grid_labels.push((view, family, target, add(view, true, family, target)));
                }
            }
        }
    }
    let mut subset_labels = Vec::new();
    if sec.subsets {
        for &view in &cfg.modalities {
            for selected in [false, true] {
                let v = add(view, selected, Family::Mlp, Target::Valence);
                let a = add(view, selected, Family::Mlp, Target::Arousal);
                subset_labels.push((view, selected, v, a));
            }
        }
    }
    let jobs: Vec<Job> = jobs.into_values().collect();
    let fitted: Vec<Result<TrainedCell>> = jobs
        .par_iter()
        .map(|j| {
            let r = train_cell(&full, &vault, &j.columns, j.family, j.target, cfg, &j.label);
            if let Err(e) = &r {
                log::warn!("{}: {e}", j.label);
            }
            r
        })
        .collect();

    vault.open_scoring();
    let outcomes: BTreeMap<&str, (CellOutcome, usize)> = jobs
        .iter()
        .zip(&fitted)
        .map(|(j, f)| (j.label.as_str(), (score(&full, &vault, j.target, f), j.columns.len())))
        .collect();

    let cells = grid_labels
        .iter()
        .map(|(view, family, target, label)| GridCell {
            modality: *view,
            family: *family,
            target: *target,
            n_features: outcomes[label.as_str()].1,
            outcome: outcomes[label.as_str()].0.clone(),
        })
        .collect();
    let feature_subset_table = subset_labels
        .iter()
        .map(|(view, selected, v, a)| SubsetRow {
            modality: *view,
            subset: if *selected { "selected" } else { "all" }.into(),
            n_features: outcomes[v.as_str()].1,
            valence: outcomes[v.as_str()].0.clone(),
            arousal: outcomes[a.as_str()].0.clone(),
        })
        .collect();

    let mut feature_dims = BTreeMap::new();
    for (name, m) in [
        ("audio", &features.audio),
        ("sentiment", &features.sentiment),
        ("tfidf", &features.tfidf),
        ("xanew", &features.xanew),
    ] {
        feature_dims.insert(name.to_string(), m.ncols());
    }
    let split_sizes = Split::ALL.iter().map(|s| (s.as_str().to_string(), t.indices(*s).len())).collect();
    let metadata = ReportMetadata {
        seed: cfg.seed,
        split_sizes,
        feature_dims,
        families: cfg.families.clone(),
        modalities: cfg.modalities.clone(),
        grids: cfg.families.iter().map(|&f| (f, cfg.grid(f))).collect(),
        folds: cfg.folds,
        alpha: cfg.alpha,
        rfe_n_keep: cfg.rfe_n_keep,
        audio_selection: cfg.audio_selection,
        lyrics_selection: cfg.lyrics_selection,
        rank_rule: cfg.rank_rule.to_string(),
        subsets: subsets.named(),
    };
    Ok(EvaluationReport {
        format_version: REPORT_FORMAT_VERSION,
        metadata,
        cells,
        coefficient_table,
        feature_subset_table,
        lyric_combinations: if sec.combinations { combinations } else { None },
        significance: if sec.significance { significance } else { None },
        rfe: rfe_reports,
        audit: vault.audit(),
    })
}
