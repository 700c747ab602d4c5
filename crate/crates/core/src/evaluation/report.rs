//! Report types and their CSV, Markdown and JSON renderings.
//!
//! Renderings are pure functions of the report, and the report carries no
//! timestamps, so identical runs produce identical bytes.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AudioSelection, LyricsSelection, ModalityView, SplitAudit};
use crate::dataset::Target;
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::regressors::{Family, HyperparameterGrid, Params};
use crate::selection::combos::{CellScore, CombinationTable};
use crate::selection::{FeatureSubset, RfeResult, SignificanceResult};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum CellOutcome {
    Ok {
        test_r2: f64,
        /// Mean k-fold R² of the chosen configuration on the training split.
        cv_r2: Option<f64>,
        train_r2: f64,
        hyperparameters: Params,
    },
    Failed {
        error: String,
    },
}

impl CellOutcome {
    pub fn test_r2(&self) -> Option<f64> {
        match self {
            CellOutcome::Ok { test_r2, .. } => Some(*test_r2),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn train_r2(&self) -> Option<f64> {
        match self {
            CellOutcome::Ok { train_r2, .. } => Some(*train_r2),
            CellOutcome::Failed { .. } => None,
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, CellOutcome::Failed { .. })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub modality: ModalityView,
    pub family: Family,
    pub target: Target,
    pub n_features: usize,
    pub outcome: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientRow {
    pub target: Target,
    /// `constant` or a feature name.
    pub term: String,
    pub coefficient: f64,
    pub std_error: f64,
    pub p_value: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubsetRow {
    pub modality: ModalityView,
    /// `all` or `selected`.
    pub subset: String,
    pub n_features: usize,
    pub valence: CellOutcome,
    pub arousal: CellOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RfeReport {
    pub target: Target,
    pub input_features: usize,
    pub result: RfeResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seed: u64,
    /// Rows per split: train, validation, test.
    pub split_sizes: BTreeMap<String, usize>,
    pub feature_dims: BTreeMap<String, usize>,
    pub families: Vec<Family>,
    pub modalities: Vec<ModalityView>,
    pub grids: BTreeMap<Family, HyperparameterGrid>,
    pub folds: usize,
    pub alpha: f64,
    pub rfe_n_keep: usize,
    pub audio_selection: AudioSelection,
    pub lyrics_selection: LyricsSelection,
    pub rank_rule: String,
    pub subsets: BTreeMap<String, FeatureSubset>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub format_version: u32,
    pub metadata: ReportMetadata,
    pub cells: Vec<GridCell>,
    pub coefficient_table: Vec<CoefficientRow>,
    pub feature_subset_table: Vec<SubsetRow>,
    pub lyric_combinations: Option<CombinationTable>,
    pub significance: Option<SignificanceResult>,
    pub rfe: Vec<RfeReport>,
    pub audit: SplitAudit,
}

fn fmt_r2(v: Option<f64>) -> String {
    v.map_or_else(|| "failed".to_string(), |v| format!("{v:.3}"))
}

fn csv_bytes(header: &[&str], rows: &[Vec<String>]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Format(format!("report csv: {e}"));
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(r).map_err(err)?;
    }
    w.into_inner().map_err(|e| Error::Format(format!("report csv: {e}")))
}

fn markdown(title: &str, header: &[&str], rows: &[Vec<String>]) -> String {
    let mut s = format!("## {title}\n\n| {} |\n|", header.join(" | "));
    for _ in header {
        s.push_str("---|");
    }
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "| {} |", r.join(" | "));
    }
    s
}

/// One rendered table.
pub struct Table {
    pub stem: &'static str,
    pub title: &'static str,
    pub header: Vec<String>,
    /// Raw values, full precision.
    pub csv_rows: Vec<Vec<String>>,
    /// Display values, rounded.
    pub md_rows: Vec<Vec<String>>,
}

impl EvaluationReport {
    pub fn failed_cells(&self) -> usize {
        let grid = self.cells.iter().filter(|c| c.outcome.is_failed()).count();
        let subsets = self
            .feature_subset_table
            .iter()
            .map(|r| usize::from(r.valence.is_failed()) + usize::from(r.arousal.is_failed()))
            .sum::<usize>();
        grid + subsets
    }

    pub fn cell(&self, modality: ModalityView, family: Family, target: Target) -> Option<&GridCell> {
        self.cells
            .iter()
            .find(|c| c.modality == modality && c.family == family && c.target == target)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let r: EvaluationReport = serde_json::from_str(text)?;
        if r.format_version != REPORT_FORMAT_VERSION {
            return Err(Error::Format(format!("report format version {}", r.format_version)));
        }
        Ok(r)
    }

    /// All nonempty tables in a fixed order.
    pub fn tables(&self) -> Vec<Table> {
        let mut out = Vec::new();
        if !self.cells.is_empty() {
            out.push(self.grid_table());
        }
        if !self.coefficient_table.is_empty() {
            out.push(self.coefficient_table());
        }
        if !self.feature_subset_table.is_empty() {
            out.push(self.subset_table());
        }
        if let Some(t) = &self.lyric_combinations {
            out.push(combination_table(t));
        }
        if let Some(s) = &self.significance {
            out.push(significance_table(s));
        }
        if !self.rfe.is_empty() {
            out.push(rfe_table(&self.rfe));
        }
        out
    }

    fn grid_table(&self) -> Table {
        let mut families: Vec<Family> = self.cells.iter().map(|c| c.family).collect();
        families.sort();
        families.dedup();
        let mut modalities: Vec<ModalityView> = self.cells.iter().map(|c| c.modality).collect();
        modalities.sort();
        modalities.dedup();
        let mut header = vec!["modality".to_string()];
        for f in &families {
            for t in Target::ALL {
                header.push(format!("{}_{}", f.name(), t));
            }
        }
        let (mut csv_rows, mut md_rows) = (Vec::new(), Vec::new());
        for m in &modalities {
            let mut c = vec![m.as_str().to_string()];
            let mut d = vec![m.label().to_string()];
            for f in &families {
                for t in Target::ALL {
                    let v = self.cell(*m, *f, t).and_then(|c| c.outcome.test_r2());
                    c.push(v.map_or_else(|| "failed".into(), |v| v.to_string()));
                    d.push(fmt_r2(v));
                }
            }
            csv_rows.push(c);
            md_rows.push(d);
        }
        Table {
            stem: "modality_grid",
            title: "Test R² by modality and model",
            header,
            csv_rows,
            md_rows,
        }
    }

    fn coefficient_table(&self) -> Table {
        let header = ["target", "term", "coefficient", "std_error", "p_value", "significant"].map(String::from).to_vec();
        let csv_rows = self
            .coefficient_table
            .iter()
            .map(|r| {
                vec![
                    r.target.to_string(),
                    r.term.clone(),
                    r.coefficient.to_string(),
                    r.std_error.to_string(),
                    r.p_value.to_string(),
                    r.significant.to_string(),
                ]
            })
            .collect();
        let md_rows = self
            .coefficient_table
            .iter()
            .map(|r| {
                vec![
                    r.target.to_string(),
                    r.term.clone(),
                    format!("{:.4}{}", r.coefficient, if r.significant { "*" } else { "" }),
                    format!("{:.4}", r.std_error),
                    format!("{:.4}", r.p_value),
                    if r.significant { "yes" } else { "no" }.to_string(),
                ]
            })
            .collect();
        Table {
            stem: "coefficients",
            title: "MLR coefficients (training split)",
            header,
            csv_rows,
            md_rows,
        }
    }

    fn subset_table(&self) -> Table {
        let header = ["modality", "subset", "n_features", "valence", "arousal"].map(String::from).to_vec();
        let row = |r: &SubsetRow, f: &dyn Fn(Option<f64>) -> String| {
            vec![
                r.modality.as_str().to_string(),
                r.subset.clone(),
                r.n_features.to_string(),
                f(r.valence.test_r2()),
                f(r.arousal.test_r2()),
            ]
        };
        let raw = |v: Option<f64>| v.map_or_else(|| "failed".into(), |v: f64| v.to_string());
        Table {
            stem: "feature_subsets",
            title: "MLP test R² for all versus selected features",
            header,
            csv_rows: self.feature_subset_table.iter().map(|r| row(r, &raw)).collect(),
            md_rows: self.feature_subset_table.iter().map(|r| row(r, &fmt_r2)).collect(),
        }
    }

    /// Write `report.json` plus a CSV and a Markdown file per table, and a
    /// combined `report.md`.
    pub fn write_dir(&self, dir: &Path) -> Result<Vec<String>> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut written = Vec::new();
        write_atomic(&dir.join("report.json"), self.to_json()?.as_bytes())?;
        written.push("report.json".to_string());
        let mut all_md = String::from("# Evaluation report\n\n");
        let _ = writeln!(all_md, "Seed {}; audit {}.\n", self.metadata.seed, if self.audit.passed { "passed" } else { "FAILED" });
        for t in self.tables() {
            let header: Vec<&str> = t.header.iter().map(String::as_str).collect();
            write_atomic(&dir.join(format!("{}.csv", t.stem)), &csv_bytes(&header, &t.csv_rows)?)?;
            let md = markdown(t.title, &header, &t.md_rows);
            write_atomic(&dir.join(format!("{}.md", t.stem)), md.as_bytes())?;
            all_md.push_str(&md);
            all_md.push('\n');
            written.push(format!("{}.csv", t.stem));
            written.push(format!("{}.md", t.stem));
        }
        write_atomic(&dir.join("report.md"), all_md.as_bytes())?;
        written.push("report.md".to_string());
        Ok(written)
    }
}

fn combination_table(t: &CombinationTable) -> Table {
    let mut header = vec!["combination".to_string(), "n_features".to_string()];
    for c in &t.columns {
        header.push(format!("{}_{}", c.family.name(), c.target));
    }
    header.push("mean_rank".into());
    header.push("best".into());
    let row = |i: usize, f: &dyn Fn(&CellScore) -> String| {
        let r = &t.rows[i];
        let mut v = vec![r.combination.clone(), r.n_features.to_string()];
        v.extend(r.scores.iter().map(f));
        v.push(format!("{}", r.mean_rank));
        v.push((i == t.best).to_string());
        v
    };
    let raw = |c: &CellScore| c.value().map_or_else(|| "failed".into(), |v| v.to_string());
    let disp = |c: &CellScore| fmt_r2(c.value());
    Table {
        stem: "lyric_combinations",
        title: "Validation R² for lyric feature combinations",
        header,
        csv_rows: (0..t.rows.len()).map(|i| row(i, &raw)).collect(),
        md_rows: (0..t.rows.len()).map(|i| row(i, &disp)).collect(),
    }
}

fn significance_table(s: &SignificanceResult) -> Table {
    let header = ["feature", "target", "coefficient", "p_value", "significant", "retained"].map(String::from).to_vec();
    let retained = |f: &str| {
        s.subset
            .columns
            .iter()
            .any(|c| crate::dataset::base_feature_of(c) == f)
    };
    let row = |r: &crate::selection::SignificanceRow, full: bool| {
        let num = |v: f64| if full { v.to_string() } else { format!("{v:.4}") };
        vec![
            r.feature.clone(),
            r.target.to_string(),
            r.coefficient.map_or_else(|| "joint".into(), num),
            num(r.p_value),
            r.significant.to_string(),
            retained(&r.feature).to_string(),
        ]
    };
    Table {
        stem: "significance",
        title: "Audio feature significance",
        header,
        csv_rows: s.rows.iter().map(|r| row(r, true)).collect(),
        md_rows: s.rows.iter().map(|r| row(r, false)).collect(),
    }
}

fn rfe_table(reports: &[RfeReport]) -> Table {
    let header = ["target", "feature", "status", "step", "abs_coefficient"].map(String::from).to_vec();
    let (mut csv_rows, mut md_rows) = (Vec::new(), Vec::new());
    for r in reports {
        for (name, b) in r.result.subset.columns.iter().zip(&r.result.final_coefficients) {
            csv_rows.push(vec![r.target.to_string(), name.clone(), "kept".into(), String::new(), b.abs().to_string()]);
            md_rows.push(vec![r.target.to_string(), name.clone(), "kept".into(), String::new(), format!("{:.4}", b.abs())]);
        }
        for (k, e) in r.result.eliminated.iter().enumerate() {
            let step = (k + 1).to_string();
            csv_rows.push(vec![r.target.to_string(), e.feature.clone(), "eliminated".into(), step.clone(), e.abs_coefficient.to_string()]);
            md_rows.push(vec![r.target.to_string(), e.feature.clone(), "eliminated".into(), step, format!("{:.4}", e.abs_coefficient)]);
        }
    }
    Table {
        stem: "rfe",
        title: "Recursive feature elimination",
        header,
        csv_rows,
        md_rows,
    }
}
