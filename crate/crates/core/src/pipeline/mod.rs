//! Corpus to feature matrices.
//!
//! The vocabulary and every PCA projection are fitted on training rows only
//! and then applied to all rows. Targets are kept behind an accessor that
//! refuses test rows; the evaluation runner is the one place allowed to
//! read them, after all fitting is done.

mod store;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{dummy_encode_audio, Corpus, Split, Target, AUDIO_COLUMNS};
use crate::error::{Error, Result};
use crate::numerics::pca::EXACT_FLOP_BUDGET;
use crate::numerics::{fit_pca_sparse, CsrMatrix, PcaMethod, PcaModel};
use crate::selection::{FeatureMatrix, Modality};
use crate::text::{
    fit_tfidf, tokenize_lemmatize, transform_tfidf_sparse, vader_sentiment, xanew_features_sparse, AffectLexicon,
    SentimentLexicon, TokenSequence, VocabularyModel, DEFAULT_MAX_VOCAB,
};

pub use store::{FEATURE_FILES, MODEL_FILES, TARGETS_FILE};

pub const SENTIMENT_COLUMNS: [&str; 4] = ["sentiment_neg", "sentiment_neu", "sentiment_pos", "sentiment_compound"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureConfig {
    pub max_vocab: usize,
    /// Components kept for TF-IDF and for each affect-count block.
    pub pca_k: usize,
    /// Seeds the randomized PCA path on large inputs.
    pub seed: u64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        FeatureConfig {
            max_vocab: DEFAULT_MAX_VOCAB,
            pca_k: 100,
            seed: 0,
        }
    }
}

/// Train-fitted transforms, persisted next to the matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureModels {
    pub config: FeatureConfig,
    pub vocabulary: VocabularyModel,
    pub tfidf_pca: PcaModel,
    pub xanew_valence_pca: PcaModel,
    pub xanew_arousal_pca: PcaModel,
}

/// Regression targets with split tags. Test rows are only reachable
/// through [`TargetTable::unguarded`].
#[derive(Debug, Clone, PartialEq)]
pub struct TargetTable {
    valence: Vec<f64>,
    arousal: Vec<f64>,
    splits: Vec<Split>,
}

impl TargetTable {
    pub fn new(valence: Vec<f64>, arousal: Vec<f64>, splits: Vec<Split>) -> Result<Self> {
        if valence.len() != splits.len() || arousal.len() != splits.len() {
            return Err(Error::DimensionMismatch {
                expected: splits.len(),
                got: valence.len().min(arousal.len()),
            });
        }
        if valence.iter().chain(&arousal).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("targets".into()));
        }
        Ok(TargetTable { valence, arousal, splits })
    }

    pub fn len(&self) -> usize {
        self.splits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.splits.is_empty()
    }

    pub fn splits(&self) -> &[Split] {
        &self.splits
    }

    pub fn indices(&self, split: Split) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.splits[i] == split).collect()
    }

    /// Target values at `rows`; any test row is an audit violation.
    pub fn values(&self, target: Target, rows: &[usize]) -> Result<Vec<f64>> {
        if let Some(&i) = rows.iter().find(|&&i| self.splits.get(i) == Some(&Split::Test)) {
            return Err(Error::Audit(format!("test target of row {i} requested before scoring")));
        }
        self.unguarded(target, rows)
    }

    /// Values without the split check. Only final scoring may call this.
    pub(crate) fn unguarded(&self, target: Target, rows: &[usize]) -> Result<Vec<f64>> {
        let col = match target {
            Target::Valence => &self.valence,
            Target::Arousal => &self.arousal,
        };
        rows.iter()
            .map(|&i| {
                col.get(i)
                    .copied()
                    .ok_or_else(|| Error::InvalidArgument(format!("target row {i} out of range")))
            })
            .collect()
    }
}

/// All feature blocks over the same rows, in corpus order.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSet {
    pub audio: FeatureMatrix,
    pub sentiment: FeatureMatrix,
    pub tfidf: FeatureMatrix,
    /// Valence-count PCs followed by arousal-count PCs.
    pub xanew: FeatureMatrix,
    pub targets: TargetTable,
    pub models: Option<FeatureModels>,
}

impl FeatureSet {
    pub fn row_ids(&self) -> &[String] {
        self.audio.row_ids()
    }

    pub fn len(&self) -> usize {
        self.audio.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn check_aligned(&self) -> Result<()> {
        let ids = self.audio.row_ids();
        for m in [&self.sentiment, &self.tfidf, &self.xanew] {
            if m.row_ids() != ids {
                return Err(Error::InvalidArgument("feature blocks list different rows".into()));
            }
        }
        if self.targets.len() != ids.len() {
            return Err(Error::DimensionMismatch { expected: ids.len(), got: self.targets.len() });
        }
        Ok(())
    }
}

/// Largest usable component count for `n` training rows of width `d`.
fn clamp_k(label: &str, k: usize, n: usize, d: usize) -> Result<usize> {
    let max = n.saturating_sub(1).min(d);
    if max == 0 {
        return Err(Error::ZeroVariance(format!("{label}: no room for a principal component ({n} rows, {d} columns)")));
    }
    if k > max {
        log::warn!("{label}: pca_k {k} clamped to {max} ({n} training rows, {d} columns)");
    }
    Ok(k.min(max))
}

fn pca_block(
    label: &str,
    prefix: &str,
    rows: &[Vec<(usize, f64)>],
    d: usize,
    train: &[usize],
    cfg: &FeatureConfig,
) -> Result<(PcaModel, DMatrix<f64>, Vec<String>)> {
    let all = CsrMatrix::from_rows(rows, d)?;
    let train_rows: Vec<Vec<(usize, f64)>> = train.iter().map(|&i| rows[i].clone()).collect();
    let train_m = CsrMatrix::from_rows(&train_rows, d)?;
    let k = clamp_k(label, cfg.pca_k, train.len(), d)?;
    let (n, nd) = (train.len() as f64, d as f64);
    // Same switch as the auto path, but with the randomized seed pinned.
    let method = if n * nd * n.min(nd) <= EXACT_FLOP_BUDGET {
        PcaMethod::Exact
    } else {
        PcaMethod::Randomized { seed: cfg.seed }
    };
    let model = fit_pca_sparse(&train_m, k, method).map_err(|e| match e {
        Error::ZeroVariance(m) => Error::ZeroVariance(format!("{label}: {m}")),
        e => e,
    })?;
    let z = model.transform_sparse(&all)?;
    let names = (1..=k).map(|c| format!("{prefix}{c}")).collect();
    Ok((model, z, names))
}

/// Extract every feature block. Records must carry a split and the
/// training split must be nonempty.
pub fn extract_features(
    corpus: &Corpus,
    sentiment_lexicon: &SentimentLexicon,
    affect_lexicon: &AffectLexicon,
    cfg: &FeatureConfig,
) -> Result<FeatureSet> {
    if cfg.pca_k == 0 {
        return Err(Error::InvalidArgument("pca_k must be at least 1".into()));
    }
    corpus.validate()?;
    let splits = corpus
        .records
        .iter()
        .map(|r| r.split.ok_or_else(|| Error::InvalidArgument(format!("song {} has no split", r.song_id))))
        .collect::<Result<Vec<_>>>()?;
    let train = corpus.split_indices(Split::Train);
    if train.is_empty() {
        return Err(Error::Empty("training split is empty".into()));
    }
    let ids: Vec<String> = corpus.records.iter().map(|r| r.song_id.clone()).collect();
    let n = ids.len();
    let lyrics: Vec<&str> = corpus.records.iter().map(|r| corpus.lyrics[&r.song_id].as_str()).collect();

    let mut audio = DMatrix::zeros(n, AUDIO_COLUMNS.len());
    for (i, r) in corpus.records.iter().enumerate() {
        let row = dummy_encode_audio(&corpus.audio[&r.song_id])?;
        for (j, v) in row.iter().enumerate() {
            audio[(i, j)] = *v;
        }
    }
    let audio = FeatureMatrix::uniform(
        audio,
        AUDIO_COLUMNS.iter().map(|s| s.to_string()).collect(),
        Modality::Audio,
        ids.clone(),
    )?;

    let sentiment_rows: Vec<[f64; 4]> = lyrics
        .par_iter()
        .map(|t| vader_sentiment(t, sentiment_lexicon).to_array())
        .collect();
    let sentiment = FeatureMatrix::uniform(
        DMatrix::from_fn(n, 4, |i, j| sentiment_rows[i][j]),
        SENTIMENT_COLUMNS.iter().map(|s| s.to_string()).collect(),
        Modality::Sentiment,
        ids.clone(),
    )?;

    let docs: Vec<TokenSequence> = lyrics.par_iter().map(|t| tokenize_lemmatize(t)).collect();
    let train_docs: Vec<TokenSequence> = train.iter().map(|&i| docs[i].clone()).collect();
    let vocabulary = fit_tfidf(&train_docs, cfg.max_vocab)?;
    let tfidf_rows: Vec<Vec<(usize, f64)>> = docs.par_iter().map(|d| transform_tfidf_sparse(d, &vocabulary)).collect();
    let (tfidf_pca, tfidf_z, tfidf_names) = pca_block("tfidf", "tfidf_pc", &tfidf_rows, vocabulary.len(), &train, cfg)?;
    let tfidf = FeatureMatrix::uniform(tfidf_z, tfidf_names, Modality::Tfidf, ids.clone())?;

    let (xv_rows, xa_rows): (Vec<_>, Vec<_>) = docs.par_iter().map(|d| xanew_features_sparse(d, affect_lexicon)).unzip();
    let d_aff = affect_lexicon.len();
    let (xv_pca, xv_z, xv_names) = pca_block("xanew valence", "xanew_valence_pc", &xv_rows, d_aff, &train, cfg)?;
    let (xa_pca, xa_z, xa_names) = pca_block("xanew arousal", "xanew_arousal_pc", &xa_rows, d_aff, &train, cfg)?;
    let xv = FeatureMatrix::uniform(xv_z, xv_names, Modality::Xanew, ids.clone())?;
    let xa = FeatureMatrix::uniform(xa_z, xa_names, Modality::Xanew, ids.clone())?;
    let xanew = crate::selection::fuse(&[&xv, &xa])?;

    let targets = TargetTable::new(
        corpus.records.iter().map(|r| r.valence_target).collect(),
        corpus.records.iter().map(|r| r.arousal_target).collect(),
        splits,
    )?;
    Ok(FeatureSet {
        audio,
        sentiment,
        tfidf,
        xanew,
        targets,
        models: Some(FeatureModels {
            config: *cfg,
            vocabulary,
            tfidf_pca,
            xanew_valence_pca: xv_pca,
            xanew_arousal_pca: xa_pca,
        }),
    })
}

/// Load a corpus from its three sources and tag splits.
pub fn load_split_corpus(
    dataset_csv: &std::path::Path,
    lyrics_dir: &std::path::Path,
    audio_store: &std::path::Path,
    ratios: crate::dataset::SplitRatios,
    seed: u64,
) -> Result<Corpus> {
    let corpus = crate::dataset::load_corpus(dataset_csv, lyrics_dir, audio_store)?;
    crate::dataset::assign_splits(corpus, ratios, seed)
}
