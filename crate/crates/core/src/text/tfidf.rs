//! TF-IDF unigram vectors over lemmas.
//!
//! `idf(t) = ln((1 + n_docs) / (1 + df(t))) + 1`, raw term counts, L2 row
//! normalization. Columns are in lexicographic term order.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use super::TokenSequence;
use crate::error::{Error, Result};

pub const DEFAULT_MAX_VOCAB: usize = 20_000;
const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "VocabularyFile", into = "VocabularyFile")]
pub struct VocabularyModel {
    terms: Vec<String>,
    idf: Vec<f64>,
    n_docs: usize,
    index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyFile {
    version: u32,
    n_docs: usize,
    terms: Vec<String>,
    idf: Vec<f64>,
}

impl From<VocabularyModel> for VocabularyFile {
    fn from(vm: VocabularyModel) -> Self {
        VocabularyFile {
            version: FORMAT_VERSION,
            n_docs: vm.n_docs,
            terms: vm.terms,
            idf: vm.idf,
        }
    }
}

impl TryFrom<VocabularyFile> for VocabularyModel {
    type Error = Error;

    fn try_from(f: VocabularyFile) -> Result<Self> {
        if f.version != FORMAT_VERSION {
            return Err(Error::Format(format!("vocabulary model version {}", f.version)));
        }
        if f.terms.len() != f.idf.len() {
            return Err(Error::DimensionMismatch {
                expected: f.terms.len(),
                got: f.idf.len(),
            });
        }
        if f.idf.iter().any(|v| !v.is_finite() || *v < 1.0) {
            return Err(Error::Format("idf values must be finite and >= 1".into()));
        }
        let mut index = HashMap::with_capacity(f.terms.len());
        for (i, t) in f.terms.iter().enumerate() {
            if index.insert(t.clone(), i).is_some() {
                return Err(Error::Format(format!("duplicate vocabulary term `{t}`")));
            }
        }
        Ok(VocabularyModel {
            terms: f.terms,
            idf: f.idf,
            n_docs: f.n_docs,
            index,
        })
    }
}

impl VocabularyModel {
    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.index.get(term).copied()
    }

    pub fn idf_of(&self, term: &str) -> Option<f64> {
        self.index_of(term).map(|i| self.idf[i])
    }
}

/// Fit the vocabulary and idf weights on the training documents. When more
/// than `max_vocab` distinct lemmas occur, the highest document-frequency
/// terms are kept, ties broken by term order.
pub fn fit_tfidf(train_docs: &[TokenSequence], max_vocab: usize) -> Result<VocabularyModel> {
    if max_vocab == 0 {
        return Err(Error::InvalidArgument("max_vocab must be >= 1".into()));
    }
    let mut df: BTreeMap<&str, usize> = BTreeMap::new();
    for doc in train_docs {
        let mut seen: Vec<&str> = doc.lemmas.iter().map(String::as_str).collect();
        seen.sort_unstable();
        seen.dedup();
        for t in seen {
            *df.entry(t).or_insert(0) += 1;
        }
    }
    if df.is_empty() {
        return Err(Error::Empty("all training documents are empty".into()));
    }
    let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
    if ranked.len() > max_vocab {
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
        ranked.truncate(max_vocab);
        ranked.sort_by(|a, b| a.0.cmp(b.0));
    }
    let n = train_docs.len() as f64;
    let file = VocabularyFile {
        version: FORMAT_VERSION,
        n_docs: train_docs.len(),
        terms: ranked.iter().map(|(t, _)| t.to_string()).collect(),
        idf: ranked.iter().map(|&(_, d)| ((1.0 + n) / (1.0 + d as f64)).ln() + 1.0).collect(),
    };
    VocabularyModel::try_from(file)
}

/// Sparse TF-IDF row as `(column, weight)` pairs in column order.
pub fn transform_tfidf_sparse(doc: &TokenSequence, vm: &VocabularyModel) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for lemma in &doc.lemmas {
        if let Some(i) = vm.index_of(lemma) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    let mut row: Vec<(usize, f64)> = counts.into_iter().map(|(i, c)| (i, c * vm.idf[i])).collect();
    let norm = row.iter().map(|(_, v)| v * v).sum::<f64>().sqrt();
    if norm > 0.0 {
        for (_, v) in &mut row {
            *v /= norm;
        }
    }
    row
}

pub fn transform_tfidf(doc: &TokenSequence, vm: &VocabularyModel) -> Vec<f64> {
    let mut out = vec![0.0; vm.len()];
    for (i, v) in transform_tfidf_sparse(doc, vm) {
        out[i] = v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize_lemmatize;

    fn docs(texts: &[&str]) -> Vec<TokenSequence> {
        texts.iter().map(|t| tokenize_lemmatize(t)).collect()
    }

    #[test]
    fn two_document_idf() {
        let vm = fit_tfidf(&docs(&["a b", "a c"]), 10).unwrap();
        assert_eq!(vm.terms(), ["a", "b", "c"]);
        assert!((vm.idf_of("a").unwrap() - 1.0).abs() < 1e-15);
        let expect = (3.0f64 / 2.0).ln() + 1.0;
        assert!((vm.idf_of("b").unwrap() - expect).abs() < 1e-15);
        assert!((vm.idf_of("c").unwrap() - 1.4055).abs() < 1e-4);
    }

    #[test]
    fn two_document_transform() {
        let vm = fit_tfidf(&docs(&["a b", "a c"]), 10).unwrap();
        let v = transform_tfidf(&tokenize_lemmatize("a b"), &vm);
        // pre-norm (1, 1.4055, 0)
        let norm = (1.0 + 1.4055f64.powi(2)).sqrt();
        assert!((v[0] - 1.0 / norm).abs() < 1e-3 && (v[0] - 0.580).abs() < 1e-3);
        assert!((v[1] - 0.815).abs() < 1e-3);
        assert_eq!(v[2], 0.0);
    }

    #[test]
    fn single_document_idf_is_one() {
        let vm = fit_tfidf(&docs(&["love song love"]), 10).unwrap();
        assert!(vm.idf().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn max_vocab_keeps_highest_df() {
        let vm = fit_tfidf(&docs(&["a b", "a c"]), 1).unwrap();
        assert_eq!(vm.terms(), ["a"]);
        let vm = fit_tfidf(&docs(&["z b", "z c", "b"]), 2).unwrap();
        assert_eq!(vm.terms(), ["b", "z"]);
    }

    #[test]
    fn empty_and_oov_docs_are_zero() {
        let vm = fit_tfidf(&docs(&["a b", "a c"]), 10).unwrap();
        assert!(transform_tfidf(&TokenSequence::default(), &vm).iter().all(|&v| v == 0.0));
        assert!(transform_tfidf(&tokenize_lemmatize("zebra"), &vm).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn all_empty_corpus_is_an_error() {
        assert!(fit_tfidf(&docs(&["", "..."]), 10).is_err());
        assert!(fit_tfidf(&[], 10).is_err());
        assert!(fit_tfidf(&docs(&["a"]), 0).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let vm = fit_tfidf(&docs(&["a b", "a c", "b d"]), 10).unwrap();
        let json = serde_json::to_string(&vm).unwrap();
        let back: VocabularyModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vm);
        let bad = r#"{"version":1,"n_docs":1,"terms":["a","a"],"idf":[1.0,1.0]}"#;
        assert!(serde_json::from_str::<VocabularyModel>(bad).is_err());
        let bad = r#"{"version":9,"n_docs":1,"terms":["a"],"idf":[1.0]}"#;
        assert!(serde_json::from_str::<VocabularyModel>(bad).is_err());
    }

    proptest::proptest! {
        #[test]
        fn rows_have_unit_or_zero_norm(
            train in proptest::collection::vec("[a-e ]{0,12}", 1..6),
            doc in "[a-g ]{0,20}",
        ) {
            let train = docs(&train.iter().map(String::as_str).collect::<Vec<_>>());
            if let Ok(vm) = fit_tfidf(&train, 3) {
                let v = transform_tfidf(&tokenize_lemmatize(&doc), &vm);
                let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                proptest::prop_assert!(norm == 0.0 || (norm - 1.0).abs() < 1e-9);
                proptest::prop_assert!(vm.idf().iter().all(|&x| x >= 1.0));
            }
        }
    }
}
