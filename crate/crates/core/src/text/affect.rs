//! Affect-weighted count vectors over an affect lexicon vocabulary.

use std::collections::BTreeMap;

use super::lexicon::AffectLexicon;
use super::TokenSequence;

/// Sparse `(column, count)` pairs of lexicon words in `doc`, by lemma.
pub fn affect_counts(doc: &TokenSequence, lex: &AffectLexicon) -> Vec<(usize, f64)> {
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for lemma in &doc.lemmas {
        if let Some(i) = lex.index_of(lemma) {
            *counts.entry(i).or_insert(0.0) += 1.0;
        }
    }
    counts.into_iter().collect()
}

/// Sparse valence- and arousal-weighted count rows.
pub fn xanew_features_sparse(doc: &TokenSequence, lex: &AffectLexicon) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let counts = affect_counts(doc, lex);
    let valence = counts.iter().map(|&(i, c)| (i, c * lex.scores(i).0)).collect();
    let arousal = counts.iter().map(|&(i, c)| (i, c * lex.scores(i).1)).collect();
    (valence, arousal)
}

/// `valence[w] = count(w) * valence(w)` and likewise for arousal, one entry
/// per lexicon word in lexicon column order.
pub fn xanew_features(doc: &TokenSequence, lex: &AffectLexicon) -> (Vec<f64>, Vec<f64>) {
    let mut valence = vec![0.0; lex.len()];
    let mut arousal = vec![0.0; lex.len()];
    for (i, c) in affect_counts(doc, lex) {
        let (v, a) = lex.scores(i);
        valence[i] = c * v;
        arousal[i] = c * a;
    }
    (valence, arousal)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize_lemmatize;

    #[test]
    fn happy_happy() {
        let lex = AffectLexicon::stub();
        let (v, a) = xanew_features(&tokenize_lemmatize("happy happy"), lex);
        let i = lex.index_of("happy").unwrap();
        assert_eq!((v[i], a[i]), (16.0, 12.0));
        assert_eq!(v.iter().filter(|&&x| x != 0.0).count(), 1);
    }

    #[test]
    fn lemmas_are_matched() {
        let lex = AffectLexicon::stub();
        let (v, _) = xanew_features(&tokenize_lemmatize("Dreams and smiles"), lex);
        assert_eq!(v[lex.index_of("dream").unwrap()], 7.2);
        assert_eq!(v[lex.index_of("smile").unwrap()], 8.1);
    }

    #[test]
    fn empty_and_oov_give_zero_vectors() {
        let lex = AffectLexicon::stub();
        for text in ["", "the table is in the kitchen"] {
            let (v, a) = xanew_features(&tokenize_lemmatize(text), lex);
            assert_eq!(v.len(), 50);
            assert!(v.iter().chain(&a).all(|&x| x == 0.0));
        }
    }

    proptest::proptest! {
        #[test]
        fn doubling_the_document_doubles_the_features(text in "[a-z ]{0,60}", words in proptest::collection::vec(0usize..50, 0..20)) {
            let lex = AffectLexicon::stub();
            let mut text = text;
            for w in words {
                text.push(' ');
                text.push_str(&lex.words()[w]);
            }
            let doc = tokenize_lemmatize(&text);
            let (v1, a1) = xanew_features(&doc, lex);
            let (v2, a2) = xanew_features(&doc.concat(&doc), lex);
            for i in 0..lex.len() {
                proptest::prop_assert_eq!(v2[i], 2.0 * v1[i]);
                proptest::prop_assert_eq!(a2[i], 2.0 * a1[i]);
            }
        }
    }
}
