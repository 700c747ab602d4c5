//! Lyric feature extraction: tokenization and lemmatization, lexicon-based
//! sentiment, TF-IDF unigrams and affect-weighted counts.

pub mod affect;
pub mod lexicon;
pub mod tfidf;
pub mod tokenize;
pub mod vader;

pub use affect::{xanew_features, xanew_features_sparse};
pub use lexicon::{AffectLexicon, SentimentLexicon};
pub use tfidf::{fit_tfidf, transform_tfidf, transform_tfidf_sparse, VocabularyModel, DEFAULT_MAX_VOCAB};
pub use tokenize::{lemmatize, tokenize, tokenize_lemmatize, TokenSequence};
pub use vader::{vader_sentiment, SentimentScores};
