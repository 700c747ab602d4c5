//! One function per parser or decoder entry point. Each accepts arbitrary
//! bytes, must never panic, and asserts the properties that hold whenever
//! parsing succeeds. The fuzz targets under `fuzz/` are thin wrappers.

use mer_cli::config::{parse_config, RunConfig};
use mer_core::dataset::{dummy_encode_audio, parse_audio_store, parse_dataset_csv};
use mer_core::evaluation::EvaluationReport;
use mer_core::regressors::{HyperparameterGrid, TrainedRegressor};
use mer_core::selection::FeatureMatrix;
use mer_core::text::{tokenize_lemmatize, vader_sentiment, AffectLexicon, SentimentLexicon};
use mer_spotify::{parse_features, parse_search};

/// Name and entry point of every target, matching `fuzz/fuzz_targets/*.rs`.
pub const TARGETS: &[(&str, fn(&[u8]))] = &[
    ("dataset_csv", dataset_csv),
    ("audio_store", audio_store),
    ("affect_lexicon", affect_lexicon),
    ("sentiment_lexicon", sentiment_lexicon),
    ("feature_matrix_csv", feature_matrix_csv),
    ("model_json", model_json),
    ("grid_spec", grid_spec),
    ("report_json", report_json),
    ("run_config", run_config),
    ("spotify_response", spotify_response),
    ("lyrics_text", lyrics_text),
];

pub fn dataset_csv(data: &[u8]) {
    if let Ok(records) = parse_dataset_csv(data) {
        for r in &records {
            assert!(!r.song_id.is_empty());
            assert!(r.valence_target.is_finite() && r.arousal_target.is_finite());
        }
    }
}

pub fn audio_store(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(store) = parse_audio_store(text) {
        for v in store.values().flatten() {
            if v.validate().is_ok() {
                let row = dummy_encode_audio(v).expect("valid vectors encode");
                // Exactly one key indicator is hot.
                assert_eq!(row[10..].iter().filter(|&&k| k == 1.0).count(), 1);
            }
        }
    }
}

pub fn affect_lexicon(data: &[u8]) {
    if let Ok(lex) = AffectLexicon::parse(data, "fuzz") {
        for (i, w) in lex.words().iter().enumerate() {
            assert_eq!(lex.index_of(w), Some(i));
        }
    }
}

pub fn sentiment_lexicon(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(lex) = SentimentLexicon::parse(text, "fuzz") {
        let s = vader_sentiment("not very good, but GREAT!!", &lex);
        assert!((-1.0..=1.0).contains(&s.compound));
    }
}

pub fn feature_matrix_csv(data: &[u8]) {
    if let Ok(m) = FeatureMatrix::parse_csv(data, "fuzz") {
        let mut out = Vec::new();
        m.write_csv(&mut out).expect("parsed matrices serialize");
        let again = FeatureMatrix::parse_csv(out.as_slice(), "fuzz").expect("round trip");
        assert_eq!(again.column_names(), m.column_names());
        assert_eq!(again.row_ids(), m.row_ids());
    }
}

pub fn model_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = TrainedRegressor::from_json(text) {
        // A model that loads must predict without panicking.
        let x = nalgebra::DMatrix::zeros(2, model.n_features());
        let _ = model.predict(&x);
    }
}

pub fn grid_spec(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(grid) = HyperparameterGrid::parse(text) {
        if grid.len() <= 10_000 {
            assert_eq!(grid.points().len(), grid.len());
        }
    }
}

pub fn report_json(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(report) = EvaluationReport::from_json(text) {
        let _ = report.tables();
        let _ = report.failed_cells();
        let json = report.to_json().expect("loaded reports serialize");
        let again = EvaluationReport::from_json(&json).expect("round trip");
        assert_eq!(again.to_json().expect("serializes"), json);
    }
}

pub fn run_config(data: &[u8]) {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(entries) = parse_config(text) {
        let mut cfg = RunConfig::default();
        for e in entries {
            let _ = cfg.set(&e.key, &e.value, None);
        }
    }
}

pub fn spotify_response(data: &[u8]) {
    let Ok(body) = serde_json::from_slice::<serde_json::Value>(data) else { return };
    let _ = parse_search(&body);
    if let Some(list) = body.get("audio_features").and_then(|v| v.as_array()) {
        for entry in list {
            if let Ok(f) = parse_features(entry) {
                assert!(f.validate().is_ok());
            }
        }
    }
}

pub fn lyrics_text(data: &[u8]) {
    let text = String::from_utf8_lossy(data);
    let _ = tokenize_lemmatize(&text);
    let s = vader_sentiment(&text, SentimentLexicon::bundled());
    assert!((-1.0..=1.0).contains(&s.compound));
    assert!(s.neg >= 0.0 && s.neu >= 0.0 && s.pos >= 0.0);
}
