//! Run the full evaluation on the bundled synthetic fixture and print the
//! modality grid.
//!
//! `cargo run --release -p mer-core --example evaluate_fixture [OUT_DIR]`

use std::time::Instant;

use mer_core::dataset::SplitRatios;
use mer_core::evaluation::{evaluate, EvaluationConfig};
use mer_core::pipeline::{extract_features, load_split_corpus, FeatureConfig};
use mer_core::synthetic::{bundled_fixture_dir, AFFECT_FILE, AUDIO_FILE, DATASET_FILE, LYRICS_DIR};
use mer_core::text::{AffectLexicon, SentimentLexicon};

fn main() -> mer_core::Result<()> {
    let dir = bundled_fixture_dir();
    let start = Instant::now();
    let corpus = load_split_corpus(
        &dir.join(DATASET_FILE),
        &dir.join(LYRICS_DIR),
        &dir.join(AUDIO_FILE),
        SplitRatios::default(),
        42,
    )?;
    let affect = AffectLexicon::read(&dir.join(AFFECT_FILE))?;
    let features = extract_features(&corpus, SentimentLexicon::bundled(), &affect, &FeatureConfig::default())?;
    println!("features in {:.1?}", start.elapsed());
    let report = evaluate(&features, &EvaluationConfig::default())?;
    println!("evaluation in {:.1?}", start.elapsed());
    for c in &report.cells {
        println!("{:7} {:4} {:8} {:?}", c.modality.as_str(), c.family.name(), c.target.as_str(), c.outcome.test_r2());
    }
    if let Some(out) = std::env::args().nth(1) {
        report.write_dir(std::path::Path::new(&out))?;
    }
    Ok(())
}
