//! Regenerate the bundled synthetic fixture corpus.
//!
//! `cargo run -p mer-core --example gen_fixture [OUT_DIR]`

use std::path::PathBuf;

use mer_core::synthetic::{bundled_fixture_dir, generate, write_fixture, SyntheticConfig};
use mer_core::text::SentimentLexicon;

fn main() -> mer_core::Result<()> {
    let out = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(bundled_fixture_dir);
    let s = generate(&SyntheticConfig::default(), SentimentLexicon::bundled())?;
    write_fixture(&out, &s)?;
    println!(
        "wrote {} songs to {} (valence R²* {:.4}, arousal R²* {:.4})",
        s.corpus.len(),
        out.display(),
        s.meta.valence_r2_star,
        s.meta.arousal_r2_star
    );
    Ok(())
}
