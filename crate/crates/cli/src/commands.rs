//! Subcommand implementations. Each returns the exit status; errors are
//! infrastructure failures and map to [`Exit::Failure`].

use std::io::Write;
use std::path::Path;

use anyhow::{bail, Context, Result};
use mer_core::dataset::{read_audio_store, read_dataset_csv, Split, Target};
use mer_core::evaluation::{evaluate, r2, resolve_subsets, train_cell, EvaluationReport, ScoringVault};
use mer_core::pipeline::{extract_features, load_split_corpus, FeatureSet, FEATURE_FILES, TARGETS_FILE};
use mer_core::regressors::Family;
use mer_core::selection::{fuse, rfe};
use mer_core::text::{AffectLexicon, SentimentLexicon};
use mer_spotify::{fetch_audio_features, resolve_tracks};

use crate::{Command, Exit, RunConfig, Services};

pub fn dispatch(command: &Command, cfg: &RunConfig, services: &Services, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.unwrap_or(0))
        .build()
        .context("building worker pool")?;
    pool.install(|| match command {
        Command::Fetch => fetch(cfg, services, out),
        Command::Features => features(cfg, out),
        Command::Train { model, target, selected } => train(
            cfg,
            model.map(Family::from),
            target.map(Target::from),
            *selected,
            out,
        ),
        Command::Evaluate { fail_on_failed_cells } => run_evaluate(cfg, *fail_on_failed_cells, out),
        Command::Rfe { n_keep, target } => run_rfe(cfg, n_keep.unwrap_or(cfg.evaluation.rfe_n_keep), target.map(Target::from), out),
        Command::Report { input } => report(cfg, input.as_deref(), out),
    })
}

fn targets_or_all(target: Option<Target>) -> Vec<Target> {
    target.map_or_else(|| Target::ALL.to_vec(), |t| vec![t])
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).with_context(|| format!("creating {}", parent.display()))?;
    }
    let mut body = serde_json::to_string_pretty(value)?;
    body.push('\n');
    mer_core::fsio::write_atomic(path, body.as_bytes())?;
    Ok(())
}

fn fetch(cfg: &RunConfig, services: &Services, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let dataset = cfg.existing("dataset")?;
    let store_path = cfg
        .audio_store
        .as_deref()
        .context("`audio_store` is not set; use --audio-store or the config file")?;
    // Credentials first, so a misconfigured run stops before any I/O.
    let client = (services.spotify)(cfg)?;
    let records = read_dataset_csv(dataset)?;
    let cached = if store_path.exists() {
        read_audio_store(store_path)?
    } else {
        Default::default()
    };
    let pending: Vec<_> = records.iter().filter(|r| !cached.contains_key(&r.song_id)).cloned().collect();
    let skipped = records.len() - pending.len();

    let resolved = resolve_tracks(&client, &pending)?;
    write_json(&cfg.output_dir.join("matches.json"), &resolved)?;
    writeln!(
        out,
        "resolved {} of {} songs ({} unmatched)",
        resolved.matches.len(),
        pending.len(),
        resolved.unmatched.len()
    )?;
    let summary = fetch_audio_features(&client, &resolved.matches, store_path)?;
    writeln!(out, "skipped {} cached", skipped + summary.skipped_cached)?;
    writeln!(
        out,
        "stored {} songs in {} batches ({} without features, {} invalid, {} failed)",
        summary.stored,
        summary.batches,
        summary.featureless.len(),
        summary.invalid.len(),
        summary.failed.len()
    )?;
    for e in &summary.errors {
        writeln!(out, "batch error: {e}")?;
    }
    Ok(if summary.failed.is_empty() { Exit::Success } else { Exit::Partial })
}

fn features(cfg: &RunConfig, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let dataset = cfg.existing("dataset")?;
    let lyrics = cfg.existing("lyrics_dir")?;
    let audio = cfg.existing("audio_store")?;
    let affect = AffectLexicon::read(cfg.existing("affect_lexicon")?)?;
    let owned;
    let sentiment = match &cfg.sentiment_lexicon {
        Some(p) => {
            owned = SentimentLexicon::read(p)?;
            &owned
        }
        None => SentimentLexicon::bundled(),
    };
    let corpus = load_split_corpus(dataset, lyrics, audio, cfg.split, cfg.seed)?;
    let set = extract_features(&corpus, sentiment, &affect, &cfg.features)?;
    set.save(&cfg.features_dir)?;
    let count = |s: Split| set.targets.indices(s).len();
    writeln!(
        out,
        "{} songs (train {}, validation {}, test {})",
        set.len(),
        count(Split::Train),
        count(Split::Validation),
        count(Split::Test)
    )?;
    for m in [&set.audio, &set.sentiment, &set.tfidf, &set.xanew] {
        let modality = m.modalities().first().map_or("-".into(), |m| m.to_string());
        writeln!(out, "{modality}: {} columns", m.ncols())?;
    }
    writeln!(out, "wrote {}", cfg.features_dir.display())?;
    Ok(Exit::Success)
}

/// Load the saved feature set, naming any missing file.
fn load_features(cfg: &RunConfig) -> Result<FeatureSet> {
    let dir = &cfg.features_dir;
    for f in FEATURE_FILES.iter().chain([&TARGETS_FILE]) {
        let p = dir.join(f);
        if !p.is_file() {
            bail!("missing feature file {}; run `mer features` first", p.display());
        }
    }
    Ok(FeatureSet::load(dir)?)
}

fn train(cfg: &RunConfig, model: Option<Family>, target: Option<Target>, selected: bool, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let set = load_features(cfg)?;
    let families = model.map_or_else(|| cfg.evaluation.families.clone(), |f| vec![f]);
    let subsets = resolve_subsets(&set, &cfg.evaluation, None, None)?;
    let full = fuse(&[&set.audio, &set.sentiment, &set.tfidf, &set.xanew])?;
    let vault = ScoringVault::new(&set.targets);
    let validation = set.targets.indices(Split::Validation);
    let variant = if selected { "selected" } else { "all" };
    let mut failed = 0;
    for &view in &cfg.evaluation.modalities {
        let columns = subsets.columns(view, selected);
        for &family in &families {
            for t in targets_or_all(target) {
                let label = format!("fit/{view}/{variant}/{}/{t}", family.name());
                let cell = match train_cell(&full, &vault, &columns, family, t, &cfg.evaluation, &label) {
                    Ok(c) => c,
                    Err(e) => {
                        failed += 1;
                        writeln!(out, "{view} {} {t}: failed: {e}", family.name())?;
                        continue;
                    }
                };
                let val = if validation.is_empty() {
                    None
                } else {
                    let x = full.select_columns(&columns)?.values().select_rows(&validation);
                    let y = vault.fit_values(t, &validation)?;
                    cell.model.predict(&x).ok().and_then(|p| r2(&y, &p).ok())
                };
                let path = cfg
                    .output_dir
                    .join("models")
                    .join(format!("{view}_{variant}_{}_{t}.json", family.name()));
                std::fs::create_dir_all(path.parent().expect("has parent"))?;
                mer_core::fsio::write_atomic(&path, cell.model.to_json()?.as_bytes())?;
                let show = |v: Option<f64>| v.map_or("n/a".to_string(), |v| format!("{v:.4}"));
                writeln!(
                    out,
                    "{view} {} {t}: {} features, cv R² {}, validation R² {} -> {}",
                    family.name(),
                    columns.len(),
                    show(cell.cv_r2),
                    show(val),
                    path.display()
                )?;
            }
        }
    }
    Ok(if failed == 0 { Exit::Success } else { Exit::Partial })
}

fn run_evaluate(cfg: &RunConfig, fail_on_failed_cells: bool, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let set = load_features(cfg)?;
    let report = evaluate(&set, &cfg.evaluation)?;
    let files = report.write_dir(&cfg.output_dir)?;
    for c in &report.cells {
        let score = c.outcome.test_r2().map_or("failed".to_string(), |v| format!("{v:.4}"));
        writeln!(out, "{:6} {:4} {:8} {score}", c.modality.as_str(), c.family.name(), c.target.as_str())?;
    }
    let failed = report.failed_cells();
    writeln!(
        out,
        "{} cells, {failed} failed; wrote {} files to {}",
        report.cells.len(),
        files.len(),
        cfg.output_dir.display()
    )?;
    if !report.audit.passed {
        bail!("split audit failed: test targets were read before scoring");
    }
    Ok(if failed > 0 && fail_on_failed_cells { Exit::Partial } else { Exit::Success })
}

fn run_rfe(cfg: &RunConfig, n_keep: usize, target: Option<Target>, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let set = load_features(cfg)?;
    let fused = fuse(&[&set.audio, &set.sentiment, &set.tfidf])?;
    let train = set.targets.indices(Split::Train);
    let x = fused.select_rows(&train);
    for t in targets_or_all(target) {
        let y = set.train_targets(t)?;
        let result = rfe(&x, &y, n_keep)?;
        let path = cfg.output_dir.join(format!("rfe_{t}.json"));
        write_json(&path, &result)?;
        writeln!(out, "{t}: kept {} of {}: {}", result.subset.columns.len(), x.ncols(), result.subset.columns.join(", "))?;
    }
    Ok(Exit::Success)
}

fn report(cfg: &RunConfig, input: Option<&Path>, out: &mut (dyn Write + Send)) -> Result<Exit> {
    let default = cfg.output_dir.join("report.json");
    let input = input.unwrap_or(&default);
    let text = std::fs::read_to_string(input).with_context(|| format!("reading {}", input.display()))?;
    let report = EvaluationReport::from_json(&text)?;
    report.write_dir(&cfg.output_dir)?;
    let md = std::fs::read_to_string(cfg.output_dir.join("report.md"))?;
    out.write_all(md.as_bytes())?;
    Ok(Exit::Success)
}
