//! Run configuration: defaults, then a flat `key = value` file, then
//! command-line overrides.
//!
//! Paths in a config file are resolved against the file's directory; paths
//! given on the command line are taken as-is.

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use mer_core::dataset::SplitRatios;
use mer_core::evaluation::{EvaluationConfig, ModalityView, Sections};
use mer_core::pipeline::FeatureConfig;
use mer_core::regressors::{Family, HyperparameterGrid};
use mer_spotify::ClientConfig;

/// Every accepted key, in documentation order.
pub const KEYS: &[&str] = &[
    "dataset",
    "lyrics_dir",
    "audio_store",
    "affect_lexicon",
    "sentiment_lexicon",
    "features_dir",
    "output_dir",
    "seed",
    "jobs",
    "split.train",
    "split.validation",
    "split.test",
    "max_vocab",
    "pca_k",
    "families",
    "modalities",
    "sections",
    "folds",
    "alpha",
    "rfe_n_keep",
    "audio_selection",
    "lyrics_selection",
    "rank_rule",
    "grid.mlr",
    "grid.rfr",
    "grid.svr",
    "grid.mlp",
    "spotify.token_url",
    "spotify.api_base",
    "spotify.max_attempts",
    "spotify.max_in_flight",
    "spotify.match_threshold",
    "spotify.search_limit",
    "spotify.timeout_secs",
];

/// One `key = value` line with its 1-based line number.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub line: usize,
    pub key: String,
    pub value: String,
}

/// Parse the config syntax. `#` starts a comment anywhere on a line; keys
/// must be known and may appear once.
pub fn parse_config(text: &str) -> Result<Vec<Entry>> {
    let mut out: Vec<Entry> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or_default().trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| anyhow!("line {line}: expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            bail!("line {line}: unknown key `{key}`");
        }
        if let Some(prev) = out.iter().find(|e| e.key == key) {
            bail!("line {line}: `{key}` already set on line {}", prev.line);
        }
        out.push(Entry {
            line,
            key: key.to_string(),
            value: value.to_string(),
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    pub lyrics_dir: Option<PathBuf>,
    pub audio_store: Option<PathBuf>,
    pub affect_lexicon: Option<PathBuf>,
    /// `None` selects the bundled lexicon.
    pub sentiment_lexicon: Option<PathBuf>,
    pub features_dir: PathBuf,
    pub output_dir: PathBuf,
    /// Drives the split, randomized PCA and every model seed.
    pub seed: u64,
    pub jobs: Option<usize>,
    pub split: SplitRatios,
    pub features: FeatureConfig,
    pub evaluation: EvaluationConfig,
    pub spotify: ClientConfig,
    pub http_timeout: Duration,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            dataset: None,
            lyrics_dir: None,
            audio_store: None,
            affect_lexicon: None,
            sentiment_lexicon: None,
            features_dir: PathBuf::from("features"),
            output_dir: PathBuf::from("out"),
            seed: 42,
            jobs: None,
            split: SplitRatios::default(),
            features: FeatureConfig::default(),
            evaluation: EvaluationConfig::default(),
            spotify: ClientConfig::default(),
            http_timeout: Duration::from_secs(30),
        }
    }
}

fn num<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e| anyhow!("`{key}`: cannot parse {value:?}: {e}"))
}

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    let items = value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| num(key, s))
        .collect::<Result<Vec<T>>>()?;
    if items.is_empty() {
        bail!("`{key}`: empty list");
    }
    Ok(items)
}

fn sections(value: &str) -> Result<Sections> {
    let mut s = Sections::NONE;
    for name in value.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match name {
            "all" => s = Sections::ALL,
            "grid" => s.grid = true,
            "coefficients" => s.coefficients = true,
            "subsets" => s.subsets = true,
            "combinations" => s.combinations = true,
            "significance" => s.significance = true,
            "rfe" => s.rfe = true,
            other => bail!("`sections`: unknown section `{other}`"),
        }
    }
    Ok(s)
}

impl RunConfig {
    /// Apply one setting. Relative paths are joined onto `base` when given.
    pub fn set(&mut self, key: &str, value: &str, base: Option<&Path>) -> Result<()> {
        let path = || {
            let p = PathBuf::from(value);
            match base {
                Some(b) if p.is_relative() => b.join(p),
                _ => p,
            }
        };
        let ev = &mut self.evaluation;
        match key {
            "dataset" => self.dataset = Some(path()),
            "lyrics_dir" => self.lyrics_dir = Some(path()),
            "audio_store" => self.audio_store = Some(path()),
            "affect_lexicon" => self.affect_lexicon = Some(path()),
            "sentiment_lexicon" => self.sentiment_lexicon = Some(path()),
            "features_dir" => self.features_dir = path(),
            "output_dir" => self.output_dir = path(),
            "seed" => self.seed = num(key, value)?,
            "jobs" => self.jobs = Some(num(key, value)?),
            "split.train" => self.split.train = num(key, value)?,
            "split.validation" => self.split.validation = num(key, value)?,
            "split.test" => self.split.test = num(key, value)?,
            "max_vocab" => self.features.max_vocab = num(key, value)?,
            "pca_k" => self.features.pca_k = num(key, value)?,
            "families" => ev.families = list(key, value)?,
            "modalities" => ev.modalities = list::<ModalityView>(key, value)?,
            "sections" => ev.sections = sections(value)?,
            "folds" => ev.folds = num(key, value)?,
            "alpha" => ev.alpha = num(key, value)?,
            "rfe_n_keep" => ev.rfe_n_keep = num(key, value)?,
            "audio_selection" => ev.audio_selection = num(key, value)?,
            "lyrics_selection" => ev.lyrics_selection = num(key, value)?,
            "rank_rule" => ev.rank_rule = num(key, value)?,
            "spotify.token_url" => self.spotify.endpoints.token_url = value.to_string(),
            "spotify.api_base" => self.spotify.endpoints.api_base = value.trim_end_matches('/').to_string(),
            "spotify.max_attempts" => self.spotify.max_attempts = num(key, value)?,
            "spotify.max_in_flight" => self.spotify.max_in_flight = num(key, value)?,
            "spotify.match_threshold" => self.spotify.match_threshold = num(key, value)?,
            "spotify.search_limit" => self.spotify.search_limit = num(key, value)?,
            "spotify.timeout_secs" => self.http_timeout = Duration::from_secs(num(key, value)?),
            _ => match key.strip_prefix("grid.") {
                Some(f) if KEYS.contains(&key) => {
                    let family: Family = num(key, f)?;
                    let grid = HyperparameterGrid::parse(value).with_context(|| format!("`{key}`"))?;
                    ev.grids.insert(family, grid);
                }
                _ => bail!("unknown key `{key}`"),
            },
        }
        Ok(())
    }

    /// Defaults, then `file`, then `overrides` in order.
    pub fn load(file: Option<&Path>, overrides: &[(String, String)]) -> Result<RunConfig> {
        let mut cfg = RunConfig::default();
        if let Some(file) = file {
            let text = std::fs::read_to_string(file).with_context(|| format!("reading config {}", file.display()))?;
            let base = file.parent().unwrap_or(Path::new(""));
            for e in parse_config(&text).with_context(|| format!("config {}", file.display()))? {
                cfg.set(&e.key, &e.value, Some(base))
                    .with_context(|| format!("config {} line {}", file.display(), e.line))?;
            }
        }
        for (k, v) in overrides {
            cfg.set(k, v, None)?;
        }
        cfg.finish()?;
        Ok(cfg)
    }

    /// Propagate the seed and check cross-field invariants.
    fn finish(&mut self) -> Result<()> {
        self.features.seed = self.seed;
        self.evaluation.seed = self.seed;
        self.split.validate()?;
        if self.features.pca_k == 0 {
            bail!("pca_k must be at least 1");
        }
        if self.jobs == Some(0) {
            bail!("jobs must be at least 1");
        }
        self.evaluation.validate()?;
        self.spotify.validate()?;
        Ok(())
    }

    /// The value of a required path setting, which must exist.
    pub fn existing(&self, key: &str) -> Result<&Path> {
        let p = match key {
            "dataset" => &self.dataset,
            "lyrics_dir" => &self.lyrics_dir,
            "audio_store" => &self.audio_store,
            "affect_lexicon" => &self.affect_lexicon,
            _ => bail!("`{key}` is not a required path"),
        };
        let p = p.as_deref().ok_or_else(|| anyhow!("`{key}` is not set; use --{} or the config file", key.replace('_', "-")))?;
        if !p.exists() {
            bail!("{key} {} does not exist", p.display());
        }
        Ok(p)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn comments_blanks_and_spacing() {
        let e = parse_config("# header\n\nseed = 7  # trailing\n  alpha=0.01\n").unwrap();
        assert_eq!(e.len(), 2);
        assert_eq!((e[0].line, e[0].key.as_str(), e[0].value.as_str()), (3, "seed", "7"));
        assert_eq!(e[1].value, "0.01");
    }

    #[test]
    fn rejects_unknown_duplicate_and_bare_lines() {
        assert!(parse_config("colour = red").unwrap_err().to_string().contains("unknown key"));
        assert!(parse_config("seed = 1\nseed = 2").unwrap_err().to_string().contains("line 1"));
        assert!(parse_config("seed").unwrap_err().to_string().contains("line 1"));
    }

    #[test]
    fn precedence_is_cli_then_file_then_default() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("run.conf");
        std::fs::write(&file, "seed = 5\npca_k = 20\ndataset = data/songs.csv\n").unwrap();
        let cfg = RunConfig::load(Some(&file), &[("seed".into(), "9".into())]).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.features.seed, 9);
        assert_eq!(cfg.evaluation.seed, 9);
        assert_eq!(cfg.features.pca_k, 20);
        assert_eq!(cfg.evaluation.alpha, 0.05);
        assert_eq!(cfg.dataset.unwrap(), dir.path().join("data/songs.csv"));
    }

    #[test]
    fn typed_values() {
        let mut cfg = RunConfig::default();
        cfg.set("families", "mlr, svr", None).unwrap();
        cfg.set("modalities", "audio", None).unwrap();
        cfg.set("sections", "grid,rfe", None).unwrap();
        cfg.set("grid.svr", "C=1|10;epsilon=0.1", None).unwrap();
        assert_eq!(cfg.evaluation.families, vec![Family::Mlr, Family::Svr]);
        assert_eq!(cfg.evaluation.modalities, vec![ModalityView::Audio]);
        assert!(cfg.evaluation.sections.grid && cfg.evaluation.sections.rfe && !cfg.evaluation.sections.subsets);
        assert_eq!(cfg.evaluation.grid(Family::Svr).len(), 2);
        assert!(cfg.set("families", "lasso", None).is_err());
        assert!(cfg.set("pca_k", "many", None).is_err());
    }

    #[test]
    fn invariants_checked_at_load() {
        assert!(RunConfig::load(None, &[("pca_k".into(), "0".into())]).is_err());
        assert!(RunConfig::load(None, &[("split.train".into(), "0.9".into())]).is_err());
        assert!(RunConfig::load(None, &[]).is_ok());
    }

    #[test]
    fn every_key_is_settable() {
        let sample = |k: &str| match k {
            "families" => "mlr",
            "modalities" => "multi",
            "sections" => "all",
            "audio_selection" => "published",
            "lyrics_selection" => "search",
            "rank_rule" => "mean_rank",
            k if k.starts_with("grid.") => "a=1",
            k if k.starts_with("split.") || k == "alpha" || k.ends_with("threshold") => "0.5",
            k if k.ends_with("url") || k.ends_with("base") => "http://localhost",
            "seed" | "jobs" | "max_vocab" | "pca_k" | "folds" | "rfe_n_keep" => "3",
            k if k.starts_with("spotify.") => "3",
            _ => "some/path",
        };
        for k in KEYS {
            RunConfig::default().set(k, sample(k), None).unwrap_or_else(|e| panic!("{k}: {e}"));
        }
    }
}
