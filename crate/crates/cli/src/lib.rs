//! Command-line driver for the music emotion recognition pipeline.
//!
//! `fetch` builds the audio store, `features` extracts and persists the
//! feature matrices, `train` fits single models, `evaluate` runs the full
//! experiment and writes the report, `rfe` runs feature elimination alone
//! and `report` re-renders tables from a saved `report.json`.

pub mod commands;
pub mod config;

use std::ffi::OsString;
use std::io::Write;
use std::path::PathBuf;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use mer_core::dataset::Target;
use mer_core::evaluation::ModalityView;
use mer_core::regressors::Family;
use mer_spotify::{ApiCredentials, SpotifyClient, SpotifyError, UreqTransport};

pub use config::RunConfig;

/// Process exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Exit {
    Success = 0,
    /// Some cells or batches failed; the outputs are still written.
    Partial = 1,
    /// Bad usage, missing inputs or credentials, I/O failures.
    Failure = 2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Mlr,
    Rfr,
    Svr,
    Mlp,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Family {
        match f {
            FamilyArg::Mlr => Family::Mlr,
            FamilyArg::Rfr => Family::Rfr,
            FamilyArg::Svr => Family::Svr,
            FamilyArg::Mlp => Family::Mlp,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModalityArg {
    Audio,
    Lyrics,
    Multi,
}

impl From<ModalityArg> for ModalityView {
    fn from(m: ModalityArg) -> ModalityView {
        match m {
            ModalityArg::Audio => ModalityView::Audio,
            ModalityArg::Lyrics => ModalityView::Lyrics,
            ModalityArg::Multi => ModalityView::Multi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Valence,
    Arousal,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Target {
        match t {
            TargetArg::Valence => Target::Valence,
            TargetArg::Arousal => Target::Arousal,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "mer", version, about = "Multi-modal music emotion recognition")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args, Default)]
pub struct GlobalArgs {
    /// Flat `key = value` config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for the parallel stages.
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Restrict to model families (repeatable or comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub only: Vec<FamilyArg>,
    /// Restrict to modality views (repeatable or comma-separated).
    #[arg(long, global = true, value_delimiter = ',')]
    pub modality: Vec<ModalityArg>,
    #[arg(long, global = true)]
    pub dataset: Option<PathBuf>,
    #[arg(long, global = true)]
    pub lyrics_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub audio_store: Option<PathBuf>,
    #[arg(long, global = true)]
    pub affect_lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub sentiment_lexicon: Option<PathBuf>,
    #[arg(long, global = true)]
    pub features_dir: Option<PathBuf>,
    #[arg(long, global = true)]
    pub output_dir: Option<PathBuf>,
    /// Override any config key, e.g. `--set alpha=0.01`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE", value_parser = parse_key_value)]
    pub set: Vec<(String, String)>,
}

fn parse_key_value(s: &str) -> Result<(String, String), String> {
    let (k, v) = s.split_once('=').ok_or_else(|| format!("`{s}` is not KEY=VALUE"))?;
    let k = k.trim();
    if !config::KEYS.contains(&k) {
        return Err(format!("unknown key `{k}`"));
    }
    Ok((k.to_string(), v.trim().to_string()))
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Resolve songs to Spotify tracks and cache their audio features.
    Fetch,
    /// Extract audio, sentiment, TF-IDF and affect features.
    Features,
    /// Grid-search and save single models on the training split.
    Train {
        /// Family to train; defaults to `--only` or all four.
        #[arg(long)]
        model: Option<FamilyArg>,
        /// Target to train; defaults to both.
        #[arg(long)]
        target: Option<TargetArg>,
        /// Use the selected feature subset instead of all columns.
        #[arg(long)]
        selected: bool,
    },
    /// Run the full evaluation and write the report.
    Evaluate {
        /// Exit with status 1 when any cell failed.
        #[arg(long)]
        fail_on_failed_cells: bool,
    },
    /// Recursive feature elimination on the fused audio + sentiment + TF-IDF matrix.
    Rfe {
        #[arg(long)]
        n_keep: Option<usize>,
        #[arg(long)]
        target: Option<TargetArg>,
    },
    /// Re-render the tables of a saved report.
    Report {
        /// Defaults to `<output_dir>/report.json`.
        #[arg(long)]
        input: Option<PathBuf>,
    },
}

impl GlobalArgs {
    /// Command-line settings as config overrides, applied after `--set`.
    fn overrides(&self) -> Vec<(String, String)> {
        let mut o = self.set.clone();
        let mut push = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                o.push((k.to_string(), v));
            }
        };
        let path = |p: &Option<PathBuf>| p.as_ref().map(|p| p.to_string_lossy().into_owned());
        push("seed", self.seed.map(|s| s.to_string()));
        push("jobs", self.jobs.map(|j| j.to_string()));
        push("dataset", path(&self.dataset));
        push("lyrics_dir", path(&self.lyrics_dir));
        push("audio_store", path(&self.audio_store));
        push("affect_lexicon", path(&self.affect_lexicon));
        push("sentiment_lexicon", path(&self.sentiment_lexicon));
        push("features_dir", path(&self.features_dir));
        push("output_dir", path(&self.output_dir));
        let names = |v: Vec<String>| (!v.is_empty()).then(|| v.join(","));
        push("families", names(self.only.iter().map(|f| Family::from(*f).name().to_string()).collect()));
        push("modalities", names(self.modality.iter().map(|m| ModalityView::from(*m).as_str().to_string()).collect()));
        o
    }
}

/// Builds the Spotify client for `fetch`. Tests substitute a fake.
pub type ClientFactory = dyn Fn(&RunConfig) -> Result<SpotifyClient, SpotifyError> + Send + Sync;

/// External services the commands depend on.
pub struct Services {
    pub spotify: Arc<ClientFactory>,
}

impl Default for Services {
    fn default() -> Self {
        Services {
            spotify: Arc::new(|cfg: &RunConfig| {
                let creds = ApiCredentials::from_env()?;
                let transport = Arc::new(UreqTransport::new(cfg.http_timeout));
                SpotifyClient::new(transport, creds, cfg.spotify.clone())
            }),
        }
    }
}

/// Parse `args` (including the program name), run, and report errors on
/// `err`. Never panics on bad input.
pub fn run_from_args<I, T>(args: I, services: &Services, out: &mut (dyn Write + Send), err: &mut dyn Write) -> Exit
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { Exit::Failure } else { Exit::Success };
        }
    };
    run(cli, services, out, err)
}

pub fn run(cli: Cli, services: &Services, out: &mut (dyn Write + Send), err: &mut dyn Write) -> Exit {
    let result = RunConfig::load(cli.global.config.as_deref(), &cli.global.overrides())
        .and_then(|cfg| commands::dispatch(&cli.command, &cfg, services, out));
    match result {
        Ok(exit) => exit,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            Exit::Failure
        }
    }
}
