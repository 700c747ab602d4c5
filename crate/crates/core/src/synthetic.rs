//! Seeded corpora with a known generative model.
//!
//! Audio descriptors are drawn independently. Lyrics mix neutral filler
//! with positive and negative lexicon words in proportions set by a hidden
//! per-song mood, so the sentiment compound score varies across songs but
//! is independent of the audio. Targets are linear in danceability, energy
//! and the compound score of the generated lyrics plus Gaussian noise,
//! which fixes the best attainable R² in closed form:
//! `R²* = signal_var / (signal_var + noise_sd²)`.

use std::collections::BTreeMap;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dataset::{AudioFeatureVector, AudioStore, Corpus, SongRecord};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;
use crate::rng::{derive_labeled, rng};
use crate::text::{lemmatize, tokenize, vader_sentiment, AffectLexicon, SentimentLexicon};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub danceability: f64,
    pub energy: f64,
    pub compound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub n_songs: usize,
    pub seed: u64,
    pub noise_sd: f64,
    pub valence: Weights,
    pub arousal: Weights,
    pub min_words: usize,
    pub max_words: usize,
    /// Probability that a lyric word is drawn from the sentiment pools.
    pub sentiment_rate: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_songs: 500,
            seed: 2024,
            noise_sd: 0.07,
            valence: Weights {
                danceability: 0.7,
                energy: 0.6,
                compound: 0.3,
            },
            arousal: Weights {
                danceability: -0.4,
                energy: 0.9,
                compound: 0.0,
            },
            min_words: 40,
            max_words: 80,
            sentiment_rate: 0.12,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticMeta {
    pub config: SyntheticConfig,
    /// Audio descriptors with a nonzero weight for either target.
    pub injected_audio_features: Vec<String>,
    /// Population variance of the noise-free signal over the generated songs.
    pub valence_signal_variance: f64,
    pub arousal_signal_variance: f64,
    pub valence_r2_star: f64,
    pub arousal_r2_star: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    /// Records carry no split.
    pub corpus: Corpus,
    /// Ratings for every word the generator can emit.
    pub affect: Vec<(String, f64, f64)>,
    pub meta: SyntheticMeta,
}

impl SyntheticCorpus {
    pub fn affect_lexicon(&self) -> Result<AffectLexicon> {
        AffectLexicon::from_entries(self.affect.iter().cloned())
    }
}

const POSITIVE: &[&str] = &[
    "admire", "adore", "affection", "amaze", "applause", "awesome", "beautiful", "beauty", "blissful", "brave",
    "bright", "brilliant", "care", "celebrate", "champion", "cheerful", "confident", "courage", "cute", "delight",
    "devotion", "divine", "ecstasy", "elegant", "enjoy", "euphoria", "excellent", "excite", "faith", "faithful",
    "fantastic", "festival", "fond", "fortunate", "free", "freedom", "friend", "funny", "gain", "glad", "glory",
    "gorgeous", "grace", "grateful", "great", "happy", "harmony", "heaven", "honest", "hope", "hug", "joy",
    "laugh", "lovely", "love", "lucky", "magic", "paradise", "peace", "pleasure", "precious", "pretty", "proud",
    "smile", "sunshine", "sweet", "treasure", "triumph", "trust", "warm", "wonderful", "win",
];

const NEGATIVE: &[&str] = &[
    "abandon", "abuse", "agony", "angry", "anguish", "awful", "betray", "bitter", "blame", "bleed", "broken",
    "brutal", "burden", "chaos", "cheat", "collapse", "cruel", "curse", "damage", "dead", "death", "deceit",
    "defeat", "despair", "destroy", "devil", "dirty", "disgust", "dismal", "dread", "drown", "enemy", "evil",
    "fail", "failure", "fake", "fatal", "fear", "fight", "grief", "guilt", "hate", "horrible", "hurt", "lonely",
    "lose", "misery", "murder", "nightmare", "pain", "panic", "poison", "rage", "regret", "sad", "scream",
    "shame", "sick", "sorrow", "suffer", "terrible", "tragic", "ugly", "victim", "war", "weep", "worry", "wound",
];

const FILLER: &[&str] = &[
    "road", "city", "window", "river", "night", "train", "morning", "street", "ocean", "mountain", "house",
    "door", "table", "letter", "radio", "engine", "garden", "summer", "winter", "autumn", "color", "shadow",
    "mirror", "station", "bridge", "highway", "island", "forest", "candle", "paper", "silver", "horizon",
    "thunder", "rain", "snow", "wind", "stone", "wall", "corner", "ticket", "coffee", "guitar", "piano", "drum",
    "song", "rhythm", "echo", "moon", "star", "cloud", "sky", "sea", "boat", "wheel", "clock", "hour", "minute",
    "yesterday", "tomorrow", "today", "north", "south", "east", "west", "kitchen", "market", "village", "valley",
    "desert", "harbor", "lantern", "photograph", "velvet", "circle", "number", "voice", "motion", "signal",
    "jacket", "bottle", "ladder", "tunnel", "canyon", "meadow", "chapter", "pocket", "wander", "avenue", "cabin",
];

/// A word the scorer and the tokenizer see exactly as written.
fn stable(word: &str, lex: &SentimentLexicon) -> bool {
    tokenize(word) == [word] && lemmatize(word) == word && lex.booster(word).is_none() && !lex.is_negation(word)
}

/// The three word pools filtered against `lex`: (positive, negative, filler).
pub fn word_pools(lex: &SentimentLexicon) -> (Vec<&'static str>, Vec<&'static str>, Vec<&'static str>) {
    let pos = POSITIVE
        .iter()
        .copied()
        .filter(|w| stable(w, lex) && lex.rating(w).is_some_and(|r| r >= 1.0))
        .collect();
    let neg = NEGATIVE
        .iter()
        .copied()
        .filter(|w| stable(w, lex) && lex.rating(w).is_some_and(|r| r <= -1.0))
        .collect();
    let filler = FILLER.iter().copied().filter(|w| stable(w, lex) && !lex.contains(w)).collect();
    (pos, neg, filler)
}

fn population_variance(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / v.len() as f64
}

fn signal(w: &Weights, a: &AudioFeatureVector, compound: f64) -> f64 {
    w.danceability * a.danceability + w.energy * a.energy + w.compound * compound
}

pub fn generate(cfg: &SyntheticConfig, lex: &SentimentLexicon) -> Result<SyntheticCorpus> {
    if cfg.n_songs == 0 || cfg.min_words == 0 || cfg.min_words > cfg.max_words {
        return Err(Error::InvalidArgument("synthetic corpus needs songs and a word range".into()));
    }
    if !(cfg.noise_sd >= 0.0 && cfg.noise_sd.is_finite()) || !(0.0..=1.0).contains(&cfg.sentiment_rate) {
        return Err(Error::InvalidArgument("noise_sd must be >= 0 and sentiment_rate in [0, 1]".into()));
    }
    let (pos, neg, filler) = word_pools(lex);
    if pos.is_empty() || neg.is_empty() || filler.is_empty() {
        return Err(Error::InvalidArgument("sentiment lexicon leaves a word pool empty".into()));
    }
    let mut audio_rng = rng(derive_labeled(cfg.seed, "audio"));
    let mut lyric_rng = rng(derive_labeled(cfg.seed, "lyrics"));
    let mut noise_rng = rng(derive_labeled(cfg.seed, "noise"));
    let noise = Normal::new(0.0, cfg.noise_sd).map_err(|e| Error::InvalidArgument(e.to_string()))?;

    let mut corpus = Corpus::default();
    let (mut sv, mut sa) = (Vec::new(), Vec::new());
    for i in 0..cfg.n_songs {
        let id = format!("SYN{:05}", i + 1);
        let r = &mut audio_rng;
        let key = if r.random_bool(0.03) { -1 } else { r.random_range(0..12) };
        let audio = AudioFeatureVector {
            acousticness: r.random(),
            danceability: r.random(),
            energy: r.random(),
            instrumentalness: r.random::<f64>().powi(3),
            liveness: r.random_range(0.0..0.8),
            loudness: r.random_range(-30.0..-2.0),
            speechiness: r.random_range(0.0..0.5),
            tempo: r.random_range(60.0..200.0),
            valence: r.random(),
            mode: i32::from(r.random_bool(0.6)),
            key,
        };

        let r = &mut lyric_rng;
        let mood: f64 = r.random_range(-1.0..1.0);
        let n_words = r.random_range(cfg.min_words..=cfg.max_words);
        let mut lines = Vec::new();
        let mut line = Vec::new();
        let mut line_len = r.random_range(5..=9);
        for _ in 0..n_words {
            let word = if r.random_bool(cfg.sentiment_rate) {
                if r.random_bool((1.0 + mood) / 2.0) {
                    *pos.choose(r).expect("nonempty")
                } else {
                    *neg.choose(r).expect("nonempty")
                }
            } else {
                *filler.choose(r).expect("nonempty")
            };
            line.push(word);
            if line.len() == line_len {
                lines.push(line.join(" "));
                line.clear();
                line_len = r.random_range(5..=9);
            }
        }
        if !line.is_empty() {
            lines.push(line.join(" "));
        }
        let mut text = lines.join("\n");
        text.push('\n');

        let compound = vader_sentiment(&text, lex).compound;
        let (s_v, s_a) = (signal(&cfg.valence, &audio, compound), signal(&cfg.arousal, &audio, compound));
        sv.push(s_v);
        sa.push(s_a);
        corpus.records.push(SongRecord {
            song_id: id.clone(),
            artist: format!("Synthetic Artist {}", i % 37 + 1),
            title: format!("Song {}", i + 1),
            valence_target: s_v + noise.sample(&mut noise_rng),
            arousal_target: s_a + noise.sample(&mut noise_rng),
            split: None,
        });
        corpus.audio.insert(id.clone(), audio);
        corpus.lyrics.insert(id, text);
    }

    let mut affect_rng = rng(derive_labeled(cfg.seed, "affect"));
    let mut affect = Vec::new();
    for w in pos.iter().chain(&neg).chain(&filler) {
        let base = lex.rating(w).unwrap_or(0.0);
        let v = (5.0 + base + affect_rng.random_range(-0.5..0.5)).clamp(1.0, 9.0);
        let a = affect_rng.random_range(2.0..8.0);
        affect.push((w.to_string(), v, a));
    }

    let mut injected = Vec::new();
    if cfg.valence.danceability != 0.0 || cfg.arousal.danceability != 0.0 {
        injected.push("danceability".to_string());
    }
    if cfg.valence.energy != 0.0 || cfg.arousal.energy != 0.0 {
        injected.push("energy".to_string());
    }
    let (var_v, var_a) = (population_variance(&sv), population_variance(&sa));
    let r2_star = |s: f64| s / (s + cfg.noise_sd * cfg.noise_sd);
    let meta = SyntheticMeta {
        config: cfg.clone(),
        injected_audio_features: injected,
        valence_signal_variance: var_v,
        arousal_signal_variance: var_a,
        valence_r2_star: r2_star(var_v),
        arousal_r2_star: r2_star(var_a),
    };
    Ok(SyntheticCorpus { corpus, affect, meta })
}

/// File names inside a fixture directory.
pub const DATASET_FILE: &str = "dataset.csv";
pub const LYRICS_DIR: &str = "lyrics";
pub const AUDIO_FILE: &str = "audio.json";
pub const AFFECT_FILE: &str = "affect.csv";
pub const META_FILE: &str = "meta.json";

/// Render every fixture file as `(relative path, bytes)`, sorted by path.
pub fn render_fixture(s: &SyntheticCorpus) -> Result<BTreeMap<String, Vec<u8>>> {
    let mut files = BTreeMap::new();
    let csv_err = |e: csv::Error| Error::Format(format!("fixture csv: {e}"));

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["song_id", "artist", "title", "valence", "arousal"]).map_err(csv_err)?;
    for r in &s.corpus.records {
        w.write_record([
            r.song_id.as_str(),
            &r.artist,
            &r.title,
            &r.valence_target.to_string(),
            &r.arousal_target.to_string(),
        ])
        .map_err(csv_err)?;
    }
    files.insert(DATASET_FILE.to_string(), w.into_inner().map_err(|e| Error::Format(e.to_string()))?);

    let store: AudioStore = s.corpus.audio.iter().map(|(k, v)| (k.clone(), Some(*v))).collect();
    let mut audio = serde_json::to_string_pretty(&store)?;
    audio.push('\n');
    files.insert(AUDIO_FILE.to_string(), audio.into_bytes());

    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["word", "valence_mean", "arousal_mean"]).map_err(csv_err)?;
    for (word, v, a) in &s.affect {
        w.write_record([word.as_str(), &v.to_string(), &a.to_string()]).map_err(csv_err)?;
    }
    files.insert(AFFECT_FILE.to_string(), w.into_inner().map_err(|e| Error::Format(e.to_string()))?);

    let mut meta = serde_json::to_string_pretty(&s.meta)?;
    meta.push('\n');
    files.insert(META_FILE.to_string(), meta.into_bytes());

    for (id, text) in &s.corpus.lyrics {
        files.insert(format!("{LYRICS_DIR}/{id}.txt"), text.clone().into_bytes());
    }
    Ok(files)
}

pub fn write_fixture(dir: &Path, s: &SyntheticCorpus) -> Result<()> {
    let lyrics = dir.join(LYRICS_DIR);
    std::fs::create_dir_all(&lyrics).map_err(|e| Error::io(&lyrics, e))?;
    for (rel, bytes) in render_fixture(s)? {
        write_atomic(&dir.join(rel), &bytes)?;
    }
    Ok(())
}

pub fn read_meta(dir: &Path) -> Result<SyntheticMeta> {
    let text = crate::fsio::read_to_string(&dir.join(META_FILE))?;
    Ok(serde_json::from_str(&text)?)
}

/// Directory of the fixture corpus shipped with this crate.
pub fn bundled_fixture_dir() -> std::path::PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join("synthetic")
}
