//! Song corpus ingestion.
//!
//! A corpus is the intersection of three sources: the target CSV
//! (`song_id,artist,title,valence,arousal`), a directory of
//! `<song_id>.txt` lyric files and an audio feature store. Songs missing
//! from any source are dropped and counted.

mod audio;
mod split;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::fs;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use audio::{
    base_feature_of, dummy_encode_audio, parse_audio_store, read_audio_store, write_audio_store,
    AudioFeatureVector, AudioStore, AUDIO_COLUMNS, BASE_AUDIO_FEATURES, ENCODED_AUDIO_DIM,
    KEY_COLUMN_OFFSET,
};
pub use split::{assign_splits, split_sizes, SplitRatios};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Validation,
    Test,
}

impl Split {
    pub const ALL: [Split; 3] = [Split::Train, Split::Validation, Split::Test];

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }

    pub fn parse(s: &str) -> Option<Split> {
        match s.trim().to_ascii_lowercase().as_str() {
            "train" => Some(Split::Train),
            "validation" | "val" => Some(Split::Validation),
            "test" => Some(Split::Test),
            _ => None,
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Regression target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Target {
    Valence,
    Arousal,
}

impl Target {
    pub const ALL: [Target; 2] = [Target::Valence, Target::Arousal];

    pub fn as_str(self) -> &'static str {
        match self {
            Target::Valence => "valence",
            Target::Arousal => "arousal",
        }
    }

    pub fn of(self, record: &SongRecord) -> f64 {
        match self {
            Target::Valence => record.valence_target,
            Target::Arousal => record.arousal_target,
        }
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SongRecord {
    pub song_id: String,
    pub artist: String,
    pub title: String,
    pub valence_target: f64,
    pub arousal_target: f64,
    /// `None` until [`assign_splits`] has run.
    pub split: Option<Split>,
}

/// Songs with all three modalities present, ordered by `song_id`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Corpus {
    pub records: Vec<SongRecord>,
    pub audio: BTreeMap<String, AudioFeatureVector>,
    pub lyrics: BTreeMap<String, String>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.records
            .iter()
            .enumerate()
            .filter(|(_, r)| r.split == Some(split))
            .map(|(i, _)| i)
            .collect()
    }

    /// Check the cross-source invariants. Ingestion guarantees them; corpora
    /// assembled by hand (tests, generators) can call this.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        for r in &self.records {
            if r.song_id.is_empty() {
                return Err(Error::InvalidArgument("empty song_id".into()));
            }
            if !seen.insert(r.song_id.as_str()) {
                return Err(Error::DuplicateSongId(r.song_id.clone()));
            }
            if !r.valence_target.is_finite() || !r.arousal_target.is_finite() {
                return Err(Error::NonFinite(format!("targets of {}", r.song_id)));
            }
            if !self.audio.contains_key(&r.song_id) || !self.lyrics.contains_key(&r.song_id) {
                return Err(Error::InvalidArgument(format!(
                    "song {} lacks audio or lyrics",
                    r.song_id
                )));
            }
        }
        Ok(())
    }
}

/// Counts reported by [`load_corpus_with_summary`].
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestSummary {
    pub csv_rows: usize,
    pub missing_audio: usize,
    pub featureless_audio: usize,
    pub invalid_audio: usize,
    pub missing_lyrics: usize,
    pub unreadable_lyrics: usize,
    pub kept: usize,
}

impl IngestSummary {
    pub fn dropped(&self) -> usize {
        self.csv_rows - self.kept
    }
}

const REQUIRED_COLUMNS: [&str; 5] = ["song_id", "artist", "title", "valence", "arousal"];

/// Parse the target CSV. Columns are located by header name (extra columns
/// are ignored), quoted fields are allowed, and every target must parse as
/// a finite real. Duplicate ids are an error.
pub fn parse_dataset_csv<R: Read>(reader: R) -> Result<Vec<SongRecord>> {
    const SOURCE: &str = "dataset csv";
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let mut rows = rdr.records();
    let header = match rows.next() {
        None => return Ok(Vec::new()),
        Some(h) => h.map_err(|e| Error::ingest(SOURCE, 1, e.to_string()))?,
    };
    let mut index = [usize::MAX; 5];
    for (i, name) in header.iter().enumerate() {
        let name = name.trim_start_matches('\u{feff}').to_ascii_lowercase();
        if let Some(slot) = REQUIRED_COLUMNS.iter().position(|c| *c == name) {
            if index[slot] == usize::MAX {
                index[slot] = i;
            }
        }
    }
    if let Some(missing) = index.iter().position(|&i| i == usize::MAX) {
        return Err(Error::ingest(
            SOURCE,
            1,
            format!("missing required column `{}`", REQUIRED_COLUMNS[missing]),
        ));
    }

    let mut records = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, row) in rows.enumerate() {
        let line = n + 2;
        let row = row.map_err(|e| Error::ingest(SOURCE, line, e.to_string()))?;
        if row.iter().all(|f| f.is_empty()) {
            continue;
        }
        let field = |slot: usize| -> Result<&str> {
            row.get(index[slot]).ok_or_else(|| {
                Error::ingest(SOURCE, line, format!("missing field `{}`", REQUIRED_COLUMNS[slot]))
            })
        };
        let song_id = field(0)?.to_string();
        if song_id.is_empty() {
            return Err(Error::ingest(SOURCE, line, "empty song_id"));
        }
        let target = |slot: usize| -> Result<f64> {
            let raw = field(slot)?;
            let v: f64 = raw.parse().map_err(|_| {
                Error::ingest(SOURCE, line, format!("`{}` is not a number: {raw:?}", REQUIRED_COLUMNS[slot]))
            })?;
            if !v.is_finite() {
                return Err(Error::ingest(
                    SOURCE,
                    line,
                    format!("`{}` must be finite, got {raw:?}", REQUIRED_COLUMNS[slot]),
                ));
            }
            Ok(v)
        };
        let record = SongRecord {
            artist: field(1)?.to_string(),
            title: field(2)?.to_string(),
            valence_target: target(3)?,
            arousal_target: target(4)?,
            split: None,
            song_id,
        };
        if !seen.insert(record.song_id.clone()) {
            return Err(Error::DuplicateSongId(record.song_id));
        }
        records.push(record);
    }
    Ok(records)
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<SongRecord>> {
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_dataset_csv(file)
}

/// Song ids become file names, so anything that could escape the lyrics
/// directory is treated as having no lyrics file.
fn is_safe_file_stem(id: &str) -> bool {
    !id.is_empty()
        && !id.starts_with('.')
        && !id.contains(['/', '\\', '\0'])
        && !id.contains(':')
}

/// Join the three sources into a [`Corpus`].
pub fn load_corpus(dataset_csv: &Path, lyrics_dir: &Path, audio_store: &Path) -> Result<Corpus> {
    load_corpus_with_summary(dataset_csv, lyrics_dir, audio_store).map(|(c, _)| c)
}

pub fn load_corpus_with_summary(
    dataset_csv: &Path,
    lyrics_dir: &Path,
    audio_store: &Path,
) -> Result<(Corpus, IngestSummary)> {
    let records = read_dataset_csv(dataset_csv)?;
    let store = read_audio_store(audio_store)?;
    if !lyrics_dir.is_dir() {
        return Err(Error::io(
            lyrics_dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "lyrics directory not found"),
        ));
    }
    let (corpus, summary) = join_sources(records, &store, |id| {
        if !is_safe_file_stem(id) {
            return LyricsLookup::Missing;
        }
        let path = lyrics_dir.join(format!("{id}.txt"));
        match fs::read(&path) {
            Ok(bytes) => match String::from_utf8(bytes) {
                Ok(text) => LyricsLookup::Found(text),
                Err(_) => {
                    log::warn!("dropping {id}: lyrics file {} is not valid UTF-8", path.display());
                    LyricsLookup::Unreadable
                }
            },
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => LyricsLookup::Missing,
            Err(e) => {
                log::warn!("dropping {id}: cannot read {}: {e}", path.display());
                LyricsLookup::Unreadable
            }
        }
    });
    log::info!(
        "corpus: {} of {} songs kept ({} missing audio, {} feature-less, {} invalid audio, {} missing lyrics, {} unreadable lyrics)",
        summary.kept,
        summary.csv_rows,
        summary.missing_audio,
        summary.featureless_audio,
        summary.invalid_audio,
        summary.missing_lyrics,
        summary.unreadable_lyrics
    );
    Ok((corpus, summary))
}

pub enum LyricsLookup {
    Found(String),
    Missing,
    Unreadable,
}

/// Intersection logic shared by file-based loading and in-memory corpora.
pub fn join_sources<F>(
    mut records: Vec<SongRecord>,
    store: &AudioStore,
    mut lyrics_for: F,
) -> (Corpus, IngestSummary)
where
    F: FnMut(&str) -> LyricsLookup,
{
    records.sort_by(|a, b| a.song_id.cmp(&b.song_id));
    let mut summary = IngestSummary {
        csv_rows: records.len(),
        ..IngestSummary::default()
    };
    let mut corpus = Corpus::default();
    for record in records {
        let audio = match store.get(&record.song_id) {
            None => {
                summary.missing_audio += 1;
                continue;
            }
            Some(None) => {
                summary.featureless_audio += 1;
                continue;
            }
            Some(Some(a)) => *a,
        };
        if let Err(e) = audio.validate() {
            log::warn!("dropping {}: {e}", record.song_id);
            summary.invalid_audio += 1;
            continue;
        }
        let lyrics = match lyrics_for(&record.song_id) {
            LyricsLookup::Found(text) => text,
            LyricsLookup::Missing => {
                summary.missing_lyrics += 1;
                continue;
            }
            LyricsLookup::Unreadable => {
                summary.unreadable_lyrics += 1;
                continue;
            }
        };
        corpus.audio.insert(record.song_id.clone(), audio);
        corpus.lyrics.insert(record.song_id.clone(), lyrics);
        corpus.records.push(record);
    }
    summary.kept = corpus.records.len();
    (corpus, summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn audio(key: i32) -> AudioFeatureVector {
        AudioFeatureVector {
            acousticness: 0.3,
            danceability: 0.5,
            energy: 0.5,
            instrumentalness: 0.1,
            liveness: 0.1,
            loudness: -8.0,
            speechiness: 0.1,
            tempo: 110.0,
            valence: 0.4,
            mode: 0,
            key,
        }
    }

    #[test]
    fn csv_columns_are_found_by_name_and_quotes_allowed() {
        let csv = "title,song_id,arousal,artist,valence,extra\n\"Hey, Jude\",s1,0.5,The Beatles,-0.25,x\n";
        let recs = parse_dataset_csv(csv.as_bytes()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].title, "Hey, Jude");
        assert_eq!(recs[0].song_id, "s1");
        assert_eq!(recs[0].valence_target, -0.25);
        assert_eq!(recs[0].arousal_target, 0.5);
    }

    #[test]
    fn nan_target_is_an_error_naming_the_row() {
        let csv = "song_id,artist,title,valence,arousal\ns1,a,t,0.1,0.2\ns2,a,t,NaN,0.2\n";
        let err = parse_dataset_csv(csv.as_bytes()).unwrap_err();
        match err {
            Error::Ingest { row, .. } => assert_eq!(row, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn duplicate_ids_and_missing_columns_are_errors() {
        let dup = "song_id,artist,title,valence,arousal\ns1,a,t,0,0\ns1,b,u,1,1\n";
        assert!(matches!(parse_dataset_csv(dup.as_bytes()), Err(Error::DuplicateSongId(_))));
        let missing = "song_id,artist,title,valence\ns1,a,t,0\n";
        assert!(matches!(parse_dataset_csv(missing.as_bytes()), Err(Error::Ingest { row: 1, .. })));
    }

    #[test]
    fn empty_csv_gives_empty_corpus() {
        assert!(parse_dataset_csv("".as_bytes()).unwrap().is_empty());
        let header_only = "song_id,artist,title,valence,arousal\n";
        assert!(parse_dataset_csv(header_only.as_bytes()).unwrap().is_empty());
    }

    #[test]
    fn intersection_drops_songs_missing_a_source() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("data.csv");
        fs::write(
            &csv_path,
            "song_id,artist,title,valence,arousal\nc,x,y,0.1,0.2\na,x,y,0.3,0.4\nb,x,y,0.5,0.6\n",
        )
        .unwrap();
        let lyrics = dir.path().join("lyrics");
        fs::create_dir(&lyrics).unwrap();
        fs::write(lyrics.join("a.txt"), "hello love").unwrap();
        fs::write(lyrics.join("c.txt"), "sad song").unwrap();
        let mut store = AudioStore::new();
        store.insert("a".into(), Some(audio(1)));
        store.insert("c".into(), Some(audio(-1)));
        let store_path = dir.path().join("audio.json");
        write_audio_store(&store_path, &store).unwrap();

        let (corpus, summary) = load_corpus_with_summary(&csv_path, &lyrics, &store_path).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(summary.dropped(), 1);
        assert_eq!(summary.missing_audio, 1);
        let ids: Vec<_> = corpus.records.iter().map(|r| r.song_id.as_str()).collect();
        assert_eq!(ids, ["a", "c"]);
        corpus.validate().unwrap();

        // reloading is stable
        let again = load_corpus(&csv_path, &lyrics, &store_path).unwrap();
        assert_eq!(again, corpus);
    }

    #[test]
    fn unreadable_lyrics_and_invalid_audio_are_dropped() {
        let records: Vec<SongRecord> = ["a", "b", "c", "../x"]
            .iter()
            .map(|id| SongRecord {
                song_id: id.to_string(),
                artist: String::new(),
                title: String::new(),
                valence_target: 0.0,
                arousal_target: 0.0,
                split: None,
            })
            .collect();
        let mut store = AudioStore::new();
        store.insert("a".into(), Some(audio(0)));
        let mut bad = audio(0);
        bad.energy = 1.3;
        store.insert("b".into(), Some(bad));
        store.insert("c".into(), Some(audio(0)));
        store.insert("../x".into(), Some(audio(0)));
        let (corpus, summary) = join_sources(records, &store, |id| match id {
            "a" => LyricsLookup::Found("x".into()),
            "c" => LyricsLookup::Unreadable,
            _ => LyricsLookup::Missing,
        });
        assert_eq!(corpus.len(), 1);
        assert_eq!(summary.invalid_audio, 1);
        assert_eq!(summary.unreadable_lyrics, 1);
        assert_eq!(summary.missing_lyrics, 1);
        assert!(!is_safe_file_stem("../x"));
    }
}
