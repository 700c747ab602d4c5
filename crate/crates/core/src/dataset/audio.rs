use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The eleven high-level audio descriptors exposed by the Spotify Web API.
///
/// Field names follow the API so stores written by the fetch client and
/// hand-made stores share one layout. Unknown fields (`id`, `uri`,
/// `duration_ms`, ...) are ignored when reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AudioFeatureVector {
    pub acousticness: f64,
    pub danceability: f64,
    pub energy: f64,
    pub instrumentalness: f64,
    pub liveness: f64,
    /// Decibels, typically in [-60, 0].
    pub loudness: f64,
    pub speechiness: f64,
    /// Beats per minute.
    pub tempo: f64,
    pub valence: f64,
    /// 1 = major, 0 = minor.
    pub mode: i32,
    /// Pitch class 0..=11, or -1 when no key was detected.
    pub key: i32,
}

/// Number of columns produced by [`dummy_encode_audio`].
pub const ENCODED_AUDIO_DIM: usize = 23;

/// Column order of the dummy-encoded audio vector: the nine continuous
/// descriptors, `mode`, then one indicator per key value -1, 0, ..., 11.
pub const AUDIO_COLUMNS: [&str; ENCODED_AUDIO_DIM] = [
    "acousticness",
    "danceability",
    "energy",
    "instrumentalness",
    "liveness",
    "loudness",
    "speechiness",
    "tempo",
    "valence",
    "mode",
    "key_none",
    "key_C",
    "key_C#",
    "key_D",
    "key_D#",
    "key_E",
    "key_F",
    "key_F#",
    "key_G",
    "key_G#",
    "key_A",
    "key_A#",
    "key_B",
];

/// Index of the first key indicator in [`AUDIO_COLUMNS`].
pub const KEY_COLUMN_OFFSET: usize = 10;

/// The eleven base descriptors, in the order used for reporting.
pub const BASE_AUDIO_FEATURES: [&str; 11] = [
    "acousticness",
    "danceability",
    "energy",
    "instrumentalness",
    "key",
    "liveness",
    "loudness",
    "mode",
    "speechiness",
    "tempo",
    "valence",
];

/// Map an encoded column name back to its base descriptor (`key_*` -> `key`).
pub fn base_feature_of(column: &str) -> &str {
    if column.starts_with("key_") {
        "key"
    } else {
        column
    }
}

impl AudioFeatureVector {
    pub fn validate(&self) -> Result<()> {
        let unit = [
            ("acousticness", self.acousticness),
            ("danceability", self.danceability),
            ("energy", self.energy),
            ("instrumentalness", self.instrumentalness),
            ("liveness", self.liveness),
            ("speechiness", self.speechiness),
            ("valence", self.valence),
        ];
        for (name, v) in unit {
            if !v.is_finite() || !(0.0..=1.0).contains(&v) {
                return Err(Error::InvalidAudio(format!("{name} = {v} outside [0, 1]")));
            }
        }
        if !self.loudness.is_finite() {
            return Err(Error::InvalidAudio(format!("loudness = {} is not finite", self.loudness)));
        }
        if !self.tempo.is_finite() || self.tempo < 0.0 {
            return Err(Error::InvalidAudio(format!("tempo = {} must be >= 0", self.tempo)));
        }
        if self.mode != 0 && self.mode != 1 {
            return Err(Error::InvalidAudio(format!("mode = {} must be 0 or 1", self.mode)));
        }
        if !(-1..=11).contains(&self.key) {
            return Err(Error::InvalidAudio(format!("key = {} outside -1..=11", self.key)));
        }
        Ok(())
    }

    /// Value of a base descriptor by name (`key` and `mode` as reals).
    pub fn get(&self, name: &str) -> Option<f64> {
        Some(match name {
            "acousticness" => self.acousticness,
            "danceability" => self.danceability,
            "energy" => self.energy,
            "instrumentalness" => self.instrumentalness,
            "liveness" => self.liveness,
            "loudness" => self.loudness,
            "speechiness" => self.speechiness,
            "tempo" => self.tempo,
            "valence" => self.valence,
            "mode" => f64::from(self.mode),
            "key" => f64::from(self.key),
            _ => return None,
        })
    }
}

/// Dummy-encode one audio vector into the fixed 23-column layout of
/// [`AUDIO_COLUMNS`]. All thirteen key indicators are kept (no reference
/// category), so exactly one of them is 1.
pub fn dummy_encode_audio(v: &AudioFeatureVector) -> Result<[f64; ENCODED_AUDIO_DIM]> {
    v.validate()?;
    let mut out = [0.0; ENCODED_AUDIO_DIM];
    out[0] = v.acousticness;
    out[1] = v.danceability;
    out[2] = v.energy;
    out[3] = v.instrumentalness;
    out[4] = v.liveness;
    out[5] = v.loudness;
    out[6] = v.speechiness;
    out[7] = v.tempo;
    out[8] = v.valence;
    out[9] = f64::from(v.mode);
    // key -1 lands on KEY_COLUMN_OFFSET, key 11 on the last column
    let slot = KEY_COLUMN_OFFSET + (v.key + 1) as usize;
    out[slot] = 1.0;
    Ok(out)
}

/// Audio feature cache keyed by song id. `None` marks a song the API
/// returned no features for; such songs are excluded downstream but stay in
/// the store so resumed fetches skip them.
pub type AudioStore = BTreeMap<String, Option<AudioFeatureVector>>;

/// Parse an audio store document. Values are not range-checked here;
/// consumers validate per entry so one bad record does not poison the store.
pub fn parse_audio_store(text: &str) -> Result<AudioStore> {
    if text.trim().is_empty() {
        return Ok(AudioStore::new());
    }
    serde_json::from_str(text).map_err(|e| Error::Parse(format!("audio store: {e}")))
}

pub fn read_audio_store(path: &Path) -> Result<AudioStore> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_audio_store(&text)
}

/// Write the store atomically: serialize to a temp file in the target
/// directory, then rename over the destination.
pub fn write_audio_store(path: &Path, store: &AudioStore) -> Result<()> {
    let mut body = serde_json::to_string_pretty(store)?;
    body.push('\n');
    crate::fsio::write_atomic(path, body.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn sample(key: i32, mode: i32) -> AudioFeatureVector {
        AudioFeatureVector {
            acousticness: 0.1,
            danceability: 0.7,
            energy: 0.8,
            instrumentalness: 0.0,
            liveness: 0.2,
            loudness: -5.0,
            speechiness: 0.05,
            tempo: 120.0,
            valence: 0.6,
            mode,
            key,
        }
    }

    #[test]
    fn key_c_major_sets_one_indicator() {
        let enc = dummy_encode_audio(&sample(0, 1)).unwrap();
        assert_eq!(enc.len(), 23);
        let idx = AUDIO_COLUMNS.iter().position(|c| *c == "key_C").unwrap();
        assert_eq!(enc[idx], 1.0);
        let keys = &enc[KEY_COLUMN_OFFSET..];
        assert_eq!(keys.iter().filter(|&&k| k == 1.0).count(), 1);
        assert_eq!(keys.iter().filter(|&&k| k == 0.0).count(), 12);
        assert_eq!(enc[9], 1.0);
    }

    #[test]
    fn missing_key_uses_none_indicator() {
        let enc = dummy_encode_audio(&sample(-1, 0)).unwrap();
        assert_eq!(enc[KEY_COLUMN_OFFSET], 1.0);
        assert_eq!(AUDIO_COLUMNS[KEY_COLUMN_OFFSET], "key_none");
    }

    #[test]
    fn different_keys_differ_in_two_positions() {
        let a = dummy_encode_audio(&sample(3, 1)).unwrap();
        let b = dummy_encode_audio(&sample(7, 1)).unwrap();
        let diff = a.iter().zip(&b).filter(|(x, y)| x != y).count();
        assert_eq!(diff, 2);
    }

    #[test]
    fn out_of_range_values_are_rejected() {
        assert!(dummy_encode_audio(&sample(12, 1)).is_err());
        assert!(dummy_encode_audio(&sample(-2, 1)).is_err());
        assert!(dummy_encode_audio(&sample(0, 2)).is_err());
        let mut v = sample(0, 1);
        v.energy = 1.3;
        assert!(v.validate().is_err());
        let mut v = sample(0, 1);
        v.tempo = -1.0;
        assert!(v.validate().is_err());
    }

    #[test]
    fn store_parses_nulls_and_ignores_extra_fields() {
        let text = r#"{
            "a": {"acousticness":0.1,"danceability":0.2,"energy":0.3,"instrumentalness":0.0,
                  "liveness":0.1,"loudness":-7.5,"speechiness":0.04,"tempo":99.0,"valence":0.5,
                  "mode":1,"key":5,"id":"xyz","duration_ms":1234},
            "b": null
        }"#;
        let store = parse_audio_store(text).unwrap();
        assert_eq!(store.len(), 2);
        assert_eq!(store["a"].unwrap().key, 5);
        assert!(store["b"].is_none());
        assert!(parse_audio_store("").unwrap().is_empty());
        assert!(parse_audio_store("[1,2]").is_err());
    }

    #[test]
    fn store_write_is_readable() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested").join("audio.json");
        let mut store = AudioStore::new();
        store.insert("s1".into(), Some(sample(2, 0)));
        store.insert("s2".into(), None);
        write_audio_store(&path, &store).unwrap();
        assert_eq!(read_audio_store(&path).unwrap(), store);
    }
}
