//! Track resolution by artist and title similarity.

use serde::{Deserialize, Serialize};

/// Lowercased, trimmed, internal whitespace collapsed.
pub fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// Normalized Levenshtein similarity in [0, 1] after [`normalize`].
pub fn similarity(a: &str, b: &str) -> f64 {
    strsim::normalized_levenshtein(&normalize(a), &normalize(b))
}

/// Mean of title similarity and the best artist similarity.
pub fn match_confidence(artist: &str, title: &str, candidate_artists: &[String], candidate_title: &str) -> f64 {
    let artist_sim = candidate_artists
        .iter()
        .map(|a| similarity(artist, a))
        .fold(0.0, f64::max);
    (artist_sim + similarity(title, candidate_title)) / 2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackMatch {
    pub song_id: String,
    pub spotify_track_id: String,
    pub match_confidence: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum UnmatchedReason {
    NoResults,
    BelowThreshold { best_confidence: f64, candidate_id: String },
    Error { message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Unmatched {
    pub song_id: String,
    pub artist: String,
    pub title: String,
    #[serde(flatten)]
    pub reason: UnmatchedReason,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_case_folded_pairs_score_one() {
        assert_eq!(match_confidence("Queen", "Bohemian Rhapsody", &["Queen".into()], "Bohemian Rhapsody"), 1.0);
        assert_eq!(match_confidence("outkast", "Hey Ya!", &["OutKast".into()], "hey  ya!"), 1.0);
    }

    #[test]
    fn best_artist_counts() {
        let c = match_confidence("Daft Punk", "Get Lucky", &["Pharrell".into(), "Daft Punk".into()], "Get Lucky");
        assert_eq!(c, 1.0);
    }

    #[test]
    fn unrelated_is_low() {
        assert!(match_confidence("Abba", "Waterloo", &["Metallica".into()], "One") < 0.5);
    }
}
