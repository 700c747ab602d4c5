//! Track resolution and audio-feature retrieval into the audio store.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use mer_core::dataset::{read_audio_store, write_audio_store, AudioFeatureVector, AudioStore, SongRecord};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::client::SpotifyClient;
use crate::error::{Result, SpotifyError};
use crate::matching::{match_confidence, TrackMatch, Unmatched, UnmatchedReason};

/// The audio-features endpoint accepts at most this many ids per call.
pub const BATCH_SIZE: usize = 100;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResolveReport {
    pub matches: Vec<TrackMatch>,
    pub unmatched: Vec<Unmatched>,
}

/// Run `work` over `0..n` on at most `limit` threads. Results keep index
/// order.
fn bounded_map<T: Send>(n: usize, limit: usize, work: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    std::thread::scope(|s| {
        for _ in 0..limit.min(n).max(1) {
            let tx = tx.clone();
            let (next, work) = (&next, &work);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= n {
                    break;
                }
                if tx.send((i, work(i))).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);
    let mut out: Vec<(usize, T)> = rx.into_iter().collect();
    out.sort_by_key(|(i, _)| *i);
    out.into_iter().map(|(_, t)| t).collect()
}

fn search_url(client: &SpotifyClient, artist: &str, title: &str) -> Result<String> {
    let base = format!("{}/search", client.config().endpoints.api_base);
    let q = format!("artist:{artist} track:{title}");
    let limit = client.config().search_limit.to_string();
    url::Url::parse_with_params(&base, [("q", q.as_str()), ("type", "track"), ("limit", limit.as_str())])
        .map(String::from)
        .map_err(|e| SpotifyError::Config(format!("api base `{base}`: {e}")))
}

fn decode_err(endpoint: &str, message: &str) -> SpotifyError {
    SpotifyError::Decode {
        endpoint: endpoint.into(),
        message: message.into(),
    }
}

/// Decode a search response into candidates `(id, title, artists)`.
pub fn parse_search(body: &Value) -> Result<Vec<(String, String, Vec<String>)>> {
    let items = body
        .pointer("/tracks/items")
        .and_then(Value::as_array)
        .ok_or_else(|| decode_err("search", "missing tracks.items"))?;
    items
        .iter()
        .map(|t| {
            let id = t.get("id").and_then(Value::as_str).ok_or_else(|| decode_err("search", "track without id"))?;
            let name = t.get("name").and_then(Value::as_str).unwrap_or_default();
            let artists = t
                .get("artists")
                .and_then(Value::as_array)
                .map(|a| a.iter().filter_map(|x| x.get("name").and_then(Value::as_str)).map(String::from).collect())
                .unwrap_or_default();
            Ok((id.to_string(), name.to_string(), artists))
        })
        .collect()
}

/// Search every record by artist and title and keep the most similar
/// candidate when its confidence reaches the threshold. A credential error
/// aborts; any other per-song error lands in the unmatched list.
pub fn resolve_tracks(client: &SpotifyClient, records: &[SongRecord]) -> Result<ResolveReport> {
    if records.is_empty() {
        return Ok(ResolveReport::default());
    }
    client.authenticate()?;
    let threshold = client.config().match_threshold;
    let results = bounded_map(records.len(), client.config().max_in_flight, |i| {
        let r = &records[i];
        let url = search_url(client, &r.artist, &r.title)?;
        let body = client.get_json("search", &url)?;
        let mut best: Option<(f64, String)> = None;
        for (id, name, artists) in parse_search(&body)? {
            let c = match_confidence(&r.artist, &r.title, &artists, &name);
            // First candidate wins ties; the API orders by relevance.
            if best.as_ref().is_none_or(|(b, _)| c > *b) {
                best = Some((c, id));
            }
        }
        Ok(best)
    });
    let mut report = ResolveReport::default();
    for (r, res) in records.iter().zip(results) {
        let unmatched = |reason| Unmatched {
            song_id: r.song_id.clone(),
            artist: r.artist.clone(),
            title: r.title.clone(),
            reason,
        };
        match res {
            Ok(Some((c, id))) if c >= threshold => report.matches.push(TrackMatch {
                song_id: r.song_id.clone(),
                spotify_track_id: id,
                match_confidence: c,
            }),
            Ok(Some((c, id))) => report.unmatched.push(unmatched(UnmatchedReason::BelowThreshold {
                best_confidence: c,
                candidate_id: id,
            })),
            Ok(None) => report.unmatched.push(unmatched(UnmatchedReason::NoResults)),
            Err(e @ SpotifyError::Credentials(_)) => return Err(e),
            Err(e) => report.unmatched.push(unmatched(UnmatchedReason::Error { message: e.to_string() })),
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FetchSummary {
    pub requested: usize,
    pub skipped_cached: usize,
    pub batches: usize,
    pub stored: usize,
    /// Tracks the API returned no features for.
    pub featureless: Vec<String>,
    /// Tracks whose features failed validation, with the reason. They are
    /// stored as feature-less.
    pub invalid: Vec<(String, String)>,
    /// Songs of failed batches; not stored, so a rerun retries them.
    pub failed: Vec<String>,
    pub errors: Vec<String>,
}

/// Decode and range-check one `audio_features` entry.
pub fn parse_features(v: &Value) -> std::result::Result<AudioFeatureVector, String> {
    let f: AudioFeatureVector = serde_json::from_value(v.clone()).map_err(|e| e.to_string())?;
    f.validate().map_err(|e| e.to_string())?;
    Ok(f)
}

fn fetch_batch(client: &SpotifyClient, ids: &[String]) -> Result<Vec<Value>> {
    let base = format!("{}/audio-features", client.config().endpoints.api_base);
    let url = url::Url::parse_with_params(&base, [("ids", ids.join(",").as_str())])
        .map_err(|e| SpotifyError::Config(format!("api base `{base}`: {e}")))?;
    let body = client.get_json("audio-features", url.as_str())?;
    let list = body
        .get("audio_features")
        .and_then(Value::as_array)
        .ok_or_else(|| decode_err("audio-features", "missing audio_features"))?;
    if list.len() != ids.len() {
        return Err(decode_err(
            "audio-features",
            &format!("{} entries for {} ids", list.len(), ids.len()),
        ));
    }
    Ok(list.clone())
}

/// Fetch features for every match not yet in the store at `store_path`.
/// The store is rewritten atomically after each batch by a single writer.
pub fn fetch_audio_features(client: &SpotifyClient, matches: &[TrackMatch], store_path: &Path) -> Result<FetchSummary> {
    let mut store: AudioStore = if store_path.exists() {
        read_audio_store(store_path)?
    } else {
        AudioStore::new()
    };
    let mut summary = FetchSummary {
        requested: matches.len(),
        ..Default::default()
    };
    // Spotify id -> songs, in first-appearance order.
    let mut order: Vec<String> = Vec::new();
    let mut songs: HashMap<String, Vec<String>> = HashMap::new();
    for m in matches {
        if store.contains_key(&m.song_id) {
            summary.skipped_cached += 1;
            continue;
        }
        let entry = songs.entry(m.spotify_track_id.clone()).or_default();
        if entry.is_empty() {
            order.push(m.spotify_track_id.clone());
        }
        if !entry.contains(&m.song_id) {
            entry.push(m.song_id.clone());
        }
    }
    let batches: Vec<Vec<String>> = order.chunks(BATCH_SIZE).map(|c| c.to_vec()).collect();
    summary.batches = batches.len();
    if batches.is_empty() {
        if !store_path.exists() {
            write_audio_store(store_path, &store)?;
        }
        return Ok(summary);
    }
    client.authenticate()?;

    let (tx, rx) = mpsc::channel::<(usize, Result<Vec<Value>>)>();
    let mut credential_error = None;
    std::thread::scope(|s| -> Result<()> {
        let batches = &batches;
        s.spawn(move || {
            let results = bounded_map(batches.len(), client.config().max_in_flight, |i| {
                let r = fetch_batch(client, &batches[i]);
                // Hand each batch to the writer as soon as it lands.
                let _ = tx.send((i, r));
            });
            drop(results);
        });
        for (i, result) in rx {
            let ids = &batches[i];
            let song_ids = || ids.iter().flat_map(|id| songs[id].iter().cloned());
            match result {
                Ok(values) => {
                    let mut updates = BTreeMap::new();
                    for (id, v) in ids.iter().zip(values) {
                        let entry = if v.is_null() {
                            summary.featureless.push(id.clone());
                            None
                        } else {
                            match parse_features(&v) {
                                Ok(f) => Some(f),
                                Err(e) => {
                                    log::warn!("track {id}: invalid audio features: {e}");
                                    summary.invalid.push((id.clone(), e));
                                    None
                                }
                            }
                        };
                        for song in &songs[id] {
                            updates.insert(song.clone(), entry);
                        }
                    }
                    summary.stored += updates.len();
                    store.extend(updates);
                    write_audio_store(store_path, &store)?;
                }
                Err(e) => {
                    log::warn!("batch {i} failed: {e}");
                    summary.failed.extend(song_ids());
                    summary.errors.push(e.to_string());
                    if matches!(e, SpotifyError::Credentials(_)) {
                        credential_error = Some(e);
                    }
                }
            }
        }
        Ok(())
    })?;
    if let Some(e) = credential_error {
        return Err(e);
    }
    summary.failed.sort();
    summary.featureless.sort();
    summary.invalid.sort();
    Ok(summary)
}
