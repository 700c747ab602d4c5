//! Spotify Web API client for resolving songs to tracks and caching their
//! audio features.
//!
//! Credentials come from `SPOTIFY_CLIENT_ID` and `SPOTIFY_CLIENT_SECRET`.
//! The secret is only ever placed in the token request's Authorization
//! header; it is never logged or written to disk.

pub mod client;
pub mod error;
pub mod fake;
pub mod fetch;
pub mod matching;
pub mod transport;

pub use client::{ApiCredentials, ClientConfig, ClientStats, Endpoints, SpotifyClient, CLIENT_ID_VAR, CLIENT_SECRET_VAR};
pub use error::{Result, SpotifyError};
pub use fetch::{fetch_audio_features, parse_features, parse_search, resolve_tracks, FetchSummary, ResolveReport, BATCH_SIZE};
pub use matching::{match_confidence, normalize, TrackMatch, Unmatched, UnmatchedReason};
pub use transport::{HttpRequest, HttpResponse, HttpTransport, Method, Sleeper, ThreadSleeper, TransportError, UreqTransport};
