//! An in-process stand-in for the token, search and audio-features
//! endpoints. Used by tests and offline demos; it never opens a socket.

use std::collections::{HashSet, VecDeque};
use std::sync::Mutex;
use std::time::Duration;

use base64::Engine as _;
use serde_json::{json, Value};

use crate::client::{ApiCredentials, ClientConfig, Endpoints, SpotifyClient};
use crate::matching::match_confidence;
use crate::transport::{HttpRequest, HttpResponse, HttpTransport, Method, Sleeper, TransportError};
use std::sync::Arc;

pub const FAKE_TOKEN_URL: &str = "https://fake.invalid/api/token";
pub const FAKE_API_BASE: &str = "https://fake.invalid/v1";
pub const FAKE_CLIENT_ID: &str = "fake-client";
pub const FAKE_CLIENT_SECRET: &str = "fake-secret";

/// Search results need at least this similarity to be listed.
const SEARCH_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct FakeTrack {
    pub id: String,
    pub name: String,
    pub artists: Vec<String>,
    /// Raw `audio-features` entry; `None` is served as JSON null.
    pub features: Option<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Token,
    Search,
    AudioFeatures,
    Any,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Failure {
    Status { status: u16, retry_after: Option<u64> },
    Network,
}

/// One served request. Holds no header values and no body.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LoggedRequest {
    pub method: Method,
    pub route: Route,
    pub url: String,
    pub authorized: bool,
}

#[derive(Default)]
struct State {
    issued: HashSet<String>,
    next_token: usize,
    api_calls: usize,
    revoke_after: Option<usize>,
    failures: VecDeque<(Route, Failure)>,
    log: Vec<LoggedRequest>,
}

pub struct FakeSpotify {
    client_id: String,
    client_secret: String,
    catalog: Vec<FakeTrack>,
    state: Mutex<State>,
}

fn route_of(url: &str) -> Route {
    if url.starts_with(FAKE_TOKEN_URL) {
        Route::Token
    } else if url.starts_with(&format!("{FAKE_API_BASE}/search")) {
        Route::Search
    } else if url.starts_with(&format!("{FAKE_API_BASE}/audio-features")) {
        Route::AudioFeatures
    } else {
        Route::Any
    }
}

fn query_param(url: &str, name: &str) -> Option<String> {
    let parsed = url::Url::parse(url).ok()?;
    parsed.query_pairs().find(|(k, _)| k == name).map(|(_, v)| v.into_owned())
}

impl FakeSpotify {
    pub fn new(catalog: Vec<FakeTrack>) -> Self {
        FakeSpotify {
            client_id: FAKE_CLIENT_ID.into(),
            client_secret: FAKE_CLIENT_SECRET.into(),
            catalog,
            state: Mutex::new(State::default()),
        }
    }

    /// Every issued token stops working once this many API calls (search
    /// or audio-features) have been served in total.
    pub fn revoke_tokens_after(&self, api_calls: usize) {
        self.state.lock().unwrap().revoke_after = Some(api_calls);
    }

    /// Serve `failure` on the next request matching `route`.
    pub fn push_failure(&self, route: Route, failure: Failure) {
        self.state.lock().unwrap().failures.push_back((route, failure));
    }

    pub fn requests(&self) -> Vec<LoggedRequest> {
        self.state.lock().unwrap().log.clone()
    }

    pub fn count(&self, route: Route) -> usize {
        self.requests().iter().filter(|r| route == Route::Any || r.route == route).count()
    }

    /// Endpoints pointing at this fake.
    pub fn endpoints() -> Endpoints {
        Endpoints {
            token_url: FAKE_TOKEN_URL.into(),
            api_base: FAKE_API_BASE.into(),
        }
    }

    /// The credentials this fake accepts.
    pub fn credentials() -> ApiCredentials {
        ApiCredentials::new(FAKE_CLIENT_ID, FAKE_CLIENT_SECRET).expect("non-empty")
    }

    /// A client wired to `fake` that records sleeps instead of sleeping.
    pub fn client(fake: Arc<FakeSpotify>, credentials: ApiCredentials, config: ClientConfig) -> (SpotifyClient, Arc<RecordingSleeper>) {
        let sleeper = Arc::new(RecordingSleeper::default());
        let config = ClientConfig {
            endpoints: Self::endpoints(),
            ..config
        };
        let client = SpotifyClient::new(fake, credentials, config)
            .expect("valid client config")
            .with_sleeper(sleeper.clone());
        (client, sleeper)
    }

    fn token(&self, request: &HttpRequest, state: &mut State) -> HttpResponse {
        let expected = base64::engine::general_purpose::STANDARD.encode(format!("{}:{}", self.client_id, self.client_secret));
        let ok = request.method == Method::Post
            && request.header("authorization") == Some(&format!("Basic {expected}"))
            && request.body.as_deref() == Some("grant_type=client_credentials");
        if !ok {
            return HttpResponse::new(401, r#"{"error":"invalid_client"}"#);
        }
        state.next_token += 1;
        let token = format!("fake-token-{}", state.next_token);
        state.issued.insert(token.clone());
        HttpResponse::new(200, json!({"access_token": token, "token_type": "Bearer", "expires_in": 3600}).to_string())
    }

    fn search(&self, url: &str) -> HttpResponse {
        let Some(q) = query_param(url, "q") else {
            return HttpResponse::new(400, "missing q");
        };
        let limit = query_param(url, "limit").and_then(|l| l.parse().ok()).unwrap_or(20);
        let (artist, title) = match q.strip_prefix("artist:").and_then(|r| r.split_once(" track:")) {
            Some((a, t)) => (a.to_string(), t.to_string()),
            None => (String::new(), q.clone()),
        };
        let mut hits: Vec<(f64, &FakeTrack)> = self
            .catalog
            .iter()
            .map(|t| (match_confidence(&artist, &title, &t.artists, &t.name), t))
            .filter(|(c, _)| *c >= SEARCH_FLOOR)
            .collect();
        hits.sort_by(|a, b| b.0.total_cmp(&a.0));
        let items: Vec<Value> = hits
            .into_iter()
            .take(limit)
            .map(|(_, t)| {
                json!({
                    "id": t.id,
                    "name": t.name,
                    "artists": t.artists.iter().map(|a| json!({"name": a})).collect::<Vec<_>>(),
                })
            })
            .collect();
        HttpResponse::new(200, json!({"tracks": {"items": items}}).to_string())
    }

    fn audio_features(&self, url: &str) -> HttpResponse {
        let ids = query_param(url, "ids").unwrap_or_default();
        let ids: Vec<&str> = ids.split(',').filter(|s| !s.is_empty()).collect();
        if ids.is_empty() || ids.len() > 100 {
            return HttpResponse::new(400, format!("{} ids; expected 1..=100", ids.len()));
        }
        let entries: Vec<Value> = ids
            .iter()
            .map(|id| {
                self.catalog
                    .iter()
                    .find(|t| t.id == *id)
                    .and_then(|t| t.features.clone())
                    .unwrap_or(Value::Null)
            })
            .collect();
        HttpResponse::new(200, json!({"audio_features": entries}).to_string())
    }
}

impl HttpTransport for FakeSpotify {
    fn send(&self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let mut state = self.state.lock().unwrap();
        let route = route_of(&request.url);
        let bearer = request.header("authorization").and_then(|h| h.strip_prefix("Bearer "));
        let authorized = match route {
            Route::Token => true,
            _ => bearer.is_some_and(|t| state.issued.contains(t)),
        };
        state.log.push(LoggedRequest {
            method: request.method,
            route,
            url: request.url.clone(),
            authorized,
        });
        if let Some(pos) = state.failures.iter().position(|(r, _)| *r == Route::Any || *r == route) {
            let (_, failure) = state.failures.remove(pos).expect("position is in range");
            return match failure {
                Failure::Network => Err(TransportError("connection reset (scripted)".into())),
                Failure::Status { status, retry_after } => {
                    let r = HttpResponse::new(status, format!("scripted {status}"));
                    Ok(match retry_after {
                        Some(s) => r.with_header("Retry-After", &s.to_string()),
                        None => r,
                    })
                }
            };
        }
        if route == Route::Token {
            return Ok(self.token(request, &mut state));
        }
        if !authorized {
            return Ok(HttpResponse::new(401, r#"{"error":{"status":401,"message":"The access token expired"}}"#));
        }
        state.api_calls += 1;
        if state.revoke_after.is_some_and(|n| state.api_calls >= n) {
            state.revoke_after = None;
            state.issued.clear();
        }
        Ok(match route {
            Route::Search => self.search(&request.url),
            Route::AudioFeatures => self.audio_features(&request.url),
            _ => HttpResponse::new(404, "unknown endpoint"),
        })
    }
}

/// Records requested sleeps and returns immediately.
#[derive(Debug, Default)]
pub struct RecordingSleeper {
    slept: Mutex<Vec<Duration>>,
}

impl RecordingSleeper {
    pub fn sleeps(&self) -> Vec<Duration> {
        self.slept.lock().unwrap().clone()
    }
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, duration: Duration) {
        self.slept.lock().unwrap().push(duration);
    }
}

/// Catalog entry with valid features derived from `seed`.
pub fn sample_track(id: &str, artist: &str, title: &str, seed: u32) -> FakeTrack {
    let u = |k: u32| ((seed.wrapping_mul(2654435761).wrapping_add(k * 40503)) % 1000) as f64 / 1000.0;
    FakeTrack {
        id: id.into(),
        name: title.into(),
        artists: vec![artist.into()],
        features: Some(json!({
            "id": id,
            "acousticness": u(1),
            "danceability": u(2),
            "energy": u(3),
            "instrumentalness": u(4),
            "liveness": u(5),
            "loudness": -60.0 * u(6),
            "speechiness": u(7),
            "tempo": 60.0 + 120.0 * u(8),
            "valence": u(9),
            "mode": (seed % 2) as i32,
            "key": (seed % 12) as i32,
            "duration_ms": 200000,
        })),
    }
}
