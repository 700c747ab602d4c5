//! Authenticated requests with retry.
//!
//! Retry policy per logical request:
//! * connection failures and 5xx responses are retried with exponential
//!   backoff until `max_attempts` tries have been made;
//! * 429 responses wait for `Retry-After` (or the backoff step when the
//!   header is absent) and draw on a separate `max_rate_limit_waits` budget;
//! * a 401 on an API call triggers one token refresh and one retry;
//! * a 400 or 401 from the token endpoint is terminal.

use std::fmt;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use base64::Engine as _;
use serde::Deserialize;

use crate::error::{Result, SpotifyError};
use crate::transport::{HttpRequest, HttpResponse, HttpTransport, Method, Sleeper, ThreadSleeper};

pub const CLIENT_ID_VAR: &str = "SPOTIFY_CLIENT_ID";
pub const CLIENT_SECRET_VAR: &str = "SPOTIFY_CLIENT_SECRET";

/// Client-credentials pair. The secret never appears in `Debug` output.
#[derive(Clone)]
pub struct ApiCredentials {
    client_id: String,
    client_secret: String,
}

impl ApiCredentials {
    pub fn new(client_id: impl Into<String>, client_secret: impl Into<String>) -> Result<Self> {
        let (client_id, client_secret) = (client_id.into(), client_secret.into());
        if client_id.trim().is_empty() {
            return Err(SpotifyError::MissingCredentials(CLIENT_ID_VAR));
        }
        if client_secret.trim().is_empty() {
            return Err(SpotifyError::MissingCredentials(CLIENT_SECRET_VAR));
        }
        Ok(ApiCredentials { client_id, client_secret })
    }

    pub fn from_env() -> Result<Self> {
        let get = |var: &'static str| std::env::var(var).map_err(|_| SpotifyError::MissingCredentials(var));
        Self::new(get(CLIENT_ID_VAR)?, get(CLIENT_SECRET_VAR)?)
    }

    pub fn client_id(&self) -> &str {
        &self.client_id
    }

    fn basic_auth(&self) -> String {
        let raw = format!("{}:{}", self.client_id, self.client_secret);
        format!("Basic {}", base64::engine::general_purpose::STANDARD.encode(raw))
    }
}

impl fmt::Debug for ApiCredentials {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ApiCredentials")
            .field("client_id", &self.client_id)
            .field("client_secret", &"<redacted>")
            .finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Endpoints {
    pub token_url: String,
    /// Prefix for `/search` and `/audio-features`.
    pub api_base: String,
}

impl Default for Endpoints {
    fn default() -> Self {
        Endpoints {
            token_url: "https://accounts.spotify.com/api/token".into(),
            api_base: "https://api.spotify.com/v1".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    pub endpoints: Endpoints,
    pub max_attempts: usize,
    pub max_rate_limit_waits: usize,
    /// First backoff step; doubles per failed attempt.
    pub backoff_base: Duration,
    /// Refresh this long before the reported expiry.
    pub token_margin: Duration,
    pub max_in_flight: usize,
    pub match_threshold: f64,
    pub search_limit: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            endpoints: Endpoints::default(),
            max_attempts: 3,
            max_rate_limit_waits: 10,
            backoff_base: Duration::from_millis(500),
            token_margin: Duration::from_secs(60),
            max_in_flight: 4,
            match_threshold: 0.5,
            search_limit: 5,
        }
    }
}

impl ClientConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_attempts == 0 || self.max_in_flight == 0 || self.search_limit == 0 {
            return Err(SpotifyError::Config("attempts, in-flight limit and search limit must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.match_threshold) {
            return Err(SpotifyError::Config(format!("match threshold {} outside [0, 1]", self.match_threshold)));
        }
        Ok(())
    }
}

#[derive(Clone)]
struct AccessToken {
    value: String,
    expires_at: Instant,
}

#[derive(Deserialize)]
struct TokenResponse {
    access_token: String,
    expires_in: u64,
}

/// Request counters, for summaries and for tests of the retry bounds.
#[derive(Debug, Default)]
pub struct ClientStats {
    pub requests: AtomicUsize,
    pub retries: AtomicUsize,
    pub token_fetches: AtomicUsize,
}

pub struct SpotifyClient {
    transport: Arc<dyn HttpTransport>,
    sleeper: Arc<dyn Sleeper>,
    credentials: ApiCredentials,
    config: ClientConfig,
    token: Mutex<Option<AccessToken>>,
    stats: ClientStats,
}

enum Outcome {
    Done(HttpResponse),
    Retry,
}

impl SpotifyClient {
    pub fn new(transport: Arc<dyn HttpTransport>, credentials: ApiCredentials, config: ClientConfig) -> Result<Self> {
        config.validate()?;
        Ok(SpotifyClient {
            transport,
            sleeper: Arc::new(ThreadSleeper),
            credentials,
            config,
            token: Mutex::new(None),
            stats: ClientStats::default(),
        })
    }

    pub fn with_sleeper(mut self, sleeper: Arc<dyn Sleeper>) -> Self {
        self.sleeper = sleeper;
        self
    }

    pub fn config(&self) -> &ClientConfig {
        &self.config
    }

    pub fn stats(&self) -> &ClientStats {
        &self.stats
    }

    fn backoff(&self, failures: usize) -> Duration {
        self.config.backoff_base * 2u32.saturating_pow(failures.saturating_sub(1) as u32)
    }

    /// Send with the shared retry policy. `Ok` carries any non-retryable
    /// response, success or not.
    fn send_with_retry(&self, endpoint: &str, request: &HttpRequest) -> Result<HttpResponse> {
        let (mut failures, mut waits) = (0, 0);
        loop {
            if failures + waits > 0 {
                self.stats.retries.fetch_add(1, Ordering::Relaxed);
            }
            self.stats.requests.fetch_add(1, Ordering::Relaxed);
            let outcome = match self.transport.send(request) {
                Err(e) => {
                    failures += 1;
                    if failures >= self.config.max_attempts {
                        return Err(SpotifyError::Network { attempts: failures, message: e.0 });
                    }
                    log::warn!("{endpoint}: network error ({}), retrying", e.0);
                    self.sleeper.sleep(self.backoff(failures));
                    Outcome::Retry
                }
                Ok(r) if r.status == 429 => {
                    waits += 1;
                    if waits > self.config.max_rate_limit_waits {
                        return Err(SpotifyError::RateLimited { endpoint: endpoint.into(), waits: waits - 1 });
                    }
                    let wait = r
                        .header("retry-after")
                        .and_then(|v| v.trim().parse::<u64>().ok())
                        .map(Duration::from_secs)
                        .unwrap_or_else(|| self.backoff(waits));
                    log::info!("{endpoint}: rate limited, waiting {wait:?}");
                    self.sleeper.sleep(wait);
                    Outcome::Retry
                }
                Ok(r) if r.status >= 500 => {
                    failures += 1;
                    if failures >= self.config.max_attempts {
                        return Err(http_error(endpoint, &r));
                    }
                    log::warn!("{endpoint}: http {}, retrying", r.status);
                    self.sleeper.sleep(self.backoff(failures));
                    Outcome::Retry
                }
                Ok(r) => Outcome::Done(r),
            };
            if let Outcome::Done(r) = outcome {
                return Ok(r);
            }
        }
    }

    fn fetch_token(&self) -> Result<AccessToken> {
        self.stats.token_fetches.fetch_add(1, Ordering::Relaxed);
        let request = HttpRequest {
            method: Method::Post,
            url: self.config.endpoints.token_url.clone(),
            headers: vec![
                ("Authorization".into(), self.credentials.basic_auth()),
                ("Content-Type".into(), "application/x-www-form-urlencoded".into()),
            ],
            body: Some("grant_type=client_credentials".into()),
        };
        let r = self.send_with_retry("token", &request)?;
        match r.status {
            200 => {
                let t: TokenResponse = serde_json::from_str(&r.body).map_err(|e| SpotifyError::Decode {
                    endpoint: "token".into(),
                    message: e.to_string(),
                })?;
                Ok(AccessToken {
                    value: t.access_token,
                    expires_at: Instant::now() + Duration::from_secs(t.expires_in),
                })
            }
            400 | 401 | 403 => Err(SpotifyError::Credentials(format!(
                "token endpoint rejected client `{}` (http {})",
                self.credentials.client_id, r.status
            ))),
            _ => Err(http_error("token", &r)),
        }
    }

    /// A token valid for at least `token_margin`.
    fn token(&self) -> Result<String> {
        let mut slot = self.token.lock().expect("token lock");
        let fresh = slot
            .as_ref()
            .is_some_and(|t| Instant::now() + self.config.token_margin < t.expires_at);
        if !fresh {
            *slot = Some(self.fetch_token()?);
        }
        Ok(slot.as_ref().expect("just set").value.clone())
    }

    /// Drop `stale` unless another thread already replaced it.
    fn invalidate(&self, stale: &str) {
        let mut slot = self.token.lock().expect("token lock");
        if slot.as_ref().is_some_and(|t| t.value == stale) {
            *slot = None;
        }
    }

    pub fn authenticate(&self) -> Result<()> {
        self.token().map(|_| ())
    }

    /// GET an API URL and decode the JSON body.
    pub fn get_json(&self, endpoint: &str, url: &str) -> Result<serde_json::Value> {
        let mut refreshed = false;
        loop {
            let token = self.token()?;
            let request = HttpRequest {
                method: Method::Get,
                url: url.to_string(),
                headers: vec![("Authorization".into(), format!("Bearer {token}"))],
                body: None,
            };
            let r = self.send_with_retry(endpoint, &request)?;
            match r.status {
                200 => {
                    return serde_json::from_str(&r.body).map_err(|e| SpotifyError::Decode {
                        endpoint: endpoint.into(),
                        message: e.to_string(),
                    })
                }
                401 if !refreshed => {
                    log::info!("{endpoint}: token rejected, refreshing once");
                    self.invalidate(&token);
                    refreshed = true;
                }
                401 => return Err(SpotifyError::Credentials(format!("{endpoint} rejected a freshly issued token"))),
                _ => return Err(http_error(endpoint, &r)),
            }
        }
    }
}

fn http_error(endpoint: &str, r: &HttpResponse) -> SpotifyError {
    let mut message: String = r.body.chars().take(200).collect();
    if message.is_empty() {
        message = "empty body".into();
    }
    SpotifyError::Http {
        status: r.status,
        endpoint: endpoint.into(),
        message,
    }
}
