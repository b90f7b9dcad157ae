use std::sync::Arc;
use std::time::Duration;

use chrono::{DateTime, Utc};
use log::{debug, warn};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{is_ip_editor, EditRecord, IngestError, RecordEnricher, RevisionPair};
use crate::http::{retry_after, RateLimiter, RetryPolicy};

/// Environment variable holding the HTTP user agent sent to MediaWiki.
pub const USER_AGENT_ENV: &str = "EDITSUM_USER_AGENT";

/// Edit count assigned to anonymous (IP) editors.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IpEditCount {
    /// Number of contributions made from the IP address.
    #[default]
    PerIpContributions,
    Zero,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IngestConfig {
    pub endpoint: String,
    pub requests_per_second: f64,
    pub burst: u32,
    pub timeout_secs: u64,
    pub retry: RetryPolicy,
    pub ip_edit_count: IpEditCount,
    /// Stop counting IP contributions past this many.
    pub max_ip_contributions: u64,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            endpoint: "https://en.wikipedia.org/w/api.php".to_string(),
            requests_per_second: 5.0,
            burst: 5,
            timeout_secs: 60,
            retry: RetryPolicy::default(),
            ip_edit_count: IpEditCount::default(),
            max_ip_contributions: 10_000,
        }
    }
}

/// What the user-info endpoint reports about an editor.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EditorInfo {
    pub edit_count: u64,
    pub is_anonymous: bool,
    pub is_bot: bool,
}

/// Read-only MediaWiki Action API client. Cheap to clone; clones share the
/// rate limiter.
#[derive(Debug, Clone)]
pub struct ApiClient {
    endpoint: String,
    http: reqwest::blocking::Client,
    limiter: Arc<RateLimiter>,
    retry: RetryPolicy,
    ip_edit_count: IpEditCount,
    max_ip_contributions: u64,
}

#[derive(Debug, Deserialize)]
struct ApiResponse {
    #[serde(default)]
    query: Option<Query>,
    #[serde(default)]
    error: Option<ApiErrorBody>,
    #[serde(default, rename = "continue")]
    continuation: Option<serde_json::Map<String, Value>>,
}

#[derive(Debug, Deserialize)]
struct ApiErrorBody {
    code: String,
    #[serde(default)]
    info: String,
}

#[derive(Debug, Default, Deserialize)]
struct Query {
    #[serde(default)]
    pages: Vec<Page>,
    #[serde(default)]
    badrevids: Option<Value>,
    #[serde(default)]
    users: Vec<User>,
    #[serde(default)]
    usercontribs: Vec<Value>,
}

#[derive(Debug, Deserialize)]
struct Page {
    title: String,
    #[serde(default)]
    revisions: Vec<Revision>,
}

#[derive(Debug, Deserialize)]
struct Revision {
    revid: u64,
    #[serde(default)]
    parentid: u64,
    #[serde(default)]
    user: Option<String>,
    #[serde(default)]
    anon: bool,
    #[serde(default)]
    userhidden: bool,
    timestamp: DateTime<Utc>,
    #[serde(default)]
    comment: Option<String>,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    texthidden: bool,
    #[serde(default)]
    slots: Option<Slots>,
}

#[derive(Debug, Deserialize)]
struct Slots {
    main: Slot,
}

#[derive(Debug, Deserialize)]
struct Slot {
    #[serde(default)]
    content: Option<String>,
    #[serde(default)]
    texthidden: bool,
}

#[derive(Debug, Deserialize)]
struct User {
    name: String,
    #[serde(default)]
    missing: bool,
    #[serde(default)]
    invalid: bool,
    #[serde(default)]
    editcount: u64,
    #[serde(default)]
    groups: Vec<String>,
}

struct FetchedRevision {
    title: String,
    revision: Revision,
    text: Option<String>,
}

impl ApiClient {
    pub fn new(config: &IngestConfig, user_agent: &str) -> Result<Self, IngestError> {
        if user_agent.trim().is_empty() {
            return Err(IngestError::MissingUserAgent);
        }
        let http = reqwest::blocking::Client::builder()
            .user_agent(user_agent)
            .timeout(Duration::from_secs(config.timeout_secs.max(1)))
            .build()
            .map_err(|e| IngestError::Transport(e.to_string()))?;
        Ok(Self {
            endpoint: config.endpoint.clone(),
            http,
            limiter: Arc::new(RateLimiter::new(config.requests_per_second, config.burst)),
            retry: config.retry.clone(),
            ip_edit_count: config.ip_edit_count,
            max_ip_contributions: config.max_ip_contributions,
        })
    }

    /// Build a client with the user agent taken from [`USER_AGENT_ENV`].
    pub fn from_env(config: &IngestConfig) -> Result<Self, IngestError> {
        let ua = std::env::var(USER_AGENT_ENV).map_err(|_| IngestError::MissingUserAgent)?;
        Self::new(config, &ua)
    }

    fn get(&self, params: &[(&str, String)]) -> Result<ApiResponse, IngestError> {
        let mut query: Vec<(&str, String)> =
            vec![("format", "json".into()), ("formatversion", "2".into())];
        query.extend(params.iter().cloned());

        let attempts = self.retry.max_attempts.max(1);
        let mut last_transport = String::new();
        for attempt in 0..attempts {
            self.limiter.acquire();
            let retry_in = |server: Option<Duration>| self.retry.delay(attempt, server);
            let response = match self.http.get(&self.endpoint).query(&query).send() {
                Ok(r) => r,
                Err(e) => {
                    last_transport = e.to_string();
                    if attempt + 1 < attempts {
                        std::thread::sleep(retry_in(None));
                    }
                    continue;
                }
            };
            let status = response.status();
            if status.as_u16() == 429 || status.is_server_error() {
                let wait = retry_after(response.headers());
                debug!("MediaWiki returned {status}, attempt {}", attempt + 1);
                if attempt + 1 == attempts {
                    return Err(if status.as_u16() == 429 {
                        IngestError::RateLimited { attempts }
                    } else {
                        IngestError::Transport(format!("HTTP {status}"))
                    });
                }
                std::thread::sleep(retry_in(wait));
                continue;
            }
            if !status.is_success() {
                return Err(IngestError::Transport(format!("HTTP {status}")));
            }
            let body: ApiResponse = response
                .json()
                .map_err(|e| IngestError::InvalidResponse(e.to_string()))?;
            if let Some(err) = &body.error {
                if matches!(err.code.as_str(), "ratelimited" | "maxlag") {
                    if attempt + 1 == attempts {
                        return Err(IngestError::RateLimited { attempts });
                    }
                    std::thread::sleep(retry_in(None));
                    continue;
                }
                return Err(IngestError::InvalidResponse(format!("{}: {}", err.code, err.info)));
            }
            return Ok(body);
        }
        Err(IngestError::Transport(last_transport))
    }

    fn fetch_revision(&self, revision_id: u64, with_content: bool) -> Result<FetchedRevision, IngestError> {
        let mut props = "ids|timestamp|user|comment|tags|flags".to_string();
        if with_content {
            props.push_str("|content");
        }
        let mut params = vec![
            ("action", "query".to_string()),
            ("prop", "revisions".to_string()),
            ("revids", revision_id.to_string()),
            ("rvprop", props),
        ];
        if with_content {
            params.push(("rvslots", "main".to_string()));
        }
        let query = self.get(&params)?.query.unwrap_or_default();
        if query.badrevids.is_some() {
            return Err(IngestError::NotFound(format!("revision {revision_id}")));
        }
        let page = query
            .pages
            .into_iter()
            .find(|p| p.revisions.iter().any(|r| r.revid == revision_id))
            .ok_or_else(|| IngestError::NotFound(format!("revision {revision_id}")))?;
        let title = page.title;
        let revision = page
            .revisions
            .into_iter()
            .find(|r| r.revid == revision_id)
            .expect("checked above");
        let text = if with_content {
            let slot = revision.slots.as_ref().map(|s| &s.main);
            if revision.texthidden || slot.is_some_and(|s| s.texthidden) {
                return Err(IngestError::NotFound(format!("revision {revision_id} text is deleted")));
            }
            Some(slot.and_then(|s| s.content.clone()).unwrap_or_default())
        } else {
            None
        };
        Ok(FetchedRevision { title, revision, text })
    }

    /// Fetch one edit and the texts of the revision and its parent.
    pub fn fetch_edit(&self, revision_id: u64) -> Result<(EditRecord, RevisionPair), IngestError> {
        let fetched = self.fetch_revision(revision_id, true)?;
        let rev = &fetched.revision;
        let old_text = if rev.parentid == 0 {
            String::new()
        } else {
            self.fetch_revision(rev.parentid, true)?.text.unwrap_or_default()
        };
        let editor_name = if rev.userhidden { String::new() } else { rev.user.clone().unwrap_or_default() };
        let mut record = EditRecord {
            revision_id: rev.revid,
            parent_revision_id: rev.parentid,
            page_title: fetched.title.clone(),
            editor_name,
            editor_is_bot: false,
            editor_is_anonymous: rev.anon,
            editor_edit_count: 0,
            summary_raw: rev.comment.clone().unwrap_or_default(),
            tags: rev.tags.iter().cloned().collect(),
            timestamp: rev.timestamp,
        };
        self.apply_editor(&mut record)?;
        let pair = RevisionPair { old_text, new_text: fetched.text.unwrap_or_default() };
        Ok((record, pair))
    }

    /// Edit count from the user-info endpoint. IP editors have no account and
    /// report 0 with the anonymous flag set.
    pub fn fetch_editor_edit_count(&self, editor_name: &str) -> Result<EditorInfo, IngestError> {
        if is_ip_editor(editor_name) {
            return Ok(EditorInfo { edit_count: 0, is_anonymous: true, is_bot: false });
        }
        let params = [
            ("action", "query".to_string()),
            ("list", "users".to_string()),
            ("ususers", editor_name.to_string()),
            ("usprop", "groups|editcount".to_string()),
        ];
        let query = self.get(&params)?.query.unwrap_or_default();
        let user = query
            .users
            .into_iter()
            .next()
            .ok_or_else(|| IngestError::InvalidResponse("users list missing".into()))?;
        if user.missing {
            return Err(IngestError::NotFound(format!("user {}", user.name)));
        }
        if user.invalid {
            return Ok(EditorInfo { edit_count: 0, is_anonymous: true, is_bot: false });
        }
        Ok(EditorInfo {
            edit_count: user.editcount,
            is_anonymous: false,
            is_bot: user.groups.iter().any(|g| g == "bot"),
        })
    }

    /// Number of contributions made from an IP address, paging through
    /// `list=usercontribs` up to the configured cap.
    pub fn fetch_ip_contribution_count(&self, ip: &str) -> Result<u64, IngestError> {
        let mut count = 0u64;
        let mut continuation: Vec<(String, String)> = Vec::new();
        loop {
            let mut params = vec![
                ("action", "query".to_string()),
                ("list", "usercontribs".to_string()),
                ("ucuser", ip.to_string()),
                ("uclimit", "max".to_string()),
                ("ucprop", "ids".to_string()),
            ];
            let owned: Vec<(String, String)> = continuation.clone();
            for (k, v) in &owned {
                params.push((k.as_str(), v.clone()));
            }
            let response = self.get(&params)?;
            count += response.query.map_or(0, |q| q.usercontribs.len() as u64);
            if count >= self.max_ip_contributions {
                return Ok(self.max_ip_contributions);
            }
            match response.continuation {
                Some(map) => {
                    continuation = map
                        .into_iter()
                        .filter_map(|(k, v)| v.as_str().map(|s| (k, s.to_string())))
                        .collect();
                }
                None => return Ok(count),
            }
        }
    }

    fn apply_editor(&self, record: &mut EditRecord) -> Result<(), IngestError> {
        if record.editor_name.is_empty() {
            return Ok(());
        }
        let info = self.fetch_editor_edit_count(&record.editor_name)?;
        record.editor_is_anonymous |= info.is_anonymous;
        record.editor_is_bot = info.is_bot;
        record.editor_edit_count = if record.editor_is_anonymous {
            match self.ip_edit_count {
                IpEditCount::Zero => 0,
                IpEditCount::PerIpContributions => self.fetch_ip_contribution_count(&record.editor_name)?,
            }
        } else {
            info.edit_count
        };
        Ok(())
    }
}

impl RecordEnricher for ApiClient {
    fn enrich(&self, record: &mut EditRecord) -> Result<(), IngestError> {
        match self.fetch_revision(record.revision_id, false) {
            Ok(fetched) => record.tags = fetched.revision.tags.into_iter().collect(),
            Err(IngestError::NotFound(what)) => warn!("no tags for {what}"),
            Err(e) => return Err(e),
        }
        self.apply_editor(record)
    }
}
