use std::time::Duration;

use serde_json::Value;

/// Status and raw body of one HTTP exchange.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HttpReply {
    pub status: u16,
    pub body: String,
}

/// Sends one chat-completion request body. A returned `Err` means no HTTP
/// response was received (connection refused, reset, timed out).
pub trait ChatTransport: Sync {
    fn post(&self, body: &Value) -> Result<HttpReply, String>;
}

pub struct HttpTransport {
    client: reqwest::blocking::Client,
    url: String,
    api_key: Option<String>,
}

impl HttpTransport {
    pub fn new(url: impl Into<String>, api_key: Option<String>, timeout: Duration) -> Result<Self, String> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        Ok(Self { client, url: url.into(), api_key })
    }
}

impl ChatTransport for HttpTransport {
    fn post(&self, body: &Value) -> Result<HttpReply, String> {
        let mut req = self.client.post(&self.url).json(body);
        if let Some(key) = &self.api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        let status = resp.status().as_u16();
        let body = resp.text().map_err(|e| e.to_string())?;
        Ok(HttpReply { status, body })
    }
}
