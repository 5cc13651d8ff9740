//! HTTP client for the oracle wire protocol.
//!
//! ```text
//! GET  /v1/meta            -> {"num_classes": C, "width": W, "height": H}
//! POST /v1/classify        {"width", "height", "pixels"}  -> {"probs": [..]}
//! POST /v1/classify_batch  {"images": [{..}, ..]}          -> {"probs": [[..], ..]}
//! ```
//!
//! Connection failures and 5xx answers are retried with exponential backoff;
//! 4xx answers are reported immediately.

use std::thread;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use ureq::http::Response;
use ureq::{Agent, Body};

use super::{Classifier, ProbabilityVector};
use crate::error::{Error, Result};
use crate::image::Image;

/// Environment variable consulted for the oracle endpoint when no URL is
/// given explicitly.
pub const ORACLE_URL_ENV: &str = "REGIONWISE_ORACLE_URL";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RetryPolicy {
    /// Retries after the first attempt.
    pub max_retries: u32,
    /// Delay before the first retry; doubles on each subsequent one.
    pub initial_backoff: Duration,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            max_retries: 3,
            initial_backoff: Duration::from_millis(100),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    num_classes: usize,
    width: usize,
    height: usize,
}

#[derive(Serialize)]
struct ImageBody<'a> {
    width: usize,
    height: usize,
    pixels: &'a [f64],
}

impl<'a> From<&'a Image> for ImageBody<'a> {
    fn from(img: &'a Image) -> Self {
        ImageBody {
            width: img.width(),
            height: img.height(),
            pixels: img.pixels(),
        }
    }
}

#[derive(Serialize)]
struct BatchBody<'a> {
    images: Vec<ImageBody<'a>>,
}

#[derive(Deserialize)]
struct ProbsReply {
    probs: Vec<f64>,
}

#[derive(Deserialize)]
struct BatchReply {
    probs: Vec<Vec<f64>>,
}

enum Attempt<T> {
    Done(T),
    Transient(String),
}

/// Classifier living behind the oracle wire protocol.
#[derive(Debug, Clone)]
pub struct RemoteClassifier {
    base: String,
    agent: Agent,
    retry: RetryPolicy,
    num_classes: usize,
    dims: (usize, usize),
}

impl RemoteClassifier {
    /// Connects with the default retry policy and fetches `/v1/meta`.
    pub fn connect(base_url: &str) -> Result<Self> {
        Self::connect_with(base_url, RetryPolicy::default())
    }

    pub fn connect_with(base_url: &str, retry: RetryPolicy) -> Result<Self> {
        let agent: Agent = Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(60)))
            .build()
            .into();
        let base = base_url.trim_end_matches('/').to_string();
        let mut client = Self {
            base,
            agent,
            retry,
            num_classes: 0,
            dims: (0, 0),
        };
        let meta: Meta = client.with_retries(|c| c.get_json("/v1/meta"))?;
        if meta.num_classes < 2 || meta.width == 0 || meta.height == 0 {
            return Err(Error::InvalidConfig(format!(
                "oracle advertises unusable metadata: {meta:?}"
            )));
        }
        client.num_classes = meta.num_classes;
        client.dims = (meta.width, meta.height);
        Ok(client)
    }

    pub fn base_url(&self) -> &str {
        &self.base
    }

    fn with_retries<T>(&self, mut call: impl FnMut(&Self) -> Result<Attempt<T>>) -> Result<T> {
        let mut delay = self.retry.initial_backoff;
        let mut last = String::new();
        for attempt in 0..=self.retry.max_retries {
            if attempt > 0 {
                thread::sleep(delay);
                delay *= 2;
            }
            match call(self)? {
                Attempt::Done(v) => return Ok(v),
                Attempt::Transient(msg) => last = msg,
            }
        }
        Err(Error::Transport {
            attempts: self.retry.max_retries + 1,
            message: format!("{}: {last}", self.base),
        })
    }

    fn get_json<T: for<'de> Deserialize<'de>>(&self, path: &str) -> Result<Attempt<T>> {
        let sent = self.agent.get(format!("{}{path}", self.base)).call();
        Self::interpret(sent)
    }

    fn post_json<T: for<'de> Deserialize<'de>>(
        &self,
        path: &str,
        body: &impl Serialize,
    ) -> Result<Attempt<T>> {
        let sent = self
            .agent
            .post(format!("{}{path}", self.base))
            .send_json(body);
        Self::interpret(sent)
    }

    fn interpret<T: for<'de> Deserialize<'de>>(
        sent: std::result::Result<Response<Body>, ureq::Error>,
    ) -> Result<Attempt<T>> {
        let mut resp = match sent {
            Ok(r) => r,
            Err(e) => return Ok(Attempt::Transient(e.to_string())),
        };
        let status = resp.status().as_u16();
        if status >= 500 {
            return Ok(Attempt::Transient(format!("server answered {status}")));
        }
        if status >= 400 {
            let message = resp.body_mut().read_to_string().unwrap_or_default();
            return Err(Error::Rejected { status, message });
        }
        match resp.body_mut().read_json::<T>() {
            Ok(v) => Ok(Attempt::Done(v)),
            Err(e) => Err(Error::InvalidProbabilities(format!(
                "unreadable oracle reply: {e}"
            ))),
        }
    }
}

impl Classifier for RemoteClassifier {
    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn input_dims(&self) -> (usize, usize) {
        self.dims
    }

    fn classify(&self, image: &Image) -> Result<ProbabilityVector> {
        let body = ImageBody::from(image);
        let reply: ProbsReply = self.with_retries(|c| c.post_json("/v1/classify", &body))?;
        ProbabilityVector::new(reply.probs)
    }

    fn classify_batch(&self, images: &[Image]) -> Result<Vec<ProbabilityVector>> {
        let body = BatchBody {
            images: images.iter().map(ImageBody::from).collect(),
        };
        let reply: BatchReply = self.with_retries(|c| c.post_json("/v1/classify_batch", &body))?;
        reply.probs.into_iter().map(ProbabilityVector::new).collect()
    }
}
