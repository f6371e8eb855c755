use std::sync::Mutex;
use std::time::Duration;

use crate::request::{request_digest, ChatRequest};
use crate::transport::{Transport, TransportError};
use crate::GatewayError;

/// Exponential backoff for transient failures.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RetryPolicy {
    pub base_delay: Duration,
    pub factor: f64,
    pub max_attempts: u32,
}

impl Default for RetryPolicy {
    fn default() -> Self {
        Self {
            base_delay: Duration::from_secs(1),
            factor: 2.0,
            max_attempts: 5,
        }
    }
}

impl RetryPolicy {
    /// Delay after failed attempt `n` (1-based).
    pub fn delay(&self, n: u32) -> Duration {
        self.base_delay.mul_f64(self.factor.powi(n.saturating_sub(1) as i32))
    }
}

pub trait Sleeper: Send + Sync {
    fn sleep(&self, d: Duration);
}

pub struct ThreadSleeper;

impl Sleeper for ThreadSleeper {
    fn sleep(&self, d: Duration) {
        std::thread::sleep(d);
    }
}

pub struct NoSleep;

impl Sleeper for NoSleep {
    fn sleep(&self, _: Duration) {}
}

/// Records requested delays without sleeping.
#[derive(Default)]
pub struct RecordingSleeper {
    pub delays: Mutex<Vec<Duration>>,
}

impl Sleeper for RecordingSleeper {
    fn sleep(&self, d: Duration) {
        self.delays.lock().unwrap().push(d);
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatOutcome {
    pub text: String,
    pub attempts: u32,
    pub digest: String,
}

/// Sends one request, retrying transient failures under `policy`. An empty
/// reply is an error, not retried.
pub fn chat(
    transport: &dyn Transport,
    request: &ChatRequest,
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
) -> Result<ChatOutcome, GatewayError> {
    let digest = request_digest(request);
    let mut attempt = 0;
    loop {
        attempt += 1;
        match transport.send(request) {
            Ok(text) => {
                log::debug!("request {digest} answered after {attempt} attempt(s)");
                if text.trim().is_empty() {
                    return Err(GatewayError::MalformedResponse(format!("empty reply to {digest}")));
                }
                return Ok(ChatOutcome { text, attempts: attempt, digest });
            }
            Err(TransportError::Fatal(m)) => return Err(GatewayError::Transport(m)),
            Err(TransportError::Transient(m)) => {
                log::warn!("request {digest} attempt {attempt} failed: {m}");
                if attempt >= policy.max_attempts {
                    return Err(GatewayError::Exhausted { attempts: attempt, last: m });
                }
                sleeper.sleep(policy.delay(attempt));
            }
        }
    }
}

/// Runs requests with at most `max_in_flight` concurrent calls; results keep
/// input order.
pub fn chat_many(
    transport: &dyn Transport,
    requests: &[ChatRequest],
    policy: &RetryPolicy,
    sleeper: &dyn Sleeper,
    max_in_flight: usize,
) -> Vec<Result<ChatOutcome, GatewayError>> {
    let workers = max_in_flight.max(1).min(requests.len().max(1));
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Result<ChatOutcome, GatewayError>>>> = Mutex::new(vec![None; requests.len()]);
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = {
                    let mut n = next.lock().unwrap();
                    let i = *n;
                    *n += 1;
                    i
                };
                if i >= requests.len() {
                    break;
                }
                let r = chat(transport, &requests[i], policy, sleeper);
                results.lock().unwrap()[i] = Some(r);
            });
        }
    });
    results.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}
