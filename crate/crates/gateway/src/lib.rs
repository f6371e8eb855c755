//! Chat-completion client: prompt construction for annotation and judging,
//! reply post-processing, retrying transport with a replayable mock.

mod chat;
mod judge;
mod parse;
mod prompts;
mod request;
mod transport;

pub use chat::{chat, chat_many, ChatOutcome, NoSleep, RecordingSleeper, RetryPolicy, Sleeper, ThreadSleeper};
pub use judge::{parse_score, LlmJudge};
pub use parse::{merge_group_lists, parse_object_list, parse_qa_pairs, parse_referring, ReferringExpressions, EXCLUDED_OBJECTS, MAX_OBJECTS};
pub use prompts::{build_prompt, caption_inputs, split_frame_groups, PromptInputs, PromptKind, OBJECT_LIST_FRAMES};
pub use request::{request_digest, ChatRequest, Message, Part, Role};
pub use transport::{Fixture, GatewayConfig, HttpTransport, MockTransport, ScriptedTransport, Transport, TransportError};

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum GatewayError {
    #[error("prompt {kind:?} is missing input: {what}")]
    MissingInput { kind: PromptKind, what: String },
    #[error("gave up after {attempts} attempts: {last}")]
    Exhausted { attempts: u32, last: String },
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("transport: {0}")]
    Transport(String),
    #[error("fixtures: {0}")]
    Fixtures(String),
    #[error("configuration: {0}")]
    Config(String),
}
