use egoqa_core::metrics::{Judge, JudgeError, JudgeRequest};

use crate::chat::{chat, RetryPolicy, Sleeper};
use crate::prompts::{build_prompt, PromptInputs, PromptKind};
use crate::transport::Transport;
use crate::GatewayError;

/// First number in a judge reply. Grid membership is checked by the caller.
pub fn parse_score(reply: &str) -> Option<f64> {
    let bytes = reply.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() || (bytes[i] == b'.' && bytes.get(i + 1).is_some_and(u8::is_ascii_digit)) {
            let start = i;
            while i < bytes.len() && (bytes[i].is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            return reply[start..i].trim_end_matches('.').parse().ok();
        }
        i += 1;
    }
    None
}

/// Judge backed by a chat model.
pub struct LlmJudge<'a> {
    pub transport: &'a dyn Transport,
    pub model: String,
    pub policy: RetryPolicy,
    pub sleeper: &'a dyn Sleeper,
}

impl LlmJudge<'_> {
    pub fn request(&self, req: &JudgeRequest) -> Result<crate::ChatRequest, GatewayError> {
        let inputs = PromptInputs {
            model: self.model.clone(),
            question: Some(req.question.clone()),
            reference: Some(req.reference.clone()),
            prediction: Some(req.prediction.clone()),
            attempt: req.attempt,
            ..PromptInputs::default()
        };
        build_prompt(PromptKind::for_judge(req.mode), &inputs)
    }
}

impl Judge for LlmJudge<'_> {
    fn judge(&self, req: &JudgeRequest) -> Result<f64, JudgeError> {
        let chat_req = self.request(req).map_err(|e| JudgeError::Unavailable(e.to_string()))?;
        let out = match chat(self.transport, &chat_req, &self.policy, self.sleeper) {
            Ok(o) => o,
            Err(GatewayError::MalformedResponse(m)) => return Err(JudgeError::Malformed(m)),
            Err(e) => return Err(JudgeError::Unavailable(e.to_string())),
        };
        parse_score(&out.text).ok_or_else(|| JudgeError::Malformed(out.text.trim().to_string()))
    }
}
