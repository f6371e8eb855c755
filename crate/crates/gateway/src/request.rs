use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Part {
    Text { text: String },
    /// Logical image path; the live transport inlines the file.
    ImageUrl { image_url: ImageUrl },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageUrl {
    pub url: String,
}

impl Part {
    pub fn text(t: impl Into<String>) -> Self {
        Part::Text { text: t.into() }
    }

    pub fn image(path: impl Into<String>) -> Self {
        Part::ImageUrl {
            image_url: ImageUrl { url: path.into() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: Vec<Part>,
}

/// Wire form of a chat-completions request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatRequest {
    pub model: String,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub max_tokens: u32,
}

impl ChatRequest {
    pub fn image_refs(&self) -> impl Iterator<Item = &str> {
        self.messages.iter().flat_map(|m| m.content.iter()).filter_map(|p| match p {
            Part::ImageUrl { image_url } => Some(image_url.url.as_str()),
            Part::Text { .. } => None,
        })
    }

    pub fn part_count(&self) -> usize {
        self.messages.iter().map(|m| m.content.len()).sum()
    }

    /// At least one message, and every local image reference names an
    /// existing file under `image_root`.
    pub fn validate(&self, image_root: &std::path::Path) -> Result<(), String> {
        if self.messages.is_empty() {
            return Err("request has no messages".into());
        }
        for url in self.image_refs() {
            if url.starts_with("data:") || url.starts_with("http") {
                continue;
            }
            if !image_root.join(url).is_file() {
                return Err(format!("image {url} not found under {}", image_root.display()));
            }
        }
        Ok(())
    }

    /// Pretty JSON with a trailing newline, as stored in golden files.
    pub fn to_golden(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("request serializes");
        s.push('\n');
        s
    }
}

/// sha256 of the compact JSON wire form.
pub fn request_digest(req: &ChatRequest) -> String {
    let json = serde_json::to_string(req).expect("request serializes");
    hex::encode(Sha256::digest(json.as_bytes()))
}
