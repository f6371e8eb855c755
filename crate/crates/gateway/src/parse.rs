/// Scene-level surfaces that are never tracked as objects.
pub const EXCLUDED_OBJECTS: [&str; 2] = ["wall", "floor"];
pub const MAX_OBJECTS: usize = 20;

fn normalize(item: &str) -> String {
    let t = item.trim().trim_end_matches('.').trim();
    t.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase()
}

/// `phrase` extends `base` by at least one whole word.
fn word_extends(phrase: &str, base: &str) -> bool {
    phrase.len() > base.len() && phrase.starts_with(base) && phrase.as_bytes()[base.len()] == b' '
}

fn clean(items: impl IntoIterator<Item = String>) -> Vec<String> {
    let mut uniq: Vec<String> = Vec::new();
    for it in items {
        if it.is_empty() || EXCLUDED_OBJECTS.contains(&it.as_str()) || uniq.contains(&it) {
            continue;
        }
        uniq.push(it);
    }
    let kept: Vec<String> = uniq.iter().filter(|p| !uniq.iter().any(|b| word_extends(p, b))).cloned().collect();
    kept.into_iter().take(MAX_OBJECTS).collect()
}

/// Object names from a semicolon-separated reply: trimmed, lowercased,
/// deduplicated, with names that extend another listed name dropped, scene
/// surfaces removed and at most [`MAX_OBJECTS`] kept.
pub fn parse_object_list(raw: &str) -> Vec<String> {
    clean(raw.split(';').map(normalize))
}

/// Union of the two frame-group lists, odd group first.
pub fn merge_group_lists(odd: &[String], even: &[String]) -> Vec<String> {
    clean(odd.iter().chain(even).map(|s| normalize(s)))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReferringExpressions {
    pub simple: String,
    pub situational: String,
}

/// Reads the `[simple expression]` / `[complex expression]` sections.
pub fn parse_referring(raw: &str) -> Option<ReferringExpressions> {
    let lower = raw.to_lowercase();
    let s = lower.find("[simple expression]")?;
    let c = lower.find("[complex expression]")?;
    let section = |start: usize, tag: &str, end: usize| raw[start + tag.len()..end].trim().to_string();
    let (simple, situational) = if s < c {
        (section(s, "[simple expression]", c), section(c, "[complex expression]", raw.len()))
    } else {
        (section(s, "[simple expression]", raw.len()), section(c, "[complex expression]", s))
    };
    (!simple.is_empty() && !situational.is_empty()).then_some(ReferringExpressions { simple, situational })
}

/// `Question: ... / Answer: ...` pairs in reply order; unpaired lines are
/// ignored.
pub fn parse_qa_pairs(raw: &str) -> Vec<(String, String)> {
    let mut out = Vec::new();
    let mut question: Option<String> = None;
    for line in raw.lines().map(str::trim) {
        if let Some(q) = line.strip_prefix("Question:") {
            question = Some(q.trim().to_string());
        } else if let Some(a) = line.strip_prefix("Answer:") {
            if let Some(q) = question.take() {
                out.push((q, a.trim().to_string()));
            }
        }
    }
    out
}
