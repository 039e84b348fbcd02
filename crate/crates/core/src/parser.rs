//! Parser for `<think>...</think> <answer>...</answer>` completions.
//!
//! The two format levels are reported independently: `structural_ok` says
//! whether the tag template holds, while entity extraction runs on whatever
//! answer-like region exists. A completion with broken tags can still yield
//! well-formed entities.

use std::ops::Range;
use std::sync::LazyLock;

use regex::Regex;

use crate::domain::{BoundingBox, EntityRole, ParsedCompletion, ParsedEntity};

const THINK_OPEN: &str = "<think>";
const THINK_CLOSE: &str = "</think>";
const ANSWER_OPEN: &str = "<answer>";
const ANSWER_CLOSE: &str = "</answer>";
const TAGS: [&str; 4] = [THINK_OPEN, THINK_CLOSE, ANSWER_OPEN, ANSWER_CLOSE];

static SEGMENT: LazyLock<Regex> = LazyLock::new(|| {
    let num = r"([+-]?(?:[0-9]+(?:\.[0-9]*)?|\.[0-9]+))";
    let pattern = format!(
        r"^(?i:(subject|object))\s*:\s*\[\s*\(\s*{num}\s*,\s*{num}\s*\)\s*,\s*\(\s*{num}\s*,\s*{num}\s*\)\s*\]$"
    );
    Regex::new(&pattern).expect("segment grammar compiles")
});

/// Byte ranges of the think and answer interiors of a template-conforming
/// completion.
struct Template {
    think: Range<usize>,
    answer: Range<usize>,
}

fn match_template(text: &str) -> Option<Template> {
    let start = text.len() - text.trim_start().len();
    let body = text[start..].trim_end();
    let end = start + body.len();

    let rest = body.strip_prefix(THINK_OPEN)?;
    let think_len = rest.find(THINK_CLOSE)?;
    let think = &rest[..think_len];
    let after_think = &rest[think_len + THINK_CLOSE.len()..];

    let gap = after_think.len() - after_think.trim_start().len();
    let rest = after_think[gap..].strip_prefix(ANSWER_OPEN)?;
    let answer = rest.strip_suffix(ANSWER_CLOSE)?;

    if contains_tag(think) || contains_tag(answer) {
        return None;
    }

    let think_start = start + THINK_OPEN.len();
    let answer_start = end - ANSWER_CLOSE.len() - answer.len();
    Some(Template {
        think: think_start..think_start + think.len(),
        answer: answer_start..answer_start + answer.len(),
    })
}

fn contains_tag(s: &str) -> bool {
    TAGS.iter().any(|t| s.contains(t))
}

/// Level-1 check: the trimmed text is exactly one think block followed by
/// exactly one answer block, separated only by whitespace.
pub fn check_structural_format(text: &str) -> bool {
    match_template(text).is_some()
}

/// Splits `text` on commas that are not nested inside `[]` or `()`. Returns
/// the byte range of every piece, untrimmed.
fn top_level_segments(text: &str) -> Vec<Range<usize>> {
    let mut out = Vec::new();
    let mut depth = 0i32;
    let mut seg_start = 0;
    for (i, c) in text.char_indices() {
        match c {
            '[' | '(' => depth += 1,
            ']' | ')' => depth = (depth - 1).max(0),
            ',' if depth == 0 => {
                out.push(seg_start..i);
                seg_start = i + 1;
            }
            _ => {}
        }
    }
    out.push(seg_start..text.len());
    out
}

fn parse_segment(segment: &str) -> Option<(EntityRole, BoundingBox)> {
    let caps = SEGMENT.captures(segment)?;
    let role = if caps[1].eq_ignore_ascii_case("subject") {
        EntityRole::Subject
    } else {
        EntityRole::Object
    };
    let mut coords = [0.0f64; 4];
    for (slot, group) in coords.iter_mut().zip(2..=5) {
        *slot = caps[group].parse().ok()?;
    }
    // rejects negative, non-finite and degenerate boxes alike
    let bbox = BoundingBox::new(coords[0], coords[1], coords[2], coords[3]).ok()?;
    Some((role, bbox))
}

/// Level-2 extraction over an answer interior.
///
/// Returns the well-formed entities (spans relative to `answer_text`) and the
/// number of segments that failed the entity grammar. Blank input has no
/// segments at all.
pub fn extract_entities(answer_text: &str) -> (Vec<ParsedEntity>, usize) {
    if answer_text.trim().is_empty() {
        return (Vec::new(), 0);
    }
    let mut entities = Vec::new();
    let mut malformed = 0;
    for range in top_level_segments(answer_text) {
        let raw = &answer_text[range.clone()];
        let lead = raw.len() - raw.trim_start().len();
        let trimmed = raw.trim();
        match parse_segment(trimmed) {
            Some((role, bbox)) => {
                let start = range.start + lead;
                entities.push(ParsedEntity {
                    role,
                    bbox,
                    source_span: start..start + trimmed.len(),
                });
            }
            None => malformed += 1,
        }
    }
    (entities, malformed)
}

fn first_answer_block(text: &str) -> Option<Range<usize>> {
    let open = text.find(ANSWER_OPEN)?;
    let inner_start = open + ANSWER_OPEN.len();
    let close = text[inner_start..].find(ANSWER_CLOSE)?;
    Some(inner_start..inner_start + close)
}

/// Parses a raw completion into its think text, entities and format flags.
///
/// Without a valid template, entities are read from the first
/// `<answer>...</answer>` pair if present, otherwise from the whole text.
pub fn parse_completion(text: &str) -> ParsedCompletion {
    let (structural_ok, think_text, region) = match match_template(text) {
        Some(t) => (true, Some(text[t.think].to_string()), t.answer),
        None => (false, None, first_answer_block(text).unwrap_or(0..text.len())),
    };
    let (mut entities, malformed_segment_count) = extract_entities(&text[region.clone()]);
    for e in &mut entities {
        e.source_span = e.source_span.start + region.start..e.source_span.end + region.start;
    }
    ParsedCompletion {
        structural_ok,
        think_text,
        entities,
        malformed_segment_count,
    }
}

/// Renders one entity as `role: [(x1, y1), (x2, y2)]` with shortest
/// round-tripping decimals.
pub fn format_entity(role: EntityRole, bbox: &BoundingBox) -> String {
    format!(
        "{}: [({}, {}), ({}, {})]",
        role,
        bbox.x1(),
        bbox.y1(),
        bbox.x2(),
        bbox.y2()
    )
}

/// Canonical answer interior for a list of role-labelled boxes.
pub fn format_answer<'a, I>(entities: I) -> String
where
    I: IntoIterator<Item = (EntityRole, &'a BoundingBox)>,
{
    entities
        .into_iter()
        .map(|(role, bbox)| format_entity(role, bbox))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Canonical full completion: `<think>{think}</think> <answer>{answer}</answer>`.
pub fn format_completion(think: &str, answer: &str) -> String {
    format!("{THINK_OPEN}{think}{THINK_CLOSE} {ANSWER_OPEN}{answer}{ANSWER_CLOSE}")
}

impl ParsedCompletion {
    /// Canonical text for a template-conforming parse; `None` when the
    /// structure check failed.
    pub fn to_canonical(&self) -> Option<String> {
        let think = self.think_text.as_deref().filter(|_| self.structural_ok)?;
        let answer = format_answer(self.entities.iter().map(|e| (e.role, &e.bbox)));
        Some(format_completion(think, &answer))
    }
}
