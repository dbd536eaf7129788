//! Boundary and contextual scoring prompts, and score parsing.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rubric::Rubric;

pub(crate) const TARGET_HEADER: &str = "TARGET SCENE:";
pub(crate) const PREV_HEADER: &str = "PREVIOUS SCENE (context only):";
pub(crate) const NEXT_HEADER: &str = "NEXT SCENE (context only):";
pub(crate) const GLOBAL_HEADER: &str = "GLOBAL VIDEO DESCRIPTION:";
pub(crate) const PREFERENCE_PREFIX: &str = "USER PREFERENCE: ";
const OPEN: &str = "<<<";
const CLOSE: &str = ">>>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScoringMode {
    Boundary,
    Contextual,
}

#[derive(Debug, Clone)]
pub struct ScoringRequest<'a> {
    pub scene_index: usize,
    pub target_caption: &'a str,
    pub global_caption: &'a str,
    pub prev_caption: Option<&'a str>,
    pub next_caption: Option<&'a str>,
    pub preference: Option<&'a str>,
    pub rubric: &'a Rubric,
    pub mode: ScoringMode,
}

impl ScoringRequest<'_> {
    pub fn validate(&self) -> Result<()> {
        match (self.mode, self.prev_caption, self.next_caption) {
            (ScoringMode::Boundary, None, None) | (ScoringMode::Contextual, Some(_), Some(_)) => Ok(()),
            (ScoringMode::Boundary, ..) => Err(Error::invalid("boundary request must not carry neighbor captions")),
            (ScoringMode::Contextual, ..) => Err(Error::invalid("contextual request needs both neighbor captions")),
        }
    }
}

fn block(out: &mut String, header: &str, body: &str) {
    let _ = write!(out, "{header}\n{OPEN}\n{}\n{CLOSE}\n\n", body.trim());
}

fn preamble(req: &ScoringRequest<'_>) -> String {
    let mut p = String::from(
        "You are an expert annotator for video summarization. Rate how important the target scene \
         is for a concise summary of the whole video.\n\nRUBRIC:\n",
    );
    p.push_str(&req.rubric.to_prompt_text());
    p.push_str("\n\n");
    block(&mut p, GLOBAL_HEADER, req.global_caption);
    p
}

fn preference_rule(req: &ScoringRequest<'_>) -> Option<String> {
    req.preference.filter(|s| !s.trim().is_empty()).map(|pref| {
        format!(
            "{PREFERENCE_PREFIX}{}\nTreat the preference as a modifier of the relevance judgement only, \
             changing the score by at most {} points in either direction.",
            pref.trim(),
            req.rubric.preference_adjustment_bound
        )
    })
}

fn rules(out: &mut String, rules: &[String]) {
    out.push_str("RULES:\n");
    for (i, r) in rules.iter().enumerate() {
        let _ = writeln!(out, "{}. {r}", i + 1);
    }
}

/// Target-only prompt used for the first and last scene.
pub fn build_boundary_prompt(req: &ScoringRequest<'_>) -> Result<String> {
    if req.mode != ScoringMode::Boundary {
        return Err(Error::invalid("build_boundary_prompt needs a Boundary request"));
    }
    req.validate()?;
    let mut p = preamble(req);
    block(&mut p, TARGET_HEADER, req.target_caption);
    let mut r = vec![
        "Score only the target scene against the rubric.".to_string(),
        "Use the global description solely to understand the theme of the video.".to_string(),
        "Ignore previous/next scenes entirely; judge the target from its own description.".to_string(),
    ];
    r.extend(preference_rule(req));
    r.push(req.rubric.output_rule.clone());
    rules(&mut p, &r);
    Ok(p)
}

/// Prompt for an intermediate scene, with both neighbors as context only.
pub fn build_context_prompt(req: &ScoringRequest<'_>) -> Result<String> {
    if req.mode != ScoringMode::Contextual {
        return Err(Error::invalid("build_context_prompt needs a Contextual request"));
    }
    req.validate()?;
    let mut p = preamble(req);
    block(&mut p, PREV_HEADER, req.prev_caption.expect("validated"));
    block(&mut p, TARGET_HEADER, req.target_caption);
    block(&mut p, NEXT_HEADER, req.next_caption.expect("validated"));
    let mut r = vec![
        "SCORE ONLY THE TARGET SCENE. The previous and next scenes are context signals and are never scored."
            .to_string(),
        "Before answering, make brief internal notes comparing the target with its neighbors; do not output them."
            .to_string(),
        "Conservative context adjustment: +5 if the target adds new content relative to both neighbors, \
         -5 if it duplicates both neighbors, otherwise 0."
            .to_string(),
    ];
    r.extend(preference_rule(req));
    r.push(req.rubric.output_rule.clone());
    rules(&mut p, &r);
    Ok(p)
}

pub fn build_prompt(req: &ScoringRequest<'_>) -> Result<String> {
    match req.mode {
        ScoringMode::Boundary => build_boundary_prompt(req),
        ScoringMode::Contextual => build_context_prompt(req),
    }
}

/// Body of the block under `header`, if present.
pub(crate) fn extract_block<'p>(prompt: &'p str, header: &str) -> Option<&'p str> {
    let start = prompt.find(&format!("{header}\n{OPEN}\n"))? + header.len() + OPEN.len() + 2;
    let end = prompt[start..].find(&format!("\n{CLOSE}\n"))?;
    Some(&prompt[start..start + end])
}

/// Integer tokens: maximal digit runs, with a directly preceding `-` kept.
fn integer_tokens(text: &str) -> Vec<&str> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        if bytes[i].is_ascii_digit() {
            let start = if i > 0 && bytes[i - 1] == b'-' { i - 1 } else { i };
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            out.push(&text[start..i]);
        } else {
            i += 1;
        }
    }
    out
}

fn in_range(token: &str) -> Result<u8> {
    match token.parse::<i64>() {
        Ok(v) if (0..=100).contains(&v) => Ok(v as u8),
        _ => Err(Error::MalformedScore(format!("score `{token}` outside [0,100]"))),
    }
}

/// Accept a response that is exactly one integer in [0,100]; failing that,
/// a response that contains exactly one integer token.
pub fn parse_score(text: &str) -> Result<u8> {
    let trimmed = text.trim();
    let strict = trimmed.strip_prefix('+').unwrap_or(trimmed);
    if !strict.is_empty() && strict.bytes().all(|b| b.is_ascii_digit()) {
        return in_range(strict);
    }
    match integer_tokens(text).as_slice() {
        [one] => in_range(one),
        [] => Err(Error::MalformedScore(format!("no integer in `{}`", trimmed))),
        many => Err(Error::MalformedScore(format!(
            "{} integers in `{}`",
            many.len(),
            trimmed
        ))),
    }
}
