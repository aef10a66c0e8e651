//! Trigger-based negation detection over token windows.
//!
//! A mention is negated when a pre-trigger ends within `window` tokens before
//! it, or a post-trigger starts within `window` tokens after it, and no
//! scope-terminating token sequence sits between trigger and mention.

use std::fs;
use std::path::Path;

use super::extract::tokenize;
use super::ConceptError;

pub const DEFAULT_NEGATION_WINDOW: usize = 5;

const DEFAULT_TRIGGERS: &str = include_str!("../../data/negation_triggers.txt");

#[derive(Debug, Clone)]
pub struct NegationTriggers {
    pre: Vec<Vec<String>>,
    post: Vec<Vec<String>>,
    terminators: Vec<Vec<String>>,
}

impl Default for NegationTriggers {
    fn default() -> Self {
        Self::parse(DEFAULT_TRIGGERS).expect("embedded trigger list is valid")
    }
}

impl NegationTriggers {
    pub fn from_path(path: &Path) -> Result<Self, ConceptError> {
        let text = fs::read_to_string(path).map_err(|e| ConceptError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    /// Plain text: one trigger per line under `[PRE]`, `[POST]`, `[TERM]`
    /// section headers; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, ConceptError> {
        #[derive(PartialEq)]
        enum Section {
            None,
            Pre,
            Post,
            Term,
        }
        let mut section = Section::None;
        let mut out = NegationTriggers {
            pre: Vec::new(),
            post: Vec::new(),
            terminators: Vec::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            match line {
                "[PRE]" => section = Section::Pre,
                "[POST]" => section = Section::Post,
                "[TERM]" => section = Section::Term,
                _ => {
                    let tokens = tokenize(line);
                    if tokens.is_empty() {
                        return Err(ConceptError::BadTriggerLine {
                            line: i + 1,
                            message: format!("trigger {line:?} has no tokens"),
                        });
                    }
                    match section {
                        Section::Pre => out.pre.push(tokens),
                        Section::Post => out.post.push(tokens),
                        Section::Term => out.terminators.push(tokens),
                        Section::None => {
                            return Err(ConceptError::BadTriggerLine {
                                line: i + 1,
                                message: "trigger before any [PRE]/[POST]/[TERM] header".into(),
                            })
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<(), ConceptError> {
        let mut text = String::from("[PRE]\n");
        for t in &self.pre {
            text.push_str(&t.join(" "));
            text.push('\n');
        }
        text.push_str("\n[POST]\n");
        for t in &self.post {
            text.push_str(&t.join(" "));
            text.push('\n');
        }
        text.push_str("\n[TERM]\n");
        for t in &self.terminators {
            text.push_str(&t.join(" "));
            text.push('\n');
        }
        fs::write(path, text).map_err(|e| ConceptError::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    fn seq_matches(tokens: &[String], at: usize, seq: &[String]) -> bool {
        tokens.len() - at >= seq.len() && tokens[at..at + seq.len()] == *seq
    }

    /// Does any terminator sequence start inside [from, to)?
    fn terminator_in(&self, tokens: &[String], from: usize, to: usize) -> bool {
        self.terminators
            .iter()
            .any(|t| (from..to).any(|p| Self::seq_matches(tokens, p, t)))
    }
}

/// True iff `span` (token indices, end exclusive) is negated under the
/// trigger list with the given token window.
pub fn detect_negation(
    tokens: &[String],
    span: (usize, usize),
    triggers: &NegationTriggers,
    window: usize,
) -> bool {
    let (start, end) = span;
    assert!(end > start && end <= tokens.len(), "invalid mention span");

    // pre-triggers: trigger end within `window` tokens before the span start
    for trig in &triggers.pre {
        let scan_from = start.saturating_sub(window + trig.len());
        for pos in scan_from..start {
            if !NegationTriggers::seq_matches(tokens, pos, trig) {
                continue;
            }
            let trig_end = pos + trig.len();
            if trig_end <= start
                && start - trig_end <= window
                && !triggers.terminator_in(tokens, trig_end, start)
            {
                return true;
            }
        }
    }

    // post-triggers: trigger start within `window` tokens after the span end
    for trig in &triggers.post {
        let scan_to = (end + window + 1).min(tokens.len());
        for pos in end..scan_to {
            if NegationTriggers::seq_matches(tokens, pos, trig)
                && pos - end <= window
                && !triggers.terminator_in(tokens, end, pos)
            {
                return true;
            }
        }
    }

    false
}
