//! Tokenization and greedy longest-match entity extraction.

use super::lexicon::ConceptLexicon;
use super::negation::{detect_negation, NegationTriggers, DEFAULT_NEGATION_WINDOW};
use super::EntityMention;

/// Lowercase word/punctuation tokenizer. Alphanumeric runs become one token,
/// every other non-whitespace character becomes its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut word = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() {
            word.extend(ch.to_lowercase());
        } else {
            if !word.is_empty() {
                tokens.push(std::mem::take(&mut word));
            }
            if !ch.is_whitespace() {
                tokens.push(ch.to_lowercase().collect());
            }
        }
    }
    if !word.is_empty() {
        tokens.push(word);
    }
    tokens
}

/// Greedy longest-match, left to right, non-overlapping. At each position the
/// longest surface form wins; the scan resumes after the match.
pub fn extract_entities(
    text: &str,
    lexicon: &ConceptLexicon,
    triggers: &NegationTriggers,
) -> Vec<EntityMention> {
    let tokens = tokenize(text);
    let mut mentions = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let longest = lexicon.max_form_tokens().min(tokens.len() - i);
        let mut matched = None;
        for len in (1..=longest).rev() {
            if let Some(idx) = lexicon.lookup_form(&tokens[i..i + len]) {
                matched = Some((idx, len));
                break;
            }
        }
        match matched {
            Some((idx, len)) => {
                let span = (i, i + len);
                mentions.push(EntityMention {
                    cui: lexicon.entry(idx).cui.clone(),
                    span,
                    negated: detect_negation(&tokens, span, triggers, DEFAULT_NEGATION_WINDOW),
                });
                i += len;
            }
            None => i += 1,
        }
    }
    mentions
}
