//! Clinical concept extraction: free-text notes in, ternary per-day health
//! vectors out.
//!
//! A [`ConceptLexicon`] maps surface forms to concept IDs (CUIs). Notes are
//! tokenized, matched greedily against the lexicon, and each mention is run
//! through a trigger-based negation detector. All mentions for one
//! patient-day collapse into a [`HealthVector`] with entries in {-1, 0, +1}:
//! +1 present, -1 mentioned only negatively, 0 unmentioned.

mod extract;
mod lexicon;
mod negation;

pub use extract::{extract_entities, tokenize};
pub use lexicon::{ConceptCategory, ConceptLexicon, LexiconEntry};
pub use negation::{detect_negation, NegationTriggers, DEFAULT_NEGATION_WINDOW};

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConceptError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("malformed line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("duplicate cui {cui}")]
    DuplicateCui { cui: String },
    #[error("surface form {form:?} maps to both {first} and {second}")]
    DuplicateSurfaceForm {
        form: String,
        first: String,
        second: String,
    },
    #[error("empty surface form under {cui}")]
    EmptySurfaceForm { cui: String },
    #[error("unknown cui {cui}")]
    UnknownCui { cui: String },
    #[error("note for patient {found_patient} day {found_day} in an aggregate for patient {expected_patient} day {expected_day}")]
    MixedAggregation {
        expected_patient: String,
        expected_day: u32,
        found_patient: String,
        found_day: u32,
    },
    #[error("trigger file line {line}: {message}")]
    BadTriggerLine { line: usize, message: String },
    #[error("health vector for {patient_id} day {day} has length {got}, lexicon has {want}")]
    VectorLength {
        patient_id: String,
        day: u32,
        got: usize,
        want: usize,
    },
    #[error("health vector entry {value} at index {index} is not ternary")]
    NonTernary { index: usize, value: i8 },
}

/// One timestamped clinical note.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClinicalNote {
    pub patient_id: String,
    pub day: u32,
    pub note_type: NoteType,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoteType {
    Nursing,
    Radiology,
    Ecg,
    Other,
}

/// A concept mention located in tokenized note text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EntityMention {
    pub cui: String,
    /// Token span, end exclusive.
    pub span: (usize, usize),
    pub negated: bool,
}

/// Ternary concept vector for one patient-day.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HealthVector {
    pub patient_id: String,
    pub day: u32,
    pub values: Vec<i8>,
}

impl HealthVector {
    pub fn validate(&self, vocab_size: usize) -> Result<(), ConceptError> {
        if self.values.len() != vocab_size {
            return Err(ConceptError::VectorLength {
                patient_id: self.patient_id.clone(),
                day: self.day,
                got: self.values.len(),
                want: vocab_size,
            });
        }
        for (index, &value) in self.values.iter().enumerate() {
            if !(-1..=1).contains(&value) {
                return Err(ConceptError::NonTernary { index, value });
            }
        }
        Ok(())
    }

    pub fn values_f64(&self) -> Vec<f64> {
        self.values.iter().map(|&v| f64::from(v)).collect()
    }
}

/// Collapse mentions into a ternary vector. A concept with any non-negated
/// mention that day is +1 even if it was also negated (positive precedence);
/// only-negated concepts are -1; unmentioned concepts are 0.
pub fn build_health_vector(
    mentions: &[EntityMention],
    lexicon: &ConceptLexicon,
    patient_id: &str,
    day: u32,
) -> Result<HealthVector, ConceptError> {
    let mut affirmed = vec![false; lexicon.vocab_size()];
    let mut negated = vec![false; lexicon.vocab_size()];
    for mention in mentions {
        let idx = lexicon
            .index_of(&mention.cui)
            .ok_or_else(|| ConceptError::UnknownCui {
                cui: mention.cui.clone(),
            })?;
        if mention.negated {
            negated[idx] = true;
        } else {
            affirmed[idx] = true;
        }
    }
    let values = affirmed
        .iter()
        .zip(&negated)
        .map(|(&a, &n)| {
            if a {
                1
            } else if n {
                -1
            } else {
                0
            }
        })
        .collect();
    Ok(HealthVector {
        patient_id: patient_id.to_string(),
        day,
        values,
    })
}

/// Union the mentions of all notes for one patient-day, then vectorize.
/// Every note must belong to `(patient_id, day)`.
pub fn aggregate_day(
    patient_id: &str,
    day: u32,
    notes: &[ClinicalNote],
    lexicon: &ConceptLexicon,
    triggers: &NegationTriggers,
) -> Result<HealthVector, ConceptError> {
    let mut mentions = Vec::new();
    for note in notes {
        if note.patient_id != patient_id || note.day != day {
            return Err(ConceptError::MixedAggregation {
                expected_patient: patient_id.to_string(),
                expected_day: day,
                found_patient: note.patient_id.clone(),
                found_day: note.day,
            });
        }
        mentions.extend(extract_entities(&note.text, lexicon, triggers));
    }
    build_health_vector(&mentions, lexicon, patient_id, day)
}

/// Vectorize a whole notes file: one [`HealthVector`] per observed
/// (patient_id, day), ordered by patient then day.
pub fn vectorize_notes(
    notes: &[ClinicalNote],
    lexicon: &ConceptLexicon,
    triggers: &NegationTriggers,
) -> Result<Vec<HealthVector>, ConceptError> {
    let mut by_day: BTreeMap<(String, u32), Vec<&ClinicalNote>> = BTreeMap::new();
    for note in notes {
        by_day
            .entry((note.patient_id.clone(), note.day))
            .or_default()
            .push(note);
    }
    let mut out = Vec::with_capacity(by_day.len());
    for ((patient_id, day), group) in by_day {
        let notes: Vec<ClinicalNote> = group.into_iter().cloned().collect();
        out.push(aggregate_day(&patient_id, day, &notes, lexicon, triggers)?);
    }
    Ok(out)
}

fn io_err(path: &Path, source: std::io::Error) -> ConceptError {
    ConceptError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Notes file: JSONL, one note per line.
pub fn read_notes_jsonl(path: &Path) -> Result<Vec<ClinicalNote>, ConceptError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut notes = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let note: ClinicalNote =
            serde_json::from_str(&line).map_err(|e| ConceptError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        notes.push(note);
    }
    Ok(notes)
}

pub fn write_notes_jsonl(notes: &[ClinicalNote], path: &Path) -> Result<(), ConceptError> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    for note in notes {
        let line = serde_json::to_string(note).expect("note serialization cannot fail");
        writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}

/// Health-vector file: JSONL, one dense ternary vector per patient-day.
pub fn read_vectors_jsonl(
    path: &Path,
    vocab_size: usize,
) -> Result<Vec<HealthVector>, ConceptError> {
    let file = File::open(path).map_err(|e| io_err(path, e))?;
    let mut vectors = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| io_err(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let vector: HealthVector =
            serde_json::from_str(&line).map_err(|e| ConceptError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        vector.validate(vocab_size)?;
        vectors.push(vector);
    }
    Ok(vectors)
}

pub fn write_vectors_jsonl(vectors: &[HealthVector], path: &Path) -> Result<(), ConceptError> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    for vector in vectors {
        let line = serde_json::to_string(vector).expect("vector serialization cannot fail");
        writeln!(file, "{line}").map_err(|e| io_err(path, e))?;
    }
    Ok(())
}
