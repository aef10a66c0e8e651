//! Surface-form → concept-ID dictionary. Stands in for a terminology service:
//! the contract is the same (synonyms collapse onto one CUI) but the data is a
//! local JSONL file.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::extract::tokenize;
use super::ConceptError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConceptCategory {
    DiseaseSymptom,
    InjuryPoisoning,
    Abnormality,
    Lifestyle,
    MentalHealth,
    PriorHistory,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub cui: String,
    pub name: String,
    pub category: ConceptCategory,
    pub surface_forms: Vec<String>,
}

/// Validated lexicon with a deterministic vocabulary index: entries sorted by
/// CUI, index = position.
#[derive(Debug, Clone)]
pub struct ConceptLexicon {
    entries: Vec<LexiconEntry>,
    index_by_cui: HashMap<String, usize>,
    /// Tokenized surface form → vocabulary index.
    form_index: HashMap<Vec<String>, usize>,
    max_form_tokens: usize,
}

impl ConceptLexicon {
    pub fn from_entries(mut entries: Vec<LexiconEntry>) -> Result<Self, ConceptError> {
        entries.sort_by(|a, b| a.cui.cmp(&b.cui));

        let mut index_by_cui = HashMap::new();
        for (i, entry) in entries.iter().enumerate() {
            if index_by_cui.insert(entry.cui.clone(), i).is_some() {
                return Err(ConceptError::DuplicateCui {
                    cui: entry.cui.clone(),
                });
            }
        }

        // Surface forms are matched on token sequences, so normalize them
        // through the same tokenizer used on note text.
        let mut form_index: HashMap<Vec<String>, usize> = HashMap::new();
        let mut max_form_tokens = 0;
        let mut normalized_forms: Vec<Vec<String>> = vec![Vec::new(); entries.len()];
        for (i, entry) in entries.iter().enumerate() {
            for form in &entry.surface_forms {
                let tokens = tokenize(form);
                if tokens.is_empty() {
                    return Err(ConceptError::EmptySurfaceForm {
                        cui: entry.cui.clone(),
                    });
                }
                let canonical = tokens.join(" ");
                match form_index.get(&tokens) {
                    Some(&prev) if prev != i => {
                        return Err(ConceptError::DuplicateSurfaceForm {
                            form: canonical,
                            first: entries[prev].cui.clone(),
                            second: entry.cui.clone(),
                        });
                    }
                    Some(_) => continue, // same form repeated under one concept
                    None => {
                        max_form_tokens = max_form_tokens.max(tokens.len());
                        form_index.insert(tokens, i);
                        normalized_forms[i].push(canonical);
                    }
                }
            }
        }
        for (entry, forms) in entries.iter_mut().zip(normalized_forms) {
            entry.surface_forms = forms;
        }

        Ok(ConceptLexicon {
            entries,
            index_by_cui,
            form_index,
            max_form_tokens,
        })
    }

    /// Load from JSONL, one concept per line.
    pub fn from_path(path: &Path) -> Result<Self, ConceptError> {
        let file = File::open(path).map_err(|e| ConceptError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn from_reader(reader: impl BufRead) -> Result<Self, ConceptError> {
        let mut entries = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line.map_err(|e| ConceptError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: LexiconEntry =
                serde_json::from_str(&line).map_err(|e| ConceptError::MalformedLine {
                    line: i + 1,
                    message: e.to_string(),
                })?;
            entries.push(entry);
        }
        Self::from_entries(entries)
    }

    pub fn vocab_size(&self) -> usize {
        self.entries.len()
    }

    pub fn entries(&self) -> &[LexiconEntry] {
        &self.entries
    }

    pub fn index_of(&self, cui: &str) -> Option<usize> {
        self.index_by_cui.get(cui).copied()
    }

    pub fn entry(&self, index: usize) -> &LexiconEntry {
        &self.entries[index]
    }

    pub(super) fn lookup_form(&self, tokens: &[String]) -> Option<usize> {
        self.form_index.get(tokens).copied()
    }

    pub(super) fn max_form_tokens(&self) -> usize {
        self.max_form_tokens
    }

    pub fn write_jsonl(&self, path: &Path) -> Result<(), ConceptError> {
        use std::io::Write;
        let mut file = File::create(path).map_err(|e| ConceptError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        for entry in &self.entries {
            let line = serde_json::to_string(entry).expect("entry serialization cannot fail");
            writeln!(file, "{line}").map_err(|e| ConceptError::Io {
                path: path.display().to_string(),
                source: e,
            })?;
        }
        Ok(())
    }
}
