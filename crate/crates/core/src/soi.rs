//! Severity-of-illness scores (APACHE-II, SAPS-II, SOFA, OASIS) computed from
//! a structured vitals/labs panel by data-driven range tables.
//!
//! The tables are data, not code: each score is a sum of per-variable points
//! looked up in the loaded bands. Missing variables charge the table's
//! missing-value points (default 0, i.e. assume normal). The shipped default
//! tables live in `data/scoring_tables.txt`.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const DEFAULT_TABLES: &str = include_str!("../data/scoring_tables.txt");

#[derive(Debug, Error)]
pub enum SoiError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("scoring table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("scoring table [{score}]: negative points for {variable}")]
    NegativePoints { score: ScoreKind, variable: String },
    #[error("scoring table [{score}]: overlapping ranges for {variable}")]
    OverlappingRanges { score: ScoreKind, variable: String },
    #[error("scoring table [{score}]: coverage gap for {variable} at {at}")]
    CoverageGap {
        score: ScoreKind,
        variable: String,
        at: f64,
    },
    #[error("scoring table [{score}]: unknown panel variable {variable}")]
    UnknownVariable { score: ScoreKind, variable: String },
    #[error("missing score sections: {missing:?}")]
    MissingScores { missing: Vec<String> },
    #[error("{variable} = {value} outside plausible range for {score}")]
    ImplausibleValue {
        score: ScoreKind,
        variable: String,
        value: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreKind {
    Apache2,
    Saps2,
    Sofa,
    Oasis,
}

impl ScoreKind {
    pub const ALL: [ScoreKind; 4] = [
        ScoreKind::Apache2,
        ScoreKind::Saps2,
        ScoreKind::Sofa,
        ScoreKind::Oasis,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ScoreKind::Apache2 => "apache2",
            ScoreKind::Saps2 => "saps2",
            ScoreKind::Sofa => "sofa",
            ScoreKind::Oasis => "oasis",
        }
    }
}

impl fmt::Display for ScoreKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One day's structured observations. Every field is optional; the tables
/// decide what a missing value costs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VitalsPanel {
    pub age: Option<f64>,
    pub heart_rate: Option<f64>,
    pub mean_arterial_pressure: Option<f64>,
    pub systolic_bp: Option<f64>,
    pub temperature: Option<f64>,
    pub respiratory_rate: Option<f64>,
    pub pao2_fio2: Option<f64>,
    pub gcs: Option<f64>,
    pub creatinine: Option<f64>,
    pub bilirubin: Option<f64>,
    pub platelets: Option<f64>,
    pub white_blood_count: Option<f64>,
    pub sodium: Option<f64>,
    pub potassium: Option<f64>,
    pub urine_output_24h: Option<f64>,
    pub mechanical_ventilation: Option<bool>,
}

/// Panel field names, in timeline-CSV column order.
pub const PANEL_FIELDS: [&str; 16] = [
    "age",
    "heart_rate",
    "mean_arterial_pressure",
    "systolic_bp",
    "temperature",
    "respiratory_rate",
    "pao2_fio2",
    "gcs",
    "creatinine",
    "bilirubin",
    "platelets",
    "white_blood_count",
    "sodium",
    "potassium",
    "urine_output_24h",
    "mechanical_ventilation",
];

impl VitalsPanel {
    /// Numeric view of a field; booleans band as 0/1.
    pub fn value_of(&self, field: &str) -> Option<f64> {
        match field {
            "age" => self.age,
            "heart_rate" => self.heart_rate,
            "mean_arterial_pressure" => self.mean_arterial_pressure,
            "systolic_bp" => self.systolic_bp,
            "temperature" => self.temperature,
            "respiratory_rate" => self.respiratory_rate,
            "pao2_fio2" => self.pao2_fio2,
            "gcs" => self.gcs,
            "creatinine" => self.creatinine,
            "bilirubin" => self.bilirubin,
            "platelets" => self.platelets,
            "white_blood_count" => self.white_blood_count,
            "sodium" => self.sodium,
            "potassium" => self.potassium,
            "urine_output_24h" => self.urine_output_24h,
            "mechanical_ventilation" => self.mechanical_ventilation.map(|b| f64::from(b as u8)),
            _ => None,
        }
    }

    pub fn set_value(&mut self, field: &str, value: Option<f64>) {
        match field {
            "age" => self.age = value,
            "heart_rate" => self.heart_rate = value,
            "mean_arterial_pressure" => self.mean_arterial_pressure = value,
            "systolic_bp" => self.systolic_bp = value,
            "temperature" => self.temperature = value,
            "respiratory_rate" => self.respiratory_rate = value,
            "pao2_fio2" => self.pao2_fio2 = value,
            "gcs" => self.gcs = value,
            "creatinine" => self.creatinine = value,
            "bilirubin" => self.bilirubin = value,
            "platelets" => self.platelets = value,
            "white_blood_count" => self.white_blood_count = value,
            "sodium" => self.sodium = value,
            "potassium" => self.potassium = value,
            "urine_output_24h" => self.urine_output_24h = value,
            "mechanical_ventilation" => {
                self.mechanical_ventilation = value.map(|v| v >= 0.5);
            }
            other => panic!("unknown panel field {other}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Band {
    pub lo: f64,
    pub hi: f64,
    pub points: u32,
}

#[derive(Debug, Clone)]
pub struct VariableTable {
    pub variable: String,
    pub missing_points: u32,
    /// Sorted by `lo`; contiguous coverage of [bands[0].lo, bands.last().hi).
    pub bands: Vec<Band>,
}

impl VariableTable {
    pub fn max_points(&self) -> u32 {
        self.bands.iter().map(|b| b.points).max().unwrap_or(0)
    }

    fn points_for(&self, value: f64) -> Option<u32> {
        self.bands
            .iter()
            .find(|b| value >= b.lo && value < b.hi)
            .map(|b| b.points)
    }
}

#[derive(Debug, Clone)]
pub struct ScoreTable {
    pub kind: ScoreKind,
    pub variables: Vec<VariableTable>,
}

impl ScoreTable {
    /// Highest total attainable from present values.
    pub fn max_attainable(&self) -> u32 {
        self.variables.iter().map(|v| v.max_points()).sum()
    }
}

/// The four loaded score tables.
#[derive(Debug, Clone)]
pub struct ScoringTables {
    tables: BTreeMap<ScoreKind, ScoreTable>,
}

impl ScoringTables {
    /// Shipped defaults, transcribed from the published score definitions and
    /// restricted to panel variables.
    pub fn default_tables() -> Self {
        Self::parse(DEFAULT_TABLES).expect("embedded scoring tables are valid")
    }

    pub fn default_text() -> &'static str {
        DEFAULT_TABLES
    }

    pub fn from_path(path: &Path) -> Result<Self, SoiError> {
        let text = fs::read_to_string(path).map_err(|e| SoiError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, SoiError> {
        let mut sections: BTreeMap<ScoreKind, Vec<(usize, String)>> = BTreeMap::new();
        let mut current: Option<ScoreKind> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
                current = Some(match name {
                    "apache2" => ScoreKind::Apache2,
                    "saps2" => ScoreKind::Saps2,
                    "sofa" => ScoreKind::Sofa,
                    "oasis" => ScoreKind::Oasis,
                    other => {
                        return Err(SoiError::Parse {
                            line: i + 1,
                            message: format!("unknown score section [{other}]"),
                        })
                    }
                });
                sections.entry(current.unwrap()).or_default();
                continue;
            }
            match current {
                Some(kind) => sections
                    .entry(kind)
                    .or_default()
                    .push((i + 1, line.to_string())),
                None => {
                    return Err(SoiError::Parse {
                        line: i + 1,
                        message: "range line before any [score] section".into(),
                    })
                }
            }
        }

        let missing: Vec<String> = ScoreKind::ALL
            .iter()
            .filter(|k| !sections.contains_key(k))
            .map(|k| k.as_str().to_string())
            .collect();
        if !missing.is_empty() {
            return Err(SoiError::MissingScores { missing });
        }

        let mut tables = BTreeMap::new();
        for (kind, lines) in sections {
            tables.insert(kind, build_score_table(kind, &lines)?);
        }
        Ok(ScoringTables { tables })
    }

    pub fn get(&self, kind: ScoreKind) -> &ScoreTable {
        &self.tables[&kind]
    }

    pub fn max_attainable(&self, kind: ScoreKind) -> u32 {
        self.get(kind).max_attainable()
    }
}

fn parse_bound(s: &str, line: usize) -> Result<f64, SoiError> {
    match s.trim() {
        "inf" | "+inf" => Ok(f64::INFINITY),
        "-inf" => Ok(f64::NEG_INFINITY),
        v => v.parse().map_err(|_| SoiError::Parse {
            line,
            message: format!("bad bound {v:?}"),
        }),
    }
}

fn build_score_table(kind: ScoreKind, lines: &[(usize, String)]) -> Result<ScoreTable, SoiError> {
    let mut by_var: BTreeMap<String, VariableTable> = BTreeMap::new();
    for (line_no, line) in lines {
        if let Some(rest) = line.strip_prefix("missing:") {
            let parts: Vec<&str> = rest.split(',').map(str::trim).collect();
            if parts.len() != 2 {
                return Err(SoiError::Parse {
                    line: *line_no,
                    message: "missing policy needs: missing: variable, points".into(),
                });
            }
            let variable = parts[0].to_string();
            let points: i64 = parts[1].parse().map_err(|_| SoiError::Parse {
                line: *line_no,
                message: format!("bad points {:?}", parts[1]),
            })?;
            if points < 0 {
                return Err(SoiError::NegativePoints {
                    score: kind,
                    variable,
                });
            }
            by_var
                .entry(variable.clone())
                .or_insert_with(|| VariableTable {
                    variable,
                    missing_points: 0,
                    bands: Vec::new(),
                })
                .missing_points = points as u32;
            continue;
        }

        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 4 {
            return Err(SoiError::Parse {
                line: *line_no,
                message: format!("expected 4 fields, got {}", parts.len()),
            });
        }
        let variable = parts[0].to_string();
        if !PANEL_FIELDS.contains(&variable.as_str()) {
            return Err(SoiError::UnknownVariable {
                score: kind,
                variable,
            });
        }
        let lo = parse_bound(parts[1], *line_no)?;
        let hi = parse_bound(parts[2], *line_no)?;
        if !(hi > lo) {
            return Err(SoiError::Parse {
                line: *line_no,
                message: format!("empty range [{lo}, {hi}) for {variable}"),
            });
        }
        let points: i64 = parts[3].parse().map_err(|_| SoiError::Parse {
            line: *line_no,
            message: format!("bad points {:?}", parts[3]),
        })?;
        if points < 0 {
            return Err(SoiError::NegativePoints {
                score: kind,
                variable,
            });
        }
        by_var
            .entry(variable.clone())
            .or_insert_with(|| VariableTable {
                variable,
                missing_points: 0,
                bands: Vec::new(),
            })
            .bands
            .push(Band {
                lo,
                hi,
                points: points as u32,
            });
    }

    let mut variables = Vec::with_capacity(by_var.len());
    for (_, mut var) in by_var {
        if var.bands.is_empty() {
            continue; // missing-policy line without bands; nothing to score
        }
        var.bands
            .sort_by(|a, b| a.lo.partial_cmp(&b.lo).expect("bounds are not NaN"));
        for pair in var.bands.windows(2) {
            if pair[1].lo < pair[0].hi {
                return Err(SoiError::OverlappingRanges {
                    score: kind,
                    variable: var.variable,
                });
            }
            if pair[1].lo > pair[0].hi {
                return Err(SoiError::CoverageGap {
                    score: kind,
                    variable: var.variable,
                    at: pair[0].hi,
                });
            }
        }
        variables.push(var);
    }
    Ok(ScoreTable { kind, variables })
}

/// Sum of per-variable points for one score. Missing variables contribute the
/// table's missing-value points; present values outside the plausible domain
/// are an error.
pub fn compute_score(
    panel: &VitalsPanel,
    kind: ScoreKind,
    tables: &ScoringTables,
) -> Result<u32, SoiError> {
    let mut total = 0;
    for var in &tables.get(kind).variables {
        match panel.value_of(&var.variable) {
            None => total += var.missing_points,
            Some(value) => {
                total += var
                    .points_for(value)
                    .ok_or_else(|| SoiError::ImplausibleValue {
                        score: kind,
                        variable: var.variable.clone(),
                        value,
                    })?;
            }
        }
    }
    Ok(total)
}

/// The four scores for one patient-day.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoiVector {
    pub apache2: u32,
    pub saps2: u32,
    pub sofa: u32,
    pub oasis: u32,
}

impl SoiVector {
    pub fn get(&self, kind: ScoreKind) -> u32 {
        match kind {
            ScoreKind::Apache2 => self.apache2,
            ScoreKind::Saps2 => self.saps2,
            ScoreKind::Sofa => self.sofa,
            ScoreKind::Oasis => self.oasis,
        }
    }
}

pub fn soi_vector(panel: &VitalsPanel, tables: &ScoringTables) -> Result<SoiVector, SoiError> {
    Ok(SoiVector {
        apache2: compute_score(panel, ScoreKind::Apache2, tables)?,
        saps2: compute_score(panel, ScoreKind::Saps2, tables)?,
        sofa: compute_score(panel, ScoreKind::Sofa, tables)?,
        oasis: compute_score(panel, ScoreKind::Oasis, tables)?,
    })
}
