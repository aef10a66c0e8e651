//! Synthetic cohort generator with known generative structure. A latent
//! per-patient severity trajectory drives everything observable: concept
//! mentions in templated note text, vitals bands, and the length of stay
//! itself (discharge when severity crosses the recovery threshold). Tests can
//! therefore check that the pipeline recovers signal that is known to exist.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::concepts::{
    ClinicalNote, ConceptCategory, ConceptLexicon, LexiconEntry, NoteType,
};
use crate::forecaster::{DayRecord, PatientTimeline, MAX_LOS_DAYS, MIN_LOS_DAYS};
use crate::rng::derive_seed;
use crate::soi::VitalsPanel;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("infeasible spec: {message}")]
    InfeasibleSpec { message: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error(transparent)]
    Concepts(#[from] crate::concepts::ConceptError),
    #[error(transparent)]
    Forecast(#[from] crate::forecaster::ForecastError),
    #[error("ground truth line {line}: {message}")]
    MalformedLine { line: usize, message: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Disease {
    Pneumonia,
    Sepsis,
    Cardiovascular,
}

/// Cohort case mix; proportions must sum to 1.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DiseaseMix {
    pub pneumonia: f64,
    pub sepsis: f64,
    pub cardiovascular: f64,
}

impl Default for DiseaseMix {
    fn default() -> Self {
        DiseaseMix {
            pneumonia: 0.45,
            sepsis: 0.31,
            cardiovascular: 0.24,
        }
    }
}

/// Noise knobs; zeroing everything makes severity, vitals, and mentions a
/// deterministic function of the walk's drift.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NoiseLevels {
    /// Half-width of the daily severity-walk perturbation.
    pub walk_sigma: f64,
    /// Multiplier on vitals jitter (1.0 = default bands).
    pub vitals_jitter: f64,
    /// Probability that an optional vitals field is absent.
    pub missing_rate: f64,
    /// Multiplier on negated-mention rates.
    pub negation_rate: f64,
}

impl Default for NoiseLevels {
    fn default() -> Self {
        NoiseLevels {
            walk_sigma: 0.03,
            vitals_jitter: 1.0,
            missing_rate: 0.05,
            negation_rate: 1.0,
        }
    }
}

impl NoiseLevels {
    /// Fully deterministic generation given the seed and drift.
    pub fn silent() -> Self {
        NoiseLevels {
            walk_sigma: 0.0,
            vitals_jitter: 0.0,
            missing_rate: 0.0,
            negation_rate: 0.0,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CohortSpec {
    pub n_patients: usize,
    pub los_range: (u32, u32),
    pub mix: DiseaseMix,
    pub mean_los: f64,
    pub seed: u64,
    pub noise: NoiseLevels,
}

impl Default for CohortSpec {
    fn default() -> Self {
        CohortSpec {
            n_patients: 500,
            los_range: (MIN_LOS_DAYS, MAX_LOS_DAYS),
            mix: DiseaseMix::default(),
            mean_los: 10.0,
            seed: 0,
            noise: NoiseLevels::default(),
        }
    }
}

impl CohortSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |message: String| SynthError::InfeasibleSpec { message };
        if self.n_patients == 0 {
            return Err(bad("n_patients must be positive".into()));
        }
        let sum = self.mix.pneumonia + self.mix.sepsis + self.mix.cardiovascular;
        if (sum - 1.0).abs() > 1e-9 {
            return Err(bad(format!("disease mix sums to {sum}, not 1")));
        }
        let (lo, hi) = self.los_range;
        if lo < MIN_LOS_DAYS || hi > MAX_LOS_DAYS || lo > hi {
            return Err(bad(format!(
                "los_range [{lo}, {hi}] outside [{MIN_LOS_DAYS}, {MAX_LOS_DAYS}]"
            )));
        }
        if self.mean_los < f64::from(lo) || self.mean_los > f64::from(hi) {
            return Err(bad(format!(
                "mean_los {} outside los_range [{lo}, {hi}]",
                self.mean_los
            )));
        }
        Ok(())
    }
}

/// Latent state for one patient-day, emitted for tests only.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GroundTruthDay {
    pub patient_id: String,
    pub day: u32,
    pub disease: Disease,
    pub severity: f64,
    pub affirmed: Vec<String>,
    pub negated: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Cohort {
    pub lexicon: ConceptLexicon,
    pub timelines: Vec<PatientTimeline>,
    pub notes: Vec<ClinicalNote>,
    pub ground_truth: Vec<GroundTruthDay>,
}

// ---- concept inventory ----

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Pool {
    PneumoniaCore,
    SepsisCore,
    CardioCore,
    Common,
    Chronic,
    Lifestyle,
    Mental,
    Abnormal,
    Injury,
}

struct ConceptDef {
    cui: &'static str,
    name: &'static str,
    category: ConceptCategory,
    forms: &'static [&'static str],
    pool: Pool,
}

use ConceptCategory as Cat;
use Pool as P;

/// The shipped demo inventory. Surface forms deliberately avoid every word
/// used by the note templates, so template stems can never collide with a
/// lexicon match.
const CONCEPTS: &[ConceptDef] = &[
    // pneumonia core
    ConceptDef { cui: "C0032285", name: "pneumonia", category: Cat::DiseaseSymptom, forms: &["pneumonia", "lung infection"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0010200", name: "cough", category: Cat::DiseaseSymptom, forms: &["cough", "persistent cough"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0013404", name: "dyspnea", category: Cat::DiseaseSymptom, forms: &["dyspnea", "shortness of breath"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0032227", name: "pleural effusion", category: Cat::Abnormality, forms: &["pleural effusion"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0700292", name: "hypoxia", category: Cat::Abnormality, forms: &["hypoxia", "low oxygen saturation"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0038056", name: "sputum production", category: Cat::DiseaseSymptom, forms: &["sputum production", "productive sputum"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0034642", name: "rales", category: Cat::Abnormality, forms: &["rales", "crackles"], pool: P::PneumoniaCore },
    ConceptDef { cui: "C0235896", name: "pulmonary infiltrate", category: Cat::Abnormality, forms: &["pulmonary infiltrate", "lung infiltrate"], pool: P::PneumoniaCore },
    // sepsis core
    ConceptDef { cui: "C0036690", name: "sepsis", category: Cat::DiseaseSymptom, forms: &["sepsis", "septicemia"], pool: P::SepsisCore },
    ConceptDef { cui: "C0020649", name: "hypotension", category: Cat::Abnormality, forms: &["hypotension", "low blood pressure"], pool: P::SepsisCore },
    ConceptDef { cui: "C0039231", name: "tachycardia", category: Cat::Abnormality, forms: &["tachycardia", "rapid heartbeat"], pool: P::SepsisCore },
    ConceptDef { cui: "C0856054", name: "altered mental status", category: Cat::MentalHealth, forms: &["altered mental status", "acute confusion"], pool: P::SepsisCore },
    ConceptDef { cui: "C0028961", name: "oliguria", category: Cat::Abnormality, forms: &["oliguria", "decreased urine output"], pool: P::SepsisCore },
    ConceptDef { cui: "C0001125", name: "lactic acidosis", category: Cat::Abnormality, forms: &["lactic acidosis", "elevated lactate"], pool: P::SepsisCore },
    ConceptDef { cui: "C0004610", name: "bacteremia", category: Cat::DiseaseSymptom, forms: &["bacteremia", "bloodstream infection"], pool: P::SepsisCore },
    ConceptDef { cui: "C0085593", name: "chills", category: Cat::DiseaseSymptom, forms: &["chills", "rigors"], pool: P::SepsisCore },
    // cardiovascular core
    ConceptDef { cui: "C0018801", name: "heart failure", category: Cat::DiseaseSymptom, forms: &["heart failure", "cardiac failure"], pool: P::CardioCore },
    ConceptDef { cui: "C0034063", name: "pulmonary edema", category: Cat::DiseaseSymptom, forms: &["pulmonary edema", "fluid in lungs"], pool: P::CardioCore },
    ConceptDef { cui: "C0008031", name: "chest pain", category: Cat::DiseaseSymptom, forms: &["chest pain", "angina"], pool: P::CardioCore },
    ConceptDef { cui: "C0030252", name: "palpitations", category: Cat::DiseaseSymptom, forms: &["palpitations"], pool: P::CardioCore },
    ConceptDef { cui: "C0004238", name: "atrial fibrillation", category: Cat::DiseaseSymptom, forms: &["atrial fibrillation", "irregular heart rhythm"], pool: P::CardioCore },
    ConceptDef { cui: "C0027051", name: "myocardial infarction", category: Cat::DiseaseSymptom, forms: &["myocardial infarction", "heart attack"], pool: P::CardioCore },
    ConceptDef { cui: "C0013604", name: "edema", category: Cat::Abnormality, forms: &["edema", "peripheral swelling"], pool: P::CardioCore },
    ConceptDef { cui: "C0085619", name: "orthopnea", category: Cat::DiseaseSymptom, forms: &["orthopnea"], pool: P::CardioCore },
    ConceptDef { cui: "C0920505", name: "elevated troponin", category: Cat::Abnormality, forms: &["elevated troponin", "troponin elevation"], pool: P::CardioCore },
    // common symptoms
    ConceptDef { cui: "C0030193", name: "pain", category: Cat::DiseaseSymptom, forms: &["pain"], pool: P::Common },
    ConceptDef { cui: "C0015967", name: "fever", category: Cat::DiseaseSymptom, forms: &["fever", "pyrexia"], pool: P::Common },
    ConceptDef { cui: "C0027497", name: "nausea", category: Cat::DiseaseSymptom, forms: &["nausea"], pool: P::Common },
    ConceptDef { cui: "C0042963", name: "vomiting", category: Cat::DiseaseSymptom, forms: &["vomiting", "emesis"], pool: P::Common },
    ConceptDef { cui: "C0015672", name: "fatigue", category: Cat::DiseaseSymptom, forms: &["fatigue", "exhaustion"], pool: P::Common },
    ConceptDef { cui: "C0004093", name: "weakness", category: Cat::DiseaseSymptom, forms: &["weakness", "asthenia"], pool: P::Common },
    ConceptDef { cui: "C0018681", name: "headache", category: Cat::DiseaseSymptom, forms: &["headache"], pool: P::Common },
    ConceptDef { cui: "C0012833", name: "dizziness", category: Cat::DiseaseSymptom, forms: &["dizziness", "vertigo"], pool: P::Common },
    ConceptDef { cui: "C0011991", name: "diarrhea", category: Cat::DiseaseSymptom, forms: &["diarrhea", "loose stools"], pool: P::Common },
    ConceptDef { cui: "C0003123", name: "anorexia", category: Cat::DiseaseSymptom, forms: &["anorexia", "poor appetite"], pool: P::Common },
    // chronic history
    ConceptDef { cui: "C0020538", name: "hypertension", category: Cat::PriorHistory, forms: &["hypertension", "high blood pressure"], pool: P::Chronic },
    ConceptDef { cui: "C0011849", name: "diabetes mellitus", category: Cat::PriorHistory, forms: &["diabetes mellitus", "diabetes"], pool: P::Chronic },
    ConceptDef { cui: "C1561643", name: "chronic kidney disease", category: Cat::PriorHistory, forms: &["chronic kidney disease", "renal insufficiency"], pool: P::Chronic },
    ConceptDef { cui: "C0024117", name: "copd", category: Cat::PriorHistory, forms: &["copd", "chronic obstructive pulmonary disease"], pool: P::Chronic },
    ConceptDef { cui: "C0004096", name: "asthma", category: Cat::PriorHistory, forms: &["asthma"], pool: P::Chronic },
    ConceptDef { cui: "C0038454", name: "prior stroke", category: Cat::PriorHistory, forms: &["prior stroke", "previous cerebrovascular accident"], pool: P::Chronic },
    ConceptDef { cui: "C1956346", name: "coronary artery disease", category: Cat::PriorHistory, forms: &["coronary artery disease"], pool: P::Chronic },
    ConceptDef { cui: "C0020473", name: "hyperlipidemia", category: Cat::PriorHistory, forms: &["hyperlipidemia", "elevated cholesterol"], pool: P::Chronic },
    // lifestyle
    ConceptDef { cui: "C0040332", name: "tobacco use", category: Cat::Lifestyle, forms: &["tobacco use", "cigarette smoking"], pool: P::Lifestyle },
    ConceptDef { cui: "C0001948", name: "alcohol use", category: Cat::Lifestyle, forms: &["alcohol use", "heavy drinking"], pool: P::Lifestyle },
    ConceptDef { cui: "C0028754", name: "obesity", category: Cat::Lifestyle, forms: &["obesity"], pool: P::Lifestyle },
    // mental health
    ConceptDef { cui: "C0003467", name: "anxiety", category: Cat::MentalHealth, forms: &["anxiety"], pool: P::Mental },
    ConceptDef { cui: "C0011570", name: "depression", category: Cat::MentalHealth, forms: &["depression", "depressed mood"], pool: P::Mental },
    ConceptDef { cui: "C0085631", name: "agitation", category: Cat::MentalHealth, forms: &["agitation", "restlessness"], pool: P::Mental },
    ConceptDef { cui: "C0011206", name: "delirium", category: Cat::MentalHealth, forms: &["delirium"], pool: P::Mental },
    // lab abnormalities
    ConceptDef { cui: "C0002871", name: "anemia", category: Cat::Abnormality, forms: &["anemia", "low hemoglobin"], pool: P::Abnormal },
    ConceptDef { cui: "C0040034", name: "thrombocytopenia", category: Cat::Abnormality, forms: &["thrombocytopenia", "low platelet count"], pool: P::Abnormal },
    ConceptDef { cui: "C0020625", name: "hyponatremia", category: Cat::Abnormality, forms: &["hyponatremia", "low sodium"], pool: P::Abnormal },
    ConceptDef { cui: "C0020621", name: "hypokalemia", category: Cat::Abnormality, forms: &["hypokalemia", "low potassium"], pool: P::Abnormal },
    ConceptDef { cui: "C0235431", name: "elevated creatinine", category: Cat::Abnormality, forms: &["elevated creatinine", "rising creatinine"], pool: P::Abnormal },
    // injury / poisoning
    ConceptDef { cui: "C0035522", name: "rib fracture", category: Cat::InjuryPoisoning, forms: &["rib fracture"], pool: P::Injury },
    ConceptDef { cui: "C0019557", name: "hip fracture", category: Cat::InjuryPoisoning, forms: &["hip fracture"], pool: P::Injury },
    ConceptDef { cui: "C0029944", name: "drug overdose", category: Cat::InjuryPoisoning, forms: &["drug overdose", "medication overdose"], pool: P::Injury },
];

/// The built-in demo lexicon used by the generator.
pub fn demo_lexicon() -> ConceptLexicon {
    let entries = CONCEPTS
        .iter()
        .map(|c| LexiconEntry {
            cui: c.cui.to_string(),
            name: c.name.to_string(),
            category: c.category,
            surface_forms: c.forms.iter().map(|f| f.to_string()).collect(),
        })
        .collect();
    ConceptLexicon::from_entries(entries).expect("demo lexicon is valid")
}

// ---- note templates ----

/// Affirmation stems keep the concept at least six tokens away from any
/// trailing trigger in the previous sentence, so cross-sentence windows
/// cannot flip polarity.
const AFFIRM_TEMPLATES: &[&str] = &[
    "the patient continues to report {}",
    "overnight exam findings are significant for {}",
    "todays clinical picture is consistent with {}",
    "the care team again documented {}",
    "serial monitoring this afternoon demonstrates {}",
];

/// Negation templates; pre-trigger forms put the trigger flush against the
/// concept, post-trigger forms carry a four-token stem for the same
/// cross-sentence reason.
const NEGATE_TEMPLATES: &[&str] = &[
    "the overnight team notes no {}",
    "the admission interview reveals no history of {}",
    "on repeat examination the patient denies {}",
    "the consulting service documents absence of {}",
    "further review this evening finds {} ruled out",
    "the latest assessment determines {} not present",
];

const FILLER_SENTENCE: &str = "patient resting comfortably overnight with steady vital readings";

fn uniform(rng: &mut ChaCha8Rng, half_width: f64) -> f64 {
    if half_width <= 0.0 {
        0.0
    } else {
        rng.gen_range(-half_width..half_width)
    }
}

struct DiseaseProfile {
    s0_lo: f64,
    s0_hi: f64,
    drift: f64,
    core_pool: Pool,
}

fn profile(disease: Disease) -> DiseaseProfile {
    match disease {
        Disease::Pneumonia => DiseaseProfile {
            s0_lo: 0.45,
            s0_hi: 0.80,
            drift: 0.066,
            core_pool: P::PneumoniaCore,
        },
        Disease::Sepsis => DiseaseProfile {
            s0_lo: 0.60,
            s0_hi: 0.95,
            drift: 0.051,
            core_pool: P::SepsisCore,
        },
        Disease::Cardiovascular => DiseaseProfile {
            s0_lo: 0.45,
            s0_hi: 0.85,
            drift: 0.061,
            core_pool: P::CardioCore,
        },
    }
}

const RECOVERY_THRESHOLD: f64 = 0.12;

/// Daily probability of an affirmed mention of `concept`, monotone in
/// severity.
fn affirm_probability(pool: Pool, is_core: bool, severity: f64, has_chronic: bool) -> f64 {
    let p = match pool {
        P::PneumoniaCore | P::SepsisCore | P::CardioCore => {
            if is_core {
                0.80 * (0.18 + 0.82 * severity)
            } else {
                0.05 * severity
            }
        }
        P::Common => 0.35 * (0.15 + 0.85 * severity),
        P::Chronic | P::Lifestyle => {
            if has_chronic {
                0.55
            } else {
                0.0
            }
        }
        P::Mental => 0.08 + 0.30 * severity,
        P::Abnormal => 0.55 * severity,
        P::Injury => 0.015,
    };
    p.clamp(0.0, 0.95)
}

/// Daily probability of a negated mention when the concept is not affirmed.
fn negate_probability(pool: Pool, is_core: bool, has_chronic: bool, rate: f64) -> f64 {
    let p = match pool {
        P::PneumoniaCore | P::SepsisCore | P::CardioCore => {
            if is_core {
                0.10
            } else {
                0.02
            }
        }
        P::Common => 0.05,
        P::Chronic | P::Lifestyle => {
            if has_chronic {
                0.0
            } else {
                0.07
            }
        }
        P::Mental => 0.02,
        P::Abnormal => 0.04,
        P::Injury => 0.005,
    };
    (p * rate).clamp(0.0, 0.95)
}

fn vitals_for(severity: f64, age: f64, jitter: f64, rng: &mut ChaCha8Rng) -> VitalsPanel {
    let j = |rng: &mut ChaCha8Rng, w: f64| uniform(rng, w * jitter);
    let s = severity;
    VitalsPanel {
        age: Some(age),
        heart_rate: Some((72.0 + 55.0 * s + j(rng, 6.0)).clamp(35.0, 185.0)),
        mean_arterial_pressure: Some((92.0 - 38.0 * s + j(rng, 5.0)).clamp(25.0, 145.0)),
        systolic_bp: Some((125.0 - 45.0 * s + j(rng, 8.0)).clamp(60.0, 210.0)),
        temperature: Some((36.5 + 2.8 * s + j(rng, 0.3)).clamp(30.0, 41.5)),
        respiratory_rate: Some((14.0 + 20.0 * s + j(rng, 2.0)).clamp(6.0, 55.0)),
        pao2_fio2: Some((440.0 - 330.0 * s + j(rng, 25.0)).clamp(40.0, 650.0)),
        gcs: Some((15.0 - 9.0 * s + j(rng, 0.8)).round().clamp(3.0, 15.0)),
        creatinine: Some((0.85 + 3.0 * s + j(rng, 0.15)).clamp(0.2, 15.0)),
        bilirubin: Some((0.5 + 3.5 * s + j(rng, 0.2)).clamp(0.1, 30.0)),
        platelets: Some((265.0 - 185.0 * s + j(rng, 20.0)).clamp(5.0, 900.0)),
        white_blood_count: Some((7.5 + 14.0 * s + j(rng, 1.2)).clamp(0.5, 90.0)),
        sodium: Some((138.5 + 5.0 * s + j(rng, 2.5)).clamp(105.0, 180.0)),
        potassium: Some((4.0 + 1.7 * s + j(rng, 0.25)).clamp(1.5, 9.5)),
        urine_output_24h: Some((2800.0 - 2200.0 * s + j(rng, 180.0)).clamp(50.0, 9000.0)),
        mechanical_ventilation: Some(s > 0.78),
    }
}

fn drop_missing(panel: &mut VitalsPanel, rate: f64, rng: &mut ChaCha8Rng) {
    if rate <= 0.0 {
        return;
    }
    for field in crate::soi::PANEL_FIELDS {
        if field == "age" {
            continue;
        }
        if rng.gen_bool(rate) {
            panel.set_value(field, None);
        }
    }
}

/// Generate a cohort. Deterministic given the spec: each patient draws from
/// an independent stream derived from the master seed, so generation could be
/// parallelized per patient without changing the output.
pub fn generate_cohort(spec: &CohortSpec) -> Result<Cohort, SynthError> {
    spec.validate()?;
    let lexicon = demo_lexicon();
    // drift calibrated for a 10-day mean; scale for other targets
    let drift_scale = 10.0 / spec.mean_los;

    let mut timelines = Vec::with_capacity(spec.n_patients);
    let mut notes = Vec::new();
    let mut ground_truth = Vec::new();

    for idx in 0..spec.n_patients {
        let patient_id = format!("P{idx:05}");
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, idx as u64));

        let roll: f64 = rng.gen_range(0.0..1.0);
        let disease = if roll < spec.mix.pneumonia {
            Disease::Pneumonia
        } else if roll < spec.mix.pneumonia + spec.mix.sepsis {
            Disease::Sepsis
        } else {
            Disease::Cardiovascular
        };
        let prof = profile(disease);
        let age = f64::from(rng.gen_range(25..=90));

        // chronic conditions are per-patient, not per-day
        let chronic: BTreeMap<&'static str, bool> = CONCEPTS
            .iter()
            .filter(|c| matches!(c.pool, P::Chronic | P::Lifestyle))
            .map(|c| (c.cui, rng.gen_bool(0.35)))
            .collect();

        // severity walk until recovery, truncated to the allowed stay range
        let (lo, hi) = spec.los_range;
        let mut severities = Vec::new();
        let mut s: f64 = rng.gen_range(prof.s0_lo..prof.s0_hi);
        loop {
            severities.push(s);
            s = (s - prof.drift * drift_scale + uniform(&mut rng, spec.noise.walk_sigma))
                .clamp(0.0, 1.0);
            if severities.len() >= hi as usize {
                break;
            }
            if s < RECOVERY_THRESHOLD && severities.len() >= lo as usize {
                break;
            }
        }
        let total_los = severities.len() as u32;

        let mut days = Vec::with_capacity(severities.len());
        for (day, &severity) in severities.iter().enumerate() {
            let day = day as u32;
            let mut affirmed = Vec::new();
            let mut negated = Vec::new();
            let mut sentences = Vec::new();
            for concept in CONCEPTS {
                let is_core = concept.pool == prof.core_pool;
                let has_chronic = *chronic.get(concept.cui).unwrap_or(&false);
                let p_affirm = affirm_probability(concept.pool, is_core, severity, has_chronic);
                let form = concept.forms[rng.gen_range(0..concept.forms.len())];
                if p_affirm > 0.0 && rng.gen_bool(p_affirm) {
                    let template = AFFIRM_TEMPLATES[rng.gen_range(0..AFFIRM_TEMPLATES.len())];
                    sentences.push(template.replace("{}", form));
                    affirmed.push(concept.cui.to_string());
                } else {
                    let p_neg = negate_probability(
                        concept.pool,
                        is_core,
                        has_chronic,
                        spec.noise.negation_rate,
                    );
                    if p_neg > 0.0 && rng.gen_bool(p_neg) {
                        let template = NEGATE_TEMPLATES[rng.gen_range(0..NEGATE_TEMPLATES.len())];
                        sentences.push(template.replace("{}", form));
                        negated.push(concept.cui.to_string());
                    }
                }
            }
            // shuffle sentence order, then split across note types
            for i in (1..sentences.len()).rev() {
                let j = rng.gen_range(0..=i);
                sentences.swap(i, j);
            }
            if sentences.is_empty() {
                sentences.push(FILLER_SENTENCE.to_string());
            }
            let n = sentences.len();
            let nursing_end = n.div_ceil(2).max(1);
            let radiology_end = nursing_end + (n - nursing_end) / 2;
            let mut push_note = |note_type: NoteType, chunk: &[String]| {
                if !chunk.is_empty() {
                    notes.push(ClinicalNote {
                        patient_id: patient_id.clone(),
                        day,
                        note_type,
                        text: format!("{}.", chunk.join(". ")),
                    });
                }
            };
            push_note(NoteType::Nursing, &sentences[..nursing_end]);
            push_note(NoteType::Radiology, &sentences[nursing_end..radiology_end]);
            push_note(NoteType::Ecg, &sentences[radiology_end..]);

            let mut vitals = vitals_for(severity, age, spec.noise.vitals_jitter, &mut rng);
            drop_missing(&mut vitals, spec.noise.missing_rate, &mut rng);

            affirmed.sort();
            negated.sort();
            ground_truth.push(GroundTruthDay {
                patient_id: patient_id.clone(),
                day,
                disease,
                severity,
                affirmed,
                negated,
            });
            days.push(DayRecord {
                day,
                vitals,
                remaining_los: f64::from(total_los - 1 - day),
            });
        }

        let timeline = PatientTimeline {
            patient_id,
            total_los,
            days,
        };
        timeline.validate()?;
        timelines.push(timeline);
    }

    Ok(Cohort {
        lexicon,
        timelines,
        notes,
        ground_truth,
    })
}

use rand::SeedableRng;

/// Severity per (patient, day): the ideal feature the pipeline should track.
pub fn oracle_features(ground_truth: &[GroundTruthDay]) -> BTreeMap<(String, u32), f64> {
    ground_truth
        .iter()
        .map(|g| ((g.patient_id.clone(), g.day), g.severity))
        .collect()
}

/// A labelled single-sentence negation corpus drawn from the generator's own
/// templates.
#[derive(Debug, Clone)]
pub struct NegationExample {
    pub text: String,
    pub cui: String,
    pub negated: bool,
}

pub fn negation_corpus(n: usize, seed: u64) -> Vec<NegationExample> {
    let mut rng = crate::rng::stage_rng(seed, "negation-corpus");
    (0..n)
        .map(|i| {
            let concept = &CONCEPTS[rng.gen_range(0..CONCEPTS.len())];
            let form = concept.forms[rng.gen_range(0..concept.forms.len())];
            let negated = i % 2 == 1;
            let template = if negated {
                NEGATE_TEMPLATES[rng.gen_range(0..NEGATE_TEMPLATES.len())]
            } else {
                AFFIRM_TEMPLATES[rng.gen_range(0..AFFIRM_TEMPLATES.len())]
            };
            NegationExample {
                text: format!("{}.", template.replace("{}", form)),
                cui: concept.cui.to_string(),
                negated,
            }
        })
        .collect()
}

// ---- file output ----

pub struct CohortPaths {
    pub lexicon: std::path::PathBuf,
    pub notes: std::path::PathBuf,
    pub timelines: std::path::PathBuf,
    pub ground_truth: std::path::PathBuf,
}

/// Write the cohort in the pipeline's interchange formats. The ground-truth
/// file exists for tests; the pipeline itself never reads it.
pub fn write_cohort(cohort: &Cohort, dir: &Path) -> Result<CohortPaths, SynthError> {
    let io_err = |path: &Path, source: std::io::Error| SynthError::Io {
        path: path.display().to_string(),
        source,
    };
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let paths = CohortPaths {
        lexicon: dir.join("lexicon.jsonl"),
        notes: dir.join("notes.jsonl"),
        timelines: dir.join("timelines.csv"),
        ground_truth: dir.join("ground_truth.jsonl"),
    };
    cohort.lexicon.write_jsonl(&paths.lexicon)?;
    crate::concepts::write_notes_jsonl(&cohort.notes, &paths.notes)?;
    crate::forecaster::write_timelines_csv(&cohort.timelines, &paths.timelines)?;
    let mut file = File::create(&paths.ground_truth).map_err(|e| io_err(&paths.ground_truth, e))?;
    for gt in &cohort.ground_truth {
        let line = serde_json::to_string(gt).expect("ground truth serialization cannot fail");
        writeln!(file, "{line}").map_err(|e| io_err(&paths.ground_truth, e))?;
    }
    Ok(paths)
}

pub fn read_ground_truth(path: &Path) -> Result<Vec<GroundTruthDay>, SynthError> {
    let file = File::open(path).map_err(|e| SynthError::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| SynthError::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let gt: GroundTruthDay =
            serde_json::from_str(&line).map_err(|e| SynthError::MalformedLine {
                line: i + 1,
                message: e.to_string(),
            })?;
        out.push(gt);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::concepts::{extract_entities, NegationTriggers};

    #[test]
    fn spec_validation_catches_infeasible_inputs() {
        let mut spec = CohortSpec {
            n_patients: 10,
            ..CohortSpec::default()
        };
        spec.mean_los = 40.0;
        assert!(matches!(
            spec.validate(),
            Err(SynthError::InfeasibleSpec { .. })
        ));
        spec.mean_los = 10.0;
        spec.mix.pneumonia = 0.9;
        assert!(spec.validate().is_err());
    }

    #[test]
    fn generation_is_deterministic() {
        let spec = CohortSpec {
            n_patients: 12,
            seed: 3,
            ..CohortSpec::default()
        };
        let a = generate_cohort(&spec).unwrap();
        let b = generate_cohort(&spec).unwrap();
        assert_eq!(a.timelines, b.timelines);
        assert_eq!(
            a.notes.iter().map(|n| &n.text).collect::<Vec<_>>(),
            b.notes.iter().map(|n| &n.text).collect::<Vec<_>>()
        );
        assert_eq!(a.ground_truth.len(), b.ground_truth.len());
    }

    #[test]
    fn all_stays_respect_the_los_range() {
        let spec = CohortSpec {
            n_patients: 60,
            seed: 7,
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        for t in &cohort.timelines {
            assert!((2..=31).contains(&t.total_los), "{}", t.total_los);
            t.validate().unwrap();
        }
    }

    #[test]
    fn remaining_los_matches_construction() {
        let spec = CohortSpec {
            n_patients: 8,
            seed: 11,
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        for t in &cohort.timelines {
            for rec in &t.days {
                assert_eq!(rec.remaining_los, f64::from(t.total_los - 1 - rec.day));
            }
        }
    }

    #[test]
    fn every_patient_day_has_a_nursing_note() {
        let spec = CohortSpec {
            n_patients: 10,
            seed: 5,
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        for t in &cohort.timelines {
            for rec in &t.days {
                let found = cohort.notes.iter().any(|n| {
                    n.patient_id == t.patient_id
                        && n.day == rec.day
                        && n.note_type == NoteType::Nursing
                });
                assert!(found, "{} day {}", t.patient_id, rec.day);
            }
        }
    }

    #[test]
    fn template_text_recovers_ground_truth_polarity() {
        // the vectorizer must never read an affirmed mention where the
        // generator wrote a negated one, and vice versa
        let spec = CohortSpec {
            n_patients: 25,
            seed: 13,
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        let triggers = NegationTriggers::default();
        let vectors =
            crate::concepts::vectorize_notes(&cohort.notes, &cohort.lexicon, &triggers).unwrap();
        let by_day: BTreeMap<(String, u32), &crate::concepts::HealthVector> = vectors
            .iter()
            .map(|v| ((v.patient_id.clone(), v.day), v))
            .collect();
        let mut checked = 0;
        for gt in &cohort.ground_truth {
            let hv = by_day
                .get(&(gt.patient_id.clone(), gt.day))
                .expect("vector for every day");
            for cui in &gt.negated {
                let idx = cohort.lexicon.index_of(cui).unwrap();
                assert_ne!(
                    hv.values[idx], 1,
                    "{} day {} {cui} negated but read +1",
                    gt.patient_id, gt.day
                );
                checked += 1;
            }
            for cui in &gt.affirmed {
                let idx = cohort.lexicon.index_of(cui).unwrap();
                assert_eq!(
                    hv.values[idx], 1,
                    "{} day {} {cui} affirmed but read {}",
                    gt.patient_id, gt.day, hv.values[idx]
                );
                checked += 1;
            }
        }
        assert!(checked > 500, "only {checked} mentions checked");
    }

    #[test]
    fn negation_corpus_is_labelled_and_balanced() {
        let corpus = negation_corpus(50, 1);
        assert_eq!(corpus.len(), 50);
        let negs = corpus.iter().filter(|e| e.negated).count();
        assert_eq!(negs, 25);
        let lexicon = demo_lexicon();
        let triggers = NegationTriggers::default();
        for example in &corpus {
            let mentions = extract_entities(&example.text, &lexicon, &triggers);
            let hit = mentions.iter().find(|m| m.cui == example.cui);
            assert!(hit.is_some(), "no mention extracted from {:?}", example.text);
        }
    }

    #[test]
    fn cohort_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let spec = CohortSpec {
            n_patients: 6,
            seed: 9,
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        let paths = write_cohort(&cohort, dir.path()).unwrap();

        let lexicon = ConceptLexicon::from_path(&paths.lexicon).unwrap();
        assert_eq!(lexicon.vocab_size(), cohort.lexicon.vocab_size());
        let notes = crate::concepts::read_notes_jsonl(&paths.notes).unwrap();
        assert_eq!(notes.len(), cohort.notes.len());
        let timelines = crate::forecaster::read_timelines_csv(&paths.timelines).unwrap();
        assert_eq!(timelines, cohort.timelines);
        let gt = read_ground_truth(&paths.ground_truth).unwrap();
        assert_eq!(gt.len(), cohort.ground_truth.len());
    }

    #[test]
    fn silent_noise_gives_monotone_severity() {
        let spec = CohortSpec {
            n_patients: 5,
            seed: 21,
            noise: NoiseLevels::silent(),
            ..CohortSpec::default()
        };
        let cohort = generate_cohort(&spec).unwrap();
        for t in &cohort.timelines {
            let sev: Vec<f64> = cohort
                .ground_truth
                .iter()
                .filter(|g| g.patient_id == t.patient_id)
                .map(|g| g.severity)
                .collect();
            assert_eq!(sev.len(), t.total_los as usize);
            for pair in sev.windows(2) {
                assert!(pair[1] < pair[0], "severity must fall: {pair:?}");
            }
        }
    }
}
