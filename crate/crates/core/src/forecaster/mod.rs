//! End-to-end training and evaluation: assemble per-day inputs (autoencoded
//! health vector + normalized severity scores), train the liquid network or
//! the LSTM baseline on remaining length-of-stay regression, and report
//! R²/MAE/RMSE plus per-day prediction trajectories.

pub mod lstm;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::autoencoder::{self, AeParams};
use crate::concepts::HealthVector;
use crate::ltc::{self, LtcModel, SparsityConfig};
use crate::opt::Adam;
use crate::rng::{derive_seed, stage_rng};
use crate::soi::{soi_vector, ScoreKind, ScoringTables, SoiError, SoiVector, VitalsPanel, PANEL_FIELDS};

use lstm::{lstm_backward, lstm_forward, LstmParams};

#[derive(Debug, Error)]
pub enum ForecastError {
    #[error(transparent)]
    Soi(#[from] SoiError),
    #[error(transparent)]
    Autoencoder(#[from] autoencoder::AeError),
    #[error(transparent)]
    Ltc(#[from] ltc::LtcError),
    #[error(transparent)]
    Concepts(#[from] crate::concepts::ConceptError),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("dimension mismatch: {message}")]
    DimMismatch { message: String },
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("bad train config: {message}")]
    BadConfig { message: String },
    #[error("non-finite loss at epoch {epoch}")]
    NanLoss { epoch: usize },
    #[error("labels are constant; R^2 is undefined")]
    ConstantLabels,
    #[error("predictions ({preds}) and labels ({labels}) differ in length")]
    LengthMismatch { preds: usize, labels: usize },
    #[error("need at least 2 points to evaluate, got {got}")]
    TooShort { got: usize },
    #[error("{score} = {value} exceeds the table maximum {max}")]
    ScoreOutOfRange {
        score: ScoreKind,
        value: u32,
        max: u32,
    },
    #[error("timeline for {patient_id}: {message}")]
    BadTimeline { patient_id: String, message: String },
    #[error("bad checkpoint: {message}")]
    BadCheckpoint { message: String },
    #[error("patient {patient_id} not found")]
    UnknownPatient { patient_id: String },
}

fn io_err(path: &Path, source: std::io::Error) -> ForecastError {
    ForecastError::Io {
        path: path.display().to_string(),
        source,
    }
}

// ---- timelines ----

/// One observed day of an admission.
#[derive(Debug, Clone, PartialEq)]
pub struct DayRecord {
    pub day: u32,
    pub vitals: VitalsPanel,
    /// Days left after today; the last day of the stay is 0.
    pub remaining_los: f64,
}

/// Per-day sequence for one admission. Days run 0..total_los-1 and
/// `remaining_los = total_los - 1 - day`.
#[derive(Debug, Clone, PartialEq)]
pub struct PatientTimeline {
    pub patient_id: String,
    pub total_los: u32,
    pub days: Vec<DayRecord>,
}

pub const MIN_LOS_DAYS: u32 = 2;
pub const MAX_LOS_DAYS: u32 = 31;

impl PatientTimeline {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |message: String| ForecastError::BadTimeline {
            patient_id: self.patient_id.clone(),
            message,
        };
        if !(MIN_LOS_DAYS..=MAX_LOS_DAYS).contains(&self.total_los) {
            return Err(bad(format!(
                "total_los {} outside [{MIN_LOS_DAYS}, {MAX_LOS_DAYS}]",
                self.total_los
            )));
        }
        if self.days.len() != self.total_los as usize {
            return Err(bad(format!(
                "{} day rows for a {}-day stay",
                self.days.len(),
                self.total_los
            )));
        }
        for (i, rec) in self.days.iter().enumerate() {
            if rec.day != i as u32 {
                return Err(bad(format!("day {} at row {i}; days must run 0..n", rec.day)));
            }
            let expected = f64::from(self.total_los - 1 - rec.day);
            if (rec.remaining_los - expected).abs() > 1e-9 {
                return Err(bad(format!(
                    "remaining_los {} at day {}, expected {expected}",
                    rec.remaining_los, rec.day
                )));
            }
        }
        Ok(())
    }
}

/// Timeline CSV: `patient_id,day,remaining_los` followed by the panel
/// columns. Missing vitals are empty cells.
pub fn write_timelines_csv(timelines: &[PatientTimeline], path: &Path) -> Result<(), ForecastError> {
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    let mut header = String::from("patient_id,day,remaining_los");
    for field in PANEL_FIELDS {
        header.push(',');
        header.push_str(field);
    }
    writeln!(file, "{header}").map_err(|e| io_err(path, e))?;
    for timeline in timelines {
        for rec in &timeline.days {
            let mut row = format!(
                "{},{},{}",
                timeline.patient_id, rec.day, rec.remaining_los
            );
            for field in PANEL_FIELDS {
                row.push(',');
                if field == "mechanical_ventilation" {
                    if let Some(v) = rec.vitals.mechanical_ventilation {
                        row.push_str(if v { "true" } else { "false" });
                    }
                } else if let Some(v) = rec.vitals.value_of(field) {
                    row.push_str(&v.to_string());
                }
            }
            writeln!(file, "{row}").map_err(|e| io_err(path, e))?;
        }
    }
    Ok(())
}

pub fn read_timelines_csv(path: &Path) -> Result<Vec<PatientTimeline>, ForecastError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let col = |name: &str| -> Result<usize, ForecastError> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| ForecastError::BadTimeline {
                patient_id: String::new(),
                message: format!("missing column {name}"),
            })
    };
    let id_col = col("patient_id")?;
    let day_col = col("day")?;
    let rem_col = col("remaining_los")?;
    let panel_cols: Vec<Option<usize>> = PANEL_FIELDS
        .iter()
        .map(|f| headers.iter().position(|h| h == *f))
        .collect();

    let mut order: Vec<String> = Vec::new();
    let mut by_patient: BTreeMap<String, Vec<DayRecord>> = BTreeMap::new();
    for record in reader.records() {
        let record = record?;
        let patient_id = record.get(id_col).unwrap_or("").to_string();
        let parse_err = |message: String| ForecastError::BadTimeline {
            patient_id: patient_id.clone(),
            message,
        };
        let day: u32 = record
            .get(day_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| parse_err("bad day".into()))?;
        let remaining_los: f64 = record
            .get(rem_col)
            .unwrap_or("")
            .parse()
            .map_err(|_| parse_err("bad remaining_los".into()))?;
        let mut vitals = VitalsPanel::default();
        for (field, col) in PANEL_FIELDS.iter().zip(&panel_cols) {
            let raw = col.and_then(|c| record.get(c)).unwrap_or("").trim();
            if raw.is_empty() {
                continue;
            }
            if *field == "mechanical_ventilation" {
                let v = match raw {
                    "true" | "1" => true,
                    "false" | "0" => false,
                    other => return Err(parse_err(format!("bad bool {other:?}"))),
                };
                vitals.mechanical_ventilation = Some(v);
            } else {
                let v: f64 = raw
                    .parse()
                    .map_err(|_| parse_err(format!("bad {field} value {raw:?}")))?;
                vitals.set_value(field, Some(v));
            }
        }
        if !by_patient.contains_key(&patient_id) {
            order.push(patient_id.clone());
        }
        by_patient.entry(patient_id).or_default().push(DayRecord {
            day,
            vitals,
            remaining_los,
        });
    }

    let mut timelines = Vec::with_capacity(order.len());
    for patient_id in order {
        let mut days = by_patient.remove(&patient_id).unwrap();
        days.sort_by_key(|r| r.day);
        let timeline = PatientTimeline {
            patient_id,
            total_los: days.len() as u32,
            days,
        };
        timeline.validate()?;
        timelines.push(timeline);
    }
    Ok(timelines)
}

// ---- splits ----

/// Patient-level split; every patient lands in exactly one of train/val/test.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// 70/15/15 by patient, seed-controlled.
pub fn split_patients(patient_ids: &[String], seed: u64) -> SplitManifest {
    let mut ids: Vec<String> = patient_ids.to_vec();
    ids.sort();
    ids.dedup();
    let mut rng = stage_rng(seed, "patient-split");
    let mut order: Vec<usize> = (0..ids.len()).collect();
    autoencoder::shuffle(&mut order, &mut rng);

    let n = ids.len();
    let n_train = ((n as f64) * 0.7).round() as usize;
    let n_val = ((n as f64) * 0.15).round() as usize;
    let mut train: Vec<String> = order[..n_train.min(n)]
        .iter()
        .map(|&i| ids[i].clone())
        .collect();
    let mut val: Vec<String> = order[n_train.min(n)..(n_train + n_val).min(n)]
        .iter()
        .map(|&i| ids[i].clone())
        .collect();
    let mut test: Vec<String> = order[(n_train + n_val).min(n)..]
        .iter()
        .map(|&i| ids[i].clone())
        .collect();
    train.sort();
    val.sort();
    test.sort();
    SplitManifest {
        seed,
        train,
        val,
        test,
    }
}

// ---- input assembly ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TargetScale {
    RawDays,
    NormalizedBy31,
}

impl TargetScale {
    pub fn factor(self) -> f64 {
        match self {
            TargetScale::RawDays => 1.0,
            TargetScale::NormalizedBy31 => f64::from(MAX_LOS_DAYS),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            TargetScale::RawDays => "raw_days",
            TargetScale::NormalizedBy31 => "normalized_by_31",
        }
    }
}

/// `[embedding ‖ soi]` where each score is min-max scaled by its table's
/// attainable range into [0, 1].
pub fn assemble_input(
    embedding: &[f64],
    soi: &SoiVector,
    tables: &ScoringTables,
) -> Result<Vec<f64>, ForecastError> {
    let mut input = Vec::with_capacity(embedding.len() + 4);
    input.extend_from_slice(embedding);
    for kind in ScoreKind::ALL {
        let value = soi.get(kind);
        let max = tables.max_attainable(kind);
        if value > max {
            return Err(ForecastError::ScoreOutOfRange {
                score: kind,
                value,
                max,
            });
        }
        input.push(f64::from(value) / f64::from(max));
    }
    Ok(input)
}

/// One training sequence: assembled per-day inputs plus labels in the
/// training scale and in raw days.
#[derive(Debug, Clone)]
pub struct SequenceSample {
    pub patient_id: String,
    pub inputs: Vec<Vec<f64>>,
    pub labels: Vec<f64>,
    pub labels_raw_days: Vec<f64>,
}

impl SequenceSample {
    pub fn len_days(&self) -> usize {
        self.labels.len()
    }
}

/// Index health vectors by (patient, day) for joining against timelines.
pub fn index_vectors(vectors: &[HealthVector]) -> BTreeMap<(String, u32), Vec<f64>> {
    vectors
        .iter()
        .map(|v| ((v.patient_id.clone(), v.day), v.values_f64()))
        .collect()
}

/// Build the per-day input sequence for one timeline. Days with no notes get
/// an all-zero health vector (nothing was mentioned).
pub fn assemble_sample(
    timeline: &PatientTimeline,
    vectors: &BTreeMap<(String, u32), Vec<f64>>,
    ae: &AeParams,
    tables: &ScoringTables,
    scale: TargetScale,
) -> Result<SequenceSample, ForecastError> {
    timeline.validate()?;
    let zero = vec![0.0; ae.input_dim()];
    let mut inputs = Vec::with_capacity(timeline.days.len());
    let mut labels = Vec::with_capacity(timeline.days.len());
    let mut labels_raw = Vec::with_capacity(timeline.days.len());
    for rec in &timeline.days {
        let values = vectors
            .get(&(timeline.patient_id.clone(), rec.day))
            .unwrap_or(&zero);
        let embedding = autoencoder::encode(ae, values)?;
        let soi = soi_vector(&rec.vitals, tables)?;
        inputs.push(assemble_input(&embedding, &soi, tables)?);
        labels.push(rec.remaining_los / scale.factor());
        labels_raw.push(rec.remaining_los);
    }
    Ok(SequenceSample {
        patient_id: timeline.patient_id.clone(),
        inputs,
        labels,
        labels_raw_days: labels_raw,
    })
}

pub fn assemble_dataset(
    timelines: &[PatientTimeline],
    vectors: &BTreeMap<(String, u32), Vec<f64>>,
    ae: &AeParams,
    tables: &ScoringTables,
    scale: TargetScale,
) -> Result<Vec<SequenceSample>, ForecastError> {
    timelines
        .iter()
        .map(|t| assemble_sample(t, vectors, ae, tables, scale))
        .collect()
}

// ---- models ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Ltc,
    Lstm,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ModelKind::Ltc => "ltc",
            ModelKind::Lstm => "lstm",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ltc" => Ok(ModelKind::Ltc),
            "lstm" => Ok(ModelKind::Lstm),
            other => Err(format!("unknown model kind {other:?} (want ltc or lstm)")),
        }
    }
}

/// A trainable sequence regressor behind one interface.
#[derive(Debug, Clone)]
pub enum ForecastModel {
    Ltc(LtcModel),
    Lstm { params: LstmParams, seed: u64 },
}

impl ForecastModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            ForecastModel::Ltc(_) => ModelKind::Ltc,
            ForecastModel::Lstm { .. } => ModelKind::Lstm,
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            ForecastModel::Ltc(m) => m.wiring.n_sensory,
            ForecastModel::Lstm { params, .. } => params.input_dim,
        }
    }

    pub fn param_count(&self) -> usize {
        match self {
            ForecastModel::Ltc(m) => m.param_count(),
            ForecastModel::Lstm { params, .. } => params.n_params(),
        }
    }

    pub fn predict_seq(&self, inputs: &[Vec<f64>]) -> Result<Vec<f64>, ForecastError> {
        match self {
            ForecastModel::Ltc(m) => Ok(ltc::forward(m, inputs)?.outputs),
            ForecastModel::Lstm { params, .. } => Ok(lstm_forward(params, inputs)?.outputs),
        }
    }

    pub fn params_flat(&self) -> Vec<f64> {
        match self {
            ForecastModel::Ltc(m) => m.params.flatten(),
            ForecastModel::Lstm { params, .. } => params.flatten(),
        }
    }

    pub fn set_params_flat(&mut self, flat: &[f64]) {
        match self {
            ForecastModel::Ltc(m) => m.params.assign_from_flat(flat),
            ForecastModel::Lstm { params, .. } => params.assign_from_flat(flat),
        }
    }

    /// Clamp parameters back into their invariants after an update.
    pub fn project(&mut self) {
        if let ForecastModel::Ltc(m) = self {
            m.params.project();
        }
    }

    /// Mean over (sequence, day) of squared error, with the matching exact
    /// gradient in flat order.
    pub fn loss_and_grad(&self, batch: &[&SequenceSample]) -> Result<(f64, Vec<f64>), ForecastError> {
        let total_days: usize = batch.iter().map(|s| s.len_days()).sum();
        if total_days == 0 {
            return Err(ForecastError::EmptyDataset);
        }
        let mut loss = 0.0;
        let mut grad = vec![0.0; self.params_flat().len()];
        for sample in batch {
            match self {
                ForecastModel::Ltc(m) => {
                    let trace = ltc::forward(m, &sample.inputs)?;
                    let dys: Vec<f64> = trace
                        .outputs
                        .iter()
                        .zip(&sample.labels)
                        .map(|(y, t)| {
                            loss += (y - t) * (y - t);
                            2.0 * (y - t) / total_days as f64
                        })
                        .collect();
                    let g = ltc::backward(m, &trace, &sample.inputs, &dys)?;
                    for (acc, v) in grad.iter_mut().zip(g.flatten()) {
                        *acc += v;
                    }
                }
                ForecastModel::Lstm { params, .. } => {
                    let trace = lstm_forward(params, &sample.inputs)?;
                    let dys: Vec<f64> = trace
                        .outputs
                        .iter()
                        .zip(&sample.labels)
                        .map(|(y, t)| {
                            loss += (y - t) * (y - t);
                            2.0 * (y - t) / total_days as f64
                        })
                        .collect();
                    let g = lstm_backward(params, &trace, &dys)?;
                    for (acc, v) in grad.iter_mut().zip(g.flatten()) {
                        *acc += v;
                    }
                }
            }
        }
        Ok((loss / total_days as f64, grad))
    }

    /// Mean per-day squared error over a dataset, no gradient.
    pub fn dataset_mse(&self, dataset: &[SequenceSample]) -> Result<f64, ForecastError> {
        let total_days: usize = dataset.iter().map(|s| s.len_days()).sum();
        if total_days == 0 {
            return Err(ForecastError::EmptyDataset);
        }
        let mut loss = 0.0;
        for sample in dataset {
            let outputs = self.predict_seq(&sample.inputs)?;
            for (y, t) in outputs.iter().zip(&sample.labels) {
                loss += (y - t) * (y - t);
            }
        }
        Ok(loss / total_days as f64)
    }
}

// ---- training ----

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// ODE sub-steps per day (liquid model only).
    pub unfold: usize,
    pub target_scale: TargetScale,
    /// Non-sensory units for the liquid model.
    pub ltc_units: usize,
    /// Wiring density of the liquid model.
    pub sparsity: SparsityConfig,
    /// Hidden width of the LSTM baseline.
    pub lstm_hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.001,
            epochs: 100,
            batch_size: 16,
            seed: 0,
            unfold: ltc::DEFAULT_UNFOLD,
            target_scale: TargetScale::NormalizedBy31,
            ltc_units: ltc::DEFAULT_UNITS,
            sparsity: SparsityConfig::default(),
            lstm_hidden: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ForecastError> {
        let bad = |message: &str| ForecastError::BadConfig {
            message: message.into(),
        };
        if self.learning_rate < 0.0 {
            return Err(bad("learning_rate must be >= 0"));
        }
        if self.batch_size == 0 || self.unfold == 0 || self.ltc_units == 0 || self.lstm_hidden == 0
        {
            return Err(bad("batch_size, unfold, ltc_units, lstm_hidden must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: ForecastModel,
    /// Mean per-day training loss per epoch.
    pub train_curve: Vec<f64>,
    /// Validation MSE per epoch (falls back to train loss when no val set).
    pub val_curve: Vec<f64>,
    /// Epoch whose parameters were kept (best validation MSE).
    pub best_epoch: usize,
}

fn init_model(kind: ModelKind, input_dim: usize, config: &TrainConfig) -> Result<ForecastModel, ForecastError> {
    Ok(match kind {
        ModelKind::Ltc => {
            let wiring = ltc::auto_ncp_wire(
                input_dim,
                config.ltc_units,
                1,
                config.seed,
                &config.sparsity,
            )?;
            ForecastModel::Ltc(LtcModel::new(wiring, config.seed, config.unfold))
        }
        ModelKind::Lstm => ForecastModel::Lstm {
            params: LstmParams::init(input_dim, config.lstm_hidden, config.seed),
            seed: config.seed,
        },
    })
}

/// Minibatch Adam over sequences; the loss is the mean over (patient, day)
/// pairs. Keeps the best-validation parameters.
pub fn train(
    kind: ModelKind,
    train_set: &[SequenceSample],
    val_set: &[SequenceSample],
    config: &TrainConfig,
) -> Result<TrainOutcome, ForecastError> {
    train_with_progress(kind, train_set, val_set, config, |_, _, _| {})
}

/// [`train`] with a per-epoch observer `(epoch, train_loss, val_loss)`.
pub fn train_with_progress(
    kind: ModelKind,
    train_set: &[SequenceSample],
    val_set: &[SequenceSample],
    config: &TrainConfig,
    mut on_epoch: impl FnMut(usize, f64, f64),
) -> Result<TrainOutcome, ForecastError> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    let input_dim = train_set[0].inputs[0].len();
    let mut model = init_model(kind, input_dim, config)?;
    let mut flat = model.params_flat();
    let mut adam = Adam::new(config.learning_rate, flat.len());

    let mut train_curve = Vec::with_capacity(config.epochs);
    let mut val_curve = Vec::with_capacity(config.epochs);
    let mut best = (f64::INFINITY, flat.clone(), 0usize);

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = stage_rng(derive_seed(config.seed, epoch as u64), "batch-shuffle");
        autoencoder::shuffle(&mut order, &mut rng);

        let mut epoch_loss = 0.0;
        let mut epoch_days = 0usize;
        for chunk in order.chunks(config.batch_size) {
            let batch: Vec<&SequenceSample> = chunk.iter().map(|&i| &train_set[i]).collect();
            let batch_days: usize = batch.iter().map(|s| s.len_days()).sum();
            let (loss, grad) = model.loss_and_grad(&batch)?;
            if !loss.is_finite() {
                return Err(ForecastError::NanLoss { epoch });
            }
            epoch_loss += loss * batch_days as f64;
            epoch_days += batch_days;
            adam.step(&mut flat, &grad);
            model.set_params_flat(&flat);
            model.project();
            flat = model.params_flat();
        }
        let train_loss = epoch_loss / epoch_days as f64;
        let val_loss = if val_set.is_empty() {
            train_loss
        } else {
            model.dataset_mse(val_set)?
        };
        if !val_loss.is_finite() {
            return Err(ForecastError::NanLoss { epoch });
        }
        train_curve.push(train_loss);
        val_curve.push(val_loss);
        on_epoch(epoch, train_loss, val_loss);
        if val_loss < best.0 {
            best = (val_loss, flat.clone(), epoch);
        }
    }

    if config.epochs > 0 {
        model.set_params_flat(&best.1);
    }
    Ok(TrainOutcome {
        model,
        train_curve,
        val_curve,
        best_epoch: best.2,
    })
}

// ---- prediction & evaluation ----

#[derive(Debug, Clone)]
pub struct Predictions {
    /// In the model's training scale, clamped to >= 0.
    pub scaled: Vec<f64>,
    /// In days, clamped to >= 0.
    pub raw_days: Vec<f64>,
}

/// Forward over an observed prefix; one prediction per observed day.
pub fn predict_remaining_los(
    model: &ForecastModel,
    inputs: &[Vec<f64>],
    scale: TargetScale,
) -> Result<Predictions, ForecastError> {
    if inputs.is_empty() {
        return Err(ForecastError::EmptyDataset);
    }
    let outputs = model.predict_seq(inputs)?;
    let scaled: Vec<f64> = outputs.iter().map(|y| y.max(0.0)).collect();
    let raw_days = scaled.iter().map(|y| y * scale.factor()).collect();
    Ok(Predictions { scaled, raw_days })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
}

/// R² = 1 - SS_res/SS_tot, MAE, RMSE. Labels must not be constant.
pub fn evaluate(predictions: &[f64], labels: &[f64]) -> Result<Metrics, ForecastError> {
    if predictions.len() != labels.len() {
        return Err(ForecastError::LengthMismatch {
            preds: predictions.len(),
            labels: labels.len(),
        });
    }
    if labels.len() < 2 {
        return Err(ForecastError::TooShort { got: labels.len() });
    }
    let n = labels.len() as f64;
    let mean = labels.iter().sum::<f64>() / n;
    let ss_tot: f64 = labels.iter().map(|y| (y - mean) * (y - mean)).sum();
    if ss_tot == 0.0 {
        return Err(ForecastError::ConstantLabels);
    }
    let ss_res: f64 = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (y - p) * (y - p))
        .sum();
    let mae = predictions
        .iter()
        .zip(labels)
        .map(|(p, y)| (y - p).abs())
        .sum::<f64>()
        / n;
    Ok(Metrics {
        r2: 1.0 - ss_res / ss_tot,
        mae,
        rmse: (ss_res / n).sqrt(),
    })
}

/// One row of a Table-1-style metrics report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricsReport {
    pub model: String,
    pub input_config: String,
    pub r2: f64,
    pub mae: f64,
    pub rmse: f64,
    pub scale: String,
}

/// Flatten a test set into (predictions, labels) pairs and score them in
/// both the training scale and raw days.
pub fn evaluate_on_dataset(
    model: &ForecastModel,
    dataset: &[SequenceSample],
    scale: TargetScale,
    input_config: &str,
) -> Result<Vec<MetricsReport>, ForecastError> {
    let mut preds_scaled = Vec::new();
    let mut labels_scaled = Vec::new();
    let mut preds_raw = Vec::new();
    let mut labels_raw = Vec::new();
    for sample in dataset {
        let p = predict_remaining_los(model, &sample.inputs, scale)?;
        preds_scaled.extend_from_slice(&p.scaled);
        preds_raw.extend_from_slice(&p.raw_days);
        labels_scaled.extend_from_slice(&sample.labels);
        labels_raw.extend_from_slice(&sample.labels_raw_days);
    }
    let scaled = evaluate(&preds_scaled, &labels_scaled)?;
    let raw = evaluate(&preds_raw, &labels_raw)?;
    let name = model.kind().as_str().to_string();
    Ok(vec![
        MetricsReport {
            model: name.clone(),
            input_config: input_config.to_string(),
            r2: scaled.r2,
            mae: scaled.mae,
            rmse: scaled.rmse,
            scale: scale.as_str().to_string(),
        },
        MetricsReport {
            model: name,
            input_config: input_config.to_string(),
            r2: raw.r2,
            mae: raw.mae,
            rmse: raw.rmse,
            scale: TargetScale::RawDays.as_str().to_string(),
        },
    ])
}

// ---- trajectories ----

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub day: u32,
    pub predicted_remaining: f64,
    pub true_remaining: f64,
}

/// Per-day predictions against truth for one admission, in raw days.
pub fn trajectory(
    model: &ForecastModel,
    sample: &SequenceSample,
    scale: TargetScale,
) -> Result<Vec<TrajectoryRow>, ForecastError> {
    let p = predict_remaining_los(model, &sample.inputs, scale)?;
    Ok(p.raw_days
        .iter()
        .zip(&sample.labels_raw_days)
        .enumerate()
        .map(|(day, (pred, truth))| TrajectoryRow {
            day: day as u32,
            predicted_remaining: *pred,
            true_remaining: *truth,
        })
        .collect())
}

/// Write `day,predicted_remaining,true_remaining` CSV; plot-ready.
pub fn report_trajectory(
    model: &ForecastModel,
    sample: &SequenceSample,
    scale: TargetScale,
    path: &Path,
) -> Result<Vec<TrajectoryRow>, ForecastError> {
    let rows = trajectory(model, sample, scale)?;
    let mut file = File::create(path).map_err(|e| io_err(path, e))?;
    writeln!(file, "day,predicted_remaining,true_remaining").map_err(|e| io_err(path, e))?;
    for row in &rows {
        writeln!(
            file,
            "{},{},{}",
            row.day, row.predicted_remaining, row.true_remaining
        )
        .map_err(|e| io_err(path, e))?;
    }
    Ok(rows)
}

/// Read a trajectory CSV back into (predictions, labels).
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>), ForecastError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)?;
    let headers = reader.headers()?.clone();
    let pred_col = headers
        .iter()
        .position(|h| h == "predicted_remaining")
        .ok_or_else(|| ForecastError::BadCheckpoint {
            message: "trajectory csv missing predicted_remaining".into(),
        })?;
    let true_col = headers
        .iter()
        .position(|h| h == "true_remaining")
        .ok_or_else(|| ForecastError::BadCheckpoint {
            message: "trajectory csv missing true_remaining".into(),
        })?;
    let mut preds = Vec::new();
    let mut labels = Vec::new();
    for record in reader.records() {
        let record = record?;
        preds.push(record.get(pred_col).unwrap_or("").parse().map_err(|_| {
            ForecastError::BadCheckpoint {
                message: "bad predicted_remaining value".into(),
            }
        })?);
        labels.push(record.get(true_col).unwrap_or("").parse().map_err(|_| {
            ForecastError::BadCheckpoint {
                message: "bad true_remaining value".into(),
            }
        })?);
    }
    Ok((preds, labels))
}

// ---- model bundle ----

const BUNDLE_MAGIC: &[u8; 4] = b"LOSB";

/// Trained-model file: the inner model checkpoint plus the training scale.
pub fn save_bundle(
    model: &ForecastModel,
    scale: TargetScale,
    path: &Path,
) -> Result<(), ForecastError> {
    let payload = match model {
        ForecastModel::Ltc(m) => ltc::model_to_bytes(m),
        ForecastModel::Lstm { params, seed } => lstm::lstm_to_bytes(params, *seed),
    };
    let mut buf = Vec::with_capacity(payload.len() + 20);
    buf.extend_from_slice(BUNDLE_MAGIC);
    buf.extend_from_slice(&1u32.to_le_bytes());
    buf.push(match model.kind() {
        ModelKind::Ltc => 0,
        ModelKind::Lstm => 1,
    });
    buf.push(match scale {
        TargetScale::RawDays => 0,
        TargetScale::NormalizedBy31 => 1,
    });
    buf.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    buf.extend_from_slice(&payload);
    std::fs::write(path, buf).map_err(|e| io_err(path, e))
}

pub fn load_bundle(path: &Path) -> Result<(ForecastModel, TargetScale), ForecastError> {
    let buf = std::fs::read(path).map_err(|e| io_err(path, e))?;
    let bad = |message: String| ForecastError::BadCheckpoint { message };
    if buf.len() < 18 || &buf[0..4] != BUNDLE_MAGIC {
        return Err(bad("bad magic".into()));
    }
    let version = u32::from_le_bytes(buf[4..8].try_into().unwrap());
    if version != 1 {
        return Err(bad(format!("unsupported version {version}")));
    }
    let kind = buf[8];
    let scale = match buf[9] {
        0 => TargetScale::RawDays,
        1 => TargetScale::NormalizedBy31,
        other => return Err(bad(format!("unknown scale tag {other}"))),
    };
    let len = u64::from_le_bytes(buf[10..18].try_into().unwrap()) as usize;
    if buf.len() != 18 + len {
        return Err(bad("payload length mismatch".into()));
    }
    let payload = &buf[18..];
    let model = match kind {
        0 => ForecastModel::Ltc(ltc::model_from_bytes(payload)?),
        1 => {
            let (params, seed) = lstm::lstm_from_bytes(payload)?;
            ForecastModel::Lstm { params, seed }
        }
        other => return Err(bad(format!("unknown model tag {other}"))),
    };
    Ok((model, scale))
}
