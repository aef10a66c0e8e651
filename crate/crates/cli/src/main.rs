//! `los` — one binary wiring the whole pipeline: synthesize a cohort,
//! vectorize notes, train the autoencoder, score severity, train a
//! forecaster, and report per-day remaining length-of-stay trajectories.
//!
//! Outputs are machine-readable (JSON/CSV); progress goes to stderr. Every
//! command is deterministic given its inputs and `--seed`: running a command
//! twice produces byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use los_core::autoencoder::{self, AeTrainConfig};
use los_core::concepts::{
    read_notes_jsonl, read_vectors_jsonl, vectorize_notes, write_vectors_jsonl, ConceptLexicon,
    NegationTriggers,
};
use los_core::forecaster::{
    assemble_dataset, assemble_sample, evaluate, evaluate_on_dataset, index_vectors, load_bundle,
    read_timelines_csv, read_trajectory_csv, report_trajectory, save_bundle, split_patients,
    train_with_progress, predict_remaining_los, MetricsReport, ModelKind, PatientTimeline,
    SequenceSample, TargetScale, TrainConfig,
};
use los_core::ltc::SparsityConfig;
use los_core::soi::{soi_vector, ScoringTables};
use los_core::synthdata::{
    generate_cohort, write_cohort, CohortSpec, DiseaseMix, NoiseLevels,
};

#[derive(Parser)]
#[command(
    name = "los",
    about = "Forecast remaining hospital length of stay from notes and vitals",
    version
)]
struct Cli {
    /// Master seed; all stage randomness derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file mirroring the flags; flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for generated files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic cohort (lexicon, notes, timelines, ground truth).
    Synth(SynthArgs),
    /// Turn a notes file into per-day ternary health vectors.
    Vectorize(VectorizeArgs),
    /// Train the health-vector autoencoder.
    TrainAe(TrainAeArgs),
    /// Compute severity scores for every patient-day in a timeline file.
    Soi(SoiArgs),
    /// Train a forecaster (ltc or lstm) and report test metrics.
    Train(TrainArgs),
    /// Predict remaining stay for one patient over an observed prefix.
    Predict(PredictArgs),
    /// Full per-day trajectory (predicted vs true) for one patient.
    Report(ReportArgs),
    /// Recompute metrics from a trajectory CSV.
    Eval(EvalArgs),
    /// Count trainable parameters in a model checkpoint.
    Paramcount(ParamcountArgs),
}

/// Mirrors every flag; flags override these values.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    n_patients: Option<usize>,
    mean_los: Option<f64>,
    los_min: Option<u32>,
    los_max: Option<u32>,
    mix_pneumonia: Option<f64>,
    mix_sepsis: Option<f64>,
    mix_cardiovascular: Option<f64>,
    walk_sigma: Option<f64>,
    vitals_jitter: Option<f64>,
    missing_rate: Option<f64>,
    negation_rate: Option<f64>,
    notes: Option<PathBuf>,
    lexicon: Option<PathBuf>,
    triggers: Option<PathBuf>,
    vectors: Option<PathBuf>,
    timelines: Option<PathBuf>,
    tables: Option<PathBuf>,
    ae: Option<PathBuf>,
    hidden: Option<Vec<usize>>,
    latent: Option<usize>,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    model: Option<String>,
    unfold: Option<usize>,
    ltc_units: Option<usize>,
    lstm_hidden: Option<usize>,
    sensory_fanout: Option<usize>,
    inter_command_fraction: Option<f64>,
    recurrent_fanout: Option<usize>,
    motor_fanin: Option<usize>,
    target_scale: Option<String>,
    model_file: Option<PathBuf>,
    patient: Option<String>,
    through_day: Option<u32>,
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    /// Cohort size.
    #[arg(long)]
    n_patients: Option<usize>,
    #[arg(long)]
    mean_los: Option<f64>,
    #[arg(long)]
    los_min: Option<u32>,
    #[arg(long)]
    los_max: Option<u32>,
    #[arg(long)]
    mix_pneumonia: Option<f64>,
    #[arg(long)]
    mix_sepsis: Option<f64>,
    #[arg(long)]
    mix_cardiovascular: Option<f64>,
    #[arg(long)]
    walk_sigma: Option<f64>,
    #[arg(long)]
    vitals_jitter: Option<f64>,
    #[arg(long)]
    missing_rate: Option<f64>,
    #[arg(long)]
    negation_rate: Option<f64>,
}

#[derive(Args)]
struct VectorizeArgs {
    /// Notes JSONL file.
    #[arg(long)]
    notes: Option<PathBuf>,
    /// Lexicon JSONL file.
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Negation trigger list; built-in defaults when omitted.
    #[arg(long)]
    triggers: Option<PathBuf>,
}

#[derive(Args)]
struct TrainAeArgs {
    /// Health-vector JSONL file.
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Lexicon JSONL file (validates vector width).
    #[arg(long)]
    lexicon: Option<PathBuf>,
    /// Hidden layer widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    latent: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
}

#[derive(Args)]
struct SoiArgs {
    /// Timeline CSV file.
    #[arg(long)]
    timelines: Option<PathBuf>,
    /// Scoring tables file; built-in defaults when omitted.
    #[arg(long)]
    tables: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    /// Which forecaster: ltc or lstm.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    timelines: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    /// Autoencoder checkpoint from train-ae.
    #[arg(long)]
    ae: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    learning_rate: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    /// ODE sub-steps per day (liquid model).
    #[arg(long)]
    unfold: Option<usize>,
    #[arg(long)]
    ltc_units: Option<usize>,
    #[arg(long)]
    lstm_hidden: Option<usize>,
    #[arg(long)]
    sensory_fanout: Option<usize>,
    #[arg(long)]
    inter_command_fraction: Option<f64>,
    #[arg(long)]
    recurrent_fanout: Option<usize>,
    #[arg(long)]
    motor_fanin: Option<usize>,
    /// raw_days or normalized_by_31.
    #[arg(long)]
    target_scale: Option<String>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model checkpoint from train.
    #[arg(long)]
    model_file: Option<PathBuf>,
    #[arg(long)]
    ae: Option<PathBuf>,
    #[arg(long)]
    timelines: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    patient: Option<String>,
    /// Use only days 0..=through_day.
    #[arg(long)]
    through_day: Option<u32>,
}

#[derive(Args)]
struct ReportArgs {
    #[arg(long)]
    model_file: Option<PathBuf>,
    #[arg(long)]
    ae: Option<PathBuf>,
    #[arg(long)]
    timelines: Option<PathBuf>,
    #[arg(long)]
    vectors: Option<PathBuf>,
    #[arg(long)]
    tables: Option<PathBuf>,
    #[arg(long)]
    patient: Option<String>,
}

#[derive(Args)]
struct EvalArgs {
    /// Trajectory CSV to score.
    #[arg(long)]
    trajectory: Option<PathBuf>,
}

#[derive(Args)]
struct ParamcountArgs {
    #[arg(long)]
    model_file: Option<PathBuf>,
}

fn main() {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => {}
        Err(err) => {
            // single-line JSON error on stdout, detail on stderr
            println!(
                "{}",
                serde_json::json!({ "error": format!("{err:#}") })
            );
            eprintln!("error: {err:#}");
            std::process::exit(1);
        }
    }
}

fn pick<T: Clone>(flag: Option<T>, config: Option<T>, default: T) -> T {
    flag.or(config).unwrap_or(default)
}

fn need<T: Clone>(flag: Option<T>, config: Option<T>, name: &str) -> Result<T> {
    flag.or(config)
        .with_context(|| format!("missing required option --{name}"))
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))
        }
    }
}

fn load_tables(path: Option<&Path>) -> Result<ScoringTables> {
    match path {
        None => Ok(ScoringTables::default_tables()),
        Some(p) => Ok(ScoringTables::from_path(p)?),
    }
}

fn load_triggers(path: Option<&Path>) -> Result<NegationTriggers> {
    match path {
        None => Ok(NegationTriggers::default()),
        Some(p) => Ok(NegationTriggers::from_path(p)?),
    }
}

fn parse_scale(s: &str) -> Result<TargetScale> {
    match s {
        "raw_days" => Ok(TargetScale::RawDays),
        "normalized_by_31" => Ok(TargetScale::NormalizedBy31),
        other => bail!("unknown target scale {other:?} (want raw_days or normalized_by_31)"),
    }
}

fn run(cli: Cli) -> Result<()> {
    let file_config = load_file_config(cli.config.as_deref())?;
    let seed = pick(cli.seed, file_config.seed, 0);
    let out_dir = pick(cli.out.clone(), file_config.out.clone(), PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;

    match cli.command {
        Command::Synth(args) => cmd_synth(args, &file_config, seed, &out_dir),
        Command::Vectorize(args) => cmd_vectorize(args, &file_config, &out_dir),
        Command::TrainAe(args) => cmd_train_ae(args, &file_config, seed, &out_dir),
        Command::Soi(args) => cmd_soi(args, &file_config, &out_dir),
        Command::Train(args) => cmd_train(args, &file_config, seed, &out_dir),
        Command::Predict(args) => cmd_predict(args, &file_config, &out_dir),
        Command::Report(args) => cmd_report(args, &file_config, &out_dir),
        Command::Eval(args) => cmd_eval(args, &file_config, &out_dir),
        Command::Paramcount(args) => cmd_paramcount(args, &file_config),
    }
}

fn cmd_synth(args: SynthArgs, cfg: &FileConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let spec = CohortSpec {
        n_patients: pick(args.n_patients, cfg.n_patients, 500),
        los_range: (
            pick(args.los_min, cfg.los_min, 2),
            pick(args.los_max, cfg.los_max, 31),
        ),
        mix: DiseaseMix {
            pneumonia: pick(args.mix_pneumonia, cfg.mix_pneumonia, 0.45),
            sepsis: pick(args.mix_sepsis, cfg.mix_sepsis, 0.31),
            cardiovascular: pick(args.mix_cardiovascular, cfg.mix_cardiovascular, 0.24),
        },
        mean_los: pick(args.mean_los, cfg.mean_los, 10.0),
        seed,
        noise: NoiseLevels {
            walk_sigma: pick(args.walk_sigma, cfg.walk_sigma, 0.03),
            vitals_jitter: pick(args.vitals_jitter, cfg.vitals_jitter, 1.0),
            missing_rate: pick(args.missing_rate, cfg.missing_rate, 0.05),
            negation_rate: pick(args.negation_rate, cfg.negation_rate, 1.0),
        },
    };
    eprintln!("generating cohort of {} patients (seed {seed})", spec.n_patients);
    let cohort = generate_cohort(&spec)?;
    let paths = write_cohort(&cohort, out_dir)?;
    let total_days: u32 = cohort.timelines.iter().map(|t| t.total_los).sum();
    let mean_los = f64::from(total_days) / cohort.timelines.len() as f64;
    println!(
        "{}",
        serde_json::json!({
            "patients": cohort.timelines.len(),
            "notes": cohort.notes.len(),
            "mean_los": mean_los,
            "vocab_size": cohort.lexicon.vocab_size(),
            "lexicon": paths.lexicon,
            "notes_file": paths.notes,
            "timelines": paths.timelines,
            "ground_truth": paths.ground_truth,
        })
    );
    Ok(())
}

fn cmd_vectorize(args: VectorizeArgs, cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let notes_path = need(args.notes, cfg.notes.clone(), "notes")?;
    let lexicon_path = need(args.lexicon, cfg.lexicon.clone(), "lexicon")?;
    let lexicon = ConceptLexicon::from_path(&lexicon_path)?;
    let triggers = load_triggers(args.triggers.or(cfg.triggers.clone()).as_deref())?;
    let notes = read_notes_jsonl(&notes_path)?;
    eprintln!("vectorizing {} notes over |V|={}", notes.len(), lexicon.vocab_size());
    let vectors = vectorize_notes(&notes, &lexicon, &triggers)?;
    let out = out_dir.join("vectors.jsonl");
    write_vectors_jsonl(&vectors, &out)?;
    println!(
        "{}",
        serde_json::json!({
            "vectors": vectors.len(),
            "vocab_size": lexicon.vocab_size(),
            "out": out,
        })
    );
    Ok(())
}

fn cmd_train_ae(args: TrainAeArgs, cfg: &FileConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let vectors_path = need(args.vectors, cfg.vectors.clone(), "vectors")?;
    let lexicon = args
        .lexicon
        .or(cfg.lexicon.clone())
        .map(|p| ConceptLexicon::from_path(&p))
        .transpose()?;

    // vector width must be self-consistent; the lexicon pins it when given
    let first_width = peek_vector_width(&vectors_path)?;
    let vocab = lexicon.as_ref().map(|l| l.vocab_size()).unwrap_or(first_width);
    let vectors = read_vectors_jsonl(&vectors_path, vocab)?;
    let data: Vec<Vec<f64>> = vectors.iter().map(|v| v.values_f64()).collect();

    let config = AeTrainConfig {
        hidden_dims: pick(args.hidden, cfg.hidden.clone(), vec![40]),
        latent_dim: pick(args.latent, cfg.latent, 16),
        epochs: pick(args.epochs, cfg.epochs, 30),
        learning_rate: pick(args.learning_rate, cfg.learning_rate, 0.001),
        batch_size: pick(args.batch_size, cfg.batch_size, 16),
        seed,
    };
    eprintln!(
        "training autoencoder {}->{:?}->{} on {} vectors for {} epochs",
        vocab, config.hidden_dims, config.latent_dim, data.len(), config.epochs
    );
    let result = autoencoder::train_ae(&data, &config)?;
    let ckpt = out_dir.join("ae.ckpt");
    autoencoder::save_checkpoint(&result.params, seed, result.epochs_run as u32, &ckpt)?;

    let curve_path = out_dir.join("ae_curve.csv");
    let mut curve = String::from("epoch,loss\n");
    for (i, loss) in result.loss_curve.iter().enumerate() {
        curve.push_str(&format!("{i},{loss}\n"));
    }
    fs::write(&curve_path, curve)?;

    println!(
        "{}",
        serde_json::json!({
            "initial_loss": result.loss_curve.first(),
            "final_loss": result.loss_curve.last(),
            "epochs": result.epochs_run,
            "checkpoint": ckpt,
            "curve": curve_path,
        })
    );
    Ok(())
}

fn peek_vector_width(path: &Path) -> Result<usize> {
    use std::io::BufRead;
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    let mut line = String::new();
    std::io::BufReader::new(file).read_line(&mut line)?;
    let v: serde_json::Value = serde_json::from_str(&line)
        .with_context(|| format!("{} is not a vectors JSONL file", path.display()))?;
    Ok(v["values"].as_array().map(|a| a.len()).unwrap_or(0))
}

fn cmd_soi(args: SoiArgs, cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let timelines_path = need(args.timelines, cfg.timelines.clone(), "timelines")?;
    let tables = load_tables(args.tables.or(cfg.tables.clone()).as_deref())?;
    let timelines = read_timelines_csv(&timelines_path)?;
    let out = out_dir.join("soi.jsonl");
    let mut text = String::new();
    let mut rows = 0usize;
    for timeline in &timelines {
        for rec in &timeline.days {
            let soi = soi_vector(&rec.vitals, &tables)?;
            let line = serde_json::json!({
                "patient_id": timeline.patient_id,
                "day": rec.day,
                "apache2": soi.apache2,
                "saps2": soi.saps2,
                "sofa": soi.sofa,
                "oasis": soi.oasis,
            });
            text.push_str(&line.to_string());
            text.push('\n');
            rows += 1;
        }
    }
    fs::write(&out, text)?;
    println!("{}", serde_json::json!({ "rows": rows, "out": out }));
    Ok(())
}

struct AssembledData {
    samples: Vec<SequenceSample>,
    timelines: Vec<PatientTimeline>,
}

fn assemble_from_files(
    timelines_path: &Path,
    vectors_path: &Path,
    ae_path: &Path,
    tables: &ScoringTables,
    scale: TargetScale,
) -> Result<(AssembledData, autoencoder::AeParams)> {
    let ae = autoencoder::load_checkpoint(ae_path)?;
    let vectors = read_vectors_jsonl(vectors_path, ae.params.input_dim())?;
    let timelines = read_timelines_csv(timelines_path)?;
    let index = index_vectors(&vectors);
    let samples = assemble_dataset(&timelines, &index, &ae.params, tables, scale)?;
    Ok((AssembledData { samples, timelines }, ae.params))
}

fn cmd_train(args: TrainArgs, cfg: &FileConfig, seed: u64, out_dir: &Path) -> Result<()> {
    let kind: ModelKind = need(args.model, cfg.model.clone(), "model")?
        .parse()
        .map_err(anyhow::Error::msg)?;
    let timelines_path = need(args.timelines, cfg.timelines.clone(), "timelines")?;
    let vectors_path = need(args.vectors, cfg.vectors.clone(), "vectors")?;
    let ae_path = need(args.ae, cfg.ae.clone(), "ae")?;
    let tables = load_tables(args.tables.or(cfg.tables.clone()).as_deref())?;
    let scale = parse_scale(&pick(
        args.target_scale,
        cfg.target_scale.clone(),
        "normalized_by_31".into(),
    ))?;

    let config = TrainConfig {
        learning_rate: pick(args.learning_rate, cfg.learning_rate, 0.001),
        epochs: pick(args.epochs, cfg.epochs, 100),
        batch_size: pick(args.batch_size, cfg.batch_size, 16),
        seed,
        unfold: pick(args.unfold, cfg.unfold, 4),
        target_scale: scale,
        ltc_units: pick(args.ltc_units, cfg.ltc_units, 28),
        sparsity: SparsityConfig {
            sensory_fanout: pick(args.sensory_fanout, cfg.sensory_fanout, 4),
            inter_command_fraction: pick(
                args.inter_command_fraction,
                cfg.inter_command_fraction,
                0.5,
            ),
            recurrent_fanout: pick(args.recurrent_fanout, cfg.recurrent_fanout, 4),
            motor_fanin: pick(args.motor_fanin, cfg.motor_fanin, 6),
        },
        lstm_hidden: pick(args.lstm_hidden, cfg.lstm_hidden, 32),
    };

    let (data, _ae) = assemble_from_files(&timelines_path, &vectors_path, &ae_path, &tables, scale)?;
    let ids: Vec<String> = data.timelines.iter().map(|t| t.patient_id.clone()).collect();
    let manifest = split_patients(&ids, seed);
    let in_split = |names: &[String]| -> Vec<SequenceSample> {
        data.samples
            .iter()
            .filter(|s| names.binary_search(&s.patient_id).is_ok())
            .cloned()
            .collect()
    };
    let train_set = in_split(&manifest.train);
    let val_set = in_split(&manifest.val);
    let test_set = in_split(&manifest.test);
    eprintln!(
        "training {} on {} patients (val {}, test {}), {} epochs",
        kind.as_str(),
        train_set.len(),
        val_set.len(),
        test_set.len(),
        config.epochs
    );

    let outcome = train_with_progress(kind, &train_set, &val_set, &config, |epoch, tr, va| {
        if (epoch + 1) % 10 == 0 {
            eprintln!("  epoch {:>3}: train {tr:.6} val {va:.6}", epoch + 1);
        }
    })?;

    let model_path = out_dir.join(format!("model_{}.ckpt", kind.as_str()));
    save_bundle(&outcome.model, scale, &model_path)?;
    let split_path = out_dir.join("split.json");
    fs::write(&split_path, serde_json::to_string_pretty(&manifest)?)?;

    let reports = evaluate_on_dataset(
        &outcome.model,
        &test_set,
        scale,
        "autoencoded_health_vector+soi",
    )?;
    let metrics_path = out_dir.join(format!("metrics_{}.json", kind.as_str()));
    let metrics_json = serde_json::to_string_pretty(&reports)?;
    fs::write(&metrics_path, &metrics_json)?;
    println!("{metrics_json}");
    eprintln!(
        "saved {} (best epoch {}), metrics {}, split {}",
        model_path.display(),
        outcome.best_epoch,
        metrics_path.display(),
        split_path.display()
    );
    Ok(())
}

fn find_patient<'a>(
    timelines: &'a [PatientTimeline],
    patient_id: &str,
) -> Result<&'a PatientTimeline> {
    timelines
        .iter()
        .find(|t| t.patient_id == patient_id)
        .with_context(|| format!("patient {patient_id} not found in timelines"))
}

fn cmd_predict(args: PredictArgs, cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let model_path = need(args.model_file, cfg.model_file.clone(), "model-file")?;
    let ae_path = need(args.ae, cfg.ae.clone(), "ae")?;
    let timelines_path = need(args.timelines, cfg.timelines.clone(), "timelines")?;
    let vectors_path = need(args.vectors, cfg.vectors.clone(), "vectors")?;
    let patient = need(args.patient, cfg.patient.clone(), "patient")?;
    let tables = load_tables(args.tables.or(cfg.tables.clone()).as_deref())?;

    let (model, scale) = load_bundle(&model_path)?;
    let (data, ae_params) =
        assemble_from_files(&timelines_path, &vectors_path, &ae_path, &tables, scale)?;
    let timeline = find_patient(&data.timelines, &patient)?;
    let through_day = args
        .through_day
        .or(cfg.through_day)
        .unwrap_or(timeline.total_los - 1);

    let mut prefix = timeline.clone();
    prefix.days.truncate(through_day as usize + 1);
    // a prefix is not a full stay; assemble inputs directly
    let vectors = read_vectors_jsonl(&vectors_path, ae_params.input_dim())?;
    let index = index_vectors(&vectors);
    let full = assemble_sample(timeline, &index, &ae_params, &tables, scale)?;
    let inputs = &full.inputs[..=through_day as usize];

    let p = predict_remaining_los(&model, inputs, scale)?;
    let out = out_dir.join(format!("predictions_{patient}.csv"));
    let mut text = String::from("day,predicted_remaining,true_remaining\n");
    for (day, pred) in p.raw_days.iter().enumerate() {
        text.push_str(&format!(
            "{day},{pred},{}\n",
            full.labels_raw_days[day]
        ));
    }
    fs::write(&out, text)?;
    println!(
        "{}",
        serde_json::json!({ "patient": patient, "days": p.raw_days.len(), "out": out })
    );
    Ok(())
}

fn cmd_report(args: ReportArgs, cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let model_path = need(args.model_file, cfg.model_file.clone(), "model-file")?;
    let ae_path = need(args.ae, cfg.ae.clone(), "ae")?;
    let timelines_path = need(args.timelines, cfg.timelines.clone(), "timelines")?;
    let vectors_path = need(args.vectors, cfg.vectors.clone(), "vectors")?;
    let patient = need(args.patient, cfg.patient.clone(), "patient")?;
    let tables = load_tables(args.tables.or(cfg.tables.clone()).as_deref())?;

    let (model, scale) = load_bundle(&model_path)?;
    let (data, ae_params) =
        assemble_from_files(&timelines_path, &vectors_path, &ae_path, &tables, scale)?;
    let timeline = find_patient(&data.timelines, &patient)?;
    let vectors = read_vectors_jsonl(&vectors_path, ae_params.input_dim())?;
    let index = index_vectors(&vectors);
    let sample = assemble_sample(timeline, &index, &ae_params, &tables, scale)?;

    let out = out_dir.join(format!("trajectory_{patient}.csv"));
    let rows = report_trajectory(&model, &sample, scale, &out)?;
    println!(
        "{}",
        serde_json::json!({ "patient": patient, "rows": rows.len(), "out": out })
    );
    Ok(())
}

fn cmd_eval(args: EvalArgs, cfg: &FileConfig, out_dir: &Path) -> Result<()> {
    let trajectory = need(args.trajectory, cfg.trajectory.clone(), "trajectory")?;
    let (preds, labels) = read_trajectory_csv(&trajectory)?;
    let metrics = evaluate(&preds, &labels)?;
    let report = MetricsReport {
        model: "trajectory_csv".into(),
        input_config: trajectory.display().to_string(),
        r2: metrics.r2,
        mae: metrics.mae,
        rmse: metrics.rmse,
        scale: TargetScale::RawDays.as_str().into(),
    };
    let out = out_dir.join("metrics_eval.json");
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(&out, &json)?;
    println!("{json}");
    Ok(())
}

fn cmd_paramcount(args: ParamcountArgs, cfg: &FileConfig) -> Result<()> {
    let model_path = need(args.model_file, cfg.model_file.clone(), "model-file")?;
    let (model, _) = load_bundle(&model_path)?;
    let file_bytes = fs::metadata(&model_path)?.len();
    println!(
        "{}",
        serde_json::json!({
            "param_count": model.param_count(),
            "model": model.kind().as_str(),
            "file_bytes": file_bytes,
        })
    );
    Ok(())
}
