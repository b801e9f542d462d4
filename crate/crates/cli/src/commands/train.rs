use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spherecc::constraints::ConstraintSet;
use spherecc::data::Standardizer;
use spherecc::error::{Error, Result};
use spherecc::net::Checkpoint;
use spherecc::trainer::{train, EarlyStopConfig, TrainConfig};

use crate::config::{parse_instance_batch, parse_omega, write_effective, FileConfig};
use crate::manifest::RunTimer;

use super::{ensure_dir, load_training_view};

#[derive(Args)]
pub struct TrainArgs {
    /// Dataset CSV (features, plus a trailing label column unless --no-labels)
    #[arg(long)]
    data: PathBuf,
    /// Split JSON; training uses only the train rows when given
    #[arg(long)]
    split: Option<PathBuf>,
    /// Constraint CSV indexed over the training rows
    #[arg(long)]
    constraints: PathBuf,
    /// The dataset CSV has no label column
    #[arg(long)]
    no_labels: bool,
    #[arg(long)]
    embed_dim: Option<usize>,
    /// Encoder hidden widths, e.g. 64,64,256
    #[arg(long, value_delimiter = ',')]
    hidden: Option<Vec<usize>>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    /// auto, exact, or a number; exact derives the factor from --k
    #[arg(long)]
    omega: Option<String>,
    /// Cluster count, only consulted by --omega exact
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    epochs_max: Option<usize>,
    #[arg(long)]
    constraint_batch: Option<usize>,
    /// auto or a count
    #[arg(long)]
    instance_batch: Option<String>,
    #[arg(long)]
    early_stop_warmup: Option<usize>,
    #[arg(long)]
    early_stop_rel_tol: Option<f64>,
    #[arg(long)]
    early_stop_patience: Option<usize>,
    /// Skip fitting the per-feature standardizer
    #[arg(long)]
    no_standardize: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EffectiveTrain<'a> {
    command: &'static str,
    data: String,
    split: Option<String>,
    constraints: String,
    standardize: bool,
    #[serde(flatten)]
    train: &'a TrainConfig,
}

pub fn run(args: TrainArgs) -> Result<i32> {
    let mut timer = RunTimer::start("train");
    let file = FileConfig::load(args.config.as_deref())?;
    let defaults = TrainConfig::default();

    let omega_str = args.omega.or(file.omega);
    let k = args.k.or(file.k);
    let instance_str = args.instance_batch.or(file.instance_batch);
    let cfg = TrainConfig {
        epochs_max: args.epochs_max.or(file.epochs_max).unwrap_or(defaults.epochs_max),
        constraint_batch: args
            .constraint_batch
            .or(file.constraint_batch)
            .unwrap_or(defaults.constraint_batch),
        instance_batch: match instance_str {
            Some(s) => parse_instance_batch(&s)?,
            None => defaults.instance_batch,
        },
        lr: args.lr.or(file.lr).unwrap_or(defaults.lr),
        lambda: args.lambda.or(file.lambda).unwrap_or(defaults.lambda),
        omega: match omega_str {
            Some(s) => parse_omega(&s, k)?,
            None => defaults.omega,
        },
        embed_dim: args.embed_dim.or(file.embed_dim).unwrap_or(defaults.embed_dim),
        hidden: args.hidden.or(file.hidden).unwrap_or(defaults.hidden),
        seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
        early_stop: EarlyStopConfig {
            warmup_epochs: args
                .early_stop_warmup
                .or(file.early_stop_warmup)
                .unwrap_or(defaults.early_stop.warmup_epochs),
            rel_tol: args
                .early_stop_rel_tol
                .or(file.early_stop_rel_tol)
                .unwrap_or(defaults.early_stop.rel_tol),
            patience: args
                .early_stop_patience
                .or(file.early_stop_patience)
                .unwrap_or(defaults.early_stop.patience),
        },
    };
    cfg.validate()?;
    let standardize = !args.no_standardize && file.standardize.unwrap_or(true);

    timer.input(&args.data);
    timer.input(&args.constraints);
    if let Some(s) = &args.split {
        timer.input(s);
    }
    let (_, _, x_raw, _) = load_training_view(&args.data, args.split.as_ref(), !args.no_labels)?;
    let standardizer = if standardize { Some(Standardizer::fit(&x_raw)?) } else { None };
    let x = match &standardizer {
        Some(st) => st.apply(&x_raw)?,
        None => x_raw,
    };
    let cs = ConstraintSet::load_csv(&args.constraints, x.nrows())?;

    ensure_dir(&args.out_dir)?;
    let eff = EffectiveTrain {
        command: "train",
        data: args.data.display().to_string(),
        split: args.split.as_ref().map(|p| p.display().to_string()),
        constraints: args.constraints.display().to_string(),
        standardize,
        train: &cfg,
    };
    write_effective(&args.out_dir, &eff)?;
    timer.output(&args.out_dir.join("effective-config.toml"));

    let report_path = args.out_dir.join("train-report.json");
    let (model, report) = match train(&x, &cs, &cfg) {
        Ok(out) => out,
        Err(e @ (Error::Diverged { .. } | Error::NonFiniteGradient { .. })) => {
            // Leave a machine-readable trace of the failed run.
            let stub = serde_json::json!({ "stop_reason": "diverged", "detail": e.to_string() });
            std::fs::write(&report_path, serde_json::to_string_pretty(&stub)? + "\n")?;
            timer.output(&report_path);
            timer.finish(&args.out_dir)?;
            return Err(e);
        }
        Err(e) => return Err(e),
    };

    let checkpoint_path = args.out_dir.join("checkpoint.json");
    Checkpoint::from_model(&model, cfg.content_hash(), standardizer).save(&checkpoint_path)?;
    timer.output(&checkpoint_path);
    report.save_json(&report_path)?;
    timer.output(&report_path);
    let loss_path = args.out_dir.join("loss.csv");
    report.save_loss_csv(&loss_path)?;
    timer.output(&loss_path);
    timer.finish(&args.out_dir)?;

    use std::io::Write;
    writeln!(
        std::io::stdout(),
        "trained {} epochs ({:?}), final angular loss {:.4e}",
        report.final_epoch,
        report.stop_reason,
        report.final_l_ang()
    )?;
    Ok(0)
}
