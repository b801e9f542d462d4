use std::io::Write;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spherecc::constraints::ConstraintSet;
use spherecc::error::{Error, Result};
use spherecc::kinfer::{infer_k_lifetime, infer_k_pca, infer_k_silhouette, Diagnostics};
use spherecc::net::Checkpoint;
use spherecc::trainer::extract_sphere_embedding;

use crate::config::{parse_k_range, write_effective, FileConfig};
use crate::manifest::RunTimer;

use super::{ensure_dir, load_training_view};

#[derive(Args)]
pub struct InferKArgs {
    /// Model checkpoint from `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset CSV the checkpoint was trained on
    #[arg(long)]
    data: PathBuf,
    /// Split JSON; restricts inference to the training rows
    #[arg(long)]
    split: Option<PathBuf>,
    /// The dataset CSV has no label column
    #[arg(long)]
    no_labels: bool,
    /// Constraints CSV (required by the pca method)
    #[arg(long)]
    constraints: Option<PathBuf>,
    /// pca, silhouette, or lifetime
    #[arg(long)]
    method: Option<String>,
    /// Plateau tolerance for the pca method
    #[arg(long)]
    rho: Option<f64>,
    /// Candidate range lo:hi for the score-based methods
    #[arg(long)]
    k_range: Option<String>,
    /// Restarts per candidate k (silhouette)
    #[arg(long)]
    restarts: Option<usize>,
    /// Silhouette subsample cap
    #[arg(long)]
    subsample: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EffectiveInferK {
    command: &'static str,
    checkpoint: String,
    data: String,
    split: Option<String>,
    constraints: Option<String>,
    method: String,
    rho: f64,
    k_range: String,
    restarts: usize,
    subsample: usize,
    seed: u64,
}

pub fn run(args: InferKArgs) -> Result<i32> {
    let mut timer = RunTimer::start("infer-k");
    let file = FileConfig::load(args.config.as_deref())?;

    let method = args.method.or(file.method).unwrap_or_else(|| "pca".into());
    let rho = args.rho.or(file.rho).unwrap_or(0.05);
    let k_range_s = args.k_range.or(file.k_range).unwrap_or_else(|| "2:9".into());
    let k_range = parse_k_range(&k_range_s)?;
    let restarts = args.restarts.or(file.restarts).unwrap_or(10);
    let subsample = args.subsample.or(file.subsample).unwrap_or(2000);
    let seed = args.seed.or(file.seed).unwrap_or(0);

    timer.input(&args.checkpoint);
    timer.input(&args.data);
    if let Some(s) = &args.split {
        timer.input(s);
    }
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let net = checkpoint.to_model()?;
    let (_, _, x_raw, _) = load_training_view(&args.data, args.split.as_ref(), !args.no_labels)?;
    let x = match &checkpoint.standardizer {
        Some(st) => st.apply(&x_raw)?,
        None => x_raw,
    };
    let z = extract_sphere_embedding(&net, &x)?;

    let estimate = match method.as_str() {
        "pca" => {
            let path = args.constraints.as_ref().ok_or_else(|| Error::InvalidParameter {
                what: "the pca method needs --constraints".into(),
            })?;
            timer.input(path);
            let cs = ConstraintSet::load_csv(path, x.nrows())?;
            infer_k_pca(&z, &cs, rho)?
        }
        "silhouette" => infer_k_silhouette(&z, k_range.clone(), restarts, subsample, seed)?,
        "lifetime" => infer_k_lifetime(&z, k_range.clone())?,
        other => {
            return Err(Error::InvalidParameter {
                what: format!("method must be pca, silhouette, or lifetime, got {other:?}"),
            })
        }
    };

    ensure_dir(&args.out_dir)?;
    let eff = EffectiveInferK {
        command: "infer-k",
        checkpoint: args.checkpoint.display().to_string(),
        data: args.data.display().to_string(),
        split: args.split.as_ref().map(|p| p.display().to_string()),
        constraints: args.constraints.as_ref().map(|p| p.display().to_string()),
        method,
        rho,
        k_range: k_range_s,
        restarts,
        subsample,
        seed,
    };
    write_effective(&args.out_dir, &eff)?;
    timer.output(&args.out_dir.join("effective-config.toml"));

    let est_path = args.out_dir.join("k-estimate.json");
    estimate.save_json(&est_path)?;
    timer.output(&est_path);
    match &estimate.diagnostics {
        Diagnostics::Curve(curve) => {
            let path = args.out_dir.join("curve.csv");
            curve.save_csv(&path)?;
            timer.output(&path);
        }
        Diagnostics::Scores(scores) => {
            let path = args.out_dir.join("scores.csv");
            let mut f = std::io::BufWriter::new(std::fs::File::create(&path)?);
            writeln!(f, "k,score")?;
            for (k, s) in scores {
                writeln!(f, "{k},{s}")?;
            }
            f.flush()?;
            timer.output(&path);
        }
    }
    timer.finish(&args.out_dir)?;
    writeln!(std::io::stdout(), "inferred k = {}", estimate.k_hat)?;
    Ok(0)
}
