use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spherecc::clustering::{agglomerative_ward, kmeans, predict};
use spherecc::error::{Error, Result};
use spherecc::eval::metric_report;
use spherecc::net::Checkpoint;
use spherecc::trainer::extract_sphere_embedding;

use crate::config::{write_effective, FileConfig};
use crate::manifest::RunTimer;

use super::{ensure_dir, load_training_view, save_labels_csv};

#[derive(Args)]
pub struct ClusterArgs {
    /// Model checkpoint from `train`
    #[arg(long)]
    checkpoint: PathBuf,
    /// Dataset CSV the checkpoint was trained on
    #[arg(long)]
    data: PathBuf,
    /// Split JSON; enables held-out metrics via nearest-centroid prediction
    #[arg(long)]
    split: Option<PathBuf>,
    /// The dataset CSV has no label column
    #[arg(long)]
    no_labels: bool,
    /// Number of clusters
    #[arg(long)]
    k: Option<usize>,
    /// kmeans or ward
    #[arg(long)]
    method: Option<String>,
    /// Restarts for kmeans
    #[arg(long)]
    restarts: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EffectiveCluster {
    command: &'static str,
    checkpoint: String,
    data: String,
    split: Option<String>,
    k: usize,
    method: String,
    restarts: usize,
    seed: u64,
}

pub fn run(args: ClusterArgs) -> Result<i32> {
    let mut timer = RunTimer::start("cluster");
    let file = FileConfig::load(args.config.as_deref())?;

    let k = args.k.or(file.k).ok_or_else(|| Error::InvalidParameter {
        what: "--k is required (flag or config file)".into(),
    })?;
    let method = args.method.or(file.method).unwrap_or_else(|| "kmeans".into());
    let restarts = args.restarts.or(file.restarts).unwrap_or(20);
    let seed = args.seed.or(file.seed).unwrap_or(0);
    if method != "kmeans" && method != "ward" {
        return Err(Error::InvalidParameter {
            what: format!("method must be kmeans or ward, got {method:?}"),
        });
    }

    timer.input(&args.checkpoint);
    timer.input(&args.data);
    if let Some(s) = &args.split {
        timer.input(s);
    }
    let checkpoint = Checkpoint::load(&args.checkpoint)?;
    let net = checkpoint.to_model()?;
    let (ds, split, x_raw, labels) =
        load_training_view(&args.data, args.split.as_ref(), !args.no_labels)?;
    let x = match &checkpoint.standardizer {
        Some(st) => st.apply(&x_raw)?,
        None => x_raw,
    };

    let z = extract_sphere_embedding(&net, &x)?;
    let model = match method.as_str() {
        "kmeans" => kmeans(&z, k, restarts, seed)?,
        _ => agglomerative_ward(&z, k)?.0,
    };

    ensure_dir(&args.out_dir)?;
    let eff = EffectiveCluster {
        command: "cluster",
        checkpoint: args.checkpoint.display().to_string(),
        data: args.data.display().to_string(),
        split: args.split.as_ref().map(|p| p.display().to_string()),
        k,
        method: method.clone(),
        restarts,
        seed,
    };
    write_effective(&args.out_dir, &eff)?;
    timer.output(&args.out_dir.join("effective-config.toml"));

    let model_path = args.out_dir.join("cluster-model.json");
    model.save_json(&model_path)?;
    timer.output(&model_path);
    let assign_path = args.out_dir.join("assignments.csv");
    model.save_assignments_csv(&assign_path)?;
    timer.output(&assign_path);

    use std::io::Write;
    let mut out = std::io::stdout();
    if let Some(y) = &labels {
        let report = metric_report(&model.assignments, y)?;
        let path = args.out_dir.join("train-metrics.json");
        report.save_json(&path)?;
        timer.output(&path);
        writeln!(out, "train ACC {:.4}, NMI {:.4}, ARI {:.4}", report.acc, report.nmi, report.ari)?;
    }
    if let Some(split) = &split {
        let x_test_raw = ds.rows(&split.test_idx);
        let x_test = match &checkpoint.standardizer {
            Some(st) => st.apply(&x_test_raw)?,
            None => x_test_raw,
        };
        let pred = predict(&model, &net, &x_test)?;
        let pred_path = args.out_dir.join("predictions.csv");
        save_labels_csv(&pred, &pred_path)?;
        timer.output(&pred_path);
        if let Some(all_labels) = &ds.labels {
            let y_test: Vec<usize> = split.test_idx.iter().map(|&i| all_labels[i]).collect();
            let report = metric_report(&pred, &y_test)?;
            let path = args.out_dir.join("test-metrics.json");
            report.save_json(&path)?;
            timer.output(&path);
            writeln!(out, "test  ACC {:.4}, NMI {:.4}, ARI {:.4}", report.acc, report.nmi, report.ari)?;
        }
    }
    timer.finish(&args.out_dir)?;
    Ok(0)
}
