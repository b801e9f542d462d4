use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use spherecc::constraints::{sample_balanced, sample_imbalanced};
use spherecc::data::{gen_gaussian_mixture, ClusterSizes};
use spherecc::error::{Error, Result};

use crate::config::{write_effective, FileConfig};
use crate::manifest::RunTimer;

use super::{ensure_dir, save_labels_csv, save_split};

#[derive(Args)]
pub struct GenArgs {
    /// Number of clusters
    #[arg(long)]
    k: usize,
    /// Input feature dimension
    #[arg(long)]
    dim: usize,
    /// Total number of points, spread evenly over clusters
    #[arg(long)]
    n: usize,
    /// Distance scale between cluster means
    #[arg(long)]
    separation: Option<f64>,
    /// Per-coordinate standard deviation within a cluster
    #[arg(long)]
    spread: Option<f64>,
    /// Held-out fraction; 0 disables the split
    #[arg(long)]
    test_fraction: Option<f64>,
    /// Number of balanced pairwise constraints over the training rows
    #[arg(long)]
    constraints: Option<usize>,
    /// Imbalanced constraint-group sizes m0,m1,m2 (strictly increasing)
    #[arg(long, value_delimiter = ',')]
    imb: Option<Vec<usize>>,
    /// Cluster receiving the extra cannot-link constraints
    #[arg(long, default_value_t = 0)]
    imb_cluster: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Serialize)]
struct EffectiveGen {
    command: &'static str,
    k: usize,
    dim: usize,
    n: usize,
    separation: f64,
    spread: f64,
    test_fraction: f64,
    constraints: usize,
    imb: Option<Vec<usize>>,
    imb_cluster: usize,
    seed: u64,
}

pub fn run(args: GenArgs) -> Result<i32> {
    let mut timer = RunTimer::start("gen");
    let file = FileConfig::load(args.config.as_deref())?;

    let eff = EffectiveGen {
        command: "gen",
        k: args.k,
        dim: args.dim,
        n: args.n,
        separation: args.separation.or(file.separation).unwrap_or(10.0),
        spread: args.spread.or(file.spread).unwrap_or(1.0),
        test_fraction: args.test_fraction.or(file.test_fraction).unwrap_or(0.2),
        constraints: args.constraints.or(file.constraints).unwrap_or(0),
        imb: args.imb.clone(),
        imb_cluster: args.imb_cluster,
        seed: args.seed.or(file.seed).unwrap_or(0),
    };
    if !(0.0..1.0).contains(&eff.test_fraction) {
        return Err(Error::InvalidParameter {
            what: format!("test fraction must be in [0, 1), got {}", eff.test_fraction),
        });
    }
    if let Some(imb) = &eff.imb {
        if imb.len() != 3 {
            return Err(Error::InvalidParameter {
                what: format!("--imb takes exactly three sizes m0,m1,m2, got {}", imb.len()),
            });
        }
    }

    ensure_dir(&args.out_dir)?;
    let sizes = ClusterSizes::Proportions {
        weights: vec![1.0 / eff.k as f64; eff.k],
        n_total: eff.n,
    };
    let mut ds = gen_gaussian_mixture(eff.k, &sizes, eff.dim, eff.separation, eff.spread, eff.seed)?;
    if eff.test_fraction > 0.0 {
        ds = ds.split(eff.test_fraction, eff.seed)?;
    }
    let labels = ds.labels.clone().expect("generated data is labeled");

    let data_path = args.out_dir.join("data.csv");
    ds.save_csv(&data_path)?;
    timer.output(&data_path);

    let labels_path = args.out_dir.join("labels.csv");
    save_labels_csv(&labels, &labels_path)?;
    timer.output(&labels_path);

    let train_labels: Vec<usize> = match &ds.split {
        Some(s) => {
            let split_path = args.out_dir.join("split.json");
            save_split(s, &split_path)?;
            timer.output(&split_path);
            s.train_idx.iter().map(|&i| labels[i]).collect()
        }
        None => labels.clone(),
    };

    if eff.constraints > 0 {
        let cs = sample_balanced(&train_labels, eff.constraints, eff.seed)?;
        let path = args.out_dir.join("constraints.csv");
        cs.save_csv(&path)?;
        timer.output(&path);
    }
    if let Some(imb) = &eff.imb {
        let group =
            sample_imbalanced(&train_labels, (imb[0], imb[1], imb[2]), eff.imb_cluster, eff.seed)?;
        group.save(&args.out_dir, "imb")?;
        for name in ["imb0.csv", "imb1.csv", "imb2.csv", "imb-manifest.json"] {
            timer.output(&args.out_dir.join(name));
        }
    }

    write_effective(&args.out_dir, &eff)?;
    timer.output(&args.out_dir.join("effective-config.toml"));
    timer.finish(&args.out_dir)?;
    use std::io::Write;
    writeln!(
        std::io::stdout(),
        "wrote {} points over {} clusters to {}",
        eff.n,
        eff.k,
        args.out_dir.display()
    )?;
    Ok(0)
}
