use std::path::PathBuf;

use clap::Args;
use spherecc::clustering::load_assignments_csv;
use spherecc::error::Result;
use spherecc::eval::metric_report;

#[derive(Args)]
pub struct EvalArgs {
    /// Predicted labeling ("index,cluster" CSV)
    #[arg(long)]
    pred: PathBuf,
    /// Reference labeling, same format
    #[arg(long)]
    truth: PathBuf,
    /// Also write the report to this JSON file
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn run(args: EvalArgs) -> Result<i32> {
    use std::io::Write;
    let pred = load_assignments_csv(&args.pred)?;
    let truth = load_assignments_csv(&args.truth)?;
    let report = metric_report(&pred, &truth)?;
    writeln!(std::io::stdout(), "{}", serde_json::to_string_pretty(&report)?)?;
    if let Some(path) = &args.out {
        report.save_json(path)?;
    }
    Ok(0)
}
