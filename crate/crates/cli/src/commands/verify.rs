use clap::Args;
use spherecc::error::Result;
use spherecc::theory::run_all_with_fault;

#[derive(Args)]
pub struct VerifyArgs {
    #[arg(long)]
    seed: Option<u64>,
    /// Emit the results as JSON instead of one line per check
    #[arg(long)]
    json: bool,
    /// Force the named check to fail (for exercising the failure path)
    #[arg(long, hide = true)]
    inject_fault: Option<String>,
}

pub fn run(args: VerifyArgs) -> Result<i32> {
    use std::io::Write;
    let seed = args.seed.unwrap_or(0);
    let results = run_all_with_fault(seed, args.inject_fault.as_deref())?;
    let all_passed = results.iter().all(|r| r.passed);
    let mut out = std::io::stdout();
    if args.json {
        writeln!(out, "{}", serde_json::to_string_pretty(&results)?)?;
    } else {
        for r in &results {
            if r.passed {
                writeln!(out, "{}: PASS", r.name)?;
            } else {
                writeln!(out, "{}: FAIL ({})", r.name, r.detail)?;
            }
        }
    }
    Ok(if all_passed { 0 } else { 1 })
}
