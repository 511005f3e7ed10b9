use std::fs;
use std::process::ExitCode;

use anyhow::{Context, Result};
use dcap::numerics::BackwardFault;
use dcap::verify::{run_suite, SuiteOptions};

use crate::VerifyArgs;

pub fn run(args: &VerifyArgs) -> Result<ExitCode> {
    let options = SuiteOptions {
        seed: args.seed,
        reference_instances: args.reference_instances,
        fault: args.inject_fault.then_some(BackwardFault::FlipMulSign),
    };
    let report = run_suite(&options);
    let checks = report.tsv();
    print!("{checks}");
    let homogeneity = report.homogeneity.tsv();
    println!();
    print!("{homogeneity}");
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        fs::write(dir.join("checks.tsv"), &checks)?;
        fs::write(dir.join("homogeneity.tsv"), &homogeneity)?;
    }
    if report.passed() {
        println!("all checks passed");
        Ok(ExitCode::SUCCESS)
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        eprintln!("failed: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}
