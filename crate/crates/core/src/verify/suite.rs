use crate::crossnet::ProductKind;
use crate::error::Result;
use crate::numerics::BackwardFault;
use crate::verify::equivalence::reference_equivalence;
use crate::verify::gradcheck::{gradient_check, toy_batch, toy_config, toy_model};
use crate::verify::homogeneity::{homogeneity_check, HomogeneityReport, HomogeneitySetup};
use crate::verify::mult_adds::count_mult_adds;

pub const GRADIENT_TOLERANCE: f64 = 1e-5;
pub const HOMOGENEITY_TOLERANCE: f64 = 1e-8;
pub const SLOPE_TOLERANCE: f64 = 1e-6;
pub const EQUIVALENCE_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    /// Random instances per product kind for the reference comparison.
    pub reference_instances: usize,
    /// Corrupts the backward pass of the gradient check.
    pub fault: Option<BackwardFault>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        SuiteOptions {
            seed: 0,
            reference_instances: 100,
            fault: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuiteReport {
    pub checks: Vec<CheckResult>,
    pub homogeneity: HomogeneityReport,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn tsv(&self) -> String {
        let mut out = String::from("check\tstatus\tdetail\n");
        for c in &self.checks {
            let status = if c.passed { "pass" } else { "FAIL" };
            out.push_str(&format!("{}\t{status}\t{}\n", c.name, c.detail));
        }
        out
    }
}

/// Runs every check; a check that errors is recorded as failed and the
/// suite continues.
pub fn run_suite(options: &SuiteOptions) -> SuiteReport {
    let mut checks = Vec::new();
    let mut push = |name: &str, outcome: Result<(bool, String)>| {
        let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        checks.push(CheckResult {
            name: name.to_string(),
            passed,
            detail,
        });
    };

    push(
        "gradient",
        (|| {
            let batch = toy_batch(&toy_config(options.seed).vocab_sizes);
            let report = gradient_check(&toy_model(options.seed)?, &batch, options.fault)?;
            let worst = report
                .groups
                .iter()
                .max_by(|a, b| a.relative_error.total_cmp(&b.relative_error))
                .map(|g| g.name.clone())
                .unwrap_or_default();
            Ok((
                report.passes(GRADIENT_TOLERANCE),
                format!(
                    "groups={} max_rel_error={:.3e} worst={worst}",
                    report.groups.len(),
                    report.max_relative_error()
                ),
            ))
        })(),
    );

    let homogeneity = homogeneity_check(&HomogeneitySetup {
        seed: options.seed,
        ..HomogeneitySetup::default()
    });
    let (homogeneity, outcome) = match homogeneity {
        Ok(r) => (r, Ok(())),
        Err(e) => (HomogeneityReport::default(), Err(e)),
    };
    push(
        "homogeneity",
        outcome.map(|()| {
            let r = &homogeneity;
            (
                r.passes(HOMOGENEITY_TOLERANCE, SLOPE_TOLERANCE),
                format!(
                    "max_deviation={:.3e} max_slope_error={:.3e}",
                    r.max_deviation(),
                    r.max_slope_error()
                ),
            )
        }),
    );

    for kind in [ProductKind::Inner, ProductKind::Outer] {
        push(
            &format!("reference_{}", kind.as_str()),
            reference_equivalence(kind, options.reference_instances, 5, 4, options.seed).map(|r| {
                (
                    r.instances > 0 && r.max_abs_diff <= EQUIVALENCE_TOLERANCE,
                    format!("instances={} max_abs_diff={:.3e}", r.instances, r.max_abs_diff),
                )
            }),
        );
    }

    push(
        "mult_adds",
        count_mult_adds(5, 16, 4, 2, ProductKind::Inner).map(|r| {
            (
                r.closed_form == 12_640 && r.ratio() <= 2.0,
                format!("closed_form={} counted={}", r.closed_form, r.counted),
            )
        }),
    );

    SuiteReport {
        checks,
        homogeneity,
    }
}
