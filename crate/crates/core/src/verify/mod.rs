//! Executable checks of the model's mathematical claims: gradients against
//! finite differences, degree growth under frozen attention, agreement with
//! an independent scalar-loop layer, and Mult-Add bookkeeping.

mod equivalence;
mod finite_diff;
mod gradcheck;
mod homogeneity;
mod mult_adds;
mod reference;
mod suite;

pub use equivalence::{reference_equivalence, EquivalenceReport};
pub use finite_diff::{finite_diff_grad, max_relative_error, norm_relative_error, relative_error, MAX_COORDINATES, RELATIVE_FLOOR};
pub use gradcheck::{gradient_check, toy_batch, toy_config, toy_model, GradientReport, GroupCheck, GRADIENT_CHECK_STEP};
pub use homogeneity::{
    frozen_forward, homogeneity_check, HomogeneityReport, HomogeneityRow, HomogeneitySetup, SlopeFit,
};
pub use mult_adds::{closed_form_mult_adds, count_mult_adds, MultAddReport};
pub use reference::{naive_reference_layer, to_matrix, Matrix, ReferenceTrace, ReferenceWeights};
pub use suite::{
    run_suite, CheckResult, SuiteOptions, SuiteReport, EQUIVALENCE_TOLERANCE, GRADIENT_TOLERANCE,
    HOMOGENEITY_TOLERANCE, SLOPE_TOLERANCE,
};
