use twowayfe::Error;

/// Exit status for each library error. Listed verbatim in `--help`.
pub fn code(err: &Error) -> u8 {
    match err {
        Error::Io(_) => 10,
        Error::Csv(_) => 11,
        Error::MalformedRow { .. } => 12,
        Error::MissingColumn(_) => 13,
        Error::EmptyInput => 14,
        Error::UnbalancedPanel { .. } => 15,
        Error::DuplicateCell { .. } => 16,
        Error::NonPositiveWeight { .. } => 17,
        Error::InsufficientVariation { .. } => 18,
        Error::NonSharpDesign { .. } => 19,
        Error::NonBinaryTreatment { .. } => 20,
        Error::TreatmentOutOfRange { .. } => 21,
        Error::CollinearTreatments { .. } => 22,
        Error::DegenerateDenominator { .. } => 23,
        Error::NotStaggered { .. } => 24,
        Error::WrongOrder { .. } => 25,
        Error::PathologicalDesign => 26,
        Error::HorizonOutOfRange { .. } => 27,
        Error::InsufficientPrePeriods { .. } => 28,
        Error::NoControls => 29,
        Error::NoAdopters => 30,
        Error::InvalidSpec(_) => 31,
        Error::MissingPotentialOutcomes(_) => 32,
        Error::AllReplicationsDegenerate { .. } => 33,
        Error::InvalidConfig(_) => 34,
    }
}

/// Stable machine-readable error name.
pub fn kind(err: &Error) -> &'static str {
    match err {
        Error::Io(_) => "io",
        Error::Csv(_) => "csv",
        Error::MalformedRow { .. } => "malformed_row",
        Error::MissingColumn(_) => "missing_column",
        Error::EmptyInput => "empty_input",
        Error::UnbalancedPanel { .. } => "unbalanced_panel",
        Error::DuplicateCell { .. } => "duplicate_cell",
        Error::NonPositiveWeight { .. } => "non_positive_weight",
        Error::InsufficientVariation { .. } => "insufficient_variation",
        Error::NonSharpDesign { .. } => "non_sharp_design",
        Error::NonBinaryTreatment { .. } => "non_binary_treatment",
        Error::TreatmentOutOfRange { .. } => "treatment_out_of_range",
        Error::CollinearTreatments { .. } => "collinear_treatments",
        Error::DegenerateDenominator { .. } => "degenerate_denominator",
        Error::NotStaggered { .. } => "not_staggered",
        Error::WrongOrder { .. } => "wrong_order",
        Error::PathologicalDesign => "pathological_design",
        Error::HorizonOutOfRange { .. } => "horizon_out_of_range",
        Error::InsufficientPrePeriods { .. } => "insufficient_pre_periods",
        Error::NoControls => "no_controls",
        Error::NoAdopters => "no_adopters",
        Error::InvalidSpec(_) => "invalid_spec",
        Error::MissingPotentialOutcomes(_) => "missing_potential_outcomes",
        Error::AllReplicationsDegenerate { .. } => "all_replications_degenerate",
        Error::InvalidConfig(_) => "invalid_config",
    }
}

pub const HELP: &str = "\
Exit codes:
   0  success (warnings never change the exit code)
   2  command-line usage error
  10  io                          11  csv
  12  malformed_row               13  missing_column
  14  empty_input                 15  unbalanced_panel
  16  duplicate_cell              17  non_positive_weight
  18  insufficient_variation      19  non_sharp_design
  20  non_binary_treatment        21  treatment_out_of_range
  22  collinear_treatments        23  degenerate_denominator
  24  not_staggered               25  wrong_order
  26  pathological_design         27  horizon_out_of_range
  28  insufficient_pre_periods    29  no_controls
  30  no_adopters                 31  invalid_spec
  32  missing_potential_outcomes  33  all_replications_degenerate
  34  invalid_config

Errors are printed to stderr as a JSON object {\"error\": {kind, message, exit_code}}.";
