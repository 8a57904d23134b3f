use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unbalanced panel: no cell for group {group} at period {period}")]
    UnbalancedPanel { group: String, period: i64 },

    #[error("duplicate cell for group {group} at period {period}")]
    DuplicateCell { group: String, period: i64 },

    #[error("treatment {treatment} is not binary (value {value} for group {group} at period {period})")]
    NonBinaryTreatment {
        treatment: String,
        group: String,
        period: i64,
        value: f64,
    },

    #[error("cell size must be positive (n = {n} for group {group} at period {period})")]
    NonPositiveWeight { group: String, period: i64, n: f64 },

    #[error("insufficient variation: need at least 2 groups and 2 periods, got {groups} groups and {periods} periods")]
    InsufficientVariation { groups: usize, periods: usize },

    #[error("non-sharp design: micro rows of group {group} at period {period} disagree on treatment {treatment}")]
    NonSharpDesign {
        group: String,
        period: i64,
        treatment: usize,
    },

    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("empty input: no rows")]
    EmptyInput,

    #[error("csv error: {0}")]
    Csv(String),

    #[error("io error: {0}")]
    Io(String),

    #[error("treatment index {index} out of range (K = {k})")]
    TreatmentOutOfRange { index: usize, k: usize },

    #[error("collinear regressors: design has rank {rank} but {columns} columns are required")]
    CollinearTreatments { rank: usize, columns: usize },

    #[error("degenerate denominator: sum of n * residual * treatment is {value:e}")]
    DegenerateDenominator { value: f64 },

    #[error("treatment {treatment} is not staggered: group {group} switches off at period {period}")]
    NotStaggered {
        treatment: usize,
        group: String,
        period: i64,
    },

    #[error("group {group} adopts the second treatment before the first")]
    WrongOrder { group: String },

    #[error("pathological design: no first-treatment cohort has two groups adopting the second treatment at different dates")]
    PathologicalDesign,

    #[error("horizon {ell} out of range (maximum {max})")]
    HorizonOutOfRange { ell: usize, max: usize },

    #[error("insufficient pre-periods for horizon {ell}; feasible horizons: {feasible:?}")]
    InsufficientPrePeriods { ell: usize, feasible: Vec<usize> },

    #[error("no control groups available for any comparison")]
    NoControls,

    #[error("no group adopts the treatment inside the panel window")]
    NoAdopters,

    #[error("invalid simulation spec: {0}")]
    InvalidSpec(String),

    #[error("synthetic panel carries no {0} potential outcomes")]
    MissingPotentialOutcomes(&'static str),

    #[error("all {replications} bootstrap replications were degenerate")]
    AllReplicationsDegenerate { replications: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
