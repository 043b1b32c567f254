use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed or inconsistent user input.
    #[error("input error: {0}")]
    Input(String),

    #[error("recipe syntax error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("treatment is (numerically) in the span of the controls")]
    DegenerateTreatment,

    #[error("propensity residuals are degenerate (D_hat'D_hat = {0:e})")]
    DegeneratePropensity(f64),

    #[error("regime error: {cols} control columns (rank {rank}) with only {rows} observations; p < n is required")]
    Regime { rows: usize, cols: usize, rank: usize },

    #[error("selection overflow: {selected} selected columns with n = {rows}")]
    SelectionOverflow { selected: usize, rows: usize },

    #[error("residual sum of squares {rss_lasso} is below the full OLS residual sum of squares {rss_ols}")]
    LowerBoundViolated { rss_lasso: f64, rss_ols: f64 },

    #[error("OLS estimate moved by {range:e} across normalizations (median {median:e})")]
    InvarianceViolated { range: f64, median: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    /// Input-type errors map to exit code 1, numerical failures to 2.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Input(_) | Error::Parse { .. } | Error::Io(_) | Error::Csv(_) | Error::Regime { .. }
        )
    }
}
