use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("control for river {river} is {value} m3/s, outside [{min}, {max}]")]
    ConstraintViolation {
        river: String,
        value: f64,
        min: f64,
        max: f64,
    },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("degenerate fit for {pair}: {reason}")]
    DegenerateFit { pair: String, reason: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("explicit monthly scheme is unstable for lake {lake}: outflow gain {gain:.3} >= 2")]
    Unstable { lake: String, gain: f64 },

    /// The objective returned a non-finite score; `plan` is the offending point.
    #[error("optimization error: objective returned {score} for plan {plan:?}")]
    Optimization { score: f64, plan: Vec<f64> },

    #[error("config error: {0}")]
    Config(String),

    #[error("csv error at row {row}: {message}")]
    Csv { row: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for errors caused by bad user input (files, schemas, parameters)
    /// rather than by the model or optimizer.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Precondition(_)
                | Error::Data(_)
                | Error::DegenerateFit { .. }
                | Error::Config(_)
                | Error::Csv { .. }
                | Error::Io(_)
                | Error::Json(_)
        )
    }
}
