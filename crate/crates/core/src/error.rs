use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point {coords:?} lies outside the chart domain")]
    Domain { coords: Vec<f64> },

    #[error("boundary identification failed: {0}")]
    Identification(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("start vector is not unit: |g(v,v) - 1| = {0:e}")]
    NonUnit(f64),

    #[error("step size underflow at elapsed time {elapsed}")]
    StepUnderflow { elapsed: f64 },

    #[error("shooting did not converge after {attempts} starts (best residual {residual:e})")]
    NoConnection { attempts: usize, residual: f64 },

    #[error("variation is not differentiable here: {0}")]
    NotDifferentiable(String),

    #[error("near-grazing entry refused: |sin phi| = {0} exceeds the cap")]
    NearGrazing(f64),

    #[error("profile drops below the Clairaut constant (turning point)")]
    TurningPoint,

    #[error("sampling mismatch: {0}")]
    SamplingMismatch(String),

    #[error("defining vector has a vertical or trapped exterior line: {0}")]
    VerticalLine(String),

    #[error("config line {line}: {msg}")]
    Config { line: usize, msg: String },

    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}
