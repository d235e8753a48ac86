use thiserror::Error;

pub type SimResult<T> = Result<T, SimError>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("site and satellite are coincident at t = {t_s} s")]
    DegenerateGeometry { t_s: f64 },

    #[error("closed loop diverged at tick {tick}: |e| = {magnitude:e} exceeds {limit:e}")]
    Diverged { tick: usize, magnitude: f64, limit: f64 },

    #[error("invalid configuration: {0}")]
    Config(#[from] crate::config::ConfigErrors),

    #[error("no steady-state coverage: {0}")]
    NoSteadyState(String),

    #[error("missing input for {table}: {missing}")]
    MissingInput { table: &'static str, missing: String },

    #[error("station {station} has no pass of at least {needed_s} s above {min_elev_deg} deg")]
    NoPass {
        station: String,
        needed_s: f64,
        min_elev_deg: f64,
    },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
