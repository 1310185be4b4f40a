use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("support of width {width} along axis {axis} does not embed in a torus of side {side}")]
    Sizing { axis: usize, width: usize, side: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid density profile: {0}")]
    Profile(String),

    #[error("invalid rate spec: {0}")]
    RateSpec(String),

    #[error("no common critical density across directions (per-direction roots: {roots:?})")]
    NoCommonCriticalDensity { roots: Vec<Vec<f64>> },

    #[error(
        "negative effective jump rate {rate} on direction {direction}: the operator n^2[L^S + (a_n/n) L^T] \
         is not a Markov generator at n = {n}, a_n = {a_n}"
    )]
    NegativeRate { direction: usize, rate: f64, n: usize, a_n: f64 },

    #[error("time step {dt} violates the stability bound; use dt <= {suggested}")]
    Cfl { dt: f64, suggested: f64 },

    #[error("state space of {states} configurations exceeds the exact-oracle size gate of {limit}")]
    SizeGate { states: u128, limit: u128 },

    #[error("profile left (0,1) during integration at t = {t}")]
    ProfileEscaped { t: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl From<toml::de::Error> for Error {
    fn from(e: toml::de::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

impl From<toml::ser::Error> for Error {
    fn from(e: toml::ser::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
