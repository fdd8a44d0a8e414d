use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("transition graph is not strongly connected ({reached} of {total} vertices reachable)")]
    NotConnected { reached: usize, total: usize },

    #[error("eigen-solve did not converge after {iterations} iterations (residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("pressure root not bracketed in [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("Newton iteration did not converge: {trace}")]
    Newton { trace: String },

    #[error(
        "orbit budget of {budget} exceeded; word lengths up to {completed_word_length} are complete ({found} orbits so far)"
    )]
    BudgetExceeded {
        budget: usize,
        completed_word_length: usize,
        found: usize,
    },

    #[error("system is not homologically full: {0}")]
    NotHomologicallyFull(String),

    #[error("curves too close for stable evaluation: distance {distance:e} below floor {floor:e}")]
    TooClose { distance: f64, floor: f64 },

    #[error("degenerate projection persisted after {attempts} directions")]
    DegenerateProjection { attempts: usize },

    #[error("self-intersection while realising word {word}: {detail}")]
    SelfIntersection { word: String, detail: String },

    #[error("coincident points in kernel evaluation")]
    Coincident,

    #[error("field is not Beltrami: max |curl X - X| = {residual:e}")]
    NotBeltrami { residual: f64 },

    #[error("missing linking entry for pair ({0}, {1})")]
    MissingPair(usize, usize),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),
}
