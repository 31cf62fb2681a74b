use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("infeasible geometry: {0}")]
    InfeasibleGeometry(String),

    #[error("degenerate block density in cluster {cluster}")]
    DegenerateDensity { cluster: usize },

    #[error("model domain violation: {0}")]
    ModelDomain(String),

    #[error("quadrature did not converge (relative change {achieved:.3e} after max refinement)")]
    QuadratureDiverged { achieved: f64 },

    #[error("turning-spread integral non-positive (d_theta = {d_theta:.6e}); check sign configuration")]
    SignConfiguration { d_theta: f64 },

    #[error("degenerate scenario: {0}")]
    DegenerateScenario(String),

    #[error("integration unstable at t = {t:.3}: component {component} = {value:.6e}")]
    Instability {
        component: String,
        value: f64,
        t: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unidentifiable fit: {0}")]
    Unidentifiable(String),

    #[error("insufficient horizon: no avoidance episodes observed")]
    InsufficientHorizon,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("scenario file parse error: {0}")]
    Parse(String),
}
