use thiserror::Error;

/// Invalid configuration, detected before any time step runs.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("domain extents must be positive, got {nx}x{ny}x{nz}")]
    EmptyDomain { nx: usize, ny: usize, nz: usize },
    #[error("walled domains need at least 2 nodes per axis, got {0}")]
    DomainTooSmall(usize),
    #[error("relaxation time tau = {0} must exceed 0.5")]
    TauTooSmall(f64),
    #[error("wall speed {speed} must stay below the lattice sound speed 1/sqrt(3)")]
    WallTooFast { speed: f64 },
    #[error("fluid node ({x}, {y}, {z}) has sources outside a bounded domain and no wall flag")]
    OpenBoundary { x: usize, y: usize, z: usize },
    #[error(
        "lattice scaling u = (tau - 0.5) Re / (3 L) gives {what} = {value}, outside its valid range ({bound})"
    )]
    Scaling { what: &'static str, value: f64, bound: &'static str },
    #[error("{0}")]
    Invalid(String),
    #[error("unknown value {value:?} for {key}")]
    UnknownValue { key: &'static str, value: String },
}
