use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::lattice::{DomainDims, Layout};
use crate::streaming::{StrategyKind, StreamStrategy};

/// Lid speed used when neither it nor tau is given.
pub const DEFAULT_LID_SPEED: f64 = 0.1;
/// Relative velocity change per check interval below which a cavity run is
/// treated as steady.
pub const DEFAULT_STEADY_TOLERANCE: f64 = 1e-8;

const SOUND_SPEED: f64 = 0.577_350_269_189_625_8;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Ordering {
    Conventional,
    Push,
    #[default]
    Pull,
}

impl Ordering {
    pub const ALL: [Ordering; 3] = [Ordering::Conventional, Ordering::Push, Ordering::Pull];
}

impl std::str::FromStr for Ordering {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "conventional" | "conv" => Ok(Ordering::Conventional),
            "push" => Ok(Ordering::Push),
            "pull" => Ok(Ordering::Pull),
            _ => Err(ConfigError::UnknownValue { key: "ordering", value: s.to_owned() }),
        }
    }
}

impl std::fmt::Display for Ordering {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Ordering::Conventional => "conventional",
            Ordering::Push => "push",
            Ordering::Pull => "pull",
        })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Precision {
    Single,
    #[default]
    Double,
}

impl Precision {
    pub fn scalar_bytes(self) -> usize {
        match self {
            Precision::Single => 4,
            Precision::Double => 8,
        }
    }
}

impl std::str::FromStr for Precision {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "single" | "f32" => Ok(Precision::Single),
            "double" | "f64" => Ok(Precision::Double),
            _ => Err(ConfigError::UnknownValue { key: "precision", value: s.to_owned() }),
        }
    }
}

impl std::fmt::Display for Precision {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Precision::Single => "single",
            Precision::Double => "double",
        })
    }
}

/// The known side of the Reynolds scaling relation.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ScalingInput {
    Tau(f64),
    LidSpeed(f64),
}

/// Solves `u = (tau - 0.5) Re / (3 L)` for whichever of tau and the lid
/// speed is not given.
pub fn derive_scaling(reynolds: f64, length: usize, known: ScalingInput) -> Result<f64, ConfigError> {
    if !(reynolds > 0.0) || !reynolds.is_finite() {
        return Err(ConfigError::Scaling { what: "Re", value: reynolds, bound: "Re > 0" });
    }
    if length < 2 {
        return Err(ConfigError::DomainTooSmall(length));
    }
    let l = length as f64;
    let (tau, u) = match known {
        ScalingInput::LidSpeed(u) => (3.0 * l * u / reynolds + 0.5, u),
        ScalingInput::Tau(tau) => (tau, (tau - 0.5) * reynolds / (3.0 * l)),
    };
    if !(tau > 0.5) {
        return Err(ConfigError::Scaling { what: "tau", value: tau, bound: "tau > 0.5" });
    }
    if !(u.abs() < SOUND_SPEED) {
        return Err(ConfigError::Scaling { what: "u", value: u, bound: "|u| < 1/sqrt(3)" });
    }
    Ok(match known {
        ScalingInput::LidSpeed(_) => tau,
        ScalingInput::Tau(_) => u,
    })
}

/// Everything needed to set up and run one cavity simulation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub dims: DomainDims,
    pub reynolds: f64,
    /// Lid speed in lattice units; derived from tau when absent.
    pub lid_speed: Option<f64>,
    /// Relaxation time; derived from the lid speed when absent.
    pub tau: Option<f64>,
    pub ordering: Ordering,
    pub strategy: StreamStrategy,
    pub layout: Layout,
    /// Step cap.
    pub iterations: usize,
    pub precision: Precision,
    pub store_macros: bool,
    /// Fill the destination buffer with NaN before each step and fail if any
    /// slot survives.
    pub poison_check: bool,
    /// `None` always runs the full step cap.
    pub steady_tolerance: Option<f64>,
}

impl SimConfig {
    /// Re = 100 cavity of edge `n` with the default lid speed.
    pub fn cavity(n: usize) -> Result<Self, ConfigError> {
        let dims = DomainDims::cube(n)?;
        Ok(Self {
            dims,
            reynolds: 100.0,
            lid_speed: None,
            tau: None,
            ordering: Ordering::default(),
            strategy: StreamStrategy::new(StrategyKind::Direct, n),
            layout: Layout::default(),
            iterations: 1000,
            precision: Precision::default(),
            store_macros: false,
            poison_check: false,
            steady_tolerance: Some(DEFAULT_STEADY_TOLERANCE),
        })
    }

    /// `(tau, lid_speed)`. When both are given they are used as is and the
    /// Reynolds number is implied by them; see [`SimConfig::effective_reynolds`].
    pub fn resolve(&self) -> Result<(f64, f64), ConfigError> {
        if self.iterations == 0 {
            return Err(ConfigError::Invalid("iterations must be positive".into()));
        }
        let l = self.dims.nx;
        match (self.tau, self.lid_speed) {
            (Some(tau), Some(u)) => {
                if !(tau > 0.5) {
                    return Err(ConfigError::TauTooSmall(tau));
                }
                if !(u.abs() < SOUND_SPEED) {
                    return Err(ConfigError::WallTooFast { speed: u });
                }
                Ok((tau, u))
            }
            (Some(tau), None) => {
                if !(tau > 0.5) {
                    return Err(ConfigError::TauTooSmall(tau));
                }
                Ok((tau, derive_scaling(self.reynolds, l, ScalingInput::Tau(tau))?))
            }
            (None, u) => {
                let u = u.unwrap_or(DEFAULT_LID_SPEED);
                Ok((derive_scaling(self.reynolds, l, ScalingInput::LidSpeed(u))?, u))
            }
        }
    }

    /// Reynolds number implied by the resolved tau and lid speed.
    pub fn effective_reynolds(&self) -> Result<f64, ConfigError> {
        let (tau, u) = self.resolve()?;
        Ok(3.0 * self.dims.nx as f64 * u / (tau - 0.5))
    }
}
