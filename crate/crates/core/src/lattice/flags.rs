use serde::{Deserialize, Serialize};

use super::{DomainDims, Q, VELOCITIES};
use crate::error::ConfigError;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CellFlag {
    #[default]
    Fluid,
    /// Stationary no-slip wall node.
    SolidWall,
    /// Wall node with a prescribed tangential velocity.
    MovingWall,
}

impl CellFlag {
    #[inline]
    pub fn is_wall(self) -> bool {
        !matches!(self, CellFlag::Fluid)
    }
}

/// Per-node flags plus the wall velocity of every moving-wall node.
#[derive(Clone, Debug, PartialEq)]
pub struct CellClassification<T> {
    dims: DomainDims,
    flags: Vec<CellFlag>,
    wall_velocity: Vec<[T; 3]>,
}

impl<T: Real> CellClassification<T> {
    pub fn all_fluid(dims: DomainDims) -> Self {
        Self {
            dims,
            flags: vec![CellFlag::Fluid; dims.cells()],
            wall_velocity: vec![[T::zero(); 3]; dims.cells()],
        }
    }

    /// Closed box: no-slip on five faces, the `z = nz-1` face moving with
    /// `lid`. Lid nodes that also lie on a side face are stationary.
    pub fn cavity(dims: DomainDims, lid: [T; 3]) -> Self {
        let mut c = Self::all_fluid(dims);
        let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let side = x == 0 || x == nx - 1 || y == 0 || y == ny - 1;
                    if z == nz - 1 && !side {
                        c.set_moving_wall(x, y, z, lid);
                    } else if side || z == 0 || z == nz - 1 {
                        c.set(x, y, z, CellFlag::SolidWall);
                    }
                }
            }
        }
        c
    }

    #[inline]
    pub fn dims(&self) -> DomainDims {
        self.dims
    }

    #[inline]
    pub fn flag(&self, x: usize, y: usize, z: usize) -> CellFlag {
        self.flags[self.dims.cell_index(x, y, z)]
    }

    #[inline]
    pub fn flag_at(&self, cell: usize) -> CellFlag {
        self.flags[cell]
    }

    #[inline]
    pub fn wall_velocity_at(&self, cell: usize) -> [T; 3] {
        self.wall_velocity[cell]
    }

    pub fn set(&mut self, x: usize, y: usize, z: usize, flag: CellFlag) {
        let c = self.dims.cell_index(x, y, z);
        self.flags[c] = flag;
        self.wall_velocity[c] = [T::zero(); 3];
    }

    pub fn set_moving_wall(&mut self, x: usize, y: usize, z: usize, velocity: [T; 3]) {
        let c = self.dims.cell_index(x, y, z);
        self.flags[c] = CellFlag::MovingWall;
        self.wall_velocity[c] = velocity;
    }

    pub fn count(&self, flag: CellFlag) -> usize {
        self.flags.iter().filter(|&&f| f == flag).count()
    }

    /// Checks the wall-speed bound and, for bounded domains, that every
    /// node on the domain surface carries a wall flag.
    pub fn validate(&self, periodic: bool) -> Result<(), ConfigError> {
        let cs = (1.0f64 / 3.0).sqrt();
        for (c, u) in self.wall_velocity.iter().enumerate() {
            let speed = u.iter().map(|v| v.to_f64_lossy().powi(2)).sum::<f64>().sqrt();
            if self.flags[c] == CellFlag::MovingWall && !(speed < cs) {
                return Err(ConfigError::WallTooFast { speed });
            }
        }
        if !periodic {
            let d = self.dims;
            for z in 0..d.nz {
                for y in 0..d.ny {
                    for x in 0..d.nx {
                        if self.flag(x, y, z) == CellFlag::Fluid && unknown_mask(d, x, y, z) != 0 {
                            return Err(ConfigError::OpenBoundary { x, y, z });
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// Bit `i` is set when the pull source `x - e_i` of direction `i` lies
/// outside a bounded domain.
#[inline]
pub fn unknown_mask(dims: DomainDims, x: usize, y: usize, z: usize) -> u32 {
    let on_edge = x == 0 || y == 0 || z == 0 || x + 1 == dims.nx || y + 1 == dims.ny || z + 1 == dims.nz;
    if !on_edge {
        return 0;
    }
    let mut mask = 0;
    for (i, e) in VELOCITIES.iter().enumerate().take(Q) {
        let (sx, sy, sz) = (x as isize - e[0] as isize, y as isize - e[1] as isize, z as isize - e[2] as isize);
        if !dims.contains(sx, sy, sz) {
            mask |= 1 << i;
        }
    }
    mask
}
