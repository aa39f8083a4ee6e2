//! Lattice model constants, storage and cell classification.

mod descriptor;
mod field;
mod flags;

pub use descriptor::{make_d3q19, LatticeDescriptor, OPPOSITE, Q, VELOCITIES};
pub use field::DistributionField;
pub(crate) use field::{rows_mut, RowMut};
pub use flags::{unknown_mask, CellClassification, CellFlag};

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

/// Lattice nodes per axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DomainDims {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
}

impl DomainDims {
    pub fn new(nx: usize, ny: usize, nz: usize) -> Result<Self, ConfigError> {
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(ConfigError::EmptyDomain { nx, ny, nz });
        }
        Ok(Self { nx, ny, nz })
    }

    pub fn cube(n: usize) -> Result<Self, ConfigError> {
        Self::new(n, n, n)
    }

    /// Number of lattice nodes.
    #[inline]
    pub fn cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Number of x-lines, one per `(y, z)` pair.
    #[inline]
    pub fn rows(&self) -> usize {
        self.ny * self.nz
    }

    /// Linear node index `z*ny*nx + y*nx + x`.
    #[inline]
    pub fn cell_index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.ny + y) * self.nx + x
    }

    #[inline]
    pub fn contains(&self, x: isize, y: isize, z: isize) -> bool {
        x >= 0
            && y >= 0
            && z >= 0
            && (x as usize) < self.nx
            && (y as usize) < self.ny
            && (z as usize) < self.nz
    }

    /// Length of the flat distribution array for one time level.
    #[inline]
    pub fn field_len(&self) -> usize {
        Q * self.cells()
    }
}

impl std::fmt::Display for DomainDims {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}x{}x{}", self.nx, self.ny, self.nz)
    }
}

/// Memory layout of the distribution array.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layout {
    /// All nodes of one direction contiguous.
    #[default]
    SoA,
    /// All directions of one node contiguous.
    AoS,
}

impl std::str::FromStr for Layout {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "soa" => Ok(Layout::SoA),
            "aos" => Ok(Layout::AoS),
            _ => Err(ConfigError::UnknownValue { key: "layout", value: s.to_owned() }),
        }
    }
}

impl std::fmt::Display for Layout {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Layout::SoA => "soa",
            Layout::AoS => "aos",
        })
    }
}

/// Offset of `f_i(x, y, z)` in a flat array.
///
/// Panics when the direction or coordinates are out of range.
#[inline]
pub fn flatten_index(i: usize, x: usize, y: usize, z: usize, dims: DomainDims, layout: Layout) -> usize {
    assert!(
        i < Q && x < dims.nx && y < dims.ny && z < dims.nz,
        "index ({i}, {x}, {y}, {z}) outside {dims}"
    );
    let cell = dims.cell_index(x, y, z);
    match layout {
        Layout::SoA => i * dims.cells() + cell,
        Layout::AoS => Q * cell + i,
    }
}

/// Inverse of [`flatten_index`]: returns `(i, x, y, z)`.
pub fn unflatten_index(offset: usize, dims: DomainDims, layout: Layout) -> (usize, usize, usize, usize) {
    assert!(offset < dims.field_len(), "offset {offset} outside {dims}");
    let (i, cell) = match layout {
        Layout::SoA => (offset / dims.cells(), offset % dims.cells()),
        Layout::AoS => (offset % Q, offset / Q),
    };
    let x = cell % dims.nx;
    let y = (cell / dims.nx) % dims.ny;
    let z = cell / (dims.nx * dims.ny);
    (i, x, y, z)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn flatten_examples() {
        let d = DomainDims::cube(4).unwrap();
        assert_eq!(flatten_index(0, 0, 0, 0, d, Layout::SoA), 0);
        assert_eq!(flatten_index(0, 0, 0, 0, d, Layout::AoS), 0);
        assert_eq!(flatten_index(1, 0, 0, 0, d, Layout::SoA), 64);
        assert_eq!(flatten_index(1, 0, 0, 0, d, Layout::AoS), 1);
        let d = DomainDims::new(3, 5, 7).unwrap();
        assert_eq!(flatten_index(2, 1, 2, 3, d, Layout::SoA), 2 * 105 + 3 * 15 + 2 * 3 + 1);
        assert_eq!(flatten_index(2, 1, 2, 3, d, Layout::AoS), 19 * (3 * 15 + 2 * 3 + 1) + 2);
    }

    #[test]
    #[should_panic]
    fn flatten_rejects_direction_19() {
        flatten_index(19, 0, 0, 0, DomainDims::cube(2).unwrap(), Layout::SoA);
    }

    #[test]
    #[should_panic]
    fn flatten_rejects_coordinate_overflow() {
        flatten_index(0, 2, 0, 0, DomainDims::cube(2).unwrap(), Layout::AoS);
    }

    #[test]
    fn zero_extent_rejected() {
        assert!(DomainDims::new(4, 0, 4).is_err());
    }

    #[test]
    fn both_layouts_are_bijections() {
        let d = DomainDims::new(3, 2, 4).unwrap();
        for layout in [Layout::SoA, Layout::AoS] {
            let mut seen = vec![false; d.field_len()];
            for i in 0..Q {
                for z in 0..d.nz {
                    for y in 0..d.ny {
                        for x in 0..d.nx {
                            let o = flatten_index(i, x, y, z, d, layout);
                            assert!(!seen[o]);
                            seen[o] = true;
                        }
                    }
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    proptest! {
        #[test]
        fn unflatten_round_trip(
            nx in 1usize..9, ny in 1usize..9, nz in 1usize..9,
            i in 0usize..Q, fx in 0.0f64..1.0, fy in 0.0f64..1.0, fz in 0.0f64..1.0,
            aos in any::<bool>(),
        ) {
            let d = DomainDims::new(nx, ny, nz).unwrap();
            let (x, y, z) = ((fx * nx as f64) as usize, (fy * ny as f64) as usize, (fz * nz as f64) as usize);
            let layout = if aos { Layout::AoS } else { Layout::SoA };
            let o = flatten_index(i, x, y, z, d, layout);
            prop_assert_eq!(unflatten_index(o, d, layout), (i, x, y, z));
        }
    }
}
