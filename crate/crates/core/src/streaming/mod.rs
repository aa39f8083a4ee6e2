//! The propagation step.
//!
//! Three strategies move data along x and produce bit-identical results:
//!
//! * [`StrategyKind::Direct`]: each destination reads its displaced source
//!   straight from the field (the misaligned access is simply taken).
//! * [`StrategyKind::TileBuffered`]: a line is cut into tiles that are
//!   staged in a scratch buffer with one halo cell per side and shifted
//!   there, so the field itself is only read and written aligned.
//! * [`StrategyKind::LaneRotate`]: a line is cut into fixed-width groups
//!   that are rotated in registers by one lane; the lane that falls off is
//!   carried into the neighbouring group.
//!
//! The y and z components of a velocity only change which line is paired
//! with which, so they never enter the tile or lane machinery.

mod line;

pub(crate) use line::{gather_line, scatter_line, LineSrc, SharedBuf, SharedLine, Strided, StridedMut};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::lattice::{rows_mut, DomainDims, Layout, RowMut, Q, VELOCITIES};

/// Default group size of [`StrategyKind::LaneRotate`], one warp.
pub const DEFAULT_LANE_WIDTH: usize = 32;
/// Upper bound of the default tile width.
pub const MAX_DEFAULT_TILE_WIDTH: usize = 256;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StrategyKind {
    Direct,
    TileBuffered,
    LaneRotate,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [StrategyKind::Direct, StrategyKind::TileBuffered, StrategyKind::LaneRotate];
}

impl std::str::FromStr for StrategyKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "direct" => Ok(StrategyKind::Direct),
            "tile" | "tilebuffered" | "tile-buffered" => Ok(StrategyKind::TileBuffered),
            "lane" | "lanerotate" | "lane-rotate" => Ok(StrategyKind::LaneRotate),
            _ => Err(ConfigError::UnknownValue { key: "strategy", value: s.to_owned() }),
        }
    }
}

impl std::fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            StrategyKind::Direct => "direct",
            StrategyKind::TileBuffered => "tile",
            StrategyKind::LaneRotate => "lane",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct StreamStrategy {
    pub kind: StrategyKind,
    /// Cells per scratch tile (TileBuffered).
    pub tile_width: usize,
    /// Cells per rotation group (LaneRotate).
    pub lane_width: usize,
}

impl StreamStrategy {
    /// `kind` with default widths for a line of `nx` cells.
    pub fn new(kind: StrategyKind, nx: usize) -> Self {
        Self { kind, tile_width: nx.clamp(1, MAX_DEFAULT_TILE_WIDTH), lane_width: DEFAULT_LANE_WIDTH }
    }

    pub fn direct() -> Self {
        Self { kind: StrategyKind::Direct, tile_width: 1, lane_width: DEFAULT_LANE_WIDTH }
    }

    pub fn tile(width: usize) -> Self {
        Self { kind: StrategyKind::TileBuffered, tile_width: width, lane_width: DEFAULT_LANE_WIDTH }
    }

    pub fn lane(width: usize) -> Self {
        Self { kind: StrategyKind::LaneRotate, tile_width: 1, lane_width: width }
    }

    pub fn validate(&self, dims: DomainDims) -> Result<(), ConfigError> {
        if self.tile_width == 0 || self.lane_width == 0 {
            return Err(ConfigError::Invalid("tile and lane widths must be positive".into()));
        }
        if self.kind == StrategyKind::TileBuffered && self.tile_width > dims.nx {
            return Err(ConfigError::Invalid(format!(
                "tile width {} exceeds the x extent {}",
                self.tile_width, dims.nx
            )));
        }
        Ok(())
    }
}

impl Default for StreamStrategy {
    fn default() -> Self {
        Self::direct()
    }
}

impl std::fmt::Display for StreamStrategy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.kind {
            StrategyKind::Direct => write!(f, "direct"),
            StrategyKind::TileBuffered => write!(f, "tile{}", self.tile_width),
            StrategyKind::LaneRotate => write!(f, "lane{}", self.lane_width),
        }
    }
}

/// Treatment of streaming sources that fall outside the domain.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    /// Wrap around on every axis.
    Periodic,
    /// Leave the slot for the boundary kernel.
    #[default]
    Bounded,
}

impl Boundary {
    #[inline]
    pub fn wraps(self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

/// Shifts a staged tile by `dx` cells in place: `s'[j] = s[j - dx]`.
///
/// `scratch` holds the tile plus one halo cell on each side. The slot that
/// has no predecessor keeps its old value.
pub fn tile_shift<T: Copy>(scratch: &mut [T], dx: i8) {
    match dx {
        0 => {}
        1 => scratch.copy_within(..scratch.len() - 1, 1),
        -1 => scratch.copy_within(1.., 0),
        _ => panic!("tile displacement must be -1, 0 or 1, got {dx}"),
    }
}

/// Rotates one lane group by `dx` in place.
///
/// The lane pushed off the end is returned as the carry for the next group;
/// `carry_in` fills the vacated lane when present. A zero shift leaves the
/// group untouched and returns no carry.
pub fn lane_rotate_shift<T: Copy>(group: &mut [T], dx: i8, carry_in: Option<T>) -> Option<T> {
    let n = group.len();
    if n == 0 || dx == 0 {
        return None;
    }
    match dx {
        1 => {
            let out = group[n - 1];
            group.rotate_right(1);
            if let Some(c) = carry_in {
                group[0] = c;
            }
            Some(out)
        }
        -1 => {
            let out = group[0];
            group.rotate_left(1);
            if let Some(c) = carry_in {
                group[n - 1] = c;
            }
            Some(out)
        }
        _ => panic!("lane displacement must be -1, 0 or 1, got {dx}"),
    }
}

/// Row index of `(y, z)` displaced by `(dy, dz)`, or `None` when it leaves
/// a bounded domain.
#[inline]
pub(crate) fn shifted_row(dims: DomainDims, y: usize, z: usize, dy: isize, dz: isize, wrap: bool) -> Option<usize> {
    let (ny, nz) = (dims.ny as isize, dims.nz as isize);
    let (mut sy, mut sz) = (y as isize + dy, z as isize + dz);
    if wrap {
        sy = sy.rem_euclid(ny);
        sz = sz.rem_euclid(nz);
    } else if sy < 0 || sy >= ny || sz < 0 || sz >= nz {
        return None;
    }
    Some(sz as usize * dims.ny + sy as usize)
}

/// Pull streaming: `dst f_i(x) = src f_i(x - e_i)`.
///
/// Slots whose source lies outside a bounded domain are not written.
pub fn stream_pull<T: Copy + Send + Sync>(
    src: &[T],
    dst: &mut [T],
    dims: DomainDims,
    layout: Layout,
    strategy: &StreamStrategy,
    boundary: Boundary,
) {
    assert_eq!(src.len(), dims.field_len());
    assert_eq!(dst.len(), dims.field_len());
    let wrap = boundary.wraps();
    rows_mut(dst, dims, layout)
        .into_par_iter()
        .enumerate()
        .for_each_init(Vec::new, |scratch, (r, mut row)| {
            let (y, z) = (r % dims.ny, r / dims.ny);
            for (i, e) in VELOCITIES.iter().enumerate() {
                let Some(srow) = shifted_row(dims, y, z, -(e[1] as isize), -(e[2] as isize), wrap) else {
                    continue;
                };
                gather_into_row(src, &mut row, dims, layout, srow, i, e[0], wrap, strategy, scratch);
            }
        });
}

/// Gathers direction `i` of source row `srow` into the destination row view.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn gather_into_row<T: Copy>(
    src: &[T],
    row: &mut RowMut<'_, T>,
    dims: DomainDims,
    layout: Layout,
    srow: usize,
    i: usize,
    dx: i8,
    wrap: bool,
    strategy: &StreamStrategy,
    scratch: &mut Vec<T>,
) {
    let nx = dims.nx;
    match (layout, row) {
        (Layout::SoA, RowMut::SoA(lines)) => {
            let start = i * dims.cells() + srow * nx;
            let s: &[T] = &src[start..start + nx];
            let mut d: &mut [T] = &mut lines[i][..];
            gather_line(strategy, &s, &mut d, nx, dx, wrap, scratch);
        }
        (Layout::AoS, RowMut::AoS(cells)) => {
            let s = Strided { data: src, base: srow * Q * nx + i, stride: Q };
            let mut d = StridedMut { data: &mut cells[..], base: i, stride: Q };
            gather_line(strategy, &s, &mut d, nx, dx, wrap, scratch);
        }
        _ => unreachable!("row view does not match layout"),
    }
}

/// Push streaming: `dst f_i(x + e_i) = src f_i(x)`.
///
/// Populations leaving a bounded domain are dropped; the slots they would
/// have come from are left for the boundary kernel.
pub fn stream_push<T: Copy + Send + Sync>(
    src: &[T],
    dst: &mut [T],
    dims: DomainDims,
    layout: Layout,
    strategy: &StreamStrategy,
    boundary: Boundary,
) {
    assert_eq!(src.len(), dims.field_len());
    assert_eq!(dst.len(), dims.field_len());
    let wrap = boundary.wraps();
    let shared = SharedBuf::new(dst);
    (0..dims.rows()).into_par_iter().for_each_init(Vec::new, |scratch, r| {
        let (y, z) = (r % dims.ny, r / dims.ny);
        for i in 0..Q {
            match layout {
                Layout::SoA => {
                    let start = i * dims.cells() + r * dims.nx;
                    let s: &[T] = &src[start..start + dims.nx];
                    scatter_from_row(&s, &shared, dims, layout, y, z, i, wrap, strategy, scratch);
                }
                Layout::AoS => {
                    let s = Strided { data: src, base: r * Q * dims.nx + i, stride: Q };
                    scatter_from_row(&s, &shared, dims, layout, y, z, i, wrap, strategy, scratch);
                }
            }
        }
    });
}

/// Scatters direction `i` of the line `src` (source row `(y, z)`) into the
/// shared destination buffer.
#[allow(clippy::too_many_arguments)]
#[inline]
pub(crate) fn scatter_from_row<T: Copy, S: LineSrc<T>>(
    src: &S,
    dst: &SharedBuf<T>,
    dims: DomainDims,
    layout: Layout,
    y: usize,
    z: usize,
    i: usize,
    wrap: bool,
    strategy: &StreamStrategy,
    scratch: &mut Vec<T>,
) {
    let e = VELOCITIES[i];
    let Some(drow) = shifted_row(dims, y, z, e[1] as isize, e[2] as isize, wrap) else {
        return;
    };
    let (base, stride) = match layout {
        Layout::SoA => (i * dims.cells() + drow * dims.nx, 1),
        Layout::AoS => (drow * Q * dims.nx + i, Q),
    };
    let mut d = SharedLine { buf: dst, base, stride };
    scatter_line(strategy, src, &mut d, dims.nx, e[0], wrap, scratch);
}
