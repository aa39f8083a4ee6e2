//! Views of a single x-line and the per-line shift kernels.
//!
//! Every kernel realises `dst[x] = src[x - dx]` for the in-domain (or
//! wrapped) positions of one line and leaves the remaining slot untouched.
//! Only the x-displacement ever reaches this level; y and z displacements
//! are resolved by choosing which lines to pair.

use super::{lane_rotate_shift, tile_shift, StrategyKind, StreamStrategy};

pub(crate) trait LineSrc<T: Copy> {
    fn at(&self, x: usize) -> T;
}

pub(crate) trait LineDst<T: Copy> {
    fn put(&mut self, x: usize, v: T);
}

impl<T: Copy> LineSrc<T> for &[T] {
    #[inline(always)]
    fn at(&self, x: usize) -> T {
        self[x]
    }
}

impl<T: Copy> LineDst<T> for &mut [T] {
    #[inline(always)]
    fn put(&mut self, x: usize, v: T) {
        self[x] = v;
    }
}

/// Line with a fixed stride into a larger buffer (AoS storage).
pub(crate) struct Strided<'a, T> {
    pub data: &'a [T],
    pub base: usize,
    pub stride: usize,
}

impl<T: Copy> LineSrc<T> for Strided<'_, T> {
    #[inline(always)]
    fn at(&self, x: usize) -> T {
        self.data[self.base + x * self.stride]
    }
}

pub(crate) struct StridedMut<'a, T> {
    pub data: &'a mut [T],
    pub base: usize,
    pub stride: usize,
}

impl<T: Copy> LineDst<T> for StridedMut<'_, T> {
    #[inline(always)]
    fn put(&mut self, x: usize, v: T) {
        self.data[self.base + x * self.stride] = v;
    }
}

/// Raw write access to a buffer shared by scatter workers.
///
/// Scatter streaming writes every destination slot at most once per step
/// (translation by `e_i` is injective, including the periodic wrap), so
/// concurrent writers never touch the same element. All writes go through
/// the raw pointer; no references into the buffer are created.
pub(crate) struct SharedBuf<T> {
    ptr: *mut T,
    len: usize,
}

unsafe impl<T: Send> Send for SharedBuf<T> {}
unsafe impl<T: Send> Sync for SharedBuf<T> {}

impl<T: Copy> SharedBuf<T> {
    pub fn new(buf: &mut [T]) -> Self {
        Self { ptr: buf.as_mut_ptr(), len: buf.len() }
    }

    #[inline(always)]
    pub fn write(&self, idx: usize, v: T) {
        assert!(idx < self.len);
        // SAFETY: in bounds, and the scatter discipline above guarantees no
        // two threads write the same index during one step.
        unsafe { self.ptr.add(idx).write(v) }
    }
}

pub(crate) struct SharedLine<'a, T> {
    pub buf: &'a SharedBuf<T>,
    pub base: usize,
    pub stride: usize,
}

impl<T: Copy> LineDst<T> for SharedLine<'_, T> {
    #[inline(always)]
    fn put(&mut self, x: usize, v: T) {
        self.buf.write(self.base + x * self.stride, v);
    }
}

/// Source position of `dst[x]`, if it exists.
#[inline(always)]
fn source(x: usize, dx: isize, nx: usize, wrap: bool) -> Option<usize> {
    let s = x as isize - dx;
    if s >= 0 && (s as usize) < nx {
        Some(s as usize)
    } else if wrap {
        Some(s.rem_euclid(nx as isize) as usize)
    } else {
        None
    }
}

/// Destination position of `src[x]`, if it exists.
#[inline(always)]
fn target(x: usize, dx: isize, nx: usize, wrap: bool) -> Option<usize> {
    let t = x as isize + dx;
    if t >= 0 && (t as usize) < nx {
        Some(t as usize)
    } else if wrap {
        Some(t.rem_euclid(nx as isize) as usize)
    } else {
        None
    }
}

/// Gather-structured shift (pull orientation): loops over destinations.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gather_line<T, S, D>(
    strategy: &StreamStrategy,
    src: &S,
    dst: &mut D,
    nx: usize,
    dx: i8,
    wrap: bool,
    scratch: &mut Vec<T>,
) where
    T: Copy,
    S: LineSrc<T>,
    D: LineDst<T>,
{
    match strategy.kind {
        StrategyKind::Direct => gather_direct(src, dst, 0, nx, nx, dx as isize, wrap),
        StrategyKind::TileBuffered => gather_tiles(strategy.tile_width, src, dst, nx, dx as isize, wrap, scratch),
        StrategyKind::LaneRotate => gather_lanes(strategy.lane_width, src, dst, nx, dx, wrap, scratch),
    }
}

/// Scatter-structured shift (push orientation): loops over sources.
#[allow(clippy::too_many_arguments)]
pub(crate) fn scatter_line<T, S, D>(
    strategy: &StreamStrategy,
    src: &S,
    dst: &mut D,
    nx: usize,
    dx: i8,
    wrap: bool,
    scratch: &mut Vec<T>,
) where
    T: Copy,
    S: LineSrc<T>,
    D: LineDst<T>,
{
    match strategy.kind {
        StrategyKind::Direct => scatter_direct(src, dst, 0, nx, nx, dx as isize, wrap),
        StrategyKind::TileBuffered => scatter_tiles(strategy.tile_width, src, dst, nx, dx as isize, wrap, scratch),
        StrategyKind::LaneRotate => scatter_lanes(strategy.lane_width, src, dst, nx, dx, wrap, scratch),
    }
}

#[inline]
fn gather_direct<T: Copy, S: LineSrc<T>, D: LineDst<T>>(
    src: &S,
    dst: &mut D,
    from: usize,
    to: usize,
    nx: usize,
    dx: isize,
    wrap: bool,
) {
    // positions whose source is in the line need no test
    let lo = (dx.max(0) as usize).clamp(from, to);
    let hi = ((nx as isize + dx.min(0)).max(0) as usize).clamp(lo, to);
    for x in from..lo {
        if let Some(s) = source(x, dx, nx, wrap) {
            dst.put(x, src.at(s));
        }
    }
    for x in lo..hi {
        dst.put(x, src.at((x as isize - dx) as usize));
    }
    for x in hi..to {
        if let Some(s) = source(x, dx, nx, wrap) {
            dst.put(x, src.at(s));
        }
    }
}

#[inline]
fn scatter_direct<T: Copy, S: LineSrc<T>, D: LineDst<T>>(
    src: &S,
    dst: &mut D,
    from: usize,
    to: usize,
    nx: usize,
    dx: isize,
    wrap: bool,
) {
    let lo = ((-dx).max(0) as usize).clamp(from, to);
    let hi = ((nx as isize - dx.max(0)).max(0) as usize).clamp(lo, to);
    for x in from..lo {
        if let Some(t) = target(x, dx, nx, wrap) {
            dst.put(t, src.at(x));
        }
    }
    for x in lo..hi {
        dst.put((x as isize + dx) as usize, src.at(x));
    }
    for x in hi..to {
        if let Some(t) = target(x, dx, nx, wrap) {
            dst.put(t, src.at(x));
        }
    }
}

/// Tiles of `width` cells are staged in a scratch line with one halo
/// cell per side, shifted there, and written back aligned.
fn gather_tiles<T: Copy, S: LineSrc<T>, D: LineDst<T>>(
    width: usize,
    src: &S,
    dst: &mut D,
    nx: usize,
    dx: isize,
    wrap: bool,
    scratch: &mut Vec<T>,
) {
    let mut x0 = 0;
    while x0 < nx {
        let tw = width.min(nx - x0);
        scratch.clear();
        // halo cells; a missing neighbour is padded and never written out
        let left = x0.checked_sub(1).or(if wrap { Some(nx - 1) } else { None });
        let right = if x0 + tw < nx { Some(x0 + tw) } else if wrap { Some(0) } else { None };
        scratch.push(src.at(left.unwrap_or(x0)));
        scratch.extend((x0..x0 + tw).map(|x| src.at(x)));
        scratch.push(src.at(right.unwrap_or(x0 + tw - 1)));
        tile_shift(scratch, dx as i8);
        for k in 0..tw {
            let x = x0 + k;
            if source(x, dx, nx, wrap).is_some() {
                dst.put(x, scratch[1 + k]);
            }
        }
        x0 += tw;
    }
}

/// Scatter variant: the tile is shifted in scratch and the value pushed
/// into a halo cell is exported to the neighbouring tile's first slot.
fn scatter_tiles<T: Copy, S: LineSrc<T>, D: LineDst<T>>(
    width: usize,
    src: &S,
    dst: &mut D,
    nx: usize,
    dx: isize,
    wrap: bool,
    scratch: &mut Vec<T>,
) {
    let mut x0 = 0;
    while x0 < nx {
        let tw = width.min(nx - x0);
        scratch.clear();
        let pad = src.at(x0);
        scratch.push(pad);
        scratch.extend((x0..x0 + tw).map(|x| src.at(x)));
        scratch.push(pad);
        tile_shift(scratch, dx as i8);
        // slots that received a loaded value: j - dx in 1..=tw
        let lo = (1 + dx) as usize;
        for j in lo..lo + tw {
            let t = x0 as isize + j as isize - 1;
            let t = if t >= 0 && (t as usize) < nx {
                Some(t as usize)
            } else if wrap {
                Some(t.rem_euclid(nx as isize) as usize)
            } else {
                None
            };
            if let Some(t) = t {
                dst.put(t, scratch[j]);
            }
        }
        x0 += tw;
    }
}

/// Groups of `width` cells are rotated by one lane; the lane that falls off
/// is handed to the neighbouring group as its carry. A tail shorter than a
/// group falls back to direct access.
fn gather_lanes<T: Copy, S: LineSrc<T>, D: LineDst<T>>(
    width: usize,
    src: &S,
    dst: &mut D,
    nx: usize,
    dx: i8,
    wrap: bool,
    group: &mut Vec<T>,
) {
    let groups = nx / width;
    let full = groups * width;
    gather_direct(src, dst, full, nx, nx, dx as isize, wrap);
    if groups == 0 {
        return;
    }
    let load = |g: usize, group: &mut Vec<T>| {
        group.clear();
        group.extend((g * width..(g + 1) * width).map(|x| src.at(x)));
    };
    match dx {
        0 => {
            for g in 0..groups {
                load(g, group);
                lane_rotate_shift(group, 0, None);
                for (k, &v) in group.iter().enumerate() {
                    dst.put(g * width + k, v);
                }
            }
        }
        1 => {
            let mut carry = if wrap { Some(src.at(nx - 1)) } else { None };
            for g in 0..groups {
                load(g, group);
                let filled = carry.is_some();
                carry = lane_rotate_shift(group, 1, carry);
                let first = if filled { 0 } else { 1 };
                for (k, &v) in group.iter().enumerate().skip(first) {
                    dst.put(g * width + k, v);
                }
            }
        }
        -1 => {
            let mut carry = if full < nx {
                Some(src.at(full))
            } else if wrap {
                Some(src.at(0))
            } else {
                None
            };
            for g in (0..groups).rev() {
                load(g, group);
                let filled = carry.is_some();
                carry = lane_rotate_shift(group, -1, carry);
                let end = if filled { width } else { width - 1 };
                for (k, &v) in group.iter().enumerate().take(end) {
                    dst.put(g * width + k, v);
                }
            }
        }
        _ => unreachable!("lattice displacement {dx}"),
    }
}

fn scatter_lanes<T: Copy, S: LineSrc<T>, D: LineDst<T>>(
    width: usize,
    src: &S,
    dst: &mut D,
    nx: usize,
    dx: i8,
    wrap: bool,
    group: &mut Vec<T>,
) {
    let groups = nx / width;
    let full = groups * width;
    scatter_direct(src, dst, full, nx, nx, dx as isize, wrap);
    if groups == 0 {
        return;
    }
    let load = |g: usize, group: &mut Vec<T>| {
        group.clear();
        group.extend((g * width..(g + 1) * width).map(|x| src.at(x)));
    };
    match dx {
        0 => {
            for g in 0..groups {
                load(g, group);
                lane_rotate_shift(group, 0, None);
                for (k, &v) in group.iter().enumerate() {
                    dst.put(g * width + k, v);
                }
            }
        }
        1 => {
            let mut carry = None;
            for g in 0..groups {
                load(g, group);
                let filled = carry.is_some();
                carry = lane_rotate_shift(group, 1, carry);
                let first = if filled { 0 } else { 1 };
                for (k, &v) in group.iter().enumerate().skip(first) {
                    dst.put(g * width + k, v);
                }
            }
            // the last group's exiting lane
            if let (Some(v), Some(t)) = (carry, target(full - 1, 1, nx, wrap)) {
                dst.put(t, v);
            }
        }
        -1 => {
            let mut carry = None;
            for g in (0..groups).rev() {
                load(g, group);
                let filled = carry.is_some();
                carry = lane_rotate_shift(group, -1, carry);
                let end = if filled { width } else { width - 1 };
                for (k, &v) in group.iter().enumerate().take(end) {
                    dst.put(g * width + k, v);
                }
            }
            if let (Some(v), Some(t)) = (carry, target(0, -1, nx, wrap)) {
                dst.put(t, v);
            }
        }
        _ => unreachable!("lattice displacement {dx}"),
    }
}
