use super::{flatten_index, DomainDims, Layout, Q};
use crate::scalar::Real;

/// Double-buffered distribution storage.
///
/// `current` holds the state the next step reads; `next` is the write
/// target. [`swap`](Self::swap) exchanges the two buffers without copying.
#[derive(Clone, Debug, PartialEq)]
pub struct DistributionField<T> {
    layout: Layout,
    dims: DomainDims,
    current: Vec<T>,
    next: Vec<T>,
}

impl<T: Real> DistributionField<T> {
    /// Zero-filled field.
    pub fn new(dims: DomainDims, layout: Layout) -> Self {
        let n = dims.field_len();
        Self { layout, dims, current: vec![T::zero(); n], next: vec![T::zero(); n] }
    }

    /// Field whose current buffer is `f(i, x, y, z)`; `next` is zeroed.
    pub fn from_fn(dims: DomainDims, layout: Layout, mut f: impl FnMut(usize, usize, usize, usize) -> T) -> Self {
        let mut field = Self::new(dims, layout);
        for z in 0..dims.nz {
            for y in 0..dims.ny {
                for x in 0..dims.nx {
                    for i in 0..Q {
                        let o = flatten_index(i, x, y, z, dims, layout);
                        field.current[o] = f(i, x, y, z);
                    }
                }
            }
        }
        field
    }

    #[inline]
    pub fn layout(&self) -> Layout {
        self.layout
    }

    #[inline]
    pub fn dims(&self) -> DomainDims {
        self.dims
    }

    #[inline]
    pub fn offset(&self, i: usize, x: usize, y: usize, z: usize) -> usize {
        flatten_index(i, x, y, z, self.dims, self.layout)
    }

    /// `f_i(x, y, z)` from the current buffer.
    #[inline]
    pub fn get(&self, i: usize, x: usize, y: usize, z: usize) -> T {
        self.current[self.offset(i, x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, x: usize, y: usize, z: usize, v: T) {
        let o = self.offset(i, x, y, z);
        self.current[o] = v;
    }

    /// All 19 populations of one node from the current buffer.
    pub fn node(&self, x: usize, y: usize, z: usize) -> [T; Q] {
        std::array::from_fn(|i| self.get(i, x, y, z))
    }

    pub fn set_node(&mut self, x: usize, y: usize, z: usize, f: &[T; Q]) {
        for (i, &v) in f.iter().enumerate() {
            self.set(i, x, y, z, v);
        }
    }

    #[inline]
    pub fn current(&self) -> &[T] {
        &self.current
    }

    #[inline]
    pub fn current_mut(&mut self) -> &mut [T] {
        &mut self.current
    }

    #[inline]
    pub fn next(&self) -> &[T] {
        &self.next
    }

    #[inline]
    pub fn next_mut(&mut self) -> &mut [T] {
        &mut self.next
    }

    /// Read view of `current` together with a write view of `next`.
    #[inline]
    pub fn split(&mut self) -> (&[T], &mut [T]) {
        (&self.current, &mut self.next)
    }

    /// Exchanges the roles of the two buffers.
    #[inline]
    pub fn swap(&mut self) {
        std::mem::swap(&mut self.current, &mut self.next);
    }

    /// Fills `next` with NaN so unwritten slots are detectable after a step.
    pub fn poison_next(&mut self) {
        self.next.fill(T::nan());
    }

    /// Sum of all populations in the current buffer, accumulated in `f64`
    /// in storage order.
    pub fn total_mass(&self) -> f64 {
        self.current.iter().map(|v| v.to_f64_lossy()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.current.iter().all(|v| v.is_finite())
    }

    /// Copy of this field in `layout`; both buffers are converted.
    pub fn to_layout(&self, layout: Layout) -> Self {
        if layout == self.layout {
            return self.clone();
        }
        let mut out = Self::new(self.dims, layout);
        let d = self.dims;
        for z in 0..d.nz {
            for y in 0..d.ny {
                for x in 0..d.nx {
                    for i in 0..Q {
                        let src = flatten_index(i, x, y, z, d, self.layout);
                        let dst = flatten_index(i, x, y, z, d, layout);
                        out.current[dst] = self.current[src];
                        out.next[dst] = self.next[src];
                    }
                }
            }
        }
        out
    }
}

/// Mutable view of one x-row (fixed `y`, `z`) across all directions.
pub(crate) enum RowMut<'a, T> {
    /// One contiguous line per direction.
    SoA(Vec<&'a mut [T]>),
    /// `Q * nx` interleaved values.
    AoS(&'a mut [T]),
}

impl<T: Copy> RowMut<'_, T> {
    #[inline]
    pub fn get(&self, i: usize, x: usize) -> T {
        match self {
            RowMut::SoA(lines) => lines[i][x],
            RowMut::AoS(cells) => cells[Q * x + i],
        }
    }

    #[inline]
    pub fn set(&mut self, i: usize, x: usize, v: T) {
        match self {
            RowMut::SoA(lines) => lines[i][x] = v,
            RowMut::AoS(cells) => cells[Q * x + i] = v,
        }
    }

    /// Overwrites direction `i` of the whole row.
    #[inline]
    pub fn store_line(&mut self, i: usize, line: &[T]) {
        match self {
            RowMut::SoA(lines) => lines[i].copy_from_slice(line),
            RowMut::AoS(cells) => {
                for (cell, &v) in cells.chunks_exact_mut(Q).zip(line) {
                    cell[i] = v;
                }
            }
        }
    }
}

/// Splits a flat buffer into disjoint per-row views, indexed by `z * ny + y`.
pub(crate) fn rows_mut<T>(buf: &mut [T], dims: DomainDims, layout: Layout) -> Vec<RowMut<'_, T>> {
    let nx = dims.nx;
    match layout {
        Layout::AoS => buf.chunks_mut(Q * nx).map(RowMut::AoS).collect(),
        Layout::SoA => {
            let mut rows: Vec<Vec<&mut [T]>> = (0..dims.rows()).map(|_| Vec::with_capacity(Q)).collect();
            for plane in buf.chunks_mut(dims.cells()) {
                for (row, line) in rows.iter_mut().zip(plane.chunks_mut(nx)) {
                    row.push(line);
                }
            }
            rows.into_iter().map(RowMut::SoA).collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(dims: DomainDims, layout: Layout) -> DistributionField<f64> {
        DistributionField::from_fn(dims, layout, |i, x, y, z| (i * 1000 + x * 100 + y * 10 + z) as f64 + 0.125)
    }

    #[test]
    fn layout_round_trip_is_bit_exact() {
        let d = DomainDims::new(5, 3, 4).unwrap();
        let soa = sample(d, Layout::SoA);
        let back = soa.to_layout(Layout::AoS).to_layout(Layout::SoA);
        assert_eq!(soa.current().len(), back.current().len());
        assert!(soa.current().iter().zip(back.current()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn layouts_agree_on_values() {
        let d = DomainDims::new(4, 2, 3).unwrap();
        let soa = sample(d, Layout::SoA);
        let aos = soa.to_layout(Layout::AoS);
        assert_eq!(soa.get(7, 3, 1, 2), aos.get(7, 3, 1, 2));
        assert_ne!(soa.current(), aos.current());
    }

    #[test]
    fn swap_exchanges_buffers_without_copy() {
        let d = DomainDims::cube(3).unwrap();
        let mut f = sample(d, Layout::SoA);
        let cur = f.current().as_ptr();
        let nxt = f.next().as_ptr();
        assert_ne!(cur, nxt);
        f.swap();
        assert_eq!(f.current().as_ptr(), nxt);
        assert_eq!(f.next().as_ptr(), cur);
    }

    #[test]
    fn rows_cover_buffer_once() {
        let d = DomainDims::new(3, 2, 2).unwrap();
        for layout in [Layout::SoA, Layout::AoS] {
            let mut buf = vec![0u32; d.field_len()];
            {
                let mut rows = rows_mut(&mut buf, d, layout);
                for (r, row) in rows.iter_mut().enumerate() {
                    for i in 0..Q {
                        for x in 0..d.nx {
                            row.set(i, x, row.get(i, x) + (r * 1000 + i * 10 + x) as u32 + 1);
                        }
                    }
                }
            }
            for z in 0..d.nz {
                for y in 0..d.ny {
                    for x in 0..d.nx {
                        for i in 0..Q {
                            let r = z * d.ny + y;
                            assert_eq!(buf[flatten_index(i, x, y, z, d, layout)], (r * 1000 + i * 10 + x) as u32 + 1);
                        }
                    }
                }
            }
        }
    }
}
