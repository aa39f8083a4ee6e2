//! The D3Q19 velocity set.
//!
//! Direction order: rest, the six axis directions, then the twelve
//! diagonals, with every direction immediately followed by its opposite.

use crate::scalar::Scalar;

/// Number of discrete velocities.
pub const Q: usize = 19;

/// Discrete velocities in lattice units, `c = 1`.
pub const VELOCITIES: [[i8; 3]; Q] = [
    [0, 0, 0],
    [1, 0, 0],
    [-1, 0, 0],
    [0, 1, 0],
    [0, -1, 0],
    [0, 0, 1],
    [0, 0, -1],
    [1, 1, 0],
    [-1, -1, 0],
    [1, -1, 0],
    [-1, 1, 0],
    [0, 1, 1],
    [0, -1, -1],
    [0, 1, -1],
    [0, -1, 1],
    [1, 0, 1],
    [-1, 0, -1],
    [-1, 0, 1],
    [1, 0, -1],
];

/// Index of the reversed velocity for each direction.
pub const OPPOSITE: [usize; Q] = [0, 2, 1, 4, 3, 6, 5, 8, 7, 10, 9, 12, 11, 14, 13, 16, 15, 18, 17];

/// Weight denominators; every weight has numerator 1.
const WEIGHT_DEN: [i64; Q] = [3, 18, 18, 18, 18, 18, 18, 36, 36, 36, 36, 36, 36, 36, 36, 36, 36, 36, 36];

/// D3Q19 model constants in the scalar type `T`.
#[derive(Clone, Debug, PartialEq)]
pub struct LatticeDescriptor<T> {
    pub velocities: [[i8; 3]; Q],
    /// `velocities` in the scalar type.
    pub components: [[T; 3]; Q],
    pub weights: [T; Q],
    pub opposite: [usize; Q],
    /// Squared speed of sound, `1/3`.
    pub sound_speed_sq: T,
    /// `1 / c_s^2`, kept separately so float kernels multiply by an exact 3.
    pub inv_sound_speed_sq: T,
    /// `c = dx/dt`.
    pub lattice_speed: T,
}

impl<T: Scalar> LatticeDescriptor<T> {
    #[inline]
    pub fn velocity(&self, i: usize) -> [T; 3] {
        self.components[i]
    }

    /// Dot product `e_i . v`.
    #[inline]
    pub fn dot(&self, i: usize, v: &[T; 3]) -> T {
        let e = &self.components[i];
        e[0] * v[0] + e[1] * v[1] + e[2] * v[2]
    }
}

/// Builds the D3Q19 descriptor.
pub fn make_d3q19<T: Scalar>() -> LatticeDescriptor<T> {
    let mut weights = [T::zero(); Q];
    for (w, &den) in weights.iter_mut().zip(WEIGHT_DEN.iter()) {
        *w = T::ratio(1, den);
    }
    let components = VELOCITIES.map(|e| e.map(|c| T::int(c as i64)));
    LatticeDescriptor {
        velocities: VELOCITIES,
        components,
        weights,
        opposite: OPPOSITE,
        sound_speed_sq: T::ratio(1, 3),
        inv_sound_speed_sq: T::int(3),
        lattice_speed: T::one(),
    }
}
