//! Pointwise physics: equilibrium, moments, BGK relaxation and wall rules.
//!
//! Everything here works on a single node's 19 populations and is generic
//! over [`Scalar`], so the same code runs in `f32`, `f64` and exact
//! rational arithmetic.

use thiserror::Error;

use crate::error::ConfigError;
use crate::lattice::{CellFlag, LatticeDescriptor, Q};
use crate::scalar::Scalar;

/// Density and velocity of one node.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MacroState<T> {
    pub rho: T,
    pub u: [T; 3],
}

impl<T: Scalar> MacroState<T> {
    pub fn new(rho: T, u: [T; 3]) -> Self {
        Self { rho, u }
    }

    /// Unit density at rest.
    pub fn rest() -> Self {
        Self { rho: T::one(), u: [T::zero(); 3] }
    }
}

/// Non-positive density: the simulation has diverged.
#[derive(Debug, Error, Clone, Copy, PartialEq)]
#[error("non-positive density {rho}")]
pub struct DegenerateState {
    pub rho: f64,
}

/// BGK relaxation time and its derived blending factors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RelaxationParams<T> {
    tau: T,
    omega: T,
    keep: T,
}

impl<T: Scalar> RelaxationParams<T> {
    pub fn new(tau: T) -> Result<Self, ConfigError> {
        if !(tau > T::ratio(1, 2)) {
            return Err(ConfigError::TauTooSmall(tau.approx_f64()));
        }
        let omega = T::one() / tau;
        Ok(Self { tau, omega, keep: T::one() - omega })
    }

    #[inline]
    pub fn tau(&self) -> T {
        self.tau
    }

    /// `1 / tau`.
    #[inline]
    pub fn omega(&self) -> T {
        self.omega
    }
}

/// `f_i^eq = rho w_i [1 + (e.u)/cs^2 + (e.u)^2/(2 cs^4) - u^2/(2 cs^2)]`.
#[inline]
pub fn equilibrium<T: Scalar>(state: &MacroState<T>, desc: &LatticeDescriptor<T>) -> [T; Q] {
    let u = &state.u;
    let k = desc.inv_sound_speed_sq;
    let half = T::ratio(1, 2);
    let usq = u[0] * u[0] + u[1] * u[1] + u[2] * u[2];
    let base = T::one() - half * k * usq;
    let kk = half * k * k;
    let mut feq = [T::zero(); Q];
    for (i, out) in feq.iter_mut().enumerate() {
        let eu = desc.dot(i, u);
        *out = state.rho * desc.weights[i] * (base + k * eu + kk * eu * eu);
    }
    feq
}

/// Density and velocity without the positivity check.
#[inline]
pub fn moments_unchecked<T: Scalar>(f: &[T; Q], desc: &LatticeDescriptor<T>) -> MacroState<T> {
    let mut rho = T::zero();
    let mut m = [T::zero(); 3];
    for (e, &fi) in desc.components.iter().zip(f.iter()) {
        rho = rho + fi;
        m[0] = m[0] + e[0] * fi;
        m[1] = m[1] + e[1] * fi;
        m[2] = m[2] + e[2] * fi;
    }
    MacroState { rho, u: [m[0] / rho, m[1] / rho, m[2] / rho] }
}

/// `rho = sum f_i`, `u = sum e_i f_i / rho`.
#[inline]
pub fn moments<T: Scalar>(f: &[T; Q], desc: &LatticeDescriptor<T>) -> Result<MacroState<T>, DegenerateState> {
    let state = moments_unchecked(f, desc);
    // NaN density fails this comparison too.
    if state.rho > T::zero() {
        Ok(state)
    } else {
        Err(DegenerateState { rho: state.rho.approx_f64() })
    }
}

/// Blends `f` toward `feq` in place: `f <- (1 - 1/tau) f + (1/tau) feq`.
#[inline]
pub fn relax<T: Scalar>(f: &mut [T; Q], feq: &[T; Q], params: &RelaxationParams<T>) {
    for (fi, &e) in f.iter_mut().zip(feq.iter()) {
        *fi = params.keep * *fi + params.omega * e;
    }
}

/// One BGK collision with the equilibrium taken from the input's own moments.
pub fn bgk_collide<T: Scalar>(f: &[T; Q], params: &RelaxationParams<T>, desc: &LatticeDescriptor<T>) -> [T; Q] {
    let feq = equilibrium(&moments_unchecked(f, desc), desc);
    let mut out = *f;
    relax(&mut out, &feq, params);
    out
}

/// Momentum injected by a moving wall into direction `i`:
/// `2 w_i rho_w (e_i . u_w) / cs^2` with `rho_w = 1`.
#[inline]
pub fn moving_wall_correction<T: Scalar>(i: usize, wall_velocity: &[T; 3], desc: &LatticeDescriptor<T>) -> T {
    T::int(2) * desc.weights[i] * desc.dot(i, wall_velocity) * desc.inv_sound_speed_sq
}

/// Fills the populations whose streaming source lies outside the domain.
///
/// `unknown` has bit `i` set for each such direction. `outgoing` holds this
/// node's post-collision populations from the previous step; each unknown
/// `f_i` takes the reflected `outgoing[opposite(i)]`, plus the wall momentum
/// term on moving walls.
#[inline]
pub fn apply_boundary<T: Scalar>(
    flag: CellFlag,
    unknown: u32,
    wall_velocity: &[T; 3],
    desc: &LatticeDescriptor<T>,
    outgoing: &[T; Q],
    f: &mut [T; Q],
) {
    debug_assert!(unknown == 0 || flag.is_wall(), "fluid node with unresolved populations");
    let mut bits = unknown;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        let reflected = outgoing[desc.opposite[i]];
        f[i] = match flag {
            CellFlag::MovingWall => reflected + moving_wall_correction(i, wall_velocity, desc),
            _ => reflected,
        };
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::{make_d3q19, unknown_mask, DomainDims, VELOCITIES};
    use num_rational::Ratio;
    use proptest::prelude::*;

    type Exact = Ratio<i128>;

    fn d64() -> LatticeDescriptor<f64> {
        make_d3q19()
    }

    fn q(n: i128, d: i128) -> Exact {
        Exact::new(n, d)
    }

    #[test]
    fn rest_equilibrium_is_weights() {
        let d = d64();
        assert_eq!(equilibrium(&MacroState::rest(), &d), d.weights);
        let two = equilibrium(&MacroState::new(2.0, [0.0; 3]), &d);
        for i in 0..Q {
            assert_eq!(two[i], 2.0 * d.weights[i]);
        }
    }

    #[test]
    fn equilibrium_hand_value() {
        // (1/18)(1 + 0.3 + 0.045 - 0.015)
        let f = equilibrium(&MacroState::new(1.0, [0.1, 0.0, 0.0]), &d64());
        assert!((f[1] - 0.073_888_888_888_888_9).abs() < 1e-15);
        let dx = make_d3q19::<Exact>();
        let fx = equilibrium(&MacroState::new(q(1, 1), [q(1, 10), q(0, 1), q(0, 1)]), &dx);
        assert_eq!(fx[1], q(1, 18) * q(133, 100));
    }

    #[test]
    fn moments_examples() {
        let d = d64();
        let m = moments(&d.weights, &d).unwrap();
        assert!((m.rho - 1.0).abs() < 1e-15);
        assert!(m.u.iter().all(|v| v.abs() < 1e-16));
        let mut f = [0.0; Q];
        f[0] = 3.0;
        let m = moments(&f, &d).unwrap();
        assert_eq!(m.rho, 3.0);
        assert_eq!(m.u, [0.0; 3]);
    }

    #[test]
    fn moments_round_trip_by_independent_sum() {
        let d = d64();
        let feq = equilibrium(&MacroState::new(1.2, [0.05, -0.02, 0.01]), &d);
        // independent summation against the raw velocity table
        let rho: f64 = feq.iter().sum();
        let mut mom = [0.0; 3];
        for i in 0..Q {
            for a in 0..3 {
                mom[a] += VELOCITIES[i][a] as f64 * feq[i];
            }
        }
        assert!((rho - 1.2).abs() < 1e-15);
        let m = moments(&feq, &d).unwrap();
        for (a, want) in [0.05, -0.02, 0.01].iter().enumerate() {
            assert!((mom[a] / rho - want).abs() < 1e-15);
            assert!((m.u[a] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn moments_exact_in_rationals() {
        let d = make_d3q19::<Exact>();
        let s = MacroState::new(q(6, 5), [q(1, 20), q(-1, 50), q(1, 100)]);
        assert_eq!(moments(&equilibrium(&s, &d), &d).unwrap(), s);
    }

    #[test]
    fn negative_density_is_degenerate() {
        let d = d64();
        let mut f = [0.0; Q];
        f[0] = -1.0;
        assert!(moments(&f, &d).is_err());
        assert!(moments(&[0.0; Q], &d).is_err());
        f[0] = f64::NAN;
        assert!(moments(&f, &d).is_err());
    }

    #[test]
    fn tau_bound() {
        assert!(RelaxationParams::new(0.5f64).is_err());
        assert!(RelaxationParams::new(0.4f64).is_err());
        assert!(RelaxationParams::new(0.51f64).is_ok());
        assert!(RelaxationParams::new(q(1, 2)).is_err());
    }

    #[test]
    fn full_relaxation_gives_equilibrium() {
        let d = d64();
        let f: [f64; Q] = std::array::from_fn(|i| 0.02 + 0.003 * i as f64);
        let out = bgk_collide(&f, &RelaxationParams::new(1.0).unwrap(), &d);
        let feq = equilibrium(&moments_unchecked(&f, &d), &d);
        assert_eq!(out, feq);
    }

    #[test]
    fn equilibrium_is_fixed_point_exactly() {
        let d = make_d3q19::<Exact>();
        let feq = equilibrium(&MacroState::new(q(1, 1), [q(1, 10), q(1, 30), q(0, 1)]), &d);
        let p = RelaxationParams::new(q(4, 5)).unwrap();
        assert_eq!(bgk_collide(&feq, &p, &d), feq);
        let d = d64();
        let feq = equilibrium(&MacroState::new(1.0, [0.1, 0.03, 0.0]), &d);
        let out = bgk_collide(&feq, &RelaxationParams::new(0.8).unwrap(), &d);
        for i in 0..Q {
            assert!((out[i] - feq[i]).abs() < 1e-16);
        }
    }

    #[test]
    fn contraction_exact_in_rationals() {
        let d = make_d3q19::<Exact>();
        let f: [Exact; Q] = std::array::from_fn(|i| q(1 + (i as i128 * 7) % 5, 60));
        let tau = q(4, 5);
        let out = bgk_collide(&f, &RelaxationParams::new(tau).unwrap(), &d);
        let feq = equilibrium(&moments_unchecked(&f, &d), &d);
        let factor = q(1, 1) - q(1, 1) / tau;
        for i in 0..Q {
            assert_eq!(out[i] - feq[i], factor * (f[i] - feq[i]));
        }
    }

    #[test]
    fn stationary_wall_is_plain_bounce_back() {
        let d = d64();
        let dims = DomainDims::cube(4).unwrap();
        let mask = unknown_mask(dims, 0, 1, 3);
        let outgoing: [f64; Q] = std::array::from_fn(|i| 0.01 * (i + 1) as f64);
        let mut a = [-1.0; Q];
        let mut b = [-1.0; Q];
        apply_boundary(CellFlag::SolidWall, mask, &[0.0; 3], &d, &outgoing, &mut a);
        apply_boundary(CellFlag::MovingWall, mask, &[0.0; 3], &d, &outgoing, &mut b);
        assert_eq!(a, b);
        for i in 0..Q {
            if mask & (1 << i) != 0 {
                assert_eq!(a[i], outgoing[OPPOSITE_OF[i]]);
            } else {
                assert_eq!(a[i], -1.0);
            }
        }
    }

    const OPPOSITE_OF: [usize; Q] = crate::lattice::OPPOSITE;

    #[test]
    fn lid_correction_hand_value() {
        // e = (1, -1, 0), w = 1/36: 2 * (1/36) * 0.1 * 3 = 1/60
        let d = d64();
        assert_eq!(VELOCITIES[9], [1, -1, 0]);
        let c = moving_wall_correction(9, &[0.1, 0.0, 0.0], &d);
        assert!((c - 1.0 / 60.0).abs() < 1e-16);
        let dx = make_d3q19::<Exact>();
        assert_eq!(moving_wall_correction(9, &[q(1, 10), q(0, 1), q(0, 1)], &dx), q(1, 60));
        let mut f = [0.0; Q];
        let outgoing: [f64; Q] = std::array::from_fn(|i| i as f64);
        apply_boundary(CellFlag::MovingWall, 1 << 9, &[0.1, 0.0, 0.0], &d, &outgoing, &mut f);
        assert!((f[9] - (10.0 + 1.0 / 60.0)).abs() < 1e-14);
    }

    #[test]
    fn inversion_symmetry_of_equilibrium() {
        let d = d64();
        let u = [0.07, -0.03, 0.02];
        let a = equilibrium(&MacroState::new(1.1, u), &d);
        let b = equilibrium(&MacroState::new(1.1, u.map(|c| -c)), &d);
        let mirror_x: Vec<usize> = (0..Q)
            .map(|i| {
                let e = VELOCITIES[i];
                (0..Q).find(|&j| VELOCITIES[j] == [-e[0], e[1], e[2]]).unwrap()
            })
            .collect();
        let c = equilibrium(&MacroState::new(1.1, [-u[0], u[1], u[2]]), &d);
        for i in 0..Q {
            assert_eq!(a[i], b[d.opposite[i]]);
            assert_eq!(a[i], c[mirror_x[i]]);
        }
    }

    fn population() -> impl Strategy<Value = [f64; Q]> {
        proptest::array::uniform19(0.001f64..0.2)
    }

    proptest! {
        #[test]
        fn equilibrium_moments_round_trip(rho in 0.5f64..2.0, ux in -0.15f64..0.15, uy in -0.15f64..0.15, uz in -0.15f64..0.15) {
            let n = (ux * ux + uy * uy + uz * uz).sqrt();
            let s = if n > 0.15 { 0.15 / n } else { 1.0 };
            let u = [ux * s, uy * s, uz * s];
            let d = d64();
            let m = moments(&equilibrium(&MacroState::new(rho, u), &d), &d).unwrap();
            prop_assert!((m.rho - rho).abs() <= 1e-14);
            for a in 0..3 {
                prop_assert!((m.u[a] - u[a]).abs() <= 1e-14);
            }
        }

        #[test]
        fn collision_conserves_mass_and_momentum(f in population(), tau in 0.51f64..2.0) {
            let d = d64();
            let out = bgk_collide(&f, &RelaxationParams::new(tau).unwrap(), &d);
            let (a, b) = (moments_unchecked(&f, &d), moments_unchecked(&out, &d));
            prop_assert!(((a.rho - b.rho) / a.rho).abs() <= 1e-13);
            for k in 0..3 {
                prop_assert!((a.rho * a.u[k] - b.rho * b.u[k]).abs() <= 1e-13 * a.rho);
            }
        }

        #[test]
        fn collision_contracts_toward_equilibrium(f in population(), tau in 0.51f64..2.0) {
            let d = d64();
            let feq = equilibrium(&moments_unchecked(&f, &d), &d);
            let out = bgk_collide(&f, &RelaxationParams::new(tau).unwrap(), &d);
            let norm = |v: &[f64; Q], w: &[f64; Q]| v.iter().zip(w).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            let before = norm(&f, &feq);
            let after = norm(&out, &feq);
            prop_assert!((after - (1.0 - 1.0 / tau).abs() * before).abs() <= 1e-12);
        }
    }
}
