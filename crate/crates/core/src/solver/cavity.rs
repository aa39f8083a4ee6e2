use crate::kernels::MacroState;
use crate::lattice::DomainDims;
use crate::scalar::Real;

use super::{Ordering, Precision, SimConfig, Solver, SolverError};
use crate::streaming::StreamStrategy;

/// Steps between two steady-state checks.
pub const STEADY_CHECK_INTERVAL: usize = 100;

/// Velocity samples along one axis at node centres `(k + 0.5) / n`, with
/// the values imposed by the walls at 0 and 1.
#[derive(Clone, Debug, PartialEq)]
pub struct Profile {
    pub coords: Vec<f64>,
    pub values: Vec<f64>,
    pub walls: [f64; 2],
}

impl Profile {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    fn knots(&self) -> (Vec<f64>, Vec<f64>) {
        let mut c = Vec::with_capacity(self.len() + 2);
        let mut v = Vec::with_capacity(self.len() + 2);
        c.push(0.0);
        v.push(self.walls[0]);
        c.extend_from_slice(&self.coords);
        v.extend_from_slice(&self.values);
        c.push(1.0);
        v.push(self.walls[1]);
        (c, v)
    }

    /// Piecewise linear value at `s`, clamped to `[0, 1]`.
    pub fn interpolate(&self, s: f64) -> f64 {
        let (c, v) = self.knots();
        let s = s.clamp(0.0, 1.0);
        let k = c.partition_point(|&x| x < s).clamp(1, c.len() - 1);
        let (x0, x1) = (c[k - 1], c[k]);
        // knots exactly, so a profile compared with itself deviates by zero
        if x1 == s {
            return v[k];
        }
        let t = (s - x0) / (x1 - x0);
        v[k - 1] + t * (v[k] - v[k - 1])
    }

    /// Root-mean-square difference on `samples` evenly spaced points of
    /// `[0, 1]`. Profiles of different resolution are compared through
    /// their interpolants.
    pub fn l2_distance(&self, other: &Profile, samples: usize) -> f64 {
        let samples = samples.max(2);
        let sum: f64 = (0..samples)
            .map(|k| {
                let s = k as f64 / (samples - 1) as f64;
                (self.interpolate(s) - other.interpolate(s)).powi(2)
            })
            .sum();
        (sum / samples as f64).sqrt()
    }

    /// Largest `|profile(c) - value|` over reference points.
    pub fn max_deviation(&self, reference: &[(f64, f64)]) -> f64 {
        reference.iter().map(|&(c, v)| (self.interpolate(c) - v).abs()).fold(0.0, f64::max)
    }

    /// Pearson correlation of the profile with its mirror image about the
    /// centre; -1 for a perfectly antisymmetric profile.
    pub fn mirror_correlation(&self) -> f64 {
        let a = &self.values;
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for (k, &v) in a.iter().enumerate() {
            let m = a[a.len() - 1 - k];
            num += (v - mean) * (m - mean);
            den += (v - mean) * (v - mean);
        }
        if den == 0.0 {
            return f64::NAN;
        }
        num / den
    }
}

/// Outcome of a lid-driven cavity run.
#[derive(Clone, Debug)]
pub struct CavityResult {
    pub dims: DomainDims,
    pub tau: f64,
    pub lid_speed: f64,
    pub reynolds: f64,
    pub ordering: Ordering,
    pub strategy: StreamStrategy,
    pub precision: Precision,
    /// `u_x / lid` along z through the centre (lid at z = 1).
    pub ux_along_z: Profile,
    /// `u_z / lid` along x through the centre.
    pub uz_along_x: Profile,
    pub iterations: usize,
    pub converged: bool,
    /// Last measured max-norm velocity change over one check interval.
    pub last_change: f64,
    pub initial_mass: f64,
    pub final_mass: f64,
    /// Per-node density and velocity, kept when `store_macros` is set.
    pub final_state: Option<Vec<MacroState<f64>>>,
}

pub fn run_cavity(config: &SimConfig) -> Result<CavityResult, SolverError> {
    match config.precision {
        Precision::Single => run_cavity_typed::<f32>(config, |_, _| {}),
        Precision::Double => run_cavity_typed::<f64>(config, |_, _| {}),
    }
}

/// The two middle nodes of an axis; the same node twice for odd lengths.
fn centre(n: usize) -> (usize, usize) {
    if n % 2 == 1 {
        (n / 2, n / 2)
    } else {
        (n / 2 - 1, n / 2)
    }
}

fn velocities<T: Real>(solver: &Solver<T>) -> Vec<[f64; 3]> {
    solver.macro_state().iter().map(|m| m.u.map(|c| c.to_f64_lossy())).collect()
}

fn extract_profiles(dims: DomainDims, u: &[[f64; 3]], scale: f64) -> (Profile, Profile) {
    let (xa, xb) = centre(dims.nx);
    let (ya, yb) = centre(dims.ny);
    let (za, zb) = centre(dims.nz);
    let avg = |pts: [(usize, usize, usize); 4], c: usize| {
        pts.iter().map(|&(x, y, z)| u[dims.cell_index(x, y, z)][c]).sum::<f64>() / 4.0 * scale
    };
    let ux = Profile {
        coords: (0..dims.nz).map(|k| (k as f64 + 0.5) / dims.nz as f64).collect(),
        values: (0..dims.nz).map(|z| avg([(xa, ya, z), (xb, ya, z), (xa, yb, z), (xb, yb, z)], 0)).collect(),
        walls: [0.0, if scale == 0.0 { 0.0 } else { 1.0 }],
    };
    let uz = Profile {
        coords: (0..dims.nx).map(|k| (k as f64 + 0.5) / dims.nx as f64).collect(),
        values: (0..dims.nx).map(|x| avg([(x, ya, za), (x, yb, za), (x, ya, zb), (x, yb, zb)], 2)).collect(),
        walls: [0.0, 0.0],
    };
    (ux, uz)
}

/// Runs the cavity in precision `T`. `observe(step, change)` is called at
/// every steady-state check.
pub fn run_cavity_typed<T: Real>(
    config: &SimConfig,
    mut observe: impl FnMut(usize, f64),
) -> Result<CavityResult, SolverError> {
    let (tau, lid) = config.resolve()?;
    let mut solver = Solver::<T>::from_config(config)?;
    let dims = config.dims;
    let initial_mass = solver.total_mass();
    let mut previous = velocities(&solver);
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    let mut done = 0;
    while done < config.iterations {
        let chunk = STEADY_CHECK_INTERVAL.min(config.iterations - done);
        solver.run(chunk)?;
        done += chunk;
        if chunk == STEADY_CHECK_INTERVAL {
            let now = velocities(&solver);
            last_change = now
                .iter()
                .zip(&previous)
                .flat_map(|(a, b)| (0..3).map(move |c| (a[c] - b[c]).abs()))
                .fold(0.0, f64::max);
            previous = now;
            observe(done, last_change);
            if let Some(tol) = config.steady_tolerance {
                if last_change <= tol * lid.abs() {
                    converged = true;
                    break;
                }
            }
        }
    }
    let u = velocities(&solver);
    let scale = if lid == 0.0 { 0.0 } else { 1.0 / lid };
    let (ux_along_z, uz_along_x) = if lid == 0.0 {
        // unnormalised, so a flow that failed to stay at rest would show
        let (mut a, mut b) = extract_profiles(dims, &u, 1.0);
        a.walls = [0.0, 0.0];
        b.walls = [0.0, 0.0];
        (a, b)
    } else {
        extract_profiles(dims, &u, scale)
    };
    let final_state = config.store_macros.then(|| {
        solver
            .macro_state()
            .into_iter()
            .map(|m| MacroState { rho: m.rho.to_f64_lossy(), u: m.u.map(|c| c.to_f64_lossy()) })
            .collect()
    });
    Ok(CavityResult {
        dims,
        tau,
        lid_speed: lid,
        reynolds: 3.0 * dims.nx as f64 * lid / (tau - 0.5),
        ordering: config.ordering,
        strategy: config.strategy,
        precision: config.precision,
        ux_along_z,
        uz_along_x,
        iterations: done,
        converged,
        last_change,
        initial_mass,
        final_mass: solver.total_mass(),
        final_state,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(values: Vec<f64>, walls: [f64; 2]) -> Profile {
        let n = values.len();
        Profile { coords: (0..n).map(|k| (k as f64 + 0.5) / n as f64).collect(), values, walls }
    }

    #[test]
    fn interpolation_hits_knots_and_walls() {
        let p = line(vec![0.25, 0.75], [0.0, 1.0]);
        assert_eq!(p.interpolate(0.0), 0.0);
        assert_eq!(p.interpolate(0.25), 0.25);
        assert_eq!(p.interpolate(0.5), 0.5);
        assert_eq!(p.interpolate(1.0), 1.0);
        assert_eq!(p.interpolate(7.0), 1.0);
        let q = line(vec![0.1, -0.3, 1.0 / 3.0, 0.7], [0.0, 1.0]);
        let own: Vec<(f64, f64)> = q.coords.iter().copied().zip(q.values.iter().copied()).collect();
        assert_eq!(q.max_deviation(&own), 0.0);
    }

    #[test]
    fn l2_distance_of_identical_linear_profiles_is_zero() {
        // both resolutions sample the same straight line exactly
        let a = line((0..4).map(|k| (k as f64 + 0.5) / 4.0).collect(), [0.0, 1.0]);
        let b = line((0..8).map(|k| (k as f64 + 0.5) / 8.0).collect(), [0.0, 1.0]);
        assert!(a.l2_distance(&b, 101) < 1e-15);
        let c = line(vec![0.0; 4], [0.0, 0.0]);
        assert!(a.l2_distance(&c, 101) > 0.1);
    }

    #[test]
    fn mirror_correlation_signs() {
        assert!((line(vec![1.0, 2.0, -2.0, -1.0], [0.0; 2]).mirror_correlation() + 1.0).abs() < 1e-15);
        assert!((line(vec![1.0, 2.0, 2.0, 1.0], [0.0; 2]).mirror_correlation() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn centre_nodes() {
        assert_eq!(centre(5), (2, 2));
        assert_eq!(centre(4), (1, 2));
    }
}
