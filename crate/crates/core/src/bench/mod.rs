//! Throughput measurement, the byte-traffic model, memory microbenchmarks
//! and spectral analysis of per-iteration timings.

mod membench;
mod spectrum;

pub use membench::{
    last_level_cache_bytes, membench, offset_ratio, AccessPattern, MembenchConfig, MembenchResult,
};
pub use spectrum::{iteration_time_spectrum, SpectrumResult, MIN_SPECTRUM_SAMPLES};

use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::error::ConfigError;
use crate::kernels::MacroState;
use crate::lattice::{DomainDims, Layout, Q, VELOCITIES};
use crate::scalar::Real;
use crate::solver::{Ordering, Precision, SimConfig, Solver, SolverError};
use crate::streaming::StreamStrategy;

/// Bytes in a binary gigabyte.
pub const GIB: f64 = 1_073_741_824.0;
/// Bytes in a decimal gigabyte.
pub const GB: f64 = 1e9;
/// Fewest timed iterations accepted by [`measure_mlups`].
pub const MIN_MEASURED_ITERATIONS: usize = 10;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("{got} measured iterations requested; at least {min} are needed")]
    TooFewIterations { got: usize, min: usize },
    #[error("iteration {index} took {seconds} s; durations must be positive")]
    NonPositiveTime { index: usize, seconds: f64 },
    #[error("{what} must be positive, got {value}")]
    NonPositive { what: &'static str, value: f64 },
    #[error("{got} samples is too few for a spectrum; run at least {min} iterations")]
    TooFewSamples { got: usize, min: usize },
    #[error("could not allocate {bytes} bytes for the benchmark vectors")]
    InsufficientMemory { bytes: usize },
    #[error(
        "working set of {working_set} bytes does not exceed 4x the {cache} byte last-level cache; use larger vectors"
    )]
    CacheResident { working_set: usize, cache: usize },
    #[error("{pattern} checksum {got:#010x} differs from the expected {expected:#010x}")]
    ChecksumMismatch { pattern: AccessPattern, got: u32, expected: u32 },
}

/// Bytes moved per node update: one load and one store per direction, plus
/// four stores (density and velocity) when macroscopic fields are kept.
pub fn bytes_per_node(scalar_bytes: usize, store_macros: bool) -> usize {
    2 * Q * scalar_bytes + if store_macros { 4 * scalar_bytes } else { 0 }
}

/// Upper bound on MLUPS for a bandwidth-bound update.
pub fn theoretical_peak(bandwidth_bytes_per_s: f64, bytes_per_node: f64) -> Result<f64, BenchError> {
    if !(bandwidth_bytes_per_s > 0.0) {
        return Err(BenchError::NonPositive { what: "bandwidth", value: bandwidth_bytes_per_s });
    }
    if !(bytes_per_node > 0.0) {
        return Err(BenchError::NonPositive { what: "bytes per node", value: bytes_per_node });
    }
    Ok(bandwidth_bytes_per_s / bytes_per_node / 1e6)
}

/// A bandwidth quoted in "GB/s" read both ways.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeakEstimate {
    pub quoted_gb_per_s: f64,
    pub bytes_per_node: f64,
    /// GB taken as 2^30 bytes.
    pub mlups_binary: f64,
    /// GB taken as 10^9 bytes.
    pub mlups_decimal: f64,
}

pub fn theoretical_peak_both(quoted_gb_per_s: f64, bytes_per_node: f64) -> Result<PeakEstimate, BenchError> {
    Ok(PeakEstimate {
        quoted_gb_per_s,
        bytes_per_node,
        mlups_binary: theoretical_peak(quoted_gb_per_s * GIB, bytes_per_node)?,
        mlups_decimal: theoretical_peak(quoted_gb_per_s * GB, bytes_per_node)?,
    })
}

/// MLUPS per GB/s of memory bandwidth.
pub fn normalized_performance(mlups: f64, bandwidth_gb_per_s: f64) -> Result<f64, BenchError> {
    if !(bandwidth_gb_per_s > 0.0) {
        return Err(BenchError::NonPositive { what: "bandwidth", value: bandwidth_gb_per_s });
    }
    Ok(mlups / bandwidth_gb_per_s)
}

/// Million node updates per second for one iteration.
pub fn mlups(cells: usize, seconds: f64) -> Result<f64, BenchError> {
    if !(seconds > 0.0) {
        return Err(BenchError::NonPositive { what: "iteration time", value: seconds });
    }
    Ok(cells as f64 / (seconds * 1e6))
}

/// Fraction of the x-shifted gathers (directions with `e_x != 0`) whose
/// source node lies inside a bounded domain. The remainder are served by
/// the boundary instead of a misaligned load.
pub fn count_misaligned_fraction(dims: DomainDims) -> f64 {
    let mut inside = 0usize;
    let mut total = 0usize;
    let n = [dims.nx, dims.ny, dims.nz];
    for e in VELOCITIES.iter().filter(|e| e[0] != 0) {
        inside += (0..3).map(|a| n[a].saturating_sub(e[a].unsigned_abs() as usize)).product::<usize>();
        total += dims.cells();
    }
    inside as f64 / total as f64
}

/// Timings and throughput statistics of one benchmark configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub domain: DomainDims,
    pub strategy: StreamStrategy,
    pub ordering: Ordering,
    pub precision: Precision,
    pub layout: Layout,
    pub store_macros: bool,
    pub workers: usize,
    pub warmup_iterations: usize,
    pub per_iteration_seconds: Vec<f64>,
    pub mlups_mean: f64,
    /// Population standard deviation of the per-iteration MLUPS.
    pub mlups_std: f64,
    /// Bytes per second implied by the traffic model at the mean rate.
    pub measured_bandwidth: Option<f64>,
    pub timer_resolution_seconds: f64,
    pub warning: Option<String>,
}

/// Mean and population standard deviation of per-iteration MLUPS.
pub fn mlups_statistics(cells: usize, seconds: &[f64]) -> Result<(f64, f64), BenchError> {
    let mut rates = Vec::with_capacity(seconds.len());
    for (index, &s) in seconds.iter().enumerate() {
        if !(s > 0.0) {
            return Err(BenchError::NonPositiveTime { index, seconds: s });
        }
        rates.push(mlups(cells, s)?);
    }
    let n = rates.len() as f64;
    let mean = rates.iter().sum::<f64>() / n;
    let var = rates.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n;
    Ok((mean, var.sqrt()))
}

/// Smallest observable step of the monotonic clock.
pub fn timer_resolution() -> Duration {
    let mut best = Duration::MAX;
    for _ in 0..200 {
        let t0 = Instant::now();
        let mut t1 = Instant::now();
        while t1 == t0 {
            t1 = Instant::now();
        }
        best = best.min(t1 - t0);
    }
    best
}

impl BenchRecord {
    /// Builds a record from raw iteration times.
    pub fn from_times(config: &SimConfig, warmup: usize, seconds: Vec<f64>) -> Result<Self, BenchError> {
        if seconds.len() < MIN_MEASURED_ITERATIONS {
            return Err(BenchError::TooFewIterations { got: seconds.len(), min: MIN_MEASURED_ITERATIONS });
        }
        let (mean, std) = mlups_statistics(config.dims.cells(), &seconds)?;
        let bpn = bytes_per_node(config.precision.scalar_bytes(), config.store_macros) as f64;
        Ok(Self {
            domain: config.dims,
            strategy: config.strategy,
            ordering: config.ordering,
            precision: config.precision,
            layout: config.layout,
            store_macros: config.store_macros,
            workers: rayon::current_num_threads(),
            warmup_iterations: warmup,
            per_iteration_seconds: seconds,
            mlups_mean: mean,
            mlups_std: std,
            measured_bandwidth: Some(mean * 1e6 * bpn),
            timer_resolution_seconds: 0.0,
            warning: None,
        })
    }

    pub fn mean_iteration_seconds(&self) -> f64 {
        self.per_iteration_seconds.iter().sum::<f64>() / self.per_iteration_seconds.len() as f64
    }

    /// Records a warning when the clock step exceeds 1% of the mean
    /// iteration time.
    pub fn check_timer(&mut self, resolution: f64) {
        self.timer_resolution_seconds = resolution;
        let mean = self.mean_iteration_seconds();
        if resolution > 0.01 * mean {
            self.warning = Some(format!(
                "timer resolution {resolution:.3e} s exceeds 1% of the mean iteration time {mean:.3e} s"
            ));
        }
    }
}

/// Runs `warmup` untimed steps, then times `measured` steps one by one.
/// The current rayon pool sets the worker count.
pub fn measure_mlups(config: &SimConfig, warmup: usize, measured: usize) -> Result<BenchRecord, BenchError> {
    if measured < MIN_MEASURED_ITERATIONS {
        return Err(BenchError::TooFewIterations { got: measured, min: MIN_MEASURED_ITERATIONS });
    }
    let seconds = match config.precision {
        Precision::Single => time_steps::<f32>(config, warmup, measured)?,
        Precision::Double => time_steps::<f64>(config, warmup, measured)?,
    };
    let mut record = BenchRecord::from_times(config, warmup, seconds)?;
    record.check_timer(timer_resolution().as_secs_f64());
    Ok(record)
}

fn time_steps<T: Real>(config: &SimConfig, warmup: usize, measured: usize) -> Result<Vec<f64>, BenchError> {
    let mut solver = Solver::<T>::from_config(config)?;
    solver.run(warmup)?;
    let mut seconds = Vec::with_capacity(measured);
    for _ in 0..measured {
        let t = Instant::now();
        solver.step()?;
        seconds.push(t.elapsed().as_secs_f64());
    }
    Ok(seconds)
}

/// First disagreement found by [`check_equivalence`].
#[derive(Clone, Debug, PartialEq)]
pub struct Mismatch {
    pub reference: StreamStrategy,
    pub strategy: StreamStrategy,
    /// SoA offset of the first differing population.
    pub offset: usize,
}

/// Steps a smoothly perturbed cavity state once under each strategy and
/// compares the resulting buffers bit for bit with the first strategy's.
pub fn check_equivalence(config: &SimConfig, strategies: &[StreamStrategy]) -> Result<Option<Mismatch>, BenchError> {
    match config.precision {
        Precision::Single => equivalence_typed::<f32>(config, strategies),
        Precision::Double => equivalence_typed::<f64>(config, strategies),
    }
}

fn equivalence_typed<T: Real>(config: &SimConfig, strategies: &[StreamStrategy]) -> Result<Option<Mismatch>, BenchError> {
    let mut reference: Option<(StreamStrategy, Vec<u64>)> = None;
    for &strategy in strategies {
        let mut c = config.clone();
        c.strategy = strategy;
        let mut solver = Solver::<T>::from_config(&c)?;
        solver.init_with(|x, y, z| {
            let (x, y, z) = (x as f64, y as f64, z as f64);
            let t = T::from_f64_lossy;
            MacroState {
                rho: t(1.0 + 0.01 * (0.7 * x + 1.3 * y + 0.4 * z).sin()),
                u: [
                    t(0.02 * (1.1 * x + 0.3 * z).sin()),
                    t(0.02 * (0.5 * y + 0.9 * x).cos()),
                    t(0.02 * (0.8 * z + 0.2 * y).sin()),
                ],
            }
        });
        solver.step()?;
        let bits: Vec<u64> =
            solver.field().to_layout(Layout::SoA).current().iter().map(|v| v.to_f64_lossy().to_bits()).collect();
        match &reference {
            None => reference = Some((strategy, bits)),
            Some((r, expect)) => {
                if let Some(offset) = bits.iter().zip(expect).position(|(a, b)| a != b) {
                    return Ok(Some(Mismatch { reference: *r, strategy, offset }));
                }
            }
        }
    }
    Ok(None)
}

/// A GPU measurement quoted for comparison with host results.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PublishedValue {
    pub quantity: &'static str,
    pub hardware: &'static str,
    pub value: f64,
    pub unit: &'static str,
}

const fn pv(quantity: &'static str, hardware: &'static str, value: f64, unit: &'static str) -> PublishedValue {
    PublishedValue { quantity, hardware, value, unit }
}

/// Published single-precision D3Q19 reference figures for two Kepler GPUs.
pub const PUBLISHED_GPU_VALUES: &[PublishedValue] = &[
    pv("measured DRAM bandwidth", "K5000m", 64.96, "GB/s"),
    pv("measured DRAM bandwidth", "K20c", 157.89, "GB/s"),
    pv("theoretical limit, 152 B/node", "K5000m", 459.0, "MLUPS"),
    pv("theoretical limit, 152 B/node", "K20c", 1115.0, "MLUPS"),
    pv("theoretical limit, 168 B/node", "K5000m", 415.0, "MLUPS"),
    pv("theoretical limit, 168 B/node", "K20c", 1009.0, "MLUPS"),
    pv("peak solver throughput", "K5000m", 420.0, "MLUPS"),
    pv("peak solver throughput", "K20c", 1036.0, "MLUPS"),
    pv("misaligned/aligned read bandwidth", "K5000m", 0.99, "ratio"),
    pv("misaligned/aligned write bandwidth", "K5000m", 0.96, "ratio"),
    pv("misaligned/aligned read bandwidth, no read-only cache", "K20c", 0.88, "ratio"),
    pv("iteration-time jitter peak, 192^3", "K5000m", 11.71, "Hz"),
];

/// Printed next to every host measurement.
pub const NON_REPRODUCIBILITY_STATEMENT: &str = "The published GPU figures (420 MLUPS on a K5000m, \
1036 MLUPS on a K20c, 88-99% misaligned/aligned bandwidth ratios, iteration-time jitter near 11 Hz) \
are hardware measurements and are not reproduced here as numbers. This harness reproduces the \
measurement methods on the host and reports host values next to the published ones.";

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn traffic_model_defaults() {
        assert_eq!(bytes_per_node(4, false), 152);
        assert_eq!(bytes_per_node(4, true), 168);
        assert_eq!(bytes_per_node(8, false), 304);
    }

    #[test]
    fn peak_is_linear_and_inverse() {
        let a = theoretical_peak(1e10, 152.0).unwrap();
        assert_eq!(theoretical_peak(2e10, 152.0).unwrap(), 2.0 * a);
        assert_eq!(theoretical_peak(1e10, 304.0).unwrap(), a / 2.0);
        assert!(theoretical_peak(0.0, 152.0).is_err());
        assert!(theoretical_peak(1.0, -1.0).is_err());
    }

    #[test]
    fn both_interpretations_are_reported() {
        let p = theoretical_peak_both(64.96, 152.0).unwrap();
        assert!((p.mlups_binary - 459.0).abs() < 1.0);
        assert!((p.mlups_decimal - 427.4).abs() < 0.1);
    }

    #[test]
    fn mlups_example() {
        let m = mlups(128 * 128 * 128, 0.002097152).unwrap();
        assert!((m - 1000.0).abs() < 1e-9);
        assert!(mlups(10, 0.0).is_err());
    }

    #[test]
    fn statistics_use_population_sigma() {
        // rates 1 and 3 MLUPS for a 1e6 node domain
        let (mean, std) = mlups_statistics(1_000_000, &[1.0, 1.0 / 3.0]).unwrap();
        assert!((mean - 2.0).abs() < 1e-12);
        assert!((std - 1.0).abs() < 1e-12);
        assert!(matches!(mlups_statistics(10, &[1.0, -1.0]), Err(BenchError::NonPositiveTime { index: 1, .. })));
    }

    #[test]
    fn misaligned_fraction_against_enumeration() {
        for (nx, ny, nz) in [(2, 2, 2), (5, 3, 4), (9, 1, 2), (16, 16, 16)] {
            let dims = DomainDims::new(nx, ny, nz).unwrap();
            let mut inside = 0;
            let mut total = 0;
            for e in VELOCITIES.iter().filter(|e| e[0] != 0) {
                for z in 0..nz as isize {
                    for y in 0..ny as isize {
                        for x in 0..nx as isize {
                            total += 1;
                            if dims.contains(x - e[0] as isize, y - e[1] as isize, z - e[2] as isize) {
                                inside += 1;
                            }
                        }
                    }
                }
            }
            assert_eq!(count_misaligned_fraction(dims), inside as f64 / total as f64);
        }
    }

    #[test]
    fn misaligned_fraction_settles_as_x_grows() {
        let f = |nx| count_misaligned_fraction(DomainDims::new(nx, 16, 16).unwrap());
        let limit = (2.0 * 256.0 + 8.0 * 240.0) / (10.0 * 256.0);
        assert!((f(4096) - limit).abs() < 1e-3);
        assert!(f(64) < f(256) && f(256) < f(4096));
    }

    #[test]
    fn too_few_iterations_rejected() {
        let c = SimConfig::cavity(8).unwrap();
        assert!(matches!(measure_mlups(&c, 0, 9), Err(BenchError::TooFewIterations { got: 9, min: 10 })));
        assert!(BenchRecord::from_times(&c, 0, vec![1e-3; 9]).is_err());
    }

    #[test]
    fn coarse_timer_is_flagged() {
        let c = SimConfig::cavity(8).unwrap();
        let mut r = BenchRecord::from_times(&c, 0, vec![1e-3; 10]).unwrap();
        r.check_timer(1e-6);
        assert!(r.warning.is_none());
        r.check_timer(2e-5);
        assert!(r.warning.is_some());
    }

    #[test]
    fn equivalence_check_passes_for_all_strategies() {
        let mut config = SimConfig::cavity(9).unwrap();
        config.poison_check = true;
        let strategies = [StreamStrategy::direct(), StreamStrategy::tile(4), StreamStrategy::lane(3), StreamStrategy::lane(32)];
        for ordering in Ordering::ALL {
            config.ordering = ordering;
            for precision in [Precision::Single, Precision::Double] {
                config.precision = precision;
                assert_eq!(check_equivalence(&config, &strategies).unwrap(), None);
            }
        }
    }
}
