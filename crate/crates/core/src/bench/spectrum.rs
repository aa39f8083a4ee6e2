use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use super::BenchError;

pub const MIN_SPECTRUM_SAMPLES: usize = 64;

/// One-sided amplitude spectrum of an iteration-time series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumResult {
    /// Bin centres `k fs / N`, `k = 0..=N/2`.
    pub frequencies: Vec<f64>,
    /// Sinusoid amplitude per bin, in seconds.
    pub magnitudes: Vec<f64>,
    /// Largest non-DC bin; `None` for a series with no variation.
    pub peak_frequency_hz: Option<f64>,
    /// Taken as `1 / meanIterationSeconds`.
    pub sample_rate_hz: f64,
    pub bin_width_hz: f64,
}

/// DFT of the mean-subtracted series. Sample `k` is placed at time
/// `k * mean_iteration_seconds`.
pub fn iteration_time_spectrum(
    per_iteration_seconds: &[f64],
    mean_iteration_seconds: f64,
) -> Result<SpectrumResult, BenchError> {
    let n = per_iteration_seconds.len();
    if n < MIN_SPECTRUM_SAMPLES {
        return Err(BenchError::TooFewSamples { got: n, min: MIN_SPECTRUM_SAMPLES });
    }
    if !(mean_iteration_seconds > 0.0) {
        return Err(BenchError::NonPositive { what: "mean iteration time", value: mean_iteration_seconds });
    }
    let fs = 1.0 / mean_iteration_seconds;
    let mean = per_iteration_seconds.iter().sum::<f64>() / n as f64;
    let constant = per_iteration_seconds.iter().all(|&t| t == per_iteration_seconds[0]);
    let mut buf: Vec<Complex<f64>> = per_iteration_seconds
        .iter()
        .map(|&t| Complex::new(if constant { 0.0 } else { t - mean }, 0.0))
        .collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);

    let half = n / 2;
    let frequencies: Vec<f64> = (0..=half).map(|k| k as f64 * fs / n as f64).collect();
    let magnitudes: Vec<f64> = (0..=half)
        .map(|k| {
            let scale = if k == 0 || 2 * k == n { 1.0 } else { 2.0 };
            scale * buf[k].norm() / n as f64
        })
        .collect();
    let peak = (1..=half).max_by(|&a, &b| magnitudes[a].total_cmp(&magnitudes[b]).then(b.cmp(&a)));
    let peak_frequency_hz = peak.filter(|&k| magnitudes[k] > 0.0).map(|k| frequencies[k]);
    Ok(SpectrumResult { frequencies, magnitudes, peak_frequency_hz, sample_rate_hz: fs, bin_width_hz: fs / n as f64 })
}
