//! Sliding-window Fourier analysis.
//!
//! Each window of `N = T / Δt` samples is transformed as
//! `f̂(k) = (1/N) Σ_j f(jΔt) e^{−2iπ kj/N}` with a rectangular window. Power
//! at bin `k` is `|f̂(k)|²` and sits at `1000 k / T` Hz for `T` in ms.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrator::Trajectory;
use crate::model::State;
use crate::walk::{u_bar, E_CURRENT_FACTOR};

const WINDOWS_PER_TASK: usize = 256;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SpectralError {
    #[error("empty input")]
    Empty,
    #[error("invalid spectral config: {0}")]
    InvalidConfig(String),
    #[error("signal covers [{have_from}, {have_to}] ms but the analysis needs [{need_from}, {need_to}] ms")]
    NotCovered {
        have_from: f64,
        have_to: f64,
        need_from: f64,
        need_to: f64,
    },
    #[error("signal is not uniformly sampled at {0} ms")]
    NonUniform(f64),
    #[error("band [{lo}, {hi}] Hz contains no positive-frequency bin")]
    EmptyBand { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    /// Window length T, ms.
    pub window_ms: f64,
    /// Shift between successive window starts, ms.
    pub shift_ms: f64,
    /// First window start, ms.
    pub t0: f64,
    /// No window extends past this, ms.
    pub t1: f64,
    /// Sampling step of the signal, ms.
    pub sample_dt: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            window_ms: 200.0,
            shift_ms: 0.1,
            t0: 500.0,
            t1: 2500.0,
            sample_dt: 0.1,
        }
    }
}

/// Integer layout of an analysis: window length, shift and span in samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowLayout {
    pub n: usize,
    pub shift: usize,
    pub span: usize,
    pub n_windows: usize,
}

fn as_count(x: f64, what: &str) -> Result<usize, SpectralError> {
    let r = x.round();
    if r.is_nan() || r < 1.0 || (x - r).abs() > 1e-6 * r.max(1.0) {
        return Err(SpectralError::InvalidConfig(format!(
            "{what} must be a positive whole number of samples, got {x}"
        )));
    }
    Ok(r as usize)
}

impl SpectralConfig {
    pub fn layout(&self) -> Result<WindowLayout, SpectralError> {
        if !(self.sample_dt > 0.0 && self.sample_dt.is_finite()) {
            return Err(SpectralError::InvalidConfig(format!(
                "sample_dt must be positive, got {}",
                self.sample_dt
            )));
        }
        let n = as_count(self.window_ms / self.sample_dt, "window/sample_dt")?;
        let shift = as_count(self.shift_ms / self.sample_dt, "shift/sample_dt")?;
        let span_f = (self.t1 - self.t0) / self.sample_dt;
        if span_f.is_nan() || span_f.round() < n as f64 {
            return Err(SpectralError::InvalidConfig(format!(
                "window {} ms is longer than the span [{}, {}]",
                self.window_ms, self.t0, self.t1
            )));
        }
        let span = span_f.round() as usize;
        Ok(WindowLayout {
            n,
            shift,
            span,
            n_windows: (span - n) / shift + 1,
        })
    }

    /// Frequency of bin `k` in Hz.
    pub fn bin_hz(&self, k: usize) -> f64 {
        1000.0 * k as f64 / self.window_ms
    }
}

/// Which quantity of a run to analyse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    U,
    V,
    UBar,
    ECurrent,
}

impl Channel {
    pub fn extract(&self, s: &State) -> f64 {
        match self {
            Channel::U => s.u,
            Channel::V => s.v,
            Channel::UBar => u_bar(s.u),
            Channel::ECurrent => E_CURRENT_FACTOR * u_bar(s.u),
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "u" => Some(Channel::U),
            "v" => Some(Channel::V),
            "u_bar" => Some(Channel::UBar),
            "e_current" | "e_current_3p5" => Some(Channel::ECurrent),
            _ => None,
        }
    }
}

/// A uniformly sampled scalar series.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub start_ms: f64,
    pub dt_ms: f64,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(start_ms: f64, dt_ms: f64, values: Vec<f64>) -> Self {
        Self {
            start_ms,
            dt_ms,
            values,
        }
    }

    /// Build from time stamps, checking that they are evenly spaced.
    pub fn from_samples(times: &[f64], values: Vec<f64>) -> Result<Self, SpectralError> {
        if times.is_empty() || times.len() != values.len() {
            return Err(SpectralError::Empty);
        }
        if times.len() == 1 {
            return Ok(Self::new(times[0], f64::NAN, values));
        }
        let dt = (times[times.len() - 1] - times[0]) / (times.len() - 1) as f64;
        let tol = 1e-6 * dt;
        for (i, t) in times.iter().enumerate() {
            if (t - (times[0] + i as f64 * dt)).abs() > tol {
                return Err(SpectralError::NonUniform(dt));
            }
        }
        Ok(Self::new(times[0], dt, values))
    }

    pub fn from_states(
        times: &[f64],
        states: &[State],
        channel: Channel,
    ) -> Result<Self, SpectralError> {
        Self::from_samples(times, states.iter().map(|s| channel.extract(s)).collect())
    }

    pub fn from_trajectory(traj: &Trajectory, channel: Channel) -> Result<Self, SpectralError> {
        Self::from_states(&traj.times, &traj.states, channel)
    }

    /// Keep every m-th sample so that the step becomes `dt_ms`; `dt_ms` must
    /// be a whole multiple of the current step.
    pub fn decimate_to(&self, dt_ms: f64) -> Result<Self, SpectralError> {
        if self.values.len() < 2 {
            return Ok(self.clone());
        }
        let ratio = dt_ms / self.dt_ms;
        let m = ratio.round();
        if m.is_nan() || m < 1.0 || (ratio - m).abs() > 1e-6 * m {
            return Err(SpectralError::InvalidConfig(format!(
                "cannot resample a {} ms signal to {dt_ms} ms",
                self.dt_ms
            )));
        }
        Ok(Self::new(
            self.start_ms,
            self.dt_ms * m,
            self.values.iter().step_by(m as usize).copied().collect(),
        ))
    }

    fn end_ms(&self) -> f64 {
        self.start_ms + (self.values.len().saturating_sub(1)) as f64 * self.dt_ms
    }

    /// Sample index of the first window and the layout, after checking
    /// that the signal matches the configured sampling and covers the span.
    fn locate(&self, cfg: &SpectralConfig) -> Result<(usize, WindowLayout), SpectralError> {
        if self.values.is_empty() {
            return Err(SpectralError::Empty);
        }
        let layout = cfg.layout()?;
        if self.values.len() > 1 && (self.dt_ms - cfg.sample_dt).abs() > 1e-6 * cfg.sample_dt {
            return Err(SpectralError::InvalidConfig(format!(
                "signal is sampled every {} ms, config expects {}",
                self.dt_ms, cfg.sample_dt
            )));
        }
        let offset = (cfg.t0 - self.start_ms) / cfg.sample_dt;
        let first = offset.round();
        let last_needed = first as i64 + layout.span as i64 - 1;
        if first < 0.0 || (offset - first).abs() > 1e-6 || last_needed >= self.values.len() as i64 {
            return Err(SpectralError::NotCovered {
                have_from: self.start_ms,
                have_to: self.end_ms(),
                need_from: cfg.t0,
                need_to: cfg.t1,
            });
        }
        Ok((first as usize, layout))
    }
}

/// Cached FFT plan for a fixed window length.
#[derive(Clone)]
pub struct WindowTransform {
    n: usize,
    fft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for WindowTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WindowTransform")
            .field("n", &self.n)
            .finish()
    }
}

impl WindowTransform {
    pub fn new(n: usize) -> Self {
        let fft = FftPlanner::new().plan_fft_forward(n.max(1));
        Self { n, fft }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Normalised coefficients of `samples` (length must equal `len()`).
    pub fn transform(&self, samples: &[f64]) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        self.fft.process(&mut buf);
        let scale = 1.0 / self.n as f64;
        buf.iter_mut().for_each(|c| *c *= scale);
        buf
    }

    /// `|f̂(k)|²` for `k < bins`.
    fn power(&self, samples: &[f64], bins: usize) -> Vec<f64> {
        self.transform(samples)[..bins]
            .iter()
            .map(|c| c.norm_sqr())
            .collect()
    }
}

/// `f̂(k) = (1/N) Σ_j x_j e^{−2iπ kj/N}`, k = 0..N−1.
pub fn window_dft(samples: &[f64]) -> Result<Vec<Complex64>, SpectralError> {
    if samples.is_empty() {
        return Err(SpectralError::Empty);
    }
    Ok(WindowTransform::new(samples.len()).transform(samples))
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

/// Per-bin mean of rows, accumulated in row order.
fn column_means<'a>(rows: impl Iterator<Item = &'a [f64]>, bins: usize) -> Vec<f64> {
    let mut acc = vec![Compensated::default(); bins];
    let mut count = 0usize;
    for row in rows {
        for (a, &x) in acc.iter_mut().zip(row) {
            a.add(x);
        }
        count += 1;
    }
    acc.iter().map(|a| a.value() / count as f64).collect()
}

/// Power rows of all windows, in window order, for the first `bins` bins.
fn window_powers(
    signal: &Signal,
    cfg: &SpectralConfig,
    bins: usize,
) -> Result<(WindowLayout, Vec<Vec<f64>>), SpectralError> {
    let (first, layout) = signal.locate(cfg)?;
    let plan = WindowTransform::new(layout.n);
    let starts: Vec<usize> = (0..layout.n_windows)
        .map(|w| first + w * layout.shift)
        .collect();
    let rows = starts
        .par_chunks(WINDOWS_PER_TASK)
        .flat_map_iter(|chunk| {
            chunk
                .iter()
                .map(|&s| plan.power(&signal.values[s..s + layout.n], bins))
                .collect::<Vec<_>>()
        })
        .collect();
    Ok((layout, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsdResult {
    pub freqs_hz: Vec<f64>,
    pub power: Vec<f64>,
    pub n_windows: usize,
}

impl PsdResult {
    /// Indices of bins with `lo ≤ f ≤ hi`, `k ≥ 1` and `k ≤ N/2`.
    fn band_bins(&self, lo: f64, hi: f64) -> impl Iterator<Item = usize> + '_ {
        let half = self.freqs_hz.len() / 2;
        (1..=half).filter(move |&k| self.freqs_hz[k] >= lo && self.freqs_hz[k] <= hi)
    }

    /// Number of positive-frequency bins in `[lo, hi]` with at least
    /// `fraction` of the band's peak power.
    pub fn bins_above(&self, fraction: f64, band: [f64; 2]) -> usize {
        let peak = self
            .band_bins(band[0], band[1])
            .map(|k| self.power[k])
            .fold(0.0, f64::max);
        self.band_bins(band[0], band[1])
            .filter(|&k| self.power[k] >= fraction * peak)
            .count()
    }
}

/// Mean power per bin over all windows, all N bins kept.
pub fn averaged_psd(signal: &Signal, cfg: &SpectralConfig) -> Result<PsdResult, SpectralError> {
    let n = cfg.layout()?.n;
    let (layout, rows) = window_powers(signal, cfg, n)?;
    Ok(PsdResult {
        freqs_hz: (0..n).map(|k| cfg.bin_hz(k)).collect(),
        power: column_means(rows.iter().map(Vec::as_slice), n),
        n_windows: layout.n_windows,
    })
}

/// Per-window power for bins `0..=N/2`. Bins above `N/2` mirror these for a
/// real signal and are not stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrogram {
    pub window_starts_ms: Vec<f64>,
    pub freqs_hz: Vec<f64>,
    /// One row per window.
    pub power: Vec<Vec<f64>>,
}

impl Spectrogram {
    /// Per-bin mean across windows, accumulated exactly like
    /// [`averaged_psd`].
    pub fn mean_power(&self) -> Vec<f64> {
        column_means(self.power.iter().map(Vec::as_slice), self.freqs_hz.len())
    }

    /// Frequency of the largest bin (k ≥ 1) in each window.
    pub fn peak_track(&self) -> Vec<f64> {
        self.power
            .iter()
            .map(|row| {
                let k = (1..row.len()).fold(1, |best, k| if row[k] > row[best] { k } else { best });
                self.freqs_hz[k]
            })
            .collect()
    }
}

pub fn spectrogram(signal: &Signal, cfg: &SpectralConfig) -> Result<Spectrogram, SpectralError> {
    let n = cfg.layout()?.n;
    let bins = n / 2 + 1;
    let (layout, power) = window_powers(signal, cfg, bins)?;
    Ok(Spectrogram {
        window_starts_ms: (0..layout.n_windows)
            .map(|w| cfg.t0 + (w * layout.shift) as f64 * cfg.sample_dt)
            .collect(),
        freqs_hz: (0..bins).map(|k| cfg.bin_hz(k)).collect(),
        power,
    })
}

/// Frequency of the strongest positive-frequency bin inside `band`; ties go
/// to the lower frequency.
pub fn peak_frequency(psd: &PsdResult, band: [f64; 2]) -> Result<f64, SpectralError> {
    let best = psd
        .band_bins(band[0], band[1])
        .fold(None::<usize>, |best, k| match best {
            Some(b) if psd.power[b] >= psd.power[k] => Some(b),
            _ => Some(k),
        });
    best.map(|k| psd.freqs_hz[k])
        .ok_or(SpectralError::EmptyBand {
            lo: band[0],
            hi: band[1],
        })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn decimation_keeps_every_mth_sample() {
        let s = Signal::new(0.0, 0.01, (0..101).map(f64::from).collect());
        let d = s.decimate_to(0.1).unwrap();
        assert_eq!(
            d.values,
            (0..11).map(|i| f64::from(10 * i)).collect::<Vec<_>>()
        );
        assert!((d.dt_ms - 0.1).abs() < 1e-15);
        assert!(s.decimate_to(0.015).is_err());
        assert!(s.decimate_to(0.005).is_err());
    }

    fn direct_dft(x: &[f64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, &xj) in x.iter().enumerate() {
                    let ang = -2.0 * PI * ((k * j) % n) as f64 / n as f64;
                    acc += xj * Complex64::new(ang.cos(), ang.sin());
                }
                acc / n as f64
            })
            .collect()
    }

    #[test]
    fn dc_only() {
        let c = window_dft(&[2.5; 10]).unwrap();
        assert!((c[0].re - 2.5).abs() < 1e-12);
        assert!(c[1..].iter().all(|z| z.norm() < 1e-12));
        assert_eq!(window_dft(&[]), Err(SpectralError::Empty));
    }

    #[test]
    fn single_cosine() {
        let n = 64;
        let m = 5;
        let x: Vec<f64> = (0..n)
            .map(|j| (2.0 * PI * (m * j) as f64 / n as f64).cos())
            .collect();
        let c = window_dft(&x).unwrap();
        for (k, z) in c.iter().enumerate() {
            let expect = if k == m || k == n - m { 0.5 } else { 0.0 };
            assert!((z.norm() - expect).abs() < 1e-12, "bin {k}: {}", z.norm());
        }
    }

    #[test]
    fn matches_direct_sum() {
        let x = [
            0.3, -1.2, 0.7, 2.2, -0.1, 0.0, 1.5, -0.8, 0.9, 0.4, -2.0, 0.25, 1.1, -0.6, 0.05, 0.33,
        ];
        let fast = window_dft(&x).unwrap();
        let slow = direct_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn layout_defaults() {
        let l = SpectralConfig::default().layout().unwrap();
        assert_eq!(l.n, 2000);
        assert_eq!(l.shift, 1);
        assert_eq!(l.n_windows, 18001);
        assert_eq!(SpectralConfig::default().bin_hz(13), 65.0);
        let short = SpectralConfig {
            t1: 600.0,
            ..SpectralConfig::default()
        };
        assert!(short.layout().is_err());
        let odd = SpectralConfig {
            shift_ms: 0.15,
            ..SpectralConfig::default()
        };
        assert!(odd.layout().is_err());
    }

    #[test]
    fn coverage_is_checked() {
        let cfg = SpectralConfig {
            t0: 0.0,
            t1: 100.0,
            window_ms: 50.0,
            shift_ms: 10.0,
            sample_dt: 0.1,
        };
        let short = Signal::new(0.0, 0.1, vec![0.0; 500]);
        assert!(matches!(
            averaged_psd(&short, &cfg),
            Err(SpectralError::NotCovered { .. })
        ));
        let wrong_dt = Signal::new(0.0, 0.2, vec![0.0; 1001]);
        assert!(averaged_psd(&wrong_dt, &cfg).is_err());
        let ok = Signal::new(0.0, 0.1, vec![1.0; 1001]);
        let psd = averaged_psd(&ok, &cfg).unwrap();
        assert_eq!(psd.n_windows, 6);
    }

    #[test]
    fn non_uniform_times_rejected() {
        assert!(matches!(
            Signal::from_samples(&[0.0, 0.1, 0.25], vec![0.0; 3]),
            Err(SpectralError::NonUniform(_))
        ));
    }

    #[test]
    fn peak_tie_goes_low() {
        let psd = PsdResult {
            freqs_hz: (0..40).map(|k| 5.0 * k as f64).collect(),
            power: vec![1.0; 40],
            n_windows: 1,
        };
        assert_eq!(peak_frequency(&psd, [30.0, 90.0]).unwrap(), 30.0);
        assert!(peak_frequency(&psd, [1.0, 4.0]).is_err());
        assert!(peak_frequency(&psd, [0.0, 0.0]).is_err());
    }
}
