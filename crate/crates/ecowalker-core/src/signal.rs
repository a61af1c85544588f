//! Signal plumbing for the gait pipeline: resampling, zero-phase low-pass
//! filtering, numerical gradients, touch-down segmentation, and gait-cycle
//! averaging onto a common 0-100 %GC grid.

pub mod butter;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use butter::{butter_lowpass, FilterError, Sos};

#[derive(Debug, Error, PartialEq)]
pub enum SignalError {
    #[error("signal '{0}' has mismatched time/value lengths")]
    LengthMismatch(String),
    #[error("signal '{0}' has non-increasing sample times at index {1}")]
    NonMonotonicTime(String, usize),
    #[error("signal '{0}' contains a non-finite value at index {1}")]
    NonFinite(String, usize),
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error("signal '{0}' is not uniformly sampled")]
    NonUniform(String),
    #[error("filter error: {0}")]
    Filter(#[from] FilterError),
    #[error("no complete gait cycles in the provided touch-downs")]
    NoCompleteCycles,
}

/// A named, unit-carrying time series with strictly increasing sample times.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub name: String,
    pub unit: String,
    pub t: Vec<f64>,
    pub values: Vec<f64>,
}

impl Signal {
    pub fn new(
        name: impl Into<String>,
        unit: impl Into<String>,
        t: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<Signal, SignalError> {
        let sig = Signal { name: name.into(), unit: unit.into(), t, values };
        sig.validate()?;
        Ok(sig)
    }

    pub fn validate(&self) -> Result<(), SignalError> {
        if self.t.len() != self.values.len() {
            return Err(SignalError::LengthMismatch(self.name.clone()));
        }
        for i in 1..self.t.len() {
            if !(self.t[i] > self.t[i - 1]) {
                return Err(SignalError::NonMonotonicTime(self.name.clone(), i));
            }
        }
        for (i, v) in self.values.iter().enumerate() {
            if !v.is_finite() {
                return Err(SignalError::NonFinite(self.name.clone(), i));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Sample interval if uniformly sampled (1e-9 relative tolerance).
    pub fn uniform_dt(&self) -> Option<f64> {
        if self.len() < 2 {
            return None;
        }
        let dt = self.t[1] - self.t[0];
        for i in 1..self.len() {
            let step = self.t[i] - self.t[i - 1];
            if (step - dt).abs() > 1e-9 * dt.max(1e-12) {
                return None;
            }
        }
        Some(dt)
    }

    /// Linear interpolation at time `tq`, clamped to the signal span.
    pub fn interp_at(&self, tq: f64) -> f64 {
        let t = &self.t;
        let v = &self.values;
        if tq <= t[0] {
            return v[0];
        }
        if tq >= t[t.len() - 1] {
            return v[v.len() - 1];
        }
        let mut hi = t.partition_point(|&x| x < tq);
        if hi == 0 {
            hi = 1;
        }
        let lo = hi - 1;
        let w = (tq - t[lo]) / (t[hi] - t[lo]);
        v[lo] + w * (v[hi] - v[lo])
    }

    /// Index of the first sample at or after `tq`.
    pub fn index_at_or_after(&self, tq: f64) -> usize {
        self.t.partition_point(|&x| x < tq)
    }
}

/// Linear resampling onto a uniform grid at `rate` Hz, clamped to the
/// original time span.
pub fn resample(sig: &Signal, rate: f64) -> Result<Signal, SignalError> {
    if sig.len() < 2 {
        return Err(SignalError::TooFewSamples { need: 2, got: sig.len() });
    }
    let t0 = sig.t[0];
    let t_end = sig.t[sig.len() - 1];
    let dt = 1.0 / rate;
    let n = ((t_end - t0) / dt * (1.0 + 1e-12)).floor() as usize + 1;
    let mut t = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for k in 0..n {
        let tk = t0 + k as f64 * dt;
        t.push(tk);
        v.push(sig.interp_at(tk));
    }
    Signal::new(sig.name.clone(), sig.unit.clone(), t, v)
}

/// Zero-phase Butterworth low-pass of a uniformly sampled signal.
pub fn lowpass_zero_phase(sig: &Signal, order: usize, cutoff_hz: f64) -> Result<Signal, SignalError> {
    let dt = sig.uniform_dt().ok_or_else(|| SignalError::NonUniform(sig.name.clone()))?;
    let fs = 1.0 / dt;
    let sos = butter_lowpass(order, cutoff_hz, fs)?;
    let filtered = sos.filtfilt(&sig.values)?;
    Ok(Signal { name: sig.name.clone(), unit: sig.unit.clone(), t: sig.t.clone(), values: filtered })
}

/// Second-order-accurate gradient: central differences in the interior,
/// one-sided second-order stencils at the edges. Requires uniform sampling.
pub fn gradient(sig: &Signal) -> Result<Signal, SignalError> {
    let dt = sig.uniform_dt().ok_or_else(|| SignalError::NonUniform(sig.name.clone()))?;
    let v = &sig.values;
    let n = v.len();
    if n < 3 {
        return Err(SignalError::TooFewSamples { need: 3, got: n });
    }
    let mut g = vec![0.0; n];
    g[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for i in 1..n - 1 {
        g[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    g[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    Ok(Signal {
        name: format!("d_{}", sig.name),
        unit: format!("{}/s", sig.unit),
        t: sig.t.clone(),
        values: g,
    })
}

/// Touch-down detector settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TouchdownConfig {
    /// Gradient magnitude below which the signal counts as a swing plateau,
    /// rad/s.
    pub plateau_threshold: f64,
    /// Minimum plateau duration, s.
    pub plateau_min_duration: f64,
    /// Gradient magnitude that marks the touch-down, rad/s.
    pub activity_threshold: f64,
    /// Extra low-pass cutoff applied to the gradient used for plateau
    /// qualification only (0 disables). Touch-down timing always uses the
    /// unsmoothed gradient.
    pub qualifier_cutoff_hz: f64,
    /// Activity bursts shorter than this inside a plateau are absorbed into
    /// the plateau instead of splitting it, s.
    pub merge_gap: f64,
}

impl Default for TouchdownConfig {
    fn default() -> Self {
        TouchdownConfig {
            plateau_threshold: 0.2,
            plateau_min_duration: 0.1,
            activity_threshold: 1.0,
            qualifier_cutoff_hz: 8.0,
            merge_gap: 0.06,
        }
    }
}

/// Touch-down detection outcome. An empty `times` with a diagnostic means
/// no swing plateaus were found.
#[derive(Debug, Clone, PartialEq)]
pub struct Touchdowns {
    pub times: Vec<f64>,
    pub diagnostic: Option<String>,
}

/// Detects touch-downs on a filtered, uniformly sampled ankle angle: for
/// each swing plateau, the first subsequent sample whose gradient magnitude
/// exceeds the activity threshold.
pub fn detect_touchdowns(sig: &Signal, cfg: &TouchdownConfig) -> Result<Touchdowns, SignalError> {
    let dt = sig.uniform_dt().ok_or_else(|| SignalError::NonUniform(sig.name.clone()))?;
    let grad = gradient(sig)?;
    let qual: Vec<f64> = if cfg.qualifier_cutoff_hz > 0.0 {
        let sos = butter_lowpass(2, cfg.qualifier_cutoff_hz, 1.0 / dt)?;
        sos.filtfilt(&grad.values)?
    } else {
        grad.values.clone()
    };

    let min_len = ((cfg.plateau_min_duration / dt).round() as usize).max(1);
    let gap_len = (cfg.merge_gap / dt).round() as usize;
    let n = qual.len();

    // Quiet mask with short activity bursts closed over, so gradient noise
    // cannot fragment one swing plateau into several.
    let mut quiet: Vec<bool> = qual.iter().map(|g| g.abs() < cfg.plateau_threshold).collect();
    let mut i = 0;
    while i < n {
        if !quiet[i] {
            let start = i;
            while i < n && !quiet[i] {
                i += 1;
            }
            let interior = start > 0 && i < n;
            if interior && i - start < gap_len {
                quiet[start..i].fill(true);
            }
        } else {
            i += 1;
        }
    }

    let mut times = Vec::new();
    let mut any_plateau = false;
    let mut i = 0;
    while i < n {
        if quiet[i] {
            let start = i;
            while i < n && quiet[i] {
                i += 1;
            }
            if i - start >= min_len {
                any_plateau = true;
                // First activity-threshold exceedance after the plateau.
                let mut j = i;
                while j < n && grad.values[j].abs() < cfg.activity_threshold {
                    j += 1;
                }
                if j < n {
                    times.push(sig.t[j]);
                    i = j + 1;
                }
            }
        } else {
            i += 1;
        }
    }
    let diagnostic =
        (!any_plateau).then(|| "no swing plateaus found below the plateau threshold".to_string());
    Ok(Touchdowns { times, diagnostic })
}

/// Per-signal cycle ensemble on the common %GC grid.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleStats {
    pub name: String,
    pub unit: String,
    /// One row per cycle, resampled onto the grid.
    pub cycles: Vec<Vec<f64>>,
    pub mean: Vec<f64>,
    pub sd: Vec<f64>,
}

/// Touch-down segmented, time-normalized cycle data. The grid spans
/// 0-100 %GC with 1001 points and is identical across signals.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleSet {
    pub touchdowns: Vec<f64>,
    pub grid: Vec<f64>,
    pub signals: Vec<CycleStats>,
}

pub const GC_GRID_POINTS: usize = 1001;

/// %GC grid with [`GC_GRID_POINTS`] points.
pub fn gc_grid() -> Vec<f64> {
    (0..GC_GRID_POINTS).map(|i| i as f64 * 100.0 / (GC_GRID_POINTS - 1) as f64).collect()
}

/// Segments each signal into touch-down-to-touch-down cycles, normalizes
/// each cycle onto the %GC grid, and computes pointwise mean and SD curves.
pub fn average_cycles(signals: &[Signal], touchdowns: &[f64]) -> Result<CycleSet, SignalError> {
    if touchdowns.len() < 2 {
        return Err(SignalError::NoCompleteCycles);
    }
    let grid = gc_grid();
    let mut out = Vec::with_capacity(signals.len());
    for sig in signals {
        sig.validate()?;
        let mut cycles = Vec::with_capacity(touchdowns.len() - 1);
        for w in touchdowns.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let row: Vec<f64> = grid
                .iter()
                .map(|&g| sig.interp_at(t0 + (t1 - t0) * g / 100.0))
                .collect();
            cycles.push(row);
        }
        let n = cycles.len();
        let m = grid.len();
        let mut mean = vec![0.0; m];
        let mut sd = vec![0.0; m];
        for row in &cycles {
            for (acc, v) in mean.iter_mut().zip(row) {
                *acc += v;
            }
        }
        for v in mean.iter_mut() {
            *v /= n as f64;
        }
        if n > 1 {
            for row in &cycles {
                for ((acc, v), mu) in sd.iter_mut().zip(row).zip(&mean) {
                    *acc += (v - mu) * (v - mu);
                }
            }
            for v in sd.iter_mut() {
                *v = (*v / (n as f64 - 1.0)).sqrt();
            }
        }
        out.push(CycleStats { name: sig.name.clone(), unit: sig.unit.clone(), cycles, mean, sd });
    }
    Ok(CycleSet { touchdowns: touchdowns.to_vec(), grid, signals: out })
}
