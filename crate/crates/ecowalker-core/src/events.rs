//! Kinematic gait-event detectors: start of ankle plantar flexion (SAPF),
//! toe-off (TO), leading-leg touch-down (LLTD), start of hip/knee flexion
//! (SHF/SKF), and the step-to-step transition window (vmin/vmax of the CoM
//! vertical velocity).
//!
//! All detectors are pure functions over filtered per-cycle signal windows
//! and operate on joint angles only; contact flags are never consulted.
//! Gradients are local second-order differences within the window.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::Side;
use crate::signal::{gradient, Signal, SignalError};

/// Gradient threshold shared by the LLTD/SHF/SKF detectors, rad/s.
pub const GRADIENT_THRESHOLD: f64 = 1.0;
/// Search window after the most-negative ankle gradient peak for TO, s.
pub const TO_SEARCH_WINDOW: f64 = 0.040;
/// SKF search window before SHF, s.
pub const SKF_WINDOW_BEFORE: f64 = 0.2;
/// SKF search window after SHF, s.
pub const SKF_WINDOW_AFTER: f64 = 0.1;

#[derive(Debug, Error, PartialEq)]
pub enum EventError {
    #[error("window [{0}, {1}] selects fewer than 3 samples")]
    WindowTooSmall(f64, f64),
    #[error("no extremum inside the window")]
    NoExtremum,
    #[error("no negative gradient peak inside the window")]
    NoNegativePeak,
    #[error("no |gradient| threshold crossing before {0} s")]
    NoCrossing(f64),
    #[error("no gradient exceedance inside the search window")]
    NoExceedance,
    #[error("no local maximum after the velocity minimum")]
    NoPeakStructure,
    #[error("zero-magnitude velocity vector has no direction")]
    ZeroMagnitude,
    #[error(transparent)]
    Signal(#[from] SignalError),
}

/// Extracts the window as a sub-signal (at least 3 samples).
fn slice_window(sig: &Signal, window: (f64, f64)) -> Result<Signal, EventError> {
    let i0 = sig.index_at_or_after(window.0);
    let i1 = sig.t.partition_point(|&x| x <= window.1);
    if i1 <= i0 || i1 - i0 < 3 {
        return Err(EventError::WindowTooSmall(window.0, window.1));
    }
    Ok(Signal {
        name: sig.name.clone(),
        unit: sig.unit.clone(),
        t: sig.t[i0..i1].to_vec(),
        values: sig.values[i0..i1].to_vec(),
    })
}

/// Start of ankle plantar flexion: the interior stance extremum of the
/// ankle angle before it reverses into plantar flexion.
pub fn detect_sapf(ankle: &Signal, window: (f64, f64)) -> Result<f64, EventError> {
    let w = slice_window(ankle, window)?;
    let mut imax = 0;
    for (i, v) in w.values.iter().enumerate() {
        if *v > w.values[imax] {
            imax = i;
        }
    }
    if imax == 0 || imax == w.len() - 1 {
        return Err(EventError::NoExtremum);
    }
    Ok(w.t[imax])
}

/// Toe-off: the minimum dorsiflexion angle within [`TO_SEARCH_WINDOW`]
/// after the most-negative peak of the ankle angle gradient.
pub fn detect_to(ankle: &Signal, window: (f64, f64)) -> Result<f64, EventError> {
    let w = slice_window(ankle, window)?;
    let g = gradient(&w)?;
    // Most-negative gradient peak. The floor rejects rounding noise on
    // flat signals; near-equal minima (constant-slope ramps) resolve to
    // the latest sample.
    let g_min = g.values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(g_min < -1e-9) {
        return Err(EventError::NoNegativePeak);
    }
    let tie = g_min + 1e-9 * g_min.abs().max(1.0);
    let mut ipeak = 0;
    for (i, v) in g.values.iter().enumerate() {
        if *v <= tie {
            ipeak = i;
        }
    }
    let t_end = w.t[ipeak] + TO_SEARCH_WINDOW;
    // Earliest sample reaching the minimum dorsiflexion in the window.
    let mut v_min = f64::INFINITY;
    let mut end = ipeak;
    for i in ipeak..w.len() {
        if w.t[i] > t_end {
            break;
        }
        v_min = v_min.min(w.values[i]);
        end = i;
    }
    let v_tie = v_min + 1e-9 * v_min.abs().max(1.0);
    for i in ipeak..=end {
        if w.values[i] <= v_tie {
            return Ok(w.t[i]);
        }
    }
    Ok(w.t[end])
}

/// Leading-leg touch-down: the latest upward crossing of the gradient
/// magnitude through [`GRADIENT_THRESHOLD`], strictly before the trailing
/// leg's toe-off.
pub fn detect_lltd(leading_ankle: &Signal, window: (f64, f64), t_to: f64) -> Result<f64, EventError> {
    let w = slice_window(leading_ankle, window)?;
    let g = gradient(&w)?;
    let mut latest = None;
    for i in 1..w.len() {
        if w.t[i] >= t_to {
            break;
        }
        if g.values[i - 1].abs() < GRADIENT_THRESHOLD && g.values[i].abs() >= GRADIENT_THRESHOLD {
            latest = Some(w.t[i]);
        }
    }
    latest.ok_or(EventError::NoCrossing(t_to))
}

/// Start of hip flexion: the first gradient exceedance above
/// [`GRADIENT_THRESHOLD`] after peak hip extension.
pub fn detect_shf(hip: &Signal, window: (f64, f64)) -> Result<f64, EventError> {
    let w = slice_window(hip, window)?;
    let g = gradient(&w)?;
    let mut imin = 0;
    for (i, v) in w.values.iter().enumerate() {
        if *v < w.values[imin] {
            imin = i;
        }
    }
    for i in imin..w.len() {
        if g.values[i] > GRADIENT_THRESHOLD {
            return Ok(w.t[i]);
        }
    }
    Err(EventError::NoExceedance)
}

/// Start of knee flexion: the first gradient exceedance above
/// [`GRADIENT_THRESHOLD`] inside `[t_shf - 0.2 s, t_shf + 0.1 s]`.
pub fn detect_skf(knee: &Signal, window: (f64, f64), t_shf: f64) -> Result<f64, EventError> {
    let lo = (t_shf - SKF_WINDOW_BEFORE).max(window.0);
    let hi = (t_shf + SKF_WINDOW_AFTER).min(window.1);
    let w = slice_window(knee, (lo, hi))?;
    let g = gradient(&w)?;
    for i in 0..w.len() {
        if g.values[i] > GRADIENT_THRESHOLD {
            return Ok(w.t[i]);
        }
    }
    Err(EventError::NoExceedance)
}

/// Step-to-step transition window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransitionWindow {
    /// Global minimum of the CoM vertical velocity.
    pub t_vmin: f64,
    /// Second local maximum after the minimum (or the sole one, flagged).
    pub t_vmax: f64,
    /// True when only one maximum existed and the fallback rule applied.
    pub single_peak_fallback: bool,
}

/// Finds the transition window on the CoM vertical velocity: the global
/// minimum, then the second local maximum after it (falling back to the
/// sole maximum with a flag).
pub fn detect_transition_window(
    com_vy: &Signal,
    window: (f64, f64),
) -> Result<TransitionWindow, EventError> {
    let w = slice_window(com_vy, window)?;
    let v = &w.values;
    let mut imin = 0;
    for (i, x) in v.iter().enumerate() {
        if *x < v[imin] {
            imin = i;
        }
    }
    // Local maxima after the minimum: strict rise then non-rise.
    let mut maxima = Vec::new();
    for i in (imin + 1).max(1)..v.len() - 1 {
        if v[i] > v[i - 1] && v[i] >= v[i + 1] {
            maxima.push(i);
        }
    }
    match maxima.len() {
        0 => Err(EventError::NoPeakStructure),
        1 => Ok(TransitionWindow {
            t_vmin: w.t[imin],
            t_vmax: w.t[maxima[0]],
            single_peak_fallback: true,
        }),
        _ => Ok(TransitionWindow {
            t_vmin: w.t[imin],
            t_vmax: w.t[maxima[1]],
            single_peak_fallback: false,
        }),
    }
}

/// Event time in seconds and in percent of the gait cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventTime {
    pub s: f64,
    pub pct: f64,
}

impl EventTime {
    pub fn from_cycle(t: f64, cycle_start: f64, cycle_duration: f64) -> EventTime {
        EventTime { s: t, pct: (t - cycle_start) / cycle_duration * 100.0 }
    }
}

/// All detected events of one gait cycle of one leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaitEventSet {
    pub cycle: usize,
    pub side: Side,
    pub cycle_start: f64,
    pub cycle_duration: f64,
    pub skf: EventTime,
    pub shf: EventTime,
    pub sapf: EventTime,
    pub lltd: EventTime,
    pub to: EventTime,
    pub vmin: EventTime,
    pub vmax: EventTime,
    /// `t_LLTD - t_SAPF` in %GC. Positive when the ankle unloads before the
    /// leading leg lands.
    pub dt_sapf_lltd_pct: f64,
    pub transition_fallback: bool,
}

#[derive(Debug, Error, PartialEq)]
pub enum EventSetError {
    #[error("event {name} at {pct} %GC outside [0, 100]")]
    OutOfCycle { name: &'static str, pct: f64 },
    #[error("vmin ({vmin} s) not before vmax ({vmax} s)")]
    TransitionOrder { vmin: f64, vmax: f64 },
}

impl GaitEventSet {
    pub fn validate(&self) -> Result<(), EventSetError> {
        let named = [
            ("skf", self.skf),
            ("shf", self.shf),
            ("sapf", self.sapf),
            ("lltd", self.lltd),
            ("to", self.to),
            ("vmin", self.vmin),
            ("vmax", self.vmax),
        ];
        for (name, ev) in named {
            if !(0.0..=100.0).contains(&ev.pct) {
                return Err(EventSetError::OutOfCycle { name, pct: ev.pct });
            }
        }
        if !(self.vmin.s < self.vmax.s) {
            return Err(EventSetError::TransitionOrder { vmin: self.vmin.s, vmax: self.vmax.s });
        }
        Ok(())
    }
}

/// CSV serialization: one row per (cycle, leg).
pub fn events_csv_header() -> String {
    let mut cols = vec![
        "cycle".to_string(),
        "leg".to_string(),
        "cycle_start_s".to_string(),
        "cycle_duration_s".to_string(),
    ];
    for name in ["skf", "shf", "sapf", "lltd", "to", "vmin", "vmax"] {
        cols.push(format!("t_{name}_s"));
        cols.push(format!("t_{name}_pct"));
    }
    cols.push("dt_sapf_lltd_pct".to_string());
    cols.push("transition_fallback".to_string());
    cols.join(",")
}

pub fn events_csv_row(ev: &GaitEventSet) -> String {
    let mut cols = vec![
        ev.cycle.to_string(),
        ev.side.label().to_string(),
        format!("{:.6e}", ev.cycle_start),
        format!("{:.6e}", ev.cycle_duration),
    ];
    for e in [ev.skf, ev.shf, ev.sapf, ev.lltd, ev.to, ev.vmin, ev.vmax] {
        cols.push(format!("{:.6e}", e.s));
        cols.push(format!("{:.4}", e.pct));
    }
    cols.push(format!("{:.4}", ev.dt_sapf_lltd_pct));
    cols.push((ev.transition_fallback as u8).to_string());
    cols.join(",")
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    const FS: f64 = 1000.0;

    fn sig(n: usize, f: impl Fn(f64) -> f64) -> Signal {
        sig_shifted(n, 0.0, f)
    }

    fn sig_shifted(n: usize, t0: f64, f: impl Fn(f64) -> f64) -> Signal {
        let t: Vec<f64> = (0..n).map(|i| t0 + i as f64 / FS).collect();
        let v: Vec<f64> = t.iter().map(|&ti| f(ti - t0)).collect();
        Signal::new("s", "rad", t, v).unwrap()
    }

    #[test]
    fn sapf_finds_parabola_peak() {
        let s = sig(1000, |t| -(t - 0.46) * (t - 0.46));
        let t = detect_sapf(&s, (0.0, 0.999)).unwrap();
        assert_abs_diff_eq!(t, 0.46, epsilon = 1.5e-3);
    }

    #[test]
    fn sapf_rejects_monotone_signals() {
        let s = sig(1000, |t| 0.3 * t);
        assert_eq!(detect_sapf(&s, (0.0, 0.999)), Err(EventError::NoExtremum));
        let s = sig(1000, |t| -0.3 * t);
        assert_eq!(detect_sapf(&s, (0.0, 0.999)), Err(EventError::NoExtremum));
    }

    #[test]
    fn to_on_ramp_into_plateau() {
        // 3 rad/s plantarflexion ramp ending at t = 0.60, then constant.
        let s = sig(1000, |t| if t < 0.6 { 3.0 * (0.6 - t) } else { 0.0 } - 0.2);
        let t = detect_to(&s, (0.0, 0.999)).unwrap();
        assert_abs_diff_eq!(t, 0.60, epsilon = 2e-3);
    }

    #[test]
    fn to_requires_negative_gradient() {
        let s = sig(500, |_| 0.1);
        assert_eq!(detect_to(&s, (0.0, 0.499)), Err(EventError::NoNegativePeak));
    }

    #[test]
    fn to_anchors_at_larger_of_two_negative_peaks() {
        // Two plantarflexion waves; the second is steeper. The minimum
        // angle within 40 ms after the second peak sits at its end.
        let s = sig(1200, |t| {
            if t < 0.3 {
                0.5
            } else if t < 0.4 {
                0.5 - 2.0 * (t - 0.3)
            } else if t < 0.8 {
                0.3
            } else if t < 0.9 {
                0.3 - 4.0 * (t - 0.8)
            } else {
                -0.1
            }
        });
        let t = detect_to(&s, (0.0, 1.199)).unwrap();
        assert_abs_diff_eq!(t, 0.90, epsilon = 3e-3);
    }

    #[test]
    fn lltd_latest_crossing_before_to() {
        // Plateau with a 2 rad/s change from t = 0.47; trailing TO at 0.53.
        let s = sig(1000, |t| if t < 0.47 { -0.384 } else { -0.384 + 2.0 * (t - 0.47) });
        let t = detect_lltd(&s, (0.0, 0.999), 0.53).unwrap();
        assert_abs_diff_eq!(t, 0.47, epsilon = 2e-3);
    }

    #[test]
    fn lltd_needs_a_crossing() {
        let s = sig(1000, |t| 0.3 * t); // 0.3 rad/s, below threshold
        assert!(matches!(detect_lltd(&s, (0.0, 0.999), 0.9), Err(EventError::NoCrossing(_))));
    }

    #[test]
    fn lltd_takes_the_later_of_two_crossings() {
        let bump = |t: f64, t0: f64| {
            // 50 ms burst of ~2 rad/s starting at t0.
            if t >= t0 && t < t0 + 0.05 {
                2.0 * (t - t0)
            } else if t >= t0 + 0.05 {
                0.1
            } else {
                0.0
            }
        };
        let s = sig(1000, |t| bump(t, 0.30) + bump(t, 0.47));
        let t = detect_lltd(&s, (0.0, 0.999), 0.60).unwrap();
        assert_abs_diff_eq!(t, 0.47, epsilon = 3e-3);
    }

    #[test]
    fn shf_first_exceedance_after_peak_extension() {
        // Extension trough at 0.40, flexion at 2 rad/s from 0.45.
        let s = sig(1000, |t| {
            if t < 0.4 {
                -0.5 * (0.4 - t) - 0.1
            } else if t < 0.45 {
                -0.1
            } else {
                -0.1 + 2.0 * (t - 0.45)
            }
        });
        let t = detect_shf(&s, (0.0, 0.999)).unwrap();
        assert_abs_diff_eq!(t, 0.45, epsilon = 2e-3);
    }

    #[test]
    fn shf_errors_when_hip_freezes_or_drifts() {
        // Extension at -0.5 rad/s into the trough at 0.4 s, then frozen.
        let frozen = sig(1000, |t| if t < 0.4 { 0.1 - 0.5 * t } else { -0.1 });
        assert_eq!(detect_shf(&frozen, (0.0, 0.999)), Err(EventError::NoExceedance));
        // Flexion afterwards at only 0.5 rad/s: below the threshold.
        let slow = sig(1000, |t| if t < 0.4 { 0.1 - 0.5 * t } else { -0.1 + 0.5 * (t - 0.4) });
        assert_eq!(detect_shf(&slow, (0.0, 0.999)), Err(EventError::NoExceedance));
    }

    #[test]
    fn skf_inside_window_around_shf() {
        // 2 rad/s knee flexion starting 0.05 s before SHF at 0.5.
        let s = sig(1000, |t| if t < 0.45 { 0.14 } else { 0.14 + 2.0 * (t - 0.45) });
        let t = detect_skf(&s, (0.0, 0.999), 0.5).unwrap();
        assert_abs_diff_eq!(t, 0.45, epsilon = 2e-3);
    }

    #[test]
    fn skf_outside_window_is_an_error() {
        // Flexion episode confined to [0.15, 0.22], SHF at 0.5: outside
        // [0.3, 0.6].
        let s = sig(1000, |t| {
            if t < 0.15 {
                0.14
            } else if t < 0.22 {
                0.14 + 2.0 * (t - 0.15)
            } else {
                0.28
            }
        });
        assert_eq!(detect_skf(&s, (0.0, 0.999), 0.5), Err(EventError::NoExceedance));
    }

    #[test]
    fn transition_window_picks_second_peak() {
        // Minimum at 0.45; peaks 0.09 at 0.55 and 0.10 at 0.65.
        let gauss = |t: f64, c: f64, w: f64| (-0.5 * ((t - c) / w) * ((t - c) / w)).exp();
        let s = sig(1000, |t| {
            -0.2 * gauss(t, 0.45, 0.03) + 0.09 * gauss(t, 0.55, 0.02) + 0.10 * gauss(t, 0.65, 0.02)
        });
        let w = detect_transition_window(&s, (0.0, 0.999)).unwrap();
        assert_abs_diff_eq!(w.t_vmin, 0.45, epsilon = 2e-3);
        assert_abs_diff_eq!(w.t_vmax, 0.65, epsilon = 2e-3);
        assert!(!w.single_peak_fallback);
    }

    #[test]
    fn transition_window_single_peak_fallback() {
        let gauss = |t: f64, c: f64, w: f64| (-0.5 * ((t - c) / w) * ((t - c) / w)).exp();
        let s = sig(1000, |t| -0.2 * gauss(t, 0.45, 0.03) + 0.1 * gauss(t, 0.6, 0.03));
        let w = detect_transition_window(&s, (0.0, 0.999)).unwrap();
        assert!(w.single_peak_fallback);
        assert_abs_diff_eq!(w.t_vmax, 0.6, epsilon = 2e-3);
    }

    #[test]
    fn transition_window_on_pure_sine() {
        let s = sig(2000, |t| (2.0 * std::f64::consts::PI * t).sin());
        let w = detect_transition_window(&s, (0.0, 1.999)).unwrap();
        // Trough at 0.75, next crest at 1.25.
        assert_abs_diff_eq!(w.t_vmin, 0.75, epsilon = 2e-3);
        assert_abs_diff_eq!(w.t_vmax, 1.25, epsilon = 2e-3);
        assert!(w.t_vmin < w.t_vmax);
    }

    #[test]
    fn transition_window_needs_a_peak() {
        let s = sig(500, |t| t); // monotone rise: min at start, no local max
        assert_eq!(detect_transition_window(&s, (0.0, 0.499)), Err(EventError::NoPeakStructure));
    }

    /// Shifting the input in time shifts every event by exactly the same
    /// amount.
    #[test]
    fn detectors_are_shift_equivariant() {
        let shape = |t: f64| {
            let gauss = |c: f64, w: f64| (-0.5 * ((t - c) / w) * ((t - c) / w)).exp();
            0.4 * gauss(0.46, 0.1) - 0.5 * gauss(0.62, 0.02)
        };
        let delta = 13.37;
        let a = sig(1000, shape);
        let b = sig_shifted(1000, delta, shape);
        let sapf_a = detect_sapf(&a, (0.0, 0.999)).unwrap();
        let sapf_b = detect_sapf(&b, (delta, delta + 0.999)).unwrap();
        assert_abs_diff_eq!(sapf_b - sapf_a, delta, epsilon = 1e-9);
        let to_a = detect_to(&a, (0.0, 0.999)).unwrap();
        let to_b = detect_to(&b, (delta, delta + 0.999)).unwrap();
        assert_abs_diff_eq!(to_b - to_a, delta, epsilon = 1e-9);
    }

    #[test]
    fn event_set_validation() {
        let ev = |pct: f64| EventTime { s: pct / 100.0, pct };
        let mut set = GaitEventSet {
            cycle: 0,
            side: Side::Left,
            cycle_start: 0.0,
            cycle_duration: 1.0,
            skf: ev(39.0),
            shf: ev(43.0),
            sapf: ev(46.3),
            lltd: ev(47.9),
            to: ev(61.0),
            vmin: ev(44.0),
            vmax: ev(55.0),
            dt_sapf_lltd_pct: 1.6,
            transition_fallback: false,
        };
        set.validate().unwrap();
        set.vmax = ev(40.0);
        assert!(matches!(set.validate(), Err(EventSetError::TransitionOrder { .. })));
        set.vmax = ev(120.0);
        assert!(matches!(set.validate(), Err(EventSetError::OutOfCycle { .. })));
    }

    #[test]
    fn csv_row_matches_header_arity() {
        let ev = |pct: f64| EventTime { s: pct / 100.0, pct };
        let set = GaitEventSet {
            cycle: 3,
            side: Side::Right,
            cycle_start: 3.0,
            cycle_duration: 1.0,
            skf: ev(39.0),
            shf: ev(43.0),
            sapf: ev(46.3),
            lltd: ev(47.9),
            to: ev(61.0),
            vmin: ev(44.0),
            vmax: ev(55.0),
            dt_sapf_lltd_pct: 1.6,
            transition_fallback: true,
        };
        let header = events_csv_header();
        let row = events_csv_row(&set);
        assert_eq!(header.split(',').count(), row.split(',').count());
        assert!(row.starts_with("3,right,"));
    }
}
