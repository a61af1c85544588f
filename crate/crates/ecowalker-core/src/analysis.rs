//! End-to-end trajectory analysis: resampling, filtering, touch-down
//! segmentation, per-cycle gait events, step-to-step transition metrics,
//! cost of transport, and averaged-cycle curves.
//!
//! The pipeline reconstructs joint and trunk velocities from gradients of
//! the filtered position signals (encoder-style processing) rather than
//! trusting logged rates, so externally recorded logs with the same schema
//! analyze identically.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::events::{
    self, EventError, EventTime, GaitEventSet, TransitionWindow,
};
use crate::model::{
    segment_com_velocities, JointAngles, JointRates, RobotParams, Side, TrunkState,
};
use crate::signal::{
    average_cycles, detect_touchdowns, gradient, lowpass_zero_phase, resample, CycleSet, Signal,
    SignalError, TouchdownConfig,
};
use crate::trajectory::Trajectory;
use crate::transition::{
    cost_of_transport, group_momenta, transition_impulses, CotReport, GroupMomentum,
    TransitionError, TransitionMetrics,
};

/// Pipeline settings. Filter defaults: order 2, 25 Hz for angles and
/// positions, 15 Hz for derived velocities and powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Common resampling rate before analysis, Hz.
    pub resample_rate: f64,
    pub filter_order: usize,
    pub cutoff_angles_hz: f64,
    pub cutoff_velocities_hz: f64,
    pub touchdown: TouchdownConfig,
    /// Leg whose cycles feed the per-cycle measures.
    pub leg: Side,
    /// Keep at most this many steady-state cycles.
    pub max_cycles: usize,
    /// Extra cycles to drop after the steady-state onset.
    pub skip_cycles: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            resample_rate: 1000.0,
            filter_order: 2,
            cutoff_angles_hz: 25.0,
            cutoff_velocities_hz: 15.0,
            touchdown: TouchdownConfig::default(),
            leg: Side::Left,
            max_cycles: 120,
            skip_cycles: 0,
        }
    }
}

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error(transparent)]
    Signal(#[from] SignalError),
    #[error("cycle {cycle} ({side}): {source}")]
    Event { cycle: usize, side: Side, source: EventError },
    #[error(transparent)]
    Transition(#[from] TransitionError),
    #[error("only {found} complete steady cycles (need at least {need})")]
    NotEnoughCycles { found: usize, need: usize },
    #[error("{failed} of {total} cycles failed event detection; diagnostics: {details}")]
    TooManyEventFailures { failed: usize, total: usize, details: String },
    #[error("trajectory too short to analyze ({0} samples)")]
    TooShort(usize),
}

/// One fully analyzed gait cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CycleAnalysis {
    pub events: GaitEventSet,
    pub metrics: TransitionMetrics,
    pub cot: CotReport,
}

/// Averaged-cycle curves and per-cycle results of one trajectory.
#[derive(Debug, Clone)]
pub struct AnalysisResult {
    pub leg: Side,
    pub mode: String,
    /// Fully analyzed cycles of the analysis leg.
    pub cycles: Vec<CycleAnalysis>,
    /// Events of both legs (for the events CSV).
    pub events_both: Vec<GaitEventSet>,
    /// Averaged cycle curves on the %GC grid.
    pub averaged: CycleSet,
    /// Transition metrics of the averaged cycle.
    pub averaged_metrics: Option<TransitionMetrics>,
    /// Per-cycle measure table: measure name -> one value per cycle.
    pub measures: BTreeMap<String, Vec<f64>>,
    /// Whole-span average speed and cost of transport.
    pub v_avg: f64,
    pub cot: CotReport,
    pub diagnostics: Vec<String>,
}

struct Prepared {
    t0: f64,
    /// Filtered angle signals.
    hip: [Signal; 2],
    knee: [Signal; 2],
    ankle: [Signal; 2],
    /// Filtered velocities (gradient of filtered angles, re-filtered).
    d_hip: [Signal; 2],
    d_knee: [Signal; 2],
    d_ankle: [Signal; 2],
    trunk_x: Signal,
    trunk_y: Signal,
    trunk_vx: Signal,
    trunk_vy: Signal,
    cmd_hip: [Signal; 2],
    cmd_knee: [Signal; 2],
    power: [Vec<f64>; 4],
    com_vy: Signal,
    com_vx: Signal,
    touchdowns: [Vec<f64>; 2],
}

fn side_idx(side: Side) -> usize {
    match side {
        Side::Left => 0,
        Side::Right => 1,
    }
}

fn extract(traj: &Trajectory, name: &str, unit: &str, get: impl Fn(&crate::trajectory::SampleLog) -> f64) -> Signal {
    let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
    let v: Vec<f64> = traj.samples.iter().map(&get).collect();
    Signal { name: name.to_string(), unit: unit.to_string(), t, values: v }
}

fn prepare(
    traj: &Trajectory,
    params: &RobotParams,
    cfg: &AnalysisConfig,
) -> Result<Prepared, AnalysisError> {
    if traj.samples.len() < 16 {
        return Err(AnalysisError::TooShort(traj.samples.len()));
    }
    let rate = cfg.resample_rate;
    let smooth_pos = |sig: &Signal| -> Result<Signal, SignalError> {
        let rs = resample(sig, rate)?;
        lowpass_zero_phase(&rs, cfg.filter_order, cfg.cutoff_angles_hz)
    };
    let velocity_of = |sig: &Signal| -> Result<Signal, SignalError> {
        let g = gradient(sig)?;
        lowpass_zero_phase(&g, cfg.filter_order, cfg.cutoff_velocities_hz)
    };

    let hip_l = smooth_pos(&extract(traj, "hip_l", "rad", |s| s.q.hip_l))?;
    let hip_r = smooth_pos(&extract(traj, "hip_r", "rad", |s| s.q.hip_r))?;
    let knee_l = smooth_pos(&extract(traj, "knee_l", "rad", |s| s.q.knee_l))?;
    let knee_r = smooth_pos(&extract(traj, "knee_r", "rad", |s| s.q.knee_r))?;
    let ankle_l = smooth_pos(&extract(traj, "ankle_l", "rad", |s| s.q.ankle_l))?;
    let ankle_r = smooth_pos(&extract(traj, "ankle_r", "rad", |s| s.q.ankle_r))?;
    let toe_l = smooth_pos(&extract(traj, "toe_l", "rad", |s| s.q.toe_l))?;
    let toe_r = smooth_pos(&extract(traj, "toe_r", "rad", |s| s.q.toe_r))?;
    let trunk_x = smooth_pos(&extract(traj, "trunk_x", "m", |s| s.trunk.x))?;
    let trunk_y = smooth_pos(&extract(traj, "trunk_y", "m", |s| s.trunk.y))?;

    let d_hip_l = velocity_of(&hip_l)?;
    let d_hip_r = velocity_of(&hip_r)?;
    let d_knee_l = velocity_of(&knee_l)?;
    let d_knee_r = velocity_of(&knee_r)?;
    let d_ankle_l = velocity_of(&ankle_l)?;
    let d_ankle_r = velocity_of(&ankle_r)?;
    let d_toe_l = velocity_of(&toe_l)?;
    let d_toe_r = velocity_of(&toe_r)?;
    let trunk_vx = velocity_of(&trunk_x)?;
    let trunk_vy = velocity_of(&trunk_y)?;

    let cmd_hip_l = resample(&extract(traj, "cmd_hip_l", "rad", |s| s.cmd_hip_l), rate)?;
    let cmd_hip_r = resample(&extract(traj, "cmd_hip_r", "rad", |s| s.cmd_hip_r), rate)?;
    let cmd_knee_l = resample(&extract(traj, "cmd_knee_l", "rad", |s| s.cmd_knee_l), rate)?;
    let cmd_knee_r = resample(&extract(traj, "cmd_knee_r", "rad", |s| s.cmd_knee_r), rate)?;

    let mut power = [Vec::new(), Vec::new(), Vec::new(), Vec::new()];
    for (i, get) in [
        (0usize, 0usize),
        (1, 1),
        (2, 2),
        (3, 3),
    ] {
        let raw = extract(traj, "p_elec", "W", |s| s.p_elec[get]);
        let rs = resample(&raw, rate)?;
        let filt = lowpass_zero_phase(&rs, cfg.filter_order, cfg.cutoff_velocities_hz)?;
        power[i] = filt.values;
    }

    // Whole-body CoM velocity from reconstructed segment kinematics.
    let n = hip_l.len();
    let mut com_vx = Vec::with_capacity(n);
    let mut com_vy = Vec::with_capacity(n);
    for k in 0..n {
        let q = JointAngles {
            hip_l: hip_l.values[k],
            hip_r: hip_r.values[k],
            knee_l: knee_l.values[k],
            knee_r: knee_r.values[k],
            ankle_l: ankle_l.values[k],
            ankle_r: ankle_r.values[k],
            toe_l: toe_l.values[k],
            toe_r: toe_r.values[k],
        };
        let qd = JointRates {
            hip_l: d_hip_l.values[k],
            hip_r: d_hip_r.values[k],
            knee_l: d_knee_l.values[k],
            knee_r: d_knee_r.values[k],
            ankle_l: d_ankle_l.values[k],
            ankle_r: d_ankle_r.values[k],
            toe_l: d_toe_l.values[k],
            toe_r: d_toe_r.values[k],
        };
        let trunk = TrunkState {
            x: trunk_x.values[k],
            y: trunk_y.values[k],
            vx: trunk_vx.values[k],
            vy: trunk_vy.values[k],
        };
        let kin = segment_com_velocities(params, &trunk, &q, &qd);
        let v = crate::model::com_velocity(params, &kin);
        com_vx.push(v.x);
        com_vy.push(v.y);
    }
    let com_vx = Signal::new("com_vx", "m/s", hip_l.t.clone(), com_vx)?;
    let com_vy = Signal::new("com_vy", "m/s", hip_l.t.clone(), com_vy)?;

    let td_l = detect_touchdowns(&ankle_l, &cfg.touchdown)?;
    let td_r = detect_touchdowns(&ankle_r, &cfg.touchdown)?;

    Ok(Prepared {
        t0: traj.samples[0].t,
        hip: [hip_l, hip_r],
        knee: [knee_l, knee_r],
        ankle: [ankle_l, ankle_r],
        d_hip: [d_hip_l, d_hip_r],
        d_knee: [d_knee_l, d_knee_r],
        d_ankle: [d_ankle_l, d_ankle_r],
        trunk_x,
        trunk_y,
        trunk_vx,
        trunk_vy,
        cmd_hip: [cmd_hip_l, cmd_hip_r],
        cmd_knee: [cmd_knee_l, cmd_knee_r],
        power,
        com_vy,
        com_vx,
        touchdowns: [td_l.times, td_r.times],
    })
}

/// Steady-state cycle windows of one leg: consecutive touch-down pairs at
/// or after the steady-state onset.
fn steady_cycles(tds: &[f64], onset: f64, skip: usize, max: usize) -> Vec<(f64, f64)> {
    let mut cycles: Vec<(f64, f64)> = tds
        .windows(2)
        .filter(|w| w[0] >= onset)
        .map(|w| (w[0], w[1]))
        .collect();
    if skip < cycles.len() {
        cycles.drain(..skip);
    } else {
        cycles.clear();
    }
    cycles.truncate(max);
    cycles
}

fn detect_cycle_events(
    prep: &Prepared,
    side: Side,
    cycle_idx: usize,
    window: (f64, f64),
) -> Result<(GaitEventSet, TransitionWindow), AnalysisError> {
    let i = side_idx(side);
    let o = side_idx(side.other());
    let wrap = |source: EventError| AnalysisError::Event { cycle: cycle_idx, side, source };

    let t_sapf = events::detect_sapf(&prep.ankle[i], window).map_err(wrap)?;
    let t_to = events::detect_to(&prep.ankle[i], window).map_err(wrap)?;
    let t_lltd = events::detect_lltd(&prep.ankle[o], window, t_to).map_err(wrap)?;
    let t_shf = events::detect_shf(&prep.hip[i], window).map_err(wrap)?;
    let t_skf = events::detect_skf(&prep.knee[i], window, t_shf).map_err(wrap)?;
    let trans = events::detect_transition_window(&prep.com_vy, window).map_err(wrap)?;

    let (t0, t1) = window;
    let dur = t1 - t0;
    let ev = |t: f64| EventTime::from_cycle(t, t0, dur);
    let set = GaitEventSet {
        cycle: cycle_idx,
        side,
        cycle_start: t0,
        cycle_duration: dur,
        skf: ev(t_skf),
        shf: ev(t_shf),
        sapf: ev(t_sapf),
        lltd: ev(t_lltd),
        to: ev(t_to),
        vmin: ev(trans.t_vmin),
        vmax: ev(trans.t_vmax),
        dt_sapf_lltd_pct: (t_lltd - t_sapf) / dur * 100.0,
        transition_fallback: trans.single_peak_fallback,
    };
    Ok((set, trans))
}

fn group_momenta_for_window(
    prep: &Prepared,
    params: &RobotParams,
    side: Side,
    window: (f64, f64),
) -> Result<GroupMomentum, AnalysisError> {
    let i0 = prep.com_vy.index_at_or_after(window.0);
    let i1 = prep.com_vy.t.partition_point(|&x| x <= window.1);
    let mut samples = Vec::with_capacity(i1 - i0);
    for k in i0..i1 {
        let q = JointAngles {
            hip_l: prep.hip[0].values[k],
            hip_r: prep.hip[1].values[k],
            knee_l: prep.knee[0].values[k],
            knee_r: prep.knee[1].values[k],
            ankle_l: prep.ankle[0].values[k],
            ankle_r: prep.ankle[1].values[k],
            toe_l: 0.0,
            toe_r: 0.0,
        };
        let qd = JointRates {
            hip_l: prep.d_hip[0].values[k],
            hip_r: prep.d_hip[1].values[k],
            knee_l: prep.d_knee[0].values[k],
            knee_r: prep.d_knee[1].values[k],
            ankle_l: prep.d_ankle[0].values[k],
            ankle_r: prep.d_ankle[1].values[k],
            toe_l: 0.0,
            toe_r: 0.0,
        };
        let trunk = TrunkState {
            x: prep.trunk_x.values[k],
            y: prep.trunk_y.values[k],
            vx: prep.trunk_vx.values[k],
            vy: prep.trunk_vy.values[k],
        };
        samples.push((prep.com_vy.t[k], segment_com_velocities(params, &trunk, &q, &qd)));
    }
    Ok(group_momenta(params, &samples, side)?)
}

fn slice_power(prep: &Prepared, window: (f64, f64)) -> Vec<Vec<f64>> {
    let i0 = prep.com_vy.index_at_or_after(window.0);
    let i1 = prep.com_vy.t.partition_point(|&x| x <= window.1);
    prep.power.iter().map(|m| m[i0..i1].to_vec()).collect()
}

/// Runs the full analysis pipeline over a trajectory.
pub fn analyze(
    traj: &Trajectory,
    params: &RobotParams,
    cfg: &AnalysisConfig,
) -> Result<AnalysisResult, AnalysisError> {
    let prep = prepare(traj, params, cfg)?;
    let onset = traj.meta.steady_onset.unwrap_or(prep.t0);
    let idle = traj.meta.config.sim.idle_power;

    let leg = cfg.leg;
    let leg_cycles = steady_cycles(&prep.touchdowns[side_idx(leg)], onset, cfg.skip_cycles, cfg.max_cycles);
    if leg_cycles.is_empty() {
        return Err(AnalysisError::NotEnoughCycles { found: 0, need: 1 });
    }

    let mut diagnostics = Vec::new();
    let mut cycles = Vec::new();
    let mut events_both = Vec::new();
    let mut measures: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    let push = |map: &mut BTreeMap<String, Vec<f64>>, key: &str, v: f64| {
        map.entry(key.to_string()).or_default().push(v);
    };
    let mut failed = 0usize;

    for (idx, window) in leg_cycles.iter().enumerate() {
        match detect_cycle_events(&prep, leg, idx, *window) {
            Ok((set, trans)) => {
                if let Err(e) = set.validate() {
                    diagnostics.push(format!("cycle {idx}: {e}"));
                    failed += 1;
                    continue;
                }
                if set.transition_fallback {
                    diagnostics.push(format!("cycle {idx}: single-peak vmax fallback"));
                }
                let gm = group_momenta_for_window(&prep, params, leg, *window)?;
                let metrics =
                    transition_impulses(params, &gm, trans.t_vmin, set.lltd.s, trans.t_vmax)?;
                let power = slice_power(&prep, *window);
                let x0 = prep.trunk_x.interp_at(window.0);
                let x1 = prep.trunk_x.interp_at(window.1);
                let v_cycle = (x1 - x0) / (window.1 - window.0);
                let cot = if v_cycle > 0.0 {
                    cost_of_transport(&power, idle, params, v_cycle)?
                } else {
                    diagnostics.push(format!("cycle {idx}: non-positive speed {v_cycle:.3}"));
                    CotReport {
                        e_en: f64::NAN,
                        v_avg: v_cycle,
                        cot: f64::NAN,
                        cot_natural_runner: crate::transition::COT_NATURAL_RUNNER,
                        cot_re_pct: f64::NAN,
                    }
                };

                push(&mut measures, "t_skf_pct", set.skf.pct);
                push(&mut measures, "t_sapf_pct", set.sapf.pct);
                push(&mut measures, "dt_sapf_lltd_pct", set.dt_sapf_lltd_pct);
                push(&mut measures, "d_p_tl_mag", metrics.dmag_tl);
                push(&mut measures, "d_p_tl_x", metrics.dp_tl[0]);
                push(&mut measures, "d_p_tl_y", metrics.dp_tl[1]);
                push(&mut measures, "d_p_rb_mag", metrics.dmag_rb);
                push(&mut measures, "d_p_rb_x", metrics.dp_rb[0]);
                push(&mut measures, "d_p_rb_y", metrics.dp_rb[1]);
                push(&mut measures, "d_p_com_mag", metrics.dmag_com);
                push(&mut measures, "d_p_com_x", metrics.dp_com[0]);
                push(&mut measures, "d_p_com_y", metrics.dp_com[1]);
                push(&mut measures, "t_shf_pct", set.shf.pct);
                push(&mut measures, "t_lltd_pct", set.lltd.pct);
                push(&mut measures, "t_to_pct", set.to.pct);
                push(&mut measures, "dir_change_deg", metrics.dir_change_deg);
                push(&mut measures, "cot", cot.cot);
                push(&mut measures, "v_avg", v_cycle);
                push(&mut measures, "ke_com_vmin", metrics.ke_com[0]);
                push(&mut measures, "ke_com_vmax", metrics.ke_com[2]);

                cycles.push(CycleAnalysis { events: set, metrics, cot });
                events_both.push(set);
            }
            Err(e) => {
                diagnostics.push(e.to_string());
                failed += 1;
            }
        }
    }

    let total = leg_cycles.len();
    if failed * 5 > total {
        return Err(AnalysisError::TooManyEventFailures {
            failed,
            total,
            details: diagnostics.join("; "),
        });
    }

    // Events of the other leg, for the per-(cycle, leg) CSV.
    let other = leg.other();
    let other_cycles =
        steady_cycles(&prep.touchdowns[side_idx(other)], onset, cfg.skip_cycles, cfg.max_cycles);
    for (idx, window) in other_cycles.iter().enumerate() {
        match detect_cycle_events(&prep, other, idx, *window) {
            Ok((set, _)) => events_both.push(set),
            Err(e) => diagnostics.push(e.to_string()),
        }
    }

    // Averaged cycle on the analysis leg's touch-downs.
    let kept_tds: Vec<f64> = leg_cycles
        .iter()
        .map(|c| c.0)
        .chain(std::iter::once(leg_cycles.last().unwrap().1))
        .collect();
    let full_window = (kept_tds[0], *kept_tds.last().unwrap());
    let gm_full = group_momenta_for_window(&prep, params, leg, full_window)?;
    let li = side_idx(leg);
    let oi = side_idx(other);
    let avg_inputs = vec![
        prep.hip[li].clone(),
        prep.knee[li].clone(),
        prep.ankle[li].clone(),
        prep.hip[oi].clone(),
        prep.knee[oi].clone(),
        prep.ankle[oi].clone(),
        prep.cmd_hip[li].clone(),
        prep.cmd_knee[li].clone(),
        prep.com_vx.clone(),
        prep.com_vy.clone(),
        Signal::new("p_tl_x", "kg m/s", gm_full.t.clone(), gm_full.p_tl.iter().map(|p| p.x).collect())?,
        Signal::new("p_tl_y", "kg m/s", gm_full.t.clone(), gm_full.p_tl.iter().map(|p| p.y).collect())?,
        Signal::new("p_rb_x", "kg m/s", gm_full.t.clone(), gm_full.p_rb.iter().map(|p| p.x).collect())?,
        Signal::new("p_rb_y", "kg m/s", gm_full.t.clone(), gm_full.p_rb.iter().map(|p| p.y).collect())?,
        Signal::new("p_com_x", "kg m/s", gm_full.t.clone(), gm_full.p_com.iter().map(|p| p.x).collect())?,
        Signal::new("p_com_y", "kg m/s", gm_full.t.clone(), gm_full.p_com.iter().map(|p| p.y).collect())?,
        Signal::new("ke_com", "J", gm_full.t.clone(), gm_full.ke_com.clone())?,
    ];
    let mut averaged = average_cycles(&avg_inputs, &kept_tds)?;
    // Rename side-generic curves for the consumer.
    averaged.signals[0].name = "hip_leg".into();
    averaged.signals[1].name = "knee_leg".into();
    averaged.signals[2].name = "ankle_leg".into();
    averaged.signals[3].name = "hip_other".into();
    averaged.signals[4].name = "knee_other".into();
    averaged.signals[5].name = "ankle_other".into();

    // Transition metrics of the averaged cycle: rebuild time-domain signals
    // from the mean curves at the mean cycle duration.
    let mean_dur = leg_cycles.iter().map(|c| c.1 - c.0).sum::<f64>() / total as f64;
    let averaged_metrics = averaged_cycle_metrics(params, &averaged, mean_dur, leg, &mut diagnostics);

    let x0 = prep.trunk_x.interp_at(full_window.0);
    let x1 = prep.trunk_x.interp_at(full_window.1);
    let v_avg = (x1 - x0) / (full_window.1 - full_window.0);
    let power_full = slice_power(&prep, full_window);
    let cot = cost_of_transport(&power_full, idle, params, v_avg.max(1e-9))?;

    Ok(AnalysisResult {
        leg,
        mode: traj.meta.mode.clone(),
        cycles,
        events_both,
        averaged,
        averaged_metrics,
        measures,
        v_avg,
        cot,
        diagnostics,
    })
}

fn averaged_cycle_metrics(
    params: &RobotParams,
    averaged: &CycleSet,
    mean_dur: f64,
    leg: Side,
    diagnostics: &mut Vec<String>,
) -> Option<TransitionMetrics> {
    let find = |name: &str| averaged.signals.iter().find(|s| s.name == name);
    let t: Vec<f64> = averaged.grid.iter().map(|g| g / 100.0 * mean_dur).collect();
    let sig = |name: &str| -> Option<Signal> {
        find(name).map(|s| Signal {
            name: name.to_string(),
            unit: s.unit.clone(),
            t: t.clone(),
            values: s.mean.clone(),
        })
    };
    let ankle = sig("ankle_leg")?;
    let ankle_other = sig("ankle_other")?;
    let com_vy = sig("com_vy")?;
    let window = (t[0], *t.last().unwrap());
    let result = (|| -> Result<TransitionMetrics, String> {
        let t_to = events::detect_to(&ankle, window).map_err(|e| e.to_string())?;
        let t_lltd =
            events::detect_lltd(&ankle_other, window, t_to).map_err(|e| e.to_string())?;
        let trans =
            events::detect_transition_window(&com_vy, window).map_err(|e| e.to_string())?;
        // Group momenta over the averaged cycle from the mean curves.
        let p_tl_x = sig("p_tl_x").ok_or("missing p_tl_x")?;
        let p_tl_y = sig("p_tl_y").ok_or("missing p_tl_y")?;
        let p_rb_x = sig("p_rb_x").ok_or("missing p_rb_x")?;
        let p_rb_y = sig("p_rb_y").ok_or("missing p_rb_y")?;
        let ke = sig("ke_com").ok_or("missing ke_com")?;
        let n = t.len();
        let mut gm = GroupMomentum {
            trailing: leg,
            t: t.clone(),
            p_tl: Vec::with_capacity(n),
            p_rb: Vec::with_capacity(n),
            p_com: Vec::with_capacity(n),
            ke_tl: vec![0.0; n],
            ke_rb: vec![0.0; n],
            ke_com: ke.values.clone(),
            ke_segments: vec![0.0; n],
        };
        for k in 0..n {
            let tl = crate::Vec2::new(p_tl_x.values[k], p_tl_y.values[k]);
            let rb = crate::Vec2::new(p_rb_x.values[k], p_rb_y.values[k]);
            gm.p_tl.push(tl);
            gm.p_rb.push(rb);
            gm.p_com.push(tl + rb);
        }
        transition_impulses(params, &gm, trans.t_vmin, t_lltd, trans.t_vmax)
            .map_err(|e| e.to_string())
    })();
    match result {
        Ok(m) => Some(m),
        Err(e) => {
            diagnostics.push(format!("averaged-cycle metrics unavailable: {e}"));
            None
        }
    }
}

/// Long-format metrics CSV: one row per (cycle, measure).
pub fn metrics_csv(result: &AnalysisResult) -> String {
    let mut out = String::from("cycle,measure,value\n");
    for (measure, values) in &result.measures {
        for (cycle, v) in values.iter().enumerate() {
            out.push_str(&format!("{cycle},{measure},{v:.9e}\n"));
        }
    }
    out
}

/// Parses a long-format metrics CSV back into measure series.
pub fn parse_metrics_csv(text: &str) -> Result<BTreeMap<String, Vec<(usize, f64)>>, String> {
    let mut out: BTreeMap<String, Vec<(usize, f64)>> = BTreeMap::new();
    for (i, line) in text.lines().enumerate() {
        if i == 0 {
            if line != "cycle,measure,value" {
                return Err(format!("line 1: unexpected header '{line}'"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let mut parts = line.split(',');
        let cycle: usize = parts
            .next()
            .ok_or_else(|| format!("line {}: missing cycle", i + 1))?
            .parse()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        let measure = parts.next().ok_or_else(|| format!("line {}: missing measure", i + 1))?;
        let value: f64 = parts
            .next()
            .ok_or_else(|| format!("line {}: missing value", i + 1))?
            .parse()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        out.entry(measure.to_string()).or_default().push((cycle, value));
    }
    Ok(out)
}

/// Averaged-cycle curves CSV: grid plus mean/sd pairs per signal.
pub fn averaged_csv(result: &AnalysisResult) -> String {
    let mut header = vec!["pct".to_string()];
    for s in &result.averaged.signals {
        header.push(format!("{}_mean", s.name));
        header.push(format!("{}_sd", s.name));
    }
    let mut out = header.join(",");
    out.push('\n');
    for (k, pct) in result.averaged.grid.iter().enumerate() {
        let mut row = vec![format!("{pct:.1}")];
        for s in &result.averaged.signals {
            row.push(format!("{:.9e}", s.mean[k]));
            row.push(format!("{:.9e}", s.sd[k]));
        }
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
