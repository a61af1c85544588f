//! Step-to-step transition accounting: segmental momenta, trailing-leg /
//! remaining-body / CoM aggregation, impulses over the vmin-vmax window,
//! CoM velocity vectors and hodographs, kinetic energies, and cost of
//! transport.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{RobotParams, SegmentId, SegmentKinematics, Side};
use crate::Vec2;

/// A natural runner's cost of transport at the robot's body mass, used as
/// the reference for the relative cost of transport.
pub const COT_NATURAL_RUNNER: f64 = 1.36;

#[derive(Debug, Error, PartialEq)]
pub enum TransitionError {
    #[error("event time {0} s outside the sampled span [{1}, {2}] s")]
    EventOutsideSpan(f64, f64, f64),
    #[error("zero-magnitude CoM velocity has no direction")]
    ZeroMagnitude,
    #[error("average speed must be positive (got {0})")]
    NonPositiveSpeed(f64),
    #[error("empty series")]
    Empty,
}

/// Per-segment linear momentum vectors, kg m/s.
pub fn segment_momenta(params: &RobotParams, kin: &SegmentKinematics) -> [Vec2; 7] {
    let mut p = [Vec2::zeros(); 7];
    for seg in SegmentId::ALL {
        p[seg.index()] = params.mass(seg) * kin.com_velocity_of(seg);
    }
    p
}

/// Group momentum and kinetic-energy series over a sampled window.
///
/// TL is the trailing leg (thigh + shank + foot of the cycle's own side);
/// RB is the trunk plus the leading leg. Their sum is the whole-body CoM
/// momentum by construction.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupMomentum {
    pub trailing: Side,
    pub t: Vec<f64>,
    pub p_tl: Vec<Vec2>,
    pub p_rb: Vec<Vec2>,
    pub p_com: Vec<Vec2>,
    /// Sum of segment linear kinetic energies per group, J.
    pub ke_tl: Vec<f64>,
    pub ke_rb: Vec<f64>,
    /// Translational CoM kinetic energy 0.5 M |v_com|^2, J.
    pub ke_com: Vec<f64>,
    /// Total of all segment linear kinetic energies, J.
    pub ke_segments: Vec<f64>,
}

fn tl_segments(side: Side) -> [SegmentId; 3] {
    [SegmentId::Thigh(side), SegmentId::Shank(side), SegmentId::Foot(side)]
}

/// Aggregates per-sample segment kinematics into group momentum series.
pub fn group_momenta(
    params: &RobotParams,
    samples: &[(f64, SegmentKinematics)],
    trailing: Side,
) -> Result<GroupMomentum, TransitionError> {
    if samples.is_empty() {
        return Err(TransitionError::Empty);
    }
    let n = samples.len();
    let mut gm = GroupMomentum {
        trailing,
        t: Vec::with_capacity(n),
        p_tl: Vec::with_capacity(n),
        p_rb: Vec::with_capacity(n),
        p_com: Vec::with_capacity(n),
        ke_tl: Vec::with_capacity(n),
        ke_rb: Vec::with_capacity(n),
        ke_com: Vec::with_capacity(n),
        ke_segments: Vec::with_capacity(n),
    };
    let tl = tl_segments(trailing);
    for (t, kin) in samples {
        let mut p_tl = Vec2::zeros();
        let mut p_rb = Vec2::zeros();
        let mut ke_tl = 0.0;
        let mut ke_rb = 0.0;
        for seg in SegmentId::ALL {
            let m = params.mass(seg);
            let v = kin.com_velocity_of(seg);
            let p = m * v;
            let ke = 0.5 * m * v.norm_squared();
            if tl.contains(&seg) {
                p_tl += p;
                ke_tl += ke;
            } else {
                p_rb += p;
                ke_rb += ke;
            }
        }
        let p_com = p_tl + p_rb;
        let v_com = p_com / params.total_mass;
        gm.t.push(*t);
        gm.p_tl.push(p_tl);
        gm.p_rb.push(p_rb);
        gm.p_com.push(p_com);
        gm.ke_tl.push(ke_tl);
        gm.ke_rb.push(ke_rb);
        gm.ke_com.push(0.5 * params.total_mass * v_com.norm_squared());
        gm.ke_segments.push(ke_tl + ke_rb);
    }
    Ok(gm)
}

fn interp_vec(t: &[f64], series: &[Vec2], tq: f64) -> Result<Vec2, TransitionError> {
    let (t0, t1) = (t[0], t[t.len() - 1]);
    if tq < t0 || tq > t1 {
        return Err(TransitionError::EventOutsideSpan(tq, t0, t1));
    }
    let hi = t.partition_point(|&x| x < tq).clamp(1, t.len() - 1);
    let lo = hi - 1;
    let w = (tq - t[lo]) / (t[hi] - t[lo]);
    Ok(series[lo] + w * (series[hi] - series[lo]))
}

fn interp_scalar(t: &[f64], series: &[f64], tq: f64) -> Result<f64, TransitionError> {
    let (t0, t1) = (t[0], t[t.len() - 1]);
    if tq < t0 || tq > t1 {
        return Err(TransitionError::EventOutsideSpan(tq, t0, t1));
    }
    let hi = t.partition_point(|&x| x < tq).clamp(1, t.len() - 1);
    let lo = hi - 1;
    let w = (tq - t[lo]) / (t[hi] - t[lo]);
    Ok(series[lo] + w * (series[hi] - series[lo]))
}

/// Momentum, velocity, and energy bookkeeping of one step-to-step
/// transition: group snapshots at vmin / LLTD / vmax and the impulses over
/// the window.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionMetrics {
    pub trailing: Side,
    pub t_vmin: f64,
    pub t_lltd: f64,
    pub t_vmax: f64,
    /// Group momenta at [vmin, lltd, vmax], components [x, y].
    pub p_tl: [[f64; 2]; 3],
    pub p_rb: [[f64; 2]; 3],
    pub p_com: [[f64; 2]; 3],
    /// Componentwise impulses over [vmin, vmax].
    pub dp_tl: [f64; 2],
    pub dp_rb: [f64; 2],
    pub dp_com: [f64; 2],
    /// Vector-magnitude changes |p(vmax)| - |p(vmin)|.
    pub dmag_tl: f64,
    pub dmag_rb: f64,
    pub dmag_com: f64,
    /// CoM velocity vectors at the three instants.
    pub v_com: [[f64; 2]; 3],
    /// CoM velocity direction change vmin -> vmax, degrees.
    pub dir_change_deg: f64,
    /// Kinetic energies at the three instants.
    pub ke_tl: [f64; 3],
    pub ke_rb: [f64; 3],
    pub ke_com: [f64; 3],
    pub ke_segments: [f64; 3],
}

/// Snapshots the group momenta at the transition instants and computes the
/// impulses over [vmin, vmax].
pub fn transition_impulses(
    params: &RobotParams,
    gm: &GroupMomentum,
    t_vmin: f64,
    t_lltd: f64,
    t_vmax: f64,
) -> Result<TransitionMetrics, TransitionError> {
    if gm.t.len() < 2 {
        return Err(TransitionError::Empty);
    }
    let instants = [t_vmin, t_lltd, t_vmax];
    let mut p_tl = [[0.0; 2]; 3];
    let mut p_rb = [[0.0; 2]; 3];
    let mut p_com = [[0.0; 2]; 3];
    let mut v_com = [[0.0; 2]; 3];
    let mut ke_tl = [0.0; 3];
    let mut ke_rb = [0.0; 3];
    let mut ke_com = [0.0; 3];
    let mut ke_segments = [0.0; 3];
    for (k, &tq) in instants.iter().enumerate() {
        let tl = interp_vec(&gm.t, &gm.p_tl, tq)?;
        let rb = interp_vec(&gm.t, &gm.p_rb, tq)?;
        let com = interp_vec(&gm.t, &gm.p_com, tq)?;
        p_tl[k] = [tl.x, tl.y];
        p_rb[k] = [rb.x, rb.y];
        p_com[k] = [com.x, com.y];
        let v = com / params.total_mass;
        v_com[k] = [v.x, v.y];
        ke_tl[k] = interp_scalar(&gm.t, &gm.ke_tl, tq)?;
        ke_rb[k] = interp_scalar(&gm.t, &gm.ke_rb, tq)?;
        ke_com[k] = interp_scalar(&gm.t, &gm.ke_com, tq)?;
        ke_segments[k] = interp_scalar(&gm.t, &gm.ke_segments, tq)?;
    }
    let mag = |p: [f64; 2]| (p[0] * p[0] + p[1] * p[1]).sqrt();
    let v0 = Vec2::new(v_com[0][0], v_com[0][1]);
    let v2 = Vec2::new(v_com[2][0], v_com[2][1]);
    if v0.norm() == 0.0 || v2.norm() == 0.0 {
        return Err(TransitionError::ZeroMagnitude);
    }
    Ok(TransitionMetrics {
        trailing: gm.trailing,
        t_vmin,
        t_lltd,
        t_vmax,
        p_tl,
        p_rb,
        p_com,
        dp_tl: [p_tl[2][0] - p_tl[0][0], p_tl[2][1] - p_tl[0][1]],
        dp_rb: [p_rb[2][0] - p_rb[0][0], p_rb[2][1] - p_rb[0][1]],
        dp_com: [p_com[2][0] - p_com[0][0], p_com[2][1] - p_com[0][1]],
        dmag_tl: mag(p_tl[2]) - mag(p_tl[0]),
        dmag_rb: mag(p_rb[2]) - mag(p_rb[0]),
        dmag_com: mag(p_com[2]) - mag(p_com[0]),
        v_com,
        dir_change_deg: (v2.y.atan2(v2.x) - v0.y.atan2(v0.x)).to_degrees(),
        ke_tl,
        ke_rb,
        ke_com,
        ke_segments,
    })
}

/// CoM hodograph: the velocity-vector curve over the window.
pub fn com_hodograph(params: &RobotParams, gm: &GroupMomentum) -> (Vec<f64>, Vec<Vec2>) {
    let v: Vec<Vec2> = gm.p_com.iter().map(|p| p / params.total_mass).collect();
    (gm.t.clone(), v)
}

/// Net positive cost of transport report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CotReport {
    /// Net positive electrical power, idle-subtracted and rectified, W.
    pub e_en: f64,
    /// Average forward speed over the analyzed span, m/s.
    pub v_avg: f64,
    pub cot: f64,
    pub cot_natural_runner: f64,
    /// Relative cost of transport, percent.
    pub cot_re_pct: f64,
}

/// Computes the net positive cost of transport from per-motor electrical
/// power traces: idle is subtracted per motor, negative values are
/// rectified away, the motors are summed, and the result is time-averaged.
pub fn cost_of_transport(
    power_per_motor: &[Vec<f64>],
    idle_power: f64,
    params: &RobotParams,
    v_avg: f64,
) -> Result<CotReport, TransitionError> {
    if v_avg <= 0.0 {
        return Err(TransitionError::NonPositiveSpeed(v_avg));
    }
    let n = power_per_motor.first().map(|m| m.len()).unwrap_or(0);
    if n == 0 {
        return Err(TransitionError::Empty);
    }
    let mut sum = 0.0;
    for k in 0..n {
        for motor in power_per_motor {
            sum += (motor[k] - idle_power).max(0.0);
        }
    }
    let e_en = sum / n as f64;
    let cot = e_en / (params.total_mass * params.gravity * v_avg);
    Ok(CotReport {
        e_en,
        v_avg,
        cot,
        cot_natural_runner: COT_NATURAL_RUNNER,
        cot_re_pct: cot / COT_NATURAL_RUNNER * 100.0,
    })
}
