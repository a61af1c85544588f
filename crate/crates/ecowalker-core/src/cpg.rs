//! CPG reference trajectories, PD torque control, and knee-torque gating
//! for the active/passive knee-flexion-initiation modes.
//!
//! The reference generator is an amplitude-controlled phase oscillator: the
//! right leg is evaluated at the oscillator phase, the left leg half a cycle
//! later. Within one cycle (phase in `[0, 1)`):
//!
//! * hip: cosine descent from `offset + amplitude` to `offset` during the
//!   stance fraction `[0, f_hip)`, cosine rise back during the swing, and a
//!   terminal hold of length `phi_hip_steady` at full flexion;
//! * knee: hold at `offset` during `[0, f_knee)`, then one smooth
//!   rise-and-return flexion bump spanning the remainder of the cycle.
//!
//! Both waveforms are C1-periodic, range over
//! `[offset, offset + amplitude]`, and start flexing exactly at their duty
//! fraction.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{JointAngles, JointRates, Side};

/// CPG oscillator parameters. Defaults are the values used on the robot in
/// all experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CpgParams {
    /// Oscillator frequency, Hz (one gait cycle per period).
    pub f: f64,
    /// Hip flexion onset as a fraction of the cycle.
    pub f_hip: f64,
    /// Knee flexion onset as a fraction of the cycle.
    pub f_knee: f64,
    /// Knee amplitude, rad.
    pub theta_knee_amp: f64,
    /// Knee offset, rad.
    pub theta_knee_off: f64,
    /// Hip amplitude, rad.
    pub theta_hip_amp: f64,
    /// Hip offset, rad.
    pub theta_hip_off: f64,
    /// Hip hold duration at the end of swing, fraction of the cycle.
    pub phi_hip_steady: f64,
}

impl Default for CpgParams {
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        CpgParams {
            f: 1.0,
            f_hip: 0.6,
            f_knee: 0.6,
            theta_knee_amp: 55.0 * deg,
            theta_knee_off: 8.0 * deg,
            theta_hip_amp: 26.0 * deg,
            theta_hip_off: 12.0 * deg,
            phi_hip_steady: 0.05,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum CpgError {
    #[error("phase {0} outside [0, 1)")]
    PhaseOutOfRange(f64),
    #[error("invalid CPG parameter: {0}")]
    InvalidParam(&'static str),
    #[error("actuation-mode start fraction {0} outside (0, 1)")]
    InvalidStartFraction(f64),
}

impl CpgParams {
    pub fn validate(self) -> Result<CpgParams, CpgError> {
        if !(self.f > 0.0) {
            return Err(CpgError::InvalidParam("f must be positive"));
        }
        if !(self.f_hip > 0.0 && self.f_hip < 1.0) {
            return Err(CpgError::InvalidParam("f_hip must lie in (0, 1)"));
        }
        if !(self.f_knee > 0.0 && self.f_knee < 1.0) {
            return Err(CpgError::InvalidParam("f_knee must lie in (0, 1)"));
        }
        if self.theta_knee_amp < 0.0 || self.theta_hip_amp < 0.0 {
            return Err(CpgError::InvalidParam("amplitudes must be non-negative"));
        }
        if !(self.phi_hip_steady >= 0.0 && self.phi_hip_steady < 1.0 - self.f_hip) {
            return Err(CpgError::InvalidParam("phi_hip_steady must fit in the swing"));
        }
        Ok(self)
    }
}

/// PD gains. Hip P gains differ between the two legs (the physical robot's
/// hip actuators were tuned individually); interpreted as N m/rad and
/// N m s/rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PdGains {
    pub kp_hip_r: f64,
    pub kp_hip_l: f64,
    pub kd_hip: f64,
    pub kp_knee: f64,
    pub kd_knee: f64,
    /// Actuator torque limit, N m. Commands are clamped to +-limit.
    pub torque_limit: f64,
}

impl Default for PdGains {
    fn default() -> Self {
        PdGains {
            kp_hip_r: 30.0,
            kp_hip_l: 26.0,
            kd_hip: 0.2,
            kp_knee: 7.0,
            kd_knee: 0.2,
            torque_limit: 2.7,
        }
    }
}

/// Knee actuation mode. `Pkfi` zeroes the knee motor torque from
/// `start_fraction` of the observed gait cycle until the next touch-down of
/// the same leg.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActuationMode {
    Akfi,
    Pkfi {
        #[serde(default = "default_start_fraction")]
        start_fraction: f64,
    },
}

fn default_start_fraction() -> f64 {
    0.35
}

impl ActuationMode {
    pub fn pkfi() -> ActuationMode {
        ActuationMode::Pkfi { start_fraction: 0.35 }
    }

    pub fn pkfi40() -> ActuationMode {
        ActuationMode::Pkfi { start_fraction: 0.40 }
    }

    pub fn validate(self) -> Result<ActuationMode, CpgError> {
        if let ActuationMode::Pkfi { start_fraction } = self {
            if !(start_fraction > 0.0 && start_fraction < 1.0) {
                return Err(CpgError::InvalidStartFraction(start_fraction));
            }
        }
        Ok(self)
    }

    pub fn label(&self) -> String {
        match self {
            ActuationMode::Akfi => "akfi".to_string(),
            ActuationMode::Pkfi { start_fraction } => {
                if (start_fraction - 0.35).abs() < 1e-12 {
                    "pkfi".to_string()
                } else {
                    format!("pkfi{:.0}", start_fraction * 100.0)
                }
            }
        }
    }
}

impl std::str::FromStr for ActuationMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "akfi" => Ok(ActuationMode::Akfi),
            "pkfi" | "pkfi35" => Ok(ActuationMode::pkfi()),
            "pkfi40" => Ok(ActuationMode::pkfi40()),
            other => Err(format!("unknown mode '{other}' (expected akfi, pkfi, or pkfi40)")),
        }
    }
}

/// Motor torques and the commanded angles that produced them (for logging).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct MotorCommand {
    pub tau_hip_l: f64,
    pub tau_hip_r: f64,
    pub tau_knee_l: f64,
    pub tau_knee_r: f64,
    pub cmd_hip_l: f64,
    pub cmd_hip_r: f64,
    pub cmd_knee_l: f64,
    pub cmd_knee_r: f64,
}

/// Raised-cosine blend from 0 to 1 over `[0, 1]`, C1 at both ends.
#[inline]
fn blend(s: f64) -> f64 {
    0.5 * (1.0 - (std::f64::consts::PI * s).cos())
}

#[inline]
fn blend_deriv(s: f64) -> f64 {
    0.5 * std::f64::consts::PI * (std::f64::consts::PI * s).sin()
}

fn leg_phase(phase: f64, side: Side) -> f64 {
    match side {
        Side::Right => phase,
        Side::Left => (phase + 0.5).rem_euclid(1.0),
    }
}

fn hip_waveform(cpg: &CpgParams, p: f64) -> (f64, f64) {
    let hold_start = 1.0 - cpg.phi_hip_steady;
    if p < cpg.f_hip {
        let s = p / cpg.f_hip;
        (
            cpg.theta_hip_off + cpg.theta_hip_amp * (1.0 - blend(s)),
            -cpg.theta_hip_amp * blend_deriv(s) / cpg.f_hip,
        )
    } else if p < hold_start {
        let span = hold_start - cpg.f_hip;
        let s = (p - cpg.f_hip) / span;
        (
            cpg.theta_hip_off + cpg.theta_hip_amp * blend(s),
            cpg.theta_hip_amp * blend_deriv(s) / span,
        )
    } else {
        (cpg.theta_hip_off + cpg.theta_hip_amp, 0.0)
    }
}

fn knee_waveform(cpg: &CpgParams, p: f64) -> (f64, f64) {
    if p < cpg.f_knee {
        (cpg.theta_knee_off, 0.0)
    } else {
        let span = 1.0 - cpg.f_knee;
        let s = (p - cpg.f_knee) / span;
        // Full rise-and-return bump: blend(2s) mirrored about the midpoint.
        let (b, db) = if s < 0.5 {
            (blend(2.0 * s), 2.0 * blend_deriv(2.0 * s))
        } else {
            (blend(2.0 * (1.0 - s)), -2.0 * blend_deriv(2.0 * (1.0 - s)))
        };
        (cpg.theta_knee_off + cpg.theta_knee_amp * b, cpg.theta_knee_amp * db / span)
    }
}

/// Commanded hip and knee angles, rad, for one leg at the given oscillator
/// phase. The right leg runs at `phase`, the left at `phase + 0.5 mod 1`.
pub fn reference_trajectory(cpg: &CpgParams, phase: f64, side: Side) -> Result<(f64, f64), CpgError> {
    if !(0.0..1.0).contains(&phase) {
        return Err(CpgError::PhaseOutOfRange(phase));
    }
    let p = leg_phase(phase, side);
    Ok((hip_waveform(cpg, p).0, knee_waveform(cpg, p).0))
}

/// Commanded angles and their time derivatives (rad, rad/s).
pub fn reference_with_rates(
    cpg: &CpgParams,
    phase: f64,
    side: Side,
) -> Result<((f64, f64), (f64, f64)), CpgError> {
    if !(0.0..1.0).contains(&phase) {
        return Err(CpgError::PhaseOutOfRange(phase));
    }
    let p = leg_phase(phase, side);
    let (hip, dhip_dp) = hip_waveform(cpg, p);
    let (knee, dknee_dp) = knee_waveform(cpg, p);
    Ok(((hip, knee), (dhip_dp * cpg.f, dknee_dp * cpg.f)))
}

/// Joint selector for PD gain lookup.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Joint {
    Hip,
    Knee,
}

/// PD torque: `kp (cmd - meas) + kd (cmd_rate - meas_rate)`, clamped to the
/// actuator limit.
pub fn pd_torque(
    gains: &PdGains,
    cmd: f64,
    cmd_rate: f64,
    meas: f64,
    meas_rate: f64,
    joint: Joint,
    side: Side,
) -> f64 {
    let (kp, kd) = match joint {
        Joint::Hip => match side {
            Side::Left => (gains.kp_hip_l, gains.kd_hip),
            Side::Right => (gains.kp_hip_r, gains.kd_hip),
        },
        Joint::Knee => (gains.kp_knee, gains.kd_knee),
    };
    let tau = kp * (cmd - meas) + kd * (cmd_rate - meas_rate);
    tau.clamp(-gains.torque_limit, gains.torque_limit)
}

/// Knee-torque gate. `cycle_phase` is measured from the observed touch-down
/// of the same leg in units of the nominal cycle; values past 1 stay gated
/// until the next touch-down resets the phase.
pub fn knee_gate(mode: &ActuationMode, cycle_phase: f64, tau: f64) -> f64 {
    match mode {
        ActuationMode::Akfi => tau,
        ActuationMode::Pkfi { start_fraction } => {
            if cycle_phase >= *start_fraction {
                0.0
            } else {
                tau
            }
        }
    }
}

/// Configuration of the runtime controller.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControlConfig {
    pub cpg: CpgParams,
    pub gains: PdGains,
    pub mode: ActuationMode,
    /// Constant added to the hip reference before tracking, rad. Maps the
    /// oscillator's waveform frame onto the model's hip-angle zero (thigh
    /// vertical) so the leg swing straddles the vertical.
    pub hip_cmd_trim: f64,
    /// Gait cycles to complete before the passive-knee mode engages.
    pub mode_switch_cycles: u32,
}

impl Default for ControlConfig {
    fn default() -> Self {
        ControlConfig {
            cpg: CpgParams::default(),
            gains: PdGains::default(),
            mode: ActuationMode::Akfi,
            hip_cmd_trim: -25.0 * std::f64::consts::PI / 180.0,
            mode_switch_cycles: 2,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct LegGate {
    last_td: Option<f64>,
    td_count: u32,
}

/// Deterministic controller state machine advanced by the simulation clock.
///
/// Produces PD torques tracking the CPG references; in PKFI mode the knee
/// torque is zeroed from `start_fraction` of the observed per-leg gait cycle
/// until that leg's next touch-down. The passive mode engages once both legs
/// have completed `mode_switch_cycles` touch-downs.
#[derive(Debug, Clone)]
pub struct Controller {
    cfg: ControlConfig,
    gates: [LegGate; 2],
    mode_switch_time: Option<f64>,
}

impl Controller {
    pub fn new(cfg: ControlConfig) -> Controller {
        Controller { cfg, gates: [LegGate::default(); 2], mode_switch_time: None }
    }

    pub fn config(&self) -> &ControlConfig {
        &self.cfg
    }

    /// Time at which the configured mode became fully active (steady-state
    /// onset marker), if reached.
    pub fn mode_switch_time(&self) -> Option<f64> {
        self.mode_switch_time
    }

    fn gate_idx(side: Side) -> usize {
        match side {
            Side::Left => 0,
            Side::Right => 1,
        }
    }

    /// Registers an observed touch-down of one leg at time `t`.
    pub fn on_touchdown(&mut self, side: Side, t: f64) {
        let gate = &mut self.gates[Self::gate_idx(side)];
        gate.last_td = Some(t);
        gate.td_count += 1;
        if self.mode_switch_time.is_none()
            && self.gates.iter().all(|g| g.td_count >= self.cfg.mode_switch_cycles)
        {
            self.mode_switch_time = Some(t);
        }
    }

    fn knee_cycle_phase(&self, side: Side, t: f64) -> Option<f64> {
        self.gates[Self::gate_idx(side)]
            .last_td
            .map(|td| (t - td) * self.cfg.cpg.f)
    }

    /// One control tick: PD torques toward the CPG references, with the
    /// knee gate applied when the passive mode is armed.
    pub fn step(&self, t: f64, q: &JointAngles, qd: &JointRates) -> MotorCommand {
        let phase = (t * self.cfg.cpg.f).rem_euclid(1.0);
        let mut out = MotorCommand::default();
        for side in Side::BOTH {
            let ((hip_ref, knee_ref), (hip_rate, knee_rate)) =
                reference_with_rates(&self.cfg.cpg, phase, side)
                    .expect("phase is wrapped into [0,1)");
            let hip_cmd = hip_ref + self.cfg.hip_cmd_trim;
            let tau_hip = pd_torque(
                &self.cfg.gains, hip_cmd, hip_rate, q.hip(side), qd.hip(side), Joint::Hip, side,
            );
            let mut tau_knee = pd_torque(
                &self.cfg.gains, knee_ref, knee_rate, q.knee(side), qd.knee(side), Joint::Knee, side,
            );
            if self.mode_switch_time.is_some() {
                if let Some(cycle_phase) = self.knee_cycle_phase(side, t) {
                    tau_knee = knee_gate(&self.cfg.mode, cycle_phase, tau_knee);
                }
            }
            match side {
                Side::Left => {
                    out.tau_hip_l = tau_hip;
                    out.tau_knee_l = tau_knee;
                    out.cmd_hip_l = hip_cmd;
                    out.cmd_knee_l = knee_ref;
                }
                Side::Right => {
                    out.tau_hip_r = tau_hip;
                    out.tau_knee_r = tau_knee;
                    out.cmd_hip_r = hip_cmd;
                    out.cmd_knee_r = knee_ref;
                }
            }
        }
        out
    }
}
