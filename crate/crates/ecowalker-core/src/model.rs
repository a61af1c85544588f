//! Robot parameterization, joint-angle conventions, and planar kinematics.
//!
//! # Conventions
//!
//! All other modules follow the conventions fixed here.
//!
//! * World frame: x points in the walking direction, y points up, ground at
//!   y = 0. The trunk translates in this plane and never rotates (the
//!   physical robot's trunk is locked against rotation by a four-bar guide).
//! * Segment orientation angles are measured from the downward vertical,
//!   counterclockwise positive. An orientation of 0 means the segment points
//!   straight down; positive tilts it toward +x.
//! * Hip flexion is positive (thigh swings forward). `hip = 0` puts the
//!   thigh vertical.
//! * Knee flexion is positive (shank swings backward relative to the thigh).
//!   `knee = 0` is a straight leg.
//! * Ankle dorsiflexion is positive (toes toward the shin). `ankle = 0`
//!   aligns the foot's heel segment with the shank. The spring-tendon slack
//!   configuration sits at `ankle = -22 deg`, `knee = 0`.
//! * Toe dorsiflexion is positive; the toe spring is unloaded at +15 deg.
//!
//! Resulting absolute orientations:
//!
//! ```text
//! phi_thigh = hip
//! phi_shank = hip - knee
//! phi_foot  = hip - knee + ankle
//! ```
//!
//! The foot is a short rigid link under the ankle with two sole
//! attachments that straddle the joint: the heel pad swept backward by
//! `heel_offset_angle` at radius `l_heel`, and the toe joint swept forward
//! by `toe_joint_offset_angle` at radius `l_foot_sole`. The toe link
//! (length `l_toe`) extends forward from the toe joint, a quarter turn
//! ahead of the foot's down axis plus the toe angle. The toe's mass is
//! lumped into the foot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Vec2;

/// Unit vector of a segment orientation angle (from downward vertical, ccw).
#[inline]
pub fn seg_dir(phi: f64) -> Vec2 {
    Vec2::new(phi.sin(), -phi.cos())
}

/// Derivative of [`seg_dir`] with respect to the angle.
#[inline]
pub fn seg_dir_deriv(phi: f64) -> Vec2 {
    Vec2::new(phi.cos(), phi.sin())
}

/// Leg side label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub const BOTH: [Side; 2] = [Side::Left, Side::Right];

    pub fn other(self) -> Side {
        match self {
            Side::Left => Side::Right,
            Side::Right => Side::Left,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Left => "left",
            Side::Right => "right",
        }
    }
}

impl std::fmt::Display for Side {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

/// Mass-bearing segments of the planar model. The toe link is massless; its
/// mass is lumped into the foot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SegmentId {
    Trunk,
    Thigh(Side),
    Shank(Side),
    Foot(Side),
}

impl SegmentId {
    pub const ALL: [SegmentId; 7] = [
        SegmentId::Trunk,
        SegmentId::Thigh(Side::Left),
        SegmentId::Shank(Side::Left),
        SegmentId::Foot(Side::Left),
        SegmentId::Thigh(Side::Right),
        SegmentId::Shank(Side::Right),
        SegmentId::Foot(Side::Right),
    ];

    /// Index into the 7-element per-segment arrays.
    pub fn index(self) -> usize {
        match self {
            SegmentId::Trunk => 0,
            SegmentId::Thigh(Side::Left) => 1,
            SegmentId::Shank(Side::Left) => 2,
            SegmentId::Foot(Side::Left) => 3,
            SegmentId::Thigh(Side::Right) => 4,
            SegmentId::Shank(Side::Right) => 5,
            SegmentId::Foot(Side::Right) => 6,
        }
    }
}

/// Segment masses in kg. Thigh/shank/foot entries are per side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentMasses {
    pub trunk: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

/// Segment rotational inertias about the segment CoM, kg m^2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentInertias {
    pub trunk: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

/// Distance of each segment CoM from its proximal joint, m (trunk: above
/// the hip axis).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentComOffsets {
    pub trunk: f64,
    pub thigh: f64,
    pub shank: f64,
    pub foot: f64,
}

/// Joint range-of-motion limits, rad. Enforced in the simulator by stiff
/// penalty stops; used here to vet commanded and initial configurations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct JointLimits {
    pub hip: [f64; 2],
    pub knee: [f64; 2],
    pub ankle: [f64; 2],
    pub toe: [f64; 2],
}

/// Complete geometric/inertial/spring parameterization of the biped.
///
/// Defaults reproduce the physical robot where the numbers are published
/// (lengths, pulley radii, spring stiffnesses, slack configuration, total
/// mass); the mass distribution and inertias are stated assumptions and can
/// be overridden from the TOML parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RobotParams {
    /// Thigh length, m.
    pub l_thigh: f64,
    /// Shank length, m.
    pub l_shank: f64,
    /// Heel link length (ankle joint to heel pad), m.
    pub l_heel: f64,
    /// Toe link length (toe joint to toe tip), m.
    pub l_toe: f64,
    /// Backward sweep of the heel link from the foot's down axis, rad. The
    /// heel pad sits behind the ankle so flat stance straddles the joint.
    pub heel_offset_angle: f64,
    /// Ankle-to-toe-joint distance, m.
    pub l_foot_sole: f64,
    /// Forward sweep of the toe-joint link from the foot's down axis, rad.
    pub toe_joint_offset_angle: f64,
    /// GAS tendon pulley radius, m.
    pub r_gas: f64,
    /// SOL tendon pulley radius, m.
    pub r_sol: f64,
    /// GAS spring stiffness, N/m.
    pub k_gas: f64,
    /// SOL spring stiffness, N/m.
    pub k_sol: f64,
    /// Toe rotational spring stiffness, N m/rad.
    pub k_toe: f64,
    /// Toe angle at which the toe spring is unloaded, rad.
    pub toe_rest_angle: f64,
    /// Ankle angle of the tendon slack configuration, rad.
    pub ankle_slack_angle: f64,
    /// Knee angle of the tendon slack configuration, rad.
    pub knee_slack_angle: f64,
    pub segment_masses: SegmentMasses,
    pub segment_inertias: SegmentInertias,
    pub segment_com_offsets: SegmentComOffsets,
    /// Total robot mass, kg. Must equal the segment-mass sum.
    pub total_mass: f64,
    /// Motor supply voltage, V.
    pub supply_voltage: f64,
    /// Gravitational acceleration, m/s^2.
    pub gravity: f64,
    pub joint_limits: JointLimits,
}

impl Default for RobotParams {
    fn default() -> Self {
        let deg = std::f64::consts::PI / 180.0;
        RobotParams {
            l_thigh: 0.160,
            l_shank: 0.160,
            l_heel: 0.032,
            l_toe: 0.017,
            // Flat sole 18 mm under the ankle: heel pad 26.5 mm behind,
            // toe joint 12 mm ahead, toe tip raised at rest.
            heel_offset_angle: 55.8 * std::f64::consts::PI / 180.0,
            l_foot_sole: 0.0216,
            toe_joint_offset_angle: 33.7 * std::f64::consts::PI / 180.0,
            r_gas: 0.013,
            r_sol: 0.013,
            k_gas: 1400.0,
            k_sol: 4500.0,
            // 8.04 N mm/deg expressed in N m/rad.
            k_toe: 8.04e-3 * 180.0 / std::f64::consts::PI,
            toe_rest_angle: 15.0 * deg,
            ankle_slack_angle: -22.0 * deg,
            knee_slack_angle: 0.0,
            // Assumed distribution of the 2.1 kg total: trunk 60 %, each
            // thigh 10 %, each shank 7 %, each foot 3 %.
            segment_masses: SegmentMasses {
                trunk: 1.26,
                thigh: 0.21,
                shank: 0.147,
                foot: 0.063,
            },
            // Thin-rod inertias about mid-segment.
            segment_inertias: SegmentInertias {
                trunk: 1.26 * 0.10 * 0.10 / 12.0,
                thigh: 0.21 * 0.160 * 0.160 / 12.0,
                shank: 0.147 * 0.160 * 0.160 / 12.0,
                foot: 0.063 * 0.032 * 0.032 / 12.0,
            },
            segment_com_offsets: SegmentComOffsets {
                trunk: 0.05,
                thigh: 0.080,
                shank: 0.080,
                foot: 0.016,
            },
            total_mass: 2.1,
            supply_voltage: 24.0,
            gravity: 9.81,
            // The ankle's plantarflexion stop coincides with the tendon
            // slack angle: nothing but the stop resists plantarflexion, and
            // the swing ankle rests there.
            joint_limits: JointLimits {
                hip: [-60.0 * deg, 60.0 * deg],
                knee: [0.0, 140.0 * deg],
                ankle: [-22.0 * deg, 40.0 * deg],
                toe: [-20.0 * deg, 80.0 * deg],
            },
        }
    }
}

/// Parameter validation failure, reporting the first violated invariant.
#[derive(Debug, Error, PartialEq)]
pub enum ParamError {
    #[error("non-positive {name} ({value})")]
    NonPositive { name: &'static str, value: f64 },
    #[error("mass-sum mismatch: segment masses sum to {sum} but total_mass is {total}")]
    MassSumMismatch { sum: f64, total: f64 },
    #[error("joint limit for {name} is not ordered (min {min} >= max {max})")]
    UnorderedLimit { name: &'static str, min: f64, max: f64 },
    #[error("{name} ({value}) out of range [{min}, {max}]")]
    OutOfRange { name: &'static str, value: f64, min: f64, max: f64 },
    #[error("parameter file error: {0}")]
    Parse(String),
}

impl RobotParams {
    /// Checks every parameter invariant and returns the params unchanged on
    /// success. Reports the first violated invariant by name.
    pub fn validate(self) -> Result<RobotParams, ParamError> {
        let positives = [
            ("l_thigh", self.l_thigh),
            ("l_shank", self.l_shank),
            ("l_heel", self.l_heel),
            ("l_toe", self.l_toe),
            ("l_foot_sole", self.l_foot_sole),
            ("r_gas", self.r_gas),
            ("r_sol", self.r_sol),
            ("k_gas", self.k_gas),
            ("k_sol", self.k_sol),
            ("k_toe", self.k_toe),
            ("segment_masses.trunk", self.segment_masses.trunk),
            ("segment_masses.thigh", self.segment_masses.thigh),
            ("segment_masses.shank", self.segment_masses.shank),
            ("segment_masses.foot", self.segment_masses.foot),
            ("segment_inertias.trunk", self.segment_inertias.trunk),
            ("segment_inertias.thigh", self.segment_inertias.thigh),
            ("segment_inertias.shank", self.segment_inertias.shank),
            ("segment_inertias.foot", self.segment_inertias.foot),
            ("total_mass", self.total_mass),
            ("supply_voltage", self.supply_voltage),
            ("gravity", self.gravity),
        ];
        for (name, value) in positives {
            if !(value > 0.0) {
                return Err(ParamError::NonPositive { name, value });
            }
        }
        let sum = self.segment_masses.trunk
            + 2.0 * (self.segment_masses.thigh + self.segment_masses.shank + self.segment_masses.foot);
        if (sum - self.total_mass).abs() > 1e-9 * self.total_mass {
            return Err(ParamError::MassSumMismatch { sum, total: self.total_mass });
        }
        let limits = [
            ("hip", self.joint_limits.hip),
            ("knee", self.joint_limits.knee),
            ("ankle", self.joint_limits.ankle),
            ("toe", self.joint_limits.toe),
        ];
        for (name, [lo, hi]) in limits {
            if !(lo < hi) {
                return Err(ParamError::UnorderedLimit { name, min: lo, max: hi });
            }
        }
        let [toe_lo, toe_hi] = self.joint_limits.toe;
        if self.toe_rest_angle < toe_lo || self.toe_rest_angle > toe_hi {
            return Err(ParamError::OutOfRange {
                name: "toe_rest_angle",
                value: self.toe_rest_angle,
                min: toe_lo,
                max: toe_hi,
            });
        }
        let half_pi = std::f64::consts::FRAC_PI_2;
        for (name, value) in [
            ("heel_offset_angle", self.heel_offset_angle),
            ("toe_joint_offset_angle", self.toe_joint_offset_angle),
        ] {
            if !(value > 0.0 && value < half_pi) {
                return Err(ParamError::OutOfRange { name, value, min: 0.0, max: half_pi });
            }
        }
        Ok(self)
    }

    /// Parses a TOML parameter file. Unknown keys are rejected; missing keys
    /// fall back to the defaults.
    pub fn from_toml_str(text: &str) -> Result<RobotParams, ParamError> {
        let params: RobotParams =
            toml::from_str(text).map_err(|e| ParamError::Parse(e.to_string()))?;
        params.validate()
    }

    pub fn mass(&self, seg: SegmentId) -> f64 {
        match seg {
            SegmentId::Trunk => self.segment_masses.trunk,
            SegmentId::Thigh(_) => self.segment_masses.thigh,
            SegmentId::Shank(_) => self.segment_masses.shank,
            SegmentId::Foot(_) => self.segment_masses.foot,
        }
    }

    pub fn inertia(&self, seg: SegmentId) -> f64 {
        match seg {
            SegmentId::Trunk => self.segment_inertias.trunk,
            SegmentId::Thigh(_) => self.segment_inertias.thigh,
            SegmentId::Shank(_) => self.segment_inertias.shank,
            SegmentId::Foot(_) => self.segment_inertias.foot,
        }
    }
}

/// Joint angles in rad, following the module conventions.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointAngles {
    pub hip_l: f64,
    pub hip_r: f64,
    pub knee_l: f64,
    pub knee_r: f64,
    pub ankle_l: f64,
    pub ankle_r: f64,
    pub toe_l: f64,
    pub toe_r: f64,
}

/// Joint angular velocities in rad/s, same layout as [`JointAngles`].
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointRates {
    pub hip_l: f64,
    pub hip_r: f64,
    pub knee_l: f64,
    pub knee_r: f64,
    pub ankle_l: f64,
    pub ankle_r: f64,
    pub toe_l: f64,
    pub toe_r: f64,
}

macro_rules! side_accessors {
    ($ty:ident) => {
        impl $ty {
            pub fn hip(&self, side: Side) -> f64 {
                match side {
                    Side::Left => self.hip_l,
                    Side::Right => self.hip_r,
                }
            }
            pub fn knee(&self, side: Side) -> f64 {
                match side {
                    Side::Left => self.knee_l,
                    Side::Right => self.knee_r,
                }
            }
            pub fn ankle(&self, side: Side) -> f64 {
                match side {
                    Side::Left => self.ankle_l,
                    Side::Right => self.ankle_r,
                }
            }
            pub fn toe(&self, side: Side) -> f64 {
                match side {
                    Side::Left => self.toe_l,
                    Side::Right => self.toe_r,
                }
            }
        }
    };
}

side_accessors!(JointAngles);
side_accessors!(JointRates);

impl JointAngles {
    /// Checks all angles against the configured range-of-motion limits.
    pub fn check_limits(&self, params: &RobotParams) -> Result<(), ParamError> {
        let checks = [
            ("hip_l", self.hip_l, params.joint_limits.hip),
            ("hip_r", self.hip_r, params.joint_limits.hip),
            ("knee_l", self.knee_l, params.joint_limits.knee),
            ("knee_r", self.knee_r, params.joint_limits.knee),
            ("ankle_l", self.ankle_l, params.joint_limits.ankle),
            ("ankle_r", self.ankle_r, params.joint_limits.ankle),
            ("toe_l", self.toe_l, params.joint_limits.toe),
            ("toe_r", self.toe_r, params.joint_limits.toe),
        ];
        for (name, value, [lo, hi]) in checks {
            if value < lo || value > hi {
                return Err(ParamError::OutOfRange { name, value, min: lo, max: hi });
            }
        }
        Ok(())
    }
}

/// Trunk state. The trunk translates in the sagittal plane; its rotation
/// and angular velocity are identically zero at all times (four-bar lock),
/// so no rotational coordinate is carried.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TrunkState {
    /// Fore-aft position, m.
    pub x: f64,
    /// Height of the hip axis, m.
    pub y: f64,
    pub vx: f64,
    pub vy: f64,
}

impl TrunkState {
    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn velocity(&self) -> Vec2 {
        Vec2::new(self.vx, self.vy)
    }

    /// Trunk rotation, exactly zero by construction.
    pub fn rotation(&self) -> f64 {
        0.0
    }
}

/// Joint and contact-point positions of a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointPoints {
    pub hip: Vec2,
    pub knee_l: Vec2,
    pub ankle_l: Vec2,
    /// Heel pad contact point.
    pub heel_l: Vec2,
    pub toe_joint_l: Vec2,
    pub toe_tip_l: Vec2,
    pub knee_r: Vec2,
    pub ankle_r: Vec2,
    pub heel_r: Vec2,
    pub toe_joint_r: Vec2,
    pub toe_tip_r: Vec2,
}

impl JointPoints {
    pub fn knee(&self, side: Side) -> Vec2 {
        match side {
            Side::Left => self.knee_l,
            Side::Right => self.knee_r,
        }
    }
    pub fn ankle(&self, side: Side) -> Vec2 {
        match side {
            Side::Left => self.ankle_l,
            Side::Right => self.ankle_r,
        }
    }
    pub fn heel(&self, side: Side) -> Vec2 {
        match side {
            Side::Left => self.heel_l,
            Side::Right => self.heel_r,
        }
    }
    pub fn toe_joint(&self, side: Side) -> Vec2 {
        match side {
            Side::Left => self.toe_joint_l,
            Side::Right => self.toe_joint_r,
        }
    }
    pub fn toe_tip(&self, side: Side) -> Vec2 {
        match side {
            Side::Left => self.toe_tip_l,
            Side::Right => self.toe_tip_r,
        }
    }
}

/// Per-segment center-of-mass kinematics plus the joint points.
///
/// Arrays are indexed by [`SegmentId::index`].
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SegmentKinematics {
    pub com_position: [Vec2; 7],
    pub com_velocity: [Vec2; 7],
    /// Orientation from downward vertical, ccw positive, rad.
    pub orientation: [f64; 7],
    pub angular_velocity: [f64; 7],
    pub joints: JointPoints,
}

impl SegmentKinematics {
    pub fn com_position_of(&self, seg: SegmentId) -> Vec2 {
        self.com_position[seg.index()]
    }
    pub fn com_velocity_of(&self, seg: SegmentId) -> Vec2 {
        self.com_velocity[seg.index()]
    }
}

/// Absolute orientation of a leg's thigh/shank/foot links.
#[inline]
pub fn leg_orientations(q: &JointAngles, side: Side) -> (f64, f64, f64) {
    let phi_thigh = q.hip(side);
    let phi_shank = phi_thigh - q.knee(side);
    let phi_foot = phi_shank + q.ankle(side);
    (phi_thigh, phi_shank, phi_foot)
}

/// Absolute toe-link direction angle. The toe extends forward from the
/// sole, a quarter turn ahead of the heel link plus the toe angle.
#[inline]
pub fn toe_direction_angle(phi_foot: f64, toe: f64) -> f64 {
    phi_foot + std::f64::consts::FRAC_PI_2 + toe
}

/// Planar forward kinematics: joint points, segment CoM positions, and
/// orientations. Velocity fields are left at zero.
pub fn forward_kinematics(params: &RobotParams, trunk: &TrunkState, q: &JointAngles) -> SegmentKinematics {
    let mut kin = SegmentKinematics::default();
    let hip = trunk.position();
    kin.joints.hip = hip;

    kin.com_position[SegmentId::Trunk.index()] =
        hip + Vec2::new(0.0, params.segment_com_offsets.trunk);
    kin.orientation[SegmentId::Trunk.index()] = 0.0;

    for side in Side::BOTH {
        let (phi_t, phi_s, phi_f) = leg_orientations(q, side);
        let knee = hip + params.l_thigh * seg_dir(phi_t);
        let ankle = knee + params.l_shank * seg_dir(phi_s);
        let heel = ankle + params.l_heel * seg_dir(phi_f - params.heel_offset_angle);
        let toe_joint = ankle + params.l_foot_sole * seg_dir(phi_f + params.toe_joint_offset_angle);
        let toe_tip = toe_joint + params.l_toe * seg_dir(toe_direction_angle(phi_f, q.toe(side)));

        match side {
            Side::Left => {
                kin.joints.knee_l = knee;
                kin.joints.ankle_l = ankle;
                kin.joints.heel_l = heel;
                kin.joints.toe_joint_l = toe_joint;
                kin.joints.toe_tip_l = toe_tip;
            }
            Side::Right => {
                kin.joints.knee_r = knee;
                kin.joints.ankle_r = ankle;
                kin.joints.heel_r = heel;
                kin.joints.toe_joint_r = toe_joint;
                kin.joints.toe_tip_r = toe_tip;
            }
        }

        let off = &params.segment_com_offsets;
        kin.com_position[SegmentId::Thigh(side).index()] = hip + off.thigh * seg_dir(phi_t);
        kin.com_position[SegmentId::Shank(side).index()] = knee + off.shank * seg_dir(phi_s);
        kin.com_position[SegmentId::Foot(side).index()] = ankle + off.foot * seg_dir(phi_f);
        kin.orientation[SegmentId::Thigh(side).index()] = phi_t;
        kin.orientation[SegmentId::Shank(side).index()] = phi_s;
        kin.orientation[SegmentId::Foot(side).index()] = phi_f;
    }
    kin
}

/// Forward kinematics with segment CoM linear velocities and angular
/// velocities filled in from the joint rates.
pub fn segment_com_velocities(
    params: &RobotParams,
    trunk: &TrunkState,
    q: &JointAngles,
    qd: &JointRates,
) -> SegmentKinematics {
    let mut kin = forward_kinematics(params, trunk, q);
    let v_hip = trunk.velocity();

    kin.com_velocity[SegmentId::Trunk.index()] = v_hip;
    kin.angular_velocity[SegmentId::Trunk.index()] = 0.0;

    for side in Side::BOTH {
        let (phi_t, phi_s, phi_f) = leg_orientations(q, side);
        let w_t = qd.hip(side);
        let w_s = w_t - qd.knee(side);
        let w_f = w_s + qd.ankle(side);

        let v_knee = v_hip + params.l_thigh * w_t * seg_dir_deriv(phi_t);
        let v_ankle = v_knee + params.l_shank * w_s * seg_dir_deriv(phi_s);

        let off = &params.segment_com_offsets;
        kin.com_velocity[SegmentId::Thigh(side).index()] =
            v_hip + off.thigh * w_t * seg_dir_deriv(phi_t);
        kin.com_velocity[SegmentId::Shank(side).index()] =
            v_knee + off.shank * w_s * seg_dir_deriv(phi_s);
        kin.com_velocity[SegmentId::Foot(side).index()] =
            v_ankle + off.foot * w_f * seg_dir_deriv(phi_f);
        kin.angular_velocity[SegmentId::Thigh(side).index()] = w_t;
        kin.angular_velocity[SegmentId::Shank(side).index()] = w_s;
        kin.angular_velocity[SegmentId::Foot(side).index()] = w_f;
    }
    kin
}

/// Whole-robot center of mass position.
pub fn com_position(params: &RobotParams, kin: &SegmentKinematics) -> Vec2 {
    let mut sum = Vec2::zeros();
    for seg in SegmentId::ALL {
        sum += params.mass(seg) * kin.com_position_of(seg);
    }
    sum / params.total_mass
}

/// Whole-robot center of mass velocity.
pub fn com_velocity(params: &RobotParams, kin: &SegmentKinematics) -> Vec2 {
    let mut sum = Vec2::zeros();
    for seg in SegmentId::ALL {
        sum += params.mass(seg) * kin.com_velocity_of(seg);
    }
    sum / params.total_mass
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    fn default_trunk() -> TrunkState {
        TrunkState { x: 0.0, y: 0.4, vx: 0.0, vy: 0.0 }
    }

    #[test]
    fn default_params_are_accepted() {
        RobotParams::default().validate().unwrap();
    }

    #[test]
    fn zero_stiffness_is_rejected() {
        let params = RobotParams { k_sol: 0.0, ..RobotParams::default() };
        assert_eq!(
            params.validate().unwrap_err(),
            ParamError::NonPositive { name: "k_sol", value: 0.0 }
        );
    }

    #[test]
    fn mass_sum_mismatch_is_rejected() {
        let mut params = RobotParams::default();
        params.segment_masses.trunk = 1.16; // sum 2.0 vs total 2.1
        match params.validate().unwrap_err() {
            ParamError::MassSumMismatch { sum, total } => {
                assert_relative_eq!(sum, 2.0, epsilon = 1e-12);
                assert_relative_eq!(total, 2.1, epsilon = 1e-12);
            }
            e => panic!("unexpected error {e:?}"),
        }
    }

    #[test]
    fn toml_round_trip_and_unknown_key_rejection() {
        let text = toml::to_string(&RobotParams::default()).unwrap();
        let parsed = RobotParams::from_toml_str(&text).unwrap();
        assert_eq!(parsed, RobotParams::default());

        let err = RobotParams::from_toml_str("l_thgih = 0.2\n").unwrap_err();
        assert!(matches!(err, ParamError::Parse(_)));
    }

    #[test]
    fn straight_leg_spans_thigh_plus_shank() {
        let params = RobotParams::default();
        let kin = forward_kinematics(&params, &default_trunk(), &JointAngles::default());
        let d = (kin.joints.ankle_l - kin.joints.hip).norm();
        assert_abs_diff_eq!(d, 0.320, epsilon = 1e-12);
        let d = (kin.joints.ankle_r - kin.joints.hip).norm();
        assert_abs_diff_eq!(d, 0.320, epsilon = 1e-12);
    }

    #[test]
    fn right_angle_knee_puts_ankle_horizontal_from_knee() {
        let params = RobotParams::default();
        let q = JointAngles { knee_l: 90.0 * DEG, ..JointAngles::default() };
        let kin = forward_kinematics(&params, &default_trunk(), &q);
        let rel = kin.joints.ankle_l - kin.joints.knee_l;
        // Knee flexion swings the shank backward.
        assert_abs_diff_eq!(rel.x, -params.l_shank, epsilon = 1e-12);
        assert_abs_diff_eq!(rel.y, 0.0, epsilon = 1e-12);
    }

    /// Independent oracle: compose the same chain with nalgebra isometries.
    fn isometry_chain(params: &RobotParams, trunk: &TrunkState, q: &JointAngles, side: Side) -> [Vec2; 5] {
        use nalgebra::{Isometry2, Point2, Vector2};
        let down = |len: f64| Isometry2::new(Vector2::new(0.0, -len), 0.0);
        let rot = |a: f64| Isometry2::new(Vector2::zeros(), a);
        let base = Isometry2::new(Vector2::new(trunk.x, trunk.y), 0.0);
        let hip_frame = base * rot(q.hip(side));
        let knee_pt = hip_frame * down(params.l_thigh) * Point2::origin();
        let knee_frame = hip_frame * down(params.l_thigh) * rot(-q.knee(side));
        let ankle_pt = knee_frame * down(params.l_shank) * Point2::origin();
        let ankle_frame = knee_frame * down(params.l_shank) * rot(q.ankle(side));
        let heel_pt =
            ankle_frame * rot(-params.heel_offset_angle) * down(params.l_heel) * Point2::origin();
        let toe_joint_frame = ankle_frame * rot(params.toe_joint_offset_angle) * down(params.l_foot_sole);
        let toe_joint_pt = toe_joint_frame * Point2::origin();
        let tip_pt = toe_joint_frame
            * rot(std::f64::consts::FRAC_PI_2 + q.toe(side) - params.toe_joint_offset_angle)
            * down(params.l_toe)
            * Point2::origin();
        [knee_pt.coords, ankle_pt.coords, heel_pt.coords, toe_joint_pt.coords, tip_pt.coords]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]
        #[test]
        fn fk_matches_isometry_chain(
            hip in -1.0f64..1.0, knee in 0.0f64..2.0, ankle in -0.8f64..0.6, toe in -0.3f64..1.2,
            x in -1.0f64..1.0, y in 0.1f64..0.6,
        ) {
            let params = RobotParams::default();
            let trunk = TrunkState { x, y, vx: 0.0, vy: 0.0 };
            let q = JointAngles {
                hip_l: hip, knee_l: knee, ankle_l: ankle, toe_l: toe,
                hip_r: -hip * 0.5, knee_r: knee * 0.3, ankle_r: ankle * 0.7, toe_r: toe * 0.2,
            };
            let kin = forward_kinematics(&params, &trunk, &q);
            for side in Side::BOTH {
                let oracle = isometry_chain(&params, &trunk, &q, side);
                prop_assert!((kin.joints.knee(side) - oracle[0]).norm() < 1e-12);
                prop_assert!((kin.joints.ankle(side) - oracle[1]).norm() < 1e-12);
                prop_assert!((kin.joints.heel(side) - oracle[2]).norm() < 1e-12);
                prop_assert!((kin.joints.toe_joint(side) - oracle[3]).norm() < 1e-12);
                prop_assert!((kin.joints.toe_tip(side) - oracle[4]).norm() < 1e-12);
            }
        }

        #[test]
        fn chain_closure_holds(
            hip in -1.0f64..1.0, knee in 0.0f64..2.0, ankle in -0.8f64..0.6,
        ) {
            let params = RobotParams::default();
            let q = JointAngles { hip_l: hip, knee_l: knee, ankle_l: ankle, ..JointAngles::default() };
            let kin = forward_kinematics(&params, &default_trunk(), &q);
            // Each child link's proximal joint must coincide with the
            // parent's distal end, recomputed from orientations.
            let (phi_t, phi_s, phi_f) = leg_orientations(&q, Side::Left);
            let knee_pt = kin.joints.hip + params.l_thigh * seg_dir(phi_t);
            let ankle_pt = knee_pt + params.l_shank * seg_dir(phi_s);
            let heel_pt = ankle_pt + params.l_heel * seg_dir(phi_f - params.heel_offset_angle);
            prop_assert!((kin.joints.knee_l - knee_pt).norm() < 1e-12);
            prop_assert!((kin.joints.ankle_l - ankle_pt).norm() < 1e-12);
            prop_assert!((kin.joints.heel_l - heel_pt).norm() < 1e-12);
        }
    }

    #[test]
    fn pure_translation_moves_every_segment_equally() {
        let params = RobotParams::default();
        let trunk = TrunkState { x: 0.0, y: 0.4, vx: 0.44, vy: 0.0 };
        let q = JointAngles { hip_l: 0.3, knee_l: 0.5, ankle_l: -0.2, ..JointAngles::default() };
        let kin = segment_com_velocities(&params, &trunk, &q, &JointRates::default());
        for seg in SegmentId::ALL {
            let v = kin.com_velocity_of(seg);
            assert_abs_diff_eq!(v.x, 0.44, epsilon = 1e-15);
            assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn all_zero_states_give_zero_velocities() {
        let params = RobotParams::default();
        let kin = segment_com_velocities(
            &params,
            &TrunkState::default(),
            &JointAngles::default(),
            &JointRates::default(),
        );
        for seg in SegmentId::ALL {
            assert_eq!(kin.com_velocity_of(seg), Vec2::zeros());
        }
    }

    #[test]
    fn hip_rate_gives_lever_arm_speed_on_straight_leg() {
        let params = RobotParams::default();
        let qd = JointRates { hip_l: 1.0, ..JointRates::default() };
        let kin = segment_com_velocities(&params, &default_trunk(), &JointAngles::default(), &qd);
        let foot_com = kin.com_position_of(SegmentId::Foot(Side::Left));
        let lever = (foot_com - kin.joints.hip).norm();
        let speed = kin.com_velocity_of(SegmentId::Foot(Side::Left)).norm();
        assert_relative_eq!(speed, lever, epsilon = 1e-12);
    }

    /// Analytic velocities must agree with central differences of positions.
    #[test]
    fn velocities_match_finite_differences() {
        let params = RobotParams::default();
        let traj = |t: f64| {
            let q = JointAngles {
                hip_l: 0.4 * (2.0 * t).sin(),
                knee_l: 0.5 + 0.3 * (3.0 * t).cos(),
                ankle_l: -0.2 * (1.5 * t).sin(),
                toe_l: 0.2 * (2.5 * t).cos(),
                hip_r: -0.3 * (2.0 * t).cos(),
                knee_r: 0.4 + 0.2 * (2.2 * t).sin(),
                ankle_r: 0.1 * (1.8 * t).cos(),
                toe_r: 0.25,
            };
            let trunk = TrunkState {
                x: 0.4 * t,
                y: 0.4 + 0.02 * (4.0 * t).sin(),
                vx: 0.4,
                vy: 0.08 * (4.0 * t).cos(),
            };
            (trunk, q)
        };
        let rates = |t: f64| JointRates {
            hip_l: 0.8 * (2.0 * t).cos(),
            knee_l: -0.9 * (3.0 * t).sin(),
            ankle_l: -0.3 * (1.5 * t).cos(),
            toe_l: -0.5 * (2.5 * t).sin(),
            hip_r: 0.6 * (2.0 * t).sin(),
            knee_r: 0.44 * (2.2 * t).cos(),
            ankle_r: -0.18 * (1.8 * t).sin(),
            toe_r: 0.0,
        };
        let h = 1e-6;
        for &t in &[0.0, 0.3, 1.1, 2.7] {
            let (trunk, q) = traj(t);
            let kin = segment_com_velocities(&params, &trunk, &q, &rates(t));
            let (trunk_m, q_m) = traj(t - h);
            let (trunk_p, q_p) = traj(t + h);
            let kin_m = forward_kinematics(&params, &trunk_m, &q_m);
            let kin_p = forward_kinematics(&params, &trunk_p, &q_p);
            for seg in SegmentId::ALL {
                let fd = (kin_p.com_position_of(seg) - kin_m.com_position_of(seg)) / (2.0 * h);
                let v = kin.com_velocity_of(seg);
                assert!((v - fd).norm() < 1e-6, "segment {seg:?} at t={t}: {v:?} vs {fd:?}");
            }
        }
    }

    /// Swapping left/right joint angles exchanges the two legs' geometry.
    #[test]
    fn left_right_swap_exchanges_leg_positions() {
        let params = RobotParams::default();
        let q = JointAngles {
            hip_l: 0.3, knee_l: 0.7, ankle_l: -0.2, toe_l: 0.3,
            hip_r: -0.1, knee_r: 0.2, ankle_r: 0.1, toe_r: 0.26,
        };
        let swapped = JointAngles {
            hip_l: q.hip_r, knee_l: q.knee_r, ankle_l: q.ankle_r, toe_l: q.toe_r,
            hip_r: q.hip_l, knee_r: q.knee_l, ankle_r: q.ankle_l, toe_r: q.toe_l,
        };
        let kin = forward_kinematics(&params, &default_trunk(), &q);
        let kin_sw = forward_kinematics(&params, &default_trunk(), &swapped);
        assert_eq!(kin.joints.ankle_l, kin_sw.joints.ankle_r);
        assert_eq!(kin.joints.toe_tip_l, kin_sw.joints.toe_tip_r);
        assert_eq!(
            kin.com_position_of(SegmentId::Shank(Side::Left)),
            kin_sw.com_position_of(SegmentId::Shank(Side::Right))
        );
    }

    /// Negating all leg angles mirrors the hip-to-sole chain about the
    /// trunk's vertical axis.
    #[test]
    fn angle_negation_mirrors_leg_chain() {
        let params = RobotParams::default();
        let trunk = default_trunk();
        let q = JointAngles { hip_l: 0.35, knee_l: 0.6, ankle_l: -0.25, ..JointAngles::default() };
        let neg = JointAngles { hip_l: -0.35, knee_l: -0.6, ankle_l: 0.25, ..JointAngles::default() };
        let kin = forward_kinematics(&params, &trunk, &q);
        let kin_n = forward_kinematics(&params, &trunk, &neg);
        for (a, b) in [
            (kin.joints.knee_l, kin_n.joints.knee_l),
            (kin.joints.ankle_l, kin_n.joints.ankle_l),
        ] {
            assert_abs_diff_eq!(a.x - trunk.x, -(b.x - trunk.x), epsilon = 1e-12);
            assert_abs_diff_eq!(a.y, b.y, epsilon = 1e-12);
        }
    }

    #[test]
    fn joint_limit_check_reports_violations() {
        let params = RobotParams::default();
        let ok = JointAngles { knee_l: 0.5, toe_l: 0.26, toe_r: 0.26, ..JointAngles::default() };
        ok.check_limits(&params).unwrap();
        let bad = JointAngles { knee_l: -0.2, ..JointAngles::default() };
        assert!(matches!(
            bad.check_limits(&params),
            Err(ParamError::OutOfRange { name: "knee_l", .. })
        ));
    }
}
