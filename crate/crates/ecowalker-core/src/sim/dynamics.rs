//! Dynamics assembly for the constrained planar multibody model.
//!
//! Generalized coordinates (10): trunk x, trunk y, then per leg hip, knee,
//! ankle, toe (left block first). The trunk's rotational coordinate is
//! eliminated outright, which enforces the four-bar lock exactly.
//!
//! The equations of motion are assembled from per-segment center-of-mass
//! Jacobians:
//!
//! ```text
//! M(q)   = sum_b m_b J_b^T J_b + I_b S_b^T S_b  (+ toe armature)
//! M qdd  = Q_applied + Q_gravity + Q_contact - sum_b m_b J_b^T a_bias,b
//! ```
//!
//! where `a_bias` is the velocity-product acceleration of each CoM. Ground
//! contact is a penalty spring-damper with regularized Coulomb friction at
//! the four sole/toe-tip points; its velocity-feedback terms are collected
//! into a damping matrix that the integrator treats implicitly.

use nalgebra::{SMatrix, SVector};

use crate::model::{RobotParams, SegmentId, Side};
use crate::Vec2;

pub const NDOF: usize = 10;

pub type Q = SVector<f64, NDOF>;
pub type Mat = SMatrix<f64, NDOF, NDOF>;

/// Coordinate indices.
pub mod coord {
    pub const X: usize = 0;
    pub const Y: usize = 1;
    pub const HIP_L: usize = 2;
    pub const KNEE_L: usize = 3;
    pub const ANKLE_L: usize = 4;
    pub const TOE_L: usize = 5;
    pub const HIP_R: usize = 6;
    pub const KNEE_R: usize = 7;
    pub const ANKLE_R: usize = 8;
    pub const TOE_R: usize = 9;

    pub fn leg_base(side: crate::model::Side) -> usize {
        match side {
            crate::model::Side::Left => HIP_L,
            crate::model::Side::Right => HIP_R,
        }
    }

    pub const NAMES: [&str; super::NDOF] = [
        "x", "y", "hip_l", "knee_l", "ankle_l", "toe_l", "hip_r", "knee_r", "ankle_r", "toe_r",
    ];
}

/// A material point on the kinematic tree with its position, velocity,
/// Jacobian rows, and velocity-product acceleration.
#[derive(Debug, Clone, Copy)]
pub struct PointKin {
    pub pos: Vec2,
    pub vel: Vec2,
    pub jx: Q,
    pub jy: Q,
    pub a_bias: Vec2,
}

impl PointKin {
    fn base(q: &Q, qd: &Q) -> PointKin {
        let mut jx = Q::zeros();
        let mut jy = Q::zeros();
        jx[coord::X] = 1.0;
        jy[coord::Y] = 1.0;
        PointKin {
            pos: Vec2::new(q[coord::X], q[coord::Y]),
            vel: Vec2::new(qd[coord::X], qd[coord::Y]),
            jx,
            jy,
            a_bias: Vec2::zeros(),
        }
    }

    /// Extends the chain by a link of length `len` at absolute angle `phi`
    /// (from downward vertical, ccw), whose angle depends on coordinates
    /// through the selector row `spin` with rate `w`.
    fn extend(&self, len: f64, phi: f64, w: f64, spin: &Q) -> PointKin {
        let (s, c) = phi.sin_cos();
        let dir = Vec2::new(s, -c);
        let dirp = Vec2::new(c, s);
        PointKin {
            pos: self.pos + len * dir,
            vel: self.vel + len * w * dirp,
            jx: self.jx + len * c * spin,
            jy: self.jy + len * s * spin,
            a_bias: self.a_bias - len * w * w * dir,
        }
    }
}

/// One rigid body: its CoM point kinematics plus angular data.
#[derive(Debug, Clone, Copy)]
pub struct BodyKin {
    pub seg: SegmentId,
    pub com: PointKin,
    pub spin: Q,
    pub omega: f64,
}

/// Full kinematic and Jacobian data for one configuration.
#[derive(Debug, Clone)]
pub struct TreeKin {
    pub bodies: [BodyKin; 7],
    /// Contact points in order: heel L, toe tip L, heel R, toe tip R.
    pub contact_points: [PointKin; 4],
    pub ankle: [PointKin; 2],
}

fn spin_row(indices: &[(usize, f64)]) -> Q {
    let mut row = Q::zeros();
    for (i, s) in indices {
        row[*i] = *s;
    }
    row
}

pub fn build_tree(params: &RobotParams, q: &Q, qd: &Q) -> TreeKin {
    let hip = PointKin::base(q, qd);
    let zero_spin = Q::zeros();

    // Trunk CoM sits straight above the hip: dir(pi) = (0, 1).
    let trunk_com = hip.extend(params.segment_com_offsets.trunk, std::f64::consts::PI, 0.0, &zero_spin);
    let mut bodies = [BodyKin { seg: SegmentId::Trunk, com: trunk_com, spin: zero_spin, omega: 0.0 }; 7];
    let mut contact_points = [hip; 4];
    let mut ankles = [hip; 2];

    for side in Side::BOTH {
        let b = coord::leg_base(side);
        let phi_t = q[b];
        let phi_s = phi_t - q[b + 1];
        let phi_f = phi_s + q[b + 2];
        let w_t = qd[b];
        let w_s = w_t - qd[b + 1];
        let w_f = w_s + qd[b + 2];
        let spin_t = spin_row(&[(b, 1.0)]);
        let spin_s = spin_row(&[(b, 1.0), (b + 1, -1.0)]);
        let spin_f = spin_row(&[(b, 1.0), (b + 1, -1.0), (b + 2, 1.0)]);

        let knee = hip.extend(params.l_thigh, phi_t, w_t, &spin_t);
        let ankle = knee.extend(params.l_shank, phi_s, w_s, &spin_s);
        let heel = ankle.extend(params.l_heel, phi_f - params.heel_offset_angle, w_f, &spin_f);
        let toe_joint =
            ankle.extend(params.l_foot_sole, phi_f + params.toe_joint_offset_angle, w_f, &spin_f);

        let phi_toe = phi_f + std::f64::consts::FRAC_PI_2 + q[b + 3];
        let w_toe = w_f + qd[b + 3];
        let spin_toe = {
            let mut row = spin_f;
            row[b + 3] = 1.0;
            row
        };
        let toe_tip = toe_joint.extend(params.l_toe, phi_toe, w_toe, &spin_toe);

        let off = &params.segment_com_offsets;
        let thigh_com = hip.extend(off.thigh, phi_t, w_t, &spin_t);
        let shank_com = knee.extend(off.shank, phi_s, w_s, &spin_s);
        let foot_com = ankle.extend(off.foot, phi_f, w_f, &spin_f);

        let (slot, cslot) = match side {
            Side::Left => (1usize, 0usize),
            Side::Right => (4usize, 2usize),
        };
        bodies[slot] = BodyKin { seg: SegmentId::Thigh(side), com: thigh_com, spin: spin_t, omega: w_t };
        bodies[slot + 1] = BodyKin { seg: SegmentId::Shank(side), com: shank_com, spin: spin_s, omega: w_s };
        bodies[slot + 2] = BodyKin { seg: SegmentId::Foot(side), com: foot_com, spin: spin_f, omega: w_f };
        contact_points[cslot] = heel;
        contact_points[cslot + 1] = toe_tip;
        let side_idx = match side {
            Side::Left => 0,
            Side::Right => 1,
        };
        ankles[side_idx] = ankle;
    }

    TreeKin { bodies, contact_points, ankle: ankles }
}

/// Inertial terms of the assembled system.
pub struct Inertial {
    pub mass_matrix: Mat,
    /// Generalized gravity minus velocity-product bias.
    pub rhs: Q,
}

pub fn assemble_inertial(params: &RobotParams, tree: &TreeKin, toe_armature: f64) -> Inertial {
    let mut m_mat = Mat::zeros();
    let mut rhs = Q::zeros();
    let g = params.gravity;

    for body in &tree.bodies {
        let m = params.mass(body.seg);
        let inertia = params.inertia(body.seg);
        let jx = &body.com.jx;
        let jy = &body.com.jy;
        m_mat.syger(m, jx, jx, 1.0);
        m_mat.syger(m, jy, jy, 1.0);
        if inertia > 0.0 {
            m_mat.syger(inertia, &body.spin, &body.spin, 1.0);
        }
        // Gravity and velocity-product bias enter the right-hand side.
        rhs -= m * g * jy;
        rhs -= m * (body.com.a_bias.x * jx + body.com.a_bias.y * jy);
    }
    m_mat[(coord::TOE_L, coord::TOE_L)] += toe_armature;
    m_mat[(coord::TOE_R, coord::TOE_R)] += toe_armature;

    // syger fills one triangle; mirror it.
    for i in 0..NDOF {
        for j in 0..i {
            m_mat[(j, i)] = m_mat[(i, j)];
        }
    }
    Inertial { mass_matrix: m_mat, rhs }
}

/// Ground-contact parameters (subset of the sim config).
#[derive(Debug, Clone, Copy)]
pub struct ContactParams {
    pub kn: f64,
    pub dn: f64,
    pub mu: f64,
    pub vreg: f64,
}

/// Per-point contact sample for logging and validation.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactState {
    pub penetration: f64,
    pub normal_force: f64,
    pub tangential_force: f64,
    pub in_contact: bool,
}

/// Evaluates all contact forces, accumulating generalized forces into `rhs`
/// and velocity-feedback terms into `damping`.
pub fn apply_contacts(
    cp: &ContactParams,
    tree: &TreeKin,
    rhs: &mut Q,
    damping: &mut Mat,
) -> [ContactState; 4] {
    let mut states = [ContactState::default(); 4];
    for (idx, point) in tree.contact_points.iter().enumerate() {
        let pen = -point.pos.y;
        if pen <= 0.0 {
            continue;
        }
        let pen_rate = -point.vel.y;
        let fn_raw = cp.kn * pen + cp.dn * pen_rate;
        let f_n = fn_raw.max(0.0);
        let slip = point.vel.x / cp.vreg;
        let sat = slip.clamp(-1.0, 1.0);
        let f_t = -cp.mu * f_n * sat;

        *rhs += f_t * point.jx + f_n * point.jy;
        if f_n > 0.0 {
            // d f_n / d vy = -dn; d f_t / d vx = -mu f_n / vreg inside the
            // regularization band. Both are PSD contributions to D.
            damping.ger(cp.dn, &point.jy, &point.jy, 1.0);
            if slip.abs() < 1.0 {
                damping.ger(cp.mu * f_n / cp.vreg, &point.jx, &point.jx, 1.0);
            }
        }
        states[idx] = ContactState {
            penetration: pen,
            normal_force: f_n,
            tangential_force: f_t,
            in_contact: true,
        };
    }
    states
}
