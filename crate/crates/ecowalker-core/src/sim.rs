//! Fixed-step planar multibody simulation of the biped with compliant
//! ground contact, passive spring-tendons, CPG + PD control, and actuator
//! power accounting.
//!
//! The integrator is semi-implicit Euler at a fixed step: velocities update
//! from the current-state forces, positions from the new velocities.
//! Velocity-feedback force terms (contact damping, regularized friction,
//! joint and stop damping) are folded into the velocity solve, which keeps
//! stiff contacts stable at the default step without altering the explicit
//! force laws. Everything is deterministic for a given configuration and
//! seed.

pub mod dynamics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpg::{ControlConfig, Controller, MotorCommand};
use crate::model::{JointAngles, JointRates, RobotParams, Side, TrunkState};
use crate::tendon;
use crate::trajectory::{ContactSample, EffectiveConfig, SampleLog, Trajectory, TrajectoryMeta};

pub use dynamics::{coord, ContactState, Mat, Q, NDOF};

/// Viscous damping per joint class, N m s/rad.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct JointDamping {
    pub hip: f64,
    pub knee: f64,
    pub ankle: f64,
    pub toe: f64,
}

impl Default for JointDamping {
    fn default() -> Self {
        JointDamping { hip: 0.01, knee: 0.01, ankle: 0.005, toe: 0.002 }
    }
}

/// Simulation configuration. Defaults carry a full walking setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    /// Integration step, s.
    pub dt: f64,
    /// Ground normal stiffness, N/m.
    pub contact_kn: f64,
    /// Ground normal damping, N s/m.
    pub contact_dn: f64,
    pub friction_mu: f64,
    /// Friction regularization velocity, m/s.
    pub friction_vreg: f64,
    /// Simulated duration, s.
    pub duration: f64,
    /// Belt speed; the ground is stationary and the robot translates, so
    /// this must remain 0.
    pub belt_speed: f64,
    pub seed: u64,
    /// Mechanical-to-electrical conversion efficiency for positive work.
    pub actuator_efficiency: f64,
    /// Idle electrical draw per motor driver, W (added to logged power).
    pub idle_power: f64,
    /// Winding-loss coefficient c in c * tau^2, W/(N m)^2.
    pub winding_loss_coeff: f64,
    /// Actuation noise: std of a torque dither held for `noise_hold` s.
    pub torque_noise_std: f64,
    pub noise_hold: f64,
    pub joint_damping: JointDamping,
    /// Joint range-of-motion stop stiffness, N m/rad.
    pub stop_stiffness: f64,
    pub stop_damping: f64,
    /// Reflected inertia regularizing the massless toe coordinate, kg m^2.
    pub toe_armature: f64,
    /// Log every n-th integration step.
    pub log_every: usize,
    /// Trunk height below which the run counts as a fall, m.
    pub fall_height: f64,
    /// Divergence guard on coordinate rates, 1/s and m/s.
    pub speed_limit: f64,
    /// Initial forward trunk speed, m/s.
    pub init_trunk_vx: f64,
    /// Pin the trunk in place (test-stand mode).
    pub fixed_trunk: bool,
    /// Mechanically clamped joints by coordinate name (test rigs).
    pub locked_joints: Vec<String>,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt: 5e-4,
            contact_kn: 2e4,
            contact_dn: 100.0,
            friction_mu: 0.9,
            friction_vreg: 0.01,
            duration: 130.0,
            belt_speed: 0.0,
            seed: 0,
            actuator_efficiency: 0.7,
            idle_power: 0.3,
            winding_loss_coeff: 0.05,
            torque_noise_std: 0.002,
            noise_hold: 0.02,
            joint_damping: JointDamping::default(),
            stop_stiffness: 20.0,
            stop_damping: 0.2,
            toe_armature: 2e-5,
            log_every: 2,
            fall_height: 0.24,
            speed_limit: 200.0,
            init_trunk_vx: 0.25,
            fixed_trunk: false,
            locked_joints: Vec::new(),
        }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("simulation diverged at t = {t:.4} s: {detail}")]
    Diverged { t: f64, detail: String, trajectory: Box<Trajectory> },
    #[error("robot fell at t = {t:.4} s (cycle {cycle})")]
    Fall { t: f64, cycle: u32, trajectory: Box<Trajectory> },
}

impl SimConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        let err = |msg: &str| Err(SimError::InvalidConfig(msg.to_string()));
        if !(self.dt > 0.0) {
            return err("dt must be positive");
        }
        if self.contact_kn < 0.0 || self.contact_dn < 0.0 {
            return err("contact stiffness/damping must be non-negative");
        }
        if self.duration < 0.0 {
            return err("duration must be non-negative");
        }
        if self.belt_speed != 0.0 {
            return err("belt_speed must be 0 (stationary ground model)");
        }
        if !(self.actuator_efficiency > 0.0 && self.actuator_efficiency <= 1.0) {
            return err("actuator_efficiency must lie in (0, 1]");
        }
        if self.log_every == 0 {
            return err("log_every must be at least 1");
        }
        if !(self.friction_vreg > 0.0) {
            return err("friction_vreg must be positive");
        }
        for name in &self.locked_joints {
            if !coord::NAMES.contains(&name.as_str()) {
                return Err(SimError::InvalidConfig(format!("unknown joint '{name}' in locked_joints")));
            }
        }
        Ok(())
    }
}

/// Full dynamic state of the world at one instant.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub t: f64,
    pub q: Q,
    pub qd: Q,
    /// Contact states computed at this instant (heel L, toe L, heel R,
    /// toe R).
    pub contacts: [ContactState; 4],
}

impl WorldState {
    pub fn joint_angles(&self) -> JointAngles {
        JointAngles {
            hip_l: self.q[coord::HIP_L],
            hip_r: self.q[coord::HIP_R],
            knee_l: self.q[coord::KNEE_L],
            knee_r: self.q[coord::KNEE_R],
            ankle_l: self.q[coord::ANKLE_L],
            ankle_r: self.q[coord::ANKLE_R],
            toe_l: self.q[coord::TOE_L],
            toe_r: self.q[coord::TOE_R],
        }
    }

    pub fn joint_rates(&self) -> JointRates {
        JointRates {
            hip_l: self.qd[coord::HIP_L],
            hip_r: self.qd[coord::HIP_R],
            knee_l: self.qd[coord::KNEE_L],
            knee_r: self.qd[coord::KNEE_R],
            ankle_l: self.qd[coord::ANKLE_L],
            ankle_r: self.qd[coord::ANKLE_R],
            toe_l: self.qd[coord::TOE_L],
            toe_r: self.qd[coord::TOE_R],
        }
    }

    pub fn trunk(&self) -> TrunkState {
        TrunkState {
            x: self.q[coord::X],
            y: self.q[coord::Y],
            vx: self.qd[coord::X],
            vy: self.qd[coord::Y],
        }
    }

    /// Whether a foot has any ground contact.
    pub fn foot_in_contact(&self, side: Side) -> bool {
        match side {
            Side::Left => self.contacts[0].in_contact || self.contacts[1].in_contact,
            Side::Right => self.contacts[2].in_contact || self.contacts[3].in_contact,
        }
    }
}

/// Motor torques after gating, clamping, and actuation noise, N m.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AppliedTorques {
    pub hip_l: f64,
    pub hip_r: f64,
    pub knee_l: f64,
    pub knee_r: f64,
}

fn lock_mask(cfg: &SimConfig) -> [bool; NDOF] {
    let mut mask = [false; NDOF];
    if cfg.fixed_trunk {
        mask[coord::X] = true;
        mask[coord::Y] = true;
    }
    for name in &cfg.locked_joints {
        if let Some(idx) = coord::NAMES.iter().position(|n| n == name) {
            mask[idx] = true;
        }
    }
    mask
}

/// Adds passive tendon/toe torques, joint damping, and range-of-motion
/// stop torques for one leg.
fn apply_joint_forces(
    params: &RobotParams,
    cfg: &SimConfig,
    q: &Q,
    qd: &Q,
    qa: &JointAngles,
    rhs: &mut Q,
    damping: &mut Mat,
) {
    for side in Side::BOTH {
        let b = coord::leg_base(side);
        let passive = tendon::passive_torques(params, qa, side);
        rhs[b + 2] += passive.tau_ankle;
        rhs[b + 1] += passive.tau_knee_gas;
        rhs[b + 3] += passive.tau_toe;

        let dampers = [
            (b, cfg.joint_damping.hip),
            (b + 1, cfg.joint_damping.knee),
            (b + 2, cfg.joint_damping.ankle),
            (b + 3, cfg.joint_damping.toe),
        ];
        for (idx, d) in dampers {
            rhs[idx] -= d * qd[idx];
            damping[(idx, idx)] += d;
        }

        let limits = [
            (b, params.joint_limits.hip),
            (b + 1, params.joint_limits.knee),
            (b + 2, params.joint_limits.ankle),
            (b + 3, params.joint_limits.toe),
        ];
        for (idx, [lo, hi]) in limits {
            let overshoot = if q[idx] < lo {
                q[idx] - lo
            } else if q[idx] > hi {
                q[idx] - hi
            } else {
                continue;
            };
            rhs[idx] += -cfg.stop_stiffness * overshoot - cfg.stop_damping * qd[idx];
            damping[(idx, idx)] += cfg.stop_damping;
        }
    }
}

/// Advances the state by one fixed step under the given motor torques.
pub fn step(
    params: &RobotParams,
    cfg: &SimConfig,
    state: &WorldState,
    motor: &AppliedTorques,
) -> Result<WorldState, Box<StepFailure>> {
    let tree = dynamics::build_tree(params, &state.q, &state.qd);
    let inertial = dynamics::assemble_inertial(params, &tree, cfg.toe_armature);
    let mut rhs = inertial.rhs;
    let mut damping = Mat::zeros();

    rhs[coord::HIP_L] += motor.hip_l;
    rhs[coord::HIP_R] += motor.hip_r;
    rhs[coord::KNEE_L] += motor.knee_l;
    rhs[coord::KNEE_R] += motor.knee_r;

    let qa = state.joint_angles();
    apply_joint_forces(params, cfg, &state.q, &state.qd, &qa, &mut rhs, &mut damping);

    let cp = dynamics::ContactParams {
        kn: cfg.contact_kn,
        dn: cfg.contact_dn,
        mu: cfg.friction_mu,
        vreg: cfg.friction_vreg,
    };
    let contacts = dynamics::apply_contacts(&cp, &tree, &mut rhs, &mut damping);

    // (M + dt D) dv = dt * F(q, v): velocity-feedback terms implicit.
    let mut a_mat = inertial.mass_matrix + cfg.dt * damping;
    let mut b = cfg.dt * rhs;
    let mask = lock_mask(cfg);
    for (j, locked) in mask.iter().enumerate() {
        if *locked {
            for i in 0..NDOF {
                a_mat[(i, j)] = 0.0;
                a_mat[(j, i)] = 0.0;
            }
            a_mat[(j, j)] = 1.0;
            b[j] = 0.0;
        }
    }
    let dv = match a_mat.cholesky() {
        Some(chol) => chol.solve(&b),
        None => {
            return Err(Box::new(StepFailure {
                t: state.t,
                detail: "velocity solve failed (system matrix not SPD)".to_string(),
            }))
        }
    };

    let mut qd = state.qd + dv;
    for (j, locked) in mask.iter().enumerate() {
        if *locked {
            qd[j] = 0.0;
        }
    }
    let q = state.q + cfg.dt * qd;
    let t = state.t + cfg.dt;

    for j in 0..NDOF {
        if !q[j].is_finite() || !qd[j].is_finite() {
            return Err(Box::new(StepFailure {
                t,
                detail: format!("non-finite state in coordinate {}", coord::NAMES[j]),
            }));
        }
        if qd[j].abs() > cfg.speed_limit {
            return Err(Box::new(StepFailure {
                t,
                detail: format!(
                    "coordinate {} rate {:.1} exceeds the bound {:.1}",
                    coord::NAMES[j],
                    qd[j],
                    cfg.speed_limit
                ),
            }));
        }
    }
    if !(-0.5..10.0).contains(&q[coord::Y]) {
        return Err(Box::new(StepFailure { t, detail: format!("trunk height {:.3} out of bounds", q[coord::Y]) }));
    }

    Ok(WorldState { t, q, qd, contacts })
}

/// Step-level failure; the runner wraps it with the partial trajectory.
#[derive(Debug)]
pub struct StepFailure {
    pub t: f64,
    pub detail: String,
}

/// Electrical power drawn by one motor: positive mechanical power scaled
/// by the inverse efficiency plus a winding loss term. Negative mechanical
/// power is not credited. The idle draw is handled at aggregation.
pub fn motor_electrical_power(torque: f64, joint_rate: f64, cfg: &SimConfig) -> f64 {
    (torque * joint_rate).max(0.0) / cfg.actuator_efficiency
        + cfg.winding_loss_coeff * torque * torque
}

/// Total mechanical plus elastic energy of the state (test oracle for the
/// conservation suites).
pub fn total_energy(params: &RobotParams, state: &WorldState) -> f64 {
    let tree = dynamics::build_tree(params, &state.q, &state.qd);
    let mut e = 0.0;
    for body in &tree.bodies {
        let m = params.mass(body.seg);
        let inertia = params.inertia(body.seg);
        e += 0.5 * m * body.com.vel.norm_squared();
        e += 0.5 * inertia * body.omega * body.omega;
        e += m * params.gravity * body.com.pos.y;
    }
    let qa = state.joint_angles();
    e += tendon::elastic_energy(params, &qa, Side::Left);
    e += tendon::elastic_energy(params, &qa, Side::Right);
    e
}

/// Standing start: legs posed on the phase-0 CPG references with flat-ish
/// feet, sole points just touching the ground.
pub fn initial_state(params: &RobotParams, cfg: &SimConfig, ctrl: &ControlConfig) -> WorldState {
    let mut q = Q::zeros();
    for side in Side::BOTH {
        let b = coord::leg_base(side);
        let ((hip_ref, knee_ref), _) =
            crate::cpg::reference_with_rates(&ctrl.cpg, 0.0, side).expect("phase 0 valid");
        let hip = hip_ref + ctrl.hip_cmd_trim;
        let knee = knee_ref;
        let phi_shank = hip - knee;
        let [lo, hi] = params.joint_limits.ankle;
        let ankle = (-phi_shank).clamp(lo * 0.9, hi * 0.9);
        q[b] = hip;
        q[b + 1] = knee;
        q[b + 2] = ankle;
        q[b + 3] = params.toe_rest_angle;
    }
    // Drop the trunk so the lowest contact point rests at a penetration
    // carrying roughly half the weight per leg.
    let p0 = (params.total_mass * params.gravity / (2.0 * cfg.contact_kn.max(1.0))).min(2e-3);
    let tree = dynamics::build_tree(params, &q, &Q::zeros());
    let lowest = tree
        .contact_points
        .iter()
        .map(|p| p.pos.y)
        .fold(f64::INFINITY, f64::min);
    q[coord::Y] = -lowest - p0;
    let mut qd = Q::zeros();
    qd[coord::X] = if cfg.fixed_trunk { 0.0 } else { cfg.init_trunk_vx };
    WorldState { t: 0.0, q, qd, contacts: [ContactState::default(); 4] }
}

fn contact_snapshot(params: &RobotParams, cfg: &SimConfig, q: &Q, qd: &Q) -> [ContactState; 4] {
    let tree = dynamics::build_tree(params, q, qd);
    let cp = dynamics::ContactParams {
        kn: cfg.contact_kn,
        dn: cfg.contact_dn,
        mu: cfg.friction_mu,
        vreg: cfg.friction_vreg,
    };
    let mut rhs = Q::zeros();
    let mut damp = Mat::zeros();
    dynamics::apply_contacts(&cp, &tree, &mut rhs, &mut damp)
}

/// Per-foot touch-down debouncer: a touch-down fires on a contact rising
/// edge after at least `MIN_AIR_TIME` without contact.
#[derive(Debug, Clone, Copy)]
struct TouchdownTracker {
    in_contact: bool,
    airborne_since: Option<f64>,
}

const MIN_AIR_TIME: f64 = 0.08;

impl TouchdownTracker {
    fn new() -> Self {
        TouchdownTracker { in_contact: false, airborne_since: Some(0.0) }
    }

    fn update(&mut self, t: f64, contact: bool) -> bool {
        let mut fired = false;
        if contact && !self.in_contact {
            if let Some(since) = self.airborne_since {
                if t - since >= MIN_AIR_TIME {
                    fired = true;
                }
            }
            self.airborne_since = None;
        } else if !contact && self.in_contact {
            self.airborne_since = Some(t);
        }
        self.in_contact = contact;
        fired
    }
}

fn build_sample(
    params: &RobotParams,
    cfg: &SimConfig,
    state: &WorldState,
    cmd: &MotorCommand,
    applied: &AppliedTorques,
) -> SampleLog {
    let qa = state.joint_angles();
    let qr = state.joint_rates();
    let passive_l = tendon::passive_torques(params, &qa, Side::Left);
    let passive_r = tendon::passive_torques(params, &qa, Side::Right);
    let contacts = state.contacts;
    let p_elec = [
        motor_electrical_power(applied.hip_l, qr.hip_l, cfg) + cfg.idle_power,
        motor_electrical_power(applied.hip_r, qr.hip_r, cfg) + cfg.idle_power,
        motor_electrical_power(applied.knee_l, qr.knee_l, cfg) + cfg.idle_power,
        motor_electrical_power(applied.knee_r, qr.knee_r, cfg) + cfg.idle_power,
    ];
    SampleLog {
        t: state.t,
        q: qa,
        qd: qr,
        cmd_hip_l: cmd.cmd_hip_l,
        cmd_hip_r: cmd.cmd_hip_r,
        cmd_knee_l: cmd.cmd_knee_l,
        cmd_knee_r: cmd.cmd_knee_r,
        tau_hip_l: applied.hip_l,
        tau_hip_r: applied.hip_r,
        tau_knee_l: applied.knee_l,
        tau_knee_r: applied.knee_r,
        tau_ankle_spring_l: passive_l.tau_ankle,
        tau_ankle_spring_r: passive_r.tau_ankle,
        tau_knee_gas_l: passive_l.tau_knee_gas,
        tau_knee_gas_r: passive_r.tau_knee_gas,
        tau_toe_l: passive_l.tau_toe,
        tau_toe_r: passive_r.tau_toe,
        contacts: [
            ContactSample {
                normal_force: contacts[0].normal_force,
                tangential_force: contacts[0].tangential_force,
                in_contact: contacts[0].in_contact,
            },
            ContactSample {
                normal_force: contacts[1].normal_force,
                tangential_force: contacts[1].tangential_force,
                in_contact: contacts[1].in_contact,
            },
            ContactSample {
                normal_force: contacts[2].normal_force,
                tangential_force: contacts[2].tangential_force,
                in_contact: contacts[2].in_contact,
            },
            ContactSample {
                normal_force: contacts[3].normal_force,
                tangential_force: contacts[3].tangential_force,
                in_contact: contacts[3].in_contact,
            },
        ],
        trunk: state.trunk(),
        p_elec,
    }
}

/// Runs a full experiment: simulate `duration` seconds under the given
/// control configuration, logging every `log_every`-th step. The trajectory
/// marks the steady-state onset (the mode switch after the configured
/// number of start-up cycles). Falls and divergence abort with the partial
/// log attached.
pub fn run_experiment(
    params: &RobotParams,
    cfg: &SimConfig,
    ctrl: &ControlConfig,
) -> Result<Trajectory, SimError> {
    cfg.validate()?;
    let params = params
        .clone()
        .validate()
        .map_err(|e| SimError::InvalidConfig(format!("robot params: {e}")))?;
    ctrl.cpg.validate().map_err(|e| SimError::InvalidConfig(format!("cpg: {e}")))?;
    ctrl.mode.validate().map_err(|e| SimError::InvalidConfig(format!("mode: {e}")))?;

    let mut controller = Controller::new(*ctrl);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = initial_state(&params, cfg, ctrl);
    let mut trackers = [TouchdownTracker::new(), TouchdownTracker::new()];
    let mut cycles = [0u32; 2];
    let n_steps = (cfg.duration / cfg.dt).round() as usize;

    let mut samples = Vec::with_capacity(n_steps / cfg.log_every + 1);
    let noise_hold_steps = ((cfg.noise_hold / cfg.dt).round() as usize).max(1);
    let mut noise = [0.0f64; 4];

    let make_meta = |steady: Option<f64>| TrajectoryMeta {
        mode: ctrl.mode.label(),
        seed: cfg.seed,
        sim_dt: cfg.dt,
        sample_dt: cfg.dt * cfg.log_every as f64,
        steady_onset: steady,
        config: EffectiveConfig { robot: params.clone(), sim: cfg.clone(), control: *ctrl },
    };

    for step_idx in 0..n_steps {
        // Refresh contact view for event detection and logging.
        state.contacts = contact_snapshot(&params, cfg, &state.q, &state.qd);

        for (i, side) in Side::BOTH.iter().enumerate() {
            if trackers[i].update(state.t, state.foot_in_contact(*side)) {
                cycles[i] += 1;
                controller.on_touchdown(*side, state.t);
            }
        }

        let qa = state.joint_angles();
        let qr = state.joint_rates();
        let cmd = controller.step(state.t, &qa, &qr);

        if cfg.torque_noise_std > 0.0 && step_idx % noise_hold_steps == 0 {
            for n in noise.iter_mut() {
                let u1: f64 = rng.gen::<f64>().max(1e-300);
                let u2: f64 = rng.gen();
                *n = cfg.torque_noise_std
                    * (-2.0 * u1.ln()).sqrt()
                    * (2.0 * std::f64::consts::PI * u2).cos();
            }
        }
        let lim = ctrl.gains.torque_limit;
        let applied = AppliedTorques {
            hip_l: (cmd.tau_hip_l + noise[0]).clamp(-lim, lim),
            hip_r: (cmd.tau_hip_r + noise[1]).clamp(-lim, lim),
            knee_l: if cmd.tau_knee_l == 0.0 { 0.0 } else { (cmd.tau_knee_l + noise[2]).clamp(-lim, lim) },
            knee_r: if cmd.tau_knee_r == 0.0 { 0.0 } else { (cmd.tau_knee_r + noise[3]).clamp(-lim, lim) },
        };

        if step_idx % cfg.log_every == 0 {
            samples.push(build_sample(&params, cfg, &state, &cmd, &applied));
        }

        state = match step(&params, cfg, &state, &applied) {
            Ok(next) => next,
            Err(failure) => {
                return Err(SimError::Diverged {
                    t: failure.t,
                    detail: failure.detail,
                    trajectory: Box::new(Trajectory {
                        meta: make_meta(controller.mode_switch_time()),
                        samples,
                    }),
                })
            }
        };

        if !cfg.fixed_trunk && state.q[coord::Y] < cfg.fall_height {
            return Err(SimError::Fall {
                t: state.t,
                cycle: cycles[0].max(cycles[1]),
                trajectory: Box::new(Trajectory {
                    meta: make_meta(controller.mode_switch_time()),
                    samples,
                }),
            });
        }
    }

    Ok(Trajectory { meta: make_meta(controller.mode_switch_time()), samples })
}
