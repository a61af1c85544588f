//! SOL/GAS spring-tendon mechanics: extensions, forces, passive joint
//! torques, and the elastic joint-power quantities used by the analysis.
//!
//! Tendon extensions are measured from the slack configuration
//! (`ankle = ankle_slack_angle`, `knee = knee_slack_angle`), where both
//! tendons are exactly unloaded:
//!
//! ```text
//! e_sol = (ankle - ankle_slack) * r_sol
//! e_gas = ((ankle - knee) - (ankle_slack - knee_slack)) * r_gas
//! ```
//!
//! Forces are `k * e` clamped at zero; tendons only pull. The monoarticular
//! SOL plantarflexes the ankle; the biarticular GAS plantarflexes the ankle
//! and flexes the knee with the same tension on equal pulley radii.
//!
//! Two power conventions coexist deliberately:
//!
//! * [`passive_torques`] is the physical model used by the simulator. A taut
//!   GAS always acts on both joints.
//! * [`ankle_power`] is the reported ankle-power metric. Its GAS term is
//!   included only while `ankle >= knee`, matching the convention of the
//!   published joint-power analysis. Positive power means the springs are
//!   recoiling (releasing energy into the joint).

use crate::model::{JointAngles, JointRates, RobotParams, Side};

/// Tendon extensions and forces for one leg.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TendonState {
    /// SOL extension, m (negative = slack).
    pub e_sol: f64,
    /// GAS extension, m (negative = slack).
    pub e_gas: f64,
    /// SOL tension, N (never negative).
    pub f_sol: f64,
    /// GAS tension, N (never negative).
    pub f_gas: f64,
}

/// Passive joint torques for one leg, in the sign conventions of
/// [`crate::model`]: ankle dorsiflexion positive, knee flexion positive,
/// toe dorsiflexion positive.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PassiveTorques {
    /// Tendon torque on the ankle (plantarflexing, so <= 0 when loaded).
    pub tau_ankle: f64,
    /// GAS torque on the knee (flexing, so >= 0 when loaded).
    pub tau_knee_gas: f64,
    /// Toe spring torque, zero at the rest angle.
    pub tau_toe: f64,
}

/// Elastic joint powers and stored energy for one leg.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ElasticPower {
    /// Ankle joint power, W. Positive while the springs recoil.
    pub p_ankle: f64,
    /// GAS contribution to the knee joint power, W.
    pub p_knee_gas: f64,
    /// Stored elastic energy (SOL + GAS + toe spring), J.
    pub e_elastic: f64,
}

#[inline]
fn clamp_tension(k: f64, e: f64) -> f64 {
    if e > 0.0 {
        k * e
    } else {
        0.0
    }
}

/// Tendon extensions and tensions of one leg.
pub fn tendon_extensions(params: &RobotParams, q: &JointAngles, side: Side) -> TendonState {
    let ankle = q.ankle(side);
    let knee = q.knee(side);
    let e_sol = (ankle - params.ankle_slack_angle) * params.r_sol;
    let e_gas = ((ankle - knee) - (params.ankle_slack_angle - params.knee_slack_angle)) * params.r_gas;
    TendonState {
        e_sol,
        e_gas,
        f_sol: clamp_tension(params.k_sol, e_sol),
        f_gas: clamp_tension(params.k_gas, e_gas),
    }
}

/// Passive tendon and toe-spring torques of one leg (simulation model).
pub fn passive_torques(params: &RobotParams, q: &JointAngles, side: Side) -> PassiveTorques {
    let t = tendon_extensions(params, q, side);
    PassiveTorques {
        tau_ankle: -(t.f_sol * params.r_sol + t.f_gas * params.r_gas),
        tau_knee_gas: t.f_gas * params.r_gas,
        tau_toe: -params.k_toe * (q.toe(side) - params.toe_rest_angle),
    }
}

/// Stored elastic energy of one leg: both tendons plus the toe spring.
pub fn elastic_energy(params: &RobotParams, q: &JointAngles, side: Side) -> f64 {
    let t = tendon_extensions(params, q, side);
    let e_sol = if t.e_sol > 0.0 { 0.5 * params.k_sol * t.e_sol * t.e_sol } else { 0.0 };
    let e_gas = if t.e_gas > 0.0 { 0.5 * params.k_gas * t.e_gas * t.e_gas } else { 0.0 };
    let d_toe = q.toe(side) - params.toe_rest_angle;
    e_sol + e_gas + 0.5 * params.k_toe * d_toe * d_toe
}

/// Ankle joint power metric, W. Positive while plantarflexing under load
/// (spring recoil). The GAS term participates only while `ankle >= knee`.
pub fn ankle_power(params: &RobotParams, q: &JointAngles, qd: &JointRates, side: Side) -> f64 {
    let t = tendon_extensions(params, q, side);
    let w_ankle = qd.ankle(side);
    let mut tau = t.f_sol * params.r_sol;
    if q.ankle(side) >= q.knee(side) {
        tau += t.f_gas * params.r_gas;
    }
    -w_ankle * tau
}

/// GAS contribution to the knee joint power, W. Positive while the taut GAS
/// drives knee flexion.
pub fn gas_knee_power(params: &RobotParams, q: &JointAngles, qd: &JointRates, side: Side) -> f64 {
    let t = tendon_extensions(params, q, side);
    qd.knee(side) * t.f_gas * params.r_gas
}

/// Toe spring power, W. Positive while the toe spring recoils.
pub fn toe_power(params: &RobotParams, q: &JointAngles, qd: &JointRates, side: Side) -> f64 {
    -params.k_toe * (q.toe(side) - params.toe_rest_angle) * qd.toe(side)
}

/// All elastic power quantities of one leg.
pub fn elastic_power(params: &RobotParams, q: &JointAngles, qd: &JointRates, side: Side) -> ElasticPower {
    ElasticPower {
        p_ankle: ankle_power(params, q, qd, side),
        p_knee_gas: gas_knee_power(params, q, qd, side),
        e_elastic: elastic_energy(params, q, side),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RobotParams;
    use approx::{assert_abs_diff_eq, assert_relative_eq};
    use proptest::prelude::*;

    const DEG: f64 = std::f64::consts::PI / 180.0;

    fn q(ankle_deg: f64, knee_deg: f64) -> JointAngles {
        JointAngles {
            ankle_l: ankle_deg * DEG,
            knee_l: knee_deg * DEG,
            toe_l: RobotParams::default().toe_rest_angle,
            toe_r: RobotParams::default().toe_rest_angle,
            ..JointAngles::default()
        }
    }

    #[test]
    fn slack_configuration_is_unloaded() {
        let params = RobotParams::default();
        let t = tendon_extensions(&params, &q(-22.0, 0.0), Side::Left);
        assert_abs_diff_eq!(t.e_sol, 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(t.e_gas, 0.0, epsilon = 1e-15);
        assert_eq!(t.f_sol, 0.0);
        assert_eq!(t.f_gas, 0.0);
        let tau = passive_torques(&params, &q(-22.0, 0.0), Side::Left);
        assert_eq!(tau.tau_ankle, 0.0);
        assert_eq!(tau.tau_knee_gas, 0.0);
        assert_abs_diff_eq!(tau.tau_toe, 0.0, epsilon = 1e-15);
    }

    #[test]
    fn sol_extension_at_neutral_ankle() {
        let params = RobotParams::default();
        let t = tendon_extensions(&params, &q(0.0, 0.0), Side::Left);
        // 22 deg = 0.38397 rad over a 13 mm pulley.
        assert_abs_diff_eq!(t.e_sol, 4.9916e-3, epsilon = 5e-7);
    }

    #[test]
    fn gas_extension_with_flexed_knee() {
        let params = RobotParams::default();
        let t = tendon_extensions(&params, &q(0.0, 10.0), Side::Left);
        // (0 - 10) - (-22 - 0) = 12 deg = 0.20944 rad over 13 mm.
        assert_abs_diff_eq!(t.e_gas, 2.7227e-3, epsilon = 5e-7);
    }

    #[test]
    fn sol_ankle_torque_at_neutral() {
        let params = RobotParams::default();
        let t = tendon_extensions(&params, &q(0.0, 0.0), Side::Left);
        // F = 4.5 N/mm * 4.992 mm = 22.46 N over 13 mm.
        assert_abs_diff_eq!(t.f_sol * params.r_sol, 0.29201, epsilon = 5e-5);
    }

    #[test]
    fn gas_adds_matching_ankle_and_knee_torques() {
        let params = RobotParams::default();
        let q = q(0.0, 10.0);
        let t = tendon_extensions(&params, &q, Side::Left);
        let tau = passive_torques(&params, &q, Side::Left);
        assert_abs_diff_eq!(t.f_gas * params.r_gas, 0.04955, epsilon = 5e-5);
        assert_abs_diff_eq!(tau.tau_knee_gas, 0.04955, epsilon = 5e-5);
        assert_abs_diff_eq!(
            tau.tau_ankle,
            -(t.f_sol * params.r_sol + t.f_gas * params.r_gas),
            epsilon = 1e-15
        );
    }

    #[test]
    fn ankle_power_zero_at_zero_rate() {
        let params = RobotParams::default();
        let p = ankle_power(&params, &q(0.0, 10.0), &JointRates::default(), Side::Left);
        assert_eq!(p, 0.0);
    }

    #[test]
    fn ankle_power_during_sol_recoil() {
        let params = RobotParams::default();
        // Knee flexed past the ankle, so only the SOL term participates.
        let qd = JointRates { ankle_l: -1.0, ..JointRates::default() };
        let p = ankle_power(&params, &q(0.0, 10.0), &qd, Side::Left);
        assert_abs_diff_eq!(p, 0.29201, epsilon = 5e-5);
    }

    #[test]
    fn gas_knee_power_cases() {
        let params = RobotParams::default();
        let qd_zero = JointRates::default();
        assert_eq!(gas_knee_power(&params, &q(0.0, 10.0), &qd_zero, Side::Left), 0.0);

        // Slack GAS produces no knee power at any rate.
        let qd = JointRates { knee_l: 3.0, ..JointRates::default() };
        assert_eq!(gas_knee_power(&params, &q(-30.0, 10.0), &qd, Side::Left), 0.0);

        let qd = JointRates { knee_l: 1.0, ..JointRates::default() };
        let p = gas_knee_power(&params, &q(0.0, 10.0), &qd, Side::Left);
        assert_abs_diff_eq!(p.abs(), 0.04955, epsilon = 5e-5);
    }

    /// Analytic-differentiation oracle: along a trajectory that keeps the
    /// metric's GAS gate open (ankle >= knee) and both tendons taut, the
    /// joint powers must drain the stored energy exactly.
    #[test]
    fn power_balance_matches_energy_derivative() {
        let params = RobotParams::default();
        let ankle = |t: f64| (10.0 + 8.0 * (2.0 * t).sin()) * DEG;
        let knee = |t: f64| (-5.0 + 3.0 * (2.6 * t).cos()) * DEG;
        let toe = |t: f64| (15.0 + 20.0 * (3.1 * t).sin()) * DEG;
        let d_ankle = |t: f64| 16.0 * (2.0 * t).cos() * DEG;
        let d_knee = |t: f64| -7.8 * (2.6 * t).sin() * DEG;
        let d_toe = |t: f64| 62.0 * (3.1 * t).cos() * DEG;

        for i in 0..200 {
            let t = i as f64 * 0.017;
            let qa = JointAngles {
                ankle_l: ankle(t),
                knee_l: knee(t),
                toe_l: toe(t),
                ..JointAngles::default()
            };
            assert!(qa.ankle_l >= qa.knee_l);
            let qd = JointRates {
                ankle_l: d_ankle(t),
                knee_l: d_knee(t),
                toe_l: d_toe(t),
                ..JointRates::default()
            };
            let st = tendon_extensions(&params, &qa, Side::Left);
            assert!(st.e_sol > 0.0 && st.e_gas > 0.0);

            let p_total = ankle_power(&params, &qa, &qd, Side::Left)
                + gas_knee_power(&params, &qa, &qd, Side::Left)
                + toe_power(&params, &qa, &qd, Side::Left);
            // dE/dt analytically: k e de/dt per element.
            let de_sol = d_ankle(t) * params.r_sol;
            let de_gas = (d_ankle(t) - d_knee(t)) * params.r_gas;
            let e_dot = params.k_sol * st.e_sol * de_sol
                + params.k_gas * st.e_gas * de_gas
                + params.k_toe * (qa.toe_l - params.toe_rest_angle) * d_toe(t);
            assert_relative_eq!(p_total, -e_dot, max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn forces_never_negative(ankle in -1.0f64..0.8, knee in -0.5f64..2.0) {
            let params = RobotParams::default();
            let qa = JointAngles { ankle_l: ankle, knee_l: knee, ..JointAngles::default() };
            let t = tendon_extensions(&params, &qa, Side::Left);
            prop_assert!(t.f_sol >= 0.0);
            prop_assert!(t.f_gas >= 0.0);
            if t.e_sol > 0.0 {
                prop_assert!((t.f_sol - params.k_sol * t.e_sol).abs() < 1e-12);
            } else {
                prop_assert_eq!(t.f_sol, 0.0);
            }
        }

        /// Passive torques are continuous in q: piecewise linear with a
        /// hinge at the slack configuration.
        #[test]
        fn torque_continuity_at_slack(knee in -0.3f64..1.5) {
            let params = RobotParams::default();
            let eps = 1e-9;
            for ankle0 in [params.ankle_slack_angle, params.ankle_slack_angle + knee] {
                let qa = |a: f64| JointAngles { ankle_l: a, knee_l: knee, ..JointAngles::default() };
                let below = passive_torques(&params, &qa(ankle0 - eps), Side::Left);
                let above = passive_torques(&params, &qa(ankle0 + eps), Side::Left);
                prop_assert!((below.tau_ankle - above.tau_ankle).abs() < 1e-6);
                prop_assert!((below.tau_knee_gas - above.tau_knee_gas).abs() < 1e-6);
            }
        }
    }
}
