//! Quick gait probe: run a short experiment and print cycle-level stats.

use ecowalker_core::cpg::{ActuationMode, ControlConfig};
use ecowalker_core::model::{RobotParams, Side};
use ecowalker_core::sim::{run_experiment, SimConfig, SimError};

fn main() {
    let params = RobotParams::default();
    let mut cfg = SimConfig { duration: 20.0, ..SimConfig::default() };
    let mut ctrl = ControlConfig::default();
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--mode" => {
                ctrl.mode = args.next().unwrap().parse::<ActuationMode>().unwrap();
            }
            "--trim-deg" => {
                ctrl.hip_cmd_trim =
                    args.next().unwrap().parse::<f64>().unwrap() * std::f64::consts::PI / 180.0;
            }
            "--duration" => cfg.duration = args.next().unwrap().parse().unwrap(),
            "--vx" => cfg.init_trunk_vx = args.next().unwrap().parse().unwrap(),
            other => panic!("unknown arg {other}"),
        }
    }
    match run_experiment(&params, &cfg, &ctrl) {
        Ok(traj) => {
            let n = traj.samples.len();
            let last = &traj.samples[n - 1];
            let first = &traj.samples[0];
            let v_avg = (last.trunk.x - first.trunk.x) / (last.t - first.t);
            let mid = &traj.samples[n / 2];
            let v_steady = (last.trunk.x - mid.trunk.x) / (last.t - mid.t);
            let slip: f64 = traj
                .samples
                .iter()
                .map(|s| {
                    s.contacts
                        .iter()
                        .map(|c| c.tangential_force.abs())
                        .fold(0.0f64, f64::max)
                })
                .fold(0.0f64, f64::max);
            println!(
                "completed {:.1} s | steady_onset {:?} | v_avg {:.3} | v_steady {:.3} m/s | final y {:.3} | max |ft| {:.2} N",
                last.t, traj.meta.steady_onset, v_avg, v_steady, last.trunk.y, slip
            );
            // Rough per-leg touchdown census from contact flags.
            for (i, side) in Side::BOTH.iter().enumerate() {
                let mut tds = Vec::new();
                let mut in_c = true;
                let mut air_since = f64::NEG_INFINITY;
                for s in &traj.samples {
                    let c = match i {
                        0 => s.contacts[0].in_contact || s.contacts[1].in_contact,
                        _ => s.contacts[2].in_contact || s.contacts[3].in_contact,
                    };
                    if c && !in_c && s.t - air_since > 0.02 {
                        tds.push(s.t);
                    }
                    if !c && in_c {
                        air_since = s.t;
                    }
                    in_c = c;
                }
                let periods: Vec<f64> = tds.windows(2).map(|w| w[1] - w[0]).collect();
                let mean_t = if periods.is_empty() {
                    f64::NAN
                } else {
                    periods.iter().sum::<f64>() / periods.len() as f64
                };
                println!(
                    "{side:?}: {} touchdowns, mean period {:.3} s, last {:?}",
                    tds.len(),
                    mean_t,
                    tds.last()
                );
                // Stance diagnostics: hip sweep and sole anchor drift.
                use ecowalker_core::model::forward_kinematics;
                let mut stances: Vec<(f64, f64, f64, f64)> = Vec::new();
                let mut td_state: Option<(f64, f64, f64)> = None;
                let mut in_c2 = true;
                for s in &traj.samples {
                    let c = match i {
                        0 => s.contacts[0].in_contact || s.contacts[1].in_contact,
                        _ => s.contacts[2].in_contact || s.contacts[3].in_contact,
                    };
                    let kin = forward_kinematics(&params, &s.trunk, &s.q);
                    let sole_x = kin.joints.heel(*side).x;
                    let hip = s.q.hip(*side);
                    if c && !in_c2 {
                        td_state = Some((s.t, hip, sole_x));
                    }
                    if !c && in_c2 {
                        if let Some((t0, hip0, sole0)) = td_state.take() {
                            if s.t - t0 > 0.3 {
                                stances.push((hip0, hip, sole_x - sole0, s.t - t0));
                            }
                        }
                    }
                    in_c2 = c;
                }
                if i == 0 {
                    // Trunk x at successive left touch-downs: per-cycle advance.
                    let adv: Vec<f64> = tds
                        .iter()
                        .map(|&td| {
                            let idx = traj.samples.partition_point(|s| s.t < td);
                            traj.samples[idx.min(n - 1)].trunk.x
                        })
                        .collect();
                    let steps: Vec<String> =
                        adv.windows(2).map(|w| format!("{:+.3}", w[1] - w[0])).collect();
                    println!("  per-cycle advance: {}", steps.join(" "));
                }
                for (hip_td, hip_to, drift, dur) in stances.iter().rev().take(3) {
                    println!(
                        "  stance: hip {:.1} -> {:.1} deg over {:.2} s, sole drift {:+.3} m",
                        hip_td.to_degrees(),
                        hip_to.to_degrees(),
                        dur,
                        drift
                    );
                }
            }
        }
        Err(SimError::Fall { t, cycle, trajectory }) => {
            println!("FELL at t={t:.3} (cycle {cycle}), {} samples", trajectory.samples.len());
            if let Some(s) = trajectory.samples.last() {
                println!(
                    "last: y={:.3} hipL={:.2} kneeL={:.2} ankleL={:.2} vx={:.2}",
                    s.trunk.y, s.q.hip_l, s.q.knee_l, s.q.ankle_l, s.trunk.vx
                );
            }
        }
        Err(SimError::Diverged { t, detail, trajectory }) => {
            println!("DIVERGED at t={t:.4}: {detail}, {} samples", trajectory.samples.len());
            if let Some(s) = trajectory.samples.last() {
                println!(
                    "last: y={:.3} hipL={:.2} kneeL={:.2} ankleL={:.2} toeL={:.2} vx={:.2}",
                    s.trunk.y, s.q.hip_l, s.q.knee_l, s.q.ankle_l, s.q.toe_l, s.trunk.vx
                );
            }
        }
        Err(e) => println!("error: {e}"),
    }
}
// (steady speed printed via second-half average in future revisions)
