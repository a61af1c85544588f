//! Per-sample contact diagnostics over a few cycles.

use ecowalker_core::cpg::ControlConfig;
use ecowalker_core::model::RobotParams;
use ecowalker_core::sim::{run_experiment, SimConfig};

fn main() {
    let trim: f64 = std::env::args().nth(1).unwrap_or("-20".into()).parse().unwrap();
    let params = RobotParams::default();
    let cfg = SimConfig { duration: 8.0, seed: 1, log_every: 20, ..SimConfig::default() };
    let ctrl = ControlConfig {
        hip_cmd_trim: trim * std::f64::consts::PI / 180.0,
        ..ControlConfig::default()
    };
    let traj = run_experiment(&params, &cfg, &ctrl).expect("run");
    println!("t,hipL,kneeL,ankleL,toeL,Nheel,FtHeel,Ntip,FtTip,trunk_vx,trunk_y");
    for s in traj.samples.iter().filter(|s| s.t >= 6.0 && s.t <= 8.0) {
        println!(
            "{:.2},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.1},{:.3},{:.3}",
            s.t,
            s.q.hip_l.to_degrees(),
            s.q.knee_l.to_degrees(),
            s.q.ankle_l.to_degrees(),
            s.q.toe_l.to_degrees(),
            s.contacts[0].normal_force,
            s.contacts[0].tangential_force,
            s.contacts[1].normal_force,
            s.contacts[1].tangential_force,
            s.trunk.vx,
            s.trunk.y,
        );
    }
}
