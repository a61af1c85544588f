//! Dump filtered analysis signals to CSV for offline inspection.

use ecowalker_core::cpg::{ActuationMode, ControlConfig};
use ecowalker_core::model::RobotParams;
use ecowalker_core::signal::{gradient, lowpass_zero_phase, resample, Signal};
use ecowalker_core::sim::{run_experiment, SimConfig};

fn main() {
    let mode: ActuationMode = std::env::args().nth(1).unwrap_or("akfi".into()).parse().unwrap();
    let trim: f64 = std::env::args().nth(2).unwrap_or("-6".into()).parse().unwrap();
    let params = RobotParams::default();
    let cfg = SimConfig { duration: 12.0, seed: 1, ..SimConfig::default() };
    let ctrl = ControlConfig {
        mode,
        hip_cmd_trim: trim * std::f64::consts::PI / 180.0,
        ..ControlConfig::default()
    };
    let traj = run_experiment(&params, &cfg, &ctrl).expect("run");
    let get = |name: &str, f: fn(&ecowalker_core::trajectory::SampleLog) -> f64| {
        let t: Vec<f64> = traj.samples.iter().map(|s| s.t).collect();
        let v: Vec<f64> = traj.samples.iter().map(f).collect();
        let sig = Signal::new(name, "", t, v).unwrap();
        lowpass_zero_phase(&resample(&sig, 1000.0).unwrap(), 2, 25.0).unwrap()
    };
    let ankle_l = get("ankle_l", |s| s.q.ankle_l);
    let ankle_r = get("ankle_r", |s| s.q.ankle_r);
    let knee_l = get("knee_l", |s| s.q.knee_l);
    let hip_l = get("hip_l", |s| s.q.hip_l);
    let trunk_y = get("trunk_y", |s| s.trunk.y);
    let vy = {
        let g = gradient(&trunk_y).unwrap();
        lowpass_zero_phase(&g, 2, 15.0).unwrap()
    };
    let g_ankle_l = gradient(&ankle_l).unwrap();
    println!("t,ankle_l,ankle_r,knee_l,hip_l,trunk_vy,g_ankle_l,c_heel_l,c_toe_l,c_heel_r,c_toe_r");
    for k in 0..ankle_l.len() {
        let t = ankle_l.t[k];
        let s = &traj.samples[traj.samples.partition_point(|s| s.t < t).min(traj.samples.len() - 1)];
        println!(
            "{:.3},{:.5},{:.5},{:.5},{:.5},{:.5},{:.5},{},{},{},{}",
            t,
            ankle_l.values[k],
            ankle_r.values[k],
            knee_l.values[k],
            hip_l.values[k],
            vy.values[k],
            g_ankle_l.values[k],
            s.contacts[0].in_contact as u8,
            s.contacts[1].in_contact as u8,
            s.contacts[2].in_contact as u8,
            s.contacts[3].in_contact as u8,
        );
    }
}
