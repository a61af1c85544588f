//! Tuning dashboard: run AKFI and PKFI, analyze, and print the measures
//! the directional criteria care about.

use ecowalker_core::analysis::{analyze, AnalysisConfig};
use ecowalker_core::cpg::{ActuationMode, ControlConfig};
use ecowalker_core::model::RobotParams;
use ecowalker_core::sim::{run_experiment, SimConfig, SimError};
use ecowalker_core::stats::{wilcoxon_signed_rank, PairedSample};

fn run_one(
    label: &str,
    mode: ActuationMode,
    duration: f64,
    trim_deg: f64,
    seed: u64,
) -> Option<ecowalker_core::analysis::AnalysisResult> {
    let params = RobotParams::default();
    let cfg = SimConfig { duration, seed, ..SimConfig::default() };
    let ctrl = ControlConfig {
        mode,
        hip_cmd_trim: trim_deg * std::f64::consts::PI / 180.0,
        ..ControlConfig::default()
    };
    let traj = match run_experiment(&params, &cfg, &ctrl) {
        Ok(t) => t,
        Err(SimError::Fall { t, cycle, .. }) => {
            println!("{label}: FELL at {t:.2}s cycle {cycle}");
            return None;
        }
        Err(SimError::Diverged { t, detail, .. }) => {
            println!("{label}: DIVERGED at {t:.3}s: {detail}");
            return None;
        }
        Err(e) => {
            println!("{label}: {e}");
            return None;
        }
    };
    let acfg = AnalysisConfig::default();
    match analyze(&traj, &params, &acfg) {
        Ok(res) => {
            let m = |k: &str| {
                let v = &res.measures[k];
                let mean = v.iter().sum::<f64>() / v.len() as f64;
                let sd = (v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>()
                    / (v.len().max(2) - 1) as f64)
                    .sqrt();
                (mean, sd)
            };
            println!(
                "{label}: {} cycles | v {:.3} m/s | COT {:.3} | SKF {:.2}+-{:.2} | SHF {:.2}+-{:.2} | SAPF {:.2}+-{:.2} | LLTD {:.2}+-{:.2} | TO {:.2}+-{:.2} | dt(SAPF,LLTD) {:+.2}+-{:.2} | d|pTL| {:+.4} | d|pRB| {:+.4} | dpRBx {:+.4} | diag {}",
                res.cycles.len(),
                res.v_avg,
                res.cot.cot,
                m("t_skf_pct").0, m("t_skf_pct").1,
                m("t_shf_pct").0, m("t_shf_pct").1,
                m("t_sapf_pct").0, m("t_sapf_pct").1,
                m("t_lltd_pct").0, m("t_lltd_pct").1,
                m("t_to_pct").0, m("t_to_pct").1,
                m("dt_sapf_lltd_pct").0, m("dt_sapf_lltd_pct").1,
                m("d_p_tl_mag").0,
                m("d_p_rb_mag").0,
                m("d_p_rb_x").0,
                res.diagnostics.len(),
            );
            Some(res)
        }
        Err(e) => {
            println!("{label}: analysis failed: {e}");
            None
        }
    }
}

fn main() {
    let mut duration = 30.0;
    let mut trim = -6.0;
    let mut seed = 1u64;
    let mut args = std::env::args().skip(1);
    while let Some(a) = args.next() {
        match a.as_str() {
            "--duration" => duration = args.next().unwrap().parse().unwrap(),
            "--trim-deg" => trim = args.next().unwrap().parse().unwrap(),
            "--seed" => seed = args.next().unwrap().parse().unwrap(),
            other => panic!("unknown arg {other}"),
        }
    }
    let akfi = run_one("AKFI  ", ActuationMode::Akfi, duration, trim, seed);
    let pkfi = run_one("PKFI  ", ActuationMode::pkfi(), duration, trim, seed);
    let pkfi40 = run_one("PKFI40", ActuationMode::pkfi40(), duration, trim, seed);

    if let (Some(a), Some(p)) = (akfi.as_ref(), pkfi.as_ref()) {
        for key in ["t_skf_pct", "t_sapf_pct", "dt_sapf_lltd_pct", "d_p_tl_mag", "d_p_rb_mag"] {
            let n = a.measures[key].len().min(p.measures[key].len());
            let s = PairedSample::new(
                key,
                a.measures[key][..n].to_vec(),
                p.measures[key][..n].to_vec(),
            );
            match wilcoxon_signed_rank(&s) {
                Ok(r) => println!(
                    "  {key}: mean A {:+.3} -> P {:+.3}, p = {:.2e}",
                    s.a.iter().sum::<f64>() / n as f64,
                    s.b.iter().sum::<f64>() / n as f64,
                    r.p_value
                ),
                Err(e) => println!("  {key}: {e}"),
            }
        }
    }
    if let (Some(a), Some(p)) = (akfi.as_ref(), pkfi40.as_ref()) {
        let key = "t_skf_pct";
        let n = a.measures[key].len().min(p.measures[key].len());
        println!(
            "  PKFI40 SKF mean: {:.2} (AKFI {:.2})",
            p.measures[key][..n].iter().sum::<f64>() / n as f64,
            a.measures[key][..n].iter().sum::<f64>() / n as f64
        );
    }
}
