//! Trajectory log schema and CSV serialization.
//!
//! One row per sample at a fixed sample interval, preceded by a metadata
//! preamble of `# key=value` lines that echoes the complete effective
//! configuration. The same schema is used for simulator output and for
//! externally recorded logs fed into the analysis pipeline.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cpg::ControlConfig;
use crate::model::{JointAngles, JointRates, RobotParams, TrunkState};
use crate::sim::SimConfig;

/// Contact sample of one contact point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ContactSample {
    pub normal_force: f64,
    pub tangential_force: f64,
    pub in_contact: bool,
}

/// One logged sample. Contact order: heel L, toe L, heel R, toe R.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SampleLog {
    pub t: f64,
    pub q: JointAngles,
    pub qd: JointRates,
    pub cmd_hip_l: f64,
    pub cmd_hip_r: f64,
    pub cmd_knee_l: f64,
    pub cmd_knee_r: f64,
    pub tau_hip_l: f64,
    pub tau_hip_r: f64,
    pub tau_knee_l: f64,
    pub tau_knee_r: f64,
    pub tau_ankle_spring_l: f64,
    pub tau_ankle_spring_r: f64,
    pub tau_knee_gas_l: f64,
    pub tau_knee_gas_r: f64,
    pub tau_toe_l: f64,
    pub tau_toe_r: f64,
    pub contacts: [ContactSample; 4],
    pub trunk: TrunkState,
    /// Electrical power per motor (hip L, hip R, knee L, knee R), W,
    /// including the configured idle draw.
    pub p_elec: [f64; 4],
}

/// Complete effective configuration, echoed into every trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct EffectiveConfig {
    pub robot: RobotParams,
    pub sim: SimConfig,
    pub control: ControlConfig,
}

/// Trajectory metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryMeta {
    /// Actuation-mode label (akfi, pkfi, pkfi40).
    pub mode: String,
    pub seed: u64,
    /// Integration step, s.
    pub sim_dt: f64,
    /// Sample interval of the log, s.
    pub sample_dt: f64,
    /// Time at which the configured mode became fully active.
    pub steady_onset: Option<f64>,
    pub config: EffectiveConfig,
}

/// A sampled trajectory: metadata plus per-sample rows at constant step.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub meta: TrajectoryMeta,
    pub samples: Vec<SampleLog>,
}

#[derive(Debug, Error)]
pub enum TrajectoryError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {detail}")]
    Schema { line: usize, detail: String },
    #[error("metadata error: {0}")]
    Meta(String),
}

pub const TRAJECTORY_FORMAT_TAG: &str = "ecowalker-trajectory v1";

/// Fixed column order of the sample table.
pub const COLUMNS: [&str; 51] = [
    "t",
    "hip_l", "hip_r", "knee_l", "knee_r", "ankle_l", "ankle_r", "toe_l", "toe_r",
    "d_hip_l", "d_hip_r", "d_knee_l", "d_knee_r", "d_ankle_l", "d_ankle_r", "d_toe_l", "d_toe_r",
    "cmd_hip_l", "cmd_hip_r", "cmd_knee_l", "cmd_knee_r",
    "tau_hip_l", "tau_hip_r", "tau_knee_l", "tau_knee_r",
    "tau_ankle_spring_l", "tau_ankle_spring_r", "tau_knee_gas_l", "tau_knee_gas_r",
    "tau_toe_l", "tau_toe_r",
    "fn_heel_l", "ft_heel_l", "contact_heel_l",
    "fn_toe_l", "ft_toe_l", "contact_toe_l",
    "fn_heel_r", "ft_heel_r", "contact_heel_r",
    "fn_toe_r", "ft_toe_r", "contact_toe_r",
    "trunk_x", "trunk_y", "trunk_vx", "trunk_vy",
    "p_elec_hip_l", "p_elec_hip_r", "p_elec_knee_l", "p_elec_knee_r",
];

impl SampleLog {
    pub fn to_row(&self) -> [f64; 51] {
        let c = &self.contacts;
        [
            self.t,
            self.q.hip_l, self.q.hip_r, self.q.knee_l, self.q.knee_r,
            self.q.ankle_l, self.q.ankle_r, self.q.toe_l, self.q.toe_r,
            self.qd.hip_l, self.qd.hip_r, self.qd.knee_l, self.qd.knee_r,
            self.qd.ankle_l, self.qd.ankle_r, self.qd.toe_l, self.qd.toe_r,
            self.cmd_hip_l, self.cmd_hip_r, self.cmd_knee_l, self.cmd_knee_r,
            self.tau_hip_l, self.tau_hip_r, self.tau_knee_l, self.tau_knee_r,
            self.tau_ankle_spring_l, self.tau_ankle_spring_r,
            self.tau_knee_gas_l, self.tau_knee_gas_r,
            self.tau_toe_l, self.tau_toe_r,
            c[0].normal_force, c[0].tangential_force, c[0].in_contact as u8 as f64,
            c[1].normal_force, c[1].tangential_force, c[1].in_contact as u8 as f64,
            c[2].normal_force, c[2].tangential_force, c[2].in_contact as u8 as f64,
            c[3].normal_force, c[3].tangential_force, c[3].in_contact as u8 as f64,
            self.trunk.x, self.trunk.y, self.trunk.vx, self.trunk.vy,
            self.p_elec[0], self.p_elec[1], self.p_elec[2], self.p_elec[3],
        ]
    }

    pub fn from_row(row: &[f64; 51]) -> SampleLog {
        let contact = |i: usize| ContactSample {
            normal_force: row[31 + 3 * i],
            tangential_force: row[32 + 3 * i],
            in_contact: row[33 + 3 * i] != 0.0,
        };
        SampleLog {
            t: row[0],
            q: JointAngles {
                hip_l: row[1], hip_r: row[2], knee_l: row[3], knee_r: row[4],
                ankle_l: row[5], ankle_r: row[6], toe_l: row[7], toe_r: row[8],
            },
            qd: JointRates {
                hip_l: row[9], hip_r: row[10], knee_l: row[11], knee_r: row[12],
                ankle_l: row[13], ankle_r: row[14], toe_l: row[15], toe_r: row[16],
            },
            cmd_hip_l: row[17], cmd_hip_r: row[18], cmd_knee_l: row[19], cmd_knee_r: row[20],
            tau_hip_l: row[21], tau_hip_r: row[22], tau_knee_l: row[23], tau_knee_r: row[24],
            tau_ankle_spring_l: row[25], tau_ankle_spring_r: row[26],
            tau_knee_gas_l: row[27], tau_knee_gas_r: row[28],
            tau_toe_l: row[29], tau_toe_r: row[30],
            contacts: [contact(0), contact(1), contact(2), contact(3)],
            trunk: TrunkState { x: row[43], y: row[44], vx: row[45], vy: row[46] },
            p_elec: [row[47], row[48], row[49], row[50]],
        }
    }
}

/// Flattens a TOML value tree into sorted dotted key/value pairs.
fn flatten_toml(prefix: &str, value: &toml::Value, out: &mut Vec<(String, String)>) {
    match value {
        toml::Value::Table(table) => {
            for (k, v) in table {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten_toml(&key, v, out);
            }
        }
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Rebuilds a nested TOML table from dotted key/value pairs.
fn unflatten_toml(pairs: &[(String, String)]) -> Result<toml::Value, TrajectoryError> {
    let mut root = toml::map::Map::new();
    for (key, raw) in pairs {
        let value: toml::Value = format!("v = {raw}")
            .parse::<toml::Table>()
            .map_err(|e| TrajectoryError::Meta(format!("bad value for {key}: {e}")))?
            .remove("v")
            .unwrap();
        let mut node = &mut root;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            node = node
                .entry((*part).to_string())
                .or_insert_with(|| toml::Value::Table(toml::map::Map::new()))
                .as_table_mut()
                .ok_or_else(|| TrajectoryError::Meta(format!("key conflict at {key}")))?;
        }
        node.insert(parts[parts.len() - 1].to_string(), value);
    }
    Ok(toml::Value::Table(root))
}

impl Trajectory {
    /// Serializes the trajectory: metadata preamble, header row, samples.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {TRAJECTORY_FORMAT_TAG}\n"));
        out.push_str(&format!("# mode={}\n", self.meta.mode));
        out.push_str(&format!("# seed={}\n", self.meta.seed));
        out.push_str(&format!("# sim_dt={:.9e}\n", self.meta.sim_dt));
        out.push_str(&format!("# sample_dt={:.9e}\n", self.meta.sample_dt));
        if let Some(onset) = self.meta.steady_onset {
            out.push_str(&format!("# steady_onset={onset:.9e}\n"));
        }
        let value = toml::Value::try_from(&self.meta.config).expect("config serializes");
        let mut pairs = Vec::new();
        flatten_toml("", &value, &mut pairs);
        for (k, v) in pairs {
            out.push_str(&format!("# config.{k}={v}\n"));
        }
        out.push_str(&COLUMNS.join(","));
        out.push('\n');
        for s in &self.samples {
            let row = s.to_row();
            let mut first = true;
            for v in row {
                if !first {
                    out.push(',');
                }
                out.push_str(&format!("{v:.6e}"));
                first = false;
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &std::path::Path) -> Result<(), TrajectoryError> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv_str(text: &str) -> Result<Trajectory, TrajectoryError> {
        let mut mode = String::new();
        let mut seed = 0u64;
        let mut sim_dt = 0.0;
        let mut sample_dt = 0.0;
        let mut steady_onset = None;
        let mut config_pairs: Vec<(String, String)> = Vec::new();
        let mut header_seen = false;
        let mut samples = Vec::new();

        for (idx, line) in text.lines().enumerate() {
            let line_no = idx + 1;
            if let Some(meta) = line.strip_prefix("# ") {
                if meta == TRAJECTORY_FORMAT_TAG {
                    continue;
                }
                let (key, value) = meta.split_once('=').ok_or_else(|| TrajectoryError::Schema {
                    line: line_no,
                    detail: format!("metadata line without '=': {meta}"),
                })?;
                match key {
                    "mode" => mode = value.to_string(),
                    "seed" => {
                        seed = value.parse().map_err(|e| TrajectoryError::Schema {
                            line: line_no,
                            detail: format!("bad seed: {e}"),
                        })?
                    }
                    "sim_dt" => {
                        sim_dt = value.parse().map_err(|e| TrajectoryError::Schema {
                            line: line_no,
                            detail: format!("bad sim_dt: {e}"),
                        })?
                    }
                    "sample_dt" => {
                        sample_dt = value.parse().map_err(|e| TrajectoryError::Schema {
                            line: line_no,
                            detail: format!("bad sample_dt: {e}"),
                        })?
                    }
                    "steady_onset" => {
                        steady_onset =
                            Some(value.parse().map_err(|e| TrajectoryError::Schema {
                                line: line_no,
                                detail: format!("bad steady_onset: {e}"),
                            })?)
                    }
                    k if k.starts_with("config.") => {
                        config_pairs
                            .push((k.trim_start_matches("config.").to_string(), value.to_string()));
                    }
                    _ => {
                        return Err(TrajectoryError::Schema {
                            line: line_no,
                            detail: format!("unknown metadata key '{key}'"),
                        })
                    }
                }
                continue;
            }
            if !header_seen {
                let expect = COLUMNS.join(",");
                if line != expect {
                    return Err(TrajectoryError::Schema {
                        line: line_no,
                        detail: format!(
                            "header mismatch: expected {} columns starting 't,hip_l,...'",
                            COLUMNS.len()
                        ),
                    });
                }
                header_seen = true;
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut row = [0.0f64; 51];
            let mut count = 0;
            for (i, field) in line.split(',').enumerate() {
                if i >= 51 {
                    return Err(TrajectoryError::Schema {
                        line: line_no,
                        detail: format!("too many fields (expected {})", COLUMNS.len()),
                    });
                }
                row[i] = field.parse().map_err(|e| TrajectoryError::Schema {
                    line: line_no,
                    detail: format!("field {} ('{}'): {e}", COLUMNS[i], field),
                })?;
                count = i + 1;
            }
            if count != 51 {
                return Err(TrajectoryError::Schema {
                    line: line_no,
                    detail: format!("truncated row: {count} of {} fields", COLUMNS.len()),
                });
            }
            samples.push(SampleLog::from_row(&row));
        }
        if !header_seen {
            return Err(TrajectoryError::Schema { line: 0, detail: "missing header row".into() });
        }
        let config: EffectiveConfig = if config_pairs.is_empty() {
            EffectiveConfig::default()
        } else {
            unflatten_toml(&config_pairs)?
                .try_into()
                .map_err(|e| TrajectoryError::Meta(format!("config echo: {e}")))?
        };
        Ok(Trajectory {
            meta: TrajectoryMeta { mode, seed, sim_dt, sample_dt, steady_onset, config },
            samples,
        })
    }

    pub fn read_csv(path: &std::path::Path) -> Result<Trajectory, TrajectoryError> {
        let text = std::fs::read_to_string(path)?;
        Trajectory::from_csv_str(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_trajectory() -> Trajectory {
        let mut samples = Vec::new();
        for i in 0..5 {
            let t = i as f64 * 1e-3;
            let mut s = SampleLog { t, ..SampleLog::default() };
            s.q.hip_l = 0.1 * t;
            s.trunk.y = 0.35;
            s.p_elec = [0.5, 0.6, 0.1, 0.2];
            s.contacts[0] = ContactSample { normal_force: 10.0, tangential_force: -1.0, in_contact: true };
            samples.push(s);
        }
        Trajectory {
            meta: TrajectoryMeta {
                mode: "akfi".into(),
                seed: 42,
                sim_dt: 5e-4,
                sample_dt: 1e-3,
                steady_onset: Some(2.5),
                config: EffectiveConfig::default(),
            },
            samples,
        }
    }

    #[test]
    fn csv_round_trip_preserves_everything() {
        let traj = sample_trajectory();
        let text = traj.to_csv();
        let back = Trajectory::from_csv_str(&text).unwrap();
        assert_eq!(back.meta.mode, "akfi");
        assert_eq!(back.meta.seed, 42);
        assert_eq!(back.meta.steady_onset, Some(2.5));
        assert_eq!(back.samples.len(), traj.samples.len());
        assert_eq!(back.meta.config, traj.meta.config);
        for (a, b) in back.samples.iter().zip(&traj.samples) {
            assert!((a.q.hip_l - b.q.hip_l).abs() < 1e-9);
            assert_eq!(a.contacts[0].in_contact, b.contacts[0].in_contact);
        }
    }

    #[test]
    fn truncated_row_names_the_line() {
        let traj = sample_trajectory();
        let mut text = traj.to_csv();
        // Cut the last row in half.
        let cut = text.rfind("\n").unwrap();
        let cut2 = text[..cut].rfind("\n").unwrap();
        text.truncate(cut2 + 40);
        let err = Trajectory::from_csv_str(&text).unwrap_err();
        match err {
            TrajectoryError::Schema { line, detail } => {
                assert!(detail.contains("truncated") || detail.contains("field"), "{detail}");
                assert!(line > 0);
            }
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn header_mismatch_is_reported() {
        let err = Trajectory::from_csv_str("a,b,c\n1,2,3\n").unwrap_err();
        assert!(matches!(err, TrajectoryError::Schema { line: 1, .. }));
    }

    #[test]
    fn column_count_matches_row_arity() {
        assert_eq!(COLUMNS.len(), 51);
        let s = SampleLog::default();
        assert_eq!(s.to_row().len(), COLUMNS.len());
        let back = SampleLog::from_row(&s.to_row());
        assert_eq!(back, s);
    }
}
