//! Per-iteration solver logs and their on-disk formats.
//!
//! Traces serialize to CSV (one row per step record) plus a JSON metadata
//! sidecar. Floats are written with Rust's shortest round-trip formatting,
//! so `parse(serialize(trace))` reproduces every field bit-for-bit and
//! identical runs produce byte-identical files.

use std::fmt;
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use super::active_set::ActiveSet;
use super::SolverConfig;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepType {
    Regular,
    TowardOrigin,
    Away,
    Pairwise,
    Drop,
    FullCorrection,
    Terminated,
}

impl StepType {
    fn as_str(self) -> &'static str {
        match self {
            StepType::Regular => "regular",
            StepType::TowardOrigin => "toward_origin",
            StepType::Away => "away",
            StepType::Pairwise => "pairwise",
            StepType::Drop => "drop",
            StepType::FullCorrection => "full_correction",
            StepType::Terminated => "terminated",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "regular" => StepType::Regular,
            "toward_origin" => StepType::TowardOrigin,
            "away" => StepType::Away,
            "pairwise" => StepType::Pairwise,
            "drop" => StepType::Drop,
            "full_correction" => StepType::FullCorrection,
            "terminated" => StepType::Terminated,
            _ => return None,
        })
    }
}

impl fmt::Display for StepType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One iteration of a solver run. `f_value` is the objective at the start
/// of the iteration, so the record sequence is `f(x_0), f(x_1), ...`;
/// a `Terminated` record carries the final value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub iter: usize,
    pub f_value: f64,
    pub step_type: StepType,
    pub gamma: f64,
    pub gamma_was_clipped: bool,
    pub good_step: bool,
    pub active_size: usize,
    pub lmo_score: f64,
}

/// Run metadata carried in the JSON sidecar.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TraceMeta {
    pub solver: String,
    pub objective: String,
    pub atom_set: String,
    pub config: SolverConfig,
    /// Largest coefficient-sum certificate over all iterates: an upper
    /// bound on `max_t ||x_t||_A`.
    pub rho_coeff_sum: f64,
    /// Smallest weight ever stored during the run.
    pub min_weight_seen: f64,
    pub final_f: f64,
    pub terminated: bool,
    pub wall_time_ms: f64,
}

/// Full log of a solver run.
#[derive(Debug, Clone)]
pub struct Trace {
    pub records: Vec<StepRecord>,
    pub final_active: ActiveSet,
    /// Coefficient sums per iterate, aligned with `iterates`:
    /// entry `t` is the sum after `t` steps (entry 0 is the start).
    pub coeff_sums: Vec<f64>,
    /// Iterate snapshots (same alignment), kept only when the config asks.
    pub iterates: Option<Vec<Vec<f64>>>,
    pub meta: TraceMeta,
}

impl Trace {
    pub fn terminated(&self) -> bool {
        self.meta.terminated
    }

    pub fn final_f(&self) -> f64 {
        self.meta.final_f
    }

    /// Number of actual steps taken (terminated records are certificates,
    /// not steps).
    pub fn step_count(&self) -> usize {
        self.records.iter().filter(|r| r.step_type != StepType::Terminated).count()
    }

    pub fn good_step_count(&self) -> usize {
        self.records.iter().filter(|r| r.good_step).count()
    }

    /// Objective value at iteration `t`, clamped to the final value past the
    /// end of the run.
    pub fn f_at(&self, t: usize) -> f64 {
        match self.records.get(t) {
            Some(r) => r.f_value,
            None => self.meta.final_f,
        }
    }

    /// Objective values `f(x_0), ..., f(x_T)` including the final iterate.
    pub fn objective_curve(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .records
            .iter()
            .filter(|r| r.step_type != StepType::Terminated)
            .map(|r| r.f_value)
            .collect();
        v.push(self.meta.final_f);
        v
    }

    pub fn write_csv<W: Write>(&self, mut w: W, f_star: Option<f64>) -> Result<()> {
        writeln!(w, "iter,f,eps,step_type,gamma,clipped,good,active_size,lmo_score")?;
        for r in &self.records {
            let eps = match f_star {
                Some(fs) => format!("{}", r.f_value - fs),
                None => String::new(),
            };
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{}",
                r.iter,
                r.f_value,
                eps,
                r.step_type,
                r.gamma,
                r.gamma_was_clipped,
                r.good_step,
                r.active_size,
                r.lmo_score
            )?;
        }
        Ok(())
    }

    pub fn csv_string(&self, f_star: Option<f64>) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf, f_star).expect("write to Vec cannot fail");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    /// Parse the step records back out of a CSV stream (the `eps` column is
    /// derived data and is ignored).
    pub fn parse_csv<R: BufRead>(r: R) -> Result<Vec<StepRecord>> {
        let mut records = Vec::new();
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line.starts_with("iter,")) {
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            if fields.len() != 9 {
                return Err(Error::Parse {
                    context: format!("trace CSV line {}", lineno + 1),
                    message: format!("expected 9 fields, got {}", fields.len()),
                });
            }
            let parse_err = |what: &str, msg: String| Error::Parse {
                context: format!("trace CSV line {}, field {what}", lineno + 1),
                message: msg,
            };
            records.push(StepRecord {
                iter: fields[0].parse().map_err(|e: std::num::ParseIntError| parse_err("iter", e.to_string()))?,
                f_value: fields[1].parse().map_err(|e: std::num::ParseFloatError| parse_err("f", e.to_string()))?,
                step_type: StepType::parse(fields[3])
                    .ok_or_else(|| parse_err("step_type", format!("unknown step type {:?}", fields[3])))?,
                gamma: fields[4].parse().map_err(|e: std::num::ParseFloatError| parse_err("gamma", e.to_string()))?,
                gamma_was_clipped: fields[5].parse().map_err(|e: std::str::ParseBoolError| parse_err("clipped", e.to_string()))?,
                good_step: fields[6].parse().map_err(|e: std::str::ParseBoolError| parse_err("good", e.to_string()))?,
                active_size: fields[7].parse().map_err(|e: std::num::ParseIntError| parse_err("active_size", e.to_string()))?,
                lmo_score: fields[8].parse().map_err(|e: std::num::ParseFloatError| parse_err("lmo_score", e.to_string()))?,
            });
        }
        Ok(records)
    }

    pub fn meta_json(&self) -> String {
        serde_json::to_string_pretty(&self.meta).expect("meta serializes")
    }
}
