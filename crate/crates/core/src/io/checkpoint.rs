//! Exact-resume checkpoints.
//!
//! A checkpoint is the full run bookkeeping (state, series, snapshots, step
//! counter) plus the canonical config text. State arrays are stored as raw
//! IEEE-754 bit patterns, so a resumed run replays the remaining steps
//! bit-for-bit and the final diagnostic series is identical to an
//! uninterrupted run.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diagnostics::DiagnosticRecord;
use crate::error::{Error, Result};
use crate::flow::{self, FlowTrajectory, RunBook, RunOptions, StopReason};
use crate::grid::SpatialGrid;
use crate::io::config::{parse_config, serialize_config, RunConfig};
use crate::profile::MetricProfile;

pub const CHECKPOINT_SCHEMA: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct HexProfile {
    node_count: usize,
    t: String,
    f: Vec<String>,
    g: Vec<String>,
    jac: Vec<String>,
}

impl HexProfile {
    fn pack(p: &MetricProfile) -> Self {
        let hex = |v: &[f64]| v.iter().map(|x| format!("{:016x}", x.to_bits())).collect();
        HexProfile {
            node_count: p.node_count(),
            t: format!("{:016x}", p.t.to_bits()),
            f: hex(&p.f),
            g: hex(&p.g),
            jac: hex(&p.jac),
        }
    }

    fn unpack(&self) -> Result<MetricProfile> {
        let bits = |s: &String| -> Result<f64> {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| Error::Checkpoint(format!("bad hex float {s:?}")))
        };
        let arr = |v: &[String]| -> Result<Vec<f64>> { v.iter().map(bits).collect() };
        let grid = SpatialGrid::new(self.node_count)?;
        Ok(MetricProfile {
            grid,
            f: arr(&self.f)?,
            g: arr(&self.g)?,
            jac: arr(&self.jac)?,
            t: bits(&self.t)?,
        })
    }
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Checkpoint {
    pub schema: u32,
    pub config: String,
    pub steps: u64,
    state: HexProfile,
    pub series: Vec<DiagnosticRecord>,
    snapshots: Vec<HexProfile>,
    mu_last_snapshot: String,
    pub remesh_count: usize,
    pub last_recorded_step: Option<u64>,
    mu0: String,
}

impl Checkpoint {
    pub fn pack(book: &RunBook, cfg: &RunConfig) -> Self {
        Checkpoint {
            schema: CHECKPOINT_SCHEMA,
            config: serialize_config(cfg),
            steps: book.steps,
            state: HexProfile::pack(&book.state),
            series: book.series.clone(),
            snapshots: book.snapshots.iter().map(HexProfile::pack).collect(),
            mu_last_snapshot: format!("{:016x}", book.mu_last_snapshot.to_bits()),
            remesh_count: book.remesh_count,
            last_recorded_step: book.last_recorded_step,
            mu0: format!("{:016x}", book.mu0.to_bits()),
        }
    }

    pub fn unpack(&self) -> Result<(RunBook, RunConfig)> {
        if self.schema != CHECKPOINT_SCHEMA {
            return Err(Error::Checkpoint(format!(
                "checkpoint schema {} not supported",
                self.schema
            )));
        }
        let (cfg, _) = parse_config(&self.config, false)?;
        let bits = |s: &String| -> Result<f64> {
            u64::from_str_radix(s, 16)
                .map(f64::from_bits)
                .map_err(|_| Error::Checkpoint(format!("bad hex float {s:?}")))
        };
        let book = RunBook {
            state: self.state.unpack()?,
            series: self.series.clone(),
            snapshots: self
                .snapshots
                .iter()
                .map(HexProfile::unpack)
                .collect::<Result<_>>()?,
            steps: self.steps,
            mu_last_snapshot: bits(&self.mu_last_snapshot)?,
            remesh_count: self.remesh_count,
            last_recorded_step: self.last_recorded_step,
            mu0: bits(&self.mu0)?,
        };
        Ok((book, cfg))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)
            .map_err(|e| Error::Checkpoint(format!("serialize: {e}")))?;
        fs::write(path, text)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Checkpoint(format!("parse: {e}")))
    }
}

/// Drive a run writing a checkpoint every `stride` steps (0 = only on
/// completion). Returns the trajectory; the final checkpoint on disk holds
/// the completed bookkeeping.
pub fn run_with_checkpoints(
    profile: &MetricProfile,
    cfg: &RunConfig,
    opts: &RunOptions,
    path: Option<&Path>,
    stride: u64,
) -> Result<FlowTrajectory> {
    let book = flow::start_book(profile, opts)?;
    resume_loop(book, cfg, opts, path, stride)
}

/// Continue a checkpointed run to completion. The run options come from
/// the config embedded in the checkpoint, so the replay matches the
/// original invocation exactly.
pub fn resume(path_in: &Path) -> Result<(FlowTrajectory, RunConfig)> {
    let ck = Checkpoint::load(path_in)?;
    let (book, cfg) = ck.unpack()?;
    let opts = cfg.run_options();
    let traj = resume_loop(book, &cfg, &opts, Some(path_in), 0)?;
    Ok((traj, cfg))
}

fn resume_loop(
    mut book: RunBook,
    cfg: &RunConfig,
    opts: &RunOptions,
    path: Option<&Path>,
    stride: u64,
) -> Result<FlowTrajectory> {
    let reason: StopReason = loop {
        if let Some(reason) = flow::advance(&mut book, opts)? {
            break reason;
        }
        if stride > 0 && book.steps % stride == 0 {
            if let Some(p) = path {
                Checkpoint::pack(&book, cfg).save(p)?;
            }
        }
    };
    if let Some(p) = path {
        Checkpoint::pack(&book, cfg).save(p)?;
    }
    flow::finish(book, opts, reason)
}

/// Run until roughly `steps_target` steps, then checkpoint and stop early.
/// Used by the determinism tests to produce a mid-run checkpoint.
pub fn run_partial(
    profile: &MetricProfile,
    cfg: &RunConfig,
    opts: &RunOptions,
    path: &Path,
    steps_target: u64,
) -> Result<u64> {
    let mut book = flow::start_book(profile, opts)?;
    while book.steps < steps_target {
        if let Some(_reason) = flow::advance(&mut book, opts)? {
            break;
        }
    }
    Checkpoint::pack(&book, cfg).save(path)?;
    Ok(book.steps)
}
