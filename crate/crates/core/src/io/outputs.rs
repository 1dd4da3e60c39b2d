//! CSV/JSON emission and the content-hash manifest.
//!
//! The diagnostic CSV has a fixed, documented column order; new columns may
//! only ever be appended. Floats serialize as shortest round-trip decimals
//! or, in hex mode, as the raw IEEE-754 bit pattern.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::blowup::{AlignResult, RescaledFrame};
use crate::diagnostics::DiagnosticRecord;
use crate::error::{Error, Result};
use crate::flow::FlowTrajectory;
use crate::io::config::FloatFormat;
use crate::profile::MetricProfile;
use crate::soliton::{OdeResiduals, SolitonProfile, SystemResiduals};

pub const SERIES_COLUMNS: &str = "t,mu,mu_argmin,g_plus,psi_min,psi_max,f_cal_max_abs,fs_min,fs_max,sup_curv,q_min,threshold,flag_a,flag_b,flag_c,flag_d,flag_e,gs_max";

pub fn fmt_f64(x: f64, fmt: FloatFormat) -> String {
    match fmt {
        FloatFormat::Decimal => format!("{x}"),
        FloatFormat::Hex => format!("{:016x}", x.to_bits()),
    }
}

pub fn parse_f64(text: &str, fmt: FloatFormat) -> Result<f64> {
    match fmt {
        FloatFormat::Decimal => text
            .parse::<f64>()
            .map_err(|_| Error::Config(format!("bad decimal float {text:?}"))),
        FloatFormat::Hex => u64::from_str_radix(text, 16)
            .map(f64::from_bits)
            .map_err(|_| Error::Config(format!("bad hex float {text:?}"))),
    }
}

pub fn series_csv(series: &[DiagnosticRecord], fmt: FloatFormat) -> String {
    let mut out = String::with_capacity(series.len() * 200 + 64);
    out.push_str(SERIES_COLUMNS);
    out.push('\n');
    for r in series {
        let f = |x: f64| fmt_f64(x, fmt);
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            f(r.t),
            f(r.mu),
            r.mu_argmin,
            f(r.g_plus),
            f(r.psi_min),
            f(r.psi_max),
            f(r.f_cal_max_abs),
            f(r.fs_min),
            f(r.fs_max),
            f(r.sup_curv),
            f(r.q_min),
            f(r.threshold),
            r.assumption_flags[0] as u8,
            r.assumption_flags[1] as u8,
            r.assumption_flags[2] as u8,
            r.assumption_flags[3] as u8,
            r.assumption_flags[4] as u8,
            f(r.gs_max),
        ));
    }
    out
}

#[derive(Debug, Serialize)]
struct SnapshotDoc<'a> {
    schema: u32,
    t: f64,
    node_count: usize,
    f: &'a [f64],
    g: &'a [f64],
    jac: &'a [f64],
}

pub fn snapshots_json(snapshots: &[MetricProfile]) -> String {
    let docs: Vec<SnapshotDoc> = snapshots
        .iter()
        .map(|p| SnapshotDoc {
            schema: 1,
            t: p.t,
            node_count: p.node_count(),
            f: &p.f,
            g: &p.g,
            jac: &p.jac,
        })
        .collect();
    serde_json::to_string_pretty(&docs).expect("snapshot serialization")
}

pub fn alignments_csv(rows: &[(usize, f64, f64, AlignResult)], fmt: FloatFormat) -> String {
    let mut out = String::from("k,t_k,K_k,chi_star,scale_star,dist,dist_f\n");
    for (k, t_k, kf, a) in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            k,
            fmt_f64(*t_k, fmt),
            fmt_f64(*kf, fmt),
            fmt_f64(a.chi, fmt),
            fmt_f64(a.scale, fmt),
            fmt_f64(a.dist, fmt),
            fmt_f64(a.dist_f, fmt),
        ));
    }
    out
}

pub fn soliton_csv(s: &SolitonProfile, fmt: FloatFormat) -> String {
    let mut out = String::from("r,phi,s,f,g\n");
    for i in 0..s.r.len() {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            fmt_f64(s.r[i], fmt),
            fmt_f64(s.phi[i], fmt),
            fmt_f64(s.s[i], fmt),
            fmt_f64(s.f[i], fmt),
            fmt_f64(s.g[i], fmt),
        ));
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub tag: String,
    pub complete: bool,
    pub files: Vec<ManifestEntry>,
}

pub fn sha256_hex(data: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(data);
    let out = h.finalize();
    let mut hex = String::with_capacity(64);
    for b in out {
        hex.push_str(&format!("{b:02x}"));
    }
    hex
}

/// Everything a run may want written; absent parts are skipped.
#[derive(Default)]
pub struct OutputBundle<'a> {
    pub trajectory: Option<&'a FlowTrajectory>,
    pub frames: Option<&'a [RescaledFrame]>,
    pub alignments: Option<&'a [(usize, f64, f64, AlignResult)]>,
    pub soliton: Option<&'a SolitonProfile>,
    pub soliton_residuals: Option<(&'a OdeResiduals, &'a SystemResiduals)>,
    /// free-form extra files (name, content)
    pub extra: Vec<(String, String)>,
    pub config_echo: Option<String>,
}

/// Write the bundle into `dir` plus a manifest with one sha256 per file.
/// If any payload write fails, the manifest is still written with
/// `complete = false` before the error is returned.
pub fn write_outputs(
    dir: &Path,
    bundle: &OutputBundle,
    tag: &str,
    fmt: FloatFormat,
) -> Result<Manifest> {
    fs::create_dir_all(dir)?;
    let mut payloads: BTreeMap<String, String> = BTreeMap::new();

    if let Some(traj) = bundle.trajectory {
        payloads.insert("series.csv".into(), series_csv(&traj.series, fmt));
        payloads.insert("snapshots.json".into(), snapshots_json(&traj.snapshots));
        let summary = serde_json::json!({
            "schema": 1,
            "stop_reason": traj.stop_reason,
            "steps": traj.steps,
            "remesh_count": traj.remesh_count,
            "t_est": traj.t_est,
            "fit": traj.fit,
            "type1_ratio_series": traj.type1_ratio_series,
        });
        payloads.insert(
            "run_summary.json".into(),
            serde_json::to_string_pretty(&summary).expect("summary"),
        );
    }
    if let Some(frames) = bundle.frames {
        let docs: Vec<serde_json::Value> = frames
            .iter()
            .map(|fr| {
                serde_json::json!({
                    "k": fr.k,
                    "t_center": fr.t_center,
                    "node_count": fr.profile.node_count(),
                    "g": fr.profile.g,
                    "f": fr.profile.f,
                    "rho": fr.rho.iter().map(|v| if v.is_finite() { Some(*v) } else { None }).collect::<Vec<_>>(),
                })
            })
            .collect();
        payloads.insert(
            "frames.json".into(),
            serde_json::to_string_pretty(&docs).expect("frames"),
        );
    }
    if let Some(rows) = bundle.alignments {
        payloads.insert("alignments.csv".into(), alignments_csv(rows, fmt));
        let docs: Vec<serde_json::Value> = rows
            .iter()
            .map(|(k, t_k, kf, a)| {
                serde_json::json!({
                    "k": k, "t_k": t_k, "K_k": kf,
                    "chi_star": a.chi, "scale_star": a.scale,
                    "dist": a.dist, "dist_f": a.dist_f,
                    "window_nodes": a.window_nodes,
                })
            })
            .collect();
        payloads.insert(
            "alignments.json".into(),
            serde_json::to_string_pretty(&docs).expect("alignments"),
        );
    }
    if let Some(s) = bundle.soliton {
        payloads.insert("soliton.csv".into(), soliton_csv(s, fmt));
    }
    if let Some((ode, sys)) = bundle.soliton_residuals {
        let doc = serde_json::json!({ "ode": ode, "system": sys });
        payloads.insert(
            "soliton_residuals.json".into(),
            serde_json::to_string_pretty(&doc).expect("residuals"),
        );
    }
    if let Some(cfg) = &bundle.config_echo {
        payloads.insert("config.echo".into(), cfg.clone());
    }
    for (name, content) in &bundle.extra {
        payloads.insert(name.clone(), content.clone());
    }

    let mut entries = Vec::new();
    let mut failure: Option<Error> = None;
    for (name, content) in &payloads {
        match fs::write(dir.join(name), content.as_bytes()) {
            Ok(()) => entries.push(ManifestEntry {
                name: name.clone(),
                sha256: sha256_hex(content.as_bytes()),
                bytes: content.len() as u64,
            }),
            Err(e) => {
                failure = Some(e.into());
                break;
            }
        }
    }
    let manifest = Manifest {
        schema: 1,
        tag: tag.to_string(),
        complete: failure.is_none(),
        files: entries,
    };
    let manifest_text = serde_json::to_string_pretty(&manifest).expect("manifest");
    fs::write(dir.join("manifest.json"), manifest_text)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

pub fn default_out_dir(cli_out: Option<PathBuf>) -> PathBuf {
    if let Ok(env) = std::env::var("BERGERFLOW_OUT") {
        return PathBuf::from(env);
    }
    cli_out.unwrap_or_else(|| PathBuf::from("out"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_round_trip_both_modes() {
        for &x in &[0.1, -3.5e-13, 1.0, 2.0 / 3.0, 1e300, -0.0] {
            for fmt in [FloatFormat::Decimal, FloatFormat::Hex] {
                let s = fmt_f64(x, fmt);
                let y = parse_f64(&s, fmt).unwrap();
                assert_eq!(x.to_bits(), y.to_bits(), "{s}");
            }
        }
    }

    #[test]
    fn empty_trajectory_header_only() {
        let csv = series_csv(&[], FloatFormat::Decimal);
        assert_eq!(csv, format!("{SERIES_COLUMNS}\n"));
    }

    #[test]
    fn manifest_hash_tracks_payload() {
        let a = sha256_hex(b"t,mu\n0,1\n");
        let b = sha256_hex(b"t,mu\n0,2\n");
        assert_ne!(a, b);
        assert_eq!(a, sha256_hex(b"t,mu\n0,1\n"));
    }
}
