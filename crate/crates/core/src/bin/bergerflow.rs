use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bergerflow_core::blowup::{align_distance, extract_blowup_sequence, AlignResult};
use bergerflow_core::calabi::{g2_deviation, run_scalar_to_time, CalabiState};
use bergerflow_core::flow::{run_to_time, FlowTrajectory};
use bergerflow_core::grid::SpatialGrid;
use bergerflow_core::initial::construct_and_validate;
use bergerflow_core::io::checkpoint::{resume, run_with_checkpoints};
use bergerflow_core::io::config::{parse_config, serialize_config, RunConfig};
use bergerflow_core::io::outputs::{default_out_dir, fmt_f64, write_outputs, OutputBundle};
use bergerflow_core::soliton::{ode_residuals, soliton_system_residuals, SolitonProfile, SOLITON_LAMBDA};

#[derive(Parser)]
#[command(
    name = "bergerflow",
    version,
    about = "Cohomogeneity-one Ricci flow on the twisted sphere bundle: flow runs, blowdown-soliton checks, blow-up alignment"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// key-value config file; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// output directory (BERGERFLOW_OUT overrides)
    #[arg(long)]
    out: Option<PathBuf>,
    /// override grid.nodes
    #[arg(long)]
    grid: Option<usize>,
    /// unknown config keys become errors
    #[arg(long)]
    strict: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Check the config and the closeness assumptions of the seed metric
    Validate(Common),
    /// Run the flow and write the diagnostic series, snapshots, checkpoint
    Run {
        #[command(flatten)]
        common: Common,
        /// continue from a checkpoint file
        #[arg(long)]
        resume: Option<PathBuf>,
    },
    /// Build the blowdown soliton and verify its identities
    Soliton(Common),
    /// Run the flow, extract blow-up frames, align against the soliton
    Blowup(Common),
    /// Twin run: full system vs scalar reduction from Kahler data
    Twin(Common),
    /// Quick verification report (soliton identities + a short flow run)
    Report(Common),
}

fn load_config(common: &Common) -> Result<RunConfig, String> {
    let text = match &common.config {
        Some(path) => fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?,
        None => "schema = 1\n".to_string(),
    };
    let (mut cfg, warnings) = parse_config(&text, common.strict).map_err(|e| e.to_string())?;
    for w in warnings {
        eprintln!("warning: {w}");
    }
    if let Some(n) = common.grid {
        cfg.nodes = n;
    }
    Ok(cfg)
}

fn run_flow(cfg: &RunConfig, ckpt: Option<&PathBuf>) -> Result<FlowTrajectory, String> {
    let grid = SpatialGrid::new(cfg.nodes).map_err(|e| e.to_string())?;
    let params = cfg.seed_params().map_err(|e| e.to_string())?;
    let (profile, report) = construct_and_validate(&params, &grid).map_err(|e| e.to_string())?;
    if report.constant_phi_warning {
        eprintln!(
            "warning: constant phi with epsilon > 0; the seed family nominally asks for a nonconstant weight"
        );
    }
    if !report.all_passed() {
        return Err(format!("seed metric fails the closeness assumptions: {report:?}"));
    }
    let opts = cfg.run_options();
    run_with_checkpoints(&profile, cfg, &opts, ckpt.map(|p| p.as_path()), cfg.checkpoint_stride)
        .map_err(|e| e.to_string())
}

fn cmd_validate(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    let grid = SpatialGrid::new(cfg.nodes).map_err(|e| e.to_string())?;
    let params = cfg.seed_params().map_err(|e| e.to_string())?;
    let a2 = params.validate(&grid).map_err(|e| e.to_string())?;
    let (_, report) = construct_and_validate(&params, &grid).map_err(|e| e.to_string())?;
    println!("A^2 = {a2}");
    println!("closeness assumptions (tolerance {:.3e}):", report.tolerance);
    let rows = [
        ("(a) fiber below base  ", &report.a_ordering),
        ("(b) Kahler pinching   ", &report.b_kahler_pinching),
        ("(c) fiber gradient    ", &report.c_gradient),
        ("(d) volume threshold  ", &report.d_threshold),
        ("(e) base monotonicity ", &report.e_monotone),
    ];
    for (name, m) in rows {
        println!(
            "  {name} {}  margin {:+.6e} at node {}",
            if m.passed { "PASS" } else { "FAIL" },
            m.margin,
            m.node
        );
    }
    if report.constant_phi_warning {
        println!("  note: constant phi with epsilon > 0 (accepted with warning)");
    }
    if report.all_passed() {
        Ok(())
    } else {
        Err("closeness validation failed".into())
    }
}

fn cmd_run(common: &Common, resume_from: Option<PathBuf>) -> Result<(), String> {
    let dir = default_out_dir(common.out.clone());
    let (traj, cfg) = match &resume_from {
        Some(path) => resume(path).map_err(|e| e.to_string())?,
        None => {
            let cfg = load_config(common)?;
            fs::create_dir_all(&dir).map_err(|e| e.to_string())?;
            let ckpt_path = dir.join("checkpoint.json");
            let traj = run_flow(&cfg, Some(&ckpt_path))?;
            (traj, cfg)
        }
    };
    let bundle = OutputBundle {
        trajectory: Some(&traj),
        config_echo: Some(serialize_config(&cfg)),
        ..Default::default()
    };
    write_outputs(&dir, &bundle, &cfg.tag, cfg.float_format).map_err(|e| e.to_string())?;
    println!(
        "run finished: {} steps, stop {:?}, {} records, {} snapshots -> {}",
        traj.steps,
        traj.stop_reason,
        traj.series.len(),
        traj.snapshots.len(),
        dir.display()
    );
    if let (Some(t_est), Some(fit)) = (traj.t_est, traj.fit) {
        println!(
            "singular time estimate {} (slope {}, fit residual {})",
            fmt_f64(t_est, cfg.float_format),
            fit.slope,
            fit.rel_residual
        );
    }
    Ok(())
}

fn cmd_soliton(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    let dir = default_out_dir(common.out.clone());
    let prof = SolitonProfile::build(cfg.r_min, cfg.r_max, cfg.soliton_nodes, cfg.chi)
        .map_err(|e| e.to_string())?;
    let ode = ode_residuals(&prof);
    let sys = soliton_system_residuals(&prof, SOLITON_LAMBDA).map_err(|e| e.to_string())?;
    println!(
        "soliton on [{}, {}] with {} nodes (chi = {}):",
        cfg.r_min, cfg.r_max, cfg.soliton_nodes, cfg.chi
    );
    println!("  first-order ODE residual   {:.3e}", ode.res1_max);
    println!("  second-order ODE residual  {:.3e}", ode.res2_max);
    println!("  finite-difference check    {:.3e}", ode.res1_fd_max);
    println!("  shrinker system (lambda = {}):", sys.lambda);
    println!("    potential-gradient eq    {:.3e}", sys.h1d_max);
    println!("    base-sphere eq           {:.3e}", sys.g2d_max);
    println!("    Kahler residual |F|      {:.3e}", sys.f_cal_max);
    let bundle = OutputBundle {
        soliton: Some(&prof),
        soliton_residuals: Some((&ode, &sys)),
        config_echo: Some(serialize_config(&cfg)),
        ..Default::default()
    };
    write_outputs(&dir, &bundle, &cfg.tag, cfg.float_format).map_err(|e| e.to_string())?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_blowup(common: &Common) -> Result<(), String> {
    let cfg = load_config(common)?;
    let dir = default_out_dir(common.out.clone());
    let traj = run_flow(&cfg, None)?;
    let frames = extract_blowup_sequence(&traj, cfg.frames, cfg.mu_last_fraction)
        .map_err(|e| e.to_string())?;
    let soliton = SolitonProfile::build(cfg.r_min, cfg.r_max, cfg.soliton_nodes, cfg.chi)
        .map_err(|e| e.to_string())?;
    let mut rows: Vec<(usize, f64, f64, AlignResult)> = Vec::new();
    for (k, fr) in frames.iter().enumerate() {
        let a = align_distance(fr, &soliton, cfg.window).map_err(|e| e.to_string())?;
        println!(
            "frame {k}: t_k = {:.6}, K = {:.4e}, chi* = {:+.5}, scale* = {:.5}, dist = {:.4e}",
            fr.t_center, fr.k, a.chi, a.scale, a.dist
        );
        rows.push((k, fr.t_center, fr.k, a));
    }
    let bundle = OutputBundle {
        trajectory: Some(&traj),
        frames: Some(&frames),
        alignments: Some(&rows),
        config_echo: Some(serialize_config(&cfg)),
        ..Default::default()
    };
    write_outputs(&dir, &bundle, &cfg.tag, cfg.float_format).map_err(|e| e.to_string())?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_twin(common: &Common) -> Result<(), String> {
    let mut cfg = load_config(common)?;
    // the scalar reduction is only valid for Kahler data
    cfg.epsilon = 0.0;
    let dir = default_out_dir(common.out.clone());
    let grid = SpatialGrid::new(cfg.nodes).map_err(|e| e.to_string())?;
    let params = cfg.seed_params().map_err(|e| e.to_string())?;
    let (profile, _) = construct_and_validate(&params, &grid).map_err(|e| e.to_string())?;
    let mu0 = profile.g.iter().cloned().fold(f64::INFINITY, f64::min);
    let t_end = mu0 * mu0 / 8.0; // half the Kahler singular time
    let ctrl = cfg.run_options().control;
    let full = run_to_time(&profile, t_end, &ctrl).map_err(|e| e.to_string())?;
    let scalar = run_scalar_to_time(
        &CalabiState::from_profile(&profile).map_err(|e| e.to_string())?,
        t_end,
        &ctrl,
    )
    .map_err(|e| e.to_string())?;
    let dev = g2_deviation(&full, &scalar);
    let h = grid.h();
    println!(
        "twin run to t = {t_end}: max relative g^2 deviation = {dev:.6e} (h^2 = {:.3e})",
        h * h
    );
    let mut csv = String::from("x,g2_full,v_scalar,rel_dev\n");
    for i in 0..grid.node_count() {
        let a = full.g[i] * full.g[i];
        let b = scalar.v[i];
        csv.push_str(&format!(
            "{},{},{},{}\n",
            fmt_f64(grid.x(i), cfg.float_format),
            fmt_f64(a, cfg.float_format),
            fmt_f64(b, cfg.float_format),
            fmt_f64((a - b) / b, cfg.float_format)
        ));
    }
    let bundle = OutputBundle {
        extra: vec![("twin.csv".into(), csv)],
        config_echo: Some(serialize_config(&cfg)),
        ..Default::default()
    };
    write_outputs(&dir, &bundle, &cfg.tag, cfg.float_format).map_err(|e| e.to_string())?;
    println!("wrote {}", dir.display());
    Ok(())
}

fn cmd_report(common: &Common) -> Result<(), String> {
    let mut cfg = load_config(common)?;
    if common.grid.is_none() {
        cfg.nodes = cfg.nodes.min(512); // keep the default report quick
    }
    cfg.remesh_ratio = cfg.remesh_ratio.min(2.0);
    cfg.mu_stop_fraction = cfg.mu_stop_fraction.max(0.25);
    let mut lines: Vec<(String, bool, String)> = Vec::new();

    let sol = SolitonProfile::build(-10.0, 10.0, 4096, cfg.chi).map_err(|e| e.to_string())?;
    let ode = ode_residuals(&sol);
    lines.push((
        "soliton first-order ODE residual <= 1e-12".into(),
        ode.res1_max <= 1e-12,
        format!("{:.3e}", ode.res1_max),
    ));
    lines.push((
        "soliton second-order ODE residual <= 1e-10".into(),
        ode.res2_max <= 1e-10,
        format!("{:.3e}", ode.res2_max),
    ));
    let sys = soliton_system_residuals(&sol, SOLITON_LAMBDA).map_err(|e| e.to_string())?;
    lines.push((
        "shrinker system residuals <= 1e-6".into(),
        sys.h1d_max <= 1e-6 && sys.g2d_max <= 1e-6,
        format!("{:.3e} / {:.3e}", sys.h1d_max, sys.g2d_max),
    ));

    let traj = run_flow(&cfg, None)?;
    let h = 2.0 / (cfg.nodes as f64 - 1.0);
    let tol = 10.0 * h * h;
    let psi_ok = traj
        .series
        .iter()
        .all(|r| r.psi_max <= tol && r.psi_min >= -1.0 - 1e-6);
    let worst_psi = traj
        .series
        .iter()
        .map(|r| r.psi_max)
        .fold(f64::NEG_INFINITY, f64::max);
    lines.push((
        "psi window held at every record".into(),
        psi_ok,
        format!("max {worst_psi:.3e} vs {tol:.3e}"),
    ));
    let argmin_pole = traj.series.iter().filter(|r| r.mu_argmin == 0).count();
    lines.push((
        "crush pinned at the small pole".into(),
        argmin_pole * 100 >= 99 * traj.series.len(),
        format!("{argmin_pole}/{}", traj.series.len()),
    ));
    if let Some(fit) = traj.fit {
        lines.push((
            "mu^2 slope inside [-12, -4] (+/- 0.5)".into(),
            fit.slope_in_window,
            format!("{:.4}", fit.slope),
        ));
    }

    println!("verification report (grid {} nodes):", cfg.nodes);
    let mut all = true;
    for (name, ok, detail) in &lines {
        println!("  [{}] {name}: {detail}", if *ok { "PASS" } else { "FAIL" });
        all &= ok;
    }
    if all {
        Ok(())
    } else {
        Err("report found failing checks".into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Validate(c) => cmd_validate(c),
        Command::Run { common, resume } => cmd_run(common, resume.clone()),
        Command::Soliton(c) => cmd_soliton(c),
        Command::Blowup(c) => cmd_blowup(c),
        Command::Twin(c) => cmd_twin(c),
        Command::Report(c) => cmd_report(c),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(msg) => {
            eprintln!("error: {msg}");
            ExitCode::FAILURE
        }
    }
}
