//! The four subcommands. Each writes its primary output to `out` (a file
//! when a path is given) and returns the process exit status on success.

use std::io::Write;
use std::path::{Path, PathBuf};

use invfeas_core::optimizer::{
    brute_force, solve_frank_wolfe, solve_sdp, FrankWolfeOptions, Method, SdpOptions, SolveReport,
    TrackingObjective,
};
use invfeas_core::region::FeasibleRegion;
use invfeas_core::simulator::{run_scenario, steady_state_metrics, Trajectory};
use invfeas_core::{DqVector, Error as CoreError, OutputPair};

use crate::config::{pair_name, Config};
use crate::table::{format_value, Table};
use crate::verify::{self, Fault, VerifyOptions, BRUTE_FORCE_N};
use crate::CliError;

pub const REGION_HEADER: [&str; 4] = ["s1", "s2", "i_d", "i_q"];
pub const DISK_HEADER: [&str; 2] = ["i_d", "i_q"];
pub const ITERATE_HEADER: [&str; 4] = ["iteration", "s1", "s2", "objective"];
pub const SIM_HEADER: [&str; 9] = ["t", "i_d", "i_q", "i_mag", "v_d", "v_q", "P", "Q", "Vsq"];
pub const DROOP_HEADER: [&str; 3] = ["p_filt", "q_filt", "delta"];

/// `foo/bar.csv` → `foo/bar_disk.csv`.
pub fn disk_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}_disk.{ext}"))
}

/// Boundary polyline of the region and, next to it, the circle of limit
/// currents it is the image of.
pub fn region(cfg: &Config, pair: OutputPair, samples: usize, out: Option<&Path>) -> Result<(), CliError> {
    let params = cfg.params()?;
    let poly = FeasibleRegion::new(&params, pair).boundary(samples)?;
    let mut t = Table::new(REGION_HEADER.to_vec());
    for p in &poly.points {
        t.push(vec![p.s1, p.s2, p.preimage.d, p.preimage.q]);
    }
    let mut disk = Table::new(DISK_HEADER.to_vec());
    for k in 0..samples {
        let theta = 2.0 * std::f64::consts::PI * k as f64 / samples as f64;
        let i = DqVector::from_polar(params.i_max, theta);
        disk.push(vec![i.d, i.q]);
    }
    match out {
        Some(path) => {
            t.write_file(path)?;
            disk.write_file(&disk_path(path))?;
        }
        None => t.write(std::io::stdout().lock())?,
    }
    Ok(())
}

pub fn solve(
    cfg: &Config,
    pair: OutputPair,
    obj: &TrackingObjective,
    method: Method,
    history: bool,
) -> Result<SolveReport, CliError> {
    let params = cfg.params()?;
    let r = match method {
        Method::Sdp => {
            solve_sdp(&params, pair, obj, &SdpOptions { record_history: history, ..Default::default() })
        }
        Method::FrankWolfe => solve_frank_wolfe(
            &params,
            pair,
            obj,
            &FrankWolfeOptions { record_history: history, ..Default::default() },
        ),
        Method::Grid => brute_force(&params, pair, obj, BRUTE_FORCE_N),
    };
    Ok(r?)
}

pub fn render_report(pair: OutputPair, r: &SolveReport) -> String {
    let mut lines = vec![
        ("method", r.method.name().to_string()),
        ("pair", pair_name(pair)),
        ("s1", format_value(r.s1)),
        ("s2", format_value(r.s2)),
        ("i_d", format_value(r.i_star.d)),
        ("i_q", format_value(r.i_star.q)),
        ("i_mag", format_value(r.i_star.norm())),
        ("objective", format_value(r.objective)),
        ("rank1_residual", format_value(r.rank1_residual)),
        ("iterations", r.iterations.to_string()),
        ("certificate", format_value(r.certificate)),
    ];
    if let Some(path) = r.rank1_path {
        lines.push(("rank1_path", format!("{path:?}").to_lowercase()));
    }
    lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
}

/// Prints the report; on non-convergence prints the best iterate and
/// returns the error.
pub fn optimize(
    cfg: &Config,
    pair: OutputPair,
    target: [f64; 2],
    gamma: f64,
    method: Method,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let obj = TrackingObjective::new(target[0], target[1], gamma)
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let result = solve(cfg, pair, &obj, method, out.is_some());
    let report = match &result {
        Ok(r) => r,
        Err(CliError::Core(CoreError::NotConverged(r))) => r.as_ref(),
        Err(_) => return result.map(|_| ()),
    };
    stdout.write_all(render_report(pair, report).as_bytes())?;
    if let Some(path) = out {
        let mut t = Table::new(ITERATE_HEADER.to_vec());
        for it in &report.history {
            t.push(vec![it.iteration as f64, it.s1, it.s2, it.objective]);
        }
        t.write_file(path)?;
    }
    result.map(|_| ())
}

pub fn trajectory_table(traj: &Trajectory) -> Table {
    let droop = traj.records.first().is_some_and(|r| r.droop.is_some());
    let mut header = SIM_HEADER.to_vec();
    if droop {
        header.extend(DROOP_HEADER);
    }
    let mut t = Table::new(header);
    for r in &traj.records {
        let mut row = vec![r.t, r.i.d, r.i.q, r.i_mag(), r.v.d, r.v.q, r.p, r.q, r.v_sq];
        if let Some(d) = r.droop {
            row.extend([d.p_filt, d.q_filt, d.delta]);
        }
        t.push(row);
    }
    t
}

pub fn render_summary(name: &str, traj: &Trajectory, i_max: f64) -> String {
    let mut s = format!(
        "scenario = {name}\ncontroller = {}\npair = {}\npre_setpoint = {} {}\npost_setpoint = {} {}\n",
        traj.controller.name(),
        pair_name(traj.pair),
        format_value(traj.setpoints.outputs[0][0]),
        format_value(traj.setpoints.outputs[0][1]),
        format_value(traj.setpoints.outputs[1][0]),
        format_value(traj.setpoints.outputs[1][1]),
    );
    s += &format!("i_max = {}\n", format_value(i_max));
    let window = 0.1f64.min(traj.config.t_end - traj.config.t0);
    if let Ok(m) = steady_state_metrics(traj, window) {
        s += &format!(
            "final_window = {window}\nmean_i_mag = {}\nmax_i_mag = {}\nmean_P = {}\nmean_Q = {}\nmean_Vsq = {}\n",
            format_value(m.i_mag.mean),
            format_value(m.i_mag.max),
            format_value(m.p.mean),
            format_value(m.q.mean),
            format_value(m.v_sq.mean),
        );
    }
    if traj.v_sq_clamped {
        s += "v_sq_clamped = true\n";
    }
    s
}

/// Runs a scenario and writes its CSV. A run that blows up still writes the
/// samples up to that point before the error is returned.
pub fn simulate(
    cfg: &Config,
    name: &str,
    optimize: bool,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let params = cfg.params()?;
    let mut scenario = cfg.scenario(name)?;
    scenario.optimize_setpoints |= optimize;
    let result = run_scenario(&params, &scenario, &cfg.sim_config()?, &cfg.gains()?);
    let traj = match &result {
        Ok(t) => t,
        Err(CoreError::NonFinite { partial: Some(t), .. }) => t.as_ref(),
        Err(_) => return result.map(|_| ()).map_err(Into::into),
    };
    let table = trajectory_table(traj);
    match out {
        Some(path) => {
            table.write_file(path)?;
            stdout.write_all(render_summary(name, traj, params.i_max).as_bytes())?;
        }
        None => table.write(&mut *stdout)?,
    }
    result.map(|_| ()).map_err(Into::into)
}

/// Runs the check suites, prints (and optionally saves) the report, and
/// fails with [`CliError::VerifyFailed`] if any suite failed.
pub fn verify(
    cfg: &Config,
    seed: u64,
    fault: Option<Fault>,
    out: Option<&Path>,
    stdout: &mut dyn Write,
) -> Result<(), CliError> {
    let opts = VerifyOptions { seed, fault, params: cfg.params()?, gains: cfg.gains()? };
    let results = verify::run(&opts);
    let text = verify::report(seed, &results);
    stdout.write_all(text.as_bytes())?;
    if let Some(path) = out {
        std::fs::write(path, &text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    }
    if results.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(CliError::VerifyFailed)
    }
}
