//! The subcommands, written against `io::Write` so they can be tested
//! without spawning the binary.

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use ptstab_core::lyapunov::verify_certificate;
use ptstab_core::plant::check_assumptions;
use ptstab_sim::{run, write_csv, MonitorReport, Trajectory};
use rayon::prelude::*;

use crate::config::{cartesian, parse_values, ConfigError, Experiment};
use crate::svg::{line_plot, Scale};

/// Every check passed.
pub const EXIT_PASS: i32 = 0;
/// The run completed but a monitor or check failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
/// The simulation aborted, or output could not be written.
pub const EXIT_RUNTIME: i32 = 2;
/// The configuration or the certificate was rejected.
pub const EXIT_CONFIG: i32 = 3;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub out: Option<PathBuf>,
    pub d_tau: Option<f64>,
    pub plots: bool,
    /// Recorded in the metadata; the integrator itself is deterministic.
    pub seed: Option<u64>,
}

impl RunOptions {
    fn apply(&self, exp: &mut Experiment) -> Result<(), ConfigError> {
        if let Some(h) = self.d_tau {
            if !(h.is_finite() && h > 0.0) {
                return Err(ConfigError::Invalid(vec![format!("--dtau must be positive, got {h}")]));
            }
            exp.sim.d_tau = h;
        }
        if let Some(dir) = &self.out {
            exp.output_dir = dir.clone();
        }
        Ok(())
    }
}

/// Outcome of one simulation, as written to disk and to the sweep summary.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub code: i32,
    pub dir: PathBuf,
    pub report: Option<MonitorReport>,
    pub error: Option<String>,
}

pub fn cmd_run(mut exp: Experiment, opts: &RunOptions, log: &mut dyn Write) -> io::Result<i32> {
    if let Err(e) = opts.apply(&mut exp) {
        writeln!(log, "{e}")?;
        return Ok(EXIT_CONFIG);
    }
    let res = simulate(&exp, opts, log)?;
    Ok(res.code)
}

fn simulate(exp: &Experiment, opts: &RunOptions, log: &mut dyn Write) -> io::Result<RunResult> {
    let dir = exp.output_dir.clone();
    let fail = |code: i32, msg: String| RunResult {
        code,
        dir: dir.clone(),
        report: None,
        error: Some(msg),
    };

    let grid = exp.grid.samples(exp.known().order());
    match verify_certificate(&exp.ctrl.cert, exp.known(), &grid) {
        Ok(rep) if rep.pass => {}
        Ok(rep) => {
            writeln!(log, "{rep}")?;
            writeln!(log, "certificate rejected; not simulating")?;
            return Ok(fail(EXIT_CONFIG, "certificate failed verification".into()));
        }
        Err(e) => {
            writeln!(log, "certificate: {e}")?;
            return Ok(fail(EXIT_CONFIG, format!("certificate: {e}")));
        }
    }

    if let Err(e) = fs::create_dir_all(&dir) {
        writeln!(log, "cannot create {}: {e}", dir.display())?;
        return Ok(fail(EXIT_RUNTIME, e.to_string()));
    }
    fs::write(dir.join("config.toml"), toml::to_string(&exp.raw).unwrap_or_default())?;

    let outcome = run(&exp.sim, exp.plant.as_sim(), &exp.ctrl);
    let (traj, report) = match outcome {
        Ok(v) => v,
        Err(e) => {
            let msg = e.to_string();
            writeln!(log, "simulation failed: {msg}")?;
            fs::write(dir.join("error.txt"), format!("{msg}\n"))?;
            return Ok(fail(EXIT_RUNTIME, msg));
        }
    };

    write_outputs(&dir, &traj, &report, opts)?;
    writeln!(log, "{report}")?;
    writeln!(log, "wrote {}", dir.display())?;
    let code = if report.pass { EXIT_PASS } else { EXIT_CHECK_FAILED };
    Ok(RunResult {
        code,
        dir,
        report: Some(report),
        error: None,
    })
}

fn write_outputs(dir: &Path, traj: &Trajectory, report: &MonitorReport, opts: &RunOptions) -> io::Result<()> {
    let mut csv = BufWriter::new(File::create(dir.join("trajectory.csv"))?);
    write_csv(traj, &mut csv)?;
    csv.flush()?;
    fs::write(dir.join("monitors.txt"), report.to_kv())?;

    let mut meta = String::new();
    for (k, v) in &traj.metadata {
        meta.push_str(&format!("{k}={v}\n"));
    }
    meta.push_str(&format!("steps={}\n", traj.steps));
    meta.push_str(&format!("dead_zone_steps={}\n", traj.safeguards.dead_zone_steps));
    meta.push_str(&format!("r_cap_steps={}\n", traj.safeguards.r_cap_steps));
    meta.push_str(&format!(
        "seed={}\n",
        opts.seed.map_or("none".to_string(), |s| s.to_string())
    ));
    fs::write(dir.join("metadata.txt"), meta)?;

    if opts.plots {
        let s = &traj.samples;
        let plots = [
            (
                "x_norm.svg",
                line_plot("|x|", "t", "|x|", &s.iter().map(|p| (p.t, p.x_norm())).collect::<Vec<_>>(), Scale::Log),
            ),
            (
                "input.svg",
                line_plot("u", "t", "u", &s.iter().map(|p| (p.t, p.u)).collect::<Vec<_>>(), Scale::Linear),
            ),
            (
                "r.svg",
                line_plot("r", "tau", "r", &s.iter().map(|p| (p.tau, p.r)).collect::<Vec<_>>(), Scale::Log),
            ),
            (
                "theta_hat.svg",
                line_plot(
                    "theta_hat",
                    "tau",
                    "theta_hat",
                    &s.iter().map(|p| (p.tau, p.theta_hat)).collect::<Vec<_>>(),
                    Scale::Log,
                ),
            ),
        ];
        for (name, svg) in plots {
            fs::write(dir.join(name), svg)?;
        }
    }
    Ok(())
}

/// Runs every combination of `key=v1,v2,...` overrides in parallel, one
/// subdirectory per run, and writes `summary.csv`.
pub fn cmd_sweep(base: Experiment, sets: &[String], opts: &RunOptions, log: &mut dyn Write) -> io::Result<i32> {
    let mut axes = Vec::new();
    for s in sets {
        let Some((key, values)) = s.split_once('=') else {
            writeln!(log, "--set expects key=v1,v2,..., got {s:?}")?;
            return Ok(EXIT_CONFIG);
        };
        match parse_values(values) {
            Ok(v) => axes.push((key.trim().to_string(), v)),
            Err(e) => {
                writeln!(log, "{e}")?;
                return Ok(EXIT_CONFIG);
            }
        }
    }
    let root = opts.out.clone().unwrap_or_else(|| base.output_dir.clone());
    let combos = cartesian(&axes);

    let results: Vec<(String, RunResult, Vec<u8>)> = combos
        .par_iter()
        .enumerate()
        .map(|(k, combo)| {
            let label = combo
                .iter()
                .map(|(key, v)| format!("{key}={v}"))
                .collect::<Vec<_>>()
                .join(" ");
            let dir = root.join(format!("run_{k:03}"));
            let mut buf = Vec::new();
            let result = match base.with_overrides(combo) {
                Err(e) => {
                    let _ = writeln!(buf, "{e}");
                    RunResult {
                        code: EXIT_CONFIG,
                        dir,
                        report: None,
                        error: Some(e.to_string()),
                    }
                }
                Ok(mut exp) => {
                    let run_opts = RunOptions {
                        out: Some(dir.clone()),
                        ..opts.clone()
                    };
                    match run_opts.apply(&mut exp) {
                        Err(e) => RunResult {
                            code: EXIT_CONFIG,
                            dir,
                            report: None,
                            error: Some(e.to_string()),
                        },
                        Ok(()) => simulate(&exp, &run_opts, &mut buf).unwrap_or_else(|e| RunResult {
                            code: EXIT_RUNTIME,
                            dir,
                            report: None,
                            error: Some(e.to_string()),
                        }),
                    }
                }
            };
            (label, result, buf)
        })
        .collect();

    fs::create_dir_all(&root)?;
    let mut summary = String::from("run,overrides,exit_code,pass,final_x_norm,x_norm_at_check,sup_u,error\n");
    let mut worst = EXIT_PASS;
    for (k, (label, res, buf)) in results.iter().enumerate() {
        writeln!(log, "== run_{k:03} [{label}]")?;
        log.write_all(buf)?;
        worst = worst.max(res.code);
        let (pass, fx, xc, su) = match &res.report {
            Some(r) => (
                r.pass.to_string(),
                format!("{:.17e}", r.final_x_norm),
                r.x_norm_at_check.map_or(String::new(), |v| format!("{v:.17e}")),
                format!("{:.17e}", r.sup_u),
            ),
            None => ("false".into(), String::new(), String::new(), String::new()),
        };
        let err = res.error.as_deref().unwrap_or("").replace(['\n', '"'], " ");
        summary.push_str(&format!(
            "{k},\"{}\",{},{pass},{fx},{xc},{su},\"{err}\"\n",
            label.replace('"', "'"),
            res.code
        ));
    }
    fs::write(root.join("summary.csv"), summary)?;
    writeln!(log, "{} runs, summary in {}", results.len(), root.join("summary.csv").display())?;
    Ok(worst)
}

pub fn cmd_verify_cert(exp: &Experiment, log: &mut dyn Write) -> io::Result<i32> {
    let grid = exp.grid.samples(exp.known().order());
    match verify_certificate(&exp.ctrl.cert, exp.known(), &grid) {
        Ok(rep) => {
            writeln!(log, "{rep}")?;
            Ok(if rep.pass { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
        Err(e) => {
            writeln!(log, "certificate: {e}")?;
            Ok(EXIT_CONFIG)
        }
    }
}

pub fn cmd_check_assumptions(exp: &Experiment, log: &mut dyn Write) -> io::Result<i32> {
    let grid = exp.grid.samples(exp.known().order());
    match check_assumptions(exp.known(), &grid) {
        Ok(rep) => {
            writeln!(log, "{rep}")?;
            Ok(if rep.all_passed() { EXIT_PASS } else { EXIT_CHECK_FAILED })
        }
        Err(e) => {
            writeln!(log, "{e}")?;
            Ok(EXIT_CONFIG)
        }
    }
}
