//! Runs one configured experiment and writes its CSV files plus `run.json`.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use erkn_core::measure::{energy_error, max_q_error, reference_samples, sampled_run, steps_per_interval};
use erkn_core::problems::make_problem;
use erkn_core::stability::scan_region;
use erkn_core::verification::{jacobian_symplecticity, symplectic_residuals, verify_method, SYMPLECTIC_TOL};
use erkn_core::{MethodTableau, Problem, SolveSettings, State};
use nalgebra::DVector;
use serde_json::json;

use crate::config::{ExperimentConfig, Kind};
use crate::CliError;

/// Outcome of a run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Gating verification checks that failed.
    pub verify_failures: usize,
    /// Rows whose integration stopped with an error.
    pub row_errors: usize,
}

/// Fixed-format float with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn status(e: &erkn_core::Error) -> String {
    format!("error: {e}").replace([',', '\n'], ";")
}

/// File-name form of a method name: `SERKN3s4(1)` becomes `SERKN3s4_1`.
pub fn slug(name: &str) -> String {
    name.replace('(', "_").replace(')', "")
}

fn settings(cfg: &ExperimentConfig, h: f64, t_end: f64) -> SolveSettings {
    SolveSettings { stage_tol: cfg.stage_tol, max_iters: cfg.max_iters, ..SolveSettings::new(h, t_end) }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn io(path: &Path) -> impl Fn(std::io::Error) -> CliError + '_ {
    move |e| CliError::Io(format!("{}: {e}", path.display()))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<RunReport, CliError> {
    fs::create_dir_all(&cfg.out_dir).map_err(io(&cfg.out_dir))?;
    let start = Instant::now();
    let mut report = RunReport::default();
    let mut notes = serde_json::Map::new();
    match cfg.kind {
        Kind::Converge | Kind::Efficiency => errors_vs_step(cfg, &mut report, &mut notes)?,
        Kind::Energy => energy(cfg, &mut report)?,
        Kind::Stability => stability(cfg, &mut report)?,
        Kind::Verify => verify(cfg, &mut report)?,
    }
    let manifest = json!({
        "kind": cfg.kind.name(),
        "config": cfg,
        "versions": {
            "erkn": env!("CARGO_PKG_VERSION"),
            "erkn-core": erkn_core::VERSION,
        },
        "notes": notes,
        "files": report.files.iter().map(|p| p.file_name().unwrap().to_string_lossy()).collect::<Vec<_>>(),
        "wall_clock_seconds": cfg.timing.then(|| start.elapsed().as_secs_f64()),
    });
    let path = cfg.out_dir.join("run.json");
    let mut out = create(&path)?;
    serde_json::to_writer_pretty(&mut out, &manifest).map_err(|e| CliError::Io(e.to_string()))?;
    writeln!(out).and_then(|_| out.flush()).map_err(io(&path))?;
    Ok(report)
}

fn problem(cfg: &ExperimentConfig) -> Result<Problem, CliError> {
    let name = cfg.problem.as_deref().ok_or_else(|| CliError::Config("no problem given".into()))?;
    Ok(make_problem(name, &cfg.problem_settings.params())?)
}

/// Reference positions on the common sample grid: the exact solution when
/// the problem has one, otherwise a refined SERKN3s4(1) run.
fn reference(
    cfg: &ExperimentConfig,
    prob: &Problem,
    interval: f64,
    notes: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<Vec<DVector<f64>>, CliError> {
    let count = (cfg.t_end / interval).round() as usize + 1;
    if let Some(exact) = prob.reference() {
        notes.insert("reference".into(), json!("exact solution"));
        return Ok(reference_samples(exact, prob.initial().t, interval, count));
    }
    let h_min = *cfg.h.last().unwrap();
    let h_ref = h_min / cfg.reference_refinement as f64;
    notes.insert(
        "reference".into(),
        json!(format!("SERKN3s4(1) with h = {h_ref:e} (h_min / {})", cfg.reference_refinement)),
    );
    let run = sampled_run(&MethodTableau::serkn3s4_1(), prob, prob.initial(), &settings(cfg, h_ref, cfg.t_end), interval)?;
    if let Some(e) = run.summary.error {
        return Err(CliError::Core(e));
    }
    Ok(run.samples)
}

fn errors_vs_step(
    cfg: &ExperimentConfig,
    report: &mut RunReport,
    notes: &mut serde_json::Map<String, serde_json::Value>,
) -> Result<(), CliError> {
    let prob = problem(cfg)?;
    let interval = cfg.h[0];
    for h in &cfg.h {
        steps_per_interval(interval, *h)?;
    }
    notes.insert("sample_interval".into(), json!(interval));
    notes.insert("spacing".into(), json!(cfg.problem_settings.spacing));
    let reference = reference(cfg, &prob, interval, notes)?;

    let path = cfg.out_dir.join(format!("{}.csv", cfg.kind.name()));
    let mut out = create(&path)?;
    writeln!(out, "method,h,nfev,GE,cpu_seconds,status").map_err(io(&path))?;
    for name in &cfg.methods {
        let m = MethodTableau::by_name(name)?;
        for h in &cfg.h {
            let start = Instant::now();
            let run = sampled_run(&m, &prob, prob.initial(), &settings(cfg, *h, cfg.t_end), interval);
            let secs = if cfg.timing { start.elapsed().as_secs_f64() } else { f64::NAN };
            let (nfev, ge, stat) = match run {
                Ok(run) => {
                    let nfev = run.summary.evaluations;
                    match max_q_error(&run, &reference) {
                        Ok(ge) => (nfev, ge, "ok".to_string()),
                        Err(e) => (nfev, f64::NAN, status(&e)),
                    }
                }
                Err(e) => (0, f64::NAN, status(&e)),
            };
            if stat != "ok" {
                report.row_errors += 1;
            }
            writeln!(out, "{name},{},{nfev},{},{},{stat}", num(*h), num(ge), num(secs)).map_err(io(&path))?;
        }
    }
    out.flush().map_err(io(&path))?;
    report.files.push(path);
    Ok(())
}

fn energy(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let prob = problem(cfg)?;
    let h = cfg.h[0];
    let path = cfg.out_dir.join("energy.csv");
    let mut out = create(&path)?;
    writeln!(out, "method,t_end,GEH,status").map_err(io(&path))?;
    for name in &cfg.methods {
        let m = MethodTableau::by_name(name)?;
        for t_end in &cfg.t_ends {
            let (geh, stat) = match energy_error(&m, &prob, prob.initial(), &settings(cfg, h, *t_end)) {
                Ok((_, geh)) => (geh, "ok".to_string()),
                Err(e) => {
                    report.row_errors += 1;
                    (f64::NAN, status(&e))
                }
            };
            writeln!(out, "{name},{},{},{stat}", num(*t_end), num(geh)).map_err(io(&path))?;
        }
    }
    out.flush().map_err(io(&path))?;
    report.files.push(path);
    Ok(())
}

fn stability(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let w = &cfg.stability;
    for name in &cfg.methods {
        let m = MethodTableau::by_name(name)?;
        let grid = scan_region(&m, (w.v_min, w.v_max), (w.z_min, w.z_max), w.nv, w.nz)?;
        let path = cfg.out_dir.join(format!("stability_{}.csv", slug(name)));
        let mut out = create(&path)?;
        grid.write_csv(&mut out).and_then(|_| out.flush()).map_err(io(&path))?;
        report.files.push(path);
    }
    Ok(())
}

/// Phase-space points for the map-symplecticity rows.
fn probe_states(prob: &Problem) -> Vec<State> {
    let n = prob.dim();
    let mut states = vec![prob.initial().clone()];
    for (sq, sp) in [(0.3, -0.8), (-0.9, 0.4), (0.6, 1.1), (-0.2, -0.5)] {
        let q = DVector::from_fn(n, |i, _| sq * (1.0 + 0.1 * i as f64));
        let p = DVector::from_fn(n, |i, _| sp * (1.0 - 0.1 * i as f64) * prob.matrix()[(i, i)].sqrt().max(1.0));
        states.push(State::new(0.0, q, p));
    }
    states
}

fn verify(cfg: &ExperimentConfig, report: &mut RunReport) -> Result<(), CliError> {
    let maps: Vec<(&str, Problem)> = ["duffing", "stellar"]
        .into_iter()
        .map(|p| Ok((p, make_problem(p, &cfg.problem_settings.params())?)))
        .collect::<Result<_, CliError>>()?;
    let path = cfg.out_dir.join("verify.csv");
    let mut out = create(&path)?;
    writeln!(out, "method,check_id,value,threshold,pass").map_err(io(&path))?;
    for name in &cfg.methods {
        let m = MethodTableau::by_name(name)?;
        let mut rows: Vec<(String, f64, f64, &str)> = Vec::new();
        if m.is_classical() {
            // Classical symplecticity is the v = 0 case of the identities.
            let worst = symplectic_residuals(&m, 0.0)?.into_iter().fold(0.0, f64::max);
            let pass = if worst < SYMPLECTIC_TOL { "true" } else { "false" };
            rows.push((format!("sympl-{}s@v=0", m.stages()), worst, SYMPLECTIC_TOL, pass));
        } else {
            for row in verify_method(&m)? {
                let pass = match (row.informational, row.pass) {
                    (true, _) => "info",
                    (false, true) => "true",
                    (false, false) => "false",
                };
                rows.push((row.check_id, row.value, row.threshold, pass));
            }
        }
        for (pname, prob) in &maps {
            let mut worst: f64 = 0.0;
            for s in probe_states(prob) {
                worst = worst.max(jacobian_symplecticity(&m, prob, &s, 1.0 / 20.0)?);
            }
            rows.push((format!("map-{pname}@h=0.05"), worst, 1e-6, if worst <= 1e-6 { "true" } else { "false" }));
        }
        for (id, value, threshold, pass) in rows {
            if pass == "false" {
                report.verify_failures += 1;
            }
            writeln!(out, "{name},{id},{},{},{pass}", num(value), num(threshold)).map_err(io(&path))?;
        }
    }
    out.flush().map_err(io(&path))?;
    report.files.push(path);
    Ok(())
}
