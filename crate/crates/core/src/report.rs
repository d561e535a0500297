//! Experiment orchestration and on-disk results: `scan.csv`,
//! `profile-<i>.csv`, `analytic.csv`, `manifest.txt` and optional SVG plots.
//!
//! Numbers are written as `{:.11e}` (twelve significant digits). Rows are
//! gathered in input order before anything is written, so output does not
//! depend on the order in which parallel work finishes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crate::analytic::{classical_limit, effective_width_linear, quantum_limit};
use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::evolver::Frame;
use crate::model::{MeasurementSetup, PhysicalSystem};
use crate::plot;
use crate::sweep::{scan_delta_a, ScanRow, SweepResult};

pub const SCAN_HEADER: &str = "delta_a,delta_a_eff_equivalent,delta_a_eff_gaussfit,\
analytic_linear,classical_limit,quantum_limit,leak_max,tail_ratio,status";
pub const PROFILE_HEADER: &str = "epsilon,re_I,im_I,P";
pub const ANALYTIC_HEADER: &str = "delta_a,analytic_linear,classical_limit,quantum_limit";

/// Twelve significant digits in scientific notation.
pub fn fmt_value(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{v:.11e}")
    }
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Closed-form curves at one `Δa`. The linear width uses `β = 0` with the
/// remaining constants of `system`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticRow {
    pub delta_a: f64,
    pub linear: Result<f64>,
    pub classical: f64,
    pub quantum: f64,
}

pub fn analytic_row(system: &PhysicalSystem, setup: &MeasurementSetup) -> AnalyticRow {
    let linear_system = PhysicalSystem::new(system.mass(), system.omega(), 0.0, system.hbar());
    let linear = linear_system.and_then(|s| effective_width_linear(&s, setup));
    AnalyticRow {
        delta_a: setup.delta_a(),
        linear,
        classical: classical_limit(setup),
        quantum: quantum_limit(system, setup),
    }
}

fn analytic_rows(config: &RunConfig) -> Result<Vec<AnalyticRow>> {
    config
        .delta_a
        .iter()
        .map(|&da| Ok(analytic_row(&config.system, &config.setup.with_delta_a(da)?)))
        .collect()
}

pub fn analytic_csv(config: &RunConfig) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{ANALYTIC_HEADER}").unwrap();
    for r in analytic_rows(config)? {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_value(r.delta_a),
            fmt_value(*r.linear.as_ref().unwrap_or(&f64::NAN)),
            fmt_value(r.classical),
            fmt_value(r.quantum)
        )
        .unwrap();
    }
    Ok(out)
}

/// Row status as written to `scan.csv`.
pub fn row_status(row: &ScanRow, tail_ratio: f64) -> String {
    match &row.result {
        Ok(r) if r.diagnostics.tail_ratio > tail_ratio => "tail_not_converged".into(),
        Ok(_) => "ok".into(),
        Err(e) => format!("failed: {e}"),
    }
}

pub fn scan_csv(config: &RunConfig, rows: &[ScanRow]) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "{SCAN_HEADER}").unwrap();
    for (row, a) in rows.iter().zip(analytic_rows(config)?) {
        let nan = f64::NAN;
        let (eq, fit, leak, tail) = match &row.result {
            Ok(r) => (
                r.width_equivalent,
                *r.width_gauss_fit.as_ref().unwrap_or(&nan),
                r.diagnostics.leak_max,
                r.diagnostics.tail_ratio,
            ),
            Err(_) => (nan, nan, nan, nan),
        };
        let fields = [
            fmt_value(row.delta_a),
            fmt_value(eq),
            fmt_value(fit),
            fmt_value(*a.linear.as_ref().unwrap_or(&nan)),
            fmt_value(a.classical),
            fmt_value(a.quantum),
            fmt_value(leak),
            fmt_value(tail),
            csv_field(&row_status(row, config.numerics.tail_ratio)),
        ];
        writeln!(out, "{}", fields.join(",")).unwrap();
    }
    Ok(out)
}

pub fn profile_csv(result: &SweepResult) -> String {
    let mut out = String::new();
    writeln!(out, "{PROFILE_HEADER}").unwrap();
    let eps = result.epsilon_grid.values();
    for ((e, a), p) in eps.iter().zip(&result.amplitudes).zip(&result.profile) {
        let v = a.value();
        writeln!(
            out,
            "{},{},{},{}",
            fmt_value(*e),
            fmt_value(v.re),
            fmt_value(v.im),
            fmt_value(*p)
        )
        .unwrap();
    }
    out
}

fn frame_label(frame: &Frame) -> String {
    match frame {
        Frame::Lab => "lab".into(),
        Frame::Following { gain } => format!("following gain={}", fmt_value(*gain)),
    }
}

/// Flat `key = value` manifest: configuration echo, resolved quantities per
/// row and timings.
pub fn manifest(config: &RunConfig, rows: &[ScanRow], wall_seconds: f64) -> String {
    let mut out = String::new();
    let mut put = |k: &str, v: String| writeln!(out, "{k} = {v}").unwrap();
    put("artifact.name", env!("CARGO_PKG_NAME").into());
    put("artifact.version", env!("CARGO_PKG_VERSION").into());
    for (k, v) in config.echo() {
        put(&format!("config.{k}"), v);
    }
    put("derived.quantum_scale", fmt_value(config.system.quantum_scale()));
    put("derived.mode_frequency", fmt_value(config.setup.mode_frequency()));
    let tau = config.setup.tau();
    let mut failed = 0;
    for (i, row) in rows.iter().enumerate() {
        let p = format!("row.{i}");
        let status = row_status(row, config.numerics.tail_ratio);
        if status != "ok" {
            failed += 1;
        }
        put(&format!("{p}.delta_a"), fmt_value(row.delta_a));
        put(&format!("{p}.status"), status);
        put(&format!("{p}.seconds"), format!("{:.3}", row.seconds));
        if let Ok(r) = &row.result {
            let d = &r.diagnostics;
            put(&format!("{p}.frame"), frame_label(&d.frame));
            put(&format!("{p}.epsilon_half_width"), fmt_value(r.epsilon_grid.half_width()));
            put(&format!("{p}.epsilon_points"), r.epsilon_grid.count().to_string());
            put(&format!("{p}.epsilon_doublings"), r.doublings.to_string());
            put(&format!("{p}.dx_min"), fmt_value(d.dx_min));
            put(&format!("{p}.dx_max"), fmt_value(d.dx_max));
            put(&format!("{p}.half_width_max"), fmt_value(d.half_width_max));
            put(&format!("{p}.num_steps_max"), d.num_steps_max.to_string());
            put(&format!("{p}.dt_min"), fmt_value(tau / d.num_steps_max as f64));
            put(&format!("{p}.leak_max"), fmt_value(d.leak_max));
            put(&format!("{p}.tail_ratio"), fmt_value(d.tail_ratio));
            put(&format!("{p}.ln_amplitude_floor"), fmt_value(d.ln_amplitude_floor));
        }
    }
    put("summary.rows", rows.len().to_string());
    put("summary.rows_failed", failed.to_string());
    put("summary.wall_seconds", format!("{wall_seconds:.3}"));
    out
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Outcome of [`run_experiment`].
#[derive(Debug)]
pub struct RunSummary {
    pub rows: Vec<ScanRow>,
    pub files: Vec<PathBuf>,
    /// Rows whose status is not `ok`.
    pub failed: usize,
}

impl RunSummary {
    /// 0 when every row succeeded, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.failed == 0 {
            0
        } else {
            2
        }
    }
}

/// Runs the scan described by `config` and writes every output file into
/// `config.output.directory`.
pub fn run_experiment(config: &RunConfig) -> Result<RunSummary> {
    let dir = &config.output.directory;
    std::fs::create_dir_all(dir).map_err(|e| Error::Io {
        path: dir.display().to_string(),
        message: e.to_string(),
    })?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.parallelism)
        .build()
        .map_err(|e| Error::invalid("parallelism", e.to_string()))?;
    let rows = pool.install(|| {
        scan_delta_a(&config.delta_a, &config.system, &config.setup, &config.numerics)
    })?;
    let wall = start.elapsed().as_secs_f64();

    let mut files = Vec::new();
    let mut emit = |name: String, text: String| -> Result<()> {
        let path = dir.join(name);
        write_file(&path, &text)?;
        files.push(path);
        Ok(())
    };
    emit("scan.csv".into(), scan_csv(config, &rows)?)?;
    for (i, row) in rows.iter().enumerate() {
        if let (true, Ok(r)) = (config.output.profiles.includes(i), &row.result) {
            emit(format!("profile-{i}.csv"), profile_csv(r))?;
        }
    }
    emit("analytic.csv".into(), analytic_csv(config)?)?;
    if config.output.plots {
        emit("scan.svg".into(), plot::scan_svg(&plot_rows(config, &rows)?))?;
    }
    emit("manifest.txt".into(), manifest(config, &rows, wall))?;

    let failed = rows
        .iter()
        .filter(|r| row_status(r, config.numerics.tail_ratio) != "ok")
        .count();
    Ok(RunSummary {
        rows,
        files,
        failed,
    })
}

fn plot_rows(config: &RunConfig, rows: &[ScanRow]) -> Result<Vec<plot::ScanPoint>> {
    Ok(rows
        .iter()
        .zip(analytic_rows(config)?)
        .map(|(row, a)| plot::ScanPoint {
            delta_a: row.delta_a,
            simulated: row.result.as_ref().ok().map(|r| r.width_equivalent),
            analytic: a.linear.ok(),
            classical: a.classical,
            quantum: a.quantum,
        })
        .collect())
}
