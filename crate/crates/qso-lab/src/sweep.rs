//! Parameter sweeps: a family template, a grid of parameter values, and
//! one diagnostic analysis per cell. Rows come out in grid order no
//! matter how the cells were scheduled across threads, and a failing
//! cell records its error in the row instead of aborting the sweep.

use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use qso_core::dynamics::{self, FixedPointConfig, IterateConfig, Stability};

use crate::error::CliError;
use crate::experiment::{self, AnalysisSpec};
use crate::jsonio;
use crate::operator;

/// Same cluster tolerance as the per-run omega summary.
const OMEGA_CLUSTER_TOL: f64 = 1e-3;

const DEFAULT_STEPS: usize = 10_000;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub family: FamilyTemplate,
    pub grid: Vec<GridAxis>,
    pub analysis: AnalysisSpec,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FamilyTemplate {
    pub family: String,
    #[serde(default)]
    pub params: Map<String, Value>,
}

/// One grid dimension. The first axis varies slowest in the output.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridAxis {
    pub param: String,
    pub values: Vec<Value>,
}

fn diagnostic_columns(analysis: &AnalysisSpec) -> &'static [&'static str] {
    match analysis {
        AnalysisSpec::Cesaro { .. } => {
            &["oscillation_sup", "boundary_proximity", "rate", "verdict"]
        }
        AnalysisSpec::FixedPoints { .. } => &[
            "n_points",
            "n_attracting",
            "n_repelling",
            "n_saddle",
            "n_nonhyperbolic",
        ],
        _ => &[],
    }
}

fn validate(spec: &SweepSpec) -> Result<usize, CliError> {
    if spec.grid.is_empty() {
        return Err(CliError::parse("sweep grid lists no axes"));
    }
    let mut total = 1usize;
    for (i, axis) in spec.grid.iter().enumerate() {
        if axis.values.is_empty() {
            return Err(CliError::parse(format!(
                "grid axis {} ({}) lists no values",
                i, axis.param
            )));
        }
        if spec.grid[..i].iter().any(|a| a.param == axis.param) {
            return Err(CliError::parse(format!(
                "grid axis {} repeats parameter {}",
                i, axis.param
            )));
        }
        total = total.checked_mul(axis.values.len()).ok_or_else(|| {
            CliError::parse("grid is too large to enumerate")
        })?;
    }
    if diagnostic_columns(&spec.analysis).is_empty() {
        return Err(CliError::parse(
            "sweep analysis must be cesaro or fixed-points",
        ));
    }
    if spec.analysis.seed_override().is_some() {
        return Err(CliError::parse(
            "sweeps derive per-cell seeds from --seed; remove the analysis seed",
        ));
    }
    Ok(total)
}

/// Values of every axis at flat index `c`, last axis fastest.
fn cell_values(grid: &[GridAxis], mut c: usize) -> Vec<Value> {
    let mut out = vec![Value::Null; grid.len()];
    for (ax, axis) in grid.iter().enumerate().rev() {
        let n = axis.values.len();
        out[ax] = axis.values[c % n].clone();
        c /= n;
    }
    out
}

fn render_param(v: &Value) -> String {
    match v.as_str() {
        Some(s) => jsonio::csv_escape(s),
        None => v.to_string(),
    }
}

fn compute_cell(
    spec: &SweepSpec,
    values: &[Value],
    seed: u64,
    steps_flag: Option<usize>,
    strict: bool,
) -> Result<Vec<String>, CliError> {
    let mut params = spec.family.params.clone();
    for (axis, v) in spec.grid.iter().zip(values) {
        params.insert(axis.param.clone(), v.clone());
    }
    let op = operator::build_family(&spec.family.family, &params)?;
    match &spec.analysis {
        AnalysisSpec::Cesaro { x0, n, .. } => {
            let n = n.or(steps_flag).unwrap_or(DEFAULT_STEPS);
            if n == 0 {
                return Err(CliError::parse("step count must be at least 1"));
            }
            let x0 = experiment::resolve_x0(x0, op.dim(), strict, seed)?;
            let traj = dynamics::iterate(&op.form, &x0, n, &IterateConfig::default())
                .map_err(|e| CliError::runtime(format!("orbit: {e}")))?;
            let diag = dynamics::cesaro_diagnostic(&traj)
                .map_err(|e| CliError::runtime(format!("cesaro: {e}")))?;
            let omega = dynamics::omega_limit_estimate(&traj, OMEGA_CLUSTER_TOL);
            let rate = dynamics::convergence_rate(&traj, &traj.final_point());
            Ok(vec![
                jsonio::float_cell(diag.oscillation_sup),
                jsonio::float_cell(omega.boundary_proximity),
                jsonio::float_cell(rate.rate),
                experiment::verdict_str(diag.verdict).to_string(),
            ])
        }
        AnalysisSpec::FixedPoints {
            n_starts,
            max_iterations,
            ..
        } => {
            let cfg = FixedPointConfig {
                n_starts: n_starts.unwrap_or(32),
                seed,
                max_iterations: max_iterations.unwrap_or(60),
                ..Default::default()
            };
            let rep = dynamics::find_fixed_points(&op.form, &cfg);
            let count =
                |s: Stability| rep.points.iter().filter(|p| p.stability == s).count();
            Ok(vec![
                rep.points.len().to_string(),
                count(Stability::Attracting).to_string(),
                count(Stability::Repelling).to_string(),
                count(Stability::Saddle).to_string(),
                count(Stability::Nonhyperbolic).to_string(),
            ])
        }
        _ => unreachable!("analysis kind checked before the sweep starts"),
    }
}

fn run_cell(
    spec: &SweepSpec,
    c: usize,
    seed: u64,
    steps_flag: Option<usize>,
    strict: bool,
) -> Vec<String> {
    let values = cell_values(&spec.grid, c);
    let mut cells: Vec<String> = values.iter().map(render_param).collect();
    match compute_cell(spec, &values, seed, steps_flag, strict) {
        Ok(diag) => {
            cells.extend(diag);
            cells.push(String::new());
        }
        Err(e) => {
            cells.extend(vec![
                String::new();
                diagnostic_columns(&spec.analysis).len()
            ]);
            cells.push(jsonio::csv_escape(&e.message));
        }
    }
    cells
}

fn thread_count(cells: usize) -> Result<usize, CliError> {
    let cap = match std::env::var("QSO_LAB_THREADS") {
        Ok(v) => Some(v.parse::<usize>().ok().filter(|&n| n >= 1).ok_or_else(|| {
            CliError::parse(format!("QSO_LAB_THREADS must be a positive integer, got {v:?}"))
        })?),
        Err(_) => None,
    };
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    Ok(cap.unwrap_or(hw).min(cells.max(1)))
}

pub fn run(
    spec_path: &Path,
    out: &Path,
    master_seed: u64,
    steps_flag: Option<usize>,
    strict: bool,
) -> Result<(), CliError> {
    let started = Instant::now();
    let value = operator::read_json(spec_path)?;
    let spec: SweepSpec = serde_json::from_value(value)
        .map_err(|e| CliError::parse(format!("{}: {e}", spec_path.display())))?;
    let total = validate(&spec)?;
    let threads = thread_count(total)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::parse(format!("cannot create {}: {e}", out.display())))?;

    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<Vec<String>>>> = Mutex::new(vec![None; total]);
    std::thread::scope(|s| {
        for _ in 0..threads {
            s.spawn(|| loop {
                let c = next.fetch_add(1, Ordering::Relaxed);
                if c >= total {
                    break;
                }
                let row = run_cell(
                    &spec,
                    c,
                    experiment::chain_seed(master_seed, c as u64),
                    steps_flag,
                    strict,
                );
                rows.lock().expect("no panics hold this lock")[c] = Some(row);
            });
        }
    });

    let mut header: Vec<String> = spec
        .grid
        .iter()
        .map(|a| jsonio::csv_escape(&a.param))
        .collect();
    header.extend(
        diagnostic_columns(&spec.analysis)
            .iter()
            .map(|s| s.to_string()),
    );
    header.push("error".to_string());
    let mut text = header.join(",");
    text.push('\n');
    let rows = rows.into_inner().expect("workers are done");
    for row in rows {
        let row = row.expect("every cell index was claimed by a worker");
        text.push_str(&row.join(","));
        text.push('\n');
    }
    jsonio::atomic_write(&out.join("sweep.csv"), text.as_bytes())
        .map_err(|e| CliError::runtime(format!("cannot write sweep.csv: {e}")))?;

    let manifest = json!({
        "command": "sweep",
        "spec": spec_path.display().to_string(),
        "seed": master_seed,
        "strict_simplex": strict,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": started.elapsed().as_millis() as u64,
        "cells": total,
        "threads": threads,
        "files": ["sweep.csv"],
    });
    jsonio::atomic_write(&out.join("manifest.json"), &jsonio::canonical(&manifest))
        .map_err(|e| CliError::runtime(format!("cannot write manifest.json: {e}")))?;
    println!("swept {total} cells into {}", out.display());
    Ok(())
}
