//! Experiment specs: one operator source plus a list of analyses, each
//! emitting a JSON report (and a trajectory CSV for simulate). Reports
//! are deterministic for a given spec and seed; the manifest carries the
//! wall time and is the one file that is not.

use std::path::Path;
use std::time::Instant;

use serde::Deserialize;
use serde_json::{json, Value};

use qso_core::dynamics::{
    self, CesaroVerdict, FixedPointConfig, IterateConfig, Schedule, Stability,
};
use qso_core::gibbs;
use qso_core::sample;
use qso_core::simplex::{Normalization, SimplexPoint};
use qso_core::tensor::ZERO_TOL;
use qso_core::volterra::{partial_sum_applicable, LyapunovSpec};

use crate::error::CliError;
use crate::jsonio;
use crate::operator::{self, LoadedOperator};

/// Cluster tolerance for the omega-limit summary attached to orbits.
const OMEGA_CLUSTER_TOL: f64 = 1e-3;

/// Step count when neither the analysis nor --steps names one.
const DEFAULT_STEPS: usize = 10_000;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub operator: OperatorSpec,
    pub analyses: Vec<AnalysisSpec>,
}

/// Exactly one source must be set. File paths resolve relative to the
/// spec file that names them.
#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSpec {
    pub tensor_file: Option<String>,
    pub skew_file: Option<String>,
    pub family: Option<Value>,
    pub gibbs: Option<Value>,
}

pub fn load_operator(spec: &OperatorSpec, base: &Path) -> Result<LoadedOperator, CliError> {
    let sources = [
        spec.tensor_file.is_some(),
        spec.skew_file.is_some(),
        spec.family.is_some(),
        spec.gibbs.is_some(),
    ]
    .iter()
    .filter(|&&s| s)
    .count();
    if sources != 1 {
        return Err(CliError::parse(format!(
            "operator needs exactly one of tensor_file, skew_file, family, gibbs; found {sources}"
        )));
    }
    if let Some(p) = spec.tensor_file.as_deref().or(spec.skew_file.as_deref()) {
        return operator::load_operator_file(&base.join(p));
    }
    if let Some(f) = &spec.family {
        return operator::operator_from_value(f.clone(), "operator.family");
    }
    operator::operator_from_value(spec.gibbs.clone().unwrap(), "operator.gibbs")
}

#[derive(Clone, Deserialize)]
#[serde(untagged)]
pub enum ScheduleSpec {
    Name(String),
    Stride { stride: usize },
}

impl ScheduleSpec {
    fn to_schedule(&self) -> Result<Schedule, CliError> {
        match self {
            ScheduleSpec::Name(s) if s == "geometric" => Ok(Schedule::Geometric),
            ScheduleSpec::Name(s) => Err(CliError::parse(format!("unknown schedule {s:?}"))),
            ScheduleSpec::Stride { stride } if *stride >= 1 => Ok(Schedule::Stride(*stride)),
            ScheduleSpec::Stride { stride } => Err(CliError::parse(format!(
                "stride {stride} must be at least 1"
            ))),
        }
    }
}

/// Exactly one of the three fields picks the monotone quantity.
#[derive(Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovFnSpec {
    pub product: Option<Vec<f64>>,
    pub partial_sum: Option<usize>,
    pub ratio: Option<(usize, usize)>,
}

impl LyapunovFnSpec {
    fn build(&self, dim: usize) -> Result<LyapunovSpec, CliError> {
        let given = [
            self.product.is_some(),
            self.partial_sum.is_some(),
            self.ratio.is_some(),
        ]
        .iter()
        .filter(|&&s| s)
        .count();
        if given != 1 {
            return Err(CliError::parse(
                "lyapunov function needs exactly one of product, partial_sum, ratio",
            ));
        }
        let invalid = |e: &dyn std::fmt::Display| CliError::validation(format!("lyapunov: {e}"));
        if let Some(p) = &self.product {
            if p.len() != dim {
                return Err(CliError::validation(format!(
                    "lyapunov product has {} weights, the operator needs {dim}",
                    p.len()
                )));
            }
            return LyapunovSpec::product(p.clone()).map_err(|e| invalid(&e));
        }
        if let Some(r) = self.partial_sum {
            return LyapunovSpec::partial_sum(r, dim).map_err(|e| invalid(&e));
        }
        let (i, j) = self.ratio.unwrap();
        if i >= dim || j >= dim {
            return Err(CliError::validation(format!(
                "lyapunov ratio indices ({i},{j}) outside 0..{dim}"
            )));
        }
        LyapunovSpec::ratio(i, j).map_err(|e| invalid(&e))
    }

    fn echo(&self) -> Value {
        if let Some(p) = &self.product {
            json!({"product": p})
        } else if let Some(r) = self.partial_sum {
            json!({"partial_sum": r})
        } else {
            json!({"ratio": self.ratio})
        }
    }
}

#[derive(Clone, Deserialize)]
#[serde(tag = "analysis", rename_all = "kebab-case", deny_unknown_fields)]
pub enum AnalysisSpec {
    Classify {
        zero_tol: Option<f64>,
        /// Female coordinates for the two-sex pattern check, species
        /// numbered 1..=m with 0 the empty body.
        females: Option<Vec<usize>>,
    },
    FixedPoints {
        n_starts: Option<usize>,
        max_iterations: Option<usize>,
        seed: Option<u64>,
    },
    Cycles {
        max_period: Option<usize>,
        n_starts: Option<usize>,
        seed: Option<u64>,
    },
    Simulate {
        x0: Option<Vec<f64>>,
        n: Option<usize>,
        schedule: Option<ScheduleSpec>,
        tail_window: Option<usize>,
        seed: Option<u64>,
    },
    Cesaro {
        x0: Option<Vec<f64>>,
        n: Option<usize>,
        seed: Option<u64>,
    },
    Historic {
        x0: Option<Vec<f64>>,
        n: Option<usize>,
        /// Coordinate whose running mean is tracked, zero-indexed.
        coord: Option<usize>,
        seed: Option<u64>,
    },
    Itinerary {
        x0: Option<Vec<f64>>,
        n: Option<usize>,
        radius: Option<f64>,
        n_starts: Option<usize>,
        seed: Option<u64>,
    },
    Lyapunov {
        function: LyapunovFnSpec,
        x0: Option<Vec<f64>>,
        n: Option<usize>,
        seed: Option<u64>,
    },
    Reduction {
        n_trajectories: Option<usize>,
        n_steps: Option<usize>,
        tol: Option<f64>,
        seed: Option<u64>,
    },
}

impl AnalysisSpec {
    pub fn name(&self) -> &'static str {
        match self {
            AnalysisSpec::Classify { .. } => "classify",
            AnalysisSpec::FixedPoints { .. } => "fixed-points",
            AnalysisSpec::Cycles { .. } => "cycles",
            AnalysisSpec::Simulate { .. } => "simulate",
            AnalysisSpec::Cesaro { .. } => "cesaro",
            AnalysisSpec::Historic { .. } => "historic",
            AnalysisSpec::Itinerary { .. } => "itinerary",
            AnalysisSpec::Lyapunov { .. } => "lyapunov",
            AnalysisSpec::Reduction { .. } => "reduction",
        }
    }

    pub fn seed_override(&self) -> Option<u64> {
        match self {
            AnalysisSpec::Classify { .. } => None,
            AnalysisSpec::FixedPoints { seed, .. }
            | AnalysisSpec::Cycles { seed, .. }
            | AnalysisSpec::Simulate { seed, .. }
            | AnalysisSpec::Cesaro { seed, .. }
            | AnalysisSpec::Historic { seed, .. }
            | AnalysisSpec::Itinerary { seed, .. }
            | AnalysisSpec::Lyapunov { seed, .. }
            | AnalysisSpec::Reduction { seed, .. } => *seed,
        }
    }
}

/// Derived seed for analysis or sweep-cell `index`, stable under the
/// order in which the work actually runs.
pub fn chain_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

pub fn verdict_str(v: CesaroVerdict) -> &'static str {
    match v {
        CesaroVerdict::Converging => "converging",
        CesaroVerdict::Oscillating => "oscillating",
        CesaroVerdict::Inconclusive => "inconclusive",
    }
}

fn stability_str(s: Stability) -> &'static str {
    match s {
        Stability::Attracting => "attracting",
        Stability::Repelling => "repelling",
        Stability::Saddle => "saddle",
        Stability::Nonhyperbolic => "nonhyperbolic",
    }
}

/// Starting point: explicit coordinates checked against the simplex, or
/// a fresh draw from the analysis seed.
pub fn resolve_x0(
    x0: &Option<Vec<f64>>,
    dim: usize,
    strict: bool,
    seed: u64,
) -> Result<SimplexPoint, CliError> {
    match x0 {
        Some(coords) => {
            if coords.len() != dim {
                return Err(CliError::validation(format!(
                    "x0 has {} coordinates, the operator needs {dim}",
                    coords.len()
                )));
            }
            let policy = if strict {
                Normalization::Strict
            } else {
                Normalization::Renormalize
            };
            SimplexPoint::new(coords.clone(), policy)
                .map_err(|e| CliError::validation(format!("x0: {e}")))
        }
        None => {
            let mut rng = sample::rng(seed);
            Ok(sample::random_simplex_point(&mut rng, dim))
        }
    }
}

pub fn classification_json(
    op: &LoadedOperator,
    females: Option<&[usize]>,
    zero_tol: f64,
) -> serde_json::Value {
    let tensor = op.tensor();
    let r = tensor.classify(females, zero_tol);
    let chunk_rows = |flat: &[f64], m: usize| -> Vec<Vec<f64>> {
        flat.chunks(m).map(|c| c.to_vec()).collect()
    };
    json!({
        "m": tensor.m(),
        "is_volterra": r.is_volterra,
        "ell": r.ell,
        "is_strictly_non_volterra": r.is_strictly_non_volterra,
        "f_qso": r.f_qso.map(|w| json!({"females": w.females, "species": w.species})),
        "bistochastic": {
            "necessary_ok": r.bistochastic_necessary_ok,
            "sufficient_ok": r.bistochastic_sufficient_ok,
            "sufficient_checked": r.bistochastic_sufficient_checked,
        },
        "regularity_margin": r.regularity_margin,
        "separable": r.separable_witness.map(|w| json!({
            "m": w.m,
            "a": chunk_rows(&w.a, w.m),
            "b": chunk_rows(&w.b, w.m),
        })),
        "extreme_candidate": r.extreme_candidate,
        "zero_tol": zero_tol,
    })
}

fn orbit(
    op: &LoadedOperator,
    x0: &SimplexPoint,
    n: usize,
    cfg: &IterateConfig,
) -> Result<dynamics::Trajectory, CliError> {
    dynamics::iterate(&op.form, x0, n, cfg).map_err(|e| CliError::runtime(format!("orbit: {e}")))
}

fn steps_for(n: &Option<usize>, steps_flag: Option<usize>) -> Result<usize, CliError> {
    let n = n.or(steps_flag).unwrap_or(DEFAULT_STEPS);
    if n == 0 {
        return Err(CliError::parse("step count must be at least 1"));
    }
    Ok(n)
}

fn omega_json(traj: &dynamics::Trajectory) -> Value {
    let est = dynamics::omega_limit_estimate(traj, OMEGA_CLUSTER_TOL);
    json!({
        "clusters": est.clusters.iter().map(|p| p.coords().to_vec()).collect::<Vec<_>>(),
        "cluster_sizes": est.cluster_sizes,
        "boundary_proximity": est.boundary_proximity,
        "converged": est.converged,
        "cluster_tol": OMEGA_CLUSTER_TOL,
    })
}

type Outputs = Vec<(String, Vec<u8>)>;

fn run_analysis(
    op: &LoadedOperator,
    analysis: &AnalysisSpec,
    seed: u64,
    steps_flag: Option<usize>,
    strict: bool,
    idx: usize,
) -> Result<Outputs, CliError> {
    let dim = op.dim();
    let mut outputs = Outputs::new();
    let report = match analysis {
        AnalysisSpec::Classify { zero_tol, females } => {
            let tol = zero_tol.unwrap_or(ZERO_TOL);
            if !(tol >= 0.0) {
                return Err(CliError::parse(format!("zero_tol {tol} must be nonnegative")));
            }
            classification_json(op, females.as_deref(), tol)
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
            json!({
                "points": rep.points.iter().map(|fp| json!({
                    "point": fp.point.coords(),
                    "residual": fp.residual,
                    "stability": stability_str(fp.stability),
                    "tangent_spectrum": fp.tangent_spectrum,
                })).collect::<Vec<_>>(),
                "converged_starts": rep.converged_starts,
                "total_starts": rep.total_starts,
            })
        }
        AnalysisSpec::Cycles {
            max_period,
            n_starts,
            ..
        } => {
            let period = max_period.unwrap_or(4);
            if !(2..=12).contains(&period) {
                return Err(CliError::parse(format!(
                    "max_period {period} outside the supported range 2..=12"
                )));
            }
            let cfg = FixedPointConfig {
                n_starts: n_starts.unwrap_or(32),
                seed,
                ..Default::default()
            };
            let cycles = dynamics::detect_cycles(&op.form, period, &cfg);
            json!({
                "max_period": period,
                "cycles": cycles.iter().map(|c| json!({
                    "period": c.period,
                    "points": c.points.iter().map(|p| p.coords().to_vec()).collect::<Vec<_>>(),
                })).collect::<Vec<_>>(),
            })
        }
        AnalysisSpec::Simulate {
            x0,
            n,
            schedule,
            tail_window,
            ..
        } => {
            let n = steps_for(n, steps_flag)?;
            let x0 = resolve_x0(x0, dim, strict, seed)?;
            let cfg = IterateConfig {
                schedule: match schedule {
                    Some(s) => s.to_schedule()?,
                    None => Schedule::Geometric,
                },
                tail_window: tail_window.unwrap_or(dynamics::DEFAULT_TAIL_WINDOW),
            };
            let traj = orbit(op, &x0, n, &cfg)?;
            let mut csv = String::from("step");
            for k in 1..=dim {
                csv.push_str(&format!(",x{k}"));
            }
            csv.push('\n');
            for (s, p) in traj.checkpoints() {
                csv.push_str(&s.to_string());
                for v in p.coords() {
                    csv.push(',');
                    csv.push_str(&jsonio::float_cell(*v));
                }
                csv.push('\n');
            }
            let csv_name = format!("{idx:02}-trajectory.csv");
            outputs.push((csv_name.clone(), csv.into_bytes()));
            json!({
                "n": n,
                "x0": x0.coords(),
                "final": traj.final_point().coords(),
                "checkpoint_count": traj.checkpoints().len(),
                "trajectory_csv": csv_name,
                "omega": omega_json(&traj),
            })
        }
        AnalysisSpec::Cesaro { x0, n, .. } => {
            let n = steps_for(n, steps_flag)?;
            let x0 = resolve_x0(x0, dim, strict, seed)?;
            let traj = orbit(op, &x0, n, &IterateConfig::default())?;
            let diag = dynamics::cesaro_diagnostic(&traj)
                .map_err(|e| CliError::runtime(format!("cesaro: {e}")))?;
            json!({
                "n": n,
                "x0": x0.coords(),
                "oscillation": diag.oscillation,
                "oscillation_sup": diag.oscillation_sup,
                "verdict": verdict_str(diag.verdict),
                "means": traj.cesaro_checkpoints().iter().map(|(s, p)| json!({
                    "step": s,
                    "mean": p.coords(),
                })).collect::<Vec<_>>(),
            })
        }
        AnalysisSpec::Historic { x0, n, coord, .. } => {
            let n = steps_for(n, steps_flag)?;
            let c = coord.unwrap_or(0);
            if c >= dim {
                return Err(CliError::validation(format!(
                    "coord {c} outside 0..{dim}"
                )));
            }
            let x0 = resolve_x0(x0, dim, strict, seed)?;
            let rep =
                dynamics::historic_behavior(&op.form, &x0, |x| x[c], n, &Schedule::Geometric)
                    .map_err(|e| CliError::runtime(format!("historic: {e}")))?;
            json!({
                "n": n,
                "x0": x0.coords(),
                "coord": c,
                "means": rep.means.iter().map(|(s, v)| json!({"step": s, "mean": v}))
                    .collect::<Vec<_>>(),
                "oscillation": rep.oscillation,
                "verdict": verdict_str(rep.verdict),
            })
        }
        AnalysisSpec::Itinerary {
            x0,
            n,
            radius,
            n_starts,
            ..
        } => {
            let n = steps_for(n, steps_flag)?;
            let radius = radius.unwrap_or(0.05);
            let cfg = FixedPointConfig {
                n_starts: n_starts.unwrap_or(32),
                seed,
                ..Default::default()
            };
            let fps = dynamics::find_fixed_points(&op.form, &cfg);
            let x0 = resolve_x0(x0, dim, strict, seed)?;
            let traj = orbit(op, &x0, n, &IterateConfig::default())?;
            let rep = dynamics::itinerary(&op.form, &traj, &fps, radius)
                .map_err(|e| CliError::runtime(format!("itinerary: {e}")))?;
            json!({
                "n": n,
                "x0": x0.coords(),
                "radius": rep.radius,
                "occupancy_fraction": rep.occupancy_fraction,
                // Labels point into fixed_points, numbered from 1.
                "labels": rep.labels.iter().map(|l| l + 1).collect::<Vec<_>>(),
                "fixed_points": fps.points.iter().map(|fp| fp.point.coords().to_vec())
                    .collect::<Vec<_>>(),
            })
        }
        AnalysisSpec::Lyapunov { function, x0, n, .. } => {
            let n = steps_for(n, steps_flag)?;
            let func = function.build(dim)?;
            let x0 = resolve_x0(x0, dim, strict, seed)?;
            let traj = orbit(op, &x0, n, &IterateConfig::default())?;
            let applicable = match (&func, op.skew()) {
                (LyapunovSpec::PartialSum { r }, Some(a)) => {
                    Some(partial_sum_applicable(a, *r))
                }
                _ => None,
            };
            // The quantity is undefined on the boundary; such steps
            // report null instead of failing the run.
            let values: Vec<Value> = traj
                .checkpoints()
                .iter()
                .map(|(s, p)| match func.value(p) {
                    Ok(v) => json!({"step": s, "value": v}),
                    Err(_) => json!({"step": s, "value": Value::Null}),
                })
                .collect();
            json!({
                "n": n,
                "x0": x0.coords(),
                "function": function.echo(),
                "applicable": applicable,
                "values": values,
            })
        }
        AnalysisSpec::Reduction {
            n_trajectories,
            n_steps,
            tol,
            ..
        } => {
            let Some(mu) = &op.gibbs else {
                return Err(CliError::runtime(
                    "reduction needs a gibbs operator source",
                ));
            };
            let n_trajectories = n_trajectories.unwrap_or(10);
            let n_steps = n_steps.unwrap_or(100);
            let tol = tol.unwrap_or(1e-10);
            if !(tol >= 0.0) {
                return Err(CliError::parse(format!("tol {tol} must be nonnegative")));
            }
            let rep = gibbs::verify_reduction(mu, n_trajectories, n_steps, seed, tol)
                .map_err(|e| CliError::runtime(format!("reduction: {e}")))?;
            json!({
                "reducible": rep.reducible,
                "worst_deviation": rep.worst_deviation,
                "worst_step": rep.worst_step,
                "worst_trajectory": rep.worst_trajectory,
                "n_components": rep.n_components,
                "n_trajectories": n_trajectories,
                "n_steps": n_steps,
                "tol": tol,
            })
        }
    };
    outputs.push((
        format!("{idx:02}-{}.json", analysis.name()),
        jsonio::canonical(&report),
    ));
    Ok(outputs)
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
    let spec: ExperimentSpec = serde_json::from_value(value)
        .map_err(|e| CliError::parse(format!("{}: {e}", spec_path.display())))?;
    if spec.analyses.is_empty() {
        return Err(CliError::parse("experiment lists no analyses"));
    }
    let base = spec_path.parent().unwrap_or_else(|| Path::new("."));
    let op = load_operator(&spec.operator, base)?;
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::parse(format!("cannot create {}: {e}", out.display())))?;

    let mut written = Vec::new();
    for (idx, analysis) in spec.analyses.iter().enumerate() {
        let seed = analysis
            .seed_override()
            .unwrap_or_else(|| chain_seed(master_seed, idx as u64));
        for (name, bytes) in run_analysis(&op, analysis, seed, steps_flag, strict, idx)? {
            jsonio::atomic_write(&out.join(&name), &bytes)
                .map_err(|e| CliError::runtime(format!("cannot write {name}: {e}")))?;
            written.push(name);
        }
    }

    let manifest = json!({
        "command": "run",
        "spec": spec_path.display().to_string(),
        "seed": master_seed,
        "strict_simplex": strict,
        "version": env!("CARGO_PKG_VERSION"),
        "wall_time_ms": started.elapsed().as_millis() as u64,
        "operator": op.origin,
        "files": written,
    });
    jsonio::atomic_write(&out.join("manifest.json"), &jsonio::canonical(&manifest))
        .map_err(|e| CliError::runtime(format!("cannot write manifest.json: {e}")))?;
    println!("wrote {} files to {}", written.len() + 1, out.display());
    Ok(())
}
