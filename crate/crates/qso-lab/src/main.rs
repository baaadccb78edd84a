//! Command-line driver for quadratic stochastic operator experiments.
//! Subcommands read JSON specs and write deterministic reports; see the
//! repository README for the file formats and the exit code contract.

mod error;
mod experiment;
mod jsonio;
mod operator;
mod sweep;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use qso_core::tensor::ZERO_TOL;

use error::CliError;
use operator::MapForm;

#[derive(Parser)]
#[command(name = "qso-lab", version, about = "quadratic stochastic operator lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Report the structural class of an operator file.
    Classify(Common),
    /// Run the analyses listed in an experiment spec.
    Run(Common),
    /// Evaluate one diagnostic over a parameter grid.
    Sweep(Common),
    /// Build a heredity tensor from a graph, alleles, and cell measure.
    #[command(name = "construct-gibbs")]
    ConstructGibbs(Common),
    /// Materialize a named operator family as an operator file.
    Family(Common),
}

#[derive(Args)]
struct Common {
    /// Input spec file (JSON).
    #[arg(long)]
    spec: PathBuf,
    /// Output directory; files land there via temp-then-rename.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; per-analysis and per-cell seeds derive from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Default step count for analyses that do not set one.
    #[arg(long)]
    steps: Option<usize>,
    /// Reject starting points that are not exactly on the simplex.
    #[arg(long, default_value_t = false)]
    strict_simplex: bool,
}

fn require_out(c: &Common) -> Result<PathBuf, CliError> {
    c.out
        .clone()
        .ok_or_else(|| CliError::parse("this command needs --out"))
}

fn make_out_dir(out: &PathBuf) -> Result<(), CliError> {
    std::fs::create_dir_all(out)
        .map_err(|e| CliError::parse(format!("cannot create {}: {e}", out.display())))
}

fn cmd_classify(c: &Common) -> Result<(), CliError> {
    let op = operator::load_operator_file(&c.spec)?;
    let report = experiment::classification_json(&op, None, ZERO_TOL);
    let bytes = jsonio::canonical(&report);
    if let Some(out) = &c.out {
        make_out_dir(out)?;
        jsonio::atomic_write(&out.join("classification.json"), &bytes)
            .map_err(|e| CliError::runtime(format!("cannot write classification.json: {e}")))?;
    }
    print!("{}", String::from_utf8_lossy(&bytes));
    Ok(())
}

fn cmd_construct_gibbs(c: &Common) -> Result<(), CliError> {
    let out = require_out(c)?;
    let value = operator::read_json(&c.spec)?;
    if value.get("n_vertices").is_none() {
        return Err(CliError::parse(format!(
            "{}: construct-gibbs needs a gibbs spec with an n_vertices key",
            c.spec.display()
        )));
    }
    let op = operator::operator_from_value(value, &c.spec.display().to_string())?;
    let mu = op.gibbs.as_ref().expect("gibbs source carries its measure");
    let components = mu.space().graph().components();
    let class = op.tensor().classify(None, ZERO_TOL);
    make_out_dir(&out)?;
    let tensor_json = operator::tensor_to_json(&op.tensor());
    let summary = json!({
        "n_cells": mu.space().n_cells(),
        "n_components": components.len(),
        "components": components,
        "is_volterra": class.is_volterra,
        "tensor": "tensor.json",
    });
    jsonio::atomic_write(&out.join("tensor.json"), &jsonio::canonical(&tensor_json))
        .map_err(|e| CliError::runtime(format!("cannot write tensor.json: {e}")))?;
    jsonio::atomic_write(&out.join("summary.json"), &jsonio::canonical(&summary))
        .map_err(|e| CliError::runtime(format!("cannot write summary.json: {e}")))?;
    println!("wrote tensor.json and summary.json to {}", out.display());
    Ok(())
}

fn cmd_family(c: &Common) -> Result<(), CliError> {
    let out = require_out(c)?;
    let value = operator::read_json(&c.spec)?;
    if value.get("family").is_none() {
        return Err(CliError::parse(format!(
            "{}: family needs a spec with a family key",
            c.spec.display()
        )));
    }
    let op = operator::operator_from_value(value, &c.spec.display().to_string())?;
    let (kind, operator_json) = match &op.form {
        MapForm::Tensor(t) => ("tensor", operator::tensor_to_json(t)),
        MapForm::Skew(a) => ("skew", operator::skew_to_json(a)),
    };
    make_out_dir(&out)?;
    let summary = json!({
        "origin": op.origin,
        "m": op.dim(),
        "kind": kind,
        "operator": "operator.json",
    });
    jsonio::atomic_write(&out.join("operator.json"), &jsonio::canonical(&operator_json))
        .map_err(|e| CliError::runtime(format!("cannot write operator.json: {e}")))?;
    jsonio::atomic_write(&out.join("summary.json"), &jsonio::canonical(&summary))
        .map_err(|e| CliError::runtime(format!("cannot write summary.json: {e}")))?;
    println!("wrote operator.json and summary.json to {}", out.display());
    Ok(())
}

fn dispatch(command: &Command) -> Result<(), CliError> {
    match command {
        Command::Classify(c) => cmd_classify(c),
        Command::Run(c) => {
            let out = require_out(c)?;
            experiment::run(&c.spec, &out, c.seed, c.steps, c.strict_simplex)
        }
        Command::Sweep(c) => {
            let out = require_out(c)?;
            sweep::run(&c.spec, &out, c.seed, c.steps, c.strict_simplex)
        }
        Command::ConstructGibbs(c) => cmd_construct_gibbs(c),
        Command::Family(c) => cmd_family(c),
    }
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = dispatch(&cli.command) {
        let bytes = jsonio::canonical(&e.to_json());
        eprint!("{}", String::from_utf8_lossy(&bytes));
        std::process::exit(e.code);
    }
}
