//! Operator sources: the four on-disk formats and the family registry.
//! Files index coordinates from 0; reports count species from 1. The
//! format of a file is picked from its top-level keys, so any operator
//! file can stand in wherever one is expected.

use std::collections::BTreeSet;
use std::path::Path;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use qso_core::dynamics::SimplexMap;
use qso_core::families::{self, FertilityRow};
use qso_core::gibbs::{self, CellMeasure, CellSpace, GraphSpec};
use qso_core::tensor::{HeredityTensor, Violation};
use qso_core::volterra::{zakharevich_family, SkewSymmetricMatrix};

use crate::error::CliError;

pub enum MapForm {
    Tensor(HeredityTensor),
    Skew(SkewSymmetricMatrix),
}

impl SimplexMap for MapForm {
    fn dim(&self) -> usize {
        match self {
            MapForm::Tensor(t) => t.m(),
            MapForm::Skew(a) => a.m(),
        }
    }

    fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        match self {
            MapForm::Tensor(t) => t.apply_raw(x, out),
            MapForm::Skew(a) => a.apply_raw(x, out),
        }
    }
}

pub struct LoadedOperator {
    pub form: MapForm,
    /// Cell measure behind a gibbs source, kept for reduction checks.
    pub gibbs: Option<CellMeasure>,
    /// What the operator was built from, echoed into manifests.
    pub origin: Value,
}

impl LoadedOperator {
    pub fn dim(&self) -> usize {
        self.form.dim()
    }

    pub fn tensor(&self) -> HeredityTensor {
        match &self.form {
            MapForm::Tensor(t) => t.clone(),
            MapForm::Skew(a) => a.to_tensor(),
        }
    }

    pub fn skew(&self) -> Option<&SkewSymmetricMatrix> {
        match &self.form {
            MapForm::Skew(a) => Some(a),
            MapForm::Tensor(_) => None,
        }
    }
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::parse(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::parse(format!("{}: {e}", path.display())))
}

pub fn load_operator_file(path: &Path) -> Result<LoadedOperator, CliError> {
    let value = read_json(path)?;
    operator_from_value(value, &path.display().to_string())
}

pub fn operator_from_value(value: Value, what: &str) -> Result<LoadedOperator, CliError> {
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::parse(format!("{what}: expected a JSON object")))?;
    if obj.contains_key("entries") {
        tensor_from_value(value)
    } else if obj.contains_key("upper") {
        skew_from_value(value)
    } else if obj.contains_key("n_vertices") {
        gibbs_from_value(value)
    } else if obj.contains_key("family") {
        family_from_value(value)
    } else {
        Err(CliError::parse(format!(
            "{what}: no operator format recognized \
             (expected one of the keys entries, upper, n_vertices, family)"
        )))
    }
}

fn from_value_parse<T: serde::de::DeserializeOwned>(
    value: Value,
    what: &str,
) -> Result<T, CliError> {
    serde_json::from_value(value).map_err(|e| CliError::parse(format!("{what}: {e}")))
}

fn violations_to_error(vs: Vec<Violation>) -> CliError {
    let n = vs.len();
    let mut msg = format!(
        "tensor fails validation ({n} problem{})",
        if n == 1 { "" } else { "s" }
    );
    for v in vs.iter().take(5) {
        msg.push_str(&format!("; {v}"));
    }
    CliError::validation(msg)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TensorFile {
    m: usize,
    /// entries[i][j][k], zero-indexed.
    entries: Vec<Vec<Vec<f64>>>,
}

fn tensor_from_value(value: Value) -> Result<LoadedOperator, CliError> {
    let file: TensorFile = from_value_parse(value, "tensor file")?;
    let m = file.m;
    if m == 0 {
        return Err(CliError::parse("tensor file: m must be positive"));
    }
    let mut entries = Vec::with_capacity(m * m * m);
    if file.entries.len() != m {
        return Err(CliError::parse(format!(
            "tensor file: expected {m} slices, found {}",
            file.entries.len()
        )));
    }
    for (i, slice) in file.entries.iter().enumerate() {
        if slice.len() != m {
            return Err(CliError::parse(format!(
                "tensor file: slice {i} has {} rows, expected {m}",
                slice.len()
            )));
        }
        for (j, row) in slice.iter().enumerate() {
            if row.len() != m {
                return Err(CliError::parse(format!(
                    "tensor file: row ({i},{j}) has {} entries, expected {m}",
                    row.len()
                )));
            }
            entries.extend_from_slice(row);
        }
    }
    let tensor = HeredityTensor::from_entries(m, entries).map_err(violations_to_error)?;
    Ok(LoadedOperator {
        form: MapForm::Tensor(tensor),
        gibbs: None,
        origin: json!({"source": "tensor", "m": m}),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SkewFile {
    m: usize,
    /// Strict upper triangle as [i, k, value] triples, zero-indexed.
    upper: Vec<(usize, usize, f64)>,
}

fn skew_from_value(value: Value) -> Result<LoadedOperator, CliError> {
    let file: SkewFile = from_value_parse(value, "interaction matrix file")?;
    if file.m == 0 {
        return Err(CliError::parse("interaction matrix file: m must be positive"));
    }
    let matrix = SkewSymmetricMatrix::from_upper_triangle(file.m, &file.upper)
        .map_err(|e| CliError::validation(format!("interaction matrix: {e}")))?;
    Ok(LoadedOperator {
        form: MapForm::Skew(matrix),
        gibbs: None,
        origin: json!({"source": "skew", "m": file.m}),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GibbsFile {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
    alleles: Vec<String>,
    /// Weight per cell, keyed by the allele labels in vertex order.
    measure: Map<String, Value>,
    max_cells: Option<usize>,
}

fn gibbs_from_value(value: Value) -> Result<LoadedOperator, CliError> {
    let file: GibbsFile = from_value_parse(value, "gibbs spec")?;
    for (i, a) in file.alleles.iter().enumerate() {
        if file.alleles[..i].contains(a) {
            return Err(CliError::parse(format!(
                "gibbs spec: allele label {a:?} repeats"
            )));
        }
    }
    let graph = GraphSpec::new(file.n_vertices, &file.edges)
        .map_err(|e| CliError::validation(format!("gibbs spec: {e}")))?;
    let space = CellSpace::new(graph, file.alleles.len())
        .map_err(|e| CliError::validation(format!("gibbs spec: {e}")))?;
    let n = space.n_cells();
    if file.measure.len() != n {
        return Err(CliError::parse(format!(
            "gibbs spec: measure lists {} cells, the space has {n}",
            file.measure.len()
        )));
    }
    // Keys are generated, not split, so multi-character labels work as
    // long as no two cells collide on the concatenation.
    let mut seen: BTreeSet<String> = BTreeSet::new();
    let mut weights = Vec::with_capacity(n);
    for cell in 0..n {
        let key: String = space
            .alleles_of(cell)
            .iter()
            .map(|&a| file.alleles[a].as_str())
            .collect();
        if !seen.insert(key.clone()) {
            return Err(CliError::parse(format!(
                "gibbs spec: allele labels make cell key {key:?} ambiguous"
            )));
        }
        let w = file
            .measure
            .get(&key)
            .ok_or_else(|| CliError::parse(format!("gibbs spec: measure missing cell {key:?}")))?
            .as_f64()
            .ok_or_else(|| {
                CliError::parse(format!("gibbs spec: weight for {key:?} is not a number"))
            })?;
        weights.push(w);
    }
    let n_vertices = file.n_vertices;
    let n_alleles = file.alleles.len();
    let measure = CellMeasure::new(space, weights)
        .map_err(|e| CliError::validation(format!("gibbs spec: {e}")))?;
    let tensor = gibbs::heredity_from_measure_with_limit(
        &measure,
        file.max_cells.unwrap_or(gibbs::TENSOR_CELL_LIMIT),
    )
    .map_err(|e| CliError::validation(format!("gibbs spec: {e}")))?;
    Ok(LoadedOperator {
        form: MapForm::Tensor(tensor),
        gibbs: Some(measure),
        origin: json!({
            "source": "gibbs",
            "n_vertices": n_vertices,
            "n_alleles": n_alleles,
            "n_cells": n,
        }),
    })
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyFile {
    family: String,
    #[serde(default)]
    params: Map<String, Value>,
}

fn family_from_value(value: Value) -> Result<LoadedOperator, CliError> {
    let file: FamilyFile = from_value_parse(value, "family spec")?;
    build_family(&file.family, &file.params)
}

fn param_f64(params: &Map<String, Value>, family: &str, name: &str) -> Result<f64, CliError> {
    params.get(name).and_then(Value::as_f64).ok_or_else(|| {
        CliError::parse(format!(
            "family {family}: parameter {name} missing or not a number"
        ))
    })
}

fn param_usize(params: &Map<String, Value>, family: &str, name: &str) -> Result<usize, CliError> {
    params
        .get(name)
        .and_then(Value::as_u64)
        .map(|v| v as usize)
        .ok_or_else(|| {
            CliError::parse(format!(
                "family {family}: parameter {name} missing or not a nonnegative integer"
            ))
        })
}

fn param_typed<T: serde::de::DeserializeOwned>(
    params: &Map<String, Value>,
    family: &str,
    name: &str,
) -> Result<T, CliError> {
    let raw = params
        .get(name)
        .ok_or_else(|| CliError::parse(format!("family {family}: parameter {name} missing")))?;
    serde_json::from_value(raw.clone())
        .map_err(|e| CliError::parse(format!("family {family}: parameter {name}: {e}")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FertilitySpec {
    female: usize,
    male: usize,
    distribution: Vec<f64>,
}

fn flatten_square(
    rows: Vec<Vec<f64>>,
    m: usize,
    family: &str,
    name: &str,
) -> Result<Vec<f64>, CliError> {
    if rows.len() != m || rows.iter().any(|r| r.len() != m) {
        return Err(CliError::parse(format!(
            "family {family}: parameter {name} must be an {m} x {m} matrix"
        )));
    }
    Ok(rows.into_iter().flatten().collect())
}

pub fn build_family(name: &str, params: &Map<String, Value>) -> Result<LoadedOperator, CliError> {
    let reject_unknown = |allowed: &[&str]| -> Result<(), CliError> {
        for key in params.keys() {
            if !allowed.contains(&key.as_str()) {
                return Err(CliError::parse(format!(
                    "family {name}: unknown parameter {key}"
                )));
            }
        }
        Ok(())
    };
    let invalid = |e: &dyn std::fmt::Display| CliError::validation(format!("family {name}: {e}"));

    let mut origin = json!({
        "source": "family",
        "family": name,
        "params": Value::Object(params.clone()),
    });
    let form = match name {
        "v0" => {
            reject_unknown(&[])?;
            MapForm::Tensor(families::v0())
        }
        "v1" => {
            reject_unknown(&[])?;
            MapForm::Tensor(families::v1())
        }
        "v_lambda" => {
            reject_unknown(&["lambda"])?;
            let lambda = param_f64(params, name, "lambda")?;
            MapForm::Tensor(families::v_lambda(lambda).map_err(|e| invalid(&e))?)
        }
        "zakharevich" => {
            reject_unknown(&["a", "b", "c"])?;
            let a = param_f64(params, name, "a")?;
            let b = param_f64(params, name, "b")?;
            let c = param_f64(params, name, "c")?;
            let op = zakharevich_family(a, b, c).map_err(|e| invalid(&e))?;
            origin["ergodic_failure_predicted"] = json!(op.ergodic_failure_predicted);
            MapForm::Skew(op.matrix)
        }
        "strictly_non_volterra" => {
            reject_unknown(&["a", "b", "c", "d", "alpha", "beta"])?;
            let get = |n| param_f64(params, name, n);
            let t = families::strictly_non_volterra(
                get("a")?,
                get("b")?,
                get("c")?,
                get("d")?,
                get("alpha")?,
                get("beta")?,
            )
            .map_err(|e| invalid(&e))?;
            MapForm::Tensor(t)
        }
        "f_qso" => {
            reject_unknown(&["m", "females", "fertility"])?;
            let m = param_usize(params, name, "m")?;
            let females: Vec<usize> = param_typed(params, name, "females")?;
            let fertility: Vec<FertilitySpec> = param_typed(params, name, "fertility")?;
            if m == 0 {
                return Err(CliError::parse(format!(
                    "family {name}: m must be positive"
                )));
            }
            let rows: Vec<FertilityRow> = fertility
                .into_iter()
                .map(|f| FertilityRow {
                    female: f.female,
                    male: f.male,
                    distribution: f.distribution,
                })
                .collect();
            MapForm::Tensor(families::f_qso(m, &females, &rows).map_err(|e| invalid(&e))?)
        }
        "separable" => {
            reject_unknown(&["m", "a", "b"])?;
            let m = param_usize(params, name, "m")?;
            if m == 0 {
                return Err(CliError::parse(format!(
                    "family {name}: m must be positive"
                )));
            }
            let a = flatten_square(param_typed(params, name, "a")?, m, name, "a")?;
            let b = flatten_square(param_typed(params, name, "b")?, m, name, "b")?;
            MapForm::Tensor(families::separable(m, &a, &b).map_err(|e| invalid(&e))?)
        }
        other => {
            return Err(CliError::parse(format!(
                "unknown family {other:?} (expected v0, v1, v_lambda, zakharevich, \
                 strictly_non_volterra, f_qso, or separable)"
            )))
        }
    };
    Ok(LoadedOperator {
        form,
        gibbs: None,
        origin,
    })
}

pub fn tensor_to_json(t: &HeredityTensor) -> Value {
    let m = t.m();
    let entries: Vec<Vec<Vec<f64>>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| (0..m).map(|k| t.get(i, j, k)).collect())
                .collect()
        })
        .collect();
    json!({"m": m, "entries": entries})
}

pub fn skew_to_json(a: &SkewSymmetricMatrix) -> Value {
    let m = a.m();
    let mut upper = Vec::new();
    for i in 0..m {
        for k in i + 1..m {
            upper.push(json!([i, k, a.get(i, k)]));
        }
    }
    json!({"m": m, "upper": upper})
}
