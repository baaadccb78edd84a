//! Operators generated from a graph, an allele set, and a strictly
//! positive measure on the cell space, plus the two structural checks
//! that come with the construction: connectivity decides the
//! inheritance zero pattern, and product measures split the dynamics
//! across graph components.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::sample;
use crate::simplex::{Normalization, SimplexPoint};
use crate::tensor::{HeredityTensor, Violation};

/// Largest cell space that may be enumerated at all.
pub const CELL_ENUMERATION_LIMIT: usize = 4096;
/// Default cap on cells when building the dense tensor, which costs
/// `|cells|^3` storage. Raise it explicitly if that cost is acceptable.
pub const TENSOR_CELL_LIMIT: usize = 128;
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub enum GibbsError {
    EmptyGraph,
    VertexOutOfRange { vertex: usize, n_vertices: usize },
    LoopEdge { vertex: usize },
    DuplicateEdge { u: usize, v: usize },
    TooFewAlleles { got: usize },
    CellLimitExceeded { limit: usize },
    TensorLimitExceeded { cells: usize, limit: usize },
    WeightCount { expected: usize, got: usize },
    NonPositiveWeight { cell: usize, value: f64 },
    WeightSum { sum: f64 },
    FactorCount { expected: usize, got: usize },
    FactorMismatch { index: usize },
    TensorInvalid(Vec<Violation>),
}

impl fmt::Display for GibbsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GibbsError::EmptyGraph => write!(f, "graph needs at least one vertex"),
            GibbsError::VertexOutOfRange { vertex, n_vertices } => {
                write!(f, "vertex {vertex} out of range for {n_vertices} vertices")
            }
            GibbsError::LoopEdge { vertex } => {
                write!(f, "loop edge at vertex {vertex} not allowed")
            }
            GibbsError::DuplicateEdge { u, v } => {
                write!(f, "edge ({u},{v}) given more than once")
            }
            GibbsError::TooFewAlleles { got } => {
                write!(f, "allele set needs at least 2 labels, got {got}")
            }
            GibbsError::CellLimitExceeded { limit } => {
                write!(f, "cell space exceeds the enumeration limit {limit}")
            }
            GibbsError::TensorLimitExceeded { cells, limit } => {
                write!(f, "{cells} cells exceed the tensor construction limit {limit}")
            }
            GibbsError::WeightCount { expected, got } => {
                write!(f, "expected {expected} cell weights, got {got}")
            }
            GibbsError::NonPositiveWeight { cell, value } => {
                write!(f, "weight {value} of cell {cell} is not a positive finite number")
            }
            GibbsError::WeightSum { sum } => {
                write!(f, "cell weights sum to {sum}, expected 1")
            }
            GibbsError::FactorCount { expected, got } => {
                write!(f, "expected {expected} factor measures, got {got}")
            }
            GibbsError::FactorMismatch { index } => {
                write!(f, "factor {index} is not a measure on that graph component")
            }
            GibbsError::TensorInvalid(violations) => {
                write!(f, "constructed tensor is invalid: {} violations", violations.len())
            }
        }
    }
}

impl core::error::Error for GibbsError {}

/// Finite simple graph: no loops, no multi-edges.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GraphSpec {
    n_vertices: usize,
    edges: Vec<(usize, usize)>,
}

impl GraphSpec {
    pub fn new(n_vertices: usize, edges: &[(usize, usize)]) -> Result<Self, GibbsError> {
        if n_vertices == 0 {
            return Err(GibbsError::EmptyGraph);
        }
        let mut norm = Vec::with_capacity(edges.len());
        for &(a, b) in edges {
            for v in [a, b] {
                if v >= n_vertices {
                    return Err(GibbsError::VertexOutOfRange { vertex: v, n_vertices });
                }
            }
            if a == b {
                return Err(GibbsError::LoopEdge { vertex: a });
            }
            norm.push((a.min(b), a.max(b)));
        }
        norm.sort_unstable();
        for w in norm.windows(2) {
            if w[0] == w[1] {
                return Err(GibbsError::DuplicateEdge { u: w[0].0, v: w[0].1 });
            }
        }
        Ok(Self { n_vertices, edges: norm })
    }

    pub fn n_vertices(&self) -> usize {
        self.n_vertices
    }

    /// Edges normalized to (low, high) and sorted.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Connected components, each sorted, ordered by least vertex.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices];
        for &(u, v) in &self.edges {
            adj[u].push(v);
            adj[v].push(u);
        }
        let mut seen = vec![false; self.n_vertices];
        let mut comps = Vec::new();
        for start in 0..self.n_vertices {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(u) = stack.pop() {
                comp.push(u);
                for &w in &adj[u] {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            comps.push(comp);
        }
        comps
    }
}

/// All assignments of one allele per vertex, numbered with vertex 0 as
/// the most significant digit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellSpace {
    graph: GraphSpec,
    n_alleles: usize,
    n_cells: usize,
}

impl CellSpace {
    pub fn new(graph: GraphSpec, n_alleles: usize) -> Result<Self, GibbsError> {
        if n_alleles < 2 {
            return Err(GibbsError::TooFewAlleles { got: n_alleles });
        }
        let mut n_cells = 1usize;
        for _ in 0..graph.n_vertices {
            n_cells = match n_cells.checked_mul(n_alleles) {
                Some(c) if c <= CELL_ENUMERATION_LIMIT => c,
                _ => {
                    return Err(GibbsError::CellLimitExceeded {
                        limit: CELL_ENUMERATION_LIMIT,
                    })
                }
            };
        }
        Ok(Self { graph, n_alleles, n_cells })
    }

    pub fn graph(&self) -> &GraphSpec {
        &self.graph
    }

    pub fn n_alleles(&self) -> usize {
        self.n_alleles
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    pub fn alleles_of(&self, cell: usize) -> Vec<usize> {
        assert!(cell < self.n_cells, "cell index out of range");
        let n = self.graph.n_vertices;
        let mut out = vec![0; n];
        let mut rest = cell;
        for v in (0..n).rev() {
            out[v] = rest % self.n_alleles;
            rest /= self.n_alleles;
        }
        out
    }

    pub fn cell_of(&self, alleles: &[usize]) -> usize {
        assert_eq!(alleles.len(), self.graph.n_vertices, "one allele per vertex");
        let mut cell = 0;
        for &a in alleles {
            assert!(a < self.n_alleles, "allele label out of range");
            cell = cell * self.n_alleles + a;
        }
        cell
    }

    /// Cell spaces of the graph components, vertices relabeled in
    /// ascending order, same allele set.
    pub fn component_spaces(&self) -> Vec<CellSpace> {
        self.graph
            .components()
            .iter()
            .map(|comp| {
                let local = |v: usize| comp.binary_search(&v).expect("endpoint in component");
                let edges: Vec<(usize, usize)> = self
                    .graph
                    .edges
                    .iter()
                    .filter(|(u, _)| comp.binary_search(u).is_ok())
                    .map(|&(u, v)| (local(u), local(v)))
                    .collect();
                let graph = GraphSpec::new(comp.len(), &edges).expect("induced subgraph is simple");
                CellSpace::new(graph, self.n_alleles).expect("component space is no larger")
            })
            .collect()
    }

    /// For each cell, its index in the component space over `vertices`.
    fn restriction_table(&self, vertices: &[usize]) -> Vec<usize> {
        (0..self.n_cells)
            .map(|c| {
                let a = self.alleles_of(c);
                let mut local = 0;
                for &v in vertices {
                    local = local * self.n_alleles + a[v];
                }
                local
            })
            .collect()
    }
}

/// Strictly positive normalized weights over a cell space.
#[derive(Clone, Debug, PartialEq)]
pub struct CellMeasure {
    space: CellSpace,
    weights: Vec<f64>,
}

impl CellMeasure {
    pub fn new(space: CellSpace, weights: Vec<f64>) -> Result<Self, GibbsError> {
        if weights.len() != space.n_cells() {
            return Err(GibbsError::WeightCount {
                expected: space.n_cells(),
                got: weights.len(),
            });
        }
        let mut sum = 0.0;
        for (cell, &w) in weights.iter().enumerate() {
            if !w.is_finite() || w <= 0.0 {
                return Err(GibbsError::NonPositiveWeight { cell, value: w });
            }
            sum += w;
        }
        if libm::fabs(sum - 1.0) > WEIGHT_SUM_TOL {
            return Err(GibbsError::WeightSum { sum });
        }
        Ok(Self { space, weights })
    }

    pub fn space(&self) -> &CellSpace {
        &self.space
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Marginals onto the component spaces, in component order.
    pub fn component_marginals(&self) -> Vec<CellMeasure> {
        let comps = self.space.graph().components();
        self.space
            .component_spaces()
            .into_iter()
            .zip(&comps)
            .map(|(sub, comp)| {
                let table = self.space.restriction_table(comp);
                let mut w = vec![0.0; sub.n_cells()];
                for (c, &v) in self.weights.iter().enumerate() {
                    w[table[c]] += v;
                }
                CellMeasure::new(sub, w).expect("marginal of a measure is a measure")
            })
            .collect()
    }
}

/// All cells agreeing with one of the two parents on every component.
/// Symmetric in the parents, contains both, and has at most 2^q members
/// for q components. Ascending cell order.
pub fn omega_set(space: &CellSpace, sigma1: usize, sigma2: usize) -> Vec<usize> {
    assert!(sigma1 < space.n_cells(), "cell index out of range");
    assert!(sigma2 < space.n_cells(), "cell index out of range");
    let tables: Vec<Vec<usize>> = space
        .graph()
        .components()
        .iter()
        .map(|c| space.restriction_table(c))
        .collect();
    (0..space.n_cells())
        .filter(|&c| {
            tables
                .iter()
                .all(|t| t[c] == t[sigma1] || t[c] == t[sigma2])
        })
        .collect()
}

pub fn heredity_from_measure(mu: &CellMeasure) -> Result<HeredityTensor, GibbsError> {
    heredity_from_measure_with_limit(mu, TENSOR_CELL_LIMIT)
}

/// Each parent pair redistributes its mass over the cells that agree
/// with one parent on every component, proportionally to the measure.
pub fn heredity_from_measure_with_limit(
    mu: &CellMeasure,
    max_cells: usize,
) -> Result<HeredityTensor, GibbsError> {
    let space = mu.space();
    let m = space.n_cells();
    if m > max_cells {
        return Err(GibbsError::TensorLimitExceeded { cells: m, limit: max_cells });
    }
    let tables: Vec<Vec<usize>> = space
        .graph()
        .components()
        .iter()
        .map(|c| space.restriction_table(c))
        .collect();
    let mut entries = vec![0.0; m * m * m];
    let mut members = Vec::new();
    for s1 in 0..m {
        for s2 in s1..m {
            members.clear();
            members.extend((0..m).filter(|&c| {
                tables.iter().all(|t| t[c] == t[s1] || t[c] == t[s2])
            }));
            let total: f64 = members.iter().map(|&c| mu.weights()[c]).sum();
            for &c in &members {
                let p = mu.weights()[c] / total;
                entries[(s1 * m + s2) * m + c] = p;
                entries[(s2 * m + s1) * m + c] = p;
            }
        }
    }
    HeredityTensor::from_entries(m, entries).map_err(GibbsError::TensorInvalid)
}

/// Joint measure with the given component marginals, renormalized so
/// accumulated factor rounding cannot push the sum past tolerance.
pub fn product_measure(
    parent: &CellSpace,
    factors: &[CellMeasure],
) -> Result<CellMeasure, GibbsError> {
    let spaces = parent.component_spaces();
    if factors.len() != spaces.len() {
        return Err(GibbsError::FactorCount {
            expected: spaces.len(),
            got: factors.len(),
        });
    }
    for (index, (factor, sub)) in factors.iter().zip(&spaces).enumerate() {
        if factor.space() != sub {
            return Err(GibbsError::FactorMismatch { index });
        }
    }
    let comps = parent.graph().components();
    let tables: Vec<Vec<usize>> = comps.iter().map(|c| parent.restriction_table(c)).collect();
    let mut weights: Vec<f64> = (0..parent.n_cells())
        .map(|c| {
            factors
                .iter()
                .zip(&tables)
                .map(|(f, t)| f.weights()[t[c]])
                .product()
        })
        .collect();
    let total: f64 = weights.iter().sum();
    for w in &mut weights {
        *w /= total;
    }
    CellMeasure::new(parent.clone(), weights)
}

#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub reducible: bool,
    pub worst_deviation: f64,
    pub worst_step: usize,
    pub worst_trajectory: usize,
    pub n_components: usize,
}

/// Runs the full operator and the per-component operators side by side
/// from product initial distributions and compares the component
/// marginals of the full trajectory against the factor trajectories at
/// every step. A false report is informative, not an error.
pub fn verify_reduction(
    mu: &CellMeasure,
    n_trajectories: usize,
    n_steps: usize,
    seed: u64,
    tol: f64,
) -> Result<ReductionReport, GibbsError> {
    assert!(tol >= 0.0, "tolerance must be nonnegative");
    let space = mu.space();
    let comps = space.graph().components();
    let tables: Vec<Vec<usize>> = comps.iter().map(|c| space.restriction_table(c)).collect();
    let full = heredity_from_measure(mu)?;
    let factor_tensors: Vec<HeredityTensor> = mu
        .component_marginals()
        .iter()
        .map(heredity_from_measure)
        .collect::<Result<_, _>>()?;

    let mut rng = sample::rng(seed);
    let mut worst = 0.0;
    let mut worst_step = 0;
    let mut worst_trajectory = 0;
    for traj in 0..n_trajectories {
        let mut factors: Vec<SimplexPoint> = factor_tensors
            .iter()
            .map(|t| sample::random_simplex_point(&mut rng, t.m()))
            .collect();
        let joint: Vec<f64> = (0..space.n_cells())
            .map(|c| {
                factors
                    .iter()
                    .zip(&tables)
                    .map(|(f, t)| f.coords()[t[c]])
                    .product()
            })
            .collect();
        let mut x = SimplexPoint::new(joint, Normalization::Renormalize)
            .expect("product of distributions is a distribution");
        for step in 0..=n_steps {
            for (ci, y) in factors.iter().enumerate() {
                let mut marginal = vec![0.0; y.dim()];
                for (c, &v) in x.coords().iter().enumerate() {
                    marginal[tables[ci][c]] += v;
                }
                for (&a, &b) in marginal.iter().zip(y.coords()) {
                    let d = libm::fabs(a - b);
                    if d > worst {
                        worst = d;
                        worst_step = step;
                        worst_trajectory = traj;
                    }
                }
            }
            if step < n_steps {
                x = full.apply(&x).expect("image of a distribution is a distribution");
                factors = factors
                    .iter()
                    .zip(&factor_tensors)
                    .map(|(y, t)| t.apply(y).expect("image of a distribution is a distribution"))
                    .collect();
            }
        }
    }
    Ok(ReductionReport {
        reducible: worst <= tol,
        worst_deviation: worst,
        worst_step,
        worst_trajectory,
        n_components: comps.len(),
    })
}
