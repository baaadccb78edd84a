//! Canonical form of Volterra operators: the skew-symmetric interaction
//! matrix, conversions to and from the tensor form, transversality,
//! Lyapunov function evaluators, permuted variants, and the
//! three-parameter Zakharevich family.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::simplex::{Normalization, SimplexError, SimplexPoint};
use crate::tensor::{HeredityTensor, ZERO_TOL};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VolterraError {
    DimensionMismatch { expected: usize, got: usize },
    IndexOutOfRange { index: usize, m: usize },
    NotStrictlyUpper { i: usize, k: usize },
    DuplicateEntry { i: usize, k: usize },
    EntryOutOfRange { i: usize, k: usize, value: f64 },
    NotSkew { i: usize, k: usize },
    NonzeroDiagonal { i: usize, value: f64 },
    NotVolterra,
    ParameterOutOfRange { name: &'static str, value: f64 },
    NotBijective,
    BoundaryPoint { index: usize },
    InvalidWeights,
    SplitOutOfRange { r: usize, m: usize },
    RatioIndicesEqual { i: usize },
}

impl fmt::Display for VolterraError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            VolterraError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            VolterraError::IndexOutOfRange { index, m } => {
                write!(f, "index {index} out of range for dimension {m}")
            }
            VolterraError::NotStrictlyUpper { i, k } => {
                write!(f, "entry ({i},{k}) is not strictly upper triangular")
            }
            VolterraError::DuplicateEntry { i, k } => {
                write!(f, "entry ({i},{k}) given more than once")
            }
            VolterraError::EntryOutOfRange { i, k, value } => {
                write!(f, "entry ({i},{k}) = {value} outside [-1, 1]")
            }
            VolterraError::NotSkew { i, k } => {
                write!(f, "entries ({i},{k}) and ({k},{i}) are not exact negations")
            }
            VolterraError::NonzeroDiagonal { i, value } => {
                write!(f, "diagonal entry ({i},{i}) = {value} must be zero")
            }
            VolterraError::NotVolterra => {
                write!(f, "tensor lacks the inheritance zero pattern")
            }
            VolterraError::ParameterOutOfRange { name, value } => {
                write!(f, "parameter {name} = {value} outside [-1, 1]")
            }
            VolterraError::NotBijective => write!(f, "images do not form a permutation"),
            VolterraError::BoundaryPoint { index } => {
                write!(f, "coordinate {index} vanishes; point must be interior")
            }
            VolterraError::InvalidWeights => {
                write!(f, "weights must be nonnegative and sum to 1")
            }
            VolterraError::SplitOutOfRange { r, m } => {
                write!(f, "split index {r} outside 1..{m}")
            }
            VolterraError::RatioIndicesEqual { i } => {
                write!(f, "ratio indices must differ, both are {i}")
            }
        }
    }
}

impl core::error::Error for VolterraError {}

/// Interaction matrix A of the canonical form
/// `x'_k = x_k (1 + sum_i a[k][i] x_i)`.
///
/// Invariants: `a[k][i] = -a[i][k]` exactly, zero diagonal, entries in
/// [-1, 1]. The strictly upper triangle is primary; the lower triangle is
/// its bitwise negation, so skewness survives float round-trips.
#[derive(Clone, Debug, PartialEq)]
pub struct SkewSymmetricMatrix {
    m: usize,
    a: Vec<f64>,
}

impl SkewSymmetricMatrix {
    pub fn zero(m: usize) -> Self {
        assert!(m >= 1);
        SkewSymmetricMatrix { m, a: vec![0.0; m * m] }
    }

    /// Builds from strictly upper-triangular entries `(i, k, a_ik)` with
    /// `i < k`; the lower triangle is completed by negation.
    pub fn from_upper_triangle(
        m: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self, VolterraError> {
        assert!(m >= 1);
        let mut a = vec![0.0; m * m];
        let mut seen = vec![false; m * m];
        for &(i, k, v) in entries {
            if i >= m {
                return Err(VolterraError::IndexOutOfRange { index: i, m });
            }
            if k >= m {
                return Err(VolterraError::IndexOutOfRange { index: k, m });
            }
            if i >= k {
                return Err(VolterraError::NotStrictlyUpper { i, k });
            }
            if seen[i * m + k] {
                return Err(VolterraError::DuplicateEntry { i, k });
            }
            if !v.is_finite() || libm::fabs(v) > 1.0 {
                return Err(VolterraError::EntryOutOfRange { i, k, value: v });
            }
            seen[i * m + k] = true;
            a[i * m + k] = v;
            a[k * m + i] = -v;
        }
        Ok(SkewSymmetricMatrix { m, a })
    }

    /// Accepts a full row-major matrix, requiring exact skewness.
    pub fn from_rows(m: usize, rows: Vec<f64>) -> Result<Self, VolterraError> {
        assert!(m >= 1);
        assert_eq!(rows.len(), m * m, "matrix buffer must hold m^2 values");
        for i in 0..m {
            let d = rows[i * m + i];
            if d != 0.0 {
                return Err(VolterraError::NonzeroDiagonal { i, value: d });
            }
            for k in (i + 1)..m {
                let v = rows[i * m + k];
                if !v.is_finite() || libm::fabs(v) > 1.0 {
                    return Err(VolterraError::EntryOutOfRange { i, k, value: v });
                }
                if rows[k * m + i] != -v {
                    return Err(VolterraError::NotSkew { i, k });
                }
            }
        }
        Ok(SkewSymmetricMatrix { m, a: rows })
    }

    /// Reads the interaction matrix off a Volterra tensor:
    /// `a[k][i] = 2 P[i][k][k] - 1`, upper triangle primary.
    pub fn from_tensor(p: &HeredityTensor) -> Result<Self, VolterraError> {
        if !p.classify(None, ZERO_TOL).is_volterra {
            return Err(VolterraError::NotVolterra);
        }
        let m = p.m();
        let mut a = vec![0.0; m * m];
        for k in 0..m {
            for i in (k + 1)..m {
                let v = 2.0 * p.get(i, k, k) - 1.0;
                a[k * m + i] = v;
                a[i * m + k] = -v;
            }
        }
        Ok(SkewSymmetricMatrix { m, a })
    }

    /// Expands back to the tensor: `P[i][k][k] = (1 + a[k][i]) / 2` and
    /// `P[i][k][i] = (1 - a[k][i]) / 2` for i != k, `P[i][i][i] = 1`.
    pub fn to_tensor(&self) -> HeredityTensor {
        let m = self.m;
        let mut e = vec![0.0; m * m * m];
        for i in 0..m {
            e[(i * m + i) * m + i] = 1.0;
            for k in 0..m {
                if k == i {
                    continue;
                }
                let aki = self.get(k, i);
                e[(i * m + k) * m + k] = (1.0 + aki) / 2.0;
                e[(i * m + k) * m + i] = (1.0 - aki) / 2.0;
            }
        }
        HeredityTensor::from_entries(m, e).expect("canonical expansion is always valid")
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.a[k * self.m + i]
    }

    #[inline]
    pub fn rows(&self) -> &[f64] {
        &self.a
    }

    /// Canonical form without the repair step. `out` is overwritten.
    pub fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(x.len(), m);
        debug_assert_eq!(out.len(), m);
        for k in 0..m {
            let mut s = 1.0;
            for (aki, xi) in self.a[k * m..(k + 1) * m].iter().zip(x) {
                s += aki * xi;
            }
            out[k] = x[k] * s;
        }
    }

    pub fn apply_canonical(&self, x: &SimplexPoint) -> Result<SimplexPoint, SimplexError> {
        if x.dim() != self.m {
            return Err(SimplexError::DimensionMismatch {
                expected: self.m,
                got: x.dim(),
            });
        }
        let mut out = vec![0.0; self.m];
        self.apply_raw(x.coords(), &mut out);
        SimplexPoint::new(out, Normalization::Renormalize)
    }

    /// True iff every even-order leading principal minor (orders 2, 4, ...,
    /// 2*floor(m/2)) has |det| > tol. Odd orders vanish identically for
    /// skew matrices and are skipped.
    pub fn is_transversal(&self, tol: f64) -> bool {
        assert!(tol > 0.0);
        let m = self.m;
        let mut order = 2;
        while order <= m {
            let mut sub = vec![0.0; order * order];
            for i in 0..order {
                for j in 0..order {
                    sub[i * order + j] = self.get(i, j);
                }
            }
            if libm::fabs(linalg::determinant(&sub, order)) <= tol {
                return false;
            }
            order += 2;
        }
        true
    }
}

/// A bijection of 0..m, stored as the image list.
#[derive(Clone, Debug, PartialEq)]
pub struct Permutation {
    images: Vec<usize>,
}

impl Permutation {
    pub fn new(images: Vec<usize>) -> Result<Self, VolterraError> {
        let m = images.len();
        let mut seen = vec![false; m];
        for &t in &images {
            if t >= m || seen[t] {
                return Err(VolterraError::NotBijective);
            }
            seen[t] = true;
        }
        Ok(Permutation { images })
    }

    pub fn identity(m: usize) -> Self {
        Permutation {
            images: (0..m).collect(),
        }
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.images.len()
    }

    #[inline]
    pub fn image(&self, i: usize) -> usize {
        self.images[i]
    }

    pub fn images(&self) -> &[usize] {
        &self.images
    }

    /// True iff the permutation is a single cycle through all m elements.
    pub fn is_cyclic(&self) -> bool {
        let m = self.images.len();
        if m == 0 {
            return false;
        }
        let mut seen = 1usize;
        let mut at = self.images[0];
        while at != 0 {
            seen += 1;
            at = self.images[at];
            if seen > m {
                return false; // unreachable for a valid permutation
            }
        }
        seen == m
    }
}

/// Volterra dynamics followed by a coordinate relabeling:
/// `y[tau(j)] = x_j (1 + sum_k a[j][k] x_k)`.
#[derive(Clone, Debug)]
pub struct PermutedVolterra {
    matrix: SkewSymmetricMatrix,
    tau: Permutation,
}

pub fn permuted_operator(
    matrix: SkewSymmetricMatrix,
    tau: Permutation,
) -> Result<PermutedVolterra, VolterraError> {
    if matrix.m() != tau.m() {
        return Err(VolterraError::DimensionMismatch {
            expected: matrix.m(),
            got: tau.m(),
        });
    }
    Ok(PermutedVolterra { matrix, tau })
}

impl PermutedVolterra {
    pub fn matrix(&self) -> &SkewSymmetricMatrix {
        &self.matrix
    }

    pub fn tau(&self) -> &Permutation {
        &self.tau
    }

    pub fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        let m = self.matrix.m();
        debug_assert_eq!(x.len(), m);
        debug_assert_eq!(out.len(), m);
        for j in 0..m {
            let mut s = 1.0;
            for (ajk, xk) in self.matrix.rows()[j * m..(j + 1) * m].iter().zip(x) {
                s += ajk * xk;
            }
            out[self.tau.image(j)] = x[j] * s;
        }
    }

    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint, SimplexError> {
        let m = self.matrix.m();
        if x.dim() != m {
            return Err(SimplexError::DimensionMismatch {
                expected: m,
                got: x.dim(),
            });
        }
        let mut out = vec![0.0; m];
        self.apply_raw(x.coords(), &mut out);
        SimplexPoint::new(out, Normalization::Renormalize)
    }
}

/// Candidate conserved or decaying quantity along an orbit.
#[derive(Clone, Debug, PartialEq)]
pub enum LyapunovSpec {
    /// prod x_i^{p_i} with p a probability vector; interior only.
    Product { p: Vec<f64> },
    /// sum of the coordinates with index >= r (0-based split).
    PartialSum { r: usize },
    /// x_i / x_j; interior only.
    Ratio { i: usize, j: usize },
}

impl LyapunovSpec {
    pub fn product(p: Vec<f64>) -> Result<Self, VolterraError> {
        if p.is_empty() || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(VolterraError::InvalidWeights);
        }
        let s: f64 = p.iter().sum();
        if libm::fabs(s - 1.0) > 1e-12 {
            return Err(VolterraError::InvalidWeights);
        }
        Ok(LyapunovSpec::Product { p })
    }

    pub fn partial_sum(r: usize, m: usize) -> Result<Self, VolterraError> {
        if r < 1 || r >= m {
            return Err(VolterraError::SplitOutOfRange { r, m });
        }
        Ok(LyapunovSpec::PartialSum { r })
    }

    pub fn ratio(i: usize, j: usize) -> Result<Self, VolterraError> {
        if i == j {
            return Err(VolterraError::RatioIndicesEqual { i });
        }
        Ok(LyapunovSpec::Ratio { i, j })
    }

    pub fn value(&self, x: &SimplexPoint) -> Result<f64, VolterraError> {
        match self {
            LyapunovSpec::Product { p } => {
                if p.len() != x.dim() {
                    return Err(VolterraError::DimensionMismatch {
                        expected: p.len(),
                        got: x.dim(),
                    });
                }
                require_interior(x)?;
                let mut v = 1.0;
                for (xi, pi) in x.coords().iter().zip(p) {
                    v *= libm::pow(*xi, *pi);
                }
                Ok(v)
            }
            LyapunovSpec::PartialSum { r } => {
                if *r >= x.dim() {
                    return Err(VolterraError::SplitOutOfRange { r: *r, m: x.dim() });
                }
                Ok(x.coords()[*r..].iter().sum())
            }
            LyapunovSpec::Ratio { i, j } => {
                let m = x.dim();
                for idx in [*i, *j] {
                    if idx >= m {
                        return Err(VolterraError::IndexOutOfRange { index: idx, m });
                    }
                }
                require_interior(x)?;
                Ok(x.coords()[*i] / x.coords()[*j])
            }
        }
    }
}

fn require_interior(x: &SimplexPoint) -> Result<(), VolterraError> {
    for (index, v) in x.coords().iter().enumerate() {
        if *v <= 0.0 {
            return Err(VolterraError::BoundaryPoint { index });
        }
    }
    Ok(())
}

/// The decay condition for the partial-sum quantity: strict negativity of
/// every interaction from the first r species to the rest.
pub fn partial_sum_applicable(a: &SkewSymmetricMatrix, r: usize) -> bool {
    let m = a.m();
    assert!(r >= 1 && r < m, "split index out of range");
    for i in 0..r {
        for j in r..m {
            if a.get(i, j) >= 0.0 {
                return false;
            }
        }
    }
    true
}

/// The three-parameter family on S^2 with matrix entries
/// a[0][1] = a, a[0][2] = -b, a[1][2] = c.
#[derive(Clone, Debug)]
pub struct ZakharevichOperator {
    pub matrix: SkewSymmetricMatrix,
    /// True when a, b, c share one strict sign; time averages along
    /// interior orbits then fail to converge.
    pub ergodic_failure_predicted: bool,
}

pub fn zakharevich_family(a: f64, b: f64, c: f64) -> Result<ZakharevichOperator, VolterraError> {
    for (name, v) in [("a", a), ("b", b), ("c", c)] {
        if !v.is_finite() || libm::fabs(v) > 1.0 {
            return Err(VolterraError::ParameterOutOfRange { name, value: v });
        }
    }
    let matrix = SkewSymmetricMatrix::from_upper_triangle(3, &[(0, 1, a), (0, 2, -b), (1, 2, c)])?;
    let same_sign = (a > 0.0 && b > 0.0 && c > 0.0) || (a < 0.0 && b < 0.0 && c < 0.0);
    Ok(ZakharevichOperator {
        matrix,
        ergodic_failure_predicted: same_sign,
    })
}
