//! Points of the simplex S^{m-1}: validation, repair, rearrangement,
//! majorization, canonical points.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

/// Coordinates must sum to 1 within this absolute tolerance.
pub const SUM_TOL: f64 = 1e-12;
/// Under `Renormalize`, coordinates in `[CLAMP_FLOOR, 0)` are clamped to 0;
/// anything below is an error, not drift.
pub const CLAMP_FLOOR: f64 = -1e-9;
/// Per-comparison slack for majorization prefix sums.
pub const PREFIX_TOL: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Normalization {
    /// Reject anything not already on the simplex. Stores coordinates unchanged.
    Strict,
    /// Clamp tiny negatives to 0 and rescale by the coordinate sum.
    Renormalize,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SimplexError {
    EmptyDimension,
    NonFinite { index: usize, value: f64 },
    NegativeCoordinate { index: usize, value: f64 },
    SumDrift { sum: f64 },
    ZeroSum,
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for SimplexError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimplexError::EmptyDimension => write!(f, "point has no coordinates"),
            SimplexError::NonFinite { index, value } => {
                write!(f, "coordinate {index} is not finite ({value})")
            }
            SimplexError::NegativeCoordinate { index, value } => {
                write!(f, "coordinate {index} is negative ({value})")
            }
            SimplexError::SumDrift { sum } => {
                write!(f, "coordinates sum to {sum}, not 1")
            }
            SimplexError::ZeroSum => write!(f, "coordinate sum is zero after clamping"),
            SimplexError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl core::error::Error for SimplexError {}

/// A probability vector: coordinates ≥ 0 summing to 1 within [`SUM_TOL`].
#[derive(Clone, Debug, PartialEq)]
pub struct SimplexPoint {
    coords: Vec<f64>,
}

impl SimplexPoint {
    pub fn new(raw: Vec<f64>, policy: Normalization) -> Result<Self, SimplexError> {
        if raw.is_empty() {
            return Err(SimplexError::EmptyDimension);
        }
        for (i, &v) in raw.iter().enumerate() {
            if !v.is_finite() {
                return Err(SimplexError::NonFinite { index: i, value: v });
            }
        }
        match policy {
            Normalization::Strict => {
                for (i, &v) in raw.iter().enumerate() {
                    if v < 0.0 {
                        return Err(SimplexError::NegativeCoordinate { index: i, value: v });
                    }
                }
                let sum: f64 = raw.iter().sum();
                if libm::fabs(sum - 1.0) > SUM_TOL {
                    return Err(SimplexError::SumDrift { sum });
                }
                Ok(SimplexPoint { coords: raw })
            }
            Normalization::Renormalize => {
                let mut coords = raw;
                renormalize_in_place(&mut coords)?;
                Ok(SimplexPoint { coords })
            }
        }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    #[inline]
    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    /// sup-norm distance; panics on dimension mismatch.
    pub fn sup_distance(&self, other: &SimplexPoint) -> f64 {
        assert_eq!(self.dim(), other.dim(), "sup_distance on mismatched dimensions");
        let mut d = 0.0f64;
        for (a, b) in self.coords.iter().zip(&other.coords) {
            d = d.max(libm::fabs(a - b));
        }
        d
    }

    #[inline]
    pub fn min_coord(&self) -> f64 {
        self.coords.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// True iff every coordinate exceeds `tol`.
    pub fn is_interior(&self, tol: f64) -> bool {
        self.min_coord() > tol
    }

    /// Coordinates sorted non-increasingly. Stable: ties keep original order.
    pub fn decreasing_rearrangement(&self) -> SimplexPoint {
        let mut coords = self.coords.clone();
        coords.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
        SimplexPoint { coords }
    }

    /// Trusted constructor for values already known to lie on the simplex.
    pub(crate) fn from_trusted(coords: Vec<f64>) -> SimplexPoint {
        debug_assert!(!coords.is_empty());
        debug_assert!(coords.iter().all(|v| *v >= 0.0));
        SimplexPoint { coords }
    }
}

/// The [`Normalization::Renormalize`] repair, usable on a bare buffer so
/// iteration loops avoid per-step allocation. Clamps values in
/// `[CLAMP_FLOOR, 0)` to zero and divides by the coordinate sum.
pub(crate) fn renormalize_in_place(coords: &mut [f64]) -> Result<(), SimplexError> {
    if coords.is_empty() {
        return Err(SimplexError::EmptyDimension);
    }
    for (i, &v) in coords.iter().enumerate() {
        if !v.is_finite() {
            return Err(SimplexError::NonFinite { index: i, value: v });
        }
    }
    for (i, v) in coords.iter_mut().enumerate() {
        if *v < CLAMP_FLOOR {
            return Err(SimplexError::NegativeCoordinate { index: i, value: *v });
        }
        if *v < 0.0 {
            *v = 0.0;
        }
    }
    let sum: f64 = coords.iter().sum();
    if sum <= 0.0 {
        return Err(SimplexError::ZeroSum);
    }
    // Every coordinate ≤ sum, so quotients stay in [0, 1].
    for v in coords.iter_mut() {
        *v /= sum;
    }
    Ok(())
}

pub fn vertex(m: usize, k: usize) -> SimplexPoint {
    assert!(m >= 1 && k < m, "vertex index out of range");
    let mut coords = vec![0.0; m];
    coords[k] = 1.0;
    SimplexPoint { coords }
}

pub fn vertices(m: usize) -> Vec<SimplexPoint> {
    (0..m).map(|k| vertex(m, k)).collect()
}

pub fn barycenter(m: usize) -> SimplexPoint {
    assert!(m >= 1);
    SimplexPoint {
        coords: vec![1.0 / m as f64; m],
    }
}

/// True iff `y` majorizes `x`: every prefix sum of the decreasing
/// rearrangement of `x` is ≤ the corresponding prefix sum for `y`,
/// with [`PREFIX_TOL`] slack per comparison.
pub fn majorizes(y: &SimplexPoint, x: &SimplexPoint) -> Result<bool, SimplexError> {
    majorizes_with(y, x, PREFIX_TOL)
}

pub fn majorizes_with(
    y: &SimplexPoint,
    x: &SimplexPoint,
    tol: f64,
) -> Result<bool, SimplexError> {
    if y.dim() != x.dim() {
        return Err(SimplexError::DimensionMismatch {
            expected: y.dim(),
            got: x.dim(),
        });
    }
    let yd = y.decreasing_rearrangement();
    let xd = x.decreasing_rearrangement();
    let mut py = 0.0f64;
    let mut px = 0.0f64;
    for (a, b) in yd.coords.iter().zip(&xd.coords) {
        py += a;
        px += b;
        if px > py + tol {
            return Ok(false);
        }
    }
    Ok(true)
}
