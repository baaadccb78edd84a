//! Heredity tensors: evaluation of the quadratic map, validation,
//! structural classification, bistochasticity checks, and the sampling
//! idempotence test.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::linalg;
use crate::sample;
use crate::simplex::{self, Normalization, SimplexError, SimplexPoint};

/// Entries further than this from their transpose counterpart are reported
/// as asymmetric rather than silently averaged.
pub const ASYMMETRY_TOL: f64 = 1e-12;
/// Row sums must equal 1 within this.
pub const ROW_SUM_TOL: f64 = 1e-12;
/// Structural classification treats |entry| <= this as an exact zero.
pub const ZERO_TOL: f64 = 1e-12;
/// Slack for the bistochasticity conditions.
pub const BISTOCHASTIC_TOL: f64 = 1e-10;
/// Entry quantization slack for the extreme-point candidate test.
pub const EXTREME_TOL: f64 = 1e-12;
/// A separability witness must reproduce every entry within this.
pub const SEPARABLE_RECONSTRUCTION_TOL: f64 = 1e-9;
/// The subset condition enumerates 2^m subsets; refuse beyond this m.
pub const SUBSET_ENUMERATION_MAX_M: usize = 12;

#[derive(Clone, Debug, PartialEq)]
pub enum Violation {
    Negative { i: usize, j: usize, k: usize, value: f64 },
    Asymmetric { i: usize, j: usize, k: usize, delta: f64 },
    RowSum { i: usize, j: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Negative { i, j, k, value } => {
                write!(f, "entry ({i},{j},{k}) is negative: {value}")
            }
            Violation::Asymmetric { i, j, k, delta } => {
                write!(f, "entries ({i},{j},{k}) and ({j},{i},{k}) differ by {delta}")
            }
            Violation::RowSum { i, j, sum } => {
                write!(f, "row ({i},{j}) sums to {sum}, not 1")
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TensorError {
    DimensionMismatch { expected: usize, got: usize },
    MixingWeightOutOfRange { lambda: f64 },
}

impl fmt::Display for TensorError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TensorError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
            TensorError::MixingWeightOutOfRange { lambda } => {
                write!(f, "mixing weight {lambda} outside [0, 1]")
            }
        }
    }
}

impl core::error::Error for TensorError {}

/// Dense cubic array `P[i][j][k]` driving `x'_k = sum_{i,j} P[i][j][k] x_i x_j`.
///
/// Invariants after construction: entries nonnegative, exactly symmetric in
/// (i, j), and every row sum `sum_k P[i][j][k]` equals 1 within
/// [`ROW_SUM_TOL`]. Storage is flat row-major, index `i*m*m + j*m + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct HeredityTensor {
    m: usize,
    entries: Vec<f64>,
}

/// Outcome of sampling V(x) against x in the majorization order.
#[derive(Clone, Debug)]
pub struct MajorizationProbe {
    pub holds: bool,
    pub counterexample: Option<SimplexPoint>,
}

/// Flags and witnesses for the three bistochasticity conditions: (a) slice
/// sums equal m, (b) per-(i,k) row sums at least 1/2, (c) subset sums
/// bounded by subset size. (a) and (b) failing certifies the operator is
/// not bistochastic; (c) holding certifies that it is. `c_ok` is None when
/// m exceeds [`SUBSET_ENUMERATION_MAX_M`] and the enumeration was skipped.
#[derive(Clone, Debug)]
pub struct BistochasticConditions {
    pub a_ok: bool,
    pub a_witness: Option<(usize, f64)>,
    pub b_ok: bool,
    pub b_witness: Option<(usize, usize, f64)>,
    pub c_ok: Option<bool>,
    pub c_witness: Option<(Vec<usize>, usize, f64)>,
}

/// The female class of a two-sex pattern match: coordinate 0 is the empty
/// body, coordinates 1..=species are the species.
#[derive(Clone, Debug, PartialEq)]
pub struct FQsoWitness {
    pub females: Vec<usize>,
    pub species: usize,
}

/// Matrix pair (row-major m x m) with
/// `P[i][j][k] = (a[i][k] b[j][k] + a[j][k] b[i][k]) / 2`.
/// Witnesses are not unique and carry no sign constraint.
#[derive(Clone, Debug)]
pub struct SeparableWitness {
    pub m: usize,
    pub a: Vec<f64>,
    pub b: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct ClassificationReport {
    pub is_volterra: bool,
    /// Number of leading coordinates with the inheritance-preserving zero
    /// pattern, when the remaining coordinates all break it. Equals m
    /// exactly when `is_volterra`.
    pub ell: Option<usize>,
    pub is_strictly_non_volterra: bool,
    pub f_qso: Option<FQsoWitness>,
    pub bistochastic_necessary_ok: bool,
    pub bistochastic_sufficient_ok: bool,
    pub bistochastic_sufficient_checked: bool,
    pub regularity_margin: f64,
    pub separable_witness: Option<SeparableWitness>,
    pub extreme_candidate: bool,
}

impl HeredityTensor {
    /// Checks raw entries against all three invariants without building a
    /// tensor. Asymmetry is reported once per unordered pair.
    pub fn validate_entries(m: usize, entries: &[f64]) -> Vec<Violation> {
        assert_eq!(entries.len(), m * m * m, "entry buffer must hold m^3 values");
        let idx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
        let mut out = Vec::new();
        for i in 0..m {
            for j in 0..m {
                let mut sum = 0.0;
                for k in 0..m {
                    let v = entries[idx(i, j, k)];
                    if v < 0.0 {
                        out.push(Violation::Negative { i, j, k, value: v });
                    }
                    if i < j {
                        let d = v - entries[idx(j, i, k)];
                        if libm::fabs(d) > ASYMMETRY_TOL {
                            out.push(Violation::Asymmetric { i, j, k, delta: d });
                        }
                    }
                    sum += v;
                }
                if libm::fabs(sum - 1.0) > ROW_SUM_TOL {
                    out.push(Violation::RowSum { i, j, sum });
                }
            }
        }
        out
    }

    /// Symmetrizes entries over (i, j), then validates nonnegativity and
    /// row sums. The returned tensor is exactly symmetric.
    pub fn from_entries(m: usize, entries: Vec<f64>) -> Result<Self, Vec<Violation>> {
        assert!(m >= 1, "tensor dimension must be positive");
        assert_eq!(entries.len(), m * m * m, "entry buffer must hold m^3 values");
        let mut e = entries;
        let idx = |i: usize, j: usize, k: usize| (i * m + j) * m + k;
        for i in 0..m {
            for j in (i + 1)..m {
                for k in 0..m {
                    let avg = 0.5 * (e[idx(i, j, k)] + e[idx(j, i, k)]);
                    e[idx(i, j, k)] = avg;
                    e[idx(j, i, k)] = avg;
                }
            }
        }
        let tensor = HeredityTensor { m, entries: e };
        let violations = tensor.validate();
        if violations.is_empty() {
            Ok(tensor)
        } else {
            Err(violations)
        }
    }

    /// Re-checks the invariants on the stored entries.
    pub fn validate(&self) -> Vec<Violation> {
        Self::validate_entries(self.m, &self.entries)
    }

    #[inline]
    pub fn m(&self) -> usize {
        self.m
    }

    #[inline]
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[(i * self.m + j) * self.m + k]
    }

    /// Quadratic form without the simplex repair step. `out` is overwritten.
    pub fn apply_raw(&self, x: &[f64], out: &mut [f64]) {
        let m = self.m;
        debug_assert_eq!(x.len(), m);
        debug_assert_eq!(out.len(), m);
        for o in out.iter_mut() {
            *o = 0.0;
        }
        for i in 0..m {
            let xi = x[i];
            if xi == 0.0 {
                continue;
            }
            for j in 0..m {
                let w = xi * x[j];
                if w == 0.0 {
                    continue;
                }
                let row = &self.entries[(i * m + j) * m..(i * m + j + 1) * m];
                for (o, p) in out.iter_mut().zip(row) {
                    *o += p * w;
                }
            }
        }
    }

    pub fn apply(&self, x: &SimplexPoint) -> Result<SimplexPoint, SimplexError> {
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

    pub fn convex_combination(
        p1: &HeredityTensor,
        p2: &HeredityTensor,
        lambda: f64,
    ) -> Result<HeredityTensor, TensorError> {
        if p1.m != p2.m {
            return Err(TensorError::DimensionMismatch {
                expected: p1.m,
                got: p2.m,
            });
        }
        if !(0.0..=1.0).contains(&lambda) {
            return Err(TensorError::MixingWeightOutOfRange { lambda });
        }
        if lambda == 1.0 {
            return Ok(p1.clone());
        }
        if lambda == 0.0 {
            return Ok(p2.clone());
        }
        let entries = p1
            .entries
            .iter()
            .zip(&p2.entries)
            .map(|(a, b)| lambda * a + (1.0 - lambda) * b)
            .collect();
        Ok(HeredityTensor { m: p1.m, entries })
    }

    /// Smallest entry minus 1/(2m); a positive margin certifies that every
    /// trajectory converges (sufficient, not necessary).
    pub fn regularity_margin(&self) -> f64 {
        let min = self
            .entries
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        min - 1.0 / (2.0 * self.m as f64)
    }

    /// Necessary condition for extremality among bistochastic operators:
    /// diagonal entries in {0, 1}, off-diagonal in {0, 1/2, 1}, within
    /// [`EXTREME_TOL`]. The converse fails, so true means candidate only.
    pub fn is_extreme_candidate(&self) -> bool {
        let m = self.m;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let v = self.get(i, j, k);
                    let near = |t: f64| libm::fabs(v - t) <= EXTREME_TOL;
                    let ok = if i == j {
                        near(0.0) || near(1.0)
                    } else {
                        near(0.0) || near(0.5) || near(1.0)
                    };
                    if !ok {
                        return false;
                    }
                }
            }
        }
        true
    }

    pub fn bistochastic_conditions(&self) -> BistochasticConditions {
        let m = self.m;
        let mf = m as f64;
        let mut a_ok = true;
        let mut a_witness = None;
        for k in 0..m {
            let mut s = 0.0;
            for i in 0..m {
                for j in 0..m {
                    s += self.get(i, j, k);
                }
            }
            if libm::fabs(s - mf) > BISTOCHASTIC_TOL {
                a_ok = false;
                a_witness = Some((k, s));
                break;
            }
        }
        let mut b_ok = true;
        let mut b_witness = None;
        'b: for i in 0..m {
            for k in 0..m {
                let mut s = 0.0;
                for j in 0..m {
                    s += self.get(i, j, k);
                }
                if s < 0.5 - BISTOCHASTIC_TOL {
                    b_ok = false;
                    b_witness = Some((i, k, s));
                    break 'b;
                }
            }
        }
        let (c_ok, c_witness) = if m <= SUBSET_ENUMERATION_MAX_M {
            let mut ok = true;
            let mut witness = None;
            'c: for mask in 1u32..(1u32 << m) {
                let members: Vec<usize> = (0..m).filter(|&i| mask & (1 << i) != 0).collect();
                let t = members.len() as f64;
                for k in 0..m {
                    let mut s = 0.0;
                    for &i in &members {
                        for &j in &members {
                            s += self.get(i, j, k);
                        }
                    }
                    if s > t + BISTOCHASTIC_TOL {
                        ok = false;
                        witness = Some((members.clone(), k, s));
                        break 'c;
                    }
                }
            }
            (Some(ok), witness)
        } else {
            (None, None)
        };
        BistochasticConditions {
            a_ok,
            a_witness,
            b_ok,
            b_witness,
            c_ok,
            c_witness,
        }
    }

    /// Samples x against V(x) in the majorization order: vertices, the
    /// barycenter, then `n_samples` uniform draws. The first x that fails
    /// to majorize its image is returned as the counterexample.
    pub fn majorization_probe(&self, n_samples: usize, seed: u64) -> MajorizationProbe {
        let mut rng = sample::rng(seed);
        let mut points = simplex::vertices(self.m);
        points.push(simplex::barycenter(self.m));
        for _ in 0..n_samples {
            points.push(sample::random_simplex_point(&mut rng, self.m));
        }
        for x in points {
            let vx = self.apply(&x).expect("dimension matches by construction");
            if !simplex::majorizes(&x, &vx).expect("equal dimensions") {
                return MajorizationProbe {
                    holds: false,
                    counterexample: Some(x),
                };
            }
        }
        MajorizationProbe {
            holds: true,
            counterexample: None,
        }
    }

    /// Sampling test of V^r = V: sup-distance between the r-fold iterate
    /// and the single application, over vertices, barycenter, and uniform
    /// draws.
    pub fn is_idempotent(&self, r: usize, n_samples: usize, seed: u64, tol: f64) -> bool {
        assert!(r >= 2, "iterate count must be at least 2");
        let mut rng = sample::rng(seed);
        let mut points = simplex::vertices(self.m);
        points.push(simplex::barycenter(self.m));
        for _ in 0..n_samples {
            points.push(sample::random_simplex_point(&mut rng, self.m));
        }
        for x in points {
            let once = self.apply(&x).expect("dimension matches");
            let mut iter = once.clone();
            for _ in 1..r {
                iter = self.apply(&iter).expect("dimension matches");
            }
            if iter.sup_distance(&once) > tol {
                return false;
            }
        }
        true
    }

    /// Structural classification. `f_partition` lists the female
    /// coordinates (1-based species, coordinate 0 being the empty body) and
    /// triggers the two-sex pattern check; `zero_tol` is the threshold
    /// below which entries count as structural zeros.
    pub fn classify(
        &self,
        f_partition: Option<&[usize]>,
        zero_tol: f64,
    ) -> ClassificationReport {
        assert!(zero_tol >= 0.0);
        let m = self.m;
        let is_zero = |v: f64| libm::fabs(v) <= zero_tol;

        // Per-coordinate inheritance flag: coordinate k receives mass only
        // from pairs containing k.
        let mut volterra_coord = vec![true; m];
        for k in 0..m {
            'scan: for i in 0..m {
                for j in 0..m {
                    if k != i && k != j && !is_zero(self.get(i, j, k)) {
                        volterra_coord[k] = false;
                        break 'scan;
                    }
                }
            }
        }
        let is_volterra = volterra_coord.iter().all(|&v| v);
        let leading = volterra_coord.iter().take_while(|&&v| v).count();
        let ell = if leading >= 1 && volterra_coord[leading..].iter().all(|&v| !v) {
            Some(leading)
        } else {
            None
        };

        let mut is_strictly_non_volterra = true;
        'snv: for i in 0..m {
            for j in 0..m {
                if !is_zero(self.get(i, j, i)) || !is_zero(self.get(i, j, j)) {
                    is_strictly_non_volterra = false;
                    break 'snv;
                }
            }
        }

        let f_qso = f_partition.and_then(|females| self.match_f_pattern(females, zero_tol));

        let bis = self.bistochastic_conditions();
        let separable_witness = self.separable_witness();

        ClassificationReport {
            is_volterra,
            ell,
            is_strictly_non_volterra,
            f_qso,
            bistochastic_necessary_ok: bis.a_ok && bis.b_ok,
            bistochastic_sufficient_ok: bis.c_ok.unwrap_or(false),
            bistochastic_sufficient_checked: bis.c_ok.is_some(),
            regularity_margin: self.regularity_margin(),
            separable_witness,
            extreme_candidate: self.is_extreme_candidate(),
        }
    }

    /// Two-sex pattern: coordinate 0 is the empty body; a pair produces
    /// offspring only when one side is female and the other male, and every
    /// other pair maps to the empty body with certainty.
    fn match_f_pattern(&self, females: &[usize], zero_tol: f64) -> Option<FQsoWitness> {
        let m = self.m;
        if m < 2 {
            return None;
        }
        let species = m - 1;
        let mut is_female = vec![false; m];
        for &f in females {
            if f == 0 || f >= m || is_female[f] {
                return None;
            }
            is_female[f] = true;
        }
        for i in 0..m {
            for j in 0..m {
                let fertile = i >= 1
                    && j >= 1
                    && (is_female[i] != is_female[j]);
                if fertile {
                    continue;
                }
                if libm::fabs(self.get(i, j, 0) - 1.0) > zero_tol {
                    return None;
                }
                for k in 1..m {
                    if libm::fabs(self.get(i, j, k)) > zero_tol {
                        return None;
                    }
                }
            }
        }
        let mut fs = females.to_vec();
        fs.sort_unstable();
        Some(FQsoWitness {
            females: fs,
            species,
        })
    }

    /// Rank-style recovery of a separability witness. Each slice
    /// P[.][.][k] must be a symmetrized rank-one-times-rank-one product,
    /// i.e. have at most one positive and one negative eigenvalue; the
    /// witness is rebuilt from that eigenpair and verified entrywise.
    fn separable_witness(&self) -> Option<SeparableWitness> {
        let m = self.m;
        let eig_zero = 1e-10;
        let mut a = vec![0.0; m * m];
        let mut b = vec![0.0; m * m];
        let mut slice = vec![0.0; m * m];
        for k in 0..m {
            for i in 0..m {
                for j in 0..m {
                    slice[i * m + j] = self.get(i, j, k);
                }
            }
            let (vals, vecs) = linalg::sym_eigen(&slice, m);
            let mut pos: Option<usize> = None;
            let mut neg: Option<usize> = None;
            for (idx, &v) in vals.iter().enumerate() {
                if v > eig_zero {
                    if pos.is_some() {
                        return None;
                    }
                    pos = Some(idx);
                } else if v < -eig_zero {
                    if neg.is_some() {
                        return None;
                    }
                    neg = Some(idx);
                }
            }
            for i in 0..m {
                let u = match pos {
                    Some(p) => libm::sqrt(vals[p]) * vecs[i * m + p],
                    None => 0.0,
                };
                let w = match neg {
                    Some(q) => libm::sqrt(-vals[q]) * vecs[i * m + q],
                    None => 0.0,
                };
                a[i * m + k] = u + w;
                b[i * m + k] = u - w;
            }
        }
        // Verify the reconstruction before claiming a witness.
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let rebuilt =
                        0.5 * (a[i * m + k] * b[j * m + k] + a[j * m + k] * b[i * m + k]);
                    if libm::fabs(rebuilt - self.get(i, j, k)) > SEPARABLE_RECONSTRUCTION_TOL {
                        return None;
                    }
                }
            }
        }
        Some(SeparableWitness { m, a, b })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simplex::{barycenter, vertex};

    fn point(coords: &[f64]) -> SimplexPoint {
        SimplexPoint::new(coords.to_vec(), Normalization::Renormalize).unwrap()
    }

    /// P[i][j][k] = (delta_ik + delta_jk)/2, the identity map.
    fn identity_like(m: usize) -> HeredityTensor {
        let mut e = vec![0.0; m * m * m];
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let mut v = 0.0;
                    if i == k {
                        v += 0.5;
                    }
                    if j == k {
                        v += 0.5;
                    }
                    e[(i * m + j) * m + k] = v;
                }
            }
        }
        HeredityTensor::from_entries(m, e).unwrap()
    }

    fn uniform(m: usize) -> HeredityTensor {
        HeredityTensor::from_entries(m, vec![1.0 / m as f64; m * m * m]).unwrap()
    }

    /// Cyclic three-species predator map: x1' = x1^2 + 2 x1 x2, cycled.
    fn v0() -> HeredityTensor {
        let m = 3;
        let mut e = vec![0.0; 27];
        let mut set = |i: usize, j: usize, k: usize, v: f64| {
            e[(i * m + j) * m + k] = v;
            e[(j * m + i) * m + k] = v;
        };
        set(0, 0, 0, 1.0);
        set(0, 1, 0, 1.0);
        set(1, 1, 1, 1.0);
        set(1, 2, 1, 1.0);
        set(2, 2, 2, 1.0);
        set(0, 2, 2, 1.0);
        HeredityTensor::from_entries(m, e).unwrap()
    }

    /// Its non-inheriting counterpart: x1' = x1^2 + 2 x2 x3, cycled.
    fn v1() -> HeredityTensor {
        let m = 3;
        let mut e = vec![0.0; 27];
        let mut set = |i: usize, j: usize, k: usize, v: f64| {
            e[(i * m + j) * m + k] = v;
            e[(j * m + i) * m + k] = v;
        };
        set(0, 0, 0, 1.0);
        set(1, 2, 0, 1.0);
        set(1, 1, 1, 1.0);
        set(0, 2, 1, 1.0);
        set(2, 2, 2, 1.0);
        set(0, 1, 2, 1.0);
        HeredityTensor::from_entries(m, e).unwrap()
    }

    #[test]
    fn apply_hand_example() {
        // m=2: P[0][0] = (1,0), P[0][1] = (1/2,1/2), P[1][1] = (0.2,0.8).
        let e = vec![
            1.0, 0.0, // (0,0,*)
            0.5, 0.5, // (0,1,*)
            0.5, 0.5, // (1,0,*)
            0.2, 0.8, // (1,1,*)
        ];
        let p = HeredityTensor::from_entries(2, e).unwrap();
        let y = p.apply(&point(&[0.4, 0.6])).unwrap();
        assert!((y.coords()[0] - 0.472).abs() < 1e-15);
        assert!((y.coords()[1] - 0.528).abs() < 1e-15);
    }

    #[test]
    fn apply_at_vertex_reads_diagonal_row() {
        let p = v1();
        let y = p.apply(&vertex(3, 0)).unwrap();
        assert_eq!(y.coords(), &[1.0, 0.0, 0.0]);
        let y = uniform(3).apply(&vertex(3, 1)).unwrap();
        for c in y.coords() {
            assert!((c - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn barycenter_fixed_for_both_named_operators() {
        for p in [v0(), v1()] {
            let y = p.apply(&barycenter(3)).unwrap();
            assert!(y.sup_distance(&barycenter(3)) < 1e-15);
        }
    }

    #[test]
    fn validate_reports_each_violation_kind() {
        // Asymmetric pair before symmetrization.
        let mut e = vec![0.0; 27];
        let m = 3;
        for i in 0..m {
            for j in 0..m {
                e[(i * m + j) * m] = 1.0; // all mass on k=0: valid sums
            }
        }
        e[(0 * m + 1) * m] = 0.6;
        e[(0 * m + 1) * m + 1] = 0.4;
        // leave (1,0,*) at (1.0, 0.0): asymmetric but same row sum
        let viols = HeredityTensor::validate_entries(m, &e);
        assert!(viols
            .iter()
            .any(|v| matches!(v, Violation::Asymmetric { i: 0, j: 1, .. })));

        let mut e = vec![0.0; 8];
        e[0] = 0.9; // row (0,0) sums to 0.9
        e[2] = 0.5;
        e[3] = 0.5;
        e[4] = 0.5;
        e[5] = 0.5;
        e[6] = 1.0;
        let viols = HeredityTensor::validate_entries(2, &e);
        assert!(viols.iter().any(
            |v| matches!(v, Violation::RowSum { i: 0, j: 0, sum } if (sum - 0.9).abs() < 1e-15)
        ));

        let mut e = vec![0.5; 8];
        e[0] = -0.1;
        e[1] = 1.1;
        let viols = HeredityTensor::validate_entries(2, &e);
        assert!(viols
            .iter()
            .any(|v| matches!(v, Violation::Negative { i: 0, j: 0, k: 0, .. })));
    }

    #[test]
    fn named_operators_validate_clean() {
        assert!(v0().validate().is_empty());
        assert!(v1().validate().is_empty());
        assert!(identity_like(5).validate().is_empty());
    }

    #[test]
    fn symmetrization_leaves_apply_unchanged() {
        // Quadratic form only sees the symmetric part.
        let mut rng = sample::rng(11);
        let m = 3;
        let mut raw = vec![0.0; 27];
        // Random asymmetric split of a valid symmetric tensor.
        for i in 0..m {
            for j in 0..m {
                let d = sample::random_simplex_point(&mut rng, m);
                for k in 0..m {
                    raw[(i * m + j) * m + k] = d.coords()[k];
                }
            }
        }
        let mut sym = raw.clone();
        for i in 0..m {
            for j in (i + 1)..m {
                for k in 0..m {
                    let avg = 0.5 * (raw[(i * m + j) * m + k] + raw[(j * m + i) * m + k]);
                    sym[(i * m + j) * m + k] = avg;
                    sym[(j * m + i) * m + k] = avg;
                }
            }
        }
        let p_raw = HeredityTensor::from_entries(m, raw).unwrap();
        let p_sym = HeredityTensor::from_entries(m, sym).unwrap();
        for _ in 0..20 {
            let x = sample::random_simplex_point(&mut rng, m);
            let a = p_raw.apply(&x).unwrap();
            let b = p_sym.apply(&x).unwrap();
            assert!(a.sup_distance(&b) < 1e-15);
        }
    }

    #[test]
    fn apply_is_quadratic_along_segments() {
        let mut rng = sample::rng(12);
        let p = v1();
        for _ in 0..10 {
            let u = sample::random_simplex_point(&mut rng, 3);
            let v = sample::random_simplex_point(&mut rng, 3);
            let eval = |t: f64| {
                let mix: Vec<f64> = u
                    .coords()
                    .iter()
                    .zip(v.coords())
                    .map(|(a, b)| (1.0 - t) * a + t * b)
                    .collect();
                p.apply(&point(&mix)).unwrap()
            };
            let f0 = eval(0.0);
            let f_half = eval(0.5);
            let f1 = eval(1.0);
            let predicted = eval(0.25);
            for k in 0..3 {
                // Quadratic through t = 0, 1/2, 1 evaluated at 1/4.
                let (y0, yh, y1) = (f0.coords()[k], f_half.coords()[k], f1.coords()[k]);
                let c = y0;
                let a2 = 2.0 * y1 + 2.0 * c - 4.0 * yh;
                let b1 = y1 - c - a2;
                let want = a2 * 0.0625 + b1 * 0.25 + c;
                assert!(
                    (predicted.coords()[k] - want).abs() < 1e-9,
                    "segment evaluation is not quadratic"
                );
            }
        }
    }

    #[test]
    fn classify_volterra_flags() {
        let r = v0().classify(None, ZERO_TOL);
        assert!(r.is_volterra);
        assert_eq!(r.ell, Some(3));
        assert!(!r.is_strictly_non_volterra);

        let r = v1().classify(None, ZERO_TOL);
        assert!(!r.is_volterra);
        assert_eq!(r.ell, None);
    }

    #[test]
    fn classify_partial_inheritance_count() {
        // First coordinate keeps the inheriting pattern, the others break it.
        let m = 3;
        let mut e = vec![0.0; 27];
        let mut set = |i: usize, j: usize, k: usize, v: f64| {
            e[(i * m + j) * m + k] = v;
            e[(j * m + i) * m + k] = v;
        };
        set(0, 0, 0, 0.6);
        set(0, 0, 1, 0.2);
        set(0, 0, 2, 0.2);
        set(0, 1, 0, 1.0);
        set(1, 1, 1, 1.0);
        set(1, 2, 1, 1.0);
        set(2, 2, 2, 1.0);
        set(0, 2, 2, 1.0);
        let p = HeredityTensor::from_entries(m, e).unwrap();
        let r = p.classify(None, ZERO_TOL);
        assert!(!r.is_volterra);
        assert_eq!(r.ell, Some(1));
    }

    #[test]
    fn classify_strictly_non_volterra() {
        // x' = y^2 + z^2 + 2yz pattern: everything leaves its own pair.
        let m = 3;
        let mut e = vec![0.0; 27];
        let mut set = |i: usize, j: usize, k: usize, v: f64| {
            e[(i * m + j) * m + k] = v;
            e[(j * m + i) * m + k] = v;
        };
        set(1, 1, 0, 0.5);
        set(1, 1, 2, 0.5);
        set(2, 2, 0, 0.5);
        set(2, 2, 1, 0.5);
        set(0, 0, 1, 0.5);
        set(0, 0, 2, 0.5);
        set(1, 2, 0, 1.0);
        set(0, 2, 1, 1.0);
        set(0, 1, 2, 1.0);
        let p = HeredityTensor::from_entries(m, e).unwrap();
        let r = p.classify(None, ZERO_TOL);
        assert!(r.is_strictly_non_volterra);
        assert!(!r.is_volterra);
        assert_eq!(r.ell, None);
    }

    #[test]
    fn bistochastic_conditions_identity_like() {
        let c = identity_like(3).bistochastic_conditions();
        assert!(c.a_ok && c.b_ok, "{:?}", c);
        assert_eq!(c.c_ok, Some(true));
        assert!(c.c_witness.is_none());
    }

    #[test]
    fn bistochastic_conditions_v0_witnesses() {
        let c = v0().bistochastic_conditions();
        assert!(c.a_ok);
        assert!(!c.b_ok);
        // Coordinate 1 receives nothing from species 0's pairs.
        let (i, k, s) = c.b_witness.unwrap();
        assert_eq!((i, k), (0, 1));
        assert_eq!(s, 0.0);
        let recomputed: f64 = (0..3).map(|j| v0().get(i, j, k)).sum();
        assert!(recomputed < 0.5);
        assert_eq!(c.c_ok, Some(false));
        let (subset, k, s) = c.c_witness.unwrap();
        assert_eq!(subset, vec![0, 1]);
        assert_eq!(k, 0);
        assert!((s - 3.0).abs() < 1e-12);
    }

    #[test]
    fn subset_condition_skipped_above_enumeration_bound() {
        let c = uniform(13).bistochastic_conditions();
        assert_eq!(c.c_ok, None);
        assert!(c.a_ok && c.b_ok);
        let r = uniform(13).classify(None, ZERO_TOL);
        assert!(!r.bistochastic_sufficient_checked);
    }

    #[test]
    fn majorization_probe_verdicts() {
        assert!(identity_like(3).majorization_probe(200, 5).holds);
        assert!(uniform(3).majorization_probe(200, 5).holds);
        let probe = v0().majorization_probe(1000, 0);
        assert!(!probe.holds);
        let x = probe.counterexample.unwrap();
        let vx = v0().apply(&x).unwrap();
        assert!(!simplex::majorizes(&x, &vx).unwrap());
    }

    #[test]
    fn extreme_candidate_entries_quantized() {
        assert!(identity_like(4).is_extreme_candidate());
        assert!(v0().is_extreme_candidate());
        let mix = HeredityTensor::convex_combination(&v0(), &v1(), 0.3).unwrap();
        assert!(!mix.is_extreme_candidate());
        let mut e = vec![0.0; 8];
        e[0] = 0.5;
        e[1] = 0.5;
        e[2] = 0.5;
        e[3] = 0.5;
        e[4] = 0.5;
        e[5] = 0.5;
        e[6] = 0.0;
        e[7] = 1.0;
        let p = HeredityTensor::from_entries(2, e).unwrap();
        assert!(!p.is_extreme_candidate(), "diagonal 0.5 must disqualify");
    }

    #[test]
    fn idempotence_sampling() {
        assert!(identity_like(3).is_idempotent(2, 100, 9, 1e-12));
        assert!(!v0().is_idempotent(2, 100, 9, 1e-6));
    }

    #[test]
    fn regularity_margins() {
        assert!((uniform(3).regularity_margin() - 1.0 / 6.0).abs() < 1e-15);
        assert!((uniform(2).regularity_margin() - 0.25).abs() < 1e-15);
        assert!((v0().regularity_margin() + 1.0 / 6.0).abs() < 1e-15);
    }

    #[test]
    fn convex_combination_endpoints_and_bounds() {
        let a = v0();
        let b = v1();
        assert_eq!(HeredityTensor::convex_combination(&a, &b, 1.0).unwrap(), a);
        assert_eq!(HeredityTensor::convex_combination(&a, &b, 0.0).unwrap(), b);
        let mix = HeredityTensor::convex_combination(&a, &b, 0.5).unwrap();
        assert!((mix.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!(mix.validate().is_empty());
        assert!(matches!(
            HeredityTensor::convex_combination(&a, &b, 1.3),
            Err(TensorError::MixingWeightOutOfRange { .. })
        ));
        assert!(matches!(
            HeredityTensor::convex_combination(&a, &uniform(4), 0.5),
            Err(TensorError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn separable_witness_found_and_verified() {
        // a[i][k] = 1, b[j][k] = 1/m gives the uniform tensor.
        let w = uniform(3).classify(None, ZERO_TOL).separable_witness;
        let w = w.expect("uniform tensor factors");
        let m = 3;
        for i in 0..m {
            for j in 0..m {
                for k in 0..m {
                    let rebuilt = 0.5
                        * (w.a[i * m + k] * w.b[j * m + k] + w.a[j * m + k] * w.b[i * m + k]);
                    assert!((rebuilt - 1.0 / 3.0).abs() < 1e-9);
                }
            }
        }
        assert!(identity_like(3)
            .classify(None, ZERO_TOL)
            .separable_witness
            .is_some());
    }

    #[test]
    fn separable_witness_absent_for_entangled_slices() {
        // The slice P[.][.][0] of the non-inheriting cyclic operator has
        // eigenvalues {1, 1, -1}: two positive, so no factorization.
        assert!(v1().classify(None, ZERO_TOL).separable_witness.is_none());
    }

    #[test]
    fn f_pattern_detected_only_with_partition() {
        // Two species, females = {1}: coordinate 0 empty body.
        // Fertile pair (1,2) spawns (1/3, 1/3, 1/3).
        let m = 3;
        let mut e = vec![0.0; 27];
        let sterile = [(0usize, 0usize), (0, 1), (0, 2), (1, 1), (2, 2)];
        for (i, j) in sterile {
            e[(i * m + j) * m] = 1.0;
            e[(j * m + i) * m] = 1.0;
        }
        for k in 0..3 {
            e[(1 * m + 2) * m + k] = 1.0 / 3.0;
            e[(2 * m + 1) * m + k] = 1.0 / 3.0;
        }
        let p = HeredityTensor::from_entries(m, e).unwrap();
        let r = p.classify(Some(&[1]), ZERO_TOL);
        let w = r.f_qso.expect("pattern holds for females = {1}");
        assert_eq!(w.females, vec![1]);
        assert_eq!(w.species, 2);
        assert!(!r.is_volterra);

        // Wrong partition: pair (1,2) would have to be sterile.
        assert!(p.classify(Some(&[1, 2]), ZERO_TOL).f_qso.is_none());
        assert!(p.classify(None, ZERO_TOL).f_qso.is_none());
        // Coordinate 0 can never be female.
        assert!(p.classify(Some(&[0]), ZERO_TOL).f_qso.is_none());
    }

    #[test]
    fn apply_preserves_simplex_on_random_tensors() {
        let mut rng = sample::rng(13);
        for m in 2..=6 {
            for _ in 0..20 {
                let mut e = vec![0.0; m * m * m];
                for i in 0..m {
                    for j in 0..m {
                        let d = sample::random_simplex_point(&mut rng, m);
                        for k in 0..m {
                            e[(i * m + j) * m + k] = d.coords()[k];
                        }
                    }
                }
                let p = HeredityTensor::from_entries(m, e).unwrap();
                let x = sample::random_simplex_point(&mut rng, m);
                let y = p.apply(&x).unwrap();
                assert_eq!(y.dim(), m);
                let s: f64 = y.coords().iter().sum();
                assert!((s - 1.0).abs() <= 1e-12);
                assert!(y.coords().iter().all(|v| *v >= 0.0));
            }
        }
    }
}
