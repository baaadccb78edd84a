//! Constructors for the named operator families, each emitting a validated
//! heredity tensor.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::tensor::{HeredityTensor, TensorError, Violation, ZERO_TOL};

#[derive(Clone, Debug, PartialEq)]
pub enum FamilyError {
    MixingWeightOutOfRange { lambda: f64 },
    SpeciesOutOfRange { index: usize, m: usize },
    DuplicateFemale { index: usize },
    FertilityPairInvalid { female: usize, male: usize },
    FertilityPairDuplicate { female: usize, male: usize },
    FertilityPairMissing { female: usize, male: usize },
    FertilityRowLength { female: usize, male: usize, expected: usize, got: usize },
    FertilityNegativeEntry { female: usize, male: usize, k: usize, value: f64 },
    FertilityNotDistribution { female: usize, male: usize, sum: f64 },
    NegativeParameter { name: &'static str, value: f64 },
    ConstraintSum { name: &'static str, sum: f64 },
    InducedTensorInvalid(Vec<Violation>),
    PartitionOverlap { species: usize },
    PartitionIncomplete { species: usize },
    PatternViolation { i: usize, j: usize, k: usize, value: f64 },
    EllMismatch { requested: usize, found: Option<usize> },
}

impl fmt::Display for FamilyError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyError::MixingWeightOutOfRange { lambda } => {
                write!(f, "mixing weight {lambda} outside [0, 1]")
            }
            FamilyError::SpeciesOutOfRange { index, m } => {
                write!(f, "species index {index} outside 1..={m}")
            }
            FamilyError::DuplicateFemale { index } => {
                write!(f, "species {index} listed as female twice")
            }
            FamilyError::FertilityPairInvalid { female, male } => {
                write!(f, "pair ({female},{male}) is not a female-male pair")
            }
            FamilyError::FertilityPairDuplicate { female, male } => {
                write!(f, "fertility for pair ({female},{male}) given twice")
            }
            FamilyError::FertilityPairMissing { female, male } => {
                write!(f, "fertility for pair ({female},{male}) missing")
            }
            FamilyError::FertilityRowLength { female, male, expected, got } => {
                write!(
                    f,
                    "fertility row ({female},{male}) has {got} outcomes, expected {expected}"
                )
            }
            FamilyError::FertilityNegativeEntry { female, male, k, value } => {
                write!(
                    f,
                    "fertility row ({female},{male}) outcome {k} is negative ({value})"
                )
            }
            FamilyError::FertilityNotDistribution { female, male, sum } => {
                write!(f, "fertility row ({female},{male}) sums to {sum}, not 1")
            }
            FamilyError::NegativeParameter { name, value } => {
                write!(f, "parameter {name} = {value} must be nonnegative")
            }
            FamilyError::ConstraintSum { name, sum } => {
                write!(f, "constraint {name} = 1 violated: got {sum}")
            }
            FamilyError::InducedTensorInvalid(v) => {
                write!(f, "induced tensor violates invariants ({} problems)", v.len())
            }
            FamilyError::PartitionOverlap { species } => {
                write!(f, "species {species} appears in two partition classes")
            }
            FamilyError::PartitionIncomplete { species } => {
                write!(f, "species {species} missing from the partition")
            }
            FamilyError::PatternViolation { i, j, k, value } => {
                write!(
                    f,
                    "sterile pair ({i},{j}) carries forbidden mass {value} at outcome {k}"
                )
            }
            FamilyError::EllMismatch { requested, found } => match found {
                Some(l) => write!(f, "tensor has {l} inheriting coordinates, not {requested}"),
                None => write!(
                    f,
                    "tensor has no leading inheriting block, requested {requested}"
                ),
            },
        }
    }
}

impl core::error::Error for FamilyError {}

fn tensor_3(pairs: &[(usize, usize, usize, f64)]) -> HeredityTensor {
    let m = 3;
    let mut e = vec![0.0; 27];
    for &(i, j, k, v) in pairs {
        e[(i * m + j) * m + k] = v;
        e[(j * m + i) * m + k] = v;
    }
    HeredityTensor::from_entries(m, e).expect("hand-built entries are valid")
}

/// The cyclic predator triple `x1' = x1^2 + 2 x1 x2` (and cyclically):
/// each species feeds on the next around the triangle.
pub fn v0() -> HeredityTensor {
    tensor_3(&[
        (0, 0, 0, 1.0),
        (0, 1, 0, 1.0),
        (1, 1, 1, 1.0),
        (1, 2, 1, 1.0),
        (2, 2, 2, 1.0),
        (0, 2, 2, 1.0),
    ])
}

/// Its non-inheriting counterpart `x1' = x1^2 + 2 x2 x3` (and cyclically):
/// every mixed pair reproduces into the coordinate absent from it.
pub fn v1() -> HeredityTensor {
    tensor_3(&[
        (0, 0, 0, 1.0),
        (1, 2, 0, 1.0),
        (1, 1, 1, 1.0),
        (0, 2, 1, 1.0),
        (2, 2, 2, 1.0),
        (0, 1, 2, 1.0),
    ])
}

/// Convex mix `lambda * v0 + (1 - lambda) * v1`.
pub fn v_lambda(lambda: f64) -> Result<HeredityTensor, FamilyError> {
    HeredityTensor::convex_combination(&v0(), &v1(), lambda).map_err(|e| match e {
        TensorError::MixingWeightOutOfRange { lambda } => {
            FamilyError::MixingWeightOutOfRange { lambda }
        }
        TensorError::DimensionMismatch { .. } => unreachable!("both operands are 3x3x3"),
    })
}

/// One fertility distribution: offspring outcome probabilities (length
/// m + 1, outcome 0 is the empty body) for a female-male pair.
#[derive(Clone, Debug)]
pub struct FertilityRow {
    pub female: usize,
    pub male: usize,
    pub distribution: Vec<f64>,
}

/// Two-sex operator on m species plus an empty-body coordinate 0.
/// Same-sex pairs and any pair touching the empty body produce the empty
/// body with certainty; each female-male pair needs a fertility row.
pub fn f_qso(
    m: usize,
    females: &[usize],
    fertility: &[FertilityRow],
) -> Result<HeredityTensor, FamilyError> {
    assert!(m >= 1, "at least one species");
    let n = m + 1;
    let mut is_female = vec![false; n];
    for &s in females {
        if s < 1 || s > m {
            return Err(FamilyError::SpeciesOutOfRange { index: s, m });
        }
        if is_female[s] {
            return Err(FamilyError::DuplicateFemale { index: s });
        }
        is_female[s] = true;
    }
    let mut have = vec![false; n * n];
    let mut e = vec![0.0; n * n * n];
    // Default every pair to the sterile outcome.
    for i in 0..n {
        for j in 0..n {
            e[(i * n + j) * n] = 1.0;
        }
    }
    for row in fertility {
        let (fe, ma) = (row.female, row.male);
        for idx in [fe, ma] {
            if idx < 1 || idx > m {
                return Err(FamilyError::SpeciesOutOfRange { index: idx, m });
            }
        }
        if !is_female[fe] || is_female[ma] {
            return Err(FamilyError::FertilityPairInvalid { female: fe, male: ma });
        }
        if have[fe * n + ma] {
            return Err(FamilyError::FertilityPairDuplicate { female: fe, male: ma });
        }
        have[fe * n + ma] = true;
        if row.distribution.len() != n {
            return Err(FamilyError::FertilityRowLength {
                female: fe,
                male: ma,
                expected: n,
                got: row.distribution.len(),
            });
        }
        let mut sum = 0.0;
        for (k, &v) in row.distribution.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(FamilyError::FertilityNegativeEntry {
                    female: fe,
                    male: ma,
                    k,
                    value: v,
                });
            }
            sum += v;
        }
        if libm::fabs(sum - 1.0) > 1e-12 {
            return Err(FamilyError::FertilityNotDistribution {
                female: fe,
                male: ma,
                sum,
            });
        }
        for k in 0..n {
            e[(fe * n + ma) * n + k] = row.distribution[k];
            e[(ma * n + fe) * n + k] = row.distribution[k];
        }
    }
    // Every fertile pair must be covered.
    for fe in 1..=m {
        if !is_female[fe] {
            continue;
        }
        for ma in 1..=m {
            if is_female[ma] {
                continue;
            }
            if !have[fe * n + ma] {
                return Err(FamilyError::FertilityPairMissing { female: fe, male: ma });
            }
        }
    }
    Ok(HeredityTensor::from_entries(n, e).expect("rows sum to 1 by construction"))
}

/// The six-parameter operator on S^2 that moves every pair's offspring
/// away from the pair: x' = alpha y^2 + c z^2 + 2yz, y' = a x^2 + d z^2
/// + 2xz, z' = b x^2 + beta y^2 + 2xy, with a+b = c+d = alpha+beta = 1.
pub fn strictly_non_volterra(
    a: f64,
    b: f64,
    c: f64,
    d: f64,
    alpha: f64,
    beta: f64,
) -> Result<HeredityTensor, FamilyError> {
    for (name, v) in [
        ("a", a),
        ("b", b),
        ("c", c),
        ("d", d),
        ("alpha", alpha),
        ("beta", beta),
    ] {
        if !v.is_finite() || v < 0.0 {
            return Err(FamilyError::NegativeParameter { name, value: v });
        }
    }
    for (name, sum) in [
        ("a+b", a + b),
        ("c+d", c + d),
        ("alpha+beta", alpha + beta),
    ] {
        if libm::fabs(sum - 1.0) > 1e-12 {
            return Err(FamilyError::ConstraintSum { name, sum });
        }
    }
    Ok(tensor_3(&[
        (1, 1, 0, alpha),
        (2, 2, 0, c),
        (1, 2, 0, 1.0),
        (0, 0, 1, a),
        (2, 2, 1, d),
        (0, 2, 1, 1.0),
        (0, 0, 2, b),
        (1, 1, 2, beta),
        (0, 1, 2, 1.0),
    ]))
}

/// Tensor induced by a matrix pair,
/// `P[i][j][k] = (a[i][k] b[j][k] + a[j][k] b[i][k]) / 2`, so the map
/// factors as `x'_k = (A x)_k (B x)_k`. The induced entries must form a
/// valid tensor; violations are reported entrywise.
pub fn separable(m: usize, a_mat: &[f64], b_mat: &[f64]) -> Result<HeredityTensor, FamilyError> {
    assert!(m >= 1);
    assert_eq!(a_mat.len(), m * m, "first factor must be m x m");
    assert_eq!(b_mat.len(), m * m, "second factor must be m x m");
    let mut e = vec![0.0; m * m * m];
    for i in 0..m {
        for j in 0..m {
            for k in 0..m {
                e[(i * m + j) * m + k] = 0.5
                    * (a_mat[i * m + k] * b_mat[j * m + k]
                        + a_mat[j * m + k] * b_mat[i * m + k]);
            }
        }
    }
    HeredityTensor::from_entries(m, e).map_err(FamilyError::InducedTensorInvalid)
}

/// A tensor validated against a sterility partition: species in the same
/// class (and anything paired with the empty body, coordinate 0) must
/// produce the empty body with certainty.
#[derive(Clone, Debug)]
pub struct XiQso {
    pub tensor: HeredityTensor,
    pub partition: Vec<Vec<usize>>,
}

pub fn xi_qso(
    m: usize,
    partition: &[Vec<usize>],
    entries: Vec<f64>,
) -> Result<XiQso, FamilyError> {
    assert!(m >= 1, "at least one species");
    let n = m + 1;
    // class_of[s] for species 1..=m.
    let mut class_of = vec![usize::MAX; n];
    for (c, class) in partition.iter().enumerate() {
        for &s in class {
            if s < 1 || s > m {
                return Err(FamilyError::SpeciesOutOfRange { index: s, m });
            }
            if class_of[s] != usize::MAX {
                return Err(FamilyError::PartitionOverlap { species: s });
            }
            class_of[s] = c;
        }
    }
    for s in 1..=m {
        if class_of[s] == usize::MAX {
            return Err(FamilyError::PartitionIncomplete { species: s });
        }
    }
    let tensor =
        HeredityTensor::from_entries(n, entries).map_err(FamilyError::InducedTensorInvalid)?;
    for i in 0..n {
        for j in 0..n {
            let sterile = i == 0 || j == 0 || class_of[i] == class_of[j];
            if !sterile {
                continue;
            }
            let head = tensor.get(i, j, 0);
            if libm::fabs(head - 1.0) > ZERO_TOL {
                return Err(FamilyError::PatternViolation { i, j, k: 0, value: head });
            }
            for k in 1..n {
                let v = tensor.get(i, j, k);
                if libm::fabs(v) > ZERO_TOL {
                    return Err(FamilyError::PatternViolation { i, j, k, value: v });
                }
            }
        }
    }
    let partition = partition
        .iter()
        .map(|c| {
            let mut c = c.clone();
            c.sort_unstable();
            c
        })
        .collect();
    Ok(XiQso { tensor, partition })
}

/// Validating constructor for a tensor whose first `ell` coordinates keep
/// the inheritance pattern while the rest break it.
pub fn ell_volterra(
    m: usize,
    entries: Vec<f64>,
    ell: usize,
) -> Result<HeredityTensor, FamilyError> {
    let tensor =
        HeredityTensor::from_entries(m, entries).map_err(FamilyError::InducedTensorInvalid)?;
    let found = tensor.classify(None, ZERO_TOL).ell;
    if found != Some(ell) {
        return Err(FamilyError::EllMismatch { requested: ell, found });
    }
    Ok(tensor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sample;
    use crate::simplex::{barycenter, vertex, Normalization, SimplexPoint};

    fn point(coords: &[f64]) -> SimplexPoint {
        SimplexPoint::new(coords.to_vec(), Normalization::Renormalize).unwrap()
    }

    #[test]
    fn named_pair_polynomials() {
        let x = point(&[0.5, 0.3, 0.2]);
        let y = v0().apply(&x).unwrap();
        assert!((y.coords()[0] - 0.55).abs() < 1e-15);
        assert!((y.coords()[1] - 0.21).abs() < 1e-15);
        assert!((y.coords()[2] - 0.24).abs() < 1e-15);

        let y = v1().apply(&x).unwrap();
        assert!((y.coords()[0] - 0.37).abs() < 1e-15);
        assert!((y.coords()[1] - 0.29).abs() < 1e-15);
        assert!((y.coords()[2] - 0.34).abs() < 1e-15);
    }

    #[test]
    fn named_pair_structure() {
        assert!(v0().validate().is_empty());
        assert!(v1().validate().is_empty());
        let r = v0().classify(None, ZERO_TOL);
        assert!(r.is_volterra);
        assert_eq!(r.ell, Some(3));
        assert!(!v1().classify(None, ZERO_TOL).is_volterra);

        let b = barycenter(3);
        assert!(v0().apply(&b).unwrap().sup_distance(&b) < 1e-15);
        assert!(v1().apply(&b).unwrap().sup_distance(&b) < 1e-15);
        let e1 = vertex(3, 0);
        assert_eq!(v1().apply(&e1).unwrap().sup_distance(&e1), 0.0);
    }

    #[test]
    fn mix_endpoints_and_interior() {
        assert_eq!(v_lambda(1.0).unwrap(), v0());
        assert_eq!(v_lambda(0.0).unwrap(), v1());
        let mix = v_lambda(0.5).unwrap();
        assert!((mix.get(0, 0, 0) - 1.0).abs() < 1e-15);
        assert!(mix.validate().is_empty());
        let mix = v_lambda(0.3).unwrap();
        assert!(!mix.classify(None, ZERO_TOL).is_volterra);
        assert!(matches!(
            v_lambda(1.5),
            Err(FamilyError::MixingWeightOutOfRange { .. })
        ));
    }

    #[test]
    fn two_sex_hand_example() {
        let p = f_qso(
            2,
            &[1],
            &[FertilityRow {
                female: 1,
                male: 2,
                distribution: vec![1.0 / 3.0; 3],
            }],
        )
        .unwrap();
        assert_eq!(p.m(), 3);
        let y = p.apply(&point(&[0.0, 0.5, 0.5])).unwrap();
        assert!((y.coords()[0] - 2.0 / 3.0).abs() < 1e-15);
        assert!((y.coords()[1] - 1.0 / 6.0).abs() < 1e-15);
        assert!((y.coords()[2] - 1.0 / 6.0).abs() < 1e-15);

        // Empty body absorbs.
        let e0 = vertex(3, 0);
        assert_eq!(p.apply(&e0).unwrap().sup_distance(&e0), 0.0);

        let r = p.classify(Some(&[1]), ZERO_TOL);
        assert!(!r.is_volterra);
        let w = r.f_qso.expect("pattern must match the construction");
        assert_eq!(w.females, vec![1]);
        assert_eq!(w.species, 2);
    }

    #[test]
    fn single_species_operator_is_constant() {
        for females in [&[][..], &[1][..]] {
            let p = f_qso(1, females, &[]).unwrap();
            let mut rng = sample::rng(51);
            for _ in 0..10 {
                let x = sample::random_simplex_point(&mut rng, 2);
                let y = p.apply(&x).unwrap();
                assert_eq!(y.coords(), &[1.0, 0.0]);
            }
        }
    }

    #[test]
    fn two_sex_validation_errors() {
        let dist = vec![1.0 / 3.0; 3];
        let row = |f: usize, m_: usize, d: Vec<f64>| FertilityRow {
            female: f,
            male: m_,
            distribution: d,
        };
        assert!(matches!(
            f_qso(2, &[3], &[]),
            Err(FamilyError::SpeciesOutOfRange { index: 3, .. })
        ));
        assert!(matches!(
            f_qso(2, &[1, 1], &[]),
            Err(FamilyError::DuplicateFemale { index: 1 })
        ));
        assert!(matches!(
            f_qso(2, &[1], &[]),
            Err(FamilyError::FertilityPairMissing { female: 1, male: 2 })
        ));
        assert!(matches!(
            f_qso(2, &[1], &[row(2, 1, dist.clone())]),
            Err(FamilyError::FertilityPairInvalid { female: 2, male: 1 })
        ));
        assert!(matches!(
            f_qso(
                2,
                &[1],
                &[row(1, 2, dist.clone()), row(1, 2, dist.clone())]
            ),
            Err(FamilyError::FertilityPairDuplicate { .. })
        ));
        assert!(matches!(
            f_qso(2, &[1], &[row(1, 2, vec![0.5, 0.5])]),
            Err(FamilyError::FertilityRowLength { expected: 3, got: 2, .. })
        ));
        assert!(matches!(
            f_qso(2, &[1], &[row(1, 2, vec![0.5, 0.2, 0.2])]),
            Err(FamilyError::FertilityNotDistribution { .. })
        ));
        assert!(matches!(
            f_qso(2, &[1], &[row(1, 2, vec![1.2, -0.1, -0.1])]),
            Err(FamilyError::FertilityNegativeEntry { k: 1, .. })
        ));
    }

    #[test]
    fn displaced_pair_hand_example() {
        let p = strictly_non_volterra(0.3, 0.7, 0.6, 0.4, 0.2, 0.8).unwrap();
        let y = p.apply(&point(&[0.5, 0.3, 0.2])).unwrap();
        assert!((y.coords()[0] - 0.162).abs() < 1e-15);
        assert!((y.coords()[1] - 0.291).abs() < 1e-15);
        assert!((y.coords()[2] - 0.547).abs() < 1e-15);
        assert!(p.classify(None, ZERO_TOL).is_strictly_non_volterra);

        // First vertex lands at (0, a, b).
        let y = p.apply(&vertex(3, 0)).unwrap();
        assert_eq!(y.coords(), &[0.0, 0.3, 0.7]);
    }

    #[test]
    fn displaced_pair_vertex_two_cycle() {
        let p = strictly_non_volterra(1.0, 0.0, 1.0, 0.0, 1.0, 0.0).unwrap();
        let e = |k: usize| vertex(3, k);
        assert_eq!(p.apply(&e(0)).unwrap().sup_distance(&e(1)), 0.0);
        assert_eq!(p.apply(&e(1)).unwrap().sup_distance(&e(0)), 0.0);
        assert_eq!(p.apply(&e(2)).unwrap().sup_distance(&e(0)), 0.0);
    }

    #[test]
    fn displaced_pair_parameter_validation() {
        assert!(matches!(
            strictly_non_volterra(0.5, 0.6, 0.5, 0.5, 0.5, 0.5),
            Err(FamilyError::ConstraintSum { name: "a+b", .. })
        ));
        assert!(matches!(
            strictly_non_volterra(-0.1, 1.1, 0.5, 0.5, 0.5, 0.5),
            Err(FamilyError::NegativeParameter { name: "a", .. })
        ));
        // Barycenter fixed in the symmetric case.
        let p = strictly_non_volterra(0.5, 0.5, 0.5, 0.5, 0.5, 0.5).unwrap();
        let b = barycenter(3);
        assert!(p.apply(&b).unwrap().sup_distance(&b) < 1e-15);
    }

    #[test]
    fn factored_operator_identity_factor_gives_inheritance() {
        // A = I forces mass to stay inside each pair.
        let m = 3;
        let mut a = vec![0.0; 9];
        for i in 0..m {
            a[i * m + i] = 1.0;
        }
        let mut b = vec![0.0; 9];
        for i in 0..m {
            for j in 0..m {
                b[i * m + j] = if i == j {
                    1.0
                } else if i < j {
                    1.5
                } else {
                    0.5
                };
            }
        }
        let p = separable(m, &a, &b).unwrap();
        assert!(p.classify(None, ZERO_TOL).is_volterra);
        assert!(p.classify(None, ZERO_TOL).separable_witness.is_some());
    }

    #[test]
    fn factored_operator_matches_product_form() {
        let m = 3;
        let a = vec![1.0; 9];
        let b = vec![1.0 / 3.0; 9];
        let p = separable(m, &a, &b).unwrap();
        // All entries 1/3: the uniform tensor.
        for v in p.entries() {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut rng = sample::rng(52);
        for _ in 0..10 {
            let x = sample::random_simplex_point(&mut rng, m);
            let y = p.apply(&x).unwrap();
            for k in 0..m {
                let ax: f64 = (0..m).map(|i| a[i * m + k] * x.coords()[i]).sum();
                let bx: f64 = (0..m).map(|i| b[i * m + k] * x.coords()[i]).sum();
                assert!((y.coords()[k] - ax * bx).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn factored_operator_rejects_invalid_products() {
        // A = B = I induces zero rows off the diagonal.
        let m = 3;
        let mut id = vec![0.0; 9];
        for i in 0..m {
            id[i * m + i] = 1.0;
        }
        match separable(m, &id, &id) {
            Err(FamilyError::InducedTensorInvalid(v)) => {
                assert!(v.iter().any(|x| matches!(x, Violation::RowSum { .. })));
            }
            other => panic!("expected induced violations, got {other:?}"),
        }
    }

    #[test]
    fn partitioned_sterility_accepts_matching_pattern() {
        // Species {1,2} vs {3}; fertile pairs (1,3) and (2,3).
        let m = 3;
        let n = 4;
        let mut e = vec![0.0; n * n * n];
        let mut sterile = |i: usize, j: usize| {
            e[(i * n + j) * n] = 1.0;
            e[(j * n + i) * n] = 1.0;
        };
        for i in 0..n {
            sterile(0, i);
        }
        sterile(1, 1);
        sterile(1, 2);
        sterile(2, 2);
        sterile(3, 3);
        for (i, j) in [(1usize, 3usize), (2, 3)] {
            for k in 0..n {
                e[(i * n + j) * n + k] = 0.25;
                e[(j * n + i) * n + k] = 0.25;
            }
        }
        let x = xi_qso(m, &[vec![1, 2], vec![3]], e.clone()).unwrap();
        assert_eq!(x.partition, vec![vec![1, 2], vec![3]]);
        assert!(x.tensor.validate().is_empty());

        // Moving mass onto a sterile pair breaks the pattern.
        let mut bad = e;
        bad[(1 * n + 2) * n] = 0.75;
        bad[(2 * n + 1) * n] = 0.75;
        bad[(1 * n + 2) * n + 3] = 0.25;
        bad[(2 * n + 1) * n + 3] = 0.25;
        assert!(matches!(
            xi_qso(m, &[vec![1, 2], vec![3]], bad),
            Err(FamilyError::PatternViolation { i: 1, j: 2, .. })
        ));
    }

    #[test]
    fn partitioned_sterility_covers_two_sex_case() {
        let p = f_qso(
            2,
            &[1],
            &[FertilityRow {
                female: 1,
                male: 2,
                distribution: vec![0.2, 0.3, 0.5],
            }],
        )
        .unwrap();
        let x = xi_qso(2, &[vec![1], vec![2]], p.entries().to_vec()).unwrap();
        assert_eq!(x.tensor, p);
    }

    #[test]
    fn partition_validation_errors() {
        let e = vec![0.0; 64];
        assert!(matches!(
            xi_qso(3, &[vec![1, 2], vec![2, 3]], e.clone()),
            Err(FamilyError::PartitionOverlap { species: 2 })
        ));
        assert!(matches!(
            xi_qso(3, &[vec![1]], e.clone()),
            Err(FamilyError::PartitionIncomplete { species: 2 })
        ));
        assert!(matches!(
            xi_qso(3, &[vec![0, 1, 2, 3]], e.clone()),
            Err(FamilyError::SpeciesOutOfRange { index: 0, .. })
        ));
        assert!(matches!(
            xi_qso(3, &[vec![1, 2, 3, 4]], e),
            Err(FamilyError::SpeciesOutOfRange { index: 4, .. })
        ));
    }

    #[test]
    fn leading_inheritance_block_validated() {
        // v0 with its first diagonal row spread over all outcomes: only
        // coordinate 0 keeps the inheriting pattern.
        let mut e = v0().entries().to_vec();
        let m = 3;
        e[(0 * m + 0) * m] = 0.6;
        e[(0 * m + 0) * m + 1] = 0.2;
        e[(0 * m + 0) * m + 2] = 0.2;
        assert!(ell_volterra(m, e.clone(), 1).is_ok());
        assert!(matches!(
            ell_volterra(m, e, 2),
            Err(FamilyError::EllMismatch { requested: 2, found: Some(1) })
        ));
        assert!(matches!(
            ell_volterra(m, v1().entries().to_vec(), 1),
            Err(FamilyError::EllMismatch { requested: 1, found: None })
        ));
        // A fully inheriting tensor is the m-block case.
        assert!(ell_volterra(3, v0().entries().to_vec(), 3).is_ok());
    }
}
