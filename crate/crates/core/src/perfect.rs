//! Perfect sequences, non-perfect profiles, the faithful reordering and the
//! dual-basis decomposition of a point sequence.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::constants::{alpha_c, solve_p_c};
use crate::error::{domain, Error, Result};
use crate::geometry::{dot, norm, Subspace, UnitVector, UNIT_TOLERANCE};

/// Smallest Gram eigenvalue accepted by [`dual_basis`].
pub const RANK_THRESHOLD: f64 = 1e-8;

/// Projection-norm bound alpha sqrt(l) / sqrt(k).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerfectnessRule {
    pub alpha: f64,
    pub ell: usize,
    pub k: usize,
}

impl PerfectnessRule {
    pub fn new(alpha: f64, ell: usize, k: usize) -> Self {
        PerfectnessRule { alpha, ell, k }
    }

    /// Rule with alpha = alpha_C.
    pub fn for_ratio(c_ratio: f64, ell: usize, k: usize) -> Result<Self> {
        let p_c = solve_p_c(c_ratio)?;
        Ok(PerfectnessRule::new(alpha_c(c_ratio, p_c), ell, k))
    }

    pub fn bound(&self) -> f64 {
        self.alpha * (self.ell as f64).sqrt() / (self.k as f64).sqrt()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerfectVerdict {
    pub is_perfect: bool,
    /// |pi_[i](x_{i+1})| for i = 1..r-1.
    pub per_index_norms: Vec<f64>,
    pub bound: f64,
}

fn check_unit<V: AsRef<[f64]>>(seq: &[V]) -> Result<()> {
    for (i, x) in seq.iter().enumerate() {
        let n = norm(x.as_ref());
        if (n - 1.0).abs() > UNIT_TOLERANCE {
            return domain(format!("point {i} has norm {n}"));
        }
    }
    Ok(())
}

/// |pi_[i](x_{i+1})| for i = 1..r-1, where pi_[i] projects onto span(x_1..x_i).
pub fn prefix_projection_norms<V: AsRef<[f64]>>(seq: &[V]) -> Vec<f64> {
    let Some(first) = seq.first() else {
        return Vec::new();
    };
    let mut sub = Subspace::empty(first.as_ref().len());
    sub.extend(first.as_ref(), 0.0);
    seq[1..]
        .iter()
        .map(|x| {
            let h = sub.coefficients(x.as_ref());
            sub.extend(x.as_ref(), 1e-13);
            norm(&h)
        })
        .collect()
}

pub fn is_perfect<V: AsRef<[f64]>>(seq: &[V], rule: &PerfectnessRule) -> Result<PerfectVerdict> {
    if seq.is_empty() {
        return domain("a sequence needs at least one point");
    }
    check_unit(seq)?;
    let bound = rule.bound();
    let per_index_norms = prefix_projection_norms(seq);
    Ok(PerfectVerdict {
        is_perfect: per_index_norms.iter().all(|&h| h <= bound),
        per_index_norms,
        bound,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NonPerfectProfile {
    /// Number of violating positions.
    pub index: usize,
    /// 1-based positions i in {2..r} with |pi_[i-1](x_i)| above the bound.
    pub profile: Vec<usize>,
    /// The violations are exactly the last `index` positions.
    pub faithful: bool,
}

pub fn non_perfect_index<V: AsRef<[f64]>>(seq: &[V], rule: &PerfectnessRule) -> Result<NonPerfectProfile> {
    let verdict = is_perfect(seq, rule)?;
    let profile: Vec<usize> = verdict
        .per_index_norms
        .iter()
        .enumerate()
        .filter(|(_, &h)| h > verdict.bound)
        .map(|(i, _)| i + 2)
        .collect();
    let r = seq.len();
    let j = profile.len();
    let faithful = profile.iter().copied().eq(r - j + 1..=r);
    Ok(NonPerfectProfile { index: j, profile, faithful })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reordering {
    /// `permutation[t]` is the 0-based input position placed at output position t.
    pub permutation: Vec<usize>,
    pub sequence: Vec<UnitVector>,
}

/// Moves the non-perfect positions, in order, behind the perfect ones.
pub fn faithful_reorder(seq: &[UnitVector], rule: &PerfectnessRule) -> Result<Reordering> {
    let prof = non_perfect_index(seq, rule)?;
    let bad: Vec<usize> = prof.profile.iter().map(|&i| i - 1).collect();
    let mut permutation: Vec<usize> = (0..seq.len()).filter(|i| !bad.contains(i)).collect();
    permutation.extend(&bad);
    let sequence = permutation.iter().map(|&i| seq[i].clone()).collect();
    Ok(Reordering { permutation, sequence })
}

/// X, its dual basis V = X (X^T X)^{-1}, the Gram-Schmidt basis e and the spectra.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceDecomposition {
    pub x: DMatrix<f64>,
    pub v: DMatrix<f64>,
    pub gram: DMatrix<f64>,
    pub gram_inv: DMatrix<f64>,
    pub e_basis: Vec<Vec<f64>>,
    /// |x_i - pi_[i-1](x_i)| from the Gram-Schmidt pass.
    pub gs_residuals: Vec<f64>,
    /// Eigenvalues of X^T X, descending.
    pub lambda: Vec<f64>,
    /// Eigenvalues of V^T V, ascending.
    pub mu: Vec<f64>,
}

impl SequenceDecomposition {
    pub fn r(&self) -> usize {
        self.x.ncols()
    }
}

fn sorted_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(m.clone()).eigenvalues.iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

pub fn dual_basis<V: AsRef<[f64]>>(seq: &[V]) -> Result<SequenceDecomposition> {
    if seq.is_empty() {
        return domain("a sequence needs at least one point");
    }
    let rows = seq[0].as_ref().len();
    if seq.iter().any(|x| x.as_ref().len() != rows) {
        return domain("sequence points live in different dimensions");
    }
    let x = DMatrix::from_fn(rows, seq.len(), |i, j| seq[j].as_ref()[i]);
    let gram = x.transpose() * &x;
    let ascending = sorted_eigenvalues(&gram);
    if ascending[0] <= RANK_THRESHOLD {
        return Err(Error::Singular { min_eigenvalue: ascending[0] });
    }
    let gram_inv = gram
        .clone()
        .cholesky()
        .ok_or(Error::Singular { min_eigenvalue: ascending[0] })?
        .inverse();
    let v = &x * &gram_inv;
    let mu = sorted_eigenvalues(&(v.transpose() * &v));
    let mut sub = Subspace::empty(rows);
    let mut gs_residuals = Vec::with_capacity(seq.len());
    for s in seq {
        let (res, _) = sub.extend(s.as_ref(), 0.0);
        gs_residuals.push(res);
    }
    Ok(SequenceDecomposition {
        x,
        v,
        gram,
        gram_inv,
        e_basis: sub.basis().to_vec(),
        gs_residuals,
        lambda: ascending.into_iter().rev().collect(),
        mu,
    })
}

/// Coefficients a with pi(y) = sum a_i v_i, computed as (V^T V)^{-1} V^T pi(y).
pub fn corner_coordinates(dec: &SequenceDecomposition, y: &[f64]) -> Vec<f64> {
    let mut py = DVector::zeros(y.len());
    for e in &dec.e_basis {
        let h = dot(e, y);
        py.iter_mut().zip(e).for_each(|(p, ei)| *p += h * ei);
    }
    let vt_py = dec.v.transpose() * py;
    (&dec.gram * vt_py).iter().copied().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralDiagnostics {
    pub max_lambda_deviation: f64,
    /// ||X^T X - I||_F^2 from the matrix entries.
    pub gram_frobenius: f64,
    /// sum_{i != j} <x_i, x_j>^2 from the points.
    pub gram_offdiagonal: f64,
    /// sum (lambda_i - 1)^2.
    pub gram_spectral: f64,
    /// ||V^T V - I||_F^2 from the matrix entries.
    pub dual_frobenius: f64,
    /// sum (mu_i - 1)^2.
    pub dual_spectral: f64,
    /// sum_i |pi_{V_r(i)}(v_i)|^2, V_r(i) = span of the other dual vectors.
    pub dual_cross_projection: f64,
}

/// Squared norm of the projection of `target` onto span{columns j != skip}.
fn projection_onto_others(cols: &DMatrix<f64>, skip: usize, target: &DVector<f64>) -> f64 {
    let others: Vec<usize> = (0..cols.ncols()).filter(|&j| j != skip).collect();
    if others.is_empty() {
        return 0.0;
    }
    let m = DMatrix::from_fn(others.len(), others.len(), |a, b| {
        cols.column(others[a]).dot(&cols.column(others[b]))
    });
    let w = DVector::from_fn(others.len(), |a, _| cols.column(others[a]).dot(target));
    match m.cholesky() {
        Some(ch) => w.dot(&ch.solve(&w)),
        None => f64::NAN,
    }
}

pub fn spectral_diagnostics(dec: &SequenceDecomposition) -> SpectralDiagnostics {
    let r = dec.r();
    let id = DMatrix::<f64>::identity(r, r);
    let mut offdiag = 0.0;
    for i in 0..r {
        for j in 0..r {
            if i != j {
                let g = dot(dec.x.column(i).as_slice(), dec.x.column(j).as_slice());
                offdiag += g * g;
            }
        }
    }
    let vtv = dec.v.transpose() * &dec.v;
    SpectralDiagnostics {
        max_lambda_deviation: dec.lambda.iter().map(|l| (l - 1.0).abs()).fold(0.0, f64::max),
        gram_frobenius: (&dec.gram - &id).norm_squared(),
        gram_offdiagonal: offdiag,
        gram_spectral: dec.lambda.iter().map(|l| (l - 1.0).powi(2)).sum(),
        dual_frobenius: (vtv - &id).norm_squared(),
        dual_spectral: dec.mu.iter().map(|m| (m - 1.0).powi(2)).sum(),
        dual_cross_projection: (0..r)
            .map(|i| projection_onto_others(&dec.v, i, &dec.v.column(i).into_owned()))
            .sum(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Alignment {
    /// <v_i, e_i>.
    pub v_dot_e: f64,
    /// |pi_{V_r(i)}(e_i)|.
    pub residual_projection: f64,
    /// 1 / |x_i - pi_[i-1](x_i)|.
    pub expected_v_dot_e: f64,
}

pub fn basis_alignment(dec: &SequenceDecomposition) -> Vec<Alignment> {
    (0..dec.r())
        .map(|i| {
            let e = DVector::from_column_slice(&dec.e_basis[i]);
            Alignment {
                v_dot_e: dec.v.column(i).dot(&e),
                residual_projection: projection_onto_others(&dec.v, i, &e).max(0.0).sqrt(),
                expected_v_dot_e: 1.0 / dec.gs_residuals[i],
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::sample_unit_vector;
    use crate::mc::substream;
    use proptest::prelude::*;

    fn pair(rho: f64) -> Vec<UnitVector> {
        vec![
            UnitVector::new(vec![1.0, 0.0, 0.0]).unwrap(),
            UnitVector::new(vec![rho, (1.0 - rho * rho).sqrt(), 0.0]).unwrap(),
        ]
    }

    fn random_seq(k: usize, r: usize, seed: u64) -> Vec<UnitVector> {
        let mut rng = substream(seed, 0, 0);
        (0..r).map(|_| sample_unit_vector(k, &mut rng).unwrap()).collect()
    }

    #[test]
    fn orthonormal_sequence() {
        let seq: Vec<UnitVector> = (0..4).map(|i| UnitVector::basis(6, i)).collect();
        let rule = PerfectnessRule::new(1.0, 1, 100);
        let v = is_perfect(&seq, &rule).unwrap();
        assert!(v.is_perfect && v.per_index_norms.iter().all(|&h| h == 0.0));
        let dec = dual_basis(&seq).unwrap();
        assert!((&dec.v - &dec.x).norm() < 1e-14);
        assert!(dec.lambda.iter().chain(&dec.mu).all(|&l| (l - 1.0).abs() < 1e-14));
        let d = spectral_diagnostics(&dec);
        assert!(d.gram_frobenius < 1e-28 && d.dual_frobenius < 1e-28 && d.dual_cross_projection < 1e-28);
        for a in basis_alignment(&dec) {
            assert!((a.v_dot_e - 1.0).abs() < 1e-14 && a.residual_projection < 1e-14);
        }
    }

    #[test]
    fn duplicate_point() {
        let mut seq = random_seq(50, 4, 1);
        let rule = PerfectnessRule::new(5.0, 1, 50);
        let dup = seq[0].clone();
        seq.insert(2, dup.clone());
        let prof = non_perfect_index(&seq, &rule).unwrap();
        assert_eq!(prof.profile, vec![3]);
        assert!(!prof.faithful);
        seq.remove(2);
        seq.push(dup);
        let prof = non_perfect_index(&seq, &rule).unwrap();
        assert_eq!(prof.profile, vec![5]);
        assert!(prof.faithful);
        assert!(matches!(dual_basis(&seq), Err(Error::Singular { .. })));
    }

    #[test]
    fn singleton_and_non_unit() {
        let rule = PerfectnessRule::new(0.0, 1, 10);
        assert!(is_perfect(&[UnitVector::basis(3, 0)], &rule).unwrap().is_perfect);
        assert!(is_perfect(&[vec![1.0, 1.0]], &rule).is_err());
    }

    #[test]
    fn reorder_moves_violations_to_end() {
        // x2 = x1 violates at position 2; the rest are orthogonal.
        let seq = vec![
            UnitVector::basis(5, 0),
            UnitVector::basis(5, 0),
            UnitVector::basis(5, 1),
            UnitVector::basis(5, 2),
        ];
        let rule = PerfectnessRule::new(1.0, 1, 100);
        assert_eq!(non_perfect_index(&seq, &rule).unwrap().profile, vec![2]);
        let out = faithful_reorder(&seq, &rule).unwrap();
        assert_eq!(out.permutation, vec![0, 2, 3, 1]);
        let prof = non_perfect_index(&out.sequence, &rule).unwrap();
        assert_eq!(prof.profile, vec![4]);
        assert!(prof.faithful);
        let again = faithful_reorder(&out.sequence, &rule).unwrap();
        assert_eq!(again.permutation, vec![0, 1, 2, 3]);
        let faithful_profile = NonPerfectProfile { index: 2, profile: vec![3, 4], faithful: true };
        assert_eq!(faithful_profile.faithful, (3..=4).eq(faithful_profile.profile.iter().copied()));
    }

    #[test]
    fn two_point_closed_forms() {
        for &rho in &[0.1, -0.35, 0.8] {
            let dec = dual_basis(&pair(rho)).unwrap();
            assert!((dec.lambda[0] - (1.0 + rho.abs())).abs() < 1e-12);
            assert!((dec.lambda[1] - (1.0 - rho.abs())).abs() < 1e-12);
            for i in 0..2 {
                let n2 = dec.v.column(i).norm_squared();
                assert!((n2 - 1.0 / (1.0 - rho * rho)).abs() < 1e-12);
            }
            let al = basis_alignment(&dec);
            assert!((al[1].v_dot_e - 1.0 / (1.0 - rho * rho).sqrt()).abs() < 1e-12);
        }
        let d = spectral_diagnostics(&dual_basis(&pair(0.1)).unwrap());
        assert!((d.gram_frobenius - 0.02).abs() < 1e-14);
    }

    #[test]
    fn decomposition_invariants_on_random_sequence() {
        let seq = random_seq(500, 20, 3);
        let rule = PerfectnessRule::for_ratio(2.0, 10, 500).unwrap();
        assert!(is_perfect(&seq, &rule).unwrap().is_perfect);
        let dec = dual_basis(&seq).unwrap();
        let vtx = dec.v.transpose() * &dec.x;
        assert!((vtx - DMatrix::<f64>::identity(20, 20)).abs().max() < 1e-9);
        for (m, l) in dec.mu.iter().zip(&dec.lambda) {
            assert!((m - 1.0 / l).abs() < 1e-9);
        }
        for (i, e) in dec.e_basis.iter().enumerate() {
            assert!(dot(e, seq[i].coords()) > 0.0);
            for (j, f) in dec.e_basis.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot(e, f) - want).abs() < 1e-10);
            }
        }
        let d = spectral_diagnostics(&dec);
        assert!((d.gram_frobenius - d.gram_offdiagonal).abs() < 1e-9);
        assert!((d.gram_frobenius - d.gram_spectral).abs() < 1e-9);
        assert!((d.dual_frobenius - d.dual_spectral).abs() < 1e-9);
        for a in basis_alignment(&dec) {
            assert!((a.v_dot_e - a.expected_v_dot_e).abs() < 1e-9);
        }
    }

    #[test]
    fn corner_coordinates_are_inner_products() {
        let seq = random_seq(60, 5, 4);
        let dec = dual_basis(&seq).unwrap();
        let mut rng = substream(5, 0, 0);
        for _ in 0..50 {
            let y = sample_unit_vector(60, &mut rng).unwrap();
            let a = corner_coordinates(&dec, y.coords());
            for (ai, x) in a.iter().zip(&seq) {
                assert!((ai - x.dot(&y)).abs() < 1e-12);
            }
        }
        let a = corner_coordinates(&dec, seq[2].coords());
        assert!((a[2] - 1.0).abs() < 1e-12);
        // A vector orthogonal to the span has zero coordinates.
        let mut sub = Subspace::span(&seq, 1e-12).unwrap();
        let probe = sample_unit_vector(60, &mut rng).unwrap();
        let (_, added) = sub.extend(probe.coords(), 1e-12);
        assert!(added);
        let orth = sub.basis().last().unwrap().clone();
        assert!(corner_coordinates(&dec, &orth).iter().all(|a| a.abs() < 1e-10));
    }

    #[test]
    fn alignment_excess_scales_inversely_with_dimension() {
        let mean_excess = |k: usize| {
            let seeds = 40;
            let total: f64 = (0..seeds)
                .map(|s| {
                    let dec = dual_basis(&random_seq(k, 6, 100 + s)).unwrap();
                    basis_alignment(&dec).iter().map(|a| a.v_dot_e - 1.0).sum::<f64>()
                })
                .sum();
            total / (seeds as f64 * 6.0)
        };
        let ratio = mean_excess(10_000) / mean_excess(40_000);
        assert!((2.0..=6.0).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(48))]

        #[test]
        fn prefixes_of_perfect_sequences_are_perfect(seed in 0u64..1000, alpha in 0.5f64..4.0) {
            let seq = random_seq(40, 6, seed);
            let rule = PerfectnessRule::new(alpha, 1, 40);
            if is_perfect(&seq, &rule).unwrap().is_perfect {
                for t in 1..=seq.len() {
                    prop_assert!(is_perfect(&seq[..t], &rule).unwrap().is_perfect);
                }
            }
        }

        #[test]
        fn reorder_is_faithful_permutation(seed in 0u64..1000, alpha in 0.3f64..2.0) {
            let seq = random_seq(30, 6, seed);
            let rule = PerfectnessRule::new(alpha, 1, 30);
            let before = non_perfect_index(&seq, &rule).unwrap();
            let out = faithful_reorder(&seq, &rule).unwrap();
            let mut perm = out.permutation.clone();
            perm.sort_unstable();
            prop_assert_eq!(perm, (0..6).collect::<Vec<_>>());
            let after = non_perfect_index(&out.sequence, &rule).unwrap();
            prop_assert!(after.faithful);
            prop_assert_eq!(after.index, before.index);
            // Idempotent on the profile structure.
            let twice = faithful_reorder(&out.sequence, &rule).unwrap();
            prop_assert_eq!(non_perfect_index(&twice.sequence, &rule).unwrap(), after);
            // Same multiset of pairwise inner products.
            let mut a: Vec<f64> = Vec::new();
            let mut b: Vec<f64> = Vec::new();
            for i in 0..6 { for j in i + 1..6 {
                a.push(seq[i].dot(&seq[j]));
                b.push(out.sequence[i].dot(&out.sequence[j]));
            }}
            a.sort_by(f64::total_cmp);
            b.sort_by(f64::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
