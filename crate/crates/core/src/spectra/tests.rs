use faer::Mat;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::lattice::GridSpec;
use crate::operator::{assemble_dense, birman_schwinger, box_localized_resolvent, BoxSpec};
use crate::potential::PotentialSpec;
use crate::symbol::ModelParams;

fn random_matrix(n: usize, rng: &mut impl Rng) -> Mat<Complex64> {
    Mat::from_fn(n, n, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
}

fn random_hermitian(n: usize, rng: &mut impl Rng) -> Mat<Complex64> {
    let a = random_matrix(n, rng);
    Mat::from_fn(n, n, |i, j| 0.5 * (a[(i, j)] + a[(j, i)].conj()))
}

fn sum(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)] + b[(i, j)])
}

fn svals(a: &Mat<Complex64>) -> Vec<f64> {
    singular_values(a).unwrap().values
}

#[test]
fn count_examples() {
    assert_eq!(count_above(&[5.0, 3.0, 3.0, 1.0], 2.0).unwrap(), 3);
    assert_eq!(count_above(&[5.0, 3.0, 3.0, 1.0], 3.0).unwrap(), 1);
    assert_eq!(count_above(&[2.0], 2.0).unwrap(), 0);
    assert_eq!(count_above(&[2.0 * (1.0 + 1e-14)], 2.0).unwrap(), 0);
    assert_eq!(count_above(&[], 1.0).unwrap(), 0);
    assert!(count_above(&[1.0], 0.0).is_err());
    assert!(count_above(&[1.0], f64::NAN).is_err());
    assert_eq!(n_plus(&[2.0, -3.0, 0.5, -0.2], 0.4).unwrap(), 2);
    assert_eq!(n_minus(&[2.0, -3.0, 0.5, -0.2], 0.4).unwrap(), 1);
    assert_eq!(n_minus(&[2.0, -3.0, 0.5, -0.2], 0.1).unwrap(), 2);
}

#[test]
fn sigma_p_examples() {
    assert_eq!(sigma_p_seminorm(&[3.0, 2.0, 1.0], 1.0).unwrap(), 4.0);
    assert!((sigma_p_seminorm(&[3.0, 2.0, 1.0], 2.0).unwrap() - 3.0).abs() < 1e-15);
    assert_eq!(sigma_p_seminorm(&[], 1.0).unwrap(), 0.0);
    assert!(sigma_p_seminorm(&[1.0], 0.0).is_err());
}

#[test]
fn sigma_p_matches_threshold_sweep() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let a = random_matrix(30, &mut rng);
    let s = svals(&a);
    for p in [0.5, 1.0, 1.5, 2.0] {
        let closed = sigma_p_seminorm(&s, p).unwrap();
        let (lo, hi) = (s[s.len() - 1] * 0.5, s[0] * 1.01);
        let swept = (0..10_000)
            .map(|k| lo * (hi / lo).powf(k as f64 / 9999.0))
            .map(|t| {
                let n = s.iter().filter(|&&v| v > t).count();
                t * (n as f64).powf(1.0 / p)
            })
            .fold(0.0, f64::max);
        assert!(swept <= closed * (1.0 + 1e-12));
        assert!(swept >= closed * (1.0 - 2e-3), "p = {p}: {swept} vs {closed}");
    }
}

#[test]
fn ky_fan_and_product_inequalities() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let a = random_matrix(24, &mut rng);
        let b = random_matrix(24, &mut rng);
        let (sa, sb) = (svals(&a), svals(&b));
        let sab = svals(&sum(&a, &b));
        let sprod = svals(&(&a * &b));
        for _ in 0..10 {
            let s = rng.random_range(0.05..4.0);
            let t = rng.random_range(0.05..4.0);
            let rhs = count_above(&sa, s).unwrap() + count_above(&sb, t).unwrap();
            assert!(count_above(&sab, (s + t) * (1.0 + 1e-9)).unwrap() <= rhs);
            assert!(count_above(&sprod, s * t * (1.0 + 1e-9)).unwrap() <= rhs);
        }
        for p in [0.5, 1.0, 2.0] {
            let (na, nb) = (sigma_p_seminorm(&sa, p).unwrap(), sigma_p_seminorm(&sb, p).unwrap());
            let nab = sigma_p_seminorm(&sab, p).unwrap();
            assert!(nab <= 2.0 * (na.powf(p) + nb.powf(p)).powf(1.0 / p) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn hermitian_counts_relate_to_singular_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let a = random_hermitian(40, &mut rng);
    let e = hermitian_eigenvalues(&a).unwrap();
    let s = singular_values(&a).unwrap();
    assert_eq!(e.kind, SpectrumKind::Eigenvalues);
    assert_eq!(s.kind, SpectrumKind::SingularValues);
    assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
    for t in [0.1, 0.5, 1.0, 2.0] {
        let both = e.count_above(t).unwrap() + e.count_below_negative(t).unwrap();
        assert_eq!(both, s.count_above(t).unwrap());
    }
    let fast = hermitian_eigenvalues_fast(&a).unwrap();
    for (x, y) in e.values.iter().zip(&fast.values) {
        assert!((x - y).abs() < 1e-12);
    }
}

#[test]
fn eigenvalues_reject_non_hermitian_input() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let a = random_matrix(8, &mut rng);
    assert!(matches!(hermitian_eigenvalues(&a), Err(Error::NotHermitian { .. })));
}

#[test]
fn inertia_matches_eigenvalue_counts() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for n in [1, 2, 7, 40, 101] {
        let a = random_hermitian(n, &mut rng);
        let values = hermitian_eigenvalues_fast(&a).unwrap().values;
        for s in [0.05, 0.3, 0.9, 2.5] {
            assert_eq!(inertia_count_above(&a, s).unwrap(), count_above(&values, s).unwrap());
            assert_eq!(inertia_count_above_owned(a.clone(), s).unwrap(), count_above(&values, s).unwrap());
        }
        let negative = values.iter().filter(|&&v| v < 0.0).count();
        assert_eq!(negative_inertia(a).unwrap(), negative);
    }
    // zero diagonal forces 2x2 pivots
    let swap = Mat::from_fn(6, 6, |i, j| if i + j == 5 { Complex64::new(1.0, 0.5) } else { Complex64::default() });
    let swap = Mat::from_fn(6, 6, |i, j| if i <= j { swap[(i, j)] } else { swap[(j, i)].conj() });
    assert_eq!(negative_inertia(swap).unwrap(), 3);
}

#[test]
fn singular_values_match_power_iteration() {
    let g = GridSpec::new(10, 8.0).unwrap();
    let p = ModelParams::new(1.0, 0.3).unwrap();
    let v = PotentialSpec::gaussian(3.0, 1.0, [0.0, 0.0]).unwrap();
    let op = birman_schwinger(g, &p, &v);
    let top = svals(&assemble_dense(&op).unwrap().matrix)[0];
    let est = power_norm(&op, 5000, 1);
    assert!((top - est).abs() <= 1e-6 * top);
}

#[test]
fn iterative_count_agrees_with_dense() {
    let g = GridSpec::new(16, 12.0).unwrap();
    let p = ModelParams::new(1.0, 0.0).unwrap();
    let v = PotentialSpec::gaussian(6.0, 1.5, [0.0, 0.0]).unwrap();
    let op = birman_schwinger(g, &p, &v);
    let values = hermitian_eigenvalues_fast(&assemble_dense(&op).unwrap().matrix).unwrap().values;
    let budget = IterativeBudget::default();
    for s in [0.3, 0.7, 1.3, 2.9] {
        // keep thresholds away from eigenvalues
        if values.iter().any(|e| (e - s).abs() < 1e-4) {
            continue;
        }
        let it = iterative_count_above(&op, s, &budget).unwrap();
        assert_eq!(it.count, count_above(&values, s).unwrap(), "s = {s}");
    }
    let above = iterative_count_above(&op, values[0] * 2.0, &budget).unwrap();
    assert_eq!(above.count, 0);
}

#[test]
fn iterative_count_edge_cases() {
    let g = GridSpec::new(8, 8.0).unwrap();
    let budget = IterativeBudget::default();
    let zero = crate::operator::OperatorHandle::zero(g);
    assert_eq!(iterative_count_above(&zero, 0.5, &budget).unwrap().count, 0);
    assert!(iterative_count_above(&zero, -1.0, &budget).is_err());

    // a box resolvent has few nonzero eigenvalues
    let p = ModelParams::new(1.0, 0.0).unwrap();
    let op = box_localized_resolvent(g, &p, &BoxSpec::unit(2.0).unwrap()).unwrap();
    let values = hermitian_eigenvalues_fast(&assemble_dense(&op).unwrap().matrix).unwrap().values;
    let it = iterative_count_above(&op, 0.2, &budget).unwrap();
    assert_eq!(it.count, count_above(&values, 0.2).unwrap());
}

#[test]
fn iterative_count_reports_inconclusive_without_dense_room() {
    let g = GridSpec::new(16, 12.0).unwrap();
    let p = ModelParams::new(1.0, 0.0).unwrap();
    let v = PotentialSpec::gaussian(6.0, 1.5, [0.0, 0.0]).unwrap();
    let op = birman_schwinger(g, &p, &v);
    let budget = IterativeBudget { max_matvecs: 3, max_krylov: 3, dense_cap: 10, ..IterativeBudget::default() };
    assert!(matches!(iterative_count_above(&op, 0.3, &budget), Err(Error::Inconclusive { .. })));
}

proptest! {
    #[test]
    fn counts_are_monotone(mut values in prop::collection::vec(-10.0f64..10.0, 0..60), s in 0.01f64..5.0, ds in 0.0f64..5.0) {
        values.sort_by(|a, b| b.total_cmp(a));
        let a = count_above(&values, s).unwrap();
        let b = count_above(&values, s + ds).unwrap();
        prop_assert!(b <= a);
        prop_assert!(n_plus(&values, s).unwrap() + n_minus(&values, s).unwrap() <= values.len());
    }

    #[test]
    fn sigma_p_dominates_scaled_values(mut values in prop::collection::vec(0.0f64..10.0, 1..40), p in 0.2f64..3.0) {
        values.sort_by(|a, b| b.total_cmp(a));
        let norm = sigma_p_seminorm(&values, p).unwrap();
        prop_assert!(norm >= values[0] * (1.0 - 1e-12));
        for (k, s) in values.iter().enumerate() {
            prop_assert!(s * ((k + 1) as f64).powf(1.0 / p) <= norm * (1.0 + 1e-12));
        }
    }
}
