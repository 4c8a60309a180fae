use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::spectra::{hermitian_eigenvalues, hermitian_eigenvalues_fast, power_norm, singular_values};
use crate::symbol::symbol_eigenvalues;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn random_field(grid: GridSpec, rng: &mut impl Rng) -> SpinorField {
    let mut draw = || {
        (0..grid.node_count()).map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect::<Vec<_>>()
    };
    let (u, l) = (draw(), draw());
    SpinorField::from_components(grid, u, l).unwrap()
}

fn diff_norm(a: &SpinorField, b: &SpinorField) -> f64 {
    let mut d = a.clone();
    d.axpy(c(-1.0, 0.0), b);
    d.norm()
}

fn gaussian() -> PotentialSpec {
    PotentialSpec::gaussian(4.0, 1.0, [0.0, 0.0]).unwrap()
}

fn params(m: f64, lam: f64) -> ModelParams {
    ModelParams::new(m, lam).unwrap()
}

fn hermitian_defect(op: &OperatorHandle, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let f = random_field(op.grid(), &mut rng);
        let g = random_field(op.grid(), &mut rng);
        let lhs = f.inner(&op.apply(&g));
        let rhs = g.inner(&op.apply(&f)).conj();
        worst = worst.max((lhs - rhs).norm() / (f.norm() * g.norm()));
    }
    worst
}

#[test]
fn free_operator_at_zero_mode() {
    let g = GridSpec::new(8, 8.0).unwrap();
    let d = free_operator(g, &params(1.5, 0.0));
    let f = SpinorField::from_components(g, vec![c(0.7, 0.0); 64], vec![c(0.0, -0.3); 64]).unwrap();
    let out = d.apply(&f);
    for k in 0..64 {
        assert!((out.upper()[k] - c(1.05, 0.0)).norm() < 1e-13);
        assert!((out.lower()[k] - c(0.0, 0.45)).norm() < 1e-13);
    }
}

#[test]
fn plane_waves_are_eigenfields() {
    let g = GridSpec::new(16, 10.0).unwrap();
    let p = params(1.0, 0.0);
    let d = free_operator(g, &p);
    for mode in [0, 1, 17, 37, 100, 136, 200, 255] {
        let xi = g.mode_momentum(mode);
        let s = crate::symbol::dirac_symbol(xi, &p);
        let m = faer::Mat::<Complex64>::from_fn(2, 2, |i, j| s.entry(i, j));
        let evd = m.self_adjoint_eigen(faer::Side::Lower).unwrap();
        let (lo, hi) = symbol_eigenvalues(xi, &p);
        for (k, e) in [lo, hi].into_iter().enumerate() {
            let v = [evd.U()[(0, k)], evd.U()[(1, k)]];
            let f = SpinorField::plane_wave(g, mode, v);
            let mut expect = f.clone();
            expect.scale(c(e, 0.0));
            assert!(diff_norm(&d.apply(&f), &expect) < 1e-10 * e.abs().max(1.0));
        }
    }
}

#[test]
fn even_symbol_differs_only_on_nyquist_modes() {
    let g = GridSpec::new(8, 6.0).unwrap();
    let p = params(1.3, 0.4);
    for mode in 0..g.node_count() {
        let (k1, k2) = (mode / 8, mode % 8);
        let s = even_symbol(&g, mode, &p);
        let r = even_resolvent_symbol(&g, mode, &p);
        let shifted = s - crate::symbol::SymbolMatrix::identity().scale(0.4);
        assert!((shifted * r - crate::symbol::SymbolMatrix::identity()).max_abs_entry() < 1e-14);
        assert_eq!(s.hermitian_defect(), 0.0);
        assert_eq!(s, even_symbol(&g, g.mirror_mode(mode), &p));
        let plain = crate::symbol::dirac_symbol(g.mode_momentum(mode), &p);
        if (k1 == 4) != (k2 == 4) {
            // the cross term vanishes anyway when the other component is zero
            if k1 != 0 && k2 != 0 {
                assert!((s - plain).max_abs_entry() > 0.0);
            }
            assert_eq!(s.a12.im, 0.0);
        } else {
            assert_eq!(s, plain);
        }
    }
}

#[test]
fn handles_are_hermitian() {
    let g = GridSpec::new(16, 12.0).unwrap();
    let p = params(1.0, 0.3);
    let v = gaussian();
    assert!(hermitian_defect(&free_operator(g, &p), 20, 1) < 1e-10);
    assert!(hermitian_defect(&resolvent(g, &p), 20, 2) < 1e-10);
    assert!(hermitian_defect(&birman_schwinger(g, &p, &v), 20, 3) < 1e-10);
    assert!(hermitian_defect(&perturbed_operator(g, &p, &v, 2.0).unwrap(), 20, 4) < 1e-10);
    let bx = BoxSpec::unit(3.0).unwrap();
    assert!(hermitian_defect(&box_localized_resolvent(g, &p, &bx).unwrap(), 20, 5) < 1e-10);
}

#[test]
fn linearity() {
    let g = GridSpec::new(8, 6.0).unwrap();
    let op = birman_schwinger(g, &params(1.0, 0.1), &gaussian());
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..10 {
        let f = random_field(g, &mut rng);
        let h = random_field(g, &mut rng);
        let (a, b) = (c(0.3, -1.2), c(2.0, 0.5));
        let mut combo = f.clone();
        combo.scale(a);
        combo.axpy(b, &h);
        let mut expect = op.apply(&f);
        expect.scale(a);
        expect.axpy(b, &op.apply(&h));
        assert!(diff_norm(&op.apply(&combo), &expect) < 1e-10 * expect.norm().max(1.0));
    }
}

#[test]
fn resolvent_inverts_shifted_operator() {
    let g = GridSpec::new(16, 12.0).unwrap();
    for lam in [0.0, 0.3, -0.7] {
        let p = params(1.0, lam);
        let d = free_operator(g, &p);
        let r = resolvent(g, &p);
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..50 {
            let f = random_field(g, &mut rng);
            let mut shifted = d.apply(&f);
            shifted.axpy(c(-lam, 0.0), &f);
            assert!(diff_norm(&r.apply(&shifted), &f) <= 1e-10 * f.norm());
            let mut back = d.apply(&r.apply(&f));
            back.axpy(c(-lam, 0.0), &r.apply(&f));
            assert!(diff_norm(&back, &f) <= 1e-10 * f.norm());
        }
    }
}

#[test]
fn resolvent_at_zero_mode() {
    let g = GridSpec::new(8, 8.0).unwrap();
    let r = resolvent(g, &params(1.0, 0.0));
    let f = SpinorField::from_components(g, vec![c(1.0, 0.0); 64], vec![c(2.0, 0.0); 64]).unwrap();
    let out = r.apply(&f);
    for k in 0..64 {
        assert!((out.upper()[k] - c(1.0, 0.0)).norm() < 1e-13);
        assert!((out.lower()[k] - c(-2.0, 0.0)).norm() < 1e-13);
    }
}

#[test]
fn resolvent_norm_bound() {
    let g = GridSpec::new(16, 8.0).unwrap();
    for lam in [0.0, 0.5, -0.8] {
        let p = params(1.0, lam);
        let est = power_norm(&resolvent(g, &p), 3000, 4);
        assert!(est <= 1.0 / p.gap_distance() + 1e-8);
    }
}

#[test]
fn birman_schwinger_zero_potential() {
    let g = GridSpec::new(8, 8.0).unwrap();
    let zero = PotentialSpec::gaussian(0.0, 1.0, [0.0, 0.0]).unwrap();
    let x = birman_schwinger(g, &params(1.0, 0.0), &zero);
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(x.apply(&random_field(g, &mut rng)).norm(), 0.0);
}

#[test]
fn dense_eigenpairs_match_handle_rayleigh_quotients() {
    let g = GridSpec::new(12, 10.0).unwrap();
    let x = birman_schwinger(g, &params(1.0, 0.2), &gaussian());
    let a = assemble_dense(&x).unwrap();
    let evd = a.matrix.self_adjoint_eigen(faer::Side::Lower).unwrap();
    let n = a.matrix.nrows();
    for k in [0, 1, n / 2, n - 2, n - 1] {
        let v: Vec<Complex64> = (0..n).map(|i| evd.U()[(i, k)]).collect();
        let f = SpinorField::from_flat(g, &v).unwrap();
        let rq = f.inner(&x.apply(&f)) / f.inner(&f);
        assert!((rq.re - evd.S()[k].re).abs() < 1e-8);
        assert!(rq.im.abs() < 1e-8);
    }
}

#[test]
fn perturbed_operator_basics() {
    let g = GridSpec::new(8, 8.0).unwrap();
    let p = params(1.0, 0.0);
    let v = gaussian();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let f = random_field(g, &mut rng);
    let d0 = perturbed_operator(g, &p, &v, 0.0).unwrap();
    assert!(diff_norm(&d0.apply(&f), &free_operator(g, &p).apply(&f)) < 1e-14);
    let mut last = f64::INFINITY;
    for t in [0.0, 0.5, 1.0, 3.0] {
        let q = f.inner(&perturbed_operator(g, &p, &v, t).unwrap().apply(&f)).re;
        assert!(q < last);
        last = q;
    }
    assert!(perturbed_operator(g, &p, &v, -0.1).is_err());
    let dense = assemble_dense(&perturbed_operator(g, &p, &v, 1.0).unwrap()).unwrap();
    assert!(dense.hermitian_defect.unwrap() <= 1e-12);
}

#[test]
fn localized_pieces_partition() {
    let g = GridSpec::new(16, 12.0).unwrap();
    let p = params(1.0, 0.0);
    let v = PotentialSpec::power_decay(1.0, crate::potential::AngularProfile::constant(2.0).unwrap()).unwrap();
    let loc = LocalizationSpec::new(0.4, 0.5, 8.0, 1.0).unwrap();
    let x = birman_schwinger(g, &p, &v);
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..5 {
        let f = random_field(g, &mut rng);
        let mut sum = SpinorField::zeros(g);
        for i in 1..=3 {
            for j in 1..=3 {
                sum.axpy(c(1.0, 0.0), &localized_piece(g, &p, &v, &loc, i, j).unwrap().apply(&f));
            }
        }
        assert!(diff_norm(&sum, &x.apply(&f)) <= 1e-10 * f.norm());
    }
    // zones partition the nodes
    let total: f64 = (1..=3).map(|i| loc.indicator(&g, i).iter().sum::<f64>()).sum();
    assert_eq!(total as usize, g.node_count());
}

#[test]
fn localized_piece_adjoints_and_bounds() {
    let g = GridSpec::new(16, 12.0).unwrap();
    let p = params(1.0, 0.25);
    let v = PotentialSpec::power_decay(1.0, crate::potential::AngularProfile::constant(2.0).unwrap()).unwrap();
    let loc = LocalizationSpec::new(0.4, 0.5, 8.0, 1.0).unwrap();
    let p12 = localized_piece(g, &p, &v, &loc, 1, 2).unwrap();
    let p21 = localized_piece(g, &p, &v, &loc, 2, 1).unwrap();
    assert!(!p12.is_hermitian());
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    for _ in 0..10 {
        let f = random_field(g, &mut rng);
        let h = random_field(g, &mut rng);
        let lhs = f.inner(&p12.apply(&h));
        let rhs = p21.apply(&f).inner(&h);
        assert!((lhs - rhs).norm() <= 1e-10 * f.norm() * h.norm());
        assert!(diff_norm(&p12.adjoint().apply(&f), &p21.apply(&f)) <= 1e-10 * f.norm());
    }
    let p33 = localized_piece(g, &p, &v, &loc, 3, 3).unwrap();
    let sup3 = v
        .sample(&g)
        .iter()
        .enumerate()
        .filter(|(k, _)| loc.zone(g.position(*k)) == 3)
        .map(|(_, &x)| x)
        .fold(0.0, f64::max);
    let a = assemble_dense(&p33).unwrap();
    let norm = singular_values(&a.matrix).unwrap().values[0];
    assert!(norm <= sup3 / p.gap_distance() + 1e-8);
}

#[test]
fn localization_rejections() {
    let g = GridSpec::new(16, 12.0).unwrap();
    let p = params(1.0, 0.0);
    let v = gaussian();
    let loc = LocalizationSpec::new(0.4, 0.5, 8.0, 1.0).unwrap();
    assert!(localized_piece(g, &p, &v, &loc, 0, 1).is_err());
    assert!(localized_piece(g, &p, &v, &loc, 1, 4).is_err());
    let wide = LocalizationSpec::new(0.4, 0.9, 8.0, 1.0).unwrap();
    assert!(matches!(localized_piece(g, &p, &v, &wide, 1, 2), Err(Error::InvalidLocalization(_))));
    assert!(LocalizationSpec::new(0.5, 0.4, 8.0, 1.0).is_err());
    assert!(LocalizationSpec::new(0.0, 0.4, 8.0, 1.0).is_err());
}

#[test]
fn box_localized_resolvent_cases() {
    let g = GridSpec::new(16, 16.0).unwrap();
    let p = params(1.0, 0.0);
    // [0, 0.5)^2 with spacing 1 holds only the origin; a shifted tiny box holds nothing
    let empty = BoxSpec::new([0.2, 0.2], 1.0, 0.5).unwrap();
    let op = box_localized_resolvent(g, &p, &empty).unwrap();
    assert!(empty.nodes(&g).is_empty());
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    assert_eq!(op.apply(&random_field(g, &mut rng)).norm(), 0.0);

    let bx = BoxSpec::unit(4.0).unwrap();
    assert_eq!(bx.nodes(&g).len(), 16);
    let far = BoxSpec::unit(7.0).unwrap();
    assert!(matches!(box_localized_resolvent(g, &p, &far), Err(Error::InvalidLocalization(_))));
}

#[test]
fn restricted_assembly_keeps_the_nonzero_spectrum() {
    let g = GridSpec::new(12, 12.0).unwrap();
    let p = params(1.0, 0.0);
    let bx = BoxSpec::unit(3.0).unwrap();
    let op = box_localized_resolvent(g, &p, &bx).unwrap();
    let full = hermitian_eigenvalues_fast(&assemble_dense(&op).unwrap().matrix).unwrap().values;
    let nodes = bx.nodes(&g);
    let small = assemble_restricted(&op, &nodes, &nodes, DEFAULT_DENSE_CAP).unwrap();
    let part = hermitian_eigenvalues_fast(&small.matrix).unwrap().values;
    let nonzero: Vec<f64> = full.iter().copied().filter(|v| v.abs() > 1e-12).collect();
    assert_eq!(nonzero.len(), part.iter().filter(|v| v.abs() > 1e-12).count());
    let mut part_nz: Vec<f64> = part.into_iter().filter(|v| v.abs() > 1e-12).collect();
    part_nz.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in nonzero.iter().zip(&part_nz) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn dense_assembly_basics() {
    let g = GridSpec::new(8, 8.0).unwrap();
    let zero = assemble_dense(&OperatorHandle::zero(g)).unwrap();
    assert!(zero.matrix.col_iter().all(|col| col.iter().all(|z| *z == Complex64::default())));

    let p = params(1.0, 0.0);
    let free = assemble_dense(&free_operator(g, &p)).unwrap();
    let numeric = hermitian_eigenvalues(&free.matrix).unwrap().values;
    let mut exact: Vec<f64> = (0..g.node_count())
        .flat_map(|k| {
            let (lo, hi) = symbol_eigenvalues(g.mode_momentum(k), &p);
            [lo, hi]
        })
        .collect();
    exact.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in numeric.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-10 * b.abs().max(1.0));
    }

    let huge = GridSpec::new(72, 8.0).unwrap();
    assert!(matches!(
        assemble_dense(&free_operator(huge, &p)),
        Err(Error::CapExceeded { dimension: 10368, cap: 10_000 })
    ));
    let big = GridSpec::new(64, 8.0).unwrap();
    assert!(matches!(
        assemble_dense_with_cap(&free_operator(big, &p), 4000),
        Err(Error::CapExceeded { dimension: 8192, cap: 4000 })
    ));
}

#[test]
fn kernel_assembly_matches_column_oracle() {
    let g = GridSpec::new(8, 7.0).unwrap();
    let p = params(1.0, 0.4);
    let v = PotentialSpec::gaussian(2.0, 1.3, [0.5, -0.25]).unwrap();
    let loc = LocalizationSpec::new(0.3, 0.6, 4.0, 1.0).unwrap();
    let ops = [
        free_operator(g, &p),
        birman_schwinger(g, &p, &v),
        perturbed_operator(g, &p, &v, 1.5).unwrap(),
        localized_piece(g, &p, &v, &loc, 2, 3).unwrap(),
    ];
    for op in &ops {
        let by_kernel = assemble_dense(op).unwrap().matrix;
        let by_columns = assemble_by_columns(op, DEFAULT_DENSE_CAP).unwrap();
        for j in 0..by_kernel.ncols() {
            for i in 0..by_kernel.nrows() {
                assert!((by_kernel[(i, j)] - by_columns[(i, j)]).norm() < 1e-12);
            }
        }
    }
}

#[test]
fn free_spectrum_leaves_the_gap_empty() {
    for (n, l, m) in [(8, 5.0, 1.0), (10, 12.0, 0.4), (12, 3.0, 2.0)] {
        let g = GridSpec::new(n, l).unwrap();
        let a = assemble_dense(&free_operator(g, &params(m, 0.0))).unwrap();
        let values = hermitian_eigenvalues_fast(&a.matrix).unwrap().values;
        assert!(values.iter().all(|e| e.abs() >= m - 1e-12));
    }
}

#[test]
fn birman_schwinger_eigenvalues_are_real_and_bounded() {
    let g = GridSpec::new(12, 10.0).unwrap();
    let p = params(1.0, -0.3);
    let v = gaussian();
    let a = assemble_dense(&birman_schwinger(g, &p, &v)).unwrap();
    let values = hermitian_eigenvalues(&a.matrix).unwrap().values;
    assert!(values.iter().all(|e| e.is_finite()));
    assert!(values[0] <= v.sup() / p.gap_distance() + 1e-8);
    let est = power_norm(&birman_schwinger(g, &p, &v), 2000, 8);
    assert!(est <= v.sup() / p.gap_distance() + 1e-8);
}

#[test]
fn parity_sectors_split_the_spectrum() {
    let g = GridSpec::new(12, 10.0).unwrap();
    let p = params(1.0, 0.2);
    let v = PotentialSpec::power_decay(1.0, crate::potential::AngularProfile::constant(2.0).unwrap()).unwrap();
    // the plain table is odd on the Nyquist modes
    assert!(birman_schwinger(g, &p, &v).parity_defect().is_none());
    let op = even_birman_schwinger(g, &p, &v);
    let full = hermitian_eigenvalues_fast(&assemble_dense(&op).unwrap().matrix).unwrap().values;
    let sectors = assemble_parity_sectors(&op, DEFAULT_DENSE_CAP).unwrap();
    assert_eq!(sectors.even.matrix.nrows(), 2 * (g.node_count() / 2 + 2));
    assert_eq!(sectors.odd.matrix.nrows(), 2 * (g.node_count() / 2 - 2));
    let mut split = hermitian_eigenvalues_fast(&sectors.even.matrix).unwrap().values;
    split.extend(hermitian_eigenvalues_fast(&sectors.odd.matrix).unwrap().values);
    split.sort_by(|a, b| b.total_cmp(a));
    for (a, b) in full.iter().zip(&split) {
        assert!((a - b).abs() < 1e-12);
    }
    // an off-center potential breaks the symmetry
    let shifted = PotentialSpec::gaussian(4.0, 1.0, [1.0, 0.0]).unwrap();
    assert!(assemble_parity_sectors(&even_birman_schwinger(g, &p, &shifted), DEFAULT_DENSE_CAP).is_err());
}

#[test]
fn quadratic_form_under_sign_flip() {
    let g = GridSpec::new(12, 10.0).unwrap();
    let p = params(1.0, 0.3);
    let x = birman_schwinger(g, &p, &gaussian());
    let mut flipped = x.clone();
    flipped.multiplier = Some(Arc::new(x.multiplier().unwrap().iter().map(|s| s.sign_flipped()).collect()));
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    for _ in 0..10 {
        let f = random_field(g, &mut rng);
        // conjugation by diag(1, -1) acts pointwise on the spinor
        let mut uf = f.clone();
        for z in uf.component_mut(1) {
            *z = -*z;
        }
        let a = f.inner(&flipped.apply(&f));
        let b = uf.inner(&x.apply(&uf));
        assert!((a - b).norm() <= 1e-10 * f.norm_sqr());
    }
    let fa = hermitian_eigenvalues_fast(&assemble_dense(&flipped).unwrap().matrix).unwrap().values;
    let xa = hermitian_eigenvalues_fast(&assemble_dense(&x).unwrap().matrix).unwrap().values;
    for (a, b) in fa.iter().zip(&xa) {
        assert!((a - b).abs() < 1e-12);
    }
}
