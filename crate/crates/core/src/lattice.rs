//! Periodized square grid and the unitary discrete Fourier pair on it.
//!
//! The plane is replaced by the torus `[-L/2, L/2)^2` sampled at
//! `x_j = j * h - L/2`, so the origin is always a grid node. Momenta are
//! `2 pi k / L` for `k` in `[-n/2, n/2)`. Node and mode indices are row-major:
//! `index = i1 * n + i2`, with `i1` the first coordinate axis.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Square periodized grid.
///
/// The spacing is computed once as `L / n` and the stored box side is
/// `spacing * n`, so the two agree exactly in floating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    n_points: usize,
    spacing: f64,
    box_side: f64,
}

impl GridSpec {
    pub fn new(n_points: usize, box_side: f64) -> Result<Self> {
        if !n_points.is_multiple_of(2) {
            return Err(Error::InvalidGrid(format!("n_points must be even, got {n_points}")));
        }
        if n_points < 8 {
            return Err(Error::InvalidGrid(format!("n_points must be at least 8, got {n_points}")));
        }
        if !(box_side.is_finite() && box_side > 0.0) {
            return Err(Error::InvalidGrid(format!("box_side must be positive, got {box_side}")));
        }
        let spacing = box_side / n_points as f64;
        Ok(GridSpec { n_points, spacing, box_side: spacing * n_points as f64 })
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn box_side(&self) -> f64 {
        self.box_side
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    /// Number of grid nodes, `n^2`.
    pub fn node_count(&self) -> usize {
        self.n_points * self.n_points
    }

    /// Dimension of the spinor space, `2 n^2`.
    pub fn dimension(&self) -> usize {
        2 * self.node_count()
    }

    pub fn momentum_step(&self) -> f64 {
        2.0 * PI / self.box_side
    }

    /// Signed wavenumber of an FFT-ordered axis index, in `[-n/2, n/2)`.
    pub fn wavenumber(&self, index: usize) -> i64 {
        let n = self.n_points as i64;
        let i = index as i64;
        if i < n / 2 {
            i
        } else {
            i - n
        }
    }

    pub fn momentum(&self, wavenumber: i64) -> f64 {
        wavenumber as f64 * self.momentum_step()
    }

    /// True for the unpaired axis index whose wavenumber `-n/2` has no negative partner.
    pub fn is_nyquist(&self, index: usize) -> bool {
        self.n_points.is_multiple_of(2) && index == self.n_points / 2
    }

    /// Momentum pair of a row-major mode index.
    pub fn mode_momentum(&self, mode: usize) -> [f64; 2] {
        let (k1, k2) = (mode / self.n_points, mode % self.n_points);
        [self.momentum(self.wavenumber(k1)), self.momentum(self.wavenumber(k2))]
    }

    pub fn coordinate(&self, index: usize) -> f64 {
        index as f64 * self.spacing - 0.5 * self.box_side
    }

    /// Position of a row-major node index.
    pub fn position(&self, node: usize) -> [f64; 2] {
        [self.coordinate(node / self.n_points), self.coordinate(node % self.n_points)]
    }

    /// Node index of the origin.
    pub fn origin_node(&self) -> usize {
        let c = self.n_points / 2;
        c * self.n_points + c
    }

    /// Image of a node under `x -> -x` on the torus.
    pub fn mirror_node(&self, node: usize) -> usize {
        let n = self.n_points;
        let (i1, i2) = (node / n, node % n);
        ((n - i1) % n) * n + (n - i2) % n
    }

    /// Image of a mode under `k -> -k`, with the unpaired mode `-n/2` fixed.
    pub fn mirror_mode(&self, mode: usize) -> usize {
        // Same index arithmetic as for nodes: k and n - k are negatives mod n.
        self.mirror_node(mode)
    }
}

/// A `C^2`-valued field on a grid, stored as two component planes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinorField {
    grid: GridSpec,
    components: [Vec<Complex64>; 2],
}

impl SpinorField {
    pub fn zeros(grid: GridSpec) -> Self {
        let n = grid.node_count();
        SpinorField { grid, components: [vec![Complex64::default(); n], vec![Complex64::default(); n]] }
    }

    pub fn from_components(grid: GridSpec, upper: Vec<Complex64>, lower: Vec<Complex64>) -> Result<Self> {
        let n = grid.node_count();
        if upper.len() != n || lower.len() != n {
            return Err(Error::InvalidArgument(format!(
                "component lengths {} and {} do not match {n} grid nodes",
                upper.len(),
                lower.len()
            )));
        }
        if upper.iter().chain(&lower).any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::InvalidArgument("spinor field has non-finite entries".into()));
        }
        Ok(SpinorField { grid, components: [upper, lower] })
    }

    /// Builds a field from a flat vector in the layout `[upper..., lower...]`.
    pub fn from_flat(grid: GridSpec, flat: &[Complex64]) -> Result<Self> {
        let n = grid.node_count();
        if flat.len() != 2 * n {
            return Err(Error::InvalidArgument(format!(
                "flat vector of length {} does not match dimension {}",
                flat.len(),
                2 * n
            )));
        }
        Self::from_components(grid, flat[..n].to_vec(), flat[n..].to_vec())
    }

    /// Unit vector for flat index `k` (component `k / n^2`, node `k % n^2`).
    pub fn basis(grid: GridSpec, k: usize) -> Self {
        let mut f = SpinorField::zeros(grid);
        let n = grid.node_count();
        f.components[k / n][k % n] = Complex64::new(1.0, 0.0);
        f
    }

    /// Plane wave `e^{i xi.x} s / L` for a grid mode and spinor `s`; unit norm when `|s| = 1`.
    pub fn plane_wave(grid: GridSpec, mode: usize, spinor: [Complex64; 2]) -> Self {
        let xi = grid.mode_momentum(mode);
        let norm = 1.0 / grid.box_side();
        let mut f = SpinorField::zeros(grid);
        for node in 0..grid.node_count() {
            let x = grid.position(node);
            let phase = Complex64::from_polar(norm, xi[0] * x[0] + xi[1] * x[1]);
            f.components[0][node] = phase * spinor[0];
            f.components[1][node] = phase * spinor[1];
        }
        f
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn upper(&self) -> &[Complex64] {
        &self.components[0]
    }

    pub fn lower(&self) -> &[Complex64] {
        &self.components[1]
    }

    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.components[c]
    }

    pub fn component_mut(&mut self, c: usize) -> &mut [Complex64] {
        &mut self.components[c]
    }

    pub fn to_flat(&self) -> Vec<Complex64> {
        let mut v = Vec::with_capacity(self.grid.dimension());
        v.extend_from_slice(&self.components[0]);
        v.extend_from_slice(&self.components[1]);
        v
    }

    /// Discrete inner product `h^2 sum conj(f) g`.
    pub fn inner(&self, other: &SpinorField) -> Complex64 {
        let h2 = self.grid.spacing().powi(2);
        let s: Complex64 =
            (0..2).flat_map(|c| self.components[c].iter().zip(&other.components[c])).map(|(a, b)| a.conj() * b).sum();
        s * h2
    }

    /// Squared norm `h^2 sum (|c1|^2 + |c2|^2)`.
    pub fn norm_sqr(&self) -> f64 {
        let h2 = self.grid.spacing().powi(2);
        h2 * self.components.iter().flat_map(|c| c.iter()).map(|z| z.norm_sqr()).sum::<f64>()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn scale(&mut self, a: Complex64) {
        for z in self.components.iter_mut().flat_map(|c| c.iter_mut()) {
            *z *= a;
        }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: Complex64, other: &SpinorField) {
        for c in 0..2 {
            for (y, x) in self.components[c].iter_mut().zip(&other.components[c]) {
                *y += a * x;
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().flat_map(|c| c.iter()).all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Cached unitary 2D DFT for one grid size.
///
/// Forward: `g(k) = (1/n) sum_j e^{-2 pi i k.j / n} f(j)`; inverse is its adjoint.
/// Fields keep the position-space `h^2` weight on both sides, so the pair
/// preserves the field norm exactly.
pub struct SpectralTransform {
    grid: GridSpec,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralTransform {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralTransform").field("grid", &self.grid).finish()
    }
}

impl SpectralTransform {
    pub fn new(grid: GridSpec) -> Self {
        let mut planner = FftPlanner::new();
        let n = grid.n_points();
        SpectralTransform { grid, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn forward(&self, f: &SpinorField) -> SpinorField {
        let mut g = f.clone();
        self.forward_in_place(&mut g);
        g
    }

    pub fn inverse(&self, g: &SpinorField) -> SpinorField {
        let mut f = g.clone();
        self.inverse_in_place(&mut f);
        f
    }

    pub fn forward_in_place(&self, f: &mut SpinorField) {
        debug_assert_eq!(f.grid.n_points(), self.grid.n_points());
        for c in 0..2 {
            self.plane(&mut f.components[c], &self.forward);
        }
    }

    pub fn inverse_in_place(&self, f: &mut SpinorField) {
        debug_assert_eq!(f.grid.n_points(), self.grid.n_points());
        for c in 0..2 {
            self.plane(&mut f.components[c], &self.inverse);
        }
    }

    /// Applies an unnormalized 2D transform to one plane and rescales by `1/n`.
    pub(crate) fn plane(&self, data: &mut [Complex64], fft: &Arc<dyn Fft<f64>>) {
        let n = self.grid.n_points();
        let mut scratch = vec![Complex64::default(); fft.get_inplace_scratch_len()];
        fft.process_with_scratch(data, &mut scratch);
        let mut t = vec![Complex64::default(); n * n];
        transpose(data, &mut t, n);
        fft.process_with_scratch(&mut t, &mut scratch);
        transpose(&t, data, n);
        let s = 1.0 / n as f64;
        for z in data.iter_mut() {
            *z *= s;
        }
    }

    pub(crate) fn inverse_plan(&self) -> &Arc<dyn Fft<f64>> {
        &self.inverse
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 16;
    for ib in (0..n).step_by(BLOCK) {
        for jb in (0..n).step_by(BLOCK) {
            for i in ib..(ib + BLOCK).min(n) {
                for j in jb..(jb + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

pub fn build_grid(n_points: usize, box_side: f64) -> Result<GridSpec> {
    GridSpec::new(n_points, box_side)
}

pub fn forward_transform(f: &SpinorField) -> SpinorField {
    SpectralTransform::new(f.grid()).forward(f)
}

pub fn inverse_transform(g: &SpinorField) -> SpinorField {
    SpectralTransform::new(g.grid()).inverse(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field(grid: GridSpec, rng: &mut impl Rng) -> SpinorField {
        let n = grid.node_count();
        let mut gen = || -> Vec<Complex64> {
            (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect()
        };
        let (u, l) = (gen(), gen());
        SpinorField::from_components(grid, u, l).unwrap()
    }

    fn rel_diff(a: &SpinorField, b: &SpinorField) -> f64 {
        let mut d = a.clone();
        d.axpy(Complex64::new(-1.0, 0.0), b);
        d.norm() / a.norm().max(1e-300)
    }

    #[test]
    fn momenta_of_unit_step_grid() {
        let g = build_grid(8, 2.0 * PI).unwrap();
        let ks: Vec<f64> = (0..8).map(|i| g.momentum(g.wavenumber(i))).collect();
        let mut sorted = ks.clone();
        sorted.sort_by(f64::total_cmp);
        let expected: Vec<f64> = (-4..4).map(|k| k as f64).collect();
        for (a, b) in sorted.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn momentum_step() {
        let g = build_grid(16, 8.0).unwrap();
        assert!((g.momentum_step() - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_grids() {
        assert!(matches!(build_grid(7, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(6, 1.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(8, 0.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(8, -2.0), Err(Error::InvalidGrid(_))));
        assert!(matches!(build_grid(8, f64::NAN), Err(Error::InvalidGrid(_))));
    }

    #[test]
    fn origin_is_a_node() {
        let g = build_grid(24, 16.0).unwrap();
        assert_eq!(g.position(g.origin_node()), [0.0, 0.0]);
        assert_eq!(g.mirror_node(g.origin_node()), g.origin_node());
        for node in 0..g.node_count() {
            let x = g.position(node);
            let y = g.position(g.mirror_node(node));
            // -x up to the torus period
            for a in 0..2 {
                let d = (x[a] + y[a]).rem_euclid(g.box_side());
                assert!(d < 1e-12 || (g.box_side() - d) < 1e-12);
            }
        }
    }

    #[test]
    fn spacing_times_points_is_box_side() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..5000 {
            let n = 2 * rng.random_range(4..256usize);
            let g = build_grid(n, rng.random_range(0.1..1000.0)).unwrap();
            assert_eq!(g.spacing() * n as f64, g.box_side());
        }
    }

    #[test]
    fn constant_field_lands_on_zero_mode() {
        let g = build_grid(8, 3.0).unwrap();
        let n = g.node_count();
        let f = SpinorField::from_components(g, vec![Complex64::new(2.0, 0.0); n], vec![Complex64::new(0.0, -1.0); n])
            .unwrap();
        let h = forward_transform(&f);
        for mode in 0..n {
            if mode == 0 {
                assert!((h.upper()[0] - Complex64::new(16.0, 0.0)).norm() < 1e-12);
                assert!((h.lower()[0] - Complex64::new(0.0, -8.0)).norm() < 1e-12);
            } else {
                assert!(h.upper()[mode].norm() < 1e-12 && h.lower()[mode].norm() < 1e-12);
            }
        }
    }

    #[test]
    fn point_mass_has_flat_modulus() {
        let g = build_grid(16, 5.0).unwrap();
        let f = SpinorField::basis(g, 37);
        let h = forward_transform(&f);
        for z in h.upper() {
            assert!((z.norm() - 1.0 / 16.0).abs() < 1e-14);
        }
        assert!(h.lower().iter().all(|z| z.norm() < 1e-15));
    }

    #[test]
    fn zero_field_stays_zero() {
        let g = build_grid(8, 1.0).unwrap();
        let z = SpinorField::zeros(g);
        assert_eq!(inverse_transform(&z), z);
    }

    #[test]
    fn single_mode_is_unit_plane_wave() {
        let g = build_grid(16, 7.0).unwrap();
        let n = g.node_count();
        let mode = 3 * 16 + 13;
        let mut m = SpinorField::zeros(g);
        // unit-norm momentum vector: the field carries the h^2 weight
        m.component_mut(0)[mode] = Complex64::new(1.0 / g.spacing(), 0.0);
        let f = inverse_transform(&m);
        assert!((f.norm() - 1.0).abs() < 1e-12);
        let modulus = f.upper()[0].norm();
        assert!(f.upper().iter().all(|z| (z.norm() - modulus).abs() < 1e-12));
        assert!(f.lower().iter().all(|z| z.norm() == 0.0));
        // matches the analytic plane wave up to a global phase
        let pw = SpinorField::plane_wave(g, mode, [Complex64::new(1.0, 0.0), Complex64::default()]);
        let overlap = pw.inner(&f).norm();
        assert!((overlap - 1.0).abs() < 1e-12, "overlap {overlap}");
        assert_eq!(n, 256);
    }

    #[test]
    fn round_trip_parseval_linearity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for trial in 0..100 {
            let n = [8, 10, 16, 24][trial % 4];
            let g = build_grid(n, rng.random_range(1.0..30.0)).unwrap();
            let t = SpectralTransform::new(g);
            let f = random_field(g, &mut rng);
            let h = random_field(g, &mut rng);

            assert!(rel_diff(&f, &t.inverse(&t.forward(&f))) < 1e-12);
            assert!(rel_diff(&f, &t.forward(&t.inverse(&f))) < 1e-12);
            assert!((t.forward(&f).norm() - f.norm()).abs() <= 1e-12 * f.norm());

            let (a, b) = (Complex64::new(0.3, -1.2), Complex64::new(-2.0, 0.5));
            let mut comb = f.clone();
            comb.scale(a);
            comb.axpy(b, &h);
            let mut lin = t.forward(&f);
            lin.scale(a);
            lin.axpy(b, &t.forward(&h));
            assert!(rel_diff(&lin, &t.forward(&comb)) < 1e-12);
        }
    }
}
