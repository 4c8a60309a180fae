//! Matrix-free discretized operators built from Fourier multipliers and
//! pointwise weights, with dense assembly for the eigensolvers.
//!
//! Every operator here has the sandwich form
//!
//! ```text
//!   A f = L . F*( M(xi) F(R . f) ) + d . f
//! ```
//!
//! with `L`, `R`, `d` scalar functions on the grid and `M` a 2x2 symbol per mode.

mod dense;

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lattice::{GridSpec, SpectralTransform, SpinorField};
use crate::potential::PotentialSpec;
use crate::symbol::{dirac_symbol, resolvent_symbol, ModelParams, SymbolMatrix};

pub use dense::{
    assemble_by_columns, assemble_dense, assemble_dense_with_cap, assemble_parity_sectors, assemble_restricted,
    DenseOperator, ParitySectors, DEFAULT_DENSE_CAP, HERMITIAN_TOLERANCE,
};

/// A linear operator on spinor fields, applied without forming a matrix.
#[derive(Clone)]
pub struct OperatorHandle {
    grid: GridSpec,
    transform: Arc<SpectralTransform>,
    multiplier: Option<Arc<Vec<SymbolMatrix>>>,
    left: Option<Arc<Vec<f64>>>,
    right: Option<Arc<Vec<f64>>>,
    diagonal: Option<Arc<Vec<f64>>>,
    hermitian: bool,
}

impl std::fmt::Debug for OperatorHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("grid", &self.grid)
            .field("multiplier", &self.multiplier.is_some())
            .field("left", &self.left.is_some())
            .field("right", &self.right.is_some())
            .field("diagonal", &self.diagonal.is_some())
            .field("hermitian", &self.hermitian)
            .finish()
    }
}

/// Free symbol on the grid modes, made even under `xi -> -xi`.
///
/// The Nyquist wavenumber `-n/2` stands for both `+-n/2`. On modes with
/// exactly one Nyquist component the symbol is averaged over both signs of
/// that component, which drops the odd cross term there. Operators built
/// from this table commute with `x -> -x` exactly; away from the Nyquist
/// modes it is the plain symbol.
pub fn even_symbol(grid: &GridSpec, mode: usize, params: &ModelParams) -> SymbolMatrix {
    let xi = grid.mode_momentum(mode);
    let d = dirac_symbol(xi, params);
    match nyquist_flip(grid, mode, xi) {
        Some(flipped) => (d + dirac_symbol(flipped, params)).scale(0.5),
        None => d,
    }
}

/// `(even_symbol - lambda)^{-1}`.
pub fn even_resolvent_symbol(grid: &GridSpec, mode: usize, params: &ModelParams) -> SymbolMatrix {
    let xi = grid.mode_momentum(mode);
    match nyquist_flip(grid, mode, xi) {
        Some(_) => (even_symbol(grid, mode, params) - SymbolMatrix::identity().scale(params.gap_point())).inverse(),
        None => resolvent_symbol(xi, params),
    }
}

/// `xi` with its Nyquist component negated, when exactly one component is Nyquist.
fn nyquist_flip(grid: &GridSpec, mode: usize, xi: [f64; 2]) -> Option<[f64; 2]> {
    let n = grid.n_points();
    match (grid.is_nyquist(mode / n), grid.is_nyquist(mode % n)) {
        (true, false) => Some([-xi[0], xi[1]]),
        (false, true) => Some([xi[0], -xi[1]]),
        // with both components Nyquist the double flip changes nothing
        _ => None,
    }
}

fn symbol_table(grid: &GridSpec, f: impl Fn(usize) -> SymbolMatrix) -> Arc<Vec<SymbolMatrix>> {
    Arc::new((0..grid.node_count()).map(f).collect())
}

fn plain_table(grid: &GridSpec, f: impl Fn([f64; 2]) -> SymbolMatrix) -> Arc<Vec<SymbolMatrix>> {
    symbol_table(grid, |k| f(grid.mode_momentum(k)))
}

impl OperatorHandle {
    fn new(grid: GridSpec) -> Self {
        OperatorHandle {
            grid,
            transform: Arc::new(SpectralTransform::new(grid)),
            multiplier: None,
            left: None,
            right: None,
            diagonal: None,
            hermitian: true,
        }
    }

    /// The zero operator.
    pub fn zero(grid: GridSpec) -> Self {
        Self::new(grid)
    }

    pub fn grid(&self) -> GridSpec {
        self.grid
    }

    pub fn dimension(&self) -> usize {
        self.grid.dimension()
    }

    /// Promise that the operator is self-adjoint.
    pub fn is_hermitian(&self) -> bool {
        self.hermitian
    }

    pub fn multiplier(&self) -> Option<&[SymbolMatrix]> {
        self.multiplier.as_deref().map(Vec::as_slice)
    }

    pub fn left_weight(&self) -> Option<&[f64]> {
        self.left.as_deref().map(Vec::as_slice)
    }

    pub fn right_weight(&self) -> Option<&[f64]> {
        self.right.as_deref().map(Vec::as_slice)
    }

    pub fn diagonal(&self) -> Option<&[f64]> {
        self.diagonal.as_deref().map(Vec::as_slice)
    }

    pub fn apply(&self, f: &SpinorField) -> SpinorField {
        let mut out = SpinorField::zeros(self.grid);
        if let Some(m) = &self.multiplier {
            let mut g = f.clone();
            if let Some(r) = &self.right {
                scale_nodes(&mut g, r);
            }
            self.transform.forward_in_place(&mut g);
            for k in 0..self.grid.node_count() {
                let v = m[k].apply([g.upper()[k], g.lower()[k]]);
                g.component_mut(0)[k] = v[0];
                g.component_mut(1)[k] = v[1];
            }
            self.transform.inverse_in_place(&mut g);
            if let Some(l) = &self.left {
                scale_nodes(&mut g, l);
            }
            out = g;
        }
        if let Some(d) = &self.diagonal {
            for c in 0..2 {
                let src = f.component(c);
                for (k, y) in out.component_mut(c).iter_mut().enumerate() {
                    *y += src[k] * d[k];
                }
            }
        }
        out
    }

    /// Applies the operator to a flat vector `[upper..., lower...]`.
    pub fn apply_flat(&self, x: &[Complex64]) -> Vec<Complex64> {
        let f = SpinorField::from_flat(self.grid, x).expect("flat vector matches the operator dimension");
        self.apply(&f).to_flat()
    }

    /// The adjoint: weights swap sides and every symbol is conjugate-transposed.
    pub fn adjoint(&self) -> Self {
        OperatorHandle {
            grid: self.grid,
            transform: Arc::clone(&self.transform),
            multiplier: self.multiplier.as_ref().map(|m| Arc::new(m.iter().map(|s| s.adjoint()).collect())),
            left: self.right.clone(),
            right: self.left.clone(),
            diagonal: self.diagonal.clone(),
            hermitian: self.hermitian,
        }
    }

    /// Position-space kernel planes `K_ab(d)`, indexed `[2 a + b][displacement node]`.
    ///
    /// `(F* M F)[(x, a), (y, b)] = K_ab(x - y)` with the displacement taken on the torus.
    pub fn kernel(&self) -> [Vec<Complex64>; 4] {
        let n2 = self.grid.node_count();
        let zero = || vec![Complex64::default(); n2];
        let mut planes = [zero(), zero(), zero(), zero()];
        if let Some(m) = &self.multiplier {
            let scale = 1.0 / self.grid.n_points() as f64;
            for (ab, plane) in planes.iter_mut().enumerate() {
                for (k, z) in plane.iter_mut().enumerate() {
                    *z = m[k].entry(ab / 2, ab % 2);
                }
                self.transform.plane(plane, self.transform.inverse_plan());
                for z in plane.iter_mut() {
                    *z *= scale;
                }
            }
        }
        planes
    }

    /// Nodes outside which the operator's output vanishes.
    pub fn row_support(&self) -> Vec<usize> {
        support(self.grid, self.left.as_deref(), self.diagonal.as_deref())
    }

    /// Nodes outside which the operator ignores its input.
    pub fn column_support(&self) -> Vec<usize> {
        support(self.grid, self.right.as_deref(), self.diagonal.as_deref())
    }

    /// Largest relative asymmetry of the weights under `x -> -x`, or `None`
    /// when the symbol table itself is not even.
    pub fn parity_defect(&self) -> Option<f64> {
        let g = self.grid;
        if let Some(m) = &self.multiplier {
            for k in 0..g.node_count() {
                if (m[k] - m[g.mirror_mode(k)]).max_abs_entry() > 1e-14 * m[k].max_abs_entry().max(1.0) {
                    return None;
                }
            }
        }
        let defect = |w: &Option<Arc<Vec<f64>>>| {
            w.as_ref().map_or(0.0, |w| {
                let scale = w.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(f64::MIN_POSITIVE);
                (0..g.node_count()).map(|k| (w[k] - w[g.mirror_node(k)]).abs() / scale).fold(0.0, f64::max)
            })
        };
        Some(defect(&self.left).max(defect(&self.right)).max(defect(&self.diagonal)))
    }
}

fn scale_nodes(f: &mut SpinorField, w: &[f64]) {
    for c in 0..2 {
        for (z, &s) in f.component_mut(c).iter_mut().zip(w) {
            *z *= s;
        }
    }
}

fn support(grid: GridSpec, weight: Option<&Vec<f64>>, diagonal: Option<&Vec<f64>>) -> Vec<usize> {
    match (weight, diagonal) {
        (Some(w), None) => (0..grid.node_count()).filter(|&k| w[k] != 0.0).collect(),
        _ => (0..grid.node_count()).collect(),
    }
}

/// `D_m` as the multiplier by its symbol.
pub fn free_operator(grid: GridSpec, params: &ModelParams) -> OperatorHandle {
    let mut op = OperatorHandle::new(grid);
    op.multiplier = Some(plain_table(&grid, |xi| dirac_symbol(xi, params)));
    op
}

/// `R_lambda = (D_m - lambda)^{-1}`.
pub fn resolvent(grid: GridSpec, params: &ModelParams) -> OperatorHandle {
    let mut op = OperatorHandle::new(grid);
    op.multiplier = Some(plain_table(&grid, |xi| resolvent_symbol(xi, params)));
    op
}

/// `X_lambda = W R_lambda W` with `W = sqrt(V)`.
pub fn birman_schwinger(grid: GridSpec, params: &ModelParams, spec: &PotentialSpec) -> OperatorHandle {
    let w = Arc::new(spec.sample_sqrt(&grid));
    let mut op = resolvent(grid, params);
    op.left = Some(Arc::clone(&w));
    op.right = Some(w);
    op
}

/// `R_lambda` built on [`even_symbol`]; commutes with `x -> -x` exactly.
pub fn even_resolvent(grid: GridSpec, params: &ModelParams) -> OperatorHandle {
    let mut op = OperatorHandle::new(grid);
    op.multiplier = Some(symbol_table(&grid, |k| even_resolvent_symbol(&grid, k, params)));
    op
}

/// `X_lambda` built on [`even_resolvent`], for splitting into parity sectors.
pub fn even_birman_schwinger(grid: GridSpec, params: &ModelParams, spec: &PotentialSpec) -> OperatorHandle {
    let w = Arc::new(spec.sample_sqrt(&grid));
    let mut op = even_resolvent(grid, params);
    op.left = Some(Arc::clone(&w));
    op.right = Some(w);
    op
}

/// `D(t) = D_m - t V`.
pub fn perturbed_operator(
    grid: GridSpec,
    params: &ModelParams,
    spec: &PotentialSpec,
    t: f64,
) -> Result<OperatorHandle> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling must be nonnegative, got {t}")));
    }
    let mut op = free_operator(grid, params);
    if t > 0.0 {
        op.diagonal = Some(Arc::new(spec.sample(&grid).into_iter().map(|v| -t * v).collect()));
    }
    Ok(op)
}

/// Radial zones `|x| < r1`, `r1 <= |x| <= r2`, `|x| > r2` with `r_i = eps_i alpha^{1/p}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalizationSpec {
    eps1: f64,
    eps2: f64,
    coupling: f64,
    exponent: f64,
}

impl LocalizationSpec {
    pub fn new(eps1: f64, eps2: f64, coupling: f64, exponent: f64) -> Result<Self> {
        if !(eps1 > 0.0 && eps2 > eps1 && eps2.is_finite()) {
            return Err(Error::InvalidLocalization(format!("need 0 < eps1 < eps2, got eps1 = {eps1}, eps2 = {eps2}")));
        }
        if !(coupling.is_finite() && coupling > 0.0) {
            return Err(Error::InvalidLocalization(format!("coupling must be positive, got {coupling}")));
        }
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(Error::InvalidLocalization(format!("exponent must be positive, got {exponent}")));
        }
        Ok(LocalizationSpec { eps1, eps2, coupling, exponent })
    }

    pub fn eps1(&self) -> f64 {
        self.eps1
    }

    pub fn eps2(&self) -> f64 {
        self.eps2
    }

    pub fn coupling(&self) -> f64 {
        self.coupling
    }

    pub fn radii(&self) -> (f64, f64) {
        let scale = self.coupling.powf(1.0 / self.exponent);
        (self.eps1 * scale, self.eps2 * scale)
    }

    /// Zone `1`, `2` or `3` of a position.
    pub fn zone(&self, x: [f64; 2]) -> usize {
        let (r1, r2) = self.radii();
        let r = x[0].hypot(x[1]);
        if r < r1 {
            1
        } else if r <= r2 {
            2
        } else {
            3
        }
    }

    /// Indicator of zone `i` at every node.
    pub fn indicator(&self, grid: &GridSpec, i: usize) -> Vec<f64> {
        (0..grid.node_count()).map(|k| if self.zone(grid.position(k)) == i { 1.0 } else { 0.0 }).collect()
    }

    /// Nodes of zone `i`.
    pub fn zone_nodes(&self, grid: &GridSpec, i: usize) -> Vec<usize> {
        (0..grid.node_count()).filter(|&k| self.zone(grid.position(k)) == i).collect()
    }

    pub fn check_fits(&self, grid: &GridSpec) -> Result<()> {
        let (_, r2) = self.radii();
        if r2 > 0.5 * grid.box_side() {
            return Err(Error::InvalidLocalization(format!(
                "outer radius {r2} exceeds the half box side {}",
                0.5 * grid.box_side()
            )));
        }
        Ok(())
    }
}

/// `W_i R_lambda W_j` with `W_i = chi_i W`.
pub fn localized_piece(
    grid: GridSpec,
    params: &ModelParams,
    spec: &PotentialSpec,
    loc: &LocalizationSpec,
    i: usize,
    j: usize,
) -> Result<OperatorHandle> {
    if !(1..=3).contains(&i) || !(1..=3).contains(&j) {
        return Err(Error::InvalidLocalization(format!("zones must lie in 1..=3, got ({i}, {j})")));
    }
    loc.check_fits(&grid)?;
    let w = spec.sample_sqrt(&grid);
    let zoned =
        |z: usize| -> Arc<Vec<f64>> { Arc::new(loc.indicator(&grid, z).iter().zip(&w).map(|(c, w)| c * w).collect()) };
    let mut op = resolvent(grid, params);
    op.left = Some(zoned(i));
    op.right = Some(zoned(j));
    op.hermitian = i == j;
    Ok(op)
}

/// The square `beta (corner + [0, side)^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxSpec {
    corner: [f64; 2],
    side: f64,
    scale: f64,
}

impl BoxSpec {
    pub fn new(corner: [f64; 2], side: f64, scale: f64) -> Result<Self> {
        if !(side.is_finite() && side > 0.0) {
            return Err(Error::InvalidLocalization(format!("box side must be positive, got {side}")));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidLocalization(format!("box scale must be positive, got {scale}")));
        }
        if !corner.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidLocalization("box corner must be finite".into()));
        }
        Ok(BoxSpec { corner, side, scale })
    }

    /// Unit square `[0, 1)^2` scaled by `beta`.
    pub fn unit(scale: f64) -> Result<Self> {
        Self::new([0.0, 0.0], 1.0, scale)
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn side(&self) -> f64 {
        self.side
    }

    pub fn corner(&self) -> [f64; 2] {
        self.corner
    }

    /// Area of the unscaled square `Q`.
    pub fn area(&self) -> f64 {
        self.side * self.side
    }

    fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        let lo = [self.scale * self.corner[0], self.scale * self.corner[1]];
        let hi = [self.scale * (self.corner[0] + self.side), self.scale * (self.corner[1] + self.side)];
        (lo, hi)
    }

    pub fn contains(&self, x: [f64; 2]) -> bool {
        let (lo, hi) = self.bounds();
        (0..2).all(|d| x[d] >= lo[d] && x[d] < hi[d])
    }

    /// Indicator `phi_beta` at every node.
    pub fn indicator(&self, grid: &GridSpec) -> Vec<f64> {
        (0..grid.node_count()).map(|k| if self.contains(grid.position(k)) { 1.0 } else { 0.0 }).collect()
    }

    pub fn nodes(&self, grid: &GridSpec) -> Vec<usize> {
        (0..grid.node_count()).filter(|&k| self.contains(grid.position(k))).collect()
    }

    /// Checks that the scaled square stays two grid spacings inside the box.
    pub fn check_fits(&self, grid: &GridSpec) -> Result<()> {
        let (lo, hi) = self.bounds();
        let limit = 0.5 * grid.box_side() - 2.0 * grid.spacing();
        if lo.iter().chain(&hi).any(|v| v.abs() > limit) {
            return Err(Error::InvalidLocalization(format!(
                "scaled box [{}, {}) x [{}, {}) leaves the grid interior |x| <= {limit}",
                lo[0], hi[0], lo[1], hi[1]
            )));
        }
        Ok(())
    }
}

/// `phi_beta R_lambda phi_beta` with `phi_beta` the indicator of `beta Q`.
pub fn box_localized_resolvent(grid: GridSpec, params: &ModelParams, bx: &BoxSpec) -> Result<OperatorHandle> {
    bx.check_fits(&grid)?;
    let phi = Arc::new(bx.indicator(&grid));
    let mut op = resolvent(grid, params);
    op.left = Some(Arc::clone(&phi));
    op.right = Some(phi);
    Ok(op)
}

#[cfg(test)]
mod tests;
