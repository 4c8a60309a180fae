//! Pointwise 2x2 momentum-space algebra of the bilayer graphene operator.
//!
//! With `d/dx_j -> i xi_j` the free operator acts on each Fourier mode as
//!
//! ```text
//!   D(xi) = [[ m,              -(xi1 - i xi2)^2 ],
//!            [ -(xi1 + i xi2)^2,  -m           ]]
//! ```
//!
//! whose eigenvalues are `+-sqrt(m^2 + |xi|^4)`. The opposite off-diagonal
//! sign convention is conjugate to this one by `diag(1, -1)`, so no count or
//! norm depends on the choice.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Mass `m > 0` and gap point `lambda` with `|lambda| < m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams {
    mass: f64,
    gap_point: f64,
}

impl ModelParams {
    pub fn new(mass: f64, gap_point: f64) -> Result<Self> {
        if !(mass.is_finite() && mass > 0.0) {
            return Err(Error::InvalidParams(format!("mass must be positive, got {mass}")));
        }
        if !(gap_point.is_finite() && gap_point.abs() < mass) {
            return Err(Error::InvalidParams(format!(
                "gap point {gap_point} must lie strictly inside (-{mass}, {mass})"
            )));
        }
        Ok(ModelParams { mass, gap_point })
    }

    pub fn mass(&self) -> f64 {
        self.mass
    }

    pub fn gap_point(&self) -> f64 {
        self.gap_point
    }

    /// `dist(lambda, spectrum) = m - |lambda|`.
    pub fn gap_distance(&self) -> f64 {
        self.mass - self.gap_point.abs()
    }
}

/// A 2x2 complex matrix attached to one momentum.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SymbolMatrix {
    pub a11: Complex64,
    pub a12: Complex64,
    pub a21: Complex64,
    pub a22: Complex64,
}

impl SymbolMatrix {
    pub fn new(a11: Complex64, a12: Complex64, a21: Complex64, a22: Complex64) -> Self {
        SymbolMatrix { a11, a12, a21, a22 }
    }

    pub fn identity() -> Self {
        let one = Complex64::new(1.0, 0.0);
        SymbolMatrix::new(one, Complex64::default(), Complex64::default(), one)
    }

    pub fn scale(self, s: f64) -> Self {
        SymbolMatrix::new(self.a11 * s, self.a12 * s, self.a21 * s, self.a22 * s)
    }

    pub fn adjoint(self) -> Self {
        SymbolMatrix::new(self.a11.conj(), self.a21.conj(), self.a12.conj(), self.a22.conj())
    }

    pub fn trace(self) -> Complex64 {
        self.a11 + self.a22
    }

    pub fn det(self) -> Complex64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    pub fn apply(self, v: [Complex64; 2]) -> [Complex64; 2] {
        [self.a11 * v[0] + self.a12 * v[1], self.a21 * v[0] + self.a22 * v[1]]
    }

    pub fn entry(self, row: usize, col: usize) -> Complex64 {
        match (row, col) {
            (0, 0) => self.a11,
            (0, 1) => self.a12,
            (1, 0) => self.a21,
            _ => self.a22,
        }
    }

    /// Largest absolute entry difference from the adjoint.
    /// Inverse by the adjugate; the caller guarantees a nonzero determinant.
    pub fn inverse(self) -> Self {
        let d = self.det();
        SymbolMatrix::new(self.a22 / d, -self.a12 / d, -self.a21 / d, self.a11 / d)
    }

    pub fn hermitian_defect(self) -> f64 {
        let d = self - self.adjoint();
        [d.a11, d.a12, d.a21, d.a22].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_entry(self) -> f64 {
        [self.a11, self.a12, self.a21, self.a22].iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Eigenvalues of the Hermitian part, ascending, in closed form.
    pub fn hermitian_eigenvalues(self) -> [f64; 2] {
        let a = self.a11.re;
        let d = self.a22.re;
        let b = 0.5 * (self.a12 + self.a21.conj());
        let mean = 0.5 * (a + d);
        let half = 0.5 * (a - d);
        let r = half.hypot(b.norm());
        [mean - r, mean + r]
    }

    /// Spectral norm via the eigenvalues of `A* A`.
    pub fn operator_norm(self) -> f64 {
        let g = self.adjoint() * self;
        g.hermitian_eigenvalues()[1].max(0.0).sqrt()
    }

    /// Conjugation by `diag(1, -1)`, i.e. the sign flip of both off-diagonal entries.
    pub fn sign_flipped(self) -> Self {
        SymbolMatrix::new(self.a11, -self.a12, -self.a21, self.a22)
    }
}

impl Add for SymbolMatrix {
    type Output = SymbolMatrix;
    fn add(self, o: SymbolMatrix) -> SymbolMatrix {
        SymbolMatrix::new(self.a11 + o.a11, self.a12 + o.a12, self.a21 + o.a21, self.a22 + o.a22)
    }
}

impl Sub for SymbolMatrix {
    type Output = SymbolMatrix;
    fn sub(self, o: SymbolMatrix) -> SymbolMatrix {
        SymbolMatrix::new(self.a11 - o.a11, self.a12 - o.a12, self.a21 - o.a21, self.a22 - o.a22)
    }
}

impl Mul for SymbolMatrix {
    type Output = SymbolMatrix;
    fn mul(self, o: SymbolMatrix) -> SymbolMatrix {
        SymbolMatrix::new(
            self.a11 * o.a11 + self.a12 * o.a21,
            self.a11 * o.a12 + self.a12 * o.a22,
            self.a21 * o.a11 + self.a22 * o.a21,
            self.a21 * o.a12 + self.a22 * o.a22,
        )
    }
}

fn off_diagonal(xi: [f64; 2]) -> (Complex64, Complex64) {
    let z = Complex64::new(xi[0], -xi[1]);
    let upper = z * z;
    (upper, upper.conj())
}

fn xi_sqr(xi: [f64; 2]) -> f64 {
    xi[0] * xi[0] + xi[1] * xi[1]
}

/// Symbol of the free operator at momentum `xi`. Only the mass enters.
pub fn dirac_symbol(xi: [f64; 2], params: &ModelParams) -> SymbolMatrix {
    let (a12, a21) = off_diagonal(xi);
    let m = Complex64::new(params.mass, 0.0);
    SymbolMatrix::new(m, -a12, -a21, -m)
}

/// `(D(xi) - lambda)^{-1}` by direct 2x2 inversion.
pub fn resolvent_symbol(xi: [f64; 2], params: &ModelParams) -> SymbolMatrix {
    let (m, lam) = (params.mass, params.gap_point);
    let (a12, a21) = off_diagonal(xi);
    let q = xi_sqr(xi);
    // lambda^2 - m^2 - |xi|^4 < 0 for every xi because |lambda| < m
    let inv_det = 1.0 / (lam * lam - m * m - q * q);
    SymbolMatrix::new(
        Complex64::new((-m - lam) * inv_det, 0.0),
        a12 * inv_det,
        a21 * inv_det,
        Complex64::new((m - lam) * inv_det, 0.0),
    )
}

/// `(-sqrt(m^2 + |xi|^4), +sqrt(m^2 + |xi|^4))`.
pub fn symbol_eigenvalues(xi: [f64; 2], params: &ModelParams) -> (f64, f64) {
    let q = xi_sqr(xi);
    let e = params.mass.hypot(q);
    (-e, e)
}

/// Power of the weight `(1 + |xi|^2)` multiplying the resolvent symbol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorWeight {
    /// `(1 + |xi|^2)^{1/2}` on each side: `b(xi) = (1 + |xi|^2) R(xi)`.
    Full,
    /// `(1 + |xi|^2)^{1/2}` on one side only.
    Half,
}

impl FactorWeight {
    fn exponent(self) -> f64 {
        match self {
            FactorWeight::Full => 1.0,
            FactorWeight::Half => 0.5,
        }
    }
}

/// The bounded factor `(1 + |xi|^2)^e R(xi)`.
pub fn bounded_factor(xi: [f64; 2], params: &ModelParams, weight: FactorWeight) -> SymbolMatrix {
    let w = (1.0 + xi_sqr(xi)).powf(weight.exponent());
    resolvent_symbol(xi, params).scale(w)
}

/// Norm of the bounded factor as a function of `t = |xi|^2`, from the
/// resolvent eigenvalues `1 / (+-E - lambda)`.
fn bounded_factor_norm_at(t: f64, params: &ModelParams, weight: FactorWeight) -> f64 {
    let e = params.mass.hypot(t);
    (1.0 + t).powf(weight.exponent()) / (e - params.gap_point.abs())
}

/// `sup_xi |b(xi)|` from the closed-form norm `(1+t)^e / (sqrt(m^2+t^2) - |lambda|)`.
pub fn bounded_factor_sup(params: &ModelParams, weight: FactorWeight) -> f64 {
    let f = |t: f64| bounded_factor_norm_at(t, params, weight);
    // coarse log sweep then golden-section refinement around the best sample
    let samples: Vec<f64> =
        std::iter::once(0.0).chain((0..=400).map(|k| 10f64.powf(-6.0 + 12.0 * k as f64 / 400.0))).collect();
    let (best, _) = samples.iter().enumerate().map(|(i, &t)| (i, f(t))).fold((0, f64::NEG_INFINITY), |acc, (i, v)| {
        if v > acc.1 {
            (i, v)
        } else {
            acc
        }
    });
    let lo = samples[best.saturating_sub(1)];
    let hi = samples[(best + 1).min(samples.len() - 1)];
    let peak = golden_max(f, lo, hi, 200);
    let limit = match weight {
        FactorWeight::Full => 1.0,
        FactorWeight::Half => 0.0,
    };
    peak.max(f(0.0)).max(limit)
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let mut best = f(a).max(f(b));
    for _ in 0..iters {
        let (fc, fd) = (f(c), f(d));
        best = best.max(fc).max(fd);
        if fc > fd {
            b = d;
        } else {
            a = c;
        }
        c = b - g * (b - a);
        d = a + g * (b - a);
    }
    best
}
