//! Quadrature oracles for the limiting objects of the counting laws.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::potential::{eval_potential, PotentialSpec, PowerDecay};
use crate::quadrature::integrate;
use crate::symbol::{ModelParams, SymbolMatrix};

const PANEL_LIMIT: usize = 4000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictionKind {
    Weyl,
    PowerLaw,
    Box,
    PhaseSpace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AsymptoticPrediction {
    pub kind: PredictionKind,
    pub value: f64,
    pub error: f64,
}

/// Radii at which a radial family has a kink, plus a radius beyond which it is negligible.
fn radial_breaks(spec: &PotentialSpec) -> Result<(Vec<f64>, f64)> {
    match spec {
        PotentialSpec::Gaussian { width, .. } => Ok((Vec::new(), 40.0 * width)),
        PotentialSpec::DiskBump { radius, margin, .. } => {
            let mut breaks = vec![*radius];
            if *margin > 0.0 {
                breaks.push(radius + margin);
            }
            Ok((breaks, radius + margin))
        }
        PotentialSpec::PowerDecay(pd) => {
            Err(Error::NotIntegrable(format!("power decay with exponent {} <= 2 has infinite integral", pd.exponent())))
        }
    }
}

/// Integral of `f` over `[a, b]` split at `breaks`.
fn piecewise(f: &impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> (f64, f64) {
    let mut points = vec![a];
    points.extend(breaks.iter().copied().filter(|&t| t > a && t < b));
    points.push(b);
    points.sort_by(f64::total_cmp);
    points.windows(2).fold((0.0, 0.0), |(v, e), w| {
        let q = integrate(f, w[0], w[1], tol, tol, PANEL_LIMIT);
        (v + q.value, e + q.error)
    })
}

/// `(1/4 pi) int V dx`, by radial quadrature about the family center.
pub fn weyl_coefficient(spec: &PotentialSpec) -> Result<AsymptoticPrediction> {
    let (breaks, reach) = radial_breaks(spec)?;
    if spec.is_zero() {
        return Ok(AsymptoticPrediction { kind: PredictionKind::Weyl, value: 0.0, error: 0.0 });
    }
    let c = spec.center();
    let radial = |r: f64| r * eval_potential(spec, [c[0] + r, c[1]]);
    let (v, e) = piecewise(&radial, 0.0, reach, &breaks, 1e-14);
    let scale = 2.0 * PI / (4.0 * PI);
    Ok(AsymptoticPrediction { kind: PredictionKind::Weyl, value: scale * v, error: scale * e })
}

/// `(2 pi)^{-2} int dx int chi_Omega dxi` with the inner integral `pi V(x)`,
/// by iterated Cartesian quadrature over `x`.
pub fn phase_space_volume(spec: &PotentialSpec) -> Result<AsymptoticPrediction> {
    let (breaks, reach) = radial_breaks(spec)?;
    if spec.is_zero() {
        return Ok(AsymptoticPrediction { kind: PredictionKind::PhaseSpace, value: 0.0, error: 0.0 });
    }
    let c = spec.center();
    let outer_breaks: Vec<f64> = breaks.iter().flat_map(|&r| [-r, r]).collect();
    let error = std::cell::Cell::new(0.0);
    let slice = |t: f64| {
        let inner_breaks: Vec<f64> = breaks
            .iter()
            .filter(|&&r| r > t.abs())
            .flat_map(|&r| {
                let s = (r * r - t * t).sqrt();
                [-s, s]
            })
            .collect();
        let f = |u: f64| PI * eval_potential(spec, [c[0] + t, c[1] + u]);
        let (v, e) = piecewise(&f, -reach, reach, &inner_breaks, 1e-13);
        error.set(f64::max(error.get(), e));
        v
    };
    let q = {
        let mut points = vec![-reach];
        points.extend(outer_breaks.iter().copied().filter(|&t| t.abs() < reach));
        points.push(reach);
        points.sort_by(f64::total_cmp);
        points.windows(2).fold((0.0, 0.0), |(v, e), w| {
            let q = integrate(slice, w[0], w[1], 1e-12, 1e-12, PANEL_LIMIT);
            (v + q.value, e + q.error)
        })
    };
    let norm = 1.0 / (4.0 * PI * PI);
    // the worst slice error integrated over the outer range bounds the inner part
    Ok(AsymptoticPrediction {
        kind: PredictionKind::PhaseSpace,
        value: norm * q.0,
        error: norm * (q.1 + 2.0 * reach * error.get()),
    })
}

/// `G(x, xi) = V(x) |xi|^{-4} [[0, -(xi1 - i xi2)^2], [-(xi1 + i xi2)^2, 0]]`.
pub fn g_matrix(x: [f64; 2], xi: [f64; 2], spec: &PotentialSpec) -> Result<SymbolMatrix> {
    let q = xi[0] * xi[0] + xi[1] * xi[1];
    if q == 0.0 {
        return Err(Error::InvalidArgument("G is undefined at xi = 0".into()));
    }
    let v = eval_potential(spec, x);
    let z = Complex64::new(xi[0], -xi[1]);
    let off = -(z * z) * (v / (q * q));
    Ok(SymbolMatrix::new(Complex64::default(), off, off.conj(), Complex64::default()))
}

/// Indicator of `V(x) > |xi|^2`.
pub fn phase_space_count(x: [f64; 2], xi: [f64; 2], spec: &PotentialSpec) -> Result<u8> {
    let q = xi[0] * xi[0] + xi[1] * xi[1];
    if q == 0.0 {
        return Err(Error::InvalidArgument("phase-space indicator is undefined at xi = 0".into()));
    }
    Ok(u8::from(eval_potential(spec, x) > q))
}

/// Area of a star-shaped set about the origin, `int (1/2) rho(theta)^2 dtheta`,
/// where `rho(theta)` is found by bisection on the membership test.
pub fn star_area(inside: impl Fn([f64; 2]) -> bool, angles: usize) -> f64 {
    let radius = |theta: f64| {
        let dir = [theta.cos(), theta.sin()];
        let at = |r: f64| inside([r * dir[0], r * dir[1]]);
        let mut hi = 1.0;
        while at(hi) {
            hi *= 2.0;
            if hi > 1e12 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        if !at(hi * 1e-12) {
            return 0.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if at(mid) {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    let dt = 2.0 * PI / angles as f64;
    (0..angles).map(|k| 0.5 * radius((k as f64 + 0.5) * dt).powi(2)).sum::<f64>() * dt
}

/// `int chi_Omega(x, xi) dxi` by polar quadrature in `xi`, with membership
/// decided by the eigenvalues of `G(x, xi)`.
pub fn phase_space_inner(x: [f64; 2], spec: &PotentialSpec, angles: usize) -> f64 {
    star_area(
        |xi| match g_matrix(x, xi, spec) {
            Ok(g) => g.hermitian_eigenvalues()[1] > 1.0,
            // xi = 0 lies in Omega whenever V(x) > 0
            Err(_) => eval_potential(spec, x) > 0.0,
        },
        angles,
    )
}

/// `(4 pi)^{-1} ((1/tau + lambda)_+^2 - m^2)_+^{1/2} area`, per unit `beta^2`.
pub fn box_coefficient(tau: f64, params: &ModelParams, area: f64) -> Result<f64> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(Error::InvalidArgument(format!("tau must be positive, got {tau}")));
    }
    if !(area.is_finite() && area > 0.0) {
        return Err(Error::InvalidArgument(format!("area must be positive, got {area}")));
    }
    Ok(box_momentum_radius_sqr(tau, params) * area / (4.0 * PI))
}

/// `((1/tau + lambda)_+^2 - m^2)_+^{1/2}`, the squared radius of the momentum disk
/// where the resolvent symbol exceeds `tau`.
fn box_momentum_radius_sqr(tau: f64, params: &ModelParams) -> f64 {
    let a = (1.0 / tau + params.gap_point()).max(0.0);
    (a * a - params.mass().powi(2)).max(0.0).sqrt()
}

/// Area of `{xi : (sqrt(|xi|^4 + m^2) - lambda)^{-1} > tau}` by polar quadrature.
pub fn box_momentum_area(tau: f64, params: &ModelParams, angles: usize) -> f64 {
    let (m, lam) = (params.mass(), params.gap_point());
    star_area(
        |xi| {
            let q = xi[0] * xi[0] + xi[1] * xi[1];
            1.0 / (m.hypot(q) - lam) > tau
        },
        angles,
    )
}

/// `J(lambda, m) = (1/4 pi) int [((lambda + Psi(theta) r^{-p})_+^2 - m^2)_+]^{1/2} dx`.
///
/// For each angle the radial support is `r < R(theta) = (Psi / (m - lambda))^{1/p}`.
/// The radial integral uses `r = R u^kappa` with `kappa = 2 / (2 - p)`, which
/// makes the `r^{1-p}` behavior at the origin smooth; the angular integral is
/// the periodic trapezoid rule, doubled from 512 panels until it settles.
pub fn j_integral(params: &ModelParams, spec: &PowerDecay) -> Result<AsymptoticPrediction> {
    let p = spec.exponent();
    if !(p > 0.0 && p < 2.0) {
        return Err(Error::InvalidArgument(format!("p must lie in (0, 2), got {p}")));
    }
    let (m, lam) = (params.mass(), params.gap_point());
    let profile = spec.profile();
    let radial_error = std::cell::Cell::new(0.0f64);
    let radial = |theta: f64| {
        let psi = profile.eval(theta);
        let q = radial_integral(psi, p, m, lam);
        radial_error.set(radial_error.get().max(q.1));
        q.0
    };

    let trapezoid = |panels: usize| {
        let dt = 2.0 * PI / panels as f64;
        (0..panels).map(|k| radial(k as f64 * dt)).sum::<f64>() * dt
    };
    let mut panels = 512;
    let mut current = trapezoid(panels);
    let mut error;
    loop {
        let refined = trapezoid(2 * panels);
        error = (refined - current).abs();
        current = refined;
        panels *= 2;
        if error <= 1e-12 * current.abs().max(1.0) || panels >= 1 << 16 {
            break;
        }
    }
    let norm = 1.0 / (4.0 * PI);
    Ok(AsymptoticPrediction {
        kind: PredictionKind::PowerLaw,
        value: norm * current,
        error: norm * (error + 2.0 * PI * radial_error.get()),
    })
}

/// `int_0^R [((lambda + psi r^{-p})_+^2 - m^2)_+]^{1/2} r dr` and its error estimate.
pub fn radial_integral(psi: f64, p: f64, m: f64, lam: f64) -> (f64, f64) {
    if psi <= 0.0 {
        return (0.0, 0.0);
    }
    let big_r = (psi / (m - lam)).powf(1.0 / p);
    let kappa = 2.0 / (2.0 - p);
    let integrand = |u: f64| {
        if u <= 0.0 {
            return 0.0;
        }
        let r = big_r * u.powf(kappa);
        let a = (lam + psi * r.powf(-p)).max(0.0);
        let root = (a * a - m * m).max(0.0).sqrt();
        let dr = big_r * kappa * u.powf(kappa - 1.0);
        root * r * dr
    };
    let q = integrate(integrand, 0.0, 1.0, 1e-15, 1e-13, PANEL_LIMIT);
    (q.value, q.error)
}
