//! Nonnegative potential families and the lattice bracket norms `[V]_p`.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::quadrature::gauss_legendre;

/// Number of angles sampled when checking a profile for negativity.
const PROFILE_SAMPLES: usize = 4096;

/// Trigonometric polynomial `c0 + sum_k (a_k cos k theta + b_k sin k theta)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngularProfile {
    c0: f64,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

impl AngularProfile {
    /// `cos[k-1]` and `sin[k-1]` are the coefficients of harmonic `k`.
    pub fn new(c0: f64, cos: Vec<f64>, sin: Vec<f64>) -> Result<Self> {
        if !std::iter::once(&c0).chain(&cos).chain(&sin).all(|c| c.is_finite()) {
            return Err(Error::InvalidPotential("profile coefficients must be finite".into()));
        }
        let profile = AngularProfile { c0, cos, sin };
        let scale = profile.coefficient_sum();
        let min = (0..PROFILE_SAMPLES)
            .map(|k| profile.raw(2.0 * PI * k as f64 / PROFILE_SAMPLES as f64))
            .fold(f64::INFINITY, f64::min);
        if min < -1e-14 * scale.max(1.0) {
            return Err(Error::InvalidPotential(format!("angular profile takes the negative value {min:e}")));
        }
        Ok(profile)
    }

    pub fn constant(c0: f64) -> Result<Self> {
        Self::new(c0, Vec::new(), Vec::new())
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn cos_coefficients(&self) -> &[f64] {
        &self.cos
    }

    pub fn sin_coefficients(&self) -> &[f64] {
        &self.sin
    }

    pub fn is_constant(&self) -> bool {
        self.cos.iter().chain(&self.sin).all(|&c| c == 0.0)
    }

    /// Upper bound `|c0| + sum |a_k| + sum |b_k|` on the profile.
    pub fn coefficient_sum(&self) -> f64 {
        self.c0.abs() + self.cos.iter().chain(&self.sin).map(|c| c.abs()).sum::<f64>()
    }

    fn raw(&self, theta: f64) -> f64 {
        let mut v = self.c0;
        for (k, a) in self.cos.iter().enumerate() {
            v += a * ((k + 1) as f64 * theta).cos();
        }
        for (k, b) in self.sin.iter().enumerate() {
            v += b * ((k + 1) as f64 * theta).sin();
        }
        v
    }

    /// Profile value, clipped at zero against roundoff between samples.
    pub fn eval(&self, theta: f64) -> f64 {
        self.raw(theta).max(0.0)
    }

    /// Profile rotated by `shift`: `theta -> Psi(theta + shift)`.
    pub fn rotated(&self, shift: f64) -> Self {
        let n = self.cos.len().max(self.sin.len());
        let mut cos = vec![0.0; n];
        let mut sin = vec![0.0; n];
        for k in 0..n {
            let a = self.cos.get(k).copied().unwrap_or(0.0);
            let b = self.sin.get(k).copied().unwrap_or(0.0);
            let (s, c) = ((k + 1) as f64 * shift).sin_cos();
            cos[k] = a * c + b * s;
            sin[k] = b * c - a * s;
        }
        AngularProfile { c0: self.c0, cos, sin }
    }

    /// Profile multiplied by `c >= 0`.
    pub fn scaled(&self, c: f64) -> Self {
        AngularProfile {
            c0: self.c0 * c,
            cos: self.cos.iter().map(|a| a * c).collect(),
            sin: self.sin.iter().map(|b| b * c).collect(),
        }
    }
}

/// `V(x) = Psi(theta) (1 + |x|^2)^{-p/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerDecay {
    exponent: f64,
    profile: AngularProfile,
}

impl PowerDecay {
    pub fn new(exponent: f64, profile: AngularProfile) -> Result<Self> {
        if !(exponent > 0.0 && exponent < 2.0) {
            return Err(Error::InvalidPotential(format!("decay exponent must lie in (0, 2), got {exponent}")));
        }
        Ok(PowerDecay { exponent, profile })
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn profile(&self) -> &AngularProfile {
        &self.profile
    }
}

/// A nonnegative potential.
#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Gaussian {
        amplitude: f64,
        width: f64,
        center: [f64; 2],
    },
    /// Constant `amplitude` on the closed disk of radius `radius`, cosine taper to zero over `margin`.
    DiskBump {
        amplitude: f64,
        radius: f64,
        margin: f64,
    },
    PowerDecay(PowerDecay),
}

impl PotentialSpec {
    pub fn gaussian(amplitude: f64, width: f64, center: [f64; 2]) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidPotential(format!("amplitude must be nonnegative, got {amplitude}")));
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidPotential(format!("width must be positive, got {width}")));
        }
        if !center.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidPotential("center must be finite".into()));
        }
        Ok(PotentialSpec::Gaussian { amplitude, width, center })
    }

    pub fn disk_bump(amplitude: f64, radius: f64, margin: f64) -> Result<Self> {
        if !(amplitude.is_finite() && amplitude >= 0.0) {
            return Err(Error::InvalidPotential(format!("amplitude must be nonnegative, got {amplitude}")));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidPotential(format!("radius must be positive, got {radius}")));
        }
        if !(margin.is_finite() && margin >= 0.0) {
            return Err(Error::InvalidPotential(format!("margin must be nonnegative, got {margin}")));
        }
        Ok(PotentialSpec::DiskBump { amplitude, radius, margin })
    }

    pub fn power_decay(exponent: f64, profile: AngularProfile) -> Result<Self> {
        Ok(PotentialSpec::PowerDecay(PowerDecay::new(exponent, profile)?))
    }

    /// Point the family is centered on.
    pub fn center(&self) -> [f64; 2] {
        match self {
            PotentialSpec::Gaussian { center, .. } => *center,
            _ => [0.0, 0.0],
        }
    }

    /// Upper bound of `V` over the whole plane.
    pub fn sup(&self) -> f64 {
        match self {
            PotentialSpec::Gaussian { amplitude, .. } | PotentialSpec::DiskBump { amplitude, .. } => *amplitude,
            PotentialSpec::PowerDecay(pd) => pd.profile.coefficient_sum(),
        }
    }

    /// Upper bound of `V` at distance at least `d` from the center.
    pub fn sup_beyond(&self, d: f64) -> f64 {
        let d = d.max(0.0);
        match self {
            PotentialSpec::Gaussian { amplitude, width, .. } => amplitude * (-(d / width).powi(2)).exp(),
            PotentialSpec::DiskBump { amplitude, radius, margin } => {
                if d > radius + margin {
                    0.0
                } else {
                    *amplitude
                }
            }
            PotentialSpec::PowerDecay(pd) => pd.profile.coefficient_sum() * (1.0 + d * d).powf(-0.5 * pd.exponent),
        }
    }

    /// True when `V` vanishes identically.
    pub fn is_zero(&self) -> bool {
        match self {
            PotentialSpec::Gaussian { amplitude, .. } | PotentialSpec::DiskBump { amplitude, .. } => *amplitude == 0.0,
            PotentialSpec::PowerDecay(pd) => pd.profile.coefficient_sum() == 0.0,
        }
    }

    /// `V` sampled at every grid node.
    pub fn sample(&self, grid: &GridSpec) -> Vec<f64> {
        (0..grid.node_count()).map(|node| eval_potential(self, grid.position(node))).collect()
    }

    /// `W = sqrt(V)` sampled at every grid node.
    pub fn sample_sqrt(&self, grid: &GridSpec) -> Vec<f64> {
        self.sample(grid).into_iter().map(f64::sqrt).collect()
    }
}

pub fn eval_potential(spec: &PotentialSpec, x: [f64; 2]) -> f64 {
    match spec {
        PotentialSpec::Gaussian { amplitude, width, center } => {
            let r2 = (x[0] - center[0]).powi(2) + (x[1] - center[1]).powi(2);
            amplitude * (-r2 / (width * width)).exp()
        }
        PotentialSpec::DiskBump { amplitude, radius, margin } => {
            let r = x[0].hypot(x[1]);
            if r <= *radius {
                *amplitude
            } else if r < radius + margin {
                0.5 * amplitude * (1.0 + (PI * (r - radius) / margin).cos())
            } else {
                0.0
            }
        }
        PotentialSpec::PowerDecay(pd) => {
            let r2 = x[0] * x[0] + x[1] * x[1];
            let theta = x[1].atan2(x[0]);
            pd.profile.eval(theta) * (1.0 + r2).powf(-0.5 * pd.exponent)
        }
    }
}

pub fn sqrt_potential(spec: &PotentialSpec, x: [f64; 2]) -> f64 {
    eval_potential(spec, x).sqrt()
}

pub fn psi_profile(spec: &PotentialSpec, theta: f64) -> Result<f64> {
    match spec {
        PotentialSpec::PowerDecay(pd) => Ok(pd.profile.eval(theta)),
        _ => Err(Error::InvalidPotential("angular profile is defined for power-decay potentials only".into())),
    }
}

/// Lattice bracket norm `[V]_{p,q}` with its truncation data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BracketNorm {
    pub p: f64,
    pub q: f64,
    pub value: f64,
    /// Upper bound on the contribution of the dropped cubes.
    pub tail_bound: f64,
    /// Set when the tail bound exceeds `1e-6` of the value.
    pub truncated: bool,
}

/// Bracket norm with one 16x16 Gauss–Legendre rule per unit cube.
pub fn bracket_norm(spec: &PotentialSpec, p: f64, q: f64, truncation_radius: f64) -> Result<BracketNorm> {
    bracket_norm_with(spec, p, q, truncation_radius, 1)
}

/// Bracket norm with each unit cube split into `subdivisions^2` subcubes.
pub fn bracket_norm_with(
    spec: &PotentialSpec,
    p: f64,
    q: f64,
    truncation_radius: f64,
    subdivisions: usize,
) -> Result<BracketNorm> {
    if let PotentialSpec::PowerDecay(pd) = spec {
        // sup V ~ |x|^{-p_V}: the lattice sums converge only for p > 1 with p * p_V > 2
        let converges = spec.is_zero() || (p > 1.0 && p * pd.exponent > 2.0);
        if !converges {
            return Err(Error::Divergent(format!(
                "power decay with exponent {} has an infinite bracket norm for p = {p}",
                pd.exponent
            )));
        }
    }
    bracket_norm_of(
        |x| eval_potential(spec, x),
        |d| spec.sup_beyond(d),
        spec.center(),
        p,
        q,
        truncation_radius,
        subdivisions,
    )
}

/// Bracket norm of an arbitrary nonnegative function.
///
/// Cubes `[0,1)^2 + n` whose distance to `center` exceeds `truncation_radius`
/// are dropped; `sup_beyond(d)` must bound the function at distance `>= d`
/// from `center` and is used for the tail estimate.
pub fn bracket_norm_of(
    f: impl Fn([f64; 2]) -> f64,
    sup_beyond: impl Fn(f64) -> f64,
    center: [f64; 2],
    p: f64,
    q: f64,
    truncation_radius: f64,
    subdivisions: usize,
) -> Result<BracketNorm> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    if p == 1.0 && !(q.is_finite() && q > 1.0) {
        return Err(Error::InvalidArgument(format!("q must exceed 1 when p = 1, got {q}")));
    }
    if !(truncation_radius.is_finite() && truncation_radius > 0.0) {
        return Err(Error::InvalidArgument(format!("truncation radius must be positive, got {truncation_radius}")));
    }
    let subdivisions = subdivisions.max(1);
    let (nodes, weights) = gauss_legendre(16);

    // power applied inside the cube integral, and to the cube total
    let (inner, outer) = if p < 1.0 {
        (1.0, p)
    } else if p == 1.0 {
        (q, 1.0 / q)
    } else {
        (p, 1.0)
    };

    let cube_integral = |n1: i64, n2: i64| -> f64 {
        let step = 1.0 / subdivisions as f64;
        let mut total = 0.0;
        for s1 in 0..subdivisions {
            for s2 in 0..subdivisions {
                let (a1, a2) = (n1 as f64 + s1 as f64 * step, n2 as f64 + s2 as f64 * step);
                for (x1, w1) in nodes.iter().zip(&weights) {
                    for (x2, w2) in nodes.iter().zip(&weights) {
                        let x = [a1 + 0.5 * step * (x1 + 1.0), a2 + 0.5 * step * (x2 + 1.0)];
                        let v = f(x);
                        if v > 0.0 {
                            total += w1 * w2 * v.powf(inner);
                        }
                    }
                }
            }
        }
        total * 0.25 * step * step
    };

    let reach = truncation_radius.ceil() as i64 + 2;
    let (c1, c2) = (center[0].floor() as i64, center[1].floor() as i64);
    let mut sum = 0.0;
    for n1 in (c1 - reach)..=(c1 + reach) {
        for n2 in (c2 - reach)..=(c2 + reach) {
            if cube_distance(n1, n2, center) > truncation_radius {
                continue;
            }
            let integral = cube_integral(n1, n2);
            sum += if p <= 1.0 { integral.powf(outer) } else { integral };
        }
    }

    // dropped cubes lie at distance > R; at most 8 (R + k) + 16 of them
    // touch the annulus [R + k, R + k + 1)
    let mut tail = 0.0;
    let mut settled = false;
    for k in 0..100_000 {
        let d = truncation_radius + k as f64;
        let v = sup_beyond(d);
        let per_cube = if p < 1.0 {
            v.powf(p)
        } else if p == 1.0 {
            v
        } else {
            v.powf(p)
        };
        let term = (8.0 * d + 16.0) * per_cube;
        tail += term;
        if term <= 1e-300 || (k > 50 && term < 1e-18 * tail.max(sum)) {
            settled = true;
            break;
        }
    }
    if !settled {
        // slowly decaying tails get no finite certificate
        tail = f64::INFINITY;
    }

    let (value, tail_bound) = if p > 1.0 {
        let v = sum.powf(1.0 / p);
        (v, (sum + tail).powf(1.0 / p) - v)
    } else {
        (sum, tail)
    };
    Ok(BracketNorm { p, q, value, tail_bound, truncated: tail_bound > 1e-6 * value })
}

fn cube_distance(n1: i64, n2: i64, c: [f64; 2]) -> f64 {
    let gap = |n: i64, c: f64| {
        let (lo, hi) = (n as f64, n as f64 + 1.0);
        if c < lo {
            lo - c
        } else if c > hi {
            c - hi
        } else {
            0.0
        }
    };
    gap(n1, c[0]).hypot(gap(n2, c[1]))
}
