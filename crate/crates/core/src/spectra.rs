//! Dense and Krylov spectra plus the counting functionals `n`, `n_+`, `n_-`
//! and the weak-Schatten quasi-norms.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::cholesky::lblt::factor::{cholesky_in_place, cholesky_in_place_scratch};
use faer::{Mat, Side};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::operator::{assemble_dense_with_cap, OperatorHandle, HERMITIAN_TOLERANCE};

/// Relative margin a value must clear to count as strictly above a threshold.
pub const TIE_MARGIN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrumKind {
    Eigenvalues,
    SingularValues,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Dense,
    Iterative,
}

/// Descending spectrum with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult {
    pub values: Vec<f64>,
    pub kind: SpectrumKind,
    pub method: Method,
    /// Largest spot-checked residual `|A v - lambda v|` (0 when not measured).
    pub residual: f64,
}

impl SpectrumResult {
    /// `n_+(s)` for eigenvalues, `n(s)` for singular values.
    pub fn count_above(&self, s: f64) -> Result<usize> {
        count_above(&self.values, s)
    }

    /// `n_-(s)`; only meaningful for eigenvalues.
    pub fn count_below_negative(&self, s: f64) -> Result<usize> {
        n_minus(&self.values, s)
    }
}

fn hermitian_defect(a: &Mat<Complex64>) -> (f64, f64) {
    let n = a.nrows();
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for j in 0..n {
        for i in j..n {
            defect = defect.max((a[(i, j)] - a[(j, i)].conj()).norm());
            scale = scale.max(a[(i, j)].norm());
        }
    }
    (defect, scale)
}

fn require_hermitian(a: &Mat<Complex64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::InvalidArgument(format!("expected a square matrix, got {} x {}", a.nrows(), a.ncols())));
    }
    let (defect, scale) = hermitian_defect(a);
    if defect > HERMITIAN_TOLERANCE * scale {
        return Err(Error::NotHermitian { defect, tolerance: HERMITIAN_TOLERANCE * scale });
    }
    Ok(())
}

fn descending(mut v: Vec<f64>) -> Vec<f64> {
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

/// Full real spectrum of a Hermitian matrix, with a residual check on five pairs.
pub fn hermitian_eigenvalues(a: &Mat<Complex64>) -> Result<SpectrumResult> {
    require_hermitian(a)?;
    let n = a.nrows();
    if n == 0 {
        return Ok(SpectrumResult {
            values: Vec::new(),
            kind: SpectrumKind::Eigenvalues,
            method: Method::Dense,
            residual: 0.0,
        });
    }
    let evd = a.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver(format!("{e:?}")))?;
    let s = evd.S();
    let u = evd.U();
    let values: Vec<f64> = (0..n).map(|i| s[i].re).collect();
    let norm = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));

    let picks = [0, n / 4, n / 2, (3 * n) / 4, n - 1];
    let mut residual: f64 = 0.0;
    for &k in &picks {
        let mut r2 = 0.0;
        for i in 0..n {
            let mut av = Complex64::default();
            for j in 0..n {
                av += a[(i, j)] * u[(j, k)];
            }
            r2 += (av - u[(i, k)] * values[k]).norm_sqr();
        }
        residual = residual.max(r2.sqrt());
    }
    if residual > 1e-8 * norm.max(f64::MIN_POSITIVE) {
        return Err(Error::Solver(format!("eigenpair residual {residual:e} exceeds 1e-8 |A| = {:e}", 1e-8 * norm)));
    }
    Ok(SpectrumResult { values: descending(values), kind: SpectrumKind::Eigenvalues, method: Method::Dense, residual })
}

/// Eigenvalues only, without eigenvectors or residual check.
pub fn hermitian_eigenvalues_fast(a: &Mat<Complex64>) -> Result<SpectrumResult> {
    require_hermitian(a)?;
    if a.nrows() == 0 {
        return Ok(SpectrumResult {
            values: Vec::new(),
            kind: SpectrumKind::Eigenvalues,
            method: Method::Dense,
            residual: 0.0,
        });
    }
    let values = a.self_adjoint_eigenvalues(Side::Lower).map_err(|e| Error::Solver(format!("{e:?}")))?;
    Ok(SpectrumResult {
        values: descending(values),
        kind: SpectrumKind::Eigenvalues,
        method: Method::Dense,
        residual: 0.0,
    })
}

/// Singular values, descending.
pub fn singular_values(a: &Mat<Complex64>) -> Result<SpectrumResult> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Ok(SpectrumResult {
            values: Vec::new(),
            kind: SpectrumKind::SingularValues,
            method: Method::Dense,
            residual: 0.0,
        });
    }
    if a.col_iter().any(|c| c.iter().any(|z| !(z.re.is_finite() && z.im.is_finite()))) {
        return Err(Error::InvalidArgument("matrix has non-finite entries".into()));
    }
    let values = a.singular_values().map_err(|e| Error::Solver(format!("{e:?}")))?;
    Ok(SpectrumResult {
        values: descending(values.into_iter().map(|v| v.max(0.0)).collect()),
        kind: SpectrumKind::SingularValues,
        method: Method::Dense,
        residual: 0.0,
    })
}

fn check_threshold(s: f64) -> Result<()> {
    if !(s.is_finite() && s > 0.0) {
        return Err(Error::InvalidArgument(format!("threshold must be positive, got {s}")));
    }
    Ok(())
}

/// Number of values strictly above `s`; ties within `TIE_MARGIN` do not count.
pub fn count_above(values: &[f64], s: f64) -> Result<usize> {
    check_threshold(s)?;
    let cut = s * (1.0 + TIE_MARGIN);
    Ok(values.iter().filter(|&&v| v > cut).count())
}

/// `n_+(s, T)` from eigenvalues.
pub fn n_plus(eigenvalues: &[f64], s: f64) -> Result<usize> {
    count_above(eigenvalues, s)
}

/// `n_-(s, T) = n_+(s, -T)`.
pub fn n_minus(eigenvalues: &[f64], s: f64) -> Result<usize> {
    check_threshold(s)?;
    let cut = s * (1.0 + TIE_MARGIN);
    Ok(eigenvalues.iter().filter(|&&v| -v > cut).count())
}

/// `||T||_{Sigma_p} = sup_s s n(s)^{1/p} = max_k k^{1/p} s_k` for descending singular values.
pub fn sigma_p_seminorm(singular_values: &[f64], p: f64) -> Result<f64> {
    if !(p.is_finite() && p > 0.0) {
        return Err(Error::InvalidArgument(format!("p must be positive, got {p}")));
    }
    let best = singular_values.iter().enumerate().map(|(k, s)| (k + 1) as f64 * s.powf(p)).fold(0.0, f64::max);
    Ok(best.powf(1.0 / p))
}

/// Negative inertia of a Hermitian matrix by Bunch–Kaufman `L B L*` (Sylvester's law).
///
/// Consumes the matrix, which is overwritten by the factorization.
pub fn negative_inertia(mut a: Mat<Complex64>) -> Result<usize> {
    let n = a.nrows();
    if n != a.ncols() {
        return Err(Error::InvalidArgument("inertia needs a square matrix".into()));
    }
    if n == 0 {
        return Ok(0);
    }
    let par = faer::get_global_parallelism();
    let mut subdiag = faer::diag::Diag::<Complex64>::zeros(n);
    let mut perm = vec![0usize; n];
    let mut perm_inv = vec![0usize; n];
    let mut mem = MemBuffer::new(cholesky_in_place_scratch::<usize, Complex64>(n, par, Default::default()));
    let stack = MemStack::new(&mut mem);
    cholesky_in_place(a.as_mut(), subdiag.as_mut(), &mut perm, &mut perm_inv, par, stack, Default::default());
    let mut negative = 0;
    let mut i = 0;
    while i < n {
        let s = subdiag[i];
        if i + 1 < n && s != Complex64::default() {
            let (d0, d1) = (a[(i, i)].re, a[(i + 1, i + 1)].re);
            let det = d0 * d1 - s.norm_sqr();
            if det < 0.0 {
                negative += 1;
            } else if d0 + d1 < 0.0 {
                negative += 2;
            }
            i += 2;
        } else {
            if a[(i, i)].re < 0.0 {
                negative += 1;
            }
            i += 1;
        }
    }
    Ok(negative)
}

/// `n_+(s, A)` as the negative inertia of `s (1 + TIE_MARGIN) - A`.
pub fn inertia_count_above(a: &Mat<Complex64>, s: f64) -> Result<usize> {
    check_threshold(s)?;
    require_hermitian(a)?;
    let cut = s * (1.0 + TIE_MARGIN);
    let n = a.nrows();
    let shifted = Mat::from_fn(n, n, |i, j| {
        let d = if i == j { Complex64::new(cut, 0.0) } else { Complex64::default() };
        d - a[(i, j)]
    });
    negative_inertia(shifted)
}

/// In-place variant of [`inertia_count_above`] for large blocks: the matrix
/// is overwritten, saving a copy.
pub fn inertia_count_above_owned(mut a: Mat<Complex64>, s: f64) -> Result<usize> {
    check_threshold(s)?;
    require_hermitian(&a)?;
    let cut = s * (1.0 + TIE_MARGIN);
    let n = a.nrows();
    for j in 0..n {
        for i in 0..n {
            a[(i, j)] = -a[(i, j)];
        }
        a[(j, j)] += Complex64::new(cut, 0.0);
    }
    negative_inertia(a)
}

/// Power iteration on `A* A`; returns the converged estimate of `||A||`.
pub fn power_norm(op: &OperatorHandle, max_iterations: usize, seed: u64) -> f64 {
    let adj = op.adjoint();
    let dim = op.dimension();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<Complex64> =
        (0..dim).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    normalize(&mut v);
    let mut estimate: f64 = 0.0;
    for _ in 0..max_iterations {
        let w = adj.apply_flat(&op.apply_flat(&v));
        let rayleigh = dot(&v, &w).re.max(0.0);
        let norm = norm2(&w);
        if norm == 0.0 {
            return 0.0;
        }
        let next = rayleigh.sqrt();
        let settled = (next - estimate).abs() <= 1e-15 * next;
        estimate = next;
        v = w.into_iter().map(|z| z / norm).collect();
        if settled {
            break;
        }
    }
    estimate
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm2(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn normalize(a: &mut [Complex64]) -> f64 {
    let n = norm2(a);
    if n > 0.0 {
        for z in a.iter_mut() {
            *z /= n;
        }
    }
    n
}

fn orthogonalize(w: &mut [Complex64], basis: &[Vec<Complex64>]) {
    // two passes of classical Gram–Schmidt
    for _ in 0..2 {
        for q in basis {
            let c = dot(q, w);
            for (x, y) in w.iter_mut().zip(q) {
                *x -= c * y;
            }
        }
    }
}

/// Limits for [`iterative_count_above`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeBudget {
    /// Total operator applications allowed.
    pub max_matvecs: usize,
    /// Largest Krylov space per Lanczos run.
    pub max_krylov: usize,
    /// Dense fallback is used only up to this dimension.
    pub dense_cap: usize,
    /// Certificates below this are treated as too weak.
    pub min_certificate: f64,
    pub seed: u64,
}

impl Default for IterativeBudget {
    fn default() -> Self {
        IterativeBudget {
            max_matvecs: 20_000,
            max_krylov: 300,
            dense_cap: crate::operator::DEFAULT_DENSE_CAP,
            min_certificate: 1e-8,
            seed: 0x5eed,
        }
    }
}

/// Outcome of a certified count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterativeCount {
    pub count: usize,
    /// Distance from `s` to the nearest converged Ritz value on either side,
    /// less the residuals; infinite for dense results.
    pub certificate: f64,
    pub matvecs: usize,
    pub method: Method,
}

/// Count of eigenvalues above `s` by Lanczos with full reorthogonalization and locking.
///
/// Each run works on the operator deflated by the already locked
/// eigenvectors. Converged Ritz pairs above `s` are locked; the count is
/// settled once a run's largest converged Ritz value falls below `s`. When
/// the straddle certificate is weaker than `budget.min_certificate`, the
/// dense path decides if the dimension allows it; otherwise the result is
/// [`Error::Inconclusive`].
pub fn iterative_count_above(op: &OperatorHandle, s: f64, budget: &IterativeBudget) -> Result<IterativeCount> {
    check_threshold(s)?;
    if !op.is_hermitian() {
        return Err(Error::InvalidArgument("iterative count needs a Hermitian operator".into()));
    }
    let dim = op.dimension();
    let cut = s * (1.0 + TIE_MARGIN);
    let mut rng = ChaCha8Rng::seed_from_u64(budget.seed);
    let mut locked: Vec<Vec<Complex64>> = Vec::new();
    let mut locked_values: Vec<f64> = Vec::new();
    let mut matvecs = 0usize;
    let mut scale: f64 = 0.0;

    let dense = |matvecs: usize| -> Result<IterativeCount> {
        let a = assemble_dense_with_cap(op, budget.dense_cap)?;
        let spectrum = hermitian_eigenvalues_fast(&a.matrix)?;
        Ok(IterativeCount {
            count: count_above(&spectrum.values, s)?,
            certificate: f64::INFINITY,
            matvecs,
            method: Method::Dense,
        })
    };
    let fallback = |matvecs: usize, certificate: f64| -> Result<IterativeCount> {
        if dim <= budget.dense_cap {
            dense(matvecs)
        } else {
            Err(Error::Inconclusive { iterations: matvecs, certificate })
        }
    };

    loop {
        if locked.len() >= dim {
            break;
        }
        // start vector orthogonal to the locked space
        let mut q: Vec<Complex64> =
            (0..dim).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        orthogonalize(&mut q, &locked);
        if normalize(&mut q) == 0.0 {
            break;
        }
        let mut basis: Vec<Vec<Complex64>> = vec![q];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let room = (dim - locked.len()).min(budget.max_krylov);
        let mut outcome = None;

        while outcome.is_none() {
            let j = basis.len() - 1;
            let mut w = op.apply_flat(&basis[j]);
            matvecs += 1;
            orthogonalize(&mut w, &locked);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            orthogonalize(&mut w, &basis);
            let b = norm2(&w);
            scale = scale.max(a.abs()).max(b);
            let invariant = b <= 1e-13 * scale.max(f64::MIN_POSITIVE);
            let full = basis.len() >= room;
            let exhausted = matvecs >= budget.max_matvecs;
            let check = invariant || full || exhausted || alpha.len().is_multiple_of(10);

            if check {
                let k = alpha.len();
                let t = Mat::<f64>::from_fn(k, k, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r == c + 1 {
                        beta[c]
                    } else if c == r + 1 {
                        beta[r]
                    } else {
                        0.0
                    }
                });
                let evd = t.self_adjoint_eigen(Side::Lower).map_err(|e| Error::Solver(format!("{e:?}")))?;
                let (theta, y) = (evd.S(), evd.U());
                let tail = if invariant { 0.0 } else { b };
                let tol = 1e-10 * scale.max(f64::MIN_POSITIVE);
                // Ritz pairs, ascending; residual estimate |b y_k|
                let ritz: Vec<(f64, f64, usize)> =
                    (0..k).map(|i| (theta[i], (tail * y[(k - 1, i)]).abs(), i)).collect();
                let (top, top_res, _) = ritz[k - 1];
                if top_res <= tol || invariant || full || exhausted {
                    let mut lock = Vec::new();
                    for &(value, res, i) in ritz.iter().rev() {
                        if value <= cut || res > tol {
                            break;
                        }
                        lock.push((value, i));
                    }
                    if !lock.is_empty() {
                        for (value, i) in lock {
                            let mut v = vec![Complex64::default(); dim];
                            for (r, qr) in basis.iter().enumerate() {
                                let c = y[(r, i)];
                                for (x, z) in v.iter_mut().zip(qr) {
                                    *x += z * c;
                                }
                            }
                            orthogonalize(&mut v, &locked);
                            normalize(&mut v);
                            locked.push(v);
                            locked_values.push(value);
                        }
                        outcome = Some(false);
                    } else if top <= cut && top_res <= tol {
                        // deflated spectrum lies below s
                        let below = s - (top + top_res);
                        let above = locked_values.iter().map(|&v| v - s).fold(f64::INFINITY, f64::min);
                        let certificate = below.min(above) - tol;
                        if certificate < budget.min_certificate {
                            return fallback(matvecs, certificate);
                        }
                        return Ok(IterativeCount {
                            count: locked.len(),
                            certificate,
                            matvecs,
                            method: Method::Iterative,
                        });
                    } else if invariant || full || exhausted {
                        // nothing converged in a full Krylov space
                        return fallback(matvecs, 0.0);
                    }
                }
            }
            if outcome.is_none() {
                if invariant || full || exhausted {
                    return fallback(matvecs, 0.0);
                }
                beta.push(b);
                let next: Vec<Complex64> = w.into_iter().map(|z| z / b).collect();
                basis.push(next);
            }
        }
        if matvecs >= budget.max_matvecs {
            return fallback(matvecs, 0.0);
        }
    }
    let above = locked_values.iter().map(|&v| v - s).fold(f64::INFINITY, f64::min);
    if above < budget.min_certificate {
        return fallback(matvecs, above);
    }
    Ok(IterativeCount { count: locked.len(), certificate: above, matvecs, method: Method::Iterative })
}

#[cfg(test)]
mod tests;
