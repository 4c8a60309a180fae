use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;

use super::OperatorHandle;
use crate::error::{Error, Result};
use crate::lattice::{GridSpec, SpinorField};

pub const DEFAULT_DENSE_CAP: usize = 10_000;

/// Largest entrywise asymmetry tolerated before symmetrizing, relative to `max(1, max |a_ij|)`.
pub const HERMITIAN_TOLERANCE: f64 = 1e-9;

/// A dense matrix of an operator, possibly restricted to a subset of degrees of freedom.
#[derive(Debug, Clone)]
pub struct DenseOperator {
    pub matrix: Mat<Complex64>,
    /// `max |a_ij - conj(a_ji)|` before symmetrization; `None` for non-Hermitian operators.
    pub hermitian_defect: Option<f64>,
}

/// Even and odd blocks of a parity-symmetric Hermitian operator.
#[derive(Debug, Clone)]
pub struct ParitySectors {
    pub even: DenseOperator,
    pub odd: DenseOperator,
}

fn check_cap(dimension: usize, cap: usize) -> Result<()> {
    if dimension > cap {
        return Err(Error::CapExceeded { dimension, cap });
    }
    Ok(())
}

/// Entry evaluator `A[(a, x), (b, y)]` from the kernel planes.
struct Entries<'a> {
    grid: GridSpec,
    kernel: [Vec<Complex64>; 4],
    left: Option<&'a [f64]>,
    right: Option<&'a [f64]>,
    diagonal: Option<&'a [f64]>,
    has_multiplier: bool,
}

impl<'a> Entries<'a> {
    fn new(op: &'a OperatorHandle) -> Self {
        Entries {
            grid: op.grid(),
            kernel: op.kernel(),
            left: op.left_weight(),
            right: op.right_weight(),
            diagonal: op.diagonal(),
            has_multiplier: op.multiplier().is_some(),
        }
    }

    #[inline]
    fn get(&self, a: usize, x: usize, b: usize, y: usize) -> Complex64 {
        let mut v = Complex64::default();
        if self.has_multiplier {
            let n = self.grid.n_points();
            let d1 = (x / n + n - y / n) % n;
            let d2 = (x % n + n - y % n) % n;
            let w = self.left.map_or(1.0, |l| l[x]) * self.right.map_or(1.0, |r| r[y]);
            if w != 0.0 {
                v = self.kernel[2 * a + b][d1 * n + d2] * w;
            }
        }
        if a == b && x == y {
            if let Some(d) = self.diagonal {
                v += d[x];
            }
        }
        v
    }
}

/// Column-major fill of an `rows x cols` matrix, parallel over columns.
fn fill(rows: usize, cols: usize, entry: impl Fn(usize, usize) -> Complex64 + Sync) -> Mat<Complex64> {
    let mut matrix = Mat::<Complex64>::zeros(rows, cols);
    matrix.par_col_iter_mut().enumerate().for_each(|(j, mut col)| {
        for i in 0..rows {
            col[i] = entry(i, j);
        }
    });
    matrix
}

/// Measures the Hermitian defect and replaces the matrix by `(A + A*)/2`.
fn symmetrize(matrix: &mut Mat<Complex64>) -> Result<f64> {
    let n = matrix.nrows();
    let mut defect: f64 = 0.0;
    let mut scale: f64 = 1.0;
    for j in 0..n {
        for i in j..n {
            let (a, b) = (matrix[(i, j)], matrix[(j, i)]);
            defect = defect.max((a - b.conj()).norm());
            scale = scale.max(a.norm());
        }
    }
    if defect > HERMITIAN_TOLERANCE * scale {
        return Err(Error::NotHermitian { defect, tolerance: HERMITIAN_TOLERANCE * scale });
    }
    for j in 0..n {
        for i in j..n {
            let v = 0.5 * (matrix[(i, j)] + matrix[(j, i)].conj());
            matrix[(i, j)] = v;
            matrix[(j, i)] = v.conj();
        }
    }
    Ok(defect)
}

/// Dense matrix of the operator in the flat basis `[upper..., lower...]`,
/// with the default cap.
pub fn assemble_dense(op: &OperatorHandle) -> Result<DenseOperator> {
    assemble_dense_with_cap(op, DEFAULT_DENSE_CAP)
}

pub fn assemble_dense_with_cap(op: &OperatorHandle, cap: usize) -> Result<DenseOperator> {
    let nodes: Vec<usize> = (0..op.grid().node_count()).collect();
    assemble_restricted(op, &nodes, &nodes, cap)
}

/// Dense matrix on the degrees of freedom of the listed row and column nodes.
///
/// Row `c * rows.len() + i` is component `c` at node `rows[i]`, and likewise
/// for columns. When the lists contain the operator's supports the nonzero
/// spectrum is that of the full operator. Hermitian operators assembled on
/// identical node lists are checked and symmetrized.
pub fn assemble_restricted(op: &OperatorHandle, rows: &[usize], cols: &[usize], cap: usize) -> Result<DenseOperator> {
    let (nr, nc) = (rows.len(), cols.len());
    check_cap((2 * nr).max(2 * nc), cap)?;
    let e = Entries::new(op);
    let mut matrix = fill(2 * nr, 2 * nc, |i, j| e.get(i / nr.max(1), rows[i % nr], j / nc, cols[j % nc]));
    let hermitian_defect = if op.is_hermitian() && rows == cols { Some(symmetrize(&mut matrix)?) } else { None };
    Ok(DenseOperator { matrix, hermitian_defect })
}

/// Dense matrix built by applying the operator to every basis field.
pub fn assemble_by_columns(op: &OperatorHandle, cap: usize) -> Result<Mat<Complex64>> {
    let dim = op.dimension();
    check_cap(dim, cap)?;
    let grid = op.grid();
    let columns: Vec<Vec<Complex64>> =
        (0..dim).into_par_iter().map(|k| op.apply(&SpinorField::basis(grid, k)).to_flat()).collect();
    Ok(Mat::from_fn(dim, dim, |i, j| columns[j][i]))
}

/// Orbits of `x -> -x` on the grid nodes: fixed nodes and unordered pairs.
fn parity_orbits(grid: &GridSpec) -> (Vec<usize>, Vec<(usize, usize)>) {
    let mut fixed = Vec::new();
    let mut pairs = Vec::new();
    for x in 0..grid.node_count() {
        let px = grid.mirror_node(x);
        if px == x {
            fixed.push(x);
        } else if x < px {
            pairs.push((x, px));
        }
    }
    (fixed, pairs)
}

/// Even and odd blocks of an operator commuting with `x -> -x`.
///
/// The even sector has basis `(e_x + e_{-x}) / sqrt 2` over node pairs and
/// `e_x` over the four fixed nodes, per spinor component; the odd sector uses
/// `(e_x - e_{-x}) / sqrt 2`. The two spectra together are the full spectrum.
/// The cap applies to each block.
pub fn assemble_parity_sectors(op: &OperatorHandle, cap: usize) -> Result<ParitySectors> {
    if !op.is_hermitian() {
        return Err(Error::InvalidArgument("parity sectors need a Hermitian operator".into()));
    }
    match op.parity_defect() {
        Some(d) if d <= 1e-12 => {}
        _ => return Err(Error::InvalidArgument("operator does not commute with the reflection x -> -x".into())),
    }
    let grid = op.grid();
    let (fixed, pairs) = parity_orbits(&grid);
    let e = Entries::new(op);
    let s = std::f64::consts::FRAC_1_SQRT_2;

    // each orbit is a list of (node, coefficient)
    let mut even: Vec<Vec<(usize, f64)>> = pairs.iter().map(|&(x, px)| vec![(x, s), (px, s)]).collect();
    even.extend(fixed.iter().map(|&x| vec![(x, 1.0)]));
    let odd: Vec<Vec<(usize, f64)>> = pairs.iter().map(|&(x, px)| vec![(x, s), (px, -s)]).collect();

    let block = |orbits: &[Vec<(usize, f64)>]| -> Result<DenseOperator> {
        let m = orbits.len();
        check_cap(2 * m, cap)?;
        let mut matrix = fill(2 * m, 2 * m, |i, j| {
            let (a, oi) = (i / m, &orbits[i % m]);
            let (b, oj) = (j / m, &orbits[j % m]);
            let mut v = Complex64::default();
            for &(x, cx) in oi {
                for &(y, cy) in oj {
                    v += e.get(a, x, b, y) * (cx * cy);
                }
            }
            v
        });
        let defect = symmetrize(&mut matrix)?;
        Ok(DenseOperator { matrix, hermitian_defect: Some(defect) })
    };
    Ok(ParitySectors { even: block(&even)?, odd: block(&odd)? })
}
