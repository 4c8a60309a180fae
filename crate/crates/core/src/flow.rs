//! Eigenvalue flow of `D(t) = D_m - t V` through the gap point.
//!
//! Since `V >= 0`, every eigenvalue branch of the Hermitian family `D(t)` is
//! nonincreasing in `t`, so the number of branches crossing `lambda` on
//! `[0, alpha]` is the growth of the count of eigenvalues below `lambda`.

use std::cmp::Ordering;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::operator::{assemble_dense_with_cap, perturbed_operator, DEFAULT_DENSE_CAP};
use crate::potential::PotentialSpec;
use crate::spectra::hermitian_eigenvalues_fast;
use crate::symbol::{symbol_eigenvalues, ModelParams};

/// Eigenvalues this close to `lambda` make the count ill-posed.
pub const COLLISION_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CrossingCount {
    pub count: usize,
    /// When an eigenvalue of `D(alpha)` sits within the collision tolerance of
    /// `lambda`: the counts with those eigenvalues taken above and below `lambda`.
    pub degenerate: Option<(usize, usize)>,
}

impl CrossingCount {
    /// True when `value` is consistent with this count.
    pub fn admits(&self, value: usize) -> bool {
        match self.degenerate {
            Some((lo, hi)) => (lo..=hi).contains(&value),
            None => value == self.count,
        }
    }
}

/// Eigenvalues of the free operator below `lambda`, read off the symbol.
fn free_count_below(grid: &GridSpec, params: &ModelParams) -> Result<usize> {
    let lam = params.gap_point();
    let mut below = 0;
    for k in 0..grid.node_count() {
        let (lo, hi) = symbol_eigenvalues(grid.mode_momentum(k), params);
        for e in [lo, hi] {
            if (e - lam).abs() <= COLLISION_TOLERANCE {
                return Err(Error::Solver("free spectrum touches the gap point".into()));
            }
            if e < lam {
                below += 1;
            }
        }
    }
    Ok(below)
}

/// Descending eigenvalues of the dense `D(t)`.
fn dense_flow_spectrum(
    grid: GridSpec,
    params: &ModelParams,
    spec: &PotentialSpec,
    t: f64,
    cap: usize,
) -> Result<Vec<f64>> {
    let op = perturbed_operator(grid, params, spec, t)?;
    let a = assemble_dense_with_cap(&op, cap)?;
    Ok(hermitian_eigenvalues_fast(&a.matrix)?.values)
}

/// Number of eigenvalues of `D(t)` crossing `lambda` for `t` in `[0, alpha]`.
pub fn crossing_count(grid: GridSpec, params: &ModelParams, spec: &PotentialSpec, alpha: f64) -> Result<CrossingCount> {
    crossing_count_with_cap(grid, params, spec, alpha, DEFAULT_DENSE_CAP)
}

pub fn crossing_count_with_cap(
    grid: GridSpec,
    params: &ModelParams,
    spec: &PotentialSpec,
    alpha: f64,
    cap: usize,
) -> Result<CrossingCount> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(Error::InvalidArgument(format!("coupling must be nonnegative, got {alpha}")));
    }
    if grid.dimension() > cap {
        return Err(Error::CapExceeded { dimension: grid.dimension(), cap });
    }
    if alpha == 0.0 {
        return Ok(CrossingCount { count: 0, degenerate: None });
    }
    let base = free_count_below(&grid, params)?;
    let values = dense_flow_spectrum(grid, params, spec, alpha, cap)?;
    Ok(count_from_spectrum(&values, params.gap_point(), base))
}

fn count_from_spectrum(values: &[f64], lam: f64, base: usize) -> CrossingCount {
    let below = values.iter().filter(|&&e| e < lam - COLLISION_TOLERANCE).count();
    let near = values.iter().filter(|&&e| (e - lam).abs() <= COLLISION_TOLERANCE).count();
    let count = below.saturating_sub(base);
    CrossingCount { count, degenerate: (near > 0).then(|| (count, (below + near).saturating_sub(base))) }
}

/// Gap eigenvalues of `D(t)` along a coupling grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowTrace {
    pub t_values: Vec<f64>,
    /// Eigenvalues inside `(-m, m)` at each `t`, descending.
    pub gap_eigenvalues: Vec<Vec<f64>>,
    /// Rank of each gap eigenvalue in the full descending spectrum; equal
    /// ranks at neighboring `t` belong to the same monotone branch.
    pub gap_ranks: Vec<Vec<usize>>,
    pub crossing_count: CrossingCount,
}

impl FlowTrace {
    /// Branches as `(rank, [(t, eigenvalue)])`, ordered by rank.
    pub fn branches(&self) -> Vec<(usize, Vec<(f64, f64)>)> {
        let mut map = std::collections::BTreeMap::<usize, Vec<(f64, f64)>>::new();
        for (i, (values, ranks)) in self.gap_eigenvalues.iter().zip(&self.gap_ranks).enumerate() {
            for (&e, &r) in values.iter().zip(ranks) {
                map.entry(r).or_default().push((self.t_values[i], e));
            }
        }
        map.into_iter().collect()
    }
}

pub fn branch_trace(grid: GridSpec, params: &ModelParams, spec: &PotentialSpec, t_grid: &[f64]) -> Result<FlowTrace> {
    branch_trace_with_cap(grid, params, spec, t_grid, DEFAULT_DENSE_CAP)
}

pub fn branch_trace_with_cap(
    grid: GridSpec,
    params: &ModelParams,
    spec: &PotentialSpec,
    t_grid: &[f64],
    cap: usize,
) -> Result<FlowTrace> {
    if t_grid.first() != Some(&0.0) {
        return Err(Error::InvalidArgument("coupling grid must start at 0".into()));
    }
    if t_grid.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater))
        || t_grid.iter().any(|t| !t.is_finite())
    {
        return Err(Error::InvalidArgument("coupling grid must be strictly increasing".into()));
    }
    if grid.dimension() > cap {
        return Err(Error::CapExceeded { dimension: grid.dimension(), cap });
    }
    let m = params.mass();
    let edge = m * (1.0 - 1e-10);
    let base = free_count_below(&grid, params)?;
    let mut gap_eigenvalues = Vec::with_capacity(t_grid.len());
    let mut gap_ranks = Vec::with_capacity(t_grid.len());
    let mut last = CrossingCount { count: 0, degenerate: None };
    for &t in t_grid {
        let values = dense_flow_spectrum(grid, params, spec, t, cap)?;
        let (vals, ranks): (Vec<f64>, Vec<usize>) =
            values.iter().enumerate().filter(|(_, e)| e.abs() < edge).map(|(r, &e)| (e, r)).unzip();
        gap_eigenvalues.push(vals);
        gap_ranks.push(ranks);
        last = if t == 0.0 {
            CrossingCount { count: 0, degenerate: None }
        } else {
            count_from_spectrum(&values, params.gap_point(), base)
        };
    }
    Ok(FlowTrace { t_values: t_grid.to_vec(), gap_eigenvalues, gap_ranks, crossing_count: last })
}
