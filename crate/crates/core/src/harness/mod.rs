//! Experiment driver: configs, the counting studies, and their outputs.

pub mod config;
pub mod report;

use std::time::Instant;

use rayon::prelude::*;

use crate::asymptotic::{box_coefficient, j_integral, phase_space_volume, weyl_coefficient};
use crate::error::{Error, Result};
use crate::flow::{branch_trace_with_cap, crossing_count_with_cap};
use crate::lattice::GridSpec;
use crate::operator::{
    assemble_dense_with_cap, assemble_parity_sectors, assemble_restricted, birman_schwinger, box_localized_resolvent,
    even_birman_schwinger, localized_piece, OperatorHandle,
};
use crate::potential::PotentialSpec;
use crate::spectra::{
    count_above, hermitian_eigenvalues_fast, inertia_count_above, iterative_count_above, singular_values,
    IterativeBudget,
};

pub use config::{BoxStudy, ExperimentConfig, GridPlan, StudyKind};
pub use report::{emit_outputs, parse_csv, plot_svg, to_csv, BoxRow, CountingReport, CountingRow, CrossTermRow, Table};

/// Values within this relative distance of a threshold make a count a tie.
pub const TIE_TOLERANCE: f64 = 1e-10;

/// Process exit status for an error: 2 for configuration problems, 3 for
/// caps, solver failures and I/O.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_)
        | Error::InvalidGrid(_)
        | Error::InvalidParams(_)
        | Error::InvalidPotential(_)
        | Error::InvalidArgument(_)
        | Error::InvalidLocalization(_)
        | Error::NotIntegrable(_)
        | Error::Divergent(_) => 2,
        Error::CapExceeded { .. }
        | Error::NotHermitian { .. }
        | Error::Solver(_)
        | Error::Inconclusive { .. }
        | Error::Io { .. } => 3,
    }
}

/// Exit status of a finished run: 4 when some count sat on a degenerate threshold.
pub fn report_exit_code(report: &CountingReport) -> i32 {
    if report.degenerate.is_empty() {
        0
    } else {
        4
    }
}

fn near_threshold(values: &[f64], s: f64) -> bool {
    values.iter().any(|v| (v - s).abs() <= TIE_TOLERANCE * s)
}

/// A count with its tie flag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct Count {
    value: usize,
    tie: bool,
}

fn count_from_values(values: &[f64], s: f64) -> Result<Count> {
    Ok(Count { value: count_above(values, s)?, tie: near_threshold(values, s) })
}

/// `n_+(s)` of a Hermitian operator by the cheapest exact route the config
/// allows: parity sectors, dense inertia, or certified Lanczos.
fn count_hermitian(
    op: &OperatorHandle,
    s: f64,
    config: &ExperimentConfig,
    parity: Option<&OperatorHandle>,
) -> Result<Count> {
    let by_inertia = |m: &faer::Mat<num_complex::Complex64>| -> Result<Count> {
        let value = inertia_count_above(m, s)?;
        let below = inertia_count_above(m, s * (1.0 - TIE_TOLERANCE))?;
        Ok(Count { value, tie: below != value })
    };
    if let Some(even_op) = parity {
        let sectors = assemble_parity_sectors(even_op, config.dense_cap)?;
        let (a, b) = (by_inertia(&sectors.even.matrix)?, by_inertia(&sectors.odd.matrix)?);
        return Ok(Count { value: a.value + b.value, tie: a.tie || b.tie });
    }
    if op.dimension() <= config.dense_cap {
        let a = assemble_dense_with_cap(op, config.dense_cap)?;
        return by_inertia(&a.matrix);
    }
    let budget = IterativeBudget { dense_cap: config.dense_cap, seed: config.seed, ..IterativeBudget::default() };
    let c = iterative_count_above(op, s, &budget)?;
    Ok(Count { value: c.count, tie: c.certificate <= TIE_TOLERANCE * s })
}

fn grid_entry(g: &GridSpec) -> (usize, f64) {
    (g.n_points(), g.box_side())
}

fn finish(
    config: &ExperimentConfig,
    table: Table,
    grids: Vec<(usize, f64)>,
    degenerate: Vec<f64>,
    start: Instant,
) -> CountingReport {
    CountingReport {
        study: config.study,
        table,
        echo: config.echo(),
        grids,
        degenerate,
        branches: None,
        runtime: start.elapsed(),
    }
}

fn check_study(config: &ExperimentConfig, kind: StudyKind) -> Result<()> {
    if config.study != kind {
        return Err(Error::Config(format!("config is for study {}, not {kind}", config.study)));
    }
    config.validate()
}

/// Counts by eigenvalue flow for every coupling, when requested.
fn flow_counts(config: &ExperimentConfig, grid: GridSpec) -> Result<Vec<Option<(usize, bool)>>> {
    if !config.flow_compare {
        return Ok(vec![None; config.alphas.len()]);
    }
    config
        .alphas
        .par_iter()
        .map(|&alpha| {
            let c = crossing_count_with_cap(grid, &config.model, &config.potential, alpha, config.dense_cap)?;
            Ok(Some((c.count, c.degenerate.is_some())))
        })
        .collect()
}

/// Birman–Schwinger counts at every coupling on one fixed grid.
fn fixed_grid_counts(config: &ExperimentConfig, grid: GridSpec) -> Result<Vec<Count>> {
    let op = birman_schwinger(grid, &config.model, &config.potential);
    if op.dimension() <= config.dense_cap {
        // one spectrum serves every threshold
        let a = assemble_dense_with_cap(&op, config.dense_cap)?;
        let values = hermitian_eigenvalues_fast(&a.matrix)?.values;
        return config.alphas.iter().map(|&alpha| count_from_values(&values, 1.0 / alpha)).collect();
    }
    config.alphas.par_iter().map(|&alpha| count_hermitian(&op, 1.0 / alpha, config, None)).collect()
}

fn counting_rows(
    config: &ExperimentConfig,
    counts: &[Count],
    flows: &[Option<(usize, bool)>],
    prediction: impl Fn(f64) -> f64,
) -> (Vec<CountingRow>, Vec<f64>) {
    let mut degenerate = Vec::new();
    let rows = config
        .alphas
        .iter()
        .zip(counts.iter().zip(flows))
        .map(|(&alpha, (c, flow))| {
            if c.tie || flow.is_some_and(|f| f.1) {
                degenerate.push(alpha);
            }
            let prediction = prediction(alpha);
            CountingRow {
                alpha,
                n_bs: c.value,
                n_flow: flow.map(|f| f.0),
                prediction,
                ratio: report::ratio(c.value, prediction),
            }
        })
        .collect();
    (rows, degenerate)
}

/// `N(lambda, alpha)` against `alpha/(4 pi) int V` on a fixed grid.
pub fn run_weyl_study(config: &ExperimentConfig) -> Result<CountingReport> {
    check_study(config, StudyKind::Weyl)?;
    let start = Instant::now();
    let coefficient = weyl_coefficient(&config.potential)?.value;
    let grid = config.grid_for(1.0)?;
    if config.flow_compare && grid.dimension() > config.dense_cap {
        return Err(Error::CapExceeded { dimension: grid.dimension(), cap: config.dense_cap });
    }
    let counts = fixed_grid_counts(config, grid)?;
    let flows = flow_counts(config, grid)?;
    let (rows, degenerate) = counting_rows(config, &counts, &flows, |alpha| alpha * coefficient);
    Ok(finish(config, Table::Counting(rows), vec![grid_entry(&grid)], degenerate, start))
}

/// `N(lambda, alpha)` against `alpha^{2/p} J(lambda, m)` for a power-decay potential.
pub fn run_power_law_study(config: &ExperimentConfig) -> Result<CountingReport> {
    check_study(config, StudyKind::PowerLaw)?;
    let start = Instant::now();
    let PotentialSpec::PowerDecay(pd) = &config.potential else {
        return Err(Error::Config("the theorem2 study needs a power_decay potential".into()));
    };
    let j = j_integral(&config.model, pd)?.value;
    let p = pd.exponent();
    let grids: Vec<GridSpec> = config.alphas.iter().map(|&a| config.grid_for(a)).collect::<Result<_>>()?;
    let counts: Vec<Count> = config
        .alphas
        .par_iter()
        .zip(&grids)
        .map(|(&alpha, &grid)| {
            let op = birman_schwinger(grid, &config.model, &config.potential);
            let even = config.parity.then(|| even_birman_schwinger(grid, &config.model, &config.potential));
            count_hermitian(&op, 1.0 / alpha, config, even.as_ref())
        })
        .collect::<Result<_>>()?;
    let flows = if config.flow_compare {
        config
            .alphas
            .par_iter()
            .zip(&grids)
            .map(|(&alpha, &grid)| {
                let c = crossing_count_with_cap(grid, &config.model, &config.potential, alpha, config.dense_cap)?;
                Ok(Some((c.count, c.degenerate.is_some())))
            })
            .collect::<Result<Vec<_>>>()?
    } else {
        vec![None; config.alphas.len()]
    };
    let (rows, degenerate) = counting_rows(config, &counts, &flows, |alpha| alpha.powf(2.0 / p) * j);
    Ok(finish(config, Table::Counting(rows), grids.iter().map(grid_entry).collect(), degenerate, start))
}

/// Ordered pairs `(i, j)`, `i != j`, of the three radial zones.
pub const CROSS_PAIRS: [(usize, usize); 6] = [(1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2)];

/// `n(eps / alpha, W_i R W_j)` for every off-diagonal zone pair.
pub fn run_crossterm_study(config: &ExperimentConfig) -> Result<CountingReport> {
    check_study(config, StudyKind::CrossTerm)?;
    let start = Instant::now();
    let eps = config.crossterm_eps.ok_or_else(|| Error::Config("missing crossterm.eps".into()))?;
    let p = config.exponent().unwrap_or(1.0);
    let grids: Vec<GridSpec> = config.alphas.iter().map(|&a| config.grid_for(a)).collect::<Result<_>>()?;
    let blocks: Vec<Vec<(CrossTermRow, bool)>> = config
        .alphas
        .par_iter()
        .zip(&grids)
        .map(|(&alpha, &grid)| {
            let loc = config.localization_for(alpha)?;
            let s = eps / alpha;
            CROSS_PAIRS
                .iter()
                .map(|&(i, j)| {
                    let rows = loc.zone_nodes(&grid, i);
                    let cols = loc.zone_nodes(&grid, j);
                    let (count, tie) = if rows.is_empty() || cols.is_empty() {
                        (0, false)
                    } else {
                        let piece = localized_piece(grid, &config.model, &config.potential, &loc, i, j)?;
                        let a = assemble_restricted(&piece, &rows, &cols, config.dense_cap)?;
                        let sv = singular_values(&a.matrix)?.values;
                        (count_above(&sv, s)?, near_threshold(&sv, s))
                    };
                    let row = CrossTermRow { alpha, i, j, count, normalized: count as f64 / alpha.powf(2.0 / p) };
                    Ok((row, tie))
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    let mut degenerate = Vec::new();
    let mut rows = Vec::new();
    for block in blocks {
        for (row, tie) in block {
            if tie && degenerate.last() != Some(&row.alpha) {
                degenerate.push(row.alpha);
            }
            rows.push(row);
        }
    }
    Ok(finish(config, Table::CrossTerm(rows), grids.iter().map(grid_entry).collect(), degenerate, start))
}

/// `n_+(tau, phi_beta R phi_beta)` against `beta^2 |Q| (4 pi)^{-1} ((1/tau + lambda)_+^2 - m^2)_+^{1/2}`.
pub fn run_box_study(config: &ExperimentConfig) -> Result<CountingReport> {
    check_study(config, StudyKind::Box)?;
    let start = Instant::now();
    let b = config.box_study.as_ref().ok_or_else(|| Error::Config("missing box study settings".into()))?;
    let grid = config.grid_for(1.0)?;
    let coefficient = box_coefficient(b.tau, &config.model, b.side * b.side)?;
    let results: Vec<(BoxRow, bool)> = b
        .betas
        .par_iter()
        .map(|&beta| {
            let bx = b.spec(beta)?;
            let nodes = bx.nodes(&grid);
            let (count, tie) = if nodes.is_empty() {
                (0, false)
            } else {
                let op = box_localized_resolvent(grid, &config.model, &bx)?;
                let a = assemble_restricted(&op, &nodes, &nodes, config.dense_cap)?;
                let values = hermitian_eigenvalues_fast(&a.matrix)?.values;
                let c = count_from_values(&values, b.tau)?;
                (c.value, c.tie)
            };
            let prediction = beta * beta * coefficient;
            Ok((BoxRow { beta, count, prediction, ratio: report::ratio(count, prediction) }, tie))
        })
        .collect::<Result<_>>()?;
    let degenerate = results.iter().filter(|r| r.1).map(|r| r.0.beta).collect();
    let rows = results.into_iter().map(|r| r.0).collect();
    Ok(finish(config, Table::Box(rows), vec![grid_entry(&grid)], degenerate, start))
}

/// Leading-order prediction per coupling for whichever law applies to the potential.
fn prediction_law(config: &ExperimentConfig) -> Result<Box<dyn Fn(f64) -> f64 + Sync>> {
    Ok(match &config.potential {
        PotentialSpec::PowerDecay(pd) => {
            let j = j_integral(&config.model, pd)?.value;
            let p = pd.exponent();
            Box::new(move |alpha: f64| alpha.powf(2.0 / p) * j)
        }
        spec => {
            let c = weyl_coefficient(spec)?.value;
            Box::new(move |alpha: f64| alpha * c)
        }
    })
}

/// Gap eigenvalue branches of `D(t)` for `t` in `[0, alpha_max]`, with both counts per coupling.
pub fn run_flow_trace(config: &ExperimentConfig) -> Result<CountingReport> {
    check_study(config, StudyKind::FlowTrace)?;
    let start = Instant::now();
    let grid = config.grid_for(1.0)?;
    if grid.dimension() > config.dense_cap {
        return Err(Error::CapExceeded { dimension: grid.dimension(), cap: config.dense_cap });
    }
    let law = prediction_law(config)?;
    let alpha_max = *config.alphas.last().expect("validated nonempty");
    let steps = config.flow_steps;
    let t_grid: Vec<f64> = (0..=steps).map(|k| alpha_max * k as f64 / steps as f64).collect();
    let trace = branch_trace_with_cap(grid, &config.model, &config.potential, &t_grid, config.dense_cap)?;
    let counts = fixed_grid_counts(config, grid)?;
    let flows: Vec<Option<(usize, bool)>> = config
        .alphas
        .par_iter()
        .map(|&alpha| {
            let c = crossing_count_with_cap(grid, &config.model, &config.potential, alpha, config.dense_cap)?;
            Ok(Some((c.count, c.degenerate.is_some())))
        })
        .collect::<Result<_>>()?;
    let (rows, degenerate) = counting_rows(config, &counts, &flows, law);
    let mut report = finish(config, Table::Counting(rows), vec![grid_entry(&grid)], degenerate, start);
    report.branches = Some(trace);
    Ok(report)
}

/// Named limiting coefficients for the config, computed without any spectra.
pub fn run_oracle(config: &ExperimentConfig) -> Result<Vec<(String, f64)>> {
    check_study(config, StudyKind::Oracle)?;
    let mut out = Vec::new();
    match &config.potential {
        PotentialSpec::PowerDecay(pd) => {
            let j = j_integral(&config.model, pd)?;
            out.push(("j_integral".into(), j.value));
            out.push(("j_integral_error".into(), j.error));
        }
        spec => {
            let w = weyl_coefficient(spec)?;
            out.push(("weyl_coefficient".into(), w.value));
            out.push(("weyl_coefficient_error".into(), w.error));
            let ps = phase_space_volume(spec)?;
            out.push(("phase_space_volume".into(), ps.value));
            out.push(("phase_space_volume_error".into(), ps.error));
        }
    }
    if let Some(b) = &config.box_study {
        out.push(("box_coefficient".into(), box_coefficient(b.tau, &config.model, b.side * b.side)?));
    }
    Ok(out)
}

/// Runs the counting study named by the config.
pub fn run_study(config: &ExperimentConfig) -> Result<CountingReport> {
    match config.study {
        StudyKind::Weyl => run_weyl_study(config),
        StudyKind::PowerLaw => run_power_law_study(config),
        StudyKind::CrossTerm => run_crossterm_study(config),
        StudyKind::Box => run_box_study(config),
        StudyKind::FlowTrace => run_flow_trace(config),
        StudyKind::Oracle => Err(Error::Config("the oracle study produces no report; use run_oracle".into())),
    }
}
