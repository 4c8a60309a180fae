use std::fmt::Write as _;
use std::path::Path;
use std::time::Duration;

use crate::error::{Error, Result};
use crate::flow::FlowTrace;

use super::config::StudyKind;

pub const COUNTING_HEADER: &str = "alpha,n_bs,n_flow,prediction,ratio";
pub const BOX_HEADER: &str = "beta,count,prediction,ratio";
pub const CROSSTERM_HEADER: &str = "alpha,i,j,count,normalized";
pub const BRANCH_HEADER: &str = "t,rank,eigenvalue";

#[derive(Debug, Clone, PartialEq)]
pub struct CountingRow {
    pub alpha: f64,
    pub n_bs: usize,
    pub n_flow: Option<usize>,
    pub prediction: f64,
    /// `n_bs / prediction`, present iff the prediction is positive.
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxRow {
    pub beta: f64,
    pub count: usize,
    pub prediction: f64,
    pub ratio: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossTermRow {
    pub alpha: f64,
    pub i: usize,
    pub j: usize,
    pub count: usize,
    pub normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Table {
    Counting(Vec<CountingRow>),
    Box(Vec<BoxRow>),
    CrossTerm(Vec<CrossTermRow>),
}

pub(crate) fn ratio(count: usize, prediction: f64) -> Option<f64> {
    (prediction > 0.0).then(|| count as f64 / prediction)
}

/// Result of one study run.
#[derive(Debug, Clone)]
pub struct CountingReport {
    pub study: StudyKind,
    pub table: Table,
    /// Canonical echo of the config that produced the report.
    pub echo: String,
    /// `n_points x box_side` per row group, in row order.
    pub grids: Vec<(usize, f64)>,
    /// Coupling (or box scale) values whose count sits on a threshold tie
    /// or a flow collision.
    pub degenerate: Vec<f64>,
    pub branches: Option<FlowTrace>,
    pub runtime: Duration,
}

impl CountingReport {
    /// False when a ratio sequence decreases somewhere.
    pub fn ratios_monotone(&self) -> bool {
        let ratios: Vec<f64> = match &self.table {
            Table::Counting(rows) => rows.iter().filter_map(|r| r.ratio).collect(),
            Table::Box(rows) => rows.iter().filter_map(|r| r.ratio).collect(),
            Table::CrossTerm(_) => return true,
        };
        ratios.windows(2).all(|w| w[1] >= w[0])
    }
}

/// 17 significant digits, enough to round-trip every `f64`.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn to_csv(table: &Table) -> String {
    let mut out = String::new();
    match table {
        Table::Counting(rows) => {
            out.push_str(COUNTING_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_float(r.alpha),
                    r.n_bs,
                    opt(r.n_flow),
                    format_float(r.prediction),
                    opt(r.ratio.map(format_float)),
                );
            }
        }
        Table::Box(rows) => {
            out.push_str(BOX_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    format_float(r.beta),
                    r.count,
                    format_float(r.prediction),
                    opt(r.ratio.map(format_float)),
                );
            }
        }
        Table::CrossTerm(rows) => {
            out.push_str(CROSSTERM_HEADER);
            out.push('\n');
            for r in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    format_float(r.alpha),
                    r.i,
                    r.j,
                    r.count,
                    format_float(r.normalized)
                );
            }
        }
    }
    out
}

pub fn branches_csv(trace: &FlowTrace) -> String {
    let mut out = format!("{BRANCH_HEADER}\n");
    for (t, (values, ranks)) in trace.t_values.iter().zip(trace.gap_eigenvalues.iter().zip(&trace.gap_ranks)) {
        for (e, r) in values.iter().zip(ranks) {
            let _ = writeln!(out, "{},{},{}", format_float(*t), r, format_float(*e));
        }
    }
    out
}

fn field<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<T> {
    s.parse().map_err(|_| Error::Config(format!("csv line {line}: bad {name} `{s}`")))
}

fn optional<T: std::str::FromStr>(line: usize, name: &str, s: &str) -> Result<Option<T>> {
    if s.is_empty() {
        Ok(None)
    } else {
        field(line, name, s).map(Some)
    }
}

/// Parses a CSV written by [`to_csv`]; the header selects the table kind.
pub fn parse_csv(text: &str) -> Result<Table> {
    let mut lines = text.split('\n');
    let header = lines.next().unwrap_or_default();
    let body: Vec<(usize, Vec<&str>)> =
        lines.enumerate().filter(|(_, l)| !l.is_empty()).map(|(k, l)| (k + 2, l.split(',').collect())).collect();
    let width = header.split(',').count();
    if let Some((k, _)) = body.iter().find(|(_, f)| f.len() != width) {
        return Err(Error::Config(format!("csv line {k}: expected {width} fields")));
    }
    match header {
        COUNTING_HEADER => body
            .iter()
            .map(|(k, f)| {
                Ok(CountingRow {
                    alpha: field(*k, "alpha", f[0])?,
                    n_bs: field(*k, "n_bs", f[1])?,
                    n_flow: optional(*k, "n_flow", f[2])?,
                    prediction: field(*k, "prediction", f[3])?,
                    ratio: optional(*k, "ratio", f[4])?,
                })
            })
            .collect::<Result<_>>()
            .map(Table::Counting),
        BOX_HEADER => body
            .iter()
            .map(|(k, f)| {
                Ok(BoxRow {
                    beta: field(*k, "beta", f[0])?,
                    count: field(*k, "count", f[1])?,
                    prediction: field(*k, "prediction", f[2])?,
                    ratio: optional(*k, "ratio", f[3])?,
                })
            })
            .collect::<Result<_>>()
            .map(Table::Box),
        CROSSTERM_HEADER => body
            .iter()
            .map(|(k, f)| {
                Ok(CrossTermRow {
                    alpha: field(*k, "alpha", f[0])?,
                    i: field(*k, "i", f[1])?,
                    j: field(*k, "j", f[2])?,
                    count: field(*k, "count", f[3])?,
                    normalized: field(*k, "normalized", f[4])?,
                })
            })
            .collect::<Result<_>>()
            .map(Table::CrossTerm),
        other => Err(Error::Config(format!("unknown csv header `{other}`"))),
    }
}

/// Named series of `(x, y)` points for the plot, positive values only.
type Series = (String, Vec<(f64, f64)>);

fn plot_series(table: &Table) -> (String, Vec<Series>) {
    let keep = |x: f64, y: f64| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite();
    match table {
        Table::Counting(rows) => (
            "alpha".into(),
            vec![(
                "ratio".into(),
                rows.iter().filter_map(|r| r.ratio.map(|q| (r.alpha, q))).filter(|&(x, y)| keep(x, y)).collect(),
            )],
        ),
        Table::Box(rows) => (
            "beta".into(),
            vec![(
                "ratio".into(),
                rows.iter().filter_map(|r| r.ratio.map(|q| (r.beta, q))).filter(|&(x, y)| keep(x, y)).collect(),
            )],
        ),
        Table::CrossTerm(rows) => {
            let mut pairs: Vec<(usize, usize)> = rows.iter().map(|r| (r.i, r.j)).collect();
            pairs.sort_unstable();
            pairs.dedup();
            let series = pairs
                .into_iter()
                .map(|(i, j)| {
                    let pts = rows
                        .iter()
                        .filter(|r| (r.i, r.j) == (i, j))
                        .map(|r| (r.alpha, r.normalized))
                        .filter(|&(x, y)| keep(x, y))
                        .collect();
                    (format!("normalized ({i},{j})"), pts)
                })
                .collect();
            ("alpha".into(), series)
        }
    }
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

/// Static log-log polyline chart of the report's ratio (or normalized) column.
pub fn plot_svg(table: &Table) -> String {
    let (xlabel, series) = plot_series(table);
    let (w, h, m) = (640.0, 400.0, 60.0);
    let points: Vec<(f64, f64)> = series.iter().flat_map(|(_, p)| p.iter().copied()).collect();
    let bounds = |f: fn(&(f64, f64)) -> f64| {
        let (lo, hi) = points
            .iter()
            .map(|p| f(p).log10())
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            (0.0, 1.0)
        } else if hi - lo < 1e-9 {
            (lo - 0.5, hi + 0.5)
        } else {
            (lo, hi)
        }
    };
    let (x0, x1) = bounds(|p| p.0);
    let (y0, y1) = bounds(|p| p.1);
    let sx = |x: f64| m + (x.log10() - x0) / (x1 - x0) * (w - 2.0 * m);
    let sy = |y: f64| h - m - (y.log10() - y0) / (y1 - y0) * (h - 2.0 * m);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">"
    );
    let _ = writeln!(svg, "<rect x=\"0\" y=\"0\" width=\"{w}\" height=\"{h}\" fill=\"white\"/>");
    let _ = writeln!(
        svg,
        "<rect x=\"{m}\" y=\"{m}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        w - 2.0 * m,
        h - 2.0 * m
    );
    let label = |v: f64| format!("{:.3e}", 10f64.powf(v));
    let _ = writeln!(svg, "<text x=\"{m}\" y=\"{}\" font-size=\"12\">{}</text>", h - m + 16.0, label(x0));
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
        w - m,
        h - m + 16.0,
        label(x1)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
        m - 4.0,
        h - m,
        label(y0)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{}</text>",
        m - 4.0,
        m + 12.0,
        label(y1)
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-size=\"13\" text-anchor=\"middle\">{xlabel} (log)</text>",
        w / 2.0,
        h - 16.0
    );
    for (k, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let coords: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.3},{:.3}", sx(x), sy(y))).collect();
        if !coords.is_empty() {
            let _ = writeln!(
                svg,
                "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>",
                coords.join(" ")
            );
        }
        let _ = writeln!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{name}</text>",
            m + 8.0,
            m + 16.0 * (k as f64 + 1.0)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn write(dir: &Path, name: &str, contents: &str) -> Result<()> {
    let path = dir.join(name);
    std::fs::write(&path, contents).map_err(|e| Error::io(path, e))
}

/// Writes `report.csv`, `config.echo` and `plot.svg` (plus `branches.csv`
/// for flow traces) into `dir`, creating it if needed.
pub fn emit_outputs(report: &CountingReport, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write(dir, "report.csv", &to_csv(&report.table))?;
    write(dir, "config.echo", &report.echo)?;
    write(dir, "plot.svg", &plot_svg(&report.table))?;
    if let Some(trace) = &report.branches {
        write(dir, "branches.csv", &branches_csv(trace))?;
    }
    Ok(())
}
