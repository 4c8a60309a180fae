use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::lattice::GridSpec;
use crate::operator::{BoxSpec, LocalizationSpec, DEFAULT_DENSE_CAP};
use crate::potential::{AngularProfile, PotentialSpec};
use crate::symbol::ModelParams;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StudyKind {
    Weyl,
    PowerLaw,
    CrossTerm,
    Box,
    FlowTrace,
    Oracle,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::Weyl => "weyl",
            StudyKind::PowerLaw => "theorem2",
            StudyKind::CrossTerm => "crossterm",
            StudyKind::Box => "box",
            StudyKind::FlowTrace => "flow-trace",
            StudyKind::Oracle => "oracle",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StudyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "weyl" => StudyKind::Weyl,
            "theorem2" => StudyKind::PowerLaw,
            "crossterm" => StudyKind::CrossTerm,
            "box" => StudyKind::Box,
            "flow-trace" => StudyKind::FlowTrace,
            "oracle" => StudyKind::Oracle,
            _ => return Err(Error::Config(format!("unknown study `{s}`"))),
        })
    }
}

/// How the computational box is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridPlan {
    Fixed(GridSpec),
    /// Per coupling `alpha`: side `L >= box_factor * alpha^{1/p}` at the given
    /// spacing, rounded up to an even number of points.
    Scaled {
        spacing: f64,
        box_factor: f64,
    },
    /// Per coupling: side `L = box_factor * alpha^{1/p}` with a fixed number of points.
    ScaledSide {
        n_points: usize,
        box_factor: f64,
    },
}

impl GridPlan {
    pub fn grid_for(&self, alpha: f64, exponent: f64) -> Result<GridSpec> {
        match *self {
            GridPlan::Fixed(g) => Ok(g),
            GridPlan::Scaled { spacing, box_factor } => {
                let side = box_factor * alpha.powf(1.0 / exponent);
                // the small slack keeps exact multiples of the spacing from rounding up
                let mut n = ((side / spacing) * (1.0 - 1e-12)).ceil() as usize;
                n = n.max(8);
                n += n % 2;
                GridSpec::new(n, n as f64 * spacing)
            }
            GridPlan::ScaledSide { n_points, box_factor } => {
                GridSpec::new(n_points, box_factor * alpha.powf(1.0 / exponent))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoxStudy {
    pub corner: [f64; 2],
    pub side: f64,
    pub tau: f64,
    pub betas: Vec<f64>,
}

impl BoxStudy {
    pub fn spec(&self, beta: f64) -> Result<BoxSpec> {
        BoxSpec::new(self.corner, self.side, beta)
    }
}

/// A parsed and validated experiment description.
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub study: StudyKind,
    pub grid: Option<GridPlan>,
    pub model: ModelParams,
    pub potential: PotentialSpec,
    pub alphas: Vec<f64>,
    /// `(eps1, eps2)`.
    pub localization: Option<(f64, f64)>,
    /// Threshold factor `eps` in `n(eps / alpha, W_i R W_j)`.
    pub crossterm_eps: Option<f64>,
    pub box_study: Option<BoxStudy>,
    /// Also count by eigenvalue flow in the counting studies.
    pub flow_compare: bool,
    /// Number of coupling steps of a flow trace.
    pub flow_steps: usize,
    pub dense_cap: usize,
    /// Split parity-symmetric operators into even and odd sectors.
    pub parity: bool,
    pub output_dir: Option<PathBuf>,
    pub seed: u64,
    entries: BTreeMap<String, String>,
}

const KNOWN_KEYS: &[&str] = &[
    "study",
    "grid.n_points",
    "grid.box_side",
    "grid.spacing",
    "grid.box_factor",
    "model.m",
    "model.lambda",
    "potential.kind",
    "potential.v0",
    "potential.sigma",
    "potential.center",
    "potential.radius",
    "potential.margin",
    "potential.p",
    "potential.psi.c0",
    "potential.psi.cos",
    "potential.psi.sin",
    "alpha.values",
    "alpha.min",
    "alpha.max",
    "alpha.count",
    "alpha.log",
    "localization.eps1",
    "localization.eps2",
    "crossterm.eps",
    "box.corner",
    "box.side",
    "box.tau",
    "box.beta",
    "flow.compare",
    "flow.steps",
    "solver.cap",
    "solver.parity",
    "output.directory",
    "seed",
];

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

/// Raw `key=value` entries of a config text.
///
/// Blank lines and lines starting with `#` are skipped; keys must be known
/// and may appear once.
pub fn parse_entries(text: &str) -> Result<BTreeMap<String, String>> {
    let mut entries = BTreeMap::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) =
            line.split_once('=').ok_or_else(|| config_err(format!("line {}: expected key=value", lineno + 1)))?;
        let (key, value) = (key.trim(), value.trim());
        if !KNOWN_KEYS.contains(&key) {
            return Err(config_err(format!("line {}: unknown key `{key}`", lineno + 1)));
        }
        if entries.insert(key.to_string(), value.to_string()).is_some() {
            return Err(config_err(format!("line {}: duplicate key `{key}`", lineno + 1)));
        }
    }
    Ok(entries)
}

struct Entries<'a>(&'a BTreeMap<String, String>);

impl Entries<'_> {
    fn raw(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn has(&self, key: &str) -> bool {
        self.0.contains_key(key)
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|_| config_err(format!("`{key}`: cannot parse `{v}`"))))
            .transpose()
    }

    fn require<T: FromStr>(&self, key: &str) -> Result<T> {
        self.get(key)?.ok_or_else(|| config_err(format!("missing `{key}`")))
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.raw(key)
            .map(|v| {
                if v.is_empty() {
                    return Ok(Vec::new());
                }
                v.split(',')
                    .map(|x| x.trim().parse::<f64>().map_err(|_| config_err(format!("`{key}`: cannot parse `{x}`"))))
                    .collect()
            })
            .transpose()
    }

    fn point(&self, key: &str) -> Result<Option<[f64; 2]>> {
        match self.list(key)? {
            None => Ok(None),
            Some(v) if v.len() == 2 => Ok(Some([v[0], v[1]])),
            Some(_) => Err(config_err(format!("`{key}` needs two comma-separated numbers"))),
        }
    }
}

fn parse_potential(e: &Entries) -> Result<PotentialSpec> {
    let kind: String = e.require("potential.kind")?;
    match kind.as_str() {
        "gaussian" => PotentialSpec::gaussian(
            e.require("potential.v0")?,
            e.require("potential.sigma")?,
            e.point("potential.center")?.unwrap_or([0.0, 0.0]),
        ),
        "disk_bump" => PotentialSpec::disk_bump(
            e.require("potential.v0")?,
            e.require("potential.radius")?,
            e.get("potential.margin")?.unwrap_or(0.0),
        ),
        "power_decay" => {
            let profile = AngularProfile::new(
                e.require("potential.psi.c0")?,
                e.list("potential.psi.cos")?.unwrap_or_default(),
                e.list("potential.psi.sin")?.unwrap_or_default(),
            )?;
            PotentialSpec::power_decay(e.require("potential.p")?, profile)
        }
        other => Err(config_err(format!("unknown potential.kind `{other}`"))),
    }
}

fn parse_alphas(e: &Entries) -> Result<Vec<f64>> {
    if let Some(values) = e.list("alpha.values")? {
        if ["alpha.min", "alpha.max", "alpha.count", "alpha.log"].iter().any(|k| e.has(k)) {
            return Err(config_err("give either alpha.values or alpha.min/max/count, not both"));
        }
        return Ok(values);
    }
    if !e.has("alpha.min") && !e.has("alpha.max") && !e.has("alpha.count") {
        return Ok(Vec::new());
    }
    let lo: f64 = e.require("alpha.min")?;
    let hi: f64 = e.require("alpha.max")?;
    let count: usize = e.require("alpha.count")?;
    let log = e.get("alpha.log")?.unwrap_or(false);
    if count == 0 {
        return Err(config_err("alpha.count must be positive"));
    }
    if log && !(lo > 0.0 && hi > 0.0) {
        return Err(config_err("log-spaced alphas need positive bounds"));
    }
    Ok((0..count)
        .map(|k| {
            if count == 1 {
                return lo;
            }
            let t = k as f64 / (count - 1) as f64;
            if log {
                lo * (hi / lo).powf(t)
            } else {
                lo + (hi - lo) * t
            }
        })
        .collect())
}

fn check_increasing(name: &str, values: &[f64]) -> Result<()> {
    if values.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
        return Err(config_err(format!("{name} values must be positive")));
    }
    if values.windows(2).any(|w| w[1].partial_cmp(&w[0]) != Some(Ordering::Greater)) {
        return Err(config_err(format!("{name} values must be strictly increasing")));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Parses and validates a config text.
    pub fn parse(text: &str) -> Result<Self> {
        let entries = parse_entries(text)?;
        let e = Entries(&entries);
        let study: StudyKind = e.require("study")?;

        let grid = {
            let fields = ["grid.n_points", "grid.box_side", "grid.spacing", "grid.box_factor"].map(|k| e.has(k));
            match fields {
                [false, false, false, false] => None,
                [true, true, false, false] => {
                    Some(GridPlan::Fixed(GridSpec::new(e.require("grid.n_points")?, e.require("grid.box_side")?)?))
                }
                [false, false, true, true] => {
                    let spacing: f64 = e.require("grid.spacing")?;
                    let box_factor: f64 = e.require("grid.box_factor")?;
                    if !(spacing.is_finite() && spacing > 0.0 && box_factor.is_finite() && box_factor > 0.0) {
                        return Err(config_err("grid.spacing and grid.box_factor must be positive"));
                    }
                    Some(GridPlan::Scaled { spacing, box_factor })
                }
                [true, false, false, true] => {
                    let n_points: usize = e.require("grid.n_points")?;
                    let box_factor: f64 = e.require("grid.box_factor")?;
                    if !(box_factor.is_finite() && box_factor > 0.0) {
                        return Err(config_err("grid.box_factor must be positive"));
                    }
                    // validates the point count
                    GridSpec::new(n_points, 1.0)?;
                    Some(GridPlan::ScaledSide { n_points, box_factor })
                }
                _ => {
                    return Err(config_err(
                        "grid needs n_points with box_side, spacing with box_factor, or n_points with box_factor",
                    ))
                }
            }
        };

        let localization = match (e.get::<f64>("localization.eps1")?, e.get::<f64>("localization.eps2")?) {
            (Some(a), Some(b)) => Some((a, b)),
            (None, None) => None,
            _ => return Err(config_err("localization needs both eps1 and eps2")),
        };
        let box_study = if e.has("box.tau") || e.has("box.beta") || e.has("box.side") || e.has("box.corner") {
            Some(BoxStudy {
                corner: e.point("box.corner")?.unwrap_or([0.0, 0.0]),
                side: e.get("box.side")?.unwrap_or(1.0),
                tau: e.require("box.tau")?,
                betas: e.list("box.beta")?.unwrap_or_default(),
            })
        } else {
            None
        };

        let config = ExperimentConfig {
            study,
            grid,
            model: ModelParams::new(e.require("model.m")?, e.get("model.lambda")?.unwrap_or(0.0))?,
            potential: parse_potential(&e)?,
            alphas: parse_alphas(&e)?,
            localization,
            crossterm_eps: e.get("crossterm.eps")?,
            box_study,
            flow_compare: e.get("flow.compare")?.unwrap_or(false),
            flow_steps: e.get("flow.steps")?.unwrap_or(32),
            dense_cap: e.get("solver.cap")?.unwrap_or(DEFAULT_DENSE_CAP),
            parity: e.get("solver.parity")?.unwrap_or(false),
            output_dir: e.raw("output.directory").map(PathBuf::from),
            seed: e.get("seed")?.unwrap_or(0),
            entries,
        };
        config.validate()?;
        Ok(config)
    }

    /// Replaces the seed, keeping the echo in step.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.entries.insert("seed".into(), seed.to_string());
    }

    /// Canonical `key=value` listing, sorted by key.
    pub fn echo(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k}={v}\n")).collect()
    }

    /// Decay exponent of a power-decay potential.
    pub fn exponent(&self) -> Option<f64> {
        match &self.potential {
            PotentialSpec::PowerDecay(pd) => Some(pd.exponent()),
            _ => None,
        }
    }

    pub fn grid_for(&self, alpha: f64) -> Result<GridSpec> {
        let plan = self.grid.ok_or_else(|| config_err(format!("study {} needs a grid", self.study)))?;
        plan.grid_for(alpha, self.exponent().unwrap_or(1.0))
    }

    pub fn localization_for(&self, alpha: f64) -> Result<LocalizationSpec> {
        let (eps1, eps2) = self.localization.ok_or_else(|| config_err("missing localization.eps1/eps2"))?;
        LocalizationSpec::new(eps1, eps2, alpha, self.exponent().unwrap_or(1.0))
    }

    /// Checks the study-specific invariants; runs before any heavy work.
    pub fn validate(&self) -> Result<()> {
        check_increasing("alpha", &self.alphas)?;
        if self.dense_cap == 0 {
            return Err(config_err("solver.cap must be positive"));
        }
        let needs_alphas = !matches!(self.study, StudyKind::Box | StudyKind::Oracle);
        if needs_alphas && self.alphas.is_empty() {
            return Err(config_err(format!("study {} needs alpha values", self.study)));
        }
        if self.study != StudyKind::Oracle && self.grid.is_none() {
            return Err(config_err(format!("study {} needs a grid", self.study)));
        }
        let power_law = matches!(self.study, StudyKind::PowerLaw | StudyKind::CrossTerm);
        if power_law && self.exponent().is_none() {
            return Err(config_err(format!("study {} needs a power_decay potential", self.study)));
        }
        if !power_law && matches!(self.grid, Some(GridPlan::Scaled { .. } | GridPlan::ScaledSide { .. })) {
            return Err(config_err(format!("study {} needs a fixed grid", self.study)));
        }
        match self.study {
            StudyKind::Weyl => {
                if matches!(self.potential, PotentialSpec::PowerDecay(_)) {
                    return Err(config_err("the weyl study needs an integrable potential"));
                }
            }
            StudyKind::PowerLaw | StudyKind::CrossTerm => {
                let (_, eps2) = self.localization.ok_or_else(|| config_err("missing localization.eps1/eps2"))?;
                let p = self.exponent().unwrap_or(1.0);
                for &alpha in &self.alphas {
                    // zone 3 starts at eps2 alpha^{1/p} and must fit in the box
                    let required = 4.0 * eps2 * alpha.powf(1.0 / p);
                    let grid = self.grid_for(alpha)?;
                    if grid.box_side() < required {
                        return Err(config_err(format!(
                            "box side {} is too small for alpha = {alpha}: need at least {required}",
                            grid.box_side()
                        )));
                    }
                    self.localization_for(alpha)?.check_fits(&grid)?;
                }
                if self.study == StudyKind::CrossTerm {
                    match self.crossterm_eps {
                        Some(eps) if eps.is_finite() && eps > 0.0 => {}
                        Some(eps) => return Err(config_err(format!("crossterm.eps must be positive, got {eps}"))),
                        None => return Err(config_err("missing crossterm.eps")),
                    }
                }
            }
            StudyKind::Box => {
                let b = self.box_study.as_ref().ok_or_else(|| config_err("missing box.tau and box.beta"))?;
                if b.betas.is_empty() {
                    return Err(config_err("missing box.beta"));
                }
                check_increasing("beta", &b.betas)?;
                if !(b.tau.is_finite() && b.tau > 0.0) {
                    return Err(config_err(format!("box.tau must be positive, got {}", b.tau)));
                }
                let grid = self.grid_for(1.0)?;
                for &beta in &b.betas {
                    b.spec(beta)?.check_fits(&grid)?;
                }
            }
            StudyKind::FlowTrace => {
                if self.flow_steps == 0 {
                    return Err(config_err("flow.steps must be positive"));
                }
            }
            StudyKind::Oracle => {}
        }
        Ok(())
    }
}
