//! Experiment configuration (TOML) and its validation.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use nonlocal_core::analysis::WeakStarProbe;
use nonlocal_core::hj::AlphaRule;
use nonlocal_core::{
    Boundary, Convexity, Datum, FluxModel, InterfaceVelocity, KernelFamily, KernelShape, KernelSide, SplitSpec,
    StudySetup,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub datum: DatumConfig,
    pub flux: FluxConfig,
    pub split: SplitSpec,
    pub kernels: KernelsConfig,
    pub k_sweep: Vec<f64>,
    pub grid: GridConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum DatumConfig {
    Constant {
        value: f64,
    },
    Riemann {
        q_left: f64,
        q_right: f64,
        x_jump: f64,
    },
    Bump {
        center: f64,
        radius: f64,
        height: f64,
    },
    /// CSV with columns `x,q`; relative paths are taken from the config's directory.
    Sampled {
        file: PathBuf,
    },
}

/// A built-in flux by name, or a polynomial `sum coefficients[i] s^i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluxConfig {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coefficients: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelsConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<KernelShape>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<KernelShape>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub domain: [f64; 2],
    pub t_end: f64,
    /// `dx = min(dx_factor / k, dx_max)`.
    #[serde(default = "default_dx_factor")]
    pub dx_factor: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dx_max: Option<f64>,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default = "default_snapshots")]
    pub snapshots: usize,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default = "default_interface_velocity")]
    pub interface_velocity: InterfaceVelocity,
    #[serde(default = "default_alpha_rule")]
    pub alpha_rule: AlphaRule,
    #[serde(default)]
    pub sign_unrestricted: bool,
}

fn default_dx_factor() -> f64 {
    0.125
}
fn default_cfl() -> f64 {
    0.4
}
fn default_snapshots() -> usize {
    10
}
fn default_boundary() -> Boundary {
    Boundary::Outflow
}
fn default_interface_velocity() -> InterfaceVelocity {
    InterfaceVelocity::CellMean
}
fn default_alpha_rule() -> AlphaRule {
    AlphaRule::Ledger
}
fn default_true() -> bool {
    true
}
fn default_margin() -> f64 {
    0.25
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    /// Output directory; relative paths are taken from the config's directory.
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    /// `t,x,q` per k.
    #[serde(default = "default_true")]
    pub snapshots_csv: bool,
    /// Little-endian f64 columns next to the CSV.
    #[serde(default)]
    pub binary: bool,
    #[serde(default = "default_true")]
    pub primitives: bool,
    #[serde(default)]
    pub weak_star: bool,
    #[serde(default = "default_margin")]
    pub weak_star_margin: f64,
    /// Regularization widths; empty skips the analysis.
    #[serde(default)]
    pub regularization: Vec<f64>,
    #[serde(default = "default_true")]
    pub plots: bool,
    /// Worker threads for the sweep (0 = one per core).
    #[serde(default)]
    pub workers: usize,
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            snapshots_csv: true,
            binary: false,
            primitives: true,
            weak_star: false,
            weak_star_margin: default_margin(),
            regularization: Vec::new(),
            plots: true,
            workers: 0,
        }
    }
}

/// Post-run checks; a failed check makes `run` exit with code 3.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_slope: Option<f64>,
    #[serde(default)]
    pub bounds: bool,
    #[serde(default)]
    pub decreasing: bool,
    #[serde(default)]
    pub maximum_principle: bool,
    /// Needs `output.weak_star`.
    #[serde(default)]
    pub weak_star: bool,
}

/// One validation failure, addressed by a dotted field path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Issue {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

fn issue(path: &str, message: impl Into<String>) -> Issue {
    Issue { path: path.to_string(), message: message.into() }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, Issue> {
        toml::from_str(text).map_err(|e| {
            let path = e.span().map_or_else(|| "<config>".to_string(), |s| locate(text, s.start));
            issue(&path, e.message().to_string())
        })
    }

    pub fn load(path: &Path) -> Result<Self, Issue> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| issue("<config>", format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn flux_model(&self) -> Result<FluxModel, Issue> {
        let r = match &self.flux.coefficients {
            Some(c) => FluxModel::from_coefficients(&self.flux.name, c),
            None => FluxModel::builtin(&self.flux.name),
        };
        r.map_err(|e| {
            let path = if self.flux.coefficients.is_some() { "flux.coefficients" } else { "flux.name" };
            issue(path, e.to_string())
        })
    }

    pub fn load_datum(&self, base_dir: &Path) -> Result<Datum, Issue> {
        Ok(match &self.datum {
            DatumConfig::Constant { value } => Datum::Constant { value: *value },
            DatumConfig::Riemann { q_left, q_right, x_jump } => {
                Datum::Riemann { q_left: *q_left, q_right: *q_right, x_jump: *x_jump }
            }
            DatumConfig::Bump { center, radius, height } => {
                Datum::Bump { center: *center, radius: *radius, height: *height }
            }
            DatumConfig::Sampled { file } => {
                let path = base_dir.join(file);
                let (xs, qs) = read_sampled(&path).map_err(|m| issue("datum.file", m))?;
                Datum::sampled(xs, qs).map_err(|e| issue("datum.file", e.to_string()))?
            }
        })
    }

    pub fn to_setup(&self, base_dir: &Path) -> Result<StudySetup, Issue> {
        let mut s = StudySetup::new(
            self.load_datum(base_dir)?,
            self.flux_model()?,
            self.split,
            KernelShape::Box { width: 1.0 },
        );
        s.left = self.kernels.left;
        s.right = self.kernels.right;
        s.sign_unrestricted = self.grid.sign_unrestricted;
        s.domain = (self.grid.domain[0], self.grid.domain[1]);
        s.t_end = self.grid.t_end;
        s.snapshots = self.grid.snapshots;
        s.dx_factor = self.grid.dx_factor;
        s.dx_max = self.grid.dx_max.unwrap_or(f64::INFINITY);
        s.cfl = self.grid.cfl;
        s.boundary = self.grid.boundary;
        s.interface_velocity = self.grid.interface_velocity;
        s.alpha_rule = self.grid.alpha_rule;
        Ok(s)
    }

    /// Every problem found, in field order; empty means the config can be run.
    pub fn validate(&self, base_dir: &Path) -> Vec<Issue> {
        let mut out = Vec::new();
        let positive = |v: f64| v.is_finite() && v > 0.0;

        let datum = match self.load_datum(base_dir) {
            Ok(d) => Some(d),
            Err(e) => {
                out.push(e);
                None
            }
        };
        match &self.datum {
            DatumConfig::Constant { value } if !value.is_finite() => out.push(issue("datum.value", "must be finite")),
            DatumConfig::Riemann { q_left, q_right, x_jump }
                if !(q_left.is_finite() && q_right.is_finite() && x_jump.is_finite()) =>
            {
                out.push(issue("datum", "riemann states and jump position must be finite"))
            }
            DatumConfig::Bump { radius, .. } if !positive(*radius) => {
                out.push(issue("datum.radius", "must be positive"))
            }
            DatumConfig::Bump { center, height, .. } if !(center.is_finite() && height.is_finite()) => {
                out.push(issue("datum", "bump center and height must be finite"))
            }
            _ => {}
        }

        if let Err(e) = self.flux_model() {
            out.push(e);
        }

        let shapes = [
            ("kernels.left", KernelSide::Left, self.kernels.left),
            ("kernels.right", KernelSide::Right, self.kernels.right),
        ];
        if shapes.iter().all(|s| s.2.is_none()) {
            out.push(issue("kernels", "at least one of `left`, `right` must be given"));
        }
        for (path, side, shape) in shapes {
            if let Some(shape) = shape {
                if let Err(e) = KernelFamily::new(side, shape) {
                    out.push(issue(path, e.to_string()));
                }
            }
        }

        if self.k_sweep.is_empty() {
            out.push(issue("k_sweep", "must list at least one k"));
        } else if self.k_sweep.iter().any(|&k| !positive(k)) {
            out.push(issue("k_sweep", "every k must be positive and finite"));
        } else if self.k_sweep.windows(2).any(|w| !(w[1] > w[0])) {
            out.push(issue("k_sweep", "must be sorted in strictly ascending order"));
        }

        let g = &self.grid;
        let [a, b] = g.domain;
        if !(a.is_finite() && b.is_finite() && a < 0.0 && b > 0.0) {
            out.push(issue("grid.domain", "must be finite with domain[0] < 0 < domain[1] (x = 0 is a grid interface)"));
        }
        if !positive(g.t_end) {
            out.push(issue("grid.t_end", "must be positive"));
        }
        if !positive(g.dx_factor) {
            out.push(issue("grid.dx_factor", "must be positive"));
        }
        if let Some(m) = g.dx_max {
            if !positive(m) {
                out.push(issue("grid.dx_max", "must be positive"));
            }
        }
        if !(g.cfl > 0.0 && g.cfl <= 0.5) {
            out.push(issue("grid.cfl", "must lie in (0, 0.5]"));
        }
        if g.snapshots == 0 {
            out.push(issue("grid.snapshots", "must be at least 1"));
        }
        if g.sign_unrestricted && g.alpha_rule != AlphaRule::Ledger {
            out.push(issue("grid.alpha_rule", "sign-unrestricted runs need `ledger`"));
        }

        for (i, &eps) in self.output.regularization.iter().enumerate() {
            if !positive(eps) {
                out.push(issue(&format!("output.regularization[{i}]"), "must be positive"));
            }
        }
        if !(self.output.weak_star_margin >= 0.0) {
            out.push(issue("output.weak_star_margin", "must be non-negative"));
        }
        if self.checks.weak_star && !self.output.weak_star {
            out.push(issue("checks.weak_star", "needs output.weak_star = true"));
        }
        if let Some(s) = self.checks.max_slope {
            if !s.is_finite() {
                out.push(issue("checks.max_slope", "must be finite"));
            }
        }

        if !out.is_empty() {
            return out;
        }
        // Cross-field checks need every field above to be sane.
        let datum = datum.expect("datum loaded");
        let setup = match self.to_setup(base_dir) {
            Ok(s) => s,
            Err(e) => return vec![e],
        };
        let (lo, _) = datum.bounds();
        if lo < 0.0 && !g.sign_unrestricted {
            out.push(issue(
                "datum",
                format!("values down to {lo} lie outside the admissible range [0, sup q0]; set grid.sign_unrestricted = true"),
            ));
            return out;
        }
        let admissible = match setup.admissible_flux() {
            Ok(f) => f,
            Err(e) => return vec![issue("flux", e.to_string())],
        };
        if admissible.convexity() == Convexity::Neither {
            out.push(issue(
                "flux",
                "neither convex nor concave on the admissible range; the Hopf-Lax reference cannot be used",
            ));
        }
        let grid0 = match setup.grid_for(self.k_sweep[0]) {
            Ok(gr) => gr,
            Err(e) => return vec![issue("grid", e.to_string())],
        };
        if let Err(e) = setup.velocity_split_for(&datum.cell_averages(grid0)) {
            out.push(issue("split.mode", e.to_string()));
        }

        // Cone of dependence: the transition zone grows by L T, plus one kernel support.
        if let Some((za, zb)) = datum.transition_zone() {
            let l = admissible.lipschitz();
            let lt = l * g.t_end;
            let reach = setup.kernels_for(self.k_sweep[0]).map(|k| k.reach()).unwrap_or(0.0);
            let (need_a, need_b) = (za - lt - reach, zb + lt + reach);
            if a > need_a || b < need_b {
                out.push(issue(
                    "grid.domain",
                    format!(
                        "[{a}, {b}] must contain [{need_a:.6}, {need_b:.6}]: datum transition zone [{za}, {zb}] padded by the cone L*T = {l:.6} * {} = {lt:.6} and kernel support {reach:.6}",
                        g.t_end
                    ),
                ));
            }
        }

        let dx_min = setup.dx_for(*self.k_sweep.last().unwrap());
        for (i, &eps) in self.output.regularization.iter().enumerate() {
            if eps < 2.0 * dx_min {
                out.push(issue(
                    &format!("output.regularization[{i}]"),
                    format!("epsilon {eps} is below two grid cells ({}) at the largest k", 2.0 * dx_min),
                ));
            }
        }
        if self.output.weak_star {
            if let Err(e) = WeakStarProbe::default().check_support(&grid0, self.output.weak_star_margin) {
                out.push(issue("output.weak_star_margin", e.to_string()));
            }
        }
        out
    }
}

/// `line L, column C` path for a byte offset, used for TOML syntax errors.
fn locate(text: &str, offset: usize) -> String {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let col = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    format!("<config>:{line}:{col}")
}

fn read_sampled(path: &Path) -> Result<(Vec<f64>, Vec<f64>), String> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let headers = rdr.headers().map_err(|e| e.to_string())?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (ix, iq) = match (col("x"), col("q")) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(format!("{} needs columns `x` and `q`", path.display())),
    };
    let mut xs = Vec::new();
    let mut qs = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| e.to_string())?;
        let parse = |i: usize| -> Result<f64, String> {
            rec.get(i)
                .and_then(|s| s.trim().parse().ok())
                .ok_or_else(|| format!("{}: row {} is not numeric", path.display(), n + 1))
        };
        xs.push(parse(ix)?);
        qs.push(parse(iq)?);
    }
    Ok((xs, qs))
}
