//! Run configuration: a TOML document with `[geometry]`, `[grid]`,
//! `[source]`, `[solver]`, `[verify]` and `[output]` sections.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::born_infeld::born_infeld_mode;
use crate::error::{Error, Result};
use crate::grid::{GeometrySign, GridSpec};
use crate::solver::{CurvatureSpec, SolverConfig, Variant};
use crate::verify::VerifySettings;

/// The annotated default configuration printed by `mcgraph print-config`.
pub const DEFAULT_CONFIG: &str = r#"# mcgraph run configuration; every key below shows its default.

[geometry]
# "curvature" solves the mean curvature equation for H = epsilon * H0.
# "born_infeld" treats [source] as a charge density rho and solves the
# electrostatic problem at coupling beta (epsilon and sign are derived).
mode = "curvature"
sign = "euclidean"          # or "minkowskian"
epsilon = 0.02
# beta = 0.2                # born_infeld only
# pseudo = false            # born_infeld only: true selects the pseudo law

[grid]
extent = 4.0                # physical cube [-extent, extent]^3
points = 64                 # samples per axis, even, at least 8
padding = 2                 # torus size in units of the physical cube

[source]
# preset = "gaussian" | "dipole" | "bumps" | "file"
#   dipole: amplitude, width, separation
#   bumps:  bumps = [{ amplitude = 1.0, width = 0.5, center = [0.0, 0.0, 0.0] }]
#   file:   path (scalar field dump on this grid), scale = 1.0
# The born_infeld default is a gaussian charge of amplitude 0.5.
preset = "gaussian"
amplitude = 5.0
width = 0.75
center = [0.0, 0.0, 0.0]

[solver]
order = 4                   # truncation order K, terms up to epsilon^(2K+1)
variant = "square_root"     # or "cubic"
guard = 0.05

[verify]
residual = true
residual_threshold = 1e-6   # residual / (3 epsilon sup|H0|)
residual_order = false
residual_order_tolerance = 0.3
identities = true
identity_threshold = 1e-5
divergence_free = true
divergence_threshold = 1e-7
oracle = false
oracle_tol = 1e-10
oracle_max_iter = 200
oracle_threshold = 1e-9
farfield = true
farfield_threshold = 0.02
gauss_threshold = 1e-6
maxwell_rate = false
maxwell_rate_tolerance = 0.3

[output]
directory = "mcgraph-run"   # relative to $MCGRAPH_OUTPUT_ROOT or the working directory
dump_terms = true
"#;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Curvature,
    BornInfeld,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    pub mode: Mode,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sign: Option<GeometrySign>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pseudo: Option<bool>,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { mode: Mode::Curvature, sign: None, epsilon: None, beta: None, pseudo: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grid {
    pub extent: f64,
    pub points: usize,
    pub padding: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid { extent: 4.0, points: 64, padding: 2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Solver {
    pub order: usize,
    pub variant: Variant,
    pub guard: f64,
}

impl Default for Solver {
    fn default() -> Self {
        Solver { order: 4, variant: Variant::SquareRoot, guard: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Output {
    pub directory: PathBuf,
    pub dump_terms: bool,
}

impl Default for Output {
    fn default() -> Self {
        Output { directory: PathBuf::from("mcgraph-run"), dump_terms: true }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub geometry: Geometry,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<CurvatureSpec>,
    #[serde(default)]
    pub solver: Solver,
    #[serde(default)]
    pub verify: VerifySettings,
    #[serde(default)]
    pub output: Output,
}

pub const DEFAULT_EPSILON: f64 = 0.02;
pub const DEFAULT_BETA: f64 = 0.2;

pub fn default_source(mode: Mode) -> CurvatureSpec {
    let amplitude = match mode {
        Mode::Curvature => 5.0,
        Mode::BornInfeld => 0.5,
    };
    CurvatureSpec::Gaussian { amplitude, width: 0.75, center: [0.0; 3] }
}

fn field(path: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) | Error::InvalidGrid(msg) => Error::Config(format!("{path}: {msg}")),
        other => other,
    }
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<RunConfig> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string().trim_end().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parse a file; relative source paths are taken relative to it.
    pub fn from_path(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = RunConfig::parse(&text)?;
        if let Some(src) = cfg.source.as_mut() {
            src.resolve_paths(path.parent().unwrap_or(Path::new(".")));
        }
        cfg.validate_source_file()?;
        Ok(cfg)
    }

    pub fn source(&self) -> CurvatureSpec {
        self.source.clone().unwrap_or_else(|| default_source(self.geometry.mode))
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        GridSpec::new(self.grid.extent, self.grid.points, self.grid.padding).map_err(|e| field("grid", e))
    }

    pub fn beta(&self) -> Option<f64> {
        match self.geometry.mode {
            Mode::Curvature => None,
            Mode::BornInfeld => Some(self.geometry.beta.unwrap_or(DEFAULT_BETA)),
        }
    }

    pub fn pseudo(&self) -> bool {
        self.geometry.pseudo.unwrap_or(false)
    }

    pub fn validate(&self) -> Result<()> {
        let g = &self.geometry;
        match g.mode {
            Mode::Curvature => {
                if g.beta.is_some() || g.pseudo.is_some() {
                    return Err(Error::Config("geometry.beta and geometry.pseudo apply only to mode = \"born_infeld\"".into()));
                }
                if let Some(eps) = g.epsilon {
                    if !(eps.is_finite() && eps > 0.0) {
                        return Err(Error::Config(format!("geometry.epsilon: must be positive, got {eps}")));
                    }
                }
            }
            Mode::BornInfeld => {
                if g.epsilon.is_some() || g.sign.is_some() {
                    return Err(Error::Config(
                        "geometry.epsilon and geometry.sign are derived from beta and pseudo in born_infeld mode".into(),
                    ));
                }
                if let Some(beta) = g.beta {
                    if !(beta.is_finite() && beta > 0.0) {
                        return Err(Error::Config(format!("geometry.beta: must be positive, got {beta}")));
                    }
                }
            }
        }
        self.grid_spec()?;
        if !(self.solver.guard > 0.0 && self.solver.guard < 1.0) {
            return Err(Error::Config(format!("solver.guard: must lie in (0, 1), got {}", self.solver.guard)));
        }
        if self.solver.order > 12 {
            return Err(Error::Config(format!("solver.order: {} exceeds the supported 12", self.solver.order)));
        }
        self.source().validate().map_err(|e| field("source", e))?;
        self.verify.validate()?;
        if self.output.directory.as_os_str().is_empty() {
            return Err(Error::Config("output.directory: must not be empty".into()));
        }
        Ok(())
    }

    fn validate_source_file(&self) -> Result<()> {
        if let Some(CurvatureSpec::File { path, .. }) = &self.source {
            let spec = self.grid_spec()?;
            crate::dump::read_scalar(path, spec).map_err(|e| Error::Config(format!("source.path: {}: {e}", path.display())))?;
        }
        Ok(())
    }

    pub fn solver_config(&self) -> Result<SolverConfig> {
        let grid = self.grid_spec()?;
        let mut cfg = match self.geometry.mode {
            Mode::Curvature => SolverConfig::new(
                self.geometry.sign.unwrap_or(GeometrySign::Euclidean),
                self.geometry.epsilon.unwrap_or(DEFAULT_EPSILON),
                self.solver.order,
                grid,
                self.source(),
            ),
            Mode::BornInfeld => {
                let beta = self.beta().expect("born_infeld mode");
                born_infeld_mode(&self.source(), beta, self.pseudo(), self.solver.order, grid)
                    .map_err(|e| field("geometry", e))?
            }
        };
        cfg.variant = self.solver.variant;
        cfg.guard = self.solver.guard;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Every default made explicit, for the run record.
    pub fn resolved(&self) -> RunConfig {
        let mut out = self.clone();
        out.source = Some(self.source());
        match self.geometry.mode {
            Mode::Curvature => {
                out.geometry.sign = Some(self.geometry.sign.unwrap_or(GeometrySign::Euclidean));
                out.geometry.epsilon = Some(self.geometry.epsilon.unwrap_or(DEFAULT_EPSILON));
            }
            Mode::BornInfeld => {
                out.geometry.beta = self.beta();
                out.geometry.pseudo = Some(self.pseudo());
            }
        }
        out
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_text_matches_defaults() {
        let parsed = RunConfig::parse(DEFAULT_CONFIG).unwrap();
        assert_eq!(parsed.resolved(), RunConfig::default().resolved());
        assert_eq!(RunConfig::parse("").unwrap(), RunConfig::default());
    }

    #[test]
    fn resolved_round_trips() {
        let cfg = RunConfig::parse("[geometry]\nmode = \"born_infeld\"\nbeta = 0.3\n[source]\npreset = \"dipole\"\namplitude = 1.0\nwidth = 0.5\nseparation = 1.0\n").unwrap();
        let text = cfg.resolved().to_toml().unwrap();
        let back = RunConfig::parse(&text).unwrap();
        assert_eq!(back, cfg.resolved());
        assert_eq!(back.solver_config().unwrap(), cfg.solver_config().unwrap());
    }

    #[test]
    fn solver_config_from_sections() {
        let cfg = RunConfig::parse(
            "[geometry]\nsign = \"minkowskian\"\nepsilon = 0.01\n[grid]\npoints = 32\n[solver]\norder = 2\nvariant = \"cubic\"\n",
        )
        .unwrap();
        let s = cfg.solver_config().unwrap();
        assert_eq!(s.sign, GeometrySign::Minkowskian);
        assert_eq!(s.epsilon, 0.01);
        assert_eq!(s.order_k, 2);
        assert_eq!(s.variant, Variant::Cubic);
        assert_eq!(s.grid.points(), 32);
    }

    #[test]
    fn born_infeld_defaults() {
        let cfg = RunConfig::parse("[geometry]\nmode = \"born_infeld\"\n").unwrap();
        let s = cfg.solver_config().unwrap();
        assert_eq!(s.sign, GeometrySign::Minkowskian);
        assert!((s.epsilon - 0.04).abs() < 1e-15);
    }

    fn message(text: &str) -> String {
        match RunConfig::parse(text) {
            Err(Error::Config(m)) => m,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn field_level_messages() {
        assert!(message("[grid]\npoints = 7\n").starts_with("grid:"));
        assert!(message("[geometry]\nepsilon = -1.0\n").starts_with("geometry.epsilon"));
        assert!(message("[solver]\nguard = 2.0\n").starts_with("solver.guard"));
        assert!(message("[solver]\norder = 40\n").starts_with("solver.order"));
        assert!(message("[source]\npreset = \"gaussian\"\namplitude = 1.0\nwidth = 0.0\n").starts_with("source:"));
        assert!(message("[verify]\noracle_tol = 0.0\n").starts_with("verify.oracle_tol"));
        assert!(message("[geometry]\nbeta = 0.1\n").contains("born_infeld"));
        assert!(message("[geometry]\nmode = \"born_infeld\"\nepsilon = 0.1\n").contains("derived"));
        assert!(message("[geometry]\nmode = \"born_infeld\"\nbeta = 0.0\n").starts_with("geometry.beta"));
        assert!(message("[grid]\nextent = 4.0\nunknown = 1\n").contains("unknown"));
        assert!(message("[grid\n").contains("TOML") || !message("[grid\n").is_empty());
        assert!(message("[source]\npreset = \"torus\"\n").contains("torus"));
    }

    #[test]
    fn missing_source_file_is_a_config_error() {
        let dir = std::env::temp_dir().join(format!("mcgraph-config-{}", std::process::id()));
        fs::create_dir_all(&dir).unwrap();
        let path = dir.join("run.toml");
        fs::write(&path, "[source]\npreset = \"file\"\npath = \"missing.mcg\"\n").unwrap();
        assert!(matches!(RunConfig::from_path(&path), Err(Error::Config(_))));
        fs::remove_dir_all(&dir).unwrap();
    }
}
