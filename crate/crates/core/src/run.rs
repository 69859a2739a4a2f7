//! Run orchestration: solve, verify and write the run directory.
//!
//! A run directory holds field dumps with JSON sidecars, `certificate.json`,
//! `diagnostics.json`, `report.json`, `profiles.csv`, the resolved
//! `config.toml` and `manifest.json`. Everything but the manifest is a
//! deterministic function of `config.toml`, which is what [`verify_run`]
//! checks.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::born_infeld::{self, Electrostatics};
use crate::config::{Mode, RunConfig};
use crate::dump::{encode_scalar, encode_vector, FieldKind, FieldMeta};
use crate::error::{Error, Result};
use crate::grid::{GeometrySign, ScalarField, VectorField};
use crate::potential::KernelPlan;
use crate::solver::{solve_with, SeriesSolution, SolverConfig};
use crate::verify::{add_born_infeld, verify_solution, VerificationReport};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub config_path: PathBuf,
    pub solver_config: SolverConfig,
    pub output_dir: PathBuf,
    pub artifacts: Vec<String>,
    /// Seconds per stage.
    pub timings: BTreeMap<String, f64>,
    pub version: String,
    pub passed: bool,
    pub warnings: Vec<String>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub report: VerificationReport,
}

/// Solution, checks and rendered artifacts of one configuration.
pub struct Computed {
    pub solution: SeriesSolution,
    pub electrostatics: Option<Electrostatics>,
    pub report: VerificationReport,
    pub artifacts: Vec<(String, Vec<u8>)>,
    pub timings: BTreeMap<String, f64>,
}

fn timed<T>(timings: &mut BTreeMap<String, f64>, stage: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    timings.insert(stage.into(), start.elapsed().as_secs_f64());
    Ok(out)
}

pub fn compute(cfg: &RunConfig) -> Result<Computed> {
    let solver_cfg = cfg.solver_config()?;
    let mut timings = BTreeMap::new();
    let spec = solver_cfg.grid;
    let plan = timed(&mut timings, "plan", || Ok(KernelPlan::new(spec)))?;
    let h0 = timed(&mut timings, "source", || solver_cfg.source.sample(spec))?;
    let solution = timed(&mut timings, "solve", || solve_with(&solver_cfg, &plan, h0))?;
    let mut report = timed(&mut timings, "verify", || verify_solution(&solution, &plan, &cfg.verify))?;

    let mut electrostatics = None;
    if let Some(beta) = cfg.beta() {
        let (fields, bi) = timed(&mut timings, "born_infeld", || {
            let fields = born_infeld::fields(&solution, beta)?;
            let mut bi = born_infeld::report(&solution, beta)?;
            if cfg.verify.maxwell_rate {
                let betas = [beta, 2.0 * beta / 3.0, beta / 3.0];
                bi.rate = Some(born_infeld::maxwell_rate(&cfg.source(), &betas, cfg.pseudo(), solver_cfg.order_k, spec)?);
            }
            Ok((fields, bi))
        })?;
        add_born_infeld(&mut report, bi, &cfg.verify);
        electrostatics = Some(fields);
    }

    let artifacts = timed(&mut timings, "render", || render(cfg, &solution, electrostatics.as_ref(), &report))?;
    Ok(Computed { solution, electrostatics, report, artifacts, timings })
}

fn meta(quantity: &str, sign: GeometrySign, kind: FieldKind, spec: &crate::grid::GridSpec) -> Result<Vec<u8>> {
    let m = FieldMeta { quantity: quantity.into(), sign: Some(sign), kind, points: spec.points(), extent: spec.extent() };
    Ok((serde_json::to_string_pretty(&m)? + "\n").into_bytes())
}

fn json<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    Ok((serde_json::to_string_pretty(value)? + "\n").into_bytes())
}

struct Artifacts {
    sign: GeometrySign,
    items: Vec<(String, Vec<u8>)>,
}

impl Artifacts {
    fn scalar(&mut self, name: &str, f: &ScalarField) -> Result<()> {
        self.items.push((format!("{name}.mcg"), encode_scalar(f)));
        self.items.push((format!("{name}.json"), meta(name, self.sign, FieldKind::Scalar, f.spec())?));
        Ok(())
    }

    fn vector(&mut self, name: &str, f: &VectorField) -> Result<()> {
        self.items.push((format!("{name}.mcg"), encode_vector(f)));
        self.items.push((format!("{name}.json"), meta(name, self.sign, FieldKind::Vector, f.spec())?));
        Ok(())
    }
}

fn render(
    cfg: &RunConfig,
    sol: &SeriesSolution,
    electro: Option<&Electrostatics>,
    report: &VerificationReport,
) -> Result<Vec<(String, Vec<u8>)>> {
    let mut out = Artifacts { sign: sol.config.sign, items: Vec::new() };
    out.scalar("h0", &sol.h0)?;
    out.scalar("u", &sol.u)?;
    out.vector("v", &sol.v)?;
    out.vector("w", &sol.w)?;
    if cfg.output.dump_terms {
        for (k, t) in sol.terms.iter().enumerate() {
            out.vector(&format!("term_{}", 2 * k + 1), t)?;
        }
    }
    if let Some(e) = electro {
        out.scalar("rho", &e.rho)?;
        out.vector("d", &e.d)?;
        out.vector("e", &e.e)?;
    }
    let mut items = out.items;
    items.push(("certificate.json".into(), json(&sol.certificate)?));
    items.push(("diagnostics.json".into(), json(&sol.diagnostics)?));
    items.push(("report.json".into(), json(report)?));
    items.push(("profiles.csv".into(), profiles(sol).into_bytes()));
    items.push(("config.toml".into(), cfg.resolved().to_toml()?.into_bytes()));
    Ok(items)
}

/// `u`, `|v|` and `|w|` along the three axes and the main diagonal.
///
/// Axis lines pass through the nodes nearest the origin on the other axes.
pub fn profiles(sol: &SeriesSolution) -> String {
    let spec = sol.u.spec();
    let n = spec.points();
    let off = spec.physical_offset();
    let c = off + n / 2;
    let (vm, wm) = (sol.v.magnitude(), sol.w.magnitude());
    let mut csv = String::from("line,s,x,y,z,u,v,w\n");
    let lines: [(&str, Box<dyn Fn(usize) -> [usize; 3]>); 4] = [
        ("x", Box::new(|i| [off + i, c, c])),
        ("y", Box::new(|i| [c, off + i, c])),
        ("z", Box::new(|i| [c, c, off + i])),
        ("diagonal", Box::new(|i| [off + i, off + i, off + i])),
    ];
    for (name, node) in lines.iter() {
        for i in 0..n {
            let [a, b, d] = node(i);
            let flat = spec.flat(a, b, d);
            let x = spec.position(flat);
            let s = if *name == "diagonal" { x[0] * 3f64.sqrt() } else { x[["x", "y", "z"].iter().position(|l| l == name).unwrap()] };
            let _ = writeln!(
                csv,
                "{name},{s:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}",
                x[0],
                x[1],
                x[2],
                sol.u.values()[flat],
                vm.values()[flat],
                wm.values()[flat]
            );
        }
    }
    csv
}

/// Where a configuration's output goes under `root`.
pub fn output_dir(cfg: &RunConfig, root: &Path) -> PathBuf {
    root.join(&cfg.output.directory)
}

/// Solve, verify and write a run directory under `root`. Nothing is
/// written unless the configuration parses and the solve succeeds.
pub fn run(config_path: &Path, root: &Path) -> Result<RunOutcome> {
    let cfg = RunConfig::from_path(config_path)?;
    let dir = output_dir(&cfg, root);
    let computed = compute(&cfg)?;
    let mut timings = computed.timings;
    let start = Instant::now();
    fs::create_dir_all(&dir)?;
    let mut artifacts = Vec::new();
    for (name, bytes) in &computed.artifacts {
        fs::write(dir.join(name), bytes)?;
        artifacts.push(name.clone());
    }
    artifacts.push("manifest.json".into());
    timings.insert("write".into(), start.elapsed().as_secs_f64());
    let mut warnings = computed.solution.warnings.clone();
    if cfg.geometry.mode == Mode::BornInfeld {
        warnings.push("beta follows the dimensionless convention D = E/sqrt(1 - beta^4 |E|^2)".into());
    }
    let manifest = RunManifest {
        config_path: config_path.to_path_buf(),
        solver_config: computed.solution.config.clone(),
        output_dir: dir.clone(),
        artifacts,
        timings,
        version: VERSION.into(),
        passed: computed.report.passed,
        warnings,
    };
    fs::write(dir.join("manifest.json"), json(&manifest)?)?;
    Ok(RunOutcome { manifest, report: computed.report })
}

#[derive(Clone, Debug)]
pub struct VerifyOutcome {
    pub report: VerificationReport,
    /// Artifacts whose recomputed bytes differ from the stored ones.
    pub mismatched: Vec<String>,
    pub missing: Vec<String>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.report.passed && self.mismatched.is_empty() && self.missing.is_empty()
    }
}

/// Recompute a run from its `config.toml` and compare every artifact.
pub fn verify_run(dir: &Path) -> Result<VerifyOutcome> {
    let path = dir.join("config.toml");
    if !path.is_file() {
        return Err(Error::Config(format!("{} is not a run directory: no config.toml", dir.display())));
    }
    let cfg = RunConfig::from_path(&path)?;
    let computed = compute(&cfg)?;
    let (mut mismatched, mut missing) = (Vec::new(), Vec::new());
    for (name, bytes) in &computed.artifacts {
        match fs::read(dir.join(name)) {
            Ok(stored) if &stored == bytes => {}
            Ok(_) => mismatched.push(name.clone()),
            Err(_) => missing.push(name.clone()),
        }
    }
    Ok(VerifyOutcome { report: computed.report, mismatched, missing })
}
