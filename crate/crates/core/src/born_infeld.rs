//! Born–Infeld electrostatics as a prescribed mean curvature problem.
//!
//! With `u = β² φ` and `E = -∇φ`, the law `D = E/sqrt(1 - β⁴|E|^2)` and
//! `∇·D = 4πρ` become the Minkowskian curvature equation with
//! `H = (4π/3) β² ρ`. The pseudo law `D = E/sqrt(1 + β⁴|E|^2)` becomes the
//! Euclidean one with `H = -(4π/3) β² ρ`. In both cases `ε = β²`,
//! `D = ∓v/β²` and `E = ∓w/β² = -∇u/β²`.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::{divergence, GeometrySign, GridSpec, ScalarField, VectorField};
use crate::potential::KernelPlan;
use crate::solver::{solve_with, CurvatureSpec, SeriesSolution, SolverConfig};
use crate::verify::{fit_slope, INNER_FRACTION};

pub fn sign_for(pseudo: bool) -> GeometrySign {
    if pseudo {
        GeometrySign::Euclidean
    } else {
        GeometrySign::Minkowskian
    }
}

/// Solver configuration for the charge density `rho` at coupling `beta`.
pub fn born_infeld_mode(
    rho: &CurvatureSpec,
    beta: f64,
    pseudo: bool,
    order_k: usize,
    grid: GridSpec,
) -> Result<SolverConfig> {
    if !(beta.is_finite() && beta > 0.0) {
        return Err(Error::Config(format!("beta must be positive, got {beta}")));
    }
    let sign = sign_for(pseudo);
    let h0 = rho.scaled(-sign.pm() * 4.0 * PI / 3.0);
    let cfg = SolverConfig::new(sign, beta * beta, order_k, grid, h0);
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Clone, Debug)]
pub struct Electrostatics {
    pub beta: f64,
    pub rho: ScalarField,
    pub d: VectorField,
    pub e: VectorField,
}

/// `ρ`, `D` and `E` from a solution produced by [`born_infeld_mode`].
pub fn fields(sol: &SeriesSolution, beta: f64) -> Result<Electrostatics> {
    let s = -sol.config.sign.pm();
    let b2 = beta * beta;
    Ok(Electrostatics {
        beta,
        rho: sol.h0.scaled(s * 3.0 / (4.0 * PI)),
        d: sol.v.scaled(s / b2),
        e: sol.w.scaled(s / b2),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BornInfeldReport {
    pub beta: f64,
    /// `‖∇·D - 4πρ‖_∞ / (4π‖ρ‖_∞)` on the inner half-box.
    pub gauss_defect: f64,
    /// `max ||D| - |E|| / max |E|` on the inner half-box.
    pub maxwell_gap: f64,
    pub rate: Option<MaxwellRate>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MaxwellRate {
    pub betas: Vec<f64>,
    pub gaps: Vec<f64>,
    pub slope: f64,
}

pub fn gauss_defect(f: &Electrostatics) -> Result<f64> {
    let inner = f.rho.spec().region(INNER_FRACTION);
    let mut r = divergence(&f.d);
    r.add_scaled(-4.0 * PI, &f.rho)?;
    let scale = 4.0 * PI * f.rho.sup();
    Ok(if scale == 0.0 { r.sup_over(&inner) } else { r.sup_over(&inner) / scale })
}

pub fn maxwell_gap(f: &Electrostatics) -> f64 {
    let inner = f.rho.spec().region(INNER_FRACTION);
    let (d, e) = (f.d.magnitude(), f.e.magnitude());
    let gap = inner.iter().map(|&i| (d.values()[i] - e.values()[i]).abs()).fold(0.0, f64::max);
    let top = inner.iter().map(|&i| e.values()[i]).fold(0.0, f64::max);
    if top == 0.0 {
        0.0
    } else {
        gap / top
    }
}

pub fn report(sol: &SeriesSolution, beta: f64) -> Result<BornInfeldReport> {
    let f = fields(sol, beta)?;
    Ok(BornInfeldReport { beta, gauss_defect: gauss_defect(&f)?, maxwell_gap: maxwell_gap(&f), rate: None })
}

/// Maxwell gaps over `betas` and their log-log slope.
pub fn maxwell_rate(
    rho: &CurvatureSpec,
    betas: &[f64],
    pseudo: bool,
    order_k: usize,
    grid: GridSpec,
) -> Result<MaxwellRate> {
    let plan = KernelPlan::new(grid);
    let mut gaps = Vec::with_capacity(betas.len());
    for &beta in betas {
        let cfg = born_infeld_mode(rho, beta, pseudo, order_k, grid)?;
        let h0 = cfg.source.sample(grid)?;
        let sol = solve_with(&cfg, &plan, h0)?;
        gaps.push(maxwell_gap(&fields(&sol, beta)?));
    }
    let slope = fit_slope(betas, &gaps);
    Ok(MaxwellRate { betas: betas.to_vec(), gaps, slope })
}
