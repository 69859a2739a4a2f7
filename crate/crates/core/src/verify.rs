//! Independent checks of a series solution.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{
    curl, divergence, gradient, sample_vector, sup_norms, GeometrySign, GridSpec, ScalarField, VectorField,
};
use crate::hierarchy::{build_cubic_rhs, TermStack};
use crate::potential::{newtonian_potential, KernelPlan};
use crate::born_infeld::BornInfeldReport;
use crate::solver::{solve_with, SeriesSolution, SolverConfig};

/// Fraction of the half-width defining the inner region used by residuals.
pub const INNER_FRACTION: f64 = 0.5;

/// `sup |±∇·(∇u/sqrt(1 ± |∇u|^2)) - 3H|` over the inner half-box.
pub fn residual(u: &ScalarField, h: &ScalarField, sign: GeometrySign, guard: f64) -> Result<f64> {
    let g = gradient(u);
    let pm = sign.pm();
    let inner = u.spec().region(INNER_FRACTION);
    if sign == GeometrySign::Minkowskian {
        let mag = g.magnitude();
        let limit = 1.0 - guard;
        if let Some(&i) = inner.iter().find(|&&i| mag.values()[i] >= limit) {
            let [x, y, z] = u.spec().position(i);
            return Err(Error::Singular { x, y, z, magnitude: mag.values()[i], limit });
        }
    }
    let factor = g.dot(&g)?.map(|q| 1.0 / (1.0 + pm * q).sqrt());
    let mut r = divergence(&g.times(&factor)?).scaled(pm);
    r.add_scaled(-3.0, h)?;
    Ok(r.sup_over(&inner))
}

/// Normalized defects of `v·(∇ × v) = 0` and `∇|v|^2·(∇ × v) = 0` on the
/// inner half-box, divided by `‖v‖‖∇v‖` and `‖v‖‖∇v‖^2` respectively.
pub fn identity_checks(v: &VectorField) -> Result<(f64, f64)> {
    let (nv, ng) = sup_norms(v);
    if nv == 0.0 || ng == 0.0 {
        return Ok((0.0, 0.0));
    }
    let c = curl(v);
    let inner = v.spec().region(INNER_FRACTION);
    let triple = v.dot(&c)?.sup_over(&inner);
    let grad_sq = gradient(&v.dot(v)?).dot(&c)?.sup_over(&inner);
    Ok((triple / (nv * ng), grad_sq / (nv * ng * ng)))
}

/// Divergence of the cubic sources `F_k`, `k = 1..len`, over the inner
/// half-box, relative to `‖v_0‖^(2k-1) ‖∇v_0‖^2`, the size of a generic
/// degree `2k+1` expression in the first-order term.
pub fn cubic_divergence_defects(terms: &[VectorField], sign: GeometrySign) -> Result<Vec<f64>> {
    let mut stack = TermStack::new(sign, terms[0].clone());
    for t in &terms[1..] {
        stack.push(t.clone())?;
    }
    let (n, g) = sup_norms(&terms[0]);
    let inner = terms[0].spec().region(INNER_FRACTION);
    let mut out = Vec::new();
    for k in 1..=terms.len() {
        let rhs = build_cubic_rhs(k, &stack)?;
        let scale = n.powi(2 * k as i32 - 1) * g * g;
        let div = divergence(&rhs).sup_over(&inner);
        out.push(if scale == 0.0 { 0.0 } else { div / scale });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OracleOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub damping: f64,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { tol: 1e-10, max_iter: 200, damping: 0.8 }
    }
}

#[derive(Clone, Debug)]
pub struct OracleRun {
    pub u: ScalarField,
    pub iterations: usize,
    /// Successive sup differences.
    pub trace: Vec<f64>,
}

/// Damped Picard iteration for `u = ∓N(3H) + N(∇·((f - 1)∇u))`,
/// `f = 1/sqrt(1 ± |∇u|^2)`.
pub fn fixed_point_oracle(
    h: &ScalarField,
    sign: GeometrySign,
    opts: OracleOptions,
    plan: &KernelPlan,
) -> Result<OracleRun> {
    let pm = sign.pm();
    let base = newtonian_potential(&h.scaled(3.0), plan)?.scaled(-pm);
    let mut u = ScalarField::zeros(*h.spec());
    let mut theta = opts.damping;
    let mut trace = Vec::new();
    let mut rising = 0;
    for it in 1..=opts.max_iter {
        let g = gradient(&u);
        let q = g.dot(&g)?;
        if pm < 0.0 {
            if let Some(i) = q.values().iter().position(|&x| x >= 1.0) {
                let [x, y, z] = h.spec().position(i);
                return Err(Error::Singular { x, y, z, magnitude: q.values()[i].sqrt(), limit: 1.0 });
            }
        }
        let excess = q.map(|x| 1.0 / (1.0 + pm * x).sqrt() - 1.0);
        let mut next = newtonian_potential(&divergence(&g.times(&excess)?), plan)?;
        next.add_scaled(1.0, &base)?;

        let diff = next
            .values()
            .iter()
            .zip(u.values())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let step = theta * diff;
        if let Some(&prev) = trace.last() {
            if step > prev {
                rising += 1;
                theta = (theta * 0.5).max(1.0 / 64.0);
            } else {
                rising = 0;
            }
        }
        trace.push(step);
        if rising >= 5 {
            return Err(Error::Divergence { iterations: it, trace });
        }
        let mut blended = u.scaled(1.0 - theta);
        blended.add_scaled(theta, &next)?;
        u = blended;
        if diff < opts.tol {
            return Ok(OracleRun { u, iterations: it, trace });
        }
    }
    Err(Error::NoConvergence(opts.max_iter))
}

/// Relative error of the shell average of `u |x|` at `|x| = 0.8 L` against
/// `∓(3/4π) ε ∫H₀`; `None` when the source has no net curvature.
pub fn farfield_check(u: &ScalarField, h0: &ScalarField, epsilon: f64, sign: GeometrySign) -> Option<f64> {
    let total = h0.integral();
    let mass: f64 = h0.values().iter().map(|v| v.abs()).sum::<f64>() * h0.spec().cell_volume();
    if mass == 0.0 || total.abs() <= 1e-10 * mass {
        return None;
    }
    let spec = u.spec();
    let radius = 0.8 * spec.extent();
    let half = 0.5 * spec.spacing();
    let (mut sum, mut count) = (0.0, 0usize);
    for i in spec.region(1.0) {
        let x = spec.position(i);
        let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
        if (r - radius).abs() <= half {
            sum += u.values()[i] * r;
            count += 1;
        }
    }
    if count == 0 {
        return None;
    }
    let target = -sign.pm() * 3.0 / (4.0 * std::f64::consts::PI) * epsilon * total;
    Some((sum / count as f64 - target).abs() / target.abs())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let num: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = lx.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Residuals of the order-`K` solution at each `ε` and their log-log slope.
pub fn residual_order(config: &SolverConfig, epsilons: &[f64]) -> Result<(Vec<f64>, f64)> {
    let plan = KernelPlan::new(config.grid);
    let h0 = config.source.sample(config.grid)?;
    let mut res = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let cfg = SolverConfig { epsilon: eps, ..config.clone() };
        let sol = solve_with(&cfg, &plan, h0.clone())?;
        res.push(residual(&sol.u, &h0.scaled(eps), cfg.sign, cfg.guard)?);
    }
    let slope = fit_slope(epsilons, &res);
    Ok((res, slope))
}

/// A smooth, generically non-integrable field: a few random vector-valued
/// Gaussian bumps in the inner half-box with unit-order amplitudes.
pub fn random_smooth_field(spec: GridSpec, seed: u64) -> Result<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = spec.extent();
    let bumps: Vec<([f64; 3], [f64; 3], f64)> = (0..6)
        .map(|_| {
            let c = [0, 1, 2].map(|_| rng.gen_range(-0.25 * l..0.25 * l));
            let a = [0, 1, 2].map(|_| rng.gen_range(-1.0..1.0));
            let w = rng.gen_range(0.15 * l..0.25 * l);
            (c, a, w)
        })
        .collect();
    sample_vector(
        |x| {
            let mut out = [0.0; 3];
            for (c, a, w) in &bumps {
                let r2: f64 = (0..3).map(|i| (x[i] - c[i]).powi(2)).sum();
                let g = (-r2 / (2.0 * w * w)).exp();
                for i in 0..3 {
                    out[i] += a[i] * g;
                }
            }
            out
        },
        spec,
    )
}

/// Which checks to run and their pass thresholds.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySettings {
    pub residual: bool,
    /// Bound on the residual divided by `3 ε ‖H₀‖_∞`.
    pub residual_threshold: f64,
    /// Refit the residual order over `ε, ε/2, ε/4`.
    pub residual_order: bool,
    pub residual_order_tolerance: f64,
    pub identities: bool,
    pub identity_threshold: f64,
    pub divergence_free: bool,
    pub divergence_threshold: f64,
    pub oracle: bool,
    pub oracle_tol: f64,
    pub oracle_max_iter: usize,
    pub oracle_threshold: f64,
    pub farfield: bool,
    pub farfield_threshold: f64,
    pub gauss_threshold: f64,
    /// Refit the Maxwell-limit rate over `β, 2β/3, β/3`.
    pub maxwell_rate: bool,
    pub maxwell_rate_tolerance: f64,
}

impl Default for VerifySettings {
    fn default() -> Self {
        VerifySettings {
            residual: true,
            residual_threshold: 1e-6,
            residual_order: false,
            residual_order_tolerance: 0.3,
            identities: true,
            identity_threshold: 1e-5,
            divergence_free: true,
            divergence_threshold: 1e-7,
            oracle: false,
            oracle_tol: 1e-10,
            oracle_max_iter: 200,
            oracle_threshold: 1e-9,
            farfield: true,
            farfield_threshold: 0.02,
            gauss_threshold: 1e-6,
            maxwell_rate: false,
            maxwell_rate_tolerance: 0.3,
        }
    }
}

impl VerifySettings {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("residual_threshold", self.residual_threshold),
            ("residual_order_tolerance", self.residual_order_tolerance),
            ("identity_threshold", self.identity_threshold),
            ("divergence_threshold", self.divergence_threshold),
            ("oracle_tol", self.oracle_tol),
            ("oracle_threshold", self.oracle_threshold),
            ("farfield_threshold", self.farfield_threshold),
            ("gauss_threshold", self.gauss_threshold),
            ("maxwell_rate_tolerance", self.maxwell_rate_tolerance),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("verify.{name}: must be positive, got {v}")));
            }
        }
        if self.oracle_max_iter == 0 {
            return Err(Error::Config("verify.oracle_max_iter: must be at least 1".into()));
        }
        Ok(())
    }
}

/// One thresholded check; `value` is `None` when it does not apply.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: f64,
    pub passed: bool,
}

impl Check {
    fn below(name: &str, value: f64, threshold: f64) -> Check {
        Check { name: name.into(), value: Some(value), threshold, passed: value.is_finite() && value <= threshold }
    }

    fn skipped(name: &str, threshold: f64) -> Check {
        Check { name: name.into(), value: None, threshold, passed: true }
    }

    fn failed(name: &str, threshold: f64) -> Check {
        Check { name: name.into(), value: None, threshold, passed: false }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlopeFit {
    pub epsilons: Vec<f64>,
    pub residuals: Vec<f64>,
    pub slope: f64,
    pub expected: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct VerificationReport {
    pub residual_sup: Option<f64>,
    pub residual_relative: Option<f64>,
    pub residual_slope_fit: Option<SlopeFit>,
    pub identity_defects: BTreeMap<String, f64>,
    pub divfree_defects: Vec<f64>,
    pub oracle_gap: Option<f64>,
    pub oracle_iterations: Option<usize>,
    pub farfield_ratio_error: Option<f64>,
    pub born_infeld: Option<BornInfeldReport>,
    pub notes: Vec<String>,
    pub checks: Vec<Check>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn push(&mut self, check: Check) {
        self.checks.push(check);
        self.passed = self.checks.iter().all(|c| c.passed);
    }
}

/// Run the enabled checks on a series solution.
pub fn verify_solution(sol: &SeriesSolution, plan: &KernelPlan, settings: &VerifySettings) -> Result<VerificationReport> {
    let cfg = &sol.config;
    let h = sol.h0.scaled(cfg.epsilon);
    let mut report = VerificationReport { passed: true, ..Default::default() };

    if settings.residual {
        let r = residual(&sol.u, &h, cfg.sign, cfg.guard)?;
        let scale = 3.0 * h.sup();
        let rel = if scale == 0.0 { r } else { r / scale };
        report.residual_sup = Some(r);
        report.residual_relative = Some(rel);
        report.push(Check::below("residual", rel, settings.residual_threshold));
    }

    if settings.residual_order {
        let eps: Vec<f64> = [1.0, 0.5, 0.25].iter().map(|f| f * cfg.epsilon).collect();
        let (residuals, slope) = residual_order(cfg, &eps)?;
        let expected = (2 * cfg.order_k + 3) as f64;
        report.push(Check::below("residual_order", (slope - expected).abs(), settings.residual_order_tolerance));
        report.residual_slope_fit = Some(SlopeFit { epsilons: eps, residuals, slope, expected });
    }

    if settings.identities {
        let (triple, grad) = identity_checks(&sol.v)?;
        report.identity_defects.insert("triple_product".into(), triple);
        report.identity_defects.insert("gradient_dot_curl".into(), grad);
        report.push(Check::below("identities", triple.max(grad), settings.identity_threshold));
    }

    if settings.divergence_free {
        report.divfree_defects = cubic_divergence_defects(&sol.terms, cfg.sign)?;
        let worst = report.divfree_defects.iter().cloned().fold(0.0, f64::max);
        report.push(Check::below("divergence_free", worst, settings.divergence_threshold));
    }

    if settings.oracle {
        let opts = OracleOptions { tol: settings.oracle_tol, max_iter: settings.oracle_max_iter, ..Default::default() };
        match fixed_point_oracle(&h, cfg.sign, opts, plan) {
            Ok(run) => {
                let gap = sol.u.sup_distance(&run.u)?;
                report.oracle_gap = Some(gap);
                report.oracle_iterations = Some(run.iterations);
                report.push(Check::below("oracle", gap, settings.oracle_threshold));
            }
            Err(e @ (Error::Divergence { .. } | Error::NoConvergence(_) | Error::Singular { .. })) => {
                report.notes.push(format!("oracle failed: {e}"));
                report.push(Check::failed("oracle", settings.oracle_threshold));
            }
            Err(e) => return Err(e),
        }
    }

    if settings.farfield {
        match farfield_check(&sol.u, &sol.h0, cfg.epsilon, cfg.sign) {
            Some(err) => {
                report.farfield_ratio_error = Some(err);
                report.push(Check::below("farfield", err, settings.farfield_threshold));
            }
            None => {
                report.notes.push("far-field check not applicable: zero total curvature".into());
                report.push(Check::skipped("farfield", settings.farfield_threshold));
            }
        }
    }

    report.notes.push(format!("largest |v| on the physical cube faces: {:.3e}", sol.diagnostics.boundary_tail));
    report.notes.extend(sol.warnings.iter().cloned());
    Ok(report)
}

/// Attach Born–Infeld results to a report.
pub fn add_born_infeld(report: &mut VerificationReport, bi: BornInfeldReport, settings: &VerifySettings) {
    report.push(Check::below("gauss_law", bi.gauss_defect, settings.gauss_threshold));
    if let Some(rate) = &bi.rate {
        report.push(Check::below("maxwell_rate", (rate.slope - 4.0).abs(), settings.maxwell_rate_tolerance));
    }
    report.born_infeld = Some(bi);
}
