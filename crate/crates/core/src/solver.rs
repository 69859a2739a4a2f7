//! Assembly of the series solution.
//!
//! With `v = ±∇u/sqrt(1 ± |∇u|^2)` the curvature equation becomes
//! `∇·v = 3H`, `∇ × (v/sqrt(1 ∓ |v|^2)) = 0`. Inserting
//! `v = Σ ε^(2k+1) v^(2k+1)` gives the gradient field
//! `v^(1) = -∇N(3H₀)` and, for `k >= 1`, `v^(2k+1) = P V^(2k+1)`, or
//! equivalently the curl inverse of the cubic source.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::coefficients::{certify, ConvergenceCertificate};
use crate::error::{Error, Result};
use crate::grid::{curl, divergence, sample_scalar, sup_norms, GeometrySign, GridSpec, ScalarField, VectorField};
use crate::hierarchy::{build_V, build_cubic_rhs, TermStack};
use crate::potential::{curl_inverse, gradient_potential, newtonian_potential, solenoidal_project, support_ratio, KernelPlan};
use crate::verify::INNER_FRACTION;

/// Relative face magnitude above which a source counts as poorly supported.
pub const SUPPORT_THRESHOLD: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    SquareRoot,
    Cubic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bump {
    pub amplitude: f64,
    pub width: f64,
    #[serde(default)]
    pub center: [f64; 3],
}

impl Bump {
    fn eval(&self, x: [f64; 3]) -> f64 {
        let r2: f64 = (0..3).map(|i| (x[i] - self.center[i]).powi(2)).sum();
        self.amplitude * (-r2 / (2.0 * self.width * self.width)).exp()
    }
}

/// The curvature profile `H₀`; `H = ε H₀`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurvatureSpec {
    /// `A exp(-|x - c|^2 / 2σ^2)`
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: [f64; 3],
    },
    /// Opposite bumps at `±separation/2` on the first axis.
    Dipole { amplitude: f64, width: f64, separation: f64 },
    Bumps { bumps: Vec<Bump> },
    /// A scalar field dump on the solver grid, multiplied by `scale`.
    File {
        path: PathBuf,
        #[serde(default = "unit")]
        scale: f64,
    },
}

fn unit() -> f64 {
    1.0
}

impl CurvatureSpec {
    pub fn bumps(&self) -> Option<Vec<Bump>> {
        match self {
            CurvatureSpec::Gaussian { amplitude, width, center } => {
                Some(vec![Bump { amplitude: *amplitude, width: *width, center: *center }])
            }
            CurvatureSpec::Dipole { amplitude, width, separation } => {
                let d = 0.5 * separation;
                Some(vec![
                    Bump { amplitude: *amplitude, width: *width, center: [d, 0.0, 0.0] },
                    Bump { amplitude: -*amplitude, width: *width, center: [-d, 0.0, 0.0] },
                ])
            }
            CurvatureSpec::Bumps { bumps } => Some(bumps.clone()),
            CurvatureSpec::File { .. } => None,
        }
    }

    /// The same profile multiplied by `c`.
    pub fn scaled(&self, c: f64) -> CurvatureSpec {
        match self {
            CurvatureSpec::Gaussian { amplitude, width, center } => {
                CurvatureSpec::Gaussian { amplitude: c * amplitude, width: *width, center: *center }
            }
            CurvatureSpec::Dipole { amplitude, width, separation } => {
                CurvatureSpec::Dipole { amplitude: c * amplitude, width: *width, separation: *separation }
            }
            CurvatureSpec::Bumps { bumps } => CurvatureSpec::Bumps {
                bumps: bumps.iter().map(|b| Bump { amplitude: c * b.amplitude, ..b.clone() }).collect(),
            },
            CurvatureSpec::File { path, scale } => CurvatureSpec::File { path: path.clone(), scale: c * scale },
        }
    }

    /// Resolve a relative dump path against `base`.
    pub fn resolve_paths(&mut self, base: &std::path::Path) {
        if let CurvatureSpec::File { path, .. } = self {
            if path.is_relative() {
                *path = base.join(&*path);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let CurvatureSpec::File { scale, .. } = self {
            if !scale.is_finite() {
                return Err(Error::Config("source.scale must be finite".into()));
            }
        }
        if let Some(bumps) = self.bumps() {
            if bumps.is_empty() {
                return Err(Error::Config("source needs at least one bump".into()));
            }
            for b in bumps {
                if !(b.width.is_finite() && b.width > 0.0) {
                    return Err(Error::Config(format!("source width must be positive, got {}", b.width)));
                }
                if !b.amplitude.is_finite() || b.center.iter().any(|c| !c.is_finite()) {
                    return Err(Error::Config("source amplitude and center must be finite".into()));
                }
            }
        }
        Ok(())
    }

    pub fn sample(&self, spec: GridSpec) -> Result<ScalarField> {
        match self.bumps() {
            Some(bumps) => sample_scalar(|x| bumps.iter().map(|b| b.eval(x)).sum(), spec),
            None => match self {
                CurvatureSpec::File { path, scale } => Ok(crate::dump::read_scalar(path, spec)?.scaled(*scale)),
                _ => unreachable!(),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub sign: GeometrySign,
    pub epsilon: f64,
    pub order_k: usize,
    pub variant: Variant,
    pub grid: GridSpec,
    pub source: CurvatureSpec,
    /// Distance kept from the singular magnitude 1 (of `|v|` for Euclidean,
    /// of `|∇u|` for Minkowskian).
    pub guard: f64,
}

impl SolverConfig {
    pub fn new(sign: GeometrySign, epsilon: f64, order_k: usize, grid: GridSpec, source: CurvatureSpec) -> Self {
        SolverConfig { sign, epsilon, order_k, variant: Variant::SquareRoot, grid, source, guard: 0.05 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Config(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if !(self.guard > 0.0 && self.guard < 1.0) {
            return Err(Error::Config(format!("guard must lie in (0, 1), got {}", self.guard)));
        }
        if self.order_k > 12 {
            return Err(Error::Config(format!("order_k {} exceeds the supported 12", self.order_k)));
        }
        self.source.validate()
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Diagnostics {
    /// `‖v^(2k+1)‖_∞` per order.
    pub term_sup: Vec<f64>,
    /// `‖∇·v^(2k+1)‖_∞ / ‖∇v^(2k+1)‖_∞` on the inner half-box, `k >= 1`.
    pub term_divergence: Vec<f64>,
    /// `‖∇ × v^(1)‖_∞ / ‖∇v^(1)‖_∞`
    pub first_order_curl: f64,
    /// `(‖v^(1)‖_∞, ‖∇v^(1)‖_∞)`
    pub first_order_norms: (f64, f64),
    pub source_integral: f64,
    pub source_support_ratio: f64,
    /// Largest `|v|` on the faces of the physical cube (tail magnitude).
    pub boundary_tail: f64,
    pub max_v: f64,
    pub max_w: f64,
}

#[derive(Clone, Debug)]
pub struct SeriesSolution {
    pub config: SolverConfig,
    pub h0: ScalarField,
    pub terms: Vec<VectorField>,
    pub v: VectorField,
    pub w: VectorField,
    pub u: ScalarField,
    pub certificate: ConvergenceCertificate,
    pub diagnostics: Diagnostics,
    pub warnings: Vec<String>,
}

/// `v^(1) = -∇N(3H₀)`
pub fn first_order_term(h0: &ScalarField, plan: &KernelPlan) -> Result<VectorField> {
    Ok(gradient_potential(&h0.scaled(3.0), plan)?.scaled(-1.0))
}

fn breach(spec: &GridSpec, field: &VectorField, limit: f64) -> Result<()> {
    let mag = field.magnitude();
    let (mut worst, mut at) = (0.0, 0);
    for (i, &m) in mag.values().iter().enumerate() {
        if m > worst {
            worst = m;
            at = i;
        }
    }
    if worst >= limit {
        let [x, y, z] = spec.position(at);
        return Err(Error::Singular { x, y, z, magnitude: worst, limit });
    }
    Ok(())
}

/// `w = v / sqrt(1 ∓ |v|^2)`.
///
/// Euclidean fields must keep `|v| < 1 - guard`; the Minkowskian map is
/// regular and its image satisfies `|w| < 1`, which is guarded instead.
pub fn reconstruct_w(v: &VectorField, sign: GeometrySign, guard: f64) -> Result<VectorField> {
    let limit = 1.0 - guard;
    if sign == GeometrySign::Euclidean {
        breach(v.spec(), v, limit)?;
    }
    let s = -sign.pm();
    let factor = v.dot(v)?.map(|q| 1.0 / (1.0 + s * q).sqrt());
    let w = v.times(&factor)?;
    if sign == GeometrySign::Minkowskian {
        breach(v.spec(), &w, limit)?;
    }
    Ok(w)
}

/// `u = N ρ`, `ρ = ∓3εH₀ ± Σ_{k>=1} ε^(2k+1) ∇·V^(2k+1)`, so that
/// `∇u = ±(ε v^(1) + Σ ε^(2k+1) (v^(2k+1) - V^(2k+1)))`.
pub fn reconstruct_u(
    h0: &ScalarField,
    stack: &TermStack,
    epsilon: f64,
    plan: &KernelPlan,
) -> Result<ScalarField> {
    let pm = stack.sign().pm();
    let mut rho = h0.scaled(-pm * 3.0 * epsilon);
    for k in 1..stack.len() {
        let big_v = build_V(k, stack)?;
        rho.add_scaled(pm * epsilon.powi(2 * k as i32 + 1), &divergence(&big_v))?;
    }
    newtonian_potential(&rho, plan)
}

fn normalized(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

/// Run the hierarchy to order `2K+1` and assemble `v`, `w`, `u`.
pub fn solve_series(config: &SolverConfig) -> Result<SeriesSolution> {
    config.validate()?;
    let spec = config.grid;
    let plan = KernelPlan::new(spec);
    let h0 = config.source.sample(spec)?;
    solve_with(config, &plan, h0)
}

/// As [`solve_series`] with a prepared plan and sampled source.
pub fn solve_with(config: &SolverConfig, plan: &KernelPlan, h0: ScalarField) -> Result<SeriesSolution> {
    config.validate()?;
    let spec = config.grid;
    let mut warnings = Vec::new();
    let mut diagnostics = Diagnostics::default();

    diagnostics.source_integral = h0.integral();
    diagnostics.source_support_ratio = support_ratio(&h0);
    if diagnostics.source_support_ratio > SUPPORT_THRESHOLD {
        warnings.push(format!(
            "source is not well contained in the box: face/peak ratio {:.3e}",
            diagnostics.source_support_ratio
        ));
    }

    let reach = 3f64.sqrt() * INNER_FRACTION * spec.extent();
    if reach > plan.exact_radius() {
        warnings.push(format!(
            "inner region reaches radius {reach:.3} beyond the exact radius {:.3}; raise padding or points",
            plan.exact_radius()
        ));
    }

    let v1 = first_order_term(&h0, plan)?;
    let norms = sup_norms(&v1);
    diagnostics.first_order_norms = norms;
    diagnostics.first_order_curl = normalized(curl(&v1).sup(), norms.1);

    let inner = spec.region(INNER_FRACTION);
    let mut stack = TermStack::new(config.sign, v1);
    for k in 1..=config.order_k {
        let term = match config.variant {
            Variant::SquareRoot => solenoidal_project(&build_V(k, &stack)?, plan)?,
            Variant::Cubic => curl_inverse(&build_cubic_rhs(k, &stack)?, plan)?,
        };
        let (_, grad) = sup_norms(&term);
        diagnostics.term_divergence.push(normalized(divergence(&term).sup_over(&inner), grad));
        stack.push(term)?;
    }

    let mut v = VectorField::zeros(spec);
    for (k, t) in stack.terms().iter().enumerate() {
        diagnostics.term_sup.push(t.sup());
        v.add_scaled(config.epsilon.powi(2 * k as i32 + 1), t)?;
    }
    let w = reconstruct_w(&v, config.sign, config.guard)?;
    let u = reconstruct_u(&h0, &stack, config.epsilon, plan)?;

    diagnostics.max_v = v.sup();
    diagnostics.max_w = w.sup();
    diagnostics.boundary_tail = v.magnitude().boundary_sup();

    let xi_g = config.epsilon * norms.0.max(norms.1);
    let certificate = certify(xi_g, config.order_k)?;
    if !certificate.inside {
        warnings.push(format!(
            "certificate outside the convergence radius: xi_g = {:.4} >= {:.4}; the bound is only sufficient",
            certificate.xi_g, certificate.xi_star
        ));
    }

    Ok(SeriesSolution {
        config: config.clone(),
        h0,
        terms: stack.into_terms(),
        v,
        w,
        u,
        certificate,
        diagnostics,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::gradient;
    use std::f64::consts::PI;

    fn spec() -> GridSpec {
        GridSpec::new(4.0, 32, 3).unwrap()
    }

    fn gaussian() -> CurvatureSpec {
        CurvatureSpec::Gaussian { amplitude: 1.0, width: 0.7, center: [0.0; 3] }
    }

    #[test]
    fn zero_source_gives_zero_solution() {
        let src = CurvatureSpec::Gaussian { amplitude: 0.0, width: 1.0, center: [0.0; 3] };
        let cfg = SolverConfig { order_k: 2, ..SolverConfig::new(GeometrySign::Euclidean, 0.1, 2, spec(), src) };
        let sol = solve_series(&cfg).unwrap();
        assert!(sol.terms.iter().all(|t| t.sup() == 0.0));
        assert_eq!(sol.u.sup(), 0.0);
    }

    #[test]
    fn constant_magnitude_reconstruction() {
        let v = crate::grid::sample_vector(|_| [0.36, 0.48, 0.0], spec()).unwrap();
        let we = reconstruct_w(&v, GeometrySign::Euclidean, 0.05).unwrap();
        let wm = reconstruct_w(&v, GeometrySign::Minkowskian, 0.05).unwrap();
        assert!((we.sup() - 0.75).abs() < 1e-14);
        assert!((wm.sup() - 0.6 / 1.36f64.sqrt()).abs() < 1e-14);
        assert!((wm.sup() - 0.514496).abs() < 1e-6);
        assert_eq!(reconstruct_w(&VectorField::zeros(spec()), GeometrySign::Euclidean, 0.05).unwrap().sup(), 0.0);
    }

    #[test]
    fn reconstruction_guard() {
        let v = crate::grid::sample_vector(|x| [if x[0].abs() < 0.2 { 0.97 } else { 0.1 }, 0.0, 0.0], spec()).unwrap();
        match reconstruct_w(&v, GeometrySign::Euclidean, 0.05) {
            Err(Error::Singular { x, magnitude, .. }) => {
                assert!(x.abs() < 0.2);
                assert!((magnitude - 0.97).abs() < 1e-15);
            }
            other => panic!("{other:?}"),
        }
        let big = v.scaled(4.0);
        assert!(matches!(reconstruct_w(&big, GeometrySign::Minkowskian, 0.05), Err(Error::Singular { .. })));
        assert!(reconstruct_w(&v, GeometrySign::Minkowskian, 0.05).is_ok());
    }

    #[test]
    fn first_order_term_follows_gauss_law() {
        let s = spec();
        let plan = KernelPlan::new(s);
        let sigma = 0.6;
        let h0 = sample_scalar(|x| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (2.0 * sigma * sigma)).exp(), s).unwrap();
        let v1 = first_order_term(&h0, &plan).unwrap();
        let mut d = divergence(&v1);
        d.add_scaled(-3.0, &h0).unwrap();
        assert!(d.sup_over(&s.region(0.5)) <= 1e-7 * h0.sup());
        assert!(curl(&v1).sup() <= 1e-10 * v1.sup() * 20.0);

        // enclosed mass of the Gaussian: (2πσ²)^(3/2) P(3/2, r²/2σ²)
        let total = (2.0 * PI * sigma * sigma).powf(1.5);
        let mut worst: f64 = 0.0;
        for i in s.region(1.0) {
            let x = s.position(i);
            let r = (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt();
            if r < 3.0 * sigma || r > plan.exact_radius() {
                continue;
            }
            let t = r / (sigma * 2f64.sqrt());
            let enclosed = total * (libm::erf(t) - 2.0 * t * (-t * t).exp() / PI.sqrt());
            let radial = 3.0 / (4.0 * PI) * enclosed / (r * r);
            let got = (v1.at(i)[0] * x[0] + v1.at(i)[1] * x[1] + v1.at(i)[2] * x[2]) / r;
            worst = worst.max((got - radial).abs() / radial);
        }
        assert!(worst < 1e-6, "{worst}");
    }

    #[test]
    fn gradient_of_u_is_signed_w_series() {
        for sign in [GeometrySign::Euclidean, GeometrySign::Minkowskian] {
            let src = CurvatureSpec::Dipole { amplitude: 1.0, width: 0.7, separation: 1.2 };
            let cfg = SolverConfig::new(sign, 0.1, 2, spec(), src);
            let sol = solve_series(&cfg).unwrap();
            let stack = {
                let mut st = TermStack::new(sign, sol.terms[0].clone());
                for t in &sol.terms[1..] {
                    st.push(t.clone()).unwrap();
                }
                st
            };
            let mut series_w = sol.terms[0].scaled(cfg.epsilon);
            for k in 1..=2 {
                let e = cfg.epsilon.powi(2 * k as i32 + 1);
                series_w.add_scaled(e, &sol.terms[k]).unwrap();
                series_w.add_scaled(-e, &build_V(k, &stack).unwrap()).unwrap();
            }
            let gu = gradient(&sol.u).scaled(sign.pm());
            let inner = spec().region(0.5);
            let mut diff = gu.clone();
            diff.add_scaled(-1.0, &series_w).unwrap();
            assert!(diff.sup_over(&inner) < 1e-9 * series_w.sup_over(&inner));
        }
    }

    #[test]
    fn even_terms_absent_and_v_is_weighted_sum() {
        let cfg = SolverConfig::new(GeometrySign::Minkowskian, 0.1, 2, spec(), gaussian());
        let sol = solve_series(&cfg).unwrap();
        assert_eq!(sol.terms.len(), 3);
        let mut v = VectorField::zeros(spec());
        for (k, t) in sol.terms.iter().enumerate() {
            v.add_scaled(0.1f64.powi(2 * k as i32 + 1), t).unwrap();
        }
        assert_eq!(v, sol.v);
    }

    #[test]
    fn sign_duality_at_third_order() {
        let src = CurvatureSpec::Dipole { amplitude: 1.0, width: 0.7, separation: 1.2 };
        let e = solve_series(&SolverConfig::new(GeometrySign::Euclidean, 0.05, 1, spec(), src.clone())).unwrap();
        let m = solve_series(&SolverConfig::new(GeometrySign::Minkowskian, 0.05, 1, spec(), src)).unwrap();
        assert_eq!(e.terms[0], m.terms[0]);
        assert_eq!(e.terms[1], m.terms[1].scaled(-1.0));
    }

    #[test]
    fn radial_source_degenerates() {
        let src = CurvatureSpec::Gaussian { amplitude: 1.0, width: 1.0, center: [0.0; 3] };
        let cfg = SolverConfig::new(GeometrySign::Euclidean, 0.1, 2, spec(), src);
        let sol = solve_series(&cfg).unwrap();
        for k in 1..=2 {
            assert!(sol.terms[k].sup() <= 1e-6 * sol.terms[0].sup(), "{k} {} {}", sol.terms[k].sup(), sol.terms[0].sup());
        }
    }

    #[test]
    fn certificate_outside_radius_is_a_warning() {
        let cfg = SolverConfig::new(GeometrySign::Minkowskian, 2.0, 0, spec(), gaussian());
        let sol = solve_series(&cfg).unwrap();
        assert!(!sol.certificate.inside);
        assert!(sol.warnings.iter().any(|w| w.contains("certificate")));
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = SolverConfig::new(GeometrySign::Euclidean, -1.0, 0, spec(), gaussian());
        assert!(matches!(solve_series(&bad), Err(Error::Config(_))));
        let bad_src = CurvatureSpec::Gaussian { amplitude: 1.0, width: 0.0, center: [0.0; 3] };
        assert!(solve_series(&SolverConfig::new(GeometrySign::Euclidean, 0.1, 0, spec(), bad_src)).is_err());
    }
}
