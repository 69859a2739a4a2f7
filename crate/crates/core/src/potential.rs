//! Inverse Laplacian, gradient potentials and the solenoidal projector.
//!
//! Convention: `N = (-Δ)^(-1)`, so `-Δ N f = f` for decaying sources and
//! `N f ≈ (1/4π) ∫ f(y)/|x-y| dy`.
//!
//! The periodic inverse on the padded torus differs from the free-space
//! potential by image terms driven by the monopole and dipole moments of
//! the source. A compactly supported source is therefore split as
//! `f = (f - Q b - p·d) + Q b + p·d`, with `Q` its mass, `p` its dipole
//! moment, `b` a unit-mass radial shell near the torus boundary and
//! `d = -∇b` its unit dipole layers. The remainder is inverted periodically
//! and its constant fixed from the second moment. Inside the shell's hole
//! `b` contributes the constant `Q U_b` and `d` contributes nothing, so
//! there the result is the free-space potential up to quadrupole images.
//! The physical cube corners that reach into the shell are not exact.

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;

use crate::error::Result;
use crate::grid::{curl, divergence, gradient, same_grid, GridSpec, ScalarField, VectorField};
use crate::spectral::k2;

/// Shell width as a fraction of the torus half-width, and its floor in
/// grid spacings. The shell sits this many widths inside the torus face.
const SHELL_WIDTH: f64 = 0.04;
const SHELL_MIN_CELLS: f64 = 2.5;
const SHELL_CLEARANCE: f64 = 6.0;

#[derive(Clone, Debug)]
pub struct KernelPlan {
    spec: GridSpec,
    shell: Vec<f64>,
    layers: [Vec<f64>; 3],
    shell_potential: f64,
    shell_radius: f64,
    shell_width: f64,
}

impl KernelPlan {
    pub fn new(spec: GridSpec) -> Self {
        let s = (SHELL_WIDTH * spec.torus_extent()).max(SHELL_MIN_CELLS * spec.spacing());
        let r0 = spec.torus_extent() - SHELL_CLEARANCE * s;
        let dv = spec.cell_volume();
        let mut shell: Vec<f64> = (0..spec.len())
            .map(|i| {
                let r = norm(spec.position(i));
                (-(r - r0) * (r - r0) / (2.0 * s * s)).exp()
            })
            .collect();
        let mass: f64 = shell.iter().sum::<f64>() * dv;
        shell.iter_mut().for_each(|b| *b /= mass);
        let shell_potential = (0..spec.len())
            .map(|i| shell[i] / (4.0 * PI * norm(spec.position(i))))
            .sum::<f64>()
            * dv;
        let mut layers = [0, 1, 2].map(|c| {
            (0..spec.len())
                .map(|i| {
                    let x = spec.position(i);
                    let r = norm(x);
                    if r == 0.0 {
                        0.0
                    } else {
                        shell[i] * (r - r0) / (s * s) * x[c] / r
                    }
                })
                .collect::<Vec<f64>>()
        });
        let moment: f64 = (0..spec.len()).map(|i| spec.position(i)[0] * layers[0][i]).sum::<f64>() * dv;
        layers.iter_mut().for_each(|l| l.iter_mut().for_each(|v| *v /= moment));
        KernelPlan { spec, shell, layers, shell_potential, shell_radius: r0, shell_width: s }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    /// Radius inside which potentials agree with the free-space convolution.
    pub fn exact_radius(&self) -> f64 {
        (self.shell_radius - 7.0 * self.shell_width).max(0.0)
    }
}

fn norm(x: [f64; 3]) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}

/// Zero-mean periodic inverse of `-Δ` on the torus.
pub(crate) fn periodic_inverse(spec: &GridSpec, values: &[f64]) -> Vec<f64> {
    let e = spec.engine();
    let s = e.forward(&[values]);
    e.synthesize(1, |_, i, kv| {
        let q = k2(kv);
        if q > 0.0 {
            s[0][i] / q
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
    .pop()
    .expect("one output")
}

/// `N f`, the Newtonian potential of `f`.
pub fn newtonian_potential(f: &ScalarField, plan: &KernelPlan) -> Result<ScalarField> {
    same_grid(f.spec(), &plan.spec)?;
    let spec = plan.spec;
    let dv = spec.cell_volume();
    let q = f.integral();
    let mut p = [0.0; 3];
    for (i, v) in f.values().iter().enumerate() {
        let x = spec.position(i);
        (0..3).for_each(|c| p[c] += x[c] * v);
    }
    p.iter_mut().for_each(|m| *m *= dv);
    let g: Vec<f64> = (0..spec.len())
        .map(|i| {
            let l = &plan.layers;
            f.values()[i] - q * plan.shell[i] - p[0] * l[0][i] - p[1] * l[1][i] - p[2] * l[2][i]
        })
        .collect();
    let second_moment: f64 = g
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let x = spec.position(i);
            v * (x[0] * x[0] + x[1] * x[1] + x[2] * x[2])
        })
        .sum::<f64>()
        * dv;
    let volume = (2.0 * spec.torus_extent()).powi(3);
    let shift = q * plan.shell_potential - second_moment / (6.0 * volume);
    let mut u = periodic_inverse(&spec, &g);
    u.iter_mut().for_each(|x| *x += shift);
    Ok(ScalarField::from_raw(spec, u))
}

/// `∇ N f`; its divergence is `-f`.
pub fn gradient_potential(f: &ScalarField, plan: &KernelPlan) -> Result<VectorField> {
    Ok(gradient(&newtonian_potential(f, plan)?))
}

/// `P V = V + ∇ N (∇·V)`, the divergence-free part of `V`.
///
/// Divergence-free inside the exact radius; the compensating layers of
/// `N` leave a divergence in the shell.
pub fn solenoidal_project(v: &VectorField, plan: &KernelPlan) -> Result<VectorField> {
    same_grid(v.spec(), &plan.spec)?;
    let mut out = gradient_potential(&divergence(v), plan)?;
    out.add_scaled(1.0, v)?;
    Ok(out)
}

/// `∇ × N F`: for divergence-free `F` the decaying solution of
/// `∇ × X = F`, `∇·X = 0`.
pub fn curl_inverse(f: &VectorField, plan: &KernelPlan) -> Result<VectorField> {
    same_grid(f.spec(), &plan.spec)?;
    let spec = plan.spec;
    let potential = |c: usize| newtonian_potential(&ScalarField::from_raw(spec, f.component(c).to_vec()), plan);
    Ok(curl(&VectorField::from_scalars(potential(0)?, potential(1)?, potential(2)?)?))
}

/// Ratio of the largest magnitude on the physical cube faces to the
/// overall sup; sources should keep this small.
pub fn support_ratio(f: &ScalarField) -> f64 {
    let sup = f.sup();
    if sup == 0.0 {
        0.0
    } else {
        f.boundary_sup() / sup
    }
}
