//! Uniform cell-centered fields on a cube and their spectral derivatives.
//!
//! A [`GridSpec`] describes the physical cube `[-L, L]^3` sampled with `N`
//! points per axis. Fields are stored on the periodic padded cube of
//! `padding * N` points per axis that contains it; every differential
//! operator is a Fourier multiplier on that torus, so the discrete identities
//! `curl grad = 0` and `div curl = 0` hold to rounding.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{self, ik, k2, Engine};
use std::sync::Arc;

/// Upper (Euclidean, hypersurfaces in R^4) or lower (Minkowskian, space-like
/// hypersurfaces in R^{1,3}) sign of the mean-curvature operator.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometrySign {
    Euclidean,
    Minkowskian,
}

impl GeometrySign {
    /// Value of the `±` sign: +1 for Euclidean, -1 for Minkowskian.
    pub fn pm(self) -> f64 {
        match self {
            GeometrySign::Euclidean => 1.0,
            GeometrySign::Minkowskian => -1.0,
        }
    }

    /// Value of the `∓` sign.
    pub fn mp(self) -> f64 {
        -self.pm()
    }

    pub fn flipped(self) -> Self {
        match self {
            GeometrySign::Euclidean => GeometrySign::Minkowskian,
            GeometrySign::Minkowskian => GeometrySign::Euclidean,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GeometrySign::Euclidean => "euclidean",
            GeometrySign::Minkowskian => "minkowskian",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    extent: f64,
    points: usize,
    padding: usize,
}

impl GridSpec {
    pub fn new(extent: f64, points: usize, padding: usize) -> Result<Self> {
        if !(extent.is_finite() && extent > 0.0) {
            return Err(Error::InvalidGrid(format!("extent must be positive, got {extent}")));
        }
        if points < 8 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {points}"
            )));
        }
        if padding < 2 {
            return Err(Error::InvalidGrid(format!("padding factor must be at least 2, got {padding}")));
        }
        if points.checked_mul(padding).and_then(|m| m.checked_pow(3)).is_none() {
            return Err(Error::InvalidGrid("grid too large".into()));
        }
        Ok(GridSpec { extent, points, padding })
    }

    /// Half-width `L` of the physical cube.
    pub fn extent(&self) -> f64 {
        self.extent
    }

    pub fn points(&self) -> usize {
        self.points
    }

    pub fn padding(&self) -> usize {
        self.padding
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.extent / self.points as f64
    }

    /// Points per axis of the padded torus.
    pub fn torus_points(&self) -> usize {
        self.points * self.padding
    }

    /// Half-width of the padded torus.
    pub fn torus_extent(&self) -> f64 {
        self.extent * self.padding as f64
    }

    pub fn len(&self) -> usize {
        self.torus_points().pow(3)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Coordinate of torus node `i` along any axis.
    pub fn coord(&self, i: usize) -> f64 {
        -self.torus_extent() + (i as f64 + 0.5) * self.spacing()
    }

    pub fn flat(&self, i: usize, j: usize, k: usize) -> usize {
        let m = self.torus_points();
        i + m * (j + m * k)
    }

    pub fn position(&self, flat: usize) -> [f64; 3] {
        let m = self.torus_points();
        [self.coord(flat % m), self.coord((flat / m) % m), self.coord(flat / (m * m))]
    }

    /// First torus index of the physical cube along an axis.
    pub fn physical_offset(&self) -> usize {
        (self.padding - 1) * self.points / 2
    }

    /// Flat torus indices of the nodes in the sub-cube `|x_i| < fraction * L`.
    pub fn region(&self, fraction: f64) -> Vec<usize> {
        let half = fraction * self.extent;
        let m = self.torus_points();
        let axis: Vec<usize> = (0..m).filter(|&i| self.coord(i).abs() < half).collect();
        let mut out = Vec::with_capacity(axis.len().pow(3));
        for &k in &axis {
            for &j in &axis {
                for &i in &axis {
                    out.push(self.flat(i, j, k));
                }
            }
        }
        out
    }

    /// Flat torus indices of the physical cube in x-fastest order.
    pub fn physical_nodes(&self) -> Vec<usize> {
        let o = self.physical_offset();
        let n = self.points;
        let mut out = Vec::with_capacity(n * n * n);
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    out.push(self.flat(o + i, o + j, o + k));
                }
            }
        }
        out
    }

    pub(crate) fn engine(&self) -> Arc<Engine> {
        spectral::engine(self.torus_points(), 2.0 * self.torus_extent())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    spec: GridSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(spec: GridSpec) -> Self {
        ScalarField { spec, values: vec![0.0; spec.len()] }
    }

    pub fn from_values(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.len() {
            return Err(Error::Length { expected: spec.len(), got: values.len() });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            let [x, y, z] = spec.position(i);
            return Err(Error::NonFinite { x, y, z });
        }
        Ok(ScalarField { spec, values })
    }

    pub(crate) fn from_raw(spec: GridSpec, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), spec.len());
        ScalarField { spec, values }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn scaled(&self, a: f64) -> Self {
        ScalarField::from_raw(self.spec, self.values.iter().map(|v| a * v).collect())
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &ScalarField) -> Result<()> {
        same_grid(&self.spec, &other.spec)?;
        for (x, y) in self.values.iter_mut().zip(&other.values) {
            *x += a * y;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        ScalarField::from_raw(self.spec, self.values.iter().map(|&v| f(v)).collect())
    }

    /// Sum over all torus nodes times the cell volume.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.spec.cell_volume()
    }

    /// Largest magnitude over the physical cube.
    pub fn sup(&self) -> f64 {
        self.sup_over(&self.spec.physical_nodes())
    }

    pub fn sup_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| self.values[i].abs()).fold(0.0, f64::max)
    }

    /// Largest difference over the physical cube.
    pub fn sup_distance(&self, other: &ScalarField) -> Result<f64> {
        let mut d = self.clone();
        d.add_scaled(-1.0, other)?;
        Ok(d.sup())
    }

    /// Largest magnitude on the faces of the physical cube.
    pub fn boundary_sup(&self) -> f64 {
        let n = self.spec.points();
        let o = self.spec.physical_offset();
        let mut best: f64 = 0.0;
        for k in 0..n {
            for j in 0..n {
                for i in 0..n {
                    let on_face = [i, j, k].iter().any(|&a| a == 0 || a == n - 1);
                    if on_face {
                        best = best.max(self.values[self.spec.flat(o + i, o + j, o + k)].abs());
                    }
                }
            }
        }
        best
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    spec: GridSpec,
    comps: [Vec<f64>; 3],
}

impl VectorField {
    pub fn zeros(spec: GridSpec) -> Self {
        let n = spec.len();
        VectorField { spec, comps: [vec![0.0; n], vec![0.0; n], vec![0.0; n]] }
    }

    pub fn from_components(spec: GridSpec, comps: [Vec<f64>; 3]) -> Result<Self> {
        for c in &comps {
            if c.len() != spec.len() {
                return Err(Error::Length { expected: spec.len(), got: c.len() });
            }
            if let Some(i) = c.iter().position(|v| !v.is_finite()) {
                let [x, y, z] = spec.position(i);
                return Err(Error::NonFinite { x, y, z });
            }
        }
        Ok(VectorField { spec, comps })
    }

    pub(crate) fn from_raw(spec: GridSpec, comps: [Vec<f64>; 3]) -> Self {
        VectorField { spec, comps }
    }

    pub fn from_scalars(x: ScalarField, y: ScalarField, z: ScalarField) -> Result<Self> {
        same_grid(&x.spec, &y.spec)?;
        same_grid(&x.spec, &z.spec)?;
        Ok(VectorField { spec: x.spec, comps: [x.values, y.values, z.values] })
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn component(&self, c: usize) -> &[f64] {
        &self.comps[c]
    }

    pub fn components(&self) -> &[Vec<f64>; 3] {
        &self.comps
    }

    #[inline]
    pub fn at(&self, i: usize) -> [f64; 3] {
        [self.comps[0][i], self.comps[1][i], self.comps[2][i]]
    }

    pub fn scaled(&self, a: f64) -> Self {
        let s = |c: &Vec<f64>| c.iter().map(|v| a * v).collect::<Vec<_>>();
        VectorField::from_raw(self.spec, [s(&self.comps[0]), s(&self.comps[1]), s(&self.comps[2])])
    }

    /// `self += a * other`
    pub fn add_scaled(&mut self, a: f64, other: &VectorField) -> Result<()> {
        same_grid(&self.spec, &other.spec)?;
        for c in 0..3 {
            for (x, y) in self.comps[c].iter_mut().zip(&other.comps[c]) {
                *x += a * y;
            }
        }
        Ok(())
    }

    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        same_grid(&self.spec, &other.spec)?;
        let n = self.spec.len();
        let mut out = vec![0.0; n];
        for c in 0..3 {
            for (o, (a, b)) in out.iter_mut().zip(self.comps[c].iter().zip(&other.comps[c])) {
                *o += a * b;
            }
        }
        Ok(ScalarField::from_raw(self.spec, out))
    }

    pub fn cross(&self, other: &VectorField) -> Result<VectorField> {
        same_grid(&self.spec, &other.spec)?;
        let n = self.spec.len();
        let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for i in 0..n {
            let a = self.at(i);
            let b = other.at(i);
            let c = cross3(a, b);
            out[0][i] = c[0];
            out[1][i] = c[1];
            out[2][i] = c[2];
        }
        Ok(VectorField::from_raw(self.spec, out))
    }

    /// Pointwise product with a scalar field.
    pub fn times(&self, s: &ScalarField) -> Result<VectorField> {
        same_grid(&self.spec, &s.spec)?;
        let m = |c: &Vec<f64>| c.iter().zip(&s.values).map(|(a, b)| a * b).collect::<Vec<_>>();
        Ok(VectorField::from_raw(self.spec, [m(&self.comps[0]), m(&self.comps[1]), m(&self.comps[2])]))
    }

    pub fn magnitude(&self) -> ScalarField {
        let n = self.spec.len();
        let v = (0..n).map(|i| norm3(self.at(i))).collect();
        ScalarField::from_raw(self.spec, v)
    }

    /// Largest Euclidean magnitude over the physical cube.
    pub fn sup(&self) -> f64 {
        self.sup_over(&self.spec.physical_nodes())
    }

    pub fn sup_over(&self, nodes: &[usize]) -> f64 {
        nodes.iter().map(|&i| norm3(self.at(i))).fold(0.0, f64::max)
    }

    /// Largest difference magnitude over the physical cube.
    pub fn sup_distance(&self, other: &VectorField) -> Result<f64> {
        let mut d = self.clone();
        d.add_scaled(-1.0, other)?;
        Ok(d.sup())
    }
}

pub(crate) fn same_grid(a: &GridSpec, b: &GridSpec) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::GridMismatch)
    }
}

#[inline]
pub(crate) fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

#[inline]
pub(crate) fn norm3(a: [f64; 3]) -> f64 {
    (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt()
}

/// Sample a closed-form function at every torus node.
pub fn sample_scalar(expr: impl Fn([f64; 3]) -> f64, spec: GridSpec) -> Result<ScalarField> {
    let values: Vec<f64> = (0..spec.len()).map(|i| expr(spec.position(i))).collect();
    ScalarField::from_values(spec, values)
}

pub fn sample_vector(expr: impl Fn([f64; 3]) -> [f64; 3], spec: GridSpec) -> Result<VectorField> {
    let n = spec.len();
    let mut comps = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for i in 0..n {
        let v = expr(spec.position(i));
        for c in 0..3 {
            comps[c][i] = v[c];
        }
    }
    VectorField::from_components(spec, comps)
}

pub fn gradient(f: &ScalarField) -> VectorField {
    let e = f.spec.engine();
    let s = e.forward(&[&f.values]);
    let mut out = e.synthesize(3, |o, i, kv| ik(kv[o], s[0][i])).into_iter();
    VectorField::from_raw(f.spec, [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()])
}

pub fn divergence(f: &VectorField) -> ScalarField {
    let e = f.spec.engine();
    let s = e.forward(&[&f.comps[0], &f.comps[1], &f.comps[2]]);
    let mut out = e.synthesize(1, |_, i, kv| {
        ik(kv[0], s[0][i]) + ik(kv[1], s[1][i]) + ik(kv[2], s[2][i])
    });
    ScalarField::from_raw(f.spec, out.pop().unwrap())
}

pub fn curl(f: &VectorField) -> VectorField {
    let e = f.spec.engine();
    let s = e.forward(&[&f.comps[0], &f.comps[1], &f.comps[2]]);
    let mut out = e
        .synthesize(3, |o, i, kv| {
            let (a, b) = ((o + 1) % 3, (o + 2) % 3);
            ik(kv[a], s[b][i]) - ik(kv[b], s[a][i])
        })
        .into_iter();
    VectorField::from_raw(f.spec, [out.next().unwrap(), out.next().unwrap(), out.next().unwrap()])
}

pub fn laplacian(f: &ScalarField) -> ScalarField {
    let e = f.spec.engine();
    let s = e.forward(&[&f.values]);
    let mut out = e.synthesize(1, |_, i, kv| s[0][i] * (-k2(kv)));
    ScalarField::from_raw(f.spec, out.pop().unwrap())
}

/// Spectral Jacobian: entry `[c][d]` holds `∂_d F_c`.
pub fn jacobian(f: &VectorField) -> [[ScalarField; 3]; 3] {
    let e = f.spec.engine();
    let s = e.forward(&[&f.comps[0], &f.comps[1], &f.comps[2]]);
    let mut out = e.synthesize(9, |o, i, kv| ik(kv[o % 3], s[o / 3][i])).into_iter();
    let mut next = || ScalarField::from_raw(f.spec, out.next().unwrap());
    [[next(), next(), next()], [next(), next(), next()], [next(), next(), next()]]
}

/// `(a·∇) F` from the Jacobian of `F`.
pub fn convective(a: &VectorField, jac: &[[ScalarField; 3]; 3]) -> Result<VectorField> {
    same_grid(&a.spec, &jac[0][0].spec)?;
    let n = a.spec.len();
    let mut out = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
    for (c, row) in jac.iter().enumerate() {
        for (d, entry) in row.iter().enumerate() {
            for ((o, x), y) in out[c].iter_mut().zip(&a.comps[d]).zip(&entry.values) {
                *o += x * y;
            }
        }
    }
    Ok(VectorField::from_raw(a.spec, out))
}

/// Sup norms of `F` and of its spectral Jacobian (Frobenius magnitude) over
/// the physical cube; the computable stand-in for the C^{1,α} norm.
pub fn sup_norms(f: &VectorField) -> (f64, f64) {
    let j = jacobian(f);
    let nodes = f.spec.physical_nodes();
    let mut best: f64 = 0.0;
    for &i in &nodes {
        let mut s = 0.0;
        for row in &j {
            for entry in row {
                s += entry.values[i] * entry.values[i];
            }
        }
        best = best.max(s.sqrt());
    }
    (f.sup_over(&nodes), best)
}
