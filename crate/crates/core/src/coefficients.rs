//! Exact coefficient algebra for the majorant series.
//!
//! `M_j` are the Maclaurin coefficients of `1/sqrt(1 - z)`; `R_{2k+1}` bound
//! the hierarchy terms through `‖v^(2k+1)‖ <= R_{2k+1} ‖v^(1)‖^(2k+1)`. Their
//! generating function `G` is the inverse of `g -> 2g - g/sqrt(1 - g^2)`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::grid::GeometrySign;
use crate::hierarchy::multi_indices;

/// Largest order accepted by [`recursion_table`].
pub const MAX_TABLE_K: usize = 16;

/// Largest order accepted by [`invert_generating_function`].
pub const MAX_SERIES_K: usize = 256;

const ROOT_TOL: f64 = 1e-14;

/// `j`-th coefficient of the expansion `v/sqrt(1 ∓ |v|^2) = Σ M_j |v|^(2j) v`
/// for the given geometry: positive for Euclidean, alternating for
/// Minkowskian.
pub fn maclaurin_coeff(j: usize, sign: GeometrySign) -> BigRational {
    // C(2j, j) / 4^j == (2j-1)!! / (j! 2^j)
    let mut num = BigInt::one();
    let mut den = BigInt::one();
    for i in 1..=j {
        num *= BigInt::from(2 * i - 1);
        den *= BigInt::from(2 * i);
    }
    let m = BigRational::new(num, den);
    match sign {
        GeometrySign::Minkowskian if j % 2 == 1 => -m,
        _ => m,
    }
}

pub fn maclaurin_f64(j: usize, sign: GeometrySign) -> f64 {
    to_f64(&maclaurin_coeff(j, sign))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[derive(Clone, Debug, PartialEq)]
pub struct RecursionTable {
    pub max_k: usize,
    /// `M[j]`, j = 0..=max_k
    pub m: Vec<BigRational>,
    /// `R[k]` holds `R_{2k+1}`, k = 0..=max_k
    pub r: Vec<BigRational>,
}

impl RecursionTable {
    /// `Σ_{k<=K} R_{2k+1} ξ^(2k+1)`
    pub fn partial_sum(&self, xi: f64, k_max: usize) -> f64 {
        let mut s = 0.0;
        let mut p = xi;
        for r in self.r.iter().take(k_max + 1) {
            s += to_f64(r) * p;
            p *= xi * xi;
        }
        s
    }

    /// CSV rows `k,R,value` with `R` written as `p/q`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,R,value\n");
        for (k, r) in self.r.iter().enumerate() {
            out.push_str(&format!("{k},{}/{},{:e}\n", r.numer(), r.denom(), to_f64(r)));
        }
        out
    }
}

pub fn recursion_table(max_k: usize) -> Result<RecursionTable> {
    if max_k > MAX_TABLE_K {
        return Err(Error::Capacity(max_k, MAX_TABLE_K));
    }
    let m: Vec<BigRational> =
        (0..=max_k).map(|j| maclaurin_coeff(j, GeometrySign::Euclidean)).collect();
    let mut r: Vec<BigRational> = vec![BigRational::one()];
    // inner[h] = Σ_j M_j Σ_{|ℓ|_{2j} = h-j} Π R_{2ℓ_i+1}; only uses R below index h
    let mut inner: Vec<BigRational> = vec![BigRational::zero()];
    for k in 1..=max_k {
        let h = k;
        let mut s = BigRational::zero();
        for j in 1..=h {
            let set = multi_indices(j, h - j);
            let mut acc = BigRational::zero();
            for tuple in set.tuples() {
                let mut num = BigInt::one();
                let mut den = BigInt::one();
                for &l in tuple {
                    num *= r[l].numer();
                    den *= r[l].denom();
                }
                acc += BigRational::new(num, den);
            }
            s += &m[j] * acc;
        }
        inner.push(s);
        let mut rk = BigRational::zero();
        for h in 1..=k {
            rk += &r[k - h] * &inner[h];
        }
        r.push(rk);
    }
    Ok(RecursionTable { max_k, m, r })
}

/// Maclaurin coefficients of `G` through `ξ^(2K+1)`, index `n` holding the
/// coefficient of `ξ^n`.
///
/// Computed by fixed-point iteration of `g = ξ + Σ_{j>=1} M_j g^(2j+1)` on
/// truncated power series, which gains one correct odd order per pass.
pub fn invert_generating_function(max_k: usize) -> Result<Vec<BigRational>> {
    if max_k > MAX_SERIES_K {
        return Err(Error::Capacity(max_k, MAX_SERIES_K));
    }
    let n = 2 * max_k + 2;
    let mut g = vec![BigRational::zero(); n];
    g[1] = BigRational::one();
    for _ in 0..max_k {
        let g2 = series_mul(&g, &g, n);
        let mut next = vec![BigRational::zero(); n];
        next[1] = BigRational::one();
        // power = g^(2j+1), starting from g^3
        let mut power = series_mul(&g2, &g, n);
        for j in 1..=max_k {
            let mj = maclaurin_coeff(j, GeometrySign::Euclidean);
            for (x, p) in next.iter_mut().zip(&power) {
                if !p.is_zero() {
                    *x += &mj * p;
                }
            }
            if 2 * j + 3 >= n {
                break;
            }
            power = series_mul(&power, &g2, n);
        }
        g = next;
    }
    Ok(g)
}

fn series_mul(a: &[BigRational], b: &[BigRational], n: usize) -> Vec<BigRational> {
    let mut out = vec![BigRational::zero(); n];
    for (i, x) in a.iter().enumerate().filter(|(_, x)| !x.is_zero()) {
        for (j, y) in b.iter().enumerate().take(n - i).filter(|(_, y)| !y.is_zero()) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `ξ* = (2^(2/3) - 1)^(3/2)`
pub fn convergence_radius() -> f64 {
    (2f64.powf(2.0 / 3.0) - 1.0).powf(1.5)
}

/// The same radius from the critical point `cos ψ* = 2^(-1/3)` of
/// `ψ -> 2 sin ψ - tan ψ`.
pub fn convergence_radius_critical() -> f64 {
    let c = 2f64.powf(-1.0 / 3.0);
    let s = (1.0 - c * c).sqrt();
    (2.0 * s - s / c).abs()
}

/// `ξ(g) = 2g - g/sqrt(1 - g^2)`
pub fn implicit_xi(g: f64) -> f64 {
    2.0 * g - g / (1.0 - g * g).sqrt()
}

/// `G(ξ)` on `[0, ξ*]` by bisection followed by Newton steps.
pub fn generating_function(xi: f64) -> Option<f64> {
    let xs = convergence_radius();
    if !(0.0..=xs).contains(&xi) {
        return None;
    }
    if xi == 0.0 {
        return Some(0.0);
    }
    let mut lo = 0.0;
    let mut hi = (1.0 - 2f64.powf(-2.0 / 3.0)).sqrt();
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if implicit_xi(mid) < xi {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut g = 0.5 * (lo + hi);
    for _ in 0..50 {
        let q = 1.0 - g * g;
        let d = 2.0 - 1.0 / (q * q.sqrt());
        if d <= 0.0 {
            break;
        }
        let step = (implicit_xi(g) - xi) / d;
        let next = (g - step).clamp(lo, hi);
        if (next - g).abs() <= ROOT_TOL * g.max(1e-300) {
            g = next;
            break;
        }
        g = next;
    }
    Some(g)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConvergenceCertificate {
    pub xi_g: f64,
    pub xi_star: f64,
    pub inside: bool,
    /// `None` stands for an unbounded tail (outside the radius).
    pub majorant_tail: Option<f64>,
    pub order_k: usize,
    pub advisory: bool,
}

pub fn certify(xi_g: f64, order_k: usize) -> Result<ConvergenceCertificate> {
    let xi_star = convergence_radius();
    let inside = xi_g < xi_star;
    let majorant_tail = if inside {
        let table = recursion_table(order_k.min(MAX_TABLE_K))?;
        let partial = table.partial_sum(xi_g, order_k);
        generating_function(xi_g).map(|g| (g - partial).max(0.0))
    } else {
        None
    };
    Ok(ConvergenceCertificate { xi_g, xi_star, inside, majorant_tail, order_k, advisory: true })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    #[test]
    fn maclaurin_values() {
        assert_eq!(maclaurin_coeff(0, GeometrySign::Euclidean), q(1, 1));
        assert_eq!(maclaurin_coeff(0, GeometrySign::Minkowskian), q(1, 1));
        assert_eq!(maclaurin_coeff(1, GeometrySign::Euclidean), q(1, 2));
        assert_eq!(maclaurin_coeff(3, GeometrySign::Euclidean), q(5, 16));
        assert_eq!(maclaurin_coeff(3, GeometrySign::Minkowskian), q(-5, 16));
    }

    #[test]
    fn maclaurin_matches_binomial_series() {
        // (1 - z)^(-1/2): c_j = c_{j-1} (2j - 1) / (2j)
        let mut c = q(1, 1);
        for j in 1..20 {
            c = c * q(2 * j as i64 - 1, 2 * j as i64);
            assert_eq!(maclaurin_coeff(j, GeometrySign::Euclidean), c);
        }
    }

    #[test]
    fn first_table_entries() {
        let t = recursion_table(2).unwrap();
        assert_eq!(t.r, vec![q(1, 1), q(1, 2), q(9, 8)]);
    }

    #[test]
    fn table_matches_inversion() {
        let t = recursion_table(8).unwrap();
        let g = invert_generating_function(8).unwrap();
        for k in 0..=8 {
            assert_eq!(t.r[k], g[2 * k + 1], "k = {k}");
            assert!(g[2 * k].is_zero());
        }
    }

    #[test]
    fn capacity_is_enforced() {
        assert!(matches!(recursion_table(MAX_TABLE_K + 1), Err(Error::Capacity(..))));
    }

    #[test]
    fn radius_routes_agree() {
        let a = convergence_radius();
        let b = convergence_radius_critical();
        assert!((a - b).abs() < 1e-14);
        assert!((a - 0.450196).abs() < 1e-6);
        assert!((2f64.powf(2.0 / 3.0) - 1.0 - 0.587401).abs() < 1e-6);
    }

    #[test]
    fn generating_function_inverts() {
        for &x in &[1e-6, 0.01, 0.2, 0.4, 0.45] {
            let g = generating_function(x).unwrap();
            assert!((implicit_xi(g) - x).abs() < 1e-13, "{x}");
        }
        let g = generating_function(1e-6).unwrap();
        assert!((g / 1e-6 - 1.0).abs() < 1e-10);
        assert!(generating_function(0.5).is_none());
    }

    #[test]
    fn certificate_cases() {
        let c = certify(0.0, 4).unwrap();
        assert!(c.inside);
        assert_eq!(c.majorant_tail, Some(0.0));

        let c = certify(convergence_radius(), 4).unwrap();
        assert!(!c.inside);
        assert_eq!(c.majorant_tail, None);

        let t = recursion_table(3).unwrap();
        let c = certify(0.2, 3).unwrap();
        let r7 = to_f64(&t.r[3]);
        let partial = 0.2 + 0.5 * 0.2f64.powi(3) + 9.0 / 8.0 * 0.2f64.powi(5) + r7 * 0.2f64.powi(7);
        let expected = generating_function(0.2).unwrap() - partial;
        assert!((c.majorant_tail.unwrap() - expected).abs() < 1e-15);
        assert!(expected > 0.0);
    }

    #[test]
    fn partial_sums_are_monotone_and_bounded() {
        let t = recursion_table(10).unwrap();
        for &x in &[0.05, 0.2, 0.35] {
            let g = generating_function(x).unwrap();
            let mut prev = 0.0;
            for k in 0..=10 {
                let s = t.partial_sum(x, k);
                assert!(s >= prev && s <= g + 1e-14);
                prev = s;
            }
        }
    }

    #[test]
    fn csv_format() {
        let csv = recursion_table(2).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "k,R,value");
        assert!(lines[3].starts_with("2,9/8,1.125"));
    }
}
