//! Order-by-order sources of the series hierarchy.
//!
//! Two equivalent forms are provided: the square-root form `V^(2k+1)`,
//! a polynomial in the lower terms weighted by Maclaurin coefficients, and
//! the cubic form, a triple sum of convective products whose curl inverse
//! gives the next term directly.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::coefficients::maclaurin_f64;
use crate::error::{Error, Result};
use crate::grid::{convective, jacobian, same_grid, GeometrySign, ScalarField, VectorField};

/// All `2j`-tuples of non-negative integers with sum `s`, in lexicographic
/// order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiIndexSet {
    j: usize,
    s: usize,
    tuples: Vec<Vec<usize>>,
}

impl MultiIndexSet {
    pub fn j(&self) -> usize {
        self.j
    }

    pub fn sum(&self) -> usize {
        self.s
    }

    pub fn tuples(&self) -> &[Vec<usize>] {
        &self.tuples
    }

    pub fn len(&self) -> usize {
        self.tuples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tuples.is_empty()
    }
}

pub fn multi_indices(j: usize, s: usize) -> Arc<MultiIndexSet> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<MultiIndexSet>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(set) = cache.lock().expect("index cache poisoned").get(&(j, s)) {
        return set.clone();
    }
    let mut tuples = Vec::new();
    if j > 0 {
        let mut cur = vec![0; 2 * j];
        compositions(&mut cur, 0, s, &mut tuples);
    }
    let set = Arc::new(MultiIndexSet { j, s, tuples });
    cache.lock().expect("index cache poisoned").insert((j, s), set.clone());
    set
}

fn compositions(cur: &mut Vec<usize>, pos: usize, left: usize, out: &mut Vec<Vec<usize>>) {
    if pos + 1 == cur.len() {
        cur[pos] = left;
        out.push(cur.clone());
        return;
    }
    for v in 0..=left {
        cur[pos] = v;
        compositions(cur, pos + 1, left - v, out);
    }
}

/// Hierarchy terms `v^(2k+1)`, entry `k` holding order `2k+1`.
#[derive(Clone, Debug)]
pub struct TermStack {
    sign: GeometrySign,
    terms: Vec<VectorField>,
}

impl TermStack {
    pub fn new(sign: GeometrySign, first: VectorField) -> Self {
        TermStack { sign, terms: vec![first] }
    }

    pub fn sign(&self) -> GeometrySign {
        self.sign
    }

    pub fn push(&mut self, term: VectorField) -> Result<()> {
        same_grid(self.terms[0].spec(), term.spec())?;
        self.terms.push(term);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn get(&self, k: usize) -> Result<&VectorField> {
        self.terms.get(k).ok_or(Error::MissingTerm(k))
    }

    pub fn terms(&self) -> &[VectorField] {
        &self.terms
    }

    pub fn into_terms(self) -> Vec<VectorField> {
        self.terms
    }

    fn require(&self, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::MissingTerm(0));
        }
        if self.terms.len() < k {
            return Err(Error::MissingTerm(self.terms.len()));
        }
        Ok(())
    }
}

/// Square-root form source
/// `V^(2k+1) = -Σ_h v^(2(k-h)+1) Σ_j M_j Σ_{|ℓ|_{2j}=h-j} Π_i v^(2ℓ_{2i-1}+1)·v^(2ℓ_{2i}+1)`.
#[allow(non_snake_case)]
pub fn build_V(k: usize, stack: &TermStack) -> Result<VectorField> {
    stack.require(k)?;
    let spec = *stack.terms[0].spec();
    let n = spec.len();

    // dots[a][b] = v^(2a+1)·v^(2b+1) for a <= b < k
    let mut dots: Vec<Vec<Option<ScalarField>>> = vec![vec![None; k]; k];
    for a in 0..k {
        for b in a..k {
            dots[a][b] = Some(stack.terms[a].dot(&stack.terms[b])?);
        }
    }
    let dot = |a: usize, b: usize| -> &[f64] {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        dots[a][b].as_ref().expect("dot product precomputed").values()
    };

    let mut out = VectorField::zeros(spec);
    let mut weight = vec![0.0; n];
    let mut prod = vec![0.0; n];
    for h in 1..=k {
        weight.iter_mut().for_each(|w| *w = 0.0);
        for j in 1..=h {
            let mj = maclaurin_f64(j, stack.sign);
            for tuple in multi_indices(j, h - j).tuples() {
                prod.copy_from_slice(dot(tuple[0], tuple[1]));
                for pair in tuple[2..].chunks_exact(2) {
                    for (p, d) in prod.iter_mut().zip(dot(pair[0], pair[1])) {
                        *p *= d;
                    }
                }
                for (w, p) in weight.iter_mut().zip(&prod) {
                    *w += mj * p;
                }
            }
        }
        let base = ScalarField::from_raw(spec, weight.clone());
        out.add_scaled(-1.0, &stack.terms[k - h].times(&base)?)?;
    }
    Ok(out)
}

/// Cubic form source `± Σ_{a+b+c=k-1} v^(2a+1) × (v^(2b+1)·∇) v^(2c+1)`.
pub fn build_cubic_rhs(k: usize, stack: &TermStack) -> Result<VectorField> {
    stack.require(k)?;
    let spec = *stack.terms[0].spec();

    // conv[m] = Σ_{b+c=m} (v^(2b+1)·∇) v^(2c+1)
    let mut conv: Vec<VectorField> = (0..k).map(|_| VectorField::zeros(spec)).collect();
    for c in 0..k {
        let jac = jacobian(&stack.terms[c]);
        for b in 0..(k - c) {
            conv[b + c].add_scaled(1.0, &convective(&stack.terms[b], &jac)?)?;
        }
    }
    let mut out = VectorField::zeros(spec);
    for a in 0..k {
        out.add_scaled(stack.sign.pm(), &stack.terms[a].cross(&conv[k - 1 - a])?)?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{curl, divergence, sample_vector, GridSpec};

    fn binomial(n: usize, k: usize) -> usize {
        (0..k).fold(1, |acc, i| acc * (n - i) / (i + 1))
    }

    #[test]
    fn small_index_sets() {
        assert_eq!(multi_indices(1, 0).tuples(), &[vec![0, 0]]);
        assert_eq!(multi_indices(1, 1).tuples(), &[vec![0, 1], vec![1, 0]]);
        assert_eq!(multi_indices(2, 1).len(), binomial(4, 3));
    }

    #[test]
    fn index_sets_are_sorted_and_counted() {
        for j in 1..4 {
            for s in 0..6 {
                let set = multi_indices(j, s);
                assert_eq!(set.len(), binomial(s + 2 * j - 1, 2 * j - 1));
                assert!(set.tuples().windows(2).all(|w| w[0] < w[1]));
                assert!(set.tuples().iter().all(|t| t.len() == 2 * j && t.iter().sum::<usize>() == s));
            }
        }
    }

    fn spec() -> GridSpec {
        GridSpec::new(4.0, 16, 2).unwrap()
    }

    fn field(a: f64, shift: f64) -> VectorField {
        sample_vector(
            |x| {
                let b = (-((x[0] - shift).powi(2) + x[1] * x[1] + 1.5 * x[2] * x[2]) / 2.0).exp();
                [a * b, a * x[0] * b, a * (x[1] + 0.5) * b]
            },
            spec(),
        )
        .unwrap()
    }

    #[test]
    fn third_order_source() {
        let v1 = field(0.7, 0.2);
        for sign in [GeometrySign::Euclidean, GeometrySign::Minkowskian] {
            let stack = TermStack::new(sign, v1.clone());
            let v3 = build_V(1, &stack).unwrap();
            let expected = v1.times(&v1.dot(&v1).unwrap()).unwrap().scaled(-0.5 * sign.pm());
            assert!(v3.sup_distance(&expected).unwrap() < 1e-15);
        }
    }

    #[test]
    fn zero_stack_gives_zero_sources() {
        let mut stack = TermStack::new(GeometrySign::Euclidean, VectorField::zeros(spec()));
        for k in 1..4 {
            assert_eq!(build_V(k, &stack).unwrap().sup(), 0.0);
            assert_eq!(build_cubic_rhs(k, &stack).unwrap().sup(), 0.0);
            stack.push(VectorField::zeros(spec())).unwrap();
        }
    }

    #[test]
    fn missing_terms_are_reported() {
        let stack = TermStack::new(GeometrySign::Euclidean, field(1.0, 0.0));
        assert!(matches!(build_V(2, &stack), Err(Error::MissingTerm(1))));
        assert!(matches!(build_cubic_rhs(0, &stack), Err(Error::MissingTerm(0))));
    }

    #[test]
    fn sign_parity_at_third_order() {
        let v1 = field(0.9, -0.3);
        let e = build_V(1, &TermStack::new(GeometrySign::Euclidean, v1.clone())).unwrap();
        let m = build_V(1, &TermStack::new(GeometrySign::Minkowskian, v1)).unwrap();
        assert_eq!(e, m.scaled(-1.0));
    }

    #[test]
    fn cubic_first_order_is_curl_of_cubic_term() {
        // v×(v·∇)v = -∇×(½|v|²v) for curl-free v
        let s = GridSpec::new(4.0, 32, 2).unwrap();
        let phi = |x: [f64; 3]| (-((x[0] - 0.3).powi(2) + x[1] * x[1] + 2.0 * x[2] * x[2]) / 4.0).exp();
        let v = sample_vector(
            |x| {
                let p = phi(x);
                [-2.0 * (x[0] - 0.3) / 4.0 * p, -2.0 * x[1] / 4.0 * p, -4.0 * x[2] / 4.0 * p]
            },
            s,
        )
        .unwrap();
        let stack = TermStack::new(GeometrySign::Euclidean, v.clone());
        let rhs = build_cubic_rhs(1, &stack).unwrap();
        let cubic = v.times(&v.dot(&v).unwrap()).unwrap().scaled(0.5);
        let c = curl(&cubic).scaled(-1.0);
        let rel = rhs.sup_distance(&c).unwrap() / c.sup();
        assert!(rel < 1e-6, "{rel}");
    }

    #[test]
    fn parallel_fields_have_no_cubic_source() {
        let w = |x: [f64; 3]| (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / 3.0).exp();
        let a = sample_vector(|x| [w(x), 0.0, 0.0], spec()).unwrap();
        let mut stack = TermStack::new(GeometrySign::Minkowskian, a.clone());
        stack.push(a.scaled(0.3)).unwrap();
        let rhs = build_cubic_rhs(2, &stack).unwrap();
        assert!(rhs.sup() < 1e-15);
    }

    #[test]
    fn cubic_source_is_divergence_free_for_gradient_first_term() {
        let f = crate::grid::sample_scalar(
            |x| (-((x[0] - 0.2).powi(2) + 1.3 * x[1] * x[1] + x[2] * x[2]) / 1.7).exp(),
            GridSpec::new(4.0, 32, 2).unwrap(),
        )
        .unwrap();
        let stack = TermStack::new(GeometrySign::Euclidean, crate::grid::gradient(&f));
        let rhs = build_cubic_rhs(1, &stack).unwrap();
        let d = divergence(&rhs).sup();
        assert!(d <= 1e-8 * rhs.sup(), "{d}");
    }
}
