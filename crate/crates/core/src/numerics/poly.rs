//! Sparse multivariate polynomials with real coefficients.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

pub type Exponents = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "PolyRepr", from = "PolyRepr")]
pub struct Poly {
    nvars: usize,
    terms: BTreeMap<Exponents, f64>,
}

/// Serialized form: a term list, since JSON map keys must be strings.
#[derive(Clone, Serialize, Deserialize)]
struct PolyRepr {
    nvars: usize,
    terms: Vec<(Exponents, f64)>,
}

impl From<Poly> for PolyRepr {
    fn from(p: Poly) -> Self {
        PolyRepr { nvars: p.nvars, terms: p.terms.into_iter().collect() }
    }
}

impl From<PolyRepr> for Poly {
    fn from(r: PolyRepr) -> Self {
        let mut p = Poly::zero(r.nvars);
        for (e, c) in r.terms {
            p.add_term(e, c);
        }
        p
    }
}

impl Poly {
    pub fn zero(nvars: usize) -> Self {
        Poly { nvars, terms: BTreeMap::new() }
    }

    pub fn constant(nvars: usize, c: f64) -> Self {
        let mut p = Poly::zero(nvars);
        p.add_term(vec![0; nvars], c);
        p
    }

    pub fn var(nvars: usize, i: usize) -> Self {
        let mut e = vec![0; nvars];
        e[i] = 1;
        let mut p = Poly::zero(nvars);
        p.add_term(e, 1.0);
        p
    }

    pub fn monomial(exps: Exponents, c: f64) -> Self {
        let mut p = Poly::zero(exps.len());
        p.add_term(exps, c);
        p
    }

    /// Linear form `Σ a_i z_i`.
    pub fn linear(a: &[f64]) -> Self {
        let n = a.len();
        let mut p = Poly::zero(n);
        for (i, &c) in a.iter().enumerate() {
            let mut e = vec![0; n];
            e[i] = 1;
            p.add_term(e, c);
        }
        p
    }

    /// Quadratic form `zᵀ A z` from a row-major square matrix.
    pub fn quadratic(n: usize, a: &[f64]) -> Self {
        let mut p = Poly::zero(n);
        for i in 0..n {
            for j in 0..n {
                let mut e = vec![0; n];
                e[i] += 1;
                e[j] += 1;
                p.add_term(e, a[i * n + j]);
            }
        }
        p
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Exponents, &f64)> {
        self.terms.iter()
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn coeff(&self, e: &[u32]) -> f64 {
        self.terms.get(e).copied().unwrap_or(0.0)
    }

    pub fn add_term(&mut self, e: Exponents, c: f64) {
        assert_eq!(e.len(), self.nvars, "exponent length");
        if c == 0.0 {
            return;
        }
        use std::collections::btree_map::Entry;
        match self.terms.entry(e) {
            Entry::Vacant(v) => {
                v.insert(c);
            }
            Entry::Occupied(mut o) => {
                *o.get_mut() += c;
                if *o.get() == 0.0 {
                    o.remove();
                }
            }
        }
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).max()
    }

    pub fn min_degree(&self) -> Option<u32> {
        self.terms.keys().map(|e| e.iter().sum()).min()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.values().fold(0.0, |m, c| m.max(c.abs()))
    }

    pub fn homogeneous_part(&self, j: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() == j)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    pub fn truncate(&self, maxdeg: u32) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self
                .terms
                .iter()
                .filter(|(e, _)| e.iter().sum::<u32>() <= maxdeg)
                .map(|(e, c)| (e.clone(), *c))
                .collect(),
        }
    }

    /// Drop coefficients with magnitude at most `tol`.
    pub fn prune(&self, tol: f64) -> Poly {
        Poly {
            nvars: self.nvars,
            terms: self.terms.iter().filter(|(_, c)| c.abs() > tol).map(|(e, c)| (e.clone(), *c)).collect(),
        }
    }

    pub fn scale(&self, s: f64) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            p.add_term(e.clone(), c * s);
        }
        p
    }

    pub fn add(&self, o: &Poly) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut p = self.clone();
        for (e, c) in &o.terms {
            p.add_term(e.clone(), *c);
        }
        p
    }

    pub fn sub(&self, o: &Poly) -> Poly {
        self.add(&o.scale(-1.0))
    }

    pub fn mul(&self, o: &Poly) -> Poly {
        self.mul_trunc(o, u32::MAX)
    }

    /// Product keeping only terms of total degree ≤ `maxdeg`.
    pub fn mul_trunc(&self, o: &Poly, maxdeg: u32) -> Poly {
        assert_eq!(self.nvars, o.nvars);
        let mut acc: BTreeMap<Exponents, f64> = BTreeMap::new();
        for (ea, ca) in &self.terms {
            let da: u32 = ea.iter().sum();
            for (eb, cb) in &o.terms {
                let db: u32 = eb.iter().sum();
                if da.saturating_add(db) > maxdeg {
                    continue;
                }
                let e: Exponents = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                *acc.entry(e).or_insert(0.0) += ca * cb;
            }
        }
        acc.retain(|_, v| *v != 0.0);
        Poly { nvars: self.nvars, terms: acc }
    }

    pub fn eval(&self, z: &[f64]) -> f64 {
        assert_eq!(z.len(), self.nvars, "point dimension");
        let mut s = 0.0;
        for (e, c) in &self.terms {
            let mut m = *c;
            for (zi, &k) in z.iter().zip(e) {
                if k > 0 {
                    m *= zi.powi(k as i32);
                }
            }
            s += m;
        }
        s
    }

    pub fn partial(&self, i: usize) -> Poly {
        let mut p = Poly::zero(self.nvars);
        for (e, c) in &self.terms {
            if e[i] > 0 {
                let mut f = e.clone();
                f[i] -= 1;
                p.add_term(f, c * e[i] as f64);
            }
        }
        p
    }

    /// Substitute `subs[i]` for variable `i`. All substitutes share one
    /// variable count, which becomes the result's. Terms above `maxdeg` in
    /// the new variables are discarded.
    pub fn compose(&self, subs: &[Poly], maxdeg: u32) -> Poly {
        assert_eq!(subs.len(), self.nvars, "substitution count");
        let m = subs.first().map(|s| s.nvars).unwrap_or(0);
        let maxexp: Vec<u32> =
            (0..self.nvars).map(|i| self.terms.keys().map(|e| e[i]).max().unwrap_or(0)).collect();
        let powers: Vec<Vec<Poly>> = subs
            .iter()
            .zip(&maxexp)
            .map(|(s, &k)| {
                let mut v = vec![Poly::constant(m, 1.0)];
                for j in 1..=k as usize {
                    let next = v[j - 1].mul_trunc(s, maxdeg);
                    v.push(next);
                }
                v
            })
            .collect();
        let mut out = Poly::zero(m);
        for (e, c) in &self.terms {
            let mut t = Poly::constant(m, *c);
            for (i, &k) in e.iter().enumerate() {
                if k > 0 {
                    t = t.mul_trunc(&powers[i][k as usize], maxdeg);
                }
            }
            out = out.add(&t);
        }
        out
    }

    /// Linear change of variables `z = L y`, with `L` row-major `nvars × m`.
    pub fn linear_substitute(&self, l: &[f64], m: usize) -> Poly {
        assert_eq!(l.len(), self.nvars * m);
        let subs: Vec<Poly> = (0..self.nvars).map(|i| Poly::linear(&l[i * m..(i + 1) * m])).collect();
        self.compose(&subs, u32::MAX)
    }

    /// `y ↦ p(z0 + y)`.
    pub fn shift(&self, z0: &[f64]) -> Poly {
        let subs: Vec<Poly> =
            (0..self.nvars).map(|i| Poly::var(self.nvars, i).add(&Poly::constant(self.nvars, z0[i]))).collect();
        self.compose(&subs, u32::MAX)
    }

    /// Largest coefficient difference, over the union of supports.
    pub fn max_coeff_diff(&self, o: &Poly) -> f64 {
        self.sub(o).max_abs_coeff()
    }
}

/// All exponent vectors in `n` variables with total degree exactly `k`,
/// in lexicographic order.
pub fn multi_indices(n: usize, k: u32) -> Vec<Exponents> {
    fn rec(n: usize, k: u32, prefix: &mut Exponents, out: &mut Vec<Exponents>) {
        if prefix.len() == n - 1 {
            prefix.push(k);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for j in (0..=k).rev() {
            prefix.push(j);
            rec(n, k - j, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    rec(n, k, &mut Vec::new(), &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn multiply_and_evaluate() {
        let x = Poly::var(2, 0);
        let y = Poly::var(2, 1);
        let p = x.add(&y).mul(&x.sub(&y));
        assert_relative_eq!(p.eval(&[3.0, 2.0]), 5.0);
        assert_eq!(p.len(), 2);
    }

    #[test]
    fn compose_truncates() {
        let x = Poly::var(1, 0);
        let p = x.mul(&x).mul(&x);
        let s = x.add(&Poly::constant(1, 1.0));
        let q = p.compose(&[s], 2);
        assert_relative_eq!(q.coeff(&[0]), 1.0);
        assert_relative_eq!(q.coeff(&[1]), 3.0);
        assert_relative_eq!(q.coeff(&[2]), 3.0);
        assert_eq!(q.coeff(&[3]), 0.0);
    }

    #[test]
    fn shift_is_translation() {
        let p = Poly::monomial(vec![2, 1], 1.5);
        let q = p.shift(&[1.0, -2.0]);
        let y = [0.3, 0.4];
        assert_relative_eq!(q.eval(&y), p.eval(&[1.3, -1.6]), epsilon = 1e-14);
    }

    #[test]
    fn multi_index_count() {
        assert_eq!(multi_indices(4, 3).len(), 20);
        assert_eq!(multi_indices(4, 4).len(), 35);
        assert!(multi_indices(3, 2).iter().all(|e| e.iter().sum::<u32>() == 2));
    }
}
