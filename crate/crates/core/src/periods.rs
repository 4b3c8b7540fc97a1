//! Periods and fixed spaces of the linearized flow, resonance arithmetic,
//! and the quadratic forms restricted to a fixed space and its complement.

use crate::error::{Error, Result};
use crate::numerics::rational::{integer_relation_basis, rationalize, MAX_DENOMINATOR, RESIDUAL_TOL};
use crate::symbol::CriticalData;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Definiteness {
    PositiveDefinite,
    NegativeDefinite,
    Indefinite,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodRecord {
    pub t: f64,
    /// Indices of the blocks spanning the fixed space.
    pub blocks: Vec<usize>,
    /// Multiplier `m` with `|w_j|·T = 2πm` for each block in `blocks`.
    pub windings: Vec<i64>,
    /// Columns: orthonormal basis of the fixed space, ordered (x_F…, ξ_F…).
    pub f_basis: DMatrix<f64>,
    pub d_t: usize,
    pub is_total: bool,
    /// Gram matrix of the Hessian form on the fixed space: `Q_T(y) = yᵀ A y`.
    pub q_t: DMatrix<f64>,
    /// Gram matrix of `q_T` (twice the Hessian form) on the complement.
    pub q_comp: DMatrix<f64>,
    pub class: Definiteness,
    /// Signature (#positive − #negative) of `Q_T`.
    pub sign_qt: i32,
    /// Signature of `q_T`; 0 for an empty complement.
    pub sgn_qt: i32,
    /// `det q_T`; 1 for an empty complement.
    pub det_qt: f64,
    pub complement_empty: bool,
    /// Some eigenvalue of `Q_T` or `q_T` is below tolerance.
    pub degenerate: bool,
}

impl PeriodRecord {
    /// ±1 when `Q_T` is definite.
    pub fn definite_sign(&self) -> Option<i32> {
        match self.class {
            Definiteness::PositiveDefinite => Some(1),
            Definiteness::NegativeDefinite => Some(-1),
            Definiteness::Indefinite => None,
        }
    }

    /// Coordinates of `z` (full phase space) in the fixed-space basis.
    pub fn to_fixed(&self, z: &[f64]) -> Vec<f64> {
        (0..self.f_basis.ncols()).map(|c| (0..z.len()).map(|r| self.f_basis[(r, c)] * z[r]).sum()).collect()
    }

    /// Full phase-space vector for fixed-space coordinates `y`.
    pub fn from_fixed(&self, y: &[f64]) -> Vec<f64> {
        (0..self.f_basis.nrows()).map(|r| (0..y.len()).map(|c| self.f_basis[(r, c)] * y[c]).sum()).collect()
    }

    /// `Q_T(y)`.
    pub fn q_value(&self, y: &[f64]) -> f64 {
        let d = y.len();
        let mut s = 0.0;
        for i in 0..d {
            for j in 0..d {
                s += y[i] * self.q_t[(i, j)] * y[j];
            }
        }
        s
    }
}

/// Blocks of `cd` whose elliptic rotation closes up at time `t` (tolerance
/// test on `|w_j|t/2π`).
pub fn fixed_blocks(cd: &CriticalData, t: f64, tol: f64) -> Vec<(usize, i64)> {
    if t == 0.0 {
        return (0..cd.n()).filter(|&j| cd.elliptic(j)).map(|j| (j, 0)).collect();
    }
    (0..cd.n())
        .filter(|&j| cd.elliptic(j))
        .filter_map(|j| {
            let x = cd.w[j].abs() * t / (2.0 * PI);
            let m = x.round();
            ((x - m).abs() <= tol * x.abs().max(1.0) && m != 0.0).then_some((j, m as i64))
        })
        .collect()
}

/// All periods of the linearized flow in `(t_min, t_max]`, sorted. Block
/// membership uses exact rational arithmetic on frequency ratios.
pub fn find_periods(cd: &CriticalData, t_min: f64, t_max: f64, tol: f64) -> Result<Vec<PeriodRecord>> {
    if t_max <= t_min {
        return Err(Error::InvalidArgument("empty period window".into()));
    }
    let n = cd.n();
    let mut found: Vec<(f64, Vec<(usize, i64)>)> = Vec::new();
    for j in (0..n).filter(|&j| cd.elliptic(j)) {
        let wj = cd.w[j].abs();
        let lo = (t_min * wj / (2.0 * PI)).floor() as i64;
        let hi = (t_max * wj / (2.0 * PI)).ceil() as i64;
        for m in lo..=hi {
            let t = 2.0 * PI * m as f64 / wj;
            if m == 0 || t <= t_min || t > t_max * (1.0 + 1e-14) {
                continue;
            }
            if found.iter().any(|(s, _)| (s - t).abs() <= tol.max(1e-9) * t.abs()) {
                continue;
            }
            let mut members = Vec::new();
            for i in (0..n).filter(|&i| cd.elliptic(i)) {
                if let Some((p, q)) = rationalize(cd.w[i].abs() / wj, MAX_DENOMINATOR, RESIDUAL_TOL) {
                    if (m * p) % q == 0 {
                        members.push((i, m * p / q));
                    }
                }
            }
            found.push((t, members));
        }
    }
    found.sort_by(|a, b| a.0.total_cmp(&b.0));
    found.into_iter().map(|(t, members)| build_record(cd, t, &members, tol)).collect()
}

/// Complete period record for a given `T` (fixed blocks by tolerance).
pub fn restrict_forms(cd: &CriticalData, t: f64, tol: f64) -> Result<PeriodRecord> {
    let members = fixed_blocks(cd, t, tol.max(1e-9));
    if members.is_empty() || t == 0.0 {
        return Err(Error::InvalidArgument(format!("T = {t} is not a nonzero period of the linearized flow")));
    }
    build_record(cd, t, &members, tol)
}

fn signature(m: &DMatrix<f64>, tol: f64) -> (i32, i32, f64, bool) {
    if m.nrows() == 0 {
        return (0, 0, 1.0, false);
    }
    let e = SymmetricEigen::new(m.clone()).eigenvalues;
    let pos = e.iter().filter(|v| **v > 0.0).count() as i32;
    let neg = e.iter().filter(|v| **v < 0.0).count() as i32;
    let det = e.iter().product();
    let degenerate = e.iter().any(|v| v.abs() < tol);
    (pos, neg, det, degenerate)
}

fn build_record(cd: &CriticalData, t: f64, members: &[(usize, i64)], tol: f64) -> Result<PeriodRecord> {
    let n = cd.n();
    let blocks: Vec<usize> = members.iter().map(|m| m.0).collect();
    let windings: Vec<i64> = members.iter().map(|m| m.1).collect();
    let rest: Vec<usize> = (0..n).filter(|j| !blocks.contains(j)).collect();
    let d = blocks.len();
    let coords = |bl: &[usize]| -> Vec<usize> { bl.iter().copied().chain(bl.iter().map(|j| n + j)).collect() };
    let fc = coords(&blocks);
    let cc = coords(&rest);
    let mut basis = DMatrix::zeros(2 * n, 2 * d);
    for (c, &r) in fc.iter().enumerate() {
        basis[(r, c)] = 1.0;
    }
    let h = cd.normal_form_hessian();
    let q_t = DMatrix::from_fn(2 * d, 2 * d, |i, j| 0.5 * h[(fc[i], fc[j])]);
    let q_comp = DMatrix::from_fn(cc.len(), cc.len(), |i, j| h[(cc[i], cc[j])]);
    let (pq, nq, _, dq) = signature(&q_t, tol);
    let (pc, nc, detc, dc) = signature(&q_comp, tol);
    let class = if nq == 0 {
        Definiteness::PositiveDefinite
    } else if pq == 0 {
        Definiteness::NegativeDefinite
    } else {
        Definiteness::Indefinite
    };
    Ok(PeriodRecord {
        t,
        blocks,
        windings,
        f_basis: basis,
        d_t: d,
        is_total: d == n,
        q_t,
        q_comp,
        class,
        sign_qt: pq - nq,
        sgn_qt: pc - nc,
        det_qt: detc,
        complement_empty: cc.is_empty(),
        degenerate: dq || dc,
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ResonanceSet {
    pub order: usize,
    /// Integer vectors `k ∈ ℤ^{2n}` with `⟨k, (w, w)⟩ = 0` and `Σ|k_i| = order`.
    pub vectors: Vec<Vec<i64>>,
    /// Relations were checked in integer arithmetic.
    pub exact: bool,
}

fn enumerate_l1(dim: usize, l: usize, visit: &mut dyn FnMut(&[i64])) {
    fn rec(dim: usize, left: usize, cur: &mut Vec<i64>, visit: &mut dyn FnMut(&[i64])) {
        if cur.len() == dim - 1 {
            let l = left as i64;
            cur.push(l);
            visit(cur);
            cur.pop();
            if l != 0 {
                cur.push(-l);
                visit(cur);
                cur.pop();
            }
            return;
        }
        for a in 0..=left {
            let a = a as i64;
            cur.push(a);
            rec(dim, left - a as usize, cur, visit);
            cur.pop();
            if a != 0 {
                cur.push(-a);
                rec(dim, left - a as usize, cur, visit);
                cur.pop();
            }
        }
    }
    if dim == 0 {
        return;
    }
    rec(dim, l, &mut Vec::with_capacity(dim), visit);
}

/// Frequencies as exact integers when they are commensurate.
fn integer_frequencies(w: &[f64]) -> Option<Vec<i64>> {
    integer_relation_basis(w)
}

/// All order-`l` resonances of the doubled frequency vector `(w, w)`.
pub fn resonance_module(w: &[f64], l: usize) -> Result<ResonanceSet> {
    if l > 6 {
        return Err(Error::InvalidArgument(format!("resonance order {l} above enumeration bound 6")));
    }
    let ww: Vec<f64> = w.iter().chain(w.iter()).copied().collect();
    let ints = integer_frequencies(w).map(|v| v.iter().chain(v.iter()).copied().collect::<Vec<i64>>());
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let mut vectors = Vec::new();
    enumerate_l1(ww.len(), l, &mut |k| {
        let zero = match &ints {
            Some(iv) => k.iter().zip(iv).map(|(a, b)| a * b).sum::<i64>() == 0,
            None => k.iter().zip(&ww).map(|(a, b)| *a as f64 * b).sum::<f64>().abs() <= 1e-9 * scale * l as f64,
        };
        if zero {
            vectors.push(k.to_vec());
        }
    });
    Ok(ResonanceSet { order: l, vectors, exact: ints.is_some() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PseudoResonance {
    pub order: usize,
    pub found: bool,
    /// `l` picks `(index, sign)` whose signed frequencies sum to zero.
    pub witness: Option<Vec<(usize, i8)>>,
}

/// Whether some `l` frequencies (repetition allowed) with signs sum to zero.
///
/// A choice of picks reduces to net integer counts `c_j`; it exists iff some
/// `c ≠ 0` or `c = 0` has `Σ c_j w_j = 0`, `Σ|c_j| ≤ l` and `Σ|c_j| ≡ l (mod 2)`,
/// the surplus being cancelling pairs `w_i − w_i`.
pub fn pseudo_resonant(w: &[f64], l: usize) -> Result<PseudoResonance> {
    if l > 8 {
        return Err(Error::InvalidArgument(format!("pseudo-resonance order {l} above bound 8")));
    }
    if l == 0 || w.is_empty() {
        return Ok(PseudoResonance { order: l, found: l == 0, witness: (l == 0).then(Vec::new) });
    }
    let ints = integer_frequencies(w);
    let scale = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let n = w.len();
    let mut best: Option<Vec<i64>> = None;
    for total in (0..=l).filter(|t| (l - t) % 2 == 0) {
        enumerate_l1(n, total, &mut |c| {
            if best.is_some() {
                return;
            }
            let zero = match &ints {
                Some(iv) => c.iter().zip(iv).map(|(a, b)| a * b).sum::<i64>() == 0,
                None => c.iter().zip(w).map(|(a, b)| *a as f64 * b).sum::<f64>().abs() <= 1e-9 * scale * l as f64,
            };
            if zero {
                best = Some(c.to_vec());
            }
        });
        if best.is_some() {
            break;
        }
    }
    let witness = best.map(|c| {
        let mut picks = Vec::with_capacity(l);
        for (j, &cj) in c.iter().enumerate() {
            for _ in 0..cj.unsigned_abs() {
                picks.push((j, if cj > 0 { 1 } else { -1 }));
            }
        }
        while picks.len() < l {
            picks.push((0, 1));
            picks.push((0, -1));
        }
        picks
    });
    Ok(PseudoResonance { order: l, found: witness.is_some(), witness })
}
