//! Blow-up charts that bring the model phase
//! `Ψ(t,r,θ) = t r²(Q(θ) + r^{k−2}h₁) + r^k(R(θ) + rR̃)` to one of three
//! monomial normal forms near a point `θ₀` of the unit sphere.
//!
//! Sphere points are parameterized by `θ(φ) = (θ₀ + Eφ)/|θ₀ + Eφ|` with `E`
//! an orthonormal basis of `θ₀^⊥`, so chart coordinates are `(t, r, φ)`.

use crate::error::{Error, Result};
use crate::numerics::{dot, norm};
use crate::rk_cone::HomogForm;
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// `h₁(t, r, θ)`.
pub type Perturbation = Arc<dyn Fn(f64, f64, &[f64]) -> f64 + Send + Sync>;
/// `R̃(r, θ)`.
pub type Remainder = Arc<dyn Fn(f64, &[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
pub struct ModelPhase {
    pub d_t: usize,
    pub k: usize,
    /// Gram matrix of `Q` on ℝ^{2d_T}.
    pub q: DMatrix<f64>,
    pub r: HomogForm,
    pub h1: Option<Perturbation>,
    pub r_tilde: Option<Remainder>,
}

impl std::fmt::Debug for ModelPhase {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelPhase")
            .field("d_t", &self.d_t)
            .field("k", &self.k)
            .field("q", &self.q)
            .field("r", &self.r)
            .field("h1", &self.h1.is_some())
            .field("r_tilde", &self.r_tilde.is_some())
            .finish()
    }
}

impl ModelPhase {
    pub fn new(q: DMatrix<f64>, r: HomogForm) -> Result<Self> {
        let m = q.nrows();
        if q.ncols() != m || m % 2 != 0 {
            return Err(Error::InvalidArgument("Q must be square of even size".into()));
        }
        if r.dim != m {
            return Err(Error::DimensionMismatch { expected: m, got: r.dim });
        }
        if q.clone().determinant().abs() < 1e-14 * q.amax().powi(m as i32) {
            return Err(Error::Degenerate(0.0));
        }
        Ok(ModelPhase { d_t: m / 2, k: r.degree, q, r, h1: None, r_tilde: None })
    }

    pub fn with_perturbations(mut self, h1: Option<Perturbation>, r_tilde: Option<Remainder>) -> Self {
        self.h1 = h1;
        self.r_tilde = r_tilde;
        self
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    pub fn q_value(&self, th: &[f64]) -> f64 {
        let v = DVector::from_column_slice(th);
        (v.transpose() * &self.q * &v)[(0, 0)]
    }

    pub fn q_grad(&self, th: &[f64]) -> Vec<f64> {
        (&self.q * DVector::from_column_slice(th) * 2.0).as_slice().to_vec()
    }

    fn h1(&self, t: f64, r: f64, th: &[f64]) -> f64 {
        self.h1.as_ref().map(|h| h(t, r, th)).unwrap_or(0.0)
    }

    fn r_tilde(&self, r: f64, th: &[f64]) -> f64 {
        self.r_tilde.as_ref().map(|h| h(r, th)).unwrap_or(0.0)
    }

    /// `Q + r^{k−2}h₁`
    fn q_pert(&self, t: f64, r: f64, th: &[f64]) -> f64 {
        self.q_value(th) + r.powi(self.k as i32 - 2) * self.h1(t, r, th)
    }

    /// `R + rR̃`
    fn r_pert(&self, r: f64, th: &[f64]) -> f64 {
        self.r.eval(th) + r * self.r_tilde(r, th)
    }

    pub fn psi(&self, t: f64, r: f64, th: &[f64]) -> f64 {
        t * r * r * self.q_pert(t, r, th) + r.powi(self.k as i32) * self.r_pert(r, th)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChartKind {
    /// `Q(θ₀) ≠ 0`; normal form `χ₀χ₁²`.
    First,
    /// `Q(θ₀) = 0`, `R(θ₀) ≠ 0`; normal form `χ₀χ₁²χ₂ ± χ₁^k`.
    Second,
    /// `Q(θ₀) = R(θ₀) = 0`, independent gradients; normal form `χ₀χ₁²χ₂ + χ₁^kχ₃`.
    Third,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartRecord {
    pub kind: ChartKind,
    pub theta0: Vec<f64>,
    /// Columns: orthonormal basis of `θ₀^⊥`, adapted to the kind.
    pub frame: DMatrix<f64>,
    /// `sign R(θ₀)` for the second kind, else +1.
    pub sign: i32,
    /// Analytic Jacobian determinant of `(t, r, φ) ↦ χ` at `(0, 0, 0)`.
    pub jacobian: f64,
}

/// Tolerance for the vanishing conditions at the base point.
pub const BASE_TOL: f64 = 1e-10;

fn tangential(th: &[f64], g: &[f64]) -> Vec<f64> {
    let s = dot(th, g);
    g.iter().zip(th).map(|(a, b)| a - s * b).collect()
}

/// Orthonormal basis of `θ₀^⊥` whose leading columns span `lead` (Gram–Schmidt).
fn adapted_frame(th: &[f64], lead: &[Vec<f64>]) -> Result<DMatrix<f64>> {
    let m = th.len();
    let mut basis: Vec<Vec<f64>> = vec![th.to_vec()];
    let mut cols = Vec::new();
    let cand = lead.iter().cloned().chain((0..m).map(|i| {
        let mut e = vec![0.0; m];
        e[i] = 1.0;
        e
    }));
    for (idx, mut v) in cand.enumerate() {
        for b in &basis {
            let s = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= s * y);
        }
        let nv = norm(&v);
        if nv < 1e-8 {
            if idx < lead.len() {
                return Err(Error::ChartPrecondition("gradients are not independent at θ₀".into()));
            }
            continue;
        }
        v.iter_mut().for_each(|x| *x /= nv);
        basis.push(v.clone());
        cols.push(v);
        if cols.len() == m - 1 {
            break;
        }
    }
    Ok(DMatrix::from_fn(m, m - 1, |r, c| cols[c][r]))
}

impl ChartRecord {
    pub fn theta(&self, phi: &[f64]) -> Vec<f64> {
        let v = DVector::from_column_slice(&self.theta0) + &self.frame * DVector::from_column_slice(phi);
        let n = v.norm();
        (v / n).as_slice().to_vec()
    }

    /// Chart coordinates `χ(t, r, φ)`, of length `1 + dim`.
    pub fn chi(&self, model: &ModelPhase, t: f64, r: f64, phi: &[f64]) -> Vec<f64> {
        let th = self.theta(phi);
        let k = model.k as i32;
        match self.kind {
            ChartKind::First => {
                let c0 = t * model.q_value(&th) + r.powi(k - 2) * (t * model.h1(t, r, &th) + model.r_pert(r, &th));
                let mut out = vec![c0, r];
                out.extend_from_slice(phi);
                out
            }
            ChartKind::Second => {
                let rho = model.r_pert(r, &th).abs();
                let kf = model.k as f64;
                let mut out = vec![t * rho.powf(-2.0 / kf), r * rho.powf(1.0 / kf), model.q_pert(t, r, &th)];
                out.extend_from_slice(&phi[1..]);
                out
            }
            ChartKind::Third => {
                let mut out = vec![t, r, model.q_pert(t, r, &th), model.r_pert(r, &th)];
                out.extend_from_slice(&phi[2..]);
                out
            }
        }
    }

    /// The kind's monomial normal form evaluated at `χ`.
    pub fn normal_form(&self, k: usize, chi: &[f64]) -> f64 {
        let k = k as i32;
        match self.kind {
            ChartKind::First => chi[0] * chi[1] * chi[1],
            ChartKind::Second => chi[0] * chi[1] * chi[1] * chi[2] + self.sign as f64 * chi[1].powi(k),
            ChartKind::Third => chi[0] * chi[1] * chi[1] * chi[2] + chi[1].powi(k) * chi[3],
        }
    }

    /// Central-difference Jacobian of `χ` in `(t, r, φ)`.
    pub fn numeric_jacobian(&self, model: &ModelPhase, t: f64, r: f64, phi: &[f64], step: f64) -> DMatrix<f64> {
        let dim = 1 + model.dim();
        let mut jac = DMatrix::zeros(dim, dim);
        let base: Vec<f64> = [t, r].iter().copied().chain(phi.iter().copied()).collect();
        for j in 0..dim {
            let mut up = base.clone();
            let mut dn = base.clone();
            up[j] += step;
            dn[j] -= step;
            let cu = self.chi(model, up[0], up[1], &up[2..]);
            let cd = self.chi(model, dn[0], dn[1], &dn[2..]);
            for i in 0..dim {
                jac[(i, j)] = (cu[i] - cd[i]) / (2.0 * step);
            }
        }
        jac
    }
}

pub fn build_chart(model: &ModelPhase, theta0: &[f64], kind: ChartKind) -> Result<ChartRecord> {
    let m = model.dim();
    if theta0.len() != m {
        return Err(Error::DimensionMismatch { expected: m, got: theta0.len() });
    }
    let nt = norm(theta0);
    if (nt - 1.0).abs() > 1e-12 {
        return Err(Error::ChartPrecondition(format!("θ₀ not on the unit sphere (|θ₀| = {nt})")));
    }
    let th = theta0.to_vec();
    let q0 = model.q_value(&th);
    let r0 = model.r.eval(&th);
    let gq = tangential(&th, &model.q_grad(&th));
    let gr = tangential(&th, &model.r.gradient(&th));
    let qs = model.q.amax();
    let rs = model.r.max_abs_coeff().max(f64::MIN_POSITIVE);
    let kf = model.k as f64;
    match kind {
        ChartKind::First => {
            if q0.abs() <= BASE_TOL * qs {
                return Err(Error::ChartPrecondition("Q(θ₀) = 0".into()));
            }
            Ok(ChartRecord { kind, theta0: th.clone(), frame: adapted_frame(&th, &[])?, sign: 1, jacobian: q0.abs() })
        }
        ChartKind::Second => {
            if q0.abs() > BASE_TOL * qs {
                return Err(Error::ChartPrecondition(format!("Q(θ₀) = {q0:e} ≠ 0")));
            }
            if r0.abs() <= BASE_TOL * rs {
                return Err(Error::ChartPrecondition("R(θ₀) = 0".into()));
            }
            let frame = adapted_frame(&th, &[gq.clone()])?;
            let dq = dot(&gq, &frame.column(0).as_slice().to_vec());
            Ok(ChartRecord {
                kind,
                theta0: th,
                frame,
                sign: if r0 > 0.0 { 1 } else { -1 },
                jacobian: r0.abs().powf(-1.0 / kf) * dq,
            })
        }
        ChartKind::Third => {
            if q0.abs() > BASE_TOL * qs || r0.abs() > BASE_TOL * rs {
                return Err(Error::ChartPrecondition(format!("(Q, R)(θ₀) = ({q0:e}, {r0:e}) ≠ 0")));
            }
            let frame = adapted_frame(&th, &[gq.clone(), gr.clone()])?;
            let e1 = frame.column(0).as_slice().to_vec();
            let e2 = frame.column(1).as_slice().to_vec();
            let minor = dot(&gq, &e1) * dot(&gr, &e2) - dot(&gq, &e2) * dot(&gr, &e1);
            if minor.abs() < 1e-8 {
                return Err(Error::ChartPrecondition("gradients of Q and R are dependent at θ₀".into()));
            }
            Ok(ChartRecord { kind, theta0: th, frame, sign: 1, jacobian: minor })
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartGrid {
    pub t: Vec<f64>,
    pub r: Vec<f64>,
    pub phi: Vec<Vec<f64>>,
}

impl ChartGrid {
    /// Five values each of `t` and `r` in `[0, 0.1]`, the base direction and
    /// eight directions at radius 0.05 in `φ`.
    pub fn standard(dim: usize) -> Self {
        let lin: Vec<f64> = (0..5).map(|i| 0.025 * i as f64).collect();
        let p = dim - 1;
        let mut phi = vec![vec![0.0; p]];
        for j in 0..8 {
            let a = std::f64::consts::PI * j as f64 / 4.0;
            let mut v = vec![0.0; p];
            let i0 = j % p;
            let i1 = (j + 1) % p;
            v[i0] += 0.05 * a.cos();
            if i1 != i0 {
                v[i1] += 0.05 * a.sin();
            }
            phi.push(v);
        }
        ChartGrid { t: lin.clone(), r: lin, phi }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChartResidualReport {
    pub kind: ChartKind,
    pub points: usize,
    /// `max |Ψ − NF(χ)|` over the grid.
    pub max_residual: f64,
    pub analytic_jacobian: f64,
    pub numeric_jacobian: f64,
    /// `|numeric − analytic| / |analytic|` at the base point.
    pub jacobian_rel_error: f64,
    /// Smallest `|det Dχ|` over the grid.
    pub min_abs_det: f64,
    /// Largest 2-norm condition number of `Dχ` over the grid.
    pub max_condition: f64,
    pub pass: bool,
}

pub fn verify_chart(chart: &ChartRecord, model: &ModelPhase, grid: &ChartGrid, tol: f64) -> ChartResidualReport {
    let mut pts = Vec::new();
    for &t in &grid.t {
        for &r in &grid.r {
            for p in &grid.phi {
                pts.push((t, r, p.clone()));
            }
        }
    }
    let step = 1e-6;
    let per: Vec<(f64, f64, f64)> = pts
        .par_iter()
        .map(|(t, r, p)| {
            let th = chart.theta(p);
            let chi = chart.chi(model, *t, *r, p);
            let res = (model.psi(*t, *r, &th) - chart.normal_form(model.k, &chi)).abs();
            let jac = chart.numeric_jacobian(model, *t, *r, p, step);
            let sv = jac.clone().singular_values();
            let cond = sv.max() / sv.min();
            (res, jac.determinant().abs(), cond)
        })
        .collect();
    let max_residual = per.iter().map(|x| x.0).fold(0.0, f64::max);
    let min_abs_det = per.iter().map(|x| x.1).fold(f64::INFINITY, f64::min);
    let max_condition = per.iter().map(|x| x.2).fold(0.0, f64::max);
    let zero = vec![0.0; model.dim() - 1];
    let numeric = chart.numeric_jacobian(model, 0.0, 0.0, &zero, step).determinant();
    let rel = (numeric.abs() - chart.jacobian.abs()).abs() / chart.jacobian.abs();
    ChartResidualReport {
        kind: chart.kind,
        points: pts.len(),
        max_residual,
        analytic_jacobian: chart.jacobian,
        numeric_jacobian: numeric,
        jacobian_rel_error: rel,
        min_abs_det,
        max_condition,
        pass: max_residual <= tol && rel <= 1e-6 && min_abs_det > 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Poly;

    fn model() -> ModelPhase {
        // Q = ½(y₁² + y₂² − y₃² − y₄²), R = y₁y₃ − y₂⁴ + y₄⁴
        let q = DMatrix::from_diagonal(&DVector::from_vec(vec![0.5, 0.5, -0.5, -0.5]));
        let mut p = Poly::zero(4);
        p.add_term(vec![2, 0, 2, 0], 1.0);
        p.add_term(vec![0, 4, 0, 0], -1.0);
        p.add_term(vec![0, 0, 0, 4], 0.5);
        ModelPhase::new(q, HomogForm::new(4, p).unwrap()).unwrap()
    }

    fn perturbed() -> ModelPhase {
        model().with_perturbations(
            Some(Arc::new(|t, r, th: &[f64]| 0.3 * th[0] * th[1] + t * r - 0.2 * th[3])),
            Some(Arc::new(|r, th: &[f64]| th[2].powi(3) * th[1] + r)),
        )
    }

    #[test]
    fn first_kind_is_exact() {
        let m = perturbed();
        let th = [1.0, 0.0, 0.0, 0.0];
        let c = build_chart(&m, &th, ChartKind::First).unwrap();
        assert!((c.jacobian - 0.5).abs() < 1e-15);
        let rep = verify_chart(&c, &m, &ChartGrid::standard(4), 1e-12);
        assert!(rep.pass, "{rep:?}");
        assert!(rep.max_residual < 1e-15);
    }

    #[test]
    fn second_kind_both_signs() {
        let m = perturbed();
        let s = 0.5f64.sqrt();
        for (th, sign) in [([0.0, s, s, 0.0], -1), ([s, 0.0, s, 0.0], 1)] {
            let c = build_chart(&m, &th, ChartKind::Second).unwrap();
            assert_eq!(c.sign, sign);
            let rep = verify_chart(&c, &m, &ChartGrid::standard(4), 1e-12);
            assert!(rep.pass, "{rep:?}");
        }
    }

    #[test]
    fn third_kind_at_common_zero() {
        let m = perturbed();
        let s = 0.5f64.sqrt();
        // Q = 0 and y₁y₃ = 0 with y₂ = y₄ = 0 fails (y₁² = y₃²); use y₁ = y₄ = s.
        let th = [s, 0.0, 0.0, s];
        let r0 = m.r.eval(&th);
        assert!(r0.abs() > 0.0);
        let m2 = {
            let mut p = Poly::zero(4);
            p.add_term(vec![1, 0, 0, 3], 1.0);
            p.add_term(vec![0, 0, 0, 4], -1.0);
            p.add_term(vec![0, 1, 0, 3], 1.0);
            ModelPhase::new(m.q.clone(), HomogForm::new(4, p).unwrap()).unwrap()
        };
        assert!(m2.r.eval(&th).abs() < 1e-15);
        let c = build_chart(&m2, &th, ChartKind::Third).unwrap();
        let rep = verify_chart(&c, &m2, &ChartGrid::standard(4), 1e-12);
        assert!(rep.pass, "{rep:?}");
    }

    #[test]
    fn preconditions() {
        let m = model();
        let s = 0.5f64.sqrt();
        assert!(build_chart(&m, &[0.0, s, s, 0.0], ChartKind::First).is_err());
        assert!(build_chart(&m, &[1.0, 0.0, 0.0, 0.0], ChartKind::Second).is_err());
        assert!(build_chart(&m, &[0.0, s, s, 0.0], ChartKind::Third).is_err());
        assert!(build_chart(&m, &[2.0, 0.0, 0.0, 0.0], ChartKind::First).is_err());
    }
}
