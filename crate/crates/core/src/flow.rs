//! Hamiltonian flow, its linearization at the equilibrium, and higher flow
//! jets `d^kΦ_t(z₀)`.

use crate::error::{Error, Result};
use crate::numerics::quad::{cumulative_matrix, lobatto_nodes};
use crate::numerics::{factorial, multi_indices, Exponents, Poly};
use crate::symbol::{hamiltonian_field, BlockType, CriticalData, PhasePoint, PolySymbol};
use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Highest supported jet order.
pub const MAX_JET_ORDER: usize = 4;

/// The standard symplectic matrix `[[0, I], [−I, 0]]`.
pub fn symplectic_j(n: usize) -> DMatrix<f64> {
    let mut j = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        j[(i, n + i)] = 1.0;
        j[(n + i, i)] = -1.0;
    }
    j
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Monodromy {
    pub t: f64,
    pub m: DMatrix<f64>,
}

impl Monodromy {
    /// `‖MᵀJM − J‖_max`.
    pub fn symplectic_defect(&self) -> f64 {
        let n = self.m.nrows() / 2;
        let j = symplectic_j(n);
        (self.m.transpose() * &j * &self.m - j).abs().max()
    }
}

/// Closed-form `dΦ_t(z₀)`: a rotation by `w_j t` on each elliptic block and a
/// hyperbolic rotation on each hyperbolic block.
pub fn linearized_flow(cd: &CriticalData, t: f64) -> Monodromy {
    let n = cd.n();
    let mut m = DMatrix::zeros(2 * n, 2 * n);
    for j in 0..n {
        let a = cd.w[j] * t;
        let (x, xi) = (j, n + j);
        match cd.sigma[j] {
            BlockType::Elliptic => {
                let (s, c) = a.sin_cos();
                m[(x, x)] = c;
                m[(x, xi)] = s;
                m[(xi, x)] = -s;
                m[(xi, xi)] = c;
            }
            BlockType::Hyperbolic => {
                let (s, c) = (a.sinh(), a.cosh());
                m[(x, x)] = c;
                m[(x, xi)] = -s;
                m[(xi, x)] = -s;
                m[(xi, xi)] = c;
            }
        }
    }
    Monodromy { t, m }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOpts {
    pub tol: f64,
    /// Trajectories with some |z_i| above this abort.
    pub bound: f64,
    pub max_steps: usize,
}

impl Default for FlowOpts {
    fn default() -> Self {
        FlowOpts { tol: 1e-10, bound: 1e6, max_steps: 10_000_000 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FlowResult {
    pub z: PhasePoint,
    pub energy_drift: f64,
    pub steps: usize,
}

struct Field {
    comps: Vec<Poly>,
}

impl Field {
    fn new(p: &Poly) -> Self {
        Field { comps: hamiltonian_field(p) }
    }
    fn eval(&self, z: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.comps) {
            *o = c.eval(z);
        }
    }
}

const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const B4: [f64; 7] =
    [5179.0 / 57600.0, 0.0, 7571.0 / 16695.0, 393.0 / 640.0, -92097.0 / 339200.0, 187.0 / 2100.0, 1.0 / 40.0];

/// One Dormand–Prince step; returns the 5th-order state and the embedded
/// error vector.
fn dp_step(f: &Field, z: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let d = z.len();
    let mut k = vec![vec![0.0; d]; 7];
    let mut tmp = vec![0.0; d];
    f.eval(z, &mut k[0]);
    for s in 1..7 {
        for i in 0..d {
            let mut acc = z[i];
            for (r, kr) in k.iter().enumerate().take(s) {
                acc += h * A[s][r] * kr[i];
            }
            tmp[i] = acc;
        }
        f.eval(&tmp, &mut k[s]);
    }
    // the last stage point is the 5th-order solution
    let y5 = tmp;
    let err: Vec<f64> = (0..d)
        .map(|i| h * (0..7).map(|s| (A[6].get(s).copied().unwrap_or(0.0) - B4[s]) * k[s][i]).sum::<f64>())
        .collect();
    (y5, err)
}

/// Adaptive Dormand–Prince 5(4) integration of `ż = J∇p(z)`.
pub fn hamilton_flow(p: &PolySymbol, z: &PhasePoint, t: f64, opts: FlowOpts) -> Result<FlowResult> {
    if z.n != p.n {
        return Err(Error::DimensionMismatch { expected: p.n, got: z.n });
    }
    let f = Field::new(&p.poly);
    let e0 = p.poly.eval(&z.coords);
    let mut y = z.coords.clone();
    let mut s = 0.0;
    let dir = if t >= 0.0 { 1.0 } else { -1.0 };
    let total = t.abs();
    let mut h = (0.01f64).min(total).max(1e-6) * dir;
    let mut steps = 0;
    while dir * (t - s) > 0.0 {
        if steps >= opts.max_steps {
            return Err(Error::StepUnderflow { t: s });
        }
        if dir * (s + h - t) > 0.0 {
            h = t - s;
        }
        let (y5, err) = dp_step(&f, &y, h);
        let mut en: f64 = 0.0;
        for i in 0..y.len() {
            let sc = opts.tol + opts.tol * y[i].abs().max(y5[i].abs());
            en = en.max(err[i].abs() / sc);
        }
        if !en.is_finite() {
            en = 1e10;
        }
        if en <= 1.0 {
            s += h;
            y = y5;
            steps += 1;
            if y.iter().any(|v| !v.is_finite() || v.abs() > opts.bound) {
                return Err(Error::BoxEscape { t: s });
            }
        }
        let fac = if en == 0.0 { 5.0 } else { (0.9 * en.powf(-0.2)).clamp(0.2, 5.0) };
        h *= fac;
        if h.abs() < 1e-14 * total.max(1.0) {
            return Err(Error::StepUnderflow { t: s });
        }
    }
    let drift = (p.poly.eval(&y) - e0).abs();
    Ok(FlowResult { z: PhasePoint { n: z.n, coords: y }, energy_drift: drift, steps })
}

/// Fixed-step Dormand–Prince integration. The map `z ↦ Φ_t(z)` it defines is
/// smooth in `z`, which makes it the right object to difference.
pub fn hamilton_flow_fixed(p: &PolySymbol, z: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let f = Field::new(&p.poly);
    let h = t / steps as f64;
    let mut y = z.to_vec();
    for _ in 0..steps {
        y = dp_step(&f, &y, h).0;
    }
    y
}

/// The symmetric tensor `d^kΦ_t(z₀)`, stored as one homogeneous degree-k
/// polynomial per output component: component `i` is `y ↦ d^kΦ^i(y, …, y)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct JetTensor {
    pub order: usize,
    pub dim: usize,
    pub t: f64,
    pub components: Vec<Poly>,
}

impl JetTensor {
    pub fn zero(order: usize, dim: usize, t: f64) -> Self {
        JetTensor { order, dim, t, components: vec![Poly::zero(dim); dim] }
    }

    /// `d^kΦ(v, …, v)`.
    pub fn eval_diag(&self, v: &[f64]) -> Vec<f64> {
        self.components.iter().map(|c| c.eval(v)).collect()
    }

    /// `∂_{i₁}…∂_{i_k} Φ^comp`.
    pub fn entry(&self, comp: usize, idx: &[usize]) -> f64 {
        let mut e: Exponents = vec![0; self.dim];
        for &i in idx {
            e[i] += 1;
        }
        let afact: f64 = e.iter().map(|&k| factorial(k as usize)).product();
        self.components[comp].coeff(&e) * afact / factorial(self.order)
    }

    /// Multilinear evaluation `d^kΦ(v₁, …, v_k)`.
    pub fn eval(&self, args: &[&[f64]]) -> Result<Vec<f64>> {
        if args.len() != self.order {
            return Err(Error::OrderMismatch { expected: self.order, got: args.len() });
        }
        let d = self.dim;
        let mut out = vec![0.0; d];
        let mut idx = vec![0usize; self.order];
        let total = d.pow(self.order as u32);
        for flat in 0..total {
            let mut r = flat;
            let mut w = 1.0;
            for (j, slot) in idx.iter_mut().enumerate() {
                *slot = r % d;
                r /= d;
                w *= args[j][*slot];
            }
            if w == 0.0 {
                continue;
            }
            for (comp, o) in out.iter_mut().enumerate() {
                *o += self.entry(comp, &idx) * w;
            }
        }
        Ok(out)
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.components.iter().fold(0.0, |m, c| m.max(c.max_abs_coeff()))
    }

    pub fn is_zero(&self, tol: f64) -> bool {
        self.max_abs_coeff() <= tol
    }

    /// Largest coefficient difference to another tensor of the same shape.
    pub fn max_diff(&self, o: &JetTensor) -> f64 {
        self.components.iter().zip(&o.components).fold(0.0, |m, (a, b)| m.max(a.max_coeff_diff(b)))
    }
}

const NODES: usize = 17;

/// Panel layout on [0, t] with Lobatto nodes in each panel.
struct Grid {
    panels: usize,
    t: f64,
    s: Vec<f64>,
}

impl Grid {
    fn new(t: f64, panels: usize) -> Self {
        let x = lobatto_nodes(NODES);
        let h = t / panels as f64;
        let mut s = Vec::with_capacity(panels * NODES);
        for p in 0..panels {
            let a = p as f64 * h;
            for xi in &x {
                s.push(a + 0.5 * h * (xi + 1.0));
            }
        }
        Grid { panels, t, s }
    }
}

/// Dense coefficient layout of vector-valued homogeneous polynomials.
struct Basis {
    dim: usize,
    monos: Vec<Exponents>,
    index: HashMap<Exponents, usize>,
}

impl Basis {
    fn new(dim: usize, k: u32) -> Self {
        let monos = multi_indices(dim, k);
        let index = monos.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
        Basis { dim, monos, index }
    }
    fn to_dense(&self, v: &[Poly]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.dim, self.monos.len());
        for (i, p) in v.iter().enumerate() {
            for (e, c) in p.terms() {
                if let Some(&j) = self.index.get(e) {
                    m[(i, j)] = *c;
                }
            }
        }
        m
    }
    fn to_polys(&self, m: &DMatrix<f64>) -> Vec<Poly> {
        (0..self.dim)
            .map(|i| {
                let mut p = Poly::zero(self.dim);
                for (j, e) in self.monos.iter().enumerate() {
                    p.add_term(e.clone(), m[(i, j)]);
                }
                p
            })
            .collect()
    }
}

/// Running integral `∫₀^{s_i} g` of per-node coefficient blocks.
fn cumulative(grid: &Grid, vals: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let smat = cumulative_matrix(NODES);
    let hw = 0.5 * grid.t / grid.panels as f64;
    let mut out = Vec::with_capacity(vals.len());
    let mut base = DMatrix::zeros(vals[0].nrows(), vals[0].ncols());
    for p in 0..grid.panels {
        let blk = &vals[p * NODES..(p + 1) * NODES];
        for i in 0..NODES {
            let mut acc = base.clone();
            for (j, v) in blk.iter().enumerate() {
                let w = smat[(i, j)] * hw;
                if w != 0.0 {
                    acc += v * w;
                }
            }
            out.push(acc);
        }
        base = out.last().expect("panel has nodes").clone();
    }
    out
}

fn apply_matrix(m: &DMatrix<f64>, v: &[Poly]) -> Vec<Poly> {
    (0..m.nrows())
        .map(|i| {
            let mut p = Poly::zero(v[0].nvars());
            for (j, vj) in v.iter().enumerate() {
                let c = m[(i, j)];
                if c != 0.0 {
                    p = p.add(&vj.scale(c));
                }
            }
            p
        })
        .collect()
}

fn nonlinear_field(p: &PolySymbol, cd: &CriticalData, maxdeg: u32) -> Result<Vec<Poly>> {
    let q = p.centered(&cd.z0)?;
    Ok(hamiltonian_field(&q).into_iter().map(|c| c.truncate(maxdeg).sub(&c.truncate(1))).collect())
}

/// Jets of orders 2..=kmax on a fixed grid; index `m−2` holds order `m`.
fn jets_on_grid(nl: &[Poly], cd: &CriticalData, kmax: usize, grid: &Grid) -> Vec<JetTensor> {
    let d = 2 * cd.n();
    let nodes = grid.s.len();
    let mons: Vec<DMatrix<f64>> = grid.s.iter().map(|&s| linearized_flow(cd, s).m).collect();
    let inv: Vec<DMatrix<f64>> = grid.s.iter().map(|&s| linearized_flow(cd, -s).m).collect();
    let ident: Vec<Poly> = (0..d).map(|i| Poly::var(d, i)).collect();
    // y[m][node] = d^mΦ_s(y^m) as polynomials
    let mut y: Vec<Vec<Vec<Poly>>> = vec![vec![], (0..nodes).map(|i| apply_matrix(&mons[i], &ident)).collect()];
    for m in 2..=kmax {
        let basis = Basis::new(d, m as u32);
        let mf = factorial(m);
        let integrand: Vec<DMatrix<f64>> = (0..nodes)
            .into_par_iter()
            .map(|i| {
                let mut g = vec![Poly::zero(d); d];
                for (j, yj) in y.iter().enumerate().skip(1) {
                    let fj = 1.0 / factorial(j);
                    for c in 0..d {
                        g[c] = g[c].add(&yj[i][c].scale(fj));
                    }
                }
                let f: Vec<Poly> =
                    nl.iter().map(|c| c.compose(&g, m as u32).homogeneous_part(m as u32).scale(mf)).collect();
                basis.to_dense(&apply_matrix(&inv[i], &f))
            })
            .collect();
        let cum = cumulative(grid, &integrand);
        let ym: Vec<Vec<Poly>> = (0..nodes).map(|i| apply_matrix(&mons[i], &basis.to_polys(&cum[i]))).collect();
        y.push(ym);
    }
    (2..=kmax).map(|m| JetTensor { order: m, dim: d, t: grid.t, components: y[m][nodes - 1].clone() }).collect()
}

fn initial_panels(cd: &CriticalData, t: f64, k: usize) -> usize {
    let wmax = cd.w.iter().fold(0.0f64, |m, w| m.max(w.abs()));
    ((t.abs() * wmax * k as f64 / 4.0).ceil() as usize).max(1)
}

/// All jets `d^mΦ_t(z₀)` for `2 ≤ m ≤ kmax`, by the variational recursion
///
/// `d^mΦ_t = dΦ_t ∫₀ᵗ dΦ_{−s} · m!·[X(Σ_{j<m} d^jΦ_s/j!)]_m ds`,
///
/// with panel refinement until successive results agree to `tol`.
pub fn flow_jets(p: &PolySymbol, cd: &CriticalData, kmax: usize, t: f64, tol: f64) -> Result<Vec<JetTensor>> {
    if !(2..=MAX_JET_ORDER).contains(&kmax) {
        return Err(Error::UnsupportedOrder(kmax));
    }
    let d = 2 * cd.n();
    if t == 0.0 {
        return Ok((2..=kmax).map(|m| JetTensor::zero(m, d, 0.0)).collect());
    }
    let nl = nonlinear_field(p, cd, kmax as u32)?;
    if nl.iter().all(|c| c.is_zero()) {
        return Ok((2..=kmax).map(|m| JetTensor::zero(m, d, t)).collect());
    }
    let mut panels = initial_panels(cd, t, kmax);
    let mut prev = jets_on_grid(&nl, cd, kmax, &Grid::new(t, panels));
    for _ in 0..8 {
        panels *= 2;
        let next = jets_on_grid(&nl, cd, kmax, &Grid::new(t, panels));
        let scale = next.iter().fold(1.0f64, |m, j| m.max(j.max_abs_coeff()));
        let diff = next.iter().zip(&prev).fold(0.0f64, |m, (a, b)| m.max(a.max_diff(b)));
        if diff <= tol * scale {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::NoConvergence(format!("flow jet did not settle by {panels} panels")))
}

/// `d^kΦ_t(z₀)` for a single order.
pub fn flow_jet(p: &PolySymbol, cd: &CriticalData, k: usize, t: f64, tol: f64) -> Result<JetTensor> {
    if !(2..=MAX_JET_ORDER).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    if vanishing_below(p, cd, k)? {
        return single_pullback_jet(p, cd, k, t, tol);
    }
    Ok(flow_jets(p, cd, k, t, tol)?.pop().expect("at least one order"))
}

/// True when `d^j p(z₀) = 0` for `3 ≤ j ≤ k`, so the jets of order below `k`
/// vanish identically and `d^kΦ_t` is a single pull-back integral.
pub fn vanishing_below(p: &PolySymbol, cd: &CriticalData, k: usize) -> Result<bool> {
    let q = p.centered(&cd.z0)?;
    Ok((3..=k as u32).all(|j| q.homogeneous_part(j).is_zero()))
}

/// `d^kΦ_t = dΦ_t ∫₀ᵗ dΦ_{−s} · k!·X_k(dΦ_s y) ds`, valid when the field has
/// no terms of degree 2..k−1.
pub fn single_pullback_jet(p: &PolySymbol, cd: &CriticalData, k: usize, t: f64, tol: f64) -> Result<JetTensor> {
    if !(2..=MAX_JET_ORDER).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let d = 2 * cd.n();
    let q = p.centered(&cd.z0)?;
    let field = hamiltonian_field(&q);
    let low_ok = field.iter().all(|c| (2..k as u32).all(|j| c.homogeneous_part(j).is_zero()));
    if !low_ok {
        return Err(Error::Hypothesis("field has nonlinear terms below the requested order".into()));
    }
    if t == 0.0 {
        return Ok(JetTensor::zero(k, d, 0.0));
    }
    let xk: Vec<Poly> = field.iter().map(|c| c.homogeneous_part(k as u32)).collect();
    let basis = Basis::new(d, k as u32);
    let kf = factorial(k);
    let ident: Vec<Poly> = (0..d).map(|i| Poly::var(d, i)).collect();
    let run = |panels: usize| -> DMatrix<f64> {
        let grid = Grid::new(t, panels);
        let vals: Vec<DMatrix<f64>> = grid
            .s
            .par_iter()
            .map(|&s| {
                let lin = apply_matrix(&linearized_flow(cd, s).m, &ident);
                let f: Vec<Poly> = xk.iter().map(|c| c.compose(&lin, k as u32).scale(kf)).collect();
                basis.to_dense(&apply_matrix(&linearized_flow(cd, -s).m, &f))
            })
            .collect();
        cumulative(&grid, &vals).pop().expect("grid has nodes")
    };
    let mut panels = initial_panels(cd, t, k);
    let mut prev = run(panels);
    for _ in 0..8 {
        panels *= 2;
        let next = run(panels);
        let diff = (&next - &prev).abs().max();
        if diff <= tol * next.abs().max().max(1.0) {
            let comps = apply_matrix(&linearized_flow(cd, t).m, &basis.to_polys(&next));
            return Ok(JetTensor { order: k, dim: d, t, components: comps });
        }
        prev = next;
    }
    Err(Error::NoConvergence(format!("pull-back integral did not settle by {panels} panels")))
}

/// Central-difference estimate of `d^kΦ_t(z₀)(v, …, v)` with one Richardson
/// step. Differences are taken of the fixed-step integrator map.
pub fn fd_jet_diag(p: &PolySymbol, z0: &[f64], v: &[f64], k: usize, t: f64, tol: f64) -> Result<Vec<f64>> {
    if !(1..=MAX_JET_ORDER).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    let steps = ((t.abs() * 400.0).ceil() as usize).max(200);
    let phi = |e: f64| -> Vec<f64> {
        let z: Vec<f64> = z0.iter().zip(v).map(|(a, b)| a + e * b).collect();
        hamilton_flow_fixed(p, &z, t, steps)
    };
    let stencil: &[(i32, f64)] = match k {
        1 => &[(1, 0.5), (-1, -0.5)],
        2 => &[(1, 1.0), (0, -2.0), (-1, 1.0)],
        3 => &[(2, 0.5), (1, -1.0), (-1, 1.0), (-2, -0.5)],
        _ => &[(2, 1.0), (1, -4.0), (0, 6.0), (-1, -4.0), (-2, 1.0)],
    };
    let d = |h: f64| -> Vec<f64> {
        let mut acc = vec![0.0; z0.len()];
        for &(o, c) in stencil {
            let y = phi(o as f64 * h);
            for (a, yi) in acc.iter_mut().zip(&y) {
                *a += c * yi;
            }
        }
        acc.iter().map(|a| a / h.powi(k as i32)).collect()
    };
    let h = tol.powf(1.0 / (k as f64 + 2.0));
    let d1 = d(h);
    let d2 = d(0.5 * h);
    Ok(d2.iter().zip(&d1).map(|(a, b)| a + (a - b) / 3.0).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn monodromy_identity_at_zero() {
        let h = fixtures::siegel_moser();
        let m = linearized_flow(&h.critical, 0.0);
        assert_eq!(m.m, DMatrix::identity(4, 4));
    }

    #[test]
    fn example1_monodromy_matches_display() {
        let h = fixtures::example1();
        let t = 0.7;
        let m = linearized_flow(&h.critical, t).m;
        let (s, c) = t.sin_cos();
        // (x1, x2, ξ1, ξ2) rows
        let want = DMatrix::from_row_slice(
            4,
            4,
            &[c, 0.0, s, 0.0, 0.0, c, 0.0, -s, -s, 0.0, c, 0.0, 0.0, s, 0.0, c],
        );
        assert!((m - want).abs().max() < 1e-15);
    }

    #[test]
    fn hyperbolic_block_is_symplectic() {
        let h = fixtures::quadratic(&[1.5, 0.7], &[BlockType::Hyperbolic, BlockType::Elliptic]);
        let m = linearized_flow(&h.critical, 3.0);
        assert!(m.symplectic_defect() < 1e-12 * m.m.abs().max());
    }

    #[test]
    fn equilibrium_is_fixed() {
        let h = fixtures::siegel_moser();
        let r = hamilton_flow(&h.symbol, &h.critical.z0, 5.0, FlowOpts::default()).unwrap();
        assert!(r.z.coords.iter().all(|x| *x == 0.0));
    }

    #[test]
    fn example1_flow_matches_closed_form() {
        let h = fixtures::example1();
        let z = [0.3, 0.2, -0.1, 0.25];
        let t = 2.5;
        let r = hamilton_flow(&h.symbol, &PhasePoint::new(z.to_vec()).unwrap(), t, FlowOpts { tol: 1e-12, ..Default::default() })
            .unwrap();
        let rho = z[1] * z[1] + z[3] * z[3];
        let om = 4.0 * rho - 1.0;
        let want = [
            z[0] * t.cos() + z[2] * t.sin(),
            z[1] * (om * t).cos() + z[3] * (om * t).sin(),
            z[2] * t.cos() - z[0] * t.sin(),
            z[3] * (om * t).cos() - z[1] * (om * t).sin(),
        ];
        for i in 0..4 {
            assert_relative_eq!(r.z.coords[i], want[i], epsilon = 1e-9);
        }
        assert!(r.energy_drift < 1e-9);
    }

    #[test]
    fn escape_is_reported() {
        let h = fixtures::quadratic(&[1.0], &[BlockType::Hyperbolic]);
        let z = PhasePoint::new(vec![1.0, -1.0]).unwrap();
        let e = hamilton_flow(&h.symbol, &z, 50.0, FlowOpts { bound: 10.0, ..Default::default() }).unwrap_err();
        assert!(matches!(e, Error::BoxEscape { .. }));
    }

    #[test]
    fn quadratic_hamiltonian_has_zero_jets() {
        let h = fixtures::quadratic(&[1.0, 2.0], &[BlockType::Elliptic, BlockType::Elliptic]);
        for k in 2..=4 {
            let j = flow_jet(&h.symbol, &h.critical, k, 3.3, 1e-10).unwrap();
            assert!(j.is_zero(0.0));
        }
    }

    #[test]
    fn jet_at_zero_time_is_zero() {
        let h = fixtures::siegel_moser();
        let j = flow_jet(&h.symbol, &h.critical, 3, 0.0, 1e-10).unwrap();
        assert!(j.is_zero(0.0));
    }

    #[test]
    fn unsupported_order() {
        let h = fixtures::siegel_moser();
        assert!(matches!(flow_jet(&h.symbol, &h.critical, 5, 1.0, 1e-10), Err(Error::UnsupportedOrder(5))));
    }

    #[test]
    fn example1_third_jet_closed_form() {
        // Φ_{2π} rotates the second block by (8πρ): the cubic term of
        // x₂(2π) is 8πρξ₂, so d³Φ(z³) = 3!·8πρξ₂.
        let h = fixtures::example1();
        let j = flow_jet(&h.symbol, &h.critical, 3, 2.0 * PI, 1e-12).unwrap();
        let z = [0.4, -0.3, 0.7, 0.5];
        let rho = z[1] * z[1] + z[3] * z[3];
        let v = j.eval_diag(&z);
        assert!(v[0].abs() < 1e-10 && v[2].abs() < 1e-10);
        assert_relative_eq!(v[1], 48.0 * PI * rho * z[3], max_relative = 1e-10);
        assert_relative_eq!(v[3], -48.0 * PI * rho * z[1], max_relative = 1e-10);
    }

    #[test]
    fn single_pullback_agrees_with_recursion() {
        let h = fixtures::example1();
        let a = single_pullback_jet(&h.symbol, &h.critical, 3, 1.3, 1e-12).unwrap();
        let b = flow_jets(&h.symbol, &h.critical, 3, 1.3, 1e-12).unwrap().pop().unwrap();
        assert!(a.max_diff(&b) < 1e-10);
    }

    #[test]
    fn multilinear_matches_diagonal() {
        let h = fixtures::siegel_moser();
        let j = flow_jet(&h.symbol, &h.critical, 2, 1.0, 1e-12).unwrap();
        let v = [0.3, -0.2, 0.5, 0.1];
        let a = j.eval(&[&v, &v]).unwrap();
        let b = j.eval_diag(&v);
        for i in 0..4 {
            assert_relative_eq!(a[i], b[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn siegel_moser_second_jet_vs_differences() {
        let h = fixtures::siegel_moser();
        let t = 2.0 * PI;
        let j = flow_jet(&h.symbol, &h.critical, 2, t, 1e-12).unwrap();
        let v = [0.6, -0.3, 0.2, 0.7];
        let fd = fd_jet_diag(&h.symbol, &h.critical.z0.coords, &v, 2, t, 1e-10).unwrap();
        let jv = j.eval_diag(&v);
        let scale = fd.iter().fold(1.0f64, |m, x| m.max(x.abs()));
        for i in 0..4 {
            assert!((jv[i] - fd[i]).abs() / scale < 1e-4, "{jv:?} vs {fd:?}");
        }
    }
}
