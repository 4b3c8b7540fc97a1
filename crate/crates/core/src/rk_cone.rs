//! The first non-vanishing homogeneous term `R_k` of the phase on a fixed
//! space, and quadrature on the cone `{Q_T = 0} ∩ S` with the Liouville
//! measure `dL` (`dL ∧ dQ = dθ`).

use crate::error::{Error, Result};
use crate::flow::{flow_jets, linearized_flow, vanishing_below, JetTensor};
use crate::numerics::quad::{integrate, QuadOpts};
use crate::numerics::{dot, factorial, gamma, multi_indices, norm, Poly};
use crate::periods::PeriodRecord;
use crate::symbol::{hamiltonian_field, CriticalData, PolySymbol};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A homogeneous polynomial of fixed degree on ℝ^dim.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HomogForm {
    pub degree: usize,
    pub dim: usize,
    pub poly: Poly,
}

impl HomogForm {
    pub fn new(degree: usize, poly: Poly) -> Result<Self> {
        if poly.terms().any(|(e, _)| e.iter().sum::<u32>() as usize != degree) {
            return Err(Error::InvalidArgument(format!("polynomial is not homogeneous of degree {degree}")));
        }
        Ok(HomogForm { degree, dim: poly.nvars(), poly })
    }

    pub fn eval(&self, y: &[f64]) -> f64 {
        self.poly.eval(y)
    }

    pub fn gradient(&self, y: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.poly.partial(i).eval(y)).collect()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.poly.max_abs_coeff()
    }

    pub fn max_coeff_diff(&self, o: &HomogForm) -> f64 {
        self.poly.max_coeff_diff(&o.poly)
    }
}

/// `R_k(y) = (1/k!)⟨z, J·d^{k−1}Φ_T(z^{k−1})⟩` with `z = B y` the fixed-space
/// embedding. `jet` has order `k − 1` and is taken at the period.
pub fn rk_from_jet(jet: &JetTensor, period: &PeriodRecord) -> Result<HomogForm> {
    let k = jet.order + 1;
    if jet.dim != period.f_basis.nrows() {
        return Err(Error::DimensionMismatch { expected: period.f_basis.nrows(), got: jet.dim });
    }
    if (jet.t - period.t).abs() > 1e-9 * period.t.abs().max(1.0) {
        return Err(Error::InvalidArgument(format!("jet taken at t = {}, period is {}", jet.t, period.t)));
    }
    let dim = jet.dim;
    let m = period.f_basis.ncols();
    let b: Vec<f64> = (0..dim).flat_map(|r| (0..m).map(move |c| (r, c))).map(|(r, c)| period.f_basis[(r, c)]).collect();
    let z: Vec<Poly> = (0..dim).map(|r| Poly::linear(&b[r * m..(r + 1) * m])).collect();
    let v: Vec<Poly> = jet.components.iter().map(|c| c.linear_substitute(&b, m)).collect();
    let n = dim / 2;
    let mut r = Poly::zero(m);
    for j in 0..n {
        r = r.add(&z[j].mul(&v[n + j])).sub(&z[n + j].mul(&v[j]));
    }
    HomogForm::new(k, r.scale(1.0 / factorial(k)).prune(0.0))
}

/// `R_k` from the jet recursion, for the given `k` (needs `k − 1 ≤ 4`).
pub fn rk_via_jets(p: &PolySymbol, cd: &CriticalData, period: &PeriodRecord, k: usize, tol: f64) -> Result<HomogForm> {
    let jets = flow_jets(p, cd, k - 1, period.t, tol)?;
    rk_from_jet(jets.last().expect("order ≥ 2"), period)
}

/// The smallest `k` in 3..=5 with `R_k ≢ 0`, together with `R_k`.
pub fn first_nonvanishing_rk(
    p: &PolySymbol,
    cd: &CriticalData,
    period: &PeriodRecord,
    tol: f64,
) -> Result<Option<HomogForm>> {
    let jets = flow_jets(p, cd, 4, period.t, tol)?;
    for jet in &jets {
        let r = rk_from_jet(jet, period)?;
        let scale = jet.max_abs_coeff().max(1.0);
        let r = HomogForm::new(r.degree, r.poly.prune(1e3 * tol * scale))?;
        if !r.poly.is_zero() {
            return Ok(Some(r));
        }
    }
    Ok(None)
}

/// Symmetric lattice `{−2..2}^dim \ {0}`, thinned in high dimension.
fn node_set(dim: usize, k: usize) -> Vec<Vec<f64>> {
    let total = 5usize.pow(dim as u32);
    let mut out = Vec::new();
    for flat in 0..total {
        let mut r = flat;
        let y: Vec<f64> = (0..dim)
            .map(|_| {
                let v = (r % 5) as f64 - 2.0;
                r /= 5;
                v
            })
            .collect();
        let l1: f64 = y.iter().map(|x| x.abs()).sum();
        if l1 == 0.0 || (dim > 4 && l1 > (k + 2) as f64) {
            continue;
        }
        out.push(y);
    }
    out
}

/// `R_k(y) = (1/k!) ∫₀ᵀ ⟨z, J·dΦ_T dΦ_{−s}·(k−1)!·X_{k−1}(dΦ_s z)⟩ ds`, `z = By`,
/// valid when `d^j p(z₀) = 0` for `3 ≤ j < k`. Coefficients are recovered by
/// least squares on a symmetric lattice of evaluation points.
pub fn rk_from_integral(p: &PolySymbol, cd: &CriticalData, period: &PeriodRecord, k: usize, tol: f64) -> Result<HomogForm> {
    if !(3..=5).contains(&k) {
        return Err(Error::UnsupportedOrder(k));
    }
    if k > 3 && !vanishing_below(p, cd, k - 1)? {
        return Err(Error::Hypothesis(format!("d^j p(z₀) ≠ 0 for some 3 ≤ j < {k}")));
    }
    let q = p.centered(&cd.z0)?;
    let xk: Vec<Poly> = hamiltonian_field(&q).iter().map(|c| c.homogeneous_part(k as u32 - 1)).collect();
    let dim = 2 * cd.n();
    let m = period.f_basis.ncols();
    let t = period.t;
    let mt = linearized_flow(cd, t).m;
    let fk = factorial(k - 1) / factorial(k);
    let opts = QuadOpts { abs_tol: 1e-13, rel_tol: tol.max(1e-13), max_segments: 5000 };
    let value = |y: &[f64]| -> Result<f64> {
        let z = period.from_fixed(y);
        let jz = {
            // Jᵀ-free form: ⟨z, J M_T w⟩ = ⟨(J M_T)ᵀ z, w⟩
            let zv = DVector::from_column_slice(&z);
            let jm = crate::flow::symplectic_j(cd.n()) * &mt;
            jm.transpose() * zv
        };
        let f = |s: f64| -> f64 {
            let lin = linearized_flow(cd, s).m * DVector::from_column_slice(&z);
            let xv = DVector::from_iterator(dim, xk.iter().map(|c| c.eval(lin.as_slice())));
            let back = linearized_flow(cd, -s).m * xv;
            jz.dot(&back)
        };
        let (v, _) = integrate(&f, 0.0, t, &[], opts)?;
        Ok(fk * v)
    };
    let nodes = node_set(m, k);
    let vals: Vec<f64> = nodes.par_iter().map(|y| value(y)).collect::<Result<Vec<_>>>()?;
    let monos = multi_indices(m, k as u32);
    let a = DMatrix::from_fn(nodes.len(), monos.len(), |i, j| {
        nodes[i].iter().zip(&monos[j]).map(|(y, &e)| y.powi(e as i32)).product()
    });
    let rhs = DVector::from_vec(vals);
    let svd = a.svd(true, true);
    let coef = svd.solve(&rhs, 1e-12).map_err(|e| Error::NoConvergence(e.to_string()))?;
    let mut poly = Poly::zero(m);
    let scale = coef.amax().max(1.0);
    for (e, c) in monos.into_iter().zip(coef.iter()) {
        if c.abs() > 1e-11 * scale {
            poly.add_term(e, *c);
        }
    }
    HomogForm::new(k, poly)
}

// ---------------------------------------------------------------------------
// cone sampling

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConeMethod {
    /// Exact parameterization of `{a|u|² = b|v|²} ∩ S` as a product of spheres.
    Product,
    /// Thin-shell Monte Carlo: uniform points with `|Q| < shell`, projected to
    /// the cone, weighted by `area(S)/(N·2·shell)`.
    MonteCarlo { shell: f64 },
}

/// Default half-width of the Monte Carlo shell.
pub const DEFAULT_SHELL: f64 = 0.05;
const CHUNK: usize = 1 << 16;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeSample {
    pub theta: Vec<f64>,
    pub weight: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeSamples {
    pub samples: Vec<ConeSample>,
    /// Number of draws behind the estimator (the denominator `N`).
    pub n_drawn: usize,
    pub seed: u64,
    pub method: ConeMethod,
    /// Samples are iid draws (standard errors apply) rather than a grid.
    pub random: bool,
}

fn sphere_area(m: usize) -> f64 {
    2.0 * PI.powf(m as f64 / 2.0) / gamma(m as f64 / 2.0).expect("positive argument")
}

fn q_eval(a: &DMatrix<f64>, y: &[f64]) -> f64 {
    let v = DVector::from_column_slice(y);
    (v.transpose() * a * &v)[(0, 0)]
}

fn q_grad(a: &DMatrix<f64>, y: &[f64]) -> Vec<f64> {
    let v = DVector::from_column_slice(y);
    (a * v * 2.0).as_slice().to_vec()
}

fn tangential(theta: &[f64], g: &[f64]) -> Vec<f64> {
    let s = dot(theta, g);
    g.iter().zip(theta).map(|(gi, ti)| gi - s * ti).collect()
}

/// Newton projection of a unit vector onto `{Q = 0}` along the sphere.
fn project_to_cone(a: &DMatrix<f64>, theta: &mut Vec<f64>) -> bool {
    for _ in 0..50 {
        let q = q_eval(a, theta);
        if q.abs() < 1e-15 {
            return true;
        }
        let g = tangential(theta, &q_grad(a, theta));
        let gg = dot(&g, &g);
        if gg == 0.0 {
            return false;
        }
        for (t, gi) in theta.iter_mut().zip(&g) {
            *t -= q * gi / gg;
        }
        let nn = norm(theta);
        theta.iter_mut().for_each(|t| *t /= nn);
    }
    q_eval(a, theta).abs() < 1e-12
}

struct Split {
    a: f64,
    b: f64,
    pos: DMatrix<f64>,
    neg: DMatrix<f64>,
}

fn classify(q: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let e = SymmetricEigen::new(q.clone());
    let scale = e.eigenvalues.amax().max(f64::MIN_POSITIVE);
    if let Some(v) = e.eigenvalues.iter().find(|v| v.abs() < 1e-12 * scale) {
        return Err(Error::Degenerate(*v));
    }
    if e.eigenvalues.iter().all(|v| *v > 0.0) || e.eigenvalues.iter().all(|v| *v < 0.0) {
        return Err(Error::EmptyCone);
    }
    Ok((e.eigenvalues.iter().copied().collect(), e.eigenvectors))
}

fn block_split(q: &DMatrix<f64>) -> Result<Split> {
    let (ev, vecs) = classify(q)?;
    let pos: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] > 0.0).collect();
    let neg: Vec<usize> = (0..ev.len()).filter(|&i| ev[i] < 0.0).collect();
    let a = ev[pos[0]];
    let b = -ev[neg[0]];
    let uniform = pos.iter().all(|&i| (ev[i] - a).abs() <= 1e-9 * a) && neg.iter().all(|&i| (-ev[i] - b).abs() <= 1e-9 * b);
    if !uniform {
        return Err(Error::NotBlockUniform);
    }
    let cols = |ix: &[usize]| DMatrix::from_fn(q.nrows(), ix.len(), |r, c| vecs[(r, ix[c])]);
    Ok(Split { a, b, pos: cols(&pos), neg: cols(&neg) })
}

/// Points of a sphere factor: a uniform angle grid on circles, both points
/// of S⁰, else seeded uniform draws.
fn factor_points(m: usize, count: usize, rng: &mut ChaCha8Rng) -> (Vec<Vec<f64>>, bool) {
    match m {
        1 => (vec![vec![1.0], vec![-1.0]], false),
        2 => ((0..count).map(|i| {
            let a = 2.0 * PI * (i as f64 + 0.5) / count as f64;
            vec![a.cos(), a.sin()]
        })
        .collect(), false),
        _ => ((0..count)
            .map(|_| {
                let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(rng)).collect();
                let nn = norm(&g);
                g.iter().map(|x| x / nn).collect()
            })
            .collect(), true),
    }
}

/// Total Liouville mass of the cone for a block-uniform form, in closed form.
pub fn product_mass(q: &DMatrix<f64>) -> Result<f64> {
    let s = block_split(q)?;
    let (m1, m2) = (s.pos.ncols(), s.neg.ncols());
    let ru = (s.b / (s.a + s.b)).sqrt();
    let rv = (s.a / (s.a + s.b)).sqrt();
    let area = sphere_area(m1) * ru.powi(m1 as i32 - 1) * sphere_area(m2) * rv.powi(m2 as i32 - 1);
    Ok(area / (2.0 * (s.a * s.b).sqrt()))
}

pub fn cone_samples(q: &DMatrix<f64>, n: usize, seed: u64, method: ConeMethod) -> Result<ConeSamples> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be positive".into()));
    }
    match method {
        ConeMethod::Product => {
            let s = block_split(q)?;
            let mass = product_mass(q)?;
            let (m1, m2) = (s.pos.ncols(), s.neg.ncols());
            let ru = (s.b / (s.a + s.b)).sqrt();
            let rv = (s.a / (s.a + s.b)).sqrt();
            let side = (n as f64).sqrt().ceil() as usize;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (us, r1) = factor_points(m1, side, &mut rng);
            let (vs, r2) = factor_points(m2, side, &mut rng);
            let count = us.len() * vs.len();
            let w = mass / count as f64;
            let mut samples = Vec::with_capacity(count);
            for u in &us {
                for v in &vs {
                    let mut th = vec![0.0; q.nrows()];
                    for r in 0..q.nrows() {
                        th[r] = ru * (0..m1).map(|c| s.pos[(r, c)] * u[c]).sum::<f64>()
                            + rv * (0..m2).map(|c| s.neg[(r, c)] * v[c]).sum::<f64>();
                    }
                    samples.push(ConeSample { theta: th, weight: w });
                }
            }
            Ok(ConeSamples { samples, n_drawn: count, seed, method, random: r1 || r2 })
        }
        ConeMethod::MonteCarlo { shell } => {
            classify(q)?;
            if shell <= 0.0 {
                return Err(Error::InvalidArgument("shell width must be positive".into()));
            }
            let m = q.nrows();
            let w = sphere_area(m) / (n as f64 * 2.0 * shell);
            let chunks = n.div_ceil(CHUNK);
            let parts: Vec<Vec<ConeSample>> = (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    rng.set_stream(c as u64);
                    let count = CHUNK.min(n - c * CHUNK);
                    let mut out = Vec::new();
                    for _ in 0..count {
                        let g: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
                        let nn = norm(&g);
                        let mut th: Vec<f64> = g.iter().map(|x| x / nn).collect();
                        if q_eval(q, &th).abs() < shell && project_to_cone(q, &mut th) {
                            out.push(ConeSample { theta: th, weight: w });
                        }
                    }
                    out
                })
                .collect();
            Ok(ConeSamples { samples: parts.into_iter().flatten().collect(), n_drawn: n, seed, method, random: true })
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Regularization {
    None,
    /// `|f|^{−α}`
    AbsPower(f64),
    /// `(f + i0)^{−α}`: `|f|^{−α}` for `f > 0`, `|f|^{−α}e^{−iπα}` for `f < 0`.
    I0Power(f64),
}

/// Samples with `|f|` below this are excluded from power regularizations.
pub const ZERO_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeIntegral {
    pub value: Complex64,
    /// Monte Carlo standard error (0 for grid quadrature).
    pub std_error: f64,
    /// Liouville mass of the excluded set `{|f| < ε}`.
    pub excluded_mass: f64,
    /// Liouville mass of `{|f| < 100ε}`.
    pub excluded_mass_wide: f64,
    /// `log(mass(100ε)/mass(ε))/log 100`; 1 for transversal zeros.
    pub exclusion_exponent: Option<f64>,
    /// Bound on the dropped contribution, `mass(ε)·ε^{−α}`.
    pub dropped_bound: f64,
    pub converged: bool,
}

pub fn cone_integral(f: &(dyn Fn(&[f64]) -> f64 + Sync), samples: &ConeSamples, reg: Regularization) -> Result<ConeIntegral> {
    let alpha = match reg {
        Regularization::None => 0.0,
        Regularization::AbsPower(a) | Regularization::I0Power(a) => a,
    };
    let vals: Vec<f64> = samples.samples.par_iter().map(|s| f(&s.theta)).collect();
    let fmax = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut sum = Complex64::new(0.0, 0.0);
    let mut sum_sq = 0.0;
    let mut excl = 0.0;
    let mut excl_wide = 0.0;
    let phase = Complex64::from_polar(1.0, -PI * alpha);
    for (s, &v) in samples.samples.iter().zip(&vals) {
        let h = match reg {
            Regularization::None => Complex64::new(v, 0.0),
            _ if alpha == 0.0 => Complex64::new(1.0, 0.0),
            _ => {
                if v.abs() < 100.0 * ZERO_FLOOR {
                    excl_wide += s.weight;
                }
                if v.abs() < ZERO_FLOOR {
                    excl += s.weight;
                    continue;
                }
                let m = v.abs().powf(-alpha);
                match reg {
                    Regularization::I0Power(_) if v < 0.0 => phase * m,
                    _ => Complex64::new(m, 0.0),
                }
            }
        };
        sum += h * s.weight;
        sum_sq += s.weight * s.weight * h.norm_sqr();
    }
    let std_error = if samples.random {
        (sum_sq - sum.norm_sqr() / samples.n_drawn as f64).max(0.0).sqrt()
    } else {
        0.0
    };
    let near_zero = vals.iter().any(|v| v.abs() < 1e-3 * fmax);
    if alpha >= 1.0 && near_zero {
        return Err(Error::Divergent(format!("exponent {alpha} ≥ 1 with zeros of f on the cone")));
    }
    let exclusion_exponent = (excl > 0.0 && excl_wide > 0.0).then(|| (excl_wide / excl).ln() / 100f64.ln());
    let dropped_bound = if alpha > 0.0 { excl * ZERO_FLOOR.powf(-alpha) } else { 0.0 };
    let converged = alpha < 1.0
        && (excl == 0.0 || exclusion_exponent.map(|e| e > 1.0 - alpha).unwrap_or(true))
        && dropped_bound <= 1e-2 * sum.norm().max(1e-300) + 3.0 * std_error;
    Ok(ConeIntegral { value: sum, std_error, excluded_mass: excl, excluded_mass_wide: excl_wide, exclusion_exponent, dropped_bound, converged })
}

/// The same integral with the shell halved, for the Monte Carlo method.
pub fn shell_halving(
    q: &DMatrix<f64>,
    f: &(dyn Fn(&[f64]) -> f64 + Sync),
    n: usize,
    seed: u64,
    shell: f64,
    reg: Regularization,
) -> Result<(ConeIntegral, ConeIntegral)> {
    let a = cone_integral(f, &cone_samples(q, n, seed, ConeMethod::MonteCarlo { shell })?, reg)?;
    let b = cone_integral(f, &cone_samples(q, n, seed, ConeMethod::MonteCarlo { shell: 0.5 * shell })?, reg)?;
    Ok((a, b))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeZero {
    pub theta: Vec<f64>,
    pub residual: f64,
    /// `‖∇_S Q ∧ ∇_S R‖`.
    pub margin: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeGeometryReport {
    pub n_samples: usize,
    pub r_min: f64,
    pub r_max: f64,
    pub positive: usize,
    pub negative: usize,
    pub intersection_empty: bool,
    pub zeros: Vec<ConeZero>,
    pub min_margin: Option<f64>,
    pub transversal: bool,
}

impl ConeGeometryReport {
    /// Sign of `R` on the cone when it does not change.
    pub fn constant_sign(&self) -> Option<i32> {
        if self.negative == 0 && self.positive > 0 {
            Some(1)
        } else if self.positive == 0 && self.negative > 0 {
            Some(-1)
        } else {
            None
        }
    }
}

fn polish(q: &DMatrix<f64>, r: &HomogForm, seed: &[f64]) -> Option<ConeZero> {
    let mut th = seed.to_vec();
    for _ in 0..60 {
        let f = [q_eval(q, &th), r.eval(&th), dot(&th, &th) - 1.0];
        let res = f.iter().map(|x| x.abs()).fold(0.0, f64::max);
        if res < 1e-14 {
            break;
        }
        let gq = q_grad(q, &th);
        let gr = r.gradient(&th);
        let m = th.len();
        let jac = DMatrix::from_fn(3, m, |i, j| match i {
            0 => gq[j],
            1 => gr[j],
            _ => 2.0 * th[j],
        });
        let jjt = &jac * jac.transpose();
        let step = jjt.lu().solve(&DVector::from_column_slice(&f))?;
        let dx = jac.transpose() * step;
        for (t, d) in th.iter_mut().zip(dx.iter()) {
            *t -= d;
        }
    }
    let res = [q_eval(q, &th), r.eval(&th), dot(&th, &th) - 1.0].iter().map(|x| x.abs()).fold(0.0, f64::max);
    if res > 1e-10 {
        return None;
    }
    let a = tangential(&th, &q_grad(q, &th));
    let b = tangential(&th, &r.gradient(&th));
    let margin = (dot(&a, &a) * dot(&b, &b) - dot(&a, &b).powi(2)).max(0.0).sqrt();
    Some(ConeZero { theta: th, residual: res, margin })
}

/// Sign pattern of `R` on the cone, polished common zeros, and the
/// transversality margin at those zeros.
pub fn check_cone_geometry(q: &DMatrix<f64>, r: &HomogForm, n: usize, seed: u64) -> Result<ConeGeometryReport> {
    let samples = match cone_samples(q, n, seed, ConeMethod::Product) {
        Ok(s) => s,
        Err(Error::NotBlockUniform) => cone_samples(q, n.max(10_000) * 10, seed, ConeMethod::MonteCarlo { shell: DEFAULT_SHELL })?,
        Err(e) => return Err(e),
    };
    let vals: Vec<f64> = samples.samples.iter().map(|s| r.eval(&s.theta)).collect();
    let r_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let r_max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let positive = vals.iter().filter(|v| **v > 0.0).count();
    let negative = vals.iter().filter(|v| **v < 0.0).count();
    let scale = r_min.abs().max(r_max.abs());
    let sign_change = positive > 0 && negative > 0 || vals.iter().any(|v| v.abs() <= 1e-12 * scale);
    let mut zeros: Vec<ConeZero> = Vec::new();
    if sign_change {
        let mut order: Vec<usize> = (0..vals.len()).collect();
        order.sort_by(|&i, &j| vals[i].abs().total_cmp(&vals[j].abs()));
        for &i in order.iter().take(200) {
            if let Some(z) = polish(q, r, &samples.samples[i].theta) {
                if zeros.iter().all(|o| o.theta.iter().zip(&z.theta).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() > 1e-6) {
                    zeros.push(z);
                }
            }
        }
    }
    let min_margin = zeros.iter().map(|z| z.margin).reduce(f64::min);
    let transversal = min_margin.map(|m| m > 1e-6).unwrap_or(true);
    Ok(ConeGeometryReport {
        n_samples: vals.len(),
        r_min,
        r_max,
        positive,
        negative,
        intersection_empty: !sign_change,
        zeros,
        min_margin,
        transversal,
    })
}
