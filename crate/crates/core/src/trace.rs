//! Leading coefficients of the trace `Σ φ((λ_j − E_c)/h)` at a period `T` of
//! the linearized flow, in the definite case (`Q_T` definite) and the
//! indefinite case (cone integral of `R_k`).

use crate::error::{Error, Result};
use crate::numerics::quad::{gauss_legendre, gl_panels};
use crate::numerics::{gamma, Series};
use crate::oscillatory::{pair_distribution, Distribution, Jet1, Profile};
use crate::periods::{find_periods, fixed_blocks, PeriodRecord};
use crate::rk_cone::{
    check_cone_geometry, cone_integral, cone_samples, ConeGeometryReport, ConeIntegral, ConeMethod, HomogForm,
    Regularization, DEFAULT_SHELL,
};
use crate::symbol::{BlockType, CriticalData};
use num_complex::Complex64;
use num_rational::Rational64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

/// Tabulation step and range of `g(x) = ∫ b(v) cos(xv) dv`.
const PSI_STEP: f64 = 0.1;
const PSI_XMAX: f64 = 1200.0;

/// `φ̂(t) = c·exp(−u²/(1 − u²))`, `u = (t − T)/δ`, and its inverse transform
/// `φ(s) = (1/2π)∫ φ̂(t) e^{its} dt = e^{iTs} ψ(s)`.
#[derive(Debug, Serialize, Deserialize)]
pub struct TestFunction {
    pub center: f64,
    pub delta: f64,
    pub scale: f64,
    #[serde(skip)]
    table: OnceLock<Vec<(f64, f64)>>,
}

impl Clone for TestFunction {
    fn clone(&self) -> Self {
        TestFunction { center: self.center, delta: self.delta, scale: self.scale, table: self.table.clone() }
    }
}

fn bump(v: f64) -> f64 {
    if v.abs() >= 1.0 {
        0.0
    } else {
        (-v * v / (1.0 - v * v)).exp()
    }
}

/// `(∫ b(v) cos(xv) dv, −∫ v b(v) sin(xv) dv)` over `[−1, 1]`.
fn g_and_derivative(x: f64) -> (f64, f64) {
    let panels = ((x.abs() / PI).ceil() as usize + 4).max(8);
    let g = gl_panels(&|v: f64| bump(v) * (x * v).cos(), -1.0, 1.0, panels);
    let dg = gl_panels(&|v: f64| -v * bump(v) * (x * v).sin(), -1.0, 1.0, panels);
    (g, dg)
}

impl TestFunction {
    pub fn new(center: f64, delta: f64) -> Result<Self> {
        if !(delta > 0.0) || !center.is_finite() {
            return Err(Error::InvalidArgument(format!("test function needs δ > 0 (got {delta})")));
        }
        Ok(TestFunction { center, delta, scale: 1.0, table: OnceLock::new() })
    }

    pub fn scaled(&self, c: f64) -> Self {
        TestFunction { scale: self.scale * c, ..self.clone() }
    }

    pub fn support(&self) -> (f64, f64) {
        (self.center - self.delta, self.center + self.delta)
    }

    pub fn hat(&self, t: f64) -> f64 {
        self.scale * bump((t - self.center) / self.delta)
    }

    pub fn hat_jet(&self, t: f64, order: usize) -> Series<f64> {
        // e^{−u²/(1−u²)} = e^{1 − 1/(1−u²)}
        Profile::Bump { center: self.center, half_width: self.delta }.jet(t, order).scale(self.scale)
    }

    fn table(&self) -> &Vec<(f64, f64)> {
        self.table.get_or_init(|| {
            let n = (PSI_XMAX / PSI_STEP).round() as usize;
            (0..=n).into_par_iter().map(|i| g_and_derivative(i as f64 * PSI_STEP)).collect()
        })
    }

    /// `ψ(s)` by direct quadrature.
    pub fn psi_direct(&self, s: f64) -> f64 {
        self.scale * self.delta / (2.0 * PI) * g_and_derivative(self.delta * s).0
    }

    /// `ψ(s)` from the cubic Hermite table, direct quadrature beyond it.
    pub fn psi(&self, s: f64) -> f64 {
        let x = (self.delta * s).abs();
        if x >= PSI_XMAX {
            return self.psi_direct(s);
        }
        let tab = self.table();
        let i = (x / PSI_STEP).floor() as usize;
        let h = PSI_STEP;
        let u = (x - i as f64 * h) / h;
        let (g0, d0) = tab[i];
        let (g1, d1) = tab[i + 1];
        let h00 = (1.0 + 2.0 * u) * (1.0 - u).powi(2);
        let h10 = u * (1.0 - u).powi(2);
        let h01 = u * u * (3.0 - 2.0 * u);
        let h11 = u * u * (u - 1.0);
        let g = h00 * g0 + h10 * h * d0 + h01 * g1 + h11 * h * d1;
        self.scale * self.delta / (2.0 * PI) * g
    }

    pub fn phi(&self, s: f64) -> Complex64 {
        Complex64::from_polar(self.psi(s), self.center * s)
    }
}

/// `|det(I − dΦ_t(z₀))|^{1/2} = Π 2|sin(w_j t/2)| · Π 2|sinh(w_j t/2)|`.
pub fn det_factor(cd: &CriticalData, t: f64) -> f64 {
    cd.w.iter()
        .zip(&cd.sigma)
        .map(|(w, s)| match s {
            BlockType::Elliptic => 2.0 * (w * t / 2.0).sin().abs(),
            BlockType::Hyperbolic => 2.0 * (w * t / 2.0).sinh().abs(),
        })
        .product()
}

/// Number of blocks fixed by `dΦ_t`; equals `n` (total degeneracy) at `t = 0`.
pub fn degeneracy_order(cd: &CriticalData, t: f64) -> usize {
    if t == 0.0 {
        return cd.n();
    }
    fixed_blocks(cd, t, 1e-9).len()
}

/// Taylor series of `sinc(x) = sin x / x` for a series argument.
fn sinc_series(x: &Series<f64>) -> Series<f64> {
    // sinc x = ∫₀¹ cos(xs) ds, exact for the arguments used here with 20 nodes
    let (nodes, weights) = gauss_legendre(20);
    let mut acc = Series::constant(0.0, x.order());
    for (s, w) in nodes.iter().zip(&weights) {
        let si = 0.5 * (s + 1.0);
        let (_, c) = x.scale(si).sin_cos();
        acc = &acc + &c.scale(0.5 * w);
    }
    acc
}

/// Jet in `t` of `|t − T|^{d_T}/|det(I − dΦ_t)|^{1/2}`, smooth through `t = T`.
fn ratio_series(cd: &CriticalData, period: &PeriodRecord, t: f64, order: usize) -> Result<Series<f64>> {
    let tt = Series::variable(t, order);
    let u = tt.add_const(-period.t);
    let mut acc = Series::constant(1.0, order);
    for j in 0..cd.n() {
        let w = cd.w[j].abs();
        let f = if period.blocks.contains(&j) {
            sinc_series(&u.scale(w / 2.0)).scale(w).recip()
        } else {
            let half = tt.scale(w / 2.0);
            let s = match cd.sigma[j] {
                BlockType::Elliptic => half.sin_cos().0,
                BlockType::Hyperbolic => half.sinh_cosh().0,
            };
            if s.value().abs() < 1e-12 {
                return Err(Error::Hypothesis(format!("block {j} is also fixed at t = {t}")));
            }
            s.scale(2.0 * s.value().signum()).recip()
        };
        acc = &acc * &f;
    }
    Ok(acc)
}

/// Continuous extension of `|t − T|^{d_T}/|det(I − dΦ_t)|^{1/2}` through `t = T`.
pub fn regularized_ratio(cd: &CriticalData, period: &PeriodRecord, t: f64) -> Result<f64> {
    Ok(ratio_series(cd, period, t, 0)?.value())
}

/// `φ̂(T)·e^{iTp¹(z₀)}`.
pub fn amplitude_at_period(phi: &TestFunction, t: f64, p1: f64) -> Complex64 {
    Complex64::from_polar(phi.hat(t), t * p1)
}

/// `ρ(t) φ̂(t) e^{itp¹}` with exact jets.
struct PairingIntegrand<'a> {
    cd: &'a CriticalData,
    period: &'a PeriodRecord,
    phi: &'a TestFunction,
    p1: f64,
}

impl Jet1 for PairingIntegrand<'_> {
    fn jet(&self, t: f64, order: usize) -> Vec<Complex64> {
        let (a, b) = self.phi.support();
        if t <= a || t >= b {
            return vec![Complex64::new(0.0, 0.0); order + 1];
        }
        let rho = ratio_series(self.cd, self.period, t, order).expect("single period in the support");
        let real = &rho * &self.phi.hat_jet(t, order);
        let e0 = Complex64::from_polar(1.0, self.p1 * t);
        let ip = Complex64::new(0.0, self.p1);
        let mut ec = Vec::with_capacity(order + 1);
        let mut term = e0;
        for j in 0..=order {
            ec.push(term);
            term = term * ip / (j as f64 + 1.0);
        }
        let ex = Series::new(ec);
        (&real.to_complex() * &ex).c
    }

    fn support(&self) -> (f64, f64) {
        self.phi.support()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Branch {
    /// `Q_T` definite.
    Definite,
    /// `Q_T` indefinite, leading term from the cone integral of `R_k`.
    Indefinite,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct TraceReport {
    pub period: PeriodRecord,
    pub branch: Branch,
    pub c_t: Option<Complex64>,
    pub lambda_t: Option<Complex64>,
    pub mu_k: Option<Complex64>,
    /// `μ_k` with `Γ((n−2)/k)` in place of `Γ((2d_T−2)/k)`; `None` at a pole.
    pub mu_k_alt: Option<Complex64>,
    pub k_t: Option<Complex64>,
    pub k: Option<usize>,
    pub cone: Option<ConeIntegral>,
    pub geometry: Option<ConeGeometryReport>,
    /// The leading term is `h^{exponent} · leading_coefficient`.
    pub exponent: Rational64,
    pub leading_coefficient: Complex64,
    /// `φ̂(T) e^{iTp¹(z₀)}`.
    pub amplitude: Complex64,
    pub cone_intersection_empty: Option<bool>,
    /// Empty complement: `det q_T = 1`, `sgn q_T = 0` by convention.
    pub complement_empty: bool,
    /// The clean-intersection hypothesis on the far orbits is assumed, not checked.
    pub far_orbits_assumed: bool,
}

impl TraceReport {
    pub fn leading_value(&self, h: f64) -> Complex64 {
        self.leading_coefficient * h.powf(*self.exponent.numer() as f64 / *self.exponent.denom() as f64)
    }
}

fn check_support(cd: &CriticalData, period: &PeriodRecord, phi: &TestFunction) -> Result<()> {
    let (a, b) = phi.support();
    let others: Vec<f64> = find_periods(cd, a.max(0.0), b, 1e-10)?
        .into_iter()
        .map(|p| p.t)
        .filter(|t| (t - period.t).abs() > 1e-9 * period.t.abs().max(1.0))
        .collect();
    if !others.is_empty() || (a <= 0.0 && b >= 0.0) {
        return Err(Error::Hypothesis(format!("supp φ̂ = [{a}, {b}] contains another period ({others:?} or 0)")));
    }
    Ok(())
}

/// `−½ e^{iπ sgn q_T/4} |det q_T|^{−1/2} e^{iπ(d_T−1)ε/2} Γ(d_T)` with `ε = ±1`
/// the sign of the definite form `Q_T`.
pub fn theorem1_constant(period: &PeriodRecord) -> Result<Complex64> {
    let eps = period.definite_sign().ok_or_else(|| Error::Hypothesis("Q_T is indefinite".into()))?;
    let d = period.d_t as f64;
    let g = gamma(d).expect("d_T ≥ 1");
    let phase = PI * period.sgn_qt as f64 / 4.0 + PI * (d - 1.0) * eps as f64 / 2.0;
    Ok(Complex64::from_polar(-0.5 * g / period.det_qt.abs().sqrt(), phase))
}

pub fn theorem1(cd: &CriticalData, period: &PeriodRecord, phi: &TestFunction, p1: f64) -> Result<TraceReport> {
    let c_t = theorem1_constant(period)?;
    check_support(cd, period, phi)?;
    let d = period.d_t as u32;
    let f = PairingIntegrand { cd, period, phi, p1 };
    let pairing = pair_distribution(&Distribution::MinusI0 { m: d, center: period.t }, &f)?;
    let lambda_t = pairing * (2.0 * PI).powi(-1 - d as i32);
    Ok(TraceReport {
        period: period.clone(),
        branch: Branch::Definite,
        c_t: Some(c_t),
        lambda_t: Some(lambda_t),
        mu_k: None,
        mu_k_alt: None,
        k_t: None,
        k: None,
        cone: None,
        geometry: None,
        exponent: Rational64::from_integer(0),
        leading_coefficient: c_t * lambda_t,
        amplitude: amplitude_at_period(phi, period.t, p1),
        cone_intersection_empty: None,
        complement_empty: period.complement_empty,
        far_orbits_assumed: true,
    })
}

/// `μ_k = −(1/k) Γ(a) e^{iπ sgn q_T/4} / (|det q_T|^{1/2} (2π)^{d_T+1})`.
pub fn mu_k(period: &PeriodRecord, k: usize, gamma_arg: f64) -> Option<Complex64> {
    let g = gamma(gamma_arg)?;
    let d = period.d_t as i32;
    Some(Complex64::from_polar(
        -g / (k as f64 * period.det_qt.abs().sqrt() * (2.0 * PI).powi(d + 1)),
        PI * period.sgn_qt as f64 / 4.0,
    ))
}

#[derive(Clone, Copy, Debug)]
pub struct ConeOptions {
    pub samples: usize,
    pub seed: u64,
    pub method: Option<ConeMethod>,
}

impl Default for ConeOptions {
    fn default() -> Self {
        ConeOptions { samples: 200_000, seed: 1, method: None }
    }
}

pub fn theorem2(
    cd: &CriticalData,
    period: &PeriodRecord,
    r: &HomogForm,
    phi: &TestFunction,
    p1: f64,
    opts: ConeOptions,
) -> Result<TraceReport> {
    if period.definite_sign().is_some() {
        return Err(Error::Hypothesis("Q_T is definite; the leading term is the definite-case one".into()));
    }
    if cd.n() < 2 {
        return Err(Error::Hypothesis("n ≥ 2 required".into()));
    }
    if r.dim != 2 * period.d_t {
        return Err(Error::DimensionMismatch { expected: 2 * period.d_t, got: r.dim });
    }
    check_support(cd, period, phi)?;
    let k = r.degree;
    let d = period.d_t;
    let geometry = check_cone_geometry(&period.q_t, r, opts.samples.min(20_000), opts.seed)?;
    if !geometry.intersection_empty && !geometry.transversal {
        return Err(Error::Hypothesis(format!(
            "∇Q_T and ∇R_k are not independent on the common zeros (margin {:?})",
            geometry.min_margin
        )));
    }
    let method = match opts.method {
        Some(m) => m,
        None => match cone_samples(&period.q_t, 4, opts.seed, ConeMethod::Product) {
            Ok(_) => ConeMethod::Product,
            Err(Error::NotBlockUniform) => ConeMethod::MonteCarlo { shell: DEFAULT_SHELL },
            Err(e) => return Err(e),
        },
    };
    let samples = cone_samples(&period.q_t, opts.samples, opts.seed, method)?;
    let beta = (2.0 * d as f64 - 2.0) / k as f64;
    let rr = r.clone();
    let (reg, phase) = match geometry.constant_sign() {
        Some(s) if geometry.intersection_empty => (Regularization::AbsPower(beta), PI * (d as f64 - 1.0) * s as f64 / k as f64),
        _ => (Regularization::I0Power(beta), PI * (d as f64 - 1.0) / k as f64),
    };
    let cone = cone_integral(&move |y| rr.eval(y), &samples, reg)?;
    let mu = mu_k(period, k, beta).ok_or_else(|| Error::Branch(format!("Γ pole at {beta}")))?;
    let mu_alt = mu_k(period, k, (cd.n() as f64 - 2.0) / k as f64);
    let k_t = mu * Complex64::from_polar(1.0, phase) * cone.value;
    let exponent = Rational64::new((2 * d + k - 2) as i64, k as i64) - Rational64::from_integer(d as i64);
    let amplitude = amplitude_at_period(phi, period.t, p1);
    Ok(TraceReport {
        period: period.clone(),
        branch: Branch::Indefinite,
        c_t: None,
        lambda_t: None,
        mu_k: Some(mu),
        mu_k_alt: mu_alt,
        k_t: Some(k_t),
        k: Some(k),
        cone_intersection_empty: Some(geometry.intersection_empty),
        cone: Some(cone),
        geometry: Some(geometry),
        exponent,
        leading_coefficient: k_t * amplitude,
        amplitude,
        complement_empty: period.complement_empty,
        far_orbits_assumed: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::numerics::quad::{integrate, QuadOpts};
    use crate::periods::restrict_forms;
    use crate::symbol::BlockType::{Elliptic, Hyperbolic};

    #[test]
    fn psi_table_matches_direct() {
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap();
        for s in [0.0, 0.37, 3.14, 17.05, 250.3, 1999.9] {
            let a = phi.psi(s);
            let b = phi.psi_direct(s);
            assert!((a - b).abs() < 1e-8 * phi.psi_direct(0.0), "s={s}: {a} vs {b}");
        }
        // adaptive quadrature check of the tabulated integrand
        let x = 40.0;
        let g = |v: f64| bump(v) * (x * v).cos();
        let r = integrate(&g, -1.0, 1.0, &[], QuadOpts::default()).unwrap().0;
        assert!((r - g_and_derivative(x).0).abs() < 1e-12);
    }

    #[test]
    fn phi_decays_fast() {
        let phi = TestFunction::new(0.0, 0.5).unwrap();
        let c0 = phi.psi(0.0).abs();
        let weighted: Vec<f64> = [50.0f64, 200.0, 800.0, 3000.0].iter().map(|s| phi.psi(*s).abs() / c0 * (1.0 + s).powi(4)).collect();
        assert!(weighted.windows(2).all(|w| w[1] < w[0]), "{weighted:?}");
        assert!(phi.psi(10_000.0).abs() < 1e-12 * c0);
    }

    #[test]
    fn ratio_tends_to_one_for_example1() {
        let h = fixtures::example1();
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        assert!((regularized_ratio(&h.critical, &p, 2.0 * PI).unwrap() - 1.0).abs() < 1e-15);
        for dt in [1e-3, 0.2, -0.3] {
            let t = 2.0 * PI + dt;
            let direct = dt.abs().powi(2) / det_factor(&h.critical, t);
            assert!((regularized_ratio(&h.critical, &p, t).unwrap() - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn det_factor_cases() {
        let h = fixtures::quadratic(&[1.0, 2.0], &[Elliptic, Hyperbolic]);
        assert!(det_factor(&h.critical, 0.7) > 0.0);
        assert_eq!(degeneracy_order(&h.critical, 0.0), 2);
        assert_eq!(det_factor(&h.critical, 0.0), 0.0);
    }

    #[test]
    fn theorem1_constant_example() {
        // elliptic w = 1 fixed at 2π, hyperbolic w = 2 complement: q_T = diag(2, −2)
        let h = fixtures::quadratic(&[1.0, 2.0], &[Elliptic, Hyperbolic]);
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let c = theorem1_constant(&p).unwrap();
        assert!((c - Complex64::new(-0.25, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn theorem1_pairing_vs_epsilon_limit() {
        let h = fixtures::quadratic(&[1.0, 2.0], &[Elliptic, Hyperbolic]);
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let phi = TestFunction::new(2.0 * PI + 0.1, 0.6).unwrap();
        let rep = theorem1(&h.critical, &p, &phi, 0.3).unwrap();
        let f = PairingIntegrand { cd: &h.critical, period: &p, phi: &phi, p1: 0.3 };
        let reg = |eps: f64| {
            let g = |t: f64| f.value(t) / Complex64::new(t - p.t, -eps);
            let (a, b) = phi.support();
            integrate(&g, a, b, &[p.t], QuadOpts { abs_tol: 1e-14, rel_tol: 1e-13, max_segments: 100_000 }).unwrap().0
        };
        let extrap = (reg(5e-4) * 8.0 - reg(1e-3) * 6.0 + reg(2e-3)) * (1.0 / 3.0);
        let lam = extrap * (2.0 * PI).powi(-2);
        let got = rep.lambda_t.unwrap();
        assert!((lam - got).norm() < 1e-4 * got.norm(), "{lam} vs {got}");
    }

    #[test]
    fn vanishing_test_function_gives_zero() {
        let h = fixtures::quadratic(&[1.0, 2.0], &[Elliptic, Hyperbolic]);
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap().scaled(0.0);
        let rep = theorem1(&h.critical, &p, &phi, 0.0).unwrap();
        assert_eq!(rep.leading_coefficient, Complex64::new(0.0, 0.0));
        assert_eq!(amplitude_at_period(&phi, 2.0 * PI, 1.0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn branch_exclusivity() {
        let h = fixtures::example1();
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap();
        assert!(theorem1(&h.critical, &p, &phi, 0.0).is_err());
        let q = fixtures::quadratic(&[1.0, 2.0], &[Elliptic, Hyperbolic]);
        let pq = restrict_forms(&q.critical, 2.0 * PI, 1e-10).unwrap();
        let r = HomogForm::new(4, crate::numerics::Poly::monomial(vec![4, 0], 1.0)).unwrap();
        assert!(theorem2(&q.critical, &pq, &r, &phi, 0.0, ConeOptions::default()).is_err());
    }

    #[test]
    fn example1_mu4_and_exponent() {
        let h = fixtures::example1();
        let p = restrict_forms(&h.critical, 2.0 * PI, 1e-10).unwrap();
        let mu = mu_k(&p, 4, 0.5).unwrap();
        assert!((mu - Complex64::new(-0.25 * PI.sqrt() / (2.0 * PI).powi(3), 0.0)).norm() < 1e-16);
        let r = crate::rk_cone::rk_via_jets(&h.symbol, &h.critical, &p, 4, 1e-12).unwrap();
        let phi = TestFunction::new(2.0 * PI, 0.5).unwrap();
        let rep = theorem2(&h.critical, &p, &r, &phi, 0.0, ConeOptions { samples: 40_000, ..Default::default() }).unwrap();
        assert_eq!(rep.exponent, Rational64::new(-1, 2));
        assert_eq!(rep.cone_intersection_empty, Some(true));
        assert!(rep.mu_k_alt.is_none());
    }
}
