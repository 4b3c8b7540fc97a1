//! Separable amplitudes with exact Taylor jets.

use crate::error::{Error, Result};
use crate::numerics::Series;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use std::sync::Arc;

/// One-variable building block of an amplitude.
#[derive(Clone)]
pub enum Profile {
    /// `exp(1 − 1/(1 − u²))`, `u = (x − center)/half_width`; equals 1 at the center.
    Bump { center: f64, half_width: f64 },
    /// Even, identically 1 on `|x| ≤ flat`, 0 beyond `flat + ramp`.
    Plateau { flat: f64, ramp: f64 },
    /// `exp(−(x − center)²/(2σ²))`.
    Gaussian { center: f64, sigma: f64 },
    /// `x^p`.
    Monomial(u32),
    /// Any smooth function; jets by finite differences.
    Custom { f: Arc<dyn Fn(f64) -> f64 + Send + Sync>, support: (f64, f64) },
}

impl std::fmt::Debug for Profile {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Profile::Bump { center, half_width } => write!(f, "Bump({center}, {half_width})"),
            Profile::Plateau { flat, ramp } => write!(f, "Plateau({flat}, {ramp})"),
            Profile::Gaussian { center, sigma } => write!(f, "Gaussian({center}, {sigma})"),
            Profile::Monomial(p) => write!(f, "Monomial({p})"),
            Profile::Custom { support, .. } => write!(f, "Custom{support:?}"),
        }
    }
}

/// Gaussian tails are cut where the profile drops below `e^{−72}`.
const GAUSS_CUT: f64 = 12.0;
/// Step used for finite-difference jets of custom profiles.
pub const FD_TOL: f64 = 1e-10;

fn psi(y: &Series<f64>) -> Series<f64> {
    // e^{−1/y}, y > 0
    y.recip().scale(-1.0).exp()
}

/// Smooth step: 1 at y ≤ 0, 0 at y ≥ 1.
fn smooth_step(y: &Series<f64>) -> Series<f64> {
    let n = y.order();
    if y.value() <= 0.0 {
        return Series::constant(1.0, n);
    }
    if y.value() >= 1.0 {
        return Series::constant(0.0, n);
    }
    let a = psi(&y.scale(-1.0).add_const(1.0));
    let b = psi(y);
    &a / &(&a + &b)
}

/// Taylor coefficients of `f` at `x` up to `order`, from a polynomial fit on
/// a symmetric stencil with step `tol^{1/(order+2)}`.
pub fn fd_jet(f: &dyn Fn(f64) -> f64, x: f64, order: usize, tol: f64) -> Vec<f64> {
    let h = tol.powf(1.0 / (order as f64 + 2.0));
    let p = order + 2;
    let m = 2 * p + 1;
    let v = DMatrix::from_fn(m, m, |i, j| (i as f64 - p as f64).powi(j as i32));
    let rhs = DVector::from_iterator(m, (0..m).map(|i| f(x + (i as f64 - p as f64) * h)));
    let d = v.lu().solve(&rhs).expect("Vandermonde on distinct nodes");
    (0..=order).map(|j| d[j] / h.powi(j as i32)).collect()
}

impl Profile {
    pub fn support(&self) -> (f64, f64) {
        match self {
            Profile::Bump { center, half_width } => (center - half_width, center + half_width),
            Profile::Plateau { flat, ramp } => (-(flat + ramp), flat + ramp),
            Profile::Gaussian { center, sigma } => (center - GAUSS_CUT * sigma, center + GAUSS_CUT * sigma),
            Profile::Monomial(_) => (f64::NEG_INFINITY, f64::INFINITY),
            Profile::Custom { support, .. } => *support,
        }
    }

    /// Taylor coefficients at `x` up to `order`.
    pub fn jet(&self, x: f64, order: usize) -> Series<f64> {
        let var = Series::variable(x, order);
        match self {
            Profile::Bump { center, half_width } => {
                let u = var.add_const(-center).scale(1.0 / half_width);
                if u.value().abs() >= 1.0 {
                    return Series::constant(0.0, order);
                }
                let s = (&u * &u).scale(-1.0).add_const(1.0);
                s.recip().scale(-1.0).add_const(1.0).exp()
            }
            Profile::Plateau { flat, ramp } => {
                let y = if x >= 0.0 { var.add_const(-flat) } else { var.scale(-1.0).add_const(-flat) };
                smooth_step(&y.scale(1.0 / ramp))
            }
            Profile::Gaussian { center, sigma } => {
                let u = var.add_const(-center).scale(1.0 / sigma);
                (&u * &u).scale(-0.5).exp()
            }
            Profile::Monomial(p) => var.powi(*p),
            Profile::Custom { f, .. } => Series::new(fd_jet(f.as_ref(), x, order, FD_TOL)),
        }
    }

    pub fn value(&self, x: f64) -> f64 {
        match self {
            Profile::Custom { f, .. } => f(x),
            _ => self.jet(x, 0).value(),
        }
    }
}

/// A product of profiles in one variable.
#[derive(Clone, Debug)]
pub struct Factor(pub Vec<Profile>);

impl Factor {
    pub fn one() -> Self {
        Factor(Vec::new())
    }

    pub fn single(p: Profile) -> Self {
        Factor(vec![p])
    }

    pub fn times(mut self, p: Profile) -> Self {
        self.0.push(p);
        self
    }

    pub fn support(&self) -> (f64, f64) {
        self.0.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(a, b), p| {
            let (c, d) = p.support();
            (a.max(c), b.min(d))
        })
    }

    pub fn jet(&self, x: f64, order: usize) -> Series<f64> {
        let (a, b) = self.support();
        if x <= a || x >= b {
            return Series::constant(0.0, order);
        }
        self.0.iter().fold(Series::constant(1.0, order), |acc, p| &acc * &p.jet(x, order))
    }

    pub fn value(&self, x: f64) -> f64 {
        let (a, b) = self.support();
        if x <= a || x >= b {
            return 0.0;
        }
        self.0.iter().map(|p| p.value(x)).product()
    }

    /// `∫ f(t) e^{−itτ} dt`: closed form for a lone Gaussian, else quadrature.
    pub fn fourier(&self, tau: f64) -> Result<Complex64> {
        if let [Profile::Gaussian { center, sigma }] = self.0.as_slice() {
            let m = sigma * (2.0 * std::f64::consts::PI).sqrt() * (-0.5 * (sigma * tau).powi(2)).exp();
            return Ok(Complex64::from_polar(m, -center * tau));
        }
        let (a, b) = self.support();
        if !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument("Fourier transform of a factor without compact support".into()));
        }
        let panels = ((tau.abs() * (b - a) / std::f64::consts::PI).ceil() as usize).max(8);
        let f = |t: f64| Complex64::from_polar(self.value(t), -t * tau);
        let breaks: Vec<f64> = (1..panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect();
        let opts = crate::numerics::quad::QuadOpts { abs_tol: 1e-15, rel_tol: 1e-12, max_segments: 200_000 };
        Ok(crate::numerics::quad::integrate(&f, a, b, &breaks, opts)?.0)
    }
}

/// Test functions on ℝ with complex Taylor jets, as consumed by the
/// distribution pairings.
pub trait Jet1: Sync {
    /// Taylor coefficients at `x` up to `order`.
    fn jet(&self, x: f64, order: usize) -> Vec<Complex64>;
    /// Closed interval outside which the function vanishes.
    fn support(&self) -> (f64, f64);
    fn value(&self, x: f64) -> Complex64 {
        self.jet(x, 0)[0]
    }
}

impl Jet1 for Factor {
    fn jet(&self, x: f64, order: usize) -> Vec<Complex64> {
        Factor::jet(self, x, order).c.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
    }
    fn support(&self) -> (f64, f64) {
        Factor::support(self)
    }
    fn value(&self, x: f64) -> Complex64 {
        Complex64::new(Factor::value(self, x), 0.0)
    }
}

/// A complex function given by value only; jets by finite differences.
pub struct FnJet<F: Fn(f64) -> Complex64 + Sync> {
    pub f: F,
    pub support: (f64, f64),
}

impl<F: Fn(f64) -> Complex64 + Sync> Jet1 for FnJet<F> {
    fn jet(&self, x: f64, order: usize) -> Vec<Complex64> {
        let re = fd_jet(&|s| (self.f)(s).re, x, order, FD_TOL);
        let im = fd_jet(&|s| (self.f)(s).im, x, order, FD_TOL);
        re.into_iter().zip(im).map(|(a, b)| Complex64::new(a, b)).collect()
    }
    fn support(&self) -> (f64, f64) {
        self.support
    }
    fn value(&self, x: f64) -> Complex64 {
        (self.f)(x)
    }
}

/// `coeff · Π_i f_i(x_i)`, arity 1–4.
#[derive(Clone, Debug)]
pub struct SmoothAmplitude {
    pub coeff: f64,
    pub factors: Vec<Factor>,
}

impl SmoothAmplitude {
    pub fn new(coeff: f64, factors: Vec<Factor>) -> Result<Self> {
        if factors.is_empty() || factors.len() > 4 {
            return Err(Error::InvalidArgument(format!("amplitude arity {} outside 1..=4", factors.len())));
        }
        Ok(SmoothAmplitude { coeff, factors })
    }

    pub fn zero(arity: usize) -> Self {
        SmoothAmplitude { coeff: 0.0, factors: vec![Factor::one(); arity] }
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn is_zero(&self) -> bool {
        self.coeff == 0.0
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        if self.coeff == 0.0 {
            return 0.0;
        }
        self.coeff * self.factors.iter().zip(x).map(|(f, &xi)| f.value(xi)).product::<f64>()
    }

    pub fn support(&self) -> Vec<(f64, f64)> {
        self.factors.iter().map(|f| f.support()).collect()
    }

    /// Taylor coefficients in variable `var` at the point `x`.
    pub fn partial_jet(&self, var: usize, x: &[f64], order: usize) -> Vec<f64> {
        let rest: f64 = self.coeff
            * self.factors.iter().enumerate().filter(|(i, _)| *i != var).map(|(i, f)| f.value(x[i])).product::<f64>();
        self.factors[var].jet(x[var], order).c.into_iter().map(|c| c * rest).collect()
    }

    /// `∫|a|`, a scale for absolute tolerances.
    pub fn l1_norm(&self) -> Result<f64> {
        let mut total = self.coeff.abs();
        for f in &self.factors {
            let (a, b) = f.support();
            if !a.is_finite() || !b.is_finite() {
                return Err(Error::InvalidArgument("amplitude without compact support".into()));
            }
            let g = |x: f64| f.value(x).abs();
            total *= crate::numerics::quad::integrate(&g, a, b, &[], Default::default())?.0;
        }
        Ok(total)
    }
}
