//! Brute-force quadrature of oscillatory integrals in up to four variables.
//!
//! Each variable is integrated by adaptive Gauss–Kronrod with the interval
//! pre-split so that no initial panel carries more than half an oscillation
//! of `e^{iλφ}`. The run is repeated at half the tolerance and the change is
//! reported as the error estimate.

use super::amplitude::{Factor, SmoothAmplitude};
use crate::error::{Error, Result};
use crate::numerics::quad::{integrate, QuadOpts};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::cell::RefCell;
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct QuadResult {
    pub value: Complex64,
    /// `|I(tol) − I(tol/2)|`.
    pub error: f64,
}

/// Cap on initial panels per variable.
const MAX_PANELS: usize = 400_000;

type Integrand<'a> = dyn Fn(&[f64]) -> Complex64 + 'a;
type Phase<'a> = dyn Fn(&[f64]) -> f64 + 'a;

/// `max |∂_i φ|` over a 7-point-per-axis grid of the box, by central differences.
fn gradient_bounds(phase: &Phase, bx: &[(f64, f64)]) -> Vec<f64> {
    let d = bx.len();
    let m = 7usize;
    let total = m.pow(d as u32);
    let mut g = vec![0.0f64; d];
    for flat in 0..total {
        let mut r = flat;
        let x: Vec<f64> = bx
            .iter()
            .map(|(a, b)| {
                let i = r % m;
                r /= m;
                a + (b - a) * i as f64 / (m - 1) as f64
            })
            .collect();
        for i in 0..d {
            let h = 1e-6 * (bx[i].1 - bx[i].0).max(1e-300);
            let mut up = x.clone();
            let mut dn = x.clone();
            up[i] += h;
            dn[i] -= h;
            g[i] = g[i].max(((phase(&up) - phase(&dn)) / (2.0 * h)).abs());
        }
    }
    g
}

struct Nested<'a> {
    f: &'a Integrand<'a>,
    bx: Vec<(f64, f64)>,
    breaks: Vec<Vec<f64>>,
    opts: QuadOpts,
    err: RefCell<Option<Error>>,
}

impl Nested<'_> {
    fn level(&self, prefix: &[f64]) -> Complex64 {
        let i = prefix.len();
        if i == self.bx.len() {
            return (self.f)(prefix);
        }
        let g = |x: f64| {
            let mut p = prefix.to_vec();
            p.push(x);
            self.level(&p)
        };
        let (a, b) = self.bx[i];
        match integrate(&g, a, b, &self.breaks[i], self.opts) {
            Ok((v, _)) => v,
            Err(e) => {
                self.err.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        }
    }
}

fn nested_once(f: &Integrand, bx: &[(f64, f64)], breaks: &[Vec<f64>], tol: f64, abs_tol: f64) -> Result<Complex64> {
    let n = Nested {
        f,
        bx: bx.to_vec(),
        breaks: breaks.to_vec(),
        opts: QuadOpts { abs_tol, rel_tol: tol, max_segments: MAX_PANELS + 100_000 },
        err: RefCell::new(None),
    };
    let v = n.level(&[]);
    match n.err.into_inner() {
        Some(e) => Err(e),
        None => Ok(v),
    }
}

/// `∫_box f` with panel splitting sized from the oscillation of `e^{iλφ}`.
pub fn quad_nested(f: &Integrand, sizing_phase: Option<&Phase>, bx: &[(f64, f64)], lambda: f64, tol: f64, scale: f64) -> Result<QuadResult> {
    if bx.is_empty() || bx.len() > 4 {
        return Err(Error::InvalidArgument(format!("dimension {} outside 1..=4", bx.len())));
    }
    if bx.iter().any(|(a, b)| !a.is_finite() || !b.is_finite()) {
        return Err(Error::InvalidArgument("integration box must be bounded".into()));
    }
    if bx.iter().any(|(a, b)| b <= a) {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0 });
    }
    let grads = match sizing_phase {
        Some(p) if lambda != 0.0 => gradient_bounds(p, bx),
        _ => vec![0.0; bx.len()],
    };
    let breaks: Vec<Vec<f64>> = bx
        .iter()
        .zip(&grads)
        .map(|((a, b), g)| {
            let panels = ((lambda.abs() * g * (b - a) / PI).ceil() as usize).clamp(1, MAX_PANELS);
            (1..panels).map(|i| a + (b - a) * i as f64 / panels as f64).collect()
        })
        .collect();
    let abs_tol = 1e-16 * scale.max(f64::MIN_POSITIVE);
    let coarse = nested_once(f, bx, &breaks, tol, abs_tol)?;
    let fine = nested_once(f, bx, &breaks, 0.5 * tol, 0.5 * abs_tol)?;
    Ok(QuadResult { value: fine, error: (fine - coarse).norm() })
}

fn clip_box(a: &SmoothAmplitude, bounds: &[(f64, f64)]) -> Result<Vec<(f64, f64)>> {
    if bounds.len() != a.arity() {
        return Err(Error::DimensionMismatch { expected: a.arity(), got: bounds.len() });
    }
    Ok(a.support().iter().zip(bounds).map(|((s0, s1), (b0, b1))| (s0.max(*b0), s1.min(*b1))).collect())
}

/// `∫_box e^{iλφ(x)} a(x) dx`, the box being `bounds` clipped to the support of `a`.
pub fn quad_oscillatory(phase: &Phase, a: &SmoothAmplitude, bounds: &[(f64, f64)], lambda: f64, tol: f64) -> Result<QuadResult> {
    let bx = clip_box(a, bounds)?;
    if a.is_zero() {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0 });
    }
    let f = |x: &[f64]| Complex64::from_polar(a.eval(x), lambda * phase(x));
    let scale = a.l1_norm()?;
    quad_nested(&f, Some(phase), &bx, lambda, tol, scale)
}

/// `∫ dt ∫_box dy e^{iλ(t·α(y) + β(y))} f(t) a(y)`, with the `t` integral done
/// exactly as the Fourier transform `f̂(−λα(y))` of the profile.
pub fn quad_linear_t(
    t_factor: &Factor,
    alpha: &Phase,
    beta: &Phase,
    a: &SmoothAmplitude,
    bounds: &[(f64, f64)],
    lambda: f64,
    tol: f64,
) -> Result<QuadResult> {
    let bx = clip_box(a, bounds)?;
    if a.is_zero() {
        return Ok(QuadResult { value: Complex64::new(0.0, 0.0), error: 0.0 });
    }
    let err: RefCell<Option<Error>> = RefCell::new(None);
    let (t0, t1) = t_factor.support();
    let tc = 0.5 * (t0 + t1);
    let f = |y: &[f64]| {
        let ft = match t_factor.fourier(-lambda * alpha(y)) {
            Ok(v) => v,
            Err(e) => {
                err.borrow_mut().get_or_insert(e);
                Complex64::new(0.0, 0.0)
            }
        };
        ft * Complex64::from_polar(a.eval(y), lambda * beta(y))
    };
    let sizing = |y: &[f64]| beta(y) + tc * alpha(y);
    let scale = a.l1_norm()? * t_factor.fourier(0.0)?.norm();
    let r = quad_nested(&f, Some(&sizing), &bx, lambda, tol, scale)?;
    match err.into_inner() {
        Some(e) => Err(e),
        None => Ok(r),
    }
}

/// `Γ(1 + 1/k) e^{iπ/(2k)} λ^{−1/k} = ∫₀^∞ e^{iλr^k} dr`.
pub fn fresnel(k: usize, lambda: f64) -> Complex64 {
    let kf = k as f64;
    Complex64::from_polar(crate::numerics::gamma(1.0 + 1.0 / kf).expect("positive") * lambda.powf(-1.0 / kf), PI / (2.0 * kf))
}
