//! Pairings of `(x ∓ i0)^{−m}` and `F(x_−^α)` with smooth test functions.
//!
//! `F g(τ) = ∫ g(x) e^{−ixτ} dx`, so that
//! `F(x_−^α) = Γ(α+1) e^{iπ(α+1)/2} (τ + i0)^{−α−1}`.

use super::amplitude::Jet1;
use crate::error::{Error, Result};
use crate::numerics::gamma;
use crate::numerics::quad::{integrate, QuadOpts};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Distribution {
    /// `(x − c − i0)^{−m}`
    MinusI0 { m: u32, center: f64 },
    /// `(x − c + i0)^{−m}`
    PlusI0 { m: u32, center: f64 },
    /// `F(x_−^α)`
    FtMinusPower(f64),
}

const OPTS: QuadOpts = QuadOpts { abs_tol: 1e-15, rel_tol: 1e-12, max_segments: 50_000 };

fn is_integer(x: f64) -> bool {
    (x - x.round()).abs() < 1e-12
}

/// `F(x_−^α)(τ)` for `τ ≠ 0`.
pub fn ft_minus_power(alpha: f64, tau: f64) -> Result<Complex64> {
    let b = alpha + 1.0;
    let g = gamma(b).ok_or_else(|| Error::Branch(format!("x_−^{alpha} is not locally integrable")))?;
    let ph = if tau > 0.0 { PI * b / 2.0 } else { -PI * b / 2.0 };
    Ok(Complex64::from_polar(g * tau.abs().powf(-b), ph))
}

/// `PV ∫ c(x)/(x − center) dx` for a function `c` vanishing outside `[a, b]`.
fn principal_value(c: &(dyn Fn(f64) -> Complex64 + Sync), center: f64, support: (f64, f64)) -> Result<Complex64> {
    let (a, b) = support;
    let l = (b - center).max(center - a);
    if l <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let f = |y: f64| (c(center + y) - c(center - y)) / y;
    let breaks = [b - center, center - a];
    Ok(integrate(&f, 0.0, l, &breaks, OPTS)?.0)
}

/// `⟨(x − c ∓ i0)^{−m}, f⟩ = PV∫ f_{m−1}(x)/(x − c) dx ± iπ f_{m−1}(c)` with
/// `f_{m−1} = f^{(m−1)}/(m−1)!`.
fn pair_i0(m: u32, center: f64, minus: bool, f: &dyn Jet1) -> Result<Complex64> {
    if m == 0 {
        let (a, b) = f.support();
        return Ok(integrate(&|x| f.value(x), a, b, &[], OPTS)?.0);
    }
    let j = (m - 1) as usize;
    let c = |x: f64| f.jet(x, j)[j];
    let pv = principal_value(&c, center, f.support())?;
    let d = Complex64::new(0.0, PI) * c(center);
    Ok(if minus { pv + d } else { pv - d })
}

/// Hadamard finite part of `∫₀^∞ τ^{−β} f(side·τ) dτ` for non-integer `β`.
pub fn finite_part_half_line(f: &dyn Jet1, beta: f64, side: f64) -> Result<Complex64> {
    if is_integer(beta) && beta >= 1.0 {
        return Err(Error::InvalidArgument(format!("finite part at integer exponent {beta}")));
    }
    let (a, b) = f.support();
    let end = if side > 0.0 { b } else { -a };
    if end <= 0.0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if !end.is_finite() {
        return Err(Error::InvalidArgument("test function without compact support".into()));
    }
    let l = 1.0f64;
    let n_sub: i64 = if beta > 0.0 { beta.ceil() as i64 } else { -1 };
    let extra = 6usize;
    let order = (n_sub.max(0) as usize) + extra;
    let jet0: Vec<Complex64> = f.jet(0.0, order).into_iter().enumerate().map(|(j, c)| c * side.powi(j as i32)).collect();
    let taylor = |tau: f64, hi: usize| -> Complex64 { (0..=hi).rev().fold(Complex64::new(0.0, 0.0), |acc, j| acc * tau + jet0[j]) };
    let small = 1e-2 * l;
    let remainder = |tau: f64| -> Complex64 {
        if n_sub < 0 {
            return f.value(side * tau);
        }
        if tau < small {
            let lo = n_sub as usize + 1;
            let mut s = Complex64::new(0.0, 0.0);
            for j in (lo..=order).rev() {
                s = s * tau + jet0[j];
            }
            s * tau.powi(lo as i32)
        } else {
            f.value(side * tau) - taylor(tau, n_sub as usize)
        }
    };
    let g = |u: f64| -> Complex64 {
        let tau = l * u.powi(4);
        if tau == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        remainder(tau) * (4.0 * l * u.powi(3) * tau.powf(-beta))
    };
    let mut total = integrate(&g, 0.0, 1.0, &[], OPTS)?.0;
    for j in 0..=n_sub {
        let e = j as f64 - beta + 1.0;
        total += jet0[j as usize] * (l.powf(e) / e);
    }
    if end > l {
        let tail = |tau: f64| f.value(side * tau) * tau.powf(-beta);
        total += integrate(&tail, l, end, &[], OPTS)?.0;
    }
    Ok(total)
}

pub fn pair_distribution(d: &Distribution, f: &dyn Jet1) -> Result<Complex64> {
    match *d {
        Distribution::MinusI0 { m, center } => pair_i0(m, center, true, f),
        Distribution::PlusI0 { m, center } => pair_i0(m, center, false, f),
        Distribution::FtMinusPower(alpha) => {
            let b = alpha + 1.0;
            if is_integer(b) {
                if b <= 0.0 {
                    return Err(Error::Branch(format!("x_−^{alpha} is not locally integrable")));
                }
                let m = b.round() as u32;
                let g = gamma(b).expect("positive integer");
                let p = pair_i0(m, 0.0, false, f)?;
                return Ok(Complex64::from_polar(g, PI * b / 2.0) * p);
            }
            let g = gamma(b).ok_or_else(|| Error::Branch(format!("Γ pole at {b}")))?;
            let pos = finite_part_half_line(f, b, 1.0)?;
            let neg = finite_part_half_line(f, b, -1.0)?;
            Ok((Complex64::from_polar(1.0, PI * b / 2.0) * pos + Complex64::from_polar(1.0, -PI * b / 2.0) * neg) * g)
        }
    }
}
