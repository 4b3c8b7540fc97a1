//! Exact spectrum of the quantized two-oscillator example
//! `H = ½(x₁² + ξ₁²) − ½(x₂² + ξ₂²) + (x₂² + ξ₂²)²` and the smoothed sums
//! `γ(E, h) = Σ φ((λ_j − E)/h)` built from it.
//!
//! Weyl quantization gives `λ(n₁, n₂; h) = h(n₁ − n₂) + h²((2n₂ + 1)² + 1)`;
//! [`diagonalization_check`] compares this rule with the eigenvalues of the
//! Weyl-quantized symbol in a truncated number basis.

use crate::error::{Error, Result};
use crate::numerics::Poly;
use crate::trace::TestFunction;
use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Default half-width of the energy window in units of `h`.
pub const DEFAULT_WINDOW: f64 = 1500.0;

pub fn model_eigenvalue(n1: usize, n2: usize, h: f64) -> f64 {
    let m = (2 * n2 + 1) as f64;
    h * (n1 as f64 - n2 as f64) + h * h * (m * m + 1.0)
}

/// All `λ(n₁, n₂; h)` with `n₁ ≤ cutoffs[0]`, `n₂ ≤ cutoffs[1]`, row-major in `n₁`.
pub fn model_spectrum(h: f64, cutoffs: [usize; 2]) -> Result<Vec<f64>> {
    check_h(h)?;
    Ok((0..=cutoffs[0]).flat_map(|n1| (0..=cutoffs[1]).map(move |n2| model_eigenvalue(n1, n2, h))).collect())
}

fn check_h(h: f64) -> Result<()> {
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::InvalidArgument(format!("h must be positive, got {h}")));
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub n1: usize,
    pub n2: usize,
    pub lambda: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpectrumModel {
    pub h: f64,
    pub cutoffs: [usize; 2],
    pub e_c: f64,
    pub eps: f64,
}

impl SpectrumModel {
    /// Smallest cutoffs beyond which no state enters `[E − ε, E + ε]`.
    pub fn new(h: f64, e_c: f64, eps: f64) -> Result<Self> {
        check_h(h)?;
        if !(eps >= 0.0) {
            return Err(Error::InvalidArgument(format!("window half-width must be ≥ 0, got {eps}")));
        }
        let top = e_c + eps;
        // λ(0, n₂) is increasing once n₂ ≥ 1/(8h)
        let turn = (1.0 / (8.0 * h)).ceil() as usize;
        let mut n2 = turn;
        while model_eigenvalue(0, n2, h) <= top {
            n2 += 1;
        }
        let gmin = (0..=n2).map(|m| model_eigenvalue(0, m, h)).fold(f64::INFINITY, f64::min);
        let n1 = ((top - gmin) / h).floor().max(0.0) as usize + 1;
        Ok(SpectrumModel { h, cutoffs: [n1, n2], e_c, eps })
    }

    pub fn with_cutoffs(&self, cutoffs: [usize; 2]) -> Result<Self> {
        let m = SpectrumModel { cutoffs, ..self.clone() };
        m.check_cutoffs()?;
        Ok(m)
    }

    fn in_window(&self, l: f64) -> bool {
        (l - self.e_c).abs() <= self.eps
    }

    /// Error if a state on the cutoff boundary lies in the window.
    pub fn check_cutoffs(&self) -> Result<()> {
        let [c1, c2] = self.cutoffs;
        let edge1 = (0..=c2).any(|n2| self.in_window(model_eigenvalue(c1, n2, self.h)));
        let edge2 = (0..=c1).any(|n1| self.in_window(model_eigenvalue(n1, c2, self.h)));
        if edge1 || edge2 {
            return Err(Error::Hypothesis(format!("cutoffs {:?} cut through the energy window", self.cutoffs)));
        }
        Ok(())
    }

    /// States in the window, ordered by `(n₂, n₁)`.
    pub fn states(&self) -> Vec<State> {
        let h = self.h;
        let mut out = Vec::new();
        for n2 in 0..=self.cutoffs[1] {
            let g = model_eigenvalue(0, n2, h);
            let lo = ((self.e_c - self.eps - g) / h).ceil().max(0.0);
            let hi = ((self.e_c + self.eps - g) / h).floor().min(self.cutoffs[0] as f64);
            if hi < lo {
                continue;
            }
            for n1 in (lo as usize).saturating_sub(1)..=(hi as usize + 1).min(self.cutoffs[0]) {
                let lambda = model_eigenvalue(n1, n2, h);
                if self.in_window(lambda) {
                    out.push(State { n1, n2, lambda });
                }
            }
        }
        out
    }
}

/// `Σ φ((λ − E)/h)` over the states, in a fixed summation order.
pub fn gamma_sum(states: &[State], e_c: f64, phi: &TestFunction, h: f64) -> Complex64 {
    states
        .par_chunks(4096)
        .map(|c| c.iter().map(|s| phi.phi((s.lambda - e_c) / h)).sum::<Complex64>())
        .collect::<Vec<_>>()
        .into_iter()
        .sum()
}

/// Weyl symbol of `x^a ξ^b` in one mode: the average over orderings of `a`
/// copies of `x̂` and `b` of `ξ̂`, as an `m × m` matrix in the number basis.
fn weyl_monomial(a: u32, b: u32, x: &DMatrix<Complex64>, xi: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let m = x.nrows();
    let len = a + b;
    let mut acc = DMatrix::<Complex64>::zeros(m, m);
    let mut count = 0usize;
    for mask in 0u32..(1 << len) {
        if mask.count_ones() != a {
            continue;
        }
        let mut p = DMatrix::<Complex64>::identity(m, m);
        for i in 0..len {
            p = if mask >> i & 1 == 1 { &p * x } else { &p * xi };
        }
        acc += p;
        count += 1;
    }
    acc / Complex64::new(count as f64, 0.0)
}

fn kron(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    a.kronecker(b)
}

/// Weyl quantization of a polynomial in `(x₁..x_n, ξ₁..ξ_n)` on the product
/// basis `|k₁..k_n⟩`, `k_j < levels`, with `x̂ = √(h/2)(a + a†)`, `ξ̂ = −i√(h/2)(a − a†)`.
pub fn weyl_matrix(p: &Poly, n: usize, levels: usize, h: f64) -> Result<DMatrix<Complex64>> {
    if p.nvars() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: p.nvars() });
    }
    let s = (h / 2.0).sqrt();
    let mut lower = DMatrix::<Complex64>::zeros(levels, levels);
    for k in 1..levels {
        lower[(k - 1, k)] = Complex64::new((k as f64).sqrt(), 0.0);
    }
    let raise = lower.transpose();
    let x = (&lower + &raise) * Complex64::new(s, 0.0);
    let xi = (&lower - &raise) * Complex64::new(0.0, -s);
    let dim = levels.pow(n as u32);
    let mut out = DMatrix::<Complex64>::zeros(dim, dim);
    for (e, c) in p.terms() {
        let mut op = DMatrix::<Complex64>::identity(1, 1);
        for j in 0..n {
            op = kron(&op, &weyl_monomial(e[j], e[n + j], &x, &xi));
        }
        out += op * Complex64::new(*c, 0.0);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagonalizationCheck {
    pub h: f64,
    pub nmax: usize,
    pub states: usize,
    pub max_abs_error: f64,
    pub max_imag: f64,
}

/// Eigenvalues of the quantized example restricted to `n₁, n₂ ≤ nmax`
/// against the closed-form rule. The basis is padded by the degree of the
/// symbol so that the restricted block is exact.
pub fn diagonalization_check(h: f64, nmax: usize) -> Result<DiagonalizationCheck> {
    check_h(h)?;
    let ham = crate::fixtures::example1();
    let p = &ham.symbol.poly;
    let pad = p.degree().unwrap_or(0) as usize;
    let levels = nmax + 1 + pad;
    let full = weyl_matrix(p, 2, levels, h)?;
    let keep: Vec<usize> =
        (0..levels).flat_map(|a| (0..levels).map(move |b| (a, b))).filter(|(a, b)| *a <= nmax && *b <= nmax).map(|(a, b)| a * levels + b).collect();
    let k = keep.len();
    let block = DMatrix::<Complex64>::from_fn(k, k, |i, j| full[(keep[i], keep[j])]);
    let max_imag = block.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    let real = block.map(|z| z.re);
    let real = (&real + real.transpose()) * 0.5;
    let mut got: Vec<f64> = SymmetricEigen::new(real).eigenvalues.iter().copied().collect();
    got.sort_by(f64::total_cmp);
    let mut want = model_spectrum(h, [nmax, nmax])?;
    want.sort_by(f64::total_cmp);
    let max_abs_error = got.iter().zip(&want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(DiagonalizationCheck { h, nmax, states: k, max_abs_error, max_imag })
}

/// Contribution to `γ(0, h)` of the invariant tori `x₂² + ξ₂² = 1/4`, which
/// have period `2π` on the zero level: Poisson summation in `n₁` leaves
/// `φ̂(2π) Σ_{n₂} e^{2πih((2n₂+1)² + 1)}`, whose interior stationary point
/// `n₂ + ½ = 1/(8h)` gives `−φ̂(2π) e^{i(2πh − π/(8h) + π/4)} / (2√(2h))`.
/// Needs `φ̂` supported in `(0, 4π)`.
pub fn torus_background(phi: &TestFunction, h: f64) -> Complex64 {
    use std::f64::consts::PI;
    let amp = -phi.hat(2.0 * PI) / (2.0 * (2.0 * h).sqrt());
    Complex64::from_polar(amp, 2.0 * PI * h - PI / (8.0 * h) + PI / 4.0)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SweepPoint {
    pub h: f64,
    pub gamma: Complex64,
    /// `γ` minus the supplied background, if any.
    pub corrected: Complex64,
    pub n_states: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LogFit {
    pub exponent: f64,
    pub coefficient: f64,
    pub r2: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HSweep {
    pub e_c: f64,
    pub points: Vec<SweepPoint>,
    pub fit: Option<LogFit>,
    pub background_subtracted: bool,
}

/// Least-squares line through `(ln h, ln |v|)`.
pub fn log_fit(pairs: &[(f64, f64)]) -> Option<LogFit> {
    let pts: Vec<(f64, f64)> = pairs.iter().filter(|(h, v)| *h > 0.0 && *v > 0.0).map(|(h, v)| (h.ln(), v.ln())).collect();
    if pts.len() < 3 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    let r2 = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Some(LogFit { exponent: slope, coefficient: (my - slope * mx).exp(), r2 })
}

/// `γ(E, h)` over `hs`, window `±DEFAULT_WINDOW·h`, with an exponent fit of
/// `|γ − background|`.
pub fn h_sweep(
    e_c: f64,
    phi: &TestFunction,
    hs: &[f64],
    background: Option<&(dyn Fn(f64) -> Complex64 + Sync)>,
) -> Result<HSweep> {
    let points = hs
        .par_iter()
        .map(|&h| {
            let model = SpectrumModel::new(h, e_c, DEFAULT_WINDOW * h)?;
            model.check_cutoffs()?;
            let states = model.states();
            let gamma = gamma_sum(&states, e_c, phi, h);
            let corrected = gamma - background.map_or(Complex64::new(0.0, 0.0), |b| b(h));
            Ok(SweepPoint { h, gamma, corrected, n_states: states.len() })
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = log_fit(&points.iter().map(|p| (p.h, p.corrected.norm())).collect::<Vec<_>>());
    Ok(HSweep { e_c, points, fit, background_subtracted: background.is_some() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ground_state_at_h_one() {
        assert_eq!(model_eigenvalue(0, 0, 1.0), 2.0);
        let h = 0.37;
        for n2 in 0..5 {
            assert!((model_eigenvalue(4, n2, h) - model_eigenvalue(3, n2, h) - h).abs() < 1e-15);
        }
    }

    #[test]
    fn rule_matches_diagonalization() {
        for h in [0.05, 0.1, 1.0] {
            let c = diagonalization_check(h, 20).unwrap();
            assert_eq!(c.states, 441);
            assert!(c.max_abs_error < 1e-10, "h={h}: {}", c.max_abs_error);
            assert!(c.max_imag < 1e-12);
        }
    }

    #[test]
    fn weyl_of_squared_oscillator_adds_h_squared() {
        // Op((x² + ξ²)²) = Op(x² + ξ²)² + h²
        let h = 0.3;
        let a = Poly::quadratic(2, &[1.0, 0.0, 0.0, 1.0]);
        let sq = a.mul(&a);
        let m = weyl_matrix(&sq, 1, 12, h).unwrap();
        for k in 0..8 {
            let want = (h * (2 * k + 1) as f64).powi(2) + h * h;
            assert!((m[(k, k)].re - want).abs() < 1e-12);
        }
    }

    #[test]
    fn window_counting_and_cutoffs() {
        let m = SpectrumModel::new(0.1, 0.0, 0.3).unwrap();
        m.check_cutoffs().unwrap();
        let states = m.states();
        let all = model_spectrum(0.1, m.cutoffs).unwrap();
        assert_eq!(states.len(), all.iter().filter(|l| l.abs() <= 0.3).count());
        assert!(m.with_cutoffs([1, 1]).is_err());
    }

    #[test]
    fn weyl_law_order() {
        // window well inside (−1/16, ∞) so that only the critical level 0 matters
        let eps = 0.002;
        let r: Vec<f64> = [1e-3, 5e-4, 2.5e-4]
            .iter()
            .map(|&h| SpectrumModel::new(h, 0.0, eps).unwrap().states().len() as f64 * h * h / (eps / 2.0))
            .collect();
        assert!(r.iter().all(|x| (x - 1.0).abs() < 0.01), "{r:?}");
    }

    #[test]
    fn gamma_sum_trivial_cases_and_cutoff_invariance() {
        let phi = TestFunction::new(2.0 * std::f64::consts::PI, 0.5).unwrap();
        assert_eq!(gamma_sum(&[], 0.0, &phi, 0.1), Complex64::new(0.0, 0.0));
        let m = SpectrumModel::new(0.02, 0.0, 30.0).unwrap();
        let g0 = gamma_sum(&m.states(), 0.0, &phi.scaled(0.0), 0.02);
        assert_eq!(g0, Complex64::new(0.0, 0.0));
        let a = gamma_sum(&m.states(), 0.0, &phi, 0.02);
        let big = m.with_cutoffs([m.cutoffs[0] + 50, m.cutoffs[1] + 50]).unwrap();
        let b = gamma_sum(&big.states(), 0.0, &phi, 0.02);
        assert_eq!(a, b);
    }

    #[test]
    fn torus_term_is_the_gauss_sum_stationary_point() {
        let h = 1e-3;
        let phi = TestFunction::new(2.0 * std::f64::consts::PI, 0.5).unwrap();
        let c = 1.0 / (8.0 * h);
        let w = 1.0 / (16.0 * h);
        let s: Complex64 = (0..(4.0 * c) as usize)
            .map(|n2| {
                let u = (n2 as f64 + 0.5 - c) / w;
                let m = (2 * n2 + 1) as f64;
                let b = if u.abs() < 1.0 { (-u * u / (1.0 - u * u)).exp() } else { 0.0 };
                Complex64::from_polar(b, 2.0 * std::f64::consts::PI * h * (m * m + 1.0))
            })
            .sum();
        let want = torus_background(&phi, h) / phi.hat(2.0 * std::f64::consts::PI);
        assert!((s - want).norm() < 1e-2 * want.norm(), "{s} vs {want}");
    }
}
