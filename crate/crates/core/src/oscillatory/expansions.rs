//! Asymptotic expansions in `λ → ∞` of the model oscillatory integrals
//!
//! * `∫_ℝ dt ∫₀^∞ dr e^{iλtr^k} a(t, r)`
//! * `∫₀^∞ e^{iλr^k} a(r) dr`
//! * `∫ e^{iλ(tr²v ± r^k)} r^{2n−1} a(t, r, v)` (second normal form)
//! * `∫ e^{iλ(tr²v + r^k s)} r^{2n−1} a(t, r, v, s)` (third normal form)
//!
//! with `r ≥ 0` and all other variables over ℝ.

use super::amplitude::{Factor, SmoothAmplitude};
use super::distributions::{pair_distribution, Distribution};
use crate::error::{Error, Result};
use crate::numerics::gamma;
use num_complex::Complex64;
use num_rational::Rational64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpansionTerm {
    /// The term is `coefficient · λ^{−power}`.
    pub power: Rational64,
    pub coefficient: Complex64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expansion {
    /// Strictly increasing `power`; exactly vanishing terms are omitted.
    pub terms: Vec<ExpansionTerm>,
    /// The error after the listed terms is `O(λ^{−remainder_power})`.
    pub remainder_power: Rational64,
    pub remainder_note: String,
}

pub fn to_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

impl Expansion {
    fn new(raw: Vec<(Rational64, Complex64)>, remainder_power: Rational64, note: &str) -> Self {
        let mut terms: Vec<ExpansionTerm> = raw
            .into_iter()
            .filter(|(p, c)| *c != Complex64::new(0.0, 0.0) && *p < remainder_power)
            .map(|(power, coefficient)| ExpansionTerm { power, coefficient })
            .collect();
        terms.sort_by(|a, b| a.power.cmp(&b.power));
        Expansion { terms, remainder_power, remainder_note: note.to_string() }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn leading(&self) -> Option<&ExpansionTerm> {
        self.terms.first()
    }

    pub fn partial_sum(&self, lambda: f64) -> Complex64 {
        self.terms.iter().map(|t| t.coefficient * lambda.powf(-to_f64(t.power))).sum()
    }
}

fn require_k(k: usize, min: usize) -> Result<()> {
    if k < min {
        return Err(Error::InvalidArgument(format!("k = {k} < {min}")));
    }
    Ok(())
}

fn arity(a: &SmoothAmplitude, n: usize) -> Result<()> {
    if a.arity() != n {
        return Err(Error::DimensionMismatch { expected: n, got: a.arity() });
    }
    Ok(())
}

/// `∫_ℝ dt ∫₀^∞ dr e^{iλtr^k} a(t, r) ~ Σ_l λ^{−(l+1)/k} (1/k)⟨F(x_−^{(l+1−k)/k}), a_l⟩`
/// with `a_l(t) = ∂_r^l a(t, 0)/l!`, for `l = 0..=n_terms`.
pub fn expand_t_rk(a: &SmoothAmplitude, k: usize, n_terms: usize) -> Result<Expansion> {
    require_k(k, 2)?;
    arity(a, 2)?;
    let kk = k as i64;
    let rem = Rational64::new(n_terms as i64 + 2, kk);
    if a.is_zero() {
        return Ok(Expansion::new(vec![], rem, ""));
    }
    let rj = a.factors[1].jet(0.0, n_terms);
    let mut raw = Vec::new();
    for l in 0..=n_terms {
        let cl = rj.c[l];
        if cl == 0.0 {
            continue;
        }
        let alpha = (l as f64 + 1.0 - k as f64) / k as f64;
        let p = pair_distribution(&Distribution::FtMinusPower(alpha), &a.factors[0])?;
        raw.push((Rational64::new(l as i64 + 1, kk), p * (a.coeff * cl / k as f64)));
    }
    Ok(Expansion::new(raw, rem, ""))
}

/// `∫₀^∞ e^{iλr^k} a(r) dr ~ Σ_j (1/k)Γ((j+1)/k) e^{iπ(j+1)/(2k)} a^{(j)}(0)/j! λ^{−(j+1)/k}`.
pub fn expand_rk(a: &Factor, k: usize, n_terms: usize) -> Result<Expansion> {
    require_k(k, 2)?;
    let kk = k as i64;
    let jet = a.jet(0.0, n_terms);
    let kf = k as f64;
    let raw = (0..=n_terms)
        .map(|j| {
            let s = (j as f64 + 1.0) / kf;
            let g = gamma(s).expect("positive argument");
            (Rational64::new(j as i64 + 1, kk), Complex64::from_polar(g / kf * jet.c[j], PI * s / 2.0))
        })
        .collect();
    Ok(Expansion::new(raw, Rational64::new(n_terms as i64 + 2, kk), ""))
}

/// First omitted order: the `λ^{−n} log λ` region `r ≲ λ^{−1/2}` or the
/// second stationary-phase term in `(t, v)`, whichever decays slower.
fn nf_remainder(n: usize, k: usize) -> (Rational64, String) {
    let n = n as i64;
    let k = k as i64;
    let a = Rational64::from_integer(n);
    let b = Rational64::new(2 * k + 2 * n - 4, k);
    if b < a {
        (b, "second-order stationary phase in (t, v)".into())
    } else {
        (a, "O(λ^{−n} log λ)".into())
    }
}

fn check_nf(k: usize, n: usize) -> Result<()> {
    if k <= 2 {
        return Err(Error::InvalidArgument(format!("normal-form expansions need k ≥ 3, got {k}")));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!("n = {n} < 2")));
    }
    Ok(())
}

/// Second normal form, amplitude `r^{2n−1} a(t, r, v)`, phase `tr²v + σr^k`:
/// stationary phase in `(t, v)` then the radial Fresnel expansion,
/// leading term `(2π/k)Γ((2n−2)/k)e^{iσπ(n−1)/k} a(0,0,0) λ^{−(2n+k−2)/k}`.
pub fn expand_second_nf(a: &SmoothAmplitude, k: usize, n: usize, sigma: i32, n_terms: usize) -> Result<Expansion> {
    check_nf(k, n)?;
    arity(a, 3)?;
    let (rem, note) = nf_remainder(n, k);
    if a.is_zero() {
        return Ok(Expansion::new(vec![], rem, &note));
    }
    let base = a.coeff * a.factors[0].value(0.0) * a.factors[2].value(0.0);
    let rj = a.factors[1].jet(0.0, n_terms);
    let kf = k as f64;
    let raw = (0..=n_terms)
        .map(|j| {
            let b = (2 * n - 2 + j) as f64 / kf;
            let g = gamma(b).expect("positive argument");
            let c = Complex64::from_polar(2.0 * PI / kf * g * base * rj.c[j], sigma.signum() as f64 * PI * b / 2.0);
            (Rational64::new((2 * n - 2 + j + k) as i64, k as i64), c)
        })
        .collect();
    Ok(Expansion::new(raw, rem, &note))
}

/// Third normal form, amplitude `r^{2n−1} a(t, r, v, s)`, phase `tr²v + r^k s`:
/// leading term `(2π/k)⟨F(x_−^{β−1}), a(0,0,0,·)⟩ λ^{−1−β}`, `β = (2n−2)/k`.
pub fn expand_third_nf(a: &SmoothAmplitude, k: usize, n: usize, n_terms: usize) -> Result<Expansion> {
    check_nf(k, n)?;
    arity(a, 4)?;
    let (rem, note) = nf_remainder(n, k);
    if a.is_zero() {
        return Ok(Expansion::new(vec![], rem, &note));
    }
    let base = a.coeff * a.factors[0].value(0.0) * a.factors[2].value(0.0);
    let rj = a.factors[1].jet(0.0, n_terms);
    let kf = k as f64;
    let mut raw = Vec::new();
    for j in 0..=n_terms {
        if rj.c[j] == 0.0 {
            continue;
        }
        let b = (2 * n - 2 + j) as f64 / kf;
        let p = pair_distribution(&Distribution::FtMinusPower(b - 1.0), &a.factors[3])?;
        raw.push((Rational64::new((2 * n - 2 + j + k) as i64, k as i64), p * (2.0 * PI / kf * base * rj.c[j])));
    }
    Ok(Expansion::new(raw, rem, &note))
}

#[cfg(test)]
mod tests {
    use super::super::amplitude::Profile;
    use super::*;

    #[test]
    fn zero_amplitudes_give_zero_expansions() {
        assert!(expand_t_rk(&SmoothAmplitude::zero(2), 3, 4).unwrap().is_zero());
        assert!(expand_second_nf(&SmoothAmplitude::zero(3), 4, 2, 1, 2).unwrap().is_zero());
        assert!(expand_third_nf(&SmoothAmplitude::zero(4), 4, 2, 2).unwrap().is_zero());
        let z = Factor::single(Profile::Bump { center: 3.0, half_width: 1.0 });
        assert!(expand_rk(&z, 3, 4).unwrap().is_zero());
    }

    #[test]
    fn fresnel_leading_term() {
        let a = Factor::single(Profile::Plateau { flat: 0.5, ramp: 0.5 });
        for k in 2..6 {
            let e = expand_rk(&a, k, 5).unwrap();
            assert_eq!(e.terms.len(), 1);
            let t = &e.terms[0];
            assert_eq!(t.power, Rational64::new(1, k as i64));
            let want = Complex64::from_polar(gamma(1.0 + 1.0 / k as f64).unwrap(), PI / (2.0 * k as f64));
            assert!((t.coefficient - want).norm() < 1e-14);
        }
    }

    #[test]
    fn vanishing_value_shifts_leading_power() {
        let a = Factor::single(Profile::Monomial(1)).times(Profile::Bump { center: 0.0, half_width: 1.0 });
        let e = expand_rk(&a, 3, 3).unwrap();
        assert_eq!(e.leading().unwrap().power, Rational64::new(2, 3));
    }

    #[test]
    fn second_nf_leading_exponent() {
        let b = Factor::single(Profile::Bump { center: 0.0, half_width: 1.0 });
        let a = SmoothAmplitude::new(1.0, vec![b.clone(), b.clone(), b]).unwrap();
        let e = expand_second_nf(&a, 4, 2, 1, 3).unwrap();
        assert_eq!(e.leading().unwrap().power, Rational64::new(3, 2));
        assert!(e.terms.iter().all(|t| t.power < e.remainder_power));
        assert!(expand_second_nf(&a, 2, 2, 1, 3).is_err());
    }

    #[test]
    fn lemma_one_first_nonzero_term() {
        // k = 2, a = f(t) r³ bump(r): first term at λ^{−2}, coefficient ½⟨F(x_−), f⟩
        let f = Factor::single(Profile::Gaussian { center: 0.0, sigma: 1.0 });
        let r = Factor::single(Profile::Monomial(3)).times(Profile::Bump { center: 0.0, half_width: 1.0 });
        let a = SmoothAmplitude::new(1.0, vec![f.clone(), r]).unwrap();
        let e = expand_t_rk(&a, 2, 4).unwrap();
        let t = e.leading().unwrap();
        assert_eq!(t.power, Rational64::from_integer(2));
        let p = pair_distribution(&Distribution::FtMinusPower(1.0), &f).unwrap();
        assert!((t.coefficient - p * 0.5).norm() < 1e-12);
    }
}
