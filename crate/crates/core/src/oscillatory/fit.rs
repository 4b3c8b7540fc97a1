//! Power-law and multi-exponent fits of `λ ↦ I(λ)` data.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct ScalingFit {
    /// `I(λ) ≈ coefficient · λ^{exponent}`.
    pub exponent: f64,
    /// `I(λ_max) · λ_max^{−exponent}`.
    pub coefficient: Complex64,
    pub r2: f64,
}

fn check_span(pairs: &[(f64, Complex64)]) -> Result<Vec<(f64, Complex64)>> {
    if pairs.len() < 4 {
        return Err(Error::FitRejected(format!("{} points, need at least 4", pairs.len())));
    }
    let mut p = pairs.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    if p[0].0 <= 0.0 || p[p.len() - 1].0 / p[0].0 < 100.0 * (1.0 - 1e-12) {
        return Err(Error::FitRejected("λ values must be positive and span two decades".into()));
    }
    Ok(p)
}

/// Least squares of `log|I|` against `log λ`.
pub fn fit_scaling(pairs: &[(f64, Complex64)]) -> Result<ScalingFit> {
    let p = check_span(pairs)?;
    let mags: Vec<f64> = p.iter().map(|(_, v)| v.norm()).collect();
    if mags.iter().any(|m| *m == 0.0 || !m.is_finite()) {
        return Err(Error::FitRejected("zero or non-finite value".into()));
    }
    let slack = 1e-12 * mags.iter().cloned().fold(0.0, f64::max);
    let up = mags.windows(2).all(|w| w[1] >= w[0] - slack);
    let down = mags.windows(2).all(|w| w[1] <= w[0] + slack);
    if !up && !down {
        return Err(Error::FitRejected("|I(λ)| is not monotone".into()));
    }
    let xs: Vec<f64> = p.iter().map(|(l, _)| l.ln()).collect();
    let ys: Vec<f64> = mags.iter().map(|m| m.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let ss_tot: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let ss_res: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - my - slope * (x - mx)).powi(2)).sum();
    let r2 = if ss_tot <= 1e-300 { 1.0 } else { 1.0 - ss_res / ss_tot };
    let (lmax, vmax) = p[p.len() - 1];
    Ok(ScalingFit { exponent: slope, coefficient: vmax * lmax.powf(-slope), r2 })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExpansionFit {
    pub powers: Vec<f64>,
    /// `I(λ) ≈ Σ_i c_i λ^{−p_i}`.
    pub coefficients: Vec<Complex64>,
    /// Largest relative residual over the data.
    pub max_rel_residual: f64,
}

/// Complex least squares for `I(λ) ≈ Σ_i c_i λ^{−p_i}`, rows weighted by
/// `λ^{p_0}` so each point counts relative to the leading term.
pub fn fit_expansion(pairs: &[(f64, Complex64)], powers: &[f64]) -> Result<ExpansionFit> {
    let p = check_span(pairs)?;
    if powers.is_empty() || powers.len() >= p.len() {
        return Err(Error::FitRejected(format!("{} powers for {} points", powers.len(), p.len())));
    }
    let w: Vec<f64> = p.iter().map(|(l, _)| l.powf(powers[0])).collect();
    let a = DMatrix::from_fn(p.len(), powers.len(), |i, j| w[i] * p[i].0.powf(-powers[j]));
    let svd = a.svd(true, true);
    let solve = |rhs: DVector<f64>| svd.solve(&rhs, 1e-14).map_err(|e| Error::FitRejected(e.to_string()));
    let re = solve(DVector::from_iterator(p.len(), p.iter().zip(&w).map(|((_, v), wi)| v.re * wi)))?;
    let im = solve(DVector::from_iterator(p.len(), p.iter().zip(&w).map(|((_, v), wi)| v.im * wi)))?;
    let coefficients: Vec<Complex64> = re.iter().zip(im.iter()).map(|(a, b)| Complex64::new(*a, *b)).collect();
    let max_rel_residual = p
        .iter()
        .map(|(l, v)| {
            let m: Complex64 = coefficients.iter().zip(powers).map(|(c, q)| c * l.powf(-q)).sum();
            (m - v).norm() / v.norm().max(f64::MIN_POSITIVE)
        })
        .fold(0.0, f64::max);
    Ok(ExpansionFit { powers: powers.to_vec(), coefficients, max_rel_residual })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FreeExponentFit {
    /// `I(λ) ≈ Σ_j c_j λ^{−(p + s_j)}` with `s₀ = 0`; this is `−p`.
    pub exponent: f64,
    pub offsets: Vec<f64>,
    pub coefficients: Vec<Complex64>,
    pub max_rel_residual: f64,
}

/// Leading decay power with known correction offsets: for each trial `p`
/// the coefficients are a linear least-squares problem, and `p` minimizes
/// the remaining residual over `[p_lo, p_hi]`.
pub fn fit_free_exponent(pairs: &[(f64, Complex64)], offsets: &[f64], p_lo: f64, p_hi: f64) -> Result<FreeExponentFit> {
    check_span(pairs)?;
    if !(p_lo < p_hi) {
        return Err(Error::FitRejected(format!("empty exponent range [{p_lo}, {p_hi}]")));
    }
    let powers = |p: f64| -> Vec<f64> { std::iter::once(p).chain(offsets.iter().map(|s| p + s)).collect() };
    let cost = |p: f64| -> f64 {
        fit_expansion(pairs, &powers(p)).map(|f| rms_residual(pairs, &f)).unwrap_or(f64::INFINITY)
    };
    let n = 400;
    let grid: Vec<f64> = (0..=n).map(|i| p_lo + (p_hi - p_lo) * i as f64 / n as f64).collect();
    let costs: Vec<f64> = grid.iter().map(|p| cost(*p)).collect();
    let best = (0..=n).min_by(|a, b| costs[*a].total_cmp(&costs[*b])).expect("non-empty grid");
    let (mut a, mut b) = (grid[best.saturating_sub(1)], grid[(best + 1).min(n)]);
    let g = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..80 {
        let c = b - g * (b - a);
        let d = a + g * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
    }
    let p = 0.5 * (a + b);
    let f = fit_expansion(pairs, &powers(p))?;
    Ok(FreeExponentFit { exponent: -p, offsets: offsets.to_vec(), coefficients: f.coefficients, max_rel_residual: f.max_rel_residual })
}

fn rms_residual(pairs: &[(f64, Complex64)], f: &ExpansionFit) -> f64 {
    let s: f64 = pairs
        .iter()
        .map(|(l, v)| {
            let m: Complex64 = f.coefficients.iter().zip(&f.powers).map(|(c, q)| c * l.powf(-q)).sum();
            ((m - v).norm() / v.norm().max(f64::MIN_POSITIVE)).powi(2)
        })
        .sum();
    (s / pairs.len() as f64).sqrt()
}

/// `n` points log-spaced over `[lo, hi]`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1).max(1) as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law() {
        let c = Complex64::new(0.3, -1.2);
        let data: Vec<_> = log_grid(1e2, 1e4, 6).into_iter().map(|l| (l, c * l.powf(-1.5))).collect();
        let f = fit_scaling(&data).unwrap();
        assert!((f.exponent + 1.5).abs() < 1e-12);
        assert!((f.coefficient - c).norm() < 1e-12);
        assert!((f.r2 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_data() {
        let data: Vec<_> = log_grid(1.0, 1e3, 5).into_iter().map(|l| (l, Complex64::new(2.0, 0.0))).collect();
        let f = fit_scaling(&data).unwrap();
        assert!(f.exponent.abs() < 1e-14);
    }

    #[test]
    fn rejects_short_or_non_monotone() {
        let data: Vec<_> = log_grid(1.0, 1e3, 3).into_iter().map(|l| (l, Complex64::new(l, 0.0))).collect();
        assert!(fit_scaling(&data).is_err());
        let wiggle: Vec<_> = log_grid(1.0, 1e3, 6).into_iter().map(|l| (l, Complex64::new(2.0 + (l.ln() * 3.0).sin(), 0.0))).collect();
        assert!(matches!(fit_scaling(&wiggle), Err(Error::FitRejected(_))));
    }

    #[test]
    fn two_term_expansion() {
        let data: Vec<_> =
            log_grid(1e2, 1e4, 8).into_iter().map(|l| (l, Complex64::new(1.0, 1.0) * l.powf(-0.25) + l.powf(-0.75) * 3.0)).collect();
        let f = fit_expansion(&data, &[0.25, 0.75]).unwrap();
        assert!((f.coefficients[0] - Complex64::new(1.0, 1.0)).norm() < 1e-10);
        assert!((f.coefficients[1] - 3.0).norm() < 1e-8);
    }

    #[test]
    fn free_exponent_with_corrections() {
        let data: Vec<_> = log_grid(1e2, 1e4, 12)
            .into_iter()
            .map(|l| (l, Complex64::new(0.7, 0.2) * l.powf(-0.2) - l.powf(-0.6) * 0.5))
            .collect();
        let f = fit_free_exponent(&data, &[0.4], 0.05, 0.6).unwrap();
        assert!((f.exponent + 0.2).abs() < 1e-6, "{}", f.exponent);
        assert!((f.coefficients[0] - Complex64::new(0.7, 0.2)).norm() < 1e-5);
    }
}
