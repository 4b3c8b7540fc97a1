//! Rational reconstruction by continued fractions.

/// Denominator cap for commensurability detection.
pub const MAX_DENOMINATOR: i64 = 1_000_000;
/// Residual below which a convergent is accepted.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Every irrational has convergents with `q²·|x − p/q| < 1`, so a small
/// residual alone does not separate √2 from 665857/470832. A convergent is
/// only taken as exact when it also beats that generic bound by this factor.
pub const QUALITY: f64 = 1e-3;

/// Smallest-denominator convergent `p/q` of `x` with `|x - p/q| ≤ tol·max(1,|x|)`,
/// `q²·|x − p/q| ≤ QUALITY·max(1,|x|)` and `q ≤ max_den`, or `None` when `x`
/// looks irrational at that scale.
pub fn rationalize(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() {
        return None;
    }
    let scale = x.abs().max(1.0);
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            return None;
        }
        let ai = a as i128;
        let h2 = ai * h1 + h0;
        let k2 = ai * k1 + k0;
        if k2 > max_den as i128 {
            return None;
        }
        h0 = h1;
        h1 = h2;
        k0 = k1;
        k1 = k2;
        let approx = h1 as f64 / k1 as f64;
        let res = (x - approx).abs();
        if res <= tol * scale && res * (k1 as f64).powi(2) <= QUALITY * scale {
            return Some((h1 as i64, k1 as i64));
        }
        let frac = r - a;
        if frac == 0.0 {
            return None;
        }
        r = 1.0 / frac;
    }
    None
}

pub fn gcd(a: i64, b: i64) -> i64 {
    let (mut a, mut b) = (a.abs(), b.abs());
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn lcm(a: i64, b: i64) -> i64 {
    if a == 0 || b == 0 {
        0
    } else {
        (a / gcd(a, b) * b).abs()
    }
}

/// Scale all entries to integers when every ratio to the first nonzero entry
/// is rational; returns the integer vector (common factor removed).
pub fn integer_relation_basis(w: &[f64]) -> Option<Vec<i64>> {
    let base = *w.iter().find(|x| **x != 0.0)?;
    let ratios: Vec<(i64, i64)> =
        w.iter().map(|x| rationalize(x / base, MAX_DENOMINATOR, RESIDUAL_TOL)).collect::<Option<_>>()?;
    let l = ratios.iter().fold(1i64, |acc, (_, q)| lcm(acc, *q));
    let ints: Vec<i64> = ratios.iter().map(|(p, q)| p * (l / q)).collect();
    let g = ints.iter().fold(0i64, |acc, &x| gcd(acc, x));
    Some(ints.iter().map(|x| x / g.max(1)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_simple_fractions() {
        assert_eq!(rationalize(0.5, MAX_DENOMINATOR, RESIDUAL_TOL), Some((1, 2)));
        assert_eq!(rationalize(-2.0 / 3.0, MAX_DENOMINATOR, RESIDUAL_TOL), Some((-2, 3)));
        assert_eq!(rationalize(3.0, MAX_DENOMINATOR, RESIDUAL_TOL), Some((3, 1)));
    }

    #[test]
    fn rejects_irrationals() {
        assert_eq!(rationalize(2f64.sqrt(), MAX_DENOMINATOR, RESIDUAL_TOL), None);
        assert_eq!(rationalize(std::f64::consts::PI, MAX_DENOMINATOR, RESIDUAL_TOL), None);
    }

    #[test]
    fn integer_basis() {
        assert_eq!(integer_relation_basis(&[1.0, -2.0]), Some(vec![1, -2]));
        assert_eq!(integer_relation_basis(&[0.5, 1.5]), Some(vec![1, 3]));
        assert_eq!(integer_relation_basis(&[1.0, 2f64.sqrt()]), None);
    }
}
