//! Truncated univariate Taylor series.
//!
//! A `Series<T>` holds the coefficients `c_0..c_N` of `f(x0 + e) = Σ c_j e^j`.
//! Arithmetic keeps the truncation order of the shorter operand.

use num_complex::Complex64;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Default
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Mul<f64, Output = Self>
    + From<f64>
    + Send
    + Sync
    + std::fmt::Debug
{
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn norm(self) -> f64;
}

impl Scalar for f64 {
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn norm(self) -> f64 {
        self.abs()
    }
}

impl Scalar for Complex64 {
    fn exp(self) -> Self {
        Complex64::exp(self)
    }
    fn ln(self) -> Self {
        Complex64::ln(self)
    }
    fn norm(self) -> f64 {
        Complex64::norm(self)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Series<T> {
    pub c: Vec<T>,
}

impl<T: Scalar> Series<T> {
    pub fn new(c: Vec<T>) -> Self {
        assert!(!c.is_empty(), "series needs at least one coefficient");
        Series { c }
    }

    pub fn constant(v: T, order: usize) -> Self {
        let mut c = vec![T::default(); order + 1];
        c[0] = v;
        Series { c }
    }

    /// The identity `x0 + e`.
    pub fn variable(x0: T, order: usize) -> Self {
        let mut c = vec![T::default(); order + 1];
        c[0] = x0;
        if order >= 1 {
            c[1] = T::from(1.0);
        }
        Series { c }
    }

    pub fn order(&self) -> usize {
        self.c.len() - 1
    }

    pub fn value(&self) -> T {
        self.c[0]
    }

    /// j-th derivative at the expansion point.
    pub fn derivative(&self, j: usize) -> T {
        if j >= self.c.len() {
            return T::default();
        }
        self.c[j] * factorial(j)
    }

    pub fn scale(&self, s: T) -> Self {
        Series { c: self.c.iter().map(|&a| a * s).collect() }
    }

    pub fn add_const(&self, s: T) -> Self {
        let mut c = self.c.clone();
        c[0] = c[0] + s;
        Series { c }
    }

    pub fn recip(&self) -> Self {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut r = vec![T::default(); n];
        r[0] = T::from(1.0) / a0;
        for k in 1..n {
            let mut s = T::default();
            for j in 1..=k {
                s = s + self.c[j] * r[k - j];
            }
            r[k] = -s / a0;
        }
        Series { c: r }
    }

    pub fn exp(&self) -> Self {
        // f' = a' f
        let n = self.c.len();
        let mut r = vec![T::default(); n];
        r[0] = self.c[0].exp();
        for k in 1..n {
            let mut s = T::default();
            for j in 1..=k {
                s = s + self.c[j] * r[k - j] * (j as f64);
            }
            r[k] = s * (1.0 / k as f64);
        }
        Series { c: r }
    }

    pub fn ln(&self) -> Self {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut r = vec![T::default(); n];
        r[0] = a0.ln();
        for k in 1..n {
            let mut s = self.c[k] * (k as f64);
            for j in 1..k {
                s = s - r[j] * self.c[k - j] * (j as f64);
            }
            r[k] = s / a0 * (1.0 / k as f64);
        }
        Series { c: r }
    }

    /// `self^p` for real `p`, via exp(p ln).
    pub fn powf(&self, p: f64) -> Self {
        self.ln().scale(T::from(p)).exp()
    }

    pub fn powi(&self, p: u32) -> Self {
        let mut r = Series::constant(T::from(1.0), self.order());
        for _ in 0..p {
            r = &r * self;
        }
        r
    }

    pub fn truncate(&self, order: usize) -> Self {
        let n = (order + 1).min(self.c.len());
        Series { c: self.c[..n].to_vec() }
    }

    /// Evaluate the truncated polynomial at offset `e`.
    pub fn eval(&self, e: T) -> T {
        let mut acc = T::default();
        for &a in self.c.iter().rev() {
            acc = acc * e + a;
        }
        acc
    }
}

impl Series<f64> {
    pub fn sin_cos(&self) -> (Self, Self) {
        let n = self.c.len();
        let mut s = vec![0.0; n];
        let mut c = vec![0.0; n];
        s[0] = self.c[0].sin();
        c[0] = self.c[0].cos();
        for k in 1..n {
            let mut ss = 0.0;
            let mut cc = 0.0;
            for j in 1..=k {
                let a = self.c[j] * j as f64;
                ss += a * c[k - j];
                cc -= a * s[k - j];
            }
            s[k] = ss / k as f64;
            c[k] = cc / k as f64;
        }
        (Series { c: s }, Series { c })
    }

    pub fn sinh_cosh(&self) -> (Self, Self) {
        let e = self.exp();
        let em = self.scale(-1.0).exp();
        let s = Series { c: e.c.iter().zip(&em.c).map(|(a, b)| 0.5 * (a - b)).collect() };
        let c = Series { c: e.c.iter().zip(&em.c).map(|(a, b)| 0.5 * (a + b)).collect() };
        (s, c)
    }

    pub fn to_complex(&self) -> Series<Complex64> {
        Series { c: self.c.iter().map(|&a| Complex64::new(a, 0.0)).collect() }
    }
}

pub fn factorial(n: usize) -> f64 {
    (1..=n).fold(1.0, |a, k| a * k as f64)
}

impl<T: Scalar> Add for &Series<T> {
    type Output = Series<T>;
    fn add(self, o: &Series<T>) -> Series<T> {
        let n = self.c.len().min(o.c.len());
        Series { c: (0..n).map(|i| self.c[i] + o.c[i]).collect() }
    }
}

impl<T: Scalar> Sub for &Series<T> {
    type Output = Series<T>;
    fn sub(self, o: &Series<T>) -> Series<T> {
        let n = self.c.len().min(o.c.len());
        Series { c: (0..n).map(|i| self.c[i] - o.c[i]).collect() }
    }
}

impl<T: Scalar> Mul for &Series<T> {
    type Output = Series<T>;
    fn mul(self, o: &Series<T>) -> Series<T> {
        let n = self.c.len().min(o.c.len());
        let mut r = vec![T::default(); n];
        for i in 0..n {
            for j in 0..n - i {
                r[i + j] = r[i + j] + self.c[i] * o.c[j];
            }
        }
        Series { c: r }
    }
}

impl<T: Scalar> Div for &Series<T> {
    type Output = Series<T>;
    fn div(self, o: &Series<T>) -> Series<T> {
        self * &o.recip()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn exp_of_variable_matches_factorials() {
        let s = Series::variable(0.0, 6).exp();
        for k in 0..=6 {
            assert_relative_eq!(s.c[k], 1.0 / factorial(k), epsilon = 1e-15);
        }
    }

    #[test]
    fn recip_roundtrip() {
        let a = Series::new(vec![2.0, -1.0, 0.5, 3.0]);
        let p = &a * &a.recip();
        assert_relative_eq!(p.c[0], 1.0, epsilon = 1e-15);
        for k in 1..4 {
            assert!(p.c[k].abs() < 1e-14);
        }
    }

    #[test]
    fn sin_cos_derivatives() {
        let x0 = 0.7;
        let (s, c) = Series::variable(x0, 5).sin_cos();
        assert_relative_eq!(s.derivative(1), x0.cos(), epsilon = 1e-14);
        assert_relative_eq!(s.derivative(3), -x0.cos(), epsilon = 1e-14);
        assert_relative_eq!(c.derivative(2), -x0.cos(), epsilon = 1e-14);
    }

    #[test]
    fn powf_matches_binomial() {
        let s = Series::variable(1.0, 3).powf(0.5);
        assert_relative_eq!(s.c[1], 0.5, epsilon = 1e-15);
        assert_relative_eq!(s.c[2], -0.125, epsilon = 1e-15);
    }
}
