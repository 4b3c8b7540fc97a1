pub mod poly;
pub mod quad;
pub mod rational;
pub mod series;

pub use poly::{multi_indices, Exponents, Poly};
pub use series::{factorial, Scalar, Series};

use statrs::function::gamma::gamma as statrs_gamma;

/// Gamma function for real arguments, `None` at the poles.
pub fn gamma(x: f64) -> Option<f64> {
    if x <= 0.0 && x == x.round() {
        return None;
    }
    Some(statrs_gamma(x))
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
