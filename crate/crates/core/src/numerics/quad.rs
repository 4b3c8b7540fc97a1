//! Quadrature rules: Gauss–Legendre, adaptive Gauss–Kronrod, and the
//! Chebyshev–Lobatto cumulative integration matrix.

use super::series::Scalar;
use crate::error::{Error, Result};
use nalgebra::DMatrix;
use std::collections::BinaryHeap;
use std::sync::OnceLock;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pnm1 = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pnm1) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    if n % 2 == 1 {
        x[n / 2] = 0.0;
    }
    (x, w)
}

/// Cached 20-point rule.
pub fn gl20() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(20))
}

/// Fixed-order Gauss–Legendre sum over `panels` equal panels of [a, b].
pub fn gl_panels<T: Scalar, F: Fn(f64) -> T>(f: &F, a: f64, b: f64, panels: usize) -> T {
    let (x, w) = gl20();
    let h = (b - a) / panels as f64;
    let mut s = T::default();
    for p in 0..panels {
        let c = a + (p as f64 + 0.5) * h;
        let mut ps = T::default();
        for (xi, wi) in x.iter().zip(w) {
            ps = ps + f(c + 0.5 * h * xi) * *wi;
        }
        s = s + ps * (0.5 * h);
    }
    s
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

fn gk15<T: Scalar, F: Fn(f64) -> T>(f: &F, a: f64, b: f64) -> (T, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = fc * WGK[7];
    let mut g = fc * WG[3];
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k = k + s * WGK[j];
        if j % 2 == 1 {
            g = g + s * WG[j / 2];
        }
    }
    let k = k * h;
    let g = g * h;
    let err = (k - g).norm();
    (k, err)
}

struct Seg<T> {
    a: f64,
    b: f64,
    val: T,
    err: f64,
}

impl<T> PartialEq for Seg<T> {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl<T> Eq for Seg<T> {}
impl<T> PartialOrd for Seg<T> {
    fn partial_cmp(&self, o: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(o))
    }
}
impl<T> Ord for Seg<T> {
    fn cmp(&self, o: &Self) -> std::cmp::Ordering {
        self.err.total_cmp(&o.err)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct QuadOpts {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_segments: usize,
}

impl Default for QuadOpts {
    fn default() -> Self {
        QuadOpts { abs_tol: 1e-12, rel_tol: 1e-10, max_segments: 20_000 }
    }
}

/// Globally adaptive Gauss–Kronrod 7/15 quadrature over [a, b]
/// (optionally pre-split at `breaks`). Returns value and error estimate.
pub fn integrate<T: Scalar, F: Fn(f64) -> T>(
    f: &F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOpts,
) -> Result<(T, f64)> {
    if a == b {
        return Ok((T::default(), 0.0));
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
    let mut pts = vec![lo];
    let mut inner: Vec<f64> = breaks.iter().copied().filter(|&x| x > lo && x < hi).collect();
    inner.sort_by(|x, y| x.total_cmp(y));
    pts.extend(inner);
    pts.push(hi);
    let mut heap = BinaryHeap::new();
    let mut total = T::default();
    let mut total_err = 0.0;
    for w in pts.windows(2) {
        let (v, e) = gk15(f, w[0], w[1]);
        total = total + v;
        total_err += e;
        heap.push(Seg { a: w[0], b: w[1], val: v, err: e });
    }
    while total_err > opts.abs_tol.max(opts.rel_tol * total.norm()) {
        if heap.len() >= opts.max_segments {
            return Err(Error::NoConvergence(format!(
                "error estimate {total_err:e} after {} segments",
                heap.len()
            )));
        }
        let s = heap.pop().expect("non-empty heap");
        let m = 0.5 * (s.a + s.b);
        if m <= s.a || m >= s.b {
            heap.push(s);
            return Err(Error::NoConvergence("segment width underflow".into()));
        }
        let (v1, e1) = gk15(f, s.a, m);
        let (v2, e2) = gk15(f, m, s.b);
        total = total - s.val + v1 + v2;
        total_err += e1 + e2 - s.err;
        heap.push(Seg { a: s.a, b: m, val: v1, err: e1 });
        heap.push(Seg { a: m, b: s.b, val: v2, err: e2 });
    }
    // re-sum to limit drift from incremental updates
    let mut v = T::default();
    let mut e = 0.0;
    for s in heap.iter() {
        v = v + s.val;
        e += s.err;
    }
    Ok((v * sign, e))
}

/// Integral over [a, ∞) via the map x = a + s/(1-s).
pub fn integrate_to_inf<T: Scalar, F: Fn(f64) -> T>(f: &F, a: f64, opts: QuadOpts) -> Result<(T, f64)> {
    let g = |s: f64| {
        if s >= 1.0 {
            return T::default();
        }
        let d = 1.0 - s;
        f(a + s / d) * (1.0 / (d * d))
    };
    integrate(&g, 0.0, 1.0, &[], opts)
}

/// Chebyshev–Lobatto nodes on [-1, 1], increasing.
pub fn lobatto_nodes(m: usize) -> Vec<f64> {
    (0..m).map(|j| -(std::f64::consts::PI * j as f64 / (m - 1) as f64).cos()).collect()
}

/// `S[i][j] = ∫_{-1}^{x_i} ℓ_j(x) dx` for the Lagrange basis on the Lobatto
/// nodes; `S · f` gives the running integral of the interpolant.
pub fn cumulative_matrix(m: usize) -> DMatrix<f64> {
    let x = lobatto_nodes(m);
    let cheb = |k: usize, t: f64| (k as f64 * t.clamp(-1.0, 1.0).acos()).cos();
    let v = DMatrix::from_fn(m, m, |i, k| cheb(k, x[i]));
    // antiderivative of T_k for k ≥ 2
    let anti = |k: usize, t: f64| 0.5 * (cheb(k + 1, t) / (k + 1) as f64 - cheb(k - 1, t) / (k - 1) as f64);
    let w = DMatrix::from_fn(m, m, |i, k| {
        let t = x[i];
        match k {
            0 => t + 1.0,
            1 => 0.5 * (t * t - 1.0),
            _ => anti(k, t) - anti(k, -1.0),
        }
    });
    let vinv = v.try_inverse().expect("Chebyshev Vandermonde is invertible");
    w * vinv
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(7);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(12)).sum();
        assert_relative_eq!(s, 2.0 / 13.0, epsilon = 1e-14);
        assert_relative_eq!(w.iter().sum::<f64>(), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn adaptive_handles_peak() {
        let f = |x: f64| 1.0 / (1e-4 + x * x);
        let (v, _) = integrate(&f, -1.0, 1.0, &[], QuadOpts::default()).unwrap();
        assert_relative_eq!(v, 2.0 * (1.0f64 / 1e-2).atan() / 1e-2, max_relative = 1e-10);
    }

    #[test]
    fn complex_oscillatory() {
        let f = |x: f64| Complex64::new(0.0, 20.0 * x).exp();
        let (v, _) = integrate(&f, 0.0, 1.0, &[], QuadOpts::default()).unwrap();
        let exact = (Complex64::new(0.0, 20.0).exp() - 1.0) / Complex64::new(0.0, 20.0);
        assert!((v - exact).norm() < 1e-12);
    }

    #[test]
    fn half_line() {
        let f = |x: f64| (-x).exp();
        let (v, _) = integrate_to_inf(&f, 0.0, QuadOpts::default()).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-11);
    }

    #[test]
    fn cumulative_matrix_integrates_exp() {
        let m = 17;
        let s = cumulative_matrix(m);
        let x = lobatto_nodes(m);
        let f: Vec<f64> = x.iter().map(|t| t.exp()).collect();
        for i in 0..m {
            let v: f64 = (0..m).map(|j| s[(i, j)] * f[j]).sum();
            assert_relative_eq!(v, x[i].exp() - (-1.0f64).exp(), epsilon = 1e-14);
        }
    }
}
