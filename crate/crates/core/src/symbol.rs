//! Polynomial Hamiltonians, their critical-point data, and the text format
//! they are read from.

use crate::error::{Error, Result};
use crate::numerics::Poly;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Default absolute tolerance for criticality checks.
pub const CRITICAL_TOL: f64 = 1e-10;

/// A point of T*ℝⁿ, coordinates ordered (x₁..xₙ, ξ₁..ξₙ).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub n: usize,
    pub coords: Vec<f64>,
}

impl PhasePoint {
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() || coords.len() % 2 != 0 {
            return Err(Error::InvalidArgument(format!("phase point needs 2n coordinates, got {}", coords.len())));
        }
        Ok(PhasePoint { n: coords.len() / 2, coords })
    }

    pub fn origin(n: usize) -> Self {
        PhasePoint { n, coords: vec![0.0; 2 * n] }
    }

    pub fn x(&self, j: usize) -> f64 {
        self.coords[j]
    }

    pub fn xi(&self, j: usize) -> f64 {
        self.coords[self.n + j]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolySymbol {
    pub n: usize,
    pub poly: Poly,
    /// Subprincipal symbol at the critical point.
    pub subprincipal_at_z0: f64,
}

impl PolySymbol {
    pub fn new(poly: Poly, subprincipal_at_z0: f64) -> Result<Self> {
        if poly.nvars() % 2 != 0 || poly.nvars() == 0 {
            return Err(Error::InvalidArgument("symbol needs an even, positive variable count".into()));
        }
        Ok(PolySymbol { n: poly.nvars() / 2, poly, subprincipal_at_z0 })
    }

    fn check(&self, z: &PhasePoint) -> Result<()> {
        if z.n != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: z.n });
        }
        Ok(())
    }

    pub fn evaluate(&self, z: &PhasePoint) -> Result<f64> {
        self.check(z)?;
        Ok(self.poly.eval(&z.coords))
    }

    pub fn gradient(&self, z: &PhasePoint) -> Result<DVector<f64>> {
        self.check(z)?;
        let m = 2 * self.n;
        Ok(DVector::from_fn(m, |i, _| self.poly.partial(i).eval(&z.coords)))
    }

    /// Exact Hessian; symmetric at coefficient level since ∂ᵢ∂ⱼ and ∂ⱼ∂ᵢ
    /// produce the same monomials.
    pub fn hessian(&self, z: &PhasePoint) -> Result<DMatrix<f64>> {
        self.check(z)?;
        let m = 2 * self.n;
        let mut h = DMatrix::zeros(m, m);
        for i in 0..m {
            let di = self.poly.partial(i);
            for j in i..m {
                let v = di.partial(j).eval(&z.coords);
                h[(i, j)] = v;
                h[(j, i)] = v;
            }
        }
        Ok(h)
    }

    /// Degree-j terms about the origin.
    pub fn homogeneous_part(&self, j: u32) -> Poly {
        self.poly.homogeneous_part(j)
    }

    /// Degree-j terms of `y ↦ p(z0 + y)`.
    pub fn homogeneous_part_at(&self, j: u32, z0: &PhasePoint) -> Result<Poly> {
        self.check(z0)?;
        Ok(self.poly.shift(&z0.coords).homogeneous_part(j))
    }

    /// `y ↦ p(z0 + y) − p(z0)`.
    pub fn centered(&self, z0: &PhasePoint) -> Result<Poly> {
        self.check(z0)?;
        let s = self.poly.shift(&z0.coords);
        let c = s.coeff(&vec![0; 2 * self.n]);
        Ok(s.sub(&Poly::constant(2 * self.n, c)))
    }

    /// The Hamiltonian vector field `J∇p`, one polynomial per component.
    pub fn vector_field(&self) -> Vec<Poly> {
        hamiltonian_field(&self.poly)
    }
}

/// `X = J∇p` with `J = [[0, I], [−I, 0]]`: `ẋ = ∂p/∂ξ`, `ξ̇ = −∂p/∂x`.
pub fn hamiltonian_field(p: &Poly) -> Vec<Poly> {
    let n = p.nvars() / 2;
    let mut out = Vec::with_capacity(2 * n);
    for j in 0..n {
        out.push(p.partial(n + j));
    }
    for j in 0..n {
        out.push(p.partial(j).scale(-1.0));
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockType {
    /// ½w(x² + ξ²)
    Elliptic,
    /// ½w(x² − ξ²)
    Hyperbolic,
}

impl BlockType {
    pub fn sign(self) -> i32 {
        match self {
            BlockType::Elliptic => 1,
            BlockType::Hyperbolic => -1,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CriticalData {
    pub z0: PhasePoint,
    pub energy: f64,
    pub w: Vec<f64>,
    pub sigma: Vec<BlockType>,
}

impl CriticalData {
    pub fn n(&self) -> usize {
        self.w.len()
    }

    /// The Hessian of the declared quadratic normal form.
    pub fn normal_form_hessian(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut h = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            h[(j, j)] = self.w[j];
            h[(n + j, n + j)] = self.w[j] * self.sigma[j].sign() as f64;
        }
        h
    }

    pub fn elliptic(&self, j: usize) -> bool {
        self.sigma[j] == BlockType::Elliptic
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalityReport {
    pub gradient_norm: f64,
    pub hessian_residual: f64,
    pub energy_residual: f64,
    pub extracted_w: Vec<f64>,
    pub extracted_sigma: Vec<Option<BlockType>>,
    pub pass: bool,
    pub message: String,
}

pub fn verify_critical(p: &PolySymbol, cd: &CriticalData, tol: f64) -> CriticalityReport {
    let fail = |msg: String| CriticalityReport {
        gradient_norm: f64::NAN,
        hessian_residual: f64::NAN,
        energy_residual: f64::NAN,
        extracted_w: vec![],
        extracted_sigma: vec![],
        pass: false,
        message: msg,
    };
    if cd.w.len() != p.n || cd.sigma.len() != p.n || cd.z0.n != p.n {
        return fail(format!("dimension mismatch: symbol n = {}, data n = {}", p.n, cd.w.len()));
    }
    if cd.w.iter().any(|w| *w == 0.0) {
        return fail("zero frequency".into());
    }
    let g = p.gradient(&cd.z0).expect("dimension checked");
    let h = p.hessian(&cd.z0).expect("dimension checked");
    let e = p.evaluate(&cd.z0).expect("dimension checked");
    let target = cd.normal_form_hessian();
    let hres = (&h - &target).abs().max();
    let n = p.n;
    let extracted_w: Vec<f64> = (0..n).map(|j| h[(j, j)]).collect();
    let extracted_sigma = (0..n)
        .map(|j| {
            let (a, b) = (h[(j, j)], h[(n + j, n + j)]);
            if a == 0.0 || (a - b).abs() > tol.max(1e-12) && (a + b).abs() > tol.max(1e-12) {
                None
            } else if (a - b).abs() <= tol.max(1e-12) {
                Some(BlockType::Elliptic)
            } else {
                Some(BlockType::Hyperbolic)
            }
        })
        .collect();
    let gn = g.norm();
    let eres = (e - cd.energy).abs();
    let pass = gn <= tol && hres <= tol && eres <= tol;
    let message = if pass {
        "critical point verified".to_string()
    } else {
        format!("gradient norm {gn:e}, Hessian residual {hres:e}, energy residual {eres:e}")
    };
    CriticalityReport { gradient_norm: gn, hessian_residual: hres, energy_residual: eres, extracted_w, extracted_sigma, pass, message }
}

/// A Hamiltonian together with its declared critical data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Hamiltonian {
    pub name: String,
    pub symbol: PolySymbol,
    pub critical: CriticalData,
}

/// Parse the Hamiltonian text format:
///
/// ```text
/// # comment
/// name example1
/// n 2
/// z0 0 0 0 0
/// energy 0
/// subprincipal 0
/// frequencies 1 -1
/// blocks e e
/// 2 0 0 0  0.5
/// ```
///
/// Each monomial line lists 2n exponents (x₁..xₙ ξ₁..ξₙ) then a coefficient.
/// Repeated monomials accumulate.
pub fn parse_hamiltonian(text: &str) -> Result<Hamiltonian> {
    let mut name = String::from("unnamed");
    let mut n: Option<usize> = None;
    let mut z0: Option<Vec<f64>> = None;
    let mut energy: Option<f64> = None;
    let mut sub = 0.0;
    let mut w: Option<Vec<f64>> = None;
    let mut blocks: Option<Vec<BlockType>> = None;
    let mut mono: Vec<(usize, Vec<u32>, f64)> = Vec::new();
    let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
    let floats = |line: usize, toks: &[&str]| -> Result<Vec<f64>> {
        toks.iter().map(|t| parse_real(t).ok_or_else(|| perr(line, &format!("bad number `{t}`")))).collect()
    };
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        match toks[0] {
            "name" => name = toks[1..].join(" "),
            "n" => {
                let v = toks.get(1).and_then(|t| t.parse::<usize>().ok()).ok_or_else(|| perr(line, "bad n"))?;
                if v == 0 {
                    return Err(perr(line, "n must be positive"));
                }
                n = Some(v);
            }
            "z0" => z0 = Some(floats(line, &toks[1..])?),
            "energy" => energy = Some(floats(line, &toks[1..2.min(toks.len())])?.first().copied().ok_or_else(|| perr(line, "missing energy"))?),
            "subprincipal" => sub = floats(line, &toks[1..2.min(toks.len())])?.first().copied().ok_or_else(|| perr(line, "missing value"))?,
            "frequencies" => w = Some(floats(line, &toks[1..])?),
            "blocks" => {
                let b = toks[1..]
                    .iter()
                    .map(|t| match *t {
                        "e" | "elliptic" | "+1" | "1" => Ok(BlockType::Elliptic),
                        "h" | "hyperbolic" | "-1" => Ok(BlockType::Hyperbolic),
                        other => Err(perr(line, &format!("unknown block type `{other}`"))),
                    })
                    .collect::<Result<Vec<_>>>()?;
                blocks = Some(b);
            }
            _ => {
                let nn = n.ok_or_else(|| perr(line, "monomial before `n`"))?;
                if toks.len() != 2 * nn + 1 {
                    return Err(perr(line, &format!("monomial needs {} exponents and a coefficient", 2 * nn)));
                }
                let e = toks[..2 * nn]
                    .iter()
                    .map(|t| t.parse::<u32>().map_err(|_| perr(line, &format!("bad exponent `{t}`"))))
                    .collect::<Result<Vec<_>>>()?;
                let c = parse_real(toks[2 * nn]).ok_or_else(|| perr(line, "bad coefficient"))?;
                mono.push((line, e, c));
            }
        }
    }
    let n = n.ok_or_else(|| perr(0, "missing `n`"))?;
    let z0 = z0.unwrap_or_else(|| vec![0.0; 2 * n]);
    if z0.len() != 2 * n {
        return Err(Error::DimensionMismatch { expected: 2 * n, got: z0.len() });
    }
    let w = w.ok_or_else(|| perr(0, "missing `frequencies`"))?;
    if w.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: w.len() });
    }
    let sigma = blocks.unwrap_or_else(|| vec![BlockType::Elliptic; n]);
    if sigma.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: sigma.len() });
    }
    let mut poly = Poly::zero(2 * n);
    for (_, e, c) in mono {
        poly.add_term(e, c);
    }
    let symbol = PolySymbol::new(poly, sub)?;
    let z0 = PhasePoint::new(z0)?;
    let energy = match energy {
        Some(e) => e,
        None => symbol.evaluate(&z0)?,
    };
    Ok(Hamiltonian { name, symbol, critical: CriticalData { z0, energy, w, sigma } })
}

/// Reals, plus the forms `sqrt(a)`, `pi`, `a/b` and `-…` of them.
fn parse_real(t: &str) -> Option<f64> {
    if let Ok(v) = t.parse::<f64>() {
        return Some(v);
    }
    if let Some(rest) = t.strip_prefix('-') {
        return parse_real(rest).map(|v| -v);
    }
    if let Some((a, b)) = t.split_once('/') {
        return Some(parse_real(a)? / parse_real(b)?);
    }
    if t == "pi" {
        return Some(std::f64::consts::PI);
    }
    if let Some(inner) = t.strip_prefix("sqrt(").and_then(|s| s.strip_suffix(')')) {
        return parse_real(inner).map(f64::sqrt);
    }
    None
}

/// Write a Hamiltonian in the text format read by [`parse_hamiltonian`].
pub fn format_hamiltonian(h: &Hamiltonian) -> String {
    let mut s = format!("name {}\nn {}\n", h.name, h.symbol.n);
    let join = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ");
    s += &format!("z0 {}\n", join(&h.critical.z0.coords));
    s += &format!("energy {:?}\nsubprincipal {:?}\n", h.critical.energy, h.symbol.subprincipal_at_z0);
    s += &format!("frequencies {}\n", join(&h.critical.w));
    let b: Vec<&str> =
        h.critical.sigma.iter().map(|b| if *b == BlockType::Elliptic { "e" } else { "h" }).collect();
    s += &format!("blocks {}\n", b.join(" "));
    for (e, c) in h.symbol.poly.terms() {
        let es: Vec<String> = e.iter().map(|k| k.to_string()).collect();
        s += &format!("{} {c:?}\n", es.join(" "));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use approx::assert_relative_eq;

    #[test]
    fn example1_values() {
        let h = fixtures::example1();
        let p = &h.symbol;
        assert_eq!(p.evaluate(&PhasePoint::origin(2)).unwrap(), 0.0);
        let z = PhasePoint::new(vec![0.0, 1.0, 0.0, 0.0]).unwrap();
        // ½(0 − 1) + 1 = 1/2
        assert_relative_eq!(p.evaluate(&z).unwrap(), 0.5);
    }

    #[test]
    fn example1_hessian_is_normal_form() {
        let h = fixtures::example1();
        let hs = h.symbol.hessian(&h.critical.z0).unwrap();
        let d = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 1.0, -1.0]));
        assert_eq!(hs, d);
        assert!(verify_critical(&h.symbol, &h.critical, CRITICAL_TOL).pass);
    }

    #[test]
    fn siegel_moser_cubic_part() {
        let h = fixtures::siegel_moser();
        let p3 = h.symbol.homogeneous_part(3);
        let mut want = Poly::zero(4);
        want.add_term(vec![1, 1, 1, 0], 1.0);
        want.add_term(vec![2, 0, 0, 1], 0.5);
        want.add_term(vec![0, 0, 2, 1], -0.5);
        assert_eq!(p3, want);
        assert!(verify_critical(&h.symbol, &h.critical, CRITICAL_TOL).pass);
    }

    #[test]
    fn shifted_point_fails() {
        let h = fixtures::siegel_moser();
        let mut cd = h.critical.clone();
        cd.z0 = PhasePoint::new(vec![0.1, 0.0, 0.0, 0.0]).unwrap();
        let r = verify_critical(&h.symbol, &cd, CRITICAL_TOL);
        assert!(!r.pass);
        assert!(r.gradient_norm > 1e-3);
    }

    #[test]
    fn gradient_of_half_norm_square() {
        let q = Poly::quadratic(2, &[0.5, 0.0, 0.0, 0.5]);
        let p = PolySymbol::new(q, 0.0).unwrap();
        let z = PhasePoint::new(vec![0.3, -1.2]).unwrap();
        let g = p.gradient(&z).unwrap();
        assert_relative_eq!(g[0], 0.3);
        assert_relative_eq!(g[1], -1.2);
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let p = fixtures::example1().symbol;
        let z = PhasePoint::origin(3);
        assert!(matches!(p.evaluate(&z), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn format_roundtrip() {
        let h = fixtures::siegel_moser();
        let back = parse_hamiltonian(&format_hamiltonian(&h)).unwrap();
        assert_eq!(back, h);
    }

    #[test]
    fn parse_errors_carry_line() {
        let e = parse_hamiltonian("n 1\nfrequencies 1\n2 0 x\n").unwrap_err();
        assert!(matches!(e, Error::Parse { line: 3, .. }));
    }
}
