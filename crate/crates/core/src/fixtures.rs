//! Bundled Hamiltonians.

use crate::numerics::Poly;
use crate::symbol::{parse_hamiltonian, BlockType, CriticalData, Hamiltonian, PhasePoint, PolySymbol};

pub const EXAMPLE1: &str = include_str!("../fixtures/example1.ham");
pub const SIEGEL_MOSER: &str = include_str!("../fixtures/siegel_moser.ham");

/// ½(x₁²+ξ₁²) − ½(x₂²+ξ₂²) + (x₂²+ξ₂²)², frequencies (1, −1).
pub fn example1() -> Hamiltonian {
    parse_hamiltonian(EXAMPLE1).expect("bundled fixture parses")
}

/// ½(x₁²+ξ₁²) − (x₂²+ξ₂²) + x₁ξ₁x₂ + ½(x₁²−ξ₁²)ξ₂, frequencies (1, −2).
pub fn siegel_moser() -> Hamiltonian {
    parse_hamiltonian(SIEGEL_MOSER).expect("bundled fixture parses")
}

/// Purely quadratic Hamiltonian Σ ½w_j(x_j² ± ξ_j²) at the origin.
pub fn quadratic(w: &[f64], sigma: &[BlockType]) -> Hamiltonian {
    let n = w.len();
    let mut p = Poly::zero(2 * n);
    for j in 0..n {
        let mut e = vec![0; 2 * n];
        e[j] = 2;
        p.add_term(e, 0.5 * w[j]);
        let mut e = vec![0; 2 * n];
        e[n + j] = 2;
        p.add_term(e, 0.5 * w[j] * sigma[j].sign() as f64);
    }
    Hamiltonian {
        name: "quadratic".into(),
        symbol: PolySymbol::new(p, 0.0).expect("even variable count"),
        critical: CriticalData { z0: PhasePoint::origin(n), energy: 0.0, w: w.to_vec(), sigma: sigma.to_vec() },
    }
}
