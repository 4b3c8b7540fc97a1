//! Numerics for semiclassical trace formulas at a non-degenerate critical
//! energy: linearized and higher-order Hamiltonian flow at an equilibrium,
//! periods and fixed spaces, the first non-vanishing homogeneous invariant of
//! the phase, Liouville-measure cone integrals, degenerate oscillatory
//! integrals, and the leading trace coefficients, each paired with an
//! independent brute-force check.

pub mod error;
pub mod fixtures;
pub mod flow;
pub mod normal_forms;
pub mod numerics;
pub mod oscillatory;
pub mod periods;
pub mod rk_cone;
pub mod spectral_oracle;
pub mod symbol;
pub mod trace;

pub use error::{Error, Result};
