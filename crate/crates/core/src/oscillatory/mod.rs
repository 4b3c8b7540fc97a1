//! Model oscillatory integrals: separable amplitudes, distribution pairings,
//! asymptotic expansions, a brute-force quadrature oracle and scaling fits.

pub mod amplitude;
pub mod distributions;
pub mod expansions;
pub mod fit;
pub mod quad;

pub use amplitude::{Factor, FnJet, Jet1, Profile, SmoothAmplitude};
pub use distributions::{ft_minus_power, pair_distribution, Distribution};
pub use expansions::{expand_rk, expand_second_nf, expand_t_rk, expand_third_nf, Expansion, ExpansionTerm};
pub use fit::{fit_expansion, fit_free_exponent, fit_scaling, log_grid, ExpansionFit, FreeExponentFit, ScalingFit};
pub use quad::{fresnel, quad_linear_t, quad_nested, quad_oscillatory, QuadResult};
