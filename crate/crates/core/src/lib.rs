//! Phase-covariant qubit dynamics under time-local master equations.
//!
//! The generator combines heating, dissipation and pure dephasing with
//! time-dependent (possibly negative) rates plus a frequency shift. The crate
//! provides the closed-form solution through integrated coefficients, the
//! equivalent affine Bloch map, complete-positivity checks, detection of
//! non-Markovian rate negativity, concrete physical rate models, and a direct
//! ODE integrator used as an independent oracle.
//!
//! Conventions: `|1⟩` is the ground state and the first basis vector, the
//! Bloch component `x3 = 2 P1 - 1`, and the coherence `α = ⟨1|ρ|2⟩ = (x1 - i x2)/2`.

// Parameter checks are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coeffs;
pub mod cptp;
pub mod dynamics;
pub mod error;
pub mod models;
pub mod nonmarkov;
pub mod ode_oracle;
pub mod quadrature;

pub use coeffs::{
    integrate_profile, markovian_coefficients, weak_coupling_integrals, Channel, CoefficientSet,
    QuadratureConfig, RateKind, RateProfile,
};
pub use cptp::{choi_spectrum, cp_paper, cp_report, pqwy, CpReport};
pub use dynamics::{
    additivity_report, apply_bloch, bloch_map, evolve_state, AffineBlochMap, QubitState,
};
pub use error::{Error, Result};
pub use models::{tabulated_profile, Kernel, OhmicParams, ThermalParams};
pub use nonmarkov::{
    crossover_scan, negative_intervals, Crossover, Interval, NmReport, ScanSettings, Verdict,
};
pub use ode_oracle::{integrate_me, integrate_me_at, DensityMatrix, OdeConfig};

pub use num_complex::Complex64;
