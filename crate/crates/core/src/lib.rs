//! Gautschi-type exponential wave integrators for the nonlinear Klein-Gordon equation
//! `eps^2 u_tt - u_xx + u/eps^2 + f(u) = 0` on a periodic interval, in the
//! nonrelativistic regime `0 < eps << 1`.
//!
//! The crate is layered bottom-up:
//!
//! - [`grid`]: periodic grid, FFT-based transforms, spectral derivatives, H^1 norm
//! - [`problem`]: nonlinearity, initial data, initial state, discrete energy
//! - [`weights`]: mode frequencies and the oscillatory moment integrals
//! - [`ewi`]: first step, symmetric main step and the time loop at orders 2, 4, 6
//! - [`rk4`]: classical Runge-Kutta baseline on the same spatial discretization
//! - [`harness`]: configuration, reference caching and the convergence/energy studies

// `!(x > 0.0)` is used on purpose so NaN is rejected; per-mode loops index parallel arrays.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod ewi;
pub mod grid;
pub mod harness;
pub mod problem;
pub mod rk4;
pub mod weights;

pub use error::{KgeError, Result};
pub use ewi::{
    first_step, integrate, main_step, nonlinearity_time_derivatives, time_derivatives_of_u, DerivativeBundle,
    EwiIntegrator, NonlinearityDerivatives, StepPair,
};
pub use grid::{
    build_grid, forward_dft, h1_norm, inverse_dft, spectral_derivative, GridSpec, RealField, SpectralField,
};
pub use problem::{
    energy, initial_state, nonlinearity_field, ConstantNonlinearity, CubicNonlinearity, InitialData, KgeProblem,
    Nonlinearity, SolverState,
};
pub use rk4::{integrate_rk4, rk4_rhs, Rk4Integrator};
pub use weights::{
    build_weight_table, mode_frequencies, moment_integrals, EwiOrder, ModeFrequencies, MomentTable, WeightTable,
};
