//! Markovian open-system dynamics of a quantum system in an ideal Maxwell gas,
//! built directly from microscopic scattering amplitudes.
//!
//! The crate has three dynamical backends sharing one numerical toolbox:
//!
//! * [`montecore`] — the monitoring calculus on finite system⊗probe spaces:
//!   collision probabilities, click/no-click conditioning, and the master-equation
//!   generator they converge to.
//! * [`channelme`] — the discrete-channel master equation for an immobile object
//!   with internal energy levels: complex rate tensor, energy shifts, Lindblad-type
//!   generator.
//! * [`qlbe`] — the quantum linear Boltzmann equation for a Brownian tracer
//!   particle: the L function, the in-rate kernel, classical out-rates, and the
//!   momentum-grid generator.
//!
//! Supporting modules: [`scattering`] (pluggable amplitude models), [`gasenv`]
//! (thermal gas parameters and sampling), [`quad`] (Gaussian quadrature plus a
//! Monte Carlo oracle), [`evolve`] (RK4 time integration with trace/positivity
//! monitoring), and [`scenario`]/[`runner`] (the CLI surface).
//!
//! Natural units throughout: ħ = 1, k_B = 1.

pub mod channelme;
pub mod evolve;
pub mod gasenv;
pub mod linalg;
pub mod montecore;
pub mod par;
pub mod qlbe;
pub mod quad;
pub mod runner;
pub mod scattering;
pub mod scenario;
pub mod testkit;

pub use linalg::{CMatrix, CVector, C64};
