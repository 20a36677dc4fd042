//! Numerical analysis on the Sierpinski gasket.
//!
//! The crate builds the graded vertex graphs `V_m` of the gasket in `R^{N-1}`,
//! the self-similar measure as vertex quadrature, the renormalized Dirichlet
//! energy `W_m`, and on top of those a variational solver for the semilinear
//! Dirichlet problem
//!
//! ```text
//! Δu + a(x) u = λ g(x) f(u)   on V \ V_0,      u = 0 on V_0
//! ```
//!
//! realized as restricted minimization of `I_λ = Φ − λΨ`.
//!
//! | Module | Contents |
//! |--------|----------|
//! | [`gasket`] | exact barycentric construction of `V_m`, cells, refinement |
//! | [`measure`] | vertex quadrature weights for the normalized measure |
//! | [`energy`] | fields, energy form, Laplacians, harmonic extension, Hölder bound |
//! | [`exprs`] | coefficient expression language and numeric antiderivatives |
//! | [`solver`] | energy functional, threshold `λ*`, restricted minimization, Newton, sweeps |
//! | [`spectrum`] | weighted Dirichlet eigenproblems and the decimation cross-check |
//! | [`verify`] | seeded invariant suites |

pub mod energy;
pub mod error;
pub mod exprs;
pub mod gasket;
pub mod measure;
pub mod solver;
pub mod spectrum;
pub mod verify;

pub use energy::{EnergyForm, Field};
pub use error::{Error, Result};
pub use exprs::Expr;
pub use gasket::{build_gasket, refine, CellAddress, LevelGraph, Point};
pub use measure::{integrate, vertex_weights, QuadratureWeights};
