//! Finite-dimensional side of the Ljapunov-Schmidt scheme for three
//! perturbed critical elliptic problems (Brezis-Nirenberg, almost-critical,
//! and Coron's problem on a perforated domain).
//!
//! The crate evaluates reduced energies of multi-bubble and tower-of-bubble
//! ansatz configurations, finds and classifies their critical points,
//! assembles the corresponding approximate solutions, and measures how the
//! PDE residual of the ansatz scales with the perturbation parameter.
//!
//! Main pieces:
//!
//! - [`geometry`]: domain specifications (balls, annuli, perforated domains,
//!   boundary meshes) and boundary sampling.
//! - [`green`]: the Green's function engine (G, its regular part H, the
//!   Robin function tau, and gradients), analytic on balls and by boundary
//!   collocation with exterior charges elsewhere.
//! - [`quad`]: interior quadrature with geometric refinement near
//!   concentration points.
//! - [`bubble`]: bubbles, linearisation kernels, Dirichlet projections and
//!   the problem nonlinearities.
//! - [`reduced`]: the four configuration regimes and their reduced energies
//!   with analytic gradients.
//! - [`search`]: minimisation, saddle search, classification and seeded
//!   multistart over configuration space.
//! - [`assemble`]: multi-bubble approximate solutions, their energy, and
//!   residual-norm sweeps in epsilon.

pub mod assemble;
pub mod bubble;
pub mod error;
pub mod geometry;
pub mod green;
pub mod jsonio;
pub mod numdiff;
pub mod quad;
pub mod reduced;
pub mod search;

pub use error::{Error, Result};
