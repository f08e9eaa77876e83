//! Numerical toolkit for the anisotropic differential geometry of closed
//! hypersurfaces in Euclidean space.
//!
//! The crate evaluates smooth anisotropy functions `γ` on the unit sphere
//! together with their Wulff shapes and dual Minkowski norms, samples
//! parametrized hypersurfaces with their full (anisotropic) curvature data,
//! solves the convex minimax problem defining the anisotropic extrinsic
//! radius, and assembles machine-readable verification reports for the
//! integral identities, inequality margins, pinching quantities, and
//! Hausdorff distances that tie these objects together.
//!
//! Module map:
//! - [`anisotropy`] — γ and its 1-homogeneous extension, the tangential
//!   operator `A_γ`, Wulff points, the dual norm `γ*` and its gradient,
//!   Fenchel gaps, and the convexity constant `λ`.
//! - [`surface`] — sphere quadrature grids and sampled hypersurfaces
//!   (positions, inward normals, shape operators, anisotropic curvatures,
//!   area weights) with weighted `L^p` norms.
//! - [`radius`] — the anisotropic extrinsic radius and its minimizing
//!   center as a subgradient minimax solve.
//! - [`verify`] — Hsiung–Minkowski residuals, curvature–radius products,
//!   pinching and deviation quantities, Hausdorff distances, and full
//!   reports.

pub mod anisotropy;
mod error;
pub(crate) mod harmonics;
pub mod radius;
pub mod surface;
pub mod verify;

pub use error::{Error, Result};
