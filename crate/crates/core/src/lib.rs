//! Hyperbolic ball packings on triangulated closed 3-manifolds.
//!
//! A *ball packing* assigns a positive radius to every vertex of a
//! triangulation; each tetrahedron realizes (or fails to realize) a
//! hyperbolic tetrahedron whose edge lengths are sums of endpoint radii.
//! This crate computes:
//!
//! - per-tetrahedron geometry: realizability, dihedral and solid angles,
//!   their continuous extension to non-realizable ("virtual") quadruples,
//!   and analytic derivatives ([`geometry`]);
//! - the combinatorial substrate: triangulation parsing, closed-manifold
//!   validation, built-in generators ([`complex`]);
//! - curvature `K_i = 4*pi - sum of incident solid angles`, the associated
//!   convex energy functional (relative to the unit packing), its gradient
//!   and Hessian, and the radial coordinate change `w(r)` ([`energy`]);
//! - the curvature flow `dr_i/dt = -K_i sinh(r_i)`, decay and lower-bound
//!   monitors, the regular-packing solver, Newton refinement to flat
//!   packings, and linear stability spectra ([`flow`]).
//!
//! All operations are pure functions of their inputs; parallel sections
//! reduce in a fixed order so results are bitwise reproducible across
//! thread counts.

pub mod complex;
pub mod energy;
pub mod error;
pub mod flow;
pub mod geometry;
pub mod quadrature;

pub use complex::{Complex, GeneratorKind, Packing, ValidationReport};
pub use energy::{CurvatureVector, EnergyReport};
pub use error::{Error, Result};
pub use flow::{FlowConfig, FlowMethod, FlowSample, FlowStatus, FlowTrace};
pub use geometry::{DihedralAngles, DomainGuard, Radii4, SolidAngles, TetraClass};
