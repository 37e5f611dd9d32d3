//! Numerical laboratory for the Lagrangian mean curvature flow in potential
//! form, `∂u/∂t = θ(D²u) + κu`, on flat tori.
//!
//! The graph of `du` over `Tⁿ` is a Lagrangian submanifold of the flat
//! `T*Tⁿ`; its Lagrangian angle is `θ = Σ arctan λ_i(D²u)` and its induced
//! metric is `μ = I + (D²u)²`. The crate integrates the flow and checks the
//! analytic estimates that drive its stability theory: the angle expansion,
//! the parabolic evolution inequalities, the monotone quantity
//! `ψ = C₀u² + C₁|du|² + |D²u|²` and the decay of the flow to a flat torus.

pub mod experiment;
pub mod field;
pub mod flow;
pub mod geometry;
pub mod initial;
pub mod stats;
pub mod verify;
