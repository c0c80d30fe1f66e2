//! Explicit element-level finite element solver for the Pennes bio-heat equation.
//!
//! The conduction load `K(T)·T` is never assembled: every step evaluates
//! `k̄_e·A_e·T_e` per element, scatters the results deterministically into
//! nodal loads and advances the lumped system with forward Euler.

pub mod bench;
pub mod element;
pub mod material;
pub mod mesh;
pub mod meshgen;
pub mod oracle;
pub mod output;
pub mod precompute;
pub mod scenario;
pub mod solver;

pub use element::{ElementKind, ElementPrecomp};
pub use material::{PropertyCurve, TissueMaterial};
pub use mesh::{Element, Mesh};
pub use solver::{BoundarySpec, Engine, ResolvedBoundary, RunControls, SimState, TimeStep};
pub use scenario::{Scenario, ScenarioError};
