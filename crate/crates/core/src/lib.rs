//! Discrete optimal transport with a complete description of the dual
//! optimizers.
//!
//! The crate is organised bottom-up:
//!
//! * [`scalar`] and [`measure`]: exact rational measures, costs, couplings and
//!   potentials.
//! * [`simplex`] and [`duality`]: the transportation simplex and the basic
//!   primal/dual checks (cost, complementarity, c-transform).
//! * [`graph`]: support graphs of couplings, their components, and the union
//!   graph of all primal optimizers.
//! * [`polytope`]: the set of all dual optimizers as per-component base duals
//!   plus interval constraints on component offsets.
//! * [`entropic`]: log-domain Sinkhorn and the exact small-temperature limit of
//!   the entropic dual potentials (the centroid).
//! * [`game`]: Cournot-Nash and Stackelberg-Cournot-Nash equilibria for
//!   populations with finitely many types and actions.
//! * [`io`]: JSON schemas shared with the command-line front end.

pub mod duality;
pub mod entropic;
pub mod error;
pub mod game;
pub mod graph;
pub mod io;
pub mod measure;
pub mod polytope;
pub mod scalar;
pub mod simplex;

pub use duality::{c_transform, is_complementary, transport_cost};
pub use entropic::{
    build_centroid_tree, centroid, entropy, sinkhorn, sinkhorn_f64, CentroidResult, CentroidTree,
    EntropicSolution, SinkhornConfig,
};
pub use error::{OtError, Result};
pub use graph::{
    component_dual, connected_components, connected_ordering, support_graph, union_graph,
    Component, ComponentPartition, SupportGraph, Vertex,
};
pub use measure::{CostMatrix, DiscreteMeasure, DualPair, TransportPlan};
pub use polytope::{characterize_duals, is_dual_optimizer, AlphaConstraint, DualPolytope};
pub use scalar::Scalar;
pub use simplex::{solve, solve_dual, solve_primal, TransportSolution};
