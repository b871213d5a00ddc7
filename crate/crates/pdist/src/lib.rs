//! Bottleneck and q-Wasserstein distances between persistence diagrams.
//!
//! Diagrams are compared by reducing to a bipartite matching problem over
//! the off-diagonal points and their diagonal projections. The solvers
//! exploit the planar structure: Hopcroft–Karp feasibility tests drive the
//! bottleneck distance with a deletable k-d tree answering the neighbor
//! queries, and a Gauss–Seidel auction with epsilon-scaling computes
//! delta-approximate Wasserstein distances with a weighted k-d tree (or a
//! lazy-heap baseline) answering best-object queries. Diagrams with integer
//! multiplicities run on an auction over multi-points that splits mass
//! lazily into slices. Exact reference solvers for small instances live in
//! [`oracle`].

pub mod auction;
pub mod bottleneck;
pub mod diagram;
mod error;
pub mod instance;
pub mod masses;
pub mod oracle;
mod rng;
pub mod spatial;

pub use auction::{wasserstein, wasserstein_with, AuctionEngine, AuctionParams, RunReport};
pub use bottleneck::{
    approx_bottleneck, approx_bottleneck_with, exact_bottleneck, exact_bottleneck_with,
    BottleneckEngine,
};
pub use diagram::{parse_diagram, remove_common_points, DiagramPoint, PersistenceDiagram};
pub use error::{Error, Result};
pub use instance::{build_instance, build_mass_instance, MassInstance, MatchingInstance};
pub use masses::{wasserstein_masses, wasserstein_masses_with, MassAuctionParams};
