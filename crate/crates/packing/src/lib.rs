//! Congruent circle packing in the unit square on the three-weight engine.
//!
//! Every circle has two coordinate variables and a box factor. Pairwise
//! non-overlap factors exist only between neighbours, maintained through an
//! r-tree by [`PairMaintainer`], which recycles detached factors from a pool.

pub mod geometry;
pub mod instance;
pub mod maintain;
pub mod overlap;
pub mod rtree;
pub mod run;
pub mod steering;

pub use geometry::{separate, BoxFactor, PairFactor};
pub use instance::{
    build_instance, density, initial_positions, radius_for_density, CircleVars, PackingError, PackingInstance,
};
pub use maintain::{PairMaintainer, PairStats};
pub use overlap::{box_violation, max_overlap, OverlapReport};
pub use rtree::{Aabb, RTree, RTreeError};
pub use run::{feasibility, read_packing, write_packing, PackConfig, PackError, PackStatus, Packer};
pub use steering::{SteerCommand, SteerError, SteerHandle, SteerParams, SteeringReasoner};
