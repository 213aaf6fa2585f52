//! Fibred coarse embeddings of warped cones: cocycles of the acting group,
//! chart trivializations, R-local actions and conditionally negative
//! definite kernels.

mod charts;
mod cnd;
mod cocycle;
mod embed;
mod rlocal;

pub use charts::{
    build_charts, chart_transition, trivialization, verify_requirement_1, verify_requirement_2, ChartAtlas, ChartPoint,
    ExcludedChart, FibredChart, Requirement1Report, Requirement2Report, TransitionIsometry, TransitionViolation,
};
pub use cnd::{check_cnd, cnd_kernel, CndReport, CndTable};
pub use cocycle::{Cocycle, CocycleKind, Key, SparseVector};
pub use embed::{
    apply_linear_pair, apply_pair, build_section, product_embedding, Envelope, EnvelopePoint, FibredVector, Section,
};
pub use rlocal::{
    build_rlocal_action, voronoi_partition, ClaimStatus, CocycleBound, Partition, RLocalAction, RLocalReport,
};
