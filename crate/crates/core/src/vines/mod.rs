//! Regular vines: structures, validation, enumeration for `d <= 5`, and
//! vine-level measures of non-simplifyingness with worst-, best- and
//! average-case scores.

mod score;
mod structure;

pub use score::{
    default_edge_spec, edge_kernel, edge_measure, vine_measure, vine_scores, Aggregation, VineScoreReport, VineValue,
};
pub use structure::{enumerate_vines, vine_count, VineEdge, VineStructure, MAX_ENUM_DIM};
