//! Concrete trees, percolation clusters and profiles.

mod decorated;
mod percolation;
mod profiles;
mod spec;

pub use decorated::{
    decoration_mtp_audit, line_with_decorations, spine_is_line, DecorationAudit, DecorationLaw, DecorationShape,
    Rooting,
};
pub use percolation::{bernoulli_cluster, PercolationParams};
pub use profiles::{
    automaton_profile, canopy_profile, canopy_root_level_sampler, line_profile, perron_growth, regular_profile,
    singleton_profile, subtree_profile, TransferAutomaton,
};
pub use spec::ProfileSpec;
