//! Rooted tree windows, sphere profiles, growth statistics and the spine.

mod format;
mod profile;
mod spine;
mod window;

pub(crate) use format::header_fields;
pub use format::{parse_tree, write_tree};
pub use profile::{
    growth_estimates, ln_ambient_sphere, normalize, sphere_sizes, GrowthEstimate, NormalizedProfile, SphereProfile,
};
pub use spine::{decorations, is_weak, spine, Decoration, Decorations, Spine};
pub use window::RootedTreeWindow;
pub(crate) use window::WindowBuilder;
