//! Patch grouping and the patch dependence matrix `A`.

mod dependence;
mod kmeans;

pub use dependence::{
    build_dependence, median_kernel_width, similarity_kernel, DependenceMatrix, Neighborhoods,
};
pub use kmeans::{kmeans_group, PatchGrouping};
