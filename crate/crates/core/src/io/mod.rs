//! File formats. Every decoder takes untrusted bytes and reports malformed
//! input as [`Error::Format`](crate::Error::Format), never by panicking.

mod bytes;
mod checkpoint;
mod dataset;
mod grouping;
mod kspace;
mod mask;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint, CheckpointManifest,
    CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
};
pub use dataset::{dataset_paths, DType, Dataset, DatasetHeader, MAX_FRAMES, MAX_SIDE};
pub use grouping::{decode_grouping, encode_grouping, read_grouping, write_grouping, GROUPING_MAGIC};
pub use kspace::{decode_kspace, encode_kspace, read_kspace, write_kspace, KSPACE_MAGIC};
pub use mask::{
    decode_bitmap, decode_pgm, decode_sidecar, encode_bitmap, encode_pgm, read_mask, write_mask,
    MaskSidecar,
};
