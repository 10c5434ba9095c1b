//! Synthetic paired-exposure fluorescence imaging of an atom array, plus
//! dataset persistence, normalisation, splits and large-array stitching.

mod dataset;
mod geometry;
mod io;
mod norm;
mod optics;
mod render;
mod stitch;

pub use dataset::{
    generate_dataset, Dataset, GenerateConfig, LabelSource, ShotRecord, Split, Splits,
};
pub use geometry::{default_patch, LatticeGeometry};
pub use io::{frames_file_len, load_dataset, save_dataset, sha256_hex, DATASET_FORMAT_VERSION};
pub use norm::{compute_norm_stats, DatasetNorm, NormStats};
pub use optics::OpticsConfig;
pub use render::{draw_photons, render_pair, sample_states, PhotonMaps};
pub use stitch::{
    identity_plan, stitch_array, stitch_dataset, stitch_with_plan, StitchPlan, DEFAULT_MAX_FRAME_PX,
};
