//! Spherical image inpainting with a directional Haar tight framelet.
//!
//! The sphere is covered by an equal-area quadtree built from six rotated
//! copies of a gnomonic cap map ([`partition`]). Signals live on the leaf
//! patches ([`signal`]) and are analyzed by a fast tight-framelet
//! transform with one lowpass and six detail bands per level
//! ([`framelet`]). Missing samples are restored by a plug-and-play ADMM
//! scheme ([`solver`]) that calls out to a pluggable [`denoiser`].

pub mod denoiser;
pub mod error;
pub mod framelet;
pub mod io;
pub mod metrics;
pub mod partition;
pub mod signal;
pub mod solver;

pub use denoiser::{denoise, Denoiser, DenoiserSpec};
pub use error::{Error, Result};
pub use framelet::{decompose, reconstruct, FrameletPyramid};
pub use metrics::{gen_mask, psnr, ssim, MaskSpec};
pub use partition::{build_partition, face_map, rect_area, ParamRect, Partition, PatchId};
pub use signal::{
    from_equirectangular, single_face_ingest, to_equirectangular, EquirectImage, PlanarImage,
    SphericalSignal,
};
pub use solver::{admm_step, inpaint, soft_shrink, Mask, RunReport, SolverParams, SolverState};

/// Library version, recorded in run reports.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
