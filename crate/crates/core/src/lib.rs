//! Poisoning image datasets through the side door of lossy compression.
//!
//! Everything here revolves around one primitive: a baseline JPEG encoder
//! that accepts a region-of-interest weight map and spends fewer bits on
//! low-weight blocks, while still emitting streams any stock decoder reads.
//! On top of it sit the two poisoning routes the toolkit implements:
//!
//! * **Reactivation** — compute a sample-specific mask from a conventional
//!   invisible trigger (its residual, or its high-frequency footprint) and
//!   compress with that mask so the trigger survives the codec.
//! * **CAA** — compress to-be-poisoned samples under a fixed repetitive mask
//!   (checkerboard or concentric squares) so the decompressed images carry a
//!   spatial high-frequency distribution that itself acts as the trigger.
//!
//! The [`analysis`] module measures the result: per-region DCT spectra, a
//! scalar trigger statistic with a Mann-Whitney AUC detector, stealth
//! metrics, recompression survival, and a linear probe standing in for a
//! full classifier.
//!
//! The crate is `no_std` (with `alloc`); all file formats, dataset loading,
//! and the command-line front end live in the companion `roipoison` crate.

#![cfg_attr(not(any(test, feature = "std")), no_std)]

extern crate alloc;

#[cfg(any(test, feature = "std"))]
extern crate std;

pub mod analysis;
pub mod error;
pub mod image;
pub mod jpeg;
pub mod masks;
pub mod metrics;
pub mod pipeline;
pub mod spectral;
pub mod synth;
pub mod triggers;

pub use error::{Error, Result};
pub use image::{PlanarImage, YCbCrImage};
pub use jpeg::{JpegStream, RoiCodecConfig};
pub use masks::{MaskKind, RoiMask};
pub use triggers::TriggerKind;
