#![no_std]
//! Perimeter-guided refinement of coarse per-class score maps.
//!
//! The crate is `no_std` + `alloc` and holds every algorithmic stage of the
//! pipeline. File formats, dataset manifests, and the command line live in
//! the `perimeterfit` companion crate.
//!
//! Pipeline overview:
//!
//! 1. [`superpixels`] simplifies the photograph into at most `q` color-coherent
//!    regions (SLIC or Quickshift, followed by size-ordered region merging)
//!    and [`superpixels::flatten`] paints each region with its mean color.
//! 2. [`edges::canny`] traces the region boundaries of the flattened image
//!    into a binary [`edges::PerimeterMap`].
//! 3. [`perimeterfit::refine_class`] thresholds a class score plane and clears
//!    every perimeter-bounded cluster that contains a background pixel.
//! 4. [`perimeterfit::refine_multiclass`] fuses the SLIC and Quickshift
//!    variants per class and resolves class conflicts by raw score.
//! 5. [`metrics`] scores predictions (IoU, over/under-activation, positive
//!    set decomposition) and [`grid`] searches the threshold space.
//!
//! All math goes through `libm` so results are bit-identical with or without
//! the standard library.

extern crate alloc;

mod error;
pub mod edges;
pub mod grid;
pub mod image;
pub mod metrics;
pub mod perimeterfit;
pub mod superpixels;

pub use error::{Error, Result};
pub use image::{
    render_overlay, rgb_to_lab, LabImage, LabelMap, Palette, PixelCoord, Plane, RasterImage,
    ScoreMap, IGNORE_LABEL,
};
