//! Egocentric bird's-eye-view shape metrics for 3D object detection.
//!
//! The crate measures how well detected object shapes support an ego-agent's
//! driving decisions instead of how well they overlap the ground truth:
//!
//! 1. [`geom`] - planar primitives: polygons, oriented boxes, rigid motions.
//! 2. [`scene`] - the evaluated world: ego trajectory, tracked objects with
//!    boundary points, detections.
//! 3. [`sde`] - support distances against the ego axes and the support
//!    distance error (SDE), now and at future horizons.
//! 4. [`contour`] - cropped visible points and the convex visible contour.
//! 5. [`starpoly`] - star-polygon contour fitting by projected gradient
//!    descent over a coverage / accuracy / tightness loss.
//! 6. [`apeval`] - average precision with SDE or IoU criteria, optionally
//!    distance-weighted.
//! 7. [`collision`] - collision prediction study against the scaled ego
//!    footprint over a time horizon.
//!
//! The crate is `no_std`-compatible (with `alloc`); enable the `libm` feature
//! instead of `std` for freestanding builds.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

mod math;

pub mod apeval;
pub mod collision;
pub mod contour;
pub mod geom;
pub mod scene;
pub mod sde;
pub mod starpoly;
