//! Convex visible contours: crop a frame's sensor points to a box
//! neighborhood and take their convex hull. The hull covers only what the
//! sensor saw, so occluded sides stay unrepresented instead of being
//! hallucinated by a box footprint.

use alloc::vec::Vec;

use crate::geom::{convex_hull, GeomError, OrientedBox2, Polygon2, Vec2};

/// Padding in meters added around a box footprint when cropping points to it.
pub const DEFAULT_CROP_PADDING: f64 = 0.30;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CropConfig {
    pub padding: f64,
}

impl Default for CropConfig {
    fn default() -> Self {
        CropConfig { padding: DEFAULT_CROP_PADDING }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum ContourError {
    /// Fewer than three non-collinear points survive the crop, so no polygon
    /// exists; callers should fall back to the box footprint.
    #[error("fewer than three non-collinear points after cropping")]
    InsufficientPoints,
}

/// Points within the box footprint padded by `cfg.padding` on every side.
pub fn crop_points(bbox: &OrientedBox2, points: &[Vec2], cfg: &CropConfig) -> Vec<Vec2> {
    points
        .iter()
        .copied()
        .filter(|&p| bbox.contains_padded(p, cfg.padding))
        .collect()
}

/// Convex hull of the visible points near a box.
pub fn convex_visible_contour(
    bbox: &OrientedBox2,
    points: &[Vec2],
    cfg: &CropConfig,
) -> Result<Polygon2, ContourError> {
    let kept = crop_points(bbox, points, cfg);
    convex_hull(&kept).map_err(|e| match e {
        GeomError::DegenerateInput(_) => ContourError::InsufficientPoints,
        // convex_hull only reports degenerate input
        _ => ContourError::InsufficientPoints,
    })
}
