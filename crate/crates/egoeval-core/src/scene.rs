//! The evaluated world: an ego trajectory sampled at a fixed frame period,
//! tracked objects carrying per-frame boxes and boundary points, and the
//! detections under evaluation.
//!
//! Aggregated object points are stored in world coordinates as registered at
//! the object's first observed frame; [`TrackedObject::boundary_at`] carries
//! them to other frames with the track's rigid motion.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::contour::DEFAULT_CROP_PADDING;
use crate::geom::{rigid_motion_between, Boundary, OrientedBox2, Polygon2, Vec2};
use crate::math;

/// Sample count for the box-perimeter fallback used when an object has no
/// aggregated points.
pub const GT_BOUNDARY_FALLBACK_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ValidationError {
    pub path: String,
    pub message: String,
}

fn invalid(path: String, message: &str) -> ValidationError {
    ValidationError { path, message: String::from(message) }
}

/// Ego pose at one frame. The lateral axis is the heading direction; the
/// longitudinal axis is its perpendicular through the same center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoPose {
    pub t: f64,
    pub center: Vec2,
    pub heading: f64,
}

impl EgoPose {
    /// Line through the ego center along the heading direction.
    pub fn lateral_line(&self) -> crate::geom::Line2 {
        crate::geom::Line2::from_angle(self.center, self.heading)
    }

    /// Line through the ego center perpendicular to the heading. Built from
    /// the lateral direction's exact perpendicular, so an axis-aligned pose
    /// yields an exactly axis-aligned line.
    pub fn longitudinal_line(&self) -> crate::geom::Line2 {
        let lat = Vec2::from_angle(self.heading);
        crate::geom::Line2::new(self.center, lat.perp())
            .expect("perpendicular of a unit vector is a valid direction")
    }
}

/// One observation of a tracked object.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectFrame {
    pub gt_box: OrientedBox2,
    pub visible_points: Vec<Vec2>,
}

/// A ground-truth object followed across frames.
#[derive(Debug, Clone, PartialEq)]
pub struct TrackedObject {
    pub track_id: String,
    pub frames: BTreeMap<usize, ObjectFrame>,
    pub aggregated_points: Vec<Vec2>,
}

impl TrackedObject {
    pub fn first_frame(&self) -> Option<usize> {
        self.frames.keys().next().copied()
    }

    pub fn box_at(&self, frame: usize) -> Option<&OrientedBox2> {
        self.frames.get(&frame).map(|f| &f.gt_box)
    }

    /// Rigid motion of the track between two observed frames.
    pub fn motion_between(&self, from: usize, to: usize) -> Option<crate::geom::RigidMotion2> {
        Some(rigid_motion_between(self.box_at(from)?, self.box_at(to)?))
    }

    /// Ground-truth boundary at a frame: the aggregated points carried to the
    /// frame's pose, or uniform box-perimeter samples when no aggregated
    /// points exist. `None` if the object is not observed at the frame.
    pub fn boundary_at(&self, frame: usize) -> Option<Boundary> {
        let fr = self.frames.get(&frame)?;
        if self.aggregated_points.is_empty() {
            let samples =
                fr.gt_box.footprint().perimeter_samples(GT_BOUNDARY_FALLBACK_SAMPLES);
            return Some(Boundary::Points(samples));
        }
        let first = self.first_frame()?;
        let m = rigid_motion_between(&self.frames[&first].gt_box, &fr.gt_box);
        Some(Boundary::Points(self.aggregated_points.iter().map(|&p| m.apply(p)).collect()))
    }
}

/// A detector output at one frame. `contour` holds a fitted outline when a
/// contour representation has been attached.
#[derive(Debug, Clone, PartialEq)]
pub struct Detection {
    pub frame_index: usize,
    pub bbox: OrientedBox2,
    pub score: f64,
    pub contour: Option<Polygon2>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub ego: Vec<EgoPose>,
    pub objects: Vec<TrackedObject>,
    pub detections: Vec<Detection>,
    pub frame_period: f64,
}

impl Scene {
    pub fn n_frames(&self) -> usize {
        self.ego.len()
    }

    /// Nearest whole-frame offset for a horizon of `t` seconds (`t >= 0`).
    pub fn frame_offset(&self, t: f64) -> usize {
        debug_assert!(t.is_finite() && t >= 0.0);
        math::round(t / self.frame_period) as usize
    }

    pub fn detections_at(&self, frame: usize) -> impl Iterator<Item = (usize, &Detection)> {
        self.detections
            .iter()
            .enumerate()
            .filter(move |(_, d)| d.frame_index == frame)
    }

    /// Union of every object's visible points at a frame (the frame's
    /// sensor sweep).
    pub fn frame_points(&self, frame: usize) -> Vec<Vec2> {
        let mut out = Vec::new();
        for obj in &self.objects {
            if let Some(fr) = obj.frames.get(&frame) {
                out.extend_from_slice(&fr.visible_points);
            }
        }
        out
    }

    pub fn validate(&self) -> Result<(), ValidationError> {
        if self.ego.is_empty() {
            return Err(invalid(String::from("ego"), "empty trajectory"));
        }
        if !(self.frame_period.is_finite() && self.frame_period > 0.0) {
            return Err(invalid(String::from("frame_period"), "must be positive and finite"));
        }
        for (i, pose) in self.ego.iter().enumerate() {
            if !pose.t.is_finite() {
                return Err(invalid(format!("ego[{i}].t"), "must be finite"));
            }
            if i > 0 && pose.t <= self.ego[i - 1].t {
                return Err(invalid(format!("ego[{i}].t"), "timestamps must strictly increase"));
            }
            if !pose.center.is_finite() {
                return Err(invalid(format!("ego[{i}]"), "non-finite center"));
            }
            if !pose.heading.is_finite()
                || pose.heading <= -core::f64::consts::PI
                || pose.heading > core::f64::consts::PI
            {
                return Err(invalid(
                    format!("ego[{i}].heading"),
                    "must lie in (-pi, pi]",
                ));
            }
        }
        let n = self.n_frames();
        let mut seen_ids: Vec<&str> = Vec::with_capacity(self.objects.len());
        for (i, obj) in self.objects.iter().enumerate() {
            if obj.track_id.is_empty() {
                return Err(invalid(format!("objects[{i}].track_id"), "must be non-empty"));
            }
            if seen_ids.contains(&obj.track_id.as_str()) {
                return Err(invalid(format!("objects[{i}].track_id"), "duplicate track id"));
            }
            seen_ids.push(&obj.track_id);
            if obj.frames.is_empty() {
                return Err(invalid(format!("objects[{i}].frames"), "object never observed"));
            }
            for (&f, fr) in &obj.frames {
                if f >= n {
                    return Err(invalid(
                        format!("objects[{i}].frames[{f}]"),
                        "frame index out of range",
                    ));
                }
                for (k, &p) in fr.visible_points.iter().enumerate() {
                    if !fr.gt_box.contains_padded(p, DEFAULT_CROP_PADDING) {
                        return Err(invalid(
                            format!("objects[{i}].frames[{f}].visible_points[{k}]"),
                            "outside the padded box footprint",
                        ));
                    }
                }
            }
        }
        for (j, det) in self.detections.iter().enumerate() {
            if det.frame_index >= n {
                return Err(invalid(
                    format!("detections[{j}].frame"),
                    "frame index out of range",
                ));
            }
            if !(det.score.is_finite() && (0.0..=1.0).contains(&det.score)) {
                return Err(invalid(format!("detections[{j}].score"), "must lie in [0, 1]"));
            }
        }
        Ok(())
    }
}
