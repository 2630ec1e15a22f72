//! Collision prediction study: does a detection, carried along its object's
//! true future motion, predict the same ego-footprint contact the ground
//! truth does?
//!
//! For every prediction frame, track, and horizon step, the ground-truth
//! label asks whether any aggregated boundary point falls inside a safety-
//! scaled ego footprint at the future frame; the predicted label asks the
//! same of the detection's boundary samples after riding the track's motion.
//! Agreement is summarized as collision-detection accuracy over the horizon
//! and as shape-error statistics of the correctly and incorrectly labeled
//! groups.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use crate::apeval::{match_detections, EvalError, MatchConfig, PredRep};
use crate::geom::{box_iou_bev, Boundary, OrientedBox2, Polygon2};
use crate::scene::Scene;
use crate::sde::sde_with_motion;

/// Perimeter samples used to test a predicted shape for footprint contact,
/// mirroring the sampled ground-truth boundaries.
pub const PRED_BOUNDARY_SAMPLES: usize = 256;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CollisionError {
    #[error("invalid collision configuration: {0}")]
    InvalidConfig(&'static str),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Ego vehicle footprint, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EgoDims {
    pub length: f64,
    pub width: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionConfig {
    /// Safety factor applied to the ego footprint.
    pub ego_scale: f64,
    /// Largest look-ahead, seconds.
    pub horizon: f64,
    /// Spacing of the look-ahead grid, seconds.
    pub step: f64,
}

impl Default for CollisionConfig {
    fn default() -> Self {
        CollisionConfig { ego_scale: 1.8, horizon: 10.0, step: 1.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Gt,
    Predicted,
}

/// One collision label: measured from `frame`, the object identified by
/// `track_id` contacts the scaled ego footprint `t_offset` seconds ahead.
#[derive(Debug, Clone, PartialEq)]
pub struct CollisionEvent {
    pub track_id: String,
    pub frame: usize,
    pub t_offset: f64,
    pub kind: EventKind,
}

fn check(dims: &EgoDims, cfg: &CollisionConfig) -> Result<(), CollisionError> {
    if !(dims.length.is_finite() && dims.length > 0.0 && dims.width.is_finite() && dims.width > 0.0)
    {
        return Err(CollisionError::InvalidConfig("ego dimensions must be positive"));
    }
    if !(cfg.ego_scale.is_finite() && cfg.ego_scale > 0.0) {
        return Err(CollisionError::InvalidConfig("ego scale must be positive"));
    }
    if !(cfg.step.is_finite() && cfg.step > 0.0) {
        return Err(CollisionError::InvalidConfig("step must be positive"));
    }
    if !(cfg.horizon.is_finite() && cfg.horizon >= 0.0) {
        return Err(CollisionError::InvalidConfig("horizon must be non-negative"));
    }
    Ok(())
}

/// The look-ahead grid: 0, step, 2*step, ... up to and including the horizon.
pub fn horizons(cfg: &CollisionConfig) -> Vec<f64> {
    let mut out = Vec::new();
    let mut k = 0usize;
    loop {
        let t = k as f64 * cfg.step;
        if t > cfg.horizon + 1e-9 {
            break;
        }
        out.push(t);
        k += 1;
    }
    out
}

fn scaled_ego_box(scene: &Scene, frame: usize, dims: &EgoDims, cfg: &CollisionConfig) -> OrientedBox2 {
    let pose = &scene.ego[frame];
    OrientedBox2::new(pose.center, dims.length, dims.width, pose.heading)
        .expect("validated ego dimensions")
        .scaled(cfg.ego_scale)
}

fn boundary_touches(b: &Boundary, ego_box: &OrientedBox2) -> bool {
    match b {
        Boundary::Points(pts) => pts.iter().any(|&p| ego_box.contains(p)),
        Boundary::Poly(poly) => poly
            .perimeter_samples(PRED_BOUNDARY_SAMPLES)
            .iter()
            .any(|&p| ego_box.contains(p)),
    }
}

/// Ground-truth contact label per (object, frame), for frames the object is
/// observed at.
fn gt_labels(scene: &Scene, dims: &EgoDims, cfg: &CollisionConfig) -> Vec<BTreeMap<usize, bool>> {
    scene
        .objects
        .iter()
        .map(|obj| {
            obj.frames
                .keys()
                .map(|&f| {
                    let ego_box = scaled_ego_box(scene, f, dims, cfg);
                    let hit = obj
                        .boundary_at(f)
                        .map(|b| boundary_touches(&b, &ego_box))
                        .unwrap_or(false);
                    (f, hit)
                })
                .collect()
        })
        .collect()
}

/// All ground-truth collision events on the horizon grid. An event exists
/// for (track, frame, t) when the track is observed at both ends and its
/// boundary touches the scaled ego footprint at the future frame.
pub fn gt_collisions(
    scene: &Scene,
    dims: &EgoDims,
    cfg: &CollisionConfig,
) -> Result<Vec<CollisionEvent>, CollisionError> {
    check(dims, cfg)?;
    let labels = gt_labels(scene, dims, cfg);
    let ts = horizons(cfg);
    let n = scene.n_frames();
    let mut out = Vec::new();
    for f0 in 0..n {
        for &t in &ts {
            let f = f0 + scene.frame_offset(t);
            if f >= n {
                break;
            }
            for (oi, obj) in scene.objects.iter().enumerate() {
                if !obj.frames.contains_key(&f0) {
                    continue;
                }
                if labels[oi].get(&f).copied().unwrap_or(false) {
                    out.push(CollisionEvent {
                        track_id: obj.track_id.clone(),
                        frame: f0,
                        t_offset: t,
                        kind: EventKind::Gt,
                    });
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredCollisions {
    pub events: Vec<CollisionEvent>,
    /// Detections with no object to ride; they predict nothing.
    pub unmatched_detections: usize,
    /// (pair, horizon) cells dropped because a needed frame is missing.
    pub horizon_skipped: usize,
}

fn pred_polygon(scene: &Scene, det_index: usize, rep: PredRep) -> Result<Polygon2, EvalError> {
    let det = &scene.detections[det_index];
    match rep {
        PredRep::BoxFootprint => Ok(det.bbox.footprint()),
        PredRep::Contour => det
            .contour
            .clone()
            .ok_or(EvalError::MissingContour { detection_index: det_index }),
    }
}

/// Predicted collision events: each matched detection's boundary samples are
/// carried by the matched track's motion and tested against the scaled ego
/// footprint at each horizon step.
pub fn pred_collisions(
    scene: &Scene,
    rep: PredRep,
    dims: &EgoDims,
    cfg: &CollisionConfig,
    match_cfg: &MatchConfig,
) -> Result<PredCollisions, CollisionError> {
    check(dims, cfg)?;
    let ts = horizons(cfg);
    let n = scene.n_frames();
    let mut out = PredCollisions { events: Vec::new(), unmatched_detections: 0, horizon_skipped: 0 };
    for f0 in 0..n {
        let records = match_detections(scene, f0, match_cfg, rep, 0.0)?;
        // Deterministic object order regardless of score ordering.
        let mut by_object: BTreeMap<usize, usize> = BTreeMap::new();
        for rec in &records {
            match rec.matched {
                Some(m) => {
                    by_object.insert(m.object_index, rec.det_index);
                }
                None => out.unmatched_detections += 1,
            }
        }
        for (&oi, &det_index) in &by_object {
            let obj = &scene.objects[oi];
            let samples = pred_polygon(scene, det_index, rep)?
                .perimeter_samples(PRED_BOUNDARY_SAMPLES);
            for (k, &t) in ts.iter().enumerate() {
                let f = f0 + scene.frame_offset(t);
                if f >= n {
                    // Offsets grow with t: every remaining step is skipped.
                    out.horizon_skipped += ts.len() - k;
                    break;
                }
                let Some(motion) = obj.motion_between(f0, f) else {
                    out.horizon_skipped += 1;
                    continue;
                };
                let ego_box = scaled_ego_box(scene, f, dims, cfg);
                if samples.iter().any(|&p| ego_box.contains(motion.apply(p))) {
                    out.events.push(CollisionEvent {
                        track_id: obj.track_id.clone(),
                        frame: f0,
                        t_offset: t,
                        kind: EventKind::Predicted,
                    });
                }
            }
        }
    }
    Ok(out)
}

/// Shape statistics of one outcome group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStats {
    pub count: usize,
    pub mean_iou: f64,
    pub median_iou: f64,
    /// Support-distance error at the prediction frame.
    pub mean_sde_now: f64,
    pub median_sde_now: f64,
    /// Support-distance error at the event's own horizon.
    pub mean_sde_at_event: f64,
    pub median_sde_at_event: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TemporalPoint {
    pub t: f64,
    pub tp: usize,
    pub fp: usize,
    pub missed: usize,
    /// tp / (tp + fp + missed); `None` when no cell at this horizon has any
    /// collision activity.
    pub cda: Option<f64>,
    /// Mean box IoU over all matched pairs evaluable at this horizon.
    pub mean_iou: Option<f64>,
    /// Mean support-distance error over the same pairs.
    pub mean_sde: Option<f64>,
    pub pair_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CollisionStudy {
    /// Pairs that predicted a real collision (empty group when none).
    pub tp: Option<GroupStats>,
    /// Pairs that raised a false alarm or missed a real collision.
    pub fp_fn: Option<GroupStats>,
    pub temporal: Vec<TemporalPoint>,
    pub unmatched_detections: usize,
    /// Real collisions on objects with no matched detection: counted as
    /// misses but absent from the shape statistics.
    pub unpaired_gt_events: usize,
    pub horizon_skipped: usize,
}

struct PairSample {
    iou: f64,
    sde_now: f64,
    sde_at_event: f64,
}

fn median_of(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn group_stats(samples: &[PairSample]) -> Option<GroupStats> {
    if samples.is_empty() {
        return None;
    }
    let n = samples.len() as f64;
    let ious: Vec<f64> = samples.iter().map(|s| s.iou).collect();
    let now: Vec<f64> = samples.iter().map(|s| s.sde_now).collect();
    let ev: Vec<f64> = samples.iter().map(|s| s.sde_at_event).collect();
    Some(GroupStats {
        count: samples.len(),
        mean_iou: ious.iter().sum::<f64>() / n,
        mean_sde_now: now.iter().sum::<f64>() / n,
        mean_sde_at_event: ev.iter().sum::<f64>() / n,
        median_iou: median_of(ious),
        median_sde_now: median_of(now),
        median_sde_at_event: median_of(ev),
    })
}

/// Full agreement study between ground-truth and predicted collisions.
pub fn collision_study(
    scene: &Scene,
    rep: PredRep,
    dims: &EgoDims,
    cfg: &CollisionConfig,
    match_cfg: &MatchConfig,
) -> Result<CollisionStudy, CollisionError> {
    check(dims, cfg)?;
    let labels = gt_labels(scene, dims, cfg);
    let ts = horizons(cfg);
    let n = scene.n_frames();

    let mut tp_samples: Vec<PairSample> = Vec::new();
    let mut fpfn_samples: Vec<PairSample> = Vec::new();
    let mut tp_c = alloc::vec![0usize; ts.len()];
    let mut fp_c = alloc::vec![0usize; ts.len()];
    let mut fn_c = alloc::vec![0usize; ts.len()];
    let mut iou_sum = alloc::vec![0.0f64; ts.len()];
    let mut sde_sum = alloc::vec![0.0f64; ts.len()];
    let mut pair_c = alloc::vec![0usize; ts.len()];
    let mut unmatched_detections = 0usize;
    let mut unpaired_gt_events = 0usize;
    let mut horizon_skipped = 0usize;

    for f0 in 0..n {
        let records = match_detections(scene, f0, match_cfg, rep, 0.0)?;
        let mut by_object: BTreeMap<usize, usize> = BTreeMap::new();
        for rec in &records {
            match rec.matched {
                Some(m) => {
                    by_object.insert(m.object_index, rec.det_index);
                }
                None => unmatched_detections += 1,
            }
        }
        for (oi, obj) in scene.objects.iter().enumerate() {
            if !obj.frames.contains_key(&f0) {
                continue;
            }
            let det_index = by_object.get(&oi).copied();
            let pair = match det_index {
                Some(di) => {
                    let poly = pred_polygon(scene, di, rep)?;
                    let samples = poly.perimeter_samples(PRED_BOUNDARY_SAMPLES);
                    let iou = box_iou_bev(&scene.detections[di].bbox, obj.box_at(f0).unwrap());
                    Some((Boundary::Poly(poly), samples, iou))
                }
                None => None,
            };
            for (k, &t) in ts.iter().enumerate() {
                let f = f0 + scene.frame_offset(t);
                if f >= n || !obj.frames.contains_key(&f) {
                    horizon_skipped += 1;
                    continue;
                }
                let gt_hit = labels[oi].get(&f).copied().unwrap_or(false);
                match &pair {
                    Some((boundary, samples, iou)) => {
                        let motion = obj.motion_between(f0, f).expect("frames checked");
                        let ego_box = scaled_ego_box(scene, f, dims, cfg);
                        let pred_hit =
                            samples.iter().any(|&p| ego_box.contains(motion.apply(p)));
                        let gt_boundary = obj.boundary_at(f).expect("frame checked");
                        let rec =
                            sde_with_motion(boundary, &motion, &gt_boundary, &scene.ego[f], t);
                        iou_sum[k] += iou;
                        sde_sum[k] += rec.sde;
                        pair_c[k] += 1;
                        if gt_hit || pred_hit {
                            let now = if k == 0 {
                                rec.sde
                            } else {
                                let m0 = obj.motion_between(f0, f0).expect("frame checked");
                                let g0 = obj.boundary_at(f0).expect("frame checked");
                                sde_with_motion(boundary, &m0, &g0, &scene.ego[f0], 0.0).sde
                            };
                            let sample =
                                PairSample { iou: *iou, sde_now: now, sde_at_event: rec.sde };
                            if gt_hit && pred_hit {
                                tp_c[k] += 1;
                                tp_samples.push(sample);
                            } else {
                                if pred_hit {
                                    fp_c[k] += 1;
                                } else {
                                    fn_c[k] += 1;
                                }
                                fpfn_samples.push(sample);
                            }
                        }
                    }
                    None => {
                        if gt_hit {
                            fn_c[k] += 1;
                            unpaired_gt_events += 1;
                        }
                    }
                }
            }
        }
    }

    let temporal = ts
        .iter()
        .enumerate()
        .map(|(k, &t)| {
            let denom = tp_c[k] + fp_c[k] + fn_c[k];
            TemporalPoint {
                t,
                tp: tp_c[k],
                fp: fp_c[k],
                missed: fn_c[k],
                cda: (denom > 0).then(|| tp_c[k] as f64 / denom as f64),
                mean_iou: (pair_c[k] > 0).then(|| iou_sum[k] / pair_c[k] as f64),
                mean_sde: (pair_c[k] > 0).then(|| sde_sum[k] / pair_c[k] as f64),
                pair_count: pair_c[k],
            }
        })
        .collect();

    Ok(CollisionStudy {
        tp: group_stats(&tp_samples),
        fp_fn: group_stats(&fpfn_samples),
        temporal,
        unmatched_detections,
        unpaired_gt_events,
        horizon_skipped,
    })
}

/// Cross-check helper: the (track, frame) pairs holding an event at `t`.
pub fn event_keys_at(events: &[CollisionEvent], t: f64) -> BTreeSet<(String, usize)> {
    events
        .iter()
        .filter(|e| e.t_offset == t)
        .map(|e| (e.track_id.clone(), e.frame))
        .collect()
}
