//! Average-precision evaluation of detections against tracked objects.
//!
//! Detections are matched to ground truth per frame, greedily in descending
//! score order. Two match criteria exist: a shape criterion that pairs each
//! detection with the unmatched object minimizing the support-distance error
//! (no distance gate — the error itself encodes what matters), and a
//! box-overlap criterion that pairs it with the nearest unmatched object
//! center within a Euclidean gate and scores the pair by BEV IoU.
//!
//! Matches pooled across frames drive a precision/recall sweep over the
//! distinct scores. The weighted variant counts each true positive as the
//! inverse cubed (configurable) ego distance of its object, so nearby
//! mistakes cost more than distant ones.

use alloc::vec;
use alloc::vec::Vec;

use crate::geom::{
    apply_motion, box_iou_bev, rigid_motion_between, Boundary, OrientedBox2, RigidMotion2, Vec2,
};
use crate::math;
use crate::scene::{EgoPose, Scene};
use crate::sde::{support_distances, SupportDistances};

/// Distances below this are clamped before weighting, capping the weight of
/// in-contact objects.
pub const MIN_WEIGHT_DISTANCE: f64 = 0.5;

/// Range bucket covering everything.
pub const FULL_RANGE: (f64, f64) = (0.0, f64::INFINITY);

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("horizon {t} s needs frame {frame}, beyond the scene")]
    MissingFrame { t: f64, frame: usize },
    #[error("horizon must be finite and non-negative, got {0}")]
    InvalidHorizon(f64),
    #[error("detection {detection_index} has no contour attached")]
    MissingContour { detection_index: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatchCriterion {
    /// Match by minimum support-distance error.
    Sde,
    /// Match by nearest center within a gate; quality is BEV IoU.
    Iou,
}

/// How a detection's shape is represented when scoring it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredRep {
    BoxFootprint,
    Contour,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    pub criterion: MatchCriterion,
    /// True-positive cutoff for the shape criterion (error strictly below).
    pub sde_threshold: f64,
    /// True-positive cutoff for the overlap criterion (IoU at or above).
    pub iou_threshold: f64,
    /// Center-distance gate for the overlap criterion, meters.
    pub euclidean_match_radius: f64,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            criterion: MatchCriterion::Sde,
            sde_threshold: 0.2,
            iou_threshold: 0.7,
            euclidean_match_radius: 2.0,
        }
    }
}

/// Exponent of the inverse-distance weighting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightConfig {
    pub exponent: f64,
}

impl Default for WeightConfig {
    fn default() -> Self {
        WeightConfig { exponent: 3.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedGt {
    pub object_index: usize,
    /// Support-distance error or BEV IoU, per the criterion.
    pub quality: f64,
}

/// One detection's matching outcome at a frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchRecord {
    pub det_index: usize,
    pub score: f64,
    pub matched: Option<MatchedGt>,
}

struct DetCand {
    det_idx: usize,
    score: f64,
    boundary: Boundary,
    bbox: OrientedBox2,
}

struct GtCand {
    obj_idx: usize,
    motion: RigidMotion2,
    sd_eval: SupportDistances,
    center0: Vec2,
    center_eval: Vec2,
    box0: OrientedBox2,
}

fn checked_offset(scene: &Scene, t: f64) -> Result<usize, EvalError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(EvalError::InvalidHorizon(t));
    }
    Ok(scene.frame_offset(t))
}

/// Manhattan distance measured along the ego's own axes.
fn manhattan(p: Vec2, ego: &EgoPose) -> f64 {
    let q = (p - ego.center).rotated(-ego.heading);
    math::abs(q.x) + math::abs(q.y)
}

fn euclidean(p: Vec2, ego: &EgoPose) -> f64 {
    (p - ego.center).norm()
}

/// Candidates at prediction frame `f0`, evaluated at `eval_f`. Objects
/// observed at `f0` but gone by `eval_f` are counted in the skip tally.
fn frame_candidates(
    scene: &Scene,
    f0: usize,
    eval_f: usize,
    rep: PredRep,
) -> Result<(Vec<DetCand>, Vec<GtCand>, usize), EvalError> {
    let ego = &scene.ego[eval_f];
    let mut gts = Vec::new();
    let mut skipped = 0usize;
    for (oi, obj) in scene.objects.iter().enumerate() {
        let Some(&b0) = obj.box_at(f0) else { continue };
        let (Some(&be), Some(boundary_eval)) = (obj.box_at(eval_f), obj.boundary_at(eval_f))
        else {
            skipped += 1;
            continue;
        };
        gts.push(GtCand {
            obj_idx: oi,
            motion: rigid_motion_between(&b0, &be),
            sd_eval: support_distances(&boundary_eval, ego),
            center0: b0.center(),
            center_eval: be.center(),
            box0: b0,
        });
    }
    let mut dets = Vec::new();
    for (di, det) in scene.detections_at(f0) {
        let boundary = match rep {
            PredRep::BoxFootprint => Boundary::Poly(det.bbox.footprint()),
            PredRep::Contour => Boundary::Poly(
                det.contour
                    .clone()
                    .ok_or(EvalError::MissingContour { detection_index: di })?,
            ),
        };
        dets.push(DetCand { det_idx: di, score: det.score, boundary, bbox: det.bbox });
    }
    Ok((dets, gts, skipped))
}

fn pair_sde(d: &DetCand, g: &GtCand, ego: &EgoPose) -> f64 {
    let moved = apply_motion(&g.motion, &d.boundary);
    let sp = support_distances(&moved, ego);
    math::abs(g.sd_eval.lat - sp.lat).max(math::abs(g.sd_eval.lon - sp.lon))
}

/// Greedy assignment in descending score order (input order on ties).
/// Returns (detection local index, matched (gt local index, quality)) in the
/// processing order.
fn greedy(
    dets: &[DetCand],
    gts: &[GtCand],
    cfg: &MatchConfig,
    ego: &EgoPose,
) -> Vec<(usize, Option<(usize, f64)>)> {
    let mut order: Vec<usize> = (0..dets.len()).collect();
    order.sort_by(|&a, &b| dets[b].score.total_cmp(&dets[a].score));
    let mut taken = vec![false; gts.len()];
    let mut out = Vec::with_capacity(dets.len());
    for &di in &order {
        let d = &dets[di];
        // (gt index, selection key); lower key wins, first index on ties.
        let mut best: Option<(usize, f64)> = None;
        for (gi, g) in gts.iter().enumerate() {
            if taken[gi] {
                continue;
            }
            let key = match cfg.criterion {
                MatchCriterion::Sde => pair_sde(d, g, ego),
                MatchCriterion::Iou => {
                    let dist = (g.center0 - d.bbox.center()).norm();
                    if dist > cfg.euclidean_match_radius {
                        continue;
                    }
                    dist
                }
            };
            if best.is_none_or(|(_, k)| key < k) {
                best = Some((gi, key));
            }
        }
        let m = best.map(|(gi, key)| {
            taken[gi] = true;
            let quality = match cfg.criterion {
                MatchCriterion::Sde => key,
                MatchCriterion::Iou => box_iou_bev(&d.bbox, &gts[gi].box0),
            };
            (gi, quality)
        });
        out.push((di, m));
    }
    out
}

/// Match the detections of one frame against the objects present there,
/// scoring each pair at `t` seconds past the frame. Records come back in
/// descending score order.
pub fn match_detections(
    scene: &Scene,
    frame: usize,
    cfg: &MatchConfig,
    rep: PredRep,
    t: f64,
) -> Result<Vec<MatchRecord>, EvalError> {
    let dt = checked_offset(scene, t)?;
    let eval_f = frame + dt;
    if eval_f >= scene.n_frames() {
        return Err(EvalError::MissingFrame { t, frame: eval_f });
    }
    let (dets, gts, _) = frame_candidates(scene, frame, eval_f, rep)?;
    let ego = &scene.ego[eval_f];
    Ok(greedy(&dets, &gts, cfg, ego)
        .into_iter()
        .map(|(di, m)| MatchRecord {
            det_index: dets[di].det_idx,
            score: dets[di].score,
            matched: m.map(|(gi, quality)| MatchedGt {
                object_index: gts[gi].obj_idx,
                quality,
            }),
        })
        .collect())
}

/// A matched detection's pooled evaluation data.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchedPool {
    pub object_index: usize,
    pub quality: f64,
    /// Ego-axis Manhattan distance of the object at the evaluation pose.
    pub gt_weight_dist: f64,
    /// Euclidean range of the object at the evaluation pose.
    pub gt_range: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledDetection {
    pub det_index: usize,
    pub frame: usize,
    pub score: f64,
    /// Manhattan distance of the detection itself (propagated when matched).
    pub det_weight_dist: f64,
    pub det_range: f64,
    pub matched: Option<MatchedPool>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PooledGt {
    pub weight_dist: f64,
    pub range: f64,
}

/// All frames' matches for one (criterion, horizon) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalPool {
    pub t: f64,
    pub criterion: MatchCriterion,
    pub detections: Vec<PooledDetection>,
    pub gts: Vec<PooledGt>,
    /// Objects observed at a prediction frame but gone at its evaluation
    /// frame.
    pub skipped_gts: usize,
    /// Detections whose evaluation frame lies past the scene.
    pub skipped_detections: usize,
}

pub fn build_pool(
    scene: &Scene,
    cfg: &MatchConfig,
    rep: PredRep,
    t: f64,
) -> Result<EvalPool, EvalError> {
    let dt = checked_offset(scene, t)?;
    let n = scene.n_frames();
    if dt >= n {
        return Err(EvalError::MissingFrame { t, frame: dt });
    }
    let mut pool = EvalPool {
        t,
        criterion: cfg.criterion,
        detections: Vec::new(),
        gts: Vec::new(),
        skipped_gts: 0,
        skipped_detections: scene
            .detections
            .iter()
            .filter(|d| d.frame_index + dt >= n)
            .count(),
    };
    for f0 in 0..n - dt {
        let eval_f = f0 + dt;
        let ego = &scene.ego[eval_f];
        let (dets, gts, skipped) = frame_candidates(scene, f0, eval_f, rep)?;
        pool.skipped_gts += skipped;
        for g in &gts {
            pool.gts.push(PooledGt {
                weight_dist: manhattan(g.center_eval, ego),
                range: euclidean(g.center_eval, ego),
            });
        }
        for (di, m) in greedy(&dets, &gts, cfg, ego) {
            let d = &dets[di];
            let (center_eval, matched) = match m {
                Some((gi, quality)) => {
                    let g = &gts[gi];
                    (
                        g.motion.apply(d.bbox.center()),
                        Some(MatchedPool {
                            object_index: g.obj_idx,
                            quality,
                            gt_weight_dist: manhattan(g.center_eval, ego),
                            gt_range: euclidean(g.center_eval, ego),
                        }),
                    )
                }
                None => (d.bbox.center(), None),
            };
            pool.detections.push(PooledDetection {
                det_index: d.det_idx,
                frame: f0,
                score: d.score,
                det_weight_dist: manhattan(center_eval, ego),
                det_range: euclidean(center_eval, ego),
                matched,
            });
        }
    }
    Ok(pool)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    pub precision: f64,
    pub recall: f64,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct APResult {
    /// NaN when `defined` is false (no ground truth in range).
    pub ap: f64,
    pub defined: bool,
    pub pr_points: Vec<PrPoint>,
    pub gt_count: usize,
}

struct Row {
    score: f64,
    tp: bool,
    weight: f64,
}

/// Cumulative precision/recall at each distinct score, descending.
fn sweep(rows: &[Row], idg: f64) -> Vec<PrPoint> {
    let mut out = Vec::new();
    let mut tp = 0.0f64;
    let mut fp = 0.0f64;
    let mut i = 0;
    while i < rows.len() {
        let s = rows[i].score;
        while i < rows.len() && rows[i].score == s {
            if rows[i].tp {
                tp += rows[i].weight;
            } else {
                fp += rows[i].weight;
            }
            i += 1;
        }
        out.push(PrPoint { precision: tp / (tp + fp), recall: tp / idg, score: s });
    }
    out
}

/// Area under the monotone precision envelope, anchored at recall zero with
/// the envelope's first value.
fn ap_from_pr(points: &[PrPoint]) -> f64 {
    if points.is_empty() {
        return 0.0;
    }
    let mut env: Vec<f64> = points.iter().map(|p| p.precision).collect();
    for i in (0..env.len() - 1).rev() {
        env[i] = env[i].max(env[i + 1]);
    }
    let mut area = 0.0;
    let mut prev_r = 0.0;
    let mut prev_p = env[0];
    for (k, pt) in points.iter().enumerate() {
        area += (pt.recall - prev_r) * (env[k] + prev_p) * 0.5;
        prev_r = pt.recall;
        prev_p = env[k];
    }
    area
}

/// Score a pool against one true-positive threshold, optionally weighting by
/// inverse ego distance, restricted to one range bucket (objects bucketed at
/// the evaluation pose; unmatched detections by their own center).
pub fn evaluate_pool(
    pool: &EvalPool,
    threshold: f64,
    weight: Option<WeightConfig>,
    bucket: (f64, f64),
) -> APResult {
    let wf = |d: f64| match weight {
        None => 1.0,
        Some(w) => math::powf(d.max(MIN_WEIGHT_DISTANCE), -w.exponent),
    };
    let in_bucket = |r: f64| r >= bucket.0 && r < bucket.1;

    let mut idg = 0.0;
    let mut gt_count = 0usize;
    for g in &pool.gts {
        if in_bucket(g.range) {
            idg += wf(g.weight_dist);
            gt_count += 1;
        }
    }
    if gt_count == 0 {
        return APResult { ap: f64::NAN, defined: false, pr_points: Vec::new(), gt_count };
    }

    let mut rows: Vec<Row> = Vec::new();
    for d in &pool.detections {
        match &d.matched {
            Some(m) if in_bucket(m.gt_range) => {
                let tp = match pool.criterion {
                    MatchCriterion::Sde => m.quality < threshold,
                    MatchCriterion::Iou => m.quality >= threshold,
                };
                rows.push(Row {
                    score: d.score,
                    tp,
                    weight: if tp { wf(m.gt_weight_dist) } else { wf(d.det_weight_dist) },
                });
            }
            Some(_) => {} // counted in the bucket holding its object
            None if in_bucket(d.det_range) => {
                rows.push(Row { score: d.score, tp: false, weight: wf(d.det_weight_dist) });
            }
            None => {}
        }
    }
    rows.sort_by(|a, b| b.score.total_cmp(&a.score));
    let pr_points = sweep(&rows, idg);
    APResult { ap: ap_from_pr(&pr_points), defined: true, pr_points, gt_count }
}

fn tp_threshold(cfg: &MatchConfig) -> f64 {
    match cfg.criterion {
        MatchCriterion::Sde => cfg.sde_threshold,
        MatchCriterion::Iou => cfg.iou_threshold,
    }
}

/// Unweighted average precision over the whole range.
pub fn ap(scene: &Scene, cfg: &MatchConfig, rep: PredRep, t: f64) -> Result<APResult, EvalError> {
    let pool = build_pool(scene, cfg, rep, t)?;
    Ok(evaluate_pool(&pool, tp_threshold(cfg), None, FULL_RANGE))
}

/// Distance-weighted average precision over the whole range. An exponent of
/// zero reproduces [`ap`] exactly.
pub fn apd(
    scene: &Scene,
    cfg: &MatchConfig,
    weight: &WeightConfig,
    rep: PredRep,
    t: f64,
) -> Result<APResult, EvalError> {
    let pool = build_pool(scene, cfg, rep, t)?;
    Ok(evaluate_pool(&pool, tp_threshold(cfg), Some(*weight), FULL_RANGE))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricKind {
    SdeAp,
    SdeApd,
    IouAp,
    IouApd,
}

impl MetricKind {
    pub fn criterion(self) -> MatchCriterion {
        match self {
            MetricKind::SdeAp | MetricKind::SdeApd => MatchCriterion::Sde,
            MetricKind::IouAp | MetricKind::IouApd => MatchCriterion::Iou,
        }
    }

    pub fn weighted(self) -> bool {
        matches!(self, MetricKind::SdeApd | MetricKind::IouApd)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            MetricKind::SdeAp => "sde-ap",
            MetricKind::SdeApd => "sde-apd",
            MetricKind::IouAp => "iou-ap",
            MetricKind::IouApd => "iou-apd",
        }
    }

    pub const ALL: [MetricKind; 4] =
        [MetricKind::SdeAp, MetricKind::SdeApd, MetricKind::IouAp, MetricKind::IouApd];
}

/// Identifies one result row of a breakdown.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResultKey {
    pub metric: MetricKind,
    pub bucket: (f64, f64),
    pub t: f64,
    pub threshold: f64,
    /// Weight exponent; `None` for unweighted metrics.
    pub exponent: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledResult {
    pub key: ResultKey,
    pub result: APResult,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BreakdownSpec {
    pub metrics: Vec<MetricKind>,
    /// Half-open `[lo, hi)` Euclidean range buckets, meters.
    pub buckets: Vec<(f64, f64)>,
    pub t_values: Vec<f64>,
    /// True-positive cutoffs swept for the shape criterion.
    pub sde_thresholds: Vec<f64>,
    /// Weight exponents swept for the weighted metrics.
    pub exponents: Vec<f64>,
}

impl Default for BreakdownSpec {
    fn default() -> Self {
        BreakdownSpec {
            metrics: MetricKind::ALL.to_vec(),
            buckets: vec![(0.0, 5.0), (5.0, 10.0), (10.0, 20.0), (20.0, 40.0)],
            t_values: vec![0.0],
            sde_thresholds: vec![0.2],
            exponents: vec![3.0],
        }
    }
}

/// Every requested (metric, bucket, horizon, threshold, exponent) cell, in a
/// deterministic order. Pools are built once per (criterion, horizon).
pub fn breakdown(
    scene: &Scene,
    cfg: &MatchConfig,
    rep: PredRep,
    spec: &BreakdownSpec,
) -> Result<Vec<LabeledResult>, EvalError> {
    let mut out = Vec::new();
    for &t in &spec.t_values {
        let mut pools: [Option<EvalPool>; 2] = [None, None];
        for &metric in &spec.metrics {
            let slot = match metric.criterion() {
                MatchCriterion::Sde => 0,
                MatchCriterion::Iou => 1,
            };
            if pools[slot].is_none() {
                let crit_cfg = MatchConfig { criterion: metric.criterion(), ..*cfg };
                pools[slot] = Some(build_pool(scene, &crit_cfg, rep, t)?);
            }
            let pool = pools[slot].as_ref().expect("pool just built");
            let thresholds: Vec<f64> = match metric.criterion() {
                MatchCriterion::Sde => spec.sde_thresholds.clone(),
                MatchCriterion::Iou => vec![cfg.iou_threshold],
            };
            let exponents: Vec<Option<f64>> = if metric.weighted() {
                spec.exponents.iter().map(|&e| Some(e)).collect()
            } else {
                vec![None]
            };
            for &threshold in &thresholds {
                for &exponent in &exponents {
                    for &bucket in &spec.buckets {
                        let result = evaluate_pool(
                            pool,
                            threshold,
                            exponent.map(|e| WeightConfig { exponent: e }),
                            bucket,
                        );
                        out.push(LabeledResult {
                            key: ResultKey { metric, bucket, t, threshold, exponent },
                            result,
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Detection, ObjectFrame, TrackedObject};
    use alloc::collections::BTreeMap;
    use alloc::format;
    use alloc::string::ToString;

    fn bx(cx: f64, cy: f64, l: f64, w: f64, h: f64) -> OrientedBox2 {
        OrientedBox2::new(Vec2::new(cx, cy), l, w, h).unwrap()
    }

    /// Single-frame scene: ego at the origin facing +x.
    fn one_frame(objs: &[OrientedBox2], dets: &[(OrientedBox2, f64)]) -> Scene {
        let objects = objs
            .iter()
            .enumerate()
            .map(|(i, &b)| {
                let mut frames = BTreeMap::new();
                frames.insert(0, ObjectFrame { gt_box: b, visible_points: vec![] });
                TrackedObject {
                    track_id: format!("g{i}"),
                    frames,
                    aggregated_points: b.footprint().perimeter_samples(64),
                }
            })
            .collect();
        let detections = dets
            .iter()
            .map(|&(b, score)| Detection { frame_index: 0, bbox: b, score, contour: None })
            .collect();
        Scene {
            ego: vec![EgoPose { t: 0.0, center: Vec2::ZERO, heading: 0.0 }],
            objects,
            detections,
            frame_period: 0.1,
        }
    }

    #[test]
    fn good_then_bad_detection_gives_ap_one() {
        let gt = bx(10.0, 3.0, 4.0, 2.0, 0.0);
        let bad = bx(10.0, 2.5, 4.0, 2.0, 0.0); // protrudes 0.5 toward the ego line
        let scene = one_frame(&[gt], &[(gt, 0.9), (bad, 0.8)]);
        let cfg = MatchConfig::default();
        let res = ap(&scene, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        assert_eq!(res.pr_points.len(), 2);
        assert_eq!(res.pr_points[0].precision, 1.0);
        assert_eq!(res.pr_points[0].recall, 1.0);
        assert_eq!(res.pr_points[1].precision, 0.5);
        assert_eq!(res.pr_points[1].recall, 1.0);
        assert_eq!(res.ap, 1.0);
    }

    #[test]
    fn duplicate_detection_adds_exactly_one_fp() {
        let gt = bx(10.0, 3.0, 4.0, 2.0, 0.0);
        let scene = one_frame(&[gt], &[(gt, 0.9), (gt, 0.9)]);
        let res = ap(&scene, &MatchConfig::default(), PredRep::BoxFootprint, 0.0).unwrap();
        assert_eq!(res.pr_points.len(), 1);
        assert_eq!(res.pr_points[0].precision, 0.5);
        assert_eq!(res.pr_points[0].recall, 1.0);
        assert_eq!(res.ap, 0.5);
    }

    #[test]
    fn shape_matching_has_no_distance_gate() {
        // Mirror-image detection 20 m from the object but with identical
        // support distances: the shape criterion accepts it.
        let gt = bx(10.0, 5.0, 4.0, 2.0, 0.0);
        let mirror = bx(-10.0, 5.0, 4.0, 2.0, 0.0);
        let scene = one_frame(&[gt], &[(mirror, 0.9)]);
        let cfg = MatchConfig::default();
        let recs = match_detections(&scene, 0, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        let m = recs[0].matched.expect("matched despite the offset");
        assert!(m.quality < 1e-9);

        // The overlap criterion refuses: the center sits far outside the gate.
        let cfg_iou = MatchConfig { criterion: MatchCriterion::Iou, ..cfg };
        let recs = match_detections(&scene, 0, &cfg_iou, PredRep::BoxFootprint, 0.0).unwrap();
        assert!(recs[0].matched.is_none());
    }

    #[test]
    fn overlap_matching_gates_by_center_distance() {
        let gt = bx(10.0, 3.0, 4.0, 2.0, 0.0);
        let near = bx(10.0, 4.9, 4.0, 2.0, 0.0); // 1.9 m: inside the gate
        let far = bx(10.0, 5.1, 4.0, 2.0, 0.0); // 2.1 m: outside
        let cfg = MatchConfig { criterion: MatchCriterion::Iou, ..Default::default() };

        let scene = one_frame(&[gt], &[(near, 0.9)]);
        let recs = match_detections(&scene, 0, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        let m = recs[0].matched.unwrap();
        assert!((m.quality - box_iou_bev(&near, &gt)).abs() < 1e-12);

        let scene = one_frame(&[gt], &[(far, 0.9)]);
        let recs = match_detections(&scene, 0, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        assert!(recs[0].matched.is_none());
    }

    #[test]
    fn higher_scores_pick_first() {
        let g1 = bx(10.0, 3.0, 4.0, 2.0, 0.0);
        // Both detections fit g1; the higher score claims it, the other
        // stays unmatched (no second object).
        let d_hi = bx(10.0, 3.1, 4.0, 2.0, 0.0);
        let d_lo = bx(10.0, 3.0, 4.0, 2.0, 0.0); // actually the better fit
        let scene = one_frame(&[g1], &[(d_lo, 0.5), (d_hi, 0.9)]);
        let recs =
            match_detections(&scene, 0, &MatchConfig::default(), PredRep::BoxFootprint, 0.0)
                .unwrap();
        // Records arrive in score order.
        assert_eq!(recs[0].det_index, 1);
        assert!(recs[0].matched.is_some());
        assert_eq!(recs[1].det_index, 0);
        assert!(recs[1].matched.is_none());
    }

    #[test]
    fn weighted_recall_uses_inverse_cubed_distance() {
        // Two objects at Manhattan distance 2 (weight 1/8 each); only one is
        // detected, perfectly. Weighted recall stays 1/2 at beta=3, and the
        // farther the undetected object, the higher the weighted recall.
        let g_near = bx(2.0, 0.0, 1.0, 1.0, 0.0);
        let g_miss = bx(0.0, 2.0, 1.0, 1.0, 0.0);
        let scene = one_frame(&[g_near, g_miss], &[(g_near, 0.9)]);
        let cfg = MatchConfig::default();
        let res = apd(&scene, &cfg, &WeightConfig { exponent: 3.0 }, PredRep::BoxFootprint, 0.0)
            .unwrap();
        assert!((res.pr_points[0].recall - 0.5).abs() < 1e-12);
        assert!((res.ap - 0.5).abs() < 1e-12);

        let g_miss_far = bx(0.0, 4.0, 1.0, 1.0, 0.0);
        let scene = one_frame(&[g_near, g_miss_far], &[(g_near, 0.9)]);
        let res = apd(&scene, &cfg, &WeightConfig { exponent: 3.0 }, PredRep::BoxFootprint, 0.0)
            .unwrap();
        // idg = 1/8 + 1/64; recall = (1/8)/idg = 8/9.
        assert!((res.pr_points[0].recall - 8.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn zero_exponent_reduces_to_unweighted() {
        let g1 = bx(8.0, 2.0, 4.0, 2.0, 0.0);
        let g2 = bx(20.0, -4.0, 4.0, 2.0, 0.0);
        let g3 = bx(35.0, 6.0, 4.0, 2.0, 0.3);
        let dets = [
            (bx(8.0, 2.0, 4.0, 2.0, 0.0), 0.95),
            (bx(20.0, -3.4, 4.0, 2.0, 0.0), 0.85), // 0.6 lateral protrusion: FP
            (bx(50.0, 20.0, 4.0, 2.0, 0.0), 0.75),
            (bx(35.0, 6.0, 4.0, 2.0, 0.3), 0.65),
        ];
        let scene = one_frame(&[g1, g2, g3], &dets);
        let cfg = MatchConfig::default();
        let plain = ap(&scene, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        let weighted =
            apd(&scene, &cfg, &WeightConfig { exponent: 0.0 }, PredRep::BoxFootprint, 0.0)
                .unwrap();
        assert_eq!(plain.ap, weighted.ap);
        assert_eq!(plain.pr_points, weighted.pr_points);
        assert!(plain.ap < 1.0); // the scene is genuinely noisy
    }

    #[test]
    fn ego_translation_changes_shape_metric_but_not_overlap_metric() {
        let gt = bx(10.0, 3.0, 4.0, 2.0, 0.0); // spans y in [2, 4]
        let det = bx(10.0, 2.85, 4.0, 2.3, 0.0); // spans y in [1.7, 4.0]
        let build = |ego_y: f64| {
            let mut s = one_frame(&[gt], &[(det, 0.9)]);
            s.ego[0].center = Vec2::new(0.0, ego_y);
            s
        };
        let near = build(0.0);
        let far = build(20.0);
        let cfg = MatchConfig::default();

        // Shape criterion: lateral protrusion of 0.3 m seen from below, but
        // from far above the relevant edge is the top one and errors vanish.
        let ap_near = ap(&near, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        let ap_far = ap(&far, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        assert_eq!(ap_near.ap, 0.0);
        assert_eq!(ap_far.ap, 1.0);

        // Overlap criterion: identical either way.
        let cfg_iou = MatchConfig { criterion: MatchCriterion::Iou, ..cfg };
        let iou_near = ap(&near, &cfg_iou, PredRep::BoxFootprint, 0.0).unwrap();
        let iou_far = ap(&far, &cfg_iou, PredRep::BoxFootprint, 0.0).unwrap();
        assert_eq!(iou_near.ap, iou_far.ap);
        assert_eq!(iou_near.pr_points, iou_far.pr_points);
    }

    #[test]
    fn pr_sweep_matches_exhaustive_recount() {
        let objs = [
            bx(6.0, 2.0, 4.0, 2.0, 0.0),
            bx(14.0, -3.0, 4.0, 2.0, 0.2),
            bx(25.0, 5.0, 4.0, 2.0, -0.4),
        ];
        let dets = [
            (bx(6.0, 2.05, 4.0, 2.0, 0.0), 0.9),
            (bx(14.0, -3.6, 4.0, 2.0, 0.2), 0.8), // protrudes 0.6
            (bx(25.0, 5.02, 4.0, 2.0, -0.4), 0.8), // tie score with the FP
            (bx(40.0, 0.0, 4.0, 2.0, 0.0), 0.7),
            (bx(6.0, 2.0, 4.0, 2.0, 0.0), 0.6), // duplicate of g1
            (bx(25.0, 5.0, 4.0, 2.0, -0.4), 0.3), // duplicate of g3
        ];
        let scene = one_frame(&objs, &dets);
        let cfg = MatchConfig::default();
        let pool = build_pool(&scene, &cfg, PredRep::BoxFootprint, 0.0).unwrap();
        let res = evaluate_pool(&pool, cfg.sde_threshold, None, FULL_RANGE);

        // Oracle: resort identically, then re-count from scratch at every
        // distinct score.
        let mut rows: Vec<(f64, bool)> = pool
            .detections
            .iter()
            .map(|d| {
                let tp = d.matched.is_some_and(|m| m.quality < cfg.sde_threshold);
                (d.score, tp)
            })
            .collect();
        rows.sort_by(|a, b| b.0.total_cmp(&a.0));
        let mut scores: Vec<f64> = rows.iter().map(|r| r.0).collect();
        scores.dedup();
        assert_eq!(scores.len(), res.pr_points.len());
        for (k, &s) in scores.iter().enumerate() {
            let mut tp = 0.0;
            let mut fp = 0.0;
            for &(score, is_tp) in rows.iter().filter(|r| r.0 >= s) {
                let _ = score;
                if is_tp {
                    tp += 1.0;
                } else {
                    fp += 1.0;
                }
            }
            let p = tp / (tp + fp);
            let r = tp / pool.gts.len() as f64;
            assert!((res.pr_points[k].precision - p).abs() <= 1e-12);
            assert!((res.pr_points[k].recall - r).abs() <= 1e-12);
        }
    }

    #[test]
    fn ap_is_monotone_in_the_shape_threshold() {
        let objs = [bx(6.0, 2.0, 4.0, 2.0, 0.0), bx(14.0, -3.0, 4.0, 2.0, 0.2)];
        let dets = [
            (bx(6.0, 1.85, 4.0, 2.0, 0.0), 0.9),  // 0.15 protrusion
            (bx(14.0, -3.25, 4.0, 2.0, 0.2), 0.8), // 0.25 protrusion
        ];
        let scene = one_frame(&objs, &dets);
        let pool =
            build_pool(&scene, &MatchConfig::default(), PredRep::BoxFootprint, 0.0).unwrap();
        let mut prev = -1.0;
        for delta in [0.1, 0.2, 0.3] {
            let r = evaluate_pool(&pool, delta, None, FULL_RANGE);
            assert!(r.ap >= prev, "ap not monotone at delta {delta}");
            prev = r.ap;
        }
        assert_eq!(evaluate_pool(&pool, 0.3, None, FULL_RANGE).ap, 1.0);
        assert!(evaluate_pool(&pool, 0.1, None, FULL_RANGE).ap < 1.0);
    }

    #[test]
    fn empty_bucket_is_undefined_and_empty_detections_score_zero() {
        let gt = bx(7.0, 0.0, 4.0, 2.0, 0.0); // range 7
        let scene = one_frame(&[gt], &[]);
        let pool =
            build_pool(&scene, &MatchConfig::default(), PredRep::BoxFootprint, 0.0).unwrap();
        let far = evaluate_pool(&pool, 0.2, None, (20.0, 40.0));
        assert!(!far.defined);
        assert!(far.ap.is_nan());
        let home = evaluate_pool(&pool, 0.2, None, (5.0, 10.0));
        assert!(home.defined);
        assert_eq!(home.ap, 0.0); // no detections at all
    }

    #[test]
    fn breakdown_emits_every_cell_deterministically() {
        let gt = bx(7.0, 0.0, 4.0, 2.0, 0.0);
        let scene = one_frame(&[gt], &[(gt, 0.9)]);
        let spec = BreakdownSpec {
            sde_thresholds: vec![0.1, 0.2],
            exponents: vec![0.0, 3.0],
            ..Default::default()
        };
        let cfg = MatchConfig::default();
        let rows = breakdown(&scene, &cfg, PredRep::BoxFootprint, &spec).unwrap();
        // sde-ap: 2 thresholds x 4 buckets; sde-apd: 2 x 2 x 4;
        // iou-ap: 1 x 4; iou-apd: 2 exponents x 4.
        assert_eq!(rows.len(), 8 + 16 + 4 + 8);
        let rows2 = breakdown(&scene, &cfg, PredRep::BoxFootprint, &spec).unwrap();
        // Undefined cells hold NaN, so compare bit patterns, not PartialEq.
        for (a, b) in rows.iter().zip(&rows2) {
            assert_eq!(a.key, b.key);
            assert_eq!(a.result.defined, b.result.defined);
            assert_eq!(a.result.ap.to_bits(), b.result.ap.to_bits());
            assert_eq!(a.result.pr_points, b.result.pr_points);
        }
        // The bucket holding the object is defined and perfect.
        let hit = rows
            .iter()
            .find(|r| {
                r.key.metric == MetricKind::SdeAp
                    && r.key.bucket == (5.0, 10.0)
                    && r.key.threshold == 0.2
            })
            .unwrap();
        assert_eq!(hit.result.ap, 1.0);
        // Empty buckets are undefined.
        let empty = rows
            .iter()
            .find(|r| r.key.metric == MetricKind::SdeAp && r.key.bucket == (20.0, 40.0))
            .unwrap();
        assert!(!empty.result.defined);
    }

    #[test]
    fn future_horizon_pools_propagate_detections() {
        // Object translating +1 m/frame; a perfect detection at frame 0
        // stays perfect at a 0.2 s horizon because it rides the GT motion.
        let mut frames = BTreeMap::new();
        for f in 0..3usize {
            let b = bx(10.0 + f as f64, 3.0, 4.0, 2.0, 0.0);
            frames.insert(f, ObjectFrame { gt_box: b, visible_points: vec![] });
        }
        let agg = bx(10.0, 3.0, 4.0, 2.0, 0.0).footprint().perimeter_samples(64);
        let scene = Scene {
            ego: (0..3)
                .map(|f| EgoPose { t: 0.1 * f as f64, center: Vec2::ZERO, heading: 0.0 })
                .collect(),
            objects: vec![TrackedObject {
                track_id: "m".to_string(),
                frames,
                aggregated_points: agg,
            }],
            detections: vec![Detection {
                frame_index: 0,
                bbox: bx(10.0, 3.0, 4.0, 2.0, 0.0),
                score: 0.9,
                contour: None,
            }],
            frame_period: 0.1,
        };
        let cfg = MatchConfig::default();
        let res = ap(&scene, &cfg, PredRep::BoxFootprint, 0.2).unwrap();
        assert_eq!(res.ap, 1.0);

        let pool = build_pool(&scene, &cfg, PredRep::BoxFootprint, 0.2).unwrap();
        // Only frame 0 has both ends of the horizon; the detection there is
        // pooled once, and no detections are skipped (frame 0 is usable).
        assert_eq!(pool.gts.len(), 1);
        assert_eq!(pool.detections.len(), 1);
        assert_eq!(pool.skipped_detections, 0);
    }

    #[test]
    fn leaving_track_is_skipped_and_late_detections_are_reported() {
        let mut frames = BTreeMap::new();
        frames.insert(0, ObjectFrame { gt_box: bx(10.0, 3.0, 4.0, 2.0, 0.0), visible_points: vec![] });
        let scene = Scene {
            ego: (0..3)
                .map(|f| EgoPose { t: 0.1 * f as f64, center: Vec2::ZERO, heading: 0.0 })
                .collect(),
            objects: vec![TrackedObject {
                track_id: "x".to_string(),
                frames,
                aggregated_points: vec![],
            }],
            detections: vec![Detection {
                frame_index: 2,
                bbox: bx(10.0, 3.0, 4.0, 2.0, 0.0),
                score: 0.9,
                contour: None,
            }],
            frame_period: 0.1,
        };
        let pool =
            build_pool(&scene, &MatchConfig::default(), PredRep::BoxFootprint, 0.1).unwrap();
        assert_eq!(pool.skipped_gts, 1); // observed at frame 0, gone at frame 1
        assert_eq!(pool.skipped_detections, 1); // frame 2 + 1 exceeds the scene
        assert!(pool.gts.is_empty());
    }

    #[test]
    fn error_cases() {
        let gt = bx(10.0, 3.0, 4.0, 2.0, 0.0);
        let scene = one_frame(&[gt], &[(gt, 0.9)]);
        let cfg = MatchConfig::default();
        assert!(matches!(
            ap(&scene, &cfg, PredRep::BoxFootprint, 5.0),
            Err(EvalError::MissingFrame { .. })
        ));
        assert!(matches!(
            ap(&scene, &cfg, PredRep::BoxFootprint, -1.0),
            Err(EvalError::InvalidHorizon(_))
        ));
        assert!(matches!(
            ap(&scene, &cfg, PredRep::Contour, 0.0),
            Err(EvalError::MissingContour { detection_index: 0 })
        ));
    }
}
