//! Support distances and their errors.
//!
//! The support distance of an object boundary with respect to a line is the
//! smallest distance from the boundary to the line, and zero when the line
//! passes through the boundary. Measured against the ego's lateral and
//! longitudinal axes it captures how close the object comes to the ego's
//! travel corridor — which is what matters for deciding whether a detector's
//! shape error is benign or safety-relevant.

use alloc::string::String;
use alloc::vec::Vec;

use crate::geom::{apply_motion, segment_line_distance, Boundary, Line2, RigidMotion2};
use crate::math;
use crate::scene::{EgoPose, Scene, TrackedObject};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SdeError {
    #[error("track {track_id} has no frame {frame}")]
    MissingFrame { track_id: String, frame: usize },
    #[error("no ego pose at frame {0}")]
    MissingEgoPose(usize),
    #[error("horizon must be finite and non-negative, got {0}")]
    InvalidHorizon(f64),
    #[error("no records to summarize")]
    EmptyInput,
}

/// Distances from a boundary to the ego's lateral and longitudinal lines.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SupportDistances {
    pub lat: f64,
    pub lon: f64,
}

/// Smallest distance from the boundary to the line; zero when the line
/// crosses it. A sampled boundary crosses the line when samples sit strictly
/// on both sides.
fn line_support(boundary: &Boundary, line: &Line2) -> f64 {
    match boundary {
        Boundary::Points(pts) => {
            let mut best = f64::INFINITY;
            let mut has_pos = false;
            let mut has_neg = false;
            for &p in pts {
                let s = line.signed_distance(p);
                if s > 0.0 {
                    has_pos = true;
                } else if s < 0.0 {
                    has_neg = true;
                }
                best = best.min(math::abs(s));
            }
            if has_pos && has_neg {
                0.0
            } else {
                best
            }
        }
        Boundary::Poly(poly) => {
            let mut best = f64::INFINITY;
            for (a, b) in poly.edges() {
                best = best.min(segment_line_distance(a, b, line));
            }
            best
        }
    }
}

pub fn support_distances(boundary: &Boundary, ego: &EgoPose) -> SupportDistances {
    SupportDistances {
        lat: line_support(boundary, &ego.lateral_line()),
        lon: line_support(boundary, &ego.longitudinal_line()),
    }
}

/// Lateral and longitudinal support distance errors for one prediction/GT
/// pair, measured at a horizon of `t_offset` seconds past the prediction
/// frame. Signed errors are GT minus prediction, so positive means the
/// prediction protrudes past the true boundary toward the ego line.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdeRecord {
    pub sde_lat_signed: f64,
    pub sde_lon_signed: f64,
    /// max(|lateral|, |longitudinal|)
    pub sde: f64,
    pub t_offset: f64,
    /// All four support distances were zero: both boundaries already cross
    /// both ego lines and the error carries no direction information.
    pub degenerate: bool,
}

pub fn sde(pred: &Boundary, gt: &Boundary, ego: &EgoPose) -> SdeRecord {
    let sp = support_distances(pred, ego);
    let sg = support_distances(gt, ego);
    let lat = sg.lat - sp.lat;
    let lon = sg.lon - sp.lon;
    SdeRecord {
        sde_lat_signed: lat,
        sde_lon_signed: lon,
        sde: math::abs(lat).max(math::abs(lon)),
        t_offset: 0.0,
        degenerate: sp.lat == 0.0 && sp.lon == 0.0 && sg.lat == 0.0 && sg.lon == 0.0,
    }
}

/// Future-horizon error: the prediction made at frame `frame` is carried
/// forward by the ground-truth track's rigid motion over `t` seconds (rounded
/// to whole frames) and compared against the ground-truth boundary at the
/// future frame, under the ego pose at that frame.
pub fn sde_at(
    pred: &Boundary,
    track: &TrackedObject,
    scene: &Scene,
    frame: usize,
    t: f64,
) -> Result<SdeRecord, SdeError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(SdeError::InvalidHorizon(t));
    }
    let eval_frame = frame + scene.frame_offset(t);
    let ego = scene
        .ego
        .get(eval_frame)
        .ok_or(SdeError::MissingEgoPose(eval_frame))?;
    let motion = track
        .motion_between(frame, eval_frame)
        .ok_or_else(|| missing(track, frame, eval_frame))?;
    let gt = track
        .boundary_at(eval_frame)
        .ok_or_else(|| missing(track, frame, eval_frame))?;
    let moved = apply_motion(&motion, pred);
    let mut rec = sde(&moved, &gt, ego);
    rec.t_offset = t;
    Ok(rec)
}

fn missing(track: &TrackedObject, frame: usize, eval_frame: usize) -> SdeError {
    let which = if track.frames.contains_key(&frame) { eval_frame } else { frame };
    SdeError::MissingFrame { track_id: track.track_id.clone(), frame: which }
}

/// Carry an already-resolved prediction boundary through a known track
/// motion and score it against a known ground-truth boundary.
pub fn sde_with_motion(
    pred: &Boundary,
    motion: &RigidMotion2,
    gt: &Boundary,
    ego: &EgoPose,
    t_offset: f64,
) -> SdeRecord {
    let moved = apply_motion(motion, pred);
    let mut rec = sde(&moved, gt, ego);
    rec.t_offset = t_offset;
    rec
}

/// Histogram bounds for the signed-error summary: fixed so histograms from
/// different runs can be compared bin by bin.
pub const HIST_LO: f64 = -1.0;
pub const HIST_HI: f64 = 1.0;
pub const HIST_BINS: usize = 40;

#[derive(Debug, Clone, PartialEq)]
pub struct SignedHistogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl SignedHistogram {
    fn new(lo: f64, hi: f64, bins: usize) -> Self {
        SignedHistogram { lo, hi, counts: alloc::vec![0; bins] }
    }

    fn add(&mut self, v: f64) {
        let n = self.counts.len();
        let t = (v - self.lo) / (self.hi - self.lo);
        let idx = ((t * n as f64) as isize).clamp(0, n as isize - 1) as usize;
        self.counts[idx] += 1;
    }
}

/// Aggregate statistics over a batch of error records.
#[derive(Debug, Clone, PartialEq)]
pub struct SdeStats {
    pub count: usize,
    pub mean_sde: f64,
    pub median_sde: f64,
    pub mean_abs_lat: f64,
    pub median_abs_lat: f64,
    pub mean_abs_lon: f64,
    pub median_abs_lon: f64,
    pub mean_signed_lat: f64,
    pub median_signed_lat: f64,
    pub mean_signed_lon: f64,
    pub median_signed_lon: f64,
    /// Fraction of records where the lateral error dominates.
    pub lat_dominant_fraction: f64,
    /// Histogram of the signed dominant error.
    pub signed_hist: SignedHistogram,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

pub fn sde_stats(records: &[SdeRecord]) -> Result<SdeStats, SdeError> {
    if records.is_empty() {
        return Err(SdeError::EmptyInput);
    }
    let mut sde_v: Vec<f64> = records.iter().map(|r| r.sde).collect();
    let mut alat: Vec<f64> = records.iter().map(|r| math::abs(r.sde_lat_signed)).collect();
    let mut alon: Vec<f64> = records.iter().map(|r| math::abs(r.sde_lon_signed)).collect();
    let mut slat: Vec<f64> = records.iter().map(|r| r.sde_lat_signed).collect();
    let mut slon: Vec<f64> = records.iter().map(|r| r.sde_lon_signed).collect();

    let mut hist = SignedHistogram::new(HIST_LO, HIST_HI, HIST_BINS);
    let mut lat_dom = 0usize;
    for r in records {
        let lat_wins = math::abs(r.sde_lat_signed) > math::abs(r.sde_lon_signed);
        if lat_wins {
            lat_dom += 1;
        }
        hist.add(if lat_wins { r.sde_lat_signed } else { r.sde_lon_signed });
    }

    Ok(SdeStats {
        count: records.len(),
        mean_sde: mean(&sde_v),
        mean_abs_lat: mean(&alat),
        mean_abs_lon: mean(&alon),
        mean_signed_lat: mean(&slat),
        mean_signed_lon: mean(&slon),
        median_sde: median(&mut sde_v),
        median_abs_lat: median(&mut alat),
        median_abs_lon: median(&mut alon),
        median_signed_lat: median(&mut slat),
        median_signed_lon: median(&mut slon),
        lat_dominant_fraction: lat_dom as f64 / records.len() as f64,
        signed_hist: hist,
    })
}
