//! Scene files: one JSON record per line.
//!
//! Record kinds, selected by the `kind` key:
//!
//! - `ego` — `{t, x, y, heading}`
//! - `object_frame` — `{track_id, frame, box: {cx, cy, length, width, heading}, points: [[x, y], ...]}`
//! - `object_agg` — `{track_id, points: [[x, y], ...]}`
//! - `detection` — `{frame, box: {...}, score, contour: [[x, y], ...] (optional)}`
//!
//! Numbers are meters, radians, and seconds. Unknown keys are ignored;
//! an unknown `kind` is a parse error. The frame period is inferred from
//! the ego timestamps, which must be uniformly spaced within 1e-6 s.

use std::path::{Path, PathBuf};

use egoeval_core::geom::{OrientedBox2, Polygon2, Vec2};
use egoeval_core::scene::{Detection, EgoPose, ObjectFrame, Scene, TrackedObject, ValidationError};
use serde::{Deserialize, Serialize};

/// Frame period used when the ego trajectory has fewer than two poses.
pub const DEFAULT_FRAME_PERIOD: f64 = 0.1;

#[derive(Debug, thiserror::Error)]
pub enum SceneFileError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error(transparent)]
    Validation(#[from] ValidationError),
}

#[derive(Debug, Serialize, Deserialize)]
struct BoxRec {
    cx: f64,
    cy: f64,
    length: f64,
    width: f64,
    heading: f64,
}

impl BoxRec {
    fn to_box(&self, path: &str) -> Result<OrientedBox2, SceneFileError> {
        OrientedBox2::new(Vec2::new(self.cx, self.cy), self.length, self.width, self.heading)
            .map_err(|e| ValidationError { path: path.to_string(), message: e.to_string() }.into())
    }

    fn from_box(b: &OrientedBox2) -> BoxRec {
        BoxRec {
            cx: b.center().x,
            cy: b.center().y,
            length: b.length(),
            width: b.width(),
            heading: b.heading(),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum Record {
    Ego {
        t: f64,
        x: f64,
        y: f64,
        heading: f64,
    },
    ObjectFrame {
        track_id: String,
        frame: usize,
        #[serde(rename = "box")]
        bbox: BoxRec,
        points: Vec<[f64; 2]>,
    },
    ObjectAgg {
        track_id: String,
        points: Vec<[f64; 2]>,
    },
    Detection {
        frame: usize,
        #[serde(rename = "box")]
        bbox: BoxRec,
        score: f64,
        #[serde(skip_serializing_if = "Option::is_none")]
        contour: Option<Vec<[f64; 2]>>,
    },
}

fn to_vec2s(points: &[[f64; 2]]) -> Vec<Vec2> {
    points.iter().map(|p| Vec2::new(p[0], p[1])).collect()
}

fn from_vec2s(points: &[Vec2]) -> Vec<[f64; 2]> {
    points.iter().map(|p| [p.x, p.y]).collect()
}

/// Frame period implied by the ego timestamps; they must be uniformly
/// spaced. With fewer than two poses, [`DEFAULT_FRAME_PERIOD`].
fn infer_frame_period(ego: &[EgoPose]) -> Result<f64, SceneFileError> {
    if ego.len() < 2 {
        return Ok(DEFAULT_FRAME_PERIOD);
    }
    let d0 = ego[1].t - ego[0].t;
    for (i, w) in ego.windows(2).enumerate() {
        let d = w[1].t - w[0].t;
        if (d - d0).abs() > 1e-6 {
            return Err(ValidationError {
                path: format!("ego[{}].t", i + 1),
                message: format!(
                    "timestamps are not uniformly spaced: step {d} differs from first step {d0}"
                ),
            }
            .into());
        }
    }
    Ok(d0)
}

/// Parse a scene from JSONL text. Blank lines are allowed; every other line
/// must hold one record. The assembled scene is fully validated.
pub fn parse_scene(text: &str) -> Result<Scene, SceneFileError> {
    let mut ego: Vec<EgoPose> = Vec::new();
    let mut objects: Vec<TrackedObject> = Vec::new();
    let mut detections: Vec<Detection> = Vec::new();
    let mut track_index: std::collections::HashMap<String, usize> =
        std::collections::HashMap::new();
    let mut saw_record = false;

    let mut object_entry = |track_id: &str, objects: &mut Vec<TrackedObject>| -> usize {
        *track_index.entry(track_id.to_string()).or_insert_with(|| {
            objects.push(TrackedObject {
                track_id: track_id.to_string(),
                frames: std::collections::BTreeMap::new(),
                aggregated_points: Vec::new(),
            });
            objects.len() - 1
        })
    };

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        saw_record = true;
        let record: Record = serde_json::from_str(raw)
            .map_err(|e| SceneFileError::Parse { line, message: e.to_string() })?;
        match record {
            Record::Ego { t, x, y, heading } => {
                ego.push(EgoPose { t, center: Vec2::new(x, y), heading });
            }
            Record::ObjectFrame { track_id, frame, bbox, points } => {
                let oi = object_entry(&track_id, &mut objects);
                let gt_box = bbox.to_box(&format!("objects[{oi}].frames[{frame}].gt_box"))?;
                objects[oi]
                    .frames
                    .insert(frame, ObjectFrame { gt_box, visible_points: to_vec2s(&points) });
            }
            Record::ObjectAgg { track_id, points } => {
                let oi = object_entry(&track_id, &mut objects);
                objects[oi].aggregated_points = to_vec2s(&points);
            }
            Record::Detection { frame, bbox, score, contour } => {
                let di = detections.len();
                let bbox = bbox.to_box(&format!("detections[{di}].bbox"))?;
                let contour = match contour {
                    Some(pts) => Some(Polygon2::new(to_vec2s(&pts)).map_err(|e| {
                        ValidationError {
                            path: format!("detections[{di}].contour"),
                            message: e.to_string(),
                        }
                    })?),
                    None => None,
                };
                detections.push(Detection { frame_index: frame, bbox, score, contour });
            }
        }
    }

    if !saw_record {
        return Err(SceneFileError::Parse {
            line: 1,
            message: "file contains no records".to_string(),
        });
    }

    let frame_period = infer_frame_period(&ego)?;
    let scene = Scene { ego, objects, detections, frame_period };
    scene.validate()?;
    Ok(scene)
}

/// Serialize a scene to JSONL text: ego poses, then per-object frame and
/// aggregate records, then detections. Parsing the output reproduces an
/// equal scene.
pub fn scene_to_jsonl(scene: &Scene) -> String {
    let mut out = String::new();
    let mut push = |r: &Record| {
        out.push_str(&serde_json::to_string(r).expect("scene records serialize"));
        out.push('\n');
    };
    for pose in &scene.ego {
        push(&Record::Ego {
            t: pose.t,
            x: pose.center.x,
            y: pose.center.y,
            heading: pose.heading,
        });
    }
    for obj in &scene.objects {
        for (&frame, of) in &obj.frames {
            push(&Record::ObjectFrame {
                track_id: obj.track_id.clone(),
                frame,
                bbox: BoxRec::from_box(&of.gt_box),
                points: from_vec2s(&of.visible_points),
            });
        }
        if !obj.aggregated_points.is_empty() {
            push(&Record::ObjectAgg {
                track_id: obj.track_id.clone(),
                points: from_vec2s(&obj.aggregated_points),
            });
        }
    }
    for det in &scene.detections {
        push(&Record::Detection {
            frame: det.frame_index,
            bbox: BoxRec::from_box(&det.bbox),
            score: det.score,
            contour: det.contour.as_ref().map(|c| from_vec2s(c.vertices())),
        });
    }
    out
}

pub fn load_scene(path: &Path) -> Result<Scene, SceneFileError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| SceneFileError::Io { path: path.to_path_buf(), source })?;
    parse_scene(&text)
}

pub fn save_scene(scene: &Scene, path: &Path) -> Result<(), SceneFileError> {
    std::fs::write(path, scene_to_jsonl(scene))
        .map_err(|source| SceneFileError::Io { path: path.to_path_buf(), source })
}
