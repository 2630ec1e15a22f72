//! Deterministic synthetic scenes: a driving ego trajectory, rectangular
//! objects with surface samples, and noisy detections of those objects.

use egoeval_core::geom::{wrap_angle, OrientedBox2, Vec2};
use egoeval_core::scene::{Detection, EgoPose, ObjectFrame, Scene, TrackedObject};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid config: {0}")]
    InvalidConfig(String),
}

/// Knobs for the generator. All noise magnitudes at zero produce detections
/// whose boxes equal the ground-truth boxes with score exactly 1.
#[derive(Debug, Clone, Serialize)]
pub struct SynthConfig {
    pub n_objects: usize,
    pub n_frames: usize,
    /// Seconds between frames.
    pub frame_period: f64,
    /// Ego forward speed, m/s.
    pub ego_speed: f64,
    /// Ego turn rate, rad/s; zero drives a straight line.
    pub ego_yaw_rate: f64,
    /// Detection center translation noise, meters (std dev per axis).
    pub trans_sigma: f64,
    /// Detection heading noise, radians (std dev).
    pub heading_sigma: f64,
    /// Detection size noise: multiplicative factor std dev.
    pub size_sigma: f64,
    /// Fraction of objects given a constant velocity.
    pub moving_fraction: f64,
    /// When set, per-frame points cover the whole rectangle instead of the
    /// ego-facing half.
    pub full_visibility: bool,
    /// Per-frame boundary sample count (before visibility filtering).
    pub boundary_samples: usize,
    /// Sample count for the accumulated surface point set.
    pub agg_samples: usize,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            n_objects: 10,
            n_frames: 50,
            frame_period: 0.1,
            ego_speed: 5.0,
            ego_yaw_rate: 0.0,
            trans_sigma: 0.0,
            heading_sigma: 0.0,
            size_sigma: 0.0,
            moving_fraction: 0.25,
            full_visibility: false,
            boundary_samples: 48,
            agg_samples: 256,
        }
    }
}

impl SynthConfig {
    /// Scale all three detection-noise magnitudes from one knob:
    /// `noise` meters of translation, a tenth of that in radians of heading,
    /// and a twentieth as the relative size factor.
    pub fn with_noise(mut self, noise: f64) -> Self {
        self.trans_sigma = noise;
        self.heading_sigma = 0.1 * noise;
        self.size_sigma = 0.05 * noise;
        self
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let bad = |m: &str| Err(SynthError::InvalidConfig(m.to_string()));
        if self.n_objects == 0 {
            return bad("n_objects must be positive");
        }
        if self.n_frames == 0 {
            return bad("n_frames must be positive");
        }
        if !(self.frame_period > 0.0 && self.frame_period.is_finite()) {
            return bad("frame_period must be positive");
        }
        if !(self.ego_speed.is_finite() && self.ego_speed >= 0.0) {
            return bad("ego_speed must be non-negative");
        }
        if !self.ego_yaw_rate.is_finite() {
            return bad("ego_yaw_rate must be finite");
        }
        for (v, name) in [
            (self.trans_sigma, "trans_sigma"),
            (self.heading_sigma, "heading_sigma"),
            (self.size_sigma, "size_sigma"),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return bad(&format!("{name} must be non-negative"));
            }
        }
        if !(0.0..=1.0).contains(&self.moving_fraction) {
            return bad("moving_fraction must be in [0, 1]");
        }
        if self.boundary_samples < 8 {
            return bad("boundary_samples must be at least 8");
        }
        if self.agg_samples < 8 {
            return bad("agg_samples must be at least 8");
        }
        Ok(())
    }
}

/// The ego starts at the origin heading +x and integrates speed and yaw
/// rate per frame.
fn ego_trajectory(cfg: &SynthConfig) -> Vec<EgoPose> {
    let dt = cfg.frame_period;
    let mut out = Vec::with_capacity(cfg.n_frames);
    let mut center = Vec2::ZERO;
    let mut heading = 0.0;
    for k in 0..cfg.n_frames {
        out.push(EgoPose { t: k as f64 * dt, center, heading });
        center = center + Vec2::from_angle(heading) * (cfg.ego_speed * dt);
        heading = wrap_angle(heading + cfg.ego_yaw_rate * dt);
    }
    out
}

/// Generate a scene. Identical `(config, seed)` pairs produce identical
/// scenes.
pub fn generate(cfg: &SynthConfig, seed: u64) -> Result<Scene, SynthError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ego = ego_trajectory(cfg);
    let dt = cfg.frame_period;

    let mut objects = Vec::with_capacity(cfg.n_objects);
    let mut detections = Vec::new();
    for i in 0..cfg.n_objects {
        let length = rng.gen_range(3.5..5.5);
        let width = rng.gen_range(1.6..2.4);
        let x0 = rng.gen_range(5.0..70.0);
        let side = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        let y0 = side * rng.gen_range(1.0..12.0);
        let moving = rng.gen_range(0.0..1.0) < cfg.moving_fraction;
        let (vel, heading) = if moving {
            let speed = rng.gen_range(0.5..3.0);
            let dir = rng.gen_range(-core::f64::consts::PI..core::f64::consts::PI);
            (Vec2::from_angle(dir) * speed, dir)
        } else {
            (Vec2::ZERO, rng.gen_range(-core::f64::consts::PI..core::f64::consts::PI))
        };

        let mut frames = std::collections::BTreeMap::new();
        let mut aggregated_points = Vec::new();
        for (f, pose) in ego.iter().enumerate() {
            let center = Vec2::new(x0, y0) + vel * (f as f64 * dt);
            let gt_box = OrientedBox2::new(center, length, width, heading)
                .expect("generated dimensions are positive");
            let samples = gt_box.footprint().perimeter_samples(cfg.boundary_samples);
            let visible_points: Vec<Vec2> = if cfg.full_visibility {
                samples
            } else {
                // Keep the half of the outline facing the sensor.
                let toward_ego = pose.center - center;
                samples.into_iter().filter(|&p| (p - center).dot(toward_ego) >= 0.0).collect()
            };
            if f == 0 {
                aggregated_points = gt_box.footprint().perimeter_samples(cfg.agg_samples);
            }
            frames.insert(f, ObjectFrame { gt_box, visible_points });

            // Detection: the ground-truth box perturbed by gaussian noise,
            // scored by how small the perturbation came out.
            let zs: [f64; 4] = std::array::from_fn(|_| rng.sample(StandardNormal));
            let d_center = Vec2::new(cfg.trans_sigma * zs[0], cfg.trans_sigma * zs[1]);
            let d_heading = cfg.heading_sigma * zs[2];
            let size_factor = (1.0 + cfg.size_sigma * zs[3]).max(0.2);
            let bbox = OrientedBox2::new(
                center + d_center,
                length * size_factor,
                width * size_factor,
                wrap_angle(heading + d_heading),
            )
            .expect("clamped size factor keeps dimensions positive");
            let magnitude = d_center.norm()
                + d_heading.abs() * (length / 2.0)
                + (size_factor - 1.0).abs() * (length + width) / 2.0;
            let score = (-magnitude / 0.5).exp();
            detections.push(Detection { frame_index: f, bbox, score, contour: None });
        }

        objects.push(TrackedObject { track_id: format!("obj{i:03}"), frames, aggregated_points });
    }

    let scene = Scene { ego, objects, detections, frame_period: dt };
    scene.validate().expect("generated scenes satisfy the scene invariants");
    Ok(scene)
}
