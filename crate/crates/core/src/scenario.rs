//! Seeded synthetic scenes: a room with wall landmarks, a rig trajectory, a
//! pool of candidate camera mounts, and the resulting measurement layout.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;
use std::path::Path;

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::geometry::{project, rot_z, CameraIntrinsics, Pose3};
use crate::rng::{stream_rng, STREAM_LANDMARKS, STREAM_NOISE, STREAM_TRAJECTORY};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Landmark {
    pub id: usize,
    pub position: Vector3<f64>,
}

/// One element of the candidate pool: a camera rigidly mounted on the body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CandidateMount {
    pub id: usize,
    /// body -> camera
    pub extrinsic: Pose3,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrajectoryKind {
    Circular,
    Forward,
    Lateral,
    Random,
}

impl fmt::Display for TrajectoryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            TrajectoryKind::Circular => "circular",
            TrajectoryKind::Forward => "forward",
            TrajectoryKind::Lateral => "lateral",
            TrajectoryKind::Random => "random",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub kind: TrajectoryKind,
    /// body -> world
    pub poses: Vec<Pose3>,
    /// Upper bound on the distance between consecutive poses.
    pub max_step: f64,
}

/// A visible (pose, candidate, landmark) triple with its pixel observations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub pose_idx: usize,
    pub landmark_idx: usize,
    pub candidate_id: usize,
    pub pixel: Vector2<f64>,
    pub noisy_pixel: Vector2<f64>,
}

// ---------------------------------------------------------------------------
// configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub room_half_extent: f64,
    pub landmarks_per_wall: usize,
    pub wall_rows: usize,
    pub z_min: f64,
    pub z_max: f64,
    pub jitter_sigma: f64,
    /// Extra grid of landmarks on the ceiling plane `z = z_max`.
    pub ceiling_landmarks: usize,
    /// Extra landmarks scattered uniformly inside the room volume.
    pub volumetric_landmarks: usize,
}

impl Default for EnvironmentConfig {
    fn default() -> Self {
        Self {
            room_half_extent: 4.0,
            landmarks_per_wall: 15,
            wall_rows: 3,
            z_min: -1.0,
            z_max: 1.5,
            jitter_sigma: 0.1,
            ceiling_landmarks: 0,
            volumetric_landmarks: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrajectoryConfig {
    pub kind: TrajectoryKind,
    pub num_poses: usize,
    /// Circle radius for `circular`.
    pub radius: f64,
    /// Step length for `forward`, `lateral` and `random`.
    pub step: f64,
    /// Heading change bound per step for `random`, degrees.
    pub turn_max_deg: f64,
    /// Minimum clearance between any pose and the walls.
    pub wall_margin: f64,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        Self {
            kind: TrajectoryKind::Random,
            num_poses: 20,
            radius: 1.5,
            step: 0.25,
            turn_max_deg: 30.0,
            wall_margin: 1.0,
        }
    }
}

/// Parameters of a trajectory generator, with the room clearance it must keep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectoryParams {
    pub radius: f64,
    pub step: f64,
    pub turn_max: f64,
    /// Poses must satisfy `|x|, |y| <= bound`.
    pub bound: f64,
}

impl TrajectoryParams {
    pub fn from_config(cfg: &TrajectoryConfig, room_half_extent: f64) -> Self {
        Self {
            radius: cfg.radius,
            step: cfg.step,
            turn_max: cfg.turn_max_deg.to_radians(),
            bound: room_half_extent - cfg.wall_margin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CameraConfig {
    pub focal_px: f64,
    pub image_size: [u32; 2],
    /// Defaults to the image center.
    pub principal_point: Option<[f64; 2]>,
    pub max_range: f64,
}

impl Default for CameraConfig {
    fn default() -> Self {
        Self {
            focal_px: 300.0,
            image_size: [640, 480],
            principal_point: None,
            max_range: 20.0,
        }
    }
}

/// Geometry of the candidate pool.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "layout", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameSpec {
    /// Mounts spaced along the perimeter of a square centered on the body.
    ///
    /// Each side carries `positions_per_side` positions starting at its first
    /// corner. Interior positions face the side's outward normal rotated by each
    /// of `yaw_offsets_deg`; corners face the outward diagonal rotated by
    /// `corner_yaw_offsets_deg` (or `yaw_offsets_deg` when absent). With
    /// `yaw_reference = "body"` every offset is measured from body `+x`
    /// instead.
    SquareFrame {
        side_length: f64,
        positions_per_side: usize,
        yaw_offsets_deg: Vec<f64>,
        #[serde(default)]
        corner_yaw_offsets_deg: Option<Vec<f64>>,
        #[serde(default)]
        yaw_reference: YawReference,
    },
    /// `count` mounts evenly spread along the body `y` axis, yaws interpolated
    /// linearly from `yaw_start_deg` to `yaw_end_deg`.
    LinearArray {
        count: usize,
        length: f64,
        #[serde(default)]
        yaw_start_deg: f64,
        #[serde(default)]
        yaw_end_deg: f64,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YawReference {
    #[default]
    Outward,
    Body,
}

impl FrameSpec {
    /// The shipped 68-mount square frame.
    pub fn square_frame_68() -> Self {
        FrameSpec::SquareFrame {
            side_length: 1.0,
            positions_per_side: 5,
            yaw_offsets_deg: vec![-45.0, 0.0, 45.0],
            corner_yaw_offsets_deg: Some(vec![-90.0, -45.0, 0.0, 45.0, 90.0]),
            yaw_reference: YawReference::Outward,
        }
    }

    /// Ten collinear forward-facing mounts.
    pub fn linear_array_10() -> Self {
        FrameSpec::LinearArray {
            count: 10,
            length: 0.9,
            yaw_start_deg: 0.0,
            yaw_end_deg: 0.0,
        }
    }

    /// Characteristic length used to normalize mount-to-mount distances.
    pub fn frame_length(&self) -> f64 {
        match self {
            FrameSpec::SquareFrame { side_length, .. } => *side_length,
            FrameSpec::LinearArray { length, .. } => *length,
        }
    }

    /// Point on the frame that counts as "front center" (body `+x`).
    pub fn front_center(&self) -> Vector3<f64> {
        match self {
            FrameSpec::SquareFrame { side_length, .. } => Vector3::new(side_length / 2.0, 0.0, 0.0),
            FrameSpec::LinearArray { .. } => Vector3::zeros(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CandidatesConfig {
    /// Layout name used to look up manual presets.
    pub name: String,
    pub frame: FrameSpec,
    #[serde(default)]
    pub camera: CameraConfig,
}

impl Default for CandidatesConfig {
    fn default() -> Self {
        Self {
            name: "square-frame-68".into(),
            frame: FrameSpec::square_frame_68(),
            camera: CameraConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseConfig {
    pub pixel_sigma: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self { pixel_sigma: 1.0 }
    }
}

/// Complete description of a scene; `(config, seed)` determines everything.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub environment: EnvironmentConfig,
    pub trajectory: TrajectoryConfig,
    pub candidates: CandidatesConfig,
    pub noise: NoiseConfig,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            environment: EnvironmentConfig::default(),
            trajectory: TrajectoryConfig::default(),
            candidates: CandidatesConfig::default(),
            noise: NoiseConfig::default(),
            seed: 0,
        }
    }
}

pub const PRESET_NAMES: &[&str] = &["default", "tiny-room", "linear-array"];

impl ScenarioConfig {
    /// Named presets.
    ///
    /// * `default`: 8 m room, 60 wall landmarks, 20-pose random walk, the
    ///   68-mount square frame.
    /// * `tiny-room`: 4 m room, 48 wall landmarks, 6 poses and ten
    ///   forward-facing mounts on a 0.5 m bar.
    /// * `linear-array`: the default room seen by ten forward-facing mounts.
    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "default" => Ok(Self::default()),
            "tiny-room" => Ok(Self {
                environment: EnvironmentConfig {
                    room_half_extent: 2.0,
                    landmarks_per_wall: 12,
                    wall_rows: 2,
                    z_min: -0.5,
                    z_max: 1.0,
                    jitter_sigma: 0.05,
                    ceiling_landmarks: 0,
                    volumetric_landmarks: 0,
                },
                trajectory: TrajectoryConfig {
                    kind: TrajectoryKind::Random,
                    num_poses: 6,
                    radius: 0.5,
                    step: 0.2,
                    turn_max_deg: 30.0,
                    wall_margin: 1.0,
                },
                candidates: CandidatesConfig {
                    name: "tiny-array-10".into(),
                    frame: FrameSpec::LinearArray {
                        count: 10,
                        length: 0.5,
                        yaw_start_deg: 0.0,
                        yaw_end_deg: 0.0,
                    },
                    camera: CameraConfig::default(),
                },
                noise: NoiseConfig::default(),
                seed: 0,
            }),
            "linear-array" => Ok(Self {
                candidates: CandidatesConfig {
                    name: "linear-array-10".into(),
                    frame: FrameSpec::linear_array_10(),
                    camera: CameraConfig::default(),
                },
                ..Self::default()
            }),
            other => Err(Error::Config(format!(
                "unknown scenario preset `{other}` (known: {})",
                PRESET_NAMES.join(", ")
            ))),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::format(path, e))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn intrinsics(&self) -> Result<CameraIntrinsics> {
        let cam = &self.candidates.camera;
        let [w, h] = cam.image_size;
        let intr = CameraIntrinsics {
            focal_px: cam.focal_px,
            principal_point: cam
                .principal_point
                .unwrap_or([w as f64 / 2.0, h as f64 / 2.0]),
            image_size: cam.image_size,
            pixel_sigma: self.noise.pixel_sigma,
            max_range: cam.max_range,
        };
        intr.validate()?;
        Ok(intr)
    }
}

// ---------------------------------------------------------------------------
// generators

/// Landmarks on the four walls of an axis-aligned room centered at the origin.
///
/// Each wall holds a `wall_rows`-row grid spanning the wall width and
/// `[z_min, z_max]`, filled row by row until `landmarks_per_wall` points are
/// placed, then every coordinate is jittered with `N(0, jitter_sigma^2)`.
pub fn generate_environment(env: &EnvironmentConfig, seed: u64) -> Result<Vec<Landmark>> {
    let h = env.room_half_extent;
    if !(h > 0.0) {
        return Err(Error::invalid("room_half_extent must be positive"));
    }
    if env.landmarks_per_wall + env.ceiling_landmarks + env.volumetric_landmarks == 0 {
        return Err(Error::invalid("zero landmarks requested"));
    }
    if env.landmarks_per_wall > 0 && env.wall_rows == 0 {
        return Err(Error::invalid("wall_rows must be positive"));
    }
    if !(env.z_max > env.z_min) || !(env.jitter_sigma >= 0.0) {
        return Err(Error::invalid("invalid landmark height range or jitter"));
    }

    let mut points = Vec::new();
    if env.landmarks_per_wall > 0 {
        let rows = env.wall_rows;
        let cols = env.landmarks_per_wall.div_ceil(rows);
        for wall in 0..4 {
            for n in 0..env.landmarks_per_wall {
                let (r, c) = (n / cols, n % cols);
                let u = -h + (c as f64 + 0.5) * 2.0 * h / cols as f64;
                let z = env.z_min + (r as f64 + 0.5) * (env.z_max - env.z_min) / rows as f64;
                let p = match wall {
                    0 => Vector3::new(h, u, z),
                    1 => Vector3::new(-u, h, z),
                    2 => Vector3::new(-h, -u, z),
                    _ => Vector3::new(u, -h, z),
                };
                points.push(p);
            }
        }
    }
    if env.ceiling_landmarks > 0 {
        let side = (env.ceiling_landmarks as f64).sqrt().ceil() as usize;
        for n in 0..env.ceiling_landmarks {
            let (r, c) = (n / side, n % side);
            let x = -h + (c as f64 + 0.5) * 2.0 * h / side as f64;
            let y = -h + (r as f64 + 0.5) * 2.0 * h / side as f64;
            points.push(Vector3::new(x, y, env.z_max));
        }
    }

    let mut rng = stream_rng(seed, STREAM_LANDMARKS);
    for _ in 0..env.volumetric_landmarks {
        points.push(Vector3::new(
            rng.random_range(-h..h),
            rng.random_range(-h..h),
            rng.random_range(env.z_min..env.z_max),
        ));
    }
    if env.jitter_sigma > 0.0 {
        let jitter = Normal::new(0.0, env.jitter_sigma).expect("finite sigma");
        for p in &mut points {
            for v in p.iter_mut() {
                *v += jitter.sample(&mut rng);
            }
        }
    }

    Ok(points
        .into_iter()
        .enumerate()
        .map(|(id, position)| Landmark { id, position })
        .collect())
}

pub fn generate_trajectory(
    kind: TrajectoryKind,
    num_poses: usize,
    params: &TrajectoryParams,
    seed: u64,
) -> Result<Trajectory> {
    if num_poses < 2 {
        return Err(Error::invalid("a trajectory needs at least two poses"));
    }
    if !(params.bound > 0.0) {
        return Err(Error::invalid("wall margin leaves no room for the trajectory"));
    }
    let p = num_poses as f64;
    let (poses, max_step) = match kind {
        TrajectoryKind::Circular => {
            let r = params.radius;
            if !(r > 0.0) {
                return Err(Error::invalid("circular radius must be positive"));
            }
            if r > params.bound {
                return Err(Error::invalid(format!(
                    "circle of radius {r} leaves the room (bound {})",
                    params.bound
                )));
            }
            let poses = (0..num_poses)
                .map(|i| {
                    let theta = 2.0 * PI * i as f64 / p;
                    Pose3::from_yaw(
                        theta + FRAC_PI_2,
                        Vector3::new(r * theta.cos(), r * theta.sin(), 0.0),
                    )
                })
                .collect();
            (poses, 2.0 * r * (PI / p).sin())
        }
        TrajectoryKind::Forward | TrajectoryKind::Lateral => {
            let step = params.step;
            if !(step > 0.0) {
                return Err(Error::invalid("step must be positive"));
            }
            let half = 0.5 * step * (p - 1.0);
            if half > params.bound {
                return Err(Error::invalid(format!(
                    "path of length {} leaves the room (bound {})",
                    2.0 * half,
                    params.bound
                )));
            }
            let poses = (0..num_poses)
                .map(|i| {
                    let s = -half + step * i as f64;
                    let t = if kind == TrajectoryKind::Forward {
                        Vector3::new(s, 0.0, 0.0)
                    } else {
                        Vector3::new(0.0, s, 0.0)
                    };
                    Pose3::from_translation(t)
                })
                .collect();
            (poses, step)
        }
        TrajectoryKind::Random => {
            let step = params.step;
            if !(step > 0.0) || step >= params.bound {
                return Err(Error::invalid("random-walk step must be in (0, bound)"));
            }
            let mut rng = stream_rng(seed, STREAM_TRAJECTORY);
            let inside = |x: f64, y: f64| x.abs() <= params.bound && y.abs() <= params.bound;
            let mut heading: f64 = rng.random_range(-PI..PI);
            let mut pos = Vector3::zeros();
            let mut poses = vec![Pose3::from_yaw(heading, pos)];
            while poses.len() < num_poses {
                heading += rng.random_range(-params.turn_max..=params.turn_max);
                let mut next = pos + step * Vector3::new(heading.cos(), heading.sin(), 0.0);
                let mut tries = 0;
                while !inside(next.x, next.y) {
                    tries += 1;
                    if tries > 64 {
                        return Err(Error::invalid("random walk cannot stay inside the room"));
                    }
                    heading = rng.random_range(-PI..PI);
                    next = pos + step * Vector3::new(heading.cos(), heading.sin(), 0.0);
                }
                pos = next;
                poses.push(Pose3::from_yaw(heading, pos));
            }
            (poses, step)
        }
    };
    Ok(Trajectory {
        kind,
        poses,
        max_step: max_step * (1.0 + 1e-12),
    })
}

/// Rotation of a camera (looking down its `+z`) whose optical axis points
/// along body yaw `yaw`, image `x` to the right and `y` down.
pub fn camera_rotation_for_yaw(yaw: f64) -> Matrix3<f64> {
    // columns: camera x, y, z expressed in body coordinates at yaw 0
    let base = Matrix3::new(0.0, 0.0, 1.0, -1.0, 0.0, 0.0, 0.0, -1.0, 0.0);
    rot_z(yaw) * base
}

pub fn generate_candidate_grid(
    frame: &FrameSpec,
    intrinsics: &CameraIntrinsics,
) -> Result<Vec<CandidateMount>> {
    let mut mounts: Vec<(Vector3<f64>, f64)> = Vec::new();
    match frame {
        FrameSpec::SquareFrame {
            side_length,
            positions_per_side,
            yaw_offsets_deg,
            corner_yaw_offsets_deg,
            yaw_reference,
        } => {
            if *positions_per_side == 0 || yaw_offsets_deg.is_empty() || !(*side_length > 0.0) {
                return Err(Error::invalid("empty square-frame spec"));
            }
            let a = side_length / 2.0;
            // counter-clockwise, starting at the front-right corner
            let corners = [
                Vector3::new(a, -a, 0.0),
                Vector3::new(a, a, 0.0),
                Vector3::new(-a, a, 0.0),
                Vector3::new(-a, -a, 0.0),
            ];
            let corner_offsets = corner_yaw_offsets_deg.as_ref().unwrap_or(yaw_offsets_deg);
            if corner_offsets.is_empty() {
                return Err(Error::invalid("empty corner yaw list"));
            }
            for side in 0..4 {
                let normal = side as f64 * FRAC_PI_2;
                let (from, to) = (corners[side], corners[(side + 1) % 4]);
                for i in 0..*positions_per_side {
                    let pos = from + (to - from) * (i as f64 / *positions_per_side as f64);
                    let (base, offsets) = if i == 0 {
                        (normal - FRAC_PI_4, corner_offsets)
                    } else {
                        (normal, yaw_offsets_deg)
                    };
                    let base = match yaw_reference {
                        YawReference::Outward => base,
                        YawReference::Body => 0.0,
                    };
                    for off in offsets {
                        mounts.push((pos, base + off.to_radians()));
                    }
                }
            }
        }
        FrameSpec::LinearArray {
            count,
            length,
            yaw_start_deg,
            yaw_end_deg,
        } => {
            if *count == 0 {
                return Err(Error::invalid("empty linear-array spec"));
            }
            for i in 0..*count {
                let s = if *count == 1 {
                    0.5
                } else {
                    i as f64 / (*count - 1) as f64
                };
                let y = length * (0.5 - s);
                let yaw = yaw_start_deg + (yaw_end_deg - yaw_start_deg) * s;
                mounts.push((Vector3::new(0.0, y, 0.0), yaw.to_radians()));
            }
        }
    }
    Ok(mounts
        .into_iter()
        .enumerate()
        .map(|(id, (t, yaw))| CandidateMount {
            id,
            extrinsic: Pose3 {
                rotation: camera_rotation_for_yaw(yaw),
                translation: t,
            },
            intrinsics: *intrinsics,
        })
        .collect())
}

/// Every visible (pose, candidate, landmark) triple in lexicographic order,
/// with i.i.d. `N(0, sigma^2 I)` pixel noise drawn from the scenario seed.
pub fn simulate_measurements(
    landmarks: &[Landmark],
    trajectory: &Trajectory,
    candidates: &[CandidateMount],
    seed: u64,
) -> Vec<Measurement> {
    let mut rng = stream_rng(seed, STREAM_NOISE);
    let mut layout = Vec::new();
    for (i, body) in trajectory.poses.iter().enumerate() {
        for cand in candidates {
            let cam = body.compose(&cand.extrinsic);
            let noise = Normal::new(0.0, cand.intrinsics.pixel_sigma).expect("sigma > 0");
            for lm in landmarks {
                if let Some((pixel, _)) = project(&cam, &cand.intrinsics, &lm.position) {
                    let eta = Vector2::new(noise.sample(&mut rng), noise.sample(&mut rng));
                    layout.push(Measurement {
                        pose_idx: i,
                        landmark_idx: lm.id,
                        candidate_id: cand.id,
                        pixel,
                        noisy_pixel: pixel + eta,
                    });
                }
            }
        }
    }
    layout
}

// ---------------------------------------------------------------------------
// scenario

/// A frozen scene. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub layout_name: String,
    pub frame: Option<FrameSpec>,
    pub landmarks: Vec<Landmark>,
    pub trajectory: Trajectory,
    pub candidates: Vec<CandidateMount>,
    pub seed: u64,
    pub layout: Vec<Measurement>,
}

impl Scenario {
    pub fn generate(cfg: &ScenarioConfig) -> Result<Self> {
        let intr = cfg.intrinsics()?;
        let landmarks = generate_environment(&cfg.environment, cfg.seed)?;
        let params = TrajectoryParams::from_config(&cfg.trajectory, cfg.environment.room_half_extent);
        let trajectory =
            generate_trajectory(cfg.trajectory.kind, cfg.trajectory.num_poses, &params, cfg.seed)?;
        let candidates = generate_candidate_grid(&cfg.candidates.frame, &intr)?;
        let mut sc = Self::from_parts(landmarks, trajectory, candidates, cfg.seed)?;
        sc.layout_name = cfg.candidates.name.clone();
        sc.frame = Some(cfg.candidates.frame.clone());
        Ok(sc)
    }

    /// Assembles a scenario from explicit parts and simulates its layout.
    pub fn from_parts(
        landmarks: Vec<Landmark>,
        trajectory: Trajectory,
        candidates: Vec<CandidateMount>,
        seed: u64,
    ) -> Result<Self> {
        if landmarks.is_empty() || candidates.is_empty() || trajectory.poses.len() < 2 {
            return Err(Error::invalid("scenario needs landmarks, candidates and >= 2 poses"));
        }
        if landmarks.iter().enumerate().any(|(i, l)| l.id != i)
            || candidates.iter().enumerate().any(|(i, c)| c.id != i)
        {
            return Err(Error::invalid("landmark and candidate ids must be contiguous from 0"));
        }
        for c in &candidates {
            c.intrinsics.validate()?;
        }
        let layout = simulate_measurements(&landmarks, &trajectory, &candidates, seed);
        Ok(Self {
            layout_name: "custom".into(),
            frame: None,
            landmarks,
            trajectory,
            candidates,
            seed,
            layout,
        })
    }

    pub fn num_poses(&self) -> usize {
        self.trajectory.poses.len()
    }

    pub fn num_landmarks(&self) -> usize {
        self.landmarks.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidates.len()
    }

    /// Same scene with every camera's pixel noise multiplied by `factor`
    /// (noise samples are rescaled, not redrawn).
    pub fn with_noise_scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        for c in &mut out.candidates {
            c.intrinsics.pixel_sigma *= factor;
        }
        for m in &mut out.layout {
            m.noisy_pixel = m.pixel + (m.noisy_pixel - m.pixel) * factor;
        }
        out
    }

    /// Hex SHA-256 of the canonical JSON encoding (first 16 hex digits).
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("scenario serializes");
        let digest = Sha256::digest(&json);
        hex::encode(&digest[..8])
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn dump(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::format(path, e))
    }
}
