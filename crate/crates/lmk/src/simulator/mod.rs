//! Seeded synthetic egocentric scenarios with full ground truth: a
//! kitchen-like world of surfaces and containers, a moving head-mounted
//! camera, objects that are picked up, carried, and placed, and the
//! resulting partial, noisy lifted observations. Objects inside closed
//! containers emit nothing; that is the canonical occlusion.
//!
//! Generation is a pure function of the config. The activity script, the
//! appearance model, and the observation noise consume three independent
//! substreams of the seed, so changing a noise magnitude never changes
//! trajectories.

mod activity;

pub use activity::PickPlaceEvent;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{in_fov, project, unproject, CameraFrame, CameraIntrinsics, CameraPose, Pixel, Point3};
use crate::tracker::{FrameIndex, LiftedObservation};

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("infeasible scenario: {0}")]
    Infeasible(String),
    #[error("invalid scenario config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceSpec {
    pub name: String,
    pub center_x: f64,
    pub center_y: f64,
    pub half_x: f64,
    pub half_y: f64,
    pub top_z: f64,
    pub slots: usize,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        Self {
            name: "surface".into(),
            center_x: 0.0,
            center_y: 0.0,
            half_x: 0.5,
            half_y: 0.3,
            top_z: 0.9,
            slots: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ContainerSpec {
    pub name: String,
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub slots: usize,
}

impl Default for ContainerSpec {
    fn default() -> Self {
        Self {
            name: "container".into(),
            x: 0.0,
            y: 0.0,
            z: 1.0,
            slots: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WorldConfig {
    pub surfaces: Vec<SurfaceSpec>,
    pub containers: Vec<ContainerSpec>,
}

impl Default for WorldConfig {
    fn default() -> Self {
        let surface = |name: &str, cx: f64, cy: f64, hx: f64, hy: f64, z: f64, slots| SurfaceSpec {
            name: name.into(),
            center_x: cx,
            center_y: cy,
            half_x: hx,
            half_y: hy,
            top_z: z,
            slots,
        };
        let container = |name: &str, x: f64, y: f64, z: f64, slots| ContainerSpec {
            name: name.into(),
            x,
            y,
            z,
            slots,
        };
        Self {
            surfaces: vec![
                surface("counter_nw", 1.3, 5.0, 0.7, 0.25, 0.92, 7),
                surface("counter_ne", 4.4, 5.0, 0.7, 0.25, 0.92, 7),
                surface("counter_e", 6.4, 2.9, 0.25, 0.8, 0.92, 7),
                surface("table", 3.1, 1.2, 0.8, 0.4, 0.76, 8),
                surface("shelf_w", 0.4, 2.9, 0.25, 0.5, 1.15, 6),
            ],
            containers: vec![
                container("cupboard", 0.5, 4.6, 1.5, 4),
                container("drawer", 6.4, 4.7, 0.65, 4),
                container("fridge", 0.45, 1.0, 1.1, 4),
            ],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CameraMotionConfig {
    pub eye_height: f64,
    /// Walking speed in meters per second.
    pub walk_speed: f64,
    /// How far the wearer stands from a station focus.
    pub standoff: f64,
    /// Head turn rate in degrees per second.
    pub turn_rate_deg: f64,
}

impl Default for CameraMotionConfig {
    fn default() -> Self {
        Self {
            eye_height: 1.58,
            walk_speed: 0.9,
            standoff: 0.62,
            turn_rate_deg: 160.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ActivityConfig {
    pub min_idle_frames: u32,
    pub max_idle_frames: u32,
    /// Chance of picking an object up while dwelling at a non-empty station.
    pub pick_prob: f64,
    /// Frames added on both sides of a pick..place episode when deriving
    /// interaction windows.
    pub interaction_pad_frames: u32,
    /// Opening frames spent at a vantage point that overlooks the whole
    /// world before walking in. Every placed object is visible during the
    /// survey, so each debuts with its own track.
    pub survey_frames: u32,
}

impl Default for ActivityConfig {
    fn default() -> Self {
        Self {
            min_idle_frames: 4,
            max_idle_frames: 16,
            pick_prob: 0.85,
            interaction_pad_frames: 50,
            survey_frames: 30,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntrinsicsConfig {
    pub fx: f64,
    pub fy: f64,
    pub width: f64,
    pub height: f64,
}

impl Default for IntrinsicsConfig {
    fn default() -> Self {
        Self {
            fx: 300.0,
            fy: 300.0,
            width: 640.0,
            height: 360.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub duration_frames: FrameIndex,
    pub frame_rate: f64,
    pub num_objects: usize,
    pub appearance_dim: usize,
    /// Per-component Gaussian noise added to emitted appearance vectors.
    pub appearance_noise_sigma: f64,
    /// Gaussian depth noise in meters applied before unprojection.
    pub depth_noise_sigma: f64,
    /// Probability that a visible, unoccluded object emits no observation.
    pub observation_dropout: f64,
    /// Per-pickup probability of an appearance drift event.
    pub appearance_drift_prob: f64,
    /// How far a drift event pulls the base vector toward a random
    /// direction.
    pub appearance_drift_weight: f64,
    /// Objects share cluster prototypes (look-alike bowls and plates);
    /// zero means fully independent base vectors.
    pub appearance_clusters: usize,
    /// Give every object an exactly orthogonal one-hot appearance.
    pub orthogonal_appearances: bool,
    pub world: WorldConfig,
    pub motion: CameraMotionConfig,
    pub activity: ActivityConfig,
    pub intrinsics: IntrinsicsConfig,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            duration_frames: 6000,
            frame_rate: 10.0,
            num_objects: 20,
            appearance_dim: 64,
            appearance_noise_sigma: 0.07,
            depth_noise_sigma: 0.02,
            observation_dropout: 0.1,
            appearance_drift_prob: 0.25,
            appearance_drift_weight: 0.35,
            appearance_clusters: 6,
            orthogonal_appearances: false,
            world: WorldConfig::default(),
            motion: CameraMotionConfig::default(),
            activity: ActivityConfig::default(),
            intrinsics: IntrinsicsConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<(), SimError> {
        if self.duration_frames < 1 {
            return Err(SimError::InvalidConfig("duration_frames must be >= 1".into()));
        }
        if self.num_objects == 0 {
            return Err(SimError::InvalidConfig("num_objects must be >= 1".into()));
        }
        if self.appearance_dim < 2 {
            return Err(SimError::InvalidConfig("appearance_dim must be >= 2".into()));
        }
        if self.frame_rate.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(SimError::InvalidConfig("frame_rate must be positive".into()));
        }
        for (name, p) in [
            ("observation_dropout", self.observation_dropout),
            ("appearance_drift_prob", self.appearance_drift_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(SimError::InvalidConfig(format!("{name} must be in [0, 1], got {p}")));
            }
        }
        for (name, s) in [
            ("appearance_noise_sigma", self.appearance_noise_sigma),
            ("depth_noise_sigma", self.depth_noise_sigma),
        ] {
            if s.is_nan() || s < 0.0 || s.is_infinite() {
                return Err(SimError::InvalidConfig(format!("{name} must be >= 0, got {s}")));
            }
        }
        if self.orthogonal_appearances && self.appearance_dim < self.num_objects {
            return Err(SimError::InvalidConfig(format!(
                "orthogonal appearances need appearance_dim >= num_objects ({} < {})",
                self.appearance_dim, self.num_objects
            )));
        }
        Ok(())
    }

    pub fn camera_intrinsics(&self) -> Result<CameraIntrinsics, SimError> {
        CameraIntrinsics::new(
            self.intrinsics.fx,
            self.intrinsics.fy,
            self.intrinsics.width / 2.0,
            self.intrinsics.height / 2.0,
            self.intrinsics.width,
            self.intrinsics.height,
        )
        .map_err(|e| SimError::InvalidConfig(e.to_string()))
    }
}

/// Ground-truth record for one object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectTruth {
    pub id: u32,
    /// Physical radius in meters, for per-object-radius evaluation.
    pub radius: f64,
    pub locations: Vec<Point3>,
    pub containerized: Vec<bool>,
    pub carried: Vec<bool>,
    /// Padded pick..place interaction windows, inclusive on both ends.
    pub interaction_windows: Vec<(FrameIndex, FrameIndex)>,
    /// Appearance base segments: (first frame, base vector).
    pub base_appearances: Vec<(FrameIndex, Vec<f64>)>,
}

impl ObjectTruth {
    pub fn interacting_at(&self, frame: FrameIndex) -> bool {
        self.interaction_windows
            .iter()
            .any(|&(a, b)| a <= frame && frame <= b)
    }
}

/// The exact pixel/depth sample behind an emitted observation; kept so a
/// log export carries precisely what the tracker consumed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationProvenance {
    pub pixel: Pixel,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub intrinsics: CameraIntrinsics,
    pub cameras: Vec<CameraPose>,
    pub objects: Vec<ObjectTruth>,
    pub observations: Vec<Vec<LiftedObservation>>,
    /// Parallel to `observations`.
    pub provenance: Vec<Vec<ObservationProvenance>>,
}

impl Scenario {
    pub fn duration(&self) -> FrameIndex {
        self.cameras.len() as FrameIndex
    }

    pub fn camera_frame(&self, frame: FrameIndex) -> CameraFrame {
        CameraFrame {
            intrinsics: self.intrinsics,
            pose: self.cameras[frame as usize],
        }
    }

    /// True iff the object is inside the view frustum and not shut inside
    /// a container. Stochastic dropout is separate.
    pub fn true_visibility(&self, object: u32, frame: FrameIndex) -> bool {
        let truth = &self.objects[object as usize];
        let t = frame as usize;
        !truth.containerized[t]
            && in_fov(truth.locations[t], &self.intrinsics, &self.cameras[t])
    }

    /// Number of objects whose interaction window covers the frame.
    pub fn interacting_count(&self, frame: FrameIndex) -> usize {
        self.objects.iter().filter(|o| o.interacting_at(frame)).count()
    }

    /// Fraction of (object, frame) pairs outside the camera frustum.
    pub fn out_of_view_fraction(&self) -> f64 {
        let mut out = 0usize;
        let mut total = 0usize;
        for truth in &self.objects {
            for (t, loc) in truth.locations.iter().enumerate() {
                total += 1;
                if !in_fov(*loc, &self.intrinsics, &self.cameras[t]) {
                    out += 1;
                }
            }
        }
        out as f64 / total.max(1) as f64
    }

    /// Appearance base in effect at a frame.
    pub fn base_appearance(&self, object: u32, frame: FrameIndex) -> &[f64] {
        let segments = &self.objects[object as usize].base_appearances;
        let mut current = &segments[0].1;
        for (start, base) in segments {
            if *start <= frame {
                current = base;
            } else {
                break;
            }
        }
        current
    }
}

/// Deterministically generate a scenario from its config.
pub fn generate(config: &ScenarioConfig) -> Result<Scenario, SimError> {
    config.validate()?;
    let intrinsics = config.camera_intrinsics()?;

    // Independent substreams: script, appearance model, observation noise.
    let mut script_rng = substream(config.seed, 0);
    let mut appearance_rng = substream(config.seed, 1);
    let mut obs_rng = substream(config.seed, 2);

    let script = activity::run_script(config, &mut script_rng)?;
    let radii: Vec<f64> = (0..config.num_objects)
        .map(|_| script_rng.gen_range(0.03..0.25))
        .collect();

    let bases = build_appearance_bases(config, &script.events, &mut appearance_rng);

    // Interaction windows from the pick/place event log.
    let pad = config.activity.interaction_pad_frames;
    let last = config.duration_frames - 1;
    let mut windows: Vec<Vec<(FrameIndex, FrameIndex)>> = vec![Vec::new(); config.num_objects];
    for ev in &script.events {
        let start = ev.pick_frame.saturating_sub(pad);
        let end = (ev.place_frame.unwrap_or(last)).saturating_add(pad).min(last);
        windows[ev.object].push((start, end));
    }

    // Emission.
    let depth_noise = positive_sigma(config.depth_noise_sigma);
    let appearance_noise = positive_sigma(config.appearance_noise_sigma);
    let mut observations: Vec<Vec<LiftedObservation>> = Vec::with_capacity(script.cameras.len());
    let mut provenance: Vec<Vec<ObservationProvenance>> = Vec::with_capacity(script.cameras.len());
    for t in 0..config.duration_frames as usize {
        let pose = script.cameras[t];
        let mut frame_obs = Vec::new();
        let mut frame_prov = Vec::new();
        #[allow(clippy::needless_range_loop)]
        for obj in 0..config.num_objects {
            if script.containerized[obj][t] {
                continue;
            }
            let true_loc = script.locations[obj][t];
            if !in_fov(true_loc, &intrinsics, &pose) {
                continue;
            }
            if config.observation_dropout > 0.0 && obs_rng.gen::<f64>() < config.observation_dropout
            {
                continue;
            }
            let (pixel, true_depth) = project(true_loc, &intrinsics, &pose);
            let (location, depth) = match depth_noise {
                Some(noise) => {
                    let mut d = true_depth + noise.sample(&mut obs_rng);
                    while d <= 0.01 {
                        d = true_depth + noise.sample(&mut obs_rng);
                    }
                    let lifted = unproject(pixel, d, &intrinsics, &pose)
                        .expect("positive noisy depth lifts cleanly");
                    (lifted, d)
                }
                // Noiseless: emit the true point exactly rather than paying
                // the float round trip through project/unproject.
                None => (true_loc, true_depth),
            };
            let base = current_base(&bases[obj], t as FrameIndex);
            let appearance = match appearance_noise {
                Some(noise) => {
                    let mut v: Vec<f64> =
                        base.iter().map(|b| b + noise.sample(&mut obs_rng)).collect();
                    normalize(&mut v);
                    v
                }
                None => base.to_vec(),
            };
            frame_obs.push(LiftedObservation {
                frame: t as FrameIndex,
                location,
                appearance,
                source_id: Some(obj as u32),
            });
            frame_prov.push(ObservationProvenance { pixel, depth });
        }
        observations.push(frame_obs);
        provenance.push(frame_prov);
    }

    let objects = (0..config.num_objects)
        .map(|obj| ObjectTruth {
            id: obj as u32,
            radius: radii[obj],
            locations: script.locations[obj].clone(),
            containerized: script.containerized[obj].clone(),
            carried: script.carried[obj].clone(),
            interaction_windows: windows[obj].clone(),
            base_appearances: bases[obj].clone(),
        })
        .collect();

    Ok(Scenario {
        config: config.clone(),
        intrinsics,
        cameras: script.cameras,
        objects,
        observations,
        provenance,
    })
}

fn substream(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn positive_sigma(sigma: f64) -> Option<Normal<f64>> {
    if sigma > 0.0 {
        Some(Normal::new(0.0, sigma).expect("validated sigma"))
    } else {
        None
    }
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 1e-12 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn random_unit(dim: usize, rng: &mut ChaCha12Rng) -> Vec<f64> {
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    loop {
        let mut v: Vec<f64> = (0..dim).map(|_| normal.sample(rng)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            for x in v.iter_mut() {
                *x /= norm;
            }
            return v;
        }
    }
}

/// Per-object appearance base segments, including drift events at the
/// pickups the script flagged.
fn build_appearance_bases(
    config: &ScenarioConfig,
    events: &[PickPlaceEvent],
    rng: &mut ChaCha12Rng,
) -> Vec<Vec<(FrameIndex, Vec<f64>)>> {
    let dim = config.appearance_dim;
    let n = config.num_objects;

    let initial: Vec<Vec<f64>> = if config.orthogonal_appearances {
        (0..n)
            .map(|o| {
                let mut v = vec![0.0; dim];
                v[o] = 1.0;
                v
            })
            .collect()
    } else if config.appearance_clusters > 0 {
        let prototypes: Vec<Vec<f64>> = (0..config.appearance_clusters)
            .map(|_| random_unit(dim, rng))
            .collect();
        (0..n)
            .map(|o| {
                let proto = &prototypes[o % prototypes.len()];
                let jitter = random_unit(dim, rng);
                let mut v: Vec<f64> = proto
                    .iter()
                    .zip(&jitter)
                    .map(|(p, j)| p + 0.25 * j)
                    .collect();
                normalize(&mut v);
                v
            })
            .collect()
    } else {
        (0..n).map(|_| random_unit(dim, rng)).collect()
    };

    let mut bases: Vec<Vec<(FrameIndex, Vec<f64>)>> =
        initial.into_iter().map(|b| vec![(0, b)]).collect();

    // Drift events in script order keeps the rng stream stable.
    for ev in events {
        if !ev.drift {
            continue;
        }
        let target = random_unit(dim, rng);
        let segments = &mut bases[ev.object];
        let current = &segments.last().expect("object has a base").1;
        let mut drifted: Vec<f64> = current
            .iter()
            .zip(&target)
            .map(|(c, t)| c + config.appearance_drift_weight * t)
            .collect();
        normalize(&mut drifted);
        segments.push((ev.pick_frame, drifted));
    }
    bases
}

fn current_base(segments: &[(FrameIndex, Vec<f64>)], frame: FrameIndex) -> &[f64] {
    let mut current = &segments[0].1;
    for (start, base) in segments {
        if *start <= frame {
            current = base;
        } else {
            break;
        }
    }
    current
}
