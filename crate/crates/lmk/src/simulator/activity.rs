//! The scripted kitchen agent: a camera that walks between stations,
//! picks objects up, carries them, and places them on surfaces or inside
//! containers. Produces per-frame camera poses, per-frame object truth,
//! and the pick/place event log.

use nalgebra::{Matrix3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha12Rng;

use crate::geometry::{CameraPose, Point3};

use super::{ScenarioConfig, SimError};

#[derive(Debug, Clone, Copy, PartialEq)]
enum StationKind {
    Surface,
    Container,
}

#[derive(Debug, Clone)]
struct Station {
    kind: StationKind,
    /// Where the camera looks while working here.
    focus: Point3,
    /// Where the camera stands while working here.
    viewpoint: Vector2<f64>,
    slot_positions: Vec<Point3>,
    slot_occupant: Vec<Option<usize>>,
}

impl Station {
    fn free_slot(&self) -> Option<usize> {
        self.slot_occupant.iter().position(|o| o.is_none())
    }

    fn stored_objects(&self) -> impl Iterator<Item = usize> + '_ {
        self.slot_occupant.iter().filter_map(|o| *o)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct PickPlaceEvent {
    pub object: usize,
    pub pick_frame: u32,
    /// None when the scenario ends with the object still in hand.
    pub place_frame: Option<u32>,
    /// Whether this pickup triggered an appearance drift event.
    pub drift: bool,
}

#[derive(Debug)]
pub struct ScriptOutput {
    pub cameras: Vec<CameraPose>,
    /// Per object, per frame.
    pub locations: Vec<Vec<Point3>>,
    pub containerized: Vec<Vec<bool>>,
    pub carried: Vec<Vec<bool>>,
    pub events: Vec<PickPlaceEvent>,
}

#[derive(Debug, Clone, Copy)]
struct ObjectState {
    location: Point3,
    containerized: bool,
    /// Camera-frame grip offset while carried.
    carry_offset: Option<Vector3<f64>>,
}

enum Phase {
    /// Overlooking the whole world from the vantage point.
    Survey { remaining: u32 },
    Walk { station: usize },
    Dwell { station: usize, plan: Vec<Action> },
}

#[derive(Debug, Clone, Copy)]
enum Action {
    Wait(u32),
    Place,
    /// Pick something stored here, but never what was placed this visit.
    Pick,
}

pub fn run_script(config: &ScenarioConfig, rng: &mut ChaCha12Rng) -> Result<ScriptOutput, SimError> {
    let mut stations = build_stations(config)?;
    let frames = config.duration_frames as usize;
    let n = config.num_objects;

    // Initial placement: objects start on surfaces (in the open), taking a
    // random sample of the surface slots. Containers fill up only through
    // activity.
    let mut slot_refs: Vec<(usize, usize)> = stations
        .iter()
        .enumerate()
        .filter(|(_, st)| st.kind == StationKind::Surface)
        .flat_map(|(s, st)| (0..st.slot_positions.len()).map(move |k| (s, k)))
        .collect();
    if slot_refs.len() < n {
        return Err(SimError::Infeasible(format!(
            "{n} objects exceed the surface capacity of {} slots",
            slot_refs.len()
        )));
    }
    shuffle(&mut slot_refs, rng);
    let mut objects = Vec::with_capacity(n);
    for (obj, &(s, k)) in slot_refs.iter().take(n).enumerate() {
        stations[s].slot_occupant[k] = Some(obj);
        objects.push(ObjectState {
            location: stations[s].slot_positions[k],
            containerized: false,
            carry_offset: None,
        });
    }

    let motion = &config.motion;
    let activity = &config.activity;
    let fps = config.frame_rate;
    let step_len = motion.walk_speed / fps;
    let max_turn = motion.turn_rate_deg.to_radians() / fps;

    let mid = Vector2::new(
        stations.iter().map(|s| s.viewpoint.x).sum::<f64>() / stations.len() as f64,
        stations.iter().map(|s| s.viewpoint.y).sum::<f64>() / stations.len() as f64,
    );
    let first = rng.gen_range(0..stations.len());
    let mut carrying: Option<usize> = None;

    // With a survey phase the agent starts at a vantage that overlooks
    // every slot; otherwise it starts mid-room heading for a station.
    let (mut pos, survey_focus, mut phase) = if activity.survey_frames > 0 {
        let (vantage, focus) = survey_vantage(config, &stations)?;
        (
            vantage,
            focus,
            Phase::Survey {
                remaining: activity.survey_frames,
            },
        )
    } else {
        (mid, Point3::new(mid.x, mid.y, 0.9), Phase::Walk { station: first })
    };
    // Face the opening focus exactly from frame 0.
    let eye0 = Vector3::new(pos.x, pos.y, motion.eye_height);
    let to0 = survey_focus.to_vector() - eye0;
    let mut yaw: f64 = to0.y.atan2(to0.x);
    let mut pitch: f64 = {
        let horiz = (to0.x * to0.x + to0.y * to0.y).sqrt();
        if horiz > 1e-9 {
            (-to0.z).atan2(horiz).clamp(-1.3, 1.3)
        } else {
            0.2
        }
    };

    let mut cameras = Vec::with_capacity(frames);
    let mut locations = vec![Vec::with_capacity(frames); n];
    let mut containerized = vec![Vec::with_capacity(frames); n];
    let mut carried_flags = vec![Vec::with_capacity(frames); n];
    let mut events: Vec<PickPlaceEvent> = Vec::new();
    let mut open_event: Vec<Option<usize>> = vec![None; n];
    let mut just_placed: Option<usize> = None;

    for frame in 0..frames {
        // Advance the agent.
        let focus;
        match &mut phase {
            Phase::Survey { remaining } => {
                focus = survey_focus;
                *remaining -= 1;
                if *remaining == 0 {
                    phase = Phase::Walk { station: first };
                }
            }
            Phase::Walk { station } => {
                let s = *station;
                let to_target = stations[s].viewpoint - pos;
                // Watch the floor ahead while walking; lift the gaze to the
                // station once it is close.
                focus = if to_target.norm() > 1.2 {
                    let ahead = pos + to_target.normalize() * 1.6;
                    Point3::new(ahead.x, ahead.y, 0.2)
                } else {
                    stations[s].focus
                };
                if to_target.norm() <= step_len {
                    pos = stations[s].viewpoint;
                    let plan = plan_dwell(s, &stations, carrying.is_some(), activity, rng);
                    phase = Phase::Dwell { station: s, plan };
                } else {
                    pos += to_target.normalize() * step_len;
                }
            }
            Phase::Dwell { station, plan } => {
                let s = *station;
                focus = stations[s].focus;
                let mut advance_phase = false;
                match plan.first_mut() {
                    None => advance_phase = true,
                    Some(Action::Wait(w)) => {
                        *w -= 1;
                        if *w == 0 {
                            plan.remove(0);
                        }
                        if plan.is_empty() {
                            advance_phase = true;
                        }
                    }
                    Some(Action::Place) => {
                        plan.remove(0);
                        if let (Some(obj), Some(slot)) = (carrying, stations[s].free_slot()) {
                            stations[s].slot_occupant[slot] = Some(obj);
                            objects[obj].location = stations[s].slot_positions[slot];
                            objects[obj].containerized = stations[s].kind == StationKind::Container;
                            objects[obj].carry_offset = None;
                            carrying = None;
                            just_placed = Some(obj);
                            if let Some(ev) = open_event[obj].take() {
                                events[ev].place_frame = Some(frame as u32);
                            }
                        }
                        if plan.is_empty() {
                            advance_phase = true;
                        }
                    }
                    Some(Action::Pick) => {
                        plan.remove(0);
                        if carrying.is_none() {
                            let stored: Vec<usize> = stations[s]
                                .stored_objects()
                                .filter(|&o| just_placed != Some(o))
                                .collect();
                            if !stored.is_empty() {
                                let obj = stored[rng.gen_range(0..stored.len())];
                                let slot = stations[s]
                                    .slot_occupant
                                    .iter()
                                    .position(|o| *o == Some(obj))
                                    .expect("stored object occupies a slot");
                                stations[s].slot_occupant[slot] = None;
                                objects[obj].containerized = false;
                                objects[obj].carry_offset = Some(Vector3::new(
                                    rng.gen_range(-0.12..0.12),
                                    rng.gen_range(0.05..0.16),
                                    rng.gen_range(0.35..0.50),
                                ));
                                carrying = Some(obj);
                                let drift = rng.gen::<f64>() < config.appearance_drift_prob;
                                open_event[obj] = Some(events.len());
                                events.push(PickPlaceEvent {
                                    object: obj,
                                    pick_frame: frame as u32,
                                    place_frame: None,
                                    drift,
                                });
                            }
                        }
                        if plan.is_empty() {
                            advance_phase = true;
                        }
                    }
                }
                if advance_phase {
                    just_placed = None;
                    let next = if stations.len() == 1 {
                        s
                    } else {
                        // Uniform over the other stations.
                        let pick = rng.gen_range(0..stations.len() - 1);
                        if pick >= s {
                            pick + 1
                        } else {
                            pick
                        }
                    };
                    phase = Phase::Walk { station: next };
                }
            }
        }

        // Turn the head toward the focus with a bounded angular rate.
        let eye = Vector3::new(pos.x, pos.y, motion.eye_height);
        let to_focus = focus.to_vector() - eye;
        let horiz = (to_focus.x * to_focus.x + to_focus.y * to_focus.y).sqrt();
        let desired_yaw = to_focus.y.atan2(to_focus.x);
        let desired_pitch = if horiz > 1e-9 {
            (-to_focus.z).atan2(horiz).clamp(-1.3, 1.3)
        } else {
            pitch
        };
        yaw = step_angle(yaw, desired_yaw, max_turn);
        pitch = step_angle(pitch, desired_pitch, max_turn);
        let pose = pose_from(pos, motion.eye_height, yaw, pitch);

        // Carried object rides in front of the camera.
        if let Some(obj) = carrying {
            let offset = objects[obj].carry_offset.expect("carried object has a grip");
            objects[obj].location =
                Point3::from_vector(pose.rotation * offset + pose.translation);
        }

        cameras.push(pose);
        for (obj, state) in objects.iter().enumerate() {
            locations[obj].push(state.location);
            containerized[obj].push(state.containerized);
            carried_flags[obj].push(state.carry_offset.is_some());
        }
    }

    Ok(ScriptOutput {
        cameras,
        locations,
        containerized,
        carried: carried_flags,
        events,
    })
}

fn plan_dwell(
    station: usize,
    stations: &[Station],
    carrying: bool,
    activity: &super::ActivityConfig,
    rng: &mut ChaCha12Rng,
) -> Vec<Action> {
    let wait = |rng: &mut ChaCha12Rng| {
        Action::Wait(rng.gen_range(activity.min_idle_frames..=activity.max_idle_frames).max(1))
    };
    let mut plan = vec![wait(rng)];
    if carrying && stations[station].free_slot().is_some() {
        plan.push(Action::Place);
        plan.push(wait(rng));
    }
    if rng.gen::<f64>() < activity.pick_prob {
        plan.push(Action::Pick);
        plan.push(wait(rng));
    }
    plan
}

fn build_stations(config: &ScenarioConfig) -> Result<Vec<Station>, SimError> {
    let world = &config.world;
    if world.surfaces.is_empty() && world.containers.is_empty() {
        return Err(SimError::InvalidConfig("world has no stations".into()));
    }
    let mut all_xy: Vec<Vector2<f64>> = Vec::new();
    for s in &world.surfaces {
        all_xy.push(Vector2::new(s.center_x, s.center_y));
    }
    for c in &world.containers {
        all_xy.push(Vector2::new(c.x, c.y));
    }
    let room_center = all_xy.iter().sum::<Vector2<f64>>() / all_xy.len() as f64;
    let standoff = config.motion.standoff;

    let viewpoint = |xy: Vector2<f64>| {
        let toward = room_center - xy;
        if toward.norm() < 1e-9 {
            xy + Vector2::new(standoff, 0.0)
        } else {
            xy + toward.normalize() * standoff
        }
    };

    let mut stations = Vec::new();
    for s in &world.surfaces {
        if !(s.half_x > 0.0 && s.half_y > 0.0) {
            return Err(SimError::InvalidConfig(format!(
                "surface '{}' has non-positive extent",
                s.name
            )));
        }
        // Slots spread along the major axis, alternating across the minor.
        let along_x = s.half_x >= s.half_y;
        let slot_positions = (0..s.slots)
            .map(|k| {
                let frac = (k as f64 + 0.5) / s.slots.max(1) as f64 * 2.0 - 1.0;
                let minor = if k % 2 == 0 { 0.45 } else { -0.45 };
                let (dx, dy) = if along_x {
                    (frac * (s.half_x - 0.05), minor * s.half_y)
                } else {
                    (minor * s.half_x, frac * (s.half_y - 0.05))
                };
                Point3::new(s.center_x + dx, s.center_y + dy, s.top_z)
            })
            .collect();
        stations.push(Station {
            kind: StationKind::Surface,
            focus: Point3::new(s.center_x, s.center_y, s.top_z),
            viewpoint: viewpoint(Vector2::new(s.center_x, s.center_y)),
            slot_positions,
            slot_occupant: vec![None; s.slots],
        });
    }
    for c in &world.containers {
        let slot_positions = (0..c.slots)
            .map(|k| Point3::new(c.x + 0.04 * k as f64, c.y, c.z))
            .collect();
        stations.push(Station {
            kind: StationKind::Container,
            focus: Point3::new(c.x, c.y, c.z),
            viewpoint: viewpoint(Vector2::new(c.x, c.y)),
            slot_positions,
            slot_occupant: vec![None; c.slots],
        });
    }
    Ok(stations)
}

/// A standing point and focus from which every surface slot projects
/// inside the image. Backing away shrinks the angular spread, so the
/// search always terminates.
fn survey_vantage(
    config: &ScenarioConfig,
    stations: &[Station],
) -> Result<(Vector2<f64>, Point3), SimError> {
    let intrinsics = config.camera_intrinsics()?;
    let slots: Vec<Point3> = stations
        .iter()
        .filter(|s| s.kind == StationKind::Surface)
        .flat_map(|s| s.slot_positions.iter().copied())
        .collect();
    if slots.is_empty() {
        return Err(SimError::InvalidConfig("world has no surface slots".into()));
    }
    let n = slots.len() as f64;
    let focus = Point3::new(
        slots.iter().map(|p| p.x).sum::<f64>() / n,
        slots.iter().map(|p| p.y).sum::<f64>() / n,
        slots.iter().map(|p| p.z).sum::<f64>() / n,
    );
    let dir = Vector2::new(-1.0, -1.0).normalize();
    let mut dist = 3.0;
    while dist < 150.0 {
        let pos = Vector2::new(focus.x, focus.y) + dir * dist;
        let eye = Vector3::new(pos.x, pos.y, config.motion.eye_height);
        let to = focus.to_vector() - eye;
        let horiz = (to.x * to.x + to.y * to.y).sqrt();
        let yaw = to.y.atan2(to.x);
        let pitch = (-to.z).atan2(horiz);
        let pose = pose_from(pos, config.motion.eye_height, yaw, pitch);
        if slots
            .iter()
            .all(|p| crate::geometry::in_fov(*p, &intrinsics, &pose))
        {
            return Ok((pos, focus));
        }
        dist += 1.0;
    }
    Err(SimError::InvalidConfig(
        "no vantage point overlooks every surface slot".into(),
    ))
}

fn pose_from(pos: Vector2<f64>, eye_height: f64, yaw: f64, pitch: f64) -> CameraPose {
    let forward = Vector3::new(
        yaw.cos() * pitch.cos(),
        yaw.sin() * pitch.cos(),
        -pitch.sin(),
    );
    let up = Vector3::new(0.0, 0.0, 1.0);
    let right = forward.cross(&up).normalize();
    let down = forward.cross(&right).normalize();
    let rotation = Matrix3::from_columns(&[right, down, forward]);
    CameraPose {
        rotation,
        translation: Vector3::new(pos.x, pos.y, eye_height),
    }
}

fn step_angle(current: f64, desired: f64, max_step: f64) -> f64 {
    let mut diff = desired - current;
    while diff > std::f64::consts::PI {
        diff -= 2.0 * std::f64::consts::PI;
    }
    while diff < -std::f64::consts::PI {
        diff += 2.0 * std::f64::consts::PI;
    }
    let stepped = current + diff.clamp(-max_step, max_step);
    // Keep yaw in (-pi, pi] so angles never wind up.
    let mut wrapped = stepped;
    while wrapped > std::f64::consts::PI {
        wrapped -= 2.0 * std::f64::consts::PI;
    }
    while wrapped < -std::f64::consts::PI {
        wrapped += 2.0 * std::f64::consts::PI;
    }
    wrapped
}

fn shuffle<T>(items: &mut [T], rng: &mut ChaCha12Rng) {
    for i in (1..items.len()).rev() {
        let j = rng.gen_range(0..=i);
        items.swap(i, j);
    }
}
