//! Protocol-level checks of the evaluation module on hand-built scenarios
//! whose expected numbers were traced by hand before implementation.

use lmk::eval::{
    anchor_tracks, evaluate, pcl, projection_error_stats, select_keyframes, EvalConfig,
    EvalContext, RadiusMode,
};
use lmk::geometry::{project, CameraIntrinsics, CameraPose, Point3};
use lmk::runner::{run_session, Method, MethodSpec, ObservationStream};
use lmk::simulator::{generate, ObjectTruth, ObservationProvenance, Scenario, ScenarioConfig};
use lmk::tracker::{LiftedObservation, MatcherConfig};

fn fixture_intrinsics() -> CameraIntrinsics {
    CameraIntrinsics::new(300.0, 300.0, 320.0, 180.0, 640.0, 360.0).unwrap()
}

fn one_hot(dim: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; dim];
    v[k] = 1.0;
    v
}

/// Four objects watched by a static camera for 16 frames at 1 fps.
/// Objects 0..2 sit still and are observed every frame. Object 3 spends
/// frames 0..=10 inside a container at (0, 0.4, 3), is moved 0.4 m to
/// (0, 0, 3) at frame 11, and is observed from frame 12 on, so its track
/// back-fills the new location over the past.
fn hand_fixture() -> Scenario {
    let frames = 16u32;
    let intrinsics = fixture_intrinsics();
    let statics = [
        Point3::new(0.0, 0.0, 2.0),
        Point3::new(1.0, 0.0, 2.0),
        Point3::new(-1.0, 0.0, 2.0),
    ];
    let d_before = Point3::new(0.0, 0.4, 3.0);
    let d_after = Point3::new(0.0, 0.0, 3.0);

    let mut objects = Vec::new();
    for (k, &loc) in statics.iter().enumerate() {
        objects.push(ObjectTruth {
            id: k as u32,
            radius: 0.05,
            locations: vec![loc; frames as usize],
            containerized: vec![false; frames as usize],
            carried: vec![false; frames as usize],
            interaction_windows: vec![(15, 15)],
            base_appearances: vec![(0, one_hot(4, k))],
        });
    }
    let mut d_locations = vec![d_before; 11];
    d_locations.extend(vec![d_after; 5]);
    let mut d_containerized = vec![true; 11];
    d_containerized.extend(vec![false; 5]);
    let mut d_carried = vec![false; 11];
    d_carried[10] = false;
    d_carried.extend(vec![false; 5]);
    objects.push(ObjectTruth {
        id: 3,
        radius: 0.50,
        locations: d_locations,
        containerized: d_containerized,
        carried: d_carried,
        interaction_windows: vec![(15, 15)],
        base_appearances: vec![(0, one_hot(4, 3))],
    });

    let pose = CameraPose::identity();
    let mut observations = Vec::new();
    let mut provenance = Vec::new();
    for t in 0..frames {
        let mut frame = Vec::new();
        let mut prov = Vec::new();
        for (k, truth) in objects.iter().enumerate() {
            let emitted = if k < 3 { true } else { t >= 12 };
            if !emitted {
                continue;
            }
            let loc = truth.locations[t as usize];
            frame.push(LiftedObservation {
                frame: t,
                location: loc,
                appearance: one_hot(4, k),
                source_id: Some(k as u32),
            });
            let (pixel, depth) = project(loc, &intrinsics, &pose);
            prov.push(ObservationProvenance { pixel, depth });
        }
        observations.push(frame);
        provenance.push(prov);
    }

    Scenario {
        config: ScenarioConfig {
            duration_frames: frames,
            frame_rate: 1.0,
            num_objects: 4,
            appearance_dim: 4,
            ..ScenarioConfig::default()
        },
        intrinsics,
        cameras: vec![pose; frames as usize],
        objects,
        observations,
        provenance,
    }
}

fn run_lmk(scenario: &Scenario) -> lmk::runner::SessionOutput {
    let stream = ObservationStream::from_scenario(scenario);
    run_session(
        MethodSpec::of(Method::Lmk),
        &stream,
        &MatcherConfig::default(),
        0,
    )
    .unwrap()
}

#[test]
fn hand_traced_backfill_case_scores_three_quarters() {
    let scenario = hand_fixture();
    let out = run_lmk(&scenario);

    let keyframes = select_keyframes(&scenario, 3);
    assert_eq!(keyframes, vec![15]);

    let sources: Vec<Option<u32>> = scenario.observations[15]
        .iter()
        .map(|o| o.source_id)
        .collect();
    let anchors = anchor_tracks(&out.assignments[15], &sources).unwrap();
    assert_eq!(anchors.len(), 4, "all four objects matched at the keyframe");

    let context = EvalContext::from_scenario(&scenario);
    // Past query at frame 5: object 3's track back-fills the post-move
    // location, 0.4 m from where the object really was.
    let v = pcl(&context, &out.timelines, &anchors, 15, 10, 0.30).unwrap();
    assert_eq!(v, 0.75);
    // At the keyframe itself everything is exact.
    let v = pcl(&context, &out.timelines, &anchors, 15, 0, 0.30).unwrap();
    assert_eq!(v, 1.0);
    // A radius above the move distance forgives the back-fill.
    let v = pcl(&context, &out.timelines, &anchors, 15, 10, 0.45).unwrap();
    assert_eq!(v, 1.0);
}

#[test]
fn full_evaluation_matches_hand_trace() {
    let scenario = hand_fixture();
    let out = run_lmk(&scenario);
    let config = EvalConfig {
        radii: vec![0.30],
        deltas_seconds: vec![10.0],
        keyframe_min_objects: 3,
        ..EvalConfig::default()
    };
    let eval = evaluate(&scenario, &out.timelines, &out.assignments, &config).unwrap();
    assert_eq!(eval.n_keyframes, 1);
    assert_eq!(eval.n_objects, 4);
    let cell = eval.cell(0, 0);
    assert_eq!(cell.keyframe_values, vec![0.75]);
    assert_eq!(cell.pooled_correct, 3);
    assert_eq!(cell.pooled_total, 4);

    // State stratification at the query time (frame 5): the three static
    // objects were observed (in sight), object 3 sat unobserved inside
    // the frustum (occluded); everything is beyond reach of the origin
    // camera. The 0.4 m move splits motion cells 3 stationary / 1 moved.
    let states = &eval.state_cells[0];
    assert_eq!(states["in_sight/out_of_reach"].total, 3);
    assert_eq!(states["in_sight/out_of_reach"].correct, 3);
    assert_eq!(states["occluded/out_of_reach"].total, 1);
    assert_eq!(states["occluded/out_of_reach"].correct, 0);
    let total: u64 = states.values().map(|c| c.total).sum();
    assert_eq!(total, 4, "state cells partition the evaluated queries");

    let motion = &eval.motion_cells[0];
    assert_eq!(motion["stationary"].total, 3);
    assert_eq!(motion["stationary"].correct, 3);
    assert_eq!(motion["moved"].total, 1);
    assert_eq!(motion["moved"].correct, 0);
}

#[test]
fn per_object_radius_mode_uses_each_objects_size() {
    let scenario = hand_fixture();
    let out = run_lmk(&scenario);
    let config = EvalConfig {
        radius_mode: RadiusMode::PerObject,
        deltas_seconds: vec![10.0],
        keyframe_min_objects: 3,
        ..EvalConfig::default()
    };
    let eval = evaluate(&scenario, &out.timelines, &out.assignments, &config).unwrap();
    // Object 3 has radius 0.5 > its 0.4 back-fill error, so per-object
    // mode forgives what the fixed 0.3 radius rejected.
    assert_eq!(eval.cell(0, 0).keyframe_values, vec![1.0]);
}

#[test]
fn keyframes_need_enough_concurrent_interactions() {
    let mut scenario = hand_fixture();
    for o in &mut scenario.objects {
        o.interaction_windows = vec![];
    }
    assert!(select_keyframes(&scenario, 3).is_empty());

    // Exactly one frame where three windows overlap.
    scenario.objects[0].interaction_windows = vec![(4, 8)];
    scenario.objects[1].interaction_windows = vec![(6, 10)];
    scenario.objects[2].interaction_windows = vec![(8, 12)];
    assert_eq!(select_keyframes(&scenario, 3), vec![8]);
}

#[test]
fn gated_out_observations_do_not_anchor() {
    use lmk::tracker::{CostMode, TrackSet};
    // One distant track; the observation's cost exceeds the gate, so it
    // initializes a new track and its object is excluded.
    let config = MatcherConfig {
        beta_l: 1.0,
        mode: CostMode::LocationOnly,
        ..MatcherConfig::default()
    };
    let mut set = TrackSet::new(1);
    let obs0 = LiftedObservation {
        frame: 0,
        location: Point3::new(0.0, 0.0, 0.0),
        appearance: vec![0.0],
        source_id: Some(7),
    };
    set.step(0, &[obs0], &config).unwrap();
    let obs1 = LiftedObservation {
        frame: 1,
        location: Point3::new(20.0, 0.0, 0.0),
        appearance: vec![0.0],
        source_id: Some(7),
    };
    let asg = set.step(1, std::slice::from_ref(&obs1), &config).unwrap();
    assert!(asg.pairs.is_empty());
    let anchors = anchor_tracks(&asg, &[obs1.source_id]).unwrap();
    assert!(anchors.is_empty());
}

#[test]
fn anchoring_is_a_bijection_in_clean_scenes() {
    let scenario = hand_fixture();
    let out = run_lmk(&scenario);
    let sources: Vec<Option<u32>> = scenario.observations[15]
        .iter()
        .map(|o| o.source_id)
        .collect();
    let anchors = anchor_tracks(&out.assignments[15], &sources).unwrap();
    let mut objects: Vec<u32> = anchors.iter().map(|(o, _)| *o).collect();
    let mut tracks: Vec<_> = anchors.iter().map(|(_, t)| *t).collect();
    objects.dedup();
    tracks.sort_unstable();
    tracks.dedup();
    assert_eq!(objects.len(), 4);
    assert_eq!(tracks.len(), 4);
}

#[test]
fn partially_matched_frames_anchor_partially() {
    let scenario = hand_fixture();
    let out = run_lmk(&scenario);
    // Frame 12 is the debut of object 3: it initialized a track there, so
    // only the three matched objects anchor.
    let sources: Vec<Option<u32>> = scenario.observations[12]
        .iter()
        .map(|o| o.source_id)
        .collect();
    let anchors = anchor_tracks(&out.assignments[12], &sources).unwrap();
    assert_eq!(anchors.len(), 3);
    assert!(anchors.iter().all(|(o, _)| *o != 3));
}

#[test]
fn projection_error_stats_on_noiseless_scenario_is_zero() {
    let cfg = ScenarioConfig {
        seed: 31,
        duration_frames: 400,
        num_objects: 6,
        appearance_dim: 8,
        depth_noise_sigma: 0.0,
        appearance_noise_sigma: 0.0,
        observation_dropout: 0.0,
        ..ScenarioConfig::default()
    };
    let scenario = generate(&cfg).unwrap();
    let stats = projection_error_stats(&scenario, 5000, 0).unwrap();
    assert!(stats.n_pairs > 100);
    assert_eq!(stats.mean_m, 0.0);
    assert_eq!(stats.median_m, 0.0);
}

#[test]
fn projection_error_stats_single_pair() {
    let mut scenario = hand_fixture();
    // Strip down to exactly two observations of object 0 at one spot,
    // 0.05 m apart (hand-planted lift error).
    for (t, frame) in scenario.observations.iter_mut().enumerate() {
        frame.retain(|o| o.source_id == Some(0) && (t == 2 || t == 3));
    }
    scenario.observations[3][0].location = Point3::new(0.05, 0.0, 2.0);
    let stats = projection_error_stats(&scenario, 100, 0).unwrap();
    assert_eq!(stats.n_pairs, 1);
    assert!((stats.mean_m - 0.05).abs() < 1e-12);
    assert_eq!(stats.frac_under, vec![(0.06, 1.0), (0.10, 1.0)]);
}

#[test]
fn projection_error_stats_insufficient_data() {
    let mut scenario = hand_fixture();
    for frame in &mut scenario.observations {
        frame.clear();
    }
    assert!(projection_error_stats(&scenario, 100, 0).is_err());
}

#[test]
fn default_scenarios_have_keyframes_on_every_seed() {
    for seed in 0..10 {
        let scenario = generate(&ScenarioConfig {
            seed,
            ..ScenarioConfig::default()
        })
        .unwrap();
        let keyframes = select_keyframes(&scenario, 3);
        assert!(!keyframes.is_empty(), "seed {seed} produced no keyframes");
    }
}

#[test]
fn pcl_is_invariant_under_a_common_rigid_transform() {
    use nalgebra::{Matrix3, Vector3};
    let scenario = hand_fixture();
    let out = run_lmk(&scenario);
    let config = EvalConfig {
        radii: vec![0.30],
        deltas_seconds: vec![5.0, 10.0],
        keyframe_min_objects: 3,
        ..EvalConfig::default()
    };
    let base = evaluate(&scenario, &out.timelines, &out.assignments, &config).unwrap();

    // Rotate 70 degrees about z and shift everything by (3, -2, 1).
    let angle: f64 = 70.0_f64.to_radians();
    let (s, c) = angle.sin_cos();
    let g_rot = Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0);
    let g_t = Vector3::new(3.0, -2.0, 1.0);
    let move_point = |p: Point3| Point3::from_vector(g_rot * p.to_vector() + g_t);

    let mut moved = scenario.clone();
    for pose in &mut moved.cameras {
        *pose = pose.transformed_by(&g_rot, &g_t);
    }
    for truth in &mut moved.objects {
        for loc in &mut truth.locations {
            *loc = move_point(*loc);
        }
    }
    for frame in &mut moved.observations {
        for obs in frame {
            obs.location = move_point(obs.location);
        }
    }
    let out2 = run_lmk(&moved);
    let transformed = evaluate(&moved, &out2.timelines, &out2.assignments, &config).unwrap();

    for d in 0..base.deltas_seconds.len() {
        let a = base.cell(d, 0);
        let b = transformed.cell(d, 0);
        assert_eq!(a.pooled_total, b.pooled_total);
        assert_eq!(a.pooled_correct, b.pooled_correct);
        assert_eq!(a.keyframe_values.len(), b.keyframe_values.len());
        for (x, y) in a.keyframe_values.iter().zip(&b.keyframe_values) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}

#[test]
fn all_static_in_view_scenes_populate_one_state_cell() {
    let mut scenario = hand_fixture();
    // Drop the moving fourth object entirely: everything left is static
    // and observed every frame.
    scenario.objects.truncate(3);
    scenario.config.num_objects = 3;
    for (frame, prov) in scenario.observations.iter_mut().zip(&mut scenario.provenance) {
        prov.truncate(frame.len().min(3));
        frame.retain(|o| o.source_id != Some(3));
    }
    for o in &mut scenario.objects {
        o.interaction_windows = vec![(15, 15)];
    }
    let out = run_lmk(&scenario);
    let config = EvalConfig {
        radii: vec![0.30],
        deltas_seconds: vec![10.0],
        keyframe_min_objects: 3,
        ..EvalConfig::default()
    };
    let eval = evaluate(&scenario, &out.timelines, &out.assignments, &config).unwrap();
    let states = &eval.state_cells[0];
    let populated: Vec<_> = states.iter().filter(|(_, c)| c.total > 0).collect();
    assert_eq!(populated.len(), 1);
    assert_eq!(populated[0].0, "in_sight/out_of_reach");
    let motion = &eval.motion_cells[0];
    assert_eq!(motion.get("moved").map_or(0, |c| c.total), 0);
    assert!(motion["stationary"].total > 0);
}
