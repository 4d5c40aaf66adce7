//! The benchmark protocol: keyframe selection, track-to-object anchoring,
//! the percentage-of-correct-locations metric over past and future offsets
//! at one or more radii, state-stratified breakdowns, and the pairwise
//! projection-error analysis for static objects.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cognition::{
    classify_motion, classify_reach, classify_visibility, CognitionConfig, Motion, Reach,
    Visibility,
};
use crate::geometry::{CameraFrame, CameraIntrinsics, CameraPose, Point3};
use crate::simulator::Scenario;
use crate::tracker::{FrameAssignment, FrameIndex, TrackId, TrackTimelines};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("evaluation needs source ids on observations")]
    MissingSourceId,
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid evaluation config: {0}")]
    InvalidConfig(String),
    #[error("timelines cover {have} frames but the scenario has {want}")]
    FrameCountMismatch { have: FrameIndex, want: FrameIndex },
}

/// How the correctness radius is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RadiusMode {
    /// One fixed radius per column of the report.
    Fixed,
    /// Each object is correct within its own physical radius.
    PerObject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Radii in meters evaluated side by side (ignored in per-object mode).
    pub radii: Vec<f64>,
    pub radius_mode: RadiusMode,
    /// Query offsets in seconds; empty means 5-second steps spanning the
    /// scenario.
    pub deltas_seconds: Vec<f64>,
    /// A keyframe needs at least this many concurrently interacted objects.
    pub keyframe_min_objects: usize,
    pub cognition: CognitionConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            radii: vec![0.30],
            radius_mode: RadiusMode::Fixed,
            deltas_seconds: Vec::new(),
            keyframe_min_objects: 3,
            cognition: CognitionConfig::default(),
        }
    }
}

impl EvalConfig {
    pub fn validate(&self) -> Result<(), EvalError> {
        if self.radius_mode == RadiusMode::Fixed {
            if self.radii.is_empty() {
                return Err(EvalError::InvalidConfig("no radii configured".into()));
            }
            if self.radii.iter().any(|r| r.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) {
                return Err(EvalError::InvalidConfig("radii must be positive".into()));
            }
            if self.radii.windows(2).any(|w| w[0] > w[1]) {
                return Err(EvalError::InvalidConfig("radii must be ascending".into()));
            }
        }
        if self.deltas_seconds.windows(2).any(|w| w[0] > w[1]) {
            return Err(EvalError::InvalidConfig("deltas must be ascending".into()));
        }
        if self.keyframe_min_objects == 0 {
            return Err(EvalError::InvalidConfig("keyframe_min_objects must be >= 1".into()));
        }
        self.cognition
            .validate()
            .map_err(EvalError::InvalidConfig)?;
        Ok(())
    }

    /// Resolve the delta list against a scenario length.
    pub fn resolved_deltas(&self, frames: FrameIndex, frame_rate: f64) -> Vec<f64> {
        if !self.deltas_seconds.is_empty() {
            return self.deltas_seconds.clone();
        }
        let span = frames as f64 / frame_rate;
        let mut out = Vec::new();
        let mut d = 5.0;
        while d < span {
            out.push(d);
            d += 5.0;
        }
        if out.is_empty() {
            out.push(span.max(1.0) / 2.0);
        }
        out
    }
}

/// Everything the metric needs to know about ground truth, independent of
/// where it came from (simulator truth or a source-labelled log).
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub frames: FrameIndex,
    pub frame_rate: f64,
    pub intrinsics: CameraIntrinsics,
    pub cameras: Vec<CameraPose>,
    pub objects: Vec<ObjectView>,
    /// Per frame: sorted object ids that emitted an observation.
    pub emitted: Vec<Vec<u32>>,
}

#[derive(Debug, Clone)]
pub struct ObjectView {
    pub id: u32,
    pub radius: f64,
    pub locations: Vec<Point3>,
}

impl EvalContext {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let mut emitted: Vec<Vec<u32>> = Vec::with_capacity(scenario.observations.len());
        for frame in &scenario.observations {
            let mut ids: Vec<u32> = frame.iter().filter_map(|o| o.source_id).collect();
            ids.sort_unstable();
            emitted.push(ids);
        }
        Self {
            frames: scenario.duration(),
            frame_rate: scenario.config.frame_rate,
            intrinsics: scenario.intrinsics,
            cameras: scenario.cameras.clone(),
            objects: scenario
                .objects
                .iter()
                .map(|o| ObjectView {
                    id: o.id,
                    radius: o.radius,
                    locations: o.locations.clone(),
                })
                .collect(),
            emitted,
        }
    }

    /// Ground truth from a source-labelled log: each object's reference
    /// trajectory is the carry-forward (and initial back-fill) of its own
    /// lifted observations, the same convention real pipelines use when no
    /// independent truth exists.
    pub fn from_stream(stream: &crate::runner::ObservationStream) -> Result<Self, EvalError> {
        let frames = stream.frames as usize;
        let mut per_source: BTreeMap<u32, Vec<(usize, Point3)>> = BTreeMap::new();
        let mut any_source = false;
        for (t, frame) in stream.by_frame.iter().enumerate() {
            for obs in frame {
                if let Some(id) = obs.source_id {
                    any_source = true;
                    per_source.entry(id).or_default().push((t, obs.location));
                }
            }
        }
        if !any_source {
            return Err(EvalError::MissingSourceId);
        }
        let mut objects = Vec::with_capacity(per_source.len());
        for (id, samples) in &per_source {
            let mut locations = Vec::with_capacity(frames);
            let mut next = 0usize;
            let mut current = samples[0].1;
            for t in 0..frames {
                while next < samples.len() && samples[next].0 <= t {
                    current = samples[next].1;
                    next += 1;
                }
                locations.push(current);
            }
            objects.push(ObjectView {
                id: *id,
                radius: 0.10,
                locations,
            });
        }
        let mut emitted: Vec<Vec<u32>> = Vec::with_capacity(frames);
        for frame in &stream.by_frame {
            let mut ids: Vec<u32> = frame.iter().filter_map(|o| o.source_id).collect();
            ids.sort_unstable();
            emitted.push(ids);
        }
        Ok(Self {
            frames: stream.frames,
            frame_rate: stream.frame_rate,
            intrinsics: stream.intrinsics,
            cameras: stream.cameras.clone(),
            objects,
            emitted,
        })
    }

    /// Dense index of a source id.
    fn object_index(&self, source: u32) -> Option<usize> {
        self.objects.binary_search_by_key(&source, |o| o.id).ok()
    }

    fn camera(&self, frame: FrameIndex) -> CameraFrame {
        CameraFrame {
            intrinsics: self.intrinsics,
            pose: self.cameras[frame as usize],
        }
    }

    fn emitted_at(&self, object: u32, frame: FrameIndex) -> bool {
        self.emitted[frame as usize].binary_search(&object).is_ok()
    }
}

/// Frames with enough concurrently interacted objects to anchor an
/// evaluation.
pub fn select_keyframes(scenario: &Scenario, min_objects: usize) -> Vec<FrameIndex> {
    (0..scenario.duration())
        .filter(|&t| scenario.interacting_count(t) >= min_objects)
        .collect()
}

/// Map each ground-truth object to the track that was assigned its
/// observation at the keyframe. Observations that were gated out (they
/// initialized new tracks instead) do not anchor; neither do unobserved
/// objects.
pub fn anchor_tracks(
    assignment: &FrameAssignment,
    frame_sources: &[Option<u32>],
) -> Result<Vec<(u32, TrackId)>, EvalError> {
    let mut map: BTreeMap<u32, TrackId> = BTreeMap::new();
    for pair in &assignment.pairs {
        let source = frame_sources
            .get(pair.observation)
            .copied()
            .flatten()
            .ok_or(EvalError::MissingSourceId)?;
        // Duplicate sources in one frame: keep the first.
        map.entry(source).or_insert(pair.track);
    }
    Ok(map.into_iter().collect())
}

/// One query outcome at a specific keyframe, offset and direction.
#[derive(Debug, Clone, Copy)]
struct QueryOutcome {
    /// Dense index into `EvalContext::objects`.
    object: usize,
    /// Source id, for reporting distinct-object counts.
    source: u32,
    keyframe: FrameIndex,
    query: FrameIndex,
    /// Distance to truth, or None when the method disowned the prediction
    /// (terminated or frozen out of view): always incorrect.
    error: Option<f64>,
}

/// Location accuracy at one keyframe/offset/radius over anchored objects.
/// Returns None when no anchored query lands in bounds.
pub fn pcl(
    context: &EvalContext,
    timelines: &TrackTimelines,
    anchors: &[(u32, TrackId)],
    keyframe: FrameIndex,
    delta_frames: FrameIndex,
    radius: f64,
) -> Option<f64> {
    let outcomes = query_outcomes(context, timelines, anchors, keyframe, delta_frames);
    if outcomes.is_empty() {
        return None;
    }
    let correct = outcomes
        .iter()
        .filter(|o| o.error.is_some_and(|e| e <= radius))
        .count();
    Some(correct as f64 / outcomes.len() as f64)
}

fn query_outcomes(
    context: &EvalContext,
    timelines: &TrackTimelines,
    anchors: &[(u32, TrackId)],
    keyframe: FrameIndex,
    delta_frames: FrameIndex,
) -> Vec<QueryOutcome> {
    let mut queries: Vec<FrameIndex> = Vec::with_capacity(2);
    if delta_frames > 0 {
        if keyframe >= delta_frames {
            queries.push(keyframe - delta_frames);
        }
        if keyframe + delta_frames < context.frames {
            queries.push(keyframe + delta_frames);
        }
    } else {
        queries.push(keyframe);
    }
    let mut outcomes = Vec::with_capacity(queries.len() * anchors.len());
    for &(source, track) in anchors {
        let Some(object) = context.object_index(source) else {
            continue;
        };
        let timeline = timelines.track(track).expect("anchored track exists");
        for &q in &queries {
            let error = if timeline.scoreable[q as usize] {
                let predicted = timeline.locations[q as usize];
                let truth = context.objects[object].locations[q as usize];
                Some(predicted.distance(&truth))
            } else {
                None
            };
            outcomes.push(QueryOutcome {
                object,
                source,
                keyframe,
                query: q,
                error,
            });
        }
    }
    outcomes
}

/// Per-keyframe accuracy plus pooled counts for one (delta, radius) cell.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PclCell {
    pub keyframe_values: Vec<f64>,
    pub pooled_correct: u64,
    pub pooled_total: u64,
}

impl PclCell {
    pub fn mean(&self) -> f64 {
        if self.keyframe_values.is_empty() {
            return f64::NAN;
        }
        self.keyframe_values.iter().sum::<f64>() / self.keyframe_values.len() as f64
    }

    pub fn std(&self) -> f64 {
        let n = self.keyframe_values.len();
        if n < 2 {
            return 0.0;
        }
        let mean = self.mean();
        let var = self
            .keyframe_values
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            / (n - 1) as f64;
        var.sqrt()
    }

    pub fn pooled(&self) -> f64 {
        if self.pooled_total == 0 {
            return f64::NAN;
        }
        self.pooled_correct as f64 / self.pooled_total as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StateCell {
    pub total: u64,
    pub correct: u64,
}

impl StateCell {
    pub fn fraction(&self) -> f64 {
        if self.total == 0 {
            return f64::NAN;
        }
        self.correct as f64 / self.total as f64
    }
}

/// The full evaluation of one method run on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEval {
    pub deltas_seconds: Vec<f64>,
    pub radii: Vec<f64>,
    pub radius_mode: RadiusMode,
    /// Indexed `[delta][radius]`.
    pub cells: Vec<Vec<PclCell>>,
    /// Indexed `[delta][visibility x reach]` at the primary radius.
    pub state_cells: Vec<BTreeMap<String, StateCell>>,
    /// Indexed `[delta][motion]` at the primary radius.
    pub motion_cells: Vec<BTreeMap<String, StateCell>>,
    pub n_keyframes: usize,
    pub n_objects: usize,
}

impl ScenarioEval {
    pub fn cell(&self, delta_idx: usize, radius_idx: usize) -> &PclCell {
        &self.cells[delta_idx][radius_idx]
    }
}

/// Evaluate one finished run against scenario ground truth.
pub fn evaluate(
    scenario: &Scenario,
    timelines: &TrackTimelines,
    assignments: &[FrameAssignment],
    config: &EvalConfig,
) -> Result<ScenarioEval, EvalError> {
    let context = EvalContext::from_scenario(scenario);
    let keyframes = select_keyframes(scenario, config.keyframe_min_objects);
    let sources: Vec<Vec<Option<u32>>> = scenario
        .observations
        .iter()
        .map(|frame| frame.iter().map(|o| o.source_id).collect())
        .collect();
    evaluate_with_context(&context, &keyframes, &sources, timelines, assignments, config)
}

/// Evaluate against a source-labelled observation stream: truth is the
/// per-source carry-forward trajectory, keyframes come from interaction
/// flags, and per-object radii are unavailable.
pub fn evaluate_stream(
    stream: &crate::runner::ObservationStream,
    timelines: &TrackTimelines,
    assignments: &[FrameAssignment],
    config: &EvalConfig,
) -> Result<ScenarioEval, EvalError> {
    if config.radius_mode == RadiusMode::PerObject {
        return Err(EvalError::InvalidConfig(
            "per-object radii need simulator ground truth".into(),
        ));
    }
    let context = EvalContext::from_stream(stream)?;
    let keyframes = select_keyframes_from_stream(stream, config.keyframe_min_objects);
    let sources: Vec<Vec<Option<u32>>> = stream
        .by_frame
        .iter()
        .map(|frame| frame.iter().map(|o| o.source_id).collect())
        .collect();
    evaluate_with_context(&context, &keyframes, &sources, timelines, assignments, config)
}

/// Keyframes of a raw stream: frames where at least `min_objects` distinct
/// sources carry the interaction flag.
pub fn select_keyframes_from_stream(
    stream: &crate::runner::ObservationStream,
    min_objects: usize,
) -> Vec<FrameIndex> {
    let mut out = Vec::new();
    for (t, frame) in stream.by_frame.iter().enumerate() {
        let mut interacting: Vec<u32> = frame
            .iter()
            .zip(&stream.interaction[t])
            .filter(|(_, &flag)| flag)
            .filter_map(|(o, _)| o.source_id)
            .collect();
        interacting.sort_unstable();
        interacting.dedup();
        if interacting.len() >= min_objects {
            out.push(t as FrameIndex);
        }
    }
    out
}

fn evaluate_with_context(
    context: &EvalContext,
    keyframes: &[FrameIndex],
    sources: &[Vec<Option<u32>>],
    timelines: &TrackTimelines,
    assignments: &[FrameAssignment],
    config: &EvalConfig,
) -> Result<ScenarioEval, EvalError> {
    config.validate()?;
    if timelines.frames != context.frames {
        return Err(EvalError::FrameCountMismatch {
            have: timelines.frames,
            want: context.frames,
        });
    }
    if assignments.len() != context.frames as usize {
        return Err(EvalError::FrameCountMismatch {
            have: assignments.len() as FrameIndex,
            want: context.frames,
        });
    }
    let deltas = config.resolved_deltas(context.frames, context.frame_rate);
    let radii = match config.radius_mode {
        RadiusMode::Fixed => config.radii.clone(),
        RadiusMode::PerObject => vec![f64::NAN],
    };

    // Anchor once per keyframe.
    let mut anchored: Vec<(FrameIndex, Vec<(u32, TrackId)>)> = Vec::new();
    for &f in keyframes {
        let assignment = &assignments[f as usize];
        let anchors = anchor_tracks(assignment, &sources[f as usize])?;
        if !anchors.is_empty() {
            anchored.push((f, anchors));
        }
    }

    let mut distinct_objects: std::collections::BTreeSet<u32> = Default::default();
    for (_, anchors) in &anchored {
        distinct_objects.extend(anchors.iter().map(|(o, _)| *o));
    }

    let mut cells = vec![vec![PclCell::default(); radii.len()]; deltas.len()];
    let mut state_cells: Vec<BTreeMap<String, StateCell>> =
        vec![BTreeMap::new(); deltas.len()];
    let mut motion_cells: Vec<BTreeMap<String, StateCell>> =
        vec![BTreeMap::new(); deltas.len()];

    for (d_idx, &delta_s) in deltas.iter().enumerate() {
        let delta_frames = (delta_s * context.frame_rate).round() as FrameIndex;
        for (f, anchors) in &anchored {
            let outcomes = query_outcomes(context, timelines, anchors, *f, delta_frames);
            if outcomes.is_empty() {
                continue;
            }
            for (r_idx, &radius) in radii.iter().enumerate() {
                let mut correct = 0u64;
                for o in &outcomes {
                    let limit = match config.radius_mode {
                        RadiusMode::Fixed => radius,
                        RadiusMode::PerObject => context.objects[o.object].radius,
                    };
                    if o.error.is_some_and(|e| e <= limit) {
                        correct += 1;
                    }
                }
                let cell = &mut cells[d_idx][r_idx];
                cell.keyframe_values
                    .push(correct as f64 / outcomes.len() as f64);
                cell.pooled_correct += correct;
                cell.pooled_total += outcomes.len() as u64;
            }

            // State stratification at the primary radius, classified on
            // ground truth at the query time.
            let primary = radii[0];
            for o in &outcomes {
                let limit = match config.radius_mode {
                    RadiusMode::Fixed => primary,
                    RadiusMode::PerObject => context.objects[o.object].radius,
                };
                let ok = o.error.is_some_and(|e| e <= limit);
                let truth_loc = context.objects[o.object].locations[o.query as usize];
                let camera = context.camera(o.query);
                let visibility = classify_visibility(
                    context.emitted_at(o.source, o.query),
                    truth_loc,
                    &camera,
                );
                let reach = classify_reach(truth_loc, &camera, &config.cognition);
                let key = state_key(visibility, reach);
                let slot = state_cells[d_idx].entry(key).or_default();
                slot.total += 1;
                slot.correct += ok as u64;

                let anchor_loc =
                    context.objects[o.object].locations[o.keyframe as usize];
                let motion = classify_motion(anchor_loc, truth_loc, &config.cognition);
                let slot = motion_cells[d_idx]
                    .entry(motion.label().to_string())
                    .or_default();
                slot.total += 1;
                slot.correct += ok as u64;
            }
        }
    }

    Ok(ScenarioEval {
        deltas_seconds: deltas,
        radii,
        radius_mode: config.radius_mode,
        cells,
        state_cells,
        motion_cells,
        n_keyframes: anchored.len(),
        n_objects: distinct_objects.len(),
    })
}

pub fn state_key(visibility: Visibility, reach: Reach) -> String {
    format!("{}/{}", visibility.label(), reach.label())
}

pub fn all_state_keys() -> Vec<String> {
    let mut keys = Vec::new();
    for v in Visibility::ALL {
        for r in Reach::ALL {
            keys.push(state_key(v, r));
        }
    }
    keys
}

pub fn all_motion_keys() -> Vec<String> {
    Motion::ALL.iter().map(|m| m.label().to_string()).collect()
}

/// Merge per-scenario evaluations of the same method and config into one
/// pooled evaluation (keyframes pooled across scenarios).
pub fn merge_evals(evals: &[ScenarioEval]) -> Option<ScenarioEval> {
    let first = evals.first()?;
    let mut merged = first.clone();
    for e in &evals[1..] {
        assert_eq!(e.deltas_seconds, merged.deltas_seconds);
        assert_eq!(e.radii.len(), merged.radii.len());
        for (d, row) in e.cells.iter().enumerate() {
            for (r, cell) in row.iter().enumerate() {
                let m = &mut merged.cells[d][r];
                m.keyframe_values.extend_from_slice(&cell.keyframe_values);
                m.pooled_correct += cell.pooled_correct;
                m.pooled_total += cell.pooled_total;
            }
        }
        for (d, states) in e.state_cells.iter().enumerate() {
            for (k, cell) in states {
                let m = merged.state_cells[d].entry(k.clone()).or_default();
                m.total += cell.total;
                m.correct += cell.correct;
            }
        }
        for (d, states) in e.motion_cells.iter().enumerate() {
            for (k, cell) in states {
                let m = merged.motion_cells[d].entry(k.clone()).or_default();
                m.total += cell.total;
                m.correct += cell.correct;
            }
        }
        merged.n_keyframes += e.n_keyframes;
        merged.n_objects = merged.n_objects.max(e.n_objects);
    }
    Some(merged)
}

/// Pairwise lift-error statistics over observations of static objects.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionErrorStats {
    pub n_pairs: usize,
    pub mean_m: f64,
    pub median_m: f64,
    /// Fractions of pairwise errors under fixed thresholds, ascending.
    pub frac_under: Vec<(f64, f64)>,
    /// Fixed 1 cm histogram bins up to 20 cm plus an overflow bin.
    pub histogram: Vec<(f64, f64, u64)>,
}

/// Sample pairwise distances between lifted observations of the same
/// object drawn from intervals where its true location is constant.
pub fn projection_error_stats(
    scenario: &Scenario,
    max_pairs: usize,
    sample_seed: u64,
) -> Result<ProjectionErrorStats, EvalError> {
    // Group observations by (object, static interval).
    let mut interval_of: Vec<Vec<u32>> = Vec::with_capacity(scenario.objects.len());
    for truth in &scenario.objects {
        let mut ids = Vec::with_capacity(truth.locations.len());
        let mut current = 0u32;
        for t in 0..truth.locations.len() {
            if t > 0
                && (truth.carried[t] != truth.carried[t - 1]
                    || truth.locations[t] != truth.locations[t - 1])
            {
                current += 1;
            }
            ids.push(current);
        }
        interval_of.push(ids);
    }

    let mut groups: BTreeMap<(u32, u32), Vec<Point3>> = BTreeMap::new();
    for frame in &scenario.observations {
        for obs in frame {
            let id = obs.source_id.ok_or(EvalError::MissingSourceId)?;
            let t = obs.frame as usize;
            let truth = &scenario.objects[id as usize];
            if truth.carried[t] {
                continue;
            }
            groups
                .entry((id, interval_of[id as usize][t]))
                .or_default()
                .push(obs.location);
        }
    }
    let groups: Vec<Vec<Point3>> = groups.into_values().filter(|g| g.len() >= 2).collect();
    stats_from_groups(groups, max_pairs, sample_seed)
}

/// Stream analog of [`projection_error_stats`]: static intervals are the
/// runs of a source's observations between interaction-flagged ones
/// (flagged observations are in-hand and excluded).
pub fn projection_error_stats_from_stream(
    stream: &crate::runner::ObservationStream,
    max_pairs: usize,
    sample_seed: u64,
) -> Result<ProjectionErrorStats, EvalError> {
    let mut interval: BTreeMap<u32, u32> = BTreeMap::new();
    let mut groups: BTreeMap<(u32, u32), Vec<Point3>> = BTreeMap::new();
    let mut any_source = false;
    for (t, frame) in stream.by_frame.iter().enumerate() {
        for (obs, &flag) in frame.iter().zip(&stream.interaction[t]) {
            let Some(id) = obs.source_id else { continue };
            any_source = true;
            if flag {
                // In-hand: close the current static interval.
                *interval.entry(id).or_insert(0) += 1;
                continue;
            }
            let k = *interval.entry(id).or_insert(0);
            groups.entry((id, k)).or_default().push(obs.location);
        }
    }
    if !any_source {
        return Err(EvalError::MissingSourceId);
    }
    let groups: Vec<Vec<Point3>> = groups.into_values().filter(|g| g.len() >= 2).collect();
    stats_from_groups(groups, max_pairs, sample_seed)
}

fn stats_from_groups(
    groups: Vec<Vec<Point3>>,
    max_pairs: usize,
    sample_seed: u64,
) -> Result<ProjectionErrorStats, EvalError> {
    if groups.is_empty() {
        return Err(EvalError::InsufficientData(
            "no static object was observed twice at one location".into(),
        ));
    }

    let total_pairs: usize = groups.iter().map(|g| g.len() * (g.len() - 1) / 2).sum();
    let mut errors: Vec<f64> = Vec::new();
    if total_pairs <= max_pairs {
        for g in &groups {
            for i in 0..g.len() {
                for j in i + 1..g.len() {
                    errors.push(g[i].distance(&g[j]));
                }
            }
        }
    } else {
        // Seeded sampling with replacement, weighted by group pair counts.
        let weights: Vec<usize> = groups.iter().map(|g| g.len() * (g.len() - 1) / 2).collect();
        let cumulative: Vec<usize> = weights
            .iter()
            .scan(0usize, |acc, w| {
                *acc += w;
                Some(*acc)
            })
            .collect();
        let mut rng = ChaCha12Rng::seed_from_u64(sample_seed);
        for _ in 0..max_pairs {
            let target = rng.gen_range(0..*cumulative.last().expect("nonempty"));
            let gi = cumulative.partition_point(|&c| c <= target);
            let g = &groups[gi];
            let i = rng.gen_range(0..g.len());
            let mut j = rng.gen_range(0..g.len() - 1);
            if j >= i {
                j += 1;
            }
            errors.push(g[i].distance(&g[j]));
        }
    }

    let n = errors.len();
    let mean = errors.iter().sum::<f64>() / n as f64;
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let median = if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    };
    let frac_under = [0.06, 0.10]
        .iter()
        .map(|&thr| {
            let c = sorted.partition_point(|&e| e < thr);
            (thr, c as f64 / n as f64)
        })
        .collect();
    let mut histogram = Vec::new();
    for k in 0..20 {
        let lo = k as f64 * 0.01;
        let hi = lo + 0.01;
        let count = errors.iter().filter(|&&e| e >= lo && e < hi).count() as u64;
        histogram.push((lo, hi, count));
    }
    let overflow = errors.iter().filter(|&&e| e >= 0.20).count() as u64;
    histogram.push((0.20, f64::INFINITY, overflow));

    Ok(ProjectionErrorStats {
        n_pairs: n,
        mean_m: mean,
        median_m: median,
        frac_under,
        histogram,
    })
}
