//! The lift-match-keep tracking core.
//!
//! A [`TrackSet`] maintains world-frame object tracks from streaming lifted
//! observations: tracks are initialized with temporal back-fill (an object
//! was somewhere before it was first seen), updated with a rolling
//! appearance mean, matched frame-to-frame by minimum-cost assignment over
//! a combined location/appearance cost, and never deleted: out-of-view
//! tracks stay fully matchable, which is how reappearing objects are
//! re-identified.

pub mod assignment;

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Point3;
use assignment::{solve, CostMatrix};

pub type TrackId = u32;
pub type FrameIndex = u32;

#[derive(Debug, Error, PartialEq)]
pub enum TrackError {
    #[error("frames must strictly increase: last stepped {last}, got {got}")]
    FrameOrder { last: FrameIndex, got: FrameIndex },
    #[error("observation carries frame {got}, expected {expected}")]
    FrameMismatch { expected: FrameIndex, got: FrameIndex },
    #[error("appearance dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("observation location must be finite")]
    NonFiniteLocation,
    #[error("unknown track id {0}")]
    UnknownTrack(TrackId),
    #[error("frame {frame} not yet stepped (current: {current:?})")]
    FrameNotStepped {
        frame: FrameIndex,
        current: Option<FrameIndex>,
    },
}

/// One partial observation already lifted to world coordinates.
///
/// `source_id` is an opaque evaluation label; matching never reads it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LiftedObservation {
    pub frame: FrameIndex,
    pub location: Point3,
    pub appearance: Vec<f64>,
    pub source_id: Option<u32>,
}

/// Which cost terms participate in matching.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CostMode {
    /// Location and appearance combined (the default).
    #[serde(rename = "v+l")]
    Combined,
    /// Appearance only.
    #[serde(rename = "v")]
    AppearanceOnly,
    /// Location only.
    #[serde(rename = "l")]
    LocationOnly,
}

impl CostMode {
    pub fn label(&self) -> &'static str {
        match self {
            CostMode::Combined => "v+l",
            CostMode::AppearanceOnly => "v",
            CostMode::LocationOnly => "l",
        }
    }
}

impl std::str::FromStr for CostMode {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "v+l" | "V+L" => Ok(CostMode::Combined),
            "v" | "V" => Ok(CostMode::AppearanceOnly),
            "l" | "L" => Ok(CostMode::LocationOnly),
            other => Err(format!("unknown cost mode '{other}' (use v+l, v, or l)")),
        }
    }
}

/// Matching hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MatcherConfig {
    /// Location weight in the exponential similarity.
    pub beta_l: f64,
    /// Appearance weight in the Cauchy similarity.
    pub beta_v: f64,
    /// Assignment-cost gate: matched pairs costing more are discarded.
    pub alpha: f64,
    /// Appearance window: number of recent assigned features averaged.
    pub gamma: usize,
    pub mode: CostMode,
}

impl Default for MatcherConfig {
    fn default() -> Self {
        Self {
            beta_l: 13.0,
            beta_v: 2.0,
            alpha: 10.0,
            gamma: 100,
            mode: CostMode::Combined,
        }
    }
}

impl MatcherConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.beta_l.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(format!("beta_l must be positive, got {}", self.beta_l));
        }
        if self.beta_v.is_nan() || self.beta_v < 0.0 {
            return Err(format!("beta_v must be nonnegative, got {}", self.beta_v));
        }
        if self.alpha.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater) {
            return Err(format!("alpha must be positive, got {}", self.alpha));
        }
        if self.gamma == 0 {
            return Err("gamma must be at least 1".into());
        }
        Ok(())
    }
}

/// One object's full timeline: a location for every frame from 0 to the
/// current frame, plus a rolling appearance representation.
#[derive(Debug, Clone)]
pub struct Track {
    id: TrackId,
    created_at: FrameIndex,
    locations: Vec<Point3>,
    appearance_window: VecDeque<Vec<f64>>,
    appearance_sum: Vec<f64>,
    appearance_mean: Vec<f64>,
    last_assigned_frame: Option<FrameIndex>,
    /// Set by the out-of-sight-lost baseline; never by the core tracker.
    terminated_at: Option<FrameIndex>,
}

impl Track {
    fn new(id: TrackId, obs: &LiftedObservation, frame: FrameIndex) -> Self {
        Self {
            id,
            created_at: frame,
            // Back-fill: the object was here before it was first seen.
            locations: vec![obs.location; frame as usize + 1],
            appearance_window: VecDeque::from([obs.appearance.clone()]),
            appearance_sum: obs.appearance.clone(),
            appearance_mean: obs.appearance.clone(),
            last_assigned_frame: Some(frame),
            terminated_at: None,
        }
    }

    pub fn id(&self) -> TrackId {
        self.id
    }

    pub fn created_at(&self) -> FrameIndex {
        self.created_at
    }

    pub fn last_assigned_frame(&self) -> Option<FrameIndex> {
        self.last_assigned_frame
    }

    pub fn terminated_at(&self) -> Option<FrameIndex> {
        self.terminated_at
    }

    pub fn is_alive(&self) -> bool {
        self.terminated_at.is_none()
    }

    pub(crate) fn terminate(&mut self, frame: FrameIndex) {
        if self.terminated_at.is_none() {
            self.terminated_at = Some(frame);
        }
    }

    /// Stored location at a defined frame.
    pub fn location_at(&self, frame: FrameIndex) -> Option<Point3> {
        self.locations.get(frame as usize).copied()
    }

    /// Location at the most recently stepped frame.
    pub fn last_location(&self) -> Point3 {
        *self.locations.last().expect("track always has a location")
    }

    /// Rolling mean of the most recent assigned appearance features.
    pub fn appearance_mean(&self) -> &[f64] {
        &self.appearance_mean
    }

    /// Appearance of the most recent assigned observation.
    pub fn last_appearance(&self) -> &[f64] {
        self.appearance_window
            .back()
            .expect("track always has an appearance")
    }

    pub fn appearance_window_len(&self) -> usize {
        self.appearance_window.len()
    }

    /// The retained appearance features, oldest first.
    pub fn appearance_window(&self) -> impl Iterator<Item = &[f64]> {
        self.appearance_window.iter().map(|v| v.as_slice())
    }

    pub fn locations(&self) -> &[Point3] {
        &self.locations
    }

    /// Exponential location similarity against the track's latest state.
    pub fn location_similarity(&self, obs: &LiftedObservation, beta_l: f64) -> f64 {
        (-self.last_location().distance(&obs.location)).exp() / beta_l
    }

    /// Cauchy appearance similarity against the track's latest state.
    pub fn appearance_similarity(&self, obs: &LiftedObservation, beta_v: f64) -> f64 {
        let d2 = euclidean_sq(&self.appearance_mean, &obs.appearance);
        1.0 / (1.0 + beta_v * d2)
    }

    /// Negative log-likelihood assignment cost. Computed in closed form so
    /// large distances cannot underflow the similarity to zero.
    pub fn assignment_cost(&self, obs: &LiftedObservation, config: &MatcherConfig) -> f64 {
        let loc = || self.last_location().distance(&obs.location) + config.beta_l.ln();
        let app = || {
            let d2 = euclidean_sq(&self.appearance_mean, &obs.appearance);
            (config.beta_v * d2).ln_1p()
        };
        match config.mode {
            CostMode::Combined => loc() + app(),
            CostMode::LocationOnly => loc(),
            CostMode::AppearanceOnly => app(),
        }
    }

    fn carry_forward_to(&mut self, frame: FrameIndex) {
        let last = self.last_location();
        while self.locations.len() <= frame as usize {
            self.locations.push(last);
        }
    }

    fn assign(&mut self, obs: &LiftedObservation, frame: FrameIndex, gamma: usize) {
        self.locations[frame as usize] = obs.location;
        self.appearance_window.push_back(obs.appearance.clone());
        for (s, x) in self.appearance_sum.iter_mut().zip(&obs.appearance) {
            *s += x;
        }
        if self.appearance_window.len() > gamma {
            let evicted = self.appearance_window.pop_front().expect("window nonempty");
            for (s, x) in self.appearance_sum.iter_mut().zip(&evicted) {
                *s -= x;
            }
        }
        let n = self.appearance_window.len() as f64;
        for (m, s) in self.appearance_mean.iter_mut().zip(&self.appearance_sum) {
            *m = s / n;
        }
        self.last_assigned_frame = Some(frame);
    }
}

fn euclidean_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum()
}

/// The per-frame matching outcome: accepted track/observation pairs and
/// the observations that initialized new tracks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAssignment {
    pub frame: FrameIndex,
    /// Accepted (track, observation-index) pairs, sorted by track id.
    pub pairs: Vec<AssignedPair>,
    /// Observations that started new tracks, sorted by observation index.
    pub new_tracks: Vec<NewTrack>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedPair {
    pub track: TrackId,
    pub observation: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct NewTrack {
    pub observation: usize,
    pub track: TrackId,
}

impl FrameAssignment {
    pub fn empty(frame: FrameIndex) -> Self {
        Self {
            frame,
            pairs: Vec::new(),
            new_tracks: Vec::new(),
        }
    }

    /// The track an observation ended up on, matched or newly created.
    pub fn track_of_observation(&self, observation: usize) -> Option<TrackId> {
        self.pairs
            .iter()
            .find(|p| p.observation == observation)
            .map(|p| p.track)
            .or_else(|| {
                self.new_tracks
                    .iter()
                    .find(|n| n.observation == observation)
                    .map(|n| n.track)
            })
    }

    pub fn is_track_assigned(&self, track: TrackId) -> bool {
        self.pairs.iter().any(|p| p.track == track)
            || self.new_tracks.iter().any(|n| n.track == track)
    }
}

/// A single tracking session: a set of tracks advanced one frame at a
/// time. Step calls must be externally serialized; distinct sessions are
/// independent.
#[derive(Debug, Clone)]
pub struct TrackSet {
    appearance_dim: usize,
    tracks: Vec<Track>,
    last_frame: Option<FrameIndex>,
}

impl TrackSet {
    pub fn new(appearance_dim: usize) -> Self {
        Self {
            appearance_dim,
            tracks: Vec::new(),
            last_frame: None,
        }
    }

    pub fn appearance_dim(&self) -> usize {
        self.appearance_dim
    }

    pub fn tracks(&self) -> &[Track] {
        &self.tracks
    }

    pub fn track(&self, id: TrackId) -> Result<&Track, TrackError> {
        self.tracks
            .get(id as usize)
            .ok_or(TrackError::UnknownTrack(id))
    }

    pub fn len(&self) -> usize {
        self.tracks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tracks.is_empty()
    }

    pub fn current_frame(&self) -> Option<FrameIndex> {
        self.last_frame
    }

    fn next_track_id(&self) -> TrackId {
        self.tracks.len() as TrackId
    }

    pub(crate) fn validate_step(
        &self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
    ) -> Result<(), TrackError> {
        if let Some(last) = self.last_frame {
            if frame <= last {
                return Err(TrackError::FrameOrder { last, got: frame });
            }
        }
        for obs in observations {
            if obs.frame != frame {
                return Err(TrackError::FrameMismatch {
                    expected: frame,
                    got: obs.frame,
                });
            }
            if obs.appearance.len() != self.appearance_dim {
                return Err(TrackError::DimensionMismatch {
                    expected: self.appearance_dim,
                    got: obs.appearance.len(),
                });
            }
            if !obs.location.is_finite() {
                return Err(TrackError::NonFiniteLocation);
            }
        }
        Ok(())
    }

    /// Match observations against every track (the keep rule: out-of-view
    /// tracks stay eligible). Does not mutate state.
    pub fn match_frame(
        &self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
        config: &MatcherConfig,
    ) -> Result<FrameAssignment, TrackError> {
        let eligible: Vec<TrackId> = self.tracks.iter().map(|t| t.id).collect();
        self.match_frame_among(frame, observations, config, &eligible)
    }

    /// Match observations against a restricted candidate track list
    /// (ascending ids). Used by the eligibility-limiting baselines.
    pub fn match_frame_among(
        &self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
        config: &MatcherConfig,
        eligible: &[TrackId],
    ) -> Result<FrameAssignment, TrackError> {
        self.validate_step(frame, observations)?;
        let mut assignment = FrameAssignment::empty(frame);
        let mut matched = vec![false; observations.len()];

        if !eligible.is_empty() && !observations.is_empty() {
            let mut costs = CostMatrix::zeros(eligible.len(), observations.len());
            for (row, &id) in eligible.iter().enumerate() {
                let track = self.track(id)?;
                for (col, obs) in observations.iter().enumerate() {
                    costs.set(row, col, track.assignment_cost(obs, config));
                }
            }
            let solved = solve(&costs);
            for (row, col) in solved.pairs {
                // Gate: discard optimal pairs that are still too costly.
                if costs.get(row, col) > config.alpha {
                    continue;
                }
                assignment.pairs.push(AssignedPair {
                    track: eligible[row],
                    observation: col,
                });
                matched[col] = true;
            }
            assignment.pairs.sort_unstable_by_key(|p| p.track);
        }

        let mut next_id = self.next_track_id();
        for (idx, was_matched) in matched.iter().enumerate() {
            if !was_matched {
                assignment.new_tracks.push(NewTrack {
                    observation: idx,
                    track: next_id,
                });
                next_id += 1;
            }
        }
        Ok(assignment)
    }

    /// One full online step: match, update, initialize.
    pub fn step(
        &mut self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
        config: &MatcherConfig,
    ) -> Result<FrameAssignment, TrackError> {
        let assignment = self.match_frame(frame, observations, config)?;
        self.apply_assignment(frame, observations, &assignment, config.gamma)?;
        Ok(assignment)
    }

    /// Apply a precomputed assignment (used by the baselines, whose
    /// matching rules differ but whose track updates are identical).
    pub fn apply_assignment(
        &mut self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
        assignment: &FrameAssignment,
        gamma: usize,
    ) -> Result<(), TrackError> {
        self.validate_step(frame, observations)?;
        for track in &mut self.tracks {
            track.carry_forward_to(frame);
        }
        for pair in &assignment.pairs {
            let obs = &observations[pair.observation];
            let track = self
                .tracks
                .get_mut(pair.track as usize)
                .ok_or(TrackError::UnknownTrack(pair.track))?;
            track.assign(obs, frame, gamma);
        }
        for new in &assignment.new_tracks {
            debug_assert_eq!(new.track, self.next_track_id());
            let obs = &observations[new.observation];
            self.tracks.push(Track::new(new.track, obs, frame));
        }
        self.last_frame = Some(frame);
        Ok(())
    }

    /// Mark a track as terminated from `frame` on. Terminated tracks stay
    /// readable for audit but are excluded from matching by callers.
    pub fn terminate_track(&mut self, id: TrackId, frame: FrameIndex) -> Result<(), TrackError> {
        self.tracks
            .get_mut(id as usize)
            .ok_or(TrackError::UnknownTrack(id))?
            .terminate(frame);
        Ok(())
    }

    /// Stored location of a track at a stepped frame, including the
    /// back-filled past before the track's first observation.
    pub fn query_location(&self, id: TrackId, frame: FrameIndex) -> Result<Point3, TrackError> {
        let track = self.track(id)?;
        match self.last_frame {
            Some(last) if frame <= last => Ok(track
                .location_at(frame)
                .expect("tracks are defined at every stepped frame")),
            current => Err(TrackError::FrameNotStepped { frame, current }),
        }
    }

    /// Convert a finished session into plain per-track timelines, padding
    /// every track out to `frames` with carry-forward.
    pub fn into_timelines(mut self, frames: FrameIndex) -> TrackTimelines {
        for track in &mut self.tracks {
            if frames > 0 {
                track.carry_forward_to(frames - 1);
            }
        }
        let tracks = self
            .tracks
            .into_iter()
            .map(|t| {
                let scoreable = (0..frames)
                    .map(|f| t.terminated_at.is_none_or(|dead| f <= dead))
                    .collect();
                TrackTimeline {
                    id: t.id,
                    created_at: t.created_at,
                    locations: t.locations,
                    scoreable,
                }
            })
            .collect();
        TrackTimelines {
            frames,
            appearance_dim: self.appearance_dim,
            tracks,
        }
    }
}

/// One finished track: a location per frame plus a per-frame flag telling
/// the evaluator whether the method stands behind that prediction (false
/// after an out-of-sight-lost termination, or while an
/// out-of-sight-out-of-mind track is frozen out of view).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackTimeline {
    pub id: TrackId,
    pub created_at: FrameIndex,
    pub locations: Vec<Point3>,
    pub scoreable: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackTimelines {
    pub frames: FrameIndex,
    pub appearance_dim: usize,
    pub tracks: Vec<TrackTimeline>,
}

impl TrackTimelines {
    pub fn track(&self, id: TrackId) -> Option<&TrackTimeline> {
        self.tracks.get(id as usize)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn obs(frame: FrameIndex, x: f64, appearance: Vec<f64>) -> LiftedObservation {
        LiftedObservation {
            frame,
            location: Point3::new(x, 0.0, 0.0),
            appearance,
            source_id: None,
        }
    }

    fn cfg() -> MatcherConfig {
        MatcherConfig::default()
    }

    fn single_track(x: f64, appearance: Vec<f64>) -> (TrackSet, MatcherConfig) {
        let mut set = TrackSet::new(appearance.len());
        set.step(0, &[obs(0, x, appearance)], &cfg()).unwrap();
        (set, cfg())
    }

    #[test]
    fn location_similarity_values() {
        let (set, _) = single_track(0.0, vec![1.0, 0.0]);
        let track = set.track(0).unwrap();
        let same = obs(1, 0.0, vec![1.0, 0.0]);
        assert_relative_eq!(track.location_similarity(&same, 13.0), 1.0 / 13.0, epsilon = 1e-12);
        let meter = obs(1, 1.0, vec![1.0, 0.0]);
        // Frozen from independent evaluation of exp(-1)/13.
        assert_relative_eq!(
            track.location_similarity(&meter, 13.0),
            0.028298418551649413,
            epsilon = 1e-12
        );
        let mut prev = f64::INFINITY;
        for d in [0.0, 0.3, 1.0, 2.5, 7.0] {
            let s = track.location_similarity(&obs(1, d, vec![1.0, 0.0]), 13.0);
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn appearance_similarity_values() {
        let (set, _) = single_track(0.0, vec![1.0, 0.0]);
        let track = set.track(0).unwrap();
        assert_eq!(track.appearance_similarity(&obs(1, 0.0, vec![1.0, 0.0]), 7.0), 1.0);
        // D = 1 between (1,0) and (0,0)... use unit offset along second axis.
        let unit_away = obs(1, 0.0, vec![1.0, 1.0]);
        assert_relative_eq!(track.appearance_similarity(&unit_away, 2.0), 1.0 / 3.0, epsilon = 1e-12);
        let mut prev = 2.0;
        for d in [0.0_f64, 0.5, 1.0, 2.0] {
            let s = track.appearance_similarity(&obs(1, 0.0, vec![1.0, d]), 2.0);
            assert!(s < prev);
            prev = s;
        }
    }

    #[test]
    fn assignment_cost_matches_log_similarities() {
        let (set, config) = single_track(0.0, vec![1.0, 0.0]);
        let track = set.track(0).unwrap();
        let zero = obs(1, 0.0, vec![1.0, 0.0]);
        assert_relative_eq!(track.assignment_cost(&zero, &config), 13.0_f64.ln(), epsilon = 1e-12);
        assert_relative_eq!(track.assignment_cost(&zero, &config), 2.5649493574615367, epsilon = 1e-10);

        let v_only = MatcherConfig { mode: CostMode::AppearanceOnly, ..config };
        assert_eq!(track.assignment_cost(&zero, &v_only), 0.0);

        // Closed form equals the naive -log(sigma) route at moderate range.
        let mixed = obs(1, 1.7, vec![0.4, 0.9]);
        let direct = -track.location_similarity(&mixed, config.beta_l).ln()
            - track.appearance_similarity(&mixed, config.beta_v).ln();
        assert_relative_eq!(track.assignment_cost(&mixed, &config), direct, epsilon = 1e-10);

        // Monotone in each distance separately.
        let mut prev = -1.0;
        for d in [0.0, 0.5, 1.0, 4.0] {
            let c = track.assignment_cost(&obs(1, d, vec![1.0, 0.0]), &config);
            assert!(c > prev);
            prev = c;
        }
        let mut prev = -1.0;
        for d in [0.0, 0.5, 1.0, 4.0] {
            let c = track.assignment_cost(&obs(1, 0.0, vec![1.0, d]), &config);
            assert!(c > prev);
            prev = c;
        }
    }

    #[test]
    fn match_frame_with_no_tracks_creates_all() {
        let set = TrackSet::new(2);
        let observations = vec![obs(0, 0.0, vec![1.0, 0.0]), obs(0, 1.0, vec![0.0, 1.0])];
        let asg = set.match_frame(0, &observations, &cfg()).unwrap();
        assert!(asg.pairs.is_empty());
        assert_eq!(
            asg.new_tracks,
            vec![
                NewTrack { observation: 0, track: 0 },
                NewTrack { observation: 1, track: 1 }
            ]
        );
    }

    #[test]
    fn match_frame_solves_crafted_cost_matrix() {
        // Location-only with beta_l = 1 makes cost = distance exactly, so
        // tracks at 0 and 3 with observations at -1 and 5 yield the matrix
        // [[1, 5], [4, 2]].
        let config = MatcherConfig { beta_l: 1.0, mode: CostMode::LocationOnly, ..cfg() };
        let mut set = TrackSet::new(1);
        set.step(
            0,
            &[obs(0, 0.0, vec![0.0]), obs(0, 3.0, vec![0.0])],
            &config,
        )
        .unwrap();
        let observations = vec![obs(1, -1.0, vec![0.0]), obs(1, 5.0, vec![0.0])];
        let asg = set.match_frame(1, &observations, &config).unwrap();
        assert_eq!(
            asg.pairs,
            vec![
                AssignedPair { track: 0, observation: 0 },
                AssignedPair { track: 1, observation: 1 }
            ]
        );
        assert!(asg.new_tracks.is_empty());
    }

    #[test]
    fn match_frame_gates_costly_pairs() {
        // Single track, single observation 11 meters away in
        // location-only mode with beta_l = 1: cost 11 > alpha 10.
        let config = MatcherConfig { beta_l: 1.0, mode: CostMode::LocationOnly, ..cfg() };
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 0.0, vec![0.0])], &config).unwrap();
        let observations = vec![obs(1, 11.0, vec![0.0])];
        let asg = set.match_frame(1, &observations, &config).unwrap();
        assert!(asg.pairs.is_empty());
        assert_eq!(asg.new_tracks, vec![NewTrack { observation: 0, track: 1 }]);

        // Exactly alpha is kept.
        let observations = vec![obs(1, 10.0, vec![0.0])];
        let asg = set.match_frame(1, &observations, &config).unwrap();
        assert_eq!(asg.pairs.len(), 1);
    }

    #[test]
    fn initialization_back_fills() {
        let mut set = TrackSet::new(1);
        for t in 0..5 {
            set.step(t, &[], &cfg()).unwrap();
        }
        set.step(5, &[obs(5, 7.0, vec![0.5])], &cfg()).unwrap();
        for t in [0, 3, 5] {
            assert_eq!(set.query_location(0, t).unwrap(), Point3::new(7.0, 0.0, 0.0));
        }
        let track = set.track(0).unwrap();
        assert_eq!(track.appearance_mean(), &[0.5]);
        assert_eq!(track.created_at(), 5);
    }

    #[test]
    fn two_initializations_same_frame_get_distinct_ids() {
        let mut set = TrackSet::new(1);
        let asg = set
            .step(0, &[obs(0, 0.0, vec![0.0]), obs(0, 9.0, vec![0.0])], &cfg())
            .unwrap();
        assert_eq!(asg.new_tracks.len(), 2);
        assert_ne!(asg.new_tracks[0].track, asg.new_tracks[1].track);
    }

    #[test]
    fn appearance_window_evicts_oldest() {
        let config = MatcherConfig { gamma: 2, ..cfg() };
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 0.0, vec![1.0])], &config).unwrap();
        set.step(1, &[obs(1, 0.0, vec![2.0])], &config).unwrap();
        set.step(2, &[obs(2, 0.0, vec![4.0])], &config).unwrap();
        // Mean of {2, 4}; the first feature was evicted.
        assert_eq!(set.track(0).unwrap().appearance_mean(), &[3.0]);
        assert_eq!(set.track(0).unwrap().appearance_window_len(), 2);
    }

    #[test]
    fn partial_window_averages_everything() {
        let mut set = TrackSet::new(1);
        for (t, a) in [1.0, 2.0, 6.0].iter().enumerate() {
            set.step(t as u32, &[obs(t as u32, 0.0, vec![*a])], &cfg()).unwrap();
        }
        assert_eq!(set.track(0).unwrap().appearance_mean(), &[3.0]);
    }

    #[test]
    fn unassigned_step_carries_forward() {
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 1.5, vec![0.7])], &cfg()).unwrap();
        set.step(1, &[], &cfg()).unwrap();
        assert_eq!(set.query_location(0, 1).unwrap(), Point3::new(1.5, 0.0, 0.0));
        assert_eq!(set.track(0).unwrap().appearance_mean(), &[0.7]);
        assert_eq!(set.track(0).unwrap().last_assigned_frame(), Some(0));
    }

    #[test]
    fn single_object_noiseless_stream_tracks_exactly() {
        let mut set = TrackSet::new(1);
        let xs = [0.0, 0.1, 0.25, 0.3, 0.9];
        for (t, &x) in xs.iter().enumerate() {
            let asg = set.step(t as u32, &[obs(t as u32, x, vec![1.0])], &cfg()).unwrap();
            if t == 0 {
                assert_eq!(asg.new_tracks.len(), 1);
            } else {
                assert_eq!(asg.pairs.len(), 1);
                assert_eq!(asg.pairs[0].track, 0);
            }
        }
        assert_eq!(set.len(), 1);
        for (t, &x) in xs.iter().enumerate() {
            assert_eq!(set.query_location(0, t as u32).unwrap().x, x);
        }
    }

    #[test]
    fn out_of_order_frames_rejected() {
        let mut set = TrackSet::new(1);
        set.step(3, &[], &cfg()).unwrap();
        assert_eq!(
            set.step(3, &[], &cfg()).unwrap_err(),
            TrackError::FrameOrder { last: 3, got: 3 }
        );
        assert!(matches!(set.step(1, &[], &cfg()), Err(TrackError::FrameOrder { .. })));
    }

    #[test]
    fn query_errors() {
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 0.0, vec![0.0])], &cfg()).unwrap();
        assert_eq!(set.query_location(5, 0).unwrap_err(), TrackError::UnknownTrack(5));
        assert!(matches!(
            set.query_location(0, 1),
            Err(TrackError::FrameNotStepped { .. })
        ));
    }

    #[test]
    fn query_between_assignments_uses_earlier() {
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 1.0, vec![0.0])], &cfg()).unwrap();
        set.step(1, &[], &cfg()).unwrap();
        set.step(2, &[], &cfg()).unwrap();
        set.step(3, &[obs(3, 2.0, vec![0.0])], &cfg()).unwrap();
        assert_eq!(set.query_location(0, 2).unwrap().x, 1.0);
        assert_eq!(set.query_location(0, 3).unwrap().x, 2.0);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut set = TrackSet::new(3);
        let err = set.step(0, &[obs(0, 0.0, vec![1.0])], &cfg()).unwrap_err();
        assert_eq!(err, TrackError::DimensionMismatch { expected: 3, got: 1 });
    }

    #[test]
    fn gaps_in_frame_numbers_are_filled() {
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 4.0, vec![0.0])], &cfg()).unwrap();
        set.step(7, &[], &cfg()).unwrap();
        for t in 0..=7 {
            assert_eq!(set.query_location(0, t).unwrap().x, 4.0);
        }
    }

    #[test]
    fn mode_consistency_location_only_ignores_appearance() {
        let config = MatcherConfig { mode: CostMode::LocationOnly, ..cfg() };
        let stream: Vec<Vec<LiftedObservation>> = vec![
            vec![obs(0, 0.0, vec![1.0, 0.0]), obs(0, 5.0, vec![0.0, 1.0])],
            vec![obs(1, 0.2, vec![0.3, 0.3]), obs(1, 5.1, vec![0.9, 0.1])],
            vec![obs(2, 0.4, vec![0.0, 1.0]), obs(2, 5.2, vec![1.0, 0.0])],
        ];
        let mut plain = TrackSet::new(2);
        let mut shuffled = TrackSet::new(2);
        for frame in &stream {
            let t = frame[0].frame;
            let mut swapped = frame.clone();
            for o in &mut swapped {
                o.appearance.reverse();
            }
            let a = plain.step(t, frame, &config).unwrap();
            let b = shuffled.step(t, &swapped, &config).unwrap();
            assert_eq!(a.pairs, b.pairs);
            assert_eq!(a.new_tracks, b.new_tracks);
        }
    }

    #[test]
    fn mode_consistency_appearance_only_ignores_location() {
        let config = MatcherConfig { mode: CostMode::AppearanceOnly, ..cfg() };
        let stream: Vec<Vec<LiftedObservation>> = vec![
            vec![obs(0, 0.0, vec![1.0, 0.0]), obs(0, 5.0, vec![0.0, 1.0])],
            vec![obs(1, 0.2, vec![0.9, 0.1]), obs(1, 5.1, vec![0.1, 0.9])],
        ];
        let mut plain = TrackSet::new(2);
        let mut scrambled = TrackSet::new(2);
        for frame in &stream {
            let t = frame[0].frame;
            let mut moved = frame.clone();
            for (k, o) in moved.iter_mut().enumerate() {
                o.location = Point3::new(-40.0 * k as f64, 9.0, 3.0);
            }
            let a = plain.step(t, frame, &config).unwrap();
            let b = scrambled.step(t, &moved, &config).unwrap();
            assert_eq!(a.pairs, b.pairs);
            assert_eq!(a.new_tracks, b.new_tracks);
        }
    }

    #[test]
    fn timelines_extend_to_requested_length() {
        let mut set = TrackSet::new(1);
        set.step(0, &[obs(0, 1.0, vec![0.0])], &cfg()).unwrap();
        set.step(1, &[], &cfg()).unwrap();
        let timelines = set.into_timelines(5);
        assert_eq!(timelines.tracks.len(), 1);
        assert_eq!(timelines.tracks[0].locations.len(), 5);
        assert!(timelines.tracks[0].scoreable.iter().all(|&s| s));
    }
}
