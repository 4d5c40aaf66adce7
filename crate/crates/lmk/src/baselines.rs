//! Comparison methods run on the exact same lifted-observation stream as
//! the core tracker, differing only in how observations are matched and
//! which tracks stay eligible:
//!
//! - random: every observation goes to a uniformly random unclaimed track
//!   or a new one.
//! - out-of-sight-lost (osl): tracks are terminated the moment they leave
//!   the view and can never be matched again.
//! - out-of-sight-out-of-mind (osom): only in-view tracks are matchable;
//!   out-of-view tracks freeze until their location re-enters the view.
//! - retrieval: greedy appearance-nearest matching against each track's
//!   most recent stored feature, in the spirit of query-by-appearance
//!   localisation, taking the most recent match.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::geometry::{in_fov, CameraFrame};
use crate::tracker::{
    AssignedPair, FrameAssignment, FrameIndex, LiftedObservation, MatcherConfig, NewTrack,
    TrackError, TrackId, TrackSet, TrackTimelines,
};

/// Random matching: each observation is independently assigned uniformly
/// among the still-unclaimed tracks plus the new-track option.
#[derive(Debug)]
pub struct RandomMatcher {
    set: TrackSet,
    rng: ChaCha12Rng,
    gamma: usize,
}

impl RandomMatcher {
    pub fn new(appearance_dim: usize, seed: u64, gamma: usize) -> Self {
        Self {
            set: TrackSet::new(appearance_dim),
            rng: ChaCha12Rng::seed_from_u64(seed),
            gamma,
        }
    }

    pub fn step(
        &mut self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
    ) -> Result<FrameAssignment, TrackError> {
        self.set.validate_step(frame, observations)?;
        let mut unclaimed: Vec<TrackId> = self.set.tracks().iter().map(|t| t.id()).collect();
        let mut assignment = FrameAssignment::empty(frame);
        let mut next_id = self.set.len() as TrackId;
        for idx in 0..observations.len() {
            let options = unclaimed.len() + 1;
            let pick = self.rng.gen_range(0..options);
            if pick < unclaimed.len() {
                assignment.pairs.push(AssignedPair {
                    track: unclaimed.remove(pick),
                    observation: idx,
                });
            } else {
                assignment.new_tracks.push(NewTrack {
                    observation: idx,
                    track: next_id,
                });
                next_id += 1;
            }
        }
        assignment.pairs.sort_unstable_by_key(|p| p.track);
        self.set.apply_assignment(frame, observations, &assignment, self.gamma)?;
        Ok(assignment)
    }

    pub fn finish(self, frames: FrameIndex) -> TrackTimelines {
        self.set.into_timelines(frames)
    }
}

/// Out of sight, lost: like the core tracker, but a track whose location
/// leaves the frustum is terminated, kept read-only for audit, and never
/// matched again.
#[derive(Debug)]
pub struct OslTracker {
    set: TrackSet,
    config: MatcherConfig,
}

impl OslTracker {
    pub fn new(appearance_dim: usize, config: MatcherConfig) -> Self {
        Self {
            set: TrackSet::new(appearance_dim),
            config,
        }
    }

    pub fn step(
        &mut self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
        camera: &CameraFrame,
    ) -> Result<FrameAssignment, TrackError> {
        let alive: Vec<TrackId> = self
            .set
            .tracks()
            .iter()
            .filter(|t| t.is_alive())
            .map(|t| t.id())
            .collect();
        let assignment = self.set.match_frame_among(frame, observations, &self.config, &alive)?;
        self.set
            .apply_assignment(frame, observations, &assignment, self.config.gamma)?;
        // Forget whatever is now outside the view.
        let dead: Vec<TrackId> = self
            .set
            .tracks()
            .iter()
            .filter(|t| t.is_alive() && !in_fov(t.last_location(), &camera.intrinsics, &camera.pose))
            .map(|t| t.id())
            .collect();
        for id in dead {
            self.set.terminate_track(id, frame)?;
        }
        Ok(assignment)
    }

    pub fn finish(self, frames: FrameIndex) -> TrackTimelines {
        let mut timelines = self.set.into_timelines(frames);
        // Forgetting is total: a replacement identity born after a loss
        // carries no pre-birth knowledge, so back-filled frames before
        // creation score nothing either.
        for track in &mut timelines.tracks {
            for t in 0..track.created_at as usize {
                track.scoreable[t] = false;
            }
        }
        timelines
    }
}

/// Out of sight, out of mind: only tracks currently in view may take
/// observations; out-of-view tracks freeze (carry forward, score nothing)
/// until their stored location re-enters the frustum.
#[derive(Debug)]
pub struct OsomTracker {
    set: TrackSet,
    config: MatcherConfig,
    cameras: Vec<CameraFrame>,
    /// Per track, per frame: was the stored location in view?
    in_view: Vec<Vec<bool>>,
}

impl OsomTracker {
    pub fn new(appearance_dim: usize, config: MatcherConfig) -> Self {
        Self {
            set: TrackSet::new(appearance_dim),
            config,
            cameras: Vec::new(),
            in_view: Vec::new(),
        }
    }

    pub fn step(
        &mut self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
        camera: &CameraFrame,
    ) -> Result<FrameAssignment, TrackError> {
        let eligible: Vec<TrackId> = self
            .set
            .tracks()
            .iter()
            .filter(|t| in_fov(t.last_location(), &camera.intrinsics, &camera.pose))
            .map(|t| t.id())
            .collect();
        let assignment =
            self.set
                .match_frame_among(frame, observations, &self.config, &eligible)?;
        self.set
            .apply_assignment(frame, observations, &assignment, self.config.gamma)?;

        // Record the in-view flag for every frame up to now; new tracks
        // are classified retroactively over their back-filled past.
        while self.cameras.len() <= frame as usize {
            self.cameras.push(*camera);
        }
        for track in self.set.tracks() {
            let idx = track.id() as usize;
            if self.in_view.len() <= idx {
                self.in_view.push(Vec::new());
            }
            let flags = &mut self.in_view[idx];
            for t in flags.len()..=frame as usize {
                let loc = track
                    .location_at(t as FrameIndex)
                    .expect("tracks are defined through the current frame");
                let cam = &self.cameras[t];
                flags.push(in_fov(loc, &cam.intrinsics, &cam.pose));
            }
        }
        Ok(assignment)
    }

    pub fn finish(self, frames: FrameIndex) -> TrackTimelines {
        let mut timelines = self.set.into_timelines(frames);
        for (track, flags) in timelines.tracks.iter_mut().zip(self.in_view) {
            let mut scoreable = flags;
            // Frames past the last step keep the final visibility status:
            // the camera timeline ended, so the freeze state persists.
            let last = scoreable.last().copied().unwrap_or(true);
            scoreable.resize(frames as usize, last);
            track.scoreable = scoreable;
        }
        timelines
    }
}

/// Appearance-retrieval matching: observations are compared to each
/// track's most recent stored feature and accepted greedily in increasing
/// distance order, one-to-one, gated like the core tracker's appearance
/// term. A matched track's location becomes the observation's location.
#[derive(Debug)]
pub struct RetrievalTracker {
    set: TrackSet,
    config: MatcherConfig,
}

impl RetrievalTracker {
    pub fn new(appearance_dim: usize, config: MatcherConfig) -> Self {
        Self {
            set: TrackSet::new(appearance_dim),
            config,
        }
    }

    pub fn step(
        &mut self,
        frame: FrameIndex,
        observations: &[LiftedObservation],
    ) -> Result<FrameAssignment, TrackError> {
        self.set.validate_step(frame, observations)?;
        let mut candidates: Vec<(f64, TrackId, usize)> = Vec::new();
        for track in self.set.tracks() {
            let recent = track.last_appearance();
            for (idx, obs) in observations.iter().enumerate() {
                let d = euclidean(recent, &obs.appearance);
                let gate = (self.config.beta_v * d * d).ln_1p();
                if gate <= self.config.alpha {
                    candidates.push((d, track.id(), idx));
                }
            }
        }
        // Ties resolve to the lowest track id, then observation index.
        candidates.sort_by(|a, b| {
            a.0.total_cmp(&b.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });

        let mut track_used = vec![false; self.set.len()];
        let mut obs_used = vec![false; observations.len()];
        let mut assignment = FrameAssignment::empty(frame);
        for (_, track, idx) in candidates {
            if track_used[track as usize] || obs_used[idx] {
                continue;
            }
            track_used[track as usize] = true;
            obs_used[idx] = true;
            assignment.pairs.push(AssignedPair {
                track,
                observation: idx,
            });
        }
        assignment.pairs.sort_unstable_by_key(|p| p.track);
        let mut next_id = self.set.len() as TrackId;
        for (idx, used) in obs_used.iter().enumerate() {
            if !used {
                assignment.new_tracks.push(NewTrack {
                    observation: idx,
                    track: next_id,
                });
                next_id += 1;
            }
        }
        self.set
            .apply_assignment(frame, observations, &assignment, self.config.gamma)?;
        Ok(assignment)
    }

    pub fn finish(self, frames: FrameIndex) -> TrackTimelines {
        self.set.into_timelines(frames)
    }
}

fn euclidean(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}
