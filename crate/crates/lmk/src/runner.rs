//! End-to-end orchestration: drive a tracking method over an observation
//! stream frame by frame, evaluate the result, and fan whole suites and
//! hyperparameter sweeps out across scenarios.
//!
//! With the `parallel` feature (default) suites run data-parallel over
//! scenarios via rayon; results are collected in input order, so output
//! is bit-identical to the sequential fallback.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::baselines::{OslTracker, OsomTracker, RandomMatcher, RetrievalTracker};
use crate::cognition::CognitionConfig;
use crate::eval::{evaluate, EvalConfig, EvalError, ScenarioEval};
use crate::geometry::{CameraFrame, CameraIntrinsics, CameraPose};
use crate::simulator::{generate, Scenario, ScenarioConfig, SimError};
use crate::tracker::{
    CostMode, FrameAssignment, FrameIndex, LiftedObservation, MatcherConfig, TrackError,
    TrackSet, TrackTimelines,
};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Track(#[from] TrackError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("invalid run spec: {0}")]
    InvalidSpec(String),
}

/// The tracking methods selectable from the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lmk,
    Random,
    Osl,
    Osom,
    Retrieval,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Lmk => "lmk",
            Method::Random => "random",
            Method::Osl => "osl",
            Method::Osom => "osom",
            Method::Retrieval => "retrieval",
        }
    }

    pub const ALL: [Method; 5] = [
        Method::Lmk,
        Method::Random,
        Method::Osl,
        Method::Osom,
        Method::Retrieval,
    ];
}

impl std::str::FromStr for Method {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "lmk" => Ok(Method::Lmk),
            "random" => Ok(Method::Random),
            "osl" => Ok(Method::Osl),
            "osom" => Ok(Method::Osom),
            "retrieval" => Ok(Method::Retrieval),
            other => Err(format!(
                "unknown method '{other}' (use lmk, random, osl, osom, or retrieval)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MethodSpec {
    pub method: Method,
    pub mode: CostMode,
}

impl MethodSpec {
    pub fn lmk(mode: CostMode) -> Self {
        Self {
            method: Method::Lmk,
            mode,
        }
    }

    pub fn of(method: Method) -> Self {
        Self {
            method,
            mode: CostMode::Combined,
        }
    }

    pub fn label(&self) -> String {
        match self.method {
            Method::Lmk => format!("{}({})", self.method.label(), self.mode.label()),
            _ => self.method.label().to_string(),
        }
    }
}

/// The unified per-run input: observations grouped by frame plus the
/// camera timeline the visibility-dependent methods need.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationStream {
    pub frames: FrameIndex,
    pub frame_rate: f64,
    pub appearance_dim: usize,
    pub intrinsics: CameraIntrinsics,
    pub cameras: Vec<CameraPose>,
    pub by_frame: Vec<Vec<LiftedObservation>>,
    /// Parallel per-observation interaction flags (false when unknown).
    pub interaction: Vec<Vec<bool>>,
}

impl ObservationStream {
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let interaction = scenario
            .observations
            .iter()
            .enumerate()
            .map(|(t, frame)| {
                frame
                    .iter()
                    .map(|o| {
                        o.source_id.is_some_and(|id| {
                            scenario.objects[id as usize].interacting_at(t as FrameIndex)
                        })
                    })
                    .collect()
            })
            .collect();
        Self {
            frames: scenario.duration(),
            frame_rate: scenario.config.frame_rate,
            appearance_dim: scenario.config.appearance_dim,
            intrinsics: scenario.intrinsics,
            cameras: scenario.cameras.clone(),
            by_frame: scenario.observations.clone(),
            interaction,
        }
    }

    pub fn camera_frame(&self, frame: FrameIndex) -> CameraFrame {
        CameraFrame {
            intrinsics: self.intrinsics,
            pose: self.cameras[frame as usize],
        }
    }
}

/// A finished tracking run: per-track timelines plus the per-frame
/// assignment record the evaluator anchors on.
#[derive(Debug, Clone, PartialEq)]
pub struct SessionOutput {
    pub spec: MethodSpec,
    pub timelines: TrackTimelines,
    pub assignments: Vec<FrameAssignment>,
}

/// Drive one method over a stream, stepping every frame (including empty
/// ones) in order.
pub fn run_session(
    spec: MethodSpec,
    stream: &ObservationStream,
    matcher: &MatcherConfig,
    seed: u64,
) -> Result<SessionOutput, RunError> {
    matcher
        .validate()
        .map_err(RunError::InvalidSpec)?;
    let matcher = MatcherConfig {
        mode: spec.mode,
        ..*matcher
    };
    let dim = stream.appearance_dim;
    let frames = stream.frames;
    let mut assignments = Vec::with_capacity(frames as usize);

    #[allow(clippy::large_enum_variant)]
    enum Session {
        Lmk(TrackSet, MatcherConfig),
        Random(RandomMatcher),
        Osl(OslTracker),
        Osom(OsomTracker),
        Retrieval(RetrievalTracker),
    }

    let mut session = match spec.method {
        Method::Lmk => Session::Lmk(TrackSet::new(dim), matcher),
        Method::Random => Session::Random(RandomMatcher::new(dim, seed, matcher.gamma)),
        Method::Osl => Session::Osl(OslTracker::new(dim, matcher)),
        Method::Osom => Session::Osom(OsomTracker::new(dim, matcher)),
        Method::Retrieval => Session::Retrieval(RetrievalTracker::new(dim, matcher)),
    };

    for t in 0..frames {
        let obs = &stream.by_frame[t as usize];
        let camera = stream.camera_frame(t);
        let assignment = match &mut session {
            Session::Lmk(set, cfg) => set.step(t, obs, cfg)?,
            Session::Random(s) => s.step(t, obs)?,
            Session::Osl(s) => s.step(t, obs, &camera)?,
            Session::Osom(s) => s.step(t, obs, &camera)?,
            Session::Retrieval(s) => s.step(t, obs)?,
        };
        assignments.push(assignment);
    }

    let timelines = match session {
        Session::Lmk(set, _) => set.into_timelines(frames),
        Session::Random(s) => s.finish(frames),
        Session::Osl(s) => s.finish(frames),
        Session::Osom(s) => s.finish(frames),
        Session::Retrieval(s) => s.finish(frames),
    };
    Ok(SessionOutput {
        spec,
        timelines,
        assignments,
    })
}

/// A multi-seed, multi-method experiment over one base scenario config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub scenario: ScenarioConfig,
    pub seeds: Vec<u64>,
    pub methods: Vec<MethodSpec>,
    pub matcher: MatcherConfig,
    pub eval: EvalConfig,
}

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub methods: Vec<MethodSpec>,
    pub seeds: Vec<u64>,
    /// Indexed `[method][seed]`.
    pub evals: Vec<Vec<ScenarioEval>>,
    pub deltas_seconds: Vec<f64>,
    pub radii: Vec<f64>,
}

impl SuiteResult {
    /// Pool keyframes across seeds for one method.
    pub fn merged(&self, method_idx: usize) -> ScenarioEval {
        crate::eval::merge_evals(&self.evals[method_idx]).expect("suite has seeds")
    }

    /// Mean per-keyframe accuracy pooled over all seeds.
    pub fn mean_pcl(&self, method_idx: usize, delta_idx: usize, radius_idx: usize) -> f64 {
        self.merged(method_idx).cell(delta_idx, radius_idx).mean()
    }
}

/// Evaluate one seed of a suite: generate, run every method, evaluate.
fn run_suite_seed(spec: &SuiteSpec, seed: u64) -> Result<Vec<ScenarioEval>, RunError> {
    let scenario = generate(&ScenarioConfig {
        seed,
        ..spec.scenario.clone()
    })?;
    let stream = ObservationStream::from_scenario(&scenario);
    let mut evals = Vec::with_capacity(spec.methods.len());
    for method in &spec.methods {
        let out = run_session(*method, &stream, &spec.matcher, seed)?;
        evals.push(evaluate(
            &scenario,
            &out.timelines,
            &out.assignments,
            &spec.eval,
        )?);
    }
    Ok(evals)
}

fn assemble_suite(
    spec: &SuiteSpec,
    per_seed: Vec<Vec<ScenarioEval>>,
) -> Result<SuiteResult, RunError> {
    let first = per_seed
        .first()
        .and_then(|methods| methods.first())
        .ok_or_else(|| RunError::InvalidSpec("suite needs at least one seed and method".into()))?;
    let deltas = first.deltas_seconds.clone();
    let radii = first.radii.clone();
    // Transpose to [method][seed].
    let mut evals: Vec<Vec<ScenarioEval>> = vec![Vec::new(); spec.methods.len()];
    for seed_evals in per_seed {
        for (m, e) in seed_evals.into_iter().enumerate() {
            evals[m].push(e);
        }
    }
    Ok(SuiteResult {
        methods: spec.methods.clone(),
        seeds: spec.seeds.clone(),
        evals,
        deltas_seconds: deltas,
        radii,
    })
}

/// Run a suite sequentially. Always available; the parallel variant must
/// produce bit-identical results.
pub fn run_suite_sequential(spec: &SuiteSpec) -> Result<SuiteResult, RunError> {
    let per_seed = spec
        .seeds
        .iter()
        .map(|&seed| run_suite_seed(spec, seed))
        .collect::<Result<Vec<_>, _>>()?;
    assemble_suite(spec, per_seed)
}

/// Run a suite data-parallel over seeds (rayon). Falls back to the
/// sequential path when the `parallel` feature is disabled.
pub fn run_suite(spec: &SuiteSpec) -> Result<SuiteResult, RunError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        let per_seed = spec
            .seeds
            .par_iter()
            .map(|&seed| run_suite_seed(spec, seed))
            .collect::<Result<Vec<_>, _>>()?;
        assemble_suite(spec, per_seed)
    }
    #[cfg(not(feature = "parallel"))]
    {
        run_suite_sequential(spec)
    }
}

/// One grid point of a hyperparameter sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub matcher: MatcherConfig,
    /// Pooled per-keyframe mean accuracy indexed `[delta][radius]`.
    pub mean_pcl: Vec<Vec<f64>>,
    pub n_keyframes: usize,
}

/// Evaluate the core tracker across a matcher-config grid on a shared
/// scenario set. Scenarios are generated once per seed.
pub fn run_sweep(
    scenario: &ScenarioConfig,
    seeds: &[u64],
    grid: &[MatcherConfig],
    eval_config: &EvalConfig,
) -> Result<Vec<SweepPoint>, RunError> {
    let scenarios = map_seeds(seeds, |seed| {
        generate(&ScenarioConfig {
            seed,
            ..scenario.clone()
        })
    })?;
    let streams: Vec<ObservationStream> = scenarios
        .iter()
        .map(ObservationStream::from_scenario)
        .collect();

    let points = map_indices(grid.len(), |g| -> Result<SweepPoint, RunError> {
        let matcher = grid[g];
        let mut evals = Vec::with_capacity(scenarios.len());
        for (scenario, stream) in scenarios.iter().zip(&streams) {
            let out = run_session(
                MethodSpec::lmk(matcher.mode),
                stream,
                &matcher,
                scenario.config.seed,
            )?;
            evals.push(evaluate(scenario, &out.timelines, &out.assignments, eval_config)?);
        }
        let merged = crate::eval::merge_evals(&evals).expect("sweep has seeds");
        let mean_pcl = merged
            .cells
            .iter()
            .map(|row| row.iter().map(|c| c.mean()).collect())
            .collect();
        Ok(SweepPoint {
            matcher,
            mean_pcl,
            n_keyframes: merged.n_keyframes,
        })
    })?;
    Ok(points)
}

fn map_seeds<T: Send>(
    seeds: &[u64],
    f: impl Fn(u64) -> Result<T, SimError> + Sync + Send,
) -> Result<Vec<T>, RunError> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        Ok(seeds.par_iter().map(|&s| f(s)).collect::<Result<Vec<_>, _>>()?)
    }
    #[cfg(not(feature = "parallel"))]
    {
        Ok(seeds.iter().map(|&s| f(s)).collect::<Result<Vec<_>, _>>()?)
    }
}

fn map_indices<T: Send, E: Send>(
    n: usize,
    f: impl Fn(usize) -> Result<T, E> + Sync + Send,
) -> Result<Vec<T>, E> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        (0..n).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..n).map(f).collect()
    }
}

/// Full per-run configuration, loadable from a single TOML file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct RunSpec {
    pub seed: u64,
    pub method: Method,
    pub mode: CostMode,
    pub scenario: ScenarioConfig,
    pub matcher: MatcherConfig,
    pub cognition: CognitionConfig,
    pub eval: EvalConfig,
}

impl Default for RunSpec {
    fn default() -> Self {
        Self {
            seed: 0,
            method: Method::Lmk,
            mode: CostMode::Combined,
            scenario: ScenarioConfig::default(),
            matcher: MatcherConfig::default(),
            cognition: CognitionConfig::default(),
            eval: EvalConfig::default(),
        }
    }
}

impl RunSpec {
    /// The scenario config with the run seed applied.
    pub fn seeded_scenario(&self) -> ScenarioConfig {
        ScenarioConfig {
            seed: self.seed,
            ..self.scenario.clone()
        }
    }

    /// The eval config with the cognition block folded in.
    pub fn eval_config(&self) -> EvalConfig {
        EvalConfig {
            cognition: self.cognition,
            ..self.eval.clone()
        }
    }

    pub fn method_spec(&self) -> MethodSpec {
        MethodSpec {
            method: self.method,
            mode: self.mode,
        }
    }
}

/// What a full `run` leaves on disk.
#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub report: crate::report::EvalReport,
    pub files: Vec<std::path::PathBuf>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Report(#[from] crate::report::ReportError),
    #[error(transparent)]
    Log(#[from] crate::obslog::LogError),
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// The end-to-end pipeline on a simulator input: generate, export the
/// observation log, track, evaluate, write every report artifact.
/// Repeated calls with an identical spec produce byte-identical files.
pub fn run_to_dir(
    spec: &RunSpec,
    out_dir: &std::path::Path,
) -> Result<RunArtifacts, PipelineError> {
    use crate::report;

    std::fs::create_dir_all(out_dir).map_err(crate::report::ReportError::from)?;
    let scenario = generate(&spec.seeded_scenario()).map_err(RunError::from)?;
    let stream = ObservationStream::from_scenario(&scenario);
    let log = crate::obslog::ObservationLog::from_scenario(&scenario);

    let out = run_session(spec.method_spec(), &stream, &spec.matcher, spec.seed)?;
    let eval = evaluate(
        &scenario,
        &out.timelines,
        &out.assignments,
        &spec.eval_config(),
    )
    .map_err(RunError::from)?;

    let provenance = serde_json::to_value(spec)?;
    let method = spec.method.label();
    let mode = spec.mode.label();
    let mut report = report::EvalReport::from_eval(method, mode, provenance.clone(), &eval);
    report.projection =
        crate::eval::projection_error_stats(&scenario, 20_000, spec.seed).ok();

    let mut files = Vec::new();
    let mut write = |name: &str, content: Vec<u8>| -> Result<(), PipelineError> {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(crate::report::ReportError::from)?;
        files.push(path);
        Ok(())
    };

    let mut buf = Vec::new();
    crate::obslog::write_log(&mut buf, &log)?;
    write("scenario.log", buf)?;

    let mut buf = Vec::new();
    report::write_timelines_csv(&mut buf, method, mode, &out.timelines)?;
    write("timelines.csv", buf)?;

    let sources: Vec<Vec<Option<u32>>> = stream
        .by_frame
        .iter()
        .map(|f| f.iter().map(|o| o.source_id).collect())
        .collect();
    let mut buf = Vec::new();
    report::write_assignments_csv(&mut buf, method, mode, &out.assignments, &sources)?;
    write("assignments.csv", buf)?;

    let mut buf = Vec::new();
    report::write_pcl_csv(&mut buf, &provenance, &report.pcl_rows)?;
    write("pcl.csv", buf)?;

    let mut buf = Vec::new();
    report::write_state_csv(&mut buf, &provenance, &report.state_rows)?;
    write("pcl_states.csv", buf)?;

    let mut buf = Vec::new();
    report::write_state_csv(&mut buf, &provenance, &report.motion_rows)?;
    write("pcl_motion.csv", buf)?;

    if let Some(stats) = &report.projection {
        let mut buf = Vec::new();
        report::write_projection_csv(&mut buf, &provenance, stats)?;
        write("projection_error.csv", buf)?;
    }

    let mut buf = Vec::new();
    report::write_report_json(&mut buf, &report)?;
    write("report.json", buf)?;

    Ok(RunArtifacts { report, files })
}

/// The end-to-end pipeline on an ingested observation log. Ground truth
/// is the per-source carry-forward convention; logs without source ids
/// can be tracked but not evaluated.
pub fn run_log_to_dir(
    spec: &RunSpec,
    log_path: &std::path::Path,
    out_dir: &std::path::Path,
) -> Result<(RunArtifacts, Vec<String>), PipelineError> {
    use crate::report;

    std::fs::create_dir_all(out_dir).map_err(crate::report::ReportError::from)?;
    let log = crate::obslog::read_log_from_path(log_path)?;
    let (stream, warnings) = log.into_stream()?;
    let out = run_session(spec.method_spec(), &stream, &spec.matcher, spec.seed)?;
    let eval = crate::eval::evaluate_stream(
        &stream,
        &out.timelines,
        &out.assignments,
        &spec.eval_config(),
    )
    .map_err(RunError::from)?;

    let mut provenance = serde_json::to_value(spec)?;
    if let serde_json::Value::Object(map) = &mut provenance {
        map.insert(
            "input_log".into(),
            serde_json::Value::String(log_path.display().to_string()),
        );
        map.remove("scenario");
    }
    let method = spec.method.label();
    let mode = spec.mode.label();
    let mut report = report::EvalReport::from_eval(method, mode, provenance.clone(), &eval);
    report.projection =
        crate::eval::projection_error_stats_from_stream(&stream, 20_000, spec.seed).ok();

    let mut files = Vec::new();
    let mut write = |name: &str, content: Vec<u8>| -> Result<(), PipelineError> {
        let path = out_dir.join(name);
        std::fs::write(&path, content).map_err(crate::report::ReportError::from)?;
        files.push(path);
        Ok(())
    };

    let mut buf = Vec::new();
    report::write_timelines_csv(&mut buf, method, mode, &out.timelines)?;
    write("timelines.csv", buf)?;

    let sources: Vec<Vec<Option<u32>>> = stream
        .by_frame
        .iter()
        .map(|f| f.iter().map(|o| o.source_id).collect())
        .collect();
    let mut buf = Vec::new();
    report::write_assignments_csv(&mut buf, method, mode, &out.assignments, &sources)?;
    write("assignments.csv", buf)?;

    let mut buf = Vec::new();
    report::write_pcl_csv(&mut buf, &provenance, &report.pcl_rows)?;
    write("pcl.csv", buf)?;

    let mut buf = Vec::new();
    report::write_state_csv(&mut buf, &provenance, &report.state_rows)?;
    write("pcl_states.csv", buf)?;

    let mut buf = Vec::new();
    report::write_state_csv(&mut buf, &provenance, &report.motion_rows)?;
    write("pcl_motion.csv", buf)?;

    if let Some(stats) = &report.projection {
        let mut buf = Vec::new();
        report::write_projection_csv(&mut buf, &provenance, stats)?;
        write("projection_error.csv", buf)?;
    }

    let mut buf = Vec::new();
    report::write_report_json(&mut buf, &report)?;
    write("report.json", buf)?;

    Ok((RunArtifacts { report, files }, warnings))
}
