//! Command-line front end: scenario simulation, tracking, evaluation,
//! hyperparameter sweeps, and projection-error analysis over the
//! observation-log format.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use lmk::eval::{evaluate, projection_error_stats, projection_error_stats_from_stream};
use lmk::obslog::{read_log_from_path, write_log_to_path, ObservationLog};
use lmk::report::{
    read_assignments_csv, read_timelines_csv, write_assignments_csv, write_pcl_csv,
    write_projection_csv, write_report_json, write_state_csv, write_timelines_csv, EvalReport,
};
use lmk::runner::{
    run_log_to_dir, run_session, run_sweep, run_to_dir, Method, ObservationStream, RunSpec,
};
use lmk::simulator::generate;
use lmk::tracker::{CostMode, MatcherConfig};

#[derive(Parser)]
#[command(
    name = "lmk",
    about = "World-coordinate multi-object tracking with object permanence",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Overrides applied on top of the TOML config.
#[derive(Args, Clone, Default)]
struct Overrides {
    /// RNG seed for the scenario and any stochastic method.
    #[arg(long)]
    seed: Option<u64>,
    /// Tracking method: lmk, random, osl, osom, retrieval.
    #[arg(long, value_parser = parse_method)]
    method: Option<Method>,
    /// Cost mode for the tracker: v+l, v, l.
    #[arg(long, value_parser = parse_mode)]
    mode: Option<CostMode>,
    /// Location weight.
    #[arg(long)]
    beta_l: Option<f64>,
    /// Appearance weight.
    #[arg(long)]
    beta_v: Option<f64>,
    /// Assignment-cost gate.
    #[arg(long)]
    alpha: Option<f64>,
    /// Appearance window length.
    #[arg(long)]
    gamma: Option<usize>,
    /// Reach radius in meters.
    #[arg(long)]
    eta: Option<f64>,
    /// Motion threshold in meters.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Correctness radii in meters, comma separated.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Query offsets in seconds, comma separated.
    #[arg(long, value_delimiter = ',')]
    deltas: Option<Vec<f64>>,
}

fn parse_mode(s: &str) -> Result<CostMode, String> {
    s.parse()
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse()
}

#[derive(Subcommand)]
enum Command {
    /// Write the default configuration as a TOML file.
    Config {
        /// Output path.
        #[arg(long, default_value = "lmk.toml")]
        out: PathBuf,
    },
    /// Generate a synthetic scenario and export it as an observation log.
    Simulate {
        /// TOML config (run-spec layout); defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Output log path.
        #[arg(long, default_value = "scenario.log")]
        out: PathBuf,
    },
    /// Track a scenario or log and dump per-track timelines.
    Track {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input observation log; omit to simulate from the config.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Evaluate previously dumped timelines against regenerated ground
    /// truth.
    Eval {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Directory holding timelines.csv and assignments.csv.
        #[arg(long)]
        timelines: PathBuf,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Simulate (or ingest), track, evaluate, and write all reports.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Input observation log; omit to simulate from the config.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Grid-sweep matcher hyperparameters for the core tracker.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Scenario seeds, comma separated.
        #[arg(long, value_delimiter = ',', default_value = "0,1,2")]
        seeds: Vec<u64>,
        /// Location-weight grid.
        #[arg(long = "beta-l-grid", value_delimiter = ',')]
        beta_l_grid: Option<Vec<f64>>,
        /// Appearance-weight grid.
        #[arg(long = "beta-v-grid", value_delimiter = ',')]
        beta_v_grid: Option<Vec<f64>>,
        /// Gate grid.
        #[arg(long = "alpha-grid", value_delimiter = ',')]
        alpha_grid: Option<Vec<f64>>,
        /// Window grid.
        #[arg(long = "gamma-grid", value_delimiter = ',')]
        gamma_grid: Option<Vec<usize>>,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
    /// Pairwise lift-error analysis over static objects.
    Stats {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Analyze a log instead of simulating.
        #[arg(long)]
        log: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        /// Depth-noise magnitudes to sweep (simulator input only).
        #[arg(long, value_delimiter = ',')]
        sigmas: Option<Vec<f64>>,
        /// Maximum sampled pairs per analysis.
        #[arg(long, default_value_t = 20_000)]
        max_pairs: usize,
        #[arg(long, default_value = "out")]
        out_dir: PathBuf,
    },
}

fn load_spec(config: Option<&Path>, overrides: &Overrides) -> Result<RunSpec> {
    let mut spec: RunSpec = match config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?
        }
        None => RunSpec::default(),
    };
    if let Some(seed) = overrides.seed {
        spec.seed = seed;
    }
    if let Some(method) = overrides.method {
        spec.method = method;
    }
    if let Some(mode) = overrides.mode {
        spec.mode = mode;
    }
    if let Some(v) = overrides.beta_l {
        spec.matcher.beta_l = v;
    }
    if let Some(v) = overrides.beta_v {
        spec.matcher.beta_v = v;
    }
    if let Some(v) = overrides.alpha {
        spec.matcher.alpha = v;
    }
    if let Some(v) = overrides.gamma {
        spec.matcher.gamma = v;
    }
    if let Some(v) = overrides.eta {
        spec.cognition.eta = v;
    }
    if let Some(v) = overrides.epsilon {
        spec.cognition.epsilon = v;
    }
    if let Some(v) = &overrides.radii {
        spec.eval.radii = v.clone();
    }
    if let Some(v) = &overrides.deltas {
        spec.eval.deltas_seconds = v.clone();
    }
    spec.matcher
        .validate()
        .map_err(|e| anyhow::anyhow!("matcher config: {e}"))?;
    spec.cognition
        .validate()
        .map_err(|e| anyhow::anyhow!("cognition config: {e}"))?;
    Ok(spec)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Config { out } => {
            let text = toml::to_string_pretty(&RunSpec::default())?;
            std::fs::write(&out, text)?;
            println!("wrote default config to {}", out.display());
        }
        Command::Simulate {
            config,
            overrides,
            out,
        } => {
            let spec = load_spec(config.as_deref(), &overrides)?;
            let scenario = generate(&spec.seeded_scenario())?;
            let log = ObservationLog::from_scenario(&scenario);
            write_log_to_path(&out, &log)?;
            let n_obs: usize = scenario.observations.iter().map(|f| f.len()).sum();
            println!(
                "simulated seed {}: {} frames, {} objects, {} observations, out-of-view {:.1}%",
                spec.seed,
                scenario.duration(),
                scenario.config.num_objects,
                n_obs,
                100.0 * scenario.out_of_view_fraction()
            );
            println!("wrote {}", out.display());
        }
        Command::Track {
            config,
            log,
            overrides,
            out_dir,
        } => {
            let spec = load_spec(config.as_deref(), &overrides)?;
            std::fs::create_dir_all(&out_dir)?;
            let (stream, from_log) = match &log {
                Some(path) => {
                    let parsed = read_log_from_path(path)?;
                    let (stream, warnings) = parsed.into_stream()?;
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    (stream, true)
                }
                None => {
                    let scenario = generate(&spec.seeded_scenario())?;
                    let log = ObservationLog::from_scenario(&scenario);
                    write_log_to_path(&out_dir.join("scenario.log"), &log)?;
                    (ObservationStream::from_scenario(&scenario), false)
                }
            };
            let out = run_session(spec.method_spec(), &stream, &spec.matcher, spec.seed)?;
            let method = spec.method.label();
            let mode = spec.mode.label();
            let mut buf = Vec::new();
            write_timelines_csv(&mut buf, method, mode, &out.timelines)?;
            std::fs::write(out_dir.join("timelines.csv"), buf)?;
            let sources: Vec<Vec<Option<u32>>> = stream
                .by_frame
                .iter()
                .map(|f| f.iter().map(|o| o.source_id).collect())
                .collect();
            let mut buf = Vec::new();
            write_assignments_csv(&mut buf, method, mode, &out.assignments, &sources)?;
            std::fs::write(out_dir.join("assignments.csv"), buf)?;
            println!(
                "tracked {} frames with {} ({} tracks){}",
                stream.frames,
                spec.method_spec().label(),
                out.timelines.tracks.len(),
                if from_log { " from log" } else { "" }
            );
            println!("wrote {}", out_dir.join("timelines.csv").display());
        }
        Command::Eval {
            config,
            overrides,
            timelines,
            out_dir,
        } => {
            let spec = load_spec(config.as_deref(), &overrides)?;
            std::fs::create_dir_all(&out_dir)?;
            let (meta, parsed_timelines) = read_timelines_csv(&timelines.join("timelines.csv"))?;
            let (_, assignments) = read_assignments_csv(&timelines.join("assignments.csv"))?;
            let scenario = generate(&spec.seeded_scenario())?;
            let eval = evaluate(
                &scenario,
                &parsed_timelines,
                &assignments,
                &spec.eval_config(),
            )?;
            let provenance = serde_json::to_value(&spec)?;
            let report =
                EvalReport::from_eval(&meta.method, &meta.mode, provenance.clone(), &eval);
            write_report_files(&out_dir, &provenance, &report)?;
            print_summary(&report);
        }
        Command::Run {
            config,
            log,
            overrides,
            out_dir,
        } => {
            let spec = load_spec(config.as_deref(), &overrides)?;
            let report = match &log {
                Some(path) => {
                    let (artifacts, warnings) = run_log_to_dir(&spec, path, &out_dir)?;
                    for w in warnings {
                        eprintln!("warning: {w}");
                    }
                    artifacts.report
                }
                None => run_to_dir(&spec, &out_dir)?.report,
            };
            print_summary(&report);
            println!("artifacts in {}", out_dir.display());
        }
        Command::Sweep {
            config,
            overrides,
            seeds,
            beta_l_grid,
            beta_v_grid,
            alpha_grid,
            gamma_grid,
            out_dir,
        } => {
            let spec = load_spec(config.as_deref(), &overrides)?;
            std::fs::create_dir_all(&out_dir)?;
            let base = spec.matcher;
            let beta_ls = beta_l_grid.unwrap_or_else(|| vec![base.beta_l]);
            let beta_vs = beta_v_grid.unwrap_or_else(|| vec![base.beta_v]);
            let alphas = alpha_grid.unwrap_or_else(|| vec![base.alpha]);
            let gammas = gamma_grid.unwrap_or_else(|| vec![base.gamma]);
            let mut grid = Vec::new();
            for &beta_l in &beta_ls {
                for &beta_v in &beta_vs {
                    for &alpha in &alphas {
                        for &gamma in &gammas {
                            grid.push(MatcherConfig {
                                beta_l,
                                beta_v,
                                alpha,
                                gamma,
                                mode: spec.mode,
                            });
                        }
                    }
                }
            }
            let eval_config = spec.eval_config();
            let points = run_sweep(&spec.scenario, &seeds, &grid, &eval_config)?;
            let provenance = serde_json::to_value(&spec)?;
            let mut out = format!("# config={provenance}\n# seeds={seeds:?}\n");
            out.push_str(
                "beta_l,beta_v,alpha,gamma,mode,delta_seconds,radius_m,pcl_mean,n_keyframes\n",
            );
            let deltas = eval_config
                .resolved_deltas(spec.scenario.duration_frames, spec.scenario.frame_rate);
            for p in &points {
                for (d, &delta) in deltas.iter().enumerate() {
                    for (r, &radius) in eval_config.radii.iter().enumerate() {
                        out.push_str(&format!(
                            "{},{},{},{},{},{},{},{},{}\n",
                            p.matcher.beta_l,
                            p.matcher.beta_v,
                            p.matcher.alpha,
                            p.matcher.gamma,
                            p.matcher.mode.label(),
                            delta,
                            radius,
                            p.mean_pcl[d][r],
                            p.n_keyframes
                        ));
                    }
                }
            }
            std::fs::write(out_dir.join("sweep.csv"), out)?;
            println!(
                "swept {} configs x {} seeds; wrote {}",
                points.len(),
                seeds.len(),
                out_dir.join("sweep.csv").display()
            );
        }
        Command::Stats {
            config,
            log,
            overrides,
            sigmas,
            max_pairs,
            out_dir,
        } => {
            let spec = load_spec(config.as_deref(), &overrides)?;
            std::fs::create_dir_all(&out_dir)?;
            let provenance = serde_json::to_value(&spec)?;
            match &log {
                Some(path) => {
                    if sigmas.is_some() {
                        bail!("--sigmas only applies to simulator input");
                    }
                    let parsed = read_log_from_path(path)?;
                    let (stream, _) = parsed.into_stream()?;
                    let stats =
                        projection_error_stats_from_stream(&stream, max_pairs, spec.seed)?;
                    let mut buf = Vec::new();
                    write_projection_csv(&mut buf, &provenance, &stats)?;
                    std::fs::write(out_dir.join("projection_error.csv"), buf)?;
                    println!(
                        "{} pairs: mean {:.4} m, median {:.4} m",
                        stats.n_pairs, stats.mean_m, stats.median_m
                    );
                }
                None => {
                    let sigma_list =
                        sigmas.unwrap_or_else(|| vec![spec.scenario.depth_noise_sigma]);
                    let mut summary = format!("# config={provenance}\n");
                    summary.push_str(
                        "depth_noise_sigma,n_pairs,mean_m,median_m,frac_under_0.06,frac_under_0.10\n",
                    );
                    for &sigma in &sigma_list {
                        let mut cfg = spec.seeded_scenario();
                        cfg.depth_noise_sigma = sigma;
                        let scenario = generate(&cfg)?;
                        let stats = projection_error_stats(&scenario, max_pairs, spec.seed)?;
                        let under = |thr: f64| {
                            stats
                                .frac_under
                                .iter()
                                .find(|(t, _)| (*t - thr).abs() < 1e-12)
                                .map_or(f64::NAN, |(_, f)| *f)
                        };
                        summary.push_str(&format!(
                            "{},{},{},{},{},{}\n",
                            sigma,
                            stats.n_pairs,
                            stats.mean_m,
                            stats.median_m,
                            under(0.06),
                            under(0.10)
                        ));
                        let mut buf = Vec::new();
                        write_projection_csv(&mut buf, &provenance, &stats)?;
                        std::fs::write(
                            out_dir.join(format!("projection_error_sigma_{sigma}.csv")),
                            buf,
                        )?;
                        println!(
                            "sigma {sigma}: {} pairs, mean {:.4} m, median {:.4} m",
                            stats.n_pairs, stats.mean_m, stats.median_m
                        );
                    }
                    std::fs::write(out_dir.join("projection_error.csv"), summary)?;
                }
            }
        }
    }
    Ok(())
}

fn write_report_files(
    out_dir: &Path,
    provenance: &serde_json::Value,
    report: &EvalReport,
) -> Result<()> {
    let mut buf = Vec::new();
    write_pcl_csv(&mut buf, provenance, &report.pcl_rows)?;
    std::fs::write(out_dir.join("pcl.csv"), buf)?;
    let mut buf = Vec::new();
    write_state_csv(&mut buf, provenance, &report.state_rows)?;
    std::fs::write(out_dir.join("pcl_states.csv"), buf)?;
    let mut buf = Vec::new();
    write_state_csv(&mut buf, provenance, &report.motion_rows)?;
    std::fs::write(out_dir.join("pcl_motion.csv"), buf)?;
    let mut buf = Vec::new();
    write_report_json(&mut buf, report)?;
    std::fs::write(out_dir.join("report.json"), buf)?;
    Ok(())
}

fn print_summary(report: &EvalReport) {
    println!("{} ({})", report.method, report.mode);
    for row in &report.pcl_rows {
        println!(
            "  delta {:>6.1}s  R {:.2} m  pcl {:.4} +/- {:.4}  ({} keyframes, {} objects)",
            row.delta_seconds,
            row.radius_m,
            row.pcl_mean,
            row.pcl_std,
            row.n_keyframes,
            row.n_objects
        );
    }
}
