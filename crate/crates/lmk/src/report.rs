//! Report emission: deterministic CSV/JSON artifacts for plotting
//! elsewhere, plus the timeline/assignment dump format that lets the
//! track and eval stages run as separate commands.
//!
//! Every CSV opens with `# config=<json>` provenance comments echoing the
//! hyperparameters, so any figure is reproducible from its own header.
//! Floats are printed with shortest round-trip precision; repeated runs
//! with the same spec produce byte-identical files.

use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::{all_motion_keys, all_state_keys, ProjectionErrorStats, ScenarioEval};
use crate::geometry::Point3;
use crate::tracker::{
    AssignedPair, FrameAssignment, FrameIndex, NewTrack, TrackId, TrackTimeline, TrackTimelines,
};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("serialization: {0}")]
    Json(#[from] serde_json::Error),
}

/// One row of the headline accuracy table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PclRow {
    pub method: String,
    pub mode: String,
    pub delta_seconds: f64,
    pub radius_m: f64,
    pub pcl_mean: f64,
    pub pcl_std: f64,
    pub n_keyframes: usize,
    pub n_objects: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateRow {
    pub method: String,
    pub mode: String,
    pub delta_seconds: f64,
    pub radius_m: f64,
    pub state: String,
    pub n_queries: u64,
    pub n_correct: u64,
    pub pcl: f64,
}

/// Everything one method run (or merged suite) reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: String,
    pub mode: String,
    /// Full config echo, JSON-encoded by the caller.
    pub provenance: serde_json::Value,
    pub pcl_rows: Vec<PclRow>,
    pub state_rows: Vec<StateRow>,
    pub motion_rows: Vec<StateRow>,
    pub projection: Option<ProjectionErrorStats>,
}

impl EvalReport {
    pub fn from_eval(
        method: &str,
        mode: &str,
        provenance: serde_json::Value,
        eval: &ScenarioEval,
    ) -> Self {
        let mut pcl_rows = Vec::new();
        for (d, &delta) in eval.deltas_seconds.iter().enumerate() {
            for (r, &radius) in eval.radii.iter().enumerate() {
                let cell = eval.cell(d, r);
                pcl_rows.push(PclRow {
                    method: method.into(),
                    mode: mode.into(),
                    delta_seconds: delta,
                    radius_m: radius,
                    pcl_mean: cell.mean(),
                    pcl_std: cell.std(),
                    n_keyframes: cell.keyframe_values.len(),
                    n_objects: eval.n_objects,
                });
            }
        }
        let primary_radius = eval.radii[0];
        let mut state_rows = Vec::new();
        let mut motion_rows = Vec::new();
        for (d, &delta) in eval.deltas_seconds.iter().enumerate() {
            for key in all_state_keys() {
                let cell = eval.state_cells[d].get(&key).cloned().unwrap_or_default();
                state_rows.push(StateRow {
                    method: method.into(),
                    mode: mode.into(),
                    delta_seconds: delta,
                    radius_m: primary_radius,
                    state: key,
                    n_queries: cell.total,
                    n_correct: cell.correct,
                    pcl: cell.fraction(),
                });
            }
            for key in all_motion_keys() {
                let cell = eval.motion_cells[d].get(&key).cloned().unwrap_or_default();
                motion_rows.push(StateRow {
                    method: method.into(),
                    mode: mode.into(),
                    delta_seconds: delta,
                    radius_m: primary_radius,
                    state: key,
                    n_queries: cell.total,
                    n_correct: cell.correct,
                    pcl: cell.fraction(),
                });
            }
        }
        Self {
            method: method.into(),
            mode: mode.into(),
            provenance,
            pcl_rows,
            state_rows,
            motion_rows,
            projection: None,
        }
    }
}

fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "nan".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v}")
    }
}

fn provenance_comment(provenance: &serde_json::Value) -> String {
    format!("# config={provenance}")
}

/// The headline table: one row per (method, delta, radius).
pub fn write_pcl_csv<W: Write>(
    mut w: W,
    provenance: &serde_json::Value,
    rows: &[PclRow],
) -> Result<(), ReportError> {
    writeln!(w, "{}", provenance_comment(provenance))?;
    writeln!(
        w,
        "method,mode,delta_seconds,radius_m,pcl_mean,pcl_std,n_keyframes,n_objects"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.mode,
            fmt_f64(r.delta_seconds),
            fmt_f64(r.radius_m),
            fmt_f64(r.pcl_mean),
            fmt_f64(r.pcl_std),
            r.n_keyframes,
            r.n_objects
        )?;
    }
    Ok(())
}

pub fn write_state_csv<W: Write>(
    mut w: W,
    provenance: &serde_json::Value,
    rows: &[StateRow],
) -> Result<(), ReportError> {
    writeln!(w, "{}", provenance_comment(provenance))?;
    writeln!(
        w,
        "method,mode,delta_seconds,radius_m,state,n_queries,n_correct,pcl"
    )?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{}",
            r.method,
            r.mode,
            fmt_f64(r.delta_seconds),
            fmt_f64(r.radius_m),
            r.state,
            r.n_queries,
            r.n_correct,
            fmt_f64(r.pcl)
        )?;
    }
    Ok(())
}

pub fn write_projection_csv<W: Write>(
    mut w: W,
    provenance: &serde_json::Value,
    stats: &ProjectionErrorStats,
) -> Result<(), ReportError> {
    writeln!(w, "{}", provenance_comment(provenance))?;
    writeln!(w, "n_pairs,mean_m,median_m,frac_under_0.06,frac_under_0.10")?;
    let under = |thr: f64| {
        stats
            .frac_under
            .iter()
            .find(|(t, _)| (*t - thr).abs() < 1e-12)
            .map_or(f64::NAN, |(_, f)| *f)
    };
    writeln!(
        w,
        "{},{},{},{},{}",
        stats.n_pairs,
        fmt_f64(stats.mean_m),
        fmt_f64(stats.median_m),
        fmt_f64(under(0.06)),
        fmt_f64(under(0.10))
    )?;
    writeln!(w)?;
    writeln!(w, "bin_lo_m,bin_hi_m,count")?;
    for (lo, hi, count) in &stats.histogram {
        writeln!(w, "{},{},{}", fmt_f64(*lo), fmt_f64(*hi), count)?;
    }
    Ok(())
}

pub fn write_report_json<W: Write>(mut w: W, report: &EvalReport) -> Result<(), ReportError> {
    serde_json::to_writer_pretty(&mut w, report)?;
    writeln!(w)?;
    Ok(())
}

/// Per-track timeline dump: one row per (track, frame), plus a metadata
/// comment so a later eval stage knows what produced it.
pub fn write_timelines_csv<W: Write>(
    mut w: W,
    method: &str,
    mode: &str,
    timelines: &TrackTimelines,
) -> Result<(), ReportError> {
    writeln!(
        w,
        "# method={method} mode={mode} frames={} appearance_dim={}",
        timelines.frames, timelines.appearance_dim
    )?;
    writeln!(w, "track_id,created_at,frame,x,y,z,scoreable")?;
    for track in &timelines.tracks {
        for (t, loc) in track.locations.iter().enumerate() {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                track.id,
                track.created_at,
                t,
                fmt_f64(loc.x),
                fmt_f64(loc.y),
                fmt_f64(loc.z),
                track.scoreable[t] as u8
            )?;
        }
    }
    Ok(())
}

/// Per-frame assignment dump: matches and new tracks with observation
/// indices and their source labels when known.
pub fn write_assignments_csv<W: Write>(
    mut w: W,
    method: &str,
    mode: &str,
    assignments: &[FrameAssignment],
    sources: &[Vec<Option<u32>>],
) -> Result<(), ReportError> {
    writeln!(w, "# method={method} mode={mode} frames={}", assignments.len())?;
    writeln!(w, "frame,kind,track_id,observation,source_id")?;
    for (t, asg) in assignments.iter().enumerate() {
        for p in &asg.pairs {
            let source = sources[t][p.observation]
                .map_or("-".to_string(), |s| s.to_string());
            writeln!(w, "{},match,{},{},{}", t, p.track, p.observation, source)?;
        }
        for n in &asg.new_tracks {
            let source = sources[t][n.observation]
                .map_or("-".to_string(), |s| s.to_string());
            writeln!(w, "{},new,{},{},{}", t, n.track, n.observation, source)?;
        }
    }
    Ok(())
}

/// Metadata recovered from a dump header comment.
#[derive(Debug, Clone, PartialEq)]
pub struct DumpMeta {
    pub method: String,
    pub mode: String,
}

fn parse_meta(path: &str, line: &str) -> Result<(DumpMeta, Vec<(String, String)>), ReportError> {
    let mut method = None;
    let mut mode = None;
    let mut extra = Vec::new();
    for token in line.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = token.split_once('=') {
            match k {
                "method" => method = Some(v.to_string()),
                "mode" => mode = Some(v.to_string()),
                other => extra.push((other.to_string(), v.to_string())),
            }
        }
    }
    match (method, mode) {
        (Some(method), Some(mode)) => Ok((DumpMeta { method, mode }, extra)),
        _ => Err(ReportError::Parse {
            path: path.into(),
            line: 1,
            message: "missing method/mode metadata comment".into(),
        }),
    }
}

/// Read back a timeline dump written by [`write_timelines_csv`].
pub fn read_timelines_csv(path: &Path) -> Result<(DumpMeta, TrackTimelines), ReportError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, first) = lines.next().ok_or_else(|| ReportError::Parse {
        path: name.clone(),
        line: 1,
        message: "empty file".into(),
    })?;
    let (meta, extra) = parse_meta(&name, &first?)?;
    let lookup = |key: &str| -> Option<usize> {
        extra
            .iter()
            .find(|(k, _)| k == key)
            .and_then(|(_, v)| v.parse().ok())
    };
    let frames = lookup("frames").unwrap_or(0) as FrameIndex;
    let appearance_dim = lookup("appearance_dim").unwrap_or(0);

    let mut tracks: Vec<TrackTimeline> = Vec::new();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.starts_with("track_id") || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| ReportError::Parse {
            path: name.clone(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(err(format!("expected 7 fields, got {}", fields.len())));
        }
        let track_id: TrackId = fields[0].parse().map_err(|_| err("bad track_id".into()))?;
        let created_at: FrameIndex =
            fields[1].parse().map_err(|_| err("bad created_at".into()))?;
        let frame: usize = fields[2].parse().map_err(|_| err("bad frame".into()))?;
        let x: f64 = fields[3].parse().map_err(|_| err("bad x".into()))?;
        let y: f64 = fields[4].parse().map_err(|_| err("bad y".into()))?;
        let z: f64 = fields[5].parse().map_err(|_| err("bad z".into()))?;
        let scoreable = match fields[6] {
            "0" => false,
            "1" => true,
            other => return Err(err(format!("bad scoreable flag '{other}'"))),
        };
        while tracks.len() <= track_id as usize {
            tracks.push(TrackTimeline {
                id: tracks.len() as TrackId,
                created_at: 0,
                locations: Vec::new(),
                scoreable: Vec::new(),
            });
        }
        let track = &mut tracks[track_id as usize];
        track.id = track_id;
        track.created_at = created_at;
        if track.locations.len() != frame {
            return Err(err(format!(
                "track {track_id} rows out of order at frame {frame}"
            )));
        }
        track.locations.push(Point3::new(x, y, z));
        track.scoreable.push(scoreable);
    }
    Ok((
        meta,
        TrackTimelines {
            frames,
            appearance_dim,
            tracks,
        },
    ))
}

/// Read back an assignment dump written by [`write_assignments_csv`].
pub fn read_assignments_csv(
    path: &Path,
) -> Result<(DumpMeta, Vec<FrameAssignment>), ReportError> {
    let name = path.display().to_string();
    let file = std::fs::File::open(path)?;
    let mut lines = BufReader::new(file).lines().enumerate();

    let (_, first) = lines.next().ok_or_else(|| ReportError::Parse {
        path: name.clone(),
        line: 1,
        message: "empty file".into(),
    })?;
    let (meta, extra) = parse_meta(&name, &first?)?;
    let frames: usize = extra
        .iter()
        .find(|(k, _)| k == "frames")
        .and_then(|(_, v)| v.parse().ok())
        .unwrap_or(0);

    let mut assignments: Vec<FrameAssignment> = (0..frames)
        .map(|t| FrameAssignment::empty(t as FrameIndex))
        .collect();
    for (idx, line) in lines {
        let line_no = idx + 1;
        let line = line?;
        if line.starts_with("frame,") || line.trim().is_empty() {
            continue;
        }
        let err = |message: String| ReportError::Parse {
            path: name.clone(),
            line: line_no,
            message,
        };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 5 {
            return Err(err(format!("expected 5 fields, got {}", fields.len())));
        }
        let frame: usize = fields[0].parse().map_err(|_| err("bad frame".into()))?;
        let track: TrackId = fields[2].parse().map_err(|_| err("bad track_id".into()))?;
        let observation: usize =
            fields[3].parse().map_err(|_| err("bad observation".into()))?;
        if frame >= assignments.len() {
            return Err(err(format!("frame {frame} outside declared count {frames}")));
        }
        match fields[1] {
            "match" => assignments[frame].pairs.push(AssignedPair { track, observation }),
            "new" => assignments[frame].new_tracks.push(NewTrack { observation, track }),
            other => return Err(err(format!("unknown kind '{other}'"))),
        }
    }
    Ok((meta, assignments))
}

/// Write a string to a file.
pub fn write_string_to_path(path: &Path, content: &str) -> Result<(), ReportError> {
    std::fs::write(path, content)?;
    Ok(())
}
