//! The line-delimited observation log: the neutral bridge between real
//! perception pipelines (poses, mask centroids, depths, features) and this
//! toolkit, and the replay format for simulator scenarios.
//!
//! Layout, one record per line:
//!
//! ```text
//! # lmk-observation-log v1
//! # appearance_dim 64
//! # frame_rate 10
//! # frames 6000
//! # intrinsics fx fy cx cy width height
//! # units meters
//! # layout row-vector
//! C <frame> <r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz>
//! O <frame> <pose: 12 numbers as above> <u> <v> <depth_raw> <depth_ref|-> \
//!   <appearance: dim numbers> <source_id|-> <interaction 0|1|->
//! ```
//!
//! `C` lines carry the camera for a frame (also frames with no
//! observations); `O` lines carry one observation each, with the pose
//! repeated so records are self-contained. Numbers are printed with
//! shortest round-trip precision, so parse-then-print is byte identical.
//! When `depth_ref` (mesh/oracle depth at the same pixel) is present on at
//! least two records of a frame with distinct raw depths, ingestion fits a
//! least-squares scale-shift and applies it to every raw depth in that
//! frame before lifting.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use thiserror::Error;

use crate::geometry::{
    align_depth, unproject, CameraIntrinsics, CameraPose, DepthSamplePair, GeometryError, Pixel,
};
use crate::runner::ObservationStream;
use crate::simulator::Scenario;
use crate::tracker::{FrameIndex, LiftedObservation};

pub const FORMAT_NAME: &str = "lmk-observation-log";
pub const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Error)]
pub enum LogError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("header: {0}")]
    Header(String),
    #[error("frame {frame} has observations but no camera pose")]
    MissingPose { frame: FrameIndex },
    #[error("log has no camera information")]
    NoCameras,
    #[error("lifting failed at record {record}: {source}")]
    Lift {
        record: usize,
        source: GeometryError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogHeader {
    pub version: String,
    pub appearance_dim: usize,
    pub frame_rate: f64,
    pub frames: FrameIndex,
    pub intrinsics: CameraIntrinsics,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LogRecord {
    pub frame: FrameIndex,
    pub pose: CameraPose,
    pub pixel: Pixel,
    pub depth_raw: f64,
    pub depth_ref: Option<f64>,
    pub appearance: Vec<f64>,
    pub source_id: Option<u32>,
    pub interaction: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObservationLog {
    pub header: LogHeader,
    /// Per-frame cameras, ascending by frame, at most one per frame.
    pub cameras: Vec<(FrameIndex, CameraPose)>,
    /// Observation records, ascending by frame.
    pub records: Vec<LogRecord>,
}

impl ObservationLog {
    /// Serialize a simulator scenario: every frame gets a camera line and
    /// one record per emitted observation, carrying the exact pixel/depth
    /// samples the observations were lifted from.
    pub fn from_scenario(scenario: &Scenario) -> Self {
        let header = LogHeader {
            version: FORMAT_VERSION.into(),
            appearance_dim: scenario.config.appearance_dim,
            frame_rate: scenario.config.frame_rate,
            frames: scenario.duration(),
            intrinsics: scenario.intrinsics,
        };
        let cameras = scenario
            .cameras
            .iter()
            .enumerate()
            .map(|(t, pose)| (t as FrameIndex, *pose))
            .collect();
        let mut records = Vec::new();
        for (t, frame) in scenario.observations.iter().enumerate() {
            let pose = scenario.cameras[t];
            for (obs, prov) in frame.iter().zip(&scenario.provenance[t]) {
                records.push(LogRecord {
                    frame: t as FrameIndex,
                    pose,
                    pixel: prov.pixel,
                    depth_raw: prov.depth,
                    depth_ref: None,
                    appearance: obs.appearance.clone(),
                    source_id: obs.source_id,
                    interaction: Some(obs.source_id.is_some_and(|id| {
                        scenario.objects[id as usize].interacting_at(t as FrameIndex)
                    })),
                });
            }
        }
        Self {
            header,
            cameras,
            records,
        }
    }

    /// Lift the log into a tracker-ready stream. Returns warnings for
    /// recoverable oddities (duplicate sources are kept-first).
    pub fn into_stream(self) -> Result<(ObservationStream, Vec<String>), LogError> {
        let frames = self.header.frames;
        let intrinsics = self.header.intrinsics;
        let mut warnings = Vec::new();

        // Camera timeline: explicit C lines first, observation poses as a
        // fallback, carry-forward (and initial back-fill) elsewhere.
        let mut cameras: Vec<Option<CameraPose>> = vec![None; frames as usize];
        for (frame, pose) in &self.cameras {
            cameras[*frame as usize] = Some(*pose);
        }
        for rec in &self.records {
            let slot = &mut cameras[rec.frame as usize];
            if slot.is_none() {
                *slot = Some(rec.pose);
            }
        }
        let first_known = cameras
            .iter()
            .position(|c| c.is_some())
            .ok_or(LogError::NoCameras)?;
        let mut filled = Vec::with_capacity(frames as usize);
        let mut current = cameras[first_known].expect("found above");
        for (t, cam) in cameras.iter().enumerate() {
            if let Some(c) = cam {
                current = *c;
            } else if t < first_known {
                current = cameras[first_known].expect("found above");
            }
            filled.push(current);
        }

        // Group records by frame, preserving order.
        let mut by_frame_records: Vec<Vec<&LogRecord>> = vec![Vec::new(); frames as usize];
        for rec in &self.records {
            by_frame_records[rec.frame as usize].push(rec);
        }

        let mut by_frame = Vec::with_capacity(frames as usize);
        let mut interaction = Vec::with_capacity(frames as usize);
        let mut record_index = 0usize;
        for (t, recs) in by_frame_records.iter().enumerate() {
            let mut frame_obs: Vec<LiftedObservation> = Vec::with_capacity(recs.len());
            let mut frame_flags: Vec<bool> = Vec::with_capacity(recs.len());
            let mut seen_sources: Vec<u32> = Vec::new();

            // Per-frame scale-shift alignment when reference depths exist.
            let pairs: Vec<DepthSamplePair> = recs
                .iter()
                .filter_map(|r| {
                    r.depth_ref.map(|reference| DepthSamplePair {
                        estimated: r.depth_raw,
                        reference,
                    })
                })
                .collect();
            let fit = if pairs.len() >= 2 {
                align_depth(&pairs).ok()
            } else {
                None
            };

            for rec in recs {
                record_index += 1;
                if let Some(id) = rec.source_id {
                    if seen_sources.contains(&id) {
                        warnings.push(format!(
                            "frame {t}: duplicate observation for source {id}; keeping the first"
                        ));
                        continue;
                    }
                    seen_sources.push(id);
                }
                let depth = match (fit, rec.depth_ref) {
                    (Some((a, b)), _) => a * rec.depth_raw + b,
                    (None, Some(reference)) => reference,
                    (None, None) => rec.depth_raw,
                };
                let location = unproject(rec.pixel, depth, &intrinsics, &rec.pose)
                    .map_err(|source| LogError::Lift {
                        record: record_index,
                        source,
                    })?;
                frame_obs.push(LiftedObservation {
                    frame: t as FrameIndex,
                    location,
                    appearance: rec.appearance.clone(),
                    source_id: rec.source_id,
                });
                frame_flags.push(rec.interaction.unwrap_or(false));
            }
            by_frame.push(frame_obs);
            interaction.push(frame_flags);
        }

        Ok((
            ObservationStream {
                frames,
                frame_rate: self.header.frame_rate,
                appearance_dim: self.header.appearance_dim,
                intrinsics,
                cameras: filled,
                by_frame,
                interaction,
            },
            warnings,
        ))
    }
}

fn push_f64(out: &mut String, v: f64) {
    // Shortest round-trip formatting keeps the file diffable and the
    // parse-print cycle byte identical.
    write!(out, " {v}").expect("string write");
}

fn push_pose(out: &mut String, pose: &CameraPose) {
    for r in 0..3 {
        for c in 0..3 {
            push_f64(out, pose.rotation[(r, c)]);
        }
    }
    for i in 0..3 {
        push_f64(out, pose.translation[i]);
    }
}

pub fn write_log<W: Write>(mut w: W, log: &ObservationLog) -> Result<(), LogError> {
    let h = &log.header;
    writeln!(w, "# {} {}", FORMAT_NAME, h.version)?;
    writeln!(w, "# appearance_dim {}", h.appearance_dim)?;
    writeln!(w, "# frame_rate {}", h.frame_rate)?;
    writeln!(w, "# frames {}", h.frames)?;
    writeln!(
        w,
        "# intrinsics {} {} {} {} {} {}",
        h.intrinsics.fx, h.intrinsics.fy, h.intrinsics.cx, h.intrinsics.cy, h.intrinsics.width,
        h.intrinsics.height
    )?;
    writeln!(w, "# units meters")?;
    writeln!(w, "# layout row-vector")?;

    let mut cam_idx = 0usize;
    let mut rec_idx = 0usize;
    for frame in 0..h.frames {
        while cam_idx < log.cameras.len() && log.cameras[cam_idx].0 == frame {
            let mut line = format!("C {frame}");
            push_pose(&mut line, &log.cameras[cam_idx].1);
            writeln!(w, "{line}")?;
            cam_idx += 1;
        }
        while rec_idx < log.records.len() && log.records[rec_idx].frame == frame {
            let rec = &log.records[rec_idx];
            let mut line = format!("O {frame}");
            push_pose(&mut line, &rec.pose);
            push_f64(&mut line, rec.pixel.u);
            push_f64(&mut line, rec.pixel.v);
            push_f64(&mut line, rec.depth_raw);
            match rec.depth_ref {
                Some(d) => push_f64(&mut line, d),
                None => line.push_str(" -"),
            }
            for a in &rec.appearance {
                push_f64(&mut line, *a);
            }
            match rec.source_id {
                Some(id) => write!(line, " {id}").expect("string write"),
                None => line.push_str(" -"),
            }
            match rec.interaction {
                Some(flag) => write!(line, " {}", flag as u8).expect("string write"),
                None => line.push_str(" -"),
            }
            writeln!(w, "{line}")?;
            rec_idx += 1;
        }
    }
    Ok(())
}

pub fn write_log_to_path(path: &Path, log: &ObservationLog) -> Result<(), LogError> {
    let file = std::fs::File::create(path)?;
    write_log(std::io::BufWriter::new(file), log)
}

pub fn read_log<R: Read>(r: R) -> Result<ObservationLog, LogError> {
    let reader = BufReader::new(r);
    let mut version = None;
    let mut appearance_dim = None;
    let mut frame_rate = None;
    let mut frames = None;
    let mut intrinsics = None;
    let mut cameras: Vec<(FrameIndex, CameraPose)> = Vec::new();
    let mut records: Vec<LogRecord> = Vec::new();

    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let err = |message: String| LogError::Parse {
            line: line_no,
            message,
        };
        if let Some(rest) = line.strip_prefix("# ") {
            let mut parts = rest.split_whitespace();
            match parts.next() {
                Some(FORMAT_NAME) => {
                    version = Some(
                        parts
                            .next()
                            .ok_or_else(|| err("missing format version".into()))?
                            .to_string(),
                    );
                }
                Some("appearance_dim") => {
                    appearance_dim = Some(parse_next(&mut parts, line_no, "appearance_dim")?);
                }
                Some("frame_rate") => {
                    frame_rate = Some(parse_next(&mut parts, line_no, "frame_rate")?);
                }
                Some("frames") => {
                    frames = Some(parse_next(&mut parts, line_no, "frames")?);
                }
                Some("intrinsics") => {
                    let v: Vec<f64> = parse_n(&mut parts, 6, line_no, "intrinsics")?;
                    intrinsics = Some(
                        CameraIntrinsics::new(v[0], v[1], v[2], v[3], v[4], v[5])
                            .map_err(|e| err(e.to_string()))?,
                    );
                }
                // Unknown header keys (units, layout, future fields) pass.
                _ => {}
            }
            continue;
        }

        let mut parts = line.split_whitespace();
        match parts.next() {
            Some("C") => {
                let frame: FrameIndex = parse_next(&mut parts, line_no, "frame")?;
                if let Some((last, _)) = cameras.last() {
                    if frame < *last {
                        return Err(err(format!("camera frames not sorted ({last} then {frame})")));
                    }
                }
                let pose = parse_pose(&mut parts, line_no)?;
                cameras.push((frame, pose));
            }
            Some("O") => {
                let dim = appearance_dim
                    .ok_or_else(|| err("observation before appearance_dim header".into()))?;
                let frame: FrameIndex = parse_next(&mut parts, line_no, "frame")?;
                if let Some(last) = records.last() {
                    if frame < last.frame {
                        return Err(err(format!(
                            "records not sorted by frame ({} then {frame})",
                            last.frame
                        )));
                    }
                }
                let pose = parse_pose(&mut parts, line_no)?;
                let u: f64 = parse_next(&mut parts, line_no, "pixel u")?;
                let v: f64 = parse_next(&mut parts, line_no, "pixel v")?;
                let depth_raw: f64 = parse_next(&mut parts, line_no, "depth_raw")?;
                let depth_ref = parse_optional::<f64>(&mut parts, line_no, "depth_ref")?;
                let appearance: Vec<f64> = parse_n(&mut parts, dim, line_no, "appearance")?;
                let source_id = parse_optional::<u32>(&mut parts, line_no, "source_id")?;
                let interaction = match parse_optional::<u8>(&mut parts, line_no, "interaction")? {
                    None => None,
                    Some(0) => Some(false),
                    Some(1) => Some(true),
                    Some(other) => {
                        return Err(err(format!("interaction flag must be 0 or 1, got {other}")))
                    }
                };
                if parts.next().is_some() {
                    return Err(err("trailing fields on observation record".into()));
                }
                records.push(LogRecord {
                    frame,
                    pose,
                    pixel: Pixel::new(u, v),
                    depth_raw,
                    depth_ref,
                    appearance,
                    source_id,
                    interaction,
                });
            }
            Some(other) => return Err(err(format!("unknown record type '{other}'"))),
            None => {}
        }
    }

    let version = version.ok_or_else(|| LogError::Header("missing format line".into()))?;
    if version != FORMAT_VERSION {
        return Err(LogError::Header(format!(
            "unsupported version '{version}' (expected {FORMAT_VERSION})"
        )));
    }
    let header = LogHeader {
        version,
        appearance_dim: appearance_dim
            .ok_or_else(|| LogError::Header("missing appearance_dim".into()))?,
        frame_rate: frame_rate.ok_or_else(|| LogError::Header("missing frame_rate".into()))?,
        frames: frames.ok_or_else(|| LogError::Header("missing frames".into()))?,
        intrinsics: intrinsics.ok_or_else(|| LogError::Header("missing intrinsics".into()))?,
    };
    if let Some(max_frame) = records
        .iter()
        .map(|r| r.frame)
        .chain(cameras.iter().map(|c| c.0))
        .max()
    {
        if max_frame >= header.frames {
            return Err(LogError::Header(format!(
                "record frame {max_frame} outside declared frame count {}",
                header.frames
            )));
        }
    }
    // Frames with observations but no pose anywhere: impossible here since
    // records carry poses; a hard error remains for robustness if records
    // ever allow pose-less lines.
    Ok(ObservationLog {
        header,
        cameras,
        records,
    })
}

pub fn read_log_from_path(path: &Path) -> Result<ObservationLog, LogError> {
    read_log(std::fs::File::open(path)?)
}

fn parse_next<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<T, LogError> {
    let token = parts.next().ok_or(LogError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    token.parse().map_err(|_| LogError::Parse {
        line,
        message: format!("bad {what} '{token}'"),
    })
}

fn parse_optional<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
    what: &str,
) -> Result<Option<T>, LogError> {
    let token = parts.next().ok_or(LogError::Parse {
        line,
        message: format!("missing {what}"),
    })?;
    if token == "-" {
        return Ok(None);
    }
    token.parse().map(Some).map_err(|_| LogError::Parse {
        line,
        message: format!("bad {what} '{token}'"),
    })
}

fn parse_n<'a, T: std::str::FromStr>(
    parts: &mut impl Iterator<Item = &'a str>,
    n: usize,
    line: usize,
    what: &str,
) -> Result<Vec<T>, LogError> {
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let token = parts.next().ok_or(LogError::Parse {
            line,
            message: format!("{what}: expected {n} values, got {i}"),
        })?;
        out.push(token.parse().map_err(|_| LogError::Parse {
            line,
            message: format!("bad {what} value '{token}'"),
        })?);
    }
    Ok(out)
}

fn parse_pose<'a>(
    parts: &mut impl Iterator<Item = &'a str>,
    line: usize,
) -> Result<CameraPose, LogError> {
    let v: Vec<f64> = parse_n(parts, 12, line, "pose")?;
    let rotation = Matrix3::new(v[0], v[1], v[2], v[3], v[4], v[5], v[6], v[7], v[8]);
    let translation = Vector3::new(v[9], v[10], v[11]);
    CameraPose::new(rotation, translation).map_err(|e| LogError::Parse {
        line,
        message: e.to_string(),
    })
}
