//! Prediction stage: slide the detector along a sequence, smooth the label
//! track and call donor segments.

use std::io::{self, Write};

use thiserror::Error;

use crate::mlp::{DetectorModel, Label};
use crate::sensors::{rolling_scan_par, SensorError};
use crate::seqio::{NucleotideSequence, WindowSpec};

pub const DEFAULT_SMOOTH_K: usize = 9;
pub const DEFAULT_MIN_SEGMENT_WINDOWS: usize = 10;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScanError {
    #[error(transparent)]
    Sensor(#[from] SensorError),
    #[error("smoothing width must be odd and >= 1, got {0}")]
    EvenSmoothing(usize),
}

/// Classification of one window; `call` is `None` for windows with invalid positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrackPoint {
    pub index: usize,
    pub start: usize,
    pub end: usize,
    pub call: Option<(f64, Label)>,
}

impl TrackPoint {
    pub fn raw(&self) -> Option<f64> {
        self.call.map(|(r, _)| r)
    }

    pub fn label(&self) -> Option<Label> {
        self.call.map(|(_, l)| l)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanTrack {
    pub points: Vec<TrackPoint>,
    pub spec: WindowSpec,
    pub model_id: String,
}

/// A maximal run of donor-labeled windows in nucleotide coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub start_nt: usize,
    pub end_nt: usize,
    pub first_index: usize,
    pub n_windows: usize,
    pub mean_raw: f64,
}

/// Maps a window ordinal to its nucleotide start.
pub fn window_start(index: usize, step: usize) -> usize {
    index * step
}

/// Scans with the model's own window geometry.
pub fn scan(seq: &NucleotideSequence, model: &DetectorModel) -> Result<ScanTrack, ScanError> {
    scan_with_spec(seq, model, model.window)
}

/// Scans with an explicit window geometry (for overriding the model's).
pub fn scan_with_spec(
    seq: &NucleotideSequence,
    model: &DetectorModel,
    spec: WindowSpec,
) -> Result<ScanTrack, ScanError> {
    let records = rolling_scan_par(seq, spec)?;
    let points = records
        .into_iter()
        .enumerate()
        .map(|(index, rec)| TrackPoint {
            index,
            start: rec.start,
            end: rec.start + spec.length(),
            call: rec.sensors.map(|sv| model.classify(&sv)),
        })
        .collect();
    Ok(ScanTrack {
        points,
        spec,
        model_id: model.model_id(),
    })
}

/// Majority vote over a centered neighborhood of `k` points.
///
/// No-calls neither vote nor get relabeled. Ties keep the original label.
/// Neighborhoods are truncated at the track ends. Raw scores are untouched.
pub fn smooth_track(track: &ScanTrack, k: usize) -> Result<ScanTrack, ScanError> {
    if k == 0 || k % 2 == 0 {
        return Err(ScanError::EvenSmoothing(k));
    }
    let half = k / 2;
    let n = track.points.len();
    // prefix counts of donor and called points
    let mut donors = vec![0usize; n + 1];
    let mut called = vec![0usize; n + 1];
    for (i, p) in track.points.iter().enumerate() {
        donors[i + 1] = donors[i] + (p.label() == Some(Label::Donor)) as usize;
        called[i + 1] = called[i] + p.call.is_some() as usize;
    }
    let points = track
        .points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let Some((raw, label)) = p.call else {
                return *p;
            };
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(n);
            let d = donors[hi] - donors[lo];
            let votes = called[hi] - called[lo];
            let a = votes - d;
            let smoothed = match d.cmp(&a) {
                std::cmp::Ordering::Greater => Label::Donor,
                std::cmp::Ordering::Less => Label::Acceptor,
                std::cmp::Ordering::Equal => label,
            };
            TrackPoint {
                call: Some((raw, smoothed)),
                ..*p
            }
        })
        .collect();
    Ok(ScanTrack {
        points,
        spec: track.spec,
        model_id: track.model_id.clone(),
    })
}

/// Maximal donor runs of at least `min_windows` points. No-calls break runs.
pub fn call_segments(track: &ScanTrack, min_windows: usize) -> Vec<Segment> {
    let mut segments = Vec::new();
    let mut run: Vec<&TrackPoint> = Vec::new();
    let mut flush = |run: &mut Vec<&TrackPoint>| {
        if !run.is_empty() && run.len() >= min_windows {
            let first = run[0];
            let last = run[run.len() - 1];
            let mean_raw = run.iter().filter_map(|p| p.raw()).sum::<f64>() / run.len() as f64;
            segments.push(Segment {
                start_nt: first.start,
                end_nt: last.end,
                first_index: first.index,
                n_windows: run.len(),
                mean_raw,
            });
        }
        run.clear();
    };
    for p in &track.points {
        if p.label() == Some(Label::Donor) {
            run.push(p);
        } else {
            flush(&mut run);
        }
    }
    flush(&mut run);
    segments
}

/// Track TSV: `index, start, end, raw, label` with `NA` for no-calls.
pub fn write_track_tsv<W: Write>(mut out: W, track: &ScanTrack) -> io::Result<()> {
    writeln!(out, "index\tstart\tend\traw\tlabel")?;
    for p in &track.points {
        match p.call {
            Some((raw, label)) => writeln!(
                out,
                "{}\t{}\t{}\t{:.6}\t{}",
                p.index,
                p.start,
                p.end,
                raw,
                label.as_u8()
            )?,
            None => writeln!(out, "{}\t{}\t{}\tNA\tNA", p.index, p.start, p.end)?,
        }
    }
    Ok(())
}

/// Segments TSV: `start_nt, end_nt, n_windows, mean_raw`.
pub fn write_segments_tsv<W: Write>(mut out: W, segments: &[Segment]) -> io::Result<()> {
    writeln!(out, "start_nt\tend_nt\tn_windows\tmean_raw")?;
    for s in segments {
        writeln!(
            out,
            "{}\t{}\t{}\t{:.6}",
            s.start_nt, s.end_nt, s.n_windows, s.mean_raw
        )?;
    }
    Ok(())
}
