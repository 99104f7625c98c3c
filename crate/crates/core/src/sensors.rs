//! The eight window sensors and their rolling evaluation.
//!
//! Component order is fixed: `[gc, cpg, d_yr, d_ws, d_mk, f_h, f_i, f_v]`.
//!
//! * `gc`, `cpg`: G+C fraction over residues, CG fraction over dimer steps.
//! * `d_*`: dimer-correlation index of the window after binary encoding
//!   (purine/pyrimidine, strong/weak, keto/amino).
//! * `f_h`, `f_i`, `f_v`: fractions of dimer steps in the high, intermediate
//!   and variable twist classes. The low-twist fraction is the remainder.
//!
//! Dimer-based quantities divide by `length - 1`, the number of steps.

use rayon::prelude::*;
use thiserror::Error;

use crate::seqio::{NucleotideSequence, Window, WindowSpec};

pub const SENSOR_COUNT: usize = 8;
pub const SENSOR_NAMES: [&str; SENSOR_COUNT] =
    ["gc", "cpg", "d_yr", "d_ws", "d_mk", "f_h", "f_i", "f_v"];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SensorError {
    #[error("window contains non-ACGT positions")]
    Unclean,
    #[error("window of length {len} is too short (need at least {min})")]
    TooShort { len: usize, min: usize },
    #[error("sequence of length {seq_len} is shorter than one window of {window}")]
    SequenceTooShort { seq_len: usize, window: usize },
}

/// Base index in `A, C, G, T` order; `None` for the invalid marker.
#[inline]
pub fn base_index(b: u8) -> Option<usize> {
    match b {
        b'A' => Some(0),
        b'C' => Some(1),
        b'G' => Some(2),
        b'T' => Some(3),
        _ => None,
    }
}

const C: usize = 1;
const G: usize = 2;

/// Two-letter binary alphabets. The symbol mapped to 1 is R, S or K.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinaryEncoding {
    /// Purine (A, G) = 1, pyrimidine (C, T) = 0.
    YR,
    /// Strong (G, C) = 1, weak (A, T) = 0.
    WS,
    /// Keto (G, T) = 1, amino (A, C) = 0.
    MK,
}

impl BinaryEncoding {
    pub const ALL: [BinaryEncoding; 3] = [BinaryEncoding::YR, BinaryEncoding::WS, BinaryEncoding::MK];

    /// Bits indexed by `A, C, G, T`.
    const fn table(self) -> [u8; 4] {
        match self {
            BinaryEncoding::YR => [1, 0, 1, 0],
            BinaryEncoding::WS => [0, 1, 1, 0],
            BinaryEncoding::MK => [0, 0, 1, 1],
        }
    }

    pub fn class_of(self, base: u8) -> Option<u8> {
        base_index(base).map(|i| self.table()[i])
    }

    pub fn name(self) -> &'static str {
        match self {
            BinaryEncoding::YR => "YR",
            BinaryEncoding::WS => "WS",
            BinaryEncoding::MK => "MK",
        }
    }
}

/// Twist-profile class of a dinucleotide step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TwistClass {
    High,
    Low,
    Intermediate,
    Variable,
}

impl TwistClass {
    pub fn symbol(self) -> char {
        match self {
            TwistClass::High => 'H',
            TwistClass::Low => 'L',
            TwistClass::Intermediate => 'I',
            TwistClass::Variable => 'V',
        }
    }

    fn slot(self) -> usize {
        match self {
            TwistClass::High => 0,
            TwistClass::Low => 1,
            TwistClass::Intermediate => 2,
            TwistClass::Variable => 3,
        }
    }
}

use TwistClass::{High as H, Intermediate as I, Low as L, Variable as V};

/// Rows: first base, columns: second base, both in `A, C, G, T` order.
const TWIST_TABLE: [[TwistClass; 4]; 4] = [
    [L, I, L, I],
    [V, L, V, L],
    [H, H, L, I],
    [V, H, V, L],
];

/// Class of the step `first -> second`, `None` if either base is invalid.
pub fn twist_class(first: u8, second: u8) -> Option<TwistClass> {
    Some(TWIST_TABLE[base_index(first)?][base_index(second)?])
}

/// Pair and symbol tallies of a binary-encoded window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DimerCounts {
    pub n00: u64,
    pub n01: u64,
    pub n10: u64,
    pub n11: u64,
    pub n0: u64,
    pub n1: u64,
}

impl DimerCounts {
    /// Tallies a sequence of 0/1 symbols.
    pub fn from_bits(bits: &[u8]) -> Self {
        let mut c = DimerCounts::default();
        for &b in bits {
            if b == 0 {
                c.n0 += 1;
            } else {
                c.n1 += 1;
            }
        }
        for pair in bits.windows(2) {
            match (pair[0] != 0, pair[1] != 0) {
                (false, false) => c.n00 += 1,
                (false, true) => c.n01 += 1,
                (true, false) => c.n10 += 1,
                (true, true) => c.n11 += 1,
            }
        }
        c
    }

    /// `(N00·N11 − N10·N01) / (N0·N1)`, or 0 when one symbol is absent.
    pub fn index(&self) -> f64 {
        if self.n0 == 0 || self.n1 == 0 {
            return 0.0;
        }
        let num = (self.n00 * self.n11) as i128 - (self.n10 * self.n01) as i128;
        num as f64 / (self.n0 * self.n1) as f64
    }
}

/// Eight sensor values for one window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorVector(pub [f64; SENSOR_COUNT]);

impl SensorVector {
    pub fn as_array(&self) -> &[f64; SENSOR_COUNT] {
        &self.0
    }
    pub fn gc(&self) -> f64 {
        self.0[0]
    }
    pub fn cpg(&self) -> f64 {
        self.0[1]
    }
    pub fn heterogeneity(&self, enc: BinaryEncoding) -> f64 {
        match enc {
            BinaryEncoding::YR => self.0[2],
            BinaryEncoding::WS => self.0[3],
            BinaryEncoding::MK => self.0[4],
        }
    }
    /// `(f_h, f_i, f_v)`
    pub fn twist(&self) -> (f64, f64, f64) {
        (self.0[5], self.0[6], self.0[7])
    }
}

fn check_dimer_window(w: &Window<'_>) -> Result<(), SensorError> {
    if w.len() < 2 {
        return Err(SensorError::TooShort { len: w.len(), min: 2 });
    }
    if !w.is_clean() {
        return Err(SensorError::Unclean);
    }
    Ok(())
}

pub fn gc_content(w: Window<'_>) -> Result<f64, SensorError> {
    if w.is_empty() {
        return Err(SensorError::TooShort { len: 0, min: 1 });
    }
    if !w.is_clean() {
        return Err(SensorError::Unclean);
    }
    let gc = w
        .as_bytes()
        .iter()
        .filter(|&&b| b == b'G' || b == b'C')
        .count();
    Ok(gc as f64 / w.len() as f64)
}

pub fn cpg_content(w: Window<'_>) -> Result<f64, SensorError> {
    check_dimer_window(&w)?;
    let cg = w.as_bytes().windows(2).filter(|p| p == b"CG").count();
    Ok(cg as f64 / (w.len() - 1) as f64)
}

pub fn heterogeneity_index(w: Window<'_>, enc: BinaryEncoding) -> Result<f64, SensorError> {
    check_dimer_window(&w)?;
    let bits: Vec<u8> = w
        .as_bytes()
        .iter()
        .map(|&b| enc.class_of(b).expect("clean window"))
        .collect();
    Ok(DimerCounts::from_bits(&bits).index())
}

/// Counts of H, L, I, V steps in that order.
pub fn twist_counts(w: Window<'_>) -> Result<[usize; 4], SensorError> {
    check_dimer_window(&w)?;
    let mut counts = [0usize; 4];
    for p in w.as_bytes().windows(2) {
        counts[twist_class(p[0], p[1]).expect("clean window").slot()] += 1;
    }
    Ok(counts)
}

/// `(f_h, f_i, f_v)` over all dimer steps of the window.
pub fn twist_fractions(w: Window<'_>) -> Result<(f64, f64, f64), SensorError> {
    let [h, _, i, v] = twist_counts(w)?;
    let steps = (w.len() - 1) as f64;
    Ok((h as f64 / steps, i as f64 / steps, v as f64 / steps))
}

/// Evaluates all eight sensors on one window, each from its own definition.
pub fn sensor_vector(w: Window<'_>) -> Result<SensorVector, SensorError> {
    check_dimer_window(&w)?;
    let (fh, fi, fv) = twist_fractions(w)?;
    Ok(SensorVector([
        gc_content(w)?,
        cpg_content(w)?,
        heterogeneity_index(w, BinaryEncoding::YR)?,
        heterogeneity_index(w, BinaryEncoding::WS)?,
        heterogeneity_index(w, BinaryEncoding::MK)?,
        fh,
        fi,
        fv,
    ]))
}

/// One row of a sensor track. `sensors` is `None` for windows with invalid positions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorRecord {
    pub start: usize,
    pub sensors: Option<SensorVector>,
}

/// Symbol and dinucleotide counts for the window under the cursor.
///
/// Everything a sensor needs is a linear function of these counts, so the
/// window can advance by adjusting O(step) entries.
#[derive(Debug, Clone, Default)]
struct RollingCounts {
    bases: [u64; 4],
    invalid: u64,
    dimers: [u64; 16],
}

impl RollingCounts {
    #[inline]
    fn add_base(&mut self, b: u8, sign: i64) {
        match base_index(b) {
            Some(i) => self.bases[i] = self.bases[i].wrapping_add_signed(sign),
            None => self.invalid = self.invalid.wrapping_add_signed(sign),
        }
    }

    #[inline]
    fn add_pair(&mut self, a: u8, b: u8, sign: i64) {
        if let (Some(i), Some(j)) = (base_index(a), base_index(b)) {
            let k = i * 4 + j;
            self.dimers[k] = self.dimers[k].wrapping_add_signed(sign);
        }
    }

    fn load(residues: &[u8]) -> Self {
        let mut c = RollingCounts::default();
        for &b in residues {
            c.add_base(b, 1);
        }
        for p in residues.windows(2) {
            c.add_pair(p[0], p[1], 1);
        }
        c
    }

    /// Moves the window from `old_start` to `new_start` (both of width `len`).
    fn advance(&mut self, seq: &[u8], old_start: usize, new_start: usize, len: usize) {
        debug_assert!(new_start > old_start && new_start - old_start <= len);
        let old_end = old_start + len;
        let new_end = new_start + len;
        for p in old_start..new_start {
            self.add_base(seq[p], -1);
        }
        for p in old_start..new_start.min(old_end - 1) {
            self.add_pair(seq[p], seq[p + 1], -1);
        }
        for p in old_end..new_end {
            self.add_base(seq[p], 1);
        }
        for p in (old_end - 1).max(new_start)..new_end - 1 {
            self.add_pair(seq[p], seq[p + 1], 1);
        }
    }

    fn sensors(&self, len: usize) -> Option<SensorVector> {
        if self.invalid > 0 {
            return None;
        }
        let steps = (len - 1) as f64;
        let gc = (self.bases[C] + self.bases[G]) as f64 / len as f64;
        let cpg = self.dimers[C * 4 + G] as f64 / steps;

        let mut out = [0.0; SENSOR_COUNT];
        out[0] = gc;
        out[1] = cpg;
        for (slot, enc) in BinaryEncoding::ALL.iter().enumerate() {
            let bit = enc.table();
            let mut c = DimerCounts::default();
            for (i, &n) in self.bases.iter().enumerate() {
                if bit[i] == 0 {
                    c.n0 += n;
                } else {
                    c.n1 += n;
                }
            }
            for i in 0..4 {
                for j in 0..4 {
                    let n = self.dimers[i * 4 + j];
                    match (bit[i], bit[j]) {
                        (0, 0) => c.n00 += n,
                        (0, _) => c.n01 += n,
                        (_, 0) => c.n10 += n,
                        _ => c.n11 += n,
                    }
                }
            }
            out[2 + slot] = c.index();
        }
        let mut classes = [0u64; 4];
        for i in 0..4 {
            for j in 0..4 {
                classes[TWIST_TABLE[i][j].slot()] += self.dimers[i * 4 + j];
            }
        }
        out[5] = classes[H.slot()] as f64 / steps;
        out[6] = classes[I.slot()] as f64 / steps;
        out[7] = classes[V.slot()] as f64 / steps;
        debug_assert_eq!(classes.iter().sum::<u64>(), (len - 1) as u64);
        Some(SensorVector(out))
    }
}

fn check_scan(seq: &NucleotideSequence, spec: WindowSpec) -> Result<usize, SensorError> {
    let n = spec.window_count(seq.len());
    if n == 0 {
        return Err(SensorError::SequenceTooShort {
            seq_len: seq.len(),
            window: spec.length(),
        });
    }
    Ok(n)
}

/// Sensor records for window ordinals `[first, last)`.
fn scan_range(residues: &[u8], spec: WindowSpec, first: usize, last: usize) -> Vec<SensorRecord> {
    let len = spec.length();
    let step = spec.step();
    let mut out = Vec::with_capacity(last - first);
    if first >= last {
        return out;
    }
    let mut start = first * step;
    let mut counts = RollingCounts::load(&residues[start..start + len]);
    out.push(SensorRecord {
        start,
        sensors: counts.sensors(len),
    });
    for _ in first + 1..last {
        let next = start + step;
        counts.advance(residues, start, next, len);
        start = next;
        out.push(SensorRecord {
            start,
            sensors: counts.sensors(len),
        });
    }
    out
}

/// Slides `spec` along `seq`, updating counts incrementally.
///
/// Produces one record per start in `0, step, 2·step, …` with `start + length ≤ len`.
pub fn rolling_scan(
    seq: &NucleotideSequence,
    spec: WindowSpec,
) -> Result<Vec<SensorRecord>, SensorError> {
    let n = check_scan(seq, spec)?;
    Ok(scan_range(seq.residues(), spec, 0, n))
}

const PAR_CHUNK_WINDOWS: usize = 2048;

/// Same output as [`rolling_scan`], computed over window chunks in parallel.
pub fn rolling_scan_par(
    seq: &NucleotideSequence,
    spec: WindowSpec,
) -> Result<Vec<SensorRecord>, SensorError> {
    let n = check_scan(seq, spec)?;
    let chunks: Vec<(usize, usize)> = (0..n)
        .step_by(PAR_CHUNK_WINDOWS)
        .map(|s| (s, (s + PAR_CHUNK_WINDOWS).min(n)))
        .collect();
    let parts: Vec<Vec<SensorRecord>> = chunks
        .into_par_iter()
        .map(|(a, b)| scan_range(seq.residues(), spec, a, b))
        .collect();
    Ok(parts.into_iter().flatten().collect())
}
