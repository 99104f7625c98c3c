//! FASTA ingestion and window access over validated nucleotide sequences.
//!
//! Residues are stored as uppercase ASCII. Anything outside `A`, `C`, `G`, `T`
//! (IUPAC ambiguity codes, gaps, stray punctuation) collapses to the single
//! invalid marker [`INVALID`].

use std::io::{BufRead, Write};

use thiserror::Error;

/// Marker stored for every position that is not one of `A`, `C`, `G`, `T`.
pub const INVALID: u8 = b'N';

#[derive(Debug, Error)]
pub enum SeqError {
    #[error("no records in FASTA input")]
    NoRecords,
    #[error("malformed FASTA at line {line}: {reason}")]
    Malformed { line: usize, reason: String },
    #[error("window [{start}, {start}+{length}) out of bounds for sequence of length {seq_len}")]
    OutOfBounds {
        start: usize,
        length: usize,
        seq_len: usize,
    },
    #[error("invalid window spec: {0}")]
    InvalidWindowSpec(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// Map a raw input byte to its normalized residue.
#[inline]
pub fn normalize_base(b: u8) -> u8 {
    match b.to_ascii_uppercase() {
        c @ (b'A' | b'C' | b'G' | b'T') => c,
        _ => INVALID,
    }
}

/// A parsed DNA record. Residues are normalized and immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NucleotideSequence {
    id: String,
    residues: Vec<u8>,
}

impl NucleotideSequence {
    /// Builds a sequence from raw bytes, normalizing case and ambiguity codes.
    pub fn new(id: impl Into<String>, raw: &[u8]) -> Self {
        Self {
            id: id.into(),
            residues: raw.iter().map(|&b| normalize_base(b)).collect(),
        }
    }

    /// Takes ownership of already-normalized residues.
    pub(crate) fn from_normalized(id: impl Into<String>, residues: Vec<u8>) -> Self {
        debug_assert!(residues
            .iter()
            .all(|&b| matches!(b, b'A' | b'C' | b'G' | b'T' | INVALID)));
        Self {
            id: id.into(),
            residues,
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn residues(&self) -> &[u8] {
        &self.residues
    }

    pub fn len(&self) -> usize {
        self.residues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.residues.is_empty()
    }

    /// Returns the residues `[start, start + length)`.
    pub fn window_at(&self, start: usize, length: usize) -> Result<Window<'_>, SeqError> {
        match start.checked_add(length) {
            Some(end) if end <= self.residues.len() => Ok(Window(&self.residues[start..end])),
            _ => Err(SeqError::OutOfBounds {
                start,
                length,
                seq_len: self.residues.len(),
            }),
        }
    }

    /// The whole sequence as a single window.
    pub fn as_window(&self) -> Window<'_> {
        Window(&self.residues)
    }

    /// Prefix sums of invalid positions: `out[i]` counts invalid residues in `[0, i)`.
    pub fn invalid_prefix_counts(&self) -> Vec<u32> {
        let mut out = Vec::with_capacity(self.residues.len() + 1);
        let mut acc = 0u32;
        out.push(0);
        for &b in &self.residues {
            acc += (b == INVALID) as u32;
            out.push(acc);
        }
        out
    }
}

/// Read-only view of a contiguous run of residues.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window<'a>(&'a [u8]);

impl<'a> Window<'a> {
    /// Wraps bytes that are already normalized (uppercase, invalid marker applied).
    pub fn new(residues: &'a [u8]) -> Self {
        Window(residues)
    }

    pub fn as_bytes(&self) -> &'a [u8] {
        self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// True iff no position carries the invalid marker. Empty windows are clean.
    pub fn is_clean(&self) -> bool {
        is_clean(self.0)
    }
}

/// True iff `residues` holds only `A`, `C`, `G`, `T`.
pub fn is_clean(residues: &[u8]) -> bool {
    residues
        .iter()
        .all(|b| matches!(b, b'A' | b'C' | b'G' | b'T'))
}

/// Window geometry for sliding and sampling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WindowSpec {
    length: usize,
    step: usize,
}

impl WindowSpec {
    pub const DEFAULT_LENGTH: usize = 300;
    pub const DEFAULT_STEP: usize = 30;

    pub fn new(length: usize, step: usize) -> Result<Self, SeqError> {
        if length < 2 {
            return Err(SeqError::InvalidWindowSpec(format!(
                "window length {length} < 2"
            )));
        }
        if step == 0 || step > length {
            return Err(SeqError::InvalidWindowSpec(format!(
                "step {step} must be in [1, {length}]"
            )));
        }
        Ok(Self { length, step })
    }

    pub fn length(&self) -> usize {
        self.length
    }

    pub fn step(&self) -> usize {
        self.step
    }

    /// Number of full windows that fit in a sequence of `seq_len` residues.
    pub fn window_count(&self, seq_len: usize) -> usize {
        if seq_len < self.length {
            0
        } else {
            (seq_len - self.length) / self.step + 1
        }
    }
}

impl Default for WindowSpec {
    fn default() -> Self {
        Self {
            length: Self::DEFAULT_LENGTH,
            step: Self::DEFAULT_STEP,
        }
    }
}

/// Parses FASTA text into normalized sequences.
///
/// Accepts LF or CRLF endings and any line width. Blank lines and legacy
/// `;` comment lines are skipped. The record id is the header text up to
/// the first whitespace.
pub fn parse_fasta<R: BufRead>(mut reader: R) -> Result<Vec<NucleotideSequence>, SeqError> {
    let mut records = Vec::new();
    let mut current: Option<(String, Vec<u8>)> = None;
    let mut line = Vec::new();
    let mut lineno = 0usize;

    loop {
        line.clear();
        if reader.read_until(b'\n', &mut line)? == 0 {
            break;
        }
        lineno += 1;
        let text = trim_line_end(&line);
        if text.is_empty() || text[0] == b';' {
            continue;
        }
        if text[0] == b'>' {
            if let Some((id, residues)) = current.take() {
                records.push(NucleotideSequence::from_normalized(id, residues));
            }
            let header = String::from_utf8_lossy(&text[1..]);
            let id = header.split_whitespace().next().unwrap_or("").to_string();
            current = Some((id, Vec::new()));
        } else {
            let Some((_, residues)) = current.as_mut() else {
                return Err(SeqError::Malformed {
                    line: lineno,
                    reason: "sequence data before the first '>' header".into(),
                });
            };
            residues.extend(
                text.iter()
                    .filter(|b| !b.is_ascii_whitespace())
                    .map(|&b| normalize_base(b)),
            );
        }
    }
    if let Some((id, residues)) = current {
        records.push(NucleotideSequence::from_normalized(id, residues));
    }
    if records.is_empty() {
        return Err(SeqError::NoRecords);
    }
    Ok(records)
}

fn trim_line_end(line: &[u8]) -> &[u8] {
    let mut end = line.len();
    while end > 0 && (line[end - 1] == b'\n' || line[end - 1] == b'\r') {
        end -= 1;
    }
    &line[..end]
}

/// Writes one FASTA record wrapped at `width` residues per line.
pub fn write_fasta<W: Write>(
    mut out: W,
    seq: &NucleotideSequence,
    width: usize,
) -> std::io::Result<()> {
    writeln!(out, ">{}", seq.id())?;
    for chunk in seq.residues().chunks(width.max(1)) {
        out.write_all(chunk)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}
