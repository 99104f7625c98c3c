//! Synthetic genomes and in-silico insertions with recorded ground truth.

use std::io::{self, BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::pipeline::{sample_fragments, PipelineError, SamplingPlan};
use crate::sensors::base_index;
use crate::seqio::{NucleotideSequence, SeqError};

pub const DEFAULT_MARKOV_ORDER: usize = 3;
const BASES: [u8; 4] = *b"ACGT";

#[derive(Debug, Error)]
pub enum SimError {
    #[error("sequence {id:?} has no clean {need}-mer to fit an order-{order} chain")]
    TooShort { id: String, order: usize, need: usize },
    #[error("invalid Markov model: {0}")]
    InvalidModel(String),
    #[error("insert position {position} beyond acceptor length {len}")]
    OutOfBounds { position: usize, len: usize },
    #[error("malformed truth record: {0}")]
    Truth(String),
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Sequence(#[from] SeqError),
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Order-k Markov chain over `A, C, G, T`.
///
/// Contexts are encoded base-4 with the oldest base most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    order: usize,
    transitions: Vec<[f64; 4]>,
    initial: Vec<f64>,
}

fn check_distribution(p: &[f64]) -> bool {
    p.iter().all(|&x| x.is_finite() && x >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-12
}

impl MarkovModel {
    pub fn new(order: usize, transitions: Vec<[f64; 4]>, initial: Vec<f64>) -> Result<Self, SimError> {
        let contexts = 4usize.pow(order as u32);
        if transitions.len() != contexts || initial.len() != contexts {
            return Err(SimError::InvalidModel(format!(
                "order {order} needs {contexts} contexts"
            )));
        }
        if !transitions.iter().all(|p| check_distribution(p)) || !check_distribution(&initial) {
            return Err(SimError::InvalidModel(
                "probability vectors must be non-negative and sum to 1".into(),
            ));
        }
        Ok(Self {
            order,
            transitions,
            initial,
        })
    }

    /// Order-0 chain with the given G+C probability, split evenly within pairs.
    pub fn with_gc(gc: f64) -> Result<Self, SimError> {
        if !(0.0..=1.0).contains(&gc) {
            return Err(SimError::InvalidModel(format!("gc {gc} outside [0, 1]")));
        }
        let at = (1.0 - gc) / 2.0;
        Self::new(0, vec![[at, gc / 2.0, gc / 2.0, at]], vec![1.0])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn transitions(&self) -> &[[f64; 4]] {
        &self.transitions
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    /// Successor distribution for a context given as bases (length = order).
    pub fn successor_probs(&self, context: &[u8]) -> Option<[f64; 4]> {
        encode_context(context).map(|c| self.transitions[c])
    }
}

fn encode_context(bases: &[u8]) -> Option<usize> {
    bases
        .iter()
        .try_fold(0usize, |acc, &b| Some(acc * 4 + base_index(b)?))
}

/// Transition counts from every clean (k+1)-mer, with add-one smoothing.
/// The initial distribution is the observed clean k-mer frequency.
pub fn fit_markov(seq: &NucleotideSequence, order: usize) -> Result<MarkovModel, SimError> {
    let contexts = 4usize.pow(order as u32);
    let mut counts = vec![[0u64; 4]; contexts];
    let mut kmers = vec![0u64; contexts];
    let residues = seq.residues();

    let mut observed = 0u64;
    for w in residues.windows(order + 1) {
        if let (Some(ctx), Some(next)) = (encode_context(&w[..order]), base_index(w[order])) {
            counts[ctx][next] += 1;
            observed += 1;
        }
    }
    if observed == 0 {
        return Err(SimError::TooShort {
            id: seq.id().to_string(),
            order,
            need: order + 1,
        });
    }
    if order == 0 {
        kmers[0] = 1;
    } else {
        for w in residues.windows(order) {
            if let Some(ctx) = encode_context(w) {
                kmers[ctx] += 1;
            }
        }
    }
    let transitions = counts
        .iter()
        .map(|c| {
            let total = c.iter().sum::<u64>() as f64 + 4.0;
            c.map(|n| (n as f64 + 1.0) / total)
        })
        .collect();
    let total_kmers = kmers.iter().sum::<u64>() as f64;
    let initial = kmers.iter().map(|&n| n as f64 / total_kmers).collect();
    Ok(MarkovModel {
        order,
        transitions,
        initial,
    })
}

fn draw(rng: &mut ChaCha8Rng, probs: &[f64]) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // rounding left u above the cumulative sum; take the last non-zero entry
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(0)
}

/// Samples `length` bases from the chain; deterministic per seed.
pub fn generate(model: &MarkovModel, length: usize, seed: u64, id: &str) -> NucleotideSequence {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = model.order;
    let mut out = Vec::with_capacity(length);
    if length == 0 {
        return NucleotideSequence::from_normalized(id, out);
    }
    let mut ctx = draw(&mut rng, &model.initial);
    for pos in (0..k).rev() {
        out.push(BASES[(ctx >> (2 * pos)) & 3]);
    }
    out.truncate(length);
    let mask = if k == 0 { 0 } else { 4usize.pow(k as u32) - 1 };
    if k == 0 {
        ctx = 0;
    }
    while out.len() < length {
        let next = draw(&mut rng, &model.transitions[ctx]);
        out.push(BASES[next]);
        ctx = (ctx * 4 + next) & mask;
    }
    NucleotideSequence::from_normalized(id, out)
}

/// Ground truth for one in-silico insertion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InsertionRecord {
    pub acceptor_id: String,
    pub donor_id: String,
    pub insert_position: usize,
    pub insert_length: usize,
}

impl InsertionRecord {
    /// Inserted interval in chimera coordinates, end exclusive.
    pub fn interval(&self) -> (usize, usize) {
        (self.insert_position, self.insert_position + self.insert_length)
    }

    pub fn write_tsv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "acceptor_id\tdonor_id\tinsert_position\tinsert_length")?;
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            self.acceptor_id, self.donor_id, self.insert_position, self.insert_length
        )
    }

    /// Reads the first data row, skipping `#` comments and the header.
    pub fn read_tsv<R: BufRead>(input: R) -> Result<Self, SimError> {
        let mut header_seen = false;
        for line in input.lines() {
            let line = line?;
            let line = line.trim_end_matches('\r');
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if !header_seen {
                if line != "acceptor_id\tdonor_id\tinsert_position\tinsert_length" {
                    return Err(SimError::Truth(format!("unexpected header {line:?}")));
                }
                header_seen = true;
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != 4 {
                return Err(SimError::Truth(format!("expected 4 fields, got {}", f.len())));
            }
            let num = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| SimError::Truth(format!("bad integer {s:?}")))
            };
            return Ok(Self {
                acceptor_id: f[0].to_string(),
                donor_id: f[1].to_string(),
                insert_position: num(f[2])?,
                insert_length: num(f[3])?,
            });
        }
        Err(SimError::Truth("no data row".into()))
    }
}

/// `acceptor[..position] + fragment + acceptor[position..]`.
pub fn insert_fragment(
    acceptor: &NucleotideSequence,
    fragment: &NucleotideSequence,
    position: usize,
) -> Result<(NucleotideSequence, InsertionRecord), SimError> {
    if position > acceptor.len() {
        return Err(SimError::OutOfBounds {
            position,
            len: acceptor.len(),
        });
    }
    let a = acceptor.residues();
    let mut residues = Vec::with_capacity(a.len() + fragment.len());
    residues.extend_from_slice(&a[..position]);
    residues.extend_from_slice(fragment.residues());
    residues.extend_from_slice(&a[position..]);
    let chimera = NucleotideSequence::from_normalized(
        format!("{}+{}@{}", acceptor.id(), fragment.id(), position),
        residues,
    );
    let record = InsertionRecord {
        acceptor_id: acceptor.id().to_string(),
        donor_id: fragment.id().to_string(),
        insert_position: position,
        insert_length: fragment.len(),
    };
    Ok((chimera, record))
}

#[derive(Debug, Clone)]
pub struct ExperimentBundle {
    pub chimera: NucleotideSequence,
    pub truth: InsertionRecord,
    /// Where the inserted fragment was taken from in the donor.
    pub donor_start: usize,
}

/// Picks a random clean donor fragment and inserts it into the acceptor,
/// at its midpoint unless `position` is given.
pub fn make_experiment(
    donor: &NucleotideSequence,
    acceptor: &NucleotideSequence,
    insert_length: usize,
    position: Option<usize>,
    seed: u64,
) -> Result<ExperimentBundle, SimError> {
    let plan = SamplingPlan {
        fragments_per_genome: 1,
        fragment_length: insert_length,
        seed,
        max_resample_attempts: None,
    };
    let donor_start = sample_fragments(donor, &plan)?[0];
    let fragment = NucleotideSequence::from_normalized(
        donor.id(),
        donor.window_at(donor_start, insert_length)?.as_bytes().to_vec(),
    );
    let position = position.unwrap_or(acceptor.len() / 2);
    let (chimera, truth) = insert_fragment(acceptor, &fragment, position)?;
    Ok(ExperimentBundle {
        chimera,
        truth,
        donor_start,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn seq(s: &str) -> NucleotideSequence {
        NucleotideSequence::new("s", s.as_bytes())
    }

    #[test]
    fn order0_smoothing() {
        let m = fit_markov(&seq("GGGGCCCC"), 0).unwrap();
        let p = m.transitions()[0];
        assert!((p[1] - 5.0 / 12.0).abs() < 1e-15 && (p[2] - 5.0 / 12.0).abs() < 1e-15);
        assert!((p[0] - 1.0 / 12.0).abs() < 1e-15 && (p[3] - 1.0 / 12.0).abs() < 1e-15);
        let m = fit_markov(&seq("AAAA"), 0).unwrap();
        assert_eq!(m.transitions()[0], [5.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0, 1.0 / 8.0]);
    }

    #[test]
    fn fit_skips_invalid_contexts() {
        let m = fit_markov(&seq("ANAAC"), 1).unwrap();
        // only A->A and A->C are clean pairs
        assert_eq!(m.successor_probs(b"A").unwrap(), [2.0 / 6.0, 2.0 / 6.0, 1.0 / 6.0, 1.0 / 6.0]);
        assert_eq!(m.successor_probs(b"C").unwrap(), [0.25; 4]);
        assert!(matches!(fit_markov(&seq("ANA"), 1), Err(SimError::TooShort { .. })));
        assert!(matches!(fit_markov(&seq("AC"), 2), Err(SimError::TooShort { .. })));
    }

    #[test]
    fn fitted_mode_matches_count_mode() {
        let g = generate(&MarkovModel::with_gc(0.6).unwrap(), 5_000, 3, "x");
        let m = fit_markov(&g, 2).unwrap();
        let r = g.residues();
        for ctx in 0..16usize {
            let c = [BASES[ctx / 4], BASES[ctx % 4]];
            let mut counts = [0u32; 4];
            for w in r.windows(3) {
                if w[..2] == c {
                    counts[base_index(w[2]).unwrap()] += 1;
                }
            }
            let p = m.successor_probs(&c).unwrap();
            let max_count = *counts.iter().max().unwrap();
            let argmax_p = (0..4).max_by(|&a, &b| p[a].total_cmp(&p[b])).unwrap();
            assert_eq!(counts[argmax_p], max_count);
        }
    }

    #[test]
    fn fitted_vectors_normalized() {
        let g = generate(&MarkovModel::with_gc(0.4).unwrap(), 20_000, 4, "x");
        for order in 0..=4 {
            let m = fit_markov(&g, order).unwrap();
            assert!(m.transitions().iter().all(|p| check_distribution(p)));
            assert!(check_distribution(m.initial()));
            assert!(MarkovModel::new(order, m.transitions().to_vec(), m.initial().to_vec()).is_ok());
        }
    }

    #[test]
    fn generate_gc_concentration() {
        let m = MarkovModel::with_gc(0.7).unwrap();
        let g = generate(&m, 100_000, 1, "g");
        let gc = g.residues().iter().filter(|&&b| b == b'G' || b == b'C').count() as f64 / 1e5;
        assert!((0.69..=0.71).contains(&gc), "{gc}");
    }

    #[test]
    fn generate_determinism_and_edges() {
        let m = fit_markov(&generate(&MarkovModel::with_gc(0.5).unwrap(), 1000, 9, "t"), 3).unwrap();
        let a = generate(&m, 500, 5, "a");
        assert_eq!(a, generate(&m, 500, 5, "a"));
        assert_ne!(a, generate(&m, 500, 6, "a"));
        assert!(a.as_window().is_clean());
        assert_eq!(generate(&m, 0, 5, "e").len(), 0);
        assert_eq!(generate(&m, 2, 5, "e").len(), 2);
    }

    /// Chi-square goodness of fit of (context, successor) counts against the chain.
    fn chi_square(model: &MarkovModel, g: &NucleotideSequence) -> (f64, f64) {
        let k = model.order();
        let contexts = 4usize.pow(k as u32);
        let mut counts = vec![[0u64; 4]; contexts];
        for w in g.residues().windows(k + 1) {
            let ctx = encode_context(&w[..k]).unwrap();
            counts[ctx][base_index(w[k]).unwrap()] += 1;
        }
        let mut stat = 0.0;
        for (ctx, c) in counts.iter().enumerate() {
            let n: u64 = c.iter().sum();
            for b in 0..4 {
                let expected = n as f64 * model.transitions()[ctx][b];
                stat += (c[b] as f64 - expected).powi(2) / expected;
            }
        }
        (stat, (contexts * 3) as f64)
    }

    #[test]
    fn generated_statistics_converge() {
        let template = generate(&MarkovModel::with_gc(0.45).unwrap(), 50_000, 21, "t");
        for order in 0..=2 {
            let model = fit_markov(&template, order).unwrap();
            let g = generate(&model, 1_000_000, 100 + order as u64, "g");
            let (stat, df) = chi_square(&model, &g);
            let q999 = ChiSquared::new(df).unwrap().inverse_cdf(0.999);
            assert!(stat < q999, "order {order}: {stat} >= {q999}");
        }
    }

    #[test]
    fn insertion_arithmetic() {
        let acc = NucleotideSequence::new("acc", b"AAAAAAAA");
        let frag = NucleotideSequence::new("don", b"CGC");
        let (c, r) = insert_fragment(&acc, &frag, 0).unwrap();
        assert_eq!(c.residues(), b"CGCAAAAAAAA");
        assert_eq!(r.insert_position, 0);
        let (c, _) = insert_fragment(&acc, &frag, 8).unwrap();
        assert_eq!(c.residues(), b"AAAAAAAACGC");
        let (c, r) = insert_fragment(&acc, &frag, 3).unwrap();
        assert_eq!(c.len(), 11);
        assert_eq!(c.window_at(3, 3).unwrap().as_bytes(), b"CGC");
        assert_eq!(&c.residues()[..3], &acc.residues()[..3]);
        assert_eq!(&c.residues()[6..], &acc.residues()[3..]);
        assert_eq!(r.interval(), (3, 6));
        assert!(matches!(insert_fragment(&acc, &frag, 9), Err(SimError::OutOfBounds { .. })));
    }

    #[test]
    fn experiment_defaults_and_truth_round_trip() {
        let d = generate(&MarkovModel::with_gc(0.6).unwrap(), 10_000, 1, "donor");
        let a = generate(&MarkovModel::with_gc(0.4).unwrap(), 20_001, 2, "acceptor");
        let b = make_experiment(&d, &a, 500, None, 7).unwrap();
        assert_eq!(b.truth.insert_position, 10_000);
        assert_eq!(b.truth.insert_length, 500);
        assert_eq!(b.chimera.len(), 20_501);
        assert_eq!(
            b.chimera.window_at(10_000, 500).unwrap(),
            d.window_at(b.donor_start, 500).unwrap()
        );
        let again = make_experiment(&d, &a, 500, None, 7).unwrap();
        assert_eq!(again.chimera, b.chimera);

        let mut buf = Vec::new();
        b.truth.write_tsv(&mut buf).unwrap();
        let mut commented = b"# comment\n".to_vec();
        commented.extend_from_slice(&buf);
        assert_eq!(InsertionRecord::read_tsv(&commented[..]).unwrap(), b.truth);
        assert!(InsertionRecord::read_tsv(&b"bad\n"[..]).is_err());
    }
}
