//! Detector models: parity-check matrix, fault priors, logical observables
//! and optional round-block structure.
//!
//! Builders cover data-qubit bit-flip noise, single-shot noisy syndromes
//! (`[H_X | I]`) and multi-round phenomenological noise. Circuit-level models
//! arrive through the line-oriented DEM text format handled by [`parse_dem`]
//! and [`DetectorModel::to_dem_string`].

use std::collections::HashMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::codes::CssCode;
use crate::gf2::{BitVector, Gf2Error, SparseBitMatrix};

/// Smallest prior a model stores; zero probabilities are clamped here.
pub const MIN_PRIOR: f64 = 1e-12;
/// Largest admissible prior.
pub const MAX_PRIOR: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NoiseError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("probability {0} outside (0, 0.5]")]
    Probability(f64),
    #[error("column {column} touches blocks {first}..={last}; at most two consecutive blocks allowed")]
    BlockSpan {
        column: usize,
        first: usize,
        last: usize,
    },
    #[error("{0}")]
    Structure(String),
    #[error(transparent)]
    Gf2(#[from] Gf2Error),
}

/// Round-block layout of the detectors: detector `d` lives in block `d / w`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockStructure {
    pub rounds: usize,
    pub detectors_per_round: usize,
}

impl BlockStructure {
    pub fn block_of(&self, detector: usize) -> usize {
        detector / self.detectors_per_round
    }

    pub fn rows_of(&self, block: usize) -> std::ops::Range<usize> {
        block * self.detectors_per_round..(block + 1) * self.detectors_per_round
    }
}

/// Detectors x faults model with priors and logical observables.
#[derive(Clone, Debug)]
pub struct DetectorModel {
    h: SparseBitMatrix,
    priors: Vec<f64>,
    logicals: SparseBitMatrix,
    blocks: Option<BlockStructure>,
    /// Per column: first and last block touched (equal for single-block columns).
    spans: Vec<(usize, usize)>,
    /// Extra checks the decoded fault must reproduce on the true fault
    /// (used by single-shot models, where `s` itself is noisy).
    verification: Option<SparseBitMatrix>,
}

/// One sampled fault configuration.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FaultSample {
    pub e: BitVector,
    pub s: BitVector,
    pub l: BitVector,
    pub seed: u64,
}

impl DetectorModel {
    /// Validates priors, dimensions and, when blocks are given, the
    /// two-consecutive-block property of every column.
    pub fn new(
        h: SparseBitMatrix,
        priors: Vec<f64>,
        logicals: SparseBitMatrix,
        blocks: Option<BlockStructure>,
    ) -> Result<Self, NoiseError> {
        if priors.len() != h.n_cols() {
            return Err(Gf2Error::DimensionMismatch {
                what: "prior count",
                expected: h.n_cols(),
                found: priors.len(),
            }
            .into());
        }
        if logicals.n_cols() != h.n_cols() {
            return Err(Gf2Error::DimensionMismatch {
                what: "logical matrix columns",
                expected: h.n_cols(),
                found: logicals.n_cols(),
            }
            .into());
        }
        if let Some(&p) = priors.iter().find(|&&p| !(p > 0.0 && p <= MAX_PRIOR)) {
            return Err(NoiseError::Probability(p));
        }
        let mut spans = vec![(0, 0); h.n_cols()];
        if let Some(b) = blocks {
            if b.detectors_per_round == 0 || b.rounds * b.detectors_per_round != h.n_rows() {
                return Err(NoiseError::Structure(format!(
                    "{} detectors do not split into {} rounds of {}",
                    h.n_rows(),
                    b.rounds,
                    b.detectors_per_round
                )));
            }
            for (c, span) in spans.iter_mut().enumerate() {
                let col = h.col(c);
                if let (Some(&lo), Some(&hi)) = (col.first(), col.last()) {
                    let (first, last) = (b.block_of(lo), b.block_of(hi));
                    if last - first > 1 {
                        return Err(NoiseError::BlockSpan {
                            column: c,
                            first,
                            last,
                        });
                    }
                    *span = (first, last);
                }
            }
        }
        Ok(DetectorModel {
            h,
            priors,
            logicals,
            blocks,
            spans,
            verification: None,
        })
    }

    /// Attaches verification checks (same column count as `H`).
    pub fn with_verification(mut self, v: SparseBitMatrix) -> Result<Self, NoiseError> {
        if v.n_cols() != self.h.n_cols() {
            return Err(Gf2Error::DimensionMismatch {
                what: "verification matrix columns",
                expected: self.h.n_cols(),
                found: v.n_cols(),
            }
            .into());
        }
        self.verification = Some(v);
        Ok(self)
    }

    pub fn h(&self) -> &SparseBitMatrix {
        &self.h
    }

    pub fn priors(&self) -> &[f64] {
        &self.priors
    }

    pub fn logicals(&self) -> &SparseBitMatrix {
        &self.logicals
    }

    pub fn blocks(&self) -> Option<BlockStructure> {
        self.blocks
    }

    pub fn verification(&self) -> Option<&SparseBitMatrix> {
        self.verification.as_ref()
    }

    pub fn n_detectors(&self) -> usize {
        self.h.n_rows()
    }

    pub fn n_faults(&self) -> usize {
        self.h.n_cols()
    }

    pub fn n_logicals(&self) -> usize {
        self.logicals.n_rows()
    }

    /// First and last block touched by column `c` (`(0, 0)` without blocks).
    pub fn column_span(&self, c: usize) -> (usize, usize) {
        self.spans[c]
    }

    /// Prior LLRs `log((1-p)/p)`.
    pub fn llrs(&self) -> Vec<f64> {
        self.priors
            .iter()
            .map(|&p| prior_to_llr(p).expect("priors validated at construction"))
            .collect()
    }

    /// Draws `e_i ~ Bernoulli(p_i)` independently from a ChaCha8 stream seeded
    /// with `seed`.
    pub fn sample(&self, seed: u64) -> FaultSample {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = BitVector::zeros(self.n_faults());
        for (i, &p) in self.priors.iter().enumerate() {
            if rng.gen::<f64>() < p {
                e.set(i, true);
            }
        }
        let s = self.h.matvec(&e).expect("length matches");
        let l = self.logicals.matvec(&e).expect("length matches");
        FaultSample { e, s, l, seed }
    }

    /// Canonical DEM text.
    pub fn to_dem_string(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "detectors {}", self.n_detectors());
        let _ = writeln!(out, "logicals {}", self.n_logicals());
        if let Some(b) = self.blocks {
            let _ = writeln!(out, "rounds {} {}", b.rounds, b.detectors_per_round);
        }
        let lt = self.logicals.transpose();
        for c in 0..self.n_faults() {
            let _ = write!(out, "error {}", self.priors[c]);
            for &d in self.h.col(c) {
                let _ = write!(out, " D{d}");
            }
            for &k in lt.row(c) {
                let _ = write!(out, " L{k}");
            }
            out.push('\n');
        }
        out
    }

    /// Merges columns with identical detector, logical (and verification)
    /// supports; priors combine as `p1(1-p2) + p2(1-p1)`. The first occurrence
    /// of each class keeps its position.
    pub fn merge_equivalent_columns(&self) -> DetectorModel {
        let lt = self.logicals.transpose();
        let vt = self.verification.as_ref().map(|v| v.transpose());
        let mut index: HashMap<(&[usize], &[usize], &[usize]), usize> = HashMap::new();
        let mut classes: Vec<usize> = Vec::new();
        let mut priors: Vec<f64> = Vec::new();
        for c in 0..self.n_faults() {
            let key = (
                self.h.col(c),
                lt.row(c),
                vt.as_ref().map_or(&[][..], |v| v.row(c)),
            );
            match index.get(&key) {
                Some(&k) => priors[k] = odd_parity(priors[k], self.priors[c]),
                None => {
                    index.insert(key, classes.len());
                    classes.push(c);
                    priors.push(self.priors[c]);
                }
            }
        }
        let h = self.h.select_columns(&classes);
        let logicals = self.logicals.select_columns(&classes);
        let priors = priors.into_iter().map(clamp_prior).collect();
        let merged = DetectorModel::new(h, priors, logicals, self.blocks)
            .expect("merging preserves model invariants");
        match &self.verification {
            Some(v) => merged
                .with_verification(v.select_columns(&classes))
                .expect("column count matches"),
            None => merged,
        }
    }
}

/// Probability that exactly one of two independent events occurs.
pub fn odd_parity(p1: f64, p2: f64) -> f64 {
    p1 * (1.0 - p2) + p2 * (1.0 - p1)
}

/// Clamps into `[MIN_PRIOR, MAX_PRIOR]`.
pub fn clamp_prior(p: f64) -> f64 {
    p.clamp(MIN_PRIOR, MAX_PRIOR)
}

/// `log((1-p)/p)` for `p` in `(0, 0.5]`.
pub fn prior_to_llr(p: f64) -> Result<f64, NoiseError> {
    if !(p > 0.0 && p <= MAX_PRIOR) {
        return Err(NoiseError::Probability(p));
    }
    Ok(((1.0 - p) / p).ln())
}

fn check_probability(p: f64) -> Result<(), NoiseError> {
    if p.is_nan() || !(0.0..0.5).contains(&p) {
        return Err(NoiseError::Structure(format!(
            "physical error rate {p} outside [0, 0.5)"
        )));
    }
    Ok(())
}

/// i.i.d. bit flips with probability `p_d` on the data qubits, decoded with
/// `H_X`.
pub fn build_data_qubit_model(code: &CssCode, p_d: f64) -> Result<DetectorModel, NoiseError> {
    check_probability(p_d)?;
    let rows = code.hx.n_rows();
    DetectorModel::new(
        code.hx.clone(),
        vec![clamp_prior(p_d); code.n],
        code.lx.clone(),
        Some(BlockStructure {
            rounds: 1,
            detectors_per_round: rows,
        }),
    )
}

/// One noisy syndrome round: `H = [H_X | I]`, data priors `p_d`, syndrome-flip
/// priors `p_s`. The decoded data part must reproduce the true `H_X` syndrome.
pub fn build_single_shot_model(
    code: &CssCode,
    p_d: f64,
    p_s: f64,
) -> Result<DetectorModel, NoiseError> {
    check_probability(p_d)?;
    check_probability(p_s)?;
    if p_s >= p_d {
        log::warn!("single-shot model with p_s = {p_s} >= p_d = {p_d}");
    }
    let w = code.hx.n_rows();
    let h = code.hx.hstack(&SparseBitMatrix::identity(w))?;
    let mut priors = vec![clamp_prior(p_d); code.n];
    priors.extend(std::iter::repeat_n(clamp_prior(p_s), w));
    let logicals = code.lx.hstack(&SparseBitMatrix::zeros(code.k, w))?;
    let verification = code.hx.hstack(&SparseBitMatrix::zeros(w, w))?;
    DetectorModel::new(
        h,
        priors,
        logicals,
        Some(BlockStructure {
            rounds: 1,
            detectors_per_round: w,
        }),
    )?
    .with_verification(verification)
}

/// `rounds` noisy syndrome rounds followed by one noiseless round.
///
/// Columns are ordered round by round: `N` data-fault columns on block `r`,
/// then `w` measurement-fault columns on blocks `r` and `r + 1`.
pub fn build_phenomenological_model(
    code: &CssCode,
    rounds: usize,
    p_d: f64,
    p_s: f64,
) -> Result<DetectorModel, NoiseError> {
    if rounds == 0 {
        return Err(NoiseError::Structure("at least one noisy round required".into()));
    }
    check_probability(p_d)?;
    check_probability(p_s)?;
    let n = code.n;
    let w = code.hx.n_rows();
    let per_round = n + w;
    let mut h_entries = Vec::with_capacity(rounds * (code.hx.nnz() + 2 * w));
    let mut l_entries = Vec::new();
    let mut priors = Vec::with_capacity(rounds * per_round);
    for r in 0..rounds {
        let base = r * per_round;
        for q in 0..n {
            for &row in code.hx.col(q) {
                h_entries.push((r * w + row, base + q));
            }
            for &k in code.lx.col(q) {
                l_entries.push((k, base + q));
            }
            priors.push(clamp_prior(p_d));
        }
        for j in 0..w {
            h_entries.push((r * w + j, base + n + j));
            h_entries.push(((r + 1) * w + j, base + n + j));
            priors.push(clamp_prior(p_s));
        }
    }
    let cols = rounds * per_round;
    let h = SparseBitMatrix::from_entries((rounds + 1) * w, cols, h_entries)?;
    let logicals = SparseBitMatrix::from_entries(code.k, cols, l_entries)?;
    DetectorModel::new(
        h,
        priors,
        logicals,
        Some(BlockStructure {
            rounds: rounds + 1,
            detectors_per_round: w,
        }),
    )
}

/// Parses the DEM text format:
///
/// ```text
/// detectors 4
/// logicals 1
/// rounds 2 2          # optional; detectors must equal rounds * w
/// error 0.01 D0 D2 L0
/// ```
pub fn parse_dem(text: &str) -> Result<DetectorModel, NoiseError> {
    let mut detectors: Option<usize> = None;
    let mut logicals: Option<usize> = None;
    let mut blocks: Option<BlockStructure> = None;
    let mut h_entries = Vec::new();
    let mut l_entries = Vec::new();
    let mut priors = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let err = |message: String| NoiseError::Parse { line, message };
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut tokens = content.split_whitespace();
        let keyword = tokens.next().expect("nonempty line");
        let mut count = |name: &str| -> Result<usize, NoiseError> {
            tokens
                .next()
                .ok_or_else(|| err(format!("missing {name}")))?
                .parse::<usize>()
                .map_err(|e| err(format!("bad {name}: {e}")))
        };
        match keyword {
            "detectors" if detectors.is_none() && priors.is_empty() => {
                detectors = Some(count("detector count")?);
            }
            "logicals" if logicals.is_none() && priors.is_empty() => {
                logicals = Some(count("logical count")?);
            }
            "rounds" if blocks.is_none() && priors.is_empty() => {
                let rounds = count("round count")?;
                let w = count("detectors per round")?;
                blocks = Some(BlockStructure {
                    rounds,
                    detectors_per_round: w,
                });
            }
            "error" => {
                let (Some(nd), Some(nl)) = (detectors, logicals) else {
                    return Err(err("error line before detectors/logicals header".into()));
                };
                let col = priors.len();
                let p_tok = tokens.next().ok_or_else(|| err("missing probability".into()))?;
                let p: f64 = p_tok
                    .parse()
                    .map_err(|e| err(format!("bad probability {p_tok:?}: {e}")))?;
                if !(p > 0.0 && p <= MAX_PRIOR) {
                    return Err(err(format!("probability {p} outside (0, 0.5]")));
                }
                priors.push(p);
                let (mut last_d, mut last_l) = (None, None);
                for tok in tokens {
                    let (kind, idx) = tok.split_at(1);
                    let idx: usize = idx
                        .parse()
                        .map_err(|e| err(format!("bad target {tok:?}: {e}")))?;
                    let (bound, last, entries, row_name) = match kind {
                        "D" => (nd, &mut last_d, &mut h_entries, "detector"),
                        "L" => (nl, &mut last_l, &mut l_entries, "logical"),
                        _ => return Err(err(format!("unknown target {tok:?}"))),
                    };
                    if idx >= bound {
                        return Err(err(format!("{row_name} {idx} out of range (< {bound})")));
                    }
                    if last.is_some_and(|prev| idx <= prev) {
                        return Err(err(format!("{row_name} indices must increase")));
                    }
                    *last = Some(idx);
                    entries.push((idx, col));
                }
            }
            _ => return Err(err(format!("unexpected directive {keyword:?}"))),
        }
    }
    let nd = detectors.ok_or(NoiseError::Parse {
        line: 0,
        message: "missing `detectors` header".into(),
    })?;
    let nl = logicals.ok_or(NoiseError::Parse {
        line: 0,
        message: "missing `logicals` header".into(),
    })?;
    let h = SparseBitMatrix::from_entries(nd, priors.len(), h_entries)?;
    let l = SparseBitMatrix::from_entries(nl, priors.len(), l_entries)?;
    DetectorModel::new(h, priors, l, blocks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::{bb288, CssCode};

    fn toy_code() -> CssCode {
        // three-bit repetition code: H_X 2x3, no Z checks, one logical
        let hx = SparseBitMatrix::from_rows(3, &[vec![0, 1], vec![1, 2]]).unwrap();
        let hz = SparseBitMatrix::zeros(0, 3);
        CssCode::from_checks(hx, hz, None, "toy".into()).unwrap()
    }

    #[test]
    fn llr_values() {
        assert_eq!(prior_to_llr(0.5).unwrap(), 0.0);
        assert!((prior_to_llr(0.01).unwrap() - 4.59512).abs() < 1e-5);
        let p = 1.0 / (1.0 + std::f64::consts::E);
        assert!((prior_to_llr(p).unwrap() - 1.0).abs() < 1e-12);
        assert!(prior_to_llr(0.0).is_err());
        assert!(prior_to_llr(0.6).is_err());
    }

    #[test]
    fn phenomenological_toy_shape() {
        let code = toy_code();
        assert_eq!(code.k, 1);
        let m = build_phenomenological_model(&code, 1, 0.01, 0.001).unwrap();
        assert_eq!((m.n_detectors(), m.n_faults()), (4, 5));
        for c in 0..3 {
            assert_eq!(m.column_span(c), (0, 0));
        }
        for c in 3..5 {
            assert_eq!(m.column_span(c), (0, 1));
            assert_eq!(m.h().col_weight(c), 2);
            assert_eq!(m.logicals().col_weight(c), 0);
        }
        assert_eq!(m.priors()[..3], [0.01; 3]);
        assert_eq!(m.priors()[3..], [0.001; 2]);
    }

    #[test]
    fn phenomenological_bb288_size() {
        let m = build_phenomenological_model(&bb288(), 18, 1e-3, 1e-3).unwrap();
        assert_eq!(m.n_detectors(), 2736);
        assert_eq!(m.n_faults(), 7776);
        assert_eq!(m.blocks().unwrap().rounds, 19);
    }

    #[test]
    fn single_shot_structure() {
        let code = bb288();
        let m = build_single_shot_model(&code, 0.05, 1e-3).unwrap();
        assert_eq!((m.n_detectors(), m.n_faults()), (144, 432));
        assert!((0..288).all(|c| m.h().col_weight(c) == 3));
        assert!((288..432).all(|c| m.h().col_weight(c) == 1 && m.logicals().col_weight(c) == 0));
        assert_eq!(m.verification().unwrap().nnz(), code.hx.nnz());
    }

    #[test]
    fn data_model_zero_noise_samples_nothing() {
        let m = build_data_qubit_model(&bb288(), 0.0).unwrap();
        for seed in 0..20 {
            let s = m.sample(seed);
            assert!(s.e.is_zero() && s.s.is_zero() && s.l.is_zero());
        }
    }

    #[test]
    fn dem_parse_minimal_and_errors() {
        let m = parse_dem("detectors 2\nlogicals 1\nerror 0.1 D0 D1 L0\n").unwrap();
        assert_eq!((m.n_detectors(), m.n_faults()), (2, 1));
        assert_eq!(m.priors(), &[0.1]);
        assert_eq!(m.logicals().col(0), &[0]);

        let bad = parse_dem("detectors 2\nlogicals 1\nerror 0.6 D0\n").unwrap_err();
        assert!(matches!(bad, NoiseError::Parse { line: 3, .. }), "{bad}");
        let bad = parse_dem("detectors 2\nlogicals 0\nerror 0.1 D2\n").unwrap_err();
        assert!(bad.to_string().contains("out of range"));
        let bad = parse_dem("detectors 2\nlogicals 0\nerror 0.1 D1 D0\n").unwrap_err();
        assert!(bad.to_string().contains("increase"));
        let bad = parse_dem("detectors 3\nlogicals 0\nrounds 3 1\nerror 0.1 D0 D2\n").unwrap_err();
        assert!(matches!(bad, NoiseError::BlockSpan { column: 0, first: 0, last: 2 }));
        let bad = parse_dem("logicals 0\nerror 0.1 D0\n").unwrap_err();
        assert!(bad.to_string().contains("before"));
    }

    #[test]
    fn dem_round_trip_is_canonical() {
        let text = "# comment\ndetectors 4\nlogicals 1\nrounds 2 2\n\nerror 0.01 D0 D2 L0   # x\nerror 0.2 D1\n";
        let m = parse_dem(text).unwrap();
        let canon = m.to_dem_string();
        assert_eq!(
            canon,
            "detectors 4\nlogicals 1\nrounds 2 2\nerror 0.01 D0 D2 L0\nerror 0.2 D1\n"
        );
        assert_eq!(parse_dem(&canon).unwrap().to_dem_string(), canon);
    }

    #[test]
    fn merge_examples() {
        let m = parse_dem("detectors 2\nlogicals 1\nerror 0.01 D0\nerror 0.01 D0\n").unwrap();
        let merged = m.merge_equivalent_columns();
        assert_eq!(merged.n_faults(), 1);
        assert!((merged.priors()[0] - 0.0198).abs() < 1e-12);

        let m = parse_dem("detectors 2\nlogicals 1\nerror 0.5 D1\nerror 0.5 D1\nerror 0.5 D1\n").unwrap();
        assert_eq!(m.merge_equivalent_columns().priors(), &[0.5]);

        let m = parse_dem("detectors 2\nlogicals 1\nerror 0.1 D0\nerror 0.1 D0 L0\n").unwrap();
        assert_eq!(m.merge_equivalent_columns().to_dem_string(), m.to_dem_string());
    }

    #[test]
    fn sampling_is_seeded_and_consistent() {
        let m = build_phenomenological_model(&toy_code(), 3, 0.2, 0.1).unwrap();
        for seed in 0..50 {
            let a = m.sample(seed);
            assert_eq!(a, m.sample(seed));
            assert_eq!(m.h().matvec(&a.e).unwrap(), a.s);
            assert_eq!(m.logicals().matvec(&a.e).unwrap(), a.l);
        }
    }
}
