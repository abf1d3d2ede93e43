//! `(W, F)` sliding-window decoding over a block-structured detector model.
//!
//! A window covers `W` detector blocks starting at `start`. It sees every
//! column whose block span starts inside the window and commits the columns
//! whose span starts in the first `F` blocks; those never appear in a later
//! window. Committed faults are folded into a residual syndrome, which
//! carries the update of the next window's first block.

use std::ops::Range;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::gdg::{gdg_decode, BranchKind, GdgConfig};
use crate::gf2::{BitVector, SparseBitMatrix};
use crate::noise::{odd_parity, prior_to_llr, DetectorModel, FaultSample};
use crate::osd::{bp_osd, OsdConfig, OsdError};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum WindowError {
    #[error("detector model has no block structure")]
    NoBlocks,
    #[error("invalid window ({w},{f}): need 1 <= F < W")]
    InvalidPlan { w: usize, f: usize },
    #[error("window blocks {start}..{end} exceed the model's {blocks} blocks")]
    OutOfRange {
        start: usize,
        end: usize,
        blocks: usize,
    },
    #[error("syndrome length {found} does not match {expected} detectors")]
    SyndromeLength { expected: usize, found: usize },
}

/// Decoder applied to each window.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum InnerDecoder {
    Gdg(GdgConfig),
    /// BP followed by OSD-0 (`order = 0`) or OSD-CS(`order`).
    Osd(OsdConfig),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InnerOutcome {
    /// `None` when the decoder found no solution of the window equation.
    pub e: Option<BitVector>,
    pub path_metric: f64,
    pub winner: Option<BranchKind>,
}

impl InnerDecoder {
    pub fn decode(&self, h: &SparseBitMatrix, llr: &[f64], s: &BitVector) -> InnerOutcome {
        match self {
            InnerDecoder::Gdg(config) => {
                let out = gdg_decode(h, llr, s, config);
                InnerOutcome {
                    e: out.e,
                    path_metric: out.path_metric,
                    winner: out.winner,
                }
            }
            InnerDecoder::Osd(config) => match bp_osd(h, llr, s, config) {
                Ok(out) => InnerOutcome {
                    e: Some(out.e),
                    path_metric: out.path_metric,
                    winner: None,
                },
                Err(OsdError::NotInSpan) => InnerOutcome {
                    e: None,
                    path_metric: f64::INFINITY,
                    winner: None,
                },
                Err(err) => panic!("window problem is well formed: {err}"),
            },
        }
    }

    pub fn label(&self) -> String {
        match self {
            InnerDecoder::Gdg(_) => "gdg".into(),
            InnerDecoder::Osd(c) if c.order == 0 => "bp-osd0".into(),
            InnerDecoder::Osd(c) => format!("bp-osd-cs{}", c.order),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowPlan {
    /// Blocks per window.
    pub w: usize,
    /// Blocks committed per window.
    pub f: usize,
    pub inner: InnerDecoder,
    /// Decoder for the final window, when it differs.
    pub last_window: Option<InnerDecoder>,
    /// Merge weight-one tail columns sharing a row into one identity column.
    pub merge_tail: bool,
}

impl WindowPlan {
    pub fn new(w: usize, f: usize, inner: InnerDecoder) -> Result<Self, WindowError> {
        let plan = WindowPlan {
            w,
            f,
            inner,
            last_window: None,
            merge_tail: false,
        };
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<(), WindowError> {
        if self.f == 0 || self.f >= self.w {
            return Err(WindowError::InvalidPlan {
                w: self.w,
                f: self.f,
            });
        }
        Ok(())
    }

    /// Start blocks of the windows over `blocks` blocks; the last window is
    /// the first one reaching the final block and may be shorter than `W`.
    pub fn starts(&self, blocks: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut start = 0;
        loop {
            out.push(start);
            if start + self.w >= blocks {
                return out;
            }
            start += self.f;
        }
    }
}

/// One window's decoding problem.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowView {
    pub blocks: Range<usize>,
    /// Model rows (detectors) covered by the window.
    pub rows: Range<usize>,
    pub h: SparseBitMatrix,
    pub priors: Vec<f64>,
    pub llr: Vec<f64>,
    /// Model column of each window column; `None` for merged tail columns.
    pub columns: Vec<Option<usize>>,
    /// Window columns committed by this window, ascending.
    pub commit: Vec<usize>,
    pub is_last: bool,
}

/// Extracts the window over blocks `[start, start + w)` (clipped to the
/// model) committing the columns that start in its first `f` blocks, or all
/// of them in the last window.
pub fn window_view(
    model: &DetectorModel,
    start: usize,
    w: usize,
    f: usize,
    merge_tail: bool,
) -> Result<WindowView, WindowError> {
    let layout = model.blocks().ok_or(WindowError::NoBlocks)?;
    let total = layout.rounds;
    let end = (start + w).min(total);
    if start >= end {
        return Err(WindowError::OutOfRange {
            start,
            end: start + w,
            blocks: total,
        });
    }
    let is_last = end == total;
    let rows = layout.rows_of(start).start..layout.rows_of(end - 1).end;
    let h = model.h();

    let mut columns = Vec::new();
    let mut supports: Vec<Vec<usize>> = Vec::new();
    let mut priors = Vec::new();
    let mut commit = Vec::new();
    // rows holding weight-one tail columns, with their combined prior
    let mut merged: Vec<Option<f64>> = vec![None; rows.len()];
    for c in 0..h.n_cols() {
        let (first, last) = model.column_span(c);
        if first < start || first >= end {
            continue;
        }
        let local: Vec<usize> = h
            .col(c)
            .iter()
            .filter(|r| rows.contains(r))
            .map(|r| r - rows.start)
            .collect();
        let is_tail = !is_last && last >= end;
        if merge_tail && is_tail && local.len() == 1 {
            let slot = &mut merged[local[0]];
            let p = model.priors()[c];
            *slot = Some(slot.map_or(p, |q| odd_parity(q, p)));
            continue;
        }
        if is_last || first < start + f {
            commit.push(columns.len());
        }
        columns.push(Some(c));
        supports.push(local);
        priors.push(model.priors()[c]);
    }
    for (r, p) in merged.into_iter().enumerate() {
        if let Some(p) = p {
            columns.push(None);
            supports.push(vec![r]);
            priors.push(p);
        }
    }
    let h_win = SparseBitMatrix::from_columns(rows.len(), &supports).expect("rows are local");
    let llr = priors
        .iter()
        .map(|&p| prior_to_llr(p).expect("model priors are valid"))
        .collect();
    Ok(WindowView {
        blocks: start..end,
        rows,
        h: h_win,
        priors,
        llr,
        columns,
        commit,
        is_last,
    })
}

/// Window views of a plan over a model; syndrome independent, so built once
/// per experiment.
#[derive(Clone, Debug)]
pub struct WindowSchedule {
    pub views: Vec<WindowView>,
}

impl WindowSchedule {
    pub fn new(model: &DetectorModel, plan: &WindowPlan) -> Result<Self, WindowError> {
        plan.validate()?;
        let total = model.blocks().ok_or(WindowError::NoBlocks)?.rounds;
        let views = plan
            .starts(total)
            .into_iter()
            .map(|start| window_view(model, start, plan.w, plan.f, plan.merge_tail))
            .collect::<Result<_, _>>()?;
        Ok(WindowSchedule { views })
    }

    /// A single view over the whole model committing every column.
    pub fn global(model: &DetectorModel) -> Self {
        let n_rows = model.n_detectors();
        let llr = model.llrs();
        WindowSchedule {
            views: vec![WindowView {
                blocks: 0..model.blocks().map_or(1, |b| b.rounds),
                rows: 0..n_rows,
                h: model.h().clone(),
                priors: model.priors().to_vec(),
                llr,
                columns: (0..model.n_faults()).map(Some).collect(),
                commit: (0..model.n_faults()).collect(),
                is_last: true,
            }],
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WindowDiagnostics {
    pub blocks: Range<usize>,
    pub n_rows: usize,
    pub n_cols: usize,
    /// The inner decoder solved the window equation.
    pub converged: bool,
    pub path_metric: f64,
    pub winner: Option<BranchKind>,
    /// Model columns committed as 1.
    pub committed_ones: Vec<usize>,
    /// After the commit, the residual syndrome vanishes on the committed
    /// blocks.
    pub committed_blocks_clear: bool,
    pub elapsed: Duration,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SlidingOutcome {
    /// Assembled estimate over all model columns.
    pub e: BitVector,
    pub windows: Vec<WindowDiagnostics>,
    /// `H·ê = s` for the assembled estimate.
    pub syndrome_ok: bool,
}

impl SlidingOutcome {
    pub fn all_converged(&self) -> bool {
        self.windows.iter().all(|w| w.converged)
    }
}

/// Decodes `s` window by window. A window without a solution commits zeros;
/// the failure then shows up in the final syndrome check.
pub fn sliding_decode(
    model: &DetectorModel,
    schedule: &WindowSchedule,
    plan_inner: &InnerDecoder,
    last_window: Option<&InnerDecoder>,
    s: &BitVector,
) -> Result<SlidingOutcome, WindowError> {
    if s.len() != model.n_detectors() {
        return Err(WindowError::SyndromeLength {
            expected: model.n_detectors(),
            found: s.len(),
        });
    }
    let h = model.h();
    let mut residual = s.clone();
    let mut e = BitVector::zeros(model.n_faults());
    let mut windows = Vec::with_capacity(schedule.views.len());
    for view in &schedule.views {
        let s_win = BitVector::from_bools(&view.rows.clone().map(|r| residual.get(r)).collect::<Vec<_>>());
        let decoder = match (view.is_last, last_window) {
            (true, Some(d)) => d,
            _ => plan_inner,
        };
        let clock = Instant::now();
        let out = decoder.decode(&view.h, &view.llr, &s_win);
        let elapsed = clock.elapsed();
        let mut committed_ones = Vec::new();
        if let Some(local) = &out.e {
            for &k in &view.commit {
                if local.get(k) {
                    let c = view.columns[k].expect("committed columns are model columns");
                    committed_ones.push(c);
                    e.flip(c);
                    for &r in h.col(c) {
                        residual.flip(r);
                    }
                }
            }
        }
        let clear_rows = if view.is_last {
            view.rows.clone()
        } else {
            // rows of the blocks no later window sees
            let next = schedule
                .views
                .iter()
                .find(|v| v.blocks.start > view.blocks.start)
                .map_or(view.rows.end, |v| v.rows.start);
            view.rows.start..next
        };
        windows.push(WindowDiagnostics {
            blocks: view.blocks.clone(),
            n_rows: view.h.n_rows(),
            n_cols: view.h.n_cols(),
            converged: out.e.is_some(),
            path_metric: out.path_metric,
            winner: out.winner,
            committed_ones,
            committed_blocks_clear: clear_rows.clone().all(|r| !residual.get(r)),
            elapsed,
        });
    }
    Ok(SlidingOutcome {
        syndrome_ok: residual.is_zero(),
        e,
        windows,
    })
}

/// Decodes the whole model as one problem.
pub fn global_decode(model: &DetectorModel, inner: &InnerDecoder, s: &BitVector) -> Result<SlidingOutcome, WindowError> {
    sliding_decode(model, &WindowSchedule::global(model), inner, None, s)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Success,
    SyndromeFailure,
    LogicalFailure,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Verdict {
    pub outcome: Outcome,
    /// Logical (and verification) parities match regardless of the
    /// syndrome check.
    pub logical_ok: bool,
}

/// `SyndromeFailure` if `H·ê ≠ s`; otherwise `LogicalFailure` if the
/// logical or verification parities of `ê` and the true fault differ.
pub fn judge(e_hat: &BitVector, sample: &FaultSample, model: &DetectorModel) -> Verdict {
    let syndrome_ok = model.h().matvec(e_hat).expect("estimate has one bit per fault") == sample.s;
    let mut logical_ok = model.logicals().matvec(e_hat).expect("estimate has one bit per fault") == sample.l;
    if let Some(v) = model.verification() {
        let diff = e_hat.xor(&sample.e);
        logical_ok &= v.matvec(&diff).expect("estimate has one bit per fault").is_zero();
    }
    let outcome = if !syndrome_ok {
        Outcome::SyndromeFailure
    } else if !logical_ok {
        Outcome::LogicalFailure
    } else {
        Outcome::Success
    };
    Verdict { outcome, logical_ok }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codes::CssCode;
    use crate::noise::build_phenomenological_model;

    fn toy_code() -> CssCode {
        let hx = SparseBitMatrix::from_rows(3, &[vec![0, 1], vec![1, 2]]).unwrap();
        CssCode::from_checks(hx, SparseBitMatrix::zeros(0, 3), None, "toy".into()).unwrap()
    }

    fn osd0() -> InnerDecoder {
        InnerDecoder::Osd(OsdConfig::osd0(20))
    }

    #[test]
    fn toy_window_shape() {
        let model = build_phenomenological_model(&toy_code(), 2, 0.05, 0.02).unwrap();
        let view = window_view(&model, 0, 2, 1, false).unwrap();
        assert_eq!(view.rows, 0..4);
        // data r0, meas r0, data r1, meas r1
        let cols: Vec<usize> = view.columns.iter().map(|c| c.unwrap()).collect();
        assert_eq!(cols, (0..10).collect::<Vec<_>>());
        assert_eq!(view.commit, vec![0, 1, 2, 3, 4]);
        assert!(!view.is_last);
        // meas r1 reaches past the window
        assert_eq!(view.h.col_weight(8), 1);
    }

    #[test]
    fn full_width_window_is_the_model() {
        let model = build_phenomenological_model(&toy_code(), 2, 0.05, 0.02).unwrap();
        let view = window_view(&model, 0, 3, 1, false).unwrap();
        assert!(view.is_last);
        assert_eq!(&view.h, model.h());
        assert_eq!(view.commit.len(), model.n_faults());
        assert_eq!(view.llr, model.llrs());
    }

    #[test]
    fn window_starts() {
        let plan = WindowPlan::new(3, 1, osd0()).unwrap();
        assert_eq!(plan.starts(4), vec![0, 1]);
        assert_eq!(plan.starts(3), vec![0]);
        let plan = WindowPlan::new(5, 2, osd0()).unwrap();
        assert_eq!(plan.starts(10), vec![0, 2, 4, 6]);
        assert!(WindowPlan::new(2, 2, osd0()).is_err());
        assert!(WindowPlan::new(2, 0, osd0()).is_err());
    }

    #[test]
    fn tail_merge_combines_priors() {
        let model = build_phenomenological_model(&toy_code(), 2, 0.05, 0.02).unwrap();
        let view = window_view(&model, 0, 2, 1, true).unwrap();
        // the two meas r1 columns have one row each inside the window
        assert_eq!(view.columns.len(), 10);
        assert_eq!(view.columns[8..], [None, None]);
        assert!((view.priors[8] - 0.02).abs() < 1e-15);
        assert_eq!(view.commit, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn zero_syndrome_decodes_to_zero() {
        let model = build_phenomenological_model(&toy_code(), 3, 0.05, 0.02).unwrap();
        let plan = WindowPlan::new(2, 1, osd0()).unwrap();
        let schedule = WindowSchedule::new(&model, &plan).unwrap();
        let out = sliding_decode(&model, &schedule, &plan.inner, None, &BitVector::zeros(model.n_detectors())).unwrap();
        assert!(out.e.is_zero() && out.syndrome_ok && out.all_converged());
        assert_eq!(out.windows.len(), 3);
    }

    #[test]
    fn judge_outcomes() {
        let model = build_phenomenological_model(&toy_code(), 1, 0.05, 0.02).unwrap();
        let sample = model.sample(3);
        assert_eq!(judge(&sample.e, &sample, &model).outcome, Outcome::Success);
        // flipping every data qubit of a round is a logical operator
        let mut e = sample.e.clone();
        for q in 0..3 {
            e.flip(q);
        }
        assert_eq!(judge(&e, &sample, &model).outcome, Outcome::LogicalFailure);
        let mut e = sample.e.clone();
        e.flip(0);
        let v = judge(&e, &sample, &model);
        assert_eq!(v.outcome, Outcome::SyndromeFailure);
    }
}
