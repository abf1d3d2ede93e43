//! Guided decimation guessing (GDG).
//!
//! A GDG decode runs an ensemble of decimation paths over a (possibly
//! shortened) parity-check matrix and keeps the estimate with the smallest
//! path metric:
//!
//! * the main branch always decimates the selected VN to its favored value;
//! * a side branch copies the main branch up to its split depth, decimates
//!   against the favored value there, re-initializes its messages and then
//!   follows the favored values;
//! * a tree branch enumerates the first `tree_depth` decisions from the root
//!   according to the bits of its id and then follows the favored values;
//!   an unfavored last guess re-initializes messages, as in a side branch.
//!
//! Each step is `iters_per_step` flooding iterations followed by VN
//! selection, decimation and peeling.

use serde::{Deserialize, Serialize};

use crate::bp::{BpConfig, BpState, PeelOutcome, TannerGraph, VnStatus};
use crate::gf2::{BitVector, SparseBitMatrix};
use crate::osd::rank_columns;

/// Thresholds of the aggressive-decimation rule.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggThresholds {
    pub p_a_main: f64,
    pub p_a_other: f64,
    pub p_b_main: f64,
    pub p_b_other: f64,
    /// Replaces `p_b` at depth 1.
    pub p_b_first: f64,
    pub p_c: f64,
    /// `p_c` only applies up to this depth.
    pub p_c_max_depth: usize,
    pub p_d: f64,
    /// Unsatisfied check neighbors needed for the `p_d` rule.
    pub min_unsatisfied: usize,
}

impl Default for AggThresholds {
    fn default() -> Self {
        AggThresholds {
            p_a_main: -3.0,
            p_a_other: 0.0,
            p_b_main: -12.0,
            p_b_other: -10.0,
            p_b_first: -16.0,
            p_c: 30.0,
            p_c_max_depth: 4,
            p_d: 3.0,
            min_unsatisfied: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GdgConfig {
    pub iters_per_step: usize,
    pub main_max_depth: usize,
    /// Depths at which a side branch splits off the main branch.
    pub side_split_depths: Vec<usize>,
    pub side_extra_steps: usize,
    /// Number of leading decisions enumerated by tree branches.
    pub tree_depth: usize,
    pub tree_extra_steps: usize,
    /// Skip aggressive decimation.
    pub low_error_mode: bool,
    pub agg: AggThresholds,
    /// BP iterations on the full PCM before ranking; 0 disables shortening.
    pub preprocess_iters: usize,
    /// Keep `shorten_factor * rows` ranked columns after preprocessing.
    pub shorten_factor: usize,
    pub bp: BpConfig,
}

impl Default for GdgConfig {
    fn default() -> Self {
        GdgConfig::n144_circuit()
    }
}

impl GdgConfig {
    /// Decision tree for circuit-level windows of codes with `N <= 144`.
    pub fn n144_circuit() -> Self {
        GdgConfig {
            iters_per_step: 6,
            main_max_depth: 25,
            side_split_depths: (4..=10).collect(),
            side_extra_steps: 10,
            tree_depth: 4,
            tree_extra_steps: 10,
            low_error_mode: true,
            agg: AggThresholds::default(),
            preprocess_iters: 8,
            shorten_factor: 2,
            bp: BpConfig::default(),
        }
    }

    /// Decision tree for circuit-level windows of the `N = 288` code.
    pub fn n288_circuit() -> Self {
        GdgConfig {
            main_max_depth: 40,
            side_split_depths: (5..=20).collect(),
            side_extra_steps: 20,
            tree_depth: 5,
            tree_extra_steps: 20,
            preprocess_iters: 16,
            ..GdgConfig::n144_circuit()
        }
    }

    /// Data-qubit and single-shot decoding on the code PCM itself.
    pub fn data_qubit() -> Self {
        GdgConfig {
            main_max_depth: 40,
            side_split_depths: (5..=20).collect(),
            side_extra_steps: 30,
            tree_depth: 5,
            tree_extra_steps: 30,
            preprocess_iters: 0,
            bp: BpConfig {
                scale: 0.625,
                ..BpConfig::default()
            },
            ..GdgConfig::n144_circuit()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "n144-circuit" => Some(Self::n144_circuit()),
            "n288-circuit" => Some(Self::n288_circuit()),
            "data-qubit" => Some(Self::data_qubit()),
            _ => None,
        }
    }

    /// Checks the structural invariants of the configuration.
    pub fn validate(&self) -> Result<(), String> {
        if self.iters_per_step < crate::bp::HISTORY {
            return Err(format!(
                "iters_per_step must be at least {}",
                crate::bp::HISTORY
            ));
        }
        if self.main_max_depth == 0 {
            return Err("main_max_depth must be positive".into());
        }
        if let Some(&d) = self
            .side_split_depths
            .iter()
            .find(|&&d| d == 0 || d > self.main_max_depth)
        {
            return Err(format!("side split depth {d} outside 1..={}", self.main_max_depth));
        }
        if self.tree_depth >= 32 {
            return Err("tree_depth must be below 32".into());
        }
        if self.preprocess_iters > 0 && self.preprocess_iters < crate::bp::HISTORY {
            return Err("preprocess_iters must be 0 or at least 4".into());
        }
        Ok(())
    }

    /// Tree ids in `[2, 2^tree_depth)`; empty without a tree.
    pub fn tree_ids(&self) -> Vec<u32> {
        if self.tree_depth == 0 {
            return Vec::new();
        }
        (2..1u32 << self.tree_depth).collect()
    }

    /// All branches in tie-break priority order.
    pub fn branches(&self) -> Vec<BranchSpec> {
        let mut out = vec![BranchSpec {
            kind: BranchKind::Main,
            max_depth: self.main_max_depth,
        }];
        let mut splits = self.side_split_depths.clone();
        splits.sort_unstable();
        splits.dedup();
        out.extend(splits.into_iter().map(|d| BranchSpec {
            kind: BranchKind::Side(d),
            max_depth: d + self.side_extra_steps,
        }));
        out.extend(self.tree_ids().into_iter().map(|id| BranchSpec {
            kind: BranchKind::Tree(id),
            max_depth: self.tree_depth + self.tree_extra_steps,
        }));
        out
    }

    /// Longest branch in BP iterations.
    pub fn critical_path(&self) -> usize {
        self.branches().iter().map(|b| b.max_depth).max().unwrap_or(0) * self.iters_per_step
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BranchKind {
    Main,
    Side(usize),
    Tree(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BranchSpec {
    pub kind: BranchKind,
    pub max_depth: usize,
}

/// Saved decimation status of a path (messages are not kept).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Snapshot {
    pub status: crate::bp::Decimation,
    pub depth: usize,
    /// Iterations spent reaching the snapshot.
    pub iterations: usize,
}

/// Aggressive-decimation verdict for one VN history: `Some(bit)` to fix the
/// VN immediately, `None` when the history is not decisive.
pub fn agg_dec(
    history: &[f64; 4],
    depth: usize,
    on_main: bool,
    unsatisfied_neighbors: usize,
    t: &AggThresholds,
) -> Option<bool> {
    let p_a = if on_main { t.p_a_main } else { t.p_a_other };
    let p_b = if depth == 1 {
        t.p_b_first
    } else if on_main {
        t.p_b_main
    } else {
        t.p_b_other
    };
    let sum: f64 = history.iter().sum();
    if history.iter().all(|&x| x < p_a) && sum < p_b {
        return Some(true);
    }
    let above = |p: f64| history.iter().all(|&x| x > p);
    if (above(t.p_c) && depth <= t.p_c_max_depth)
        || (above(t.p_d) && unsatisfied_neighbors >= t.min_unsatisfied)
    {
        return Some(false);
    }
    None
}

/// Outcome of VN selection.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Selection {
    /// VN `vn` with favored value `favored`.
    Vn { vn: usize, favored: bool },
    /// No undecided VN of degree at least three remains.
    AllDecimated,
}

/// Picks the next VN to decimate from the posterior histories. Outside low
/// error mode, VNs with decisive histories are fixed on the spot and leave
/// the selection.
pub fn select_vn(state: &mut BpState<'_>, depth: usize, on_main: bool, config: &GdgConfig) -> Selection {
    let graph = state.graph();
    let unsatisfied = (!config.low_error_mode).then(|| state.unsatisfied_checks());
    let mut best: Option<(usize, f64)> = None;
    let mut best_negative: Option<(usize, f64)> = None;
    let mut fixed: Vec<(usize, bool)> = Vec::new();
    for i in 0..graph.n_vn() {
        if state.status(i) != VnStatus::Undecided || graph.vn_degree(i) <= 2 {
            continue;
        }
        let hist = state.history(i).expect("selection needs a full history");
        let sum = state.history_sum(i);
        if let Some(unsat) = &unsatisfied {
            let n_unsat = graph.vn_neighbors(i).filter(|&j| unsat[j]).count();
            if let Some(bit) = agg_dec(&hist, depth, on_main, n_unsat, &config.agg) {
                fixed.push((i, bit));
                continue;
            }
        }
        if best.is_none_or(|(_, m)| sum < m) {
            best = Some((i, sum));
        }
        if hist.iter().all(|&x| x <= 0.0) && best_negative.is_none_or(|(_, m)| sum < m) {
            best_negative = Some((i, sum));
        }
    }
    for (i, bit) in fixed {
        state.decimate(i, bit).expect("candidate is undecided");
    }
    match (best_negative, best) {
        (Some((vn, _)), _) => Selection::Vn { vn, favored: true },
        (None, Some((vn, sum))) => Selection::Vn {
            vn,
            favored: sum <= 0.0,
        },
        (None, None) => Selection::AllDecimated,
    }
}

/// Result of one decimation path.
#[derive(Clone, Debug, PartialEq)]
pub struct BranchResult {
    pub spec: BranchSpec,
    /// Estimate on the decoding PCM when the branch converged.
    pub e: Option<BitVector>,
    pub path_metric: f64,
    /// Depth at which the branch stopped.
    pub depth: usize,
    /// BP iterations along the path from the root, shared prefix included.
    pub iterations: usize,
}

impl BranchResult {
    fn converged(spec: BranchSpec, state: &BpState<'_>, depth: usize, iterations: usize) -> Self {
        let e = state.hard_decision();
        let llr = state.llr();
        let pm = e.ones().map(|i| llr[i]).sum();
        BranchResult {
            spec,
            e: Some(e),
            path_metric: pm,
            depth,
            iterations,
        }
    }

    fn dead(spec: BranchSpec, depth: usize, iterations: usize) -> Self {
        BranchResult {
            spec,
            e: None,
            path_metric: f64::INFINITY,
            depth,
            iterations,
        }
    }
}

/// What a step ended with.
enum StepEnd {
    Converged,
    Decided(Selection),
}

/// Runs one step's iterations and, if not converged, selects a VN.
fn step(state: &mut BpState<'_>, depth: usize, on_main: bool, config: &GdgConfig) -> StepEnd {
    if state.iterate_until_converged(config.iters_per_step) {
        StepEnd::Converged
    } else {
        StepEnd::Decided(select_vn(state, depth, on_main, config))
    }
}

/// Decimates (when a VN was selected) and peels; `false` on contradiction.
fn apply(state: &mut BpState<'_>, sel: Selection, value_of: impl FnOnce(bool) -> bool) -> bool {
    if let Selection::Vn { vn, favored } = sel {
        state
            .decimate(vn, value_of(favored))
            .expect("selected VN is undecided");
    }
    state.peel() == PeelOutcome::Ok
}

/// Follows favored values from `start_depth` to `max_depth`.
fn follow(
    state: &mut BpState<'_>,
    spec: BranchSpec,
    start_depth: usize,
    on_main: bool,
    config: &GdgConfig,
    iterations: &mut usize,
) -> BranchResult {
    for depth in start_depth..=spec.max_depth {
        let before = state.iterations();
        let end = step(state, depth, on_main, config);
        *iterations += state.iterations() - before;
        match end {
            StepEnd::Converged => return BranchResult::converged(spec, state, depth, *iterations),
            StepEnd::Decided(sel) => {
                if !apply(state, sel, |f| f) {
                    return BranchResult::dead(spec, depth, *iterations);
                }
            }
        }
    }
    BranchResult::dead(spec, spec.max_depth, *iterations)
}

fn tree_bit(id: u32, depth: usize, tree_depth: usize) -> bool {
    (id >> (tree_depth - depth)) & 1 == 1
}

/// Runs a single branch from the root, replaying any shared prefix. This is
/// the reference semantics the ensemble in [`run_ensemble`] reproduces.
pub fn run_branch(
    h: &SparseBitMatrix,
    llr: &[f64],
    s: &BitVector,
    spec: BranchSpec,
    config: &GdgConfig,
) -> BranchResult {
    let graph = TannerGraph::new(h);
    let mut state = BpState::new(&graph, llr, s, config.bp).expect("dimensions checked by caller");
    let mut iterations = 0;
    if state.has_contradiction() {
        return BranchResult::dead(spec, 0, 0);
    }
    match spec.kind {
        BranchKind::Main => follow(&mut state, spec, 1, true, config, &mut iterations),
        BranchKind::Side(split) => {
            for depth in 1..=split {
                let before = state.iterations();
                let end = step(&mut state, depth, true, config);
                iterations += state.iterations() - before;
                match end {
                    StepEnd::Converged => {
                        return BranchResult::converged(spec, &state, depth, iterations)
                    }
                    StepEnd::Decided(sel) => {
                        let flip = depth == split;
                        if !apply(&mut state, sel, |f| f ^ flip) {
                            return BranchResult::dead(spec, depth, iterations);
                        }
                    }
                }
            }
            state.reinitialize();
            follow(&mut state, spec, split + 1, false, config, &mut iterations)
        }
        BranchKind::Tree(id) => {
            let t = config.tree_depth;
            for depth in 1..=t.min(spec.max_depth) {
                let before = state.iterations();
                let end = step(&mut state, depth, false, config);
                iterations += state.iterations() - before;
                match end {
                    StepEnd::Converged => {
                        return BranchResult::converged(spec, &state, depth, iterations)
                    }
                    StepEnd::Decided(sel) => {
                        let b = tree_bit(id, depth, t);
                        if !apply(&mut state, sel, |f| f ^ b) {
                            return BranchResult::dead(spec, depth, iterations);
                        }
                        if depth == t && b {
                            state.reinitialize();
                        }
                    }
                }
            }
            follow(&mut state, spec, t + 1, false, config, &mut iterations)
        }
    }
}

/// Runs every branch of `config`, sharing prefixes: side branches fork from
/// snapshots of the main branch and tree branches fork full states at each
/// guessing node. Results are returned in priority order and equal those of
/// [`run_branch`] branch by branch.
pub fn run_ensemble(
    h: &SparseBitMatrix,
    llr: &[f64],
    s: &BitVector,
    config: &GdgConfig,
) -> Vec<BranchResult> {
    let graph = TannerGraph::new(h);
    let root = BpState::new(&graph, llr, s, config.bp).expect("dimensions checked by caller");
    let specs = config.branches();
    if root.has_contradiction() {
        return specs.into_iter().map(|spec| BranchResult::dead(spec, 0, 0)).collect();
    }
    let mut results = Vec::with_capacity(specs.len());

    // main branch, saving side snapshots
    let main_spec = specs[0];
    let mut splits: Vec<usize> = config.side_split_depths.clone();
    splits.sort_unstable();
    splits.dedup();
    let mut snapshots: Vec<(usize, Snapshot, Selection)> = Vec::new();
    let mut state = root.clone();
    let mut iterations = 0;
    let mut main_result = None;
    for depth in 1..=main_spec.max_depth {
        let before = state.iterations();
        let end = step(&mut state, depth, true, config);
        iterations += state.iterations() - before;
        match end {
            StepEnd::Converged => {
                main_result = Some(BranchResult::converged(main_spec, &state, depth, iterations));
                break;
            }
            StepEnd::Decided(sel) => {
                if splits.binary_search(&depth).is_ok() {
                    snapshots.push((
                        depth,
                        Snapshot {
                            status: state.decimation().clone(),
                            depth,
                            iterations,
                        },
                        sel,
                    ));
                }
                if !apply(&mut state, sel, |f| f) {
                    main_result = Some(BranchResult::dead(main_spec, depth, iterations));
                    break;
                }
            }
        }
    }
    let main_result =
        main_result.unwrap_or_else(|| BranchResult::dead(main_spec, main_spec.max_depth, iterations));

    // side branches
    let mut side_results = Vec::new();
    for spec in specs.iter().filter(|s| matches!(s.kind, BranchKind::Side(_))) {
        let BranchKind::Side(split) = spec.kind else {
            unreachable!()
        };
        let snap = snapshots.iter().find(|(d, _, _)| *d == split);
        let result = match snap {
            // the main branch stopped before this split: the side branch
            // shares its fate
            None => BranchResult {
                spec: *spec,
                ..main_result.clone()
            },
            Some((_, snap, sel)) => {
                let mut side = root.clone();
                side.restore(&snap.status);
                let mut its = snap.iterations;
                if !apply(&mut side, *sel, |f| !f) {
                    BranchResult::dead(*spec, split, its)
                } else {
                    side.reinitialize();
                    follow(&mut side, *spec, split + 1, false, config, &mut its)
                }
            }
        };
        side_results.push(result);
    }

    // tree branches
    let mut tree_results: Vec<Option<BranchResult>> = vec![None; 1usize << config.tree_depth];
    if config.tree_depth > 0 {
        let tree_spec = |id: u32| BranchSpec {
            kind: BranchKind::Tree(id),
            max_depth: config.tree_depth + config.tree_extra_steps,
        };
        tree_walk(root.clone(), 1, 0, 0, config, &tree_spec, &mut tree_results);
    }

    results.push(main_result);
    results.extend(side_results);
    for id in config.tree_ids() {
        results.push(tree_results[id as usize].take().expect("every tree id visited"));
    }
    results
}

/// Depth-first walk of the guessing tree. `prefix` holds the bits decided so
/// far (most significant first).
fn tree_walk(
    mut state: BpState<'_>,
    depth: usize,
    prefix: u32,
    iterations: usize,
    config: &GdgConfig,
    spec_of: &dyn Fn(u32) -> BranchSpec,
    out: &mut [Option<BranchResult>],
) {
    let t = config.tree_depth;
    let remaining = t - (depth - 1);
    let first_id = prefix << remaining;
    let ids = first_id..first_id + (1u32 << remaining);
    // subtrees holding only ids 0 and 1 are not explored
    if ids.end <= 2 {
        return;
    }
    let assign = |out: &mut [Option<BranchResult>], r: &BranchResult| {
        for id in ids.clone().filter(|&id| id >= 2) {
            out[id as usize] = Some(BranchResult {
                spec: spec_of(id),
                ..r.clone()
            });
        }
    };
    let max_depth = t + config.tree_extra_steps;
    if depth > max_depth.min(t) {
        // past the guessing tree: follow favored values
        let mut its = iterations;
        let r = follow(&mut state, spec_of(prefix), depth, false, config, &mut its);
        assign(out, &r);
        return;
    }
    let before = state.iterations();
    let end = step(&mut state, depth, false, config);
    let its = iterations + state.iterations() - before;
    match end {
        StepEnd::Converged => {
            let r = BranchResult::converged(spec_of(first_id), &state, depth, its);
            assign(out, &r);
        }
        StepEnd::Decided(sel) => {
            for bit in 0..2u32 {
                let child_first = ((prefix << 1) | bit) << (remaining - 1);
                if child_first + (1u32 << (remaining - 1)) <= 2 {
                    continue;
                }
                let mut child = state.clone();
                if !apply(&mut child, sel, |f| f ^ (bit == 1)) {
                    let dead = BranchResult::dead(spec_of(child_first), depth, its);
                    for id in (child_first..child_first + (1u32 << (remaining - 1))).filter(|&id| id >= 2) {
                        out[id as usize] = Some(BranchResult {
                            spec: spec_of(id),
                            ..dead.clone()
                        });
                    }
                    continue;
                }
                if depth == t && bit == 1 {
                    child.reinitialize();
                }
                tree_walk(child, depth + 1, (prefix << 1) | bit, its, config, spec_of, out);
            }
        }
    }
}

/// A PCM restricted to its most likely columns.
#[derive(Clone, Debug)]
pub struct Shortened {
    pub h: SparseBitMatrix,
    pub llr: Vec<f64>,
    /// Original column index of each kept column, ascending.
    pub column_map: Vec<usize>,
}

/// Runs `preprocess_iters` BP iterations on the full PCM, ranks columns by
/// the sum of their last four posteriors and keeps the first
/// `shorten_factor * rows`. Without preprocessing, or when nothing would be
/// dropped, the PCM is returned unchanged.
pub fn preprocess_shorten(
    h: &SparseBitMatrix,
    llr: &[f64],
    s: &BitVector,
    config: &GdgConfig,
) -> Shortened {
    let keep = config.shorten_factor.saturating_mul(h.n_rows());
    if config.preprocess_iters == 0 || keep >= h.n_cols() {
        return Shortened {
            h: h.clone(),
            llr: llr.to_vec(),
            column_map: (0..h.n_cols()).collect(),
        };
    }
    let graph = TannerGraph::new(h);
    let mut state = BpState::new(&graph, llr, s, config.bp).expect("dimensions checked by caller");
    state.iterate(config.preprocess_iters);
    let scores: Vec<f64> = (0..h.n_cols()).map(|i| state.history_sum(i)).collect();
    let mut kept = rank_columns(&scores);
    kept.truncate(keep);
    kept.sort_unstable();
    Shortened {
        h: h.select_columns(&kept),
        llr: kept.iter().map(|&c| llr[c]).collect(),
        column_map: kept,
    }
}

/// Result of a GDG decode.
#[derive(Clone, Debug, PartialEq)]
pub struct GdgOutcome {
    /// Estimate over the original columns; `None` when no branch converged.
    pub e: Option<BitVector>,
    pub path_metric: f64,
    pub winner: Option<BranchKind>,
    pub branches: Vec<BranchResult>,
    pub kept_columns: usize,
}

impl GdgOutcome {
    pub fn success(&self) -> bool {
        self.e.is_some()
    }
}

/// First branch (in priority order) with the smallest finite path metric.
pub fn reduce_branches(results: &[BranchResult]) -> Option<&BranchResult> {
    let mut best: Option<&BranchResult> = None;
    for r in results.iter().filter(|r| r.path_metric.is_finite()) {
        if best.is_none_or(|b| r.path_metric < b.path_metric) {
            best = Some(r);
        }
    }
    best
}

/// Preprocess, run the ensemble and map the best estimate back to the
/// original columns (dropped columns are 0).
pub fn gdg_decode(h: &SparseBitMatrix, llr: &[f64], s: &BitVector, config: &GdgConfig) -> GdgOutcome {
    let short = preprocess_shorten(h, llr, s, config);
    let branches = run_ensemble(&short.h, &short.llr, s, config);
    let best = reduce_branches(&branches).cloned();
    let (e, path_metric, winner) = match best {
        Some(b) => {
            let local = b.e.expect("finite metric carries an estimate");
            let e = BitVector::from_indices(h.n_cols(), local.ones().map(|k| short.column_map[k]));
            (Some(e), b.path_metric, Some(b.spec.kind))
        }
        None => (None, f64::INFINITY, None),
    };
    GdgOutcome {
        e,
        path_metric,
        winner,
        branches,
        kept_columns: short.column_map.len(),
    }
}
