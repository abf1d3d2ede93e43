//! Flooding min-sum belief propagation with decimation and peeling.
//!
//! [`TannerGraph`] flattens a parity-check matrix into edge arrays so that
//! check-node and variable-node sweeps touch contiguous memory. [`BpState`]
//! holds everything a single decimation path mutates: messages, posteriors,
//! a four-deep posterior history, the ternary VN status, the working syndrome
//! and the number of undecided neighbors per check.

use thiserror::Error;

use crate::gf2::{BitVector, SparseBitMatrix};

/// Posterior history length.
pub const HISTORY: usize = 4;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BpError {
    #[error("dimension mismatch: {what} expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("variable node {0} is already decimated")]
    AlreadyDecimated(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BpConfig {
    /// Min-sum scaling factor applied to check-to-variable messages.
    pub scale: f64,
    /// Magnitude bound for variable-to-check messages.
    pub clip: f64,
}

impl Default for BpConfig {
    fn default() -> Self {
        BpConfig {
            scale: 1.0,
            clip: 50.0,
        }
    }
}

/// Edge-array view of a parity-check matrix. Edges are numbered check-major.
#[derive(Clone, Debug)]
pub struct TannerGraph {
    n_cn: usize,
    n_vn: usize,
    cn_start: Vec<u32>,
    edge_vn: Vec<u32>,
    vn_start: Vec<u32>,
    vn_edges: Vec<u32>,
    edge_cn: Vec<u32>,
}

impl TannerGraph {
    pub fn new(h: &SparseBitMatrix) -> Self {
        let (n_cn, n_vn) = (h.n_rows(), h.n_cols());
        let mut cn_start = Vec::with_capacity(n_cn + 1);
        let mut edge_vn = Vec::with_capacity(h.nnz());
        let mut edge_cn = Vec::with_capacity(h.nnz());
        cn_start.push(0);
        for j in 0..n_cn {
            for &v in h.row(j) {
                edge_vn.push(v as u32);
                edge_cn.push(j as u32);
            }
            cn_start.push(edge_vn.len() as u32);
        }
        let mut vn_start = vec![0u32; n_vn + 1];
        for &v in &edge_vn {
            vn_start[v as usize + 1] += 1;
        }
        for i in 0..n_vn {
            vn_start[i + 1] += vn_start[i];
        }
        let mut fill = vn_start.clone();
        let mut vn_edges = vec![0u32; edge_vn.len()];
        for (e, &v) in edge_vn.iter().enumerate() {
            vn_edges[fill[v as usize] as usize] = e as u32;
            fill[v as usize] += 1;
        }
        TannerGraph {
            n_cn,
            n_vn,
            cn_start,
            edge_vn,
            vn_start,
            vn_edges,
            edge_cn,
        }
    }

    pub fn n_cn(&self) -> usize {
        self.n_cn
    }

    pub fn n_vn(&self) -> usize {
        self.n_vn
    }

    pub fn n_edges(&self) -> usize {
        self.edge_vn.len()
    }

    pub fn vn_degree(&self, i: usize) -> usize {
        (self.vn_start[i + 1] - self.vn_start[i]) as usize
    }

    pub fn cn_degree(&self, j: usize) -> usize {
        (self.cn_start[j + 1] - self.cn_start[j]) as usize
    }

    #[inline]
    fn cn_edges(&self, j: usize) -> std::ops::Range<usize> {
        self.cn_start[j] as usize..self.cn_start[j + 1] as usize
    }

    #[inline]
    fn vn_edge_ids(&self, i: usize) -> &[u32] {
        &self.vn_edges[self.vn_start[i] as usize..self.vn_start[i + 1] as usize]
    }

    /// Check nodes adjacent to variable node `i`.
    pub fn vn_neighbors(&self, i: usize) -> impl Iterator<Item = usize> + '_ {
        self.vn_edge_ids(i).iter().map(|&e| self.edge_cn[e as usize] as usize)
    }

    /// Variable nodes adjacent to check node `j`.
    pub fn cn_neighbors(&self, j: usize) -> impl Iterator<Item = usize> + '_ {
        self.edge_vn[self.cn_edges(j)].iter().map(|&v| v as usize)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum VnStatus {
    Undecided,
    Zero,
    One,
}

impl VnStatus {
    pub fn from_bit(bit: bool) -> Self {
        if bit {
            VnStatus::One
        } else {
            VnStatus::Zero
        }
    }

    /// `-1`, `0` or `1`.
    pub fn code(self) -> i8 {
        match self {
            VnStatus::Undecided => -1,
            VnStatus::Zero => 0,
            VnStatus::One => 1,
        }
    }
}

/// Decimation status of a path: everything that survives a snapshot reload.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Decimation {
    pub status: Vec<VnStatus>,
    pub working_syndrome: Vec<bool>,
    pub cn_active_degree: Vec<u32>,
    /// Some check lost its last undecided neighbor while its working bit was 1.
    pub contradiction: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PeelOutcome {
    Ok,
    Contradiction,
}

/// Message-passing state of one decimation path.
#[derive(Clone, Debug)]
pub struct BpState<'a> {
    graph: &'a TannerGraph,
    llr: &'a [f64],
    config: BpConfig,
    syndrome: BitVector,
    v2c: Vec<f64>,
    c2v: Vec<f64>,
    posterior: Vec<f64>,
    history: Vec<[f64; HISTORY]>,
    t: usize,
    dec: Decimation,
}

impl<'a> BpState<'a> {
    /// All VNs undecided, VN-to-CN messages equal to the prior LLRs.
    pub fn new(
        graph: &'a TannerGraph,
        llr: &'a [f64],
        syndrome: &BitVector,
        config: BpConfig,
    ) -> Result<Self, BpError> {
        if llr.len() != graph.n_vn {
            return Err(BpError::DimensionMismatch {
                what: "prior LLR count",
                expected: graph.n_vn,
                found: llr.len(),
            });
        }
        if syndrome.len() != graph.n_cn {
            return Err(BpError::DimensionMismatch {
                what: "syndrome length",
                expected: graph.n_cn,
                found: syndrome.len(),
            });
        }
        let working_syndrome: Vec<bool> = (0..graph.n_cn).map(|j| syndrome.get(j)).collect();
        let cn_active_degree: Vec<u32> = (0..graph.n_cn).map(|j| graph.cn_degree(j) as u32).collect();
        let contradiction = (0..graph.n_cn).any(|j| cn_active_degree[j] == 0 && working_syndrome[j]);
        let mut state = BpState {
            graph,
            llr,
            config,
            syndrome: syndrome.clone(),
            v2c: vec![0.0; graph.n_edges()],
            c2v: vec![0.0; graph.n_edges()],
            posterior: vec![0.0; graph.n_vn],
            history: vec![[0.0; HISTORY]; graph.n_vn],
            t: 0,
            dec: Decimation {
                status: vec![VnStatus::Undecided; graph.n_vn],
                working_syndrome,
                cn_active_degree,
                contradiction,
            },
        };
        state.reinitialize();
        Ok(state)
    }

    /// Resets messages, posteriors and history, keeping the decimation status.
    pub fn reinitialize(&mut self) {
        let clip = self.config.clip;
        for (e, &v) in self.graph.edge_vn.iter().enumerate() {
            self.v2c[e] = self.llr[v as usize].clamp(-clip, clip);
        }
        self.c2v.fill(0.0);
        self.posterior.copy_from_slice(self.llr);
        self.t = 0;
    }

    /// Loads a saved decimation status and re-initializes messages.
    pub fn restore(&mut self, dec: &Decimation) {
        self.dec.clone_from(dec);
        self.reinitialize();
    }

    pub fn decimation(&self) -> &Decimation {
        &self.dec
    }

    pub fn graph(&self) -> &'a TannerGraph {
        self.graph
    }

    pub fn llr(&self) -> &'a [f64] {
        self.llr
    }

    pub fn syndrome(&self) -> &BitVector {
        &self.syndrome
    }

    pub fn config(&self) -> BpConfig {
        self.config
    }

    /// Iterations since the last (re-)initialization.
    pub fn iterations(&self) -> usize {
        self.t
    }

    pub fn status(&self, i: usize) -> VnStatus {
        self.dec.status[i]
    }

    pub fn posterior(&self, i: usize) -> f64 {
        self.posterior[i]
    }

    pub fn posteriors(&self) -> &[f64] {
        &self.posterior
    }

    pub fn working_syndrome(&self, j: usize) -> bool {
        self.dec.working_syndrome[j]
    }

    pub fn cn_active_degree(&self, j: usize) -> usize {
        self.dec.cn_active_degree[j] as usize
    }

    pub fn has_contradiction(&self) -> bool {
        self.dec.contradiction
    }

    /// The last four posteriors, oldest first, once four iterations have run.
    pub fn history(&self, i: usize) -> Option<[f64; HISTORY]> {
        if self.t < HISTORY {
            return None;
        }
        let h = &self.history[i];
        let mut out = [0.0; HISTORY];
        for (k, slot) in out.iter_mut().enumerate() {
            *slot = h[(self.t + k) % HISTORY];
        }
        Some(out)
    }

    #[cfg(test)]
    pub(crate) fn set_history_for_tests(&mut self, histories: &[[f64; HISTORY]]) {
        assert!(self.t >= HISTORY);
        for (i, h) in histories.iter().enumerate() {
            for (k, &x) in h.iter().enumerate() {
                self.history[i][(self.t + k) % HISTORY] = x;
            }
        }
    }

    /// Number of valid history entries, `min(t, 4)`.
    pub fn history_len(&self) -> usize {
        self.t.min(HISTORY)
    }

    /// Sum of the valid history entries (of the posterior when none).
    pub fn history_sum(&self, i: usize) -> f64 {
        let n = self.history_len();
        if n == 0 {
            return self.posterior[i];
        }
        // fixed summation order keeps rankings reproducible
        let h = &self.history[i];
        let mut sum = 0.0;
        for k in 0..n {
            sum += h[(self.t + HISTORY - n + k) % HISTORY];
        }
        sum
    }

    /// One flooding iteration: all check updates, then all variable updates.
    fn step(&mut self) {
        let g = self.graph;
        let clip = self.config.clip;
        let scale = self.config.scale;
        let status = &self.dec.status;
        for j in 0..g.n_cn {
            if self.dec.cn_active_degree[j] == 0 {
                continue;
            }
            let edges = g.cn_edges(j);
            let (mut min1, mut min2) = (clip, clip);
            let mut arg = usize::MAX;
            let mut negative = self.dec.working_syndrome[j];
            for e in edges.clone() {
                if status[g.edge_vn[e] as usize] != VnStatus::Undecided {
                    continue;
                }
                let m = self.v2c[e];
                negative ^= m < 0.0;
                let a = m.abs();
                if a < min1 {
                    min2 = min1;
                    min1 = a;
                    arg = e;
                } else if a < min2 {
                    min2 = a;
                }
            }
            for e in edges {
                if status[g.edge_vn[e] as usize] != VnStatus::Undecided {
                    continue;
                }
                let mag = if e == arg { min2 } else { min1 };
                let neg = negative ^ (self.v2c[e] < 0.0);
                self.c2v[e] = if neg { -scale * mag } else { scale * mag };
            }
        }
        let slot = self.t % HISTORY;
        for i in 0..g.n_vn {
            if status[i] != VnStatus::Undecided {
                continue;
            }
            let ids = g.vn_edge_ids(i);
            let mut sum = self.llr[i];
            for &e in ids {
                sum += self.c2v[e as usize];
            }
            self.posterior[i] = sum;
            self.history[i][slot] = sum;
            for &e in ids {
                let e = e as usize;
                self.v2c[e] = (sum - self.c2v[e]).clamp(-clip, clip);
            }
        }
        self.t += 1;
    }

    /// Runs `n` iterations unconditionally.
    pub fn iterate(&mut self, n: usize) {
        for _ in 0..n {
            self.step();
        }
    }

    /// Runs up to `n` iterations, stopping as soon as the hard decision
    /// satisfies the syndrome. Returns whether it does.
    pub fn iterate_until_converged(&mut self, n: usize) -> bool {
        for _ in 0..n {
            self.step();
            if self.satisfies_syndrome() {
                return true;
            }
        }
        false
    }

    #[inline]
    pub fn hard_bit(&self, i: usize) -> bool {
        match self.dec.status[i] {
            VnStatus::Undecided => self.posterior[i] <= 0.0,
            VnStatus::Zero => false,
            VnStatus::One => true,
        }
    }

    /// `ê_i = 1` iff `Λ_i <= 0` for undecided VNs; decided VNs report their value.
    pub fn hard_decision(&self) -> BitVector {
        let mut e = BitVector::zeros(self.graph.n_vn);
        for i in 0..self.graph.n_vn {
            if self.hard_bit(i) {
                e.set(i, true);
            }
        }
        e
    }

    /// Whether check `j` sees odd parity between its working bit and the hard
    /// decisions of its undecided neighbors.
    fn cn_unsatisfied(&self, j: usize) -> bool {
        let g = self.graph;
        let mut parity = self.dec.working_syndrome[j];
        for e in g.cn_edges(j) {
            let v = g.edge_vn[e] as usize;
            if self.dec.status[v] == VnStatus::Undecided && self.posterior[v] <= 0.0 {
                parity ^= true;
            }
        }
        parity
    }

    /// `H·ê = s` for the original syndrome, evaluated through the working
    /// syndrome (decided ones are already folded into it).
    pub fn satisfies_syndrome(&self) -> bool {
        (0..self.graph.n_cn).all(|j| !self.cn_unsatisfied(j))
    }

    /// Per-check unsatisfied flags (see [`BpState::satisfies_syndrome`]).
    pub fn unsatisfied_checks(&self) -> Vec<bool> {
        (0..self.graph.n_cn).map(|j| self.cn_unsatisfied(j)).collect()
    }

    /// Fixes `vn` to `value`, flipping neighbor working bits when it is 1.
    pub fn decimate(&mut self, vn: usize, value: bool) -> Result<(), BpError> {
        if self.dec.status[vn] != VnStatus::Undecided {
            return Err(BpError::AlreadyDecimated(vn));
        }
        self.decimate_inner(vn, value, None);
        Ok(())
    }

    fn decimate_inner(&mut self, vn: usize, value: bool, mut newly_single: Option<&mut Vec<u32>>) {
        let g = self.graph;
        self.dec.status[vn] = VnStatus::from_bit(value);
        for &e in g.vn_edge_ids(vn) {
            let j = g.edge_cn[e as usize] as usize;
            if value {
                self.dec.working_syndrome[j] ^= true;
            }
            let d = &mut self.dec.cn_active_degree[j];
            *d -= 1;
            match *d {
                0 if self.dec.working_syndrome[j] => self.dec.contradiction = true,
                1 => {
                    if let Some(stack) = newly_single.as_deref_mut() {
                        stack.push(j as u32);
                    }
                }
                _ => {}
            }
        }
    }

    /// Repeatedly decides the single undecided neighbor of every degree-one
    /// check to that check's working bit.
    pub fn peel(&mut self) -> PeelOutcome {
        if self.dec.contradiction {
            return PeelOutcome::Contradiction;
        }
        let g = self.graph;
        let mut stack: Vec<u32> = (0..g.n_cn)
            .rev()
            .filter(|&j| self.dec.cn_active_degree[j] == 1)
            .map(|j| j as u32)
            .collect();
        while let Some(j) = stack.pop() {
            let j = j as usize;
            if self.dec.cn_active_degree[j] != 1 {
                continue;
            }
            let v = g
                .cn_neighbors(j)
                .find(|&v| self.dec.status[v] == VnStatus::Undecided)
                .expect("active degree counts undecided neighbors");
            let value = self.dec.working_syndrome[j];
            self.decimate_inner(v, value, Some(&mut stack));
            if self.dec.contradiction {
                return PeelOutcome::Contradiction;
            }
        }
        PeelOutcome::Ok
    }
}

/// `Σ_{ê_i = 1} Λ_i` if `H·ê = s`, otherwise infinity.
pub fn path_metric(e: &BitVector, llr: &[f64], h: &SparseBitMatrix, s: &BitVector) -> f64 {
    match h.matvec(e) {
        Ok(he) if he == *s => e.ones().map(|i| llr[i]).sum(),
        _ => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn graph(rows: &[Vec<usize>], n: usize) -> (SparseBitMatrix, TannerGraph) {
        let h = SparseBitMatrix::from_rows(n, rows).unwrap();
        let g = TannerGraph::new(&h);
        (h, g)
    }

    #[test]
    fn init_messages_equal_priors() {
        let (_, g) = graph(&[vec![0, 1], vec![1, 2]], 3);
        let llr = vec![4.59512; 3];
        let st = BpState::new(&g, &llr, &BitVector::zeros(2), BpConfig::default()).unwrap();
        assert!(st.v2c.iter().all(|&m| m == 4.59512));
        assert!(st.hard_decision().is_zero());
        assert!(st.satisfies_syndrome());
        assert!(st.history(0).is_none());
    }

    #[test]
    fn min_sum_check_update_by_hand() {
        // one check over three VNs; incoming messages (+2, -3, +0.5)
        let (_, g) = graph(&[vec![0, 1, 2]], 3);
        let llr = vec![2.0, -3.0, 0.5];
        for (s, expected) in [(false, -0.5), (true, 0.5)] {
            let syn = BitVector::from_bools(&[s]);
            let mut st = BpState::new(&g, &llr, &syn, BpConfig::default()).unwrap();
            st.iterate(1);
            assert_eq!(st.c2v[0], expected);
            assert_eq!(st.c2v[1], -expected);
            assert_eq!(st.c2v[2], if s { 2.0 } else { -2.0 });
        }
    }

    #[test]
    fn degree_one_check_saturates() {
        let (_, g) = graph(&[vec![0]], 1);
        let llr = vec![3.0];
        let cfg = BpConfig {
            scale: 0.625,
            clip: 50.0,
        };
        let mut st = BpState::new(&g, &llr, &BitVector::from_bools(&[true]), cfg).unwrap();
        st.iterate(1);
        assert_eq!(st.c2v[0], -0.625 * 50.0);
        assert_eq!(st.posterior(0), 3.0 - 31.25);
        assert!(st.hard_bit(0));
    }

    #[test]
    fn hard_decision_rules() {
        let (_, g) = graph(&[vec![0, 1, 2]], 3);
        let llr = vec![1.0, -1.0, 0.0];
        let mut st = BpState::new(&g, &llr, &BitVector::zeros(1), BpConfig::default()).unwrap();
        assert_eq!(st.hard_decision().to_u8s(), vec![0, 1, 1]);
        st.decimate(0, true).unwrap();
        assert!(st.hard_bit(0));
        assert_eq!(st.decimate(0, false), Err(BpError::AlreadyDecimated(0)));
    }

    #[test]
    fn decimation_flips_neighbors() {
        let (_, g) = graph(&[vec![0], vec![0, 1], vec![1], vec![1], vec![1], vec![0, 1]], 2);
        let llr = vec![1.0; 2];
        let mut st = BpState::new(&g, &llr, &BitVector::zeros(6), BpConfig::default()).unwrap();
        st.decimate(0, false).unwrap();
        assert!((0..6).all(|j| !st.working_syndrome(j)));
        st.decimate(1, true).unwrap();
        let flipped: Vec<usize> = (0..6).filter(|&j| st.working_syndrome(j)).collect();
        assert_eq!(flipped, vec![1, 2, 3, 4, 5]);
        assert_eq!(st.cn_active_degree(1), 0);
    }

    #[test]
    fn decimated_vn_is_frozen() {
        let (_, g) = graph(&[vec![0, 1, 2], vec![1, 2]], 3);
        let llr = vec![1.0, 2.0, 3.0];
        let mut st = BpState::new(&g, &llr, &BitVector::from_bools(&[true, false]), BpConfig::default()).unwrap();
        st.iterate(2);
        st.decimate(1, false).unwrap();
        let before = (st.posterior(1), st.v2c.clone());
        st.iterate(3);
        assert_eq!(st.posterior(1), before.0);
        // edges of VN 1 are 1 (CN 0) and 3 (CN 1)
        assert_eq!(st.v2c[1], before.1[1]);
        assert_eq!(st.v2c[3], before.1[3]);
    }

    #[test]
    fn peel_hand_traces() {
        let (_, g) = graph(&[vec![0], vec![0, 1]], 2);
        let llr = vec![1.0; 2];
        let mut st = BpState::new(&g, &llr, &BitVector::from_bools(&[true, false]), BpConfig::default()).unwrap();
        assert_eq!(st.peel(), PeelOutcome::Ok);
        assert_eq!(st.hard_decision().to_u8s(), vec![1, 1]);

        let (_, g) = graph(&[vec![0], vec![0]], 1);
        let mut st = BpState::new(&g, &llr[..1], &BitVector::from_bools(&[true, false]), BpConfig::default()).unwrap();
        assert_eq!(st.peel(), PeelOutcome::Contradiction);
    }

    #[test]
    fn path_metric_cases() {
        let h = SparseBitMatrix::identity(3);
        let llr = vec![2.0; 3];
        let e = BitVector::from_u8s(&[1, 1, 1]);
        assert_eq!(path_metric(&e, &llr, &h, &e), 6.0);
        assert_eq!(path_metric(&e, &llr, &h, &BitVector::zeros(3)), f64::INFINITY);
        let z = BitVector::zeros(3);
        assert_eq!(path_metric(&z, &llr, &h, &z), 0.0);
    }

    #[test]
    fn working_syndrome_accounting_matches_matvec() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let (m, n) = (rng.gen_range(2..8), rng.gen_range(2..12));
            let entries: Vec<(usize, usize)> = (0..m)
                .flat_map(|r| (0..n).map(move |c| (r, c)))
                .filter(|_| rng.gen_bool(0.4))
                .collect();
            let h = SparseBitMatrix::from_entries(m, n, entries).unwrap();
            let g = TannerGraph::new(&h);
            let llr: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let s = BitVector::from_bools(&(0..m).map(|_| rng.gen_bool(0.5)).collect::<Vec<_>>());
            let mut st = BpState::new(&g, &llr, &s, BpConfig::default()).unwrap();
            st.iterate(rng.gen_range(0..4));
            for v in 0..n {
                if rng.gen_bool(0.3) {
                    st.decimate(v, rng.gen_bool(0.5)).unwrap();
                }
            }
            let e = st.hard_decision();
            assert_eq!(st.satisfies_syndrome(), h.matvec(&e).unwrap() == s);
            for j in 0..m {
                let undecided = h.row(j).iter().filter(|&&v| st.status(v) == VnStatus::Undecided).count();
                assert_eq!(st.cn_active_degree(j), undecided);
            }
        }
    }

    #[test]
    fn history_ring_order() {
        let (_, g) = graph(&[vec![0, 1]], 2);
        let llr = vec![1.0, -0.5];
        let mut st = BpState::new(&g, &llr, &BitVector::zeros(1), BpConfig::default()).unwrap();
        let mut seen = Vec::new();
        for _ in 0..6 {
            st.iterate(1);
            seen.push(st.posterior(0));
            assert_eq!(st.history_len(), seen.len().min(4));
        }
        assert_eq!(st.history(0).unwrap().to_vec(), seen[2..].to_vec());
        assert_eq!(st.history_sum(0), seen[2..].iter().sum::<f64>());
    }
}
