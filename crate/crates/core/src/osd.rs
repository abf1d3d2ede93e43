//! Ordered statistics decoding: OSD-0 and the combination sweep OSD-CS(λ),
//! optionally preceded by belief propagation.

use thiserror::Error;

use crate::bp::{path_metric, BpConfig, BpError, BpState, TannerGraph};
use crate::gf2::{BitVector, Gf2Error, SparseBitMatrix};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OsdError {
    #[error("syndrome is not in the span of the parity-check matrix columns")]
    NotInSpan,
    #[error(transparent)]
    Gf2(Gf2Error),
    #[error(transparent)]
    Bp(#[from] BpError),
}

impl From<Gf2Error> for OsdError {
    fn from(e: Gf2Error) -> Self {
        match e {
            Gf2Error::NotInSpan => OsdError::NotInSpan,
            other => OsdError::Gf2(other),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct OsdConfig {
    /// Combination-sweep order λ; 0 gives OSD-0.
    pub order: usize,
    /// BP iterations before ordering (early-stopped on convergence).
    pub bp_iterations: usize,
    pub bp: BpConfig,
    /// Restrict the sweep (and, with `bp_on_shortened`, BP) to the first
    /// `n` ranked columns.
    pub restrict_to: Option<usize>,
    /// Rank by the latest posterior instead of the last-four history sum.
    pub rank_by_latest: bool,
    /// Re-run BP on the restricted columns before the OSD stage.
    pub bp_on_shortened: bool,
}

impl Default for OsdConfig {
    fn default() -> Self {
        OsdConfig {
            order: 10,
            bp_iterations: 100,
            bp: BpConfig::default(),
            restrict_to: None,
            rank_by_latest: false,
            bp_on_shortened: false,
        }
    }
}

impl OsdConfig {
    pub fn osd0(bp_iterations: usize) -> Self {
        OsdConfig {
            order: 0,
            bp_iterations,
            ..Default::default()
        }
    }

    pub fn osd_cs(order: usize, bp_iterations: usize) -> Self {
        OsdConfig {
            order,
            bp_iterations,
            ..Default::default()
        }
    }
}

/// Column order ascending by score (most likely to flip first); ties keep
/// the lower index first.
pub fn rank_columns(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]).then(a.cmp(&b)));
    order
}

/// Solution supported on the first independent columns under `order`.
pub fn osd0(h: &SparseBitMatrix, s: &BitVector, order: &[usize]) -> Result<BitVector, OsdError> {
    Ok(h.row_reduce(order)?.solve(s)?)
}

/// Minimum path-metric candidate among the OSD-0 solution, every weight-one
/// non-pivot flip, and every weight-two flip among the first `lambda`
/// non-pivot columns (all in `order`). With `restrict_to = Some(n)` only
/// non-pivots within the first `n` ranked columns are swept. Ties go to the
/// lexicographically smallest estimate.
pub fn osd_cs(
    h: &SparseBitMatrix,
    s: &BitVector,
    order: &[usize],
    llr: &[f64],
    lambda: usize,
    restrict_to: Option<usize>,
) -> Result<BitVector, OsdError> {
    let elim = h.row_reduce(order)?;
    let t = elim.transform(s)?;
    let rank = elim.rank();
    if t.ones().any(|r| r >= rank) {
        return Err(OsdError::NotInSpan);
    }
    let pivots = elim.pivots();
    let mut t_piv = BitVector::zeros(rank);
    for k in t.ones() {
        t_piv.set(k, true);
    }
    let pivot_cost = |x: &BitVector| -> f64 { x.ones().map(|k| llr[pivots[k]]).sum() };
    let assemble = |x: &BitVector, flips: &[usize]| -> BitVector {
        let mut e = BitVector::zeros(h.n_cols());
        for k in x.ones() {
            e.set(pivots[k], true);
        }
        for &c in flips {
            e.set(c, true);
        }
        e
    };

    let mut best_e = assemble(&t_piv, &[]);
    let mut best_pm = pivot_cost(&t_piv);
    if lambda == 0 {
        return Ok(best_e);
    }
    let mut is_pivot = vec![false; h.n_cols()];
    for &p in pivots {
        is_pivot[p] = true;
    }
    let scope = restrict_to.map_or(order.len(), |n| n.min(order.len()));
    let non_pivots: Vec<usize> = order[..scope].iter().copied().filter(|&c| !is_pivot[c]).collect();
    let reduced: Vec<BitVector> = non_pivots.iter().map(|&c| elim.reduced_column(c)).collect();

    let consider = |x: BitVector, flips: &[usize], best_e: &mut BitVector, best_pm: &mut f64| {
        let pm = pivot_cost(&x) + flips.iter().map(|&c| llr[c]).sum::<f64>();
        if pm < *best_pm {
            *best_pm = pm;
            *best_e = assemble(&x, flips);
        } else if pm == *best_pm {
            let e = assemble(&x, flips);
            if e < *best_e {
                *best_e = e;
            }
        }
    };
    for (a, &c) in non_pivots.iter().enumerate() {
        consider(t_piv.xor(&reduced[a]), &[c], &mut best_e, &mut best_pm);
    }
    let head = lambda.min(non_pivots.len());
    for a in 0..head {
        let xa = t_piv.xor(&reduced[a]);
        for b in a + 1..head {
            consider(
                xa.xor(&reduced[b]),
                &[non_pivots[a], non_pivots[b]],
                &mut best_e,
                &mut best_pm,
            );
        }
    }
    Ok(best_e)
}

/// Result of [`bp_osd`].
#[derive(Clone, Debug, PartialEq)]
pub struct OsdOutcome {
    pub e: BitVector,
    pub path_metric: f64,
    /// BP alone satisfied the syndrome; OSD was skipped.
    pub bp_converged: bool,
}

fn ranking_scores(state: &BpState<'_>, latest: bool) -> Vec<f64> {
    let n = state.graph().n_vn();
    if latest {
        state.posteriors().to_vec()
    } else {
        (0..n).map(|i| state.history_sum(i)).collect()
    }
}

/// BP followed, if BP does not converge, by OSD-CS(λ) on the ranked columns.
pub fn bp_osd(
    h: &SparseBitMatrix,
    llr: &[f64],
    s: &BitVector,
    config: &OsdConfig,
) -> Result<OsdOutcome, OsdError> {
    let graph = TannerGraph::new(h);
    let mut state = BpState::new(&graph, llr, s, config.bp)?;
    if state.satisfies_syndrome() || state.iterate_until_converged(config.bp_iterations) {
        let e = state.hard_decision();
        let pm = path_metric(&e, llr, h, s);
        return Ok(OsdOutcome {
            e,
            path_metric: pm,
            bp_converged: true,
        });
    }
    let order = rank_columns(&ranking_scores(&state, config.rank_by_latest));
    let e = match (config.restrict_to, config.bp_on_shortened) {
        (Some(n), true) if n < h.n_cols() => {
            let kept = &order[..n];
            let h_short = h.select_columns(kept);
            let llr_short: Vec<f64> = kept.iter().map(|&c| llr[c]).collect();
            let inner = OsdConfig {
                restrict_to: None,
                bp_on_shortened: false,
                ..*config
            };
            let short = bp_osd(&h_short, &llr_short, s, &inner)?;
            BitVector::from_indices(h.n_cols(), short.e.ones().map(|k| kept[k]))
        }
        _ => osd_cs(h, s, &order, llr, config.order, config.restrict_to)?,
    };
    let pm = path_metric(&e, llr, h, s);
    Ok(OsdOutcome {
        e,
        path_metric: pm,
        bp_converged: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_instance(rng: &mut ChaCha8Rng, m: usize, n: usize) -> (SparseBitMatrix, BitVector, Vec<f64>) {
        let entries: Vec<(usize, usize)> = (0..m)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .filter(|_| rng.gen_bool(0.3))
            .collect();
        let h = SparseBitMatrix::from_entries(m, n, entries).unwrap();
        let e = BitVector::from_bools(&(0..n).map(|_| rng.gen_bool(0.2)).collect::<Vec<_>>());
        let s = h.matvec(&e).unwrap();
        let llr = (0..n).map(|_| rng.gen_range(0.1..6.0)).collect();
        (h, s, llr)
    }

    #[test]
    fn ranking_examples() {
        assert_eq!(rank_columns(&[3.0, -1.0, 0.0]), vec![1, 2, 0]);
        assert_eq!(rank_columns(&[1.0; 4]), vec![0, 1, 2, 3]);
    }

    #[test]
    fn osd0_identity_and_zero() {
        let h = SparseBitMatrix::identity(4);
        let s = BitVector::from_u8s(&[1, 0, 1, 1]);
        assert_eq!(osd0(&h, &s, &[3, 1, 0, 2]).unwrap(), s);
        let z = BitVector::zeros(4);
        assert_eq!(osd0(&h, &z, &[0, 1, 2, 3]).unwrap(), z);
        let col = SparseBitMatrix::from_columns(2, &[vec![0, 1]]).unwrap();
        assert_eq!(osd0(&col, &BitVector::from_u8s(&[1, 0]), &[0]), Err(OsdError::NotInSpan));
    }

    #[test]
    fn osd0_random_support_on_pivots() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..100 {
            let (h, s, llr) = random_instance(&mut rng, 8, 20);
            let order = rank_columns(&llr);
            let e = osd0(&h, &s, &order).unwrap();
            assert_eq!(h.matvec(&e).unwrap(), s);
            let elim = h.row_reduce(&order).unwrap();
            assert!(e.ones().all(|c| elim.pivots().contains(&c)));
        }
    }

    /// Explicit candidate enumeration, independent of the reduced-column trick.
    fn cs_oracle(h: &SparseBitMatrix, s: &BitVector, order: &[usize], llr: &[f64], lambda: usize) -> f64 {
        let elim = h.row_reduce(order).unwrap();
        let np: Vec<usize> = order.iter().copied().filter(|c| !elim.pivots().contains(c)).collect();
        let mut sets: Vec<Vec<usize>> = vec![vec![]];
        if lambda > 0 {
            sets.extend(np.iter().map(|&c| vec![c]));
        }
        let head = lambda.min(np.len());
        for a in 0..head {
            for b in a + 1..head {
                sets.push(vec![np[a], np[b]]);
            }
        }
        sets.iter()
            .map(|flips| {
                let f = BitVector::from_indices(h.n_cols(), flips.iter().copied());
                let rest = s.xor(&h.matvec(&f).unwrap());
                let x = elim.solve(&rest).unwrap().xor(&f);
                path_metric(&x, llr, h, s)
            })
            .fold(f64::INFINITY, f64::min)
    }

    #[test]
    fn osd_cs_matches_candidate_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let (h, s, llr) = random_instance(&mut rng, 4, 8);
            let order = rank_columns(&llr);
            let lambda = rng.gen_range(0..5);
            let e = osd_cs(&h, &s, &order, &llr, lambda, None).unwrap();
            let pm = path_metric(&e, &llr, &h, &s);
            let oracle = cs_oracle(&h, &s, &order, &llr, lambda);
            assert!((pm - oracle).abs() < 1e-9, "{pm} vs {oracle}");
            let pm0 = path_metric(&osd0(&h, &s, &order).unwrap(), &llr, &h, &s);
            assert!(pm <= pm0);
        }
    }

    #[test]
    fn osd_cs_order_zero_is_osd0() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (h, s, llr) = random_instance(&mut rng, 6, 14);
            let order = rank_columns(&llr);
            assert_eq!(osd_cs(&h, &s, &order, &llr, 0, None).unwrap(), osd0(&h, &s, &order).unwrap());
        }
    }

    #[test]
    fn bp_osd_returns_valid_estimates() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..100 {
            let (h, s, llr) = random_instance(&mut rng, 6, 14);
            for cfg in [OsdConfig::osd0(10), OsdConfig::osd_cs(4, 10)] {
                let out = bp_osd(&h, &llr, &s, &cfg).unwrap();
                assert_eq!(h.matvec(&out.e).unwrap(), s);
                assert!(out.path_metric.is_finite());
            }
        }
    }
}
