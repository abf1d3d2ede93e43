use gdg_core::codes::{bb288, CssCode};
use gdg_core::gdg::GdgConfig;
use gdg_core::gf2::{BitVector, SparseBitMatrix};
use gdg_core::noise::{build_phenomenological_model, DetectorModel};
use gdg_core::osd::OsdConfig;
use gdg_core::window::{global_decode, sliding_decode, InnerDecoder, WindowPlan, WindowSchedule};
use proptest::prelude::*;

fn repetition(n: usize) -> CssCode {
    let rows: Vec<Vec<usize>> = (0..n - 1).map(|i| vec![i, i + 1]).collect();
    let hx = SparseBitMatrix::from_rows(n, &rows).unwrap();
    CssCode::from_checks(hx, SparseBitMatrix::zeros(0, n), None, "repetition".into()).unwrap()
}

/// Minimum path-metric solution of `H·e = s` by enumeration.
fn exhaustive_ml(model: &DetectorModel, s: &BitVector) -> BitVector {
    let n = model.n_faults();
    assert!(n <= 20);
    let llr = model.llrs();
    let mut best: Option<(f64, BitVector)> = None;
    for mask in 0u32..1 << n {
        let e = BitVector::from_bools(&(0..n).map(|i| mask >> i & 1 == 1).collect::<Vec<_>>());
        if model.h().matvec(&e).unwrap() != *s {
            continue;
        }
        let pm: f64 = e.ones().map(|i| llr[i]).sum();
        if best.as_ref().is_none_or(|(b, _)| pm < *b) {
            best = Some((pm, e));
        }
    }
    best.unwrap().1
}

fn decoders() -> Vec<InnerDecoder> {
    vec![
        InnerDecoder::Osd(OsdConfig::osd_cs(4, 20)),
        InnerDecoder::Gdg(GdgConfig::n144_circuit()),
    ]
}

#[test]
fn single_measurement_fault_is_committed() {
    let model = build_phenomenological_model(&repetition(3), 2, 0.05, 0.02).unwrap();
    // round-0 measurement fault on the first check: columns are
    // [data r0 (3), meas r0 (2), data r1 (3), meas r1 (2)]
    let fault = BitVector::from_indices(model.n_faults(), [3]);
    let s = model.h().matvec(&fault).unwrap();
    assert_eq!(s.ones().collect::<Vec<_>>(), vec![0, 2]);
    assert_eq!(exhaustive_ml(&model, &s), fault);
    for inner in decoders() {
        let plan = WindowPlan::new(2, 1, inner).unwrap();
        let schedule = WindowSchedule::new(&model, &plan).unwrap();
        let out = sliding_decode(&model, &schedule, &plan.inner, None, &s).unwrap();
        assert_eq!(out.e, fault, "{}", plan.inner.label());
        assert!(out.syndrome_ok);
        assert!(model.logicals().matvec(&out.e).unwrap().is_zero());
    }
}

#[test]
fn sliding_matches_global_on_single_faults() {
    let model = build_phenomenological_model(&bb288(), 3, 0.01, 0.01).unwrap();
    let inner = InnerDecoder::Gdg(GdgConfig::n288_circuit());
    let plan = WindowPlan::new(3, 1, inner.clone()).unwrap();
    let schedule = WindowSchedule::new(&model, &plan).unwrap();
    let single = WindowSchedule::new(&model, &WindowPlan::new(4, 1, inner.clone()).unwrap()).unwrap();
    assert_eq!(single.views.len(), 1);
    let zero = BitVector::zeros(model.n_detectors());
    let a = sliding_decode(&model, &schedule, &inner, None, &zero).unwrap();
    assert!(a.e.is_zero() && a.syndrome_ok);
    for c in (0..model.n_faults()).step_by(37) {
        let fault = BitVector::from_indices(model.n_faults(), [c]);
        let s = model.h().matvec(&fault).unwrap();
        let sliding = sliding_decode(&model, &schedule, &inner, None, &s).unwrap();
        let whole = sliding_decode(&model, &single, &inner, None, &s).unwrap();
        let global = global_decode(&model, &inner, &s).unwrap();
        assert_eq!(sliding.e, whole.e, "column {c}");
        assert_eq!(whole.e, global.e, "column {c}");
        assert_eq!(sliding.e, fault, "column {c}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn commits_partition_the_columns(rounds in 1usize..6, w in 2usize..5, f in 1usize..4, merge in any::<bool>()) {
        prop_assume!(f < w);
        let model = build_phenomenological_model(&repetition(4), rounds, 0.05, 0.02).unwrap();
        let mut plan = WindowPlan::new(w, f, InnerDecoder::Osd(OsdConfig::osd0(10))).unwrap();
        plan.merge_tail = merge;
        let schedule = WindowSchedule::new(&model, &plan).unwrap();
        let mut seen = vec![0u32; model.n_faults()];
        for view in &schedule.views {
            for &k in &view.commit {
                seen[view.columns[k].unwrap()] += 1;
            }
        }
        prop_assert!(seen.iter().all(|&n| n == 1));
    }

    #[test]
    fn converged_windows_chain_to_the_full_system(seed in 0u64..10_000, rounds in 1usize..5) {
        let model = build_phenomenological_model(&repetition(5), rounds, 0.08, 0.05).unwrap();
        let sample = model.sample(seed);
        for inner in decoders() {
            let plan = WindowPlan::new(2, 1, inner).unwrap();
            let schedule = WindowSchedule::new(&model, &plan).unwrap();
            let out = sliding_decode(&model, &schedule, &plan.inner, None, &sample.s).unwrap();
            let residual = model.h().matvec(&out.e).unwrap().xor(&sample.s);
            prop_assert_eq!(out.syndrome_ok, residual.is_zero());
            if out.all_converged() {
                prop_assert!(out.syndrome_ok);
                prop_assert!(out.windows.iter().all(|w| w.committed_blocks_clear));
            }
        }
    }

    #[test]
    fn residual_equals_recomputed_syndrome(seed in 0u64..10_000) {
        // brute-force recomputation of s + H·ê_c after each commit
        let model = build_phenomenological_model(&repetition(4), 4, 0.1, 0.05).unwrap();
        let sample = model.sample(seed);
        let plan = WindowPlan::new(3, 1, InnerDecoder::Osd(OsdConfig::osd_cs(2, 10))).unwrap();
        let schedule = WindowSchedule::new(&model, &plan).unwrap();
        let out = sliding_decode(&model, &schedule, &plan.inner, None, &sample.s).unwrap();
        let mut committed = BitVector::zeros(model.n_faults());
        for (view, diag) in schedule.views.iter().zip(&out.windows) {
            for &c in &diag.committed_ones {
                committed.flip(c);
            }
            let residual = model.h().matvec(&committed).unwrap().xor(&sample.s);
            let next_start = schedule
                .views
                .iter()
                .find(|v| v.blocks.start > view.blocks.start)
                .map_or(view.rows.end, |v| v.rows.start);
            let clear = (view.rows.start..next_start).all(|r| !residual.get(r));
            prop_assert_eq!(clear, diag.committed_blocks_clear);
        }
        prop_assert_eq!(committed, out.e);
    }
}
