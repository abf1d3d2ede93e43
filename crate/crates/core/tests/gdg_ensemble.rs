use gdg_core::codes::bb288;
use gdg_core::gdg::{gdg_decode, reduce_branches, run_branch, run_ensemble, GdgConfig};
use gdg_core::noise::{build_data_qubit_model, build_single_shot_model};

/// Compares forked and replayed branches; returns the deepest main branch.
fn check_replay(config: &GdgConfig, model: &gdg_core::noise::DetectorModel, seeds: std::ops::Range<u64>) -> usize {
    let llr = model.llrs();
    let mut deepest = 0;
    for seed in seeds {
        let sample = model.sample(seed);
        let forked = run_ensemble(model.h(), &llr, &sample.s, config);
        deepest = deepest.max(forked[0].depth);
        let specs = config.branches();
        assert_eq!(forked.len(), specs.len());
        for (spec, got) in specs.iter().zip(&forked) {
            let replay = run_branch(model.h(), &llr, &sample.s, *spec, config);
            assert_eq!(got, &replay, "seed {seed}, branch {:?}", spec.kind);
        }
    }
    deepest
}

#[test]
fn forked_ensemble_matches_replay_low_error_mode() {
    let code = bb288();
    let model = build_data_qubit_model(&code, 0.09).unwrap();
    let deepest = check_replay(&GdgConfig::data_qubit(), &model, 0..6);
    eprintln!("deepest main branch: {deepest}");
    assert!(deepest > GdgConfig::data_qubit().tree_depth + 1);
}

#[test]
fn forked_ensemble_matches_replay_with_aggressive_decimation() {
    let code = bb288();
    let model = build_single_shot_model(&code, 0.09, 0.01).unwrap();
    let config = GdgConfig {
        low_error_mode: false,
        ..GdgConfig::n144_circuit()
    };
    let deepest = check_replay(&config, &model, 0..6);
    eprintln!("deepest main branch: {deepest}");
    assert!(deepest > config.tree_depth + 1);
}

#[test]
fn decoded_estimate_reproduces_syndrome() {
    let code = bb288();
    let model = build_data_qubit_model(&code, 0.05).unwrap();
    let llr = model.llrs();
    let config = GdgConfig::data_qubit();
    for seed in 100..110 {
        let sample = model.sample(seed);
        let out = gdg_decode(model.h(), &llr, &sample.s, &config);
        if let Some(e) = &out.e {
            assert_eq!(model.h().matvec(e).unwrap(), sample.s);
            let best = reduce_branches(&out.branches).unwrap();
            assert_eq!(best.path_metric, out.path_metric);
            let pm: f64 = e.ones().map(|i| llr[i]).sum();
            assert!((pm - out.path_metric).abs() < 1e-9);
        }
    }
}
