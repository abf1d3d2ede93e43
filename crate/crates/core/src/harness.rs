//! Seeded Monte-Carlo experiments, error-rate statistics and reports.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::codes::{config_b_coefficient, count_weight2_syndrome_configs, CodeDescription, CodesError};
use crate::gf2::SparseBitMatrix;
use crate::noise::{
    build_data_qubit_model, build_phenomenological_model, build_single_shot_model, parse_dem,
    DetectorModel, NoiseError,
};
use crate::window::{judge, sliding_decode, InnerDecoder, Outcome, WindowError, WindowPlan, WindowSchedule};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Noise(#[from] NoiseError),
    #[error(transparent)]
    Codes(#[from] CodesError),
    #[error(transparent)]
    Window(#[from] WindowError),
}

impl HarnessError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}

/// Noise model family; rates come from the sweep points.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum NoiseSpec {
    /// i.i.d. data flips decoded with `H_X`.
    DataQubit,
    /// One noisy syndrome round, `[H_X | I]`.
    SingleShot,
    /// `rounds` noisy rounds plus a final noiseless one.
    Phenomenological { rounds: usize },
    /// A detector error model file; its priors are used as given.
    Dem { path: PathBuf, rounds: usize },
}

impl NoiseSpec {
    /// Rounds `R` in the per-round rate `1 - (1 - P)^(1/R)`.
    pub fn rate_rounds(&self) -> usize {
        match self {
            NoiseSpec::DataQubit | NoiseSpec::SingleShot => 1,
            NoiseSpec::Phenomenological { rounds } | NoiseSpec::Dem { rounds, .. } => *rounds,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub p_d: f64,
    pub p_s: f64,
}

/// Inner decoder plus optional windowing.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecoderSpec {
    pub inner: InnerDecoder,
    /// `(W, F)`; `None` decodes the whole model at once.
    pub window: Option<(usize, usize)>,
    pub last_window: Option<InnerDecoder>,
    pub merge_tail: bool,
    /// For GDG: low error mode iff the largest physical rate is at most this
    /// value. `None` keeps the configured mode.
    pub low_error_below: Option<f64>,
}

impl DecoderSpec {
    pub fn global(inner: InnerDecoder) -> Self {
        DecoderSpec {
            inner,
            window: None,
            last_window: None,
            merge_tail: false,
            low_error_below: None,
        }
    }

    /// Inner decoder with the low-error rule applied for `point`.
    pub fn inner_for(&self, point: SweepPoint) -> InnerDecoder {
        let mut inner = self.inner.clone();
        if let (InnerDecoder::Gdg(cfg), Some(t)) = (&mut inner, self.low_error_below) {
            cfg.low_error_mode = point.p_d.max(point.p_s) <= t;
        }
        inner
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// Code description text; `None` selects the `[[288,12,18]]` code.
    pub code: Option<String>,
    pub noise: NoiseSpec,
    pub points: Vec<SweepPoint>,
    pub decoder: DecoderSpec,
    pub trials: u64,
    pub base_seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        if self.trials == 0 {
            return Err(HarnessError::Config("trials must be at least 1".into()));
        }
        if self.points.is_empty() {
            return Err(HarnessError::Config("sweep has no points".into()));
        }
        if self.noise.rate_rounds() == 0 {
            return Err(HarnessError::Config("rounds must be at least 1".into()));
        }
        if let InnerDecoder::Gdg(cfg) = &self.decoder.inner {
            cfg.validate().map_err(HarnessError::Config)?;
        }
        if let Some((w, f)) = self.decoder.window {
            if f == 0 || f >= w {
                return Err(WindowError::InvalidPlan { w, f }.into());
            }
        }
        Ok(())
    }

    pub fn code_description(&self) -> Result<CodeDescription, HarnessError> {
        Ok(match &self.code {
            Some(text) => text.parse()?,
            None => CodeDescription::bb288(),
        })
    }

    /// Builds the detector model of one sweep point.
    pub fn build_model(&self, point: SweepPoint) -> Result<DetectorModel, HarnessError> {
        if let NoiseSpec::Dem { path, .. } = &self.noise {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            return Ok(parse_dem(&text)?);
        }
        let code = self.code_description()?.build()?;
        Ok(match &self.noise {
            NoiseSpec::DataQubit => build_data_qubit_model(&code, point.p_d)?,
            NoiseSpec::SingleShot => build_single_shot_model(&code, point.p_d, point.p_s)?,
            NoiseSpec::Phenomenological { rounds } => {
                build_phenomenological_model(&code, *rounds, point.p_d, point.p_s)?
            }
            NoiseSpec::Dem { .. } => unreachable!(),
        })
    }
}

/// Decoder bound to one model: window views are built once.
pub struct PreparedDecoder {
    inner: InnerDecoder,
    last_window: Option<InnerDecoder>,
    schedule: WindowSchedule,
}

impl PreparedDecoder {
    pub fn new(model: &DetectorModel, spec: &DecoderSpec, point: SweepPoint) -> Result<Self, HarnessError> {
        let inner = spec.inner_for(point);
        let schedule = match spec.window {
            None => WindowSchedule::global(model),
            Some((w, f)) => {
                let mut plan = WindowPlan::new(w, f, inner.clone())?;
                plan.merge_tail = spec.merge_tail;
                WindowSchedule::new(model, &plan)?
            }
        };
        Ok(PreparedDecoder {
            inner,
            last_window: spec.last_window.clone(),
            schedule,
        })
    }

    pub fn schedule(&self) -> &WindowSchedule {
        &self.schedule
    }

    pub fn run_trial(&self, model: &DetectorModel, seed: u64) -> TrialRecord {
        let sample = model.sample(seed);
        let out = sliding_decode(model, &self.schedule, &self.inner, self.last_window.as_ref(), &sample.s)
            .expect("sample matches the model");
        let verdict = judge(&out.e, &sample, model);
        TrialRecord {
            seed,
            outcome: verdict.outcome,
            logical_ok: verdict.logical_ok,
            windows_converged: out.all_converged(),
            window_latency: out.windows.iter().map(|w| w.elapsed).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrialRecord {
    pub seed: u64,
    pub outcome: Outcome,
    pub logical_ok: bool,
    pub windows_converged: bool,
    pub window_latency: Vec<Duration>,
}

/// Failure counts; merging is associative and commutative.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tally {
    pub trials: u64,
    pub syndrome_failures: u64,
    pub logical_failures: u64,
    /// Syndrome failures whose logical parities were nevertheless right.
    pub syndrome_failures_logical_ok: u64,
    /// Trials where some window found no solution.
    pub unconverged_trials: u64,
}

impl Tally {
    pub fn add(&mut self, r: &TrialRecord) {
        self.trials += 1;
        match r.outcome {
            Outcome::Success => {}
            Outcome::SyndromeFailure => {
                self.syndrome_failures += 1;
                if r.logical_ok {
                    self.syndrome_failures_logical_ok += 1;
                }
            }
            Outcome::LogicalFailure => self.logical_failures += 1,
        }
        if !r.windows_converged {
            self.unconverged_trials += 1;
        }
    }

    pub fn merge(mut self, other: Tally) -> Tally {
        self.trials += other.trials;
        self.syndrome_failures += other.syndrome_failures;
        self.logical_failures += other.logical_failures;
        self.syndrome_failures_logical_ok += other.syndrome_failures_logical_ok;
        self.unconverged_trials += other.unconverged_trials;
        self
    }

    pub fn failures(&self) -> u64 {
        self.syndrome_failures + self.logical_failures
    }
}

/// Runs `trials` trials with seeds `base_seed + i` on `threads` workers
/// (0 = rayon default). The tally does not depend on the thread count.
pub fn run_trials(
    model: &DetectorModel,
    decoder: &PreparedDecoder,
    trials: u64,
    base_seed: u64,
    threads: usize,
) -> Result<(Tally, Vec<TrialRecord>), HarnessError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| HarnessError::Config(format!("thread pool: {e}")))?;
    let records: Vec<TrialRecord> = pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|i| decoder.run_trial(model, base_seed.wrapping_add(i)))
            .collect()
    });
    let tally = records.iter().fold(Tally::default(), |mut t, r| {
        t.add(r);
        t
    });
    Ok((tally, records))
}

/// Wilson score interval for `k` successes in `n` trials at normal quantile
/// `z` (1.96 for 95%).
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n_f = n as f64;
    let p = k as f64 / n_f;
    let z2 = z * z;
    let denom = 1.0 + z2 / n_f;
    let center = (p + z2 / (2.0 * n_f)) / denom;
    let half = z * (p * (1.0 - p) / n_f + z2 / (4.0 * n_f * n_f)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0))
}

/// Half width of the 95% Wilson interval.
pub fn wilson_half_width(k: u64, n: u64) -> f64 {
    let (lo, hi) = wilson_interval(k, n, 1.96);
    (hi - lo) / 2.0
}

/// Per-round rate `1 - (1 - P)^(1/R)`.
pub fn per_round_rate(total: f64, rounds: usize) -> Result<f64, HarnessError> {
    if !(0.0..=1.0).contains(&total) {
        return Err(HarnessError::Config(format!("failure rate {total} outside [0, 1]")));
    }
    if rounds == 0 {
        return Err(HarnessError::Config("rounds must be at least 1".into()));
    }
    if rounds == 1 {
        return Ok(total);
    }
    Ok(1.0 - (1.0 - total).powf(1.0 / rounds as f64))
}

/// Coefficients of the single-shot lower bound
/// `p_L(p_d) + c_a·p_s² + c_b·p_d·p_s²`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LowerBound {
    pub c_a: u64,
    pub c_b: u64,
}

impl LowerBound {
    pub fn for_checks(h: &SparseBitMatrix) -> Result<Self, HarnessError> {
        Ok(LowerBound {
            c_a: count_weight2_syndrome_configs(h),
            c_b: config_b_coefficient(h)?,
        })
    }

    pub fn value(&self, p_d: f64, p_s: f64, base: f64) -> f64 {
        lower_bound_curve(self.c_a, self.c_b, p_d, p_s, base)
    }
}

pub fn lower_bound_curve(c_a: u64, c_b: u64, p_d: f64, p_s: f64, base: f64) -> f64 {
    base + c_a as f64 * p_s * p_s + c_b as f64 * p_d * p_s * p_s
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub p_d: f64,
    pub p_s: f64,
    #[serde(flatten)]
    pub tally: Tally,
    /// Total failure rate `P_{L,R}`.
    pub ler: f64,
    pub ler_interval: (f64, f64),
    pub rounds: usize,
    pub per_round: f64,
    pub per_round_interval: (f64, f64),
}

impl PointReport {
    pub fn new(point: SweepPoint, tally: Tally, rounds: usize) -> Result<Self, HarnessError> {
        let k = tally.failures();
        let ler = k as f64 / tally.trials as f64;
        let (lo, hi) = wilson_interval(k, tally.trials, 1.96);
        Ok(PointReport {
            p_d: point.p_d,
            p_s: point.p_s,
            tally,
            ler,
            ler_interval: (lo, hi),
            rounds,
            per_round: per_round_rate(ler, rounds)?,
            per_round_interval: (per_round_rate(lo, rounds)?, per_round_rate(hi, rounds)?),
        })
    }

    pub fn half_width(&self) -> f64 {
        (self.ler_interval.1 - self.ler_interval.0) / 2.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub decoder: String,
    pub points: Vec<PointReport>,
}

impl ExperimentReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "decoder,p_d,p_s,trials,failures,syndrome_failures,logical_failures,ler,ler_lo,ler_hi,rounds,per_round\n",
        );
        for p in &self.points {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                self.decoder,
                p.p_d,
                p.p_s,
                p.tally.trials,
                p.tally.failures(),
                p.tally.syndrome_failures,
                p.tally.logical_failures,
                p.ler,
                p.ler_interval.0,
                p.ler_interval.1,
                p.rounds,
                p.per_round
            ));
        }
        out
    }

    /// Writes `<stem>.json` and `<stem>.csv`.
    pub fn write(&self, stem: &Path) -> Result<(), HarnessError> {
        for (ext, body) in [("json", self.to_json()), ("csv", self.to_csv())] {
            let path = stem.with_extension(ext);
            let mut f = std::fs::File::create(&path).map_err(|e| HarnessError::io(&path, e))?;
            f.write_all(body.as_bytes()).map_err(|e| HarnessError::io(&path, e))?;
        }
        Ok(())
    }
}

/// Runs every sweep point of `config`.
pub fn run_experiment(config: &ExperimentConfig, threads: usize) -> Result<ExperimentReport, HarnessError> {
    config.validate()?;
    let mut points = Vec::with_capacity(config.points.len());
    for &point in &config.points {
        let model = config.build_model(point)?;
        let decoder = PreparedDecoder::new(&model, &config.decoder, point)?;
        let (tally, _) = run_trials(&model, &decoder, config.trials, config.base_seed, threads)?;
        log::info!(
            "p_d={} p_s={}: {} / {} failures",
            point.p_d,
            point.p_s,
            tally.failures(),
            tally.trials
        );
        points.push(PointReport::new(point, tally, config.noise.rate_rounds())?);
    }
    Ok(ExperimentReport {
        config: config.clone(),
        decoder: config.decoder.inner.label(),
        points,
    })
}

/// Per-window decoding latency summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LatencySummary {
    pub windows: usize,
    pub mean_us: f64,
    pub p50_us: f64,
    pub p90_us: f64,
    pub p99_us: f64,
    pub max_us: f64,
    /// `(upper bound in microseconds, count)`, power-of-two buckets.
    pub histogram: Vec<(u64, usize)>,
}

impl LatencySummary {
    pub fn from_durations(mut samples: Vec<Duration>) -> Self {
        samples.sort_unstable();
        let us = |d: Duration| d.as_secs_f64() * 1e6;
        let pick = |q: f64| {
            if samples.is_empty() {
                0.0
            } else {
                let idx = ((samples.len() - 1) as f64 * q).round() as usize;
                us(samples[idx])
            }
        };
        let mut histogram: Vec<(u64, usize)> = Vec::new();
        for &d in &samples {
            let bound = (d.as_micros() as u64).max(1).next_power_of_two();
            match histogram.last_mut() {
                Some((b, n)) if *b == bound => *n += 1,
                _ => histogram.push((bound, 1)),
            }
        }
        LatencySummary {
            windows: samples.len(),
            mean_us: if samples.is_empty() {
                0.0
            } else {
                samples.iter().map(|&d| us(d)).sum::<f64>() / samples.len() as f64
            },
            p50_us: pick(0.5),
            p90_us: pick(0.9),
            p99_us: pick(0.99),
            max_us: samples.last().map_or(0.0, |&d| us(d)),
            histogram,
        }
    }
}

/// Single-threaded latency measurement over `trials` trials of one point.
pub fn bench(
    config: &ExperimentConfig,
    point: SweepPoint,
    trials: u64,
) -> Result<(LatencySummary, Tally, Duration), HarnessError> {
    config.validate()?;
    let model = config.build_model(point)?;
    let decoder = PreparedDecoder::new(&model, &config.decoder, point)?;
    let clock = Instant::now();
    let mut tally = Tally::default();
    let mut latencies = Vec::new();
    for i in 0..trials {
        let r = decoder.run_trial(&model, config.base_seed.wrapping_add(i));
        tally.add(&r);
        latencies.extend(r.window_latency.iter().copied());
    }
    Ok((LatencySummary::from_durations(latencies), tally, clock.elapsed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gdg::GdgConfig;
    use crate::osd::OsdConfig;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn per_round_examples() {
        assert_eq!(per_round_rate(0.0, 7).unwrap(), 0.0);
        // 0.0104807...
        assert!((per_round_rate(0.1, 10).unwrap() - 0.010480).abs() < 1e-6);
        assert_eq!(per_round_rate(0.37, 1).unwrap(), 0.37);
        assert!(per_round_rate(1.5, 2).is_err());
        assert!(per_round_rate(0.5, 0).is_err());
    }

    #[test]
    fn per_round_never_exceeds_total() {
        for k in 0..=20 {
            let p = k as f64 / 20.0;
            for r in 1..12 {
                assert!(per_round_rate(p, r).unwrap() <= p + 1e-15);
            }
        }
    }

    #[test]
    fn wilson_contains_estimate() {
        for (k, n) in [(0, 10), (3, 10), (10, 10), (5, 100_000), (1, 1)] {
            let (lo, hi) = wilson_interval(k, n, 1.96);
            let p = k as f64 / n as f64;
            assert!(lo <= p && p <= hi, "{k}/{n}");
            assert!((0.0..=1.0).contains(&lo) && (0.0..=1.0).contains(&hi));
        }
        // 10/100 reference value
        let (lo, hi) = wilson_interval(10, 100, 1.96);
        assert!((lo - 0.05523).abs() < 1e-4 && (hi - 0.17437).abs() < 1e-4);
    }

    #[test]
    fn wilson_coverage_on_bernoulli_streams() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &p in &[0.01, 0.1, 0.4] {
            let reps = 2000;
            let mut covered = 0;
            for _ in 0..reps {
                let n = 200;
                let k = (0..n).filter(|_| rng.gen_bool(p)).count() as u64;
                let (lo, hi) = wilson_interval(k, n, 1.96);
                if lo <= p && p <= hi {
                    covered += 1;
                }
            }
            let rate = covered as f64 / reps as f64;
            assert!(rate > 0.92, "coverage {rate} at p={p}");
        }
    }

    #[test]
    fn lower_bound_examples() {
        assert_eq!(lower_bound_curve(864, 2592, 0.05, 0.0, 0.003), 0.003);
        let v = lower_bound_curve(864, 2592, 0.05, 1e-3, 0.0);
        assert!((v - (864e-6 + 2592.0 * 0.05e-6)).abs() < 1e-15);
        // weight-one columns have no weight-two syndrome patterns
        let lb = LowerBound::for_checks(&SparseBitMatrix::identity(5)).unwrap();
        assert_eq!(lb.c_a, 0);
    }

    #[test]
    fn tally_merge_is_a_monoid() {
        let a = Tally {
            trials: 5,
            syndrome_failures: 1,
            logical_failures: 2,
            syndrome_failures_logical_ok: 1,
            unconverged_trials: 1,
        };
        let b = Tally {
            trials: 3,
            logical_failures: 1,
            ..Tally::default()
        };
        assert_eq!(a.merge(b), b.merge(a));
        assert_eq!(a.merge(Tally::default()), a);
        assert_eq!(a.merge(b).failures(), 4);
    }

    fn tiny_config() -> ExperimentConfig {
        ExperimentConfig {
            code: Some("3 3\na: 1 + x\nb: 1 + y\n".into()),
            noise: NoiseSpec::DataQubit,
            points: vec![SweepPoint { p_d: 0.0, p_s: 0.0 }],
            decoder: DecoderSpec::global(InnerDecoder::Osd(OsdConfig::osd0(10))),
            trials: 100,
            base_seed: 5,
        }
    }

    #[test]
    fn clamped_noise_never_fails() {
        let report = run_experiment(&tiny_config(), 1).unwrap();
        assert_eq!(report.points[0].tally.failures(), 0);
        assert_eq!(report.points[0].tally.trials, 100);
    }

    #[test]
    fn config_validation() {
        let mut c = tiny_config();
        c.trials = 0;
        assert!(matches!(c.validate(), Err(HarnessError::Config(_))));
        let mut c = tiny_config();
        c.points.clear();
        assert!(c.validate().is_err());
        let mut c = tiny_config();
        c.decoder.window = Some((2, 2));
        assert!(c.validate().is_err());
    }

    #[test]
    fn low_error_rule() {
        let mut spec = DecoderSpec::global(InnerDecoder::Gdg(GdgConfig {
            low_error_mode: false,
            ..GdgConfig::n144_circuit()
        }));
        spec.low_error_below = Some(0.002);
        let at = |p: f64| match spec.inner_for(SweepPoint { p_d: p, p_s: p }) {
            InnerDecoder::Gdg(c) => c.low_error_mode,
            _ => unreachable!(),
        };
        assert!(at(0.002));
        assert!(!at(0.003));
    }

    #[test]
    fn latency_summary_orders_samples() {
        let s = LatencySummary::from_durations(
            [5, 1, 3, 100, 2].iter().map(|&u| Duration::from_micros(u)).collect(),
        );
        assert_eq!(s.windows, 5);
        assert_eq!(s.p50_us, 3.0);
        assert_eq!(s.max_us, 100.0);
        assert_eq!(s.histogram.iter().map(|h| h.1).sum::<usize>(), 5);
    }
}
