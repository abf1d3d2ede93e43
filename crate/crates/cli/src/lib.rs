//! Command implementations behind the `gdg` binary.

pub mod args;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use gdg_core::codes::{
    config_b_coefficient, count_weight2_syndrome_configs, cyclic_gcd_gf2,
    enumerate_low_weight_syndrome_codewords, poly_gcd_gf2, weight2_syndrome_codewords,
    CodeDescription, CodesError, CssCode, Gf2Poly,
};
use gdg_core::gdg::GdgConfig;
use gdg_core::gf2::BitVector;
use gdg_core::harness::{
    bench, run_experiment, DecoderSpec, ExperimentConfig, HarnessError, LatencySummary, NoiseSpec,
    SweepPoint, Tally,
};
use gdg_core::noise::{
    build_data_qubit_model, build_phenomenological_model, build_single_shot_model, parse_dem,
    NoiseError,
};
use gdg_core::osd::OsdConfig;
use gdg_core::window::{sliding_decode, InnerDecoder, WindowError, WindowPlan, WindowSchedule};

use args::{
    AnalyzeCommand, BuildCodeArgs, BuildModelArgs, Cli, Command, DecodeArgs, DecoderArgs,
    DecoderKind, ExperimentArgs, GcdArgs, LowError, ModelKind, NoiseKind, Preset, SimulateArgs,
};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Harness(#[from] HarnessError),
}

impl CliError {
    /// 3 for I/O failures, 2 for every other error.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Io { .. } | CliError::Harness(HarnessError::Io { .. }) => 3,
            _ => 2,
        }
    }
}

macro_rules! config_error {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Config(e.to_string())
            }
        }
    )*};
}
config_error!(CodesError, NoiseError, WindowError);

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn print_json<T: Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("value serializes"));
}

fn load_code(path: Option<&Path>) -> Result<CssCode, CliError> {
    let desc = match path {
        Some(p) => read(p)?.parse::<CodeDescription>()?,
        None => CodeDescription::bb288(),
    };
    Ok(desc.build()?)
}

fn gdg_preset(p: Preset) -> GdgConfig {
    match p {
        Preset::N144Circuit => GdgConfig::n144_circuit(),
        Preset::N288Circuit => GdgConfig::n288_circuit(),
        Preset::DataQubit => GdgConfig::data_qubit(),
    }
}

fn inner_decoder(kind: DecoderKind, args: &DecoderArgs, preset: Preset) -> InnerDecoder {
    match kind {
        DecoderKind::Gdg => {
            let mut cfg = gdg_preset(preset);
            if let Some(a) = args.scale {
                cfg.bp.scale = a;
            }
            match args.low_error {
                LowError::On => cfg.low_error_mode = true,
                LowError::Off => cfg.low_error_mode = false,
                LowError::Auto => {}
            }
            InnerDecoder::Gdg(cfg)
        }
        DecoderKind::Osd0 | DecoderKind::OsdCs => {
            let order = if kind == DecoderKind::Osd0 { 0 } else { args.osd_order };
            let mut cfg = OsdConfig::osd_cs(order, args.bp_iters);
            if let Some(a) = args.scale {
                cfg.bp.scale = a;
            }
            InnerDecoder::Osd(cfg)
        }
    }
}

fn decoder_spec(args: &DecoderArgs, default_preset: Preset) -> Result<DecoderSpec, CliError> {
    let preset = args.preset.unwrap_or(default_preset);
    let inner = inner_decoder(args.decoder, args, preset);
    if let InnerDecoder::Gdg(cfg) = &inner {
        cfg.validate().map_err(CliError::Config)?;
    }
    if let Some(&(w, f)) = args.window.as_ref() {
        if f == 0 || f >= w {
            return Err(WindowError::InvalidPlan { w, f }.into());
        }
    }
    let low_error_below = match (args.decoder, args.low_error, preset) {
        (DecoderKind::Gdg, LowError::Auto, Preset::N144Circuit | Preset::N288Circuit) => Some(0.002),
        _ => None,
    };
    Ok(DecoderSpec {
        inner,
        window: args.window,
        last_window: args.last_window.map(|k| inner_decoder(k, args, preset)),
        merge_tail: args.merge_tail,
        low_error_below,
    })
}

fn experiment_config(args: &ExperimentArgs) -> Result<ExperimentConfig, CliError> {
    let noise = match args.noise {
        NoiseKind::Data => NoiseSpec::DataQubit,
        NoiseKind::SingleShot => NoiseSpec::SingleShot,
        NoiseKind::Pheno => NoiseSpec::Phenomenological { rounds: args.rounds },
        NoiseKind::Dem => NoiseSpec::Dem {
            path: args
                .model
                .clone()
                .ok_or_else(|| CliError::Config("--noise dem needs --model".into()))?,
            rounds: args.rounds,
        },
    };
    let default_preset = match args.noise {
        NoiseKind::Data | NoiseKind::SingleShot => Preset::DataQubit,
        NoiseKind::Pheno | NoiseKind::Dem => Preset::N288Circuit,
    };
    let code = args.code.as_deref().map(read).transpose()?;
    let points = args
        .p_d
        .iter()
        .flat_map(|&p_d| args.p_s.iter().map(move |&p_s| SweepPoint { p_d, p_s }))
        .collect();
    let config = ExperimentConfig {
        code,
        noise,
        points,
        decoder: decoder_spec(&args.decoder, default_preset)?,
        trials: args.trials,
        base_seed: args.seed,
    };
    config.validate()?;
    Ok(config)
}

#[derive(Serialize)]
struct CodeSummary {
    n: usize,
    k: usize,
    d: Option<usize>,
    provenance: String,
    hx_rows: usize,
    hz_rows: usize,
}

fn build_code(args: &BuildCodeArgs) -> Result<(), CliError> {
    let code = load_code(args.code.code.as_deref())?;
    if let Some(dir) = &args.out_dir {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.clone(),
            source,
        })?;
        for (name, m) in [("hx", &code.hx), ("hz", &code.hz), ("lx", &code.lx), ("lz", &code.lz)] {
            write_file(&dir.join(format!("{name}.txt")), &m.to_triplet_string())?;
        }
        let manifest = serde_json::to_string_pretty(&code.manifest()).expect("manifest serializes");
        write_file(&dir.join("manifest.json"), &(manifest + "\n"))?;
    }
    print_json(&CodeSummary {
        n: code.n,
        k: code.k,
        d: code.distance,
        provenance: code.provenance.clone(),
        hx_rows: code.hx.n_rows(),
        hz_rows: code.hz.n_rows(),
    });
    Ok(())
}

fn build_model(args: &BuildModelArgs) -> Result<(), CliError> {
    let model = match args.kind {
        ModelKind::Dem => {
            let path = args
                .input
                .as_deref()
                .ok_or_else(|| CliError::Config("`dem` needs --input".into()))?;
            parse_dem(&read(path)?)?
        }
        kind => {
            let code = load_code(args.code.code.as_deref())?;
            match kind {
                ModelKind::Data => build_data_qubit_model(&code, args.p_d)?,
                ModelKind::SingleShot => build_single_shot_model(&code, args.p_d, args.p_s)?,
                ModelKind::Pheno => build_phenomenological_model(&code, args.rounds, args.p_d, args.p_s)?,
                ModelKind::Dem => unreachable!(),
            }
        }
    };
    let model = if args.merge { model.merge_equivalent_columns() } else { model };
    let text = model.to_dem_string();
    match &args.out {
        Some(path) => write_file(path, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_syndrome(text: &str, n: usize) -> Result<BitVector, CliError> {
    let tokens: Vec<&str> = text.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
    if tokens.iter().any(|t| t.starts_with('D')) {
        let mut s = BitVector::zeros(n);
        for t in tokens {
            let idx: usize = t
                .strip_prefix('D')
                .and_then(|i| i.parse().ok())
                .ok_or_else(|| CliError::Config(format!("bad detector token `{t}`")))?;
            if idx >= n {
                return Err(CliError::Config(format!("detector {idx} out of range (model has {n})")));
            }
            s.flip(idx);
        }
        return Ok(s);
    }
    let bits: String = tokens.concat();
    if bits.len() != n || !bits.bytes().all(|b| b == b'0' || b == b'1') {
        return Err(CliError::Config(format!("expected D<i> tokens or a 0/1 string of length {n}")));
    }
    Ok(BitVector::from_bools(&bits.bytes().map(|b| b == b'1').collect::<Vec<_>>()))
}

#[derive(Serialize)]
struct DecodeReport {
    decoder: String,
    syndrome_ok: bool,
    windows_converged: Vec<bool>,
    path_metrics: Vec<Option<f64>>,
    faults: Vec<usize>,
    logical_flips: Vec<usize>,
}

fn decode(args: &DecodeArgs) -> Result<(), CliError> {
    let model = parse_dem(&read(&args.model)?)?;
    let s = parse_syndrome(&read(&args.syndrome)?, model.n_detectors())?;
    let spec = decoder_spec(&args.decoder, Preset::N288Circuit)?;
    let schedule = match spec.window {
        None => WindowSchedule::global(&model),
        Some((w, f)) => {
            let mut plan = WindowPlan::new(w, f, spec.inner.clone())?;
            plan.merge_tail = spec.merge_tail;
            WindowSchedule::new(&model, &plan)?
        }
    };
    let out = sliding_decode(&model, &schedule, &spec.inner, spec.last_window.as_ref(), &s)?;
    let flips = model.logicals().matvec(&out.e).expect("estimate matches the model");
    print_json(&DecodeReport {
        decoder: spec.inner.label(),
        syndrome_ok: out.syndrome_ok,
        windows_converged: out.windows.iter().map(|w| w.converged).collect(),
        path_metrics: out
            .windows
            .iter()
            .map(|w| w.path_metric.is_finite().then_some(w.path_metric))
            .collect(),
        faults: out.e.to_indices(),
        logical_flips: flips.to_indices(),
    });
    Ok(())
}

fn simulate(args: &SimulateArgs) -> Result<(), CliError> {
    let config = experiment_config(&args.experiment)?;
    let report = run_experiment(&config, args.threads)?;
    match &args.out {
        Some(stem) => {
            report.write(stem)?;
            eprint!("{}", report.to_csv());
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

#[derive(Serialize)]
struct BenchReport {
    decoder: String,
    p_d: f64,
    p_s: f64,
    tally: Tally,
    wall_seconds: f64,
    latency: LatencySummary,
}

fn run_bench(args: &ExperimentArgs) -> Result<(), CliError> {
    let config = experiment_config(args)?;
    let point = config.points[0];
    let (latency, tally, wall) = bench(&config, point, config.trials)?;
    print_json(&BenchReport {
        decoder: config.decoder.inner.label(),
        p_d: point.p_d,
        p_s: point.p_s,
        tally,
        wall_seconds: wall.as_secs_f64(),
        latency,
    });
    Ok(())
}

#[derive(Serialize)]
struct CountsReport {
    n: usize,
    k: usize,
    weight2_syndrome_configs: u64,
    config_b_coefficient: u64,
    weight2_syndrome_codewords: usize,
    weight3_column_triples: usize,
}

#[derive(Serialize)]
struct GcdReport {
    a: String,
    b: String,
    n: usize,
    gcd: String,
    cyclic_gcd: String,
    g: String,
    g_divides_gcd: bool,
    g_divides_cyclic_gcd: bool,
}

fn analyze(cmd: &AnalyzeCommand) -> Result<(), CliError> {
    match cmd {
        AnalyzeCommand::Counts(code) => {
            let code = load_code(code.code.as_deref())?;
            let census = enumerate_low_weight_syndrome_codewords(&code.hx, 3, 3)?;
            print_json(&CountsReport {
                n: code.n,
                k: code.k,
                weight2_syndrome_configs: count_weight2_syndrome_configs(&code.hx),
                config_b_coefficient: config_b_coefficient(&code.hx)?,
                weight2_syndrome_codewords: weight2_syndrome_codewords(&code.hx).len(),
                weight3_column_triples: census.count(3, 3),
            });
        }
        AnalyzeCommand::Gcd(GcdArgs { a, b, g, n }) => {
            let pa: Gf2Poly = a.parse()?;
            let pb: Gf2Poly = b.parse()?;
            let pg: Gf2Poly = g.parse()?;
            let plain = poly_gcd_gf2(&pa, &pb)?;
            let cyclic = cyclic_gcd_gf2(&pa, &pb, *n)?;
            print_json(&GcdReport {
                a: pa.to_string(),
                b: pb.to_string(),
                n: *n,
                gcd: plain.to_string(),
                cyclic_gcd: cyclic.to_string(),
                g: pg.to_string(),
                g_divides_gcd: pg.divides(&plain)?,
                g_divides_cyclic_gcd: pg.divides(&cyclic)?,
            });
        }
    }
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::BuildCode(a) => build_code(a),
        Command::BuildModel(a) => build_model(a),
        Command::Decode(a) => decode(a),
        Command::Simulate(a) => simulate(a),
        Command::Analyze(a) => analyze(a),
        Command::Bench(a) => run_bench(&a.experiment),
    }
}
