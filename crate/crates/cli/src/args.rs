use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gdg", version, about = "GDG ensemble decoding for QLDPC codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a bivariate bicycle code and print its parameters.
    BuildCode(BuildCodeArgs),
    /// Build a detector error model and write it as DEM text.
    BuildModel(BuildModelArgs),
    /// Decode one syndrome against a DEM file.
    Decode(DecodeArgs),
    /// Monte-Carlo error-rate sweep.
    Simulate(SimulateArgs),
    /// Combinatorial code analyses.
    #[command(subcommand)]
    Analyze(AnalyzeCommand),
    /// Per-window decoding latency.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
pub struct CodeArg {
    /// Code description file (`l m`, `a: ...`, `b: ...`); default [[288,12,18]].
    #[arg(long)]
    pub code: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BuildCodeArgs {
    #[command(flatten)]
    pub code: CodeArg,
    /// Write hx/hz/lx/lz triplet files and manifest.json here.
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModelKind {
    Data,
    SingleShot,
    Pheno,
    Dem,
}

#[derive(Debug, Args)]
pub struct BuildModelArgs {
    #[arg(value_enum)]
    pub kind: ModelKind,
    #[command(flatten)]
    pub code: CodeArg,
    #[arg(long, default_value_t = 0.0)]
    pub p_d: f64,
    #[arg(long, default_value_t = 0.0)]
    pub p_s: f64,
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    /// Input DEM for `dem`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Merge columns with identical detector and logical supports.
    #[arg(long)]
    pub merge: bool,
    /// Output file; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum DecoderKind {
    Gdg,
    Osd0,
    OsdCs,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    N144Circuit,
    N288Circuit,
    DataQubit,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LowError {
    /// Circuit presets: on iff max(p_d, p_s) <= 0.002; data-qubit: on.
    Auto,
    On,
    Off,
}

#[derive(Debug, Args, Clone)]
pub struct DecoderArgs {
    #[arg(long, value_enum, default_value = "gdg")]
    pub decoder: DecoderKind,
    /// GDG preset; defaults to data-qubit for data/single-shot noise and
    /// n288-circuit otherwise.
    #[arg(long, value_enum)]
    pub preset: Option<Preset>,
    #[arg(long, value_enum, default_value = "auto")]
    pub low_error: LowError,
    /// OSD-CS order.
    #[arg(long, default_value_t = 10)]
    pub osd_order: usize,
    /// BP iterations before OSD.
    #[arg(long, default_value_t = 100)]
    pub bp_iters: usize,
    /// Min-sum scaling factor (overrides the preset or the OSD default 1.0).
    #[arg(long)]
    pub scale: Option<f64>,
    /// Sliding window `W,F` in detector blocks.
    #[arg(long, value_parser = parse_window)]
    pub window: Option<(usize, usize)>,
    /// Decoder for the last window.
    #[arg(long, value_enum)]
    pub last_window: Option<DecoderKind>,
    /// Merge weight-one tail columns of each window.
    #[arg(long)]
    pub merge_tail: bool,
}

pub fn parse_window(s: &str) -> Result<(usize, usize), String> {
    let (w, f) = s
        .split_once(',')
        .ok_or_else(|| format!("expected W,F, found `{s}`"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|e| format!("`{t}`: {e}"));
    Ok((parse(w)?, parse(f)?))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum NoiseKind {
    Data,
    SingleShot,
    Pheno,
    Dem,
}

#[derive(Debug, Args, Clone)]
pub struct ExperimentArgs {
    #[arg(long, value_enum, default_value = "single-shot")]
    pub noise: NoiseKind,
    /// Code description file; default [[288,12,18]].
    #[arg(long)]
    pub code: Option<PathBuf>,
    /// DEM file for `--noise dem`.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Noisy rounds (phenomenological) or rounds represented by the DEM.
    #[arg(long, default_value_t = 1)]
    pub rounds: usize,
    /// Data error rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0.05")]
    pub p_d: Vec<f64>,
    /// Syndrome error rates, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "0")]
    pub p_s: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub trials: u64,
    /// Trial `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
    /// Worker threads (0 = all cores); does not change results.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Write `<out>.json` and `<out>.csv`; the JSON goes to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    #[command(flatten)]
    pub experiment: ExperimentArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// DEM file.
    #[arg(long)]
    pub model: PathBuf,
    /// Syndrome file: `D<i>` tokens of fired detectors, or a 0/1 string.
    #[arg(long)]
    pub syndrome: PathBuf,
    #[command(flatten)]
    pub decoder: DecoderArgs,
}

#[derive(Debug, Subcommand)]
pub enum AnalyzeCommand {
    /// Syndrome-codeword counts behind the single-shot lower bound.
    Counts(CodeArg),
    /// gcd of two cyclic generator polynomials and a divisibility check.
    Gcd(GcdArgs),
}

#[derive(Debug, Args)]
pub struct GcdArgs {
    #[arg(long, default_value = "1 + x^15 + x^20 + x^28 + x^66")]
    pub a: String,
    #[arg(long, default_value = "1 + x^58 + x^59 + x^100 + x^121")]
    pub b: String,
    /// Candidate divisor of the gcd; the default is
    /// (x^7 + x + 1)(x^7 + x^5 + x^3 + x + 1).
    #[arg(long, default_value = "1 + x^2 + x^3 + x^4 + x^5 + x^6 + x^10 + x^12 + x^14")]
    pub g: String,
    /// Cycle length `n` of `x^n + 1`.
    #[arg(long, default_value_t = 127)]
    pub n: usize,
}
