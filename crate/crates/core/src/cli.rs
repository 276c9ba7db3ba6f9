//! Command-line front end. Every subcommand parses flags, calls one library
//! operation, and prints its result as JSON (or CSV with `--format csv`).
//!
//! Exit codes: 0 on success, 1 on usage errors, 2 on data errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::alignment::{self, CrossMetric};
use crate::bench;
use crate::error::PruneError;
use crate::pipeline::{self, AblationOrder, PruneConfig, DEFAULT_KNN_K, DEFAULT_STAGE1_RATIO};
use crate::repmax::{self, IntraMetric, DEFAULT_ENUMERATION_CAP};
use crate::synth::{self, SynthSpec, DEFAULT_PAIR_SAMPLE};
use crate::tokenset::{self, FileFormat, Modality, Selection, TokenMatrix};

pub const THREADS_ENV: &str = "PRUNEKIT_THREADS";

#[derive(Debug, Parser)]
#[command(name = "prunekit", version, about = "Visual token pruning by alignment filtering and diversity selection")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,

    /// Worker threads; 0 picks automatically. Falls back to PRUNEKIT_THREADS.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    /// Output encoding.
    #[arg(long, global = true, value_enum, default_value_t = OutputFormat::Json)]
    pub format: OutputFormat,

    /// Write the result here instead of standard output.
    #[arg(long, global = true, value_name = "PATH")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Json,
    Csv,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CrossArg {
    L2,
    Cos,
    MiKnn,
}

impl From<CrossArg> for CrossMetric {
    fn from(a: CrossArg) -> Self {
        match a {
            CrossArg::L2 => CrossMetric::L2,
            CrossArg::Cos => CrossMetric::Cosine,
            CrossArg::MiKnn => CrossMetric::KnnMi,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum IntraArg {
    Cos,
    L2,
}

impl From<IntraArg> for IntraMetric {
    fn from(a: IntraArg) -> Self {
        match a {
            IntraArg::Cos => IntraMetric::CosineDissim,
            IntraArg::L2 => IntraMetric::L2Dist,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OrderArg {
    AlignRepmax,
    RepmaxAlign,
    AlignOnly,
    RepmaxOnly,
}

impl From<OrderArg> for AblationOrder {
    fn from(a: OrderArg) -> Self {
        match a {
            OrderArg::AlignRepmax => AblationOrder::AlignThenRepMax,
            OrderArg::RepmaxAlign => AblationOrder::RepMaxThenAlign,
            OrderArg::AlignOnly => AblationOrder::AlignOnly,
            OrderArg::RepmaxOnly => AblationOrder::RepMaxOnly,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Repmax,
    Maxmin,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score visual tokens by alignment with the text
    Score(ScoreArgs),
    /// Run the two-stage pipeline
    Prune(PruneArgs),
    /// Expected pairwise dissimilarity of a selection
    Objective(ObjectiveArgs),
    /// Exhaustive optimum for small token sets
    Exact(ExactArgs),
    /// Run a single selector over all tokens
    Baseline(BaselineArgs),
    /// Run the pipeline with a different stage order
    Ablation(AblationArgs),
    /// Generate synthetic visual and textual token files
    Synth(SynthArgs),
    /// Fit per-dimension moments of visual-text differences
    Diagnose(DiagnoseArgs),
    /// Time the pruning computation at a given geometry
    Bench(BenchArgs),
    /// Quality sweep over stage-1 ratios on synthetic data
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct PairArgs {
    /// Visual token file (TPK or CSV)
    #[arg(long, value_name = "PATH")]
    pub visual: PathBuf,
    /// Textual token file (TPK or CSV)
    #[arg(long, value_name = "PATH")]
    pub text: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScoreArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Cross-modal alignment metric
    #[arg(long, value_enum, default_value_t = CrossArg::L2)]
    pub cross_metric: CrossArg,
    /// Neighbours for the mi-knn metric
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub knn_k: usize,
    /// Also report the top-K selection
    #[arg(long)]
    pub keep: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PruneArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Final number of visual tokens
    #[arg(long)]
    pub keep: usize,
    /// Explicit stage-1 keep count (overrides --stage1-ratio)
    #[arg(long)]
    pub stage1_keep: Option<usize>,
    /// Fraction of tokens surviving stage 1
    #[arg(long, default_value_t = DEFAULT_STAGE1_RATIO)]
    pub stage1_ratio: f64,
    /// Cross-modal alignment metric
    #[arg(long, value_enum, default_value_t = CrossArg::L2)]
    pub cross_metric: CrossArg,
    /// Intra-modal dissimilarity metric
    #[arg(long, value_enum, default_value_t = IntraArg::Cos)]
    pub intra_metric: IntraArg,
    /// Neighbours for the mi-knn metric
    #[arg(long, default_value_t = DEFAULT_KNN_K)]
    pub knn_k: usize,
    /// Seed recorded in the config
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl PruneArgs {
    fn config(&self) -> PruneConfig {
        PruneConfig {
            keep_final: self.keep,
            stage1_ratio: self.stage1_ratio,
            stage1_keep: self.stage1_keep,
            cross_metric: self.cross_metric.into(),
            intra_metric: self.intra_metric.into(),
            knn_k: self.knn_k,
            tie_break: Default::default(),
            rng_seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct AblationArgs {
    #[command(flatten)]
    pub prune: PruneArgs,
    /// Stage ordering
    #[arg(long, value_enum, default_value_t = OrderArg::AlignRepmax)]
    pub order: OrderArg,
}

#[derive(Debug, Args)]
pub struct ObjectiveArgs {
    /// Token file (TPK or CSV)
    #[arg(long, value_name = "PATH")]
    pub tokens: PathBuf,
    /// Selection JSON file
    #[arg(long, value_name = "PATH")]
    pub selection: PathBuf,
    /// Intra-modal dissimilarity metric
    #[arg(long, value_enum, default_value_t = IntraArg::Cos)]
    pub intra_metric: IntraArg,
}

#[derive(Debug, Args)]
pub struct ExactArgs {
    /// Token file (TPK or CSV)
    #[arg(long, value_name = "PATH")]
    pub tokens: PathBuf,
    /// Subset size
    #[arg(long)]
    pub keep: usize,
    /// Maximum number of subsets to enumerate
    #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
    pub cap: u128,
}

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Token file (TPK or CSV)
    #[arg(long, value_name = "PATH")]
    pub tokens: PathBuf,
    /// Number of tokens to select
    #[arg(long)]
    pub keep: usize,
    /// Selector to run
    #[arg(long, value_enum, default_value_t = MethodArg::Repmax)]
    pub method: MethodArg,
    /// Dissimilarity for the repmax method
    #[arg(long, value_enum, default_value_t = IntraArg::Cos)]
    pub intra_metric: IntraArg,
    /// Seed for the random method
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct SpecArgs {
    /// Visual token count
    #[arg(long, default_value_t = 576)]
    pub n_visual: usize,
    /// Textual token count
    #[arg(long, default_value_t = 32)]
    pub n_textual: usize,
    /// Embedding width
    #[arg(long, default_value_t = 64)]
    pub dim: usize,
    /// Number of cluster centers
    #[arg(long, default_value_t = 8)]
    pub clusters: usize,
    /// Within-cluster standard deviation
    #[arg(long, default_value_t = 0.3)]
    pub spread: f64,
    /// Fraction of visual tokens scaled as outliers
    #[arg(long, default_value_t = 0.0)]
    pub outlier_fraction: f64,
    /// Scale applied to outlier tokens
    #[arg(long, default_value_t = 1.0)]
    pub outlier_scale: f64,
    /// Fraction of visual tokens drawn near a textual token
    #[arg(long, default_value_t = 0.5)]
    pub coupling: f64,
    /// Generator seed
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

impl SpecArgs {
    fn spec(&self) -> SynthSpec {
        SynthSpec {
            n_visual: self.n_visual,
            n_textual: self.n_textual,
            dim: self.dim,
            n_clusters: self.clusters,
            cluster_spread: self.spread,
            outlier_fraction: self.outlier_fraction,
            outlier_scale: self.outlier_scale,
            coupling: self.coupling,
            seed: self.seed,
        }
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Directory receiving visual.tpk and textual.tpk
    #[arg(long, value_name = "DIR")]
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DiagnoseArgs {
    #[command(flatten)]
    pub pair: PairArgs,
    /// Number of sampled (visual, text) pairs
    #[arg(long, default_value_t = DEFAULT_PAIR_SAMPLE)]
    pub pairs: usize,
    /// Seed for pair sampling
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Visual token count
    #[arg(long, default_value_t = 576)]
    pub n: usize,
    /// Textual token count
    #[arg(long, default_value_t = 32)]
    pub m: usize,
    /// Embedding width
    #[arg(long, default_value_t = 4096)]
    pub d: usize,
    /// Final number of visual tokens
    #[arg(long, default_value_t = 64)]
    pub keep: usize,
    /// Fraction of tokens surviving stage 1
    #[arg(long, default_value_t = DEFAULT_STAGE1_RATIO)]
    pub stage1_ratio: f64,
    /// Timed runs after one warm-up
    #[arg(long, default_value_t = 5)]
    pub repeats: usize,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub spec: SpecArgs,
    /// Comma-separated stage-1 ratios
    #[arg(long, value_delimiter = ',', default_value = "0.9,0.8,0.75,0.7")]
    pub ratios: Vec<f64>,
    /// Final number of visual tokens
    #[arg(long, default_value_t = 64)]
    pub keep: usize,
    /// Seeded trials per grid cell
    #[arg(long, default_value_t = 20)]
    pub trials: usize,
}

/// Failure of a CLI run, already classified by exit code.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
        }
    }
}

impl From<PruneError> for CliError {
    fn from(e: PruneError) -> Self {
        match e {
            PruneError::InvalidConfig(_) => CliError::Usage(e.to_string()),
            other => CliError::Data(other.to_string()),
        }
    }
}

impl From<crate::error::FormatError> for CliError {
    fn from(e: crate::error::FormatError) -> Self {
        CliError::Data(e.to_string())
    }
}

fn read_tokens(path: &Path, modality: Modality) -> Result<TokenMatrix, CliError> {
    let m = tokenset::read_token_file(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
    Ok(if m.modality() == Modality::Unspecified {
        m.with_modality(modality)
    } else {
        m
    })
}

fn read_pair(p: &PairArgs) -> Result<(TokenMatrix, TokenMatrix), CliError> {
    Ok((read_tokens(&p.visual, Modality::Visual)?, read_tokens(&p.text, Modality::Textual)?))
}

fn json<T: Serialize>(v: &T) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn selection_csv(sel: &Selection) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["rank", "index", "score"]).expect("in-memory write");
    for (rank, &i) in sel.indices().iter().enumerate() {
        let score = sel.scores().map(|s| s[rank].to_string()).unwrap_or_default();
        w.write_record([rank.to_string(), i.to_string(), score]).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

fn report_csv(r: &pipeline::PruneReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["index", "alignment_score", "stage1", "stage2_rank"]).expect("in-memory write");
    let in1: std::collections::HashSet<usize> = r.stage1.indices().iter().copied().collect();
    for (i, s) in r.alignment_scores.values.iter().enumerate() {
        let rank = r.stage2.indices().iter().position(|&x| x == i).map(|p| p.to_string()).unwrap_or_default();
        w.write_record([i.to_string(), s.to_string(), (in1.contains(&i) as u8).to_string(), rank])
            .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf8")
}

#[derive(Serialize)]
struct ScoreOutput<'a> {
    metric: CrossMetric,
    values: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    selection: Option<Selection>,
}

#[derive(Serialize)]
struct ObjectiveOutput {
    objective: f64,
    tokens: usize,
}

#[derive(Serialize)]
struct SynthOutput {
    visual: PathBuf,
    textual: PathBuf,
    spec: SynthSpec,
}

fn execute(cli: &Cli) -> Result<String, CliError> {
    let csv = cli.format == OutputFormat::Csv;
    match &cli.command {
        Command::Score(a) => {
            let (v, t) = read_pair(&a.pair)?;
            let scores = alignment::score(&v, &t, a.cross_metric.into(), a.knn_k)?;
            let selection = a.keep.map(|k| alignment::select_top(&scores, k)).transpose()?;
            if csv {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(["index", "score", "selected"]).expect("in-memory write");
                for (i, s) in scores.values.iter().enumerate() {
                    let sel = selection.as_ref().map(|x| x.indices().contains(&i) as u8);
                    w.write_record([i.to_string(), s.to_string(), sel.map(|b| b.to_string()).unwrap_or_default()])
                        .expect("in-memory write");
                }
                Ok(String::from_utf8(w.into_inner().expect("flush")).expect("utf8"))
            } else {
                Ok(json(&ScoreOutput {
                    metric: scores.metric,
                    values: &scores.values,
                    selection,
                }))
            }
        }
        Command::Prune(a) => {
            let (v, t) = read_pair(&a.pair)?;
            let report = pipeline::prune(&v, &t, &a.config())?;
            Ok(if csv { report_csv(&report) } else { json(&report) })
        }
        Command::Ablation(a) => {
            let (v, t) = read_pair(&a.prune.pair)?;
            let report = pipeline::prune_ablation(&v, &t, &a.prune.config(), a.order.into())?;
            Ok(if csv { report_csv(&report) } else { json(&report) })
        }
        Command::Objective(a) => {
            let tokens = read_tokens(&a.tokens, Modality::Visual)?;
            let sel = tokenset::read_selection(&a.selection)?;
            if sel.source_rows() != tokens.rows() {
                return Err(CliError::Data(format!(
                    "selection refers to {} rows but token file has {}",
                    sel.source_rows(),
                    tokens.rows()
                )));
            }
            let objective = match pipeline::set_objective(&tokens, sel.indices(), a.intra_metric.into())? {
                Some(v) => v,
                None => return Err(PruneError::TooFewTokens { got: sel.len() }.into()),
            };
            Ok(if csv {
                format!("objective,tokens\n{objective},{}\n", sel.len())
            } else {
                json(&ObjectiveOutput {
                    objective,
                    tokens: sel.len(),
                })
            })
        }
        Command::Exact(a) => {
            let tokens = read_tokens(&a.tokens, Modality::Visual)?;
            let sim = repmax::build_similarity(&tokens, &Selection::all(tokens.rows()))?;
            let sel = repmax::exact_solve_capped(&sim, a.keep, a.cap)?;
            Ok(if csv { selection_csv(&sel) } else { json(&sel) })
        }
        Command::Baseline(a) => {
            let tokens = read_tokens(&a.tokens, Modality::Visual)?;
            let all = Selection::all(tokens.rows());
            let sel = match (a.method, IntraMetric::from(a.intra_metric)) {
                (MethodArg::Random, _) => repmax::random_baseline(tokens.rows(), a.keep, a.seed)?,
                (MethodArg::Repmax, IntraMetric::L2Dist) => repmax::l2_dissim_variant(&tokens, &all, a.keep)?,
                (MethodArg::Repmax, IntraMetric::CosineDissim) => {
                    repmax::greedy_repmax(&repmax::build_similarity(&tokens, &all)?, a.keep)?
                }
                (MethodArg::Maxmin, _) => {
                    repmax::maxmin_baseline(&repmax::build_similarity(&tokens, &all)?, a.keep)?
                }
            };
            Ok(if csv { selection_csv(&sel) } else { json(&sel) })
        }
        Command::Synth(a) => {
            let spec = a.spec.spec();
            let (v, t) = synth::generate(&spec)?;
            fs::create_dir_all(&a.dir).map_err(|e| CliError::Data(format!("{}: {e}", a.dir.display())))?;
            let (vp, tp) = (a.dir.join("visual.tpk"), a.dir.join("textual.tpk"));
            tokenset::write_token_file(&v, &vp, FileFormat::Binary)?;
            tokenset::write_token_file(&t, &tp, FileFormat::Binary)?;
            Ok(json(&SynthOutput {
                visual: vp,
                textual: tp,
                spec,
            }))
        }
        Command::Diagnose(a) => {
            let (v, t) = read_pair(&a.pair)?;
            let r = synth::diagnose_isotropy(&v, &t, a.pairs, a.seed)?;
            if csv {
                let mut out = String::from("dim,mean,std\n");
                for (c, (m, s)) in r.per_dim_mean.iter().zip(&r.per_dim_std).enumerate() {
                    out.push_str(&format!("{c},{m},{s}\n"));
                }
                Ok(out)
            } else {
                Ok(json(&r))
            }
        }
        Command::Bench(a) => {
            let config = PruneConfig::new(a.keep).with_ratio(a.stage1_ratio);
            let t = bench::run_timing_with(&config, a.n, a.m, a.d, a.repeats)?;
            Ok(if csv { t.to_csv() } else { json(&t) })
        }
        Command::Sweep(a) => {
            let r = bench::run_quality_sweep(&[a.spec.spec()], &a.ratios, a.keep, a.trials)?;
            Ok(if csv { r.to_csv() } else { json(&r) })
        }
    }
}

fn thread_count(flag: Option<usize>) -> Result<usize, CliError> {
    if let Some(t) = flag {
        return Ok(t);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map_err(|_| CliError::Usage(format!("{THREADS_ENV}={v:?} is not a thread count"))),
        _ => Ok(0),
    }
}

/// Parses `args` (program name first) and runs the command, writing results
/// to `stdout` and diagnostics to `stderr`. Returns the process exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let text = e.render().to_string();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = stdout.write_all(text.as_bytes());
                    0
                }
                _ => {
                    let _ = stderr.write_all(text.as_bytes());
                    1
                }
            };
        }
    };

    let result = thread_count(cli.threads).and_then(|threads| {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| CliError::Usage(format!("cannot start {threads} threads: {e}")))?;
        pool.install(|| execute(&cli))
    });

    match result {
        Ok(text) => {
            if let Some(path) = &cli.out {
                if let Err(e) = fs::write(path, &text) {
                    let _ = writeln!(stderr, "error: {}: {e}", path.display());
                    return 2;
                }
            } else {
                let _ = stdout.write_all(text.as_bytes());
            }
            0
        }
        Err(e) => {
            let (CliError::Usage(msg) | CliError::Data(msg)) = &e;
            let _ = writeln!(stderr, "error: {msg}");
            e.exit_code()
        }
    }
}

pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}
