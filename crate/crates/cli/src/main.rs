use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rmsub::code::{search_selection, GeneratorSpec, Objective, RandomBudget, SearchOptions};
use rmsub::decoders::{Aggregation, BlockDecoder, MlDecoder, RpaDecoder, RpaVariant, DEFAULT_NMAX};
use rmsub::plan::DecodingPlan;
use rmsub::pruning::{
    retained_ranks, select_by_rank, select_random, train_weights, PruningProfile, RankDirection, TrainConfig,
};
use rmsub::sim::{
    parse_grid, run_bler, thread_pool, time_sharing_bler, ChannelKind, DecoderEntry, GridAxis, SimOptions, SimReport,
};

#[derive(Parser)]
#[command(name = "rmsub", version, about = "Reed-Muller subcodes: construction, decoding and BLER simulation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Search extra rows of an RM subcode and write its GeneratorSpec JSON.
    Construct(ConstructArgs),
    /// Print the projection rank profile of a code.
    Inspect(InspectArgs),
    /// Simulate one decoder and write a BLER CSV.
    Simulate(SimulateArgs),
    /// Train projection weights and write a pruning profile.
    Train(TrainArgs),
    /// Simulate several decoders and prunings on shared noise into one CSV.
    Sweep(SweepArgs),
    /// Simulate time sharing between RM(m,2) and RM(m,1) under MAP decoding.
    Timeshare(TimeshareArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ObjectiveArg {
    #[value(name = "min-full-L", alias = "min-full-l")]
    MinFullL,
    #[value(name = "max-full-L", alias = "max-full-l")]
    MaxFullL,
    #[value(name = "min-subset-L", alias = "min-subset-l")]
    MinSubsetL,
}

#[derive(Args)]
struct ConstructArgs {
    #[arg(long)]
    m: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, value_enum, default_value = "min-full-L")]
    objective: ObjectiveArg,
    #[arg(long, default_value_t = 15)]
    q0: usize,
    /// Random selections to score when exhaustive search is too large.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct InspectArgs {
    spec: PathBuf,
    /// Emit the plan summary as JSON.
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum DecoderArg {
    Map,
    Subrpa,
    SoftSubrpa,
    SoftSubrpaLogsum,
}

impl DecoderArg {
    fn label(self) -> &'static str {
        match self {
            DecoderArg::Map => "map",
            DecoderArg::Subrpa => "subrpa",
            DecoderArg::SoftSubrpa => "soft-subrpa",
            DecoderArg::SoftSubrpaLogsum => "soft-subrpa-logsum",
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ChannelArg {
    Awgn,
    Bsc,
}

#[derive(Args)]
struct GridArgs {
    /// Eb/N0 grid in dB: `a:step:b`, `a,b,c` or a single value.
    #[arg(long, conflicts_with = "snr")]
    ebn0: Option<String>,
    /// SNR grid in dB, same forms as --ebn0.
    #[arg(long)]
    snr: Option<String>,
    #[arg(long, default_value_t = 10_000)]
    trials: u64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Report zero wall time so output is byte-identical across runs.
    #[arg(long)]
    deterministic: bool,
    #[arg(long, value_enum, default_value = "awgn")]
    channel: ChannelArg,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

impl GridArgs {
    fn axis_and_grid(&self) -> Result<(GridAxis, Vec<f64>)> {
        match (&self.ebn0, &self.snr) {
            (Some(g), None) => Ok((GridAxis::EbN0, parse_grid(g)?)),
            (None, Some(g)) => Ok((GridAxis::Snr, parse_grid(g)?)),
            (None, None) => Ok((GridAxis::EbN0, parse_grid("0:0.5:5")?)),
            (Some(_), Some(_)) => bail!("give either --ebn0 or --snr"),
        }
    }

    fn options(&self) -> SimOptions {
        SimOptions {
            trials: self.trials,
            seed: self.seed,
            deterministic: self.deterministic,
            channel: match self.channel {
                ChannelArg::Awgn => ChannelKind::Awgn,
                ChannelArg::Bsc => ChannelKind::Bsc,
            },
        }
    }
}

#[derive(Args)]
struct SimulateArgs {
    spec: PathBuf,
    #[arg(long, value_enum, default_value = "soft-subrpa")]
    decoder: DecoderArg,
    /// `full`, `minrank`, `maxrank`, `random` or a profile JSON path.
    #[arg(long, default_value = "full")]
    pruning: String,
    #[arg(long, default_value_t = 15)]
    q0: usize,
    #[arg(long, default_value_t = DEFAULT_NMAX)]
    nmax: usize,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct SweepArgs {
    spec: PathBuf,
    /// Comma-separated decoders.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "map,subrpa,soft-subrpa")]
    decoders: Vec<DecoderArg>,
    /// Comma-separated prunings; applies to the projection decoders.
    #[arg(long, value_delimiter = ',', default_value = "full")]
    prunings: Vec<String>,
    #[arg(long, default_value_t = 15)]
    q0: usize,
    #[arg(long, default_value_t = DEFAULT_NMAX)]
    nmax: usize,
    #[command(flatten)]
    grid: GridArgs,
}

#[derive(Args)]
struct TrainArgs {
    spec: PathBuf,
    #[arg(long, default_value_t = 15)]
    q0: usize,
    /// Retained projections at deeper nodes; all are kept when absent.
    #[arg(long)]
    inner_q0: Option<usize>,
    /// Training SNR in dB.
    #[arg(long, default_value_t = -3.0, allow_hyphen_values = true)]
    snr_db: f64,
    #[arg(long, default_value_t = 128)]
    batch: usize,
    #[arg(long, default_value_t = 2000)]
    iters: usize,
    #[arg(long, default_value_t = 0.01)]
    lr: f64,
    /// Temperature of the top-k relaxation.
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,
    #[arg(long, default_value_t = DEFAULT_NMAX)]
    nmax: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct TimeshareArgs {
    #[arg(long, default_value_t = 6)]
    m: usize,
    /// Target rate, e.g. 0.21875 for 14/64.
    #[arg(long, conflicts_with = "alpha")]
    rate: Option<f64>,
    /// Fraction of time spent on RM(m,2).
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    grid: GridArgs,
}

fn read_spec(path: &Path) -> Result<GeneratorSpec> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let raw: GeneratorSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing GeneratorSpec {}", path.display()))?;
    Ok(GeneratorSpec::new(raw.m, raw.k, raw.extra_rows)?)
}

fn write_output(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            std::io::stdout().write_all(text.as_bytes())?;
            Ok(())
        }
    }
}

fn construct(a: &ConstructArgs) -> Result<()> {
    let objective = match a.objective {
        ObjectiveArg::MinFullL => Objective::MinFullL,
        ObjectiveArg::MaxFullL => Objective::MaxFullL,
        ObjectiveArg::MinSubsetL => Objective::MinSubsetL(a.q0),
    };
    let opts = SearchOptions {
        random_budget: a.samples.map(|samples| RandomBudget { samples, seed: a.seed }),
        ..SearchOptions::default()
    };
    let out = search_selection(a.m, a.k, objective, opts)?;
    let json = serde_json::to_string_pretty(&out.spec)? + "\n";
    let summary = format!(
        "code ({}, {}): full_L = {}, best_{}_L = {}, bottoms = {}\nsearch: {} of {} selections{}",
        out.spec.n(),
        out.spec.k,
        out.score.full_l,
        a.q0,
        out.score.best_subset_l(a.q0),
        out.score.bottom_count(),
        out.evaluated,
        out.total,
        if out.exhaustive {
            " (exhaustive)".to_string()
        } else {
            format!(" (random, coverage {:.3e}, seed {})", out.coverage(), a.seed)
        }
    );
    match &a.output {
        Some(p) => {
            write_output(Some(p), &json)?;
            println!("{summary}");
        }
        None => {
            print!("{json}");
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn inspect(a: &InspectArgs) -> Result<()> {
    let spec = read_spec(&a.spec)?;
    let plan = DecodingPlan::build(&spec)?;
    let summary = plan.summary();
    if a.json {
        println!("{}", serde_json::to_string_pretty(&summary)?);
        return Ok(());
    }
    println!(
        "code ({}, {}), order {}, extra rows {:?}",
        summary.n,
        summary.k,
        spec.order(),
        spec.extra_rows
    );
    println!("depth {}, level sizes {:?}", summary.depth, summary.level_sizes);
    println!("full_L = {}, bottoms = {}", summary.full_l, summary.bottom_count);
    let mut census = std::collections::BTreeMap::new();
    for b in &summary.bottoms {
        *census.entry(b.rank).or_insert(0usize) += 1;
    }
    println!("\nrank  count  2^R");
    for (rank, count) in census {
        println!("{rank:>4}  {count:>5}  {:>3}", 1u64 << rank);
    }
    println!("\npath  rank  2^R");
    for b in &summary.bottoms {
        let path: Vec<String> = b.path.iter().map(|q| q.to_string()).collect();
        println!("{:<5} {:>4}  {:>3}", path.join("/"), b.rank, b.cost);
    }
    Ok(())
}

/// A resolved pruning choice with its report labels.
struct Pruning {
    profile: PruningProfile,
    label: String,
    q0: Option<usize>,
}

fn resolve_pruning(plan: &DecodingPlan, text: &str, q0: usize, seed: u64) -> Result<Pruning> {
    let (profile, label, q0) = match text {
        "full" => (PruningProfile::full(), "full".to_string(), None),
        "minrank" => (select_by_rank(plan, q0, RankDirection::Min)?, text.to_string(), Some(q0)),
        "maxrank" => (select_by_rank(plan, q0, RankDirection::Max)?, text.to_string(), Some(q0)),
        "random" => (select_random(plan, q0, seed)?, text.to_string(), Some(q0)),
        path => {
            let p = Path::new(path);
            let profile = PruningProfile::load(p)?;
            let q0 = profile.node(&[]).and_then(|n| n.q0);
            let label = p.file_stem().map_or(path.into(), |s| s.to_string_lossy().into_owned());
            (profile, label, q0)
        }
    };
    Ok(Pruning { profile, label, q0 })
}

fn build_decoder<'a>(
    plan: &'a DecodingPlan,
    spec: &GeneratorSpec,
    decoder: DecoderArg,
    pruning: &Pruning,
    nmax: usize,
) -> Result<Box<dyn BlockDecoder + 'a>> {
    let variant = match decoder {
        DecoderArg::Map => return Ok(Box::new(MlDecoder::new(spec)?)),
        DecoderArg::Subrpa => RpaVariant::Hard,
        DecoderArg::SoftSubrpa => RpaVariant::Soft(Aggregation::Soft),
        DecoderArg::SoftSubrpaLogsum => RpaVariant::Soft(Aggregation::LogSum),
    };
    Ok(Box::new(RpaDecoder::new(plan, &pruning.profile, variant, nmax)?))
}

fn simulate_many(
    spec_path: &Path,
    decoders: &[DecoderArg],
    prunings: &[String],
    q0: usize,
    nmax: usize,
    grid: &GridArgs,
) -> Result<()> {
    let spec = read_spec(spec_path)?;
    let (axis, points) = grid.axis_and_grid()?;
    let opts = grid.options();
    let plan = DecodingPlan::build(&spec)?;
    let resolved: Vec<Pruning> = prunings
        .iter()
        .map(|p| resolve_pruning(&plan, p, q0, grid.seed))
        .collect::<Result<_>>()?;
    let full = resolve_pruning(&plan, "full", q0, grid.seed)?;

    let mut built: Vec<(Box<dyn BlockDecoder + '_>, &'static str, &Pruning)> = Vec::new();
    for &d in decoders {
        if d == DecoderArg::Map {
            built.push((build_decoder(&plan, &spec, d, &full, nmax)?, d.label(), &full));
            continue;
        }
        for p in &resolved {
            built.push((build_decoder(&plan, &spec, d, p, nmax)?, d.label(), p));
        }
    }
    let entries: Vec<DecoderEntry> = built
        .iter()
        .map(|(dec, label, p)| DecoderEntry {
            decoder: dec.as_ref(),
            label: label.to_string(),
            pruning: p.label.clone(),
            q0: p.q0,
        })
        .collect();
    eprintln!("seed = {}, trials = {}", opts.seed, opts.trials);
    let report = thread_pool()?.install(|| run_bler(&spec, &entries, axis, &points, &opts))?;
    write_report(&report, grid.output.as_deref())
}

fn write_report(report: &SimReport, path: Option<&Path>) -> Result<()> {
    write_output(path, &report.to_csv_string()?)
}

fn train(a: &TrainArgs) -> Result<()> {
    let spec = read_spec(&a.spec)?;
    let plan = DecodingPlan::build(&spec)?;
    let cfg = TrainConfig {
        batch_size: a.batch,
        training_snr_db: a.snr_db,
        iterations: a.iters,
        learning_rate: a.lr,
        topk_epsilon: a.epsilon,
        q0: a.q0,
        inner_q0: a.inner_q0,
        n_max: a.nmax,
        seed: a.seed,
    };
    eprintln!("seed = {}, iterations = {}, batch = {}", cfg.seed, cfg.iterations, cfg.batch_size);
    let out = thread_pool()?.install(|| train_weights(&plan, &cfg))?;
    let first = out.loss_history.first().copied().unwrap_or(f64::NAN);
    let last = out.loss_history.last().copied().unwrap_or(f64::NAN);
    eprintln!("loss {first:.5} -> {last:.5}");
    if let Ok(ranks) = retained_ranks(&plan, &out.profile) {
        eprintln!("retained ranks {ranks:?}");
    }
    write_output(a.output.as_deref(), &(out.profile.to_json()? + "\n"))
}

fn timeshare(a: &TimeshareArgs) -> Result<()> {
    let (axis, points) = a.grid.axis_and_grid()?;
    if axis != GridAxis::EbN0 {
        bail!("time sharing is swept over --ebn0");
    }
    let rate = match (a.rate, a.alpha) {
        (None, None) => Some(14.0 / 64.0),
        (r, _) => r,
    };
    let opts = a.grid.options();
    eprintln!("seed = {}, trials = {}", opts.seed, opts.trials);
    let report = thread_pool()?.install(|| time_sharing_bler(a.m, rate, a.alpha, &points, &opts))?;
    write_report(&report, a.grid.output.as_deref())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Construct(a) => construct(&a),
        Command::Inspect(a) => inspect(&a),
        Command::Simulate(a) => simulate_many(&a.spec, &[a.decoder], &[a.pruning], a.q0, a.nmax, &a.grid),
        Command::Sweep(a) => simulate_many(&a.spec, &a.decoders, &a.prunings, a.q0, a.nmax, &a.grid),
        Command::Train(a) => train(&a),
        Command::Timeshare(a) => timeshare(&a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
