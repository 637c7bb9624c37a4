//! Command-line surface: `partition`, `run`, `train-loader`,
//! `bench-schedulers`, `gen`, and `oracle`.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::engine::{self, EngineConfig, EngineMode, LoadingMode, RunHooks, Scheduler};
use crate::error::{Error, Result};
use crate::loader::{self, LoaderModelSet, MODEL_FILE, SAMPLES_FILE};
use crate::oracle::MemGraph;
use crate::sink::{CollectSink, NullSink};
use crate::store::{import_partition, partition_sequential, GraphStore, PartitionOptions};
use crate::synth::{self, SyntheticKind};
use crate::tasks::{ppr_reports, PprSink, TaskSpec};

#[derive(Parser)]
#[command(name = "grasorw", version, about = "Out-of-core random-walk engine")]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convert an edge list into a block-partitioned store.
    Partition(PartitionArgs),
    /// Execute a walk task against a store.
    Run(RunArgs),
    /// Calibrate the block-loading cost model for a store and task.
    TrainLoader(TrainArgs),
    /// Run one task under every scheduler and engine mode; emit counters.
    BenchSchedulers(BenchArgs),
    /// Generate a synthetic edge list.
    Gen(GenArgs),
    /// Run the in-memory reference execution of a task.
    Oracle(OracleArgs),
}

#[derive(Args)]
struct PartitionArgs {
    /// Edge list: whitespace-separated `src dst` lines, `#` comments.
    #[arg(long)]
    input: PathBuf,
    /// Output store directory.
    #[arg(long)]
    out: PathBuf,
    /// Block size, e.g. `20000KB`, `16MiB`, `512M`.
    #[arg(long, default_value = "16MiB")]
    block_size: String,
    /// Neighbor-ID width in bytes (4 or 8).
    #[arg(long, default_value_t = 4)]
    id_width: u8,
    /// Per-vertex block assignment; switches to custom partitioning.
    #[arg(long)]
    block_file: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum TaskKind {
    Rwnv,
    Prnv,
    Deepwalk,
}

#[derive(Args)]
struct TaskArgs {
    #[arg(long, value_enum)]
    task: TaskKind,
    /// Node2vec return parameter.
    #[arg(long, default_value_t = 1.0)]
    p: f64,
    /// Node2vec in-out parameter.
    #[arg(long, default_value_t = 1.0)]
    q: f64,
    #[arg(long, default_value_t = 10)]
    walks_per_vertex: u64,
    #[arg(long, default_value_t = 80)]
    length: u32,
    /// Continue probability for PageRank queries.
    #[arg(long, default_value_t = 0.85)]
    decay: f64,
    #[arg(long, default_value_t = 20)]
    max_length: u32,
    /// Walks per query node; defaults to 4x the vertex count.
    #[arg(long)]
    samples_per_query: Option<u64>,
    /// File with one query-node ID per line (PageRank queries).
    #[arg(long)]
    query_nodes: Option<PathBuf>,
}

impl TaskArgs {
    fn to_spec(&self, vertex_count: u64) -> Result<TaskSpec> {
        Ok(match self.task {
            TaskKind::Rwnv => TaskSpec::Rwnv {
                walks_per_vertex: self.walks_per_vertex,
                length: self.length,
                p: self.p,
                q: self.q,
            },
            TaskKind::Deepwalk => TaskSpec::DeepWalkGen {
                walks_per_vertex: self.walks_per_vertex,
                length: self.length,
            },
            TaskKind::Prnv => {
                let path = self.query_nodes.as_ref().ok_or_else(|| {
                    Error::Config("PageRank queries need --query-nodes FILE".into())
                })?;
                TaskSpec::Prnv {
                    query_nodes: read_query_nodes(path)?,
                    decay: self.decay,
                    max_length: self.max_length,
                    samples_per_query: self.samples_per_query.unwrap_or(4 * vertex_count),
                    p: self.p,
                    q: self.q,
                }
            }
        })
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum SchedulerArg {
    Iteration,
    Alphabet,
    Minheight,
    Maxsum,
    Gwmix,
}

impl From<SchedulerArg> for Scheduler {
    fn from(s: SchedulerArg) -> Scheduler {
        match s {
            SchedulerArg::Iteration => Scheduler::Iteration,
            SchedulerArg::Alphabet => Scheduler::Alphabet,
            SchedulerArg::Minheight => Scheduler::MinHeight,
            SchedulerArg::Maxsum => Scheduler::MaxSum,
            SchedulerArg::Gwmix => Scheduler::GraphWalkerMix {
                max_sum_prob: Scheduler::DEFAULT_MIX_PROB,
            },
        }
    }
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Triangular,
    Plainbucket,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum LoadingArg {
    Full,
    Ondemand,
    Learned,
}

#[derive(Args)]
struct EngineArgs {
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Counter-based draws; trajectories independent of scheduling. Needs
    /// one walk per source.
    #[arg(long)]
    deterministic: bool,
    /// Current-block strategy; defaults to iteration (triangular engine)
    /// or gwmix (plain-bucket engine).
    #[arg(long, value_enum)]
    scheduler: Option<SchedulerArg>,
    #[arg(long, value_enum, default_value = "triangular")]
    engine: EngineArg,
    #[arg(long, value_enum, default_value = "full")]
    loading: LoadingArg,
    /// Run storage-law and conservation checks at every slot boundary.
    #[arg(long)]
    validate: bool,
}

impl EngineArgs {
    fn to_config(&self, task: &TaskSpec) -> Result<EngineConfig> {
        let engine_mode = match self.engine {
            EngineArg::Triangular => EngineMode::Triangular,
            EngineArg::Plainbucket => EngineMode::PlainBucket,
        };
        let scheduler = match self.scheduler {
            Some(s) => s.into(),
            None => match engine_mode {
                EngineMode::Triangular => Scheduler::Iteration,
                EngineMode::PlainBucket => Scheduler::GraphWalkerMix {
                    max_sum_prob: Scheduler::DEFAULT_MIX_PROB,
                },
            },
        };
        Ok(EngineConfig {
            model: task.model()?,
            termination: task.termination(),
            scheduler,
            engine_mode,
            loading_mode: match self.loading {
                LoadingArg::Full => LoadingMode::AlwaysFull,
                LoadingArg::Ondemand => LoadingMode::AlwaysOnDemand,
                LoadingArg::Learned => LoadingMode::Learned,
            },
            threads: self.threads,
            seed: self.seed,
            deterministic: self.deterministic,
            validate: self.validate,
            ..EngineConfig::default()
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[command(flatten)]
    engine: EngineArgs,
    /// Metrics JSON destination; stdout when omitted.
    #[arg(long)]
    metrics_out: Option<PathBuf>,
    /// Trajectory destination: a file path, or `null` to discard.
    #[arg(long, default_value = "null")]
    traj_out: String,
    /// PageRank estimates destination; stdout when omitted.
    #[arg(long)]
    ppr_out: Option<PathBuf>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV destination; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum GenKind {
    Er,
    Star,
    TwoCommunity,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 1000)]
    n: u64,
    #[arg(long, default_value_t = 16.0)]
    avg_degree: f64,
    #[arg(long, default_value_t = 5)]
    leaves: u64,
    #[arg(long, default_value_t = 0.1)]
    p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    p_out: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct OracleArgs {
    #[arg(long)]
    store: PathBuf,
    #[command(flatten)]
    task: TaskArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    deterministic: bool,
    #[arg(long, default_value = "null")]
    traj_out: String,
    #[arg(long)]
    ppr_out: Option<PathBuf>,
}

pub fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::new().filter("GRASORW_LOG")).init();
    match Cli::parse().command {
        Command::Partition(args) => cmd_partition(args),
        Command::Run(args) => cmd_run(args),
        Command::TrainLoader(args) => cmd_train_loader(args),
        Command::BenchSchedulers(args) => cmd_bench_schedulers(args),
        Command::Gen(args) => cmd_gen(args),
        Command::Oracle(args) => cmd_oracle(args),
    }
}

fn cmd_partition(args: PartitionArgs) -> Result<()> {
    let store = match &args.block_file {
        Some(blocks) => import_partition(&args.input, blocks, &args.out, args.id_width)?,
        None => {
            let opts = PartitionOptions {
                block_size: parse_size(&args.block_size)?,
                id_width: args.id_width,
            };
            partition_sequential(&args.input, &args.out, &opts)?
        }
    };
    println!(
        "{}: {} vertices, {} stored edges, {} blocks",
        args.out.display(),
        store.vertex_count(),
        store.meta().edge_count,
        store.block_count()
    );
    Ok(())
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let store = GraphStore::open(&args.store)?;
    let degrees = store.read_all_degrees()?;
    let task = args.task.to_spec(store.vertex_count())?;
    let cfg = args.engine.to_config(&task)?;
    let model_set = if cfg.loading_mode == LoadingMode::Learned {
        Some(
            LoaderModelSet::load(&args.store.join(MODEL_FILE)).map_err(|e| {
                Error::Config(format!("learned loading needs a trained model: {e}"))
            })?,
        )
    } else {
        None
    };
    let starts = task.starts(&degrees)?;

    let metrics = if task.is_ppr() {
        let mut sink = PprSink::new();
        let report = engine::run(
            &store,
            &starts,
            &cfg,
            model_set.as_ref(),
            &mut sink,
            RunHooks::default(),
        )?;
        let reports = ppr_reports(&sink.estimates(), 50);
        let json = serde_json::to_string_pretty(&reports)?;
        match &args.ppr_out {
            Some(path) => std::fs::write(path, json + "\n")?,
            None => println!("{json}"),
        }
        report.metrics
    } else if args.traj_out != "null" {
        let mut sink = CollectSink::new(store.id_width());
        let report = engine::run(
            &store,
            &starts,
            &cfg,
            model_set.as_ref(),
            &mut sink,
            RunHooks::default(),
        )?;
        let mut file = std::io::BufWriter::new(std::fs::File::create(&args.traj_out)?);
        sink.write_to(&mut file)?;
        file.flush()?;
        report.metrics
    } else {
        let mut sink = NullSink;
        let report = engine::run(
            &store,
            &starts,
            &cfg,
            model_set.as_ref(),
            &mut sink,
            RunHooks::default(),
        )?;
        report.metrics
    };

    emit_metrics(&metrics.to_json(), args.metrics_out.as_deref())
}

fn cmd_train_loader(args: TrainArgs) -> Result<()> {
    let store = GraphStore::open(&args.store)?;
    let degrees = store.read_all_degrees()?;
    let task = args.task.to_spec(store.vertex_count())?;
    let starts = task.starts(&degrees)?;
    let base = EngineConfig {
        model: task.model()?,
        termination: task.termination(),
        threads: args.threads,
        seed: args.seed,
        ..EngineConfig::default()
    };
    let (model, samples) = loader::train(&store, &starts, &base, RunHooks::default())?;
    if model.global_model().is_none() {
        log::warn!(
            "calibration produced too few samples for a pooled fit; \
             the selector will stay on full load"
        );
    }
    loader::write_samples_csv(&args.store.join(SAMPLES_FILE), &samples)?;
    model.save(&args.store.join(MODEL_FILE))?;
    println!(
        "{}: {} samples, model written to {}",
        args.store.display(),
        samples.len(),
        args.store.join(MODEL_FILE).display()
    );
    Ok(())
}

fn cmd_bench_schedulers(args: BenchArgs) -> Result<()> {
    let store = GraphStore::open(&args.store)?;
    let degrees = store.read_all_degrees()?;
    let task = args.task.to_spec(store.vertex_count())?;
    let starts = task.starts(&degrees)?;
    let mut csv = String::from(
        "strategy,engine,block_io_count,block_io_bytes,on_demand_io_count,vertex_io_count,wall_seconds\n",
    );
    let schedulers: [(&str, Scheduler); 5] = [
        ("iteration", Scheduler::Iteration),
        ("alphabet", Scheduler::Alphabet),
        ("minheight", Scheduler::MinHeight),
        ("maxsum", Scheduler::MaxSum),
        (
            "gwmix",
            Scheduler::GraphWalkerMix {
                max_sum_prob: Scheduler::DEFAULT_MIX_PROB,
            },
        ),
    ];
    let modes: [(&str, EngineMode); 2] = [
        ("triangular", EngineMode::Triangular),
        ("plainbucket", EngineMode::PlainBucket),
    ];
    for (mode_name, mode) in modes {
        for (sched_name, scheduler) in schedulers {
            let cfg = EngineConfig {
                model: task.model()?,
                termination: task.termination(),
                scheduler,
                engine_mode: mode,
                threads: args.threads,
                seed: args.seed,
                ..EngineConfig::default()
            };
            let mut sink = NullSink;
            let report = engine::run(&store, &starts, &cfg, None, &mut sink, RunHooks::default())?;
            let m = &report.metrics;
            csv.push_str(&format!(
                "{sched_name},{mode_name},{},{},{},{},{:.6}\n",
                m.block_io_count,
                m.block_io_bytes,
                m.on_demand_io_count,
                m.vertex_io_count,
                m.wall_seconds
            ));
            log::info!(
                "bench {mode_name}/{sched_name}: {} block loads",
                m.block_loads()
            );
        }
    }
    match &args.out {
        Some(path) => std::fs::write(path, csv)?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let kind = match args.kind {
        GenKind::Er => SyntheticKind::ErdosRenyi {
            n: args.n,
            avg_degree: args.avg_degree,
        },
        GenKind::Star => SyntheticKind::Star {
            leaves: args.leaves,
        },
        GenKind::TwoCommunity => SyntheticKind::TwoCommunity {
            n: args.n,
            p_in: args.p_in,
            p_out: args.p_out,
        },
    };
    let stats = synth::generate(kind, args.seed, &args.out)?;
    println!(
        "{}: {} vertices, {} edges",
        args.out.display(),
        stats.vertices,
        stats.edges
    );
    Ok(())
}

fn cmd_oracle(args: OracleArgs) -> Result<()> {
    let store = GraphStore::open(&args.store)?;
    let degrees = store.read_all_degrees()?;
    let task = args.task.to_spec(store.vertex_count())?;
    let starts = task.starts(&degrees)?;
    let graph = MemGraph::from_store(&store)?;
    let model = task.model()?;
    let termination = task.termination();
    if task.is_ppr() {
        let mut sink = PprSink::new();
        crate::oracle::oracle_run(
            &graph,
            &starts,
            model,
            termination,
            args.seed,
            args.deterministic,
            &mut sink,
        )?;
        let reports = ppr_reports(&sink.estimates(), 50);
        let json = serde_json::to_string_pretty(&reports)?;
        match &args.ppr_out {
            Some(path) => std::fs::write(path, json + "\n")?,
            None => println!("{json}"),
        }
    } else {
        let mut sink = CollectSink::new(store.id_width());
        crate::oracle::oracle_run(
            &graph,
            &starts,
            model,
            termination,
            args.seed,
            args.deterministic,
            &mut sink,
        )?;
        if args.traj_out != "null" {
            let mut file = std::io::BufWriter::new(std::fs::File::create(&args.traj_out)?);
            sink.write_to(&mut file)?;
            file.flush()?;
        }
        println!("{} trajectories", sink.len());
    }
    Ok(())
}

fn emit_metrics(json: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, format!("{json}\n"))?,
        None => println!("{json}"),
    }
    Ok(())
}

fn read_query_nodes(path: &Path) -> Result<Vec<u64>> {
    let text = std::fs::read_to_string(path)?;
    let mut nodes = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        nodes.push(t.parse::<u64>().map_err(|_| Error::Parse {
            path: path.to_path_buf(),
            line: i as u64 + 1,
            msg: format!("bad vertex id `{t}`"),
        })?);
    }
    Ok(nodes)
}

/// Parses sizes like `32`, `512B`, `20000KB`, `16MiB`, `2G`.
pub fn parse_size(text: &str) -> Result<u64> {
    let t = text.trim();
    let split = t.find(|c: char| !c.is_ascii_digit()).unwrap_or(t.len());
    let (num, suffix) = t.split_at(split);
    let value: u64 = num
        .parse()
        .map_err(|_| Error::Config(format!("bad size `{text}`")))?;
    let mult = match suffix.trim().to_ascii_lowercase().as_str() {
        "" | "b" => 1u64,
        "k" | "kb" | "kib" => 1 << 10,
        "m" | "mb" | "mib" => 1 << 20,
        "g" | "gb" | "gib" => 1 << 30,
        other => return Err(Error::Config(format!("bad size suffix `{other}`"))),
    };
    Ok(value * mult)
}
