use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use parclust::bench::{run_bench, BenchConfig};
use parclust::io::{self, IdColumn, LoadOptions};
use parclust::oracle::{oracle_batched, oracle_single_linkage};
use parclust::scheduler::report_utilization;
use parclust::synth::{generate_synthetic, BlobSpec};
use parclust::{engine, Error, MetricKind, Result, RunConfig, Settings};

#[derive(Parser)]
#[command(name = "parclust", version, about = "Constrained single-linkage clustering")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Cluster a point file with the parallel engine.
    Cluster(RunArgs),
    /// Cluster with the brute-force reference implementation.
    Oracle(RunArgs),
    /// Write a Gaussian blob dataset and its labels.
    Generate(GenerateArgs),
    /// Time the engine over worker counts and dataset sizes.
    Bench(BenchArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Settings file of `key = value` lines; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    input: Option<PathBuf>,
    /// Id column, as a 0-based index or a header name.
    #[arg(long)]
    id_column: Option<String>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    metric: Option<MetricKind>,
    #[arg(long)]
    pairs_per_batch: Option<usize>,
    #[arg(long)]
    blocks: Option<usize>,
    /// Pairs collected per pipeline pass (at least pairs-per-batch).
    #[arg(long)]
    prefetch_pairs: Option<usize>,
    #[arg(long)]
    managers: Option<usize>,
    #[arg(long)]
    workers_per_manager: Option<usize>,
    #[arg(long)]
    input_buffers: Option<usize>,
    #[arg(long)]
    output_buffers: Option<usize>,
    #[arg(long)]
    buffers_per_worker: Option<usize>,
    /// Stop once fewer than this many clusters remain.
    #[arg(long)]
    kl1: Option<usize>,
    /// Clusters larger than this are never merged.
    #[arg(long)]
    kl2: Option<usize>,
    /// Largest allowed merged cluster.
    #[arg(long)]
    kl3: Option<usize>,
    /// Pairs touching a cluster smaller than this go first in each round.
    #[arg(long)]
    kl4: Option<usize>,
    /// Largest allowed merge distance.
    #[arg(long)]
    dmax: Option<f64>,
}

impl RunArgs {
    fn settings(&self) -> Result<Settings> {
        let file = match &self.config {
            Some(path) => Settings::from_file(path)?,
            None => Settings::default(),
        };
        let flags = Settings {
            input: self.input.clone(),
            id_column: self.id_column.clone(),
            out_dir: self.out_dir.clone(),
            seed: self.seed,
            metric: self.metric,
            pairs_per_batch: self.pairs_per_batch,
            blocks: self.blocks,
            prefetch_pairs: self.prefetch_pairs,
            managers: self.managers,
            workers_per_manager: self.workers_per_manager,
            input_buffers: self.input_buffers,
            output_buffers: self.output_buffers,
            buffers_per_worker: self.buffers_per_worker,
            kl1: self.kl1,
            kl2: self.kl2,
            kl3: self.kl3,
            kl4: self.kl4,
            dmax: self.dmax,
        };
        Ok(file.overlay(&flags))
    }
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    clusters: usize,
    #[arg(long, default_value_t = 1.0)]
    spread: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Point file to write.
    #[arg(long)]
    output: PathBuf,
    /// Label file; defaults to `<output>.labels.csv`.
    #[arg(long)]
    labels: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "10000")]
    sizes: Vec<usize>,
    /// Total worker counts; the first is the speedup baseline.
    #[arg(long, value_delimiter = ',', default_value = "1,2,4")]
    workers: Vec<usize>,
    #[arg(long, default_value_t = 3)]
    trials: usize,
    #[arg(long, default_value_t = 8)]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 1024)]
    pairs_per_batch: usize,
    /// Also write the report as JSON.
    #[arg(long)]
    json: Option<PathBuf>,
}

fn cluster(args: &RunArgs, use_oracle: bool) -> Result<()> {
    let settings = args.settings()?;
    let config: RunConfig = settings.run_config()?;
    let input = settings
        .input
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("an input file is required (--input or input = ...)".into()))?;
    let options = LoadOptions {
        id_column: settings.id_column.as_deref().map(IdColumn::parse),
        ..LoadOptions::default()
    };
    let dataset = io::load_dataset(input, &options)?;
    let out_dir = settings.out_dir.clone().unwrap_or_else(|| PathBuf::from("parclust-out"));

    let result = if use_oracle {
        let start = Instant::now();
        let c = &config.constraints;
        let oracle = if c.kl4.is_some() {
            oracle_batched(&dataset, c, config.metric, config.pairs_per_batch)?
        } else {
            oracle_single_linkage(&dataset, c, config.metric)?
        };
        io::oracle_run_result(oracle, &config, start.elapsed().as_secs_f64())
    } else {
        engine::run(&dataset, &config)?
    };
    let paths = io::write_outputs(&result, &dataset, &config, &out_dir)?;
    println!(
        "{} points, {} merges in {} rounds, {} clusters, stop: {}, {:.3}s",
        dataset.len(),
        result.merges.len(),
        result.rounds,
        result.clusters,
        result.stop.name(),
        result.wall_secs
    );
    if !use_oracle {
        print!("{}", report_utilization(&result.utilization));
    }
    println!("wrote {}", paths.stats.parent().unwrap_or(&out_dir).display());
    Ok(())
}

fn generate(args: &GenerateArgs) -> Result<()> {
    let spec = BlobSpec { n: args.n, d: args.d, clusters: args.clusters, spread: args.spread, seed: args.seed };
    let synthetic = generate_synthetic(&spec)?;
    io::write_dataset(&synthetic.dataset, &args.output)?;
    let labels = args.labels.clone().unwrap_or_else(|| {
        let mut name = args.output.clone().into_os_string();
        name.push(".labels.csv");
        PathBuf::from(name)
    });
    io::write_labels(&synthetic.dataset, &synthetic.labels, &labels)?;
    println!("wrote {} and {}", args.output.display(), labels.display());
    Ok(())
}

fn bench(args: &BenchArgs) -> Result<()> {
    let config = BenchConfig {
        sizes: args.sizes.clone(),
        workers: args.workers.clone(),
        trials: args.trials,
        dim: args.d,
        seed: args.seed,
        base: RunConfig { pairs_per_batch: args.pairs_per_batch, ..RunConfig::default() },
    };
    let report = run_bench(&config)?;
    print!("{report}");
    if let Some(path) = &args.json {
        let file = std::fs::File::create(path).map_err(|e| Error::Io { path: path.clone(), source: e })?;
        serde_json::to_writer_pretty(file, &report)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let outcome = match &cli.command {
        Command::Cluster(args) => cluster(args, false),
        Command::Oracle(args) => cluster(args, true),
        Command::Generate(args) => generate(args),
        Command::Bench(args) => bench(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
