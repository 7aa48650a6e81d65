use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use fann::io::{load_dataset, save_dataset, Format};
use fann::sampler::build_sampler;
use fann::{generate_planted, run_bench, run_fairness_test, Config, PlantSpec, SamplerKind};
use fann_core::lsh::LshFamily;
use fann_core::{Dataset, Metric, SeededRng};

#[derive(Parser)]
#[command(name = "fann", version, about = "Fair near-neighbor sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a structure and print its size
    Build {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        input: InputArgs,
    },
    /// Answer every row of a query file
    Query {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        input: InputArgs,
        /// Query points, same format as the dataset
        #[arg(long)]
        queries: PathBuf,
    },
    /// Measure output frequencies against the exact neighborhood
    Fairness {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        source: SourceArgs,
        #[arg(long, default_value_t = 10_000)]
        trials: usize,
    },
    /// Time queries and report work counters
    Bench {
        #[command(flatten)]
        run: RunArgs,
        #[command(flatten)]
        source: SourceArgs,
        /// Minimum number of queries; the query rows are cycled to reach it
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
    /// Write a planted instance and its query point
    Gen {
        #[command(flatten)]
        metric: MetricArgs,
        #[command(flatten)]
        plant: PlantArgs,
        #[arg(long, env = "FANN_SEED", default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the query point [default: OUT with `.query` before the extension]
        #[arg(long)]
        query_out: Option<PathBuf>,
        #[arg(long)]
        format: Option<Format>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum MetricName {
    Euclidean,
    Hamming,
    InnerProduct,
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyName {
    BitSampling,
    Hyperplane,
    PStable,
}

#[derive(Args)]
struct MetricArgs {
    #[arg(long, value_enum, default_value = "hamming")]
    metric: MetricName,
    /// Near radius
    #[arg(long, default_value_t = 1.0)]
    r: f64,
    /// Approximation factor; far means beyond c·r
    #[arg(long, default_value_t = 2.0)]
    c: f64,
    /// Near similarity threshold
    #[arg(long, default_value_t = 0.8)]
    alpha: f64,
    /// Far similarity threshold
    #[arg(long, default_value_t = 0.4)]
    beta: f64,
    /// Hash family [default: the metric's natural family]
    #[arg(long, value_enum)]
    family: Option<FamilyName>,
    /// Bucket width for p-stable hashing [default: r]
    #[arg(long)]
    width: Option<f64>,
}

impl MetricArgs {
    fn metric(&self) -> anyhow::Result<Metric> {
        Ok(match self.metric {
            MetricName::Euclidean => Metric::euclidean(self.r, self.c)?,
            MetricName::Hamming => Metric::hamming(self.r, self.c)?,
            MetricName::InnerProduct => Metric::inner_product(self.alpha, self.beta)?,
        })
    }

    fn family(&self) -> Option<LshFamily> {
        self.family.map(|f| match f {
            FamilyName::BitSampling => LshFamily::BitSampling,
            FamilyName::Hyperplane => LshFamily::Hyperplane,
            FamilyName::PStable => LshFamily::PStable { width: self.width.unwrap_or(self.r) },
        })
    }
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value = "nnis")]
    sampler: SamplerKind,
    #[command(flatten)]
    metric: MetricArgs,
    /// Filter query slack ε (same as --const eps_filter=...)
    #[arg(long)]
    eps: Option<f64>,
    /// Override a constant: C_L, C_lambda, C_Sigma, C_Delta, C_t, C_f, eps_filter, R
    #[arg(long = "const", value_name = "NAME=VALUE")]
    constants: Vec<String>,
    #[arg(long, env = "FANN_SEED", default_value_t = 0)]
    seed: u64,
}

impl RunArgs {
    fn config(&self) -> anyhow::Result<Config> {
        let mut config = Config::new(self.sampler, self.metric.metric()?);
        config.family = self.metric.family();
        config.seed = self.seed;
        if let Some(eps) = self.eps {
            config.constants.set("eps_filter", eps)?;
        }
        for c in &self.constants {
            config.constants.assign(c)?;
        }
        config.validate()?;
        Ok(config)
    }
}

#[derive(Args)]
struct InputArgs {
    #[arg(long)]
    input: PathBuf,
    /// text or binary [default: from the file extension]
    #[arg(long)]
    format: Option<Format>,
}

impl InputArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        load(&self.input, self.format)
    }
}

#[derive(Args)]
struct PlantArgs {
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Planted points within r
    #[arg(long, default_value_t = 10)]
    near: usize,
    /// Planted points between r and cr
    #[arg(long, default_value_t = 0)]
    cnear: usize,
}

/// Either files on disk or a planted instance generated on the fly.
#[derive(Args)]
struct SourceArgs {
    #[arg(long, requires = "query")]
    input: Option<PathBuf>,
    /// File whose rows are query points
    #[arg(long)]
    query: Option<PathBuf>,
    #[arg(long)]
    format: Option<Format>,
    #[command(flatten)]
    plant: PlantArgs,
}

impl SourceArgs {
    fn resolve(&self, metric: Metric, seed: u64) -> anyhow::Result<(Dataset, Vec<Vec<f32>>)> {
        match &self.input {
            Some(input) => {
                let data = load(input, self.format)?;
                let path = self.query.as_ref().expect("clap enforces --query");
                let queries = load(path, self.format)?;
                if queries.dim() != data.dim() {
                    bail!("query dimension {} does not match dataset dimension {}", queries.dim(), data.dim());
                }
                let rows = queries.iter().map(|p| p.coords.to_vec()).collect();
                Ok((data, rows))
            }
            None => {
                let inst = plant(metric, &self.plant, seed)?;
                Ok((inst.dataset, vec![inst.query]))
            }
        }
    }
}

fn load(path: &Path, format: Option<Format>) -> anyhow::Result<Dataset> {
    let format = format.unwrap_or_else(|| Format::from_path(path));
    load_dataset(path, format).context("loading dataset")
}

fn plant(metric: Metric, p: &PlantArgs, seed: u64) -> anyhow::Result<fann::PlantedInstance> {
    let spec = PlantSpec::new(metric, p.n, p.dim, p.near, p.cnear);
    Ok(generate_planted(&spec, &mut SeededRng::stream(seed, u64::MAX))?)
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Build { run, input } => {
            let config = run.config()?;
            let data = input.load()?;
            let start = Instant::now();
            let s = build_sampler(&config, &data, &mut SeededRng::stream(config.seed, 0))?;
            let ms = start.elapsed().as_secs_f64() * 1e3;
            writeln!(out, "sampler={}", s.name())?;
            writeln!(out, "n={}", data.len())?;
            writeln!(out, "dim={}", data.dim())?;
            writeln!(out, "build_ms={ms}")?;
            writeln!(out, "memory_bytes={}", s.memory_bytes())?;
            if let Some(d) = s.state_digest() {
                writeln!(out, "state_digest={d:016x}")?;
            }
        }
        Command::Query { run, input, queries } => {
            let config = run.config()?;
            let data = input.load()?;
            let qs = load(&queries, input.format)?;
            let mut s = build_sampler(&config, &data, &mut SeededRng::stream(config.seed, 0))?;
            let mut rng = SeededRng::stream(config.seed, 1 << 40);
            for q in qs.iter() {
                let r = s.sample(q.coords, &mut rng)?;
                match r.outcome {
                    Some(id) => writeln!(out, "query.{}={id}", q.id)?,
                    None => writeln!(out, "query.{}=none", q.id)?,
                }
            }
        }
        Command::Fairness { run, source, trials } => {
            let mut config = run.config()?;
            config.trials = trials;
            let (data, queries) = source.resolve(config.metric, config.seed)?;
            let q = queries.first().context("query file is empty")?;
            let report = run_fairness_test(&config, &data, q)?;
            report.write_kv(&mut out)?;
            report.write_table(&mut std::io::stderr())?;
        }
        Command::Bench { run, source, trials } => {
            let config = run.config()?;
            let (data, mut queries) = source.resolve(config.metric, config.seed)?;
            if queries.len() < trials {
                queries = queries.iter().cycle().take(trials).cloned().collect();
            }
            let report = run_bench(&config, &data, &queries)?;
            report.write_kv(&mut out)?;
            report.write_table(&mut std::io::stderr())?;
        }
        Command::Gen { metric, plant: p, seed, out: path, query_out, format } => {
            let inst = plant(metric.metric()?, &p, seed)?;
            let format = format.unwrap_or_else(|| Format::from_path(&path));
            let qpath = query_out.unwrap_or_else(|| match (path.file_stem(), path.extension()) {
                (Some(stem), Some(ext)) => {
                    let mut name = stem.to_os_string();
                    name.push(".query.");
                    name.push(ext);
                    path.with_file_name(name)
                }
                _ => {
                    let mut s = path.clone().into_os_string();
                    s.push(".query");
                    s.into()
                }
            });
            save_dataset(&path, &inst.dataset, format)?;
            let q = Dataset::from_rows(inst.query.len(), &[inst.query.as_slice()])?;
            save_dataset(&qpath, &q, format)?;
            writeln!(out, "n={}", inst.dataset.len())?;
            writeln!(out, "dim={}", inst.dataset.dim())?;
            writeln!(out, "near={}", inst.near.len())?;
            writeln!(out, "cnear={}", inst.cnear.len())?;
            writeln!(out, "seed={}", inst.seed)?;
            writeln!(out, "dataset={}", path.display())?;
            writeln!(out, "query={}", qpath.display())?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            eprintln!("{}", msg.lines().next().unwrap_or("invalid arguments"));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
