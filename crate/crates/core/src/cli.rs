//! Command-line driver: `synth`, `fit`, `stream` and `eval`.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::eval::{assign_clusters, clustering_accuracy, nmi, synth_generate, LabelVector, SynthSpec};
use crate::io::{
    load_batch, load_labels, load_predictions, write_assignments, write_batch, write_manifest,
    AssignmentRow, EntityKind, Manifest, MANIFEST_FILE,
};
use crate::linalg::DenseMatrix;
use crate::offline::{fit_offline, SolverConfig};
use crate::online::{run_stream, Mode, StreamConfig};
use crate::report::{
    write_json, write_report, ConfigEcho, Metrics, RunMode, RunReport, TimestampRecord, TimingEntry,
};

#[derive(Debug, Parser)]
#[command(name = "tricluster", version, about = "Sentiment co-clustering of tweets, users and features")]
struct Cli {
    /// Worker threads for the solver kernels (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a planted-partition stream.
    Synth(SynthArgs),
    /// Batch factorization of one data directory.
    Fit(FitArgs),
    /// Process a stream listed in a manifest.
    Stream(StreamArgs),
    /// Score predicted clusters against ground truth.
    Eval(EvalArgs),
}

#[derive(Debug, Args)]
struct SynthArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 600)]
    tweets: usize,
    #[arg(long, default_value_t = 150)]
    users: usize,
    #[arg(long, default_value_t = 90)]
    features: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 0.9)]
    separation: f64,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 1)]
    timestamps: usize,
    #[arg(long, default_value_t = 0.0)]
    churn: f64,
    #[arg(long, default_value_t = 0.0)]
    drift: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Batch directory.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value_t = 0.05)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Also embed wall-clock timings in report.json (makes it non-reproducible).
    #[arg(long)]
    timings_in_report: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Online,
    MiniBatch,
    FullBatch,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Online => Mode::Online,
            ModeArg::MiniBatch => Mode::MiniBatch,
            ModeArg::FullBatch => Mode::FullBatch,
        }
    }
}

#[derive(Debug, Args)]
struct StreamArgs {
    /// Manifest file listing `timestamp directory` pairs.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "online")]
    mode: ModeArg,
    #[arg(long, default_value_t = 0.9)]
    alpha: f64,
    #[arg(long, default_value_t = 0.8)]
    beta: f64,
    #[arg(long, default_value_t = 0.2)]
    gamma: f64,
    #[arg(long, default_value_t = 0.9)]
    tau: f64,
    #[arg(long, default_value_t = 2)]
    window: usize,
    #[arg(long, default_value_t = 3)]
    clusters: usize,
    #[arg(long, default_value_t = 200)]
    max_iters: usize,
    #[arg(long, default_value_t = 1e-6)]
    tol: f64,
    #[arg(long, default_value_t = 1e-12)]
    eps: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    timings_in_report: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum MetricArg {
    Accuracy,
    Nmi,
    Both,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum KindArg {
    Tweet,
    User,
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Assignments file or `id\tclass` labels file.
    #[arg(long)]
    pred: PathBuf,
    /// `id\tclass` labels file.
    #[arg(long)]
    truth: PathBuf,
    #[arg(long, value_enum, default_value = "both")]
    metric: MetricArg,
    /// Which rows of an assignments file to score.
    #[arg(long, value_enum, default_value = "tweet")]
    kind: KindArg,
}

/// Parses `argv` (program name first), runs the command and returns the
/// process exit status.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let result = match cli.threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli.command)),
            Err(e) => Err(Error::Config(format!("cannot start {n} threads: {e}"))),
        },
        None => run(cli.command),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth(a) => synth(a),
        Command::Fit(a) => fit(a),
        Command::Stream(a) => stream(a),
        Command::Eval(a) => eval(a),
    }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn batch_dir_name(ts: u64) -> String {
    format!("t{ts:04}")
}

fn synth(a: SynthArgs) -> Result<()> {
    let spec = SynthSpec {
        n: a.tweets,
        m: a.users,
        l: a.features,
        k: a.clusters,
        separation: a.separation,
        noise: a.noise,
        timestamps: a.timestamps,
        churn: a.churn,
        drift: a.drift,
        seed: a.seed,
    };
    let data = synth_generate(&spec)?;
    create_dir(&a.out)?;
    let mut entries = Vec::new();
    for (batch, truth) in data.batches.iter().zip(&data.truth) {
        let name = batch_dir_name(batch.timestamp);
        write_batch(&a.out.join(&name), batch, Some(truth))?;
        entries.push((batch.timestamp, name));
    }
    write_manifest(&entries, &a.out.join(MANIFEST_FILE))?;
    println!(
        "wrote {} batch(es) of {} tweets and {} users to {}",
        entries.len(),
        spec.n,
        spec.m,
        a.out.display()
    );
    Ok(())
}

fn assignment_rows(
    tweet_ids: &[String],
    tweets: &DenseMatrix,
    user_ids: &[String],
    users: &DenseMatrix,
) -> (Vec<AssignmentRow>, LabelVector, LabelVector) {
    let mut rows = Vec::with_capacity(tweet_ids.len() + user_ids.len());
    let mut push = |kind, ids: &[String], m: &DenseMatrix| {
        let a = assign_clusters(m);
        for (i, id) in ids.iter().enumerate() {
            rows.push(AssignmentRow {
                kind,
                id: id.clone(),
                cluster: a.classes[i],
                score: a.scores[i],
            });
        }
        LabelVector::from_pairs(ids.iter().cloned().zip(a.classes.iter().copied()))
            .expect("batch ids are unique")
    };
    let t = push(EntityKind::Tweet, tweet_ids, tweets);
    let u = push(EntityKind::User, user_ids, users);
    (rows, t, u)
}

fn print_record(rec: &TimestampRecord) {
    println!(
        "t={} sweeps={} converged={} objective={:.6}",
        rec.timestamp,
        rec.iterations,
        rec.converged,
        rec.objective.last().copied().unwrap_or(f64::NAN)
    );
    let m = &rec.metrics;
    for (name, v) in [
        ("tweet accuracy", m.tweet_accuracy),
        ("tweet nmi", m.tweet_nmi),
        ("user accuracy", m.user_accuracy),
        ("user nmi", m.user_nmi),
    ] {
        if let Some(v) = v {
            println!("  {name} {v:.6}");
        }
    }
}

fn fit(a: FitArgs) -> Result<()> {
    let config = SolverConfig {
        alpha: a.alpha,
        beta: a.beta,
        k: a.clusters,
        max_iters: a.max_iters,
        tol: a.tol,
        eps: a.eps,
        seed: a.seed,
    };
    config.validate()?;
    let loaded = load_batch(&a.data, 0, config.k)?;
    let batch = &loaded.batch;
    let start = std::time::Instant::now();
    let (state, trace) = fit_offline(&batch.bundle, &config)?;
    let wall_ms = start.elapsed().as_secs_f64() * 1e3;
    let (rows, tweets, users) = assignment_rows(&batch.tweet_ids, &state.sp, &batch.user_ids, &state.su);
    let mut rec = TimestampRecord::new(batch.timestamp, batch.bundle.n(), batch.bundle.m(), &trace);
    rec.metrics = Metrics::compute(&tweets, &users, loaded.tweet_truth.as_ref(), loaded.user_truth.as_ref())?;
    if a.timings_in_report {
        rec.wall_ms = Some(wall_ms);
    }
    print_record(&rec);
    let report = RunReport {
        mode: RunMode::Offline,
        data: a.data.display().to_string(),
        config: ConfigEcho::Offline(config),
        records: vec![rec],
    };
    create_dir(&a.out)?;
    write_assignments(&rows, &a.out.join("assignments.tsv"))?;
    write_report(&report, &a.out.join("report.json"))?;
    write_json(
        &vec![TimingEntry {
            timestamp: batch.timestamp,
            wall_ms,
        }],
        &a.out.join("timings.json"),
    )
}

fn stream(a: StreamArgs) -> Result<()> {
    let config = StreamConfig {
        solver: SolverConfig {
            alpha: a.alpha,
            beta: a.beta,
            k: a.clusters,
            max_iters: a.max_iters,
            tol: a.tol,
            eps: a.eps,
            seed: a.seed,
        },
        gamma: a.gamma,
        tau: a.tau,
        window: a.window,
        mode: a.mode.into(),
    };
    config.validate()?;
    let manifest = Manifest::load(&a.data)?;
    let loaded = manifest
        .entries
        .iter()
        .map(|(ts, dir)| load_batch(dir, *ts, config.solver.k))
        .collect::<Result<Vec<_>>>()?;
    let batches: Vec<_> = loaded.iter().map(|l| l.batch.clone()).collect();
    let results = run_stream(&batches, &config)?;
    create_dir(&a.out)?;
    let mut records = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for (step, l) in results.iter().zip(&loaded) {
        let b = &l.batch;
        let (rows, tweets, users) =
            assignment_rows(&b.tweet_ids, &step.tweet_clusters, &b.user_ids, &step.user_clusters);
        write_assignments(&rows, &a.out.join(format!("assignments_{}.tsv", b.timestamp)))?;
        let wall_ms = step.wall.as_secs_f64() * 1e3;
        let mut rec = TimestampRecord::new(b.timestamp, b.bundle.n(), b.bundle.m(), &step.trace);
        rec.metrics = Metrics::compute(&tweets, &users, l.tweet_truth.as_ref(), l.user_truth.as_ref())?;
        if a.timings_in_report {
            rec.wall_ms = Some(wall_ms);
        }
        print_record(&rec);
        records.push(rec);
        timings.push(TimingEntry {
            timestamp: b.timestamp,
            wall_ms,
        });
    }
    let report = RunReport {
        mode: config.mode.into(),
        data: a.data.display().to_string(),
        config: ConfigEcho::Stream(config),
        records,
    };
    write_report(&report, &a.out.join("report.json"))?;
    write_json(&timings, &a.out.join("timings.json"))
}

fn eval(a: EvalArgs) -> Result<()> {
    let kind = match a.kind {
        KindArg::Tweet => EntityKind::Tweet,
        KindArg::User => EntityKind::User,
    };
    let pred = load_predictions(&a.pred, kind)?;
    let truth = load_labels(&a.truth)?;
    if matches!(a.metric, MetricArg::Accuracy | MetricArg::Both) {
        println!("accuracy {:.6}", clustering_accuracy(&pred, &truth)?);
    }
    if matches!(a.metric, MetricArg::Nmi | MetricArg::Both) {
        println!("nmi {:.6}", nmi(&pred, &truth)?);
    }
    Ok(())
}
