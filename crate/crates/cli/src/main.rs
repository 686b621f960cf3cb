use std::fs::File;
use std::io::{BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rfir_core::harness::{run_task, EvalConfig, Khat, SyntheticCorpusSpec, TaskKind};
use rfir_core::metrics::write_scatter_csv;
use rfir_core::store::{write_embeddings, write_manifest, Dataset};
use rfir_service::{router, ServiceConfig, SessionManager};

#[derive(Parser)]
#[command(name = "rfir", version, about = "Retrieval with one round of binary relevance feedback")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load an embeddings file and its manifest and report what was found.
    Ingest(IngestArgs),
    /// Run a simulated test-and-control evaluation.
    Eval(EvalArgs),
    /// Write a Gaussian-cluster corpus as `<prefix>.rfe` + `<prefix>.jsonl`.
    Synth(SynthArgs),
    /// Serve interactive sessions over HTTP.
    Serve(ServeArgs),
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    embeddings: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
}

impl DataArgs {
    fn load(&self) -> anyhow::Result<Dataset> {
        Dataset::load(&self.embeddings, &self.manifest).with_context(|| {
            format!(
                "loading {} with {}",
                self.embeddings.display(),
                self.manifest.display()
            )
        })
    }
}

#[derive(Args)]
struct IngestArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Only validate; print a one-line verdict.
    #[arg(long)]
    check: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "category")]
    task: TaskKind,
    #[arg(long, default_value_t = 50)]
    m: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    k: Vec<usize>,
    /// Candidate pool of the refined retrieval: "all" or a count.
    #[arg(long, default_value = "all")]
    khat: Khat,
    /// Number of splits; seeds 0..N.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    /// Probability of flipping each simulated feedback bit.
    #[arg(long, default_value_t = 0.0)]
    flip_prob: f64,
    /// Drop captions with fewer items than this.
    #[arg(long, default_value_t = rfir_core::harness::DEFAULT_MIN_CAPTION_COUNT)]
    min_caption_count: usize,
    /// Include similarity-evaluation counts and timings in the report.
    #[arg(long)]
    count_ops: bool,
    /// Write (positive-feedback count, MAP@R) points as CSV.
    #[arg(long)]
    scatter: Option<PathBuf>,
    /// Report path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 20)]
    classes: usize,
    #[arg(long, default_value_t = 100)]
    per_class: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 0.35)]
    sigma: f64,
    #[arg(long, default_value_t = 1.2)]
    separation: f64,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    out_prefix: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value_t = 8080)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
    /// Default first-round size.
    #[arg(long, default_value_t = 10)]
    m: usize,
    /// Refined result count.
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Let refined results repeat items the user already rated.
    #[arg(long)]
    allow_rated: bool,
    /// Append session events to this JSONL file.
    #[arg(long)]
    transcript: Option<PathBuf>,
    /// Base directory for relative image paths; defaults to the manifest's directory.
    #[arg(long)]
    image_root: Option<PathBuf>,
    /// Static UI bundle served under `/`.
    #[arg(long)]
    static_dir: Option<PathBuf>,
}

fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info")),
        )
        .init();
    match Cli::parse().command {
        Command::Ingest(args) => ingest(args),
        Command::Eval(args) => eval(args),
        Command::Synth(args) => synth(args),
        Command::Serve(args) => serve(args),
    }
}

fn ingest(args: IngestArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    if args.check {
        println!("ok: {} items, dim {}, 0 errors", ds.len(), ds.store().dim());
        return Ok(());
    }
    let corpus = ds.corpus();
    let labels: std::collections::BTreeSet<&str> = corpus
        .items()
        .iter()
        .flat_map(|it| it.labels.iter().map(String::as_str))
        .collect();
    let summary = serde_json::json!({
        "items": ds.len(),
        "dim": ds.store().dim(),
        "labels": labels.len(),
        "with_adj_noun": corpus.items().iter().filter(|it| it.adj.is_some() && it.noun.is_some()).count(),
        "with_image": corpus.items().iter().filter(|it| it.image_uri.is_some()).count(),
    });
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(())
}

fn eval(args: EvalArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    let config = EvalConfig {
        task: args.task,
        m: args.m,
        k: args.k,
        khat: args.khat,
        seeds: (0..args.seeds).collect(),
        flip_prob: args.flip_prob,
        min_caption_count: args.min_caption_count,
    };
    let report = run_task(&ds, &config)?;

    if let Some(path) = &args.scatter {
        let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
        write_scatter_csv(&report.scatter, BufWriter::new(file))?;
    }
    let mut json = serde_json::to_value(&report)?;
    if !args.count_ops {
        json.as_object_mut().unwrap().remove("op_counts");
    }
    let text = serde_json::to_string_pretty(&json)?;
    match &args.out {
        Some(path) => std::fs::write(path, text + "\n")
            .with_context(|| format!("writing {}", path.display()))?,
        None => println!("{text}"),
    }

    let mut err = std::io::stderr().lock();
    for (k, ms) in &report.refined.per_k {
        let c = report.control.per_k[k];
        writeln!(
            err,
            "Recall@{k}: refined {:.1} ± {:.1}, control {:.1} ± {:.1}",
            ms.mean, ms.std, c.mean, c.std
        )?;
    }
    writeln!(
        err,
        "MAP@R: refined {:.4}, control {:.4}; {} of {} trials had no preferred candidates",
        report.refined.map_at_r.mean, report.control.map_at_r.mean, report.failures, report.trials
    )?;
    if args.count_ops {
        writeln!(
            err,
            "similarity evals per refined retrieval / per control retrieval: {:.1}",
            report.op_counts.eval_ratio
        )?;
    }
    Ok(())
}

fn synth(args: SynthArgs) -> anyhow::Result<()> {
    let spec = SyntheticCorpusSpec {
        n_classes: args.classes,
        samples_per_class: args.per_class,
        dim: args.dim,
        class_separation: args.separation,
        noise_sigma: args.sigma,
        seed: args.seed,
    };
    let ds = spec.generate()?;
    let rfe = with_suffix(&args.out_prefix, "rfe");
    let jsonl = with_suffix(&args.out_prefix, "jsonl");
    write_embeddings(ds.store(), &rfe)?;
    write_manifest(ds.corpus(), &jsonl)?;
    println!("wrote {} and {} ({} items)", rfe.display(), jsonl.display(), ds.len());
    Ok(())
}

fn with_suffix(prefix: &Path, ext: &str) -> PathBuf {
    let mut s = prefix.as_os_str().to_owned();
    s.push(".");
    s.push(ext);
    PathBuf::from(s)
}

fn serve(args: ServeArgs) -> anyhow::Result<()> {
    let ds = args.data.load()?;
    if args.m == 0 || args.k == 0 {
        bail!("--m and --k must be at least 1");
    }
    let image_root = args.image_root.or_else(|| {
        args.data
            .manifest
            .parent()
            .map(|p| if p.as_os_str().is_empty() { Path::new(".") } else { p })
            .map(Path::to_path_buf)
    });
    let config = ServiceConfig {
        m: args.m,
        k: args.k,
        rate_once: !args.allow_rated,
        transcript: args.transcript,
        image_root,
        static_dir: args.static_dir,
    };
    let manager = Arc::new(SessionManager::new(Arc::new(ds), config)?);
    let app = router(manager);
    let addr = SocketAddr::new(args.host, args.port);

    tokio::runtime::Runtime::new()?.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .with_context(|| format!("binding {addr}"))?;
        tracing::info!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok(())
    })
}
