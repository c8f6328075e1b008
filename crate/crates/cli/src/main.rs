mod config;

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;

use regwatch::fuse::{mean_ratio, run_pipeline_with_annotations, DataModelInstance, OverlapThreshold};
use regwatch::ingest::{fetch_updates, parse_article, parse_cfr_xml, parse_nic_csv, Article, UpdateSource};
use regwatch::json::to_canonical_string;
use regwatch::kgraph::{Graph, GraphStore, MergeReport, Query};
use regwatch::notify::{generate_alerts, parse_rules, Alert, SubscriptionKind, Taxonomy};
use regwatch::ratio::{self, Rational};

use config::Config;

#[derive(Parser)]
#[command(name = "regwatch", version, about = "Track regulatory threshold changes and alert subscribers")]
struct Cli {
    /// TOML configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Suppress diagnostics on stderr
    #[arg(long, short, global = true)]
    quiet: bool,
    /// Worker threads (0 = one per core)
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fetch articles from a URL or fixture directory
    Ingest(IngestArgs),
    /// Run the extraction pipeline over an article directory
    Extract(ExtractArgs),
    /// Build, merge into, or query the knowledge graph
    Graph {
        #[command(subcommand)]
        command: GraphCommand,
    },
    /// Evaluate subscriptions against extracted instances
    Notify(NotifyArgs),
    /// Poll a source and extract new articles as they appear
    Watch(WatchArgs),
}

#[derive(Args)]
struct IngestArgs {
    /// Feed URL or directory of article JSON files
    #[arg(long)]
    source: String,
    /// Earliest publication date to keep
    #[arg(long, default_value = "1900-01-01")]
    since: NaiveDate,
    /// Directory for fetched articles
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ExtractArgs {
    #[arg(long)]
    articles: PathBuf,
    /// Directory for instance files
    #[arg(long)]
    out: PathBuf,
    /// Directory of `<article_id>.json` annotation files
    #[arg(long)]
    annotations: Option<PathBuf>,
    /// Overrides the configured overlap threshold
    #[arg(long)]
    overlap_threshold: Option<String>,
}

#[derive(Subcommand)]
enum GraphCommand {
    /// Create a graph file from a registry extract
    Build {
        #[arg(long)]
        nic: PathBuf,
        /// Regulation XML whose sections become citation nodes
        #[arg(long)]
        regulations: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Merge instance files into an existing graph file
    Merge {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        instances: PathBuf,
    },
    /// Print bindings for `subject label object` or `subject l1 l2 object`; `*` is a wildcard
    Query {
        #[arg(long)]
        graph: PathBuf,
        #[arg(required = true)]
        pattern: Vec<String>,
    },
}

#[derive(Args)]
struct NotifyArgs {
    #[arg(long)]
    instances: PathBuf,
    #[arg(long)]
    rules: Option<PathBuf>,
    #[arg(long)]
    taxonomy: Option<PathBuf>,
    /// Alerts output, one JSON object per line
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct WatchArgs {
    #[arg(long)]
    source: String,
    #[arg(long, default_value = "1900-01-01")]
    since: NaiveDate,
    #[arg(long)]
    articles: PathBuf,
    #[arg(long)]
    instances: PathBuf,
    /// Seconds between polls
    #[arg(long, default_value_t = 300)]
    interval: u64,
    /// Stop after this many polls (0 = run until interrupted)
    #[arg(long, default_value_t = 0)]
    iterations: u64,
}

#[derive(Debug, Default, Serialize)]
struct GraphCounts {
    nodes: usize,
    edges: usize,
    nodes_added: usize,
    edges_added: usize,
    edges_deduplicated: usize,
}

#[derive(Debug, Default, Serialize)]
struct RunReport {
    articles_processed: usize,
    instances_written: usize,
    #[serde(with = "ratio::serde_opt_str")]
    mean_summarization_ratio: Option<Rational>,
    alerts_emitted: usize,
    diagnostics: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    summarization_ratios: BTreeMap<String, String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    graph: Option<GraphCounts>,
}

struct Fatal(String);

impl<E: std::fmt::Display> From<E> for Fatal {
    fn from(e: E) -> Self {
        Fatal(e.to_string())
    }
}

type Outcome = Result<Option<RunReport>, Fatal>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.jobs > 0 {
        // Only fails if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(cli.jobs).build_global();
    }
    match run(&cli) {
        Ok(report) => {
            if let Some(report) = report {
                if !cli.quiet {
                    for d in &report.diagnostics {
                        eprintln!("{d}");
                    }
                }
                let line = to_canonical_string(&report).expect("report serializes");
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(Fatal(message)) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: &Cli) -> Outcome {
    let config = match &cli.config {
        Some(p) => Config::load(p)?,
        None => Config::builtin(),
    };
    match &cli.command {
        Command::Ingest(args) => ingest(args).map(Some),
        Command::Extract(args) => extract(args, &config).map(Some),
        Command::Graph { command } => graph(command, &config),
        Command::Notify(args) => notify(args, &config).map(Some),
        Command::Watch(args) => watch(args, &config, cli.quiet).map(|()| None),
    }
}

/// Write to a sibling temporary file, then rename over the target.
fn write_atomic(path: &Path, contents: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(format!(".tmp{}", std::process::id()));
    let tmp = PathBuf::from(tmp);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

/// File name for an id: anything outside `[A-Za-z0-9._-]` becomes `_`.
fn file_stem(id: &str) -> String {
    id.chars().map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-') { c } else { '_' }).collect()
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>, Fatal> {
    let mut files = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Fatal(format!("{}: {e}", dir.display())))? {
        let path = entry?.path();
        if path.is_file() && path.extension().is_some_and(|x| x == "json") {
            files.push(path);
        }
    }
    files.sort();
    Ok(files)
}

fn write_articles(articles: &[Article], out: &Path) -> Result<usize, Fatal> {
    fs::create_dir_all(out)?;
    for a in articles {
        let json = to_canonical_string(a)? + "\n";
        write_atomic(&out.join(format!("{}.json", file_stem(&a.id))), json.as_bytes())?;
    }
    Ok(articles.len())
}

fn ingest(args: &IngestArgs) -> Result<RunReport, Fatal> {
    let outcome = fetch_updates(&UpdateSource::parse(&args.source), args.since)?;
    let written = write_articles(&outcome.articles, &args.out)?;
    Ok(RunReport {
        articles_processed: written,
        diagnostics: outcome.skipped.iter().map(|s| format!("skipped {}: {}", s.document, s.reason)).collect(),
        ..RunReport::default()
    })
}

fn extract(args: &ExtractArgs, config: &Config) -> Result<RunReport, Fatal> {
    let mut pipeline = config.pipeline.clone();
    if let Some(t) = &args.overlap_threshold {
        pipeline.overlap_threshold = OverlapThreshold::parse(t)?;
    }
    let annotations = args.annotations.as_ref().or(config.annotations.as_ref());
    let files = json_files(&args.articles)?;
    fs::create_dir_all(&args.out)?;

    let results: Vec<Result<(String, String, Rational), String>> = files
        .par_iter()
        .map(|path| {
            let shown = path.display();
            let raw = fs::read_to_string(path).map_err(|e| format!("{shown}: {e}"))?;
            let article = parse_article(&raw).map_err(|e| format!("{shown}: {e}"))?;
            let ann = annotations
                .map(|dir| dir.join(format!("{}.json", file_stem(&article.id))))
                .filter(|p| p.is_file())
                .map(|p| fs::read_to_string(&p).map_err(|e| format!("{}: {e}", p.display())))
                .transpose()?;
            let out = run_pipeline_with_annotations(&article, &pipeline, ann.as_deref())
                .map_err(|e| format!("{}: {e}", article.id))?;
            Ok((article.id, out.instance.to_canonical_json(), out.ratio))
        })
        .collect();

    let mut report = RunReport::default();
    let mut ratios = Vec::new();
    let mut seen = BTreeSet::new();
    for r in results {
        match r {
            Ok((id, json, ratio)) => {
                if !seen.insert(id.clone()) {
                    report.diagnostics.push(format!("duplicate article id {id}, later copy skipped"));
                    continue;
                }
                write_atomic(&args.out.join(format!("{}.json", file_stem(&id))), (json + "\n").as_bytes())?;
                report.articles_processed += 1;
                report.instances_written += 1;
                report.summarization_ratios.insert(id, ratio.to_string());
                ratios.push(ratio);
            }
            Err(d) => report.diagnostics.push(d),
        }
    }
    report.mean_summarization_ratio = mean_ratio(&ratios);
    Ok(report)
}

fn read_instances(dir: &Path, diagnostics: &mut Vec<String>) -> Result<Vec<DataModelInstance>, Fatal> {
    let mut out = Vec::new();
    for path in json_files(dir)? {
        let parsed = fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|raw| serde_json::from_str::<DataModelInstance>(&raw).map_err(|e| e.to_string()));
        match parsed {
            Ok(i) => out.push(i),
            Err(e) => diagnostics.push(format!("{}: {e}", path.display())),
        }
    }
    Ok(out)
}

fn counts(graph: &Graph, merge: &MergeReport) -> GraphCounts {
    GraphCounts {
        nodes: graph.node_count(),
        edges: graph.edge_count(),
        nodes_added: merge.nodes_added,
        edges_added: merge.edges_added,
        edges_deduplicated: merge.edges_deduplicated,
    }
}

fn graph(command: &GraphCommand, config: &Config) -> Outcome {
    match command {
        GraphCommand::Build { nic, regulations, out } => {
            let records = parse_nic_csv(&fs::read_to_string(nic)?, &config.entity_types)
                .map_err(|e| Fatal(format!("{}: {e}", nic.display())))?;
            let mut g = Graph::new();
            let mut merge = g.ingest_nic(&records, &config.relations, &config.aliases);
            if let Some(xml) = regulations {
                let sections =
                    parse_cfr_xml(&fs::read_to_string(xml)?).map_err(|e| Fatal(format!("{}: {e}", xml.display())))?;
                merge.absorb(g.ingest_regulations(&sections, &config.aliases));
            }
            write_atomic(out, g.to_file_string().as_bytes())?;
            Ok(Some(RunReport {
                graph: Some(counts(&g, &merge)),
                diagnostics: std::mem::take(&mut merge.diagnostics),
                ..RunReport::default()
            }))
        }
        GraphCommand::Merge { graph, instances } => {
            let store = GraphStore::new(Graph::open(graph).map_err(|e| Fatal(format!("{}: {e}", graph.display())))?);
            let mut report = RunReport::default();
            let instances = read_instances(instances, &mut report.diagnostics)?;
            let mut merge = MergeReport::default();
            for i in &instances {
                merge.absorb(store.mutate(|g| g.merge_instance(i, &config.aliases)));
            }
            let g = store.snapshot();
            write_atomic(graph, g.to_file_string().as_bytes())?;
            report.articles_processed = instances.len();
            report.diagnostics.append(&mut merge.diagnostics);
            report.graph = Some(counts(&g, &merge));
            Ok(Some(report))
        }
        GraphCommand::Query { graph, pattern } => {
            let g = Graph::open(graph).map_err(|e| Fatal(format!("{}: {e}", graph.display())))?;
            let terms: Vec<&str> = pattern.iter().flat_map(|p| p.split_whitespace()).collect();
            let bindings = g.query_pattern(&Query::from_terms(&terms)?)?;
            let mut stdout = std::io::stdout().lock();
            for b in bindings {
                writeln!(stdout, "{b}")?;
            }
            Ok(None)
        }
    }
}

fn notify(args: &NotifyArgs, config: &Config) -> Result<RunReport, Fatal> {
    let rules_path = args.rules.as_ref().or(config.rules.as_ref()).ok_or_else(|| Fatal("no rules file given".into()))?;
    let rules = fs::read_to_string(rules_path).map_err(|e| Fatal(format!("{}: {e}", rules_path.display())))?;
    let subs = parse_rules(&rules).map_err(|e| Fatal(format!("{}: {e}", rules_path.display())))?;
    let taxonomy = match args.taxonomy.as_ref().or(config.taxonomy.as_ref()) {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| Fatal(format!("{}: {e}", p.display())))?;
            Taxonomy::parse(&text).map_err(|e| Fatal(format!("{}: {e}", p.display())))?
        }
        None if subs.iter().any(|s| matches!(s.kind, SubscriptionKind::Role { .. })) => {
            return Err(Fatal("role subscriptions need a taxonomy file".into()))
        }
        None => Taxonomy::parse("entity\tentity").expect("single-term taxonomy"),
    };

    let mut report = RunReport::default();
    let instances = read_instances(&args.instances, &mut report.diagnostics)?;
    let batches: Vec<_> = instances.par_iter().map(|i| generate_alerts(i, &subs, &taxonomy)).collect();
    let mut alerts: Vec<Alert> = Vec::new();
    for b in batches {
        alerts.extend(b.alerts);
        report.diagnostics.extend(b.diagnostics);
    }
    alerts.sort_by(|a, b| (&a.subscriber_id, &a.article_id).cmp(&(&b.subscriber_id, &b.article_id)));
    alerts.dedup_by(|a, b| a.subscriber_id == b.subscriber_id && a.article_id == b.article_id);

    let mut out = String::new();
    for a in &alerts {
        out.push_str(&to_canonical_string(a)?);
        out.push('\n');
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    write_atomic(&args.out, out.as_bytes())?;
    report.articles_processed = instances.len();
    report.alerts_emitted = alerts.len();
    Ok(report)
}

fn watch(args: &WatchArgs, config: &Config, quiet: bool) -> Result<(), Fatal> {
    let source = UpdateSource::parse(&args.source);
    let mut poll = 0u64;
    loop {
        poll += 1;
        let report = match fetch_updates(&source, args.since) {
            Ok(outcome) => {
                fs::create_dir_all(&args.articles)?;
                let fresh: Vec<Article> = outcome
                    .articles
                    .into_iter()
                    .filter(|a| !args.articles.join(format!("{}.json", file_stem(&a.id))).exists())
                    .collect();
                let staging = args.articles.join(format!(".poll{}", std::process::id()));
                fs::create_dir_all(&staging)?;
                write_articles(&fresh, &staging)?;
                let mut report = extract(
                    &ExtractArgs {
                        articles: staging.clone(),
                        out: args.instances.clone(),
                        annotations: None,
                        overlap_threshold: None,
                    },
                    config,
                )?;
                for a in &fresh {
                    let name = format!("{}.json", file_stem(&a.id));
                    fs::rename(staging.join(&name), args.articles.join(&name))?;
                }
                fs::remove_dir_all(&staging)?;
                report.diagnostics.extend(outcome.skipped.iter().map(|s| format!("skipped {}: {}", s.document, s.reason)));
                report
            }
            Err(e) => RunReport { diagnostics: vec![format!("poll {poll}: {e}")], ..RunReport::default() },
        };
        if !quiet {
            for d in &report.diagnostics {
                eprintln!("{d}");
            }
        }
        println!("{}", to_canonical_string(&report)?);
        if args.iterations != 0 && poll >= args.iterations {
            return Ok(());
        }
        std::thread::sleep(Duration::from_secs(args.interval));
    }
}
