//! Command-line interface. With `--json` every query command prints exactly
//! the payload the matching HTTP endpoint returns.

use std::collections::BTreeSet;
use std::io::Write;
use std::net::{IpAddr, SocketAddr};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use lakescope_core::index::NodeKind;
use lakescope_core::ingest::CatalogQuery;
use lakescope_core::registry::StrategyKind;
use lakescope_core::search::SearchMode;

use crate::error::ServiceError;
use crate::http::DEFAULT_PORT;
use crate::service::{Service, ServiceOptions};
use crate::views::*;

#[derive(Debug, Parser)]
#[command(name = "lakescope", version, about = "Explore a data lake through a hierarchy of generated topics")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Data directory holding the catalog, forests and jobs.
    #[arg(long, env = "LAKESCOPE_DATA", global = true, default_value = "lakescope-data")]
    pub data_dir: PathBuf,
    /// Use deterministic offline providers even when endpoints are configured.
    #[arg(long, global = true)]
    pub offline: bool,
    /// Print machine-readable JSON (the HTTP payloads).
    #[arg(long, global = true)]
    pub json: bool,
    /// Override the top-layer bound K.
    #[arg(long, global = true)]
    pub k: Option<usize>,
    /// Override the clustering seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum KindArg {
    Column,
    Table,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum StrategyKindArg {
    Clustering,
    Embedding,
    Relation,
}

impl From<StrategyKindArg> for StrategyKind {
    fn from(k: StrategyKindArg) -> Self {
        match k {
            StrategyKindArg::Clustering => StrategyKind::Clustering,
            StrategyKindArg::Embedding => StrategyKind::Embedding,
            StrategyKindArg::Relation => StrategyKind::Relation,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Ingest .sql files or directory trees of them. A `<stem>.meta` file next
    /// to a script is read as its sidecar metadata.
    Ingest {
        #[arg(required = true)]
        paths: Vec<PathBuf>,
    },
    /// Build a new forest version and print its top-layer labels.
    Build {
        /// Resume a failed job (default: the most recent one).
        #[arg(long, num_args = 0..=1, default_missing_value = "latest", value_name = "JOB")]
        resume: Option<String>,
    },
    /// Semantic search over columns and tables.
    Search {
        query: String,
        #[arg(long)]
        n: Option<usize>,
        /// Build a fresh hierarchy over the hits instead of highlighting.
        #[arg(long)]
        fresh: bool,
        #[arg(long, value_enum)]
        kind: Vec<KindArg>,
        #[arg(long)]
        include_categories: bool,
    },
    /// Expand a node: its children plus relation edges.
    Expand {
        node_id: String,
        /// Comma-separated ids of the nodes currently shown.
        #[arg(long, value_delimiter = ',')]
        visible: Option<Vec<String>>,
        #[arg(long)]
        m: Option<usize>,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Top-layer nodes of the current forest.
    Root,
    /// One node with its children and ancestors.
    Node { node_id: String },
    /// Build jobs, or one job.
    Jobs { job_id: Option<String> },
    /// Ingested sources.
    Sources,
    /// Page through ingested tables.
    Catalog {
        #[arg(long)]
        pattern: Option<String>,
        #[arg(long)]
        page_size: Option<usize>,
        #[arg(long)]
        cursor: Option<String>,
    },
    /// Attach value data to a column (`source.table.column`); one value per
    /// line, `\N` for NULL.
    Values {
        column_path: String,
        #[arg(long)]
        file: PathBuf,
    },
    /// Manage clustering, embedding and relation strategies.
    Strategy {
        #[command(subcommand)]
        action: StrategyCommand,
    },
    /// Service status and catalog counts.
    Health,
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = DEFAULT_PORT)]
        port: u16,
        #[arg(long, default_value = "127.0.0.1")]
        host: IpAddr,
    },
}

#[derive(Debug, Subcommand)]
pub enum StrategyCommand {
    /// Register a plugin executable or a builtin under a new name.
    Register {
        #[arg(long, value_enum)]
        kind: StrategyKindArg,
        #[arg(long)]
        name: String,
        #[arg(long, conflicts_with = "builtin", required_unless_present = "builtin")]
        exec: Option<PathBuf>,
        #[arg(long)]
        builtin: Option<String>,
        /// Also make it the active strategy of its kind.
        #[arg(long)]
        activate: bool,
    },
    Activate {
        #[arg(long, value_enum)]
        kind: StrategyKindArg,
        #[arg(long)]
        name: String,
    },
    List,
}

fn print_json<T: Serialize>(value: &T) {
    let mut out = std::io::stdout().lock();
    let _ = serde_json::to_writer_pretty(&mut out, value);
    let _ = writeln!(out);
}

/// Every .sql file under `path` (or `path` itself), in file-name order.
pub fn sql_files(path: &Path) -> Result<Vec<PathBuf>, ServiceError> {
    if path.is_file() {
        return Ok(vec![path.to_path_buf()]);
    }
    if !path.is_dir() {
        return Err(ServiceError::NotFound(format!("path {}", path.display())));
    }
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(path).sort_by_file_name() {
        let entry = entry.map_err(|e| ServiceError::io(&path.display().to_string(), e))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e.eq_ignore_ascii_case("sql")) {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// Source name derived from a file name: the stem with dots and whitespace
/// replaced by underscores.
pub fn source_name(path: &Path) -> String {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    stem.chars().map(|c| if c == '.' || c.is_whitespace() { '_' } else { c }).collect()
}

pub fn ingest_request(path: &Path) -> Result<IngestRequest, ServiceError> {
    let read = |p: &Path| std::fs::read(p).map_err(|e| ServiceError::InvalidInput(format!("{}: {e}", p.display())));
    let ddl = String::from_utf8_lossy(&read(path)?).into_owned();
    let sidecar_path = path.with_extension("meta");
    let sidecar = if sidecar_path.is_file() {
        Some(String::from_utf8_lossy(&read(&sidecar_path)?).into_owned())
    } else {
        None
    };
    let origin = std::fs::canonicalize(path).unwrap_or_else(|_| path.to_path_buf());
    Ok(IngestRequest {
        name: source_name(path),
        ddl,
        origin: Some(origin.display().to_string()),
        sidecar,
    })
}

fn node_line(n: &NodeView) -> String {
    format!("{}  {}  [{} leaves]", n.node_id, n.label, n.member_leaf_count)
}

fn open(global: &GlobalArgs) -> Result<Arc<Service>, ServiceError> {
    Service::open(ServiceOptions {
        data_dir: global.data_dir.clone(),
        offline: global.offline,
        k: global.k,
        seed: global.seed,
    })
}

fn execute(cli: Cli) -> Result<(), ServiceError> {
    let g = &cli.global;
    let json = g.json;
    match cli.command {
        Command::Serve { port, host } => {
            let svc = open(g)?;
            let runtime = tokio::runtime::Builder::new_multi_thread()
                .enable_all()
                .build()
                .map_err(|e| ServiceError::io("runtime", e))?;
            runtime.block_on(crate::http::serve(svc, SocketAddr::new(host, port)))
        }
        Command::Ingest { paths } => {
            let mut files = Vec::new();
            for p in &paths {
                files.extend(sql_files(p)?);
            }
            if files.is_empty() {
                return Err(ServiceError::InvalidInput("no .sql files found".into()));
            }
            let requests = files.iter().map(|f| ingest_request(f)).collect::<Result<Vec<_>, _>>()?;
            let out = open(g)?.ingest(requests)?;
            if json {
                print_json(&out);
            } else {
                for s in &out.sources {
                    println!(
                        "{}: {} tables, {} columns, {} diagnostics{}",
                        s.source.name,
                        s.tables,
                        s.columns,
                        s.diagnostics.len(),
                        if s.replaced { " (replaced)" } else { "" }
                    );
                }
                println!(
                    "catalog: {} sources, {} tables, {} columns",
                    out.catalog.sources, out.catalog.tables, out.catalog.columns
                );
            }
            Ok(())
        }
        Command::Build { resume } => {
            let svc = open(g)?;
            let job = svc.build(BuildRequest { resume, k: None, seed: None })?;
            if json {
                print_json(&job);
            } else {
                let root = svc.root()?;
                eprintln!(
                    "{} built forest v{} (layers {:?}, {} reused)",
                    job.job_id,
                    root.forest_version,
                    job.frontier_sizes,
                    job.layers_reused
                );
                for n in &root.nodes {
                    println!("{}", n.label);
                }
            }
            Ok(())
        }
        Command::Search {
            query,
            n,
            fresh,
            kind,
            include_categories,
        } => {
            let kinds: BTreeSet<NodeKind> = kind
                .into_iter()
                .map(|k| match k {
                    KindArg::Column => NodeKind::Column,
                    KindArg::Table => NodeKind::Table,
                })
                .collect();
            let body = SearchBody {
                query_text: query,
                n,
                mode: fresh.then_some(SearchMode::FreshHierarchy),
                kind_filter: (!kinds.is_empty()).then_some(kinds),
                include_categories: include_categories.then_some(true),
            };
            let out = open(g)?.search(body)?;
            if json {
                print_json(&out);
            } else {
                println!(
                    "forest v{}; query: {}{}",
                    out.forest_version,
                    out.response.rephrased_query,
                    if out.response.rephrase_degraded { " (not rephrased)" } else { "" }
                );
                for (hit, node) in out.response.hits.iter().zip(&out.hit_nodes) {
                    println!("{:>3}. {:.4}  {:<8} {}  {}", hit.rank, hit.score, node.kind.as_str(), node.label, node.node_id);
                }
            }
            Ok(())
        }
        Command::Expand {
            node_id,
            visible,
            m,
            threshold,
        } => {
            let out = open(g)?.expand(
                &node_id,
                ExpandRequest {
                    visible_nodes: visible,
                    m,
                    threshold,
                },
            )?;
            if json {
                print_json(&out);
            } else {
                println!("{}", node_line(&out.node));
                for c in &out.children {
                    println!("  {}", node_line(c));
                }
                for e in &out.edges {
                    println!(
                        "  {} -> {}  {} {:.4}  {}",
                        e.from_node,
                        e.to_node,
                        e.relation_kind.as_str(),
                        e.weight,
                        e.description
                    );
                }
            }
            Ok(())
        }
        Command::Root => {
            let out = open(g)?.root()?;
            if json {
                print_json(&out);
            } else {
                for n in &out.nodes {
                    println!("{}", node_line(n));
                }
            }
            Ok(())
        }
        Command::Node { node_id } => {
            let out = open(g)?.node(&node_id)?;
            if json {
                print_json(&out);
            } else {
                println!("{}\n  {}", node_line(&out.node), out.node.summary_text);
                for a in &out.ancestors {
                    println!("  ancestor {}", node_line(a));
                }
                for c in &out.children {
                    println!("  child {}", node_line(c));
                }
            }
            Ok(())
        }
        Command::Jobs { job_id } => {
            let svc = open(g)?;
            let jobs = match job_id {
                Some(id) => {
                    let job = svc.job(&id)?;
                    if json {
                        print_json(&job);
                        return Ok(());
                    }
                    vec![job]
                }
                None => {
                    let list = svc.list_jobs()?;
                    if json {
                        print_json(&list);
                        return Ok(());
                    }
                    list.jobs
                }
            };
            for j in jobs {
                println!(
                    "{}  {:?}  layer {}  frontier {:?}{}",
                    j.job_id,
                    j.state,
                    j.current_layer,
                    j.frontier_sizes,
                    j.error.map(|e| format!("  error: {e}")).unwrap_or_default()
                );
            }
            Ok(())
        }
        Command::Sources => {
            let out = open(g)?.list_sources();
            if json {
                print_json(&out);
            } else {
                for s in &out.sources {
                    println!("{}  {} tables  {} columns  {}", s.source.name, s.tables, s.columns, s.source.origin_uri);
                }
            }
            Ok(())
        }
        Command::Catalog {
            pattern,
            page_size,
            cursor,
        } => {
            let out = open(g)?.list_catalog(&CatalogQuery {
                pattern,
                page_size,
                cursor,
            })?;
            if json {
                print_json(&out);
            } else {
                for t in &out.items {
                    println!("{}.{}  {} columns", t.source_name, t.name, t.column_count);
                }
                if let Some(c) = &out.next_cursor {
                    println!("next cursor: {c}");
                }
            }
            Ok(())
        }
        Command::Values { column_path, file } => {
            let text = std::fs::read_to_string(&file)
                .map_err(|e| ServiceError::InvalidInput(format!("{}: {e}", file.display())))?;
            let values = text
                .lines()
                .map(|l| if l == "\\N" { None } else { Some(l.to_string()) })
                .collect();
            let out = open(g)?.ingest_values(ValuesRequest { column_path, values })?;
            if json {
                print_json(&out);
            } else {
                println!(
                    "{}: {} rows, ~{} distinct, {:.1}% null",
                    out.column_id,
                    out.row_count,
                    out.distinct_estimate,
                    out.null_fraction * 100.0
                );
            }
            Ok(())
        }
        Command::Strategy { action } => {
            let svc = open(g)?;
            let descriptor = match action {
                StrategyCommand::List => {
                    let out = svc.list_strategies();
                    if json {
                        print_json(&out);
                    } else {
                        for s in &out.strategies {
                            println!(
                                "{}{:<10} {:<20} {:?}  {}",
                                if s.active { "* " } else { "  " },
                                s.kind.as_str(),
                                s.name,
                                s.source,
                                s.entrypoint
                            );
                        }
                    }
                    return Ok(());
                }
                StrategyCommand::Register {
                    kind,
                    name,
                    exec,
                    builtin,
                    activate,
                } => svc.register_strategy(StrategyRegistration {
                    kind: kind.into(),
                    name,
                    exec: exec.map(|p| p.display().to_string()),
                    builtin,
                    activate,
                })?,
                StrategyCommand::Activate { kind, name } => svc.activate_strategy(StrategyKind::from(kind).as_str(), &name)?,
            };
            if json {
                print_json(&descriptor);
            } else {
                println!(
                    "{} {} strategy {}{}",
                    if descriptor.active { "active" } else { "registered" },
                    descriptor.kind.as_str(),
                    descriptor.name,
                    if descriptor.active { "" } else { " (inactive)" }
                );
            }
            Ok(())
        }
        Command::Health => {
            let out = open(g)?.health()?;
            if json {
                print_json(&out);
            } else {
                println!(
                    "{}: forest {}, {} sources, {} tables, {} columns, provider {:?}",
                    out.status,
                    out.forest_version.map_or("none".to_string(), |v| format!("v{v}")),
                    out.catalog.sources,
                    out.catalog.tables,
                    out.catalog.columns,
                    out.provider
                );
            }
            Ok(())
        }
    }
}

/// Parses `std::env::args`, runs the command and returns the exit code.
pub fn main() -> i32 {
    let cli = Cli::parse();
    let serving = matches!(cli.command, Command::Serve { .. });
    let default_filter = if serving { "info" } else { "warn" };
    let filter = tracing_subscriber::EnvFilter::try_from_env("LAKESCOPE_LOG")
        .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new(default_filter));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let json = cli.global.json;
    match execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            if json {
                print_json(&serde_json::json!({ "error": e.body() }));
            }
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
