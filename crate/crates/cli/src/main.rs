use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use conceptwalk::analytics::{corpus_report, CorpusMap};
use conceptwalk::graph::{ingest_assertions, read_snapshot, write_snapshot, SNAPSHOT_MAGIC};
use conceptwalk::io::open_text;
use conceptwalk::mindmap::MapDocument;
use conceptwalk::session::{Decision, LogDocument, SessionConfig, SessionExport};
use conceptwalk::walker::{suggest_from_seed, DEFAULT_SUGGESTION_COUNT, DEFAULT_WALK_LENGTH};
use conceptwalk::{EmbeddingTable, KnowledgeGraph, MindMap, Regime, Session, SessionError, SuggestionLogEntry};
use rand::RngCore;
use walkdir::WalkDir;

#[derive(Parser)]
#[command(name = "conceptwalk", version, about = "Knowledge-graph concept suggestions for mind mapping")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum RegimeArg {
    Bfs,
    Dfs,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Bfs => Regime::Bfs,
            RegimeArg::Dfs => Regime::Dfs,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the graph from an assertion dump (plain or gzip) and save a snapshot.
    Ingest {
        #[arg(long)]
        dump: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print one suggestion batch as JSON.
    Suggest {
        /// Snapshot or assertion dump.
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        source: String,
        #[arg(long, value_enum, default_value = "dfs")]
        regime: RegimeArg,
        #[arg(long, default_value_t = DEFAULT_SUGGESTION_COUNT)]
        count: usize,
        #[arg(long, default_value_t = DEFAULT_WALK_LENGTH)]
        walk_length: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// Concepts that must not be suggested.
        #[arg(long, value_delimiter = ',')]
        exclude: Vec<String>,
    },
    /// Run a scripted session that accepts the first suggestion of every
    /// other batch and dismisses the rest, then write its export.
    Simulate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        root: String,
        #[arg(long, default_value_t = 4)]
        requests: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Stored in the map metadata, for `analyze --group-by condition`.
        #[arg(long)]
        condition: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score a corpus of maps and write a JSON or Markdown report.
    Analyze {
        /// Directory of map documents or session exports (searched recursively).
        #[arg(long)]
        maps: PathBuf,
        #[arg(long)]
        embeddings: PathBuf,
        /// Directory of log documents, matched to maps by session id.
        #[arg(long)]
        logs: Option<PathBuf>,
        /// Metadata field naming each map's group, or `dir` for the
        /// top-level subdirectory under `--maps`.
        #[arg(long)]
        group_by: Option<String>,
        /// `.md` selects Markdown, anything else JSON.
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
    },
}

fn load_graph(path: &Path) -> Result<KnowledgeGraph> {
    let mut head = [0u8; 4];
    let n = File::open(path)
        .and_then(|mut f| f.read(&mut head))
        .with_context(|| format!("reading {}", path.display()))?;
    if n == 4 && head == SNAPSHOT_MAGIC {
        let f = BufReader::new(File::open(path)?);
        return read_snapshot(f).with_context(|| format!("loading snapshot {}", path.display()));
    }
    let (g, report) = ingest_assertions(open_text(path)?).with_context(|| format!("ingesting {}", path.display()))?;
    if !report.skipped.is_empty() {
        eprintln!("warning: skipped {} malformed lines in {}", report.skipped.len(), path.display());
    }
    Ok(g)
}

fn ingest(dump: &Path, out: &Path) -> Result<()> {
    let (g, report) = ingest_assertions(open_text(dump).with_context(|| format!("opening {}", dump.display()))?)?;
    for skip in report.skipped.iter().take(20) {
        eprintln!("line {}: {}", skip.line, skip.error);
    }
    let mut w = BufWriter::new(File::create(out).with_context(|| format!("creating {}", out.display()))?);
    write_snapshot(&g, &mut w)?;
    w.flush()?;
    println!(
        "read {} lines: {} English edges, {} non-English, {} unusable labels, {} malformed",
        report.lines,
        report.edges,
        report.non_english,
        report.unusable_labels,
        report.skipped.len()
    );
    println!("kept {} concepts and {} edges in the largest component", g.node_count(), g.edge_count());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn suggest(
    graph: &Path,
    source: &str,
    regime: Regime,
    count: usize,
    walk_length: usize,
    seed: Option<u64>,
    exclude: &[String],
) -> Result<()> {
    let g = load_graph(graph)?;
    let id = g.contains(source).with_context(|| format!("{source:?} is not in the vocabulary"))?;
    let mut excluded = std::collections::HashSet::new();
    for e in exclude {
        excluded.insert(g.contains(e).with_context(|| format!("{e:?} is not in the vocabulary"))?);
    }
    let seed = seed.unwrap_or_else(|| rand::rng().next_u64());
    let batch = suggest_from_seed(&g, id, regime, &excluded, count, walk_length, seed)?;
    let labels: Vec<&str> = batch.suggestions.iter().map(|&c| g.label(c).unwrap_or_default()).collect();
    let out = serde_json::json!({
        "source": g.label(id),
        "regime": regime,
        "p": batch.params.p,
        "q": batch.params.q,
        "walk_length": walk_length,
        "seed": seed,
        "suggestions": labels,
    });
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(())
}

fn simulate(graph: &Path, root: &str, requests: usize, seed: u64, condition: Option<&str>, out: &Path) -> Result<()> {
    let g = load_graph(graph)?;
    let id = format!("sim-{seed}");
    let start = chrono::DateTime::from_timestamp(0, 0).expect("epoch is representable");
    let mut s = Session::create(&g, id, root, Some(seed), start, SessionConfig::default())?;
    let mut node = s.map().root();
    for i in 0..requests {
        let now = start + chrono::Duration::seconds(10 * (i as i64 + 1));
        match s.request_suggestions(&g, node, now) {
            Ok(offer) if i % 2 == 0 => {
                node = s.resolve_batch(&Decision::accept(&offer.suggestions[0]))?.expect("accept adds a node");
            }
            Ok(_) => {
                s.resolve_batch(&Decision::dismiss_all())?;
            }
            Err(SessionError::Exhausted(c)) => eprintln!("request {}: no suggestions for {c:?}", i + 1),
            Err(e) => return Err(e.into()),
        }
    }
    let mut export = s.export();
    if let Some(c) = condition {
        export.map.metadata.insert("condition".into(), c.into());
    }
    std::fs::write(out, export.to_json() + "\n").with_context(|| format!("writing {}", out.display()))?;
    println!(
        "{} nodes, {} requests, {} accepted",
        export.map.nodes.len(),
        export.log.entries.len(),
        export.log.entries.iter().filter(|e| e.accepted.is_some()).count()
    );
    Ok(())
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.with_context(|| format!("scanning {}", dir.display()))?;
        if entry.file_type().is_file() && entry.path().extension().is_some_and(|e| e == "json") {
            files.push(entry.into_path());
        }
    }
    Ok(files)
}

/// A map file is either a bare map document or a session export.
enum MapFile {
    Map(Box<MapDocument>),
    Export(Box<SessionExport>),
}

fn parse_map_file(text: &str) -> Result<MapFile, String> {
    let value: serde_json::Value = serde_json::from_str(text).map_err(|e| e.to_string())?;
    if value.get("map").is_some() && value.get("log").is_some() {
        serde_json::from_value(value).map(|e| MapFile::Export(Box::new(e))).map_err(|e| e.to_string())
    } else {
        serde_json::from_value(value).map(|m| MapFile::Map(Box::new(m))).map_err(|e| e.to_string())
    }
}

fn group_of(map: &MindMap, path: &Path, root: &Path, group_by: Option<&str>) -> Result<String, String> {
    match group_by {
        None => Ok("all".into()),
        Some("dir") => {
            let rel = path.strip_prefix(root).unwrap_or(path);
            let mut parts = rel.components();
            match (parts.next(), parts.next()) {
                (Some(dir), Some(_)) => Ok(dir.as_os_str().to_string_lossy().into_owned()),
                _ => Err("file is not inside a group subdirectory".into()),
            }
        }
        Some(field) => map
            .metadata()
            .get(field)
            .cloned()
            .ok_or_else(|| format!("metadata has no {field:?} field")),
    }
}

fn analyze(maps: &Path, embeddings: &Path, logs: Option<&Path>, group_by: Option<&str>, out: &Path) -> Result<()> {
    let mut problems = Vec::new();
    let mut corpus = Vec::new();
    for path in json_files(maps)? {
        let parsed = std::fs::read_to_string(&path)
            .map_err(|e| e.to_string())
            .and_then(|t| parse_map_file(&t));
        let (doc, log) = match parsed {
            Ok(MapFile::Map(doc)) => (*doc, Vec::new()),
            Ok(MapFile::Export(e)) => (e.map, e.log.entries),
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        let map = match MindMap::from_document(doc) {
            Ok(m) => m,
            Err(e) => {
                problems.push(format!("{}: {e}", path.display()));
                continue;
            }
        };
        match group_of(&map, &path, maps, group_by) {
            Ok(group) => corpus.push(CorpusMap { group, map, log }),
            Err(e) => problems.push(format!("{}: {e}", path.display())),
        }
    }

    if let Some(dir) = logs {
        let mut by_session: HashMap<String, Vec<SuggestionLogEntry>> = HashMap::new();
        for path in json_files(dir)? {
            let parsed: Result<LogDocument, String> = std::fs::read_to_string(&path)
                .map_err(|e| e.to_string())
                .and_then(|t| serde_json::from_str(&t).map_err(|e| e.to_string()));
            match parsed {
                Ok(log) => {
                    if by_session.insert(log.session_id.clone(), log.entries).is_some() {
                        problems.push(format!("{}: duplicate log for session {:?}", path.display(), log.session_id));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", path.display())),
            }
        }
        for c in &mut corpus {
            if let Some(entries) = by_session.remove(c.map.map_id()) {
                if !c.log.is_empty() {
                    problems.push(format!("map {:?} has both an embedded and a separate log", c.map.map_id()));
                }
                c.log = entries;
            }
        }
        let mut orphans: Vec<_> = by_session.into_keys().collect();
        orphans.sort();
        for id in orphans {
            eprintln!("warning: log for session {id:?} matches no map");
        }
    }

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for c in &corpus {
        *seen.entry(c.map.map_id()).or_default() += 1;
    }
    for (id, n) in seen.iter().filter(|(_, &n)| n > 1) {
        problems.push(format!("map id {id:?} appears {n} times"));
    }
    if corpus.is_empty() && problems.is_empty() {
        problems.push(format!("no map documents under {}", maps.display()));
    }
    let table = match open_text(embeddings)
        .map_err(anyhow::Error::from)
        .and_then(|r| EmbeddingTable::load(r).map_err(anyhow::Error::from))
    {
        Ok((t, _)) => Some(t),
        Err(e) => {
            problems.push(format!("{}: {e:#}", embeddings.display()));
            None
        }
    };
    if !problems.is_empty() {
        for p in &problems {
            eprintln!("  {p}");
        }
        bail!("{} input problem(s); no report written", problems.len());
    }
    let table = table.expect("checked above");

    let report = corpus_report(&corpus, &table);
    let body = if out.extension().is_some_and(|e| e == "md") {
        report.to_markdown()
    } else {
        report.to_json() + "\n"
    };
    std::fs::write(out, body).with_context(|| format!("writing {}", out.display()))?;
    eprintln!(
        "{} maps in {} group(s), {} concepts without vectors; report written to {}",
        report.totals.maps,
        report.groups.len(),
        report.totals.discarded_concepts,
        out.display()
    );
    Ok(())
}

async fn serve(graph: &Path, addr: SocketAddr) -> Result<()> {
    let g = Arc::new(load_graph(graph)?);
    eprintln!("loaded {} concepts; listening on http://{addr}", g.node_count());
    let listener = tokio::net::TcpListener::bind(addr).await.with_context(|| format!("binding {addr}"))?;
    conceptwalk_server::serve(listener, conceptwalk_server::AppState::new(g)).await?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Ingest { dump, out } => ingest(&dump, &out),
        Command::Suggest {
            graph,
            source,
            regime,
            count,
            walk_length,
            seed,
            exclude,
        } => suggest(&graph, &source, regime.into(), count, walk_length, seed, &exclude),
        Command::Simulate {
            graph,
            root,
            requests,
            seed,
            condition,
            out,
        } => simulate(&graph, &root, requests, seed, condition.as_deref(), &out),
        Command::Analyze {
            maps,
            embeddings,
            logs,
            group_by,
            out,
        } => analyze(&maps, &embeddings, logs.as_deref(), group_by.as_deref(), &out),
        Command::Serve { graph, addr } => tokio::runtime::Runtime::new()?.block_on(serve(&graph, addr)),
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
