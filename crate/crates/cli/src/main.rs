use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use tunegraph::community::{self, CommunityError};
use tunegraph::compare::{self, CompareError};
use tunegraph::graph::{GraphFile, NodeId};
use tunegraph::hierarchy::{self, DendrogramFile, HierarchyError};
use tunegraph::ingest::{self, Cohort, IngestError, ParseMode};
use tunegraph::io::{Document, Method, PartitionFile, ScoresFile};
use tunegraph::numerics::NumericsError;
use tunegraph::synth::{self, SyntheticSpec};
use tunegraph::{
    classify_strength, export, Dendrogram, Graph, Linkage, Partition, PipelineConfig,
};

const USAGE: u8 = 1;
const DATA: u8 = 2;
const NUMERICAL: u8 = 3;

/// Diagnostics printed for lenient ingest before summarizing the rest.
const SHOWN_LINE_ERRORS: usize = 10;

#[derive(Parser)]
#[command(name = "tunegraph", version, about = "Parameter co-occurrence graphs from operator logs")]
struct Cli {
    /// Pipeline configuration (JSON); command flags override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Abort ingest at the first malformed line.
    #[arg(long, global = true)]
    strict: bool,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Generator seed (synth only).
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build one cohort's co-occurrence graph from JSONL records.
    Ingest {
        input: PathBuf,
        #[arg(long)]
        cohort: Cohort,
    },
    /// Partition a graph into communities.
    Communities {
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "louvain")]
        method: MethodArg,
        /// Cluster count for the spectral method.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        resolution: Option<f64>,
    },
    /// Spectral embedding followed by agglomerative clustering.
    Cluster {
        graph: PathBuf,
        /// Embedding dimension.
        #[arg(long)]
        dim: Option<usize>,
        #[arg(long)]
        linkage: Option<Linkage>,
        /// Also write the tree in Newick format.
        #[arg(long)]
        newick: Option<PathBuf>,
    },
    /// Weighted PageRank scores.
    Pagerank {
        graph: PathBuf,
        #[arg(long)]
        damping: Option<f64>,
    },
    /// Render a graph with optional communities and scores.
    Export {
        graph: PathBuf,
        #[arg(long)]
        partition: Option<PathBuf>,
        #[arg(long)]
        scores: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "dot")]
        format: Format,
    },
    /// Compare cohorts: graph files get the full per-cohort report,
    /// partition or dendrogram files are compared pairwise.
    Compare {
        #[arg(required = true, num_args = 2..)]
        files: Vec<PathBuf>,
        /// Cut dendrograms into this many clusters before comparing.
        #[arg(long)]
        k: Option<usize>,
    },
    /// Size of the ordering and partition search spaces over n parameters.
    Stats { n: usize },
    /// Generate synthetic records from a block specification.
    Synth { spec: PathBuf },
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Louvain,
    Spectral,
    Exact,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Dot,
    Json,
}

struct Failure {
    code: u8,
    message: String,
}

type Outcome<T> = Result<T, Failure>;

fn data(message: impl Display) -> Failure {
    Failure {
        code: DATA,
        message: message.to_string(),
    }
}

fn usage(message: impl Display) -> Failure {
    Failure {
        code: USAGE,
        message: message.to_string(),
    }
}

fn numeric_code(e: &NumericsError) -> u8 {
    match e {
        NumericsError::EigenNotConverged { .. } | NumericsError::NotConverged { .. } => NUMERICAL,
        _ => DATA,
    }
}

impl From<CommunityError> for Failure {
    fn from(e: CommunityError) -> Self {
        let code = match &e {
            CommunityError::Numerics(n) => numeric_code(n),
            _ => DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<HierarchyError> for Failure {
    fn from(e: HierarchyError) -> Self {
        let code = match &e {
            HierarchyError::Numerics(n) => numeric_code(n),
            _ => DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<tunegraph::centrality::CentralityError> for Failure {
    fn from(e: tunegraph::centrality::CentralityError) -> Self {
        use tunegraph::centrality::CentralityError;
        let code = match &e {
            CentralityError::Numerics(n) => numeric_code(n),
            CentralityError::Damping(_) => USAGE,
            CentralityError::Empty => DATA,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

impl From<IngestError> for Failure {
    fn from(e: IngestError) -> Self {
        data(e)
    }
}

impl From<CompareError> for Failure {
    fn from(e: CompareError) -> Self {
        data(e)
    }
}

fn read(path: &Path) -> Outcome<String> {
    fs::read_to_string(path).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn read_document<T: Serialize + serde::de::DeserializeOwned>(path: &Path) -> Outcome<Document<T>> {
    Document::from_json(&read(path)?).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn read_graph(path: &Path) -> Outcome<Graph> {
    let doc: Document<GraphFile> = read_document(path)?;
    Graph::from_file(&doc.body).map_err(|e| data(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, text: &str) -> Outcome<()> {
    match out {
        Some(path) => {
            fs::write(path, text).map_err(|e| data(format!("{}: {e}", path.display())))
        }
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn warn(message: impl Display) {
    eprintln!("warning: {message}");
}

fn load_config(path: Option<&Path>) -> Outcome<PipelineConfig> {
    match path {
        None => Ok(PipelineConfig::default()),
        Some(p) => PipelineConfig::from_json(&read(p)?)
            .map_err(|e| usage(format!("{}: {e}", p.display()))),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: Cli) -> Outcome<()> {
    if cli.seed.is_some() && !matches!(cli.command, Command::Synth { .. }) {
        return Err(usage("--seed only applies to synth"));
    }
    let mut config = load_config(cli.config.as_deref())?;
    let out = cli.out.as_deref();
    match cli.command {
        Command::Ingest { input, cohort } => cmd_ingest(&input, cohort, cli.strict, &config, out),
        Command::Communities {
            graph,
            method,
            k,
            resolution,
        } => {
            if let Some(r) = resolution {
                config.resolution = r;
            }
            if k.is_some() {
                config.spectral_k = k;
            }
            cmd_communities(&graph, method, &config, out)
        }
        Command::Cluster {
            graph,
            dim,
            linkage,
            newick,
        } => {
            if let Some(d) = dim {
                config.embedding_dim = d;
            }
            if let Some(l) = linkage {
                config.linkage = l;
            }
            cmd_cluster(&graph, &config, out, newick.as_deref())
        }
        Command::Pagerank { graph, damping } => {
            if let Some(d) = damping {
                config.pagerank.damping = d;
            }
            cmd_pagerank(&graph, &config, out)
        }
        Command::Export {
            graph,
            partition,
            scores,
            format,
        } => cmd_export(&graph, partition.as_deref(), scores.as_deref(), format, &config, out),
        Command::Compare { files, k } => cmd_compare(&files, k, &config, out),
        Command::Stats { n } => cmd_stats(n, out),
        Command::Synth { spec } => {
            let seed = cli.seed.ok_or_else(|| usage("synth requires --seed"))?;
            cmd_synth(&spec, seed, out)
        }
    }
}

fn cmd_ingest(
    input: &Path,
    cohort: Cohort,
    strict: bool,
    config: &PipelineConfig,
    out: Option<&Path>,
) -> Outcome<()> {
    config.ingest.validate()?;
    let text = read(input)?;
    let mode = if strict {
        ParseMode::Strict
    } else {
        ParseMode::Lenient
    };
    let parsed = ingest::parse_records(text.lines(), config.ingest.universe_size, mode)?;
    for e in parsed.errors.iter().take(SHOWN_LINE_ERRORS) {
        warn(format!("line {}: {}", e.line, e.message));
    }
    if parsed.errors.len() > SHOWN_LINE_ERRORS {
        warn(format!(
            "{} more malformed lines not shown",
            parsed.errors.len() - SHOWN_LINE_ERRORS
        ));
    }
    if parsed.records.is_empty() {
        warn(format!("{} contains no records; the graph is edgeless", input.display()));
    }
    let g = ingest::build_cohort_graph(&parsed.records, cohort, &config.ingest)?;
    let selected = parsed.records.iter().filter(|r| r.cohort == cohort).count();
    emit(out, &Document::new(g.to_file(), config).to_json())?;
    eprintln!(
        "{} records, skipped: {} ({} {}, {} edges)",
        parsed.records.len(),
        parsed.errors.len(),
        selected,
        cohort.as_str(),
        g.edge_count()
    );
    Ok(())
}

fn cmd_communities(
    path: &Path,
    method: MethodArg,
    config: &PipelineConfig,
    out: Option<&Path>,
) -> Outcome<()> {
    let g = read_graph(path)?;
    let mut params = BTreeMap::new();
    let (partition, method) = match method {
        MethodArg::Louvain => {
            let result = community::louvain(&g, config.resolution)?;
            params.insert("resolution".into(), json!(config.resolution));
            params.insert("levels".into(), json!(result.levels.len()));
            (result.partition, Method::Louvain)
        }
        MethodArg::Spectral => {
            let k = match config.spectral_k {
                Some(k) => k,
                None => community::louvain(&g, config.resolution)?
                    .partition
                    .community_count(),
            };
            let gaps = community::eigengaps(&g, (k + 2).min(g.node_count()))?;
            eprintln!("eigengaps:");
            for (i, gap) in gaps.iter().enumerate() {
                let mark = if i + 1 == k { "  <- k" } else { "" };
                eprintln!("  λ{}-λ{} = {gap:.6}{mark}", i + 1, i);
            }
            params.insert("k".into(), json!(k));
            params.insert("eigengaps".into(), json!(gaps));
            (community::spectral_communities(&g, k)?, Method::Spectral)
        }
        MethodArg::Exact => {
            let result = community::brute_force_best_partition(&g, config.exact_max_n)?;
            params.insert("evaluated".into(), json!(result.evaluated));
            (result.partition, Method::Exact)
        }
    };
    let q = community::modularity(&g, &partition)?;
    let strength = classify_strength(q.value())?;
    let file = PartitionFile::new(&partition, q, method, params);
    emit(out, &Document::new(file, config).to_json())?;
    eprintln!(
        "{} communities, Q={:.3} ({strength})",
        partition.community_count(),
        q.value()
    );
    Ok(())
}

fn cmd_cluster(
    path: &Path,
    config: &PipelineConfig,
    out: Option<&Path>,
    newick: Option<&Path>,
) -> Outcome<()> {
    let g = read_graph(path)?;
    let tree = if g.node_count() == 1 {
        warn("single-node graph: the dendrogram has one leaf and no merges");
        Dendrogram::from_merges(1, Vec::new())?
    } else {
        let embedding = hierarchy::spectral_embedding(&g, config.embedding_dim)?;
        let tree = hierarchy::agglomerative(&hierarchy::pairwise_distances(&embedding), config.linkage)?;
        if config.normalize_heights {
            tree.normalized()
        } else {
            tree
        }
    };
    emit(out, &Document::new(tree.to_file(g.labels()), config).to_json())?;
    if let Some(p) = newick {
        let mut text = tree.to_newick(g.labels());
        text.push('\n');
        fs::write(p, text).map_err(|e| data(format!("{}: {e}", p.display())))?;
    }
    if tree.leaf_count() >= 2 {
        let stats = hierarchy::height_stats(&tree)?;
        eprintln!(
            "{} leaves, {} linkage, d={}, max height {:.4}, mean height {:.4}",
            tree.leaf_count(),
            config.linkage.name(),
            config.embedding_dim,
            stats.max,
            stats.mean
        );
    }
    Ok(())
}

fn cmd_pagerank(path: &Path, config: &PipelineConfig, out: Option<&Path>) -> Outcome<()> {
    let g = read_graph(path)?;
    let scores = tunegraph::pagerank(&g, config.pagerank)?;
    emit(out, &Document::new(ScoresFile::from(&scores), config).to_json())?;
    for id in scores.ranking().into_iter().take(config.top_k) {
        eprintln!("{:>10.6}  {}", scores.scores[id], g.labels()[id]);
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct ExportNode {
    #[serde(flatten)]
    node: NodeId,
    community: Option<usize>,
    score: Option<f64>,
    width: f64,
}

#[derive(Serialize, Deserialize)]
struct ExportFile {
    nodes: Vec<ExportNode>,
    edges: Vec<tunegraph::graph::Edge>,
}

fn cmd_export(
    path: &Path,
    partition: Option<&Path>,
    scores: Option<&Path>,
    format: Format,
    config: &PipelineConfig,
    out: Option<&Path>,
) -> Outcome<()> {
    let g = read_graph(path)?;
    let n = g.node_count();
    let partition = match partition {
        None => None,
        Some(p) => {
            let doc: Document<PartitionFile> = read_document(p)?;
            let part = doc.body.partition()?;
            if part.len() != n {
                return Err(data(format!(
                    "{}: partition covers {} nodes, graph has {n}",
                    p.display(),
                    part.len()
                )));
            }
            Some(part)
        }
    };
    let scores = match scores {
        None => {
            warn("no scores file: node widths are uniform");
            None
        }
        Some(p) => {
            let doc: Document<ScoresFile> = read_document(p)?;
            let dense = doc
                .body
                .dense()
                .filter(|s| s.len() == n)
                .ok_or_else(|| data(format!("{}: scores do not cover nodes 0..{n}", p.display())))?;
            Some(dense)
        }
    };
    let text = match format {
        Format::Dot => export::to_dot(&g, partition.as_ref(), scores.as_deref()),
        Format::Json => {
            let widths = match &scores {
                Some(s) => export::node_widths(s),
                None => vec![export::UNIFORM_WIDTH; n],
            };
            let nodes = g
                .nodes()
                .into_iter()
                .map(|node| {
                    let i = node.id;
                    ExportNode {
                        node,
                        community: partition.as_ref().map(|p| p.community_of(i)),
                        score: scores.as_ref().map(|s| s[i]),
                        width: widths[i],
                    }
                })
                .collect();
            let body = ExportFile {
                nodes,
                edges: g.edges(),
            };
            Document::new(body, config).to_json()
        }
    };
    emit(out, &text)
}

fn cohort_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

enum Input {
    Graph(Graph),
    Partition(Partition),
    Dendrogram(Dendrogram),
}

fn classify_input(path: &Path) -> Outcome<Input> {
    let text = read(path)?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| data(format!("{}: {e}", path.display())))?;
    let bad = |e: &dyn Display| data(format!("{}: {e}", path.display()));
    if value.get("communities").is_some() {
        let doc: Document<PartitionFile> = Document::from_json(&text).map_err(|e| bad(&e))?;
        Ok(Input::Partition(doc.body.partition()?))
    } else if value.get("merges").is_some() {
        let doc: Document<DendrogramFile> = Document::from_json(&text).map_err(|e| bad(&e))?;
        Ok(Input::Dendrogram(Dendrogram::from_file(&doc.body)?))
    } else if value.get("edges").is_some() {
        let doc: Document<GraphFile> = Document::from_json(&text).map_err(|e| bad(&e))?;
        Ok(Input::Graph(Graph::from_file(&doc.body).map_err(|e| bad(&e))?))
    } else {
        Err(data(format!(
            "{}: not a graph, partition or dendrogram file",
            path.display()
        )))
    }
}

#[derive(Serialize, Deserialize)]
struct TreeSummary {
    leaves: usize,
    heights: Option<hierarchy::HeightStats>,
}

#[derive(Serialize, Deserialize)]
struct PartitionReport {
    nmi_normalization: String,
    partitions: BTreeMap<String, Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    dendrograms: BTreeMap<String, TreeSummary>,
    pairwise: Vec<compare::PairwiseSimilarity>,
}

fn cmd_compare(
    files: &[PathBuf],
    k: Option<usize>,
    config: &PipelineConfig,
    out: Option<&Path>,
) -> Outcome<()> {
    let mut names = BTreeMap::new();
    for f in files {
        if names.insert(cohort_name(f), f).is_some() {
            return Err(usage(format!("duplicate cohort name {:?}", cohort_name(f))));
        }
    }
    let mut graphs = BTreeMap::new();
    let mut partitions = BTreeMap::new();
    let mut trees = BTreeMap::new();
    for (name, path) in &names {
        match classify_input(path)? {
            Input::Graph(g) => {
                graphs.insert(name.clone(), g);
            }
            Input::Partition(p) => {
                partitions.insert(name.clone(), p);
            }
            Input::Dendrogram(d) => {
                trees.insert(name.clone(), d);
            }
        }
    }
    if !graphs.is_empty() {
        if graphs.len() != names.len() {
            return Err(usage("graph files cannot be mixed with partition or dendrogram files"));
        }
        let report = compare::cohort_report(&graphs, config)?;
        for (name, outcome) in &report.cohorts {
            match outcome {
                compare::CohortOutcome::Ok(s) => eprintln!(
                    "{name}: {} communities, Q={:.3} ({}), max height {:.4}",
                    s.community_count, s.modularity, s.strength, s.heights.max
                ),
                compare::CohortOutcome::Failed { error } => eprintln!("{name}: failed: {error}"),
            }
        }
        let mut text = report.to_json();
        text.push('\n');
        return emit(out, &text);
    }

    let mut dendrograms = BTreeMap::new();
    for (name, tree) in &trees {
        let heights = hierarchy::height_stats(tree).ok();
        dendrograms.insert(
            name.clone(),
            TreeSummary {
                leaves: tree.leaf_count(),
                heights,
            },
        );
        match k {
            Some(k) => {
                partitions.insert(name.clone(), hierarchy::cut(tree, k)?);
            }
            None if partitions.is_empty() && trees.len() == names.len() => {}
            None => {
                return Err(usage("comparing dendrograms with partitions needs --k"));
            }
        }
    }
    let mut pairwise = Vec::new();
    let keys: Vec<&String> = partitions.keys().collect();
    for (i, a) in keys.iter().enumerate() {
        for b in &keys[i + 1..] {
            let (pa, pb) = (&partitions[*a], &partitions[*b]);
            let (nmi, ari, note) = match (compare::nmi(pa, pb), compare::ari(pa, pb)) {
                (Ok(x), Ok(y)) => (Some(x), Some(y), None),
                (Ok(x), Err(e)) => (Some(x), None, Some(e.to_string())),
                (Err(e), _) => return Err(e.into()),
            };
            eprintln!(
                "{a} vs {b}: NMI={} ARI={}",
                nmi.map_or("n/a".into(), |x| format!("{x:.4}")),
                ari.map_or("n/a".into(), |x| format!("{x:.4}"))
            );
            pairwise.push(compare::PairwiseSimilarity {
                a: (*a).clone(),
                b: (*b).clone(),
                nmi,
                ari,
                note,
            });
        }
    }
    for (name, t) in &dendrograms {
        if let Some(h) = &t.heights {
            eprintln!("{name}: max height {:.4}, mean height {:.4}", h.max, h.mean);
        }
    }
    let body = PartitionReport {
        nmi_normalization: "arithmetic".into(),
        partitions: partitions
            .iter()
            .map(|(n, p)| (n.clone(), p.communities()))
            .collect(),
        dendrograms,
        pairwise,
    };
    emit(out, &Document::new(body, config).to_json())
}

#[derive(Serialize)]
struct StatsFile {
    n: usize,
    sequences: String,
    partitions: String,
    sequences_scientific: String,
    partitions_scientific: String,
}

fn cmd_stats(n: usize, out: Option<&Path>) -> Outcome<()> {
    let stats = compare::search_space_stats(n)?;
    let file = StatsFile {
        n,
        sequences: stats.sequences.to_string(),
        partitions: stats.partitions.to_string(),
        sequences_scientific: compare::to_scientific(&stats.sequences, 3),
        partitions_scientific: compare::to_scientific(&stats.partitions, 3),
    };
    let summary = format!(
        "n = {n}\norderings (n!):   {} ≈ {}\npartitions B(n): {} ≈ {}\n",
        file.sequences, file.sequences_scientific, file.partitions, file.partitions_scientific
    );
    match out {
        Some(_) => {
            let mut text = serde_json::to_string_pretty(&json!({
                "schema_version": tunegraph::config::SCHEMA_VERSION,
                "stats": file,
            }))
            .expect("stats serialize");
            text.push('\n');
            emit(out, &text)?;
            eprint!("{summary}");
            Ok(())
        }
        None => emit(None, &summary),
    }
}

fn cmd_synth(path: &Path, seed: u64, out: Option<&Path>) -> Outcome<()> {
    let spec: SyntheticSpec = serde_json::from_str(&read(path)?)
        .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    let text = synth::generate_jsonl(&spec, seed).map_err(usage)?;
    emit(out, &text)?;
    eprintln!(
        "{} {} records over {} parameters, seed {seed}",
        spec.records,
        spec.cohort.as_str(),
        spec.n
    );
    Ok(())
}
