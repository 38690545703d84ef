use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;
use tunegraph::io::Document;
use tunegraph::{Graph, PipelineConfig};

fn tunegraph(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tunegraph"))
        .current_dir(dir)
        .args(args)
        .output()
        .unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json(dir: &Path, name: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(name)).unwrap()).unwrap()
}

fn write_graph(dir: &Path, name: &str, g: &Graph) {
    let doc = Document::new(g.to_file(), &PipelineConfig::default());
    fs::write(dir.join(name), doc.to_json()).unwrap();
}

fn two_triangles() -> Graph {
    Graph::anonymous(
        6,
        &[(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0), (3, 4, 1.0), (4, 5, 1.0), (3, 5, 1.0)],
    )
    .unwrap()
}

const RECORDS: &str = r#"{"ts":"2021-03-01T10:00:00Z","cohort":"novice","params":[0,1,2]}
{"ts":"2021-03-01T10:05:00Z","cohort":"novice","params":[1,2]}
{"ts":"2021-03-01T10:09:00+01:00","cohort":"novice","params":[3,4],"session":"s1"}
"#;

#[test]
fn ingest_valid_records() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("log.jsonl"), RECORDS).unwrap();
    let out = tunegraph(dir.path(), &["ingest", "log.jsonl", "--cohort", "novice", "--out", "g.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(stderr(&out).contains("3 records, skipped: 0"), "{}", stderr(&out));
    let g = json(dir.path(), "g.json");
    assert_eq!(g["schema_version"], 1);
    assert!(g["config"].is_object());
    assert_eq!(g["nodes"].as_array().unwrap().len(), 27);
    let edges = g["edges"].as_array().unwrap();
    assert_eq!(edges.len(), 4);
    assert!(edges.contains(&serde_json::json!({"u": 1, "v": 2, "w": 2.0})));
}

#[test]
fn ingest_lenient_skips_malformed_line() {
    let dir = TempDir::new().unwrap();
    let text = format!("{RECORDS}{{\"ts\": broken\n");
    fs::write(dir.path().join("log.jsonl"), text).unwrap();
    let out = tunegraph(dir.path(), &["ingest", "log.jsonl", "--cohort", "novice", "--out", "g.json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("line 4"));
    assert!(stderr(&out).contains("skipped: 1"));
    assert!(dir.path().join("g.json").exists());

    let strict = tunegraph(
        dir.path(),
        &["ingest", "log.jsonl", "--cohort", "novice", "--strict", "--out", "s.json"],
    );
    assert_eq!(strict.status.code(), Some(2));
    assert!(stderr(&strict).contains("line 4"));
    assert!(!dir.path().join("s.json").exists());
}

#[test]
fn ingest_empty_file_warns() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let out = tunegraph(dir.path(), &["ingest", "empty.jsonl", "--cohort", "expert", "--out", "g.json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    assert_eq!(json(dir.path(), "g.json")["edges"], serde_json::json!([]));
}

#[test]
fn communities_on_two_triangles() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "g.json", &two_triangles());
    let out = tunegraph(dir.path(), &["communities", "g.json", "--out", "louvain.json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("Q=0.500 (Strong)"), "{}", stderr(&out));
    let louvain = json(dir.path(), "louvain.json");
    assert_eq!(louvain["communities"], serde_json::json!([[0, 1, 2], [3, 4, 5]]));
    assert_eq!(louvain["method"], "louvain");

    let out = tunegraph(dir.path(), &["communities", "g.json", "--method", "exact", "--out", "exact.json"]);
    assert!(out.status.success());
    let exact = json(dir.path(), "exact.json");
    assert_eq!(exact["communities"], louvain["communities"]);
    assert_eq!(exact["q"], louvain["q"]);
    assert_eq!(exact["params"]["evaluated"], 203);

    let out = tunegraph(dir.path(), &["communities", "g.json", "--method", "spectral", "--out", "sp.json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("eigengaps"));
    assert_eq!(json(dir.path(), "sp.json")["communities"], louvain["communities"]);
}

#[test]
fn communities_error_exits() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "empty.json", &Graph::anonymous(4, &[]).unwrap());
    let out = tunegraph(dir.path(), &["communities", "empty.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("modularity undefined"));

    let big: Vec<_> = (0..12).map(|i| (i, i + 1, 1.0)).collect();
    write_graph(dir.path(), "big.json", &Graph::anonymous(13, &big).unwrap());
    let out = tunegraph(dir.path(), &["communities", "big.json", "--method", "exact"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("refused"));
}

#[test]
fn cluster_two_triangles() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "g.json", &two_triangles());
    let args = ["cluster", "g.json", "--dim", "1", "--linkage", "average", "--out", "t.json", "--newick", "t.nwk"];
    assert!(tunegraph(dir.path(), &args).status.success());
    let file: Document<tunegraph::hierarchy::DendrogramFile> =
        Document::from_json(&fs::read_to_string(dir.path().join("t.json")).unwrap()).unwrap();
    assert_eq!(file.config.unwrap().embedding_dim, 1);
    let tree = tunegraph::Dendrogram::from_file(&file.body).unwrap();
    let cut = tunegraph::cut(&tree, 2).unwrap();
    assert_eq!(cut.communities(), vec![vec![0, 1, 2], vec![3, 4, 5]]);
    let newick = fs::read_to_string(dir.path().join("t.nwk")).unwrap();
    assert!(newick.trim_end().ends_with(';'));
}

#[test]
fn cluster_single_node_warns() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "one.json", &Graph::anonymous(1, &[]).unwrap());
    let out = tunegraph(dir.path(), &["cluster", "one.json", "--out", "t.json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("warning"));
    assert_eq!(json(dir.path(), "t.json")["merges"], serde_json::json!([]));
}

#[test]
fn export_dot_colors_and_widths() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "g.json", &two_triangles());
    assert!(tunegraph(dir.path(), &["communities", "g.json", "--out", "p.json"]).status.success());
    assert!(tunegraph(dir.path(), &["pagerank", "g.json", "--out", "s.json"]).status.success());
    let scores = json(dir.path(), "s.json");
    assert_eq!(scores["damping"], 0.85);
    assert_eq!(scores["scores"].as_array().unwrap().len(), 6);

    let out = tunegraph(dir.path(), &["export", "g.json", "--partition", "p.json", "--scores", "s.json"]);
    assert!(out.status.success());
    let dot = String::from_utf8(out.stdout).unwrap();
    let colors: std::collections::BTreeSet<&str> = dot
        .lines()
        .filter_map(|l| l.split("fillcolor=").nth(1))
        .map(|r| r.split(',').next().unwrap())
        .collect();
    assert_eq!(colors.len(), 2);
    assert!(dot.starts_with("graph cooccurrence {"));

    let out = tunegraph(dir.path(), &["export", "g.json", "--partition", "p.json"]);
    assert!(out.status.success());
    assert!(stderr(&out).contains("uniform"));
    assert_eq!(String::from_utf8(out.stdout).unwrap().matches("width=0.6000").count(), 6);
}

#[test]
fn export_quotes_reserved_labels() {
    let dir = TempDir::new().unwrap();
    let g = Graph::new(["a\"b", "x -- y", "{z}"], &[(0, 1, 1.0), (1, 2, 2.0)]).unwrap();
    write_graph(dir.path(), "g.json", &g);
    let out = tunegraph(dir.path(), &["export", "g.json"]);
    let dot = String::from_utf8(out.stdout).unwrap();
    assert!(dot.contains(r#""a\"b" -- "x -- y" [weight=1];"#), "{dot}");
    assert!(dot.contains(r#""x -- y" -- "{z}" [weight=2];"#));
}

#[test]
fn export_json_format() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "g.json", &two_triangles());
    assert!(tunegraph(dir.path(), &["communities", "g.json", "--out", "p.json"]).status.success());
    let out = tunegraph(dir.path(), &["export", "g.json", "--partition", "p.json", "--format", "json", "--out", "e.json"]);
    assert!(out.status.success());
    let e = json(dir.path(), "e.json");
    assert_eq!(e["nodes"][4]["community"], 1);
    assert_eq!(e["nodes"][4]["label"], "Parameter 4");
    assert_eq!(e["edges"].as_array().unwrap().len(), 6);
}

#[test]
fn synth_is_seeded() {
    let dir = TempDir::new().unwrap();
    let spec = r#"{"n":6,"blocks":[[0,1,2],[3,4,5]],"within_weight":10,"cross_weight":1,
        "records":300,"record_size":{"min":2,"max":3},"cohort":"novice"}"#;
    fs::write(dir.path().join("spec.json"), spec).unwrap();
    for (seed, name) in [("4", "a.jsonl"), ("4", "b.jsonl"), ("5", "c.jsonl")] {
        let out = tunegraph(dir.path(), &["synth", "spec.json", "--seed", seed, "--out", name]);
        assert!(out.status.success(), "{}", stderr(&out));
    }
    let read = |n: &str| fs::read(dir.path().join(n)).unwrap();
    assert_eq!(read("a.jsonl"), read("b.jsonl"));
    assert_ne!(read("a.jsonl"), read("c.jsonl"));
    assert_eq!(String::from_utf8(read("a.jsonl")).unwrap().lines().count(), 300);

    let missing = tunegraph(dir.path(), &["synth", "spec.json"]);
    assert_eq!(missing.status.code(), Some(1));
}

#[test]
fn synth_null_model_has_no_structure() {
    let dir = TempDir::new().unwrap();
    let spec = serde_json::json!({
        "n": 27,
        "blocks": [(0..9).collect::<Vec<_>>(), (9..18).collect::<Vec<_>>(), (18..27).collect::<Vec<_>>()],
        "within_weight": 1.0,
        "cross_weight": 1.0,
        "records": 10000,
        "record_size": {"min": 2, "max": 4},
        "cohort": "novice"
    });
    fs::write(dir.path().join("spec.json"), spec.to_string()).unwrap();
    let steps: [&[&str]; 3] = [
        &["synth", "spec.json", "--seed", "9", "--out", "r.jsonl"],
        &["ingest", "r.jsonl", "--cohort", "novice", "--out", "g.json"],
        &["communities", "g.json", "--out", "p.json"],
    ];
    for args in steps {
        assert!(tunegraph(dir.path(), args).status.success());
    }
    let q = json(dir.path(), "p.json")["q"].as_f64().unwrap();
    assert!(q < 0.15, "{q}");
}

#[test]
fn compare_partitions_and_graphs() {
    let dir = TempDir::new().unwrap();
    let a = r#"{"communities":[[0,1],[2,3]],"q":0.1,"method":"louvain"}"#;
    let b = r#"{"communities":[[0,2],[1,3]],"q":0.1,"method":"louvain"}"#;
    fs::write(dir.path().join("a.json"), a).unwrap();
    fs::write(dir.path().join("b.json"), b).unwrap();
    let out = tunegraph(dir.path(), &["compare", "a.json", "b.json", "--out", "c.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let c = json(dir.path(), "c.json");
    assert!(c["pairwise"][0]["nmi"].as_f64().unwrap().abs() < 1e-12);
    assert!((c["pairwise"][0]["ari"].as_f64().unwrap() + 0.5).abs() < 1e-12);
    assert_eq!(c["schema_version"], 1);

    write_graph(dir.path(), "novice.json", &two_triangles());
    write_graph(dir.path(), "expert.json", &two_triangles());
    let out = tunegraph(dir.path(), &["compare", "novice.json", "expert.json", "--out", "r.json"]);
    assert!(out.status.success(), "{}", stderr(&out));
    let r = json(dir.path(), "r.json");
    assert_eq!(r["pairwise"][0]["nmi"], 1.0);
    assert_eq!(r["cohorts"]["expert"]["status"], "ok");

    let mixed = tunegraph(dir.path(), &["compare", "a.json", "expert.json"]);
    assert_eq!(mixed.status.code(), Some(1));
}

#[test]
fn stats_prints_exact_counts() {
    let dir = TempDir::new().unwrap();
    let out = tunegraph(dir.path(), &["stats", "27"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("10888869450418352160768000000"));
    assert!(text.contains("545717047936059989389"));
    assert_eq!(tunegraph(dir.path(), &["stats", "65"]).status.code(), Some(2));
}

#[test]
fn usage_errors_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(tunegraph(dir.path(), &["frobnicate"]).status.code(), Some(1));
    assert_eq!(tunegraph(dir.path(), &["stats", "3", "--seed", "1"]).status.code(), Some(1));
    assert_eq!(tunegraph(dir.path(), &["--help"]).status.code(), Some(0));
    assert_eq!(tunegraph(dir.path(), &["pagerank", "missing.json"]).status.code(), Some(2));
}

#[test]
fn config_file_overrides_defaults() {
    let dir = TempDir::new().unwrap();
    write_graph(dir.path(), "g.json", &two_triangles());
    fs::write(dir.path().join("cfg.json"), r#"{"pagerank":{"damping":0.5,"tolerance":1e-12,"max_iter":500}}"#).unwrap();
    let out = tunegraph(dir.path(), &["pagerank", "g.json", "--config", "cfg.json", "--out", "s.json"]);
    assert!(out.status.success());
    let s = json(dir.path(), "s.json");
    assert_eq!(s["damping"], 0.5);
    assert_eq!(s["config"]["pagerank"]["max_iter"], 500);
    fs::write(dir.path().join("bad.json"), r#"{"dampng":0.5}"#).unwrap();
    let out = tunegraph(dir.path(), &["pagerank", "g.json", "--config", "bad.json"]);
    assert_eq!(out.status.code(), Some(1));
}
