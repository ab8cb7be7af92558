use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn sqlalign(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqlalign"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_lines(dir: &Path, name: &str, queries: &[&str]) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, queries.join("\n") + "\n").unwrap();
    path
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "bad JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

const TARGET: &[&str] = &[
    "SELECT name FROM singer WHERE age > 30",
    "SELECT COUNT(*) FROM concert WHERE year = 2014",
    "SELECT country, AVG(age) FROM singer GROUP BY country",
];

const OTHER: &[&str] = &[
    "SELECT a FROM t ORDER BY b DESC LIMIT 3",
    "SELECT x FROM y UNION SELECT z FROM w",
];

#[test]
fn templates_writes_one_line_per_query() {
    let dir = TempDir::new().unwrap();
    let corpus = write_lines(dir.path(), "c.sql", TARGET);
    let out = sqlalign(&["templates", s(&corpus)]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "SELECT FROM WHERE >\nSELECT COUNT ( * ) FROM WHERE =\nSELECT , AVG ( ) FROM GROUP BY\n"
    );
}

#[test]
fn templates_tolerates_invalid_sql() {
    let dir = TempDir::new().unwrap();
    let mut rows: Vec<String> = (0..9)
        .map(|i| format!("{{\"sql\": \"SELECT c{i} FROM t WHERE x = {i}\"}}"))
        .collect();
    rows.push("{\"sql\": \"SELECT FROM WHERE\"}".to_string());
    let corpus = dir.path().join("c.jsonl");
    std::fs::write(&corpus, rows.join("\n")).unwrap();
    let report = dir.path().join("report.json");
    let templates = dir.path().join("t.txt");
    let dist = dir.path().join("d.tsv");
    let out = sqlalign(&[
        "templates",
        s(&corpus),
        "--report",
        s(&report),
        "--distribution",
        s(&dist),
        "-o",
        s(&templates),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 failed (10.0%)"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["parsed"], 9);
    assert_eq!(r["failed"], 1);
    assert_eq!(r["failures"][0]["index"], 9);
    assert_eq!(r["config"]["l_max"], 15);
    assert_eq!(
        std::fs::read_to_string(&templates).unwrap().lines().count(),
        9
    );
    assert!(std::fs::read_to_string(&dist)
        .unwrap()
        .starts_with("# l_max\t15"));
}

#[test]
fn missing_input_is_a_data_error() {
    let out = sqlalign(&["templates", "/nonexistent/corpus.jsonl"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read"));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(sqlalign(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(sqlalign(&["templates"]).status.code(), Some(1));
    assert_eq!(
        sqlalign(&["--alpha", "-1", "templates", "x.sql"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(
        sqlalign(&["--c-mode", "fixed", "templates", "x.sql"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(sqlalign(&["sample", "x.sql"]).status.code(), Some(1));
}

#[test]
fn help_documents_defaults() {
    let out = sqlalign(&["--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8(out.stdout).unwrap();
    for needle in [
        "[default: 15]",
        "[default: 0.5]",
        "[default: max-in-batch]",
        "[default: json]",
    ] {
        assert!(help.contains(needle), "help lacks {needle}");
    }
    assert_eq!(sqlalign(&["--version"]).status.code(), Some(0));
}

#[test]
fn align_self_is_perfect() {
    let dir = TempDir::new().unwrap();
    let t = write_lines(dir.path(), "t.sql", TARGET);
    let out = sqlalign(&["align", "--target", s(&t), s(&t)]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    assert_eq!(r["rows"][0]["a_kl"], 1.0);
    assert_eq!(r["rows"][0]["ovlp"], 1.0);
    assert_eq!(r["config"]["c_mode"], "max_in_batch");
    assert_eq!(r["config"]["alpha"], 0.5);
    assert_eq!(r["warnings"].as_array().unwrap().len(), 1);
}

#[test]
fn align_farthest_source_scores_one_over_e() {
    let dir = TempDir::new().unwrap();
    let t = write_lines(dir.path(), "t.sql", TARGET);
    let near = write_lines(dir.path(), "near.sql", &[TARGET[0], TARGET[1], OTHER[0]]);
    let mid = write_lines(dir.path(), "mid.sql", &[TARGET[2], OTHER[0]]);
    let far = write_lines(dir.path(), "far.sql", OTHER);
    let out = sqlalign(&["align", "--target", s(&t), s(&near), s(&mid), s(&far)]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out);
    let rows = r["rows"].as_array().unwrap();
    let at_floor: Vec<_> = rows
        .iter()
        .filter(|row| (row["a_kl"].as_f64().unwrap() - (-1.0f64).exp()).abs() < 1e-6)
        .collect();
    assert_eq!(at_floor.len(), 1);
    assert!(at_floor[0]["source"].as_str().unwrap().ends_with("far.sql"));
    assert_eq!(rows[2]["ovlp"], 0.0);
    assert!((rows[0]["ovlp"].as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-6);
}

#[test]
fn align_empty_source_is_an_error_row() {
    let dir = TempDir::new().unwrap();
    let t = write_lines(dir.path(), "t.sql", TARGET);
    let empty = dir.path().join("empty.sql");
    std::fs::write(&empty, "").unwrap();
    let out = sqlalign(&["align", "--target", s(&t), s(&t), s(&empty)]);
    assert_eq!(out.status.code(), Some(2));
    let r = json(&out);
    assert_eq!(r["rows"][0]["a_kl"], 1.0);
    assert!(r["rows"][1]["error"]
        .as_str()
        .unwrap()
        .starts_with("EmptyDistribution"));
    assert!(r["rows"][1]["a_kl"].is_null());
}

#[test]
fn align_csv_is_flat() {
    let dir = TempDir::new().unwrap();
    let t = write_lines(dir.path(), "t.sql", TARGET);
    let o = write_lines(dir.path(), "o.sql", OTHER);
    let out = sqlalign(&[
        "--format",
        "csv",
        "--c",
        "2",
        "align",
        "--target",
        s(&t),
        s(&t),
        s(&o),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let mut reader = csv::Reader::from_reader(out.stdout.as_slice());
    let header = reader.headers().unwrap().clone();
    assert_eq!(&header[3], "a_kl");
    let rows: Vec<_> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][3], "1.000000");
    assert_eq!(&rows[0][4], "2.000000");
    assert_eq!(&rows[1][12], "fixed");
}

fn ar(dir: &Path, train: &Path, pred: &Path, extra: &[&str]) -> Output {
    let t = write_lines(dir, "target.sql", TARGET);
    let mut args = vec![
        "--c",
        "1",
        "ar",
        "--target",
        s(&t),
        "--train",
        s(train),
        "--predictions",
        s(pred),
    ];
    args.extend_from_slice(extra);
    let out = Command::new(env!("CARGO_BIN_EXE_sqlalign"))
        .args(&args)
        .output()
        .unwrap();
    out
}

#[test]
fn ar_examples() {
    let dir = TempDir::new().unwrap();
    let shared = write_lines(dir.path(), "shared.sql", TARGET);
    let disjoint = write_lines(dir.path(), "disjoint.sql", OTHER);

    let r = json(&ar(dir.path(), &disjoint, &disjoint, &[]));
    assert_eq!(r["ar"], 1.0);
    assert_eq!(r["sft_recommended"], false);
    assert!(r["note"].as_str().unwrap().contains("heuristic"));

    let r = json(&ar(dir.path(), &shared, &disjoint, &[]));
    assert!(r["ar"].as_f64().unwrap() > 1.0);
    assert_eq!(r["sft_recommended"], true);
    assert_eq!(r["train_score"]["a_kl"], 1.0);

    let r = json(&ar(dir.path(), &disjoint, &shared, &[]));
    assert!(r["ar"].as_f64().unwrap() < 1.0);
    assert_eq!(r["sft_recommended"], false);
}

#[test]
fn ar_needs_fixed_c() {
    let dir = TempDir::new().unwrap();
    let t = write_lines(dir.path(), "t.sql", TARGET);
    let out = sqlalign(&[
        "ar",
        "--target",
        s(&t),
        "--train",
        s(&t),
        "--predictions",
        s(&t),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--c"));
}

#[test]
fn sample_per_group_and_fraction() {
    let dir = TempDir::new().unwrap();
    let mut rows = Vec::new();
    for i in 0..5 {
        rows.push(format!(
            "{{\"SQL\": \"SELECT {i} FROM a\", \"db_id\": \"db1\"}}"
        ));
    }
    rows.push("{\"SQL\": \"SELECT 9 FROM b\", \"db_id\": \"db2\"}".to_string());
    let corpus = dir.path().join("dev.jsonl");
    std::fs::write(&corpus, rows.join("\n")).unwrap();
    let base = [
        "--sql-field",
        "SQL",
        "--group-field",
        "db_id",
        "--seed",
        "4",
    ];

    let mut args = base.to_vec();
    args.extend(["sample", s(&corpus), "--per-group", "2"]);
    let out = sqlalign(&args);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert_eq!(text.matches("db1").count(), 2);
    assert_eq!(sqlalign(&args).stdout, out.stdout);

    let mut args = base.to_vec();
    args.extend(["sample", s(&corpus), "--fraction", "1.0"]);
    let out = sqlalign(&args);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().next().unwrap().contains("SELECT 0 FROM a"));

    let mut args = base.to_vec();
    args.extend(["sample", s(&corpus), "--fraction", "0"]);
    assert_eq!(sqlalign(&args).status.code(), Some(1));
}

#[test]
fn patterns_table() {
    let dir = TempDir::new().unwrap();
    let before = write_lines(
        dir.path(),
        "base.sql",
        &[
            "SELECT COUNT(*) FROM t",
            "SELECT region, SUM(x) FROM t GROUP BY region",
        ],
    );
    let after = write_lines(
        dir.path(),
        "sft.sql",
        &[
            "SELECT COUNT(id) FROM t",
            "SELECT SUM(CASE WHEN a > 1 THEN x ELSE 0 END) FROM t",
        ],
    );
    let out = sqlalign(&[
        "--format",
        "csv",
        "patterns",
        "--before",
        s(&before),
        "--after",
        s(&after),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<_> = text.lines().collect();
    assert_eq!(lines[0], "pattern_id,before,after,delta,direction");
    assert_eq!(lines[1], "attr_comma_sum,1,0,-1,down");
    assert_eq!(lines[2], "bare_sum,0,1,1,up");
    assert_eq!(lines[3], "count_star,1,0,-1,down");
    assert_eq!(lines[5], "case_when,0,1,1,up");
    assert_eq!(lines[6], "iif,0,0,0,flat");

    let out = sqlalign(&["patterns", "--before", s(&before), "--after", s(&after)]);
    let r = json(&out);
    assert_eq!(r["rows"].as_array().unwrap().len(), 8);
    assert_eq!(r["before"]["queries"], 2);
}

#[test]
fn field_mapping_and_skip_bad_rows() {
    let dir = TempDir::new().unwrap();
    let corpus = dir.path().join("c.csv");
    std::fs::write(
        &corpus,
        "query,domain\nSELECT a FROM t,x\n\"SELECT b FROM u\",y\n",
    )
    .unwrap();
    let out = sqlalign(&["--sql-field", "query", "templates", s(&corpus)]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "SELECT FROM\nSELECT FROM\n"
    );

    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"sql\": \"SELECT a FROM t\"}\n{oops\n").unwrap();
    assert_eq!(sqlalign(&["templates", s(&bad)]).status.code(), Some(2));
    let out = sqlalign(&["--skip-bad-rows", "templates", s(&bad)]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("skipped 1"));
}
