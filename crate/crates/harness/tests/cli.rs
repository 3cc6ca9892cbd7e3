use std::path::{Path, PathBuf};

use qgbench_core::digest::sha256_hex;
use qgbench_harness::cli::run;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures").join(name)
}

fn qg(args: &[&str]) -> (i32, String) {
    let mut out = Vec::new();
    let argv = std::iter::once("qgbench").chain(args.iter().copied());
    let code = run(argv, &mut out);
    (code, String::from_utf8(out).unwrap())
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(qg(&["bogus"]).0, 2);
    assert_eq!(qg(&["stats"]).0, 2);
    assert_eq!(qg(&["stats", "--corpus", "x", "--format", "xml"]).0, 2);
    assert_eq!(qg(&["--help"]).0, 0);
}

#[test]
fn domain_errors_exit_1() {
    assert_eq!(qg(&["stats", "--corpus", "/nonexistent/corpus.ndjson"]).0, 1);
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.ndjson");
    std::fs::write(&bad, "{\"id\":\"1\",\"subject\":\"History\",\"context\":\"c\",\"long_prompt\":\" \",\"short_prompt\":\"c\",\"question\":\"q?\"}\nnot json\n").unwrap();
    let (code, out) = qg(&["validate", "--corpus", p(&bad)]);
    assert_eq!(code, 1);
    assert!(out.contains("EmptyField") && out.contains("ParseError"), "{out}");
    assert_eq!(qg(&["split", "--corpus", p(&fixture("sample10.ndjson")), "--seed", "1", "--ratio", "1.5", "--out", p(dir.path())]).0, 1);
}

#[test]
fn stats_and_formats() {
    let corpus = fixture("sample10.ndjson");
    let (code, out) = qg(&["stats", "--corpus", p(&corpus)]);
    assert_eq!(code, 0);
    assert!(out.lines().next().unwrap() == "total\t\t10", "{out}");
    let (_, csv) = qg(&["--format", "csv", "stats", "--corpus", p(&corpus)]);
    assert!(csv.starts_with("section,key,value\ntotal,,10\n"));
    let (_, md) = qg(&["stats", "--corpus", p(&corpus), "--format", "md"]);
    assert!(md.starts_with("| section | key | value |\n|---|---|---|\n"));
}

#[test]
fn split_is_deterministic_and_read_only() {
    let corpus = fixture("sample10.ndjson");
    let before = sha256_hex(&std::fs::read(&corpus).unwrap());
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(qg(&["split", "--corpus", p(&corpus), "--ratio", "0.8", "--seed", "7", "--out", p(&a)]).0, 0);
    assert_eq!(qg(&["split", "--corpus", p(&corpus), "--ratio", "0.8", "--seed", "7", "--out", p(&b)]).0, 0);
    for f in ["train.ndjson", "test.ndjson"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
    assert_eq!(std::fs::read_to_string(a.join("test.ndjson")).unwrap().lines().count(), 2);
    assert_eq!(sha256_hex(&std::fs::read(&corpus).unwrap()), before);
}

#[test]
fn render_matches_golden() {
    let (code, out) = qg(&["render", "--corpus", p(&fixture("sample5.ndjson")), "--setting", "short", "--kind", "segmented-source"]);
    assert_eq!(code, 0);
    let golden = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/golden/render/short_segmented-source.txt");
    assert_eq!(out, std::fs::read_to_string(golden).unwrap());
}

#[test]
fn generate_score_report_pipeline() {
    let corpus = fixture("sample10.ndjson");
    let dir = tempfile::tempdir().unwrap();
    let runs = dir.path().join("runs");
    let (code, out) = qg(&["generate", "--corpus", p(&corpus), "--out", p(&runs), "--cache", p(&dir.path().join("cache"))]);
    assert_eq!(code, 0, "{out}");
    let run_dirs: Vec<&str> = out.lines().map(|l| l.split('\t').nth(4).unwrap()).collect();
    assert_eq!(run_dirs.len(), 3);
    // identical inputs give identical run ids
    let (_, again) = qg(&["generate", "--corpus", p(&corpus), "--out", p(&runs)]);
    assert_eq!(again, out);

    let (code, scored) = qg(&["score", "--run", run_dirs[0], "--corpus", p(&corpus), "--one-hot"]);
    assert_eq!(code, 0);
    assert!(scored.contains("bertscore_f1") && scored.contains("n_scored\t10"));

    let ratings = dir.path().join("ratings.ndjson");
    let target = format!("{}:ppp-1", Path::new(run_dirs[0]).file_name().unwrap().to_str().unwrap());
    let line = |rater: &str| format!(r#"{{"rater_id":"{rater}","target_id":"{target}","scores":{{"Grammaticality":5,"Appropriateness":4,"Relevance":4,"Complexity":2,"Novelty":1}},"submitted_at":"2024-01-01T00:00:00Z"}}"#);
    std::fs::write(&ratings, format!("{}\n{}\n", line("a"), line("b"))).unwrap();
    let (code, kappa) = qg(&["kappa", "--ratings", p(&ratings)]);
    assert_eq!(code, 0);
    assert!(kappa.contains("Grammaticality\t1.000000"), "{kappa}");

    let report = dir.path().join("report");
    let (code, _) = qg(&["report", "--corpus", p(&corpus), "--runs", p(&runs), "--ratings", p(&ratings), "--out", p(&report)]);
    assert_eq!(code, 0);
    let md = std::fs::read_to_string(report.join("report.md")).unwrap();
    for heading in ["## Dataset", "### With long prompt", "### With short prompt", "### Without prompt", "## Human evaluation"] {
        assert!(md.contains(heading), "{heading}");
    }
    assert!(md.contains("| mock-echo | With long prompt | 2 | 5.00 | 4.00 | 4.00 | 2.00 | 1.00 |"), "{md}");
    let automatic = std::fs::read_to_string(report.join("table_automatic.csv")).unwrap();
    assert_eq!(automatic.lines().count(), 4);

    // without a corpus, every run needs stored scores
    let r2 = dir.path().join("r2");
    assert_eq!(qg(&["report", "--runs", p(&runs), "--out", p(&r2), "--sections", "automatic"]).0, 1);
    for d in &run_dirs[1..] {
        assert_eq!(qg(&["score", "--run", d, "--corpus", p(&corpus)]).0, 0);
    }
    assert_eq!(qg(&["report", "--runs", p(&runs), "--out", p(&r2), "--sections", "automatic"]).0, 0);
    let md = std::fs::read_to_string(r2.join("report.md")).unwrap();
    assert!(!md.contains("## Dataset") && !md.contains("## Human evaluation"));
}

#[test]
fn uneven_ratings_fail_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let ratings = dir.path().join("r.ndjson");
    let line = |rater: &str, target: &str| format!(r#"{{"rater_id":"{rater}","target_id":"{target}","scores":{{"Grammaticality":5,"Appropriateness":4,"Relevance":4,"Complexity":2,"Novelty":1}},"submitted_at":"2024-01-01T00:00:00Z"}}"#);
    std::fs::write(&ratings, [line("a", "t1"), line("b", "t1"), line("a", "t2")].join("\n")).unwrap();
    assert_eq!(qg(&["kappa", "--ratings", p(&ratings)]).0, 1);
}

#[test]
fn unknown_model_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _) = qg(&["generate", "--corpus", p(&fixture("sample5.ndjson")), "--model", "gpt-x", "--out", p(dir.path())]);
    assert_eq!(code, 1);
}
