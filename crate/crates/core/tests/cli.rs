mod common;

use std::io::{BufRead, BufReader};
use std::path::Path;
use std::process::{Command, Output, Stdio};
use std::time::{Duration, Instant};

use serde_json::Value;

use litdex::corpus::{Article, GranularityScheme};
use litdex::index::{build_from_articles, IndexConfig};
use litdex::service::{Engine, EngineSettings, RequestDefaults, SearchRequest};

use common::*;

fn litdex(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_litdex"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn build(corpus_path: &Path, scheme: &str, out: &Path) -> Output {
    litdex(&["build", "--input", p(corpus_path), "--scheme", scheme, "--out", p(out)])
}

#[test]
fn build_reports_unit_counts() {
    let dir = tempfile::tempdir().unwrap();
    let articles = corpus(5, 3, 4);
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &articles);

    let o = build(&path, "paragraph", &dir.path().join("para"));
    assert!(o.status.success(), "{}", stderr(&o));
    let expected: usize = articles.iter().map(|a| a.paragraphs.len() + 1).sum();
    assert!(stdout(&o).contains(&format!("N={expected} ")), "{}", stdout(&o));

    let o = build(&path, "abstract", &dir.path().join("abs"));
    assert!(o.status.success());
    assert!(stdout(&o).contains("N=3 "), "{}", stdout(&o));
}

#[test]
fn build_and_search_user_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = build(&dir.path().join("missing.jsonl"), "paragraph", &dir.path().join("idx"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("error"));

    let o = litdex(&["search", "--index", p(&dir.path().join("nope")), "virus"]);
    assert_eq!(o.status.code(), Some(1));

    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &corpus(1, 2, 1));
    let o = build(&path, "sentences", &dir.path().join("idx"));
    assert_eq!(o.status.code(), Some(1));

    let o = litdex(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn search_json_matches_engine_response() {
    let dir = tempfile::tempdir().unwrap();
    let articles = corpus(11, 60, 3);
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &articles);
    let idx = dir.path().join("idx");
    assert!(build(&path, "paragraph", &idx).status.success());

    let o = litdex(&["search", "--index", p(&idx), "--json", "--rerank", "--max-results", "7", "--year-from", "2008", "virus spike protein"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let mut got: Value = serde_json::from_str(&stdout(&o)).unwrap();
    got["timing"] = Value::Null;

    let engine = Engine::new(
        build_from_articles(articles, IndexConfig::new(GranularityScheme::ParagraphLevel)).unwrap(),
        EngineSettings::default(),
    )
    .unwrap();
    let mut req = SearchRequest::new("virus spike protein", RequestDefaults::default());
    req.max_results = 7;
    req.rerank = true;
    req.filters.year_from = Some(2008);
    let mut expected = serde_json::to_value(engine.search(&req)).unwrap();
    expected["timing"] = Value::Null;
    assert_eq!(got, expected);
    assert!(!got["results"].as_array().unwrap().is_empty());
}

#[test]
fn rerank_with_dead_scorer_warns_and_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &corpus(3, 20, 2));
    let idx = dir.path().join("idx");
    assert!(build(&path, "paragraph", &idx).status.success());
    let dead = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap();
    let o = litdex(&[
        "search",
        "--index",
        p(&idx),
        "--rerank",
        "--scorer-endpoint",
        &format!("http://{dead}"),
        "--scorer-timeout-ms",
        "500",
        "virus",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stderr(&o).contains("degraded"), "{}", stderr(&o));
}

fn compare(corpus_path: &Path, queries: &Path, k: usize) -> Output {
    litdex(&["compare-granularity", "--input", p(corpus_path), "--queries", p(queries), "--k", &k.to_string(), "--json"])
}

#[test]
fn compare_granularity_cases() {
    let dir = tempfile::tempdir().unwrap();
    let articles = corpus(21, 40, 6);
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &articles);

    let empty = dir.path().join("empty.txt");
    std::fs::write(&empty, "\n\n").unwrap();
    assert_eq!(compare(&path, &empty, 10).status.code(), Some(1));

    let queries = dir.path().join("q.txt");
    std::fs::write(&queries, "virus\ncoronavirus spike\nmortality children\n").unwrap();
    let o = compare(&path, &queries, 1000);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let qs = report["queries"].as_array().unwrap();
    assert_eq!(qs.len(), 3);
    // Mean lengths recomputed from the reported top articles.
    let length = |id: &str| -> f64 {
        let a: &Article = articles.iter().find(|a| a.article_id == id).unwrap();
        std::iter::once(&a.title)
            .chain(std::iter::once(&a.abstract_text))
            .chain(&a.paragraphs)
            .map(|t| oracle_tokens(t).len())
            .sum::<usize>() as f64
    };
    for q in qs {
        for scheme in ["abstract_only", "full_text_monolithic", "paragraph_level"] {
            let ids: Vec<&str> = q["top_articles"][scheme].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
            let expected = if ids.is_empty() { 0.0 } else { ids.iter().map(|id| length(id)).sum::<f64>() / ids.len() as f64 };
            assert!((q["mean_full_text_length"][scheme].as_f64().unwrap() - expected).abs() < 1e-9);
        }
        // With k beyond the corpus, full text and paragraphs retrieve the same article set.
        assert_eq!(q["overlap"]["full_text_vs_paragraph"], 1.0);
    }

    let single = dir.path().join("single.jsonl");
    let mut one = corpus(22, 1, 0);
    one[0].abstract_text = "Virus found.".into();
    one[0].paragraphs = vec!["Virus again.".into()];
    write_corpus(&single, &one);
    std::fs::write(&queries, "virus\n").unwrap();
    let o = compare(&single, &queries, 5);
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    for pair in ["abstract_vs_full_text", "abstract_vs_paragraph", "full_text_vs_paragraph"] {
        assert_eq!(report["queries"][0]["overlap"][pair], 1.0);
    }
}

#[test]
fn bad_config_key_is_named() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("litdex.toml");
    std::fs::write(&cfg, "index_path = \"x\"\nmax_resluts = 3\n").unwrap();
    let o = litdex(&["serve", "--config", p(&cfg)]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("max_resluts"), "{}", stderr(&o));
}

#[test]
fn serve_reports_port_in_use() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &corpus(4, 5, 1));
    let idx = dir.path().join("idx");
    assert!(build(&path, "paragraph", &idx).status.success());
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let o = litdex(&["serve", "--index", p(&idx), "--bind", &taken.local_addr().unwrap().to_string()]);
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));
}

#[cfg(unix)]
#[test]
fn serve_answers_and_stops_on_sigterm() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &corpus(6, 10, 2));
    let idx = dir.path().join("idx");
    assert!(build(&path, "paragraph", &idx).status.success());
    let port = std::net::TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port();
    let bind = format!("127.0.0.1:{port}");
    let mut child = Command::new(env!("CARGO_BIN_EXE_litdex"))
        .args(["serve", "--index", p(&idx), "--bind", &bind])
        .env("RUST_LOG", "warn")
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();

    let deadline = Instant::now() + Duration::from_secs(20);
    let body = loop {
        if let Ok(mut resp) = ureq::get(&format!("http://{bind}/healthz")).call() {
            break resp.body_mut().read_to_string().unwrap();
        }
        assert!(Instant::now() < deadline, "server never became ready");
        std::thread::sleep(Duration::from_millis(50));
    };
    let health: Value = serde_json::from_str(&body).unwrap();
    assert_eq!(health["status"], "ok");

    let killed = Command::new("kill").args(["-TERM", &child.id().to_string()]).status();
    if killed.map(|s| s.success()).unwrap_or(false) {
        let status = child.wait().unwrap();
        assert_eq!(status.code(), Some(0));
    } else {
        child.kill().unwrap();
        child.wait().unwrap();
    }
    let mut lines = Vec::new();
    if let Some(err) = child.stderr.take() {
        lines.extend(BufReader::new(err).lines().map_while(Result::ok));
    }
    assert!(!lines.iter().any(|l| l.contains("panicked")), "{lines:?}");
}

#[test]
fn long_article_dominates_full_text_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let mut r = rng(31);
    let mut articles: Vec<Article> = (0..12).map(|i| article(&mut r, &format!("short{i:02}"), 0)).collect();
    for (i, a) in articles.iter_mut().enumerate() {
        a.abstract_text = format!("Brief note {i} on zoonotic spillover. {}", a.abstract_text);
    }
    let mut long = article(&mut r, "long", 0);
    long.abstract_text = "A general review of clinical practice.".into();
    long.paragraphs = (0..40).map(|i| format!("Lecture {i} covers zoonotic spillover and more. {}", paragraph(&mut r, 4))).collect();
    articles.push(long);
    let path = dir.path().join("corpus.jsonl");
    write_corpus(&path, &articles);
    let queries = dir.path().join("q.txt");
    std::fs::write(&queries, "# one query\nzoonotic spillover\n").unwrap();

    let o = compare(&path, &queries, 3);
    assert!(o.status.success(), "{}", stderr(&o));
    let report: Value = serde_json::from_str(&stdout(&o)).unwrap();
    let q = &report["queries"][0];

    // Brute-force BM25 over whole articles agrees that the long article ranks first.
    let texts: Vec<String> = articles
        .iter()
        .map(|a| std::iter::once(a.title.clone()).chain(std::iter::once(a.abstract_text.clone())).chain(a.paragraphs.clone()).collect::<Vec<_>>().join("\n"))
        .collect();
    let top = brute_bm25(&texts, "zoonotic spillover", 0.9, 0.4)[0].0 as usize;
    assert_eq!(articles[top].article_id, "long");
    assert_eq!(q["top_articles"]["full_text_monolithic"][0], "long");
    assert!(!q["top_articles"]["abstract_only"].as_array().unwrap().iter().any(|v| v == "long"));

    let len = &q["mean_full_text_length"];
    assert!(len["full_text_monolithic"].as_f64().unwrap() > len["abstract_only"].as_f64().unwrap());
}
