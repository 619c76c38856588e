mod common;

use std::fs;
use std::path::Path;

use common::*;
use serde_json::Value;

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn synthetic_bundle(dir: &Path, extra: &[&str]) -> std::path::PathBuf {
    let course = core_fixture("synthetic/course.toml");
    let corpus = core_fixture("synthetic/corpus.jsonl");
    let mut args = vec![
        "analyze",
        "--course",
        course.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let out = bloomlo(dir, &args);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    dir.join("bundle.json")
}

fn two_module_course(dir: &Path) -> std::path::PathBuf {
    let text = fs::read_to_string(cli_fixture("e2e/course.toml")).unwrap();
    let cut = text.find("[[modules]]\nid = \"ai-ml-in-the-cloud\"").unwrap();
    let path = dir.join("course.toml");
    fs::write(&path, &text[..cut]).unwrap();
    path
}

#[test]
fn generate_two_modules_from_replay() {
    let dir = tempfile::tempdir().unwrap();
    let course = two_module_course(dir.path());
    let store = cli_fixture(E2E_STORE);
    let out = bloomlo(
        dir.path(),
        &["generate", "--replay", store.to_str().unwrap(), "--course", course.to_str().unwrap()],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let completions = read_json(&dir.path().join("completions.json"));
    let modules = completions["modules"].as_array().unwrap();
    assert_eq!(modules.len(), 2);
    assert!(modules.iter().all(|m| m["completion_text"].as_str().unwrap().starts_with("1. ")
        || m["completion_text"].as_str().unwrap().starts_with("Here")));
    assert!(stderr(&out).contains("generative-models: ok"));
}

#[test]
fn live_without_credential_names_the_variable() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(
        &config,
        "[provider]\nmode = \"live\"\nendpoint_url = \"http://127.0.0.1:9/\"\ncredential_env_var = \"BLOOMLO_NO_SUCH_CREDENTIAL\"\n",
    )
    .unwrap();
    let course = cli_fixture("e2e/course.toml");
    let out = bloomlo(
        dir.path(),
        &["--config", config.to_str().unwrap(), "generate", "--course", course.to_str().unwrap()],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("BLOOMLO_NO_SUCH_CREDENTIAL"), "{}", stderr(&out));
}

#[test]
fn module_over_budget_fails_alone() {
    let dir = tempfile::tempdir().unwrap();
    let mut text = fs::read_to_string(cli_fixture("e2e/course.toml")).unwrap();
    let long_name = "Very Long Module Name ".repeat(50);
    text.push_str(&format!("\n[[modules]]\nid = \"huge\"\nname = \"{}\"\nkind = \"project\"\n", long_name.trim()));
    let course = dir.path().join("course.toml");
    fs::write(&course, text).unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, "[generation]\ncontext_limit_tokens = 4400\n").unwrap();
    let store = cli_fixture(E2E_STORE);
    let out = bloomlo(
        dir.path(),
        &[
            "--config",
            config.to_str().unwrap(),
            "generate",
            "--replay",
            store.to_str().unwrap(),
            "--course",
            course.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 1);
    let completions = read_json(&dir.path().join("completions.json"));
    let modules = completions["modules"].as_array().unwrap();
    assert_eq!(modules.len(), 5);
    for m in &modules[..4] {
        assert!(m.get("error").is_none(), "{m}");
    }
    assert!(modules[4]["error"].as_str().unwrap().contains("budget"));
}

#[test]
fn replay_miss_is_an_error_unless_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let course = cli_fixture("e2e/course.toml");
    let store = dir.path().join("empty.json");
    fs::write(&store, "{\"entries\":{}}").unwrap();
    let args = ["generate", "--replay", store.to_str().unwrap(), "--course", course.to_str().unwrap()];
    let out = bloomlo(dir.path(), &args);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no recorded completion"));

    let mut lenient = args.to_vec();
    lenient.push("--lenient-replay");
    assert_eq!(code(&bloomlo(dir.path(), &lenient)), 2);
    // Empty completions surface as parse failures, not as silent gaps.
    let out = bloomlo(dir.path(), &["parse"]);
    assert_eq!(code(&out), 2);
    let report = read_json(&dir.path().join("parse_report.json"));
    assert!(report["modules"].as_array().unwrap().iter().all(|m| !m["error"].is_null()));
}

#[test]
fn record_needs_a_live_provider() {
    let dir = tempfile::tempdir().unwrap();
    let course = cli_fixture("e2e/course.toml");
    let store = cli_fixture(E2E_STORE);
    let out = bloomlo(
        dir.path(),
        &["generate", "--replay", store.to_str().unwrap(), "--course", course.to_str().unwrap(), "--record", "x.json"],
    );
    assert_eq!(code(&out), 1);
}

#[test]
fn worked_example_verbs_reach_the_verb_table() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("course.toml"),
        "course_name = \"C\"\ncourse_goals = \"G\"\n\n[[modules]]\nid = \"devops\"\nname = \"DevOps\"\nkind = \"conceptual module\"\n\n[[modules]]\nid = \"cicd\"\nname = \"CI/CD\"\nkind = \"project\"\n",
    )
    .unwrap();
    fs::write(
        dir.path().join("corpus.jsonl"),
        concat!(
            r#"{"lo_id":"devops#1","module_id":"devops","position":1,"text":"Define DevOps from organizational, cultural and technical perspectives."}"#, "\n",
            r#"{"lo_id":"cicd#1","module_id":"cicd","position":1,"text":"Design and implement Continuous Integration and Continuous Delivery for a Node.JS application."}"#, "\n",
            r#"{"lo_id":"cicd#2","module_id":"cicd","position":2,"text":"Evaluate the performance of computer vision models using appropriate metrics and develop strategies to improve their accuracy and reliability."}"#, "\n",
        ),
    )
    .unwrap();
    assert_eq!(code(&bloomlo(dir.path(), &["analyze", "--course", "course.toml"])), 0);
    assert_eq!(code(&bloomlo(dir.path(), &["report"])), 0);
    let table = fs::read_to_string(dir.path().join("verbs_by_kind.csv")).unwrap();
    assert_eq!(
        table,
        "verb,kind,count\ndefine,conceptual module,1\ndesign,project,1\nevaluate,project,1\n"
    );
    assert!(!dir.path().join("bloom_by_kind_human_normalized.csv").exists());
}

#[test]
fn missing_lexicon_leaves_no_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let course = core_fixture("synthetic/course.toml");
    let corpus = core_fixture("synthetic/corpus.jsonl");
    let out = bloomlo(
        dir.path(),
        &[
            "--lexicon",
            "absent.txt",
            "analyze",
            "--course",
            course.to_str().unwrap(),
            "--corpus",
            corpus.to_str().unwrap(),
        ],
    );
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("absent.txt"));
    assert!(!dir.path().join("bundle.json").exists());
}

#[test]
fn corpus_errors_carry_line_numbers() {
    let dir = tempfile::tempdir().unwrap();
    let mut corpus = fs::read_to_string(core_fixture("synthetic/corpus.jsonl")).unwrap();
    corpus.push_str("{\"lo_id\":\"broken\n");
    fs::write(dir.path().join("corpus.jsonl"), corpus).unwrap();
    let course = core_fixture("synthetic/course.toml");
    let out = bloomlo(dir.path(), &["analyze", "--course", course.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("line 121"), "{}", stderr(&out));
}

fn column_sums(table: &str) -> (f64, f64) {
    let mut sums = (0.0, 0.0);
    for line in table.lines().skip(1) {
        let fields: Vec<&str> = line.split(',').collect();
        let value: f64 = fields[2].parse().unwrap();
        match fields[1] {
            "conceptual module" => sums.0 += value,
            "project" => sums.1 += value,
            other => panic!("{other}"),
        }
    }
    sums
}

#[test]
fn fractional_report_tables_conserve_counts() {
    let dir = tempfile::tempdir().unwrap();
    let external = core_fixture("synthetic/external.csv");
    synthetic_bundle(dir.path(), &["--external", external.to_str().unwrap(), "--fractional"]);
    let annotations = core_fixture("synthetic/annotations.csv");
    let out = bloomlo(dir.path(), &["agree", "--annotations", annotations.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let out = bloomlo(dir.path(), &["report", "--agreement", "agreement.json"]);
    assert_eq!(code(&out), 0);
    for table in ["bloom_by_kind_auto.csv", "bloom_by_kind_human_normalized.csv"] {
        let (c, p) = column_sums(&fs::read_to_string(dir.path().join(table)).unwrap());
        assert!((c - 60.0).abs() < 1e-9 && (p - 60.0).abs() < 1e-9, "{table}: {c} {p}");
    }
    let report = read_json(&dir.path().join("agreement.json"));
    assert_eq!(report["auto_source"], "external");
}

#[test]
fn identical_annotators_agree_perfectly() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_bundle(dir.path(), &[]);
    let levels = ["Remember", "Understand", "Apply", "Analyze", "Evaluate", "Create", "Apply", "Understand", "Remember", "Create"];
    let mut csv = String::from("lo_id,annotator_id,level\n");
    for rater in ["a", "b", "c"] {
        for (i, level) in levels.iter().enumerate() {
            csv.push_str(&format!("ml-foundations#{},{rater},{level}\n", i + 1));
        }
    }
    fs::write(dir.path().join("ann.csv"), csv).unwrap();
    let out = bloomlo(dir.path(), &["agree", "--annotations", "ann.csv"]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&dir.path().join("agreement.json"));
    for pair in report["pairwise"]["pairs"].as_array().unwrap() {
        assert_eq!(pair["kappa"], 1.0);
    }
    assert_eq!(report["pairwise"]["average"], 1.0);
    for level in report["per_level_one_vs_rest"]["levels"].as_array().unwrap() {
        assert_eq!(level["average"], 1.0);
    }
}

#[test]
fn committed_point_six_fixture() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_bundle(dir.path(), &[]);
    let annotations = cli_fixture("kappa_point_six.csv");
    let out = bloomlo(dir.path(), &["agree", "--annotations", annotations.to_str().unwrap()]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&dir.path().join("agreement.json"));
    let average = report["pairwise"]["average"].as_f64().unwrap();
    assert!((average - 0.6).abs() < 1e-12, "{average}");
}

#[test]
fn annotations_outside_the_bundle() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_bundle(dir.path(), &[]);
    fs::write(dir.path().join("ghost.csv"), "ghost#1,a,Apply\nghost#1,b,Apply\n").unwrap();
    let out = bloomlo(dir.path(), &["agree", "--annotations", "ghost.csv"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("no items remain"), "{}", stderr(&out));

    let mut csv = fs::read_to_string(cli_fixture("kappa_point_six.csv")).unwrap();
    csv.push_str("ghost#1,h1,Apply\nghost#2,h1,Apply\n");
    fs::write(dir.path().join("some_ghosts.csv"), csv).unwrap();
    let out = bloomlo(dir.path(), &["agree", "--annotations", "some_ghosts.csv"]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
    assert!(stderr(&out).contains("ghost#1, ghost#2"));
    let report = read_json(&dir.path().join("agreement.json"));
    let unresolved = report["excluded_items"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|e| e["reason"] == "UnresolvedLoId")
        .count();
    assert_eq!(unresolved, 2);
}

#[test]
fn mapping_flag_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_bundle(dir.path(), &[]);
    let annotations = core_fixture("synthetic/annotations.csv");
    let out = bloomlo(
        dir.path(),
        &["--mapping", "majority", "agree", "--annotations", annotations.to_str().unwrap()],
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let report = read_json(&dir.path().join("agreement.json"));
    assert_eq!(report["human_vs_auto"]["mapping"], "majority");
    assert_eq!(report["auto_source"], "lexicon");
}

#[test]
fn report_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    synthetic_bundle(dir.path(), &[]);
    assert_eq!(code(&bloomlo(dir.path(), &["report", "--out-dir", "one"])), 0);
    assert_eq!(code(&bloomlo(dir.path(), &["report", "--out-dir", "two"])), 0);
    for table in ["verbs_by_kind.csv", "bloom_by_kind_auto.csv"] {
        assert_eq!(
            fs::read(dir.path().join("one").join(table)).unwrap(),
            fs::read(dir.path().join("two").join(table)).unwrap()
        );
    }
    assert!(!dir.path().join("one/bloom_by_kind_human_normalized.csv").exists());
}
