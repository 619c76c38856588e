use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::BufReader;
use std::path::PathBuf;

use bloomlo::agreement::{normalized_annotation_matrix, import_annotations};
use bloomlo::analysis::{import_external_classifications, LintConfig};
use bloomlo::bundle::{analyze_corpus, AnalysisBundle, SOURCE_EXTERNAL, SOURCE_LEXICON};
use bloomlo::lexicon::VerbLexicon;
use bloomlo::model::read_corpus;
use bloomlo::{CourseSpec, ModuleKind};

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/synthetic").join(name)
}

fn course() -> CourseSpec {
    CourseSpec::parse(&fs::read_to_string(path("course.toml")).unwrap(), true).unwrap()
}

fn bundle(fractional: bool) -> AnalysisBundle {
    let corpus = read_corpus(BufReader::new(fs::File::open(path("corpus.jsonl")).unwrap())).unwrap();
    let external = import_external_classifications(fs::File::open(path("external.csv")).unwrap()).unwrap();
    analyze_corpus(&corpus, &course(), &VerbLexicon::bundled(), Some(&external), &LintConfig::default(), fractional)
        .unwrap()
}

/// Counts per kind straight from the raw files: module kinds from the
/// course, LO module ids from the corpus lines.
fn raw_counts() -> BTreeMap<ModuleKind, usize> {
    let course = course();
    let mut counts = BTreeMap::new();
    for line in fs::read_to_string(path("corpus.jsonl")).unwrap().lines() {
        let value: serde_json::Value = serde_json::from_str(line).unwrap();
        let kind = course.module(value["module_id"].as_str().unwrap()).unwrap().kind;
        *counts.entry(kind).or_insert(0) += 1;
    }
    counts
}

#[test]
fn fixture_is_sixty_and_sixty() {
    let counts = raw_counts();
    assert_eq!(counts[&ModuleKind::ConceptualModule], 60);
    assert_eq!(counts[&ModuleKind::Project], 60);
}

#[test]
fn verb_frequency_totals_equal_kind_sizes() {
    let counts = raw_counts();
    let b = bundle(false);
    for kind in ModuleKind::ALL {
        assert_eq!(b.verb_frequency[&kind].values().sum::<usize>(), counts[&kind]);
    }
}

#[test]
fn fractional_column_sums_equal_kind_sizes() {
    let counts = raw_counts();
    let b = bundle(true);
    for source in [SOURCE_LEXICON, SOURCE_EXTERNAL] {
        for kind in ModuleKind::ALL {
            assert_eq!(b.matrices[source].column_sum(kind), counts[&kind] as f64, "{source} {kind}");
        }
    }
}

#[test]
fn normalized_annotation_total_equals_annotated_items() {
    let text = fs::read_to_string(path("annotations.csv")).unwrap();
    let annotated: BTreeSet<&str> = text.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    let records = import_annotations(text.as_bytes()).unwrap();
    let b = bundle(false);
    let kinds = b.kinds();
    let m = normalized_annotation_matrix(&records, |id| kinds.get(id).copied()).unwrap();
    assert_eq!(m.total(), annotated.len() as f64);
    assert_eq!(annotated.len(), 120);
}

#[test]
fn conceptual_verbs_are_dominated_by_the_expected_five() {
    let b = bundle(false);
    let mut ranked: Vec<(&String, &usize)> = b.verb_frequency[&ModuleKind::ConceptualModule].iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
    let top: BTreeSet<&str> = ranked.iter().take(5).map(|(v, _)| v.as_str()).collect();
    assert_eq!(top, BTreeSet::from(["define", "describe", "discuss", "explain", "identify"]));
}
