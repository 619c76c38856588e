//! Extraction of numbered or bulleted learning objectives from a raw
//! completion.
//!
//! Accepted item markers at line start are `N.`, `N)`, `-` and `*`, each
//! followed by whitespace or the end of the line. Rules:
//!
//! - text before the first marker line is preamble and is dropped;
//! - a non-blank, non-marker line directly below an item continues it;
//! - after a blank line, non-marker text is prose and is dropped;
//! - a marker indented deeper than the top-level markers is a sub-item and
//!   is folded into its parent;
//! - positions follow source order, never the numeric labels.

use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LearningObjective;

static MARKER: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"^(\s*)(?:\d{1,3}[.)]|[-*])(?:\s+|$)").unwrap());

/// Lower and upper bound of the expected item count per module.
pub const EXPECTED_ITEM_RANGE: (usize, usize) = (5, 10);

/// True when `text` begins with one of the recognized list markers.
pub fn starts_with_marker(text: &str) -> bool {
    MARKER.is_match(text)
}

/// Removes every leading marker, so `"1. - Foo"` becomes `"Foo"`.
fn strip_markers(mut text: &str) -> &str {
    while let Some(m) = MARKER.find(text) {
        text = &text[m.end()..];
    }
    text.trim()
}

fn indent_width(prefix: &str) -> usize {
    prefix.chars().map(|c| if c == '\t' { 4 } else { 1 }).sum()
}

enum State {
    Preamble,
    InItem,
    AfterBlank,
}

/// Splits a completion into item texts in source order.
fn split_items(completion: &str) -> Result<Vec<String>> {
    let mut items: Vec<Vec<String>> = Vec::new();
    let mut base_indent: Option<usize> = None;
    let mut state = State::Preamble;

    for line in completion.lines() {
        if line.trim().is_empty() {
            if matches!(state, State::InItem) {
                state = State::AfterBlank;
            }
            continue;
        }
        match MARKER.captures(line) {
            Some(caps) => {
                let indent = indent_width(&caps[1]);
                let body = strip_markers(line).to_string();
                let base = *base_indent.get_or_insert(indent);
                if indent > base && !items.is_empty() && !matches!(state, State::Preamble) {
                    items.last_mut().unwrap().push(body);
                } else {
                    items.push(vec![body]);
                }
                state = State::InItem;
            }
            None => match state {
                State::InItem => items.last_mut().unwrap().push(line.trim().to_string()),
                State::Preamble | State::AfterBlank => {}
            },
        }
    }

    if items.is_empty() {
        return Err(Error::NoListFound);
    }
    let texts: Vec<String> = items
        .into_iter()
        .map(|parts| {
            parts
                .iter()
                .map(|p| p.as_str())
                .filter(|p| !p.is_empty())
                .collect::<Vec<_>>()
                .join(" ")
        })
        .filter(|text| !text.is_empty())
        .collect();
    if texts.is_empty() {
        return Err(Error::EmptyItems);
    }
    Ok(texts)
}

/// Parses one completion into learning objectives for `module_id`.
pub fn parse_completion(completion_text: &str, module_id: &str) -> Result<Vec<LearningObjective>> {
    if module_id.is_empty() {
        return Err(Error::Format {
            line: None,
            detail: "module id is empty".into(),
        });
    }
    let normalized = crate::model::normalize_newlines(completion_text);
    split_items(&normalized)?
        .iter()
        .enumerate()
        .map(|(index, text)| LearningObjective::new(module_id, index + 1, text))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleParseReport {
    pub module_id: String,
    pub item_count: usize,
    pub count_in_expected_range: bool,
    pub error: Option<String>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseReport {
    pub modules: Vec<ModuleParseReport>,
}

impl ParseReport {
    pub fn failed_modules(&self) -> impl Iterator<Item = &ModuleParseReport> {
        self.modules.iter().filter(|m| m.error.is_some())
    }

    pub fn out_of_range_modules(&self) -> impl Iterator<Item = &ModuleParseReport> {
        self.modules
            .iter()
            .filter(|m| m.error.is_none() && !m.count_in_expected_range)
    }
}

/// Parses every `(module_id, completion)` pair. Per-module failures land in
/// the report instead of aborting the corpus.
pub fn parse_corpus<'a>(
    responses: impl IntoIterator<Item = (&'a str, &'a str)>,
) -> (Vec<LearningObjective>, ParseReport) {
    let mut corpus = Vec::new();
    let mut report = ParseReport::default();
    for (module_id, completion) in responses {
        match parse_completion(completion, module_id) {
            Ok(los) => {
                let count = los.len();
                report.modules.push(ModuleParseReport {
                    module_id: module_id.to_string(),
                    item_count: count,
                    count_in_expected_range: (EXPECTED_ITEM_RANGE.0..=EXPECTED_ITEM_RANGE.1)
                        .contains(&count),
                    error: None,
                });
                corpus.extend(los);
            }
            Err(err) => report.modules.push(ModuleParseReport {
                module_id: module_id.to_string(),
                item_count: 0,
                count_in_expected_range: false,
                error: Some(err.to_string()),
            }),
        }
    }
    (corpus, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn texts(completion: &str) -> Vec<String> {
        parse_completion(completion, "m")
            .unwrap()
            .into_iter()
            .map(|lo| lo.text)
            .collect()
    }

    #[test]
    fn minimal_list() {
        let los = parse_completion("1. Define X.\n2. Explain Y.", "m").unwrap();
        assert_eq!(los.len(), 2);
        assert_eq!((los[0].position, los[0].text.as_str()), (1, "Define X."));
        assert_eq!((los[1].position, los[1].text.as_str()), (2, "Explain Y."));
        assert_eq!(los[1].lo_id, "m#2");
    }

    #[test]
    fn preamble_and_continuation() {
        let got = texts("Sure! Here are the LOs:\n1. Describe A.\n2. Implement B\nusing cloud APIs.");
        assert_eq!(got, vec!["Describe A.", "Implement B using cloud APIs."]);
    }

    #[test]
    fn prose_only_is_no_list() {
        assert!(matches!(
            parse_completion("I cannot produce that.", "m"),
            Err(Error::NoListFound)
        ));
        assert!(matches!(parse_completion("", "m"), Err(Error::NoListFound)));
    }

    #[test]
    fn bare_markers_are_empty_items() {
        assert!(matches!(
            parse_completion("1.\n2.\n-", "m"),
            Err(Error::EmptyItems)
        ));
    }

    #[test]
    fn numeric_labels_do_not_set_positions() {
        let los = parse_completion("1. A\n3. B\n3. C", "m").unwrap();
        let positions: Vec<_> = los.iter().map(|lo| lo.position).collect();
        assert_eq!(positions, vec![1, 2, 3]);
    }

    #[test]
    fn trailer_after_blank_line_is_dropped() {
        let got = texts("1) Apply X.\n2) Build Y.\n\nLet me know if you want more.");
        assert_eq!(got, vec!["Apply X.", "Build Y."]);
    }

    #[test]
    fn nested_markers_fold_into_parent() {
        let got = texts("- Explain models:\n  - supervised\n  - unsupervised\n- List tools.");
        assert_eq!(got, vec!["Explain models: supervised unsupervised", "List tools."]);
    }

    #[test]
    fn numbers_inside_text_are_not_markers() {
        let got = texts("1. Compare 3.5 and 4 models.\n2. Run -5 tests");
        assert_eq!(got, vec!["Compare 3.5 and 4 models.", "Run -5 tests"]);
        assert!(!starts_with_marker("3.5 GHz"));
        assert!(!starts_with_marker("*emphasis*"));
        assert!(starts_with_marker("12) x"));
    }

    #[test]
    fn corpus_report_flags_failures_and_range() {
        let six = "1. A\n2. B\n3. C\n4. D\n5. E\n6. F";
        let twelve: String = (1..=12).map(|i| format!("{i}. Item {i}\n")).collect();
        let (corpus, report) =
            parse_corpus([("a", six), ("b", "nothing here"), ("c", twelve.as_str())]);
        assert_eq!(corpus.len(), 18);
        assert!(report.modules[0].count_in_expected_range);
        assert!(report.modules[1].error.is_some());
        assert_eq!(report.modules[2].item_count, 12);
        assert!(!report.modules[2].count_in_expected_range);
        assert_eq!(report.failed_modules().count(), 1);
        assert_eq!(report.out_of_range_modules().count(), 1);

        let (corpus, report) = parse_corpus(std::iter::empty());
        assert!(corpus.is_empty() && report.modules.is_empty());
    }

    proptest! {
        #[test]
        fn reparsing_a_parsed_text_is_stable(raw in "[A-Za-z0-9 .,;:()*-]{1,80}") {
            if let Ok(los) = parse_completion(&format!("1. {raw}"), "m") {
                for lo in los {
                    let again = parse_completion(&format!("1. {}", lo.text), "m").unwrap();
                    prop_assert_eq!(again.len(), 1);
                    prop_assert_eq!(&again[0].text, &lo.text);
                    prop_assert!(!starts_with_marker(&lo.text));
                }
            }
        }

        #[test]
        fn positions_are_consecutive(
            items in proptest::collection::vec("[A-Z][a-z]{1,8}( [a-z]{1,8}){0,4}\\.", 1..15),
            labels in proptest::collection::vec(1u32..50, 15),
        ) {
            let completion: String = items
                .iter()
                .zip(&labels)
                .map(|(text, label)| format!("{label}. {text}\n"))
                .collect();
            let los = parse_completion(&completion, "m").unwrap();
            prop_assert_eq!(los.len(), items.len());
            for (index, lo) in los.iter().enumerate() {
                prop_assert_eq!(lo.position, index + 1);
                prop_assert_eq!(&lo.text, &items[index]);
            }
        }
    }
}
