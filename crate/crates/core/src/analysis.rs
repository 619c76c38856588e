//! Verb extraction, Bloom classification, alignment with module kind, verb
//! frequencies and lint heuristics for learning objectives.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lexicon::{parse_level_set, VerbLexicon};
use crate::matrix::{LevelKindMatrix, MatrixBuilder, MatrixRow};
use crate::model::{
    bloom_group_of, AssignmentSource, BloomAssignment, BloomGroup, BloomLevel, LearningObjective,
    ModuleKind,
};

const COORDINATORS: [&str; 2] = ["and", "or"];

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerbAnalysis {
    pub lo_id: String,
    pub leading_verb: String,
    pub additional_verbs: Vec<String>,
    pub leading_in_lexicon: bool,
    pub leading_in_prompt_examples: bool,
}

/// Lowercases and trims non-alphanumeric characters from both ends.
fn normalize_token(token: &str) -> String {
    token
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// Token indices (into `split_whitespace`) of the additional verbs: lexicon
/// verbs directly after `and`, `or`, or a token ending in a comma.
fn additional_verb_positions(tokens: &[&str], lexicon: &VerbLexicon) -> Vec<usize> {
    (1..tokens.len())
        .filter(|&i| {
            let prev = tokens[i - 1];
            let after_coordination =
                COORDINATORS.contains(&normalize_token(prev).as_str()) || prev.ends_with(',');
            after_coordination && lexicon.contains(&normalize_token(tokens[i]))
        })
        .collect()
}

pub fn extract_leading_verb(lo: &LearningObjective, lexicon: &VerbLexicon) -> Result<VerbAnalysis> {
    let tokens: Vec<&str> = lo.text.split_whitespace().collect();
    let leading_verb = tokens
        .first()
        .map(|t| normalize_token(t))
        .filter(|t| !t.is_empty())
        .ok_or(Error::EmptyText)?;
    let additional_verbs = additional_verb_positions(&tokens, lexicon)
        .into_iter()
        .map(|i| normalize_token(tokens[i]))
        .collect();
    Ok(VerbAnalysis {
        lo_id: lo.lo_id.clone(),
        leading_in_lexicon: lexicon.contains(&leading_verb),
        leading_in_prompt_examples: lexicon.is_prompt_example(&leading_verb),
        leading_verb,
        additional_verbs,
    })
}

pub fn classify_bloom_lexicon(analysis: &VerbAnalysis, lexicon: &VerbLexicon) -> BloomAssignment {
    BloomAssignment {
        lo_id: analysis.lo_id.clone(),
        levels: lexicon
            .levels(&analysis.leading_verb)
            .cloned()
            .unwrap_or_default(),
        source: AssignmentSource::Lexicon,
    }
}

/// Reads `lo_id,Level[|Level...]` rows. An empty level field means the
/// classifier assigned no level. Blank lines, `#` comments and a leading
/// `lo_id,...` header row are skipped.
pub fn import_external_classifications(reader: impl Read) -> Result<Vec<BloomAssignment>> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (index, record) in csv.records().enumerate() {
        let record = record.map_err(|e| Error::Format {
            line: e.position().map(|p| p.line() as usize),
            detail: e.to_string(),
        })?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(index + 1);
        if index == 0 && record.get(0) == Some("lo_id") {
            continue;
        }
        if record.len() != 2 {
            return Err(Error::Format {
                line: Some(line),
                detail: format!("expected 2 fields `lo_id,levels`, found {}", record.len()),
            });
        }
        let lo_id = record[0].to_string();
        if lo_id.is_empty() {
            return Err(Error::Format {
                line: Some(line),
                detail: "empty lo_id".into(),
            });
        }
        if !seen.insert(lo_id.clone()) {
            return Err(Error::Format {
                line: Some(line),
                detail: format!("duplicate lo_id `{lo_id}`"),
            });
        }
        let levels = parse_level_set(&record[1]).map_err(|e| e.at_line(line))?;
        out.push(BloomAssignment {
            lo_id,
            levels,
            source: AssignmentSource::ExternalClassifier,
        });
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Aligned,
    Misaligned,
    Mixed,
    Unclassified,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlignmentVerdict {
    pub lo_id: String,
    pub expected_group: BloomGroup,
    pub observed_groups: BTreeSet<BloomGroup>,
    pub verdict: Verdict,
}

pub fn check_alignment(assignment: &BloomAssignment, kind: ModuleKind) -> AlignmentVerdict {
    let expected_group = kind.expected_group();
    let observed_groups: BTreeSet<BloomGroup> =
        assignment.levels.iter().map(|l| bloom_group_of(*l)).collect();
    let verdict = match observed_groups.len() {
        0 => Verdict::Unclassified,
        2 => Verdict::Mixed,
        _ if observed_groups.contains(&expected_group) => Verdict::Aligned,
        _ => Verdict::Misaligned,
    };
    AlignmentVerdict {
        lo_id: assignment.lo_id.clone(),
        expected_group,
        observed_groups,
        verdict,
    }
}

/// Leading-verb counts over the LOs of one kind. `kind_of` maps an LO to
/// its module kind; `analyses` is keyed by `lo_id`.
pub fn verb_frequency(
    corpus: &[LearningObjective],
    kind_of: impl Fn(&LearningObjective) -> Option<ModuleKind>,
    analyses: &HashMap<&str, &VerbAnalysis>,
    kind: ModuleKind,
) -> Result<BTreeMap<String, usize>> {
    let mut counts = BTreeMap::new();
    for lo in corpus {
        let lo_kind = kind_of(lo).ok_or_else(|| Error::UnknownModuleKind(lo.lo_id.clone()))?;
        if lo_kind != kind {
            continue;
        }
        let analysis = analyses
            .get(lo.lo_id.as_str())
            .ok_or_else(|| Error::MissingAnalysis(lo.lo_id.clone()))?;
        *counts.entry(analysis.leading_verb.clone()).or_insert(0) += 1;
    }
    Ok(counts)
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutOfListReport {
    pub not_in_prompt_examples: usize,
    pub not_in_lexicon: usize,
    pub verbs_not_in_prompt_examples: Vec<String>,
    pub verbs_not_in_lexicon: Vec<String>,
}

pub fn out_of_list_report<'a>(
    analyses: impl IntoIterator<Item = &'a VerbAnalysis>,
    lexicon: &VerbLexicon,
) -> OutOfListReport {
    let mut report = OutOfListReport::default();
    let mut not_examples = BTreeSet::new();
    let mut not_lexicon = BTreeSet::new();
    for analysis in analyses {
        let verb = &analysis.leading_verb;
        if !lexicon.is_prompt_example(verb) {
            report.not_in_prompt_examples += 1;
            not_examples.insert(verb.clone());
        }
        if !lexicon.contains(verb) {
            report.not_in_lexicon += 1;
            not_lexicon.insert(verb.clone());
        }
    }
    report.verbs_not_in_prompt_examples = not_examples.into_iter().collect();
    report.verbs_not_in_lexicon = not_lexicon.into_iter().collect();
    report
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct LintConfig {
    pub max_chars: usize,
    pub vague_phrases: Vec<String>,
}

impl Default for LintConfig {
    fn default() -> Self {
        LintConfig {
            max_chars: 280,
            vague_phrases: vec!["various".into(), "some".into(), "etc.".into()],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case")]
pub enum LintFinding {
    NotVerbLed { token: String },
    MultiVerb { verbs: Vec<String>, suggested_split: Vec<String> },
    OverLong { chars: usize, limit: usize },
    VagueScope { phrases: Vec<String> },
}

impl LintFinding {
    pub fn rule(&self) -> &'static str {
        match self {
            LintFinding::NotVerbLed { .. } => "not_verb_led",
            LintFinding::MultiVerb { .. } => "multi_verb",
            LintFinding::OverLong { .. } => "over_long",
            LintFinding::VagueScope { .. } => "vague_scope",
        }
    }
}

pub fn lint(
    lo: &LearningObjective,
    analysis: &VerbAnalysis,
    lexicon: &VerbLexicon,
    config: &LintConfig,
) -> Vec<LintFinding> {
    let mut findings = Vec::new();
    if !analysis.leading_in_lexicon {
        findings.push(LintFinding::NotVerbLed {
            token: analysis.leading_verb.clone(),
        });
    }
    if !analysis.additional_verbs.is_empty() {
        findings.push(LintFinding::MultiVerb {
            verbs: analysis.additional_verbs.clone(),
            suggested_split: suggest_split(&lo.text, lexicon),
        });
    }
    let chars = lo.text.chars().count();
    if chars > config.max_chars {
        findings.push(LintFinding::OverLong {
            chars,
            limit: config.max_chars,
        });
    }
    let phrases: Vec<String> = config
        .vague_phrases
        .iter()
        .filter(|p| contains_phrase(&lo.text, p))
        .cloned()
        .collect();
    if !phrases.is_empty() {
        findings.push(LintFinding::VagueScope { phrases });
    }
    findings
}

/// Case-insensitive match that does not start or end inside a word.
fn contains_phrase(text: &str, phrase: &str) -> bool {
    let phrase = phrase.trim().to_lowercase();
    if phrase.is_empty() {
        return false;
    }
    let haystack = text.to_lowercase();
    let word_edge = |c: Option<char>| c.is_none_or(|c| !c.is_alphanumeric());
    let first_is_word = phrase.chars().next().is_some_and(char::is_alphanumeric);
    let last_is_word = phrase.chars().last().is_some_and(char::is_alphanumeric);
    haystack.match_indices(&phrase).any(|(start, m)| {
        let before = haystack[..start].chars().next_back();
        let after = haystack[start + m.len()..].chars().next();
        (!first_is_word || word_edge(before)) && (!last_is_word || word_edge(after))
    })
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Splits a multi-verb LO at each coordination point that introduces an
/// additional verb. A segment that is only a verb ("Design and implement X")
/// shares the object of the segment after it.
pub fn suggest_split(text: &str, lexicon: &VerbLexicon) -> Vec<String> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let cuts = additional_verb_positions(&tokens, lexicon);
    if tokens.is_empty() || cuts.is_empty() {
        return vec![text.to_string()];
    }

    let mut segments: Vec<Vec<String>> = Vec::new();
    let starts: Vec<usize> = std::iter::once(0).chain(cuts.iter().copied()).collect();
    for (k, &start) in starts.iter().enumerate() {
        let end = starts.get(k + 1).copied().unwrap_or(tokens.len());
        let mut seg: Vec<String> = tokens[start..end].iter().map(|t| t.to_string()).collect();
        if k + 1 < starts.len() {
            if seg
                .last()
                .is_some_and(|t| COORDINATORS.contains(&normalize_token(t).as_str()))
                && seg.len() > 1
            {
                seg.pop();
            }
            if let Some(last) = seg.last_mut() {
                let trimmed = last.trim_end_matches([',', ';']).to_string();
                *last = trimmed;
            }
        }
        segments.push(seg);
    }

    // Bare-verb segments borrow the object of the next segment that has one.
    for k in (0..segments.len()).rev() {
        if segments[k].len() == 1 {
            if let Some(next) = segments.get(k + 1) {
                let object: Vec<String> = next[1..].to_vec();
                segments[k].extend(object);
            }
        }
    }

    segments
        .into_iter()
        .map(|seg| {
            let mut sentence = seg.join(" ");
            sentence = capitalize(&sentence);
            if !sentence.ends_with(['.', '!', '?']) {
                sentence.push('.');
            }
            sentence
        })
        .collect()
}

/// Level × kind table. Count mode adds 1 to every assigned level; fractional
/// mode adds 1/k for k assigned levels. Items with no level go to the
/// unclassified row with weight 1 in both modes.
pub fn contingency_matrix<'a>(
    items: impl IntoIterator<Item = (&'a BTreeSet<BloomLevel>, ModuleKind)>,
    fractional: bool,
) -> LevelKindMatrix {
    let mut builder = MatrixBuilder::new();
    for (levels, kind) in items {
        if levels.is_empty() {
            builder.add_one(MatrixRow::UNCLASSIFIED, kind);
            continue;
        }
        let divisor = if fractional { levels.len() as u64 } else { 1 };
        for level in levels {
            builder.add_fraction(MatrixRow::Level(*level), kind, divisor);
        }
    }
    builder.build()
}
