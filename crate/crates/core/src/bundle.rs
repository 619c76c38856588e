//! The analysis bundle: every per-LO result plus the corpus-level tables,
//! in one deterministic JSON document.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::analysis::{
    check_alignment, classify_bloom_lexicon, contingency_matrix, extract_leading_verb, lint,
    out_of_list_report, verb_frequency, AlignmentVerdict, LintConfig, LintFinding, OutOfListReport,
    VerbAnalysis,
};
use crate::error::{Error, Result};
use crate::lexicon::VerbLexicon;
use crate::matrix::LevelKindMatrix;
use crate::model::{AssignmentSource, BloomAssignment, BloomLevel, CourseSpec, LearningObjective, ModuleKind};

pub const SOURCE_LEXICON: &str = "lexicon";
pub const SOURCE_EXTERNAL: &str = "external";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoEntry {
    pub lo_id: String,
    pub module_id: String,
    pub module_kind: ModuleKind,
    pub text: String,
    pub analysis: VerbAnalysis,
    pub lexicon_levels: BTreeSet<BloomLevel>,
    pub lexicon_alignment: AlignmentVerdict,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_levels: Option<BTreeSet<BloomLevel>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external_alignment: Option<AlignmentVerdict>,
    pub lint: Vec<LintFinding>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnalysisBundle {
    pub lexicon_version: String,
    pub fractional: bool,
    pub los: Vec<LoEntry>,
    pub verb_frequency: BTreeMap<ModuleKind, BTreeMap<String, usize>>,
    pub out_of_list: OutOfListReport,
    /// Level × kind matrix per classification source.
    pub matrices: BTreeMap<String, LevelKindMatrix>,
    /// Corpus LOs without a row in the external classification file.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub external_missing: Vec<String>,
}

/// Runs the full per-LO analysis over `corpus`. Every LO's module must be in
/// `course`; every external row must name a corpus LO.
pub fn analyze_corpus(
    corpus: &[LearningObjective],
    course: &CourseSpec,
    lexicon: &VerbLexicon,
    external: Option<&[BloomAssignment]>,
    lint_config: &LintConfig,
    fractional: bool,
) -> Result<AnalysisBundle> {
    crate::model::validate_corpus(corpus)?;
    let kind_of = |lo: &LearningObjective| course.module(&lo.module_id).map(|m| m.kind);

    let external_by_id: Option<BTreeMap<&str, &BloomAssignment>> = match external {
        Some(rows) => {
            let known: BTreeSet<&str> = corpus.iter().map(|lo| lo.lo_id.as_str()).collect();
            if let Some(row) = rows.iter().find(|r| !known.contains(r.lo_id.as_str())) {
                return Err(Error::Format {
                    line: None,
                    detail: format!("external classification names unknown lo_id `{}`", row.lo_id),
                });
            }
            Some(rows.iter().map(|r| (r.lo_id.as_str(), r)).collect())
        }
        None => None,
    };

    let mut los = Vec::with_capacity(corpus.len());
    let mut external_missing = Vec::new();
    for lo in corpus {
        let kind = kind_of(lo).ok_or_else(|| Error::UnknownModuleKind(lo.lo_id.clone()))?;
        let analysis = extract_leading_verb(lo, lexicon)?;
        let lexicon_assignment = classify_bloom_lexicon(&analysis, lexicon);
        let lexicon_alignment = check_alignment(&lexicon_assignment, kind);
        let external_assignment = external_by_id
            .as_ref()
            .and_then(|map| map.get(lo.lo_id.as_str()).copied());
        if external_by_id.is_some() && external_assignment.is_none() {
            external_missing.push(lo.lo_id.clone());
        }
        let findings = lint(lo, &analysis, lexicon, lint_config);
        los.push(LoEntry {
            lo_id: lo.lo_id.clone(),
            module_id: lo.module_id.clone(),
            module_kind: kind,
            text: lo.text.clone(),
            lexicon_levels: lexicon_assignment.levels,
            lexicon_alignment,
            external_levels: external_assignment.map(|a| a.levels.clone()),
            external_alignment: external_assignment.map(|a| check_alignment(a, kind)),
            lint: findings,
            analysis,
        });
    }

    let analyses: HashMap<&str, &VerbAnalysis> =
        los.iter().map(|e| (e.lo_id.as_str(), &e.analysis)).collect();
    let mut frequencies = BTreeMap::new();
    for kind in ModuleKind::ALL {
        frequencies.insert(kind, verb_frequency(corpus, kind_of, &analyses, kind)?);
    }

    let mut matrices = BTreeMap::new();
    matrices.insert(
        SOURCE_LEXICON.to_string(),
        contingency_matrix(los.iter().map(|e| (&e.lexicon_levels, e.module_kind)), fractional),
    );
    if external_by_id.is_some() {
        matrices.insert(
            SOURCE_EXTERNAL.to_string(),
            contingency_matrix(
                los.iter()
                    .filter_map(|e| e.external_levels.as_ref().map(|l| (l, e.module_kind))),
                fractional,
            ),
        );
    }

    Ok(AnalysisBundle {
        lexicon_version: lexicon.version().to_string(),
        fractional,
        out_of_list: out_of_list_report(los.iter().map(|e| &e.analysis), lexicon),
        los,
        verb_frequency: frequencies,
        matrices,
        external_missing,
    })
}

impl AnalysisBundle {
    pub fn has_external(&self) -> bool {
        self.matrices.contains_key(SOURCE_EXTERNAL)
    }

    pub fn kind_of(&self, lo_id: &str) -> Option<ModuleKind> {
        self.los.iter().find(|e| e.lo_id == lo_id).map(|e| e.module_kind)
    }

    pub fn kinds(&self) -> BTreeMap<&str, ModuleKind> {
        self.los.iter().map(|e| (e.lo_id.as_str(), e.module_kind)).collect()
    }

    /// The automatic classification to compare humans against: the external
    /// classifier when the bundle has one, the lexicon otherwise.
    pub fn auto_assignments(&self) -> (&'static str, Vec<BloomAssignment>) {
        if self.has_external() {
            let rows = self
                .los
                .iter()
                .filter_map(|e| {
                    e.external_levels.as_ref().map(|levels| BloomAssignment {
                        lo_id: e.lo_id.clone(),
                        levels: levels.clone(),
                        source: AssignmentSource::ExternalClassifier,
                    })
                })
                .collect();
            (SOURCE_EXTERNAL, rows)
        } else {
            let rows = self
                .los
                .iter()
                .map(|e| BloomAssignment {
                    lo_id: e.lo_id.clone(),
                    levels: e.lexicon_levels.clone(),
                    source: AssignmentSource::Lexicon,
                })
                .collect();
            (SOURCE_LEXICON, rows)
        }
    }

    /// The matrix of the automatic source chosen by [`Self::auto_assignments`].
    pub fn auto_matrix(&self) -> &LevelKindMatrix {
        self.matrices
            .get(SOURCE_EXTERNAL)
            .unwrap_or_else(|| &self.matrices[SOURCE_LEXICON])
    }
}
