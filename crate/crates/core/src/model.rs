//! Shared domain vocabulary: Bloom levels and groups, module kinds, course
//! specifications, learning objectives and classification records.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The six levels of the revised Bloom's taxonomy, in rank order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BloomLevel {
    Remember,
    Understand,
    Apply,
    Analyze,
    Evaluate,
    Create,
}

impl BloomLevel {
    pub const ALL: [BloomLevel; 6] = [
        BloomLevel::Remember,
        BloomLevel::Understand,
        BloomLevel::Apply,
        BloomLevel::Analyze,
        BloomLevel::Evaluate,
        BloomLevel::Create,
    ];

    /// Ordinal rank, 1 for Remember through 6 for Create.
    pub fn rank(self) -> u8 {
        self as u8 + 1
    }

    pub fn name(self) -> &'static str {
        match self {
            BloomLevel::Remember => "Remember",
            BloomLevel::Understand => "Understand",
            BloomLevel::Apply => "Apply",
            BloomLevel::Analyze => "Analyze",
            BloomLevel::Evaluate => "Evaluate",
            BloomLevel::Create => "Create",
        }
    }

    pub fn group(self) -> BloomGroup {
        bloom_group_of(self)
    }
}

impl fmt::Display for BloomLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BloomLevel {
    type Err = Error;

    /// Case-insensitive; surrounding whitespace is ignored.
    fn from_str(s: &str) -> Result<Self> {
        let trimmed = s.trim();
        BloomLevel::ALL
            .into_iter()
            .find(|level| level.name().eq_ignore_ascii_case(trimmed))
            .ok_or_else(|| Error::UnknownLevelName {
                name: trimmed.to_string(),
                line: None,
            })
    }
}

/// Coarse split of the taxonomy: the first two levels versus the other four.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum BloomGroup {
    Lower,
    Higher,
}

impl BloomGroup {
    pub fn other(self) -> BloomGroup {
        match self {
            BloomGroup::Lower => BloomGroup::Higher,
            BloomGroup::Higher => BloomGroup::Lower,
        }
    }
}

impl fmt::Display for BloomGroup {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BloomGroup::Lower => "Lower",
            BloomGroup::Higher => "Higher",
        })
    }
}

/// Remember and Understand are Lower; everything from Apply up is Higher.
pub fn bloom_group_of(level: BloomLevel) -> BloomGroup {
    match level {
        BloomLevel::Remember | BloomLevel::Understand => BloomGroup::Lower,
        BloomLevel::Apply | BloomLevel::Analyze | BloomLevel::Evaluate | BloomLevel::Create => {
            BloomGroup::Higher
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModuleKind {
    #[serde(rename = "conceptual module")]
    ConceptualModule,
    #[serde(rename = "project")]
    Project,
}

impl ModuleKind {
    pub const ALL: [ModuleKind; 2] = [ModuleKind::ConceptualModule, ModuleKind::Project];

    /// The label used in the user message and in every file format.
    pub fn label(self) -> &'static str {
        match self {
            ModuleKind::ConceptualModule => "conceptual module",
            ModuleKind::Project => "project",
        }
    }

    pub fn expected_group(self) -> BloomGroup {
        match self {
            ModuleKind::ConceptualModule => BloomGroup::Lower,
            ModuleKind::Project => BloomGroup::Higher,
        }
    }
}

impl fmt::Display for ModuleKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for ModuleKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "conceptual module" | "conceptual" => Ok(ModuleKind::ConceptualModule),
            "project" => Ok(ModuleKind::Project),
            other => Err(Error::Format {
                line: None,
                detail: format!("unknown module kind `{other}`"),
            }),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleSpec {
    pub module_id: String,
    pub name: String,
    pub kind: ModuleKind,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CourseSpec {
    pub course_name: String,
    pub course_goals: String,
    pub modules: Vec<ModuleSpec>,
}

#[derive(Deserialize)]
struct RawCourse {
    course_name: String,
    #[serde(default)]
    course_goals: String,
    modules: Vec<RawModule>,
}

#[derive(Deserialize)]
struct RawModule {
    #[serde(default)]
    id: Option<String>,
    name: String,
    kind: String,
}

impl CourseSpec {
    /// Validates the course invariants: nonempty name, at least one module,
    /// nonempty unique module names and unique module ids.
    pub fn new(
        course_name: impl Into<String>,
        course_goals: impl Into<String>,
        modules: Vec<ModuleSpec>,
    ) -> Result<Self> {
        let course = CourseSpec {
            course_name: course_name.into().trim().to_string(),
            course_goals: normalize_newlines(&course_goals.into()).trim().to_string(),
            modules,
        };
        course.validate()?;
        Ok(course)
    }

    fn validate(&self) -> Result<()> {
        let invalid = |detail: String| Err(Error::InvalidCourse(detail));
        if self.course_name.is_empty() {
            return invalid("course_name is empty".into());
        }
        if self.modules.is_empty() {
            return invalid("course has no modules".into());
        }
        let mut names = HashSet::new();
        let mut ids = HashSet::new();
        for module in &self.modules {
            if module.name.trim().is_empty() {
                return invalid("module name is empty".into());
            }
            if module.module_id.is_empty() || module.module_id.contains(['#', ',', '\n']) {
                return invalid(format!("invalid module id `{}`", module.module_id));
            }
            if !names.insert(module.name.as_str()) {
                return invalid(format!("duplicate module name `{}`", module.name));
            }
            if !ids.insert(module.module_id.as_str()) {
                return invalid(format!("duplicate module id `{}`", module.module_id));
            }
        }
        Ok(())
    }

    /// Parses a course document. TOML is used when `is_toml` is set,
    /// JSON otherwise. Modules without an explicit `id` get a slug of their
    /// name.
    pub fn parse(text: &str, is_toml: bool) -> Result<Self> {
        let raw: RawCourse = if is_toml {
            toml::from_str(text).map_err(|e| Error::Format {
                line: None,
                detail: e.to_string(),
            })?
        } else {
            serde_json::from_str(text).map_err(|e| Error::Format {
                line: Some(e.line()),
                detail: e.to_string(),
            })?
        };
        let mut modules = Vec::with_capacity(raw.modules.len());
        for module in raw.modules {
            let kind = module.kind.parse()?;
            let module_id = module.id.unwrap_or_else(|| slugify(&module.name));
            modules.push(ModuleSpec {
                module_id,
                name: module.name.trim().to_string(),
                kind,
            });
        }
        CourseSpec::new(raw.course_name, raw.course_goals, modules)
    }

    pub fn module(&self, module_id: &str) -> Option<&ModuleSpec> {
        self.modules.iter().find(|m| m.module_id == module_id)
    }
}

/// Lowercase ASCII alphanumerics with runs of anything else collapsed to `-`.
pub fn slugify(name: &str) -> String {
    let mut slug = String::with_capacity(name.len());
    for c in name.chars() {
        if c.is_ascii_alphanumeric() {
            slug.push(c.to_ascii_lowercase());
        } else if !slug.is_empty() && !slug.ends_with('-') {
            slug.push('-');
        }
    }
    while slug.ends_with('-') {
        slug.pop();
    }
    slug
}

pub(crate) fn normalize_newlines(text: &str) -> String {
    text.replace("\r\n", "\n").replace('\r', "\n")
}

/// `<module_id>#<position>`.
pub fn lo_id_for(module_id: &str, position: usize) -> String {
    format!("{module_id}#{position}")
}

/// One learning-objective statement. Field order is the canonical
/// serialization order of the corpus format.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LearningObjective {
    pub lo_id: String,
    pub module_id: String,
    pub position: usize,
    pub text: String,
}

impl LearningObjective {
    pub fn new(module_id: &str, position: usize, text: &str) -> Result<Self> {
        let lo = LearningObjective {
            lo_id: lo_id_for(module_id, position),
            module_id: module_id.to_string(),
            position,
            text: text.trim().to_string(),
        };
        lo.validate()?;
        Ok(lo)
    }

    fn validate(&self) -> Result<()> {
        let bad = |detail: &str| {
            Err(Error::Format {
                line: None,
                detail: format!("learning objective `{}`: {detail}", self.lo_id),
            })
        };
        if self.position == 0 {
            return bad("position must be at least 1");
        }
        if self.text.is_empty() {
            return bad("text is empty");
        }
        if self.text != self.text.trim() || self.text.contains('\n') {
            return bad("text must be a single trimmed line");
        }
        if crate::parser::starts_with_marker(&self.text) {
            return bad("text starts with a list marker");
        }
        Ok(())
    }
}

/// Checks corpus-level uniqueness of `lo_id` and of `(module_id, position)`.
pub fn validate_corpus(corpus: &[LearningObjective]) -> Result<()> {
    let mut ids = HashSet::new();
    let mut slots = HashSet::new();
    for lo in corpus {
        lo.validate()?;
        if !ids.insert(lo.lo_id.as_str()) {
            return Err(Error::Format {
                line: None,
                detail: format!("duplicate lo_id `{}`", lo.lo_id),
            });
        }
        if !slots.insert((lo.module_id.as_str(), lo.position)) {
            return Err(Error::Format {
                line: None,
                detail: format!("duplicate position {} in module `{}`", lo.position, lo.module_id),
            });
        }
    }
    Ok(())
}

/// Reads a line-delimited corpus file: one JSON object per line.
pub fn read_corpus(reader: impl BufRead) -> Result<Vec<LearningObjective>> {
    let mut corpus = Vec::new();
    for (index, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let lo: LearningObjective = serde_json::from_str(&line).map_err(|e| Error::Format {
            line: Some(index + 1),
            detail: e.to_string(),
        })?;
        lo.validate().map_err(|e| e.at_line(index + 1))?;
        corpus.push(lo);
    }
    validate_corpus(&corpus)?;
    Ok(corpus)
}

pub fn write_corpus(mut writer: impl Write, corpus: &[LearningObjective]) -> Result<()> {
    for lo in corpus {
        serde_json::to_writer(&mut writer, lo)?;
        writer.write_all(b"\n")?;
    }
    Ok(())
}

/// Model and sampling settings for one chat-completion request.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationParams {
    pub model_name: String,
    pub temperature: f64,
    pub max_completion_tokens: u32,
    pub top_p: f64,
    pub frequency_penalty: f64,
    pub presence_penalty: f64,
    pub context_limit_tokens: u32,
}

impl Default for GenerationParams {
    fn default() -> Self {
        GenerationParams {
            model_name: "gpt-4".to_string(),
            temperature: 0.7,
            max_completion_tokens: 2000,
            top_p: 1.0,
            frequency_penalty: 0.0,
            presence_penalty: 0.0,
            context_limit_tokens: 8192,
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |detail: String| Err(Error::InvalidParams(detail));
        if self.model_name.trim().is_empty() {
            return bad("model_name is empty".into());
        }
        if !(self.temperature >= 0.0) {
            return bad(format!("temperature {} must be >= 0", self.temperature));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return bad(format!("top_p {} must be in (0, 1]", self.top_p));
        }
        if self.max_completion_tokens == 0 || self.max_completion_tokens >= self.context_limit_tokens {
            return bad(format!(
                "max_completion_tokens {} must be in (0, context_limit_tokens = {})",
                self.max_completion_tokens, self.context_limit_tokens
            ));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(tag = "kind", content = "annotator_id", rename_all = "snake_case")]
pub enum AssignmentSource {
    Lexicon,
    ExternalClassifier,
    HumanAnnotator(String),
}

/// The Bloom levels attributed to one LO by one source.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BloomAssignment {
    pub lo_id: String,
    pub levels: BTreeSet<BloomLevel>,
    pub source: AssignmentSource,
}

impl BloomAssignment {
    pub fn new(
        lo_id: impl Into<String>,
        levels: BTreeSet<BloomLevel>,
        source: AssignmentSource,
    ) -> Result<Self> {
        if matches!(source, AssignmentSource::HumanAnnotator(_)) && levels.len() != 1 {
            return Err(Error::Format {
                line: None,
                detail: "a human annotation carries exactly one level".into(),
            });
        }
        Ok(BloomAssignment {
            lo_id: lo_id.into(),
            levels,
            source,
        })
    }

    pub fn groups(&self) -> BTreeSet<BloomGroup> {
        self.levels.iter().map(|l| bloom_group_of(*l)).collect()
    }
}

/// One annotator's single-level label for one LO.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub lo_id: String,
    pub annotator_id: String,
    pub level: BloomLevel,
}

impl AnnotationRecord {
    pub fn to_assignment(&self) -> BloomAssignment {
        BloomAssignment {
            lo_id: self.lo_id.clone(),
            levels: BTreeSet::from([self.level]),
            source: AssignmentSource::HumanAnnotator(self.annotator_id.clone()),
        }
    }
}
