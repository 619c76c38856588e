//! Action-verb lexicon: base-form verbs mapped to the Bloom levels they
//! conventionally signal.
//!
//! File format, line oriented:
//!
//! ```text
//! # comment
//! version: 1
//! prompt_example_verbs: define describe explain
//! ---
//! define,Remember
//! identify,Remember|Analyze
//! ```
//!
//! Everything before `---` is the header. `prompt_example_verbs` lines
//! accumulate and must name verbs that also have an entry.

use std::collections::{BTreeMap, BTreeSet};

use crate::error::{Error, Result};
use crate::model::BloomLevel;

pub const DEFAULT_LEXICON_SOURCE: &str = include_str!("../data/lexicon.txt");

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct VerbLexicon {
    version: String,
    entries: BTreeMap<String, BTreeSet<BloomLevel>>,
    prompt_example_verbs: BTreeSet<String>,
}

fn is_valid_key(verb: &str) -> bool {
    !verb.is_empty() && verb.chars().all(|c| c.is_ascii_lowercase() || c == '-')
}

impl VerbLexicon {
    /// Builds a lexicon, rejecting malformed keys, empty level sets and
    /// prompt example verbs without an entry.
    pub fn new(
        version: impl Into<String>,
        entries: BTreeMap<String, BTreeSet<BloomLevel>>,
        prompt_example_verbs: BTreeSet<String>,
    ) -> Result<Self> {
        for (verb, levels) in &entries {
            if !is_valid_key(verb) {
                return Err(Error::InvalidLexicon(format!(
                    "`{verb}` is not a lowercase single-token verb"
                )));
            }
            if levels.is_empty() {
                return Err(Error::InvalidLexicon(format!("`{verb}` has no levels")));
            }
        }
        if let Some(missing) = prompt_example_verbs.iter().find(|v| !entries.contains_key(*v)) {
            return Err(Error::InvalidLexicon(format!(
                "prompt example verb `{missing}` has no lexicon entry"
            )));
        }
        Ok(VerbLexicon {
            version: version.into(),
            entries,
            prompt_example_verbs,
        })
    }

    pub fn bundled() -> Self {
        Self::parse(DEFAULT_LEXICON_SOURCE).expect("bundled lexicon is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut version = String::from("unversioned");
        let mut examples = BTreeSet::new();
        let mut entries = BTreeMap::new();
        let mut in_header = true;

        for (index, raw) in text.lines().enumerate() {
            let line_no = index + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let format_err = |detail: String| Error::Format {
                line: Some(line_no),
                detail,
            };
            if in_header {
                if line == "---" {
                    in_header = false;
                    continue;
                }
                let (key, value) = line
                    .split_once(':')
                    .ok_or_else(|| format_err(format!("expected `key: value`, got `{line}`")))?;
                match key.trim() {
                    "version" => version = value.trim().to_string(),
                    "prompt_example_verbs" => {
                        for verb in value.split([' ', ',', '\t']).filter(|v| !v.is_empty()) {
                            examples.insert(verb.to_ascii_lowercase());
                        }
                    }
                    other => return Err(format_err(format!("unknown header key `{other}`"))),
                }
                continue;
            }
            let (verb, levels) = line
                .split_once(',')
                .ok_or_else(|| format_err(format!("expected `verb,Level[|Level...]`, got `{line}`")))?;
            let verb = verb.trim().to_string();
            if !is_valid_key(&verb) {
                return Err(format_err(format!("`{verb}` is not a lowercase single-token verb")));
            }
            let levels = parse_level_set(levels).map_err(|e| e.at_line(line_no))?;
            if levels.is_empty() {
                return Err(format_err(format!("`{verb}` has no levels")));
            }
            if entries.insert(verb.clone(), levels).is_some() {
                return Err(format_err(format!("duplicate entry for `{verb}`")));
            }
        }
        if in_header {
            return Err(Error::InvalidLexicon("missing `---` separator".into()));
        }
        VerbLexicon::new(version, entries, examples)
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn levels(&self, verb: &str) -> Option<&BTreeSet<BloomLevel>> {
        self.entries.get(verb)
    }

    pub fn contains(&self, verb: &str) -> bool {
        self.entries.contains_key(verb)
    }

    pub fn is_prompt_example(&self, verb: &str) -> bool {
        self.prompt_example_verbs.contains(verb)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &BTreeSet<BloomLevel>)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn prompt_example_verbs(&self) -> &BTreeSet<String> {
        &self.prompt_example_verbs
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Verbs mapped to more than one level.
    pub fn ambiguous_verbs(&self) -> impl Iterator<Item = &str> {
        self.entries
            .iter()
            .filter(|(_, levels)| levels.len() > 1)
            .map(|(verb, _)| verb.as_str())
    }
}

/// Parses `Level|Level...`; an empty or blank field yields the empty set.
pub fn parse_level_set(field: &str) -> Result<BTreeSet<BloomLevel>> {
    field
        .split('|')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::parse)
        .collect()
}
