//! Rendering of the two-part prompt: the fixed system prompt with the
//! LO-authoring guidelines and the per-module user message.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{normalize_newlines, CourseSpec, GenerationParams, ModuleSpec};

/// Annotated source of the default system prompt. Lines starting with `%%`
/// are provenance notes and are dropped by [`build_system_prompt`].
pub const DEFAULT_SYSTEM_PROMPT_SOURCE: &str = include_str!("../data/system_prompt.txt");

/// Default user-message template. Placeholders: `{{course_name}}`,
/// `{{course_goals}}`, `{{module}}`, `{{module_type}}`.
pub const DEFAULT_USER_TEMPLATE: &str = include_str!("../data/user_message.txt");

/// Appended verbatim after every rendered user message.
pub const EXPECTED_OUTPUT_STANZA: &str = include_str!("../data/expected_output.txt");

const ANNOTATION_PREFIX: &str = "%%";

/// Share of the context window that prompt plus completion may occupy.
const BUDGET_NUMERATOR: u32 = 9;
const BUDGET_DENOMINATOR: u32 = 10;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptPair {
    pub system_text: String,
    pub user_text: String,
    pub estimated_tokens: u32,
}

/// Returns the override verbatim (line endings normalized), or the bundled
/// default with its annotation lines removed.
pub fn build_system_prompt(template_override: Option<&str>) -> Result<String> {
    match template_override {
        Some(text) if text.is_empty() => Err(Error::EmptyTemplate),
        Some(text) => Ok(normalize_newlines(text)),
        None => Ok(strip_annotations(DEFAULT_SYSTEM_PROMPT_SOURCE)),
    }
}

fn strip_annotations(source: &str) -> String {
    let normalized = normalize_newlines(source);
    let kept: Vec<&str> = normalized
        .lines()
        .filter(|line| !line.starts_with(ANNOTATION_PREFIX))
        .collect();
    kept.join("\n").trim().to_string()
}

/// Renders the default user-message template for `module` of `course`.
pub fn render_user_message(course: &CourseSpec, module: &ModuleSpec) -> Result<String> {
    render_user_message_with(DEFAULT_USER_TEMPLATE, course, module)
}

/// Renders `template` for `module`, then appends the expected-output stanza.
pub fn render_user_message_with(
    template: &str,
    course: &CourseSpec,
    module: &ModuleSpec,
) -> Result<String> {
    if template.trim().is_empty() {
        return Err(Error::EmptyTemplate);
    }
    if !course.modules.contains(module) {
        return Err(Error::ModuleNotInCourse(module.name.clone()));
    }
    let body = substitute(&normalize_newlines(template), |name| match name {
        "course_name" => Some(course.course_name.as_str()),
        "course_goals" => Some(course.course_goals.as_str()),
        "module" => Some(module.name.as_str()),
        "module_type" => Some(module.kind.label()),
        _ => None,
    })?;
    let mut text = body.trim_end().to_string();
    text.push('\n');
    text.push_str(EXPECTED_OUTPUT_STANZA.trim_end());
    if text.contains("{{") || text.contains("}}") {
        return Err(Error::Format {
            line: None,
            detail: "rendered user message still contains placeholder braces".into(),
        });
    }
    Ok(text)
}

/// Single-pass `{{name}}` substitution; substituted values are never
/// rescanned.
fn substitute<'a>(template: &str, lookup: impl Fn(&str) -> Option<&'a str>) -> Result<String> {
    let mut out = String::with_capacity(template.len() * 2);
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let end = after.find("}}").ok_or_else(|| Error::Format {
            line: None,
            detail: "unterminated `{{` in template".into(),
        })?;
        let name = after[..end].trim();
        let value = lookup(name).ok_or_else(|| Error::Format {
            line: None,
            detail: format!("unknown template placeholder `{name}`"),
        })?;
        out.push_str(value);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

/// Tokenizer-free estimate: one token per four characters, rounded up.
pub fn estimate_tokens(text: &str) -> u32 {
    let chars = text.chars().count() as u32;
    chars.div_ceil(4)
}

/// Prompt plus completion must fit in 90% of the context window.
pub fn usable_budget(params: &GenerationParams) -> u32 {
    params.context_limit_tokens * BUDGET_NUMERATOR / BUDGET_DENOMINATOR
}

/// Holds the system prompt and user template used for a run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PromptBuilder {
    system_text: String,
    user_template: String,
}

impl Default for PromptBuilder {
    fn default() -> Self {
        PromptBuilder {
            system_text: strip_annotations(DEFAULT_SYSTEM_PROMPT_SOURCE),
            user_template: DEFAULT_USER_TEMPLATE.to_string(),
        }
    }
}

impl PromptBuilder {
    pub fn new(system_override: Option<&str>, user_template_override: Option<&str>) -> Result<Self> {
        let system_text = build_system_prompt(system_override)?;
        let user_template = match user_template_override {
            Some(t) if t.trim().is_empty() => return Err(Error::EmptyTemplate),
            Some(t) => normalize_newlines(t),
            None => DEFAULT_USER_TEMPLATE.to_string(),
        };
        Ok(PromptBuilder {
            system_text,
            user_template,
        })
    }

    pub fn system_text(&self) -> &str {
        &self.system_text
    }

    pub fn build(
        &self,
        course: &CourseSpec,
        module: &ModuleSpec,
        params: &GenerationParams,
    ) -> Result<PromptPair> {
        let user_text = render_user_message_with(&self.user_template, course, module)?;
        let chars = self.system_text.chars().count() + user_text.chars().count();
        let estimated_tokens = (chars as u32).div_ceil(4);
        let budget = usable_budget(params);
        if estimated_tokens + params.max_completion_tokens > budget {
            return Err(Error::ContextBudgetExceeded {
                estimated: estimated_tokens,
                completion: params.max_completion_tokens,
                budget,
                limit: params.context_limit_tokens,
            });
        }
        Ok(PromptPair {
            system_text: self.system_text.clone(),
            user_text,
            estimated_tokens: estimated_tokens.max(1),
        })
    }
}

/// Builds the default prompt pair for one module and checks the context
/// budget.
pub fn build_prompt_pair(
    course: &CourseSpec,
    module: &ModuleSpec,
    params: &GenerationParams,
) -> Result<PromptPair> {
    PromptBuilder::default().build(course, module, params)
}
