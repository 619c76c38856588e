use std::path::PathBuf;

use bloomlo::prompt::{build_prompt_pair, build_system_prompt, render_user_message};
use bloomlo::{CourseSpec, GenerationParams};

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn course() -> CourseSpec {
    let text = std::fs::read_to_string(fixture("ai_practitioner.toml")).unwrap();
    CourseSpec::parse(&text, true).unwrap()
}

#[test]
fn system_prompt_matches_golden() {
    let golden = std::fs::read_to_string(fixture("golden/system_prompt.txt")).unwrap();
    assert_eq!(build_system_prompt(None).unwrap(), golden);
}

#[test]
fn user_message_matches_golden() {
    let course = course();
    let module = course.module("generative-models").unwrap();
    let golden = std::fs::read_to_string(fixture("golden/user_generative_models_conceptual.txt")).unwrap();
    let rendered = render_user_message(&course, module).unwrap();
    assert_eq!(rendered, golden);
    assert!(rendered.lines().any(|l| l == "MODULE NAME: Generative Models"));
    assert!(rendered.lines().any(|l| l == "LOs TYPE: conceptual module"));
    assert!(rendered.contains("- Integrated different types of AI/ML systems"));
}

#[test]
fn project_module_renders_its_kind() {
    let course = course();
    let module = course.module("ai-ml-in-the-cloud").unwrap();
    let rendered = render_user_message(&course, module).unwrap();
    assert!(rendered.lines().any(|l| l == "MODULE NAME: AI/ML in the Cloud"));
    assert!(rendered.lines().any(|l| l == "LOs TYPE: project"));
}

/// Frozen from an independent character count of the two goldens:
/// ceil((6138 + 1287) / 4).
#[test]
fn default_estimate_is_frozen() {
    let course = course();
    let module = course.module("generative-models").unwrap();
    let pair = build_prompt_pair(&course, module, &GenerationParams::default()).unwrap();
    assert_eq!(pair.estimated_tokens, 1857);
}
