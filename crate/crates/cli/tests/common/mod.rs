#![allow(dead_code)]

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bloomlo::llm::{record, ChatRequest, ChatResponse, FinishReason};
use bloomlo::prompt::PromptBuilder;
use bloomlo::{CourseSpec, GenerationParams};

pub fn cli_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

pub fn core_fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(rel)
}

pub fn bloomlo(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bloomlo"))
        .current_dir(dir)
        .args(args)
        .env_remove("OPENAI_API_KEY")
        .output()
        .expect("binary runs")
}

pub fn code(output: &Output) -> i32 {
    output.status.code().unwrap_or(-1)
}

pub fn stderr(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

pub fn load_course(path: &Path) -> CourseSpec {
    CourseSpec::parse(&fs::read_to_string(path).unwrap(), true).unwrap()
}

/// Requests exactly as `generate` builds them with the default prompt and
/// parameters.
pub fn module_requests(course: &CourseSpec) -> Vec<(String, ChatRequest)> {
    let builder = PromptBuilder::new(None, None).unwrap();
    let params = GenerationParams::default();
    course
        .modules
        .iter()
        .map(|m| {
            let pair = builder.build(course, m, &params).unwrap();
            (m.module_id.clone(), ChatRequest::new(pair.system_text, pair.user_text, params.clone()))
        })
        .collect()
}

/// Writes a replay store holding `completions/<module_id>.txt` for every
/// module of the course.
pub fn write_store(course_path: &Path, completions_dir: &Path, store: &Path) {
    let course = load_course(course_path);
    for (module_id, request) in module_requests(&course) {
        let text = fs::read_to_string(completions_dir.join(format!("{module_id}.txt"))).unwrap();
        let response = ChatResponse {
            completion_text: text,
            provider_label: "gpt-4-0613".into(),
            finish_reason: FinishReason::Stop,
        };
        record(&request, &response, store).unwrap();
    }
}

pub const E2E_STORE: &str = "e2e/store.json";
