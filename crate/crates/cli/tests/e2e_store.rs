mod common;

use bloomlo::llm::ReplayStore;
use common::*;

/// Rebuilds the committed replay store after a prompt or fixture change:
/// `cargo test -p bloomlo-cli --test e2e_store -- --ignored`.
#[test]
#[ignore]
fn regenerate_replay_store() {
    let store = cli_fixture(E2E_STORE);
    let _ = std::fs::remove_file(&store);
    write_store(&cli_fixture("e2e/course.toml"), &cli_fixture("e2e/completions"), &store);
}

#[test]
fn committed_store_matches_current_prompts_and_completions() {
    let course = load_course(&cli_fixture("e2e/course.toml"));
    let store = ReplayStore::load(&cli_fixture(E2E_STORE)).unwrap();
    let requests = module_requests(&course);
    assert_eq!(store.entries.len(), requests.len());
    for (module_id, request) in requests {
        let entry = store
            .entries
            .get(&request.request_key)
            .unwrap_or_else(|| panic!("store lacks {module_id}; regenerate it"));
        let text = std::fs::read_to_string(cli_fixture(&format!("e2e/completions/{module_id}.txt"))).unwrap();
        assert_eq!(entry.completion_text, text, "{module_id}");
    }
}
