mod common;

use common::cases::{golden_cases, golden_dir};
use egoqa_gateway::build_prompt;

// Set EGOQA_UPDATE_GOLDEN=1 to rewrite the files after an intended change.
#[test]
fn prompts_match_golden_files() {
    let update = std::env::var_os("EGOQA_UPDATE_GOLDEN").is_some();
    let mut mismatched = Vec::new();
    for (name, kind, inputs) in golden_cases() {
        let rendered = build_prompt(kind, &inputs).unwrap().to_golden();
        let path = golden_dir().join(format!("{name}.json"));
        if update {
            std::fs::write(&path, &rendered).unwrap();
            continue;
        }
        let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if expected != rendered {
            mismatched.push(name);
        }
    }
    assert!(mismatched.is_empty(), "golden mismatch: {mismatched:?}");
}

#[test]
fn rendering_is_stable_across_calls() {
    for (_, kind, inputs) in golden_cases() {
        assert_eq!(build_prompt(kind, &inputs).unwrap(), build_prompt(kind, &inputs).unwrap());
    }
}
