use std::collections::BTreeSet;
use std::path::Path;

fn read(rel: &str) -> String {
    std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join(rel)).unwrap()
}

/// Chapter files linked from SUMMARY.md.
fn summary_chapters() -> BTreeSet<String> {
    let s = read("../../book/src/SUMMARY.md");
    s.split("](").skip(1).map(|rest| rest.split(')').next().unwrap().to_string()).collect()
}

/// Chapter files included by the guide crate.
fn included_chapters() -> BTreeSet<String> {
    let s = read("src/lib.rs");
    s.split("book/src/").skip(1).map(|rest| rest.split('"').next().unwrap().to_string()).collect()
}

#[test]
fn summary_matches_guide_modules() {
    let a = summary_chapters();
    let b = included_chapters();
    assert!(!a.is_empty());
    assert_eq!(a, b, "SUMMARY.md and crates/guide/src/lib.rs list different chapters");
}

#[test]
fn every_chapter_exists_and_has_code() {
    for c in summary_chapters() {
        let body = read(&format!("../../book/src/{c}"));
        assert!(body.starts_with("# "), "{c} has no title");
        assert!(body.contains("```rust"), "{c} has no runnable snippet");
    }
}

#[test]
fn module_names_follow_file_names() {
    let s = read("src/lib.rs");
    for c in included_chapters() {
        let m = c.trim_end_matches(".md");
        assert!(s.contains(&format!("pub mod {m} {{}}")), "no module for {c}");
    }
}
