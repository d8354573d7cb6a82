use std::path::Path;

use plml_core::config::ConfigDocument;

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in std::fs::read_dir(&dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().and_then(|e| e.to_str()) != Some("toml") {
            continue;
        }
        let doc = ConfigDocument::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        if let Some(sweep) = &doc.sweep {
            sweep.validate().unwrap();
            assert!(doc.output.csv.is_some(), "{}", path.display());
        }
        if let Some(problem) = &doc.problem {
            problem.build().unwrap();
        }
        seen += 1;
    }
    assert!(seen >= 5);
}
