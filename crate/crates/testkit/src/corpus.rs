//! Access to the bundled corpus under `corpus/` at the workspace root.
//!
//! * `corpus/programs/<stem>.mc` are MiniC programs.
//! * `corpus/inputs/<stem>.txt` is the standard input of the program with the
//!   same stem; programs without one read empty input.
//! * `corpus/rules/<stem>.<topic>.fmn` are rule sets written for one program.
//! * `corpus/rules/common/*.fmn` are rule sets paired with every program.
//! * `corpus/suites/*.fmn` are rule suites combining several rule files.
//! * `corpus/golden/` holds pinned expected outputs.

use std::fs;
use std::path::{Path, PathBuf};

pub fn root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

#[derive(Debug, Clone)]
pub struct CorpusProgram {
    pub stem: String,
    pub path: PathBuf,
    pub source: String,
    pub input: String,
    pub input_path: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct CorpusRules {
    /// File name without the extension.
    pub name: String,
    pub path: PathBuf,
    pub text: String,
}

fn sorted_files(dir: &Path, ext: &str) -> Vec<PathBuf> {
    let mut out: Vec<PathBuf> = match fs::read_dir(dir) {
        Ok(entries) => entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == ext))
            .collect(),
        Err(_) => Vec::new(),
    };
    out.sort();
    out
}

fn read(path: &Path) -> String {
    fs::read_to_string(path).unwrap_or_else(|e| panic!("cannot read {}: {e}", path.display()))
}

/// Every corpus program in file-name order.
pub fn programs() -> Vec<CorpusProgram> {
    let root = root();
    sorted_files(&root.join("programs"), "mc")
        .into_iter()
        .map(|path| {
            let stem = path.file_stem().unwrap().to_string_lossy().into_owned();
            let input_path = root.join("inputs").join(format!("{stem}.txt"));
            let (input, input_path) =
                if input_path.exists() { (read(&input_path), Some(input_path)) } else { (String::new(), None) };
            CorpusProgram { source: read(&path), stem, path, input, input_path }
        })
        .collect()
}

pub fn program(stem: &str) -> CorpusProgram {
    programs().into_iter().find(|p| p.stem == stem).unwrap_or_else(|| panic!("no corpus program {stem}"))
}

fn load_rules(path: PathBuf) -> CorpusRules {
    let name = path.file_stem().unwrap().to_string_lossy().into_owned();
    CorpusRules { text: read(&path), name, path }
}

/// Rule sets written for the program `stem`, followed by the common ones.
pub fn rules_for(stem: &str) -> Vec<CorpusRules> {
    let dir = root().join("rules");
    let prefix = format!("{stem}.");
    let mut out: Vec<CorpusRules> = sorted_files(&dir, "fmn")
        .into_iter()
        .filter(|p| p.file_name().unwrap().to_string_lossy().starts_with(&prefix))
        .map(load_rules)
        .collect();
    out.extend(sorted_files(&dir.join("common"), "fmn").into_iter().map(load_rules));
    out
}

/// A rule file by its name without extension, e.g. `tokenizer.statistics`.
pub fn rules(name: &str) -> CorpusRules {
    load_rules(root().join("rules").join(format!("{name}.fmn")))
}

pub fn golden_path(name: &str) -> PathBuf {
    root().join("golden").join(name)
}

pub fn golden(name: &str) -> String {
    read(&golden_path(name))
}

/// Topics of the tokenizer example rules, in suite order.
pub const TOKENIZER_TOPICS: [&str; 5] = ["page_numbers", "long_line", "statistics", "call_pattern", "print_lines"];

/// A rule suite under `corpus/suites/`, by name without extension.
pub fn suite(name: &str) -> CorpusRules {
    load_rules(root().join("suites").join(format!("{name}.fmn")))
}

/// Environment variable that makes [`compare_golden`] rewrite golden files.
pub const BLESS_VAR: &str = "EVTRACE_BLESS";

/// Compares `actual` with the golden file `name`. With [`BLESS_VAR`] set the
/// file is rewritten instead.
pub fn compare_golden(name: &str, actual: &str) -> Result<(), String> {
    let path = golden_path(name);
    if std::env::var_os(BLESS_VAR).is_some() {
        fs::write(&path, actual).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
        return Ok(());
    }
    let expected = fs::read_to_string(&path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    if expected == actual {
        Ok(())
    } else {
        let line = expected.lines().zip(actual.lines()).position(|(a, b)| a != b);
        Err(format!(
            "{} differs from the golden file (first differing line: {})",
            name,
            line.map_or_else(|| "length".to_string(), |i| (i + 1).to_string())
        ))
    }
}
