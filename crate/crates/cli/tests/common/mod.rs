#![allow(dead_code)]

use std::path::PathBuf;

pub fn fixture(rel: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(rel)
        .display()
        .to_string()
}

pub struct Outcome {
    pub code: i32,
    pub stdout: Vec<u8>,
    pub stderr: String,
}

impl Outcome {
    pub fn text(&self) -> String {
        String::from_utf8(self.stdout.clone()).unwrap()
    }
}

pub fn run(args: &[&str]) -> Outcome {
    let mut stdout = Vec::new();
    let mut stderr = Vec::new();
    let argv = std::iter::once("spankg").chain(args.iter().copied());
    let code = spankg_cli::run(argv, &mut stdout, &mut stderr);
    Outcome {
        code,
        stdout,
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

pub fn lexicon_args() -> Vec<String> {
    vec![
        "--glossary".into(),
        fixture("lexicon/glossary.json"),
        "--aliases".into(),
        fixture("lexicon/aliases.json"),
    ]
}
