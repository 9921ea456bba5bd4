#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::Output;

pub const PIPELINE: [&[&str]; 9] = [
    &["prepare"],
    &["randomize"],
    &["validate-balance"],
    &["run"],
    &["run", "--control-baseline"],
    &["score-similarity"],
    &["analyze"],
    &["report"],
    &["report", "--format", "latex"],
];

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

pub fn rct(config: Option<&Path>, out: &Path, args: &[&str]) -> Output {
    let mut cmd = std::process::Command::new(env!("CARGO_BIN_EXE_rct"));
    if let Some(c) = config {
        cmd.arg("--config").arg(c);
    }
    cmd.arg("--out-dir").arg(out).args(args);
    cmd.output().expect("rct binary runs")
}

/// Runs every pipeline step, failing with the step's stderr on a non-zero exit.
pub fn run_pipeline(config: &Path, out: &Path) -> Result<(), String> {
    for step in PIPELINE {
        let o = rct(Some(config), out, step);
        if !o.status.success() {
            return Err(format!(
                "`rct {}` exited {:?}: {}",
                step.join(" "),
                o.status.code(),
                String::from_utf8_lossy(&o.stderr)
            ));
        }
    }
    Ok(())
}

/// Relative path and bytes of every regular file under `root`, sorted.
pub fn tree(root: &Path) -> Vec<(String, Vec<u8>)> {
    fn walk(dir: &Path, root: &Path, out: &mut Vec<(String, Vec<u8>)>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(&path, root, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.push((rel, std::fs::read(&path).unwrap()));
            }
        }
    }
    let mut out = Vec::new();
    walk(root, root, &mut out);
    out.sort();
    out
}

/// Mean cost per arm from the rendered arm summary CSV.
pub fn arm_costs(out: &Path) -> Vec<(String, f64)> {
    let text = std::fs::read_to_string(out.join("tables/complete-case/arm_summary.csv")).unwrap();
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "mean_cost").unwrap();
    lines
        .map(|l| {
            let cells: Vec<&str> = l.split(',').collect();
            (cells[0].to_string(), cells[col].parse().unwrap())
        })
        .collect()
}

pub fn cost_of(costs: &[(String, f64)], arm: &str) -> f64 {
    costs.iter().find(|(a, _)| a == arm).map(|(_, c)| *c).unwrap()
}

/// Compares the rendered tables against the committed golden copies;
/// `RCT_BLESS=1` rewrites them.
pub fn check_golden(out: &Path) -> Result<(), String> {
    let tables = out.join("tables/complete-case");
    let golden = golden_dir();
    if std::env::var_os("RCT_BLESS").is_some() {
        std::fs::create_dir_all(&golden).unwrap();
        for (name, bytes) in tree(&tables) {
            std::fs::write(golden.join(name), bytes).unwrap();
        }
    }
    let got = tree(&tables);
    let want = tree(&golden);
    if got.iter().map(|g| &g.0).ne(want.iter().map(|w| &w.0)) {
        return Err(format!(
            "table set differs: {:?} vs golden {:?}",
            got.iter().map(|g| &g.0).collect::<Vec<_>>(),
            want.iter().map(|w| &w.0).collect::<Vec<_>>()
        ));
    }
    for ((name, a), (_, b)) in got.iter().zip(&want) {
        if a != b {
            return Err(format!("{name} differs from its golden copy"));
        }
    }
    Ok(())
}
