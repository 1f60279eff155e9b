//! One PASS/FAIL line per acceptance criterion.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use xlog::bench::{run_criterion, CRITERIA, DEFAULT_SEED};

/// Written past the test harness's capture so the lines show on success too.
fn report(line: String) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{line}");
    let _ = out.flush();
}

fn time_limit(id: u8) -> Option<Duration> {
    match id {
        1 => Some(Duration::from_secs(30)),
        2 => Some(Duration::from_secs(60)),
        7 => Some(Duration::from_secs(300)),
        _ => None,
    }
}

fn files_under(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![root.to_path_buf()];
    while let Some(dir) = stack.pop() {
        for entry in fs::read_dir(&dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                stack.push(path);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_path_buf();
                out.insert(rel, fs::read(&path).unwrap());
            }
        }
    }
    out
}

fn bench_twice() -> (bool, String) {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let dir = tmp.path().join(name);
        let status = Command::new(env!("CARGO_BIN_EXE_xlog"))
            .args(["bench", "--seed", &DEFAULT_SEED.to_string(), "--out"])
            .arg(&dir)
            .output()
            .unwrap();
        assert!(status.status.success(), "bench failed: {}", String::from_utf8_lossy(&status.stderr));
        files_under(&dir)
    };
    let a = run("a");
    let b = run("b");
    let outputs = |m: &BTreeMap<PathBuf, Vec<u8>>| {
        m.keys()
            .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("json" | "csv" | "svg")))
            .count()
    };
    let differing: Vec<_> = a.iter().filter(|(k, v)| b.get(*k) != Some(v)).map(|(k, _)| k.display().to_string()).collect();
    let same = a.len() == b.len() && differing.is_empty() && outputs(&a) > 0;
    let detail = if same {
        format!("{} files ({} json/csv/svg) identical", a.len(), outputs(&a))
    } else {
        format!("{} vs {} files; differing {:?}", a.len(), b.len(), differing)
    };
    (same, detail)
}

#[test]
fn acceptance() {
    let tmp = tempfile::tempdir().unwrap();
    let mut failed = Vec::new();
    for &(id, name) in &CRITERIA {
        let t0 = Instant::now();
        let r = run_criterion(id, DEFAULT_SEED, tmp.path()).unwrap();
        let elapsed = t0.elapsed();
        let in_time = time_limit(id).is_none_or(|limit| elapsed < limit);
        let passed = r.passed && in_time;
        let limit = time_limit(id).map_or(String::new(), |l| format!(" (limit {}s)", l.as_secs()));
        report(format!(
            "{} [{:>2}] {name}: {} [{:.1}s{limit}]",
            if passed { "PASS" } else { "FAIL" },
            id,
            r.detail,
            elapsed.as_secs_f64()
        ));
        if !passed {
            failed.push(id);
        }
    }

    let t0 = Instant::now();
    let (same, detail) = bench_twice();
    report(format!(
        "{} [11] bench twice with one seed gives byte-identical outputs: {detail} [{:.1}s]",
        if same { "PASS" } else { "FAIL" },
        t0.elapsed().as_secs_f64()
    ));
    if !same {
        failed.push(11);
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
