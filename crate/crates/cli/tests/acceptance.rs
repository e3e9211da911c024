//! Runs acceptance criteria 1-10 and prints one PASS/FAIL line for each.
//!
//! The lines are written straight to stdout, so they show up even when the
//! test harness captures output.

#[path = "../../core/tests/checks/mod.rs"]
mod checks;

use std::io::Write;
use std::process::Command;

use checks::*;

fn dcbound(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_dcbound"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    out.status
        .code()
        .ok_or_else(|| "killed by a signal".to_string())
}

fn exit_code(label: &str, args: &[&str], want: i32) -> Check {
    match dcbound(args)? {
        got if got == want => Ok(()),
        got => Err(format!("{label}: exit code {got}, want {want}")),
    }
}

/// Criterion 10 through the binary: `undef` complexity exits with 2 and
/// an injected fault exits with 3. A malformed file exits with 1.
fn criterion_10() -> Check {
    let library = criterion_10_library();
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fault = dir.path().join("fault.txt");
    std::fs::write(&fault, "TB(t1) = n\nTB(t2) = 0\ncomplexity = n\n")
        .map_err(|e| e.to_string())?;
    let broken = dir.path().join("broken.dcp");
    std::fs::write(
        &broken,
        "dcp\nvars: x\nentry: a\nexit: z\ntrans t0: a -> z { x' <= 1; x' <= 2; }\n",
    )
    .map_err(|e| e.to_string())?;

    let cyclic = sample_path("cyclic.dcp");
    let example_a = sample_path("example_a.dcp");
    let mut checks = vec![library];
    for mode in ["free", "ctx", "opt"] {
        checks.push(exit_code(
            &format!("cyclic {mode}"),
            &["analyze", cyclic.to_str().unwrap(), "--mode", mode],
            2,
        ));
    }
    checks.push(exit_code(
        "injected fault",
        &[
            "validate",
            example_a.to_str().unwrap(),
            "--assign",
            "n=1",
            "--bounds",
            fault.to_str().unwrap(),
        ],
        3,
    ));
    checks.push(exit_code(
        "non-deterministic input",
        &["analyze", broken.to_str().unwrap()],
        1,
    ));
    let errs: Vec<String> = checks.into_iter().filter_map(Result::err).collect();
    if errs.is_empty() {
        Ok(())
    } else {
        Err(errs.join("; "))
    }
}

#[test]
fn acceptance() {
    let criteria: [(u32, fn() -> Check); 10] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
    ];
    let mut out = std::io::stdout().lock();
    let mut failed = Vec::new();
    for (n, f) in criteria {
        match guarded(f) {
            Ok(()) => writeln!(out, "criterion {n}: PASS").unwrap(),
            Err(e) => {
                writeln!(out, "criterion {n}: FAIL ({e})").unwrap();
                failed.push(n);
            }
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
