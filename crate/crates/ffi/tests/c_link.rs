//! Compiles `tests/c/smoke.c` against the generated header and the static
//! library, then runs it.

use std::path::{Path, PathBuf};
use std::process::Command;

fn static_lib() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let deps = exe.parent()?;
    [deps.join("libtrilin_ffi.a"), deps.parent()?.join("libtrilin_ffi.a")]
        .into_iter()
        .find(|p| p.exists())
}

#[test]
fn header_declares_public_surface() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/trilin.h")).unwrap();
    for item in [
        "typedef struct TrilinMatrix TrilinMatrix;",
        "TRILIN_STATUS_OK = 0",
        "TRILIN_STATUS_INCONCLUSIVE = 5",
        "TrilinStatus trilin_solve(",
        "TrilinStatus trilin_membership(",
        "TrilinStatus trilin_bicgstab(",
        "void trilin_matrix_free(",
        "const char *trilin_last_error_message(void);",
    ] {
        assert!(header.contains(item), "header lacks `{item}`");
    }
}

#[test]
fn c_program_links_and_runs() {
    let Some(lib) = static_lib() else {
        eprintln!("static library not found next to the test binary; skipping");
        return;
    };
    if Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler; skipping");
        return;
    }
    let root = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let out = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(root.join("include"))
        .arg(root.join("tests/c/smoke.c"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "cc failed:\n{}", String::from_utf8_lossy(&out.stderr));
    let run = Command::new(&bin).output().unwrap();
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(run.status.success(), "smoke failed: {}{}", stdout, String::from_utf8_lossy(&run.stderr));
    assert!(stdout.starts_with("ok "));
}
