//! Compiles a small C program against the generated header and the static
//! library. Skipped when no C compiler is on PATH.

use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <math.h>
#include <stdio.h>
#include <string.h>
#include "rhc.h"

int main(void) {
    const char *json = "{\"version\": 1, \"contour\": [{\"center\": [0, 0], \"radius\": 1, "
                       "\"orientation\": \"ccw\", \"nodes\": 64}], \"jump\": \"(z - 1.6) / (z - 2.5)\"}";
    RhcProblem *p = NULL;
    if (rhc_problem_from_json(json, "solve", &p) != RHC_STATUS_OK) return 10;
    RhcSolution *s = NULL;
    if (rhc_solve(p, &s) != RHC_STATUS_OK) return 11;
    double m[2];
    if (rhc_solution_eval(s, 0.0, 0.0, m, 2) != RHC_STATUS_OK) return 12;
    /* m(0) = 1.6 / 2.5 */
    if (fabs(m[0] - 0.64) > 1e-12 || fabs(m[1]) > 1e-12) return 13;
    if (rhc_solution_eval(s, 1.0, 0.0, m, 2) != RHC_STATUS_INPUT_ERROR) return 14;
    if (rhc_last_error_message() == NULL) return 15;
    rhc_solution_free(s);
    rhc_problem_free(p);

    char *report = NULL;
    if (rhc_run_json(json, "index", &report) != RHC_STATUS_OK) return 16;
    if (strstr(report, "\"dim_ker\": 0") == NULL) return 17;
    rhc_string_free(report);
    printf("ok\n");
    return 0;
}
"#;

fn compiler() -> Option<String> {
    ["cc", "clang", "gcc"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .map(String::from)
}

/// Directory holding the library artifacts of the current profile.
fn artifact_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn header_compiles_and_links() {
    let Some(cc) = compiler() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    let lib = artifact_dir().join("librhc_ffi.a");
    assert!(include.join("rhc.h").exists());
    if !lib.exists() {
        eprintln!("{} not built; skipping link step", lib.display());
        return;
    }
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("c_api");
    std::fs::create_dir_all(&dir).unwrap();
    let src = dir.join("smoke.c");
    let bin = dir.join("smoke");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new(&cc)
        .args(["-std=c99", "-Wall", "-Werror", "-o"])
        .arg(&bin)
        .arg(&src)
        .arg("-I")
        .arg(&include)
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl"])
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(
        out.status.success(),
        "smoke program exited with {:?}",
        out.status.code()
    );
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "ok");
}
