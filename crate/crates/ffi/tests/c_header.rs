use std::path::PathBuf;
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "conslaw.h"

int main(void) {
    ConslawExpr *e = NULL, *d = NULL;
    char *s = NULL;
    if (conslaw_expr_parse("u*u_x", &e) != CONSLAW_STATUS_OK) return 1;
    if (conslaw_total_derivative(e, CONSLAW_DIRECTION_X, &d) != CONSLAW_STATUS_OK) return 2;
    if (conslaw_expr_render(d, &s) != CONSLAW_STATUS_OK) return 3;
    int same = strcmp(s, "u*u_xx + u_x^2") == 0;
    conslaw_string_free(s);
    conslaw_expr_free(e);
    conslaw_expr_free(d);
    if (!same) return 4;
    ConslawPde *p = NULL;
    if (conslaw_pde_parse("u_tx = sin(u)", NULL, &p) != CONSLAW_STATUS_OK) return 5;
    ConslawExpr *lam = NULL;
    conslaw_expr_parse("u_xxx + 1/2*u_x^3", &lam);
    bool ok = false;
    if (conslaw_verify_multiplier(p, lam, &ok, NULL) != CONSLAW_STATUS_OK || !ok) return 6;
    conslaw_expr_free(lam);
    conslaw_pde_free(p);
    if (conslaw_expr_parse("u +", &e) != CONSLAW_STATUS_PARSE_ERROR) return 7;
    if (strlen(conslaw_last_error()) == 0) return 8;
    puts("c client ok");
    return 0;
}
"#;

#[test]
fn c_client_links_against_static_library() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap().to_path_buf();
    let lib = profile_dir.join("libconslaw_ffi.a");
    assert!(lib.exists(), "static library missing at {}", lib.display());
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let bin = dir.path().join("client");
    let status = Command::new(&cc)
        .arg(&src)
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compilation failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "client exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "c client ok");
}

fn which_cc() -> Result<String, ()> {
    for cand in ["cc", "gcc", "clang"] {
        if Command::new(cand).arg("--version").output().is_ok_and(|o| o.status.success()) {
            return Ok(cand.to_string());
        }
    }
    Err(())
}
