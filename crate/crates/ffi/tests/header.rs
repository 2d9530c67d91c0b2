use std::path::Path;
use std::process::Command;

const HEADER: &str = include_str!("../include/sfplan.h");
const SOURCE: &str = include_str!("../src/lib.rs");

fn exported_functions() -> Vec<&'static str> {
    SOURCE
        .split("extern \"C\" fn ")
        .skip(1)
        .map(|rest| rest.split('(').next().unwrap().trim())
        .collect()
}

#[test]
fn header_declares_every_export() {
    let names = exported_functions();
    assert!(names.len() >= 15, "{names:?}");
    for name in names {
        assert!(
            HEADER.contains(&format!(" {name}(")) || HEADER.contains(&format!("*{name}(")),
            "{name} missing from header"
        );
    }
}

#[test]
fn header_keeps_handles_opaque() {
    assert!(HEADER.contains("typedef struct SfplanConfig SfplanConfig;"));
    assert!(HEADER.contains("typedef struct SfplanSelection SfplanSelection;"));
    assert!(HEADER.contains("SFPLAN_STATUS_NO_FEASIBLE_SF = 4"));
}

#[test]
fn header_compiles_as_c() {
    let Ok(cc) = which_cc() else {
        eprintln!("no C compiler found; skipping");
        return;
    };
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("use.c");
    let include = Path::new(env!("CARGO_MANIFEST_DIR")).join("include");
    std::fs::write(
        &src,
        "#include \"sfplan.h\"\nint main(void) { SfplanConfig *c = sfplan_config_new_default(); double t; \
         SfplanStatus s = sfplan_time_on_air(c, 7, 20, &t); sfplan_config_free(c); return s == SFPLAN_STATUS_OK ? 0 : 1; }\n",
    )
    .unwrap();
    let status = Command::new(cc)
        .arg("-fsyntax-only")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(include)
        .arg(&src)
        .status()
        .unwrap();
    assert!(status.success());
}

fn which_cc() -> Result<&'static str, ()> {
    ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| {
            Command::new(c)
                .arg("--version")
                .output()
                .is_ok_and(|o| o.status.success())
        })
        .ok_or(())
}
