//! Encoder output pinned against checked-in SMT-LIB files.
//! Regenerate with `UPDATE_GOLDEN=1 cargo test -p minisol --test golden`.

use std::path::PathBuf;

use minisol::infer::{initial_sigma, query_script, validity_script};
use minisol::pipeline::load;
use minisol::templates::Templates;
use minisol::typecheck::{generate_with, GenOptions, Mode, ObKind};

fn root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn check_golden(name: &str, actual: &str) {
    let path = root().join("tests/golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|_| panic!("missing golden file {}", path.display()));
    assert!(expected == actual, "{} differs from the encoder output:\n{actual}", path.display());
}

fn scripts(file: &str, mode: Mode) -> String {
    let src = std::fs::read_to_string(root().join("../../corpus").join(file)).unwrap();
    let c = load(&src).unwrap();
    let templates = Templates::new(c.struct_table(), true);
    let cs = generate_with(&c, GenOptions::new(mode), &templates).unwrap();
    let mut out = String::new();
    match mode {
        Mode::Check => {
            let sigma = initial_sigma(&cs);
            for ob in &cs.obligations {
                let with_prior = matches!(ob.kind, ObKind::Soft(_)) || cs.mode == Mode::Check;
                out += &format!("; {ob}\n");
                out += &validity_script(ob, &cs, &templates, &sigma, with_prior).unwrap().unwrap_or_default();
            }
        }
        Mode::Infer => {
            for ob in cs.soft() {
                out += &format!("; {ob}\n");
                out += &query_script(&cs, &templates, Default::default(), ob).unwrap();
            }
        }
    }
    out
}

#[test]
fn erc20_validity_scripts() {
    check_golden("erc20_check.smt2", &scripts("erc20.msol", Mode::Check));
}

#[test]
fn erc20_horn_queries() {
    check_golden("erc20_auto_infer.smt2", &scripts("erc20_auto.msol", Mode::Infer));
}

#[test]
fn nested_horn_queries() {
    check_golden("nested_infer.smt2", &scripts("nested.msol", Mode::Infer));
}
