use std::path::Path;
use std::process::{Command, Output};

use fairaudit::scenarios;

fn fairaudit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairaudit"))
        .args(args)
        .env_remove("FAIRAUDIT_SEED")
        .env_remove("FAIRAUDIT_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn missing_config_exits_2() {
    let out = fairaudit(&["audit", "--config", "/no/such/run.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot read config"));
}

#[test]
fn malformed_dgp_exits_2_naming_the_rule() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios::get("neutral").unwrap().export(dir.path()).unwrap();
    let dgp = dir.path().join("neutral.dgp.toml");
    let text = std::fs::read_to_string(&dgp).unwrap().replace("[0.5, 0.5]", "[0.5, 0.6]");
    std::fs::write(&dgp, text).unwrap();
    let out = fairaudit(&["audit", "--config", path(&config)]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("gender") && err.contains("probabilities sum ≠ 1"), "{err}");
}

#[test]
fn missing_report_is_io_error() {
    assert_eq!(fairaudit(&["report", "render", "/no/such/report.json"]).status.code(), Some(3));
}

#[test]
fn strict_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let clean = fairaudit(&["scenario", "run", "neutral", "--strict", "--out-dir", path(&dir.path().join("n"))]);
    assert_eq!(clean.status.code(), Some(0));
    let flagged = fairaudit(&["scenario", "run", "label_bias", "--strict", "--out-dir", path(&dir.path().join("l"))]);
    assert_eq!(flagged.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&flagged.stdout).starts_with("IndirectPrimaFacie"));
    let lenient = fairaudit(&["scenario", "run", "label_bias", "--out-dir", path(&dir.path().join("l2"))]);
    assert_eq!(lenient.status.code(), Some(0));
}

#[test]
fn exported_scenario_audits_identically() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairaudit(&["scenario", "export", "true_difference", "--out-dir", path(dir.path())]);
    assert_eq!(out.status.code(), Some(0));
    let config = dir.path().join("true_difference.config.toml");
    let via_config = fairaudit(&["audit", "--config", path(&config)]);
    assert_eq!(via_config.status.code(), Some(0));
    let via_scenario = fairaudit(&["scenario", "run", "true_difference"]);
    assert_eq!(via_config.stdout, via_scenario.stdout);
    let programmatic = scenarios::get("true_difference").unwrap().run(None).unwrap();
    assert_eq!(String::from_utf8(via_config.stdout).unwrap(), programmatic.to_json());
}

#[test]
fn report_render_matches_written_markdown() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    assert_eq!(fairaudit(&["scenario", "run", "finnish_credit", "--out-dir", path(&out_dir)]).status.code(), Some(0));
    let rendered = fairaudit(&["report", "render", path(&out_dir.join("report.json"))]);
    assert_eq!(rendered.status.code(), Some(0));
    assert_eq!(rendered.stdout, std::fs::read(out_dir.join("report.md")).unwrap());
}

#[test]
fn gen_fit_audit_with_supplied_files() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios::get("label_bias").unwrap().export(dir.path()).unwrap();
    let csv = dir.path().join("audit.csv");
    let model = dir.path().join("model.json");
    let gen = fairaudit(&["gen", "--dgp", path(&dir.path().join("label_bias.dgp.toml")), "--n", "3000", "--seed", "4", "--out", path(&csv)]);
    assert_eq!(gen.status.code(), Some(0), "{}", String::from_utf8_lossy(&gen.stderr));
    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("ethnicity,income,postcode_area,y,y_proxy,pi_true"));
    assert_eq!(fairaudit(&["fit", "--config", path(&config), "--out", path(&model)]).status.code(), Some(0));
    let out = fairaudit(&["audit", "--config", path(&config), "--data", path(&csv), "--model", path(&model)]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = fairaudit::AuditReport::from_json(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(report.provenance.n_audit, 3000);
    assert_eq!(report.finding.classification, fairaudit::Classification::IndirectPrimaFacie);
}

#[test]
fn environment_overrides_seed_and_output() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_fairaudit"))
        .args(["scenario", "run", "neutral"])
        .env("FAIRAUDIT_SEED", "99")
        .env("FAIRAUDIT_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let report = fairaudit::AuditReport::load(&dir.path().join("report.json")).unwrap();
    assert_eq!(report.provenance.seed, 99);

    let bad = Command::new(env!("CARGO_BIN_EXE_fairaudit"))
        .args(["scenario", "run", "neutral"])
        .env("FAIRAUDIT_SEED", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn scenario_list_names_every_scenario() {
    let out = String::from_utf8(fairaudit(&["scenario", "list"]).stdout).unwrap();
    for s in scenarios::all() {
        assert!(out.contains(s.name) && out.contains(s.expected.as_str()));
    }
}
