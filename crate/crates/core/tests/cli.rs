use std::path::{Path, PathBuf};
use std::process::Command;

const SMALL: &str = r#"
seed = 7

[measure]
period = 12

[geometry]
n_range = "1..6"
sample_count = 20

[bracket]
samples = 50

[inclusions]
samples = 300
"#;

fn config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn run(cfg: &Path, command: &str, out: &Path, extra: &[&str]) -> i32 {
    let status = Command::new(env!("CARGO_BIN_EXE_toral-gibbs"))
        .arg("--config")
        .arg(cfg)
        .args(["--command", command, "--out"])
        .arg(out)
        .args(extra)
        .output()
        .unwrap();
    status.status.code().unwrap()
}

fn report(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(out.join("report.json")).unwrap()).unwrap()
}

#[test]
fn report_is_byte_identical_across_runs_and_thread_counts() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(run(&cfg, "estimate-gibbs", &a, &["--threads", "1"]), 0);
    assert_eq!(run(&cfg, "estimate-gibbs", &b, &["--threads", "3"]), 0);
    for f in ["report.json", "checks.csv", "gibbs_ratio_phi0.csv", "gibbs_ratio_phi0.svg"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn seed_flag_overrides_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = config(tmp.path(), "small.toml", SMALL);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run(&cfg, "check-bracket", &a, &["--seed", "1"]);
    run(&cfg, "check-bracket", &b, &["--seed", "2"]);
    let (ra, rb) = (report(&a), report(&b));
    assert_eq!(ra["config"]["seed"], 1);
    assert_eq!(rb["config"]["seed"], 2);
    assert_ne!(ra["checks"][0]["worst_margin"], rb["checks"][0]["worst_margin"]);
}

#[test]
fn exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("out");
    let ok = config(tmp.path(), "ok.toml", SMALL);
    assert_eq!(run(&ok, "check-bracket", &out, &[]), 0);
    assert_eq!(report(&out)["pass"], true);

    let wrong_p = config(tmp.path(), "p.toml", &format!("{SMALL}\n[overrides]\nP_offset = 0.5\n"));
    assert_eq!(run(&wrong_p, "estimate-gibbs", &out, &[]), 1);
    assert_eq!(report(&out)["pass"], false);

    let unknown = config(tmp.path(), "bad.toml", &format!("{SMALL}\n[nonsense]\nx = 1\n"));
    assert_eq!(run(&unknown, "check-bracket", &out, &[]), 2);
    assert_eq!(run(&ok, "no-such-command", &out, &[]), 2);
    assert_eq!(run(&tmp.path().join("missing.toml"), "check-bracket", &out, &[]), 2);

    let big_r = SMALL.replace("[geometry]", "[geometry]\nr = 0.049");
    let big_r = config(tmp.path(), "r.toml", &big_r);
    assert_eq!(run(&big_r, "check-product-gibbs", &out, &[]), 3);
    let rep = report(&out);
    assert!(rep["checks"].as_array().unwrap().iter().any(|c| c["params"]["hypothesis_unsatisfied"].is_string()));
}

#[test]
fn output_files_are_well_formed() {
    let tmp = tempfile::tempdir().unwrap();
    let body = SMALL;
    let cfg = config(tmp.path(), "small.toml", body);
    let out = tmp.path().join("out");
    run(&cfg, "check-density", &out, &[]);
    let rep = report(&out);
    for key in ["command", "config", "constants", "checks", "diagnostics", "files", "pass"] {
        assert!(rep.get(key).is_some(), "report lacks {key}");
    }
    for c in rep["checks"].as_array().unwrap() {
        for key in ["check", "params", "samples", "violations", "worst_margin", "pass", "anchor"] {
            assert!(c.get(key).is_some(), "check lacks {key}");
        }
    }
    let mut n_csv = 0;
    let mut n_svg = 0;
    for f in rep["files"].as_array().unwrap() {
        let name = f.as_str().unwrap();
        let bytes = std::fs::read(out.join(name)).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        if name.ends_with(".csv") {
            n_csv += 1;
            assert!(text.ends_with("\r\n"), "{name}");
            assert_eq!(text.matches('\n').count(), text.matches("\r\n").count(), "{name} has bare LF");
            let mut rd = csv::Reader::from_reader(text.as_bytes());
            let width = rd.headers().unwrap().len();
            for rec in rd.records() {
                assert_eq!(rec.unwrap().len(), width, "{name}");
            }
        } else if name.ends_with(".svg") {
            n_svg += 1;
            assert!(text.starts_with("<svg xmlns=\"http://www.w3.org/2000/svg\""), "{name}");
            assert!(text.trim_end().ends_with("</svg>"), "{name}");
            assert!(text.contains("<!-- data\n"), "{name}");
            let comment = &text[text.find("<!--").unwrap() + 4..text.find("-->").unwrap()];
            assert!(!comment.contains("--"), "{name}");
        }
    }
    assert!(n_csv >= 2 && n_svg >= 2, "{n_csv} csv, {n_svg} svg");
}
