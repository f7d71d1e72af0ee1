use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run(dir: &Path, config: Option<&str>, args: &[&str]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_moran"));
    cmd.arg("--out").arg(dir.join("out")).env_remove("MORAN_OUT").env_remove("MORAN_WORKERS");
    if let Some(text) = config {
        let p = dir.join("run.toml");
        fs::write(&p, text).unwrap();
        cmd.arg("--config").arg(p);
    }
    cmd.args(args).output().unwrap()
}

fn json(dir: &Path, name: &str) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("out").join(name)).unwrap()).unwrap()
}

#[test]
fn partition_toy_case() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), None, &["partition"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(t.path(), "partition.json");
    assert_eq!(v["command"], "partition");
    let cert = &v["data"]["certificate"];
    assert_eq!(cert["J"], 30);
    assert_eq!(cert["length"], 330);
    assert_eq!(cert["ok"], true);
    let csv = fs::read_to_string(t.path().join("out/partition.csv")).unwrap();
    assert!(csv.starts_with("# moran "));
    assert_eq!(csv.lines().nth(1), Some("class,size"));
}

#[test]
fn zero_samples_is_not_an_error() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), Some("[normality]\nsamples = 0\n"), &["normality"]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(t.path().join("out/normality.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
}

#[test]
fn del_single_term() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), Some("[del]\nn_max = 1\n"), &["del"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json(t.path(), "del.json");
    let s = v["data"]["report"]["partial_sum"].as_f64().unwrap();
    assert!((s - 1.0).abs() < 1e-9, "{s}");
}

#[test]
fn malformed_config_exits_2() {
    let t = tempfile::tempdir().unwrap();
    for bad in ["seed = \"x\"", "[schedule]\nvariant = \"nope\"", "[fourier]\nxi = [\"12a\"]", "unknown = 1"] {
        let cmd = if bad.contains("fourier") { "fourier" } else { "schedule" };
        let o = run(t.path(), Some(bad), &[cmd]);
        assert_eq!(o.status.code(), Some(2), "{bad}");
    }
}

#[test]
fn precondition_exits_3() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), Some("[context]\nb = [1]\n"), &["context"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn cube_window_is_flagged() {
    let t = tempfile::tempdir().unwrap();
    let o = run(t.path(), Some("[schedule]\nvariant = \"cube-window\"\noffset = 2\n"), &["schedule"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("deviates"));
    let v = json(t.path(), "schedule.json");
    assert!(v["data"]["note"].is_string());
    let d = tempfile::tempdir().unwrap();
    run(d.path(), None, &["schedule"]);
    assert!(json(d.path(), "schedule.json")["data"]["note"].is_null());
}

#[test]
fn reports_are_reproducible() {
    let cfg = "seed = 11\n[normality]\nsamples = 3\n[uniqueness]\nsamples = 5\n";
    for cmd in ["normality", "uniqueness", "fourier"] {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(run(a.path(), Some(cfg), &[cmd, "--workers", "1"]).status.code(), Some(0));
        assert_eq!(run(b.path(), Some(cfg), &[cmd, "--workers", "4"]).status.code(), Some(0));
        for ext in ["json", "csv"] {
            let f = format!("out/{cmd}.{ext}");
            assert_eq!(fs::read(a.path().join(&f)).unwrap(), fs::read(b.path().join(&f)).unwrap(), "{f}");
        }
    }
}

#[test]
fn seed_flag_overrides_config() {
    let t = tempfile::tempdir().unwrap();
    run(t.path(), Some("seed = 1\n"), &["uniqueness", "--seed", "9"]);
    assert_eq!(json(t.path(), "uniqueness.json")["seed"], 9);
}

#[test]
fn dimension_dim_one() {
    let t = tempfile::tempdir().unwrap();
    let cfg = "[schedule]\ncount = 6\n[system]\nkind = \"dim-one\"\n[dimension]\nsamples = 3\nr_points = 8\n";
    let o = run(t.path(), Some(cfg), &["dimension"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let v = json(t.path(), "dimension.json");
    assert_eq!(v["data"]["convolution_ok"], true);
    assert!(v["data"]["max_mass_ratio"].as_f64().unwrap() <= 1.0);
    for f in ["dimension.csv", "dimension_local.csv", "dimension_h_rate.csv"] {
        assert!(t.path().join("out").join(f).exists(), "{f}");
    }
}

#[test]
fn del_block_table() {
    let t = tempfile::tempdir().unwrap();
    let cfg = "[schedule]\ncount = 18\n[del]\nn_max = 20\nblocks = { r_from = 1, r_to = 2, m = [1, 2] }\n";
    assert_eq!(run(t.path(), Some(cfg), &["del"]).status.code(), Some(0));
    let csv = fs::read_to_string(t.path().join("out/del_blocks.csv")).unwrap();
    assert_eq!(csv.lines().nth(1), Some("r,m,block_sum,bound_with_derived_constants"));
    assert_eq!(csv.lines().count(), 6);
}

#[test]
fn uncertifiable_tail_exits_4() {
    let t = tempfile::tempdir().unwrap();
    let cfg = "[del]\nn_max = 20\nblocks = { r_from = 2, r_to = 3, m = [1] }\n";
    let o = run(t.path(), Some(cfg), &["del"]);
    assert_eq!(o.status.code(), Some(4), "{}", String::from_utf8_lossy(&o.stderr));
}
