use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use sha2::{Digest, Sha256};

const BIN: &str = env!("CARGO_BIN_EXE_hcbh-lab");

const SMALL: &str = r#"schema_version = 1
kind = "KIND"

[lattice]
rows = 2
cols = 3
j_nnn = 0.05

[drive]
omega = 0.5
t = 3.0
deltas = [0.0, 1.5]
sample_dt = 0.5

[subsystems]
max_volume = 3
"#;

fn small(kind: &str, extra: &str) -> String {
    format!("{}{extra}", SMALL.replace("KIND", kind))
}

fn write_config(dir: &Path, name: &str, text: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p
}

fn hcbh(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn run_into(config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", config.to_str().unwrap(), "--out-dir", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = hcbh(&args);
    assert!(o.status.success(), "run failed: {}", String::from_utf8_lossy(&o.stderr));
    o
}

fn manifest(out: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap()
}

fn listed_files(out: &Path) -> Vec<String> {
    manifest(out)["files"].as_array().unwrap().iter().map(|f| f["path"].as_str().unwrap().to_string()).collect()
}

fn assert_same_outputs(a: &Path, b: &Path) {
    let files = listed_files(a);
    assert_eq!(files, listed_files(b));
    for f in files.iter().chain(std::iter::once(&"manifest.json".to_string())) {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for entry in fs::read_dir(dir).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let o = hcbh(&["validate", path.to_str().unwrap()]);
            assert!(o.status.success(), "{}: {}", path.display(), String::from_utf8_lossy(&o.stderr));
            n += 1;
        }
    }
    assert!(n >= 8);
}

#[test]
fn config_errors_exit_one_with_line() {
    let tmp = tempfile::tempdir().unwrap();
    let cases = [
        ("syntax.toml", small("spectrum", "").replace("rows = 2", "rows = = 2"), "line 5"),
        ("type.toml", small("spectrum", "").replace("t = 3.0", "t = \"three\""), "line 11"),
        ("version.toml", small("spectrum", "").replace("schema_version = 1", "schema_version = 2"), "line 1"),
        ("kind.toml", small("plot", ""), "line 2"),
        ("unknown.toml", small("spectrum", "colour = 3\n"), "colour"),
        ("missing.toml", small("sampling-study", ""), "[tomography]"),
        (
            "device.toml",
            "schema_version = 1\nkind = \"spectrum\"\ndevice = \"nowhere.toml\"\n".to_string(),
            "nowhere.toml",
        ),
    ];
    for (name, text, needle) in cases {
        let p = write_config(tmp.path(), name, &text);
        for cmd in ["validate", "run"] {
            let o = hcbh(&[cmd, p.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()]);
            assert_eq!(o.status.code(), Some(1), "{name} {cmd}");
            let err = String::from_utf8_lossy(&o.stderr);
            assert!(err.contains(needle), "{name}: {err}");
        }
    }
    let p = write_config(tmp.path(), "ok.toml", &small("spectrum", ""));
    assert_eq!(hcbh(&["run", p.to_str().unwrap(), "--workers", "0"]).status.code(), Some(1));
}

#[test]
fn numerical_failure_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("drive-dynamics", "\n[evolution]\nstep = 0.5\ntolerance = 1e-12\n");
    let p = write_config(tmp.path(), "unstable.toml", &text);
    let o = hcbh(&["run", p.to_str().unwrap(), "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stderr).contains("numerical failure"));
}

#[test]
fn spectrum_run_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let p = write_config(tmp.path(), "spectrum.toml", &small("spectrum", "\n[spectrum]\ncompare_without_nnn = true\n"));
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_into(&p, &a, &[]);
    run_into(&p, &b, &[]);
    assert_same_outputs(&a, &b);

    let m = manifest(&a);
    for f in m["files"].as_array().unwrap() {
        let bytes = fs::read(a.join(f["path"].as_str().unwrap())).unwrap();
        let hex: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        assert_eq!(f["sha256"].as_str().unwrap(), hex);
    }
    let csv = fs::read_to_string(a.join("spectrum.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("n,index,energy"));
    assert_eq!(csv.lines().count(), 1 + 64);
    // Without NNN the bipartite hopping spectrum is symmetric in every sector.
    let skew = fs::read_to_string(a.join("skew.csv")).unwrap();
    for line in skew.lines().filter(|l| l.starts_with("no-nnn")) {
        let v: f64 = line.rsplit(',').next().unwrap().parse().unwrap();
        assert!(v.abs() < 1e-9, "{line}");
    }
}

#[test]
fn manifest_hash_tracks_config_content() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("spectrum", "");
    let p1 = write_config(tmp.path(), "one.toml", &text);
    let p2 = write_config(tmp.path(), "two.toml", &text);
    let p3 = write_config(tmp.path(), "three.toml", &format!("{text}# comment\n"));
    let hash = |p: &Path, name: &str, extra: &[&str]| {
        let out = tmp.path().join(name);
        run_into(p, &out, extra);
        manifest(&out)["config_sha256"].as_str().unwrap().to_string()
    };
    let h1 = hash(&p1, "o1", &[]);
    assert_eq!(h1, hash(&p2, "o2", &[]));
    assert_eq!(h1, hash(&p1, "o4", &["--workers", "1"]));
    assert_ne!(h1, hash(&p3, "o3", &[]));
    assert_ne!(h1, hash(&p1, "o5", &["--seed", "9"]));
}

#[test]
fn outputs_do_not_depend_on_workers() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("tomography-study", "\n[tomography]\nn_s = [200]\nseeds = [3, 4]\n");
    let p = write_config(tmp.path(), "tomo.toml", &text);
    let (a, b) = (tmp.path().join("w1"), tmp.path().join("w2"));
    run_into(&p, &a, &["--workers", "1"]);
    run_into(&p, &b, &["--workers", "2"]);
    assert_same_outputs(&a, &b);
    let files = listed_files(&a);
    assert!(files.contains(&"tomography.csv".to_string()));
    assert!(files.iter().any(|f| f.starts_with("records/")));
    assert!(files.iter().any(|f| f.starts_with("reconstructions/")));

    let c = tmp.path().join("seeded");
    run_into(&p, &c, &["--seed", "5"]);
    let csv = fs::read_to_string(c.join("tomography.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.split(',').nth(2) == Some("5")));
}

#[test]
fn every_kind_runs_on_a_small_lattice() {
    let tmp = tempfile::tempdir().unwrap();
    let chain = "schema_version = 1\nkind = \"scaling-study\"\n[lattice]\nrows = 1\ncols = 8\n\
                 [scaling]\nr = [0.0, 1.0]\nv_max = [3, 4]\nseeds = [2]\n";
    let cases: Vec<(&str, String, &str)> = vec![
        ("dynamics", small("drive-dynamics", "\n[comparison]\nwindow = [1.0, 3.0]\n"), "dynamics.csv"),
        ("sweep", small("detuning-sweep", ""), "entropy.csv"),
        ("sampling", small("sampling-study", "\n[tomography]\nn_s = [50, 500]\nseeds = [1, 2]\n"), "sampling.csv"),
        ("schmidt", small("schmidt-study", "\n[schmidt]\nvolume = 3\n"), "schmidt_summary.csv"),
        (
            "chain",
            small("1d-comparison", "\n[comparison]\nwindow = [1.0, 2.0]\nreference_time = 1.0\nchain_sites = 6\nchain_j_nnn = [0.0, 0.2]\n"),
            "comparison_summary.csv",
        ),
        ("scaling", chain.to_string(), "scaling.csv"),
    ];
    for (name, text, file) in cases {
        let p = write_config(tmp.path(), &format!("{name}.toml"), &text);
        let out = tmp.path().join(name);
        run_into(&p, &out, &[]);
        assert!(listed_files(&out).contains(&file.to_string()), "{name}");
        let csv = fs::read_to_string(out.join(file)).unwrap();
        assert!(csv.lines().count() > 1, "{name}: empty {file}");
    }

    let dynamics = fs::read_to_string(tmp.path().join("dynamics/dynamics.csv")).unwrap();
    let header = dynamics.lines().next().unwrap();
    assert!(header.starts_with("omega,delta,t,n_0") && header.ends_with("n_5,total_n"));
    // Two detunings, samples at t = 0, 0.5, ..., 3.
    assert_eq!(dynamics.lines().count(), 1 + 2 * 7);

    let summary = fs::read_to_string(tmp.path().join("chain/comparison_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 1 + 3);
}

#[test]
fn csv_only_output_skips_json() {
    let tmp = tempfile::tempdir().unwrap();
    let text = small("detuning-sweep", "").replace("[lattice]", "formats = [\"csv\"]\n\n[lattice]");
    let p = write_config(tmp.path(), "csv.toml", &text);
    let out = tmp.path().join("o");
    run_into(&p, &out, &[]);
    assert!(listed_files(&out).iter().all(|f| f.ends_with(".csv")));
}
