use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn stkde(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stkde")).args(args).output().unwrap()
}

fn synth(dir: &Path) -> (String, String) {
    let out = dir.join("data");
    let o = stkde(&[
        "synth", "--cols", "20", "--rows", "20", "--days", "60", "--seed", "5",
        "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    (
        out.join("incidents.csv").to_str().unwrap().to_string(),
        out.join("landuse.asc").to_str().unwrap().to_string(),
    )
}

#[test]
fn estimate_writes_one_raster_per_bin() {
    let dir = tempfile::tempdir().unwrap();
    let (incidents, landuse) = synth(dir.path());
    let out = dir.path().join("est");
    let o = stkde(&[
        "estimate", "--incidents", &incidents, "--landuse", &landuse, "--bandwidths", "300,300,10",
        "--t-bin", "2", "--bins", "5", "--out", out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let mut names: Vec<String> = fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    assert_eq!(names, (0..5).map(|k| format!("density_t{k}.asc")).collect::<Vec<_>>());
}

#[test]
fn optimize_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (incidents, landuse) = synth(dir.path());
    let args = ["optimize", "--incidents", &incidents, "--landuse", &landuse, "--lattice", "5"];
    let a = stkde(&args);
    let b = stkde(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    for key in ["h_x", "h_y", "h_t", "log_likelihood", "evaluations"] {
        assert!(text.lines().any(|l| l.starts_with(key)), "{text}");
    }
}

#[test]
fn exit_codes_separate_usage_and_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let (incidents, landuse) = synth(dir.path());
    let out = dir.path().join("x");
    let out = out.to_str().unwrap();

    assert_eq!(stkde(&["no-such-command"]).status.code(), Some(1));
    assert_eq!(stkde(&["estimate", "--incidents", &incidents]).status.code(), Some(1));
    let bad_bw = stkde(&[
        "estimate", "--incidents", &incidents, "--landuse", &landuse, "--bandwidths", "1,2", "--out", out,
    ]);
    assert_eq!(bad_bw.status.code(), Some(1));
    let bad_alpha = stkde(&[
        "significance", "--incidents", &incidents, "--landuse", &landuse, "--bandwidths", "300,300,10",
        "--alpha", "1.5", "--out", out,
    ]);
    assert_eq!(bad_alpha.status.code(), Some(1));

    let missing = dir.path().join("missing.csv");
    let o = stkde(&[
        "estimate", "--incidents", missing.to_str().unwrap(), "--landuse", &landuse, "--bandwidths", "300,300,10",
        "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(2));

    let broken = dir.path().join("broken.asc");
    fs::write(&broken, "ncols 3\nnrows x\n").unwrap();
    let o = stkde(&[
        "estimate", "--incidents", &incidents, "--landuse", broken.to_str().unwrap(), "--bandwidths", "300,300,10",
        "--out", out,
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!o.stderr.is_empty());
}
