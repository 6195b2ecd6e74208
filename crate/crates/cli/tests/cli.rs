use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_kextremes"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn simulate(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let out = dir.join(name);
    let mut args = vec!["simulate", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args);
    assert!(o.status.success(), "{}", stderr(&o));
    out
}

#[test]
fn run_is_deterministic() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for d in &dirs {
        let o = run(&[
            "run",
            "-i",
            data("synthetic.csv").to_str().unwrap(),
            "-c",
            data("synthetic.toml").to_str().unwrap(),
            "-o",
            d.path().to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let mut compared = 0;
    for sub in ["", "plotdata"] {
        for entry in std::fs::read_dir(dirs[0].path().join(sub)).unwrap() {
            let p = entry.unwrap().path();
            if p.extension().is_some_and(|e| e == "csv") {
                let rel = p.strip_prefix(dirs[0].path()).unwrap();
                let other = std::fs::read(dirs[1].path().join(rel)).unwrap();
                assert_eq!(std::fs::read(&p).unwrap(), other, "{}", rel.display());
                compared += 1;
            }
        }
    }
    assert!(compared >= 11);
    assert!(dirs[0].path().join("manifest.txt").exists());
}

#[test]
fn simulate_then_fit() {
    let d = tempfile::tempdir().unwrap();
    let f = simulate(d.path(), "s.csv", &["-n", "2000", "--shape", "0.2", "--seed", "3"]);
    let o = run(&["fit", "-i", f.to_str().unwrap(), "--set", "location_form=constant", "--set", "scale_form=constant"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).contains("standard errors"));
    let o = run(&["fit", "-i", f.to_str().unwrap(), "--fixed-shape", "0.2", "--set", "location_form=constant"]);
    assert!(stdout(&o).contains("(fixed)"));
}

#[test]
fn analysis_subcommands_print_tables() {
    let input = data("synthetic.csv");
    let config = data("synthetic.toml");
    let common = ["-i", input.to_str().unwrap(), "-c", config.to_str().unwrap()];
    for (cmd, header) in [
        ("theta", "k,theta"),
        ("scaling", "form,chosen"),
        ("gof", "k,n,ks_statistic"),
        ("successive", "free shape"),
        ("returns", "k,source,kind"),
    ] {
        let mut args = vec![cmd];
        args.extend_from_slice(&common);
        if cmd == "successive" {
            args.extend_from_slice(&["-k", "4"]);
        }
        if cmd == "returns" {
            args.extend_from_slice(&["--set", "samples_per_param=2", "--set", "k_report=15"]);
        }
        let o = run(&args);
        assert!(o.status.success(), "{cmd}: {}", stderr(&o));
        assert!(stdout(&o).contains(header), "{cmd}: {}", stdout(&o));
    }
}

#[test]
fn compare_reports_every_method() {
    let d = tempfile::tempdir().unwrap();
    let common = [
        "--process", "armax", "--phi", "0.5", "--shape", "0.3", "--location", "33.3", "--scale", "10",
        "--seed", "9",
    ];
    let mut long_args = common.to_vec();
    long_args.extend_from_slice(&["-n", "2000", "--t-range", "0,20"]);
    let long = simulate(d.path(), "long.csv", &long_args);
    let mut short_args = common.to_vec();
    short_args.extend_from_slice(&["-n", "400", "--t-range", "0,4"]);
    let short = simulate(d.path(), "short.csv", &short_args);
    let o = run(&[
        "compare",
        "--short",
        short.to_str().unwrap(),
        "--long",
        long.to_str().unwrap(),
        "--k",
        "2,6",
        "--set",
        "location_form=constant",
        "--set",
        "scale_form=constant",
        "--set",
        "frechet_check=point",
        "--set",
        "k_max=6",
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = stdout(&o);
    for m in ["full_proposed", "fixed_shape_mle", "plain_mle"] {
        assert_eq!(out.lines().filter(|l| l.starts_with(m)).count(), 2, "{out}");
    }
}

#[test]
fn exit_codes() {
    let o = run(&["theta", "-i", "/nonexistent/x.csv"]);
    assert_eq!(o.status.code(), Some(3));

    let input = data("synthetic.csv");
    let o = run(&["theta", "-i", input.to_str().unwrap(), "--set", "no_such_key=1"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("no_such_key"));

    let d = tempfile::tempdir().unwrap();
    let f = simulate(d.path(), "neg.csv", &["-n", "2000", "--shape", "-0.3", "--t-range", "0,10"]);
    let o = run(&["run", "-i", f.to_str().unwrap(), "-o", d.path().join("out").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("A3"));

    let o = run(&["simulate", "--out", d.path().join("x.csv").to_str().unwrap(), "--scale", "quadratic:1"]);
    assert_eq!(o.status.code(), Some(2));
}
