use std::path::Path;
use std::process::{Command, Output};

fn pileup(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pileup")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn solve_finite_writes_csv_and_is_repeatable() {
    let dir = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let o = pileup(&["solve-finite", "--potential", "powerlaw:a=2", "--n", "32", "--out", name], dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        std::fs::read(dir.path().join(name)).unwrap()
    };
    let a = run("a.csv");
    let b = run("b.csv");
    assert_eq!(a, b);
    let text = String::from_utf8(a).unwrap();
    assert!(text.starts_with("i,x,eps,rho\n"));
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().count(), 34);

    let o = pileup(&["energy", "--potential", "powerlaw:a=2", "--strain", "a.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let get = |key: &str| -> f64 { out.lines().find_map(|l| l.strip_prefix(key)).unwrap().trim().parse().unwrap() };
    let direct = get("direct");
    assert!((direct - get("q_part") - get("linear_part")).abs() < 1e-12);
}

#[test]
fn banded_hessian_flag() {
    let dir = tempfile::tempdir().unwrap();
    let o = pileup(
        &["solve-finite", "--potential", "wall", "--n", "64", "--hessian", "banded:8", "--out", "w.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let o = pileup(
        &["solve-finite", "--potential", "wall", "--n", "64", "--hessian", "sparse", "--out", "w.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn boundary_layer_and_stress_tables() {
    let dir = tempfile::tempdir().unwrap();
    let o =
        pileup(&["solve-bl", "--potential", "powerlaw:a=3", "--I", "50", "--J", "60", "--out", "bl.csv"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    let bl = std::fs::read_to_string(dir.path().join("bl.csv")).unwrap();
    assert!(bl.starts_with("i,y,eps_l\n"));
    assert_eq!(bl.lines().count(), 62);

    for n in ["inf", "40"] {
        let o =
            pileup(&["stress", "--potential", "powerlaw:a=2", "--n", n, "--imax", "5", "--out", "s.csv"], dir.path());
        assert_eq!(o.status.code(), Some(0));
        let s = std::fs::read_to_string(dir.path().join("s.csv")).unwrap();
        assert!(s.starts_with("i,sigma\n"));
        assert_eq!(s.lines().count(), 6);
    }
    let o =
        pileup(&["stress", "--potential", "powerlaw:a=2", "--n", "many", "--imax", "5", "--out", "s.csv"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn predictions() {
    let dir = tempfile::tempdir().unwrap();
    let value = |args: &[&str]| -> f64 {
        let o = pileup(args, dir.path());
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o).trim().parse().unwrap()
    };
    let z = value(&["predict", "--potential", "powerlaw:a=2", "--what", "zeta"]);
    assert!((z - std::f64::consts::PI.powi(2) / 6.0).abs() < 1e-12);
    let big_z = value(&["predict", "--potential", "powerlaw:a=2", "--what", "Z"]);
    assert!((big_z - std::f64::consts::PI.powi(2)).abs() < 1e-10);
    let tail = value(&["predict", "--potential", "powerlaw:a=2", "--what", "strain-tail", "--i", "10"]);
    assert!((tail + 0.1 / std::f64::consts::PI.powi(2)).abs() < 1e-12);
    let mid = value(&["predict", "--potential", "powerlaw:a=1.5", "--what", "bulk", "--s", "0.5", "--n", "1000"]);
    assert!((mid - 0.5).abs() < 1e-15);

    let o = pileup(&["predict", "--potential", "wall", "--what", "zeta"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn parse_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["solve-finite", "--potential", "yukawa", "--n", "8", "--out", "x.csv"][..],
        &["solve-finite", "--potential", "powerlaw:a=0.5", "--n", "8", "--out", "x.csv"][..],
        &["frobnicate"][..],
        &["sweep", "--potential", "wall", "--out", "x.csv"][..],
    ] {
        let o = pileup(args, dir.path());
        assert_eq!(o.status.code(), Some(1), "{args:?}");
    }
    assert_eq!(pileup(&["--help"], dir.path()).status.code(), Some(0));
}

#[test]
fn non_convergence_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = pileup(
        &["solve-finite", "--potential", "powerlaw:a=2", "--n", "400", "--tol", "1e-300", "--out", "x.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn experiment_configs() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("empty.json"),
        r#"{"experiment": "finite-sweep", "potential": "wall", "n_values": [], "out_dir": "o"}"#,
    )
    .unwrap();
    assert_eq!(pileup(&["run", "empty.json"], dir.path()).status.code(), Some(1));

    std::fs::write(
        dir.path().join("typo.json"),
        r#"{"experiment": "finite-sweep", "potential": "wall", "n_vals": [8], "out_dir": "o"}"#,
    )
    .unwrap();
    assert_eq!(pileup(&["run", "typo.json"], dir.path()).status.code(), Some(1));

    std::fs::write(
        dir.path().join("stress.json"),
        r#"{"experiment": "stress-convergence", "potential": "powerlaw:a=2", "n_values": [100, 200, 400, 800], "out_dir": "o"}"#,
    )
    .unwrap();
    let o = pileup(&["run", "stress.json", "--check"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = std::fs::read_to_string(dir.path().join("o/stress_gap.csv")).unwrap();
    assert!(csv.starts_with("n,l2_gap\n"));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["experiment"], "stress-convergence");
}

#[test]
fn check_subset_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = pileup(&["check", "--only", "1,6"], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert_eq!(out.lines().count(), 2);
    assert!(out.lines().all(|l| l.contains("PASS")));

    let o = pileup(
        &["sweep", "--potential", "powerlaw:a=2.5", "--n-values", "16,32,64,128", "--probes", "1,3", "--out", "d.csv"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(0));
    let d = std::fs::read_to_string(dir.path().join("d.csv")).unwrap();
    assert!(d.starts_with("n,i,dn\n"));
    assert_eq!(d.lines().count(), 9);
    assert!(stdout(&o).contains("slope"));
}
