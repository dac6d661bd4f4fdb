use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mtvf_core::flow::Curve;
use mtvf_core::io::{read_curve, write_curve};
use mtvf_core::{ManifoldPoint, ManifoldSpec, PiecewiseConstantCurve};
use sha2::{Digest, Sha256};

fn mtvf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtvf")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn sphere_pc(values: &[[f64; 3]], breakpoints: Vec<f64>) -> Curve {
    let m = ManifoldSpec::Sphere(3);
    let v = values.iter().map(|c| ManifoldPoint::new(m, c.to_vec()).unwrap()).collect();
    Curve::Pc(PiecewiseConstantCurve::new(m, breakpoints, v).unwrap())
}

#[test]
fn exact_flow_writes_run_dir_and_verifies() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("u0.csv");
    let out = d.path().join("run");
    let o = mtvf(&["generate", "staircase", "--manifold", "sphere:3", "--plateaus", "3", "--seed", "4", "--out", p(&input)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let cfg = d.path().join("run.toml");
    fs::write(&cfg, "solver = \"exact_pc\"\nmanifold = \"sphere:3\"\nt_max = 10.0\n").unwrap();
    let o = mtvf(&["flow", "--config", p(&cfg), "--input", p(&input), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let man: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(man["command"], "flow");
    assert_eq!(man["config"]["solver"], "exact_pc");
    assert_eq!(man["inputs"].as_array().unwrap().len(), 2);
    for f in man["outputs"].as_array().unwrap() {
        let bytes = fs::read(out.join(f["path"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }

    let traj = out.join("trajectory.csv");
    let o = mtvf(&["verify", "--input", p(&traj), "--checks", "energy,monotone,jump_rates,z,sphere,stopping"]);
    assert_eq!(code(&o), 0, "{}{}", String::from_utf8_lossy(&o.stdout), stderr(&o));

    let o = mtvf(&["verify", "--input", p(&traj), "--checks", "energy,wobble"]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("wobble"));
}

#[test]
fn corrupted_trajectory_fails_verification() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("u0.csv");
    write_curve(&input, &sphere_pc(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![0.5])).unwrap();
    let out = d.path().join("run");
    let o = mtvf(&["flow", "--solver", "exact_pc", "--manifold", "sphere:3", "--t-max", "1.0", "--input", p(&input), "--out", p(&out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let traj = out.join("trajectory.csv");
    assert_eq!(code(&mtvf(&["verify", "--input", p(&traj)])), 0);

    // put the left plateau of the last two-plateau snapshot back at e1,
    // which re-grows the jump
    let text = fs::read_to_string(&traj).unwrap();
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let k = lines.iter().rposition(|l| l.split(',').nth(1).and_then(|x| x.parse::<f64>().ok()) == Some(0.5)).unwrap();
    let mut cols: Vec<String> = lines[k].split(',').map(str::to_string).collect();
    cols.truncate(2);
    cols.extend(["1".to_string(), "0".to_string(), "0".to_string()]);
    lines[k] = cols.join(",");
    let bad = lines;
    fs::write(&traj, bad.join("\n") + "\n").unwrap();
    let o = mtvf(&["verify", "--input", p(&traj)]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stdout));
}

#[test]
fn antipodal_jump_is_a_geometry_error() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("u0.csv");
    write_curve(&input, &sphere_pc(&[[1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]], vec![0.5])).unwrap();
    for solver in ["exact_pc", "regularized"] {
        let o = mtvf(&[
            "flow", "--solver", solver, "--manifold", "sphere:3", "--eps", "0.1", "--grid", "21", "--dt", "auto",
            "--t-max", "1", "--input", p(&input), "--out", p(&d.path().join("run")),
        ]);
        assert_eq!(code(&o), 3, "{solver}: {}", stderr(&o));
        assert!(stderr(&o).contains("rad"), "{}", stderr(&o));
    }
}

#[test]
fn missing_epsilon_is_a_config_error() {
    let d = tempfile::tempdir().unwrap();
    let input = d.path().join("u0.csv");
    write_curve(&input, &sphere_pc(&[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]], vec![0.5])).unwrap();
    let o = mtvf(&["flow", "--manifold", "sphere:3", "--grid", "21", "--dt", "auto", "--t-max", "1", "--input", p(&input), "--out", p(&d.path().join("run"))]);
    assert_eq!(code(&o), 2);
    assert!(stderr(&o).contains("epsilon"), "{}", stderr(&o));
}

#[test]
fn denoise_lowers_tv_and_long_runs_go_constant() {
    let d = tempfile::tempdir().unwrap();
    let a = d.path().join("a.csv");
    let b = d.path().join("b.csv");
    for f in [&a, &b] {
        let o = mtvf(&["generate", "noisy-field", "--grid", "101", "--sigma", "0.05", "--seed", "7", "--out", p(f)]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
    }
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());

    let out = d.path().join("den");
    let o = mtvf(&["denoise", "--input", p(&a), "--out", p(&out), "--eps", "1e-6"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let tv_in = read_curve(&a).unwrap().tv();
    let tv_out = read_curve(&out.join("denoised.csv")).unwrap().tv();
    assert!(tv_out < tv_in, "{tv_out} vs {tv_in}");

    let out = d.path().join("long");
    let o = mtvf(&["denoise", "--input", p(&a), "--out", p(&out), "--eps", "1e-6", "--t-stop", "50"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let c = read_curve(&out.join("denoised.csv")).unwrap();
    assert!(c.max_jump() < 1e-8, "max face distance {}", c.max_jump());
}

#[test]
fn lab_tables() {
    let o = mtvf(&["lab", "semiconvexity", "--n-max", "40"]);
    assert_eq!(code(&o), 0);
    let t = String::from_utf8(o.stdout).unwrap();
    assert_eq!(t.lines().count(), 41);
    assert_eq!(t.lines().filter(|l| l.ends_with(",1.0000000000000000e0")).count(), 1);

    let o = mtvf(&["lab", "hessian", "--r", "1.0", "--dirs", "64", "--configs", "5"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));

    let run = || mtvf(&["lab", "stability", "--samples", "1000", "--seed", "7"]);
    let (x, y) = (run(), run());
    assert_eq!(code(&x), 0, "{}", stderr(&x));
    assert_eq!(x.stdout, y.stdout);
    let counts: usize = String::from_utf8(x.stdout).unwrap().lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(counts, 1000);
}

#[test]
fn square_pair_is_symmetric() {
    let d = tempfile::tempdir().unwrap();
    let o = mtvf(&["generate", "two-jump-square", "--a", "0.5", "--eps", "0.1", "--out", p(d.path())]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let Curve::Pc(v) = read_curve(&d.path().join("v.csv")).unwrap() else { panic!("v is piecewise constant") };
    let pts: Vec<Vec<f64>> = v.values().iter().map(|p| p.coords().to_vec()).collect();
    assert_eq!(pts.len(), 4);
    // reflections in the (e1, e3) and (e1, e2) planes permute the vertices
    for axis in [1, 2] {
        for q in &pts {
            let mut r = q.clone();
            r[axis] = -r[axis];
            assert!(pts.iter().any(|s| s.iter().zip(&r).all(|(a, b)| (a - b).abs() < 1e-12)), "{q:?}");
        }
    }
    assert!(read_curve(&d.path().join("u.csv")).is_ok());
}

#[test]
fn bad_thread_count_and_params() {
    let o = Command::new(env!("CARGO_BIN_EXE_mtvf"))
        .args(["lab", "semiconvexity"])
        .env("MTVF_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
    let d = tempfile::tempdir().unwrap();
    let o = mtvf(&["generate", "staircase", "--manifold", "sphere:3", "--plateaus", "0", "--out", p(&d.path().join("x.csv"))]);
    assert_eq!(code(&o), 2);
    let o = mtvf(&["generate", "two-jump-square", "--a", "2.0", "--out", p(d.path())]);
    assert_eq!(code(&o), 2, "{}", stderr(&o));
}
