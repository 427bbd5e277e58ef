use std::path::Path;
use std::process::{Command, Output};

use admm_tune::io::BatchManifest;
use admm_tune::qp::{tune_qp, QpSpectral};
use admm_tune_cli::config::{ExperimentConfig, Method, MpcSource, ProblemSource, Scaling, OUT_ENV};
use admm_tune_cli::instances::{self, Instances};
use admm_tune_cli::runs::RunRecord;
use serde_json::Value;

const QP_CONFIG: &str = r#"{
  "problem": {"random-qp": {"n": 8, "m": 4, "cond": 50, "count": 4}},
  "methods": ["admm", "admm-relaxed", "fast-admm", "fast-admm-tuned"],
  "scaling": ["none", "optimal"],
  "rho": {"grid": {"lo": 0.1, "hi": 10, "points": 3}},
  "seed": 7,
  "tol": 1e-6
}"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_admm-tune"));
    c.env_remove(OUT_ENV);
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("config.json");
    std::fs::write(&p, text).unwrap();
    p
}

fn ok(out: Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

fn records(path: &Path) -> Vec<RunRecord> {
    let text = std::fs::read_to_string(path).unwrap();
    let body: String = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| format!("{l}\n"))
        .collect();
    csv::Reader::from_reader(body.as_bytes())
        .deserialize()
        .map(|r| r.unwrap())
        .collect()
}

/// CSV text without comment lines and without the timing column.
fn without_timing(path: &Path) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "wall_ms").unwrap();
    lines
        .map(|l| {
            let mut f: Vec<&str> = l.split(',').collect();
            f.remove(col);
            f.join(",")
        })
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn sweep_is_deterministic_for_a_seed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QP_CONFIG);
    for sub in ["a", "b"] {
        ok(bin()
            .args(["sweep", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(dir.path().join(sub))
            .output()
            .unwrap());
    }
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert_eq!(
        without_timing(&a.join("sweep.csv")),
        without_timing(&b.join("sweep.csv"))
    );
    assert_eq!(
        std::fs::read(a.join("sweep_aggregate.csv")).unwrap(),
        std::fs::read(b.join("sweep_aggregate.csv")).unwrap()
    );
    // A different seed gives different instances.
    ok(bin()
        .args(["sweep", "--seed", "8", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path().join("c"))
        .output()
        .unwrap());
    assert_ne!(
        without_timing(&a.join("sweep.csv")),
        without_timing(&dir.path().join("c/sweep.csv"))
    );
}

#[test]
fn sweep_rows_cover_the_grid_and_converged_rows_meet_the_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), QP_CONFIG);
    let summary = ok(bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap());
    let recs = records(&dir.path().join("sweep.csv"));
    // Three grid methods at 3 points plus the self-tuned one, twice scaled, 4 instances.
    assert_eq!(recs.len(), 4 * 2 * (3 * 3 + 1));
    assert_eq!(summary["runs"], recs.len());
    assert_eq!(summary["failed"], 0);
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert!(text.starts_with("# seed=7\n"));
    for r in &recs {
        if r.converged() {
            let worst = r.r_norm.unwrap().max(r.s_norm.unwrap());
            assert!(worst <= 1e-6, "{r:?}");
        }
    }
    assert!(recs.iter().filter(|r| r.converged()).count() * 10 >= recs.len() * 9);
}

#[test]
fn auto_rho_with_relaxation_is_a_single_run_at_the_optimum() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 6, "m": 3, "cond": 20, "count": 2}}, "methods": ["admm-relaxed"]}"#,
    );
    ok(bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap());
    let recs = records(&dir.path().join("sweep.csv"));
    let loaded = ExperimentConfig::load(&cfg).unwrap();
    let Instances::Qp(v) = instances::load(loaded.problem().unwrap(), loaded.seed).unwrap() else {
        panic!()
    };
    assert_eq!(recs.len(), v.len());
    for (r, (_, p)) in recs.iter().zip(&v) {
        assert_eq!(r.alpha, Some(2.0));
        assert_eq!(r.rho, Some(tune_qp(&QpSpectral::compute(p, None).unwrap()).rho_star));
    }
}

#[test]
fn a_method_compared_with_itself_never_differs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 6, "m": 3, "cond": 20, "count": 5}}, "methods": ["admm", "admm"]}"#,
    );
    let s = ok(bin()
        .args(["compare", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap());
    let pair = &s["pairs"][0];
    assert_eq!(
        (
            pair["a_fewer"].as_u64(),
            pair["b_fewer"].as_u64(),
            pair["ties"].as_u64()
        ),
        (Some(0), Some(0), Some(5))
    );
    assert!(dir.path().join("compare.json").exists());
}

#[test]
fn compare_needs_two_contenders() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 4, "m": 2, "cond": 5, "count": 1}}}"#,
    );
    let out = bin()
        .args(["compare", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("two"));
}

#[test]
fn output_directory_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 4, "m": 2, "cond": 5, "count": 1}}, "out_dir": "from_config"}"#,
    );
    ok(bin()
        .arg("tune")
        .arg("--config")
        .arg(&cfg)
        .current_dir(dir.path())
        .output()
        .unwrap());
    assert!(dir.path().join("from_config/tune.json").exists());
    let env_out = dir.path().join("from_env");
    ok(bin()
        .arg("tune")
        .arg("--config")
        .arg(&cfg)
        .env(OUT_ENV, &env_out)
        .output()
        .unwrap());
    assert!(env_out.join("tune.json").exists());
    let flag_out = dir.path().join("from_flag");
    ok(bin()
        .arg("tune")
        .arg("--config")
        .arg(&cfg)
        .env(OUT_ENV, &env_out)
        .arg("--out")
        .arg(&flag_out)
        .output()
        .unwrap());
    assert!(flag_out.join("tune.json").exists());
}

#[test]
fn solve_writes_the_residual_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 6, "m": 3, "cond": 20, "count": 2}}}"#,
    );
    let rec = ok(bin()
        .args(["solve", "--instance", "1", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap());
    assert_eq!(rec["instance"], 1);
    assert_eq!(rec["status"], "converged");
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    let header = trace.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(header, "k,r_norm,s_norm,fv_norm,eps_k,delta_k,zeta_lb_k");
    let rows = trace.lines().filter(|l| !l.starts_with('#')).count() - 1;
    assert_eq!(rows, rec["iterations"].as_u64().unwrap() as usize);
}

#[test]
fn l2_sweep_writes_factor_table_and_rejects_qp_only_methods() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-l2": {"n": 6, "lam_min": 0.1, "lam_max": 10, "delta": 1, "count": 2}},
            "methods": ["admm", "gradient", "heavy-ball", "fast-admm"],
            "delta_grid": {"lo": 0.01, "hi": 100, "points": 5}}"#,
    );
    let s = ok(bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap());
    assert_eq!(s["failed"], 2);
    let recs = records(&dir.path().join("sweep.csv"));
    let fast: Vec<_> = recs.iter().filter(|r| r.method == Method::FastAdmm).collect();
    assert!(fast.iter().all(|r| r.status.is_none() && !r.message.is_empty()));
    assert!(recs
        .iter()
        .filter(|r| r.method != Method::FastAdmm)
        .all(|r| r.converged()));
    let factors = std::fs::read_to_string(dir.path().join("l2_factors.csv")).unwrap();
    let header = factors.lines().find(|l| !l.starts_with('#')).unwrap();
    assert_eq!(
        header,
        "instance,delta,admm_rho_delta,admm_rho_star,gradient,heavy_ball"
    );
    assert_eq!(factors.lines().filter(|l| !l.starts_with('#')).count(), 1 + 2 * 5);
}

#[test]
fn matrix_file_flags_define_the_problem() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("Q.txt"), "2 2\n2 0\n0 1\n").unwrap();
    std::fs::write(d.join("q.txt"), "2 1\n-1\n-1\n").unwrap();
    std::fs::write(d.join("A.txt"), "1 2\n1 1\n").unwrap();
    std::fs::write(d.join("c.txt"), "1 1\n0.5\n").unwrap();
    let rec = ok(bin()
        .current_dir(d)
        .args([
            "solve",
            "--q-matrix",
            "Q.txt",
            "--q-vector",
            "q.txt",
            "--a-matrix",
            "A.txt",
            "--c-vector",
            "c.txt",
        ])
        .args(["--tol", "1e-9", "--out", "o"])
        .output()
        .unwrap());
    assert_eq!(rec["status"], "converged");
    let out = bin()
        .current_dir(d)
        .args(["solve", "--q-matrix", "Q.txt"])
        .output()
        .unwrap();
    assert!(!out.status.success());
}

#[test]
fn scale_writes_weights_per_instance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 6, "m": 4, "cond": 100, "count": 2}}}"#,
    );
    let s = ok(bin()
        .args(["scale", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap());
    for id in 0..2 {
        let entry = &s[id]["scaling"];
        assert!(entry["ratio_after"].as_f64().unwrap() <= entry["ratio_before"].as_f64().unwrap() * (1.0 + 1e-9));
        let w = admm_tune::io::load_vector(&dir.path().join(format!("w_{id}.txt"))).unwrap();
        assert_eq!(w.len(), 4);
    }
}

#[test]
fn condensed_batch_round_trips_through_the_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let src = MpcSource {
        levels: vec![10.0, 12.5, 15.0],
        ..Default::default()
    };
    let cfg_text = serde_json::json!({ "problem": ProblemSource::Mpc(src.clone()), "seed": 3 }).to_string();
    let cfg = write_config(dir.path(), &cfg_text);
    let batch_dir = dir.path().join("batch");
    let out = ok(bin()
        .args(["condense", "--horizon", "3", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&batch_dir)
        .output()
        .unwrap());
    let manifest_path = batch_dir.join("manifest.json");
    assert_eq!(out["manifest"].as_str().map(Path::new), Some(manifest_path.as_path()));

    let manifest = BatchManifest::load(&manifest_path).unwrap();
    let mut expected_src = src;
    expected_src.plant.horizon = 3;
    let batch = instances::mpc_batch(&expected_src, 3).unwrap();
    assert_eq!(manifest.instances.len(), batch.feasible.len());
    assert_eq!(
        manifest.instances.len() + manifest.infeasible.len() + manifest.undetermined.len(),
        81
    );
    let loaded = manifest.load_problems(&batch_dir).unwrap();
    for (p, b) in loaded.iter().zip(&batch.feasible) {
        // Seventeen significant digits round-trip exactly.
        assert_eq!(p.cost().linear(), b.qp.cost().linear());
        assert_eq!(p.c(), b.qp.c());
        assert_eq!(p.a().as_slice(), b.qp.a().as_slice());
    }

    let sweep_out = dir.path().join("sweep");
    let s = ok(bin()
        .args(["sweep", "--methods", "admm,admm-relaxed", "--manifest"])
        .arg(&manifest_path)
        .arg("--out")
        .arg(&sweep_out)
        .output()
        .unwrap());
    assert_eq!(s["instances"], manifest.instances.len());
    let recs = records(&sweep_out.join("sweep.csv"));
    assert!(recs.iter().all(|r| r.converged() && r.scaling == Scaling::None));
    let ids: Vec<usize> = recs
        .iter()
        .filter(|r| r.method == Method::Admm)
        .map(|r| r.instance)
        .collect();
    assert_eq!(ids, manifest.instances.iter().map(|e| e.id).collect::<Vec<_>>());
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"problem": {"random-qp": {"n": 4, "m": 2, "cond": 5, "count": 1}}, "alpha": 3}"#,
    );
    let out = bin().args(["sweep", "--config"]).arg(&cfg).output().unwrap();
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("alpha"));
}
