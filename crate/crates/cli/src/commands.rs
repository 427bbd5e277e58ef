//! Subcommand implementations. Each writes its artifacts under the
//! configured output directory and returns a JSON summary for stdout.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use admm_tune::io::{
    save_matrix, save_vector, write_header_comments, write_l2_trace, write_qp_trace, BatchManifest, ManifestEntry,
};
use admm_tune::l2reg::{curvature_bounds, gradient_factor, heavy_ball_factor, tune_l2, worst_factor, L2Problem};
use admm_tune::precond::optimal_scaling;
use admm_tune::qp::{tune_qp, tune_qp_relaxed, QpProblem, QpSpectral};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Method, MpcSource, ProblemSource, RhoSpec, Scaling};
use crate::error::{CliError, Result};
use crate::instances::{self, Instances};
use crate::runs::{run_l2, run_qp, RunRecord, RunSpec, Trace};

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::Io(path.to_owned(), e))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(dir.to_owned(), e))
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| CliError::Io(path.to_owned(), e))
}

fn load(cfg: &ExperimentConfig) -> Result<Instances> {
    cfg.validate()?;
    let inst = instances::load(cfg.problem()?, cfg.seed)?;
    if inst.is_empty() {
        return Err(CliError::Config("problem source produced no instances".into()));
    }
    Ok(inst)
}

/// `# key=value` provenance lines for CSV outputs.
fn provenance(cfg: &ExperimentConfig) -> Vec<(String, String)> {
    vec![
        ("seed".into(), cfg.seed.to_string()),
        ("tol".into(), cfg.tol.to_string()),
        ("max_iter".into(), cfg.max_iter.to_string()),
        ("alpha".into(), cfg.alpha.to_string()),
    ]
}

#[derive(Serialize)]
struct QpTuneEntry {
    instance: usize,
    scaling: Scaling,
    spectral: QpSpectral,
    tuned: admm_tune::qp::QpTuning,
    relaxed: admm_tune::qp::QpTuning,
}

/// Analytic step sizes and factors for every instance.
pub fn tune(cfg: &ExperimentConfig) -> Result<Value> {
    let out = match load(cfg)? {
        Instances::L2(v) => {
            let entries: Vec<Value> = v
                .iter()
                .map(|(id, p)| {
                    let (l, u) = curvature_bounds(p);
                    json!({
                        "instance": id,
                        "delta": p.delta(),
                        "lam_min": p.lam_min(),
                        "lam_max": p.lam_max(),
                        "tuning": tune_l2(p),
                        "gradient_factor": gradient_factor(l, u),
                        "heavy_ball_factor": heavy_ball_factor(l, u),
                    })
                })
                .collect();
            Value::Array(entries)
        }
        Instances::Qp(v) => {
            let mut entries = Vec::new();
            for (id, p) in &v {
                for &scaling in &cfg.scaling {
                    let l = match scaling {
                        Scaling::None => None,
                        Scaling::Optimal => Some(optimal_scaling(p.cost().hessian(), p.a())?.l),
                    };
                    let spectral = QpSpectral::compute(p, l.as_deref())?;
                    entries.push(QpTuneEntry {
                        instance: *id,
                        scaling,
                        tuned: tune_qp(&spectral),
                        relaxed: tune_qp_relaxed(&spectral),
                        spectral,
                    });
                }
            }
            serde_json::to_value(entries)?
        }
    };
    ensure_dir(&cfg.out_dir)?;
    write_json(&cfg.out_dir.join("tune.json"), &out)?;
    Ok(out)
}

fn single_rho(cfg: &ExperimentConfig) -> Result<Option<f64>> {
    match cfg.rho {
        RhoSpec::Auto => Ok(None),
        RhoSpec::Grid(g) if g.points == 1 || g.lo == g.hi => Ok(Some(g.lo)),
        RhoSpec::Grid(_) => Err(CliError::Config(
            "solve takes one step size; use `auto` or lo:lo:1".into(),
        )),
    }
}

/// One run of the first method and scaling on one instance, with its trace.
pub fn solve(cfg: &ExperimentConfig, instance: Option<usize>) -> Result<RunRecord> {
    let inst = load(cfg)?;
    let spec = RunSpec {
        method: cfg.methods[0],
        scaling: cfg.scaling[0],
        rho: single_rho(cfg)?,
        alpha: cfg.alpha,
        stop: cfg.stop(),
    };
    let pick = |ids: Vec<usize>| -> Result<usize> {
        let want = instance.unwrap_or(ids[0]);
        ids.iter()
            .position(|&i| i == want)
            .ok_or_else(|| CliError::Config(format!("no instance with id {want}")))
    };
    let (rec, trace) = match &inst {
        Instances::Qp(v) => {
            let (id, p) = &v[pick(v.iter().map(|e| e.0).collect())?];
            run_qp(*id, p, spec)
        }
        Instances::L2(v) => {
            let (id, p) = &v[pick(v.iter().map(|e| e.0).collect())?];
            run_l2(*id, p, spec)
        }
    };
    let Some(trace) = trace else {
        return Err(CliError::Config(rec.message));
    };
    ensure_dir(&cfg.out_dir)?;
    let path = cfg.out_dir.join("trace.csv");
    let mut comments = provenance(cfg);
    comments.push(("method".into(), rec.method.name().into()));
    comments.extend(rec.rho.map(|r| ("rho".into(), r.to_string())));
    let w = create(&path)?;
    match &trace {
        Trace::Qp(t) => write_qp_trace(w, t, &comments)?,
        Trace::L2(t) => write_l2_trace(w, t, &comments)?,
        Trace::Baseline(t) => write_baseline_trace(w, &t.error, &comments)?,
    }
    write_json(&cfg.out_dir.join("record.json"), &rec)?;
    Ok(rec)
}

/// Columns `k, x_error`.
fn write_baseline_trace<W: Write>(mut w: W, error: &[f64], comments: &[(String, String)]) -> Result<()> {
    write_header_comments(&mut w, comments)?;
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["k", "x_error"])?;
    for (k, e) in error.iter().enumerate() {
        out.write_record([k.to_string(), admm_tune::io::format_value(*e)])?;
    }
    out.flush().map_err(|e| CliError::Io(PathBuf::from("trace.csv"), e))
}

/// Step sizes to try for `method`; `None` means the method's default.
fn rhos_for(cfg: &ExperimentConfig, method: Method) -> Vec<Option<f64>> {
    match cfg.rho {
        RhoSpec::Grid(g) if !method.ignores_grid() => g.values().into_iter().map(Some).collect(),
        _ => vec![None],
    }
}

/// Every (method, scaling, ρ) combination on every instance, in a fixed
/// order independent of thread scheduling.
pub fn run_all(cfg: &ExperimentConfig, inst: &Instances) -> Vec<RunRecord> {
    let mut specs = Vec::new();
    for &method in &cfg.methods {
        for &scaling in &cfg.scaling {
            for rho in rhos_for(cfg, method) {
                specs.push(RunSpec {
                    method,
                    scaling,
                    rho,
                    alpha: cfg.alpha,
                    stop: cfg.stop(),
                });
            }
        }
    }
    let per_instance: Vec<Vec<RunRecord>> = match inst {
        Instances::Qp(v) => v
            .par_iter()
            .map(|(id, p)| specs.iter().map(|s| run_qp(*id, p, *s).0).collect())
            .collect(),
        Instances::L2(v) => v
            .par_iter()
            .map(|(id, p)| specs.iter().map(|s| run_l2(*id, p, *s).0).collect())
            .collect(),
    };
    per_instance.into_iter().flatten().collect()
}

fn write_records(path: &Path, records: &[RunRecord], comments: &[(String, String)]) -> Result<()> {
    let mut w = create(path)?;
    write_header_comments(&mut w, comments)?;
    let mut out = csv::Writer::from_writer(w);
    for r in records {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| CliError::Io(path.to_owned(), e))
}

#[derive(Debug, Serialize)]
pub struct AggregateRow {
    pub method: Method,
    pub scaling: Scaling,
    /// Grid value, or `auto` for the method's default.
    pub rho: String,
    pub runs: usize,
    pub converged: usize,
    pub iter_min: Option<usize>,
    pub iter_mean: Option<f64>,
    pub iter_max: Option<usize>,
    pub factor_mean: Option<f64>,
}

fn mean(v: &[f64]) -> Option<f64> {
    (!v.is_empty()).then(|| v.iter().sum::<f64>() / v.len() as f64)
}

/// Statistics over instances, one row per (method, scaling, ρ), in first
/// appearance order. Iteration counts cover converged runs only.
pub fn aggregate(cfg: &ExperimentConfig, records: &[RunRecord]) -> Vec<AggregateRow> {
    let mut rows = Vec::new();
    for &method in &cfg.methods {
        for &scaling in &cfg.scaling {
            for rho in rhos_for(cfg, method) {
                let label = rho.map_or_else(|| "auto".to_string(), |r| r.to_string());
                let group: Vec<&RunRecord> = records
                    .iter()
                    .filter(|r| r.method == method && r.scaling == scaling && (rho.is_none() || r.rho == rho))
                    .collect();
                if group.is_empty()
                    || rows
                        .iter()
                        .any(|a: &AggregateRow| a.method == method && a.scaling == scaling && a.rho == label)
                {
                    continue;
                }
                let iters: Vec<usize> = group
                    .iter()
                    .filter(|r| r.converged())
                    .filter_map(|r| r.iterations)
                    .collect();
                let factors: Vec<f64> = group.iter().filter_map(|r| r.empirical_factor).collect();
                rows.push(AggregateRow {
                    method,
                    scaling,
                    rho: label,
                    runs: group.len(),
                    converged: iters.len(),
                    iter_min: iters.iter().min().copied(),
                    iter_mean: mean(&iters.iter().map(|&i| i as f64).collect::<Vec<_>>()),
                    iter_max: iters.iter().max().copied(),
                    factor_mean: mean(&factors),
                });
            }
        }
    }
    rows
}

#[derive(Debug, Serialize)]
struct FactorRow {
    instance: usize,
    delta: f64,
    admm_rho_delta: f64,
    admm_rho_star: f64,
    gradient: f64,
    heavy_ball: f64,
}

/// Analytic worst-case factors of each ℓ2 instance as δ varies.
fn l2_factor_rows(v: &[(usize, L2Problem)], deltas: &[f64]) -> Result<Vec<FactorRow>> {
    let mut rows = Vec::new();
    for (id, p) in v {
        for &delta in deltas {
            let q = L2Problem::new(p.cost().clone(), delta)?;
            let (l, u) = curvature_bounds(&q);
            rows.push(FactorRow {
                instance: *id,
                delta,
                admm_rho_delta: worst_factor(&q, delta),
                admm_rho_star: tune_l2(&q).zeta_star,
                gradient: gradient_factor(l, u),
                heavy_ball: heavy_ball_factor(l, u),
            });
        }
    }
    Ok(rows)
}

fn write_rows<T: Serialize>(path: &Path, rows: &[T], comments: &[(String, String)]) -> Result<()> {
    let mut w = create(path)?;
    write_header_comments(&mut w, comments)?;
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush().map_err(|e| CliError::Io(path.to_owned(), e))
}

/// Writes `sweep.csv`, `sweep_aggregate.csv` and, for ℓ2 problems with a δ
/// grid, `l2_factors.csv`.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Value> {
    let inst = load(cfg)?;
    let records = run_all(cfg, &inst);
    let agg = aggregate(cfg, &records);
    ensure_dir(&cfg.out_dir)?;
    let comments = provenance(cfg);
    write_records(&cfg.out_dir.join("sweep.csv"), &records, &comments)?;
    write_rows(&cfg.out_dir.join("sweep_aggregate.csv"), &agg, &comments)?;
    if let (Instances::L2(v), Some(g)) = (&inst, cfg.delta_grid) {
        write_rows(
            &cfg.out_dir.join("l2_factors.csv"),
            &l2_factor_rows(v, &g.values())?,
            &comments,
        )?;
    }
    Ok(json!({
        "instances": inst.len(),
        "runs": records.len(),
        "failed": records.iter().filter(|r| r.status.is_none()).count(),
        "aggregate": agg,
        "out_dir": cfg.out_dir,
    }))
}

#[derive(Debug, Serialize)]
pub struct ContenderStats {
    pub method: Method,
    pub scaling: Scaling,
    pub runs: usize,
    pub converged: usize,
    pub mean_iterations: Option<f64>,
}

/// Head-to-head counts; an unconverged run loses to any converged one.
#[derive(Debug, Serialize)]
pub struct PairStats {
    pub a: String,
    pub b: String,
    pub a_fewer: usize,
    pub b_fewer: usize,
    pub ties: usize,
}

fn label(m: Method, s: Scaling) -> String {
    format!("{}/{}", m.name(), s.name())
}

/// Runs every (method, scaling) contender at its default step size and
/// compares iteration counts per instance.
pub fn compare(cfg: &ExperimentConfig) -> Result<Value> {
    let contenders: Vec<(Method, Scaling)> = cfg
        .methods
        .iter()
        .flat_map(|&m| cfg.scaling.iter().map(move |&s| (m, s)))
        .collect();
    if contenders.len() < 2 {
        return Err(CliError::Config(
            "compare needs at least two method/scaling contenders".into(),
        ));
    }
    if cfg.rho != RhoSpec::Auto {
        return Err(CliError::Config(
            "compare runs each method at its default step size; use rho = auto".into(),
        ));
    }
    let inst = load(cfg)?;
    let per_instance: Vec<Vec<RunRecord>> = {
        let spec = |(method, scaling): (Method, Scaling)| RunSpec {
            method,
            scaling,
            rho: None,
            alpha: cfg.alpha,
            stop: cfg.stop(),
        };
        match &inst {
            Instances::Qp(v) => v
                .par_iter()
                .map(|(id, p)| contenders.iter().map(|&c| run_qp(*id, p, spec(c)).0).collect())
                .collect(),
            Instances::L2(v) => v
                .par_iter()
                .map(|(id, p)| contenders.iter().map(|&c| run_l2(*id, p, spec(c)).0).collect())
                .collect(),
        }
    };
    let stats: Vec<ContenderStats> = contenders
        .iter()
        .enumerate()
        .map(|(j, &(method, scaling))| {
            let iters: Vec<f64> = per_instance
                .iter()
                .filter(|row| row[j].converged())
                .filter_map(|row| row[j].iterations.map(|i| i as f64))
                .collect();
            ContenderStats {
                method,
                scaling,
                runs: per_instance.len(),
                converged: iters.len(),
                mean_iterations: mean(&iters),
            }
        })
        .collect();
    let mut pairs = Vec::new();
    for a in 0..contenders.len() {
        for b in a + 1..contenders.len() {
            let mut p = PairStats {
                a: label(contenders[a].0, contenders[a].1),
                b: label(contenders[b].0, contenders[b].1),
                a_fewer: 0,
                b_fewer: 0,
                ties: 0,
            };
            for row in &per_instance {
                match row[a].effective_iterations().cmp(&row[b].effective_iterations()) {
                    std::cmp::Ordering::Less => p.a_fewer += 1,
                    std::cmp::Ordering::Greater => p.b_fewer += 1,
                    std::cmp::Ordering::Equal => p.ties += 1,
                }
            }
            pairs.push(p);
        }
    }
    let records: Vec<RunRecord> = per_instance.into_iter().flatten().collect();
    ensure_dir(&cfg.out_dir)?;
    write_records(&cfg.out_dir.join("compare.csv"), &records, &provenance(cfg))?;
    let summary = json!({ "instances": inst.len(), "contenders": stats, "pairs": pairs });
    write_json(&cfg.out_dir.join("compare.json"), &summary)?;
    Ok(summary)
}

/// Optimal diagonal constraint scaling per QP instance; writes `w_<id>.txt`
/// and `l_<id>.txt`.
pub fn scale(cfg: &ExperimentConfig) -> Result<Value> {
    let Instances::Qp(v) = load(cfg)? else {
        return Err(CliError::Config("scale needs a constrained QP".into()));
    };
    ensure_dir(&cfg.out_dir)?;
    let mut out = Vec::new();
    for (id, p) in &v {
        let res = optimal_scaling(p.cost().hessian(), p.a())?;
        save_vector(&cfg.out_dir.join(format!("w_{id}.txt")), &res.w)?;
        save_vector(&cfg.out_dir.join(format!("l_{id}.txt")), &res.l)?;
        out.push(json!({ "instance": id, "scaling": res }));
    }
    let out = Value::Array(out);
    write_json(&cfg.out_dir.join("scaling.json"), &out)?;
    Ok(out)
}

/// Condenses the MPC batch into matrix files and `manifest.json`; returns
/// the manifest path.
pub fn condense(src: &MpcSource, seed: u64, out_dir: &Path) -> Result<PathBuf> {
    let batch = instances::mpc_batch(src, seed)?;
    ensure_dir(out_dir)?;
    let first: &QpProblem = match batch.feasible.first() {
        Some(b) => &b.qp,
        None => return Err(CliError::Config("no feasible initial state in the grid".into())),
    };
    save_matrix(&out_dir.join("Q.txt"), first.cost().hessian().as_matrix())?;
    save_matrix(&out_dir.join("A.txt"), first.a())?;
    let mut entries = Vec::new();
    for (id, b) in batch.feasible.iter().enumerate() {
        let (q, c) = (
            PathBuf::from(format!("q_{id}.txt")),
            PathBuf::from(format!("b_{id}.txt")),
        );
        save_vector(&out_dir.join(&q), b.qp.cost().linear())?;
        save_vector(&out_dir.join(&c), b.qp.c())?;
        entries.push(ManifestEntry {
            id,
            x0: b.x0.clone(),
            q,
            b: c,
        });
    }
    let manifest = BatchManifest {
        seed,
        n: first.n(),
        m: first.m(),
        q_matrix: "Q.txt".into(),
        a_matrix: "A.txt".into(),
        instances: entries,
        infeasible: batch.infeasible,
        undetermined: batch.undetermined,
        generator: serde_json::to_value(ProblemSource::Mpc(src.clone()))?,
    };
    let path = out_dir.join("manifest.json");
    manifest.save(&path)?;
    Ok(path)
}
