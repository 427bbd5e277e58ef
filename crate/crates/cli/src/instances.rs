//! Turns a [`ProblemSource`] into concrete problem instances.

use admm_tune::io::{load_matrix, load_scalar, load_vector, BatchManifest};
use admm_tune::l2reg::L2Problem;
use admm_tune::linalg::SymMatrix;
use admm_tune::mpc::{generate_batch, generate_plant, initial_state_grid, Batch, ProbeOptions};
use admm_tune::qp::QpProblem;
use admm_tune::random::{gaussian_matrix, gaussian_vec, spd};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::{MpcSource, ProblemSource};
use crate::error::{CliError, Result};

/// Instances of one problem class, each with a stable id.
#[derive(Clone, Debug)]
pub enum Instances {
    Qp(Vec<(usize, QpProblem)>),
    L2(Vec<(usize, L2Problem)>),
}

impl Instances {
    pub fn len(&self) -> usize {
        match self {
            Instances::Qp(v) => v.len(),
            Instances::L2(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub fn load(source: &ProblemSource, seed: u64) -> Result<Instances> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(match source {
        ProblemSource::QpFiles {
            q_matrix,
            q_vector,
            a_matrix,
            c_vector,
        } => {
            let q = SymMatrix::new(load_matrix(q_matrix)?)?;
            let p = QpProblem::from_parts(
                q,
                load_vector(q_vector)?,
                load_matrix(a_matrix)?,
                load_vector(c_vector)?,
            )?;
            Instances::Qp(vec![(0, p)])
        }
        ProblemSource::L2Files {
            q_matrix,
            q_vector,
            delta,
        } => {
            let q = SymMatrix::new(load_matrix(q_matrix)?)?;
            let p = L2Problem::from_parts(q, load_vector(q_vector)?, load_scalar(delta)?)?;
            Instances::L2(vec![(0, p)])
        }
        ProblemSource::Manifest(path) => {
            let manifest = BatchManifest::load(path)?;
            let base = path.parent().unwrap_or(std::path::Path::new(""));
            let problems = manifest.load_problems(base)?;
            Instances::Qp(manifest.instances.iter().map(|e| e.id).zip(problems).collect())
        }
        ProblemSource::RandomQp { n, m, cond, count } => {
            if !(*cond >= 1.0) || *n == 0 || *m == 0 {
                return Err(CliError::Config("random-qp needs n, m ≥ 1 and cond ≥ 1".into()));
            }
            let v = (0..*count)
                .map(|i| {
                    let q = spd(&mut rng, *n, 1.0, *cond);
                    let a = gaussian_matrix(&mut rng, *m, *n);
                    let q_lin = gaussian_vec(&mut rng, *n);
                    let c = gaussian_vec(&mut rng, *m).iter().map(|v| 0.5 * v).collect();
                    Ok((i, QpProblem::from_parts(q, q_lin, a, c)?))
                })
                .collect::<Result<_>>()?;
            Instances::Qp(v)
        }
        ProblemSource::RandomL2 {
            n,
            lam_min,
            lam_max,
            delta,
            count,
        } => {
            if !(*lam_min > 0.0 && lam_max >= lam_min) || *n == 0 {
                return Err(CliError::Config(
                    "random-l2 needs n ≥ 1 and 0 < lam_min ≤ lam_max".into(),
                ));
            }
            let v = (0..*count)
                .map(|i| {
                    let q = spd(&mut rng, *n, *lam_min, *lam_max);
                    Ok((i, L2Problem::from_parts(q, gaussian_vec(&mut rng, *n), *delta)?))
                })
                .collect::<Result<_>>()?;
            Instances::L2(v)
        }
        ProblemSource::Mpc(src) => {
            let batch = mpc_batch(src, seed)?;
            Instances::Qp(batch.feasible.into_iter().enumerate().map(|(i, b)| (i, b.qp)).collect())
        }
    })
}

/// Generates the plant from `seed` and splits the initial-state grid by
/// feasibility.
pub fn mpc_batch(src: &MpcSource, seed: u64) -> Result<Batch> {
    let spec = admm_tune::mpc::PlantSpec {
        seed,
        ..src.plant.clone()
    };
    let mpc = generate_plant(&spec, &mut ChaCha8Rng::seed_from_u64(seed))?;
    let grid = initial_state_grid(&src.levels, spec.nx);
    Ok(generate_batch(
        &mpc,
        src.constraints,
        src.normalize,
        &grid,
        ProbeOptions::default(),
    )?)
}
