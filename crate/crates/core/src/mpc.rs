//! Condensing of box-constrained linear MPC into a dense QP in the inputs.
//!
//! With `χ = [x₁; …; x_N]`, `υ = [u₀; …; u_{N−1}]` and `υ_r = [r; …; r]` the
//! dynamics `x_{t+1} = Hx_t + Ju_t + J_r r` give `χ = Θx₀ + Φυ + Φ_rυ_r`, and
//! the MPC problem becomes
//!
//! ```text
//! minimize ½ υᵀ(R̄ + ΦᵀQ̄Φ)υ + qᵀυ   subject to  [Φ; −Φ; I; −I] υ ≤ b
//! ```

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cost::StopRule;
use crate::error::{Error, Result};
use crate::linalg::{dot, norm, Lu, Matrix, SymMatrix};
use crate::qp::{tune_qp, QpInit, QpParams, QpProblem, QpSolver, QpSpectral, SolveOptions};
use crate::random::{gaussian_matrix, gaussian_vec};

#[derive(Clone, Debug)]
pub struct MpcProblem {
    pub h: Matrix,
    pub j: Matrix,
    pub j_r: Matrix,
    pub q_x: SymMatrix,
    pub q_n: SymMatrix,
    pub r: SymMatrix,
    pub horizon: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub x0: Vec<f64>,
    pub x_ref: Vec<f64>,
    pub u_ref: Vec<f64>,
    pub r_ref: Vec<f64>,
}

impl MpcProblem {
    pub fn nx(&self) -> usize {
        self.h.rows()
    }

    pub fn nu(&self) -> usize {
        self.j.cols()
    }

    pub fn nr(&self) -> usize {
        self.j_r.cols()
    }

    pub fn validate(&self) -> Result<()> {
        let (nx, nu, nr) = (self.nx(), self.nu(), self.nr());
        let dims_ok = self.h.is_square()
            && self.j.rows() == nx
            && self.j_r.rows() == nx
            && self.q_x.dim() == nx
            && self.q_n.dim() == nx
            && self.r.dim() == nu
            && self.x0.len() == nx
            && self.x_ref.len() == nx
            && self.u_ref.len() == nu
            && self.r_ref.len() == nr;
        if !dims_ok {
            return Err(Error::DimensionMismatch("MPC data dimensions disagree".into()));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if !(self.x_min < self.x_max) || !(self.u_min < self.u_max) {
            return Err(Error::InvalidParameter("box bounds must satisfy min < max".into()));
        }
        for w in [&self.q_x, &self.q_n, &self.r] {
            crate::linalg::Cholesky::new(w)?;
        }
        Ok(())
    }

    pub fn with_x0(&self, x0: Vec<f64>) -> Self {
        Self { x0, ..self.clone() }
    }

    /// Stacked states `χ` from simulating the dynamics under `υ`.
    pub fn simulate(&self, upsilon: &[f64]) -> Vec<f64> {
        let (nx, nu) = (self.nx(), self.nu());
        let jr_r = self.j_r.mul_vec(&self.r_ref);
        let mut x = self.x0.clone();
        let mut chi = Vec::with_capacity(nx * self.horizon);
        for t in 0..self.horizon {
            let hx = self.h.mul_vec(&x);
            let ju = self.j.mul_vec(&upsilon[t * nu..(t + 1) * nu]);
            x = (0..nx).map(|i| hx[i] + ju[i] + jr_r[i]).collect();
            chi.extend_from_slice(&x);
        }
        chi
    }
}

/// Which box constraints enter `A`. The state box alone gives `m = 2·N·n_x`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConstraintSets {
    pub state_box: bool,
    pub input_box: bool,
}

impl Default for ConstraintSets {
    fn default() -> Self {
        Self {
            state_box: true,
            input_box: true,
        }
    }
}

impl ConstraintSets {
    pub const STATE_ONLY: Self = Self {
        state_box: true,
        input_box: false,
    };
}

#[derive(Clone, Debug)]
pub struct CondensedQp {
    pub theta: Matrix,
    pub phi: Matrix,
    pub phi_r: Matrix,
    pub q_bar: Matrix,
    pub r_bar: Matrix,
    pub qp: QpProblem,
}

fn block_diag(blocks: &[&Matrix]) -> Matrix {
    let rows = blocks.iter().map(|b| b.rows()).sum();
    let cols = blocks.iter().map(|b| b.cols()).sum();
    let mut out = Matrix::zeros(rows, cols);
    let (mut r, mut c) = (0, 0);
    for b in blocks {
        out.set_block(r, c, b);
        r += b.rows();
        c += b.cols();
    }
    out
}

pub fn condense(mpc: &MpcProblem, sets: ConstraintSets) -> Result<CondensedQp> {
    mpc.validate()?;
    if !sets.state_box && !sets.input_box {
        return Err(Error::InvalidParameter(
            "at least one constraint set is required".into(),
        ));
    }
    let (nx, nu, nr, np) = (mpc.nx(), mpc.nu(), mpc.nr(), mpc.horizon);

    // Row block t of Θ is H^{t+1}; block (t, s ≤ t) of Φ is H^{t−s}J.
    let mut powers = vec![Matrix::identity(nx)];
    for t in 0..np {
        let next = mpc.h.matmul(&powers[t]);
        powers.push(next);
    }
    let mut theta = Matrix::zeros(nx * np, nx);
    let mut phi = Matrix::zeros(nx * np, nu * np);
    let mut phi_r = Matrix::zeros(nx * np, nr * np);
    for t in 0..np {
        theta.set_block(t * nx, 0, &powers[t + 1]);
        for s in 0..=t {
            phi.set_block(t * nx, s * nu, &powers[t - s].matmul(&mpc.j));
            phi_r.set_block(t * nx, s * nr, &powers[t - s].matmul(&mpc.j_r));
        }
    }

    let mut q_blocks: Vec<&Matrix> = vec![mpc.q_x.as_matrix(); np - 1];
    q_blocks.push(mpc.q_n.as_matrix());
    let q_bar = block_diag(&q_blocks);
    let r_bar = block_diag(&vec![mpc.r.as_matrix(); np]);

    let q_mat = SymMatrix::from_symmetrized(&r_bar.add(&phi.transpose().matmul(&q_bar.matmul(&phi))));
    // Free response χ₀ = Θx₀ + Φ_rυ_r.
    let upsilon_r: Vec<f64> = mpc.r_ref.iter().cloned().cycle().take(nr * np).collect();
    let theta_x0 = theta.mul_vec(&mpc.x0);
    let phi_r_ur = phi_r.mul_vec(&upsilon_r);
    let free: Vec<f64> = theta_x0.iter().zip(&phi_r_ur).map(|(a, b)| a + b).collect();

    // q = ΦᵀQ̄(χ₀ − 1⊗x_r) − R̄(1⊗u_r)
    let x_ref_stack: Vec<f64> = mpc.x_ref.iter().cloned().cycle().take(nx * np).collect();
    let u_ref_stack: Vec<f64> = mpc.u_ref.iter().cloned().cycle().take(nu * np).collect();
    let offset: Vec<f64> = free.iter().zip(&x_ref_stack).map(|(f, r)| f - r).collect();
    let q_lin: Vec<f64> = phi
        .tr_mul_vec(&q_bar.mul_vec(&offset))
        .iter()
        .zip(r_bar.mul_vec(&u_ref_stack))
        .map(|(a, b)| a - b)
        .collect();

    // Lower bounds enter as −Φυ ≤ −x_min + χ₀ and −υ ≤ −u_min.
    let mut a = Matrix::zeros(0, nu * np);
    let mut b = Vec::new();
    if sets.state_box {
        a = a.vstack(&phi).vstack(&phi.scale(-1.0));
        b.extend(free.iter().map(|f| mpc.x_max - f));
        b.extend(free.iter().map(|f| f - mpc.x_min));
    }
    if sets.input_box {
        let eye = Matrix::identity(nu * np);
        a = a.vstack(&eye).vstack(&eye.scale(-1.0));
        b.extend(std::iter::repeat_n(mpc.u_max, nu * np));
        b.extend(std::iter::repeat_n(-mpc.u_min, nu * np));
    }
    let qp = QpProblem::from_parts(q_mat, q_lin, a, b)?;
    Ok(CondensedQp {
        theta,
        phi,
        phi_r,
        q_bar,
        r_bar,
        qp,
    })
}

/// Rescales each row of `A` and entry of `c` to give `A` unit-norm rows.
pub fn normalize_rows(qp: &QpProblem) -> Result<QpProblem> {
    let norms: Vec<f64> = (0..qp.m()).map(|i| norm(qp.a().row(i))).collect();
    if let Some(i) = norms.iter().position(|n| *n == 0.0) {
        return Err(Error::ZeroRow(i));
    }
    let inv: Vec<f64> = norms.iter().map(|n| 1.0 / n).collect();
    let (a, c) = qp.scaled(Some(&inv));
    QpProblem::new(qp.cost().clone(), a, c)
}

/// Stable plant with `n_r = 1`, `r = 1` and steady state `x_op` at `u = 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlantSpec {
    pub nx: usize,
    pub nu: usize,
    pub horizon: usize,
    pub spectral_radius: f64,
    /// Operating level shared by all states.
    pub x_op: f64,
    /// State box half-width around `x_op`.
    pub x_band: f64,
    /// Input box half-width around 0.
    pub u_band: f64,
    /// Tracking target `x_r = x_op + ref_offset`; beyond `x_band` it lies
    /// outside the state box and the optimum is constrained.
    pub ref_offset: f64,
    pub input_weight: f64,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            nx: 4,
            nu: 2,
            horizon: 5,
            spectral_radius: 0.95,
            x_op: 12.5,
            x_band: 3.0,
            u_band: 5.0,
            ref_offset: 0.0,
            input_weight: 0.1,
            seed: 1,
        }
    }
}

/// `H = SΛS⁻¹` with real eigenvalues in `[ρ/2, ρ]` and `max|λ| = ρ`, `J` with
/// unit-norm columns, `J_r = (I − H)x_op`.
pub fn generate_plant<R: Rng + ?Sized>(spec: &PlantSpec, rng: &mut R) -> Result<MpcProblem> {
    let (nx, nu) = (spec.nx, spec.nu);
    if nx == 0 || nu == 0 || !(spec.spectral_radius > 0.0) {
        return Err(Error::InvalidParameter(
            "plant dimensions and radius must be positive".into(),
        ));
    }
    let h = loop {
        let s = gaussian_matrix(rng, nx, nx).add(&Matrix::identity(nx).scale(2.0));
        let Ok(lu) = Lu::new(&s) else { continue };
        let mut lam: Vec<f64> = (0..nx)
            .map(|_| spec.spectral_radius * rng.gen_range(0.5..1.0))
            .collect();
        lam[0] = spec.spectral_radius;
        let h = s.scale_cols(&lam).matmul(&lu.inverse());
        if h.is_finite() {
            break h;
        }
    };
    let j = loop {
        let j = gaussian_matrix(rng, nx, nu);
        if (0..nu).all(|c| norm(&j.col(c)) > 1e-3) {
            let inv: Vec<f64> = (0..nu).map(|c| 1.0 / norm(&j.col(c))).collect();
            break j.scale_cols(&inv);
        }
    };
    let x_op = vec![spec.x_op; nx];
    let j_r = Matrix::column(&Matrix::identity(nx).sub(&h).mul_vec(&x_op));
    let mpc = MpcProblem {
        h,
        j,
        j_r,
        q_x: SymMatrix::identity(nx),
        q_n: SymMatrix::identity(nx),
        r: SymMatrix::from_diag(&vec![spec.input_weight; nu]),
        horizon: spec.horizon,
        x_min: spec.x_op - spec.x_band,
        x_max: spec.x_op + spec.x_band,
        u_min: -spec.u_band,
        u_max: spec.u_band,
        x0: x_op.clone(),
        x_ref: x_op.iter().map(|x| x + spec.ref_offset).collect(),
        u_ref: vec![0.0; nu],
        r_ref: vec![1.0],
    };
    mpc.validate()?;
    Ok(mpc)
}

/// Initial-state levels of the reference study.
pub const GRID_LEVELS: [f64; 5] = [10.0, 11.25, 12.5, 13.75, 15.0];

/// All `levels^nx` initial states, first coordinate varying slowest.
pub fn initial_state_grid(levels: &[f64], nx: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for _ in 0..nx {
        out = out
            .into_iter()
            .flat_map(|p| {
                levels.iter().map(move |&l| {
                    let mut q = p.clone();
                    q.push(l);
                    q
                })
            })
            .collect();
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Feasibility {
    Feasible,
    /// A Farkas certificate `y ≥ 0, Aᵀy = 0, cᵀy < 0` was found.
    Infeasible,
    /// Neither convergence nor a certificate within the budget.
    Undetermined,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub stop: StopRule,
    /// Relative tolerance on `‖Aᵀy‖` for accepting a certificate.
    pub certificate_tol: f64,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            stop: StopRule::new(1e-7, 20_000),
            certificate_tol: 1e-6,
        }
    }
}

/// Runs ADMM at the tuned step size. Divergent runs leave `u^{k+1} − u^k`
/// approaching a Farkas certificate for `Ax ≤ c`, which is checked directly.
pub fn feasibility_probe(qp: &QpProblem, options: ProbeOptions) -> Result<Feasibility> {
    let rho = tune_qp(&QpSpectral::compute(qp, None)?).rho_star;
    let solver = QpSolver::new(qp, &QpParams::new(rho, 1.0), SolveOptions::FAST)?;
    let mut state = solver.initial_state(&QpInit::default())?;
    let mut prev_u = state.u.clone();
    while state.k < options.stop.max_iter {
        let (next, r, s) = solver.step(&state);
        if norm(&r).max(norm(&s)) <= options.stop.tol {
            return Ok(Feasibility::Feasible);
        }
        prev_u = std::mem::replace(&mut state, next).u;
    }
    let y: Vec<f64> = state.u.iter().zip(&prev_u).map(|(a, b)| (a - b).max(0.0)).collect();
    let y_norm = norm(&y);
    if y_norm > 0.0 {
        let a_norm = qp.a().spectral_norm();
        let aty = norm(&qp.a().tr_mul_vec(&y));
        if aty <= options.certificate_tol * a_norm * y_norm && dot(qp.c(), &y) < 0.0 {
            return Ok(Feasibility::Infeasible);
        }
    }
    Ok(Feasibility::Undetermined)
}

#[derive(Clone, Debug)]
pub struct BatchInstance {
    pub x0: Vec<f64>,
    pub qp: QpProblem,
}

/// Batch of QPs sharing `Q` and `A`, split by the feasibility probe.
#[derive(Clone, Debug, Default)]
pub struct Batch {
    pub feasible: Vec<BatchInstance>,
    pub infeasible: Vec<Vec<f64>>,
    pub undetermined: Vec<Vec<f64>>,
}

pub fn generate_batch(
    template: &MpcProblem,
    sets: ConstraintSets,
    normalize: bool,
    grid: &[Vec<f64>],
    probe: ProbeOptions,
) -> Result<Batch> {
    let mut batch = Batch::default();
    for x0 in grid {
        let condensed = condense(&template.with_x0(x0.clone()), sets)?;
        let qp = if normalize {
            normalize_rows(&condensed.qp)?
        } else {
            condensed.qp
        };
        match feasibility_probe(&qp, probe)? {
            Feasibility::Feasible => batch.feasible.push(BatchInstance { x0: x0.clone(), qp }),
            Feasibility::Infeasible => batch.infeasible.push(x0.clone()),
            Feasibility::Undetermined => batch.undetermined.push(x0.clone()),
        }
    }
    Ok(batch)
}

/// Random `υ` for tests and demos.
pub fn random_inputs<R: Rng + ?Sized>(rng: &mut R, mpc: &MpcProblem) -> Vec<f64> {
    gaussian_vec(rng, mpc.nu() * mpc.horizon)
}
