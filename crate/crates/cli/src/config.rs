//! Experiment configuration, loaded from JSON and overridden by flags.

use std::path::{Path, PathBuf};

use admm_tune::mpc::{ConstraintSets, PlantSpec, GRID_LEVELS};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// Environment variable that replaces the configured output directory.
pub const OUT_ENV: &str = "ADMM_TUNE_OUT";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Admm,
    AdmmRelaxed,
    FastAdmm,
    FastAdmmTuned,
    Gradient,
    HeavyBall,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Admm => "admm",
            Method::AdmmRelaxed => "admm-relaxed",
            Method::FastAdmm => "fast-admm",
            Method::FastAdmmTuned => "fast-admm-tuned",
            Method::Gradient => "gradient",
            Method::HeavyBall => "heavy-ball",
        }
    }

    /// Methods whose step size is fixed by the method itself.
    pub fn ignores_grid(self) -> bool {
        matches!(self, Method::FastAdmmTuned | Method::Gradient | Method::HeavyBall)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    None,
    Optimal,
}

impl Scaling {
    pub fn name(self) -> &'static str {
        match self {
            Scaling::None => "none",
            Scaling::Optimal => "optimal",
        }
    }
}

/// Log-spaced grid `[lo, hi]` with `points` entries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        admm_tune::random::log_spaced(self.lo, self.hi, self.points)
    }

    fn validate(&self, what: &str) -> Result<()> {
        if !(self.lo > 0.0 && self.hi >= self.lo && self.points >= 1) || !self.hi.is_finite() {
            return Err(CliError::Config(format!(
                "{what} grid needs 0 < lo ≤ hi and points ≥ 1"
            )));
        }
        Ok(())
    }
}

impl std::str::FromStr for Grid {
    type Err = String;

    /// `lo:hi:points`
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split(':').collect();
        let [lo, hi, points] = parts.as_slice() else {
            return Err(format!("expected lo:hi:points, got `{s}`"));
        };
        let num = |t: &str| t.parse::<f64>().map_err(|e| format!("`{t}`: {e}"));
        Ok(Grid {
            lo: num(lo)?,
            hi: num(hi)?,
            points: points.parse().map_err(|e| format!("`{points}`: {e}"))?,
        })
    }
}

/// Step sizes to run: the analytic optimum or a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RhoSpec {
    Auto,
    Grid(Grid),
}

impl std::str::FromStr for RhoSpec {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            Ok(RhoSpec::Auto)
        } else {
            s.parse().map(RhoSpec::Grid)
        }
    }
}

/// MPC batch generator settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MpcSource {
    pub plant: PlantSpec,
    pub constraints: ConstraintSets,
    pub normalize: bool,
    /// Per-coordinate levels of the initial-state grid.
    pub levels: Vec<f64>,
}

impl Default for MpcSource {
    fn default() -> Self {
        Self {
            plant: PlantSpec::default(),
            constraints: ConstraintSets::STATE_ONLY,
            normalize: true,
            levels: GRID_LEVELS.to_vec(),
        }
    }
}

/// Where problem instances come from. Paths are relative to the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemSource {
    /// `min ½xᵀQx + qᵀx s.t. Ax ≤ c` from matrix text files.
    QpFiles {
        q_matrix: PathBuf,
        q_vector: PathBuf,
        a_matrix: PathBuf,
        c_vector: PathBuf,
    },
    /// `min ½xᵀQx + qᵀx + (δ/2)‖x‖²`; δ is a one-value file.
    L2Files {
        q_matrix: PathBuf,
        q_vector: PathBuf,
        delta: PathBuf,
    },
    /// Batch written by `condense`.
    Manifest(PathBuf),
    /// Random wide QPs, `AQ⁻¹Aᵀ` full rank.
    RandomQp {
        n: usize,
        m: usize,
        cond: f64,
        count: usize,
    },
    /// Random ℓ2 problems with spectrum log-spaced on `[lam_min, lam_max]`.
    RandomL2 {
        n: usize,
        lam_min: f64,
        lam_max: f64,
        delta: f64,
        count: usize,
    },
    Mpc(MpcSource),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: Option<ProblemSource>,
    pub methods: Vec<Method>,
    pub rho: RhoSpec,
    /// Relaxation for `admm-relaxed`; `admm` always uses 1.
    pub alpha: f64,
    pub scaling: Vec<Scaling>,
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
    pub out_dir: PathBuf,
    /// ℓ2 only: also tabulate analytic factors over this δ grid.
    pub delta_grid: Option<Grid>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            problem: None,
            methods: vec![Method::Admm],
            rho: RhoSpec::Auto,
            alpha: 2.0,
            scaling: vec![Scaling::None],
            tol: 1e-5,
            max_iter: 100_000,
            seed: 1,
            out_dir: PathBuf::from("out"),
            delta_grid: None,
        }
    }
}

impl ExperimentConfig {
    /// Reads a JSON config and resolves its relative paths against the file.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(path.to_owned(), e))?;
        let mut cfg: Self =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.problem {
            Some(ProblemSource::QpFiles {
                q_matrix,
                q_vector,
                a_matrix,
                c_vector,
            }) => {
                [q_matrix, q_vector, a_matrix, c_vector].into_iter().for_each(fix);
            }
            Some(ProblemSource::L2Files {
                q_matrix,
                q_vector,
                delta,
            }) => {
                [q_matrix, q_vector, delta].into_iter().for_each(fix);
            }
            Some(ProblemSource::Manifest(p)) => fix(p),
            _ => {}
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(CliError::Config("tol must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(CliError::Config("max_iter must be positive".into()));
        }
        if !(self.alpha > 0.0 && self.alpha <= 2.0) {
            return Err(CliError::Config("alpha must lie in (0, 2]".into()));
        }
        if self.methods.is_empty() {
            return Err(CliError::Config("no methods selected".into()));
        }
        if self.scaling.is_empty() {
            return Err(CliError::Config("no scaling selected".into()));
        }
        if let RhoSpec::Grid(g) = &self.rho {
            g.validate("rho")?;
        }
        if let Some(g) = &self.delta_grid {
            g.validate("delta")?;
        }
        Ok(())
    }

    pub fn stop(&self) -> admm_tune::StopRule {
        admm_tune::StopRule::new(self.tol, self.max_iter)
    }

    /// The flag wins, then the environment, then the config value.
    pub fn resolve_out_dir(&mut self, flag: Option<PathBuf>) {
        if let Some(p) = flag {
            self.out_dir = p;
        } else if let Some(p) = std::env::var_os(OUT_ENV).filter(|v| !v.is_empty()) {
            self.out_dir = PathBuf::from(p);
        }
    }

    pub fn problem(&self) -> Result<&ProblemSource> {
        self.problem
            .as_ref()
            .ok_or_else(|| CliError::Config("no problem source; pass --config or problem flags".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parses() {
        let g: Grid = "0.1:10:5".parse().unwrap();
        assert_eq!(
            g,
            Grid {
                lo: 0.1,
                hi: 10.0,
                points: 5
            }
        );
        assert!("1:2".parse::<Grid>().is_err());
        assert_eq!("auto".parse::<RhoSpec>().unwrap(), RhoSpec::Auto);
    }

    #[test]
    fn json_round_trip_with_defaults() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"problem": {"random-qp": {"n": 5, "m": 3, "cond": 10, "count": 2}},
                "methods": ["admm", "fast-admm"], "rho": {"grid": {"lo": 0.1, "hi": 10, "points": 3}}}"#,
        )
        .unwrap();
        assert_eq!(cfg.methods, vec![Method::Admm, Method::FastAdmm]);
        assert_eq!(cfg.tol, 1e-5);
        cfg.validate().unwrap();
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&cfg).unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_values_rejected() {
        let bad = ExperimentConfig {
            tol: 0.0,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let bad = ExperimentConfig {
            rho: RhoSpec::Grid(Grid {
                lo: -1.0,
                hi: 1.0,
                points: 3,
            }),
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        assert!(serde_json::from_str::<ExperimentConfig>(r#"{"typo": 1}"#).is_err());
    }

    #[test]
    fn mpc_source_partial_json() {
        let src: ProblemSource = serde_json::from_str(r#"{"mpc": {"plant": {"horizon": 3}}}"#).unwrap();
        let ProblemSource::Mpc(m) = src else { panic!() };
        assert_eq!(m.plant.horizon, 3);
        assert_eq!(m.plant.nx, 4);
        assert!(m.normalize);
    }
}
