//! Scenario definitions, end-to-end runs and CSV emission.
//!
//! A scenario bundles the exponents, the Barenblatt case, and lists of grid
//! sizes and time steps; each `(N, tau)` pair yields one run artifact with
//! the per-step functional table and a decay certificate. The equilibrium
//! reference for the relative entropy is the total mass at the final
//! recorded step of that run (mass is not conserved by the scheme, only
//! monotone, so the reference necessarily depends on the run itself).

use crate::bakry_emery::{certify, DecayCertificate};
use crate::functionals::FunctionalRecord;
use crate::grid::GridSpec;
use crate::solver::{
    barenblatt_init, simulate, BarenblattCase, SchemeParams, SolverOptions, Trajectory,
};
use crate::{Error, Result};
use rayon::prelude::*;
use serde::Deserialize;
use std::io::Write as _;
use std::path::{Path, PathBuf};

/// Final time of the slow-diffusion scenario; the Barenblatt support
/// reaches the domain boundary there, so runs must not pass it.
pub const SLOW_T_END: f64 = 5e-4;

/// Default time horizon for fast-diffusion runs.
pub const FAST_T_END: f64 = 5e-2;

/// A named experiment: exponents, initial-data case, and the `(N, tau)`
/// matrix to sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub alpha: f64,
    pub beta: f64,
    pub case: BarenblattCase,
    pub eps: f64,
    pub grid_sizes: Vec<usize>,
    pub time_steps: Vec<f64>,
    /// Explicit step count; when absent, each run covers the case horizon
    /// (`SLOW_T_END` or `FAST_T_END`) with `round(horizon/tau)` steps.
    pub n_steps: Option<usize>,
    pub solver: SolverOptions,
}

impl Scenario {
    /// The fast-diffusion reference scenario (`alpha = 2`, `beta = 1/2`).
    pub fn fast_default() -> Scenario {
        Scenario {
            name: "fast".into(),
            alpha: 2.0,
            beta: 0.5,
            case: BarenblattCase::Fast,
            eps: 0.25,
            grid_sizes: vec![128],
            time_steps: vec![1e-4],
            n_steps: None,
            solver: SolverOptions::default(),
        }
    }

    /// The slow-diffusion reference scenario (`alpha = 3`, `beta = 4`).
    pub fn slow_default() -> Scenario {
        Scenario {
            name: "slow".into(),
            alpha: 3.0,
            beta: 4.0,
            case: BarenblattCase::Slow,
            eps: 0.25,
            grid_sizes: vec![128],
            time_steps: vec![1e-4],
            n_steps: None,
            solver: SolverOptions::default(),
        }
    }

    pub fn horizon(&self) -> f64 {
        match self.case {
            BarenblattCase::Slow => SLOW_T_END,
            BarenblattCase::Fast => FAST_T_END,
        }
    }

    /// Steps for a given `tau`: the explicit count, or the case horizon.
    pub fn steps_for(&self, tau: f64) -> usize {
        match self.n_steps {
            Some(n) => n,
            None => (self.horizon() / tau).round().max(1.0) as usize,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid_sizes.is_empty() || self.time_steps.is_empty() {
            return Err(Error::Config(
                "scenario needs at least one grid size and one time step".into(),
            ));
        }
        if !(self.eps > 0.0 && self.eps <= 1.0) {
            return Err(Error::Config(format!(
                "eps must lie in (0, 1], got {}",
                self.eps
            )));
        }
        SchemeParams::new(self.alpha, self.beta, self.time_steps[0])
            .map_err(|e| Error::Config(e.to_string()))?;
        match self.case {
            BarenblattCase::Slow if !(self.beta > 1.0) => {
                return Err(Error::Config(format!(
                    "slow case requires beta > 1, got {}",
                    self.beta
                )));
            }
            BarenblattCase::Fast if !(self.beta < 1.0) => {
                return Err(Error::Config(format!(
                    "fast case requires beta < 1, got {}",
                    self.beta
                )));
            }
            _ => {}
        }
        for &n in &self.grid_sizes {
            GridSpec::new(n)?;
        }
        for &tau in &self.time_steps {
            if !(tau > 0.0) {
                return Err(Error::Config(format!("time step must be > 0, got {tau}")));
            }
            // The slow profile hits the domain boundary at SLOW_T_END.
            if self.case == BarenblattCase::Slow {
                let t_total = self.steps_for(tau) as f64 * tau;
                if t_total > SLOW_T_END * (1.0 + 1e-9) {
                    return Err(Error::Config(format!(
                        "slow runs must stay within t_end = {SLOW_T_END}; \
                         {} steps at tau = {tau} reach {t_total}",
                        self.steps_for(tau)
                    )));
                }
            }
        }
        self.solver.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Parse from the flat key-value config format (TOML syntax).
    pub fn from_toml_str(text: &str) -> Result<Scenario> {
        let raw: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let scenario = raw.into_scenario()?;
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn from_toml_file(path: &Path) -> Result<Scenario> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Scenario::from_toml_str(&text)
    }

    /// Apply one `key=value` override after config parsing.
    pub fn apply_override(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("bad override {what}='{value}'"));
        match key {
            "name" => self.name = value.to_string(),
            "alpha" => self.alpha = value.parse().map_err(|_| bad("alpha"))?,
            "beta" => self.beta = value.parse().map_err(|_| bad("beta"))?,
            "eps" => self.eps = value.parse().map_err(|_| bad("eps"))?,
            "case" => {
                self.case = match value {
                    "slow" => BarenblattCase::Slow,
                    "fast" => BarenblattCase::Fast,
                    _ => return Err(bad("case")),
                }
            }
            "n" | "grid_sizes" => {
                self.grid_sizes = split_list(value)
                    .map(|s| s.parse().map_err(|_| bad("grid_sizes")))
                    .collect::<Result<_>>()?;
            }
            "tau" | "time_steps" => {
                self.time_steps = split_list(value)
                    .map(|s| s.parse().map_err(|_| bad("time_steps")))
                    .collect::<Result<_>>()?;
            }
            "n_steps" => self.n_steps = Some(value.parse().map_err(|_| bad("n_steps"))?),
            "residual_tol" => {
                self.solver.residual_tol = value.parse().map_err(|_| bad("residual_tol"))?
            }
            "max_iterations" => {
                self.solver.max_iterations = value.parse().map_err(|_| bad("max_iterations"))?
            }
            "damping" => self.solver.damping = value.parse().map_err(|_| bad("damping"))?,
            _ => return Err(Error::Config(format!("unknown override key '{key}'"))),
        }
        Ok(())
    }
}

fn split_list(value: &str) -> impl Iterator<Item = &str> {
    value.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// On-disk scenario schema; unknown keys are rejected.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioConfig {
    name: String,
    alpha: f64,
    beta: f64,
    case: String,
    #[serde(default = "default_eps")]
    eps: f64,
    grid_sizes: Vec<usize>,
    time_steps: Vec<f64>,
    n_steps: Option<usize>,
    residual_tol: Option<f64>,
    max_iterations: Option<usize>,
    damping: Option<f64>,
}

fn default_eps() -> f64 {
    0.25
}

impl ScenarioConfig {
    fn into_scenario(self) -> Result<Scenario> {
        let case = match self.case.as_str() {
            "slow" => BarenblattCase::Slow,
            "fast" => BarenblattCase::Fast,
            other => {
                return Err(Error::Config(format!(
                    "case must be 'slow' or 'fast', got '{other}'"
                )))
            }
        };
        let defaults = SolverOptions::default();
        Ok(Scenario {
            name: self.name,
            alpha: self.alpha,
            beta: self.beta,
            case,
            eps: self.eps,
            grid_sizes: self.grid_sizes,
            time_steps: self.time_steps,
            n_steps: self.n_steps,
            solver: SolverOptions {
                residual_tol: self.residual_tol.unwrap_or(defaults.residual_tol),
                max_iterations: self.max_iterations.unwrap_or(defaults.max_iterations),
                damping: self.damping.unwrap_or(defaults.damping),
            },
        })
    }
}

/// One completed `(N, tau)` run.
#[derive(Debug, Clone)]
pub struct RunArtifact {
    pub scenario_name: String,
    pub alpha: f64,
    pub beta: f64,
    pub n_cells: usize,
    pub tau: f64,
    pub n_steps: usize,
    pub trajectory: Trajectory,
    pub certificate: DecayCertificate,
    pub csv_path: Option<PathBuf>,
}

impl RunArtifact {
    pub fn records(&self) -> &[FunctionalRecord] {
        self.trajectory.records()
    }
}

fn run_one(scenario: &Scenario, n_cells: usize, tau: f64) -> Result<RunArtifact> {
    let grid = GridSpec::new(n_cells)?;
    let params = SchemeParams::new(scenario.alpha, scenario.beta, tau)?;
    let u0 = barenblatt_init(grid, scenario.beta, scenario.case)?;
    let v0 = u0.to_v(scenario.alpha);
    let n_steps = scenario.steps_for(tau);
    let trajectory = simulate(&v0, &params, n_steps, &scenario.solver).map_err(|e| {
        let step = match &e {
            Error::StepFailed { step, .. } => *step,
            _ => 0,
        };
        Error::StepFailed {
            step,
            source: Box::new(Error::invalid(format!(
                "scenario '{}' (N = {n_cells}, tau = {tau:e}): {e}",
                scenario.name
            ))),
        }
    })?;
    let certificate = certify(&trajectory, scenario.eps)?;
    Ok(RunArtifact {
        scenario_name: scenario.name.clone(),
        alpha: scenario.alpha,
        beta: scenario.beta,
        n_cells,
        tau,
        n_steps,
        trajectory,
        certificate,
        csv_path: None,
    })
}

/// Run every `(N, tau)` pair of the scenario. Pairs are independent and run
/// in parallel; the artifact order is the row-major `(N, tau)` order.
pub fn run_scenario(scenario: &Scenario) -> Result<Vec<RunArtifact>> {
    scenario.validate()?;
    let pairs: Vec<(usize, f64)> = scenario
        .grid_sizes
        .iter()
        .flat_map(|&n| scenario.time_steps.iter().map(move |&tau| (n, tau)))
        .collect();
    pairs
        .par_iter()
        .map(|&(n, tau)| run_one(scenario, n, tau))
        .collect()
}

/// Emit the per-step table of one artifact as CSV (full double precision,
/// deterministic bytes). Returns the canonical file name used.
pub fn emit_csv(artifact: &mut RunArtifact, dir: &Path) -> Result<PathBuf> {
    let name = format!(
        "{}_N{}_tau{:e}.csv",
        artifact.scenario_name, artifact.n_cells, artifact.tau
    );
    let path = dir.join(name);
    let mut out = String::from("k,t,mass_u,mass_v,H,F,P,ENT,residual,newton_iters\n");
    for r in artifact.trajectory.records() {
        out.push_str(&format!(
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            r.step,
            r.time,
            r.mass_u,
            r.mass_v,
            r.entropy_h,
            r.fisher,
            r.production,
            r.rel_entropy_u,
            r.residual,
            r.iterations
        ));
    }
    let mut f = std::fs::File::create(&path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    f.write_all(out.as_bytes()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    artifact.csv_path = Some(path.clone());
    Ok(path)
}

/// Write one certificate per artifact as a flat key-value text file.
pub fn emit_certificate(artifact: &RunArtifact, dir: &Path) -> Result<PathBuf> {
    let name = format!(
        "{}_N{}_tau{:e}.cert",
        artifact.scenario_name, artifact.n_cells, artifact.tau
    );
    let path = dir.join(name);
    std::fs::write(&path, artifact.certificate.to_key_values()).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// Mass gained between the first and last step of one run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MassDefectRow {
    pub n_cells: usize,
    pub tau: f64,
    pub defect: f64,
}

/// Final-minus-initial mass for every `(N, tau)` pair. The scheme trades
/// exact conservation for the production estimate, so the defect is
/// nonnegative and shrinks with the time step.
pub fn mass_defect_study(scenario: &Scenario) -> Result<Vec<MassDefectRow>> {
    if scenario.grid_sizes.len() < 2 || scenario.time_steps.len() < 2 {
        return Err(Error::Config(
            "mass defect study needs at least two grid sizes and two time steps".into(),
        ));
    }
    let artifacts = run_scenario(scenario)?;
    Ok(artifacts
        .iter()
        .map(|a| {
            let records = a.records();
            MassDefectRow {
                n_cells: a.n_cells,
                tau: a.tau,
                defect: records.last().unwrap().mass_u - records[0].mass_u,
            }
        })
        .collect())
}
