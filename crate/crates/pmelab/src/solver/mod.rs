//! The implicit Euler finite-difference scheme in the variable `v = u^alpha`.
//!
//! One step solves, for each node `i` with periodic indices,
//!
//! ```text
//! v_i - v_i^prev = (alpha*tau/h^2) * v_i^{(alpha-1)/alpha}
//!                  * (w_{i+1} - 2 w_i + w_{i-1}),    w_j = v_j^{beta/alpha},
//! ```
//!
//! by a damped Newton iteration in row-rescaled form, using the banded
//! periodic Jacobian structure. Iterates are clamped at a strictly positive
//! floor (within the residual budget), so fractional powers never see a
//! negative or zero base and a degenerate support can spread: the row of a
//! node at exactly zero is solved by zero no matter how much flux arrives
//! from its neighbors, and a solver that parks there silently violates the
//! discrete mass identity.

mod newton;

use crate::functionals::{self, EquilibriumRef, FunctionalRecord};
use crate::grid::{second_difference, GridSpec, StateU, StateV};
use crate::{Error, Result};
use newton::{solve_step, SolveControls};

/// Exponents and time step of the scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeParams {
    alpha: f64,
    beta: f64,
    tau: f64,
}

impl SchemeParams {
    /// Requires `alpha > 1` (the entropy constant `alpha/(alpha-1)` must be
    /// finite), `beta > 0` and `tau > 0`.
    pub fn new(alpha: f64, beta: f64, tau: f64) -> Result<Self> {
        if !(alpha > 1.0) || !alpha.is_finite() {
            return Err(Error::invalid(format!("alpha must be > 1, got {alpha}")));
        }
        if !(beta > 0.0) || !beta.is_finite() {
            return Err(Error::invalid(format!("beta must be > 0, got {beta}")));
        }
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
        }
        Ok(SchemeParams { alpha, beta, tau })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        SchemeParams::new(self.alpha, self.beta, tau)
    }

    /// True iff `beta >= 1` and `(alpha, beta)` lies in the scanned
    /// admissible region for the given `eps` (checked with the default
    /// pointwise scan domain).
    pub fn theorem_hypotheses_met(&self, eps: f64) -> bool {
        self.beta >= 1.0 && crate::inequality::alphabeta_admissible(self.alpha, self.beta, eps)
    }
}

/// Stopping controls for the nonlinear solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Relative residual tolerance; the accepted iterate satisfies
    /// `max|R| <= residual_tol * (1 + max v_prev)`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Initial Newton step fraction in `(0, 1]`; halved on residual increase.
    pub damping: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            residual_tol: 1e-12,
            max_iterations: 200,
            damping: 1.0,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.residual_tol > 0.0) {
            return Err(Error::invalid("residual_tol must be > 0"));
        }
        if self.max_iterations < 1 {
            return Err(Error::invalid("max_iterations must be >= 1"));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::invalid("damping must lie in (0, 1]"));
        }
        Ok(())
    }
}

/// Per-step solver report; part of the public step contract so callers can
/// assert the residual bound without recomputation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostics {
    pub iterations: usize,
    pub residual: f64,
    /// Number of damped (shortened) Newton updates, including fallback sweeps.
    pub damping_events: usize,
}

/// Barenblatt scenario selector: `Slow` is the degenerate case `beta > 1`
/// (compactly supported profile), `Fast` is `0 < beta < 1` (strictly
/// positive profile).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BarenblattCase {
    Slow,
    Fast,
}

/// Self-similar initial profile
/// `u0(x) = t0^{-1/(beta+1)} (C - (beta-1)/(2 beta) |x-x0|^2 / t0^{2/(beta+1)})_+^{1/(beta-1)}`
/// evaluated pointwise at the grid nodes, with `x0 = 1/2` and the case
/// parameters: slow – `t0 = 1e-4`, `C = (beta-1)/(2 beta) x0^2 / (t_end+t0)^{2/(beta+1)}`
/// with `t_end = 5e-4` (the support reaches the domain boundary at `t_end`);
/// fast – `t0 = 1e-2`, `C = t0^{(beta-1)/(beta+1)}` so the maximum equals one.
pub fn barenblatt_init(grid: GridSpec, beta: f64, case: BarenblattCase) -> Result<StateU> {
    let (t0, c) = match case {
        BarenblattCase::Slow => {
            if !(beta > 1.0) {
                return Err(Error::invalid(format!(
                    "slow diffusion requires beta > 1, got {beta}"
                )));
            }
            let t0 = 1e-4f64;
            let t_end = 5e-4f64;
            let x0 = 0.5f64;
            let c = (beta - 1.0) / (2.0 * beta) * x0 * x0
                / (t_end + t0).powf(2.0 / (beta + 1.0));
            (t0, c)
        }
        BarenblattCase::Fast => {
            if !(beta > 0.0 && beta < 1.0) {
                return Err(Error::invalid(format!(
                    "fast diffusion requires 0 < beta < 1, got {beta}"
                )));
            }
            let t0 = 1e-2f64;
            (t0, t0.powf((beta - 1.0) / (beta + 1.0)))
        }
    };
    let x0 = 0.5;
    let front = t0.powf(-1.0 / (beta + 1.0));
    let curv = (beta - 1.0) / (2.0 * beta) / t0.powf(2.0 / (beta + 1.0));
    let exponent = 1.0 / (beta - 1.0);
    let values = (0..grid.n_cells())
        .map(|i| {
            let dx = grid.node(i) - x0;
            // Clamp before the fractional power: z^p with z = 0, p > 0 is 0,
            // and negative bases are never evaluated.
            let z = (c - curv * dx * dx).max(0.0);
            if z == 0.0 {
                0.0
            } else {
                front * z.powf(exponent)
            }
        })
        .collect();
    StateU::new(values, grid)
}

/// One implicit Euler step. Returns the new state together with solver
/// diagnostics; the accepted state satisfies the residual bound
/// `max|R| <= residual_tol * (1 + max v_prev)`, keeps all entries
/// nonnegative and does not increase `sum_i v_i` beyond that slack.
///
/// Degenerate data is regularized: the previous state is floored at
/// `0.1 * residual_tol * (1 + max v_prev)` before the solve, which keeps
/// every iterate strictly positive (fractional powers and their derivatives
/// stay finite, and any exact positive solution obeys the discrete mass
/// identities). The perturbation is inside the residual budget, so the
/// returned state still satisfies the contract against the original state.
pub fn step(
    v_prev: &StateV,
    params: &SchemeParams,
    opts: &SolverOptions,
) -> Result<(StateV, StepDiagnostics)> {
    opts.validate()?;
    let grid = *v_prev.grid();
    let prev = v_prev.values();
    let h = grid.h();
    let coef = params.alpha * params.tau / (h * h);
    let exp_phi = (params.alpha - 1.0) / params.alpha;
    let exp_w = params.beta / params.alpha;

    let tol = opts.residual_tol * (1.0 + v_prev.max());
    let delta = 0.1 * tol;
    let floored: Vec<f64> = prev.iter().map(|x| x.max(delta)).collect();
    let controls = SolveControls {
        // The floor perturbs each row by at most delta.
        tol: tol - delta,
        floor: 0.01 * delta,
        damping: opts.damping,
        budget: opts.max_iterations,
    };
    let (v, stats) = solve_step(&floored, coef, exp_phi, exp_w, &controls)?;

    // Residual of the returned state against the *original* previous state.
    let w: Vec<f64> = v.iter().map(|&x| x.powf(exp_w)).collect();
    let d2w = second_difference(&w, &grid)?;
    let mut rnorm = 0.0f64;
    for i in 0..v.len() {
        let r = v[i] - prev[i] - coef * v[i].powf(exp_phi) * d2w[i];
        rnorm = rnorm.max(r.abs());
    }
    if rnorm > tol {
        return Err(Error::NonConvergence {
            iterations: stats.iterations,
            residual: rnorm,
            tolerance: tol,
            last_iterate: v,
        });
    }

    let state = StateV::new(v, grid)?;
    Ok((
        state,
        StepDiagnostics {
            iterations: stats.iterations,
            residual: rnorm,
            damping_events: stats.damping_events,
        },
    ))
}

/// A computed trajectory: the state sequence, per-step solver diagnostics
/// and the functional records evaluated against the run's own equilibrium
/// reference (`U` = total mass of `u` at the final recorded step).
#[derive(Debug, Clone)]
pub struct Trajectory {
    params: SchemeParams,
    states: Vec<StateV>,
    diagnostics: Vec<StepDiagnostics>,
    records: Vec<FunctionalRecord>,
    equilibrium: EquilibriumRef,
}

impl Trajectory {
    pub fn params(&self) -> &SchemeParams {
        &self.params
    }

    pub fn states(&self) -> &[StateV] {
        &self.states
    }

    pub fn diagnostics(&self) -> &[StepDiagnostics] {
        &self.diagnostics
    }

    pub fn records(&self) -> &[FunctionalRecord] {
        &self.records
    }

    pub fn equilibrium(&self) -> EquilibriumRef {
        self.equilibrium
    }

    /// Minimum of `u = v^{1/alpha}` over all nodes and all recorded states.
    pub fn min_u(&self) -> f64 {
        let e = 1.0 / self.params.alpha();
        self.states
            .iter()
            .map(|s| s.min().powf(e))
            .fold(f64::INFINITY, f64::min)
    }
}

/// Advance `n_steps` implicit Euler steps from `v0` and evaluate the
/// entropy/Fisher/production/mass record at every stored state.
pub fn simulate(
    v0: &StateV,
    params: &SchemeParams,
    n_steps: usize,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    let mut states = Vec::with_capacity(n_steps + 1);
    let mut diagnostics = Vec::with_capacity(n_steps);
    states.push(v0.clone());
    for k in 0..n_steps {
        let (next, diag) = step(states.last().unwrap(), params, opts).map_err(|e| {
            Error::StepFailed {
                step: k + 1,
                source: Box::new(e),
            }
        })?;
        states.push(next);
        diagnostics.push(diag);
    }

    let u_mass = functionals::total_mass_u(states.last().unwrap(), params.alpha());
    let equilibrium = EquilibriumRef::from_mass(u_mass, params.alpha());
    let records = build_records(&states, &diagnostics, params, equilibrium)?;
    Ok(Trajectory {
        params: *params,
        states,
        diagnostics,
        records,
        equilibrium,
    })
}

fn build_records(
    states: &[StateV],
    diagnostics: &[StepDiagnostics],
    params: &SchemeParams,
    equilibrium: EquilibriumRef,
) -> Result<Vec<FunctionalRecord>> {
    let alpha = params.alpha();
    let beta = params.beta();
    states
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let u = v.to_u(alpha);
            let (residual, iterations) = if k == 0 {
                (0.0, 0)
            } else {
                let d = diagnostics[k - 1];
                (d.residual, d.iterations)
            };
            Ok(FunctionalRecord {
                step: k,
                time: k as f64 * params.tau(),
                entropy_h: functionals::entropy_h(v, alpha, equilibrium.v_level())?,
                fisher: functionals::fisher_f(v, alpha, beta)?,
                production: functionals::production_sbp(v, alpha, beta)?,
                mass_u: functionals::total_mass_u(v, alpha),
                mass_v: functionals::total_mass_v(v),
                rel_entropy_u: functionals::rel_entropy(&u, alpha, equilibrium.u_level())?,
                residual,
                iterations,
            })
        })
        .collect()
}
