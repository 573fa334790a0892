//! Nonlinear solve for the implicit step.
//!
//! The step is solved in row-rescaled form,
//!
//! ```text
//! g_i(v) = (v_i - p_i) * v_i^{-(alpha-1)/alpha} - coef * (w_{i+1} - 2 w_i + w_{i-1}) = 0 ,
//! ```
//!
//! which is equivalent to the raw residual `R_i = v_i^{(alpha-1)/alpha} g_i`
//! for positive iterates but keeps degenerate nodes visible: at a node
//! collapsing toward zero the raw residual vanishes with the prefactor while
//! `g_i` diverges, so merit descent cannot park the iteration in a pinned
//! near-zero state that silently absorbs flux (and mass) from its neighbors.
//!
//! Globalization, outermost to innermost:
//! * a time-step ladder — if the full step fails, two half steps provide an
//!   accurate warm start for re-solving the full step;
//! * nonlinear Gauss-Seidel "activation" sweeps that re-solve single rows
//!   for their largest root, lifting nodes at a degenerate front past the
//!   watershed of their own equation;
//! * damped Newton with an Armijo backtracking line search on the scaled
//!   least-squares merit, clamping iterates at a positive floor and limiting
//!   each node to lose at most 75% of its value per update.

use crate::{Error, Result};

pub(super) struct StepProblem<'a> {
    /// Previous state, floored at a strictly positive level.
    pub prev: &'a [f64],
    /// `alpha * tau / h^2`
    pub coef: f64,
    /// `(alpha - 1)/alpha`, in `(0, 1)`
    pub exp_phi: f64,
    /// `beta/alpha`, positive
    pub exp_w: f64,
}

pub(super) struct SolveControls {
    /// Raw-residual target, `max_i |v_i^{exp_phi} g_i| <= tol`.
    pub tol: f64,
    /// Positive clamp level for iterates.
    pub floor: f64,
    /// Initial line-search fraction.
    pub damping: f64,
    /// Total Newton-iteration budget across all ladder attempts.
    pub budget: usize,
}

#[derive(Default)]
pub(super) struct SolveStats {
    pub iterations: usize,
    pub damping_events: usize,
}

struct Residual {
    scaled: Vec<f64>,
    raw_norm: f64,
    merit: f64,
}

impl StepProblem<'_> {
    fn n(&self) -> usize {
        self.prev.len()
    }

    fn residual(&self, v: &[f64]) -> Residual {
        let n = self.n();
        let w: Vec<f64> = v.iter().map(|&x| x.powf(self.exp_w)).collect();
        let mut scaled = vec![0.0; n];
        let mut raw_norm = 0.0f64;
        let mut merit = 0.0f64;
        for i in 0..n {
            let l = if i == 0 { n - 1 } else { i - 1 };
            let r = if i + 1 == n { 0 } else { i + 1 };
            let d2 = w[r] - 2.0 * w[i] + w[l];
            let phi = v[i].powf(self.exp_phi);
            let g = (v[i] - self.prev[i]) / phi - self.coef * d2;
            scaled[i] = g;
            raw_norm = raw_norm.max((phi * g).abs());
            merit += g * g;
        }
        Residual {
            scaled,
            raw_norm,
            merit,
        }
    }

    /// Cyclic tridiagonal Jacobian of the scaled residual.
    fn jacobian(&self, v: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let n = self.n();
        let dw: Vec<f64> = v
            .iter()
            .map(|&x| self.exp_w * x.powf(self.exp_w - 1.0))
            .collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for i in 0..n {
            let l = if i == 0 { n - 1 } else { i - 1 };
            let r = if i + 1 == n { 0 } else { i + 1 };
            let inv_phi = v[i].powf(-self.exp_phi);
            diag[i] = inv_phi * (1.0 - self.exp_phi * (v[i] - self.prev[i]) / v[i])
                + 2.0 * self.coef * dw[i];
            lower[i] = -self.coef * dw[l];
            upper[i] = -self.coef * dw[r];
        }
        (lower, diag, upper)
    }

    /// Nonlinear Gauss-Seidel pass choosing the largest root of each scalar
    /// row with frozen neighbors. `f_i(0^+) < 0` and `f_i -> +infinity`, so a
    /// largest root always exists; it is the branch on which an incoming
    /// degenerate front actually advances.
    fn activation_sweep(&self, v: &mut [f64]) {
        let n = self.n();
        let mut w: Vec<f64> = v.iter().map(|&x| x.powf(self.exp_w)).collect();
        for i in 0..n {
            let l = if i == 0 { n - 1 } else { i - 1 };
            let r = if i + 1 == n { 0 } else { i + 1 };
            let wn = w[l] + w[r];
            let f = |x: f64| -> f64 {
                x - self.prev[i]
                    - self.coef * x.powf(self.exp_phi) * (wn - 2.0 * x.powf(self.exp_w))
            };
            let mut hi = (self.prev[i] + 1.0).max(2.0 * v[i]);
            let mut grow = 0;
            while f(hi) <= 0.0 && grow < 200 {
                hi *= 2.0;
                grow += 1;
            }
            if grow == 200 {
                continue;
            }
            let mut lo = 0.5 * hi;
            let mut scans = 0;
            while f(lo) > 0.0 && scans < 600 {
                hi = lo;
                lo *= 0.5;
                scans += 1;
                if lo < 1e-300 {
                    break;
                }
            }
            if f(lo) > 0.0 {
                continue;
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if mid == lo || mid == hi {
                    break;
                }
                if f(mid) > 0.0 {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            v[i] = 0.5 * (lo + hi);
            w[i] = v[i].powf(self.exp_w);
        }
    }

    fn newton(
        &self,
        guess: &[f64],
        controls: &SolveControls,
        stats: &mut SolveStats,
    ) -> Option<Vec<f64>> {
        let mut v: Vec<f64> = guess.iter().map(|x| x.max(controls.floor)).collect();
        let mut res = self.residual(&v);
        let mut sweeps = 0usize;
        let attempt_cap = 80usize;
        for _ in 0..attempt_cap {
            if res.raw_norm <= controls.tol {
                return Some(self.polish(v, res, controls, stats));
            }
            if stats.iterations >= controls.budget {
                return None;
            }
            stats.iterations += 1;
            let (lower, diag, upper) = self.jacobian(&v);
            let rhs: Vec<f64> = res.scaled.iter().map(|g| -g).collect();
            let direction = solve_newton_system(&lower, &diag, &upper, &rhs);

            let mut advanced = false;
            if let Some(delta) = direction {
                let mut lam = controls.damping;
                for halving in 0..30 {
                    let trial: Vec<f64> = v
                        .iter()
                        .zip(&delta)
                        .map(|(vi, di)| (vi + lam * di).max(0.25 * vi).max(controls.floor))
                        .collect();
                    let trial_res = self.residual(&trial);
                    if trial_res.merit <= res.merit * (1.0 - 1e-4 * lam) {
                        v = trial;
                        res = trial_res;
                        if halving > 0 {
                            stats.damping_events += 1;
                        }
                        advanced = true;
                        break;
                    }
                    lam *= 0.5;
                }
            }
            if !advanced {
                sweeps += 1;
                stats.damping_events += 1;
                if sweeps > self.n() + 8 {
                    return None;
                }
                self.activation_sweep(&mut v);
                for x in v.iter_mut() {
                    if *x < controls.floor {
                        *x = controls.floor;
                    }
                }
                res = self.residual(&v);
            }
        }
        if res.raw_norm <= controls.tol {
            return Some(self.polish(v, res, controls, stats));
        }
        None
    }

    /// A few extra full Newton steps while they keep shrinking the raw
    /// residual, so downstream mass accounting sees near-machine levels.
    fn polish(
        &self,
        mut v: Vec<f64>,
        mut res: Residual,
        controls: &SolveControls,
        stats: &mut SolveStats,
    ) -> Vec<f64> {
        for _ in 0..3 {
            if res.raw_norm == 0.0 {
                break;
            }
            let (lower, diag, upper) = self.jacobian(&v);
            let rhs: Vec<f64> = res.scaled.iter().map(|g| -g).collect();
            let Some(delta) = solve_newton_system(&lower, &diag, &upper, &rhs) else {
                break;
            };
            let trial: Vec<f64> = v
                .iter()
                .zip(&delta)
                .map(|(vi, di)| (vi + di).max(0.25 * vi).max(controls.floor))
                .collect();
            let trial_res = self.residual(&trial);
            if trial_res.raw_norm < res.raw_norm {
                v = trial;
                res = trial_res;
                stats.iterations += 1;
            } else {
                break;
            }
        }
        v
    }

    /// Solve with a recursive half-step ladder: a failed solve is retried
    /// from the composition of two half steps, which is an O(tau^2)-accurate
    /// warm start for the full step.
    pub(super) fn solve(
        &self,
        controls: &SolveControls,
        depth: usize,
        stats: &mut SolveStats,
    ) -> Option<Vec<f64>> {
        if let Some(v) = self.newton(self.prev, controls, stats) {
            return Some(v);
        }
        if depth == 0 || stats.iterations >= controls.budget {
            return None;
        }
        stats.damping_events += 1;
        let half = StepProblem {
            prev: self.prev,
            coef: 0.5 * self.coef,
            exp_phi: self.exp_phi,
            exp_w: self.exp_w,
        };
        let va = half.solve(controls, depth - 1, stats)?;
        let half2 = StepProblem {
            prev: &va,
            coef: 0.5 * self.coef,
            exp_phi: self.exp_phi,
            exp_w: self.exp_w,
        };
        let vb = half2.solve(controls, depth - 1, stats)?;
        self.newton(&vb, controls, stats)
    }
}

pub(super) fn solve_step(
    prev_floored: &[f64],
    coef: f64,
    exp_phi: f64,
    exp_w: f64,
    controls: &SolveControls,
) -> Result<(Vec<f64>, SolveStats)> {
    let problem = StepProblem {
        prev: prev_floored,
        coef,
        exp_phi,
        exp_w,
    };
    let mut stats = SolveStats::default();
    match problem.solve(controls, 14, &mut stats) {
        Some(v) => Ok((v, stats)),
        None => {
            let res = problem.residual(prev_floored);
            Err(Error::NonConvergence {
                iterations: stats.iterations,
                residual: res.raw_norm,
                tolerance: controls.tol,
                last_iterate: prev_floored.to_vec(),
            })
        }
    }
}

/// Thomas algorithm for a plain tridiagonal system. `sub` couples row `i`
/// to `i-1` (length n-1), `sup` to `i+1` (length n-1).
fn solve_tridiag(sub: &[f64], diag: &[f64], sup: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = diag.len();
    let mut gam = vec![0.0; n];
    let mut x = vec![0.0; n];
    let mut bet = diag[0];
    if bet == 0.0 {
        return None;
    }
    x[0] = rhs[0] / bet;
    for j in 1..n {
        gam[j] = sup[j - 1] / bet;
        bet = diag[j] - sub[j - 1] * gam[j];
        if bet == 0.0 {
            return None;
        }
        x[j] = (rhs[j] - sub[j - 1] * x[j - 1]) / bet;
    }
    for j in (0..n - 1).rev() {
        x[j] -= gam[j + 1] * x[j + 1];
    }
    Some(x)
}

/// Solve the cyclic tridiagonal system with corner entries
/// `top_right = A[0][n-1]` and `bottom_left = A[n-1][0]` via the
/// Sherman-Morrison rank-one correction. Requires `n >= 3`.
fn solve_cyclic(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    top_right: f64,
    bottom_left: f64,
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = diag.len();
    debug_assert!(n >= 3);
    let gamma = if diag[0] != 0.0 { -diag[0] } else { -1.0 };
    let mut b = diag.to_vec();
    b[0] -= gamma;
    b[n - 1] -= top_right * bottom_left / gamma;

    let sub = &lower[1..];
    let sup = &upper[..n - 1];
    let y = solve_tridiag(sub, &b, sup, rhs)?;
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = bottom_left;
    let z = solve_tridiag(sub, &b, sup, &u)?;

    // Correction with v = (1, 0, ..., 0, top_right/gamma).
    let vy = y[0] + top_right / gamma * y[n - 1];
    let vz = 1.0 + z[0] + top_right / gamma * z[n - 1];
    if vz == 0.0 {
        return None;
    }
    let factor = vy / vz;
    Some(y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect())
}

/// Solve `J x = rhs` for the step Jacobian in (lower, diag, upper) layout.
/// For `n == 2` both neighbor couplings land on the same entry, so the
/// system is solved densely.
pub(super) fn solve_newton_system(
    lower: &[f64],
    diag: &[f64],
    upper: &[f64],
    rhs: &[f64],
) -> Option<Vec<f64>> {
    let n = diag.len();
    if n == 2 {
        let a = diag[0];
        let b = lower[0] + upper[0];
        let c = lower[1] + upper[1];
        let d = diag[1];
        let det = a * d - b * c;
        if det == 0.0 {
            return None;
        }
        return Some(vec![
            (rhs[0] * d - b * rhs[1]) / det,
            (a * rhs[1] - c * rhs[0]) / det,
        ]);
    }
    let x = solve_cyclic(lower, diag, upper, lower[0], upper[n - 1], rhs)?;
    if x.iter().any(|v| !v.is_finite()) {
        return None;
    }
    Some(x)
}
