//! Abstract discrete entropy-decay certification.
//!
//! The argument has three ingredients, checked here both with closed-form
//! ("theoretical") constants and with constants estimated from a computed
//! trajectory ("empirical"):
//!
//! * **A1** — the production/Fisher sandwich `C_m F <= P <= C_M F`;
//! * **A2** — one-step Fisher decay `F_k - F_{k-1} <= -tau kappa F_k`;
//! * **A3** — the entropy tends to zero.
//!
//! Whenever they hold, `H_k <= (1 + lambda tau)^{-k} H_0` with
//! `lambda = (C_m/C_M) kappa`, which is the same bound as
//! `H_0 exp(-eta lambda k tau)` for `eta = log(1 + tau lambda)/(tau lambda)`.
//!
//! A finite run cannot verify the limit in A3; the certificate instead
//! records whether the final entropy fell below a fixed fraction of the
//! initial one, and the decay bound itself is always checked directly.

use crate::functionals::FunctionalRecord;
use crate::solver::Trajectory;
use crate::{Error, Result};

/// Steps with `F < FISHER_FLOOR_REL * F(v^0)` are excluded from ratio
/// estimates; near equilibrium both P and F vanish and their quotient is
/// numerically meaningless.
pub const FISHER_FLOOR_REL: f64 = 1e-14;

/// Operational stand-in for A3 on a finite run: `H_end <= A3_TOL * H_0`.
pub const A3_TOL: f64 = 1e-3;

/// Relative slack used by the certificate for the A1 sandwich and the decay
/// bound.
pub const CERT_SLACK: f64 = 1e-8;

/// Closed-form A1 constants for the scheme,
/// `C_m = 4 alpha beta / (alpha+beta-1)^2` and `C_M = alpha/(alpha-1)`.
pub fn a1_constants(alpha: f64, beta: f64) -> Result<(f64, f64)> {
    if !(alpha > 1.0) {
        return Err(Error::invalid(format!("alpha must be > 1, got {alpha}")));
    }
    if !(beta > 0.0) || !(alpha + beta > 1.0) {
        return Err(Error::invalid(format!(
            "need beta > 0 and alpha+beta > 1, got ({alpha}, {beta})"
        )));
    }
    let s = alpha + beta - 1.0;
    Ok((4.0 * alpha * beta / (s * s), alpha / (alpha - 1.0)))
}

/// Outcome of an A1 sandwich check over a record sequence.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct A1Report {
    pub pass: bool,
    /// Step index with the smallest margin to the sandwich bounds.
    pub worst_index: usize,
    /// The ratio P/F at that step.
    pub worst_ratio: f64,
    pub checked_steps: usize,
}

/// Verify `C_m F <= P <= C_M F` (within relative `slack`) at every record
/// whose Fisher information is above the floor.
pub fn check_a1(
    records: &[FunctionalRecord],
    c_min: f64,
    c_max: f64,
    slack: f64,
) -> Result<A1Report> {
    if records.is_empty() {
        return Err(Error::invalid("no records to check"));
    }
    let floor = FISHER_FLOOR_REL * records[0].fisher;
    let mut pass = true;
    let mut worst_index = 0usize;
    let mut worst_ratio = f64::NAN;
    let mut worst_margin = f64::INFINITY;
    let mut checked = 0usize;
    for r in records {
        if !(r.fisher > floor) || r.fisher == 0.0 {
            continue;
        }
        checked += 1;
        let ratio = r.production / r.fisher;
        let margin = (ratio - c_min * (1.0 - slack)).min(c_max * (1.0 + slack) - ratio);
        if margin < worst_margin {
            worst_margin = margin;
            worst_index = r.step;
            worst_ratio = ratio;
        }
        if margin < 0.0 {
            pass = false;
        }
    }
    Ok(A1Report {
        pass,
        worst_index,
        worst_ratio,
        checked_steps: checked,
    })
}

/// Largest `kappa` certified by the sequence:
/// `kappa_hat = min_k (F_{k-1}/F_k - 1)/tau` over steps above the floor.
/// A positive return certifies A2 with that constant.
pub fn estimate_kappa(fisher: &[f64], tau: f64) -> Result<f64> {
    if fisher.len() < 2 {
        return Err(Error::invalid("need at least two Fisher values"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    let floor = FISHER_FLOOR_REL * fisher[0];
    let mut kappa = f64::INFINITY;
    for k in 1..fisher.len() {
        if fisher[k] > floor && fisher[k] > 0.0 {
            kappa = kappa.min((fisher[k - 1] / fisher[k] - 1.0) / tau);
        }
    }
    if kappa == f64::INFINITY {
        return Err(Error::DegenerateInput(
            "all Fisher values below floor; trajectory is already at equilibrium".into(),
        ));
    }
    Ok(kappa)
}

/// Closed-form A2 constant from the decay theorem's proof:
/// `kappa_0 = 2 C_p^{-1} alpha gamma (eps A) min_u^{beta-1}` with
/// `gamma = (alpha+beta-1)/(2 alpha)` and `A = 2 beta/(alpha+beta-1)`.
/// Degenerates to zero when `min_u = 0` and `beta > 1`.
pub fn kappa0_theoretical(
    alpha: f64,
    beta: f64,
    eps: f64,
    c_p: f64,
    min_u: f64,
) -> Result<f64> {
    if !(alpha > 1.0) || !(beta > 0.0) || !(alpha + beta > 1.0) {
        return Err(Error::invalid(format!(
            "invalid exponents ({alpha}, {beta})"
        )));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    if !(c_p > 0.0) {
        return Err(Error::invalid("Poincare constant must be > 0"));
    }
    if min_u < 0.0 {
        return Err(Error::invalid("min_u must be >= 0"));
    }
    let gamma = (alpha + beta - 1.0) / (2.0 * alpha);
    let a = 2.0 * beta / (alpha + beta - 1.0);
    // At beta = 1 the weight is identically one; otherwise a degenerate
    // minimum certifies no rate.
    let weight = if beta == 1.0 {
        1.0
    } else if min_u == 0.0 {
        0.0
    } else {
        min_u.powf(beta - 1.0)
    };
    Ok(2.0 / c_p * alpha * gamma * (eps * a) * weight)
}

/// `(lambda, eta)` with `lambda = (C_m/C_M) kappa` and
/// `eta = log(1 + tau lambda)/(tau lambda)`, which lies in `(0, 1)`.
pub fn decay_params(c_min: f64, c_max: f64, kappa: f64, tau: f64) -> Result<(f64, f64)> {
    if !(c_min > 0.0 && c_max > 0.0 && kappa > 0.0 && tau > 0.0) {
        return Err(Error::invalid(
            "decay_params requires strictly positive inputs",
        ));
    }
    let lambda = c_min / c_max * kappa;
    let x = tau * lambda;
    let eta = x.ln_1p() / x;
    Ok((lambda, eta))
}

/// Outcome of a decay-bound check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundReport {
    pub pass: bool,
    pub worst_index: usize,
    /// Smallest value of `(bound_k (1+slack) - H_k) / |H_0|` over the run.
    pub worst_margin: f64,
}

/// Check `H_k <= H_0 exp(-eta lambda k tau) (1 + slack)` for all `k`.
/// With `eta` from [`decay_params`] this is identical to the discrete form
/// `H_k <= (1 + lambda tau)^{-k} H_0`.
pub fn verify_decay_bound(
    entropy: &[f64],
    lambda: f64,
    eta: f64,
    tau: f64,
    slack: f64,
) -> Result<BoundReport> {
    if entropy.is_empty() {
        return Err(Error::invalid("no entropy values to check"));
    }
    let h0 = entropy[0];
    let scale = h0.abs().max(f64::MIN_POSITIVE);
    let mut pass = true;
    let mut worst_index = 0usize;
    let mut worst_margin = f64::INFINITY;
    for (k, &hk) in entropy.iter().enumerate() {
        let bound = h0 * (-eta * lambda * k as f64 * tau).exp();
        let margin = (bound * (1.0 + slack) - hk) / scale;
        if margin < worst_margin {
            worst_margin = margin;
            worst_index = k;
        }
        if margin < 0.0 {
            pass = false;
        }
    }
    Ok(BoundReport {
        pass,
        worst_index,
        worst_margin,
    })
}

/// Least-squares decay rate of `log H` against time; positive means
/// decaying. All entropy values must be strictly positive.
pub fn fit_rate(entropy: &[f64], tau: f64) -> Result<f64> {
    if entropy.len() < 2 {
        return Err(Error::invalid("need at least two entropy values to fit"));
    }
    if !(tau > 0.0) {
        return Err(Error::invalid(format!("tau must be > 0, got {tau}")));
    }
    if let Some(bad) = entropy.iter().find(|h| !(**h > 0.0)) {
        return Err(Error::invalid(format!(
            "fit_rate requires positive entropies, found {bad}; truncate at the noise floor"
        )));
    }
    let n = entropy.len() as f64;
    let tbar = tau * (entropy.len() - 1) as f64 / 2.0;
    let ybar = entropy.iter().map(|h| h.ln()).sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (k, &h) in entropy.iter().enumerate() {
        let dt = k as f64 * tau - tbar;
        num += dt * (h.ln() - ybar);
        den += dt * dt;
    }
    Ok(-num / den)
}

/// Full decay certificate for one computed trajectory: theoretical and
/// empirical constants side by side, the A1/A2/A3 flags, the certified
/// bound check and the fitted rate. The `lambda`/`eta` pair is derived from
/// the **empirical** variant `(C_m_hat, C_M_hat, kappa_hat)`; for degenerate
/// initial data the theoretical `kappa_0` vanishes even though the computed
/// decay is exponential, so the empirical rate is the informative one.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayCertificate {
    pub alpha: f64,
    pub beta: f64,
    pub tau: f64,
    pub eps: f64,
    pub c_min_theoretical: f64,
    pub c_max_theoretical: f64,
    pub c_min_empirical: Option<f64>,
    pub c_max_empirical: Option<f64>,
    pub kappa_empirical: Option<f64>,
    pub kappa0_theoretical: f64,
    pub lambda: Option<f64>,
    pub eta: Option<f64>,
    pub fitted_rate: Option<f64>,
    pub a1_pass: bool,
    pub a2_pass: bool,
    pub a3_pass: bool,
    pub bound_pass: bool,
    /// `C_m <= C_M`, required for `lambda <= kappa`; flagged, not an error.
    pub constants_ordered: bool,
    /// `1/2 <= gamma <= 1`, the exponent window behind the theorem's
    /// `beta >= 1` hypothesis; reported separately from region membership.
    pub gamma_in_range: bool,
    /// Scanned-region verdict for `(alpha, beta)` at this `eps`.
    pub region_s_admissible: bool,
    pub u_mass: f64,
    pub min_u: f64,
    pub data_points: usize,
    pub insufficient_data: bool,
}

impl DecayCertificate {
    /// Flat `key = value` text block, one line per field.
    pub fn to_key_values(&self) -> String {
        fn num(x: f64) -> String {
            format!("{x:.16e}")
        }
        fn opt(x: Option<f64>) -> String {
            x.map(num).unwrap_or_else(|| "nan".to_string())
        }
        let mut s = String::new();
        let mut push = |k: &str, v: String| {
            s.push_str(k);
            s.push_str(" = ");
            s.push_str(&v);
            s.push('\n');
        };
        push("alpha", num(self.alpha));
        push("beta", num(self.beta));
        push("tau", num(self.tau));
        push("eps", num(self.eps));
        push("c_min_theoretical", num(self.c_min_theoretical));
        push("c_max_theoretical", num(self.c_max_theoretical));
        push("c_min_empirical", opt(self.c_min_empirical));
        push("c_max_empirical", opt(self.c_max_empirical));
        push("kappa_empirical", opt(self.kappa_empirical));
        push("kappa0_theoretical", num(self.kappa0_theoretical));
        push("lambda", opt(self.lambda));
        push("eta", opt(self.eta));
        push("fitted_rate", opt(self.fitted_rate));
        push("a1_pass", self.a1_pass.to_string());
        push("a2_pass", self.a2_pass.to_string());
        push("a3_pass", self.a3_pass.to_string());
        push("bound_pass", self.bound_pass.to_string());
        push("constants_ordered", self.constants_ordered.to_string());
        push("gamma_in_range", self.gamma_in_range.to_string());
        push("region_s_admissible", self.region_s_admissible.to_string());
        push("u_mass", num(self.u_mass));
        push("min_u", num(self.min_u));
        push("data_points", self.data_points.to_string());
        push("insufficient_data", self.insufficient_data.to_string());
        s
    }
}

/// Build the certificate for a trajectory.
pub fn certify(traj: &Trajectory, eps: f64) -> Result<DecayCertificate> {
    let params = traj.params();
    let alpha = params.alpha();
    let beta = params.beta();
    let tau = params.tau();
    let records = traj.records();
    if records.is_empty() {
        return Err(Error::invalid("trajectory has no records"));
    }
    let (c_min_t, c_max_t) = a1_constants(alpha, beta)?;
    let a1 = check_a1(records, c_min_t, c_max_t, CERT_SLACK)?;

    let floor = FISHER_FLOOR_REL * records[0].fisher;
    let mut c_min_e: Option<f64> = None;
    let mut c_max_e: Option<f64> = None;
    for r in records {
        if r.fisher > floor && r.fisher > 0.0 {
            let ratio = r.production / r.fisher;
            c_min_e = Some(c_min_e.map_or(ratio, |m: f64| m.min(ratio)));
            c_max_e = Some(c_max_e.map_or(ratio, |m: f64| m.max(ratio)));
        }
    }

    let fisher: Vec<f64> = records.iter().map(|r| r.fisher).collect();
    let entropy: Vec<f64> = records.iter().map(|r| r.entropy_h).collect();
    let kappa_hat = if records.len() >= 2 {
        estimate_kappa(&fisher, tau).ok()
    } else {
        None
    };

    let min_u = traj.min_u();
    let c_p = crate::functionals::poincare_discrete(traj.states()[0].grid());
    let kappa0 = kappa0_theoretical(alpha, beta, eps, c_p, min_u)?;

    let lambda_eta = match (c_min_e, c_max_e, kappa_hat) {
        (Some(cm), Some(cmx), Some(k)) if k > 0.0 && cm > 0.0 => {
            decay_params(cm, cmx, k, tau).ok()
        }
        _ => None,
    };

    let bound = match lambda_eta {
        Some((lambda, eta)) => verify_decay_bound(&entropy, lambda, eta, tau, CERT_SLACK)?.pass,
        None => false,
    };

    // Fit over the strictly positive prefix of the entropy sequence.
    let positive_prefix = entropy.iter().take_while(|h| **h > 0.0).count();
    let fitted = if positive_prefix >= 2 {
        fit_rate(&entropy[..positive_prefix], tau).ok()
    } else {
        None
    };

    let h0 = entropy[0];
    let a3_pass = if h0 > 0.0 {
        *entropy.last().unwrap() <= A3_TOL * h0
    } else {
        true
    };

    let gamma = crate::functionals::gamma_exponent(alpha, beta)?;
    let insufficient = records.len() < 3;

    Ok(DecayCertificate {
        alpha,
        beta,
        tau,
        eps,
        c_min_theoretical: c_min_t,
        c_max_theoretical: c_max_t,
        c_min_empirical: c_min_e,
        c_max_empirical: c_max_e,
        kappa_empirical: kappa_hat,
        kappa0_theoretical: kappa0,
        lambda: lambda_eta.map(|p| p.0),
        eta: lambda_eta.map(|p| p.1),
        fitted_rate: fitted,
        a1_pass: a1.pass,
        a2_pass: kappa_hat.is_some_and(|k| k > 0.0),
        a3_pass,
        bound_pass: bound,
        constants_ordered: c_min_t <= c_max_t,
        gamma_in_range: (0.5..=1.0).contains(&gamma),
        region_s_admissible: crate::inequality::alphabeta_admissible(alpha, beta, eps),
        u_mass: traj.equilibrium().u_level(),
        min_u,
        data_points: records.len(),
        insufficient_data: insufficient,
    })
}
