//! The nonlinear summation-by-parts inequality laboratory.
//!
//! For a periodic nonnegative vector `w` and exponents `(A, B)` the
//! inequality compares
//!
//! ```text
//! sum_i (d2 w)_i (d2 w^A)_i w_i^B   >=   kappa * sum_i min_{j=i,i±1} w_j^{A+B-1} (d2 w)_i^2
//! ```
//!
//! (`d2` = periodic second difference). Dividing by `w_i^{A+B+1}` and adding
//! a telescoping "shift" sum turns the question into pointwise nonnegativity
//! of a two-variable function `T(X, Y)` of the neighbor ratios, which this
//! module evaluates, scans over parameter regions, and expands locally
//! around the equilibrium ratio `(1, 1)`.

mod scan;

pub use scan::{
    region_scan_ab, region_scan_alphabeta, scan_t_min, AxisSpec, CellVerdict, LogGrid,
    RegionScan, ScanKind, ScanMin, ScanOptions, Verdict,
};

use crate::{Error, Result};

/// A point in the `(A, B)` exponent plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ABPoint {
    pub a: f64,
    pub b: f64,
}

impl ABPoint {
    pub fn new(a: f64, b: f64) -> Self {
        ABPoint { a, b }
    }
}

/// The sign product `(2A - B - 1)(A + B - 2)` defining the continuous region.
pub fn rc_product(ab: ABPoint) -> f64 {
    (2.0 * ab.a - ab.b - 1.0) * (ab.a + ab.b - 2.0)
}

/// Membership in the continuous admissible region
/// `R_c = {A > 0, (2A - B - 1)(A + B - 2) < 0}` (open set).
pub fn rc_membership(ab: ABPoint) -> bool {
    ab.a > 0.0 && rc_product(ab) < 0.0
}

/// Relative width of the band around `A + B = 2` treated as the degenerate
/// branch of [`kappa_c`]; the closed form has a removable pole there and
/// loses all accuracy once the denominator is at rounding level.
const DEGENERATE_BAND: f64 = 1e-12;

fn near_degenerate(ab: ABPoint) -> bool {
    (ab.a + ab.b - 2.0).abs() <= DEGENERATE_BAND * (1.0 + ab.a.abs() + ab.b.abs())
}

/// Optimal constant of the continuous inequality:
/// `kappa_c = -A(2A - B - 1)/(A + B - 2)` away from the line `A + B = 2`,
/// and `kappa_c = A` on it.
pub fn kappa_c(ab: ABPoint) -> Result<f64> {
    if near_degenerate(ab) {
        if ab.a > 0.0 {
            return Ok(ab.a);
        }
        return Err(Error::domain(format!(
            "kappa_c needs A > 0 on the degenerate line, got A = {}",
            ab.a
        )));
    }
    if !rc_membership(ab) {
        return Err(Error::domain(format!(
            "({}, {}) is outside the admissible region",
            ab.a, ab.b
        )));
    }
    Ok(-ab.a * (2.0 * ab.a - ab.b - 1.0) / (ab.a + ab.b - 2.0))
}

/// Shift-term coefficient minimizing the discriminant of the local form:
/// `c = -(A/9)(A - 2B + 1) - (2/9) kappa (A + B - 2)`.
pub fn c_shift(ab: ABPoint, kappa: f64) -> f64 {
    -ab.a / 9.0 * (ab.a - 2.0 * ab.b + 1.0) - 2.0 / 9.0 * kappa * (ab.a + ab.b - 2.0)
}

/// Coefficients `(p, m, r)` of the biquadratic
/// `p t2^2 + m t2 t1^2 + r t1^4` governing the local behavior of `T` near
/// `(1, 1)`: `p = A - kappa`, `m = A(A-1) + 3c`, `r = c(A + B - 2)`.
pub fn form_coefficients(ab: ABPoint, kappa: f64, c: f64) -> (f64, f64, f64) {
    (
        ab.a - kappa,
        ab.a * ab.a - ab.a + 3.0 * c,
        c * (ab.a + ab.b - 2.0),
    )
}

/// Value of the local quadratic form at `(t2, t1) = (curvature, slope)`.
pub fn form_value(ab: ABPoint, kappa: f64, c: f64, curvature: f64, slope: f64) -> f64 {
    let (p, m, r) = form_coefficients(ab, kappa, c);
    let s2 = slope * slope;
    p * curvature * curvature + m * curvature * s2 + r * s2 * s2
}

/// True iff the biquadratic is nonnegative for all real arguments:
/// either the leading coefficient is positive with nonpositive discriminant
/// `m^2 - 4 p r <= 0`, or the degenerate case `p = 0, m = 0, r >= 0`.
/// Small relative tolerances absorb rounding; the constructions that make
/// the discriminant vanish do so exactly in real arithmetic.
pub fn quadratic_form_check(ab: ABPoint, kappa: f64, c: f64) -> bool {
    let (p, m, r) = form_coefficients(ab, kappa, c);
    let tol_p = 1e-12 * (1.0 + ab.a.abs() + kappa.abs());
    if p < -tol_p {
        return false;
    }
    if p <= tol_p {
        let tol_m = 1e-10 * (1.0 + ab.a * ab.a + 3.0 * c.abs());
        let tol_r = 1e-12 * (1.0 + r.abs());
        return m.abs() <= tol_m && r >= -tol_r;
    }
    let disc = m * m - 4.0 * p * r;
    disc <= 1e-10 * (m * m + (4.0 * p * r).abs()) + 1e-300
}

/// Symmetric mean choices for the shift term.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MeanKind {
    Arithmetic,
    Geometric,
    /// Placeholder for the canonical exponent `rho = (A+B+1)/3`, where the
    /// mean enters with weight zero and its value is irrelevant.
    Canonical,
}

/// A symmetric, 1-homogeneous mean with `M(x, x) = x`.
pub fn mean_value(x: f64, y: f64, kind: MeanKind) -> f64 {
    match kind {
        MeanKind::Arithmetic | MeanKind::Canonical => 0.5 * (x + y),
        MeanKind::Geometric => (x * y).sqrt(),
    }
}

/// `(x^rho - 1)/rho`, continuously extended by `ln x` at `rho = 0`.
pub(crate) fn pow_ratio_m1(x: f64, rho: f64) -> f64 {
    let lx = x.ln();
    if rho == 0.0 {
        lx
    } else {
        (rho * lx).exp_m1() / rho
    }
}

/// Parameter bundle for pointwise `T(X, Y)` evaluations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InequalityConfig {
    ab: ABPoint,
    kappa: f64,
    eps: f64,
    c: f64,
    rho: f64,
    mean: MeanKind,
    c_overridden: bool,
}

impl InequalityConfig {
    /// The configuration used by the region scans: `kappa = eps * A`,
    /// `c` from the shift formula with that `kappa`, canonical `rho`.
    pub fn scan(ab: ABPoint, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
        }
        let kappa = eps * ab.a;
        Ok(InequalityConfig {
            ab,
            kappa,
            eps,
            c: c_shift(ab, kappa),
            rho: (ab.a + ab.b + 1.0) / 3.0,
            mean: MeanKind::Canonical,
            c_overridden: false,
        })
    }

    /// Configuration at the continuous-optimal `kappa_c`.
    pub fn continuous_optimal(ab: ABPoint) -> Result<Self> {
        let kappa = kappa_c(ab)?;
        Ok(InequalityConfig {
            ab,
            kappa,
            eps: if ab.a > 0.0 { kappa / ab.a } else { f64::NAN },
            c: c_shift(ab, kappa),
            rho: (ab.a + ab.b + 1.0) / 3.0,
            mean: MeanKind::Canonical,
            c_overridden: false,
        })
    }

    /// Fully explicit configuration; flags the `c` override when the value
    /// differs from the shift formula.
    pub fn from_parts(ab: ABPoint, kappa: f64, c: f64, rho: f64, mean: MeanKind) -> Result<Self> {
        if !rho.is_finite() {
            return Err(Error::invalid("rho must be finite"));
        }
        let canonical_rho = (ab.a + ab.b + 1.0) / 3.0;
        if mean == MeanKind::Canonical && rho != canonical_rho {
            return Err(Error::invalid(
                "canonical mean requires rho = (A + B + 1)/3",
            ));
        }
        Ok(InequalityConfig {
            ab,
            kappa,
            eps: if ab.a != 0.0 { kappa / ab.a } else { f64::NAN },
            c,
            rho,
            mean,
            c_overridden: c != c_shift(ab, kappa),
        })
    }

    pub fn ab(&self) -> ABPoint {
        self.ab
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn c(&self) -> f64 {
        self.c
    }

    pub fn rho(&self) -> f64 {
        self.rho
    }

    pub fn mean(&self) -> MeanKind {
        self.mean
    }

    pub fn c_overridden(&self) -> bool {
        self.c_overridden
    }

    fn is_canonical_rho(&self) -> bool {
        self.mean == MeanKind::Canonical || self.rho == (self.ab.a + self.ab.b + 1.0) / 3.0
    }

    /// Shift-term contribution of one argument,
    /// `c * M(z,1)^{A+B+1-3 rho} * ((z^rho - 1)/rho)^3`; the mean weight is
    /// exactly one (and skipped) at the canonical `rho`.
    pub(crate) fn shift_term(&self, z: f64) -> f64 {
        let core = pow_ratio_m1(z, self.rho);
        let weight = if self.is_canonical_rho() {
            1.0
        } else {
            let mexp = self.ab.a + self.ab.b + 1.0 - 3.0 * self.rho;
            mean_value(z, 1.0, self.mean).powf(mexp)
        };
        self.c * weight * core * core * core
    }

    /// `z^{A+B-1}` via `exp((A+B-1) ln z)`; overflow saturates to infinity,
    /// which the enclosing `min{1, ...}` then caps.
    pub(crate) fn min_pow(&self, z: f64) -> f64 {
        ((self.ab.a + self.ab.b - 1.0) * z.ln()).exp()
    }
}

/// The pointwise function
///
/// ```text
/// T(X, Y) = (X^A + Y^A - 2)(X + Y - 2)
///         + c [ M(X,1)^{A+B+1-3 rho} ((X^rho - 1)/rho)^3
///             + M(Y,1)^{A+B+1-3 rho} ((Y^rho - 1)/rho)^3 ]
///         - kappa min{1, X^{A+B-1}, Y^{A+B-1}} (X + Y - 2)^2 .
/// ```
///
/// At the canonical `rho` the mean weight is exactly one and is skipped, so
/// the value does not depend on the mean kind. The min-term powers are
/// evaluated through `exp(e ln X)`; overflow saturates to infinity and is
/// then capped by the min with one, preserving the intended semantics near
/// `X = 0` for either sign of the exponent.
pub fn t_value(x: f64, y: f64, cfg: &InequalityConfig) -> Result<f64> {
    if !(x > 0.0) || !(y > 0.0) {
        return Err(Error::domain(format!(
            "T(X, Y) requires positive arguments, got ({x}, {y})"
        )));
    }
    let a = cfg.ab.a;
    let s = x + y - 2.0;
    let term1 = (x.powf(a) + y.powf(a) - 2.0) * s;
    let min_pow = 1.0f64.min(cfg.min_pow(x)).min(cfg.min_pow(y));
    // Grouping the shift contributions keeps the value exactly symmetric
    // under argument swap.
    let shift = cfg.shift_term(x) + cfg.shift_term(y);
    Ok(term1 + shift - cfg.kappa * min_pow * s * s)
}

/// The substitution taking porous-medium exponents to the inequality plane:
/// `A = 2 beta/(alpha+beta-1)`, `B = (alpha+beta-3)/(alpha+beta-1)`.
pub fn map_ab(alpha: f64, beta: f64) -> Result<ABPoint> {
    let d = alpha + beta - 1.0;
    if d.abs() <= 1e-12 * (1.0 + alpha.abs() + beta.abs()) {
        return Err(Error::domain(format!(
            "alpha + beta = 1 is singular for the exponent map, got ({alpha}, {beta})"
        )));
    }
    Ok(ABPoint {
        a: 2.0 * beta / d,
        b: (alpha + beta - 3.0) / d,
    })
}

/// Continuous decay rate
/// `lambda_c = 16 pi^2 alpha beta kappa_c / (alpha+beta-1) * min_u^{beta-1}`
/// with `kappa_c` evaluated through the exponent map (including its
/// degenerate branch on `alpha - beta = -1`, where the direct closed form
/// has a removable singularity).
pub fn lambda_c_continuous(alpha: f64, beta: f64, min_u: f64) -> Result<f64> {
    if beta == 1.0 {
        return Err(Error::domain("lambda_c requires beta != 1"));
    }
    if !(beta > 0.0) || !(alpha + beta > 1.0) {
        return Err(Error::domain(format!(
            "lambda_c requires beta > 0 and alpha + beta > 1, got ({alpha}, {beta})"
        )));
    }
    let d = alpha - beta;
    if !(-1.0..2.0).contains(&d) {
        return Err(Error::domain(format!(
            "lambda_c requires -1 <= alpha - beta < 2, got {d}"
        )));
    }
    if min_u < 0.0 {
        return Err(Error::invalid("min_u must be >= 0"));
    }
    // A degenerate minimum certifies no rate (except at beta = 1, where the
    // weight u^{beta-1} is identically one; that case is excluded above).
    if min_u == 0.0 {
        return Ok(0.0);
    }
    let kappa = kappa_c(map_ab(alpha, beta)?)?;
    let pi2 = std::f64::consts::PI * std::f64::consts::PI;
    Ok(16.0 * pi2 * alpha * beta * kappa / (alpha + beta - 1.0) * min_u.powf(beta - 1.0))
}

/// Result of one vector-level inequality evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SbpCheck {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

/// Evaluate both sides of the summation-by-parts inequality on a periodic
/// nonnegative vector. Sums are plain sequential sums: rounding is monotone,
/// so on the line `A = 1` (where the comparison holds term by term) the
/// computed sides preserve the ordering exactly.
pub fn sbp_inequality_check(w: &[f64], ab: ABPoint, kappa: f64) -> Result<SbpCheck> {
    if w.len() < 2 {
        return Err(Error::invalid("need at least two entries"));
    }
    if let Some(bad) = w.iter().find(|x| !(**x >= 0.0)) {
        return Err(Error::invalid(format!(
            "entries must be nonnegative, found {bad}"
        )));
    }
    let n = w.len();
    let e_min = ab.a + ab.b - 1.0;
    let pow_a: Vec<f64> = w.iter().map(|&x| x.powf(ab.a)).collect();
    let pow_b: Vec<f64> = w.iter().map(|&x| x.powf(ab.b)).collect();
    let pow_e: Vec<f64> = w.iter().map(|&x| x.powf(e_min)).collect();

    let mut lhs = 0.0f64;
    let mut rhs = 0.0f64;
    for i in 0..n {
        let l = if i == 0 { n - 1 } else { i - 1 };
        let r = if i + 1 == n { 0 } else { i + 1 };
        let d2 = w[r] - 2.0 * w[i] + w[l];
        let d2a = pow_a[r] - 2.0 * pow_a[i] + pow_a[l];
        let prod = d2 * d2a;
        if prod != 0.0 {
            lhs += pow_b[i] * prod;
        }
        let sq = d2 * d2;
        if sq != 0.0 {
            rhs += kappa * pow_e[l].min(pow_e[i]).min(pow_e[r]) * sq;
        }
    }
    let holds = if lhs == f64::INFINITY {
        true
    } else {
        let tol = 1e-12 * (1.0 + lhs.abs() + rhs.abs());
        lhs >= rhs - tol
    };
    Ok(SbpCheck { lhs, rhs, holds })
}

/// One `(h, T/h^4, |T/h^4 - Q|)` row of a local-expansion convergence study.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpansionEntry {
    pub h: f64,
    pub t_over_h4: f64,
    pub error: f64,
}

/// Convergence report for the expansion of `T` around `(1, 1)` along
/// `X = 1 + h v + h^2 u/2`, `Y = 1 - h v + h^2 u/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalExpansionReport {
    /// The limiting quadratic-form value `Q(u, v)`.
    pub q_target: f64,
    pub entries: Vec<ExpansionEntry>,
    /// Least-squares slope of `log error` against `log h`, when enough
    /// entries sit above the rounding floor.
    pub order: Option<f64>,
}

impl LocalExpansionReport {
    /// True when the observed order reaches `min_order`, or when every
    /// error already sits at the rounding floor.
    pub fn converges(&self, min_order: f64) -> bool {
        match self.order {
            Some(p) => p >= min_order,
            None => true,
        }
    }
}

/// Evaluate `T(X(h), Y(h))/h^4` along the local chart and compare against
/// the quadratic form; the errors should shrink at first order in `h`.
pub fn local_expansion_check(
    ab: ABPoint,
    kappa: f64,
    c: f64,
    rho: f64,
    curvature: f64,
    slope: f64,
    h_values: &[f64],
) -> Result<LocalExpansionReport> {
    if h_values.is_empty() {
        return Err(Error::invalid("need at least one h value"));
    }
    for pair in h_values.windows(2) {
        if !(pair[1] < pair[0]) {
            return Err(Error::invalid("h values must be strictly decreasing"));
        }
    }
    let cfg = InequalityConfig::from_parts(ab, kappa, c, rho, MeanKind::Arithmetic)?;
    let q_target = form_value(ab, kappa, c, curvature, slope);

    let mut entries = Vec::with_capacity(h_values.len());
    for &h in h_values {
        if !(h > 0.0) {
            return Err(Error::invalid("h values must be positive"));
        }
        let x = 1.0 + h * slope + 0.5 * h * h * curvature;
        let y = 1.0 - h * slope + 0.5 * h * h * curvature;
        if !(x > 0.0) || !(y > 0.0) {
            return Err(Error::domain(format!(
                "chart leaves the positive quadrant at h = {h}"
            )));
        }
        let t = t_value(x, y, &cfg)?;
        let t4 = t / (h * h * h * h);
        entries.push(ExpansionEntry {
            h,
            t_over_h4: t4,
            error: (t4 - q_target).abs(),
        });
    }

    // Rounding floor: T is assembled from O(h^2)-sized factors carrying
    // absolute errors of a few ulp, so T/h^4 is only trustworthy down to
    // roughly eps/h^2. Entries below the floor carry no order information.
    let floor = |h: f64| (1.0 + q_target.abs()) * (1e-13 + 1e-14 / (h * h));
    let usable: Vec<&ExpansionEntry> = entries
        .iter()
        .filter(|e| e.error > floor(e.h))
        .collect();
    // Fit on the finest usable levels; coarse levels can sit outside the
    // asymptotic range and flatten the slope.
    let tail = if usable.len() > 4 {
        &usable[usable.len() - 4..]
    } else {
        &usable[..]
    };
    let order = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let xbar = tail.iter().map(|e| e.h.ln()).sum::<f64>() / n;
        let ybar = tail.iter().map(|e| e.error.ln()).sum::<f64>() / n;
        let mut num = 0.0;
        let mut den = 0.0;
        for e in tail {
            num += (e.h.ln() - xbar) * (e.error.ln() - ybar);
            den += (e.h.ln() - xbar) * (e.h.ln() - xbar);
        }
        Some(num / den)
    } else {
        None
    };

    Ok(LocalExpansionReport {
        q_target,
        entries,
        order,
    })
}

/// Scanned-region verdict for a single porous-medium exponent pair, using
/// the default pointwise domain.
pub fn alphabeta_admissible(alpha: f64, beta: f64, eps: f64) -> bool {
    let Ok(ab) = map_ab(alpha, beta) else {
        return false;
    };
    if !(ab.a > 0.0) {
        return false;
    }
    let Ok(cfg) = InequalityConfig::scan(ab, eps) else {
        return false;
    };
    if !quadratic_form_check(ab, cfg.kappa(), cfg.c()) {
        return false;
    }
    let grid = LogGrid::default_domain();
    match scan_t_min(&cfg, &grid) {
        Ok(s) => s.min_value >= -1e-9 * (1.0 + s.max_abs),
        Err(_) => false,
    }
}
