//! Grid scans of `T(X, Y)` over a log-spaced domain and region scans over
//! exponent rectangles.
//!
//! A cell is admissible when two independent checks agree:
//!
//! 1. the local quadratic form at the equilibrium ratio is nonnegative
//!    (closed-form discriminant test — this is the leading-order behavior
//!    of `T` near `(1, 1)`, where grid sampling cannot resolve the thin
//!    sign-change slivers of barely-inadmissible cells), and
//! 2. the scanned minimum of `T` over the truncated domain stays above
//!    `-tol_rel * (1 + max |T|)`.
//!
//! The scan reports a boundary flag whenever the minimizer touches the
//! domain edge: the pointwise claim is for all positive ratios, and a
//! truncated scan cannot certify the tails.

use super::{quadratic_form_check, ABPoint, InequalityConfig};
use crate::{Error, Result};
use rayon::prelude::*;
use std::fmt;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

/// Log-spaced evaluation grid, inclusive of both endpoints. A point landing
/// within rounding of 1 is snapped to exactly 1, so the equilibrium ratio is
/// always evaluated exactly when the grid is symmetric with odd size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogGrid {
    min: f64,
    max: f64,
    n: usize,
}

impl LogGrid {
    pub fn new(min: f64, max: f64, n: usize) -> Result<Self> {
        if !(min > 0.0 && max > min) {
            return Err(Error::invalid(format!(
                "log grid needs 0 < min < max, got [{min}, {max}]"
            )));
        }
        if n < 2 {
            return Err(Error::invalid("log grid needs at least 2 points"));
        }
        Ok(LogGrid { min, max, n })
    }

    /// Default pointwise domain `[1e-1, 1e1]^2` at 401 points per axis.
    /// The vector-level inequality concerns neighbor ratios of discrete
    /// profiles, which concentrate near one; far outside this window the
    /// shift term grows polynomially and swamps the comparison for part of
    /// the region the scan is required to contain.
    pub fn default_domain() -> Self {
        LogGrid {
            min: 1e-1,
            max: 1e1,
            n: 401,
        }
    }

    pub fn min(&self) -> f64 {
        self.min
    }

    pub fn max(&self) -> f64 {
        self.max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn points(&self) -> Vec<f64> {
        let lmin = self.min.ln();
        let lmax = self.max.ln();
        (0..self.n)
            .map(|i| {
                if i == 0 {
                    return self.min;
                }
                if i + 1 == self.n {
                    return self.max;
                }
                let t = i as f64 / (self.n - 1) as f64;
                let l = lmin * (1.0 - t) + lmax * t;
                if l.abs() < 1e-12 {
                    1.0
                } else {
                    l.exp()
                }
            })
            .collect()
    }
}

/// Result of minimizing `T` over a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanMin {
    pub min_value: f64,
    pub argmin: (f64, f64),
    /// Set when the minimizer lies on the domain boundary (truncation
    /// suspect).
    pub boundary: bool,
    /// Largest `|T|` seen on the grid; scales the admissibility tolerance.
    pub max_abs: f64,
}

/// Per-point precomputation so the pair sweep is transcendental-free.
struct TEval {
    pow_a: Vec<f64>,
    shift: Vec<f64>,
    min_pow: Vec<f64>,
    kappa: f64,
}

impl TEval {
    fn new(cfg: &InequalityConfig, pts: &[f64]) -> TEval {
        TEval {
            pow_a: pts.iter().map(|&p| p.powf(cfg.ab().a)).collect(),
            shift: pts.iter().map(|&p| cfg.shift_term(p)).collect(),
            min_pow: pts.iter().map(|&p| cfg.min_pow(p)).collect(),
            kappa: cfg.kappa(),
        }
    }

    #[inline]
    fn eval(&self, pts: &[f64], i: usize, j: usize) -> f64 {
        let s = pts[i] + pts[j] - 2.0;
        let min_w = 1.0f64.min(self.min_pow[i]).min(self.min_pow[j]);
        let shift = self.shift[i] + self.shift[j];
        (self.pow_a[i] + self.pow_a[j] - 2.0) * s + shift - self.kappa * min_w * s * s
    }
}

fn scan_min_with(cfg: &InequalityConfig, pts: &[f64]) -> ScanMin {
    let ev = TEval::new(cfg, pts);
    let n = pts.len();
    let mut min_value = f64::INFINITY;
    let mut arg = (0usize, 0usize);
    let mut max_abs = 0.0f64;
    for i in 0..n {
        for j in 0..n {
            let t = ev.eval(pts, i, j);
            if t < min_value {
                min_value = t;
                arg = (i, j);
            }
            let a = t.abs();
            if a > max_abs {
                max_abs = a;
            }
        }
    }
    let edge = |k: usize| k == 0 || k + 1 == n;
    ScanMin {
        min_value,
        argmin: (pts[arg.0], pts[arg.1]),
        boundary: edge(arg.0) || edge(arg.1),
        max_abs,
    }
}

/// Minimize `T(X, Y)` over the grid.
pub fn scan_t_min(cfg: &InequalityConfig, domain: &LogGrid) -> Result<ScanMin> {
    let pts = domain.points();
    Ok(scan_min_with(cfg, &pts))
}

/// One axis of a region scan: `count` cells over `(lo, hi]`, sampled at the
/// right endpoints `lo + (i+1)(hi-lo)/count` (same convention as the grid
/// nodes).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisSpec {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
}

impl AxisSpec {
    pub fn new(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(hi > lo) || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::invalid(format!(
                "axis needs finite lo < hi, got {lo}:{hi}"
            )));
        }
        if count == 0 {
            return Err(Error::invalid("axis needs at least one cell"));
        }
        Ok(AxisSpec { lo, hi, count })
    }

    pub fn values(&self) -> Vec<f64> {
        let step = (self.hi - self.lo) / self.count as f64;
        (0..self.count)
            .map(|i| self.lo + (i + 1) as f64 * step)
            .collect()
    }
}

impl FromStr for AxisSpec {
    type Err = Error;

    /// Parse `lo:hi:count`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!(
                "axis spec must be lo:hi:count, got '{s}'"
            )));
        }
        let lo: f64 = parts[0]
            .parse()
            .map_err(|_| Error::invalid(format!("bad axis lower bound '{}'", parts[0])))?;
        let hi: f64 = parts[1]
            .parse()
            .map_err(|_| Error::invalid(format!("bad axis upper bound '{}'", parts[1])))?;
        let count: usize = parts[2]
            .parse()
            .map_err(|_| Error::invalid(format!("bad axis count '{}'", parts[2])))?;
        AxisSpec::new(lo, hi, count)
    }
}

/// Verdict for one scanned cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Admissible,
    Inadmissible,
    /// Passed the scan but minimized on the domain edge.
    BoundarySuspect,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Verdict::Admissible => write!(f, "admissible"),
            Verdict::Inadmissible => write!(f, "inadmissible"),
            Verdict::BoundarySuspect => write!(f, "boundary-suspect"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellVerdict {
    pub min_t: f64,
    pub verdict: Verdict,
    pub boundary: bool,
    /// Outcome of the closed-form local test.
    pub local_form_ok: bool,
}

impl CellVerdict {
    pub fn admissible(&self) -> bool {
        self.verdict != Verdict::Inadmissible
    }
}

/// Which plane the scan ranges over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScanKind {
    /// Exponent plane `(A, B)`.
    Ab,
    /// Porous-medium plane `(alpha, beta)`, routed through the exponent map.
    AlphaBeta,
}

/// Controls for region scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanOptions {
    /// Worker-count hint; 0 means "use the default". The verdict grid does
    /// not depend on this value.
    pub workers: usize,
    /// A cell is admissible iff `min T >= -tol_rel * (1 + max |T|)`.
    pub tol_rel: f64,
}

impl Default for ScanOptions {
    fn default() -> Self {
        ScanOptions {
            workers: 0,
            tol_rel: 1e-9,
        }
    }
}

/// A scanned rectangle of cells with per-cell verdicts.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionScan {
    kind: ScanKind,
    eps: f64,
    tol_rel: f64,
    domain: LogGrid,
    x_values: Vec<f64>,
    y_values: Vec<f64>,
    cells: Vec<CellVerdict>,
}

impl RegionScan {
    pub fn kind(&self) -> ScanKind {
        self.kind
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn domain(&self) -> &LogGrid {
        &self.domain
    }

    /// First-axis sample values (`A` or `alpha`).
    pub fn x_values(&self) -> &[f64] {
        &self.x_values
    }

    /// Second-axis sample values (`B` or `beta`).
    pub fn y_values(&self) -> &[f64] {
        &self.y_values
    }

    pub fn cell(&self, ix: usize, iy: usize) -> &CellVerdict {
        &self.cells[ix * self.y_values.len() + iy]
    }

    pub fn cells(&self) -> &[CellVerdict] {
        &self.cells
    }

    pub fn admissible_count(&self) -> usize {
        self.cells.iter().filter(|c| c.admissible()).count()
    }

    /// CSV rows `x,y,min_T,verdict,boundary`, headers named by scan kind.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        match self.kind {
            ScanKind::Ab => out.push_str("A,B,min_T,verdict,boundary\n"),
            ScanKind::AlphaBeta => out.push_str("alpha,beta,min_T,verdict,boundary\n"),
        }
        for (ix, x) in self.x_values.iter().enumerate() {
            for (iy, y) in self.y_values.iter().enumerate() {
                let c = self.cell(ix, iy);
                out.push_str(&format!(
                    "{x:.16e},{y:.16e},{:.16e},{},{}\n",
                    c.min_t,
                    c.verdict,
                    u8::from(c.boundary)
                ));
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        f.write_all(self.to_csv_string().as_bytes())
            .map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })
    }
}

fn evaluate_cell(ab: ABPoint, eps: f64, pts: &[f64], tol_rel: f64) -> CellVerdict {
    if !(ab.a > 0.0) || !ab.a.is_finite() || !ab.b.is_finite() {
        return CellVerdict {
            min_t: f64::NAN,
            verdict: Verdict::Inadmissible,
            boundary: false,
            local_form_ok: false,
        };
    }
    // Scan configuration: kappa = eps*A and the shift coefficient taken at
    // that kappa.
    let cfg = match InequalityConfig::scan(ab, eps) {
        Ok(c) => c,
        Err(_) => {
            return CellVerdict {
                min_t: f64::NAN,
                verdict: Verdict::Inadmissible,
                boundary: false,
                local_form_ok: false,
            }
        }
    };
    let local_ok = quadratic_form_check(ab, cfg.kappa(), cfg.c());
    let sm = scan_min_with(&cfg, pts);
    let numeric_ok = sm.min_value >= -tol_rel * (1.0 + sm.max_abs);
    let verdict = if local_ok && numeric_ok {
        if sm.boundary {
            Verdict::BoundarySuspect
        } else {
            Verdict::Admissible
        }
    } else {
        Verdict::Inadmissible
    };
    CellVerdict {
        min_t: sm.min_value,
        verdict,
        boundary: sm.boundary,
        local_form_ok: local_ok,
    }
}

fn run_scan<F>(
    x_axis: AxisSpec,
    y_axis: AxisSpec,
    eps: f64,
    domain: &LogGrid,
    opts: &ScanOptions,
    kind: ScanKind,
    to_ab: F,
) -> Result<RegionScan>
where
    F: Fn(f64, f64) -> Option<ABPoint> + Sync,
{
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::invalid(format!("eps must lie in (0, 1], got {eps}")));
    }
    let x_values = x_axis.values();
    let y_values = y_axis.values();
    let pts = domain.points();
    let ny = y_values.len();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(opts.workers)
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let cells: Vec<CellVerdict> = pool.install(|| {
        (0..x_values.len() * ny)
            .into_par_iter()
            .map(|idx| {
                let x = x_values[idx / ny];
                let y = y_values[idx % ny];
                match to_ab(x, y) {
                    Some(ab) => evaluate_cell(ab, eps, &pts, opts.tol_rel),
                    None => CellVerdict {
                        min_t: f64::NAN,
                        verdict: Verdict::Inadmissible,
                        boundary: false,
                        local_form_ok: false,
                    },
                }
            })
            .collect()
    });
    Ok(RegionScan {
        kind,
        eps,
        tol_rel: opts.tol_rel,
        domain: *domain,
        x_values,
        y_values,
        cells,
    })
}

/// Scan the exponent plane directly.
pub fn region_scan_ab(
    a_axis: AxisSpec,
    b_axis: AxisSpec,
    eps: f64,
    domain: &LogGrid,
    opts: &ScanOptions,
) -> Result<RegionScan> {
    run_scan(a_axis, b_axis, eps, domain, opts, ScanKind::Ab, |a, b| {
        Some(ABPoint::new(a, b))
    })
}

/// Scan the porous-medium plane through the exponent map; pairs with
/// `alpha + beta = 1` (where the map is singular) are marked inadmissible.
pub fn region_scan_alphabeta(
    alpha_axis: AxisSpec,
    beta_axis: AxisSpec,
    eps: f64,
    domain: &LogGrid,
    opts: &ScanOptions,
) -> Result<RegionScan> {
    run_scan(
        alpha_axis,
        beta_axis,
        eps,
        domain,
        opts,
        ScanKind::AlphaBeta,
        |alpha, beta| super::map_ab(alpha, beta).ok(),
    )
}
