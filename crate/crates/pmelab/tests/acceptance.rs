//! Acceptance suite: one test per acceptance criterion, each printing a
//! PASS line on success (run with `--nocapture` to see them). The reference
//! trajectories and the big region scans are shared across criteria.

mod common;

use pmelab::bakry_emery::{
    a1_constants, check_a1, decay_params, estimate_kappa, fit_rate, verify_decay_bound,
    FISHER_FLOOR_REL,
};
use pmelab::functionals::{power_mean_bounds, FunctionalRecord};
use pmelab::grid::{GridSpec, StateV};
use pmelab::inequality::{
    c_shift, kappa_c, local_expansion_check, rc_product, region_scan_ab, region_scan_alphabeta,
    sbp_inequality_check, ABPoint, AxisSpec, LogGrid, RegionScan, ScanOptions, Verdict,
};
use pmelab::solver::{
    barenblatt_init, simulate, BarenblattCase, SchemeParams, SolverOptions, Trajectory,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::sync::OnceLock;
use std::time::Instant;

const RESIDUAL_TOL: f64 = 1e-12;

fn barenblatt_run(
    alpha: f64,
    beta: f64,
    case: BarenblattCase,
    n_cells: usize,
    tau: f64,
    n_steps: usize,
) -> Trajectory {
    let grid = GridSpec::new(n_cells).unwrap();
    let params = SchemeParams::new(alpha, beta, tau).unwrap();
    let u0 = barenblatt_init(grid, beta, case).unwrap();
    simulate(&u0.to_v(alpha), &params, n_steps, &SolverOptions::default()).unwrap()
}

/// Fast-diffusion reference run (alpha = 2, beta = 1/2) at N = 128,
/// tau = 1e-4, over the 0.05 horizon.
fn fast_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| barenblatt_run(2.0, 0.5, BarenblattCase::Fast, 128, 1e-4, 500))
}

/// Slow-diffusion reference run (alpha = 3, beta = 4) at N = 128,
/// tau = 1e-4; five steps reach the boundary-contact time t_end = 5e-4.
fn slow_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| barenblatt_run(3.0, 4.0, BarenblattCase::Slow, 128, 1e-4, 5))
}

/// Finer slow-diffusion run (tau = 1e-5, 50 steps) for the decay analysis.
fn slow_fine_run() -> &'static Trajectory {
    static RUN: OnceLock<Trajectory> = OnceLock::new();
    RUN.get_or_init(|| barenblatt_run(3.0, 4.0, BarenblattCase::Slow, 128, 1e-5, 50))
}

fn scan_quarter() -> &'static RegionScan {
    static SCAN: OnceLock<RegionScan> = OnceLock::new();
    SCAN.get_or_init(|| {
        region_scan_ab(
            AxisSpec::new(0.0, 3.0, 150).unwrap(),
            AxisSpec::new(-2.0, 6.0, 200).unwrap(),
            0.25,
            &LogGrid::default_domain(),
            &ScanOptions {
                workers: 4,
                ..Default::default()
            },
        )
        .unwrap()
    })
}

fn scan_hundredth() -> &'static RegionScan {
    static SCAN: OnceLock<RegionScan> = OnceLock::new();
    SCAN.get_or_init(|| {
        region_scan_ab(
            AxisSpec::new(0.0, 3.0, 150).unwrap(),
            AxisSpec::new(-2.0, 6.0, 200).unwrap(),
            0.01,
            &LogGrid::default_domain(),
            &ScanOptions {
                workers: 4,
                ..Default::default()
            },
        )
        .unwrap()
    })
}

fn mass_column(traj: &Trajectory) -> Vec<f64> {
    traj.records().iter().map(|r| r.mass_u).collect()
}

#[test]
fn acceptance_1_mass_monotonicity() {
    for (name, traj) in [("fast", fast_run()), ("slow", slow_run())] {
        let t0 = Instant::now();
        let masses = mass_column(traj);
        for k in 1..masses.len() {
            assert!(
                masses[k] >= masses[k - 1] - 10.0 * RESIDUAL_TOL,
                "{name}: mass dropped at step {k}: {} -> {}",
                masses[k - 1],
                masses[k]
            );
        }
        // The evolution-variable mass moves the other way.
        let mass_v: Vec<f64> = traj.records().iter().map(|r| r.mass_v).collect();
        let slack = 128.0 * RESIDUAL_TOL * (1.0 + mass_v[0]);
        for k in 1..mass_v.len() {
            assert!(
                mass_v[k] <= mass_v[k - 1] + slack,
                "{name}: v-mass grew at step {k}"
            );
        }
        // The reference runs are cached; re-runs must also fit the budget.
        assert!(t0.elapsed().as_secs() < 30, "{name}: over budget");
    }
    // Direct runtime check on a fresh fast run (the dominant scenario).
    let t0 = Instant::now();
    let _ = barenblatt_run(2.0, 0.5, BarenblattCase::Fast, 128, 1e-4, 500);
    assert!(t0.elapsed().as_secs_f64() <= 30.0, "fast scenario over 30 s");
    println!("ACCEPTANCE 1 (mass monotonicity, both scenarios): PASS");
}

fn empirical_constants(records: &[FunctionalRecord]) -> (f64, f64) {
    let floor = FISHER_FLOOR_REL * records[0].fisher;
    let mut c_min = f64::INFINITY;
    let mut c_max: f64 = 0.0;
    for r in records {
        if r.fisher > floor && r.fisher > 0.0 {
            let ratio = r.production / r.fisher;
            c_min = c_min.min(ratio);
            c_max = c_max.max(ratio);
        }
    }
    (c_min, c_max)
}

#[test]
fn acceptance_2_exponential_entropy_decay() {
    let t0 = Instant::now();
    for (name, traj) in [("slow", slow_fine_run()), ("fast", fast_run())] {
        let ent: Vec<f64> = traj.records().iter().map(|r| r.rel_entropy_u).collect();
        for k in 1..ent.len() {
            assert!(
                ent[k] < ent[k - 1],
                "{name}: relative entropy not strictly decreasing at step {k}: {} -> {}",
                ent[k - 1],
                ent[k]
            );
        }
        let tau = traj.params().tau();
        let half = ent.len() / 2;
        let rate = fit_rate(&ent[..half.max(2)], tau).unwrap();
        assert!(rate > 0.0, "{name}: log-linear fit slope is not negative");

        let entropy: Vec<f64> = traj.records().iter().map(|r| r.entropy_h).collect();
        let (c_min, c_max) = empirical_constants(traj.records());
        let kappa = estimate_kappa(
            &traj.records().iter().map(|r| r.fisher).collect::<Vec<_>>(),
            tau,
        )
        .unwrap();
        assert!(kappa > 0.0, "{name}: empirical kappa not positive");
        let (lambda, eta) = decay_params(c_min, c_max, kappa, tau).unwrap();
        let report = verify_decay_bound(&entropy, lambda, eta, tau, 1e-8).unwrap();
        assert!(
            report.pass,
            "{name}: decay bound failed at step {} (margin {:.3e})",
            report.worst_index, report.worst_margin
        );
        // The certified rate is a lower bound on the observed decay.
        let fitted = fit_rate(&entropy, tau).unwrap();
        assert!(
            fitted >= eta * lambda,
            "{name}: fitted rate {fitted} below certified {}",
            eta * lambda
        );
    }
    assert!(t0.elapsed().as_secs_f64() <= 60.0, "over 60 s");
    println!("ACCEPTANCE 2 (exponential entropy decay + certified bound): PASS");
}

#[test]
fn acceptance_3_a1_sandwich_theoretical_constants() {
    let generic = {
        let grid = GridSpec::new(32).unwrap();
        let vals: Vec<f64> = (0..32)
            .map(|i| 1.0 + 0.6 * (i as f64 * 0.37).sin() + 0.3 * (i as f64 * 1.3).cos())
            .collect();
        let v0 = StateV::new(vals, grid).unwrap();
        let params = SchemeParams::new(2.5, 1.5, 2e-4).unwrap();
        simulate(&v0, &params, 60, &SolverOptions::default()).unwrap()
    };
    for (name, traj) in [
        ("fast", fast_run()),
        ("slow", slow_run()),
        ("slow-fine", slow_fine_run()),
        ("generic", &generic),
    ] {
        let p = traj.params();
        let (c_min, c_max) = a1_constants(p.alpha(), p.beta()).unwrap();
        let report = check_a1(traj.records(), c_min, c_max, 1e-8).unwrap();
        assert!(
            report.pass,
            "{name}: sandwich failed at step {} with ratio {} (bounds [{c_min}, {c_max}])",
            report.worst_index, report.worst_ratio
        );
        assert!(report.checked_steps > 0, "{name}: nothing was checked");
    }
    println!("ACCEPTANCE 3 (A1 sandwich with theoretical constants): PASS");
}

#[test]
fn acceptance_4_abstract_decay_end_to_end() {
    // Tight synthetic construction: geometric Fisher sequence and entropy
    // matched so that P = C F exactly with C_m = C_M = C.
    let tau = 0.1f64;
    let kappa0 = 2.0f64;
    let c = 1.7f64;
    let f0 = 3.0f64;
    let q = 1.0 / (1.0 + tau * kappa0);
    let n = 60;
    let fisher: Vec<f64> = (0..n).map(|k| f0 * q.powi(k)).collect();
    let entropy: Vec<f64> = (0..n)
        .map(|k| tau * c * f0 * q.powi(k + 1) / (1.0 - q))
        .collect();
    let records: Vec<FunctionalRecord> = (0..n as usize)
        .map(|k| FunctionalRecord {
            step: k,
            time: k as f64 * tau,
            entropy_h: entropy[k],
            fisher: fisher[k],
            production: c * fisher[k],
            mass_u: 0.0,
            mass_v: 0.0,
            rel_entropy_u: entropy[k],
            residual: 0.0,
            iterations: 0,
        })
        .collect();

    let a1 = check_a1(&records, c, c, 1e-12).unwrap();
    assert!(a1.pass);
    let kappa = estimate_kappa(&fisher, tau).unwrap();
    assert!((kappa - kappa0).abs() <= 1e-12 * kappa0);
    let (lambda, eta) = decay_params(c, c, kappa, tau).unwrap();
    assert!((lambda - kappa0).abs() <= 1e-12 * kappa0);

    let report = verify_decay_bound(&entropy, lambda, eta, tau, 1e-12).unwrap();
    assert!(report.pass, "margin {:.3e}", report.worst_margin);
    // Tight construction: the bound holds with equality.
    for (k, &hk) in entropy.iter().enumerate() {
        let bound = entropy[0] * (-eta * lambda * k as f64 * tau).exp();
        assert!(
            (hk - bound).abs() <= 1e-12 * entropy[0],
            "step {k}: {hk} vs bound {bound}"
        );
    }
    println!("ACCEPTANCE 4 (abstract decay argument, tight synthetic): PASS");
}

#[test]
fn acceptance_5_region_scans() {
    let t0 = Instant::now();
    let quarter = scan_quarter();
    let hundredth = scan_hundredth();

    for (label, scan) in [("eps=1/4", quarter), ("eps=1/100", hundredth)] {
        let mut a1_cells = 0usize;
        for (ix, a) in scan.x_values().iter().enumerate() {
            for (iy, b) in scan.y_values().iter().enumerate() {
                let cell = scan.cell(ix, iy);
                if cell.admissible() {
                    // (b) admissible cells lie in the continuous region
                    // (boundary cells can sit exactly on the zero set).
                    assert!(
                        *a > 0.0 && rc_product(ABPoint::new(*a, *b)) <= 1e-7,
                        "{label}: admissible cell ({a}, {b}) outside the continuous region \
                         (product {})",
                        rc_product(ABPoint::new(*a, *b))
                    );
                }
                // (a) the A = 1 line is admissible.
                if (a - 1.0).abs() < 1e-9 {
                    a1_cells += 1;
                    assert!(
                        cell.admissible(),
                        "{label}: A = 1, B = {b} inadmissible (min T = {:.3e})",
                        cell.min_t
                    );
                }
            }
        }
        assert!(a1_cells > 0, "{label}: no A = 1 cells sampled");
    }

    // (c) smaller eps admits at least as much, cellwise.
    for ix in 0..quarter.x_values().len() {
        for iy in 0..quarter.y_values().len() {
            if quarter.cell(ix, iy).admissible() {
                assert!(
                    hundredth.cell(ix, iy).admissible(),
                    "nesting violated at ({}, {})",
                    quarter.x_values()[ix],
                    quarter.y_values()[iy]
                );
            }
        }
    }

    // The porous-medium plane scan: the alpha - beta = 1 line is admissible
    // and everything admissible lies in the continuous strip.
    let ab_scan = region_scan_alphabeta(
        AxisSpec::new(0.0, 4.0, 60).unwrap(),
        AxisSpec::new(0.0, 4.0, 60).unwrap(),
        0.25,
        &LogGrid::default_domain(),
        &ScanOptions {
            workers: 4,
            ..Default::default()
        },
    )
    .unwrap();
    let mut line_cells = 0usize;
    for (ix, alpha) in ab_scan.x_values().iter().enumerate() {
        for (iy, beta) in ab_scan.y_values().iter().enumerate() {
            let cell = ab_scan.cell(ix, iy);
            if cell.admissible() {
                let d = alpha - beta;
                assert!(
                    alpha + beta > 1.0 && (-1.0 - 1e-7..=2.0 + 1e-7).contains(&d),
                    "admissible ({alpha}, {beta}) outside the continuous strip"
                );
            }
            if (alpha - beta - 1.0).abs() < 1e-9 && alpha + beta > 1.0 {
                line_cells += 1;
                assert!(
                    cell.admissible(),
                    "alpha - beta = 1 cell ({alpha}, {beta}) inadmissible (min T {:.3e})",
                    cell.min_t
                );
            }
        }
    }
    assert!(line_cells > 0, "no alpha - beta = 1 cells sampled");

    let elapsed = t0.elapsed().as_secs_f64();
    assert!(elapsed <= 300.0, "region scans took {elapsed:.1} s (> 5 min)");
    println!("ACCEPTANCE 5 (region scans, line inclusion/subset/nesting): PASS");
}

#[test]
fn acceptance_6_local_expansion() {
    let mut rng = ChaCha8Rng::seed_from_u64(601);
    let h_values: Vec<f64> = (0..8).map(|j| 1e-2 / f64::from(1u32 << j)).collect();
    let mut checked = 0usize;
    while checked < 20 {
        let ab = ABPoint::new(
            0.05 + 2.95 * rng.gen::<f64>(),
            -2.0 + 8.0 * rng.gen::<f64>(),
        );
        // The shift construction applies where kappa_c does not exceed A;
        // the local form cannot be nonnegative elsewhere.
        if rc_product(ab) > -1e-3 || (ab.a + ab.b - 2.0).abs() < 1e-3 {
            continue;
        }
        let Ok(kappa) = kappa_c(ab) else { continue };
        if kappa > ab.a {
            continue;
        }
        checked += 1;
        let c = c_shift(ab, kappa);
        let rho = (ab.a + ab.b + 1.0) / 3.0;
        for _ in 0..10 {
            let u = 2.0 * rng.gen::<f64>() - 1.0;
            let v = 2.0 * rng.gen::<f64>() - 1.0;
            let report = local_expansion_check(ab, kappa, c, rho, u, v, &h_values).unwrap();
            assert!(
                report.q_target >= -1e-8,
                "({}, {}) at (u, v) = ({u}, {v}): limit {} < -1e-8",
                ab.a,
                ab.b,
                report.q_target
            );
            assert!(
                report.converges(0.8),
                "({}, {}) at (u, v) = ({u}, {v}): order {:?}",
                ab.a,
                ab.b,
                report.order
            );
        }
    }
    println!("ACCEPTANCE 6 (local expansion of T, 20 x 10 samples): PASS");
}

#[test]
fn acceptance_7_appendix_oracles() {
    // Power-mean product ordering over 1e4 random samples.
    let mut rng = ChaCha8Rng::seed_from_u64(701);
    for _ in 0..10_000 {
        let x = 10.0 * rng.gen::<f64>();
        let y = if rng.gen::<f64>() < 0.05 {
            0.0
        } else {
            10.0 * rng.gen::<f64>()
        };
        let a = 0.01 + 4.99 * rng.gen::<f64>();
        let b = 0.01 + 4.99 * rng.gen::<f64>();
        let (lo, mid, up) = power_mean_bounds(x, y, a, b).unwrap();
        let scale = 1.0 + lo.abs().max(mid.abs()).max(up.abs());
        assert!(lo <= mid + 1e-12 * scale, "({x}, {y}, {a}, {b})");
        assert!(mid <= up + 1e-12 * scale, "({x}, {y}, {a}, {b})");
    }

    // Discrete Poincare-Wirtinger: sharpness on the first cosine mode and
    // validity on random mean-zero vectors.
    for n in [4usize, 16, 128] {
        let grid = GridSpec::new(n).unwrap();
        let h = grid.h();
        let c_p = pmelab::functionals::poincare_discrete(&grid);

        let raw: Vec<f64> = (0..n)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 * h).cos())
            .collect();
        let mean = raw.iter().sum::<f64>() / n as f64;
        let z: Vec<f64> = raw.iter().map(|x| x - mean).collect();
        let lhs = h * z.iter().map(|x| x * x).sum::<f64>();
        let rhs = c_p / h
            * (0..n)
                .map(|i| {
                    let d = z[(i + 1) % n] - z[i];
                    d * d
                })
                .sum::<f64>();
        assert!(
            (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
            "sharpness at N = {n}: {lhs} vs {rhs}"
        );

        for _ in 0..1000 {
            let raw: Vec<f64> = (0..n).map(|_| 2.0 * rng.gen::<f64>() - 1.0).collect();
            let mean = raw.iter().sum::<f64>() / n as f64;
            let z: Vec<f64> = raw.iter().map(|x| x - mean).collect();
            let lhs = h * z.iter().map(|x| x * x).sum::<f64>();
            let rhs = c_p / h
                * (0..n)
                    .map(|i| {
                        let d = z[(i + 1) % n] - z[i];
                        d * d
                    })
                    .sum::<f64>();
            assert!(
                lhs <= rhs * (1.0 + 1e-12) + 1e-30,
                "inequality failed at N = {n}: {lhs} vs {rhs}"
            );
        }
    }
    println!("ACCEPTANCE 7 (appendix inequalities, sharp constants): PASS");
}

#[test]
fn acceptance_8_two_node_solver_oracle() {
    // Fixed instance: alpha = beta = 2, v_prev = (1, 4), tau = h^2/8.
    {
        let tau = 0.25 / 8.0;
        let params = SchemeParams::new(2.0, 2.0, tau).unwrap();
        let (solved, _) =
            pmelab::solver::step(&common::state2([1.0, 4.0]), &params, &SolverOptions::default())
                .unwrap();
        let oracle = common::brute_force_two_node_step([1.0, 4.0], 2.0, 2.0, tau);
        for i in 0..2 {
            assert!(
                (solved.values()[i] - oracle[i]).abs() <= 1e-10,
                "fixed instance component {i}: {} vs {}",
                solved.values()[i],
                oracle[i]
            );
        }
        // The pair genuinely moved and stayed positive.
        assert!(oracle[0] > 1.0 && oracle[1] < 4.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    for trial in 0..50 {
        let alpha = 1.2 + 2.8 * rng.gen::<f64>();
        let beta = 0.3 + 3.2 * rng.gen::<f64>();
        let p = [0.2 + 4.8 * rng.gen::<f64>(), 0.2 + 4.8 * rng.gen::<f64>()];
        let h: f64 = 0.5;
        let vmax = p[0].max(p[1]);
        let tau = rng.gen::<f64>() * h * h / (alpha * beta * vmax);
        let tau = tau.max(1e-9);

        let params = SchemeParams::new(alpha, beta, tau).unwrap();
        let (solved, diag) =
            pmelab::solver::step(&common::state2(p), &params, &SolverOptions::default()).unwrap();
        let oracle = common::brute_force_two_node_step(p, alpha, beta, tau);
        for i in 0..2 {
            assert!(
                (solved.values()[i] - oracle[i]).abs() <= 1e-10,
                "trial {trial} (alpha {alpha:.3}, beta {beta:.3}, tau {tau:.3e}): \
                 component {i}: {} vs oracle {} (residual {:.2e})",
                solved.values()[i],
                oracle[i],
                diag.residual
            );
        }
    }
    println!("ACCEPTANCE 8 (N = 2 step vs brute-force root oracle): PASS");
}

#[test]
fn acceptance_9_sbp_inequality() {
    // (a) The A = 1 line with kappa = 1 holds for arbitrary nonnegative
    // vectors, zeros included.
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    for trial in 0..100_000 {
        let n = 3 + (rng.gen::<f64>() * 10.0) as usize;
        let b = -2.0 + 8.0 * rng.gen::<f64>();
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen::<f64>() < 0.15 {
                    0.0
                } else {
                    2.0 * rng.gen::<f64>()
                }
            })
            .collect();
        let check = sbp_inequality_check(&w, ABPoint::new(1.0, b), 1.0).unwrap();
        assert!(
            check.holds,
            "trial {trial}: A = 1, B = {b}, w = {w:?}: lhs {} < rhs {}",
            check.lhs, check.rhs
        );
    }

    // (b) 20 random cells from the scanned admissible region at eps = 1/4,
    // near-constant vectors; failures are written out as counterexamples.
    let scan = scan_quarter();
    let admissible: Vec<(f64, f64)> = {
        let mut cells = Vec::new();
        for (ix, a) in scan.x_values().iter().enumerate() {
            for (iy, b) in scan.y_values().iter().enumerate() {
                if scan.cell(ix, iy).verdict == Verdict::Admissible {
                    cells.push((*a, *b));
                }
            }
        }
        cells
    };
    assert!(admissible.len() >= 20, "scan found too few admissible cells");
    let mut failures: Vec<String> = Vec::new();
    for _ in 0..20 {
        let (a, b) = admissible[rng.gen_range(0..admissible.len())];
        let ab = ABPoint::new(a, b);
        let kappa = 0.25 * a;
        for _ in 0..10_000 {
            let w: Vec<f64> = (0..16)
                .map(|_| 1.0 + 0.05 * (2.0 * rng.gen::<f64>() - 1.0))
                .collect();
            let check = sbp_inequality_check(&w, ab, kappa).unwrap();
            if !check.holds {
                failures.push(format!(
                    "A={a},B={b},kappa={kappa},lhs={},rhs={},w={w:?}",
                    check.lhs, check.rhs
                ));
            }
        }
    }
    if !failures.is_empty() {
        let path = std::env::temp_dir().join("pmelab_sbp_counterexamples.txt");
        std::fs::write(&path, failures.join("\n")).ok();
        panic!(
            "{} counterexamples inside the scanned region (written to {})",
            failures.len(),
            path.display()
        );
    }
    println!("ACCEPTANCE 9 (summation-by-parts inequality checks): PASS");
}
