//! Trajectory-level properties at production resolutions.

use pmelab::experiments::{run_scenario, Scenario};
use pmelab::grid::GridSpec;
use pmelab::solver::{barenblatt_init, simulate, BarenblattCase, SchemeParams, SolverOptions};

#[test]
fn fast_diffusion_entropy_strictly_decreasing_at_fine_step() {
    let grid = GridSpec::new(128).unwrap();
    let u0 = barenblatt_init(grid, 0.5, BarenblattCase::Fast).unwrap();
    let params = SchemeParams::new(2.0, 0.5, 1e-5).unwrap();
    let traj = simulate(&u0.to_v(2.0), &params, 500, &SolverOptions::default()).unwrap();
    let hs: Vec<f64> = traj.records().iter().map(|r| r.entropy_h).collect();
    for k in 1..hs.len() {
        assert!(hs[k] < hs[k - 1], "entropy not strictly decreasing at {k}");
    }
}

#[test]
fn out_of_region_run_proceeds_with_flags() {
    // alpha - beta > 2 lies outside the admissible strip; the decay is
    // still observed empirically, and the certificate records the
    // hypothesis violations instead of failing the run.
    let scenario = Scenario {
        name: "outside".into(),
        alpha: 4.0,
        beta: 1.2,
        grid_sizes: vec![64],
        time_steps: vec![1e-5],
        n_steps: Some(40),
        ..Scenario::slow_default()
    };
    let artifacts = run_scenario(&scenario).unwrap();
    let cert = &artifacts[0].certificate;
    assert!(!cert.region_s_admissible);
    assert!(cert.gamma_in_range); // gamma = (alpha+beta-1)/(2 alpha) = 0.525
    let ent: Vec<f64> = artifacts[0].records().iter().map(|r| r.rel_entropy_u).collect();
    for k in 1..ent.len() {
        assert!(ent[k] < ent[k - 1], "entropy not decreasing at {k}");
    }
    assert!(cert.a1_pass);
}

#[test]
fn scheme_params_region_flag() {
    // The alpha - beta = 1 line is inside the scanned region.
    let on_line = SchemeParams::new(3.0, 2.0, 1e-4).unwrap();
    assert!(on_line.theorem_hypotheses_met(0.25));
    // beta < 1 fails the exponent hypothesis even when the mapped cell
    // is admissible.
    let fast = SchemeParams::new(2.0, 0.5, 1e-4).unwrap();
    assert!(!fast.theorem_hypotheses_met(0.25));
    // Far outside the strip.
    let outside = SchemeParams::new(4.0, 1.2, 1e-4).unwrap();
    assert!(!outside.theorem_hypotheses_met(0.25));
}
