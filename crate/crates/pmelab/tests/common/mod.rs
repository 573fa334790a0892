//! Shared helpers for the integration suites: an independent brute-force
//! oracle for the two-node implicit step, and a deterministic RNG wrapper.

use pmelab::grid::{GridSpec, StateV};

/// Solve the two-node implicit step by nested bisection on the residual map,
/// independent of the Newton path used by the library.
///
/// Rows (periodic, both neighbors coincide):
/// `v_i - p_i - s * v_i^{(alpha-1)/alpha} * 2 (w_j - w_i) = 0`,
/// `s = alpha*tau/h^2`, `w = v^{beta/alpha}`.
pub fn brute_force_two_node_step(p: [f64; 2], alpha: f64, beta: f64, tau: f64) -> [f64; 2] {
    let h = 0.5;
    let s = alpha * tau / (h * h);
    let e_phi = (alpha - 1.0) / alpha;
    let e_w = beta / alpha;

    let row = |vi: f64, vj: f64, pi: f64| -> f64 {
        vi - pi - s * vi.powf(e_phi) * 2.0 * (vj.powf(e_w) - vi.powf(e_w))
    };

    // Root of row(., vj, pi) in its first argument; f(0) = -pi < 0 and
    // f -> +infinity, and the draws keep s small enough for a single
    // crossing.
    let inner_root = |vj: f64, pi: f64| -> f64 {
        let mut hi = pi.max(vj) + 1.0;
        while row(hi, vj, pi) <= 0.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid == lo || mid == hi {
                break;
            }
            if row(mid, vj, pi) > 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        0.5 * (lo + hi)
    };

    // Outer bisection on v1 against the second row with v0 = inner_root(v1).
    let outer = |v1: f64| -> f64 {
        let v0 = inner_root(v1, p[0]);
        row(v1, v0, p[1])
    };
    let mut hi = p[0].max(p[1]) + 1.0;
    while outer(hi) <= 0.0 {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if outer(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let v1 = 0.5 * (lo + hi);
    [inner_root(v1, p[0]), v1]
}

pub fn state2(vals: [f64; 2]) -> StateV {
    StateV::new(vals.to_vec(), GridSpec::new(2).unwrap()).unwrap()
}
