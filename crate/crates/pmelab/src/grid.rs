//! Uniform periodic grid on the unit torus and nonnegative nodal states.
//!
//! The torus is identified with `[0, 1]` and carries measure one, so the
//! cell width is always `h = 1/N`. Nodes sit at the cell right endpoints
//! `x_i = (i+1)·h`, and all indexing wraps periodically.

use crate::{Error, Result};

/// Uniform periodic grid with `N >= 2` cells; `h` is derived, never stored.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n_cells: usize,
}

impl GridSpec {
    pub fn new(n_cells: usize) -> Result<Self> {
        if n_cells < 2 {
            return Err(Error::invalid(format!(
                "grid needs at least 2 cells, got {n_cells}"
            )));
        }
        Ok(GridSpec { n_cells })
    }

    pub fn n_cells(&self) -> usize {
        self.n_cells
    }

    /// Cell width `h = 1/N`.
    pub fn h(&self) -> f64 {
        1.0 / self.n_cells as f64
    }

    /// Node coordinate `x_i = (i+1)·h` for `i` in `0..N`.
    pub fn node(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.h()
    }

    /// Periodic left neighbor index.
    pub fn left(&self, i: usize) -> usize {
        if i == 0 {
            self.n_cells - 1
        } else {
            i - 1
        }
    }

    /// Periodic right neighbor index.
    pub fn right(&self, i: usize) -> usize {
        if i + 1 == self.n_cells {
            0
        } else {
            i + 1
        }
    }
}

/// Periodic second difference `w_{i+1} - 2 w_i + w_{i-1}`.
///
/// The output sums to zero exactly in real arithmetic (every entry of `w`
/// appears once with weight +1, once with -2 and once with +1 across the
/// periodic sum), so `sum(second_difference(w))` is a pure rounding residue.
pub fn second_difference(w: &[f64], grid: &GridSpec) -> Result<Vec<f64>> {
    if w.len() != grid.n_cells() {
        return Err(Error::LengthMismatch {
            expected: grid.n_cells(),
            got: w.len(),
        });
    }
    let n = w.len();
    let mut out = vec![0.0; n];
    for i in 0..n {
        out[i] = w[grid.right(i)] - 2.0 * w[i] + w[grid.left(i)];
    }
    Ok(out)
}

/// Nonnegative nodal state in the transformed variable `v = u^alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateV {
    values: Vec<f64>,
    grid: GridSpec,
}

/// Nonnegative nodal state in the physical variable `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateU {
    values: Vec<f64>,
    grid: GridSpec,
}

fn check_state(values: &[f64], grid: &GridSpec) -> Result<()> {
    if values.len() != grid.n_cells() {
        return Err(Error::LengthMismatch {
            expected: grid.n_cells(),
            got: values.len(),
        });
    }
    for (i, &v) in values.iter().enumerate() {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::invalid(format!(
                "state entry {i} is {v}; entries must be finite and >= 0"
            )));
        }
    }
    Ok(())
}

impl StateV {
    pub fn new(values: Vec<f64>, grid: GridSpec) -> Result<Self> {
        check_state(&values, &grid)?;
        Ok(StateV { values, grid })
    }

    pub fn constant(c: f64, grid: GridSpec) -> Result<Self> {
        StateV::new(vec![c; grid.n_cells()], grid)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Transform back to the physical variable, `u_i = v_i^{1/alpha}`.
    pub fn to_u(&self, alpha: f64) -> StateU {
        let e = 1.0 / alpha;
        StateU {
            values: self.values.iter().map(|&v| v.powf(e)).collect(),
            grid: self.grid,
        }
    }
}

impl StateU {
    pub fn new(values: Vec<f64>, grid: GridSpec) -> Result<Self> {
        check_state(&values, &grid)?;
        Ok(StateU { values, grid })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Transform to the evolution variable, `v_i = u_i^alpha`.
    pub fn to_v(&self, alpha: f64) -> StateV {
        StateV {
            values: self.values.iter().map(|&u| u.powf(alpha)).collect(),
            grid: self.grid,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn grid_rejects_degenerate_sizes() {
        assert!(GridSpec::new(0).is_err());
        assert!(GridSpec::new(1).is_err());
        assert!(GridSpec::new(2).is_ok());
    }

    #[test]
    fn grid_width_times_cells_is_one() {
        for n in [2, 3, 7, 64, 1000] {
            let g = GridSpec::new(n).unwrap();
            assert_eq!(g.h() * n as f64, 1.0);
        }
    }

    #[test]
    fn second_difference_annihilates_constants() {
        let g = GridSpec::new(6).unwrap();
        let out = second_difference(&[3.25; 6], &g).unwrap();
        assert!(out.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn second_difference_alternating_vector() {
        let g = GridSpec::new(4).unwrap();
        let out = second_difference(&[0.0, 1.0, 0.0, 1.0], &g).unwrap();
        assert_eq!(out, vec![2.0, -2.0, 2.0, -2.0]);
    }

    #[test]
    fn second_difference_length_mismatch() {
        let g = GridSpec::new(4).unwrap();
        assert!(matches!(
            second_difference(&[1.0; 5], &g),
            Err(Error::LengthMismatch { expected: 4, got: 5 })
        ));
    }

    #[test]
    fn state_rejects_negative_entries() {
        let g = GridSpec::new(3).unwrap();
        assert!(StateV::new(vec![1.0, -1e-30, 2.0], g).is_err());
        assert!(StateU::new(vec![1.0, f64::NAN, 2.0], g).is_err());
    }

    #[test]
    fn u_v_round_trip() {
        let g = GridSpec::new(4).unwrap();
        let u = StateU::new(vec![0.0, 0.5, 1.0, 2.0], g).unwrap();
        let back = u.to_v(3.0).to_u(3.0);
        for (a, b) in u.values().iter().zip(back.values()) {
            assert!((a - b).abs() <= 1e-15 * (1.0 + a.abs()));
        }
    }

    proptest! {
        // Telescoping under the periodic wrap: the summed stencil cancels.
        #[test]
        fn second_difference_sums_to_zero(w in proptest::collection::vec(-100.0..100.0f64, 2..40)) {
            let g = GridSpec::new(w.len()).unwrap();
            let out = second_difference(&w, &g).unwrap();
            let total: f64 = out.iter().sum();
            let scale: f64 = w.iter().map(|x| x.abs()).sum::<f64>().max(1.0);
            prop_assert!(total.abs() <= 1e-12 * scale);
        }
    }
}
