use crate::error::{Error, Result};
use crate::reaction::{lipschitz_bound, Nonlinearity};

use super::grid::{Grid, ShiftedSystem};

/// Tolerance on the `[0, 1]` range check; covers roundoff only.
pub const RANGE_TOL: f64 = 1e-12;

/// Repeated IMEX steps with a fixed `dt`; the implicit matrix is factored once.
///
/// Each step solves `(M + dt θ K) u⁺ = M u − dt (1 − θ) K u + dt M f(u)`.
#[derive(Clone, Debug)]
pub struct Stepper<'a> {
    grid: &'a Grid,
    f: &'a Nonlinearity,
    dt: f64,
    theta: f64,
    system: ShiftedSystem,
}

impl<'a> Stepper<'a> {
    pub fn new(grid: &'a Grid, f: &'a Nonlinearity, dt: f64, theta: f64) -> Result<Self> {
        Self::with_lipschitz(grid, f, dt, theta, lipschitz_bound(f))
    }

    pub(crate) fn with_lipschitz(
        grid: &'a Grid,
        f: &'a Nonlinearity,
        dt: f64,
        theta: f64,
        lipschitz: f64,
    ) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::OutOfRange(format!("dt must be positive, got {dt}")));
        }
        if !(0.5..=1.0).contains(&theta) {
            return Err(Error::OutOfRange(format!(
                "θ must lie in [1/2, 1], got {theta}"
            )));
        }
        if dt * lipschitz > 1.0 {
            return Err(Error::OutOfRange(format!(
                "monotonicity guard violated: dt·Lip(f) = {} > 1 (dt = {dt}, Lip = {lipschitz})",
                dt * lipschitz
            )));
        }
        let system = ShiftedSystem::new(grid, dt * theta)?;
        Ok(Stepper {
            grid,
            f,
            dt,
            theta,
            system,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Advance one step; fails if the result leaves `[0, 1]`.
    pub fn step(&self, u: &[f64]) -> Result<Vec<f64>> {
        let grid = self.grid;
        let mass = grid.mass();
        let mut rhs: Vec<f64> = u
            .iter()
            .zip(mass)
            .map(|(&x, &m)| m * (x + self.dt * self.f.eval(x)))
            .collect();
        if self.theta < 1.0 {
            let ku = grid.stiffness_apply(u);
            let w = self.dt * (1.0 - self.theta);
            for (r, k) in rhs.iter_mut().zip(ku) {
                *r -= w * k;
            }
        }
        let next = self.system.solve(grid, &rhs)?;
        if let Some((i, &v)) = next
            .iter()
            .enumerate()
            .find(|(_, &v)| !(-RANGE_TOL..=1.0 + RANGE_TOL).contains(&v))
        {
            return Err(Error::OutOfRange(format!(
                "discrete maximum principle violated: u[{i}] = {v} at ρ = {}",
                grid.centers()[i]
            )));
        }
        Ok(next)
    }
}

/// One IMEX step.
pub fn step_imex(
    grid: &Grid,
    u: &[f64],
    f: &Nonlinearity,
    dt: f64,
    theta: f64,
) -> Result<Vec<f64>> {
    Stepper::new(grid, f, dt, theta)?.step(u)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pde::grid::{make_grid_half_line, BoundaryCondition};
    use crate::reaction::logistic;
    use crate::tree::RegularTree;

    #[test]
    fn equilibrium_is_kept() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let g = make_grid_half_line(&t, 4, 8, BoundaryCondition::Neumann).unwrap();
        let u = vec![0.5; g.n_cells()];
        let v = step_imex(&g, &u, &Nonlinearity::zero(), 0.3, 1.0).unwrap();
        for x in v {
            assert!((x - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn mass_conserved_without_reaction() {
        let t = RegularTree::homogeneous(3, 0.5).unwrap();
        let g = make_grid_half_line(&t, 5, 6, BoundaryCondition::Neumann).unwrap();
        let zero = Nonlinearity::zero();
        for &theta in &[1.0, 0.5] {
            let st = Stepper::new(&g, &zero, 0.01, theta).unwrap();
            let mut u = g.sample(|x| if x < 0.7 { 0.9 } else { 0.1 });
            let m0 = g.weighted_mass(&u);
            for _ in 0..20 {
                let next = st.step(&u).unwrap();
                assert!((g.weighted_mass(&next) - g.weighted_mass(&u)).abs() < 1e-12 * m0);
                u = next;
            }
        }
    }

    #[test]
    fn guard_rejects_large_steps() {
        let t = RegularTree::homogeneous(2, 1.0).unwrap();
        let g = make_grid_half_line(&t, 2, 4, BoundaryCondition::Dirichlet0).unwrap();
        let f = logistic(2.0).unwrap();
        assert!(Stepper::new(&g, &f, 0.6, 1.0).is_err());
        assert!(Stepper::new(&g, &f, 0.4, 1.0).is_ok());
        assert!(Stepper::new(&g, &f, 0.4, 0.3).is_err());
    }
}
