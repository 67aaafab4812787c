//! Classical four-stage Runge-Kutta on the Fourier-space method-of-lines system
//! `u' = v`, `v'_l = -omega_l^2 u_l - f(u)_l / eps^2`, with `f(u)` evaluated on the grid.

use num_complex::Complex64;

use crate::error::{KgeError, Result};
use crate::ewi::step_count;
use crate::grid::{forward_dft, inverse_dft, GridSpec, RealField, SpectralField};
use crate::problem::{initial_state, KgeProblem, SolverState};
use crate::weights::mode_frequencies;

/// Right-hand side `(u', v')` of the semi-discrete system.
pub fn rk4_rhs(problem: &KgeProblem, grid: &GridSpec, state: &SolverState) -> Result<(SpectralField, SpectralField)> {
    let omega = mode_frequencies(grid, problem.epsilon()).omega;
    rhs_with(problem, grid, &omega, &state.u, &state.udot)
}

fn rhs_with(
    problem: &KgeProblem,
    grid: &GridSpec,
    omega: &[f64],
    u: &SpectralField,
    v: &SpectralField,
) -> Result<(SpectralField, SpectralField)> {
    let inv_eps2 = 1.0 / (problem.epsilon() * problem.epsilon());
    let f = problem.nonlinearity();
    let fu = forward_dft(grid, &RealField::new(f.values(inverse_dft(grid, u)?.values())))?;
    let dv = u
        .coeffs()
        .iter()
        .zip(fu.coeffs())
        .zip(omega)
        .map(|((&u, &fu), &w)| -w * w * u - fu * inv_eps2)
        .collect();
    Ok((v.clone(), SpectralField::new(dv)))
}

fn combine(base: &SpectralField, parts: &[(f64, &SpectralField)]) -> SpectralField {
    let mut out: Vec<Complex64> = base.coeffs().to_vec();
    for (w, part) in parts {
        for (o, p) in out.iter_mut().zip(part.coeffs()) {
            *o += *w * p;
        }
    }
    SpectralField::new(out)
}

/// Classical RK4 stepper (RK4FP) on the same grid and transforms as the EWI path.
#[derive(Debug, Clone)]
pub struct Rk4Integrator {
    problem: KgeProblem,
    grid: GridSpec,
    omega: Vec<f64>,
    tau: f64,
}

impl Rk4Integrator {
    pub fn new(problem: &KgeProblem, grid: &GridSpec, tau: f64) -> Result<Self> {
        if tau == 0.0 || !tau.is_finite() {
            return Err(KgeError::InvalidParameter(format!(
                "tau = {tau} must be finite and nonzero"
            )));
        }
        Ok(Self {
            problem: problem.clone(),
            grid: grid.clone(),
            omega: mode_frequencies(grid, problem.epsilon()).omega,
            tau,
        })
    }

    pub fn step(&self, s: &SolverState) -> Result<SolverState> {
        let (p, g, w, h) = (&self.problem, &self.grid, self.omega.as_slice(), self.tau);
        let (k1u, k1v) = rhs_with(p, g, w, &s.u, &s.udot)?;
        let (k2u, k2v) = rhs_with(
            p,
            g,
            w,
            &combine(&s.u, &[(0.5 * h, &k1u)]),
            &combine(&s.udot, &[(0.5 * h, &k1v)]),
        )?;
        let (k3u, k3v) = rhs_with(
            p,
            g,
            w,
            &combine(&s.u, &[(0.5 * h, &k2u)]),
            &combine(&s.udot, &[(0.5 * h, &k2v)]),
        )?;
        let (k4u, k4v) = rhs_with(p, g, w, &combine(&s.u, &[(h, &k3u)]), &combine(&s.udot, &[(h, &k3v)]))?;
        let c = h / 6.0;
        Ok(SolverState {
            u: combine(&s.u, &[(c, &k1u), (2.0 * c, &k2u), (2.0 * c, &k3u), (c, &k4u)]),
            udot: combine(&s.udot, &[(c, &k1v), (2.0 * c, &k2v), (2.0 * c, &k3v), (c, &k4v)]),
            t: s.t + h,
        })
    }

    /// Advances `steps` steps; `observer` sees the initial state and every new level.
    pub fn run(&self, s0: SolverState, steps: usize, mut observer: impl FnMut(&SolverState)) -> Result<SolverState> {
        let t0 = s0.t;
        observer(&s0);
        let mut s = s0;
        for n in 1..=steps {
            s = self.step(&s)?;
            s.t = t0 + n as f64 * self.tau;
            if !s.is_finite() {
                return Err(KgeError::Instability { step: n, t: s.t });
            }
            observer(&s);
        }
        Ok(s)
    }
}

/// Integrates with RK4FP from the initial data to `t_final`.
pub fn integrate_rk4(
    problem: &KgeProblem,
    grid: &GridSpec,
    tau: f64,
    t_final: f64,
    observer: Option<&mut dyn FnMut(&SolverState)>,
) -> Result<SolverState> {
    let steps = step_count(t_final, tau)?;
    let rk = Rk4Integrator::new(problem, grid, tau)?;
    let s0 = initial_state(problem, grid);
    match observer {
        Some(obs) => rk.run(s0, steps, obs),
        None => rk.run(s0, steps, |_| {}),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use crate::problem::{CubicNonlinearity, InitialData};
    use std::sync::Arc;

    #[test]
    fn zero_state_has_zero_rhs() {
        let g = build_grid(-8.0, 8.0, 32).unwrap();
        let p = KgeProblem::new(
            0.5,
            Arc::new(CubicNonlinearity::new(1.0)),
            InitialData::Zero,
            InitialData::Zero,
        )
        .unwrap();
        let (du, dv) = rk4_rhs(&p, &g, &initial_state(&p, &g)).unwrap();
        assert!(du.coeffs().iter().chain(dv.coeffs()).all(|z| z.norm() == 0.0));
    }

    #[test]
    fn linear_rhs_is_a_harmonic_oscillator() {
        let g = build_grid(-8.0, 8.0, 32).unwrap();
        let p = KgeProblem::new(
            0.3,
            Arc::new(CubicNonlinearity::new(0.0)),
            InitialData::gaussian(1.0),
            InitialData::gaussian(0.5),
        )
        .unwrap();
        let s = initial_state(&p, &g);
        let omega = mode_frequencies(&g, 0.3).omega;
        let (du, dv) = rk4_rhs(&p, &g, &s).unwrap();
        assert_eq!(du, s.udot);
        for k in 0..32 {
            let want = -omega[k] * omega[k] * s.u.coeffs()[k];
            assert!((dv.coeffs()[k] - want).norm() <= 1e-14 * want.norm().max(1.0));
        }
    }

    #[test]
    fn linear_step_is_taylor_truncated_rotation() {
        let g = build_grid(-8.0, 8.0, 32).unwrap();
        let p = KgeProblem::new(
            0.8,
            Arc::new(CubicNonlinearity::new(0.0)),
            InitialData::gaussian(1.0),
            InitialData::gaussian(-0.7),
        )
        .unwrap();
        let s0 = initial_state(&p, &g);
        let tau = 0.05;
        let s1 = Rk4Integrator::new(&p, &g, tau).unwrap().step(&s0).unwrap();
        let omega = mode_frequencies(&g, 0.8).omega;
        for k in 0..32 {
            let z = omega[k] * tau;
            // degree-4 Taylor polynomial of exp(tau J), J = [[0, 1], [-w^2, 0]]
            let c = 1.0 - z * z / 2.0 + z.powi(4) / 24.0;
            let s = (z - z.powi(3) / 6.0) / omega[k];
            let ws = omega[k] * (z - z.powi(3) / 6.0);
            let (u0, v0) = (s0.u.coeffs()[k], s0.udot.coeffs()[k]);
            let u1 = c * u0 + s * v0;
            let v1 = -ws * u0 + c * v0;
            assert!((s1.u.coeffs()[k] - u1).norm() <= 1e-13 * u1.norm().max(1e-3));
            assert!((s1.udot.coeffs()[k] - v1).norm() <= 1e-13 * v1.norm().max(1e-3));
        }
    }
}
