//! Symmetric Gautschi-type exponential wave integrators (orders 2, 4, 6) with
//! Fourier pseudospectral discretization.
//!
//! Per mode `l` the main step is the three-level recurrence
//!
//! ```text
//! u^{n+1}    = -u^{n-1} + 2 cos(w tau) u^n       - sum_{m even} A_m    F_m^n
//! udot^{n+1} = udot^{n-1} - 2 w sin(w tau) u^n   - sum_{m even} Adot_m F_m^n
//! ```
//!
//! where `F_m^n` are the coefficients of `d^m/ds^m f(u(t_n + s))` at `s = 0`.
//! The first level is produced by the one-sided variation-of-constants step with
//! all Taylor terms `m <= 2N - 2`. Time derivatives of `u` are taken from the
//! equation itself, so no extra history is needed.

use log::warn;
use num_complex::Complex64;

use crate::error::{KgeError, Result};
use crate::grid::{
    forward_dft, forward_dft_pair, inverse_dft, inverse_dft_pair, spectral_derivative, two_thirds_filter, GridSpec,
    RealField, SpectralField,
};
use crate::problem::{initial_state, KgeProblem, SolverState};
use crate::weights::{build_weight_table, EwiOrder, WeightTable};

/// Highest time derivative of `u` the chain rule is plumbed for.
pub const MAX_TIME_DERIVATIVE: usize = 4;

/// Two consecutive levels of the three-level recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct StepPair {
    pub prev: SolverState,
    pub curr: SolverState,
}

/// Grid values of `d^k u / dt^k` for `k = 0..=k_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBundle {
    fields: Vec<RealField>,
}

impl DerivativeBundle {
    pub fn k_max(&self) -> usize {
        self.fields.len() - 1
    }

    pub fn get(&self, k: usize) -> Option<&RealField> {
        self.fields.get(k)
    }

    pub fn fields(&self) -> &[RealField] {
        &self.fields
    }
}

/// Coefficients of `d^m/ds^m f(u(., t_n + s))` at `s = 0`, `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct NonlinearityDerivatives {
    pub terms: Vec<SpectralField>,
}

/// Time derivatives of `u` from `d_t^m u = eps^-2 d_t^{m-2} (u_xx - u/eps^2 - f(u))`.
pub fn time_derivatives_of_u(
    problem: &KgeProblem,
    grid: &GridSpec,
    state: &SolverState,
    k_max: usize,
) -> Result<DerivativeBundle> {
    if k_max > MAX_TIME_DERIVATIVE {
        return Err(KgeError::InvalidParameter(format!(
            "time derivative order {k_max} exceeds {MAX_TIME_DERIVATIVE}"
        )));
    }
    let inv_eps2 = 1.0 / (problem.epsilon() * problem.epsilon());
    let f = problem.nonlinearity();

    let u0 = inverse_dft(grid, &state.u)?;
    let mut fields = vec![u0];
    if k_max >= 1 {
        fields.push(inverse_dft(grid, &state.udot)?);
    }
    if k_max >= 2 {
        let uxx = inverse_dft(grid, &spectral_derivative(grid, &state.u, 2)?)?;
        let u = fields[0].values();
        let u2 = uxx
            .values()
            .iter()
            .zip(u)
            .map(|(&uxx, &u)| inv_eps2 * (uxx - u * inv_eps2 - f.derivative(u, 0)))
            .collect::<Vec<_>>();
        fields.push(RealField::new(u2));
    }
    if k_max >= 3 {
        let udxx = inverse_dft(grid, &spectral_derivative(grid, &state.udot, 2)?)?;
        let (u, u1) = (fields[0].values(), fields[1].values());
        let u3 = (0..grid.m())
            .map(|j| inv_eps2 * (udxx.values()[j] - u1[j] * inv_eps2 - f.derivative(u[j], 1) * u1[j]))
            .collect::<Vec<_>>();
        fields.push(RealField::new(u3));
    }
    if k_max >= 4 {
        let u2_hat = forward_dft(grid, &fields[2])?;
        let u2xx = inverse_dft(grid, &spectral_derivative(grid, &u2_hat, 2)?)?;
        let (u, u1, u2) = (fields[0].values(), fields[1].values(), fields[2].values());
        let u4 = (0..grid.m())
            .map(|j| {
                let nl = f.derivative(u[j], 2) * u1[j] * u1[j] + f.derivative(u[j], 1) * u2[j];
                inv_eps2 * (u2xx.values()[j] - u2[j] * inv_eps2 - nl)
            })
            .collect::<Vec<_>>();
        fields.push(RealField::new(u4));
    }
    Ok(DerivativeBundle { fields })
}

/// Grid values of `d^m/ds^m f(u)` by the chain rule (Faa di Bruno through fourth order).
fn chain_rule_term(problem: &KgeProblem, bundle: &DerivativeBundle, m: usize) -> RealField {
    let f = problem.nonlinearity();
    let d = |k: usize| bundle.fields[k].values();
    let u = d(0);
    let values: Vec<f64> = match m {
        0 => u.iter().map(|&u| f.derivative(u, 0)).collect(),
        1 => (0..u.len()).map(|j| f.derivative(u[j], 1) * d(1)[j]).collect(),
        2 => (0..u.len())
            .map(|j| {
                let u1 = d(1)[j];
                f.derivative(u[j], 2) * u1 * u1 + f.derivative(u[j], 1) * d(2)[j]
            })
            .collect(),
        3 => (0..u.len())
            .map(|j| {
                let (u1, u2, u3) = (d(1)[j], d(2)[j], d(3)[j]);
                f.derivative(u[j], 3) * u1 * u1 * u1
                    + 3.0 * f.derivative(u[j], 2) * u1 * u2
                    + f.derivative(u[j], 1) * u3
            })
            .collect(),
        4 => (0..u.len())
            .map(|j| {
                let (u1, u2, u3, u4) = (d(1)[j], d(2)[j], d(3)[j], d(4)[j]);
                let (f1, f2, f3, f4) = (
                    f.derivative(u[j], 1),
                    f.derivative(u[j], 2),
                    f.derivative(u[j], 3),
                    f.derivative(u[j], 4),
                );
                f4 * u1 * u1 * u1 * u1 + 6.0 * f3 * u1 * u1 * u2 + 3.0 * f2 * u2 * u2 + 4.0 * f2 * u1 * u3 + f1 * u4
            })
            .collect(),
        _ => unreachable!("checked by callers"),
    };
    RealField::new(values)
}

fn selected_terms(
    problem: &KgeProblem,
    grid: &GridSpec,
    bundle: &DerivativeBundle,
    which: impl IntoIterator<Item = usize>,
    dealias: bool,
) -> Result<Vec<SpectralField>> {
    which
        .into_iter()
        .map(|m| {
            if m > bundle.k_max() {
                return Err(KgeError::BundleTooShallow {
                    requested: m,
                    available: bundle.k_max(),
                });
            }
            let mut c = forward_dft(grid, &chain_rule_term(problem, bundle, m))?;
            if dealias {
                two_thirds_filter(grid, &mut c);
            }
            Ok(c)
        })
        .collect()
}

/// Fourier coefficients of `d^m f(u)/ds^m`, `m = 0..=m_max`.
pub fn nonlinearity_time_derivatives(
    problem: &KgeProblem,
    grid: &GridSpec,
    bundle: &DerivativeBundle,
    m_max: usize,
) -> Result<NonlinearityDerivatives> {
    Ok(NonlinearityDerivatives {
        terms: selected_terms(problem, grid, bundle, 0..=m_max, false)?,
    })
}

/// Taylor terms `F_m` for `m` in `0..=top` (or only the even ones), computed in one pass
/// per grid point with real fields transformed two at a time.
fn fused_terms(
    problem: &KgeProblem,
    grid: &GridSpec,
    state: &SolverState,
    top: usize,
    with_odd: bool,
    dealias: bool,
) -> Result<Vec<SpectralField>> {
    let inv_eps2 = 1.0 / (problem.epsilon() * problem.epsilon());
    let f = problem.nonlinearity();
    let m = grid.m();
    let mut grid_terms: Vec<(usize, RealField)> = Vec::new();
    let mut done: Vec<(usize, SpectralField)> = Vec::new();

    match top {
        0 => {
            let u = inverse_dft(grid, &state.u)?;
            grid_terms.push((0, RealField::new(f.values(u.values()))));
        }
        2 | 4 => {
            let (u, uxx) = inverse_dft_pair(grid, &state.u, &spectral_derivative(grid, &state.u, 2)?)?;
            let (u1, u1xx) = if top == 4 {
                let (a, b) = inverse_dft_pair(grid, &state.udot, &spectral_derivative(grid, &state.udot, 2)?)?;
                (a, Some(b))
            } else {
                (inverse_dft(grid, &state.udot)?, None)
            };
            let (u, uxx, u1) = (u.values(), uxx.values(), u1.values());
            let fd = f.derivative_table(u);
            let u2: Vec<f64> = (0..m)
                .map(|j| inv_eps2 * (uxx[j] - u[j] * inv_eps2 - fd[j][0]))
                .collect();
            let d0 = RealField::new(fd.iter().map(|d| d[0]).collect());
            let d1 = || RealField::new((0..m).map(|j| fd[j][1] * u1[j]).collect());
            let d2 = RealField::new((0..m).map(|j| fd[j][2] * u1[j] * u1[j] + fd[j][1] * u2[j]).collect());
            if let Some(u1xx) = u1xx {
                let u1xx = u1xx.values();
                let u3: Vec<f64> = (0..m)
                    .map(|j| inv_eps2 * (u1xx[j] - u1[j] * inv_eps2 - fd[j][1] * u1[j]))
                    .collect();
                let (u2_hat, f0) = forward_dft_pair(grid, &RealField::new(u2.clone()), &d0)?;
                done.push((0, f0));
                let u2xx = inverse_dft(grid, &spectral_derivative(grid, &u2_hat, 2)?)?;
                let u2xx = u2xx.values();
                let mut u4 = Vec::with_capacity(m);
                let mut d4 = Vec::with_capacity(m);
                for j in 0..m {
                    let [_, f1, f2, f3, f4] = fd[j];
                    let (a, b, c) = (u1[j], u2[j], u3[j]);
                    let w = inv_eps2 * (u2xx[j] - b * inv_eps2 - f2 * a * a - f1 * b);
                    u4.push(w);
                    d4.push(f4 * a * a * a * a + 6.0 * f3 * a * a * b + 3.0 * f2 * b * b + 4.0 * f2 * a * c + f1 * w);
                }
                if with_odd {
                    grid_terms.push((1, d1()));
                    let d3 = (0..m)
                        .map(|j| {
                            let (a, b) = (u1[j], u2[j]);
                            fd[j][3] * a * a * a + 3.0 * fd[j][2] * a * b + fd[j][1] * u3[j]
                        })
                        .collect();
                    grid_terms.push((3, RealField::new(d3)));
                }
                grid_terms.push((2, d2));
                grid_terms.push((4, RealField::new(d4)));
            } else {
                grid_terms.push((0, d0));
                if with_odd {
                    grid_terms.push((1, d1()));
                }
                grid_terms.push((2, d2));
            }
        }
        _ => {
            return Err(KgeError::BundleTooShallow {
                requested: top,
                available: MAX_TIME_DERIVATIVE,
            })
        }
    }

    let mut rest = grid_terms.into_iter();
    while let Some((ma, a)) = rest.next() {
        match rest.next() {
            Some((mb, b)) => {
                let (ca, cb) = forward_dft_pair(grid, &a, &b)?;
                done.push((ma, ca));
                done.push((mb, cb));
            }
            None => done.push((ma, forward_dft(grid, &a)?)),
        }
    }
    done.sort_by_key(|(m, _)| *m);
    Ok(done
        .into_iter()
        .map(|(_, mut c)| {
            if dealias {
                two_thirds_filter(grid, &mut c);
            }
            c
        })
        .collect())
}

// Both steps are evaluated in increment form, `u^{n+1} = u^n + d^{n+1}` with
// `d^{n+1} = d^n - 2 (1 - cos) u^n - sum A F`, which is algebraically the three-level
// recurrence but keeps the O((omega tau)^2) update from drowning in rounding when
// `omega tau` is tiny (reference runs take 10^5 steps or more).
fn first_step_impl(
    problem: &KgeProblem,
    grid: &GridSpec,
    weights: &WeightTable,
    s0: &SolverState,
    dealias: bool,
) -> Result<(SolverState, Vec<Complex64>)> {
    check_table(grid, weights)?;
    let top = live_top(weights.first_rows(), 1);
    let terms = fused_terms(problem, grid, s0, top, true, dealias)?;

    let (cos, omc, sin, omega) = (weights.cos(), weights.one_minus_cos(), weights.sin(), weights.omega());
    let mut incr = Vec::with_capacity(grid.m());
    let mut udot = Vec::with_capacity(grid.m());
    for k in 0..grid.m() {
        let (u0, v0) = (s0.u.coeffs()[k], s0.udot.coeffs()[k]);
        incr.push(-omc[k] * u0 + (sin[k] / omega[k]) * v0);
        udot.push(-omega[k] * sin[k] * u0 + cos[k] * v0);
    }
    for ((b, bdot), term) in weights.first_rows().zip(&terms) {
        axpy_neg(&mut incr, b, term.coeffs());
        axpy_neg(&mut udot, bdot, term.coeffs());
    }
    let u = s0.u.coeffs().iter().zip(&incr).map(|(u, d)| u + d).collect();
    let state = SolverState {
        u: SpectralField::new(u),
        udot: SpectralField::new(udot),
        t: s0.t + weights.tau(),
    };
    Ok((state, incr))
}

fn main_step_impl(
    problem: &KgeProblem,
    grid: &GridSpec,
    weights: &WeightTable,
    curr: &SolverState,
    incr: &[Complex64],
    prev_udot: &[Complex64],
    dealias: bool,
) -> Result<(SolverState, Vec<Complex64>)> {
    check_table(grid, weights)?;
    let top = live_top(weights.main_rows(), 2);
    let terms = fused_terms(problem, grid, curr, top, false, dealias)?;

    let (omc, sin, omega) = (weights.one_minus_cos(), weights.sin(), weights.omega());
    let un = curr.u.coeffs();
    let mut next_incr = Vec::with_capacity(grid.m());
    let mut udot = Vec::with_capacity(grid.m());
    for k in 0..grid.m() {
        next_incr.push(incr[k] - 2.0 * omc[k] * un[k]);
        // the sine term acts on the position mode u^n, as in the variation-of-constants derivation
        udot.push(prev_udot[k] - 2.0 * omega[k] * sin[k] * un[k]);
    }
    for ((a, adot), term) in weights.main_rows().zip(&terms) {
        axpy_neg(&mut next_incr, a, term.coeffs());
        axpy_neg(&mut udot, adot, term.coeffs());
    }
    let u = un.iter().zip(&next_incr).map(|(u, d)| u + d).collect();
    let state = SolverState {
        u: SpectralField::new(u),
        udot: SpectralField::new(udot),
        t: curr.t + weights.tau(),
    };
    Ok((state, next_incr))
}

/// Highest Taylor term (0, 2 or 4) whose weights are not all zero; `spacing` is the order
/// step between consecutive rows. Dropping dead trailing terms makes a table with its top
/// weights zeroed run the same arithmetic as the lower order.
fn live_top<'a>(rows: impl Iterator<Item = (&'a [f64], &'a [f64])>, spacing: usize) -> usize {
    let last = rows
        .enumerate()
        .filter(|(_, (w, wdot))| w.iter().chain(wdot.iter()).any(|&x| x != 0.0))
        .map(|(i, _)| i * spacing)
        .last()
        .unwrap_or(0);
    last.div_ceil(2) * 2
}

fn check_pair(weights: &WeightTable, pair: &StepPair) -> Result<()> {
    let tau = weights.tau();
    let gap = pair.curr.t - pair.prev.t;
    if (gap - tau).abs() > 1e-9 * tau.abs() + 1e-14 * pair.curr.t.abs() {
        return Err(KgeError::InvalidParameter(format!(
            "step pair spacing {gap} does not match tau = {tau}"
        )));
    }
    Ok(())
}

fn pair_increment(pair: &StepPair) -> Vec<Complex64> {
    pair.curr
        .u
        .coeffs()
        .iter()
        .zip(pair.prev.u.coeffs())
        .map(|(a, b)| a - b)
        .collect()
}

fn axpy_neg(y: &mut [Complex64], w: &[f64], x: &[Complex64]) {
    for ((y, &w), &x) in y.iter_mut().zip(w).zip(x) {
        *y -= w * x;
    }
}

fn check_table(grid: &GridSpec, weights: &WeightTable) -> Result<()> {
    if weights.modes() != grid.m() {
        return Err(KgeError::LengthMismatch {
            expected: grid.m(),
            found: weights.modes(),
        });
    }
    Ok(())
}

/// One-sided start `u^0 -> u^1` using Taylor terms `m <= 2N - 2` at `t = 0`.
pub fn first_step(
    problem: &KgeProblem,
    grid: &GridSpec,
    weights: &WeightTable,
    s0: &SolverState,
) -> Result<SolverState> {
    first_step_impl(problem, grid, weights, s0, false).map(|(s, _)| s)
}

/// Symmetric three-level step `(u^{n-1}, u^n) -> u^{n+1}`.
pub fn main_step(problem: &KgeProblem, grid: &GridSpec, weights: &WeightTable, pair: &StepPair) -> Result<SolverState> {
    check_pair(weights, pair)?;
    let incr = pair_increment(pair);
    main_step_impl(
        problem,
        grid,
        weights,
        &pair.curr,
        &incr,
        pair.prev.udot.coeffs(),
        false,
    )
    .map(|(s, _)| s)
}

/// Number of steps `T / tau`; must be a positive integer to within `1e-9` relative.
pub fn step_count(t_final: f64, tau: f64) -> Result<usize> {
    if !(t_final > 0.0) || !t_final.is_finite() {
        return Err(KgeError::InvalidParameter(format!(
            "final time {t_final} must be positive"
        )));
    }
    if !(tau > 0.0) || !tau.is_finite() {
        return Err(KgeError::InvalidParameter(format!("tau = {tau} must be positive")));
    }
    let ratio = t_final / tau;
    let n = ratio.round();
    if n < 1.0 || (ratio - n).abs() > 1e-9 * n.max(1.0) {
        return Err(KgeError::NonIntegerStepCount { t_final, tau });
    }
    Ok(n as usize)
}

/// Warns when `tau` exceeds `min(eps^2, h eps)`, the sufficient condition of the error analysis.
/// Larger steps usually still run stably, so this is advisory only.
pub fn stability_warning(epsilon: f64, h: f64, tau: f64) -> Option<String> {
    let limit = (epsilon * epsilon).min(h * epsilon);
    (tau > limit).then(|| format!("tau = {tau:e} exceeds min(eps^2, h*eps) = {limit:e}; convergence is not guaranteed"))
}

/// Configured EWI time stepper for one problem, grid, step and order.
#[derive(Debug, Clone)]
pub struct EwiIntegrator {
    problem: KgeProblem,
    grid: GridSpec,
    weights: WeightTable,
    dealias: bool,
}

impl EwiIntegrator {
    pub fn new(problem: &KgeProblem, grid: &GridSpec, tau: f64, order: EwiOrder) -> Result<Self> {
        let weights = build_weight_table(grid, problem.epsilon(), tau, order)?;
        Ok(Self::with_weights(problem, grid, weights))
    }

    pub fn with_weights(problem: &KgeProblem, grid: &GridSpec, weights: WeightTable) -> Self {
        Self {
            problem: problem.clone(),
            grid: grid.clone(),
            weights,
            dealias: false,
        }
    }

    /// Applies the two-thirds rule to every nonlinear term. Off by default.
    pub fn with_dealiasing(mut self, dealias: bool) -> Self {
        self.dealias = dealias;
        self
    }

    pub fn weights(&self) -> &WeightTable {
        &self.weights
    }

    pub fn first_step(&self, s0: &SolverState) -> Result<SolverState> {
        first_step_impl(&self.problem, &self.grid, &self.weights, s0, self.dealias).map(|(s, _)| s)
    }

    pub fn main_step(&self, pair: &StepPair) -> Result<SolverState> {
        check_pair(&self.weights, pair)?;
        let incr = pair_increment(pair);
        let (p, g, w) = (&self.problem, &self.grid, &self.weights);
        main_step_impl(p, g, w, &pair.curr, &incr, pair.prev.udot.coeffs(), self.dealias).map(|(s, _)| s)
    }

    /// Advances `steps` steps from `s0` and returns the last two levels.
    /// `observer` sees the initial state and every new level.
    pub fn run(&self, s0: SolverState, steps: usize, mut observer: impl FnMut(&SolverState)) -> Result<StepPair> {
        let tau = self.weights.tau();
        let t0 = s0.t;
        let (p, g, w) = (&self.problem, &self.grid, &self.weights);
        observer(&s0);
        let (mut next, mut incr) = first_step_impl(p, g, w, &s0, self.dealias)?;
        next.t = t0 + tau;
        check_finite(&next, 1)?;
        observer(&next);
        let mut pair = StepPair { prev: s0, curr: next };
        for n in 1..steps {
            let (mut next, next_incr) =
                main_step_impl(p, g, w, &pair.curr, &incr, pair.prev.udot.coeffs(), self.dealias)?;
            next.t = t0 + (n + 1) as f64 * tau;
            check_finite(&next, n + 1)?;
            observer(&next);
            incr = next_incr;
            pair.prev = std::mem::replace(&mut pair.curr, next);
        }
        Ok(pair)
    }
}

fn check_finite(state: &SolverState, step: usize) -> Result<()> {
    if state.is_finite() {
        Ok(())
    } else {
        Err(KgeError::Instability { step, t: state.t })
    }
}

/// Integrates from the problem's initial data to `t_final`; `observer` sees every level.
pub fn integrate(
    problem: &KgeProblem,
    grid: &GridSpec,
    tau: f64,
    t_final: f64,
    order: EwiOrder,
    observer: Option<&mut dyn FnMut(&SolverState)>,
) -> Result<SolverState> {
    let steps = step_count(t_final, tau)?;
    if let Some(msg) = stability_warning(problem.epsilon(), grid.h(), tau) {
        warn!("{msg}");
    }
    let integrator = EwiIntegrator::new(problem, grid, tau, order)?;
    let s0 = initial_state(problem, grid);
    let pair = match observer {
        Some(obs) => integrator.run(s0, steps, obs)?,
        None => integrator.run(s0, steps, |_| {})?,
    };
    Ok(pair.curr)
}
