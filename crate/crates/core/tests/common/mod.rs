//! Independent oracles shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

use std::path::PathBuf;

use kge_core::{h1_norm, GridSpec, SolverState};

// Gauss-Kronrod 7/15 abscissae and weights on [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

fn kronrod(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for i in 0..7 {
        let pair = f(c - r * XGK[i]) + f(c + r * XGK[i]);
        k += WGK[i] * pair;
        if i % 2 == 1 {
            g += WG[i / 2] * pair;
        }
    }
    (k * r, ((k - g) * r).abs())
}

/// Adaptive Gauss-Kronrod quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
/// The Gauss-Kronrod difference overestimates the Kronrod error by orders of magnitude, so
/// a panel also stops once that difference reaches the rounding floor of its own value.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn go(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
        let (value, err) = kronrod(f, a, b);
        if err <= tol || err <= 1e-14 * value.abs() || depth == 0 {
            return value;
        }
        let c = 0.5 * (a + b);
        go(f, a, c, 0.5 * tol, depth - 1) + go(f, c, b, 0.5 * tol, depth - 1)
    }
    go(&f, a, b, tol, 24)
}

/// Double-double number `hi + lo` with `|lo| <= ulp(hi) / 2`.
#[derive(Debug, Clone, Copy)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd {
        hi: s,
        lo: (a - (s - bb)) + (b - bb),
    }
}

fn quick_two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    Dd { hi: s, lo: b - (s - a) }
}

impl Dd {
    pub fn from(x: f64) -> Self {
        Dd { hi: x, lo: 0.0 }
    }

    pub fn product(a: f64, b: f64) -> Self {
        let p = a * b;
        Dd {
            hi: p,
            lo: a.mul_add(b, -p),
        }
    }

    pub fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.hi, o.hi);
        let t = two_sum(self.lo, o.lo);
        let u = quick_two_sum(s.hi, s.lo + t.hi);
        quick_two_sum(u.hi, u.lo + t.lo)
    }

    pub fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    pub fn sub(self, o: Dd) -> Dd {
        self.add(o.neg())
    }

    pub fn mul(self, o: Dd) -> Dd {
        let p = Dd::product(self.hi, o.hi);
        quick_two_sum(p.hi, p.lo + self.hi * o.lo + self.lo * o.hi)
    }

    pub fn scale(self, s: f64) -> Dd {
        self.mul(Dd::from(s))
    }

    pub fn div(self, o: Dd) -> Dd {
        let q1 = self.hi / o.hi;
        let r = self.sub(o.mul(Dd::from(q1)));
        let q2 = r.hi / o.hi;
        let r = r.sub(o.mul(Dd::from(q2)));
        let q3 = r.hi / o.hi;
        quick_two_sum(q1, q2).add(Dd::from(q3))
    }

    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Taylor series; accurate to about 1e-30 absolute for `|x| <= 20`.
    pub fn sin(self) -> Dd {
        let x2 = self.mul(self);
        let mut term = self;
        let mut sum = self;
        for k in 1..80 {
            let d = (2 * k) as f64 * (2 * k + 1) as f64;
            term = term.mul(x2).div(Dd::from(-d));
            sum = sum.add(term);
            if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        sum
    }

    pub fn cos(self) -> Dd {
        let x2 = self.mul(self);
        let mut term = Dd::from(1.0);
        let mut sum = term;
        for k in 1..80 {
            let d = (2 * k - 1) as f64 * (2 * k) as f64;
            term = term.mul(x2).div(Dd::from(-d));
            sum = sum.add(term);
            if term.hi.abs() < 1e-34 * sum.hi.abs().max(1e-300) {
                break;
            }
        }
        sum
    }
}

/// Shared reference cache for the slow integration tests.
pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("kge-reference")
}

/// `||a - b||_{H^1} / ||b||_{H^1}` on the position components.
pub fn h1_relative(grid: &GridSpec, a: &SolverState, b: &SolverState) -> f64 {
    h1_norm(grid, &a.u.sub(&b.u)) / h1_norm(grid, &b.u)
}

/// `int_0^1 s^m sin(x (1 - s)) ds` (or `cos`) by quadrature; `S_m = tau^{m+1}` times this at `x = omega tau`.
pub fn scaled_moment(x: f64, m: usize, cosine: bool) -> f64 {
    let mi = m as i32;
    if cosine {
        integrate(|s| s.powi(mi) * (x * (1.0 - s)).cos(), 0.0, 1.0, 1e-16)
    } else {
        integrate(|s| s.powi(mi) * (x * (1.0 - s)).sin(), 0.0, 1.0, 1e-16)
    }
}

/// Closed forms `[S_1, C_1, S_2, C_2]` evaluated in double-double arithmetic.
pub fn closed_forms(omega: f64, tau: f64) -> [f64; 4] {
    let x = Dd::product(omega, tau);
    let (s, c) = (x.sin(), x.cos());
    let w = Dd::from(omega);
    let w2 = w.mul(w);
    let w3 = w2.mul(w);
    let one = Dd::from(1.0);
    [
        x.sub(s).div(w2),
        one.sub(c).div(w2),
        x.mul(x).add(c.scale(2.0)).sub(Dd::from(2.0)).div(w3),
        x.scale(2.0).sub(s.scale(2.0)).div(w3),
    ]
    .map(Dd::to_f64)
}

/// Worst deviations of `moment_integrals` from the oracles: the largest absolute error of
/// `S_m / tau^{m+1}`, `C_m / tau^{m+1}` over `samples` random `(omega, tau)` with
/// `omega tau` in `[1e-8, 10]`, and the largest relative error of the closed forms over a
/// sweep of `omega tau >= 1e-2`.
pub fn weight_oracle_deviation(samples: usize, seed: u64) -> (f64, f64) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut worst_abs: f64 = 0.0;
    for _ in 0..samples {
        let x = 10f64.powf(rng.random_range(-8.0..1.0));
        let omega = 10f64.powf(rng.random_range(0.0..6.0));
        let tau = x / omega;
        let t = kge_core::moment_integrals(omega, tau, 6).unwrap();
        let x = omega * tau;
        for m in 0..=6 {
            let scale = tau.powi(m as i32 + 1);
            worst_abs = worst_abs.max((t.s[m] / scale - scaled_moment(x, m, false)).abs());
            worst_abs = worst_abs.max((t.c[m] / scale - scaled_moment(x, m, true)).abs());
        }
    }
    let mut worst_rel: f64 = 0.0;
    for &omega in &[1.0, 7.5, 400.0, 1.6e5] {
        for i in 0..=60 {
            let x = 1e-2 * 10f64.powf(i as f64 / 20.0);
            let tau = x / omega;
            let t = kge_core::moment_integrals(omega, tau, 2).unwrap();
            let got = [t.s[1], t.c[1], t.s[2], t.c[2]];
            for (g, e) in got.iter().zip(closed_forms(omega, tau)) {
                worst_rel = worst_rel.max(((g - e) / e).abs());
            }
        }
    }
    (worst_abs, worst_rel)
}

use kge_core::{
    build_grid, forward_dft, initial_state, inverse_dft, mode_frequencies, nonlinearity_time_derivatives,
    spectral_derivative, time_derivatives_of_u, ConstantNonlinearity, EwiIntegrator, EwiOrder, InitialData, KgeProblem,
    RealField, Rk4Integrator, SpectralField, StepPair,
};
use num_complex::Complex64;
use std::f64::consts::PI;
use std::sync::Arc;

fn max_abs(v: impl Iterator<Item = f64>) -> f64 {
    v.fold(0.0, f64::max)
}

/// Direct `O(M^2)` forward sum `c_l = (1/M) sum_j v_j exp(-i mu_l (x_j - a))`, FFT storage order.
pub fn direct_forward(grid: &GridSpec, v: &[Complex64]) -> Vec<Complex64> {
    let m = grid.m();
    (0..m)
        .map(|k| {
            let mu = grid.mu()[k];
            v.iter()
                .enumerate()
                .map(|(j, &vj)| vj * Complex64::from_polar(1.0, -mu * j as f64 * grid.h()))
                .sum::<Complex64>()
                / m as f64
        })
        .collect()
}

/// Direct evaluation of `sum_l c_l (i mu_l)^order exp(i mu_l (x_j - a))` on the nodes,
/// with the Nyquist term dropped for odd `order`.
pub fn direct_inverse(grid: &GridSpec, c: &[Complex64], order: u32) -> Vec<Complex64> {
    let m = grid.m();
    (0..m)
        .map(|j| {
            (0..m)
                .filter(|&k| order.is_multiple_of(2) || !grid.is_nyquist_index(k))
                .map(|k| {
                    let mu = grid.mu()[k];
                    c[k] * Complex64::new(0.0, mu).powu(order) * Complex64::from_polar(1.0, mu * j as f64 * grid.h())
                })
                .sum()
        })
        .collect()
}

fn relative(got: &[Complex64], want: &[Complex64]) -> f64 {
    let scale = max_abs(want.iter().map(|z| z.norm())).max(1e-300);
    max_abs(got.iter().zip(want).map(|(a, b)| (a - b).norm())) / scale
}

/// Worst relative deviation of forward, inverse, paired and derivative transforms from
/// direct summation over `M = 4..=64` with random real data.
pub fn transform_oracle_deviation(seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for m in [4usize, 8, 16, 32, 64] {
        let grid = build_grid(-1.5, 2.0, m).unwrap();
        for _ in 0..4 {
            let x: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let y: Vec<f64> = (0..m).map(|_| rng.random_range(-1.0..1.0)).collect();
            let xc: Vec<Complex64> = x.iter().map(|&v| v.into()).collect();
            let yc: Vec<Complex64> = y.iter().map(|&v| v.into()).collect();
            let (rx, ry) = (RealField::new(x.clone()), RealField::new(y.clone()));
            let want_x = direct_forward(&grid, &xc);
            let want_y = direct_forward(&grid, &yc);
            let cx = forward_dft(&grid, &rx).unwrap();
            worst = worst.max(relative(cx.coeffs(), &want_x));
            let (px, py) = kge_core::grid::forward_dft_pair(&grid, &rx, &ry).unwrap();
            worst = worst.max(relative(px.coeffs(), &want_x));
            worst = worst.max(relative(py.coeffs(), &want_y));

            // inverse of a conjugate-symmetric field: real part and imaginary residue
            let back = kge_core::grid::inverse_dft_complex(&grid, &cx).unwrap();
            worst = worst.max(relative(&back, &direct_inverse(&grid, &want_x, 0)));
            worst = worst.max(max_abs(back.iter().map(|z| z.im.abs())) / max_abs(x.iter().map(|v| v.abs())));
            let round: Vec<Complex64> = inverse_dft(&grid, &cx)
                .unwrap()
                .values()
                .iter()
                .map(|&v| v.into())
                .collect();
            worst = worst.max(relative(&round, &xc));
            let (ix, iy) = kge_core::grid::inverse_dft_pair(&grid, &px, &py).unwrap();
            let (ix, iy): (Vec<Complex64>, Vec<Complex64>) = (
                ix.values().iter().map(|&v| v.into()).collect(),
                iy.values().iter().map(|&v| v.into()).collect(),
            );
            worst = worst.max(relative(&ix, &xc)).max(relative(&iy, &yc));

            // arbitrary complex coefficients
            let c: Vec<Complex64> = (0..m)
                .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let got = kge_core::grid::inverse_dft_complex(&grid, &SpectralField::new(c.clone())).unwrap();
            worst = worst.max(relative(&got, &direct_inverse(&grid, &c, 0)));

            for order in [1u32, 2] {
                let d = spectral_derivative(&grid, &cx, order).unwrap();
                let got: Vec<Complex64> = inverse_dft(&grid, &d)
                    .unwrap()
                    .values()
                    .iter()
                    .map(|&v| v.into())
                    .collect();
                worst = worst.max(relative(&got, &direct_inverse(&grid, &want_x, order)));
            }
        }
    }
    worst
}

fn stencil(samples: &[Vec<f64>], delta: f64, k: usize) -> Vec<f64> {
    // fourth-order central differences on offsets -3..=3 (samples[3] is the centre)
    let w: &[f64] = match k {
        1 => &[0.0, 1.0, -8.0, 0.0, 8.0, -1.0, 0.0],
        2 => &[0.0, -1.0, 16.0, -30.0, 16.0, -1.0, 0.0],
        3 => &[1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0],
        4 => &[-1.0, 12.0, -39.0, 56.0, -39.0, 12.0, -1.0],
        _ => unreachable!(),
    };
    let denom = [12.0, 12.0, 8.0, 6.0][k - 1] * delta.powi(k as i32);
    (0..samples[0].len())
        .map(|j| w.iter().zip(samples).map(|(c, s)| c * s[j]).sum::<f64>() / denom)
        .collect()
}

fn rel_dev(got: &[f64], want: &[f64]) -> f64 {
    let scale = max_abs(want.iter().map(|v| v.abs()));
    max_abs(got.iter().zip(want).map(|(a, b)| (a - b).abs())) / scale
}

/// Worst relative deviation of the time-derivative bundle `d_t^k u` (k = 2..4) and of the
/// nonlinearity terms `d^m f(u)` (m = 1..4) at `t = 0` from fourth-order central
/// differences along an RK4 trajectory through `t = 0` (benchmark data, `eps = 0.5`).
pub fn bundle_fd_deviation() -> (f64, f64) {
    let problem = KgeProblem::gaussian_benchmark(0.5, 1.0).unwrap();
    let grid = build_grid(-32.0, 32.0, 128).unwrap();
    let delta = 2e-3;
    let s0 = initial_state(&problem, &grid);
    let forward = Rk4Integrator::new(&problem, &grid, delta).unwrap();
    let backward = Rk4Integrator::new(&problem, &grid, -delta).unwrap();
    let mut levels = vec![s0.clone()];
    let mut s = s0.clone();
    for _ in 0..3 {
        s = backward.step(&s).unwrap();
        levels.insert(0, s.clone());
    }
    let mut s = s0.clone();
    for _ in 0..3 {
        s = forward.step(&s).unwrap();
        levels.push(s.clone());
    }
    let u_samples: Vec<Vec<f64>> = levels
        .iter()
        .map(|s| inverse_dft(&grid, &s.u).unwrap().into_inner())
        .collect();
    let f = problem.nonlinearity();
    let f_samples: Vec<Vec<f64>> = u_samples
        .iter()
        .map(|u| u.iter().map(|&v| f.derivative(v, 0)).collect())
        .collect();

    let bundle = time_derivatives_of_u(&problem, &grid, &s0, 4).unwrap();
    let terms = nonlinearity_time_derivatives(&problem, &grid, &bundle, 4)
        .unwrap()
        .terms;
    let mut worst_u: f64 = 0.0;
    let mut worst_f: f64 = 0.0;
    for k in 2..=4 {
        worst_u = worst_u.max(rel_dev(&stencil(&u_samples, delta, k), bundle.get(k).unwrap().values()));
    }
    for m in 1..=4 {
        let want = inverse_dft(&grid, &terms[m]).unwrap();
        worst_f = worst_f.max(rel_dev(&stencil(&f_samples, delta, m), want.values()));
    }
    (worst_u, worst_f)
}

/// Exact solution of `eps^2 u_tt - u_xx + u/eps^2 + K = 0` per mode at time `t`.
pub fn forced_linear_solution(problem: &KgeProblem, grid: &GridSpec, k_value: f64, t: f64) -> SolverState {
    let s0 = initial_state(problem, grid);
    let eps2 = problem.epsilon().powi(2);
    let omega = mode_frequencies(grid, problem.epsilon()).omega;
    let mut u = Vec::with_capacity(grid.m());
    let mut v = Vec::with_capacity(grid.m());
    for k in 0..grid.m() {
        let w = omega[k];
        // the constant forcing lives in the zero mode only
        let p = if k == 0 { k_value / (eps2 * w * w) } else { 0.0 };
        let (u0, v0) = (s0.u.coeffs()[k], s0.udot.coeffs()[k]);
        let (c, s) = ((w * t).cos(), (w * t).sin());
        u.push((u0 + p) * c + v0 * (s / w) - p);
        v.push(-(u0 + p) * (w * s) + v0 * c);
    }
    SolverState {
        u: SpectralField::new(u),
        udot: SpectralField::new(v),
        t,
    }
}

/// H^1 error after 100 steps of the EWI at `order` for `f = K` against the closed-form forced solution.
pub fn constant_f_error(epsilon: f64, order: EwiOrder) -> f64 {
    let k_value = 0.7;
    let problem = KgeProblem::new(
        epsilon,
        Arc::new(ConstantNonlinearity { value: k_value }),
        InitialData::gaussian(2.0),
        InitialData::gaussian(3.0),
    )
    .unwrap();
    let grid = build_grid(-32.0, 32.0, 128).unwrap();
    let omega_max = max_abs(mode_frequencies(&grid, epsilon).omega.into_iter());
    // omega tau <= pi/2 on every mode
    let tau = (0.5 * PI / omega_max).min(1e-2);
    let steps = 100;
    let pair = EwiIntegrator::new(&problem, &grid, tau, order)
        .unwrap()
        .run(initial_state(&problem, &grid), steps, |_| {})
        .unwrap();
    let exact = forced_linear_solution(&problem, &grid, k_value, steps as f64 * tau);
    h1_norm(&grid, &pair.curr.u.sub(&exact.u))
}

/// Relative H^1 errors `(u, u_t)` after 50 forward steps and 50 steps of the reversed
/// recurrence (benchmark, `eps = 0.5`, `tau = 1e-2`, `h = 1/16`).
pub fn round_trip_error(order: EwiOrder) -> (f64, f64) {
    let problem = KgeProblem::gaussian_benchmark(0.5, 1.0).unwrap();
    let grid = build_grid(-32.0, 32.0, 1024).unwrap();
    let (tau, steps) = (1e-2, 50);
    let s0 = initial_state(&problem, &grid);
    let fwd = EwiIntegrator::new(&problem, &grid, tau, order)
        .unwrap()
        .run(s0.clone(), steps, |_| {})
        .unwrap();
    let back = EwiIntegrator::new(&problem, &grid, -tau, order).unwrap();
    let mut pair = StepPair {
        prev: fwd.curr,
        curr: fwd.prev,
    };
    for _ in 1..steps {
        let next = back.main_step(&pair).unwrap();
        pair.prev = std::mem::replace(&mut pair.curr, next);
    }
    let end = pair.curr;
    (
        h1_norm(&grid, &end.u.sub(&s0.u)) / h1_norm(&grid, &s0.u),
        h1_norm(&grid, &end.udot.sub(&s0.udot)) / h1_norm(&grid, &s0.udot),
    )
}
