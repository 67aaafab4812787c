//! Problem data: `eps^2 u_tt - u_xx + u / eps^2 + f(u) = 0` on a periodic interval,
//! with `u(x, 0) = phi1(x)` and `u_t(x, 0) = phi2(x) / eps^2`.

use std::fmt;
use std::sync::Arc;

use crate::error::{KgeError, Result};
use crate::grid::{forward_dft, inverse_dft, spectral_derivative, GridSpec, RealField, SpectralField};

/// Highest derivative of `f` the integrators request (sixth order needs `f''''`).
pub const MAX_NONLINEARITY_DERIVATIVE: usize = 4;

/// A pointwise nonlinearity with its derivatives up to fourth order.
pub trait Nonlinearity: Send + Sync + fmt::Debug {
    /// `f^(k)(u)` for `k <= 4`.
    fn derivative(&self, u: f64, k: usize) -> f64;

    /// `F(u) = 2 * int_0^u f(r) dr`, the potential term of the energy.
    fn antiderivative(&self, u: f64) -> f64;

    /// Stable textual identity, used to key cached reference solutions.
    fn describe(&self) -> String;

    fn value(&self, u: f64) -> f64 {
        self.derivative(u, 0)
    }

    /// `[f, f', f'', f''', f'''']` at `u`.
    fn derivatives(&self, u: f64) -> [f64; 5] {
        std::array::from_fn(|k| self.derivative(u, k))
    }

    /// [`Nonlinearity::derivatives`] at every entry of `u`.
    fn derivative_table(&self, u: &[f64]) -> Vec<[f64; 5]> {
        u.iter().map(|&x| self.derivatives(x)).collect()
    }

    /// `f` at every entry of `u`.
    fn values(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| self.value(x)).collect()
    }
}

/// `f(u) = lambda u^3`. `lambda = 0` gives the linear Klein-Gordon equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CubicNonlinearity {
    pub lambda: f64,
}

impl CubicNonlinearity {
    pub fn new(lambda: f64) -> Self {
        Self { lambda }
    }
}

impl Nonlinearity for CubicNonlinearity {
    fn derivative(&self, u: f64, k: usize) -> f64 {
        let l = self.lambda;
        match k {
            0 => l * u * u * u,
            1 => 3.0 * l * u * u,
            2 => 6.0 * l * u,
            3 => 6.0 * l,
            _ => 0.0,
        }
    }

    fn derivatives(&self, u: f64) -> [f64; 5] {
        let l = self.lambda;
        [l * u * u * u, 3.0 * l * u * u, 6.0 * l * u, 6.0 * l, 0.0]
    }

    fn derivative_table(&self, u: &[f64]) -> Vec<[f64; 5]> {
        u.iter().map(|&x| self.derivatives(x)).collect()
    }

    fn values(&self, u: &[f64]) -> Vec<f64> {
        u.iter().map(|&x| self.lambda * x * x * x).collect()
    }

    fn antiderivative(&self, u: f64) -> f64 {
        0.5 * self.lambda * u.powi(4)
    }

    fn describe(&self) -> String {
        format!("cubic(lambda={:e})", self.lambda)
    }
}

/// `f(u) = K`. The EWI family is exact for this case.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantNonlinearity {
    pub value: f64,
}

impl Nonlinearity for ConstantNonlinearity {
    fn derivative(&self, _u: f64, k: usize) -> f64 {
        if k == 0 {
            self.value
        } else {
            0.0
        }
    }

    fn antiderivative(&self, u: f64) -> f64 {
        2.0 * self.value * u
    }

    fn describe(&self) -> String {
        format!("constant(K={:e})", self.value)
    }
}

pub type PointwiseFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Initial profile presets. Profiles are independent of `epsilon`.
#[derive(Clone)]
pub enum InitialData {
    Zero,
    /// `amplitude * exp(-((x - center) / width)^2)`
    Gaussian {
        amplitude: f64,
        width: f64,
        center: f64,
    },
    /// `amplitude * cos(wavenumber * x + phase)`
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        phase: f64,
    },
    /// User-supplied profile; `label` identifies it in cache keys.
    Custom {
        label: String,
        f: PointwiseFn,
    },
}

impl fmt::Debug for InitialData {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl InitialData {
    pub fn gaussian(amplitude: f64) -> Self {
        Self::Gaussian {
            amplitude,
            width: 1.0,
            center: 0.0,
        }
    }

    pub fn custom(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self::Custom {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Zero => 0.0,
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => {
                let s = (x - center) / width;
                amplitude * (-s * s).exp()
            }
            Self::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => amplitude * (wavenumber * x + phase).cos(),
            Self::Custom { f, .. } => f(x),
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Self::Zero => "zero".to_string(),
            Self::Gaussian {
                amplitude,
                width,
                center,
            } => format!("gaussian(amplitude={amplitude:e},width={width:e},center={center:e})"),
            Self::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => format!("cosine(amplitude={amplitude:e},wavenumber={wavenumber:e},phase={phase:e})"),
            Self::Custom { label, .. } => format!("custom({label})"),
        }
    }
}

/// Immutable problem description; cheap to clone and share between workers.
#[derive(Debug, Clone)]
pub struct KgeProblem {
    epsilon: f64,
    nonlinearity: Arc<dyn Nonlinearity>,
    phi1: InitialData,
    phi2: InitialData,
}

impl KgeProblem {
    pub fn new(
        epsilon: f64,
        nonlinearity: Arc<dyn Nonlinearity>,
        phi1: InitialData,
        phi2: InitialData,
    ) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon <= 1.0) {
            return Err(KgeError::InvalidParameter(format!(
                "epsilon = {epsilon} must lie in (0, 1]"
            )));
        }
        Ok(Self {
            epsilon,
            nonlinearity,
            phi1,
            phi2,
        })
    }

    /// The benchmark problem: `f = lambda u^3`, `phi1 = 2 exp(-x^2)`, `phi2 = 3 exp(-x^2)`.
    pub fn gaussian_benchmark(epsilon: f64, lambda: f64) -> Result<Self> {
        Self::new(
            epsilon,
            Arc::new(CubicNonlinearity::new(lambda)),
            InitialData::gaussian(2.0),
            InitialData::gaussian(3.0),
        )
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn nonlinearity(&self) -> &dyn Nonlinearity {
        self.nonlinearity.as_ref()
    }

    pub fn phi1(&self) -> &InitialData {
        &self.phi1
    }

    pub fn phi2(&self) -> &InitialData {
        &self.phi2
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(epsilon, self.nonlinearity.clone(), self.phi1.clone(), self.phi2.clone())
    }

    pub fn describe(&self) -> String {
        format!(
            "epsilon={:e};f={};phi1={};phi2={}",
            self.epsilon,
            self.nonlinearity.describe(),
            self.phi1.describe(),
            self.phi2.describe()
        )
    }
}

/// `(u, u_t)` at one time level, as Fourier coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverState {
    pub u: SpectralField,
    pub udot: SpectralField,
    pub t: f64,
}

impl SolverState {
    pub fn is_finite(&self) -> bool {
        self.u
            .coeffs()
            .iter()
            .chain(self.udot.coeffs())
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// `u^0 = phi1(x_j)`, `u_t^0 = phi2(x_j) / eps^2`, transformed to coefficients.
pub fn initial_state(problem: &KgeProblem, grid: &GridSpec) -> SolverState {
    let eps2 = problem.epsilon * problem.epsilon;
    let u = grid.sample(|x| problem.phi1.eval(x));
    let udot = grid.sample(|x| problem.phi2.eval(x) / eps2);
    SolverState {
        u: forward_dft(grid, &u).expect("sampled on grid"),
        udot: forward_dft(grid, &udot).expect("sampled on grid"),
        t: 0.0,
    }
}

/// Discrete energy `h sum_j [eps^2 u_t^2 + (d_x I u)^2 + u^2/eps^2 + F(u)]`.
pub fn energy(problem: &KgeProblem, grid: &GridSpec, state: &SolverState) -> Result<f64> {
    let eps2 = problem.epsilon * problem.epsilon;
    let u = inverse_dft(grid, &state.u)?;
    let udot = inverse_dft(grid, &state.udot)?;
    let ux = inverse_dft(grid, &spectral_derivative(grid, &state.u, 1)?)?;
    let f = problem.nonlinearity();
    let sum: f64 = u
        .values()
        .iter()
        .zip(udot.values())
        .zip(ux.values())
        .map(|((&u, &ut), &ux)| eps2 * ut * ut + ux * ux + u * u / eps2 + f.antiderivative(u))
        .sum();
    Ok(grid.h() * sum)
}

/// Pointwise `f^(k)(u_j)`.
pub fn nonlinearity_field(problem: &KgeProblem, grid: &GridSpec, u_values: &RealField, k: usize) -> Result<RealField> {
    grid.check_len(u_values.len())?;
    if k > MAX_NONLINEARITY_DERIVATIVE {
        return Err(KgeError::UnsupportedNonlinearityDerivative(k));
    }
    let f = problem.nonlinearity();
    Ok(u_values.map(|u| f.derivative(u, k)))
}
