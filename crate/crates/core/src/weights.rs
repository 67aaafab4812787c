//! Mode frequencies and the oscillatory moment integrals behind every EWI step coefficient.
//!
//! `S_m = int_0^tau w^m sin(omega (tau - w)) dw`, `C_m = int_0^tau w^m cos(omega (tau - w)) dw`.

use crate::error::{KgeError, Result};
use crate::grid::GridSpec;

/// Largest moment order supported by [`moment_integrals`].
pub const MAX_MOMENT: usize = 6;

/// Below this `|omega tau|` the moments are summed from their Maclaurin series.
/// The upward recurrence amplifies rounding by roughly `m! / |omega tau|^m`.
pub const SERIES_THRESHOLD: f64 = 2.0;

/// Temporal order `2N` of a Gautschi-type scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EwiOrder {
    Second,
    Fourth,
    Sixth,
}

impl EwiOrder {
    pub const ALL: [EwiOrder; 3] = [EwiOrder::Second, EwiOrder::Fourth, EwiOrder::Sixth];

    /// `N` in `2N`.
    pub fn n(self) -> usize {
        match self {
            Self::Second => 1,
            Self::Fourth => 2,
            Self::Sixth => 3,
        }
    }

    pub fn order(self) -> u32 {
        2 * self.n() as u32
    }

    /// Highest Taylor term of the nonlinearity used by the scheme, `2N - 2`.
    pub fn max_taylor(self) -> usize {
        2 * self.n() - 2
    }

    pub fn from_order(order: u32) -> Result<Self> {
        match order {
            2 => Ok(Self::Second),
            4 => Ok(Self::Fourth),
            6 => Ok(Self::Sixth),
            other => Err(KgeError::UnsupportedOrder(other)),
        }
    }
}

/// `omega_l = sqrt(eps^2 mu_l^2 + 1) / eps^2`, in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeFrequencies {
    pub omega: Vec<f64>,
}

pub fn mode_frequencies(grid: &GridSpec, epsilon: f64) -> ModeFrequencies {
    let eps2 = epsilon * epsilon;
    ModeFrequencies {
        omega: grid
            .mu()
            .iter()
            .map(|&mu| (eps2 * mu * mu + 1.0).sqrt() / eps2)
            .collect(),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MomentTable {
    pub s: Vec<f64>,
    pub c: Vec<f64>,
}

/// `S_m`, `C_m` for `m = 0..=m_max`.
///
/// Uses the integration-by-parts recurrence
/// `S_m = tau^m/omega - (m/omega) C_{m-1}`, `C_m = (m/omega) S_{m-1}`
/// when `|omega tau| >= SERIES_THRESHOLD`, otherwise the scaled series
/// `S_m = tau^{m+1} sum_k (-1)^k x^{2k+1} m!/(m+2k+2)!` (and its cosine twin), `x = omega tau`.
/// A negative `tau` integrates backward; the formulas hold unchanged.
pub fn moment_integrals(omega: f64, tau: f64, m_max: usize) -> Result<MomentTable> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(KgeError::InvalidParameter(format!("omega = {omega} must be positive")));
    }
    if !tau.is_finite() {
        return Err(KgeError::InvalidParameter(format!("tau = {tau} must be finite")));
    }
    if m_max > MAX_MOMENT {
        return Err(KgeError::InvalidParameter(format!(
            "m_max = {m_max} exceeds {MAX_MOMENT}"
        )));
    }
    let x = omega * tau;
    let mut s = vec![0.0; m_max + 1];
    let mut c = vec![0.0; m_max + 1];
    if tau == 0.0 {
        return Ok(MomentTable { s, c });
    }
    if x.abs() < SERIES_THRESHOLD {
        let mut tau_pow = tau;
        for m in 0..=m_max {
            s[m] = tau_pow * scaled_sine_series(x, m);
            c[m] = tau_pow * scaled_cosine_series(x, m);
            tau_pow *= tau;
        }
    } else {
        let half = 0.5 * x;
        s[0] = 2.0 * half.sin().powi(2) / omega;
        c[0] = x.sin() / omega;
        let mut tau_pow = 1.0;
        for m in 1..=m_max {
            tau_pow *= tau;
            let mf = m as f64;
            s[m] = tau_pow / omega - mf / omega * c[m - 1];
            c[m] = mf / omega * s[m - 1];
        }
    }
    Ok(MomentTable { s, c })
}

/// `int_0^1 v^m sin(x (1 - v)) dv`
fn scaled_sine_series(x: f64, m: usize) -> f64 {
    let mf = m as f64;
    let x2 = x * x;
    let mut term = x / ((mf + 1.0) * (mf + 2.0));
    let mut sum = term;
    for k in 0..80 {
        let d = mf + 2.0 * k as f64;
        term *= -x2 / ((d + 3.0) * (d + 4.0));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

/// `int_0^1 v^m cos(x (1 - v)) dv`
fn scaled_cosine_series(x: f64, m: usize) -> f64 {
    let mf = m as f64;
    let x2 = x * x;
    let mut term = 1.0 / (mf + 1.0);
    let mut sum = term;
    for k in 0..80 {
        let d = mf + 2.0 * k as f64;
        term *= -x2 / ((d + 2.0) * (d + 3.0));
        sum += term;
        if term.abs() <= 1e-18 * sum.abs() {
            break;
        }
    }
    sum
}

fn factorial(m: usize) -> f64 {
    (1..=m).map(|k| k as f64).product()
}

/// Step coefficients for one `(tau, order)`, per mode in FFT storage order.
///
/// Main step (three-level): `A_m = 2 S_m / (eps^2 omega m!)` and `Adot_m = 2 C_m / (eps^2 m!)`
/// for even `m <= 2N - 2`. First step: `B_m = S_m / (eps^2 omega m!)`,
/// `Bdot_m = C_m / (eps^2 m!)` for all `m <= 2N - 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightTable {
    order: EwiOrder,
    tau: f64,
    epsilon: f64,
    omega: Vec<f64>,
    cos: Vec<f64>,
    // 1 - cos(omega tau), evaluated without cancellation
    one_minus_cos: Vec<f64>,
    sin: Vec<f64>,
    // indexed [m / 2][mode]
    a: Vec<Vec<f64>>,
    adot: Vec<Vec<f64>>,
    // indexed [m][mode]
    b: Vec<Vec<f64>>,
    bdot: Vec<Vec<f64>>,
}

/// Precomputes all per-mode weights; the table is reused by every step.
/// `tau` may be negative to step backward in time.
pub fn build_weight_table(grid: &GridSpec, epsilon: f64, tau: f64, order: EwiOrder) -> Result<WeightTable> {
    if !(epsilon > 0.0) {
        return Err(KgeError::InvalidParameter(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    if tau == 0.0 || !tau.is_finite() {
        return Err(KgeError::InvalidParameter(format!(
            "tau = {tau} must be finite and nonzero"
        )));
    }
    let eps2 = epsilon * epsilon;
    let omega = mode_frequencies(grid, epsilon).omega;
    let top = order.max_taylor();
    let modes = omega.len();
    let mut table = WeightTable {
        order,
        tau,
        epsilon,
        cos: omega.iter().map(|w| (w * tau).cos()).collect(),
        one_minus_cos: omega.iter().map(|w| 2.0 * (0.5 * w * tau).sin().powi(2)).collect(),
        sin: omega.iter().map(|w| (w * tau).sin()).collect(),
        a: vec![vec![0.0; modes]; order.n()],
        adot: vec![vec![0.0; modes]; order.n()],
        b: vec![vec![0.0; modes]; top + 1],
        bdot: vec![vec![0.0; modes]; top + 1],
        omega,
    };
    for k in 0..modes {
        let w = table.omega[k];
        let mt = moment_integrals(w, tau, top)?;
        for m in 0..=top {
            let fact = factorial(m);
            table.b[m][k] = mt.s[m] / (eps2 * w * fact);
            table.bdot[m][k] = mt.c[m] / (eps2 * fact);
            if m % 2 == 0 {
                table.a[m / 2][k] = 2.0 * table.b[m][k];
                table.adot[m / 2][k] = 2.0 * table.bdot[m][k];
            }
        }
    }
    Ok(table)
}

impl WeightTable {
    pub fn order(&self) -> EwiOrder {
        self.order
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn modes(&self) -> usize {
        self.omega.len()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn cos(&self) -> &[f64] {
        &self.cos
    }

    pub fn one_minus_cos(&self) -> &[f64] {
        &self.one_minus_cos
    }

    pub fn sin(&self) -> &[f64] {
        &self.sin
    }

    /// Main-step weight `A_m` for even `m`, or `None` if the order does not use it.
    pub fn a(&self, m: usize) -> Option<&[f64]> {
        m.is_multiple_of(2)
            .then(|| self.a.get(m / 2))
            .flatten()
            .map(Vec::as_slice)
    }

    pub fn adot(&self, m: usize) -> Option<&[f64]> {
        m.is_multiple_of(2)
            .then(|| self.adot.get(m / 2))
            .flatten()
            .map(Vec::as_slice)
    }

    pub fn b(&self, m: usize) -> Option<&[f64]> {
        self.b.get(m).map(Vec::as_slice)
    }

    pub fn bdot(&self, m: usize) -> Option<&[f64]> {
        self.bdot.get(m).map(Vec::as_slice)
    }

    /// Sets `A_m`, `Adot_m` to zero (used to compare truncated members of the family).
    pub fn zero_main_weight(&mut self, m: usize) {
        if m.is_multiple_of(2) {
            if let Some(row) = self.a.get_mut(m / 2) {
                row.fill(0.0);
            }
            if let Some(row) = self.adot.get_mut(m / 2) {
                row.fill(0.0);
            }
        }
    }

    /// Sets `B_m`, `Bdot_m` to zero.
    pub fn zero_first_step_weight(&mut self, m: usize) {
        if let Some(row) = self.b.get_mut(m) {
            row.fill(0.0);
        }
        if let Some(row) = self.bdot.get_mut(m) {
            row.fill(0.0);
        }
    }

    pub(crate) fn main_rows(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.a.iter().zip(&self.adot).map(|(a, d)| (a.as_slice(), d.as_slice()))
    }

    pub(crate) fn first_rows(&self) -> impl Iterator<Item = (&[f64], &[f64])> {
        self.b.iter().zip(&self.bdot).map(|(b, d)| (b.as_slice(), d.as_slice()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::build_grid;
    use std::f64::consts::PI;

    #[test]
    fn frequencies() {
        let g = build_grid(0.0, 2.0 * PI, 8).unwrap();
        assert_eq!(mode_frequencies(&g, 1.0).omega[0], 1.0);
        assert_eq!(mode_frequencies(&g, 0.5).omega[0], 4.0);
        let g = build_grid(-32.0, 32.0, 64).unwrap();
        let w = mode_frequencies(&g, 0.1).omega;
        let mu = PI / 32.0;
        assert!((w[1] - (0.01 * mu * mu + 1.0f64).sqrt() / 0.01).abs() < 1e-12);
        for k in 1..32 {
            assert_eq!(w[k], w[64 - k]);
            assert!(w[k] >= 100.0);
        }
    }

    #[test]
    fn half_period_moment() {
        let t = moment_integrals(PI, 1.0, 0).unwrap();
        assert!((t.s[0] - 2.0 / PI).abs() < 1e-15);
    }

    #[test]
    fn zero_step_gives_zero_moments() {
        let t = moment_integrals(3.0, 0.0, 6).unwrap();
        assert!(t.s.iter().chain(&t.c).all(|&v| v == 0.0));
    }

    #[test]
    fn rejects_bad_arguments() {
        assert!(moment_integrals(0.0, 1.0, 2).is_err());
        assert!(moment_integrals(-1.0, 1.0, 2).is_err());
        assert!(moment_integrals(1.0, 1.0, 7).is_err());
        let g = build_grid(0.0, 1.0, 8).unwrap();
        assert!(build_weight_table(&g, 0.5, 0.0, EwiOrder::Fourth).is_err());
        assert!(matches!(EwiOrder::from_order(8), Err(KgeError::UnsupportedOrder(8))));
    }

    #[test]
    fn series_and_recurrence_agree_at_the_switch() {
        for m in 0..=6 {
            let x = SERIES_THRESHOLD;
            let s_series = scaled_sine_series(x, m);
            let c_series = scaled_cosine_series(x, m);
            let rec = moment_integrals(x, 1.0 + 1e-15, m).unwrap();
            assert!((s_series - rec.s[m]).abs() < 1e-13, "m = {m}");
            assert!((c_series - rec.c[m]).abs() < 1e-13, "m = {m}");
        }
    }

    #[test]
    fn backward_step_symmetry() {
        // S_m(-tau) = (-1)^m S_m(tau), C_m(-tau) = (-1)^(m+1) C_m(tau)
        for &(w, tau) in &[(3.7, 0.25), (40.0, 0.1), (1.0, 1e-3)] {
            let f = moment_integrals(w, tau, 6).unwrap();
            let b = moment_integrals(w, -tau, 6).unwrap();
            for m in 0..=6 {
                let sign = if m % 2 == 0 { 1.0 } else { -1.0 };
                assert!((b.s[m] - sign * f.s[m]).abs() <= 1e-15 * f.s[m].abs().max(1e-300) + 1e-300);
                assert!((b.c[m] + sign * f.c[m]).abs() <= 1e-15 * f.c[m].abs().max(1e-300) + 1e-300);
            }
        }
    }

    #[test]
    fn fourth_order_main_weights_match_printed_fractions() {
        let g = build_grid(-32.0, 32.0, 64).unwrap();
        let (eps, tau) = (0.5, 0.0125);
        let t = build_weight_table(&g, eps, tau, EwiOrder::Fourth).unwrap();
        let e2 = eps * eps;
        for k in 0..64 {
            let w = t.omega()[k];
            let x = w * tau;
            let a0 = (2.0 - 2.0 * x.cos()) / (e2 * w * w);
            let a2 = (x * x + 2.0 * x.cos() - 2.0) / (e2 * w.powi(4));
            let ad0 = 2.0 * x.sin() / (e2 * w);
            let ad2 = (2.0 * x - 2.0 * x.sin()) / (e2 * w.powi(3));
            let b1 = (x - x.sin()) / (e2 * w.powi(3));
            let bd1 = (1.0 - x.cos()) / (e2 * w * w);
            for (got, want) in [
                (t.a(0).unwrap()[k], a0),
                (t.a(2).unwrap()[k], a2),
                (t.adot(0).unwrap()[k], ad0),
                (t.adot(2).unwrap()[k], ad2),
                (t.b(1).unwrap()[k], b1),
                (t.bdot(1).unwrap()[k], bd1),
                (t.b(2).unwrap()[k], a2 / 2.0),
                (t.bdot(2).unwrap()[k], (x - x.sin()) / (e2 * w.powi(3))),
            ] {
                assert!((got - want).abs() <= 1e-9 * want.abs(), "k = {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn second_order_table_is_a_truncation() {
        let g = build_grid(-32.0, 32.0, 32).unwrap();
        let t = build_weight_table(&g, 0.5, 0.05, EwiOrder::Second).unwrap();
        assert!(t.a(0).is_some() && t.adot(0).is_some() && t.b(0).is_some() && t.bdot(0).is_some());
        assert!(t.a(2).is_none() && t.b(1).is_none() && t.b(2).is_none() && t.a(1).is_none());
        let t6 = build_weight_table(&g, 0.5, 0.05, EwiOrder::Sixth).unwrap();
        assert!(t6.a(4).is_some() && t6.b(4).is_some() && t6.b(5).is_none());
        assert_eq!(t.a(0).unwrap(), t6.a(0).unwrap());
    }
}
