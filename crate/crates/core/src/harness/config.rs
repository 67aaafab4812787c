//! Run configuration, read from TOML files.
//!
//! ```toml
//! [problem]
//! epsilon = 0.5
//! lambda = 1.0          # f(u) = lambda u^3; `constant = K` selects f = K instead
//! a = -32.0
//! b = 32.0
//! phi1 = { preset = "gaussian", amplitude = 2.0 }
//! phi2 = { preset = "gaussian", amplitude = 3.0 }
//!
//! [discretization]
//! h = 0.0625            # or m = 1024
//! tau = 0.1
//! t_final = 2.0
//!
//! [method]
//! methods = ["ewi4", "ewi6"]   # ewi2 | ewi4 | ewi6 | rk4
//!
//! [study]
//! tau_levels = 4        # tau, tau/2, ...
//! epsilon_levels = 1    # eps/2^j paired with tau/4^j
//! h_levels = 1          # h, h/2, ...
//!
//! [reference]
//! cache_dir = "kge-reference"
//! tau_ref = 1e-5
//! h_ref = 0.0625
//!
//! [output]
//! csv = "out/temporal.csv"
//! json = "out/temporal.json"
//! energy_stride = 10
//! record_wall_time = true
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{KgeError, Result};
use crate::grid::GridSpec;
use crate::problem::{ConstantNonlinearity, CubicNonlinearity, InitialData, KgeProblem, Nonlinearity};
use crate::weights::EwiOrder;

/// A time integrator selectable from configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Ewi(EwiOrder),
    Rk4,
}

impl Method {
    /// Column value in the CSV `method` field.
    pub fn family(&self) -> &'static str {
        match self {
            Method::Ewi(_) => "ewi",
            Method::Rk4 => "rk4",
        }
    }

    pub fn order(&self) -> u32 {
        match self {
            Method::Ewi(o) => o.order(),
            Method::Rk4 => 4,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Ewi(o) => write!(f, "ewi{}", o.order()),
            Method::Rk4 => f.write_str("rk4"),
        }
    }
}

impl FromStr for Method {
    type Err = KgeError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "ewi2" | "gifp" => Ok(Method::Ewi(EwiOrder::Second)),
            "ewi4" => Ok(Method::Ewi(EwiOrder::Fourth)),
            "ewi6" => Ok(Method::Ewi(EwiOrder::Sixth)),
            "rk4" | "rk4fp" => Ok(Method::Rk4),
            other => Err(KgeError::Config(format!(
                "unknown method `{other}` (expected ewi2, ewi4, ewi6 or rk4)"
            ))),
        }
    }
}

impl Serialize for Method {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Method {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Initial profile presets as they appear in configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "preset", rename_all = "lowercase", deny_unknown_fields)]
pub enum ProfileConfig {
    Zero,
    Gaussian {
        amplitude: f64,
        #[serde(default = "one")]
        width: f64,
        #[serde(default)]
        center: f64,
    },
    Cosine {
        amplitude: f64,
        wavenumber: f64,
        #[serde(default)]
        phase: f64,
    },
}

fn one() -> f64 {
    1.0
}

impl ProfileConfig {
    pub fn to_initial_data(&self) -> InitialData {
        match *self {
            ProfileConfig::Zero => InitialData::Zero,
            ProfileConfig::Gaussian {
                amplitude,
                width,
                center,
            } => InitialData::Gaussian {
                amplitude,
                width,
                center,
            },
            ProfileConfig::Cosine {
                amplitude,
                wavenumber,
                phase,
            } => InitialData::Cosine {
                amplitude,
                wavenumber,
                phase,
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub epsilon: f64,
    #[serde(default = "one")]
    pub lambda: f64,
    /// Replaces the cubic term by the constant `f = K` when set.
    #[serde(default)]
    pub constant: Option<f64>,
    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_b")]
    pub b: f64,
    #[serde(default = "default_phi1")]
    pub phi1: ProfileConfig,
    #[serde(default = "default_phi2")]
    pub phi2: ProfileConfig,
}

fn default_a() -> f64 {
    -32.0
}
fn default_b() -> f64 {
    32.0
}
fn default_phi1() -> ProfileConfig {
    ProfileConfig::Gaussian {
        amplitude: 2.0,
        width: 1.0,
        center: 0.0,
    }
}
fn default_phi2() -> ProfileConfig {
    ProfileConfig::Gaussian {
        amplitude: 3.0,
        width: 1.0,
        center: 0.0,
    }
}

impl ProblemConfig {
    /// The benchmark problem on `[-32, 32]` with Gaussian data and `f = u^3`.
    pub fn benchmark(epsilon: f64) -> Self {
        Self {
            epsilon,
            lambda: 1.0,
            constant: None,
            a: default_a(),
            b: default_b(),
            phi1: default_phi1(),
            phi2: default_phi2(),
        }
    }

    pub fn nonlinearity(&self) -> Arc<dyn Nonlinearity> {
        match self.constant {
            Some(value) => Arc::new(ConstantNonlinearity { value }),
            None => Arc::new(CubicNonlinearity::new(self.lambda)),
        }
    }

    pub fn build(&self, epsilon: f64) -> Result<KgeProblem> {
        KgeProblem::new(
            epsilon,
            self.nonlinearity(),
            self.phi1.to_initial_data(),
            self.phi2.to_initial_data(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscretizationConfig {
    #[serde(default)]
    pub m: Option<usize>,
    #[serde(default)]
    pub h: Option<f64>,
    pub tau: f64,
    pub t_final: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodConfig {
    pub methods: Vec<Method>,
    #[serde(default)]
    pub dealias: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    #[serde(default = "one_level")]
    pub tau_levels: usize,
    #[serde(default = "one_level")]
    pub epsilon_levels: usize,
    #[serde(default = "one_level")]
    pub h_levels: usize,
}

fn one_level() -> usize {
    1
}

impl Default for StudyConfig {
    fn default() -> Self {
        Self {
            tau_levels: 1,
            epsilon_levels: 1,
            h_levels: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceConfig {
    #[serde(default = "default_cache_dir")]
    pub cache_dir: PathBuf,
    #[serde(default = "default_tau_ref")]
    pub tau_ref: f64,
    #[serde(default = "default_h_ref")]
    pub h_ref: f64,
    /// Ignore an existing cache entry and recompute.
    #[serde(default)]
    pub regenerate: bool,
}

fn default_cache_dir() -> PathBuf {
    PathBuf::from("kge-reference")
}
fn default_tau_ref() -> f64 {
    1e-5
}
fn default_h_ref() -> f64 {
    1.0 / 16.0
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            cache_dir: default_cache_dir(),
            tau_ref: default_tau_ref(),
            h_ref: default_h_ref(),
            regenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub csv: Option<PathBuf>,
    #[serde(default)]
    pub json: Option<PathBuf>,
    /// Energy is evaluated every `energy_stride` steps (and always at the last one).
    #[serde(default = "one_level")]
    pub energy_stride: usize,
    /// When false the wall-time column is left empty so reruns are byte-identical.
    #[serde(default = "yes")]
    pub record_wall_time: bool,
}

fn yes() -> bool {
    true
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            csv: None,
            json: None,
            energy_stride: 1,
            record_wall_time: true,
        }
    }
}

/// Everything a study or a single solve needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub discretization: DiscretizationConfig,
    pub method: MethodConfig,
    #[serde(default)]
    pub study: StudyConfig,
    #[serde(default)]
    pub reference: ReferenceConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

impl RunConfig {
    /// A single-cell configuration with default study, reference and output sections.
    pub fn new(problem: ProblemConfig, h: f64, tau: f64, t_final: f64, methods: Vec<Method>) -> Self {
        Self {
            problem,
            discretization: DiscretizationConfig {
                m: None,
                h: Some(h),
                tau,
                t_final,
            },
            method: MethodConfig {
                methods,
                dealias: false,
            },
            study: StudyConfig::default(),
            reference: ReferenceConfig::default(),
            output: OutputConfig::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| KgeError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| KgeError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            KgeError::Config(msg) => KgeError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("configuration is always representable as TOML")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(KgeError::Config(msg));
        let p = &self.problem;
        if !(p.epsilon > 0.0 && p.epsilon <= 1.0) {
            return bad(format!("problem.epsilon = {} must lie in (0, 1]", p.epsilon));
        }
        if !(p.a.is_finite() && p.b.is_finite() && p.b > p.a) {
            return bad(format!("problem interval [{}, {}] is empty", p.a, p.b));
        }
        let d = &self.discretization;
        match (d.m, d.h) {
            (Some(_), Some(_)) => return bad("set only one of discretization.m and discretization.h".into()),
            (None, None) => return bad("discretization needs m or h".into()),
            (None, Some(h)) if !(h > 0.0) => return bad(format!("discretization.h = {h} must be positive")),
            _ => {}
        }
        if !(d.tau > 0.0 && d.tau.is_finite()) {
            return bad(format!("discretization.tau = {} must be positive", d.tau));
        }
        if !(d.t_final > 0.0 && d.t_final.is_finite()) {
            return bad(format!("discretization.t_final = {} must be positive", d.t_final));
        }
        if self.method.methods.is_empty() {
            return bad("method.methods is empty".into());
        }
        let s = &self.study;
        if s.tau_levels == 0 || s.epsilon_levels == 0 || s.h_levels == 0 {
            return bad("study levels must be at least 1".into());
        }
        let r = &self.reference;
        if !(r.tau_ref > 0.0) || !(r.h_ref > 0.0) {
            return bad("reference.tau_ref and reference.h_ref must be positive".into());
        }
        if self.output.energy_stride == 0 {
            return bad("output.energy_stride must be at least 1".into());
        }
        self.grid()?;
        Ok(())
    }

    /// Grid of the base discretization.
    pub fn grid(&self) -> Result<GridSpec> {
        let (a, b) = (self.problem.a, self.problem.b);
        let grid = match (self.discretization.m, self.discretization.h) {
            (Some(m), _) => GridSpec::new(a, b, m),
            (None, Some(h)) => GridSpec::with_mesh_size(a, b, h),
            (None, None) => return Err(KgeError::Config("discretization needs m or h".into())),
        };
        grid.map_err(|e| KgeError::Config(e.to_string()))
    }

    /// `epsilon_0 / 2^j` for each epsilon level.
    pub fn epsilon_ladder(&self) -> Vec<f64> {
        (0..self.study.epsilon_levels)
            .map(|j| self.problem.epsilon / 2f64.powi(j as i32))
            .collect()
    }

    /// `tau_0 / 4^j / 2^k`: row `j` of the coupled ladder, `k` along the row.
    pub fn tau_ladder(&self, epsilon_level: usize) -> Vec<f64> {
        let base = self.discretization.tau / 4f64.powi(epsilon_level as i32);
        (0..self.study.tau_levels).map(|k| base / 2f64.powi(k as i32)).collect()
    }

    /// Grids `h_0 / 2^k`.
    pub fn grid_ladder(&self) -> Result<Vec<GridSpec>> {
        let g0 = self.grid()?;
        (0..self.study.h_levels)
            .map(|k| GridSpec::new(g0.a(), g0.b(), g0.m() << k).map_err(|e| KgeError::Config(e.to_string())))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
[problem]
epsilon = 0.5

[discretization]
h = 0.0625
tau = 0.1
t_final = 2.0

[method]
methods = ["ewi4", "ewi6"]

[study]
tau_levels = 4
"#;

    #[test]
    fn parses_with_defaults() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(c.problem, ProblemConfig::benchmark(0.5));
        assert_eq!(c.grid().unwrap().m(), 1024);
        assert_eq!(
            c.method.methods,
            vec![Method::Ewi(EwiOrder::Fourth), Method::Ewi(EwiOrder::Sixth)]
        );
        assert_eq!(c.tau_ladder(0), vec![0.1, 0.05, 0.025, 0.0125]);
        assert_eq!(c.reference.tau_ref, 1e-5);
        assert_eq!(c.output.energy_stride, 1);
    }

    #[test]
    fn round_trips_through_toml() {
        let c = RunConfig::from_toml_str(SAMPLE).unwrap();
        assert_eq!(RunConfig::from_toml_str(&c.to_toml_string()).unwrap(), c);
    }

    #[test]
    fn coupled_ladders() {
        let mut c = RunConfig::from_toml_str(SAMPLE).unwrap();
        c.problem.epsilon = 0.05;
        c.discretization.tau = 1.25e-3;
        c.study.epsilon_levels = 3;
        c.study.tau_levels = 3;
        assert_eq!(c.epsilon_ladder(), vec![0.05, 0.025, 0.0125]);
        assert_eq!(c.tau_ladder(2), vec![1.25e-3 / 16.0, 1.25e-3 / 32.0, 1.25e-3 / 64.0]);
    }

    #[test]
    fn rejects_bad_configs() {
        let variants = [
            SAMPLE.replace("epsilon = 0.5", "epsilon = 0.0"),
            SAMPLE.replace("t_final = 2.0", "t_final = 0.0"),
            SAMPLE.replace("\"ewi4\"", "\"ewi5\""),
            SAMPLE.replace("h = 0.0625", "h = 0.07"),
            SAMPLE.replace("h = 0.0625", "h = 0.0625\nm = 1024"),
            SAMPLE.replace("tau_levels = 4", "tau_levels = 0"),
            SAMPLE.replace("[study]", "[study]\nbogus = 1"),
            "not toml at all".to_string(),
        ];
        for v in variants {
            assert!(matches!(RunConfig::from_toml_str(&v), Err(KgeError::Config(_))), "{v}");
        }
    }

    #[test]
    fn method_tags() {
        for m in [
            Method::Ewi(EwiOrder::Second),
            Method::Ewi(EwiOrder::Fourth),
            Method::Ewi(EwiOrder::Sixth),
            Method::Rk4,
        ] {
            assert_eq!(m.to_string().parse::<Method>().unwrap(), m);
        }
        assert_eq!(Method::Rk4.order(), 4);
        assert_eq!(Method::Ewi(EwiOrder::Second).family(), "ewi");
    }

    #[test]
    fn constant_forcing_selects_constant_nonlinearity() {
        let text = SAMPLE.replace("epsilon = 0.5", "epsilon = 0.5\nconstant = 2.0");
        let c = RunConfig::from_toml_str(&text).unwrap();
        let p = c.problem.build(0.5).unwrap();
        assert_eq!(p.nonlinearity().value(7.0), 2.0);
    }
}
