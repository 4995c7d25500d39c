//! Scenario files: flat TOML key-value pairs plus one `solitons` array.
//!
//! ```toml
//! kernel = "rational"
//! g = 1.0
//! c1 = 1.0
//! c2 = 0.06
//! n_particles = 31
//! solitons = [[0.0, 0.0239]]
//! ```
//!
//! Missing keys take the defaults of [`ScenarioConfig::default`]; unknown
//! keys are rejected.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::init::FlowScheme;
use crate::model::{KernelKind, ModelSpec, DEFAULT_SINGULAR_EPS, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub kernel: KernelKind,
    pub g: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub n_particles: usize,
    /// `(re, im)` of each soliton; the length sets the soliton count.
    pub solitons: Vec<[f64; 2]>,
    pub t_end: f64,
    pub output_every: f64,
    pub rtol: f64,
    pub atol: f64,
    /// Collision cap factor of the time stepper.
    pub eta: f64,
    pub gamma: f64,
    pub init_tol: f64,
    pub init_max_iter: usize,
    pub init_scheme: FlowScheme,
    /// Starting positions for the relaxation; empty means the built-in guess.
    pub initial_positions: Vec<f64>,
    /// Also integrate the Newtonian equations and compare.
    pub compare_newtonian: bool,
    pub grid_size: usize,
    /// Density smoothing width in grid cells.
    pub bandwidth_cells: f64,
    pub lambda: f64,
    pub singular_eps: f64,
    /// Samples per kernel family in `verify`.
    pub samples: usize,
    pub seed: u64,
    /// Coefficient of an `x^4` term added to `w` in `verify` (negative control).
    pub tamper_quartic: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            kernel: KernelKind::Rational,
            g: 1.0,
            c0: 0.0,
            c1: 1.0,
            c2: 0.06,
            c3: 0.0,
            n_particles: 31,
            solitons: vec![[0.0, 0.0239]],
            t_end: 0.3,
            output_every: 0.01,
            rtol: 1e-10,
            atol: 1e-10,
            eta: 0.1,
            gamma: 1.0,
            init_tol: 1e-10,
            init_max_iter: 1_000_000,
            init_scheme: FlowScheme::Explicit,
            initial_positions: Vec::new(),
            compare_newtonian: true,
            grid_size: 2048,
            bandwidth_cells: 2.0,
            lambda: 1.0,
            singular_eps: DEFAULT_SINGULAR_EPS,
            samples: 100,
            seed: 0,
            tamper_quartic: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig =
            toml::from_str(text).map_err(|e| Error::InvalidSpec(e.message().to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("scenario config always serializes")
    }

    pub fn solitons(&self) -> Vec<C64> {
        self.solitons.iter().map(|&[re, im]| C64::new(re, im)).collect()
    }

    pub fn spec(&self) -> Result<ModelSpec> {
        let spec = ModelSpec::new(
            self.kernel,
            self.g,
            [self.c0, self.c1, self.c2, self.c3],
            self.n_particles,
            self.solitons.len(),
        )?;
        Ok(spec.with_lambda(self.lambda).with_singular_eps(self.singular_eps))
    }

    pub fn validate(&self) -> Result<()> {
        self.spec()?;
        let positive = [
            ("output_every", self.output_every),
            ("rtol", self.rtol),
            ("atol", self.atol),
            ("eta", self.eta),
            ("gamma", self.gamma),
            ("init_tol", self.init_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidSpec(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::InvalidSpec("t_end must be nonnegative".into()));
        }
        if !(self.bandwidth_cells >= 0.0) {
            return Err(Error::InvalidSpec("bandwidth_cells must be nonnegative".into()));
        }
        if self.grid_size < 16 {
            return Err(Error::InvalidSpec("grid_size must be at least 16".into()));
        }
        if self.solitons.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidSpec("soliton coordinates must be finite".into()));
        }
        if !self.initial_positions.is_empty() && self.initial_positions.len() != self.n_particles {
            return Err(Error::InvalidSpec(format!(
                "initial_positions has {} entries, n_particles is {}",
                self.initial_positions.len(),
                self.n_particles
            )));
        }
        Ok(())
    }
}
