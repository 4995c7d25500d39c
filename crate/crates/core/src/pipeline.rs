//! End-to-end workflows behind the command line: residual verification,
//! initial data, time evolution, fluid fields and the two reference presets.
//!
//! Every workflow is a pure function of a [`ScenarioConfig`]; the `write_*`
//! helpers turn results into files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::dynamics::{DualFlow, DualState, NewtonianFlow, PhaseState};
use crate::error::Error;
use crate::functional::{
    external_decomposition_suite, kernel_identity_suite, three_body_suite, ResidualReport, Tamper,
};
use crate::hydro::{u_plus_hydro_field, FieldGrid};
use crate::init::{default_initial_guess, gradient_flow, FlowOptions, FlowScheme, InitReport};
use crate::integrator::{integrate, IntegratorOptions, Trajectory};
use crate::model::{KernelKind, ModelSpec, C64};

/// Threshold on every residual reported by [`verify`].
pub const VERIFY_THRESHOLD: f64 = 1e-11;

/// Relative tolerance on the real and imaginary parts of preset soliton velocities.
pub const PRESET_ZDOT_TOL: f64 = 1e-2;

/// Tolerance on `zdot_2 + conj(zdot_1)` in the two-soliton preset.
pub const CONJUGATE_TOL: f64 = 1e-10;

/// Fewest output times with the soliton inside the cloud for the worldline
/// check to count as informative.
pub const WORLDLINE_MIN_CHECKED: usize = 5;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Model(#[from] Error),

    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl RunError {
    /// Process exit code: 3 for configuration problems, 2 for everything
    /// that fails while computing or writing.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Model(Error::InvalidSpec(_) | Error::InvalidArgument(_)) => 3,
            _ => 2,
        }
    }
}

pub type RunResult<T> = std::result::Result<T, RunError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FamilyResiduals {
    pub kernel: KernelKind,
    pub three_body: ResidualReport,
    pub kernel_identity: ResidualReport,
    pub external: ResidualReport,
}

impl FamilyResiduals {
    pub fn max_residual(&self) -> f64 {
        self.three_body
            .max_abs_residual
            .max(self.kernel_identity.max_abs_residual)
            .max(self.external.max_abs_residual)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub threshold: f64,
    pub families: Vec<FamilyResiduals>,
    pub passed: bool,
}

impl std::fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        writeln!(f, "{:<14} {:>12} {:>12} {:>12}", "kernel", "three-body", "identity", "external")?;
        for fam in &self.families {
            writeln!(
                f,
                "{:<14} {:>12.3e} {:>12.3e} {:>12.3e}",
                fam.kernel.name(),
                fam.three_body.max_abs_residual,
                fam.kernel_identity.max_abs_residual,
                fam.external.max_abs_residual
            )?;
        }
        write!(
            f,
            "{} (threshold {:e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.threshold
        )
    }
}

/// Runs the three residual suites for every kernel family with the
/// coefficients of `cfg`.
pub fn verify(cfg: &ScenarioConfig) -> RunResult<VerifyReport> {
    cfg.validate()?;
    let c = [cfg.c0, cfg.c1, cfg.c2, cfg.c3];
    let tamper = Tamper {
        quartic: cfg.tamper_quartic,
    };
    let mut families = Vec::new();
    for kind in KernelKind::ALL {
        let spec = ModelSpec::new(kind, cfg.g, c, cfg.n_particles, cfg.solitons.len())?;
        families.push(FamilyResiduals {
            kernel: kind,
            three_body: three_body_suite(&spec, cfg.samples, cfg.seed)?,
            kernel_identity: kernel_identity_suite(&spec, cfg.samples, cfg.seed)?,
            external: external_decomposition_suite(&spec, cfg.samples, cfg.seed, tamper)?,
        });
    }
    let passed = families
        .iter()
        .all(|f| f.max_residual() < VERIFY_THRESHOLD);
    Ok(VerifyReport {
        threshold: VERIFY_THRESHOLD,
        families,
        passed,
    })
}

/// Relaxes the particles onto the reality constraint for the configured solitons.
pub fn initialize(cfg: &ScenarioConfig) -> RunResult<InitReport> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let x0 = if cfg.initial_positions.is_empty() {
        default_initial_guess(&spec)?
    } else {
        cfg.initial_positions.clone()
    };
    let opts = FlowOptions {
        gamma: cfg.gamma,
        tol: cfg.init_tol,
        max_iter: cfg.init_max_iter,
        scheme: cfg.init_scheme,
        trace: false,
    };
    Ok(gradient_flow(&spec, &cfg.solitons(), &x0, &opts)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveSummary {
    pub kernel: KernelKind,
    pub g: f64,
    pub n_particles: usize,
    pub n_solitons: usize,
    pub t_end: f64,
    pub constraint_residual: f64,
    pub init_iterations: usize,
    pub zdot_initial: Vec<C64>,
    pub energy_initial: C64,
    /// `max_t |E(t) - E(0)| / |E(0)|` along the dual flow.
    pub energy_drift: f64,
    pub max_im_x: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub newtonian_energy_drift: Option<f64>,
    /// Max over output times and particles of `|Re x_dual - x_newton|`.
    pub newtonian_max_dx: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct EvolveOutput {
    pub dual: Trajectory,
    pub newtonian: Option<Trajectory>,
    pub summary: EvolveSummary,
}

fn integrator_options(cfg: &ScenarioConfig) -> IntegratorOptions {
    IntegratorOptions {
        eta: cfg.eta,
        ..IntegratorOptions::default()
            .with_tolerances(cfg.rtol, cfg.atol)
            .with_output_every(cfg.output_every)
    }
}

/// Integrates the dual flow from `init` (and the Newtonian equations when
/// `compare_newtonian` is set) up to `t_end`.
pub fn evolve(cfg: &ScenarioConfig, init: &InitReport) -> RunResult<EvolveOutput> {
    cfg.validate()?;
    let spec = cfg.spec()?;
    let n = spec.n_particles;
    let opts = integrator_options(cfg);

    let mut dual_flow = DualFlow::new(spec.clone());
    dual_flow.eta = cfg.eta;
    let start = DualState::from_real(&init.x, init.z.clone());
    let dual = integrate(&dual_flow, 0.0, &start.to_flat(), cfg.t_end, &opts)?;

    let newtonian = if cfg.compare_newtonian {
        let mut flow = NewtonianFlow::new(spec.clone())?;
        flow.eta = cfg.eta;
        let phase = PhaseState {
            x: init.x.clone(),
            p: init.p.clone(),
            z: init.z.clone(),
            zdot: init.zdot.clone(),
            t: 0.0,
        };
        Some(integrate(&flow, 0.0, &phase.to_flat(), cfg.t_end, &opts)?)
    } else {
        None
    };

    let newtonian_max_dx = newtonian.as_ref().map(|traj| {
        let mut worst: f64 = 0.0;
        for (yd, yn) in dual.states.iter().zip(&traj.states) {
            for j in 0..n {
                worst = worst.max((yd[2 * j] - yn[j]).abs());
            }
        }
        worst
    });

    let summary = EvolveSummary {
        kernel: spec.kernel,
        g: spec.g,
        n_particles: n,
        n_solitons: spec.n_solitons,
        t_end: cfg.t_end,
        constraint_residual: init.constraint_residual,
        init_iterations: init.iterations,
        zdot_initial: init.zdot.clone(),
        energy_initial: dual.energy_log[0],
        energy_drift: dual.relative_energy_drift(),
        max_im_x: dual.max_im(),
        steps: dual.steps.len(),
        rejected_steps: dual.rejected,
        newtonian_energy_drift: newtonian.as_ref().map(Trajectory::relative_energy_drift),
        newtonian_max_dx,
    };
    Ok(EvolveOutput {
        dual,
        newtonian,
        summary,
    })
}

#[derive(Clone, Debug)]
pub struct HydroOutput {
    pub grid: FieldGrid,
    pub u_plus: Vec<Option<C64>>,
}

/// Fluid fields of the initial particle configuration.
pub fn hydro(cfg: &ScenarioConfig, init: &InitReport) -> RunResult<HydroOutput> {
    let grid = FieldGrid::from_particles(&init.x, Some(&init.p), cfg.grid_size, cfg.bandwidth_cells)?;
    let u_plus = u_plus_hydro_field(&grid, cfg.g);
    Ok(HydroOutput { grid, u_plus })
}

/// One output time of the worldline comparison.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldlinePoint {
    pub t: f64,
    pub soliton: f64,
    /// Midpoint of the smallest particle gap: the peak of the discrete density.
    pub density_peak: f64,
    pub mean_spacing: f64,
    /// Whether the soliton lies inside the bulk of the cloud, between the
    /// particles of rank `N/10` from either end.
    pub inside: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldlineCheck {
    pub points: Vec<WorldlinePoint>,
    pub checked: usize,
    /// Max of `|Re z - peak| / spacing` over the checked points.
    pub max_offset: f64,
    pub passed: bool,
}

/// Compares the density peak with `Re z` of soliton `soliton` at every
/// output time of a dual trajectory with `n` particles. Only times with the
/// soliton inside the cloud are checked: once it has left, the peak sits at
/// the centre of the undisturbed background.
pub fn track_worldline(traj: &Trajectory, n: usize, soliton: usize) -> WorldlineCheck {
    let k = n / 10;
    let mut points = Vec::with_capacity(traj.len());
    for (&t, y) in traj.times.iter().zip(&traj.states) {
        let mut xs: Vec<f64> = (0..n).map(|j| y[2 * j]).collect();
        xs.sort_by(f64::total_cmp);
        let zr = y[2 * (n + soliton)];
        let (gap_at, _) = xs
            .windows(2)
            .enumerate()
            .map(|(i, w)| (i, w[1] - w[0]))
            .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best });
        let peak = if n >= 2 { 0.5 * (xs[gap_at] + xs[gap_at + 1]) } else { xs[0] };
        let spacing = if n >= 2 { (xs[n - 1] - xs[0]) / (n - 1) as f64 } else { 0.0 };
        let inside = n >= 2 && zr >= xs[k] && zr <= xs[n - 1 - k];
        points.push(WorldlinePoint {
            t,
            soliton: zr,
            density_peak: peak,
            mean_spacing: spacing,
            inside,
        });
    }
    let checked: Vec<&WorldlinePoint> = points.iter().filter(|p| p.inside).collect();
    let max_offset = checked
        .iter()
        .map(|p| (p.soliton - p.density_peak).abs() / p.mean_spacing)
        .fold(0.0, f64::max);
    let passed = checked.len() >= WORLDLINE_MIN_CHECKED && max_offset <= 1.0;
    WorldlineCheck {
        checked: checked.len(),
        points,
        max_offset,
        passed,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Preset {
    Fig1OneSoliton,
    Fig1TwoSoliton,
}

impl FromStr for Preset {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "fig1-one-soliton" => Ok(Preset::Fig1OneSoliton),
            "fig1-two-soliton" => Ok(Preset::Fig1TwoSoliton),
            other => Err(Error::InvalidSpec(format!(
                "unknown preset '{other}' (expected fig1-one-soliton or fig1-two-soliton)"
            ))),
        }
    }
}

const PRESET_DEPTH: f64 = 0.0239;

impl Preset {
    pub fn name(self) -> &'static str {
        match self {
            Preset::Fig1OneSoliton => "fig1-one-soliton",
            Preset::Fig1TwoSoliton => "fig1-two-soliton",
        }
    }

    /// Quartic well `w = x + 0.06 x^2` with 31 particles at unit coupling.
    pub fn config(self) -> ScenarioConfig {
        let solitons = match self {
            Preset::Fig1OneSoliton => vec![[0.0, PRESET_DEPTH]],
            Preset::Fig1TwoSoliton => vec![[0.0, PRESET_DEPTH], [0.0, -PRESET_DEPTH]],
        };
        ScenarioConfig {
            kernel: KernelKind::Rational,
            g: 1.0,
            c0: 0.0,
            c1: 1.0,
            c2: 0.06,
            c3: 0.0,
            n_particles: 31,
            solitons,
            t_end: 0.3,
            output_every: 0.01,
            rtol: 1e-10,
            atol: 1e-10,
            eta: 0.02,
            init_scheme: FlowScheme::LinearlyImplicit,
            ..ScenarioConfig::default()
        }
    }

    /// Reference initial velocity of the first soliton.
    pub fn reference_zdot(self) -> C64 {
        match self {
            Preset::Fig1OneSoliton => C64::new(-43.0768, -0.00103378),
            Preset::Fig1TwoSoliton => C64::new(-64.297, -0.00129161),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PresetCheck {
    pub preset: String,
    pub reference_zdot: C64,
    pub computed_zdot: C64,
    pub rel_err_re: f64,
    pub rel_err_im: f64,
    pub zdot_passed: bool,
    /// `|zdot_2 + conj(zdot_1)|`, two-soliton preset only.
    pub conjugate_residual: Option<f64>,
    pub worldline: Option<WorldlineCheck>,
    pub passed: bool,
}

impl std::fmt::Display for PresetCheck {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = |ok: bool| if ok { "PASS" } else { "FAIL" };
        writeln!(
            f,
            "{}: zdot_1 = {:.6} {:+.8}i, reference {} {:+}i, rel err re {:.2e} im {:.2e}: {}",
            self.preset,
            self.computed_zdot.re,
            self.computed_zdot.im,
            self.reference_zdot.re,
            self.reference_zdot.im,
            self.rel_err_re,
            self.rel_err_im,
            verdict(self.zdot_passed)
        )?;
        if let Some(c) = self.conjugate_residual {
            writeln!(f, "conjugate pair |zdot_2 + conj(zdot_1)| = {c:.2e}: {}", verdict(c <= CONJUGATE_TOL))?;
        }
        if let Some(w) = &self.worldline {
            writeln!(
                f,
                "worldline: {} times inside the cloud, max |Re z - peak| = {:.3} spacings: {}",
                w.checked,
                w.max_offset,
                verdict(w.passed)
            )?;
        }
        write!(f, "{}", verdict(self.passed))
    }
}

/// Compares a preset run with its reference values.
pub fn check_preset(preset: Preset, init: &InitReport, dual: &Trajectory) -> PresetCheck {
    let reference = preset.reference_zdot();
    let computed = init.zdot[0];
    let rel_err_re = ((computed.re - reference.re) / reference.re).abs();
    let rel_err_im = ((computed.im - reference.im) / reference.im).abs();
    let zdot_passed = rel_err_re <= PRESET_ZDOT_TOL && rel_err_im <= PRESET_ZDOT_TOL;
    let (conjugate_residual, worldline) = match preset {
        Preset::Fig1OneSoliton => (None, Some(track_worldline(dual, init.x.len(), 0))),
        Preset::Fig1TwoSoliton => (Some((init.zdot[1] + computed.conj()).norm()), None),
    };
    let passed = zdot_passed
        && conjugate_residual.is_none_or(|c| c <= CONJUGATE_TOL)
        && worldline.as_ref().is_none_or(|w| w.passed);
    PresetCheck {
        preset: preset.name().to_string(),
        reference_zdot: reference,
        computed_zdot: computed,
        rel_err_re,
        rel_err_im,
        zdot_passed,
        conjugate_residual,
        worldline,
        passed,
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn table(header: Vec<String>, rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(&header).expect("in-memory write");
    for row in rows {
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii table")
}

/// Trajectory table: `t`, the real parts of the particle positions, then
/// `Re z`, `Im z` of each soliton.
pub fn trajectory_csv(traj: &Trajectory, n: usize, m: usize) -> String {
    let mut header = vec!["t".to_string()];
    header.extend((1..=n).map(|j| format!("x_{j}")));
    for a in 1..=m {
        header.push(format!("Re_z_{a}"));
        header.push(format!("Im_z_{a}"));
    }
    let rows = traj.times.iter().zip(&traj.states).map(|(&t, y)| {
        let mut row = vec![num(t)];
        row.extend((0..n).map(|j| num(y[2 * j])));
        for a in 0..m {
            row.push(num(y[2 * (n + a)]));
            row.push(num(y[2 * (n + a) + 1]));
        }
        row
    });
    table(header, rows)
}

/// Field table: grid point, density, velocity, Hilbert transform and `u+`
/// (`NaN` where the density vanishes).
pub fn fields_csv(out: &HydroOutput) -> String {
    let g = &out.grid;
    let header = ["x", "rho", "v", "rho_h", "re_u_plus", "im_u_plus"]
        .map(String::from)
        .to_vec();
    let rows = (0..g.len()).map(|i| {
        let (ur, ui) = out.u_plus[i].map_or((f64::NAN, f64::NAN), |u| (u.re, u.im));
        [g.x[i], g.rho[i], g.v[i], g.rho_h[i], ur, ui].map(num).to_vec()
    });
    table(header, rows)
}

pub fn write_file(path: &Path, contents: &str) -> RunResult<()> {
    fs::write(path, contents).map_err(|source| RunError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> RunResult<()> {
    let mut text = serde_json::to_string_pretty(value).expect("report types serialize");
    text.push('\n');
    write_file(path, &text)
}

fn create_dir(dir: &Path) -> RunResult<()> {
    fs::create_dir_all(dir).map_err(|source| RunError::Io {
        path: dir.to_path_buf(),
        source,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Init,
    Evolve,
    Hydro,
    Preset(Preset),
}

/// Text for the terminal and whether all checks of the command passed.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub report: String,
    pub passed: bool,
}

#[derive(Serialize)]
struct PresetSummary<'a> {
    #[serde(flatten)]
    evolve: &'a EvolveSummary,
    check: &'a PresetCheck,
}

fn warn_if_unstable(cfg: &ScenarioConfig) -> String {
    cfg.spec()
        .ok()
        .and_then(|s| s.stability_warning())
        .map(|w| format!("warning: {w}\n"))
        .unwrap_or_default()
}

/// Runs `cmd` for `cfg`, writing its files into `out`.
pub fn run(cmd: Command, cfg: &ScenarioConfig, out: &Path) -> RunResult<Outcome> {
    let cfg = match cmd {
        Command::Preset(p) => p.config(),
        _ => cfg.clone(),
    };
    cfg.validate()?;
    create_dir(out)?;
    match cmd {
        Command::Verify => {
            let report = verify(&cfg)?;
            write_json(&out.join("verify_report.json"), &report)?;
            Ok(Outcome {
                report: report.to_string(),
                passed: report.passed,
            })
        }
        Command::Init => {
            let mut text = warn_if_unstable(&cfg);
            let init = initialize(&cfg)?;
            write_json(&out.join("init_report.json"), &init)?;
            writeln!(
                text,
                "relaxed {} particles in {} iterations, constraint residual {:.3e}",
                init.x.len(),
                init.iterations,
                init.constraint_residual
            )
            .unwrap();
            for (a, zd) in init.zdot.iter().enumerate() {
                writeln!(text, "zdot_{} = {:.10} {:+.10}i", a + 1, zd.re, zd.im).unwrap();
            }
            Ok(Outcome {
                report: text.trim_end().to_string(),
                passed: true,
            })
        }
        Command::Evolve | Command::Preset(_) => {
            let mut text = warn_if_unstable(&cfg);
            let init = initialize(&cfg)?;
            write_json(&out.join("init_report.json"), &init)?;
            let ev = evolve(&cfg, &init)?;
            let spec = cfg.spec()?;
            write_file(
                &out.join("trajectory.csv"),
                &trajectory_csv(&ev.dual, spec.n_particles, spec.n_solitons),
            )?;
            let s = &ev.summary;
            writeln!(
                text,
                "t_end {}: energy drift {:.3e}, max |Im x| {:.3e}, constraint residual {:.3e}",
                s.t_end, s.energy_drift, s.max_im_x, s.constraint_residual
            )
            .unwrap();
            if let (Some(dx), Some(de)) = (s.newtonian_max_dx, s.newtonian_energy_drift) {
                writeln!(text, "newtonian: max |dx| {dx:.3e}, energy drift {de:.3e}").unwrap();
            }
            let Command::Preset(preset) = cmd else {
                write_json(&out.join("summary.json"), s)?;
                return Ok(Outcome {
                    report: text.trim_end().to_string(),
                    passed: true,
                });
            };
            let check = check_preset(preset, &init, &ev.dual);
            write_json(
                &out.join("summary.json"),
                &PresetSummary {
                    evolve: s,
                    check: &check,
                },
            )?;
            write_file(&out.join("fields.csv"), &fields_csv(&hydro(&cfg, &init)?))?;
            write!(text, "{check}").unwrap();
            Ok(Outcome {
                report: text,
                passed: check.passed,
            })
        }
        Command::Hydro => {
            let init = initialize(&cfg)?;
            let fields = hydro(&cfg, &init)?;
            write_file(&out.join("fields.csv"), &fields_csv(&fields))?;
            Ok(Outcome {
                report: format!(
                    "{} grid points on [{:.6}, {:.6}], density mass {:.6}",
                    fields.grid.len(),
                    fields.grid.x[0],
                    fields.grid.x[fields.grid.len() - 1],
                    fields.grid.mass()
                ),
                passed: true,
            })
        }
    }
}
