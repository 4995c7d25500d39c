//! Numerical residuals of the functional equations behind the kernel and
//! prepotential families.
//!
//! Three identities are checked:
//!
//! * three-body: `f(x) f(x+y) - f(x) f(y) + f(x+y) f(y) = C` for `f = g K`,
//! * kernel: `f^2 - g f' = C'` for `f = -g K`,
//! * external decomposition: `(w(x_b) - w(x_c)) g K(x_b - x_c) - v(x_b) - v(x_c)`
//!   depends on `x_b - x_c` only. This is tested by translation invariance, so
//!   no additive constant of the two-body remainder has to be guessed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::error::Result;
use crate::model::{KernelKind, ModelSpec, C64};

/// Guard band around kernel singularities used by the samplers.
pub const GUARD: f64 = 0.05;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResidualReport {
    pub max_abs_residual: f64,
    pub sample_count: usize,
    pub worst_point: Vec<f64>,
}

impl ResidualReport {
    fn empty() -> Self {
        ResidualReport {
            max_abs_residual: 0.0,
            sample_count: 0,
            worst_point: Vec::new(),
        }
    }

    fn record(&mut self, residual: f64, point: &[f64]) {
        self.sample_count += 1;
        if residual > self.max_abs_residual || self.worst_point.is_empty() {
            self.max_abs_residual = residual.max(self.max_abs_residual);
            self.worst_point = point.to_vec();
        }
    }
}

fn f_plus(spec: &ModelSpec, x: f64) -> Result<f64> {
    Ok(spec.g * spec.kernel_real(x)?)
}

pub fn residual_three_body(spec: &ModelSpec, x: f64, y: f64) -> Result<f64> {
    let fx = f_plus(spec, x)?;
    let fy = f_plus(spec, y)?;
    let fxy = f_plus(spec, x + y)?;
    let c = spec.kernel.three_body_constant(spec.g);
    Ok((fx * fxy - fx * fy + fxy * fy - c).abs())
}

pub fn residual_kernel_identity(spec: &ModelSpec, x: f64) -> Result<f64> {
    let g = spec.g;
    let k = spec.kernel_real(x)?;
    let f = -g * k;
    let f_prime = -g * spec.kernel_prime(C64::new(x, 0.0))?.re;
    // same constant as the three-body identity: 0, -g^2, +g^2
    let c = spec.kernel.three_body_constant(g);
    Ok((f * f - g * f_prime - c).abs())
}

/// Translation-invariance residual of the two-body remainder for the
/// spec's own prepotential.
pub fn residual_external_decomposition(
    spec: &ModelSpec,
    x_b: f64,
    x_c: f64,
    shift: f64,
) -> Result<f64> {
    residual_external_decomposition_with(spec, |x| spec.prepot_w_real(x), x_b, x_c, shift)
}

/// Same check with an arbitrary prepotential `w`, paired with the spec's
/// `v`. An inadmissible `w` shows up as a nonzero residual.
pub fn residual_external_decomposition_with<F>(
    spec: &ModelSpec,
    w: F,
    x_b: f64,
    x_c: f64,
    shift: f64,
) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let remainder = |b: f64, c: f64| -> Result<f64> {
        let f = f_plus(spec, b - c)?;
        let v = |x: f64| spec.v_term(C64::new(x, 0.0)).re;
        Ok((w(b) - w(c)) * f - v(b) - v(c))
    };
    let r0 = remainder(x_b, x_c)?;
    let r1 = remainder(x_b + shift, x_c + shift)?;
    Ok((r1 - r0).abs())
}

/// Natural sampling domain of kernel arguments for each family.
fn sample_argument(kind: KernelKind, rng: &mut impl Rng) -> f64 {
    match kind {
        KernelKind::Rational => loop {
            let x: f64 = rng.random_range(-10.0..10.0);
            if x.abs() >= GUARD {
                return x;
            }
        },
        KernelKind::Trigonometric => rng.random_range(GUARD..PI - GUARD),
        KernelKind::Hyperbolic => {
            let mag = rng.random_range(GUARD..10.0);
            if rng.random_bool(0.5) {
                mag
            } else {
                -mag
            }
        }
    }
}

fn admissible(spec: &ModelSpec, x: f64) -> bool {
    spec.singular_distance(C64::new(x, 0.0)) >= GUARD
}

/// Extra term added to `w` by [`external_decomposition_suite`] for negative
/// controls: `amplitude * x^4` is outside every admissible family.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Tamper {
    pub quartic: f64,
}

pub fn three_body_suite(spec: &ModelSpec, samples: usize, seed: u64) -> Result<ResidualReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport::empty();
    while report.sample_count < samples {
        let x = sample_argument(spec.kernel, &mut rng);
        let y = sample_argument(spec.kernel, &mut rng);
        if !admissible(spec, x + y) {
            continue;
        }
        report.record(residual_three_body(spec, x, y)?, &[x, y]);
    }
    Ok(report)
}

pub fn kernel_identity_suite(spec: &ModelSpec, samples: usize, seed: u64) -> Result<ResidualReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport::empty();
    while report.sample_count < samples {
        let x = sample_argument(spec.kernel, &mut rng);
        report.record(residual_kernel_identity(spec, x)?, &[x]);
    }
    Ok(report)
}

/// Samples `(x_b, x_c, shift)` with separations in the family's domain.
pub fn external_decomposition_suite(
    spec: &ModelSpec,
    samples: usize,
    seed: u64,
    tamper: Tamper,
) -> Result<ResidualReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = ResidualReport::empty();
    let span = match spec.kernel {
        KernelKind::Rational => 5.0,
        KernelKind::Trigonometric => PI / 2.0,
        KernelKind::Hyperbolic => 2.0,
    };
    let w = |x: f64| spec.prepot_w_real(x) + tamper.quartic * x.powi(4);
    while report.sample_count < samples {
        let x_b = rng.random_range(-span..span);
        let x_c = rng.random_range(-span..span);
        let shift = rng.random_range(-1.0..1.0);
        if !admissible(spec, x_b - x_c) {
            continue;
        }
        let r = residual_external_decomposition_with(spec, w, x_b, x_c, shift)?;
        report.record(r, &[x_b, x_c, shift]);
    }
    Ok(report)
}
