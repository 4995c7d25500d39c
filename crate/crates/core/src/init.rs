//! Soliton initial data: particle positions solving the reality constraint,
//! found by viscous relaxation of the electrostatic energy, then momenta and
//! soliton velocities read off the dual flow.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::dynamics::dual_velocities;
use crate::error::{Error, Result};
use crate::model::{ln_abs_sin, ln_abs_sinh, KernelKind, ModelSpec, C64};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitReport {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub z: Vec<C64>,
    pub zdot: Vec<C64>,
    pub final_u: f64,
    pub iterations: usize,
    pub constraint_residual: f64,
    #[serde(skip)]
    pub u_trace: Vec<f64>,
}

/// Pseudo-time discretisation of the relaxation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlowScheme {
    /// Explicit Euler steps `x -= gamma dt r`.
    #[default]
    Explicit,
    /// Linearised backward Euler, `(1 + gamma dt H) dx = -gamma dt r`, with
    /// `H` the Hessian of `U`. Tends to Newton's method as `dt` grows.
    LinearlyImplicit,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FlowOptions {
    pub gamma: f64,
    pub tol: f64,
    pub max_iter: usize,
    pub scheme: FlowScheme,
    /// Record `U` after every accepted step.
    pub trace: bool,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            gamma: 1.0,
            tol: 1e-10,
            max_iter: 1_000_000,
            scheme: FlowScheme::Explicit,
            trace: false,
        }
    }
}

fn ln_abs_kernel_potential(kind: KernelKind, d: C64) -> f64 {
    match kind {
        KernelKind::Rational => d.norm().ln(),
        KernelKind::Trigonometric => ln_abs_sin(d),
        KernelKind::Hyperbolic => ln_abs_sinh(d),
    }
}

fn check_points(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Result<()> {
    let n = x.len();
    for j in 0..n {
        for k in (j + 1)..n {
            if spec.singular_distance(C64::new(x[j] - x[k], 0.0)) < spec.singular_eps {
                return Err(Error::CoincidentPoints { i: j, j: k });
            }
        }
        for (a, za) in z.iter().enumerate() {
            if spec.singular_distance(C64::new(x[j], 0.0) - za) < spec.singular_eps {
                return Err(Error::CoincidentPoints { i: j, j: n + a });
            }
        }
    }
    Ok(())
}

/// `U = sum W(x_j) - g sum_{j<k} L(x_jk) + (g/2) sum_{j,a} [L(x_j - z_a) + L(x_j - conj z_a)]`
/// with `L = ln|.|`, `ln|sin .|` or `ln|sinh .|`.
pub fn electrostatic_u(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Result<f64> {
    check_points(spec, x, z)?;
    Ok(electrostatic_u_unchecked(spec, x, z))
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

// Compensated so that the descent test stays meaningful when |U| is large.
fn electrostatic_u_unchecked(spec: &ModelSpec, x: &[f64], z: &[C64]) -> f64 {
    let g = spec.g;
    let lk = |d: C64| ln_abs_kernel_potential(spec.kernel, d);
    let mut u = Compensated::default();
    for (j, &xj) in x.iter().enumerate() {
        u.add(spec.prepot_big_w(xj));
        for &xk in &x[j + 1..] {
            u.add(-g * lk(C64::new(xj - xk, 0.0)));
        }
        for za in z {
            let d = C64::new(xj, 0.0) - za;
            u.add(0.5 * g * lk(d));
            u.add(0.5 * g * lk(d.conj()));
        }
    }
    u.value()
}

/// `r_j = dU/dx_j = w(x_j) - g sum_k K(x_jk) + (g/2) sum_a [K(x_j - z_a) + K(x_j - conj z_a)]`.
pub fn constraint_residual(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Result<Vec<f64>> {
    check_points(spec, x, z)?;
    Ok(constraint_residual_unchecked(spec, x, z))
}

fn constraint_residual_unchecked(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Vec<f64> {
    let g = spec.g;
    let n = x.len();
    let mut r: Vec<f64> = x.iter().map(|&v| spec.prepot_w_real(v)).collect();
    for j in 0..n {
        for k in (j + 1)..n {
            let kk = g * spec.kernel_unchecked(C64::new(x[j] - x[k], 0.0)).re;
            r[j] -= kk;
            r[k] += kk;
        }
        for za in z {
            let d = C64::new(x[j], 0.0) - za;
            r[j] += 0.5 * g * (spec.kernel_unchecked(d) + spec.kernel_unchecked(d.conj())).re;
        }
    }
    r
}

/// Hessian of `U`, the Jacobian of [`constraint_residual`].
pub fn electrostatic_hessian(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Result<DMatrix<f64>> {
    check_points(spec, x, z)?;
    Ok(hessian_unchecked(spec, x, z))
}

fn hessian_unchecked(spec: &ModelSpec, x: &[f64], z: &[C64]) -> DMatrix<f64> {
    let g = spec.g;
    let n = x.len();
    let kp = |d: C64| spec.kernel_prime_from(spec.kernel_unchecked(d));
    let mut h = DMatrix::<f64>::zeros(n, n);
    for j in 0..n {
        h[(j, j)] += spec.prepot_w_prime(C64::new(x[j], 0.0)).re;
        for k in (j + 1)..n {
            let v = g * kp(C64::new(x[j] - x[k], 0.0)).re;
            h[(j, k)] = v;
            h[(k, j)] = v;
            h[(j, j)] -= v;
            h[(k, k)] -= v;
        }
        for za in z {
            let d = C64::new(x[j], 0.0) - za;
            h[(j, j)] += 0.5 * g * (kp(d) + kp(d.conj())).re;
        }
    }
    h
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().map(|r| r.abs()).fold(0.0, f64::max)
}

fn strictly_increasing(x: &[f64]) -> bool {
    x.windows(2).all(|w| w[0] < w[1])
}

/// `p_j = (i g / 2) sum_a [K(x_j - z_a) - K(x_j - conj z_a)]`, real by
/// construction.
pub fn momenta_from_solitons(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Result<Vec<f64>> {
    check_points(spec, x, z)?;
    let g = spec.g;
    Ok(x
        .iter()
        .map(|&xj| {
            z.iter()
                .map(|za| {
                    let d = C64::new(xj, 0.0) - za;
                    // (i/2)(K - conj K) = -Im K
                    -g * spec.kernel_unchecked(d).im
                })
                .sum()
        })
        .collect())
}

/// Soliton velocities of the dual flow at real particle positions `x`.
pub fn soliton_velocities(spec: &ModelSpec, x: &[f64], z: &[C64]) -> Result<Vec<C64>> {
    check_points(spec, x, z)?;
    let xc: Vec<C64> = x.iter().map(|&v| C64::new(v, 0.0)).collect();
    Ok(dual_velocities(spec, &xc, z)?.1)
}

/// Roots of the `n`-th Hermite polynomial scaled by `sqrt(g / omega)`, from
/// the eigenvalues of the three-term-recurrence Jacobi matrix.
pub fn harmonic_equilibrium_reference(n: usize, omega: f64, g: f64) -> Result<Vec<f64>> {
    if n == 0 || !(omega > 0.0) || !(g > 0.0) {
        return Err(Error::InvalidArgument(
            "need n >= 1, omega > 0 and g > 0".into(),
        ));
    }
    let mut jac = DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let b = (k as f64 / 2.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let mut roots: Vec<f64> = SymmetricEigen::new(jac).eigenvalues.iter().copied().collect();
    roots.sort_by(f64::total_cmp);
    // enforce the exact mirror symmetry of the root set
    let sym: Vec<f64> = (0..n).map(|i| 0.5 * (roots[i] - roots[n - 1 - i])).collect();
    let scale = (g / omega).sqrt();
    Ok(sym.into_iter().map(|r| r * scale).collect())
}

/// Deterministic starting configuration: scaled Hermite roots centred on a
/// minimum of `W`, with the local curvature `w'` playing the role of `omega`.
pub fn default_initial_guess(spec: &ModelSpec) -> Result<Vec<f64>> {
    let n = spec.n_particles;
    let g = spec.g.abs();
    let (center, omega) = match spec.kernel {
        KernelKind::Rational if spec.c3 == 0.0 && spec.c2 != 0.0 => {
            let disc = spec.c1 * spec.c1 - 4.0 * spec.c0 * spec.c2;
            if disc <= 0.0 {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
            ((-spec.c1 + disc.sqrt()) / (2.0 * spec.c2), disc.sqrt())
        }
        KernelKind::Rational if spec.c3 == 0.0 => {
            if spec.c1 <= 0.0 {
                return Err(Error::NonConvergence {
                    iterations: 0,
                    residual: f64::INFINITY,
                });
            }
            (-spec.c0 / spec.c1, spec.c1)
        }
        _ => scan_well(spec)?,
    };
    let roots = harmonic_equilibrium_reference(n, 1.0, 1.0)?;
    let mut scale = (g / omega).sqrt();
    if spec.kernel == KernelKind::Trigonometric {
        // keep the cloud inside one period
        let edge = roots.last().copied().unwrap_or(0.0).max(1e-300);
        scale = scale.min(0.45 * std::f64::consts::PI / edge);
    }
    Ok(roots.iter().map(|r| center + scale * r).collect())
}

// Lowest local minimum of W on a grid, refined by bisection on w.
fn scan_well(spec: &ModelSpec) -> Result<(f64, f64)> {
    let (lo, hi) = match spec.kernel {
        KernelKind::Trigonometric => (-std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
        _ => (-10.0, 10.0),
    };
    let steps = 4000;
    let h = (hi - lo) / steps as f64;
    let mut best: Option<(f64, f64)> = None;
    for i in 0..steps {
        let a = lo + i as f64 * h;
        let b = a + h;
        let (wa, wb) = (spec.prepot_w_real(a), spec.prepot_w_real(b));
        if wa < 0.0 && wb >= 0.0 {
            let (mut l, mut r) = (a, b);
            for _ in 0..100 {
                let m = 0.5 * (l + r);
                if spec.prepot_w_real(m) < 0.0 {
                    l = m;
                } else {
                    r = m;
                }
            }
            let x = 0.5 * (l + r);
            let u = spec.prepot_big_w(x);
            if best.is_none_or(|(_, bu)| u < bu) {
                best = Some((x, u));
            }
        }
    }
    let (x, _) = best.ok_or(Error::NonConvergence {
        iterations: 0,
        residual: f64::INFINITY,
    })?;
    let curv = spec.prepot_w_prime(C64::new(x, 0.0)).re;
    Ok((x, curv.max(1e-6)))
}

/// Relaxes `dx/dtau = -gamma dU/dx` from `x0` until `max |r_j| < tol`,
/// then attaches momenta and soliton velocities.
pub fn gradient_flow(
    spec: &ModelSpec,
    z: &[C64],
    x0: &[f64],
    opts: &FlowOptions,
) -> Result<InitReport> {
    spec.check_soliton_mode()?;
    if !(opts.gamma > 0.0) || !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument("gamma and tol must be positive".into()));
    }
    if x0.len() != spec.n_particles || z.len() != spec.n_solitons {
        return Err(Error::InvalidArgument(format!(
            "got {} particles and {} solitons, spec expects {} and {}",
            x0.len(),
            z.len(),
            spec.n_particles,
            spec.n_solitons
        )));
    }
    if !strictly_increasing(x0) {
        return Err(Error::NonMonotone(
            x0.windows(2).position(|w| w[0] >= w[1]).unwrap_or(0),
        ));
    }
    if z.iter().any(|za| za.im == 0.0) {
        return Err(Error::RealSoliton);
    }
    check_points(spec, x0, z)?;

    let mut x = x0.to_vec();
    let mut u = electrostatic_u_unchecked(spec, &x, z);
    let mut r = constraint_residual_unchecked(spec, &x, z);
    let mut rnorm2: f64 = r.iter().map(|v| v * v).sum();
    let mut rmax = max_abs(&r);
    let mut trace = Vec::new();
    if opts.trace {
        trace.push(u);
    }

    // initial pseudo-time step from the spacing and the force scale
    let spacing = x
        .windows(2)
        .map(|w| w[1] - w[0])
        .fold(f64::INFINITY, f64::min)
        .min(1.0);
    let mut dt = 0.1 * spacing / (opts.gamma * rmax.max(1e-300));
    let mut iterations = 0;
    let mut trial = vec![0.0; x.len()];

    while rmax >= opts.tol {
        if iterations >= opts.max_iter || !u.is_finite() || !rmax.is_finite() {
            return Err(Error::NonConvergence {
                iterations,
                residual: rmax,
            });
        }
        iterations += 1;
        let step = opts.gamma * dt;
        // predicted first-order change of U along the step
        let slope = match opts.scheme {
            FlowScheme::Explicit => {
                for ((t, xi), ri) in trial.iter_mut().zip(&x).zip(&r) {
                    *t = xi - step * ri;
                }
                -step * rnorm2
            }
            FlowScheme::LinearlyImplicit => {
                let n = x.len();
                let mut m = hessian_unchecked(spec, &x, z) * step;
                for i in 0..n {
                    m[(i, i)] += 1.0;
                }
                let rhs = DVector::from_iterator(n, r.iter().map(|v| -step * v));
                match m.lu().solve(&rhs) {
                    Some(dx) => {
                        for i in 0..n {
                            trial[i] = x[i] + dx[i];
                        }
                        dx.iter().zip(&r).map(|(d, ri)| d * ri).sum()
                    }
                    None => f64::NAN,
                }
            }
        };
        let ok_order = slope.is_finite()
            && slope <= 0.0
            && strictly_increasing(&trial)
            && check_points(spec, &trial, z).is_ok()
            && trial.iter().all(|v| v.is_finite());
        if ok_order {
            let u_new = electrostatic_u_unchecked(spec, &trial, z);
            let r_new = constraint_residual_unchecked(spec, &trial, z);
            let rn2: f64 = r_new.iter().map(|v| v * v).sum();
            let armijo = u_new <= u + 1e-4 * slope;
            let flat = u_new <= u + 1e-12 && rn2 < rnorm2;
            if u_new.is_finite() && (armijo || flat) {
                std::mem::swap(&mut x, &mut trial);
                u = u_new;
                r = r_new;
                rnorm2 = rn2;
                rmax = max_abs(&r);
                if opts.trace {
                    trace.push(u);
                }
                dt *= match opts.scheme {
                    FlowScheme::Explicit => 1.2,
                    FlowScheme::LinearlyImplicit => 2.0,
                };
                continue;
            }
        }
        dt *= 0.5;
        if dt * opts.gamma * rmax < 1e-300 {
            return Err(Error::NonConvergence {
                iterations,
                residual: rmax,
            });
        }
    }

    let p = momenta_from_solitons(spec, &x, z)?;
    let zdot = soliton_velocities(spec, &x, z)?;
    Ok(InitReport {
        x,
        p,
        z: z.to_vec(),
        zdot,
        final_u: u,
        iterations,
        constraint_residual: rmax,
        u_trace: trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn harmonic(n: usize, m: usize) -> ModelSpec {
        ModelSpec::harmonic(1.0, 1.0, n, m).unwrap()
    }

    #[test]
    fn hermite_small_cases() {
        assert_eq!(harmonic_equilibrium_reference(1, 1.0, 1.0).unwrap(), vec![0.0]);
        let r2 = harmonic_equilibrium_reference(2, 1.0, 1.0).unwrap();
        assert!((r2[0] + FRAC_1_SQRT_2).abs() < 1e-15 && (r2[1] - FRAC_1_SQRT_2).abs() < 1e-15);
        let r3 = harmonic_equilibrium_reference(3, 1.0, 1.0).unwrap();
        let a = 1.5f64.sqrt();
        assert!((r3[0] + a).abs() < 1e-14 && r3[1].abs() < 1e-15 && (r3[2] - a).abs() < 1e-14);
    }

    #[test]
    fn single_and_pair_energies() {
        assert_eq!(electrostatic_u(&harmonic(1, 0), &[2.0], &[]).unwrap(), 2.0);
        let a = 0.9;
        let u = electrostatic_u(&harmonic(2, 0), &[-a, a], &[]).unwrap();
        assert!((u - (a * a - (2.0 * a).ln())).abs() < 1e-15);
        let r = constraint_residual(&harmonic(2, 0), &[-FRAC_1_SQRT_2, FRAC_1_SQRT_2], &[]).unwrap();
        assert!(max_abs(&r) < 1e-15);
    }

    #[test]
    fn hermite_roots_satisfy_constraint() {
        let x = harmonic_equilibrium_reference(20, 1.0, 1.0).unwrap();
        let r = constraint_residual(&harmonic(20, 0), &x, &[]).unwrap();
        assert!(max_abs(&r) < 1e-12, "{}", max_abs(&r));
    }

    #[test]
    fn residual_is_gradient_of_u() {
        for kind in KernelKind::ALL {
            let spec = ModelSpec::new(kind, 0.8, [0.1, 0.7, 0.2, 0.0], 4, 1).unwrap();
            let x = [-0.9, -0.2, 0.35, 1.1];
            let z = [C64::new(0.1, 0.4)];
            let r = constraint_residual(&spec, &x, &z).unwrap();
            let h = 1e-6;
            for j in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (electrostatic_u(&spec, &xp, &z).unwrap()
                    - electrostatic_u(&spec, &xm, &z).unwrap())
                    / (2.0 * h);
                assert!((fd - r[j]).abs() < 1e-7, "{kind:?} j={j}: {fd} vs {}", r[j]);
            }
        }
    }

    #[test]
    fn hessian_matches_residual_differences() {
        for kind in KernelKind::ALL {
            let spec = ModelSpec::new(kind, 0.8, [0.1, 0.7, 0.2, 0.0], 4, 1).unwrap();
            let x = [-0.9, -0.2, 0.35, 1.1];
            let z = [C64::new(0.1, 0.4)];
            let hess = electrostatic_hessian(&spec, &x, &z).unwrap();
            let h = 1e-6;
            for k in 0..4 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let rp = constraint_residual(&spec, &xp, &z).unwrap();
                let rm = constraint_residual(&spec, &xm, &z).unwrap();
                for j in 0..4 {
                    let fd = (rp[j] - rm[j]) / (2.0 * h);
                    assert!((fd - hess[(j, k)]).abs() < 1e-6 * fd.abs().max(1.0), "{kind:?}");
                }
            }
        }
    }

    #[test]
    fn implicit_scheme_reaches_same_equilibrium() {
        let spec = ModelSpec::new(KernelKind::Rational, 1.0, [0.0, 1.0, 0.06, 0.0], 31, 1).unwrap();
        let z = [C64::new(0.0, 0.0239)];
        let x0 = default_initial_guess(&spec).unwrap();
        let opts = FlowOptions {
            scheme: FlowScheme::LinearlyImplicit,
            tol: 1e-12,
            trace: true,
            ..FlowOptions::default()
        };
        let imp = gradient_flow(&spec, &z, &x0, &opts).unwrap();
        let exp = gradient_flow(&spec, &z, &x0, &FlowOptions::default()).unwrap();
        assert!(imp.iterations < 500, "{}", imp.iterations);
        assert!(imp.u_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        let dev = imp
            .x
            .iter()
            .zip(&exp.x)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-8, "{dev}");
    }

    #[test]
    fn flow_recovers_hermite_roots() {
        let spec = harmonic(10, 0);
        let x0: Vec<f64> = (0..10).map(|i| -3.0 + 6.0 * i as f64 / 9.0).collect();
        let opts = FlowOptions {
            tol: 1e-12,
            trace: true,
            ..FlowOptions::default()
        };
        let rep = gradient_flow(&spec, &[], &x0, &opts).unwrap();
        let oracle = harmonic_equilibrium_reference(10, 1.0, 1.0).unwrap();
        let dev = rep
            .x
            .iter()
            .zip(&oracle)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(dev < 1e-10, "{dev}");
        assert!(rep.u_trace.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(rep.p.iter().all(|&p| p == 0.0));
    }

    #[test]
    fn purely_cubic_prepotential_has_no_equilibrium() {
        let spec = ModelSpec::new(KernelKind::Rational, 1.0, [0.0, 0.0, 1.0, 0.0], 3, 0).unwrap();
        let opts = FlowOptions {
            max_iter: 20_000,
            ..FlowOptions::default()
        };
        let err = gradient_flow(&spec, &[], &[-1.0, 0.0, 1.0], &opts).unwrap_err();
        assert!(matches!(err, Error::NonConvergence { .. }), "{err:?}");
        assert!(err.to_string().contains("c1^2 > 4 c0 c2"));
    }

    #[test]
    fn momentum_below_soliton() {
        let g = 0.7;
        let spec = ModelSpec::new(KernelKind::Rational, g, [0.0, 1.0, 0.0, 0.0], 1, 1).unwrap();
        let (a, b) = (0.4, 0.25);
        let p = momenta_from_solitons(&spec, &[a], &[C64::new(a, b)]).unwrap();
        assert!((p[0] + g / b).abs() < 1e-14);
        let far = momenta_from_solitons(&spec, &[a], &[C64::new(a, 1e12)]).unwrap();
        assert!(far[0].abs() < 1e-11);
    }

    #[test]
    fn distant_soliton_decouples() {
        let spec = harmonic(5, 1);
        let x = harmonic_equilibrium_reference(5, 1.0, 1.0).unwrap();
        let r = constraint_residual(&spec, &x, &[C64::new(0.3, 1e12)]).unwrap();
        assert!(max_abs(&r) < 1e-10);
    }

    #[test]
    fn conjugate_pair_cancels_momenta() {
        let spec = harmonic(3, 2);
        let z = [C64::new(0.2, 0.5), C64::new(0.2, -0.5)];
        let p = momenta_from_solitons(&spec, &[-1.0, 0.1, 1.0], &z).unwrap();
        assert!(p.iter().all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn bad_inputs() {
        let spec = harmonic(3, 1);
        let opts = FlowOptions::default();
        let z = [C64::new(0.0, 1.0)];
        assert!(matches!(
            gradient_flow(&spec, &z, &[0.0, -1.0, 1.0], &opts),
            Err(Error::NonMonotone(0))
        ));
        assert!(matches!(
            gradient_flow(&spec, &[C64::new(0.5, 0.0)], &[-1.0, 0.0, 1.0], &opts),
            Err(Error::RealSoliton)
        ));
        assert!(constraint_residual(&spec, &[0.0, 0.0, 1.0], &z).is_err());
    }

    #[test]
    fn default_guess_for_each_family() {
        let r = ModelSpec::new(KernelKind::Rational, 1.0, [0.0, 1.0, 0.06, 0.0], 31, 1).unwrap();
        let x = default_initial_guess(&r).unwrap();
        let oracle = harmonic_equilibrium_reference(31, 1.0, 1.0).unwrap();
        assert_eq!(x, oracle);
        let t = ModelSpec::new(KernelKind::Trigonometric, 0.2, [0.0, 0.0, 1.0, 0.0], 6, 0).unwrap();
        let xt = default_initial_guess(&t).unwrap();
        assert!(strictly_increasing(&xt) && xt[5] - xt[0] < std::f64::consts::PI);
        let rep = gradient_flow(&t, &[], &xt, &FlowOptions::default()).unwrap();
        assert!(rep.constraint_residual < 1e-10);
    }
}
