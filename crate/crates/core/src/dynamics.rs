//! First-order dual flow, second-order Newtonian equations, total energy and
//! the diagnostics tying the two together.
//!
//! Particles (mass +1) and solitons (mass -1) share one kernel. In the
//! Newtonian picture each species only feels its own kind plus the one-body
//! potential of [`ModelSpec::onebody_v`]; the cross terms cancel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{
    integrate, Displaced, IntegratorOptions, Observation, OdeSystem, Reversed,
};
use crate::model::{ModelSpec, Species, C64};

const I: C64 = C64::new(0.0, 1.0);

/// Complex particle and soliton coordinates at time `t`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DualState {
    pub x: Vec<C64>,
    pub z: Vec<C64>,
    pub t: f64,
}

impl DualState {
    pub fn new(x: Vec<C64>, z: Vec<C64>) -> Self {
        DualState { x, z, t: 0.0 }
    }

    pub fn from_real(x: &[f64], z: Vec<C64>) -> Self {
        Self::new(x.iter().map(|&v| C64::new(v, 0.0)).collect(), z)
    }

    /// Interleaved `(re, im)` layout, particles first.
    pub fn to_flat(&self) -> Vec<f64> {
        self.x
            .iter()
            .chain(&self.z)
            .flat_map(|c| [c.re, c.im])
            .collect()
    }

    pub fn from_flat(y: &[f64], n: usize, t: f64) -> Self {
        let all = unflatten(y);
        let (x, z) = all.split_at(n);
        DualState {
            x: x.to_vec(),
            z: z.to_vec(),
            t,
        }
    }
}

/// Real particle phase space plus complex soliton positions and velocities.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseState {
    pub x: Vec<f64>,
    pub p: Vec<f64>,
    pub z: Vec<C64>,
    pub zdot: Vec<C64>,
    pub t: f64,
}

impl PhaseState {
    /// Takes `p = Re xdot` and `zdot` from the dual flow.
    pub fn from_dual(spec: &ModelSpec, s: &DualState) -> Result<Self> {
        let (xdot, zdot) = dual_velocities(spec, &s.x, &s.z)?;
        Ok(PhaseState {
            x: s.x.iter().map(|c| c.re).collect(),
            p: xdot.iter().map(|c| c.re).collect(),
            z: s.z.clone(),
            zdot,
            t: s.t,
        })
    }

    /// Layout `[x, p, (re, im) of z, (re, im) of zdot]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut y = Vec::with_capacity(2 * self.x.len() + 4 * self.z.len());
        y.extend_from_slice(&self.x);
        y.extend_from_slice(&self.p);
        y.extend(self.z.iter().flat_map(|c| [c.re, c.im]));
        y.extend(self.zdot.iter().flat_map(|c| [c.re, c.im]));
        y
    }

    pub fn from_flat(y: &[f64], n: usize, m: usize, t: f64) -> Self {
        let x = y[..n].to_vec();
        let p = y[n..2 * n].to_vec();
        let z = unflatten(&y[2 * n..2 * n + 2 * m]);
        let zdot = unflatten(&y[2 * n + 2 * m..2 * n + 4 * m]);
        PhaseState { x, p, z, zdot, t }
    }
}

fn unflatten(y: &[f64]) -> Vec<C64> {
    y.chunks_exact(2).map(|c| C64::new(c[0], c[1])).collect()
}

fn check_counts(spec: &ModelSpec, n: usize, m: usize) -> Result<()> {
    if n != spec.n_particles || m != spec.n_solitons {
        return Err(Error::InvalidArgument(format!(
            "state has {n} particles and {m} solitons, spec expects {} and {}",
            spec.n_particles, spec.n_solitons
        )));
    }
    Ok(())
}

/// Kernel of a pair difference, reporting a collision between points `i`
/// and `j` (indices into particles followed by solitons).
fn pair_kernel(spec: &ModelSpec, d: C64, i: usize, j: usize) -> Result<C64> {
    let dist = spec.singular_distance(d);
    if dist < spec.singular_eps {
        return Err(Error::Collision { i, j, distance: dist });
    }
    Ok(spec.kernel_unchecked(d))
}

/// `(xdot, zdot)` of the dual flow.
pub fn dual_velocities(spec: &ModelSpec, x: &[C64], z: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    let n = x.len();
    let m = z.len();
    let g = spec.g;
    // accumulate sum of kernels into each point, then apply signs
    let mut xs = vec![C64::new(0.0, 0.0); n];
    let mut zs = vec![C64::new(0.0, 0.0); m];
    for j in 0..n {
        for k in (j + 1)..n {
            let kk = pair_kernel(spec, x[j] - x[k], j, k)?;
            xs[j] -= kk;
            xs[k] += kk;
        }
        for (a, za) in z.iter().enumerate() {
            let kk = pair_kernel(spec, x[j] - za, j, n + a)?;
            xs[j] += kk;
            zs[a] += kk;
        }
    }
    for a in 0..m {
        for b in (a + 1)..m {
            let kk = pair_kernel(spec, z[a] - z[b], n + a, n + b)?;
            zs[a] += kk;
            zs[b] -= kk;
        }
    }
    let xdot = x
        .iter()
        .zip(&xs)
        .map(|(&xj, &s)| I * (spec.prepot_w(xj) + g * s))
        .collect();
    let zdot = z
        .iter()
        .zip(&zs)
        .map(|(&za, &s)| I * (spec.prepot_w(za) + g * s))
        .collect();
    Ok((xdot, zdot))
}

pub fn dual_rhs(spec: &ModelSpec, s: &DualState) -> Result<DualState> {
    check_counts(spec, s.x.len(), s.z.len())?;
    let (x, z) = dual_velocities(spec, &s.x, &s.z)?;
    Ok(DualState { x, z, t: s.t })
}

/// Velocity-independent accelerations of both species, for complex
/// coordinates. Requires `c3 = 0`.
pub fn accelerations(spec: &ModelSpec, x: &[C64], z: &[C64]) -> Result<(Vec<C64>, Vec<C64>)> {
    spec.check_soliton_mode()?;
    let n = x.len();
    let gg = spec.g * spec.g;
    let forces = |pts: &[C64], species: Species, offset: usize| -> Result<Vec<C64>> {
        let mut acc: Vec<C64> = pts
            .iter()
            .map(|&p| -spec.onebody_v_prime(species, p))
            .collect();
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let k = pair_kernel(spec, pts[a] - pts[b], offset + a, offset + b)?;
                let f = -2.0 * gg * k * spec.kernel_prime_from(k);
                acc[a] += f;
                acc[b] -= f;
            }
        }
        Ok(acc)
    };
    Ok((forces(x, Species::Particle, 0)?, forces(z, Species::Soliton, n)?))
}

/// Accelerations `(xddot, zddot)` of the Newtonian system.
pub fn newtonian_rhs(spec: &ModelSpec, s: &PhaseState) -> Result<(Vec<f64>, Vec<C64>)> {
    check_counts(spec, s.x.len(), s.z.len())?;
    let x: Vec<C64> = s.x.iter().map(|&v| C64::new(v, 0.0)).collect();
    let (ax, az) = accelerations(spec, &x, &s.z)?;
    Ok((ax.iter().map(|a| a.re).collect(), az))
}

/// `max_j |Im xdot_j|` under the dual flow.
pub fn reality_residual(spec: &ModelSpec, s: &DualState) -> Result<f64> {
    let (xdot, _) = dual_velocities(spec, &s.x, &s.z)?;
    Ok(xdot.iter().map(|v| v.im.abs()).fold(0.0, f64::max))
}

/// Energy of complex coordinates and velocities, solitons counted with
/// negative sign.
pub fn energy_complex(
    spec: &ModelSpec,
    x: &[C64],
    xdot: &[C64],
    z: &[C64],
    zdot: &[C64],
) -> Result<C64> {
    let gg = spec.g * spec.g;
    let n = x.len();
    let sector = |pts: &[C64], vel: &[C64], species: Species, offset: usize| -> Result<C64> {
        let mut e = C64::new(0.0, 0.0);
        for (p, v) in pts.iter().zip(vel) {
            e += 0.5 * v * v + spec.onebody_v(species, *p);
        }
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let k = pair_kernel(spec, pts[a] - pts[b], offset + a, offset + b)?;
                e -= gg * spec.kernel_prime_from(k);
            }
        }
        Ok(e)
    };
    Ok(sector(x, xdot, Species::Particle, 0)? - sector(z, zdot, Species::Soliton, n)?)
}

pub fn total_energy(spec: &ModelSpec, s: &PhaseState) -> Result<C64> {
    let x: Vec<C64> = s.x.iter().map(|&v| C64::new(v, 0.0)).collect();
    let p: Vec<C64> = s.p.iter().map(|&v| C64::new(v, 0.0)).collect();
    energy_complex(spec, &x, &p, &s.z, &s.zdot)
}

/// Max deviation between the centered second difference of `x` along the
/// dual flow (step `h`) and the Newtonian accelerations at `s`.
pub fn consistency_deviation(spec: &ModelSpec, s: &DualState, h: f64) -> Result<f64> {
    if !(h > 0.0) {
        return Err(Error::InvalidArgument("h must be positive".into()));
    }
    check_counts(spec, s.x.len(), s.z.len())?;
    let n = s.x.len();
    let (ax, _) = accelerations(spec, &s.x, &s.z)?;
    let (xdot, zdot) = dual_velocities(spec, &s.x, &s.z)?;
    let vmax = xdot
        .iter()
        .chain(&zdot)
        .map(|v| v.norm())
        .fold(0.0, f64::max);

    let flow = DualFlow::new(spec.clone());
    let base = s.to_flat();
    let shifted = Displaced {
        inner: &flow,
        base: base.clone(),
    };
    let opts = IntegratorOptions {
        rtol: 1e-13,
        atol: 1e-15 * (h * vmax).max(1e-12),
        output_every: h,
        ..IntegratorOptions::default()
    };
    let zero = vec![0.0; base.len()];
    let fwd = integrate(&shifted, 0.0, &zero, h, &opts)?;
    let bwd = integrate(&Reversed(&shifted), 0.0, &zero, h, &opts)?;
    let df = fwd.last_state().expect("trajectory has a final state");
    let db = bwd.last_state().expect("trajectory has a final state");

    let mut dev: f64 = 0.0;
    for j in 0..n {
        let second = C64::new(df[2 * j] + db[2 * j], df[2 * j + 1] + db[2 * j + 1]) / (h * h);
        dev = dev.max((second - ax[j]).norm());
    }
    Ok(dev)
}

fn max_im(x: &[C64]) -> f64 {
    x.iter().map(|c| c.im.abs()).fold(0.0, f64::max)
}

/// Minimum separation over interacting pairs.
fn min_separation(spec: &ModelSpec, groups: &[&[C64]], cross: bool) -> f64 {
    let mut d = f64::INFINITY;
    for (gi, a) in groups.iter().enumerate() {
        for i in 0..a.len() {
            for j in (i + 1)..a.len() {
                d = d.min(spec.singular_distance(a[i] - a[j]));
            }
            if cross {
                for b in &groups[gi + 1..] {
                    for q in b.iter() {
                        d = d.min(spec.singular_distance(a[i] - q));
                    }
                }
            }
        }
    }
    d
}

/// The dual flow as a real system in the [`DualState::to_flat`] layout.
pub struct DualFlow {
    pub spec: ModelSpec,
    pub eta: f64,
}

impl DualFlow {
    pub fn new(spec: ModelSpec) -> Self {
        DualFlow { spec, eta: 0.1 }
    }

    fn split(&self, y: &[f64]) -> (Vec<C64>, Vec<C64>) {
        let all = unflatten(y);
        let (x, z) = all.split_at(self.spec.n_particles);
        (x.to_vec(), z.to_vec())
    }
}

impl OdeSystem for DualFlow {
    fn dim(&self) -> usize {
        2 * (self.spec.n_particles + self.spec.n_solitons)
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let (x, z) = self.split(y);
        let (xd, zd) = dual_velocities(&self.spec, &x, &z)?;
        for (i, v) in xd.iter().chain(&zd).enumerate() {
            dydt[2 * i] = v.re;
            dydt[2 * i + 1] = v.im;
        }
        Ok(())
    }

    fn step_cap(&self, y: &[f64], dydt: &[f64]) -> Option<f64> {
        let (x, z) = self.split(y);
        let d = min_separation(&self.spec, &[&x, &z], true);
        let v = unflatten(dydt)
            .iter()
            .map(|c| c.norm())
            .fold(0.0, f64::max);
        (d.is_finite() && v > 0.0).then(|| self.eta * d / v)
    }

    fn observe(&self, _t: f64, y: &[f64]) -> Result<Observation> {
        let (x, z) = self.split(y);
        let (xd, zd) = dual_velocities(&self.spec, &x, &z)?;
        Ok(Observation {
            energy: energy_complex(&self.spec, &x, &xd, &z, &zd)?,
            max_im: max_im(&x),
        })
    }
}

/// The Newtonian equations in the [`PhaseState::to_flat`] layout.
pub struct NewtonianFlow {
    pub spec: ModelSpec,
    pub eta: f64,
}

impl NewtonianFlow {
    pub fn new(spec: ModelSpec) -> Result<Self> {
        spec.check_soliton_mode()?;
        Ok(NewtonianFlow { spec, eta: 0.1 })
    }

    fn state(&self, y: &[f64]) -> PhaseState {
        PhaseState::from_flat(y, self.spec.n_particles, self.spec.n_solitons, 0.0)
    }
}

impl OdeSystem for NewtonianFlow {
    fn dim(&self) -> usize {
        2 * self.spec.n_particles + 4 * self.spec.n_solitons
    }

    fn rhs(&self, _t: f64, y: &[f64], dydt: &mut [f64]) -> Result<()> {
        let n = self.spec.n_particles;
        let m = self.spec.n_solitons;
        let s = self.state(y);
        let (ax, az) = newtonian_rhs(&self.spec, &s)?;
        dydt[..n].copy_from_slice(&s.p);
        dydt[n..2 * n].copy_from_slice(&ax);
        for a in 0..m {
            dydt[2 * n + 2 * a] = s.zdot[a].re;
            dydt[2 * n + 2 * a + 1] = s.zdot[a].im;
            dydt[2 * n + 2 * m + 2 * a] = az[a].re;
            dydt[2 * n + 2 * m + 2 * a + 1] = az[a].im;
        }
        Ok(())
    }

    fn step_cap(&self, y: &[f64], _dydt: &[f64]) -> Option<f64> {
        let s = self.state(y);
        let x: Vec<C64> = s.x.iter().map(|&v| C64::new(v, 0.0)).collect();
        let d = min_separation(&self.spec, &[&x, &s.z], false);
        let v = s
            .p
            .iter()
            .map(|p| p.abs())
            .chain(s.zdot.iter().map(|c| c.norm()))
            .fold(0.0, f64::max);
        (d.is_finite() && v > 0.0).then(|| self.eta * d / v)
    }

    fn observe(&self, _t: f64, y: &[f64]) -> Result<Observation> {
        Ok(Observation {
            energy: total_energy(&self.spec, &self.state(y))?,
            max_im: 0.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::KernelKind;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn single_particle_at_origin_is_static() {
        let spec = ModelSpec::harmonic(1.0, 1.0, 1, 0).unwrap();
        let d = dual_rhs(&spec, &DualState::from_real(&[0.0], vec![])).unwrap();
        assert_eq!(d.x[0], c(0.0, 0.0));
    }

    #[test]
    fn two_body_equilibrium() {
        let spec = ModelSpec::harmonic(1.0, 1.0, 2, 0).unwrap();
        let s = DualState::from_real(&[-FRAC_1_SQRT_2, FRAC_1_SQRT_2], vec![]);
        let d = dual_rhs(&spec, &s).unwrap();
        assert!(d.x.iter().all(|v| v.norm() < 1e-15));
        let ps = PhaseState::from_dual(&spec, &s).unwrap();
        let (a, _) = newtonian_rhs(&spec, &ps).unwrap();
        assert!(a.iter().all(|v| v.abs() < 1e-14), "{a:?}");
        let e = total_energy(&spec, &ps).unwrap();
        assert!((e.re - 1.0).abs() < 1e-14 && e.im == 0.0);
        assert!(reality_residual(&spec, &s).unwrap() < 1e-15);
    }

    #[test]
    fn harmonic_single_particle() {
        let spec = ModelSpec::harmonic(1.0, 1.0, 1, 0).unwrap();
        let s = PhaseState {
            x: vec![1.0],
            p: vec![0.0],
            z: vec![],
            zdot: vec![],
            t: 0.0,
        };
        assert_eq!(newtonian_rhs(&spec, &s).unwrap().0, vec![-1.0]);
        assert_eq!(total_energy(&spec, &s).unwrap(), c(0.5, 0.0));
    }

    #[test]
    fn collision_is_reported() {
        let spec = ModelSpec::harmonic(1.0, 1.0, 2, 1).unwrap();
        let s = DualState::new(vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0)]);
        match dual_rhs(&spec, &s) {
            Err(Error::Collision { i, j, .. }) => assert_eq!((i, j), (1, 2)),
            other => panic!("expected collision, got {other:?}"),
        }
    }

    #[test]
    fn conjugate_pair_symmetry() {
        let spec = ModelSpec::new(KernelKind::Rational, 1.0, [0.0, 1.0, 0.06, 0.0], 4, 2).unwrap();
        let s = DualState::new(
            vec![c(-1.3, 0.0), c(-0.2, 0.0), c(0.5, 0.0), c(1.7, 0.0)],
            vec![c(0.1, 0.3), c(0.1, -0.3)],
        );
        let d = dual_rhs(&spec, &s).unwrap();
        assert!((d.z[1] + d.z[0].conj()).norm() < 1e-12);
    }

    #[test]
    fn random_state_violates_reality() {
        let spec = ModelSpec::harmonic(1.0, 1.0, 5, 0).unwrap();
        let s = DualState::from_real(&[-2.0, -0.3, 0.1, 1.0, 2.6], vec![]);
        let r = reality_residual(&spec, &s).unwrap();
        assert!(r > 0.1, "{r}");
    }

    #[test]
    fn flat_layouts_round_trip() {
        let s = DualState::new(vec![c(1.0, 2.0), c(3.0, 4.0)], vec![c(5.0, 6.0)]);
        assert_eq!(DualState::from_flat(&s.to_flat(), 2, 0.0), s);
        let p = PhaseState {
            x: vec![1.0, 2.0],
            p: vec![3.0, 4.0],
            z: vec![c(5.0, 6.0)],
            zdot: vec![c(7.0, 8.0)],
            t: 0.0,
        };
        assert_eq!(PhaseState::from_flat(&p.to_flat(), 2, 1, 0.0), p);
    }

    // The dual flow implies the Newtonian equations for every complex
    // solution, so the second difference matches for arbitrary data.
    #[test]
    fn second_difference_matches_newtonian_for_all_families() {
        for kind in KernelKind::ALL {
            let spec = ModelSpec::new(kind, 0.7, [0.2, 0.9, 0.3, 0.0], 3, 2).unwrap();
            let s = DualState::new(
                vec![c(-0.9, 0.05), c(0.1, -0.02), c(0.8, 0.0)],
                vec![c(0.3, 0.6), c(-0.4, -0.7)],
            );
            let d1 = consistency_deviation(&spec, &s, 2e-3).unwrap();
            let d2 = consistency_deviation(&spec, &s, 1e-3).unwrap();
            assert!(d1 < 5e-3, "{kind:?}: {d1}");
            let ratio = d1 / d2;
            assert!((3.5..4.5).contains(&ratio), "{kind:?}: ratio {ratio}");
        }
    }

    #[test]
    fn dual_energy_is_conserved_along_flow() {
        let spec = ModelSpec::new(KernelKind::Rational, 1.0, [0.0, 1.0, 0.1, 0.0], 4, 1).unwrap();
        let s = DualState::new(
            vec![c(-1.5, 0.0), c(-0.4, 0.0), c(0.4, 0.0), c(1.5, 0.0)],
            vec![c(0.2, 0.8)],
        );
        let flow = DualFlow::new(spec);
        let opts = IntegratorOptions::default().with_output_every(0.05);
        let traj = integrate(&flow, 0.0, &s.to_flat(), 0.5, &opts).unwrap();
        assert!(traj.relative_energy_drift() < 1e-8, "{}", traj.relative_energy_drift());
    }

    #[test]
    fn newtonian_requires_vanishing_extension() {
        let spec = ModelSpec::new(KernelKind::Rational, 1.0, [0.0, 1.0, 0.0, 0.1], 2, 0).unwrap();
        assert!(NewtonianFlow::new(spec).is_err());
    }
}
