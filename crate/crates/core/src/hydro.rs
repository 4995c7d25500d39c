//! Hydrodynamic fields built from microscopic particle configurations.
//!
//! The density comes from a monotone cubic interpolant `x(s)` through
//! `(j, x_j)`, extended by half a cell at each end so that it integrates to
//! `N`, via `rho(x(s)) = 1 / x'(s)`. The Hilbert transform convention is
//! `rho_H(x) = (1/pi) PV int rho(y) / (y - x) dy`.
//!
//! Everything here is for the rational kernel.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{KernelKind, ModelSpec, Species, C64};

const I: C64 = C64::new(0.0, 1.0);

pub const DEFAULT_GRID_SIZE: usize = 2048;
/// Margin on each side of the support, as a fraction of its width.
pub const MARGIN_FRACTION: f64 = 0.1;
/// Relative density floor below which log-derivative terms are dropped.
pub const DENSITY_FLOOR: f64 = 1e-12;

/// Monotone piecewise-cubic Hermite interpolant (Fritsch-Carlson slopes).
#[derive(Clone, Debug)]
struct Pchip {
    s: Vec<f64>,
    x: Vec<f64>,
    d: Vec<f64>,
}

impl Pchip {
    fn new(s: Vec<f64>, x: Vec<f64>) -> Self {
        let n = s.len();
        let h: Vec<f64> = s.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|k| (x[k + 1] - x[k]) / h[k]).collect();
        let mut d = vec![0.0; n];
        if n == 2 {
            d[0] = delta[0];
            d[1] = delta[0];
        } else {
            for k in 1..n - 1 {
                if delta[k - 1] * delta[k] > 0.0 {
                    let w1 = 2.0 * h[k] + h[k - 1];
                    let w2 = h[k] + 2.0 * h[k - 1];
                    d[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k]);
                }
            }
            d[0] = Self::edge(h[0], h[1], delta[0], delta[1]);
            d[n - 1] = Self::edge(h[n - 2], h[n - 3], delta[n - 2], delta[n - 3]);
        }
        Pchip { s, x, d }
    }

    // shape-preserving three-point end slope
    fn edge(h0: f64, h1: f64, m0: f64, m1: f64) -> f64 {
        let d = ((2.0 * h0 + h1) * m0 - h0 * m1) / (h0 + h1);
        if d.signum() != m0.signum() {
            0.0
        } else if m0.signum() != m1.signum() && d.abs() > 3.0 * m0.abs() {
            3.0 * m0
        } else {
            d
        }
    }

    /// Value and slope on interval `k` at local parameter `t in [0, 1]`.
    fn eval(&self, k: usize, t: f64) -> (f64, f64) {
        let h = self.s[k + 1] - self.s[k];
        let (x0, x1) = (self.x[k], self.x[k + 1]);
        let (d0, d1) = (self.d[k] * h, self.d[k + 1] * h);
        let t2 = t * t;
        let t3 = t2 * t;
        let val = (2.0 * t3 - 3.0 * t2 + 1.0) * x0
            + (t3 - 2.0 * t2 + t) * d0
            + (-2.0 * t3 + 3.0 * t2) * x1
            + (t3 - t2) * d1;
        let der = (6.0 * t2 - 6.0 * t) * x0
            + (3.0 * t2 - 4.0 * t + 1.0) * d0
            + (-6.0 * t2 + 6.0 * t) * x1
            + (3.0 * t2 - 2.0 * t) * d1;
        (val, der / h)
    }

    /// Solves `x(s) = target` on interval `k`; returns `(t, x'(s))`.
    fn invert(&self, k: usize, target: f64) -> (f64, f64) {
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if self.eval(k, mid).0 < target {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let t = 0.5 * (lo + hi);
        (t, self.eval(k, t).1)
    }
}

fn check_sorted(x: &[f64]) -> Result<()> {
    if x.len() < 2 {
        return Err(Error::InvalidArgument("need at least two particles".into()));
    }
    match x.windows(2).position(|w| !(w[0] < w[1])) {
        Some(i) => Err(Error::NonMonotone(i)),
        None => Ok(()),
    }
}

/// Interpolant through `(j, x_j)` plus the two half-cell end points.
fn particle_map(x: &[f64]) -> Pchip {
    let n = x.len();
    let mut s = Vec::with_capacity(n + 2);
    let mut xs = Vec::with_capacity(n + 2);
    s.push(-0.5);
    xs.push(x[0] - 0.5 * (x[1] - x[0]));
    for (j, &v) in x.iter().enumerate() {
        s.push(j as f64);
        xs.push(v);
    }
    s.push(n as f64 - 0.5);
    xs.push(x[n - 1] + 0.5 * (x[n - 1] - x[n - 2]));
    Pchip::new(s, xs)
}

/// Support `[x(-1/2), x(N - 1/2)]` of the empirical density.
pub fn density_support(x: &[f64]) -> Result<(f64, f64)> {
    check_sorted(x)?;
    let n = x.len();
    Ok((
        x[0] - 0.5 * (x[1] - x[0]),
        x[n - 1] + 0.5 * (x[n - 1] - x[n - 2]),
    ))
}

// For each grid point inside the support: interval index, local t, x'(s).
fn locate(map: &Pchip, grid: &[f64]) -> Vec<Option<(usize, f64, f64)>> {
    let lo = map.x[0];
    let hi = *map.x.last().unwrap();
    grid.iter()
        .map(|&g| {
            if g < lo || g > hi {
                return None;
            }
            let k = match map.x.partition_point(|&v| v <= g) {
                0 => 0,
                p => (p - 1).min(map.x.len() - 2),
            };
            let (t, slope) = map.invert(k, g);
            Some((k, t, slope))
        })
        .collect()
}

/// Gaussian smoothing of grid samples, width `sigma` in grid cells.
/// Values beyond the grid are taken as zero, so mass is conserved as long
/// as the samples vanish near the ends.
pub fn gaussian_smooth(values: &[f64], sigma: f64) -> Vec<f64> {
    if !(sigma > 0.0) {
        return values.to_vec();
    }
    let half = (4.0 * sigma).ceil() as isize;
    let weights: Vec<f64> = (-half..=half)
        .map(|k| (-0.5 * (k as f64 / sigma).powi(2)).exp())
        .collect();
    let norm: f64 = weights.iter().sum();
    let n = values.len() as isize;
    (0..n)
        .map(|i| {
            let mut acc = 0.0;
            for (w, k) in weights.iter().zip(-half..=half) {
                let j = i + k;
                if (0..n).contains(&j) {
                    acc += w * values[j as usize];
                }
            }
            acc / norm
        })
        .collect()
}

/// `rho = 1 / x'(s)` sampled on `grid`, zero outside the support, then
/// smoothed with a Gaussian of width `bandwidth` (in `x` units; 0 disables).
pub fn empirical_density(x: &[f64], grid: &[f64], bandwidth: f64) -> Result<Vec<f64>> {
    check_sorted(x)?;
    let map = particle_map(x);
    let raw: Vec<f64> = locate(&map, grid)
        .into_iter()
        .map(|loc| loc.map_or(0.0, |(_, _, slope)| 1.0 / slope))
        .collect();
    let h = grid_spacing(grid);
    Ok(gaussian_smooth(&raw, bandwidth / h))
}

fn grid_spacing(grid: &[f64]) -> f64 {
    if grid.len() < 2 {
        1.0
    } else {
        (grid[grid.len() - 1] - grid[0]) / (grid.len() - 1) as f64
    }
}

pub fn uniform_grid(lo: f64, hi: f64, size: usize) -> Vec<f64> {
    let h = (hi - lo) / (size - 1) as f64;
    (0..size).map(|i| lo + i as f64 * h).collect()
}

/// `(1/pi) PV int rho(y) / (y - x) dy` by the skip-node trapezoid rule on a
/// uniform grid, plus the `h rho'(x)` term the skipped node would carry.
pub fn hilbert_transform(x: &[f64], rho: &[f64]) -> Vec<f64> {
    let g = x.len();
    (0..g)
        .map(|i| {
            // x_j - x_i = (j - i) h, so the h cancels
            let acc: f64 = rho
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(j, r)| r / (j as f64 - i as f64))
                .sum();
            let slope = if i > 0 && i + 1 < g {
                0.5 * (rho[i + 1] - rho[i - 1])
            } else {
                0.0
            };
            (acc + slope) / PI
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub x: Vec<f64>,
    pub rho: Vec<f64>,
    pub v: Vec<f64>,
    pub rho_h: Vec<f64>,
    /// Particle support `[x(-1/2), x(N - 1/2)]`.
    pub support: (f64, f64),
}

impl FieldGrid {
    /// Fields from sorted particle positions and optional momenta, on a
    /// grid of `size` points with [`MARGIN_FRACTION`] margins.
    pub fn from_particles(
        x: &[f64],
        p: Option<&[f64]>,
        size: usize,
        bandwidth_cells: f64,
    ) -> Result<Self> {
        let support = density_support(x)?;
        let width = support.1 - support.0;
        let grid = uniform_grid(
            support.0 - MARGIN_FRACTION * width,
            support.1 + MARGIN_FRACTION * width,
            size,
        );
        Self::on_grid(x, p, grid, bandwidth_cells)
    }

    /// Fields on a caller-supplied uniform grid.
    pub fn on_grid(x: &[f64], p: Option<&[f64]>, grid: Vec<f64>, bandwidth_cells: f64) -> Result<Self> {
        if grid.len() < 3 {
            return Err(Error::InvalidArgument("grid needs at least 3 points".into()));
        }
        let support = density_support(x)?;
        let h = grid_spacing(&grid);
        let rho = empirical_density(x, &grid, bandwidth_cells * h)?;
        let v = match p {
            None => vec![0.0; grid.len()],
            Some(p) => {
                if p.len() != x.len() {
                    return Err(Error::InvalidArgument("momenta and positions differ in length".into()));
                }
                velocity_field(x, p, &grid)
            }
        };
        let rho_h = hilbert_transform(&grid, &rho);
        Ok(FieldGrid {
            x: grid,
            rho,
            v,
            rho_h,
            support,
        })
    }

    pub fn spacing(&self) -> f64 {
        grid_spacing(&self.x)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Indices of grid points within the central `fraction` of the support.
    pub fn interior(&self, fraction: f64) -> Vec<usize> {
        let c = 0.5 * (self.support.0 + self.support.1);
        let r = 0.5 * fraction * (self.support.1 - self.support.0);
        (0..self.len())
            .filter(|&i| (self.x[i] - c).abs() <= r)
            .collect()
    }

    fn floor(&self) -> f64 {
        DENSITY_FLOOR * self.rho.iter().copied().fold(0.0, f64::max)
    }

    /// Centered difference of `values` at interior index `i`.
    fn derivative(&self, values: &[f64], i: usize) -> f64 {
        let n = self.len();
        let h = self.spacing();
        if i == 0 {
            (values[1] - values[0]) / h
        } else if i + 1 == n {
            (values[n - 1] - values[n - 2]) / h
        } else {
            (values[i + 1] - values[i - 1]) / (2.0 * h)
        }
    }

    /// `d/dx ln rho` at grid index `i`.
    pub fn log_density_slope(&self, i: usize) -> Result<f64> {
        self.log_slope_above(i, self.floor())
    }

    fn log_slope_above(&self, i: usize, floor: f64) -> Result<f64> {
        if self.rho[i] <= floor {
            return Err(Error::ZeroDensity(self.x[i]));
        }
        Ok(self.derivative(&self.rho, i) / self.rho[i])
    }

    /// Linear interpolation of grid samples at `x`.
    pub fn sample(&self, values: &[f64], x: f64) -> f64 {
        let h = self.spacing();
        let u = (x - self.x[0]) / h;
        if u <= 0.0 {
            return values[0];
        }
        let k = (u.floor() as usize).min(self.len() - 2);
        let t = u - k as f64;
        (1.0 - t) * values[k] + t * values[k + 1]
    }

    /// `integral of rho` by the trapezoid rule.
    pub fn mass(&self) -> f64 {
        trapezoid(&self.rho, self.spacing())
    }
}

fn trapezoid(f: &[f64], h: f64) -> f64 {
    let n = f.len();
    if n < 2 {
        return 0.0;
    }
    h * (f.iter().sum::<f64>() - 0.5 * (f[0] + f[n - 1]))
}

/// Particle momenta carried to the grid, linear in the label `s`.
fn velocity_field(x: &[f64], p: &[f64], grid: &[f64]) -> Vec<f64> {
    let map = particle_map(x);
    let n = p.len();
    // momenta at the interpolant nodes, ends copied outward
    let mut pn = Vec::with_capacity(n + 2);
    pn.push(p[0]);
    pn.extend_from_slice(p);
    pn.push(p[n - 1]);
    locate(&map, grid)
        .into_iter()
        .map(|loc| {
            loc.map_or(0.0, |(k, t, _)| (1.0 - t) * pn[k] + t * pn[k + 1])
        })
        .collect()
}

fn require_rational(spec: &ModelSpec) -> Result<()> {
    if spec.kernel != KernelKind::Rational {
        return Err(Error::RationalOnly);
    }
    Ok(())
}

fn check_pole(spec: &ModelSpec, x: C64, pole: C64) -> Result<()> {
    let d = (x - pole).norm();
    if d < spec.singular_eps {
        return Err(Error::PoleProximity { distance: d });
    }
    Ok(())
}

/// `u+(x) = i g sum_a 1/(x - z_a) + i lambda w(x)`.
pub fn u_plus_micro(spec: &ModelSpec, z: &[C64], x: C64) -> Result<C64> {
    require_rational(spec)?;
    let mut s = C64::new(0.0, 0.0);
    for &za in z {
        check_pole(spec, x, za)?;
        s += (x - za).inv();
    }
    Ok(I * (spec.g * s + spec.lambda * spec.prepot_w(x)))
}

/// `u-(x) = -i g sum_j 1/(x - x_j) + i (1 - lambda) w(x)`.
pub fn u_minus_micro(spec: &ModelSpec, xs: &[f64], x: C64) -> Result<C64> {
    require_rational(spec)?;
    let mut s = C64::new(0.0, 0.0);
    for &xj in xs {
        let pole = C64::new(xj, 0.0);
        check_pole(spec, x, pole)?;
        s += (x - pole).inv();
    }
    Ok(I * (-spec.g * s + (1.0 - spec.lambda) * spec.prepot_w(x)))
}

/// `u+ = v - i pi g rho_H + i g d/dx ln sqrt(rho)` at grid index `i`.
pub fn u_plus_hydro_at(grid: &FieldGrid, g: f64, i: usize) -> Result<C64> {
    let dlog = grid.log_density_slope(i)?;
    Ok(C64::new(grid.v[i], -PI * g * grid.rho_h[i] + 0.5 * g * dlog))
}

/// [`u_plus_hydro_at`] over a set of grid indices.
pub fn u_plus_hydro(grid: &FieldGrid, g: f64, indices: &[usize]) -> Result<Vec<C64>> {
    let floor = grid.floor();
    indices
        .iter()
        .map(|&i| {
            let dlog = grid.log_slope_above(i, floor)?;
            Ok(C64::new(grid.v[i], -PI * g * grid.rho_h[i] + 0.5 * g * dlog))
        })
        .collect()
}

/// [`u_plus_hydro_at`] on every grid point, `None` where the density is
/// below the floor.
pub fn u_plus_hydro_field(grid: &FieldGrid, g: f64) -> Vec<Option<C64>> {
    let floor = grid.floor();
    (0..grid.len())
        .map(|i| {
            grid.log_slope_above(i, floor)
                .ok()
                .map(|dlog| C64::new(grid.v[i], -PI * g * grid.rho_h[i] + 0.5 * g * dlog))
        })
        .collect()
}

/// `|sum_{k != j} 1/(x_j - x_k) - [ (1/2) d ln rho - pi rho_H ](x_j)|`,
/// with the fields interpolated from `grid`. Particle `j` must have at least
/// `N/10` neighbours on each side.
pub fn sum_identity_residual(xs: &[f64], j: usize, grid: &FieldGrid) -> Result<f64> {
    let n = xs.len();
    let required = n / 10;
    if j >= n || j < required || n - 1 - j < required {
        return Err(Error::BoundaryParticle { index: j, required });
    }
    let direct: f64 = xs
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != j)
        .map(|(_, &xk)| 1.0 / (xs[j] - xk))
        .sum();
    let hydro = hydro_sum_at(grid, xs[j])?;
    Ok((direct - hydro).abs())
}

/// `(1/2) d ln rho - pi rho_H` interpolated at `x`.
pub fn hydro_sum_at(grid: &FieldGrid, x: f64) -> Result<f64> {
    let h = grid.spacing();
    let k = (((x - grid.x[0]) / h).floor().max(1.0) as usize).min(grid.len() - 3);
    let t = (x - grid.x[k]) / h;
    let a = 0.5 * grid.log_density_slope(k)? - PI * grid.rho_h[k];
    let b = 0.5 * grid.log_density_slope(k + 1)? - PI * grid.rho_h[k + 1];
    Ok((1.0 - t) * a + t * b)
}

/// Max over the central `interior` fraction of the support of
/// `|u-(x + i eps) - u-(x - i eps) + 2 pi g rho(x)| / (2 pi g rho(x))`.
pub fn u_minus_jump(
    spec: &ModelSpec,
    xs: &[f64],
    grid: &FieldGrid,
    eps: f64,
    interior: f64,
) -> Result<f64> {
    require_rational(spec)?;
    let mut worst: f64 = 0.0;
    for i in grid.interior(interior) {
        let x = grid.x[i];
        let up = u_minus_micro(spec, xs, C64::new(x, eps))?;
        let dn = u_minus_micro(spec, xs, C64::new(x, -eps))?;
        let target = 2.0 * PI * spec.g * grid.rho[i];
        if target <= 0.0 {
            continue;
        }
        worst = worst.max((up - dn + target).norm() / target);
    }
    Ok(worst)
}

/// Trapezoid quadrature of the fluid Hamiltonian density
/// `rho v^2/2 + pi^2 g^2 rho^3/6 + (pi g^2/2) rho rho_H' + g^2 rho'^2/(8 rho) + rho V`.
pub fn fluid_energy(grid: &FieldGrid, spec: &ModelSpec) -> f64 {
    let g = spec.g;
    let floor = grid.floor();
    let density: Vec<f64> = (0..grid.len())
        .map(|i| {
            let r = grid.rho[i];
            if r <= 0.0 {
                return 0.0;
            }
            let x = grid.x[i];
            let drho_h = grid.derivative(&grid.rho_h, i);
            let grad = if r > floor {
                let d = grid.derivative(&grid.rho, i);
                g * g * d * d / (8.0 * r)
            } else {
                0.0
            };
            let pot = spec.onebody_v(Species::Particle, C64::new(x, 0.0)).re;
            0.5 * r * grid.v[i] * grid.v[i]
                + PI * PI * g * g * r * r * r / 6.0
                + 0.5 * PI * g * g * r * drho_h
                + grad
                + r * pot
        })
        .collect();
    trapezoid(&density, grid.spacing())
}

/// Velocity field of a single soliton `z = a + i b` and the residual
/// `pi rho_H - d ln sqrt(rho) + (x - a)/((x - a)^2 + b^2) + w(x)/g` of the
/// density in `grid`, on the grid points where the density is positive.
pub fn one_soliton_fields(
    spec: &ModelSpec,
    z: C64,
    grid: &FieldGrid,
) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    require_rational(spec)?;
    if z.im == 0.0 {
        return Err(Error::RealSoliton);
    }
    let (a, b) = (z.re, z.im);
    let g = spec.g;
    let v = grid
        .x
        .iter()
        .map(|&x| -g * b / ((x - a).powi(2) + b * b))
        .collect();
    let floor = grid.floor();
    let residual = (0..grid.len())
        .map(|i| {
            let x = grid.x[i];
            grid.log_slope_above(i, floor).ok().map(|dlog| {
                PI * grid.rho_h[i] - 0.5 * dlog
                    + (x - a) / ((x - a).powi(2) + b * b)
                    + spec.prepot_w_real(x) / g
            })
        })
        .collect();
    Ok((v, residual))
}
