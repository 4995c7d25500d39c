//! Model specification and the closed-form kernels, prepotentials and
//! one-body potentials of the three kernel families.
//!
//! Sign conventions: [`ModelSpec::kernel`] returns the positive kernel
//! `K(x)` (`1/x`, `cot x`, `coth x`). The dual flow carries its own signs,
//! `xdot_j = i w(x_j) - i g sum_k K(x_j - x_k) + i g sum_a K(x_j - z_a)`.
//!
//! [`ModelSpec::v_term`] is the one-body remainder of the two-body
//! decomposition `(w(x_b) - w(x_c)) g K(x_b - x_c) = u(x_b - x_c) + v(x_b) + v(x_c)`.
//! Because the flow uses `-g K`, the potential that drives the second-order
//! motion is `V_a = w^2/2 - (m_tot - m_a) v`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type C64 = Complex64;

const I: C64 = C64::new(0.0, 1.0);

/// Default distance to a kernel singularity below which evaluation fails.
pub const DEFAULT_SINGULAR_EPS: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Rational,
    Trigonometric,
    Hyperbolic,
}

impl KernelKind {
    pub const ALL: [KernelKind; 3] = [
        KernelKind::Rational,
        KernelKind::Trigonometric,
        KernelKind::Hyperbolic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Rational => "rational",
            KernelKind::Trigonometric => "trigonometric",
            KernelKind::Hyperbolic => "hyperbolic",
        }
    }

    /// Constant `C` of the three-body functional equation for `f = g K`.
    pub fn three_body_constant(self, g: f64) -> f64 {
        match self {
            KernelKind::Rational => 0.0,
            KernelKind::Trigonometric => -g * g,
            KernelKind::Hyperbolic => g * g,
        }
    }
}

impl std::str::FromStr for KernelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "rational" => Ok(KernelKind::Rational),
            "trigonometric" | "trig" => Ok(KernelKind::Trigonometric),
            "hyperbolic" | "hyp" => Ok(KernelKind::Hyperbolic),
            other => Err(Error::InvalidSpec(format!("unknown kernel '{other}'"))),
        }
    }
}

/// Particles carry mass +1, solitons mass -1.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Species {
    Particle,
    Soliton,
}

impl Species {
    pub fn mass(self) -> f64 {
        match self {
            Species::Particle => 1.0,
            Species::Soliton => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kernel: KernelKind,
    pub g: f64,
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub n_particles: usize,
    pub n_solitons: usize,
    pub lambda: f64,
    pub singular_eps: f64,
}

impl ModelSpec {
    pub fn new(
        kernel: KernelKind,
        g: f64,
        coeffs: [f64; 4],
        n_particles: usize,
        n_solitons: usize,
    ) -> Result<Self> {
        let spec = ModelSpec {
            kernel,
            g,
            c0: coeffs[0],
            c1: coeffs[1],
            c2: coeffs[2],
            c3: coeffs[3],
            n_particles,
            n_solitons,
            lambda: 1.0,
            singular_eps: DEFAULT_SINGULAR_EPS,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Rational kernel with `w(x) = omega x`.
    pub fn harmonic(g: f64, omega: f64, n_particles: usize, n_solitons: usize) -> Result<Self> {
        Self::new(
            KernelKind::Rational,
            g,
            [0.0, omega, 0.0, 0.0],
            n_particles,
            n_solitons,
        )
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_singular_eps(mut self, eps: f64) -> Self {
        self.singular_eps = eps;
        self
    }

    pub fn with_counts(mut self, n_particles: usize, n_solitons: usize) -> Self {
        self.n_particles = n_particles;
        self.n_solitons = n_solitons;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.g == 0.0 || !self.g.is_finite() {
            return Err(Error::InvalidSpec("coupling g must be finite and nonzero".into()));
        }
        if self.n_particles == 0 {
            return Err(Error::InvalidSpec("need at least one particle".into()));
        }
        let coeffs = [self.c0, self.c1, self.c2, self.c3, self.lambda];
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidSpec("coefficients must be finite".into()));
        }
        if !(self.singular_eps > 0.0) {
            return Err(Error::InvalidSpec("singular_eps must be positive".into()));
        }
        Ok(())
    }

    /// Soliton construction needs the pure one-body decomposition (c3 = 0).
    pub fn check_soliton_mode(&self) -> Result<()> {
        if self.c3 != 0.0 {
            return Err(Error::InvalidSpec(
                "soliton construction and second-order dynamics require c3 = 0".into(),
            ));
        }
        Ok(())
    }

    /// Warning text when a rational prepotential has no well.
    pub fn stability_warning(&self) -> Option<String> {
        if self.kernel == KernelKind::Rational
            && self.c2 != 0.0
            && self.n_solitons > 0
            && self.c1 * self.c1 <= 4.0 * self.c0 * self.c2
        {
            Some(format!(
                "prepotential has no well: c1^2 = {} <= 4 c0 c2 = {}; the constraint may have no solution",
                self.c1 * self.c1,
                4.0 * self.c0 * self.c2
            ))
        } else {
            None
        }
    }

    pub fn total_mass(&self) -> f64 {
        self.n_particles as f64 - self.n_solitons as f64
    }

    /// Distance from `x` to the nearest singularity of `K`.
    pub fn singular_distance(&self, x: C64) -> f64 {
        match self.kernel {
            KernelKind::Rational => x.norm(),
            KernelKind::Trigonometric => {
                let k = (x.re / std::f64::consts::PI).round();
                (x - C64::new(k * std::f64::consts::PI, 0.0)).norm()
            }
            KernelKind::Hyperbolic => {
                let k = (x.im / std::f64::consts::PI).round();
                (x - C64::new(0.0, k * std::f64::consts::PI)).norm()
            }
        }
    }

    /// `K(x)`: `1/x`, `cot x` or `coth x`.
    pub fn kernel(&self, x: C64) -> Result<C64> {
        let d = self.singular_distance(x);
        if d < self.singular_eps {
            return Err(Error::SingularArgument {
                re: x.re,
                im: x.im,
                eps: self.singular_eps,
            });
        }
        Ok(self.kernel_unchecked(x))
    }

    pub fn kernel_real(&self, x: f64) -> Result<f64> {
        self.kernel(C64::new(x, 0.0)).map(|k| k.re)
    }

    pub(crate) fn kernel_unchecked(&self, x: C64) -> C64 {
        match self.kernel {
            KernelKind::Rational => x.inv(),
            KernelKind::Trigonometric => cot(x),
            KernelKind::Hyperbolic => coth(x),
        }
    }

    /// `K'(x)`: `-1/x^2`, `-1/sin^2 x`, `-1/sinh^2 x`.
    pub fn kernel_prime(&self, x: C64) -> Result<C64> {
        let k = self.kernel(x)?;
        Ok(self.kernel_prime_from(k))
    }

    pub(crate) fn kernel_prime_from(&self, k: C64) -> C64 {
        match self.kernel {
            KernelKind::Rational => -k * k,
            KernelKind::Trigonometric => -(k * k + 1.0),
            KernelKind::Hyperbolic => -(k * k - 1.0),
        }
    }

    /// Pair potential shape `P`: `1/x^2`, `1/sin^2 x`, `1/sinh^2 x`.
    pub fn pair_potential(&self, x: C64) -> Result<C64> {
        Ok(-self.kernel_prime(x)?)
    }

    /// Pair force `-d/dx (g^2 K^2) = -2 g^2 K K'` acting on the first member.
    pub fn pair_force(&self, x: C64) -> Result<C64> {
        let k = self.kernel(x)?;
        Ok(-2.0 * self.g * self.g * k * self.kernel_prime_from(k))
    }

    /// Prepotential `w(x)`, including the extended `c3` term.
    pub fn prepot_w(&self, x: C64) -> C64 {
        let (c0, c1, c2, c3) = (self.c0, self.c1, self.c2, self.c3);
        match self.kernel {
            KernelKind::Rational => c0 + x * (c1 + x * (c2 + x * c3)),
            KernelKind::Trigonometric => {
                let t = 2.0 * x;
                c0 + c1 * t.cos() + c2 * t.sin() + c3 * x
            }
            KernelKind::Hyperbolic => {
                let t = 2.0 * x;
                c0 + c1 * t.cosh() + c2 * t.sinh() + c3 * x
            }
        }
    }

    pub fn prepot_w_real(&self, x: f64) -> f64 {
        self.prepot_w(C64::new(x, 0.0)).re
    }

    pub fn prepot_w_prime(&self, x: C64) -> C64 {
        let (c1, c2, c3) = (self.c1, self.c2, self.c3);
        match self.kernel {
            KernelKind::Rational => c1 + x * (2.0 * c2 + 3.0 * c3 * x),
            KernelKind::Trigonometric => {
                let t = 2.0 * x;
                -2.0 * c1 * t.sin() + 2.0 * c2 * t.cos() + c3
            }
            KernelKind::Hyperbolic => {
                let t = 2.0 * x;
                2.0 * c1 * t.sinh() + 2.0 * c2 * t.cosh() + c3
            }
        }
    }

    /// Antiderivative `W(x) = int_0^x w`, closed form.
    pub fn prepot_big_w(&self, x: f64) -> f64 {
        let (c0, c1, c2, c3) = (self.c0, self.c1, self.c2, self.c3);
        match self.kernel {
            KernelKind::Rational => x * (c0 + x * (c1 / 2.0 + x * (c2 / 3.0 + x * c3 / 4.0))),
            KernelKind::Trigonometric => {
                let t = 2.0 * x;
                c0 * x + 0.5 * c1 * t.sin() + 0.5 * c2 * (1.0 - t.cos()) + 0.5 * c3 * x * x
            }
            KernelKind::Hyperbolic => {
                let t = 2.0 * x;
                c0 * x + 0.5 * c1 * t.sinh() + 0.5 * c2 * (t.cosh() - 1.0) + 0.5 * c3 * x * x
            }
        }
    }

    /// One-body remainder `v(x)` of the two-body decomposition for `f = +g K`.
    pub fn v_term(&self, x: C64) -> C64 {
        let g = self.g;
        match self.kernel {
            KernelKind::Rational => g * x * (self.c2 + 1.5 * self.c3 * x),
            KernelKind::Trigonometric => {
                let t = 2.0 * x;
                g * (self.c2 * t.cos() - self.c1 * t.sin())
            }
            KernelKind::Hyperbolic => {
                let t = 2.0 * x;
                g * (self.c2 * t.cosh() + self.c1 * t.sinh())
            }
        }
    }

    pub fn v_term_prime(&self, x: C64) -> C64 {
        let g = self.g;
        match self.kernel {
            KernelKind::Rational => g * (self.c2 + 3.0 * self.c3 * x),
            KernelKind::Trigonometric => {
                let t = 2.0 * x;
                -2.0 * g * (self.c2 * t.sin() + self.c1 * t.cos())
            }
            KernelKind::Hyperbolic => {
                let t = 2.0 * x;
                2.0 * g * (self.c2 * t.sinh() + self.c1 * t.cosh())
            }
        }
    }

    /// Weight multiplying `v` in the one-body potential of `species`.
    fn v_weight(&self, species: Species) -> f64 {
        -(self.total_mass() - species.mass())
    }

    /// One-body potential `V(x) = w^2/2 - (m_tot - m_a) v(x)` driving
    /// `xddot = -V'(x)` for the given species.
    pub fn onebody_v(&self, species: Species, x: C64) -> C64 {
        let w = self.prepot_w(x);
        0.5 * w * w + self.v_weight(species) * self.v_term(x)
    }

    pub fn onebody_v_prime(&self, species: Species, x: C64) -> C64 {
        self.prepot_w(x) * self.prepot_w_prime(x) + self.v_weight(species) * self.v_term_prime(x)
    }
}

/// `cot z`, stable for large `|Im z|`.
pub fn cot(z: C64) -> C64 {
    if z.im >= 0.0 {
        let q = (2.0 * I * z).exp();
        I * (q + 1.0) / (q - 1.0)
    } else {
        let q = (-2.0 * I * z).exp();
        I * (1.0 + q) / (1.0 - q)
    }
}

/// `coth z`, stable for large `|Re z|`.
pub fn coth(z: C64) -> C64 {
    if z.re >= 0.0 {
        let q = (-2.0 * z).exp();
        (1.0 + q) / (1.0 - q)
    } else {
        let q = (2.0 * z).exp();
        (q + 1.0) / (q - 1.0)
    }
}

/// `ln |sin z|` without overflow for large `|Im z|`.
pub fn ln_abs_sin(z: C64) -> f64 {
    ln_abs_half_cosh_minus_cos(z.im, z.re)
}

/// `ln |sinh z|` without overflow for large `|Re z|`.
pub fn ln_abs_sinh(z: C64) -> f64 {
    ln_abs_half_cosh_minus_cos(z.re, z.im)
}

// ln sqrt((cosh 2a - cos 2b)/2); |sin(b + ia)|^2 = |sinh(a + ib)|^2 = that.
fn ln_abs_half_cosh_minus_cos(a: f64, b: f64) -> f64 {
    let a = a.abs();
    if a < 20.0 {
        let s = b.sin();
        let sh = a.sinh();
        0.5 * (s * s + sh * sh).ln()
    } else {
        let e = (-2.0 * a).exp();
        a - std::f64::consts::LN_2 + 0.5 * (1.0 - 2.0 * (2.0 * b).cos() * e + e * e).ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn rational(g: f64, c: [f64; 4], n: usize, m: usize) -> ModelSpec {
        ModelSpec::new(KernelKind::Rational, g, c, n, m).unwrap()
    }

    #[test]
    fn kernel_values() {
        let r = rational(1.0, [0.0; 4], 1, 0);
        assert_eq!(r.kernel(C64::new(2.0, 0.0)).unwrap().re, 0.5);
        let t = ModelSpec::new(KernelKind::Trigonometric, 1.0, [0.0; 4], 1, 0).unwrap();
        assert!(close(t.kernel_real(PI / 4.0).unwrap(), 1.0, 1e-15));
        let h = ModelSpec::new(KernelKind::Hyperbolic, 1.0, [0.0; 4], 1, 0).unwrap();
        assert!(close(h.kernel_real(20.0).unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn kernel_singularities_are_reported() {
        let r = rational(1.0, [0.0; 4], 1, 0);
        assert!(matches!(
            r.kernel(C64::new(1e-12, 0.0)),
            Err(Error::SingularArgument { .. })
        ));
        let t = ModelSpec::new(KernelKind::Trigonometric, 1.0, [0.0; 4], 1, 0).unwrap();
        assert!(t.kernel(C64::new(PI + 1e-12, 0.0)).is_err());
        assert!(t.kernel(C64::new(PI + 1e-3, 0.0)).is_ok());
        let h = ModelSpec::new(KernelKind::Hyperbolic, 1.0, [0.0; 4], 1, 0).unwrap();
        assert!(h.kernel(C64::new(0.0, PI)).is_err());
    }

    #[test]
    fn cot_coth_match_direct_formulas() {
        for &z in &[C64::new(0.3, 0.2), C64::new(-1.1, -0.7), C64::new(2.0, 0.0)] {
            let direct = z.cos() / z.sin();
            assert!((cot(z) - direct).norm() < 1e-14);
            let directh = z.cosh() / z.sinh();
            assert!((coth(z) - directh).norm() < 1e-14);
        }
        // far from the real axis the direct ratio overflows
        assert!((cot(C64::new(0.4, 400.0)) + I).norm() < 1e-15);
        assert!((coth(C64::new(-400.0, 0.3)) + 1.0).norm() < 1e-15);
    }

    #[test]
    fn log_abs_helpers() {
        let z = C64::new(0.7, 1.3);
        assert!(close(ln_abs_sin(z), z.sin().norm().ln(), 1e-14));
        assert!(close(ln_abs_sinh(z), z.sinh().norm().ln(), 1e-14));
        let far = C64::new(0.7, 30.0);
        assert!(close(ln_abs_sin(far), far.sin().norm().ln(), 1e-12));
    }

    #[test]
    fn prepotential_examples() {
        let s = rational(0.5, [0.0, 1.0, 0.06, 0.0], 31, 1);
        assert!(close(s.prepot_w_real(1.0), 1.06, 1e-15));
        assert!(close(s.prepot_big_w(1.0), 0.52, 1e-15));
        let zero = rational(0.5, [0.0; 4], 3, 0);
        assert_eq!(zero.prepot_w_real(1.7), 0.0);
        let t = ModelSpec::new(KernelKind::Trigonometric, 1.0, [0.0, 1.0, 0.0, 0.0], 1, 0).unwrap();
        assert!(close(t.prepot_w_real(PI / 2.0), -1.0, 1e-15));
        let c = rational(1.0, [1.0, 0.0, 0.0, 0.0], 1, 0);
        assert_eq!(c.prepot_big_w(3.0), 3.0);
        for kind in KernelKind::ALL {
            let s = ModelSpec::new(kind, 0.7, [0.3, -0.2, 0.5, 0.1], 2, 0).unwrap();
            assert_eq!(s.prepot_big_w(0.0), 0.0);
        }
    }

    #[test]
    fn extended_c3_terms() {
        let r = rational(1.0, [0.0, 0.0, 0.0, 2.0], 1, 0);
        assert!(close(r.prepot_w_real(1.5), 2.0 * 3.375, 1e-14));
        let t = ModelSpec::new(KernelKind::Trigonometric, 1.0, [0.0, 0.0, 0.0, 2.0], 1, 0).unwrap();
        assert!(close(t.prepot_w_real(0.4), 0.8, 1e-15));
    }

    /// Coefficients of the potential as a polynomial, recovered by exact
    /// sampling (degree 4 polynomial, 5 points).
    fn poly_coeffs(f: impl Fn(f64) -> f64) -> [f64; 5] {
        let vandermonde = nalgebra::SMatrix::<f64, 5, 5>::from_fn(|r, c| (r as f64).powi(c as i32));
        let ys = nalgebra::SVector::<f64, 5>::from_fn(|k, _| f(k as f64));
        let sol = vandermonde.lu().solve(&ys).expect("nodes are distinct");
        sol.into()
    }

    #[test]
    fn figure_one_coefficient_magnitudes() {
        let one = rational(0.5, [0.0, 1.0, 0.06, 0.0], 31, 1);
        let vp = poly_coeffs(|x| one.onebody_v(Species::Particle, C64::new(x, 0.0)).re);
        let vs = poly_coeffs(|x| one.onebody_v(Species::Soliton, C64::new(x, 0.0)).re);
        assert!(close(vp[1], -0.87, 1e-10), "{vp:?}");
        assert!(close(vp[2], 0.5, 1e-10));
        assert!(close(vp[3], 0.06, 1e-10));
        assert!(close(vp[4], 0.0018, 1e-12));
        assert!(close(vs[1], -0.93, 1e-10));
        let two = one.clone().with_counts(31, 2);
        let vp2 = poly_coeffs(|x| two.onebody_v(Species::Particle, C64::new(x, 0.0)).re);
        let vs2 = poly_coeffs(|x| two.onebody_v(Species::Soliton, C64::new(x, 0.0)).re);
        assert!(close(vp2[1], -0.84, 1e-10));
        assert!(close(vs2[1], -0.90, 1e-10));
        // v-term weights in the f = +gK convention carry the published signs
        let v1 = one.v_term(C64::new(1.0, 0.0)).re;
        assert!(close(29.0 * v1, 0.87, 1e-12));
        assert!(close(31.0 * v1, 0.93, 1e-12));
    }

    #[test]
    fn soliton_force_polynomial() {
        let one = rational(0.5, [0.0, 1.0, 0.06, 0.0], 31, 1);
        for &z in &[C64::new(0.0, 0.0239), C64::new(1.3, -0.4)] {
            let expected = -0.93 + z + 0.18 * z * z + 0.0072 * z * z * z;
            assert!((one.onebody_v_prime(Species::Soliton, z) - expected).norm() < 1e-13);
        }
    }

    #[test]
    fn stability_warning_only_without_well() {
        let ok = rational(1.0, [0.0, 1.0, 0.06, 0.0], 31, 1);
        assert!(ok.stability_warning().is_none());
        let bad = rational(1.0, [1.0, 0.0, 0.5, 0.0], 31, 1);
        assert!(bad.stability_warning().is_some());
        assert!(rational(1.0, [0.0, 0.0, 0.0, 1.0], 3, 1).check_soliton_mode().is_err());
    }

    #[test]
    fn invalid_specs() {
        assert!(ModelSpec::new(KernelKind::Rational, 0.0, [0.0; 4], 1, 0).is_err());
        assert!(ModelSpec::new(KernelKind::Rational, 1.0, [0.0; 4], 0, 0).is_err());
        assert!("weierstrass".parse::<KernelKind>().is_err());
        assert_eq!("trig".parse::<KernelKind>().unwrap(), KernelKind::Trigonometric);
    }

    #[test]
    fn pair_force_matches_inverse_cube() {
        let r = rational(0.7, [0.0; 4], 2, 0);
        let x = C64::new(1.3, 0.0);
        assert!((r.pair_force(x).unwrap().re - 2.0 * 0.49 / 1.3f64.powi(3)).abs() < 1e-14);
    }
}
