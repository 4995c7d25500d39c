//! Continuum-limit checks on harmonic equilibria and one-soliton states.

use std::f64::consts::PI;

use calogero_dual::dynamics::{total_energy, PhaseState};
use calogero_dual::hydro::{
    fluid_energy, one_soliton_fields, sum_identity_residual, u_minus_jump, u_plus_hydro,
    u_plus_micro, FieldGrid,
};
use calogero_dual::init::{gradient_flow, harmonic_equilibrium_reference, FlowOptions, FlowScheme};
use calogero_dual::{ModelSpec, C64};

struct Background {
    n: usize,
    x: Vec<f64>,
    grid: FieldGrid,
    spec: ModelSpec,
}

fn background(n: usize) -> Background {
    let x = harmonic_equilibrium_reference(n, 1.0, 1.0).unwrap();
    let grid = FieldGrid::from_particles(&x, None, 2048, 2.0).unwrap();
    let spec = ModelSpec::harmonic(1.0, 1.0, n, 0).unwrap();
    Background { n, x, grid, spec }
}

/// Sup-relative deviation of the hydrodynamic `u+` from `i w` in the middle
/// 80% of the cloud.
fn background_error(b: &Background) -> f64 {
    let idx = b.grid.interior(0.8);
    let u = u_plus_hydro(&b.grid, 1.0, &idx).unwrap();
    let mut err: f64 = 0.0;
    let mut top: f64 = 0.0;
    for (&i, ui) in idx.iter().zip(&u) {
        let target = C64::new(0.0, b.grid.x[i]);
        err = err.max((ui - target).norm());
        top = top.max(target.norm());
    }
    err / top
}

fn energy_error(b: &Background) -> f64 {
    let s = PhaseState {
        x: b.x.clone(),
        p: vec![0.0; b.n],
        z: vec![],
        zdot: vec![],
        t: 0.0,
    };
    let discrete = total_energy(&b.spec, &s).unwrap().re;
    (fluid_energy(&b.grid, &b.spec) - discrete).abs() / discrete
}

#[test]
fn consistency_improves_with_particle_number() {
    let mut previous = (f64::INFINITY, f64::INFINITY);
    for n in [50, 100, 200, 400] {
        let b = background(n);
        let errors = (background_error(&b), energy_error(&b));
        assert!(errors.0 < previous.0 && errors.1 < previous.1, "N={n}: {errors:?} after {previous:?}");
        previous = errors;
    }
    // largest system meets the absolute targets
    assert!(previous.0 < 5e-2 && previous.1 < 5e-2, "{previous:?}");
}

#[test]
fn large_cloud_density_and_energy() {
    let b = background(400);
    assert!((b.grid.mass() - 400.0).abs() < 4.0);
    let r = (2.0 * 400.0f64).sqrt();
    for i in b.grid.interior(0.8) {
        let x = b.grid.x[i];
        let exact = (r * r - x * x).max(0.0).sqrt() / PI;
        assert!((b.grid.rho[i] - exact).abs() < 3e-2 * exact, "x={x}");
    }
    let fine = FieldGrid::from_particles(&b.x, None, 4096, 2.0).unwrap();
    let (e1, e2) = (fluid_energy(&b.grid, &b.spec), fluid_energy(&fine, &b.spec));
    assert!((e2 - e1).abs() < 1e-3 * e1.abs(), "{e1} {e2}");
}

#[test]
fn two_particles_are_not_a_fluid() {
    let b = background(2);
    let res = sum_identity_residual(&b.x, 1, &b.grid).unwrap();
    assert!(res / (PI * b.grid.sample(&b.grid.rho, b.x[1])) > 0.03, "{res}");
    assert!(energy_error(&b) > 0.5);
}

#[test]
fn jump_degrades_as_offset_approaches_cloud_width() {
    let b = background(400);
    let h = b.grid.spacing();
    let errors: Vec<f64> = [5.0, 40.0, 160.0, 640.0]
        .iter()
        .map(|k| u_minus_jump(&b.spec, &b.x, &b.grid, k * h, 0.8).unwrap())
        .collect();
    assert!(errors.windows(2).all(|w| w[0] < w[1]), "{errors:?}");
}

#[test]
fn one_soliton_state_matches_fluid_description() {
    let n = 400;
    let spec = ModelSpec::harmonic(1.0, 1.0, n, 1).unwrap();
    let z = [C64::new(0.0, 1.0)];
    let x0 = harmonic_equilibrium_reference(n, 1.0, 1.0).unwrap();
    let opts = FlowOptions {
        scheme: FlowScheme::LinearlyImplicit,
        max_iter: 200,
        ..FlowOptions::default()
    };
    let init = gradient_flow(&spec, &z, &x0, &opts).unwrap();
    let grid = FieldGrid::from_particles(&init.x, Some(&init.p), 2048, 2.0).unwrap();
    let (_, residual) = one_soliton_fields(&spec, z[0], &grid).unwrap();
    let idx = grid.interior(0.8);
    let worst = idx
        .iter()
        .map(|&i| residual[i].expect("positive density inside the cloud").abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.1, "{worst}");

    let hydro = u_plus_hydro(&grid, 1.0, &idx).unwrap();
    let mut err: f64 = 0.0;
    let mut top: f64 = 0.0;
    for (&i, uh) in idx.iter().zip(&hydro) {
        let um = u_plus_micro(&spec, &z, C64::new(grid.x[i], 0.0)).unwrap();
        err = err.max((uh - um).norm());
        top = top.max(um.norm());
    }
    assert!(err < 5e-2 * top, "{err} vs {top}");
}
