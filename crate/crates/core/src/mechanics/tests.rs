use std::sync::Arc;

use rand::{Rng, SeedableRng};

use super::*;
use crate::geometry::{box_mesh, generate_idealized_lv, FiberParams, LvResolution, LvShape, RuleBasedFibers, UniformFibers};
use crate::par::norm_inf;
use crate::units::PA_PER_MMHG;

fn lv() -> Mechanics {
    let mesh = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 8, 4)).unwrap());
    let fibers = RuleBasedFibers::for_mesh(&mesh, FiberParams::default()).unwrap();
    Mechanics::new(mesh, &fibers, MechParams::default()).unwrap()
}

fn slab(params: MechParams) -> Mechanics {
    let mesh = Arc::new(box_mesh([2, 2, 2], [10.0, 10.0, 10.0]).unwrap());
    Mechanics::new(mesh, &UniformFibers(crate::geometry::FiberFrame::IDENTITY), params).unwrap()
}

fn random_d(m: &Mechanics, amp: f64, seed: u64) -> Vec<f64> {
    let mut rng = rand::rngs::StdRng::seed_from_u64(seed);
    (0..m.n_dofs()).map(|_| rng.random_range(-amp..amp)).collect()
}

#[test]
fn reference_state_has_zero_residual() {
    let m = lv();
    let d = vec![0.0; m.n_dofs()];
    let r = m.static_residual(&d, 0.0, None, None).unwrap();
    assert!(norm_inf(&r) == 0.0);
    let st = MechState::at_rest(d.clone(), 0.0);
    let r = m.dynamic_residual(&d, 0.0, &st, None, 1e-3, None).unwrap();
    assert!(norm_inf(&r) == 0.0);
}

#[test]
fn rigid_translation_is_force_free_without_support() {
    let params = MechParams {
        k_perp: 0.0,
        k_par: 0.0,
        c_perp: 0.0,
        c_par: 0.0,
        ..MechParams::default()
    };
    let m = slab(params);
    let d: Vec<f64> = (0..m.n_dofs()).map(|i| [1e-3, -2e-3, 5e-4][i % 3]).collect();
    let r = m.static_residual(&d, 0.0, None, None).unwrap();
    assert!(norm_inf(&r) < 1e-12);
}

#[test]
fn pressure_load_is_self_equilibrated() {
    let m = lv();
    let d0 = vec![0.0; m.n_dofs()];
    for d in [d0, random_d(&m, 2e-4, 3)] {
        let p = m.pressure_load(&d).unwrap();
        let scale = norm_inf(&p);
        for c in 0..3 {
            let total: f64 = p.iter().skip(c).step_by(3).sum();
            assert!(total.abs() < 1e-10 * scale * p.len() as f64, "component {c}: {total}");
        }
    }
}

#[test]
fn vbase_is_axial_and_scale_invariant() {
    let m = lv();
    let v = m.compute_vbase(None).unwrap();
    assert!(v.x.abs() < 1e-12 && v.y.abs() < 1e-12);
    assert!(v.z > 0.0);
    let lambda = 1.1;
    let d: Vec<f64> = m
        .space()
        .dof_points()
        .iter()
        .flat_map(|x| x.map(|c| (lambda - 1.0) * c))
        .collect();
    let w = m.compute_vbase(Some(&d)).unwrap();
    assert!((w - v).norm() < 1e-12 * v.norm());
}

#[test]
fn jacobian_matches_finite_differences() {
    let m = lv();
    for seed in 0..5 {
        let d = random_d(&m, 5e-4, seed);
        let mut jac = m.zero_matrix();
        let r = m.static_residual(&d, 0.0, None, Some(&mut jac)).unwrap();
        let dir = random_d(&m, 1.0, 100 + seed);
        let an = jac.mul_vec(&dir);
        let h = 1e-8;
        let dp: Vec<f64> = d.iter().zip(&dir).map(|(a, b)| a + h * b).collect();
        let dm: Vec<f64> = d.iter().zip(&dir).map(|(a, b)| a - h * b).collect();
        let rp = m.static_residual(&dp, 0.0, None, None).unwrap();
        let rm = m.static_residual(&dm, 0.0, None, None).unwrap();
        let fd: Vec<f64> = rp.iter().zip(&rm).map(|(a, b)| (a - b) / (2.0 * h)).collect();
        let err: Vec<f64> = fd.iter().zip(&an).map(|(a, b)| a - b).collect();
        assert!(norm_inf(&err) <= 1e-5 * norm_inf(&an), "seed {seed}: {}", norm_inf(&err) / norm_inf(&an));
        assert!(norm_inf(&r).is_finite());
    }
}

#[test]
fn pressure_jacobian_matches_finite_differences_with_frozen_vbase() {
    let m = lv();
    let d = random_d(&m, 5e-4, 9);
    let vb = m.compute_vbase(Some(&d)).unwrap();
    let mut jac = m.zero_matrix();
    let mut base = vec![0.0; m.n_dofs()];
    m.add_pressure_load(&d, &vb, 1.0, &mut base, Some(&mut jac)).unwrap();
    let dir = random_d(&m, 1.0, 10);
    let an = jac.mul_vec(&dir);
    let h = 1e-7;
    let eval = |s: f64| {
        let x: Vec<f64> = d.iter().zip(&dir).map(|(a, b)| a + s * b).collect();
        let mut out = vec![0.0; m.n_dofs()];
        m.add_pressure_load(&x, &vb, 1.0, &mut out, None).unwrap();
        out
    };
    let (p, q) = (eval(h), eval(-h));
    let err = p.iter().zip(&q).zip(&an).map(|((a, b), c)| ((a - b) / (2.0 * h) - c).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-6 * norm_inf(&an));
}

#[test]
fn pressure_derivative_is_minus_load_at_reference() {
    let m = lv();
    let d = vec![0.0; m.n_dofs()];
    let r1 = m.static_residual(&d, 1.0, None, None).unwrap();
    let load = m.pressure_load(&d).unwrap();
    let err = r1.iter().zip(&load).map(|(a, b)| (a + b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-14);
}

#[test]
fn dynamic_residual_limits() {
    let m = lv();
    let d = random_d(&m, 3e-4, 21);
    let st = MechState::at_rest(d.clone(), 0.0);
    let rs = m.static_residual(&d, 500.0, None, None).unwrap();
    let rd = m.dynamic_residual(&d, 500.0, &st, None, 1e-3, None).unwrap();
    let err = rs.iter().zip(&rd).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(err < 1e-10 * norm_inf(&rs));
    // Inertia scales with 1/Δt² when the damping term is switched off.
    let params = MechParams {
        c_perp: 0.0,
        c_par: 0.0,
        ..MechParams::default()
    };
    let m = slab(params);
    let zero = vec![0.0; m.n_dofs()];
    let d = random_d(&m, 1e-5, 4);
    let st = MechState::at_rest(zero.clone(), 0.0);
    let rstat = m.static_residual(&d, 0.0, None, None).unwrap();
    let r1 = m.dynamic_residual(&d, 0.0, &st, None, 2e-3, None).unwrap();
    let r2 = m.dynamic_residual(&d, 0.0, &st, None, 1e-3, None).unwrap();
    let i = 7;
    assert!(((r2[i] - rstat[i]) / (r1[i] - rstat[i]) - 4.0).abs() < 1e-9);
}

#[test]
fn dynamic_jacobian_matches_finite_differences() {
    let m = lv();
    let d_n = random_d(&m, 3e-4, 30);
    let st = MechState {
        d_nm1: random_d(&m, 3e-4, 31),
        d_n: d_n.clone(),
        p_lv: 0.0,
    };
    let d = random_d(&m, 3e-4, 32);
    let mut jac = m.zero_matrix();
    m.dynamic_residual(&d, 0.0, &st, None, 1e-3, Some(&mut jac)).unwrap();
    let dir = random_d(&m, 1.0, 33);
    let an = jac.mul_vec(&dir);
    let h = 1e-8;
    let x = |s: f64| -> Vec<f64> { d.iter().zip(&dir).map(|(a, b)| a + s * b).collect() };
    let rp = m.dynamic_residual(&x(h), 0.0, &st, None, 1e-3, None).unwrap();
    let rm = m.dynamic_residual(&x(-h), 0.0, &st, None, 1e-3, None).unwrap();
    let err = rp.iter().zip(&rm).zip(&an).map(|((a, b), c)| ((a - b) / (2.0 * h) - c).abs()).fold(0.0, f64::max);
    assert!(err <= 1e-5 * norm_inf(&an));
}

#[test]
fn quasi_static_trivial_and_failure_paths() {
    let m = lv();
    let zero = vec![0.0; m.n_dofs()];
    let sol = m.quasi_static_solve(0.0, None, &zero, &NewtonParams::default());
    assert!(sol.converged && sol.outcome.iterations <= 2);
    assert!(norm_inf(&sol.d) == 0.0);
    let bad = m.quasi_static_solve(1e7, None, &zero, &NewtonParams {
        max_iter: 5,
        ..NewtonParams::default()
    });
    assert!(!bad.converged);
}

#[test]
fn inflation_moves_endocardium_outward_and_is_reversible() {
    let m = lv();
    let params = NewtonParams::default();
    let p = 10.0 * PA_PER_MMHG;
    let d = m.pressure_ramp_init(p, 4, None, &params).unwrap();
    // The work of the pressure on its own displacement is positive.
    let load = m.pressure_load(&vec![0.0; m.n_dofs()]).unwrap();
    let work: f64 = load.iter().zip(&d).map(|(a, b)| a * b).sum();
    assert!(work > 0.0);
    let d2 = m.pressure_ramp_init(p, 2, None, &params).unwrap();
    let diff = d.iter().zip(&d2).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff <= 1e-6);
    let back = m.pressure_ramp_from(d, p, 0.0, 4, None, &params).unwrap();
    assert!(norm_inf(&back) <= 1e-8);
}

#[test]
fn active_tension_shortens_fibers() {
    let m = lv();
    let ta = vec![20e3; m.space().n_dofs()];
    let zero = vec![0.0; m.n_dofs()];
    let sol = m.quasi_static_solve(0.0, Some(&ta), &zero, &NewtonParams::default());
    assert!(sol.converged);
    // Contraction reduces the enclosed volume: the pressure load does negative work.
    let load = m.pressure_load(&zero).unwrap();
    let work: f64 = load.iter().zip(&sol.d).map(|(a, b)| a * b).sum();
    assert!(work < 0.0);
}
