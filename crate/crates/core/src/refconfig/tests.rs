use std::sync::Arc;

use super::*;
use crate::fem::FeSpace;
use crate::geometry::{generate_idealized_lv, trilinear_map, face_to_cell, FiberParams, LvResolution, LvShape, RuleBasedFibers};
use crate::mechanics::MechParams;
use crate::units::PA_PER_MMHG;

fn lv_mech(res: LvResolution) -> Mechanics {
    let mesh = Arc::new(generate_idealized_lv(&LvShape::default(), &res).unwrap());
    let fibers = RuleBasedFibers::for_mesh(&mesh, FiberParams::default()).unwrap();
    Mechanics::new(mesh, &fibers, MechParams::default()).unwrap()
}

/// Loaded geometry obtained by inflating the generated (stress-free) mesh.
fn loaded_from(reference: &Mechanics, p: f64) -> (Mechanics, Vec<f64>) {
    let d = reference.pressure_ramp_init(p, 4, None, &NewtonParams::default()).unwrap();
    let xt = deformed(reference.space().vertex_coords(), &d);
    (reference.with_reference(xt).unwrap(), d)
}

#[test]
fn zero_load_recovers_the_loaded_geometry() {
    let m = lv_mech(LvResolution::new(1, 8, 4));
    let rec = reference_configuration_base(&m, 0.0, None, 10, 1e-4, &NewtonParams::default()).unwrap();
    assert!(rec.converged);
    assert_eq!(rec.report.fixed_point_iterations, 0);
    assert_eq!(rec.x0, m.space().vertex_coords());
    let rec = reference_configuration(&m, 0.0, None, &RecoveryParams::default()).unwrap();
    assert!(rec.converged);
}

#[test]
fn relaxed_recovery_round_trip() {
    let reference = lv_mech(LvResolution::new(1, 8, 4));
    let p = 10.0 * PA_PER_MMHG;
    let (loaded, d_true) = loaded_from(&reference, p);
    let params = RecoveryParams::default();
    let rec = reference_configuration(&loaded, p, None, &params).unwrap();
    assert!(rec.converged);
    let err = max_diff(&rec.x0, reference.space().vertex_coords());
    assert!(err <= params.eps_final * max_abs(&d_true), "{err} vs {}", max_abs(&d_true));
    // The ramp is monotone and ends at the full load.
    assert!(rec.report.omega_path.windows(2).all(|w| w[0] <= w[1]));
    assert_eq!(*rec.report.omega_path.last().unwrap(), 1.0);
    assert!(rec.report.alpha_path.iter().all(|a| (params.alpha_min..=params.alpha_max).contains(a)));
    let ratio = verify_recovery(&loaded, &rec, p, None, &params.newton).unwrap();
    assert!(ratio <= params.eps_final);
}

#[test]
fn fixed_point_accepts_a_converged_guess() {
    let reference = lv_mech(LvResolution::new(1, 8, 4));
    let p = 5.0 * PA_PER_MMHG;
    let (loaded, d) = loaded_from(&reference, p);
    let mut report = RecoveryReport::default();
    let out = fixed_point(
        &loaded,
        p,
        None,
        reference.space().vertex_coords(),
        &d,
        1e-4,
        &RecoveryParams::default(),
        &mut report,
    );
    assert!(out.is_some());
    assert_eq!(report.fixed_point_iterations, 1);
}

#[test]
fn invalid_parameters_are_rejected() {
    let m = lv_mech(LvResolution::new(1, 8, 4));
    let params = RecoveryParams {
        gamma_alpha_minus: 1.5,
        ..RecoveryParams::default()
    };
    assert!(reference_configuration(&m, 1.0, None, &params).is_err());
}

fn linear_field(x: [f64; 3]) -> [f64; 3] {
    [1e-3 + 0.1 * x[0] - 0.05 * x[2], -2e-3 + 0.07 * x[1], 0.02 * x[0] + 0.03 * x[1] + 0.04 * x[2]]
}

#[test]
fn projection_is_exact_inside_for_linear_fields() {
    let coarse_mesh = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 12, 6)).unwrap());
    let fine_mesh = generate_idealized_lv(&LvShape::default(), &LvResolution::new(2, 10, 8)).unwrap();
    let coarse = FeSpace::new(coarse_mesh, 1);
    let d = coarse.interpolate_vector(linear_field);
    let targets: Vec<[f64; 3]> = fine_mesh.vertices.iter().map(|v| v.map(|c| c * 1e-3)).collect();
    let proj = project_displacement(&coarse, &d, &targets).unwrap();
    assert!(proj.n_internal() > 0 && proj.n_external() > 0);
    for (i, l) in proj.locations.iter().enumerate() {
        if l.is_inside() {
            let exact = linear_field(targets[i]);
            for c in 0..3 {
                assert!((proj.values[i][c] - exact[c]).abs() <= 1e-12, "vertex {i}");
            }
        }
    }
    let x0 = proj.recovered_reference(&targets);
    assert_eq!(x0.len(), targets.len());
}

#[test]
fn external_points_take_brute_force_closest_values() {
    let coarse_mesh = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 8, 4)).unwrap());
    let coarse = FeSpace::new(coarse_mesh.clone(), 1);
    let d = coarse.interpolate_vector(|x| [x[1] * x[2] * 10.0, x[0] * 0.2, -x[2] * 0.1]);
    let faces = coarse_mesh.exterior_faces();
    // Points pushed outward from boundary face centres.
    let mut targets = Vec::new();
    for &(c, f) in faces.iter().step_by(3) {
        let xs = coarse.cell_coords(c);
        let ctr = trilinear_map(&xs, face_to_cell(f, 0.4, 0.6));
        let inner = trilinear_map(&xs, [0.5; 3]);
        targets.push([0, 1, 2].map(|k| ctr[k] + 0.3 * (ctr[k] - inner[k])));
    }
    let proj = project_displacement(&coarse, &d, &targets).unwrap();
    for (i, x) in targets.iter().enumerate() {
        let Location::Outside { distance, .. } = proj.locations[i] else {
            continue;
        };
        let mut oracle = f64::INFINITY;
        for &(c, f) in &faces {
            let xs = coarse.cell_coords(c);
            let n = 200;
            for a in 0..=n {
                for b in 0..=n {
                    let p = trilinear_map(&xs, face_to_cell(f, a as f64 / n as f64, b as f64 / n as f64));
                    let dd = ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2)).sqrt();
                    oracle = oracle.min(dd);
                }
            }
        }
        assert!(distance <= oracle + 1e-12);
        assert!(oracle - distance <= 1e-3 * coarse_mesh.mesh_size() * 1e-3);
        let (c, xi) = proj.locations[i].cell_xi();
        assert_eq!(proj.values[i], coarse.eval_vector(c, xi, &d));
    }
}
