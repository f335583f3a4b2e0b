//! Acceptance suite. Prints one line per criterion and exits non-zero when
//! a criterion fails that is not listed in `EXPECTED_FAILURES`, or when a
//! listed one passes.
//!
//! Run with `cargo test --release -p cardioem --test acceptance`.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand::rngs::StdRng;

use cardioem::coupling0d::{rk4, CircParams, LinearSolve, SaddleWorkspace};
use cardioem::driver::{run_heartbeat, run_variant, RunConfig, Scenario, Simulation, VariantResult};
use cardioem::ep::{ActivationMap, Conductivity, Monodomain, ReducedIonicModel, Stimulus};
use cardioem::fem::FeSpace;
use cardioem::geometry::{
    box_mesh, face_to_cell, generate_idealized_lv, refine_octree, trilinear_map, FiberFrame, FiberParams, LvResolution,
    LvShape, RuleBasedFibers, UniformFibers,
};
use cardioem::intergrid::TransferOperator;
use cardioem::mechanics::{newton, MechParams, Mechanics, NewtonParams};
use cardioem::par::norm_inf;
use cardioem::refconfig::{
    project_displacement, reference_configuration, reference_configuration_base, Location, RecoveryParams,
};
use cardioem::units::mmhg_to_pa;

/// Criterion 10: end-diastolic pressure shifts by about 30% under the
/// contractility change in the closed-loop circulation, against the 2%
/// bound. The stroke volume and peak pressure directions hold.
const EXPECTED_FAILURES: &[usize] = &[10];

type Outcome = Result<(bool, String), Box<dyn std::error::Error>>;

fn lv_mech() -> Mechanics {
    let mesh = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 8, 4)).unwrap());
    let fibers = RuleBasedFibers::for_mesh(&mesh, FiberParams::default()).unwrap();
    Mechanics::new(mesh, &fibers, MechParams::default()).unwrap()
}

fn max_diff(a: &[[f64; 3]], b: &[[f64; 3]]) -> f64 {
    a.iter()
        .zip(b)
        .flat_map(|(p, q)| (0..3).map(move |k| (p[k] - q[k]).abs()))
        .fold(0.0, f64::max)
}

fn deformed(x: &[[f64; 3]], d: &[f64]) -> Vec<[f64; 3]> {
    x.iter()
        .enumerate()
        .map(|(i, p)| [0, 1, 2].map(|c| p[c] + d[3 * i + c]))
        .collect()
}

fn rel_l2(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

fn recovery_round_trip() -> Outcome {
    let start = Instant::now();
    let reference = lv_mech();
    let p = mmhg_to_pa(10.0);
    let d_true = reference.pressure_ramp_init(p, 4, None, &NewtonParams::default())?;
    let loaded = reference.with_reference(deformed(reference.space().vertex_coords(), &d_true))?;
    let params = RecoveryParams::default();
    let rec = reference_configuration(&loaded, p, None, &params)?;
    let err = max_diff(&rec.x0, reference.space().vertex_coords());
    let bound = params.eps_final * norm_inf(&d_true);
    let secs = start.elapsed().as_secs_f64();
    Ok((
        rec.converged && err <= bound && secs <= 600.0,
        format!("|x0 - x0*|inf = {err:.3e} m, bound {bound:.3e} m, {secs:.1} s"),
    ))
}

fn robustness_separation() -> Outcome {
    let loaded = lv_mech();
    let params = RecoveryParams::default();
    for p_mmhg in [20.0, 24.0, 28.0, 32.0, 36.0] {
        let p = mmhg_to_pa(p_mmhg);
        let base = reference_configuration_base(&loaded, p, None, params.k_max, params.eps_final, &params.newton)?;
        if base.converged {
            continue;
        }
        let enhanced = reference_configuration(&loaded, p, None, &params)?;
        return Ok((
            enhanced.converged,
            format!(
                "p = {p_mmhg} mmHg: basic fails after {} iterations (ratio {:.2e}), enhanced {} after {} load levels",
                base.report.fixed_point_iterations,
                base.report.final_ratio,
                if enhanced.converged { "succeeds" } else { "fails" },
                enhanced.report.outer_iterations
            ),
        ));
    }
    Ok((false, "the basic iteration succeeded at every scanned pressure".into()))
}

struct Beat {
    max_mismatch: f64,
    single_path: bool,
    phases: [bool; 4],
    w_solves: usize,
    steps: usize,
    drift: f64,
    secs: f64,
}

fn one_beat() -> Result<Beat, cardioem::Error> {
    let start = Instant::now();
    let (series, sim) = run_heartbeat(RunConfig::default())?;
    let c = &sim.counters;
    // Filling, isovolumic contraction, ejection, isovolumic relaxation.
    let mut phases = [false; 4];
    let mut ejected = false;
    for s in &series.samples {
        match (s.mitral_open, s.aortic_open) {
            (true, _) => phases[0] = true,
            (false, true) => {
                phases[2] = true;
                ejected = true;
            }
            (false, false) if ejected => phases[3] = true,
            (false, false) => phases[1] = true,
        }
    }
    let first = series.samples.first().unwrap().total_blood;
    let last = series.samples.last().unwrap().total_blood;
    Ok(Beat {
        max_mismatch: c.max_volume_mismatch,
        single_path: c.coupling.steps == c.mech_steps,
        phases,
        w_solves: c.coupling.w_solves,
        steps: c.mech_steps,
        drift: (last - first).abs() / first,
        secs: start.elapsed().as_secs_f64(),
    })
}

fn volume_constraint(beat: &Beat) -> Outcome {
    Ok((
        beat.max_mismatch <= 1e-3 && beat.single_path && beat.phases.iter().all(|&p| p),
        format!(
            "max |V3D - V0D| = {:.3e} mL over {} steps ({:.0} s), coupled solve on every step: {}, phases seen {:?}",
            beat.max_mismatch, beat.steps, beat.secs, beat.single_path, beat.phases
        ),
    ))
}

struct Dense(DMatrix<f64>);

impl LinearSolve for Dense {
    fn solve_vec(&self, b: &[f64]) -> cardioem::Result<Vec<f64>> {
        let x = self.0.clone().cholesky().expect("SPD block").solve(&DVector::from_column_slice(b));
        Ok(x.iter().copied().collect())
    }
}

fn schur_reduction(beat: &Beat) -> Outcome {
    let mut rng = StdRng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let n = rng.random_range(2..=50);
        let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let a = &b * b.transpose() + DMatrix::identity(n, n) * 0.1;
        let jdp: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let jpd: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rd: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let rp = rng.random_range(-1.0..1.0);
        let mut full = DMatrix::zeros(n + 1, n + 1);
        full.view_mut((0, 0), (n, n)).copy_from(&a);
        let mut rhs = DVector::zeros(n + 1);
        for i in 0..n {
            full[(i, n)] = jdp[i];
            full[(n, i)] = jpd[i];
            rhs[i] = -rd[i];
        }
        rhs[n] = -rp;
        let x = full.lu().solve(&rhs).ok_or("singular saddle system")?;
        let mut ws = SaddleWorkspace::new(Dense(a), &jdp, jpd)?;
        let (dd, dp) = ws.solve(&rd, rp)?;
        let mut got = dd;
        got.push(dp);
        let err = got.iter().zip(x.iter()).map(|(g, e)| (g - e).abs()).fold(0.0, f64::max) / x.amax();
        worst = worst.max(err);
    }
    let one_w = beat.w_solves == beat.steps;
    Ok((
        worst <= 1e-10 && one_w,
        format!("worst relative difference {worst:.3e} over 10 systems; {} w-solves in {} steps", beat.w_solves, beat.steps),
    ))
}

fn rk4_order() -> Outcome {
    // Systemic arterial RLC branch fed by a smooth inflow, draining into a
    // venous compliance.
    let p = CircParams::default();
    let (ar, ven) = (p.ar_sys, p.ven_sys);
    let inflow = |t: f64| 200.0 * (std::f64::consts::PI * t / 0.4).sin().powi(2);
    let f = |t: f64, y: &[f64; 3]| -> [f64; 3] {
        let (p_ar, q_ar, p_ven) = (y[0], y[1], y[2]);
        [
            (inflow(t) - q_ar) / ar.c,
            (p_ar - p_ven - ar.r * q_ar) / ar.l,
            (q_ar - (p_ven - 5.0) / ven.r) / ven.c,
        ]
    };
    let y0 = [80.0, 0.0, 10.0];
    let horizon = 0.8;
    let integrate = |tau: f64| {
        let n = (horizon / tau).round() as usize;
        let mut y = y0;
        for k in 0..n {
            y = rk4(f, k as f64 * tau, &y, tau);
        }
        y
    };
    let tau0 = 1e-3;
    let reference = integrate(tau0 / 16.0);
    let err = |tau: f64| {
        let y = integrate(tau);
        (0..3).map(|i| (y[i] - reference[i]).abs()).fold(0.0, f64::max)
    };
    let (e1, e2) = (err(tau0), err(tau0 / 2.0));
    let order = (e1 / e2).log2();
    Ok((
        (order - 4.0).abs() <= 0.2,
        format!("observed order {order:.3} (errors {e1:.3e}, {e2:.3e})"),
    ))
}

/// Conduction velocity along x on a thin slab, from activation times at
/// x = 5 mm and x = 15 mm.
fn conduction_velocity(frame: FiberFrame, tau: f64) -> Result<f64, cardioem::Error> {
    let mesh = Arc::new(box_mesh([80, 1, 1], [20.0, 0.5, 0.5])?);
    let stim = Stimulus {
        peak: 35.0,
        duration: 3e-3,
        sigma_mm: 0.5,
        centers_mm: vec![[0.0, 0.25, 0.25]],
        period: 10.0,
    };
    let model = Arc::new(ReducedIonicModel::default());
    let mut ep = Monodomain::new(FeSpace::new(mesh, 1), &UniformFibers(frame), Conductivity::default(), stim, model)?;
    let mut st = ep.resting_state();
    let mut map = ActivationMap::new(ep.space.n_dofs(), -0.04);
    let mut t = 0.0;
    while !map.all_activated() && t < 0.2 {
        let prev = st.u.clone();
        ep.step(&mut st, tau)?;
        map.update(&prev, &st.u, t, t + tau);
        t += tau;
    }
    let times = map.as_field();
    let at = |x_mm: f64| {
        ep.space
            .dof_points()
            .iter()
            .zip(&times)
            .find(|(p, _)| (p[0] * 1e3 - x_mm).abs() < 1e-9 && p[1] == 0.0 && p[2] == 0.0)
            .map(|(_, t)| *t)
            .unwrap()
    };
    Ok(10e-3 / (at(15.0) - at(5.0)))
}

fn ep_sanity() -> Outcome {
    let mesh = Arc::new(box_mesh([4, 2, 2], [4.0, 2.0, 2.0])?);
    let model = Arc::new(ReducedIonicModel::default());
    let mut ep = Monodomain::new(
        FeSpace::new(mesh, 1),
        &UniformFibers(FiberFrame::IDENTITY),
        Conductivity::default(),
        Stimulus::none(),
        model,
    )?;
    let mut st = ep.resting_state();
    let u0 = st.u.clone();
    let tau: f64 = 5e-5;
    for _ in 0..(0.8 / tau).round() as usize {
        ep.step(&mut st, tau)?;
    }
    let drift = st.u.iter().zip(&u0).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let across = FiberFrame {
        f0: [0.0, 1.0, 0.0],
        s0: [-1.0, 0.0, 0.0],
        n0: [0.0, 0.0, 1.0],
    };
    let s = Conductivity::default();
    let ratio = conduction_velocity(FiberFrame::IDENTITY, tau)? / conduction_velocity(across, tau)?;
    let target = (s.sigma_l / s.sigma_t).sqrt();
    let ratio_err = (ratio - target).abs() / target;

    let tau0 = 1e-4;
    let reference = conduction_velocity(FiberFrame::IDENTITY, tau0 / 16.0)?;
    let e1 = (conduction_velocity(FiberFrame::IDENTITY, tau0)? - reference).abs();
    let e2 = (conduction_velocity(FiberFrame::IDENTITY, tau0 / 2.0)? - reference).abs();
    let order = (e1 / e2).log2();

    Ok((
        drift <= 1e-8 && ratio_err <= 0.1 && order >= 0.8,
        format!(
            "rest drift {drift:.2e} V; CV ratio {ratio:.3} vs {target:.3} ({:.1}%); CV order in tau {order:.2}",
            100.0 * ratio_err
        ),
    ))
}

fn mechanics_tangent() -> Outcome {
    let params = MechParams::default();
    let mut rng = StdRng::seed_from_u64(7);
    let frame = FiberFrame::IDENTITY;
    let mut stress_err: f64 = 0.0;
    for _ in 0..5 {
        let f = Matrix3::identity() + Matrix3::from_fn(|_, _| rng.random_range(-0.1..0.1));
        let pk = params.stress(&f, &frame, 0.0)?.p;
        let h = 1e-6;
        let mut fd = Matrix3::zeros();
        for i in 0..3 {
            for j in 0..3 {
                let mut fp = f;
                let mut fm = f;
                fp[(i, j)] += h;
                fm[(i, j)] -= h;
                fd[(i, j)] = (params.energy(&fp, &frame)? - params.energy(&fm, &frame)?) / (2.0 * h);
            }
        }
        stress_err = stress_err.max((fd - pk).amax() / pk.amax());
    }

    let m = lv_mech();
    let mut jac_err: f64 = 0.0;
    for _ in 0..5 {
        let d: Vec<f64> = (0..m.n_dofs()).map(|_| rng.random_range(-5e-4..5e-4)).collect();
        let dir: Vec<f64> = (0..m.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut jac = m.zero_matrix();
        m.static_residual(&d, 0.0, None, Some(&mut jac))?;
        let an = jac.mul_vec(&dir);
        let h = 1e-8;
        let shifted = |s: f64| -> Vec<f64> { d.iter().zip(&dir).map(|(a, b)| a + s * b).collect() };
        let rp = m.static_residual(&shifted(h), 0.0, None, None)?;
        let rm = m.static_residual(&shifted(-h), 0.0, None, None)?;
        let err = rp.iter().zip(&rm).zip(&an).map(|((a, b), c)| ((a - b) / (2.0 * h) - c).abs()).fold(0.0, f64::max);
        jac_err = jac_err.max(err / norm_inf(&an));
    }

    // Inflation by full Newton and by Newton with the Jacobian frozen at the
    // initial guess.
    let p = mmhg_to_pa(10.0);
    let tight = NewtonParams {
        increment_tol: 1e-13,
        max_iter: 400,
        ..NewtonParams::default()
    };
    let guess = m.pressure_ramp_init(mmhg_to_pa(8.0), 4, None, &NewtonParams::default())?;
    let full = m.quasi_static_solve(p, None, &guess, &tight);
    let mut frozen = m.zero_matrix();
    m.static_residual(&guess, p, None, Some(&mut frozen))?;
    let mut d_qn = guess.clone();
    let qn = newton(&mut d_qn, &tight, None, |x, want| {
        Ok((m.static_residual(x, p, None, None)?, want.then(|| frozen.clone())))
    });
    let scale = norm_inf(&full.d);
    let diff = full.d.iter().zip(&d_qn).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max) / scale;
    let lin_tol = 1e-9;

    Ok((
        stress_err <= 1e-6 && jac_err <= 1e-5 && full.converged && qn.converged && diff <= 10.0 * lin_tol,
        format!(
            "dW/dF vs FD {stress_err:.2e}; Jacobian vs FD {jac_err:.2e}; quasi-Newton ({} it) vs Newton ({} it) relative difference {diff:.2e}",
            qn.iterations, full.outcome.iterations
        ),
    ))
}

fn intergrid_exactness() -> Outcome {
    let coarse_mesh = generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 8, 4))?;
    let nested = refine_octree(&coarse_mesh, 1)?;
    let coarse = FeSpace::new(Arc::new(nested.coarse.clone()), 1);
    let fine = FeSpace::new(Arc::new(nested.fine.clone()), 1);
    let down = TransferOperator::coarse_to_fine(&nested, &coarse, &fine)?;
    let up = TransferOperator::fine_to_coarse(&nested, &fine, &coarse)?;
    let mut rng = StdRng::seed_from_u64(3);

    // An arbitrary Q1 field; the fine interpolant must coincide with it at
    // random points of every fine cell.
    let u: Vec<f64> = (0..coarse.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let uf = down.apply(&u)?;
    let mut exact_err: f64 = 0.0;
    for cell in 0..fine.n_cells() {
        let xi = [0, 1, 2].map(|_| rng.random::<f64>());
        let (cc, cxi) = nested.to_coarse(cell, xi);
        exact_err = exact_err.max((fine.eval_scalar(cell, xi, &uf) - coarse.eval_scalar(cc, cxi, &u)).abs());
    }
    let back = up.apply(&uf)?;
    let round_trip = back.iter().zip(&u).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let q2 = FeSpace::new(Arc::new(nested.coarse.clone()), 2);
    let cross = TransferOperator::coarse_to_fine(&nested, &q2, &fine)?;
    let quad = |x: [f64; 3]| 1e3 * x[0] * x[1] - 2e3 * x[2] * x[2] + x[0];
    let got = cross.apply(&q2.interpolate(quad))?;
    // Quadratic in physical space is not in the mapped Q2 space on curved
    // cells, so compare with the Q2 field itself.
    let q2_field = q2.interpolate(quad);
    let mut cross_err: f64 = 0.0;
    for k in 0..cross.n_targets() {
        let (c, xi) = cross.location(k);
        cross_err = cross_err.max((got[k] - q2.eval_scalar(c, xi, &q2_field)).abs());
    }
    let a: Vec<f64> = (0..q2.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let b: Vec<f64> = (0..q2.n_dofs()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 2.0 * x - 3.0 * y).collect();
    let (ta, tb, tc) = (cross.apply(&a)?, cross.apply(&b)?, cross.apply(&combo)?);
    let linearity = (0..tc.len()).map(|i| (tc[i] - 2.0 * ta[i] + 3.0 * tb[i]).abs()).fold(0.0, f64::max);

    Ok((
        exact_err <= 1e-12 && round_trip <= 1e-12 && cross_err <= 1e-12 && linearity <= 1e-12,
        format!(
            "Q1 coarse-to-fine {exact_err:.1e}; round trip {round_trip:.1e}; Q2-to-Q1 {cross_err:.1e}, linearity {linearity:.1e}"
        ),
    ))
}

fn projection_exactness() -> Outcome {
    let coarse_mesh = Arc::new(generate_idealized_lv(&LvShape::default(), &LvResolution::new(1, 8, 4))?);
    let coarse = FeSpace::new(coarse_mesh.clone(), 1);
    let lin = |x: [f64; 3]| [1e-3 + 0.1 * x[0] - 0.05 * x[2], -2e-3 + 0.07 * x[1], 0.02 * x[0] + 0.03 * x[1] + 0.04 * x[2]];

    // Vertices of an independent, finer ventricle mesh.
    let other = generate_idealized_lv(&LvShape::default(), &LvResolution::new(2, 10, 6))?;
    let targets: Vec<[f64; 3]> = other.vertices.iter().map(|v| v.map(|c| c * 1e-3)).collect();
    let d = coarse.interpolate_vector(lin);
    let proj = project_displacement(&coarse, &d, &targets)?;
    let mut inside_err: f64 = 0.0;
    for (i, l) in proj.locations.iter().enumerate() {
        if l.is_inside() {
            let e = lin(targets[i]);
            inside_err = (0..3).map(|c| (proj.values[i][c] - e[c]).abs()).fold(inside_err, f64::max);
        }
    }

    // Points pushed off the boundary, against an all-faces sampled oracle.
    let d = coarse.interpolate_vector(|x| [x[1] * x[2] * 10.0, x[0] * 0.2, -x[2] * 0.1]);
    let faces = coarse_mesh.exterior_faces();
    let mut outside = Vec::new();
    for &(c, f) in faces.iter().step_by(4) {
        let xs = coarse.cell_coords(c);
        let centre = trilinear_map(&xs, face_to_cell(f, 0.4, 0.6));
        let inner = trilinear_map(&xs, [0.5; 3]);
        outside.push([0, 1, 2].map(|k| centre[k] + 0.3 * (centre[k] - inner[k])));
    }
    assert!(outside.len() <= 500);
    let proj_out = project_displacement(&coarse, &d, &outside)?;
    let h = coarse_mesh.mesh_size() * 1e-3;
    let (mut n_checked, mut worst_point, mut worst_value): (usize, f64, f64) = (0, 0.0, 0.0);
    let grid = 120;
    for (i, x) in outside.iter().enumerate() {
        let Location::Outside { cell, xi, distance } = proj_out.locations[i] else {
            continue;
        };
        let mut best = (f64::INFINITY, 0, [0.0; 3]);
        for &(c, f) in &faces {
            let xs = coarse.cell_coords(c);
            for a in 0..=grid {
                for b in 0..=grid {
                    let r = face_to_cell(f, a as f64 / grid as f64, b as f64 / grid as f64);
                    let p = trilinear_map(&xs, r);
                    let dist = ((p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2) + (p[2] - x[2]).powi(2)).sqrt();
                    if dist < best.0 {
                        best = (dist, c, r);
                    }
                }
            }
        }
        n_checked += 1;
        let found = trilinear_map(&coarse.cell_coords(cell), xi);
        let oracle = trilinear_map(&coarse.cell_coords(best.1), best.2);
        let gap = (0..3).map(|k| (found[k] - oracle[k]).abs()).fold(0.0, f64::max);
        worst_point = worst_point.max(gap / h);
        let ov = coarse.eval_vector(best.1, best.2, &d);
        let scale = norm_inf(&d);
        worst_value = worst_value.max((0..3).map(|k| (proj_out.values[i][k] - ov[k]).abs()).fold(0.0, f64::max) / scale);
        if distance > best.0 + 1e-12 {
            worst_point = f64::INFINITY;
        }
    }
    // The sampled oracle resolves the face to 1/grid of its parameter range.
    let tol = 2.0 / grid as f64;
    Ok((
        inside_err <= 1e-12 && n_checked > 0 && worst_point <= tol && worst_value <= tol,
        format!(
            "{} internal vertices, max error {inside_err:.1e}; {n_checked} external points, closest point within {worst_point:.1e} h, value within {worst_value:.1e} of the sampled oracle",
            proj.n_internal()
        ),
    ))
}

fn physiology_directions() -> Outcome {
    let mut base = RunConfig::default();
    base.time.dt_s = 1e-3;
    base.time.beats = 3;
    let baseline = run_variant(&Scenario::Preload(0.5).variants(&base)[0])?;
    let run_pair = |s: Scenario| -> Result<(VariantResult, VariantResult), cardioem::Error> {
        let v = s.variants(&base);
        Ok((run_variant(&v[1])?, run_variant(&v[2])?))
    };
    let sv = |r: &VariantResult| r.stroke_volume.unwrap_or(f64::NAN);
    let edp = |r: &VariantResult| r.edp.unwrap_or(f64::NAN);
    let increasing = |a: f64, b: f64, c: f64| a < b && b < c;

    let (lo, hi) = run_pair(Scenario::Preload(0.5))?;
    let preload = increasing(sv(&lo), sv(&baseline), sv(&hi));
    let mut detail = format!(
        "preload SV {:.2}/{:.2}/{:.2} mL [{}]",
        sv(&lo),
        sv(&baseline),
        sv(&hi),
        if preload { "ok" } else { "FAIL" }
    );

    let (lo, hi) = run_pair(Scenario::Afterload(0.15))?;
    let afterload = increasing(lo.max_p_lv, baseline.max_p_lv, hi.max_p_lv);
    detail += &format!(
        "; afterload max p {:.2}/{:.2}/{:.2} mmHg [{}]",
        lo.max_p_lv,
        baseline.max_p_lv,
        hi.max_p_lv,
        if afterload { "ok" } else { "FAIL" }
    );

    let (lo, hi) = run_pair(Scenario::Contractility(0.35))?;
    let contractility =
        increasing(sv(&lo), sv(&baseline), sv(&hi)) && increasing(lo.max_p_lv, baseline.max_p_lv, hi.max_p_lv);
    let edp_change = [&lo, &hi].iter().map(|r| (edp(r) - edp(&baseline)).abs() / edp(&baseline)).fold(0.0, f64::max);
    let edp_ok = edp_change <= 0.02;
    detail += &format!(
        "; contractility SV {:.2}/{:.2}/{:.2} mL, max p {:.2}/{:.2}/{:.2} mmHg [{}], EDP {:.2}/{:.2}/{:.2} mmHg change {:.1}% [{}]",
        sv(&lo),
        sv(&baseline),
        sv(&hi),
        lo.max_p_lv,
        baseline.max_p_lv,
        hi.max_p_lv,
        if contractility { "ok" } else { "FAIL" },
        edp(&lo),
        edp(&baseline),
        edp(&hi),
        100.0 * edp_change,
        if edp_ok { "ok" } else { "FAIL" }
    );
    Ok((preload && afterload && contractility && edp_ok, detail))
}

fn conservation(beat: &Beat) -> Outcome {
    let m = lv_mech();
    let r0 = norm_inf(&m.static_residual(&vec![0.0; m.n_dofs()], 0.0, None, None)?);
    let tol = NewtonParams::default().abs_tol;
    Ok((
        beat.drift <= 1e-3 && r0 <= tol,
        format!("blood volume drift {:.2e} per beat; |r_d(0, 0, 0)| = {r0:.1e} N", beat.drift),
    ))
}

fn splitting_order() -> Outcome {
    let run = |dt: f64| -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), cardioem::Error> {
        let mut cfg = RunConfig::default();
        cfg.time.dt_s = dt;
        cfg.time.t_end_s = Some(0.05);
        let mut sim = Simulation::new(cfg)?;
        sim.run()?;
        Ok((sim.ep_state.u.clone(), sim.mech_state.d_n.clone(), sim.circ_state.y.to_vec()))
    };
    let dt = 1e-3;
    let reference = run(dt / 4.0)?;
    let err = |x: &(Vec<f64>, Vec<f64>, Vec<f64>)| {
        [rel_l2(&x.0, &reference.0), rel_l2(&x.1, &reference.1), rel_l2(&x.2, &reference.2)]
    };
    let (e1, e2) = (err(&run(dt)?), err(&run(dt / 2.0)?));
    let orders: Vec<f64> = (0..3).map(|k| (e1[k] / e2[k]).log2()).collect();
    let min = orders.iter().copied().fold(f64::INFINITY, f64::min);
    Ok((
        min >= 0.8,
        format!(
            "observed orders: potential {:.2}, displacement {:.2}, circulation {:.2}",
            orders[0], orders[1], orders[2]
        ),
    ))
}

fn main() {
    let start = Instant::now();
    let mut lines: Vec<(usize, &str, Outcome)> = Vec::new();
    let mut record = |id: usize, name: &'static str, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let out = f();
        let (status, detail) = match &out {
            Ok((true, d)) => ("PASS", d.clone()),
            Ok((false, d)) => ("FAIL", d.clone()),
            Err(e) => ("FAIL", format!("error: {e}")),
        };
        println!("[{status}] {id:>2}. {name}: {detail} ({:.1} s)", t.elapsed().as_secs_f64());
        lines.push((id, name, out));
    };

    record(1, "reference recovery round trip", &recovery_round_trip);
    record(2, "robustness separation", &robustness_separation);
    let beat = one_beat();
    let with_beat = |f: fn(&Beat) -> Outcome| -> Outcome {
        match &beat {
            Ok(b) => f(b),
            Err(e) => Err(format!("heartbeat run failed: {e}").into()),
        }
    };
    record(3, "volumetric constraint", &|| with_beat(volume_constraint));
    record(4, "Schur reduction", &|| with_beat(schur_reduction));
    record(5, "RK4 order", &rk4_order);
    record(6, "IMEX electrophysiology", &ep_sanity);
    record(7, "mechanics tangent", &mechanics_tangent);
    record(8, "intergrid exactness", &intergrid_exactness);
    record(9, "projection exactness", &projection_exactness);
    record(10, "physiology directions", &physiology_directions);
    record(11, "conservation", &|| with_beat(conservation));
    record(12, "splitting order", &splitting_order);

    let failed: Vec<usize> = lines.iter().filter(|l| !matches!(l.2, Ok((true, _)))).map(|l| l.0).collect();
    println!(
        "acceptance: {} of {} criteria pass ({:.0} s)",
        lines.len() - failed.len(),
        lines.len(),
        start.elapsed().as_secs_f64()
    );
    let unexpected: Vec<usize> = failed.iter().copied().filter(|id| !EXPECTED_FAILURES.contains(id)).collect();
    let fixed: Vec<usize> = EXPECTED_FAILURES.iter().copied().filter(|id| !failed.contains(id)).collect();
    if !failed.is_empty() {
        println!("failing criteria: {failed:?} (expected: {EXPECTED_FAILURES:?})");
    }
    if !fixed.is_empty() {
        println!("criteria listed as expected failures now pass: {fixed:?}");
    }
    if !unexpected.is_empty() || !fixed.is_empty() {
        std::process::exit(1);
    }
}
