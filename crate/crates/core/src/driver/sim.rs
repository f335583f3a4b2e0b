//! The segregated-staggered time loop.

use std::sync::Arc;

use serde::Serialize;

use crate::activation::{activation_step, compute_ta, FirstOrderActivation, SarcomereSolver};
use crate::coupling0d::{
    coupled_step, CavityVolume, CircParams, CircState, Circulation, CouplingCounters, N_STATE, P_AR_SYS, V_LV,
};
use crate::ep::{EpState, Monodomain, ReducedIonicModel, Stimulus};
use crate::error::{Error, Result};
use crate::fem::FeSpace;
use crate::geometry::{
    generate_idealized_lv, read_mesh, refine_octree, FiberField, HexMesh, NestedMeshes, RuleBasedFibers,
};
use crate::intergrid::{transfer_calcium, TransferOperator};
use crate::mechanics::{MechState, Mechanics};
use crate::refconfig::reference_configuration;
use crate::units::{mmhg_to_pa, pa_to_mmhg, ML_PER_M3};

use super::config::RunConfig;
use super::series::{BeatTracker, Sample, TimeSeries};

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct RunCounters {
    pub mech_steps: usize,
    pub ep_solves: usize,
    pub ionic_steps: usize,
    pub rk4_steps: usize,
    pub activation_steps: usize,
    pub sl_solves: usize,
    pub displacement_transfers: usize,
    pub calcium_transfers: usize,
    pub coupling: CouplingCounters,
    pub max_coupled_iterations: usize,
    /// Largest `|V_3D − V_0D|` (mL) over all steps.
    pub max_volume_mismatch: f64,
}

/// Everything a run needs, built once from a [`RunConfig`].
pub struct Simulation {
    pub config: RunConfig,
    pub nested: NestedMeshes,
    pub mech: Mechanics,
    pub cavity: CavityVolume,
    pub ep: Monodomain,
    pub sarcomere: SarcomereSolver,
    pub activation: FirstOrderActivation,
    pub circulation: Circulation,
    d_to_fine: TransferOperator,
    ca_to_coarse: TransferOperator,
    // Time-dependent state.
    pub t: f64,
    pub step_index: usize,
    pub mech_state: MechState,
    pub ep_state: EpState,
    pub circ_state: CircState,
    /// Nodal activation state and sarcomere length (μm) on the coarse mesh.
    pub s: Vec<f64>,
    pub sl: Vec<f64>,
    pub ta: Vec<f64>,
    pub counters: RunCounters,
    tracker: BeatTracker,
}

fn coarse_mesh(cfg: &RunConfig) -> Result<HexMesh> {
    match &cfg.geometry.mesh_file {
        Some(path) => read_mesh(path),
        None => generate_idealized_lv(&cfg.geometry.shape, &cfg.geometry.resolution),
    }
}

fn moved(mesh: &HexMesh, coords_m: &[[f64; 3]]) -> HexMesh {
    let mut m = mesh.clone();
    m.vertices = coords_m.iter().map(|x| x.map(|c| c * 1e3)).collect();
    m
}

impl Simulation {
    pub fn new(config: RunConfig) -> Result<Self> {
        config.validate()?;
        let cfg = &config;
        let period = cfg.period();
        let mut coarse = coarse_mesh(cfg)?;
        let fibers = RuleBasedFibers::for_mesh(&coarse, cfg.geometry.fibers)?;
        let mut mech = Mechanics::new(Arc::new(coarse.clone()), &fibers, cfg.mechanics)?;

        if let Some(p_mmhg) = cfg.init.unload_pressure_mmhg {
            let rec = reference_configuration(&mech, mmhg_to_pa(p_mmhg), None, &cfg.init.recovery)?;
            if !rec.converged {
                return Err(Error::Initialization(format!(
                    "reference recovery at {p_mmhg} mmHg did not converge (ratio {:.3e})",
                    rec.report.final_ratio
                )));
            }
            // Fibers stay attached to material points.
            mech = mech.with_reference(rec.x0.clone())?;
            coarse = moved(&coarse, &rec.x0);
        }
        let nested = refine_octree(&coarse, cfg.geometry.refinement_depth)?;

        let cavity = CavityVolume::new(&mech)?;
        let fine_space = FeSpace::new(Arc::new(nested.fine.clone()), cfg.ep.degree);
        let mut stimulus = match &cfg.ep.stimulus {
            Some(s) => s.clone(),
            None => match coarse.shape {
                Some(shape) => Stimulus::for_ventricle(&shape),
                None => Stimulus::for_ventricle(&cfg.geometry.shape),
            },
        };
        stimulus.period = period;
        let ionic = Arc::new(ReducedIonicModel { p: cfg.ep.ionic });
        let ep = Monodomain::new(fine_space, &fibers as &dyn FiberField, cfg.ep.conductivity, stimulus, ionic)?;
        let delta_m = cfg.activation.delta_sl_mm.unwrap_or_else(|| coarse.mesh_size()) * 1e-3;
        let mut sarcomere = SarcomereSolver::new(mech.space().clone(), &fibers, cfg.activation.sl0_um, delta_m)?;
        let d_to_fine = TransferOperator::coarse_to_fine(&nested, mech.space(), &ep.space)?;
        let ca_to_coarse = TransferOperator::fine_to_coarse(&nested, &ep.space, mech.space())?;

        let mut circ_params: CircParams = cfg.circulation;
        circ_params.period = period;
        let circulation = Circulation::new(circ_params)?;

        let p0 = mmhg_to_pa(cfg.init.p_lv_mmhg);
        let d0 = mech
            .pressure_ramp_init(p0, cfg.init.ramp_steps, None, &cfg.newton)
            .map_err(|e| e.at_step(0.0, "initialization"))?;
        let v0 = cavity.volume(&mech, &d0)?;
        let (sl, _) = sarcomere.solve(Some(&d0))?;
        let n_coarse = mech.space().n_dofs();
        let ep_state = ep.resting_state();

        Ok(Simulation {
            activation: FirstOrderActivation { p: cfg.activation },
            config,
            nested,
            cavity,
            ep,
            sarcomere,
            circulation,
            d_to_fine,
            ca_to_coarse,
            t: 0.0,
            step_index: 0,
            mech_state: MechState::at_rest(d0, p0),
            ep_state,
            circ_state: CircState::initial(v0),
            s: vec![0.0; n_coarse],
            sl,
            ta: vec![0.0; n_coarse],
            counters: RunCounters::default(),
            tracker: BeatTracker::new(period),
            mech,
        })
    }

    pub fn dt(&self) -> f64 {
        self.config.time.dt_s
    }

    pub fn p_lv_mmhg(&self) -> f64 {
        pa_to_mmhg(self.mech_state.p_lv)
    }

    pub fn volume_3d(&self) -> Result<f64> {
        self.cavity.volume(&self.mech, &self.mech_state.d_n)
    }

    /// Solid volume `∫ J dΩ₀` of the current configuration (mL).
    pub fn solid_volume(&self) -> Result<f64> {
        Ok(self.mech.solid_volume(&self.mech_state.d_n)? * ML_PER_M3)
    }

    /// Current displacement on the electrophysiology dofs.
    pub fn displacement_on_fine(&self) -> Result<Vec<f64>> {
        self.d_to_fine.apply_vector(&self.mech_state.d_n)
    }

    /// Advances all fields by one mechanics step. The same sequence runs in
    /// every phase of the beat.
    pub fn step(&mut self) -> Result<()> {
        let dt = self.dt();
        let n_sub = self.config.time.n_sub;
        let tau = self.config.time.tau_s();
        let t0 = self.t;

        let d_fine = self.d_to_fine.apply_vector(&self.mech_state.d_n)?;
        self.counters.displacement_transfers += 1;
        self.ep.update_deformation(Some(&d_fine)).map_err(|e| e.at_step(t0, "monodomain"))?;

        let p_lv_mmhg = self.p_lv_mmhg();
        for m in 0..n_sub {
            let tm = t0 + m as f64 * tau;
            self.ep.ionic(&mut self.ep_state, tau).map_err(|e| e.at_step(tm, "ionic"))?;
            self.counters.ionic_steps += 1;
            self.ep.potential(&mut self.ep_state, tau).map_err(|e| e.at_step(tm, "monodomain"))?;
            self.counters.ep_solves += 1;
            let ca_fine = self.ep_state.calcium(self.ep.model.as_ref());
            let ca = transfer_calcium(&self.ca_to_coarse, &ca_fine)?;
            self.counters.calcium_transfers += 1;
            activation_step(&self.activation, &mut self.s, &ca, &self.sl, tau).map_err(|e| e.at_step(tm, "activation"))?;
            self.counters.activation_steps += 1;
            self.circ_state = self
                .circulation
                .rk4_step(&self.circ_state, tau, p_lv_mmhg)
                .map_err(|e| e.at_step(tm, "circulation"))?;
            self.counters.rk4_steps += 1;
        }
        let t1 = t0 + dt;

        let (sl, _) = self.sarcomere.solve(Some(&self.mech_state.d_n)).map_err(|e| e.at_step(t1, "sarcomere length"))?;
        self.sl = sl;
        self.counters.sl_solves += 1;
        self.ta = compute_ta(&self.activation, &self.s, self.config.activation.ta_max);

        let v0d = self.circ_state.y[V_LV];
        let before = self.counters.coupling;
        let out = coupled_step(
            &self.mech,
            &self.cavity,
            &self.mech_state,
            v0d,
            Some(&self.ta),
            dt,
            &self.config.coupling,
            &mut self.counters.coupling,
        )
        .map_err(|e| e.at_step(t1, "coupled mechanics"))?;
        let iters = self.counters.coupling.iterations - before.iterations;
        self.counters.max_coupled_iterations = self.counters.max_coupled_iterations.max(iters);
        self.counters.max_volume_mismatch = self.counters.max_volume_mismatch.max(out.residual_p.abs());

        let d_prev = std::mem::replace(&mut self.mech_state.d_n, out.d);
        self.mech_state.d_nm1 = d_prev;
        self.mech_state.p_lv = out.p_lv;
        self.t = (self.step_index + 1) as f64 * dt;
        self.step_index += 1;
        self.counters.mech_steps += 1;

        let v3d = v0d + out.residual_p;
        self.tracker.observe(self.t, self.p_lv_mmhg(), v3d, &self.valve_state());
        Ok(())
    }

    /// `(mitral open, aortic open)` from the 0D pressures at the current time.
    pub fn valve_state(&self) -> (bool, bool) {
        let y = &self.circ_state.y;
        let p_lv = self.p_lv_mmhg();
        let c = self.circulation.chamber_pressures(self.circ_state.t, y);
        (c.la > p_lv, p_lv > y[P_AR_SYS])
    }

    pub fn sample(&self) -> Result<Sample> {
        let (mitral_open, aortic_open) = self.valve_state();
        let mut c1 = [0.0; N_STATE];
        c1.copy_from_slice(&self.circ_state.y);
        Ok(Sample {
            t: self.t,
            p_lv: self.p_lv_mmhg(),
            v_lv_3d: self.volume_3d()?,
            v_lv_0d: self.circ_state.y[V_LV],
            solid_volume: self.solid_volume()?,
            total_blood: self.circ_state.total_volume(&self.circulation.params),
            mitral_open,
            aortic_open,
            c1,
        })
    }

    /// Runs to the configured end time, recording samples at the output
    /// cadence, and calls `on_field` at the field cadence.
    pub fn run_with(&mut self, mut on_field: impl FnMut(&Simulation) -> Result<()>) -> Result<TimeSeries> {
        let n_steps = self.config.time.n_steps();
        let out_every = ((self.config.output.interval_s / self.dt()).round() as usize).max(1);
        let field_every = self
            .config
            .output
            .field_interval_s
            .map(|f| ((f / self.dt()).round() as usize).max(1));
        let mut series = TimeSeries::default();
        series.samples.push(self.sample()?);
        if field_every.is_some() {
            on_field(self)?;
        }
        for k in 1..=n_steps {
            self.step()?;
            if k % out_every == 0 || k == n_steps {
                series.samples.push(self.sample()?);
            }
            if field_every.is_some_and(|f| k % f == 0) {
                on_field(self)?;
            }
            if k % 400 == 0 {
                log::info!(
                    "t = {:.4} s: p_LV = {:.2} mmHg, V_LV = {:.3} mL",
                    self.t,
                    self.p_lv_mmhg(),
                    self.circ_state.y[V_LV]
                );
            }
        }
        self.tracker.finish(self.t);
        series.beats = self.tracker.completed().to_vec();
        Ok(series)
    }

    pub fn run(&mut self) -> Result<TimeSeries> {
        self.run_with(|_| Ok(()))
    }
}

/// Builds and runs a simulation to the configured end time.
pub fn run_heartbeat(config: RunConfig) -> Result<(TimeSeries, Simulation)> {
    let mut sim = Simulation::new(config)?;
    let series = sim.run()?;
    Ok((series, sim))
}
