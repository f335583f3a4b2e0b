//! Run configuration. TOML with one table per module; run-level keys carry
//! their unit in the name, module records use the documented units of their
//! fields.
//!
//! Missing tables take the run defaults. Keys missing from a table that is
//! present take that module's own defaults; for `[circulation]` this means
//! `r_min` falls back to the tabulated value unless set.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::activation::ActivationParams;
use crate::coupling0d::{CircParams, CoupledParams};
use crate::ep::{Conductivity, ReducedIonicParams, Stimulus};
use crate::error::{Error, Result};
use crate::geometry::{FiberParams, LvResolution, LvShape};
use crate::mechanics::{MechParams, NewtonParams};
use crate::refconfig::RecoveryParams;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub shape: LvShape,
    pub resolution: LvResolution,
    /// Coarse mesh file; replaces the generated ventricle when set.
    pub mesh_file: Option<PathBuf>,
    /// Octree refinement depth of the electrophysiology mesh.
    pub refinement_depth: u32,
    pub fibers: FiberParams,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            shape: LvShape::default(),
            resolution: LvResolution::new(1, 8, 4),
            mesh_file: None,
            refinement_depth: 1,
            fibers: FiberParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TimeConfig {
    /// Mechanics step Δt.
    pub dt_s: f64,
    /// Substeps of electrophysiology, activation and circulation per Δt.
    pub n_sub: usize,
    pub period_s: f64,
    pub beats: usize,
    /// Overrides `beats · period_s` when set.
    pub t_end_s: Option<f64>,
}

impl Default for TimeConfig {
    fn default() -> Self {
        TimeConfig {
            dt_s: 250e-6,
            n_sub: 5,
            period_s: 0.8,
            beats: 1,
            t_end_s: None,
        }
    }
}

impl TimeConfig {
    pub fn tau_s(&self) -> f64 {
        self.dt_s / self.n_sub as f64
    }

    pub fn t_end(&self) -> f64 {
        self.t_end_s.unwrap_or(self.beats as f64 * self.period_s)
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end() / self.dt_s - 1e-9).ceil().max(0.0) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EpConfig {
    pub degree: usize,
    pub conductivity: Conductivity,
    pub ionic: ReducedIonicParams,
    /// Defaults to three endocardial sites on the generated shape.
    pub stimulus: Option<Stimulus>,
}

impl Default for EpConfig {
    fn default() -> Self {
        EpConfig {
            degree: 1,
            conductivity: Conductivity::default(),
            ionic: ReducedIonicParams::default(),
            stimulus: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    /// Cavity pressure of the initial state.
    pub p_lv_mmhg: f64,
    pub ramp_steps: usize,
    /// When set, the mesh is treated as loaded at this pressure and a
    /// stress-free reference is recovered before the run.
    pub unload_pressure_mmhg: Option<f64>,
    pub recovery: RecoveryParams,
}

impl Default for InitConfig {
    fn default() -> Self {
        InitConfig {
            p_lv_mmhg: 5.0,
            ramp_steps: 4,
            unload_pressure_mmhg: None,
            recovery: RecoveryParams::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    /// Time-series cadence.
    pub interval_s: f64,
    /// Field-file cadence; `None` writes no field files.
    pub field_interval_s: Option<f64>,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: None,
            interval_s: 1e-3,
            field_interval_s: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub geometry: GeometryConfig,
    pub time: TimeConfig,
    pub ep: EpConfig,
    pub activation: ActivationParams,
    pub mechanics: MechParams,
    pub newton: NewtonParams,
    pub coupling: CoupledParams,
    pub circulation: CircParams,
    pub init: InitConfig,
    pub output: OutputConfig,
}

/// Forward valve resistance of the default run (mmHg·s/mL). The staggered
/// 0D step sees the cavity through the inertial term `ρ/Δt²`, and below
/// roughly this value the forward-biased valve flux oscillates between
/// steps at Δt = 250 μs on the default mesh.
pub const DEFAULT_R_MIN: f64 = 0.05;

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            geometry: GeometryConfig::default(),
            time: TimeConfig::default(),
            ep: EpConfig::default(),
            activation: ActivationParams::default(),
            mechanics: MechParams::default(),
            newton: NewtonParams::default(),
            coupling: CoupledParams::default(),
            circulation: CircParams {
                r_min: DEFAULT_R_MIN,
                ..CircParams::default()
            },
            init: InitConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            e => e,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Heartbeat period as seen by every module.
    pub fn period(&self) -> f64 {
        self.time.period_s
    }

    pub fn validate(&self) -> Result<()> {
        let t = &self.time;
        if !(t.dt_s > 0.0 && t.n_sub >= 1 && t.period_s > 0.0 && t.t_end() > 0.0) {
            return Err(Error::Config(format!("invalid time controls: {t:?}")));
        }
        if !(self.output.interval_s > 0.0) || self.output.field_interval_s.is_some_and(|f| !(f > 0.0)) {
            return Err(Error::Config("output intervals must be positive".into()));
        }
        if !(1..=2).contains(&self.ep.degree) {
            return Err(Error::Config(format!("EP degree {} not in 1..=2", self.ep.degree)));
        }
        if self.init.ramp_steps == 0 {
            return Err(Error::Config("init.ramp_steps must be at least 1".into()));
        }
        let a = &self.activation;
        if !(a.ta_max >= 0.0 && a.sl0_um > 0.0 && a.tau_act > 0.0 && a.ca50 > 0.0 && a.hill > 0.0) {
            return Err(Error::Config(format!("invalid activation parameters: {a:?}")));
        }
        if a.delta_sl_mm.is_some_and(|d| !(d > 0.0)) {
            return Err(Error::Config("activation.delta_sl_mm must be positive".into()));
        }
        if self.geometry.mesh_file.is_none() {
            self.geometry.shape.validate().map_err(|e| Error::Config(e.to_string()))?;
        }
        let mut circ = self.circulation;
        circ.period = t.period_s;
        circ.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.mechanics.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.ep.conductivity.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.init.recovery.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}
