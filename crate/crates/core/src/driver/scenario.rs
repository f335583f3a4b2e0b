//! Preload, afterload and contractility variations around a baseline run.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::config::RunConfig;
use super::series::BeatSummary;
use super::sim::run_heartbeat;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Scenario {
    /// Relative change of the atrial active elastances.
    Preload(f64),
    /// Relative change of the systemic arterial resistance; the compliance
    /// is divided by the same factor so that `R·C` is unchanged.
    Afterload(f64),
    /// Relative change of the maximal active tension and of the active
    /// elastances of the 0D chambers.
    Contractility(f64),
    /// Fully specified variants.
    Custom(Vec<Variant>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub label: String,
    pub config: RunConfig,
}

pub fn with_preload(base: &RunConfig, rel: f64) -> RunConfig {
    let mut c = base.clone();
    c.circulation.la.e_act *= 1.0 + rel;
    c.circulation.ra.e_act *= 1.0 + rel;
    c
}

pub fn with_afterload(base: &RunConfig, rel: f64) -> RunConfig {
    let mut c = base.clone();
    c.circulation.ar_sys.r *= 1.0 + rel;
    c.circulation.ar_sys.c /= 1.0 + rel;
    c
}

pub fn with_contractility(base: &RunConfig, rel: f64) -> RunConfig {
    let mut c = base.clone();
    let s = 1.0 + rel;
    c.activation.ta_max *= s;
    c.circulation.rv.e_act *= s;
    c.circulation.la.e_act *= s;
    c.circulation.ra.e_act *= s;
    c
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Preload(_) => "preload",
            Scenario::Afterload(_) => "afterload",
            Scenario::Contractility(_) => "contractility",
            Scenario::Custom(_) => "custom",
        }
    }

    /// Baseline first, then the decreased and increased variants.
    pub fn variants(&self, base: &RunConfig) -> Vec<Variant> {
        let mut out = vec![Variant {
            label: "baseline".into(),
            config: base.clone(),
        }];
        let (rel, f): (f64, fn(&RunConfig, f64) -> RunConfig) = match self {
            Scenario::Preload(r) => (*r, with_preload),
            Scenario::Afterload(r) => (*r, with_afterload),
            Scenario::Contractility(r) => (*r, with_contractility),
            Scenario::Custom(v) => {
                out.extend(v.iter().cloned());
                return out;
            }
        };
        for r in [-rel, rel] {
            out.push(Variant {
                label: format!("{} {:+.0}%", self.name(), 100.0 * r),
                config: f(base, r),
            });
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantResult {
    pub label: String,
    /// Last completed beat.
    pub beat: BeatSummary,
    pub stroke_volume: Option<f64>,
    pub edv: Option<f64>,
    pub esv: Option<f64>,
    pub max_p_lv: f64,
    pub edp: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub results: Vec<VariantResult>,
}

pub fn run_variant(v: &Variant) -> Result<VariantResult> {
    log::info!("running variant {}", v.label);
    let (series, _) = run_heartbeat(v.config.clone())?;
    let beat = *series
        .last_beat()
        .ok_or_else(|| Error::Config(format!("variant {} completed no beat", v.label)))?;
    Ok(VariantResult {
        label: v.label.clone(),
        stroke_volume: beat.stroke_volume(),
        edv: beat.edv,
        esv: beat.esv,
        max_p_lv: beat.max_p_lv,
        edp: beat.edp,
        beat,
    })
}

pub fn run_scenario(base: &RunConfig, scenario: &Scenario) -> Result<ScenarioReport> {
    let results = scenario
        .variants(base)
        .iter()
        .map(run_variant)
        .collect::<Result<Vec<_>>>()?;
    Ok(ScenarioReport {
        scenario: scenario.name().into(),
        results,
    })
}
