use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::geometry::LvShape;

/// Applied current: a sum of Gaussian bumps, switched on for `duration` at
/// the start of every period.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Stimulus {
    /// Peak (V/s).
    pub peak: f64,
    /// Active duration per period (s).
    pub duration: f64,
    /// Gaussian standard deviation (mm).
    pub sigma_mm: f64,
    /// Centers (mm).
    pub centers_mm: Vec<[f64; 3]>,
    /// Period (s).
    pub period: f64,
}

impl Stimulus {
    /// Three endocardial sites 120° apart at mid apex-to-base height.
    pub fn for_ventricle(shape: &LvShape) -> Self {
        let (a, c) = shape.semi_axes(0.0);
        let z = 0.5 * (-c + shape.base_height);
        let rho = a * (1.0 - (z / c).powi(2)).sqrt();
        let centers_mm = (0..3)
            .map(|k| {
                let th = 2.0 * PI * k as f64 / 3.0;
                [rho * th.cos(), rho * th.sin(), z]
            })
            .collect();
        Stimulus {
            peak: 35.0,
            duration: 3e-3,
            sigma_mm: 2.5,
            centers_mm,
            period: 0.8,
        }
    }

    /// Stimulus with no sites.
    pub fn none() -> Self {
        Stimulus {
            peak: 0.0,
            duration: 3e-3,
            sigma_mm: 2.5,
            centers_mm: Vec::new(),
            period: 0.8,
        }
    }

    pub fn is_on(&self, t: f64) -> bool {
        let phase = t.rem_euclid(self.period);
        // Tolerate round-off in accumulated time.
        phase <= self.duration * (1.0 + 1e-9)
    }

    /// Spatial profile `Σ peak·exp(−|x − c|²/(2σ²))` (V/s), `x` in mm.
    pub fn profile(&self, x_mm: [f64; 3]) -> f64 {
        let s2 = 2.0 * self.sigma_mm * self.sigma_mm;
        self.centers_mm
            .iter()
            .map(|c| {
                let r2 = (x_mm[0] - c[0]).powi(2) + (x_mm[1] - c[1]).powi(2) + (x_mm[2] - c[2]).powi(2);
                self.peak * (-r2 / s2).exp()
            })
            .sum()
    }

    pub fn value(&self, t: f64, x_mm: [f64; 3]) -> f64 {
        if self.is_on(t) {
            self.profile(x_mm)
        } else {
            0.0
        }
    }
}
