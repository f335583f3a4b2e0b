//! Closed-loop lumped circulation: elastance chambers for LA, RA and RV,
//! diode valves, and RLC systemic and pulmonary branches. The left ventricle
//! pressure is an input; its volume is integrated from the valve fluxes.
//! Units: mL, mmHg, s.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const V_LA: usize = 0;
pub const V_RA: usize = 1;
pub const V_RV: usize = 2;
pub const V_LV: usize = 3;
pub const P_AR_SYS: usize = 4;
pub const P_VEN_SYS: usize = 5;
pub const P_AR_PUL: usize = 6;
pub const P_VEN_PUL: usize = 7;
pub const Q_AR_SYS: usize = 8;
pub const Q_VEN_SYS: usize = 9;
pub const Q_AR_PUL: usize = 10;
pub const Q_VEN_PUL: usize = 11;
pub const N_STATE: usize = 12;

pub const STATE_NAMES: [&str; N_STATE] = [
    "V_LA", "V_RA", "V_RV", "V_LV", "p_AR_SYS", "p_VEN_SYS", "p_AR_PUL", "p_VEN_PUL", "Q_AR_SYS", "Q_VEN_SYS",
    "Q_AR_PUL", "Q_VEN_PUL",
];

/// Raised-cosine activation pulse, periodic with the heartbeat.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Start of contraction within the beat (s).
    pub onset: f64,
    pub contraction: f64,
    pub relaxation: f64,
}

impl Pulse {
    pub fn value(&self, t: f64, period: f64) -> f64 {
        let tt = (t - self.onset).rem_euclid(period);
        if tt < self.contraction {
            0.5 * (1.0 - (std::f64::consts::PI * tt / self.contraction).cos())
        } else if tt < self.contraction + self.relaxation {
            0.5 * (1.0 + (std::f64::consts::PI * (tt - self.contraction) / self.relaxation).cos())
        } else {
            0.0
        }
    }
}

/// Time-varying elastance chamber.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Chamber {
    /// mmHg/mL.
    pub e_pass: f64,
    pub e_act: f64,
    /// mL.
    pub v0: f64,
    pub pulse: Pulse,
}

impl Chamber {
    pub fn elastance(&self, t: f64, period: f64) -> f64 {
        self.e_pass + self.e_act * self.pulse.value(t, period)
    }
}

/// Resistance (mmHg·s/mL), compliance (mL/mmHg) and inertance
/// (mmHg·s²/mL) of one branch.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub r: f64,
    pub c: f64,
    pub l: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CircParams {
    pub ar_sys: Branch,
    pub ven_sys: Branch,
    pub ar_pul: Branch,
    pub ven_pul: Branch,
    pub la: Chamber,
    pub ra: Chamber,
    pub rv: Chamber,
    /// Open and closed valve resistances (mmHg·s/mL).
    pub r_min: f64,
    pub r_max: f64,
    /// Heartbeat period (s).
    pub period: f64,
    /// External pressure added to chamber pressures (mmHg).
    pub p_ex: f64,
}

impl Default for CircParams {
    fn default() -> Self {
        let atrial = Pulse {
            onset: 0.64,
            contraction: 0.08,
            relaxation: 0.08,
        };
        CircParams {
            ar_sys: Branch {
                r: 0.8,
                c: 1.2,
                l: 5e-3,
            },
            ven_sys: Branch {
                r: 0.26,
                c: 60.0,
                l: 5e-4,
            },
            ar_pul: Branch {
                r: 0.1625,
                c: 10.0,
                l: 5e-4,
            },
            ven_pul: Branch {
                r: 0.1625,
                c: 16.0,
                l: 5e-4,
            },
            la: Chamber {
                e_pass: 0.09,
                e_act: 0.07,
                v0: 4.0,
                pulse: atrial,
            },
            ra: Chamber {
                e_pass: 0.07,
                e_act: 0.06,
                v0: 4.0,
                pulse: atrial,
            },
            rv: Chamber {
                e_pass: 0.05,
                e_act: 0.55,
                v0: 10.0,
                pulse: Pulse {
                    onset: 0.02,
                    contraction: 0.28,
                    relaxation: 0.15,
                },
            },
            r_min: 0.0075,
            r_max: 75006.2,
            period: 0.8,
            p_ex: 0.0,
        }
    }
}

impl CircParams {
    pub fn validate(&self) -> Result<()> {
        for (name, b) in [
            ("AR_SYS", self.ar_sys),
            ("VEN_SYS", self.ven_sys),
            ("AR_PUL", self.ar_pul),
            ("VEN_PUL", self.ven_pul),
        ] {
            if !(b.r > 0.0 && b.c > 0.0 && b.l > 0.0) {
                return Err(Error::InvalidInput(format!("branch {name} needs positive R, C, L")));
            }
        }
        for (name, ch) in [("LA", self.la), ("RA", self.ra), ("RV", self.rv)] {
            let p = ch.pulse;
            if !(ch.e_pass > 0.0 && ch.e_act >= 0.0 && p.contraction > 0.0 && p.relaxation > 0.0) {
                return Err(Error::InvalidInput(format!("chamber {name} has invalid elastance or pulse")));
            }
            if p.contraction + p.relaxation > self.period {
                return Err(Error::InvalidInput(format!("chamber {name} pulse is longer than the period")));
            }
        }
        if !(self.r_min > 0.0 && self.r_min < self.r_max) {
            return Err(Error::InvalidInput("valve resistances need 0 < R_min < R_max".into()));
        }
        if !(self.period > 0.0) {
            return Err(Error::InvalidInput("period must be positive".into()));
        }
        Ok(())
    }

    /// Diode valve: flux driven by `Δp = p_up − p_down`.
    pub fn valve_flux(&self, dp: f64) -> f64 {
        if dp > 0.0 {
            dp / self.r_min
        } else {
            dp / self.r_max
        }
    }
}

/// Valve fluxes (mL/s), positive in the forward direction.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ValveFluxes {
    pub mitral: f64,
    pub aortic: f64,
    pub tricuspid: f64,
    pub pulmonary: f64,
}

/// Chamber pressures (mmHg).
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ChamberPressures {
    pub la: f64,
    pub ra: f64,
    pub rv: f64,
}

/// Circulation state at time `t`, ordered as the `V_LA..Q_VEN_PUL` indices.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CircState {
    pub y: [f64; N_STATE],
    pub t: f64,
}

impl CircState {
    /// A physiological diastolic starting point, with `V_LV` supplied by the
    /// 3D model.
    pub fn initial(v_lv: f64) -> Self {
        let mut y = [0.0; N_STATE];
        y[V_LA] = 65.0;
        y[V_RA] = 65.0;
        y[V_RV] = 145.0;
        y[V_LV] = v_lv;
        y[P_AR_SYS] = 80.0;
        y[P_VEN_SYS] = 15.0;
        y[P_AR_PUL] = 20.0;
        y[P_VEN_PUL] = 10.0;
        CircState { y, t: 0.0 }
    }

    /// Blood in chambers plus stressed volume `C·p` of the compartments (mL).
    pub fn total_volume(&self, p: &CircParams) -> f64 {
        let y = &self.y;
        y[V_LA]
            + y[V_RA]
            + y[V_RV]
            + y[V_LV]
            + p.ar_sys.c * y[P_AR_SYS]
            + p.ven_sys.c * y[P_VEN_SYS]
            + p.ar_pul.c * y[P_AR_PUL]
            + p.ven_pul.c * y[P_VEN_PUL]
    }
}

pub struct Circulation {
    pub params: CircParams,
}

impl Circulation {
    pub fn new(params: CircParams) -> Result<Self> {
        params.validate()?;
        Ok(Circulation { params })
    }

    pub fn chamber_pressures(&self, t: f64, y: &[f64; N_STATE]) -> ChamberPressures {
        let p = &self.params;
        let press = |ch: &Chamber, v: f64| p.p_ex + ch.elastance(t, p.period) * (v - ch.v0);
        ChamberPressures {
            la: press(&p.la, y[V_LA]),
            ra: press(&p.ra, y[V_RA]),
            rv: press(&p.rv, y[V_RV]),
        }
    }

    pub fn valve_fluxes(&self, t: f64, y: &[f64; N_STATE], p_lv: f64) -> ValveFluxes {
        let c = self.chamber_pressures(t, y);
        let p = &self.params;
        ValveFluxes {
            mitral: p.valve_flux(c.la - p_lv),
            aortic: p.valve_flux(p_lv - y[P_AR_SYS]),
            tricuspid: p.valve_flux(c.ra - c.rv),
            pulmonary: p.valve_flux(c.rv - y[P_AR_PUL]),
        }
    }

    /// Right-hand side of the network ODE for a given LV pressure (mmHg).
    pub fn rhs(&self, t: f64, y: &[f64; N_STATE], p_lv: f64) -> [f64; N_STATE] {
        let p = &self.params;
        let c = self.chamber_pressures(t, y);
        let q = self.valve_fluxes(t, y, p_lv);
        let mut dy = [0.0; N_STATE];
        dy[V_LA] = y[Q_VEN_PUL] - q.mitral;
        dy[V_LV] = q.mitral - q.aortic;
        dy[V_RA] = y[Q_VEN_SYS] - q.tricuspid;
        dy[V_RV] = q.tricuspid - q.pulmonary;
        dy[P_AR_SYS] = (q.aortic - y[Q_AR_SYS]) / p.ar_sys.c;
        dy[P_VEN_SYS] = (y[Q_AR_SYS] - y[Q_VEN_SYS]) / p.ven_sys.c;
        dy[P_AR_PUL] = (q.pulmonary - y[Q_AR_PUL]) / p.ar_pul.c;
        dy[P_VEN_PUL] = (y[Q_AR_PUL] - y[Q_VEN_PUL]) / p.ven_pul.c;
        dy[Q_AR_SYS] = (y[P_AR_SYS] - y[P_VEN_SYS] - p.ar_sys.r * y[Q_AR_SYS]) / p.ar_sys.l;
        dy[Q_VEN_SYS] = (y[P_VEN_SYS] - c.ra - p.ven_sys.r * y[Q_VEN_SYS]) / p.ven_sys.l;
        dy[Q_AR_PUL] = (y[P_AR_PUL] - y[P_VEN_PUL] - p.ar_pul.r * y[Q_AR_PUL]) / p.ar_pul.l;
        dy[Q_VEN_PUL] = (y[P_VEN_PUL] - c.la - p.ven_pul.r * y[Q_VEN_PUL]) / p.ven_pul.l;
        dy
    }

    /// One classical RK4 step of length `tau` with the LV pressure frozen.
    pub fn rk4_step(&self, state: &CircState, tau: f64, p_lv: f64) -> Result<CircState> {
        if !(tau > 0.0) {
            return Err(Error::InvalidInput(format!("RK4 step must be positive, got {tau}")));
        }
        let y = rk4(|t, y| self.rhs(t, y, p_lv), state.t, &state.y, tau);
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::StateBlowUp {
                field: STATE_NAMES[i],
                dof: i,
            });
        }
        Ok(CircState { y, t: state.t + tau })
    }
}

/// Classical fourth-order Runge–Kutta step for `dy/dt = f(t, y)`.
pub fn rk4<const N: usize>(f: impl Fn(f64, &[f64; N]) -> [f64; N], t: f64, y: &[f64; N], tau: f64) -> [f64; N] {
    let shift = |k: &[f64; N], s: f64| -> [f64; N] { std::array::from_fn(|i| y[i] + s * k[i]) };
    let k1 = f(t, y);
    let k2 = f(t + 0.5 * tau, &shift(&k1, 0.5 * tau));
    let k3 = f(t + 0.5 * tau, &shift(&k2, 0.5 * tau));
    let k4 = f(t + tau, &shift(&k3, tau));
    std::array::from_fn(|i| y[i] + tau / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rk4_on_linear_decay() {
        let y = rk4(|_, y: &[f64; 1]| [-y[0]], 0.0, &[1.0], 0.1);
        assert!((y[0] - 0.9048375).abs() < 1e-12);
        let z = rk4(|_, _: &[f64; 2]| [0.0, 0.0], 0.0, &[3.0, 4.0], 0.1);
        assert_eq!(z, [3.0, 4.0]);
    }

    #[test]
    fn valves_are_diodes() {
        let p = CircParams::default();
        assert!((p.valve_flux(1.0) - 1.0 / 0.0075).abs() < 1e-9);
        assert_eq!(p.valve_flux(0.0), 0.0);
        assert!((p.valve_flux(-1.0) + 1.0 / 75006.2).abs() < 1e-15);
        // Backward over forward conductance.
        assert!((-p.valve_flux(-1.0) / p.valve_flux(1.0) - p.r_min / p.r_max).abs() < 1e-18);
    }

    #[test]
    fn equal_pressures_give_no_valve_flux() {
        let circ = Circulation::new(CircParams::default()).unwrap();
        let mut s = CircState::initial(60.0);
        let t = 0.3;
        let c = circ.chamber_pressures(t, &s.y);
        s.y[P_AR_SYS] = 90.0;
        let q = circ.valve_fluxes(t, &s.y, c.la);
        assert_eq!(q.mitral, 0.0);
    }

    #[test]
    fn network_conserves_blood() {
        let p = CircParams::default();
        let circ = Circulation::new(p).unwrap();
        let s = CircState::initial(60.0);
        for (t, plv) in [(0.0, 5.0), (0.2, 120.0), (0.7, 2.0)] {
            let dy = circ.rhs(t, &s.y, plv);
            let terms = [
                dy[V_LA],
                dy[V_RA],
                dy[V_RV],
                dy[V_LV],
                p.ar_sys.c * dy[P_AR_SYS],
                p.ven_sys.c * dy[P_VEN_SYS],
                p.ar_pul.c * dy[P_AR_PUL],
                p.ven_pul.c * dy[P_VEN_PUL],
            ];
            let max = terms.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            assert!(terms.iter().sum::<f64>().abs() < 1e-12 * max);
        }
    }

    #[test]
    fn pulses_are_periodic_and_bounded() {
        let p = CircParams::default();
        for k in 0..200 {
            let t = k as f64 * 0.004;
            let a = p.la.pulse.value(t, p.period);
            assert!((0.0..=1.0).contains(&a));
            assert!((a - p.la.pulse.value(t + p.period, p.period)).abs() < 1e-12);
        }
        // The atrial kick ends before ventricular contraction starts.
        assert!(p.la.pulse.onset + p.la.pulse.contraction + p.la.pulse.relaxation <= p.period + p.rv.pulse.onset);
    }

    #[test]
    fn free_run_conserves_volume_over_a_beat() {
        let p = CircParams::default();
        let circ = Circulation::new(p).unwrap();
        let mut s = CircState::initial(60.0);
        let v0 = s.total_volume(&p);
        // LV pressure from a crude elastance so the loop is closed.
        let lv = Chamber {
            e_pass: 0.08,
            e_act: 2.0,
            v0: 10.0,
            pulse: p.rv.pulse,
        };
        for _ in 0..16000 {
            let plv = lv.elastance(s.t, p.period) * (s.y[V_LV] - lv.v0);
            s = circ.rk4_step(&s, 50e-6, plv).unwrap();
        }
        assert!((s.total_volume(&p) - v0).abs() < 1e-9 * v0);
        assert!(s.y.iter().all(|v| v.is_finite()));
    }
}
