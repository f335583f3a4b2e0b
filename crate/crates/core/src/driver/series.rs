//! Time series and per-beat summaries.

use serde::{Deserialize, Serialize};

use crate::coupling0d::N_STATE;

/// One output record. Pressures in mmHg, volumes in mL.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    pub p_lv: f64,
    pub v_lv_3d: f64,
    pub v_lv_0d: f64,
    /// `∫ J dΩ₀`.
    pub solid_volume: f64,
    pub total_blood: f64,
    pub mitral_open: bool,
    pub aortic_open: bool,
    pub c1: [f64; N_STATE],
}

/// Landmarks of one completed beat. Volumes come from the 3D cavity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeatSummary {
    pub beat: usize,
    /// Volume and pressure at the last mitral closure before the aortic
    /// valve first opens in the beat.
    pub edv: Option<f64>,
    pub edp: Option<f64>,
    /// Volume at the last aortic closure of the beat.
    pub esv: Option<f64>,
    pub max_p_lv: f64,
    pub min_v: f64,
    pub max_v: f64,
    /// `(p, V)` at the first and last step of the beat.
    pub first: (f64, f64),
    pub last: (f64, f64),
}

impl BeatSummary {
    pub fn stroke_volume(&self) -> Option<f64> {
        Some(self.edv? - self.esv?)
    }

    /// Relative gap between the start and end of the PV loop, scaled by the
    /// loop's pressure and volume ranges.
    pub fn loop_gap(&self) -> f64 {
        let dv = (self.max_v - self.min_v).max(f64::MIN_POSITIVE);
        let dp = self.max_p_lv.abs().max(f64::MIN_POSITIVE);
        ((self.last.0 - self.first.0) / dp).abs().max(((self.last.1 - self.first.1) / dv).abs())
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    pub samples: Vec<Sample>,
    /// Completed beats only.
    pub beats: Vec<BeatSummary>,
}

impl TimeSeries {
    pub fn last_beat(&self) -> Option<&BeatSummary> {
        self.beats.last()
    }
}

#[derive(Clone, Debug)]
struct Partial {
    beat: usize,
    edv: Option<(f64, f64)>,
    esv: Option<f64>,
    ejected: bool,
    max_p: f64,
    min_v: f64,
    max_v: f64,
    first: (f64, f64),
    last: (f64, f64),
}

/// Detects valve closures step by step and closes a beat when time crosses
/// a period boundary. Mitral closures after the first aortic opening of a
/// beat (reopening flicker during relaxation) do not count as end diastole.
#[derive(Clone, Debug)]
pub struct BeatTracker {
    period: f64,
    prev: Option<(bool, bool)>,
    current: Option<Partial>,
    done: Vec<BeatSummary>,
}

impl BeatTracker {
    pub fn new(period: f64) -> Self {
        BeatTracker {
            period,
            prev: None,
            current: None,
            done: Vec::new(),
        }
    }

    fn beat_of(&self, t: f64) -> usize {
        // A step ending exactly on a boundary closes the earlier beat.
        ((t / self.period) * (1.0 - 1e-12)).floor().max(0.0) as usize
    }

    /// Records the state at the end of a step. `valves` is
    /// `(mitral open, aortic open)`.
    pub fn observe(&mut self, t: f64, p: f64, v: f64, valves: &(bool, bool)) {
        let beat = self.beat_of(t);
        if self.current.as_ref().is_some_and(|c| c.beat != beat) {
            self.close();
        }
        let cur = self.current.get_or_insert(Partial {
            beat,
            edv: None,
            esv: None,
            ejected: false,
            max_p: f64::NEG_INFINITY,
            min_v: f64::INFINITY,
            max_v: f64::NEG_INFINITY,
            first: (p, v),
            last: (p, v),
        });
        if let Some((mitral, aortic)) = self.prev {
            if mitral && !valves.0 && !cur.ejected {
                cur.edv = Some((v, p));
            }
            if !aortic && valves.1 {
                cur.ejected = true;
            }
            if aortic && !valves.1 {
                cur.esv = Some(v);
            }
        }
        cur.max_p = cur.max_p.max(p);
        cur.min_v = cur.min_v.min(v);
        cur.max_v = cur.max_v.max(v);
        cur.last = (p, v);
        self.prev = Some(*valves);
    }

    fn close(&mut self) {
        if let Some(c) = self.current.take() {
            self.done.push(BeatSummary {
                beat: c.beat,
                edv: c.edv.map(|e| e.0),
                edp: c.edv.map(|e| e.1),
                esv: c.esv,
                max_p_lv: c.max_p,
                min_v: c.min_v,
                max_v: c.max_v,
                first: c.first,
                last: c.last,
            });
        }
    }

    /// Closes the running beat if `t` is at its end.
    pub fn finish(&mut self, t: f64) {
        if let Some(c) = &self.current {
            if t >= (c.beat + 1) as f64 * self.period * (1.0 - 1e-12) {
                self.close();
            }
        }
    }

    pub fn completed(&self) -> &[BeatSummary] {
        &self.done
    }
}
