/// First upward threshold crossing per node, linearly interpolated in time.
#[derive(Clone, Debug, PartialEq)]
pub struct ActivationMap {
    pub threshold: f64,
    pub times: Vec<Option<f64>>,
}

impl ActivationMap {
    pub fn new(n_dofs: usize, threshold: f64) -> Self {
        ActivationMap {
            threshold,
            times: vec![None; n_dofs],
        }
    }

    /// Records crossings between two consecutive potential snapshots.
    pub fn update(&mut self, u_prev: &[f64], u_new: &[f64], t_prev: f64, t_new: f64) {
        let th = self.threshold;
        for (i, slot) in self.times.iter_mut().enumerate() {
            if slot.is_none() && u_prev[i] < th && u_new[i] >= th {
                let s = (th - u_prev[i]) / (u_new[i] - u_prev[i]);
                *slot = Some(t_prev + s * (t_new - t_prev));
            }
        }
    }

    /// Values with unactivated nodes marked by `NaN`.
    pub fn as_field(&self) -> Vec<f64> {
        self.times.iter().map(|t| t.unwrap_or(f64::NAN)).collect()
    }

    pub fn all_activated(&self) -> bool {
        self.times.iter().all(Option::is_some)
    }
}
