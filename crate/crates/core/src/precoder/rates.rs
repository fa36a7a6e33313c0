use serde::{Deserialize, Serialize};

use crate::channel::ChannelSample;
use crate::scenarios::NetworkScenario;
use crate::{CMatrix, CVector};

use super::PrecoderSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateReport {
    pub sinr: Vec<f64>,
    /// bits/s/Hz
    pub per_user: Vec<f64>,
    pub weighted_sum: f64,
}

/// Rates under the true interference: every relevant station's full
/// transmission is counted, plus receiver noise.
pub fn actual_rates(scenario: &NetworkScenario, precoders: &PrecoderSet, sample: &ChannelSample) -> RateReport {
    let users = scenario.num_users();
    let mut sinr = Vec::with_capacity(users);
    for k in 0..users {
        let serving = scenario.cell_of(k);
        let local = k - scenario.users_of(serving).start;
        let mut desired = 0.0;
        let mut rest = scenario.noise_power_w;
        for (m, p) in precoders.per_bs.iter().enumerate() {
            let Some(h) = sample.get(m, k) else { continue };
            for (j, wj) in p.w.column_iter().enumerate() {
                let a = h.dotc(&wj).norm_sqr();
                if m == serving && j == local {
                    desired = a;
                } else {
                    rest += a;
                }
            }
        }
        sinr.push(desired / rest);
    }
    let per_user: Vec<f64> = sinr.iter().map(|g| g.ln_1p() / std::f64::consts::LN_2).collect();
    let weighted_sum = per_user.iter().zip(scenario.weights()).map(|(r, a)| r * a).sum();
    RateReport { sinr, per_user, weighted_sum }
}

/// Rates of one cell when out-of-cell interference is replaced by the
/// constant `c` (noise plus incoming allowance).
pub fn surrogate_rates(w: &CMatrix, in_cell: &[CVector], c: f64) -> Vec<f64> {
    in_cell
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let mut desired = 0.0;
            let mut rest = c;
            for (j, wj) in w.column_iter().enumerate() {
                let a = h.dotc(&wj).norm_sqr();
                if j == k {
                    desired = a;
                } else {
                    rest += a;
                }
            }
            (desired / rest).ln_1p() / std::f64::consts::LN_2
        })
        .collect()
}
