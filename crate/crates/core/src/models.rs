//! Small reference models shared by tests, the command line and the demo.

use std::sync::Arc;

use crate::error::Result;
use crate::kahler::{synth_ke_family, KahlerPotential, Mode, ModeSum, SynthKeSpec};
use crate::toric::{FanPotential, FlatPotential, WeightedFan};

/// The fan of `P¹` with rays `±1` and weights `−1`, so `Δ_τ = [−τ, τ]`.
pub fn line_fan() -> WeightedFan {
    WeightedFan::new(1, vec![vec![1], vec![-1]], vec![-1.0, -1.0]).expect("valid fan")
}

/// The fan of `P²` with rays `e₁, e₂, −e₁−e₂` and weights `−1`.
pub fn triangle_fan() -> WeightedFan {
    WeightedFan::new(2, vec![vec![1, 0], vec![0, 1], vec![-1, -1]], vec![-1.0, -1.0, -1.0]).expect("valid fan")
}

/// Two non-symmetric modes of size `eps` on the line model.
pub fn line_modes(tau: f64, eps: f64) -> ModeSum {
    ModeSum::new(
        1,
        tau,
        vec![
            Mode { k: vec![1], center: vec![0.05], width: 0.5, amp: eps, phase: 0.4 },
            Mode { k: vec![2], center: vec![-0.05], width: 0.6, amp: 0.5 * eps, phase: 0.0 },
        ],
    )
}

/// The line model perturbed by [`line_modes`].
pub fn line_model(tau: f64, eps: f64) -> Result<KahlerPotential> {
    KahlerPotential::perturbed(Arc::new(FanPotential::new(line_fan(), tau)), Arc::new(line_modes(tau, eps)))
}

pub fn flat_model(dim: usize) -> KahlerPotential {
    KahlerPotential::toric(Arc::new(FlatPotential { dim }))
}

/// The line model with the exact Einstein correction in `b⁰` and angular
/// modes of size `eps` in `b¹` (scaled by `τ^{-3}`).
pub fn line_near_ke(tau: f64, eps: f64) -> Result<KahlerPotential> {
    let spec = SynthKeSpec {
        b1: vec![
            Mode { k: vec![1], center: vec![0.05], width: 0.5, amp: eps, phase: 0.4 },
            Mode { k: vec![2], center: vec![-0.05], width: 0.6, amp: 0.5 * eps, phase: 0.0 },
        ],
        line_ke_correction: true,
        ..Default::default()
    };
    let fan = line_fan();
    let probes: Vec<Vec<f64>> = (-9..=9).map(|i| vec![0.1 * i as f64 * tau]).collect();
    synth_ke_family(&spec, Arc::new(FanPotential::new(fan.clone(), tau)), &fan, &probes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kahler::einstein_deviation;

    #[test]
    fn corrected_line_model_is_einstein() {
        for tau in [5.0, 20.0] {
            let p = line_near_ke(tau, 0.0).unwrap();
            let samples: Vec<(Vec<f64>, Vec<f64>)> = [-0.8, -0.3, 0.0, 0.5].iter().map(|u| (vec![u * tau], vec![0.3])).collect();
            let dev = einstein_deviation(&p, &samples).unwrap();
            assert!(dev < 1e-12 / (tau * tau), "{dev}");
        }
    }

    #[test]
    fn near_ke_deviation_decays() {
        let devs: Vec<f64> = [20.0, 40.0]
            .iter()
            .map(|&tau| {
                let p = line_near_ke(tau, 0.05).unwrap();
                let s = vec![(vec![0.0], vec![0.7]), (vec![0.1 * tau], vec![2.0])];
                einstein_deviation(&p, &s).unwrap()
            })
            .collect();
        assert!(devs[1] < devs[0] / 1.8, "{devs:?}");
    }
}
