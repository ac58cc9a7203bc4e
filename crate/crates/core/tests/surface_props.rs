use std::sync::Arc;

use lagfib::kahler::KahlerPotential;
use lagfib::lagrangian::forms::{form_sup, sup};
use lagfib::lagrangian::hodge::{hodge_decompose, HodgeTolerances};
use lagfib::models::{flat_model, line_model, triangle_fan};
use lagfib::oracles::random_band_limited;
use lagfib::solver::FiberProblem;
use lagfib::toric::FanPotential;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spread(f: &[f64]) -> f64 {
    f.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f.iter().cloned().fold(f64::INFINITY, f64::min)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn graphs_are_lagrangian_with_symmetric_forms(seed in any::<u64>(), s in 0.0f64..1.0, x in -4.0f64..4.0) {
        let p = line_model(20.0, 0.05).unwrap();
        let prob = FiberProblem::new(&p, &[x], 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_band_limited(&prob.grid, 3, 0.02, &mut rng);
        let g = prob.geometry(&h, s, false).unwrap();
        prop_assert!(g.lagrangian_defect < 1e-9, "defect {}", g.lagrangian_defect);
        prop_assert!(g.symmetry_defect < 1e-8, "symmetry {}", g.symmetry_defect);
        let traced: Vec<f64> = (0..prob.grid.len())
            .map(|p| {
                let gi = &g.metric.g_inv[p];
                gi[(0, 0)] * g.a_ijk(p, 0, 0, 0)
            })
            .collect();
        prop_assert!(sup_diff(&traced, &g.alpha[0]) < 1e-10);
    }

    #[test]
    fn toric_fibres_are_homogeneous(u in prop::collection::vec(-0.3f64..0.3, 2)) {
        let tau = 20.0;
        let p = KahlerPotential::toric(Arc::new(FanPotential::new(triangle_fan(), tau)));
        let x: Vec<f64> = u.iter().map(|v| v * tau).collect();
        let prob = FiberProblem::new(&p, &x, 4).unwrap();
        let g = prob.geometry(&vec![0.0; prob.grid.len()], 0.0, false).unwrap();
        for k in 0..2 {
            prop_assert!(spread(&g.alpha[k]) < 1e-9);
        }
        for (a, b) in [(0, 0), (0, 1), (1, 1)] {
            let entries: Vec<f64> = g.metric.g.iter().map(|m| m[(a, b)]).collect();
            prop_assert!(spread(&entries) < 1e-9);
        }
        prop_assert!(sup(&g.codifferential_alpha()) < 1e-12);
    }

    #[test]
    fn hodge_parts_reconstruct_and_are_orthogonal(seed in any::<u64>()) {
        let p = line_model(20.0, 0.05).unwrap();
        let prob = FiberProblem::new(&p, &[0.0], 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = random_band_limited(&prob.grid, 3, 0.02, &mut rng);
        let g = prob.geometry(&h, 1.0, false).unwrap();
        let beta = vec![random_band_limited(&prob.grid, 4, 1.0, &mut rng)];
        let split = hodge_decompose(&beta, &g.metric, HodgeTolerances::default()).unwrap();
        prop_assert!(split.reconstruction_error < 1e-10);
        prop_assert!(split.orthogonality < 1e-8);
    }
}

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

#[test]
fn flat_toric_fibres_have_closed_mean_curvature() {
    let p = flat_model(2);
    let prob = FiberProblem::new(&p, &[0.3, -0.8], 6).unwrap();
    let g = prob.geometry(&vec![0.0; prob.grid.len()], 0.0, false).unwrap();
    let d_alpha = g.metric.d_one_form(&g.alpha);
    let worst = d_alpha.iter().map(|c| sup(c)).fold(0.0, f64::max);
    assert!(worst < 1e-12, "d alpha {worst}");
    assert!(form_sup(&g.alpha) > 0.5);
}
