use lagfib::lagrangian::forms::sup;
use lagfib::minimal::{log_volume, log_volume_quadrature};
use lagfib::models::{line_model, line_near_ke};
use lagfib::solver::{FiberProblem, SolverConfig};
use proptest::prelude::*;

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn volume_routes_agree(x in -10.0f64..10.0) {
        let p = line_near_ke(20.0, 0.05).unwrap();
        let direct = log_volume(&p, &[x]).unwrap().u;
        let quad = log_volume_quadrature(&p, &[x], 8).unwrap();
        prop_assert!((direct - quad).abs() <= 1e-8 * direct.abs().max(1.0), "{direct} vs {quad}");
    }
}

#[test]
fn volume_is_convex_on_the_region() {
    let tau = 20.0;
    let p = line_model(tau, 0.05).unwrap();
    for i in 0..50 {
        let x = 0.5 * tau * (-1.0 + 2.0 * i as f64 / 49.0);
        let v = log_volume(&p, &[x]).unwrap();
        assert!(v.hess[0][0] > 0.0, "u'' at {x}: {}", v.hess[0][0]);
    }
}

#[test]
fn stage_count_does_not_change_the_solution() {
    let p = line_model(20.0, 0.05).unwrap();
    let prob = FiberProblem::new(&p, &[0.0], 10).unwrap();
    let coarse = prob.continue_to(1.0, &SolverConfig { stages: 10, ..Default::default() }).unwrap();
    let fine = prob.continue_to(1.0, &SolverConfig { stages: 20, ..Default::default() }).unwrap();
    assert!(sup_diff(&coarse.h, &fine.h) < 1e-8);
    let mean: f64 = coarse.h.iter().sum::<f64>() / coarse.h.len() as f64;
    assert!(mean.abs() < 1e-12);
}

#[test]
fn newton_residuals_decrease_quadratically() {
    let p = line_model(20.0, 0.2).unwrap();
    let prob = FiberProblem::new(&p, &[0.0], 10).unwrap();
    let cfg = SolverConfig { tol: 1e-13, ..Default::default() };
    let out = prob.newton_solve(1.0, &vec![0.0; prob.grid.len()], &cfg).unwrap();
    let hist = &out.history;
    assert!(hist.len() >= 3, "{hist:?}");
    assert!(hist.windows(2).all(|w| w[1] < w[0]), "{hist:?}");
    for w in hist.windows(2) {
        if w[0] < 1e-4 && w[1] > 1e-14 {
            assert!(w[1] < 10.0 * w[0] * w[0], "{hist:?}");
        }
    }
}

#[test]
fn warm_start_path_is_continuous() {
    let p = line_model(20.0, 0.05).unwrap();
    let prob = FiberProblem::new(&p, &[0.0], 8).unwrap();
    let cfg = SolverConfig::default();
    let base = prob.continue_to(0.5, &cfg).unwrap();
    let gaps: Vec<f64> = [0.1, 0.05, 0.025]
        .iter()
        .map(|ds| {
            let next = prob.newton_solve(0.5 + ds, &base.h, &cfg).unwrap();
            sup_diff(&next.h, &base.h)
        })
        .collect();
    for w in gaps.windows(2) {
        let r = w[0] / w[1];
        assert!((1.8..=2.2).contains(&r), "{gaps:?}");
    }
}

#[test]
fn solutions_stay_resolved_on_a_finer_grid() {
    let p = line_model(20.0, 0.05).unwrap();
    let prob = FiberProblem::new(&p, &[0.0], 8).unwrap();
    let cfg = SolverConfig::default();
    let st = prob.continue_to(1.0, &cfg).unwrap();
    let fine = prob.with_grid(16);
    let h = prob.grid.resample(&st.h, &fine.grid);
    let r = sup(&fine.residual(&h, 1.0).unwrap());
    assert!(r < 10.0 * cfg.tol, "residual on doubled grid {r:e}");
}
