use lagfib_web::{minimal_torus, minimal_torus_js, solve_fiber, volume_profile};

#[test]
fn profile_is_convex_with_interior_minimum() {
    let p = volume_profile(20.0, 0.05, 0.5, 21).unwrap();
    assert_eq!(p.x.len(), 21);
    assert!(p.u_xx.iter().all(|&v| v > 0.0));
    assert!(p.x0.abs() < 10.0);
    let (imin, _) = p.u.iter().enumerate().min_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    assert!((p.x[imin] - p.x0).abs() <= 1.0);
}

#[test]
fn fiber_solves_to_tolerance() {
    let f = solve_fiber(20.0, 0.05, 1.0, 8).unwrap();
    assert_eq!(f.t.len(), f.h.len());
    assert!(f.residual < 1e-8);
    assert!(f.sup_h > 0.0 && f.sup_h < 1e-2);
}

#[test]
fn minimal_torus_has_zero_class() {
    let m = minimal_torus(20.0, 0.05, 8).unwrap();
    assert!(m.minimal);
    assert!(m.class.abs() < 1e-8);
}

#[test]
fn bad_input_is_reported_as_json() {
    let s = minimal_torus_js(0.5, 0.05, 8);
    let v: serde_json::Value = serde_json::from_str(&s).unwrap();
    assert!(v["error"].as_str().unwrap().contains("tau"));
}
