use cloudlapse_demo::{boundary_view, raychaudhuri_view, virial_view};

#[test]
fn virial_root_precedes_natural_time() {
    let v = virial_view(1.0 / 48.0, 10.0, 2001).ok().unwrap();
    assert!((v.t_dagger() - 10.0 / 23.0).abs() < 1e-10);
    assert_eq!(v.t_natural(), 1.0);
    assert_eq!(v.t().len(), v.f().len());
    let first = v.first_positive();
    assert!(first >= v.t_dagger() - 1e-3 && first <= v.t_dagger() + 1e-3, "{first}");
}

#[test]
fn boundary_envelope_holds_and_breaks_under_inflated_gravity() {
    let b = boundary_view(1.0005, 1.0, 0.5, 42).ok().unwrap();
    assert!(b.bootstrap_pass() && b.envelope_pass());
    let r = b.radius();
    assert!(r.iter().zip(b.lower()).zip(b.upper()).all(|((r, lo), hi)| lo < *r && *r < hi));

    let b = boundary_view(1.0005, 100.0, 0.5, 42).ok().unwrap();
    assert!(!b.bootstrap_pass());
    assert!(b.violation().is_some());
}

#[test]
fn expansion_tracks_the_free_solution() {
    let r = raychaudhuri_view(1.0005, 1.0, 0.05, 42).ok().unwrap();
    assert!(r.w_sup() < r.w_bound());
    let (th, free) = (r.theta(), r.free_theta());
    let last = th.len() - 1;
    assert!((th[last] - free[last]).abs() < 1e-2 * free[last]);
}
