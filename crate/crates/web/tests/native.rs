use patchflow_web::{disk_radius, evolve_ellipse, riesz_indicator};

#[test]
fn disk_radius_follows_the_collapse_law() {
    assert!((disk_radius(1.0, 1.0, 0.75).unwrap() - 0.5).abs() < 1e-14);
    assert!(disk_radius(1.0, 1.0, 1.0).is_err());
}

#[test]
fn ellipse_boundary_shrinks_by_one_minus_t() {
    let t = 0.3;
    let pts = evolve_ellipse(2.0, 1.0, 1.0, t, 128).unwrap();
    assert_eq!(pts.len(), 256);
    let xy: Vec<(f64, f64)> = pts.chunks(2).map(|p| (p[0], p[1])).collect();
    // shoelace area of the polyline vs (1 − ct)·π a b
    let area: f64 = (0..xy.len()).map(|k| {
        let (a, b) = (xy[k], xy[(k + 1) % xy.len()]);
        0.5 * (a.0 * b.1 - b.0 * a.1)
    }).sum();
    let exact = (1.0 - t) * std::f64::consts::PI * 2.0;
    assert!((area - exact).abs() / exact < 2e-3, "area {area} vs {exact}");
}

#[test]
fn riesz_trace_inside_and_outside() {
    let tr = |x: f64, y: f64| riesz_indicator(2.0, 1.0, 0, 0, x, y).unwrap() + riesz_indicator(2.0, 1.0, 1, 1, x, y).unwrap();
    assert!((tr(0.5, 0.2) - 1.0).abs() < 1e-6);
    assert!(tr(3.0, 0.5).abs() < 1e-6);
}
