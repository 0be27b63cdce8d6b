use patchflow::majorant::verify_recursion_inequality;
use patchflow::{PatchSpec, SeriesConfig, SeriesEngine};

fn disk_ledger(c: f64) -> patchflow::MajorantLedger {
    let cfg = SeriesConfig { order: 4, ..SeriesConfig::default() };
    SeriesEngine::new(PatchSpec::ball(2, 1.0, c), cfg).unwrap().solve().unwrap().ledger.unwrap()
}

#[test]
fn margins_shrink_as_safety_drops_to_one() {
    let ledger = disk_ledger(1.0);
    let margins: Vec<f64> = [2.0, 1.5, 1.0]
        .iter()
        .map(|&s| verify_recursion_inequality(&ledger.with_safety(s).unwrap()).min_margin)
        .collect();
    assert!(margins[0] >= 0.0);
    assert!(margins[0] > margins[1] && margins[1] > margins[2], "{margins:?}");
    let t = |s: f64| ledger.with_safety(s).unwrap().tau0;
    assert!(t(1.0) > t(2.0));
}

#[test]
fn vanishing_patch_sends_both_sides_to_zero() {
    let big = disk_ledger(1.0);
    let small = disk_ledger(1e-6);
    let scale = |l: &patchflow::MajorantLedger| {
        let rep = verify_recursion_inequality(l);
        let lhs = l.alpha.iter().chain(&l.beta).flatten().copied().fold(0.0, f64::max);
        let rhs = rep.levels.iter().flat_map(|m| m.rhs_alpha.iter().chain(&m.rhs_beta)).copied().fold(0.0, f64::max);
        (lhs, rhs, rep.min_margin)
    };
    let (lb, rb, _) = scale(&big);
    let (ls, rs, ms) = scale(&small);
    assert!(ls < 1e-5 * lb && rs < 1e-5 * rb, "lhs {ls:e}, rhs {rs:e}");
    assert!(ms >= 0.0);
}
