//! Norm ledger, recursion check and convergence radii.
//!
//! The norm is `‖f‖ = ‖f‖_{L²} + ‖f‖_∞ + [f]_γ` on one side of the boundary, estimated from mesh
//! quadrature and a fixed, seeded family of sample pairs. With a shared pair family the sampled norm is
//! subadditive and submultiplicative, which is what makes the recursive bound checkable.

use rand::RngExt;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;

use crate::field::{BundleKind, FieldBundle, Part};
use crate::mesh::{FieldMesh, MeshField};
use crate::series::{compositions, CoefficientLevel, SeriesEngine, SeriesSolution, TermNorm};
use crate::{dist, Error, Result};

/// Estimator settings for [`field_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormOptions {
    /// Random sample pairs for the Hölder quotient.
    pub pairs: usize,
    pub seed: u64,
}

impl Default for NormOptions {
    fn default() -> Self {
        Self { pairs: 4000, seed: 0x5eed }
    }
}

fn pair_indices(len: usize, opts: &NormOptions) -> Vec<(usize, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ (len as u64).wrapping_mul(0x9e37_79b9));
    let mut out = Vec::with_capacity(opts.pairs + len);
    // neighbouring samples first, so small separations are always represented
    for a in 0..len.saturating_sub(1) {
        out.push((a, a + 1));
    }
    while out.len() < opts.pairs + len.saturating_sub(1) && len > 1 {
        let a = rng.random_range(0..len);
        let b = rng.random_range(0..len);
        if a != b {
            out.push((a, b));
        }
    }
    out
}

/// Components of the sampled norm.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormParts {
    pub l2: f64,
    pub sup: f64,
    pub holder: f64,
}

impl NormParts {
    pub fn total(&self) -> f64 {
        self.l2 + self.sup + self.holder
    }
}

/// Norm of one component of `bundle` on `part` (interior or exterior).
pub fn field_norm_parts(mesh: &FieldMesh, bundle: &FieldBundle, comp: usize, part: Part, opts: &NormOptions) -> Result<NormParts> {
    if part == Part::Boundary {
        return Err(Error::InvalidInput("norms are defined on the interior or exterior part".into()));
    }
    let samples = mesh.samples(part);
    if samples.len() < 8 {
        return Err(Error::InsufficientData(format!("{} samples are too few for a stable norm", samples.len())));
    }
    let vals = mesh.sample_values(bundle, comp, part);
    let gamma = bundle.comps[comp].gamma;
    let l2 = samples.iter().zip(&vals).map(|((_, w), v)| w * v * v).sum::<f64>().sqrt();
    let sup = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let mut holder = 0.0f64;
    for (a, b) in pair_indices(samples.len(), opts) {
        let d = dist(&samples[a].0, &samples[b].0);
        if d > 0.0 {
            holder = holder.max((vals[a] - vals[b]).abs() / d.powf(gamma));
        }
    }
    Ok(NormParts { l2, sup, holder })
}

/// `‖f‖_{L²} + ‖f‖_∞ + [f]_γ` of one component on `part`; zero for an unusable request.
pub fn field_norm(mesh: &FieldMesh, bundle: &FieldBundle, comp: usize, part: Part, opts: &NormOptions) -> f64 {
    field_norm_parts(mesh, bundle, comp, part, opts).map(|p| p.total()).unwrap_or(0.0)
}

/// Empirical convergence radius from a root test on the level sup-norms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadiusEstimate {
    pub radius: f64,
    pub lower: f64,
    pub upper: f64,
    /// Fitted power of `s` in `a_s ≈ e^A s^B ρ^{-s}`.
    pub power: f64,
    pub levels_used: usize,
    /// Set when successive log-ratios of the tail oscillate; the interval is then doubled.
    pub widened: bool,
}

/// Fit `log a_s = A + B log s − s log ρ (+ D/s)` to the sup-norms of all levels.
pub fn empirical_radius(series: &SeriesSolution) -> Result<RadiusEstimate> {
    let norms: Vec<f64> = (1..=series.levels.len()).map(|s| series.sup_norm(s)).collect();
    radius_from_norms(&norms)
}

/// Root-test fit on a sequence `a_1, a_2, …`.
pub fn radius_from_norms(norms: &[f64]) -> Result<RadiusEstimate> {
    if norms.len() < 4 {
        return Err(Error::InsufficientData(format!("root test needs at least 4 levels, got {}", norms.len())));
    }
    let pts: Vec<(f64, f64)> =
        norms.iter().enumerate().filter(|(_, a)| **a > 0.0 && a.is_finite()).map(|(k, a)| ((k + 1) as f64, a.ln())).collect();
    if pts.len() < 4 {
        return Err(Error::InsufficientData("fewer than 4 nonzero levels".into()));
    }
    let m = pts.len();
    // with enough levels a 1/s term absorbs the leading correction to the power law
    let np = if m >= 6 { 4 } else { 3 };
    let a = nalgebra::DMatrix::from_fn(m, np, |r, c| match c {
        0 => 1.0,
        1 => pts[r].0.ln(),
        2 => pts[r].0,
        _ => 1.0 / pts[r].0,
    });
    let y = nalgebra::DVector::from_iterator(m, pts.iter().map(|p| p.1));
    let svd = a.clone().svd(true, true);
    let coef = svd.solve(&y, 1e-12).map_err(|e| Error::NonConvergent(e.to_string()))?;
    let resid = &y - &a * &coef;
    let dof = (m as f64 - np as f64).max(1.0);
    let s2 = resid.norm_squared() / dof;
    let cov = (a.transpose() * &a).try_inverse().ok_or_else(|| Error::NonConvergent("singular root-test fit".into()))?;
    let se = (s2 * cov[(2, 2)]).sqrt();
    let slope = coef[2];
    let ratios: Vec<f64> = pts.windows(2).map(|w| w[1].1 - w[0].1).collect();
    let tail = &ratios[ratios.len() / 2..];
    let widened = tail.windows(3).any(|w| (w[1] - w[0]) * (w[2] - w[1]) < -1e-6 * (1.0 + w[1].abs()));
    let width = if widened { 4.0 * se } else { 2.0 * se };
    Ok(RadiusEstimate {
        radius: (-slope).exp(),
        lower: (-slope - width).exp(),
        upper: (-slope + width).exp(),
        power: coef[1],
        levels_used: m,
        widened,
    })
}

/// Root of `φ(α) = (1−α)√(1−γ)/(2n(n−1)M) − (α/(n!M))^{1/(n−1)}` with `γ = 1/2`, and the resulting
/// `τ0 = (1−α)²/(8 n (n−1) M c)`.
pub fn certified_radius(n: usize, m: f64, c_small: f64) -> Result<(f64, f64)> {
    if n < 2 || !(m > 0.0) || !(c_small > 0.0) {
        return Err(Error::InvalidInput("certified radius needs n ≥ 2 and positive M, c".into()));
    }
    let nf = n as f64;
    let fact: f64 = (1..=n).map(|k| k as f64).product();
    let gamma: f64 = 0.5;
    let phi = |a: f64| (1.0 - a) * (1.0 - gamma).sqrt() / (2.0 * nf * (nf - 1.0) * m) - (a / (fact * m)).powf(1.0 / (nf - 1.0));
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if phi(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let alpha = 0.5 * (lo + hi);
    Ok((alpha, tau0(n, alpha, m, c_small)))
}

/// `(1−α)²/(8 n (n−1) M c)`.
pub fn tau0(n: usize, alpha: f64, m: f64, c_small: f64) -> f64 {
    let nf = n as f64;
    (1.0 - alpha).powi(2) / (8.0 * nf * (nf - 1.0) * m * c_small)
}

/// Margins of one order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelMargin {
    pub s: usize,
    pub rhs_alpha: Vec<f64>,
    pub rhs_beta: Vec<f64>,
    pub min_margin: f64,
}

/// Everything the radius certificate rests on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MajorantLedger {
    pub n: usize,
    /// `alpha[s-1][j n + i] = ‖∂_i ξ_j^(s)‖` on the interior.
    pub alpha: Vec<Vec<f64>>,
    pub beta: Vec<Vec<f64>>,
    /// Indexed `l n + i`.
    pub k_ops: Vec<f64>,
    pub l_ops: Vec<f64>,
    pub safety: f64,
    pub m: f64,
    pub c_small: f64,
    pub alpha_param: f64,
    pub tau0: f64,
    /// Norms of the order-one divergence source (interior, exterior).
    pub source_one: (f64, f64),
}

/// Result of [`verify_recursion_inequality`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecursionReport {
    pub levels: Vec<LevelMargin>,
    pub min_margin: f64,
}

impl RecursionReport {
    pub fn ok(&self) -> bool {
        self.min_margin >= 0.0
    }
}

/// Probe family: constants, radial powers and an angular oscillation on each side, plus a mixed probe.
pub fn probe_bundles(engine: &SeriesEngine) -> Vec<FieldBundle> {
    let mesh = engine.mesh();
    let patch = engine.patch();
    let n = patch.n();
    let c0 = patch.star_center();
    let scale = 0.5 * patch.diameter();
    let polar = matches!(**mesh, FieldMesh::Polar(_));
    type Pf = fn(f64, f64, usize) -> f64;
    let mut specs: Vec<(Option<Pf>, Option<Pf>)> = vec![
        (Some(|_, _, _| 1.0), None),
        (Some(|r, _, _| r * r), None),
        (None, Some(|r, _, n| r.powi(-(n as i32)))),
        (None, Some(|r, _, n| r.powi(-(n as i32) - 2))),
        (Some(|_, _, _| 1.0), Some(|r, _, n| r.powi(-(n as i32)))),
    ];
    if polar {
        specs.push((Some(|r, th, _| r.powi(3) * (3.0 * th).cos()), None));
        specs.push((None, Some(|r, th, n| r.powi(-(n as i32) - 3) * (5.0 * th).sin())));
        specs.push((Some(|r, th, _| r * th.cos()), Some(|r, th, n| r.powi(-(n as i32) - 1) * th.sin())));
    }
    specs
        .into_iter()
        .map(|(fi, fe)| {
            let mut b = FieldBundle::zeros(BundleKind::Scalar, n, mesh.sizes(), patch.gamma());
            for (part, f) in [(Part::Interior, fi), (Part::Exterior, fe)] {
                if let Some(f) = f {
                    for (k, p) in mesh.nodes(part).iter().enumerate() {
                        let d = crate::sub(p, &c0);
                        let r = crate::norm(&d) / scale;
                        b.comps[0].part_mut(part)[k] = f(r, d[1].atan2(d[0]), n);
                    }
                }
            }
            engine.finish_boundary(&mut b);
            b
        })
        .collect()
}

/// Empirical `K_{l,i}` and `L_{l,i}` (indexed `l n + i`): `safety` times the largest observed ratio
/// `‖χ T_{l,i}[f]‖ / (‖f‖_int + ‖f‖_ext)` over the probes and over every recorded source term.
pub fn operator_constants(engine: &SeriesEngine, probes: &[FieldBundle], levels: &[CoefficientLevel], safety: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = engine.patch().n();
    let mut pool: Vec<TermNorm> = levels.iter().flat_map(|l| l.term_norms.iter().copied()).collect();
    if !probes.is_empty() {
        let field = MeshField { mesh: engine.mesh(), bundles: probes.iter().collect() };
        let outs = engine.sweep(&field)?;
        let refs: Vec<&FieldBundle> = probes.iter().collect();
        pool.extend(engine.term_norms(&outs, &refs));
    }
    let mut k = vec![0.0; n * n];
    let mut l = vec![0.0; n * n];
    for t in pool {
        let den = t.src_int + t.src_ext;
        if den <= 0.0 {
            continue;
        }
        let idx = t.l * n + t.i;
        k[idx] = f64::max(k[idx], safety * t.out_int / den);
        l[idx] = f64::max(l[idx], safety * t.out_ext / den);
    }
    Ok((k, l))
}

/// Interior (`alpha`) and exterior (`beta`) norms of every derivative field of every level.
pub fn level_norms(engine: &SeriesEngine, levels: &[CoefficientLevel]) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let opts = engine.config().norms;
    let n = engine.patch().n();
    let f = |part: Part| {
        levels.iter().map(|lv| (0..n * n).map(|c| field_norm(engine.mesh(), &lv.dxi, c, part, &opts)).collect()).collect()
    };
    (f(Part::Interior), f(Part::Exterior))
}

/// Build the ledger with safety factor 2.
pub fn build_ledger(engine: &SeriesEngine, levels: &[CoefficientLevel]) -> Result<MajorantLedger> {
    build_ledger_with(engine, levels, 2.0)
}

pub fn build_ledger_with(engine: &SeriesEngine, levels: &[CoefficientLevel], safety: f64) -> Result<MajorantLedger> {
    let n = engine.patch().n();
    let probes = probe_bundles(engine);
    let (k_ops, l_ops) = operator_constants(engine, &probes, levels, safety)?;
    let (alpha, beta) = level_norms(engine, levels);
    let m = (0..n * n).map(|i| 2.0 * (k_ops[i] + l_ops[i])).fold(0.0, f64::max);
    let c_small = alpha.first().map(|a| (0..n * n).map(|i| a[i] + beta[0][i]).fold(0.0, f64::max)).unwrap_or(0.0);
    let (alpha_param, tau0) = certified_radius(n, m, c_small)?;
    let source_one = levels
        .first()
        .and_then(|l| l.term_norms.first())
        .map(|t| (t.src_int, t.src_ext))
        .unwrap_or((0.0, 0.0));
    Ok(MajorantLedger { n, alpha, beta, k_ops, l_ops, safety, m, c_small, alpha_param, tau0, source_one })
}

impl MajorantLedger {
    /// Same ledger with the operator constants rescaled to a different safety factor.
    pub fn with_safety(&self, safety: f64) -> Result<Self> {
        let f = safety / self.safety;
        let mut out = self.clone();
        out.k_ops.iter_mut().chain(out.l_ops.iter_mut()).for_each(|v| *v *= f);
        out.safety = safety;
        out.m = self.m * f;
        let (a, t) = certified_radius(self.n, out.m, self.c_small)?;
        out.alpha_param = a;
        out.tau0 = t;
        Ok(out)
    }

    /// Human-readable summary.
    pub fn report(&self, empirical: Option<&RadiusEstimate>) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "M = {:.6e}, c = {:.6e}, alpha = {:.6}, tau0 = {:.6e}", self.m, self.c_small, self.alpha_param, self.tau0);
        if let Some(e) = empirical {
            let _ = writeln!(
                s,
                "empirical radius = {:.6} [{:.6}, {:.6}]{}",
                e.radius,
                e.lower,
                e.upper,
                if e.widened { " (widened)" } else { "" }
            );
        }
        let rep = verify_recursion_inequality(self);
        for l in &rep.levels {
            let _ = writeln!(s, "order {:>2}: min margin {:+.4e}", l.s, l.min_margin);
        }
        s
    }
}

/// Check measured `α^(s)`, `β^(s)` against the bounds built from lower orders:
/// `α^(s+1)_{j,i} ≤ Σ_l K_{l,i} (S_int(l,j) + S_ext(l,j))` (and `β` with `L`), where the source bounds are
/// `‖Υ_{l,j}‖ ≤ (A_{l,j} + A_{j,l})/(s+1)` with `A_{l,j} = Σ_p (p+1) Σ_r α^(p+1)_{r,l} α^(s−p)_{r,j}` and
/// `‖Ξ‖ ≤ Σ_q Σ_σ Π_l α^(q_l)_{l,σ(l)}`.
pub fn verify_recursion_inequality(ledger: &MajorantLedger) -> RecursionReport {
    let n = ledger.n;
    let mut out = Vec::new();
    let perms = permutations(n);
    for (idx, (al, be)) in ledger.alpha.iter().zip(&ledger.beta).enumerate() {
        let s1 = idx + 1;
        // source bounds S[l][j] on each side
        let mut src = [vec![vec![0.0; n]; n], vec![vec![0.0; n]; n]];
        if s1 == 1 {
            for j in 0..n {
                src[0][j][j] = ledger.source_one.0;
                src[1][j][j] = ledger.source_one.1;
            }
        } else {
            let s = s1 - 1;
            for (side, norms) in [&ledger.alpha, &ledger.beta].into_iter().enumerate() {
                let a = |q: usize, r: usize, i: usize| if q == 0 { if r == i { 1.0 } else { 0.0 } } else { norms[q - 1][r * n + i] };
                let conv = |l: usize, j: usize| -> f64 {
                    (0..s).map(|p| (p + 1) as f64 * (0..n).map(|r| a(p + 1, r, l) * a(s - p, r, j)).sum::<f64>()).sum()
                };
                for l in 0..n {
                    for j in 0..n {
                        if l != j {
                            src[side][l][j] = (conv(l, j) + conv(j, l)) / s1 as f64;
                        }
                    }
                }
                let mut xi = 0.0;
                for q in compositions(s1, n, s) {
                    for sg in &perms {
                        xi += (0..n).map(|l| a(q[l], l, sg[l])).product::<f64>();
                    }
                }
                for j in 0..n {
                    src[side][j][j] = xi;
                }
            }
        }
        let mut ra = vec![0.0; n * n];
        let mut rb = vec![0.0; n * n];
        let mut mm = f64::INFINITY;
        for j in 0..n {
            for i in 0..n {
                let tot = |l: usize| src[0][l][j] + src[1][l][j];
                ra[j * n + i] = (0..n).map(|l| ledger.k_ops[l * n + i] * tot(l)).sum();
                rb[j * n + i] = (0..n).map(|l| ledger.l_ops[l * n + i] * tot(l)).sum();
                mm = mm.min(ra[j * n + i] - al[j * n + i]).min(rb[j * n + i] - be[j * n + i]);
            }
        }
        out.push(LevelMargin { s: s1, rhs_alpha: ra, rhs_beta: rb, min_margin: mm });
    }
    let min_margin = out.iter().map(|l| l.min_margin).fold(f64::INFINITY, f64::min);
    RecursionReport { levels: out, min_margin }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 1 {
        return vec![vec![0]];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..n {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Patch, PatchSpec};
    use crate::mesh::MeshOptions;
    use std::sync::Arc;

    #[test]
    fn prescribed_radius() {
        assert!((tau0(2, 0.5, 1.0, 1.0) - 0.015625).abs() < 1e-15);
        assert!((tau0(2, 0.3, 1.7, 2.0) - 0.5 * tau0(2, 0.3, 1.7, 1.0)).abs() < 1e-15);
        for n in [2, 3] {
            let (a, t) = certified_radius(n, 3.0, 1.5).unwrap();
            assert!(a > 0.0 && a < 1.0 && t > 0.0);
            assert!((t - tau0(n, a, 3.0, 1.5)).abs() < 1e-15);
        }
    }

    #[test]
    fn indicator_norm_on_disk() {
        let patch = Arc::new(Patch::new(PatchSpec::fourier_disk(1.0, 1.0)).unwrap());
        let mesh = FieldMesh::new(patch, MeshOptions::default()).unwrap();
        let mut b = FieldBundle::zeros(BundleKind::Scalar, 2, mesh.sizes(), 0.5);
        b.comps[0].interior.iter_mut().for_each(|v| *v = 1.0);
        let v = field_norm(&mesh, &b, 0, Part::Interior, &NormOptions::default());
        assert!((v - (std::f64::consts::PI.sqrt() + 1.0)).abs() < 1e-6, "{v}");
        assert_eq!(field_norm(&mesh, &b, 0, Part::Exterior, &NormOptions::default()), 0.0);
        // stability under doubling of pairs for a smooth field
        for (k, p) in mesh.nodes(Part::Interior).iter().enumerate() {
            b.comps[0].interior[k] = (2.0 * p[0]).sin() + p[1] * p[1];
        }
        let a1 = field_norm(&mesh, &b, 0, Part::Interior, &NormOptions { pairs: 2000, seed: 1 });
        let a2 = field_norm(&mesh, &b, 0, Part::Interior, &NormOptions { pairs: 4000, seed: 1 });
        assert!((a2 / a1 - 1.0).abs() < 0.05);
    }

    #[test]
    fn root_test_on_binomial_norms() {
        let k = |c: f64, s: usize| crate::oracle::exact_ball_coeff(2, c, s).abs();
        let e1 = radius_from_norms(&(1..=12).map(|s| k(1.0, s)).collect::<Vec<_>>()).unwrap();
        assert!((e1.radius - 1.0).abs() < 0.02, "{e1:?}");
        let e2 = radius_from_norms(&(1..=12).map(|s| k(2.0, s)).collect::<Vec<_>>()).unwrap();
        assert!((e2.radius - 0.5).abs() < 0.01);
        assert!(radius_from_norms(&[1.0, 0.5]).is_err());
    }

    #[test]
    fn permutation_count() {
        assert_eq!(permutations(3).len(), 6);
    }
}
