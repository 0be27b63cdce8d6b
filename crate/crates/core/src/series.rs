//! Time-Taylor coefficients `ξ^(s)` of the flow map `ψ(x,t) = x + Σ ξ^(s)(x) t^s`.
//!
//! Every order is reconstructed from two source families computed from lower orders:
//! the Lagrangian curl `Υ_{l,j} = ∂_l ξ_j − ∂_j ξ_l` (from the symmetry of `∇v`) and the
//! divergence `Ξ = div ξ` (from `det ∇ψ = 1 − t ρ0`). Then
//! `ξ_j = K_j[Ξ] + Σ_{l≠j} K_l[Υ_{l,j}]` and `∂_i ξ_j = ∂_i K_j[Ξ] + Σ_{l≠j} ∂_i K_l[Υ_{l,j}]`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

use crate::field::{antisym_index, BundleKind, FieldBundle, Part, PartConstant, PiecewiseField};
use crate::geometry::{Patch, PatchSpec};
use crate::majorant::{self, field_norm, MajorantLedger, NormOptions, RadiusEstimate};
use crate::mesh::{FieldMesh, MeshField, MeshOptions};
use crate::singular::{Evaluator, QuadConfig, SweepOutput, Target, TargetKind};
use crate::{to_vec3, Error, Result, Vec3};

/// Engine settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesConfig {
    /// Truncation order `S`.
    pub order: usize,
    pub mesh: MeshOptions,
    pub quad: QuadConfig,
    pub norms: NormOptions,
    /// Sign of the velocity assembly; `-1` is the physical (contracting) choice.
    pub kernel_sign: f64,
    /// Compute the majorant ledger and certified radius after the levels.
    pub certify: bool,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            order: 12,
            mesh: MeshOptions::default(),
            quad: QuadConfig::sweep(),
            norms: NormOptions::default(),
            kernel_sign: -1.0,
            certify: true,
        }
    }
}

/// Operator-norm sample: `‖χ T_{l,i}[source]‖` on each side against the norms of the source.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermNorm {
    pub l: usize,
    pub i: usize,
    pub out_int: f64,
    pub out_ext: f64,
    pub src_int: f64,
    pub src_ext: f64,
}

/// All derivative fields `∂_i ξ_j^(s)` (matrix bundle, component `j n + i`) and `ξ_j^(s)` of one order.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CoefficientLevel {
    pub s: usize,
    pub dxi: FieldBundle,
    pub xi: FieldBundle,
    /// Per-term operator samples recorded while this level was computed.
    pub term_norms: Vec<TermNorm>,
}

/// Computes coefficient levels on a fixed mesh.
pub struct SeriesEngine {
    patch: Arc<Patch>,
    mesh: Arc<FieldMesh>,
    cfg: SeriesConfig,
    targets: [Vec<Target>; 3],
}

/// Result of a full run.
#[derive(Clone)]
pub struct SeriesSolution {
    pub spec: PatchSpec,
    pub levels: Vec<CoefficientLevel>,
    pub order: usize,
    pub tau_certified: Option<f64>,
    pub tau_empirical: Option<f64>,
    pub empirical: Option<RadiusEstimate>,
    pub ledger: Option<MajorantLedger>,
    mesh: Arc<FieldMesh>,
}

/// Serializable snapshot of a [`SeriesSolution`] including node coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeriesExport {
    pub spec: PatchSpec,
    pub order: usize,
    pub tau_certified: Option<f64>,
    pub tau_empirical: Option<f64>,
    pub empirical: Option<RadiusEstimate>,
    pub nodes_interior: Vec<Vec<f64>>,
    pub nodes_exterior: Vec<Vec<f64>>,
    pub nodes_boundary: Vec<Vec<f64>>,
    pub levels: Vec<CoefficientLevel>,
    pub sup_norms: Vec<f64>,
}

fn parts() -> [Part; 2] {
    [Part::Interior, Part::Exterior]
}

/// Weak compositions of `total` into `k` parts with every part `≤ max`.
pub fn compositions(total: usize, k: usize, max: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0; k];
    fn rec(pos: usize, left: usize, max: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        let k = cur.len();
        if pos == k - 1 {
            if left <= max {
                cur[pos] = left;
                out.push(cur.clone());
            }
            return;
        }
        for v in 0..=left.min(max) {
            cur[pos] = v;
            rec(pos + 1, left - v, max, cur, out);
        }
    }
    if k > 0 {
        rec(0, total, max, &mut cur, &mut out);
    }
    out
}

fn det(n: usize, m: &[[f64; 3]; 3]) -> f64 {
    if n == 2 {
        m[0][0] * m[1][1] - m[0][1] * m[1][0]
    } else {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }
}

impl SeriesEngine {
    pub fn new(spec: PatchSpec, cfg: SeriesConfig) -> Result<Self> {
        let patch = Arc::new(Patch::new(spec)?);
        Self::with_patch(patch, cfg)
    }

    pub fn with_patch(patch: Arc<Patch>, cfg: SeriesConfig) -> Result<Self> {
        if cfg.order == 0 || cfg.order > 40 {
            return Err(Error::InvalidInput("truncation order must be in 1..=40".into()));
        }
        let mesh = Arc::new(FieldMesh::new(patch.clone(), cfg.mesh)?);
        let mk = |part: Part| -> Vec<Target> {
            let nodes = mesh.nodes(part);
            if part == Part::Boundary {
                nodes.iter().zip(mesh.boundary_normals()).map(|(x, nv)| Target::boundary_with_normal(*x, *nv)).collect()
            } else {
                nodes
                    .iter()
                    .map(|x| {
                        let (foot, d) = patch.nearest_boundary(x);
                        let v = crate::sub(&foot, x);
                        let dn = crate::norm(&v);
                        let kind = if part == Part::Interior { TargetKind::Interior } else { TargetKind::Exterior };
                        Target { x: *x, kind, d, dir: [v[0] / dn, v[1] / dn, v[2] / dn] }
                    })
                    .collect()
            }
        };
        let targets = [mk(Part::Interior), mk(Part::Exterior), mk(Part::Boundary)];
        Ok(Self { patch, mesh, cfg, targets })
    }

    pub fn patch(&self) -> &Arc<Patch> {
        &self.patch
    }
    pub fn mesh(&self) -> &Arc<FieldMesh> {
        &self.mesh
    }
    pub fn config(&self) -> &SeriesConfig {
        &self.cfg
    }

    fn n(&self) -> usize {
        self.patch.n()
    }

    fn gamma(&self) -> f64 {
        self.patch.gamma()
    }

    /// Evaluate all components of `field` at every node.
    pub(crate) fn sweep(&self, field: &dyn PiecewiseField) -> Result<[Vec<SweepOutput>; 3]> {
        let ev = Evaluator::new(&self.patch, self.cfg.quad);
        let run = |ts: &Vec<Target>| -> Result<Vec<SweepOutput>> { ts.par_iter().map(|t| ev.evaluate(field, t)).collect() };
        Ok([run(&self.targets[0])?, run(&self.targets[1])?, run(&self.targets[2])?])
    }

    fn norm(&self, b: &FieldBundle, comp: usize, part: Part) -> f64 {
        field_norm(&self.mesh, b, comp, part, &self.cfg.norms)
    }

    /// Build a level from sweep outputs; `ups` is the number of leading antisymmetric source components,
    /// followed by the divergence source.
    fn assemble(&self, s: usize, outs: &[Vec<SweepOutput>; 3], sources: &[&FieldBundle]) -> CoefficientLevel {
        let n = self.n();
        let sizes = self.mesh.sizes();
        let na = if s == 1 { 0 } else { n * (n - 1) / 2 };
        let cx = na;
        let mut dxi = FieldBundle::zeros(BundleKind::Matrix, n, sizes, self.gamma());
        let mut xi = FieldBundle::zeros(BundleKind::Vector, n, sizes, self.gamma());
        let ups = |l: usize, j: usize| -> (usize, f64) {
            if l < j {
                (antisym_index(n, l, j), 1.0)
            } else {
                (antisym_index(n, j, l), -1.0)
            }
        };
        for (pi, part) in [Part::Interior, Part::Exterior, Part::Boundary].into_iter().enumerate() {
            for (k, o) in outs[pi].iter().enumerate() {
                for j in 0..n {
                    let mut xv = o.newton(cx, j);
                    for i in 0..n {
                        let mut v = o.riesz(cx, j, i);
                        if na > 0 {
                            for l in (0..n).filter(|&l| l != j) {
                                let (c, sg) = ups(l, j);
                                v += sg * o.riesz(c, l, i);
                            }
                        }
                        dxi.comps[j * n + i].part_mut(part)[k] = v;
                    }
                    if na > 0 {
                        for l in (0..n).filter(|&l| l != j) {
                            let (c, sg) = ups(l, j);
                            xv += sg * o.newton(c, l);
                        }
                    }
                    xi.comps[j].part_mut(part)[k] = xv;
                }
            }
        }
        let term_norms = self.term_norms(outs, sources);
        CoefficientLevel { s, dxi, xi, term_norms }
    }

    /// `‖T_{l,i}[source]‖` on each side for every source component carried by a sweep.
    pub(crate) fn term_norms(&self, outs: &[Vec<SweepOutput>; 3], sources: &[&FieldBundle]) -> Vec<TermNorm> {
        let n = self.n();
        let sizes = self.mesh.sizes();
        let mut term_norms = Vec::new();
        let src_comps: Vec<(usize, &FieldBundle, usize)> = {
            let mut v = Vec::new();
            let mut c = 0;
            for b in sources {
                for k in 0..b.comps.len() {
                    v.push((c, *b, k));
                    c += 1;
                }
            }
            v
        };
        for (c, b, k) in src_comps {
            let si = self.norm(b, k, Part::Interior);
            let se = self.norm(b, k, Part::Exterior);
            if si + se == 0.0 {
                continue;
            }
            let mut tb = FieldBundle::zeros(BundleKind::Matrix, n, sizes, self.gamma());
            for (pi, part) in parts().into_iter().enumerate() {
                for (idx, o) in outs[pi].iter().enumerate() {
                    for l in 0..n {
                        for i in 0..n {
                            tb.comps[l * n + i].part_mut(part)[idx] = o.riesz(c, l, i);
                        }
                    }
                }
            }
            for l in 0..n {
                for i in 0..n {
                    term_norms.push(TermNorm {
                        l,
                        i,
                        out_int: self.norm(&tb, l * n + i, Part::Interior),
                        out_ext: self.norm(&tb, l * n + i, Part::Exterior),
                        src_int: si,
                        src_ext: se,
                    });
                }
            }
        }
        term_norms
    }

    /// Order one: `ξ^(1) = sign · K[ρ0]`, `∂_i ξ_j^(1) = sign · ∂_i K_j[ρ0]`.
    pub fn level_one(&self) -> Result<CoefficientLevel> {
        let c = self.patch.c();
        let src = PartConstant::indicator(self.cfg.kernel_sign * c);
        let outs = self.sweep(&src)?;
        let mut sb = FieldBundle::zeros(BundleKind::Scalar, self.n(), self.mesh.sizes(), self.gamma());
        sb.comps[0].interior.iter_mut().for_each(|v| *v = self.cfg.kernel_sign * c);
        sb.comps[0].boundary.iter_mut().for_each(|v| *v = 0.5 * self.cfg.kernel_sign * c);
        Ok(self.assemble(1, &outs, &[&sb]))
    }

    fn check_levels(levels: &[CoefficientLevel]) -> Result<usize> {
        for (k, l) in levels.iter().enumerate() {
            if l.s != k + 1 {
                return Err(Error::MissingLevel(k + 1));
            }
        }
        if levels.is_empty() {
            return Err(Error::MissingLevel(1));
        }
        Ok(levels.len())
    }

    pub(crate) fn finish_boundary(&self, b: &mut FieldBundle) {
        for k in 0..b.comps.len() {
            for node in 0..b.comps[k].boundary.len() {
                let (a, e) = self.mesh.one_sided(b, k, node);
                b.comps[k].boundary[node] = 0.5 * (a + e);
            }
        }
    }

    /// Antisymmetric curl sources `Υ^(s+1)_{l,j}`, `l < j`, for `s = levels.len()`.
    pub fn upsilon_sources(&self, levels: &[CoefficientLevel]) -> Result<FieldBundle> {
        let s = Self::check_levels(levels)?;
        let n = self.n();
        let mut out = FieldBundle::zeros(BundleKind::Antisym, n, self.mesh.sizes(), self.gamma());
        let a = |q: usize, r: usize, l: usize, part: Part, k: usize| levels[q - 1].dxi.comps[r * n + l].part(part)[k];
        for part in parts() {
            let len = self.mesh.nodes(part).len();
            for l in 0..n {
                for j in (l + 1)..n {
                    let idx = antisym_index(n, l, j);
                    for k in 0..len {
                        let mut acc = 0.0;
                        for p in 0..s {
                            let w = (p + 1) as f64;
                            for r in 0..n {
                                acc += w
                                    * (a(p + 1, r, l, part, k) * a(s - p, r, j, part, k)
                                        - a(p + 1, r, j, part, k) * a(s - p, r, l, part, k));
                            }
                        }
                        out.comps[idx].part_mut(part)[k] = -acc / (s + 1) as f64;
                    }
                }
            }
        }
        self.finish_boundary(&mut out);
        Ok(out)
    }

    /// Divergence source `Ξ^(s+1) = −Σ det[row_l = ∇ξ_l^(q_l)]` over compositions `q` of `s+1` with all `q_l ≤ s`
    /// (order-zero rows are `e_l`).
    pub fn xi_sources(&self, levels: &[CoefficientLevel]) -> Result<FieldBundle> {
        let s = Self::check_levels(levels)?;
        let n = self.n();
        let comps = compositions(s + 1, n, s);
        let mut out = FieldBundle::zeros(BundleKind::Scalar, n, self.mesh.sizes(), self.gamma());
        for part in parts() {
            let len = self.mesh.nodes(part).len();
            for k in 0..len {
                let mut acc = 0.0;
                for q in &comps {
                    let mut m = [[0.0; 3]; 3];
                    for l in 0..n {
                        for i in 0..n {
                            m[l][i] = if q[l] == 0 {
                                if l == i { 1.0 } else { 0.0 }
                            } else {
                                levels[q[l] - 1].dxi.comps[l * n + i].part(part)[k]
                            };
                        }
                    }
                    acc += det(n, &m);
                }
                out.comps[0].part_mut(part)[k] = -acc;
            }
        }
        self.finish_boundary(&mut out);
        Ok(out)
    }

    /// Order `s + 1` from orders `1..=s`.
    pub fn next_level(&self, levels: &[CoefficientLevel]) -> Result<CoefficientLevel> {
        let s = Self::check_levels(levels)?;
        let ups = self.upsilon_sources(levels)?;
        let xs = self.xi_sources(levels)?;
        let field = MeshField { mesh: &self.mesh, bundles: vec![&ups, &xs] };
        let outs = self.sweep(&field)?;
        Ok(self.assemble(s + 1, &outs, &[&ups, &xs]))
    }

    /// Levels `1..=S`, empirical radius, and (optionally) the majorant ledger.
    pub fn solve(&self) -> Result<SeriesSolution> {
        let mut levels = vec![self.level_one()?];
        while levels.len() < self.cfg.order {
            let next = self.next_level(&levels)?;
            levels.push(next);
        }
        let mut sol = SeriesSolution {
            spec: self.patch.spec().clone(),
            levels,
            order: self.cfg.order,
            tau_certified: None,
            tau_empirical: None,
            empirical: None,
            ledger: None,
            mesh: self.mesh.clone(),
        };
        if let Ok(est) = majorant::empirical_radius(&sol) {
            sol.tau_empirical = Some(est.radius);
            sol.empirical = Some(est);
        }
        if self.cfg.certify && sol.levels.len() >= 2 {
            let ledger = majorant::build_ledger(self, &sol.levels)?;
            sol.tau_certified = Some(ledger.tau0);
            sol.ledger = Some(ledger);
        }
        Ok(sol)
    }
}

impl SeriesSolution {
    pub fn mesh(&self) -> &Arc<FieldMesh> {
        &self.mesh
    }

    /// Copy keeping only the first `order` levels; radius estimates are kept as computed.
    pub fn truncated(&self, order: usize) -> Self {
        let mut s = self.clone();
        s.levels.truncate(order);
        s.order = s.levels.len();
        s
    }

    /// Sup norm of all derivative fields of order `s` (all parts).
    pub fn sup_norm(&self, s: usize) -> f64 {
        self.levels[s - 1].dxi.comps.iter().map(|c| c.sup()).fold(0.0, f64::max)
    }

    /// `ξ^(s)` and `∇ξ^(s)` at `x`, using the side `x` lies on (boundary points use the interior trace).
    pub fn coefficient_at(&self, s: usize, x: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.mesh.n();
        let lvl = self.levels.get(s.wrapping_sub(1)).ok_or(Error::MissingLevel(s))?;
        let p = to_vec3(x);
        let part = if self.mesh.patch().signed_level(&p) <= self.mesh.patch().eps_b() { Part::Interior } else { Part::Exterior };
        let mut out = vec![0.0; n + n * n];
        self.mesh.interpolate(&[&lvl.xi, &lvl.dxi], part, &p, &mut out);
        Ok((out[..n].to_vec(), out[n..].to_vec()))
    }

    /// Truncated flow `ψ(x,t)` and Jacobian `∇ψ(x,t)` (row `j` = gradient of `ψ_j`).
    pub fn assemble_flow(&self, x: &[f64], t: f64) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
        let n = self.mesh.n();
        if x.len() != n || x.iter().any(|v| !v.is_finite()) || !t.is_finite() {
            return Err(Error::InvalidInput("assemble_flow: bad point or time".into()));
        }
        if let Some(r) = self.tau_empirical {
            if t.abs() >= r {
                return Err(Error::OutsideRadius { t, radius: r });
            }
        }
        let mut psi = x.to_vec();
        let mut jac: Vec<Vec<f64>> = (0..n).map(|j| (0..n).map(|i| if i == j { 1.0 } else { 0.0 }).collect()).collect();
        if t == 0.0 {
            return Ok((psi, jac));
        }
        let p = to_vec3(x);
        let part = if self.mesh.patch().signed_level(&p) <= self.mesh.patch().eps_b() { Part::Interior } else { Part::Exterior };
        let bundles: Vec<&FieldBundle> = self.levels.iter().flat_map(|l| [&l.xi, &l.dxi]).collect();
        let mut out = vec![0.0; self.levels.len() * (n + n * n)];
        self.mesh.interpolate(&bundles, part, &p, &mut out);
        let mut tp = 1.0;
        for (s, chunk) in out.chunks(n + n * n).enumerate() {
            let _ = s;
            tp *= t;
            for j in 0..n {
                psi[j] += tp * chunk[j];
                for i in 0..n {
                    jac[j][i] += tp * chunk[n + j * n + i];
                }
            }
        }
        Ok((psi, jac))
    }

    /// Images of the boundary nodes at time `t`, using continuous Newton-type potentials for `ξ`.
    pub fn boundary_image(&self, t: f64) -> Vec<Vec3> {
        let n = self.mesh.n();
        let nodes = self.mesh.nodes(Part::Boundary);
        nodes
            .iter()
            .enumerate()
            .map(|(k, x)| {
                let mut p = *x;
                let mut tp = 1.0;
                for l in &self.levels {
                    tp *= t;
                    for j in 0..n {
                        p[j] += tp * l.xi.comps[j].boundary[k];
                    }
                }
                p
            })
            .collect()
    }

    pub fn export(&self) -> SeriesExport {
        let n = self.mesh.n();
        let pts = |part: Part| self.mesh.nodes(part).iter().map(|p| p[..n].to_vec()).collect();
        SeriesExport {
            spec: self.spec.clone(),
            order: self.order,
            tau_certified: self.tau_certified,
            tau_empirical: self.tau_empirical,
            empirical: self.empirical.clone(),
            nodes_interior: pts(Part::Interior),
            nodes_exterior: pts(Part::Exterior),
            nodes_boundary: pts(Part::Boundary),
            levels: self.levels.clone(),
            sup_norms: (1..=self.levels.len()).map(|s| self.sup_norm(s)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::exact_ball_coeff;

    #[test]
    fn composition_counts() {
        assert_eq!(compositions(2, 2, 1), vec![vec![1, 1]]);
        assert_eq!(compositions(3, 2, 2).len(), 2);
        assert_eq!(compositions(4, 3, 4).len(), 15);
    }

    fn ball_engine(n: usize, c: f64, order: usize) -> SeriesEngine {
        let cfg = SeriesConfig { order, certify: false, ..Default::default() };
        SeriesEngine::new(PatchSpec::ball(n, 1.0, c), cfg).unwrap()
    }

    #[test]
    fn ball_coefficients_2d() {
        let e = ball_engine(2, 1.0, 4);
        let l1 = e.level_one().unwrap();
        let x = e.mesh().nodes(Part::Interior)[10];
        assert!((l1.xi.comps[0].interior[10] + 0.5 * x[0]).abs() < 1e-9);
        assert!((l1.dxi.comps[0].interior[10] + 0.5).abs() < 1e-9);
        assert!(l1.dxi.comps[1].interior[10].abs() < 1e-9);
        assert!(l1.dxi.comps[0].boundary[0].abs() < 1e-6);
        let ups = e.upsilon_sources(&[l1.clone()]).unwrap();
        assert!(ups.comps[0].sup() < 1e-12);
        let mut lv = vec![l1];
        for s in 2..=4 {
            let next = e.next_level(&lv).unwrap();
            lv.push(next);
            let k = exact_ball_coeff(2, 1.0, s);
            for (idx, x) in e.mesh().nodes(Part::Interior).iter().enumerate() {
                let v = lv[s - 1].xi.comps[0].interior[idx];
                assert!((v - k * x[0]).abs() < 1e-5, "s={s}: {v} vs {}", k * x[0]);
                let d = lv[s - 1].dxi.comps[0].interior[idx];
                assert!((d - k).abs() < 1e-5, "s={s} idx={idx} x={x:?}: {d} vs {k}");
            }
        }
    }

    #[test]
    fn ball_coefficients_3d() {
        let e = ball_engine(3, 1.0, 3);
        let sol = e.solve().unwrap();
        for s in 1..=3 {
            let k = exact_ball_coeff(3, 1.0, s);
            let v = sol.levels[s - 1].dxi.comps[0].interior[5];
            assert!((v - k).abs() < 1e-5 * k.abs().max(1e-3), "s={s}: {v} vs {k}");
        }
    }
}
