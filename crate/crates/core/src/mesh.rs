//! Boundary-fitted node sets carrying three-part fields.
//!
//! * [`FieldMesh::Polar`] — 2D star-shaped patches: interior nodes `c0 + u ρ_b(θ) e(θ)` and exterior
//!   nodes `c0 + ρ_b(θ)/v e(θ)` with Chebyshev `u, v ∈ (0,1)` and equispaced `θ`.
//! * [`FieldMesh::Ball`] — balls in any supported dimension: nodes on one reference ray only;
//!   values elsewhere follow from rotation equivariance of all fields generated by a ball.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::Arc;

use crate::field::{BundleKind, FieldBundle, Part, PiecewiseField};
use crate::geometry::Patch;
use crate::quadrature::{
    barycentric_weights_at, chebyshev_bary_weights, chebyshev_nodes, fejer_weights, gauss_legendre, lagrange_weights,
};
use crate::{norm, sub, Error, Result, Vec3};

/// Resolution of a [`FieldMesh`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshOptions {
    /// Chebyshev nodes per radial line (each side).
    pub radial: usize,
    /// Equispaced angles (polar meshes).
    pub angular: usize,
    /// Local interpolation stencil width.
    pub interp_order: usize,
    /// Directions used to expand ray-stored ball fields for norms.
    pub norm_directions: usize,
}

impl Default for MeshOptions {
    fn default() -> Self {
        Self { radial: 24, angular: 64, interp_order: 8, norm_directions: 32 }
    }
}

#[derive(Debug, Clone)]
struct Radial {
    q: Vec<f64>,
    w: Vec<f64>,
    bary: Vec<f64>,
}

impl Radial {
    fn new(m: usize) -> Self {
        Self { q: chebyshev_nodes(m), w: fejer_weights(m), bary: chebyshev_bary_weights(m) }
    }

    /// Start index and Lagrange weights of the local stencil around `x`.
    #[inline]
    fn stencil(&self, x: f64, order: usize, w: &mut [f64]) -> usize {
        let m = self.q.len();
        let ord = order.min(m);
        let k = self.q.partition_point(|&v| v <= x);
        let start = (k as isize - (ord / 2) as isize).clamp(0, (m - ord) as isize) as usize;
        lagrange_weights(&self.q[start..start + ord], x, &mut w[..ord]);
        start
    }

    fn endpoint_weights(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.q.len()];
        barycentric_weights_at(&self.q, &self.bary, 1.0, &mut w);
        w
    }
}

/// Polar node set for star-shaped plane patches.
#[derive(Debug, Clone)]
pub struct PolarMesh {
    patch: Arc<Patch>,
    c0: Vec3,
    radial: Radial,
    params: Vec<f64>,
    order: usize,
    nodes: [Vec<Vec3>; 3],
    weights: [Vec<f64>; 2],
    normals: Vec<Vec3>,
    end_w: Vec<f64>,
}

/// Ray node set for balls.
#[derive(Debug, Clone)]
pub struct BallMesh {
    patch: Arc<Patch>,
    n: usize,
    center: Vec3,
    radius: f64,
    radial: Radial,
    order: usize,
    nodes: [Vec<Vec3>; 3],
    normals: Vec<Vec3>,
    dirs: Vec<(Vec3, f64)>,
    samples: [Vec<(Vec3, f64)>; 2],
    end_w: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum FieldMesh {
    Polar(PolarMesh),
    Ball(BallMesh),
}

fn part_idx(p: Part) -> usize {
    match p {
        Part::Interior => 0,
        Part::Exterior => 1,
        Part::Boundary => 2,
    }
}

impl FieldMesh {
    /// Ball patches get a [`BallMesh`]; star-shaped plane curves a [`PolarMesh`].
    pub fn new(patch: Arc<Patch>, opts: MeshOptions) -> Result<Self> {
        if opts.radial < opts.interp_order || opts.interp_order < 2 {
            return Err(Error::InvalidInput("radial resolution must be at least the stencil width".into()));
        }
        if patch.is_ball() {
            Ok(FieldMesh::Ball(BallMesh::new(patch, opts)))
        } else {
            if opts.angular < opts.interp_order {
                return Err(Error::InvalidInput("angular resolution must be at least the stencil width".into()));
            }
            Ok(FieldMesh::Polar(PolarMesh::new(patch, opts)))
        }
    }

    pub fn patch(&self) -> &Arc<Patch> {
        match self {
            FieldMesh::Polar(m) => &m.patch,
            FieldMesh::Ball(m) => &m.patch,
        }
    }

    pub fn n(&self) -> usize {
        self.patch().n()
    }

    pub fn nodes(&self, part: Part) -> &[Vec3] {
        match self {
            FieldMesh::Polar(m) => &m.nodes[part_idx(part)],
            FieldMesh::Ball(m) => &m.nodes[part_idx(part)],
        }
    }

    pub fn sizes(&self) -> [usize; 3] {
        [self.nodes(Part::Interior).len(), self.nodes(Part::Exterior).len(), self.nodes(Part::Boundary).len()]
    }

    /// Outward normals at the boundary nodes.
    pub fn boundary_normals(&self) -> &[Vec3] {
        match self {
            FieldMesh::Polar(m) => &m.normals,
            FieldMesh::Ball(m) => &m.normals,
        }
    }

    /// Curve parameters of the boundary nodes (plane curves only).
    pub fn boundary_params(&self) -> Option<&[f64]> {
        match self {
            FieldMesh::Polar(m) => Some(&m.params),
            FieldMesh::Ball(_) => None,
        }
    }

    /// Quadrature points and weights of one side, used for norms.
    pub fn samples(&self, part: Part) -> Vec<(Vec3, f64)> {
        match self {
            FieldMesh::Polar(m) => {
                let i = part_idx(part);
                m.nodes[i].iter().copied().zip(m.weights[i].iter().copied()).collect()
            }
            FieldMesh::Ball(m) => m.samples[part_idx(part)].clone(),
        }
    }

    /// Values of bundle component `comp` at [`FieldMesh::samples`].
    pub fn sample_values(&self, bundle: &FieldBundle, comp: usize, part: Part) -> Vec<f64> {
        match self {
            FieldMesh::Polar(_) => bundle.comps[comp].part(part).to_vec(),
            FieldMesh::Ball(m) => {
                let nr = m.radial.q.len();
                let nc = bundle.comps.len();
                let mut vals = vec![0.0; nc];
                let mut out = Vec::with_capacity(nr * m.dirs.len());
                for ir in 0..nr {
                    for (dir, _) in &m.dirs {
                        for (c, f) in bundle.comps.iter().enumerate() {
                            vals[c] = f.part(part)[ir];
                        }
                        let q = m.rotation_to(dir);
                        FieldBundle::rotate(bundle.kind, m.n, &q, &mut vals);
                        out.push(vals[comp]);
                    }
                }
                out
            }
        }
    }

    /// One-sided limits `(interior, exterior)` at boundary node `k` by extrapolation along the radial line.
    pub fn one_sided(&self, bundle: &FieldBundle, comp: usize, k: usize) -> (f64, f64) {
        let f = &bundle.comps[comp];
        match self {
            FieldMesh::Polar(m) => {
                let nt = m.params.len();
                let mut a = 0.0;
                let mut b = 0.0;
                for (i, w) in m.end_w.iter().enumerate() {
                    a += w * f.interior[i * nt + k];
                    b += w * f.exterior[i * nt + k];
                }
                (a, b)
            }
            FieldMesh::Ball(m) => {
                let a = m.end_w.iter().zip(&f.interior).map(|(w, v)| w * v).sum();
                let b = m.end_w.iter().zip(&f.exterior).map(|(w, v)| w * v).sum();
                (a, b)
            }
        }
    }

    /// Evaluate several bundles at `p` using the `part` extension; values are appended in bundle order.
    pub fn interpolate(&self, bundles: &[&FieldBundle], part: Part, p: &Vec3, out: &mut [f64]) {
        match self {
            FieldMesh::Polar(m) => m.interpolate(bundles, part, p, out),
            FieldMesh::Ball(m) => m.interpolate(bundles, part, p, out),
        }
    }
}

impl PolarMesh {
    fn new(patch: Arc<Patch>, opts: MeshOptions) -> Self {
        let c0 = patch.star_center();
        let radial = Radial::new(opts.radial);
        let nt = opts.angular;
        let curve = patch.curve().expect("plane curve patch").clone();
        let params: Vec<f64> = (0..nt).map(|j| 2.0 * PI * j as f64 / nt as f64).collect();
        let mut bnd = Vec::with_capacity(nt);
        let mut normals = Vec::with_capacity(nt);
        let mut jac = Vec::with_capacity(nt);
        for &t in &params {
            let (p, d1, _) = curve.eval(t);
            let sp = d1[0].hypot(d1[1]);
            normals.push([d1[1] / sp, -d1[0] / sp, 0.0]);
            jac.push((p[0] - c0[0]) * d1[1] - (p[1] - c0[1]) * d1[0]);
            bnd.push([p[0], p[1], 0.0]);
        }
        let nr = radial.q.len();
        let mut int = Vec::with_capacity(nr * nt);
        let mut ext = Vec::with_capacity(nr * nt);
        let mut wi = Vec::with_capacity(nr * nt);
        let mut we = Vec::with_capacity(nr * nt);
        let dt = 2.0 * PI / nt as f64;
        for i in 0..nr {
            let q = radial.q[i];
            for j in 0..nt {
                let (dx, dy) = (bnd[j][0] - c0[0], bnd[j][1] - c0[1]);
                int.push([c0[0] + q * dx, c0[1] + q * dy, 0.0]);
                ext.push([c0[0] + dx / q, c0[1] + dy / q, 0.0]);
                wi.push(radial.w[i] * dt * jac[j] * q);
                we.push(radial.w[i] * dt * jac[j] / (q * q * q));
            }
        }
        let end_w = radial.endpoint_weights();
        Self { patch, c0, radial, params, order: opts.interp_order, nodes: [int, ext, bnd], weights: [wi, we], normals, end_w }
    }

    fn interpolate(&self, bundles: &[&FieldBundle], part: Part, p: &Vec3, out: &mut [f64]) {
        let dx = p[0] - self.c0[0];
        let dy = p[1] - self.c0[1];
        let r = dx.hypot(dy);
        let th = dy.atan2(dx);
        let rb = self.patch.rho_b(th);
        let t = self.patch.param_fast(th);
        let q = if part == Part::Exterior { rb / r.max(1e-300) } else { r / rb };
        let ord = self.order;
        let mut wr = [0.0; 16];
        let mut wt = [0.0; 16];
        let i0 = self.radial.stencil(q, ord, &mut wr);
        let nt = self.params.len();
        let h = 2.0 * PI / nt as f64;
        let x = t.rem_euclid(2.0 * PI) / h;
        let k = x.floor() as isize;
        let j0 = k - (ord as isize / 2 - 1);
        let mut loc = [0.0; 16];
        for a in 0..ord {
            loc[a] = (j0 + a as isize) as f64;
        }
        lagrange_weights(&loc[..ord], x, &mut wt[..ord]);
        let mut cols = [0usize; 16];
        for c in 0..ord {
            cols[c] = (j0 + c as isize).rem_euclid(nt as isize) as usize;
        }
        let ext = part == Part::Exterior;
        let mut o = 0;
        for b in bundles {
            for f in &b.comps {
                let vals = if ext { &f.exterior } else { &f.interior };
                let mut acc = 0.0;
                for a in 0..ord {
                    let row = &vals[(i0 + a) * nt..(i0 + a + 1) * nt];
                    let mut s = 0.0;
                    for c in 0..ord {
                        s += wt[c] * row[cols[c]];
                    }
                    acc += wr[a] * s;
                }
                out[o] = acc;
                o += 1;
            }
        }
    }
}

impl BallMesh {
    fn new(patch: Arc<Patch>, opts: MeshOptions) -> Self {
        let (center, radius) = patch.ball().expect("ball patch");
        let n = patch.n();
        let radial = Radial::new(opts.radial);
        let e1 = [1.0, 0.0, 0.0];
        let at = |r: f64| [center[0] + r, center[1], center[2]];
        let int: Vec<Vec3> = radial.q.iter().map(|&u| at(u * radius)).collect();
        let ext: Vec<Vec3> = radial.q.iter().map(|&v| at(radius / v)).collect();
        let bnd = vec![at(radius)];
        let nd = opts.norm_directions.max(4);
        let dirs: Vec<(Vec3, f64)> = if n == 2 {
            (0..nd)
                .map(|k| {
                    let a = 2.0 * PI * k as f64 / nd as f64;
                    ([a.cos(), a.sin(), 0.0], 2.0 * PI / nd as f64)
                })
                .collect()
        } else {
            let nz = (nd / 4).max(4);
            let naz = nd / 2;
            let gl = gauss_legendre(nz);
            let mut d = Vec::new();
            for &(z, wz) in gl.iter() {
                let s = (1.0 - z * z).sqrt();
                for k in 0..naz {
                    let b = 2.0 * PI * k as f64 / naz as f64;
                    d.push(([z, s * b.cos(), s * b.sin()], wz * 2.0 * PI / naz as f64));
                }
            }
            d
        };
        let nf = n as i32;
        let mut si = Vec::new();
        let mut se = Vec::new();
        for (k, &q) in radial.q.iter().enumerate() {
            for (dir, dw) in &dirs {
                let ri = q * radius;
                si.push((crate::axpy(&center, ri, dir), radial.w[k] * dw * radius.powi(nf) * q.powi(nf - 1)));
                let re = radius / q;
                se.push((crate::axpy(&center, re, dir), radial.w[k] * dw * radius.powi(nf) * q.powi(-nf - 1)));
            }
        }
        let end_w = radial.endpoint_weights();
        Self {
            patch,
            n,
            center,
            radius,
            radial,
            order: opts.interp_order,
            nodes: [int, ext, bnd],
            normals: vec![e1],
            dirs,
            samples: [si, se],
            end_w,
        }
    }

    /// Rotation taking `e1` to the unit vector `d` (identity on the complement in 2D).
    fn rotation_to(&self, d: &Vec3) -> [[f64; 3]; 3] {
        if self.n == 2 {
            return [[d[0], -d[1], 0.0], [d[1], d[0], 0.0], [0.0, 0.0, 1.0]];
        }
        let c = d[0];
        // axis k = e1 × d = (0, -d2, d1)
        let (ky, kz) = (-d[2], d[1]);
        let s = (ky * ky + kz * kz).sqrt();
        if s < 1e-14 {
            return if c > 0.0 {
                [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]
            } else {
                [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, 1.0]]
            };
        }
        let k = [0.0, ky / s, kz / s];
        let v = 1.0 - c;
        let mut q = [[0.0; 3]; 3];
        for a in 0..3 {
            for b in 0..3 {
                q[a][b] = k[a] * k[b] * v + if a == b { c } else { 0.0 };
            }
        }
        // + sin · [k]_x
        q[0][1] -= s * k[2];
        q[0][2] += s * k[1];
        q[1][0] += s * k[2];
        q[1][2] -= s * k[0];
        q[2][0] -= s * k[1];
        q[2][1] += s * k[0];
        q
    }

    fn interpolate(&self, bundles: &[&FieldBundle], part: Part, p: &Vec3, out: &mut [f64]) {
        let d = sub(p, &self.center);
        let r = norm(&d);
        let q = if part == Part::Exterior { self.radius / r.max(1e-300) } else { r / self.radius };
        let mut wr = [0.0; 16];
        let ord = self.order;
        let i0 = self.radial.stencil(q, ord, &mut wr);
        let dir = if r > 0.0 { [d[0] / r, d[1] / r, d[2] / r] } else { [1.0, 0.0, 0.0] };
        let rot = self.rotation_to(&dir);
        let mut o = 0;
        for b in bundles {
            let start = o;
            for f in &b.comps {
                let vals = if part == Part::Exterior { &f.exterior } else { &f.interior };
                out[o] = (0..ord).map(|a| wr[a] * vals[i0 + a]).sum();
                o += 1;
            }
            FieldBundle::rotate(b.kind, self.n, &rot, &mut out[start..o]);
        }
        let _ = BundleKind::Scalar;
    }
}

/// Several bundles on one mesh, viewed as a point-evaluable piecewise field.
pub struct MeshField<'a> {
    pub mesh: &'a FieldMesh,
    pub bundles: Vec<&'a FieldBundle>,
}

impl PiecewiseField for MeshField<'_> {
    fn n_comp(&self) -> usize {
        self.bundles.iter().map(|b| b.comps.len()).sum()
    }
    fn eval(&self, part: Part, p: &Vec3, out: &mut [f64]) {
        self.mesh.interpolate(&self.bundles, part, p, out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::PatchSpec;

    fn fill(mesh: &FieldMesh, kind: BundleKind, f: impl Fn(&Vec3) -> Vec<f64>) -> FieldBundle {
        let n = mesh.n();
        let mut b = FieldBundle::zeros(kind, n, mesh.sizes(), 0.5);
        for part in [Part::Interior, Part::Exterior, Part::Boundary] {
            for (k, p) in mesh.nodes(part).iter().enumerate() {
                let v = f(p);
                for c in 0..v.len() {
                    b.comps[c].part_mut(part)[k] = v[c];
                }
            }
        }
        b
    }

    #[test]
    fn polar_interpolation_of_smooth_fields() {
        let patch = Arc::new(Patch::new(PatchSpec::ellipse(2.0, 1.0, 1.0)).unwrap());
        let mesh = FieldMesh::new(patch.clone(), MeshOptions::default()).unwrap();
        let g = |p: &Vec3| vec![(0.3 * p[0]).sin() + p[1] * p[1], p[0] * p[1]];
        let b = fill(&mesh, BundleKind::Vector, g);
        let mut out = [0.0; 2];
        for p in [[0.3, 0.2, 0.0], [1.7, -0.3, 0.0], [-0.1, 0.95, 0.0]] {
            mesh.interpolate(&[&b], Part::Interior, &p, &mut out);
            let e = g(&p);
            assert!((out[0] - e[0]).abs() < 1e-6 && (out[1] - e[1]).abs() < 1e-6, "{out:?} {e:?}");
        }
        let h = |p: &Vec3| {
            let r2 = p[0] * p[0] + p[1] * p[1];
            vec![p[0] / r2, p[1] * p[0] / (r2 * r2)]
        };
        let b = fill(&mesh, BundleKind::Vector, h);
        for p in [[2.5, 0.2, 0.0], [0.0, 3.0, 0.0], [-4.0, -1.0, 0.0]] {
            mesh.interpolate(&[&b], Part::Exterior, &p, &mut out);
            let e = h(&p);
            assert!((out[0] - e[0]).abs() < 1e-5 && (out[1] - e[1]).abs() < 1e-5, "{out:?} {e:?}");
        }
        // one-sided limit of an interior-only smooth field
        let b = fill(&mesh, BundleKind::Vector, g);
        for k in [0, 7, 33] {
            let (a, _) = mesh.one_sided(&b, 0, k);
            let e = g(&mesh.nodes(Part::Boundary)[k])[0];
            assert!((a - e).abs() < 1e-9);
        }
        let area: f64 = mesh.samples(Part::Interior).iter().map(|s| s.1).sum();
        assert!((area - 2.0 * PI).abs() < 1e-8, "{area}");
    }

    #[test]
    fn ball_mesh_rotation_equivariance() {
        for n in [2usize, 3] {
            let patch = Arc::new(Patch::new(PatchSpec::ball(n, 1.0, 1.0)).unwrap());
            let mesh = FieldMesh::new(patch, MeshOptions::default()).unwrap();
            // equivariant field: M(x) = x x^T
            let b = fill(&mesh, BundleKind::Matrix, |p| {
                let mut m = vec![0.0; n * n];
                for a in 0..n {
                    for c in 0..n {
                        m[a * n + c] = p[a] * p[c];
                    }
                }
                m
            });
            let p = if n == 2 { [0.3, -0.4, 0.0] } else { [0.3, -0.4, 0.2] };
            let mut out = vec![0.0; n * n];
            mesh.interpolate(&[&b], Part::Interior, &p, &mut out);
            for a in 0..n {
                for c in 0..n {
                    assert!((out[a * n + c] - p[a] * p[c]).abs() < 1e-12);
                }
            }
            let vol: f64 = mesh.samples(Part::Interior).iter().map(|s| s.1).sum();
            assert!((vol - crate::kernels::ball_volume(n)).abs() < 1e-10, "{vol}");
        }
    }
}
