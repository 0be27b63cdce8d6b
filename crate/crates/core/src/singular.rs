//! Principal-value Riesz transforms and Newtonian gradients of piecewise fields.
//!
//! Integrals are taken in polar coordinates about the target. Each ray is cut at its boundary
//! crossings and at `δ(x) = max{d(x), R0/2}`: inside `B_δ(x)` the integrand `(f(ζ) − f(x)) R(ζ − x)`
//! is weakly singular (local part `L`), outside it is regular (far part `Q`). At boundary targets the
//! subtraction uses the one-sided value of the side the ray travels in, and the geometric lens term
//! `Θ` accounts for the deviation of the boundary from its tangent plane.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::field::{Part, PiecewiseField};
use crate::geometry::Patch;
use crate::kernels::KernelConvention;
use crate::quadrature::{adaptive_gk15, gauss_legendre, gauss_legendre_unit, AdaptiveOptions};
use crate::{axpy, dot, norm, sub, to_vec3, Error, Result, Vec3};

/// Quadrature resolution of the polar sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadConfig {
    /// Gauss–Legendre nodes on the ray piece starting at the target.
    pub first_nodes: usize,
    /// Nodes per finite ray piece (logarithmic variable).
    pub piece_nodes: usize,
    /// Nodes on the unbounded tail (inverse variable).
    pub tail_nodes: usize,
    /// Absolute tolerance of the adaptive angular rule.
    pub angular_tol: f64,
    pub angular_rel_tol: f64,
    pub max_angular_panels: usize,
    /// Minimum number of initial angular panels.
    pub initial_panels: usize,
    /// Azimuthal trapezoid nodes (3D only).
    pub azimuth_nodes: usize,
    /// Nodes per direction for the lens term.
    pub theta_nodes: usize,
}

impl QuadConfig {
    /// Looser angular tolerance used for whole-mesh sweeps of the coefficient recurrence.
    pub fn sweep() -> Self {
        Self { angular_tol: 1e-7, angular_rel_tol: 1e-7, ..Self::default() }
    }
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            first_nodes: 16,
            piece_nodes: 16,
            tail_nodes: 12,
            angular_tol: 1e-9,
            angular_rel_tol: 1e-9,
            max_angular_panels: 96,
            initial_panels: 8,
            azimuth_nodes: 16,
            theta_nodes: 48,
        }
    }
}

/// Where the target sits relative to the patch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TargetKind {
    Interior,
    Exterior,
    Boundary,
}

/// An evaluation point with its classification; `dir` is the outward normal for boundary targets
/// and the unit direction towards the nearest boundary point otherwise.
#[derive(Debug, Clone, Copy)]
pub struct Target {
    pub x: Vec3,
    pub kind: TargetKind,
    pub d: f64,
    pub dir: Vec3,
}

impl Target {
    pub fn classify(patch: &Patch, x: &Vec3) -> Result<Self> {
        let (foot, d) = patch.nearest_boundary(x);
        if d <= patch.eps_b() {
            return Self::boundary(patch, &foot);
        }
        let v = sub(&foot, x);
        let dn = norm(&v);
        let dir = [v[0] / dn, v[1] / dn, v[2] / dn];
        let kind = if patch.signed_level(x) < 0.0 { TargetKind::Interior } else { TargetKind::Exterior };
        Ok(Self { x: *x, kind, d, dir })
    }

    pub fn boundary(patch: &Patch, x: &Vec3) -> Result<Self> {
        let dir = patch.normal3(x)?;
        Ok(Self { x: *x, kind: TargetKind::Boundary, d: 0.0, dir })
    }

    /// Boundary target with a known outward normal (mesh boundary nodes).
    pub fn boundary_with_normal(x: Vec3, normal: Vec3) -> Self {
        Self { x, kind: TargetKind::Boundary, d: 0.0, dir: normal }
    }
}

/// Per-target output. Riesz arrays are indexed `[c][j][i]`, Newton arrays `[c][j]`.
#[derive(Debug, Clone, Default)]
pub struct SweepOutput {
    pub ncomp: usize,
    pub n: usize,
    pub q: Vec<f64>,
    pub l: Vec<f64>,
    pub theta: Vec<f64>,
    pub newton: Vec<f64>,
    /// One-sided values `(interior, exterior)` of each component at the target.
    pub sides: Vec<(f64, f64)>,
}

impl SweepOutput {
    #[inline]
    pub fn ridx(&self, c: usize, j: usize, i: usize) -> usize {
        (c * self.n + j) * self.n + i
    }
    /// Full derivative `∂_i K_j[f_c]`.
    pub fn riesz(&self, c: usize, j: usize, i: usize) -> f64 {
        let k = self.ridx(c, j, i);
        self.q[k] + self.l[k] + self.theta[k]
    }
    pub fn newton(&self, c: usize, j: usize) -> f64 {
        self.newton[c * self.n + j]
    }
}

/// Riesz value split into far, local (including the identity term) and boundary lens parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PvResult {
    pub value: f64,
    pub q_part: f64,
    pub l_part: f64,
    pub theta_part: f64,
}

/// Polar-sweep evaluator bound to one patch.
pub struct Evaluator<'a> {
    patch: &'a Patch,
    conv: KernelConvention,
    cfg: QuadConfig,
    first: Vec<(f64, f64)>,
    piece: Vec<(f64, f64)>,
    tail: Vec<(f64, f64)>,
    delta_override: Option<f64>,
}

struct RayAcc {
    il: Vec<f64>,
    iq: Vec<f64>,
    jn: Vec<f64>,
}

impl<'a> Evaluator<'a> {
    pub fn new(patch: &'a Patch, cfg: QuadConfig) -> Self {
        Self {
            patch,
            conv: KernelConvention::new(patch.n()),
            cfg,
            first: gauss_legendre_unit(cfg.first_nodes),
            piece: gauss_legendre_unit(cfg.piece_nodes),
            tail: gauss_legendre_unit(cfg.tail_nodes),
            delta_override: None,
        }
    }

    /// Use a fixed split radius instead of `max{d, R0/2}` (the total must not depend on it).
    pub fn with_delta(mut self, delta: f64) -> Self {
        self.delta_override = Some(delta);
        self
    }

    pub fn convention(&self) -> &KernelConvention {
        &self.conv
    }

    pub fn set_convention(&mut self, conv: KernelConvention) {
        self.conv = conv;
    }

    fn delta(&self, t: &Target) -> f64 {
        self.delta_override.unwrap_or_else(|| t.d.max(0.5 * self.patch.radii().r0))
    }

    #[allow(clippy::too_many_arguments)]
    fn ray(
        &self,
        field: &dyn PiecewiseField,
        t: &Target,
        w: &Vec3,
        delta: f64,
        sub_int: &[f64],
        sub_ext: &[f64],
        cross: &mut Vec<f64>,
        buf: &mut [f64],
        acc: &mut RayAcc,
    ) {
        let m = acc.il.len();
        acc.il.iter_mut().for_each(|v| *v = 0.0);
        acc.iq.iter_mut().for_each(|v| *v = 0.0);
        acc.jn.iter_mut().for_each(|v| *v = 0.0);
        let bnormal = if t.kind == TargetKind::Boundary { Some(&t.dir) } else { None };
        let mut inside = self.patch.ray_crossings(&t.x, w, bnormal, cross);
        let mut a = 0.0;
        let nseg = cross.len() + 1;
        for sidx in 0..nseg {
            let b = if sidx < cross.len() { cross[sidx] } else { f64::INFINITY };
            let part = if inside { Part::Interior } else { Part::Exterior };
            let subv = if inside { sub_int } else { sub_ext };
            let mut lo = a;
            let cuts = [if a < delta && delta < b { delta } else { f64::NAN }, b];
            for &hi in cuts.iter().filter(|v| !v.is_nan()) {
                if hi - lo > 1e-15 * (1.0 + lo) {
                    let local = hi <= delta * (1.0 + 1e-14);
                    if lo == 0.0 {
                        for &(x, wt) in &self.first {
                            let r = hi * x;
                            let wr = hi * wt;
                            field.eval(part, &axpy(&t.x, r, w), buf);
                            for c in 0..m {
                                acc.il[c] += wr * (buf[c] - subv[c]) / r;
                                acc.jn[c] += wr * buf[c];
                            }
                        }
                    } else if hi.is_finite() {
                        let (la, lb) = (lo.ln(), hi.ln());
                        let h = lb - la;
                        for &(x, wt) in &self.piece {
                            let r = (la + h * x).exp();
                            let wl = h * wt;
                            field.eval(part, &axpy(&t.x, r, w), buf);
                            for c in 0..m {
                                if local {
                                    acc.il[c] += wl * (buf[c] - subv[c]);
                                } else {
                                    acc.iq[c] += wl * buf[c];
                                }
                                acc.jn[c] += wl * r * buf[c];
                            }
                        }
                    } else {
                        for &(x, wt) in &self.tail {
                            let tau = x;
                            let r = lo / tau;
                            field.eval(part, &axpy(&t.x, r, w), buf);
                            for c in 0..m {
                                acc.iq[c] += wt * buf[c] / tau;
                                acc.jn[c] += wt * buf[c] * lo / (tau * tau);
                            }
                        }
                    }
                }
                lo = hi;
            }
            a = b;
            inside = !inside;
        }
    }

    /// Full sweep at one target: far/local Riesz parts, lens term and Newton gradient for every component.
    pub fn evaluate(&self, field: &dyn PiecewiseField, t: &Target) -> Result<SweepOutput> {
        let n = self.patch.n();
        let m = field.n_comp();
        let mut fi = vec![0.0; m];
        let mut fe = vec![0.0; m];
        match t.kind {
            TargetKind::Interior => {
                field.eval(Part::Interior, &t.x, &mut fi);
                fe.copy_from_slice(&fi);
            }
            TargetKind::Exterior => {
                field.eval(Part::Exterior, &t.x, &mut fe);
                fi.copy_from_slice(&fe);
            }
            TargetKind::Boundary => {
                field.eval(Part::Interior, &t.x, &mut fi);
                field.eval(Part::Exterior, &t.x, &mut fe);
            }
        }
        let delta = self.delta(t);
        let nn = n * n;
        let dim = m * (2 * nn + n);
        let cn = self.conv.c_n;
        let mut cross = Vec::with_capacity(8);
        let mut buf = vec![0.0; m];
        let mut acc = RayAcc { il: vec![0.0; m], iq: vec![0.0; m], jn: vec![0.0; m] };
        let push = |w: &Vec3, out: &mut [f64], scale: f64, acc: &RayAcc| {
            for c in 0..m {
                for j in 0..n {
                    for i in 0..n {
                        let rk = cn * (if i == j { 1.0 } else { 0.0 } - n as f64 * w[j] * w[i]) * scale;
                        let k = (c * n + j) * n + i;
                        out[k] = rk * acc.il[c];
                        out[m * nn + k] = rk * acc.iq[c];
                    }
                    out[2 * m * nn + c * n + j] = -cn * w[j] * acc.jn[c] * scale;
                }
            }
        };
        let opts = AdaptiveOptions {
            abs_tol: self.cfg.angular_tol,
            rel_tol: self.cfg.angular_rel_tol,
            max_panels: self.cfg.max_angular_panels,
        };
        let total = if n == 2 {
            let phi0 = t.dir[1].atan2(t.dir[0]);
            let mut br = vec![-PI, PI];
            if t.kind == TargetKind::Boundary {
                br.extend([-0.5 * PI, 0.5 * PI]);
            } else {
                br.extend([-0.5 * PI, 0.5 * PI, 0.0]);
                if t.d < delta {
                    let k = (t.d / delta).acos();
                    br.extend([-k, k]);
                }
            }
            // crossing counts change at tangent rays; split the angular range there
            for a in self.patch.tangent_angles(&t.x) {
                let rel = (a - phi0 + PI).rem_euclid(2.0 * PI) - PI;
                br.push(rel);
            }
            let br = refine_breaks(br, self.cfg.initial_panels);
            let (v, _) = adaptive_gk15(
                |phi, out| {
                    let a = phi0 + phi;
                    let w = [a.cos(), a.sin(), 0.0];
                    self.ray(field, t, &w, delta, &fi, &fe, &mut cross, &mut buf, &mut acc);
                    push(&w, out, 1.0, &acc);
                },
                &br,
                dim,
                opts,
            );
            v
        } else {
            let axis = t.dir;
            let (u1, u2) = perp_pair(&axis);
            let nb = self.cfg.azimuth_nodes;
            let mut tmp = vec![0.0; dim];
            let mut br = vec![0.0, PI];
            if t.kind == TargetKind::Boundary {
                br.push(0.5 * PI);
            } else {
                br.push(0.5 * PI);
                if t.d < delta {
                    br.push((t.d / delta).acos());
                }
            }
            let br = refine_breaks(br, self.cfg.initial_panels);
            let (v, _) = adaptive_gk15(
                |al, out| {
                    out.iter_mut().for_each(|v| *v = 0.0);
                    let (sa, ca) = al.sin_cos();
                    for kb in 0..nb {
                        let be = 2.0 * PI * (kb as f64 + 0.5) / nb as f64;
                        let (sb, cb) = be.sin_cos();
                        let mut w = [0.0; 3];
                        for k in 0..3 {
                            w[k] = ca * axis[k] + sa * (cb * u1[k] + sb * u2[k]);
                        }
                        self.ray(field, t, &w, delta, &fi, &fe, &mut cross, &mut buf, &mut acc);
                        push(&w, &mut tmp, sa * 2.0 * PI / nb as f64, &acc);
                        for k in 0..dim {
                            out[k] += tmp[k];
                        }
                    }
                },
                &br,
                dim,
                opts,
            );
            v
        };
        let mut out = SweepOutput {
            ncomp: m,
            n,
            l: total[..m * nn].to_vec(),
            q: total[m * nn..2 * m * nn].to_vec(),
            theta: vec![0.0; m * nn],
            newton: total[2 * m * nn..].to_vec(),
            sides: fi.iter().zip(&fe).map(|(a, b)| (*a, *b)).collect(),
        };
        let idc = self.conv.identity_coefficient();
        let th = if t.kind == TargetKind::Boundary {
            Some(boundary_theta_matrix(self.patch, &self.conv, &t.x, delta, self.cfg.theta_nodes)?)
        } else {
            None
        };
        for c in 0..m {
            let fx = 0.5 * (fi[c] + fe[c]);
            for j in 0..n {
                let k = out.ridx(c, j, j);
                out.l[k] += idc * fx;
                if let Some(th) = &th {
                    for i in 0..n {
                        let k = out.ridx(c, j, i);
                        out.theta[k] = (fi[c] - fe[c]) * th[j][i];
                    }
                }
            }
        }
        Ok(out)
    }
}

fn refine_breaks(mut br: Vec<f64>, min_panels: usize) -> Vec<f64> {
    br.sort_by(|a, b| a.total_cmp(b));
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    let span = br[br.len() - 1] - br[0];
    let hmax = span / min_panels.max(1) as f64;
    let mut out = vec![br[0]];
    for w in br.windows(2) {
        let k = ((w[1] - w[0]) / hmax).ceil().max(1.0) as usize;
        for s in 1..=k {
            out.push(w[0] + (w[1] - w[0]) * s as f64 / k as f64);
        }
    }
    out
}

fn perp_pair(a: &Vec3) -> (Vec3, Vec3) {
    let mut u = if a[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = dot(&u, a);
    for k in 0..3 {
        u[k] -= p * a[k];
    }
    let s = norm(&u);
    let u1 = [u[0] / s, u[1] / s, u[2] / s];
    let u2 = [a[1] * u1[2] - a[2] * u1[1], a[2] * u1[0] - a[0] * u1[2], a[0] * u1[1] - a[1] * u1[0]];
    (u1, u2)
}

/// Lens term in graph coordinates: `Θ_{j,i} = ∫ ds ∫_0^{φ(s)} R_{j,i}(s τ + h η) dh` over the ball of radius `delta`.
///
/// `phi` is the graph height over the tangent hyperplane spanned by `frame[..n-1]` with outward normal
/// `frame[n-1]`; the result is expressed in the global basis.
pub fn theta_from_graph(
    conv: &KernelConvention,
    frame: &[Vec3],
    phi: &dyn Fn(&[f64]) -> Result<f64>,
    delta: f64,
    nodes: usize,
) -> Result<[[f64; 3]; 3]> {
    let n = conv.n;
    let eta = frame[n - 1];
    let gl = gauss_legendre(nodes);
    let gh = gauss_legendre(8);
    let mut th = [[0.0; 3]; 3];
    let mut add = |sv: &Vec3, s: &[f64], wt: f64| -> Result<()> {
        let ph = phi(s)?;
        let s2: f64 = s.iter().map(|v| v * v).sum();
        let cap = (delta * delta - s2).max(0.0).sqrt();
        let hmax = ph.signum() * ph.abs().min(cap);
        if hmax == 0.0 {
            return Ok(());
        }
        for &(x, wh) in gh.iter() {
            let h = 0.5 * hmax * (x + 1.0);
            let z = axpy(sv, h, &eta);
            let r2 = dot(&z, &z);
            let rn2 = r2.powf(0.5 * (n as f64 + 2.0));
            let scale = wt * 0.5 * hmax * wh * conv.c_n / rn2;
            for j in 0..n {
                for i in 0..n {
                    let d = if i == j { r2 } else { 0.0 };
                    th[j][i] += scale * (d - n as f64 * z[j] * z[i]);
                }
            }
        }
        Ok(())
    };
    if n == 2 {
        let tau = frame[0];
        for side in [-1.0, 1.0] {
            for &(x, w) in gl.iter() {
                let s = side * 0.5 * delta * (x + 1.0);
                let sv = [s * tau[0], s * tau[1], 0.0];
                add(&sv, &[s], 0.5 * delta * w)?;
            }
        }
    } else {
        let nb = 2 * nodes;
        for &(x, w) in gl.iter() {
            let rho = 0.5 * delta * (x + 1.0);
            for kb in 0..nb {
                let be = 2.0 * PI * kb as f64 / nb as f64;
                let s = [rho * be.cos(), rho * be.sin()];
                let mut sv = [0.0; 3];
                for k in 0..3 {
                    sv[k] = s[0] * frame[0][k] + s[1] * frame[1][k];
                }
                add(&sv, &s, 0.5 * delta * w * rho * 2.0 * PI / nb as f64)?;
            }
        }
    }
    Ok(th)
}

/// Lens matrix `Θ_{j,i}(x)` of the patch at boundary point `x` with radius `delta`.
pub fn boundary_theta_matrix(
    patch: &Patch,
    conv: &KernelConvention,
    x: &Vec3,
    delta: f64,
    nodes: usize,
) -> Result<[[f64; 3]; 3]> {
    let n = patch.n();
    let g = patch.local_graph(&x[..n])?;
    let mut frame = g.tangents.clone();
    frame.push(g.normal);
    let d = delta.min(g.window);
    theta_from_graph(conv, &frame, &|s| g.phi(s), d, nodes)
}

/// `Θ_{j,i}` at boundary point `x` with the default radius `R0/2`.
pub fn boundary_theta(patch: &Patch, j: usize, i: usize, x: &[f64]) -> Result<f64> {
    let n = patch.n();
    if j >= n || i >= n {
        return Err(Error::InvalidInput("index out of range".into()));
    }
    let conv = KernelConvention::new(n);
    let th = boundary_theta_matrix(patch, &conv, &to_vec3(x), 0.5 * patch.radii().r0, QuadConfig::default().theta_nodes)?;
    Ok(th[j][i])
}

/// Riesz value `∂_i K_j[f]` at an arbitrary point (component 0 of `f`).
pub fn riesz_pv(patch: &Patch, f: &dyn PiecewiseField, j: usize, i: usize, x: &[f64]) -> Result<PvResult> {
    riesz_pv_with(patch, f, j, i, x, QuadConfig::default(), None)
}

pub fn riesz_pv_with(
    patch: &Patch,
    f: &dyn PiecewiseField,
    j: usize,
    i: usize,
    x: &[f64],
    cfg: QuadConfig,
    delta: Option<f64>,
) -> Result<PvResult> {
    let n = patch.n();
    if j >= n || i >= n || x.len() != n || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("riesz_pv: bad index or point".into()));
    }
    let mut ev = Evaluator::new(patch, cfg);
    if let Some(d) = delta {
        ev = ev.with_delta(d);
    }
    let t = Target::classify(patch, &to_vec3(x))?;
    let out = ev.evaluate(f, &t)?;
    let k = out.ridx(0, j, i);
    Ok(PvResult { value: out.q[k] + out.l[k] + out.theta[k], q_part: out.q[k], l_part: out.l[k], theta_part: out.theta[k] })
}

/// `K_j[f](x)` for component 0 of `f`.
pub fn newton_potential(patch: &Patch, f: &dyn PiecewiseField, j: usize, x: &[f64]) -> Result<f64> {
    let t = Target::classify(patch, &to_vec3(x))?;
    let out = Evaluator::new(patch, QuadConfig::default()).evaluate(f, &t)?;
    Ok(out.newton(0, j))
}

/// The half-space constant `𝒦_{j,i}(η)` evaluated from the flat-disk flux integral with parameter `λ`
/// and orthonormal completion `basis` of `η` (so the result can be checked for basis independence).
pub fn halfspace_constant_with(n: usize, j: usize, i: usize, eta: &[f64], basis: &[Vec3], lam: f64) -> f64 {
    let e = to_vec3(eta);
    let scale = 2f64.powi(1 - n as i32);
    if n == 2 {
        let u = basis[0];
        let gl = gauss_legendre(64);
        let mut acc = 0.0;
        for side in [-1.0, 1.0] {
            for &(x, w) in gl.iter() {
                let s = side * lam * (x + 1.0);
                let num = s * u[j] - lam * e[j];
                acc += lam * w * num / (s * s + lam * lam);
            }
        }
        scale * acc * e[i]
    } else {
        let gl = gauss_legendre(48);
        let nb = 64;
        let mut acc = 0.0;
        for &(x, w) in gl.iter() {
            let rho = lam * (x + 1.0);
            let wr = lam * w * rho;
            for kb in 0..nb {
                let be = 2.0 * PI * kb as f64 / nb as f64;
                let (sb, cb) = be.sin_cos();
                let num = rho * (cb * basis[0][j] + sb * basis[1][j]) - lam * e[j];
                acc += wr * (2.0 * PI / nb as f64) * num / (rho * rho + lam * lam).powf(1.5);
            }
        }
        scale * acc * e[i]
    }
}

/// `𝒦_{j,i}(η)` with a canonical completion and `λ = 1`.
pub fn halfspace_constant(n: usize, j: usize, i: usize, eta: &[f64]) -> Result<f64> {
    let e = to_vec3(eta);
    if eta.len() != n || (norm(&e) - 1.0).abs() > 1e-12 || j >= n || i >= n {
        return Err(Error::InvalidInput("halfspace_constant: need a unit vector and valid indices".into()));
    }
    let basis = if n == 2 { vec![[-e[1], e[0], 0.0]] } else {
        let (a, b) = perp_pair(&e);
        vec![a, b]
    };
    Ok(halfspace_constant_with(n, j, i, eta, &basis, 1.0))
}

/// Closed form `−η_j η_i ∫_{B_1} (4|τ|² + 1)^{-n/2} dτ`.
pub fn halfspace_constant_exact(n: usize, j: usize, i: usize, eta: &[f64]) -> f64 {
    let m = if n == 2 { 2f64.atan() } else { 0.5 * PI * (1.0 - 1.0 / 5f64.sqrt()) };
    -eta[j] * eta[i] * m
}

/// One-sided limits by Richardson extrapolation along the normal, plus the boundary value itself.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpReport {
    pub inner_limit: f64,
    pub outer_limit: f64,
    pub average: f64,
    pub pv_value: f64,
    pub inner_error: f64,
    pub outer_error: f64,
    pub inner_table: Vec<f64>,
    pub outer_table: Vec<f64>,
}

fn richardson(vals: &[f64]) -> (f64, f64) {
    // halving steps; first order then second order elimination
    let r1: Vec<f64> = vals.windows(2).map(|w| 2.0 * w[1] - w[0]).collect();
    let r2: Vec<f64> = r1.windows(2).map(|w| (4.0 * w[1] - w[0]) / 3.0).collect();
    match r2.len() {
        0 => (*r1.last().unwrap_or(&vals[vals.len() - 1]), f64::INFINITY),
        1 => (r2[0], (r2[0] - r1[r1.len() - 1]).abs()),
        k => (r2[k - 1], (r2[k - 1] - r2[k - 2]).abs()),
    }
}

/// Evaluate `∂_i K_j[g]` at `x ∓ λ_k η` and at `x`, and extrapolate the one-sided limits.
pub fn jump_average(
    patch: &Patch,
    g: &dyn PiecewiseField,
    j: usize,
    i: usize,
    x: &[f64],
    lambdas: &[f64],
    cfg: QuadConfig,
) -> Result<JumpReport> {
    if lambdas.len() < 3 {
        return Err(Error::InvalidInput("need at least three step sizes".into()));
    }
    let p = to_vec3(x);
    let eta = patch.normal3(&p)?;
    let ev = Evaluator::new(patch, cfg);
    let val = |q: Vec3| -> Result<f64> {
        let t = Target::classify(patch, &q)?;
        Ok(ev.evaluate(g, &t)?.riesz(0, j, i))
    };
    let mut inner = Vec::new();
    let mut outer = Vec::new();
    for &l in lambdas {
        inner.push(val(axpy(&p, -l, &eta))?);
        outer.push(val(axpy(&p, l, &eta))?);
    }
    let (il, ie) = richardson(&inner);
    let (ol, oe) = richardson(&outer);
    let t = Target::boundary_with_normal(p, eta);
    let pv = ev.evaluate(g, &t)?.riesz(0, j, i);
    let scale = 1.0 + il.abs().max(ol.abs());
    if !(ie.is_finite() && oe.is_finite()) || ie > 1e-1 * scale || oe > 1e-1 * scale {
        return Err(Error::NonConvergent(format!("one-sided extrapolation errors {ie:.2e}, {oe:.2e}")));
    }
    Ok(JumpReport {
        inner_limit: il,
        outer_limit: ol,
        average: 0.5 * (il + ol),
        pv_value: pv,
        inner_error: ie,
        outer_error: oe,
        inner_table: inner,
        outer_table: outer,
    })
}

/// Default step sequence `λ_0 2^{-k}`, `k = 0..6`.
pub fn default_lambdas(lambda0: f64) -> Vec<f64> {
    (0..7).map(|k| lambda0 * 0.5f64.powi(k)).collect()
}

/// Sup of Hölder quotients of `∂_i K_j[f]` over point pairs, grouped by region of the pair.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HolderReport {
    pub interior: f64,
    pub exterior: f64,
    pub cross: f64,
    pub pairs: usize,
}

pub fn holder_harness(
    patch: &Patch,
    f: &dyn PiecewiseField,
    j: usize,
    i: usize,
    pairs: &[(Vec3, Vec3)],
    cfg: QuadConfig,
) -> Result<HolderReport> {
    let ev = Evaluator::new(patch, cfg);
    let gamma = patch.gamma();
    let mut rep = HolderReport { interior: 0.0, exterior: 0.0, cross: 0.0, pairs: pairs.len() };
    for (a, b) in pairs {
        let ta = Target::classify(patch, a)?;
        let tb = Target::classify(patch, b)?;
        let va = ev.evaluate(f, &ta)?.riesz(0, j, i);
        let vb = ev.evaluate(f, &tb)?.riesz(0, j, i);
        let q = (va - vb).abs() / norm(&sub(a, b)).powf(gamma);
        let slot = match (ta.kind, tb.kind) {
            (TargetKind::Interior, TargetKind::Interior) => &mut rep.interior,
            (TargetKind::Exterior, TargetKind::Exterior) => &mut rep.exterior,
            _ => &mut rep.cross,
        };
        *slot = slot.max(q);
    }
    Ok(rep)
}
