//! Patch geometry: boundary curves, region classification, local graphs, graph-window radii and
//! ray/boundary intersection used by the polar quadratures.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::quadrature::brent;
use crate::{dot, norm, sub, to_vec3, Error, Result, Vec3, MAX_DIM};

fn default_gamma() -> f64 {
    0.5
}

/// Initial data `ρ0 = c χ_Ω` together with the boundary description of `Ω`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatchSpec {
    pub n: usize,
    pub c: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    pub boundary: BoundaryCurve,
}

/// `x(t) = Σ_k cos_x[k] cos(kt) + sin_x[k] sin(kt)` (same for `y`), or a sphere in any dimension.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode")]
pub enum BoundaryCurve {
    #[serde(rename = "fourier2d")]
    Fourier2d { cos_x: Vec<f64>, sin_x: Vec<f64>, cos_y: Vec<f64>, sin_y: Vec<f64> },
    #[serde(rename = "sphere")]
    Sphere { center: Vec<f64>, radius: f64 },
}

impl PatchSpec {
    pub fn ball(n: usize, radius: f64, c: f64) -> Self {
        Self { n, c, gamma: 0.5, boundary: BoundaryCurve::Sphere { center: vec![0.0; n], radius } }
    }

    /// Unit disk written as a Fourier curve (exercises the general 2D path).
    pub fn fourier_disk(radius: f64, c: f64) -> Self {
        Self::ellipse(radius, radius, c)
    }

    pub fn ellipse(a: f64, b: f64, c: f64) -> Self {
        Self {
            n: 2,
            c,
            gamma: 0.5,
            boundary: BoundaryCurve::Fourier2d {
                cos_x: vec![0.0, a],
                sin_x: vec![0.0, 0.0],
                cos_y: vec![0.0, 0.0],
                sin_y: vec![0.0, b],
            },
        }
    }

    /// Polar curve `r(θ) = 1 + eps cos(kθ)` written in Cartesian Fourier form.
    pub fn polar_cosine(eps: f64, k: usize, c: f64) -> Self {
        let m = k + 2;
        let mut cx = vec![0.0; m];
        let mut sx = vec![0.0; m];
        let mut cy = vec![0.0; m];
        let mut sy = vec![0.0; m];
        cx[1] += 1.0;
        sy[1] += 1.0;
        cx[k + 1] += 0.5 * eps;
        sy[k + 1] += 0.5 * eps;
        if k >= 1 {
            let d = k - 1;
            cx[d] += 0.5 * eps;
            if d > 0 {
                sy[d] -= 0.5 * eps;
            }
        }
        if k == 1 {
            sx.truncate(m);
            cy.truncate(m);
        }
        Self { n: 2, c, gamma: 0.5, boundary: BoundaryCurve::Fourier2d { cos_x: cx, sin_x: sx, cos_y: cy, sin_y: sy } }
    }

    /// Homothety `x ↦ λ x`.
    pub fn scaled(&self, lam: f64) -> Self {
        let mut s = self.clone();
        match &mut s.boundary {
            BoundaryCurve::Fourier2d { cos_x, sin_x, cos_y, sin_y } => {
                for v in cos_x.iter_mut().chain(sin_x.iter_mut()).chain(cos_y.iter_mut()).chain(sin_y.iter_mut()) {
                    *v *= lam;
                }
            }
            BoundaryCurve::Sphere { center, radius } => {
                center.iter_mut().for_each(|v| *v *= lam);
                *radius *= lam;
            }
        }
        s
    }
}

/// Region label of a point relative to `Ω`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegionTag {
    Interior,
    Exterior,
    Boundary,
}

/// Graph-window radii: `R1` is the largest admissible window, `R0 = safety · R1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeometryRadii {
    pub r0: f64,
    pub r1: f64,
}

/// Settings of the probe-based radius estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadiiOptions {
    pub probe_density: usize,
    pub safety: f64,
    pub slope_cap: f64,
    pub holder_cap: f64,
    pub floor: f64,
}

impl Default for RadiiOptions {
    fn default() -> Self {
        Self { probe_density: 64, safety: 0.5, slope_cap: 1.0, holder_cap: 20.0, floor: 1e-6 }
    }
}

/// Truncated trigonometric plane curve.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCurve {
    cx: Vec<f64>,
    sx: Vec<f64>,
    cy: Vec<f64>,
    sy: Vec<f64>,
}

impl FourierCurve {
    pub fn new(cx: &[f64], sx: &[f64], cy: &[f64], sy: &[f64]) -> Self {
        let m = cx.len().max(sx.len()).max(cy.len()).max(sy.len());
        let pad = |v: &[f64]| {
            let mut w = v.to_vec();
            w.resize(m, 0.0);
            w
        };
        Self { cx: pad(cx), sx: pad(sx), cy: pad(cy), sy: pad(sy) }
    }

    pub fn modes(&self) -> usize {
        self.cx.len()
    }

    /// Position, first and second derivative at parameter `t`.
    pub fn eval(&self, t: f64) -> ([f64; 2], [f64; 2], [f64; 2]) {
        let (s1, c1) = t.sin_cos();
        let (mut ck, mut sk) = (1.0, 0.0);
        let mut p = [0.0; 2];
        let mut d1 = [0.0; 2];
        let mut d2 = [0.0; 2];
        for k in 0..self.cx.len() {
            let kf = k as f64;
            p[0] += self.cx[k] * ck + self.sx[k] * sk;
            p[1] += self.cy[k] * ck + self.sy[k] * sk;
            d1[0] += kf * (-self.cx[k] * sk + self.sx[k] * ck);
            d1[1] += kf * (-self.cy[k] * sk + self.sy[k] * ck);
            d2[0] -= kf * kf * (self.cx[k] * ck + self.sx[k] * sk);
            d2[1] -= kf * kf * (self.cy[k] * ck + self.sy[k] * sk);
            let nc = ck * c1 - sk * s1;
            sk = sk * c1 + ck * s1;
            ck = nc;
        }
        (p, d1, d2)
    }

    pub fn point(&self, t: f64) -> [f64; 2] {
        self.eval(t).0
    }

    /// Least-squares fit with `modes` cosine/sine pairs from samples at parameters `ts`.
    pub fn fit(ts: &[f64], pts: &[[f64; 2]], modes: usize) -> Result<(Self, f64)> {
        let cols = 2 * modes - 1;
        if ts.len() < cols {
            return Err(Error::InsufficientData(format!("{} samples for {} basis functions", ts.len(), cols)));
        }
        let basis = |t: f64, col: usize| {
            if col == 0 {
                1.0
            } else if col % 2 == 1 {
                (((col + 1) / 2) as f64 * t).cos()
            } else {
                ((col / 2) as f64 * t).sin()
            }
        };
        let a = nalgebra::DMatrix::from_fn(ts.len(), cols, |r, c| basis(ts[r], c));
        let svd = a.clone().svd(true, true);
        let mut coef = [vec![0.0; cols], vec![0.0; cols]];
        let mut resid: f64 = 0.0;
        for d in 0..2 {
            let b = nalgebra::DVector::from_iterator(ts.len(), pts.iter().map(|p| p[d]));
            let x = svd.solve(&b, 1e-13).map_err(|e| Error::InvalidInput(e.to_string()))?;
            let r = &a * &x - &b;
            resid = resid.max(r.amax());
            coef[d] = x.iter().copied().collect();
        }
        let split = |v: &[f64]| {
            let mut c = vec![0.0; modes];
            let mut s = vec![0.0; modes];
            c[0] = v[0];
            for k in 1..modes {
                c[k] = v[2 * k - 1];
                s[k] = v[2 * k];
            }
            (c, s)
        };
        let (cx, sx) = split(&coef[0]);
        let (cy, sy) = split(&coef[1]);
        Ok((Self { cx, sx, cy, sy }, resid))
    }

    pub fn to_boundary(&self) -> BoundaryCurve {
        BoundaryCurve::Fourier2d {
            cos_x: self.cx.clone(),
            sin_x: self.sx.clone(),
            cos_y: self.cy.clone(),
            sin_y: self.sy.clone(),
        }
    }
}

const TABLE: usize = 4096;
const COARSE: usize = 512;

#[derive(Debug, Clone)]
struct CurveData {
    curve: FourierCurve,
    c0: [f64; 2],
    theta0: f64,
    rho_tab: Vec<f64>,
    t_tab: Vec<f64>,
    rho_min: f64,
    rho_max: f64,
    coarse: Vec<[f64; 2]>,
    dense_pos: Vec<[f64; 2]>,
    dense_d1: Vec<[f64; 2]>,
    dense_alpha: Vec<f64>,
    area: f64,
}

#[derive(Debug, Clone)]
enum Shape {
    Curve(Box<CurveData>),
    Ball { center: Vec3, radius: f64 },
}

/// A validated patch with precomputed geometric data. Immutable and shareable across threads.
#[derive(Debug, Clone)]
pub struct Patch {
    spec: PatchSpec,
    shape: Shape,
    eps_b: f64,
    diameter: f64,
    radii: GeometryRadii,
}

fn wrap_pi(a: f64) -> f64 {
    let mut a = a % (2.0 * PI);
    if a > PI {
        a -= 2.0 * PI;
    } else if a <= -PI {
        a += 2.0 * PI;
    }
    a
}

impl Patch {
    pub fn new(spec: PatchSpec) -> Result<Self> {
        Self::with_options(spec, RadiiOptions::default())
    }

    pub fn with_options(spec: PatchSpec, opts: RadiiOptions) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&spec.n) {
            return Err(Error::InvalidInput(format!("dimension {} not in 2..=3", spec.n)));
        }
        if !(spec.c.is_finite() && spec.c > 0.0) {
            return Err(Error::InvalidInput("density amplitude c must be positive".into()));
        }
        if !(spec.gamma > 0.0 && spec.gamma < 1.0) {
            return Err(Error::InvalidInput("Hölder exponent must lie in (0,1)".into()));
        }
        let (shape, diameter) = match &spec.boundary {
            BoundaryCurve::Sphere { center, radius } => {
                if center.len() != spec.n || !(*radius > 0.0) || center.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("sphere needs n finite center coordinates and radius > 0".into()));
                }
                (Shape::Ball { center: to_vec3(center), radius: *radius }, 2.0 * radius)
            }
            BoundaryCurve::Fourier2d { cos_x, sin_x, cos_y, sin_y } => {
                if spec.n != 2 {
                    return Err(Error::InvalidInput("fourier2d boundaries require n = 2".into()));
                }
                let all = cos_x.iter().chain(sin_x).chain(cos_y).chain(sin_y);
                if all.clone().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidInput("non-finite Fourier coefficient".into()));
                }
                let curve = FourierCurve::new(cos_x, sin_x, cos_y, sin_y);
                let data = build_curve(curve)?;
                let mut diam: f64 = 0.0;
                for a in data.coarse.iter().step_by(4) {
                    for b in data.coarse.iter().step_by(4) {
                        diam = diam.max(((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt());
                    }
                }
                (Shape::Curve(Box::new(data)), diam)
            }
        };
        let mut patch = Self {
            spec,
            shape,
            eps_b: 1e-8 * diameter,
            diameter,
            radii: GeometryRadii { r0: 0.0, r1: 0.0 },
        };
        patch.radii = estimate_radii(&patch, opts)?;
        Ok(patch)
    }

    pub fn spec(&self) -> &PatchSpec {
        &self.spec
    }
    pub fn n(&self) -> usize {
        self.spec.n
    }
    pub fn c(&self) -> f64 {
        self.spec.c
    }
    pub fn gamma(&self) -> f64 {
        self.spec.gamma
    }
    pub fn eps_b(&self) -> f64 {
        self.eps_b
    }
    pub fn diameter(&self) -> f64 {
        self.diameter
    }
    pub fn radii(&self) -> GeometryRadii {
        self.radii
    }
    pub fn is_ball(&self) -> bool {
        matches!(self.shape, Shape::Ball { .. })
    }

    /// `(center, radius)` for sphere patches.
    pub fn ball(&self) -> Option<(Vec3, f64)> {
        match &self.shape {
            Shape::Ball { center, radius } => Some((*center, *radius)),
            _ => None,
        }
    }

    pub fn curve(&self) -> Option<&FourierCurve> {
        match &self.shape {
            Shape::Curve(d) => Some(&d.curve),
            _ => None,
        }
    }

    /// Enclosed volume.
    pub fn volume(&self) -> f64 {
        match &self.shape {
            Shape::Curve(d) => d.area,
            Shape::Ball { radius, .. } => crate::kernels::ball_volume(self.n()) * radius.powi(self.n() as i32),
        }
    }

    /// Star centre used by the polar parametrization.
    pub fn star_center(&self) -> Vec3 {
        match &self.shape {
            Shape::Curve(d) => [d.c0[0], d.c0[1], 0.0],
            Shape::Ball { center, .. } => *center,
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<Vec3> {
        if x.len() != self.n() || x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("expected {} finite coordinates", self.n())));
        }
        Ok(to_vec3(x))
    }

    /// Region tag and unsigned distance to the boundary, with the default band `eps_b`.
    pub fn classify(&self, x: &[f64]) -> Result<(RegionTag, f64)> {
        self.classify_with(x, self.eps_b)
    }

    pub fn classify_with(&self, x: &[f64], eps_b: f64) -> Result<(RegionTag, f64)> {
        if !(eps_b > 0.0) {
            return Err(Error::InvalidInput("eps_b must be positive".into()));
        }
        let p = self.check_point(x)?;
        let d = self.distance3(&p);
        let tag = if d <= eps_b {
            RegionTag::Boundary
        } else if self.signed_level(&p) < 0.0 {
            RegionTag::Interior
        } else {
            RegionTag::Exterior
        };
        Ok((tag, d))
    }

    pub(crate) fn distance3(&self, p: &Vec3) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => (norm(&sub(p, center)) - radius).abs(),
            Shape::Curve(d) => nearest_param(d, [p[0], p[1]]).2,
        }
    }

    /// Level function, negative inside; for curves `|x - c0| - ρ_b(θ)`.
    pub(crate) fn signed_level(&self, p: &Vec3) -> f64 {
        match &self.shape {
            Shape::Ball { center, radius } => norm(&sub(p, center)) - radius,
            Shape::Curve(d) => {
                let dx = p[0] - d.c0[0];
                let dy = p[1] - d.c0[1];
                let r = dx.hypot(dy);
                r - rho_interp(d, dy.atan2(dx))
            }
        }
    }

    /// Nearest boundary point and distance.
    pub(crate) fn nearest_boundary(&self, p: &Vec3) -> (Vec3, f64) {
        match &self.shape {
            Shape::Ball { center, radius } => {
                let v = sub(p, center);
                let r = norm(&v);
                let dir = if r > 0.0 { [v[0] / r, v[1] / r, v[2] / r] } else { [1.0, 0.0, 0.0] };
                (crate::axpy(center, *radius, &dir), (r - radius).abs())
            }
            Shape::Curve(d) => {
                let (_, f, dist) = nearest_param(d, [p[0], p[1]]);
                ([f[0], f[1], 0.0], dist)
            }
        }
    }

    /// `max{d(x), R0/2}`.
    pub fn delta(&self, x: &[f64]) -> Result<f64> {
        let (_, d) = self.classify(x)?;
        Ok(d.max(0.5 * self.radii.r0))
    }

    /// `max{‖x‖, d(x)}` and a flag set when `x` lies in `Ω` or within `R0` of the boundary.
    pub fn big_delta(&self, x: &[f64]) -> Result<(f64, bool)> {
        let (tag, d) = self.classify(x)?;
        let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        let flagged = tag != RegionTag::Exterior || d < self.radii.r0;
        Ok((r.max(d), flagged))
    }

    /// Outward unit normal at a boundary point.
    pub fn normal(&self, x0: &[f64]) -> Result<Vec<f64>> {
        let p = self.check_point(x0)?;
        Ok(self.normal3(&p)?[..self.n()].to_vec())
    }

    pub(crate) fn normal3(&self, p: &Vec3) -> Result<Vec3> {
        let tol = 1e3 * self.eps_b;
        match &self.shape {
            Shape::Ball { center, radius } => {
                let v = sub(p, center);
                let r = norm(&v);
                if (r - radius).abs() > tol {
                    return Err(Error::NotOnBoundary((r - radius).abs()));
                }
                Ok([v[0] / r, v[1] / r, v[2] / r])
            }
            Shape::Curve(d) => {
                let (t, _, dist) = nearest_param(d, [p[0], p[1]]);
                if dist > tol {
                    return Err(Error::NotOnBoundary(dist));
                }
                let (_, d1, _) = d.curve.eval(t);
                let s = d1[0].hypot(d1[1]);
                if s < 1e-12 * self.diameter {
                    return Err(Error::DegenerateBoundary("vanishing tangent".into()));
                }
                Ok([d1[1] / s, -d1[0] / s, 0.0])
            }
        }
    }

    /// Orthonormal frame `(τ_1..τ_{n-1}, η)` and local graph of the boundary at `x0`.
    pub fn local_graph(&self, x0: &[f64]) -> Result<LocalGraph> {
        let p = self.check_point(x0)?;
        let eta = self.normal3(&p)?;
        let n = self.n();
        let tangents = complete_frame(&eta, n);
        let kind = match &self.shape {
            Shape::Ball { radius, .. } => GraphKind::Sphere { radius: *radius },
            Shape::Curve(d) => {
                let (t0, _, _) = nearest_param(d, [p[0], p[1]]);
                GraphKind::Curve { curve: d.curve.clone(), t0 }
            }
        };
        let origin = match &self.shape {
            Shape::Ball { center, radius } => crate::axpy(center, *radius, &eta),
            Shape::Curve(d) => {
                let (t0, _, _) = nearest_param(d, [p[0], p[1]]);
                let q = d.curve.point(t0);
                [q[0], q[1], 0.0]
            }
        };
        Ok(LocalGraph { n, origin, tangents, normal: eta, window: self.radii.r1, kind })
    }

    /// Boundary point at polar angle `θ` about the star centre.
    pub fn boundary_at_angle(&self, theta: f64) -> Vec3 {
        match &self.shape {
            Shape::Curve(d) => {
                let t = param_at_angle(d, theta);
                let q = d.curve.point(t);
                [q[0], q[1], 0.0]
            }
            Shape::Ball { center, radius } => [center[0] + radius * theta.cos(), center[1] + radius * theta.sin(), center[2]],
        }
    }

    /// Curve parameter at polar angle `θ` about the star centre (table lookup).
    #[inline]
    pub(crate) fn param_fast(&self, theta: f64) -> f64 {
        match &self.shape {
            Shape::Curve(d) => t_interp(d, theta),
            Shape::Ball { .. } => theta,
        }
    }

    /// Boundary radius `ρ_b(θ)` about the star centre (2D curves and spheres).
    #[inline]
    pub(crate) fn rho_b(&self, theta: f64) -> f64 {
        match &self.shape {
            Shape::Curve(d) => rho_interp(d, theta),
            Shape::Ball { radius, .. } => *radius,
        }
    }

    /// `m` boundary samples at equispaced curve parameters (2D) or equispaced angles on a great circle.
    pub fn boundary_polyline(&self, m: usize) -> Vec<[f64; 2]> {
        (0..m)
            .map(|k| {
                let t = 2.0 * PI * k as f64 / m as f64;
                match &self.shape {
                    Shape::Curve(d) => d.curve.point(t),
                    Shape::Ball { center, radius } => [center[0] + radius * t.cos(), center[1] + radius * t.sin()],
                }
            })
            .collect()
    }

    /// Polar angles (about `x`) of the rays from `x` that touch the boundary tangentially (plane curves only).
    pub(crate) fn tangent_angles(&self, x: &Vec3) -> Vec<f64> {
        let Shape::Curve(d) = &self.shape else { return Vec::new() };
        let g = |p: &[f64; 2], d1: &[f64; 2]| (p[0] - x[0]) * d1[1] - (p[1] - x[1]) * d1[0];
        let m = d.dense_pos.len();
        let h = 2.0 * PI / m as f64;
        let mut out = Vec::new();
        let mut prev = g(&d.dense_pos[m - 1], &d.dense_d1[m - 1]);
        for k in 0..m {
            let cur = g(&d.dense_pos[k], &d.dense_d1[k]);
            if prev * cur < 0.0 {
                let t = brent(
                    |t| {
                        let (p, d1, _) = d.curve.eval(t);
                        g(&p, &d1)
                    },
                    (k as f64 - 1.0) * h,
                    k as f64 * h,
                    prev,
                    cur,
                    1e-13,
                );
                let p = d.curve.point(t);
                out.push((p[1] - x[1]).atan2(p[0] - x[0]));
            }
            prev = cur;
        }
        out
    }

    /// Distances along the ray `x + rω` at which it crosses the boundary, ascending,
    /// and the region of the initial segment. `start_normal` marks `x` as a boundary point.
    pub(crate) fn ray_crossings(&self, x: &Vec3, w: &Vec3, start_normal: Option<&Vec3>, out: &mut Vec<f64>) -> bool {
        out.clear();
        match &self.shape {
            Shape::Ball { center, radius } => {
                let q = sub(x, center);
                let b = dot(w, &q);
                let cc = dot(&q, &q) - radius * radius;
                if let Some(nrm) = start_normal {
                    let inward = dot(w, nrm) < 0.0;
                    if inward && -2.0 * b > 0.0 {
                        out.push(-2.0 * b);
                    }
                    return inward;
                }
                let disc = b * b - cc;
                let inside = cc < 0.0;
                if disc > 0.0 {
                    let s = disc.sqrt();
                    for r in [-b - s, -b + s] {
                        if r > 0.0 {
                            out.push(r);
                        }
                    }
                }
                inside
            }
            Shape::Curve(d) => curve_ray_crossings(d, self.diameter, x, w, start_normal, out),
        }
    }
}

fn complete_frame(eta: &Vec3, n: usize) -> Vec<Vec3> {
    if n == 2 {
        return vec![[-eta[1], eta[0], 0.0]];
    }
    let mut a = if eta[0].abs() < 0.9 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let p = dot(&a, eta);
    for k in 0..3 {
        a[k] -= p * eta[k];
    }
    let s = norm(&a);
    let t1 = [a[0] / s, a[1] / s, a[2] / s];
    let t2 = [
        eta[1] * t1[2] - eta[2] * t1[1],
        eta[2] * t1[0] - eta[0] * t1[2],
        eta[0] * t1[1] - eta[1] * t1[0],
    ];
    vec![t1, t2]
}

fn build_curve(curve: FourierCurve) -> Result<CurveData> {
    let m = TABLE;
    let mut pos = Vec::with_capacity(m);
    let mut d1s = Vec::with_capacity(m);
    let mut min_speed = f64::INFINITY;
    let mut area = 0.0;
    let mut cen = [0.0; 2];
    for k in 0..m {
        let t = 2.0 * PI * k as f64 / m as f64;
        let (p, d1, _) = curve.eval(t);
        min_speed = min_speed.min(d1[0].hypot(d1[1]));
        let cr = p[0] * d1[1] - p[1] * d1[0];
        area += 0.5 * cr;
        cen[0] += p[0] * cr / 3.0;
        cen[1] += p[1] * cr / 3.0;
        pos.push(p);
        d1s.push(d1);
    }
    let h = 2.0 * PI / m as f64;
    area *= h;
    let scale = pos.iter().map(|p| p[0].abs().max(p[1].abs())).fold(0.0, f64::max).max(1e-300);
    if min_speed < 1e-8 * scale {
        return Err(Error::DegenerateBoundary("parametrization is not regular".into()));
    }
    if area <= 0.0 {
        return Err(Error::DegenerateBoundary(
            "boundary must enclose positive area with counterclockwise orientation".into(),
        ));
    }
    let c0 = [cen[0] * h / area, cen[1] * h / area];
    let mut alpha = Vec::with_capacity(m + 1);
    for k in 0..m {
        let (dx, dy) = (pos[k][0] - c0[0], pos[k][1] - c0[1]);
        let cr = dx * d1s[k][1] - dy * d1s[k][0];
        if cr <= 0.0 {
            return Err(Error::DegenerateBoundary(
                "curve is not star-shaped about its centroid (or self-intersects)".into(),
            ));
        }
        let a = dy.atan2(dx);
        if k == 0 {
            alpha.push(a);
        } else {
            let prev: f64 = alpha[k - 1];
            alpha.push(prev + wrap_pi(a - prev));
        }
    }
    let total = alpha[m - 1] + wrap_pi(alpha[0] - alpha[m - 1]) - alpha[0];
    if (total - 2.0 * PI).abs() > 1e-6 {
        return Err(Error::DegenerateBoundary("curve winds more than once".into()));
    }
    let coarse = (0..COARSE).map(|k| pos[k * (m / COARSE)]).collect();
    let mut data = CurveData {
        curve,
        c0,
        theta0: alpha[0],
        rho_tab: vec![0.0; m],
        t_tab: vec![0.0; m],
        rho_min: 0.0,
        rho_max: 0.0,
        coarse,
        dense_pos: pos,
        dense_d1: d1s,
        dense_alpha: alpha,
        area,
    };
    let mut rmin = f64::INFINITY;
    let mut rmax: f64 = 0.0;
    for k in 0..m {
        let th = data.theta0 + 2.0 * PI * k as f64 / m as f64;
        let t = param_at_angle(&data, th);
        let p = data.curve.point(t);
        let r = (p[0] - c0[0]).hypot(p[1] - c0[1]);
        data.rho_tab[k] = r;
        data.t_tab[k] = if k == 0 { 0.0 } else { t.rem_euclid(2.0 * PI) };
        rmin = rmin.min(r);
        rmax = rmax.max(r);
    }
    data.rho_min = rmin;
    data.rho_max = rmax;
    Ok(data)
}

/// Curve parameter whose polar angle about `c0` equals `theta` (mod 2π).
fn param_at_angle(d: &CurveData, theta: f64) -> f64 {
    let m = d.dense_alpha.len();
    let mut a = d.theta0 + (theta - d.theta0).rem_euclid(2.0 * PI);
    let end = d.theta0 + 2.0 * PI;
    if a >= end {
        a = d.theta0;
    }
    // bracket in the unwrapped, increasing angle table
    let k = match d.dense_alpha.binary_search_by(|v| v.total_cmp(&a)) {
        Ok(k) => k,
        Err(k) => k.saturating_sub(1),
    };
    let (a0, a1) = (d.dense_alpha[k], if k + 1 < m { d.dense_alpha[k + 1] } else { end });
    let h = 2.0 * PI / m as f64;
    let mut t = h * (k as f64 + ((a - a0) / (a1 - a0)).clamp(0.0, 1.0));
    for _ in 0..8 {
        let (p, d1, _) = d.curve.eval(t);
        let (dx, dy) = (p[0] - d.c0[0], p[1] - d.c0[1]);
        let f = wrap_pi(dy.atan2(dx) - a);
        let fp = (dx * d1[1] - dy * d1[0]) / (dx * dx + dy * dy);
        let step = f / fp;
        t -= step.clamp(-h, h);
        if step.abs() < 1e-15 {
            break;
        }
    }
    t
}

#[inline]
fn cubic4(f: f64) -> [f64; 4] {
    [
        -f * (f - 1.0) * (f - 2.0) / 6.0,
        (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0,
        -(f + 1.0) * f * (f - 2.0) / 2.0,
        (f + 1.0) * f * (f - 1.0) / 6.0,
    ]
}

/// Curve parameter at polar angle `θ`, from the table (unwrapped to stay monotone across the seam).
#[inline]
fn t_interp(d: &CurveData, theta: f64) -> f64 {
    let m = d.t_tab.len();
    let h = 2.0 * PI / m as f64;
    let x = (theta - d.theta0).rem_euclid(2.0 * PI) / h;
    let k = x.floor() as isize;
    let w = cubic4(x - k as f64);
    let at = |i: isize| {
        let (q, r) = (i.div_euclid(m as isize), i.rem_euclid(m as isize));
        d.t_tab[r as usize] + 2.0 * PI * q as f64
    };
    w[0] * at(k - 1) + w[1] * at(k) + w[2] * at(k + 1) + w[3] * at(k + 2)
}

#[inline]
fn rho_interp(d: &CurveData, theta: f64) -> f64 {
    let m = d.rho_tab.len();
    let h = 2.0 * PI / m as f64;
    let x = (theta - d.theta0).rem_euclid(2.0 * PI) / h;
    let k = x.floor() as isize;
    let f = x - k as f64;
    let at = |i: isize| d.rho_tab[i.rem_euclid(m as isize) as usize];
    let (pm, p0, p1, p2) = (at(k - 1), at(k), at(k + 1), at(k + 2));
    // cubic Lagrange on nodes -1, 0, 1, 2
    let wm = -f * (f - 1.0) * (f - 2.0) / 6.0;
    let w0 = (f + 1.0) * (f - 1.0) * (f - 2.0) / 2.0;
    let w1 = -(f + 1.0) * f * (f - 2.0) / 2.0;
    let w2 = (f + 1.0) * f * (f - 1.0) / 6.0;
    wm * pm + w0 * p0 + w1 * p1 + w2 * p2
}

/// `(t*, foot point, distance)` for the nearest boundary point.
fn nearest_param(d: &CurveData, x: [f64; 2]) -> (f64, [f64; 2], f64) {
    let mut best = 0;
    let mut bd = f64::INFINITY;
    for (k, p) in d.coarse.iter().enumerate() {
        let dd = (p[0] - x[0]).powi(2) + (p[1] - x[1]).powi(2);
        if dd < bd {
            bd = dd;
            best = k;
        }
    }
    let h = 2.0 * PI / d.coarse.len() as f64;
    let mut t = h * best as f64;
    for _ in 0..30 {
        let (p, d1, d2) = d.curve.eval(t);
        let r = [p[0] - x[0], p[1] - x[1]];
        let f = r[0] * d1[0] + r[1] * d1[1];
        let fp = d1[0] * d1[0] + d1[1] * d1[1] + r[0] * d2[0] + r[1] * d2[1];
        let step = if fp > 0.0 { f / fp } else { f / (d1[0] * d1[0] + d1[1] * d1[1]) };
        t -= step.clamp(-h, h);
        if step.abs() < 1e-15 {
            break;
        }
    }
    let p = d.curve.point(t);
    let dist = (p[0] - x[0]).hypot(p[1] - x[1]);
    if dist > bd.sqrt() {
        let t0 = h * best as f64;
        return (t0.rem_euclid(2.0 * PI), d.coarse[best], bd.sqrt());
    }
    (t.rem_euclid(2.0 * PI), p, dist)
}

fn curve_ray_crossings(
    d: &CurveData,
    diameter: f64,
    x: &Vec3,
    w: &Vec3,
    start_normal: Option<&Vec3>,
    out: &mut Vec<f64>,
) -> bool {
    let g = |r: f64| {
        let px = x[0] + r * w[0] - d.c0[0];
        let py = x[1] + r * w[1] - d.c0[1];
        px.hypot(py) - rho_interp(d, py.atan2(px))
    };
    let qx = x[0] - d.c0[0];
    let qy = x[1] - d.c0[1];
    let b = qx * w[0] + qy * w[1];
    let q2 = qx * qx + qy * qy;
    // parameters where the ray is inside the annulus rho_min <= |p - c0| <= rho_max
    let pad = 1e-9 * diameter;
    let (lo2, hi2) = ((d.rho_min - pad).max(0.0).powi(2), (d.rho_max + pad).powi(2));
    let roots = |rr2: f64| -> Option<(f64, f64)> {
        let disc = b * b - (q2 - rr2);
        if disc <= 0.0 {
            None
        } else {
            let s = disc.sqrt();
            Some((-b - s, -b + s))
        }
    };
    let mut segs: [(f64, f64); 2] = [(0.0, -1.0); 2];
    let mut nseg = 0;
    if let Some((o0, o1)) = roots(hi2) {
        match roots(lo2) {
            Some((i0, i1)) if lo2 > 0.0 => {
                segs[0] = (o0, i0);
                segs[1] = (i1, o1);
                nseg = 2;
            }
            _ => {
                segs[0] = (o0, o1);
                nseg = 1;
            }
        }
    }
    let tiny = 1e-9 * diameter;
    let mut inside;
    let mut r_prev;
    if let Some(nrm) = start_normal {
        inside = w[0] * nrm[0] + w[1] * nrm[1] < 0.0;
        let gl = g(tiny);
        if (gl < 0.0) != inside {
            inside = gl < 0.0;
        }
        r_prev = tiny;
    } else {
        inside = g(0.0) < 0.0;
        r_prev = 0.0;
    }
    let step = (0.05 * d.rho_min).min(0.02 * diameter);
    for seg in segs.iter().take(nseg) {
        let a = seg.0.max(r_prev);
        let e = seg.1;
        if e <= a {
            continue;
        }
        let mut r0 = a;
        let mut g0 = g(r0);
        let mut cur_inside = inside;
        if (g0 < 0.0) != cur_inside && r0 > r_prev {
            // sign already changed before the segment started: cannot happen for a valid annulus
            cur_inside = g0 < 0.0;
        }
        let nstep = (((e - a) / step).ceil() as usize).max(2);
        let hs = (e - a) / nstep as f64;
        for k in 1..=nstep {
            let r1 = if k == nstep { e } else { a + hs * k as f64 };
            let g1 = g(r1);
            if (g1 < 0.0) != cur_inside {
                let root = if (g0 < 0.0) != (g1 < 0.0) {
                    brent(g, r0, r1, g0, g1, 1e-14 * diameter)
                } else {
                    r0
                };
                out.push(root);
                cur_inside = g1 < 0.0;
            }
            r0 = r1;
            g0 = g1;
        }
        inside = cur_inside;
        r_prev = e;
    }
    if let Some(nrm) = start_normal {
        let first = w[0] * nrm[0] + w[1] * nrm[1] < 0.0;
        let gl = g(tiny);
        return if (gl < 0.0) != first { gl < 0.0 } else { first };
    }
    g(0.0) < 0.0
}

#[derive(Debug, Clone)]
enum GraphKind {
    Curve { curve: FourierCurve, t0: f64 },
    Sphere { radius: f64 },
}

/// Boundary near `x0` written as `x0 + Σ s_k τ_k + φ(s) η` with outward `η`; `φ ≤ 0` on convex parts.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    pub n: usize,
    pub origin: Vec3,
    pub tangents: Vec<Vec3>,
    pub normal: Vec3,
    pub window: f64,
    kind: GraphKind,
}

impl LocalGraph {
    /// Graph height and its gradient at tangential coordinates `s`.
    pub fn phi_grad(&self, s: &[f64]) -> Result<(f64, Vec<f64>)> {
        let s2: f64 = s.iter().map(|v| v * v).sum();
        let sn = s2.sqrt();
        if sn > self.window {
            return Err(Error::OutOfWindow { s: sn, r1: self.window });
        }
        match &self.kind {
            GraphKind::Sphere { radius } => {
                let h = (radius * radius - s2).sqrt();
                Ok((h - radius, s.iter().map(|v| -v / h).collect()))
            }
            GraphKind::Curve { curve, t0 } => {
                let tau = self.tangents[0];
                let (_, d10, _) = curve.eval(*t0);
                let mut t = t0 + s[0] / d10[0].hypot(d10[1]);
                for _ in 0..40 {
                    let (p, d1, _) = curve.eval(t);
                    let f = (p[0] - self.origin[0]) * tau[0] + (p[1] - self.origin[1]) * tau[1] - s[0];
                    let fp = d1[0] * tau[0] + d1[1] * tau[1];
                    if fp <= 0.0 {
                        return Err(Error::OutOfWindow { s: sn, r1: self.window });
                    }
                    let step = f / fp;
                    t -= step;
                    if step.abs() < 1e-15 {
                        break;
                    }
                }
                let (p, d1, _) = curve.eval(t);
                let eta = self.normal;
                let h = (p[0] - self.origin[0]) * eta[0] + (p[1] - self.origin[1]) * eta[1];
                let slope = (d1[0] * eta[0] + d1[1] * eta[1]) / (d1[0] * tau[0] + d1[1] * tau[1]);
                Ok((h, vec![slope]))
            }
        }
    }

    pub fn phi(&self, s: &[f64]) -> Result<f64> {
        Ok(self.phi_grad(s)?.0)
    }

    /// Physical point of graph coordinates `(s, h)`.
    pub fn point(&self, s: &[f64], h: f64) -> Vec3 {
        let mut p = crate::axpy(&self.origin, h, &self.normal);
        for (k, sk) in s.iter().enumerate() {
            p = crate::axpy(&p, *sk, &self.tangents[k]);
        }
        p
    }
}

/// Largest dyadic window radius passing the graph tests at every probe; `R0 = safety · R1`.
pub fn estimate_radii(patch: &Patch, opts: RadiiOptions) -> Result<GeometryRadii> {
    let gamma = patch.gamma();
    let mut r = 0.5;
    while r >= opts.floor {
        let ok = match &patch.shape {
            Shape::Ball { radius, .. } => ball_window_ok(*radius, r, gamma, &opts),
            Shape::Curve(d) => curve_window_ok(d, r, gamma, &opts),
        };
        if ok {
            return Ok(GeometryRadii { r0: opts.safety * r, r1: r });
        }
        r *= 0.5;
    }
    Err(Error::DegenerateBoundary(format!("no admissible graph window above {:.1e}", opts.floor)))
}

fn holder_ok(s: &[f64], slope: &[f64], gamma: f64, cap: f64) -> bool {
    let stride = (s.len() / 64).max(1);
    let idx: Vec<usize> = (0..s.len()).step_by(stride).collect();
    for (a, &i) in idx.iter().enumerate() {
        for &j in &idx[a + 1..] {
            let ds = (s[i] - s[j]).abs();
            if ds > 0.0 && (slope[i] - slope[j]).abs() / ds.powf(gamma) > cap {
                return false;
            }
        }
    }
    true
}

fn ball_window_ok(radius: f64, r: f64, gamma: f64, opts: &RadiiOptions) -> bool {
    if r >= radius {
        return false;
    }
    // window boundary in tangential coordinate: |x - x0| = r on the sphere
    let smax = r * (1.0 - r * r / (4.0 * radius * radius)).sqrt();
    let m = 200;
    let mut s = Vec::with_capacity(m + 1);
    let mut sl = Vec::with_capacity(m + 1);
    for k in 0..=m {
        let sv = smax * k as f64 / m as f64;
        let slope = sv / (radius * radius - sv * sv).sqrt();
        if slope > opts.slope_cap {
            return false;
        }
        s.push(sv);
        sl.push(slope);
    }
    holder_ok(&s, &sl, gamma, opts.holder_cap)
}

fn curve_window_ok(d: &CurveData, r: f64, gamma: f64, opts: &RadiiOptions) -> bool {
    let m = d.dense_pos.len();
    let probes = opts.probe_density.clamp(1, m);
    let r2 = r * r;
    let within = |k: usize, x0: &[f64; 2]| {
        let p = d.dense_pos[k % m];
        (p[0] - x0[0]).powi(2) + (p[1] - x0[1]).powi(2) < r2
    };
    for pidx in 0..probes {
        let k0 = pidx * m / probes;
        let x0 = d.dense_pos[k0];
        let t0 = d.dense_d1[k0];
        let sp = t0[0].hypot(t0[1]);
        let tau = [t0[0] / sp, t0[1] / sp];
        let eta = [tau[1], -tau[0]];
        let mut hi = 0;
        while hi < m && within(k0 + hi + 1, &x0) {
            hi += 1;
        }
        let mut lo = 0;
        while lo < m && within(k0 + m - lo - 1, &x0) {
            lo += 1;
        }
        if hi + lo + 1 >= m {
            return false;
        }
        let count = (0..m).filter(|&k| within(k, &x0)).count();
        if count != hi + lo + 1 {
            return false;
        }
        let mut s = Vec::with_capacity(hi + lo + 1);
        let mut sl = Vec::with_capacity(hi + lo + 1);
        for off in 0..=(hi + lo) {
            let k = (k0 + m - lo + off) % m;
            let p = d.dense_pos[k];
            let d1 = d.dense_d1[k];
            let along = d1[0] * tau[0] + d1[1] * tau[1];
            if along <= 0.0 {
                return false;
            }
            let slope = (d1[0] * eta[0] + d1[1] * eta[1]) / along;
            if slope.abs() > opts.slope_cap {
                return false;
            }
            s.push((p[0] - x0[0]) * tau[0] + (p[1] - x0[1]) * tau[1]);
            sl.push(slope);
        }
        if !holder_ok(&s, &sl, gamma, opts.holder_cap) {
            return false;
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn disk() -> Patch {
        Patch::new(PatchSpec::fourier_disk(1.0, 1.0)).unwrap()
    }

    #[test]
    fn classify_disk() {
        for p in [disk(), Patch::new(PatchSpec::ball(2, 1.0, 1.0)).unwrap()] {
            let (t, d) = p.classify_with(&[0.0, 0.0], 1e-9).unwrap();
            assert_eq!(t, RegionTag::Interior);
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-12);
            let (t, d) = p.classify(&[2.0, 0.0]).unwrap();
            assert_eq!(t, RegionTag::Exterior);
            assert_abs_diff_eq!(d, 1.0, epsilon = 1e-12);
            let (t, d) = p.classify(&[1.0, 0.0]).unwrap();
            assert_eq!(t, RegionTag::Boundary);
            assert_abs_diff_eq!(d, 0.0, epsilon = 1e-12);
            assert!(p.classify(&[f64::NAN, 0.0]).is_err());
        }
    }

    #[test]
    fn radii_and_deltas() {
        let p = disk();
        assert_eq!(p.radii().r1, 0.5);
        assert_eq!(p.radii().r0, 0.25);
        let e = Patch::new(PatchSpec::ellipse(2.0, 1.0, 1.0)).unwrap();
        assert!(e.radii().r0 < p.radii().r0);
        let s = Patch::new(PatchSpec::ball(3, 1.0, 1.0)).unwrap();
        assert_eq!(s.radii(), p.radii());
        assert_abs_diff_eq!(p.delta(&[0.0, 0.0]).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.delta(&[0.9, 0.0]).unwrap(), 0.125, epsilon = 1e-12);
        assert_abs_diff_eq!(p.big_delta(&[3.0, 0.0]).unwrap().0, 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.big_delta(&[0.0, 0.0]).unwrap().0, 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.big_delta(&[2.0, 0.0]).unwrap().0, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn normals_and_graphs() {
        let p = disk();
        let nv = p.normal(&[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(nv[1], 1.0, epsilon = 1e-12);
        let e = Patch::new(PatchSpec::ellipse(2.0, 1.0, 1.0)).unwrap();
        let nv = e.normal(&[0.0, 1.0]).unwrap();
        assert_abs_diff_eq!(nv[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(nv[1], 1.0, epsilon = 1e-12);
        let g = e.local_graph(&[2.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g.normal[0], 1.0, epsilon = 1e-12);
        let g = p.local_graph(&[1.0, 0.0]).unwrap();
        assert_abs_diff_eq!(g.tangents[0][1], 1.0, epsilon = 1e-12);
        for s in [-0.4, -0.1, 0.0, 0.2, 0.45] {
            assert_abs_diff_eq!(g.phi(&[s]).unwrap(), (1.0 - s * s).sqrt() - 1.0, epsilon = 1e-12);
        }
        assert!(matches!(g.phi(&[0.7]), Err(Error::OutOfWindow { .. })));
        let h = 1e-6;
        let fd = (g.phi(&[h]).unwrap() - g.phi(&[-h]).unwrap()) / (2.0 * h);
        assert!(fd.abs() < 1e-6);
        assert!(matches!(p.normal(&[0.5, 0.0]), Err(Error::NotOnBoundary(_))));
    }

    #[test]
    fn rejects_clockwise_and_non_star() {
        let mut spec = PatchSpec::ellipse(1.0, 1.0, 1.0);
        if let BoundaryCurve::Fourier2d { sin_y, .. } = &mut spec.boundary {
            sin_y[1] = -1.0;
        }
        assert!(Patch::new(spec).is_err());
        assert!(Patch::new(PatchSpec::polar_cosine(0.2, 3, 1.0)).is_ok());
    }

    #[test]
    fn ray_crossings_disk() {
        let p = disk();
        let mut out = Vec::new();
        let inside = p.ray_crossings(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0], None, &mut out);
        assert!(inside);
        assert_eq!(out.len(), 1);
        assert_abs_diff_eq!(out[0], 1.0, epsilon = 1e-12);
        let inside = p.ray_crossings(&[-2.0, 0.5, 0.0], &[1.0, 0.0, 0.0], None, &mut out);
        assert!(!inside);
        assert_eq!(out.len(), 2);
        assert_abs_diff_eq!(out[0], 2.0 - 0.75f64.sqrt(), epsilon = 1e-11);
        let inside = p.ray_crossings(&[1.0, 0.0, 0.0], &[-1.0, 0.0, 0.0], Some(&[1.0, 0.0, 0.0]), &mut out);
        assert!(inside);
        assert_abs_diff_eq!(out[0], 2.0, epsilon = 1e-11);
    }

    #[test]
    fn fit_roundtrip() {
        let c = FourierCurve::new(&[0.1, 2.0, 0.05], &[0.0, 0.0, 0.02], &[0.0, 0.0, 0.01], &[0.0, 1.0, 0.0]);
        let ts: Vec<f64> = (0..64).map(|k| 2.0 * PI * k as f64 / 64.0).collect();
        let pts: Vec<[f64; 2]> = ts.iter().map(|&t| c.point(t)).collect();
        let (f, res) = FourierCurve::fit(&ts, &pts, 5).unwrap();
        assert!(res < 1e-12);
        assert_abs_diff_eq!(f.point(0.3)[0], c.point(0.3)[0], epsilon = 1e-12);
    }

    proptest! {
        #[test]
        fn classify_agrees_with_winding(x in -2.5f64..2.5, y in -1.5f64..1.5) {
            let e = Patch::new(PatchSpec::ellipse(2.0, 1.0, 1.0)).unwrap();
            let (tag, _) = e.classify(&[x, y]).unwrap();
            let inside = (x / 2.0).powi(2) + y * y < 1.0;
            if tag != RegionTag::Boundary {
                prop_assert_eq!(tag == RegionTag::Interior, inside);
            }
        }

        #[test]
        fn graph_is_tangent(t in 0.0f64..6.28) {
            let e = Patch::new(PatchSpec::ellipse(2.0, 1.0, 1.0)).unwrap();
            let x0 = [2.0 * t.cos(), t.sin()];
            let g = e.local_graph(&x0).unwrap();
            prop_assert!(g.phi(&[0.0]).unwrap().abs() < 1e-10);
            let h = 1e-6;
            let fd = (g.phi(&[h]).unwrap() - g.phi(&[-h]).unwrap()) / (2.0 * h);
            prop_assert!(fd.abs() < 1e-6);
        }
    }
}
