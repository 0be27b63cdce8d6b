//! Quadrature building blocks: Gauss–Legendre, adaptive Gauss–Kronrod, Chebyshev/Fejér
//! grids, Lagrange and barycentric interpolation, and a bracketing root finder.

use gauss_quad::GaussLegendre;
use std::collections::HashMap;
use std::num::NonZeroUsize;
use std::sync::{Arc, Mutex, OnceLock};

/// Gauss–Legendre nodes and weights on `[-1, 1]`, ascending, cached per order.
pub fn gauss_legendre(n: usize) -> Arc<Vec<(f64, f64)>> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<Vec<(f64, f64)>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().expect("quadrature cache poisoned");
    guard
        .entry(n)
        .or_insert_with(|| {
            let rule = GaussLegendre::new(NonZeroUsize::new(n.max(1)).unwrap());
            let mut v: Vec<(f64, f64)> = rule.as_node_weight_pairs().iter().copied().collect();
            v.sort_by(|a, b| a.0.total_cmp(&b.0));
            Arc::new(v)
        })
        .clone()
}

/// Gauss–Legendre rule mapped to `[0, 1]`.
pub fn gauss_legendre_unit(n: usize) -> Vec<(f64, f64)> {
    gauss_legendre(n).iter().map(|&(x, w)| (0.5 * (x + 1.0), 0.5 * w)).collect()
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Settings for [`adaptive_gk15`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self { abs_tol: 1e-10, rel_tol: 1e-8, max_panels: 200 }
    }
}

struct Panel {
    a: f64,
    b: f64,
    val: Vec<f64>,
    err: f64,
}

fn gk15_panel<F: FnMut(f64, &mut [f64])>(f: &mut F, a: f64, b: f64, dim: usize, buf: &mut [f64]) -> Panel {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut k = vec![0.0; dim];
    let mut g = vec![0.0; dim];
    let mut acc = |x: f64, wk: f64, wg: f64, buf: &mut [f64], f: &mut F| {
        f(x, buf);
        for d in 0..dim {
            k[d] += wk * buf[d];
            g[d] += wg * buf[d];
        }
    };
    acc(c, WGK[7], WG[3], buf, f);
    for idx in 0..7 {
        let wg = if idx % 2 == 1 { WG[idx / 2] } else { 0.0 };
        let dx = h * XGK[idx];
        acc(c - dx, WGK[idx], wg, buf, f);
        acc(c + dx, WGK[idx], wg, buf, f);
    }
    let mut err: f64 = 0.0;
    for d in 0..dim {
        k[d] *= h;
        g[d] *= h;
        err = err.max((k[d] - g[d]).abs());
    }
    Panel { a, b, val: k, err }
}

/// Adaptive Gauss–Kronrod (7/15) integration of a vector-valued integrand.
///
/// `breaks` must be ascending and include both endpoints; each initial interval
/// becomes one panel. Returns the integral and the summed error estimate.
pub fn adaptive_gk15<F: FnMut(f64, &mut [f64])>(
    mut f: F,
    breaks: &[f64],
    dim: usize,
    opts: AdaptiveOptions,
) -> (Vec<f64>, f64) {
    let mut buf = vec![0.0; dim];
    let mut panels: Vec<Panel> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15_panel(&mut f, w[0], w[1], dim, &mut buf))
        .collect();
    loop {
        let mut total = vec![0.0; dim];
        let mut err = 0.0;
        let mut worst = 0;
        for (idx, p) in panels.iter().enumerate() {
            for d in 0..dim {
                total[d] += p.val[d];
            }
            err += p.err;
            if p.err > panels[worst].err {
                worst = idx;
            }
        }
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if panels.is_empty() || err <= opts.abs_tol.max(opts.rel_tol * scale) || panels.len() >= opts.max_panels {
            return (total, err);
        }
        let p = panels.swap_remove(worst);
        let m = 0.5 * (p.a + p.b);
        panels.push(gk15_panel(&mut f, p.a, m, dim, &mut buf));
        panels.push(gk15_panel(&mut f, m, p.b, dim, &mut buf));
    }
}

/// Chebyshev points of the first kind mapped to `(0, 1)`, ascending.
pub fn chebyshev_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let th = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
            0.5 * (1.0 - th.cos())
        })
        .collect()
}

/// Fejér (first rule) weights on `(0, 1)` matching [`chebyshev_nodes`].
pub fn fejer_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let th = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
            let s: f64 = (1..=n / 2)
                .map(|m| (2.0 * m as f64 * th).cos() / (4.0 * (m * m) as f64 - 1.0))
                .sum();
            (1.0 - 2.0 * s) / n as f64
        })
        .collect()
}

/// Barycentric weights for Chebyshev points of the first kind (ascending order).
pub fn chebyshev_bary_weights(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| {
            let th = (2 * k + 1) as f64 * std::f64::consts::PI / (2 * n) as f64;
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sign * th.sin()
        })
        .collect()
}

/// Barycentric interpolation (also valid as extrapolation for points just outside the node range).
pub fn barycentric_weights_at(nodes: &[f64], bary: &[f64], x: f64, out: &mut [f64]) {
    if let Some(k) = nodes.iter().position(|&t| t == x) {
        out.iter_mut().for_each(|w| *w = 0.0);
        out[k] = 1.0;
        return;
    }
    let mut s = 0.0;
    for k in 0..nodes.len() {
        out[k] = bary[k] / (x - nodes[k]);
        s += out[k];
    }
    for w in out.iter_mut() {
        *w /= s;
    }
}

/// Lagrange basis values of `nodes` at `x`.
#[inline]
pub fn lagrange_weights(nodes: &[f64], x: f64, out: &mut [f64]) {
    let m = nodes.len();
    // numerators from prefix/suffix products: exact at the nodes and only `m` divisions
    let mut acc = 1.0;
    for k in 0..m {
        out[k] = acc;
        acc *= x - nodes[k];
    }
    acc = 1.0;
    for k in (0..m).rev() {
        let mut den = 1.0;
        for l in 0..m {
            if l != k {
                den *= nodes[k] - nodes[l];
            }
        }
        out[k] *= acc / den;
        acc *= x - nodes[k];
    }
}

/// Brent's method on a bracket with `fa * fb <= 0`.
pub fn brent<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, mut fa: f64, mut fb: f64, tol: f64) -> f64 {
    if fa == 0.0 {
        return a;
    }
    if fb == 0.0 {
        return b;
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..200 {
        if fb * fc > 0.0 {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return b;
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = f(b);
    }
    b
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn gauss_exactness() {
        let r = gauss_legendre_unit(8);
        let v: f64 = r.iter().map(|&(x, w)| w * x.powi(15)).sum();
        assert_abs_diff_eq!(v, 1.0 / 16.0, epsilon = 1e-14);
    }

    #[test]
    fn fejer_integrates_polynomials() {
        let x = chebyshev_nodes(12);
        let w = fejer_weights(12);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(7)).sum();
        assert_abs_diff_eq!(v, 1.0 / 8.0, epsilon = 1e-13);
    }

    #[test]
    fn adaptive_handles_kinks() {
        let (v, _) = adaptive_gk15(
            |x, out| {
                out[0] = (x - 0.3).abs();
                out[1] = x.sin();
            },
            &[0.0, 1.0],
            2,
            AdaptiveOptions { abs_tol: 1e-12, rel_tol: 1e-12, max_panels: 400 },
        );
        assert_abs_diff_eq!(v[0], 0.5 * (0.09 + 0.49), epsilon = 1e-10);
        assert_abs_diff_eq!(v[1], 1.0 - 1f64.cos(), epsilon = 1e-12);
    }

    #[test]
    fn barycentric_extrapolates_to_endpoint() {
        let x = chebyshev_nodes(10);
        let b = chebyshev_bary_weights(10);
        let mut w = vec![0.0; 10];
        barycentric_weights_at(&x, &b, 1.0, &mut w);
        let v: f64 = x.iter().zip(&w).map(|(x, w)| w * (2.0 * x).exp()).sum();
        assert_abs_diff_eq!(v, 2f64.exp(), epsilon = 1e-8);
    }

    #[test]
    fn brent_finds_root() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, -2.0, 2.0, 1e-14);
        assert_abs_diff_eq!(r, 2f64.sqrt(), epsilon = 1e-12);
    }
}
