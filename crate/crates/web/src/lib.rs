//! WebAssembly bindings for the demo page in `www/`.
//!
//! The plain functions carry the logic and are what the native tests call; the `js_*` wrappers only
//! translate errors for JavaScript.

use patchflow::evolution::{ode_flow, transport_rescale, OdeConfig};
use patchflow::field::PartConstant;
use patchflow::singular::riesz_pv;
use patchflow::{Patch, PatchSpec, Result};
use wasm_bindgen::prelude::*;

fn ellipse(a: f64, b: f64, c: f64) -> Result<Patch> {
    Patch::new(PatchSpec::ellipse(a, b, c))
}

/// Boundary of the ellipse patch `x²/a² + y²/b² ≤ 1` with density `c` at time `t`, as flat `[x0, y0, x1, y1, …]`.
/// Uses the contour-dynamics solver with `markers` boundary points.
pub fn evolve_ellipse(a: f64, b: f64, c: f64, t: f64, markers: usize) -> Result<Vec<f64>> {
    let patch = ellipse(a, b, c)?;
    let cfg = OdeConfig { dt: 5e-3, markers: markers.max(16) & !1 };
    let run = ode_flow(&patch, &[], t, &cfg)?;
    Ok(run.state.boundary_polyline(markers.max(16)).into_iter().flat_map(|p| p).collect())
}

/// Radius of the collapsing disk of radius `r` and density `c`: `r (1 − ct)^{1/2}`.
pub fn disk_radius(r: f64, c: f64, t: f64) -> Result<f64> {
    let s = transport_rescale(t, c)?;
    Ok(r * (-s).exp().sqrt())
}

/// Riesz transform `R_{j,i}[χ_Ω](x, y)` for the ellipse (`j, i ∈ {0, 1}`).
pub fn riesz_indicator(a: f64, b: f64, j: usize, i: usize, x: f64, y: f64) -> Result<f64> {
    let patch = ellipse(a, b, 1.0)?;
    Ok(riesz_pv(&patch, &PartConstant::indicator(1.0), j, i, &[x, y])?.value)
}

fn js(e: patchflow::Error) -> JsError {
    JsError::new(&e.to_string())
}

#[wasm_bindgen(js_name = evolveEllipse)]
pub fn js_evolve_ellipse(a: f64, b: f64, c: f64, t: f64, markers: usize) -> std::result::Result<Vec<f64>, JsError> {
    evolve_ellipse(a, b, c, t, markers).map_err(js)
}

#[wasm_bindgen(js_name = diskRadius)]
pub fn js_disk_radius(r: f64, c: f64, t: f64) -> std::result::Result<f64, JsError> {
    disk_radius(r, c, t).map_err(js)
}

#[wasm_bindgen(js_name = rieszIndicator)]
pub fn js_riesz_indicator(a: f64, b: f64, j: usize, i: usize, x: f64, y: f64) -> std::result::Result<f64, JsError> {
    riesz_indicator(a, b, j, i, x, y).map_err(js)
}
