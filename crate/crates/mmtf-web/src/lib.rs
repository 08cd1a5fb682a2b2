//! wasm-bindgen entry points for the static demo page in `www/`.
//!
//! Each operation returns a JSON string; the `*_json` functions hold the logic
//! and are callable natively.

use mmtf_core::cutoff::Profile;
use mmtf_core::energy::{d_eps, LayerOpts, LocalParams, OmegaOps};
use mmtf_core::fields::{make_field, Init};
use mmtf_core::geometry::{Domain, Shape};
use mmtf_core::kernel::Method;
use mmtf_core::limits::{dyadic, Regime, RegimeParams};
use mmtf_core::meanfield::{wall_profile, MeanFieldParams};
use mmtf_core::minimize::{minimize, BoundaryHandling, LimitFunctional, MinimizeOptions, StepRule};
use serde::Serialize;
use wasm_bindgen::prelude::*;

#[derive(Serialize)]
struct DepsSeries {
    eps: Vec<f64>,
    abs_ln_eps: Vec<f64>,
    d_eps: Vec<f64>,
    slope: f64,
    boundary_length: f64,
}

#[derive(Serialize)]
struct Wall {
    x: Vec<f64>,
    phi: Vec<f64>,
    s0: f64,
    g: f64,
    minimal_energy: f64,
}

#[derive(Serialize)]
struct Relaxed {
    nx: usize,
    ny: usize,
    /// `m∥` per cell, row-major; `null` outside the domain.
    mz: Vec<Option<f64>>,
    history: Vec<f64>,
    skyrmion_number: f64,
    iterations: usize,
    converged: bool,
}

fn shape(kind: &str, a: f64, b: f64) -> Result<Shape, String> {
    match kind {
        "disk" => Ok(Shape::Disk { r: a }),
        "ellipse" => Ok(Shape::Ellipse { a, b }),
        other => Err(format!("unknown shape '{other}'")),
    }
}

/// `D_ε` on a disk or ellipse for `steps` dyadic values `2^-from .. 2^-to`,
/// with the least-squares slope against `|ln ε|`.
pub fn d_eps_series_json(kind: &str, a: f64, b: f64, from: f64, to: f64, steps: usize) -> Result<String, String> {
    let dom = Domain::new(shape(kind, a, b)?, 0.5).map_err(|e| e.to_string())?;
    let eps = dyadic(from, to, steps).map_err(|e| e.to_string())?;
    let opts = LayerOpts { n_s: 512, ..LayerOpts::default() };
    let d = eps
        .iter()
        .map(|&e| d_eps(&Profile::Linear, &dom, e, &opts))
        .collect::<Result<Vec<f64>, _>>()
        .map_err(|e| e.to_string())?;
    let l: Vec<f64> = eps.iter().map(|e| e.ln().abs()).collect();
    let n = l.len() as f64;
    let (mx, my) = (l.iter().sum::<f64>() / n, d.iter().sum::<f64>() / n);
    let sxy: f64 = l.iter().zip(&d).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = l.iter().map(|x| (x - mx).powi(2)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    let out = DepsSeries { eps, abs_ln_eps: l, d_eps: d, slope, boundary_length: dom.length() };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Mean-field edge profile at inverse temperature `beta`.
pub fn wall_profile_json(beta: f64, j0: f64, delta: f64, x_max: f64, n: usize) -> Result<String, String> {
    let p = MeanFieldParams::new(beta, j0, delta).map_err(|e| e.to_string())?;
    let w = wall_profile(&p, x_max, n, [0.0, 0.0, 1.0]).map_err(|e| e.to_string())?;
    let out = Wall { x: w.x, phi: w.phi, s0: w.s0, g: w.g, minimal_energy: w.minimal_energy };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Relaxes a Néel skyrmion on the unit disk under the clamped local limit
/// functional (`clamp = ±1`) or the free GJ functional (`clamp = 0`).
pub fn relax_skyrmion_json(lambda: f64, beta_z: f64, clamp: f64, n: usize, max_iter: usize) -> Result<String, String> {
    let dom = Domain::new(Shape::Disk { r: 1.0 }, 0.5).map_err(|e| e.to_string())?;
    let ops = OmegaOps::for_domain(&dom, n, 256).map_err(|e| e.to_string())?;
    let far = if clamp < 0.0 { -1.0 } else { 1.0 };
    let init = Init::NeelSkyrmion { center: [0.0, 0.0], r0: 0.25, polarity: -far, chirality: -1.0, cutoff: Some(0.8) };
    let f0 = make_field(ops.grid, ops.mask.clone(), &init).map_err(|e| e.to_string())?;
    let local = LocalParams { lambda, alpha: 0.0, beta_z };
    let (regime, boundary) = if clamp == 0.0 {
        (Regime::Gj, BoundaryHandling::Free)
    } else {
        (Regime::ClampedLocal, BoundaryHandling::Clamped(far))
    };
    let rp = RegimeParams::new(regime, local, regime.default_strength(), 0.01).map_err(|e| e.to_string())?;
    let opts = MinimizeOptions { step: StepRule::Backtracking, max_iter, tol: 1e-5, boundary };
    let func = LimitFunctional::new(&ops, rp, Method::Fft);
    let res = minimize(&f0, &func, &opts, &ops.trace.support()).map_err(|e| e.to_string())?;
    let mz = res.field.m.iter().zip(&res.field.mask).map(|(v, &k)| k.then_some(v[2])).collect();
    let out = Relaxed {
        nx: res.field.grid.nx,
        ny: res.field.grid.ny,
        mz,
        history: res.history,
        skyrmion_number: res.field.skyrmion_number(),
        iterations: res.iterations,
        converged: res.converged,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

#[wasm_bindgen]
pub fn d_eps_series(kind: &str, a: f64, b: f64, from: f64, to: f64, steps: usize) -> Result<String, JsValue> {
    d_eps_series_json(kind, a, b, from, to, steps).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn edge_profile(beta: f64, j0: f64, delta: f64, x_max: f64, n: usize) -> Result<String, JsValue> {
    wall_profile_json(beta, j0, delta, x_max, n).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn relax_skyrmion(lambda: f64, beta_z: f64, clamp: f64, n: usize, max_iter: usize) -> Result<String, JsValue> {
    relax_skyrmion_json(lambda, beta_z, clamp, n, max_iter).map_err(|e| JsValue::from_str(&e))
}
