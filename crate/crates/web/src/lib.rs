//! wasm-bindgen exports for `www/index.html`. Each call returns a JSON
//! string for the page to plot.

pub mod demo;

use wasm_bindgen::prelude::*;

fn to_js<T: serde::Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    r.and_then(|v| serde_json::to_string(&v).map_err(|e| e.to_string())).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn eight_electrode_profile(u1: f64, u3: f64, cells: usize) -> Result<String, JsValue> {
    to_js(demo::eight_electrode_profile(u1, u3, cells))
}

#[wasm_bindgen]
pub fn ensemble_emission(n_atoms: usize, lx_mm: f64, delta_nu_ghz: f64, ratio: f64, samples: usize) -> Result<String, JsValue> {
    to_js(demo::ensemble_emission(n_atoms, lx_mm, delta_nu_ghz, ratio, samples))
}

#[wasm_bindgen]
pub fn propagation_sweep(max_od: f64, points: usize) -> Result<String, JsValue> {
    to_js(demo::propagation_sweep(max_od, points))
}
