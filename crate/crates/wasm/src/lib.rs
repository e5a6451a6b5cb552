//! Browser entry points. Every export takes plain numbers and returns a JSON
//! string; the page parses it. The `*_json` functions are the same calls
//! without the JS error type, so they can be tested natively.

use cloner_core::channel::{apply_cloner, ClonerConfig};
use cloner_core::metrics::{evaluate, PHASE_DETERMINISTIC_FIDELITY};
use cloner_core::optimizer::{optimize_x, XGrid};
use cloner_core::states::{wigner, GridSpec};
use cloner_core::ClonerError;
use serde::Serialize;
use wasm_bindgen::prelude::*;

const MAX_GRID_POINTS: usize = 401;

#[derive(Serialize)]
struct WignerView {
    n: usize,
    half_width: f64,
    /// Row-major, row index along x.
    values: Vec<f64>,
    min: f64,
    max: f64,
    peak: [f64; 2],
    integral: f64,
}

#[derive(Serialize)]
struct ScanRow {
    threshold: u32,
    fidelity: Option<f64>,
    success_probability: Option<f64>,
    gain: Option<f64>,
    beats_benchmark: bool,
}

#[derive(Serialize)]
struct Optimum {
    x: f64,
    fidelity: f64,
    success_probability: f64,
    gain: Option<f64>,
    /// `[x, F]` pairs on the search grid; unheraldable points are skipped.
    curve: Vec<[f64; 2]>,
}

fn to_json<T: Serialize>(v: &T) -> Result<String, String> {
    serde_json::to_string(v).map_err(|e| e.to_string())
}

fn checked(alpha: f64, x: f64, threshold: u32) -> Result<ClonerConfig, String> {
    let cfg = ClonerConfig::experimental(alpha, x, threshold);
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

pub fn wigner_grid_json(alpha: f64, x: f64, threshold: u32, half_width: f64, points: usize) -> Result<String, String> {
    if !(2..=MAX_GRID_POINTS).contains(&points) {
        return Err(format!("points must be in 2..={MAX_GRID_POINTS}"));
    }
    let out = apply_cloner(&checked(alpha, x, threshold)?).map_err(|e| e.to_string())?;
    let grid = wigner(&out.clone_ensemble(), &GridSpec::square(half_width, points)).map_err(|e| e.to_string())?;
    let values: Vec<f64> = grid.values.iter().flatten().copied().collect();
    let (px, pp, _) = grid.peak();
    to_json(&WignerView {
        n: points,
        half_width,
        min: values.iter().copied().fold(f64::INFINITY, f64::min),
        max: values.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        integral: grid.integral(),
        peak: [px, pp],
        values,
    })
}

pub fn threshold_scan_json(alpha: f64, x: f64, max_threshold: u32) -> Result<String, String> {
    checked(alpha, x, 0)?;
    let mut rows = Vec::new();
    for m in 0..=max_threshold {
        let row = match evaluate(&ClonerConfig::experimental(alpha, x, m)) {
            Ok(v) => ScanRow {
                threshold: m,
                fidelity: Some(v.fidelity),
                success_probability: Some(v.success_probability),
                gain: v.gain,
                beats_benchmark: v.beats_phase_benchmark,
            },
            Err(ClonerError::Unheraldable) => ScanRow {
                threshold: m,
                fidelity: None,
                success_probability: None,
                gain: None,
                beats_benchmark: false,
            },
            Err(e) => return Err(e.to_string()),
        };
        rows.push(row);
    }
    to_json(&rows)
}

pub fn optimize_displacement_json(alpha: f64, threshold: u32, x_max: f64, step: f64) -> Result<String, String> {
    let base = checked(alpha, 0.0, threshold)?;
    let grid = XGrid {
        min: 0.0,
        max: x_max,
        step,
    };
    grid.validate().map_err(|e| e.to_string())?;
    let best = optimize_x(&base, &grid).map_err(|e| e.to_string())?;
    let curve = grid
        .points()
        .into_iter()
        .filter_map(|x| evaluate(&base.with_x(x)).ok().map(|m| [x, m.fidelity]))
        .collect();
    let at = evaluate(&base.with_x(best.x)).map_err(|e| e.to_string())?;
    to_json(&Optimum {
        x: best.x,
        fidelity: best.fidelity,
        success_probability: at.success_probability,
        gain: at.gain,
        curve,
    })
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn phase_benchmark() -> f64 {
    PHASE_DETERMINISTIC_FIDELITY
}

#[wasm_bindgen]
pub fn wigner_grid(alpha: f64, x: f64, threshold: u32, half_width: f64, points: usize) -> Result<String, JsError> {
    js(wigner_grid_json(alpha, x, threshold, half_width, points))
}

#[wasm_bindgen]
pub fn threshold_scan(alpha: f64, x: f64, max_threshold: u32) -> Result<String, JsError> {
    js(threshold_scan_json(alpha, x, max_threshold))
}

#[wasm_bindgen]
pub fn optimize_displacement(alpha: f64, threshold: u32, x_max: f64, step: f64) -> Result<String, JsError> {
    js(optimize_displacement_json(alpha, threshold, x_max, step))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::Value;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn wigner_is_normalised() {
        let v = parse(wigner_grid_json(1.0, 0.5, 2, 6.0, 121));
        assert_eq!(v["values"].as_array().unwrap().len(), 121 * 121);
        assert!((v["integral"].as_f64().unwrap() - 1.0).abs() < 1e-3);
        assert!(wigner_grid_json(1.0, 0.5, 2, 6.0, 1000).is_err());
    }

    #[test]
    fn scan_marks_unheraldable() {
        let v = parse(threshold_scan_json(0.0, 0.5, 2));
        assert_eq!(v[0]["success_probability"], 1.0);
        assert!(v[1]["fidelity"].is_null());
        assert!(threshold_scan_json(f64::NAN, 0.5, 2).is_err());
    }

    #[test]
    fn optimum_tops_curve() {
        let v = parse(optimize_displacement_json(1.0, 3, 1.5, 0.05));
        let best = v["fidelity"].as_f64().unwrap();
        let curve = v["curve"].as_array().unwrap();
        assert_eq!(curve.len(), 31);
        assert!(curve.iter().all(|p| p[1].as_f64().unwrap() <= best));
        assert!(best > phase_benchmark());
    }
}
