//! Browser bindings. Every entry point takes a distribution spec as JSON and
//! returns a JSON document for the page to plot.

use cesaro_core::convergence::{run_lp_experiment, trend_test};
use cesaro_core::cui::{cesaro_tail_sup, default_level_grid};
use cesaro_core::moments::{doubling_schedule, pow2_schedule};
use cesaro_core::poussin::{phi_eval, phi_for_source, phi_grid, thresholds_from_cui, DEFAULT_LEVEL_CAP};
use cesaro_core::{DistributionSpec, ExperimentConfig, Indicator, MomentSource, MultiIndex};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

const MAX_REPS: usize = 2000;
const CURVE_POINTS: usize = 400;

fn spec(json: &str) -> Result<DistributionSpec, String> {
    serde_json::from_str(json).map_err(|e| format!("bad distribution spec: {e}"))
}

fn source(spec: &DistributionSpec, horizon: u64, d: usize, reps: usize, seed: u64) -> Result<MomentSource, String> {
    let h = MultiIndex::new(vec![horizon; d]).map_err(|e| e.to_string())?;
    MomentSource::new(spec, &h, &pow2_schedule(&h), reps, seed).map_err(|e| e.to_string())
}

fn finish(v: Value) -> Result<String, String> {
    serde_json::to_string(&v).map_err(|e| e.to_string())
}

/// Normalized L_p moment of the maximal partial sums over a doubling schedule
/// in `d` dimensions, from |n| = 2^4 up to 2^hi.
pub fn lp_series(spec_json: &str, p: f64, d: usize, hi: u32, reps: usize, seed: u64) -> Result<String, String> {
    if !(1..=MAX_REPS).contains(&reps) {
        return Err(format!("reps must be in 1..={MAX_REPS}"));
    }
    if !(4..=14).contains(&hi) {
        return Err("largest exponent must be in 4..=14".into());
    }
    let cfg = ExperimentConfig {
        spec: spec(spec_json)?,
        p,
        n_schedule: doubling_schedule(d, 4, hi).map_err(|e| e.to_string())?,
        reps,
        seed,
        center: false,
        bound_params: None,
    };
    let series = run_lp_experiment(&cfg).map_err(|e| e.to_string())?;
    let trend = trend_test(&series).map_err(|e| e.to_string())?;
    let points: Vec<Value> = series
        .points
        .iter()
        .map(|pt| json!({"size": pt.size, "moment": pt.moment, "stderr": pt.stderr}))
        .collect();
    finish(json!({"points": points, "slope": trend.slope, "trend_pass": trend.pass}))
}

/// Tail thresholds of the family on a one-dimensional horizon and the
/// resulting phi sampled on its domain, with phi(t)/t.
pub fn phi_curve(spec_json: &str, p: f64, horizon: u64, j_max: usize) -> Result<String, String> {
    if !(1..=20).contains(&j_max) {
        return Err("j_max must be in 1..=20".into());
    }
    let src = source(&spec(spec_json)?, horizon, 1, 1, 0)?;
    let thresholds = thresholds_from_cui(&src, p, j_max, DEFAULT_LEVEL_CAP).map_err(|e| e.to_string())?;
    let phi = phi_for_source(&src, p, &thresholds).map_err(|e| e.to_string())?;
    let mut t = Vec::new();
    let mut values = Vec::new();
    for x in phi_grid(&phi, CURVE_POINTS) {
        t.push(x);
        values.push(phi_eval(&phi, x).map_err(|e| e.to_string())?);
    }
    finish(json!({"thresholds": thresholds, "t": t, "phi": values, "n_max": phi.n_max()}))
}

/// Cesaro tail sup over truncation levels on the default grid.
pub fn tail_curve(spec_json: &str, p: f64, horizon: u64, d: usize, reps: usize, seed: u64) -> Result<String, String> {
    if !(1..=MAX_REPS).contains(&reps) {
        return Err(format!("reps must be in 1..={MAX_REPS}"));
    }
    let src = source(&spec(spec_json)?, horizon, d, reps, seed)?;
    let mut a = Vec::new();
    let mut tail = Vec::new();
    let mut stderr = Vec::new();
    for level in default_level_grid() {
        let e = cesaro_tail_sup(&src, p, level, Indicator::Strict).map_err(|e| e.to_string())?;
        a.push(level);
        tail.push(e.value);
        stderr.push(e.stderr);
    }
    finish(json!({"a": a, "tail_sup": tail, "stderr": stderr}))
}

#[wasm_bindgen(js_name = lpSeries)]
pub fn lp_series_js(spec_json: &str, p: f64, d: usize, hi: u32, reps: usize, seed: u32) -> Result<String, JsError> {
    lp_series(spec_json, p, d, hi, reps, seed as u64).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = phiCurve)]
pub fn phi_curve_js(spec_json: &str, p: f64, horizon: f64, j_max: usize) -> Result<String, JsError> {
    phi_curve(spec_json, p, horizon as u64, j_max).map_err(|e| JsError::new(&e))
}

#[wasm_bindgen(js_name = tailCurve)]
pub fn tail_curve_js(spec_json: &str, p: f64, horizon: f64, d: usize, reps: usize, seed: u32) -> Result<String, JsError> {
    tail_curve(spec_json, p, horizon as u64, d, reps, seed as u64).map_err(|e| JsError::new(&e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const PARETO: &str = r#"{"family":"pareto_radial","params":{"alpha":3.0,"scale":1.0},"dim_D":8,"moment_mode":"analytic"}"#;
    const CONSTANT: &str = r#"{"family":"constant","params":{"value":1.0},"dim_D":1,"moment_mode":"analytic"}"#;
    const GROWING: &str = r#"{"family":"growing_non_cui","params":{"exponent":0.5},"dim_D":1,"moment_mode":"analytic"}"#;

    fn parse(s: Result<String, String>) -> Value {
        serde_json::from_str(&s.unwrap()).unwrap()
    }

    #[test]
    fn lp_series_decays() {
        let v = parse(lp_series(PARETO, 0.5, 1, 10, 50, 3));
        let pts = v["points"].as_array().unwrap();
        assert_eq!(pts.len(), 7);
        assert!(v["trend_pass"].as_bool().unwrap());
        assert!(pts[6]["moment"].as_f64().unwrap() < pts[0]["moment"].as_f64().unwrap());
    }

    #[test]
    fn phi_curve_for_constant() {
        let v = parse(phi_curve(CONSTANT, 1.0, 64, 4));
        let n: Vec<u64> = serde_json::from_value(v["thresholds"].clone()).unwrap();
        assert_eq!(n, vec![2, 3, 4, 5]);
        let phi = v["phi"].as_array().unwrap();
        assert_eq!(phi.len(), v["t"].as_array().unwrap().len());
        assert!(phi.windows(2).all(|w| w[0].as_f64() <= w[1].as_f64()));
    }

    #[test]
    fn tail_curve_is_monotone() {
        let v = parse(tail_curve(PARETO, 1.0, 32, 2, 1, 0));
        let t: Vec<f64> = serde_json::from_value(v["tail_sup"].clone()).unwrap();
        assert_eq!(t.len(), default_level_grid().len());
        assert!(t.windows(2).all(|w| w[1] <= w[0] + 1e-12));
    }

    #[test]
    fn unbounded_family_has_no_phi() {
        assert!(phi_curve(GROWING, 1.0, 1024, 8).is_err());
    }

    #[test]
    fn bad_input_is_reported() {
        assert!(lp_series("{}", 0.5, 1, 10, 10, 0).unwrap_err().contains("spec"));
        assert!(tail_curve(PARETO, 1.0, 8, 1, 0, 0).is_err());
        assert!(lp_series(PARETO, 0.5, 1, 20, 10, 0).is_err());
    }
}
