//! Browser bindings for the interactive demo page.
//!
//! Three operations, each returning a JSON string the page plots on a
//! canvas: the t-copula tail-dependence curve λ(σ), the extra mutual
//! information I(ν, n) of the t copula against 1/ν, and a small synthetic
//! detection experiment producing ROC curves for the fourth-cumulant and RX
//! detectors.

use wasm_bindgen::prelude::*;

use cumulant_outliers::{
    c4_beta_sweep, make_experiment, mi_student_extra, roc_curve, rx_quantile_sweep,
    tail_dependence, BetaGrid,
};

fn err_to_js(e: cumulant_outliers::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Tail dependence λ of the bivariate t-Student copula as a function of the
/// correlation σ, for a fixed copula dof. Returns
/// `[{"sigma": …, "lambda": …}, …]`.
#[wasm_bindgen]
pub fn tail_dependence_curve(nu_c: f64, points: usize) -> Result<String, JsValue> {
    let points = points.clamp(2, 2000);
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        let sigma = -0.95 + (1.0 - -0.95) * i as f64 / (points - 1) as f64;
        let sigma = sigma.min(1.0);
        let lambda = tail_dependence(sigma, nu_c).map_err(err_to_js)?;
        out.push(serde_json::json!({ "sigma": sigma, "lambda": lambda }));
    }
    Ok(serde_json::Value::Array(out).to_string())
}

/// Extra mutual information of the t-Student copula over the Gaussian one,
/// sampled on a 1/ν grid (ν from 3 to `nu_max`). Returns
/// `[{"nu": …, "inv_nu": …, "i": …}, …]`.
#[wasm_bindgen]
pub fn mutual_info_curve(n: usize, nu_max: f64, points: usize) -> Result<String, JsValue> {
    let points = points.clamp(2, 2000);
    let nu_max = nu_max.clamp(4.0, 1e7);
    let mut out = Vec::with_capacity(points);
    for i in 0..points {
        // uniform in 1/ν between 1/nu_max and 1/3
        let inv = 1.0 / nu_max + (1.0 / 3.0 - 1.0 / nu_max) * i as f64 / (points - 1) as f64;
        let nu = 1.0 / inv;
        let value = mi_student_extra(nu, n).map_err(err_to_js)?;
        out.push(serde_json::json!({ "nu": nu, "inv_nu": inv, "i": value }));
    }
    Ok(serde_json::Value::Array(out).to_string())
}

/// Generate a labeled crisis dataset and sweep both detectors, returning
/// ROC curves:
/// `{"c4": {"points": [{"beta","fpr","tpr"}…], "auc": …}, "rx": {…},
///   "subset": […], "t": …, "tau": …}`.
#[wasm_bindgen]
pub fn run_demo_experiment(
    t: usize,
    n: usize,
    tau: usize,
    nu_c: u64,
    r: usize,
    seed: u64,
) -> Result<String, JsValue> {
    // clamp to sizes a browser tab handles comfortably
    let t = t.clamp(100, 2000);
    let n = n.clamp(2, 30);
    let tau = tau.clamp(1, t / 2 - 1);
    let r = r.clamp(1, n);
    let ds = make_experiment(t, tau, n, nu_c, 6.0, seed).map_err(err_to_js)?;
    let grid = BetaGrid {
        start: 1.0,
        stop: 5.0,
        step: 0.5,
    };
    let betas = grid.values().map_err(err_to_js)?;
    let c4 = roc_curve(
        &c4_beta_sweep(&ds.data, &betas, r).map_err(err_to_js)?,
        &ds.labels,
    )
    .map_err(err_to_js)?;
    let rx = roc_curve(
        &rx_quantile_sweep(&ds.data, betas.len()).map_err(err_to_js)?,
        &ds.labels,
    )
    .map_err(err_to_js)?;
    let payload = serde_json::json!({
        "c4": c4,
        "rx": rx,
        "subset": ds.meta.subset,
        "t": t,
        "tau": tau,
        "n": n,
    });
    Ok(payload.to_string())
}
