//! WebAssembly bindings behind `www/index.html`.
//!
//! Every export takes and returns JSON strings so the page needs no glue
//! beyond the generated loader. The plain functions are usable natively.

use gsprt::gsprt::{first_order_thresholds, second_order_thresholds, GsprtState, Thresholds, TypeStatistic};
use gsprt::montecarlo::trial_rng;
use gsprt::{Distribution, LinearFamily, Projector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// The finite model shared by every call.
#[derive(Debug, Clone, Deserialize)]
pub struct Model {
    pub p0: Distribution,
    pub gamma: LinearFamily,
}

impl Model {
    fn projector(self) -> Result<Projector, String> {
        Projector::new(self.p0, self.gamma).map_err(|e| e.to_string())
    }
}

fn parse<T: for<'de> Deserialize<'de>>(what: &str, text: &str) -> Result<T, String> {
    serde_json::from_str(text).map_err(|e| format!("{what}: {e}"))
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string(v).expect("demo results serialize")
}

#[derive(Debug, Serialize)]
pub struct Projection {
    pub gamma_tilde: Vec<f64>,
    pub f_value: f64,
    pub active_set: Vec<usize>,
    pub kkt_residual: f64,
    /// Corners of the feasible region, for drawing on the triangle.
    pub region: Vec<Vec<f64>>,
}

/// Projects `q` (default `p0`) onto the uncertainty set.
pub fn project_json(model: &str, q: Option<&str>) -> Result<String, String> {
    let proj = parse::<Model>("model", model)?.projector()?;
    let q = match q {
        Some(text) if !text.trim().is_empty() => parse::<Distribution>("q", text)?,
        _ => proj.p0().clone(),
    };
    let r = proj.project(&q).map_err(|e| e.to_string())?;
    Ok(to_json(&Projection {
        gamma_tilde: r.gamma_tilde.probs().to_vec(),
        f_value: r.f_value,
        active_set: r.active_set.clone(),
        kkt_residual: r.kkt_residual,
        region: ternary_region(proj.family()),
    }))
}

/// Vertices of a three-symbol family, in boundary order.
fn ternary_region(family: &LinearFamily) -> Vec<Vec<f64>> {
    if family.dim() != 3 {
        return Vec::new();
    }
    // clip the simplex triangle by each half-plane in turn
    let mut poly: Vec<[f64; 3]> = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    for (row, &b) in family.rows().iter().zip(family.rhs()) {
        let side = |p: &[f64; 3]| b - (row[0] * p[0] + row[1] * p[1] + row[2] * p[2]);
        let mut next = Vec::new();
        for k in 0..poly.len() {
            let (a, c) = (poly[k], poly[(k + 1) % poly.len()]);
            let (sa, sc) = (side(&a), side(&c));
            if sa >= 0.0 {
                next.push(a);
            }
            if (sa >= 0.0) != (sc >= 0.0) {
                let t = sa / (sa - sc);
                next.push([0, 1, 2].map(|i| a[i] + t * (c[i] - a[i])));
            }
        }
        poly = next;
    }
    poly.into_iter().map(|p| p.to_vec()).collect()
}

#[derive(Debug, Deserialize)]
pub struct TrajectoryRequest {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    pub n_max: u64,
    pub seed: u64,
    /// Sampling distribution; `p0` when absent.
    #[serde(default)]
    pub source: Option<Distribution>,
}

/// Runs one test and returns its outcome with the full `S_n` path.
pub fn trajectory_json(model: &str, request: &str) -> Result<String, String> {
    let proj = parse::<Model>("model", model)?.projector()?;
    let req: TrajectoryRequest = parse("request", request)?;
    let th = Thresholds::new(req.a, req.b).map_err(|e| e.to_string())?;
    let source = req.source.unwrap_or_else(|| proj.p0().clone());
    if source.dim() != proj.dim() {
        return Err(format!("source has {} symbols, expected {}", source.dim(), proj.dim()));
    }
    let mut rng = trial_rng(req.seed, 0, 0);
    let stream = std::iter::from_fn(|| Some(source.sample_with(rng.random::<f64>())));
    let state = GsprtState::new(TypeStatistic::new(&proj), th, req.n_max).map_err(|e| e.to_string())?;
    let out = state.run(stream, true).map_err(|e| e.to_string())?;
    Ok(to_json(&out))
}

#[derive(Debug, Deserialize)]
pub struct SweepRequest {
    pub ns: Vec<u64>,
    pub eps: f64,
    pub eta0: f64,
    pub eta1: f64,
}

#[derive(Debug, Serialize)]
pub struct SweepPoint {
    pub n: u64,
    #[serde(rename = "A_first")]
    pub a_first: Option<f64>,
    #[serde(rename = "B_first")]
    pub b_first: Option<f64>,
    #[serde(rename = "A_second")]
    pub a_second: Option<f64>,
    #[serde(rename = "B_second")]
    pub b_second: Option<f64>,
}

/// First- and second-order thresholds over a list of horizons. The
/// first-order curve uses `eps0 = eps1 = eps - eta`, scaled to the exponents.
pub fn thresholds_json(model: &str, request: &str) -> Result<String, String> {
    let proj = parse::<Model>("model", model)?.projector()?;
    let req: SweepRequest = parse("request", request)?;
    let rev = proj.reverse_projection().map_err(|e| e.to_string())?.divergence;
    let fwd = proj.project(proj.p0()).map_err(|e| e.to_string())?.f_value;
    let frac = req.eps - req.eta0.max(req.eta1);
    let points: Vec<SweepPoint> = req
        .ns
        .iter()
        .map(|&n| {
            let first = first_order_thresholds(&proj, n, frac * rev, frac * fwd).ok();
            let second = second_order_thresholds(&proj, n, req.eps, req.eta0, req.eta1).ok();
            SweepPoint {
                n,
                a_first: first.as_ref().map(|t| t.a),
                b_first: first.as_ref().map(|t| t.b),
                a_second: second.as_ref().map(|t| t.a),
                b_second: second.as_ref().map(|t| t.b),
            }
        })
        .collect();
    Ok(to_json(&points))
}

fn js(r: Result<String, String>) -> Result<String, JsValue> {
    r.map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn project(model: &str, q: &str) -> Result<String, JsValue> {
    js(project_json(model, Some(q)))
}

#[wasm_bindgen]
pub fn trajectory(model: &str, request: &str) -> Result<String, JsValue> {
    js(trajectory_json(model, request))
}

#[wasm_bindgen]
pub fn thresholds(model: &str, request: &str) -> Result<String, JsValue> {
    js(thresholds_json(model, request))
}
