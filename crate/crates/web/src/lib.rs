//! Browser bindings. Every export returns a JSON string; failures come back
//! as `{"error": "..."}`.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use kmr_core::certificate::{certify_with, Implication};
use kmr_core::experiments::{ExperimentConfig, Layout, Method, SeedRange};
use kmr_core::gfunction::{g_value, t_scan, TfnParams};
use kmr_core::instance::{generate, ground_truth};
use kmr_core::lp::{decide_recovery_with, DecideOptions};
use kmr_core::numerics::QuadratureSpec;
use kmr_core::Result;

/// Largest point count the page will hand to the LP solver.
pub const BROWSER_LP_LIMIT: usize = 120;

fn respond<T: Serialize>(r: Result<T>) -> String {
    match r {
        Ok(v) => serde_json::to_string(&v).unwrap_or_else(|e| error_json(&e.to_string())),
        Err(e) => error_json(&e.to_string()),
    }
}

fn error_json(msg: &str) -> String {
    serde_json::json!({ "error": msg }).to_string()
}

#[derive(Serialize)]
struct Curve {
    t: Vec<f64>,
    value: Vec<f64>,
    min: f64,
}

/// Gap function on `grid` points of `(0, 1]` for the unit sphere.
#[wasm_bindgen]
pub fn t_curve(alpha: f64, m: u32, grid: usize) -> String {
    respond((|| {
        if grid == 0 || grid > 5000 {
            return Err(kmr_core::Error::Config("grid must lie in 1..=5000".into()));
        }
        let rows = t_scan(&TfnParams::new(1.0, alpha, m)?, grid)?;
        let min = rows.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        Ok(Curve {
            t: rows.iter().map(|r| r.0).collect(),
            value: rows.iter().map(|r| r.1).collect(),
            min,
        })
    })())
}

#[derive(Serialize)]
struct Margins {
    a: f64,
    b: f64,
    c: f64,
    d: f64,
}

#[derive(Serialize)]
struct Certified {
    points: Vec<Vec<f64>>,
    labels: Vec<usize>,
    medians: Vec<usize>,
    ball_centers: Vec<Vec<f64>>,
    alpha: Vec<f64>,
    gamma: f64,
    margins: Margins,
    implies: Implication,
    /// Recovery decision when the instance is small enough to solve.
    decision: Option<String>,
}

fn layout_by_name(name: &str, delta: f64) -> Result<Layout> {
    Ok(match name {
        "pair" => Layout::Pair { delta },
        "line3" => Layout::Line { k: 3, delta },
        "triangle" => Layout::Simplex { k: 3, delta },
        "hexagon7" => Layout::Hexagon7 { delta },
        other => return Err(kmr_core::Error::Config(format!("unknown layout {other}"))),
    })
}

/// Draws a two-dimensional instance, certifies its ground truth and, when
/// small, decides recovery with the LP.
#[wasm_bindgen]
pub fn certify_instance(layout: &str, delta: f64, n: usize, seed: u64) -> String {
    respond((|| {
        if n == 0 || n > 400 {
            return Err(kmr_core::Error::Config("n must lie in 1..=400".into()));
        }
        let cfg = ExperimentConfig::new(
            layout_by_name(layout, delta)?,
            2,
            n,
            SeedRange { start: seed, count: 1 },
            Method::Auto,
        );
        cfg.validate()?;
        let balls = cfg.balls()?;
        let inst = generate(&balls, n, seed)?;
        let gt = ground_truth(&inst)?;
        let out = certify_with(&inst, &gt, None)?;
        let v = &out.verdict;
        let decision = if inst.points.len() <= BROWSER_LP_LIMIT {
            let opts = DecideOptions {
                use_certificate: false,
                ..DecideOptions::default()
            };
            Some(decide_recovery_with(&inst, &opts)?.status.as_str().to_string())
        } else {
            None
        };
        Ok(Certified {
            labels: inst.labels.clone(),
            medians: gt.clustering.centers.clone(),
            ball_centers: balls.iter().map(|b| b.center.clone()).collect(),
            alpha: out.recipe.alpha.clone(),
            gamma: out.recipe.gamma,
            margins: Margins {
                a: v.cond_a.margin,
                b: v.cond_b.margin,
                c: v.cond_c.margin,
                d: v.cond_d.margin,
            },
            implies: v.implies,
            decision,
            points: inst.points,
        })
    })())
}

#[derive(Serialize)]
struct Profile {
    x: Vec<f64>,
    value: Vec<f64>,
}

/// Expected contribution along the axis through two unit balls with uniform
/// points, both at dual level `alpha`.
#[wasm_bindgen]
pub fn g_profile(delta: f64, m: u32, alpha: f64, steps: usize) -> String {
    respond((|| {
        if !(2..=2000).contains(&steps) {
            return Err(kmr_core::Error::Config("steps must lie in 2..=2000".into()));
        }
        let cfg = ExperimentConfig::new(
            Layout::Pair { delta },
            m,
            1,
            SeedRange { start: 0, count: 1 },
            Method::Auto,
        );
        let balls = cfg.balls()?;
        let spec = QuadratureSpec::with_abs_tol(1e-8);
        let (lo, hi) = (-1.5, delta + 1.5);
        let mut x = Vec::with_capacity(steps);
        let mut value = Vec::with_capacity(steps);
        for j in 0..steps {
            let t = lo + (hi - lo) * j as f64 / (steps - 1) as f64;
            let mut z = vec![0.0; m as usize];
            z[0] = t;
            x.push(t);
            value.push(g_value(&balls, &[alpha, alpha], &z, &spec)?);
        }
        Ok(Profile { x, value })
    })())
}
