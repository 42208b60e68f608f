//! Browser bindings: scene rendering, SOM fitting and ROC reports.

use hsaw::eval::{roc, roc_svg};
use hsaw::scene::{analytic_flow, render_frame, ScenarioConfig, Trajectory};
use hsaw::som::{train_som, SomTrainConfig};
use wasm_bindgen::prelude::*;

fn js(e: impl std::fmt::Display) -> JsError {
    JsError::new(&e.to_string())
}

fn trajectory(scenario: u8, seed: u32) -> Result<Trajectory, JsError> {
    Trajectory::new(&ScenarioConfig { scenario, seed: seed as u64, ..ScenarioConfig::default() }).map_err(js)
}

pub const SIZE: usize = 64;

/// Frames in one patrol of the scenario.
#[wasm_bindgen]
pub fn scene_len(scenario: u8, seed: u32) -> Result<usize, JsError> {
    Ok(trajectory(scenario, seed)?.len())
}

/// Label name of frame `t`.
#[wasm_bindgen]
pub fn scene_label(scenario: u8, seed: u32, t: usize) -> Result<String, JsError> {
    Ok(trajectory(scenario, seed)?.label(t).name().to_string())
}

/// 64×64 noise-free frame in [−1, 1] followed by the 64×64 flow magnitude in pixels.
#[wasm_bindgen]
pub fn render(scenario: u8, seed: u32, t: usize) -> Result<Vec<f32>, JsError> {
    let traj = trajectory(scenario, seed)?;
    if t >= traj.len() {
        return Err(js(format!("frame {t} out of range: {} frames", traj.len())));
    }
    let (now, next) = (traj.state(t), traj.state(t + 1));
    let mut out = render_frame(traj.world(), &now);
    let flow = analytic_flow(traj.world(), &now, &next);
    let (fx, fy) = flow.split_at(SIZE * SIZE);
    out.extend(fx.iter().zip(fy).map(|(a, b)| a.hypot(*b)));
    Ok(out)
}

/// Fits a rows×cols SOM to 2-D points given as x0, y0, x1, y1, …; returns
/// the prototypes in the same layout, row-major over the grid.
#[wasm_bindgen]
pub fn som_fit(points: Vec<f64>, rows: usize, cols: usize, epochs: usize, seed: u32) -> Result<Vec<f64>, JsError> {
    if !points.len().is_multiple_of(2) {
        return Err(js("points must be x, y pairs"));
    }
    let feats: Vec<Vec<f64>> = points.chunks(2).map(|p| p.to_vec()).collect();
    let cfg = SomTrainConfig { rows, cols, epochs, seed: seed as u64, ..SomTrainConfig::default() };
    let som = train_som(&feats, &cfg).map_err(js)?;
    Ok(som.prototypes.into_iter().flatten().collect())
}

/// AUC, EER and an SVG plot for scores against 0/1 labels, as JSON.
#[wasm_bindgen]
pub fn roc_report(scores: Vec<f64>, labels: Vec<u8>) -> Result<String, JsError> {
    if scores.len() != labels.len() {
        return Err(js(format!("{} scores but {} labels", scores.len(), labels.len())));
    }
    let truth: Vec<bool> = labels.iter().map(|&l| l != 0).collect();
    let curve = roc(&scores, &truth).map_err(js)?;
    Ok(serde_json::json!({
        "auc": curve.auc,
        "eer": curve.eer,
        "svg": roc_svg(&[("scores", &curve)]),
    })
    .to_string())
}
