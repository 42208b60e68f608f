//! Kohonen self-organising map over flattened distance maps. Each neuron is
//! one cluster.

use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

const ALPHA_END: f64 = 0.01;
const SIGMA_END: f64 = 0.5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SomTrainConfig {
    pub rows: usize,
    pub cols: usize,
    pub epochs: usize,
    pub alpha0: f64,
    /// Defaults to max(rows, cols) / 2 when unset.
    pub sigma0: Option<f64>,
    pub seed: u64,
}

impl Default for SomTrainConfig {
    fn default() -> Self {
        Self { rows: 4, cols: 4, epochs: 50, alpha0: 0.5, sigma0: None, seed: 0 }
    }
}

impl SomTrainConfig {
    pub fn sigma0(&self) -> f64 {
        self.sigma0.unwrap_or(self.rows.max(self.cols) as f64 / 2.0)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 || self.epochs == 0 {
            return Err(Error::Config(format!(
                "SOM needs a non-empty grid and ≥ 1 epoch, got {}×{} for {} epochs",
                self.rows, self.cols, self.epochs
            )));
        }
        if !(self.alpha0 > 0.0 && self.alpha0 <= 1.0) {
            return Err(Error::Config(format!("alpha0 must be in (0,1], got {}", self.alpha0)));
        }
        // a smaller start radius would make the decay grow it
        if !(self.sigma0() >= SIGMA_END) {
            return Err(Error::Config(format!("sigma0 must be ≥ {SIGMA_END}, got {}", self.sigma0())));
        }
        Ok(())
    }
}

/// Prototypes in row-major neuron order.
#[derive(Clone, Debug, PartialEq)]
pub struct SomGrid {
    pub rows: usize,
    pub cols: usize,
    pub dim: usize,
    pub prototypes: Vec<Vec<f64>>,
    pub trained: bool,
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl SomGrid {
    /// Grid from explicit prototypes (all of one dimension).
    pub fn from_prototypes(rows: usize, cols: usize, prototypes: Vec<Vec<f64>>) -> Result<Self> {
        if rows * cols == 0 || prototypes.len() != rows * cols {
            return Err(Error::shape("som", format!("{rows}×{cols} grid with {} prototypes", prototypes.len())));
        }
        let dim = prototypes[0].len();
        if dim == 0 || prototypes.iter().any(|p| p.len() != dim) {
            return Err(Error::shape("som", "prototypes must share one non-zero dimension"));
        }
        if prototypes.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Range { op: "som", detail: "non-finite prototype entry".into() });
        }
        Ok(Self { rows, cols, dim, prototypes, trained: true })
    }

    pub fn neurons(&self) -> usize {
        self.prototypes.len()
    }

    fn coords(&self, i: usize) -> (f64, f64) {
        ((i / self.cols) as f64, (i % self.cols) as f64)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::shape("bmu", format!("feature has {} entries, prototypes {}", x.len(), self.dim)));
        }
        Ok(())
    }

    /// Best-matching neuron; the lowest index wins ties.
    pub fn bmu(&self, x: &[f64]) -> Result<usize> {
        self.check_dim(x)?;
        let mut best = (0, f64::INFINITY);
        for (i, p) in self.prototypes.iter().enumerate() {
            let d = dist2(p, x);
            if d < best.1 {
                best = (i, d);
            }
        }
        Ok(best.0)
    }

    /// Mean Euclidean distance from each feature to its BMU prototype.
    pub fn quantization_error(&self, features: &[Vec<f64>]) -> Result<f64> {
        if features.is_empty() {
            return Ok(0.0);
        }
        let mut total = 0.0;
        for x in features {
            let b = self.bmu(x)?;
            total += dist2(&self.prototypes[b], x).sqrt();
        }
        Ok(total / features.len() as f64)
    }

    /// BMU of every feature.
    pub fn assign(&self, features: &[Vec<f64>]) -> Result<Vec<usize>> {
        features.iter().map(|x| self.bmu(x)).collect()
    }
}

/// Untrained grid: prototypes drawn without replacement from `features`.
pub fn init_som(features: &[Vec<f64>], cfg: &SomTrainConfig) -> Result<SomGrid> {
    cfg.validate()?;
    let k = cfg.rows * cfg.cols;
    if features.len() < k {
        return Err(Error::TooFew { what: "train_som", got: features.len(), need: k });
    }
    let mut rng = SplitMix64::new(cfg.seed);
    let mut order: Vec<usize> = (0..features.len()).collect();
    rng.shuffle(&mut order);
    let prototypes: Vec<Vec<f64>> = order[..k].iter().map(|&i| features[i].clone()).collect();
    let mut grid = SomGrid::from_prototypes(cfg.rows, cfg.cols, prototypes)?;
    grid.trained = false;
    for x in features {
        grid.check_dim(x)?;
    }
    Ok(grid)
}

/// Online Kohonen training with exponentially decaying rate and radius.
pub fn train_som(features: &[Vec<f64>], cfg: &SomTrainConfig) -> Result<SomGrid> {
    let mut grid = init_som(features, cfg)?;
    if features.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::Range { op: "train_som", detail: "non-finite feature entry".into() });
    }
    let mut rng = SplitMix64::derive(cfg.seed, 1);
    let mut order: Vec<usize> = (0..features.len()).collect();
    let steps = (cfg.epochs * features.len()) as f64;
    let (a0, s0) = (cfg.alpha0, cfg.sigma0());
    let mut step = 0usize;
    for _ in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for &i in &order {
            let frac = step as f64 / (steps - 1.0).max(1.0);
            let alpha = a0 * (ALPHA_END / a0).powf(frac);
            let sigma = s0 * (SIGMA_END / s0).powf(frac);
            let x = &features[i];
            let (br, bc) = grid.coords(grid.bmu(x)?);
            for n in 0..grid.neurons() {
                let (r, c) = grid.coords(n);
                let g2 = (r - br).powi(2) + (c - bc).powi(2);
                let h = alpha * (-g2 / (2.0 * sigma * sigma)).exp();
                for (p, &v) in grid.prototypes[n].iter_mut().zip(x) {
                    *p += h * (v - *p);
                }
            }
            step += 1;
        }
    }
    // stored as f32; keep the in-memory grid identical to a reloaded one
    for v in grid.prototypes.iter_mut().flatten() {
        *v = *v as f32 as f64;
    }
    grid.trained = true;
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bmu_examples() {
        let g = SomGrid::from_prototypes(1, 2, vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        assert_eq!(g.bmu(&[0.1, 0.1]).unwrap(), 0);
        assert_eq!(g.bmu(&[1.0, 1.0]).unwrap(), 1);
        assert_eq!(g.bmu(&[0.5, 0.5]).unwrap(), 0);
        assert!(g.bmu(&[0.5]).is_err());
        assert_eq!(g.quantization_error(&[vec![1.0, 1.0], vec![0.0, 0.0]]).unwrap(), 0.0);
    }

    #[test]
    fn config_bounds() {
        assert!(SomTrainConfig { alpha0: 0.0, ..Default::default() }.validate().is_err());
        assert!(SomTrainConfig { alpha0: 1.5, ..Default::default() }.validate().is_err());
        assert!(SomTrainConfig { sigma0: Some(0.4), ..Default::default() }.validate().is_err());
        assert_eq!(SomTrainConfig { rows: 2, cols: 6, ..Default::default() }.sigma0(), 3.0);
    }
}
