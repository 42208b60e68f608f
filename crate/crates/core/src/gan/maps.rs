use crate::autodiff::Tensor;
use crate::error::{Error, Result};

fn mean64(v: &[f32]) -> f64 {
    v.iter().map(|&x| x as f64).sum::<f64>() / v.len() as f64
}

/// Sigmoid of a discriminator logit map.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f32>,
    pub mean_score: f64,
}

impl ScoreMap {
    pub fn new(h: usize, w: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != h * w || values.is_empty() {
            return Err(Error::shape("score map", format!("{h}×{w} grid with {} values", values.len())));
        }
        Ok(Self { h, w, mean_score: mean64(&values), values })
    }

    /// Splits an N×1×h×w logit tensor into per-sample score maps.
    pub fn from_logits(logits: &Tensor<f32>) -> Result<Vec<Self>> {
        let (n, c, h, w) = logits.dims4("score map")?;
        if c != 1 {
            return Err(Error::shape("score map", format!("logit map must have 1 channel, got {c}")));
        }
        logits
            .data()
            .chunks(h * w)
            .take(n)
            .map(|z| {
                let s = z.iter().map(|&v| (1.0 / (1.0 + (-(v as f64)).exp())) as f32).collect();
                Self::new(h, w, s)
            })
            .collect()
    }
}

/// Elementwise |S_obs − S_pred|, optionally fused over directions.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMap {
    pub h: usize,
    pub w: usize,
    pub values: Vec<f32>,
    pub mean_score: f64,
}

impl DistanceMap {
    pub fn between(obs: &ScoreMap, pred: &ScoreMap) -> Result<Self> {
        if (obs.h, obs.w) != (pred.h, pred.w) {
            return Err(Error::shape(
                "distance map",
                format!("{}×{} vs {}×{}", obs.h, obs.w, pred.h, pred.w),
            ));
        }
        let values: Vec<f32> = obs.values.iter().zip(&pred.values).map(|(a, b)| (a - b).abs()).collect();
        Ok(Self { h: obs.h, w: obs.w, mean_score: mean64(&values), values })
    }

    /// Arithmetic mean of two per-direction maps.
    pub fn fuse(a: &Self, b: &Self) -> Result<Self> {
        if (a.h, a.w) != (b.h, b.w) {
            return Err(Error::shape("distance map", format!("{}×{} vs {}×{}", a.h, a.w, b.h, b.w)));
        }
        let values: Vec<f32> = a.values.iter().zip(&b.values).map(|(x, y)| (x + y) * 0.5).collect();
        Ok(Self { h: a.h, w: a.w, mean_score: mean64(&values), values })
    }

    /// Largest entry; the opt-in alternative to the mean.
    pub fn max_score(&self) -> f64 {
        self.values.iter().fold(0.0f32, |m, &v| m.max(v)) as f64
    }
}
