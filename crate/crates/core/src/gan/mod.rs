//! Cross-modal conditional GANs: frame→flow and flow→frame translation,
//! discriminator score maps, and the distance maps built from them.

mod maps;
mod nets;
mod train;

pub use maps::{DistanceMap, ScoreMap};
pub use nets::{DiscriminatorNet, Direction, GeneratorNet, WIDTHS};
pub use train::{train_pair, EpochLog, TrainConfig, TrainMeta, MIN_TRAIN_COUPLES};

use crate::autodiff::Tensor;
use crate::error::{Error, Result};

/// Network-ready couples: frames N×1×H×W in [−1,1] and flows N×2×H×W
/// scaled into [−1,1].
#[derive(Clone, Debug, PartialEq)]
pub struct CoupleSet {
    pub frames: Tensor<f32>,
    pub flows: Tensor<f32>,
}

impl CoupleSet {
    pub fn new(frames: Tensor<f32>, flows: Tensor<f32>) -> Result<Self> {
        let (n, c, h, w) = frames.dims4("couples")?;
        let (nf, cf, hf, wf) = flows.dims4("couples")?;
        if c != 1 || cf != 2 {
            return Err(Error::shape("couples", format!("frames need 1 channel and flows 2, got {c} and {cf}")));
        }
        if (n, h, w) != (nf, hf, wf) {
            return Err(Error::shape("couples", format!("frames {n}×{h}×{w} vs flows {nf}×{hf}×{wf}")));
        }
        Ok(Self { frames, flows })
    }

    pub fn len(&self) -> usize {
        self.frames.shape()[0]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn size(&self) -> (usize, usize) {
        (self.frames.shape()[2], self.frames.shape()[3])
    }

    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        if idx.is_empty() {
            return Err(Error::Empty("cannot select an empty subset".into()));
        }
        Ok(Self {
            frames: self.frames.gather(idx)?,
            flows: self.flows.gather(idx)?,
        })
    }

    /// (condition, target) for a direction.
    pub fn sides(&self, d: Direction) -> (&Tensor<f32>, &Tensor<f32>) {
        match d {
            Direction::FrameToFlow => (&self.frames, &self.flows),
            Direction::FlowToFrame => (&self.flows, &self.frames),
        }
    }

    /// FNV-1a over shape and payload bits.
    pub fn fingerprint(&self) -> u64 {
        let mut h = crate::fnv::Fnv1a::new();
        for t in [&self.frames, &self.flows] {
            for &d in t.shape() {
                h.write_u64(d as u64);
            }
            for v in t.data() {
                h.write(&v.to_bits().to_le_bytes());
            }
        }
        h.finish()
    }
}

/// Generator and discriminator for one direction.
#[derive(Clone, Debug)]
pub struct DirectionNets {
    pub gen: GeneratorNet,
    pub disc: DiscriminatorNet,
}

/// Both translation directions, trained on the same subset.
#[derive(Clone, Debug)]
pub struct CrossModalPair {
    pub net_fo: DirectionNets,
    pub net_of: DirectionNets,
    pub meta: TrainMeta,
}

/// Generated couple: predicted flow from the frame and predicted frame from the flow.
#[derive(Clone, Debug)]
pub struct Prediction {
    pub flows: Tensor<f32>,
    pub frames: Tensor<f32>,
}

impl CrossModalPair {
    pub fn nets(&self, d: Direction) -> &DirectionNets {
        match d {
            Direction::FrameToFlow => &self.net_fo,
            Direction::FlowToFrame => &self.net_of,
        }
    }

    pub fn predict(&self, x: &CoupleSet) -> Result<Prediction> {
        Ok(Prediction {
            flows: self.net_fo.gen.predict(&x.frames)?,
            frames: self.net_of.gen.predict(&x.flows)?,
        })
    }

    /// Observed and predicted score maps of one direction, per sample.
    pub fn score_maps(&self, d: Direction, x: &CoupleSet, generated: &Tensor<f32>) -> Result<(Vec<ScoreMap>, Vec<ScoreMap>)> {
        let nets = self.nets(d);
        let (cond, real) = x.sides(d);
        let obs = ScoreMap::from_logits(&nets.disc.logits(cond, real)?)?;
        let pred = ScoreMap::from_logits(&nets.disc.logits(cond, generated)?)?;
        Ok((obs, pred))
    }

    /// Fused distance map of every couple in `x`.
    pub fn distance_maps(&self, x: &CoupleSet) -> Result<Vec<DistanceMap>> {
        let p = self.predict(x)?;
        let (obs_fo, pred_fo) = self.score_maps(Direction::FrameToFlow, x, &p.flows)?;
        let (obs_of, pred_of) = self.score_maps(Direction::FlowToFrame, x, &p.frames)?;
        (0..x.len())
            .map(|i| {
                let a = DistanceMap::between(&obs_fo[i], &pred_fo[i])?;
                let b = DistanceMap::between(&obs_of[i], &pred_of[i])?;
                DistanceMap::fuse(&a, &b)
            })
            .collect()
    }
}

/// Score map of one (condition, target) couple under `disc`.
pub fn score_map(disc: &DiscriminatorNet, cond: &Tensor<f32>, target: &Tensor<f32>) -> Result<ScoreMap> {
    if cond.shape()[0] != 1 {
        return Err(Error::shape("score_map", format!("expected one sample, got {}", cond.shape()[0])));
    }
    let mut maps = ScoreMap::from_logits(&disc.logits(cond, target)?)?;
    Ok(maps.remove(0))
}

/// Prediction couple for a single observation.
pub fn predict_couple(pair: &CrossModalPair, x: &CoupleSet) -> Result<Prediction> {
    pair.predict(x)
}

/// Fused distance map of a single observation.
pub fn distance_map(pair: &CrossModalPair, x: &CoupleSet) -> Result<DistanceMap> {
    if x.len() != 1 {
        return Err(Error::shape("distance_map", format!("expected one couple, got {}", x.len())));
    }
    Ok(pair.distance_maps(x)?.remove(0))
}
