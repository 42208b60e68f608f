//! Level-by-level construction of the GAN hierarchy: train a pair on a
//! subset, score the whole sequence, cluster the distance maps, and spawn the
//! next level from clusters whose mean distance reaches θ.

use crate::gan::{train_pair, CoupleSet, CrossModalPair, DistanceMap, EpochLog, TrainConfig, MIN_TRAIN_COUPLES};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use crate::som::{train_som, SomGrid, SomTrainConfig};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ThetaPolicy {
    Fixed(f64),
    /// mean + k·std of the level's own training-subset scores.
    Auto(f64),
}

impl ThetaPolicy {
    pub fn resolve(self, own_scores: &[f64]) -> Result<f64> {
        match self {
            ThetaPolicy::Fixed(t) => Ok(t),
            ThetaPolicy::Auto(k) => compute_theta_auto(own_scores, k),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BuildConfig {
    pub theta: ThetaPolicy,
    pub max_levels: usize,
    /// Smallest cluster, as a fraction of the sequence, that may spawn a level.
    pub min_cluster_frac: f64,
    pub seed: u64,
    pub train: TrainConfig,
    pub som: SomTrainConfig,
}

impl Default for BuildConfig {
    fn default() -> Self {
        Self {
            theta: ThetaPolicy::Auto(3.0),
            max_levels: 4,
            min_cluster_frac: 0.05,
            seed: 0,
            train: TrainConfig::default(),
            som: SomTrainConfig::default(),
        }
    }
}

impl BuildConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_levels == 0 {
            return Err(Error::Config("max_levels must be ≥ 1".into()));
        }
        if !(self.min_cluster_frac > 0.0 && self.min_cluster_frac < 0.5) {
            return Err(Error::Config(format!("min_cluster_frac must be in (0, 0.5), got {}", self.min_cluster_frac)));
        }
        match self.theta {
            ThetaPolicy::Fixed(t) if t.is_nan() => return Err(Error::Config("fixed theta is NaN".into())),
            ThetaPolicy::Auto(k) if !k.is_finite() => return Err(Error::Config(format!("auto theta k must be finite, got {k}"))),
            _ => {}
        }
        self.train.validate()?;
        self.som.validate()
    }

    fn level_seeds(&self, level: usize) -> (u64, u64) {
        let mut r = SplitMix64::derive(self.seed, 0x6c65_7665_6c00 + level as u64);
        (r.next_u64(), r.next_u64())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClusterStat {
    /// Mean of the members' mean distance scores (prototype mean if empty).
    pub mu: f64,
    pub members: usize,
}

#[derive(Clone, Debug)]
pub struct HierarchyLevel {
    pub index: usize,
    pub pair: CrossModalPair,
    pub som: SomGrid,
    pub cluster_stats: Vec<ClusterStat>,
    pub normal_mask: Vec<bool>,
    pub theta: f64,
    /// Indices into the training sequence this level was trained on.
    pub subset: Vec<usize>,
    pub subset_fingerprint: u64,
}

impl HierarchyLevel {
    /// Distance maps and their mean scores for every couple of `x`, in order.
    pub fn scores(&self, x: &CoupleSet) -> Result<(Vec<DistanceMap>, Vec<f64>)> {
        level_scores(&self.pair, x)
    }

    pub fn is_normal_cluster(&self, neuron: usize) -> bool {
        self.normal_mask[neuron]
    }
}

#[derive(Clone, Debug)]
pub struct Hierarchy {
    pub levels: Vec<HierarchyLevel>,
    /// Final abnormality threshold on Ỹ.
    pub tau: f64,
    pub config: BuildConfig,
    pub dataset_fingerprint: u64,
}

/// Progress reported while building.
#[derive(Clone, Debug)]
pub enum BuildEvent {
    Epoch { level: usize, log: EpochLog },
    Level { level: usize, subset: usize, theta: f64, normal_clusters: usize, spawn: usize },
    Skipped { level: usize, members: usize, need: usize },
}

/// Mean + k·population std.
pub fn compute_theta_auto(scores: &[f64], k: f64) -> Result<f64> {
    if scores.is_empty() {
        return Err(Error::Empty("compute_theta_auto: no scores".into()));
    }
    let n = scores.len() as f64;
    let mean = scores.iter().sum::<f64>() / n;
    let var = scores.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / n;
    Ok(mean + k * var.sqrt())
}

/// Fused distance maps of `x` under one pair, with their mean scores.
pub fn level_scores(pair: &CrossModalPair, x: &CoupleSet) -> Result<(Vec<DistanceMap>, Vec<f64>)> {
    let maps = pair.distance_maps(x)?;
    let s = maps.iter().map(|m| m.mean_score).collect();
    Ok((maps, s))
}

pub(crate) fn features(maps: &[DistanceMap]) -> Vec<Vec<f64>> {
    maps.iter().map(|m| m.values.iter().map(|&v| v as f64).collect()).collect()
}

fn cluster_stats(som: &SomGrid, bmus: &[usize], scores: &[f64]) -> Vec<ClusterStat> {
    (0..som.neurons())
        .map(|n| {
            let mine: Vec<f64> = bmus.iter().zip(scores).filter(|(&b, _)| b == n).map(|(_, &s)| s).collect();
            let mu = if mine.is_empty() {
                som.prototypes[n].iter().sum::<f64>() / som.dim as f64
            } else {
                mine.iter().sum::<f64>() / mine.len() as f64
            };
            ClusterStat { mu, members: mine.len() }
        })
        .collect()
}

/// Builds the hierarchy on sequence `x`, starting from the subset `v0`.
pub fn build_hierarchy(
    x: &CoupleSet,
    v0: &[usize],
    cfg: &BuildConfig,
    mut on_event: impl FnMut(&BuildEvent),
) -> Result<Hierarchy> {
    cfg.validate()?;
    if v0.is_empty() {
        return Err(Error::Empty("build_hierarchy: initial subset is empty".into()));
    }
    if let Some(&bad) = v0.iter().find(|&&i| i >= x.len()) {
        return Err(Error::Range { op: "build_hierarchy", detail: format!("subset index {bad} ≥ {}", x.len()) });
    }
    let n = x.len();
    let mut subset: Vec<usize> = v0.to_vec();
    subset.sort_unstable();
    subset.dedup();
    // samples some earlier level already claims as normal
    let mut accepted = vec![false; n];
    let mut levels = Vec::new();
    loop {
        let index = levels.len();
        let (gan_seed, som_seed) = cfg.level_seeds(index);
        let sub = x.select(&subset)?;
        let tcfg = TrainConfig { seed: gan_seed, ..cfg.train.clone() };
        let pair = train_pair(&sub, &tcfg, |log| on_event(&BuildEvent::Epoch { level: index, log: log.clone() }))?;
        let (maps, scores) = level_scores(&pair, x)?;
        let own: Vec<f64> = subset.iter().map(|&i| scores[i]).collect();
        let theta = cfg.theta.resolve(&own)?;
        let feats = features(&maps);
        let som = train_som(&feats, &SomTrainConfig { seed: som_seed, ..cfg.som.clone() })?;
        let bmus = som.assign(&feats)?;
        let stats = cluster_stats(&som, &bmus, &scores);
        let normal_mask: Vec<bool> = stats.iter().map(|c| c.mu < theta).collect();

        let min_members = (cfg.min_cluster_frac * n as f64).ceil() as usize;
        let mut next = Vec::new();
        for (c, st) in stats.iter().enumerate() {
            if normal_mask[c] || st.members < min_members {
                continue;
            }
            next.extend((0..n).filter(|&i| bmus[i] == c && !accepted[i]));
        }
        next.sort_unstable();
        for i in 0..n {
            if normal_mask[bmus[i]] {
                accepted[i] = true;
            }
        }
        on_event(&BuildEvent::Level {
            level: index,
            subset: subset.len(),
            theta,
            normal_clusters: normal_mask.iter().filter(|&&m| m).count(),
            spawn: next.len(),
        });
        levels.push(HierarchyLevel {
            index,
            pair,
            som,
            cluster_stats: stats,
            normal_mask,
            theta,
            subset_fingerprint: sub.fingerprint(),
            subset,
        });
        if next.is_empty() || levels.len() >= cfg.max_levels {
            break;
        }
        if next.len() < MIN_TRAIN_COUPLES {
            on_event(&BuildEvent::Skipped { level: index + 1, members: next.len(), need: MIN_TRAIN_COUPLES });
            break;
        }
        subset = next;
    }
    let tau = levels.last().map(|l| l.theta).expect("at least one level");
    Ok(Hierarchy { levels, tau, config: cfg.clone(), dataset_fingerprint: x.fingerprint() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn theta_examples() {
        assert_eq!(compute_theta_auto(&[0.3, 0.3, 0.3], 1.0).unwrap(), 0.3);
        assert_eq!(compute_theta_auto(&[0.0, 1.0], 1.0).unwrap(), 1.0);
        assert_eq!(compute_theta_auto(&[0.2, 0.4, 0.9], 0.0).unwrap(), 0.5);
        assert!(compute_theta_auto(&[], 1.0).is_err());
    }

    #[test]
    fn empty_prototype_cluster_falls_back_to_prototype_mean() {
        let som = SomGrid::from_prototypes(1, 2, vec![vec![0.1, 0.3], vec![0.5, 0.7]]).unwrap();
        let stats = cluster_stats(&som, &[0, 0], &[0.2, 0.4]);
        assert!((stats[0].mu - 0.3).abs() < 1e-12 && stats[0].members == 2);
        assert!((stats[1].mu - 0.6).abs() < 1e-12 && stats[1].members == 0);
    }

    #[test]
    fn config_bounds() {
        assert!(BuildConfig { max_levels: 0, ..Default::default() }.validate().is_err());
        assert!(BuildConfig { min_cluster_frac: 0.5, ..Default::default() }.validate().is_err());
        assert!(BuildConfig { theta: ThetaPolicy::Fixed(f64::NAN), ..Default::default() }.validate().is_err());
        assert!(BuildConfig { theta: ThetaPolicy::Fixed(f64::INFINITY), ..Default::default() }.validate().is_ok());
    }
}
