use super::nets::{DiscriminatorNet, Direction, GeneratorNet};
use super::{CoupleSet, CrossModalPair, DirectionNets};
use crate::autodiff::{AdamState, Graph, Tensor};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;
use serde::{Deserialize, Serialize};

pub const MIN_TRAIN_COUPLES: usize = 16;

/// Optimisation settings for one GAN pair.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_l1: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 4,
            lr: 2e-4,
            beta1: 0.5,
            beta2: 0.999,
            lambda_l1: 100.0,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::Config(format!(
                "need lr > 0 and betas in [0,1), got lr={} beta1={} beta2={}",
                self.lr, self.beta1, self.beta2
            )));
        }
        if !(self.lambda_l1 >= 0.0) {
            return Err(Error::Config(format!("lambda_l1 must be ≥ 0, got {}", self.lambda_l1)));
        }
        Ok(())
    }
}

/// Mean losses of one epoch of one direction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub direction: Direction,
    pub epoch: usize,
    pub d_loss: f64,
    pub g_loss: f64,
    pub l1: f64,
}

impl EpochLog {
    pub const CSV_HEADER: &'static str = "direction,epoch,d_loss,g_loss,l1";

    pub fn csv_row(&self) -> String {
        format!("{},{},{:.6},{:.6},{:.6}", self.direction.tag(), self.epoch, self.d_loss, self.g_loss, self.l1)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainMeta {
    pub config: TrainConfig,
    pub subset_len: usize,
    pub subset_fingerprint: u64,
    pub log: Vec<EpochLog>,
}

/// Trains both directions on `subset`. `on_epoch` sees every epoch log as
/// it is produced.
pub fn train_pair(subset: &CoupleSet, cfg: &TrainConfig, mut on_epoch: impl FnMut(&EpochLog)) -> Result<CrossModalPair> {
    cfg.validate()?;
    if subset.len() < MIN_TRAIN_COUPLES {
        return Err(Error::TooFew { what: "train_pair", got: subset.len(), need: MIN_TRAIN_COUPLES });
    }
    let mut log = Vec::new();
    let mut nets = Vec::new();
    for (k, d) in Direction::BOTH.into_iter().enumerate() {
        let mut init = SplitMix64::derive(cfg.seed, 2 * k as u64);
        let mut order = SplitMix64::derive(cfg.seed, 2 * k as u64 + 1);
        let mut n = DirectionNets {
            gen: GeneratorNet::new(d, &mut init)?,
            disc: DiscriminatorNet::new(d, &mut init)?,
        };
        let (cond, target) = subset.sides(d);
        train_direction(&mut n, cond, target, cfg, &mut order, |e| {
            on_epoch(&e);
            log.push(e);
        })?;
        nets.push(n);
    }
    let net_of = nets.pop().expect("two directions");
    let net_fo = nets.pop().expect("two directions");
    Ok(CrossModalPair {
        net_fo,
        net_of,
        meta: TrainMeta {
            config: cfg.clone(),
            subset_len: subset.len(),
            subset_fingerprint: subset.fingerprint(),
            log,
        },
    })
}

fn train_direction(
    nets: &mut DirectionNets,
    cond: &Tensor<f32>,
    target: &Tensor<f32>,
    cfg: &TrainConfig,
    rng: &mut SplitMix64,
    mut emit: impl FnMut(EpochLog),
) -> Result<()> {
    let d = nets.gen.direction;
    let mut adam_g = AdamState::new(cfg.lr, cfg.beta1, cfg.beta2);
    let mut adam_d = AdamState::new(cfg.lr, cfg.beta1, cfg.beta2);
    let mut order: Vec<usize> = (0..cond.shape()[0]).collect();
    for epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        let (mut sd, mut sg, mut sl, mut batches) = (0.0, 0.0, 0.0, 0usize);
        for idx in order.chunks(cfg.batch_size) {
            let c = cond.gather(idx)?;
            let t = target.gather(idx)?;

            // generator forward, kept for its own update below
            let mut gg = Graph::new();
            let x = gg.input(c.clone());
            let fake = nets.gen.forward(&mut gg, x, true)?;

            // discriminator step on real vs detached fake
            let mut gd = Graph::new();
            let xc = gd.input(c);
            let real = gd.input(t.clone());
            let fake_d = gd.input(gg.value(fake).clone());
            let real_pair = gd.concat_channels(xc, real)?;
            let fake_pair = gd.concat_channels(xc, fake_d)?;
            let real_logits = nets.disc.forward(&mut gd, real_pair, true)?;
            let fake_logits = nets.disc.forward(&mut gd, fake_pair, true)?;
            let ones = gd.input(Tensor::filled(gd.value(real_logits).shape(), 1.0));
            let zeros = gd.input(Tensor::zeros(gd.value(fake_logits).shape()));
            let lr = gd.bce_with_logits(real_logits, ones)?;
            let lf = gd.bce_with_logits(fake_logits, zeros)?;
            let sum = gd.add(lr, lf)?;
            let d_loss = gd.scale(sum, 0.5);
            let grads = gd.backward(d_loss)?;
            nets.disc.params.absorb(&gd, &grads);
            adam_d.step(&mut nets.disc.params)?;

            // generator step against the updated discriminator
            let pair = gg.concat_channels(x, fake)?;
            let logits = nets.disc.forward(&mut gg, pair, false)?;
            let ones = gg.input(Tensor::filled(gg.value(logits).shape(), 1.0));
            let adv = gg.bce_with_logits(logits, ones)?;
            let real = gg.input(t);
            let l1 = gg.l1_loss(fake, real)?;
            let weighted = gg.scale(l1, cfg.lambda_l1);
            let g_loss = gg.add(adv, weighted)?;
            let l1v = gg.value(l1).item() as f64;
            if !l1v.is_finite() || !gg.value(g_loss).is_finite() {
                return Err(Error::Diverged(format!(
                    "{} generator loss non-finite at epoch {epoch} (l1={l1v})",
                    d.tag()
                )));
            }
            let grads = gg.backward(g_loss)?;
            nets.gen.params.absorb(&gg, &grads);
            adam_g.step(&mut nets.gen.params)?;

            sd += gd.value(d_loss).item() as f64;
            sg += gg.value(g_loss).item() as f64;
            sl += l1v;
            batches += 1;
        }
        let b = batches as f64;
        emit(EpochLog { direction: d, epoch, d_loss: sd / b, g_loss: sg / b, l1: sl / b });
    }
    Ok(())
}
