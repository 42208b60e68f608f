//! Times one training epoch of a GAN pair on random 64×64 couples.

use std::time::Instant;

use hsaw::autodiff::Tensor;
use hsaw::gan::{train_pair, CoupleSet, TrainConfig};
use hsaw::rng::SplitMix64;

fn main() -> hsaw::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let mut rng = SplitMix64::new(1);
    let frames = Tensor::from_fn(&[n, 1, 64, 64], |_| rng.uniform(-1.0, 1.0) as f32);
    let flows = Tensor::from_fn(&[n, 2, 64, 64], |_| rng.uniform(-1.0, 1.0) as f32);
    let set = CoupleSet::new(frames, flows)?;
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    let t = Instant::now();
    let pair = train_pair(&set, &cfg, |e| println!("{}", e.csv_row()))?;
    println!("train: {n} couples × 2 directions, 1 epoch: {:.2?}", t.elapsed());
    let t = Instant::now();
    let maps = pair.distance_maps(&set)?;
    println!("distance maps for {}: {:.2?}", maps.len(), t.elapsed());
    Ok(())
}
