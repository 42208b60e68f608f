use hsaw::autodiff::Tensor;
use hsaw::gan::{
    distance_map, predict_couple, score_map, train_pair, CoupleSet, CrossModalPair, DiscriminatorNet, Direction,
    DistanceMap, GeneratorNet, ScoreMap, TrainConfig,
};
use hsaw::rng::SplitMix64;
use hsaw::scene::{split_subset, synthesize_scenario, ActivityLabel, ScenarioConfig};
use hsaw::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn random_set(n: usize, h: usize, w: usize, seed: u64) -> CoupleSet {
    let mut rng = SplitMix64::new(seed);
    let frames = Tensor::from_fn(&[n, 1, h, w], |_| rng.uniform(-1.0, 1.0) as f32);
    let flows = Tensor::from_fn(&[n, 2, h, w], |_| rng.uniform(-1.0, 1.0) as f32);
    CoupleSet::new(frames, flows).unwrap()
}

#[test]
fn generators_keep_input_size_and_stay_in_tanh_range() {
    let mut rng = SplitMix64::new(1);
    for (h, w) in [(64, 64), (32, 48), (8, 16)] {
        let x = random_set(2, h, w, 3);
        for d in Direction::BOTH {
            let g = GeneratorNet::new(d, &mut rng).unwrap();
            let (cond, target) = x.sides(d);
            let y = g.predict(cond).unwrap();
            assert_eq!(y.shape(), target.shape());
            assert!(y.data().iter().all(|v| v.abs() < 1.0));
            let disc = DiscriminatorNet::new(d, &mut rng).unwrap();
            assert_eq!(disc.logits(cond, target).unwrap().shape(), &[2, 1, h / 8, w / 8]);
        }
    }
}

#[test]
fn shape_mismatches_are_rejected() {
    let mut rng = SplitMix64::new(1);
    let g = GeneratorNet::new(Direction::FrameToFlow, &mut rng).unwrap();
    // flow fed to the frame-conditioned generator
    assert!(g.predict(&Tensor::zeros(&[1, 2, 64, 64])).is_err());
    assert!(g.predict(&Tensor::zeros(&[1, 1, 60, 64])).is_err());
    let d = DiscriminatorNet::new(Direction::FrameToFlow, &mut rng).unwrap();
    assert!(d.logits(&Tensor::zeros(&[1, 1, 64, 64]), &Tensor::zeros(&[1, 2, 32, 32])).is_err());
    assert!(CoupleSet::new(Tensor::zeros(&[2, 1, 8, 8]), Tensor::zeros(&[3, 2, 8, 8])).is_err());
    assert!(CoupleSet::new(Tensor::zeros(&[2, 2, 8, 8]), Tensor::zeros(&[2, 2, 8, 8])).is_err());
}

#[test]
fn zeroed_discriminator_scores_one_half() {
    let mut rng = SplitMix64::new(2);
    let mut d = DiscriminatorNet::new(Direction::FlowToFrame, &mut rng).unwrap();
    for p in d.params.iter_mut() {
        p.tensor.data_mut().iter_mut().for_each(|v| *v = 0.0);
    }
    let x = random_set(1, 64, 64, 5);
    let (cond, target) = x.sides(Direction::FlowToFrame);
    let s = score_map(&d, cond, target).unwrap();
    assert_eq!((s.h, s.w), (8, 8));
    assert!(s.values.iter().all(|&v| v == 0.5));
    assert_eq!(s.mean_score, 0.5);
    // score_map takes exactly one sample
    let two = random_set(2, 64, 64, 5);
    let (cond, target) = two.sides(Direction::FlowToFrame);
    assert!(score_map(&d, cond, target).is_err());
}

#[test]
fn hand_set_maps_give_their_difference() {
    let obs = ScoreMap::new(8, 8, vec![0.9; 64]).unwrap();
    let pred = ScoreMap::new(8, 8, vec![0.2; 64]).unwrap();
    let dm = DistanceMap::between(&obs, &pred).unwrap();
    assert!(dm.values.iter().all(|&v| (v - 0.7).abs() < 1e-6));
    assert!((dm.mean_score - 0.7).abs() < 1e-6);
    let same = DistanceMap::between(&obs, &obs).unwrap();
    assert!(same.values.iter().all(|&v| v == 0.0) && same.mean_score == 0.0);
    assert!(DistanceMap::between(&obs, &ScoreMap::new(4, 16, vec![0.2; 64]).unwrap()).is_err());
    assert!(ScoreMap::new(8, 8, vec![0.5; 63]).is_err());
}

proptest! {
    #[test]
    fn distance_and_fusion_match_brute_force(
        a in prop::collection::vec(0f32..1.0, 16),
        b in prop::collection::vec(0f32..1.0, 16),
        c in prop::collection::vec(0f32..1.0, 16),
        d in prop::collection::vec(0f32..1.0, 16),
    ) {
        let m = |v: &Vec<f32>| ScoreMap::new(4, 4, v.clone()).unwrap();
        let fo = DistanceMap::between(&m(&a), &m(&b)).unwrap();
        let of = DistanceMap::between(&m(&c), &m(&d)).unwrap();
        let fused = DistanceMap::fuse(&fo, &of).unwrap();
        let mut total = 0.0f64;
        for i in 0..16 {
            let want = (((a[i] as f64 - b[i] as f64).abs() + (c[i] as f64 - d[i] as f64).abs()) / 2.0) as f32;
            prop_assert!((fused.values[i] - want).abs() <= 1e-6);
            prop_assert!((0.0..=1.0).contains(&fused.values[i]));
            total += fused.values[i] as f64;
        }
        prop_assert!((fused.mean_score - total / 16.0).abs() < 1e-12);
        prop_assert!(fused.max_score() >= fused.mean_score);
    }
}

#[test]
fn distance_map_is_the_fused_brute_force_of_both_directions() {
    let set = random_set(20, 32, 32, 7);
    let cfg = TrainConfig { epochs: 1, seed: 3, ..TrainConfig::default() };
    let pair = train_pair(&set, &cfg, |_| {}).unwrap();
    let x = set.select(&[4]).unwrap();
    let dm = distance_map(&pair, &x).unwrap();
    assert_eq!((dm.h, dm.w), (4, 4));
    let p = predict_couple(&pair, &x).unwrap();
    assert_eq!(p.flows.shape(), &[1, 2, 32, 32]);
    assert_eq!(p.frames.shape(), &[1, 1, 32, 32]);
    // recompute each direction by hand from raw logits
    let sig = |z: f32| 1.0 / (1.0 + (-(z as f64)).exp());
    let mut want = [0.0f64; 16];
    for (d, generated) in [(Direction::FrameToFlow, &p.flows), (Direction::FlowToFrame, &p.frames)] {
        let disc = &pair.nets(d).disc;
        let (cond, real) = x.sides(d);
        let lo = disc.logits(cond, real).unwrap();
        let lp = disc.logits(cond, generated).unwrap();
        for i in 0..16 {
            want[i] += (sig(lo.data()[i]) - sig(lp.data()[i])).abs() / 2.0;
        }
    }
    for i in 0..16 {
        assert!((dm.values[i] as f64 - want[i]).abs() < 1e-6, "{i}: {} vs {}", dm.values[i], want[i]);
    }
    assert!(distance_map(&pair, &set.select(&[0, 1]).unwrap()).is_err());
    // batched and single-couple paths agree
    assert_eq!(pair.distance_maps(&set).unwrap()[4], dm);
}

#[test]
fn too_few_couples_or_bad_config_rejected() {
    let set = random_set(15, 16, 16, 1);
    assert!(matches!(train_pair(&set, &TrainConfig::default(), |_| {}), Err(Error::TooFew { got: 15, .. })));
    let set = random_set(16, 16, 16, 1);
    let bad = TrainConfig { lr: 0.0, ..TrainConfig::default() };
    assert!(matches!(train_pair(&set, &bad, |_| {}), Err(Error::Config(_))));
    let nan = TrainConfig { lambda_l1: f64::NAN, ..TrainConfig::default() };
    assert!(train_pair(&set, &nan, |_| {}).is_err());
}

#[test]
fn diverging_generator_is_stopped() {
    let mut set = random_set(16, 16, 16, 1);
    set.flows.data_mut()[0] = f32::NAN;
    let cfg = TrainConfig { epochs: 1, ..TrainConfig::default() };
    assert!(matches!(train_pair(&set, &cfg, |_| {}), Err(Error::Diverged(_))));
}

fn weights(pair: &CrossModalPair) -> Vec<u32> {
    Direction::BOTH
        .iter()
        .flat_map(|&d| {
            let n = pair.nets(d);
            n.gen.params.iter().chain(n.disc.params.iter()).flat_map(|p| p.tensor.data().to_vec()).collect::<Vec<_>>()
        })
        .map(f32::to_bits)
        .collect()
}

#[test]
fn fixed_seed_reproduces_weights_and_logs() {
    let set = random_set(16, 16, 16, 9);
    let cfg = TrainConfig { epochs: 2, seed: 5, ..TrainConfig::default() };
    let mut rows = Vec::new();
    let a = train_pair(&set, &cfg, |e| rows.push(e.csv_row())).unwrap();
    let b = train_pair(&set, &cfg, |_| {}).unwrap();
    assert_eq!(weights(&a), weights(&b));
    assert_eq!(a.meta, b.meta);
    assert_eq!(rows.len(), 4);
    assert!(rows[0].starts_with("fo,0,") && rows[3].starts_with("of,1,"));
    assert_eq!(a.meta.subset_fingerprint, set.fingerprint());
    let c = train_pair(&set, &TrainConfig { seed: 6, ..cfg }, |_| {}).unwrap();
    assert_ne!(weights(&a), weights(&c));
}

struct Trained {
    set: CoupleSet,
    straight: Vec<usize>,
    curve: Vec<usize>,
    pair: CrossModalPair,
}

fn straight_base() -> &'static Trained {
    static CELL: OnceLock<Trained> = OnceLock::new();
    CELL.get_or_init(|| {
        let seq = synthesize_scenario(&ScenarioConfig { seed: 21, ..ScenarioConfig::default() }).unwrap();
        let set = seq.to_couple_set().unwrap();
        let straight = split_subset(&seq.labels, &[ActivityLabel::Straight]).unwrap();
        let curve = split_subset(&seq.labels, &[ActivityLabel::Curve]).unwrap();
        let cfg = TrainConfig { seed: 21, ..TrainConfig::default() };
        let pair = train_pair(&set.select(&straight).unwrap(), &cfg, |_| {}).unwrap();
        Trained { set, straight, curve, pair }
    })
}

fn mean_abs_diff(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.len() as f64
}

#[test]
fn straight_base_reconstructs_its_flow() {
    let t = straight_base();
    let sub = t.set.select(&t.straight).unwrap();
    let p = t.pair.predict(&sub).unwrap();
    let l1 = mean_abs_diff(p.flows.data(), sub.flows.data());
    assert!(l1 < 0.1, "held-in flow L1 {l1}");
    let one = sub.select(&[3]).unwrap();
    let q = predict_couple(&t.pair, &one).unwrap();
    let l1 = mean_abs_diff(q.flows.data(), one.flows.data());
    assert!(l1 < 0.15, "single frame flow L1 {l1}");
    assert_eq!(q.flows, predict_couple(&t.pair, &one).unwrap().flows);
}

#[test]
fn straight_base_discriminator_stays_in_equilibrium() {
    let t = straight_base();
    let sub = t.set.select(&t.straight).unwrap();
    let p = t.pair.predict(&sub).unwrap();
    for (d, generated) in [(Direction::FrameToFlow, &p.flows), (Direction::FlowToFrame, &p.frames)] {
        let (obs, pred) = t.pair.score_maps(d, &sub, generated).unwrap();
        let real = obs.iter().map(|s| s.mean_score).sum::<f64>() / obs.len() as f64;
        assert!(real > 0.3 && real < 0.9, "{}: mean real score {real}", d.tag());
        let wins = obs.iter().zip(&pred).filter(|(o, p)| o.mean_score > p.mean_score).count();
        assert!(wins * 5 >= obs.len() * 4, "{}: real beats fake on {wins}/{}", d.tag(), obs.len());
    }
}

#[test]
fn curves_look_farther_from_normal_than_straights() {
    let t = straight_base();
    let maps = t.pair.distance_maps(&t.set).unwrap();
    assert!(maps.iter().all(|m| (m.h, m.w) == (8, 8) && m.values.iter().all(|v| (0.0..=1.0).contains(v))));
    let mean = |idx: &[usize]| idx.iter().map(|&i| maps[i].mean_score).sum::<f64>() / idx.len() as f64;
    let (s, c) = (mean(&t.straight), mean(&t.curve));
    println!("distance: straight {s:.4} curve {c:.4} ratio {:.2}", c / s);
    assert!(c > s, "curve {c} ≤ straight {s}");
}
