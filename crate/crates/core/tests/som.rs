use hsaw::rng::SplitMix64;
use hsaw::som::{init_som, train_som, SomGrid, SomTrainConfig};
use hsaw::Error;
use proptest::prelude::*;

fn cfg(rows: usize, cols: usize, seed: u64) -> SomTrainConfig {
    SomTrainConfig { rows, cols, seed, ..SomTrainConfig::default() }
}

fn blob(center: &[f64], n: usize, spread: f64, rng: &mut SplitMix64) -> Vec<Vec<f64>> {
    (0..n).map(|_| center.iter().map(|c| c + spread * rng.normal()).collect()).collect()
}

fn nearest(protos: &[Vec<f64>], x: &[f64]) -> usize {
    let d = |p: &Vec<f64>| p.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let mut best = 0;
    for i in 1..protos.len() {
        if d(&protos[i]) < d(&protos[best]) {
            best = i;
        }
    }
    best
}

#[test]
fn repeated_vector_is_a_fixed_point() {
    let v = vec![0.3, -0.2, 0.9];
    let feats = vec![v.clone(); 10];
    let grid = train_som(&feats, &cfg(1, 1, 4)).unwrap();
    assert!(grid.trained);
    assert!(grid.prototypes[0].iter().zip(&v).all(|(a, b)| (a - b).abs() < 1e-3));
    assert!(grid.quantization_error(&feats).unwrap() < 1e-3);
}

#[test]
fn two_blobs_get_one_prototype_each() {
    let mut rng = SplitMix64::new(8);
    let a = blob(&[0.0; 4], 40, 0.05, &mut rng);
    let b = blob(&[1.0; 4], 40, 0.05, &mut rng);
    let feats: Vec<Vec<f64>> = a.iter().chain(&b).cloned().collect();
    for seed in 0..5 {
        let grid = train_som(&feats, &cfg(1, 2, seed)).unwrap();
        let ia = grid.bmu(&a[0]).unwrap();
        assert!(a.iter().all(|x| grid.bmu(x).unwrap() == ia));
        assert!(b.iter().all(|x| grid.bmu(x).unwrap() == 1 - ia));
        // each prototype sits inside its blob
        assert!(grid.prototypes[ia].iter().all(|v| v.abs() < 0.2));
        assert!(grid.prototypes[1 - ia].iter().all(|v| (v - 1.0).abs() < 0.2));
    }
}

#[test]
fn same_seed_same_prototypes() {
    let mut rng = SplitMix64::new(1);
    let feats = blob(&[0.5; 8], 50, 0.3, &mut rng);
    assert_eq!(train_som(&feats, &cfg(3, 3, 2)).unwrap(), train_som(&feats, &cfg(3, 3, 2)).unwrap());
    assert_ne!(train_som(&feats, &cfg(3, 3, 2)).unwrap(), train_som(&feats, &cfg(3, 3, 3)).unwrap());
}

#[test]
fn too_few_samples_or_ragged_features_rejected() {
    let feats = vec![vec![0.0, 1.0]; 15];
    assert!(matches!(train_som(&feats, &cfg(4, 4, 0)), Err(Error::TooFew { got: 15, need: 16, .. })));
    let mut ragged = vec![vec![0.0, 1.0]; 16];
    ragged[9] = vec![0.0];
    assert!(train_som(&ragged, &cfg(4, 4, 0)).is_err());
    let mut nan = vec![vec![0.0, 1.0]; 16];
    nan[3][1] = f64::NAN;
    assert!(train_som(&nan, &cfg(4, 4, 0)).is_err());
}

#[test]
fn training_reduces_quantization_error() {
    let mut rng = SplitMix64::new(3);
    let mut feats = Vec::new();
    for k in 0..5 {
        feats.extend(blob(&[k as f64 * 0.2; 16], 30, 0.03, &mut rng));
    }
    let c = cfg(4, 4, 1);
    let before = init_som(&feats, &c).unwrap();
    assert!(!before.trained);
    let after = train_som(&feats, &c).unwrap();
    let (q0, q1) = (before.quantization_error(&feats).unwrap(), after.quantization_error(&feats).unwrap());
    assert!(q1 < q0, "{q1} ≥ {q0}");
}

proptest! {
    #[test]
    fn bmu_equals_exhaustive_search(seed in 0u64..10_000, k in 1usize..12, dim in 1usize..9) {
        let mut rng = SplitMix64::new(seed);
        let mut protos: Vec<Vec<f64>> = (0..k).map(|_| (0..dim).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
        // force an exact duplicate so the tie rule is exercised
        if k > 2 {
            protos[k - 1] = protos[1].clone();
        }
        let grid = SomGrid::from_prototypes(1, k, protos.clone()).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform(-1.5, 1.5)).collect();
            prop_assert_eq!(grid.bmu(&x).unwrap(), nearest(&protos, &x));
        }
        for (i, p) in protos.iter().enumerate() {
            prop_assert_eq!(grid.bmu(p).unwrap(), protos.iter().position(|q| q == p).unwrap());
            let _ = i;
        }
    }

    #[test]
    fn prototypes_stay_inside_the_feature_box(seed in 0u64..1000, n in 16usize..60) {
        let mut rng = SplitMix64::new(seed);
        let feats: Vec<Vec<f64>> = (0..n).map(|_| (0..6).map(|_| rng.uniform(-2.0, 3.0)).collect()).collect();
        let c = SomTrainConfig { epochs: 5, ..cfg(4, 4, seed) };
        let grid = train_som(&feats, &c).unwrap();
        for j in 0..6 {
            let lo = feats.iter().map(|f| f[j]).fold(f64::INFINITY, f64::min);
            let hi = feats.iter().map(|f| f[j]).fold(f64::NEG_INFINITY, f64::max);
            for p in &grid.prototypes {
                prop_assert!(p[j] >= lo - 1e-12 && p[j] <= hi + 1e-12);
            }
        }
    }
}
