mod common;

use rand::{seq::SliceRandom, Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use speaker_mi::corpus::Gender;
use speaker_mi::eval::{gender_probe, pca_fit, pca_project};

fn random_vectors(n: usize, d: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect()
}

#[test]
fn pca_matches_power_iteration_oracle() {
    let data = random_vectors(200, 128, 3);
    let k = 5;
    let pca = pca_fit(&data, k).unwrap();
    let oracle = common::power_iteration(&common::covariance(&data), k);
    let (val_err, vec_err) = common::compare_pca(&pca, &oracle);
    assert!(val_err < 1e-6, "eigenvalue relative error {val_err}");
    assert!(vec_err < 1e-6, "component error {vec_err}");
}

#[test]
fn pca_structure() {
    let data = random_vectors(60, 12, 8);
    let pca = pca_fit(&data, 6).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            let dot: f64 = pca.components[i].iter().zip(&pca.components[j]).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-8);
        }
    }
    assert!(pca.explained_variance.windows(2).all(|w| w[0] >= w[1]));
    let origin = pca_project(&pca, &pca.mean).unwrap();
    assert!(origin.iter().all(|v| v.abs() < 1e-10));
}

fn blobs(n: usize, seed: u64) -> Vec<(Vec<f64>, Gender)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let g = if i % 2 == 0 { Gender::Female } else { Gender::Male };
            let shift = if g == Gender::Female { 2.0 } else { -2.0 };
            (vec![shift + rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], g)
        })
        .collect()
}

#[test]
fn probe_separates_separable_data() {
    assert_eq!(gender_probe(&blobs(40, 1), &blobs(40, 2)).unwrap(), 1.0);
}

fn unstructured(n: usize, rng: &mut ChaCha8Rng) -> Vec<(Vec<f64>, Gender)> {
    let mut genders: Vec<Gender> = (0..n).map(|i| if i % 2 == 0 { Gender::Female } else { Gender::Male }).collect();
    genders.shuffle(rng);
    genders
        .into_iter()
        .map(|g| ((0..8).map(|_| rng.gen_range(-1.0..1.0)).collect(), g))
        .collect()
}

#[test]
fn probe_with_shuffled_labels_is_at_chance() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut accs = Vec::new();
    for trial in 0..20 {
        let train = unstructured(100, &mut rng);
        let eval = unstructured(100, &mut rng);
        let acc = gender_probe(&train, &eval).unwrap();
        assert!((acc - 0.5).abs() <= 0.15, "trial {trial}: {acc}");
        accs.push(acc);
    }
    let mean = accs.iter().sum::<f64>() / accs.len() as f64;
    assert!((mean - 0.5).abs() <= 0.05, "mean over trials {mean}");
}

#[test]
fn probe_needs_both_genders() {
    let one: Vec<_> = blobs(10, 1).into_iter().filter(|p| p.1 == Gender::Male).collect();
    assert!(gender_probe(&one, &blobs(10, 2)).is_err());
}
