use super::*;
use crate::autodiff::Tensor;
use crate::models::{DiscriminatorModel, GeneratorModel, MlpSpec};
use crate::oracle::{standard_grid_ebm, GaussianModel};
use crate::rng::SeededRng;

fn stats_with(diag: Vec<f64>, epsilon: f64) -> FisherStats {
    FisherStats {
        mean_grad: vec![0.0; diag.len()],
        diag_info: diag,
        n_samples: 2,
        epsilon,
        model_id: "test".into(),
        seed: None,
    }
}

fn small_gan(seed: u64) -> (DiscriminatorModel, GeneratorModel) {
    let mut rng = SeededRng::from_seed(seed);
    let d = DiscriminatorModel::init(MlpSpec::discriminator(2, &[8, 8]).unwrap(), true, &mut rng);
    let g = GeneratorModel::init(MlpSpec::generator(4, &[8], 2).unwrap(), &mut rng);
    (d, g)
}

#[test]
fn normalization_arithmetic() {
    let s = stats_with(vec![1.0, 1.0], 0.0);
    assert_eq!(afv_normalize(&[2.0, -2.0], &s).unwrap(), vec![2.0, -2.0]);
    let s = stats_with(vec![4.0, 1.0], 0.0);
    assert_eq!(afv_normalize(&[2.0, 3.0], &s).unwrap(), vec![1.0, 3.0]);
    assert!(afv_normalize(&[1.0], &s).is_err());
    let s = stats_with(vec![0.0, 1.0], 0.0);
    assert_eq!(afv_normalize(&[5.0, 1.0], &s).unwrap(), vec![0.0, 1.0]);
}

#[test]
fn constant_generator_gives_zero_information() {
    let (d, mut g) = small_gan(1);
    g.params_mut().values_mut().fill(0.0);
    let s = fisher_stats_estimate(&d, &g, 20, DEFAULT_EPSILON, 2).unwrap();
    assert!(s.diag_info.iter().all(|&v| v == 0.0));
    let v = extract_afv(&d, &s, &[0.3, 0.3], "x").unwrap();
    assert!(v.values.iter().all(|v| v.is_finite()));
}

#[test]
fn estimation_set_scores_have_zero_mean_and_unit_whitened_variance() {
    let (d, g) = small_gan(3);
    let n = 200;
    let s = fisher_stats_estimate(&d, &g, n, 0.0, 4).unwrap();
    let samples = estimation_samples(&g, n, 4).unwrap();
    let scores: Vec<Vec<f64>> = samples.rows().map(|x| fisher_score(&d, &s, x).unwrap()).collect();
    let mean = mean_vector(&scores).unwrap();
    assert!(
        mean.iter().all(|m| m.abs() <= 1e-10),
        "{:?}",
        mean.iter().fold(0.0f64, |a, b| a.max(b.abs()))
    );
    let whitened: Vec<Vec<f64>> = scores.iter().map(|u| afv_normalize(u, &s).unwrap()).collect();
    for i in 0..s.len() {
        if s.diag_info[i] == 0.0 {
            continue;
        }
        let var = whitened.iter().map(|w| w[i] * w[i]).sum::<f64>() / n as f64;
        assert!((var - 1.0).abs() < 1e-6, "coordinate {i}: {var}");
    }
}

#[test]
fn estimate_is_deterministic_and_needs_two_samples() {
    let (d, g) = small_gan(5);
    let a = fisher_stats_estimate(&d, &g, 10, 1e-8, 6).unwrap();
    assert_eq!(a, fisher_stats_estimate(&d, &g, 10, 1e-8, 6).unwrap());
    assert_eq!(a.seed, Some(6));
    assert!(matches!(
        fisher_stats_estimate(&d, &g, 1, 1e-8, 6),
        Err(crate::Error::Contract(_))
    ));
}

#[test]
fn score_is_zero_where_gradient_equals_mean() {
    let (d, g) = small_gan(7);
    let x = [0.1, -0.4];
    let mut s = fisher_stats_estimate(&d, &g, 4, 1e-8, 8).unwrap();
    s.mean_grad = d.param_grad(&x).unwrap();
    assert!(fisher_score(&d, &s, &x).unwrap().iter().all(|&v| v == 0.0));
    assert!(fisher_score(&d, &s, &[1.0]).is_err());
}

#[test]
fn statistics_refuse_another_model() {
    let (d, g) = small_gan(9);
    let (other, _) = small_gan(10);
    let s = fisher_stats_estimate(&d, &g, 4, 1e-8, 1).unwrap();
    assert!(fisher_score(&other, &s, &[0.0, 0.0]).is_err());
}

#[test]
fn gaussian_symmetric_points_have_opposite_mean_scores() {
    let m = GaussianModel::new(2.0, 0.5).unwrap();
    // Exact model mean of the energy gradient: (0, 1/σ).
    let s = FisherStats {
        mean_grad: vec![0.0, 1.0 / m.sigma()],
        diag_info: m.fisher_information_exact().to_vec(),
        n_samples: 2,
        epsilon: 0.0,
        model_id: m.model_id(),
        seed: None,
    };
    let a = fisher_score(&m, &s, &[m.mu() + 1.0]).unwrap();
    let b = fisher_score(&m, &s, &[m.mu() - 1.0]).unwrap();
    assert_eq!(a[0], 4.0);
    assert_eq!(b[0], -4.0);
    assert_eq!(a[1], b[1]);
}

#[test]
fn grid_oracle_agreement_at_100k() {
    let ebm = standard_grid_ebm(11).unwrap();
    let s = fisher_stats_estimate(&ebm, &ebm, 100_000, 0.0, 12).unwrap();
    let exact = ebm.fisher_information_diag_exact();
    for (a, b) in s.diag_info.iter().zip(&exact) {
        assert!(((a - b) / b).abs() < 0.05);
    }
    for x in [&ebm.domain()[0], &ebm.domain()[77]] {
        let sampled = fisher_score(&ebm, &s, x).unwrap();
        let exact = ebm.fisher_score_exact(x).unwrap();
        let err: f64 = sampled
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        let norm: f64 = exact.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(err / norm < 0.05, "{}", err / norm);
    }
}

#[test]
fn distance_examples() {
    assert_eq!(fisher_distance(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 5.0);
    assert_eq!(fisher_distance_squared(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 25.0);
    assert_eq!(fisher_distance(&[1.5, -2.0], &[1.5, -2.0]).unwrap(), 0.0);
    assert!(fisher_distance(&[1.0], &[1.0, 2.0]).is_err());
}

#[test]
fn similarity_examples() {
    assert_eq!(fisher_similarity(0.0, 10.0).unwrap(), 1.0);
    assert!((fisher_similarity(0.1, 10.0).unwrap() - 0.36788).abs() < 1e-5);
    assert!(fisher_similarity(0.2, 10.0).unwrap() < fisher_similarity(0.1, 10.0).unwrap());
    assert!(fisher_similarity(0.1, 0.0).is_err());
}

#[test]
fn set_distance_reductions() {
    let (d, g) = small_gan(13);
    let s = fisher_stats_estimate(&d, &g, 64, DEFAULT_EPSILON, 14).unwrap();
    let x = Tensor::from_rows(&[[0.2, 0.7], [-1.0, 0.4], [0.9, 0.9]]).unwrap();
    assert_eq!(set_fisher_distance(&d, &s, &x, &x).unwrap(), 0.0);
    assert_eq!(set_fisher_similarity(&d, &s, &x, &x, 10.0).unwrap(), 1.0);

    let (p, q) = ([0.3, -0.1], [1.2, 0.8]);
    let vp = extract_afv(&d, &s, &p, "p").unwrap();
    let vq = extract_afv(&d, &s, &q, "q").unwrap();
    let single = set_fisher_distance(
        &d,
        &s,
        &Tensor::from_rows(&[p]).unwrap(),
        &Tensor::from_rows(&[q]).unwrap(),
    )
    .unwrap();
    let pair = fisher_distance_squared(&vp.values, &vq.values).unwrap();
    assert_eq!(single.to_bits(), pair.to_bits());

    let empty_err = set_distance_of_afvs::<Vec<f64>>(&[], &[vec![1.0]]);
    assert!(empty_err.is_err());
}

#[test]
fn batch_extraction_matches_single() {
    let (d, g) = small_gan(15);
    let s = fisher_stats_estimate(&d, &g, 16, DEFAULT_EPSILON, 16).unwrap();
    let x = Tensor::from_rows(&[[0.2, 0.7], [-1.0, 0.4]]).unwrap();
    let all = extract_afvs(&d, &s, &x).unwrap();
    for (i, v) in all.iter().enumerate() {
        assert_eq!(v.source_id, i.to_string());
        assert_eq!(v.values, extract_afv(&d, &s, x.row(i), "").unwrap().values);
        assert_eq!(v.model_id, d.fingerprint());
    }
}
