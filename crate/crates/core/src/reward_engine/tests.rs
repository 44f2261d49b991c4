use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::diffmath::ParameterSet;
use crate::textembed::Embedder;

fn unit(v: Vec<f64>) -> SentenceEmbedding {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    SentenceEmbedding::from_vector(v.into_iter().map(|x| x / n).collect(), "").unwrap()
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> SentenceEmbedding {
    unit((0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
}

/// Exhaustive scan over (t, k): goal k pays at the smallest t whose cosine
/// exceeds m.
fn scan_oracle(cos: &[Vec<f64>], i: &[f64], alpha: f64, m: f64) -> Vec<f64> {
    let t_len = cos.len();
    let mut out = vec![0.0; t_len];
    for k in 0..i.len() {
        for t in 0..t_len {
            if cos[t][k] > m {
                out[t] += cos[t][k] * i[k];
                break;
            }
        }
    }
    out.iter().map(|r| alpha * r).collect()
}

#[test]
fn match_score_examples() {
    let a = unit(vec![1.0, 0.0]);
    assert_eq!(match_score(&a, &a, 0.5).unwrap(), 1.0);
    let b = unit(vec![0.0, 1.0]);
    assert_eq!(match_score(&a, &b, 0.5).unwrap(), 0.0);
    // cosine exactly 0.5 in floating point
    let e0 = SentenceEmbedding::from_vector(vec![1.0, 0.0, 0.0, 0.0], "").unwrap();
    let c = SentenceEmbedding::from_vector(vec![0.5; 4], "").unwrap();
    assert_eq!(cosine_slices(e0.vector(), c.vector()).unwrap(), 0.5);
    assert_eq!(match_score(&e0, &c, 0.5).unwrap(), 0.0);
    assert_eq!(match_score(&e0, &c, 0.4999).unwrap(), 0.5);
    let d = unit(vec![1.0, 0.0, 0.0]);
    assert!(matches!(match_score(&a, &d, 0.5), Err(Error::Dimension(..))));
}

#[test]
fn single_goal_example() {
    let r = intrinsic_from_cosines(&[vec![0.3], vec![0.6], vec![0.7]], &[2.0], 1.0, 0.5, false).unwrap();
    assert_eq!(r[0], 0.0);
    assert!((r[1] - 1.2).abs() < 1e-12);
    assert_eq!(r[2], 0.0);
    let none = intrinsic_from_cosines(&[vec![0.1], vec![0.5]], &[2.0], 1.0, 0.5, false).unwrap();
    assert_eq!(none, vec![0.0, 0.0]);
}

#[test]
fn repetition_pays_every_step() {
    let r = intrinsic_from_cosines(&[vec![0.3], vec![0.6], vec![0.7]], &[2.0], 1.0, 0.5, true).unwrap();
    assert!((r[1] - 1.2).abs() < 1e-12 && (r[2] - 1.4).abs() < 1e-12);
}

#[test]
fn embedding_path_matches_scan_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for _ in 0..500 {
        // low dimension so that cosines above 0.5 are common
        let u: Vec<_> = (0..15).map(|_| random_unit(&mut rng, 3)).collect();
        let g: Vec<_> = (0..5).map(|_| random_unit(&mut rng, 3)).collect();
        let i: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let cos: Vec<Vec<f64>> = u
            .iter()
            .map(|u| g.iter().map(|g| cosine_slices(u.vector(), g.vector()).unwrap()).collect())
            .collect();
        let got = rollout_intrinsic_rewards(&u, &g, &i, 1.0, 0.5).unwrap();
        assert_eq!(got, scan_oracle(&cos, &i, 1.0, 0.5));
        let m = MatchResult::compute(&u, &g, 0.5).unwrap();
        for k in 0..5 {
            let contributions = (0..15).filter(|&t| m.w[t][k] > 0.0 && m.first_hit[k] == Some(t)).count();
            assert!(contributions <= 1);
            if let Some(t) = m.first_hit[k] {
                assert!((0..t).all(|s| cos[s][k] <= 0.5));
                assert!(cos[t][k] > 0.5);
            }
        }
    }
}

proptest! {
    #[test]
    fn linear_in_alpha(
        cos in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 4), 1..16),
        i in prop::collection::vec(-3.0f64..3.0, 4),
        alpha in 0.0f64..4.0,
    ) {
        let one = intrinsic_from_cosines(&cos, &i, alpha, 0.5, false).unwrap();
        let two = intrinsic_from_cosines(&cos, &i, 2.0 * alpha, 0.5, false).unwrap();
        for (a, b) in one.iter().zip(&two) {
            prop_assert_eq!(2.0 * a, *b);
        }
        prop_assert_eq!(one, scan_oracle(&cos, &i, alpha, 0.5));
    }

    #[test]
    fn scores_are_zero_or_above_threshold(cos in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..16)) {
        let m = MatchResult::from_cosines(&cos, 0.5);
        for row in &m.w {
            for &w in row {
                prop_assert!(w == 0.0 || (w > 0.5 && w <= 1.0));
            }
        }
    }

    #[test]
    fn normalize_is_monotone(a in -10.0f64..10.0, b in -10.0f64..10.0, xs in prop::collection::vec(0.0f64..5.0, 2..10)) {
        let mut s = RunningStats::new();
        xs.iter().for_each(|&x| s.push(x));
        let n = normalize(&[a, b], &s, false);
        if a < b {
            prop_assert!(n[0] <= n[1]);
        }
    }
}

/// Forward pass of the layered SiLU network from raw parameter values.
fn oracle_forward(params: &ParameterSet, prefix: &str, x: &[f64]) -> Vec<f64> {
    let mut h = x.to_vec();
    let mut layer = 0;
    while let Some(wid) = params.find(&format!("{prefix}.{layer}.w")) {
        let w = params.value(wid);
        let b = params.value(params.find(&format!("{prefix}.{layer}.b")).unwrap());
        let (rows, cols) = (w.shape()[0], w.shape()[1]);
        let mut out = b.data().to_vec();
        for j in 0..cols {
            for i in 0..rows {
                out[j] += h[i] * w.data()[i * cols + j];
            }
        }
        layer += 1;
        if params.find(&format!("{prefix}.{layer}.w")).is_some() {
            out.iter_mut().for_each(|v| *v = *v / (1.0 + (-*v).exp()));
        }
        h = out;
    }
    h
}

#[test]
fn error_matches_oracle_forward() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let pair = RndPair::new(64, &RndConfig::default(), &mut rng);
    let g = Embedder::default().embed("collect the wood").unwrap();
    let t = oracle_forward(pair.target_params(), "rnd.target", g.vector());
    let p = oracle_forward(pair.predictor_params(), "rnd.predictor", g.vector());
    assert_eq!(t.len(), 32);
    let e: f64 = t.iter().zip(&p).map(|(a, b)| (a - b).powi(2)).sum();
    assert!((rnd_error(&g, &pair).unwrap() - e).abs() < 1e-9);
}

#[test]
fn copied_predictor_has_zero_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let pair = RndPair::new(16, &RndConfig::default(), &mut rng).with_copied_predictor();
    for _ in 0..20 {
        assert_eq!(rnd_error(&random_unit(&mut rng, 16), &pair).unwrap(), 0.0);
    }
}

#[test]
fn errors_non_negative() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let pair = RndPair::new(16, &RndConfig::default(), &mut rng);
    let gs: Vec<_> = (0..1000).map(|_| random_unit(&mut rng, 16)).collect();
    let rows: Vec<&[f64]> = gs.iter().map(|g| g.vector()).collect();
    assert!(pair.errors(&rows).unwrap().iter().all(|&e| e >= 0.0));
}

#[test]
fn normalize_examples() {
    let mut s = RunningStats::new();
    assert_eq!(normalize(&[3.0], &s, false), vec![3.0]);
    s.push(1.0);
    assert_eq!(normalize(&[3.0], &s, false), vec![3.0]);
    s.push(3.0);
    let (m, sd) = (s.mean(), s.std());
    assert_eq!(m, 2.0);
    let n = normalize(&[m, m + sd], &s, false);
    assert_eq!(n[0], 0.0);
    assert!((n[1] - 1.0).abs() < 1e-12);
    let batch = [0.5, 1.5, 7.0];
    let n = normalize(&batch, &s, false);
    for (x, y) in batch.iter().zip(&n) {
        assert_eq!(*y, (x - m) / sd);
    }
    assert_eq!(normalize(&[0.0], &s, true), vec![0.0]);
    let before = s.clone();
    let _ = normalize(&batch, &s, false);
    assert_eq!(s, before);
}

#[test]
fn stats_floor_and_welford() {
    let mut s = RunningStats::new();
    s.push(2.0);
    s.push(2.0);
    assert_eq!(s.std(), SIGMA_FLOOR);
    let xs = [1.0, 4.0, 9.0, 16.0, 25.0];
    let mut s = RunningStats::new();
    xs.iter().for_each(|&x| s.push(x));
    let mean = xs.iter().sum::<f64>() / 5.0;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
    assert!((s.mean() - mean).abs() < 1e-12);
    assert!((s.std() - var.sqrt()).abs() < 1e-12);
}

#[test]
fn update_keeps_target_frozen_and_learns() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let embedder = Embedder::default();
    let mut pair = RndPair::new(embedder.dim(), &RndConfig::default(), &mut rng);
    let target_before = pair.target_params().flat_values();
    let trained: Vec<_> = [
        "collect the wood",
        "place the table",
        "craft the wood pickaxe",
        "collect the stone",
        "craft the stone pickaxe",
        "move",
        "noop",
        "explore the map",
    ]
    .iter()
    .map(|t| embedder.embed(t).unwrap())
    .collect();
    let mut stats = RunningStats::new();
    let mean_err = |p: &RndPair| trained.iter().map(|g| rnd_error(g, p).unwrap()).sum::<f64>() / 8.0;
    let initial = mean_err(&pair);
    for _ in 0..500 {
        rnd_update(&trained, &mut pair, &mut stats).unwrap();
    }
    let after = mean_err(&pair);
    assert_eq!(pair.target_params().flat_values(), target_before);
    assert_eq!(stats.count(), 500);
    assert!(after <= 0.5 * initial, "{initial} -> {after}");
    let novel = rnd_error(&embedder.embed("attack the zombie").unwrap(), &pair).unwrap();
    assert!(novel >= 2.0 * after, "novel {novel} trained {after}");
}

#[test]
fn update_rejects_empty_batch() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut pair = RndPair::new(4, &RndConfig::default(), &mut rng);
    let mut stats = RunningStats::new();
    assert!(rnd_update(&[], &mut pair, &mut stats).is_err());
}
