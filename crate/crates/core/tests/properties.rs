use calibrl::policy::{RolloutBatch, RolloutEntry, RolloutGroup, TabularPolicy};
use calibrl::trainer::{
    batch_advantages, clipped_policy_gradient, collect_rollouts, policy_gradient, TrainConfig,
};
use calibrl::{
    adv_grpo, adv_grpo_nostd, adv_rloo, auroc, ece, gen_categories, gen_dataset, reliability,
    reward, EstimatorKind, EstimatorSpec, ProbVocab, RewardRule, Split,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn nostd_is_scaled_rloo_on_random_groups() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let g = rng.random_range(2..=16);
        let r: Vec<f64> = (0..g).map(|_| rng.random_range(-5.0..0.0)).collect();
        let nostd = adv_grpo_nostd(&r).unwrap();
        let rloo = adv_rloo(&r).unwrap();
        let scale = (g - 1) as f64 / g as f64;
        for (a, b) in nostd.iter().zip(&rloo) {
            assert!((a - scale * b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
        let sum: f64 = nostd.iter().sum();
        assert!(sum.abs() < 1e-12);
    }
}

fn rewards() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..0.0, 2..12)
}

proptest! {
    #[test]
    fn nostd_sums_to_zero(r in rewards()) {
        let a = adv_grpo_nostd(&r).unwrap();
        prop_assert!(a.iter().sum::<f64>().abs() < 1e-11);
    }

    #[test]
    fn grpo_scale_invariant(r in rewards(), c in 0.01f64..100.0, b in -50.0f64..50.0) {
        let base = adv_grpo(&r, 0.0).unwrap();
        let moved: Vec<f64> = r.iter().map(|x| c * x + b).collect();
        let a = adv_grpo(&moved, 0.0).unwrap();
        for (x, y) in base.iter().zip(&a) {
            prop_assert!((x - y).abs() < 1e-8, "{x} vs {y}");
        }
    }

    #[test]
    fn auroc_ignores_monotone_maps(
        data in prop::collection::vec((0.0f64..1.0, any::<bool>()), 2..200)
    ) {
        let (preds, labels): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        prop_assume!(labels.iter().any(|&y| y) && labels.iter().any(|&y| !y));
        let cubed: Vec<f64> = preds.iter().map(|p| p * p * p).collect();
        let a: f64 = auroc(&preds, &labels).unwrap();
        let b: f64 = auroc(&cubed, &labels).unwrap();
        prop_assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn ece_is_weighted_bin_gaps(
        data in prop::collection::vec((0.0f64..=1.0, any::<bool>()), 1..200),
        bins in 1usize..20
    ) {
        let (preds, labels): (Vec<f64>, Vec<bool>) = data.into_iter().unzip();
        let table = reliability(&preds, &labels, bins).unwrap();
        let n = preds.len() as f64;
        let manual: f64 = table
            .iter()
            .filter(|b| b.count > 0)
            .map(|b| b.count as f64 / n * (b.frac_pos.unwrap() - b.mean_pred.unwrap()).abs())
            .sum();
        let e: f64 = ece(&preds, &labels, bins).unwrap();
        prop_assert!((e - manual).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&e));
    }

    #[test]
    fn rewards_are_proper(p in 0.0f64..=1.0) {
        let vocab = ProbVocab::<f64>::percent();
        for rule in [RewardRule::LogLikelihood, RewardRule::Brier] {
            let expected = |v: f64| {
                p * reward(v, true, rule).unwrap() + (1.0 - p) * reward(v, false, rule).unwrap()
            };
            let best = vocab
                .tokens()
                .iter()
                .copied()
                .max_by(|a, b| expected(*a).partial_cmp(&expected(*b)).unwrap())
                .unwrap();
            // the best token is one of the two neighbours of p
            prop_assert!((best - p).abs() <= 0.01 + 1e-12, "{rule:?} p={p} best={best}");
        }
    }
}

fn objective(policy: &TabularPolicy<f64>, batch: &RolloutBatch<f64>, adv: &[f64]) -> f64 {
    let mut total = 0.0;
    let mut i = 0;
    for g in &batch.groups {
        for e in &g.entries {
            total += adv[i] * policy.log_prob(g.category_id, e.token).unwrap();
            i += 1;
        }
    }
    total / batch.num_entries() as f64
}

fn random_batch(rng: &mut ChaCha8Rng, k: usize, v: usize, g: usize, n: usize) -> RolloutBatch<f64> {
    let groups = (0..n)
        .map(|_| RolloutGroup {
            category_id: rng.random_range(0..k),
            answer: rng.random(),
            baseline: 0.0,
            entries: (0..g)
                .map(|_| RolloutEntry {
                    token: rng.random_range(0..v),
                    p_hat: 0.5,
                    logprob: 0.0,
                    reward: rng.random_range(-3.0..0.0),
                })
                .collect(),
        })
        .collect();
    RolloutBatch::new(g, groups).unwrap()
}

fn fd_check(policy: &TabularPolicy<f64>, batch: &RolloutBatch<f64>, adv: &[f64]) -> f64 {
    let grad = policy_gradient(policy, batch, adv).unwrap();
    let v = policy.vocab_size();
    let h = 1e-5;
    let mut worst = 0.0f64;
    for idx in 0..grad.len() {
        let rows_at = |d: f64| {
            let mut flat = policy.all_logits().to_vec();
            flat[idx] += d;
            let rows = flat.chunks(v).map(|r| r.to_vec()).collect();
            TabularPolicy::from_rows(policy.vocab().clone(), rows).unwrap()
        };
        let fd =
            (objective(&rows_at(h), batch, adv) - objective(&rows_at(-h), batch, adv)) / (2.0 * h);
        worst = worst.max((fd - grad[idx]).abs());
    }
    worst
}

#[test]
fn gradient_matches_finite_differences_on_miniature() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let vocab = ProbVocab::<f64>::grid(5);
    let rows = vec![
        vec![0.3, -1.2, 0.0, 2.0, 0.5],
        vec![-0.7, 0.1, 1.4, -2.2, 0.9],
    ];
    let policy = TabularPolicy::from_rows(vocab, rows).unwrap();
    let batch = random_batch(&mut rng, 2, 5, 4, 6);
    let adv = batch_advantages(&batch, &EstimatorSpec::new(EstimatorKind::Rloo)).unwrap();
    assert!(fd_check(&policy, &batch, &adv) <= 1e-6);
}

#[test]
fn log_softmax_gradient_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let h = 1e-6;
    for _ in 0..100 {
        let v = rng.random_range(2..10);
        let row: Vec<f64> = (0..v).map(|_| rng.random_range(-4.0..4.0)).collect();
        let token = rng.random_range(0..v);
        let policy = TabularPolicy::from_rows(ProbVocab::grid(v), vec![row.clone()]).unwrap();
        let grad = policy.grad_logprob(0, token).unwrap();
        for j in 0..v {
            let at = |d: f64| {
                let mut r = row.clone();
                r[j] += d;
                TabularPolicy::from_rows(ProbVocab::grid(v), vec![r])
                    .unwrap()
                    .log_prob(0, token)
                    .unwrap()
            };
            let fd = (at(h) - at(-h)) / (2.0 * h);
            assert!((fd - grad[j]).abs() <= 1e-6, "v={v} token={token} j={j}");
        }
    }
}

#[test]
fn on_policy_clipped_gradient_equals_vanilla() {
    let table = gen_categories::<f64>(4, 9).unwrap();
    let data = gen_dataset(&table, 200, 9, Split::Train).unwrap();
    for kind in [
        EstimatorKind::Rloo,
        EstimatorKind::Grpo,
        EstimatorKind::GrpoNoStd,
    ] {
        let mut config = TrainConfig::<f64>::new(kind);
        config.group_size = 4;
        config.prompts_per_rollout = 64;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let rows = (0..4)
            .map(|_| (0..99).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let policy = TabularPolicy::from_rows(ProbVocab::percent(), rows).unwrap();
        let batch = collect_rollouts(&policy, None, &data, &config, 0).unwrap();
        let adv = batch_advantages(&batch, &config.algo).unwrap();
        let vanilla = policy_gradient(&policy, &batch, &adv).unwrap();
        for eps in [0.2, 1e-3] {
            let clipped = clipped_policy_gradient(&policy, &batch, &adv, eps).unwrap();
            assert_eq!(clipped.grad, vanilla, "{kind}");
            assert_eq!(clipped.clip_fraction, 0.0);
        }
    }
}
