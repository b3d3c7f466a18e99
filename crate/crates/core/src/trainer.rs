//! Rollout collection, on- and off-policy gradient updates, PPO value
//! regression and periodic evaluation.

use std::io::{Read, Write};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{EstimatorKind, EstimatorSpec};
use crate::env::{CategoryTable, Dataset, RewardRule};
use crate::error::{invalid_arg, invalid_config, Error, Result};
use crate::metrics::{self, ReliabilityBin, DEFAULT_BINS};
use crate::optim::{Adam, AdamConfig};
use crate::policy::{
    CategorySampler, ProbVocab, Readout, RolloutBatch, RolloutEntry, RolloutGroup, TabularPolicy,
    ValueTable,
};
use crate::rng::{self, tags};
use crate::scalar::Scalar;
use crate::util::fmt_num;

pub const DEFAULT_GROUP_SIZE: usize = 2;
pub const DEFAULT_PROMPTS_PER_ROLLOUT: usize = 8192;
pub const DEFAULT_STEPS: usize = 2000;
pub const DEFAULT_POLICY_LR: f64 = 5e-2;
pub const DEFAULT_VALUE_LR: f64 = 1e-1;
pub const DEFAULT_EVAL_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<T> {
    pub algo: EstimatorSpec<T>,
    pub group_size: usize,
    pub prompts_per_rollout: usize,
    pub updates_per_rollout: usize,
    pub clip_eps: Option<T>,
    pub policy_lr: T,
    pub value_lr: T,
    pub steps: usize,
    pub seed: u64,
    pub reward: RewardRule,
    pub eval_every: usize,
    pub readout: Readout,
}

impl<T: Scalar> Default for TrainConfig<T> {
    fn default() -> Self {
        Self::new(EstimatorKind::Grpo)
    }
}

impl<T: Scalar> TrainConfig<T> {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            algo: EstimatorSpec::new(kind),
            group_size: DEFAULT_GROUP_SIZE,
            prompts_per_rollout: DEFAULT_PROMPTS_PER_ROLLOUT,
            updates_per_rollout: 1,
            clip_eps: None,
            policy_lr: T::lit(DEFAULT_POLICY_LR),
            value_lr: T::lit(DEFAULT_VALUE_LR),
            steps: DEFAULT_STEPS,
            seed: 0,
            reward: RewardRule::default(),
            eval_every: DEFAULT_EVAL_EVERY,
            readout: Readout::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let kind = self.algo.kind;
        if self.group_size < kind.min_group_size() {
            return invalid_config(format!(
                "{kind} needs group_size >= {}, got {}",
                kind.min_group_size(),
                self.group_size
            ));
        }
        if self.prompts_per_rollout == 0 {
            return invalid_config("prompts_per_rollout must be at least 1");
        }
        if self.updates_per_rollout == 0 {
            return invalid_config("updates_per_rollout must be at least 1");
        }
        if self.updates_per_rollout > 1 && self.clip_eps.is_none() {
            return invalid_config("updates_per_rollout > 1 requires clip_eps");
        }
        if let Some(e) = self.clip_eps {
            if !(e > T::zero() && e.is_finite()) {
                return invalid_config(format!("clip_eps must be positive, got {e}"));
            }
        }
        if !(self.algo.eps >= T::zero()) {
            return invalid_config("estimator eps must be nonnegative");
        }
        for (name, lr) in [("policy_lr", self.policy_lr), ("value_lr", self.value_lr)] {
            if !(lr > T::zero() && lr.is_finite()) {
                return invalid_config(format!("{name} must be positive, got {lr}"));
            }
        }
        if self.eval_every == 0 {
            return invalid_config("eval_every must be at least 1");
        }
        Ok(())
    }

    /// Clipped updates are used whenever a clip threshold is configured or the
    /// rollout is reused.
    pub fn uses_clipping(&self) -> bool {
        self.updates_per_rollout > 1 || self.clip_eps.is_some()
    }
}

/// Dataset rows visited at rollout `step`.
///
/// Each epoch walks a fresh permutation of the dataset; rollouts take
/// consecutive slices of the concatenated epochs.
pub fn prompt_indices(n: usize, prompts: usize, seed: u64, step: usize) -> Vec<usize> {
    let start = step * prompts;
    let mut out = Vec::with_capacity(prompts);
    let mut cached: Option<(usize, Vec<usize>)> = None;
    for global in start..start + prompts {
        let epoch = global / n;
        if cached.as_ref().map(|(e, _)| *e) != Some(epoch) {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng::stream(seed, &[tags::EPOCH, epoch as u64]));
            cached = Some((epoch, perm));
        }
        out.push(cached.as_ref().unwrap().1[global % n]);
    }
    out
}

fn check_shapes<T: Scalar>(policy: &TabularPolicy<T>, dataset: &Dataset) -> Result<()> {
    if dataset.is_empty() {
        return invalid_arg("dataset is empty");
    }
    if dataset.num_categories() != policy.num_categories() {
        return invalid_arg(format!(
            "dataset has {} categories, policy has {}",
            dataset.num_categories(),
            policy.num_categories()
        ));
    }
    Ok(())
}

/// Samples `group_size` predictions for each of `prompts_per_rollout` prompts.
///
/// `values` supplies the PPO baseline and is required only for PPO.
pub fn collect_rollouts<T: Scalar>(
    policy: &TabularPolicy<T>,
    values: Option<&ValueTable<T>>,
    dataset: &Dataset,
    config: &TrainConfig<T>,
    step: usize,
) -> Result<RolloutBatch<T>> {
    config.validate()?;
    check_shapes(policy, dataset)?;
    let baselines = match (config.algo.kind, values) {
        (EstimatorKind::Ppo, None) => return invalid_config("PPO rollouts need a value table"),
        (EstimatorKind::Ppo, Some(v)) if v.len() != policy.num_categories() => {
            return invalid_arg("value table size does not match the policy")
        }
        (EstimatorKind::Ppo, Some(v)) => Some(v.values()),
        _ => None,
    };
    let samplers = (0..policy.num_categories())
        .map(|c| CategorySampler::new(policy, c))
        .collect::<Result<Vec<_>>>()?;
    let vocab = policy.vocab();
    let indices = prompt_indices(dataset.len(), config.prompts_per_rollout, config.seed, step);
    let g = config.group_size;
    let rule = config.reward;

    let groups: Vec<RolloutGroup<T>> = indices
        .par_iter()
        .enumerate()
        .map(|(j, &i)| {
            let sample = &dataset.samples()[i];
            let c = sample.category_id;
            let mut rng = rng::stream(config.seed, &[tags::ROLLOUT, step as u64, j as u64]);
            let entries = (0..g)
                .map(|_| {
                    let d = samplers[c].draw(vocab, &mut rng);
                    RolloutEntry {
                        token: d.token,
                        p_hat: d.p_hat,
                        logprob: d.logprob,
                        reward: rule.eval(d.p_hat, sample.answer),
                    }
                })
                .collect();
            RolloutGroup {
                category_id: c,
                answer: sample.answer,
                baseline: baselines.map_or(T::zero(), |b| b[c]),
                entries,
            }
        })
        .collect();
    RolloutBatch::new(g, groups)
}

/// Advantages of every entry, flattened in batch order.
pub fn batch_advantages<T: Scalar>(
    batch: &RolloutBatch<T>,
    spec: &EstimatorSpec<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(batch.num_entries());
    for group in &batch.groups {
        out.extend(spec.advantages(&group.rewards(), group.baseline)?);
    }
    Ok(out)
}

fn check_batch<T: Scalar>(
    policy: &TabularPolicy<T>,
    batch: &RolloutBatch<T>,
    weights: &[T],
) -> Result<()> {
    if weights.len() != batch.num_entries() {
        return invalid_arg(format!(
            "{} advantages for {} entries",
            weights.len(),
            batch.num_entries()
        ));
    }
    let (k, v) = (policy.num_categories(), policy.vocab_size());
    for group in &batch.groups {
        if group.category_id >= k {
            return invalid_arg(format!("category {} out of range", group.category_id));
        }
        if group.entries.iter().any(|e| e.token >= v) {
            return invalid_arg("rollout token out of range");
        }
    }
    Ok(())
}

/// `sum_e w_e * grad log pi(o_e | c_e) / N`, flat row-major like the logits.
fn weighted_score_gradient<T: Scalar>(
    policy: &TabularPolicy<T>,
    batch: &RolloutBatch<T>,
    weights: &[T],
) -> Result<Vec<T>> {
    let (k, v) = (policy.num_categories(), policy.vocab_size());
    let mut token_acc = vec![T::zero(); k * v];
    let mut weight_acc = vec![T::zero(); k];
    let mut w = weights.iter();
    for group in &batch.groups {
        let c = group.category_id;
        for e in &group.entries {
            let we = *w.next().expect("weights checked against batch");
            token_acc[c * v + e.token] = token_acc[c * v + e.token] + we;
            weight_acc[c] = weight_acc[c] + we;
        }
    }
    let n = T::from_usize_lossy(batch.num_entries().max(1));
    let mut grad = vec![T::zero(); k * v];
    for c in 0..k {
        if weight_acc[c] == T::zero() && token_acc[c * v..(c + 1) * v].iter().all(|x| x.is_zero()) {
            continue;
        }
        let probs = policy.probs(c)?;
        for t in 0..v {
            grad[c * v + t] = (token_acc[c * v + t] - weight_acc[c] * probs[t]) / n;
        }
    }
    Ok(grad)
}

/// Empirical policy gradient `mean_e A_e grad log pi(o_e)`.
pub fn policy_gradient<T: Scalar>(
    policy: &TabularPolicy<T>,
    batch: &RolloutBatch<T>,
    advantages: &[T],
) -> Result<Vec<T>> {
    check_batch(policy, batch, advantages)?;
    weighted_score_gradient(policy, batch, advantages)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClippedGradient<T> {
    pub grad: Vec<T>,
    /// Fraction of entries whose ratio left `[1 - eps, 1 + eps]`.
    pub clip_fraction: T,
}

/// Gradient of `mean_e min(ratio_e A_e, clip(ratio_e, 1-eps, 1+eps) A_e)`
/// with `ratio_e = pi(o_e) / pi_old(o_e)`.
pub fn clipped_policy_gradient<T: Scalar>(
    policy: &TabularPolicy<T>,
    batch: &RolloutBatch<T>,
    advantages: &[T],
    clip_eps: T,
) -> Result<ClippedGradient<T>> {
    check_batch(policy, batch, advantages)?;
    if !(clip_eps > T::zero()) {
        return invalid_config(format!("clip_eps must be positive, got {clip_eps}"));
    }
    let log_probs = (0..policy.num_categories())
        .map(|c| policy.log_probs(c))
        .collect::<Result<Vec<_>>>()?;
    let one = T::one();
    let mut weights = Vec::with_capacity(advantages.len());
    let mut clipped = 0usize;
    let mut a = advantages.iter();
    for group in &batch.groups {
        let lp = &log_probs[group.category_id];
        for e in &group.entries {
            let adv = *a.next().expect("advantages checked against batch");
            let ratio = (lp[e.token] - e.logprob).exp();
            if (ratio - one).abs() > clip_eps {
                clipped += 1;
            }
            // The min picks the constant clipped branch exactly in these cases.
            let flat = (adv > T::zero() && ratio > one + clip_eps)
                || (adv < T::zero() && ratio < one - clip_eps);
            weights.push(if flat { T::zero() } else { ratio * adv });
        }
    }
    let n = batch.num_entries();
    Ok(ClippedGradient {
        grad: weighted_score_gradient(policy, batch, &weights)?,
        clip_fraction: if n == 0 {
            T::zero()
        } else {
            T::from_usize_lossy(clipped) / T::from_usize_lossy(n)
        },
    })
}

fn check_optimizer<T: Scalar>(opt: &Adam<T>, dim: usize) -> Result<()> {
    if opt.dim() != dim {
        return invalid_arg(format!(
            "optimizer has {} coordinates, expected {dim}",
            opt.dim()
        ));
    }
    Ok(())
}

/// One ascent step along the on-policy gradient.
pub fn vanilla_pg_step<T: Scalar>(
    policy: &mut TabularPolicy<T>,
    opt: &mut Adam<T>,
    batch: &RolloutBatch<T>,
    config: &TrainConfig<T>,
) -> Result<()> {
    let adv = batch_advantages(batch, &config.algo)?;
    check_optimizer(opt, policy.all_logits().len())?;
    let grad = policy_gradient(policy, batch, &adv)?;
    opt.ascend(policy.all_logits_mut(), &grad);
    Ok(())
}

/// One ascent step on the clipped surrogate; returns the clip fraction.
pub fn clipped_pg_step<T: Scalar>(
    policy: &mut TabularPolicy<T>,
    opt: &mut Adam<T>,
    batch: &RolloutBatch<T>,
    config: &TrainConfig<T>,
) -> Result<T> {
    let eps = config
        .clip_eps
        .ok_or_else(|| Error::InvalidConfiguration("clipped update needs clip_eps".into()))?;
    let adv = batch_advantages(batch, &config.algo)?;
    check_optimizer(opt, policy.all_logits().len())?;
    let out = clipped_policy_gradient(policy, batch, &adv, eps)?;
    opt.ascend(policy.all_logits_mut(), &out.grad);
    Ok(out.clip_fraction)
}

/// One descent step of `mean (psi_c - r)^2` per category present in `batch`.
pub fn value_step<T: Scalar>(
    values: &mut ValueTable<T>,
    opt: &mut Adam<T>,
    batch: &RolloutBatch<T>,
    config: &TrainConfig<T>,
) -> Result<()> {
    if config.algo.kind != EstimatorKind::Ppo {
        return invalid_config(format!("value step requested for {}", config.algo.kind));
    }
    let k = values.len();
    check_optimizer(opt, k)?;
    let mut sums = vec![T::zero(); k];
    let mut counts = vec![0usize; k];
    for group in &batch.groups {
        let c = group.category_id;
        if c >= k {
            return invalid_arg(format!("category {c} out of range"));
        }
        for e in &group.entries {
            sums[c] = sums[c] + e.reward;
            counts[c] += 1;
        }
    }
    let psi = values.values();
    let two = T::lit(2.0);
    let grad: Vec<T> = (0..k)
        .map(|c| {
            if counts[c] == 0 {
                T::zero()
            } else {
                two * (psi[c] - sums[c] / T::from_usize_lossy(counts[c]))
            }
        })
        .collect();
    let mask: Vec<bool> = counts.iter().map(|&n| n > 0).collect();
    opt.descend_masked(values.values_mut(), &grad, &mask);
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CategoryPair<T> {
    pub category: usize,
    pub true_p: T,
    /// Expected token value under the category's distribution.
    pub mean_pred: T,
    /// The value actually reported for evaluation (depends on the readout).
    pub readout_pred: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation<T> {
    pub ece: T,
    pub auroc: T,
    pub accuracy: T,
    pub reliability: Vec<ReliabilityBin<T>>,
    pub categories: Vec<CategoryPair<T>>,
}

/// Scores the policy's per-category predictions against `dataset`'s answers.
pub fn evaluate<T: Scalar>(
    policy: &TabularPolicy<T>,
    table: &CategoryTable<T>,
    dataset: &Dataset,
    readout: Readout,
) -> Result<Evaluation<T>> {
    check_shapes(policy, dataset)?;
    if table.len() != policy.num_categories() {
        return invalid_arg("category table size does not match the policy");
    }
    let categories = (0..policy.num_categories())
        .map(|c| {
            Ok(CategoryPair {
                category: c,
                true_p: table.rates()[c],
                mean_pred: policy.mean_prediction(c)?,
                readout_pred: policy.predict(c, readout)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let preds: Vec<T> = dataset
        .categories()
        .map(|c| categories[c].readout_pred)
        .collect();
    let labels: Vec<bool> = dataset.answers().collect();
    let reliability = metrics::reliability(&preds, &labels, DEFAULT_BINS)?;
    Ok(Evaluation {
        ece: metrics::ece_from_bins(&reliability),
        auroc: metrics::auroc(&preds, &labels)?,
        accuracy: metrics::accuracy(&preds, &labels, T::lit(metrics::DEFAULT_THRESHOLD))?,
        reliability,
        categories,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow<T> {
    pub step: usize,
    pub mean_reward: T,
    pub ece: Option<T>,
    pub auroc: Option<T>,
    pub accuracy: Option<T>,
    pub mean_abs_advantage: T,
    pub clip_fraction: T,
}

/// Per-step training metrics; evaluation columns are filled on evaluation steps.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainLog<T> {
    rows: Vec<LogRow<T>>,
}

const LOG_HEADER: [&str; 7] = [
    "step",
    "mean_reward",
    "ece",
    "auroc",
    "accuracy",
    "mean_abs_advantage",
    "clip_fraction",
];

impl<T: Scalar> TrainLog<T> {
    pub fn new() -> Self {
        Self { rows: Vec::new() }
    }

    pub fn push(&mut self, row: LogRow<T>) -> Result<()> {
        if let Some(last) = self.rows.last() {
            if row.step <= last.step {
                return invalid_arg(format!("log step {} after {}", row.step, last.step));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn rows(&self) -> &[LogRow<T>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(LOG_HEADER)?;
        let opt = |x: Option<T>| x.map(fmt_num).unwrap_or_default();
        for r in &self.rows {
            w.write_record([
                r.step.to_string(),
                fmt_num(r.mean_reward),
                opt(r.ece),
                opt(r.auroc),
                opt(r.accuracy),
                fmt_num(r.mean_abs_advantage),
                fmt_num(r.clip_fraction),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        if r.headers()?.iter().ne(LOG_HEADER) {
            return invalid_arg("unexpected training log header");
        }
        let num = |s: &str| -> Result<T> {
            let v: f64 = s
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad number {s:?}")))?;
            Ok(T::lit(v))
        };
        let opt = |s: &str| -> Result<Option<T>> {
            if s.is_empty() {
                Ok(None)
            } else {
                num(s).map(Some)
            }
        };
        let mut log = Self::new();
        for rec in r.records() {
            let rec = rec?;
            let step = rec[0]
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("bad step {:?}", &rec[0])))?;
            log.push(LogRow {
                step,
                mean_reward: num(&rec[1])?,
                ece: opt(&rec[2])?,
                auroc: opt(&rec[3])?,
                accuracy: opt(&rec[4])?,
                mean_abs_advantage: num(&rec[5])?,
                clip_fraction: num(&rec[6])?,
            })?;
        }
        Ok(log)
    }
}

/// `category,true_p,mean_pred,readout_pred`.
pub fn write_categories_csv<T: Scalar, W: Write>(
    pairs: &[CategoryPair<T>],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["category", "true_p", "mean_pred", "readout_pred"])?;
    for p in pairs {
        w.write_record([
            p.category.to_string(),
            fmt_num(p.true_p),
            fmt_num(p.mean_pred),
            fmt_num(p.readout_pred),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainResult<T> {
    pub policy: TabularPolicy<T>,
    /// Present for PPO only.
    pub values: Option<ValueTable<T>>,
    pub log: TrainLog<T>,
    /// Final metrics on the held-out split.
    pub eval: Evaluation<T>,
    /// Final metrics on the training split.
    pub train_eval: Evaluation<T>,
}

impl<T: Scalar> TrainResult<T> {
    pub fn categories(&self) -> &[CategoryPair<T>] {
        &self.eval.categories
    }
}

/// Trains a uniform tabular policy on `train` for `config.steps` rollouts.
pub fn run<T: Scalar>(
    config: &TrainConfig<T>,
    table: &CategoryTable<T>,
    train: &Dataset,
    eval: &Dataset,
) -> Result<TrainResult<T>> {
    config.validate()?;
    let k = table.len();
    if train.num_categories() != k || eval.num_categories() != k {
        return invalid_arg("datasets and category table disagree on the number of categories");
    }
    let mut policy = TabularPolicy::uniform(k, ProbVocab::percent())?;
    let mut values = ValueTable::zeros(k);
    let mut policy_opt = Adam::new(
        policy.all_logits().len(),
        AdamConfig::with_lr(config.policy_lr),
    )?;
    let mut value_opt = Adam::new(k, AdamConfig::with_lr(config.value_lr))?;
    let is_ppo = config.algo.kind == EstimatorKind::Ppo;
    let clip_eps = config.clip_eps;
    let mut log = TrainLog::new();

    for s in 0..config.steps {
        let batch = collect_rollouts(&policy, is_ppo.then_some(&values), train, config, s)?;
        let adv = batch_advantages(&batch, &config.algo)?;
        let mean_abs_advantage = if adv.is_empty() {
            T::zero()
        } else {
            adv.iter().map(|a| a.abs()).sum::<T>() / T::from_usize_lossy(adv.len())
        };

        let mut clip_sum = T::zero();
        for u in 0..config.updates_per_rollout {
            if config.uses_clipping() {
                let eps = clip_eps.expect("validated");
                let out = clipped_policy_gradient(&policy, &batch, &adv, eps)?;
                policy_opt.ascend(policy.all_logits_mut(), &out.grad);
                if u > 0 {
                    clip_sum = clip_sum + out.clip_fraction;
                }
            } else {
                let grad = policy_gradient(&policy, &batch, &adv)?;
                policy_opt.ascend(policy.all_logits_mut(), &grad);
            }
            if is_ppo {
                value_step(&mut values, &mut value_opt, &batch, config)?;
            }
        }
        let clip_fraction = if config.updates_per_rollout > 1 {
            clip_sum / T::from_usize_lossy(config.updates_per_rollout - 1)
        } else {
            T::zero()
        };

        let step = s + 1;
        let metrics = if step % config.eval_every == 0 || step == config.steps {
            Some(evaluate(&policy, table, eval, config.readout)?)
        } else {
            None
        };
        log.push(LogRow {
            step,
            mean_reward: batch.mean_reward(),
            ece: metrics.as_ref().map(|m| m.ece),
            auroc: metrics.as_ref().map(|m| m.auroc),
            accuracy: metrics.as_ref().map(|m| m.accuracy),
            mean_abs_advantage,
            clip_fraction,
        })?;
    }

    Ok(TrainResult {
        eval: evaluate(&policy, table, eval, config.readout)?,
        train_eval: evaluate(&policy, table, train, config.readout)?,
        values: is_ppo.then_some(values),
        policy,
        log,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::{gen_categories, gen_dataset, Split};

    fn world(k: usize, n: usize) -> (CategoryTable<f64>, Dataset, Dataset) {
        let table = gen_categories(k, 3).unwrap();
        let train = gen_dataset(&table, n, 3, Split::Train).unwrap();
        let eval = gen_dataset(&table, n, 3, Split::Eval).unwrap();
        (table, train, eval)
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::<f64>::new(EstimatorKind::Rloo);
        c.group_size = 1;
        assert!(matches!(c.validate(), Err(Error::InvalidConfiguration(_))));
        let mut c = TrainConfig::<f64>::new(EstimatorKind::Ppo);
        c.group_size = 1;
        assert!(c.validate().is_ok());
        c.updates_per_rollout = 10;
        assert!(c.validate().is_err());
        c.clip_eps = Some(0.2);
        assert!(c.validate().is_ok());
        c.clip_eps = Some(0.0);
        assert!(c.validate().is_err());
    }

    #[test]
    fn prompt_schedule_covers_each_epoch_once() {
        let n = 50;
        let mut seen: Vec<usize> = (0..5).flat_map(|s| prompt_indices(n, 10, 9, s)).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..n).collect::<Vec<_>>());
        // A rollout spanning an epoch boundary.
        assert_eq!(prompt_indices(n, 30, 9, 1).len(), 30);
    }

    #[test]
    fn batch_shape_and_determinism() {
        let (_, train, _) = world(5, 200);
        let policy = TabularPolicy::uniform(5, ProbVocab::percent()).unwrap();
        let mut c = TrainConfig::<f64>::new(EstimatorKind::Grpo);
        c.group_size = 4;
        c.prompts_per_rollout = 512;
        let a = collect_rollouts(&policy, None, &train, &c, 7).unwrap();
        assert_eq!(a.groups.len(), 512);
        assert!(a.groups.iter().all(|g| g.entries.len() == 4));
        let b = collect_rollouts(&policy, None, &train, &c, 7).unwrap();
        assert_eq!(a, b);
        let other = collect_rollouts(&policy, None, &train, &c, 8).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn point_mass_policy_gives_constant_group_rewards() {
        let (_, train, _) = world(3, 100);
        let vocab = ProbVocab::percent();
        let mut rows = vec![vec![-1e3_f64; vocab.len()]; 3];
        for r in rows.iter_mut() {
            r[40] = 0.0;
        }
        let policy = TabularPolicy::from_rows(vocab, rows).unwrap();
        let mut c = TrainConfig::<f64>::new(EstimatorKind::Grpo);
        c.group_size = 6;
        c.prompts_per_rollout = 64;
        let batch = collect_rollouts(&policy, None, &train, &c, 0).unwrap();
        for g in &batch.groups {
            let r = g.rewards();
            assert!(r.iter().all(|&x| x == r[0]));
        }
        assert!(batch_advantages(&batch, &c.algo)
            .unwrap()
            .iter()
            .all(|&a| a == 0.0));
    }

    #[test]
    fn ppo_collection_needs_values() {
        let (_, train, _) = world(3, 100);
        let policy = TabularPolicy::uniform(3, ProbVocab::percent()).unwrap();
        let c = TrainConfig::<f64>::new(EstimatorKind::Ppo);
        assert!(collect_rollouts(&policy, None, &train, &c, 0).is_err());
        let mut v = ValueTable::zeros(3);
        v.set(1, -0.25).unwrap();
        let batch = collect_rollouts(&policy, Some(&v), &train, &c, 0).unwrap();
        assert!(batch
            .groups
            .iter()
            .all(|g| g.baseline == if g.category_id == 1 { -0.25 } else { 0.0 }));
    }

    fn single_group_batch(
        category: usize,
        tokens: &[usize],
        policy: &TabularPolicy<f64>,
    ) -> RolloutBatch<f64> {
        let entries = tokens
            .iter()
            .map(|&t| RolloutEntry {
                token: t,
                p_hat: policy.vocab().value(t),
                logprob: policy.log_prob(category, t).unwrap(),
                reward: RewardRule::LogLikelihood.eval(policy.vocab().value(t), true),
            })
            .collect();
        RolloutBatch::new(
            tokens.len(),
            vec![RolloutGroup {
                category_id: category,
                answer: true,
                baseline: 0.0,
                entries,
            }],
        )
        .unwrap()
    }

    #[test]
    fn zero_advantage_leaves_policy_unchanged() {
        let mut policy = TabularPolicy::uniform(2, ProbVocab::percent()).unwrap();
        let before = policy.clone();
        let batch = single_group_batch(0, &[3, 3, 3], &policy);
        let mut opt = Adam::new(policy.all_logits().len(), AdamConfig::with_lr(0.05)).unwrap();
        let c = TrainConfig::<f64>::new(EstimatorKind::GrpoNoStd);
        vanilla_pg_step(&mut policy, &mut opt, &batch, &c).unwrap();
        assert_eq!(policy, before);
        let mut c = c;
        c.clip_eps = Some(0.2);
        clipped_pg_step(&mut policy, &mut opt, &batch, &c).unwrap();
        assert_eq!(policy, before);
    }

    #[test]
    fn positive_advantage_token_gains_probability() {
        let mut policy = TabularPolicy::uniform(2, ProbVocab::percent()).unwrap();
        let batch = single_group_batch(1, &[90, 10], &policy);
        let before = policy.probs(1).unwrap();
        let mut opt = Adam::new(policy.all_logits().len(), AdamConfig::with_lr(0.05)).unwrap();
        let c = TrainConfig::<f64>::new(EstimatorKind::Rloo);
        vanilla_pg_step(&mut policy, &mut opt, &batch, &c).unwrap();
        let after = policy.probs(1).unwrap();
        assert!(after[90] > before[90]);
        assert!(after[10] < before[10]);
        assert_eq!(policy.probs(0).unwrap(), before);
    }

    #[test]
    fn clipped_step_requires_clip() {
        let mut policy = TabularPolicy::uniform(2, ProbVocab::percent()).unwrap();
        let batch = single_group_batch(0, &[1, 2], &policy);
        let mut opt = Adam::new(policy.all_logits().len(), AdamConfig::with_lr(0.05)).unwrap();
        let c = TrainConfig::<f64>::new(EstimatorKind::Rloo);
        assert!(matches!(
            clipped_pg_step(&mut policy, &mut opt, &batch, &c),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn value_step_rules() {
        let policy = TabularPolicy::uniform(3, ProbVocab::percent()).unwrap();
        let batch = single_group_batch(0, &[49, 49], &policy);
        let m = batch.groups[0].entries[0].reward;
        let mut values = ValueTable::zeros(3);
        values.set(2, 0.7).unwrap();
        let mut opt = Adam::new(3, AdamConfig::with_lr(0.1)).unwrap();
        let c = TrainConfig::<f64>::new(EstimatorKind::Ppo);
        for _ in 0..500 {
            value_step(&mut values, &mut opt, &batch, &c).unwrap();
        }
        assert!((values.get(0).unwrap() - m).abs() <= 0.01 * m.abs());
        assert_eq!(values.get(1).unwrap(), 0.0);
        assert_eq!(values.get(2).unwrap(), 0.7);

        // Already at the batch mean: zero gradient, no movement.
        let mut at_mean = ValueTable::from_values(vec![m, 0.0, 0.0]).unwrap();
        let mut fresh = Adam::new(3, AdamConfig::with_lr(0.1)).unwrap();
        value_step(&mut at_mean, &mut fresh, &batch, &c).unwrap();
        assert_eq!(at_mean.get(0).unwrap(), m);

        let c = TrainConfig::<f64>::new(EstimatorKind::Rloo);
        assert!(matches!(
            value_step(&mut values, &mut opt, &batch, &c),
            Err(Error::InvalidConfiguration(_))
        ));
    }

    #[test]
    fn zero_steps_returns_initial_policy() {
        let (table, train, eval) = world(4, 300);
        let mut c = TrainConfig::<f64>::new(EstimatorKind::Rloo);
        c.steps = 0;
        let out = run(&c, &table, &train, &eval).unwrap();
        assert!(out.log.is_empty());
        assert_eq!(
            out.policy,
            TabularPolicy::uniform(4, ProbVocab::percent()).unwrap()
        );
        assert_eq!(out.categories().len(), 4);
    }

    #[test]
    fn short_run_logs_every_step() {
        let (table, train, eval) = world(4, 300);
        let mut c = TrainConfig::<f64>::new(EstimatorKind::Ppo);
        c.steps = 25;
        c.prompts_per_rollout = 64;
        let out = run(&c, &table, &train, &eval).unwrap();
        assert_eq!(out.log.len(), 25);
        let evals: Vec<usize> = out
            .log
            .rows()
            .iter()
            .filter(|r| r.ece.is_some())
            .map(|r| r.step)
            .collect();
        assert_eq!(evals, vec![10, 20, 25]);
        assert!(out.values.is_some());
        assert!(out.policy.all_logits().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn log_csv_round_trip() {
        let mut log = TrainLog::<f64>::new();
        log.push(LogRow {
            step: 1,
            mean_reward: -0.1 / 3.0,
            ece: None,
            auroc: None,
            accuracy: None,
            mean_abs_advantage: 0.7,
            clip_fraction: 0.0,
        })
        .unwrap();
        log.push(LogRow {
            step: 2,
            mean_reward: -0.2,
            ece: Some(0.123456789012345),
            auroc: Some(0.75),
            accuracy: Some(0.5),
            mean_abs_advantage: 1.0 / 7.0,
            clip_fraction: 0.9,
        })
        .unwrap();
        let mut buf = Vec::new();
        log.write_csv(&mut buf).unwrap();
        assert_eq!(TrainLog::<f64>::read_csv(buf.as_slice()).unwrap(), log);
        assert!(log
            .clone()
            .push(LogRow {
                step: 2,
                ..log.rows()[0]
            })
            .is_err());
    }
}
