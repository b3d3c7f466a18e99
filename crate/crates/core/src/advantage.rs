//! Group advantage estimators and the exact advantage of a fixed policy.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::env::RewardRule;
use crate::error::{invalid_arg, Error, Result};
use crate::policy::ProbVocab;
use crate::scalar::{mean, population_std, Scalar};

pub const DEFAULT_GRPO_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    Ppo,
    Rloo,
    Grpo,
    GrpoNoStd,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Grpo,
        EstimatorKind::GrpoNoStd,
        EstimatorKind::Rloo,
        EstimatorKind::Ppo,
    ];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ppo => "ppo",
            EstimatorKind::Rloo => "rloo",
            EstimatorKind::Grpo => "grpo",
            EstimatorKind::GrpoNoStd => "grpo-nostd",
        }
    }

    /// Smallest group size for which the estimator is defined.
    pub fn min_group_size(self) -> usize {
        match self {
            EstimatorKind::Rloo | EstimatorKind::Grpo => 2,
            EstimatorKind::Ppo | EstimatorKind::GrpoNoStd => 1,
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "ppo" => Ok(EstimatorKind::Ppo),
            "rloo" => Ok(EstimatorKind::Rloo),
            "grpo" => Ok(EstimatorKind::Grpo),
            "grpo-nostd" | "grpo-no-std" => Ok(EstimatorKind::GrpoNoStd),
            other => invalid_arg(format!("unknown estimator {other:?}")),
        }
    }
}

/// Estimator choice plus the GRPO denominator stabiliser.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpec<T> {
    pub kind: EstimatorKind,
    pub eps: T,
}

impl<T: Scalar> EstimatorSpec<T> {
    pub fn new(kind: EstimatorKind) -> Self {
        Self {
            kind,
            eps: T::lit(DEFAULT_GRPO_EPS),
        }
    }

    pub fn with_eps(kind: EstimatorKind, eps: T) -> Result<Self> {
        if !(eps >= T::zero()) {
            return invalid_arg(format!("eps must be nonnegative, got {eps}"));
        }
        Ok(Self { kind, eps })
    }

    /// Advantages of one group. `baseline` is only read by PPO.
    pub fn advantages(&self, rewards: &[T], baseline: T) -> Result<Vec<T>> {
        match self.kind {
            EstimatorKind::Ppo => adv_ppo(rewards, baseline),
            EstimatorKind::Rloo => adv_rloo(rewards),
            EstimatorKind::Grpo => adv_grpo(rewards, self.eps),
            EstimatorKind::GrpoNoStd => adv_grpo_nostd(rewards),
        }
    }
}

fn require_nonempty<T>(rewards: &[T]) -> Result<()> {
    if rewards.is_empty() {
        return invalid_arg("advantage estimators need at least one reward");
    }
    Ok(())
}

/// `r_i - V(s)`.
pub fn adv_ppo<T: Scalar>(rewards: &[T], value: T) -> Result<Vec<T>> {
    require_nonempty(rewards)?;
    Ok(rewards.iter().map(|&r| r - value).collect())
}

/// `r_i - mean(r_{j != i})`.
pub fn adv_rloo<T: Scalar>(rewards: &[T]) -> Result<Vec<T>> {
    let g = rewards.len();
    if g < 2 {
        return invalid_arg(format!("leave-one-out baseline needs G >= 2, got {g}"));
    }
    // r_i - mean(others) = G/(G-1) * (r_i - mean(r))
    let m = mean(rewards);
    let scale = T::from_usize_lossy(g) / T::from_usize_lossy(g - 1);
    Ok(rewards.iter().map(|&r| scale * (r - m)).collect())
}

/// `r_i - mean(r)`.
pub fn adv_grpo_nostd<T: Scalar>(rewards: &[T]) -> Result<Vec<T>> {
    require_nonempty(rewards)?;
    let m = mean(rewards);
    Ok(rewards.iter().map(|&r| r - m).collect())
}

/// `(r_i - mean(r)) / (std(r) + eps)` with the population standard deviation.
pub fn adv_grpo<T: Scalar>(rewards: &[T], eps: T) -> Result<Vec<T>> {
    require_nonempty(rewards)?;
    if !(eps >= T::zero()) {
        return invalid_arg(format!("eps must be nonnegative, got {eps}"));
    }
    let m = mean(rewards);
    let denom = population_std(rewards) + eps;
    Ok(rewards
        .iter()
        .map(|&r| {
            let centred = r - m;
            // 0/0 only arises for a constant group with eps = 0.
            if centred == T::zero() {
                T::zero()
            } else {
                centred / denom
            }
        })
        .collect())
}

/// Policy-averaged rewards for each answer: `mu_1 = E[r(p', 1)]`, `mu_0 = E[r(p', 0)]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardMoments<T> {
    pub mu0: T,
    pub mu1: T,
}

fn normalisation_tol<T: Scalar>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(256.0))
}

/// Validates a distribution over `vocab` and returns its reward moments.
pub fn reward_moments<T: Scalar>(
    policy_dist: &[T],
    vocab: &ProbVocab<T>,
    rule: RewardRule,
) -> Result<RewardMoments<T>> {
    if policy_dist.len() != vocab.len() {
        return invalid_arg(format!(
            "distribution has {} entries, vocabulary has {}",
            policy_dist.len(),
            vocab.len()
        ));
    }
    if policy_dist.iter().any(|&w| !(w >= T::zero())) {
        return invalid_arg("distribution has negative or NaN mass");
    }
    let total: T = policy_dist.iter().copied().sum();
    if (total - T::one()).abs() > normalisation_tol() {
        return invalid_arg(format!("distribution sums to {total}, not 1"));
    }
    let mut mu0 = T::zero();
    let mut mu1 = T::zero();
    for (&w, &p) in policy_dist.iter().zip(vocab.tokens()) {
        if w > T::zero() {
            mu0 = mu0 + w * rule.eval(p, false);
            mu1 = mu1 + w * rule.eval(p, true);
        }
    }
    Ok(RewardMoments { mu0, mu1 })
}

impl<T: Scalar> RewardMoments<T> {
    /// `p (r(p_hat,1) - mu_1) + (1-p) (r(p_hat,0) - mu_0)`.
    pub fn advantage(&self, p_true: T, p_hat: T, rule: RewardRule) -> T {
        p_true * (rule.eval(p_hat, true) - self.mu1)
            + (T::one() - p_true) * (rule.eval(p_hat, false) - self.mu0)
    }
}

fn check_query<T: Scalar>(vocab: &ProbVocab<T>, p_true: T, p_hat: T) -> Result<()> {
    if !(p_true >= T::zero() && p_true <= T::one()) {
        return invalid_arg(format!("p_true = {p_true} outside [0, 1]"));
    }
    if vocab.index_of(p_hat).is_none() {
        return invalid_arg(format!("p_hat = {p_hat} is not a vocabulary token"));
    }
    Ok(())
}

/// Exact advantage of predicting `p_hat` for a prompt with answer rate
/// `p_true`, relative to the policy `policy_dist` over `vocab`.
pub fn true_advantage<T: Scalar>(
    policy_dist: &[T],
    vocab: &ProbVocab<T>,
    p_true: T,
    p_hat: T,
    rule: RewardRule,
) -> Result<T> {
    let moments = reward_moments(policy_dist, vocab, rule)?;
    check_query(vocab, p_true, p_hat)?;
    Ok(moments.advantage(p_true, p_hat, rule))
}

/// Expected mean-centred (no std) group advantage: `(G-1)/G * A`.
pub fn expected_nostd_advantage<T: Scalar>(
    policy_dist: &[T],
    vocab: &ProbVocab<T>,
    p_true: T,
    p_hat: T,
    rule: RewardRule,
    g: usize,
) -> Result<T> {
    if g < 1 {
        return invalid_arg("group size must be at least 1");
    }
    let a = true_advantage(policy_dist, vocab, p_true, p_hat, rule)?;
    Ok(nostd_scale::<T>(g) * a)
}

/// `(G-1)/G`.
pub fn nostd_scale<T: Scalar>(g: usize) -> T {
    T::from_usize_lossy(g - 1) / T::from_usize_lossy(g)
}
