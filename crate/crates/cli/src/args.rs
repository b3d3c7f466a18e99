use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use calibrl::trainer::{
    DEFAULT_EVAL_EVERY, DEFAULT_GROUP_SIZE, DEFAULT_POLICY_LR, DEFAULT_PROMPTS_PER_ROLLOUT,
    DEFAULT_STEPS, DEFAULT_VALUE_LR,
};
use calibrl::{
    bias, EstimatorKind, Readout, RewardRule, DEFAULT_CATEGORIES, DEFAULT_DATASET_SIZE,
    DEFAULT_GRPO_EPS,
};

pub const DEFAULT_SEED: u64 = 1;

#[derive(Parser, Debug, Serialize)]
#[command(
    name = "calibrl",
    version,
    about = "Policy-gradient calibration experiments on a synthetic probability-prediction task",
    args_override_self = true
)]
pub struct Cli {
    /// Base random seed (training, and the world unless --world-seed is given).
    #[arg(long, global = true, default_value_t = DEFAULT_SEED)]
    pub seed: u64,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,

    /// File of `key=value` lines, one per flag; command-line flags win.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,

    /// Worker threads for rollout and Monte-Carlo simulation.
    #[arg(long, global = true, env = "CALIBRL_THREADS")]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Serialize)]
pub enum Command {
    /// Train a tabular policy and write metrics, logs and a checkpoint.
    Train(TrainArgs),
    /// Compare exact and estimated advantages under fixed Beta policies.
    Bias(BiasArgs),
    /// Combine metrics from several run directories into one table.
    Report(ReportArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct TrainArgs {
    /// ppo, rloo, grpo or grpo-nostd.
    #[arg(long, default_value = "grpo")]
    pub algo: EstimatorKind,

    #[arg(long, default_value_t = DEFAULT_GROUP_SIZE)]
    pub group_size: usize,

    #[arg(long, default_value_t = DEFAULT_PROMPTS_PER_ROLLOUT)]
    pub prompts_per_rollout: usize,

    #[arg(long, default_value_t = 1)]
    pub updates_per_rollout: usize,

    /// Clip threshold; required when reusing a rollout.
    #[arg(long)]
    pub clip_eps: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_POLICY_LR)]
    pub policy_lr: f64,

    #[arg(long, default_value_t = DEFAULT_VALUE_LR)]
    pub value_lr: f64,

    #[arg(long, default_value_t = DEFAULT_STEPS)]
    pub steps: usize,

    /// loglik or brier.
    #[arg(long, default_value = "loglik")]
    pub reward: RewardRule,

    #[arg(long, default_value_t = DEFAULT_EVAL_EVERY)]
    pub eval_every: usize,

    /// How a category's distribution becomes one prediction: argmax or mean.
    #[arg(long, default_value = "argmax")]
    pub readout: Readout,

    /// Stabiliser added to the GRPO standard deviation.
    #[arg(long, default_value_t = DEFAULT_GRPO_EPS)]
    pub grpo_eps: f64,

    /// Number of question categories.
    #[arg(long, default_value_t = DEFAULT_CATEGORIES)]
    pub categories: usize,

    /// Questions in each of the train and eval splits.
    #[arg(long, default_value_t = DEFAULT_DATASET_SIZE)]
    pub dataset_size: usize,

    /// Seed for category rates and datasets (defaults to --seed).
    #[arg(long)]
    pub world_seed: Option<u64>,

    /// Run all four algorithms on one world and write a comparison table.
    #[arg(long, conflicts_with_all = ["table2", "algo"])]
    pub table1: bool,

    /// Run the 4 x 3 grid of algorithms and update schedules.
    #[arg(long, conflicts_with_all = ["algo", "updates_per_rollout", "clip_eps"])]
    pub table2: bool,
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct BiasArgs {
    /// Fixed policy as `beta:ALPHA,BETA`; repeatable.
    #[arg(long = "policy", value_parser = parse_policy)]
    pub policies: Vec<(f64, f64)>,

    /// grpo or grpo-nostd; repeatable (default both).
    #[arg(long = "estimator", value_parser = parse_bias_estimator)]
    pub estimators: Vec<EstimatorKind>,

    /// loglik or brier; repeatable (default loglik).
    #[arg(long = "reward")]
    pub rewards: Vec<RewardRule>,

    #[arg(long, default_value_t = bias::DEFAULT_P_TRUE)]
    pub p_true: f64,

    /// Group size.
    #[arg(long, default_value_t = bias::DEFAULT_G)]
    pub g: usize,

    /// Total sampled predictions; groups = samples / g.
    #[arg(long, default_value_t = bias::DEFAULT_SAMPLES)]
    pub samples: usize,

    /// Tokens with fewer observations are left blank.
    #[arg(long, default_value_t = bias::DEFAULT_MIN_COUNT)]
    pub min_count: usize,

    #[arg(long, default_value_t = DEFAULT_GRPO_EPS)]
    pub grpo_eps: f64,
}

impl BiasArgs {
    pub fn policies(&self) -> Vec<(f64, f64)> {
        if self.policies.is_empty() {
            bias::DEFAULT_POLICIES.to_vec()
        } else {
            self.policies.clone()
        }
    }

    pub fn estimators(&self) -> Vec<EstimatorKind> {
        if self.estimators.is_empty() {
            vec![EstimatorKind::Grpo, EstimatorKind::GrpoNoStd]
        } else {
            self.estimators.clone()
        }
    }

    pub fn rewards(&self) -> Vec<RewardRule> {
        if self.rewards.is_empty() {
            vec![RewardRule::LogLikelihood]
        } else {
            self.rewards.clone()
        }
    }
}

#[derive(Args, Debug, Clone, Serialize)]
pub struct ReportArgs {
    /// Run directories containing metrics.json.
    #[arg(required = true, num_args = 1..)]
    pub runs: Vec<PathBuf>,
}

fn parse_policy(s: &str) -> Result<(f64, f64), String> {
    let rest = s
        .strip_prefix("beta:")
        .ok_or_else(|| format!("expected beta:ALPHA,BETA, got {s:?}"))?;
    let (a, b) = rest
        .split_once(',')
        .ok_or_else(|| format!("expected beta:ALPHA,BETA, got {s:?}"))?;
    let num = |x: &str| {
        x.trim()
            .parse::<f64>()
            .ok()
            .filter(|v| *v > 0.0 && v.is_finite())
            .ok_or_else(|| format!("Beta parameters must be positive numbers, got {x:?}"))
    };
    Ok((num(a)?, num(b)?))
}

fn parse_bias_estimator(s: &str) -> Result<EstimatorKind, String> {
    match s.parse::<EstimatorKind>() {
        Ok(k @ (EstimatorKind::Grpo | EstimatorKind::GrpoNoStd)) => Ok(k),
        Ok(k) => Err(format!(
            "bias analysis supports grpo and grpo-nostd, not {k}"
        )),
        Err(e) => Err(e.to_string()),
    }
}
