use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Context;
use serde::Serialize;

use calibrl::metrics::write_reliability_csv;
use calibrl::trainer::{write_categories_csv, TrainConfig};
use calibrl::{Checkpoint, EstimatorKind, EstimatorSpec, TrainResult, World};

use crate::args::{Cli, TrainArgs};
use crate::report_cmd::{self, RunMetrics, SplitMetrics, WorldShape};
use crate::{CmdResult, Failure};

struct Job {
    dir: PathBuf,
    config: TrainConfig<f64>,
}

fn config_for(
    cli: &Cli,
    args: &TrainArgs,
    algo: EstimatorKind,
    updates: usize,
    clip: Option<f64>,
) -> Result<TrainConfig<f64>, Failure> {
    let algo =
        EstimatorSpec::with_eps(algo, args.grpo_eps).map_err(|e| Failure::Usage(e.to_string()))?;
    let config = TrainConfig {
        algo,
        group_size: args.group_size,
        prompts_per_rollout: args.prompts_per_rollout,
        updates_per_rollout: updates,
        clip_eps: clip,
        policy_lr: args.policy_lr,
        value_lr: args.value_lr,
        steps: args.steps,
        seed: cli.seed,
        reward: args.reward,
        eval_every: args.eval_every,
        readout: args.readout,
    };
    config
        .validate()
        .map_err(|e| Failure::Usage(e.to_string()))?;
    Ok(config)
}

/// `grpo-u10-clip0.2` style directory names for the schedule grid.
pub fn schedule_name(algo: EstimatorKind, updates: usize, clip: Option<f64>) -> String {
    match clip {
        Some(c) => format!("{}-u{updates}-clip{c}", algo.name()),
        None => format!("{}-u{updates}", algo.name()),
    }
}

fn plan(cli: &Cli, args: &TrainArgs) -> Result<Vec<Job>, Failure> {
    let mut jobs = Vec::new();
    if args.table1 {
        for algo in EstimatorKind::ALL {
            jobs.push(Job {
                dir: cli.out.join(algo.name()),
                config: config_for(cli, args, algo, args.updates_per_rollout, args.clip_eps)?,
            });
        }
    } else if args.table2 {
        for algo in EstimatorKind::ALL {
            for (updates, clip) in [(1, None), (10, Some(0.2)), (10, Some(0.001))] {
                jobs.push(Job {
                    dir: cli.out.join(schedule_name(algo, updates, clip)),
                    config: config_for(cli, args, algo, updates, clip)?,
                });
            }
        }
    } else {
        jobs.push(Job {
            dir: cli.out.clone(),
            config: config_for(
                cli,
                args,
                args.algo,
                args.updates_per_rollout,
                args.clip_eps,
            )?,
        });
    }
    Ok(jobs)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| {
        format!("cannot create {}", path.display())
    })?))
}

#[derive(Serialize)]
struct Echo<'a> {
    seed: u64,
    out: &'a Path,
    config: Option<&'a Path>,
    threads: Option<usize>,
    train: &'a TrainArgs,
}

fn write_artifacts(dir: &Path, metrics: &RunMetrics, result: &TrainResult) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    serde_json::to_writer_pretty(create(&dir.join("metrics.json"))?, metrics)?;
    result
        .log
        .write_csv(create(&dir.join("training_log.csv"))?)?;
    write_reliability_csv(
        &result.eval.reliability,
        create(&dir.join("reliability.csv"))?,
    )?;
    write_categories_csv(
        &result.eval.categories,
        create(&dir.join("categories.csv"))?,
    )?;
    let ckpt = Checkpoint::capture(&result.policy, result.values.as_ref());
    fs::write(dir.join("policy.json"), ckpt.to_json()?)?;
    Ok(())
}

fn mean_clip_fraction(result: &TrainResult) -> f64 {
    let rows = result.log.rows();
    if rows.is_empty() {
        return 0.0;
    }
    rows.iter().map(|r| r.clip_fraction).sum::<f64>() / rows.len() as f64
}

pub fn run(cli: &Cli, args: &TrainArgs, file_entries: &[(String, String)]) -> CmdResult {
    if args.categories == 0 || args.dataset_size == 0 {
        return Err(Failure::Usage(
            "--categories and --dataset-size must be positive".into(),
        ));
    }
    let jobs = plan(cli, args)?;
    let world_seed = args.world_seed.unwrap_or(cli.seed);
    let world = World::generate(args.categories, args.dataset_size, world_seed)?;
    let echo = serde_json::to_value(Echo {
        seed: cli.seed,
        out: &cli.out,
        config: cli.config.as_deref(),
        threads: cli.threads,
        train: args,
    })
    .map_err(anyhow::Error::from)?;

    for job in &jobs {
        let started = Instant::now();
        let result = calibrl::run(&job.config, &world.table, &world.train, &world.eval)?;
        let metrics = RunMetrics {
            algo: job.config.algo.kind,
            updates_per_rollout: job.config.updates_per_rollout,
            clip_eps: job.config.clip_eps,
            ece: result.eval.ece,
            auroc: result.eval.auroc,
            accuracy: result.eval.accuracy,
            train: SplitMetrics {
                ece: result.train_eval.ece,
                auroc: result.train_eval.auroc,
                accuracy: result.train_eval.accuracy,
            },
            mean_clip_fraction: mean_clip_fraction(&result),
            accuracy_rule: "pred > 0.5".into(),
            readout: job.config.readout,
            world: WorldShape {
                categories: args.categories,
                dataset_size: args.dataset_size,
                world_seed,
            },
            train_config: job.config.clone(),
            args: echo.clone(),
            config_file: file_entries.to_vec(),
        };
        write_artifacts(&job.dir, &metrics, &result)?;
        println!(
            "{:<26} ece={:.4} auroc={:.4} acc={:.4} clip={:.3} ({:.1}s) -> {}",
            schedule_name(metrics.algo, metrics.updates_per_rollout, metrics.clip_eps),
            metrics.ece,
            metrics.auroc,
            metrics.accuracy,
            metrics.mean_clip_fraction,
            started.elapsed().as_secs_f64(),
            job.dir.display()
        );
    }

    if jobs.len() > 1 {
        let dirs: Vec<PathBuf> = jobs.into_iter().map(|j| j.dir).collect();
        report_cmd::write_comparison(&dirs, &cli.out)?;
    }
    Ok(())
}
