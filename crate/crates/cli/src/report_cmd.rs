use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use serde::{Deserialize, Serialize};

use calibrl::trainer::TrainConfig;
use calibrl::util::fmt_num;
use calibrl::{EstimatorKind, Readout};

use crate::args::{Cli, ReportArgs};
use crate::{CmdResult, Failure};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub ece: f64,
    pub auroc: f64,
    pub accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WorldShape {
    pub categories: usize,
    pub dataset_size: usize,
    pub world_seed: u64,
}

/// Contents of a run's `metrics.json`. Held-out metrics at the top level.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetrics {
    pub algo: EstimatorKind,
    pub updates_per_rollout: usize,
    pub clip_eps: Option<f64>,
    pub ece: f64,
    pub auroc: f64,
    pub accuracy: f64,
    pub train: SplitMetrics,
    pub mean_clip_fraction: f64,
    pub accuracy_rule: String,
    pub readout: Readout,
    pub world: WorldShape,
    pub train_config: TrainConfig<f64>,
    pub args: serde_json::Value,
    pub config_file: Vec<(String, String)>,
}

pub fn load_metrics(dir: &Path) -> anyhow::Result<RunMetrics> {
    let path = dir.join("metrics.json");
    let text =
        fs::read_to_string(&path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("malformed {}", path.display()))
}

const HEADER: [&str; 6] = [
    "algorithm",
    "updates_per_rollout",
    "clip_eps",
    "ece",
    "auroc",
    "accuracy",
];

pub fn write_comparison(dirs: &[PathBuf], out: &Path) -> anyhow::Result<()> {
    let missing: Vec<String> = dirs
        .iter()
        .filter(|d| !d.join("metrics.json").is_file())
        .map(|d| d.join("metrics.json").display().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(anyhow!(
            "missing run artifacts:\n  {}",
            missing.join("\n  ")
        ));
    }
    let runs = dirs
        .iter()
        .map(|d| load_metrics(d))
        .collect::<anyhow::Result<Vec<_>>>()?;

    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let mut w = csv::Writer::from_path(out.join("comparison.csv"))?;
    w.write_record(HEADER)?;
    for r in &runs {
        w.write_record([
            r.algo.name().to_string(),
            r.updates_per_rollout.to_string(),
            r.clip_eps.map(fmt_num).unwrap_or_default(),
            fmt_num(r.ece),
            fmt_num(r.auroc),
            fmt_num(r.accuracy),
        ])?;
    }
    w.flush()?;

    let mut text = String::new();
    writeln!(
        text,
        "{:<12} {:>8} {:>9} {:>8} {:>8} {:>9}",
        "Algorithm", "Updates", "Clip", "ECE", "AUROC", "Accuracy"
    )?;
    for r in &runs {
        let clip = r.clip_eps.map_or("-".to_string(), |c| c.to_string());
        writeln!(
            text,
            "{:<12} {:>8} {:>9} {:>8.3} {:>8.3} {:>9.3}",
            r.algo.name(),
            r.updates_per_rollout,
            clip,
            r.ece,
            r.auroc,
            r.accuracy
        )?;
    }
    fs::write(out.join("comparison.txt"), &text)?;
    print!("{text}");
    Ok(())
}

pub fn run(cli: &Cli, args: &ReportArgs) -> CmdResult {
    if args.runs.is_empty() {
        return Err(Failure::Usage(
            "report needs at least one run directory".into(),
        ));
    }
    write_comparison(&args.runs, &cli.out).map_err(Failure::Runtime)
}
