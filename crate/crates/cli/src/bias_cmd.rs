use std::fs::{self, File};
use std::io::BufWriter;
use std::time::Instant;

use anyhow::Context;

use calibrl::bias::{write_approx_csv, write_curves_csv, write_sigmas_csv, ApproxCurve, SigmaRow};
use calibrl::{
    approx_grpo_advantage, discretize_beta, empirical_advantage_curve, sigma_estimates,
    EstimatorSpec,
};

use crate::args::{BiasArgs, Cli};
use crate::{CmdResult, Failure};

pub fn run(cli: &Cli, args: &BiasArgs) -> CmdResult {
    if args.g < 2 {
        return Err(Failure::Usage(format!(
            "--g must be at least 2, got {}",
            args.g
        )));
    }
    if args.samples < args.g {
        return Err(Failure::Usage(format!(
            "--samples ({}) must cover at least one group of {}",
            args.samples, args.g
        )));
    }
    if !(0.0..=1.0).contains(&args.p_true) {
        return Err(Failure::Usage(format!(
            "--p-true must lie in [0, 1], got {}",
            args.p_true
        )));
    }
    if args.grpo_eps.is_nan() || args.grpo_eps < 0.0 {
        return Err(Failure::Usage("--grpo-eps must be nonnegative".into()));
    }
    let n_groups = args.samples / args.g;

    let mut curves = Vec::new();
    let mut sigmas = Vec::new();
    let mut approx = Vec::new();
    for rule in args.rewards() {
        for (a, b) in args.policies() {
            let started = Instant::now();
            let policy = discretize_beta(a, b)?;
            let sigma = sigma_estimates(&policy, rule, args.g, n_groups, cli.seed)?;
            approx.push(ApproxCurve {
                policy_label: policy.label.clone(),
                rule,
                values: policy
                    .vocab
                    .tokens()
                    .iter()
                    .copied()
                    .zip(approx_grpo_advantage(
                        &policy,
                        args.p_true,
                        rule,
                        &sigma,
                        args.grpo_eps,
                    )?)
                    .collect(),
            });
            sigmas.push(SigmaRow {
                policy_label: policy.label.clone(),
                rule,
                sigma,
            });
            for kind in args.estimators() {
                let spec = EstimatorSpec::with_eps(kind, args.grpo_eps)?;
                let curve = empirical_advantage_curve(
                    &policy,
                    args.p_true,
                    rule,
                    &spec,
                    args.g,
                    args.samples,
                    args.min_count,
                    cli.seed,
                )?;
                let at = |v: f64| {
                    curve
                        .point_at(v)
                        .and_then(|p| p.est_mean)
                        .map_or("-".to_string(), |x| format!("{x:.4}"))
                };
                println!(
                    "{:<14} {:<6} {:<10} est(0.70)={} est(0.99)={} sigma0={:.4} sigma1={:.4} ({:.1}s)",
                    policy.label,
                    rule.name(),
                    kind.name(),
                    at(0.70),
                    at(0.99),
                    sigma.sigma0,
                    sigma.sigma1,
                    started.elapsed().as_secs_f64()
                );
                curves.push(curve);
            }
        }
    }

    let out = &cli.out;
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let create = |name: &str| -> anyhow::Result<BufWriter<File>> {
        let path = out.join(name);
        Ok(BufWriter::new(File::create(&path).with_context(|| {
            format!("cannot create {}", path.display())
        })?))
    };
    write_curves_csv(&curves, create("advantage_curves.csv")?)?;
    write_sigmas_csv(&sigmas, create("sigmas.csv")?)?;
    write_approx_csv(&approx, create("approx_curves.csv")?)?;
    Ok(())
}
