//! Expected group advantages under fixed prediction policies.
//!
//! Compares the exact advantage of each vocabulary token with Monte-Carlo
//! estimates of what the mean-centred and the std-normalised group
//! estimators assign to it on average.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::advantage::{reward_moments, EstimatorKind, EstimatorSpec};
use crate::env::RewardRule;
use crate::error::{invalid_arg, invalid_config, Result};
use crate::policy::{CategorySampler, ProbVocab};
use crate::rng::{self, tags};
use crate::scalar::{population_std, Scalar};
use crate::special::betainc;
use crate::util::fmt_num;

pub const DEFAULT_G: usize = 1000;
pub const DEFAULT_SAMPLES: usize = 100_000;
pub const DEFAULT_P_TRUE: f64 = 0.7;
pub const DEFAULT_MIN_COUNT: usize = 1000;
/// Shape parameters of the three reference policies.
pub const DEFAULT_POLICIES: [(f64, f64); 3] = [(1.0, 1.0), (5.7, 3.0), (50.0, 1.0)];

/// Groups handled by one parallel work item.
const CHUNK: usize = 8;

/// A fixed distribution over the probability vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPolicy<T> {
    pub vocab: ProbVocab<T>,
    pub dist: Vec<T>,
    pub label: String,
}

impl<T: Scalar> FixedPolicy<T> {
    pub fn new(vocab: ProbVocab<T>, dist: Vec<T>, label: impl Into<String>) -> Result<Self> {
        if dist.len() != vocab.len() {
            return invalid_arg(format!(
                "distribution has {} entries, vocabulary has {}",
                dist.len(),
                vocab.len()
            ));
        }
        if dist.iter().any(|&w| !(w >= T::zero() && w.is_finite())) {
            return invalid_arg("distribution must be nonnegative and finite");
        }
        let total: T = dist.iter().copied().sum();
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(64.0));
        if (total - T::one()).abs() > tol {
            return invalid_arg(format!("distribution sums to {total}, not 1"));
        }
        Ok(Self {
            vocab,
            dist,
            label: label.into(),
        })
    }

    /// All mass on token `index`.
    pub fn point_mass(vocab: ProbVocab<T>, index: usize) -> Result<Self> {
        if index >= vocab.len() {
            return invalid_arg(format!("token {index} out of range"));
        }
        let mut dist = vec![T::zero(); vocab.len()];
        dist[index] = T::one();
        let label = format!("point({})", vocab.value(index));
        Self::new(vocab, dist, label)
    }

    /// Mirror image across 1/2. Requires a vocabulary symmetric about 1/2.
    pub fn flipped(&self) -> Result<Self> {
        let toks = self.vocab.tokens();
        let n = toks.len();
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        if (0..n).any(|i| (toks[i] + toks[n - 1 - i] - T::one()).abs() > tol) {
            return invalid_arg("vocabulary is not symmetric about 1/2");
        }
        let dist = self.dist.iter().rev().copied().collect();
        Self::new(self.vocab.clone(), dist, format!("flip({})", self.label))
    }
}

/// Beta(alpha, beta) discretised onto `vocab` by CDF mass of each token's cell.
///
/// Cell edges are midpoints between neighbouring tokens; the outermost cells
/// extend to 0 and 1.
pub fn discretize_beta_on<T: Scalar>(
    vocab: ProbVocab<T>,
    alpha: T,
    beta: T,
) -> Result<FixedPolicy<T>> {
    if !(alpha > T::zero() && beta > T::zero() && alpha.is_finite() && beta.is_finite()) {
        return invalid_arg(format!(
            "Beta parameters must be positive, got ({alpha}, {beta})"
        ));
    }
    let toks = vocab.tokens();
    let n = toks.len();
    let half = T::lit(0.5);
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(T::zero());
    for w in toks.windows(2) {
        edges.push((w[0] + w[1]) * half);
    }
    edges.push(T::one());

    let mut dist = Vec::with_capacity(n);
    for i in 0..n {
        let (lo, hi) = (edges[i], edges[i + 1]);
        // Upper cells through the complement keep tail masses accurate.
        let mass = if lo >= half {
            betainc(beta, alpha, T::one() - lo)? - betainc(beta, alpha, T::one() - hi)?
        } else {
            betainc(alpha, beta, hi)? - betainc(alpha, beta, lo)?
        };
        dist.push(mass.max(T::zero()));
    }
    let total: T = dist.iter().copied().sum();
    for w in dist.iter_mut() {
        *w = *w / total;
    }
    FixedPolicy::new(vocab, dist, format!("Beta({alpha},{beta})"))
}

/// [`discretize_beta_on`] with the 0.01..0.99 vocabulary.
pub fn discretize_beta<T: Scalar>(alpha: T, beta: T) -> Result<FixedPolicy<T>> {
    discretize_beta_on(ProbVocab::percent(), alpha, beta)
}

fn check_p_true<T: Scalar>(p_true: T) -> Result<()> {
    if !(p_true >= T::zero() && p_true <= T::one()) {
        return invalid_arg(format!("p_true = {p_true} outside [0, 1]"));
    }
    Ok(())
}

/// True advantage of every vocabulary token.
pub fn exact_advantage_curve<T: Scalar>(
    policy: &FixedPolicy<T>,
    p_true: T,
    rule: RewardRule,
) -> Result<Vec<T>> {
    check_p_true(p_true)?;
    let m = reward_moments(&policy.dist, &policy.vocab, rule)?;
    Ok(policy
        .vocab
        .tokens()
        .iter()
        .map(|&v| m.advantage(p_true, v, rule))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaPair<T> {
    pub sigma0: T,
    pub sigma1: T,
    pub stderr0: T,
    pub stderr1: T,
}

/// `p (r(v,1) - mu1) / (sigma1 + eps) + (1-p) (r(v,0) - mu0) / (sigma0 + eps)`.
pub fn approx_grpo_advantage<T: Scalar>(
    policy: &FixedPolicy<T>,
    p_true: T,
    rule: RewardRule,
    sigma: &SigmaPair<T>,
    eps: T,
) -> Result<Vec<T>> {
    check_p_true(p_true)?;
    if !(sigma.sigma0 >= T::zero() && sigma.sigma1 >= T::zero()) {
        return invalid_arg("sigmas must be nonnegative");
    }
    if !(eps >= T::zero()) {
        return invalid_arg("eps must be nonnegative");
    }
    let m = reward_moments(&policy.dist, &policy.vocab, rule)?;
    let one = T::one();
    let d1 = sigma.sigma1 + eps;
    let d0 = sigma.sigma0 + eps;
    let term = |x: T, d: T| if x == T::zero() { T::zero() } else { x / d };
    Ok(policy
        .vocab
        .tokens()
        .iter()
        .map(|&v| {
            p_true * term(rule.eval(v, true) - m.mu1, d1)
                + (one - p_true) * term(rule.eval(v, false) - m.mu0, d0)
        })
        .collect())
}

/// Running mean and sum of squared deviations, mergeable in a fixed order.
#[derive(Debug, Clone, Copy)]
struct Moments<T> {
    n: usize,
    mean: T,
    m2: T,
}

impl<T: Scalar> Moments<T> {
    fn new() -> Self {
        Self {
            n: 0,
            mean: T::zero(),
            m2: T::zero(),
        }
    }

    fn push(&mut self, x: T) {
        self.n += 1;
        let d = x - self.mean;
        self.mean = self.mean + d / T::from_usize_lossy(self.n);
        self.m2 = self.m2 + d * (x - self.mean);
    }

    fn merge(&mut self, other: &Self) {
        if other.n == 0 {
            return;
        }
        if self.n == 0 {
            *self = *other;
            return;
        }
        let n = self.n + other.n;
        let (na, nb, nt) = (
            T::from_usize_lossy(self.n),
            T::from_usize_lossy(other.n),
            T::from_usize_lossy(n),
        );
        let d = other.mean - self.mean;
        self.mean = self.mean + d * nb / nt;
        self.m2 = self.m2 + other.m2 + d * d * na * nb / nt;
        self.n = n;
    }

    /// Standard error of the mean.
    fn stderr(&self) -> T {
        if self.n < 2 {
            return T::zero();
        }
        let n = T::from_usize_lossy(self.n);
        (self.m2 / (n - T::one())).max(T::zero()).sqrt() / n.sqrt()
    }
}

/// Runs `per_group` on every group index in parallel chunks and merges the
/// per-chunk moments in chunk order.
fn chunked_moments<T, F>(n_groups: usize, width: usize, per_group: F) -> Vec<Moments<T>>
where
    T: Scalar,
    F: Fn(usize, &mut [T]) + Sync,
{
    let chunks: Vec<Vec<Moments<T>>> = (0..n_groups.div_ceil(CHUNK))
        .into_par_iter()
        .map(|chunk| {
            let mut acc = vec![Moments::new(); width];
            let mut buf = vec![T::zero(); width];
            for group in chunk * CHUNK..((chunk + 1) * CHUNK).min(n_groups) {
                per_group(group, &mut buf);
                for (m, &x) in acc.iter_mut().zip(&buf) {
                    m.push(x);
                }
            }
            acc
        })
        .collect();
    let mut total = vec![Moments::new(); width];
    for c in &chunks {
        for (t, m) in total.iter_mut().zip(c) {
            t.merge(m);
        }
    }
    total
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint<T> {
    pub token_value: T,
    pub exact_adv: T,
    pub est_mean: Option<T>,
    pub est_stderr: Option<T>,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdvantageCurve<T> {
    pub policy_label: String,
    pub estimator: EstimatorKind,
    pub rule: RewardRule,
    pub group_size: usize,
    pub points: Vec<CurvePoint<T>>,
}

impl<T: Scalar> AdvantageCurve<T> {
    pub fn point_at(&self, token_value: T) -> Option<&CurvePoint<T>> {
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        self.points
            .iter()
            .find(|p| (p.token_value - token_value).abs() <= tol)
    }
}

/// Monte-Carlo estimate of `E[A_hat_i | p_hat_i = v]` for every token `v`.
///
/// Simulates `n_samples / g` groups, each with one Bernoulli(`p_true`) answer
/// and `g` draws from the policy. Every slot of every group is re-scored as
/// if it had produced `v`, holding the other `g - 1` draws fixed, which gives
/// an unbiased per-group estimate for all tokens at once. The reported
/// stderr is the spread of these per-group estimates over `sqrt(groups)`, so
/// draws that share an answer are not treated as independent.
#[allow(clippy::too_many_arguments)]
pub fn empirical_advantage_curve<T: Scalar>(
    policy: &FixedPolicy<T>,
    p_true: T,
    rule: RewardRule,
    estimator: &EstimatorSpec<T>,
    g: usize,
    n_samples: usize,
    min_count: usize,
    seed: u64,
) -> Result<AdvantageCurve<T>> {
    let normalise = match estimator.kind {
        EstimatorKind::Grpo => true,
        EstimatorKind::GrpoNoStd => false,
        other => {
            return invalid_config(format!(
                "bias analysis supports grpo and grpo-nostd, not {other}"
            ))
        }
    };
    if g < 2 {
        return invalid_config(format!("group size must be at least 2, got {g}"));
    }
    if !(estimator.eps >= T::zero()) {
        return invalid_config("estimator eps must be nonnegative");
    }
    let n_groups = n_samples / g;
    if n_groups == 0 {
        return invalid_arg(format!("{n_samples} samples do not fill one group of {g}"));
    }
    let exact = exact_advantage_curve(policy, p_true, rule)?;

    let vocab = policy.vocab.tokens();
    let v = vocab.len();
    let r1 = rule.table(vocab, true);
    let r0 = rule.table(vocab, false);
    let sampler = CategorySampler::from_probs(&policy.dist);
    let p = p_true.as_f64();
    let gt = T::from_usize_lossy(g);
    let eps = estimator.eps;

    let moments = chunked_moments(n_groups, v, |group, out: &mut [T]| {
        let mut rng = rng::stream(seed, &[tags::BIAS_GROUPS, group as u64]);
        let answer = rng.random::<f64>() < p;
        let rewards = if answer { &r1 } else { &r0 };
        let mut counts = vec![0usize; v];
        for _ in 0..g {
            counts[sampler.draw_index(&mut rng)] += 1;
        }
        // Shift by a reward inside the group's range so the variance updates
        // stay well conditioned (and constant groups stay exactly constant).
        let first = counts.iter().position(|&n| n > 0).expect("g >= 2 draws");
        let m0 = rewards[first];
        let c: Vec<T> = rewards.iter().map(|&r| r - m0).collect();
        let q: T = (0..v)
            .map(|k| T::from_usize_lossy(counts[k]) * c[k] * c[k])
            .sum();
        let s: T = (0..v).map(|k| T::from_usize_lossy(counts[k]) * c[k]).sum();

        out.iter_mut().for_each(|x| *x = T::zero());
        for i in (0..v).filter(|&i| counts[i] > 0) {
            let weight = T::from_usize_lossy(counts[i]) / gt;
            let s_rest = s - c[i];
            let q_rest = q - c[i] * c[i];
            for (k, o) in out.iter_mut().enumerate() {
                let s_new = s_rest + c[k];
                let mean = s_new / gt;
                let centred = c[k] - mean;
                let adv = if !normalise {
                    centred
                } else if centred == T::zero() {
                    T::zero()
                } else {
                    let var = ((q_rest + c[k] * c[k]) / gt - mean * mean).max(T::zero());
                    centred / (var.sqrt() + eps)
                };
                *o = *o + weight * adv;
            }
        }
    });

    let n_obs = n_groups * g;
    let present = n_obs >= min_count;
    let points = (0..v)
        .map(|k| CurvePoint {
            token_value: vocab[k],
            exact_adv: exact[k],
            est_mean: present.then_some(moments[k].mean),
            est_stderr: present.then(|| moments[k].stderr()),
            n_samples: n_obs,
        })
        .collect();
    Ok(AdvantageCurve {
        policy_label: policy.label.clone(),
        estimator: estimator.kind,
        rule,
        group_size: g,
        points,
    })
}

/// Mean over `n_groups` simulated groups of the within-group population std of
/// `r(., 1)` and `r(., 0)`, with standard errors.
pub fn sigma_estimates<T: Scalar>(
    policy: &FixedPolicy<T>,
    rule: RewardRule,
    g: usize,
    n_groups: usize,
    seed: u64,
) -> Result<SigmaPair<T>> {
    if g < 2 {
        return invalid_config(format!("group size must be at least 2, got {g}"));
    }
    if n_groups == 0 {
        return invalid_arg("need at least one group");
    }
    let vocab = policy.vocab.tokens();
    let sampler = CategorySampler::from_probs(&policy.dist);
    let m = chunked_moments(n_groups, 2, |group, out: &mut [T]| {
        let mut rng = rng::stream(seed, &[tags::SIGMA_GROUPS, group as u64]);
        let draws: Vec<T> = (0..g)
            .map(|_| vocab[sampler.draw_index(&mut rng)])
            .collect();
        let r0: Vec<T> = draws.iter().map(|&x| rule.eval(x, false)).collect();
        let r1: Vec<T> = draws.iter().map(|&x| rule.eval(x, true)).collect();
        out[0] = population_std(&r0);
        out[1] = population_std(&r1);
    });
    Ok(SigmaPair {
        sigma0: m[0].mean,
        sigma1: m[1].mean,
        stderr0: m[0].stderr(),
        stderr1: m[1].stderr(),
    })
}

/// `token_value,exact_adv,est_mean,est_stderr,n_samples,estimator,policy_label,rule`.
pub fn write_curves_csv<T: Scalar, W: Write>(
    curves: &[AdvantageCurve<T>],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "token_value",
        "exact_adv",
        "est_mean",
        "est_stderr",
        "n_samples",
        "estimator",
        "policy_label",
        "rule",
    ])?;
    let opt = |x: Option<T>| x.map(fmt_num).unwrap_or_default();
    for c in curves {
        for p in &c.points {
            w.write_record([
                fmt_num(p.token_value),
                fmt_num(p.exact_adv),
                opt(p.est_mean),
                opt(p.est_stderr),
                p.n_samples.to_string(),
                c.estimator.name().to_string(),
                c.policy_label.clone(),
                c.rule.name().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SigmaRow<T> {
    pub policy_label: String,
    pub rule: RewardRule,
    pub sigma: SigmaPair<T>,
}

/// `policy_label,rule,sigma0,sigma1,stderr0,stderr1`.
pub fn write_sigmas_csv<T: Scalar, W: Write>(rows: &[SigmaRow<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record([
        "policy_label",
        "rule",
        "sigma0",
        "sigma1",
        "stderr0",
        "stderr1",
    ])?;
    for r in rows {
        w.write_record([
            r.policy_label.clone(),
            r.rule.name().to_string(),
            fmt_num(r.sigma.sigma0),
            fmt_num(r.sigma.sigma1),
            fmt_num(r.sigma.stderr0),
            fmt_num(r.sigma.stderr1),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApproxCurve<T> {
    pub policy_label: String,
    pub rule: RewardRule,
    pub values: Vec<(T, T)>,
}

/// `token_value,approx_adv,policy_label,rule`.
pub fn write_approx_csv<T: Scalar, W: Write>(curves: &[ApproxCurve<T>], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["token_value", "approx_adv", "policy_label", "rule"])?;
    for c in curves {
        for &(v, a) in &c.values {
            w.write_record([
                fmt_num(v),
                fmt_num(a),
                c.policy_label.clone(),
                c.rule.name().to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_beta_matches_cell_widths() {
        let pol = discretize_beta(1.0_f64, 1.0).unwrap();
        assert!((pol.dist[0] - 0.015).abs() < 1e-9);
        assert!((pol.dist[98] - 0.015).abs() < 1e-9);
        for &w in &pol.dist[1..98] {
            assert!((w - 0.01).abs() < 1e-9);
        }
        assert_eq!(pol.label, "Beta(1,1)");
    }

    #[test]
    fn beta_mirror_and_tail() {
        let a = discretize_beta(5.7_f64, 3.0).unwrap();
        let b = discretize_beta(3.0_f64, 5.7).unwrap();
        for (x, y) in a.dist.iter().zip(b.dist.iter().rev()) {
            assert!((x - y).abs() < 1e-12);
        }
        let sharp = discretize_beta(50.0_f64, 1.0).unwrap();
        let upper: f64 = sharp.dist[89..].iter().sum();
        assert!(upper > 0.99);
        assert!((upper - (1.0 - 0.895f64.powi(50))).abs() < 1e-10);
        assert!(discretize_beta(0.0_f64, 1.0).is_err());
    }

    #[test]
    fn fixed_policy_validation() {
        let v = ProbVocab::<f64>::percent();
        assert!(FixedPolicy::new(v.clone(), vec![0.5; 99], "bad").is_err());
        assert!(FixedPolicy::new(v.clone(), vec![1.0], "short").is_err());
        let pm = FixedPolicy::point_mass(v, 69).unwrap();
        assert_eq!(pm.dist.iter().sum::<f64>(), 1.0);
    }

    #[test]
    fn exact_curve_properties() {
        let uni = discretize_beta(1.0_f64, 1.0).unwrap();
        let curve = exact_advantage_curve(&uni, 0.7, RewardRule::LogLikelihood).unwrap();
        let best = (0..99)
            .max_by(|&i, &j| curve[i].partial_cmp(&curve[j]).unwrap())
            .unwrap();
        assert!((uni.vocab.value(best) - 0.70).abs() < 1e-12);
        let e: f64 = curve.iter().zip(&uni.dist).map(|(a, w)| a * w).sum();
        assert!(e.abs() < 1e-12);

        let sym = discretize_beta(2.0_f64, 2.0).unwrap();
        let c = exact_advantage_curve(&sym, 0.5, RewardRule::LogLikelihood).unwrap();
        for i in 0..99 {
            assert!((c[i] - c[98 - i]).abs() < 1e-12);
        }
    }

    #[test]
    fn approx_reductions() {
        let pol = discretize_beta(5.7_f64, 3.0).unwrap();
        let exact = exact_advantage_curve(&pol, 0.7, RewardRule::Brier).unwrap();
        let s = SigmaPair {
            sigma0: 0.4,
            sigma1: 0.4,
            stderr0: 0.0,
            stderr1: 0.0,
        };
        let approx = approx_grpo_advantage(&pol, 0.7, RewardRule::Brier, &s, 0.0).unwrap();
        for (a, e) in approx.iter().zip(&exact) {
            assert!((a - e / 0.4).abs() < 1e-12);
        }
        let far = approx_grpo_advantage(&pol, 0.7, RewardRule::Brier, &s, 1e12).unwrap();
        assert!(far.iter().all(|x| x.abs() < 1e-10));
    }

    #[test]
    fn point_mass_has_no_spread() {
        let pm = FixedPolicy::point_mass(ProbVocab::<f64>::percent(), 69).unwrap();
        let s = sigma_estimates(&pm, RewardRule::LogLikelihood, 50, 20, 1).unwrap();
        assert_eq!((s.sigma0, s.sigma1), (0.0, 0.0));
        let spec = EstimatorSpec::new(EstimatorKind::Grpo);
        let c =
            empirical_advantage_curve(&pm, 0.7, RewardRule::LogLikelihood, &spec, 50, 1000, 1, 1)
                .unwrap();
        assert_eq!(c.point_at(0.70).unwrap().est_mean, Some(0.0));
    }

    #[test]
    fn estimator_and_group_checks() {
        let uni = discretize_beta(1.0_f64, 1.0).unwrap();
        let rloo = EstimatorSpec::new(EstimatorKind::Rloo);
        assert!(empirical_advantage_curve(
            &uni,
            0.7,
            RewardRule::LogLikelihood,
            &rloo,
            10,
            100,
            1,
            0
        )
        .is_err());
        let grpo = EstimatorSpec::new(EstimatorKind::Grpo);
        assert!(empirical_advantage_curve(
            &uni,
            0.7,
            RewardRule::LogLikelihood,
            &grpo,
            1,
            100,
            1,
            0
        )
        .is_err());
        assert!(sigma_estimates(&uni, RewardRule::Brier, 1, 10, 0).is_err());
    }

    #[test]
    fn min_count_controls_presence() {
        let uni = discretize_beta(1.0_f64, 1.0).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::GrpoNoStd);
        let c = empirical_advantage_curve(
            &uni,
            0.7,
            RewardRule::LogLikelihood,
            &spec,
            10,
            200,
            1000,
            0,
        )
        .unwrap();
        assert!(c
            .points
            .iter()
            .all(|p| p.est_mean.is_none() && p.n_samples == 200));
    }

    #[test]
    fn moments_merge_matches_single_pass() {
        let xs: Vec<f64> = (0..37).map(|i| (i as f64 * 0.37).sin()).collect();
        let mut one = Moments::new();
        xs.iter().for_each(|&x| one.push(x));
        let mut a = Moments::new();
        let mut b = Moments::new();
        xs[..10].iter().for_each(|&x| a.push(x));
        xs[10..].iter().for_each(|&x| b.push(x));
        a.merge(&b);
        assert!((a.mean - one.mean).abs() < 1e-14);
        assert!((a.m2 - one.m2).abs() < 1e-12);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let pol = discretize_beta(5.7_f64, 3.0).unwrap();
        let spec = EstimatorSpec::new(EstimatorKind::Grpo);
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| {
                    empirical_advantage_curve(
                        &pol,
                        0.7,
                        RewardRule::LogLikelihood,
                        &spec,
                        20,
                        2000,
                        1,
                        5,
                    )
                    .unwrap()
                })
        };
        assert_eq!(run(1), run(4));
    }
}
