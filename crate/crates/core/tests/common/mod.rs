#![allow(dead_code)]

// Exact expectations by brute-force enumeration, shared by several targets.

use calibrl::{adv_grpo, adv_grpo_nostd, adv_rloo, RewardRule};

pub fn ll(p: f64, y: bool) -> f64 {
    if y {
        p.ln()
    } else {
        (1.0 - p).ln()
    }
}

pub fn brier(p: f64, y: bool) -> f64 {
    let t = if y { 1.0 } else { 0.0 };
    -(p - t) * (p - t)
}

pub fn score(rule: RewardRule, p: f64, y: bool) -> f64 {
    match rule {
        RewardRule::LogLikelihood => ll(p, y),
        RewardRule::Brier => brier(p, y),
    }
}

// A(v) = E_y[r(v,y)] - E_{p'~pi} E_y[r(p',y)], written out directly.
pub fn oracle_advantage(tokens: &[f64], w: &[f64], p: f64, v: f64, rule: RewardRule) -> f64 {
    let ev = |q: f64| p * score(rule, q, true) + (1.0 - p) * score(rule, q, false);
    let base: f64 = tokens.iter().zip(w).map(|(&q, &wi)| wi * ev(q)).sum();
    ev(v) - base
}

pub type Estimator = fn(&[f64]) -> Vec<f64>;

// E[A_hat_1 | p_hat_1 = tokens[i]] by enumerating the answer and the other
// G-1 draws.
pub fn enumerate(tokens: &[f64], w: &[f64], p: f64, g: usize, i: usize, est: Estimator) -> f64 {
    let n = tokens.len();
    let others = n.pow((g - 1) as u32);
    let mut total = 0.0;
    for y in [true, false] {
        let py = if y { p } else { 1.0 - p };
        for code in 0..others {
            let mut c = code;
            let mut prob = py;
            let mut rewards = vec![ll(tokens[i], y)];
            for _ in 1..g {
                let j = c % n;
                c /= n;
                prob *= w[j];
                rewards.push(ll(tokens[j], y));
            }
            total += prob * est(&rewards)[0];
        }
    }
    total
}

pub fn rloo(r: &[f64]) -> Vec<f64> {
    adv_rloo(r).unwrap()
}
pub fn nostd(r: &[f64]) -> Vec<f64> {
    adv_grpo_nostd(r).unwrap()
}
pub fn grpo(r: &[f64]) -> Vec<f64> {
    adv_grpo(r, 1e-4).unwrap()
}
