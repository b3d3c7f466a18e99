//! The minimal "language model": one categorical distribution over
//! probability tokens per question category, plus the PPO value table.

use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::scalar::{softmax_into, Scalar};

/// Vocabulary of probability tokens, strictly increasing inside (0, 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProbVocab<T> {
    tokens: Vec<T>,
}

impl<T: Scalar> ProbVocab<T> {
    pub fn new(tokens: Vec<T>) -> Result<Self> {
        if tokens.is_empty() {
            return invalid_arg("vocabulary must be nonempty");
        }
        if !tokens.iter().all(|&t| t > T::zero() && t < T::one()) {
            return invalid_arg("vocabulary tokens must lie strictly inside (0, 1)");
        }
        if !tokens.windows(2).all(|w| w[0] < w[1]) {
            return invalid_arg("vocabulary tokens must be strictly increasing");
        }
        Ok(Self { tokens })
    }

    /// `0.01, 0.02, ..., 0.99`.
    pub fn percent() -> Self {
        Self::grid(99)
    }

    /// `1/(n+1), ..., n/(n+1)`.
    pub fn grid(n: usize) -> Self {
        let denom = T::from_usize_lossy(n + 1);
        Self {
            tokens: (1..=n).map(|i| T::from_usize_lossy(i) / denom).collect(),
        }
    }

    pub fn tokens(&self) -> &[T] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn value(&self, index: usize) -> T {
        self.tokens[index]
    }

    /// Index of the token closest to `p` (ties go to the lower token).
    pub fn nearest(&self, p: T) -> usize {
        let upper = self.tokens.partition_point(|&t| t < p);
        if upper == 0 {
            return 0;
        }
        if upper == self.tokens.len() {
            return upper - 1;
        }
        if (self.tokens[upper] - p) < (p - self.tokens[upper - 1]) {
            upper
        } else {
            upper - 1
        }
    }

    /// Exact index lookup, tolerant to float noise of a few ulps.
    pub fn index_of(&self, p: T) -> Option<usize> {
        let i = self.nearest(p);
        let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
        ((self.tokens[i] - p).abs() <= tol).then_some(i)
    }
}

/// How a per-category distribution is reduced to one reported probability.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Readout {
    /// Most likely token (lowest index on ties).
    #[default]
    Argmax,
    /// Expected token value under the distribution.
    Mean,
}

impl FromStr for Readout {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "argmax" => Ok(Readout::Argmax),
            "mean" => Ok(Readout::Mean),
            other => invalid_arg(format!("unknown readout {other:?}")),
        }
    }
}

impl Readout {
    pub fn name(self) -> &'static str {
        match self {
            Readout::Argmax => "argmax",
            Readout::Mean => "mean",
        }
    }
}

/// One sampled prediction: token index, its probability value and the
/// log-probability the sampling policy assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Draw<T> {
    pub token: usize,
    pub p_hat: T,
    pub logprob: T,
}

/// Per-category logit table over a probability vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy<T> {
    vocab: ProbVocab<T>,
    num_categories: usize,
    /// Row-major `num_categories x vocab.len()`.
    logits: Vec<T>,
}

impl<T: Scalar> TabularPolicy<T> {
    /// All-zero logits, i.e. the uniform policy.
    pub fn uniform(num_categories: usize, vocab: ProbVocab<T>) -> Result<Self> {
        if num_categories == 0 {
            return invalid_arg("policy needs at least one category");
        }
        let logits = vec![T::zero(); num_categories * vocab.len()];
        Ok(Self {
            vocab,
            num_categories,
            logits,
        })
    }

    pub fn from_rows(vocab: ProbVocab<T>, rows: Vec<Vec<T>>) -> Result<Self> {
        if rows.is_empty() {
            return invalid_arg("policy needs at least one category");
        }
        let v = vocab.len();
        if let Some(i) = rows.iter().position(|r| r.len() != v) {
            return invalid_arg(format!(
                "logit row {i} has length {} (vocab {v})",
                rows[i].len()
            ));
        }
        let logits: Vec<T> = rows.into_iter().flatten().collect();
        if !logits.iter().all(|x| x.is_finite()) {
            return invalid_arg("logits must be finite");
        }
        Ok(Self {
            num_categories: logits.len() / v,
            vocab,
            logits,
        })
    }

    pub fn vocab(&self) -> &ProbVocab<T> {
        &self.vocab
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn vocab_size(&self) -> usize {
        self.vocab.len()
    }

    fn check_category(&self, category: usize) -> Result<()> {
        if category >= self.num_categories {
            return invalid_arg(format!(
                "category {category} out of range (policy has {})",
                self.num_categories
            ));
        }
        Ok(())
    }

    fn check_token(&self, token: usize) -> Result<()> {
        if token >= self.vocab.len() {
            return invalid_arg(format!(
                "token {token} out of range (vocab {})",
                self.vocab.len()
            ));
        }
        Ok(())
    }

    pub fn logits(&self, category: usize) -> Result<&[T]> {
        self.check_category(category)?;
        let v = self.vocab.len();
        Ok(&self.logits[category * v..(category + 1) * v])
    }

    pub fn logits_mut(&mut self, category: usize) -> Result<&mut [T]> {
        self.check_category(category)?;
        let v = self.vocab.len();
        Ok(&mut self.logits[category * v..(category + 1) * v])
    }

    /// Flat row-major view of every logit.
    pub fn all_logits(&self) -> &[T] {
        &self.logits
    }

    pub(crate) fn all_logits_mut(&mut self) -> &mut [T] {
        &mut self.logits
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.logits.chunks(self.vocab.len())
    }

    /// Softmax of the category's logit row.
    pub fn probs(&self, category: usize) -> Result<Vec<T>> {
        let row = self.logits(category)?;
        let mut out = vec![T::zero(); row.len()];
        softmax_into(row, &mut out);
        Ok(out)
    }

    pub fn log_probs(&self, category: usize) -> Result<Vec<T>> {
        let row = self.logits(category)?;
        let lse = crate::scalar::log_sum_exp(row);
        Ok(row.iter().map(|&l| l - lse).collect())
    }

    pub fn log_prob(&self, category: usize, token: usize) -> Result<T> {
        self.check_token(token)?;
        let row = self.logits(category)?;
        Ok(row[token] - crate::scalar::log_sum_exp(row))
    }

    /// `g` i.i.d. draws from the category's distribution.
    pub fn sample_group<R: Rng + ?Sized>(
        &self,
        category: usize,
        g: usize,
        rng: &mut R,
    ) -> Result<Vec<Draw<T>>> {
        if g == 0 {
            return invalid_arg("group size must be at least 1");
        }
        let sampler = CategorySampler::new(self, category)?;
        Ok((0..g).map(|_| sampler.draw(&self.vocab, rng)).collect())
    }

    /// Gradient of `ln pi(token | category)` with respect to that category's
    /// logits: `onehot(token) - probs`.
    pub fn grad_logprob(&self, category: usize, token: usize) -> Result<Vec<T>> {
        self.check_token(token)?;
        let mut g = self.probs(category)?;
        for x in g.iter_mut() {
            *x = -*x;
        }
        g[token] = g[token] + T::one();
        Ok(g)
    }

    /// Expected token value under the category's distribution.
    pub fn mean_prediction(&self, category: usize) -> Result<T> {
        let p = self.probs(category)?;
        Ok(p.iter()
            .zip(self.vocab.tokens())
            .map(|(&w, &t)| w * t)
            .sum())
    }

    pub fn argmax_prediction(&self, category: usize) -> Result<T> {
        let row = self.logits(category)?;
        let best = row
            .iter()
            .enumerate()
            .fold(0, |best, (i, &l)| if l > row[best] { i } else { best });
        Ok(self.vocab.value(best))
    }

    pub fn predict(&self, category: usize, readout: Readout) -> Result<T> {
        match readout {
            Readout::Argmax => self.argmax_prediction(category),
            Readout::Mean => self.mean_prediction(category),
        }
    }
}

/// Cached probabilities, log-probabilities and CDF of one policy row.
#[derive(Debug, Clone)]
pub struct CategorySampler<T> {
    probs: Vec<T>,
    log_probs: Vec<T>,
    cdf: Vec<f64>,
}

impl<T: Scalar> CategorySampler<T> {
    pub fn new(policy: &TabularPolicy<T>, category: usize) -> Result<Self> {
        let probs = policy.probs(category)?;
        let log_probs = policy.log_probs(category)?;
        Ok(Self::from_parts(probs, log_probs))
    }

    /// Sampler for an explicit distribution (used by the fixed analysis policies).
    pub fn from_probs(probs: &[T]) -> Self {
        let log_probs = probs.iter().map(|p| p.ln()).collect();
        Self::from_parts(probs.to_vec(), log_probs)
    }

    fn from_parts(probs: Vec<T>, log_probs: Vec<T>) -> Self {
        let mut acc = 0.0;
        let mut cdf: Vec<f64> = probs
            .iter()
            .map(|p| {
                acc += p.as_f64();
                acc
            })
            .collect();
        // Renormalise so the final bucket always closes at exactly 1.
        let total = acc;
        for c in cdf.iter_mut() {
            *c /= total;
        }
        Self {
            probs,
            log_probs,
            cdf,
        }
    }

    pub fn probs(&self) -> &[T] {
        &self.probs
    }

    pub fn log_probs(&self) -> &[T] {
        &self.log_probs
    }

    #[inline]
    pub fn draw_index<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        self.cdf
            .partition_point(|&c| c <= u)
            .min(self.cdf.len() - 1)
    }

    #[inline]
    pub fn draw<R: Rng + ?Sized>(&self, vocab: &ProbVocab<T>, rng: &mut R) -> Draw<T> {
        let token = self.draw_index(rng);
        Draw {
            token,
            p_hat: vocab.value(token),
            logprob: self.log_probs[token],
        }
    }
}

/// PPO value model: one scalar per category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ValueTable<T> {
    psi: Vec<T>,
}

impl<T: Scalar> ValueTable<T> {
    pub fn zeros(num_categories: usize) -> Self {
        Self {
            psi: vec![T::zero(); num_categories],
        }
    }

    pub fn from_values(psi: Vec<T>) -> Result<Self> {
        if !psi.iter().all(|x| x.is_finite()) {
            return invalid_arg("value estimates must be finite");
        }
        Ok(Self { psi })
    }

    pub fn get(&self, category: usize) -> Result<T> {
        self.psi
            .get(category)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("category {category} out of range")))
    }

    pub fn set(&mut self, category: usize, value: T) -> Result<()> {
        if !value.is_finite() {
            return invalid_arg("value estimates must be finite");
        }
        let slot = self
            .psi
            .get_mut(category)
            .ok_or_else(|| Error::InvalidArgument(format!("category {category} out of range")))?;
        *slot = value;
        Ok(())
    }

    pub fn values(&self) -> &[T] {
        &self.psi
    }

    pub(crate) fn values_mut(&mut self) -> &mut [T] {
        &mut self.psi
    }

    pub fn len(&self) -> usize {
        self.psi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.psi.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RolloutEntry<T> {
    pub token: usize,
    pub p_hat: T,
    /// Log-probability under the sampling policy (defines pi_old).
    pub logprob: T,
    pub reward: T,
}

/// G responses sampled for one prompt, all scored against its observed answer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutGroup<T> {
    pub category_id: usize,
    pub answer: bool,
    /// Value estimate of the category at sampling time (zero unless PPO).
    pub baseline: T,
    pub entries: Vec<RolloutEntry<T>>,
}

impl<T: Scalar> RolloutGroup<T> {
    pub fn rewards(&self) -> Vec<T> {
        self.entries.iter().map(|e| e.reward).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RolloutBatch<T> {
    pub group_size: usize,
    pub groups: Vec<RolloutGroup<T>>,
}

impl<T: Scalar> RolloutBatch<T> {
    pub fn new(group_size: usize, groups: Vec<RolloutGroup<T>>) -> Result<Self> {
        if let Some(g) = groups.iter().find(|g| g.entries.len() != group_size) {
            return invalid_arg(format!(
                "group for category {} has {} entries, expected {group_size}",
                g.category_id,
                g.entries.len()
            ));
        }
        Ok(Self { group_size, groups })
    }

    pub fn num_entries(&self) -> usize {
        self.groups.len() * self.group_size
    }

    pub fn mean_reward(&self) -> T {
        let n = self.num_entries();
        if n == 0 {
            return T::zero();
        }
        self.groups
            .iter()
            .flat_map(|g| g.entries.iter().map(|e| e.reward))
            .sum::<T>()
            / T::from_usize_lossy(n)
    }
}

/// On-disk policy checkpoint: `{vocab, logits, psi}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint<T> {
    pub vocab: Vec<T>,
    pub logits: Vec<Vec<T>>,
    pub psi: Vec<T>,
}

impl<T: Scalar> Checkpoint<T> {
    pub fn capture(policy: &TabularPolicy<T>, values: Option<&ValueTable<T>>) -> Self {
        Self {
            vocab: policy.vocab().tokens().to_vec(),
            logits: policy.rows().map(<[T]>::to_vec).collect(),
            psi: values.map(|v| v.values().to_vec()).unwrap_or_default(),
        }
    }

    pub fn restore(&self) -> Result<(TabularPolicy<T>, ValueTable<T>)> {
        let vocab = ProbVocab::new(self.vocab.clone())?;
        let policy = TabularPolicy::from_rows(vocab, self.logits.clone())?;
        let values = if self.psi.is_empty() {
            ValueTable::zeros(policy.num_categories())
        } else if self.psi.len() == policy.num_categories() {
            ValueTable::from_values(self.psi.clone())?
        } else {
            return invalid_arg("psi length does not match the number of categories");
        };
        Ok((policy, values))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}
