//! Synthetic question/category/answer world and verifier rewards.

use std::io::{Read, Write};
use std::str::FromStr;

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::rng::{self, tags};
use crate::scalar::Scalar;

/// Hidden Bernoulli rate of each question category.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryTable<T> {
    rates: Vec<T>,
    seed: u64,
}

impl<T: Scalar> CategoryTable<T> {
    /// Rejects empty tables and any rate outside the open interval (0, 1).
    pub fn new(rates: Vec<T>, seed: u64) -> Result<Self> {
        if rates.is_empty() {
            return invalid_arg("category table must contain at least one rate");
        }
        if let Some((i, r)) = rates
            .iter()
            .enumerate()
            .find(|(_, &r)| !(r > T::zero() && r < T::one()))
        {
            return invalid_arg(format!("rate {i} = {r} is outside (0, 1)"));
        }
        Ok(Self { rates, seed })
    }

    pub fn rates(&self) -> &[T] {
        &self.rates
    }

    pub fn rate(&self, category: usize) -> Result<T> {
        self.rates
            .get(category)
            .copied()
            .ok_or_else(|| Error::InvalidArgument(format!("category {category} out of range")))
    }

    pub fn len(&self) -> usize {
        self.rates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rates.is_empty()
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }
}

/// Draws `k` category rates i.i.d. from Uniform(0, 1).
pub fn gen_categories<T: Scalar>(k: usize, seed: u64) -> Result<CategoryTable<T>> {
    if k == 0 {
        return invalid_arg("k must be at least 1");
    }
    let mut rng = rng::stream(seed, &[tags::CATEGORIES]);
    let rates = (0..k)
        .map(|_| loop {
            let u: f64 = rng.sample(Open01);
            // f32 rounding can land on the boundary; redraw in that case.
            let r = T::lit(u);
            if r > T::zero() && r < T::one() {
                break r;
            }
        })
        .collect();
    CategoryTable::new(rates, seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Sample {
    pub question_id: usize,
    pub category_id: usize,
    pub answer: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    fn tag(self) -> u64 {
        match self {
            Split::Train => 0,
            Split::Eval => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    samples: Vec<Sample>,
    split: Split,
    num_categories: usize,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, split: Split, num_categories: usize) -> Result<Self> {
        if samples.is_empty() {
            return invalid_arg("dataset must be nonempty");
        }
        if let Some(s) = samples.iter().find(|s| s.category_id >= num_categories) {
            return invalid_arg(format!(
                "sample {} references category {} but only {} exist",
                s.question_id, s.category_id, num_categories
            ));
        }
        Ok(Self {
            samples,
            split,
            num_categories,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn num_categories(&self) -> usize {
        self.num_categories
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn categories(&self) -> impl Iterator<Item = usize> + '_ {
        self.samples.iter().map(|s| s.category_id)
    }

    pub fn answers(&self) -> impl Iterator<Item = bool> + '_ {
        self.samples.iter().map(|s| s.answer)
    }

    /// Writes `question_id,category_id,answer` with a header row.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["question_id", "category_id", "answer"])?;
        for s in &self.samples {
            w.write_record([
                s.question_id.to_string(),
                s.category_id.to_string(),
                u8::from(s.answer).to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(reader: R, split: Split, num_categories: usize) -> Result<Self> {
        let mut r = csv::Reader::from_reader(reader);
        let headers = r.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["question_id", "category_id", "answer"] {
            return invalid_arg(format!("unexpected dataset header {headers:?}"));
        }
        let mut samples = Vec::new();
        for record in r.records() {
            let record = record?;
            let field = |i: usize| -> Result<usize> {
                usize::from_str(record[i].trim()).map_err(|e| {
                    Error::InvalidArgument(format!("bad integer {:?}: {e}", &record[i]))
                })
            };
            let answer = match field(2)? {
                0 => false,
                1 => true,
                other => return invalid_arg(format!("answer must be 0 or 1, got {other}")),
            };
            samples.push(Sample {
                question_id: field(0)?,
                category_id: field(1)?,
                answer,
            });
        }
        Dataset::new(samples, split, num_categories)
    }
}

/// Assigns each of `n` questions a uniformly random category and a
/// Bernoulli(rate) answer.
pub fn gen_dataset<T: Scalar>(
    table: &CategoryTable<T>,
    n: usize,
    seed: u64,
    split: Split,
) -> Result<Dataset> {
    if table.is_empty() {
        return invalid_arg("category table is empty");
    }
    if n == 0 {
        return invalid_arg("n must be at least 1");
    }
    let k = table.len();
    let mut rng = rng::stream(seed, &[tags::DATASET, split.tag()]);
    let samples = (0..n)
        .map(|question_id| {
            let category_id = rng.random_range(0..k);
            let u: f64 = rng.random();
            Sample {
                question_id,
                category_id,
                answer: u < table.rates[category_id].as_f64(),
            }
        })
        .collect();
    Dataset::new(samples, split, k)
}

/// Category rates plus train and held-out datasets drawn from one seed.
#[derive(Debug, Clone, PartialEq)]
pub struct World<T> {
    pub table: CategoryTable<T>,
    pub train: Dataset,
    pub eval: Dataset,
}

impl<T: Scalar> World<T> {
    /// `k` categories and `n` questions in each split.
    pub fn generate(k: usize, n: usize, seed: u64) -> Result<Self> {
        let table = gen_categories(k, seed)?;
        let train = gen_dataset(&table, n, seed, Split::Train)?;
        let eval = gen_dataset(&table, n, seed, Split::Eval)?;
        Ok(Self { table, train, eval })
    }
}

/// Strictly proper scoring rule used as the verifier reward.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RewardRule {
    #[default]
    LogLikelihood,
    Brier,
}

impl RewardRule {
    pub fn name(self) -> &'static str {
        match self {
            RewardRule::LogLikelihood => "loglik",
            RewardRule::Brier => "brier",
        }
    }

    /// Reward without domain checks; callers guarantee `p_hat` is valid.
    #[inline]
    pub fn eval<T: Scalar>(self, p_hat: T, answer: bool) -> T {
        match (self, answer) {
            (RewardRule::LogLikelihood, true) => p_hat.ln(),
            (RewardRule::LogLikelihood, false) => (T::one() - p_hat).ln(),
            (RewardRule::Brier, true) => -(T::one() - p_hat).powi(2),
            (RewardRule::Brier, false) => -p_hat.powi(2),
        }
    }

    /// Rewards of every token in `tokens` for a fixed answer.
    pub fn table<T: Scalar>(self, tokens: &[T], answer: bool) -> Vec<T> {
        tokens.iter().map(|&p| self.eval(p, answer)).collect()
    }
}

impl FromStr for RewardRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "loglik" | "log-likelihood" | "loglikelihood" => Ok(RewardRule::LogLikelihood),
            "brier" => Ok(RewardRule::Brier),
            other => invalid_arg(format!("unknown reward rule {other:?}")),
        }
    }
}

/// `a ln p + (1-a) ln(1-p)` for log-likelihood, `-(a-p)^2` for Brier.
pub fn reward<T: Scalar>(p_hat: T, answer: bool, rule: RewardRule) -> Result<T> {
    let ok = match rule {
        RewardRule::LogLikelihood => p_hat > T::zero() && p_hat < T::one(),
        RewardRule::Brier => p_hat >= T::zero() && p_hat <= T::one(),
    };
    if !ok {
        return invalid_arg(format!(
            "p_hat = {p_hat} outside the domain of {}",
            rule.name()
        ));
    }
    Ok(rule.eval(p_hat, answer))
}
