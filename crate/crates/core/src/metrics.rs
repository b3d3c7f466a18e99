//! Calibration and ranking metrics for binary outcome predictions.
//!
//! Bins are equal-width on [0, 1], left-closed and right-open, except the
//! last bin which also contains 1.0. AUROC counts tied pairs as one half.

use std::cmp::Ordering;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{invalid_arg, Error, Result};
use crate::scalar::Scalar;
use crate::util::fmt_num;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin<T> {
    pub lo: T,
    pub hi: T,
    pub count: usize,
    /// `None` for empty bins.
    pub mean_pred: Option<T>,
    pub frac_pos: Option<T>,
}

impl<T: Scalar> ReliabilityBin<T> {
    /// `|frac_pos - mean_pred|`, zero for empty bins.
    pub fn gap(&self) -> T {
        match (self.mean_pred, self.frac_pos) {
            (Some(m), Some(f)) => (f - m).abs(),
            _ => T::zero(),
        }
    }
}

fn check_inputs<T: Scalar>(preds: &[T], labels: &[bool]) -> Result<()> {
    if preds.len() != labels.len() {
        return invalid_arg(format!(
            "{} predictions but {} labels",
            preds.len(),
            labels.len()
        ));
    }
    if preds.is_empty() {
        return invalid_arg("metrics need at least one prediction");
    }
    Ok(())
}

fn bin_index<T: Scalar>(p: T, bins: usize) -> usize {
    let b = (p * T::from_usize_lossy(bins))
        .floor()
        .to_usize()
        .unwrap_or(0);
    b.min(bins - 1)
}

pub fn reliability<T: Scalar>(
    preds: &[T],
    labels: &[bool],
    bins: usize,
) -> Result<Vec<ReliabilityBin<T>>> {
    check_inputs(preds, labels)?;
    if bins == 0 {
        return invalid_arg("need at least one bin");
    }
    if let Some(p) = preds.iter().find(|&&p| !(p >= T::zero() && p <= T::one())) {
        return invalid_arg(format!("prediction {p} outside [0, 1]"));
    }
    let mut counts = vec![0usize; bins];
    let mut pred_sums = vec![0.0f64; bins];
    let mut positives = vec![0usize; bins];
    for (&p, &y) in preds.iter().zip(labels) {
        let b = bin_index(p, bins);
        counts[b] += 1;
        pred_sums[b] += p.as_f64();
        positives[b] += usize::from(y);
    }
    let width = T::one() / T::from_usize_lossy(bins);
    Ok((0..bins)
        .map(|b| {
            let n = counts[b];
            let (mean_pred, frac_pos) = if n > 0 {
                (
                    Some(T::lit(pred_sums[b] / n as f64)),
                    Some(T::lit(positives[b] as f64 / n as f64)),
                )
            } else {
                (None, None)
            };
            ReliabilityBin {
                lo: T::from_usize_lossy(b) * width,
                hi: if b + 1 == bins {
                    T::one()
                } else {
                    T::from_usize_lossy(b + 1) * width
                },
                count: n,
                mean_pred,
                frac_pos,
            }
        })
        .collect())
}

/// Count-weighted mean of `|frac_pos - mean_pred|` over nonempty bins.
pub fn ece<T: Scalar>(preds: &[T], labels: &[bool], bins: usize) -> Result<T> {
    let table = reliability(preds, labels, bins)?;
    Ok(ece_from_bins(&table))
}

pub fn ece_from_bins<T: Scalar>(table: &[ReliabilityBin<T>]) -> T {
    let total: usize = table.iter().map(|b| b.count).sum();
    if total == 0 {
        return T::zero();
    }
    let n = T::from_usize_lossy(total);
    table
        .iter()
        .map(|b| T::from_usize_lossy(b.count) / n * b.gap())
        .sum()
}

/// Probability that a random positive outranks a random negative, ties ½.
pub fn auroc<T: Scalar>(preds: &[T], labels: &[bool]) -> Result<T> {
    check_inputs(preds, labels)?;
    if preds.iter().any(|p| p.is_nan()) {
        return invalid_arg("NaN prediction");
    }
    let n_pos = labels.iter().filter(|&&y| y).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUROC needs at least one positive and one negative label".into(),
        ));
    }
    let mut order: Vec<usize> = (0..preds.len()).collect();
    order.sort_by(|&a, &b| preds[a].partial_cmp(&preds[b]).unwrap_or(Ordering::Equal));

    // Mann-Whitney: sum of midranks of the positives.
    let mut pos_rank_sum = 0.0f64;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && preds[order[end]] == preds[order[start]] {
            end += 1;
        }
        let midrank = (start + end + 1) as f64 / 2.0;
        let pos_in_run = order[start..end].iter().filter(|&&i| labels[i]).count();
        pos_rank_sum += midrank * pos_in_run as f64;
        start = end;
    }
    let u = pos_rank_sum - (n_pos as f64) * (n_pos as f64 + 1.0) / 2.0;
    Ok(T::lit(u / (n_pos as f64 * n_neg as f64)))
}

/// Fraction of samples where `pred > threshold` agrees with the label.
pub fn accuracy<T: Scalar>(preds: &[T], labels: &[bool], threshold: T) -> Result<T> {
    check_inputs(preds, labels)?;
    let correct = preds
        .iter()
        .zip(labels)
        .filter(|(&p, &y)| (p > threshold) == y)
        .count();
    Ok(T::from_usize_lossy(correct) / T::from_usize_lossy(preds.len()))
}

/// `bin_lo,bin_hi,count,mean_pred,frac_pos`; empty bins leave the last two blank.
pub fn write_reliability_csv<T: Scalar, W: Write>(
    table: &[ReliabilityBin<T>],
    writer: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["bin_lo", "bin_hi", "count", "mean_pred", "frac_pos"])?;
    let opt = |x: Option<T>| x.map(fmt_num).unwrap_or_default();
    for b in table {
        w.write_record([
            fmt_num(b.lo),
            fmt_num(b.hi),
            b.count.to_string(),
            opt(b.mean_pred),
            opt(b.frac_pos),
        ])?;
    }
    w.flush()?;
    Ok(())
}
