//! Per-class average precision and ROC-AUC, and pseudo-label quality
//! against withheld ground truth.

use ndarray::{ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_label::SelectionMask;

pub const AP_VARIANT: &str = "non-interpolated";

/// Non-interpolated average precision: sweep samples by descending score
/// (ties keep input order) and average the precision at each positive.
/// `None` when there are no positives.
pub fn average_precision(scores: ArrayView1<'_, f64>, labels: ArrayView1<'_, u8>) -> Option<f64> {
    let positives = labels.iter().filter(|&&y| y == 1).count();
    if positives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] == 1 {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Some(sum / positives as f64)
}

/// Probability that a random positive outscores a random negative, ties
/// counted half, via the Mann-Whitney rank statistic with midranks. `None`
/// unless both polarities are present.
pub fn roc_auc(scores: ArrayView1<'_, f64>, labels: ArrayView1<'_, u8>) -> Option<f64> {
    let n = scores.len();
    let positives = labels.iter().filter(|&&y| y == 1).count();
    let negatives = n - positives;
    if positives == 0 || negatives == 0 {
        return None;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // 1-based ranks start+1 ..= end share their mean
        let midrank = (start + 1 + end) as f64 / 2.0;
        let tied_pos = order[start..end]
            .iter()
            .filter(|&&i| labels[i] == 1)
            .count();
        rank_sum += midrank * tied_pos as f64;
        start = end;
    }
    let p = positives as f64;
    let u = rank_sum - p * (p + 1.0) / 2.0;
    Some(u / (p * negatives as f64))
}

/// Precision and recall of one pseudo-label polarity for one class.
/// Precision is absent when nothing was selected; recall when the split
/// has no entries of that polarity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarityQuality {
    pub selected: usize,
    pub correct: usize,
    pub actual: usize,
    pub precision: Option<f64>,
    pub recall: Option<f64>,
}

impl PolarityQuality {
    fn new(selected: usize, correct: usize, actual: usize) -> Self {
        let ratio = |a: usize, b: usize| (b > 0).then(|| a as f64 / b as f64);
        Self {
            selected,
            correct,
            actual,
            precision: ratio(correct, selected),
            recall: ratio(correct, actual),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassPseudoQuality {
    pub positive: PolarityQuality,
    pub negative: PolarityQuality,
}

pub fn pseudo_label_quality(
    mask: &SelectionMask,
    truth: ArrayView2<'_, u8>,
) -> Result<Vec<ClassPseudoQuality>> {
    if mask.dim() != truth.dim() {
        return Err(Error::shape(
            format!("{:?}", mask.dim()),
            format!("{:?}", truth.dim()),
        ));
    }
    let classes = truth.ncols();
    Ok((0..classes)
        .map(|c| {
            let (mut ps, mut pc, mut ns, mut nc) = (0, 0, 0, 0);
            let mut actual_pos = 0;
            for i in 0..truth.nrows() {
                let y = truth[[i, c]];
                actual_pos += usize::from(y == 1);
                if mask.selected[[i, c]] == 1 {
                    if mask.pseudo[[i, c]] == 1 {
                        ps += 1;
                        pc += usize::from(y == 1);
                    } else {
                        ns += 1;
                        nc += usize::from(y == 0);
                    }
                }
            }
            ClassPseudoQuality {
                positive: PolarityQuality::new(ps, pc, actual_pos),
                negative: PolarityQuality::new(ns, nc, truth.nrows() - actual_pos),
            }
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub iteration: u64,
    pub ap_variant: String,
    pub ap: Vec<Option<f64>>,
    /// Mean AP over classes with at least one positive.
    pub map: Option<f64>,
    pub auc: Vec<Option<f64>>,
    /// Mean AUC over classes with both label polarities.
    pub macro_auc: Option<f64>,
    pub skipped_ap: Vec<usize>,
    pub skipped_auc: Vec<usize>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub pseudo_labels: Option<Vec<ClassPseudoQuality>>,
}

fn mean_present(values: &[Option<f64>]) -> Option<f64> {
    let present: Vec<f64> = values.iter().flatten().copied().collect();
    (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64)
}

impl EvalReport {
    pub fn evaluate(
        iteration: u64,
        scores: ArrayView2<'_, f64>,
        labels: ArrayView2<'_, u8>,
    ) -> Result<Self> {
        if scores.dim() != labels.dim() {
            return Err(Error::shape(
                format!("{:?}", labels.dim()),
                format!("{:?}", scores.dim()),
            ));
        }
        let classes = scores.ncols();
        let ap: Vec<Option<f64>> = (0..classes)
            .map(|c| average_precision(scores.column(c), labels.column(c)))
            .collect();
        let auc: Vec<Option<f64>> = (0..classes)
            .map(|c| roc_auc(scores.column(c), labels.column(c)))
            .collect();
        let skipped = |v: &[Option<f64>]| {
            v.iter()
                .enumerate()
                .filter(|(_, x)| x.is_none())
                .map(|(c, _)| c)
                .collect()
        };
        Ok(Self {
            iteration,
            ap_variant: AP_VARIANT.to_string(),
            map: mean_present(&ap),
            macro_auc: mean_present(&auc),
            skipped_ap: skipped(&ap),
            skipped_auc: skipped(&auc),
            ap,
            auc,
            pseudo_labels: None,
        })
    }
}
