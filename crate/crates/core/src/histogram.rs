//! Per-class EMA histogram of weak-view confidence scores.
//!
//! The histogram is a coarse estimate of one class's score distribution over
//! the unlabeled set. It starts uniform and is blended with each unlabeled
//! mini-batch histogram; [`ClassHistogram::quantile`] inverts the induced
//! piecewise-linear CDF to turn a percentile target into a score threshold.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BIN_COUNT: usize = 100;
pub const DEFAULT_DECAY: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassHistogram {
    bins: Vec<f64>,
    decay: f64,
}

impl ClassHistogram {
    /// Uniform histogram with `bin_count` equal-width bins over `[0, 1]`.
    pub fn new(bin_count: usize, decay: f64) -> Result<Self> {
        if bin_count == 0 {
            return Err(Error::invalid("histogram bin count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::invalid(format!("decay {decay} outside [0, 1]")));
        }
        Ok(Self {
            bins: vec![1.0 / bin_count as f64; bin_count],
            decay,
        })
    }

    /// Rebuild from explicit bin masses. Masses must be non-negative and
    /// sum to one within 1e-9.
    pub fn from_bins(bins: Vec<f64>, decay: f64) -> Result<Self> {
        if bins.is_empty() {
            return Err(Error::invalid("histogram bin count must be >= 1"));
        }
        if !(0.0..=1.0).contains(&decay) {
            return Err(Error::invalid(format!("decay {decay} outside [0, 1]")));
        }
        if bins.iter().any(|b| !b.is_finite() || *b < 0.0) {
            return Err(Error::invalid("histogram bins must be finite and >= 0"));
        }
        let total: f64 = bins.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(format!("histogram mass {total} != 1")));
        }
        Ok(Self { bins, decay })
    }

    pub fn bins(&self) -> &[f64] {
        &self.bins
    }

    pub fn bin_count(&self) -> usize {
        self.bins.len()
    }

    pub fn decay(&self) -> f64 {
        self.decay
    }

    /// Bin index for a score in `[0, 1]`. Interior boundaries go to the
    /// upper bin and 1.0 goes to the top bin.
    pub fn bin_index(&self, score: f64) -> usize {
        let k = self.bins.len();
        let kf = k as f64;
        let mut idx = ((score * kf).floor() as usize).min(k - 1);
        // floor(s * K) can land one bin off when s is a rounded boundary
        if idx + 1 < k && score >= (idx + 1) as f64 / kf {
            idx += 1;
        } else if idx > 0 && score < idx as f64 / kf {
            idx -= 1;
        }
        idx
    }

    /// Fold one unlabeled mini-batch of scores into the running estimate.
    ///
    /// A decay of exactly 0 freezes the histogram: the batch is validated
    /// but the bins are left untouched.
    pub fn update(&mut self, scores: &[f64]) -> Result<()> {
        if scores.is_empty() {
            return Err(Error::invalid("histogram update with an empty batch"));
        }
        if let Some(bad) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(Error::invalid(format!("score {bad} outside [0, 1]")));
        }
        if self.decay == 0.0 {
            return Ok(());
        }
        let mut counts = vec![0usize; self.bins.len()];
        for &s in scores {
            counts[self.bin_index(s)] += 1;
        }
        let batch = scores.len() as f64;
        let keep = self.decay;
        for (bin, count) in self.bins.iter_mut().zip(&counts) {
            *bin = keep * *bin + (1.0 - keep) * (*count as f64 / batch);
        }
        let total: f64 = self.bins.iter().sum();
        self.bins.iter_mut().for_each(|b| *b /= total);
        Ok(())
    }

    /// Smallest score at which the interpolated CDF reaches `kappa`.
    ///
    /// `kappa = 1` always maps to 1.0 so that a class whose labeled data has
    /// no positives can never select a positive pseudo-label.
    pub fn quantile(&self, kappa: f64) -> Result<f64> {
        if !(0.0..=1.0).contains(&kappa) {
            return Err(Error::invalid(format!("percentile {kappa} outside [0, 1]")));
        }
        if kappa == 0.0 {
            return Ok(0.0);
        }
        if kappa == 1.0 {
            return Ok(1.0);
        }
        let kf = self.bins.len() as f64;
        let mut below = 0.0;
        for (k, &mass) in self.bins.iter().enumerate() {
            // tolerance keeps exact ties from skipping past empty bins
            if mass > 0.0 && below + mass >= kappa - 1e-12 {
                let frac = ((kappa - below) / mass).clamp(0.0, 1.0);
                return Ok(((k as f64 + frac) / kf).clamp(0.0, 1.0));
            }
            below += mass;
        }
        // cumulative rounding left the total a hair under kappa
        Ok(1.0)
    }
}
