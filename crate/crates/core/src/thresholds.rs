//! Per-class percentile targets, the score thresholds derived from them, and
//! the gap-driven unlabeled loss weight.

use ndarray::ArrayView2;
use serde::{Deserialize, Serialize};

use crate::error::{ClassConfigError, Error, Result};
use crate::histogram::ClassHistogram;

pub const DEFAULT_KAPPA_PLUS: f64 = 0.98;
pub const DEFAULT_KAPPA_MINUS: f64 = 0.1;

/// Maps a class's threshold gap and the iteration count to its unlabeled
/// loss weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSchedule {
    pub start_gap: f64,
    pub saturate_gap: f64,
    pub saturate_weight: f64,
    pub warmup_iters: u64,
}

impl Default for WeightSchedule {
    fn default() -> Self {
        Self {
            start_gap: 0.5,
            saturate_gap: 0.55,
            saturate_weight: 1.0,
            warmup_iters: 300,
        }
    }
}

impl WeightSchedule {
    pub fn new(
        start_gap: f64,
        saturate_gap: f64,
        saturate_weight: f64,
        warmup_iters: u64,
    ) -> Result<Self> {
        let s = Self {
            start_gap,
            saturate_gap,
            saturate_weight,
            warmup_iters,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.start_gap.is_finite() && self.saturate_gap.is_finite())
            || self.start_gap >= self.saturate_gap
        {
            return Err(Error::Config(format!(
                "start gap {} must be below saturate gap {}",
                self.start_gap, self.saturate_gap
            )));
        }
        if !(self.saturate_weight.is_finite() && self.saturate_weight > 0.0) {
            return Err(Error::Config(format!(
                "saturate weight {} must be > 0",
                self.saturate_weight
            )));
        }
        Ok(())
    }

    /// Unlabeled loss weight for a threshold gap at iteration `t`.
    ///
    /// Zero during warmup and below the start gap, `saturate_weight` above
    /// the saturate gap, linear in between. Both boundaries evaluate the
    /// ramp, so the weight is continuous in the gap.
    pub fn weight(&self, gap: f64, t: u64) -> f64 {
        if t < self.warmup_iters || gap < self.start_gap {
            0.0
        } else if gap > self.saturate_gap {
            self.saturate_weight
        } else {
            self.saturate_weight * (gap - self.start_gap) / (self.saturate_gap - self.start_gap)
        }
    }
}

/// Free-function form of [`WeightSchedule::weight`].
pub fn loss_weight(gap: f64, t: u64, schedule: &WeightSchedule) -> f64 {
    schedule.weight(gap, t)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdState {
    pub kappa_plus: Vec<f64>,
    pub kappa_minus: Vec<f64>,
    pub tau_plus: Vec<f64>,
    pub tau_minus: Vec<f64>,
}

impl ThresholdState {
    /// Per-class percentiles from global targets, clamped by each class's
    /// negative ratio in the labeled set:
    /// `kappa_plus[c] = max(kappa_plus, r_c)` and, when `clamp_minus` is set,
    /// `kappa_minus[c] = min(kappa_minus, r_c)`.
    ///
    /// Initial score thresholds are taken against a uniform histogram, so
    /// they equal the percentiles.
    pub fn from_labeled(
        kappa_plus: f64,
        kappa_minus: f64,
        labels: ArrayView2<'_, u8>,
        clamp_minus: bool,
    ) -> Result<Self> {
        if !(0.0..=1.0).contains(&kappa_minus)
            || !(0.0..=1.0).contains(&kappa_plus)
            || kappa_minus >= kappa_plus
        {
            return Err(Error::Config(format!(
                "global percentiles must satisfy 0 <= kappa_minus ({kappa_minus}) < kappa_plus ({kappa_plus}) <= 1"
            )));
        }
        let (n, classes) = labels.dim();
        if n == 0 {
            return Err(Error::invalid("labeled set is empty"));
        }
        if labels.iter().any(|&y| y > 1) {
            return Err(Error::invalid("labels must be 0 or 1"));
        }
        let mut state = Self {
            kappa_plus: Vec::with_capacity(classes),
            kappa_minus: Vec::with_capacity(classes),
            tau_plus: Vec::with_capacity(classes),
            tau_minus: Vec::with_capacity(classes),
        };
        let mut errors = Vec::new();
        for (c, column) in labels.columns().into_iter().enumerate() {
            let negatives = column.iter().filter(|&&y| y == 0).count();
            let ratio = negatives as f64 / n as f64;
            let kp = kappa_plus.max(ratio);
            let km = if clamp_minus {
                kappa_minus.min(ratio)
            } else {
                kappa_minus
            };
            if km >= kp {
                errors.push(ClassConfigError {
                    class: c,
                    kappa_minus: km,
                    kappa_plus: kp,
                    negative_ratio: ratio,
                });
            }
            state.kappa_plus.push(kp);
            state.kappa_minus.push(km);
        }
        if !errors.is_empty() {
            return Err(Error::ClassConfig(errors));
        }
        let uniform = ClassHistogram::new(1, 0.0)?;
        for c in 0..classes {
            state.tau_plus.push(uniform.quantile(state.kappa_plus[c])?);
            state
                .tau_minus
                .push(uniform.quantile(state.kappa_minus[c])?);
        }
        Ok(state)
    }

    /// Constant score thresholds for every class; percentiles mirror them.
    pub fn fixed(classes: usize, tau_plus: f64, tau_minus: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&tau_minus)
            || !(0.0..=1.0).contains(&tau_plus)
            || tau_minus > tau_plus
        {
            return Err(Error::Config(format!(
                "fixed thresholds must satisfy 0 <= tau_minus ({tau_minus}) <= tau_plus ({tau_plus}) <= 1"
            )));
        }
        Ok(Self {
            kappa_plus: vec![tau_plus; classes],
            kappa_minus: vec![tau_minus; classes],
            tau_plus: vec![tau_plus; classes],
            tau_minus: vec![tau_minus; classes],
        })
    }

    pub fn classes(&self) -> usize {
        self.kappa_plus.len()
    }

    /// Re-derive score thresholds from the current histograms.
    pub fn refresh(&mut self, histograms: &[ClassHistogram]) -> Result<()> {
        if histograms.len() != self.classes() {
            return Err(Error::shape(
                format!("{} histograms", self.classes()),
                format!("{} histograms", histograms.len()),
            ));
        }
        for (c, h) in histograms.iter().enumerate() {
            self.tau_plus[c] = h.quantile(self.kappa_plus[c])?;
            self.tau_minus[c] = h.quantile(self.kappa_minus[c])?;
        }
        Ok(())
    }

    pub fn gap(&self, class: usize) -> f64 {
        self.tau_plus[class] - self.tau_minus[class]
    }

    pub fn gaps(&self) -> Vec<f64> {
        (0..self.classes()).map(|c| self.gap(c)).collect()
    }

    pub fn class_weights(&self, t: u64, schedule: &WeightSchedule) -> Vec<f64> {
        (0..self.classes())
            .map(|c| schedule.weight(self.gap(c), t))
            .collect()
    }
}

/// Free-function form of [`ThresholdState::refresh`].
pub fn refresh_thresholds(
    state: &ThresholdState,
    histograms: &[ClassHistogram],
) -> Result<ThresholdState> {
    let mut next = state.clone();
    next.refresh(histograms)?;
    Ok(next)
}
