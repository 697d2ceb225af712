use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::{LossConfig, LossKind, UnlabeledNorm};
use crate::thresholds::WeightSchedule;
use crate::toy::{AdamConfig, AugmentationPolicy, DatasetSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Percentile thresholds tracked through EMA histograms.
    #[default]
    Percentmatch,
    /// Constant score thresholds (0.95 / 0.0 by default).
    FixmatchFixed,
    /// Unlabeled loss computed and traced but never weighted in.
    SupervisedOnly,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Percentmatch => "percentmatch",
            Method::FixmatchFixed => "fixmatch-fixed",
            Method::SupervisedOnly => "supervised-only",
        }
    }
}

/// Whether each class gets its own unlabeled weight or all classes share
/// the mean weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum AlphaMode {
    #[default]
    PerClass,
    Scalar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LrSchedule {
    #[default]
    Constant,
    /// Linear ramp to `lr` over the first 30% of iterations, then linear
    /// decay to zero.
    WarmupDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    #[default]
    Bce,
    Asymmetric,
}

/// Flat run configuration; the config file is TOML with exactly these keys.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: Option<String>,
    pub seed: u64,

    // dataset
    pub samples: usize,
    pub test_samples: usize,
    pub classes: usize,
    pub features: usize,
    pub imbalance_ratio: f64,
    pub label_fraction: f64,
    pub max_prior: f64,
    pub prototype_scale: f64,
    pub noise_scale: f64,
    /// Replay a dataset dump instead of generating one.
    pub data_path: Option<String>,

    pub method: Method,
    pub kappa_plus: f64,
    pub kappa_minus: f64,
    pub clamp_kappa_minus: bool,
    pub fixed_tau_plus: f64,
    pub fixed_tau_minus: f64,
    pub decay: f64,
    pub bins: usize,

    pub batch_size: usize,
    pub unlabeled_ratio: usize,

    pub start_gap: f64,
    pub saturate_gap: f64,
    pub saturate_weight: f64,
    pub warmup_iters: u64,
    pub alpha_mode: AlphaMode,

    pub loss: LossName,
    pub asl_gamma_pos: f64,
    pub asl_gamma_neg: f64,
    pub asl_shift: f64,
    pub unlabeled_norm: UnlabeledNorm,

    /// Hidden width; 0 selects the linear model.
    pub hidden: usize,
    pub lr: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub lr_schedule: LrSchedule,

    pub weak_noise: f64,
    pub strong_noise: f64,
    pub strong_dropout: f64,

    pub iterations: u64,
    pub eval_every: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        let data = DatasetSpec::default();
        let sched = WeightSchedule::default();
        let adam = AdamConfig::default();
        let aug = AugmentationPolicy::default();
        Self {
            name: None,
            seed: 0,
            samples: data.samples,
            test_samples: data.test_samples,
            classes: data.classes,
            features: data.features,
            imbalance_ratio: data.imbalance_ratio,
            label_fraction: data.label_fraction,
            max_prior: data.max_prior,
            prototype_scale: data.prototype_scale,
            noise_scale: data.noise_scale,
            data_path: None,
            method: Method::Percentmatch,
            kappa_plus: crate::thresholds::DEFAULT_KAPPA_PLUS,
            kappa_minus: crate::thresholds::DEFAULT_KAPPA_MINUS,
            clamp_kappa_minus: true,
            fixed_tau_plus: 0.95,
            fixed_tau_minus: 0.0,
            decay: crate::histogram::DEFAULT_DECAY,
            bins: crate::histogram::DEFAULT_BIN_COUNT,
            batch_size: 36,
            unlabeled_ratio: 1,
            start_gap: sched.start_gap,
            saturate_gap: sched.saturate_gap,
            saturate_weight: sched.saturate_weight,
            warmup_iters: sched.warmup_iters,
            alpha_mode: AlphaMode::PerClass,
            loss: LossName::Bce,
            asl_gamma_pos: 0.0,
            asl_gamma_neg: 4.0,
            asl_shift: 0.05,
            unlabeled_norm: UnlabeledNorm::Batch,
            hidden: 0,
            lr: 3e-3,
            adam_beta1: adam.beta1,
            adam_beta2: adam.beta2,
            adam_eps: adam.eps,
            lr_schedule: LrSchedule::Constant,
            weak_noise: aug.weak_noise,
            strong_noise: aug.strong_noise,
            strong_dropout: aug.strong_dropout,
            iterations: 12000,
            eval_every: 2000,
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is plain data")
    }

    pub fn label(&self) -> String {
        self.name
            .clone()
            .unwrap_or_else(|| self.method.as_str().to_string())
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            samples: self.samples,
            test_samples: self.test_samples,
            classes: self.classes,
            features: self.features,
            imbalance_ratio: self.imbalance_ratio,
            label_fraction: self.label_fraction,
            max_prior: self.max_prior,
            prototype_scale: self.prototype_scale,
            noise_scale: self.noise_scale,
        }
    }

    pub fn schedule(&self) -> WeightSchedule {
        WeightSchedule {
            start_gap: self.start_gap,
            saturate_gap: self.saturate_gap,
            saturate_weight: self.saturate_weight,
            warmup_iters: self.warmup_iters,
        }
    }

    pub fn loss_config(&self) -> LossConfig {
        let kind = match self.loss {
            LossName::Bce => LossKind::BinaryCrossEntropy,
            LossName::Asymmetric => LossKind::Asymmetric {
                gamma_pos: self.asl_gamma_pos,
                gamma_neg: self.asl_gamma_neg,
                shift: self.asl_shift,
            },
        };
        LossConfig {
            kind,
            unlabeled_norm: self.unlabeled_norm,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }

    pub fn augmentation(&self) -> AugmentationPolicy {
        AugmentationPolicy {
            weak_noise: self.weak_noise,
            strong_noise: self.strong_noise,
            strong_dropout: self.strong_dropout,
        }
    }

    pub fn unlabeled_batch(&self) -> usize {
        self.batch_size * self.unlabeled_ratio
    }

    pub fn learning_rate(&self, t: u64) -> f64 {
        match self.lr_schedule {
            LrSchedule::Constant => self.lr,
            LrSchedule::WarmupDecay => {
                let total = self.iterations.max(1) as f64;
                let peak = (0.3 * total).max(1.0);
                let step = t as f64 + 1.0;
                if step <= peak {
                    self.lr * step / peak
                } else {
                    self.lr * ((total - step + 1.0) / (total - peak + 1.0)).max(0.0)
                }
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.data_path.is_none() {
            self.dataset_spec()
                .validate()
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        if !(0.0..=1.0).contains(&self.kappa_minus)
            || !(0.0..=1.0).contains(&self.kappa_plus)
            || self.kappa_minus >= self.kappa_plus
        {
            return Err(Error::Config(format!(
                "need 0 <= kappa_minus ({}) < kappa_plus ({}) <= 1",
                self.kappa_minus, self.kappa_plus
            )));
        }
        if !(0.0..=1.0).contains(&self.fixed_tau_minus)
            || !(0.0..=1.0).contains(&self.fixed_tau_plus)
            || self.fixed_tau_minus > self.fixed_tau_plus
        {
            return Err(Error::Config(format!(
                "need 0 <= fixed_tau_minus ({}) <= fixed_tau_plus ({}) <= 1",
                self.fixed_tau_minus, self.fixed_tau_plus
            )));
        }
        if !(0.0..=1.0).contains(&self.decay) {
            return Err(Error::Config(format!(
                "decay {} outside [0, 1]",
                self.decay
            )));
        }
        if self.bins == 0 {
            return Err(Error::Config("bins must be >= 1".into()));
        }
        if self.batch_size == 0 || self.unlabeled_ratio == 0 {
            return Err(Error::Config(
                "batch_size and unlabeled_ratio must be >= 1".into(),
            ));
        }
        self.schedule().validate()?;
        self.loss_config().validate()?;
        self.augmentation().validate()?;
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr {} must be > 0", self.lr)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || !(self.adam_eps > 0.0)
        {
            return Err(Error::Config(
                "adam betas must lie in [0, 1) and eps > 0".into(),
            ));
        }
        if self.iterations == 0 || self.eval_every == 0 {
            return Err(Error::Config(
                "iterations and eval_every must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid_and_round_trip() {
        let cfg = ExperimentConfig::default();
        cfg.validate().unwrap();
        let back = ExperimentConfig::from_toml_str(&cfg.to_toml_string()).unwrap();
        assert_eq!(cfg, back);
        assert_eq!(cfg.unlabeled_batch(), 36);
        assert_eq!((cfg.kappa_plus, cfg.kappa_minus), (0.98, 0.1));
    }

    #[test]
    fn parses_flat_key_values() {
        let cfg = ExperimentConfig::from_toml_str(
            "method = \"fixmatch-fixed\"\nseed = 4\niterations = 10\nloss = \"asymmetric\"\nalpha_mode = \"scalar\"\n",
        )
        .unwrap();
        assert_eq!(cfg.method, Method::FixmatchFixed);
        assert_eq!(cfg.seed, 4);
        assert_eq!(cfg.alpha_mode, AlphaMode::Scalar);
        assert!(matches!(
            cfg.loss_config().kind,
            LossKind::Asymmetric { .. }
        ));
    }

    #[test]
    fn rejects_unknown_and_invalid() {
        assert!(matches!(
            ExperimentConfig::from_toml_str("bogus = 1"),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_toml_str("kappa_minus = 0.99\nkappa_plus = 0.5").is_err());
        assert!(ExperimentConfig::from_toml_str("start_gap = 0.6").is_err());
        assert!(ExperimentConfig::from_toml_str("label_fraction = 1.5").is_err());
        assert!(ExperimentConfig::from_toml_str("bins = 0").is_err());
    }

    #[test]
    fn warmup_decay_schedule() {
        let cfg = ExperimentConfig {
            lr_schedule: LrSchedule::WarmupDecay,
            iterations: 100,
            ..ExperimentConfig::default()
        };
        assert!(cfg.learning_rate(0) < cfg.lr);
        assert!((cfg.learning_rate(29) - cfg.lr).abs() < 1e-15);
        assert!(cfg.learning_rate(99) > 0.0 && cfg.learning_rate(99) < 0.1 * cfg.lr);
    }
}
