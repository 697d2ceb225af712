use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Feature-space stand-ins for the weak and strong augmentation functions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPolicy {
    pub weak_noise: f64,
    pub strong_noise: f64,
    pub strong_dropout: f64,
}

impl Default for AugmentationPolicy {
    fn default() -> Self {
        Self {
            weak_noise: 0.1,
            strong_noise: 0.5,
            strong_dropout: 0.2,
        }
    }
}

impl AugmentationPolicy {
    pub fn validate(&self) -> Result<()> {
        if !(self.weak_noise >= 0.0 && self.weak_noise < self.strong_noise) {
            return Err(Error::Config(format!(
                "weak noise {} must be >= 0 and below strong noise {}",
                self.weak_noise, self.strong_noise
            )));
        }
        if !(0.0..1.0).contains(&self.strong_dropout) {
            return Err(Error::Config(format!(
                "strong dropout {} outside [0, 1)",
                self.strong_dropout
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Strength {
    Weak,
    Strong,
}

/// Weak adds Gaussian noise; strong adds larger noise and then zeroes each
/// coordinate independently with the dropout probability.
pub fn augment<R: Rng>(
    x: ArrayView2<'_, f64>,
    policy: &AugmentationPolicy,
    strength: Strength,
    rng: &mut R,
) -> Array2<f64> {
    let mut out = x.to_owned();
    match strength {
        Strength::Weak => {
            if policy.weak_noise > 0.0 {
                out.iter_mut()
                    .for_each(|v| *v += policy.weak_noise * rng.sample::<f64, _>(StandardNormal));
            }
        }
        Strength::Strong => {
            out.iter_mut().for_each(|v| {
                let noise: f64 = rng.sample(StandardNormal);
                let drop = rng.random::<f64>() < policy.strong_dropout;
                *v = if drop {
                    0.0
                } else {
                    *v + policy.strong_noise * noise
                };
            });
        }
    }
    out
}
