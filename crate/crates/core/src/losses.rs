//! Elementwise classification loss, the supervised and masked unlabeled
//! objectives, and their gradients with respect to the sigmoid scores.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pseudo_label::SelectionMask;

/// Scores are clamped into `[SCORE_EPS, 1 - SCORE_EPS]` before any log.
pub const SCORE_EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    BinaryCrossEntropy,
    /// Focal down-weighting with separate exponents for the positive and
    /// negative terms, plus a probability shift on negatives.
    Asymmetric {
        gamma_pos: f64,
        gamma_neg: f64,
        shift: f64,
    },
}

/// How the masked unlabeled sum is normalized.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum UnlabeledNorm {
    /// Divide by the unlabeled batch size.
    #[default]
    Batch,
    /// Divide each class's sum by its number of selected entries.
    Selected,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
pub struct LossConfig {
    pub kind: LossKind,
    pub unlabeled_norm: UnlabeledNorm,
}

impl LossConfig {
    pub fn bce() -> Self {
        Self::default()
    }

    pub fn asymmetric(gamma_pos: f64, gamma_neg: f64, shift: f64) -> Result<Self> {
        let cfg = Self {
            kind: LossKind::Asymmetric {
                gamma_pos,
                gamma_neg,
                shift,
            },
            unlabeled_norm: UnlabeledNorm::Batch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if let LossKind::Asymmetric {
            gamma_pos,
            gamma_neg,
            shift,
        } = self.kind
        {
            if !(gamma_pos >= 0.0 && gamma_neg >= 0.0)
                || !gamma_pos.is_finite()
                || !gamma_neg.is_finite()
            {
                return Err(Error::Config(
                    "asymmetric exponents must be finite and >= 0".into(),
                ));
            }
            if !(0.0..1.0).contains(&shift) {
                return Err(Error::Config(format!(
                    "probability shift {shift} outside [0, 1)"
                )));
            }
        }
        Ok(())
    }
}

fn clamp_score(score: f64) -> f64 {
    score.clamp(SCORE_EPS, 1.0 - SCORE_EPS)
}

/// `x^g` with `0^0 = 1`, and `g * x^(g-1)` with the `g = 0` term dropped.
fn pow_and_slope(x: f64, g: f64) -> (f64, f64) {
    if g == 0.0 {
        (1.0, 0.0)
    } else {
        (x.powf(g), g * x.powf(g - 1.0))
    }
}

/// Loss value and its derivative with respect to the raw score. The
/// derivative is zero where clamping is active.
fn loss_and_slope(target: u8, score: f64, kind: &LossKind) -> (f64, f64) {
    let p = clamp_score(score);
    let inside = p == score;
    let (value, slope) = match (*kind, target) {
        (LossKind::BinaryCrossEntropy, 1) => (-p.ln(), -1.0 / p),
        (LossKind::BinaryCrossEntropy, _) => (-(1.0 - p).ln(), 1.0 / (1.0 - p)),
        (LossKind::Asymmetric { gamma_pos, .. }, 1) => {
            // -(1-p)^g log p
            let (w, dw) = pow_and_slope(1.0 - p, gamma_pos);
            (-w * p.ln(), dw * p.ln() - w / p)
        }
        (
            LossKind::Asymmetric {
                gamma_neg, shift, ..
            },
            _,
        ) => {
            // -q^g log(1-q), q = max(p - shift, 0)
            let q = (p - shift).max(0.0);
            if q == 0.0 {
                (0.0, 0.0)
            } else {
                let (w, dw) = pow_and_slope(q, gamma_neg);
                (-w * (1.0 - q).ln(), -dw * (1.0 - q).ln() + w / (1.0 - q))
            }
        }
    };
    (value, if inside { slope } else { 0.0 })
}

fn check_score(score: f64) -> Result<()> {
    if score.is_nan() {
        Err(Error::invalid("NaN score"))
    } else {
        Ok(())
    }
}

pub fn elementwise_loss(target: u8, score: f64, cfg: &LossConfig) -> Result<f64> {
    check_score(score)?;
    if target > 1 {
        return Err(Error::invalid(format!("target {target} is not binary")));
    }
    Ok(loss_and_slope(target, score, &cfg.kind).0)
}

/// Derivative of [`elementwise_loss`] with respect to `score`.
pub fn elementwise_grad(target: u8, score: f64, cfg: &LossConfig) -> Result<f64> {
    check_score(score)?;
    if target > 1 {
        return Err(Error::invalid(format!("target {target} is not binary")));
    }
    Ok(loss_and_slope(target, score, &cfg.kind).1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub value: f64,
    /// d(value)/d(score), same shape as the score matrix.
    pub grad: Array2<f64>,
}

/// Per-class unlabeled losses and the unweighted per-entry gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledLoss {
    pub per_class: Vec<f64>,
    /// `grad[i][c]` is d(per_class[c]) / d(strong_score[i][c]).
    pub grad: Array2<f64>,
}

impl UnlabeledLoss {
    pub fn total(&self) -> f64 {
        self.per_class.iter().sum()
    }
}

/// Mean over the batch of the per-sample class-summed loss.
pub fn supervised_loss(
    labels: ArrayView2<'_, u8>,
    scores: ArrayView2<'_, f64>,
    cfg: &LossConfig,
) -> Result<LossAndGrad> {
    if labels.dim() != scores.dim() {
        return Err(Error::shape(
            format!("{:?}", labels.dim()),
            format!("{:?}", scores.dim()),
        ));
    }
    let rows = scores.nrows();
    if rows == 0 {
        return Err(Error::invalid("empty labeled batch"));
    }
    check_matrix(labels, scores)?;
    let scale = 1.0 / rows as f64;
    let mut value = 0.0;
    let mut grad = Array2::zeros(scores.dim());
    Zip::from(&mut grad)
        .and(labels)
        .and(scores)
        .for_each(|g, &y, &p| {
            let (l, s) = loss_and_slope(y, p, &cfg.kind);
            value += l;
            *g = s * scale;
        });
    Ok(LossAndGrad {
        value: value * scale,
        grad,
    })
}

/// Masked loss of pseudo-labels against strong-view scores, split by class.
/// Entries with `selected = 0` contribute nothing and get zero gradient.
pub fn unlabeled_loss(
    mask: &SelectionMask,
    strong_scores: ArrayView2<'_, f64>,
    cfg: &LossConfig,
) -> Result<UnlabeledLoss> {
    if mask.dim() != strong_scores.dim() {
        return Err(Error::shape(
            format!("{:?}", mask.dim()),
            format!("{:?}", strong_scores.dim()),
        ));
    }
    let (rows, classes) = strong_scores.dim();
    if rows == 0 {
        return Err(Error::invalid("empty unlabeled batch"));
    }
    check_matrix(mask.pseudo.view(), strong_scores)?;
    let mut per_class = vec![0.0; classes];
    let mut grad = Array2::zeros((rows, classes));
    Zip::indexed(&mut grad)
        .and(&mask.selected)
        .and(&mask.pseudo)
        .and(strong_scores)
        .for_each(|(_, c), g, &sel, &target, &p| {
            if sel == 1 {
                let (l, s) = loss_and_slope(target, p, &cfg.kind);
                per_class[c] += l;
                *g = s;
            }
        });
    let scales: Vec<f64> = match cfg.unlabeled_norm {
        UnlabeledNorm::Batch => vec![1.0 / rows as f64; classes],
        UnlabeledNorm::Selected => mask
            .selected
            .columns()
            .into_iter()
            .map(|col| 1.0 / col.iter().map(|&g| g as usize).sum::<usize>().max(1) as f64)
            .collect(),
    };
    for (c, scale) in scales.iter().enumerate() {
        per_class[c] *= scale;
        grad.column_mut(c).mapv_inplace(|g| g * scale);
    }
    Ok(UnlabeledLoss { per_class, grad })
}

pub fn total_loss(supervised: f64, unlabeled: f64, alpha: f64) -> f64 {
    supervised + alpha * unlabeled
}

/// Objective `L_s + sum_c alpha_c L_u,c` and its gradients with respect to
/// the labeled weak-view scores and the unlabeled strong-view scores.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub supervised: f64,
    pub unlabeled: f64,
    pub total: f64,
    pub grad_labeled: Array2<f64>,
    pub grad_strong: Array2<f64>,
}

pub fn objective(sup: LossAndGrad, unl: UnlabeledLoss, class_weights: &[f64]) -> Result<Objective> {
    if class_weights.len() != unl.per_class.len() {
        return Err(Error::shape(
            format!("{} class weights", unl.per_class.len()),
            format!("{}", class_weights.len()),
        ));
    }
    let weighted: f64 = unl
        .per_class
        .iter()
        .zip(class_weights)
        .map(|(l, a)| a * l)
        .sum();
    let mut grad_strong = unl.grad;
    for (c, &a) in class_weights.iter().enumerate() {
        grad_strong.column_mut(c).mapv_inplace(|g| g * a);
    }
    Ok(Objective {
        supervised: sup.value,
        unlabeled: unl.per_class.iter().sum(),
        total: sup.value + weighted,
        grad_labeled: sup.grad,
        grad_strong,
    })
}

fn check_matrix(labels: ArrayView2<'_, u8>, scores: ArrayView2<'_, f64>) -> Result<()> {
    if scores.iter().any(|p| p.is_nan()) {
        return Err(Error::invalid("NaN score"));
    }
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::invalid("targets must be 0 or 1"));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo_label::select;
    use approx::assert_abs_diff_eq;
    use ndarray::{array, concatenate, Axis};
    use proptest::prelude::*;
    use std::f64::consts::LN_2;

    #[test]
    fn bce_values() {
        let c = LossConfig::bce();
        assert_abs_diff_eq!(elementwise_loss(1, 0.5, &c).unwrap(), LN_2, epsilon = 1e-12);
        assert!(elementwise_loss(0, 0.0, &c).unwrap() < 1e-6);
        assert!(elementwise_loss(1, 0.0, &c).unwrap().is_finite());
        assert!(elementwise_loss(0, 1.0, &c).unwrap().is_finite());
        assert!(elementwise_loss(1, f64::NAN, &c).is_err());
    }

    #[test]
    fn asymmetric_with_zero_parameters_is_bce() {
        let asl = LossConfig::asymmetric(0.0, 0.0, 0.0).unwrap();
        let bce = LossConfig::bce();
        for i in 0..=100 {
            let p = i as f64 / 100.0;
            for y in [0, 1] {
                assert_abs_diff_eq!(
                    elementwise_loss(y, p, &asl).unwrap(),
                    elementwise_loss(y, p, &bce).unwrap(),
                    epsilon = 1e-12
                );
            }
        }
        assert!(LossConfig::asymmetric(-1.0, 0.0, 0.0).is_err());
        assert!(LossConfig::asymmetric(0.0, 4.0, 1.0).is_err());
    }

    #[test]
    fn asymmetric_shift_zeroes_easy_negatives() {
        let asl = LossConfig::asymmetric(0.0, 4.0, 0.05).unwrap();
        assert_eq!(elementwise_loss(0, 0.04, &asl).unwrap(), 0.0);
        assert_eq!(elementwise_grad(0, 0.04, &asl).unwrap(), 0.0);
        assert!(elementwise_loss(0, 0.9, &asl).unwrap() > 0.0);
    }

    #[test]
    fn supervised_examples() {
        let c = LossConfig::bce();
        let l = supervised_loss(array![[1u8, 0]].view(), array![[0.5, 0.5]].view(), &c).unwrap();
        assert_abs_diff_eq!(l.value, 2.0 * LN_2, epsilon = 1e-12);

        let labels = array![[1u8, 0, 1], [0, 0, 1]];
        let scores = array![[0.999, 0.001, 0.999], [0.001, 0.001, 0.999]];
        let l = supervised_loss(labels.view(), scores.view(), &c).unwrap();
        assert!(l.value < 3.0 * 0.0011);

        let labels2 = concatenate![Axis(0), labels, labels];
        let scores2 = concatenate![Axis(0), scores, scores];
        let l2 = supervised_loss(labels2.view(), scores2.view(), &c).unwrap();
        assert_abs_diff_eq!(l.value, l2.value, epsilon = 1e-12);

        assert!(matches!(
            supervised_loss(labels.view(), array![[0.5]].view(), &c),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn unlabeled_examples() {
        let c = LossConfig::bce();
        let empty = SelectionMask::empty(3, 2);
        let strong = array![[0.2, 0.9], [0.5, 0.5], [0.1, 0.7]];
        let l = unlabeled_loss(&empty, strong.view(), &c).unwrap();
        assert_eq!(l.total(), 0.0);
        assert!(l.grad.iter().all(|&g| g == 0.0));

        let mask = select(array![[0.99]].view(), &[0.98], &[0.1]).unwrap();
        let l = unlabeled_loss(&mask, array![[0.5]].view(), &c).unwrap();
        assert_abs_diff_eq!(l.total(), LN_2, epsilon = 1e-12);

        assert!(unlabeled_loss(&empty, array![[0.5]].view(), &c).is_err());
    }

    #[test]
    fn selected_normalization() {
        let mut c = LossConfig::bce();
        c.unlabeled_norm = UnlabeledNorm::Selected;
        let mask = select(array![[0.99], [0.5], [0.5], [0.5]].view(), &[0.98], &[0.1]).unwrap();
        let l = unlabeled_loss(&mask, array![[0.5], [0.3], [0.3], [0.3]].view(), &c).unwrap();
        assert_abs_diff_eq!(l.total(), LN_2, epsilon = 1e-12);
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_loss(0.7, 3.0, 0.0), 0.7);
        assert_eq!(total_loss(1.0, 0.5, 1.0), 1.5);
        assert_eq!(total_loss(0.0, 2.0, 0.5), 1.0);
    }

    proptest! {
        #[test]
        fn losses_non_negative(y in 0u8..=1, p in 0.0f64..=1.0, gp in 0.0f64..5.0, gn in 0.0f64..5.0, m in 0.0f64..0.5) {
            let asl = LossConfig::asymmetric(gp, gn, m).unwrap();
            prop_assert!(elementwise_loss(y, p, &asl).unwrap() >= 0.0);
            prop_assert!(elementwise_loss(y, p, &LossConfig::bce()).unwrap() >= 0.0);
        }

        #[test]
        fn total_linear_in_unlabeled(ls in 0.0f64..10.0, lu in 0.0f64..10.0, a in 0.0f64..2.0, d in 0.0f64..1.0) {
            let slope = (total_loss(ls, lu + d, a) - total_loss(ls, lu, a)) / d.max(1e-9);
            prop_assume!(d > 1e-3);
            prop_assert!((slope - a).abs() < 1e-8);
        }

        #[test]
        fn masked_entries_are_inert(
            weak in prop::collection::vec(0.0f64..=1.0, 12),
            strong in prop::collection::vec(0.01f64..0.99, 12),
            bump in -0.005f64..0.005,
        ) {
            let weak = Array2::from_shape_vec((4, 3), weak).unwrap();
            let strong = Array2::from_shape_vec((4, 3), strong).unwrap();
            let mask = select(weak.view(), &[0.7; 3], &[0.3; 3]).unwrap();
            let cfg = LossConfig::asymmetric(1.0, 4.0, 0.05).unwrap();
            let base = unlabeled_loss(&mask, strong.view(), &cfg).unwrap();
            for ((i, c), &g) in mask.selected.indexed_iter() {
                if g == 0 {
                    let mut s2 = strong.clone();
                    s2[[i, c]] += bump;
                    let moved = unlabeled_loss(&mask, s2.view(), &cfg).unwrap();
                    prop_assert_eq!(&moved.per_class, &base.per_class);
                    prop_assert_eq!(&moved.grad, &base.grad);
                    prop_assert_eq!(base.grad[[i, c]], 0.0);
                }
            }
        }
    }
}
