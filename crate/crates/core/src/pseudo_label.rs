//! Hard pseudo-labels and selection masks from weak-view scores.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `selected[i][c] = 1` when the weak score lies strictly above `tau_plus[c]`
/// or strictly below `tau_minus[c]`; `pseudo` holds the hard target
/// `1(score > tau_plus[c])`. Unselected entries never reach a loss.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionMask {
    pub selected: Array2<u8>,
    pub pseudo: Array2<u8>,
}

impl SelectionMask {
    pub fn dim(&self) -> (usize, usize) {
        self.selected.dim()
    }

    pub fn empty(rows: usize, classes: usize) -> Self {
        Self {
            selected: Array2::zeros((rows, classes)),
            pseudo: Array2::zeros((rows, classes)),
        }
    }

    /// Selected positive pseudo-labels per class.
    pub fn positive_counts(&self) -> Vec<usize> {
        self.count(1)
    }

    /// Selected negative pseudo-labels per class.
    pub fn negative_counts(&self) -> Vec<usize> {
        self.count(0)
    }

    fn count(&self, target: u8) -> Vec<usize> {
        let mut counts = vec![0; self.selected.ncols()];
        Zip::indexed(&self.selected)
            .and(&self.pseudo)
            .for_each(|(_, c), &g, &p| {
                if g == 1 && p == target {
                    counts[c] += 1;
                }
            });
        counts
    }
}

pub fn select(
    weak_scores: ArrayView2<'_, f64>,
    tau_plus: &[f64],
    tau_minus: &[f64],
) -> Result<SelectionMask> {
    let (rows, classes) = weak_scores.dim();
    if tau_plus.len() != classes || tau_minus.len() != classes {
        return Err(Error::shape(
            format!("{classes} thresholds per side"),
            format!("{} positive, {} negative", tau_plus.len(), tau_minus.len()),
        ));
    }
    if let Some(c) = (0..classes).find(|&c| !(tau_minus[c] <= tau_plus[c])) {
        return Err(Error::invalid(format!(
            "class {c}: tau_minus {} > tau_plus {}",
            tau_minus[c], tau_plus[c]
        )));
    }
    if let Some(bad) = weak_scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::invalid(format!("score {bad} outside [0, 1]")));
    }
    let mut mask = SelectionMask::empty(rows, classes);
    Zip::indexed(weak_scores)
        .and(&mut mask.selected)
        .and(&mut mask.pseudo)
        .for_each(|(_, c), &p, g, pseudo| {
            let positive = p > tau_plus[c];
            let negative = p < tau_minus[c];
            *g = u8::from(positive) + u8::from(negative);
            *pseudo = u8::from(positive);
        });
    Ok(mask)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn one(score: f64, tp: f64, tm: f64) -> (u8, u8) {
        let m = select(array![[score]].view(), &[tp], &[tm]).unwrap();
        (m.selected[[0, 0]], m.pseudo[[0, 0]])
    }

    #[test]
    fn examples() {
        assert_eq!(one(0.99, 0.98, 0.1), (1, 1));
        assert_eq!(one(0.05, 0.98, 0.1), (1, 0));
        assert_eq!(one(0.50, 0.98, 0.1).0, 0);
        assert_eq!(one(0.98, 0.98, 0.1).0, 0);
        assert_eq!(one(0.1, 0.98, 0.1).0, 0);
    }

    #[test]
    fn fixed_positive_only_thresholds_never_select_negatives() {
        let scores = array![[0.0, 0.96, 0.3], [0.2, 0.94, 1.0]];
        let m = select(scores.view(), &[0.95; 3], &[0.0; 3]).unwrap();
        assert_eq!(m.negative_counts(), vec![0, 0, 0]);
        assert_eq!(m.positive_counts(), vec![0, 1, 1]);
    }

    #[test]
    fn errors() {
        let s = array![[0.5, 0.5]];
        assert!(matches!(
            select(s.view(), &[0.9], &[0.1]),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(matches!(
            select(s.view(), &[0.2, 0.9], &[0.3, 0.1]),
            Err(Error::InvalidArgument(_))
        ));
        assert!(select(array![[1.2]].view(), &[0.9], &[0.1]).is_err());
    }

    #[test]
    fn single_label_degeneracy() {
        // softmax-like rows: a selected positive forces every other entry below 1 - tau
        let tau = 0.8;
        let rows = [[0.85, 0.1, 0.05], [0.9, 0.06, 0.04], [0.81, 0.19, 0.0]];
        for row in rows {
            let scores = ndarray::Array2::from_shape_vec((1, 3), row.to_vec()).unwrap();
            let m = select(scores.view(), &[tau; 3], &[1.0 - tau; 3]).unwrap();
            for c in 0..3 {
                if m.selected[[0, c]] == 1 && m.pseudo[[0, c]] == 1 {
                    for other in (0..3).filter(|&o| o != c) {
                        assert!(row[other] < 1.0 - tau);
                        assert_eq!((m.selected[[0, other]], m.pseudo[[0, other]]), (1, 0));
                    }
                }
            }
        }
    }
}
