use std::io::{BufRead, Write};

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const DUMP_MAGIC: &str = "#percentmatch-dataset";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    /// Size of the train pool that is split into labeled and unlabeled.
    pub samples: usize,
    pub test_samples: usize,
    pub classes: usize,
    pub features: usize,
    pub imbalance_ratio: f64,
    pub label_fraction: f64,
    /// Prior of the most frequent class.
    pub max_prior: f64,
    /// Euclidean norm of each class prototype.
    pub prototype_scale: f64,
    pub noise_scale: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        Self {
            samples: 5000,
            test_samples: 2000,
            classes: 20,
            features: 50,
            imbalance_ratio: 20.0,
            label_fraction: 0.1,
            max_prior: 0.4,
            prototype_scale: 4.0,
            noise_scale: 1.0,
        }
    }
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 || self.test_samples == 0 || self.classes == 0 || self.features == 0 {
            return Err(Error::invalid(
                "sample, class and feature counts must be positive",
            ));
        }
        if !(self.label_fraction > 0.0 && self.label_fraction < 1.0) {
            return Err(Error::invalid(format!(
                "label fraction {} outside (0, 1)",
                self.label_fraction
            )));
        }
        if !(self.imbalance_ratio >= 1.0 && self.imbalance_ratio.is_finite()) {
            return Err(Error::invalid(format!(
                "imbalance ratio {} must be >= 1",
                self.imbalance_ratio
            )));
        }
        if !(self.max_prior > 0.0 && self.max_prior < 1.0) {
            return Err(Error::invalid(format!(
                "class prior {} infeasible, must lie in (0, 1)",
                self.max_prior
            )));
        }
        if !(self.noise_scale >= 0.0 && self.prototype_scale >= 0.0) {
            return Err(Error::invalid("noise and prototype scales must be >= 0"));
        }
        let labeled = self.labeled_count();
        if labeled == 0 || labeled >= self.samples {
            return Err(Error::invalid(format!(
                "label fraction {} of {} samples leaves an empty split",
                self.label_fraction, self.samples
            )));
        }
        Ok(())
    }

    pub fn labeled_count(&self) -> usize {
        (self.label_fraction * self.samples as f64).round() as usize
    }

    /// Log-spaced from `max_prior` down to `max_prior / imbalance_ratio`.
    pub fn class_priors(&self) -> Vec<f64> {
        if self.classes == 1 {
            return vec![self.max_prior];
        }
        let last = (self.classes - 1) as f64;
        (0..self.classes)
            .map(|c| self.max_prior * self.imbalance_ratio.powf(-(c as f64) / last))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Split {
    pub features: Array2<f64>,
    pub labels: Array2<u8>,
}

impl Split {
    pub fn len(&self) -> usize {
        self.features.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, rows: &[usize]) -> Split {
        Split {
            features: self.features.select(Axis(0), rows),
            labels: self.labels.select(Axis(0), rows),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub labeled: Split,
    /// Labels are retained for evaluation only.
    pub unlabeled: Split,
    pub test: Split,
    pub class_priors: Vec<f64>,
}

impl SyntheticDataset {
    pub fn classes(&self) -> usize {
        self.class_priors.len()
    }

    pub fn features(&self) -> usize {
        self.labeled.features.ncols()
    }

    pub fn imbalance_ratio(&self) -> f64 {
        let max = self.class_priors.iter().cloned().fold(f64::MIN, f64::max);
        let min = self.class_priors.iter().cloned().fold(f64::MAX, f64::min);
        max / min
    }

    /// Write the self-describing text dump: a magic/shape line, a priors
    /// line, a column header, then one sample per line.
    pub fn write_to(&self, mut out: impl Write) -> Result<()> {
        let (d, c) = (self.features(), self.classes());
        writeln!(out, "{DUMP_MAGIC},features={d},classes={c}")?;
        let priors: Vec<String> = self.class_priors.iter().map(|p| p.to_string()).collect();
        writeln!(out, "#priors,{}", priors.join(","))?;
        let mut header = vec!["split".to_string()];
        header.extend((0..d).map(|j| format!("x{j}")));
        header.extend((0..c).map(|j| format!("y{j}")));
        writeln!(out, "{}", header.join(","))?;
        for (name, split) in [
            ("labeled", &self.labeled),
            ("unlabeled", &self.unlabeled),
            ("test", &self.test),
        ] {
            for (x, y) in split.features.rows().into_iter().zip(split.labels.rows()) {
                let mut line = String::from(name);
                for v in x {
                    line.push(',');
                    line.push_str(&v.to_string());
                }
                for v in y {
                    line.push(',');
                    line.push_str(if *v == 1 { "1" } else { "0" });
                }
                writeln!(out, "{line}")?;
            }
        }
        Ok(())
    }

    pub fn read_from(input: impl BufRead) -> Result<Self> {
        let mut lines = input.lines().enumerate();
        let parse_err = |line: usize, message: String| Error::Parse {
            line: line + 1,
            message,
        };

        let (n0, first) = lines
            .next()
            .ok_or_else(|| parse_err(0, "empty dataset file".into()))?;
        let first = first?;
        let mut parts = first.split(',');
        if parts.next() != Some(DUMP_MAGIC) {
            return Err(parse_err(n0, "missing dataset header".into()));
        }
        let mut dims = [None, None];
        for kv in parts {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| parse_err(n0, format!("bad header field {kv:?}")))?;
            let v: usize = v.parse().map_err(|e| parse_err(n0, format!("{k}: {e}")))?;
            match k {
                "features" => dims[0] = Some(v),
                "classes" => dims[1] = Some(v),
                _ => return Err(parse_err(n0, format!("unknown header field {k:?}"))),
            }
        }
        let (d, c) = match dims {
            [Some(d), Some(c)] => (d, c),
            _ => return Err(parse_err(n0, "header needs features= and classes=".into())),
        };

        let (n1, priors_line) = lines
            .next()
            .ok_or_else(|| parse_err(1, "missing priors line".into()))?;
        let priors_line = priors_line?;
        let priors = priors_line
            .strip_prefix("#priors,")
            .ok_or_else(|| parse_err(n1, "missing priors line".into()))?
            .split(',')
            .map(|p| p.parse::<f64>().map_err(|e| parse_err(n1, e.to_string())))
            .collect::<Result<Vec<_>>>()?;
        if priors.len() != c {
            return Err(parse_err(
                n1,
                format!("expected {c} priors, found {}", priors.len()),
            ));
        }
        let (n2, _) = lines
            .next()
            .ok_or_else(|| parse_err(2, "missing column header".into()))?;
        let _ = n2;

        let mut buckets: [(Vec<f64>, Vec<u8>); 3] = Default::default();
        for (n, line) in lines {
            let line = line?;
            if line.is_empty() {
                continue;
            }
            let mut cells = line.split(',');
            let which = match cells.next() {
                Some("labeled") => 0,
                Some("unlabeled") => 1,
                Some("test") => 2,
                other => return Err(parse_err(n, format!("unknown split {other:?}"))),
            };
            let cells: Vec<&str> = cells.collect();
            if cells.len() != d + c {
                return Err(parse_err(
                    n,
                    format!("expected {} columns, found {}", d + c, cells.len()),
                ));
            }
            for cell in &cells[..d] {
                buckets[which]
                    .0
                    .push(cell.parse().map_err(|e| parse_err(n, format!("{e}")))?);
            }
            for cell in &cells[d..] {
                buckets[which].1.push(match *cell {
                    "0" => 0,
                    "1" => 1,
                    other => return Err(parse_err(n, format!("label {other:?} is not binary"))),
                });
            }
        }
        let [l, u, t] = buckets.map(|(x, y)| {
            let rows = y.len() / c.max(1);
            Split {
                features: Array2::from_shape_vec((rows, d), x).expect("row widths checked"),
                labels: Array2::from_shape_vec((rows, c), y).expect("row widths checked"),
            }
        });
        Ok(Self {
            labeled: l,
            unlabeled: u,
            test: t,
            class_priors: priors,
        })
    }
}

/// Sample labels independently per class, then features as the sum of the
/// active classes' prototypes plus isotropic Gaussian noise. The first
/// `label_fraction` of the (i.i.d.) train pool becomes the labeled split.
pub fn generate_dataset(seed: u64, spec: &DatasetSpec) -> Result<SyntheticDataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let priors = spec.class_priors();
    let (c, d) = (spec.classes, spec.features);

    let mut prototypes = Array2::<f64>::zeros((c, d));
    for mut row in prototypes.rows_mut() {
        row.iter_mut().for_each(|v| *v = rng.sample(StandardNormal));
        let norm = row.dot(&row).sqrt().max(f64::MIN_POSITIVE);
        row.mapv_inplace(|v| v * spec.prototype_scale / norm);
    }

    let total = spec.samples + spec.test_samples;
    let mut labels = Array2::<u8>::zeros((total, c));
    let mut features = Array2::<f64>::zeros((total, d));
    for i in 0..total {
        for (j, &p) in priors.iter().enumerate() {
            labels[[i, j]] = u8::from(rng.random::<f64>() < p);
        }
        let mut x = features.row_mut(i);
        x.iter_mut()
            .for_each(|v| *v = spec.noise_scale * rng.sample::<f64, _>(StandardNormal));
        for j in 0..c {
            if labels[[i, j]] == 1 {
                x += &prototypes.row(j);
            }
        }
    }

    let all = Split { features, labels };
    let labeled = spec.labeled_count();
    let range = |a: usize, b: usize| (a..b).collect::<Vec<_>>();
    Ok(SyntheticDataset {
        labeled: all.select(&range(0, labeled)),
        unlabeled: all.select(&range(labeled, spec.samples)),
        test: all.select(&range(spec.samples, total)),
        class_priors: priors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DatasetSpec {
        DatasetSpec {
            samples: 200,
            test_samples: 50,
            classes: 4,
            features: 6,
            ..DatasetSpec::default()
        }
    }

    #[test]
    fn balanced_priors_are_equal() {
        let spec = DatasetSpec {
            classes: 2,
            imbalance_ratio: 1.0,
            ..DatasetSpec::default()
        };
        let p = spec.class_priors();
        assert_eq!(p[0], p[1]);
    }

    #[test]
    fn voc_like_ratio() {
        let spec = DatasetSpec {
            classes: 20,
            imbalance_ratio: 20.9,
            ..DatasetSpec::default()
        };
        let ds = generate_dataset(
            1,
            &DatasetSpec {
                samples: 300,
                test_samples: 10,
                ..spec
            },
        )
        .unwrap();
        assert!((ds.imbalance_ratio() - 20.9).abs() < 1e-9);
    }

    #[test]
    fn split_sizes() {
        let ds = generate_dataset(3, &DatasetSpec::default()).unwrap();
        assert_eq!(ds.labeled.len(), 500);
        assert_eq!(ds.unlabeled.len(), 4500);
        assert_eq!(ds.test.len(), 2000);
    }

    #[test]
    fn same_seed_same_bytes() {
        let a = generate_dataset(9, &small()).unwrap();
        let b = generate_dataset(9, &small()).unwrap();
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        a.write_to(&mut ba).unwrap();
        b.write_to(&mut bb).unwrap();
        assert_eq!(ba, bb);
        let c = generate_dataset(10, &small()).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_specs() {
        for bad in [
            DatasetSpec {
                max_prior: 1.5,
                ..small()
            },
            DatasetSpec {
                label_fraction: 1.0,
                ..small()
            },
            DatasetSpec {
                label_fraction: 0.0,
                ..small()
            },
            DatasetSpec {
                classes: 0,
                ..small()
            },
            DatasetSpec {
                imbalance_ratio: 0.5,
                ..small()
            },
        ] {
            assert!(matches!(
                generate_dataset(0, &bad),
                Err(Error::InvalidArgument(_))
            ));
        }
    }

    #[test]
    fn dump_round_trip_is_exact() {
        let ds = generate_dataset(5, &small()).unwrap();
        let mut buf = Vec::new();
        ds.write_to(&mut buf).unwrap();
        let back = SyntheticDataset::read_from(buf.as_slice()).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn dump_rejects_garbage() {
        assert!(SyntheticDataset::read_from("hello\n".as_bytes()).is_err());
        let text =
            "#percentmatch-dataset,features=1,classes=1\n#priors,0.5\nsplit,x0,y0\nlabeled,0.5,2\n";
        assert!(matches!(
            SyntheticDataset::read_from(text.as_bytes()),
            Err(Error::Parse { line: 4, .. })
        ));
    }
}
