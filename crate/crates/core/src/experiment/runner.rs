use std::io::Write;
use std::path::Path;

use ndarray::Axis;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{AlphaMode, ExperimentConfig, Method};
use super::trace::{FinalRecord, TraceHeader, TraceLine, TraceRecord, TRACE_FORMAT};
use crate::error::{Error, Result};
use crate::histogram::ClassHistogram;
use crate::losses::{objective, supervised_loss, unlabeled_loss};
use crate::metrics::{pseudo_label_quality, EvalReport};
use crate::pseudo_label::select;
use crate::thresholds::ThresholdState;
use crate::toy::{
    augment, generate_dataset, Adam, Split, Strength, SyntheticDataset, ToyClassifier,
};

/// Training RNG stream, kept apart from the dataset stream of the same seed.
const TRAIN_STREAM: u64 = 1;

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: EvalReport,
    pub thresholds: ThresholdState,
    pub histograms: Vec<ClassHistogram>,
    pub model: ToyClassifier,
}

fn load_dataset(cfg: &ExperimentConfig) -> Result<SyntheticDataset> {
    match &cfg.data_path {
        Some(path) => {
            let file = std::fs::File::open(path)?;
            SyntheticDataset::read_from(std::io::BufReader::new(file))
        }
        None => generate_dataset(cfg.seed, &cfg.dataset_spec()),
    }
}

fn sample_rows<R: Rng>(split: &Split, count: usize, rng: &mut R) -> Split {
    let rows: Vec<usize> = (0..count)
        .map(|_| rng.random_range(0..split.len()))
        .collect();
    split.select(&rows)
}

fn evaluate(
    t: u64,
    model: &ToyClassifier,
    data: &SyntheticDataset,
    state: &ThresholdState,
) -> Result<EvalReport> {
    let scores = model.forward(data.test.features.view())?;
    let mut report = EvalReport::evaluate(t, scores.view(), data.test.labels.view())?;
    let unlabeled_scores = model.forward(data.unlabeled.features.view())?;
    let mask = select(unlabeled_scores.view(), &state.tau_plus, &state.tau_minus)?;
    report.pseudo_labels = Some(pseudo_label_quality(&mask, data.unlabeled.labels.view())?);
    Ok(report)
}

fn write_line(out: &mut impl Write, line: &TraceLine) -> Result<()> {
    serde_json::to_writer(&mut *out, line)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Run the full training loop, streaming one trace line per iteration.
///
/// Per iteration: score thresholds are refreshed from the histograms as
/// they stood after the previous iteration, class weights are derived from
/// the gaps, the weak unlabeled view is masked, and only then are the
/// histograms updated with this batch's weak scores.
pub fn run_experiment(cfg: &ExperimentConfig, mut out: impl Write) -> Result<RunOutcome> {
    cfg.validate()?;
    let data = load_dataset(cfg)?;
    if data.labeled.is_empty() || data.unlabeled.is_empty() || data.test.is_empty() {
        return Err(Error::Config("dataset has an empty split".into()));
    }
    let classes = data.classes();
    let schedule = cfg.schedule();
    let loss_cfg = cfg.loss_config();
    let policy = cfg.augmentation();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    rng.set_stream(TRAIN_STREAM);

    let mut model = if cfg.hidden == 0 {
        ToyClassifier::linear(data.features(), classes)
    } else {
        ToyClassifier::mlp(data.features(), cfg.hidden, classes, &mut rng)
    };
    let mut adam = Adam::new(model.params().len(), cfg.adam());
    let mut histograms = vec![ClassHistogram::new(cfg.bins, cfg.decay)?; classes];
    let mut state = match cfg.method {
        Method::FixmatchFixed => {
            ThresholdState::fixed(classes, cfg.fixed_tau_plus, cfg.fixed_tau_minus)?
        }
        _ => ThresholdState::from_labeled(
            cfg.kappa_plus,
            cfg.kappa_minus,
            data.labeled.labels.view(),
            cfg.clamp_kappa_minus,
        )?,
    };

    write_line(
        &mut out,
        &TraceLine::Header(TraceHeader {
            format: TRACE_FORMAT.to_string(),
            label: cfg.label(),
            fields: TraceRecord::FIELDS.iter().map(|s| s.to_string()).collect(),
            config: cfg.clone(),
            class_priors: data.class_priors.clone(),
        }),
    )?;

    let unlabeled_batch = cfg.unlabeled_batch();
    let mut last_report = None;
    for t in 0..cfg.iterations {
        if cfg.method != Method::FixmatchFixed {
            state.refresh(&histograms)?;
        }
        let mut alpha = match cfg.method {
            Method::SupervisedOnly => vec![0.0; classes],
            _ => state.class_weights(t, &schedule),
        };
        if cfg.alpha_mode == AlphaMode::Scalar {
            let mean = alpha.iter().sum::<f64>() / classes as f64;
            alpha.iter_mut().for_each(|a| *a = mean);
        }

        let lab = sample_rows(&data.labeled, cfg.batch_size, &mut rng);
        let unl = sample_rows(&data.unlabeled, unlabeled_batch, &mut rng);
        let lab_x = augment(lab.features.view(), &policy, Strength::Weak, &mut rng);
        let weak_x = augment(unl.features.view(), &policy, Strength::Weak, &mut rng);
        let strong_x = augment(unl.features.view(), &policy, Strength::Strong, &mut rng);

        let lab_fwd = model.forward_cached(lab_x.view())?;
        let weak_scores = model.forward(weak_x.view())?;
        let strong_fwd = model.forward_cached(strong_x.view())?;

        let mask = select(weak_scores.view(), &state.tau_plus, &state.tau_minus)?;
        for (c, h) in histograms.iter_mut().enumerate() {
            let column = weak_scores.index_axis(Axis(1), c);
            h.update(&column.to_vec())?;
        }

        let sup = supervised_loss(lab.labels.view(), lab_fwd.scores.view(), &loss_cfg)?;
        let unl_loss = unlabeled_loss(&mask, strong_fwd.scores.view(), &loss_cfg)?;
        let obj = objective(sup, unl_loss, &alpha)?;
        if !obj.total.is_finite() || !obj.unlabeled.is_finite() {
            return Err(Error::NonFiniteLoss {
                iteration: t,
                supervised: obj.supervised,
                unlabeled: obj.unlabeled,
            });
        }

        let mut grads = vec![0.0; model.params().len()];
        model.accumulate_backward(lab_x.view(), &lab_fwd, obj.grad_labeled.view(), &mut grads);
        if alpha.iter().any(|&a| a != 0.0) {
            model.accumulate_backward(
                strong_x.view(),
                &strong_fwd,
                obj.grad_strong.view(),
                &mut grads,
            );
        }
        let lr = cfg.learning_rate(t);
        adam.step_with_lr(model.params_mut(), &grads, lr);

        let eval = if (t + 1) % cfg.eval_every == 0 || t + 1 == cfg.iterations {
            let report = evaluate(t, &model, &data, &state)?;
            last_report = Some(report.clone());
            Some(report)
        } else {
            None
        };
        write_line(
            &mut out,
            &TraceLine::Iteration(TraceRecord {
                t,
                tau_plus: state.tau_plus.clone(),
                tau_minus: state.tau_minus.clone(),
                gap: state.gaps(),
                alpha,
                selected_positive: mask.positive_counts(),
                selected_negative: mask.negative_counts(),
                loss_supervised: obj.supervised,
                loss_unlabeled: obj.unlabeled,
                loss_total: obj.total,
                eval,
            }),
        )?;
    }

    let report = last_report.expect("final iteration always evaluates");
    write_line(
        &mut out,
        &TraceLine::Final(FinalRecord {
            report: report.clone(),
            thresholds: state.clone(),
            histograms: histograms.clone(),
        }),
    )?;
    out.flush()?;
    Ok(RunOutcome {
        report,
        thresholds: state,
        histograms,
        model,
    })
}

pub fn run_experiment_to_path(
    cfg: &ExperimentConfig,
    path: impl AsRef<Path>,
) -> Result<RunOutcome> {
    let file = std::fs::File::create(path)?;
    run_experiment(cfg, std::io::BufWriter::new(file))
}
