use percentmatch_core::experiment::{read_trace, read_trace_file, run_experiment_to_path, Trace};
use percentmatch_core::toy::generate_dataset;
use percentmatch_core::{compare_runs, run_experiment, Error, ExperimentConfig, Method};

fn small(method: Method, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        method,
        samples: 600,
        test_samples: 300,
        classes: 6,
        features: 12,
        iterations: 400,
        eval_every: 100,
        ..ExperimentConfig::default()
    }
}

fn trace_of(cfg: &ExperimentConfig) -> Trace {
    let mut buf = Vec::new();
    run_experiment(cfg, &mut buf).unwrap();
    read_trace(buf.as_slice()).unwrap()
}

#[test]
fn fixmatch_thresholds_stay_fixed() {
    let trace = trace_of(&small(Method::FixmatchFixed, 1));
    for rec in &trace.records {
        assert!(rec.tau_plus.iter().all(|&t| t == 0.95));
        assert!(rec.tau_minus.iter().all(|&t| t == 0.0));
        assert!(rec.selected_negative.iter().all(|&n| n == 0));
    }
}

#[test]
fn supervised_only_total_is_supervised_term() {
    let trace = trace_of(&small(Method::SupervisedOnly, 2));
    for rec in &trace.records {
        assert!(rec.alpha.iter().all(|&a| a == 0.0));
        assert_eq!(rec.loss_total, rec.loss_supervised);
    }
}

#[test]
fn no_unlabeled_weight_during_warmup() {
    let cfg = small(Method::Percentmatch, 3);
    let trace = trace_of(&cfg);
    for rec in trace.records.iter().filter(|r| r.t < cfg.warmup_iters) {
        assert!(
            rec.alpha.iter().all(|&a| a == 0.0),
            "alpha nonzero at t={}",
            rec.t
        );
        assert_eq!(rec.loss_total, rec.loss_supervised);
    }
    assert_eq!(trace.records.len() as u64, cfg.iterations);
    let evals: Vec<u64> = trace
        .records
        .iter()
        .filter_map(|r| r.eval.as_ref())
        .map(|e| e.iteration)
        .collect();
    assert_eq!(evals, vec![99, 199, 299, 399]);
}

#[test]
fn scalar_alpha_is_uniform() {
    let cfg = ExperimentConfig {
        alpha_mode: percentmatch_core::experiment::AlphaMode::Scalar,
        ..small(Method::Percentmatch, 4)
    };
    let trace = trace_of(&cfg);
    for rec in &trace.records {
        assert!(rec.alpha.iter().all(|&a| a == rec.alpha[0]));
    }
}

#[test]
fn trace_file_round_trip_and_self_compare() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Method::Percentmatch, 5);
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let outcome = run_experiment_to_path(&cfg, &a).unwrap();
    run_experiment_to_path(&cfg, &b).unwrap();
    let ta = read_trace_file(&a).unwrap();
    let tb = read_trace_file(&b).unwrap();
    assert_eq!(ta.final_record.report, outcome.report);
    assert_eq!(ta.header.config, cfg);

    // a duplicate reference run on the same data compares at zero delta
    let cmp = compare_runs(&[ta, tb]).unwrap();
    assert_eq!(cmp.deltas.len(), 1);
    assert_eq!(cmp.deltas[0].map_delta, Some(0.0));
    assert_eq!(cmp.deltas[0].auc_delta, Some(0.0));
}

#[test]
fn compare_pairs_by_dataset_and_refuses_mismatch() {
    let pm = trace_of(&small(Method::Percentmatch, 6));
    let fm = trace_of(&small(Method::FixmatchFixed, 6));
    let fm_other = trace_of(&small(Method::FixmatchFixed, 7));

    let cmp = compare_runs(&[pm.clone(), fm.clone()]).unwrap();
    assert_eq!(cmp.reference, "percentmatch");
    let delta = cmp.deltas[0].map_delta.unwrap();
    let expected = fm.final_record.report.map.unwrap() - pm.final_record.report.map.unwrap();
    assert!((delta - expected).abs() < 1e-15);
    assert!(cmp.render().contains("fixmatch-fixed"));

    let err = compare_runs(&[pm.clone(), fm_other]).unwrap_err();
    assert!(matches!(err, Error::TraceMismatch(_)));
    assert!(compare_runs(&[pm]).is_err());
}

#[test]
fn data_file_input_matches_generated() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small(Method::Percentmatch, 8);
    let path = dir.path().join("data.csv");
    let data = generate_dataset(cfg.seed, &cfg.dataset_spec()).unwrap();
    data.write_to(std::fs::File::create(&path).unwrap())
        .unwrap();
    let from_file = ExperimentConfig {
        data_path: Some(path.display().to_string()),
        ..cfg.clone()
    };
    let a = trace_of(&cfg);
    let b = trace_of(&from_file);
    assert_eq!(a.final_record.report, b.final_record.report);
}

#[test]
fn fully_labeled_supervised_baseline_learns() {
    // every training sample labeled; the unlabeled split is kept only so the
    // loader accepts the file and is never used by this method
    let dir = tempfile::tempdir().unwrap();
    let base = ExperimentConfig {
        method: Method::SupervisedOnly,
        iterations: 4000,
        ..ExperimentConfig::default()
    };
    let mut data = generate_dataset(base.seed, &base.dataset_spec()).unwrap();
    let all: Vec<usize> = (0..data.unlabeled.len()).collect();
    let extra = data.unlabeled.select(&all);
    data.labeled
        .features
        .append(ndarray::Axis(0), extra.features.view())
        .unwrap();
    data.labeled
        .labels
        .append(ndarray::Axis(0), extra.labels.view())
        .unwrap();
    assert_eq!(data.labeled.len(), base.samples);
    let path = dir.path().join("full.csv");
    data.write_to(std::fs::File::create(&path).unwrap())
        .unwrap();
    let cfg = ExperimentConfig {
        data_path: Some(path.display().to_string()),
        ..base
    };
    let out = run_experiment(&cfg, std::io::sink()).unwrap();
    let map = out.report.map.unwrap();
    assert!(map > 0.9, "mAP {map}");
}

#[test]
fn invalid_config_is_rejected_before_training() {
    let cfg = ExperimentConfig {
        kappa_minus: 0.99,
        ..ExperimentConfig::default()
    };
    let mut buf = Vec::new();
    assert!(matches!(
        run_experiment(&cfg, &mut buf),
        Err(Error::Config(_))
    ));
    assert!(buf.is_empty());
}
