//! Runs the three methods across seeds on the default config and prints
//! final mAP / AUC, the mean gap trend and the gap-AUC rank correlation.
//!
//! Config overrides come as `key=value` arguments, e.g.
//! `cargo run --release --example sweep -- noise_scale=1.5 iterations=4000`.

use percentmatch_core::experiment::{read_trace, run_experiment};
use percentmatch_core::{ExperimentConfig, Method};

fn main() {
    let mut overrides = String::new();
    let mut seeds = 5u64;
    let mut first = 0u64;
    for arg in std::env::args().skip(1) {
        if let Some(n) = arg.strip_prefix("seeds=") {
            seeds = n.parse().expect("seeds");
            continue;
        }
        if let Some(n) = arg.strip_prefix("first_seed=") {
            first = n.parse().expect("first_seed");
            continue;
        }
        let (k, v) = arg.split_once('=').expect("key=value");
        let quoted = if v.parse::<f64>().is_ok() || v == "true" || v == "false" {
            v.to_string()
        } else {
            format!("\"{v}\"")
        };
        overrides += &format!("{k} = {quoted}\n");
    }
    let base = ExperimentConfig::from_toml_str(&overrides).expect("config");
    for seed in first..first + seeds {
        let mut line = format!("seed {seed}:");
        for method in [
            Method::Percentmatch,
            Method::FixmatchFixed,
            Method::SupervisedOnly,
        ] {
            let cfg = ExperimentConfig {
                seed,
                method,
                ..base.clone()
            };
            let mut buf = Vec::new();
            let out = run_experiment(&cfg, &mut buf).expect("run");
            let trace = read_trace(buf.as_slice()).unwrap();
            let gap_mean = |g: &[f64]| g.iter().sum::<f64>() / g.len() as f64;
            let warm = trace
                .record_at(cfg.warmup_iters)
                .map(|r| gap_mean(&r.gap))
                .unwrap_or(f64::NAN);
            let last = gap_mean(&trace.last_record().gap);
            let q = out.report.pseudo_labels.as_ref().unwrap();
            let prec: Vec<f64> = q.iter().filter_map(|c| c.positive.precision).collect();
            let sel: usize = q.iter().map(|c| c.positive.selected).sum();
            let pp = prec.iter().sum::<f64>() / prec.len().max(1) as f64;
            if method == Method::Percentmatch {
                let auc: Vec<f64> = out.report.auc.iter().map(|a| a.unwrap_or(0.5)).collect();
                line += &format!(" rho={:.3}", spearman(&trace.last_record().gap, &auc));
            }
            line += &format!(
                "  {} map={:.4} auc={:.4} prec+={pp:.3} n+={sel} gap {:.3}->{:.3}",
                method.as_str(),
                out.report.map.unwrap(),
                out.report.macro_auc.unwrap(),
                warm,
                last
            );
        }
        println!("{line}");
    }
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut r = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i + 1;
        while j < idx.len() && v[idx[j]] == v[idx[i]] {
            j += 1;
        }
        for k in i..j {
            r[idx[k]] = (i + j + 1) as f64 / 2.0;
        }
        i = j;
    }
    r
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let n = ra.len() as f64;
    let (ma, mb) = (ra.iter().sum::<f64>() / n, rb.iter().sum::<f64>() / n);
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = ra.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = rb.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}
