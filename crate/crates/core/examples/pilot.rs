//! Pilot: timing and directional behavior of the default desk-scale setup.

use owattr_core::skewlab::lemma41_experiment;
use owattr_core::synthdata::{generate, SynthConfig};
use owattr_core::trainer::{run, Method, TrainConfig};
use std::time::Instant;

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "all".into());
    let data_cfg = SynthConfig::default();

    if which == "all" || which == "run" {
        let dataset = generate(&data_cfg).unwrap();
        for method in [Method::Cal, Method::GumbelBaseline, Method::FixmatchBaseline] {
            let t = Instant::now();
            let config = TrainConfig {
                method,
                seed: 0,
                know_k_u: true,
                ..TrainConfig::default()
            };
            let summary = run(&config, &dataset, None).unwrap();
            let report = summary.final_report().unwrap();
            println!(
                "{method}: {:.1}s  all_acc={:.3} novel_acc={:.3} known_acc={:.3} delta={:?} lowconf={:.3}",
                t.elapsed().as_secs_f64(),
                report.all_acc,
                report.novel_acc,
                report.known_acc,
                report.skew_delta,
                report.lowconf_noise
            );
            // Per-epoch skew for the gumbel baseline (criterion 5 shape).
            if method == Method::GumbelBaseline {
                let deltas: Vec<String> = summary
                    .metrics
                    .iter()
                    .map(|(e, r)| format!("{e}:{:.3}", r.skew_delta.unwrap_or(f64::NAN)))
                    .collect();
                println!("  gumbel skew_delta per epoch: {}", deltas.join(" "));
            }
        }
    }

    if which == "all" || which == "dpp" {
        let dataset = generate(&data_cfg).unwrap();
        let t = Instant::now();
        let config = TrainConfig {
            method: Method::Cal,
            know_k_u: false,
            seed: 0,
            ..TrainConfig::default()
        };
        let summary = run(&config, &dataset, None).unwrap();
        let est: Vec<String> = summary
            .estimates
            .iter()
            .map(|r| format!("{}:{}", r.epoch, r.estimated_k))
            .collect();
        println!("dpp ({:.1}s) estimates: {}", t.elapsed().as_secs_f64(), est.join(" "));
        println!(
            "dpp final report: all_acc={:.3} novel_acc={:.3}",
            summary.final_report().unwrap().all_acc,
            summary.final_report().unwrap().novel_acc
        );
    }

    if which == "all" || which == "lemma" {
        let t = Instant::now();
        let rows = lemma41_experiment(
            &data_cfg,
            &TrainConfig::default(),
            &[0, 1, 2, 3, 4],
            3,
            &[0.3, 0.5, 0.7],
        )
        .unwrap();
        println!("lemma41 ({:.1}s):", t.elapsed().as_secs_f64());
        for row in rows {
            println!(
                "  eps={} epoch={} counts={:?} median={} bound={}",
                row.epsilon, row.epoch, row.counts, row.median, row.bound
            );
        }
    }
}
