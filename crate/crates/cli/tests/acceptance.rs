//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
//! criterion fails.

#[path = "../../core/tests/support/oracle.rs"]
mod oracle;

use std::collections::BTreeMap;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use lexaudit_core::dataset::{
    generate_fixture, CaseDocument, Corpus, CounterfactualVariant, EffectKind, FixtureOptions,
    LabelDefinition, LabelKind, PlantedEffect, StubPredictor, StubPredictorConfig,
};
use lexaudit_core::metrics::{
    bias_analysis, imbalance_analysis, inconsistency, AnalysisOptions, WeightMode,
};
use lexaudit_core::predictions::{PredictionRecord, PredictionSet};
use lexaudit_core::stats::{binomial_tail, fe_regress, RegressionFrame};
use lexaudit_gateway::stub::{StubReply, StubServer};
use lexaudit_gateway::{run_generation_with_key, GenerationOptions, ModelConfig};
use nalgebra::{DMatrix, DVector};
use num::{BigRational, ToPrimitive};

struct Outcome {
    pass: bool,
    detail: String,
}

fn check(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn threads() -> usize {
    std::thread::available_parallelism().map_or(4, |n| n.get())
}

/// Run `f(rep)` for `reps` replications across threads, in rep order.
fn replicate<T: Send>(reps: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let workers = threads().min(reps).max(1);
    let mut slots: Vec<Option<T>> = (0..reps).map(|_| None).collect();
    std::thread::scope(|scope| {
        let f = &f;
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                scope.spawn(move || {
                    (w..reps)
                        .step_by(workers)
                        .map(|rep| (rep, f(rep)))
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        for h in handles {
            for (rep, value) in h.join().expect("worker panicked") {
                slots[rep] = Some(value);
            }
        }
    });
    slots.into_iter().map(|s| s.expect("every rep ran")).collect()
}

fn binary_labels(n: usize) -> Vec<LabelDefinition> {
    (1..=n)
        .map(|i| LabelDefinition {
            label_id: format!("L{i:02}"),
            kind: LabelKind::Binary,
            values: vec!["a".into(), "b".into()],
            reference_value: "a".into(),
            description: String::new(),
        })
        .collect()
}

fn stub_run(
    seed: u64,
    n_docs: usize,
    labels: &[LabelDefinition],
    effects: &[PlantedEffect],
) -> (Corpus, PredictionSet) {
    let fixture = generate_fixture(seed, n_docs, labels, effects, &FixtureOptions::default())
        .expect("fixture");
    let config = StubPredictorConfig {
        model_name: "stub".into(),
        seed: seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(1),
        round: false,
        ..Default::default()
    };
    let records = StubPredictor::new(config, &fixture.corpus, effects)
        .expect("stub")
        .predict(&fixture.corpus);
    let set = PredictionSet::from_records(&records, &fixture.corpus).expect("valid records");
    (fixture.corpus, set)
}

fn fwl_oracle() -> Outcome {
    let started = Instant::now();
    let mut compared = 0;
    let mut skipped = 0;
    let mut worst: f64 = 0.0;
    let mut seed = 1000;
    while compared < 100 {
        seed += 1;
        let f = oracle::random_frame(seed, 50, 4);
        let dummy = oracle::dummy_ols(&f.y, &f.x, &f.groups, f.n_cols);
        if !dummy.full_rank {
            skipped += 1;
            continue;
        }
        let n = f.y.len();
        let frame = RegressionFrame::new(
            DVector::from_vec(f.y.clone()),
            DMatrix::from_fn(n, f.n_cols, |r, c| f.x[r][c]),
            f.groups.clone(),
            (0..f.n_cols).map(|c| format!("v{c}")).collect(),
        )
        .unwrap();
        let fit = fe_regress(&frame).expect("full-rank fixture fits");
        assert_eq!(fit.used_rows, dummy.rows);
        for c in 0..f.n_cols {
            worst = worst
                .max((fit.coefficients[c].unwrap() - dummy.coefficients[c]).abs())
                .max((fit.std_errors[c].unwrap() - dummy.std_errors[c]).abs());
        }
        for (a, b) in fit.residuals.iter().zip(&dummy.residuals) {
            worst = worst.max((a - b).abs());
        }
        compared += 1;
    }
    let secs = started.elapsed().as_secs_f64();
    check(
        worst < 1e-8 && secs < 30.0,
        format!(
            "{compared} fixtures ({skipped} rank-deficient skipped), max |diff| {worst:.2e} (< 1e-8), {secs:.2} s (< 30 s)"
        ),
    )
}

fn binomial_oracle() -> Outcome {
    let started = Instant::now();
    let mut worst: f64 = 0.0;
    let mut cells = 0;
    let mut impl_time = Duration::ZERO;
    for &tau in &[0.01, 0.05, 0.1] {
        for n in 1..=100u64 {
            for k in 0..=n {
                let t = Instant::now();
                let got = binomial_tail(n, k, tau).unwrap();
                impl_time += t.elapsed();
                let want = oracle::exact_binomial_tail(n, k, tau);
                let rel = if want == 0.0 { got.abs() } else { (got - want).abs() / want };
                worst = worst.max(rel);
                cells += 1;
            }
        }
    }
    let headline = binomial_tail(65, 27, 0.05).unwrap();
    let secs = started.elapsed().as_secs_f64();
    check(
        worst < 1e-12 && headline < 1e-10 && secs < 10.0,
        format!(
            "{cells} cells, max rel err {worst:.2e} (< 1e-12); P(N=65,k>=27,0.05) = {headline:.3e} (< 1e-10); \
             {secs:.2} s total incl. oracle, {:.3} s in binomial_tail (< 10 s)",
            impl_time.as_secs_f64()
        ),
    )
}

fn null_calibration() -> Outcome {
    let started = Instant::now();
    let labels = binary_labels(10);
    let options = AnalysisOptions::default();
    let reps = replicate(500, |rep| {
        let (corpus, set) = stub_run(10_000 + rep as u64, 300, &labels, &[]);
        let bias = bias_analysis(&set, &corpus, "stub", &options).expect("bias");
        let imbalance = imbalance_analysis(&set, &corpus, "stub", &options).expect("imbalance");
        let flags: Vec<bool> = bias.findings.iter().map(|f| f.significant).collect();
        (
            flags,
            bias.bernoulli.p_value,
            imbalance.significant_count(),
            imbalance.bernoulli.n_trials,
        )
    });
    let mut per_label = vec![0usize; labels.len()];
    let mut tests = 0usize;
    let mut rejections = 0usize;
    let mut low_p = 0usize;
    let (mut imb_k, mut imb_n) = (0u64, 0u64);
    for (flags, p, ik, inn) in &reps {
        tests += flags.len();
        for (l, &f) in flags.iter().enumerate() {
            per_label[l] += usize::from(f);
            rejections += usize::from(f);
        }
        low_p += usize::from(*p < 0.05);
        imb_k += ik;
        imb_n += inn;
    }
    let rate = rejections as f64 / tests as f64;
    let frac = low_p as f64 / reps.len() as f64;
    let label_rates: Vec<String> = per_label
        .iter()
        .map(|&c| format!("{:.3}", c as f64 / reps.len() as f64))
        .collect();
    // Exact size of the count test under independent labels: P(K >= k*) for
    // the smallest k* whose tail falls below 0.05.
    let n_labels = labels.len() as u64;
    let k_star = (0..=n_labels)
        .find(|&k| binomial_tail(n_labels, k, 0.05).unwrap() < 0.05)
        .unwrap();
    let size = binomial_tail(n_labels, k_star, 0.05).unwrap();
    let secs = started.elapsed().as_secs_f64();
    check(
        (0.03..=0.07).contains(&rate) && (0.02..=0.08).contains(&frac) && secs < 300.0,
        format!(
            "rejection rate {rate:.4} over {tests} label tests (in [0.03, 0.07]); per-label [{}]; \
             Bernoulli p < 0.05 in {frac:.3} of {} reps (in [0.02, 0.08]; exact size with N={n_labels} is P(K>={k_star}) = {size:.4}); \
             imbalance rate {:.4}; {secs:.1} s (< 300 s)",
            label_rates.join(", "),
            reps.len(),
            imb_k as f64 / imb_n as f64,
        ),
    )
}

fn power() -> Outcome {
    let started = Instant::now();
    let labels = binary_labels(10);
    let options = AnalysisOptions::default();
    let bias_effect = [PlantedEffect {
        label_id: "L01".into(),
        kind: EffectKind::Bias,
        value: None,
        size: 0.3,
    }];
    let imbalance_effect = [PlantedEffect {
        label_id: "L01".into(),
        kind: EffectKind::Imbalance,
        value: None,
        size: 2.0,
    }];
    let flagged = |effects: &[PlantedEffect], imbalance: bool, base: u64| {
        replicate(200, |rep| {
            let (corpus, set) = stub_run(base + rep as u64, 300, &labels, effects);
            let result = if imbalance {
                imbalance_analysis(&set, &corpus, "stub", &options)
            } else {
                bias_analysis(&set, &corpus, "stub", &options)
            }
            .expect("analysis");
            result
                .findings
                .iter()
                .any(|f| f.label_id == "L01" && f.significant)
        })
        .into_iter()
        .filter(|&b| b)
        .count() as f64
            / 200.0
    };
    let bias_power = flagged(&bias_effect, false, 50_000);
    let imbalance_power = flagged(&imbalance_effect, true, 60_000);
    let secs = started.elapsed().as_secs_f64();
    check(
        bias_power >= 0.9 && imbalance_power >= 0.9 && secs < 300.0,
        format!(
            "bias e^0.3 flagged in {bias_power:.3} of 200 reps, error doubling flagged in {imbalance_power:.3} (>= 0.90 each); {secs:.1} s (< 300 s)"
        ),
    )
}

/// Documents d00..d(n-1); label `L`'s variants flip on the first `flips[L]`.
fn flip_fixture(n_docs: usize, flips: &[(&str, usize)]) -> (Corpus, PredictionSet) {
    let labels: Vec<LabelDefinition> = flips
        .iter()
        .map(|(id, _)| LabelDefinition {
            label_id: id.to_string(),
            kind: LabelKind::Binary,
            values: vec!["a".into(), "b".into()],
            reference_value: "a".into(),
            description: String::new(),
        })
        .collect();
    let mut docs = Vec::new();
    let mut variants = Vec::new();
    let mut records = Vec::new();
    let rec = |doc: &str, label: Option<&str>, m: f64| PredictionRecord {
        model_name: "m".into(),
        doc_id: doc.into(),
        label_id: label.map(str::to_string),
        variant_value: label.map(|_| "b".to_string()),
        predicted_months: Some(m),
        raw_response: String::new(),
        attempt_count: 1,
    };
    for i in 0..n_docs {
        let id = format!("d{i:03}");
        let values: BTreeMap<String, String> =
            flips.iter().map(|(l, _)| (l.to_string(), "a".to_string())).collect();
        docs.push(CaseDocument {
            doc_id: id.clone(),
            facts: format!("case {i}"),
            true_sentence_months: 12.0,
            label_values: values,
        });
        records.push(rec(&id, None, 12.0));
        for (label, count) in flips {
            variants.push(CounterfactualVariant {
                doc_id: id.clone(),
                label_id: label.to_string(),
                variant_value: "b".into(),
                facts: format!("case {i} {label}"),
            });
            records.push(rec(&id, Some(label), if i < *count { 15.0 } else { 12.0 }));
        }
    }
    let corpus = Corpus::new(labels, docs, variants).unwrap();
    let set = PredictionSet::from_records(&records, &corpus).unwrap();
    (corpus, set)
}

fn inconsistency_exactness() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    // Label L1 on 10 documents with 1 flip, L2 on 30 documents with 9 flips.
    let cases: [(&[(&str, usize)], usize); 2] = [(&[("L1", 1)], 10), (&[("L2", 9)], 30)];
    let mut rows = Vec::new();
    for (flips, n) in cases {
        let (corpus, set) = flip_fixture(n, flips);
        let r = inconsistency(&set, &corpus, "m", &AnalysisOptions::default()).unwrap();
        rows.extend(r.rows);
    }
    let combined = lexaudit_core::metrics::weighted_aggregate(&rows).unwrap();
    let exact = BigRational::new(1.into(), 4.into());
    pass &= combined == exact.to_f64().unwrap();
    notes.push(format!("w=(10,30), p=(0.1,0.3) -> {combined} (exact 1/4)"));

    // One corpus with uneven flips; compare every p_l and the aggregate to rationals.
    let flips = [("A", 3), ("B", 7), ("C", 0), ("D", 20)];
    let (corpus, set) = flip_fixture(20, &flips);
    for mode in [WeightMode::Comparisons, WeightMode::Documents] {
        let options = AnalysisOptions {
            weight_mode: mode,
            ..Default::default()
        };
        let r = inconsistency(&set, &corpus, "m", &options).unwrap();
        let mut num = BigRational::from_integer(0.into());
        let mut den = BigRational::from_integer(0.into());
        for (row, (_, k)) in r.rows.iter().zip(&flips) {
            let p = BigRational::new((*k as i64).into(), 20.into());
            pass &= row.p_l == p.to_f64();
            num += BigRational::from_integer(20.into()) * &p;
            den += BigRational::from_integer(20.into());
        }
        let want = (num / den).to_f64().unwrap();
        pass &= r.aggregate == Some(want);
        notes.push(format!("{mode:?}: aggregate {} vs exact {want}", r.aggregate.unwrap()));
    }
    check(pass, notes.join("; "))
}

fn tree_bytes(dir: &Path, names: &[&str]) -> Vec<Vec<u8>> {
    names
        .iter()
        .map(|n| fs::read(dir.join(n)).unwrap_or_default())
        .collect()
}

fn end_to_end() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_lexaudit");
    let tmp = tempfile::tempdir().unwrap();
    let files = ["summary.csv", "summary.json", "report.html", "findings.jsonl", "bundle.json"];
    let mut outputs = Vec::new();
    let mut codes = Vec::new();
    for run in ["first", "second"] {
        let fx = tmp.path().join(run).join("fixture");
        let out = tmp.path().join(run).join("report");
        let steps: [Vec<&str>; 3] = [
            vec!["fixture", "--out", fx.to_str().unwrap()],
            vec![
                "analyze",
                "--corpus",
                fx.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--timestamp",
                "2024-06-01T00:00:00Z",
            ],
            vec!["report", "--out", out.to_str().unwrap()],
        ];
        for args in steps {
            let status = Command::new(bin)
                .args(&args)
                .env_remove("SOURCE_DATE_EPOCH")
                .output()
                .unwrap()
                .status;
            codes.push(status.code().unwrap_or(-1));
        }
        outputs.push(tree_bytes(&out, &files));
    }
    let all_zero = codes.iter().all(|&c| c == 0);
    let present = outputs[0].iter().take(3).all(|b| !b.is_empty());
    let identical = outputs[0] == outputs[1];
    let summary = String::from_utf8_lossy(&outputs[0][0]).into_owned();
    let planted_flagged = summary
        .lines()
        .find(|l| l.starts_with("stub-planted,"))
        .and_then(|l| l.split(',').nth(2)?.parse::<u64>().ok())
        .is_some_and(|k| k >= 1);
    check(
        all_zero && present && identical && planted_flagged,
        format!(
            "exit codes {codes:?}; summary.csv/summary.json/report.html present: {present}; \
             byte-identical across runs: {identical}; planted model bias_count >= 1: {planted_flagged}"
        ),
    )
}

fn gateway_contract() -> Outcome {
    let runtime = tokio::runtime::Runtime::new().unwrap();
    runtime.block_on(async {
        let labels = binary_labels(1);
        let corpus = generate_fixture(3, 50, &labels, &[], &FixtureOptions::default())
            .unwrap()
            .corpus;
        let server = StubServer::start(Arc::new(|req| {
            let reply = if req.prompt.contains("Synthetic case doc-0033.") && req.prompt.contains("L01: b.") {
                StubReply::text("I cannot judge this case.")
            } else {
                StubReply::months(20)
            };
            reply.with_delay(Duration::from_millis(5))
        }))
        .await
        .unwrap();
        let mut config = ModelConfig::new(server.url.clone(), "stub-llm");
        config.max_concurrency = 4;
        let cache = tempfile::tempdir().unwrap();
        let options = GenerationOptions::new(cache.path());

        let first = run_generation_with_key(&corpus, &config, "k", &options).await.unwrap();
        let expected = corpus.documents().len() + corpus.variants().len();
        let high_water = server.high_water();
        let missing = first.records.iter().filter(|r| r.predicted_months.is_none()).count();

        server.reset_counters();
        let second = run_generation_with_key(&corpus, &config, "k", &options).await.unwrap();
        let warm_requests = server.requests();
        let same = serde_json::to_vec(&first.records).unwrap() == serde_json::to_vec(&second.records).unwrap();

        check(
            first.records.len() == expected
                && expected == 100
                && warm_requests == 0
                && same
                && high_water <= config.max_concurrency
                && missing == 1,
            format!(
                "records {} of {expected}; warm rerun requests {warm_requests}, identical records {same}; \
                 high-water {high_water} (<= {}); missing-markers {missing} of 1 poisoned",
                first.records.len(),
                config.max_concurrency
            ),
        )
    })
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 7] = [
        ("fwl_oracle", fwl_oracle),
        ("binomial_oracle", binomial_oracle),
        ("null_calibration", null_calibration),
        ("power", power),
        ("inconsistency_exactness", inconsistency_exactness),
        ("end_to_end_offline", end_to_end),
        ("gateway_contract", gateway_contract),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            check(false, format!("panicked: {msg}"))
        });
        if !outcome.pass {
            failed += 1;
        }
        println!("{} {name}: {}", if outcome.pass { "PASS" } else { "FAIL" }, outcome.detail);
    }
    println!("acceptance: {} passed, {failed} failed", 7 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
