use std::fs;

use driftsurf::data::Label;
use driftsurf::harness::{parse_algorithms, run_experiment, write_outputs, DatasetConfig, ExperimentConfig, Source};
use driftsurf::runspec::RunSpec;

fn small_sine1(algos: &str, trials: usize) -> ExperimentConfig {
    let mut dataset = DatasetConfig::preset("sine1").unwrap();
    if let Source::Generator(spec) = &mut dataset.source {
        spec.total_steps = 40;
        spec.batch_size = 50;
        spec.schedule = driftsurf::streams::DriftSchedule::Abrupt(vec![20]);
    }
    dataset.drift_times = vec![20];
    let mut cfg = ExperimentConfig::new(dataset, parse_algorithms(algos).unwrap());
    cfg.trials = trials;
    cfg.seed = 11;
    cfg
}

#[test]
fn one_record_per_step_algorithm_and_trial() {
    let cfg = small_sine1("driftsurf,aware,mddm-g,aue,obl,1pass-sgd", 3);
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.records.len(), 40 * 6 * 3);
    assert_eq!(result.summary.len(), 6);
    for row in &result.summary {
        assert_eq!(row.trial_means.len(), 3);
        assert!((0.0..=1.0).contains(&row.mean_misclass_median));
    }
}

#[test]
fn runs_are_deterministic_and_seed_sensitive() {
    let cfg = small_sine1("driftsurf,aue", 2);
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed = 12;
    assert_ne!(a.records, run_experiment(&other).unwrap().records);
}

#[test]
fn first_step_predicts_before_training() {
    // Zero-initialized models score 0 and predict +1 on the first batch, so
    // its misclassification is the fraction of negative labels.
    let cfg = small_sine1("driftsurf,aware,mddm-g,aue,obl,1pass-sgd", 1);
    let stream = cfg.dataset.stream(cfg.trial_seed(0)).unwrap();
    let negatives =
        stream[0].labels().filter(|&l| l == Label::Neg).count() as f64 / stream[0].len() as f64;
    let result = run_experiment(&cfg).unwrap();
    for r in result.records.iter().filter(|r| r.time_step == 0) {
        assert_eq!(r.misclassification, negatives, "{}", r.algorithm);
    }
}

#[test]
fn gradient_counts_match_budget_every_step() {
    for rho in ["2m", "4m/per-alg"] {
        let mut cfg = small_sine1("driftsurf,aware,mddm-g,aue,obl", 2);
        cfg.rho = rho.parse().unwrap();
        let result = run_experiment(&cfg).unwrap();
        for r in &result.records {
            assert_eq!(r.gradients, r.budgeted, "{rho} {} t={}", r.algorithm, r.time_step);
        }
        for r in result.records.iter().filter(|r| r.algorithm == "driftsurf") {
            assert_eq!(r.models_trained, 2);
        }
    }
}

#[test]
fn per_algorithm_budget_divides_across_aue_experts() {
    let mut cfg = small_sine1("aue", 1);
    cfg.rho = "4m/per-alg".parse().unwrap();
    let result = run_experiment(&cfg).unwrap();
    let last = result.records.last().unwrap();
    assert_eq!(last.models_trained, 10);
    assert_eq!(last.budgeted, 10 * (4 * 50 / 10));
}

#[test]
fn outputs_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let result = run_experiment(&small_sine1("driftsurf,mddm-g", 2)).unwrap();
    write_outputs(dir.path(), &result).unwrap();
    let records = fs::read_to_string(dir.path().join("records.csv")).unwrap();
    assert!(records.starts_with("trial,time_step,algorithm,misclassification"));
    assert_eq!(records.lines().count(), 1 + 40 * 2 * 2);
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    let medians = fs::read_to_string(dir.path().join("step_medians.csv")).unwrap();
    assert_eq!(medians.lines().count(), 1 + 40 * 2);
    for line in fs::read_to_string(dir.path().join("transitions.log")).unwrap().lines() {
        let v: serde_json::Value = serde_json::from_str(line).unwrap();
        assert!(v.get("trigger").is_some() && v.get("time_step").is_some());
    }
}

#[test]
fn csv_dataset_replays_identically_across_trials() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("toy.csv");
    let mut text = String::from("a,color,label\n");
    for i in 0..400 {
        let a = (i * 37 % 100) as f64;
        let color = ["red", "blue"][i % 2];
        let label = if (a > 50.0) ^ (i >= 200) { "up" } else { "down" };
        text.push_str(&format!("{a},{color},{label}\n"));
    }
    fs::write(&path, text).unwrap();

    let mut spec = RunSpec::new(format!("csv:{}", path.display()));
    spec.algos = "driftsurf,aware,obl".into();
    spec.batch_size = Some(20);
    spec.mu = Some(1e-3);
    spec.eta = Some(0.1);
    spec.categorical = Some("color".into());
    spec.label_map = Some("up:+1,down:-1".into());
    spec.scale = true;
    spec.drift_times = Some("10".into());
    spec.trials = 3;
    let cfg = spec.to_config().unwrap();
    assert_eq!(cfg.dataset.name, "toy");
    let result = run_experiment(&cfg).unwrap();
    assert_eq!(result.records.len(), 20 * 3 * 3);
    // Same first batch in every trial: zero models all predict +1 on it.
    let first: Vec<f64> = result.records.iter().filter(|r| r.time_step == 0).map(|r| r.misclassification).collect();
    assert_eq!(first.len(), 9);
    assert!(first.iter().all(|&v| v == first[0]));
    let rec = result.records.iter().find(|r| r.algorithm == "aware" && r.time_step == 12).unwrap();
    assert_eq!(rec.segment_start, 10);
}
