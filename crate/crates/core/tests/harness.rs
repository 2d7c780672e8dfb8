use std::fs;

use metasurrogate::harness::{
    algorithm_runs, build_surrogate, evaluate_surrogate, generate_dataset, performance_table, read_runs,
    run_optimization, uncertainty_study, Dataset, DatasetOptions, ExperimentConfig, Split, SurrogateSpec, CRITERIA,
};
use metasurrogate::metrics::Verdict;
use metasurrogate::optimizer::MatdeConfig;
use metasurrogate::problems::{make_mcf_suite, McfSuite, TaskSpec};
use metasurrogate::prompt::{parse_fitness, PromptTemplate};
use metasurrogate::sne::{encode_scalar, encode_vector, CodecConfig};
use metasurrogate::surrogate::{ExactSurrogate, MeanSurrogate, Noise};
use metasurrogate::token::Vocabulary;

fn opts(seed: u64) -> DatasetOptions {
    DatasetOptions {
        suite: "mcf1".into(),
        samples_per_task: 500,
        train_ratio: (5, 3),
        gamma: 15,
        template: PromptTemplate::Small,
        seed,
    }
}

fn mcf1(seed: u64) -> Dataset {
    generate_dataset(&make_mcf_suite(McfSuite::Mcf1), &opts(seed)).unwrap()
}

#[test]
fn dataset_shape_and_records() {
    let ds = mcf1(3);
    assert_eq!(ds.records.len(), 12_000);
    assert_eq!(ds.manifest.n_train, 7500);
    assert_eq!(ds.manifest.n_test, 4500);
    assert!(ds.manifest.encode_failures.is_empty());
    let cfg = CodecConfig::default();
    for r in &ds.records {
        let parsed: f64 = parse_fitness(&r.y_text).unwrap();
        let rounded: f64 = encode_scalar(r.y, &cfg).unwrap().decode();
        assert_eq!(parsed, rounded);
        assert_eq!(r.x_text, encode_vector(&r.x, &cfg).unwrap());
    }
    for t in 0..24 {
        let (tr, _) = ds.task_split(t, Split::Train);
        let (te, _) = ds.task_split(t, Split::Test);
        assert_eq!(tr.len() + te.len(), 500);
        assert!((312..=313).contains(&tr.len()));
    }
}

#[test]
fn dataset_bytes_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    mcf1(11).write(&a).unwrap();
    mcf1(11).write(&b).unwrap();
    for f in ["dataset.jsonl", "manifest.json"] {
        assert_eq!(fs::read(a.join(f)).unwrap(), fs::read(b.join(f)).unwrap(), "{f}");
    }
    let back = Dataset::read(&a).unwrap();
    assert_eq!(back.records, mcf1(11).records);
    assert_ne!(mcf1(12).to_jsonl(), back.to_jsonl());
    for line in back.to_jsonl().lines().take(50) {
        assert!(serde_json::from_str::<serde_json::Value>(line).unwrap().is_object());
    }
}

#[test]
fn surrogate_eval_tables() {
    let ds = mcf1(0);
    let tasks = ds.tasks().unwrap();

    let exact = evaluate_surrogate(&ds, &ExactSurrogate::new(&tasks)).unwrap();
    let csv = exact.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 1 + 24 + 1);
    assert!(lines[25].starts_with("macro,"));
    assert!(exact.rows.iter().all(|r| r.smae == Some(0.0) && r.r2 == Some(1.0)));

    let mut mean = MeanSurrogate::default();
    for (t, task) in tasks.iter().enumerate() {
        mean.insert(task.metadata.clone(), &ds.task_split(t, Split::Train).1);
    }
    let report = evaluate_surrogate(&ds, &mean).unwrap();
    let mut all = Vec::new();
    for (t, r) in report.rows.iter().enumerate() {
        let r2 = r.r2.unwrap();
        // A constant predictor loses exactly the squared mean gap.
        let (_, tr) = ds.task_split(t, Split::Train);
        let (_, te) = ds.task_split(t, Split::Test);
        let m = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        let mte = m(&te);
        let var = te.iter().map(|y| (y - mte).powi(2)).sum::<f64>() / te.len() as f64;
        let want = -(m(&tr) - mte).powi(2) / var;
        assert!(
            (r2 - want).abs() <= 1e-9 * want.abs().max(1e-6),
            "{} {r2} {want}",
            r.function_name
        );
        all.push(r2);
    }
    all.sort_by(f64::total_cmp);
    assert!(all[12] > -0.05, "{all:?}");

    let cfg = ExperimentConfig {
        surrogate: SurrogateSpec::Mock { noise: Noise::None },
        ..Default::default()
    };
    let mock = build_surrogate(&cfg, &tasks, Some(&ds)).unwrap();
    let report = evaluate_surrogate(&ds, mock.as_ref()).unwrap();
    for r in &report.rows {
        assert!(r.smae.unwrap() <= 1e-13, "{} {:?}", r.function_name, r.smae);
    }
}

#[test]
fn uncertainty_study_degenerate_and_structure() {
    let ds = mcf1(0);
    let tasks = ds.tasks().unwrap();
    let vocab = Vocabulary::for_codec(&CodecConfig::default());
    let cfg = ExperimentConfig {
        surrogate: SurrogateSpec::Mock { noise: Noise::None },
        return_probs: true,
        ..Default::default()
    };
    let mock = build_surrogate(&cfg, &tasks, Some(&ds)).unwrap();
    let study = uncertainty_study(&ds, mock.as_ref(), &vocab, Some(300), 0).unwrap();
    assert_eq!(study.rows.len(), 5);
    for name in CRITERIA {
        let row = study.row(name).unwrap();
        assert!(row.spearman.is_none(), "{name}");
        assert!(row.note.as_deref().unwrap().starts_with("undefined"), "{name}");
    }
    let md = study.to_markdown();
    assert!(md.contains("undefined"));

    let exact = ExactSurrogate::new(&tasks);
    assert!(uncertainty_study(&ds, &exact, &vocab, Some(10), 0).is_err());
}

fn small_suite() -> Vec<TaskSpec> {
    ["Sphere", "Rastrigin", "Ellipsoidal", "Attractive_Sector"]
        .iter()
        .map(|n| TaskSpec::bbob(n, 0, 3).unwrap())
        .collect()
}

#[test]
fn runs_persist_and_budget_matches() {
    let tasks = small_suite();
    let dir = tempfile::tempdir().unwrap();
    let cfg = MatdeConfig {
        pop_size: 10,
        generations: 15,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..20).collect();
    let runs = run_optimization(&tasks, &ExactSurrogate::new(&tasks), &cfg, &seeds, Some(dir.path())).unwrap();
    assert_eq!(runs.len(), 20);
    let traces = fs::read_dir(dir.path().join("traces")).unwrap().count();
    assert_eq!(traces, 20);
    let results = fs::read_to_string(dir.path().join("results.csv")).unwrap();
    assert_eq!(results.lines().count(), 1 + 20 * tasks.len());
    assert_eq!(read_runs(dir.path()).unwrap(), runs);

    let trace = fs::read_to_string(dir.path().join("traces/trace_seed7.csv")).unwrap();
    for t in 0..tasks.len() {
        let last = trace
            .lines()
            .skip(1)
            .filter(|l| l.starts_with(&format!("{t},")))
            .last()
            .unwrap();
        let calls: usize = last.rsplit(',').next().unwrap().parse().unwrap();
        assert_eq!(calls, cfg.generations * cfg.pop_size);
    }
}

#[test]
fn exact_and_noiseless_mock_are_indistinguishable() {
    let tasks = small_suite();
    let cfg = MatdeConfig {
        pop_size: 12,
        generations: 20,
        ..Default::default()
    };
    let seeds: Vec<u64> = (0..20).collect();
    let exact = run_optimization(&tasks, &ExactSurrogate::new(&tasks), &cfg, &seeds, None).unwrap();
    let mock_cfg = ExperimentConfig {
        surrogate: SurrogateSpec::Mock { noise: Noise::None },
        ..Default::default()
    };
    let mock = build_surrogate(&mock_cfg, &tasks, None).unwrap();
    let mocked = run_optimization(&tasks, mock.as_ref(), &cfg, &seeds, None).unwrap();
    let names: Vec<String> = tasks.iter().map(|t| t.metadata.function_name.clone()).collect();
    let table = performance_table(
        &names,
        &[algorithm_runs("exact", &exact), algorithm_runs("mock", &mocked)],
        0,
        0.05,
    )
    .unwrap();
    for row in &table.cells {
        assert_eq!(row[1].verdict, Some(Verdict::Similar));
    }
    assert_eq!(table.tallies[1], (0, tasks.len(), 0));
    let md = table.to_markdown();
    assert_eq!(md.matches("**").count(), 2 * tasks.len());
}
