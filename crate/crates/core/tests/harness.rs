use hct_core::harness::{self, emit, Experiment, ExperimentConfig, GeneratorKind, InputSource};
use hct_core::HctError;

fn small(e: Experiment) -> ExperimentConfig {
    let mut c = ExperimentConfig::new(e);
    c.grid.levels = 4;
    c
}

#[test]
fn config_parses_from_json() {
    let c: ExperimentConfig = serde_json::from_str(
        r#"{"experiment": "goodlambda-riesz", "grid": {"dim": 2, "levels": 4},
            "params": {"pairs": [[1, 1.5]], "epsilon": [0.5, 0.25], "A": [8]},
            "inputs": [{"generator": {"kind": "plane-measure"}, "count": 2, "seed": 9},
                       {"file": "mu.txt", "format": "measure"}],
            "tolerances": {"confidence": 0.9}, "policy": "all-pairwise-midpoints"}"#,
    )
    .unwrap();
    assert_eq!(c.experiment, Experiment::GoodlambdaRiesz);
    assert_eq!(c.params.a, vec![8.0]);
    assert_eq!(c.tolerances.confidence, 0.9);
    assert_eq!(c.tolerances.stability, 0.25);
    assert!(matches!(c.inputs[0], InputSource::Generator { count: 2, seed: 9, .. }));
    assert!(matches!(c.inputs[1], InputSource::File { .. }));
    let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
    assert_eq!(back, c);
}

#[test]
fn config_rejects_unknown_fields() {
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "weak11", "params": {"gamma": [1]}}"#).is_err());
    assert!(serde_json::from_str::<ExperimentConfig>(r#"{"experiment": "weak12"}"#).is_err());
    assert!(matches!("weak12".parse::<Experiment>(), Err(HctError::UnknownExperiment(_))));
    for e in Experiment::ALL {
        assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
    }
}

#[test]
fn runs_are_deterministic_and_thread_independent() {
    let c = small(Experiment::FeffermanStein).with_seed(3);
    let (a, b) = (harness::run(&c).unwrap(), harness::run_with_jobs(&c, 1).unwrap());
    assert_eq!(a.cases, b.cases);
    assert_eq!(a.verdicts, b.verdicts);
    assert_eq!(emit::to_csv(&a), emit::to_csv(&b));
}

#[test]
fn every_experiment_runs_on_a_small_grid() {
    for e in Experiment::ALL {
        let mut c = small(e);
        if e == Experiment::Embedding {
            c.inputs = vec![InputSource::Generator { generator: GeneratorKind::RandomStep { levels: 4, depth: None }, count: 5, seed: 0 }];
        }
        let report = harness::run(&c).unwrap();
        assert!(!report.cases.is_empty(), "{e}");
        assert!(report.verdicts.iter().any(|v| v.asserted), "{e}");
        assert!(!report.config.inputs.is_empty(), "{e}: effective inputs recorded");
        for v in report.verdicts.iter().filter(|v| v.asserted && v.passed) {
            assert!(!v.detail.is_empty());
        }
    }
}

#[test]
fn hypothesis_violations_are_skipped_with_a_reason() {
    let mut c = small(Experiment::BmoMorrey);
    c.params.pairs = vec![(1.0, 0.75), (1.0, 1.5)];
    let report = harness::run(&c).unwrap();
    let skipped: Vec<_> = report.cases.iter().filter(|c| c.skipped.is_some()).collect();
    assert_eq!(skipped.len(), 9);
    assert!(skipped.iter().all(|c| c.skipped.as_deref().unwrap().contains("hypothesis violated")));
    assert!(report.passed());
}

#[test]
fn file_inputs_are_loaded() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("step.csv");
    std::fs::write(&path, "2 3 1\n".to_string() + &["1,1,2,2,3,3,0,0"; 8].join("\n")).unwrap();
    let mut c = ExperimentConfig::new(Experiment::Weak11);
    c.grid.levels = 3;
    c.inputs = vec![InputSource::File { file: path, format: harness::FileKind::Function }];
    let report = harness::run(&c).unwrap();
    assert!(report.cases.iter().all(|c| c.id.starts_with("0-step")));
    assert!(report.passed());
}
