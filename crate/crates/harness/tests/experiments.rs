use proptest::prelude::*;
use xmmd_core::{KernelSpec, SourceSpec};
use xmmd_harness::table::{read_raw_csv, write_raw_csv, write_roc_csv};
use xmmd_harness::{
    read_csv, run, run_bench, run_null_hist, run_power_curve, run_roc, write_sidecar, BlockSize,
    ExperimentKind, ExperimentSpec, KernelChoice, Metadata, ResultRow, ResultTable, TestId,
};

fn gmd(d: usize, j: usize, eps: f64) -> SourceSpec {
    SourceSpec::gaussian_shift(d, j, eps).unwrap()
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = format!("{}/../../schemas/{name}", env!("CARGO_MANIFEST_DIR"));
    let schema: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn assert_valid(validator: &jsonschema::Validator, value: &serde_json::Value) {
    let errors: Vec<String> = validator
        .iter_errors(value)
        .map(|e| e.to_string())
        .collect();
    assert!(errors.is_empty(), "{errors:?}\n{value}");
}

#[test]
fn null_hist_with_one_trial() {
    let spec = ExperimentSpec::new(
        ExperimentKind::NullHist,
        gmd(3, 1, 0.0),
        vec![(10, 10)],
        vec![TestId::Xmmd],
    )
    .trials(1)
    .seed(4);
    let (table, raw) = run_null_hist(&spec).unwrap();
    assert_eq!(raw.len(), 1);
    assert_eq!(raw[0].values.len(), 1);
    let v = raw[0].values[0];
    let want = xmmd_core::ks_distance(&xmmd_core::EmpiricalSample::new(&[v]).unwrap()).unwrap();
    let row = &table.rows()[0];
    assert!((row.ks_distance.unwrap() - want).abs() <= 1e-8 * want);
    assert_eq!((row.pos_inf, row.neg_inf), (Some(0), Some(0)));
}

#[test]
fn null_hist_is_deterministic_and_refuses_alternatives() {
    let spec = ExperimentSpec::new(
        ExperimentKind::NullHist,
        gmd(5, 1, 0.0),
        vec![(20, 20), (16, 24)],
        vec![TestId::Xmmd, TestId::MmdPerm { permutations: 20 }],
    )
    .trials(25)
    .seed(9);
    let (a, raw_a) = run_null_hist(&spec).unwrap();
    let (b, raw_b) = run_null_hist(&spec).unwrap();
    assert_eq!(raw_a, raw_b);
    assert_eq!(a, b);
    assert_eq!(a.rows().len(), 4);

    let mut alt = spec.clone();
    alt.source = gmd(5, 1, 0.2);
    let err = run_null_hist(&alt).unwrap_err().to_string();
    assert!(err.contains("source"), "{err}");
}

#[test]
fn raw_dumps_round_trip() {
    let spec = ExperimentSpec::new(
        ExperimentKind::NullHist,
        gmd(2, 1, 0.0),
        vec![(12, 12)],
        vec![TestId::Xmmd],
    )
    .trials(10);
    let (_, raw) = run_null_hist(&spec).unwrap();
    let mut buf = Vec::new();
    write_raw_csv(&mut buf, &raw[0].values).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert_eq!(text.lines().count(), 11);
    let back = read_raw_csv(buf.as_slice()).unwrap();
    for (a, b) in back.iter().zip(&raw[0].values) {
        assert!((a - b).abs() <= 5e-9 * b.abs());
    }
}

#[test]
fn strong_separation_gives_full_power() {
    let spec = ExperimentSpec::new(
        ExperimentKind::PowerCurve,
        gmd(1, 1, 5.0),
        vec![(50, 50), (60, 60)],
        vec![
            TestId::Xmmd,
            TestId::MmdPerm { permutations: 100 },
            TestId::Block(BlockSize::Sqrt),
            TestId::Linear,
        ],
    )
    .trials(100)
    .seed(2);
    let table = run_power_curve(&spec).unwrap();
    assert_eq!(table.rows().len(), 8);
    for row in table.rows() {
        assert!(row.reject_rate.unwrap() >= 0.99, "{row:?}");
        assert!(row.power_sd.unwrap() >= 0.0);
        assert_eq!(row.predicted_power.is_some(), row.test == "xmmd");
    }
}

#[test]
fn null_power_is_type_i_error() {
    let spec = ExperimentSpec::new(
        ExperimentKind::TypeIError,
        gmd(10, 1, 0.0),
        vec![(100, 100)],
        vec![TestId::Xmmd, TestId::Linear],
    )
    .trials(400)
    .seed(21);
    let table = run_power_curve(&spec).unwrap();
    for row in table.rows() {
        let rate = row.reject_rate.unwrap();
        assert!((0.02..=0.09).contains(&rate), "{} {rate}", row.test);
    }
}

#[test]
fn power_curve_cardinality_and_csv_round_trip() {
    let spec = ExperimentSpec::new(
        ExperimentKind::PowerCurve,
        gmd(4, 2, 0.8),
        vec![(20, 20), (30, 30)],
        vec![TestId::Xmmd, TestId::MmdPerm { permutations: 30 }],
    )
    .trials(30)
    .seed(5);
    let table = run_power_curve(&spec).unwrap();
    assert_eq!(table.rows().len(), 4);
    let text = table.to_csv_string().unwrap();
    assert_eq!(text.lines().count(), 5);
    let back = read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, table.rows());
}

#[test]
fn thread_count_does_not_change_results() {
    let base = ExperimentSpec::new(
        ExperimentKind::PowerCurve,
        SourceSpec::dirichlet(4, 0.5).unwrap(),
        vec![(24, 24)],
        vec![
            TestId::Xmmd,
            TestId::MmdPerm { permutations: 25 },
            TestId::Block(BlockSize::Fixed(6)),
        ],
    )
    .trials(40)
    .seed(13);
    let one = run_power_curve(&base.clone().threads(Some(1))).unwrap();
    let three = run_power_curve(&base.clone().threads(Some(3))).unwrap();
    let global = run_power_curve(&base).unwrap();
    assert_eq!(one, three);
    assert_eq!(one, global);
}

#[test]
fn roc_outputs() {
    let spec = ExperimentSpec::new(
        ExperimentKind::Roc,
        gmd(3, 1, 1.5),
        vec![(30, 30)],
        vec![
            TestId::Xmmd,
            TestId::MmdPerm { permutations: 1 },
            TestId::Linear,
        ],
    )
    .trials(60)
    .seed(8);
    let (table, curves) = run_roc(&spec).unwrap();
    assert_eq!(curves.len(), 3);
    for (row, curve) in table.rows().iter().zip(&curves) {
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
        assert!(curve
            .points
            .windows(2)
            .all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert!((row.auc.unwrap() - curve.auc).abs() <= 5e-9);
        assert!(curve.auc > 0.9);
    }
    let mut buf = Vec::new();
    write_roc_csv(&mut buf, &curves).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("test,n,m,fpr,tpr"));

    let mut null = spec.clone();
    null.source = gmd(3, 1, 0.0);
    assert!(run_roc(&null).is_err());
}

#[test]
fn bench_rows_carry_timing() {
    let spec = ExperimentSpec::new(
        ExperimentKind::Bench,
        gmd(5, 2, 0.5),
        vec![(40, 40)],
        vec![TestId::Xmmd, TestId::MmdPerm { permutations: 50 }],
    )
    .trials(5)
    .kernel(KernelChoice::Fixed {
        kernel: KernelSpec::gaussian(0.1).unwrap(),
    });
    let table = run_bench(&spec).unwrap();
    assert_eq!(table.rows().len(), 2);
    for row in table.rows() {
        assert!(row.time_median_ns.unwrap() > 0.0);
        assert!(row.time_iqr_ns.unwrap() >= 0.0);
        assert!(row.reject_rate.is_some());
    }
}

#[test]
fn dispatch_matches_kind() {
    let spec = ExperimentSpec::new(
        ExperimentKind::NullHist,
        gmd(2, 1, 0.0),
        vec![(8, 8)],
        vec![TestId::Xmmd],
    )
    .trials(3);
    let out = run(&spec).unwrap();
    assert_eq!(out.raw.len(), 1);
    assert!(out.roc.is_empty());
    assert!(run_power_curve(&spec).is_err());
}

#[test]
fn sidecar_validates_against_schema() {
    let validator = schema("experiment_sidecar.schema.json");
    let specs = [
        ExperimentSpec::new(
            ExperimentKind::NullHist,
            gmd(10, 1, 0.0),
            vec![(256, 256)],
            vec![TestId::Xmmd],
        ),
        ExperimentSpec::new(
            ExperimentKind::Roc,
            SourceSpec::dirichlet(3, 0.3).unwrap(),
            vec![(100, 100), (50, 60)],
            vec![
                TestId::Xmmd,
                TestId::Block(BlockSize::Sqrt),
                TestId::Linear,
                TestId::MmdPerm { permutations: 200 },
            ],
        )
        .kernel(KernelChoice::Fixed {
            kernel: KernelSpec::polynomial(2, 0.5).unwrap(),
        })
        .threads(Some(2)),
    ];
    for spec in specs {
        let mut buf = Vec::new();
        write_sidecar(&mut buf, &spec, &Metadata::for_seed(spec.seed)).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&buf).unwrap();
        assert_valid(&validator, &value);
        let back: xmmd_harness::Sidecar = serde_json::from_value(value).unwrap();
        assert_eq!(back.spec, spec);
    }
    let bogus = serde_json::json!({"spec": {}, "metadata": {}});
    assert!(!validator.is_valid(&bogus));
}

fn opt_float() -> impl Strategy<Value = Option<f64>> {
    prop_oneof![
        Just(None),
        (-1e12..1e12f64).prop_map(Some),
        (1e-300..1e-5f64).prop_map(Some),
        Just(Some(f64::INFINITY)),
    ]
}

proptest! {
    #[test]
    fn csv_round_trip_is_exact(
        n in 1usize..1000,
        seed in any::<u64>(),
        a in opt_float(),
        b in opt_float(),
        c in opt_float(),
        count in proptest::option::of(0usize..50),
    ) {
        let mut table = ResultTable::new(Metadata::for_seed(seed));
        let mut row = ResultRow::new(ExperimentKind::Bench, TestId::Block(BlockSize::Fixed(4)), n, n + 1, 3, 7, seed);
        row.reject_rate = a;
        row.mean_statistic = b;
        row.time_iqr_ns = c;
        row.pos_inf = count;
        table.push(row.clone());
        table.push(row);
        let text = table.to_csv_string().unwrap();
        prop_assert_eq!(read_csv(text.as_bytes()).unwrap(), table.rows());
    }
}
