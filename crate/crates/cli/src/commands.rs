use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use xmmd_core::baselines::{block_mmd_test, linear_mmd_test, mmd_perm_test};
use xmmd_core::{
    median_bandwidth, xmmd_test, KernelFamily, KernelSpec, PermutationPlan, SampleMatrix,
    SourceSpec, SplitPlan, TestResult,
};
use xmmd_harness::spec::DEFAULT_PERMUTATIONS;
use xmmd_harness::table::{write_raw_csv, write_roc_csv};
use xmmd_harness::{
    run, with_pool, write_sidecar, BlockSize, ExperimentKind, ExperimentOutput, ExperimentSpec,
    KernelChoice, ResultRow, Sidecar, TestId,
};

use crate::args::{ExperimentArgs, KernelArg, KernelArgs, ScaleArg, SourceArg, TestArgs};
use crate::data::read_sample_file;
use crate::error::{CliError, Result};

#[derive(Serialize)]
struct KernelReport {
    family: KernelFamily,
    scale: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    degree: Option<u32>,
    bandwidth_rule: &'static str,
}

#[derive(Serialize)]
struct SplitReport {
    n1: usize,
    m1: usize,
}

#[derive(Serialize)]
struct TestReport {
    test: String,
    #[serde(with = "xmmd_core::result::extended_f64")]
    statistic: f64,
    #[serde(with = "xmmd_core::result::extended_f64")]
    estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    p_value: Option<f64>,
    reject: bool,
    n: usize,
    m: usize,
    d: usize,
    kernel: KernelReport,
    alpha: f64,
    seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    split: Option<SplitReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    note: Option<String>,
    elapsed_ms: f64,
}

fn fixed_kernel(kind: KernelArg, args: &KernelArgs) -> Result<Option<KernelSpec>> {
    match (args.scale_div, args.scale) {
        (Some(div), _) => match kind {
            KernelArg::Poly(r) => Ok(Some(KernelSpec::polynomial_divided(r, div)?)),
            _ => Err(CliError::Usage(
                "--scale-div applies to poly:<degree> kernels only".into(),
            )),
        },
        (None, ScaleArg::Fixed(s)) => Ok(Some(KernelSpec::new(kind.family(), s, kind.degree())?)),
        (None, ScaleArg::Median) => Ok(None),
    }
}

/// Fills in the flag-selected block size or permutation count.
fn resolve_test(args: &TestArgs) -> Result<TestId> {
    let test = match (args.test, args.permutations) {
        (TestId::MmdPerm { .. }, Some(b)) => TestId::MmdPerm { permutations: b },
        (_, Some(_)) => return Err(CliError::Usage("--B applies to mmd-perm only".into())),
        (t, None) => t,
    };
    match (test, args.block_size) {
        (TestId::Block(_), Some(b)) => Ok(TestId::Block(b)),
        (_, Some(_)) => Err(CliError::Usage("--block-size applies to block only".into())),
        (t, None) => Ok(t),
    }
}

fn run_one(
    test: TestId,
    x: &SampleMatrix,
    y: &SampleMatrix,
    spec: &KernelSpec,
    args: &TestArgs,
) -> Result<TestResult> {
    let result = match test {
        TestId::Xmmd => {
            let mut plan = SplitPlan::balanced(x.n(), y.n())?;
            if !args.no_shuffle {
                plan = plan.with_shuffle(args.seed);
            }
            xmmd_test(x, y, spec, args.alpha, &plan)?
        }
        TestId::MmdPerm { permutations } => mmd_perm_test(
            x,
            y,
            spec,
            args.alpha,
            &PermutationPlan::new(permutations, args.seed)?,
        )?,
        TestId::Block(b) => {
            let fallback = PermutationPlan::new(DEFAULT_PERMUTATIONS, args.seed)?;
            block_mmd_test(x, y, spec, b.resolve(x.n()), args.alpha, &fallback)?
        }
        TestId::Linear => linear_mmd_test(x, y, spec, args.alpha)?,
    };
    Ok(result)
}

pub fn cmd_test(args: &TestArgs, threads: Option<usize>) -> Result<()> {
    let test = resolve_test(args)?;
    let fixed = fixed_kernel(args.kernel.kernel, &args.kernel)?;
    let x = read_sample_file(&args.x, args.header)?;
    let y = read_sample_file(&args.y, args.header)?;
    if x.d() != y.d() {
        return Err(CliError::Data(format!(
            "dimension mismatch: {} has {} columns, {} has {}",
            args.x.display(),
            x.d(),
            args.y.display(),
            y.d()
        )));
    }
    if let TestId::Block(BlockSize::Fixed(b)) = test {
        if b > x.n() {
            return Err(CliError::Usage(format!(
                "--block-size {b} exceeds n = {}",
                x.n()
            )));
        }
    }

    let start = Instant::now();
    let (spec, rule, result) = with_pool(threads, || -> Result<_> {
        let (spec, rule) = match fixed {
            Some(spec) => (spec, "fixed"),
            None => {
                let kind = args.kernel.kernel;
                let scale = median_bandwidth(&x, &y, kind.family())?;
                (
                    KernelSpec::new(kind.family(), scale, kind.degree())?,
                    "median",
                )
            }
        };
        let result = run_one(test, &x, &y, &spec, args)?;
        Ok((spec, rule, result))
    })??;
    let elapsed_ms = start.elapsed().as_secs_f64() * 1e3;

    let split = matches!(test, TestId::Xmmd).then(|| SplitReport {
        n1: x.n() / 2,
        m1: y.n() / 2,
    });
    let report = TestReport {
        test: result.meta.test.clone(),
        statistic: result.statistic,
        estimate: result.estimate,
        threshold: result.threshold,
        p_value: result.p_value,
        reject: result.reject,
        n: x.n(),
        m: y.n(),
        d: x.d(),
        kernel: KernelReport {
            family: spec.family(),
            scale: spec.scale(),
            degree: spec.degree(),
            bandwidth_rule: rule,
        },
        alpha: args.alpha,
        seed: args.seed,
        split,
        note: result.meta.note.clone(),
        elapsed_ms,
    };
    let mut json =
        serde_json::to_string_pretty(&report).map_err(|e| CliError::Other(e.to_string()))?;
    json.push('\n');
    match &args.out {
        Some(path) => fs::write(path, json)?,
        None => std::io::stdout().write_all(json.as_bytes())?,
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentCommand {
    NullSim,
    PowerCurve,
    Roc,
    Bench,
}

impl ExperimentCommand {
    fn accepts(self, kind: ExperimentKind) -> bool {
        match self {
            Self::NullSim => kind == ExperimentKind::NullHist,
            Self::PowerCurve => matches!(
                kind,
                ExperimentKind::PowerCurve | ExperimentKind::TypeIError
            ),
            Self::Roc => kind == ExperimentKind::Roc,
            Self::Bench => kind == ExperimentKind::Bench,
        }
    }
}

fn spec_from_flags(command: ExperimentCommand, args: &ExperimentArgs) -> Result<ExperimentSpec> {
    if args.sizes.is_empty() {
        return Err(CliError::Usage(
            "--sizes is required (or pass --spec)".into(),
        ));
    }
    let source = match args.source {
        SourceArg::Gmd => {
            SourceSpec::gaussian_shift(args.d, args.j.unwrap_or(args.d.min(5)), args.eps)?
        }
        SourceArg::Dirichlet => {
            if args.j.is_some() {
                return Err(CliError::Usage("--j applies to the gmd source only".into()));
            }
            SourceSpec::dirichlet(args.d, args.eps)?
        }
    };
    let kind = match command {
        ExperimentCommand::NullSim => ExperimentKind::NullHist,
        ExperimentCommand::PowerCurve if source.is_null() => ExperimentKind::TypeIError,
        ExperimentCommand::PowerCurve => ExperimentKind::PowerCurve,
        ExperimentCommand::Roc => ExperimentKind::Roc,
        ExperimentCommand::Bench => ExperimentKind::Bench,
    };
    let kind_arg = args.kernel.kernel;
    let kernel = match fixed_kernel(kind_arg, &args.kernel)? {
        Some(kernel) => KernelChoice::Fixed { kernel },
        None => KernelChoice::MedianAuto {
            family: kind_arg.family(),
            degree: kind_arg.degree(),
        },
    };
    let mut spec = ExperimentSpec::new(kind, source, args.sizes.clone(), args.tests.clone())
        .trials(args.trials)
        .seed(args.seed)
        .alpha(args.alpha)
        .kernel(kernel);
    spec.bootstrap = args.bootstrap;
    Ok(spec)
}

fn load_spec(command: ExperimentCommand, path: &Path) -> Result<ExperimentSpec> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    // Either a bare spec or the sidecar written next to a previous run.
    let spec = serde_json::from_str::<ExperimentSpec>(&text)
        .or_else(|_| serde_json::from_str::<Sidecar>(&text).map(|s| s.spec))
        .map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if !command.accepts(spec.kind) {
        return Err(CliError::Usage(format!(
            "{}: kind {} does not match this subcommand",
            path.display(),
            spec.kind
        )));
    }
    Ok(spec)
}

fn with_suffix(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn summary(row: &ResultRow) -> String {
    let mut line = format!(
        "{} {} n={} m={} trials={}",
        row.kind, row.test, row.n, row.m, row.trials
    );
    let fields = [
        ("reject_rate", row.reject_rate),
        ("power_sd", row.power_sd),
        ("predicted_power", row.predicted_power),
        ("mean_statistic", row.mean_statistic),
        ("ks_distance", row.ks_distance),
        ("auc", row.auc),
        ("time_median_ms", row.time_median_ns.map(|t| t / 1e6)),
    ];
    for (name, value) in fields {
        if let Some(v) = value {
            line.push_str(&format!(" {name}={v:.4}"));
        }
    }
    line
}

/// Writes the table, sidecar and any raw or ROC files; returns their paths.
fn write_outputs(
    spec: &ExperimentSpec,
    output: &ExperimentOutput,
    prefix: &Path,
) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let csv_path = with_suffix(prefix, ".csv");
    output.table.write_csv(create(&csv_path)?)?;
    written.push(csv_path);

    let json_path = with_suffix(prefix, ".json");
    let mut sidecar = create(&json_path)?;
    write_sidecar(&mut sidecar, spec, &output.table.metadata)?;
    sidecar.write_all(b"\n")?;
    sidecar.flush()?;
    written.push(json_path);

    for raw in &output.raw {
        let tag = raw.test.to_string().replace(':', "-");
        let path = with_suffix(prefix, &format!(".raw.{tag}.{}x{}.csv", raw.n, raw.m));
        write_raw_csv(create(&path)?, &raw.values)?;
        written.push(path);
    }
    if !output.roc.is_empty() {
        let path = with_suffix(prefix, ".roc.csv");
        write_roc_csv(create(&path)?, &output.roc)?;
        written.push(path);
    }
    Ok(written)
}

pub fn cmd_experiment(
    command: ExperimentCommand,
    args: &ExperimentArgs,
    threads: Option<usize>,
) -> Result<()> {
    let mut spec = match &args.spec {
        Some(path) => load_spec(command, path)?,
        None => spec_from_flags(command, args)?,
    };
    if threads.is_some() {
        spec.threads = threads;
    }
    spec.validate()?;
    let output = run(&spec)?;
    let written = write_outputs(&spec, &output, &args.out)?;
    for row in output.table.rows() {
        println!("{}", summary(row));
    }
    let names: Vec<String> = written.iter().map(|p| p.display().to_string()).collect();
    println!("wrote {}", names.join(", "));
    Ok(())
}
