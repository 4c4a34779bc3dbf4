//! `netpred`: fit mixed graphical and VAR networks, compute nodewise
//! predictability, simulate data and draw the result.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use netpred_core::cv::{CvConfig, Penalty};
use netpred_core::data::{
    format_spec, load_csv, load_spec, load_time_index, write_csv, Dataset, TimeIndex,
    VariableSpec,
};
use netpred_core::error::{Error, ErrorClass};
use netpred_core::mgm::{fit_mgm, MgmConfig, Rule};
use netpred_core::model_io::{
    read_model, read_report, to_json, ModelDocument, NetworkModel, Provenance, ReportDocument,
    TOOL_VERSION,
};
use netpred_core::mvar::{fit_mvar, VarConfig};
use netpred_core::predictability::{evaluate, SampleKind};
use netpred_core::sampler::GeneratingModel;
use netpred_core::viz::{export_dot, render_svg, LayoutOptions, RenderedGraph, RingPalette, SvgOptions};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

#[derive(Debug, Parser)]
#[command(name = "netpred", version, about = "Network estimation and nodewise predictability")]
struct Cli {
    /// Maximum number of worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a mixed graphical model by nodewise regression.
    FitMgm(FitMgmArgs),
    /// Fit a mixed vector autoregressive model.
    FitVar(FitVarArgs),
    /// Compute predictability of a fitted model on a dataset.
    Predict(PredictArgs),
    /// Draw data from a generating model.
    Simulate(SimulateArgs),
    /// Render a fitted model as SVG and optionally DOT.
    Viz(VizArgs),
}

#[derive(Debug, Args)]
struct FitArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    spec: PathBuf,
    /// Model JSON to write.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 10)]
    folds: usize,
    #[arg(long, default_value_t = 50)]
    n_lambda: usize,
    #[arg(long, default_value_t = 1e-3)]
    lambda_min_ratio: f64,
    /// Fixed penalty; disables cross-validation.
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Scale continuous columns to unit variance after centering.
    #[arg(long)]
    zscore: bool,
    /// Sign edges that touch binary variables.
    #[arg(long)]
    binary_sign: bool,
    /// Store within-sample predictability in the model file.
    #[arg(long)]
    self_evaluate: bool,
}

#[derive(Debug, Args)]
struct FitMgmArgs {
    #[command(flatten)]
    fit: FitArgs,
    #[arg(long, default_value = "or", value_parser = ["or", "and"])]
    rule: String,
}

#[derive(Debug, Args)]
struct FitVarArgs {
    #[command(flatten)]
    fit: FitArgs,
    /// Comma-separated lags.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    lags: Vec<u32>,
    /// CSV with `day,beep` columns, one row per data row.
    #[arg(long)]
    time_index: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Expected variable spec; must agree with the model.
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Report JSON to write.
    #[arg(long)]
    out: PathBuf,
    /// Text table to write; defaults to the report path with a `.txt` extension.
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    time_index: Option<PathBuf>,
    /// Mark the data as the training data.
    #[arg(long)]
    within_sample: bool,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// Generating model JSON.
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Spec sidecar to write; defaults to the CSV path with a `.spec` extension.
    #[arg(long)]
    spec: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct VizArgs {
    #[arg(long)]
    model: PathBuf,
    /// Report JSON; defaults to the report stored in the model file.
    #[arg(long)]
    report: Option<PathBuf>,
    /// SVG to write.
    #[arg(long)]
    out: PathBuf,
    /// DOT file to write.
    #[arg(long)]
    dot: Option<PathBuf>,
    /// Layout seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 500)]
    iterations: usize,
}

enum Failure {
    Usage(String),
    Core(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Core(e)
    }
}

impl Failure {
    fn code(&self) -> &'static str {
        match self {
            Failure::Usage(_) => "usage",
            Failure::Core(e) => e.code(),
        }
    }

    fn exit_status(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Core(e) => match e.class() {
                ErrorClass::Usage => 1,
                ErrorClass::Data => 2,
                ErrorClass::Numerical => 3,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            Failure::Usage(m) => m.clone(),
            Failure::Core(e) => e.to_string(),
        }
    }
}

type Outcome<T> = std::result::Result<T, Failure>;

/// Files written so far, removed again if the command fails.
#[derive(Default)]
struct Outputs(Vec<PathBuf>);

impl Outputs {
    fn write(&mut self, path: &Path, contents: &str) -> Outcome<()> {
        self.0.push(path.to_path_buf());
        fs::write(path, contents).map_err(|e| Error::io(path, e).into())
    }

    fn track(&mut self, path: &Path) {
        self.0.push(path.to_path_buf());
    }

    fn remove_all(&self) {
        for p in &self.0 {
            let _ = fs::remove_file(p);
        }
    }
}

fn file_sha256(path: &Path) -> Outcome<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

fn penalty(f: &FitArgs) -> Penalty {
    match f.lambda {
        Some(lambda) => Penalty::Fixed { lambda },
        None => Penalty::CrossValidated(CvConfig {
            folds: f.folds,
            n_lambda: f.n_lambda,
            lambda_min_ratio: f.lambda_min_ratio,
            seed: f.seed,
        }),
    }
}

fn fit_config_echo(command: &str, f: &FitArgs) -> Outcome<Value> {
    Ok(json!({
        "command": command,
        "data_sha256": file_sha256(&f.data)?,
        "folds": f.folds,
        "n_lambda": f.n_lambda,
        "lambda_min_ratio": f.lambda_min_ratio,
        "lambda": f.lambda,
        "seed": f.seed,
        "zscore": f.zscore,
        "binary_sign": f.binary_sign,
        "self_evaluate": f.self_evaluate,
    }))
}

fn load_training(f: &FitArgs) -> Outcome<Dataset> {
    let spec = load_spec(&f.spec)?;
    let d = load_csv(&f.data, &spec)?.center_continuous()?;
    Ok(if f.zscore { d.zscore_continuous()? } else { d })
}

fn write_model(
    out: &mut Outputs,
    f: &FitArgs,
    model: NetworkModel,
    data: &Dataset,
    time: Option<&[TimeIndex]>,
    config: Value,
) -> Outcome<()> {
    let mut doc = ModelDocument::new(model, config);
    if f.self_evaluate {
        doc.self_report = Some(evaluate(&doc.model, data, time, SampleKind::WithinSample)?);
    }
    out.write(&f.out, &to_json(&doc)?)
}

fn fit_mgm_command(a: &FitMgmArgs, out: &mut Outputs) -> Outcome<()> {
    let f = &a.fit;
    let rule: Rule = a.rule.parse().map_err(|_| Failure::Usage(format!("unknown rule {:?}", a.rule)))?;
    let mut config = fit_config_echo("fit-mgm", f)?;
    config["rule"] = json!(a.rule);
    let d = load_training(f)?;
    let cfg = MgmConfig {
        rule,
        penalty: penalty(f),
        binary_sign: f.binary_sign,
        ..MgmConfig::default()
    };
    let model = fit_mgm(&d, &cfg)?;
    write_model(out, f, model.into(), &d, None, config)
}

fn fit_var_command(a: &FitVarArgs, out: &mut Outputs) -> Outcome<()> {
    let f = &a.fit;
    let mut config = fit_config_echo("fit-var", f)?;
    config["lags"] = json!(a.lags);
    let time = match &a.time_index {
        Some(p) => {
            config["time_index_sha256"] = json!(file_sha256(p)?);
            Some(load_time_index(p)?)
        }
        None => None,
    };
    let d = load_training(f)?;
    let cfg = VarConfig {
        lags: a.lags.clone(),
        penalty: penalty(f),
        binary_sign: f.binary_sign,
        ..VarConfig::default()
    };
    let model = fit_mvar(&d, time.as_deref(), &cfg)?;
    write_model(out, f, model.into(), &d, time.as_deref(), config)
}

fn same_spec(a: &[VariableSpec], b: &[VariableSpec]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.same_shape(y))
}

fn predict_command(a: &PredictArgs, out: &mut Outputs) -> Outcome<()> {
    let doc = read_model(&a.model)?;
    let spec = doc.model.spec().to_vec();
    if let Some(p) = &a.spec {
        if !same_spec(&load_spec(p)?, &spec) {
            return Err(Error::SpecMismatch(format!(
                "{} does not describe the model's variables",
                p.display()
            ))
            .into());
        }
    }
    let centering = doc
        .model
        .centering()
        .ok_or(Error::NotCentered("prediction"))?
        .clone();
    let d = load_csv(&a.data, &spec)?.center_with(&centering)?;
    let time = a.time_index.as_ref().map(load_time_index).transpose()?;
    let kind = if a.within_sample {
        SampleKind::WithinSample
    } else {
        SampleKind::OutOfSample
    };
    let report = evaluate(&doc.model, &d, time.as_deref(), kind)?;
    let config = json!({
        "command": "predict",
        "model_sha256": file_sha256(&a.model)?,
        "data_sha256": file_sha256(&a.data)?,
        "within_sample": a.within_sample,
    });
    let provenance = Provenance::new(&spec, doc.provenance.seed, config);
    let table_path = a.table.clone().unwrap_or_else(|| a.out.with_extension("txt"));
    let table = format!(
        "# {} spec_hash={} seed={} tool_version={}\n{}",
        report_label(kind),
        provenance.spec_hash,
        provenance.seed,
        TOOL_VERSION,
        report.to_table()
    );
    out.write(&a.out, &to_json(&ReportDocument::new(report, provenance))?)?;
    out.write(&table_path, &table)
}

fn report_label(kind: SampleKind) -> &'static str {
    match kind {
        SampleKind::WithinSample => "within-sample",
        SampleKind::OutOfSample => "out-of-sample",
    }
}

fn simulate_command(a: &SimulateArgs, out: &mut Outputs) -> Outcome<()> {
    let text = fs::read_to_string(&a.model).map_err(|e| Error::io(&a.model, e))?;
    let generator: GeneratingModel = serde_json::from_str(&text).map_err(Error::from)?;
    let d = generator.sample(a.n, a.seed)?;
    let config = json!({
        "command": "simulate",
        "generator_sha256": file_sha256(&a.model)?,
        "n": a.n,
    });
    let provenance = Provenance::new(d.spec(), a.seed, config);
    let spec_path = a.spec.clone().unwrap_or_else(|| a.out.with_extension("spec"));
    out.track(&a.out);
    write_csv(&a.out, &d)?;
    let sidecar = format!(
        "# provenance {}\n# tool_version {}\n{}",
        serde_json::to_string(&provenance).map_err(Error::from)?,
        TOOL_VERSION,
        format_spec(d.spec())
    );
    out.write(&spec_path, &sidecar)
}

fn viz_command(a: &VizArgs, out: &mut Outputs) -> Outcome<()> {
    let doc = read_model(&a.model)?;
    let report = match &a.report {
        Some(p) => {
            let r = read_report(p)?;
            if r.provenance.spec_hash != doc.provenance.spec_hash {
                return Err(Error::SpecMismatch("report and model describe different variables".into()).into());
            }
            Some(r.report)
        }
        None => doc.self_report.clone(),
    };
    let layout = LayoutOptions {
        iterations: a.iterations,
        seed: a.seed,
    };
    let graph = RenderedGraph::from_model(&doc.model, report.as_ref(), &RingPalette::default(), &layout)?;
    let config = json!({
        "command": "viz",
        "model_sha256": file_sha256(&a.model)?,
        "report_sha256": a.report.as_deref().map(file_sha256).transpose()?,
        "iterations": a.iterations,
        "layout_seed": a.seed,
    });
    let provenance = Provenance::new(doc.model.spec(), doc.provenance.seed, config);
    let stamp = json!({ "tool_version": TOOL_VERSION, "provenance": provenance }).to_string();
    let options = SvgOptions {
        metadata: Some(stamp.clone()),
        ..SvgOptions::default()
    };
    out.write(&a.out, &render_svg(&graph, &options))?;
    if let Some(p) = &a.dot {
        out.write(p, &format!("// {stamp}\n{}", export_dot(&graph)))?;
    }
    Ok(())
}

fn run(cli: &Cli, out: &mut Outputs) -> Outcome<()> {
    match &cli.command {
        Command::FitMgm(a) => fit_mgm_command(a, out),
        Command::FitVar(a) => fit_var_command(a, out),
        Command::Predict(a) => predict_command(a, out),
        Command::Simulate(a) => simulate_command(a, out),
        Command::Viz(a) => viz_command(a, out),
    }
}

fn fail(f: &Failure) -> ExitCode {
    eprintln!("{}", json!({ "error": f.code(), "message": f.message() }));
    ExitCode::from(f.exit_status())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let msg = e.to_string();
            let first = msg.lines().next().unwrap_or("").trim_start_matches("error: ");
            return fail(&Failure::Usage(first.to_string()));
        }
    };
    if let Some(n) = cli.threads {
        let pool = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        if n == 0 || pool.is_err() {
            return fail(&Failure::Usage("--threads must be a positive integer".into()));
        }
    }
    let mut out = Outputs::default();
    match run(&cli, &mut out) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            out.remove_all();
            fail(&f)
        }
    }
}
