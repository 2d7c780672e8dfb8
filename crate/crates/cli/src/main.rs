use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use metasurrogate::harness::{
    algorithm_runs, build_surrogate, build_tasks, comparison_markdown, evaluate_surrogate, fit_rbfn_bank,
    generate_dataset, performance_table, read_runs, run_optimization, uncertainty_study, write_rbfn_bank, Dataset,
    DatasetOptions, EvalMetric, ExperimentConfig, HarnessError, SurrogateSpec,
};
use metasurrogate::optimizer::OptimizerError;
use metasurrogate::problems::TaskSpec;
use metasurrogate::sne::CodecConfig;
use metasurrogate::surrogate::{MockModel, MockServer, Noise, SurrogateError};
use metasurrogate::token::Vocabulary;

const URL_ENV: &str = "METASURROGATE_URL";

#[derive(Parser)]
#[command(
    name = "metasurrogate",
    version,
    about = "Surrogate-assisted many-task optimization toolkit"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Benchmark datasets.
    #[command(subcommand)]
    Dataset(DatasetCmd),
    /// Fit and score surrogates.
    #[command(subcommand)]
    Surrogate(SurrogateCmd),
    /// Optimizer runs.
    #[command(subcommand)]
    Optimize(OptimizeCmd),
    /// Tables from saved runs and uncertainty studies.
    #[command(subcommand)]
    Report(ReportCmd),
    /// Serve the mock model over HTTP.
    #[command(subcommand)]
    Serve(ServeCmd),
}

#[derive(Subcommand)]
enum DatasetCmd {
    /// Sample, evaluate and encode every task of a suite.
    Gen {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum SurrogateCmd {
    /// Fit one RBF network per task on the train split.
    FitRbfn {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "rbfn.json")]
        out: PathBuf,
    },
    /// Per-task sMAE and R² on the test split.
    Eval {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "eval")]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum OptimizeCmd {
    /// One optimizer run per seed.
    Run {
        #[command(flatten)]
        exp: ExpArgs,
        /// Dataset for data-fitted surrogates; generated from the config when absent.
        #[arg(long)]
        dataset: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
#[allow(clippy::large_enum_variant)]
enum ReportCmd {
    /// Performance table over saved runs; the first `--run` is the focal algorithm.
    Tables {
        /// NAME=DIR of an `optimize run` output.
        #[arg(long = "run", required = true)]
        runs: Vec<String>,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Correlation of uncertainty scores with absolute error.
    Uncertainty {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        max_queries: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum ServeCmd {
    /// Mock model for the configured suite.
    Mock {
        #[command(flatten)]
        exp: ExpArgs,
        #[arg(long, default_value = "127.0.0.1:8000")]
        bind: String,
    },
}

/// Flags mirroring the experiment config. A `--config` file overrides them.
#[derive(Args, Default)]
struct ExpArgs {
    /// JSON experiment config.
    #[arg(long)]
    config: Option<PathBuf>,
    /// mcf1, mcf2, mcf3 or manipulator.
    #[arg(long)]
    suite: Option<String>,
    #[arg(long)]
    manipulator_tasks: Option<usize>,
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    gamma: Option<usize>,
    /// base, small, middle or large.
    #[arg(long)]
    template: Option<String>,
    /// Dataset and mock seed.
    #[arg(long)]
    seed: Option<u64>,
    /// rbfn, mock, exact, mean or remote.
    #[arg(long)]
    surrogate: Option<String>,
    /// Saved RBFN bank.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    url: Option<String>,
    /// Relative Gaussian noise of the mock; 0 is noiseless.
    #[arg(long)]
    noise: Option<f64>,
    /// Beam width; greedy when absent.
    #[arg(long)]
    beam: Option<usize>,
    #[arg(long)]
    centers: Option<usize>,
    #[arg(long)]
    validation_grid: bool,
    /// Number of runs, seeds 0..N.
    #[arg(long)]
    runs: Option<u64>,
    #[arg(long)]
    generations: Option<usize>,
    #[arg(long)]
    pop_size: Option<usize>,
    #[arg(long)]
    im: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Config(String),
    Unavailable(String),
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Unavailable(m) => write!(f, "surrogate unavailable: {m}"),
        }
    }
}

impl std::error::Error for Failure {}

fn config_err(m: impl Into<String>) -> anyhow::Error {
    Failure::Config(m.into()).into()
}

fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

/// Top-level merge where tagged unions are replaced rather than merged.
fn overlay(base: &mut Value, patch: Value) {
    if let (Value::Object(b), Value::Object(p)) = (&mut *base, &patch) {
        for key in ["surrogate", "decode"] {
            if p.contains_key(key) {
                b.remove(key);
            }
        }
    }
    merge(base, patch);
}

impl ExpArgs {
    fn flags(&self) -> Result<Value> {
        let mut m = Map::new();
        let mut set = |k: &str, v: Value| {
            m.insert(k.to_string(), v);
        };
        if let Some(s) = &self.suite {
            set("suite", json!(s.to_ascii_lowercase()));
        }
        if let Some(n) = self.manipulator_tasks {
            set("manipulator_tasks", json!(n));
        }
        if let Some(n) = self.samples {
            set("samples_per_task", json!(n));
        }
        if let Some(g) = self.gamma {
            set("gamma", json!(g));
        }
        if let Some(t) = &self.template {
            set("template", json!(t.to_ascii_lowercase()));
        }
        if let Some(s) = self.seed {
            set("seed", json!(s));
        }
        if let Some(kind) = &self.surrogate {
            let spec = match kind.as_str() {
                "rbfn" => json!({ "kind": "rbfn", "model": self.model }),
                "mock" => {
                    let noise = match self.noise {
                        Some(s) if s > 0.0 => json!({ "kind": "gaussian", "sigma_rel": s }),
                        _ => json!({ "kind": "none" }),
                    };
                    json!({ "kind": "mock", "noise": noise })
                }
                "remote" => json!({ "kind": "remote", "url": self.url.clone().unwrap_or_default() }),
                "exact" | "mean" => json!({ "kind": kind }),
                other => return Err(config_err(format!("unknown surrogate {other:?}"))),
            };
            set("surrogate", spec);
        }
        if let Some(w) = self.beam {
            set("decode", json!({ "strategy": "beam", "width": w }));
        }
        let mut rbfn = Map::new();
        if let Some(c) = self.centers {
            rbfn.insert("n_centers".into(), json!(c));
        }
        if self.validation_grid {
            rbfn.insert("validation_grid".into(), json!(true));
        }
        if !rbfn.is_empty() {
            set("rbfn", Value::Object(rbfn));
        }
        if let Some(n) = self.runs {
            set("seeds", json!((0..n).collect::<Vec<_>>()));
        }
        let mut opt = Map::new();
        if let Some(g) = self.generations {
            opt.insert("generations".into(), json!(g));
        }
        if let Some(p) = self.pop_size {
            opt.insert("pop_size".into(), json!(p));
        }
        if let Some(im) = self.im {
            opt.insert("im".into(), json!(im));
        }
        if !opt.is_empty() {
            set("optimizer", Value::Object(opt));
        }
        Ok(Value::Object(m))
    }

    /// Defaults, then flags, then the config file, then the URL variable.
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut v = serde_json::to_value(ExperimentConfig::default())?;
        overlay(&mut v, self.flags()?);
        if let Some(path) = &self.config {
            let text = fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            let file: Value =
                serde_json::from_str(&text).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
            if !file.is_object() {
                return Err(config_err(format!("{}: expected a JSON object", path.display())));
            }
            overlay(&mut v, file);
        }
        let mut cfg: ExperimentConfig = serde_json::from_value(v).map_err(|e| config_err(e.to_string()))?;
        if let Ok(url) = std::env::var(URL_ENV) {
            if let SurrogateSpec::Remote { url: u } = &mut cfg.surrogate {
                *u = url;
            }
        }
        if let SurrogateSpec::Remote { url } = &cfg.surrogate {
            if url.is_empty() {
                return Err(config_err(format!("remote surrogate needs --url or {URL_ENV}")));
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn dataset_options(cfg: &ExperimentConfig) -> DatasetOptions {
    DatasetOptions {
        suite: cfg.suite.name().to_string(),
        samples_per_task: cfg.samples_per_task,
        train_ratio: cfg.train_ratio,
        gamma: cfg.gamma,
        template: cfg.template,
        seed: cfg.seed,
    }
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| dir.display().to_string())?;
    }
    fs::write(path, text).with_context(|| path.display().to_string())
}

fn needs_data(spec: &SurrogateSpec) -> bool {
    matches!(spec, SurrogateSpec::Mean | SurrogateSpec::Rbfn { model: None })
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Dataset(DatasetCmd::Gen { exp, out }) => {
            let cfg = exp.resolve()?;
            let ds = generate_dataset(&build_tasks(&cfg), &dataset_options(&cfg))?;
            ds.write(&out)?;
            let m = &ds.manifest;
            println!(
                "{} records ({} train, {} test, {} encode failures) in {}",
                m.n_records,
                m.n_train,
                m.n_test,
                m.encode_failures.len(),
                out.display()
            );
        }
        Cmd::Surrogate(SurrogateCmd::FitRbfn { exp, dataset, out }) => {
            let cfg = exp.resolve()?;
            let ds = Dataset::read(&dataset)?;
            let bank = fit_rbfn_bank(&ds, &cfg.rbfn)?;
            write_rbfn_bank(&bank, &out)?;
            println!("{} models written to {}", bank.len(), out.display());
        }
        Cmd::Surrogate(SurrogateCmd::Eval { exp, dataset, out }) => {
            let cfg = exp.resolve()?;
            let ds = Dataset::read(&dataset)?;
            let tasks = ds.tasks()?;
            let surrogate = build_surrogate(&cfg, &tasks, Some(&ds))?;
            let report = evaluate_surrogate(&ds, surrogate.as_ref())?;
            write(&out.join("eval.csv"), &report.to_csv())?;
            write(&out.join("eval.json"), &serde_json::to_string_pretty(&report)?)?;
            let reports = [report];
            let md = format!(
                "{}\n{}",
                comparison_markdown(&reports, EvalMetric::Smae),
                comparison_markdown(&reports, EvalMetric::R2)
            );
            write(&out.join("eval.md"), &md)?;
            let r = &reports[0];
            println!(
                "{}: macro sMAE {:?}, macro R2 {:?}; tables in {}",
                r.surrogate,
                r.macro_smae,
                r.macro_r2,
                out.display()
            );
            let failed = r.rows.iter().filter(|row| row.error.is_some()).count();
            if failed == r.rows.len() {
                let msg = r.rows.first().and_then(|row| row.error.clone()).unwrap_or_default();
                return Err(Failure::Unavailable(msg).into());
            }
        }
        Cmd::Optimize(OptimizeCmd::Run { exp, dataset, out }) => {
            let cfg = exp.resolve()?;
            let ds = match &dataset {
                Some(dir) => Some(Dataset::read(dir)?),
                None if needs_data(&cfg.surrogate) => {
                    Some(generate_dataset(&build_tasks(&cfg), &dataset_options(&cfg))?)
                }
                None => None,
            };
            let tasks: Vec<TaskSpec> = match &ds {
                Some(d) => d.tasks()?,
                None => build_tasks(&cfg),
            };
            let out = out.unwrap_or_else(|| cfg.output_dir.clone());
            let surrogate = build_surrogate(&cfg, &tasks, ds.as_ref())?;
            let runs = run_optimization(&tasks, surrogate.as_ref(), &cfg.optimizer, &cfg.seeds, Some(&out))?;
            write(&out.join("config.json"), &serde_json::to_string_pretty(&cfg)?)?;
            println!(
                "{} runs of {} tasks written to {}",
                runs.len(),
                tasks.len(),
                out.display()
            );
            if let Some(bad) = runs.iter().find(|r| r.outcome.partial) {
                return Err(Failure::Unavailable(format!(
                    "run with seed {} stopped after {} generations: {}",
                    bad.seed,
                    bad.outcome.generations_completed,
                    bad.outcome.error.as_deref().unwrap_or("unknown error")
                ))
                .into());
            }
        }
        Cmd::Report(ReportCmd::Tables { runs, alpha, out }) => {
            let mut algs = Vec::new();
            let mut names: Vec<String> = Vec::new();
            for spec in &runs {
                let (name, dir) = spec
                    .split_once('=')
                    .ok_or_else(|| config_err(format!("--run expects NAME=DIR, got {spec:?}")))?;
                let recs = read_runs(Path::new(dir))?;
                let first = recs.first().ok_or_else(|| anyhow!("{dir}: no runs"))?;
                if names.is_empty() {
                    names = first.outcome.results.iter().map(|r| r.name.clone()).collect();
                }
                algs.push(algorithm_runs(name, &recs));
            }
            let table = performance_table(&names, &algs, 0, alpha)?;
            let md = table.to_markdown();
            match out {
                Some(dir) => {
                    write(&dir.join("tables.md"), &md)?;
                    write(&dir.join("tables.csv"), &table.to_csv())?;
                    println!("tables written to {}", dir.display());
                }
                None => print!("{md}"),
            }
        }
        Cmd::Report(ReportCmd::Uncertainty {
            exp,
            dataset,
            max_queries,
            out,
        }) => {
            let mut cfg = exp.resolve()?;
            cfg.return_probs = true;
            let ds = Dataset::read(&dataset)?;
            let tasks = ds.tasks()?;
            let surrogate = build_surrogate(&cfg, &tasks, Some(&ds))?;
            let vocab = Vocabulary::for_codec(&CodecConfig::with_gamma(ds.manifest.options.gamma)?);
            let study = uncertainty_study(&ds, surrogate.as_ref(), &vocab, max_queries, cfg.seed)?;
            let md = study.to_markdown();
            match out {
                Some(dir) => {
                    write(&dir.join("uncertainty.md"), &md)?;
                    write(&dir.join("uncertainty.csv"), &study.to_csv())?;
                    println!("uncertainty study written to {}", dir.display());
                }
                None => print!("{md}"),
            }
        }
        Cmd::Serve(ServeCmd::Mock { exp, bind }) => {
            let cfg = exp.resolve()?;
            let noise = match (&cfg.surrogate, exp.noise) {
                (SurrogateSpec::Mock { noise }, _) => *noise,
                (_, Some(s)) if s > 0.0 => Noise::Gaussian { sigma_rel: s },
                _ => Noise::None,
            };
            let model = MockModel::new(&build_tasks(&cfg), noise, cfg.seed).with_default_decode(cfg.decode.clone());
            let server = MockServer::start(model, &bind)?;
            println!("listening on {}", server.url());
            std::io::stdout().flush()?;
            server.wait();
        }
    }
    Ok(())
}

fn surrogate_code(e: &SurrogateError) -> u8 {
    match e {
        SurrogateError::RemoteUnavailable(_) => 3,
        SurrogateError::PortInUse(_) => 2,
        _ => 1,
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return match f {
                Failure::Config(_) => 2,
                Failure::Unavailable(_) => 3,
            };
        }
        if let Some(h) = cause.downcast_ref::<HarnessError>() {
            return match h {
                HarnessError::Config(_) => 2,
                HarnessError::Surrogate(s) => surrogate_code(s),
                HarnessError::Optimizer(OptimizerError::Surrogate(s)) => surrogate_code(s),
                HarnessError::Optimizer(OptimizerError::InvalidConfig(_)) => 2,
                _ => 1,
            };
        }
        if let Some(s) = cause.downcast_ref::<SurrogateError>() {
            return surrogate_code(s);
        }
        if cause.downcast_ref::<metasurrogate::sne::CodecError>().is_some() {
            return 2;
        }
    }
    1
}

/// The error chain, skipping causes already spelled out by their parent.
fn describe(err: &anyhow::Error) -> String {
    let mut out = err.to_string();
    for cause in err.chain().skip(1) {
        let c = cause.to_string();
        if !out.contains(&c) {
            out.push_str(": ");
            out.push_str(&c);
        }
    }
    out
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
