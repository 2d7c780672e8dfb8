use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{read_rbfn_bank, Dataset, HarnessError};
use crate::optimizer::MatdeConfig;
use crate::problems::{make_manipulator_tasks, make_mcf_suite, McfSuite, TaskSpec};
use crate::prompt::{PromptTemplate, TaskMetadata};
use crate::sne::CodecConfig;
use crate::surrogate::{
    DecodeSpec, ExactSurrogate, MeanSurrogate, MockModel, MockServer, Noise, RbfnConfig, RemoteConfig, RemoteSurrogate,
    Surrogate, SurrogateError, SurrogatePrediction,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Mcf1,
    Mcf2,
    Mcf3,
    Manipulator,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Mcf1 => "mcf1",
            Suite::Mcf2 => "mcf2",
            Suite::Mcf3 => "mcf3",
            Suite::Manipulator => "manipulator",
        }
    }
}

impl FromStr for Suite {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "mcf1" => Ok(Suite::Mcf1),
            "mcf2" => Ok(Suite::Mcf2),
            "mcf3" => Ok(Suite::Mcf3),
            "manipulator" => Ok(Suite::Manipulator),
            other => Err(format!("unknown suite {other:?} (mcf1, mcf2, mcf3, manipulator)")),
        }
    }
}

fn no_noise() -> Noise {
    Noise::None
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SurrogateSpec {
    /// Per-task RBF networks, loaded from `model` or fitted on the train split.
    Rbfn {
        #[serde(default)]
        model: Option<PathBuf>,
    },
    Remote {
        url: String,
    },
    /// In-process mock server reached over HTTP.
    Mock {
        #[serde(default = "no_noise")]
        noise: Noise,
    },
    Exact,
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub suite: Suite,
    pub manipulator_tasks: usize,
    pub samples_per_task: usize,
    /// Train:test ratio.
    pub train_ratio: (usize, usize),
    pub gamma: usize,
    /// Loss weight of the leading positions, recorded for training runs.
    pub alpha: f64,
    pub template: PromptTemplate,
    /// Dataset seed.
    pub seed: u64,
    pub surrogate: SurrogateSpec,
    pub decode: DecodeSpec,
    /// Ask a remote surrogate for per-step token probabilities.
    pub return_probs: bool,
    pub rbfn: RbfnConfig,
    pub optimizer: MatdeConfig,
    /// One optimization run per seed.
    pub seeds: Vec<u64>,
    pub output_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            suite: Suite::Mcf1,
            manipulator_tasks: 50,
            samples_per_task: 500,
            train_ratio: (5, 3),
            gamma: 15,
            alpha: 10.0,
            template: PromptTemplate::Small,
            seed: 0,
            surrogate: SurrogateSpec::Rbfn { model: None },
            decode: DecodeSpec::greedy(),
            return_probs: false,
            rbfn: RbfnConfig::default(),
            optimizer: MatdeConfig::default(),
            seeds: (0..20).collect(),
            output_dir: PathBuf::from("out"),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::Config(m));
        if self.samples_per_task < 2 {
            return bad("samples_per_task must be at least 2".into());
        }
        if self.train_ratio.0 == 0 || self.train_ratio.1 == 0 {
            return bad("both parts of train_ratio must be positive".into());
        }
        if self.suite == Suite::Manipulator && self.manipulator_tasks == 0 {
            return bad("manipulator_tasks must be positive".into());
        }
        if !(self.alpha >= 1.0) {
            return bad("alpha must be at least 1".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        CodecConfig::with_gamma(self.gamma).map_err(|e| HarnessError::Config(e.to_string()))?;
        self.decode.validate().map_err(HarnessError::Config)?;
        self.optimizer
            .validate()
            .map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn remote_config(&self, url: &str) -> RemoteConfig {
        RemoteConfig {
            template: self.template,
            gamma: self.gamma,
            decode: self.decode.clone(),
            return_probs: self.return_probs,
            ..RemoteConfig::new(url)
        }
    }
}

pub fn build_tasks(cfg: &ExperimentConfig) -> Vec<TaskSpec> {
    match cfg.suite {
        Suite::Mcf1 => make_mcf_suite(McfSuite::Mcf1),
        Suite::Mcf2 => make_mcf_suite(McfSuite::Mcf2),
        Suite::Mcf3 => make_mcf_suite(McfSuite::Mcf3),
        Suite::Manipulator => make_manipulator_tasks(cfg.manipulator_tasks, cfg.seed),
    }
}

/// A mock server on an ephemeral local port and a client talking to it.
pub struct LocalMock {
    server: MockServer,
    client: RemoteSurrogate,
}

impl LocalMock {
    pub fn start(model: MockModel, remote: impl FnOnce(&str) -> RemoteConfig) -> Result<Self, SurrogateError> {
        let server = MockServer::start(model, "127.0.0.1:0")?;
        let client = RemoteSurrogate::new(remote(&server.url()));
        Ok(Self { server, client })
    }

    pub fn url(&self) -> String {
        self.server.url()
    }

    pub fn client(&self) -> &RemoteSurrogate {
        &self.client
    }
}

impl Surrogate for LocalMock {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        self.client.predict(meta, x)
    }

    fn predict_batch(&self, meta: &TaskMetadata, xs: &[Vec<f64>]) -> Result<Vec<SurrogatePrediction>, SurrogateError> {
        self.client.predict_batch(meta, xs)
    }

    fn name(&self) -> String {
        "mock".into()
    }
}

/// Instantiates the configured surrogate. RBFN and mean surrogates are fitted
/// on the train split of `dataset`.
pub fn build_surrogate(
    cfg: &ExperimentConfig,
    tasks: &[TaskSpec],
    dataset: Option<&Dataset>,
) -> Result<Box<dyn Surrogate>, HarnessError> {
    let need_data = || dataset.ok_or_else(|| HarnessError::Config("this surrogate needs a dataset".into()));
    Ok(match &cfg.surrogate {
        SurrogateSpec::Exact => Box::new(ExactSurrogate::new(tasks)),
        SurrogateSpec::Mean => {
            let ds = need_data()?;
            let mut m = MeanSurrogate::default();
            for (t, task) in tasks.iter().enumerate() {
                let (_, ys) = ds.task_split(t, super::Split::Train);
                m.insert(task.metadata.clone(), &ys);
            }
            Box::new(m)
        }
        SurrogateSpec::Rbfn { model: Some(path) } => Box::new(read_rbfn_bank(path)?),
        SurrogateSpec::Rbfn { model: None } => Box::new(super::fit_rbfn_bank(need_data()?, &cfg.rbfn)?),
        SurrogateSpec::Remote { url } => Box::new(RemoteSurrogate::new(cfg.remote_config(url))),
        SurrogateSpec::Mock { noise } => {
            let model = MockModel::new(tasks, *noise, cfg.seed).with_default_decode(cfg.decode.clone());
            Box::new(LocalMock::start(model, |url| cfg.remote_config(url))?)
        }
    })
}
