//! Blocking HTTP client for the prediction service.

use std::time::Duration;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::protocol::{
    error_for_status, BatchItem, BatchReply, BatchRequest, DecodeSpec, HealthReply, PredictReply, PredictRequest,
};
use super::{check_dim, Surrogate, SurrogateError, SurrogatePrediction};
use crate::prompt::{render_metadata, PromptTemplate, TaskMetadata};

#[derive(Debug, Clone)]
pub struct RemoteConfig {
    /// Service root, e.g. `http://127.0.0.1:8000`.
    pub base_url: String,
    pub template: PromptTemplate,
    pub gamma: usize,
    pub decode: DecodeSpec,
    pub return_probs: bool,
    pub top_k_probs: usize,
    pub timeout: Duration,
    /// Extra attempts after a transport failure.
    pub retries: usize,
    /// Send `predict_batch` calls as one `/predict_batch` request.
    pub use_batch_endpoint: bool,
}

impl RemoteConfig {
    pub fn new(base_url: impl Into<String>) -> Self {
        Self {
            base_url: base_url.into().trim_end_matches('/').to_string(),
            template: PromptTemplate::Small,
            gamma: 15,
            decode: DecodeSpec::greedy(),
            return_probs: false,
            top_k_probs: 5,
            timeout: Duration::from_secs(30),
            retries: 0,
            use_batch_endpoint: true,
        }
    }
}

pub struct RemoteSurrogate {
    cfg: RemoteConfig,
    agent: ureq::Agent,
}

fn transport(url: &str) -> impl Fn(ureq::Error) -> SurrogateError + '_ {
    move |e| SurrogateError::RemoteUnavailable(format!("{url}: {e}"))
}

impl RemoteSurrogate {
    pub fn new(cfg: RemoteConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(cfg.timeout))
            .http_status_as_error(false)
            .build()
            .into();
        Self { cfg, agent }
    }

    pub fn config(&self) -> &RemoteConfig {
        &self.cfg
    }

    fn url(&self, path: &str) -> String {
        format!("{}{path}", self.cfg.base_url)
    }

    fn parse<R: DeserializeOwned>(status: u16, body: &str) -> Result<R, SurrogateError> {
        if !(200..300).contains(&status) {
            return Err(error_for_status(status, body));
        }
        serde_json::from_str(body).map_err(|e| SurrogateError::ProtocolError(format!("bad reply: {e}")))
    }

    fn with_retries<R>(&self, mut call: impl FnMut() -> Result<R, SurrogateError>) -> Result<R, SurrogateError> {
        let mut attempt = 0;
        loop {
            match call() {
                Err(SurrogateError::RemoteUnavailable(_)) if attempt < self.cfg.retries => attempt += 1,
                other => return other,
            }
        }
    }

    fn post<B: Serialize, R: DeserializeOwned>(&self, path: &str, body: &B) -> Result<R, SurrogateError> {
        self.with_retries(|| {
            let url = self.url(path);
            let mut resp = self.agent.post(&url).send_json(body).map_err(transport(&url))?;
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string().map_err(transport(&url))?;
            Self::parse(status, &text)
        })
    }

    pub fn health(&self) -> Result<HealthReply, SurrogateError> {
        self.with_retries(|| {
            let url = self.url("/health");
            let mut resp = self.agent.get(&url).call().map_err(transport(&url))?;
            let status = resp.status().as_u16();
            let text = resp.body_mut().read_to_string().map_err(transport(&url))?;
            Self::parse(status, &text)
        })
    }

    pub fn request_for(&self, meta: &TaskMetadata, x: &[f64]) -> PredictRequest {
        PredictRequest {
            metadata: render_metadata(meta, self.cfg.template),
            x: x.to_vec(),
            gamma: self.cfg.gamma,
            template: self.cfg.template,
            decode: Some(self.cfg.decode.clone()),
            return_probs: self.cfg.return_probs,
            top_k_probs: self.cfg.top_k_probs,
        }
    }

    pub fn send(&self, req: &PredictRequest) -> Result<PredictReply, SurrogateError> {
        self.post("/predict", req)
    }

    /// One reply or error per request, in request order.
    pub fn send_batch(
        &self,
        items: Vec<PredictRequest>,
    ) -> Result<Vec<Result<PredictReply, SurrogateError>>, SurrogateError> {
        let n = items.len();
        let reply: BatchReply = self.post("/predict_batch", &BatchRequest { items })?;
        if reply.items.len() != n {
            return Err(SurrogateError::ProtocolError(format!(
                "batch of {n} answered with {} items",
                reply.items.len()
            )));
        }
        Ok(reply
            .items
            .into_iter()
            .map(|item| match item {
                BatchItem::Ok(r) => Ok(r),
                BatchItem::Err(e) => Err(error_for_status(
                    e.status.unwrap_or(400),
                    &serde_json::to_string(&e).unwrap_or_default(),
                )),
            })
            .collect())
    }
}

fn into_prediction(r: PredictReply) -> Result<SurrogatePrediction, SurrogateError> {
    if !r.y.is_finite() {
        return Err(SurrogateError::UnparseableOutput(r.raw_text));
    }
    Ok(SurrogatePrediction {
        y: r.y,
        raw_text: Some(r.raw_text),
        tokens: r.tokens,
        step_probs: r.step_probs,
        uncertainty: r.uncertainty,
    })
}

impl Surrogate for RemoteSurrogate {
    fn predict(&self, meta: &TaskMetadata, x: &[f64]) -> Result<SurrogatePrediction, SurrogateError> {
        check_dim(meta, x)?;
        into_prediction(self.send(&self.request_for(meta, x))?)
    }

    fn predict_batch(&self, meta: &TaskMetadata, xs: &[Vec<f64>]) -> Result<Vec<SurrogatePrediction>, SurrogateError> {
        for x in xs {
            check_dim(meta, x)?;
        }
        if !self.cfg.use_batch_endpoint {
            return xs.iter().map(|x| self.predict(meta, x)).collect();
        }
        let reqs = xs.iter().map(|x| self.request_for(meta, x)).collect();
        self.send_batch(reqs)?
            .into_iter()
            .map(|r| r.and_then(into_prediction))
            .collect()
    }

    fn name(&self) -> String {
        format!("remote({})", self.cfg.base_url)
    }
}
