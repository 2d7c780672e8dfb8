//! Stand-in for the fine-tuned model: serves the prediction protocol from
//! synthetic token distributions built around the true fitness.
//!
//! With Gaussian noise a request draws `e ~ N(0, sigma_rel)` and targets
//! `y* = y (1 + e)`. Every step's distribution peaks at the token of the
//! encoded `y*`, so greedy decoding returns `y*`; the spread at each step
//! grows with the injected error `s = |y* - y|` relative to that step's place
//! value, which ties token entropy to the prediction error.

use std::collections::HashMap;
use std::net::{SocketAddr, TcpListener};
use std::sync::Arc;
use std::thread::JoinHandle;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;
use tokio::sync::oneshot;

use super::protocol::{
    BatchItem, BatchReply, BatchRequest, DecodeSpec, DecodeStrategy, ErrorReply, HealthReply, PredictReply,
    PredictRequest, ProbEntry,
};
use super::SurrogateError;
use crate::problems::TaskSpec;
use crate::prompt::{parse_fitness, render_metadata, PromptTemplate};
use crate::seed::{fnv1a, mix};
use crate::sne::{encode_scalar, exponent_token, CodecConfig, EncodedNumber};
use crate::token::decode::{beam_decode, greedy_decode, sample_decode, SamplingStrategy, TableSource};
use crate::token::{uncertainty_scores, StepDistribution, TokenId, Vocabulary};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Noise {
    None,
    Gaussian { sigma_rel: f64 },
}

/// Width used for the dispersion of the top beams.
const BEAM_STD_WIDTH: usize = 3;

/// Off-centre weights stay strictly below the centre token's weight of one,
/// so the argmax is the target token even when a step is nearly uniform.
fn off_centre(w: f64) -> f64 {
    w * (1.0 - 1e-6)
}

#[derive(Debug, Clone)]
pub struct MockModel {
    tasks: HashMap<String, Arc<TaskSpec>>,
    noise: Noise,
    seed: u64,
    k_min: i32,
    k_max: i32,
    vocab: Vocabulary,
    default_decode: DecodeSpec,
}

/// Error with the HTTP status the server answers.
#[derive(Debug, Clone, PartialEq)]
pub struct MockError {
    pub status: u16,
    pub message: String,
}

impl MockError {
    fn new(status: u16, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }
}

/// Token-level view of one query: the step distributions plus the truth.
#[derive(Debug, Clone)]
pub struct MockQuery {
    pub source: TableSource<f64>,
    pub truth: f64,
    pub target: f64,
    pub gamma: usize,
}

impl MockModel {
    pub fn new(tasks: &[TaskSpec], noise: Noise, seed: u64) -> Self {
        let codec = CodecConfig::default();
        let mut map = HashMap::new();
        for t in tasks {
            let t = Arc::new(t.clone());
            for tpl in PromptTemplate::ALL {
                map.insert(render_metadata(&t.metadata, tpl), Arc::clone(&t));
            }
        }
        Self {
            tasks: map,
            noise,
            seed,
            k_min: codec.k_min,
            k_max: codec.k_max,
            vocab: Vocabulary::for_codec(&codec),
            default_decode: DecodeSpec::greedy(),
        }
    }

    /// Decoding used when a request carries none.
    pub fn with_default_decode(mut self, decode: DecodeSpec) -> Self {
        self.default_decode = decode;
        self
    }

    pub fn vocab(&self) -> &Vocabulary {
        &self.vocab
    }

    pub fn name(&self) -> String {
        match self.noise {
            Noise::None => "mock-exact".into(),
            Noise::Gaussian { sigma_rel } => format!("mock-gaussian-{sigma_rel}"),
        }
    }

    fn codec(&self, gamma: usize) -> Result<CodecConfig, MockError> {
        CodecConfig::new(gamma, self.k_min, self.k_max)
            .map(|c| c.clamping(true))
            .map_err(|e| MockError::new(400, e.to_string()))
    }

    fn id(&self, tok: &str) -> TokenId {
        self.vocab.id(tok).expect("codec tokens are in the vocabulary")
    }

    fn noisy_target(&self, metadata: &str, x: &[f64], gamma: usize, truth: f64) -> f64 {
        match self.noise {
            Noise::None => truth,
            Noise::Gaussian { sigma_rel } => {
                let mut bytes = metadata.as_bytes().to_vec();
                bytes.extend(x.iter().flat_map(|v| v.to_bits().to_le_bytes()));
                bytes.extend((gamma as u64).to_le_bytes());
                let mut rng = ChaCha8Rng::seed_from_u64(mix(self.seed, fnv1a(&bytes)));
                let e: f64 = rng.sample(StandardNormal);
                truth * (1.0 + sigma_rel * e)
            }
        }
    }

    pub fn query(&self, metadata: &str, x: &[f64], gamma: usize) -> Result<MockQuery, MockError> {
        let task = self
            .tasks
            .get(metadata)
            .ok_or_else(|| MockError::new(404, "unknown task metadata"))?;
        if x.len() != task.dim() {
            return Err(MockError::new(
                400,
                format!("x has {} entries, task dimension is {}", x.len(), task.dim()),
            ));
        }
        let cfg = self.codec(gamma)?;
        let truth = task.evaluate(x).map_err(|e| MockError::new(400, e.to_string()))?;
        let target = self.noisy_target(metadata, x, gamma, truth);
        let enc = encode_scalar(target, &cfg).map_err(|e| MockError::new(422, e.to_string()))?;
        let spread = (target - truth).abs();
        let source = TableSource::new(self.steps(&enc, enc.decode::<f64>(), spread), self.vocab.end_id());
        Ok(MockQuery {
            source,
            truth,
            target,
            gamma,
        })
    }

    fn weighted(&self, entries: &[(TokenId, f64)]) -> StepDistribution<f64> {
        let mut w = vec![0.0; self.vocab.len()];
        for &(id, v) in entries {
            w[id] += v;
        }
        StepDistribution::from_weights(w).expect("the centre token has weight one")
    }

    fn steps(&self, enc: &EncodedNumber, target: f64, s: f64) -> Vec<StepDistribution<f64>> {
        let n = self.vocab.len();
        let mut steps = vec![StepDistribution::one_hot(n, self.id("["))];

        let sign = self.id(enc.sign_token());
        let other = self.id(if enc.is_negative() { "+" } else { "-" });
        let flip = if s > 0.0 && target != 0.0 {
            (0.5 * erfc(target.abs() / (s * std::f64::consts::SQRT_2))).min(0.499)
        } else {
            0.0
        };
        steps.push(self.weighted(&[(sign, 1.0 - flip), (other, flip)]));

        let k = enc.exponent();
        let tau = if target != 0.0 {
            (1.0 + s / target.abs()).log10()
        } else {
            0.0
        };
        let mut exp_w = vec![(self.id(&exponent_token(k)), 1.0)];
        if tau > 0.0 {
            for kk in [k - 1, k + 1] {
                if (self.k_min..=self.k_max).contains(&kk) {
                    let d = (kk - k) as f64;
                    exp_w.push((
                        self.id(&exponent_token(kk)),
                        off_centre((-d * d / (2.0 * tau * tau)).exp()),
                    ));
                }
            }
        }
        steps.push(self.weighted(&exp_w));

        for (j, &digit) in enc.mantissa().iter().enumerate() {
            let place = 10f64.powi(k - j as i32);
            let lowest = if j == 0 && !enc.is_zero() { 1 } else { 0 };
            let mut w = Vec::with_capacity(10);
            for c in lowest..10u8 {
                let id = self.id(&c.to_string());
                if c == digit {
                    w.push((id, 1.0));
                } else if s > 0.0 {
                    let d = (c as f64 - digit as f64) * place / s;
                    w.push((id, off_centre((-0.5 * d * d).exp())));
                }
            }
            steps.push(self.weighted(&w));
        }
        steps.push(StepDistribution::one_hot(n, self.id("]")));
        steps
    }

    fn text_of(&self, ids: &[TokenId]) -> (Vec<String>, String) {
        let tokens: Vec<String> = ids
            .iter()
            .map(|&i| self.vocab.token(i).unwrap_or("<unk>").to_string())
            .collect();
        let inner: Vec<&str> = tokens
            .iter()
            .map(String::as_str)
            .filter(|t| !matches!(*t, "[" | "]" | "</s>"))
            .collect();
        (tokens.clone(), format!("[{}]", inner.join(" ")))
    }

    pub fn handle(&self, req: &PredictRequest) -> Result<PredictReply, MockError> {
        let decode = req.decode.clone().unwrap_or_else(|| self.default_decode.clone());
        decode.validate().map_err(|e| MockError::new(400, e))?;
        let q = self.query(&req.metadata, &req.x, req.gamma)?;
        let end = self.vocab.end_id();
        let max_len = req.gamma + 5;
        let seed = decode.seed.unwrap_or(0);
        let ids = match decode.strategy {
            DecodeStrategy::Greedy => greedy_decode(&q.source, end, max_len),
            DecodeStrategy::Beam => beam_decode(&q.source, decode.width.unwrap_or(3), end, max_len)
                .into_iter()
                .next()
                .map(|h| h.ids)
                .unwrap_or_default(),
            DecodeStrategy::TopK => sample_decode(
                &q.source,
                SamplingStrategy::TopK(decode.k.unwrap_or(1)),
                seed,
                end,
                max_len,
            ),
            DecodeStrategy::TopP => sample_decode(
                &q.source,
                SamplingStrategy::TopP(decode.p.unwrap_or(1.0)),
                seed,
                end,
                max_len,
            ),
            DecodeStrategy::Temperature => sample_decode(
                &q.source,
                SamplingStrategy::Temperature(decode.t.unwrap_or(1.0)),
                seed,
                end,
                max_len,
            ),
        };
        let (tokens, raw_text) = self.text_of(&ids);
        let y: f64 = parse_fitness(&raw_text).map_err(|e| MockError::new(422, e.to_string()))?;

        let beam_values: Vec<f64> = beam_decode(&q.source, BEAM_STD_WIDTH, end, max_len)
            .iter()
            .filter_map(|h| parse_fitness::<f64>(&self.text_of(&h.ids).1).ok())
            .collect();
        let dists = crate::token::decode::trace(&q.source, &ids);
        let payload = 1..(ids.len().min(req.gamma + 3));
        let uncertainty = uncertainty_scores(&dists[payload.clone()], &ids[payload], Some(&beam_values))
            .map_err(|e| MockError::new(500, e.to_string()))?;

        let step_probs = req.return_probs.then(|| {
            dists
                .iter()
                .map(|d| {
                    d.ranked()
                        .into_iter()
                        .take(req.top_k_probs.max(1))
                        .map(|id| ProbEntry {
                            token: self.vocab.token(id).unwrap_or("<unk>").to_string(),
                            p: d.prob(id),
                        })
                        .collect()
                })
                .collect()
        });
        Ok(PredictReply {
            y,
            raw_text,
            tokens: Some(tokens),
            step_probs,
            uncertainty: Some(uncertainty),
        })
    }
}

fn error_response(e: MockError) -> Response {
    let status = StatusCode::from_u16(e.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (
        status,
        Json(ErrorReply {
            error: e.message,
            status: Some(e.status),
        }),
    )
        .into_response()
}

async fn predict(State(model): State<Arc<MockModel>>, body: Bytes) -> Response {
    let req: PredictRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(MockError::new(400, format!("malformed request: {e}"))),
    };
    match model.handle(&req) {
        Ok(reply) => Json(reply).into_response(),
        Err(e) => error_response(e),
    }
}

async fn predict_batch(State(model): State<Arc<MockModel>>, body: Bytes) -> Response {
    let req: BatchRequest = match serde_json::from_slice(&body) {
        Ok(r) => r,
        Err(e) => return error_response(MockError::new(400, format!("malformed request: {e}"))),
    };
    let items = req
        .items
        .iter()
        .map(|r| match model.handle(r) {
            Ok(reply) => BatchItem::Ok(reply),
            Err(e) => BatchItem::Err(ErrorReply {
                error: e.message,
                status: Some(e.status),
            }),
        })
        .collect();
    Json(BatchReply { items }).into_response()
}

async fn health(State(model): State<Arc<MockModel>>) -> Json<HealthReply> {
    Json(HealthReply {
        status: "ok".into(),
        model: model.name(),
    })
}

pub fn router(model: Arc<MockModel>) -> Router {
    Router::new()
        .route("/predict", post(predict))
        .route("/predict_batch", post(predict_batch))
        .route("/health", get(health))
        .with_state(model)
}

/// A running mock server on a background thread; stops on drop.
pub struct MockServer {
    addr: SocketAddr,
    shutdown: Option<oneshot::Sender<()>>,
    thread: Option<JoinHandle<()>>,
}

impl MockServer {
    /// Binds `addr` (use port 0 for an ephemeral port) and starts serving.
    pub fn start(model: MockModel, addr: &str) -> Result<Self, SurrogateError> {
        let listener = TcpListener::bind(addr).map_err(|e| match e.kind() {
            std::io::ErrorKind::AddrInUse => SurrogateError::PortInUse(addr.to_string()),
            _ => SurrogateError::Other(format!("bind {addr}: {e}")),
        })?;
        listener
            .set_nonblocking(true)
            .map_err(|e| SurrogateError::Other(e.to_string()))?;
        let local = listener
            .local_addr()
            .map_err(|e| SurrogateError::Other(e.to_string()))?;
        let runtime = tokio::runtime::Builder::new_multi_thread()
            .worker_threads(2)
            .enable_all()
            .build()
            .map_err(|e| SurrogateError::Other(e.to_string()))?;
        let (tx, rx) = oneshot::channel::<()>();
        let app = router(Arc::new(model));
        let thread = std::thread::spawn(move || {
            runtime.block_on(async move {
                let listener =
                    tokio::net::TcpListener::from_std(listener).expect("listener registers with the runtime");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = rx.await;
                    })
                    .await
                    .expect("server loop");
            });
        });
        Ok(Self {
            addr: local,
            shutdown: Some(tx),
            thread: Some(thread),
        })
    }

    pub fn addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn url(&self) -> String {
        format!("http://{}", self.addr)
    }

    /// Blocks until the server stops (it runs until the process ends or
    /// [`MockServer::stop`] is called from elsewhere).
    pub fn wait(mut self) {
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }

    pub fn stop(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        if let Some(tx) = self.shutdown.take() {
            let _ = tx.send(());
        }
        if let Some(t) = self.thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::fitness_text;

    fn sphere() -> TaskSpec {
        TaskSpec::bbob("Sphere", 0, 4).unwrap()
    }

    fn request(task: &TaskSpec, x: Vec<f64>) -> PredictRequest {
        PredictRequest {
            metadata: render_metadata(&task.metadata, PromptTemplate::Small),
            x,
            gamma: 10,
            template: PromptTemplate::Small,
            decode: Some(DecodeSpec::greedy()),
            return_probs: true,
            top_k_probs: 3,
        }
    }

    #[test]
    fn exact_mode_returns_encoded_truth() {
        let t = sphere();
        let m = MockModel::new(std::slice::from_ref(&t), Noise::None, 0);
        let x = vec![0.5, 1.0, -2.0, 3.0];
        let reply = m.handle(&request(&t, x.clone())).unwrap();
        let truth = t.evaluate(&x).unwrap();
        let cfg = CodecConfig::new(10, -20, 20).unwrap();
        assert_eq!(reply.raw_text, fitness_text(truth, &cfg).unwrap());
        let u = reply.uncertainty.unwrap();
        assert_eq!((u.nll, u.ent, u.imsp, u.itpm), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(reply.step_probs.unwrap().len(), reply.tokens.unwrap().len());
    }

    #[test]
    fn errors_by_status() {
        let t = sphere();
        let m = MockModel::new(std::slice::from_ref(&t), Noise::None, 0);
        let mut r = request(&t, vec![0.0; 3]);
        assert_eq!(m.handle(&r).unwrap_err().status, 400);
        r.x = vec![0.0; 4];
        r.metadata = "nope".into();
        assert_eq!(m.handle(&r).unwrap_err().status, 404);
    }

    #[test]
    fn noise_is_reproducible_and_greedy_hits_target() {
        let t = sphere();
        let m = MockModel::new(std::slice::from_ref(&t), Noise::Gaussian { sigma_rel: 0.1 }, 7);
        let r = request(&t, vec![1.0, 1.0, 1.0, 1.0]);
        let a = m.handle(&r).unwrap();
        assert_eq!(a, m.handle(&r).unwrap());
        let q = m.query(&r.metadata, &r.x, 10).unwrap();
        let cfg = CodecConfig::new(10, -20, 20).unwrap();
        assert_eq!(a.raw_text, fitness_text(q.target, &cfg).unwrap());
        assert!(a.uncertainty.unwrap().ent > 0.0);
    }
}
