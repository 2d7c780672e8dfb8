use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{par_map, read_file, write_file, HarnessError};
use crate::problems::{lhs_sample, ManifestEntry, TaskSpec};
use crate::prompt::{fitness_text, render_metadata, PromptTemplate, TaskMetadata};
use crate::seed::mix;
use crate::sne::{encode_vector, CodecConfig};
use crate::surrogate::{RbfnBank, RbfnConfig, RbfnModel};
use crate::token::Vocabulary;

pub const DATASET_FILE: &str = "dataset.jsonl";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const VOCAB_FILE: &str = "vocab.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    /// Index into the manifest's task list.
    pub task_id: usize,
    pub metadata_text: String,
    pub x: Vec<f64>,
    pub y: f64,
    pub x_text: String,
    pub y_text: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodeFailure {
    pub task_id: usize,
    pub index: usize,
    pub y: f64,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetOptions {
    pub suite: String,
    pub samples_per_task: usize,
    pub train_ratio: (usize, usize),
    pub gamma: usize,
    pub template: PromptTemplate,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub options: DatasetOptions,
    pub tasks: Vec<ManifestEntry>,
    pub n_records: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub encode_failures: Vec<EncodeFailure>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: DatasetManifest,
    pub records: Vec<DatasetRecord>,
}

/// Train counts per task for a `train:test` ratio, rounding the cumulative
/// record count so the totals match the ratio as closely as possible.
pub fn split_counts(sizes: &[usize], (a, b): (usize, usize)) -> Vec<usize> {
    let total = a + b;
    let round = |n: usize| (2 * n * a + total) / (2 * total);
    let mut seen = 0;
    sizes
        .iter()
        .map(|&n| {
            let before = round(seen);
            seen += n;
            round(seen) - before
        })
        .collect()
}

struct TaskSamples {
    ok: Vec<(usize, Vec<f64>, f64, String, String)>,
    failures: Vec<EncodeFailure>,
}

fn sample_task(
    t: usize,
    task: &TaskSpec,
    opts: &DatasetOptions,
    cfg: &CodecConfig,
) -> Result<TaskSamples, HarnessError> {
    let xs = lhs_sample(opts.samples_per_task, &task.lo, &task.hi, mix(opts.seed, t as u64));
    let mut out = TaskSamples {
        ok: Vec::with_capacity(xs.len()),
        failures: Vec::new(),
    };
    for (i, x) in xs.into_iter().enumerate() {
        let y = task.evaluate(&x)?;
        let texts = encode_vector(&x, cfg).and_then(|xt| Ok((xt, fitness_text(y, cfg)?)));
        match texts {
            Ok((xt, yt)) => out.ok.push((i, x, y, xt, yt)),
            Err(e) => out.failures.push(EncodeFailure {
                task_id: t,
                index: i,
                y,
                error: e.to_string(),
            }),
        }
    }
    Ok(out)
}

/// Latin hypercube samples of every task, evaluated with the true objective,
/// encoded and split train/test by a seeded per-task shuffle.
pub fn generate_dataset(tasks: &[TaskSpec], opts: &DatasetOptions) -> Result<Dataset, HarnessError> {
    let cfg = CodecConfig::with_gamma(opts.gamma)?;
    let sampled = par_map(tasks, |t, task| sample_task(t, task, opts, &cfg));
    let sampled: Vec<TaskSamples> = sampled.into_iter().collect::<Result<_, _>>()?;
    let n_train = split_counts(
        &sampled.iter().map(|s| s.ok.len()).collect::<Vec<_>>(),
        opts.train_ratio,
    );

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (t, (samples, train)) in sampled.into_iter().zip(n_train).enumerate() {
        let metadata_text = render_metadata(&tasks[t].metadata, opts.template);
        let mut order: Vec<usize> = (0..samples.ok.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(mix(mix(opts.seed, t as u64), 0x5_9117)));
        let mut split = vec![Split::Test; order.len()];
        for &k in &order[..train] {
            split[k] = Split::Train;
        }
        for ((_, x, y, x_text, y_text), split) in samples.ok.into_iter().zip(split) {
            records.push(DatasetRecord {
                task_id: t,
                metadata_text: metadata_text.clone(),
                x,
                y,
                x_text,
                y_text,
                split,
            });
        }
        failures.extend(samples.failures);
    }
    let n_train = records.iter().filter(|r| r.split == Split::Train).count();
    Ok(Dataset {
        manifest: DatasetManifest {
            options: opts.clone(),
            tasks: tasks.iter().map(TaskSpec::manifest).collect(),
            n_records: records.len(),
            n_train,
            n_test: records.len() - n_train,
            encode_failures: failures,
        },
        records,
    })
}

impl Dataset {
    pub fn tasks(&self) -> Result<Vec<TaskSpec>, HarnessError> {
        self.manifest
            .tasks
            .iter()
            .map(|e| TaskSpec::from_manifest(e).map_err(HarnessError::from))
            .collect()
    }

    pub fn task_split(&self, task: usize, split: Split) -> (Vec<Vec<f64>>, Vec<f64>) {
        self.records
            .iter()
            .filter(|r| r.task_id == task && r.split == split)
            .map(|r| (r.x.clone(), r.y))
            .unzip()
    }

    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&serde_json::to_string(r).expect("records serialize"));
            s.push('\n');
        }
        s
    }

    /// Writes `dataset.jsonl`, `manifest.json` and the shared `vocab.json`.
    pub fn write(&self, dir: &Path) -> Result<(), HarnessError> {
        write_file(&dir.join(DATASET_FILE), &self.to_jsonl())?;
        let manifest = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_file(&dir.join(MANIFEST_FILE), &(manifest + "\n"))?;
        let cfg = CodecConfig::with_gamma(self.manifest.options.gamma)?;
        write_file(&dir.join(VOCAB_FILE), &(Vocabulary::for_codec(&cfg).to_json() + "\n"))
    }

    pub fn read(dir: &Path) -> Result<Self, HarnessError> {
        let mpath = dir.join(MANIFEST_FILE);
        let manifest: DatasetManifest =
            serde_json::from_str(&read_file(&mpath)?).map_err(|e| HarnessError::parse(&mpath, e))?;
        let dpath = dir.join(DATASET_FILE);
        let records = read_file(&dpath)?
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| HarnessError::parse(&dpath, format!("line {}: {e}", i + 1)))
            })
            .collect::<Result<Vec<DatasetRecord>, _>>()?;
        if let Some(r) = records.iter().find(|r| r.task_id >= manifest.tasks.len()) {
            return Err(HarnessError::parse(
                &dpath,
                format!("task_id {} not in manifest", r.task_id),
            ));
        }
        Ok(Self { manifest, records })
    }
}

/// One RBF network per task, fitted on the train split.
pub fn fit_rbfn_bank(ds: &Dataset, cfg: &RbfnConfig) -> Result<RbfnBank, HarnessError> {
    let tasks = ds.tasks()?;
    let fitted = par_map(&tasks, |t, task| {
        let (xs, ys) = ds.task_split(t, Split::Train);
        crate::surrogate::rbfn_fit(&xs, &ys, cfg).map(|m| (task.metadata.clone(), m))
    });
    let entries = fitted.into_iter().collect::<Result<Vec<_>, _>>()?;
    Ok(RbfnBank::from_entries(entries))
}

#[derive(Serialize, Deserialize)]
struct BankEntry {
    metadata: TaskMetadata,
    model: RbfnModel<f64>,
}

pub fn write_rbfn_bank(bank: &RbfnBank, path: &Path) -> Result<(), HarnessError> {
    let entries: Vec<BankEntry> = bank
        .entries()
        .into_iter()
        .map(|(metadata, model)| BankEntry { metadata, model })
        .collect();
    write_file(path, &serde_json::to_string(&entries).expect("models serialize"))
}

pub fn read_rbfn_bank(path: &Path) -> Result<RbfnBank, HarnessError> {
    let entries: Vec<BankEntry> = serde_json::from_str(&read_file(path)?).map_err(|e| HarnessError::parse(path, e))?;
    Ok(RbfnBank::from_entries(
        entries.into_iter().map(|e| (e.metadata, e.model)).collect(),
    ))
}
