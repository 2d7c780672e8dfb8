use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::bbob::BbobFunction;
use super::manipulator::{manipulator_eval, manipulator_params, ManipulatorParams, ParamRect, MANIPULATOR_DATASET};
use super::ProblemError;
use crate::prompt::TaskMetadata;

pub const DEFAULT_BOUND: f64 = 5.0;
pub const MCF_DIMS: [usize; 4] = [5, 10, 15, 20];
pub const MANIPULATOR_JOINTS: usize = 20;

/// Which objective a task evaluates; enough to rebuild it exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TaskSource {
    Bbob {
        name: String,
        instance: u32,
        dim: usize,
    },
    Manipulator {
        index: usize,
        length: f64,
        phi_max: f64,
        joints: usize,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    #[serde(flatten)]
    pub source: TaskSource,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

#[derive(Debug, Clone)]
pub enum Objective {
    Bbob(Arc<BbobFunction<f64>>),
    Manipulator(ManipulatorParams),
}

#[derive(Debug, Clone)]
pub struct TaskSpec {
    pub metadata: TaskMetadata,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub objective: Objective,
}

impl TaskSpec {
    pub fn bbob(name: &str, instance: u32, dim: usize) -> Result<Self, ProblemError> {
        let f = BbobFunction::new(name, instance, dim)?;
        Ok(Self {
            metadata: TaskMetadata::benchmark("BBOB", &f.function_id(), name, instance, dim),
            lo: vec![-DEFAULT_BOUND; dim],
            hi: vec![DEFAULT_BOUND; dim],
            objective: Objective::Bbob(Arc::new(f)),
        })
    }

    /// Task `index` (0-based) of the manipulator family.
    pub fn manipulator(index: usize, params: ManipulatorParams) -> Self {
        let d = params.joints;
        Self {
            metadata: TaskMetadata::benchmark(
                MANIPULATOR_DATASET,
                &index.to_string(),
                &format!("task{}", index + 1),
                0,
                d,
            ),
            lo: vec![0.0; d],
            hi: vec![1.0; d],
            objective: Objective::Manipulator(params),
        }
    }

    pub fn from_manifest(entry: &ManifestEntry) -> Result<Self, ProblemError> {
        let mut task = match &entry.source {
            TaskSource::Bbob { name, instance, dim } => Self::bbob(name, *instance, *dim)?,
            TaskSource::Manipulator {
                index,
                length,
                phi_max,
                joints,
            } => Self::manipulator(*index, ManipulatorParams::new(*length, *phi_max, *joints)?),
        };
        let d = task.dim();
        if entry.lo.len() != d || entry.hi.len() != d {
            return Err(ProblemError::DimMismatch {
                expected: d,
                actual: entry.lo.len().min(entry.hi.len()),
            });
        }
        if entry.lo.iter().zip(&entry.hi).any(|(l, h)| !(l < h)) {
            return Err(ProblemError::InvalidParams("bounds need lo < hi".into()));
        }
        task.lo = entry.lo.clone();
        task.hi = entry.hi.clone();
        Ok(task)
    }

    pub fn manifest(&self) -> ManifestEntry {
        let source = match &self.objective {
            Objective::Bbob(f) => TaskSource::Bbob {
                name: f.name().to_string(),
                instance: f.instance(),
                dim: f.dim(),
            },
            Objective::Manipulator(p) => TaskSource::Manipulator {
                index: self.metadata.function_id.parse().unwrap_or(0),
                length: p.length,
                phi_max: p.phi_max,
                joints: p.joints,
            },
        };
        ManifestEntry {
            source,
            lo: self.lo.clone(),
            hi: self.hi.clone(),
        }
    }

    pub fn dim(&self) -> usize {
        self.metadata.dim
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64, ProblemError> {
        match &self.objective {
            Objective::Bbob(f) => f.evaluate(x),
            Objective::Manipulator(p) => manipulator_eval(p, x),
        }
    }
}

pub fn eval_function(name: &str, instance: u32, dim: usize, x: &[f64]) -> Result<f64, ProblemError> {
    BbobFunction::<f64>::new(name, instance, dim)?.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum McfSuite {
    #[serde(rename = "MCF1")]
    Mcf1,
    #[serde(rename = "MCF2")]
    Mcf2,
    #[serde(rename = "MCF3")]
    Mcf3,
}

impl McfSuite {
    pub const ALL: [McfSuite; 3] = [Self::Mcf1, Self::Mcf2, Self::Mcf3];

    /// Function of each block of four tasks (dims 5, 10, 15, 20).
    pub fn functions(self) -> [&'static str; 6] {
        match self {
            Self::Mcf1 => [
                "Buche_Rastrigin",
                "Rosenbrock_rotated",
                "Step_Ellipsoidal",
                "Bent_Cigar",
                "Rosenbrock_original",
                "Rastrigin_F15",
            ],
            Self::Mcf2 => [
                "Sharp_Ridge",
                "Buche_Rastrigin",
                "Different_Powers",
                "Sharp_Ridge",
                "Schaffers",
                "Gallagher_21Peaks",
            ],
            Self::Mcf3 => [
                "Step_Ellipsoidal",
                "Composite_Grie_rosen",
                "Different_Powers",
                "Schwefel",
                "Gallagher_101Peaks",
                "Lunacek_bi_Rastrigin",
            ],
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Mcf1 => "MCF1",
            Self::Mcf2 => "MCF2",
            Self::Mcf3 => "MCF3",
        }
    }
}

impl fmt::Display for McfSuite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for McfSuite {
    type Err = ProblemError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_uppercase().as_str() {
            "MCF1" => Ok(Self::Mcf1),
            "MCF2" => Ok(Self::Mcf2),
            "MCF3" => Ok(Self::Mcf3),
            _ => Err(ProblemError::UnknownSuite(s.to_string())),
        }
    }
}

/// The 24 tasks of a suite, Task1 first.
pub fn make_mcf_suite(which: McfSuite) -> Vec<TaskSpec> {
    which
        .functions()
        .iter()
        .flat_map(|&name| {
            MCF_DIMS
                .iter()
                .map(move |&d| TaskSpec::bbob(name, 0, d).expect("suite functions exist"))
        })
        .collect()
}

pub fn make_manipulator_tasks(nt: usize, seed: u64) -> Vec<TaskSpec> {
    make_manipulator_tasks_in(nt, seed, &ParamRect::default(), MANIPULATOR_JOINTS)
}

pub fn make_manipulator_tasks_in(nt: usize, seed: u64, rect: &ParamRect, joints: usize) -> Vec<TaskSpec> {
    manipulator_params(nt, seed, rect)
        .into_iter()
        .enumerate()
        .map(|(i, (l, phi))| {
            TaskSpec::manipulator(
                i,
                ManipulatorParams::new(l, phi, joints).expect("rectangle is positive"),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{render_metadata, PromptTemplate};

    #[test]
    fn suite_layout() {
        for which in McfSuite::ALL {
            let tasks = make_mcf_suite(which);
            assert_eq!(tasks.len(), 24);
            for (i, t) in tasks.iter().enumerate() {
                assert_eq!(t.metadata.function_name, which.functions()[i / 4]);
                assert_eq!(t.dim(), MCF_DIMS[i % 4]);
            }
        }
        assert_eq!("mcf2".parse::<McfSuite>().unwrap(), McfSuite::Mcf2);
    }

    #[test]
    fn manifest_roundtrip() {
        let mut tasks = make_mcf_suite(McfSuite::Mcf3);
        tasks.extend(make_manipulator_tasks(3, 1));
        for t in &tasks {
            let m = t.manifest();
            let json = serde_json::to_string(&m).unwrap();
            let back = TaskSpec::from_manifest(&serde_json::from_str(&json).unwrap()).unwrap();
            assert_eq!(back.metadata, t.metadata);
            let x: Vec<f64> = t.lo.iter().zip(&t.hi).map(|(l, h)| 0.3 * l + 0.7 * h).collect();
            assert_eq!(back.evaluate(&x).unwrap(), t.evaluate(&x).unwrap());
        }
    }

    #[test]
    fn manipulator_metadata() {
        let t = &make_manipulator_tasks(11, 0)[10];
        assert_eq!(
            render_metadata(&t.metadata, PromptTemplate::Small),
            "You are a many-task surrogate model, predict fitness given m and pop; function name is {task11}, function ID is {10}, key feature 1 is {Planar_Kinematic_Arm_Control} | key feature 2 is {instance=0} | the dimensionality is dim={20}."
        );
    }
}
