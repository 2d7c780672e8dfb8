//! Task metadata and the prompt templates fed to the meta-surrogate.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::sne::{self, CodecConfig, CodecError, EncodedNumber};

pub const START_MARKER: &str = "<s>";
pub const END_MARKER: &str = "</s>";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PromptError {
    #[error("metadata declares dim={declared} but x has {actual} components")]
    MismatchedDim { declared: usize, actual: usize },
    #[error("model output is not a bracketed SNE scalar: {0:?}")]
    UnparseableOutput(String),
    #[error(transparent)]
    Codec(#[from] CodecError),
}

/// Descriptive fields that identify one optimization task.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TaskMetadata {
    pub dataset: String,
    pub function_id: String,
    pub function_name: String,
    pub instance: u32,
    /// Rendered in order; a pair with an empty label renders as its value alone,
    /// otherwise as `label=value`.
    pub key_features: Vec<(String, String)>,
    pub dim: usize,
}

impl TaskMetadata {
    /// Metadata in the layout used for the BBOB suite: the dataset name and the
    /// instance are the two key features.
    pub fn benchmark(dataset: &str, function_id: &str, function_name: &str, instance: u32, dim: usize) -> Self {
        Self {
            dataset: dataset.to_string(),
            function_id: function_id.to_string(),
            function_name: function_name.to_string(),
            instance,
            key_features: vec![
                (String::new(), dataset.to_string()),
                ("instance".to_string(), instance.to_string()),
            ],
            dim,
        }
    }

    fn feature_values(&self) -> Vec<String> {
        self.key_features
            .iter()
            .map(|(label, value)| {
                if label.is_empty() {
                    value.clone()
                } else {
                    format!("{label}={value}")
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PromptTemplate {
    Large,
    Middle,
    #[default]
    Small,
    Base,
}

impl PromptTemplate {
    pub const ALL: [PromptTemplate; 4] = [Self::Large, Self::Middle, Self::Small, Self::Base];

    pub fn name(self) -> &'static str {
        match self {
            Self::Large => "large",
            Self::Middle => "middle",
            Self::Small => "small",
            Self::Base => "base",
        }
    }
}

impl fmt::Display for PromptTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for PromptTemplate {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "large" => Ok(Self::Large),
            "middle" => Ok(Self::Middle),
            "small" => Ok(Self::Small),
            "base" => Ok(Self::Base),
            other => Err(format!("unknown prompt template {other:?}")),
        }
    }
}

const SMALL_PREAMBLE: &str = "You are a many-task surrogate model, predict fitness given m and pop;";

const MIDDLE_PREAMBLE: &str = "You are a many-task surrogate model. Given (1) m: metadata describing \
the function and its dimension.(2) pop: a vector of floats (solution), encoded in base-10 scientific \
tokens. y: the fitness value. Predict y given m and pop;";

const LARGE_PREAMBLE: &str = "\
You are an expert many-task surrogate model based on a large language model (LLM).
Your task is to predict the fitness value y of an individual x for a given black box function, described by metadata m.
Each sample consists of:
- m: textual metadata describing the target function and its dimensionality.
- x: a sequence of float numbers representing an individual solution, tokenized in a digit wise manner using a base 10 scientific encoding.
- y: the scalar fitness value, also encoded in base 10 scientific notation.
Data:
m: The ID of this black-box function is <function_id>, the human-assigned name is <function_name>, key feature 1 is <key feature 1> | key feature 2 is <key feature 2> | ... | the dimensionality of decision variables is dim=<D>.
x: [{x_1}, {x_2}, ..., {x_d}] -> encoded as: [<10^exp> d_1 d_2 ... d_k]
y: target fitness value (to be predicted)
Examples:
m: The ID of this black-box function is 2, the human-assigned name is Sphere, key feature 1 is \"\", the dimensionality of decision variables is dimension=4.
x: [-2.065349139, -2.570456278, 3.38108745, -3.38108745]
-> Encoded as:
[
 - <10^0> 2 0 6 5 3 4 9 1 3 9,
 - <10^0> 2 5 7 0 4 5 6 2 7 8,
 + <10^0> 3 3 8 1 0 8 7 4 5 0,
 + <10^0> 3 3 8 1 0 8 7 4 5 0
]
y: [+ <10^3> 1 7 4 0 0 5 0 8 4 3]
Given m and x (encoded), predict y (fitness value) as accurately as possible.
Now, predict the fitness for the following sample:
Data
";

fn feature_clauses(meta: &TaskMetadata, quote: bool, braces: bool) -> Vec<String> {
    meta.feature_values()
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let v = wrap(v, quote, braces);
            format!("key feature {} is {v}", i + 1)
        })
        .collect()
}

fn wrap(v: &str, quote: bool, braces: bool) -> String {
    match (quote, braces) {
        (true, _) => format!("\"{v}\""),
        (false, true) => format!("{{{v}}}"),
        (false, false) => v.to_string(),
    }
}

// "a, b, feat1 | feat2 | tail"
fn join_fields(head: Vec<String>, features: Vec<String>, tail: String) -> String {
    let mut s = head.join(", ");
    s.push_str(", ");
    let mut rest = features;
    rest.push(tail);
    s.push_str(&rest.join(" | "));
    s
}

fn id_first_sentence(meta: &TaskMetadata, quote: bool) -> String {
    let head = vec![
        format!(
            "The ID of this black-box function is {}",
            wrap(&meta.function_id, quote, false)
        ),
        format!("the human-assigned name is {}", wrap(&meta.function_name, quote, false)),
    ];
    let tail = format!(
        "the dimensionality of decision variables is dim={}.",
        wrap(&meta.dim.to_string(), quote, false)
    );
    join_fields(head, feature_clauses(meta, quote, false), tail)
}

/// Renders the metadata string `m` for one template.
pub fn render_metadata(meta: &TaskMetadata, tpl: PromptTemplate) -> String {
    match tpl {
        PromptTemplate::Small => {
            let head = vec![
                format!("function name is {{{}}}", meta.function_name),
                format!("function ID is {{{}}}", meta.function_id),
            ];
            let tail = format!("the dimensionality is dim={{{}}}.", meta.dim);
            format!(
                "{SMALL_PREAMBLE} {}",
                join_fields(head, feature_clauses(meta, false, true), tail)
            )
        }
        PromptTemplate::Base => format!(
            "{}, instance=\"{}\", \"{}\", dimension=\"{}\".",
            meta.dataset, meta.instance, meta.function_name, meta.dim
        ),
        PromptTemplate::Middle => {
            format!("{MIDDLE_PREAMBLE} m: {}", id_first_sentence(meta, true))
        }
        PromptTemplate::Large => {
            format!("{LARGE_PREAMBLE}m: \"{}\"", id_first_sentence(meta, false))
        }
    }
}

/// Full model input: rendered metadata followed by the encoded decision vector.
pub fn build_input<T: Scalar>(
    meta: &TaskMetadata,
    x: &[T],
    cfg: &CodecConfig,
    tpl: PromptTemplate,
) -> Result<String, PromptError> {
    if meta.dim != x.len() {
        return Err(PromptError::MismatchedDim {
            declared: meta.dim,
            actual: x.len(),
        });
    }
    let encoded = sne::encode_vector(x, cfg)?;
    Ok(format!("{}; x={encoded}", render_metadata(meta, tpl)))
}

/// Whitespace-delimited token count, the metadata length used for token budgets.
pub fn whitespace_len(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Bracketed target text for a fitness value, e.g. `[+ <10^3> 1 7 4 0]`.
pub fn fitness_text<T: Scalar>(y: T, cfg: &CodecConfig) -> Result<String, CodecError> {
    Ok(bracket(&sne::encode_scalar(y, cfg)?))
}

pub fn bracket(e: &EncodedNumber) -> String {
    format!("[{e}]")
}

/// Parses generated fitness text, tolerating start/end markers and padding.
pub fn parse_fitness_encoded(text: &str) -> Result<EncodedNumber, PromptError> {
    let unparseable = || PromptError::UnparseableOutput(text.to_string());
    let cleaned = text
        .replace(START_MARKER, " ")
        .replace(END_MARKER, " ")
        .replace("<pad>", " ");
    let symbols = sne::split_symbols(&cleaned).map_err(|_| unparseable())?;
    let inner: &[&str] = match symbols.as_slice() {
        ["[", inner @ .., "]"] => inner,
        _ => return Err(unparseable()),
    };
    EncodedNumber::from_symbols(inner).map_err(|_| unparseable())
}

pub fn parse_fitness<T: Scalar>(text: &str) -> Result<T, PromptError> {
    parse_fitness_encoded(text).map(|e| e.decode())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sphere4() -> TaskMetadata {
        TaskMetadata::benchmark("BBOB", "F1", "Sphere", 0, 4)
    }

    #[test]
    fn small_template_reference() {
        assert_eq!(
            render_metadata(&sphere4(), PromptTemplate::Small),
            "You are a many-task surrogate model, predict fitness given m and pop; \
function name is {Sphere}, function ID is {F1}, key feature 1 is {BBOB} | \
key feature 2 is {instance=0} | the dimensionality is dim={4}."
        );
    }

    #[test]
    fn base_template_reference() {
        assert_eq!(
            render_metadata(&sphere4(), PromptTemplate::Base),
            "BBOB, instance=\"0\", \"Sphere\", dimension=\"4\"."
        );
    }

    #[test]
    fn middle_and_large_fill_slots() {
        let m = render_metadata(&sphere4(), PromptTemplate::Middle);
        assert!(m.ends_with(
            "m: The ID of this black-box function is \"F1\", the human-assigned name is \"Sphere\", \
key feature 1 is \"BBOB\" | key feature 2 is \"instance=0\" | \
the dimensionality of decision variables is dim=\"4\"."
        ));
        let l = render_metadata(&sphere4(), PromptTemplate::Large);
        assert!(l.starts_with("You are an expert many-task surrogate model"));
        assert!(l.ends_with(
            "m: \"The ID of this black-box function is F1, the human-assigned name is Sphere, \
key feature 1 is BBOB | key feature 2 is instance=0 | \
the dimensionality of decision variables is dim=4.\""
        ));
    }

    #[test]
    fn empty_features() {
        let mut meta = sphere4();
        meta.key_features.clear();
        assert_eq!(
            render_metadata(&meta, PromptTemplate::Small),
            "You are a many-task surrogate model, predict fitness given m and pop; \
function name is {Sphere}, function ID is {F1}, the dimensionality is dim={4}."
        );
    }

    #[test]
    fn input_composition() {
        let cfg = CodecConfig::with_gamma(10).unwrap();
        let x = [-2.065349139, -2.570456278, -3.38108745, 4.412265239];
        let input = build_input(&sphere4(), &x, &cfg, PromptTemplate::Small).unwrap();
        assert!(input.ends_with(
            "dim={4}.; x=[- <10^0> 2 0 6 5 3 4 9 1 3 9, - <10^0> 2 5 7 0 4 5 6 2 7 8, \
- <10^0> 3 3 8 1 0 8 7 4 5 0, + <10^0> 4 4 1 2 2 6 5 2 3 9]"
        ));
        let err = build_input(&sphere4(), &x[..3], &cfg, PromptTemplate::Small).unwrap_err();
        assert_eq!(err, PromptError::MismatchedDim { declared: 4, actual: 3 });

        let one = TaskMetadata::benchmark("BBOB", "F1", "Sphere", 0, 1);
        let c4 = CodecConfig::with_gamma(4).unwrap();
        assert_eq!(
            build_input(&one, &[0.0], &c4, PromptTemplate::Small).unwrap(),
            format!("{}; x=[+ <10^0> 0 0 0 0]", render_metadata(&one, PromptTemplate::Small))
        );
    }

    #[test]
    fn parse_outputs() {
        assert_eq!(
            parse_fitness::<f64>("[+ <10^3> 1 7 4 0 0 5 0 8 4 3]").unwrap(),
            1740.050843
        );
        assert_eq!(
            parse_fitness::<f64>("<s> [+ <10^3> 1 7 4 0 0 5 0 8 4 3] </s>").unwrap(),
            1740.050843
        );
        assert_eq!(parse_fitness::<f64>("[+ <10^0> 0 0 0 0]").unwrap(), 0.0);
        assert!(matches!(
            parse_fitness::<f64>("garbage"),
            Err(PromptError::UnparseableOutput(_))
        ));
        assert!(parse_fitness::<f64>("[+ <10^3> 1 7 4").is_err());
        assert!(parse_fitness::<f64>("[+ <10^3> 1, 7]").is_err());
    }

    #[test]
    fn template_lengths_are_ordered() {
        let meta = sphere4();
        let lens: Vec<usize> = [
            PromptTemplate::Base,
            PromptTemplate::Small,
            PromptTemplate::Middle,
            PromptTemplate::Large,
        ]
        .iter()
        .map(|&t| whitespace_len(&render_metadata(&meta, t)))
        .collect();
        assert!(lens.windows(2).all(|w| w[0] < w[1]), "{lens:?}");
    }

    #[test]
    fn fields_appear_once() {
        let meta = TaskMetadata::benchmark("CEC", "F7", "Step_Ellipsoidal", 3, 15);
        let small = render_metadata(&meta, PromptTemplate::Small);
        for needle in ["{Step_Ellipsoidal}", "{F7}", "{CEC}", "{instance=3}", "{15}"] {
            assert_eq!(small.matches(needle).count(), 1, "{needle}");
        }
        let base = render_metadata(&meta, PromptTemplate::Base);
        for needle in ["CEC", "\"3\"", "\"Step_Ellipsoidal\"", "\"15\""] {
            assert_eq!(base.matches(needle).count(), 1, "{needle}");
        }
    }
}
