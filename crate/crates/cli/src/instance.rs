//! Instance file parsing.

use std::path::PathBuf;

use aisbound::gdof::{CertificateSpec, HalfPlane, LemmaConfig, Point};
use aisbound::{InstanceSource, LevelVector};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    PartitionDemo,
    TheoremVerify,
    AisOracle,
    Region,
    Certificate,
    Lemma1,
}

impl Kind {
    pub fn name(self) -> &'static str {
        match self {
            Kind::PartitionDemo => "partition-demo",
            Kind::TheoremVerify => "theorem-verify",
            Kind::AisOracle => "ais-oracle",
            Kind::Region => "region",
            Kind::Certificate => "certificate",
            Kind::Lemma1 => "lemma1",
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    schema_version: u32,
    kind: Kind,
    #[serde(default)]
    body: Option<serde_json::Value>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionBody {
    #[serde(default)]
    pub power: Option<f64>,
    #[serde(default)]
    pub pbar: Option<u64>,
    pub levels: LevelVector,
    /// Signals to tabulate; every signal of the layout when absent.
    #[serde(default)]
    pub values: Option<Vec<i64>>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_trials() -> usize {
    64
}

fn default_tolerance() -> f64 {
    0.15
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyBody {
    pub instance: InstanceSource,
    pub pbars: Vec<u64>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub cap: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    /// Allowed shortfall of the final normalized gap below the target.
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_draws() -> usize {
    1000
}

fn default_residual() -> f64 {
    0.2
}

fn default_ratio() -> f64 {
    3.0
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub pbars: Vec<u64>,
    #[serde(default = "default_residual")]
    pub max_residual: f64,
    #[serde(default = "default_ratio")]
    pub max_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AisBody {
    pub instance: InstanceSource,
    pub pbar: u64,
    #[serde(default = "default_draws")]
    pub draws: usize,
    /// Fixed offset added to the combined output.
    #[serde(default)]
    pub w: Option<i64>,
    /// Realization whose aligned set is measured; the all-zero input when absent.
    #[serde(default)]
    pub nu: Option<Vec<u64>>,
    #[serde(default)]
    pub pairs: bool,
    #[serde(default)]
    pub growth: Option<GrowthSpec>,
    #[serde(default)]
    pub cap: Option<u64>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub enum RegionSource {
    Builtin(String),
    HalfPlanes(Vec<HalfPlane>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionBody {
    pub region: RegionSource,
    /// Vertices the run must reproduce exactly.
    #[serde(default)]
    pub expect: Option<Vec<Point>>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateBody {
    pub certificate: CertificateSpec,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

fn default_lemma_trials() -> usize {
    32
}

fn default_violation() -> f64 {
    0.2
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepSpec {
    pub pbar: u64,
    pub joints: usize,
}

#[derive(Clone, Debug, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Lemma1Body {
    #[serde(default)]
    pub config: LemmaConfig,
    pub pbars: Vec<u64>,
    #[serde(default = "default_lemma_trials")]
    pub trials: usize,
    #[serde(default = "default_violation")]
    pub max_violation: f64,
    #[serde(default)]
    pub steps: Option<StepSpec>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Body {
    Partition(PartitionBody),
    Verify(VerifyBody),
    Ais(AisBody),
    Region(RegionBody),
    Certificate(CertificateBody),
    Lemma1(Lemma1Body),
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceFile {
    pub schema_version: u32,
    pub kind: Kind,
    pub body: Body,
}

fn json_error(e: serde_json::Error, what: &str) -> CliError {
    use serde_json::error::Category;
    match e.classify() {
        Category::Syntax | Category::Eof => CliError::Input(format!("malformed JSON in {what}: {e}")),
        Category::Data => CliError::Input(format!("schema violation in {what}: {e}")),
        Category::Io => CliError::Input(format!("cannot read {what}: {e}")),
    }
}

fn body<T: DeserializeOwned>(v: serde_json::Value) -> Result<T, CliError> {
    serde_json::from_value(v).map_err(|e| json_error(e, "body"))
}

pub fn parse(text: &str) -> Result<InstanceFile, CliError> {
    let raw: RawFile = serde_json::from_str(text).map_err(|e| json_error(e, "instance file"))?;
    if raw.schema_version != SCHEMA_VERSION {
        return Err(CliError::Input(format!(
            "schema violation: unsupported schema_version {} (expected {SCHEMA_VERSION})",
            raw.schema_version
        )));
    }
    let v = raw.body.unwrap_or_else(|| serde_json::Value::Object(Default::default()));
    let body = match raw.kind {
        Kind::PartitionDemo => Body::Partition(body(v)?),
        Kind::TheoremVerify => Body::Verify(body(v)?),
        Kind::AisOracle => Body::Ais(body(v)?),
        Kind::Region => Body::Region(body(v)?),
        Kind::Certificate => Body::Certificate(body(v)?),
        Kind::Lemma1 => Body::Lemma1(body(v)?),
    };
    Ok(InstanceFile { schema_version: raw.schema_version, kind: raw.kind, body })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_unknown_fields() {
        let e = parse(r#"{"schema_version":1,"kind":"region","body":{"region":{"builtin":"mimo-ic"}},"extra":1}"#);
        assert!(matches!(e, Err(CliError::Input(m)) if m.contains("schema violation")));
        let e = parse(r#"{"schema_version":1,"kind":"region","body":{"region":{"builtin":"mimo-ic"},"colour":1}}"#);
        assert!(matches!(e, Err(CliError::Input(m)) if m.contains("colour")));
    }

    #[test]
    fn distinguishes_syntax_from_schema() {
        assert!(matches!(parse("{"), Err(CliError::Input(m)) if m.starts_with("malformed JSON")));
        assert!(matches!(parse(r#"{"schema_version":2,"kind":"region"}"#), Err(CliError::Input(m)) if m.contains("schema_version")));
    }

    #[test]
    fn certificate_body_without_out() {
        let f = parse(r#"{"schema_version":1,"kind":"certificate","body":{"certificate":{"builtin":"sum-rate"}}}"#).unwrap();
        assert_eq!(f.kind, Kind::Certificate);
    }
}
