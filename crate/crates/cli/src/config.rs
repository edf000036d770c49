//! Run configuration (a single JSON document).

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::Value;
use std::path::{Path, PathBuf};

use poincare_sobol::spectral::GridKind;
use poincare_sobol::testfunctions::Flood;
use poincare_sobol::{Distribution1D, Weight};

use crate::CliError;

/// One input law with an optional display name.
#[derive(Debug, Clone, PartialEq)]
pub struct InputSpec {
    pub name: Option<String>,
    pub distribution: Distribution1D,
}

impl<'de> Deserialize<'de> for InputSpec {
    fn deserialize<D: Deserializer<'de>>(de: D) -> Result<Self, D::Error> {
        let mut map = serde_json::Map::deserialize(de)?;
        let name = match map.remove("name") {
            Some(Value::String(s)) => Some(s),
            Some(other) => {
                return Err(serde::de::Error::custom(format!(
                    "input name must be a string, got {other}"
                )))
            }
            None => None,
        };
        let distribution =
            Distribution1D::deserialize(Value::Object(map)).map_err(serde::de::Error::custom)?;
        Ok(InputSpec { name, distribution })
    }
}

impl Serialize for InputSpec {
    fn serialize<S: Serializer>(&self, ser: S) -> Result<S::Ok, S::Error> {
        let mut v = serde_json::to_value(self.distribution).map_err(serde::ser::Error::custom)?;
        if let (Some(name), Value::Object(map)) = (&self.name, &mut v) {
            map.insert("name".into(), Value::String(name.clone()));
        }
        v.serialize(ser)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ModelSpec {
    Csv {
        csv: PathBuf,
    },
    Named {
        name: String,
        #[serde(default)]
        params: Value,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorName {
    #[serde(rename = "pdo")]
    Pdo,
    #[serde(rename = "pdo-der")]
    PdoDer,
    #[serde(rename = "fisher")]
    Fisher,
    #[serde(rename = "monomial")]
    Monomial,
    #[serde(rename = "dgsm-upper")]
    DgsmUpper,
    #[serde(rename = "pick-freeze")]
    PickFreeze,
    #[serde(rename = "oracle")]
    Oracle,
}

impl EstimatorName {
    pub fn label(self) -> &'static str {
        match self {
            EstimatorName::Pdo => "pdo",
            EstimatorName::PdoDer => "pdo-der",
            EstimatorName::Fisher => "fisher",
            EstimatorName::Monomial => "monomial",
            EstimatorName::DgsmUpper => "dgsm-upper",
            EstimatorName::PickFreeze => "pick-freeze",
            EstimatorName::Oracle => "oracle",
        }
    }

    pub fn needs_spectra(self) -> bool {
        matches!(
            self,
            EstimatorName::Pdo | EstimatorName::PdoDer | EstimatorName::DgsmUpper
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BootstrapConfig {
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default = "default_level")]
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    /// Number of non-constant eigenpairs to solve for.
    #[serde(default = "default_k")]
    pub k: usize,
    /// Cells of the finite-element grid.
    #[serde(default = "default_grid")]
    pub grid: usize,
    #[serde(default)]
    pub grid_kind: GridKind,
    /// Eigenfunction used by the bounds.
    #[serde(default = "default_eigen_index")]
    pub eigen_index: usize,
    #[serde(default)]
    pub weight: Weight,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            grid: default_grid(),
            grid_kind: GridKind::Uniform,
            eigen_index: default_eigen_index(),
            weight: Weight::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Json,
    Csv,
    #[default]
    Both,
}

impl Format {
    pub fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }

    pub fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out")]
    pub dir: PathBuf,
    #[serde(default)]
    pub format: Format,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out(),
            format: Format::Both,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Input laws; defaults exist for the built-in models.
    #[serde(default)]
    pub inputs: Option<Vec<InputSpec>>,
    pub model: ModelSpec,
    #[serde(default = "default_estimators")]
    pub estimators: Vec<EstimatorName>,
    #[serde(default = "default_n")]
    pub n: usize,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub bootstrap: Option<BootstrapConfig>,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default = "default_degree")]
    pub monomial_degree: u32,
    /// Sample size of the pick-freeze reference (defaults to `n`).
    #[serde(default)]
    pub pick_freeze_n: Option<usize>,
    #[serde(default)]
    pub quadrature: bool,
    #[serde(default = "default_nodes")]
    pub quadrature_nodes: usize,
    /// Also report every estimate divided by the output variance.
    #[serde(default)]
    pub normalize: bool,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_replicates() -> usize {
    300
}
fn default_level() -> f64 {
    0.9
}
fn default_k() -> usize {
    2
}
fn default_grid() -> usize {
    2000
}
fn default_eigen_index() -> usize {
    1
}
fn default_out() -> PathBuf {
    PathBuf::from("out")
}
fn default_estimators() -> Vec<EstimatorName> {
    vec![
        EstimatorName::Pdo,
        EstimatorName::PdoDer,
        EstimatorName::DgsmUpper,
    ]
}
fn default_n() -> usize {
    10_000
}
fn default_seeds() -> Vec<u64> {
    vec![0]
}
fn default_degree() -> u32 {
    1
}
fn default_nodes() -> usize {
    poincare_sobol::estimators::DEFAULT_QUADRATURE_NODES
}

impl RunConfig {
    pub fn from_path(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        // CSV paths are relative to the config file.
        if let ModelSpec::Csv { csv } = &mut cfg.model {
            if csv.is_relative() {
                if let Some(parent) = path.parent() {
                    *csv = parent.join(&*csv);
                }
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |m: String| Err(CliError::Config(m));
        if self.estimators.is_empty() {
            return bad("no estimators requested".into());
        }
        if self.n < 2 {
            return bad(format!("n = {} is too small", self.n));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.spectral.eigen_index < 1 {
            return bad("spectral.eigen_index must be >= 1".into());
        }
        if let Some(b) = self.bootstrap {
            if b.replicates < 100 || !(b.level > 0.0 && b.level < 1.0) {
                return bad("bootstrap needs replicates >= 100 and 0 < level < 1".into());
            }
        }
        if self.quadrature && matches!(self.model, ModelSpec::Csv { .. }) {
            return bad("quadrature mode needs a named model, not a CSV sample".into());
        }
        if self.monomial_degree < 1 {
            return bad("monomial_degree must be >= 1".into());
        }
        Ok(())
    }

    /// Number of eigenpairs to solve: at least the eigen-index used.
    pub fn spectral_k(&self) -> usize {
        self.spectral.k.max(self.spectral.eigen_index)
    }

    /// Declared input laws, falling back to the model defaults.
    pub fn input_laws(&self, dim: usize) -> Result<Vec<InputSpec>, CliError> {
        if let Some(inputs) = &self.inputs {
            if inputs.len() != dim {
                return Err(CliError::Config(format!(
                    "{} inputs declared for a {dim}-input model",
                    inputs.len()
                )));
            }
            return Ok(inputs.clone());
        }
        let named = |d: Vec<Distribution1D>, names: Option<&[&str]>| {
            d.into_iter()
                .enumerate()
                .map(|(k, distribution)| InputSpec {
                    name: names.map(|n| n[k].to_string()),
                    distribution,
                })
                .collect()
        };
        match &self.model {
            ModelSpec::Named { name, .. } if name == "flood" => Ok(named(
                Flood::default_inputs(),
                Some(&poincare_sobol::testfunctions::FLOOD_INPUTS),
            )),
            ModelSpec::Named { name, .. } if name == "linear_interaction" || name == "g_sobol" => {
                let u = Distribution1D::uniform(-0.5, 0.5).expect("valid");
                Ok(named(vec![u; dim], None))
            }
            _ => Err(CliError::Config(
                "`inputs` is required for this model".into(),
            )),
        }
    }
}
