use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Compartment, ModelError, SeirConstants, SeirModel, TrainingWindow};
use crate::nn::{DenseNet, NetworkRecord, NnError};

/// Tag stored in every model file.
pub const MODEL_FORMAT: &str = "fracseir-model";
pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// The seven networks of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSet {
    pub susceptible: NetworkRecord,
    pub exposed: NetworkRecord,
    pub infected: NetworkRecord,
    pub removed: NetworkRecord,
    pub cumulative_infected: NetworkRecord,
    pub beta: NetworkRecord,
    pub mu: NetworkRecord,
}

/// On-disk form of a [`SeirModel`].
///
/// `alpha` is the decoded order, stored for readers; `raw_alpha` is what
/// gets restored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub schema_version: u32,
    pub alpha: f64,
    pub raw_alpha: f64,
    pub alpha_bounds: (f64, f64),
    pub constants: SeirConstants,
    pub window: TrainingWindow,
    pub iterations_trained: usize,
    pub networks: NetworkSet,
}

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error("cannot access model file: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model file: {0}")]
    Json(#[from] serde_json::Error),
    #[error("not a model file (format tag {0:?})")]
    Format(String),
    #[error("model schema version {found} is not supported (expected {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error(transparent)]
    Network(#[from] NnError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

impl From<&SeirModel> for ModelFile {
    fn from(model: &SeirModel) -> Self {
        let rec = |c: Compartment| NetworkRecord::from(model.network(c));
        ModelFile {
            format: MODEL_FORMAT.to_string(),
            schema_version: MODEL_SCHEMA_VERSION,
            alpha: model.alpha(),
            raw_alpha: model.raw_alpha(),
            alpha_bounds: model.alpha_bounds(),
            constants: model.constants,
            window: model.window,
            iterations_trained: model.iterations_trained,
            networks: NetworkSet {
                susceptible: rec(Compartment::Susceptible),
                exposed: rec(Compartment::Exposed),
                infected: rec(Compartment::Infected),
                removed: rec(Compartment::Removed),
                cumulative_infected: rec(Compartment::CumulativeInfected),
                beta: NetworkRecord::from(&model.beta),
                mu: NetworkRecord::from(&model.mu),
            },
        }
    }
}

impl ModelFile {
    pub fn into_model(self) -> Result<SeirModel, ModelIoError> {
        if self.format != MODEL_FORMAT {
            return Err(ModelIoError::Format(self.format));
        }
        if self.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelIoError::SchemaVersion {
                found: self.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        let (lo, hi) = self.alpha_bounds;
        if !(lo > 0.0 && hi <= 1.0 && lo < hi) {
            return Err(ModelError::AlphaBounds(lo, hi).into());
        }
        let constants = SeirConstants::new(self.constants.population, self.constants.sigma)?;
        let n = &self.networks;
        Ok(SeirModel {
            compartments: [
                DenseNet::try_from(&n.susceptible)?,
                DenseNet::try_from(&n.exposed)?,
                DenseNet::try_from(&n.infected)?,
                DenseNet::try_from(&n.removed)?,
                DenseNet::try_from(&n.cumulative_infected)?,
            ],
            beta: DenseNet::try_from(&n.beta)?,
            mu: DenseNet::try_from(&n.mu)?,
            raw_alpha: self.raw_alpha,
            alpha_bounds: self.alpha_bounds,
            constants,
            window: self.window,
            iterations_trained: self.iterations_trained,
        })
    }

    pub fn to_json(&self) -> String {
        let mut text = serde_json::to_string_pretty(self).expect("model file serializes");
        text.push('\n');
        text
    }

    pub fn from_json(text: &str) -> Result<Self, ModelIoError> {
        // Check the header first so a version mismatch is reported as such
        // rather than as whatever field changed shape.
        #[derive(Deserialize)]
        struct Header {
            format: String,
            schema_version: u32,
        }
        let header: Header = serde_json::from_str(text)?;
        if header.format != MODEL_FORMAT {
            return Err(ModelIoError::Format(header.format));
        }
        if header.schema_version != MODEL_SCHEMA_VERSION {
            return Err(ModelIoError::SchemaVersion {
                found: header.schema_version,
                expected: MODEL_SCHEMA_VERSION,
            });
        }
        Ok(serde_json::from_str(text)?)
    }
}

impl SeirModel {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
        std::fs::write(path, ModelFile::from(self).to_json())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelIoError> {
        let text = std::fs::read_to_string(path)?;
        ModelFile::from_json(&text)?.into_model()
    }
}
