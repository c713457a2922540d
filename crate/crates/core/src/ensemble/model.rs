//! Persisted trained heads.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::disaster::DisasterType;
use crate::error::{EnsembleError, Error};

use super::backbone::CoOccurrence;
use super::train::{EpochRecord, TrainConfig};
use super::Head;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub version: u32,
    pub heads: BTreeMap<DisasterType, Head<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub co_occurrence: Option<CoOccurrence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_config: Option<TrainConfig<f64>>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub history: BTreeMap<DisasterType, Vec<EpochRecord>>,
}

impl ModelFile {
    pub fn new(heads: BTreeMap<DisasterType, Head<f64>>) -> Self {
        ModelFile {
            version: MODEL_FORMAT_VERSION,
            heads,
            co_occurrence: None,
            train_config: None,
            history: BTreeMap::new(),
        }
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.version != MODEL_FORMAT_VERSION {
            return Err(EnsembleError::InvalidInput(format!("unsupported model version {}", self.version)));
        }
        for head in self.heads.values() {
            head.validate()?;
        }
        if let Some(c) = &self.co_occurrence {
            c.validate()?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, EnsembleError> {
        let m: ModelFile =
            serde_json::from_str(text).map_err(|e| EnsembleError::InvalidInput(format!("model file: {e}")))?;
        m.validate()?;
        Ok(m)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }

    pub fn load(path: &Path) -> Result<Self, Error> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(Self::from_json(&text)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), Error> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ensemble::{OrdinalHead, SoftmaxHead};

    #[test]
    fn json_round_trip() {
        let mut heads = BTreeMap::new();
        heads.insert(DisasterType::Flood, Head::Ordinal(OrdinalHead::hazard_prior()));
        heads.insert(DisasterType::Fire, Head::Softmax(SoftmaxHead::hazard_prior()));
        let mut m = ModelFile::new(heads);
        m.co_occurrence = Some(CoOccurrence::identity());
        let back = ModelFile::from_json(&m.to_json()).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn rejects_bad_cut_points() {
        let mut h = OrdinalHead::<f64>::hazard_prior();
        h.cut_points = [1.0, 0.0, 2.0, 3.0];
        let m = ModelFile::new(BTreeMap::from([(DisasterType::Flood, Head::Ordinal(h))]));
        assert!(matches!(
            ModelFile::from_json(&m.to_json()),
            Err(EnsembleError::NonMonotoneCutPoints)
        ));
    }
}
