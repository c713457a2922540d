use serde::{Deserialize, Serialize};

use crate::disaster::{DisasterType, DISASTER_TYPES};
use crate::error::EnsembleError;
use crate::hazard::{AttributeLevels, HazardLevel};
use crate::scalar::Scalar;

use super::features::serde_arrays;
use super::META_LEN;

/// Offset of the overall hazard entry inside the meta vector.
pub const META_HAZARD_INDEX: usize = 7;

/// One-hot disaster type (7), overall hazard level / 5 (1), per-attribute
/// levels / 5 with 0 for unknown attributes (7).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct MetaVector<T: Scalar>(#[serde(with = "serde_arrays")] pub [T; META_LEN]);

impl<T: Scalar> MetaVector<T> {
    pub fn disaster_type(&self) -> Option<DisasterType> {
        self.0[..7]
            .iter()
            .position(|&v| v == T::one())
            .and_then(DisasterType::from_index)
    }

    pub fn hazard(&self) -> T {
        self.0[META_HAZARD_INDEX]
    }

    /// Same vector with the overall hazard entry replaced.
    pub fn with_hazard(mut self, overall: HazardLevel) -> Self {
        self.0[META_HAZARD_INDEX] = level_entry(overall);
        self
    }

    /// Checks the layout invariants (exactly one type bit, entries in [0, 1]).
    pub fn validate(&self) -> Result<(), EnsembleError> {
        let ones = self.0[..7].iter().filter(|&&v| v == T::one()).count();
        let zeros = self.0[..7].iter().filter(|&&v| v == T::zero()).count();
        if ones != 1 || zeros != 6 {
            return Err(EnsembleError::InvalidInput("meta vector needs exactly one disaster type".into()));
        }
        if self.0.iter().any(|&v| !(v >= T::zero() && v <= T::one())) {
            return Err(EnsembleError::InvalidInput("meta entries must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn level_entry<T: Scalar>(l: HazardLevel) -> T {
    T::lit(f64::from(l.get()) / 5.0)
}

pub fn meta_vector<T: Scalar>(
    disaster_type: DisasterType,
    overall: HazardLevel,
    attr_levels: &AttributeLevels,
) -> MetaVector<T> {
    let mut v = [T::zero(); META_LEN];
    v[disaster_type.index()] = T::one();
    v[META_HAZARD_INDEX] = level_entry(overall);
    for (slot, lvl) in v[META_HAZARD_INDEX + 1..].iter_mut().zip(attr_levels) {
        if let Some(l) = lvl {
            *slot = level_entry(*l);
        }
    }
    MetaVector(v)
}

/// [`meta_vector`] with the disaster type given by name.
pub fn meta_vector_named<T: Scalar>(
    disaster_type: &str,
    overall: HazardLevel,
    attr_levels: &AttributeLevels,
) -> Result<MetaVector<T>, EnsembleError> {
    let ty = disaster_type
        .parse::<DisasterType>()
        .map_err(|_| EnsembleError::UnknownDisasterType(disaster_type.to_string()))?;
    Ok(meta_vector(ty, overall, attr_levels))
}

const _: () = assert!(DISASTER_TYPES.len() + 1 + 7 == META_LEN);
