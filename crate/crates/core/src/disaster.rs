use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::UnknownName;

/// The seven disaster types the ensemble routes between.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum DisasterType {
    Earthquake,
    Fire,
    Flood,
    Hurricane,
    Tornado,
    Tsunami,
    VolcanicEruption,
}

/// All disaster types in one-hot order.
pub const DISASTER_TYPES: [DisasterType; 7] = [
    DisasterType::Earthquake,
    DisasterType::Fire,
    DisasterType::Flood,
    DisasterType::Hurricane,
    DisasterType::Tornado,
    DisasterType::Tsunami,
    DisasterType::VolcanicEruption,
];

impl DisasterType {
    /// Position in the one-hot block of the meta vector.
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        DISASTER_TYPES.get(i).copied()
    }

    pub fn as_str(self) -> &'static str {
        match self {
            DisasterType::Earthquake => "earthquake",
            DisasterType::Fire => "fire",
            DisasterType::Flood => "flood",
            DisasterType::Hurricane => "hurricane",
            DisasterType::Tornado => "tornado",
            DisasterType::Tsunami => "tsunami",
            DisasterType::VolcanicEruption => "volcanic-eruption",
        }
    }
}

/// Lowercases and strips separators so "Volcanic_Eruption" and
/// "volcanic-eruption" compare equal.
pub(crate) fn normalize_token(s: &str) -> String {
    s.chars()
        .filter(|c| !matches!(c, '-' | '_' | ' ' | '\t'))
        .flat_map(char::to_lowercase)
        .collect()
}

impl FromStr for DisasterType {
    type Err = UnknownName;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        // xBD spells a few of these differently.
        let t = match normalize_token(s).as_str() {
            "earthquake" => DisasterType::Earthquake,
            "fire" | "wildfire" => DisasterType::Fire,
            "flood" | "flooding" => DisasterType::Flood,
            "hurricane" => DisasterType::Hurricane,
            "tornado" => DisasterType::Tornado,
            "tsunami" => DisasterType::Tsunami,
            "volcaniceruption" | "volcano" => DisasterType::VolcanicEruption,
            _ => return Err(UnknownName(s.to_string())),
        };
        Ok(t)
    }
}

impl fmt::Display for DisasterType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl Serialize for DisasterType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for DisasterType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse()
            .map_err(|e: UnknownName| serde::de::Error::custom(format!("unknown disaster type {:?}", e.0)))
    }
}
