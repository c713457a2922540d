//! Hazard-impact attributes, the per-attribute threshold table, and the
//! overall 1-5 hazard level.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::disaster::normalize_token;
use crate::error::HazardError;

/// Hazard intensity, 1 (minimal) to 5 (worst case).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct HazardLevel(u8);

impl HazardLevel {
    pub const MIN: HazardLevel = HazardLevel(1);
    pub const MAX: HazardLevel = HazardLevel(5);

    pub fn new(level: i64) -> Result<Self, HazardError> {
        if (1..=5).contains(&level) {
            Ok(HazardLevel(level as u8))
        } else {
            Err(HazardError::InvalidLevel(level))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn all() -> impl Iterator<Item = HazardLevel> {
        (1..=5).map(HazardLevel)
    }
}

impl fmt::Display for HazardLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for HazardLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_u8(self.0)
    }
}

impl<'de> Deserialize<'de> for HazardLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        HazardLevel::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum HazardAttribute {
    Fatality,
    Injury,
    LandImpaired,
    DirectDamage,
    IndirectDamage,
    WaterDisruption,
    EnergyDisruption,
}

pub const HAZARD_ATTRIBUTES: [HazardAttribute; 7] = [
    HazardAttribute::Fatality,
    HazardAttribute::Injury,
    HazardAttribute::LandImpaired,
    HazardAttribute::DirectDamage,
    HazardAttribute::IndirectDamage,
    HazardAttribute::WaterDisruption,
    HazardAttribute::EnergyDisruption,
];

impl HazardAttribute {
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        match self {
            HazardAttribute::Fatality => "fatality",
            HazardAttribute::Injury => "injury",
            HazardAttribute::LandImpaired => "land_impaired",
            HazardAttribute::DirectDamage => "direct_damage",
            HazardAttribute::IndirectDamage => "indirect_damage",
            HazardAttribute::WaterDisruption => "water_disruption",
            HazardAttribute::EnergyDisruption => "energy_disruption",
        }
    }

    /// Unit of the raw value, for display.
    pub fn unit(self) -> &'static str {
        match self {
            HazardAttribute::Fatality | HazardAttribute::Injury => "count",
            HazardAttribute::LandImpaired => "km2",
            HazardAttribute::DirectDamage | HazardAttribute::IndirectDamage => "billion USD",
            HazardAttribute::WaterDisruption | HazardAttribute::EnergyDisruption => "days",
        }
    }
}

impl fmt::Display for HazardAttribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for HazardAttribute {
    type Err = HazardError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = normalize_token(s);
        HAZARD_ATTRIBUTES
            .iter()
            .copied()
            .find(|a| normalize_token(a.as_str()) == key)
            .ok_or_else(|| HazardError::UnknownAttribute(s.to_string()))
    }
}

/// Raw impact values; any subset may be known.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HazardAttributes {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fatality: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub injury: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub land_impaired: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direct_damage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub indirect_damage: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub water_disruption: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy_disruption: Option<f64>,
}

impl HazardAttributes {
    pub fn get(&self, kind: HazardAttribute) -> Option<f64> {
        match kind {
            HazardAttribute::Fatality => self.fatality,
            HazardAttribute::Injury => self.injury,
            HazardAttribute::LandImpaired => self.land_impaired,
            HazardAttribute::DirectDamage => self.direct_damage,
            HazardAttribute::IndirectDamage => self.indirect_damage,
            HazardAttribute::WaterDisruption => self.water_disruption,
            HazardAttribute::EnergyDisruption => self.energy_disruption,
        }
    }

    pub fn set(&mut self, kind: HazardAttribute, value: Option<f64>) {
        let slot = match kind {
            HazardAttribute::Fatality => &mut self.fatality,
            HazardAttribute::Injury => &mut self.injury,
            HazardAttribute::LandImpaired => &mut self.land_impaired,
            HazardAttribute::DirectDamage => &mut self.direct_damage,
            HazardAttribute::IndirectDamage => &mut self.indirect_damage,
            HazardAttribute::WaterDisruption => &mut self.water_disruption,
            HazardAttribute::EnergyDisruption => &mut self.energy_disruption,
        };
        *slot = value;
    }

    pub fn with(mut self, kind: HazardAttribute, value: f64) -> Self {
        self.set(kind, Some(value));
        self
    }

    pub fn present(&self) -> impl Iterator<Item = (HazardAttribute, f64)> + '_ {
        HAZARD_ATTRIBUTES
            .iter()
            .filter_map(move |&a| self.get(a).map(|v| (a, v)))
    }

    pub fn is_empty(&self) -> bool {
        self.present().next().is_none()
    }
}

/// Per-attribute level, `None` where the attribute is unknown.
pub type AttributeLevels = [Option<HazardLevel>; 7];

/// Per attribute, five strictly decreasing thresholds for levels 5, 4, 3, 2, 1.
/// A value scores the highest level whose threshold it strictly exceeds.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdTable {
    rows: [[f64; 5]; 7],
}

impl Default for ThresholdTable {
    fn default() -> Self {
        ThresholdTable {
            rows: [
                [10000.0, 1000.0, 100.0, 10.0, 1.0],
                [100000.0, 10000.0, 1000.0, 100.0, 10.0],
                [500.0, 100.0, 50.0, 10.0, 1.0],
                [100.0, 10.0, 1.0, 0.1, 0.01],
                [100.0, 10.0, 1.0, 0.1, 0.01],
                [30.0, 14.0, 7.0, 3.0, 1.0],
                [30.0, 14.0, 7.0, 3.0, 1.0],
            ],
        }
    }
}

fn check_row(kind: HazardAttribute, row: &[f64]) -> Result<[f64; 5], HazardError> {
    let row: [f64; 5] = row
        .try_into()
        .map_err(|_| HazardError::IncompleteRow(kind.to_string()))?;
    if row.iter().any(|v| !v.is_finite()) {
        return Err(HazardError::IncompleteRow(kind.to_string()));
    }
    if row.windows(2).any(|w| w[0] <= w[1]) {
        return Err(HazardError::NonMonotoneRow(kind.to_string()));
    }
    Ok(row)
}

impl ThresholdTable {
    /// Thresholds ordered level 5 first.
    pub fn row(&self, kind: HazardAttribute) -> [f64; 5] {
        self.rows[kind.index()]
    }

    /// Threshold for `level` in 1..=5.
    pub fn threshold(&self, kind: HazardAttribute, level: HazardLevel) -> f64 {
        self.rows[kind.index()][5 - level.get() as usize]
    }

    pub fn set_row(&mut self, kind: HazardAttribute, row: &[f64]) -> Result<(), HazardError> {
        self.rows[kind.index()] = check_row(kind, row)?;
        Ok(())
    }

    /// Applies a JSON override document: `{"<attribute>": [t5, t4, t3, t2, t1], ...}`.
    /// Each listed row replaces the default row wholesale.
    pub fn with_overrides(mut self, doc: &serde_json::Value) -> Result<Self, HazardError> {
        let map = doc
            .as_object()
            .ok_or_else(|| HazardError::MalformedThresholds("expected a JSON object".into()))?;
        for (name, value) in map {
            let kind: HazardAttribute = name.parse()?;
            let arr = value
                .as_array()
                .ok_or_else(|| HazardError::IncompleteRow(kind.to_string()))?;
            let nums: Vec<f64> = arr
                .iter()
                .map(|v| v.as_f64().ok_or_else(|| HazardError::IncompleteRow(kind.to_string())))
                .collect::<Result<_, _>>()?;
            self.set_row(kind, &nums)?;
        }
        Ok(self)
    }

    pub fn to_json(&self) -> serde_json::Value {
        let map: BTreeMap<&str, [f64; 5]> = HAZARD_ATTRIBUTES
            .iter()
            .map(|a| (a.as_str(), self.row(*a)))
            .collect();
        serde_json::to_value(map).expect("threshold table serializes")
    }

    pub fn score(&self, kind: HazardAttribute, value: f64) -> Result<HazardLevel, HazardError> {
        score_attribute(kind, value, self)
    }
}

/// Defaults, optionally with whole rows replaced from an override document.
pub fn load_thresholds(config: Option<&serde_json::Value>) -> Result<ThresholdTable, HazardError> {
    match config {
        None => Ok(ThresholdTable::default()),
        Some(doc) => ThresholdTable::default().with_overrides(doc),
    }
}

/// Highest level whose threshold `value` strictly exceeds; 1 when it exceeds none.
pub fn score_attribute(
    kind: HazardAttribute,
    value: f64,
    table: &ThresholdTable,
) -> Result<HazardLevel, HazardError> {
    if value.is_nan() || value < 0.0 || value.is_infinite() {
        return Err(HazardError::NegativeValue {
            attribute: kind.to_string(),
            value,
        });
    }
    let row = table.row(kind);
    let level = row
        .iter()
        .position(|&t| value > t)
        .map_or(1, |i| 5 - i as u8);
    Ok(HazardLevel(level))
}

/// Name-keyed convenience over [`score_attribute`].
pub fn score_named(name: &str, value: f64, table: &ThresholdTable) -> Result<HazardLevel, HazardError> {
    score_attribute(name.parse()?, value, table)
}

pub fn attribute_levels(
    attrs: &HazardAttributes,
    table: &ThresholdTable,
) -> Result<AttributeLevels, HazardError> {
    let mut out = [None; 7];
    for (kind, value) in attrs.present() {
        out[kind.index()] = Some(score_attribute(kind, value, table)?);
    }
    Ok(out)
}

/// Round-half-up mean of the given levels, clamped to 1..=5.
pub fn mean_level(levels: &[HazardLevel]) -> Result<HazardLevel, HazardError> {
    if levels.is_empty() {
        return Err(HazardError::NoAttributes);
    }
    let n = levels.len() as u64;
    let sum: u64 = levels.iter().map(|l| u64::from(l.get())).sum();
    // floor(sum / n + 1/2) in integers.
    let rounded = (2 * sum + n) / (2 * n);
    Ok(HazardLevel(rounded.clamp(1, 5) as u8))
}

/// Mean of the per-attribute levels of the attributes that are present.
pub fn overall_level(attrs: &HazardAttributes, table: &ThresholdTable) -> Result<HazardLevel, HazardError> {
    let levels = attribute_levels(attrs, table)?;
    let present: Vec<HazardLevel> = levels.iter().flatten().copied().collect();
    mean_level(&present)
}
