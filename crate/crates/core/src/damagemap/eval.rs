use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::dataset::LabeledBuilding;
use crate::ensemble::{DamageLevel, NUM_LEVELS};
use crate::error::MapError;

use super::DamageMap;

/// Accuracy against gold labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Correct predictions over `n`; 0 when `n` is 0.
    pub accuracy: f64,
    /// Rows are gold levels 1..=5, columns predicted levels 1..=5 then
    /// unclassified.
    pub confusion: [[u64; NUM_LEVELS + 1]; NUM_LEVELS],
    /// Buildings with a classified gold label.
    pub n: u64,
    /// Gold-unclassified buildings left out of the score.
    pub excluded_unclassified: u64,
}

/// Scores `pred` against gold levels keyed by building id. `None` marks a
/// gold-unclassified building.
pub fn evaluate_levels<'a>(
    pred: &DamageMap,
    gold: impl IntoIterator<Item = (&'a str, Option<u8>)>,
) -> Result<EvalReport, MapError> {
    let gold: BTreeMap<&str, Option<u8>> = gold.into_iter().collect();
    let pred_ids: BTreeSet<&str> = pred.entries.iter().map(|e| e.building_id.as_str()).collect();
    let gold_ids: BTreeSet<&str> = gold.keys().copied().collect();
    if pred_ids != gold_ids || pred_ids.len() != pred.entries.len() {
        let missing: Vec<_> = gold_ids.symmetric_difference(&pred_ids).take(5).collect();
        return Err(MapError::IdMismatch(format!("differing ids include {missing:?}")));
    }
    let mut report = EvalReport {
        accuracy: 0.0,
        confusion: [[0; NUM_LEVELS + 1]; NUM_LEVELS],
        n: 0,
        excluded_unclassified: 0,
    };
    let mut hits = 0u64;
    for e in &pred.entries {
        let Some(g) = gold[e.building_id.as_str()] else {
            report.excluded_unclassified += 1;
            continue;
        };
        if !(1..=5).contains(&g) {
            return Err(MapError::IdMismatch(format!("gold level {g} for {} outside 1..=5", e.building_id)));
        }
        let col = match e.level {
            DamageLevel::Level(l) => usize::from(l) - 1,
            DamageLevel::Unclassified => NUM_LEVELS,
        };
        report.confusion[usize::from(g) - 1][col] += 1;
        report.n += 1;
        if e.level == DamageLevel::Level(g) {
            hits += 1;
        }
    }
    if report.n > 0 {
        report.accuracy = hits as f64 / report.n as f64;
    }
    Ok(report)
}

/// Scores against labeled buildings, mapping damage classes to levels.
pub fn evaluate(pred: &DamageMap, gold: &[LabeledBuilding]) -> Result<EvalReport, MapError> {
    evaluate_levels(pred, gold.iter().map(|b| (b.building_id(), b.level())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::damagemap::MapEntry;
    use crate::disaster::DisasterType;
    use crate::hazard::HazardLevel;

    fn map(levels: &[DamageLevel]) -> DamageMap {
        DamageMap {
            scene_id: "s".into(),
            disaster_type: DisasterType::Flood,
            hazard_level: HazardLevel::new(3).unwrap(),
            palette_id: "default".into(),
            entries: levels
                .iter()
                .enumerate()
                .map(|(i, &level)| MapEntry {
                    building_id: format!("b{i}"),
                    level,
                    probs: [0.2; 5],
                    skipped: false,
                })
                .collect(),
        }
    }

    #[test]
    fn seven_of_nine() {
        use DamageLevel::*;
        let pred = map(&[Level(1), Level(2), Level(3), Level(5), Level(1), Level(2), Level(3), Level(1), Unclassified, Level(4)]);
        let gold = [Some(1), Some(2), Some(3), Some(5), Some(1), Some(2), Some(3), Some(2), Some(3), None];
        let ids: Vec<String> = (0..10).map(|i| format!("b{i}")).collect();
        let r = evaluate_levels(&pred, ids.iter().map(String::as_str).zip(gold)).unwrap();
        assert_eq!(r.n, 9);
        assert_eq!(r.excluded_unclassified, 1);
        assert!((r.accuracy - 7.0 / 9.0).abs() < 1e-15);
        assert_eq!(r.confusion.iter().flatten().sum::<u64>(), 9);
        assert_eq!(r.confusion[2][5], 1);
        assert_eq!(r.confusion[1][0], 1);
    }

    #[test]
    fn id_mismatch() {
        let pred = map(&[DamageLevel::Level(1)]);
        assert!(matches!(evaluate_levels(&pred, [("zz", Some(1))]), Err(MapError::IdMismatch(_))));
        assert!(matches!(
            evaluate_levels(&pred, [("b0", Some(1)), ("b1", Some(2))]),
            Err(MapError::IdMismatch(_))
        ));
    }
}
