//! Per-disaster-type backbones, routing weights and the probability mixture.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::disaster::{DisasterType, DISASTER_TYPES};
use crate::error::EnsembleError;
use crate::rastergeom::Chip;

use super::head::head_input;
use super::probs::softmax;
use super::{FeatureVector, Head, MetaVector, NUM_LEVELS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackboneKind {
    ReferenceOrdinal,
    ReferenceSoftmax,
    External,
}

impl fmt::Display for BackboneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BackboneKind::ReferenceOrdinal => "reference-ordinal",
            BackboneKind::ReferenceSoftmax => "reference-softmax",
            BackboneKind::External => "external",
        })
    }
}

/// Anything that maps a chip (or its features) plus meta to five logits.
pub trait Backbone: Send + Sync {
    fn kind(&self) -> BackboneKind;
    fn disaster_type(&self) -> DisasterType;
    fn logits(
        &self,
        chip: &Chip,
        features: &FeatureVector<f64>,
        meta: &MetaVector<f64>,
    ) -> Result<[f64; NUM_LEVELS], EnsembleError>;

    /// Output distribution; defaults to the softmax of [`Backbone::logits`].
    fn probs(
        &self,
        chip: &Chip,
        features: &FeatureVector<f64>,
        meta: &MetaVector<f64>,
    ) -> Result<[f64; NUM_LEVELS], EnsembleError> {
        Ok(softmax(&self.logits(chip, features, meta)?))
    }
}

/// In-process backbone backed by one of the reference heads.
#[derive(Debug, Clone)]
pub struct ReferenceBackbone {
    pub disaster_type: DisasterType,
    pub head: Head<f64>,
}

impl ReferenceBackbone {
    pub fn new(disaster_type: DisasterType, head: Head<f64>) -> Result<Self, EnsembleError> {
        head.validate()?;
        Ok(ReferenceBackbone { disaster_type, head })
    }
}

impl Backbone for ReferenceBackbone {
    fn kind(&self) -> BackboneKind {
        match self.head {
            Head::Ordinal(_) => BackboneKind::ReferenceOrdinal,
            Head::Softmax(_) => BackboneKind::ReferenceSoftmax,
        }
    }

    fn disaster_type(&self) -> DisasterType {
        self.disaster_type
    }

    fn logits(
        &self,
        _chip: &Chip,
        features: &FeatureVector<f64>,
        meta: &MetaVector<f64>,
    ) -> Result<[f64; NUM_LEVELS], EnsembleError> {
        let x = head_input(features, meta);
        Ok(match &self.head {
            Head::Softmax(h) => h.logits(&x),
            // Log-probabilities; softmax of these gives the ordinal output back.
            Head::Ordinal(_) => self.head.probs(&x).map(|p| p.max(f64::MIN_POSITIVE).ln()),
        })
    }

    fn probs(
        &self,
        _chip: &Chip,
        features: &FeatureVector<f64>,
        meta: &MetaVector<f64>,
    ) -> Result<[f64; NUM_LEVELS], EnsembleError> {
        Ok(self.head.probs(&head_input(features, meta)))
    }
}

/// Symmetric, non-negative 7x7 co-occurrence counts between disaster types.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoOccurrence(pub [[f64; 7]; 7]);

impl CoOccurrence {
    pub fn identity() -> Self {
        let mut m = [[0.0; 7]; 7];
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = 1.0;
        }
        CoOccurrence(m)
    }

    pub fn get(&self, a: DisasterType, b: DisasterType) -> f64 {
        self.0[a.index()][b.index()]
    }

    /// Sets `C[a,b]` and `C[b,a]`.
    pub fn set(&mut self, a: DisasterType, b: DisasterType, v: f64) {
        self.0[a.index()][b.index()] = v;
        self.0[b.index()][a.index()] = v;
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        for i in 0..7 {
            for j in 0..7 {
                let v = self.0[i][j];
                if !v.is_finite() || v < 0.0 {
                    return Err(EnsembleError::InvalidCoOccurrence(format!(
                        "entry ({i},{j}) = {v} is not a finite non-negative number"
                    )));
                }
                if v != self.0[j][i] {
                    return Err(EnsembleError::InvalidCoOccurrence(format!("not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(())
    }
}

/// Convex weights over registered backbones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingWeights(pub BTreeMap<DisasterType, f64>);

impl RoutingWeights {
    pub fn single(t: DisasterType) -> Self {
        RoutingWeights(BTreeMap::from([(t, 1.0)]))
    }

    pub fn total(&self) -> f64 {
        self.0.values().sum()
    }

    pub fn get(&self, t: DisasterType) -> f64 {
        self.0.get(&t).copied().unwrap_or(0.0)
    }
}

/// Disaster type to backbone map plus optional co-occurrence routing.
/// Immutable once built.
#[derive(Clone, Default)]
pub struct BackboneRegistry {
    backbones: BTreeMap<DisasterType, Arc<dyn Backbone>>,
    co_occurrence: Option<CoOccurrence>,
}

impl fmt::Debug for BackboneRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BackboneRegistry")
            .field(
                "backbones",
                &self
                    .backbones
                    .iter()
                    .map(|(t, b)| (t.as_str(), b.kind()))
                    .collect::<Vec<_>>(),
            )
            .field("co_occurrence", &self.co_occurrence)
            .finish()
    }
}

impl BackboneRegistry {
    pub fn new(
        backbones: impl IntoIterator<Item = Arc<dyn Backbone>>,
        co_occurrence: Option<CoOccurrence>,
    ) -> Result<Self, EnsembleError> {
        let mut map = BTreeMap::new();
        for b in backbones {
            map.insert(b.disaster_type(), b);
        }
        if let Some(c) = &co_occurrence {
            c.validate()?;
            for t in map.keys() {
                let row: f64 = c.0[t.index()].iter().sum();
                if row <= 0.0 {
                    return Err(EnsembleError::InvalidCoOccurrence(format!(
                        "row for registered type {t} sums to zero"
                    )));
                }
            }
        }
        Ok(BackboneRegistry {
            backbones: map,
            co_occurrence,
        })
    }

    /// Reference backbone for every type from `heads`.
    pub fn from_heads(
        heads: impl IntoIterator<Item = (DisasterType, Head<f64>)>,
        co_occurrence: Option<CoOccurrence>,
    ) -> Result<Self, EnsembleError> {
        let backbones = heads
            .into_iter()
            .map(|(t, h)| ReferenceBackbone::new(t, h).map(|b| Arc::new(b) as Arc<dyn Backbone>))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(backbones, co_occurrence)
    }

    /// Untrained hazard-prior heads of one kind for all seven types.
    pub fn prior(kind: BackboneKind) -> Self {
        let heads = DISASTER_TYPES.iter().map(|&t| {
            let head = match kind {
                BackboneKind::ReferenceSoftmax => Head::Softmax(super::SoftmaxHead::hazard_prior()),
                _ => Head::Ordinal(super::OrdinalHead::hazard_prior()),
            };
            (t, head)
        });
        Self::from_heads(heads, None).expect("prior heads are valid")
    }

    pub fn get(&self, t: DisasterType) -> Option<&Arc<dyn Backbone>> {
        self.backbones.get(&t)
    }

    pub fn types(&self) -> impl Iterator<Item = DisasterType> + '_ {
        self.backbones.keys().copied()
    }

    pub fn backbones(&self) -> impl Iterator<Item = (DisasterType, &Arc<dyn Backbone>)> {
        self.backbones.iter().map(|(t, b)| (*t, b))
    }

    pub fn co_occurrence(&self) -> Option<&CoOccurrence> {
        self.co_occurrence.as_ref()
    }

    pub fn route(&self, t: DisasterType) -> Result<RoutingWeights, EnsembleError> {
        route(t, self)
    }
}

/// Without a co-occurrence matrix the type routes to its own backbone.
/// With one, weight(u) is proportional to `C[t,u]` over registered types.
pub fn route(t: DisasterType, registry: &BackboneRegistry) -> Result<RoutingWeights, EnsembleError> {
    match registry.co_occurrence() {
        None => {
            if registry.get(t).is_some() {
                Ok(RoutingWeights::single(t))
            } else {
                Err(EnsembleError::NoBackboneAvailable(t))
            }
        }
        Some(c) => {
            let raw: BTreeMap<DisasterType, f64> = registry
                .types()
                .map(|u| (u, c.get(t, u)))
                .filter(|&(_, w)| w > 0.0)
                .collect();
            let total: f64 = raw.values().sum();
            if total <= 0.0 {
                return Err(EnsembleError::NoBackboneAvailable(t));
            }
            Ok(RoutingWeights(raw.into_iter().map(|(u, w)| (u, w / total)).collect()))
        }
    }
}

/// [`route`] with the type given by name.
pub fn route_named(name: &str, registry: &BackboneRegistry) -> Result<RoutingWeights, EnsembleError> {
    let t = name
        .parse::<DisasterType>()
        .map_err(|_| EnsembleError::UnknownDisasterType(name.to_string()))?;
    route(t, registry)
}

/// `sum_u weight(u) * probs_u`.
pub fn ensemble_predict(
    chip: &Chip,
    features: &FeatureVector<f64>,
    meta: &MetaVector<f64>,
    registry: &BackboneRegistry,
    weights: &RoutingWeights,
) -> Result<[f64; NUM_LEVELS], EnsembleError> {
    let total = weights.total();
    let bad_total = total.is_nan() || (total - 1.0).abs() > 1e-9;
    if bad_total || weights.0.values().any(|&w| w.is_nan() || w < 0.0) {
        return Err(EnsembleError::InvalidRoutingWeights(total));
    }
    let mut out = [0.0; NUM_LEVELS];
    for (&t, &w) in &weights.0 {
        if w == 0.0 {
            continue;
        }
        let backbone = registry.get(t).ok_or(EnsembleError::NoBackboneAvailable(t))?;
        let probs = backbone.probs(chip, features, meta)?;
        let sum: f64 = probs.iter().sum();
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) || (sum - 1.0).abs() > 1e-6 {
            return Err(EnsembleError::BackboneFailure {
                backbone: t.to_string(),
                message: format!("invalid distribution {probs:?}"),
            });
        }
        for (o, p) in out.iter_mut().zip(probs) {
            *o += w * p;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use image::{GrayImage, RgbImage};

    struct Fixed {
        t: DisasterType,
        probs: [f64; 5],
    }

    impl Backbone for Fixed {
        fn kind(&self) -> BackboneKind {
            BackboneKind::External
        }
        fn disaster_type(&self) -> DisasterType {
            self.t
        }
        fn logits(&self, _: &Chip, _: &FeatureVector<f64>, _: &MetaVector<f64>) -> Result<[f64; 5], EnsembleError> {
            Ok(self.probs.map(|p| p.max(1e-300).ln()))
        }
        fn probs(&self, _: &Chip, _: &FeatureVector<f64>, _: &MetaVector<f64>) -> Result<[f64; 5], EnsembleError> {
            Ok(self.probs)
        }
    }

    fn fixed(t: DisasterType, probs: [f64; 5]) -> Arc<dyn Backbone> {
        Arc::new(Fixed { t, probs })
    }

    fn dummy_chip() -> Chip {
        Chip {
            building_id: "b".into(),
            scene_id: "s".into(),
            pixels: RgbImage::new(8, 8),
            mask: GrayImage::new(8, 8),
            area_fraction: 0.1,
            mask_area: 1,
            mask_perimeter: 4,
        }
    }

    fn meta() -> MetaVector<f64> {
        super::super::meta_vector(DisasterType::Flood, crate::hazard::HazardLevel::new(3).unwrap(), &[None; 7])
    }

    #[test]
    fn identity_routing() {
        let reg = BackboneRegistry::new([fixed(DisasterType::Flood, [0.2; 5])], None).unwrap();
        assert_eq!(route(DisasterType::Flood, &reg).unwrap(), RoutingWeights::single(DisasterType::Flood));
        assert!(matches!(
            route(DisasterType::Fire, &reg),
            Err(EnsembleError::NoBackboneAvailable(DisasterType::Fire))
        ));
        assert!(matches!(route_named("meteor", &reg), Err(EnsembleError::UnknownDisasterType(_))));
    }

    #[test]
    fn co_occurrence_routing() {
        let mut c = CoOccurrence([[0.0; 7]; 7]);
        c.set(DisasterType::Flood, DisasterType::Flood, 4.0);
        c.set(DisasterType::Flood, DisasterType::Hurricane, 1.0);
        c.set(DisasterType::Hurricane, DisasterType::Hurricane, 3.0);
        let reg = BackboneRegistry::new(
            [fixed(DisasterType::Flood, [0.2; 5]), fixed(DisasterType::Hurricane, [0.2; 5])],
            Some(c),
        )
        .unwrap();
        let w = route(DisasterType::Flood, &reg).unwrap();
        // 4 / (4 + 1) and 1 / (4 + 1).
        assert!((w.get(DisasterType::Flood) - 0.8).abs() < 1e-15);
        assert!((w.get(DisasterType::Hurricane) - 0.2).abs() < 1e-15);
        assert!((w.total() - 1.0).abs() < 1e-12);
        // Tsunami row is all zero and has no backbone.
        assert!(matches!(
            route(DisasterType::Tsunami, &reg),
            Err(EnsembleError::NoBackboneAvailable(DisasterType::Tsunami))
        ));
    }

    #[test]
    fn rejects_bad_matrices() {
        let mut asym = CoOccurrence::identity();
        asym.0[0][1] = 2.0;
        assert!(BackboneRegistry::new([], Some(asym)).is_err());
        let mut neg = CoOccurrence::identity();
        neg.set(DisasterType::Fire, DisasterType::Flood, -1.0);
        assert!(BackboneRegistry::new([], Some(neg)).is_err());
        let zero_row = CoOccurrence([[0.0; 7]; 7]);
        assert!(BackboneRegistry::new([fixed(DisasterType::Fire, [0.2; 5])], Some(zero_row)).is_err());
    }

    #[test]
    fn mixture_examples() {
        let a = [0.8, 0.2, 0.0, 0.0, 0.0];
        let b = [0.2; 5];
        let reg = BackboneRegistry::new([fixed(DisasterType::Flood, a), fixed(DisasterType::Fire, b)], None).unwrap();
        let chip = dummy_chip();
        let f = FeatureVector([0.0; 17]);
        let single = ensemble_predict(&chip, &f, &meta(), &reg, &RoutingWeights::single(DisasterType::Flood)).unwrap();
        assert_eq!(single, a);
        let half = RoutingWeights(BTreeMap::from([(DisasterType::Flood, 0.5), (DisasterType::Fire, 0.5)]));
        let mix = ensemble_predict(&chip, &f, &meta(), &reg, &half).unwrap();
        let expect = [0.5, 0.2, 0.1, 0.1, 0.1];
        for (m, e) in mix.iter().zip(expect) {
            assert!((m - e).abs() < 1e-15);
        }
        let bad = RoutingWeights(BTreeMap::from([(DisasterType::Flood, 0.7)]));
        assert!(matches!(
            ensemble_predict(&chip, &f, &meta(), &reg, &bad),
            Err(EnsembleError::InvalidRoutingWeights(_))
        ));
    }

    #[test]
    fn ordinal_reference_logits_recover_probs() {
        let b = ReferenceBackbone::new(DisasterType::Flood, Head::Ordinal(super::super::OrdinalHead::hazard_prior())).unwrap();
        let chip = dummy_chip();
        let f = FeatureVector([0.1; 17]);
        let p = b.probs(&chip, &f, &meta()).unwrap();
        let q = softmax(&b.logits(&chip, &f, &meta()).unwrap());
        for (x, y) in p.iter().zip(q) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(b.kind(), BackboneKind::ReferenceOrdinal);
    }
}
