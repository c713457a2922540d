//! Output distributions over the five damage levels and their losses.

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::EnsembleError;
use crate::scalar::Scalar;

use super::NUM_LEVELS;

/// Clamp applied to the target probability inside the log.
pub const CE_EPSILON: f64 = 1e-12;

/// Default minimum top probability for a confident classification.
pub const DEFAULT_TAU: f64 = 0.35;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    OrdinalCrossEntropy,
}

impl std::str::FromStr for LossKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ce" | "cross-entropy" => Ok(LossKind::CrossEntropy),
            "ordinal-ce" | "ordinal-cross-entropy" => Ok(LossKind::OrdinalCrossEntropy),
            other => Err(format!("unknown loss {other:?} (expected ce or ordinal-ce)")),
        }
    }
}

/// Predicted damage: a level in 1..=5 or unclassified when not confident.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DamageLevel {
    Level(u8),
    Unclassified,
}

impl DamageLevel {
    pub fn level(self) -> Option<u8> {
        match self {
            DamageLevel::Level(l) => Some(l),
            DamageLevel::Unclassified => None,
        }
    }
}

impl fmt::Display for DamageLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DamageLevel::Level(l) => write!(f, "{l}"),
            DamageLevel::Unclassified => f.write_str("unclassified"),
        }
    }
}

impl Serialize for DamageLevel {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            DamageLevel::Level(l) => s.serialize_u8(*l),
            DamageLevel::Unclassified => s.serialize_str("unclassified"),
        }
    }
}

impl<'de> Deserialize<'de> for DamageLevel {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            N(u64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::N(n @ 1..=5) => Ok(DamageLevel::Level(n as u8)),
            Raw::S(s) if s == "unclassified" => Ok(DamageLevel::Unclassified),
            Raw::N(n) => Err(serde::de::Error::custom(format!("damage level {n} outside 1..=5"))),
            Raw::S(s) => Err(serde::de::Error::custom(format!("invalid damage level {s:?}"))),
        }
    }
}

#[inline]
pub fn sigmoid<T: Scalar>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

/// Numerically stable softmax (max subtracted first).
pub fn softmax<T: Scalar>(logits: &[T; NUM_LEVELS]) -> [T; NUM_LEVELS] {
    let max = logits.iter().copied().fold(T::neg_infinity(), T::max);
    let mut out = logits.map(|l| (l - max).exp());
    let z: T = out.iter().copied().fold(T::zero(), |a, b| a + b);
    for p in &mut out {
        *p /= z;
    }
    out
}

pub fn check_cut_points<T: Scalar>(theta: &[T; NUM_LEVELS - 1]) -> Result<(), EnsembleError> {
    if theta.iter().any(|t| !t.is_finite()) || theta.windows(2).any(|w| w[0] >= w[1]) {
        return Err(EnsembleError::NonMonotoneCutPoints);
    }
    Ok(())
}

/// `F(hi) - F(lo)` for the logistic CDF with `lo < hi`, computed on whichever
/// tail keeps the subtraction well conditioned.
#[inline]
pub(crate) fn logistic_interval<T: Scalar>(lo: Option<T>, hi: Option<T>) -> T {
    match (lo, hi) {
        (None, None) => T::one(),
        (None, Some(h)) => sigmoid(h),
        (Some(l), None) => sigmoid(-l),
        (Some(l), Some(h)) => {
            if l > T::zero() {
                sigmoid(-l) - sigmoid(-h)
            } else {
                sigmoid(h) - sigmoid(l)
            }
        }
    }
}

/// Cumulative-link probabilities: `p_k = F(theta_k - s) - F(theta_{k-1} - s)`
/// with `theta_0 = -inf`, `theta_5 = +inf`.
pub fn ordinal_probs<T: Scalar>(score: T, theta: &[T; NUM_LEVELS - 1]) -> Result<[T; NUM_LEVELS], EnsembleError> {
    check_cut_points(theta)?;
    Ok(ordinal_probs_unchecked(score, theta))
}

pub(crate) fn ordinal_probs_unchecked<T: Scalar>(score: T, theta: &[T; NUM_LEVELS - 1]) -> [T; NUM_LEVELS] {
    let mut p = [T::zero(); NUM_LEVELS];
    for (k, pk) in p.iter_mut().enumerate() {
        let lo = (k > 0).then(|| theta[k - 1] - score);
        let hi = (k < NUM_LEVELS - 1).then(|| theta[k] - score);
        *pk = logistic_interval(lo, hi).max(T::zero());
    }
    p
}

/// Level (1-based) with the highest probability; ties go to the lowest level.
pub fn argmax_level<T: Scalar>(probs: &[T; NUM_LEVELS]) -> u8 {
    let mut best = 0;
    for k in 1..NUM_LEVELS {
        if probs[k] > probs[best] {
            best = k;
        }
    }
    best as u8 + 1
}

pub fn expected_level<T: Scalar>(probs: &[T; NUM_LEVELS]) -> T {
    probs
        .iter()
        .enumerate()
        .fold(T::zero(), |acc, (k, &p)| acc + T::lit((k + 1) as f64) * p)
}

/// `-ln(max(p_y, 1e-12))` for `y` in 1..=5.
pub fn cross_entropy<T: Scalar>(probs: &[T; NUM_LEVELS], y: u8) -> T {
    debug_assert!((1..=5).contains(&y));
    -probs[y as usize - 1].max(T::lit(CE_EPSILON)).ln()
}

/// Distance scaling applied by ordinal cross-entropy: `1 + |argmax - y| / 4`.
pub fn ordinal_factor<T: Scalar>(probs: &[T; NUM_LEVELS], y: u8) -> T {
    let dist = (i32::from(argmax_level(probs)) - i32::from(y)).abs();
    T::one() + T::lit(f64::from(dist) / (NUM_LEVELS - 1) as f64)
}

/// Cross-entropy scaled by the normalized distance between the predicted and
/// true level; equals plain cross-entropy when the prediction is right.
pub fn ordinal_cross_entropy<T: Scalar>(probs: &[T; NUM_LEVELS], y: u8) -> T {
    cross_entropy(probs, y) * ordinal_factor(probs, y)
}

pub fn loss<T: Scalar>(kind: LossKind, probs: &[T; NUM_LEVELS], y: u8) -> T {
    match kind {
        LossKind::CrossEntropy => cross_entropy(probs, y),
        LossKind::OrdinalCrossEntropy => ordinal_cross_entropy(probs, y),
    }
}

/// Argmax level when its probability reaches `tau`, else unclassified.
pub fn classify<T: Scalar>(probs: &[T; NUM_LEVELS], tau: T) -> DamageLevel {
    let level = argmax_level(probs);
    if probs[level as usize - 1] >= tau {
        DamageLevel::Level(level)
    } else {
        DamageLevel::Unclassified
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn softmax_examples() {
        assert_eq!(softmax(&[0.0f64; 5]), [0.2; 5]);
        // e / (e + 4) and 1 / (e + 4)
        let e = std::f64::consts::E;
        let expect = [e / (e + 4.0), 1.0 / (e + 4.0), 1.0 / (e + 4.0), 1.0 / (e + 4.0), 1.0 / (e + 4.0)];
        let got = softmax(&[1.0, 0.0, 0.0, 0.0, 0.0]);
        assert!(close(&got, &expect, 1e-15));
        assert!(close(&got, &[0.40461, 0.14885, 0.14885, 0.14885, 0.14885], 1e-5));
        let big = softmax::<f64>(&[1000.0, 999.0, 0.0, -1000.0, 0.0]);
        assert!(big.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_generic_f32() {
        let p: [f32; 5] = softmax(&[1.0f32, 0.0, 0.0, 0.0, 0.0]);
        assert!((p[0] - 0.40461).abs() < 1e-5);
    }

    #[test]
    fn ordinal_example() {
        let p = ordinal_probs(0.0f64, &[-1.0, 0.0, 1.0, 2.0]).unwrap();
        // Logistic arithmetic: s(-1), s(0)-s(-1), s(1)-s(0), s(2)-s(1), 1-s(2).
        let s = |x: f64| 1.0 / (1.0 + (-x).exp());
        let oracle = [s(-1.0), s(0.0) - s(-1.0), s(1.0) - s(0.0), s(2.0) - s(1.0), 1.0 - s(2.0)];
        assert!(close(&p, &oracle, 1e-15));
        assert!(close(&p, &[0.2689, 0.2311, 0.2311, 0.1497, 0.1192], 1e-4));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ordinal_limits_and_errors() {
        let p = ordinal_probs(1e6f64, &[-1.0, 0.0, 1.0, 2.0]).unwrap();
        assert_eq!(argmax_level(&p), 5);
        assert!((p[4] - 1.0).abs() < 1e-12);
        let q = ordinal_probs(-1e6f64, &[-1.0, 0.0, 1.0, 2.0]).unwrap();
        assert!((q[0] - 1.0).abs() < 1e-12);
        assert!(matches!(
            ordinal_probs(0.0f64, &[0.0, 0.0, 1.0, 2.0]),
            Err(EnsembleError::NonMonotoneCutPoints)
        ));
        assert!(ordinal_probs(0.0f64, &[2.0, 1.0, 3.0, 4.0]).is_err());
    }

    #[test]
    fn cross_entropy_examples() {
        assert_eq!(cross_entropy(&[1.0f64, 0.0, 0.0, 0.0, 0.0], 1), 0.0);
        assert!((cross_entropy(&[0.2f64; 5], 4) - 5f64.ln()).abs() < 1e-12);
        assert!((cross_entropy(&[0.2f64; 5], 4) - 1.60944).abs() < 1e-5);
        let clamped = cross_entropy(&[1.0f64, 0.0, 0.0, 0.0, 0.0], 3);
        assert!((clamped - (-(1e-12f64).ln())).abs() < 1e-9);
        assert!(clamped.is_finite());
    }

    #[test]
    fn ordinal_ce_examples() {
        let p = [0.3f64, 0.2, 0.2, 0.1, 0.2];
        assert_eq!(ordinal_cross_entropy(&p, 1), cross_entropy(&p, 1));
        assert!((ordinal_cross_entropy(&p, 5) - 2.0 * cross_entropy(&p, 5)).abs() < 1e-15);
        let u = [0.2f64; 5];
        assert!((ordinal_cross_entropy(&u, 3) - 5f64.ln() * 1.5).abs() < 1e-12);
    }

    #[test]
    fn classify_examples() {
        assert_eq!(classify(&[0.9f64, 0.025, 0.025, 0.025, 0.025], 0.35), DamageLevel::Level(1));
        assert_eq!(classify(&[0.3f64, 0.25, 0.25, 0.1, 0.1], 0.35), DamageLevel::Unclassified);
        assert_eq!(classify(&[0.4f64, 0.4, 0.1, 0.05, 0.05], 0.35), DamageLevel::Level(1));
        assert_eq!(classify(&[0.2f64; 5], 0.35), DamageLevel::Unclassified);
    }

    #[test]
    fn damage_level_serde() {
        assert_eq!(serde_json::to_string(&DamageLevel::Level(3)).unwrap(), "3");
        assert_eq!(serde_json::to_string(&DamageLevel::Unclassified).unwrap(), "\"unclassified\"");
        assert_eq!(serde_json::from_str::<DamageLevel>("5").unwrap(), DamageLevel::Level(5));
        assert!(serde_json::from_str::<DamageLevel>("0").is_err());
    }

    fn arb_theta() -> impl Strategy<Value = [f64; 4]> {
        (-5.0f64..5.0, prop::array::uniform3(0.01f64..3.0)).prop_map(|(t0, g)| {
            [t0, t0 + g[0], t0 + g[0] + g[1], t0 + g[0] + g[1] + g[2]]
        })
    }

    proptest! {
        #[test]
        fn ordinal_probs_form_distribution(s in -50.0f64..50.0, theta in arb_theta()) {
            let p = ordinal_probs(s, &theta).unwrap();
            prop_assert!(p.iter().all(|&x| x >= 0.0));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        }

        #[test]
        fn expected_level_monotone_in_score(a in -20.0f64..20.0, b in -20.0f64..20.0, theta in arb_theta()) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let el = expected_level(&ordinal_probs(lo, &theta).unwrap());
            let eh = expected_level(&ordinal_probs(hi, &theta).unwrap());
            prop_assert!(el <= eh + 1e-12);
        }

        #[test]
        fn softmax_shift_invariant(l in prop::array::uniform5(-30.0f64..30.0), c in -100.0f64..100.0) {
            let p = softmax(&l);
            let q = softmax(&l.map(|x| x + c));
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            prop_assert_eq!(argmax_level(&p), argmax_level(&q));
            prop_assert!(close(&p, &q, 1e-12));
        }

        #[test]
        fn ordinal_ce_dominates_ce(raw in prop::array::uniform5(0.0f64..1.0), y in 1u8..=5) {
            let z: f64 = raw.iter().sum::<f64>() + 1e-9;
            let p = raw.map(|x| (x + 1e-9 / 5.0) / z);
            let ce = cross_entropy(&p, y);
            let oce = ordinal_cross_entropy(&p, y);
            prop_assert!(oce >= ce);
            prop_assert_eq!(oce == ce, argmax_level(&p) == y || ce == 0.0);
        }
    }
}
