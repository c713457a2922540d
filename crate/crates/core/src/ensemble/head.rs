//! Linear heads over the concatenated feature and meta inputs.

use serde::{Deserialize, Serialize};

use crate::error::EnsembleError;
use crate::scalar::Scalar;

use super::features::serde_arrays;
use super::probs::{
    logistic_interval, ordinal_factor, ordinal_probs_unchecked, softmax, sigmoid, LossKind, CE_EPSILON,
};
use super::{FeatureVector, MetaVector, FEATURE_LEN, HAZARD_INPUT_INDEX, INPUT_LEN, NUM_LEVELS};

/// Smallest gap kept between consecutive cut points after projection.
pub const MIN_CUT_GAP: f64 = 1e-3;

/// Concatenates features and meta into one head input.
pub fn head_input<T: Scalar>(features: &FeatureVector<T>, meta: &MetaVector<T>) -> Vec<T> {
    let mut x = Vec::with_capacity(INPUT_LEN);
    x.extend_from_slice(&features.0);
    x.extend_from_slice(&meta.0);
    debug_assert_eq!(x.len(), FEATURE_LEN + meta.0.len());
    x
}

/// Per-input affine normalization `(x - mean) / scale`, `scale > 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Standardizer<T: Scalar> {
    pub mean: Vec<T>,
    pub scale: Vec<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn identity(dim: usize) -> Self {
        Standardizer {
            mean: vec![T::zero(); dim],
            scale: vec![T::one(); dim],
        }
    }

    /// Population mean and std per column; constant columns keep scale 1.
    pub fn fit<'a>(rows: impl IntoIterator<Item = &'a [T]>, dim: usize) -> Self {
        let rows: Vec<&[T]> = rows.into_iter().collect();
        if rows.is_empty() {
            return Self::identity(dim);
        }
        let n = T::lit(rows.len() as f64);
        let mut mean = vec![T::zero(); dim];
        for r in &rows {
            for (m, &v) in mean.iter_mut().zip(r.iter()) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![T::zero(); dim];
        for r in &rows {
            for ((s, &v), &m) in var.iter_mut().zip(r.iter()).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|v| {
                let sd = (v / n).sqrt();
                if sd > T::lit(1e-6) {
                    sd
                } else {
                    T::one()
                }
            })
            .collect();
        Standardizer { mean, scale }
    }

    pub fn apply(&self, x: &[T]) -> Vec<T> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.scale)
            .map(|((&v, &m), &s)| (v - m) / s)
            .collect()
    }

    fn validate(&self, dim: usize) -> Result<(), EnsembleError> {
        if self.mean.len() != dim || self.scale.len() != dim {
            return Err(EnsembleError::InvalidInput(format!("standardizer must have {dim} entries")));
        }
        if self.scale.iter().any(|&s| !s.is_finite() || s <= T::zero()) || self.mean.iter().any(|m| !m.is_finite()) {
            return Err(EnsembleError::InvalidInput("standardizer scales must be positive and finite".into()));
        }
        Ok(())
    }
}

/// Something the trainer can fit: flat parameters, per-sample loss and
/// gradient, and a projection back onto the feasible set.
pub trait Trainable<T: Scalar> {
    fn params(&self) -> Vec<T>;
    fn set_params(&mut self, p: &[T]);
    fn probs(&self, x: &[T]) -> [T; NUM_LEVELS];
    /// Loss for one sample; the gradient is *added* into `grad`.
    fn loss_grad(&self, x: &[T], y: u8, kind: LossKind, grad: &mut [T]) -> T;
    fn project(&mut self);
    fn set_standardizer(&mut self, s: Standardizer<T>);
    /// Resets to a label-prior initialization.
    fn init_from_labels(&mut self, counts: &[usize; NUM_LEVELS]);
    /// Optional data-driven starting point applied after the label prior.
    /// `inputs` are raw rows; the standardizer is already set.
    fn warm_start(&mut self, _inputs: &[&[T]], _labels: &[u8]) {}

    fn loss(&self, x: &[T], y: u8, kind: LossKind) -> T {
        super::probs::loss(kind, &self.probs(x), y)
    }
}

/// Smoothed class frequencies `(c_k + 0.5) / (n + 2.5)`.
fn smoothed_freqs<T: Scalar>(counts: &[usize; NUM_LEVELS]) -> [T; NUM_LEVELS] {
    let n: usize = counts.iter().sum();
    counts.map(|c| T::lit((c as f64 + 0.5) / (n as f64 + 2.5)))
}

#[inline]
fn logistic_density<T: Scalar>(u: T) -> T {
    let s = sigmoid(u);
    s * (T::one() - s)
}

/// Cumulative-link (proportional odds) head. The weight on the overall hazard
/// input is kept non-negative, so the predicted level distribution is
/// stochastically nondecreasing in the hazard level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct OrdinalHead<T: Scalar> {
    pub weights: Vec<T>,
    #[serde(with = "serde_arrays")]
    pub cut_points: [T; NUM_LEVELS - 1],
    pub standardizer: Standardizer<T>,
}

impl<T: Scalar> OrdinalHead<T> {
    pub fn zeroed() -> Self {
        OrdinalHead {
            weights: vec![T::zero(); INPUT_LEN],
            cut_points: [-1.5, -0.5, 0.5, 1.5].map(T::lit),
            standardizer: Standardizer::identity(INPUT_LEN),
        }
    }

    /// Untrained head that ignores the image and maps hazard level L to a
    /// distribution centered on damage level L.
    pub fn hazard_prior() -> Self {
        let mut h = Self::zeroed();
        h.weights[HAZARD_INPUT_INDEX] = T::lit(10.0);
        h.cut_points = [3.0, 5.0, 7.0, 9.0].map(T::lit);
        h
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.weights.len() != INPUT_LEN || self.weights.iter().any(|w| !w.is_finite()) {
            return Err(EnsembleError::InvalidInput(format!("ordinal head needs {INPUT_LEN} finite weights")));
        }
        super::probs::check_cut_points(&self.cut_points)?;
        if self.weights[HAZARD_INPUT_INDEX] < T::zero() {
            return Err(EnsembleError::InvalidInput("hazard weight must be non-negative".into()));
        }
        self.standardizer.validate(INPUT_LEN)
    }

    pub fn score(&self, x: &[T]) -> T {
        let z = self.standardizer.apply(x);
        z.iter().zip(&self.weights).fold(T::zero(), |a, (&zi, &wi)| a + zi * wi)
    }

    pub fn hazard_weight(&self) -> T {
        self.weights[HAZARD_INPUT_INDEX]
    }
}

/// Euclidean projection of `theta` onto `{theta_k >= theta_{k-1} + gap}` via
/// pool-adjacent-violators on the gap-shifted values.
pub fn project_increasing<T: Scalar>(theta: &mut [T], gap: T) {
    let shifted: Vec<T> = theta
        .iter()
        .enumerate()
        .map(|(k, &t)| t - gap * T::lit(k as f64))
        .collect();
    // Blocks of (sum, count).
    let mut blocks: Vec<(T, usize)> = Vec::with_capacity(shifted.len());
    for v in shifted {
        blocks.push((v, 1));
        while blocks.len() > 1 {
            let (s1, n1) = blocks[blocks.len() - 1];
            let (s0, n0) = blocks[blocks.len() - 2];
            if s0 / T::lit(n0 as f64) > s1 / T::lit(n1 as f64) {
                blocks.pop();
                *blocks.last_mut().unwrap() = (s0 + s1, n0 + n1);
            } else {
                break;
            }
        }
    }
    let mut k = 0;
    for (s, n) in blocks {
        let m = s / T::lit(n as f64);
        for _ in 0..n {
            theta[k] = m + gap * T::lit(k as f64);
            k += 1;
        }
    }
}

impl<T: Scalar> Trainable<T> for OrdinalHead<T> {
    fn params(&self) -> Vec<T> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.cut_points);
        p
    }

    fn set_params(&mut self, p: &[T]) {
        self.weights.copy_from_slice(&p[..INPUT_LEN]);
        self.cut_points.copy_from_slice(&p[INPUT_LEN..]);
    }

    fn probs(&self, x: &[T]) -> [T; NUM_LEVELS] {
        ordinal_probs_unchecked(self.score(x), &self.cut_points)
    }

    fn loss_grad(&self, x: &[T], y: u8, kind: LossKind, grad: &mut [T]) -> T {
        let z = self.standardizer.apply(x);
        let s = z.iter().zip(&self.weights).fold(T::zero(), |a, (&zi, &wi)| a + zi * wi);
        let probs = ordinal_probs_unchecked(s, &self.cut_points);
        let k = y as usize - 1;
        let factor = match kind {
            LossKind::CrossEntropy => T::one(),
            LossKind::OrdinalCrossEntropy => ordinal_factor(&probs, y),
        };
        let lo = (k > 0).then(|| self.cut_points[k - 1] - s);
        let hi = (k < NUM_LEVELS - 1).then(|| self.cut_points[k] - s);
        let p = logistic_interval(lo, hi);
        let eps = T::lit(CE_EPSILON);
        if p <= eps {
            return -eps.ln() * factor;
        }
        let loss = -p.ln() * factor;
        let dl_dp = -factor / p;
        let f_hi = hi.map_or(T::zero(), logistic_density);
        let f_lo = lo.map_or(T::zero(), logistic_density);
        let dl_ds = dl_dp * (f_lo - f_hi);
        for (g, &zi) in grad[..INPUT_LEN].iter_mut().zip(&z) {
            *g += dl_ds * zi;
        }
        if hi.is_some() {
            grad[INPUT_LEN + k] += dl_dp * f_hi;
        }
        if lo.is_some() {
            grad[INPUT_LEN + k - 1] -= dl_dp * f_lo;
        }
        loss
    }

    fn project(&mut self) {
        project_increasing(&mut self.cut_points, T::lit(MIN_CUT_GAP));
        let w = &mut self.weights[HAZARD_INPUT_INDEX];
        if *w < T::zero() {
            *w = T::zero();
        }
    }

    fn set_standardizer(&mut self, s: Standardizer<T>) {
        self.standardizer = s;
    }

    fn init_from_labels(&mut self, counts: &[usize; NUM_LEVELS]) {
        let freqs = smoothed_freqs::<T>(counts);
        let mut cum = T::zero();
        for (c, f) in self.cut_points.iter_mut().zip(freqs) {
            cum += f;
            *c = (cum / (T::one() - cum)).ln();
        }
        self.weights.iter_mut().for_each(|w| *w = T::zero());
    }

    /// Ridge regression of the level on the standardized inputs, mapped onto
    /// the cumulative-link scale: cut points sit at the half-level boundaries
    /// and the logistic scale matches the residual spread.
    fn warm_start(&mut self, inputs: &[&[T]], labels: &[u8]) {
        let n = inputs.len();
        if n == 0 {
            return;
        }
        let rows: Vec<Vec<f64>> = inputs
            .iter()
            .map(|x| self.standardizer.apply(x).iter().map(|v| v.to_f64_lossy()).collect())
            .collect();
        let y: Vec<f64> = labels.iter().map(|&l| f64::from(l)).collect();
        let mean_y = y.iter().sum::<f64>() / n as f64;
        let z = nalgebra::DMatrix::from_fn(n, INPUT_LEN, |i, j| rows[i][j]);
        let yc = nalgebra::DVector::from_iterator(n, y.iter().map(|v| v - mean_y));
        let mut gram = z.transpose() * &z;
        for i in 0..INPUT_LEN {
            gram[(i, i)] += RIDGE * n as f64;
        }
        let Some(beta) = gram.cholesky().map(|c| c.solve(&(z.transpose() * &yc))) else {
            return;
        };
        let resid = &yc - &z * &beta;
        let sigma = (resid.norm_squared() / n as f64).sqrt().max(MIN_RESIDUAL_SD);
        // Logistic noise with unit scale has standard deviation pi / sqrt(3).
        let c = std::f64::consts::PI / (3f64.sqrt() * sigma);
        for (w, b) in self.weights.iter_mut().zip(beta.iter()) {
            *w = T::lit(c * b);
        }
        for (k, t) in self.cut_points.iter_mut().enumerate() {
            *t = T::lit(c * (k as f64 + 1.5 - mean_y));
        }
        self.project();
    }
}

/// Ridge strength per sample for [`OrdinalHead`]'s warm start.
const RIDGE: f64 = 1e-3;
/// Floor on the residual spread so separable data gives a finite scale.
const MIN_RESIDUAL_SD: f64 = 0.05;

/// Softmax-linear head: `softmax(W z + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SoftmaxHead<T: Scalar> {
    /// Row-major `NUM_LEVELS x INPUT_LEN`.
    pub weights: Vec<T>,
    #[serde(with = "serde_arrays")]
    pub bias: [T; NUM_LEVELS],
    pub standardizer: Standardizer<T>,
}

impl<T: Scalar> SoftmaxHead<T> {
    pub fn zeroed() -> Self {
        SoftmaxHead {
            weights: vec![T::zero(); NUM_LEVELS * INPUT_LEN],
            bias: [T::zero(); NUM_LEVELS],
            standardizer: Standardizer::identity(INPUT_LEN),
        }
    }

    /// Untrained head with logits `k * 5h - k^2 / 2` for level k and hazard
    /// input h, i.e. a quadratic peaked at damage level = hazard level.
    pub fn hazard_prior() -> Self {
        let mut h = Self::zeroed();
        for k in 0..NUM_LEVELS {
            let level = (k + 1) as f64;
            h.weights[k * INPUT_LEN + HAZARD_INPUT_INDEX] = T::lit(5.0 * level);
            h.bias[k] = T::lit(-level * level / 2.0);
        }
        h
    }

    pub fn validate(&self) -> Result<(), EnsembleError> {
        if self.weights.len() != NUM_LEVELS * INPUT_LEN
            || self.weights.iter().chain(&self.bias).any(|w| !w.is_finite())
        {
            return Err(EnsembleError::InvalidInput(format!(
                "softmax head needs {} finite weights",
                NUM_LEVELS * INPUT_LEN
            )));
        }
        self.standardizer.validate(INPUT_LEN)
    }

    pub fn logits(&self, x: &[T]) -> [T; NUM_LEVELS] {
        let z = self.standardizer.apply(x);
        let mut out = self.bias;
        for (k, o) in out.iter_mut().enumerate() {
            let row = &self.weights[k * INPUT_LEN..(k + 1) * INPUT_LEN];
            *o += row.iter().zip(&z).fold(T::zero(), |a, (&w, &zi)| a + w * zi);
        }
        out
    }
}

impl<T: Scalar> Trainable<T> for SoftmaxHead<T> {
    fn params(&self) -> Vec<T> {
        let mut p = self.weights.clone();
        p.extend_from_slice(&self.bias);
        p
    }

    fn set_params(&mut self, p: &[T]) {
        let n = NUM_LEVELS * INPUT_LEN;
        self.weights.copy_from_slice(&p[..n]);
        self.bias.copy_from_slice(&p[n..]);
    }

    fn probs(&self, x: &[T]) -> [T; NUM_LEVELS] {
        softmax(&self.logits(x))
    }

    fn loss_grad(&self, x: &[T], y: u8, kind: LossKind, grad: &mut [T]) -> T {
        let z = self.standardizer.apply(x);
        let probs = self.probs(x);
        let k = y as usize - 1;
        let factor = match kind {
            LossKind::CrossEntropy => T::one(),
            LossKind::OrdinalCrossEntropy => ordinal_factor(&probs, y),
        };
        let eps = T::lit(CE_EPSILON);
        if probs[k] <= eps {
            return -eps.ln() * factor;
        }
        let n = NUM_LEVELS * INPUT_LEN;
        for j in 0..NUM_LEVELS {
            let target = if j == k { T::one() } else { T::zero() };
            let d = factor * (probs[j] - target);
            for (g, &zi) in grad[j * INPUT_LEN..(j + 1) * INPUT_LEN].iter_mut().zip(&z) {
                *g += d * zi;
            }
            grad[n + j] += d;
        }
        -probs[k].ln() * factor
    }

    fn project(&mut self) {}

    fn set_standardizer(&mut self, s: Standardizer<T>) {
        self.standardizer = s;
    }

    fn init_from_labels(&mut self, counts: &[usize; NUM_LEVELS]) {
        self.bias = smoothed_freqs::<T>(counts).map(|f| f.ln());
        self.weights.iter_mut().for_each(|w| *w = T::zero());
    }
}

/// A reference head of either kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", bound = "T: Scalar")]
pub enum Head<T: Scalar> {
    #[serde(rename = "reference-ordinal")]
    Ordinal(OrdinalHead<T>),
    #[serde(rename = "reference-softmax")]
    Softmax(SoftmaxHead<T>),
}

impl<T: Scalar> Head<T> {
    pub fn validate(&self) -> Result<(), EnsembleError> {
        match self {
            Head::Ordinal(h) => h.validate(),
            Head::Softmax(h) => h.validate(),
        }
    }

    pub fn probs(&self, x: &[T]) -> [T; NUM_LEVELS] {
        match self {
            Head::Ordinal(h) => h.probs(x),
            Head::Softmax(h) => h.probs(x),
        }
    }

    pub fn as_trainable_mut(&mut self) -> &mut dyn Trainable<T> {
        match self {
            Head::Ordinal(h) => h,
            Head::Softmax(h) => h,
        }
    }

    pub fn as_trainable(&self) -> &dyn Trainable<T> {
        match self {
            Head::Ordinal(h) => h,
            Head::Softmax(h) => h,
        }
    }
}
