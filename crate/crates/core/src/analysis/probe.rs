//! Linear probe over block-DCT magnitude features: a deliberately weak
//! learner standing in for the CNN victims. If this probe picks a trigger
//! up, the trigger is present in the data itself.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::jpeg::ZIGZAG;
use crate::pipeline::Dataset;
use crate::spectral::{Dct8, SpatialBlock};

use super::mann_whitney_auc;

/// Geometry the feature extractor was fixed to at training time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FeatureSpec {
    pub width: usize,
    pub height: usize,
    /// Feature count excluding the bias term.
    pub dim: usize,
}

impl FeatureSpec {
    pub fn for_dims(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            dim: (width / 8) * (height / 8) * 64,
        }
    }
}

/// Gradient-descent hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProbeHyper {
    pub epochs: usize,
    pub learning_rate: f64,
    pub l2: f64,
}

impl Default for ProbeHyper {
    fn default() -> Self {
        Self {
            epochs: 300,
            learning_rate: 0.05,
            l2: 1e-4,
        }
    }
}

/// Multinomial logistic regression on block-DCT magnitudes of luma.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    /// `class_count` rows of `dim + 1` weights, bias last.
    weights: Vec<f64>,
    class_count: usize,
    spec: FeatureSpec,
    seed: u64,
    hyper: ProbeHyper,
    loss_history: Vec<f64>,
}

/// BA/ASR proxies plus the separability of the target-class score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectReport {
    pub ba_proxy: f64,
    pub asr_proxy: f64,
    /// Mann-Whitney AUC of the target-class probability, triggered vs clean.
    pub auc: f64,
}

/// Block-DCT magnitudes of luma in zigzag order, scaled so the DC of a unit
/// block is 1. Whole blocks only; excludes the bias term.
pub fn features(img: &PlanarImage, spec: &FeatureSpec) -> Result<Vec<f64>> {
    if img.width() != spec.width || img.height() != spec.height {
        return Err(Error::ShapeMismatch(
            img.width(),
            img.height(),
            spec.width,
            spec.height,
        ));
    }
    let luma = img.luma();
    let (bx, by) = (spec.width / 8, spec.height / 8);
    let dct = Dct8::new();
    let mut out = Vec::with_capacity(spec.dim);
    for b_y in 0..by {
        for b_x in 0..bx {
            let mut spatial = [0.0; 64];
            for y in 0..8 {
                for x in 0..8 {
                    spatial[y * 8 + x] = luma[(b_y * 8 + y) * spec.width + b_x * 8 + x];
                }
            }
            let freq = dct.forward(&SpatialBlock(spatial));
            for zz in 0..64 {
                out.push(freq.0[ZIGZAG[zz]].abs() / 8.0);
            }
        }
    }
    Ok(out)
}

/// Cross-entropy loss and gradient of the multinomial model over a batch.
/// `xs` rows already carry the trailing bias feature; the bias column is
/// exempt from L2. Exposed so the gradient can be checked independently.
pub fn log_loss_and_gradient(
    weights: &[f64],
    xs: &[f64],
    labels: &[u32],
    class_count: usize,
    width: usize,
    l2: f64,
) -> (f64, Vec<f64>) {
    let n = labels.len();
    debug_assert_eq!(xs.len(), n * width);
    debug_assert_eq!(weights.len(), class_count * width);

    let mut grad = vec![0.0; weights.len()];
    let mut loss = 0.0;
    let mut logits = vec![0.0; class_count];
    for (row, &label) in xs.chunks_exact(width).zip(labels) {
        for (c, logit) in logits.iter_mut().enumerate() {
            *logit = weights[c * width..(c + 1) * width]
                .iter()
                .zip(row)
                .map(|(w, x)| w * x)
                .sum();
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for logit in &mut logits {
            *logit = libm::exp(*logit - max);
            z += *logit;
        }
        loss -= libm::log(logits[label as usize] / z);
        for c in 0..class_count {
            let delta = logits[c] / z - if c as u32 == label { 1.0 } else { 0.0 };
            if delta == 0.0 {
                continue;
            }
            let g = &mut grad[c * width..(c + 1) * width];
            for (gv, &xv) in g.iter_mut().zip(row) {
                *gv += delta * xv;
            }
        }
    }
    let inv_n = 1.0 / n as f64;
    loss *= inv_n;
    for g in &mut grad {
        *g *= inv_n;
    }
    if l2 > 0.0 {
        for c in 0..class_count {
            for d in 0..width - 1 {
                let w = weights[c * width + d];
                loss += 0.5 * l2 * w * w;
                grad[c * width + d] += l2 * w;
            }
        }
    }
    (loss, grad)
}

/// Trains the probe by full-batch gradient descent. Deterministic given the
/// seed: fixed initialization, fixed iteration order, no parallelism.
pub fn probe_train(train: &Dataset, seed: u64, hyper: ProbeHyper) -> Result<ProbeModel> {
    let class_count = train.class_count() as usize;
    if class_count < 2 {
        return Err(Error::DegenerateClasses(class_count));
    }
    let mut present = vec![false; class_count];
    for s in train.samples() {
        present[s.label as usize] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateClasses(1));
    }

    let first = &train.samples()[0].image;
    let spec = FeatureSpec::for_dims(first.width(), first.height());
    let width = spec.dim + 1;

    let n = train.len();
    let mut xs = Vec::with_capacity(n * width);
    let mut labels = Vec::with_capacity(n);
    for s in train.samples() {
        xs.extend(features(&s.image, &spec)?);
        xs.push(1.0); // bias
        labels.push(s.label);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights: Vec<f64> = (0..class_count * width)
        .map(|_| rng.gen_range(-0.01..0.01))
        .collect();

    let mut loss_history = Vec::with_capacity(hyper.epochs);
    for _ in 0..hyper.epochs {
        let (loss, grad) = log_loss_and_gradient(&weights, &xs, &labels, class_count, width, hyper.l2);
        loss_history.push(loss);
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= hyper.learning_rate * g;
        }
    }

    Ok(ProbeModel {
        weights,
        class_count,
        spec,
        seed,
        hyper,
        loss_history,
    })
}

impl ProbeModel {
    pub fn class_count(&self) -> usize {
        self.class_count
    }

    pub fn feature_spec(&self) -> &FeatureSpec {
        &self.spec
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn hyper(&self) -> &ProbeHyper {
        &self.hyper
    }

    /// Training loss per epoch, in order.
    pub fn loss_history(&self) -> &[f64] {
        &self.loss_history
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Softmax class probabilities for one image.
    pub fn predict_proba(&self, img: &PlanarImage) -> Result<Vec<f64>> {
        let mut x = features(img, &self.spec)?;
        x.push(1.0);
        let width = self.spec.dim + 1;
        let mut logits = Vec::with_capacity(self.class_count);
        for c in 0..self.class_count {
            logits.push(
                self.weights[c * width..(c + 1) * width]
                    .iter()
                    .zip(&x)
                    .map(|(w, v)| w * v)
                    .sum::<f64>(),
            );
        }
        let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        for l in &mut logits {
            *l = libm::exp(*l - max);
            z += *l;
        }
        for l in &mut logits {
            *l /= z;
        }
        Ok(logits)
    }

    pub fn predict(&self, img: &PlanarImage) -> Result<u32> {
        let p = self.predict_proba(img)?;
        Ok(p.iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("probabilities are never NaN"))
            .map(|(i, _)| i as u32)
            .expect("at least two classes"))
    }

    pub fn accuracy(&self, ds: &Dataset) -> Result<f64> {
        let mut hits = 0usize;
        for s in ds.samples() {
            if self.predict(&s.image)? == s.label {
                hits += 1;
            }
        }
        Ok(hits as f64 / ds.len() as f64)
    }
}

/// BA on the clean test set; ASR as the fraction of triggered samples
/// (excluding those whose true label already is the target) classified as
/// the target. `triggered_test` must carry the original labels.
pub fn probe_effect(
    model: &ProbeModel,
    clean_test: &Dataset,
    triggered_test: &Dataset,
    target: u32,
) -> Result<EffectReport> {
    if clean_test.is_empty() || triggered_test.is_empty() {
        return Err(Error::EmptyInput);
    }
    let ba_proxy = model.accuracy(clean_test)?;

    let mut hits = 0usize;
    let mut total = 0usize;
    let mut pos_scores = Vec::new();
    for s in triggered_test.samples() {
        if s.label == target {
            continue;
        }
        total += 1;
        let p = model.predict_proba(&s.image)?;
        if model.predict(&s.image)? == target {
            hits += 1;
        }
        pos_scores.push(p[target as usize]);
    }
    if total == 0 {
        return Err(Error::EmptyInput);
    }
    let asr_proxy = hits as f64 / total as f64;

    let mut neg_scores = Vec::with_capacity(clean_test.len());
    for s in clean_test.samples() {
        neg_scores.push(model.predict_proba(&s.image)?[target as usize]);
    }
    let auc = mann_whitney_auc(&pos_scores, &neg_scores)?;

    Ok(EffectReport {
        ba_proxy,
        asr_proxy,
        auc,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::Sample;
    use crate::synth;
    use alloc::string::String;

    fn toy_two_class(n_per: usize) -> Dataset {
        // class 0: dark smooth images; class 1: bright textured ones
        let mut samples = Vec::new();
        for i in 0..n_per {
            let mut dark = synth::photo_like(i as u64, 16, 16);
            for c in 0..3 {
                for v in dark.plane_mut(c) {
                    *v *= 0.2;
                }
            }
            samples.push(Sample {
                image: dark,
                label: 0,
            });
            let mut bright = synth::photo_like(1000 + i as u64, 16, 16);
            for c in 0..3 {
                for v in bright.plane_mut(c) {
                    *v = 0.6 + 0.4 * *v;
                }
            }
            samples.push(Sample {
                image: bright,
                label: 1,
            });
        }
        Dataset::new(samples, 2, String::from("toy")).unwrap()
    }

    #[test]
    fn separable_toy_data_trains_to_high_accuracy() {
        let ds = toy_two_class(30);
        let model = probe_train(&ds, 5, ProbeHyper::default()).unwrap();
        assert!(model.accuracy(&ds).unwrap() >= 0.99);
    }

    #[test]
    fn loss_decreases_monotonically() {
        let ds = toy_two_class(20);
        let model = probe_train(&ds, 6, ProbeHyper::default()).unwrap();
        let losses = model.loss_history();
        assert_eq!(losses.len(), 300);
        for w in losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12, "loss rose: {} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn training_is_bit_deterministic() {
        let ds = toy_two_class(10);
        let a = probe_train(&ds, 7, ProbeHyper::default()).unwrap();
        let b = probe_train(&ds, 7, ProbeHyper::default()).unwrap();
        assert_eq!(a.weights(), b.weights());
        let c = probe_train(&ds, 8, ProbeHyper::default()).unwrap();
        assert_ne!(a.weights(), c.weights());
    }

    #[test]
    fn single_class_data_is_rejected() {
        let samples = (0..4)
            .map(|i| Sample {
                image: synth::photo_like(i, 16, 16),
                label: 0,
            })
            .collect();
        let ds = Dataset::new(samples, 2, String::from("one-class")).unwrap();
        assert!(matches!(
            probe_train(&ds, 0, ProbeHyper::default()),
            Err(Error::DegenerateClasses(1))
        ));
    }

    // Oracle: central finite differences around random weights.
    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xBEEF);
        for config in 0..10 {
            let n = 6;
            let classes = 3;
            let width = 8;
            let xs: Vec<f64> = (0..n * width).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let labels: Vec<u32> = (0..n).map(|_| rng.gen_range(0..classes as u32)).collect();
            let weights: Vec<f64> = (0..classes * width)
                .map(|_| rng.gen_range(-0.5..0.5))
                .collect();
            let l2 = if config % 2 == 0 { 1e-4 } else { 0.0 };

            let (_, grad) = log_loss_and_gradient(&weights, &xs, &labels, classes, width, l2);
            let eps = 1e-6;
            for idx in 0..weights.len() {
                let mut wp = weights.clone();
                wp[idx] += eps;
                let (lp, _) = log_loss_and_gradient(&wp, &xs, &labels, classes, width, l2);
                let mut wm = weights.clone();
                wm[idx] -= eps;
                let (lm, _) = log_loss_and_gradient(&wm, &xs, &labels, classes, width, l2);
                let fd = (lp - lm) / (2.0 * eps);
                let denom = grad[idx].abs().max(fd.abs()).max(1e-8);
                assert!(
                    (grad[idx] - fd).abs() / denom <= 1e-5,
                    "config {config} weight {idx}: analytic {} vs fd {fd}",
                    grad[idx]
                );
            }
        }
    }

    #[test]
    fn probe_effect_excludes_target_class_samples() {
        let ds = toy_two_class(20);
        let model = probe_train(&ds, 9, ProbeHyper::default()).unwrap();
        // triggered set drawn from class 0 only, target = 0: nothing to count
        let only_target: Vec<Sample> = ds
            .samples()
            .iter()
            .filter(|s| s.label == 0)
            .cloned()
            .collect();
        let target_ds = Dataset::new(only_target, 2, String::from("t")).unwrap();
        assert!(matches!(
            probe_effect(&model, &ds, &target_ds, 0),
            Err(Error::EmptyInput)
        ));

        // with target = 1 the class-0 samples count, and a clean model stays
        // near chance on them
        let report = probe_effect(&model, &ds, &target_ds, 1).unwrap();
        assert!(report.ba_proxy >= 0.99);
        assert!(report.asr_proxy <= 0.05, "asr {}", report.asr_proxy);
    }
}
