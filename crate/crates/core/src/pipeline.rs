//! End-to-end poisoning runs: poison-subset selection, trigger and mask
//! assignment, ROI compression, decompression, relabeling, and the manifest
//! that records every per-sample decision.
//!
//! Per-sample work is pure and keyed by a seed derived from (master seed,
//! sample index), so a batch can be fanned out to any number of workers and
//! still assemble byte-identical outputs.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::image::PlanarImage;
use crate::jpeg::{self, JpegStream, RoiCodecConfig};
use crate::masks::{self, MaskKind, RoiMask};
use crate::spectral::HighPassSpec;
use crate::triggers::TriggerKind;

/// SplitMix64 avalanche step.
pub(crate) fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Splittable per-sample seed: mixes the master seed with the sample index.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index))
}

const SELECT_STREAM: u64 = 0x5E1E_C7;

/// One labeled sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub image: PlanarImage,
    pub label: u32,
}

/// An in-memory labeled image dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    samples: Vec<Sample>,
    class_count: u32,
    source: String,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>, class_count: u32, source: String) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyInput);
        }
        if let Some(bad) = samples.iter().find(|s| s.label >= class_count) {
            return Err(Error::InvalidConfig(alloc::format!(
                "label {} exceeds class count {}",
                bad.label,
                class_count
            )));
        }
        Ok(Self {
            samples,
            class_count,
            source,
        })
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn class_count(&self) -> u32 {
        self.class_count
    }

    pub fn source(&self) -> &str {
        &self.source
    }
}

/// Which poisoning strategy a run follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Route {
    Reactivation,
    Caa,
}

/// Label manipulation for poisoned samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case", tag = "mode"))]
pub enum LabelMode {
    AllToOne { target: u32 },
    AllToAll,
}

impl LabelMode {
    pub fn relabel(&self, label: u32, class_count: u32) -> u32 {
        match *self {
            LabelMode::AllToOne { target } => target,
            LabelMode::AllToAll => (label + 1) % class_count,
        }
    }
}

/// Everything a poisoning run needs to know.
#[derive(Debug, Clone, PartialEq)]
pub struct AttackConfig {
    pub route: Route,
    /// Poisoned fraction of the dataset, in (0, 1].
    pub poison_rate: f64,
    pub label_mode: LabelMode,
    pub codec: RoiCodecConfig,
    /// Trigger to reactivate; required on the reactivation route, unused by CAA.
    pub trigger: Option<TriggerKind>,
    /// Reactivation: `Residual` or `Frequency`. CAA: a fixed binary family.
    pub mask: MaskKind,
    /// Restrict poisoning to non-target classes (all-to-one only).
    pub exclude_target_class: bool,
    pub seed: u64,
}

impl AttackConfig {
    pub fn validate(&self, class_count: u32) -> Result<()> {
        self.codec.validate()?;
        if !(self.poison_rate > 0.0 && self.poison_rate <= 1.0) {
            return Err(Error::InvalidConfig(alloc::format!(
                "poison rate {} outside (0,1]",
                self.poison_rate
            )));
        }
        if let LabelMode::AllToOne { target } = self.label_mode {
            if target >= class_count {
                return Err(Error::InvalidConfig(alloc::format!(
                    "target class {target} exceeds class count {class_count}"
                )));
            }
        } else if self.exclude_target_class {
            return Err(Error::InvalidConfig(String::from(
                "exclude_target_class requires all-to-one labeling",
            )));
        }
        match self.route {
            Route::Reactivation => {
                if self.trigger.is_none() {
                    return Err(Error::InvalidConfig(String::from(
                        "reactivation needs a trigger",
                    )));
                }
                match self.mask {
                    MaskKind::Residual => {}
                    MaskKind::Frequency { t } => {
                        HighPassSpec::new(t)?;
                    }
                    _ => {
                        return Err(Error::InvalidConfig(String::from(
                            "reactivation masks are sample-specific (residual or frequency)",
                        )))
                    }
                }
            }
            Route::Caa => {
                if !self.mask.is_fixed_binary() {
                    return Err(Error::InvalidConfig(String::from(
                        "CAA needs a fixed binary mask (checkerboard or concentric)",
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Role a sample played in the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum SampleRole {
    Reactivation,
    Caa,
    Clean,
}

/// Mask bookkeeping: the family used, and for paired benign samples the
/// dataset index of the poisoned sample whose mask was borrowed.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaskAssignment {
    pub kind: MaskKind,
    pub source_index: Option<usize>,
}

/// Per-sample record in the manifest.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleRecord {
    pub index: usize,
    pub role: SampleRole,
    pub trigger: Option<TriggerKind>,
    pub mask: MaskAssignment,
    pub original_label: u32,
    pub assigned_label: u32,
    pub stream_bytes: usize,
    pub seed: u64,
    /// Set when the pre-compression image has almost no AC energy and
    /// therefore cannot carry a frequency-distribution trigger.
    pub low_signal: bool,
}

/// Run-level record of a poisoning pass.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PoisonManifest {
    pub route: Route,
    pub seed: u64,
    pub n: usize,
    pub class_count: u32,
    pub poison_rate: f64,
    pub poisoned_count: usize,
    pub mean_bpp: f64,
    pub samples: Vec<SampleRecord>,
}

/// Output of a run: the decompressed dataset, the manifest, and the emitted
/// streams in dataset order.
#[derive(Debug, Clone, PartialEq)]
pub struct PoisonRun {
    pub dataset: Dataset,
    pub manifest: PoisonManifest,
    pub streams: Vec<JpegStream>,
}

/// Per-sample output, assembled in index order at the end of a run.
#[derive(Debug, Clone)]
pub struct SampleOutput {
    pub record: SampleRecord,
    pub image: PlanarImage,
    pub stream: JpegStream,
    /// Poisoned samples contribute their mask to the pairing pool.
    pub mask: Option<RoiMask>,
}

/// Seeded draw of `floor(rate * N)` distinct indices.
pub fn select_poison(ds: &Dataset, cfg: &AttackConfig) -> Result<Vec<usize>> {
    cfg.validate(ds.class_count())?;
    let count = libm::floor(cfg.poison_rate * ds.len() as f64) as usize;
    if count == 0 {
        return Err(Error::EmptyPool);
    }
    let eligible: Vec<usize> = match (cfg.exclude_target_class, cfg.label_mode) {
        (true, LabelMode::AllToOne { target }) => (0..ds.len())
            .filter(|&i| ds.samples()[i].label != target)
            .collect(),
        _ => (0..ds.len()).collect(),
    };
    if count > eligible.len() {
        return Err(Error::InvalidConfig(alloc::format!(
            "poison count {count} exceeds the {} eligible samples",
            eligible.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, SELECT_STREAM));
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, eligible.len(), count)
        .into_iter()
        .map(|j| eligible[j])
        .collect();
    picked.sort_unstable();
    Ok(picked)
}

/// Fraction of block-DCT energy outside the DC coefficients.
fn ac_energy_fraction(img: &PlanarImage) -> f64 {
    let luma = img.luma();
    let (w, h) = (img.width(), img.height());
    let mut total = 0.0;
    let mut ac = 0.0;
    for by in 0..h / 8 {
        for bx in 0..w / 8 {
            let mut sum = 0.0;
            let mut sq = 0.0;
            for y in 0..8 {
                for x in 0..8 {
                    let v = luma[(by * 8 + y) * w + bx * 8 + x];
                    sum += v;
                    sq += v * v;
                }
            }
            total += sq;
            ac += sq - sum * sum / 64.0; // block energy above its mean
        }
    }
    if total == 0.0 {
        0.0
    } else {
        ac / total
    }
}

const LOW_SIGNAL_THRESHOLD: f64 = 1e-6;

/// A validated poisoning job: the selection is fixed, per-sample work is
/// pure, and outputs assemble identically regardless of scheduling.
pub struct PoisonJob {
    cfg: AttackConfig,
    poisoned: Vec<usize>,
    benign: Vec<usize>,
}

impl PoisonJob {
    pub fn new(ds: &Dataset, cfg: &AttackConfig) -> Result<Self> {
        let poisoned = select_poison(ds, cfg)?;
        let mut is_poisoned = vec![false; ds.len()];
        for &i in &poisoned {
            is_poisoned[i] = true;
        }
        let benign = (0..ds.len()).filter(|&i| !is_poisoned[i]).collect();
        Ok(Self {
            cfg: cfg.clone(),
            poisoned,
            benign,
        })
    }

    pub fn poisoned(&self) -> &[usize] {
        &self.poisoned
    }

    pub fn benign(&self) -> &[usize] {
        &self.benign
    }

    /// Full processing of one poisoned sample.
    pub fn process_poisoned(&self, ds: &Dataset, index: usize) -> Result<SampleOutput> {
        let seed = derive_seed(self.cfg.seed, index as u64);
        let sample = &ds.samples()[index];
        let x = &sample.image;

        let (to_encode, mask, trigger) = match self.cfg.route {
            Route::Reactivation => {
                let trigger = self.cfg.trigger.as_ref().expect("validated at job creation");
                let x_p = trigger.apply(x, seed)?;
                let mask = match self.cfg.mask {
                    MaskKind::Residual => masks::mask_res(x, &x_p)?,
                    MaskKind::Frequency { t } => masks::mask_freq(&x_p, HighPassSpec::new(t)?)?,
                    _ => unreachable!("validated at job creation"),
                };
                (x_p, mask, Some(trigger.clone()))
            }
            Route::Caa => {
                let mask = self.cfg.mask.build(x.width(), x.height())?;
                (x.clone(), mask, None)
            }
        };

        let low_signal = ac_energy_fraction(&to_encode) < LOW_SIGNAL_THRESHOLD;
        let stream = jpeg::encode_roi(&to_encode, &mask, &self.cfg.codec)?;
        let image = jpeg::decode(&stream)?;
        let record = SampleRecord {
            index,
            role: match self.cfg.route {
                Route::Reactivation => SampleRole::Reactivation,
                Route::Caa => SampleRole::Caa,
            },
            trigger,
            mask: MaskAssignment {
                kind: self.cfg.mask.clone(),
                source_index: None,
            },
            original_label: sample.label,
            assigned_label: self
                .cfg
                .label_mode
                .relabel(sample.label, ds.class_count()),
            stream_bytes: stream.bytes().len(),
            seed,
            low_signal,
        };
        Ok(SampleOutput {
            record,
            image,
            stream,
            mask: Some(mask),
        })
    }

    /// Full processing of one benign sample. `pool` holds the poisoned
    /// masks in `poisoned()` order.
    pub fn process_benign(
        &self,
        ds: &Dataset,
        index: usize,
        pool: &[RoiMask],
    ) -> Result<SampleOutput> {
        let seed = derive_seed(self.cfg.seed, index as u64);
        let sample = &ds.samples()[index];
        let x = &sample.image;

        let (mask, assignment) = match self.cfg.route {
            Route::Reactivation => {
                let j = masks::pair_benign_mask(pool.len(), seed)?;
                (
                    pool[j].clone(),
                    MaskAssignment {
                        kind: self.cfg.mask.clone(),
                        source_index: Some(self.poisoned[j]),
                    },
                )
            }
            Route::Caa => (
                RoiMask::uniform(x.width(), x.height(), 1.0)?,
                MaskAssignment {
                    kind: MaskKind::Uniform { level: 1.0 },
                    source_index: None,
                },
            ),
        };

        let low_signal = ac_energy_fraction(x) < LOW_SIGNAL_THRESHOLD;
        let stream = jpeg::encode_roi(x, &mask, &self.cfg.codec)?;
        let image = jpeg::decode(&stream)?;
        let record = SampleRecord {
            index,
            role: SampleRole::Clean,
            trigger: None,
            mask: assignment,
            original_label: sample.label,
            assigned_label: sample.label,
            stream_bytes: stream.bytes().len(),
            seed,
            low_signal,
        };
        Ok(SampleOutput {
            record,
            image,
            stream,
            mask: None,
        })
    }

    /// Orders outputs by index and builds the run result.
    pub fn assemble(&self, ds: &Dataset, mut outputs: Vec<SampleOutput>) -> Result<PoisonRun> {
        outputs.sort_by_key(|o| o.record.index);
        if outputs.len() != ds.len() {
            return Err(Error::InvalidConfig(String::from(
                "assemble needs one output per sample",
            )));
        }
        let mean_bpp = outputs
            .iter()
            .map(|o| jpeg::stream_stats(&o.stream).bits_per_pixel)
            .sum::<f64>()
            / outputs.len() as f64;
        let mut samples = Vec::with_capacity(outputs.len());
        let mut records = Vec::with_capacity(outputs.len());
        let mut streams = Vec::with_capacity(outputs.len());
        for out in outputs {
            samples.push(Sample {
                image: out.image,
                label: out.record.assigned_label,
            });
            records.push(out.record);
            streams.push(out.stream);
        }
        let manifest = PoisonManifest {
            route: self.cfg.route,
            seed: self.cfg.seed,
            n: ds.len(),
            class_count: ds.class_count(),
            poison_rate: self.cfg.poison_rate,
            poisoned_count: self.poisoned.len(),
            mean_bpp,
            samples: records,
        };
        let dataset = Dataset::new(
            samples,
            ds.class_count(),
            alloc::format!("{}+poisoned", ds.source()),
        )?;
        Ok(PoisonRun {
            dataset,
            manifest,
            streams,
        })
    }

    /// Serial driver: poisoned phase, benign phase, assembly.
    pub fn run(&self, ds: &Dataset) -> Result<PoisonRun> {
        let mut outputs = Vec::with_capacity(ds.len());
        let mut pool = Vec::with_capacity(self.poisoned.len());
        for &i in &self.poisoned {
            let out = self.process_poisoned(ds, i)?;
            pool.push(out.mask.clone().expect("poisoned outputs carry masks"));
            outputs.push(out);
        }
        for &i in &self.benign {
            outputs.push(self.process_benign(ds, i, &pool)?);
        }
        self.assemble(ds, outputs)
    }
}

/// Reactivation route: trigger, sample-specific mask, ROI compression for
/// poisoned samples; borrowed poisoned masks for benign samples.
pub fn run_reactivation(ds: &Dataset, cfg: &AttackConfig) -> Result<PoisonRun> {
    if cfg.route != Route::Reactivation {
        return Err(Error::InvalidConfig(String::from(
            "config routes to CAA, not reactivation",
        )));
    }
    PoisonJob::new(ds, cfg)?.run(ds)
}

/// CAA route: no pixel-domain trigger at all; poisoned samples are encoded
/// under the fixed binary mask, benign samples under the uniform mask.
pub fn run_caa(ds: &Dataset, cfg: &AttackConfig) -> Result<PoisonRun> {
    if cfg.route != Route::Caa {
        return Err(Error::InvalidConfig(String::from(
            "config routes to reactivation, not CAA",
        )));
    }
    PoisonJob::new(ds, cfg)?.run(ds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;
    use crate::triggers::Patch;

    fn tiny_dataset(seed: u64, n: usize, classes: u32) -> Dataset {
        let samples = (0..n)
            .map(|i| Sample {
                image: synth::class_sample(seed, i as u32 % classes, i as u64, 32, 32),
                label: i as u32 % classes,
            })
            .collect();
        Dataset::new(samples, classes, String::from("tiny")).unwrap()
    }

    fn caa_config(seed: u64, rate: f64) -> AttackConfig {
        AttackConfig {
            route: Route::Caa,
            poison_rate: rate,
            label_mode: LabelMode::AllToOne { target: 0 },
            codec: RoiCodecConfig::default(),
            trigger: None,
            mask: MaskKind::Checkerboard {
                cells_x: 4,
                cells_y: 4,
                phase: 0,
            },
            exclude_target_class: false,
            seed,
        }
    }

    #[test]
    fn derive_seed_spreads_indices() {
        let mut seen = std::collections::HashSet::new();
        for i in 0..10_000u64 {
            assert!(seen.insert(derive_seed(7, i)));
        }
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }

    #[test]
    fn selection_is_exact_distinct_and_deterministic() {
        let mut samples = Vec::new();
        for i in 0..10_000usize {
            samples.push(Sample {
                image: PlanarImage::constant(1, 1, 1, 0.0),
                label: (i % 10) as u32,
            });
        }
        let ds = Dataset::new(samples, 10, String::from("labels-only")).unwrap();
        let mut cfg = caa_config(99, 0.1);
        cfg.mask = MaskKind::default_caa();

        let picked = select_poison(&ds, &cfg).unwrap();
        assert_eq!(picked.len(), 1000);
        let set: std::collections::HashSet<_> = picked.iter().collect();
        assert_eq!(set.len(), 1000);
        assert_eq!(picked, select_poison(&ds, &cfg).unwrap());

        cfg.poison_rate = 1.0;
        assert_eq!(select_poison(&ds, &cfg).unwrap().len(), 10_000);

        cfg.poison_rate = 0.00001;
        assert!(matches!(select_poison(&ds, &cfg), Err(Error::EmptyPool)));

        cfg.poison_rate = 0.5;
        cfg.exclude_target_class = true;
        let picked = select_poison(&ds, &cfg).unwrap();
        assert_eq!(picked.len(), 5000);
        assert!(picked.iter().all(|&i| ds.samples()[i].label != 0));
    }

    #[test]
    fn caa_run_counts_labels_and_masks() {
        let ds = tiny_dataset(1, 20, 10);
        let cfg = caa_config(42, 0.25);
        let run = run_caa(&ds, &cfg).unwrap();

        assert_eq!(run.manifest.poisoned_count, 5);
        assert_eq!(run.manifest.n, 20);
        assert_eq!(run.dataset.len(), 20);
        assert_eq!(run.streams.len(), 20);

        let mut poisoned_seen = 0;
        for rec in &run.manifest.samples {
            match rec.role {
                SampleRole::Caa => {
                    poisoned_seen += 1;
                    assert_eq!(rec.assigned_label, 0);
                    assert!(rec.trigger.is_none());
                    assert!(matches!(rec.mask.kind, MaskKind::Checkerboard { .. }));
                }
                SampleRole::Clean => {
                    assert_eq!(rec.assigned_label, rec.original_label);
                    assert!(matches!(rec.mask.kind, MaskKind::Uniform { level } if level == 1.0));
                }
                SampleRole::Reactivation => panic!("wrong role in CAA run"),
            }
            assert_eq!(
                run.dataset.samples()[rec.index].label,
                rec.assigned_label
            );
        }
        assert_eq!(poisoned_seen, 5);
    }

    #[test]
    fn all_to_all_wraps_the_last_class() {
        let mut ds = tiny_dataset(2, 10, 10);
        // give index 0 the last class so the wrap is exercised
        ds.samples[0].label = 9;
        let mut cfg = caa_config(7, 1.0);
        cfg.label_mode = LabelMode::AllToAll;
        let run = run_caa(&ds, &cfg).unwrap();
        assert_eq!(run.manifest.samples[0].original_label, 9);
        assert_eq!(run.manifest.samples[0].assigned_label, 0);
        for rec in &run.manifest.samples {
            assert_eq!(rec.assigned_label, (rec.original_label + 1) % 10);
        }
    }

    #[test]
    fn caa_differs_from_uniform_only_through_the_mask() {
        let ds = tiny_dataset(3, 4, 2);
        let cfg = caa_config(11, 0.5);
        let run = run_caa(&ds, &cfg).unwrap();

        // textured poisoned samples decode differently from their uniform encode
        for rec in &run.manifest.samples {
            let original = &ds.samples()[rec.index].image;
            let uniform = jpeg::decode(&jpeg::encode(original, cfg.codec.quality).unwrap()).unwrap();
            let poisoned_out = &run.dataset.samples()[rec.index].image;
            if rec.role == SampleRole::Caa {
                assert!(!rec.low_signal);
                assert_ne!(poisoned_out, &uniform);
            } else {
                assert_eq!(poisoned_out, &uniform);
            }
        }
    }

    #[test]
    fn flat_images_are_flagged_and_unchanged_by_the_mask() {
        let mut samples = vec![
            Sample {
                image: PlanarImage::constant(32, 32, 3, 0.5),
                label: 0,
            },
            Sample {
                image: synth::photo_like(5, 32, 32),
                label: 1,
            },
        ];
        samples.push(samples[0].clone());
        let ds = Dataset::new(samples, 2, String::from("flat")).unwrap();
        let cfg = caa_config(13, 1.0);
        let run = run_caa(&ds, &cfg).unwrap();

        assert!(run.manifest.samples[0].low_signal);
        assert!(!run.manifest.samples[1].low_signal);

        // a constant image has no AC to reallocate: CAA and uniform encodes agree
        let flat = &ds.samples()[0].image;
        let uniform = jpeg::encode(flat, cfg.codec.quality).unwrap();
        assert_eq!(run.streams[0].bytes(), uniform.bytes());
    }

    #[test]
    fn reactivation_pairs_benign_masks_from_the_pool() {
        let ds = tiny_dataset(4, 12, 3);
        let cfg = AttackConfig {
            route: Route::Reactivation,
            poison_rate: 0.25,
            label_mode: LabelMode::AllToOne { target: 1 },
            codec: RoiCodecConfig::default(),
            trigger: Some(TriggerKind::Patch(Patch::default())),
            mask: MaskKind::Residual,
            exclude_target_class: false,
            seed: 21,
        };
        let run = run_reactivation(&ds, &cfg).unwrap();
        assert_eq!(run.manifest.poisoned_count, 3);

        let poisoned: Vec<usize> = run
            .manifest
            .samples
            .iter()
            .filter(|r| r.role == SampleRole::Reactivation)
            .map(|r| r.index)
            .collect();
        for rec in &run.manifest.samples {
            match rec.role {
                SampleRole::Reactivation => {
                    assert!(rec.trigger.is_some());
                    assert_eq!(rec.assigned_label, 1);
                    assert_eq!(rec.mask.source_index, None);
                }
                SampleRole::Clean => {
                    let src = rec.mask.source_index.expect("benign samples record a source");
                    assert!(poisoned.contains(&src));
                    assert_eq!(rec.assigned_label, rec.original_label);
                }
                SampleRole::Caa => panic!("wrong role in reactivation run"),
            }
        }
    }

    #[test]
    fn zero_rate_reactivation_reports_empty_pool() {
        let ds = tiny_dataset(5, 8, 2);
        let mut cfg = caa_config(3, 0.01); // floor(0.01 * 8) = 0
        cfg.route = Route::Reactivation;
        cfg.trigger = Some(TriggerKind::Patch(Patch::default()));
        cfg.mask = MaskKind::Residual;
        assert!(matches!(
            run_reactivation(&ds, &cfg),
            Err(Error::EmptyPool)
        ));
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let ds = tiny_dataset(6, 10, 5);
        let mut cfg = caa_config(31, 0.3);
        cfg.mask = MaskKind::ConcentricSquares { rings: 4, phase: 0 };
        let a = run_caa(&ds, &cfg).unwrap();
        let b = run_caa(&ds, &cfg).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.streams, b.streams);
        assert_eq!(a.dataset, b.dataset);

        let mut rcfg = cfg.clone();
        rcfg.route = Route::Reactivation;
        rcfg.trigger = Some(TriggerKind::Warp(crate::triggers::Warp::default()));
        rcfg.mask = MaskKind::Frequency { t: 0.25 };
        let a = run_reactivation(&ds, &rcfg).unwrap();
        let b = run_reactivation(&ds, &rcfg).unwrap();
        assert_eq!(a.manifest, b.manifest);
        assert_eq!(a.streams, b.streams);
    }

    #[test]
    fn config_validation_rejects_mismatches() {
        let ds = tiny_dataset(8, 6, 2);
        let mut cfg = caa_config(1, 0.5);
        cfg.mask = MaskKind::Residual;
        assert!(run_caa(&ds, &cfg).is_err());

        let mut cfg = caa_config(1, 0.5);
        cfg.label_mode = LabelMode::AllToOne { target: 5 };
        assert!(run_caa(&ds, &cfg).is_err());

        let mut cfg = caa_config(1, 1.5);
        cfg.mask = MaskKind::default_caa();
        assert!(run_caa(&ds, &cfg).is_err());

        let mut cfg = caa_config(1, 0.5);
        cfg.route = Route::Reactivation;
        cfg.trigger = None;
        cfg.mask = MaskKind::Residual;
        assert!(run_reactivation(&ds, &cfg).is_err());
    }
}
