//! Frozen reference encoder and classifier trained on real data only.

use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::seq::SliceRandom;

use crate::beat::BeatLabel;
use crate::dsp::{canonical_order, TriModalSample};
use crate::error::{check_len, domain, Error, Result};
use crate::nn::{Activation, DenseNet, LayerShape, Trace};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceConfig {
    /// Embedding width per modality.
    pub embed: usize,
    pub epochs: usize,
    pub batch: usize,
    pub adam: AdamConfig,
}

impl Default for ReferenceConfig {
    fn default() -> Self {
        Self {
            embed: 8,
            epochs: 60,
            batch: 32,
            adam: AdamConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReferenceModels {
    /// One `dim -> embed` tanh encoder per modality.
    pub encoders: [DenseNet; 3],
    /// `3 * embed -> 2` logits.
    pub classifier: DenseNet,
    pub seed: u64,
    pub config: ReferenceConfig,
}

struct Pass {
    enc: [Trace; 3],
    cls: Trace,
    probs: [f64; 2],
}

fn softmax(logits: &[f64]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e0 = (logits[0] - m).exp();
    let e1 = (logits[1] - m).exp();
    let s = e0 + e1;
    [e0 / s, e1 / s]
}

impl ReferenceModels {
    pub fn init(dims: [usize; 3], config: ReferenceConfig, seed: u64) -> Result<Self> {
        let mut r = rng::derived(seed, 0x2ef);
        let mut enc = |d: usize| {
            DenseNet::init(
                &[LayerShape::new(d, config.embed, Activation::Tanh)],
                &mut r,
            )
        };
        let encoders = [enc(dims[0])?, enc(dims[1])?, enc(dims[2])?];
        let classifier = DenseNet::init(
            &[LayerShape::new(3 * config.embed, 2, Activation::Identity)],
            &mut r,
        )?;
        Ok(Self {
            encoders,
            classifier,
            seed,
            config,
        })
    }

    /// Train on real samples with softmax cross-entropy. Sample order does
    /// not matter: the set is put in canonical order before shuffling.
    pub fn train(real: &[TriModalSample], config: ReferenceConfig, seed: u64) -> Result<Self> {
        let first = real
            .first()
            .ok_or(Error::EmptySplit("reference training set"))?;
        if !BeatLabel::ALL
            .iter()
            .all(|l| real.iter().any(|s| s.label == *l))
        {
            return Err(domain("reference models need both classes"));
        }
        if config.batch == 0 || config.embed == 0 {
            return Err(domain(
                "reference batch and embedding width must be positive",
            ));
        }
        let dims = [first.t.len(), first.f.len(), first.s.len()];
        let mut models = Self::init(dims, config, seed)?;
        let ordered = canonical_order(real);
        let mut order: Vec<usize> = (0..ordered.len()).collect();
        let mut r = rng::derived(seed, 0x7a1);
        let mut enc_state: [AdamState; 3] =
            core::array::from_fn(|m| AdamState::new(models.encoders[m].param_count()));
        let mut cls_state = AdamState::new(models.classifier.param_count());
        for _ in 0..config.epochs {
            order.shuffle(&mut r);
            for chunk in order.chunks(config.batch) {
                let mut enc_grads: [Vec<f64>; 3] =
                    core::array::from_fn(|m| vec![0.0; models.encoders[m].param_count()]);
                let mut cls_grads = vec![0.0; models.classifier.param_count()];
                let scale = 1.0 / chunk.len() as f64;
                for &i in chunk {
                    let s = ordered[i];
                    let pass = models.pass(s)?;
                    let target = s.label.index();
                    let mut g_logits = [pass.probs[0] * scale, pass.probs[1] * scale];
                    g_logits[target] -= scale;
                    let g_embed = models
                        .classifier
                        .backward(&pass.cls, &g_logits, &mut cls_grads, true)?
                        .unwrap_or_default();
                    for m in 0..3 {
                        let e = config.embed;
                        models.encoders[m].backward(
                            &pass.enc[m],
                            &g_embed[m * e..(m + 1) * e],
                            &mut enc_grads[m],
                            false,
                        )?;
                    }
                }
                for m in 0..3 {
                    adam_step(
                        models.encoders[m].params_mut(),
                        &enc_grads[m],
                        &mut enc_state[m],
                        &config.adam,
                    )?;
                }
                adam_step(
                    models.classifier.params_mut(),
                    &cls_grads,
                    &mut cls_state,
                    &config.adam,
                )?;
            }
        }
        Ok(models)
    }

    fn pass(&self, s: &TriModalSample) -> Result<Pass> {
        let enc = [
            self.encoders[0].forward_trace(&s.t)?,
            self.encoders[1].forward_trace(&s.f)?,
            self.encoders[2].forward_trace(&s.s)?,
        ];
        let mut z = Vec::with_capacity(3 * self.config.embed);
        for t in &enc {
            z.extend_from_slice(t.output());
        }
        let cls = self.classifier.forward_trace(&z)?;
        let probs = softmax(cls.output());
        Ok(Pass { enc, cls, probs })
    }

    pub fn embedding_dim(&self) -> usize {
        3 * self.config.embed
    }

    /// Per-modality embeddings.
    pub fn embed_parts(&self, parts: [&[f64]; 3]) -> Result<[Vec<f64>; 3]> {
        Ok([
            self.encoders[0].forward(parts[0])?,
            self.encoders[1].forward(parts[1])?,
            self.encoders[2].forward(parts[2])?,
        ])
    }

    /// Concatenated embedding.
    pub fn embed(&self, s: &TriModalSample) -> Result<Vec<f64>> {
        Ok(self.embed_parts(s.modalities())?.concat())
    }

    /// Predictive class distribution.
    pub fn predict(&self, s: &TriModalSample) -> Result<[f64; 2]> {
        let z = self.embed(s)?;
        check_len("embedding", self.embedding_dim(), z.len())?;
        Ok(softmax(&self.classifier.forward(&z)?))
    }

    pub fn accuracy(&self, samples: &[TriModalSample]) -> Result<f64> {
        if samples.is_empty() {
            return Err(Error::EmptySplit("accuracy set"));
        }
        let mut hits = 0usize;
        for s in samples {
            let p = self.predict(s)?;
            let guess = usize::from(p[1] > p[0]);
            hits += usize::from(guess == s.label.index());
        }
        Ok(hits as f64 / samples.len() as f64)
    }
}
