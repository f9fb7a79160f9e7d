//! Alternating critic / generator training with early stopping.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;

use super::loss::{
    critic_objective, phys_loss, GeneratorObjective, InterfTarget, LossWeights, PhysTarget,
};
use super::model::{generate, join, mean_feature_sd, Architecture, CriticModel, GeneratorModel};
use crate::beat::{BeatLabel, Fiducials};
use crate::dsp::{canonical_order, TriModalSample};
use crate::error::{domain, Error, Result};
use crate::eval::{ReferenceConfig, ReferenceModels};
use crate::info::{
    cfd_stats, fit_binning, orthogonality_penalty, BinningSpec, CfdStats, DEFAULT_BINS,
};
use crate::latent::{sample_latent_with, InterferenceOperator, LatentState, ProjectionEncoder};
use crate::optim::{adam_step, AdamConfig, AdamState};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainConfig {
    pub latent_dim: usize,
    pub hidden: usize,
    pub critic_hidden: usize,
    pub adam: AdamConfig,
    pub batch: usize,
    pub epochs: usize,
    pub weights: LossWeights,
    pub lambda_orth: f64,
    pub gp_weight: f64,
    pub critic_steps: usize,
    pub seed: u64,
    pub patience: usize,
    pub operator: InterferenceOperator,
    pub learn_operator: bool,
    /// Drive the interference term through the fixed random projection
    /// from samples to latent states.
    pub interference_encoder: bool,
    /// Probe samples generated per class each epoch to estimate the
    /// synthetic complementarity.
    pub probe_per_class: usize,
    pub bins: usize,
    pub reference: ReferenceConfig,
    /// Start each class generator at the mean and per-feature spread of
    /// its class's training samples.
    pub match_moments: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            latent_dim: 24,
            hidden: 32,
            critic_hidden: 64,
            adam: AdamConfig::default(),
            batch: 64,
            epochs: 200,
            weights: LossWeights::default(),
            lambda_orth: 0.1,
            gp_weight: 10.0,
            critic_steps: 3,
            seed: 0,
            patience: 20,
            operator: InterferenceOperator::default(),
            learn_operator: false,
            interference_encoder: true,
            probe_per_class: 128,
            bins: DEFAULT_BINS,
            reference: ReferenceConfig::default(),
            match_moments: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0
            || self.critic_steps == 0
            || self.patience == 0
            || self.probe_per_class == 0
        {
            return Err(domain(
                "batch, critic steps, patience and probe size must be positive",
            ));
        }
        let w = &self.weights;
        for (name, v) in [
            ("learning rate", self.adam.lr),
            ("gradient-penalty weight", self.gp_weight),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(domain(alloc::format!("{name} must be positive")));
            }
        }
        for v in [w.cfd, w.interf, w.phys, self.lambda_orth] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(domain("loss weights must be finite and non-negative"));
            }
        }
        if !(0.0..1.0).contains(&self.adam.beta1) || !(0.0..1.0).contains(&self.adam.beta2) {
            return Err(domain("Adam betas must lie in [0, 1)"));
        }
        self.operator.validate()
    }

    pub fn architecture(&self, outputs: [usize; 3]) -> Architecture {
        Architecture {
            latent_dim: self.latent_dim,
            hidden: self.hidden,
            outputs,
            critic_hidden: self.critic_hidden,
        }
    }
}

/// Variants with one component removed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Ablation {
    Full,
    /// No complementarity term.
    NoCfd,
    /// Zero interference operator.
    ZeroOperator,
    /// No morphology term.
    NoPhys,
}

impl Ablation {
    pub const ALL: [Ablation; 4] = [
        Ablation::Full,
        Ablation::NoCfd,
        Ablation::ZeroOperator,
        Ablation::NoPhys,
    ];

    pub fn apply(self, cfg: &TrainConfig) -> TrainConfig {
        let mut c = *cfg;
        match self {
            Ablation::Full => {}
            Ablation::NoCfd => c.weights.cfd = 0.0,
            Ablation::ZeroOperator => {
                c.operator = InterferenceOperator::zero();
                c.learn_operator = false;
            }
            Ablation::NoPhys => c.weights.phys = 0.0,
        }
        c
    }

    pub fn name(self) -> &'static str {
        match self {
            Ablation::Full => "full",
            Ablation::NoCfd => "a1",
            Ablation::ZeroOperator => "a2",
            Ablation::NoPhys => "a3",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: Vec<TriModalSample>,
    pub val: Vec<TriModalSample>,
    pub test: Vec<TriModalSample>,
}

/// Stratified 70 / 15 / 15 split, shuffled per class from `seed`. Sample
/// order in the input does not affect the result.
pub fn split_dataset(samples: &[TriModalSample], seed: u64) -> Result<DataSplit> {
    let mut split = DataSplit {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    let ordered = canonical_order(samples);
    for label in BeatLabel::ALL {
        let mut class: Vec<&TriModalSample> = ordered
            .iter()
            .copied()
            .filter(|s| s.label == label)
            .collect();
        let mut r = rng::derived(seed, 0x5b1 + label.index() as u64);
        class.shuffle(&mut r);
        let n = class.len();
        let n_train = (n * 70 + 50) / 100;
        let n_val = (n * 15 + 50) / 100;
        for (i, s) in class.into_iter().enumerate() {
            let dest = if i < n_train {
                &mut split.train
            } else if i < n_train + n_val {
                &mut split.val
            } else {
                &mut split.test
            };
            dest.push(s.clone());
        }
    }
    for (what, part) in [
        ("training split lacks a class", &split.train),
        ("validation split lacks a class", &split.val),
        ("test split lacks a class", &split.test),
    ] {
        if !BeatLabel::ALL
            .iter()
            .all(|l| part.iter().any(|s| s.label == *l))
        {
            return Err(Error::EmptySplit(what));
        }
    }
    Ok(split)
}

/// One generator per class, indexed by [`BeatLabel::index`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ClassGenerators {
    pub models: [GeneratorModel; 2],
}

impl ClassGenerators {
    /// `n_per_class` samples of each class, Normal first.
    pub fn generate(&self, n_per_class: usize, seed: u64) -> Result<Vec<TriModalSample>> {
        let mut out = Vec::with_capacity(2 * n_per_class);
        for label in BeatLabel::ALL {
            let s = rng::derived(seed, 0x6e0 + label.index() as u64).random::<u64>();
            out.extend(generate(
                &self.models[label.index()],
                label,
                n_per_class,
                s,
            )?);
        }
        Ok(out)
    }
}

/// Per-epoch averages.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EpochRecord {
    pub epoch: usize,
    pub critic_loss: f64,
    pub wasserstein: f64,
    pub gradient_penalty: f64,
    pub gan: f64,
    pub orth: f64,
    pub interf: f64,
    pub phys: f64,
    pub generator_total: f64,
    /// Synthetic complementarity on the probe set.
    pub c_hat: f64,
    /// `|C - C_hat|`.
    pub cfd_gap: f64,
    pub val_orth: f64,
    pub val_interf: f64,
    pub val_phys: f64,
    pub val_composite: f64,
}

impl EpochRecord {
    /// Validation composite with all weights set to one.
    pub fn unweighted_validation(&self, lambda_orth: f64) -> f64 {
        self.cfd_gap + lambda_orth * self.val_orth + self.val_interf + self.val_phys
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub generators: ClassGenerators,
    pub history: Vec<EpochRecord>,
    /// Epoch (1-based) of the returned snapshot; `None` if no epoch ran.
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub real_cfd: CfdStats,
    pub binning: BinningSpec,
    pub reference: ReferenceModels,
}

/// Median of the class's fiducial windows, or `None` when any sample has
/// none.
fn median_windows(samples: &[&TriModalSample]) -> Option<Fiducials> {
    let fids: Vec<&Fiducials> = samples
        .iter()
        .map(|s| s.fiducials.as_ref())
        .collect::<Option<_>>()?;
    if fids.is_empty() {
        return None;
    }
    let med = |f: &dyn Fn(&Fiducials) -> usize| {
        let mut v: Vec<usize> = fids.iter().map(|x| f(x)).collect();
        v.sort_unstable();
        v[(v.len() - 1) / 2]
    };
    let qrs_start = med(&|f| f.qrs.start);
    let qrs_end = med(&|f| f.qrs.end);
    let st_end = med(&|f| f.st.end);
    Some(Fiducials {
        qrs: qrs_start..qrs_end,
        st: qrs_end..st_end,
    })
}

fn phys_target(samples: &[&TriModalSample]) -> Result<Option<PhysTarget>> {
    let Some(windows) = median_windows(samples) else {
        return Ok(None);
    };
    let n = samples[0].t.len();
    let mut template = vec![0.0; n];
    for s in samples {
        for (a, v) in template.iter_mut().zip(&s.t) {
            *a += v / samples.len() as f64;
        }
    }
    // validate the windows against the template once
    phys_loss(&template, &template, &windows)?;
    Ok(Some(PhysTarget { template, windows }))
}

fn modality_means(samples: &[&TriModalSample]) -> [Vec<f64>; 3] {
    core::array::from_fn(|m| {
        let mut acc = vec![0.0; samples[0].modality(m).len()];
        for s in samples {
            for (a, v) in acc.iter_mut().zip(s.modality(m)) {
                *a += v / samples.len() as f64;
            }
        }
        acc
    })
}

fn parts_of(samples: &[&TriModalSample]) -> Vec<[Vec<f64>; 3]> {
    samples
        .iter()
        .map(|s| [s.t.clone(), s.f.clone(), s.s.clone()])
        .collect()
}

struct ClassContext {
    real: Vec<Vec<f64>>,
    phys: Option<PhysTarget>,
    interf: Option<InterfTarget>,
    val_phys: Option<PhysTarget>,
    val_interf: Option<InterfTarget>,
    probe: Vec<LatentState>,
}

fn latents(n: usize, dim: usize, r: &mut rng::Rng) -> Result<Vec<LatentState>> {
    (0..n).map(|_| sample_latent_with(dim, r)).collect()
}

/// Class generator `c` at its starting point: uniform initialisation from
/// the run seed, then (if enabled) moment matching to the class's training
/// samples.
fn init_generator(
    tr: &[&TriModalSample],
    arch: Architecture,
    cfg: &TrainConfig,
    c: u64,
) -> Result<GeneratorModel> {
    let seed = cfg.seed;
    let mut g = GeneratorModel::init(
        arch,
        cfg.operator,
        cfg.learn_operator,
        &mut rng::derived(seed, 0x100 + c),
    )?;
    if cfg.match_moments {
        let means = modality_means(tr);
        let spreads: [f64; 3] = core::array::from_fn(|m| {
            let rows: Vec<&[f64]> = tr.iter().map(|s| s.modality(m)).collect();
            mean_feature_sd(&rows)
        });
        let probe = latents(
            cfg.probe_per_class,
            cfg.latent_dim,
            &mut rng::derived(seed, 0x400 + c),
        )?;
        g.match_moments([&means[0], &means[1], &means[2]], spreads, &probe)?;
    }
    Ok(g)
}

/// The generators a run on `split` starts from (and returns after zero
/// epochs).
pub fn initial_generators(split: &DataSplit, cfg: &TrainConfig) -> Result<ClassGenerators> {
    cfg.validate()?;
    let first = split
        .train
        .first()
        .ok_or(Error::EmptySplit("training split"))?;
    let arch = cfg.architecture([first.t.len(), first.f.len(), first.s.len()]);
    let sorted = canonical_order(&split.train);
    let mut models = Vec::with_capacity(2);
    for label in BeatLabel::ALL {
        let tr: Vec<&TriModalSample> = sorted
            .iter()
            .copied()
            .filter(|s| s.label == label)
            .collect();
        if tr.is_empty() {
            return Err(Error::EmptySplit(
                "a class is missing from the training split",
            ));
        }
        models.push(init_generator(&tr, arch, cfg, label.index() as u64)?);
    }
    Ok(ClassGenerators {
        models: [models.remove(0), models.remove(0)],
    })
}

/// Train on a dataset after a stratified split drawn from the config seed.
pub fn train(dataset: &[TriModalSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    let split = split_dataset(dataset, cfg.seed)?;
    train_on_split(&split, cfg)
}

pub fn train_on_split(split: &DataSplit, cfg: &TrainConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptySplit("training split"));
    }
    if split.val.is_empty() {
        return Err(Error::EmptySplit("validation split"));
    }
    let first = &split.train[0];
    let outputs = [first.t.len(), first.f.len(), first.s.len()];
    let arch = cfg.architecture(outputs);
    let seed = cfg.seed;

    let binning = fit_binning(&split.train, cfg.bins)?;
    let real_cfd = cfd_stats(&split.train, &binning)?;
    let reference = ReferenceModels::train(
        &split.train,
        cfg.reference,
        rng::derived(seed, 0x4ef).random(),
    )?;
    let projection = if cfg.interference_encoder {
        Some(ProjectionEncoder::new(
            outputs,
            cfg.latent_dim / 3,
            rng::derived(seed, 0x9a0).random(),
        )?)
    } else {
        None
    };

    let train_sorted = canonical_order(&split.train);
    let val_sorted = canonical_order(&split.val);
    let mut contexts = Vec::with_capacity(2);
    let mut generators = Vec::with_capacity(2);
    let mut critics = Vec::with_capacity(2);
    for label in BeatLabel::ALL {
        let c = label.index() as u64;
        let tr: Vec<&TriModalSample> = train_sorted
            .iter()
            .copied()
            .filter(|s| s.label == label)
            .collect();
        let va: Vec<&TriModalSample> = val_sorted
            .iter()
            .copied()
            .filter(|s| s.label == label)
            .collect();
        if tr.is_empty() || va.is_empty() {
            return Err(Error::EmptySplit(
                "a class is missing from the training or validation split",
            ));
        }
        let interf = match &projection {
            Some(p) => Some(InterfTarget::new(p.clone(), parts_of(&tr), &cfg.operator)?),
            None => None,
        };
        let val_interf = match &projection {
            Some(p) => Some(InterfTarget::new(p.clone(), parts_of(&va), &cfg.operator)?),
            None => None,
        };
        let mut probe_rng = rng::derived(seed, 0x960 + c);
        contexts.push(ClassContext {
            real: tr.iter().map(|s| s.flatten()).collect(),
            phys: phys_target(&tr)?,
            interf,
            val_phys: phys_target(&va)?,
            val_interf,
            probe: latents(cfg.probe_per_class, cfg.latent_dim, &mut probe_rng)?,
        });
        generators.push(init_generator(&tr, arch, cfg, c)?);
        critics.push(CriticModel::init(
            &arch,
            &mut rng::derived(seed, 0x200 + c),
        )?);
    }
    let mut generators: [GeneratorModel; 2] = [generators.remove(0), generators.remove(0)];
    let mut critics: [CriticModel; 2] = [critics.remove(0), critics.remove(0)];
    let mut g_state: [AdamState; 2] =
        core::array::from_fn(|c| AdamState::new(generators[c].param_count()));
    let mut d_state: [AdamState; 2] =
        core::array::from_fn(|c| AdamState::new(critics[c].net.param_count()));
    let mut rngs: [rng::Rng; 2] = core::array::from_fn(|c| rng::derived(seed, 0x300 + c as u64));
    let mut streams: [RealStream; 2] =
        core::array::from_fn(|c| RealStream::new(contexts[c].real.len()));

    let mut best = ClassGenerators {
        models: generators.clone(),
    };
    let mut best_score = f64::INFINITY;
    let mut best_epoch = None;
    let mut since_best = 0;
    let mut history = Vec::new();
    let mut stopped_early = false;

    for epoch in 1..=cfg.epochs {
        let mut rec = EpochRecord {
            epoch,
            ..EpochRecord::default()
        };
        let mut critic_updates = 0usize;
        let mut gen_updates = 0usize;
        for c in 0..2 {
            let ctx = &mut contexts[c];
            let n = ctx.real.len();
            let steps = n.div_ceil(cfg.batch);
            for _ in 0..steps {
                for _ in 0..cfg.critic_steps {
                    let idx = streams[c].take(cfg.batch.min(n), &mut rngs[c]);
                    let real: Vec<Vec<f64>> = idx.iter().map(|&i| ctx.real[i].clone()).collect();
                    let zs = latents(real.len(), cfg.latent_dim, &mut rngs[c])?;
                    let fake: Vec<Vec<f64>> = zs
                        .iter()
                        .map(|z| {
                            generators[c]
                                .forward(z)
                                .map(|o| join([&o[0], &o[1], &o[2]]))
                        })
                        .collect::<Result<_>>()?;
                    let mix: Vec<f64> = (0..real.len()).map(|_| rngs[c].random()).collect();
                    let mut grads = vec![0.0; critics[c].net.param_count()];
                    let l = critic_objective(
                        &critics[c],
                        &real,
                        &fake,
                        &mix,
                        cfg.gp_weight,
                        Some(&mut grads),
                    )?;
                    adam_step(
                        critics[c].net.params_mut(),
                        &grads,
                        &mut d_state[c],
                        &cfg.adam,
                    )?;
                    rec.critic_loss += l.loss;
                    rec.wasserstein += l.wasserstein;
                    rec.gradient_penalty += l.penalty;
                    critic_updates += 1;
                }
                let zs = latents(cfg.batch, cfg.latent_dim, &mut rngs[c])?;
                let objective = GeneratorObjective {
                    critic: &critics[c],
                    weights: cfg.weights,
                    lambda_orth: cfg.lambda_orth,
                    reference: Some(&reference),
                    interf: ctx.interf.as_ref(),
                    phys: ctx.phys.as_ref(),
                };
                let mut grads = vec![0.0; generators[c].param_count()];
                let l = objective.evaluate(&generators[c], &zs, Some(&mut grads))?;
                let mut params = generators[c].flat_params();
                adam_step(&mut params, &grads, &mut g_state[c], &cfg.adam)?;
                generators[c].set_flat_params(&params)?;
                if cfg.learn_operator {
                    let op = generators[c].op;
                    if let Some(t) = ctx.interf.as_mut() {
                        t.refresh(&op)?;
                    }
                    if let Some(t) = ctx.val_interf.as_mut() {
                        t.refresh(&op)?;
                    }
                }
                rec.gan += l.parts.gan;
                rec.orth += l.orth;
                rec.interf += l.parts.interf;
                rec.phys += l.parts.phys;
                rec.generator_total += l.total;
                gen_updates += 1;
            }
        }
        let cu = critic_updates.max(1) as f64;
        rec.critic_loss /= cu;
        rec.wasserstein /= cu;
        rec.gradient_penalty /= cu;
        let gu = gen_updates.max(1) as f64;
        rec.gan /= gu;
        rec.orth /= gu;
        rec.interf /= gu;
        rec.phys /= gu;
        rec.generator_total /= gu;

        validate_epoch(
            &mut rec,
            &generators,
            &contexts,
            &reference,
            &binning,
            &real_cfd,
            cfg,
        )?;
        for v in [rec.critic_loss, rec.generator_total, rec.val_composite] {
            if !v.is_finite() {
                return Err(Error::NumericHealth(alloc::format!("epoch {epoch} losses")));
            }
        }
        history.push(rec);
        if rec.val_composite < best_score {
            best_score = rec.val_composite;
            best_epoch = Some(epoch);
            best = ClassGenerators {
                models: generators.clone(),
            };
            since_best = 0;
        } else {
            since_best += 1;
            if since_best >= cfg.patience {
                stopped_early = true;
                break;
            }
        }
    }
    Ok(TrainOutcome {
        generators: best,
        history,
        best_epoch,
        stopped_early,
        real_cfd,
        binning,
        reference,
    })
}

fn validate_epoch(
    rec: &mut EpochRecord,
    generators: &[GeneratorModel; 2],
    contexts: &[ClassContext],
    reference: &ReferenceModels,
    binning: &BinningSpec,
    real_cfd: &CfdStats,
    cfg: &TrainConfig,
) -> Result<()> {
    let mut probe = Vec::new();
    for (c, label) in BeatLabel::ALL.into_iter().enumerate() {
        let ctx = &contexts[c];
        let samples: Vec<TriModalSample> = ctx
            .probe
            .iter()
            .map(|z| {
                let [t, f, s] = generators[c].forward(z)?;
                Ok(TriModalSample {
                    t,
                    f,
                    s,
                    label,
                    fiducials: None,
                })
            })
            .collect::<Result<_>>()?;
        let feats: Vec<[Vec<f64>; 3]> = samples
            .iter()
            .map(|s| reference.embed_parts(s.modalities()))
            .collect::<Result<_>>()?;
        let per: [Vec<Vec<f64>>; 3] =
            core::array::from_fn(|m| feats.iter().map(|f| f[m].clone()).collect());
        rec.val_orth += 0.5 * orthogonality_penalty([&per[0], &per[1], &per[2]])?;
        if let Some(t) = &ctx.val_interf {
            let mut mean = 0.0;
            for s in &samples {
                mean += t
                    .encoder
                    .energy_with_grad(s.modalities(), &generators[c].op)?
                    .energy;
            }
            mean /= samples.len() as f64;
            rec.val_interf += 0.5 * (t.real_mean - mean).abs();
        }
        if let Some(t) = &ctx.val_phys {
            let mut acc = 0.0;
            for s in &samples {
                acc += phys_loss(&s.t, &t.template, &t.windows)?;
            }
            rec.val_phys += 0.5 * acc / samples.len() as f64;
        }
        probe.extend(samples);
    }
    rec.c_hat = cfd_stats(&probe, binning)?.c_tfs;
    rec.cfd_gap = (real_cfd.c_tfs - rec.c_hat).abs();
    let w = &cfg.weights;
    rec.val_composite = w.cfd * (rec.cfd_gap + cfg.lambda_orth * rec.val_orth)
        + w.interf * rec.val_interf
        + w.phys * rec.val_phys;
    Ok(())
}

/// Endless shuffled pass over `0..n`, reshuffled at each wrap.
struct RealStream {
    order: Vec<usize>,
    pos: usize,
}

impl RealStream {
    fn new(n: usize) -> Self {
        Self {
            order: (0..n).collect(),
            pos: n,
        }
    }

    fn take(&mut self, k: usize, r: &mut rng::Rng) -> Vec<usize> {
        let mut out = Vec::with_capacity(k);
        while out.len() < k {
            if self.pos >= self.order.len() {
                self.order.shuffle(r);
                self.pos = 0;
            }
            out.push(self.order[self.pos]);
            self.pos += 1;
        }
        out
    }
}

/// Outcome of the weight grid search.
#[derive(Debug, Clone, PartialEq)]
pub struct GridSearch {
    pub best: LossWeights,
    /// Each candidate with its best unweighted validation composite.
    pub scores: Vec<(LossWeights, f64)>,
    pub outcome: TrainOutcome,
}

pub const GRID_VALUES: [f64; 3] = [0.1, 0.5, 1.0];

/// Train every weight combination from [`GRID_VALUES`] and keep the one
/// with the lowest validation composite at its best epoch, all candidates
/// scored with unit weights so they are comparable.
pub fn grid_search(split: &DataSplit, cfg: &TrainConfig) -> Result<GridSearch> {
    let mut best: Option<(f64, LossWeights, TrainOutcome)> = None;
    let mut scores = Vec::new();
    for &cfd in &GRID_VALUES {
        for &interf in &GRID_VALUES {
            for &phys in &GRID_VALUES {
                let weights = LossWeights { cfd, interf, phys };
                let run = TrainConfig { weights, ..*cfg };
                let outcome = train_on_split(split, &run)?;
                let score = outcome
                    .best_epoch
                    .and_then(|e| outcome.history.get(e - 1))
                    .map_or(f64::INFINITY, |r| r.unweighted_validation(cfg.lambda_orth));
                scores.push((weights, score));
                if best.as_ref().is_none_or(|(s, _, _)| score < *s) {
                    best = Some((score, weights, outcome));
                }
            }
        }
    }
    let (_, weights, outcome) = best.ok_or_else(|| domain("empty grid"))?;
    Ok(GridSearch {
        best: weights,
        scores,
        outcome,
    })
}
