//! Run configuration: one TOML document, then `QCFD_SEED`, then
//! command-line overrides. Unknown keys are rejected at every layer.

use std::path::Path;

use num_complex::Complex64;
use qcfd_core::beat::{BeatParams, JitterScales, SimProfile};
use qcfd_core::dsp::DspProfile;
use qcfd_core::eval::ReferenceConfig;
use qcfd_core::gan::{Ablation, LossWeights, TrainConfig};
use qcfd_core::latent::InterferenceOperator;
use qcfd_core::optim::AdamConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{io, CliError, Result};

pub const SEED_ENV: &str = "QCFD_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ProfileKind {
    Desk,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub profile: ProfileKind,
    pub seed: u64,
    pub sim: SimSection,
    pub dsp: DspSection,
    pub train: TrainSection,
    pub eval: EvalSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub n_per_class: usize,
    pub st_offset: f64,
    pub noise_sd: f64,
    pub jitter_amplitude: f64,
    pub jitter_center: f64,
    pub jitter_width: f64,
    pub jitter_shift: f64,
}

/// Front-end shapes; absent entries take the profile's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DspSection {
    pub fs: Option<f64>,
    pub n: Option<usize>,
    pub window: Option<usize>,
    pub k: Option<usize>,
    pub h: Option<usize>,
    pub w: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AblationKind {
    Full,
    A1,
    A2,
    A3,
}

impl AblationKind {
    pub fn to_core(self) -> Ablation {
        match self {
            AblationKind::Full => Ablation::Full,
            AblationKind::A1 => Ablation::NoCfd,
            AblationKind::A2 => Ablation::ZeroOperator,
            AblationKind::A3 => Ablation::NoPhys,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch: usize,
    pub latent_dim: usize,
    pub hidden: usize,
    pub critic_hidden: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub lambda_cfd: f64,
    pub lambda_interf: f64,
    pub lambda_phys: f64,
    pub lambda_orth: f64,
    pub gp_weight: f64,
    pub critic_steps: usize,
    pub patience: usize,
    /// `[re, im]` of the T-F, F-S and S-T couplings.
    pub couplings: [[f64; 2]; 3],
    pub learn_operator: bool,
    pub interference_encoder: bool,
    pub match_moments: bool,
    pub probe_per_class: usize,
    pub bins: usize,
    pub reference_embed: usize,
    pub reference_epochs: usize,
    pub ablation: AblationKind,
    /// Pick the loss weights by grid search instead of using the ones above.
    pub grid_search: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalSection {
    /// Beats generated per class; `0` matches the real test split.
    pub n_per_class: usize,
    pub hist_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            profile: ProfileKind::Desk,
            seed: 0,
            sim: SimSection::default(),
            dsp: DspSection::default(),
            train: TrainSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl Default for SimSection {
    fn default() -> Self {
        let p = SimProfile::default();
        Self {
            n_per_class: 256,
            st_offset: p.st_offset,
            noise_sd: p.noise_sd,
            jitter_amplitude: p.jitter.amplitude,
            jitter_center: p.jitter.center,
            jitter_width: p.jitter.width,
            jitter_shift: p.jitter.shift,
        }
    }
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        Self {
            epochs: t.epochs,
            batch: t.batch,
            latent_dim: t.latent_dim,
            hidden: t.hidden,
            critic_hidden: t.critic_hidden,
            learning_rate: t.adam.lr,
            beta1: t.adam.beta1,
            beta2: t.adam.beta2,
            lambda_cfd: t.weights.cfd,
            lambda_interf: t.weights.interf,
            lambda_phys: t.weights.phys,
            lambda_orth: t.lambda_orth,
            gp_weight: t.gp_weight,
            critic_steps: t.critic_steps,
            patience: t.patience,
            couplings: t.operator.couplings().map(|c| [c.re, c.im]),
            learn_operator: t.learn_operator,
            interference_encoder: t.interference_encoder,
            match_moments: t.match_moments,
            probe_per_class: t.probe_per_class,
            bins: t.bins,
            reference_embed: t.reference.embed,
            reference_epochs: t.reference.epochs,
            ablation: AblationKind::Full,
            grid_search: false,
        }
    }
}

impl Default for EvalSection {
    fn default() -> Self {
        Self {
            n_per_class: 0,
            hist_bins: 20,
        }
    }
}

fn invalid(e: qcfd_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

/// Insert `value` at a dotted `path` such as `train.epochs`. The value is
/// read as a TOML literal, falling back to a bare string.
fn set_path(table: &mut toml::Table, path: &str, value: &str) -> Result<()> {
    let parsed: toml::Value = toml::from_str::<toml::Table>(&format!("v = {value}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    let mut keys: Vec<&str> = path.split('.').collect();
    let last = keys
        .pop()
        .filter(|k| !k.is_empty())
        .ok_or_else(|| CliError::Usage(format!("empty override key '{path}'")))?;
    let mut node = table;
    for k in keys {
        let entry = node
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("'{k}' in '{path}' is not a section")))?;
    }
    node.insert(last.to_string(), parsed);
    Ok(())
}

impl RunConfig {
    /// File (if any), then the seed variable, then `key=value` overrides and
    /// the explicit seed flag. The result is validated before it is returned.
    pub fn resolve(
        file: Option<&Path>,
        env_seed: Option<&str>,
        overrides: &[String],
        seed_flag: Option<u64>,
    ) -> Result<Self> {
        let mut table = match file {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(io(p))?;
                toml::from_str::<toml::Table>(&text)
                    .map_err(|e| CliError::Config(format!("{}: {e}", p.display())))?
            }
            None => toml::Table::new(),
        };
        if let Some(s) = env_seed {
            let seed: u64 = s.trim().parse().map_err(|_| {
                CliError::Config(format!("{SEED_ENV}='{s}' is not an unsigned integer"))
            })?;
            let seed = i64::try_from(seed).map_err(|_| {
                CliError::Config(format!("{SEED_ENV}={seed} does not fit a TOML integer"))
            })?;
            table.insert("seed".into(), toml::Value::Integer(seed));
        }
        for o in overrides {
            let (k, v) = o
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("override '{o}' is not key=value")))?;
            set_path(&mut table, k.trim(), v.trim())?;
        }
        let mut cfg: RunConfig = table
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        if let Some(s) = seed_flag {
            cfg.seed = s;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sim.n_per_class == 0 {
            return Err(CliError::Config("sim.n_per_class must be positive".into()));
        }
        if self.eval.hist_bins == 0 {
            return Err(CliError::Config("eval.hist_bins must be positive".into()));
        }
        let dsp = self.dsp_profile()?;
        let len = self.sim_profile()?.prototype.validate().map_err(invalid)?;
        if len != dsp.n {
            return Err(CliError::Config(format!(
                "simulated beats have {len} samples, dsp.n is {}",
                dsp.n
            )));
        }
        self.train_config().validate().map_err(invalid)
    }

    pub fn dsp_profile(&self) -> Result<DspProfile> {
        let mut p = match self.profile {
            ProfileKind::Desk => DspProfile::desk(),
            ProfileKind::Full => DspProfile::full(1000.0, 64, 32, 100),
        };
        let d = &self.dsp;
        p.fs = d.fs.unwrap_or(p.fs);
        p.n = d.n.unwrap_or(p.n);
        p.window = d.window.unwrap_or(p.window);
        p.k = d.k.unwrap_or(p.k);
        p.h = d.h.unwrap_or(p.h);
        p.w = d.w.unwrap_or(p.w);
        p.validate().map_err(invalid)?;
        Ok(p)
    }

    /// Simulator profile whose beats are exactly `dsp.n` samples at `dsp.fs`.
    pub fn sim_profile(&self) -> Result<SimProfile> {
        let dsp = self.dsp_profile()?;
        let mut prototype = BeatParams::desk(0.0);
        prototype.fs = dsp.fs;
        prototype.duration = dsp.n as f64 / dsp.fs;
        let s = &self.sim;
        Ok(SimProfile {
            prototype,
            st_offset: s.st_offset,
            jitter: JitterScales {
                amplitude: s.jitter_amplitude,
                center: s.jitter_center,
                width: s.jitter_width,
                shift: s.jitter_shift,
            },
            noise_sd: s.noise_sd,
        })
    }

    pub fn train_config(&self) -> TrainConfig {
        let t = &self.train;
        let base = TrainConfig {
            latent_dim: t.latent_dim,
            hidden: t.hidden,
            critic_hidden: t.critic_hidden,
            adam: AdamConfig {
                lr: t.learning_rate,
                beta1: t.beta1,
                beta2: t.beta2,
            },
            batch: t.batch,
            epochs: t.epochs,
            weights: LossWeights {
                cfd: t.lambda_cfd,
                interf: t.lambda_interf,
                phys: t.lambda_phys,
            },
            lambda_orth: t.lambda_orth,
            gp_weight: t.gp_weight,
            critic_steps: t.critic_steps,
            seed: self.seed,
            patience: t.patience,
            operator: InterferenceOperator::from_couplings(
                t.couplings.map(|[re, im]| Complex64::new(re, im)),
            ),
            learn_operator: t.learn_operator,
            interference_encoder: t.interference_encoder,
            probe_per_class: t.probe_per_class,
            bins: t.bins,
            reference: ReferenceConfig {
                embed: t.reference_embed,
                epochs: t.reference_epochs,
                ..ReferenceConfig::default()
            },
            match_moments: t.match_moments,
        };
        t.ablation.to_core().apply(&base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    /// SHA-256 of the canonical TOML rendering, hex encoded.
    pub fn hash(&self) -> String {
        Sha256::digest(self.to_toml().as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}
