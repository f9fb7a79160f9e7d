//! Tri-headed generator and joint critic.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::beat::BeatLabel;
use crate::dsp::TriModalSample;
use crate::error::{check_len, domain, Result};
use crate::latent::{
    cross_branch_mix, cross_branch_mix_backward, sample_latent_with, InterferenceOperator,
    LatentState, PAIRS,
};
use crate::nn::{Activation, DenseNet, LayerShape, Trace};
use crate::rng;

/// Sizes of the generator and critic.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Architecture {
    /// Complex latent length `d = 3m`.
    pub latent_dim: usize,
    /// Width of each branch of the shared core and of each head.
    pub hidden: usize,
    /// Output lengths of the T, F and S heads.
    pub outputs: [usize; 3],
    pub critic_hidden: usize,
}

impl Architecture {
    pub fn desk(outputs: [usize; 3]) -> Self {
        Self {
            latent_dim: 24,
            hidden: 32,
            outputs,
            critic_hidden: 64,
        }
    }

    pub fn sample_len(&self) -> usize {
        self.outputs.iter().sum()
    }

    fn core_layers(&self) -> [LayerShape; 1] {
        [LayerShape::new(
            2 * self.latent_dim,
            3 * self.hidden,
            Activation::Tanh,
        )]
    }

    fn head_layers(&self, m: usize) -> [LayerShape; 2] {
        let out_act = if m == 0 {
            Activation::Tanh
        } else {
            Activation::Identity
        };
        [
            LayerShape::new(self.hidden, self.hidden, Activation::Tanh),
            LayerShape::new(self.hidden, self.outputs[m], out_act),
        ]
    }

    fn critic_layers(&self) -> [LayerShape; 2] {
        [
            LayerShape::new(self.sample_len(), self.critic_hidden, Activation::Tanh),
            LayerShape::new(self.critic_hidden, 1, Activation::Identity),
        ]
    }
}

/// Shared core, cross-branch mixing and three decoding heads.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GeneratorModel {
    pub arch: Architecture,
    pub core: DenseNet,
    pub heads: [DenseNet; 3],
    pub op: InterferenceOperator,
    /// When set, the three pair couplings are trained along with the
    /// network weights.
    pub learn_op: bool,
}

/// Intermediate values of one generator pass.
#[derive(Debug, Clone)]
pub struct GeneratorTrace {
    core: Trace,
    heads: [Trace; 3],
}

impl GeneratorTrace {
    pub fn outputs(&self) -> [&[f64]; 3] {
        core::array::from_fn(|m| self.heads[m].output())
    }
}

impl GeneratorModel {
    pub fn zeros(arch: Architecture, op: InterferenceOperator) -> Result<Self> {
        Self::check_arch(&arch)?;
        Ok(Self {
            arch,
            core: DenseNet::zeros(&arch.core_layers())?,
            heads: [
                DenseNet::zeros(&arch.head_layers(0))?,
                DenseNet::zeros(&arch.head_layers(1))?,
                DenseNet::zeros(&arch.head_layers(2))?,
            ],
            op,
            learn_op: false,
        })
    }

    pub fn init(
        arch: Architecture,
        op: InterferenceOperator,
        learn_op: bool,
        rng: &mut impl rand::RngCore,
    ) -> Result<Self> {
        Self::check_arch(&arch)?;
        op.validate()?;
        Ok(Self {
            arch,
            core: DenseNet::init(&arch.core_layers(), rng)?,
            heads: [
                DenseNet::init(&arch.head_layers(0), rng)?,
                DenseNet::init(&arch.head_layers(1), rng)?,
                DenseNet::init(&arch.head_layers(2), rng)?,
            ],
            op,
            learn_op,
        })
    }

    fn check_arch(arch: &Architecture) -> Result<()> {
        if arch.latent_dim == 0 || !arch.latent_dim.is_multiple_of(3) {
            return Err(domain("latent dimension must be 3m with m >= 1"));
        }
        if arch.hidden == 0 || arch.critic_hidden == 0 || arch.outputs.contains(&0) {
            return Err(domain("network widths must be positive"));
        }
        Ok(())
    }

    pub fn forward_trace(&self, state: &LatentState) -> Result<GeneratorTrace> {
        check_len("latent state", self.arch.latent_dim, state.dim())?;
        let core = self.core.forward_trace(&state.z.realify())?;
        let h = self.arch.hidden;
        let out = core.output();
        let mixed = cross_branch_mix([&out[..h], &out[h..2 * h], &out[2 * h..]], &self.op)?;
        let heads = [
            self.heads[0].forward_trace(&mixed[0])?,
            self.heads[1].forward_trace(&mixed[1])?,
            self.heads[2].forward_trace(&mixed[2])?,
        ];
        Ok(GeneratorTrace { core, heads })
    }

    /// `(T, F, S)` for one latent state.
    pub fn forward(&self, state: &LatentState) -> Result<[Vec<f64>; 3]> {
        let tr = self.forward_trace(state)?;
        Ok(tr.heads.map(|t| t.output().to_vec()))
    }

    /// Number of trainable parameters in the flat layout: core, T, F and S
    /// heads, then `(Re, Im)` of each pair coupling when the operator is
    /// learned.
    pub fn param_count(&self) -> usize {
        self.core.param_count()
            + self.heads.iter().map(DenseNet::param_count).sum::<usize>()
            + if self.learn_op { 6 } else { 0 }
    }

    fn ranges(&self) -> [core::ops::Range<usize>; 4] {
        let mut start = 0;
        let mut next = |n: usize| {
            let r = start..start + n;
            start += n;
            r
        };
        [
            next(self.core.param_count()),
            next(self.heads[0].param_count()),
            next(self.heads[1].param_count()),
            next(self.heads[2].param_count()),
        ]
    }

    fn coupling_offset(&self) -> usize {
        self.param_count() - 6
    }

    pub fn flat_params(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.param_count());
        v.extend_from_slice(self.core.params());
        for h in &self.heads {
            v.extend_from_slice(h.params());
        }
        if self.learn_op {
            for c in self.op.couplings() {
                v.push(c.re);
                v.push(c.im);
            }
        }
        v
    }

    pub fn set_flat_params(&mut self, p: &[f64]) -> Result<()> {
        check_len("generator parameters", self.param_count(), p.len())?;
        let [c, t, f, s] = self.ranges();
        self.core.set_params(&p[c])?;
        self.heads[0].set_params(&p[t])?;
        self.heads[1].set_params(&p[f])?;
        self.heads[2].set_params(&p[s])?;
        if self.learn_op {
            let o = self.coupling_offset();
            let c: [Complex64; 3] =
                core::array::from_fn(|k| Complex64::new(p[o + 2 * k], p[o + 2 * k + 1]));
            self.op = InterferenceOperator::from_couplings(c);
        }
        Ok(())
    }

    /// Accumulate parameter gradients given gradients at the three outputs.
    pub fn backward(
        &self,
        trace: &GeneratorTrace,
        grad_out: [&[f64]; 3],
        grads: &mut [f64],
    ) -> Result<()> {
        check_len("generator gradient", self.param_count(), grads.len())?;
        let [rc, rt, rf, rs] = self.ranges();
        let head_ranges = [rt, rf, rs];
        let mut grad_mixed: [Vec<f64>; 3] = Default::default();
        for m in 0..3 {
            grad_mixed[m] = self.heads[m]
                .backward(
                    &trace.heads[m],
                    grad_out[m],
                    &mut grads[head_ranges[m].clone()],
                    true,
                )?
                .unwrap_or_default();
        }
        let h = self.arch.hidden;
        let out = trace.core.output();
        let branches = [&out[..h], &out[h..2 * h], &out[2 * h..]];
        let (grad_h, grad_c) = cross_branch_mix_backward(
            [&grad_mixed[0], &grad_mixed[1], &grad_mixed[2]],
            branches,
            &self.op,
        );
        let grad_core: Vec<f64> = grad_h.concat();
        self.core
            .backward(&trace.core, &grad_core, &mut grads[rc], false)?;
        if self.learn_op {
            let o = self.coupling_offset();
            for (k, g) in grad_c.iter().enumerate() {
                grads[o + 2 * k] += g;
            }
        }
        Ok(())
    }

    /// Moment-matched start: each head's output bias is set so a zero
    /// hidden state decodes to `means[m]` (through `atanh` for the bounded T
    /// head), then its output weights are rescaled so the spread over
    /// `probe` matches `spreads[m]`, the mean per-feature standard deviation
    /// of the real data.
    pub fn match_moments(
        &mut self,
        means: [&[f64]; 3],
        spreads: [f64; 3],
        probe: &[LatentState],
    ) -> Result<()> {
        for (m, mean) in means.iter().enumerate() {
            check_len("output mean", self.arch.outputs[m], mean.len())?;
            let (_, bias) = self.heads[m].output_layer_mut();
            for (b, &v) in bias.iter_mut().zip(mean.iter()) {
                *b = if m == 0 {
                    atanh(v.clamp(-0.99, 0.99))
                } else {
                    v
                };
            }
        }
        if probe.len() < 2 {
            return Ok(());
        }
        let outs: Vec<[Vec<f64>; 3]> = probe
            .iter()
            .map(|z| self.forward(z))
            .collect::<Result<_>>()?;
        for m in 0..3 {
            let rows: Vec<&[f64]> = outs.iter().map(|o| o[m].as_slice()).collect();
            let spread = mean_feature_sd(&rows);
            if spread > 0.0 && spreads[m].is_finite() && spreads[m] >= 0.0 {
                let (w, _) = self.heads[m].output_layer_mut();
                let k = spreads[m] / spread;
                w.iter_mut().for_each(|v| *v *= k);
            }
        }
        Ok(())
    }

    /// Offset of the `(Re, Im)` pair for coupling `k` in the flat layout.
    pub fn coupling_index(&self, k: usize) -> Option<usize> {
        (self.learn_op && k < PAIRS.len()).then(|| self.coupling_offset() + 2 * k)
    }
}

fn atanh(v: f64) -> f64 {
    0.5 * num_traits::Float::ln((1.0 + v) / (1.0 - v))
}

/// Mean over features of the per-feature standard deviation of `rows`.
pub fn mean_feature_sd(rows: &[&[f64]]) -> f64 {
    if rows.len() < 2 {
        return 0.0;
    }
    let n = rows.len() as f64;
    let dim = rows[0].len();
    let mut total = 0.0;
    for j in 0..dim {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows
            .iter()
            .map(|r| (r[j] - mean) * (r[j] - mean))
            .sum::<f64>()
            / (n - 1.0);
        total += num_traits::Float::sqrt(var);
    }
    total / dim as f64
}

/// Draw `n` latent states and decode them as labelled samples.
pub fn generate(
    model: &GeneratorModel,
    label: BeatLabel,
    n: usize,
    seed: u64,
) -> Result<Vec<TriModalSample>> {
    let mut r = rng::seeded(seed);
    (0..n)
        .map(|_| {
            let z = sample_latent_with(model.arch.latent_dim, &mut r)?;
            let [t, f, s] = model.forward(&z)?;
            Ok(TriModalSample {
                t,
                f,
                s,
                label,
                fiducials: None,
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticModel {
    pub net: DenseNet,
}

impl CriticModel {
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        Ok(Self {
            net: DenseNet::zeros(&arch.critic_layers())?,
        })
    }

    pub fn init(arch: &Architecture, rng: &mut impl rand::RngCore) -> Result<Self> {
        Ok(Self {
            net: DenseNet::init(&arch.critic_layers(), rng)?,
        })
    }

    /// Wrap an arbitrary scalar-output network.
    pub fn from_net(net: DenseNet) -> Result<Self> {
        check_len("critic output", 1, net.output_dim())?;
        Ok(Self { net })
    }

    pub fn score(&self, x: &[f64]) -> Result<f64> {
        Ok(self.net.forward(x)?[0])
    }

    pub fn score_sample(&self, s: &TriModalSample) -> Result<f64> {
        self.score(&s.flatten())
    }
}

/// Concatenate three parts into one critic input.
pub fn join(parts: [&[f64]; 3]) -> Vec<f64> {
    let mut v = vec![0.0; 0];
    v.reserve(parts.iter().map(|p| p.len()).sum());
    for p in parts {
        v.extend_from_slice(p);
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::latent::sample_latent;

    fn arch() -> Architecture {
        Architecture {
            latent_dim: 6,
            hidden: 4,
            outputs: [5, 3, 6],
            critic_hidden: 3,
        }
    }

    #[test]
    fn zero_model_outputs_zero() {
        let g = GeneratorModel::zeros(
            Architecture::desk([256, 32, 1024]),
            InterferenceOperator::default(),
        )
        .unwrap();
        let out = g.forward(&sample_latent(24, 1).unwrap()).unwrap();
        assert_eq!(out[0].len(), 256);
        assert_eq!(out[1].len(), 32);
        assert_eq!(out[2].len(), 1024);
        assert!(out.iter().flatten().all(|&v| v == 0.0));
        let c = CriticModel::zeros(&Architecture::desk([256, 32, 1024])).unwrap();
        assert_eq!(c.score(&vec![1.0; 1312]).unwrap(), 0.0);
    }

    #[test]
    fn zero_operator_means_no_mixing() {
        let mut r = rng::seeded(3);
        let g = GeneratorModel::init(arch(), InterferenceOperator::zero(), false, &mut r).unwrap();
        let z = sample_latent(6, 9).unwrap();
        let tr = g.forward_trace(&z).unwrap();
        let h = g.core.forward(&z.z.realify()).unwrap();
        for m in 0..3 {
            let direct = g.heads[m].forward(&h[m * 4..(m + 1) * 4]).unwrap();
            assert_eq!(direct, tr.outputs()[m]);
        }
    }

    #[test]
    fn flat_round_trip() {
        let mut r = rng::seeded(4);
        let g =
            GeneratorModel::init(arch(), InterferenceOperator::default(), true, &mut r).unwrap();
        let p = g.flat_params();
        assert_eq!(p.len(), g.param_count());
        let mut h = GeneratorModel::zeros(arch(), InterferenceOperator::zero()).unwrap();
        h.learn_op = true;
        h.set_flat_params(&p).unwrap();
        assert_eq!(h, g);
    }

    #[test]
    fn backward_matches_finite_differences() {
        let mut r = rng::seeded(5);
        let g =
            GeneratorModel::init(arch(), InterferenceOperator::default(), true, &mut r).unwrap();
        let z = sample_latent(6, 2).unwrap();
        let w: [Vec<f64>; 3] = core::array::from_fn(|m| {
            (0..arch().outputs[m])
                .map(|i| (i as f64 + 1.0) * 0.1 - 0.2 * m as f64)
                .collect()
        });
        let loss = |g: &GeneratorModel| -> f64 {
            let o = g.forward(&z).unwrap();
            (0..3)
                .map(|m| o[m].iter().zip(&w[m]).map(|(a, b)| a * b).sum::<f64>())
                .sum()
        };
        let tr = g.forward_trace(&z).unwrap();
        let mut grads = vec![0.0; g.param_count()];
        g.backward(&tr, [&w[0], &w[1], &w[2]], &mut grads).unwrap();
        let p = g.flat_params();
        let h = 1e-6;
        for k in 0..p.len() {
            let mut q = p.clone();
            q[k] += h;
            let mut gp = g.clone();
            gp.set_flat_params(&q).unwrap();
            let up = loss(&gp);
            q[k] -= 2.0 * h;
            gp.set_flat_params(&q).unwrap();
            let dn = loss(&gp);
            let fd = (up - dn) / (2.0 * h);
            assert!(
                (grads[k] - fd).abs() < 1e-7,
                "param {k}: {} vs {fd}",
                grads[k]
            );
        }
    }
}
