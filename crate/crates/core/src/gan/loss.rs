//! Adversarial, morphology and interference loss terms with their
//! gradients.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use super::model::{join, CriticModel, GeneratorModel, GeneratorTrace};
use crate::beat::Fiducials;
use crate::error::{check_len, domain, Error, Result};
use crate::eval::ReferenceModels;
use crate::info::orthogonality_penalty_with_grad;
use crate::latent::{InterferenceOperator, LatentState, ProjectionEncoder};
use crate::rng;

/// Weights of the three auxiliary terms.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossWeights {
    pub cfd: f64,
    pub interf: f64,
    pub phys: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            cfd: 1.0,
            interf: 0.5,
            phys: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LossParts {
    pub gan: f64,
    pub cfd: f64,
    pub interf: f64,
    pub phys: f64,
}

/// `L_GAN + w_cfd L_CFD + w_interf L_interf + w_phys L_phys`.
pub fn total_generator_loss(parts: &LossParts, w: &LossWeights) -> Result<f64> {
    for (name, v) in [
        ("adversarial loss", parts.gan),
        ("complementarity loss", parts.cfd),
        ("interference loss", parts.interf),
        ("morphology loss", parts.phys),
    ] {
        if !v.is_finite() {
            return Err(Error::NumericHealth(format!("{name} = {v}")));
        }
    }
    Ok(parts.gan + w.cfd * parts.cfd + w.interf * parts.interf + w.phys * parts.phys)
}

/// `u real + (1 - u) fake`.
pub fn interpolate(real: &[f64], fake: &[f64], u: f64) -> Vec<f64> {
    real.iter()
        .zip(fake)
        .map(|(r, f)| u * r + (1.0 - u) * f)
        .collect()
}

/// `(|grad D(x)| - 1)^2` at a point drawn uniformly on the segment between
/// `real` and `fake`, the mixing weight drawn from `mix_seed`.
pub fn gradient_penalty(
    critic: &CriticModel,
    real: &[f64],
    fake: &[f64],
    mix_seed: u64,
) -> Result<f64> {
    check_len("fake sample", real.len(), fake.len())?;
    let u: f64 = rng::seeded(mix_seed).random();
    let x = interpolate(real, fake, u);
    let tr = critic.net.forward_trace(&x)?;
    let g = critic.net.input_gradient(&tr)?;
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    Ok((norm - 1.0) * (norm - 1.0))
}

/// Critic loss on one batch: `mean D(fake) - mean D(real) + w mean GP`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CriticLoss {
    pub loss: f64,
    pub wasserstein: f64,
    pub penalty: f64,
}

/// Evaluate the critic loss and, if `grads` is given, accumulate its
/// parameter gradient. `mix[b]` is the interpolation weight for pair `b`.
pub fn critic_objective(
    critic: &CriticModel,
    real: &[Vec<f64>],
    fake: &[Vec<f64>],
    mix: &[f64],
    gp_weight: f64,
    mut grads: Option<&mut [f64]>,
) -> Result<CriticLoss> {
    let b = real.len();
    if b == 0 {
        return Err(domain("critic batch is empty"));
    }
    check_len("fake batch", b, fake.len())?;
    check_len("mixing weights", b, mix.len())?;
    let scale = 1.0 / b as f64;
    let mut out = CriticLoss::default();
    for i in 0..b {
        let tf = critic.net.forward_trace(&fake[i])?;
        let tr = critic.net.forward_trace(&real[i])?;
        out.wasserstein += scale * (tf.output()[0] - tr.output()[0]);
        let th = critic
            .net
            .forward_trace(&interpolate(&real[i], &fake[i], mix[i]))?;
        if let Some(g) = grads.as_deref_mut() {
            critic.net.backward(&tf, &[scale], g, false)?;
            critic.net.backward(&tr, &[-scale], g, false)?;
            out.penalty += scale
                * critic
                    .net
                    .gradient_penalty_backward(&th, gp_weight * scale, g)?;
        } else {
            let gi = critic.net.input_gradient(&th)?;
            let n = gi.iter().map(|v| v * v).sum::<f64>().sqrt();
            out.penalty += scale * (n - 1.0) * (n - 1.0);
        }
    }
    out.loss = out.wasserstein + gp_weight * out.penalty;
    if !out.loss.is_finite() {
        return Err(Error::NumericHealth(format!("critic loss = {}", out.loss)));
    }
    Ok(out)
}

fn window_mse(
    t_hat: &[f64],
    template: &[f64],
    w: &core::ops::Range<usize>,
    grad: Option<&mut [f64]>,
) -> Result<f64> {
    if w.is_empty() {
        return Err(Error::DegenerateMorphology(format!("empty window {w:?}")));
    }
    if w.end > t_hat.len() || w.end > template.len() {
        return Err(Error::DegenerateMorphology(format!(
            "window {w:?} exceeds signal length {}",
            t_hat.len().min(template.len())
        )));
    }
    let n = w.len() as f64;
    let mut acc = 0.0;
    let mut grad = grad;
    for i in w.clone() {
        let d = t_hat[i] - template[i];
        acc += d * d;
        if let Some(g) = grad.as_deref_mut() {
            g[i] += 2.0 * d / n;
        }
    }
    Ok(acc / n)
}

/// Mean squared error over the QRS window plus that over the ST window.
pub fn phys_loss(t_hat: &[f64], template: &[f64], fid: &Fiducials) -> Result<f64> {
    Ok(window_mse(t_hat, template, &fid.qrs, None)? + window_mse(t_hat, template, &fid.st, None)?)
}

/// [`phys_loss`] and its gradient with respect to `t_hat`.
pub fn phys_loss_grad(t_hat: &[f64], template: &[f64], fid: &Fiducials) -> Result<(f64, Vec<f64>)> {
    let mut g = vec![0.0; t_hat.len()];
    let v = window_mse(t_hat, template, &fid.qrs, Some(&mut g))?
        + window_mse(t_hat, template, &fid.st, Some(&mut g))?;
    Ok((v, g))
}

/// Class template and fiducial windows for the morphology term.
#[derive(Debug, Clone, PartialEq)]
pub struct PhysTarget {
    pub template: Vec<f64>,
    pub windows: Fiducials,
}

/// Mean real interference energy under the current operator, with its
/// gradient with respect to the pair couplings.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfTarget {
    pub encoder: ProjectionEncoder,
    pub real: Vec<[Vec<f64>; 3]>,
    pub real_mean: f64,
    pub real_coupling_grad: [[f64; 2]; 3],
}

impl InterfTarget {
    pub fn new(
        encoder: ProjectionEncoder,
        real: Vec<[Vec<f64>; 3]>,
        op: &InterferenceOperator,
    ) -> Result<Self> {
        if real.is_empty() {
            return Err(domain("interference target needs real samples"));
        }
        let mut t = Self {
            encoder,
            real,
            real_mean: 0.0,
            real_coupling_grad: [[0.0; 2]; 3],
        };
        t.refresh(op)?;
        Ok(t)
    }

    /// Recompute the real statistics after the operator changes.
    pub fn refresh(&mut self, op: &InterferenceOperator) -> Result<()> {
        let n = self.real.len() as f64;
        let mut mean = 0.0;
        let mut cg = [[0.0; 2]; 3];
        for r in &self.real {
            let e = self.encoder.energy_with_grad([&r[0], &r[1], &r[2]], op)?;
            mean += e.energy / n;
            for k in 0..3 {
                cg[k][0] += e.couplings[k][0] / n;
                cg[k][1] += e.couplings[k][1] / n;
            }
        }
        self.real_mean = mean;
        self.real_coupling_grad = cg;
        Ok(())
    }
}

/// Everything the generator loss needs beyond the generator itself.
#[derive(Debug, Clone, Copy)]
pub struct GeneratorObjective<'a> {
    pub critic: &'a CriticModel,
    pub weights: LossWeights,
    pub lambda_orth: f64,
    pub reference: Option<&'a ReferenceModels>,
    pub interf: Option<&'a InterfTarget>,
    pub phys: Option<&'a PhysTarget>,
}

/// Generator loss parts on one batch. `cfd` holds the differentiable
/// orthogonality term already scaled by `lambda_orth`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct GeneratorLoss {
    pub parts: LossParts,
    pub orth: f64,
    pub total: f64,
}

impl GeneratorObjective<'_> {
    /// Evaluate on a batch of latent states; with `grads`, accumulate the
    /// gradient of the total with respect to the generator's flat params.
    pub fn evaluate(
        &self,
        model: &GeneratorModel,
        states: &[LatentState],
        mut grads: Option<&mut [f64]>,
    ) -> Result<GeneratorLoss> {
        let b = states.len();
        if b == 0 {
            return Err(domain("generator batch is empty"));
        }
        let traces: Vec<GeneratorTrace> = states
            .iter()
            .map(|s| model.forward_trace(s))
            .collect::<Result<_>>()?;
        let want = grads.is_some();
        let scale = 1.0 / b as f64;
        let dims = model.arch.outputs;
        let mut out_grads: Vec<[Vec<f64>; 3]> = if want {
            (0..b)
                .map(|_| core::array::from_fn(|m| vec![0.0; dims[m]]))
                .collect()
        } else {
            Vec::new()
        };
        let mut parts = LossParts::default();

        // adversarial: -mean D(G(z))
        for (i, tr) in traces.iter().enumerate() {
            let x = join(tr.outputs());
            let ct = self.critic.net.forward_trace(&x)?;
            parts.gan -= scale * ct.output()[0];
            if want {
                let gx = self.critic.net.input_gradient(&ct)?;
                let mut off = 0;
                for m in 0..3 {
                    for (g, v) in out_grads[i][m].iter_mut().zip(&gx[off..off + dims[m]]) {
                        *g -= scale * v;
                    }
                    off += dims[m];
                }
            }
        }

        // orthogonality of reference-encoder features
        let mut orth = 0.0;
        if let Some(reference) = self.reference {
            let enc_traces: Vec<[crate::nn::Trace; 3]> = traces
                .iter()
                .map(|tr| {
                    let o = tr.outputs();
                    Ok([
                        reference.encoders[0].forward_trace(o[0])?,
                        reference.encoders[1].forward_trace(o[1])?,
                        reference.encoders[2].forward_trace(o[2])?,
                    ])
                })
                .collect::<Result<_>>()?;
            let feats: [Vec<Vec<f64>>; 3] = core::array::from_fn(|m| {
                enc_traces.iter().map(|t| t[m].output().to_vec()).collect()
            });
            let (value, fgrads) =
                orthogonality_penalty_with_grad([&feats[0], &feats[1], &feats[2]])?;
            orth = value;
            parts.cfd = self.lambda_orth * value;
            let w = self.weights.cfd * self.lambda_orth;
            if want && w != 0.0 {
                for m in 0..3 {
                    let mut scratch = vec![0.0; reference.encoders[m].param_count()];
                    for i in 0..b {
                        let g: Vec<f64> = fgrads[m][i].iter().map(|v| w * v).collect();
                        let gi = reference.encoders[m]
                            .backward(&enc_traces[i][m], &g, &mut scratch, true)?
                            .unwrap_or_default();
                        for (a, v) in out_grads[i][m].iter_mut().zip(&gi) {
                            *a += v;
                        }
                    }
                }
            }
        }

        // interference: |mean E(real) - mean E(gen)|
        let mut coupling_grad = [[0.0; 2]; 3];
        if let Some(target) = self.interf {
            let energies: Vec<_> = traces
                .iter()
                .map(|tr| target.encoder.energy_with_grad(tr.outputs(), &model.op))
                .collect::<Result<_>>()?;
            let mean_gen = energies.iter().map(|e| e.energy).sum::<f64>() * scale;
            parts.interf = (target.real_mean - mean_gen).abs();
            let w = self.weights.interf;
            if want && w != 0.0 {
                let sign = if mean_gen > target.real_mean {
                    1.0
                } else if mean_gen < target.real_mean {
                    -1.0
                } else {
                    0.0
                };
                for (i, e) in energies.iter().enumerate() {
                    for m in 0..3 {
                        for (a, v) in out_grads[i][m].iter_mut().zip(&e.inputs[m]) {
                            *a += w * sign * scale * v;
                        }
                    }
                    for k in 0..3 {
                        for c in 0..2 {
                            coupling_grad[k][c] += w * sign * scale * e.couplings[k][c];
                        }
                    }
                }
                for k in 0..3 {
                    for c in 0..2 {
                        coupling_grad[k][c] -= w * sign * target.real_coupling_grad[k][c];
                    }
                }
            }
        }

        // morphology windows against the class template
        if let Some(target) = self.phys {
            let w = self.weights.phys;
            for (i, tr) in traces.iter().enumerate() {
                let t_hat = tr.outputs()[0];
                let (v, g) = phys_loss_grad(t_hat, &target.template, &target.windows)?;
                parts.phys += scale * v;
                if want && w != 0.0 {
                    for (a, gv) in out_grads[i][0].iter_mut().zip(&g) {
                        *a += w * scale * gv;
                    }
                }
            }
        }

        let total = total_generator_loss(&parts, &self.weights)?;
        if let Some(g) = grads.as_deref_mut() {
            for (tr, og) in traces.iter().zip(&out_grads) {
                model.backward(tr, [&og[0], &og[1], &og[2]], g)?;
            }
            for (k, cg) in coupling_grad.iter().enumerate() {
                if let Some(idx) = model.coupling_index(k) {
                    g[idx] += cg[0];
                    g[idx + 1] += cg[1];
                }
            }
        }
        Ok(GeneratorLoss { parts, orth, total })
    }
}
