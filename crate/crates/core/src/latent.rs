//! Complex latent state, Hermitian interference operator, interference
//! energy and loss, and the cross-branch mixing used inside the generator.
//!
//! A latent vector of length `d = 3m` is read as three blocks of `m`
//! entries (T, F, S). Each block yields one modality amplitude: its
//! Euclidean norm as modulus and the argument of the block sum as phase.
//! For a unit-norm vector the amplitudes are therefore unit-norm too.

use alloc::vec;
use alloc::vec::Vec;

use num_complex::Complex64;
use num_traits::Float;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{check_len, domain, Error, Result};
use crate::rng;

const HERMITIAN_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ComplexVec(pub Vec<Complex64>);

impl ComplexVec {
    pub fn from_parts(re: &[f64], im: &[f64]) -> Result<Self> {
        check_len("imaginary part", re.len(), im.len())?;
        let v: Vec<Complex64> = re
            .iter()
            .zip(im)
            .map(|(&a, &b)| Complex64::new(a, b))
            .collect();
        if v.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NumericHealth("complex vector".into()));
        }
        Ok(Self(v))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `[re_0 .. re_{d-1}, im_0 .. im_{d-1}]`.
    pub fn realify(&self) -> Vec<f64> {
        self.0
            .iter()
            .map(|c| c.re)
            .chain(self.0.iter().map(|c| c.im))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LatentState {
    pub z: ComplexVec,
    /// (alpha_T, alpha_F, alpha_S).
    pub amplitudes: [Complex64; 3],
}

/// Modulus = block norm, phase = argument of the block sum.
pub fn block_amplitudes(z: &[Complex64]) -> [Complex64; 3] {
    let m = z.len() / 3;
    core::array::from_fn(|b| {
        let block = &z[b * m..(b + 1) * m];
        let r = block.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        let s: Complex64 = block.iter().sum();
        let phase = if s.norm() > 0.0 { s.arg() } else { 0.0 };
        Complex64::from_polar(r, phase)
    })
}

impl LatentState {
    /// Normalise `z` and derive the block amplitudes.
    pub fn from_complex(z: ComplexVec) -> Result<Self> {
        if z.is_empty() || !z.len().is_multiple_of(3) {
            return Err(domain("latent length must be a positive multiple of 3"));
        }
        let n = z.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(domain("latent vector must be non-zero and finite"));
        }
        let z = ComplexVec(z.0.iter().map(|c| c / n).collect());
        let amplitudes = block_amplitudes(&z.0);
        Ok(Self { z, amplitudes })
    }

    pub fn dim(&self) -> usize {
        self.z.len()
    }
}

/// `z_r, z_i ~ N(0, I)`, then l2-normalised.
pub fn sample_latent(d: usize, seed: u64) -> Result<LatentState> {
    let mut r = rng::seeded(seed);
    sample_latent_with(d, &mut r)
}

pub fn sample_latent_with(d: usize, r: &mut impl rand::RngCore) -> Result<LatentState> {
    if d == 0 || !d.is_multiple_of(3) {
        return Err(domain("latent dimension must be 3m with m >= 1"));
    }
    let re: Vec<f64> = (0..d).map(|_| StandardNormal.sample(r)).collect();
    let im: Vec<f64> = (0..d).map(|_| StandardNormal.sample(r)).collect();
    LatentState::from_complex(ComplexVec::from_parts(&re, &im)?)
}

/// Couplings of the three unordered modality pairs (T,F), (F,S), (S,T).
pub const PAIRS: [(usize, usize); 3] = [(0, 1), (1, 2), (2, 0)];

/// 3x3 coupling matrix; valid operators are Hermitian with zero diagonal.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct InterferenceOperator {
    pub w: [[Complex64; 3]; 3],
}

impl Default for InterferenceOperator {
    fn default() -> Self {
        let c = Complex64::new(0.3, 0.0);
        Self::from_couplings([c, c, c])
    }
}

impl InterferenceOperator {
    pub fn zero() -> Self {
        Self {
            w: [[Complex64::new(0.0, 0.0); 3]; 3],
        }
    }

    /// Build from `w_TF, w_FS, w_ST`, completing by conjugate symmetry.
    pub fn from_couplings(c: [Complex64; 3]) -> Self {
        let mut op = Self::zero();
        for (&(i, j), &v) in PAIRS.iter().zip(&c) {
            op.w[i][j] = v;
            op.w[j][i] = v.conj();
        }
        op
    }

    pub fn couplings(&self) -> [Complex64; 3] {
        PAIRS.map(|(i, j)| self.w[i][j])
    }

    /// Largest deviation from Hermitian symmetry or a zero diagonal.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d = 0.0f64;
        for i in 0..3 {
            d = d.max(self.w[i][i].norm());
            for j in 0..3 {
                d = d.max((self.w[i][j] - self.w[j][i].conj()).norm());
            }
        }
        d
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.hermitian_defect();
        if d <= HERMITIAN_TOL
            && self
                .w
                .iter()
                .flatten()
                .all(|c| c.re.is_finite() && c.im.is_finite())
        {
            Ok(())
        } else {
            Err(Error::OperatorDomain(d))
        }
    }

    /// Row-major, real/imaginary interleaved.
    pub fn to_interleaved(&self) -> [f64; 18] {
        let mut out = [0.0; 18];
        for (k, c) in self.w.iter().flatten().enumerate() {
            out[2 * k] = c.re;
            out[2 * k + 1] = c.im;
        }
        out
    }

    pub fn from_interleaved(v: &[f64]) -> Result<Self> {
        check_len("interleaved operator", 18, v.len())?;
        let mut op = Self::zero();
        for k in 0..9 {
            op.w[k / 3][k % 3] = Complex64::new(v[2 * k], v[2 * k + 1]);
        }
        op.validate()?;
        Ok(op)
    }

    /// `<a|W|a> / <a|a>` without the realness discard.
    pub fn quadratic_form(&self, a: &[Complex64; 3]) -> Complex64 {
        let norm2: f64 = a.iter().map(|c| c.norm_sqr()).sum();
        if !(norm2 > 0.0) {
            return Complex64::new(0.0, 0.0);
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..3 {
            for j in 0..3 {
                acc += a[i].conj() * self.w[i][j] * a[j];
            }
        }
        acc / norm2
    }
}

/// `<Psi|H|Psi>` on the normalised modality amplitudes.
pub fn interference_energy(state: &LatentState, op: &InterferenceOperator) -> Result<f64> {
    op.validate()?;
    Ok(op.quadratic_form(&state.amplitudes).re)
}

/// `|mean I(real) - mean I(gen)|`.
pub fn interference_loss(
    real: &[LatentState],
    generated: &[LatentState],
    op: &InterferenceOperator,
) -> Result<f64> {
    if real.is_empty() || generated.is_empty() {
        return Err(domain("interference loss needs non-empty batches"));
    }
    let mean = |batch: &[LatentState]| -> Result<f64> {
        let mut acc = 0.0;
        for s in batch {
            acc += interference_energy(s, op)?;
        }
        Ok(acc / batch.len() as f64)
    };
    Ok((mean(real)? - mean(generated)?).abs())
}

/// `h_i + sum_{j != i} Re(w_ij) h_j`.
pub fn cross_branch_mix(h: [&[f64]; 3], op: &InterferenceOperator) -> Result<[Vec<f64>; 3]> {
    let n = h[0].len();
    check_len("branch activation", n, h[1].len())?;
    check_len("branch activation", n, h[2].len())?;
    Ok(core::array::from_fn(|i| {
        let mut out = h[i].to_vec();
        for j in 0..3 {
            if j == i {
                continue;
            }
            let c = op.w[i][j].re;
            if c != 0.0 {
                for (o, v) in out.iter_mut().zip(h[j]) {
                    *o += c * v;
                }
            }
        }
        out
    }))
}

/// Gradient of [`cross_branch_mix`]: returns the gradient with respect to
/// each input branch and to the real part of each pair coupling.
pub fn cross_branch_mix_backward(
    grad_out: [&[f64]; 3],
    h: [&[f64]; 3],
    op: &InterferenceOperator,
) -> ([Vec<f64>; 3], [f64; 3]) {
    let grad_h = core::array::from_fn(|j| {
        let mut g = grad_out[j].to_vec();
        for i in 0..3 {
            if i == j {
                continue;
            }
            let c = op.w[i][j].re;
            if c != 0.0 {
                for (gv, o) in g.iter_mut().zip(grad_out[i]) {
                    *gv += c * o;
                }
            }
        }
        g
    });
    let grad_c = PAIRS.map(|(i, j)| dot(grad_out[i], h[j]) + dot(grad_out[j], h[i]));
    (grad_h, grad_c)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Fixed random projection from a (T, F, S) triple to a latent state: each
/// modality is mapped to an `m`-entry complex block by a Gaussian matrix.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProjectionEncoder {
    pub m: usize,
    pub dims: [usize; 3],
    /// Per modality: real and imaginary `m x dim` row-major matrices.
    re: [Vec<f64>; 3],
    im: [Vec<f64>; 3],
}

/// Energy plus its gradient with respect to the encoded inputs and the
/// coupling parameters `(Re w, Im w)` of each pair.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyGrad {
    pub energy: f64,
    pub inputs: [Vec<f64>; 3],
    pub couplings: [[f64; 2]; 3],
}

impl ProjectionEncoder {
    pub fn new(dims: [usize; 3], m: usize, seed: u64) -> Result<Self> {
        if m == 0 || dims.contains(&0) {
            return Err(domain(
                "projection encoder needs m >= 1 and non-empty modalities",
            ));
        }
        let mut r = rng::seeded(seed);
        let mut draw = |dim: usize| -> Vec<f64> {
            let scale = 1.0 / (dim as f64).sqrt();
            (0..m * dim)
                .map(|_| {
                    let v: f64 = StandardNormal.sample(&mut r);
                    v * scale
                })
                .collect()
        };
        let mut re: [Vec<f64>; 3] = Default::default();
        let mut im: [Vec<f64>; 3] = Default::default();
        for k in 0..3 {
            re[k] = draw(dims[k]);
            im[k] = draw(dims[k]);
        }
        Ok(Self { m, dims, re, im })
    }

    fn project(&self, parts: [&[f64]; 3]) -> Result<Vec<Complex64>> {
        let mut c = Vec::with_capacity(3 * self.m);
        for k in 0..3 {
            check_len("encoder input", self.dims[k], parts[k].len())?;
            let d = self.dims[k];
            for row in 0..self.m {
                let r = &self.re[k][row * d..(row + 1) * d];
                let i = &self.im[k][row * d..(row + 1) * d];
                c.push(Complex64::new(dot(r, parts[k]), dot(i, parts[k])));
            }
        }
        Ok(c)
    }

    pub fn encode(&self, parts: [&[f64]; 3]) -> Result<LatentState> {
        LatentState::from_complex(ComplexVec(self.project(parts)?))
    }

    /// Interference energy of the encoded state and its gradients. A zero
    /// projection has energy 0 and zero gradient.
    pub fn energy_with_grad(
        &self,
        parts: [&[f64]; 3],
        op: &InterferenceOperator,
    ) -> Result<EnergyGrad> {
        let c = self.project(parts)?;
        let m = self.m;
        let mut rho = [0.0; 3];
        let mut sums = [Complex64::new(0.0, 0.0); 3];
        let mut beta = [Complex64::new(0.0, 0.0); 3];
        for b in 0..3 {
            let block = &c[b * m..(b + 1) * m];
            rho[b] = block.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            sums[b] = block.iter().sum();
            let phase = if sums[b].norm() > 0.0 {
                sums[b] / sums[b].norm()
            } else {
                Complex64::new(1.0, 0.0)
            };
            beta[b] = phase * rho[b];
        }
        let norm2: f64 = beta.iter().map(|v| v.norm_sqr()).sum();
        let zero = EnergyGrad {
            energy: 0.0,
            inputs: core::array::from_fn(|k| vec![0.0; self.dims[k]]),
            couplings: [[0.0; 2]; 3],
        };
        if !(norm2 > 0.0) {
            return Ok(zero);
        }
        let energy = op.quadratic_form(&beta).re;
        // dE = Re(conj(g) . d beta) with g = 2 (W beta - E beta) / |beta|^2
        let g: [Complex64; 3] = core::array::from_fn(|i| {
            let mut wb = Complex64::new(0.0, 0.0);
            for j in 0..3 {
                wb += op.w[i][j] * beta[j];
            }
            (wb - beta[i] * energy) * (2.0 / norm2)
        });
        let couplings = PAIRS.map(|(i, j)| {
            let x = beta[i].conj() * beta[j];
            [2.0 * x.re / norm2, -2.0 * x.im / norm2]
        });
        let mut inputs = zero.inputs;
        for b in 0..3 {
            let s_abs = sums[b].norm();
            if rho[b] == 0.0 || s_abs == 0.0 {
                continue;
            }
            let u = sums[b] / s_abs;
            let radial = (g[b].conj() * u).re / rho[b];
            let iu = Complex64::new(0.0, 1.0) * u;
            let t = (g[b].conj() * iu).re * rho[b] / s_abs;
            let d = self.dims[b];
            for row in 0..m {
                let ck = c[b * m + row];
                let gk = ck * radial + iu * t;
                let r = &self.re[b][row * d..(row + 1) * d];
                let im = &self.im[b][row * d..(row + 1) * d];
                for ((x, pr), pi) in inputs[b].iter_mut().zip(r).zip(im) {
                    *x += gk.re * pr + gk.im * pi;
                }
            }
        }
        Ok(EnergyGrad {
            energy,
            inputs,
            couplings,
        })
    }
}
