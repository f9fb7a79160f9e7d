//! Plug-in information statistics over discretised modality features:
//! per-modality informativeness, pairwise redundancy, tri-domain
//! complementarity and the complementarity-preserving loss.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use num_traits::Float;
use rand::Rng as _;

use crate::dsp::{canonical_order, TriModalSample};
use crate::error::{domain, Error, Result};
use crate::rng;

/// Count table over `dims`; the last axis is the label, the leading axes
/// form the (possibly joint) feature variable. Row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DiscreteJoint {
    pub dims: Vec<usize>,
    pub counts: Vec<u64>,
}

impl DiscreteJoint {
    pub fn new(dims: Vec<usize>, counts: Vec<u64>) -> Result<Self> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(domain("joint needs at least two non-empty axes"));
        }
        let cells: usize = dims.iter().product();
        if cells != counts.len() {
            return Err(Error::Shape {
                what: "joint counts",
                expected: cells,
                got: counts.len(),
            });
        }
        Ok(Self { dims, counts })
    }

    pub fn zeros(dims: Vec<usize>) -> Self {
        let cells = dims.iter().product();
        Self {
            dims,
            counts: vec![0; cells],
        }
    }

    /// Accumulate one observation; `feature` holds the leading-axis indices.
    pub fn add(&mut self, feature: &[usize], label: usize) {
        let mut idx = 0;
        for (&f, &d) in feature.iter().zip(&self.dims) {
            idx = idx * d + f;
        }
        idx = idx * self.label_cardinality() + label;
        self.counts[idx] += 1;
    }

    pub fn label_cardinality(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn label_marginal(&self) -> Vec<u64> {
        let ny = self.label_cardinality();
        let mut m = vec![0; ny];
        for (i, &c) in self.counts.iter().enumerate() {
            m[i % ny] += c;
        }
        m
    }

    fn feature_marginal(&self) -> Vec<u64> {
        let ny = self.label_cardinality();
        self.counts.chunks(ny).map(|row| row.iter().sum()).collect()
    }
}

/// Plug-in `I(X;Y) = sum p(x,y) ln(p(x,y) / (p(x) p(y)))` in nats.
pub fn mutual_information(joint: &DiscreteJoint) -> Result<f64> {
    let n = joint.total();
    if n == 0 {
        return Err(domain("mutual information of an empty joint"));
    }
    let n = n as f64;
    let ny = joint.label_cardinality();
    let px = joint.feature_marginal();
    let py = joint.label_marginal();
    let mut mi = 0.0;
    for (i, &c) in joint.counts.iter().enumerate() {
        if c == 0 {
            continue;
        }
        let c = c as f64;
        let (x, y) = (i / ny, i % ny);
        mi += c / n * (c * n / (px[x] as f64 * py[y] as f64)).ln();
    }
    Ok(mi.max(0.0))
}

/// `R = I(X;Y) + I(Z;Y) - I(X,Z;Y)`; negative values mean synergy.
pub fn redundancy(
    joint_xy: &DiscreteJoint,
    joint_zy: &DiscreteJoint,
    joint_xzy: &DiscreteJoint,
) -> Result<f64> {
    let m = joint_xy.label_marginal();
    if joint_zy.label_marginal() != m || joint_xzy.label_marginal() != m {
        return Err(Error::Consistency(format!(
            "label marginals differ: {:?} / {:?} / {:?}",
            m,
            joint_zy.label_marginal(),
            joint_xzy.label_marginal()
        )));
    }
    Ok(
        mutual_information(joint_xy)? + mutual_information(joint_zy)?
            - mutual_information(joint_xzy)?,
    )
}

/// Informativeness, redundancy and complementarity in nats.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CfdStats {
    pub i_t: f64,
    pub i_f: f64,
    pub i_s: f64,
    pub r_tf: f64,
    pub r_fs: f64,
    pub r_st: f64,
    pub c_tfs: f64,
}

impl CfdStats {
    pub fn from_parts(i: [f64; 3], r: [f64; 3]) -> Self {
        Self {
            i_t: i[0],
            i_f: i[1],
            i_s: i[2],
            r_tf: r[0],
            r_fs: r[1],
            r_st: r[2],
            c_tfs: i[0] + i[1] + i[2] - r[0] - r[1] - r[2],
        }
    }
}

/// Scalar projection and equal-frequency bin edges for one modality.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ModalityBinning {
    pub mean: Vec<f64>,
    pub direction: Vec<f64>,
    /// Strictly increasing interior edges; value `v` falls in bin
    /// `#{edges <= v}`.
    pub edges: Vec<f64>,
}

impl ModalityBinning {
    pub fn project(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.mean)
            .zip(&self.direction)
            .map(|((v, m), d)| (v - m) * d)
            .sum()
    }

    pub fn bin(&self, x: &[f64]) -> usize {
        let p = self.project(x);
        self.edges.partition_point(|&e| e <= p)
    }

    pub fn bins(&self) -> usize {
        self.edges.len() + 1
    }
}

/// Binning fitted on real data and reused unchanged for synthetic data.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BinningSpec {
    pub modalities: [ModalityBinning; 3],
}

pub const DEFAULT_BINS: usize = 8;

/// Leading principal direction of the rows by power iteration, sign fixed
/// so the largest-magnitude component is positive.
pub fn top_principal_direction(rows: &[&[f64]], mean: &[f64]) -> Vec<f64> {
    let dim = mean.len();
    let mut r = rng::seeded(0x005e_ed0f_b1a5);
    let mut v: Vec<f64> = (0..dim).map(|_| r.random_range(-1.0..1.0)).collect();
    normalize(&mut v);
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|x| x.iter().zip(mean).map(|(a, b)| a - b).collect())
        .collect();
    for _ in 0..1000 {
        let mut next = vec![0.0; dim];
        for c in &centered {
            let proj: f64 = c.iter().zip(&v).map(|(a, b)| a * b).sum();
            for (n, &ci) in next.iter_mut().zip(c) {
                *n += proj * ci;
            }
        }
        if normalize(&mut next) == 0.0 {
            break;
        }
        let delta: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let flipped: f64 = next
            .iter()
            .zip(&v)
            .map(|(a, b)| (a + b).abs())
            .fold(0.0, f64::max);
        v = next;
        if delta.min(flipped) < 1e-13 {
            break;
        }
    }
    let lead = v
        .iter()
        .copied()
        .fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
    if lead < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
    v
}

fn normalize(v: &mut [f64]) -> f64 {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Interior edges at midpoints between the order statistics that split
/// `values` into `bins` equal-count groups; duplicates are dropped.
pub fn equal_frequency_edges(values: &[f64], bins: usize) -> Vec<f64> {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let mut edges: Vec<f64> = Vec::with_capacity(bins.saturating_sub(1));
    for b in 1..bins {
        let idx = (b * n + bins / 2) / bins;
        if idx == 0 || idx >= n {
            continue;
        }
        let e = 0.5 * (sorted[idx - 1] + sorted[idx]);
        if sorted[idx - 1] < sorted[idx] && edges.last().is_none_or(|&last| e > last) {
            edges.push(e);
        }
    }
    edges
}

/// Fit the projection and bin edges of each modality on real samples.
pub fn fit_binning(real: &[TriModalSample], bins: usize) -> Result<BinningSpec> {
    if bins < 2 {
        return Err(domain("need at least two bins"));
    }
    if real.len() < bins {
        return Err(domain(format!(
            "{} samples cannot fill {bins} equal-frequency bins",
            real.len()
        )));
    }
    let ordered = canonical_order(real);
    let fit = |m: usize| -> Result<ModalityBinning> {
        let rows: Vec<&[f64]> = ordered.iter().map(|s| s.modality(m)).collect();
        let dim = rows[0].len();
        if rows.iter().any(|r| r.len() != dim) {
            return Err(domain("ragged modality features"));
        }
        let mut mean = vec![0.0; dim];
        for r in &rows {
            for (a, b) in mean.iter_mut().zip(r.iter()) {
                *a += b;
            }
        }
        mean.iter_mut().for_each(|a| *a /= rows.len() as f64);
        let direction = top_principal_direction(&rows, &mean);
        let mut b = ModalityBinning {
            mean,
            direction,
            edges: Vec::new(),
        };
        let proj: Vec<f64> = rows.iter().map(|r| b.project(r)).collect();
        b.edges = equal_frequency_edges(&proj, bins);
        Ok(b)
    };
    Ok(BinningSpec {
        modalities: [fit(0)?, fit(1)?, fit(2)?],
    })
}

/// Statistics from already-discretised codes: `codes[i]` are the bin
/// indices of sample `i` for (T, F, S), `cards` the number of bins per
/// modality and `labels[i] < n_labels`.
pub fn cfd_stats_from_codes(
    codes: &[[usize; 3]],
    cards: [usize; 3],
    labels: &[usize],
    n_labels: usize,
) -> Result<CfdStats> {
    if codes.len() != labels.len() {
        return Err(Error::Shape {
            what: "labels",
            expected: codes.len(),
            got: labels.len(),
        });
    }
    let mut present = vec![false; n_labels];
    for &l in labels {
        if l >= n_labels {
            return Err(domain("label out of range"));
        }
        present[l] = true;
    }
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(domain("complementarity needs at least two classes"));
    }
    let single = |m: usize| {
        let mut j = DiscreteJoint::zeros(vec![cards[m], n_labels]);
        for (c, &l) in codes.iter().zip(labels) {
            j.add(&[c[m]], l);
        }
        j
    };
    let pair = |a: usize, b: usize| {
        let mut j = DiscreteJoint::zeros(vec![cards[a], cards[b], n_labels]);
        for (c, &l) in codes.iter().zip(labels) {
            j.add(&[c[a], c[b]], l);
        }
        j
    };
    let singles = [single(0), single(1), single(2)];
    let i = [
        mutual_information(&singles[0])?,
        mutual_information(&singles[1])?,
        mutual_information(&singles[2])?,
    ];
    let r = [
        redundancy(&singles[0], &singles[1], &pair(0, 1))?,
        redundancy(&singles[1], &singles[2], &pair(1, 2))?,
        redundancy(&singles[2], &singles[0], &pair(2, 0))?,
    ];
    Ok(CfdStats::from_parts(i, r))
}

/// Project, bin and summarise a labelled set under a fitted spec.
pub fn cfd_stats(samples: &[TriModalSample], spec: &BinningSpec) -> Result<CfdStats> {
    let max_bins = spec.modalities.iter().map(|m| m.bins()).max().unwrap_or(1);
    if samples.len() < max_bins {
        return Err(domain(format!(
            "{} samples is fewer than the {max_bins} bins",
            samples.len()
        )));
    }
    let codes: Vec<[usize; 3]> = samples
        .iter()
        .map(|s| {
            [
                spec.modalities[0].bin(&s.t),
                spec.modalities[1].bin(&s.f),
                spec.modalities[2].bin(&s.s),
            ]
        })
        .collect();
    let labels: Vec<usize> = samples.iter().map(|s| s.label.index()).collect();
    let cards = [
        spec.modalities[0].bins(),
        spec.modalities[1].bins(),
        spec.modalities[2].bins(),
    ];
    cfd_stats_from_codes(&codes, cards, &labels, 2)
}

/// Batch features for one modality: `batch[b]` is sample `b`'s vector.
pub type FeatureBatch = Vec<Vec<f64>>;

/// Mean-centre across the batch, then unit-normalise each vector (zero
/// vectors stay zero). Returns the normalised vectors and their pre-norms.
fn centre_and_normalise(batch: &[Vec<f64>]) -> (Vec<Vec<f64>>, Vec<f64>) {
    let b = batch.len() as f64;
    let dim = batch.first().map_or(0, |v| v.len());
    let mut mean = vec![0.0; dim];
    for v in batch {
        for (m, x) in mean.iter_mut().zip(v) {
            *m += x / b;
        }
    }
    let mut norms = Vec::with_capacity(batch.len());
    let out = batch
        .iter()
        .map(|v| {
            let mut c: Vec<f64> = v.iter().zip(&mean).map(|(x, m)| x - m).collect();
            norms.push(normalize(&mut c));
            c
        })
        .collect();
    (out, norms)
}

/// `sum_{i != j} <X_i, X_j>^2` where `<X_i, X_j>` is the batch mean of the
/// inner products of centred, unit-normalised feature vectors. Also returns
/// the gradient with respect to every input feature.
pub fn orthogonality_penalty_with_grad(
    features: [&[Vec<f64>]; 3],
) -> Result<(f64, [FeatureBatch; 3])> {
    let b = features[0].len();
    if b == 0 || features.iter().any(|f| f.len() != b) {
        return Err(domain(
            "orthogonality penalty needs equal, non-empty batches",
        ));
    }
    let dim = features[0][0].len();
    if features.iter().any(|f| f.iter().any(|v| v.len() != dim)) {
        return Err(domain(
            "orthogonality penalty needs equal feature dimensions",
        ));
    }
    let normed: Vec<(Vec<Vec<f64>>, Vec<f64>)> =
        features.iter().map(|f| centre_and_normalise(f)).collect();
    let bf = b as f64;
    let mut gram = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            if i == j {
                continue;
            }
            gram[i][j] = (0..b)
                .map(|k| dot(&normed[i].0[k], &normed[j].0[k]))
                .sum::<f64>()
                / bf;
        }
    }
    let mut value = 0.0;
    for (i, row) in gram.iter().enumerate() {
        for (j, g) in row.iter().enumerate() {
            if i != j {
                value += g * g;
            }
        }
    }
    let grads: [FeatureBatch; 3] = core::array::from_fn(|i| {
        let (xs, norms) = &normed[i];
        // d/dxhat_i(k) = sum_{j != i} 4 G_ij xhat_j(k) / B
        let mut centred_grad: Vec<Vec<f64>> = (0..b)
            .map(|k| {
                let mut g = vec![0.0; dim];
                for j in 0..3 {
                    if j == i {
                        continue;
                    }
                    let s = 4.0 * gram[i][j] / bf;
                    for (gd, xj) in g.iter_mut().zip(&normed[j].0[k]) {
                        *gd += s * xj;
                    }
                }
                // through x = c / |c|
                if norms[k] > 0.0 {
                    let radial = dot(&g, &xs[k]);
                    for (gd, x) in g.iter_mut().zip(&xs[k]) {
                        *gd = (*gd - radial * x) / norms[k];
                    }
                } else {
                    g.iter_mut().for_each(|v| *v = 0.0);
                }
                g
            })
            .collect();
        // through c = e - mean(e)
        let mut mean = vec![0.0; dim];
        for g in &centred_grad {
            for (m, v) in mean.iter_mut().zip(g) {
                *m += v / bf;
            }
        }
        for g in centred_grad.iter_mut() {
            for (v, m) in g.iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        centred_grad
    });
    Ok((value, grads))
}

pub fn orthogonality_penalty(features: [&[Vec<f64>]; 3]) -> Result<f64> {
    orthogonality_penalty_with_grad(features).map(|(v, _)| v)
}

/// `|C - C_hat| + lambda_orth * sum_{i != j} <X_i, X_j>^2`.
pub fn cfd_loss(
    real: &CfdStats,
    synth: &CfdStats,
    features: [&[Vec<f64>]; 3],
    lambda_orth: f64,
) -> Result<f64> {
    Ok((real.c_tfs - synth.c_tfs).abs() + lambda_orth * orthogonality_penalty(features)?)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::beat::BeatLabel;
    use alloc::vec;

    fn j2(rows: &[&[u64]]) -> DiscreteJoint {
        let dims = vec![rows.len(), rows[0].len()];
        DiscreteJoint::new(dims, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn mi_examples() {
        let ln2 = core::f64::consts::LN_2;
        assert!((mutual_information(&j2(&[&[1, 0], &[0, 1]])).unwrap() - ln2).abs() < 1e-15);
        assert_eq!(mutual_information(&j2(&[&[1, 1], &[1, 1]])).unwrap(), 0.0);
        // (2/3) ln(4/3) + (1/3) ln(2/3)
        let exact = 2.0 / 3.0 * libm::log(4.0 / 3.0) + 1.0 / 3.0 * libm::log(2.0 / 3.0);
        let mi = mutual_information(&j2(&[&[2, 1], &[1, 2]])).unwrap();
        assert!((mi - exact).abs() < 1e-15);
        assert!((mi - 0.0566).abs() < 1e-4);
    }

    #[test]
    fn empty_joint_rejected() {
        assert!(mutual_information(&DiscreteJoint::zeros(vec![2, 2])).is_err());
        assert!(DiscreteJoint::new(vec![2, 2], vec![1, 2, 3]).is_err());
    }

    #[test]
    fn xor_redundancy_is_minus_ln2() {
        // X, Z uniform bits, Y = X xor Z; one observation per (x, z)
        let mut jxy = DiscreteJoint::zeros(vec![2, 2]);
        let mut jzy = DiscreteJoint::zeros(vec![2, 2]);
        let mut jxzy = DiscreteJoint::zeros(vec![2, 2, 2]);
        for x in 0..2 {
            for z in 0..2 {
                let y = x ^ z;
                jxy.add(&[x], y);
                jzy.add(&[z], y);
                jxzy.add(&[x, z], y);
            }
        }
        let r = redundancy(&jxy, &jzy, &jxzy).unwrap();
        assert!((r + core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn duplicate_and_independent_modalities() {
        let data = [
            (0, 0),
            (1, 1),
            (1, 0),
            (0, 0),
            (1, 1),
            (0, 1),
            (1, 1),
            (0, 0),
        ];
        let mut jxy = DiscreteJoint::zeros(vec![2, 2]);
        let mut jxxy = DiscreteJoint::zeros(vec![2, 2, 2]);
        for &(x, y) in &data {
            jxy.add(&[x], y);
            jxxy.add(&[x, x], y);
        }
        let i = mutual_information(&jxy).unwrap();
        assert!((redundancy(&jxy, &jxy, &jxxy).unwrap() - i).abs() < 1e-15);

        // Z uniform and crossed with every (x, y) cell: independent of both
        let mut jzy = DiscreteJoint::zeros(vec![2, 2]);
        let mut jxzy = DiscreteJoint::zeros(vec![2, 2, 2]);
        for &(x, y) in &data {
            for z in 0..2 {
                jzy.add(&[z], y);
                jxzy.add(&[x, z], y);
            }
        }
        let mut jxy2 = DiscreteJoint::zeros(vec![2, 2]);
        for &(x, y) in &data {
            jxy2.add(&[x], y);
            jxy2.add(&[x], y);
        }
        assert!(redundancy(&jxy2, &jzy, &jxzy).unwrap().abs() < 1e-15);
    }

    #[test]
    fn inconsistent_marginals() {
        let a = j2(&[&[1, 0], &[0, 1]]);
        let b = j2(&[&[2, 0], &[0, 1]]);
        let mut c = DiscreteJoint::zeros(vec![2, 2, 2]);
        c.add(&[0, 0], 0);
        c.add(&[1, 1], 1);
        assert!(matches!(redundancy(&a, &b, &c), Err(Error::Consistency(_))));
    }

    fn scalar_sample(v: f64, label: BeatLabel) -> TriModalSample {
        TriModalSample {
            t: vec![v],
            f: vec![v],
            s: vec![v],
            label,
            fiducials: None,
        }
    }

    #[test]
    fn identical_modalities_have_zero_complementarity() {
        let samples: Vec<TriModalSample> = (0..64)
            .map(|i| {
                let label = if i % 3 == 0 {
                    BeatLabel::StShift
                } else {
                    BeatLabel::Normal
                };
                scalar_sample(
                    (i * 7 % 17) as f64 + if i % 3 == 0 { 3.0 } else { 0.0 },
                    label,
                )
            })
            .collect();
        let spec = fit_binning(&samples, 8).unwrap();
        let st = cfd_stats(&samples, &spec).unwrap();
        assert!(st.i_t > 0.0);
        assert!(st.c_tfs.abs() < 1e-12, "{}", st.c_tfs);
        assert!((st.r_tf - st.i_t).abs() < 1e-12);
    }

    #[test]
    fn single_class_rejected() {
        let samples: Vec<TriModalSample> = (0..16)
            .map(|i| scalar_sample(i as f64, BeatLabel::Normal))
            .collect();
        let spec = fit_binning(&samples, 8).unwrap();
        assert!(matches!(
            cfd_stats(&samples, &spec),
            Err(Error::ParameterDomain(_))
        ));
    }

    #[test]
    fn edges_strictly_increasing() {
        let v: Vec<f64> = (0..100).map(|i| (i / 10) as f64).collect();
        let e = equal_frequency_edges(&v, 8);
        assert!(e.windows(2).all(|p| p[0] < p[1]));
        assert!(equal_frequency_edges(&[1.0; 20], 8).is_empty());
    }

    #[test]
    fn cfd_loss_examples() {
        let real = CfdStats::from_parts([0.5, 0.4, 0.3], [0.1, 0.1, 0.2]);
        assert!((real.c_tfs - 0.8).abs() < 1e-15);
        // orthogonal, centred features: T along e1, F along e2, S along e3
        let feats = |axis: usize| -> Vec<Vec<f64>> {
            (0..4)
                .map(|k| {
                    let mut v = vec![0.0; 3];
                    v[axis] = if k % 2 == 0 { 1.0 } else { -1.0 };
                    v
                })
                .collect()
        };
        let (ft, ff, fs) = (feats(0), feats(1), feats(2));
        assert_eq!(cfd_loss(&real, &real, [&ft, &ff, &fs], 0.1).unwrap(), 0.0);
        let synth = CfdStats {
            c_tfs: 0.65,
            ..real
        };
        let l = cfd_loss(&real, &synth, [&ft, &ff, &fs], 0.0).unwrap();
        assert!((l - 0.15).abs() < 1e-12);
    }

    #[test]
    fn aligned_features_penalised() {
        let f: Vec<Vec<f64>> = (0..6).map(|k| vec![k as f64, 1.0]).collect();
        // all three modalities identical: each <X_i, X_j> = 1, six ordered pairs
        let p = orthogonality_penalty([&f, &f, &f]).unwrap();
        assert!((p - 6.0).abs() < 1e-12);
    }
}
