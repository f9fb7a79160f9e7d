//! Finite-difference verification of reverse-mode gradients.

use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::index::sample;

use crate::error::{check_len, Result};
use crate::rng;

/// Denominator floor of the relative error, so coordinates whose true
/// derivative vanishes are judged on absolute error.
pub const REL_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GradCheckReport {
    pub term: String,
    pub checked: usize,
    pub max_rel_error: f64,
    pub worst_index: Option<usize>,
    /// Set for terms that have no gradient to check.
    pub skipped: bool,
}

impl GradCheckReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.skipped || self.max_rel_error < tol
    }

    /// Report for a term that is not differentiable and is left out.
    pub fn skipped(term: &str) -> Self {
        Self {
            term: term.into(),
            checked: 0,
            max_rel_error: 0.0,
            worst_index: None,
            skipped: true,
        }
    }
}

pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(REL_FLOOR)
}

/// Compare `analytic` with central differences of `loss` on `count`
/// coordinates drawn from `seed` (all of them if `count` covers the vector).
pub fn grad_check<F>(
    term: &str,
    mut loss: F,
    params: &[f64],
    analytic: &[f64],
    count: usize,
    step: f64,
    seed: u64,
) -> Result<GradCheckReport>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    check_len("analytic gradient", params.len(), analytic.len())?;
    let idx: Vec<usize> = if count >= params.len() {
        (0..params.len()).collect()
    } else {
        let mut r = rng::seeded(seed);
        let mut v = sample(&mut r, params.len(), count).into_vec();
        v.sort_unstable();
        v
    };
    let mut p = params.to_vec();
    let mut worst = (0.0f64, None);
    for &i in &idx {
        let orig = p[i];
        p[i] = orig + step;
        let up = loss(&p)?;
        p[i] = orig - step;
        let dn = loss(&p)?;
        p[i] = orig;
        let numeric = (up - dn) / (2.0 * step);
        let e = relative_error(analytic[i], numeric);
        if e > worst.0 || worst.1.is_none() {
            worst = (e, Some(i));
        }
    }
    Ok(GradCheckReport {
        term: term.into(),
        checked: idx.len(),
        max_rel_error: worst.0,
        worst_index: worst.1,
        skipped: false,
    })
}
