//! Tri-domain ECG synthesis core.
//!
//! Everything in this crate is allocation-only (`no_std` + `alloc`): the beat
//! simulator, the time / frequency / time-frequency front end, plug-in
//! information metrics, the complex latent state with its Hermitian
//! interference operator, the desk-scale generator and critic with their
//! hand-written reverse-mode gradients, and the evaluation metrics.
//!
//! File formats, configuration and the command line live in the `qcfd-cli`
//! companion crate.

#![no_std]
// `num_traits::Float` supplies float math here; it reads as unused whenever
// std is linked somewhere in the graph (tests, dev-dependencies).
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod beat;
pub mod dsp;
pub mod error;
pub mod eval;
pub mod gan;
pub mod info;
pub mod latent;
pub mod nn;
pub mod optim;
pub mod rng;

pub use error::{Error, Result};
