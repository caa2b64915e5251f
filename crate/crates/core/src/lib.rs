//! Equivalent martingale measures for the Barndorff-Nielsen-Shephard
//! stochastic volatility model.
//!
//! Each measure is described by a density process along simulated paths:
//! the exponential and linear Esscher transforms ([`esscher`]), the minimal
//! martingale measure and the no-leverage minimal entropy measure
//! ([`minimal`]), and structure-preserving measures ([`spemm`]). Sufficient
//! existence and martingale conditions live in [`conditions`]; [`mc`] runs
//! the Monte Carlo checks.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::excessive_precision)]

pub mod bdlp;
pub mod conditions;
pub mod cumulants;
pub mod error;
pub mod esscher;
pub mod mc;
pub mod minimal;
pub mod model;
pub mod numerics;
pub mod rng;
pub mod spemm;

pub use conditions::{ConditionReport, Verdict};
pub use bdlp::{BdlpModel, LevyMeasure, ZJump};
pub use cumulants::CumulantContext;
pub use error::{Error, Result};
pub use esscher::{DensityKind, DensityPathReport, ThetaKind, ThetaSolution};
pub use mc::{McOptions, McReport, MeasureSpec, Payoff, PreparedMeasure};
pub use minimal::{FlatSolution, MemmNoLeverage};
pub use model::{BnsParams, BnsPath, Characteristics, JumpDensityTilt};
pub use numerics::Tolerance;
pub use spemm::{JumpTilt, StructureMeasure, TiltedModel};
