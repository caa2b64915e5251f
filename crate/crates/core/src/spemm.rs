//! Structure-preserving martingale measures `Q^y`.
//!
//! Under `Q^y` the driver stays a Lévy process with Lévy measure `y(x)U(dx)`,
//! `W^y` stays a Brownian motion independent of it, and the Brownian drift is
//! `ψ^y = -v^{-1/2}(μ + β̃v + λk^y(ρ))`.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::bdlp::BdlpModel;
use crate::cumulants::{CumulantContext, QUADRATURE_TOL};
use crate::error::{Error, Result};
use crate::esscher::{DensityKind, DensityPathReport};
use crate::model::BnsPath;

/// Time-independent jump tilt `y`, a function of the driver's jump size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum JumpTilt {
    Identity,
    /// `y(x) = e^{θ_z x}`.
    EsscherOnZ { theta_z: f64 },
    /// `ln y` linear between knots, constant beyond the end knots.
    Tabulated { knots: Vec<f64>, values: Vec<f64> },
}

impl JumpTilt {
    pub fn validate(&self) -> Result<()> {
        match self {
            JumpTilt::Identity => Ok(()),
            JumpTilt::EsscherOnZ { theta_z } => {
                if theta_z.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter {
                        name: "theta_z",
                        value: *theta_z,
                        constraint: "must be finite",
                    })
                }
            }
            JumpTilt::Tabulated { knots, values } => {
                if knots.is_empty() || knots.len() != values.len() {
                    return Err(Error::Precondition(
                        "tabulated tilt needs equally many knots and values, at least one".into(),
                    ));
                }
                if knots.windows(2).any(|w| !(w[1] > w[0])) || knots[0] < 0.0 {
                    return Err(Error::Precondition(
                        "tabulated tilt knots must be non-negative and strictly increasing".into(),
                    ));
                }
                if let Some(&bad) = values.iter().find(|y| !(**y > 0.0 && y.is_finite())) {
                    return Err(Error::InvalidParameter {
                        name: "tilt value",
                        value: bad,
                        constraint: "y(x) > 0",
                    });
                }
                Ok(())
            }
        }
    }

    /// `y(x)`.
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            JumpTilt::Identity => 1.0,
            JumpTilt::EsscherOnZ { theta_z } => (theta_z * x).exp(),
            JumpTilt::Tabulated { knots, values } => {
                let n = knots.len();
                if x <= knots[0] {
                    return values[0];
                }
                if x >= knots[n - 1] {
                    return values[n - 1];
                }
                let i = knots.partition_point(|&k| k <= x) - 1;
                let w = (x - knots[i]) / (knots[i + 1] - knots[i]);
                ((1.0 - w) * values[i].ln() + w * values[i + 1].ln()).exp()
            }
        }
    }

    /// Reads `x,y` rows (header required).
    pub fn from_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(reader);
        let mut knots = Vec::new();
        let mut values = Vec::new();
        for (line, record) in rdr.records().enumerate() {
            let record = record.map_err(|e| Error::Precondition(format!("tilt csv: {e}")))?;
            let parse = |k: usize| -> Result<f64> {
                record
                    .get(k)
                    .and_then(|s| s.trim().parse::<f64>().ok())
                    .ok_or_else(|| Error::Precondition(format!("tilt csv: bad number in data row {}", line + 1)))
            };
            knots.push(parse(0)?);
            values.push(parse(1)?);
        }
        let tilt = JumpTilt::Tabulated { knots, values };
        tilt.validate()?;
        Ok(tilt)
    }
}

/// `∫(√y - 1)² U(dx)`; a failed quadrature counts as infinite.
pub fn hellinger_integral(model: &BdlpModel, tilt: &JumpTilt) -> f64 {
    match tilt {
        JumpTilt::Identity => 0.0,
        _ => model
            .integrate(
                |x| {
                    let r = tilt.eval(x).sqrt() - 1.0;
                    r * r
                },
                QUADRATURE_TOL,
            )
            .unwrap_or(f64::INFINITY),
    }
}

/// `k^y(θ) = ∫(e^{θx} - 1) y(x) U(dx)`.
pub fn k_y(ctx: &CumulantContext, tilt: &JumpTilt, theta: f64) -> Result<f64> {
    let model = &ctx.params.bdlp;
    match tilt {
        JumpTilt::Identity => model.cumulant(theta),
        JumpTilt::EsscherOnZ { theta_z } => Ok(model.cumulant(theta + theta_z)? - model.cumulant(*theta_z)?),
        JumpTilt::Tabulated { .. } => model.integrate(|x| (theta * x).exp_m1() * tilt.eval(x), QUADRATURE_TOL),
    }
}

/// `∫(y(x) - 1) U(dx)`, the jump compensator rate of the density.
pub fn tilt_compensator(ctx: &CumulantContext, tilt: &JumpTilt) -> Result<f64> {
    let model = &ctx.params.bdlp;
    match tilt {
        JumpTilt::Identity => Ok(0.0),
        JumpTilt::EsscherOnZ { theta_z } => model.cumulant(*theta_z),
        JumpTilt::Tabulated { .. } => model.integrate(|x| tilt.eval(x) - 1.0, QUADRATURE_TOL),
    }
}

/// `ψ^y(v) = -v^{-1/2}(μ + β̃v + λk^y(ρ))`.
pub fn psi_y(ctx: &CumulantContext, tilt: &JumpTilt, v: f64) -> Result<f64> {
    let k = if ctx.rho() == 0.0 { 0.0 } else { k_y(ctx, tilt, ctx.rho())? };
    psi_from_k(ctx, v, k)
}

fn psi_from_k(ctx: &CumulantContext, v: f64, k_y_rho: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain {
            what: "psi_y",
            value: v,
            constraint: "v > 0",
        });
    }
    let p = &ctx.params;
    Ok(-(p.mu + p.beta_tilde() * v + p.lambda * k_y_rho) / v.sqrt())
}

/// A validated tilt with its path-independent constants precomputed.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureMeasure {
    pub ctx: CumulantContext,
    pub tilt: JumpTilt,
    /// `k^y(ρ)`.
    pub k_y_rho: f64,
    /// `∫(y - 1) U(dx)`.
    pub compensator: f64,
}

impl StructureMeasure {
    /// Rejects tilts that are not positive or whose Hellinger integral is not finite.
    pub fn new(ctx: &CumulantContext, tilt: JumpTilt) -> Result<Self> {
        tilt.validate()?;
        let h = hellinger_integral(&ctx.params.bdlp, &tilt);
        if !h.is_finite() {
            return Err(Error::Divergent(
                "tilt violates the Hellinger integrability condition".into(),
            ));
        }
        let k_y_rho = if ctx.rho() == 0.0 { 0.0 } else { k_y(ctx, &tilt, ctx.rho())? };
        let compensator = tilt_compensator(ctx, &tilt)?;
        Ok(Self {
            ctx: *ctx,
            tilt,
            k_y_rho,
            compensator,
        })
    }

    pub fn psi(&self, v: f64) -> Result<f64> {
        psi_from_k(&self.ctx, v, self.k_y_rho)
    }

    pub(crate) fn log_increment(&self, path: &BnsPath, i: usize) -> Result<f64> {
        let v = path.variance[i];
        let dt = path.dt(i);
        let psi = self.psi(v)?;
        let mut inc = psi * path.dw[i] - 0.5 * psi * psi * dt - self.ctx.params.lambda * self.compensator * dt;
        let dz = path.dz[i];
        if dz > 0.0 && !matches!(self.tilt, JumpTilt::Identity) {
            inc += self.tilt.eval(dz).ln();
        }
        Ok(inc)
    }

    pub fn density_path(&self, path: &BnsPath) -> Result<DensityPathReport> {
        let incs = (0..path.n_steps())
            .map(|i| self.log_increment(path, i))
            .collect::<Result<Vec<_>>>()?;
        Ok(DensityPathReport::from_increments(DensityKind::Structure, incs))
    }
}

/// `G^y_T = E(Ñ^y)_T`: Brownian part `exp(Σψ^yΔW - ½Σ(ψ^y)²Δt)`, jump part
/// `Π y(ΔZ)` compensated by `exp(-λ∫(y-1)U(dx) T)`.
pub fn density_path_y(ctx: &CumulantContext, tilt: &JumpTilt, path: &BnsPath) -> Result<DensityPathReport> {
    StructureMeasure::new(ctx, tilt.clone())?.density_path(path)
}

/// Law of the driver under `Q^y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TiltedModel {
    /// The tilt keeps the driver inside its family.
    Family { model: BdlpModel },
    /// Lévy measure `y(x)U(dx)` without a named family.
    General { base: BdlpModel, tilt: JumpTilt },
}

impl TiltedModel {
    /// Cumulant of the tilted driver, `k^y`.
    pub fn cumulant(&self, theta: f64) -> Result<f64> {
        match self {
            TiltedModel::Family { model } => model.cumulant(theta),
            TiltedModel::General { base, tilt } => match tilt {
                JumpTilt::Identity => base.cumulant(theta),
                JumpTilt::EsscherOnZ { theta_z } => Ok(base.cumulant(theta + theta_z)? - base.cumulant(*theta_z)?),
                JumpTilt::Tabulated { .. } => base.integrate(|x| (theta * x).exp_m1() * tilt.eval(x), QUADRATURE_TOL),
            },
        }
    }

    /// Lévy density `y(x)u(x)`.
    pub fn levy_density(&self, x: f64) -> Result<f64> {
        match self {
            TiltedModel::Family { model } => model.levy_density(x),
            TiltedModel::General { base, tilt } => Ok(tilt.eval(x) * base.levy_density(x)?),
        }
    }
}

/// Describes the `Q^y`-law of the driver.
pub fn tilted_model(ctx: &CumulantContext, tilt: &JumpTilt) -> Result<TiltedModel> {
    tilt.validate()?;
    let base = ctx.params.bdlp;
    Ok(match (base, tilt) {
        (_, JumpTilt::Identity) | (_, JumpTilt::EsscherOnZ { theta_z: 0.0 }) => TiltedModel::Family { model: base },
        (BdlpModel::PoissonToy { jump_size, intensity }, _) => TiltedModel::Family {
            model: BdlpModel::PoissonToy {
                jump_size,
                intensity: intensity * tilt.eval(jump_size),
            },
        },
        (BdlpModel::GammaOu { shape, rate }, JumpTilt::EsscherOnZ { theta_z }) => {
            if !(*theta_z < rate) {
                return Err(Error::Domain {
                    what: "tilted_model",
                    value: *theta_z,
                    constraint: "theta_z < gamma",
                });
            }
            let new_rate = rate - theta_z;
            TiltedModel::Family {
                model: BdlpModel::GammaOu {
                    shape: shape * rate / new_rate,
                    rate: new_rate,
                },
            }
        }
        _ => TiltedModel::General {
            base,
            tilt: tilt.clone(),
        },
    })
}
