//! Exponential (`♯`) and linear (`*`) Esscher martingale transforms.
//!
//! Both parameters are functions of the current variance level only: `θ♯(v)`
//! solves `f(θ, v) = μ + β̃v + vθ + λℓ(θ) = 0` and `θ*(v)` solves
//! `f̃(θ, v) = μ + β̃v + vθ + λℓ̃(θ) = 0`.

use std::cell::Cell;

use serde::{Deserialize, Serialize};

use crate::bdlp::BdlpModel;
use crate::cumulants::CumulantContext;
use crate::error::{Error, Result};
use crate::model::{BnsPath, Characteristics, JumpDensityTilt};
use crate::numerics::{find_root_bracketed, lambert_w0, lambert_w0_of_exp, log_grid, MonotoneCubic, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThetaKind {
    Sharp,
    Star,
}

/// Internal stopping rule: much tighter than any user tolerance so residuals
/// end up at the level of rounding.
fn solver_tolerance(tol: Tolerance) -> Tolerance {
    Tolerance {
        abs_tol: tol.abs_tol.min(1e-13),
        rel_tol: 4.0 * f64::EPSILON,
        max_iter: tol.max_iter.max(300),
    }
}

fn check_v(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "variance level",
            value: v,
            constraint: "v > 0",
        })
    }
}

/// Runs Brent on a fallible objective, surfacing the first evaluation error.
fn brent<F>(f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure: Cell<Option<Error>> = Cell::new(None);
    let root = find_root_bracketed(
        |x| match f(x) {
            Ok(y) => y,
            Err(e) => {
                failure.set(Some(e));
                f64::NAN
            }
        },
        lo,
        hi,
        solver_tolerance(tol),
    );
    if let Some(e) = failure.take() {
        return Err(e);
    }
    root
}

/// `-(μ+β̃v)/v`, the root of both objectives without leverage.
fn no_leverage_root(ctx: &CumulantContext, v: f64) -> f64 {
    -(ctx.params.mu + ctx.params.beta_tilde() * v) / v
}

/// `θ♯(v)`.
pub fn solve_theta_sharp(ctx: &CumulantContext, v: f64) -> Result<f64> {
    check_v(v)?;
    if ctx.rho() == 0.0 {
        return Ok(no_leverage_root(ctx, v));
    }
    let f = |t: f64| ctx.sharp_objective(t, v);
    let theta0 = ctx.theta0();
    let lambda = ctx.params.lambda;
    // ℓ ≤ 0 gives f ≤ 0 at the no-leverage root; monotonicity then bounds the root above.
    let a = no_leverage_root(ctx, v);
    let (lo, hi) = if a > theta0 {
        let fa = f(a)?;
        if fa == 0.0 {
            return Ok(a);
        }
        let b = a - lambda * ctx.ell(a)? / v;
        (a, b)
    } else {
        let mut step = 1.0;
        let mut hi = theta0 + step;
        while f(hi)? <= 0.0 {
            step *= 2.0;
            hi = theta0 + step;
            if step > 1e12 {
                return Err(Error::NoRoot(format!("objective stays non-positive at v = {v}")));
            }
        }
        let mut lo = None;
        let mut gap = hi - theta0;
        for _ in 0..80 {
            gap *= 0.5;
            let t = theta0 + gap;
            if t <= theta0 {
                break;
            }
            if f(t)? <= 0.0 {
                lo = Some(t);
                break;
            }
        }
        match lo {
            Some(lo) => (lo, hi),
            None => {
                return Err(Error::NoRoot(format!(
                    "infimum of the objective over its domain is positive at v = {v}"
                )))
            }
        }
    };
    brent(f, lo, hi, ctx.tolerance)
}

/// `θ*(v)`.
pub fn solve_theta_star(ctx: &CumulantContext, v: f64) -> Result<f64> {
    check_v(v)?;
    if ctx.rho() == 0.0 {
        return Ok(no_leverage_root(ctx, v));
    }
    let a = no_leverage_root(ctx, v);
    let b = a - ctx.params.lambda * ctx.ell_tilde(a)? / v;
    solve_theta_star_bracketed(ctx, v, a, b)
}

/// `θ*(v)` from a caller-supplied bracket, widened geometrically until it
/// encloses a sign change.
pub fn solve_theta_star_bracketed(ctx: &CumulantContext, v: f64, lo: f64, hi: f64) -> Result<f64> {
    check_v(v)?;
    let f = |t: f64| ctx.star_objective(t, v);
    let (mut lo, mut hi) = (lo.min(hi), lo.max(hi));
    let mut width = (hi - lo).max(1.0);
    for _ in 0..200 {
        if f(lo)? > 0.0 {
            lo -= width;
        } else if f(hi)? < 0.0 {
            hi += width;
        } else {
            return brent(f, lo, hi, ctx.tolerance);
        }
        width *= 2.0;
    }
    Err(Error::NoConvergence {
        what: "bracket expansion for the linear Esscher parameter",
        iterations: 200,
    })
}

fn poisson_parts(ctx: &CumulantContext) -> Result<(f64, f64)> {
    match ctx.params.bdlp {
        BdlpModel::PoissonToy {
            jump_size,
            intensity,
        } => Ok((jump_size, intensity)),
        _ => Err(Error::ModelMismatch("closed form exists only for the Poisson toy driver")),
    }
}

/// `W0(e^{log_x})` evaluated without overflow.
fn w_of_log(log_x: f64) -> Result<f64> {
    if log_x < 600.0 {
        lambert_w0(log_x.exp())
    } else {
        lambert_w0_of_exp(log_x)
    }
}

/// Lambert-W closed form of `θ♯(v)` for the Poisson toy driver:
///
/// ```text
/// θ♯ = -(μ+β̃v)/v - W(δρλγ(e^{δρ}-1)/v · e^{-δρ(μ+β̃v)/v}) / (δρ)
/// ```
pub fn theta_sharp_closed_form_poisson(ctx: &CumulantContext, v: f64) -> Result<f64> {
    let drift = ctx.params.mu + ctx.params.beta_tilde() * v;
    sharp_closed_form(ctx, v, drift)
}

/// The same display with `β` instead of `β̃` inside the exponent, as it is
/// sometimes printed. Kept to show that this variant does not solve `f = 0`.
pub fn theta_sharp_closed_form_poisson_beta_exponent(ctx: &CumulantContext, v: f64) -> Result<f64> {
    let drift = ctx.params.mu + ctx.params.beta * v;
    sharp_closed_form(ctx, v, drift)
}

fn sharp_closed_form(ctx: &CumulantContext, v: f64, exponent_drift: f64) -> Result<f64> {
    let (delta, gamma) = poisson_parts(ctx)?;
    check_v(v)?;
    let lead = no_leverage_root(ctx, v);
    let dr = delta * ctx.rho();
    if dr == 0.0 {
        return Ok(lead);
    }
    let coef = dr * ctx.params.lambda * gamma * dr.exp_m1() / v;
    let log_arg = coef.ln() - dr * exponent_drift / v;
    Ok(lead - w_of_log(log_arg)? / dr)
}

/// Lambert-W closed form of `θ*(v)` for the Poisson toy driver, with `δ̃ = e^{ρδ} - 1`:
///
/// ```text
/// θ* = -(μ+β̃v)/v - W(λγδ̃²/v · e^{-δ̃(μ+β̃v)/v}) / δ̃
/// ```
pub fn theta_star_closed_form_poisson(ctx: &CumulantContext, v: f64) -> Result<f64> {
    let (delta, gamma) = poisson_parts(ctx)?;
    check_v(v)?;
    let lead = no_leverage_root(ctx, v);
    let dt = (ctx.rho() * delta).exp_m1();
    if dt == 0.0 {
        return Ok(lead);
    }
    let drift = ctx.params.mu + ctx.params.beta_tilde() * v;
    let log_arg = (ctx.params.lambda * gamma * dt * dt / v).ln() - dt * drift / v;
    Ok(lead - w_of_log(log_arg)? / dt)
}

/// Residual of the defining equation at `(θ, v)`.
pub fn residual(ctx: &CumulantContext, kind: ThetaKind, theta: f64, v: f64) -> Result<f64> {
    match kind {
        ThetaKind::Sharp => ctx.sharp_objective(theta, v),
        ThetaKind::Star => ctx.star_objective(theta, v),
    }
}

pub fn solve_theta(ctx: &CumulantContext, kind: ThetaKind, v: f64) -> Result<f64> {
    match kind {
        ThetaKind::Sharp => solve_theta_sharp(ctx, v),
        ThetaKind::Star => solve_theta_star(ctx, v),
    }
}

/// Default number of interpolation nodes.
pub const THETA_NODES: usize = 512;

#[derive(Debug, Clone)]
enum ThetaRepr {
    /// `θ(v) = -(μ+β̃v)/v`.
    NoLeverage,
    Table {
        theta: MonotoneCubic,
        /// `k̃_ρ(θ*(v))` on the same nodes (linear Esscher only).
        k_tilde: Option<MonotoneCubic>,
    },
}

/// `v ↦ θ(v)` for one of the Esscher transforms.
///
/// With leverage the map is tabulated on a log grid of variance levels and
/// interpolated by a monotone cubic in `ln v`; levels off the grid are solved
/// directly.
#[derive(Debug, Clone)]
pub struct ThetaSolution {
    pub kind: ThetaKind,
    /// `θ₀ = ξ₁/ρ` for the exponential transform, `-∞` otherwise.
    pub domain_floor: f64,
    /// Largest `|residual|` over the interpolation nodes.
    pub max_node_residual: f64,
    pub nodes: usize,
    ctx: CumulantContext,
    repr: ThetaRepr,
}

impl ThetaSolution {
    /// Tabulates over `[V₀e^{-λT}, V₀ + 10ζλT]`.
    pub fn new(ctx: &CumulantContext, kind: ThetaKind) -> Result<Self> {
        let (lo, hi) = default_variance_range(ctx);
        Self::on_range(ctx, kind, lo, hi, THETA_NODES)
    }

    pub fn on_range(ctx: &CumulantContext, kind: ThetaKind, v_lo: f64, v_hi: f64, nodes: usize) -> Result<Self> {
        check_v(v_lo)?;
        check_v(v_hi)?;
        let domain_floor = match kind {
            ThetaKind::Sharp => ctx.theta0(),
            ThetaKind::Star => f64::NEG_INFINITY,
        };
        if ctx.rho() == 0.0 {
            return Ok(Self {
                kind,
                domain_floor,
                max_node_residual: 0.0,
                nodes: 0,
                ctx: *ctx,
                repr: ThetaRepr::NoLeverage,
            });
        }
        let nodes = nodes.max(2);
        let vs = log_grid(v_lo, v_hi.max(v_lo * (1.0 + 1e-9)), nodes);
        let mut thetas = Vec::with_capacity(nodes);
        let mut max_res = 0.0f64;
        for &v in &vs {
            let t = solve_theta(ctx, kind, v)?;
            max_res = max_res.max(residual(ctx, kind, t, v)?.abs());
            thetas.push(t);
        }
        let xs: Vec<f64> = vs.iter().map(|v| v.ln()).collect();
        let k_tilde = match kind {
            ThetaKind::Star if !ctx.params.bdlp.is_atomic() => {
                let ks = thetas
                    .iter()
                    .map(|&t| ctx.k_tilde_rho(t))
                    .collect::<Result<Vec<_>>>()?;
                Some(MonotoneCubic::new(xs.clone(), ks)?)
            }
            _ => None,
        };
        Ok(Self {
            kind,
            domain_floor,
            max_node_residual: max_res,
            nodes,
            ctx: *ctx,
            repr: ThetaRepr::Table {
                theta: MonotoneCubic::new(xs, thetas)?,
                k_tilde,
            },
        })
    }

    pub fn context(&self) -> &CumulantContext {
        &self.ctx
    }

    /// `θ(v)`.
    pub fn phi(&self, v: f64) -> Result<f64> {
        check_v(v)?;
        match &self.repr {
            ThetaRepr::NoLeverage => Ok(no_leverage_root(&self.ctx, v)),
            ThetaRepr::Table { theta, .. } => match theta.eval(v.ln()) {
                Some(t) => Ok(t),
                None => solve_theta(&self.ctx, self.kind, v),
            },
        }
    }

    /// Cumulant rate `κ(θ(v), v)` of `X` (exponential) or `X̃` (linear) at the
    /// tabulated parameter.
    pub fn kappa(&self, theta: f64, v: f64) -> Result<f64> {
        match self.kind {
            ThetaKind::Sharp => self.ctx.kappa_x(theta, v),
            ThetaKind::Star => {
                let p = &self.ctx.params;
                let k_tilde = match &self.repr {
                    ThetaRepr::Table { k_tilde: Some(table), .. } => match table.eval(v.ln()) {
                        Some(k) => k,
                        None => self.ctx.k_tilde_rho(theta)?,
                    },
                    _ => self.ctx.k_tilde_rho(theta)?,
                };
                Ok((p.mu + p.beta_tilde() * v) * theta + 0.5 * v * theta * theta + p.lambda * k_tilde)
            }
        }
    }
}

/// `[V₀e^{-λT}, V₀ + 10ζλT]`, the variance range a path visits with overwhelming probability.
pub fn default_variance_range(ctx: &CumulantContext) -> (f64, f64) {
    let p = &ctx.params;
    let lo = p.variance_floor();
    let hi = p.v0 + 10.0 * p.bdlp.mean_z1() * p.lambda * p.horizon;
    (lo, hi.max(lo * 1.01))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityKind {
    Sharp,
    Star,
    Flat,
    Structure,
    MemmNoLeverage,
    Physical,
}

/// Terminal density of one path together with its per-step log increments.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityPathReport {
    pub kind: DensityKind,
    pub log_increments: Vec<f64>,
    pub log_terminal: f64,
    pub terminal: f64,
}

impl DensityPathReport {
    pub(crate) fn from_increments(kind: DensityKind, log_increments: Vec<f64>) -> Self {
        let log_terminal: f64 = log_increments.iter().sum();
        Self {
            kind,
            log_increments,
            log_terminal,
            terminal: log_terminal.exp(),
        }
    }
}

/// Log increment of `G♯` or `G*` over step `i`.
pub(crate) fn esscher_log_increment(theta: &ThetaSolution, path: &BnsPath, i: usize) -> Result<f64> {
    let p = &theta.ctx.params;
    let v = path.variance[i];
    let dt = path.dt(i);
    let t = theta.phi(v)?;
    let dx = match theta.kind {
        ThetaKind::Sharp => path.dx(i),
        ThetaKind::Star => {
            (p.mu + p.beta_tilde() * v) * dt + v.sqrt() * path.dw[i] + (p.rho * path.dz[i]).exp_m1()
        }
    };
    Ok(t * dx - theta.kappa(t, v)? * dt)
}

fn density_path(theta: &ThetaSolution, path: &BnsPath, expected: ThetaKind) -> Result<DensityPathReport> {
    if theta.kind != expected {
        return Err(Error::Precondition(format!(
            "expected a {expected:?} parameter, got {:?}",
            theta.kind
        )));
    }
    let incs = (0..path.n_steps())
        .map(|i| esscher_log_increment(theta, path, i))
        .collect::<Result<Vec<_>>>()?;
    let kind = match expected {
        ThetaKind::Sharp => DensityKind::Sharp,
        ThetaKind::Star => DensityKind::Star,
    };
    Ok(DensityPathReport::from_increments(kind, incs))
}

/// `G♯_T = exp(Σ θ♯(V) ΔX - Σ κ_X(θ♯(V), V) Δt)`.
pub fn density_path_sharp(theta: &ThetaSolution, path: &BnsPath) -> Result<DensityPathReport> {
    density_path(theta, path, ThetaKind::Sharp)
}

/// `G*_T = exp(Σ θ*(V) ΔX̃ - Σ κ_X̃(θ*(V), V) Δt)`.
pub fn density_path_star(theta: &ThetaSolution, path: &BnsPath) -> Result<DensityPathReport> {
    density_path(theta, path, ThetaKind::Star)
}

/// Characteristics of `X` under the transformed measure at `(v, θ)`.
pub fn transformed_characteristics(
    kind: ThetaKind,
    ctx: &CumulantContext,
    v: f64,
    theta: f64,
) -> Result<Characteristics> {
    check_v(v)?;
    let p = &ctx.params;
    let tilt = match kind {
        ThetaKind::Sharp => {
            if p.rho != 0.0 {
                ctx.k(p.rho * theta)?;
            }
            JumpDensityTilt::Exponential { theta }
        }
        ThetaKind::Star => JumpDensityTilt::LinearEsscher { theta },
    };
    Ok(Characteristics {
        drift: p.mu + (p.beta + theta) * v,
        diffusion: v,
        jump_intensity_scale: p.lambda,
        tilt,
    })
}
