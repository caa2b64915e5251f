//! Pointwise rates of the modified Laplace cumulant processes of `X` and `X̃`.

use crate::error::{Error, Result};
use crate::model::BnsParams;
use crate::numerics::Tolerance;

/// Accuracy used for every cumulant quadrature, tight enough that solver
/// residuals stay below `1e-10`.
pub const QUADRATURE_TOL: Tolerance = Tolerance {
    abs_tol: 1e-13,
    rel_tol: 1e-12,
    max_iter: 4000,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CumulantContext {
    pub params: BnsParams,
    pub tolerance: Tolerance,
}

impl CumulantContext {
    pub fn new(params: BnsParams, tolerance: Tolerance) -> Result<Self> {
        params.validate()?;
        tolerance.validate()?;
        Ok(Self { params, tolerance })
    }

    pub fn rho(&self) -> f64 {
        self.params.rho
    }

    /// `k` of the driver.
    pub fn k(&self, theta: f64) -> Result<f64> {
        self.params.bdlp.cumulant(theta)
    }

    /// Left end `θ₀ = ξ₁/ρ` of the domain of `ℓ`; `-∞` without leverage or for
    /// drivers with all exponential moments.
    pub fn theta0(&self) -> f64 {
        let xi1 = self.params.bdlp.xi1();
        if self.rho() == 0.0 || xi1.is_infinite() {
            f64::NEG_INFINITY
        } else {
            xi1 / self.rho()
        }
    }

    /// `ℓ(θ) = k(ρ(θ+1)) - k(ρθ)`, defined for `θ > ξ₁/ρ`.
    pub fn ell(&self, theta: f64) -> Result<f64> {
        let rho = self.rho();
        if rho == 0.0 {
            return Ok(0.0);
        }
        if !(theta > self.theta0()) {
            return Err(Error::Domain {
                what: "ell",
                value: theta,
                constraint: "theta > xi1 / rho",
            });
        }
        Ok(self.k(rho * (theta + 1.0))? - self.k(rho * theta)?)
    }

    /// `ℓ̃(θ) = ∫ e^{θ(e^{ρx}-1)} (e^{ρx}-1) U(dx)`, the derivative of `k̃_ρ`.
    pub fn ell_tilde(&self, theta: f64) -> Result<f64> {
        let rho = self.rho();
        if rho == 0.0 {
            return Ok(0.0);
        }
        self.params.bdlp.integrate(
            |x| {
                let j = (rho * x).exp_m1();
                (theta * j).exp() * j
            },
            QUADRATURE_TOL,
        )
    }

    /// `k̃_ρ(z) = ∫ (e^{z(e^{ρx}-1)} - 1) U(dx)`, the cumulant of the jump part of `X̃`.
    pub fn k_tilde_rho(&self, z: f64) -> Result<f64> {
        let rho = self.rho();
        if rho == 0.0 || z == 0.0 {
            return Ok(0.0);
        }
        self.params
            .bdlp
            .integrate(|x| (z * (rho * x).exp_m1()).exp_m1(), QUADRATURE_TOL)
    }

    /// `(μ+βv)θ + vθ²/2 + λk(ρθ)`.
    pub fn kappa_x(&self, theta: f64, v: f64) -> Result<f64> {
        check_v(v)?;
        let p = &self.params;
        let jump = if p.rho == 0.0 { 0.0 } else { p.lambda * self.k(p.rho * theta)? };
        Ok((p.mu + p.beta * v) * theta + 0.5 * v * theta * theta + jump)
    }

    /// `(μ+β̃v)θ + vθ²/2 + λk̃_ρ(θ)`.
    pub fn kappa_x_tilde(&self, theta: f64, v: f64) -> Result<f64> {
        check_v(v)?;
        let p = &self.params;
        Ok((p.mu + p.beta_tilde() * v) * theta + 0.5 * v * theta * theta + p.lambda * self.k_tilde_rho(theta)?)
    }

    /// `(μ+β̃v) + vθ + λℓ̃(θ)`.
    pub fn d_kappa_x_tilde(&self, theta: f64, v: f64) -> Result<f64> {
        check_v(v)?;
        let p = &self.params;
        Ok(p.mu + p.beta_tilde() * v + v * theta + p.lambda * self.ell_tilde(theta)?)
    }

    /// `f(θ, v) = μ + β̃v + vθ + λℓ(θ)`, whose root in `θ` is the exponential Esscher parameter.
    pub fn sharp_objective(&self, theta: f64, v: f64) -> Result<f64> {
        check_v(v)?;
        let p = &self.params;
        Ok(p.mu + p.beta_tilde() * v + v * theta + p.lambda * self.ell(theta)?)
    }

    /// `f̃(θ, v)`, the same as [`CumulantContext::d_kappa_x_tilde`].
    pub fn star_objective(&self, theta: f64, v: f64) -> Result<f64> {
        self.d_kappa_x_tilde(theta, v)
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
