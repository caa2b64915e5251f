//! Background driving Lévy processes: the increasing pure-jump subordinators `Z`
//! that feed the variance equation `dV = -λV dt + dZ_{λt}`.
//!
//! Three families are supported. Each owns its cumulant `k(θ) = log E[e^{θ Z₁}]`,
//! its Lévy measure `U(dx)` and the exponential-moment abscissa `ξ₁`.
//!
//! The Lévy densities are the ones consistent with the stated cumulants:
//! `δγ e^{-γx}` for the Γ-OU driver and
//! `δ/(2√(2π)) x^{-3/2} (1 + γ²x) e^{-γ²x/2}` for the IG-OU driver. These are
//! the densities of the drivers, not of the stationary laws of `V`.

use rand::Rng;
use rand_distr::{Distribution, Exp, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{integrate_levy, Tolerance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BdlpModel {
    /// `Z = δ N` with `N` a Poisson process of intensity `γ_N`.
    PoissonToy { jump_size: f64, intensity: f64 },
    /// Driver of the OU process with stationary `Γ(δ, γ)` law.
    GammaOu { shape: f64, rate: f64 },
    /// Driver of the OU process with stationary `IG(δ, γ)` law.
    IgOu { delta: f64, gamma: f64 },
}

/// The Lévy measure `U(dx)` of a driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LevyMeasure {
    /// A single atom: `U = mass · δ_location`.
    Atom { location: f64, mass: f64 },
    /// Absolutely continuous with respect to Lebesgue measure on `(0, ∞)`.
    Density,
}

/// One jump of `t ↦ Z_{λt}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZJump {
    pub time: f64,
    pub size: f64,
    /// `true` for a jump of the compound Poisson part, `false` for an
    /// aggregated subordinator increment attached to a grid point.
    pub compound: bool,
}

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;

impl BdlpModel {
    pub fn validate(&self) -> Result<()> {
        let (a, an, b, bn) = match *self {
            BdlpModel::PoissonToy {
                jump_size,
                intensity,
            } => (jump_size, "jump_size", intensity, "intensity"),
            BdlpModel::GammaOu { shape, rate } => (shape, "shape", rate, "rate"),
            BdlpModel::IgOu { delta, gamma } => (delta, "delta", gamma, "gamma"),
        };
        for (value, name) in [(a, an), (b, bn)] {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be strictly positive",
                });
            }
        }
        Ok(())
    }

    pub fn name(&self) -> &'static str {
        match self {
            BdlpModel::PoissonToy { .. } => "poisson_toy",
            BdlpModel::GammaOu { .. } => "gamma_ou",
            BdlpModel::IgOu { .. } => "ig_ou",
        }
    }

    /// `ξ₁ = sup{ξ ≥ 0 : E[e^{ξ Z₁}] < ∞}`.
    pub fn xi1(&self) -> f64 {
        match *self {
            BdlpModel::PoissonToy { .. } => f64::INFINITY,
            BdlpModel::GammaOu { rate, .. } => rate,
            BdlpModel::IgOu { gamma, .. } => 0.5 * gamma * gamma,
        }
    }

    /// Cumulant `k(θ)`, defined for `θ < ξ₁`.
    pub fn cumulant(&self, theta: f64) -> Result<f64> {
        if !(theta < self.xi1()) {
            return Err(Error::Domain {
                what: "cumulant",
                value: theta,
                constraint: "theta < xi1",
            });
        }
        Ok(match *self {
            BdlpModel::PoissonToy {
                jump_size,
                intensity,
            } => intensity * (jump_size * theta).exp_m1(),
            BdlpModel::GammaOu { shape, rate } => shape * theta / (rate - theta),
            BdlpModel::IgOu { delta, gamma } => {
                delta * theta / (gamma * gamma - 2.0 * theta).sqrt()
            }
        })
    }

    /// Value of `lim_{θ↑ξ₁} k(θ)`; infinite for all three families.
    pub fn cumulant_at_abscissa(&self) -> f64 {
        f64::INFINITY
    }

    /// `ζ = E[Z₁] = k'(0)`.
    pub fn mean_z1(&self) -> f64 {
        match *self {
            BdlpModel::PoissonToy {
                jump_size,
                intensity,
            } => intensity * jump_size,
            BdlpModel::GammaOu { shape, rate } => shape / rate,
            BdlpModel::IgOu { delta, gamma } => delta / gamma,
        }
    }

    /// `Var[Z₁] = k''(0)`.
    pub fn var_z1(&self) -> f64 {
        match *self {
            BdlpModel::PoissonToy {
                jump_size,
                intensity,
            } => intensity * jump_size * jump_size,
            BdlpModel::GammaOu { shape, rate } => 2.0 * shape / (rate * rate),
            BdlpModel::IgOu { delta, gamma } => 2.0 * delta / gamma.powi(3),
        }
    }

    /// Whether `E[e^{c Z₁}] < ∞`.
    pub fn exp_moment_finite(&self, c: f64) -> bool {
        c <= 0.0 || c < self.xi1()
    }

    /// Whether `E[Z₁ e^{c Z₁}] < ∞`; for these families the same set as above.
    pub fn z_exp_moment_finite(&self, c: f64) -> bool {
        self.exp_moment_finite(c)
    }

    pub fn levy_measure(&self) -> LevyMeasure {
        match *self {
            BdlpModel::PoissonToy {
                jump_size,
                intensity,
            } => LevyMeasure::Atom {
                location: jump_size,
                mass: intensity,
            },
            _ => LevyMeasure::Density,
        }
    }

    pub fn is_atomic(&self) -> bool {
        matches!(self.levy_measure(), LevyMeasure::Atom { .. })
    }

    /// Lebesgue density `u(x)` of `U(dx)`. The atomic toy model has none and
    /// returns a model-mismatch error.
    pub fn levy_density(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain {
                what: "levy_density",
                value: x,
                constraint: "x > 0",
            });
        }
        Ok(match *self {
            BdlpModel::PoissonToy { .. } => {
                return Err(Error::ModelMismatch(
                    "the Poisson toy Lévy measure is a single atom",
                ))
            }
            BdlpModel::GammaOu { shape, rate } => shape * rate * (-rate * x).exp(),
            BdlpModel::IgOu { delta, gamma } => {
                let g2 = gamma * gamma;
                delta / (2.0 * SQRT_2PI) * x.powf(-1.5) * (1.0 + g2 * x) * (-0.5 * g2 * x).exp()
            }
        })
    }

    /// `∫ g(x) U(dx)`. Atoms are summed exactly, densities go through
    /// [`integrate_levy`].
    pub fn integrate<G: Fn(f64) -> f64>(&self, g: G, tol: Tolerance) -> Result<f64> {
        match self.levy_measure() {
            LevyMeasure::Atom { location, mass } => Ok(mass * g(location)),
            LevyMeasure::Density => {
                let model = *self;
                integrate_levy(g, move |x| model.levy_density(x).unwrap_or(0.0), tol)
            }
        }
    }

    /// Arrival rate (per unit of `Z`-time) and size law of the compound Poisson part.
    fn compound_rate(&self) -> f64 {
        match *self {
            BdlpModel::PoissonToy { intensity, .. } => intensity,
            BdlpModel::GammaOu { shape, .. } => shape,
            BdlpModel::IgOu { delta, gamma } => 0.5 * delta * gamma,
        }
    }

    fn sample_compound_size<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            BdlpModel::PoissonToy { jump_size, .. } => jump_size,
            BdlpModel::GammaOu { rate, .. } => Exp::new(rate)
                .expect("rate validated positive")
                .sample(rng),
            BdlpModel::IgOu { gamma, .. } => {
                let n: f64 = rng.sample(StandardNormal);
                n * n / (gamma * gamma)
            }
        }
    }

    /// Jumps of the compound Poisson part of `t ↦ Z_{λt}` on `(0, T]`, sorted by time.
    ///
    /// For the IG-OU driver this is only the part with Lévy density
    /// `δγ²/(2√(2π)) x^{-1/2} e^{-γ²x/2}`; the remaining `IG(δ/2, γ)`
    /// subordinator is drawn by [`BdlpModel::subordinator_increment`].
    pub fn sample_compound_jumps<R: Rng + ?Sized>(
        &self,
        lambda: f64,
        horizon: f64,
        rng: &mut R,
    ) -> Vec<ZJump> {
        let mean_count = lambda * self.compound_rate() * horizon;
        let count = if mean_count > 0.0 {
            Poisson::new(mean_count)
                .expect("finite positive mean")
                .sample(rng) as usize
        } else {
            0
        };
        let mut times: Vec<f64> = (0..count)
            .map(|_| {
                let u: f64 = rng.random();
                // (0, T]
                horizon * (1.0 - u)
            })
            .collect();
        // stable sort keeps insertion order on ties
        times.sort_by(|a, b| a.total_cmp(b));
        times
            .into_iter()
            .map(|time| ZJump {
                time,
                size: self.sample_compound_size(rng),
                compound: true,
            })
            .collect()
    }

    /// Increment over a `Z`-clock interval of length `lambda * dt` of the
    /// infinite-activity part of the driver (zero for the compound Poisson families).
    pub fn subordinator_increment<R: Rng + ?Sized>(&self, lambda: f64, dt: f64, rng: &mut R) -> f64 {
        match *self {
            BdlpModel::IgOu { delta, gamma } => {
                let a = 0.5 * delta * lambda * dt;
                sample_inverse_gaussian(a / gamma, a * a, rng)
            }
            _ => 0.0,
        }
    }

    pub fn has_subordinator_part(&self) -> bool {
        matches!(self, BdlpModel::IgOu { .. })
    }

    /// Jumps of `t ↦ Z_{λt}` on `(0, T]`.
    ///
    /// The compound Poisson part is exact. For the IG-OU driver the `IG(δ/2, γ)`
    /// part is discretized on the uniform `n_steps` grid refined by the compound
    /// jump times: each refined interval contributes one increment at its right end,
    /// merged with a compound jump falling on the same point.
    pub fn sample_z_path<R: Rng + ?Sized>(
        &self,
        lambda: f64,
        horizon: f64,
        n_steps: usize,
        rng: &mut R,
    ) -> Vec<ZJump> {
        let compound = self.sample_compound_jumps(lambda, horizon, rng);
        if !self.has_subordinator_part() {
            return compound;
        }
        let grid = refine_grid(horizon, n_steps.max(1), &compound);
        let mut out = Vec::with_capacity(grid.len());
        let mut next = compound.iter().peekable();
        for w in grid.windows(2) {
            let mut size = self.subordinator_increment(lambda, w[1] - w[0], rng);
            let mut is_compound = false;
            while let Some(j) = next.peek() {
                if j.time <= w[1] {
                    size += j.size;
                    is_compound = true;
                    next.next();
                } else {
                    break;
                }
            }
            out.push(ZJump {
                time: w[1],
                size,
                compound: is_compound,
            });
        }
        out
    }
}

/// Uniform grid on `[0, T]` with the jump times inserted.
pub(crate) fn refine_grid(horizon: f64, n_steps: usize, jumps: &[ZJump]) -> Vec<f64> {
    let dt = horizon / n_steps as f64;
    let mut grid = Vec::with_capacity(n_steps + 1 + jumps.len());
    grid.push(0.0);
    let mut k = jumps.iter().peekable();
    for i in 1..=n_steps {
        let t = if i == n_steps { horizon } else { i as f64 * dt };
        while let Some(j) = k.peek() {
            if j.time < t {
                if j.time > *grid.last().unwrap() {
                    grid.push(j.time);
                }
                k.next();
            } else {
                break;
            }
        }
        grid.push(t);
    }
    grid
}

/// Inverse Gaussian draw with the given mean and shape (Michael-Schucany-Haas).
///
/// The root is formed as `μ·4λy/(√(4λy + y²) + y)²` so tiny shapes do not cancel.
pub fn sample_inverse_gaussian<R: Rng + ?Sized>(mean: f64, shape: f64, rng: &mut R) -> f64 {
    if mean <= 0.0 || shape <= 0.0 {
        return 0.0;
    }
    let n: f64 = rng.sample(StandardNormal);
    let y = mean * n * n;
    let s = (4.0 * shape * y + y * y).sqrt();
    let x = if y == 0.0 {
        mean
    } else {
        mean * 4.0 * shape * y / ((s + y) * (s + y))
    };
    let u: f64 = rng.random();
    if u <= mean / (mean + x) {
        x
    } else {
        mean * mean / x
    }
}
