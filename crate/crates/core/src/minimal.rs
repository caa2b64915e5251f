//! Minimal martingale measure, mean-variance tradeoff and the no-leverage
//! minimal entropy density.

use rayon::prelude::*;

use crate::cumulants::CumulantContext;
use crate::error::{Error, Result};
use crate::esscher::{DensityKind, DensityPathReport};
use crate::model::{simulate_path, BnsPath};
use crate::numerics::pairwise_sum;
use crate::rng::path_rng;

/// `θ♭(v) = (a + bv)/(c + v)` with `a = μ + λk(ρ)`, `b = β̃`, `c = λ(k(2ρ) - 2k(ρ))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FlatSolution {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda: f64,
    pub k_rho: f64,
}

impl FlatSolution {
    pub fn new(ctx: &CumulantContext) -> Result<Self> {
        let p = &ctx.params;
        let (k_rho, k_2rho) = if p.rho == 0.0 {
            (0.0, 0.0)
        } else {
            (ctx.k(p.rho)?, ctx.k(2.0 * p.rho)?)
        };
        Ok(Self {
            a: p.mu + p.lambda * k_rho,
            b: p.beta_tilde(),
            c: p.lambda * (k_2rho - 2.0 * k_rho),
            lambda: p.lambda,
            k_rho,
        })
    }

    pub fn theta(&self, v: f64) -> f64 {
        (self.a + self.b * v) / (v + self.c)
    }

    /// `max(|b|, |a/c|)`, a bound on `|θ♭|` over `v > 0`; `None` without leverage,
    /// where `c = 0` and `θ♭` is unbounded near `v = 0`.
    pub fn bound(&self) -> Option<f64> {
        if self.c > 0.0 {
            Some(self.b.abs().max((self.a / self.c).abs()))
        } else {
            None
        }
    }
}

/// `θ♭(v)`.
pub fn theta_flat(ctx: &CumulantContext, v: f64) -> Result<f64> {
    if !(v > 0.0 && v.is_finite()) {
        return Err(Error::Domain {
            what: "theta_flat",
            value: v,
            constraint: "v > 0",
        });
    }
    Ok(FlatSolution::new(ctx)?.theta(v))
}

pub(crate) fn flat_log_increment(flat: &FlatSolution, rho: f64, path: &BnsPath, i: usize) -> Result<f64> {
    let v = path.variance[i];
    let dt = path.dt(i);
    let theta = flat.theta(v);
    let psi = -theta * v.sqrt();
    let mut inc = psi * path.dw[i] - 0.5 * psi * psi * dt + theta * flat.lambda * flat.k_rho * dt;
    let dz = path.dz[i];
    if dz > 0.0 && rho != 0.0 {
        let y = 1.0 - theta * (rho * dz).exp_m1();
        if !(y > 0.0) {
            return Err(Error::Positivity {
                factor: y,
                time: path.times[i + 1],
            });
        }
        inc += y.ln();
    }
    Ok(inc)
}

/// `G♭_T = exp(Σψ♭ΔW - ½Σ(ψ♭)²Δt) · Π Y♭(ΔX) · exp(Σθ♭λk(ρ)Δt)` with
/// `ψ♭ = -θ♭√V` and `Y♭(x) = 1 - θ♭(e^x - 1)`.
pub fn density_path_flat(ctx: &CumulantContext, path: &BnsPath) -> Result<DensityPathReport> {
    let flat = FlatSolution::new(ctx)?;
    let incs = (0..path.n_steps())
        .map(|i| flat_log_increment(&flat, ctx.rho(), path, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(DensityPathReport::from_increments(DensityKind::Flat, incs))
}

/// Terminal mean-variance tradeoff `K_T = Σ (a + bV)²/(V + c) Δt`.
pub fn mvt_process(ctx: &CumulantContext, path: &BnsPath) -> Result<f64> {
    let flat = FlatSolution::new(ctx)?;
    Ok((0..path.n_steps())
        .map(|i| {
            let v = path.variance[i];
            let num = flat.a + flat.b * v;
            num * num / (v + flat.c) * path.dt(i)
        })
        .sum())
}

/// Seed offset separating the normalizing batch from the priced paths.
const DENOMINATOR_SEED_OFFSET: u64 = 0x9e37_79b9_7f4a_7c15;

/// Minimal entropy density without leverage:
///
/// ```text
/// exp(-Σ h ΔW - Σ h² Δt) / E[exp(-½ Σ h² Δt)],   h = (μ + β̃V)/√V
/// ```
///
/// The normalizer is estimated once on an independent batch of variance paths.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MemmNoLeverage {
    pub ctx: CumulantContext,
    pub denominator: f64,
    pub denominator_std_error: f64,
    pub batch_size: u64,
}

impl MemmNoLeverage {
    pub fn estimate(ctx: &CumulantContext, batch_size: u64, n_steps: usize, seed: u64) -> Result<Self> {
        if ctx.rho() != 0.0 {
            return Err(Error::Precondition(
                "the minimal entropy density is available only for rho = 0".into(),
            ));
        }
        if batch_size < 2 {
            return Err(Error::Precondition("normalizing batch needs at least two paths".into()));
        }
        let seed = seed.wrapping_add(DENOMINATOR_SEED_OFFSET);
        let params = ctx.params;
        let values: Vec<f64> = (0..batch_size)
            .into_par_iter()
            .map(|i| {
                let path = simulate_path(&params, n_steps, i, &mut path_rng(seed, i));
                (-0.5 * Self::h_square_integral(ctx, &path)).exp()
            })
            .collect();
        let n = values.len() as f64;
        let mean = pairwise_sum(&values) / n;
        let dev: Vec<f64> = values.iter().map(|x| (x - mean).powi(2)).collect();
        let var = pairwise_sum(&dev) / (n - 1.0);
        Ok(Self {
            ctx: *ctx,
            denominator: mean,
            denominator_std_error: (var / n).sqrt(),
            batch_size,
        })
    }

    fn h(ctx: &CumulantContext, v: f64) -> f64 {
        (ctx.params.mu + ctx.params.beta_tilde() * v) / v.sqrt()
    }

    fn h_square_integral(ctx: &CumulantContext, path: &BnsPath) -> f64 {
        (0..path.n_steps())
            .map(|i| {
                let h = Self::h(ctx, path.variance[i]);
                h * h * path.dt(i)
            })
            .sum()
    }

    /// `ln` of the unnormalized numerator.
    pub fn log_numerator(&self, path: &BnsPath) -> f64 {
        (0..path.n_steps())
            .map(|i| {
                let h = Self::h(&self.ctx, path.variance[i]);
                -h * path.dw[i] - h * h * path.dt(i)
            })
            .sum()
    }

    pub fn density_path(&self, path: &BnsPath) -> DensityPathReport {
        let mut incs: Vec<f64> = (0..path.n_steps())
            .map(|i| {
                let h = Self::h(&self.ctx, path.variance[i]);
                -h * path.dw[i] - h * h * path.dt(i)
            })
            .collect();
        incs.push(-self.denominator.ln());
        DensityPathReport::from_increments(DensityKind::MemmNoLeverage, incs)
    }
}

/// Normalized minimal entropy densities for a set of paths.
pub fn memm_no_leverage_density(
    ctx: &CumulantContext,
    paths: &[BnsPath],
    batch_size: u64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n_steps = paths.first().map_or(1, |p| p.n_steps());
    let memm = MemmNoLeverage::estimate(ctx, batch_size, n_steps, seed)?;
    Ok(paths.iter().map(|p| memm.density_path(p).terminal).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bdlp::BdlpModel;
    use crate::model::{build_path, BnsParams};
    use crate::numerics::Tolerance;

    fn ctx(bdlp: BdlpModel, rho: f64, mu: f64, beta: f64) -> CumulantContext {
        CumulantContext::new(
            BnsParams {
                mu,
                beta,
                rho,
                lambda: 1.0,
                v0: 1.0,
                s0: 100.0,
                horizon: 1.0,
                bdlp,
            },
            Tolerance::default(),
        )
        .unwrap()
    }

    const POISSON: BdlpModel = BdlpModel::PoissonToy {
        jump_size: 1.0,
        intensity: 1.0,
    };
    const GAMMA: BdlpModel = BdlpModel::GammaOu { shape: 1.0, rate: 2.0 };

    #[test]
    fn theta_flat_examples() {
        assert_eq!(theta_flat(&ctx(GAMMA, 0.0, 0.0, -0.5), 1.3).unwrap(), 0.0);
        let c = ctx(GAMMA, 0.0, 0.2, 0.1);
        for v in [0.2, 1.0, 3.0] {
            let sharp = crate::esscher::solve_theta_sharp(&c, v).unwrap();
            assert!((theta_flat(&c, v).unwrap() + sharp).abs() < 1e-15);
        }
        let c = ctx(POISSON, -1.0, 0.0, 0.0);
        let e1 = (-1f64).exp();
        let e2 = (-2f64).exp();
        let oracle = (e1 - 1.0 + 0.5) / (1.0 + (e2 - 2.0 * e1 + 1.0));
        assert!((theta_flat(&c, 1.0).unwrap() - oracle).abs() < 1e-15);
        let sharp = crate::esscher::solve_theta_sharp(&c, 1.0).unwrap();
        let star = crate::esscher::solve_theta_star(&c, 1.0).unwrap();
        assert!((oracle - sharp).abs() > 1e-3 && (oracle - star).abs() > 1e-3);
    }

    #[test]
    fn bound_and_denominator() {
        for m in [POISSON, GAMMA, BdlpModel::IgOu { delta: 1.0, gamma: 2.0 }] {
            for rho in [-0.1, -1.0, -3.0] {
                let c = ctx(m, rho, 0.3, -0.9);
                let f = FlatSolution::new(&c).unwrap();
                assert!(f.c > 0.0);
                let k0 = f.bound().unwrap();
                for v in crate::numerics::log_grid(1e-6, 1e6, 200) {
                    assert!(f.theta(v).abs() <= k0 * (1.0 + 1e-12));
                }
            }
        }
        assert!(FlatSolution::new(&ctx(GAMMA, 0.0, 0.1, 0.0)).unwrap().bound().is_none());
    }

    #[test]
    fn trivial_density_and_tradeoff() {
        let c = ctx(GAMMA, 0.0, 0.0, -0.5);
        let path = simulate_path(&c.params, 40, 0, &mut path_rng(2, 0));
        assert_eq!(density_path_flat(&c, &path).unwrap().terminal, 1.0);
        assert_eq!(mvt_process(&c, &path).unwrap(), 0.0);
    }

    #[test]
    fn tradeoff_on_jump_free_path_matches_integral() {
        let c = ctx(GAMMA, -0.5, 0.3, 0.2);
        let p = c.params;
        let n = 4000;
        let times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
        let path = build_path(&p, &times, &vec![0.0; n], &vec![false; n + 1], Vec::new(), 0, |_, _| 0.0);
        let f = FlatSolution::new(&c).unwrap();
        // trapezoid-free oracle: composite Simpson on the exact variance curve
        let g = |t: f64| {
            let v = p.v0 * (-p.lambda * t).exp();
            (f.a + f.b * v).powi(2) / (v + f.c)
        };
        let m = 2000;
        let h = 1.0 / m as f64;
        let simpson = (0..m)
            .map(|k| {
                let t = k as f64 * h;
                h / 6.0 * (g(t) + 4.0 * g(t + h / 2.0) + g(t + h))
            })
            .sum::<f64>();
        let riemann = mvt_process(&c, &path).unwrap();
        assert!((riemann - simpson).abs() < 1e-3 * simpson.abs());
        let other = simulate_path(&p, 40, 1, &mut path_rng(5, 1));
        let again = simulate_path(&p, 40, 2, &mut path_rng(5, 2));
        assert_ne!(mvt_process(&c, &other).unwrap(), mvt_process(&c, &again).unwrap());
    }

    #[test]
    fn positivity_violation_is_reported() {
        // β far below -3/2 drives θ♭ large and negative → Y♭ < 0 for big jumps
        let c = ctx(
            BdlpModel::PoissonToy {
                jump_size: 5.0,
                intensity: 5.0,
            },
            -1.0,
            0.0,
            -50.0,
        );
        let mut hit = false;
        for i in 0..50 {
            let path = simulate_path(&c.params, 10, i, &mut path_rng(3, i));
            if path.dz.iter().any(|&z| z > 0.0) {
                assert!(matches!(density_path_flat(&c, &path), Err(Error::Positivity { .. })));
                hit = true;
            }
        }
        assert!(hit);
    }

    #[test]
    fn memm_requires_no_leverage_and_is_trivial_when_drift_vanishes() {
        assert!(MemmNoLeverage::estimate(&ctx(GAMMA, -1.0, 0.0, 0.0), 10, 5, 1).is_err());
        let c = ctx(GAMMA, 0.0, 0.0, -0.5);
        let paths: Vec<BnsPath> = (0..5)
            .map(|i| simulate_path(&c.params, 20, i, &mut path_rng(4, i)))
            .collect();
        for d in memm_no_leverage_density(&c, &paths, 100, 4).unwrap() {
            assert_eq!(d, 1.0);
        }
    }
}
