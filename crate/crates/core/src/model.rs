//! The BNS model: parameters, pathwise construction and semimartingale characteristics.
//!
//! Log returns and variance follow
//!
//! ```text
//! dX_t = (μ + β V_{t-}) dt + √V_{t-} dW_t + ρ dZ_{λt}
//! dV_t = -λ V_{t-} dt + dZ_{λt}
//! ```
//!
//! with `S_t = S₀ e^{X_t}`. Prices are discounted; time is in years.

use std::io::Write;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bdlp::{refine_grid, BdlpModel, ZJump};
use crate::error::{Error, Result};
use crate::numerics::Tolerance;
use crate::spemm::JumpTilt;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BnsParams {
    pub mu: f64,
    pub beta: f64,
    /// Leverage, `ρ ≤ 0`.
    pub rho: f64,
    /// Mean-reversion rate, per year.
    pub lambda: f64,
    pub v0: f64,
    pub s0: f64,
    /// Horizon `T` in years.
    pub horizon: f64,
    pub bdlp: BdlpModel,
}

impl BnsParams {
    pub fn validate(&self) -> Result<()> {
        let finite = [
            ("mu", self.mu),
            ("beta", self.beta),
            ("rho", self.rho),
        ];
        for (name, value) in finite {
            if !value.is_finite() {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be finite",
                });
            }
        }
        if self.rho > 0.0 {
            return Err(Error::InvalidParameter {
                name: "rho",
                value: self.rho,
                constraint: "leverage must satisfy rho <= 0",
            });
        }
        let positive = [
            ("lambda", self.lambda),
            ("v0", self.v0),
            ("s0", self.s0),
            ("horizon", self.horizon),
        ];
        for (name, value) in positive {
            if !(value > 0.0 && value.is_finite()) {
                return Err(Error::InvalidParameter {
                    name,
                    value,
                    constraint: "must be strictly positive",
                });
            }
        }
        self.bdlp.validate()
    }

    /// `β̃ = β + 1/2`, the variance loading of the exponential transform.
    pub fn beta_tilde(&self) -> f64 {
        self.beta + 0.5
    }

    /// `V₀ e^{-λT}`, a pathwise lower bound for `V` on `[0, T]`.
    pub fn variance_floor(&self) -> f64 {
        self.v0 * (-self.lambda * self.horizon).exp()
    }

    pub fn has_leverage(&self) -> bool {
        self.rho != 0.0
    }

    /// Default number of time steps: 252 per year.
    pub fn default_steps(&self) -> usize {
        ((252.0 * self.horizon).ceil() as usize).max(1)
    }
}

/// One simulated trajectory on a grid that contains every jump time of `Z_{λt}`.
///
/// Step `i` runs from `times[i]` to `times[i + 1]`; the variance entering its
/// integrands is the left limit `variance[i]`, and `dz[i]` is the jump of `Z_{λt}`
/// at `times[i + 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct BnsPath {
    pub times: Vec<f64>,
    pub variance: Vec<f64>,
    pub log_return: Vec<f64>,
    pub price: Vec<f64>,
    pub dw: Vec<f64>,
    pub dz: Vec<f64>,
    /// Whether a compound Poisson jump of `Z` sits on grid point `i`.
    pub is_jump: Vec<bool>,
    pub jumps: Vec<ZJump>,
    pub stream: u64,
}

impl BnsPath {
    pub fn n_steps(&self) -> usize {
        self.dw.len()
    }

    pub fn dt(&self, i: usize) -> f64 {
        self.times[i + 1] - self.times[i]
    }

    /// `V_{t-}` at grid point `i`.
    pub fn variance_left(&self, i: usize) -> f64 {
        if i == 0 {
            self.variance[0]
        } else {
            self.variance[i] - self.dz[i - 1]
        }
    }

    /// Increment of `X` over step `i`, jump included.
    pub fn dx(&self, i: usize) -> f64 {
        self.log_return[i + 1] - self.log_return[i]
    }

    pub fn terminal_price(&self) -> f64 {
        *self.price.last().expect("path has at least one point")
    }

    /// `Z_{λt}` at every grid point.
    pub fn z_cumulative(&self) -> Vec<f64> {
        let mut z = Vec::with_capacity(self.times.len());
        z.push(0.0);
        let mut acc = 0.0;
        for dz in &self.dz {
            acc += dz;
            z.push(acc);
        }
        z
    }

    /// The same jumps with the Brownian increments negated.
    pub fn antithetic(&self, params: &BnsParams) -> BnsPath {
        let mut dw = self.dw.iter().map(|w| -w);
        build_path(params, &self.times, &self.dz, &self.is_jump, self.jumps.clone(), self.stream, |_, _| {
            dw.next().expect("one increment per step")
        })
    }

    /// Writes `t,V,X,S,is_jump,jump_size` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, out: W) -> std::io::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "V", "X", "S", "is_jump", "jump_size"])?;
        for i in 0..self.times.len() {
            let jump = if i == 0 { 0.0 } else { self.dz[i - 1] };
            w.write_record([
                fmt_real(self.times[i]),
                fmt_real(self.variance[i]),
                fmt_real(self.log_return[i]),
                fmt_real(self.price[i]),
                u8::from(self.is_jump[i]).to_string(),
                fmt_real(jump),
            ])?;
        }
        w.flush()
    }
}

/// Round-trip safe decimal rendering (17 significant digits).
pub fn fmt_real(x: f64) -> String {
    if x == 0.0 {
        "0".to_string()
    } else if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".to_string()
    } else if x > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

/// Simulates one path: `V` exactly between grid points, the Brownian part of `X`
/// by an Euler step on left limits, jumps `ρΔZ` added exactly.
///
/// Random draws are consumed in a fixed order: the driver path first, then one
/// normal per step.
pub fn simulate_path<R: Rng + ?Sized>(
    params: &BnsParams,
    n_steps: usize,
    stream: u64,
    rng: &mut R,
) -> BnsPath {
    let n_steps = n_steps.max(1);
    let jumps = params
        .bdlp
        .sample_z_path(params.lambda, params.horizon, n_steps, rng);
    let (times, dz, is_jump) = grid_with_jumps(params.horizon, n_steps, &jumps);
    build_path(params, &times, &dz, &is_jump, jumps, stream, |t0, t1| {
        let n: f64 = rng.sample(StandardNormal);
        n * (t1 - t0).sqrt()
    })
}

/// Simulation grid, per-step `Z` increments and compound-jump flags for a jump list.
pub fn grid_with_jumps(horizon: f64, n_steps: usize, jumps: &[ZJump]) -> (Vec<f64>, Vec<f64>, Vec<bool>) {
    let times = refine_grid(horizon, n_steps, jumps);
    let mut dz = vec![0.0; times.len() - 1];
    let mut is_jump = vec![false; times.len()];
    let mut k = 1;
    for j in jumps {
        while k < times.len() - 1 && times[k] < j.time {
            k += 1;
        }
        dz[k - 1] += j.size;
        if j.compound {
            is_jump[k] = true;
        }
    }
    (times, dz, is_jump)
}

/// Assembles a path from a grid, its `Z` increments and a Brownian increment source
/// `brownian(t0, t1)`.
pub fn build_path<B>(
    params: &BnsParams,
    times: &[f64],
    dz: &[f64],
    is_jump: &[bool],
    jumps: Vec<ZJump>,
    stream: u64,
    mut brownian: B,
) -> BnsPath
where
    B: FnMut(f64, f64) -> f64,
{
    let n = times.len() - 1;
    let mut variance = Vec::with_capacity(n + 1);
    let mut log_return = Vec::with_capacity(n + 1);
    let mut price = Vec::with_capacity(n + 1);
    let mut dw = Vec::with_capacity(n);
    variance.push(params.v0);
    log_return.push(0.0);
    price.push(params.s0);
    for i in 0..n {
        let dt = times[i + 1] - times[i];
        let v = variance[i];
        let w = brownian(times[i], times[i + 1]);
        let x = log_return[i] + (params.mu + params.beta * v) * dt + v.sqrt() * w + params.rho * dz[i];
        variance.push(v * (-params.lambda * dt).exp() + dz[i]);
        log_return.push(x);
        price.push(params.s0 * x.exp());
        dw.push(w);
    }
    BnsPath {
        times: times.to_vec(),
        variance,
        log_return,
        price,
        dw,
        dz: dz.to_vec(),
        is_jump: is_jump.to_vec(),
        jumps,
        stream,
    }
}

/// Jumps `e^{ρΔZ} - 1` of the exponential transform `X̃`, one per step.
pub fn exponential_transform_jumps(path: &BnsPath, rho: f64) -> Vec<f64> {
    path.dz.iter().map(|&z| transform_jump(rho, z)).collect()
}

#[inline]
pub fn transform_jump(rho: f64, dz: f64) -> f64 {
    (rho * dz).exp_m1()
}

/// Multiplier applied to the jump compensator `λU_ρ(dx)`, in `X`-jump coordinates.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpDensityTilt {
    Unit,
    /// `e^{θρz}` for a `Z`-jump `z`, i.e. `e^{θx}` in `X` coordinates.
    Exponential { theta: f64 },
    /// `e^{θ(e^x - 1)}`.
    LinearEsscher { theta: f64 },
    /// `1 - θ(e^x - 1)`.
    Minimal { theta: f64 },
    /// `y(x/ρ)` for a time-independent tilt `y` of the driver.
    Structure { tilt: JumpTilt, rho: f64 },
}

impl JumpDensityTilt {
    /// Value at an `X`-jump of size `x` (`x = ρz`).
    pub fn at(&self, x: f64) -> f64 {
        match self {
            JumpDensityTilt::Unit => 1.0,
            JumpDensityTilt::Exponential { theta } => (theta * x).exp(),
            JumpDensityTilt::LinearEsscher { theta } => (theta * x.exp_m1()).exp(),
            JumpDensityTilt::Minimal { theta } => 1.0 - theta * x.exp_m1(),
            JumpDensityTilt::Structure { tilt, rho } => {
                if *rho == 0.0 {
                    1.0
                } else {
                    tilt.eval(x / rho)
                }
            }
        }
    }
}

/// Differential semimartingale characteristics with respect to the zero truncation
/// function: `dB = b dt`, `dC = c dt`, `ν(dt, dx) = tilt(x) · λU_ρ(dx) dt`.
#[derive(Debug, Clone, PartialEq)]
pub struct Characteristics {
    pub drift: f64,
    pub diffusion: f64,
    pub jump_intensity_scale: f64,
    pub tilt: JumpDensityTilt,
}

impl Characteristics {
    /// `b + c/2 + ∫(e^x - 1) tilt(x) λU_ρ(dx)` for characteristics of `X`;
    /// zero exactly when `e^X` has no drift.
    pub fn exponential_drift(&self, params: &BnsParams, tol: Tolerance) -> Result<f64> {
        let rho = params.rho;
        let jump = if rho == 0.0 {
            0.0
        } else {
            self.jump_intensity_scale
                * params.bdlp.integrate(
                    |z| {
                        let x = rho * z;
                        x.exp_m1() * self.tilt.at(x)
                    },
                    tol,
                )?
        };
        Ok(self.drift + 0.5 * self.diffusion + jump)
    }
}

fn check_variance(v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain {
            what: "characteristics",
            value: v,
            constraint: "v > 0",
        })
    }
}

/// Characteristics of `X` at variance level `v`.
pub fn characteristics_x(params: &BnsParams, v: f64) -> Result<Characteristics> {
    check_variance(v)?;
    Ok(Characteristics {
        drift: params.mu + params.beta * v,
        diffusion: v,
        jump_intensity_scale: params.lambda,
        tilt: JumpDensityTilt::Unit,
    })
}

/// Characteristics of `X̃` at variance level `v`; the jump measure is `λŨ_ρ`,
/// the image of `U` under `z ↦ e^{ρz} - 1`.
pub fn characteristics_x_tilde(params: &BnsParams, v: f64) -> Result<Characteristics> {
    check_variance(v)?;
    Ok(Characteristics {
        drift: params.mu + params.beta_tilde() * v,
        diffusion: v,
        jump_intensity_scale: params.lambda,
        tilt: JumpDensityTilt::Unit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::path_rng;

    fn params(bdlp: BdlpModel, rho: f64) -> BnsParams {
        BnsParams {
            mu: 0.05,
            beta: -0.2,
            rho,
            lambda: 1.3,
            v0: 0.8,
            s0: 100.0,
            horizon: 1.0,
            bdlp,
        }
    }

    fn models() -> [BdlpModel; 3] {
        [
            BdlpModel::PoissonToy {
                jump_size: 0.4,
                intensity: 2.0,
            },
            BdlpModel::GammaOu { shape: 1.0, rate: 2.0 },
            BdlpModel::IgOu { delta: 1.0, gamma: 2.0 },
        ]
    }

    #[test]
    fn jump_free_path_is_deterministic_ou() {
        let p = params(
            BdlpModel::PoissonToy {
                jump_size: 1.0,
                intensity: 1e-300,
            },
            -0.5,
        );
        let path = simulate_path(&p, 50, 0, &mut path_rng(1, 0));
        for (t, v) in path.times.iter().zip(&path.variance) {
            let exact = p.v0 * (-p.lambda * t).exp();
            assert!((v - exact).abs() <= 1e-14 * exact);
        }
    }

    #[test]
    fn pathwise_bounds_and_price_identity() {
        for m in models() {
            let p = params(m, -0.7);
            for i in 0..200 {
                let path = simulate_path(&p, 40, i, &mut path_rng(9, i));
                let z = path.z_cumulative();
                for (k, &zk) in z.iter().enumerate() {
                    let floor = p.v0 * (-p.lambda * path.times[k]).exp();
                    let v = path.variance[k];
                    assert!(v >= floor * (1.0 - 1e-12));
                    assert!(v <= (floor + zk) * (1.0 + 1e-12));
                    let s = p.s0 * path.log_return[k].exp();
                    assert_eq!(s, path.price[k]);
                }
            }
        }
    }

    #[test]
    fn no_leverage_means_continuous_returns() {
        for m in models() {
            let p = params(m, 0.0);
            let path = simulate_path(&p, 30, 0, &mut path_rng(2, 0));
            for i in 0..path.n_steps() {
                // with rho = 0 the step increment is the Euler part only
                let v = path.variance[i];
                let euler = (p.mu + p.beta * v) * path.dt(i) + v.sqrt() * path.dw[i];
                assert!((path.dx(i) - euler).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn mean_variance_matches_expectation_ode() {
        let n = 100_000u64;
        for m in models() {
            let p = params(m, -0.5);
            // the IG subordinator part is attached at step ends, so it needs a fine grid
            let steps = if m.has_subordinator_part() { 250 } else { 10 };
            let finals: Vec<f64> = (0..n)
                .map(|i| {
                    let path = simulate_path(&p, steps, i, &mut path_rng(5, i));
                    *path.variance.last().unwrap()
                })
                .collect();
            let mean = finals.iter().sum::<f64>() / n as f64;
            let var = finals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            let decay = (-p.lambda * p.horizon).exp();
            let exact = p.v0 * decay + m.mean_z1() * (1.0 - decay);
            assert!(
                (mean - exact).abs() < 4.0 * (var / n as f64).sqrt(),
                "{m:?}: {mean} vs {exact}"
            );
        }
    }

    #[test]
    fn transform_jump_examples() {
        assert_eq!(transform_jump(-1.0, 0.0), 0.0);
        assert!((transform_jump(-1.0, 2f64.ln()) + 0.5).abs() < 1e-15);
        assert_eq!(transform_jump(0.0, 3.0), 0.0);
        let p = params(models()[1], -0.9);
        let path = simulate_path(&p, 20, 0, &mut path_rng(4, 0));
        for j in exponential_transform_jumps(&path, p.rho) {
            assert!(j > -1.0 && j <= 0.0);
        }
    }

    #[test]
    fn characteristics_examples() {
        let mut p = params(models()[0], -1.0);
        p.mu = 0.0;
        p.beta = 0.0;
        let c = characteristics_x(&p, 1.0).unwrap();
        assert_eq!((c.drift, c.diffusion), (0.0, 1.0));
        p.mu = 1.0;
        p.beta = -0.5;
        let c = characteristics_x_tilde(&p, 2.0).unwrap();
        assert_eq!(c.drift, 1.0);
        assert_eq!(p.beta_tilde() - p.beta, 0.5);
        assert!(characteristics_x(&p, 0.0).is_err());
        assert_eq!(c.tilt.at(-0.3), 1.0);
    }

    #[test]
    fn validation() {
        let mut p = params(models()[0], 0.1);
        assert!(p.validate().is_err());
        p.rho = -0.1;
        assert!(p.validate().is_ok());
        p.v0 = 0.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn euler_refinement_converges_at_first_order() {
        // Brownian motion sampled once on the finest grid (plus bridge values at
        // the jump times) so every resolution sees the same randomness.
        let p = BnsParams {
            mu: 0.1,
            beta: 0.3,
            rho: -0.5,
            lambda: 4.0,
            v0: 0.5,
            s0: 1.0,
            horizon: 1.0,
            bdlp: BdlpModel::GammaOu { shape: 3.0, rate: 2.0 },
        };
        let levels = [8usize, 16, 32, 64];
        let finest = 256usize;
        let n_paths = 400;
        let mut diffs = vec![Vec::new(); levels.len() - 1];
        for pi in 0..n_paths {
            let mut rng = path_rng(77, pi);
            let jumps = p.bdlp.sample_z_path(p.lambda, p.horizon, 1, &mut rng);
            let (fine_times, _, _) = grid_with_jumps(p.horizon, finest, &jumps);
            let mut w = vec![0.0];
            for win in fine_times.windows(2) {
                let n: f64 = rng.sample(StandardNormal);
                w.push(w.last().unwrap() + n * (win[1] - win[0]).sqrt());
            }
            let w_at = |t: f64| {
                let k = fine_times.partition_point(|&s| s < t);
                w[k]
            };
            let terminal: Vec<f64> = levels
                .iter()
                .map(|&n| {
                    let (times, dz, is_jump) = grid_with_jumps(p.horizon, n, &jumps);
                    let path = build_path(&p, &times, &dz, &is_jump, jumps.clone(), 0, |a, b| w_at(b) - w_at(a));
                    *path.log_return.last().unwrap()
                })
                .collect();
            for k in 0..levels.len() - 1 {
                diffs[k].push(terminal[k] - terminal[k + 1]);
            }
        }
        let rms: Vec<f64> = diffs
            .iter()
            .map(|d| (d.iter().map(|x| x * x).sum::<f64>() / d.len() as f64).sqrt())
            .collect();
        for k in 0..rms.len() - 1 {
            let ratio = rms[k] / rms[k + 1];
            assert!((1.5..=3.0).contains(&ratio), "ratio {ratio} from {rms:?}");
        }
    }

    #[test]
    fn csv_has_fixed_header_and_one_row_per_point() {
        let p = params(models()[1], -0.5);
        let path = simulate_path(&p, 5, 0, &mut path_rng(1, 0));
        let mut buf = Vec::new();
        path.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "t,V,X,S,is_jump,jump_size");
        assert_eq!(lines.count(), path.times.len());
        assert_eq!(fmt_real(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
