//! Parallel Monte Carlo harness.
//!
//! Path `i` always draws from stream `i` of the generator keyed by the seed,
//! per-path values are collected in index order and reduced by pairwise
//! summation, so results do not depend on the number of workers.

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::conditions::{self, ConditionReport};
use crate::cumulants::CumulantContext;
use crate::error::{Error, Result};
use crate::esscher::{esscher_log_increment, solve_theta_sharp, solve_theta_star, ThetaKind, ThetaSolution};
use crate::minimal::{flat_log_increment, FlatSolution, MemmNoLeverage};
use crate::model::{simulate_path, BnsPath};
use crate::numerics::pairwise_sum;
use crate::rng::path_rng;
use crate::spemm::{JumpTilt, StructureMeasure};

/// Which equivalent measure to simulate under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MeasureSpec {
    /// Exponential Esscher transform `P♯`.
    ExpEsscher,
    /// Linear Esscher transform `P*`.
    LinEsscher,
    /// Minimal martingale measure `P♭`.
    Minimal,
    /// Structure-preserving measure `Q^y`.
    StructurePreserving { tilt: JumpTilt },
    /// Minimal entropy measure without leverage `P^e`.
    MemmNoLeverage,
    /// The physical measure itself (`G ≡ 1`); not a martingale measure.
    Physical,
}

impl MeasureSpec {
    pub fn label(&self) -> String {
        match self {
            MeasureSpec::ExpEsscher => "exp_esscher".into(),
            MeasureSpec::LinEsscher => "lin_esscher".into(),
            MeasureSpec::Minimal => "minimal".into(),
            MeasureSpec::StructurePreserving { tilt } => match tilt {
                JumpTilt::Identity => "structure_identity".into(),
                JumpTilt::EsscherOnZ { theta_z } => format!("structure_esscher_z({theta_z})"),
                JumpTilt::Tabulated { .. } => "structure_tabulated".into(),
            },
            MeasureSpec::MemmNoLeverage => "memm_no_leverage".into(),
            MeasureSpec::Physical => "physical".into(),
        }
    }
}

/// Sufficient conditions attached to a measure.
pub fn measure_conditions(ctx: &CumulantContext, spec: &MeasureSpec) -> Result<Vec<ConditionReport>> {
    Ok(match spec {
        MeasureSpec::ExpEsscher => vec![conditions::existence_sharp(ctx)?, conditions::martingale_sharp(ctx)?],
        MeasureSpec::LinEsscher => vec![conditions::existence_star(ctx)?, conditions::martingale_star(ctx)?],
        MeasureSpec::Minimal => vec![conditions::positivity_flat(ctx)?, conditions::martingale_flat(ctx)?],
        MeasureSpec::StructurePreserving { tilt } => vec![conditions::structure_preserving(ctx, tilt)?],
        MeasureSpec::MemmNoLeverage => vec![conditions::memm_no_leverage(ctx)?],
        MeasureSpec::Physical => Vec::new(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McOptions {
    pub n_paths: u64,
    pub n_steps: usize,
    pub seed: u64,
    /// Worker threads; 0 uses the global pool.
    pub workers: usize,
    /// Pair every path with its Brownian reflection.
    pub antithetic: bool,
    /// Size of the independent batch normalizing the minimal entropy density.
    pub memm_batch: u64,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            n_paths: 100_000,
            n_steps: 252,
            seed: 1,
            workers: 0,
            antithetic: false,
            memm_batch: 100_000,
        }
    }
}

/// Result of one Monte Carlo estimate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McReport {
    pub estimate: f64,
    pub std_error: f64,
    pub n_paths: u64,
    pub seed: u64,
    /// Seconds; left out of serialized output so files stay reproducible.
    #[serde(skip)]
    pub wall_time: f64,
}

impl McReport {
    /// `|estimate - target| / std_error`, infinite when the error is zero and the target is missed.
    pub fn z_score(&self, target: f64) -> f64 {
        let d = (self.estimate - target).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.std_error
        }
    }

    pub fn within(&self, target: f64, n_se: f64) -> bool {
        self.z_score(target) <= n_se
    }
}

/// A measure with its path-independent work done.
#[derive(Debug, Clone)]
pub enum PreparedMeasure {
    Sharp(ThetaSolution),
    Star(ThetaSolution),
    Flat { flat: FlatSolution, rho: f64 },
    Structure(StructureMeasure),
    Memm(MemmNoLeverage),
    Physical,
}

impl PreparedMeasure {
    pub fn new(ctx: &CumulantContext, spec: &MeasureSpec, opts: &McOptions) -> Result<Self> {
        Ok(match spec {
            MeasureSpec::ExpEsscher => PreparedMeasure::Sharp(ThetaSolution::new(ctx, ThetaKind::Sharp)?),
            MeasureSpec::LinEsscher => PreparedMeasure::Star(ThetaSolution::new(ctx, ThetaKind::Star)?),
            MeasureSpec::Minimal => PreparedMeasure::Flat {
                flat: FlatSolution::new(ctx)?,
                rho: ctx.rho(),
            },
            MeasureSpec::StructurePreserving { tilt } => {
                PreparedMeasure::Structure(StructureMeasure::new(ctx, tilt.clone())?)
            }
            MeasureSpec::MemmNoLeverage => {
                PreparedMeasure::Memm(MemmNoLeverage::estimate(ctx, opts.memm_batch, opts.n_steps, opts.seed)?)
            }
            MeasureSpec::Physical => PreparedMeasure::Physical,
        })
    }

    /// `ln G_T` along a path.
    pub fn log_density(&self, path: &BnsPath) -> Result<f64> {
        let n = path.n_steps();
        let mut acc = 0.0;
        match self {
            PreparedMeasure::Sharp(theta) | PreparedMeasure::Star(theta) => {
                for i in 0..n {
                    acc += esscher_log_increment(theta, path, i)?;
                }
            }
            PreparedMeasure::Flat { flat, rho } => {
                for i in 0..n {
                    acc += flat_log_increment(flat, *rho, path, i)?;
                }
            }
            PreparedMeasure::Structure(m) => {
                for i in 0..n {
                    acc += m.log_increment(path, i)?;
                }
            }
            PreparedMeasure::Memm(m) => acc = m.log_numerator(path) - m.denominator.ln(),
            PreparedMeasure::Physical => {}
        }
        Ok(acc)
    }

    pub fn density(&self, path: &BnsPath) -> Result<f64> {
        Ok(self.log_density(path)?.exp())
    }
}

fn with_pool<T: Send>(workers: usize, job: impl FnOnce() -> T + Send) -> Result<T> {
    if workers == 0 {
        return Ok(job());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Precondition(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(job))
}

/// Simulates `n_paths` paths and evaluates `f(path, G_T)` on each, returning
/// one report per output component.
pub fn mc_estimate<F>(
    ctx: &CumulantContext,
    spec: &MeasureSpec,
    opts: &McOptions,
    n_outputs: usize,
    f: F,
) -> Result<Vec<McReport>>
where
    F: Fn(&BnsPath, f64) -> Vec<f64> + Sync,
{
    if opts.n_paths < 2 {
        return Err(Error::Precondition("at least two paths are needed for a standard error".into()));
    }
    let start = Instant::now();
    let params = ctx.params;
    let samples: Vec<Vec<f64>> = with_pool(opts.workers, || {
        let measure = PreparedMeasure::new(ctx, spec, opts)?;
        (0..opts.n_paths)
            .into_par_iter()
            .map(|i| -> Result<Vec<f64>> {
                let path = simulate_path(&params, opts.n_steps, i, &mut path_rng(opts.seed, i));
                let mut out = f(&path, measure.density(&path)?);
                if opts.antithetic {
                    let mirror = path.antithetic(&params);
                    let other = f(&mirror, measure.density(&mirror)?);
                    for (a, b) in out.iter_mut().zip(other) {
                        *a = 0.5 * (*a + b);
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let wall_time = start.elapsed().as_secs_f64();
    let n = samples.len() as f64;
    Ok((0..n_outputs)
        .map(|k| {
            let column: Vec<f64> = samples.iter().map(|s| s[k]).collect();
            let mean = pairwise_sum(&column) / n;
            let sq: Vec<f64> = column.iter().map(|x| (x - mean) * (x - mean)).collect();
            let var = pairwise_sum(&sq) / (n - 1.0);
            McReport {
                estimate: mean,
                std_error: (var / n).sqrt(),
                n_paths: opts.n_paths,
                seed: opts.seed,
                wall_time,
            }
        })
        .collect())
}

/// `E[G_T]`.
pub fn expect_density(ctx: &CumulantContext, spec: &MeasureSpec, opts: &McOptions) -> Result<McReport> {
    Ok(mc_estimate(ctx, spec, opts, 1, |_, g| vec![g])?.remove(0))
}

/// `E[G_T S_T] / S₀`.
pub fn check_martingale(ctx: &CumulantContext, spec: &MeasureSpec, opts: &McOptions) -> Result<McReport> {
    let s0 = ctx.params.s0;
    Ok(mc_estimate(ctx, spec, opts, 1, |p, g| vec![g * p.terminal_price() / s0])?.remove(0))
}

/// Both normalization checks on the same paths: `[E[G_T], E[G_T S_T]/S₀]`.
pub fn verify_measure(ctx: &CumulantContext, spec: &MeasureSpec, opts: &McOptions) -> Result<(McReport, McReport)> {
    let s0 = ctx.params.s0;
    let mut r = mc_estimate(ctx, spec, opts, 2, |p, g| vec![g, g * p.terminal_price() / s0])?;
    let m = r.remove(1);
    Ok((r.remove(0), m))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Payoff {
    Call,
    Put,
}

impl Payoff {
    pub fn value(&self, s: f64, strike: f64) -> f64 {
        match self {
            Payoff::Call => (s - strike).max(0.0),
            Payoff::Put => (strike - s).max(0.0),
        }
    }
}

/// `E[G_T · payoff(S_T)]` in discounted units.
pub fn price_european(
    ctx: &CumulantContext,
    spec: &MeasureSpec,
    payoff: Payoff,
    strike: f64,
    opts: &McOptions,
) -> Result<McReport> {
    if !(strike > 0.0 && strike.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "strike",
            value: strike,
            constraint: "must be strictly positive",
        });
    }
    Ok(mc_estimate(ctx, spec, opts, 1, |p, g| vec![g * payoff.value(p.terminal_price(), strike)])?.remove(0))
}

/// One variance level of the comparison table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub v: f64,
    pub theta_sharp: f64,
    pub theta_star: f64,
    /// Raw `θ♭`; it enters the Brownian tilt with the opposite sign.
    pub theta_flat: f64,
    /// `|θ♯ - θ*|`.
    pub gap_sharp_star: f64,
    /// `|θ♯ + θ♭|`.
    pub gap_sharp_flat: f64,
    /// `|θ* + θ♭|`.
    pub gap_star_flat: f64,
    /// Brownian drift `ψ(v)` per requested measure.
    pub psi: Vec<f64>,
    /// Jump tilt at each of [`ComparisonTable::jump_points`], per requested measure.
    pub jump_tilt: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub measures: Vec<String>,
    /// Quartiles of the compound Poisson jump-size law of the driver.
    pub jump_points: Vec<f64>,
    pub rows: Vec<ComparisonRow>,
    pub sup_gap_sharp_star: f64,
    pub sup_gap_sharp_flat: f64,
    pub sup_gap_star_flat: f64,
}

/// Quartiles of the finite-activity jump-size law.
fn jump_quartiles(ctx: &CumulantContext) -> Vec<f64> {
    use crate::bdlp::BdlpModel;
    let qs = [0.25, 0.5, 0.75];
    match ctx.params.bdlp {
        BdlpModel::PoissonToy { jump_size, .. } => vec![jump_size],
        BdlpModel::GammaOu { rate, .. } => qs.iter().map(|q: &f64| -(-q).ln_1p() / rate).collect(),
        BdlpModel::IgOu { gamma, .. } => {
            // squared standard normal quartiles over γ²
            let z = [0.318_639_363_964_375_4, 0.674_489_750_196_081_7, 1.150_349_380_376_008_3];
            z.iter().map(|z| z * z / (gamma * gamma)).collect()
        }
    }
}

/// Per-level parameters, drifts and jump tilts of several measures side by side.
pub fn compare_measures(ctx: &CumulantContext, v_grid: &[f64], measures: &[MeasureSpec]) -> Result<ComparisonTable> {
    let labels: Vec<String> = measures.iter().map(|m| m.label()).collect();
    let points = jump_quartiles(ctx);
    if measures.is_empty() {
        return Ok(ComparisonTable {
            measures: labels,
            jump_points: points,
            rows: Vec::new(),
            sup_gap_sharp_star: 0.0,
            sup_gap_sharp_flat: 0.0,
            sup_gap_star_flat: 0.0,
        });
    }
    let flat = FlatSolution::new(ctx)?;
    let structures: Vec<Option<StructureMeasure>> = measures
        .iter()
        .map(|m| match m {
            MeasureSpec::StructurePreserving { tilt } => StructureMeasure::new(ctx, tilt.clone()).map(Some),
            _ => Ok(None),
        })
        .collect::<Result<_>>()?;
    let p = &ctx.params;
    let rho = p.rho;
    let mut rows = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        let ts = solve_theta_sharp(ctx, v)?;
        let tst = solve_theta_star(ctx, v)?;
        let tf = flat.theta(v);
        let sv = v.sqrt();
        let mut psi = Vec::with_capacity(measures.len());
        let mut jump_tilt = Vec::with_capacity(measures.len());
        for (m, s) in measures.iter().zip(&structures) {
            let (ps, tilt): (f64, Box<dyn Fn(f64) -> f64>) = match m {
                MeasureSpec::ExpEsscher => (ts * sv, Box::new(move |z: f64| (ts * rho * z).exp())),
                MeasureSpec::LinEsscher => (tst * sv, Box::new(move |z: f64| (tst * (rho * z).exp_m1()).exp())),
                MeasureSpec::Minimal => (-tf * sv, Box::new(move |z: f64| 1.0 - tf * (rho * z).exp_m1())),
                MeasureSpec::StructurePreserving { tilt } => {
                    let s = s.as_ref().expect("prepared above");
                    let tilt = tilt.clone();
                    (s.psi(v)?, Box::new(move |z: f64| tilt.eval(z)))
                }
                MeasureSpec::MemmNoLeverage => (-(p.mu + p.beta_tilde() * v) / sv, Box::new(|_| 1.0)),
                MeasureSpec::Physical => (0.0, Box::new(|_| 1.0)),
            };
            psi.push(ps);
            jump_tilt.push(points.iter().map(|&z| tilt(z)).collect());
        }
        rows.push(ComparisonRow {
            v,
            theta_sharp: ts,
            theta_star: tst,
            theta_flat: tf,
            gap_sharp_star: (ts - tst).abs(),
            gap_sharp_flat: (ts + tf).abs(),
            gap_star_flat: (tst + tf).abs(),
            psi,
            jump_tilt,
        });
    }
    let sup = |f: fn(&ComparisonRow) -> f64| rows.iter().map(f).fold(0.0, f64::max);
    Ok(ComparisonTable {
        measures: labels,
        jump_points: points,
        sup_gap_sharp_star: sup(|r| r.gap_sharp_star),
        sup_gap_sharp_flat: sup(|r| r.gap_sharp_flat),
        sup_gap_star_flat: sup(|r| r.gap_star_flat),
        rows,
    })
}
