//! Fixtures shared by the benchmarks.

use bns_emm::{BdlpModel, BnsParams, CumulantContext, Tolerance};

/// Reference parameters with leverage `rho = -1` for the given driver.
pub fn reference(bdlp: BdlpModel) -> CumulantContext {
    let mu = if bdlp.is_atomic() { 0.0 } else { 0.2 };
    CumulantContext::new(
        BnsParams {
            mu,
            beta: 0.0,
            rho: -1.0,
            lambda: 1.0,
            v0: 1.0,
            s0: 100.0,
            horizon: 1.0,
            bdlp,
        },
        Tolerance::default(),
    )
    .expect("reference parameters are valid")
}

pub fn drivers() -> [BdlpModel; 3] {
    [
        BdlpModel::PoissonToy {
            jump_size: 1.0,
            intensity: 1.0,
        },
        BdlpModel::GammaOu { shape: 1.0, rate: 2.0 },
        BdlpModel::IgOu { delta: 1.0, gamma: 2.0 },
    ]
}
