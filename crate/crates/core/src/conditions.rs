//! Sufficient existence and martingale conditions, evaluated before any
//! density is trusted.
//!
//! Every inequality is stored with both evaluated sides so it can be checked
//! independently. A failed sufficient condition yields `Unproven`, never
//! `Infeasible`.

use serde::{Deserialize, Serialize};

use crate::bdlp::BdlpModel;
use crate::cumulants::CumulantContext;
use crate::error::Result;
use crate::spemm::{hellinger_integral, JumpTilt};

/// Serializes non-finite reals as the strings `"inf"`, `"-inf"` and `"nan"`.
pub mod extended_real {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else if x.is_nan() {
            s.serialize_str("nan")
        } else if *x > 0.0 {
            s.serialize_str("inf")
        } else {
            s.serialize_str("-inf")
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Number(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Number(x) => Ok(x),
            Repr::Text(t) => match t.as_str() {
                "inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                "nan" => Ok(f64::NAN),
                other => Err(serde::de::Error::custom(format!("not an extended real: {other}"))),
            },
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Proven,
    Unproven,
}

/// How required entries combine into a verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    All,
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    SharpExistence,
    SharpMartingale,
    StarExistence,
    StarMartingale,
    FlatPositivity,
    FlatMartingale,
    StructurePreserving,
    MemmNoLeverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub id: String,
    pub holds: bool,
    #[serde(with = "extended_real")]
    pub lhs: f64,
    #[serde(with = "extended_real")]
    pub rhs: f64,
    pub statement: String,
    /// Informational entries are reported but do not enter the verdict.
    pub required: bool,
}

impl ConditionEntry {
    fn new(id: &str, holds: bool, lhs: f64, rhs: f64, statement: &str) -> Self {
        Self {
            id: id.to_string(),
            holds,
            lhs,
            rhs,
            statement: statement.to_string(),
            required: true,
        }
    }

    fn informational(mut self) -> Self {
        self.required = false;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub kind: ReportKind,
    pub rule: Rule,
    pub entries: Vec<ConditionEntry>,
    pub verdict: Verdict,
}

impl ConditionReport {
    fn new(kind: ReportKind, rule: Rule, entries: Vec<ConditionEntry>) -> Self {
        let mut required = entries.iter().filter(|e| e.required).map(|e| e.holds);
        let ok = match rule {
            Rule::All => required.all(|h| h),
            Rule::Any => required.any(|h| h),
        };
        Self {
            kind,
            rule,
            entries,
            verdict: if ok { Verdict::Proven } else { Verdict::Unproven },
        }
    }

    pub fn is_proven(&self) -> bool {
        self.verdict == Verdict::Proven
    }

    pub fn entry(&self, id: &str) -> Option<&ConditionEntry> {
        self.entries.iter().find(|e| e.id == id)
    }
}

/// Bounds on the measure parameters over the variance levels a path can visit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParameterBounds {
    /// `V₀e^{-λT}`.
    pub variance_floor: f64,
    /// `μ + λk(ρ)`.
    pub drift_at_zero: f64,
    /// `Θ♯₀`.
    pub theta0_sharp: f64,
    /// `Θ♯₁`.
    pub theta1_sharp: f64,
    /// `Θ*₁`.
    pub theta1_star: f64,
    /// `K₀`; equal to `Θ♯₁` without leverage.
    pub k0: f64,
}

fn pos(x: f64) -> f64 {
    x.max(0.0)
}

fn neg(x: f64) -> f64 {
    (-x).max(0.0)
}

pub fn parameter_bounds(ctx: &CumulantContext) -> Result<ParameterBounds> {
    let p = &ctx.params;
    let v_min = p.variance_floor();
    let k_rho = if p.rho == 0.0 { 0.0 } else { ctx.k(p.rho)? };
    let a = p.mu + p.lambda * k_rho;
    let bt = p.beta_tilde();
    let upper = pos(pos(a) / v_min + bt);
    let lower = neg(-neg(a) / v_min + bt);
    let theta1 = upper.max(lower);
    // ℓ(0) = ℓ̃(0) = k(ρ), so the linear bound is the same expression
    let theta1_star = {
        let l0 = if p.rho == 0.0 { 0.0 } else { ctx.ell_tilde(0.0)? };
        let a_star = p.mu + p.lambda * l0;
        pos(pos(a_star) / v_min + bt).max(neg(-neg(a_star) / v_min + bt))
    };
    let k0 = if p.rho == 0.0 {
        theta1
    } else {
        let k_2rho = ctx.k(2.0 * p.rho)?;
        let c = p.lambda * (k_2rho - 2.0 * k_rho);
        bt.abs().max((a / c).abs())
    };
    Ok(ParameterBounds {
        variance_floor: v_min,
        drift_at_zero: a,
        theta0_sharp: -upper,
        theta1_sharp: theta1,
        theta1_star,
        k0,
    })
}

/// `ℓ₀ = inf_{θ > ξ₁/ρ} ℓ(θ) = k(ξ₁ + ρ) - k(ξ₁⁻)`.
pub fn ell0(ctx: &CumulantContext) -> Result<f64> {
    let model = &ctx.params.bdlp;
    let xi1 = model.xi1();
    if ctx.rho() == 0.0 {
        return Ok(0.0);
    }
    if xi1.is_infinite() {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(model.cumulant(xi1 + ctx.rho())? - model.cumulant_at_abscissa())
}

pub fn existence_sharp(ctx: &CumulantContext) -> Result<ConditionReport> {
    let p = &ctx.params;
    let kind = ReportKind::SharpExistence;
    if p.rho == 0.0 {
        let e = ConditionEntry::new("no_leverage", true, p.rho, 0.0, "rho = 0: the root -(mu + beta~ v)/v always exists");
        return Ok(ConditionReport::new(kind, Rule::Any, vec![e]));
    }
    let xi1 = p.bdlp.xi1();
    let c1 = ConditionEntry::new(
        "xi1_infinite",
        xi1.is_infinite(),
        xi1,
        f64::INFINITY,
        "xi1 = +inf (all exponential moments of Z1 finite)",
    );
    if xi1.is_infinite() {
        return Ok(ConditionReport::new(kind, Rule::Any, vec![c1]));
    }
    let l0 = ell0(ctx)?;
    let c2 = ConditionEntry::new(
        "ell0_minus_infinite",
        l0 == f64::NEG_INFINITY,
        l0,
        f64::NEG_INFINITY,
        "xi1 < inf and ell0 = -inf",
    );
    let slope = p.beta_tilde() + xi1 / p.rho;
    let finite = l0.is_finite();
    let drift = p.mu + p.lambda * l0;
    let c3 = ConditionEntry::new(
        "boundary_slope_zero",
        finite && slope == 0.0 && drift <= 0.0,
        drift,
        0.0,
        "ell0 finite, beta + 1/2 + xi1/rho = 0 and mu + lambda ell0 <= 0",
    );
    let v_min = p.variance_floor();
    let threshold = if finite && slope < 0.0 { -drift / slope } else { f64::NAN };
    let c4 = ConditionEntry::new(
        "boundary_slope_negative",
        finite && slope < 0.0 && v_min >= threshold,
        v_min,
        threshold,
        "ell0 finite, beta + 1/2 + xi1/rho < 0 and V0 exp(-lambda T) >= -(mu + lambda ell0)/(beta + 1/2 + xi1/rho)",
    );
    Ok(ConditionReport::new(kind, Rule::Any, vec![c1, c2, c3, c4]))
}

/// The linear transform always has a root: `ℓ̃` runs from `-∞` to `0`.
pub fn existence_star(_ctx: &CumulantContext) -> Result<ConditionReport> {
    let e = ConditionEntry::new(
        "always",
        true,
        f64::NEG_INFINITY,
        0.0,
        "ell~ is increasing from -inf to 0, so the linear equation always has a unique root",
    );
    Ok(ConditionReport::new(ReportKind::StarExistence, Rule::All, vec![e]))
}

fn exp_moment_entry(model: &BdlpModel, id: &str, theta: f64, statement: &str) -> ConditionEntry {
    let c = 0.5 * theta * theta;
    ConditionEntry::new(id, model.exp_moment_finite(c), c, model.xi1(), statement)
}

/// Model-specific displays for the Γ-OU and IG-OU drivers, reported as printed.
fn family_displays(ctx: &CumulantContext, b: &ParameterBounds) -> Vec<ConditionEntry> {
    let p = &ctx.params;
    let (prefix, strict) = match p.bdlp {
        BdlpModel::GammaOu { .. } => ("gamma", true),
        BdlpModel::IgOu { .. } => ("ig", false),
        BdlpModel::PoissonToy { .. } => return Vec::new(),
    };
    let xi1 = p.bdlp.xi1();
    let upper = -b.theta0_sharp;
    let first = p.rho * upper;
    let second = 0.5 * b.theta1_sharp * b.theta1_sharp;
    let second_holds = if strict { second < xi1 } else { second <= xi1 };
    vec![
        ConditionEntry::new(
            &format!("{prefix}_display_first"),
            first < xi1,
            first,
            xi1,
            "rho [ (mu + lambda k(rho))_+ / (V0 exp(-lambda T)) + beta~ ]_+ < xi1, as printed for this family",
        )
        .informational(),
        ConditionEntry::new(
            &format!("{prefix}_display_second"),
            second_holds,
            second,
            xi1,
            if strict {
                "(1/2) Theta1^2 < xi1, as printed for this family"
            } else {
                "(1/2) Theta1^2 <= xi1, as printed for this family"
            },
        )
        .informational(),
    ]
}

pub fn martingale_sharp(ctx: &CumulantContext) -> Result<ConditionReport> {
    let b = parameter_bounds(ctx)?;
    let model = &ctx.params.bdlp;
    let c = ctx.params.rho * b.theta0_sharp;
    let mut entries = vec![
        ConditionEntry::new(
            "z_exp_moment",
            model.z_exp_moment_finite(c),
            c,
            model.xi1(),
            "E[Z1 exp(rho Theta0 Z1)] < inf, i.e. rho Theta0 < xi1",
        ),
        exp_moment_entry(model, "exp_moment", b.theta1_sharp, "E[exp(Theta1^2 Z1 / 2)] < inf, i.e. Theta1^2 / 2 < xi1"),
    ];
    entries.extend(family_displays(ctx, &b));
    Ok(ConditionReport::new(ReportKind::SharpMartingale, Rule::All, entries))
}

pub fn martingale_star(ctx: &CumulantContext) -> Result<ConditionReport> {
    let b = parameter_bounds(ctx)?;
    let model = &ctx.params.bdlp;
    let same = (b.theta1_star - b.theta1_sharp).abs() <= 1e-12 * b.theta1_sharp.abs().max(1.0);
    let entries = vec![
        exp_moment_entry(
            model,
            "exp_moment",
            b.theta1_star,
            "E[exp(Theta1*^2 Z1 / 2)] < inf, i.e. Theta1*^2 / 2 < xi1",
        ),
        ConditionEntry::new(
            "same_theta",
            same,
            b.theta1_star,
            b.theta1_sharp,
            "Theta1* = Theta1 since ell(0) = ell~(0) = k(rho)",
        )
        .informational(),
    ];
    Ok(ConditionReport::new(ReportKind::StarMartingale, Rule::All, entries))
}

pub fn positivity_flat(ctx: &CumulantContext) -> Result<ConditionReport> {
    let p = &ctx.params;
    let kind = ReportKind::FlatPositivity;
    if p.rho == 0.0 {
        let e = ConditionEntry::new("no_jumps", true, p.rho, 0.0, "rho = 0: the density has no jump factor");
        return Ok(ConditionReport::new(kind, Rule::All, vec![e]));
    }
    let k_rho = ctx.k(p.rho)?;
    let k_2rho = ctx.k(2.0 * p.rho)?;
    let lhs = (p.beta + 1.5) * p.variance_floor();
    let rhs = -p.mu + p.lambda * k_rho - p.lambda * k_2rho;
    let entries = vec![
        ConditionEntry::new("rho_nonpositive", p.rho <= 0.0, p.rho, 0.0, "rho <= 0"),
        ConditionEntry::new(
            "variance_floor",
            lhs >= rhs,
            lhs,
            rhs,
            "(beta + 3/2) V0 exp(-lambda T) >= -mu + lambda k(rho) - lambda k(2 rho)",
        ),
        ConditionEntry::new("beta_floor", p.beta >= -1.5, p.beta, -1.5, "beta >= -3/2"),
    ];
    Ok(ConditionReport::new(kind, Rule::All, entries))
}

pub fn martingale_flat(ctx: &CumulantContext) -> Result<ConditionReport> {
    let b = parameter_bounds(ctx)?;
    let model = &ctx.params.bdlp;
    let e = exp_moment_entry(model, "exp_moment", b.k0, "E[exp(K0^2 Z1 / 2)] < inf, i.e. K0^2 / 2 < xi1");
    Ok(ConditionReport::new(ReportKind::FlatMartingale, Rule::All, vec![e]))
}

/// Construction conditions of a structure-preserving measure.
pub fn structure_preserving(ctx: &CumulantContext, tilt: &JumpTilt) -> Result<ConditionReport> {
    let model = &ctx.params.bdlp;
    let h = hellinger_integral(model, tilt);
    let mut entries = vec![
        ConditionEntry::new(
            "tilt_positive",
            tilt.validate().is_ok(),
            f64::NAN,
            0.0,
            "y(x) > 0 for all x > 0",
        ),
        ConditionEntry::new("hellinger", h.is_finite(), h, f64::INFINITY, "integral of (sqrt(y) - 1)^2 U(dx) < inf"),
    ];
    if let JumpTilt::EsscherOnZ { theta_z } = tilt {
        let rho = ctx.rho();
        entries.push(ConditionEntry::new(
            "tilted_cumulant",
            model.exp_moment_finite(*theta_z) && model.exp_moment_finite(theta_z + rho),
            *theta_z,
            model.xi1(),
            "theta_z < xi1 so that k(theta_z) and k^y(rho) are finite",
        ));
    }
    Ok(ConditionReport::new(ReportKind::StructurePreserving, Rule::All, entries))
}

pub fn memm_no_leverage(ctx: &CumulantContext) -> Result<ConditionReport> {
    let rho = ctx.rho();
    let e = ConditionEntry::new("no_leverage", rho == 0.0, rho, 0.0, "rho = 0");
    Ok(ConditionReport::new(ReportKind::MemmNoLeverage, Rule::All, vec![e]))
}

/// Every Esscher and minimal-measure report.
pub fn all_reports(ctx: &CumulantContext) -> Result<Vec<ConditionReport>> {
    Ok(vec![
        existence_sharp(ctx)?,
        martingale_sharp(ctx)?,
        existence_star(ctx)?,
        martingale_star(ctx)?,
        positivity_flat(ctx)?,
        martingale_flat(ctx)?,
    ])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::BnsParams;
    use crate::numerics::Tolerance;
    use proptest::prelude::*;

    fn ctx(bdlp: BdlpModel, rho: f64, mu: f64, beta: f64, v0: f64) -> CumulantContext {
        CumulantContext::new(
            BnsParams {
                mu,
                beta,
                rho,
                lambda: 1.0,
                v0,
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

    #[test]
    fn poisson_reference_is_proven_everywhere() {
        let c = ctx(POISSON, -1.0, 0.0, 0.0, 1.0);
        for r in all_reports(&c).unwrap() {
            assert!(r.is_proven(), "{r:?}");
        }
        assert_eq!(existence_sharp(&c).unwrap().entries.len(), 1);
    }

    #[test]
    fn trivial_configuration() {
        let c = ctx(BdlpModel::GammaOu { shape: 1.0, rate: 2.0 }, -1.0, 0.0, -0.5, 1.0);
        let b = parameter_bounds(&c).unwrap();
        // a = λk(ρ) < 0 so only the negative branch can be non-zero
        assert_eq!(b.theta0_sharp, 0.0);
        let c0 = ctx(BdlpModel::GammaOu { shape: 1.0, rate: 2.0 }, 0.0, 0.0, -0.5, 1.0);
        let b0 = parameter_bounds(&c0).unwrap();
        assert_eq!((b0.theta1_sharp, b0.theta1_star), (0.0, 0.0));
        assert!(martingale_sharp(&c0).unwrap().is_proven());
        assert!(martingale_star(&c0).unwrap().is_proven());
        assert!(existence_sharp(&c0).unwrap().is_proven());
        assert!(positivity_flat(&c0).unwrap().is_proven());
    }

    #[test]
    fn gamma_display_arithmetic() {
        let (delta, gamma) = (1.0, 10.0);
        let c = ctx(BdlpModel::GammaOu { shape: delta, rate: gamma }, -1.0, 0.0, 0.0, 1.0);
        let r = martingale_sharp(&c).unwrap();
        let a: f64 = -delta / (gamma + 1.0);
        let v_min = (-1f64).exp();
        let theta = (a.max(0.0) / v_min + 0.5).max(0.0).max((-(-a).max(0.0) / v_min + 0.5).min(0.0).abs());
        let e = r.entry("gamma_display_second").unwrap();
        assert!((e.lhs - 0.5 * theta * theta).abs() < 1e-15);
        assert_eq!(e.holds, 0.5 * theta * theta < 10.0);
        assert!(r.is_proven());
        assert_eq!(r.entry("exp_moment").unwrap().lhs, e.lhs);
    }

    #[test]
    fn ell0_is_minus_infinity_for_the_three_drivers() {
        for m in [POISSON, BdlpModel::GammaOu { shape: 1.0, rate: 2.0 }, BdlpModel::IgOu { delta: 1.0, gamma: 2.0 }] {
            let c = ctx(m, -0.5, 0.0, 0.0, 1.0);
            assert_eq!(ell0(&c).unwrap(), f64::NEG_INFINITY);
            // the one-sided limit agrees: ℓ decreases without bound toward θ₀
            if c.theta0().is_finite() {
                let near: Vec<f64> = [1e-2, 1e-4, 1e-6].iter().map(|h| c.ell(c.theta0() + h).unwrap()).collect();
                assert!(near[0] > near[1] && near[1] > near[2] && near[2] < -10.0);
            }
            assert!(existence_sharp(&c).unwrap().is_proven());
        }
    }

    #[test]
    fn positivity_examples() {
        let c = ctx(POISSON, -1.0, 0.0, 0.0, 1.0);
        let r = positivity_flat(&c).unwrap();
        let e = r.entry("variance_floor").unwrap();
        let k1 = (-1f64).exp_m1();
        let k2 = (-2f64).exp_m1();
        assert!((e.lhs - 1.5 * (-1f64).exp()).abs() < 1e-15);
        assert!((e.rhs - (k1 - k2)).abs() < 1e-15);
        let c = ctx(POISSON, -1.0, 0.0, -2.0, 1.0);
        assert!(!positivity_flat(&c).unwrap().is_proven());
        assert!(!positivity_flat(&c).unwrap().entry("beta_floor").unwrap().holds);
    }

    #[test]
    fn star_and_sharp_bounds_coincide() {
        for m in [POISSON, BdlpModel::GammaOu { shape: 1.0, rate: 2.0 }, BdlpModel::IgOu { delta: 1.0, gamma: 2.0 }] {
            for (mu, beta) in [(0.2, 0.0), (-0.7, 0.4), (1.5, -2.0)] {
                let c = ctx(m, -1.0, mu, beta, 0.8);
                let b = parameter_bounds(&c).unwrap();
                assert!((b.theta1_star - b.theta1_sharp).abs() <= 1e-12 * b.theta1_sharp.max(1.0));
                assert!(martingale_star(&c).unwrap().entry("same_theta").unwrap().holds);
            }
        }
    }

    #[test]
    fn reports_are_reproducible_and_serialize() {
        let c = ctx(BdlpModel::IgOu { delta: 1.0, gamma: 2.0 }, -1.0, 0.2, 0.0, 1.0);
        let a = all_reports(&c).unwrap();
        let b = all_reports(&c).unwrap();
        for (x, y) in a.iter().zip(&b) {
            for (e, f) in x.entries.iter().zip(&y.entries) {
                assert!(e.lhs == f.lhs || (e.lhs.is_nan() && f.lhs.is_nan()));
                assert!(e.rhs == f.rhs || (e.rhs.is_nan() && f.rhs.is_nan()));
            }
        }
        let json = serde_json::to_string(&existence_sharp(&c).unwrap()).unwrap();
        assert!(json.contains("\"-inf\""));
        let back: ConditionReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.entries[1].lhs, f64::NEG_INFINITY);
    }

    #[test]
    fn structure_preserving_checks() {
        let c = ctx(BdlpModel::IgOu { delta: 1.0, gamma: 2.0 }, -1.0, 0.2, 0.0, 1.0);
        assert!(structure_preserving(&c, &JumpTilt::Identity).unwrap().is_proven());
        assert!(structure_preserving(&c, &JumpTilt::EsscherOnZ { theta_z: -1.0 }).unwrap().is_proven());
        assert!(!structure_preserving(&c, &JumpTilt::EsscherOnZ { theta_z: 3.0 }).unwrap().is_proven());
        assert!(!memm_no_leverage(&c).unwrap().is_proven());
    }

    proptest! {
        #[test]
        fn larger_initial_variance_never_strengthens(mu in -2.0f64..2.0, beta in -2.0f64..2.0, v0 in 0.05f64..5.0, factor in 1.0f64..10.0) {
            for m in [POISSON, BdlpModel::GammaOu { shape: 1.0, rate: 2.0 }] {
                let small = parameter_bounds(&ctx(m, -1.0, mu, beta, v0)).unwrap();
                let large = parameter_bounds(&ctx(m, -1.0, mu, beta, v0 * factor)).unwrap();
                prop_assert!(large.theta1_sharp <= small.theta1_sharp * (1.0 + 1e-12) + 1e-15);
                prop_assert!(-large.theta0_sharp <= -small.theta0_sharp * (1.0 + 1e-12) + 1e-15);
            }
        }
    }
}
