//! Scalar special functions and generic solvers shared by the rest of the crate.
//!
//! Everything here is a pure function of its inputs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Stopping rule shared by the root finder and the quadrature routines.
///
/// For quadrature `max_iter` bounds the number of interval bisections.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerance {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl Tolerance {
    pub fn new(abs_tol: f64, rel_tol: f64, max_iter: usize) -> Result<Self> {
        let tol = Self {
            abs_tol,
            rel_tol,
            max_iter,
        };
        tol.validate()?;
        Ok(tol)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0 && self.abs_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "abs_tol",
                value: self.abs_tol,
                constraint: "must be positive",
            });
        }
        if !(self.rel_tol > 0.0 && self.rel_tol.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "rel_tol",
                value: self.rel_tol,
                constraint: "must be positive",
            });
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter {
                name: "max_iter",
                value: 0.0,
                constraint: "must be at least 1",
            });
        }
        Ok(())
    }
}

const INV_E: f64 = 0.367_879_441_171_442_33;

/// Principal branch of the Lambert W function, the inverse of `w * exp(w)` on `w >= -1`.
///
/// Halley iteration from a log-based starting point. Arguments beyond `1e300`
/// are routed through [`lambert_w0_of_exp`] so `exp(w)` never overflows.
pub fn lambert_w0(x: f64) -> Result<f64> {
    if x.is_nan() || x < -INV_E {
        // -1/e itself is not representable; accept the few ulps around it.
        if x >= -INV_E * (1.0 + 4.0 * f64::EPSILON) {
            return Ok(-1.0);
        }
        return Err(Error::Domain {
            what: "lambert_w0",
            value: x,
            constraint: "x >= -1/e",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    if x == f64::INFINITY {
        return Ok(f64::INFINITY);
    }
    if x > 1e300 {
        return lambert_w0_of_exp(x.ln());
    }

    let mut w = if x < -0.32 {
        // series about the branch point
        let p = (2.0 * (std::f64::consts::E * x + 1.0)).max(0.0).sqrt();
        -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p * p * p
    } else if x < 3.0 {
        let l = x.ln_1p();
        l * (1.0 - (1.0 + l).ln() / (2.0 + l))
    } else {
        let l1 = x.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - x;
        let wp1 = w + 1.0;
        if wp1 == 0.0 || f == 0.0 {
            break;
        }
        let dw = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1));
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w.max(-1.0))
}

/// `W0(exp(log_x))` without forming `exp(log_x)`.
///
/// Large arguments solve `w + ln(w) = log_x` by Newton's method instead.
pub fn lambert_w0_of_exp(log_x: f64) -> Result<f64> {
    if log_x.is_nan() {
        return Err(Error::Domain {
            what: "lambert_w0_of_exp",
            value: log_x,
            constraint: "finite log-argument",
        });
    }
    if log_x < 500.0 {
        return lambert_w0(log_x.exp());
    }
    let mut w = log_x - log_x.ln();
    for _ in 0..64 {
        let f = w + w.ln() - log_x;
        let dw = f / (1.0 + 1.0 / w);
        w -= dw;
        if dw.abs() <= 4.0 * f64::EPSILON * w.abs() {
            break;
        }
    }
    Ok(w)
}

/// Brent's method on a bracketing interval.
///
/// Stops when `|f(r)| <= abs_tol` or the bracket is narrower than
/// `rel_tol * |r|` (plus a few ulps). The returned point always lies in `[lo, hi]`.
pub fn find_root_bracketed<F>(mut f: F, lo: f64, hi: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> f64,
{
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let mut fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(Error::Domain {
            what: "find_root_bracketed",
            value: if fa.is_nan() { a } else { b },
            constraint: "objective must be finite at the bracket ends",
        });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::NoSignChange {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }

    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;

    for _ in 0..tol.max_iter {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let width_tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.rel_tol * b.abs();
        let m = 0.5 * (c - b);
        if fb.abs() <= tol.abs_tol || m.abs() <= width_tol || fb == 0.0 {
            return Ok(b);
        }

        if e.abs() >= width_tol && fa.abs() > fb.abs() {
            // inverse quadratic (or secant) step
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (width_tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        if d.abs() > width_tol {
            b += d;
        } else {
            b += width_tol.copysign(m);
        }
        fb = f(b);
        if fb.is_nan() {
            return Err(Error::Domain {
                what: "find_root_bracketed",
                value: b,
                constraint: "objective must be finite inside the bracket",
            });
        }
    }
    Err(Error::NoConvergence {
        what: "find_root_bracketed",
        iterations: tol.max_iter,
    })
}

// 21-point Gauss-Kronrod rule (QUADPACK qk21).
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689_003,
    0.973_906_528_517_171_720_077_964_012_084_452,
    0.930_157_491_355_708_226_001_207_180_059_508,
    0.865_063_366_688_984_510_732_096_688_423_493,
    0.780_817_726_586_416_897_063_717_578_345_042,
    0.679_409_568_299_024_406_234_327_365_114_874,
    0.562_757_134_668_604_683_339_000_099_272_694,
    0.433_395_394_129_247_190_799_265_943_165_784,
    0.294_392_862_701_460_198_131_126_603_103_866,
    0.148_874_338_981_631_210_884_826_001_129_720,
    0.0,
];
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_192,
    0.032_558_162_307_964_727_478_818_972_459_390,
    0.054_755_896_574_351_996_031_381_300_244_580,
    0.075_039_674_810_919_952_767_043_140_916_190,
    0.093_125_454_583_697_605_535_065_465_083_366,
    0.109_387_158_802_297_641_899_210_590_325_805,
    0.123_491_976_262_065_851_077_208_100_500_830,
    0.134_709_217_311_473_325_928_054_001_771_707,
    0.142_775_938_577_060_080_797_094_273_138_717,
    0.147_739_104_901_338_491_374_841_515_972_068,
    0.149_445_554_002_916_905_664_936_468_389_821,
];
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_332,
    0.149_451_349_150_580_593_145_776_339_657_697,
    0.219_086_362_515_982_043_995_534_934_228_163,
    0.269_266_719_309_996_355_091_226_921_569_469,
    0.295_524_224_714_752_870_173_892_994_651_338,
];

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    roundoff: f64,
}

fn gauss_kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Result<Segment> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = 0.0;
    let mut resk = WGK[10] * fc;
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = 0.5 * resk;
    let mut resasc = WGK[10] * (fc - mean).abs();
    for j in 0..10 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    if !value.is_finite() {
        return Err(Error::Divergent(format!(
            "non-finite integrand on [{a}, {b}]"
        )));
    }
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    if resasc != 0.0 && error != 0.0 {
        error = resasc * (200.0 * error / resasc).powf(1.5).min(1.0);
    }
    let roundoff = 50.0 * f64::EPSILON * resabs;
    Ok(Segment {
        a,
        b,
        value,
        error: error.max(roundoff),
        roundoff,
    })
}

const OVERFLOW_GUARD: f64 = 1e250;

/// Globally adaptive Gauss-Kronrod quadrature of `f` over the finite interval `[a, b]`.
///
/// The interval with the largest error estimate is bisected until the total
/// estimate drops below `max(abs_tol, rel_tol * |result|)`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, tol: Tolerance) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let mut segments = vec![gauss_kronrod(&mut f, a, b)?];
    let limit = tol.max_iter.max(1);
    for _ in 0..=limit {
        let total: f64 = segments.iter().map(|s| s.value).sum();
        let err: f64 = segments.iter().map(|s| s.error).sum();
        let floor: f64 = segments.iter().map(|s| s.roundoff).sum();
        if total.abs() > OVERFLOW_GUARD {
            return Err(Error::Divergent(format!(
                "partial integral {total:e} exceeds the overflow guard"
            )));
        }
        if err <= tol.abs_tol.max(tol.rel_tol * total.abs()) || err <= floor {
            return Ok(total);
        }
        // bisect the worst segment
        let (worst, _) = segments
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |acc, (i, s)| {
                if s.error > acc.1 {
                    (i, s.error)
                } else {
                    acc
                }
            });
        let seg = segments.swap_remove(worst);
        let mid = 0.5 * (seg.a + seg.b);
        if mid <= seg.a.min(seg.b) || mid >= seg.a.max(seg.b) {
            // cannot split further; accept what we have
            segments.push(seg);
            let total: f64 = segments.iter().map(|s| s.value).sum();
            return Ok(total);
        }
        segments.push(gauss_kronrod(&mut f, seg.a, mid)?);
        segments.push(gauss_kronrod(&mut f, mid, seg.b)?);
    }
    Err(Error::NoConvergence {
        what: "integrate",
        iterations: limit,
    })
}

/// `∫₀^∞ g(x)·density(x) dx` for Lévy-type densities.
///
/// The half line is split at `x = 1`. The head uses `x = t²`, which removes
/// integrable `x^{-1/2}` behaviour left when `g(x) = O(x)` meets an
/// `x^{-3/2}` density. The tail uses `x = 1 + s/(1 - s)` on `s ∈ [0, 1)`.
/// Points where the density underflows to zero contribute nothing.
pub fn integrate_levy<G, D>(g: G, density: D, tol: Tolerance) -> Result<f64>
where
    G: Fn(f64) -> f64,
    D: Fn(f64) -> f64,
{
    let weighted = |x: f64| {
        let d = density(x);
        if d == 0.0 {
            0.0
        } else {
            g(x) * d
        }
    };
    // split the budget so each piece can meet the requested accuracy
    let piece_tol = Tolerance {
        abs_tol: 0.5 * tol.abs_tol,
        ..tol
    };
    let head = integrate(|t| 2.0 * t * weighted(t * t), 0.0, 1.0, piece_tol)?;
    let tail = integrate(
        |s| {
            let one_minus = 1.0 - s;
            let x = 1.0 + s / one_minus;
            weighted(x) / (one_minus * one_minus)
        },
        0.0,
        1.0,
        piece_tol,
    )?;
    let total = head + tail;
    if !total.is_finite() || total.abs() > OVERFLOW_GUARD {
        return Err(Error::Divergent(format!("integral evaluates to {total:e}")));
    }
    Ok(total)
}

/// Shape-preserving piecewise cubic Hermite interpolant (Fritsch-Carlson).
#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    xs: Vec<f64>,
    ys: Vec<f64>,
    slopes: Vec<f64>,
}

impl MonotoneCubic {
    /// `xs` must be strictly increasing with at least two nodes.
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        let n = xs.len();
        if n < 2 || ys.len() != n || xs.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Precondition(
                "interpolation nodes must be strictly increasing, at least two".into(),
            ));
        }
        let h: Vec<f64> = xs.windows(2).map(|w| w[1] - w[0]).collect();
        let delta: Vec<f64> = (0..n - 1).map(|i| (ys[i + 1] - ys[i]) / h[i]).collect();
        let mut slopes = vec![0.0; n];
        slopes[0] = end_slope(h[0], h.get(1).copied(), delta[0], delta.get(1).copied());
        slopes[n - 1] = end_slope(
            h[n - 2],
            n.checked_sub(3).map(|i| h[i]),
            delta[n - 2],
            n.checked_sub(3).map(|i| delta[i]),
        );
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] <= 0.0 {
                slopes[i] = 0.0;
            } else {
                let w1 = 2.0 * h[i] + h[i - 1];
                let w2 = h[i] + 2.0 * h[i - 1];
                slopes[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        Ok(Self { xs, ys, slopes })
    }

    pub fn domain(&self) -> (f64, f64) {
        (self.xs[0], self.xs[self.xs.len() - 1])
    }

    pub fn nodes(&self) -> (&[f64], &[f64]) {
        (&self.xs, &self.ys)
    }

    /// `None` outside the node range.
    pub fn eval(&self, x: f64) -> Option<f64> {
        let (lo, hi) = self.domain();
        if !(x >= lo && x <= hi) {
            return None;
        }
        let i = match self.xs.partition_point(|&node| node <= x) {
            0 => 0,
            k if k >= self.xs.len() => self.xs.len() - 2,
            k => k - 1,
        };
        let h = self.xs[i + 1] - self.xs[i];
        let t = (x - self.xs[i]) / h;
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        Some(
            h00 * self.ys[i]
                + h10 * h * self.slopes[i]
                + h01 * self.ys[i + 1]
                + h11 * h * self.slopes[i + 1],
        )
    }
}

fn end_slope(h0: f64, h1: Option<f64>, d0: f64, d1: Option<f64>) -> f64 {
    let (Some(h1), Some(d1)) = (h1, d1) else {
        return d0;
    };
    let s = ((2.0 * h0 + h1) * d0 - h0 * d1) / (h0 + h1);
    if s.signum() != d0.signum() {
        0.0
    } else if d0.signum() != d1.signum() && s.abs() > 3.0 * d0.abs() {
        3.0 * d0
    } else {
        s
    }
}

/// Pairwise summation in a fixed order; the result depends only on the slice contents.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    const BLOCK: usize = 32;
    if values.len() <= BLOCK {
        return values.iter().sum();
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// `n` log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| {
                    if i == n - 1 {
                        hi
                    } else {
                        (a + (b - a) * i as f64 / (n - 1) as f64).exp()
                    }
                })
                .collect()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn newton_w(x: f64, start: f64) -> f64 {
        let mut w = start;
        for _ in 0..100 {
            let r = w * w.exp() - x;
            if r.abs() < 1e-14 {
                break;
            }
            w -= r / ((w + 1.0) * w.exp());
        }
        w
    }

    #[test]
    fn lambert_fixed_points() {
        assert_eq!(lambert_w0(0.0).unwrap(), 0.0);
        assert!((lambert_w0(std::f64::consts::E).unwrap() - 1.0).abs() < 1e-15);
        let oracle = newton_w(1.0, 0.5);
        assert!((oracle - 0.567_143_290_4).abs() < 1e-10);
        assert!((lambert_w0(1.0).unwrap() - oracle).abs() < 1e-14);
    }

    #[test]
    fn lambert_domain() {
        assert!(matches!(lambert_w0(-0.5), Err(Error::Domain { .. })));
        assert!((lambert_w0(-INV_E).unwrap() + 1.0).abs() < 1e-7);
        let w = lambert_w0(-0.3).unwrap();
        assert!((w * w.exp() + 0.3).abs() < 1e-15);
    }

    #[test]
    fn lambert_huge_arguments() {
        let w = lambert_w0_of_exp(2000.0).unwrap();
        assert!((w + w.ln() - 2000.0).abs() < 1e-12);
        let direct = lambert_w0(1e200).unwrap();
        let via_log = lambert_w0_of_exp(1e200f64.ln()).unwrap();
        assert!((direct - via_log).abs() < 1e-12);
    }

    #[test]
    fn brent_examples() {
        let tol = Tolerance {
            abs_tol: 1e-14,
            rel_tol: 1e-15,
            max_iter: 200,
        };
        let r = find_root_bracketed(|x| x - 2.0, 0.0, 5.0, tol).unwrap();
        assert!((r - 2.0).abs() < 1e-12);
        let r = find_root_bracketed(|x| x * x.exp() - 1.0, 0.0, 1.0, tol).unwrap();
        assert!((r - lambert_w0(1.0).unwrap()).abs() < 1e-12);

        // bisection oracle
        let cubic = |x: f64| x * x * x - x - 2.0;
        let (mut lo, mut hi) = (1.0, 2.0);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if cubic(mid) > 0.0 {
                hi = mid
            } else {
                lo = mid
            }
        }
        assert!((lo - 1.521_379_706_8).abs() < 1e-10);
        let r = find_root_bracketed(cubic, 1.0, 2.0, tol).unwrap();
        assert!((r - lo).abs() < 1e-10);
    }

    #[test]
    fn brent_errors() {
        let tol = Tolerance::default();
        assert!(matches!(
            find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, tol),
            Err(Error::NoSignChange { .. })
        ));
        let tight = Tolerance {
            abs_tol: 1e-300,
            rel_tol: 1e-300,
            max_iter: 2,
        };
        assert!(matches!(
            find_root_bracketed(|x| x.powi(3) - 0.3, 0.0, 1.0, tight),
            Err(Error::NoConvergence { .. })
        ));
    }

    #[test]
    fn levy_integral_examples() {
        let tol = Tolerance {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_iter: 500,
        };
        let (delta, gamma, theta) = (2.0, 4.0, 2.0);
        let density = |x: f64| delta * gamma * (-gamma * x).exp();
        let v = integrate_levy(|x| (theta * x).exp() - 1.0, density, tol).unwrap();
        assert!((v - 2.0).abs() < 1e-11, "{v}");
        let zero = integrate_levy(|_| 0.0, density, tol).unwrap();
        assert_eq!(zero, 0.0);
        let mean = integrate_levy(|x| x, |x| 2.0 * (-2.0 * x).exp(), tol).unwrap();
        assert!((mean - 0.5).abs() < 1e-12);
    }

    #[test]
    fn levy_integral_divergence() {
        let tol = Tolerance {
            abs_tol: 1e-10,
            rel_tol: 1e-10,
            max_iter: 300,
        };
        // x^{-3/2} mass near zero is not integrable against g = 1
        let r = integrate_levy(|_| 1.0, |x: f64| x.powf(-1.5) * (-x).exp(), tol);
        assert!(r.is_err());
    }

    #[test]
    fn pchip_reproduces_nodes_and_monotone_data() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        let p = MonotoneCubic::new(xs.clone(), ys.clone()).unwrap();
        for (x, y) in xs.iter().zip(&ys) {
            assert!((p.eval(*x).unwrap() - y).abs() < 1e-12);
        }
        let mut prev = f64::NEG_INFINITY;
        for i in 0..=900 {
            let y = p.eval(i as f64 * 0.01).unwrap();
            assert!(y >= prev);
            prev = y;
        }
        assert!(p.eval(-0.1).is_none());
        assert!(p.eval(9.1).is_none());
    }

    #[test]
    fn pairwise_sum_is_accurate() {
        let v = vec![0.1; 100_000];
        assert!((pairwise_sum(&v) - 10_000.0).abs() < 1e-9);
    }

    #[test]
    fn tolerance_validation() {
        assert!(Tolerance::new(0.0, 1e-3, 10).is_err());
        assert!(Tolerance::new(1e-3, -1.0, 10).is_err());
        assert!(Tolerance::new(1e-3, 1e-3, 0).is_err());
        assert!(Tolerance::new(1e-3, 1e-3, 1).is_ok());
    }
}

#[cfg(test)]
mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn lambert_round_trip(e in -6.0f64..6.0) {
            let x = 10f64.powf(e);
            let w = lambert_w0(x).unwrap();
            prop_assert!((w * w.exp() - x).abs() <= 1e-12 * x.max(1.0));
        }

        #[test]
        fn lambert_monotone(a in 1e-6f64..1e6, b in 1e-6f64..1e6) {
            prop_assume!(a < b);
            prop_assert!(lambert_w0(a).unwrap() < lambert_w0(b).unwrap());
        }

        #[test]
        fn brent_stays_in_bracket(root in -5.0f64..5.0, lo_off in 0.01f64..3.0, hi_off in 0.01f64..3.0) {
            let (lo, hi) = (root - lo_off, root + hi_off);
            let r = find_root_bracketed(|x| (x - root).powi(3) + (x - root), lo, hi, Tolerance::default()).unwrap();
            prop_assert!(r >= lo && r <= hi);
        }

        #[test]
        fn levy_integral_linear(a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let tol = Tolerance::default();
            let density = |x: f64| 3.0 * (-3.0 * x).exp();
            let g1 = move |x: f64| a * x;
            let g2 = move |x: f64| (b * x).exp() - 1.0;
            let lhs = integrate_levy(|x| g1(x) + g2(x), density, tol).unwrap();
            let rhs = integrate_levy(g1, density, tol).unwrap() + integrate_levy(g2, density, tol).unwrap();
            prop_assert!((lhs - rhs).abs() <= 2.0 * tol.abs_tol);
        }
    }
}
