//! Two-component Gaussian-mixture entropy and the selector mutual
//! information it induces.
//!
//! For `X = (1 - J) Y_0 + J Y_1` with `J ~ Bern(p)`, `Y_0 ~ N(0, 1)` and
//! `Y_1 ~ N(a, 1)`, the mutual information between the observation and the
//! selector bit is
//!
//! ```text
//! I(X; J) = h(g_{a,p}) - log sqrt(2 pi e)
//! ```
//!
//! where `g_{a,p}` is the mixture density and `h` its differential entropy
//! in nats. The value lives in `[0, log 2]`, vanishes at `a = 0`, increases
//! in `|a|`, and converges to `log(2) h_b(p)` as `a -> infinity` (`h_b` the
//! binary entropy in bits). The subspace-SGLD bounds evaluate this function
//! at `a = eta * Delta / (b * sigma)`.
//!
//! The entropy integral is computed by adaptive Gauss-Kronrod refinement on
//! `[min(0, a) - 12, max(0, a) + 12]`; the truncated tails contribute less
//! than 1e-25. Above `|a| = 40` the two components no longer overlap at
//! double precision and the limit value is returned directly.

use serde::{Deserialize, Serialize};

use crate::{invalid, Error, Result};

const SQRT_2PI: f64 = 2.5066282746310002;
const LOG_SQRT_2PI_E: f64 = 1.4189385332046727;
const QUAD_TOL: f64 = 1e-10;
const LIMIT_CROSSOVER: f64 = 40.0;

/// Mean separation `a` (possibly infinite) and component weight `p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub gap: f64,
    pub weight: f64,
}

impl MixtureParams {
    pub fn new(gap: f64, weight: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&weight) {
            return Err(invalid(format!("mixture weight {weight} outside [0, 1]")));
        }
        if gap.is_nan() {
            return Err(invalid("mixture gap is NaN"));
        }
        Ok(MixtureParams { gap, weight })
    }

    /// The `a -> infinity` regime (used by callers with zero noise scale).
    pub fn infinite(weight: f64) -> Result<Self> {
        Self::new(f64::INFINITY, weight)
    }
}

/// Mixture density `g_{a,p}(x) = (p e^{-x^2/2} + (1-p) e^{-(x-a)^2/2}) / sqrt(2 pi)`.
pub fn gmix_pdf(x: f64, params: &MixtureParams) -> Result<f64> {
    if !params.gap.is_finite() {
        return Err(invalid("gmix_pdf needs a finite mean separation"));
    }
    let p = params.weight;
    let a = params.gap;
    Ok((p * (-0.5 * x * x).exp() + (1.0 - p) * (-0.5 * (x - a) * (x - a)).exp()) / SQRT_2PI)
}

/// Binary entropy in bits, with `0 log 0 = 0`.
pub fn binary_entropy(p: f64) -> f64 {
    let term = |q: f64| if q <= 0.0 { 0.0 } else { -q * q.log2() };
    term(p) + term(1.0 - p)
}

/// Selector mutual information `f(a, p)` in nats, clamped to `[0, log 2]`.
pub fn selector_mi(params: &MixtureParams) -> Result<f64> {
    let p = params.weight;
    let a = params.gap.abs();
    let limit = 2f64.ln() * binary_entropy(p);
    if a > LIMIT_CROSSOVER {
        return Ok(limit);
    }
    if a == 0.0 || p == 0.0 || p == 1.0 {
        return Ok(0.0);
    }
    let params = MixtureParams { gap: a, weight: p };
    let integrand = |x: f64| {
        let g = gmix_pdf(x, &params).unwrap();
        if g > 0.0 {
            -g * g.ln()
        } else {
            0.0
        }
    };
    let (lo, hi) = (-12.0, a + 12.0);
    let entropy = adaptive_gauss_kronrod(&integrand, lo, hi, QUAD_TOL)?;
    Ok((entropy - LOG_SQRT_2PI_E).clamp(0.0, 2f64.ln()))
}

/// CSV grid of `f(a, p)` over the given axes, one row per `(a, p)` pair.
pub fn mi_table(gaps: &[f64], weights: &[f64]) -> Result<String> {
    let mut out = String::from("# columns: a, p, mi_nats\n");
    for &a in gaps {
        for &p in weights {
            let v = selector_mi(&MixtureParams::new(a, p)?)?;
            out.push_str(&format!("{:.17e},{:.17e},{:.17e}\n", a, p, v));
        }
    }
    Ok(out)
}

// 7-point Gauss / 15-point Kronrod nodes and weights on [-1, 1].
const KRONROD_NODES: [f64; 8] = [
    0.0,
    0.207784955007898,
    0.405845151377397,
    0.586087235467691,
    0.741531185599394,
    0.864864423359769,
    0.949107912342759,
    0.991455371120813,
];
const KRONROD_WEIGHTS: [f64; 8] = [
    0.209482141084728,
    0.204432940075298,
    0.190350578064785,
    0.169004726639267,
    0.140653259715525,
    0.104790010322250,
    0.063092092629979,
    0.022935322010529,
];
const GAUSS_WEIGHTS: [f64; 4] = [
    0.417959183673469,
    0.381830050505119,
    0.279705391489277,
    0.129484966168870,
];

fn gk15(f: &impl Fn(f64) -> f64, lo: f64, hi: f64) -> (f64, f64) {
    let c = 0.5 * (lo + hi);
    let h = 0.5 * (hi - lo);
    let f0 = f(c);
    let mut kronrod = KRONROD_WEIGHTS[0] * f0;
    let mut gauss = GAUSS_WEIGHTS[0] * f0;
    for k in 1..8 {
        let dx = h * KRONROD_NODES[k];
        let pair = f(c - dx) + f(c + dx);
        kronrod += KRONROD_WEIGHTS[k] * pair;
        if k % 2 == 0 {
            gauss += GAUSS_WEIGHTS[k / 2] * pair;
        }
    }
    let integral = kronrod * h;
    let err = ((kronrod - gauss) * h).abs();
    // standard Kronrod error sharpening
    let err = if err > 0.0 { (200.0 * err).powf(1.5).min(err) } else { err };
    (integral, err.max(f64::EPSILON * integral.abs()))
}

fn adaptive_gauss_kronrod(
    f: &impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
) -> Result<f64> {
    struct Segment {
        lo: f64,
        hi: f64,
        value: f64,
        err: f64,
    }
    let (value, err) = gk15(f, lo, hi);
    let mut segments = vec![Segment { lo, hi, value, err }];
    for _round in 0..60 {
        let total_err: f64 = segments.iter().map(|s| s.err).sum();
        if total_err <= tol {
            return Ok(segments.iter().map(|s| s.value).sum());
        }
        let worst = segments
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.err.partial_cmp(&b.1.err).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        let Segment { lo, hi, .. } = segments.swap_remove(worst);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            return Err(Error::Numerical(format!(
                "quadrature interval [{lo}, {hi}] cannot be refined further"
            )));
        }
        for (a, b) in [(lo, mid), (mid, hi)] {
            let (value, err) = gk15(f, a, b);
            segments.push(Segment { lo: a, hi: b, value, err });
        }
        if segments.len() > 4_096 {
            break;
        }
    }
    let total_err: f64 = segments.iter().map(|s| s.err).sum();
    if total_err <= tol * 10.0 {
        Ok(segments.iter().map(|s| s.value).sum())
    } else {
        Err(Error::Numerical(format!(
            "quadrature did not converge: residual error {total_err:.3e} over {} segments",
            segments.len()
        )))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn pdf_special_cases() {
        let std_normal = |x: f64| (-0.5 * x * x).exp() / SQRT_2PI;
        for x in [-1.5, 0.0, 0.7] {
            let zero_gap = MixtureParams::new(0.0, 0.3).unwrap();
            assert!((gmix_pdf(x, &zero_gap).unwrap() - std_normal(x)).abs() < 1e-15);
            let all_first = MixtureParams::new(4.0, 1.0).unwrap();
            assert!((gmix_pdf(x, &all_first).unwrap() - std_normal(x)).abs() < 1e-15);
        }
        let p = MixtureParams::new(2.0, 0.5).unwrap();
        assert!((gmix_pdf(1.0, &p).unwrap() - 0.24197072451914337).abs() < 1e-15);
        assert!(MixtureParams::new(1.0, 1.5).is_err());
    }

    #[test]
    fn pdf_integrates_to_one() {
        let p = MixtureParams::new(3.0, 0.25).unwrap();
        let mass =
            adaptive_gauss_kronrod(&|x| gmix_pdf(x, &p).unwrap(), -12.0, 15.0, 1e-12).unwrap();
        assert!((mass - 1.0).abs() < 1e-10, "mass {mass}");
    }

    #[test]
    fn binary_entropy_values() {
        assert_eq!(binary_entropy(0.5), 1.0);
        assert_eq!(binary_entropy(0.0), 0.0);
        assert_eq!(binary_entropy(1.0), 0.0);
        assert!((binary_entropy(0.25) - 0.8112781244591328).abs() < 1e-15);
    }

    #[test]
    fn mi_zero_gap_and_degenerate_weights() {
        for p in [0.0, 0.1, 0.5, 0.9, 1.0] {
            let v = selector_mi(&MixtureParams::new(0.0, p).unwrap()).unwrap();
            assert!(v.abs() < 1e-8, "f(0, {p}) = {v}");
        }
        for a in [0.5, 3.0] {
            assert_eq!(selector_mi(&MixtureParams::new(a, 0.0).unwrap()).unwrap(), 0.0);
            assert_eq!(selector_mi(&MixtureParams::new(a, 1.0).unwrap()).unwrap(), 0.0);
        }
    }

    #[test]
    fn mi_matches_independent_quadrature_oracle() {
        // frozen values from an independent adaptive quadrature
        let cases = [
            (2.0, 0.5, 0.33683082034683176),
            (0.025, 0.5, 7.811889711994979e-5),
            (1.0, 0.3, 0.09491047388679719),
            (0.125, 0.5, 0.0019493201887252898),
            (4.0, 0.25, 0.5110597321768853),
            (8.0, 0.5, 0.6930536454829199),
        ];
        for (a, p, expect) in cases {
            let v = selector_mi(&MixtureParams::new(a, p).unwrap()).unwrap();
            assert!((v - expect).abs() < 1e-9, "f({a}, {p}) = {v}, expected {expect}");
        }
    }

    #[test]
    fn mi_symmetries_and_monotonicity() {
        for (a, p) in [(0.7, 0.2), (2.5, 0.45), (5.0, 0.1)] {
            let plus = selector_mi(&MixtureParams::new(a, p).unwrap()).unwrap();
            let minus = selector_mi(&MixtureParams::new(-a, p).unwrap()).unwrap();
            assert!((plus - minus).abs() < 1e-10);
            let flipped = selector_mi(&MixtureParams::new(a, 1.0 - p).unwrap()).unwrap();
            assert!((plus - flipped).abs() < 1e-10);
        }

        // strictly increasing in a on the grid {0, 0.5, ..., 8}
        let mut prev = -1.0;
        for k in 0..=16 {
            let a = 0.5 * k as f64;
            let v = selector_mi(&MixtureParams::new(a, 0.5).unwrap()).unwrap();
            assert!(v > prev, "not increasing at a = {a}");
            assert!((0.0..=LN2 + 1e-12).contains(&v));
            prev = v;
        }

        // strictly increasing in p on [0, 1/2] for a != 0
        let mut prev = -1.0;
        for k in 0..=10 {
            let p = 0.05 * k as f64;
            let v = selector_mi(&MixtureParams::new(2.0, p).unwrap()).unwrap();
            assert!(v > prev || (k == 0 && v == 0.0), "not increasing at p = {p}");
            prev = v;
        }
    }

    #[test]
    fn mi_limit_and_crossover() {
        let inf = selector_mi(&MixtureParams::infinite(0.5).unwrap()).unwrap();
        assert!((inf - LN2).abs() < 1e-15);
        for p in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let limit = LN2 * binary_entropy(p);
            let at50 = selector_mi(&MixtureParams::new(50.0, p).unwrap()).unwrap();
            assert!((at50 - limit).abs() < 1e-6);
            // quadrature just below the crossover agrees with the limit value
            let below = selector_mi(&MixtureParams::new(39.5, p).unwrap()).unwrap();
            assert!((below - limit).abs() < 1e-10, "p = {p}: {below} vs {limit}");
        }
    }

    #[test]
    fn mi_quadrature_matches_mc_entropy() {
        let params = MixtureParams::new(2.0, 0.5).unwrap();
        let quad = selector_mi(&params).unwrap();
        let mut rng = crate::Seed::new(31).rng();
        let samples = 2_000_000;
        let mut acc = 0.0;
        for _ in 0..samples {
            let x: f64 = rng.sample::<f64, _>(StandardNormal)
                + if rng.gen::<f64>() < params.weight { 0.0 } else { params.gap };
            acc -= gmix_pdf(x, &params).unwrap().ln();
        }
        let mc = acc / samples as f64 - LOG_SQRT_2PI_E;
        assert!((mc - quad).abs() < 1e-3, "mc {mc} vs quad {quad}");
    }

    #[test]
    fn table_shape() {
        let t = mi_table(&[0.0, 1.0], &[0.25, 0.5]).unwrap();
        assert_eq!(t.lines().count(), 1 + 4);
        assert!(t.starts_with("# columns: a, p, mi_nats"));
    }
}
