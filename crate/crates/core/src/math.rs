//! Scalar float helpers usable with and without `std`, plus the special
//! functions behind GLM p-values.

#[cfg(feature = "std")]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        x.exp()
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        x.ln()
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        x.sqrt()
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        x.cos()
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        x.sin()
    }
    #[inline]
    pub fn pow(x: f64, y: f64) -> f64 {
        x.powf(y)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        x.abs()
    }
}

#[cfg(all(not(feature = "std"), feature = "libm"))]
mod imp {
    #[inline]
    pub fn exp(x: f64) -> f64 {
        libm::exp(x)
    }
    #[inline]
    pub fn ln(x: f64) -> f64 {
        libm::log(x)
    }
    #[inline]
    pub fn sqrt(x: f64) -> f64 {
        libm::sqrt(x)
    }
    #[inline]
    pub fn cos(x: f64) -> f64 {
        libm::cos(x)
    }
    #[inline]
    pub fn sin(x: f64) -> f64 {
        libm::sin(x)
    }
    #[inline]
    pub fn pow(x: f64, y: f64) -> f64 {
        libm::pow(x, y)
    }
    #[inline]
    pub fn abs(x: f64) -> f64 {
        libm::fabs(x)
    }
}

pub(crate) use imp::*;

use core::f64::consts::PI;

/// Natural log of the gamma function (Lanczos, g=7, 9 terms).
///
/// Relative error is below 1e-13 over the positive reals, which is ample for
/// the degrees of freedom seen here.
pub fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 8] = [
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_59,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        // Reflection: Γ(x)Γ(1−x) = π / sin(πx).
        return ln(PI / sin(PI * x)) - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = 0.999_999_999_999_809_93;
    for (i, c) in COEF.iter().enumerate() {
        acc += c / (x + (i + 1) as f64);
    }
    let t = x + 7.5;
    0.5 * ln(2.0 * PI) + (x + 0.5) * ln(t) - t + ln(acc)
}

/// Regularized incomplete beta function I_x(a, b).
///
/// Continued-fraction evaluation (modified Lentz), switching to the symmetric
/// expansion when x is past the central cut so the fraction always converges
/// quickly. Absolute accuracy is ~1e-14, well inside the 1e-10 the p-value
/// contract asks for.
pub fn betainc_reg(a: f64, b: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0 && b > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * ln(x) + b * ln(1.0 - x);
    let front = exp(ln_front);
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const MAX_ITER: usize = 300;
    const EPS: f64 = 1e-15;
    const FPMIN: f64 = 1e-300;

    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if abs(d) < FPMIN {
        d = FPMIN;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_ITER {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if abs(d) < FPMIN {
            d = FPMIN;
        }
        c = 1.0 + aa / c;
        if abs(c) < FPMIN {
            c = FPMIN;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if abs(delta - 1.0) < EPS {
            break;
        }
    }
    h
}

/// Two-sided p-value of a Student-t statistic with `df` degrees of freedom:
/// P(|T| >= |t|) = I_{df/(df+t²)}(df/2, 1/2).
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    debug_assert!(df > 0.0);
    if !t.is_finite() {
        return 0.0;
    }
    let x = df / (df + t * t);
    betainc_reg(0.5 * df, 0.5, x)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_gamma_matches_factorials() {
        // Γ(n) = (n−1)! for integer n.
        let cases = [
            (1.0, 0.0),
            (2.0, 0.0),
            (6.0, ln(120.0)),
            (16.0, ln(1_307_674_368_000.0)),
        ];
        for (x, want) in cases {
            assert!(
                abs(ln_gamma(x) - want) < 1e-11,
                "ln_gamma({x}) = {}",
                ln_gamma(x)
            );
        }
        // Γ(1/2) = √π.
        assert!(abs(ln_gamma(0.5) - ln(sqrt(PI))) < 1e-12);
    }

    #[test]
    fn betainc_reg_matches_reference() {
        // Frozen from scipy.special.betainc.
        let cases: [(f64, f64, f64, f64); 6] = [
            (0.5, 0.5, 0.3, 0.36901011956554536),
            (2.0, 3.0, 0.4, 0.5247999999999999),
            (5.0, 0.5, 0.9, 0.3166429150200122),
            (10.0, 10.0, 0.5, 0.5),
            (50.0, 0.5, 0.99, 0.3173043978741973),
            (1.0, 1.0, 0.123, 0.123),
        ];
        for (a, b, x, want) in cases {
            let got = betainc_reg(a, b, x);
            assert!(
                abs(got - want) < 1e-10,
                "betainc({a},{b},{x}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn student_t_matches_reference() {
        // Frozen from 2 * scipy.stats.t.sf(|t|, df).
        let cases: [(f64, f64, f64); 5] = [
            (0.0, 10.0, 1.0),
            (1.0, 1.0, 0.49999999999999956),
            (2.0, 10.0, 0.07338803477074039),
            (-2.0, 10.0, 0.07338803477074039),
            (5.0, 30.0, 2.3296685467007786e-05),
        ];
        for (t, df, want) in cases {
            let got = student_t_two_sided_p(t, df);
            assert!(
                abs(got - want) < 1e-10,
                "t_p({t},{df}) = {got}, want {want}"
            );
        }
    }

    #[test]
    fn betainc_symmetry() {
        // I_x(a,b) = 1 − I_{1−x}(b,a).
        for &(a, b, x) in &[(3.0, 7.0, 0.2), (0.7, 4.2, 0.6), (12.0, 0.5, 0.95)] {
            let lhs = betainc_reg(a, b, x);
            let rhs = 1.0 - betainc_reg(b, a, 1.0 - x);
            assert!(abs(lhs - rhs) < 1e-12);
        }
    }
}
