//! Branch-disciplined complex scalar kernel.
//!
//! Principal-branch powers, complex log-gamma, rising factorials, and the
//! product-rule correction factor for principal powers. Everything here is a
//! pure function of its arguments and safe to call from any thread.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Distance to the nearest integer below which a parameter counts as integral.
pub const EPS_INT: f64 = 1e-9;
/// Distance to a branch boundary (an Im = 0 locus) below which a point counts
/// as lying on the boundary.
pub const EPS_BD: f64 = 1e-12;

/// Pochhammer symbols switch from the iterative product to a log-gamma ratio
/// above this order.
const POCHHAMMER_SWITCH: usize = 64;

/// Which case of the principal-power product rule applies to a pair (z, w).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchCase {
    /// Im z < 0, Im w < 0, Im zw > 0: correction e^{2 pi i alpha}.
    Plus2Pi,
    /// Im z > 0, Im w > 0, Im zw < 0: correction e^{-2 pi i alpha}.
    Minus2Pi,
    /// All other sign combinations: no correction.
    Neutral,
}

impl BranchCase {
    /// Classify from the three imaginary parts. Fails if any is within
    /// `EPS_BD` (scaled) of zero.
    pub fn classify(z: C64, w: C64) -> Result<BranchCase> {
        let zw = z * w;
        for (name, v) in [("Im z", z), ("Im w", w), ("Im zw", zw)] {
            if v.im.abs() <= EPS_BD * (1.0 + v.norm()) {
                return Err(Error::Boundary(format!("{name} vanishes")));
            }
        }
        Ok(if z.im < 0.0 && w.im < 0.0 && zw.im > 0.0 {
            BranchCase::Plus2Pi
        } else if z.im > 0.0 && w.im > 0.0 && zw.im < 0.0 {
            BranchCase::Minus2Pi
        } else {
            BranchCase::Neutral
        })
    }
}

/// Principal-branch logarithm with arg in (-pi, pi].
///
/// The negative real axis maps to arg = +pi regardless of the sign of the
/// floating-point zero in the imaginary part.
pub fn principal_log(z: C64) -> C64 {
    let re = z.norm().ln();
    let im = if z.im == 0.0 && z.re < 0.0 {
        std::f64::consts::PI
    } else {
        z.im.atan2(z.re)
    };
    C64::new(re, im)
}

/// Principal-branch power z^alpha, arg z in (-pi, pi].
///
/// For z = 0 the result is 0 when Re alpha > 0 and `ZeroBase` otherwise.
/// Agrees with the real power exactly for z > 0.
pub fn branched_pow(z: C64, alpha: C64) -> Result<C64> {
    if alpha == C64::new(0.0, 0.0) {
        return Ok(C64::new(1.0, 0.0));
    }
    if z == C64::new(0.0, 0.0) {
        return if alpha.re > 0.0 {
            Ok(C64::new(0.0, 0.0))
        } else {
            Err(Error::ZeroBase)
        };
    }
    Ok((alpha * principal_log(z)).exp())
}

/// Principal power of a positive real base.
pub fn real_pow(x: f64, alpha: C64) -> C64 {
    if x == 0.0 {
        return C64::new(0.0, 0.0);
    }
    (alpha * x.ln()).exp()
}

/// The factor F with (zw)^alpha = F * z^alpha * w^alpha for principal powers.
///
/// F is e^{2 pi i alpha}, e^{-2 pi i alpha} or 1 according to the sign case.
pub fn pow_product_factor(z: C64, w: C64, alpha: C64) -> Result<C64> {
    if alpha == C64::new(0.0, 0.0) {
        return Ok(C64::new(1.0, 0.0));
    }
    let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
    Ok(match BranchCase::classify(z, w)? {
        BranchCase::Plus2Pi => (tau * alpha).exp(),
        BranchCase::Minus2Pi => (-tau * alpha).exp(),
        BranchCase::Neutral => C64::new(1.0, 0.0),
    })
}

/// True if z is within `EPS_INT` of a nonpositive integer.
pub fn near_nonpositive_integer(z: C64) -> bool {
    if z.im.abs() > EPS_INT {
        return false;
    }
    let r = z.re.round();
    r <= 0.5 && (z.re - r).abs() <= EPS_INT
}

/// Distance from z to the nearest integer (in the complex plane).
pub fn integer_distance(z: C64) -> f64 {
    let r = z.re.round();
    C64::new(z.re - r, z.im).norm()
}

// Lanczos coefficients, g = 7, n = 9 (Godfrey / GSL).
const LANCZOS_G: f64 = 7.0;
const LANCZOS_P: [f64; 9] = [
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
];

/// Principal-branch log Gamma(z).
///
/// Lanczos approximation on Re z >= 0.5; on the left half plane the branch is
/// lifted through log Gamma(z) = log Gamma(z+n) - sum_j Log(z+j), which is
/// continuous on each of the upper and lower half planes and takes arg = +pi
/// on the negative real axis between poles. `exp` of the result is accurate
/// to about 1e-13 relative for |Re z| <= 50.
pub fn log_gamma(z: C64) -> Result<C64> {
    if near_nonpositive_integer(z) {
        return Err(Error::Pole(format!("log_gamma at {z}")));
    }
    if z.re >= 0.5 {
        return Ok(lanczos_log_gamma(z));
    }
    let n = (0.5 - z.re).ceil() as usize;
    let mut shift = C64::new(0.0, 0.0);
    for j in 0..n {
        shift += principal_log(z + j as f64);
    }
    Ok(lanczos_log_gamma(z + n as f64) - shift)
}

fn lanczos_log_gamma(z: C64) -> C64 {
    let zm1 = z - 1.0;
    let mut acc = C64::new(LANCZOS_P[0], 0.0);
    for (i, p) in LANCZOS_P.iter().enumerate().skip(1) {
        acc += p / (zm1 + i as f64);
    }
    let t = zm1 + LANCZOS_G + 0.5;
    let half_log_2pi = 0.5 * (2.0 * std::f64::consts::PI).ln();
    half_log_2pi + (zm1 + 0.5) * principal_log(t) - t + principal_log(acc)
}

/// 1/Gamma(z), entire; zero at nonpositive integers.
pub fn recip_gamma(z: C64) -> C64 {
    if near_nonpositive_integer(z) {
        return C64::new(0.0, 0.0);
    }
    match log_gamma(z) {
        Ok(lg) => (-lg).exp(),
        Err(_) => C64::new(0.0, 0.0),
    }
}

/// Rising factorial (a)_n = a (a+1) ... (a+n-1); (a)_0 = 1.
///
/// Small orders multiply out directly; large orders use a log-gamma ratio
/// unless a pole would be crossed, which keeps exact zeros exact.
pub fn pochhammer(a: C64, n: usize) -> C64 {
    if n == 0 {
        return C64::new(1.0, 0.0);
    }
    let pole_risk = a.im.abs() <= EPS_INT && a.re < n as f64;
    if n <= POCHHAMMER_SWITCH || pole_risk || a.norm() == 0.0 {
        let mut acc = C64::new(1.0, 0.0);
        for i in 0..n {
            acc *= a + i as f64;
        }
        return acc;
    }
    match (log_gamma(a + n as f64), log_gamma(a)) {
        (Ok(top), Ok(bot)) => (top - bot).exp(),
        _ => {
            let mut acc = C64::new(1.0, 0.0);
            for i in 0..n {
                acc *= a + i as f64;
            }
            acc
        }
    }
}

/// Falling factorial z (z-1) ... (z-n+1).
pub fn falling(z: C64, n: usize) -> C64 {
    let mut acc = C64::new(1.0, 0.0);
    for i in 0..n {
        acc *= z - i as f64;
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn assert_close(x: C64, y: C64, tol: f64) {
        // relative for large values, absolute near zero
        let scale = 1.0 + x.norm().max(y.norm());
        assert!(
            (x - y).norm() <= tol * scale,
            "{x} vs {y} (err {})",
            (x - y).norm() / scale
        );
    }

    #[test]
    fn pochhammer_basics() {
        assert_eq!(pochhammer(c(2.5, 0.0), 0), c(1.0, 0.0));
        assert_eq!(pochhammer(c(1.0, 0.0), 4), c(24.0, 0.0));
        assert_eq!(pochhammer(c(-2.0, 0.0), 3), c(0.0, 0.0));
    }

    #[test]
    fn pochhammer_recurrence() {
        // n capped where (a)_n still fits in f64 (~170! overflows)
        let a = c(0.3, -1.1);
        for n in 0..150 {
            let lhs = pochhammer(a, n + 1);
            let rhs = pochhammer(a, n) * (a + n as f64);
            let scale = lhs.norm().max(rhs.norm()).max(1.0);
            assert!((lhs - rhs).norm() <= 1e-10 * scale, "n={n}: {lhs} vs {rhs}");
        }
    }

    #[test]
    fn pochhammer_large_order_matches_reference() {
        // reference values from a 25-digit computation
        assert_close(
            pochhammer(c(2.5, 1.3), 150),
            c(8.645202797305898203e265, -7.9635701389825582484e265),
            1e-12,
        );
        assert_close(
            pochhammer(c(-0.37, 0.0), 120),
            c(-2.4686903903387177517e195, 0.0),
            1e-11,
        );
    }

    #[test]
    fn log_gamma_reference_values() {
        assert_close(log_gamma(c(1.0, 0.0)).unwrap(), c(0.0, 0.0), 1e-14);
        assert_close(
            log_gamma(c(0.5, 0.0)).unwrap(),
            c(0.57236494292470008707, 0.0),
            1e-13,
        );
        assert_close(
            log_gamma(c(3.7, -2.1)).unwrap(),
            c(0.78534695807382238876, -2.5830129251152622486),
            1e-13,
        );
        assert_close(
            log_gamma(c(-4.3, 0.9)).unwrap(),
            c(-4.546682277722291549, -13.664435659980496469),
            1e-13,
        );
        assert_close(
            log_gamma(c(10.0, 10.0)).unwrap(),
            c(8.2361317504487178437, 23.94870341378203736),
            1e-13,
        );
        assert_close(
            log_gamma(c(25.5, 0.0)).unwrap(),
            c(56.389167643719946744, 0.0),
            1e-13,
        );
        assert_close(
            log_gamma(c(0.001, 2.5)).unwrap(),
            c(-3.4652677565071285202, -1.0264213186219870834),
            1e-12,
        );
        // negative real axis, principal branch
        assert_close(
            log_gamma(c(-0.5, 0.0)).unwrap(),
            c(1.2655121234846453965, -std::f64::consts::PI),
            1e-13,
        );
    }

    #[test]
    fn log_gamma_recurrence_and_poles() {
        let z = c(1.7, 0.3);
        let lhs = log_gamma(z + 1.0).unwrap().exp();
        let rhs = z * log_gamma(z).unwrap().exp();
        assert_close(lhs, rhs, 1e-13);

        assert!(log_gamma(c(0.0, 0.0)).is_err());
        assert!(log_gamma(c(-3.0, 0.0)).is_err());
        assert!(log_gamma(c(-3.0 + 1e-12, 0.0)).is_err());
    }

    #[test]
    fn gamma_factorials() {
        for n in 1..=20u64 {
            let fact: f64 = (1..=n).map(|k| k as f64).product();
            let g = log_gamma(c(n as f64 + 1.0, 0.0)).unwrap().exp();
            assert_close(g, c(fact, 0.0), 1e-12);
        }
    }

    #[test]
    fn branched_pow_basics() {
        assert_close(
            branched_pow(c(1.0, 0.0), c(0.37, -2.0)).unwrap(),
            c(1.0, 0.0),
            0.0,
        );
        let v = branched_pow(c(0.0, 1.0), c(0.5, 0.0)).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert_close(v, c(s, s), 1e-15);
        // approach the cut from above
        let v = branched_pow(c(-1.0, 1e-12), c(0.5, 0.0)).unwrap();
        assert_close(v, c(0.0, 1.0), 1e-10);
        // exactly on the cut: arg = +pi
        let v = branched_pow(c(-1.0, 0.0), c(0.5, 0.0)).unwrap();
        assert_close(v, c(0.0, 1.0), 1e-15);

        assert_eq!(branched_pow(c(0.0, 0.0), c(2.0, 0.0)).unwrap(), c(0.0, 0.0));
        assert!(branched_pow(c(0.0, 0.0), c(-1.0, 0.0)).is_err());
        assert!(branched_pow(c(0.0, 0.0), c(0.0, 3.0)).is_err());
    }

    #[test]
    fn branched_pow_real_positive_is_exp_log() {
        let alpha = c(-0.7, 1.9);
        for &x in &[1e-8, 0.3, 1.0, 7.5, 1e12] {
            let v = branched_pow(c(x, 0.0), alpha).unwrap();
            assert_close(v, (alpha * x.ln()).exp(), 0.0);
        }
    }

    #[test]
    fn product_factor_cases() {
        let alpha = c(0.3, 0.0);
        let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
        // Im z < 0, Im w < 0, Im zw > 0
        let z = c(-1.0, -0.1);
        let w = c(-1.0, -0.1);
        assert_close(
            pow_product_factor(z, w, alpha).unwrap(),
            (tau * alpha).exp(),
            1e-15,
        );
        // arguments sum inside (-pi, pi): neutral
        assert_close(
            pow_product_factor(c(1.0, 1.0), c(1.0, 0.1), alpha).unwrap(),
            c(1.0, 0.0),
            0.0,
        );
        // zeroth power
        assert_close(
            pow_product_factor(c(-2.0, -3.0), c(0.5, -4.0), c(0.0, 0.0)).unwrap(),
            c(1.0, 0.0),
            0.0,
        );
        // boundary rejection
        assert!(pow_product_factor(c(1.0, 0.0), c(1.0, 1.0), alpha).is_err());
    }

    #[test]
    fn product_rule_identity_seeded() {
        use rand::Rng;
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let mut checked = 0usize;
        while checked < 10_000 {
            let z = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let w = c(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let alpha = c(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let zw = z * w;
            if z.norm() < 1e-3 || w.norm() < 1e-3 {
                continue;
            }
            if z.im.abs() < 1e-6 || w.im.abs() < 1e-6 || zw.im.abs() < 1e-6 {
                continue;
            }
            let f = pow_product_factor(z, w, alpha).unwrap();
            let lhs = branched_pow(zw, alpha).unwrap();
            let rhs = f * branched_pow(z, alpha).unwrap() * branched_pow(w, alpha).unwrap();
            assert_close(lhs, rhs, 1e-12);
            checked += 1;
        }
    }
}
