//! Series engine: the four region expansions of the kernel integral, their
//! (p,q) generalization and termwise derivatives, the homogeneous 2F1-type
//! solution, Gauss 2F1, Appell F1, and the superposition representation.
//!
//! Every evaluator returns a [`SeriesResult`] whose `tail_bound` is a true
//! bound on the truncation error, built from geometric majorants of the
//! rising-factorial coefficients.

use serde::{Deserialize, Serialize};

use crate::atlas::{EvaluationPoint, RegionTag};
use crate::error::{Error, Result};
use crate::scalar::{
    branched_pow, falling, integer_distance, real_pow, C64, EPS_INT,
};

/// Convergence-region safety margin: ratio moduli must stay <= 1 - MARGIN.
pub const MARGIN: f64 = 0.005;

/// Default hard cap on the rectangular truncation order.
pub const DEFAULT_MAX_TERMS: usize = 1024;

/// Hard cap on the truncation order, overridable via `IHG_MAX_TERMS`.
pub fn max_terms() -> usize {
    static CAP: std::sync::OnceLock<usize> = std::sync::OnceLock::new();
    *CAP.get_or_init(|| {
        std::env::var("IHG_MAX_TERMS")
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_MAX_TERMS)
    })
}

/// Exponent/endpoint record shared by every evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Parameters {
    pub alpha1: C64,
    pub alpha2: C64,
    pub gamma: C64,
    pub a: f64,
    pub b: f64,
    /// beta = -gamma - 1, stored redundantly.
    pub beta: C64,
}

impl Parameters {
    pub fn new(alpha1: C64, alpha2: C64, gamma: C64, a: f64, b: f64) -> Result<Self> {
        if !(0.0 <= a && a < b) {
            return Err(Error::Endpoint(format!("need 0 <= a < b, got a={a}, b={b}")));
        }
        Ok(Parameters {
            alpha1,
            alpha2,
            gamma,
            a,
            b,
            beta: -gamma - 1.0,
        })
    }

    pub fn from_reals(alpha1: f64, alpha2: f64, gamma: f64, a: f64, b: f64) -> Result<Self> {
        Self::new(
            C64::new(alpha1, 0.0),
            C64::new(alpha2, 0.0),
            C64::new(gamma, 0.0),
            a,
            b,
        )
    }

    /// Parameters with alpha1, alpha2, gamma shifted by integers.
    pub fn shifted(&self, d_alpha1: i32, d_alpha2: i32, d_gamma: i32) -> Result<Self> {
        Parameters::new(
            self.alpha1 + d_alpha1 as f64,
            self.alpha2 + d_alpha2 as f64,
            self.gamma + d_gamma as f64,
            self.a,
            self.b,
        )
    }

    pub fn genericity(&self) -> GenericityReport {
        let combos = [
            ("gamma", self.gamma),
            ("gamma+alpha1", self.gamma + self.alpha1),
            ("gamma+alpha2", self.gamma + self.alpha2),
            ("gamma+alpha1+alpha2", self.gamma + self.alpha1 + self.alpha2),
        ];
        let violated: Vec<(String, C64)> = combos
            .iter()
            .filter(|(_, v)| integer_distance(*v) <= EPS_INT)
            .map(|(n, v)| (n.to_string(), *v))
            .collect();
        GenericityReport {
            ok: violated.is_empty(),
            violated,
        }
    }

    pub fn require_generic(&self) -> Result<()> {
        let rep = self.genericity();
        if rep.ok {
            Ok(())
        } else {
            let names: Vec<&str> = rep.violated.iter().map(|(n, _)| n.as_str()).collect();
            Err(Error::NonGenericParameters(names.join(", ")))
        }
    }
}

/// Which of gamma, gamma+alpha1, gamma+alpha2, gamma+alpha1+alpha2 are within
/// `EPS_INT` of an integer.
#[derive(Debug, Clone)]
pub struct GenericityReport {
    pub ok: bool,
    pub violated: Vec<(String, C64)>,
}

/// A complex value with a certified truncation tail bound.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SeriesResult {
    pub value: C64,
    pub tail_bound: f64,
    /// (k_max, m_max) rectangular truncation actually used.
    pub terms_used: (usize, usize),
}

// ---------------------------------------------------------------------------
// majorant helpers
// ---------------------------------------------------------------------------

/// Certified per-step growth ratio of |(-alpha)_k / k! (k+shift)^deg r^k|
/// valid for every k >= k0. Errors if the bound is >= 1.
fn step_ratio_sup(alpha_abs: f64, r: f64, shift: f64, deg: u32, k0: usize) -> Result<f64> {
    let k0f = k0 as f64;
    // sup_{k >= k0} (k + |alpha|)/(k + 1): attained at k0 when |alpha| >= 1,
    // approaches 1 from below otherwise. (k+1+shift)/(k+shift) decreases in k.
    let poch = if alpha_abs >= 1.0 {
        (k0f + alpha_abs) / (k0f + 1.0)
    } else {
        1.0
    };
    let poly = ((k0f + 1.0 + shift) / (k0f + shift)).powi(deg as i32);
    let q = r * poch * poly;
    if q >= 1.0 {
        Err(Error::NotConverged {
            tail_bound: f64::INFINITY,
            terms: k0,
        })
    } else {
        Ok(q)
    }
}

/// Sum_{k=0}^inf |(-alpha)_k|/k! (k+shift)^deg r^k, and the same sum from
/// k = from+1 on. Both are finite for r < 1; certified upper bounds.
fn majorant_sums(alpha: C64, r: f64, shift: f64, deg: u32, from: usize) -> Result<(f64, f64)> {
    debug_assert!(shift >= 1.0);
    let alpha_abs = alpha.norm();
    let mut term = shift.powi(deg as i32); // k = 0: |(-a)_0|/0! shift^deg
    let mut full = term;
    let mut tail = 0.0f64;
    let kmax = 4 * from.max(64) + 256;
    let mut k = 0usize;
    loop {
        let kf = k as f64;
        let factor = ((-alpha + kf).norm() / (kf + 1.0))
            * r
            * ((kf + 1.0 + shift) / (kf + shift)).powi(deg as i32);
        term *= factor;
        k += 1;
        full += term;
        if k > from {
            tail += term;
        }
        if k >= kmax {
            return Err(Error::NotConverged {
                tail_bound: f64::INFINITY,
                terms: k,
            });
        }
        // stop when the certified geometric remainder is negligible
        if k > from && k > 8 {
            let q = step_ratio_sup(alpha_abs, r, shift, deg, k)?;
            let rem = term * q / (1.0 - q);
            if rem <= 1e-16 * (full.abs() + 1e-300) {
                full += rem;
                tail += rem;
                return Ok((full, tail));
            }
        }
    }
}

/// inf over integer j >= j0 of |z + j| (unimodal in j).
fn shifted_abs_inf(z: C64, j0: usize) -> f64 {
    let j0f = j0 as f64;
    let jstar = (-z.re).round().max(j0f);
    let mut inf = (z + j0f).norm();
    for dj in [-1.0, 0.0, 1.0] {
        let j = jstar + dj;
        if j >= j0f {
            inf = inf.min((z + j).norm());
        }
    }
    inf
}

/// Number of nonzero coefficients of the k-series when (-alpha)_k terminates,
/// i.e. alpha is a nonnegative integer: (-alpha)_k = 0 for all k > alpha.
fn termination_cut(alpha: C64) -> Option<usize> {
    if alpha.im.abs() <= EPS_INT {
        let r = alpha.re.round();
        if r >= 0.0 && (alpha.re - r).abs() <= EPS_INT {
            return Some(r as usize + 1);
        }
    }
    None
}

/// sup over j >= j0 of |(num + j)/(den + j)|.
fn shifted_ratio_sup(num: C64, den: C64, j0: usize) -> f64 {
    let mut sup: f64 = 0.0;
    for j in j0..j0 + 64 {
        let jf = j as f64;
        let d = (den + jf).norm();
        if d == 0.0 {
            return f64::INFINITY;
        }
        sup = sup.max((num + jf).norm() / d);
    }
    // asymptotic bound for j >= j0 + 64
    let jf = (j0 + 64) as f64;
    let d = jf - den.norm();
    if d > 0.0 {
        sup = sup.max(1.0 + (num - den).norm() / d);
    } else {
        return f64::INFINITY;
    }
    sup
}

// ---------------------------------------------------------------------------
// the four region series and their termwise derivatives
// ---------------------------------------------------------------------------

/// Structural data of one region expansion: the t-exponent is
/// delta + sk k + sm m, the ratio variables are u^k v^m, and the generalized
/// monomial exponents are affine in (k, m).
struct TagShape {
    sk: f64,
    sm: f64,
    delta: C64,
    u: C64,
    v: C64,
}

fn tag_shape(tag: RegionTag, p: &Parameters, x: &EvaluationPoint) -> TagShape {
    let g1 = p.gamma + 1.0;
    match tag {
        RegionTag::D12_11 => TagShape {
            sk: 1.0,
            sm: 1.0,
            delta: g1,
            u: x.x21 / x.x11,
            v: x.x22 / x.x12,
        },
        RegionTag::D22_11 => TagShape {
            sk: 1.0,
            sm: -1.0,
            delta: g1 + p.alpha2,
            u: x.x21 / x.x11,
            v: x.x12 / x.x22,
        },
        RegionTag::D12_21 => TagShape {
            sk: -1.0,
            sm: 1.0,
            delta: g1 + p.alpha1,
            u: x.x11 / x.x21,
            v: x.x22 / x.x12,
        },
        RegionTag::D22_21 => TagShape {
            sk: -1.0,
            sm: -1.0,
            delta: g1 + p.alpha1 + p.alpha2,
            u: x.x11 / x.x21,
            v: x.x12 / x.x22,
        },
    }
}

/// Termwise-derivative evaluator for a region series (or its (p,q) variant).
///
/// The series is a sum of generalized monomials in the four coordinates, so a
/// partial-derivative multi-index acts termwise through falling factorials.
#[derive(Debug, Clone)]
pub struct SeriesEvaluator {
    pub tag: RegionTag,
    pub params: Parameters,
    /// Coefficients (p, q) of the endpoint powers: q b^e - p a^e.
    pub pq: (C64, C64),
    /// Derivative orders for (x11, x21, x12, x22).
    pub multi: [u32; 4],
}

impl SeriesEvaluator {
    pub fn new(tag: RegionTag, params: Parameters) -> Self {
        SeriesEvaluator {
            tag,
            params,
            pq: (C64::new(1.0, 0.0), C64::new(1.0, 0.0)),
            multi: [0; 4],
        }
    }

    pub fn with_pq(mut self, p: C64, q: C64) -> Self {
        self.pq = (p, q);
        self
    }

    pub fn with_multi(mut self, multi: [u32; 4]) -> Result<Self> {
        if multi.iter().sum::<u32>() > 4 {
            return Err(Error::DerivativeOrderTooHigh(multi.iter().sum()));
        }
        self.multi = multi;
        Ok(self)
    }

    /// Check region membership with margin, expressed through the binding
    /// ratios |u| b^{sk}, |u| a^{sk}, |v| b^{sm}, |v| a^{sm} <= 1 - MARGIN.
    fn check_region(&self, shape: &TagShape) -> Result<()> {
        let p = &self.params;
        let ub = shape.u.norm();
        let vb = shape.v.norm();
        let checks = [
            ub * p.b.powf(shape.sk),
            if p.a == 0.0 && shape.sk < 0.0 {
                f64::INFINITY
            } else if p.a == 0.0 {
                0.0
            } else {
                ub * p.a.powf(shape.sk)
            },
            vb * p.b.powf(shape.sm),
            if p.a == 0.0 && shape.sm < 0.0 {
                f64::INFINITY
            } else if p.a == 0.0 {
                0.0
            } else {
                vb * p.a.powf(shape.sm)
            },
        ];
        for (i, r) in checks.iter().enumerate() {
            if !(*r <= 1.0 - MARGIN) {
                return Err(Error::OutsideConvergenceRegion(format!(
                    "{} ratio {i} is {r:.6} (limit {})",
                    self.tag,
                    1.0 - MARGIN
                )));
            }
        }
        Ok(())
    }

    /// Prefactor of the differentiated series and the per-index falling
    /// factors. For tag D12_11 the term monomial is
    /// x11^{a1-k} x21^k x12^{a2-m} x22^m, and analogously for the others.
    fn prefactor(&self, x: &EvaluationPoint) -> Result<C64> {
        let p = &self.params;
        let [n11, n21, n12, n22] = self.multi;
        let int_pow = |z: C64, n: u32| -> C64 {
            let mut acc = C64::new(1.0, 0.0);
            for _ in 0..n {
                acc /= z;
            }
            acc
        };
        Ok(match self.tag {
            RegionTag::D12_11 => {
                branched_pow(x.x11, p.alpha1 - n11 as f64)?
                    * branched_pow(x.x12, p.alpha2 - n12 as f64)?
                    * int_pow(x.x21, n21)
                    * int_pow(x.x22, n22)
            }
            RegionTag::D22_11 => {
                branched_pow(x.x11, p.alpha1 - n11 as f64)?
                    * branched_pow(x.x22, p.alpha2 - n22 as f64)?
                    * int_pow(x.x21, n21)
                    * int_pow(x.x12, n12)
            }
            RegionTag::D12_21 => {
                branched_pow(x.x21, p.alpha1 - n21 as f64)?
                    * branched_pow(x.x12, p.alpha2 - n12 as f64)?
                    * int_pow(x.x11, n11)
                    * int_pow(x.x22, n22)
            }
            RegionTag::D22_21 => {
                branched_pow(x.x21, p.alpha1 - n21 as f64)?
                    * branched_pow(x.x22, p.alpha2 - n22 as f64)?
                    * int_pow(x.x11, n11)
                    * int_pow(x.x12, n12)
            }
        })
    }

    /// Falling-factorial factor attached to the k index (first coordinate
    /// pair) and to the m index (second pair).
    fn falling_k(&self, k: usize) -> C64 {
        let p = &self.params;
        let [n11, n21, _, _] = self.multi;
        let kf = k as f64;
        match self.tag {
            RegionTag::D12_11 | RegionTag::D22_11 => {
                falling(p.alpha1 - kf, n11 as usize) * falling(C64::new(kf, 0.0), n21 as usize)
            }
            RegionTag::D12_21 | RegionTag::D22_21 => {
                falling(C64::new(kf, 0.0), n11 as usize) * falling(p.alpha1 - kf, n21 as usize)
            }
        }
    }

    fn falling_m(&self, m: usize) -> C64 {
        let p = &self.params;
        let [_, _, n12, n22] = self.multi;
        let mf = m as f64;
        match self.tag {
            RegionTag::D12_11 | RegionTag::D12_21 => {
                falling(p.alpha2 - mf, n12 as usize) * falling(C64::new(mf, 0.0), n22 as usize)
            }
            RegionTag::D22_11 | RegionTag::D22_21 => {
                falling(C64::new(mf, 0.0), n12 as usize) * falling(p.alpha2 - mf, n22 as usize)
            }
        }
    }

    /// Lower bound on |delta + sk k + sm m| over the index range.
    fn denominator_floor(&self, shape: &TagShape, from: usize) -> f64 {
        if shape.sk > 0.0 && shape.sm > 0.0 {
            // the combination sk k + sm m only takes values >= from in the tail
            shifted_abs_inf(shape.delta, from)
        } else {
            integer_distance(shape.delta)
        }
    }

    /// Certified tail bound for rectangular truncation at order n.
    fn tail_bound(&self, shape: &TagShape, pref_norm: f64, n: usize) -> Result<f64> {
        let p = &self.params;
        let denom = self.denominator_floor(shape, n + 1);
        if denom <= EPS_INT {
            return Err(Error::NonGenericParameters(format!(
                "t-exponent offset {} hits an integer",
                shape.delta
            )));
        }
        let deg1 = (self.multi[0] + self.multi[1]) as u32;
        let deg2 = (self.multi[2] + self.multi[3]) as u32;
        let shift1 = p.alpha1.norm() + deg1 as f64 + 1.0;
        let shift2 = p.alpha2.norm() + deg2 as f64 + 1.0;
        let mut bound = 0.0f64;
        for (coef, end) in [(self.pq.1.norm(), p.b), (self.pq.0.norm(), p.a)] {
            if end == 0.0 || coef == 0.0 {
                continue;
            }
            let r1 = shape.u.norm() * end.powf(shape.sk);
            let r2 = shape.v.norm() * end.powf(shape.sm);
            let (full1, tail1) = majorant_sums(p.alpha1, r1, shift1, deg1, n)?;
            let (full2, tail2) = majorant_sums(p.alpha2, r2, shift2, deg2, n)?;
            let end_pow = real_pow(end, shape.delta).norm();
            bound += coef * end_pow * (full1 * tail2 + tail1 * full2);
        }
        Ok(pref_norm * bound / denom)
    }

    /// Evaluate with certified truncation error at most `tol` (absolute).
    pub fn eval(&self, x: &EvaluationPoint, tol: f64) -> Result<SeriesResult> {
        let p = &self.params;
        let shape = tag_shape(self.tag, p, x);

        // terminating indices: the series is a finite sum, exact everywhere
        let k_cut = termination_cut(p.alpha1);
        let m_cut = termination_cut(p.alpha2);
        if let (Some(kc), Some(mc)) = (k_cut, m_cut) {
            for k in 0..kc {
                for m in 0..mc {
                    let e = shape.delta + shape.sk * k as f64 + shape.sm * m as f64;
                    if e.norm() <= EPS_INT {
                        return Err(Error::NonGenericParameters(format!(
                            "t-exponent vanishes at ({k},{m})"
                        )));
                    }
                }
            }
            if p.a == 0.0 {
                self.a_zero_admissible(&shape, kc, mc)?;
            }
            let pref = self.prefactor(x)?;
            let n = kc.max(mc);
            return Ok(SeriesResult {
                value: pref * self.sum_rect(&shape, n),
                tail_bound: 0.0,
                terms_used: (kc - 1, mc - 1),
            });
        }

        // convergent double series: the t-exponent offset must stay off the
        // integers it can reach
        let reject = if shape.sk > 0.0 && shape.sm > 0.0 {
            shifted_abs_inf(shape.delta, 0) <= EPS_INT
        } else {
            integer_distance(shape.delta) <= EPS_INT
        };
        if reject {
            return Err(Error::NonGenericParameters(format!(
                "t-exponent offset {} hits an integer",
                shape.delta
            )));
        }
        self.check_region(&shape)?;
        if p.a == 0.0 && shape.delta.re <= 0.0 {
            return Err(Error::Endpoint(format!(
                "a = 0 requires Re t-exponent offset > 0, got {}",
                shape.delta
            )));
        }
        let pref = self.prefactor(x)?;
        let pref_norm = pref.norm();

        let cap = max_terms();
        let mut n = 8usize;
        let (n_final, bound) = loop {
            match self.tail_bound(&shape, pref_norm, n) {
                Ok(b) if b <= tol => break (n, b),
                Ok(b) => {
                    if n >= cap {
                        return Err(Error::NotConverged {
                            tail_bound: b,
                            terms: n,
                        });
                    }
                }
                Err(Error::NotConverged { .. }) => {
                    if n >= cap {
                        return Err(Error::NotConverged {
                            tail_bound: f64::INFINITY,
                            terms: n,
                        });
                    }
                }
                Err(e) => return Err(e),
            }
            n = (2 * n).min(cap);
        };

        let value = pref * self.sum_rect(&shape, n_final);
        Ok(SeriesResult {
            value,
            tail_bound: bound,
            terms_used: (n_final, n_final),
        })
    }

    /// With a = 0 every a-power exponent reached by the (finite) sum must
    /// have positive real part.
    fn a_zero_admissible(&self, shape: &TagShape, kc: usize, mc: usize) -> Result<()> {
        for k in 0..kc {
            for m in 0..mc {
                let e = shape.delta + shape.sk * k as f64 + shape.sm * m as f64;
                if e.re <= 0.0 {
                    return Err(Error::Endpoint(format!(
                        "a = 0 requires Re t-exponent > 0, got {e} at ({k},{m})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// The rectangular partial sum over k, m <= n (without the prefactor).
    fn sum_rect(&self, shape: &TagShape, n: usize) -> C64 {
        let p = &self.params;
        let one = C64::new(1.0, 0.0);
        let b_delta = real_pow(p.b, shape.delta) * self.pq.1;
        let a_delta = if p.a == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            real_pow(p.a, shape.delta) * self.pq.0
        };
        let ub = shape.u * p.b.powf(shape.sk);
        let ua = if p.a == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            shape.u * p.a.powf(shape.sk)
        };
        let vb = shape.v * p.b.powf(shape.sm);
        let va = if p.a == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            shape.v * p.a.powf(shape.sm)
        };

        let mut sum = C64::new(0.0, 0.0);
        // c_k = (-1)^k (-alpha1)_k / k! * (ratio)^k, updated multiplicatively
        let mut ckb = one;
        let mut cka = one;
        for k in 0..=n {
            let fk = self.falling_k(k);
            let kb = ckb * fk;
            let ka = cka * fk;
            if kb.norm() != 0.0 || ka.norm() != 0.0 {
                let base_k = shape.delta + shape.sk * k as f64;
                let mut cmb = one;
                let mut cma = one;
                for m in 0..=n {
                    let fm = self.falling_m(m);
                    if fm.norm() != 0.0 {
                        let e = base_k + shape.sm * m as f64;
                        sum += (b_delta * kb * cmb - a_delta * ka * cma) * fm / e;
                    }
                    let step = -(-p.alpha2 + m as f64) / (m as f64 + 1.0);
                    cmb *= step * vb;
                    cma *= step * va;
                }
            }
            let step = -(-p.alpha1 + k as f64) / (k as f64 + 1.0);
            ckb *= step * ub;
            cka *= step * ua;
        }
        sum
    }
}

/// Evaluate the region series for `tag` at x.
pub fn f_series(
    tag: RegionTag,
    p: &Parameters,
    x: &EvaluationPoint,
    tol: f64,
) -> Result<SeriesResult> {
    SeriesEvaluator::new(tag, *p).eval(x, tol)
}

/// The (p,q) generalization of the D12_11 series: the endpoint powers enter
/// as q b^e - p a^e. `f12_11_pq(1, 1, ..)` is the same code path as
/// `f_series(D12_11, ..)`.
pub fn f12_11_pq(
    pcoef: C64,
    qcoef: C64,
    p: &Parameters,
    x: &EvaluationPoint,
    tol: f64,
) -> Result<SeriesResult> {
    SeriesEvaluator::new(RegionTag::D12_11, *p)
        .with_pq(pcoef, qcoef)
        .eval(x, tol)
}

/// Termwise partial-derivative evaluator for the region series.
pub fn series_derivative(
    tag: RegionTag,
    p: &Parameters,
    multi: [u32; 4],
) -> Result<SeriesEvaluator> {
    SeriesEvaluator::new(tag, *p).with_multi(multi)
}

// ---------------------------------------------------------------------------
// tilde-f: the 2F1-type homogeneous solution
// ---------------------------------------------------------------------------

/// Termwise-derivative evaluator for the homogeneous solution
/// x11^{a1} x12^{a2} (-x11/x21)^{g+1} 2F1(-a2, g+1; g+a1+2; x11 x22/(x12 x21)).
#[derive(Debug, Clone)]
pub struct TildeEvaluator {
    pub params: Parameters,
    pub multi: [u32; 4],
}

impl TildeEvaluator {
    pub fn new(params: Parameters) -> Self {
        TildeEvaluator {
            params,
            multi: [0; 4],
        }
    }

    pub fn with_multi(mut self, multi: [u32; 4]) -> Result<Self> {
        if multi.iter().sum::<u32>() > 4 {
            return Err(Error::DerivativeOrderTooHigh(multi.iter().sum()));
        }
        self.multi = multi;
        Ok(self)
    }

    /// Evaluate. The series terms are generalized monomials
    /// c_j x11^{a1+g+1+j} x21^{-g-1-j} x12^{a2-j} x22^{j} up to a locally
    /// constant phase fixed at the evaluation point.
    pub fn eval(&self, x: &EvaluationPoint, tol: f64) -> Result<SeriesResult> {
        let p = &self.params;
        let g1 = p.gamma + 1.0;
        let cc = p.gamma + p.alpha1 + 2.0;
        if crate::scalar::near_nonpositive_integer(cc) {
            return Err(Error::Pole(format!("2F1 denominator parameter {cc}")));
        }
        let w = x.x11 * x.x22 / (x.x12 * x.x21);
        let r = w.norm();
        if !(r <= 1.0 - MARGIN) {
            return Err(Error::OutsideConvergenceRegion(format!(
                "|x11 x22/(x12 x21)| = {r:.6}"
            )));
        }

        // locally constant phase: (-x11/x21)^{g+1} relative to the split
        // monomial x11^{g+1} x21^{-g-1}
        let split = branched_pow(x.x11, g1)? * branched_pow(x.x21, -g1)?;
        let phase = branched_pow(-x.x11 / x.x21, g1)? / split;

        let [n11, n21, n12, n22] = self.multi;
        let e11 = p.alpha1 + g1; // + j
        let e21 = -g1; // - j
        let e12 = p.alpha2; // - j
                            // e22 = j
        let pref = phase
            * branched_pow(x.x11, e11 - n11 as f64)?
            * branched_pow(x.x21, e21 - n21 as f64)?
            * branched_pow(x.x12, e12 - n12 as f64)?
            * {
                let mut acc = C64::new(1.0, 0.0);
                for _ in 0..n22 {
                    acc /= x.x22;
                }
                acc
            };

        // term_j = (-a2)_j (g+1)_j / ((g+a1+2)_j j!) w^j, with falling factors
        let deg = (n11 + n21 + n12 + n22) as u32;
        let shift = e11.norm() + e21.norm() + e12.norm() + deg as f64 + 1.0;
        let cap = max_terms();
        let mut term = C64::new(1.0, 0.0);
        let mut sum = C64::new(0.0, 0.0);
        let mut j = 0usize;
        let mut bound = f64::INFINITY;
        while j <= cap {
            let jf = j as f64;
            let ff = falling(e11 + jf, n11 as usize)
                * falling(e21 - jf, n21 as usize)
                * falling(e12 - jf, n12 as usize)
                * falling(C64::new(jf, 0.0), n22 as usize);
            sum += term * ff;
            // certified tail: the 2F1 coefficient ratio sup times poly growth
            if j >= 8 {
                let s_num = shifted_ratio_sup(-p.alpha2, cc, j);
                let s_den = shifted_ratio_sup(g1, C64::new(1.0, 0.0), j);
                let poly = ((jf + 1.0 + shift) / (jf + shift)).powi(deg as i32);
                let q = r * s_num * s_den * poly;
                if q < 1.0 {
                    let next_ff_bound = (jf + 1.0 + shift).powi(deg as i32);
                    let step = (-p.alpha2 + jf).norm() * (g1 + jf).norm()
                        / ((cc + jf).norm() * (jf + 1.0))
                        * r;
                    let t1 = term.norm() * step * next_ff_bound;
                    bound = pref.norm() * t1 / (1.0 - q);
                    if bound <= tol {
                        j += 1;
                        break;
                    }
                }
            }
            let stepc = (-p.alpha2 + jf) * (g1 + jf) / ((cc + jf) * (jf + 1.0));
            term *= stepc * w;
            j += 1;
        }
        if bound > tol {
            return Err(Error::NotConverged {
                tail_bound: bound,
                terms: j,
            });
        }
        Ok(SeriesResult {
            value: pref * sum,
            tail_bound: bound,
            terms_used: (j, 0),
        })
    }
}

/// The homogeneous 2F1-type solution.
pub fn tilde_f(p: &Parameters, x: &EvaluationPoint, tol: f64) -> Result<SeriesResult> {
    TildeEvaluator::new(*p).eval(x, tol)
}

// ---------------------------------------------------------------------------
// Gauss 2F1 and Appell F1
// ---------------------------------------------------------------------------

/// Gauss hypergeometric series 2F1(aa, bb; cc; z), |z| < 1 - MARGIN.
pub fn gauss_2f1(aa: C64, bb: C64, cc: C64, z: C64, tol: f64) -> Result<SeriesResult> {
    if crate::scalar::near_nonpositive_integer(cc) {
        return Err(Error::Pole(format!("2F1 denominator parameter {cc}")));
    }
    let r = z.norm();
    if r == 0.0 {
        return Ok(SeriesResult {
            value: C64::new(1.0, 0.0),
            tail_bound: 0.0,
            terms_used: (0, 0),
        });
    }
    // polynomial case terminates exactly
    let poly_cut = match (polynomial_order(aa), polynomial_order(bb)) {
        (Some(x), Some(y)) => Some(x.min(y)),
        (x, y) => x.or(y),
    };
    if !(r <= 1.0 - MARGIN) && poly_cut.is_none() {
        return Err(Error::OutsideConvergenceRegion(format!("|z| = {r:.6}")));
    }
    let cap = max_terms();
    let mut term = C64::new(1.0, 0.0);
    let mut sum = C64::new(0.0, 0.0);
    for k in 0..=cap {
        sum += term;
        if let Some(n) = poly_cut {
            if k + 1 >= n {
                return Ok(SeriesResult {
                    value: sum,
                    tail_bound: 0.0,
                    terms_used: (k + 1, 0),
                });
            }
        }
        let kf = k as f64;
        term *= (aa + kf) * (bb + kf) / ((cc + kf) * (kf + 1.0)) * z;
        // term is now t_{k+1}; bound the tail from there on
        if k >= 8 {
            let q = r
                * shifted_ratio_sup(aa, cc, k + 1)
                * shifted_ratio_sup(bb, C64::new(1.0, 0.0), k + 1);
            if q < 1.0 {
                let bound = term.norm() / (1.0 - q);
                if bound <= tol {
                    return Ok(SeriesResult {
                        value: sum,
                        tail_bound: bound,
                        terms_used: (k + 1, 0),
                    });
                }
            }
        }
    }
    Err(Error::NotConverged {
        tail_bound: term.norm(),
        terms: cap,
    })
}

/// Order at which (z)_k becomes 0 because z is a nonpositive integer.
fn polynomial_order(z: C64) -> Option<usize> {
    if z.im.abs() <= EPS_INT {
        let r = z.re.round();
        if r <= 0.0 && (z.re - r).abs() <= EPS_INT {
            return Some((-r) as usize + 1);
        }
    }
    None
}

/// Appell F1(aa; b1, b2; cc; u, v) double series, |u|, |v| < 1 - MARGIN.
pub fn appell_f1(
    aa: C64,
    b1: C64,
    b2: C64,
    cc: C64,
    u: C64,
    v: C64,
    tol: f64,
) -> Result<SeriesResult> {
    if crate::scalar::near_nonpositive_integer(cc) {
        return Err(Error::Pole(format!("F1 denominator parameter {cc}")));
    }
    let ru = u.norm();
    let rv = v.norm();
    let b1_poly = polynomial_order(b1);
    let b2_poly = polynomial_order(b2);
    if !(ru <= 1.0 - MARGIN) && b1_poly.is_none() {
        return Err(Error::OutsideConvergenceRegion(format!("|u| = {ru:.6}")));
    }
    if !(rv <= 1.0 - MARGIN) && b2_poly.is_none() {
        return Err(Error::OutsideConvergenceRegion(format!("|v| = {rv:.6}")));
    }

    let cap = max_terms();
    let mut n = 8usize;
    loop {
        let kmax = b1_poly.map(|c| c.min(n + 1)).unwrap_or(n + 1);
        let mmax = b2_poly.map(|c| c.min(n + 1)).unwrap_or(n + 1);
        // term(k, m) over the rectangle, tracking boundary row/column sums
        let mut sum = C64::new(0.0, 0.0);
        let mut row_abs = 0.0f64; // sum over k of |t(k, mmax-1)|
        let mut col_abs = 0.0f64; // sum over m of |t(kmax-1, m)|
        let mut corner = 0.0f64;
        let mut t_row = C64::new(1.0, 0.0); // t(k, 0)
        for k in 0..kmax {
            let kf = k as f64;
            let mut t = t_row;
            for m in 0..mmax {
                let mf = m as f64;
                sum += t;
                if m == mmax - 1 {
                    row_abs += t.norm();
                }
                if k == kmax - 1 {
                    col_abs += t.norm();
                }
                if k == kmax - 1 && m == mmax - 1 {
                    corner = t.norm();
                }
                let step = (aa + kf + mf) * (b2 + mf) / ((cc + kf + mf) * (mf + 1.0));
                t *= step * v;
            }
            let step = (aa + kf) * (b1 + kf) / ((cc + kf) * (kf + 1.0));
            t_row *= step * u;
        }
        // certified tail over {k >= kmax} u {m >= mmax}
        let exact_k = b1_poly.map(|c| kmax >= c).unwrap_or(false);
        let exact_m = b2_poly.map(|c| mmax >= c).unwrap_or(false);
        let qk = if exact_k {
            0.0
        } else {
            ru * shifted_ratio_sup(aa, cc, kmax) * shifted_ratio_sup(b1, C64::new(1.0, 0.0), kmax)
        };
        let qm = if exact_m {
            0.0
        } else {
            rv * shifted_ratio_sup(aa, cc, mmax) * shifted_ratio_sup(b2, C64::new(1.0, 0.0), mmax)
        };
        if qk < 1.0 && qm < 1.0 {
            let tail_k = if exact_k { 0.0 } else { col_abs * qk / (1.0 - qk) };
            let tail_m = if exact_m { 0.0 } else { row_abs * qm / (1.0 - qm) };
            let tail_km = if exact_k || exact_m {
                0.0
            } else {
                corner * qk * qm / ((1.0 - qk) * (1.0 - qm))
            };
            let bound = tail_k + tail_m + tail_km;
            if bound <= tol {
                return Ok(SeriesResult {
                    value: sum,
                    tail_bound: bound,
                    terms_used: (kmax, mmax),
                });
            }
            if n >= cap {
                return Err(Error::NotConverged {
                    tail_bound: bound,
                    terms: n,
                });
            }
        } else if n >= cap {
            return Err(Error::NotConverged {
                tail_bound: f64::INFINITY,
                terms: n,
            });
        }
        n = (2 * n).min(cap);
    }
}

// ---------------------------------------------------------------------------
// alternative representations of the D12_11 series
// ---------------------------------------------------------------------------

/// The D12_11 series expressed through two Appell F1 values:
/// pref * (b^{g+1} F1(..; -x21 b/x11, -x22 b/x12) - a-version) / (g+1).
pub fn f12_11_via_f1(p: &Parameters, x: &EvaluationPoint, tol: f64) -> Result<SeriesResult> {
    let g1 = p.gamma + 1.0;
    if g1.norm() <= EPS_INT {
        return Err(Error::Pole("gamma + 1 vanishes".into()));
    }
    let pref = branched_pow(x.x11, p.alpha1)? * branched_pow(x.x12, p.alpha2)?;
    let aa = g1;
    let cc = p.gamma + 2.0;
    let part = |t: f64| -> Result<(C64, f64)> {
        if t == 0.0 {
            if g1.re <= 0.0 {
                return Err(Error::Endpoint("a = 0 requires Re gamma > -1".into()));
            }
            return Ok((C64::new(0.0, 0.0), 0.0));
        }
        let u = -x.x21 * t / x.x11;
        let v = -x.x22 * t / x.x12;
        let f1 = appell_f1(aa, -p.alpha1, -p.alpha2, cc, u, v, tol / 4.0)?;
        let tp = real_pow(t, g1) / g1;
        Ok((tp * f1.value, tp.norm() * f1.tail_bound))
    };
    let (vb, eb) = part(p.b)?;
    let (va, ea) = part(p.a)?;
    Ok(SeriesResult {
        value: pref * (vb - va),
        tail_bound: pref.norm() * (eb + ea),
        terms_used: (0, 0),
    })
}

/// The D12_11 series as a superposition of contiguous Gauss 2F1 values over
/// the second-factor index m.
pub fn f12_11_via_superposition(
    p: &Parameters,
    x: &EvaluationPoint,
    tol: f64,
) -> Result<SeriesResult> {
    let pref = branched_pow(x.x11, p.alpha1)? * branched_pow(x.x12, p.alpha2)?;
    let v = -x.x22 / x.x12;
    let zb = -x.x21 * p.b / x.x11;
    let za = -x.x21 * p.a / x.x11;
    let rv_b = v.norm() * p.b;
    let rv_a = v.norm() * p.a;
    if !(rv_b <= 1.0 - MARGIN && rv_a <= 1.0 - MARGIN) {
        return Err(Error::OutsideConvergenceRegion(format!(
            "|x22 t / x12| = {rv_b:.6}"
        )));
    }
    if !(zb.norm() <= 1.0 - MARGIN) {
        return Err(Error::OutsideConvergenceRegion(format!(
            "|x21 b / x11| = {:.6}",
            zb.norm()
        )));
    }

    // denominators gamma + m + 1, m >= 0
    let d_delta = shifted_abs_inf(p.gamma + 1.0, 0);
    if d_delta <= EPS_INT {
        return Err(Error::NonGenericParameters(
            "gamma + m + 1 vanishes for some m >= 0".into(),
        ));
    }

    // uniform bound on |2F1(-a1, g+m+1; g+m+2; z)| over m >= 0: the
    // coefficient ratio (c)_k/(c+1)_k telescopes to c/(c+k)
    let f_bound = {
        let mut sup: f64 = 1.0;
        let m_top = (2.0 - (p.gamma.re + 1.0)).max(0.0).ceil() as usize + 2;
        for m in 0..m_top {
            let c = p.gamma + 1.0 + m as f64;
            sup = sup.max(c.norm() / shifted_abs_inf(c, 0));
        }
        let (full, _) = majorant_sums(p.alpha1, zb.norm().max(za.norm()), 1.0, 0, 0)?;
        sup * full
    };

    let cap = max_terms();
    let mut sum = C64::new(0.0, 0.0);
    let mut coef_b = real_pow(p.b, p.gamma + 1.0); // b^{g+m+1} (-a2)_m / m! v^m
    let mut coef_a = if p.a == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        real_pow(p.a, p.gamma + 1.0)
    };
    if p.a == 0.0 && (p.gamma.re + 1.0) <= 0.0 {
        return Err(Error::Endpoint("a = 0 requires Re gamma > -1".into()));
    }
    let mut m = 0usize;
    let mut bound = f64::INFINITY;
    while m <= cap {
        let mf = m as f64;
        let denom = p.gamma + mf + 1.0;
        let fb = gauss_2f1(-p.alpha1, denom, denom + 1.0, zb, tol / 8.0)?;
        let term_b = coef_b / denom * fb.value;
        let term_a = if p.a == 0.0 {
            C64::new(0.0, 0.0)
        } else {
            let fa = gauss_2f1(-p.alpha1, denom, denom + 1.0, za, tol / 8.0)?;
            coef_a / denom * fa.value
        };
        sum += term_b - term_a;
        // certified m-tail: geometric in rv with 2F1 bounded by f_bound
        if m >= 8 {
            let q = rv_b.max(rv_a) * (mf + 1.0 + p.alpha2.norm()) / (mf + 2.0);
            if q < 1.0 {
                let next_coef =
                    (coef_b.norm() * rv_b + coef_a.norm() * rv_a) * (-p.alpha2 + mf).norm()
                        / (mf + 1.0);
                let dm = shifted_abs_inf(p.gamma + 1.0, m + 1);
                bound = pref.norm() * next_coef * f_bound / (dm * (1.0 - q));
                if bound <= tol {
                    m += 1;
                    break;
                }
            }
        }
        let step = -(-p.alpha2 + mf) / (mf + 1.0) * (-v);
        // the sign convention folds (-1)^m v^m = (-v)^m into the update
        coef_b *= step * p.b;
        coef_a *= step * p.a;
        m += 1;
    }
    if bound > tol {
        return Err(Error::NotConverged {
            tail_bound: bound,
            terms: m,
        });
    }
    Ok(SeriesResult {
        value: pref * sum,
        tail_bound: bound,
        terms_used: (m, 0),
    })
}
