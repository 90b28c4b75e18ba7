//! Connection formulas between the four series across the sign atlas, and
//! the monodromy formulas for loops around the two x11 singular points.

use serde::Serialize;

use crate::atlas::{classify_d, region_membership_with_margin, DVector, EvaluationPoint, RegionTag};
use crate::error::{Error, Result};
use crate::quad::{continue_along_path, g_at, PathSpec};
use crate::scalar::{log_gamma, recip_gamma, C64, EPS_INT};
use crate::series::{f12_11_pq, f_series, tilde_f, Parameters};

/// The three series pairs related by a connection formula.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ConnectionPair {
    /// f12_11 against f12_21 (first-factor regrouping, exponent alpha1).
    Pair1,
    /// f12_11 against f22_11 (second-factor regrouping, exponent alpha2).
    Pair2,
    /// f12_21 against f22_21 (second-factor regrouping, exponent alpha2).
    Pair3,
}

impl ConnectionPair {
    pub const ALL: [ConnectionPair; 3] =
        [ConnectionPair::Pair1, ConnectionPair::Pair2, ConnectionPair::Pair3];

    /// (left series tag, right series tag, index of the coordinate whose
    /// modulus moves between the two regions).
    pub fn tags(&self) -> (RegionTag, RegionTag, usize) {
        match self {
            ConnectionPair::Pair1 => (RegionTag::D12_11, RegionTag::D12_21, 0),
            ConnectionPair::Pair2 => (RegionTag::D12_11, RegionTag::D22_11, 2),
            ConnectionPair::Pair3 => (RegionTag::D12_21, RegionTag::D22_21, 2),
        }
    }

    /// The sign triplet of the atlas vector that decides the phase: indices
    /// of (Im x1i, Im x2i, Im x2i/x1i) for the regrouped factor.
    fn triplet(&self) -> (usize, usize, usize) {
        match self {
            ConnectionPair::Pair1 => (0, 1, 4),
            ConnectionPair::Pair2 | ConnectionPair::Pair3 => (2, 3, 5),
        }
    }
}

impl std::fmt::Display for ConnectionPair {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            ConnectionPair::Pair1 => "f12_11~f12_21",
            ConnectionPair::Pair2 => "f12_11~f22_11",
            ConnectionPair::Pair3 => "f12_21~f22_21",
        };
        f.write_str(s)
    }
}

/// The connection phase on the sign domain d: with (s1, s2, s3) the sign bits
/// of (Im x1i, Im x2i, Im x2i/x1i) for the regrouped factor,
/// (0,1,0) gives e^{+2 pi i alpha}, (1,0,1) gives e^{-2 pi i alpha}, and all
/// other sign combinations give 1. This is the reciprocal of the principal
/// power product correction for x2i = x1i * (x2i/x1i).
pub fn connection_phase(pair: ConnectionPair, d: &DVector, alpha: C64) -> C64 {
    let (i1, i2, i5) = pair.triplet();
    let bits = (d.0[i1], d.0[i2], d.0[i5]);
    let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
    match bits {
        (0, 1, 0) => (tau * alpha).exp(),
        (1, 0, 1) => (-tau * alpha).exp(),
        _ => C64::new(1.0, 0.0),
    }
}

/// One connection verification record.
#[derive(Debug, Clone, Serialize)]
pub struct ConnectionReport {
    pub pair: String,
    pub d: DVector,
    pub phase: C64,
    pub lhs: C64,
    pub rhs: C64,
    pub residual: f64,
}

/// Verify the connection identity at x: the left series is carried to x by
/// path continuation of the integral (rotate the arguments inside the left
/// region, then slide the moving coordinate's modulus into the right
/// region, all inside the sign domain of x), and compared against
/// phase(d) times the right series at x.
pub fn verify_connection(
    pair: ConnectionPair,
    p: &Parameters,
    x: &EvaluationPoint,
    tol: f64,
) -> Result<ConnectionReport> {
    let (_, right_tag, mv) = pair.tags();
    let d = classify_d(x)?;
    let alpha = match pair {
        ConnectionPair::Pair1 => p.alpha1,
        _ => p.alpha2,
    };
    let phase = connection_phase(pair, &d, alpha);

    let in_right = region_membership_with_margin(x, p.a, p.b, 0.005)?;
    if !in_right.contains(&right_tag) {
        return Err(Error::EmptyOverlap(format!(
            "point must lie in {right_tag} for pair {pair}"
        )));
    }
    let rhs = phase * f_series(right_tag, p, x, tol.min(1e-12))?.value;

    // base point: same moduli, zero arguments, with the moving coordinate
    // scaled into the left region
    let coords = x.coords();
    let mut mods = [0.0f64; 4];
    for (i, c) in coords.iter().enumerate() {
        mods[i] = c.norm();
    }
    let mate = mv + 1; // x11 pairs with x21, x12 pairs with x22
    let needed = mods[mate] * p.b / 0.3;
    let scale_from = needed.max(mods[mv]);
    let mut base = mods;
    base[mv] = scale_from;
    let base_pt = EvaluationPoint::from_reals(base[0], base[1], base[2], base[3]);

    // rotation stage: arguments 0 -> arg(x_i) at fixed moduli
    let args: Vec<f64> = coords.iter().map(|c| c.im.atan2(c.re)).collect();
    let max_arg = args.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    let nrot = (max_arg / 0.3).ceil() as usize + 1;
    let mut verts = vec![base_pt];
    for s in 1..=nrot {
        let f = s as f64 / nrot as f64;
        let cs: Vec<C64> = (0..4)
            .map(|i| base[i] * C64::new(0.0, args[i] * f).exp())
            .collect();
        verts.push(EvaluationPoint::new(cs[0], cs[1], cs[2], cs[3]));
    }
    // slide stage: shrink the moving coordinate's modulus to the target
    let rot = *verts.last().unwrap();
    let mut final_coords = rot.coords();
    final_coords[mv] = coords[mv];
    verts.push(EvaluationPoint::new(
        final_coords[0],
        final_coords[1],
        final_coords[2],
        final_coords[3],
    ));
    let lhs = continue_along_path(p, &PathSpec::open(verts), tol.min(1e-11))?;

    let residual = (lhs - rhs).norm() / lhs.norm().max(rhs.norm()).max(1e-30);
    Ok(ConnectionReport {
        pair: pair.to_string(),
        d,
        phase,
        lhs,
        rhs,
        residual,
    })
}

/// The circuit coefficients of the Gauss function around z = 1:
/// returns (1 - A, B) for F(aa, bb; cc; z) -> (1-A) F + B z^{1-cc} F(..).
pub fn gauss_connection_coeffs(aa: C64, bb: C64, cc: C64) -> Result<(C64, C64)> {
    let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let den = C64::new(1.0, 0.0) - (-tau * cc).exp();
    if den.norm() <= 1e-12 {
        return Err(Error::Pole(format!("1 - e^(-2 pi i cc) vanishes at cc = {cc}")));
    }
    let a_coef = (C64::new(1.0, 0.0) - (-tau * aa).exp()) * (C64::new(1.0, 0.0) - (-tau * bb).exp())
        / den;
    let one_minus_a = C64::new(1.0, 0.0) - a_coef;

    let one_minus_c = C64::new(1.0, 0.0) - cc;
    if one_minus_c.norm() <= EPS_INT {
        return Err(Error::Pole("1 - cc vanishes".into()));
    }
    let lg_cc = log_gamma(cc)?;
    let b_coef = C64::new(0.0, 2.0 * std::f64::consts::PI) / one_minus_c
        * (lg_cc + lg_cc).exp()
        * recip_gamma(aa)
        * recip_gamma(bb)
        * recip_gamma(cc - aa)
        * recip_gamma(cc - bb)
        * (C64::new(0.0, std::f64::consts::PI) * (cc - aa - bb)).exp();
    Ok((one_minus_a, b_coef))
}

/// Which singular point the x11 loop encircles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MonodromyLoop {
    /// Around x11 = -a x21.
    GammaA,
    /// Around x11 = -b x21.
    GammaB,
}

impl std::fmt::Display for MonodromyLoop {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MonodromyLoop::GammaA => "gamma_a",
            MonodromyLoop::GammaB => "gamma_b",
        })
    }
}

/// The continuation data of the distinguished series around a loop:
/// continued f = f12_11(pq; x) + tilde_coeff * tilde_f(x).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MonodromyResult {
    pub pq: (C64, C64),
    pub tilde_coeff: C64,
}

/// The monodromy data and the assembled numeric value at x.
///
/// The tilde coefficient carries two factors on top of the bare
/// -2 pi i e^{i pi (alpha1+1)} / Gamma(-alpha1): the ratio
/// Gamma(gamma+1)/Gamma(gamma+alpha1+2) produced by resumming the circuit
/// remainders, and e^{-2 pi i gamma} aligning the principal branch of the
/// tilde prefactor (-x11/x21)^{gamma+1} at real positive points. Both were
/// pinned by high-precision continuation of the integral.
pub fn monodromy_rhs(
    lp: MonodromyLoop,
    p: &Parameters,
    x: &EvaluationPoint,
    tol: f64,
) -> Result<(MonodromyResult, C64)> {
    let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
    let ipi = C64::new(0.0, std::f64::consts::PI);
    let e1 = (tau * p.alpha1).exp();

    let gamma_ratio = (log_gamma(p.gamma + 1.0)? - log_gamma(p.gamma + p.alpha1 + 2.0)?).exp();
    let c_b = -C64::new(0.0, 2.0 * std::f64::consts::PI)
        * (ipi * (p.alpha1 + 1.0)).exp()
        * recip_gamma(-p.alpha1)
        * gamma_ratio
        * (-tau * p.gamma).exp();

    let (pq, tilde_coeff) = match lp {
        MonodromyLoop::GammaB => ((C64::new(1.0, 0.0), e1), c_b),
        MonodromyLoop::GammaA => ((e1, C64::new(1.0, 0.0)), -c_b),
    };
    let f_part = f12_11_pq(pq.0, pq.1, p, x, tol)?.value;
    let t_part = if tilde_coeff.norm() == 0.0 {
        C64::new(0.0, 0.0)
    } else {
        tilde_coeff * tilde_f(p, x, tol)?.value
    };
    Ok((MonodromyResult { pq, tilde_coeff }, f_part + t_part))
}

/// Continuation of the boundary term around the loop:
/// gamma_b sends [g] to e^{2 pi i alpha1} g(b,x) - g(a,x), gamma_a to
/// g(b,x) - e^{2 pi i alpha1} g(a,x).
pub fn g_monodromy(lp: MonodromyLoop, p: &Parameters, x: &EvaluationPoint) -> Result<C64> {
    let e1 = (C64::new(0.0, 2.0 * std::f64::consts::PI) * p.alpha1).exp();
    let gb = g_at(p, x, p.b, RegionTag::D22_21)?;
    let ga = g_at(p, x, p.a, RegionTag::D22_21)?;
    Ok(match lp {
        MonodromyLoop::GammaB => e1 * gb - ga,
        MonodromyLoop::GammaA => gb - e1 * ga,
    })
}

/// The keyhole loop in x11 realizing gamma_a or gamma_b from a real positive
/// base point: out along the upper half plane, counterclockwise around the
/// singular point, and back.
pub fn monodromy_loop_path(lp: MonodromyLoop, p: &Parameters, x0: &EvaluationPoint) -> PathSpec {
    let end = match lp {
        MonodromyLoop::GammaA => p.a,
        MonodromyLoop::GammaB => p.b,
    };
    let center = -end * x0.x21;
    let sep = (p.b - p.a) * x0.x21.norm();
    let radius = 0.3 * sep;
    let height = (0.4 * x0.x11.norm()).max(radius);
    PathSpec::keyhole_x11(x0, center, radius, height)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weyl::{apply, FunctionHandle};

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    fn params() -> Parameters {
        Parameters::from_reals(0.37, -0.21, 0.13, 0.8, 1.5).unwrap()
    }

    #[test]
    fn phase_patterns() {
        let alpha = c(0.37, 0.0);
        let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
        let plus = (tau * alpha).exp();
        let minus = (-tau * alpha).exp();
        // pair 1 reads (d1, d2, d5)
        let d = DVector([0, 1, 1, 1, 0, 1, 1]);
        assert_eq!(connection_phase(ConnectionPair::Pair1, &d, alpha), plus);
        let d = DVector([1, 0, 1, 1, 1, 1, 1]);
        assert_eq!(connection_phase(ConnectionPair::Pair1, &d, alpha), minus);
        let d = DVector([1, 1, 1, 1, 0, 1, 0]);
        assert_eq!(connection_phase(ConnectionPair::Pair1, &d, alpha), c(1.0, 0.0));
        let d = DVector([0, 0, 0, 0, 0, 0, 1]);
        assert_eq!(connection_phase(ConnectionPair::Pair1, &d, alpha), c(1.0, 0.0));
        // pairs 2 and 3 read (d3, d4, d6)
        let d = DVector([1, 1, 0, 1, 0, 0, 1]);
        assert_eq!(connection_phase(ConnectionPair::Pair2, &d, alpha), plus);
        let d = DVector([1, 1, 1, 0, 0, 1, 0]);
        assert_eq!(connection_phase(ConnectionPair::Pair3, &d, alpha), minus);
        // integer alpha: phase is 1 everywhere
        for d in DVector::all() {
            for pair in ConnectionPair::ALL {
                let ph = connection_phase(pair, &d, c(2.0, 0.0));
                assert!((ph - c(1.0, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn phase_chains_commute() {
        // carrying f12_11 to f22_21 through f12_21 or through f22_11 must
        // multiply to the same phase on every sign domain; the fourth edge
        // (f22_11 ~ f22_21) regroups the first factor, hence pair-1 rule
        let a1 = c(0.37, 0.0);
        let a2 = c(-0.21, 0.0);
        for d in DVector::all() {
            let via_21 = connection_phase(ConnectionPair::Pair1, &d, a1)
                * connection_phase(ConnectionPair::Pair3, &d, a2);
            let via_22 = connection_phase(ConnectionPair::Pair2, &d, a2)
                * connection_phase(ConnectionPair::Pair1, &d, a1);
            assert!((via_21 - via_22).norm() < 1e-15, "d = {d}");
        }
    }

    #[test]
    fn gauss_coeffs_family() {
        let p = params();
        let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
        let expect = (tau * p.alpha1).exp();
        for m in 0..=20 {
            let mf = m as f64;
            let (one_minus_a, _) =
                gauss_connection_coeffs(-p.alpha1, p.gamma + mf + 1.0, p.gamma + mf + 2.0)
                    .unwrap();
            assert!(
                (one_minus_a - expect).norm() < 1e-12,
                "m = {m}: {one_minus_a} vs {expect}"
            );
        }
    }

    #[test]
    fn gauss_coeff_b_vanishes_at_polynomial_cases() {
        let (_, b) =
            gauss_connection_coeffs(c(-3.0, 0.0), c(1.13, 0.0), c(2.13, 0.0)).unwrap();
        assert!(b.norm() < 1e-14);
        // finite sanity value
        let (oma, b) = gauss_connection_coeffs(c(0.5, 0.0), c(0.5, 0.0), c(1.5, 0.0)).unwrap();
        assert!(oma.is_finite() && b.is_finite());
    }

    #[test]
    fn monodromy_rhs_structure() {
        let p = params();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        let (rb, _vb) = monodromy_rhs(MonodromyLoop::GammaB, &p, &x, 1e-12).unwrap();
        let (ra, _va) = monodromy_rhs(MonodromyLoop::GammaA, &p, &x, 1e-12).unwrap();
        assert!((rb.tilde_coeff + ra.tilde_coeff).norm() < 1e-14);
        let e1 = (C64::new(0.0, 2.0 * std::f64::consts::PI) * p.alpha1).exp();
        assert!((rb.pq.1 - e1).norm() < 1e-15);
        assert!((ra.pq.0 - e1).norm() < 1e-15);
    }

    #[test]
    fn monodromy_trivial_for_integer_alpha1() {
        let p = Parameters::from_reals(2.0, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        let (r, v) = monodromy_rhs(MonodromyLoop::GammaB, &p, &x, 1e-12).unwrap();
        assert!(r.tilde_coeff.norm() < 1e-13);
        assert!((r.pq.1 - c(1.0, 0.0)).norm() < 1e-12);
        let base = f12_11_pq(c(1.0, 0.0), c(1.0, 0.0), &p, &x, 1e-12).unwrap().value;
        assert!((v - base).norm() < 1e-10 * base.norm().max(1.0));
    }

    #[test]
    fn g_monodromy_integer_alpha_is_boundary_term() {
        let p = Parameters::from_reals(1.0, -0.21, 0.13, 0.8, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        let gm = g_monodromy(MonodromyLoop::GammaB, &p, &x).unwrap();
        let bt = crate::quad::boundary_term(&p, &x, RegionTag::D22_21).unwrap();
        assert!((gm - bt).norm() < 1e-12 * bt.norm().max(1.0));
    }

    #[test]
    fn g_monodromy_a_zero() {
        let p = Parameters::from_reals(0.37, -0.21, 0.13, 0.0, 1.5).unwrap();
        let x = EvaluationPoint::from_reals(5.0, 0.2, 10.0, 0.3);
        let e1 = (C64::new(0.0, 2.0 * std::f64::consts::PI) * p.alpha1).exp();
        let gm = g_monodromy(MonodromyLoop::GammaB, &p, &x).unwrap();
        let gb = g_at(&p, &x, p.b, RegionTag::D22_21).unwrap();
        assert!((gm - e1 * gb).norm() < 1e-13 * gb.norm().max(1.0));
    }

    #[test]
    fn monodromy_combo_solves_continued_system() {
        // f12_11(pq) + c tilde satisfies the system with the continued
        // boundary term on the fourth row
        let p = params();
        let x = EvaluationPoint::from_reals(5.0, 1.0, 10.0, 1.0);
        let (r, _) = monodromy_rhs(MonodromyLoop::GammaB, &p, &x, 1e-13).unwrap();
        let combo = FunctionHandle::linear_combination(vec![
            (c(1.0, 0.0), FunctionHandle::from_pq_series(p, r.pq.0, r.pq.1)),
            (r.tilde_coeff, FunctionHandle::from_tilde(p)),
        ])
        .unwrap();
        let rows = crate::system::build_delta11_inhomogeneous(&p);
        let gm = g_monodromy(MonodromyLoop::GammaB, &p, &x).unwrap();
        for (i, (op, rhs)) in rows.iter().enumerate() {
            let lhs = apply(op, &combo, &p, &x, 1e-13).unwrap();
            let want = match rhs {
                crate::system::RhsDescriptor::BoundaryTerm => gm,
                _ => c(0.0, 0.0),
            };
            let scale = lhs.norm().max(want.norm()).max(1.0);
            assert!(
                (lhs - want).norm() / scale < 1e-6,
                "row {i}: {lhs} vs {want}"
            );
        }
    }

    #[test]
    fn connection_pair1_matching_pattern() {
        let p = params();
        // twisted instance of the (1,0,*,*,1) pattern inside the f12_21 region
        let x11 = 0.4 * C64::new(0.0, -2.9).exp();
        let x21 = C64::new(0.0, 0.3).exp();
        let x12 = 5.0 * C64::new(0.0, -0.05).exp();
        let x22 = C64::new(0.0, -0.2).exp();
        let x = EvaluationPoint::new(x11, x21, x12, x22);
        let r = verify_connection(ConnectionPair::Pair1, &p, &x, 1e-11).unwrap();
        let tau = C64::new(0.0, 2.0 * std::f64::consts::PI);
        assert!((r.phase - (-tau * p.alpha1).exp()).norm() < 1e-14, "{}", r.phase);
        assert!(r.residual < 1e-8, "residual {:.3e}", r.residual);
    }

    #[test]
    fn connection_pair1_other_domain() {
        let p = params();
        let x11 = 0.4 * C64::new(0.0, -0.2).exp();
        let x21 = C64::new(0.0, -0.05).exp();
        let x12 = 5.0 * C64::new(0.0, -0.05).exp();
        let x22 = C64::new(0.0, -0.2).exp();
        let x = EvaluationPoint::new(x11, x21, x12, x22);
        let r = verify_connection(ConnectionPair::Pair1, &p, &x, 1e-11).unwrap();
        assert!((r.phase - c(1.0, 0.0)).norm() < 1e-15);
        assert!(r.residual < 1e-8, "residual {:.3e}", r.residual);
    }
}
